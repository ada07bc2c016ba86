//! Eigenpaths with a smooth gauge, the exact counterdiabatic Hamiltonian,
//! gauge potentials, adiabatic states and the quantum geometric tensor.

use nalgebra::DMatrix;

use crate::dynamics::StateTrajectory;
use crate::error::{Error, Result};
use crate::operator::{
    check_same_dim, hermitian_eigen, CMatrix, CVector, HermitianOperator, Spectrum, C64,
};
use crate::schedule::{check_grid, Hamiltonian, ParametricFamily};

/// Degeneracy threshold relative to the spectral radius.
pub const DEFAULT_EPS_GAP_REL: f64 = 1e-10;

pub(crate) fn gap_threshold(spec: &Spectrum, eps_rel: f64) -> f64 {
    eps_rel * spec.spectral_radius().max(f64::MIN_POSITIVE)
}

/// Fails if any pair of levels touching one of `levels` is closer than the
/// threshold.
fn check_gaps(spec: &Spectrum, levels: &[usize], eps_rel: f64, time: f64) -> Result<()> {
    let threshold = gap_threshold(spec, eps_rel);
    for &n in levels {
        for m in 0..spec.dim() {
            if m == n {
                continue;
            }
            let gap = (spec.values[m] - spec.values[n]).abs();
            if gap < threshold {
                return Err(Error::Degeneracy {
                    time,
                    levels: (n.min(m), n.max(m)),
                    gap,
                    threshold,
                });
            }
        }
    }
    Ok(())
}

pub(crate) fn hermitian_part(m: CMatrix) -> CMatrix {
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// `i hbar sum_{m != n} |n><n| dH |m><m| / (E_m - E_n)` from a precomputed
/// spectrum.
pub(crate) fn cd_from_spectrum(spec: &Spectrum, dh: &CMatrix, hbar: f64) -> CMatrix {
    let v = &spec.vectors;
    let m = v.adjoint() * dh * v;
    let d = spec.dim();
    let mut c = CMatrix::zeros(d, d);
    for n in 0..d {
        for k in 0..d {
            if n != k {
                let denom = spec.values[k] - spec.values[n];
                c[(n, k)] = C64::new(0.0, hbar) * m[(n, k)] / denom;
            }
        }
    }
    hermitian_part(v * c * v.adjoint())
}

/// The exact counterdiabatic Hamiltonian for `H` and `dH/dt`, with the
/// diagonal fixed to zero in the instantaneous eigenbasis.
pub fn exact_cd(h: &HermitianOperator, dh: &CMatrix, hbar: f64) -> Result<HermitianOperator> {
    exact_cd_with(h, dh, hbar, DEFAULT_EPS_GAP_REL, f64::NAN)
}

pub fn exact_cd_with(
    h: &HermitianOperator,
    dh: &CMatrix,
    hbar: f64,
    eps_gap_rel: f64,
    time: f64,
) -> Result<HermitianOperator> {
    check_same_dim(h.matrix(), dh)?;
    let spec = h.eigh();
    let all: Vec<usize> = (0..spec.dim()).collect();
    check_gaps(&spec, &all, eps_gap_rel, time)?;
    Ok(HermitianOperator::with_tolerance(
        cd_from_spectrum(&spec, dh, hbar),
        1e-10,
    )?)
}

/// `H_cd |n>` using only the gaps adjacent to level `n`.
pub fn cd_on_mode(h: &HermitianOperator, dh: &CMatrix, n: usize, hbar: f64) -> Result<CVector> {
    check_same_dim(h.matrix(), dh)?;
    cd_on_mode_spec(&h.eigh(), dh, n, hbar)
}

fn cd_on_mode_spec(spec: &Spectrum, dh: &CMatrix, n: usize, hbar: f64) -> Result<CVector> {
    if n >= spec.dim() {
        return Err(Error::InvalidArgument(format!("level {n} out of range")));
    }
    check_gaps(spec, &[n], DEFAULT_EPS_GAP_REL, f64::NAN)?;
    let v = &spec.vectors;
    let dh_n = v.adjoint() * (dh * v.column(n));
    let mut out = CVector::zeros(spec.dim());
    for m in 0..spec.dim() {
        if m != n {
            let coeff = C64::new(0.0, hbar) * dh_n[m] / (spec.values[n] - spec.values[m]);
            out += v.column(m) * coeff;
        }
    }
    Ok(out)
}

/// Eigen-decomposition of `H` together with the parallel-transport
/// eigenvector derivatives `d|m> = sum_{n != m} |n><n|dH|m> / (E_m - E_n)`,
/// one column per level.
pub fn parallel_transport_rates(
    h: &HermitianOperator,
    dh: &CMatrix,
) -> Result<(Spectrum, CMatrix)> {
    check_same_dim(h.matrix(), dh)?;
    let spec = h.eigh();
    let all: Vec<usize> = (0..spec.dim()).collect();
    check_gaps(&spec, &all, DEFAULT_EPS_GAP_REL, f64::NAN)?;
    let v = &spec.vectors;
    let m = v.adjoint() * dh * v;
    let d = spec.dim();
    let mut coeffs = CMatrix::zeros(d, d);
    for col in 0..d {
        for row in 0..d {
            if row != col {
                coeffs[(row, col)] = m[(row, col)] / (spec.values[col] - spec.values[row]);
            }
        }
    }
    let rates = v * coeffs;
    Ok((spec, rates))
}

/// The exact counterdiabatic term of a time-dependent Hamiltonian.
pub struct CounterdiabaticTerm<H> {
    pub base: H,
    pub hbar: f64,
    pub scale: f64,
}

impl<H: Hamiltonian> CounterdiabaticTerm<H> {
    pub fn new(base: H, hbar: f64) -> Self {
        Self {
            base,
            hbar,
            scale: 1.0,
        }
    }

    /// Multiplies the term by a constant factor.
    pub fn scaled(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }
}

impl<H: Hamiltonian> Hamiltonian for CounterdiabaticTerm<H> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn at(&self, t: f64) -> Result<HermitianOperator> {
        let h = self.base.at(t)?;
        let dh = self.base.rate(t)? * C64::new(self.scale, 0.0);
        exact_cd_with(&h, &dh, self.hbar, DEFAULT_EPS_GAP_REL, t)
    }
}

/// Counterdiabatic driving of a single level `n`:
/// `|c><n| + |n><c|` with `|c> = H_cd |n>`. It transports level `n` exactly
/// and only needs the gaps adjacent to it.
pub fn mode_cd(
    h: &HermitianOperator,
    dh: &CMatrix,
    n: usize,
    hbar: f64,
) -> Result<HermitianOperator> {
    check_same_dim(h.matrix(), dh)?;
    let spec = h.eigh();
    let c = cd_on_mode_spec(&spec, dh, n, hbar)?;
    let m = &c * spec.vector(n).adjoint();
    HermitianOperator::with_tolerance(&m + m.adjoint(), 1e-10)
}

/// [`mode_cd`] of a time-dependent Hamiltonian.
pub struct ModeCounterdiabaticTerm<H> {
    pub base: H,
    pub level: usize,
    pub hbar: f64,
}

impl<H: Hamiltonian> ModeCounterdiabaticTerm<H> {
    pub fn new(base: H, level: usize, hbar: f64) -> Self {
        Self { base, level, hbar }
    }
}

impl<H: Hamiltonian> Hamiltonian for ModeCounterdiabaticTerm<H> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn at(&self, t: f64) -> Result<HermitianOperator> {
        mode_cd(
            &self.base.at(t)?,
            &self.base.rate(t)?,
            self.level,
            self.hbar,
        )
    }
}

/// The adiabatic gauge potential `A_i(lambda)`, so that
/// `H_cd = sum_i (d lambda_i / dt) A_i`.
pub fn adiabatic_gauge_potential<F: ParametricFamily + ?Sized>(
    family: &F,
    lambda: &[f64],
    index: usize,
    hbar: f64,
) -> Result<HermitianOperator> {
    let h = family.hamiltonian(lambda)?;
    let dh = family.derivative(lambda, index)?;
    exact_cd(&h, &dh, hbar)
}

/// `hbar |<n| dH |m>| / (E_m - E_n)^2`.
pub fn adiabaticity_metric(
    h: &HermitianOperator,
    dh: &CMatrix,
    m: usize,
    n: usize,
    hbar: f64,
) -> Result<f64> {
    check_same_dim(h.matrix(), dh)?;
    if m == n || m >= h.dim() || n >= h.dim() {
        return Err(Error::InvalidArgument(format!(
            "adiabaticity metric needs distinct levels in range, got ({m}, {n})"
        )));
    }
    let spec = h.eigh();
    let gap = spec.values[m] - spec.values[n];
    let threshold = gap_threshold(&spec, DEFAULT_EPS_GAP_REL);
    if gap.abs() < threshold {
        return Err(Error::Degeneracy {
            time: f64::NAN,
            levels: (m.min(n), m.max(n)),
            gap: gap.abs(),
            threshold,
        });
    }
    let element = spec.vector(n).dotc(&(dh * spec.vector(m)));
    Ok(hbar * element.norm() / (gap * gap))
}

/// `g_ij = Re sum_{m != n} conj(<m|d_i H|n>) <m|d_j H|n> / (E_n - E_m)^2`.
pub fn quantum_geometric_tensor<F: ParametricFamily + ?Sized>(
    family: &F,
    lambda: &[f64],
    n: usize,
) -> Result<DMatrix<f64>> {
    let h = family.hamiltonian(lambda)?;
    let spec = h.eigh();
    if n >= spec.dim() {
        return Err(Error::InvalidArgument(format!("level {n} out of range")));
    }
    check_gaps(&spec, &[n], DEFAULT_EPS_GAP_REL, f64::NAN)?;
    let p = family.n_params();
    let v = &spec.vectors;
    let columns: Vec<CVector> = (0..p)
        .map(|i| Ok(v.adjoint() * (family.derivative(lambda, i)? * v.column(n))))
        .collect::<Result<_>>()?;
    let mut g = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let mut acc = 0.0;
            for m in 0..spec.dim() {
                if m != n {
                    let gap = spec.values[n] - spec.values[m];
                    acc += (columns[i][m].conj() * columns[j][m]).re / (gap * gap);
                }
            }
            g[(i, j)] = acc;
            g[(j, i)] = acc;
        }
    }
    Ok(g)
}

/// Options for [`eigenpath`].
#[derive(Clone, Debug)]
pub struct EigenPathOptions {
    /// Minimum overlap between consecutive tracked eigenvectors.
    pub min_overlap: f64,
    /// Maximum bisection depth when the overlap condition fails.
    pub max_refine_depth: usize,
    /// Track only the lowest `k` levels; `None` tracks all.
    pub levels: Option<usize>,
    pub eps_gap_rel: f64,
}

impl Default for EigenPathOptions {
    fn default() -> Self {
        Self {
            min_overlap: 0.9,
            max_refine_depth: 16,
            levels: None,
            eps_gap_rel: DEFAULT_EPS_GAP_REL,
        }
    }
}

/// Eigenvalues and eigenvectors along a time grid. Labels are tracked by
/// overlap and phases are aligned so that `<n(t_i)|n(t_{i+1})>` is real and
/// positive at every (possibly refined) step.
#[derive(Clone, Debug)]
pub struct EigenPath {
    grid: Vec<f64>,
    energies: Vec<Vec<f64>>,
    vectors: Vec<CMatrix>,
    min_gaps: Vec<f64>,
    thresholds: Vec<f64>,
    refinements: usize,
}

struct Tracked {
    vectors: CMatrix,
    energies: Vec<f64>,
    min_gap: f64,
    threshold: f64,
}

fn spectral_min_gap(spec: &Spectrum, levels: usize) -> f64 {
    let mut gap = f64::INFINITY;
    for n in 0..levels.min(spec.dim()) {
        if n > 0 {
            gap = gap.min(spec.values[n] - spec.values[n - 1]);
        }
        if n + 1 < spec.dim() {
            gap = gap.min(spec.values[n + 1] - spec.values[n]);
        }
    }
    gap
}

fn initial(spec: Spectrum, k: usize, eps_rel: f64) -> Tracked {
    let min_gap = spectral_min_gap(&spec, k);
    let threshold = gap_threshold(&spec, eps_rel);
    Tracked {
        vectors: spec.vectors.columns(0, k).into_owned(),
        energies: spec.values.iter().take(k).copied().collect(),
        min_gap,
        threshold,
    }
}

/// Greedy maximal-overlap matching; returns the matched column per tracked
/// level and the smallest matched overlap.
fn match_levels(prev: &CMatrix, next: &CMatrix) -> (Vec<usize>, f64) {
    let k = prev.ncols();
    let d = next.ncols();
    let ov = prev.adjoint() * next;
    let mut assigned = vec![usize::MAX; k];
    let mut used = vec![false; d];
    let mut worst = f64::INFINITY;
    for _ in 0..k {
        let mut best = (-1.0, 0, 0);
        for a in 0..k {
            if assigned[a] != usize::MAX {
                continue;
            }
            for (b, taken) in used.iter().enumerate() {
                if !taken && ov[(a, b)].norm() > best.0 {
                    best = (ov[(a, b)].norm(), a, b);
                }
            }
        }
        assigned[best.1] = best.2;
        used[best.2] = true;
        worst = worst.min(best.0);
    }
    (assigned, worst)
}

struct Tracker<'a> {
    ham: &'a dyn Hamiltonian,
    opts: &'a EigenPathOptions,
    k: usize,
    refinements: usize,
}

impl Tracker<'_> {
    fn step(&mut self, prev: &Tracked, t0: f64, t1: f64, depth: usize) -> Result<Tracked> {
        let spec = self.ham.at(t1)?.eigh();
        let (assigned, worst) = match_levels(&prev.vectors, &spec.vectors);
        let reordered = assigned.iter().enumerate().any(|(a, &b)| a != b);
        let low_overlap = worst < self.opts.min_overlap;
        if low_overlap || reordered {
            if depth >= self.opts.max_refine_depth {
                if low_overlap {
                    return Err(Error::GridTooCoarse {
                        time: t1,
                        overlap: worst,
                    });
                }
                return self.accept(prev, spec, assigned);
            }
            self.refinements += 1;
            let tm = 0.5 * (t0 + t1);
            let mid = self.step(prev, t0, tm, depth + 1)?;
            return self.step(&mid, tm, t1, depth + 1);
        }
        self.accept(prev, spec, assigned)
    }

    fn accept(&self, prev: &Tracked, spec: Spectrum, assigned: Vec<usize>) -> Result<Tracked> {
        let d = spec.dim();
        let mut vectors = CMatrix::zeros(d, self.k);
        let mut energies = Vec::with_capacity(self.k);
        for (a, &b) in assigned.iter().enumerate() {
            let col = spec.vectors.column(b);
            let ov = prev.vectors.column(a).dotc(&col);
            let phase = if ov.norm() > 0.0 {
                ov.conj() / ov.norm()
            } else {
                C64::new(1.0, 0.0)
            };
            vectors.set_column(a, &(col * phase));
            energies.push(spec.values[b]);
        }
        let mut min_gap = f64::INFINITY;
        for &b in &assigned {
            for m in 0..d {
                if m != b {
                    min_gap = min_gap.min((spec.values[m] - spec.values[b]).abs());
                }
            }
        }
        Ok(Tracked {
            vectors,
            energies,
            min_gap,
            threshold: gap_threshold(&spec, self.opts.eps_gap_rel),
        })
    }
}

/// Diagonalizes `H(t)` along `grid` with overlap-based label tracking and a
/// smooth phase gauge.
pub fn eigenpath(
    ham: &dyn Hamiltonian,
    grid: &[f64],
    opts: &EigenPathOptions,
) -> Result<EigenPath> {
    check_grid(grid, 1)?;
    let d = ham.dim();
    let k = opts.levels.unwrap_or(d);
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!(
            "cannot track {k} levels of a {d}-dimensional Hamiltonian"
        )));
    }
    let first = initial(ham.at(grid[0])?.eigh(), k, opts.eps_gap_rel);
    let mut tracker = Tracker {
        ham,
        opts,
        k,
        refinements: 0,
    };
    let mut states = vec![first];
    for w in grid.windows(2) {
        let next = tracker.step(states.last().unwrap(), w[0], w[1], 0)?;
        states.push(next);
    }
    let refinements = tracker.refinements;
    let mut path = EigenPath {
        grid: grid.to_vec(),
        energies: Vec::with_capacity(states.len()),
        vectors: Vec::with_capacity(states.len()),
        min_gaps: Vec::with_capacity(states.len()),
        thresholds: Vec::with_capacity(states.len()),
        refinements,
    };
    for s in states {
        path.energies.push(s.energies);
        path.vectors.push(s.vectors);
        path.min_gaps.push(s.min_gap);
        path.thresholds.push(s.threshold);
    }
    Ok(path)
}

impl EigenPath {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].nrows()
    }

    pub fn n_levels(&self) -> usize {
        self.vectors[0].ncols()
    }

    pub fn energies(&self, i: usize) -> &[f64] {
        &self.energies[i]
    }

    pub fn energy(&self, i: usize, n: usize) -> f64 {
        self.energies[i][n]
    }

    /// Tracked eigenvectors at grid index `i`, one per column.
    pub fn vectors(&self, i: usize) -> &CMatrix {
        &self.vectors[i]
    }

    pub fn vector(&self, i: usize, n: usize) -> CVector {
        self.vectors[i].column(n).into_owned()
    }

    /// Smallest gap between a tracked level and any other level, per time.
    pub fn min_gaps(&self) -> &[f64] {
        &self.min_gaps
    }

    /// Number of bisection steps inserted between grid points.
    pub fn refinements(&self) -> usize {
        self.refinements
    }

    /// Fails on the first grid point where a tracked level is degenerate.
    pub fn check_nondegenerate(&self) -> Result<()> {
        for (i, (&gap, &threshold)) in self.min_gaps.iter().zip(&self.thresholds).enumerate() {
            if gap < threshold {
                let e = &self.energies[i];
                let pair = (0..e.len())
                    .flat_map(|a| (a + 1..e.len()).map(move |b| (a, b)))
                    .min_by(|x, y| (e[x.0] - e[x.1]).abs().total_cmp(&(e[y.0] - e[y.1]).abs()))
                    .unwrap_or((0, 0));
                return Err(Error::Degeneracy {
                    time: self.grid[i],
                    levels: pair,
                    gap,
                    threshold,
                });
            }
        }
        Ok(())
    }

    /// Centered finite-difference estimate of `<m|d_t n>` at an interior grid
    /// index.
    pub fn connection_fd(&self, i: usize, m: usize, n: usize) -> Result<C64> {
        if i == 0 || i + 1 >= self.len() {
            return Err(Error::InvalidArgument(
                "finite-difference connection needs an interior grid index".into(),
            ));
        }
        let dt = self.grid[i + 1] - self.grid[i - 1];
        let dn = (self.vectors[i + 1].column(n) - self.vectors[i - 1].column(n)) / C64::from(dt);
        Ok(self.vectors[i].column(m).dotc(&dn))
    }
}

/// The transitionless reference trajectory built from an eigenpath.
#[derive(Clone, Debug)]
pub struct AdiabaticState {
    pub trajectory: StateTrajectory,
    pub coefficients: Vec<C64>,
    /// `-(1/hbar) int E_n dt`, indexed `[mode][time]`.
    pub dynamical_phases: Vec<Vec<f64>>,
    /// `i int <n|d_t n> dt` accumulated along the grid, indexed `[mode][time]`.
    pub geometric_phases: Vec<Vec<f64>>,
    /// `<n|d_t n>` on each grid interval, indexed `[mode][interval]`.
    pub geometric_integrand: Vec<Vec<C64>>,
    initial_vectors: CMatrix,
    final_vectors: CMatrix,
}

impl AdiabaticState {
    /// Total geometric phase of mode `n` relative to its initial eigenvector,
    /// wrapped to `(-pi, pi]`. Meaningful for closed loops.
    pub fn closed_loop_phase(&self, n: usize) -> f64 {
        let holonomy = self
            .initial_vectors
            .column(n)
            .dotc(&self.final_vectors.column(n));
        wrap(self.geometric_phases[n].last().copied().unwrap_or(0.0) + holonomy.arg())
    }

    /// `|<n(t)|psi_ad(t)>|^2` for the tracked vectors.
    pub fn populations(&self, path: &EigenPath, i: usize) -> Vec<f64> {
        (0..path.n_levels())
            .map(|n| {
                path.vectors(i)
                    .column(n)
                    .dotc(&self.trajectory.states[i])
                    .norm_sqr()
            })
            .collect()
    }
}

pub(crate) fn wrap(x: f64) -> f64 {
    use std::f64::consts::PI;
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// `sum_n c_n exp(-(i/hbar) int E_n) exp(-int <n|d_t n>) |n(t)>` on the
/// eigenpath grid.
pub fn adiabatic_state(path: &EigenPath, c0: &[C64], hbar: f64) -> Result<AdiabaticState> {
    let k = path.n_levels();
    if c0.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: c0.len(),
        });
    }
    let norm = c0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { norm });
    }
    let n_t = path.len();
    let mut dynamical = vec![vec![0.0; n_t]; k];
    let mut geometric = vec![vec![0.0; n_t]; k];
    let mut integrand = vec![Vec::with_capacity(n_t.saturating_sub(1)); k];
    for i in 1..n_t {
        let dt = path.grid[i] - path.grid[i - 1];
        for n in 0..k {
            let e = 0.5 * (path.energy(i - 1, n) + path.energy(i, n));
            dynamical[n][i] = dynamical[n][i - 1] - e * dt / hbar;
            let step = path.vectors[i - 1]
                .column(n)
                .dotc(&path.vectors[i].column(n))
                .arg();
            integrand[n].push(C64::new(0.0, step / dt));
            geometric[n][i] = geometric[n][i - 1] - step;
        }
    }
    let states = (0..n_t)
        .map(|i| {
            let mut psi = CVector::zeros(path.dim());
            for n in 0..k {
                let phase = C64::from_polar(1.0, dynamical[n][i] + geometric[n][i]);
                psi += path.vectors[i].column(n) * (c0[n] * phase);
            }
            psi
        })
        .collect();
    Ok(AdiabaticState {
        trajectory: StateTrajectory {
            grid: path.grid.clone(),
            states,
            method: "adiabatic".into(),
            steps_per_interval: 1,
            hbar,
        },
        coefficients: c0.to_vec(),
        dynamical_phases: dynamical,
        geometric_phases: geometric,
        geometric_integrand: integrand,
        initial_vectors: path.vectors[0].clone(),
        final_vectors: path.vectors[n_t - 1].clone(),
    })
}

/// Spectrum at one time; convenience for callers that hold a bare matrix.
pub fn spectrum(h: &CMatrix) -> Spectrum {
    hermitian_eigen(h)
}
