//! Dynamical invariants, Lewis-Riesenfeld phases, Hamiltonians built from
//! prescribed modes, and invariant-based inverse engineering on a closed
//! operator algebra.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operator::{
    check_finite, check_same_dim, commutator_unchecked, frobenius_inner_unchecked, frobenius_norm,
    hermitian_eigen, CMatrix, CVector, HermitianOperator, OperatorBasis, C64,
};
use crate::schedule::{check_grid, differentiate_samples, Hamiltonian};
use crate::spectral::{hermitian_part, EigenPath};

/// Relative tolerance on the drift of invariant eigenvalues.
pub const EIGENVALUE_DRIFT_TOL: f64 = 1e-8;
/// Smallest accepted overlap between consecutive gauge-fixed modes.
pub const MIN_GAUGE_OVERLAP: f64 = 0.9;

/// `||i hbar dF/dt - [H, F]||` at every grid time, with `dF/dt` from
/// second-order finite differences on the grid.
pub fn invariant_residual(
    ham: &dyn Hamiltonian,
    invariant: &[CMatrix],
    grid: &[f64],
    hbar: f64,
) -> Result<Vec<f64>> {
    let rates = differentiate_samples(invariant, grid)?;
    grid.iter()
        .zip(invariant.iter().zip(&rates))
        .map(|(&t, (f, df))| {
            let h = ham.at(t)?;
            check_same_dim(h.matrix(), f)?;
            let r = df * C64::new(0.0, hbar) - commutator_unchecked(h.matrix(), f);
            Ok(frobenius_norm(&r))
        })
        .collect()
}

/// Aligns the phase of every column of `next` with the matching column of
/// `prev` so that their overlap is real and positive.
fn align_columns(prev: &CMatrix, next: &mut CMatrix, index: usize) -> Result<()> {
    for n in 0..next.ncols() {
        let ov = prev.column(n).dotc(&next.column(n));
        if ov.norm() < MIN_GAUGE_OVERLAP {
            return Err(Error::GaugeDiscontinuity {
                index,
                overlap: ov.norm(),
            });
        }
        let phase = ov.conj() / ov.norm();
        for z in next.column_mut(n).iter_mut() {
            *z *= phase;
        }
    }
    Ok(())
}

fn check_orthonormal_columns(modes: &CMatrix) -> Result<()> {
    let gram = modes.adjoint() * modes;
    let deviation = (gram - CMatrix::identity(modes.ncols(), modes.ncols()))
        .iter()
        .fold(0.0f64, |a, z| a.max(z.norm()));
    if deviation > 1e-10 {
        return Err(Error::NotOrthonormal { deviation });
    }
    Ok(())
}

/// A Hermitian operator sampled on a grid together with its eigenvalues and
/// a smooth eigenvector gauge.
#[derive(Clone, Debug)]
pub struct DynamicalInvariant {
    grid: Vec<f64>,
    operators: Vec<HermitianOperator>,
    eigenvalues: Vec<Vec<f64>>,
    vectors: Vec<CMatrix>,
}

impl DynamicalInvariant {
    /// Diagonalizes each sample, orders eigenvalues ascending and fixes the
    /// eigenvector phases by parallel transport along the grid. Fails if the
    /// eigenvalues drift or if consecutive eigenvectors lose overlap.
    pub fn new(grid: &[f64], operators: Vec<HermitianOperator>) -> Result<Self> {
        check_grid(grid, 1)?;
        if operators.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: operators.len(),
            });
        }
        let mut eigenvalues = Vec::with_capacity(grid.len());
        let mut vectors: Vec<CMatrix> = Vec::with_capacity(grid.len());
        for (i, op) in operators.iter().enumerate() {
            let spec = op.eigh();
            let mut v = spec.vectors;
            if let Some(prev) = vectors.last() {
                align_columns(prev, &mut v, i)?;
            }
            eigenvalues.push(spec.values.iter().copied().collect());
            vectors.push(v);
        }
        let inv = Self {
            grid: grid.to_vec(),
            operators,
            eigenvalues,
            vectors,
        };
        let drift = inv.eigenvalue_drift();
        if drift > EIGENVALUE_DRIFT_TOL {
            return Err(Error::InvalidArgument(format!(
                "invariant eigenvalues drift by {drift:e} (relative)"
            )));
        }
        Ok(inv)
    }

    /// `F(t) = sum_n fbar_n |phi_n(t)><phi_n(t)|` from orthonormal mode
    /// columns whose gauge is kept as given.
    pub fn from_modes(grid: &[f64], modes: Vec<CMatrix>, fbar: &[f64]) -> Result<Self> {
        check_grid(grid, 1)?;
        if modes.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: modes.len(),
            });
        }
        let mut operators = Vec::with_capacity(modes.len());
        for (i, v) in modes.iter().enumerate() {
            if v.ncols() != fbar.len() {
                return Err(Error::DimensionMismatch {
                    expected: fbar.len(),
                    found: v.ncols(),
                });
            }
            check_orthonormal_columns(v)?;
            if i > 0 {
                for n in 0..v.ncols() {
                    let ov = modes[i - 1].column(n).dotc(&v.column(n)).norm();
                    if ov < MIN_GAUGE_OVERLAP {
                        return Err(Error::GaugeDiscontinuity {
                            index: i,
                            overlap: ov,
                        });
                    }
                }
            }
            let weights = CMatrix::from_diagonal(&DVector::from_iterator(
                fbar.len(),
                fbar.iter().map(|&f| C64::from(f)),
            ));
            let f = hermitian_part(v * weights * v.adjoint());
            operators.push(HermitianOperator::new(f)?);
        }
        Ok(Self {
            grid: grid.to_vec(),
            operators,
            eigenvalues: vec![fbar.to_vec(); modes.len()],
            vectors: modes,
        })
    }

    /// The invariant whose eigenvectors follow an eigenpath, which is
    /// conserved under counterdiabatic driving. `fbar` defaults to `n`.
    pub fn from_eigenpath(path: &EigenPath, fbar: Option<&[f64]>) -> Result<Self> {
        let default: Vec<f64> = (0..path.n_levels()).map(|n| n as f64).collect();
        let fbar = fbar.unwrap_or(&default);
        let modes = (0..path.len()).map(|i| path.vectors(i).clone()).collect();
        Self::from_modes(path.grid(), modes, fbar)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn operators(&self) -> &[HermitianOperator] {
        &self.operators
    }

    pub fn matrices(&self) -> Vec<CMatrix> {
        self.operators.iter().map(|o| o.matrix().clone()).collect()
    }

    pub fn eigenvalues(&self, i: usize) -> &[f64] {
        &self.eigenvalues[i]
    }

    pub fn vectors(&self, i: usize) -> &CMatrix {
        &self.vectors[i]
    }

    pub fn mode(&self, n: usize) -> Vec<CVector> {
        self.vectors
            .iter()
            .map(|v| v.column(n).into_owned())
            .collect()
    }

    /// Largest change of any eigenvalue relative to the largest eigenvalue
    /// magnitude.
    pub fn eigenvalue_drift(&self) -> f64 {
        let first = &self.eigenvalues[0];
        let scale = first
            .iter()
            .fold(0.0f64, |a, x| a.max(x.abs()))
            .max(f64::MIN_POSITIVE);
        self.eigenvalues
            .iter()
            .flat_map(|e| e.iter().zip(first).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
            / scale
    }

    pub fn residual(&self, ham: &dyn Hamiltonian, hbar: f64) -> Result<Vec<f64>> {
        invariant_residual(ham, &self.matrices(), &self.grid, hbar)
    }

    /// Default residual tolerance `1e-6 ||F|| max||H|| / hbar`.
    pub fn default_tolerance(&self, ham: &dyn Hamiltonian, hbar: f64) -> Result<f64> {
        let f = self
            .operators
            .iter()
            .map(|o| frobenius_norm(o.matrix()))
            .fold(0.0, f64::max);
        let mut h = 0.0f64;
        for &t in &self.grid {
            h = h.max(frobenius_norm(ham.at(t)?.matrix()));
        }
        Ok(1e-6 * f * h / hbar)
    }
}

/// Lewis-Riesenfeld phase `alpha(t) = (1/hbar) int <phi|(i hbar d_t - H)|phi> dt`
/// of a normalized mode path, accumulated on the grid. The connection term
/// uses `-arg <phi_i|phi_{i+1}>` and the energy term the trapezoid rule.
pub fn lr_phase(
    ham: &dyn Hamiltonian,
    phi: &[CVector],
    grid: &[f64],
    hbar: f64,
) -> Result<Vec<f64>> {
    check_grid(grid, 1)?;
    if phi.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: phi.len(),
        });
    }
    let mut energies = Vec::with_capacity(grid.len());
    for (&t, v) in grid.iter().zip(phi) {
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { norm });
        }
        let h = ham.at(t)?;
        if v.len() != h.dim() {
            return Err(Error::DimensionMismatch {
                expected: h.dim(),
                found: v.len(),
            });
        }
        let e = v.dotc(&(h.matrix() * v));
        let scale = h
            .matrix()
            .iter()
            .fold(0.0f64, |a, z| a.max(z.norm()))
            .max(1.0);
        if e.im.abs() > 1e-8 * scale {
            return Err(Error::InvalidArgument(format!(
                "expectation value has imaginary part {:e}",
                e.im
            )));
        }
        energies.push(e.re);
    }
    let mut alpha = vec![0.0; grid.len()];
    for i in 1..grid.len() {
        let ov = phi[i - 1].dotc(&phi[i]);
        if ov.norm() < MIN_GAUGE_OVERLAP {
            return Err(Error::GaugeDiscontinuity {
                index: i,
                overlap: ov.norm(),
            });
        }
        let dt = grid[i] - grid[i - 1];
        alpha[i] = alpha[i - 1] - ov.arg() - 0.5 * dt * (energies[i - 1] + energies[i]) / hbar;
    }
    Ok(alpha)
}

/// `H = -hbar sum_n alpha_n' |phi_n><phi_n| + i hbar sum_n |d_t phi_n><phi_n|`
/// from orthonormal mode columns and their time derivatives. The result is
/// checked to be Hermitian within `1e-9` before symmetrization.
pub fn hamiltonian_from_modes(
    modes: &CMatrix,
    mode_rates: &CMatrix,
    alpha_rates: &[f64],
    hbar: f64,
) -> Result<HermitianOperator> {
    check_same_dim(modes, mode_rates)?;
    if modes.ncols() != alpha_rates.len() {
        return Err(Error::DimensionMismatch {
            expected: modes.ncols(),
            found: alpha_rates.len(),
        });
    }
    if modes.nrows() != modes.ncols() {
        return Err(Error::InvalidArgument(
            "modes must form a complete basis".into(),
        ));
    }
    check_finite(modes, "modes")?;
    check_finite(mode_rates, "mode rates")?;
    check_orthonormal_columns(modes)?;
    let rates = CMatrix::from_diagonal(&DVector::from_iterator(
        alpha_rates.len(),
        alpha_rates.iter().map(|&a| C64::from(-hbar * a)),
    ));
    let h = modes * rates * modes.adjoint() + mode_rates * modes.adjoint() * C64::new(0.0, hbar);
    let scale = h.iter().fold(0.0f64, |a, z| a.max(z.norm())).max(1.0);
    let deviation = crate::operator::hermiticity_deviation(&h);
    if deviation > 1e-9 * scale {
        return Err(Error::NotHermitian {
            deviation,
            tolerance: 1e-9 * scale,
        });
    }
    HermitianOperator::new(hermitian_part(h))
}

/// Modes, mode derivatives and phase rates at one time.
#[derive(Clone, Debug)]
pub struct ModeSample {
    pub modes: CMatrix,
    pub mode_rates: CMatrix,
    pub alpha_rates: Vec<f64>,
}

type ModeFn = dyn Fn(f64) -> Result<ModeSample> + Send + Sync;

/// The time-dependent Hamiltonian of [`hamiltonian_from_modes`] for mode
/// paths given as a function of time.
pub struct ModeHamiltonian {
    dim: usize,
    hbar: f64,
    f: Arc<ModeFn>,
}

impl ModeHamiltonian {
    pub fn new(
        dim: usize,
        hbar: f64,
        f: impl Fn(f64) -> Result<ModeSample> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            hbar,
            f: Arc::new(f),
        }
    }

    pub fn sample(&self, t: f64) -> Result<ModeSample> {
        (self.f)(t)
    }
}

impl Hamiltonian for ModeHamiltonian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn at(&self, t: f64) -> Result<HermitianOperator> {
        let s = (self.f)(t)?;
        hamiltonian_from_modes(&s.modes, &s.mode_rates, &s.alpha_rates, self.hbar)
    }
}

/// `H` split into its part diagonal in a mode basis and the
/// counterdiabatic-like part built from the mode derivatives.
#[derive(Clone, Debug)]
pub struct InvariantDecomposition {
    /// `sum_n <phi_n|H|phi_n> |phi_n><phi_n|`.
    pub diagonal: CMatrix,
    /// `i hbar sum_{m != n} |phi_n><phi_n|d_t phi_m><phi_m|`.
    pub cd_like: CMatrix,
    /// Phase rates `alpha_n'` that reproduce `H` through
    /// [`hamiltonian_from_modes`].
    pub alpha_rates: Vec<f64>,
    /// `||H - diagonal - cd_like||`.
    pub residual: f64,
}

/// Decomposes `H` in the basis of the modes `phi_n` at one time.
pub fn decompose_in_invariant_basis(
    h: &HermitianOperator,
    modes: &CMatrix,
    mode_rates: &CMatrix,
    hbar: f64,
) -> Result<InvariantDecomposition> {
    check_same_dim(h.matrix(), modes)?;
    check_same_dim(modes, mode_rates)?;
    check_orthonormal_columns(modes)?;
    let d = modes.ncols();
    let hm = modes.adjoint() * h.matrix() * modes;
    let conn = modes.adjoint() * mode_rates;
    let mut diag = CMatrix::zeros(d, d);
    let mut off = CMatrix::zeros(d, d);
    let mut alpha_rates = Vec::with_capacity(d);
    for n in 0..d {
        diag[(n, n)] = C64::from(hm[(n, n)].re);
        // <n|H|n> = -hbar alpha_n' + i hbar <n|d_t n>
        alpha_rates.push(-(hm[(n, n)].re + hbar * conn[(n, n)].im) / hbar);
        for m in 0..d {
            if m != n {
                off[(n, m)] = C64::new(0.0, hbar) * conn[(n, m)];
            }
        }
    }
    let diagonal = modes * diag * modes.adjoint();
    let cd_like = modes * off * modes.adjoint();
    let residual = frobenius_norm(&(h.matrix() - &diagonal - &cd_like));
    Ok(InvariantDecomposition {
        diagonal,
        cd_like,
        alpha_rates,
        residual,
    })
}

/// A Lie-algebraic setting for inverse engineering: Hamiltonians in the span
/// of the generators `A`, invariants in the span of `B`, and real structure
/// constants `[X_j, X_k] = i sum_l T_jkl X_l` over the whole basis.
#[derive(Clone, Debug)]
pub struct AlgebraSpec {
    basis: OperatorBasis,
    hamiltonian: Vec<usize>,
    invariant: Vec<usize>,
    structure: Vec<f64>,
}

impl AlgebraSpec {
    pub const CLOSURE_TOL: f64 = 1e-10;

    /// Computes structure constants and verifies that `[A, B]` closes in
    /// the span of `B`.
    pub fn new(basis: OperatorBasis, hamiltonian: &[&str], invariant: &[&str]) -> Result<Self> {
        let find = |labels: &[&str]| -> Result<Vec<usize>> {
            labels
                .iter()
                .map(|l| {
                    basis
                        .position(l)
                        .ok_or_else(|| Error::InvalidArgument(format!("unknown generator {l}")))
                })
                .collect()
        };
        let a = find(hamiltonian)?;
        let b = find(invariant)?;
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidArgument(
                "generator lists must be nonempty".into(),
            ));
        }
        let n = basis.len();
        let mut structure = vec![0.0; n * n * n];
        for j in 0..n {
            for k in 0..n {
                let c = commutator_unchecked(basis.element(j), basis.element(k));
                for l in 0..n {
                    // (X_l|[X_j, X_k]) = i T_jkl for Hermitian generators
                    structure[(j * n + k) * n + l] =
                        frobenius_inner_unchecked(basis.element(l), &c).im;
                }
            }
        }
        let spec = Self {
            basis,
            hamiltonian: a,
            invariant: b,
            structure,
        };
        let residual = spec.closure_residual();
        if residual > Self::CLOSURE_TOL {
            return Err(Error::SpanningFailure { residual });
        }
        Ok(spec)
    }

    /// `su(2)` on one qubit with Pauli generators `X, Y, Z` for both the
    /// Hamiltonian and the invariant.
    pub fn su2() -> Result<Self> {
        let basis = crate::operator::pauli_basis(1)?;
        Self::new(basis, &["X", "Y", "Z"], &["X", "Y", "Z"])
    }

    pub fn basis(&self) -> &OperatorBasis {
        &self.basis
    }

    pub fn hamiltonian_generators(&self) -> &[usize] {
        &self.hamiltonian
    }

    pub fn invariant_generators(&self) -> &[usize] {
        &self.invariant
    }

    pub fn structure(&self, j: usize, k: usize, l: usize) -> f64 {
        let n = self.basis.len();
        self.structure[(j * n + k) * n + l]
    }

    /// Largest `||[X_k, X_l] - i sum_{j in B} T_klj X_j||` over `k` in `A`
    /// and `l` in `B`.
    pub fn closure_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for &k in &self.hamiltonian {
            for &l in &self.invariant {
                let mut r = commutator_unchecked(self.basis.element(k), self.basis.element(l));
                for &j in &self.invariant {
                    r -= self.basis.element(j) * C64::new(0.0, self.structure(k, l, j));
                }
                worst = worst.max(frobenius_norm(&r));
            }
        }
        worst
    }

    /// Largest `||[X_j, X_k] - i sum_l T_jkl X_l||` over all basis pairs.
    /// Zero when the whole basis is a closed algebra.
    pub fn structure_residual(&self) -> f64 {
        let n = self.basis.len();
        let mut worst = 0.0f64;
        for j in 0..n {
            for k in 0..n {
                let mut r = commutator_unchecked(self.basis.element(j), self.basis.element(k));
                for l in 0..n {
                    r -= self.basis.element(l) * C64::new(0.0, self.structure(j, k, l));
                }
                worst = worst.max(frobenius_norm(&r));
            }
        }
        worst
    }

    /// `sum_k h_k X_k` over the Hamiltonian generators.
    pub fn hamiltonian(&self, h: &[f64]) -> Result<HermitianOperator> {
        self.combine(&self.hamiltonian, h)
    }

    /// `sum_l f_l X_l` over the invariant generators.
    pub fn invariant(&self, f: &[f64]) -> Result<HermitianOperator> {
        self.combine(&self.invariant, f)
    }

    fn combine(&self, indices: &[usize], c: &[f64]) -> Result<HermitianOperator> {
        if c.len() != indices.len() {
            return Err(Error::DimensionMismatch {
                expected: indices.len(),
                found: c.len(),
            });
        }
        let d = self.basis.dim().unwrap_or(0);
        let mut m = CMatrix::zeros(d, d);
        for (&i, &x) in indices.iter().zip(c) {
            m += self.basis.element(i) * C64::from(x);
        }
        HermitianOperator::new(hermitian_part(m))
    }

    /// Pointwise solution of `hbar f_j' = sum_{k,l} T_klj h_k f_l` for the
    /// Hamiltonian coefficients `h`, minimum-norm when under-determined.
    /// Returns `h` and the relative residual.
    pub fn solve_at(&self, f: &[f64], fdot: &[f64], hbar: f64) -> Result<(Vec<f64>, f64)> {
        let nb = self.invariant.len();
        if f.len() != nb || fdot.len() != nb {
            return Err(Error::DimensionMismatch {
                expected: nb,
                found: if f.len() != nb { f.len() } else { fdot.len() },
            });
        }
        if f.iter().chain(fdot).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("invariant coefficients"));
        }
        let na = self.hamiltonian.len();
        let mut m = DMatrix::<f64>::zeros(nb, na);
        for (r, &j) in self.invariant.iter().enumerate() {
            for (c, &k) in self.hamiltonian.iter().enumerate() {
                m[(r, c)] = self
                    .invariant
                    .iter()
                    .zip(f)
                    .map(|(&l, &fl)| self.structure(k, l, j) * fl)
                    .sum();
            }
        }
        let rhs = DVector::from_iterator(nb, fdot.iter().map(|x| hbar * x));
        let svd = m.clone().svd(true, true);
        let smax = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
        let h = if smax > 0.0 {
            svd.solve(&rhs, 1e-12 * smax).expect("SVD with vectors")
        } else {
            DVector::zeros(na)
        };
        let residual = (&m * &h - &rhs).norm();
        let scale = rhs.norm().max(m.norm() * h.norm()).max(f64::MIN_POSITIVE);
        Ok((h.iter().copied().collect(), residual / scale))
    }
}

type TargetFn = dyn Fn(f64) -> (Vec<f64>, Vec<f64>) + Send + Sync;

/// Invariant coefficients `f(t)` and their derivatives, supplied by the
/// caller.
#[derive(Clone)]
pub struct InvariantTarget(Arc<TargetFn>);

impl InvariantTarget {
    pub fn new(f: impl Fn(f64) -> (Vec<f64>, Vec<f64>) + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn eval(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        (self.0)(t)
    }
}

/// Hamiltonian coefficients recovered on a grid.
#[derive(Clone, Debug)]
pub struct InverseSolution {
    pub grid: Vec<f64>,
    /// `[time][generator]` over the Hamiltonian generators.
    pub coefficients: Vec<Vec<f64>>,
    /// `[time][generator]` over the invariant generators.
    pub invariant: Vec<Vec<f64>>,
    /// Relative least-squares residual at each time.
    pub residuals: Vec<f64>,
}

impl InverseSolution {
    pub fn hamiltonian(&self, algebra: &AlgebraSpec, i: usize) -> Result<HermitianOperator> {
        algebra.hamiltonian(&self.coefficients[i])
    }

    /// `||[H, F]||` at the first and last grid times.
    pub fn endpoint_commutators(&self, algebra: &AlgebraSpec) -> Result<(f64, f64)> {
        let at = |i: usize| -> Result<f64> {
            let h = algebra.hamiltonian(&self.coefficients[i])?;
            let f = algebra.invariant(&self.invariant[i])?;
            Ok(frobenius_norm(&commutator_unchecked(
                h.matrix(),
                f.matrix(),
            )))
        };
        Ok((at(0)?, at(self.grid.len() - 1)?))
    }
}

/// Solves for Hamiltonian coefficients at every grid time. Fails with the
/// worst time when any relative residual exceeds `tol` (default `1e-8`).
pub fn inverse_engineer_schedule(
    algebra: &AlgebraSpec,
    target: &InvariantTarget,
    grid: &[f64],
    hbar: f64,
    tol: Option<f64>,
) -> Result<InverseSolution> {
    check_grid(grid, 1)?;
    let tol = tol.unwrap_or(1e-8);
    let mut coefficients = Vec::with_capacity(grid.len());
    let mut invariant = Vec::with_capacity(grid.len());
    let mut residuals = Vec::with_capacity(grid.len());
    for &t in grid {
        let (f, fdot) = target.eval(t);
        let (h, r) = algebra.solve_at(&f, &fdot, hbar)?;
        coefficients.push(h);
        invariant.push(f);
        residuals.push(r);
    }
    let (worst, &r) = residuals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty grid");
    if r > tol {
        return Err(Error::InconsistentSystem {
            time: grid[worst],
            residual: r,
        });
    }
    Ok(InverseSolution {
        grid: grid.to_vec(),
        coefficients,
        invariant,
        residuals,
    })
}

/// The inverse-engineered Hamiltonian evaluated at arbitrary times by
/// solving the pointwise system.
pub struct EngineeredHamiltonian {
    algebra: AlgebraSpec,
    target: InvariantTarget,
    hbar: f64,
}

impl EngineeredHamiltonian {
    pub fn new(algebra: AlgebraSpec, target: InvariantTarget, hbar: f64) -> Self {
        Self {
            algebra,
            target,
            hbar,
        }
    }
}

impl Hamiltonian for EngineeredHamiltonian {
    fn dim(&self) -> usize {
        self.algebra.basis.dim().unwrap_or(0)
    }

    fn at(&self, t: f64) -> Result<HermitianOperator> {
        let (f, fdot) = self.target.eval(t);
        let (h, r) = self.algebra.solve_at(&f, &fdot, self.hbar)?;
        if r > 1e-8 {
            return Err(Error::InconsistentSystem {
                time: t,
                residual: r,
            });
        }
        self.algebra.hamiltonian(&h)
    }
}

/// Eigen-decomposition helper used when the invariant is given as a matrix.
pub fn invariant_modes(f: &CMatrix) -> Result<CMatrix> {
    let op = HermitianOperator::new(f.clone())?;
    Ok(hermitian_eigen(op.matrix()).vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::pauli_matrix;
    use crate::schedule::{linspace, FnHamiltonian};

    #[test]
    fn constant_hamiltonian_is_its_own_invariant() {
        let h = pauli_matrix('Z').unwrap() + pauli_matrix('X').unwrap() * C64::from(0.3);
        let ham = FnHamiltonian::constant(HermitianOperator::new(h.clone()).unwrap());
        let grid = linspace(0.0, 1.0, 5);
        let samples = vec![h; 5];
        let r = invariant_residual(&ham, &samples, &grid, 1.0).unwrap();
        assert!(r.iter().all(|&x| x < 1e-14));
    }

    #[test]
    fn residual_needs_three_points() {
        let h = pauli_matrix('Z').unwrap();
        let ham = FnHamiltonian::constant(HermitianOperator::new(h.clone()).unwrap());
        assert!(invariant_residual(&ham, &[h.clone(), h], &[0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn static_modes_give_diagonal_hamiltonian() {
        let modes = CMatrix::identity(3, 3);
        let rates = CMatrix::zeros(3, 3);
        let e = [0.5, -1.0, 2.0];
        let alpha: Vec<f64> = e.iter().map(|x| -x).collect();
        let h = hamiltonian_from_modes(&modes, &rates, &alpha, 1.0).unwrap();
        for n in 0..3 {
            assert!((h.matrix()[(n, n)].re - e[n]).abs() < 1e-15);
        }
    }

    #[test]
    fn non_orthonormal_modes_are_rejected() {
        let mut modes = CMatrix::identity(2, 2);
        modes[(0, 1)] = C64::from(0.5);
        let err = hamiltonian_from_modes(&modes, &CMatrix::zeros(2, 2), &[0.0, 0.0], 1.0);
        assert!(matches!(err, Err(Error::NotOrthonormal { .. })));
    }

    #[test]
    fn su2_structure_constants() {
        let a = AlgebraSpec::su2().unwrap();
        assert!((a.structure(0, 1, 2) - 2.0).abs() < 1e-15);
        assert!((a.structure(1, 0, 2) + 2.0).abs() < 1e-15);
        assert!(a.structure_residual() < 1e-14);
    }

    #[test]
    fn aligned_constant_invariant_needs_no_driving() {
        let a = AlgebraSpec::su2().unwrap();
        let (h, r) = a.solve_at(&[0.0, 0.0, 1.0], &[0.0; 3], 1.0).unwrap();
        assert!(h.iter().all(|x| x.abs() < 1e-15));
        assert!(r < 1e-15);
    }

    #[test]
    fn inconsistent_target_reports_time() {
        // f stays along Z but its length changes, which no commutator can do
        let a = AlgebraSpec::su2().unwrap();
        let target = InvariantTarget::new(|t| (vec![0.0, 0.0, 1.0 + t], vec![0.0, 0.0, 1.0]));
        let err = inverse_engineer_schedule(&a, &target, &[0.0, 0.5, 1.0], 1.0, None);
        assert!(matches!(err, Err(Error::InconsistentSystem { .. })));
    }
}
