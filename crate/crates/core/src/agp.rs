//! Approximate counterdiabatic driving without eigenstates: variational
//! nested commutators, algebraic trial bases and Krylov chains, all reduced
//! to the linear system `B a = u`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operator::{
    check_finite, check_same_dim, commutator_unchecked, frobenius_inner_unchecked, frobenius_norm,
    CMatrix, HermitianOperator, OperatorBasis, C64,
};
use crate::precision::{cholesky_leading, Ctx, XMatrix};
use crate::schedule::Hamiltonian;
use crate::spectral::hermitian_part;

/// Nested-commutator norms above this abort the variational construction.
pub const OVERFLOW_LIMIT: f64 = 1e150;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CdMethod {
    VariationalNc,
    Algebraic,
    Krylov,
}

/// `B a = u` together with the operators the coefficients multiply.
///
/// `basis_ops` are Hermitian; the assembled operator is `sum_k a_k basis_ops[k]`.
/// For the variational method the system is stored after internal rescaling
/// and `coefficient_scales[k]` maps `a_k` back to the coefficient of the
/// unscaled ansatz term `i hbar O_{2k-1}`.
#[derive(Clone, Debug)]
pub struct LinearCDSystem {
    pub b: DMatrix<f64>,
    pub u: DVector<f64>,
    pub method: CdMethod,
    pub basis_ops: Vec<CMatrix>,
    pub coefficient_scales: Vec<f64>,
    /// Set when the construction yields no unknowns (the CD term vanishes).
    pub empty: bool,
}

impl LinearCDSystem {
    fn empty(method: CdMethod) -> Self {
        Self {
            b: DMatrix::zeros(0, 0),
            u: DVector::zeros(0),
            method,
            basis_ops: Vec::new(),
            coefficient_scales: Vec::new(),
            empty: true,
        }
    }

    pub fn size(&self) -> usize {
        self.u.len()
    }

    /// Spectral norm of `B`.
    pub fn b_norm(&self) -> f64 {
        if self.size() == 0 {
            return 0.0;
        }
        self.b
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .fold(0.0, |a, &s| a.max(s))
    }

    /// Largest entry of `B` outside the tridiagonal band.
    pub fn max_off_band(&self) -> f64 {
        let n = self.size();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i.abs_diff(j) > 1 {
                    worst = worst.max(self.b[(i, j)].abs());
                }
            }
        }
        worst
    }

    pub fn symmetry_deviation(&self) -> f64 {
        (&self.b - self.b.transpose()).amax()
    }

    /// Coefficients of the unscaled ansatz terms.
    pub fn physical_coefficients(&self, a: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(&self.coefficient_scales)
            .map(|(x, s)| x * s)
            .collect()
    }
}

/// Traceless part and its norm; the Liouvillian ignores the trace.
fn traceless(h: &CMatrix) -> (CMatrix, f64) {
    let d = h.nrows();
    let shift = h.trace() / C64::from(d as f64);
    let t = h - CMatrix::identity(d, d) * shift;
    let n = frobenius_norm(&t);
    (t, n)
}

fn check_inputs(h: &HermitianOperator, dh: &CMatrix) -> Result<()> {
    check_same_dim(h.matrix(), dh)?;
    check_finite(dh, "dH")
}

/// Number of odd nested commutators needed to span the exact CD term of a
/// generic `D`-level Hamiltonian.
pub fn full_order(dim: usize) -> usize {
    dim * (dim - 1) / 2
}

/// Variational system for the ansatz `H_cd = i hbar sum_{k=1}^{K} a_k O_{2k-1}`
/// with `B_kl = ||O_{k+l}||^2`, `u_k = -||O_k||^2`.
///
/// `H` is divided by the norm of its traceless part and `dH` by its own norm
/// before the commutators are formed.
pub fn variational_system(
    h: &HermitianOperator,
    dh: &CMatrix,
    k_tr: usize,
    hbar: f64,
) -> Result<LinearCDSystem> {
    check_inputs(h, dh)?;
    if k_tr == 0 {
        return Err(Error::InvalidArgument(
            "truncation order must be >= 1".into(),
        ));
    }
    let (ht, s_h) = traceless(h.matrix());
    let dh_norm = frobenius_norm(dh);
    let d = h.dim();
    if s_h == 0.0 || dh_norm == 0.0 {
        let mut sys = LinearCDSystem::empty(CdMethod::VariationalNc);
        sys.b = DMatrix::zeros(k_tr, k_tr);
        sys.u = DVector::zeros(k_tr);
        sys.basis_ops = vec![CMatrix::zeros(d, d); k_tr];
        sys.coefficient_scales = vec![0.0; k_tr];
        return Ok(sys);
    }
    let hs = ht / C64::from(s_h);
    let mut o = dh / C64::from(dh_norm);
    let mut moments = vec![frobenius_norm(&o).powi(2)];
    let mut odd = Vec::with_capacity(k_tr);
    for order in 1..=2 * k_tr {
        o = commutator_unchecked(&hs, &o);
        let n = frobenius_norm(&o);
        if !(n <= OVERFLOW_LIMIT) {
            return Err(Error::Overflow { order, norm: n });
        }
        moments.push(n * n);
        if order % 2 == 1 {
            odd.push(o.clone());
        }
    }
    let b = DMatrix::from_fn(k_tr, k_tr, |k, l| moments[k + l + 2]);
    let u = DVector::from_fn(k_tr, |k, _| -moments[k + 1]);
    let unit = C64::new(0.0, hbar * dh_norm / s_h);
    let basis_ops = odd.into_iter().map(|x| hermitian_part(x * unit)).collect();
    let coefficient_scales = (1..=k_tr).map(|l| s_h.powi(-2 * l as i32)).collect();
    Ok(LinearCDSystem {
        b,
        u,
        method: CdMethod::VariationalNc,
        basis_ops,
        coefficient_scales,
        empty: false,
    })
}

/// Result of the extended-precision variational construction.
#[derive(Clone, Debug)]
pub struct PreciseCd {
    pub cd: HermitianOperator,
    /// Rescaled coefficients, as in [`variational_system`].
    pub coefficients: Vec<f64>,
    /// Number of independent odd commutators actually used.
    pub rank: usize,
    /// Working precision of the accepted result.
    pub bits: usize,
}

const PRECISION_LADDER: [usize; 4] = [256, 512, 1024, 2048];

fn variational_at_bits(
    hs: &CMatrix,
    dh_unit: &CMatrix,
    k_tr: usize,
    bits: usize,
) -> (CMatrix, Vec<f64>, usize) {
    let ctx = Ctx { bits };
    let hx = XMatrix::from_matrix(hs, ctx);
    let mut o = XMatrix::from_matrix(dh_unit, ctx);
    let mut moments = vec![o.norm_sqr(ctx)];
    let mut odd = Vec::with_capacity(k_tr);
    for order in 1..=2 * k_tr {
        o = hx.commutator_with(&o);
        moments.push(o.norm_sqr(ctx));
        if order % 2 == 1 {
            odd.push(o.clone());
        }
    }
    let b: Vec<Vec<_>> = (0..k_tr)
        .map(|k| (0..k_tr).map(|l| moments[k + l + 2].clone()).collect())
        .collect();
    let u: Vec<_> = (0..k_tr).map(|k| -moments[k + 1].clone()).collect();
    let rel_tol = 2f64.powi(-(bits as i32) / 2);
    let (a, rank) = cholesky_leading(&b, &u, rel_tol, ctx);
    let mut acc = XMatrix::zeros(hs.nrows(), ctx);
    for (c, op) in a.iter().zip(&odd).take(rank) {
        acc.add_scaled(c, op);
    }
    let coeffs = a.iter().map(|x| x.to_f64().value()).collect();
    (acc.to_matrix(), coeffs, rank)
}

/// The variational CD term computed with extended-precision moments so that
/// full-order truncations (`k_tr = None` means [`full_order`]) remain
/// accurate. Precision is doubled until two successive results agree to
/// `1e-13` relative.
pub fn variational_cd_precise(
    h: &HermitianOperator,
    dh: &CMatrix,
    k_tr: Option<usize>,
    hbar: f64,
) -> Result<PreciseCd> {
    check_inputs(h, dh)?;
    let d = h.dim();
    let k_tr = k_tr.unwrap_or_else(|| full_order(d));
    if k_tr == 0 {
        return Err(Error::InvalidArgument(
            "truncation order must be >= 1".into(),
        ));
    }
    let (ht, s_h) = traceless(h.matrix());
    let dh_norm = frobenius_norm(dh);
    if s_h == 0.0 || dh_norm == 0.0 {
        return Ok(PreciseCd {
            cd: HermitianOperator::zeros(d)?,
            coefficients: vec![0.0; k_tr],
            rank: 0,
            bits: 0,
        });
    }
    let hs = ht / C64::from(s_h);
    let unit_dh = dh / C64::from(dh_norm);
    let unit = C64::new(0.0, hbar * dh_norm / s_h);
    let mut previous: Option<CMatrix> = None;
    let mut change = f64::INFINITY;
    for bits in PRECISION_LADDER {
        let (x, coefficients, rank) = variational_at_bits(&hs, &unit_dh, k_tr, bits);
        let cd = hermitian_part(x * unit);
        check_finite(&cd, "variational CD")?;
        if let Some(prev) = &previous {
            let scale = frobenius_norm(&cd).max(f64::MIN_POSITIVE);
            change = frobenius_norm(&(&cd - prev)) / scale;
            if change <= 1e-13 || frobenius_norm(&cd) == 0.0 {
                return Ok(PreciseCd {
                    cd: HermitianOperator::with_tolerance(cd, 1e-10)?,
                    coefficients,
                    rank,
                    bits,
                });
            }
        }
        previous = Some(cd);
    }
    Err(Error::PrecisionExhausted {
        bits: PRECISION_LADDER[PRECISION_LADDER.len() - 1],
        change,
    })
}

/// Algebraic system for `H_cd = hbar sum_k a_k L_k` over a Hermitian
/// orthonormal trial basis: `B_kl = (L_H L_k|L_H L_l)`,
/// `u_k = i (L_H dH|L_k)`.
pub fn algebraic_system(
    h: &HermitianOperator,
    dh: &CMatrix,
    trial: &OperatorBasis,
    hbar: f64,
) -> Result<LinearCDSystem> {
    check_inputs(h, dh)?;
    if trial.is_empty() {
        return Err(Error::InvalidArgument("empty trial basis".into()));
    }
    if trial.dim() != Some(h.dim()) {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: trial.dim().unwrap_or(0),
        });
    }
    let hm = h.matrix();
    let images: Vec<CMatrix> = trial
        .elements()
        .iter()
        .map(|l| commutator_unchecked(hm, l))
        .collect();
    let ldh = commutator_unchecked(hm, dh);
    let k = trial.len();
    let mut b = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = frobenius_inner_unchecked(&images[i], &images[j]).re;
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    let u = DVector::from_fn(k, |i, _| {
        (C64::new(0.0, 1.0) * frobenius_inner_unchecked(&ldh, trial.element(i))).re
    });
    Ok(LinearCDSystem {
        b,
        u,
        method: CdMethod::Algebraic,
        basis_ops: trial
            .elements()
            .iter()
            .map(|l| l * C64::new(hbar, 0.0))
            .collect(),
        coefficient_scales: vec![1.0; k],
        empty: false,
    })
}

/// Orthonormal Hermitian basis of `span{i O_1, i O_3, ...}` built by Arnoldi
/// iteration of `L_H^2` with re-orthogonalization.
pub fn odd_commutator_closure(h: &HermitianOperator, dh: &CMatrix) -> Result<OperatorBasis> {
    check_inputs(h, dh)?;
    let hm = h.matrix();
    let d = h.dim();
    let i = C64::new(0.0, 1.0);
    let start = commutator_unchecked(hm, dh) * i;
    let mut elements: Vec<CMatrix> = Vec::new();
    let n0 = frobenius_norm(&start);
    if n0 == 0.0 {
        return OperatorBasis::new(Vec::new(), Vec::new());
    }
    elements.push(hermitian_part(start / C64::from(n0)));
    let cap = d * d - d;
    while elements.len() < cap {
        let last = elements.last().unwrap();
        let mut w = commutator_unchecked(hm, &commutator_unchecked(hm, last));
        let before = frobenius_norm(&w);
        for _ in 0..2 {
            for e in &elements {
                let c = frobenius_inner_unchecked(e, &w).re;
                w -= e * C64::from(c);
            }
        }
        // commutators are traceless; drop the round-off identity component
        let tr = w.trace() / C64::from(d as f64);
        for k in 0..d {
            w[(k, k)] -= tr;
        }
        let after = frobenius_norm(&w);
        if !(after > 1e-11 * before) {
            break;
        }
        elements.push(hermitian_part(w / C64::from(after)));
    }
    let labels = (1..=elements.len()).map(|k| format!("w{k}")).collect();
    OperatorBasis::with_tolerance(elements, labels, 1e-10)
}

/// Orthonormal Krylov chain of the Liouvillian seeded by `dH`.
#[derive(Clone, Debug)]
pub struct KrylovChain {
    pub basis: Vec<CMatrix>,
    /// `b_0 = ||dH||`, then the Lanczos coefficients `b_1..b_{K-1}`.
    pub b: Vec<f64>,
    /// Norm of the residual after the last basis vector (`b_K`).
    pub b_next: f64,
    /// Whether the chain ended because `b_K` fell below the tolerance.
    pub terminated: bool,
}

impl KrylovChain {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    /// `b_k` with `b_K = b_next` and zero beyond.
    pub fn coefficient(&self, k: usize) -> f64 {
        match k.cmp(&self.b.len()) {
            std::cmp::Ordering::Less => self.b[k],
            std::cmp::Ordering::Equal => self.b_next,
            std::cmp::Ordering::Greater => 0.0,
        }
    }

    /// Largest `|(O_j|O_k) - delta_jk|`.
    pub fn orthonormality_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for (j, a) in self.basis.iter().enumerate() {
            for (k, b) in self.basis.iter().enumerate().skip(j) {
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((frobenius_inner_unchecked(a, b) - target).norm());
            }
        }
        worst
    }
}

/// Orthonormal operators that commute with `h` and are orthogonal to the
/// Krylov space of `dh`: the span of `1, H, H^2, ...` minus its overlap with
/// `dh`. Every Krylov vector lies in the range of `L_H` plus the single
/// commuting direction of `dh`, so these directions only ever receive
/// round-off.
fn commutant_leak_directions(h: &CMatrix, dh: &CMatrix) -> Vec<CMatrix> {
    let d = h.nrows();
    let h_scale = frobenius_norm(h).max(f64::MIN_POSITIVE);
    let mut powers = vec![CMatrix::identity(d, d)];
    while powers.len() < d {
        let mut w = h * powers.last().unwrap();
        let before = frobenius_norm(&w);
        for _ in 0..2 {
            for c in &powers {
                let x = frobenius_inner_unchecked(c, &w);
                w -= c * x;
            }
        }
        let after = frobenius_norm(&w);
        if !(after > 1e-8 * before.max(h_scale)) {
            break;
        }
        powers.push(w / C64::from(after));
    }
    let mut z = CMatrix::zeros(d, d);
    for c in &powers {
        z += c * frobenius_inner_unchecked(c, dh);
    }
    let mut kept: Vec<CMatrix> = Vec::new();
    let z_norm = frobenius_norm(&z);
    let anchor = (z_norm > 1e-12 * frobenius_norm(dh)).then(|| z / C64::from(z_norm));
    for c in powers {
        let mut w = c;
        for _ in 0..2 {
            for v in anchor.iter().chain(&kept) {
                let x = frobenius_inner_unchecked(v, &w);
                w -= v * x;
            }
        }
        let n = frobenius_norm(&w);
        if n > 1e-8 {
            kept.push(w / C64::from(n));
        }
    }
    kept
}

/// Lanczos iteration `b_{k+1} O_{k+1} = L_H O_k - b_k O_{k-1}` with full
/// re-orthogonalization against all previous vectors. Stored vectors are
/// also cleaned of the operators commuting with `H` that the chain cannot
/// reach.
/// Stops when `b_K < term_tol` (default `1e-10 b_0`) or after `k_max`
/// vectors; `K` never exceeds `D^2 - D + 1`.
pub fn krylov_chain(
    h: &HermitianOperator,
    dh: &CMatrix,
    k_max: usize,
    term_tol: Option<f64>,
) -> Result<KrylovChain> {
    check_inputs(h, dh)?;
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be >= 1".into()));
    }
    let b0 = frobenius_norm(dh);
    if b0 == 0.0 {
        return Err(Error::InvalidArgument(
            "dH = 0 generates no Krylov chain".into(),
        ));
    }
    let tol = term_tol.unwrap_or(1e-10 * b0);
    let d = h.dim();
    let cap = k_max.min(d * d - d + 1);
    let hm = h.matrix();
    let leaks = commutant_leak_directions(hm, dh);
    let mut basis = vec![dh / C64::from(b0)];
    let mut b = vec![b0];
    loop {
        let j = basis.len() - 1;
        let mut a = commutator_unchecked(hm, &basis[j]);
        if j >= 1 {
            a -= &basis[j - 1] * C64::from(b[j]);
        }
        for _ in 0..2 {
            for v in &basis {
                let c = frobenius_inner_unchecked(v, &a);
                a -= v * c;
            }
        }
        // b_K is measured against the chain alone so that leaked round-off
        // still counts against termination
        let bn = frobenius_norm(&a);
        if bn < tol || basis.len() >= cap {
            return Ok(KrylovChain {
                basis,
                b,
                b_next: bn,
                terminated: bn < tol,
            });
        }
        for _ in 0..2 {
            for v in leaks.iter().chain(&basis) {
                let c = frobenius_inner_unchecked(v, &a);
                a -= v * c;
            }
        }
        let stored = frobenius_norm(&a);
        basis.push(a / C64::from(stored));
        b.push(bn);
    }
}

/// Tridiagonal system on the odd Krylov vectors:
/// `B_kk = b_{2k-1}^2 + b_{2k}^2`, `B_{k,k-1} = b_{2k-2} b_{2k-1}`,
/// `u_1 = -b_0 b_1`, with basis `i hbar O_{2k-1}`.
pub fn krylov_system(chain: &KrylovChain, hbar: f64) -> LinearCDSystem {
    let k_dim = chain.dimension();
    if k_dim < 2 {
        return LinearCDSystem::empty(CdMethod::Krylov);
    }
    let n = k_dim / 2;
    let bb = |k: usize| chain.coefficient(k);
    let mut b = DMatrix::zeros(n, n);
    for k in 1..=n {
        b[(k - 1, k - 1)] = bb(2 * k - 1).powi(2) + bb(2 * k).powi(2);
        if k < n {
            let off = bb(2 * k) * bb(2 * k + 1);
            b[(k - 1, k)] = off;
            b[(k, k - 1)] = off;
        }
    }
    let mut u = DVector::zeros(n);
    u[0] = -bb(0) * bb(1);
    let unit = C64::new(0.0, hbar);
    let basis_ops = (1..=n)
        .map(|k| hermitian_part(&chain.basis[2 * k - 1] * unit))
        .collect();
    LinearCDSystem {
        b,
        u,
        method: CdMethod::Krylov,
        basis_ops,
        coefficient_scales: vec![1.0; n],
        empty: false,
    }
}

/// Solution of `B a = u` with solver metadata.
#[derive(Clone, Debug)]
pub struct CdSolution {
    pub a: Vec<f64>,
    pub rank: usize,
    /// `true` when `B` was rank deficient and the minimum-norm solution was
    /// returned.
    pub minimum_norm: bool,
    pub solver: &'static str,
}

fn thomas(b: &DMatrix<f64>, u: &DVector<f64>, pivot_tol: f64) -> Option<Vec<f64>> {
    let n = u.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = b[(0, 0)];
    if denom.abs() <= pivot_tol {
        return None;
    }
    c[0] = if n > 1 { b[(0, 1)] / denom } else { 0.0 };
    d[0] = u[0] / denom;
    for i in 1..n {
        denom = b[(i, i)] - b[(i, i - 1)] * c[i - 1];
        if denom.abs() <= pivot_tol {
            return None;
        }
        c[i] = if i + 1 < n {
            b[(i, i + 1)] / denom
        } else {
            0.0
        };
        d[i] = (u[i] - b[(i, i - 1)] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Some(x)
}

/// Solves `B a = u`: Thomas elimination for tridiagonal `B`, otherwise
/// least squares via SVD with rank tolerance `1e-12 ||B||`.
pub fn solve_cd(system: &LinearCDSystem) -> CdSolution {
    let n = system.size();
    if n == 0 {
        return CdSolution {
            a: Vec::new(),
            rank: 0,
            minimum_norm: false,
            solver: "empty",
        };
    }
    let scale = system.b.amax();
    if system.max_off_band() == 0.0 && scale > 0.0 {
        if let Some(a) = thomas(&system.b, &system.u, 1e-12 * scale) {
            if a.iter().all(|x| x.is_finite()) {
                return CdSolution {
                    a,
                    rank: n,
                    minimum_norm: false,
                    solver: "thomas",
                };
            }
        }
    }
    let svd = system.b.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
    let tol = 1e-12 * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let a = if smax == 0.0 {
        vec![0.0; n]
    } else {
        let x = svd.solve(&system.u, tol).expect("SVD with vectors");
        x.iter().copied().collect()
    };
    CdSolution {
        a,
        rank,
        minimum_norm: rank < n,
        solver: "svd",
    }
}

/// `sum_k a_k basis_ops[k]`.
pub fn assemble_cd(system: &LinearCDSystem, a: &[f64]) -> Result<HermitianOperator> {
    if a.len() != system.size() || a.len() != system.basis_ops.len() {
        return Err(Error::DimensionMismatch {
            expected: system.size(),
            found: a.len(),
        });
    }
    let Some(first) = system.basis_ops.first() else {
        return Err(Error::InvalidArgument(
            "empty system has no dimension; the CD term is zero".into(),
        ));
    };
    let mut out = CMatrix::zeros(first.nrows(), first.ncols());
    for (c, op) in a.iter().zip(&system.basis_ops) {
        out += op * C64::from(*c);
    }
    HermitianOperator::with_tolerance(hermitian_part(out), 1e-10)
}

/// Solves and assembles in one step; empty systems give the zero operator.
pub fn cd_from_system(system: &LinearCDSystem, dim: usize) -> Result<HermitianOperator> {
    if system.size() == 0 {
        return HermitianOperator::zeros(dim);
    }
    assemble_cd(system, &solve_cd(system).a)
}

/// Truncated variational counterdiabatic term of a time-dependent
/// Hamiltonian, solved in double precision at each time.
pub struct VariationalCdTerm<H> {
    pub base: H,
    pub order: usize,
    pub hbar: f64,
}

impl<H: Hamiltonian> VariationalCdTerm<H> {
    pub fn new(base: H, order: usize, hbar: f64) -> Self {
        Self { base, order, hbar }
    }
}

impl<H: Hamiltonian> Hamiltonian for VariationalCdTerm<H> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn at(&self, t: f64) -> Result<HermitianOperator> {
        let h = self.base.at(t)?;
        let dh = self.base.rate(t)?;
        cd_from_system(
            &variational_system(&h, &dh, self.order, self.hbar)?,
            h.dim(),
        )
    }
}

/// `||G||^2` with `G = dH - (i/hbar)[H, H_cd]`.
pub fn action_value(h: &HermitianOperator, dh: &CMatrix, cd: &CMatrix, hbar: f64) -> Result<f64> {
    check_same_dim(h.matrix(), dh)?;
    check_same_dim(h.matrix(), cd)?;
    let g = dh - commutator_unchecked(h.matrix(), cd) * C64::new(0.0, 1.0 / hbar);
    Ok(frobenius_norm(&g).powi(2))
}

/// Regularized resolvent form `-i hbar L (L^2 + eta^2 hbar^2)^{-1} dH`,
/// solved as a dense `D^2 x D^2` system. Validation use only.
pub fn integral_cd(h: &HermitianOperator, dh: &CMatrix, eta: f64, hbar: f64) -> Result<CMatrix> {
    check_inputs(h, dh)?;
    let d = h.dim();
    let id = CMatrix::identity(d, d);
    let hm = h.matrix();
    let l = id.kronecker(hm) - hm.transpose().kronecker(&id);
    let m = &l * &l + CMatrix::identity(d * d, d * d) * C64::from(eta * eta * hbar * hbar);
    let rhs = &l * nalgebra::DVector::from_column_slice(dh.as_slice());
    let x = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidArgument("singular resolvent".into()))?;
    let out = CMatrix::from_column_slice(d, d, x.as_slice()) * C64::new(0.0, -hbar);
    Ok(out)
}

/// Richardson extrapolation of [`integral_cd`] to `eta -> 0`, assuming an
/// error expansion in powers of `eta^2`.
pub fn integral_cd_extrapolated(
    h: &HermitianOperator,
    dh: &CMatrix,
    etas: &[f64],
    hbar: f64,
) -> Result<CMatrix> {
    if etas.is_empty() {
        return Err(Error::InvalidArgument("no eta values".into()));
    }
    let xs: Vec<f64> = etas.iter().map(|e| e * e).collect();
    let values: Vec<CMatrix> = etas
        .iter()
        .map(|&e| integral_cd(h, dh, e, hbar))
        .collect::<Result<_>>()?;
    let mut out = CMatrix::zeros(h.dim(), h.dim());
    for (i, v) in values.iter().enumerate() {
        let mut w = 1.0;
        for (j, xj) in xs.iter().enumerate() {
            if i != j {
                w *= xj / (xj - xs[i]);
            }
        }
        out += v * C64::from(w);
    }
    Ok(hermitian_part(out))
}
