//! Dense operator algebra: Hermitian operators, kets, the normalized
//! Frobenius inner product, commutators and Liouvillian powers, and
//! orthonormal operator bases (Pauli strings).
//!
//! The inner product is `(X|Y) = Tr(X^dag Y) / D`, so that every Pauli string
//! has unit norm.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative tolerance used when validating Hermiticity of inputs.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Default cap on the nested-commutator order.
pub const DEFAULT_K_MAX: usize = 12;

pub(crate) fn check_finite(m: &CMatrix, what: &'static str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn check_same_dim(x: &CMatrix, y: &CMatrix) -> Result<()> {
    if !x.is_square() {
        return Err(Error::InvalidArgument(format!(
            "operator is {}x{}, expected square",
            x.nrows(),
            x.ncols()
        )));
    }
    if x.shape() != y.shape() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.nrows(),
        });
    }
    Ok(())
}

/// Largest entry of `X - X^dag`.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// A dense Hermitian matrix of dimension at least two.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator(CMatrix);

impl HermitianOperator {
    /// Validates Hermiticity to `1e-12 * max|entry|`. Inputs are never
    /// symmetrized.
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerance(m, HERMITIAN_TOL)
    }

    /// Like [`HermitianOperator::new`] with a caller-chosen relative tolerance,
    /// for operators assembled from finite differences.
    pub fn with_tolerance(m: CMatrix, rel_tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidArgument(format!(
                "operator is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() < 2 {
            return Err(Error::DimensionTooSmall(m.nrows()));
        }
        check_finite(&m, "operator")?;
        let tolerance = rel_tol * max_abs(&m);
        let deviation = hermiticity_deviation(&m);
        if deviation > tolerance {
            return Err(Error::NotHermitian {
                deviation,
                tolerance,
            });
        }
        Ok(Self(m))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(CMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn eigh(&self) -> Spectrum {
        hermitian_eigen(&self.0)
    }

    /// `exp(-i H dt / hbar)`.
    pub fn propagator(&self, dt: f64, hbar: f64) -> CMatrix {
        propagator(&self.0, dt, hbar)
    }
}

impl AsRef<CMatrix> for HermitianOperator {
    fn as_ref(&self) -> &CMatrix {
        &self.0
    }
}

/// Eigenvalues in ascending order with matching eigenvector columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, n: usize) -> CVector {
        self.vectors.column(n).into_owned()
    }

    /// Smallest spacing between consecutive eigenvalues.
    pub fn min_gap(&self) -> f64 {
        self.values
            .as_slice()
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_radius(&self) -> f64 {
        self.values.iter().fold(0.0, |a, e| a.max(e.abs()))
    }
}

/// Diagonalizes a Hermitian matrix; only the Hermitian part is meaningful.
pub fn hermitian_eigen(m: &CMatrix) -> Spectrum {
    let eig = SymmetricEigen::new(m.clone());
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Spectrum { values, vectors }
}

/// `exp(-i H dt / hbar)` for Hermitian `H`, via diagonalization.
pub fn propagator(h: &CMatrix, dt: f64, hbar: f64) -> CMatrix {
    let spec = hermitian_eigen(h);
    let phases = spec.values.map(|e| C64::from_polar(1.0, -e * dt / hbar));
    let mut scaled = spec.vectors.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    scaled * spec.vectors.adjoint()
}

/// A normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket(CVector);

impl Ket {
    pub const NORM_TOL: f64 = 1e-10;

    pub fn new(v: CVector) -> Result<Self> {
        let norm = v.norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite("ket"));
        }
        if (norm - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self(v))
    }

    /// Normalizes `v`; fails only for a zero or non-finite vector.
    pub fn normalized(v: CVector) -> Result<Self> {
        let norm = v.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self(v / C64::from(norm)))
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut v = CVector::zeros(dim);
        v[index] = C64::new(1.0, 0.0);
        Ok(Self(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn vector(&self) -> &CVector {
        &self.0
    }

    pub fn into_vector(self) -> CVector {
        self.0
    }
}

impl AsRef<CVector> for Ket {
    fn as_ref(&self) -> &CVector {
        &self.0
    }
}

/// `(X|Y) = Tr(X^dag Y) / D`.
pub fn frobenius_inner(x: &CMatrix, y: &CMatrix) -> Result<C64> {
    check_same_dim(x, y)?;
    Ok(frobenius_inner_unchecked(x, y))
}

pub(crate) fn frobenius_inner_unchecked(x: &CMatrix, y: &CMatrix) -> C64 {
    let d = x.nrows() as f64;
    x.iter()
        .zip(y.iter())
        .map(|(a, b)| a.conj() * b)
        .sum::<C64>()
        / d
}

/// `sqrt(Re (X|X))`.
pub fn frobenius_norm(x: &CMatrix) -> f64 {
    if x.nrows() == 0 {
        return 0.0;
    }
    (x.iter().map(|z| z.norm_sqr()).sum::<f64>() / x.nrows() as f64).sqrt()
}

/// `XY - YX`.
pub fn commutator(x: &CMatrix, y: &CMatrix) -> Result<CMatrix> {
    check_same_dim(x, y)?;
    Ok(commutator_unchecked(x, y))
}

pub(crate) fn commutator_unchecked(x: &CMatrix, y: &CMatrix) -> CMatrix {
    x * y - y * x
}

/// The closed-system Liouvillian `L_H X = [H, X]`.
pub fn liouvillian_apply(h: &HermitianOperator, x: &CMatrix) -> Result<CMatrix> {
    commutator(h.matrix(), x)
}

/// `O_k = L_H^k dH` for `k <= DEFAULT_K_MAX`.
pub fn nested_commutator(h: &HermitianOperator, dh: &CMatrix, k: usize) -> Result<CMatrix> {
    nested_commutator_capped(h, dh, k, DEFAULT_K_MAX)
}

pub fn nested_commutator_capped(
    h: &HermitianOperator,
    dh: &CMatrix,
    k: usize,
    k_max: usize,
) -> Result<CMatrix> {
    if k > k_max {
        return Err(Error::InvalidArgument(format!(
            "nested commutator order {k} exceeds k_max = {k_max}"
        )));
    }
    check_same_dim(h.matrix(), dh)?;
    let mut o = dh.clone();
    for _ in 0..k {
        o = commutator_unchecked(h.matrix(), &o);
    }
    Ok(o)
}

/// An ordered list of traceless, Hermitian, orthonormal operators.
#[derive(Clone, Debug)]
pub struct OperatorBasis {
    elements: Vec<CMatrix>,
    labels: Vec<String>,
}

impl OperatorBasis {
    pub const ORTHONORMAL_TOL: f64 = 1e-12;

    /// Validates the basis invariants with tolerance `1e-12`.
    pub fn new(elements: Vec<CMatrix>, labels: Vec<String>) -> Result<Self> {
        Self::with_tolerance(elements, labels, Self::ORTHONORMAL_TOL)
    }

    pub fn with_tolerance(elements: Vec<CMatrix>, labels: Vec<String>, tol: f64) -> Result<Self> {
        if elements.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} elements but {} labels",
                elements.len(),
                labels.len()
            )));
        }
        let Some(first) = elements.first() else {
            return Ok(Self { elements, labels });
        };
        for e in &elements {
            check_same_dim(first, e)?;
            let deviation = hermiticity_deviation(e);
            if deviation > tol {
                return Err(Error::NotHermitian {
                    deviation,
                    tolerance: tol,
                });
            }
            let trace = e.trace().norm() / e.nrows() as f64;
            if trace > tol {
                return Err(Error::NotTraceless { trace });
            }
        }
        let mut deviation = 0.0f64;
        for (i, a) in elements.iter().enumerate() {
            for (j, b) in elements.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                deviation = deviation.max((frobenius_inner_unchecked(a, b) - target).norm());
            }
        }
        if deviation > tol {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(Self { elements, labels })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.elements.first().map(|e| e.nrows())
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn element(&self, i: usize) -> &CMatrix {
        &self.elements[i]
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Sub-basis picked by label, in the given order.
    pub fn select(&self, labels: &[&str]) -> Result<Self> {
        let mut elements = Vec::with_capacity(labels.len());
        let mut names = Vec::with_capacity(labels.len());
        for l in labels {
            let i = self
                .position(l)
                .ok_or_else(|| Error::InvalidArgument(format!("no basis element labelled {l}")))?;
            elements.push(self.elements[i].clone());
            names.push(self.labels[i].clone());
        }
        Ok(Self {
            elements,
            labels: names,
        })
    }

    /// `sum_mu c_mu L_mu`.
    pub fn combine(&self, coefficients: &[C64]) -> Result<CMatrix> {
        let dim = self
            .dim()
            .ok_or_else(|| Error::InvalidArgument("empty basis".into()))?;
        if coefficients.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: coefficients.len(),
            });
        }
        let mut out = CMatrix::zeros(dim, dim);
        for (c, e) in coefficients.iter().zip(&self.elements) {
            out += e * *c;
        }
        Ok(out)
    }
}

pub fn pauli_matrix(label: char) -> Option<CMatrix> {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let m = match label {
        'I' => [l, o, o, l],
        'X' => [o, l, l, o],
        'Y' => [o, -i, i, o],
        'Z' => [l, o, o, -l],
        _ => return None,
    };
    Some(CMatrix::from_row_slice(2, 2, &m))
}

/// Tensor product of single-site Paulis; site 0 is the most significant
/// factor.
pub fn pauli_string(label: &str) -> Result<CMatrix> {
    let mut out = CMatrix::identity(1, 1);
    for c in label.chars() {
        let p = pauli_matrix(c)
            .ok_or_else(|| Error::InvalidArgument(format!("bad Pauli label {label}")))?;
        out = out.kronecker(&p);
    }
    if out.nrows() < 2 {
        return Err(Error::InvalidArgument("empty Pauli label".into()));
    }
    Ok(out)
}

/// All `4^n - 1` non-identity Pauli strings on `n` qubits, ordered
/// lexicographically with `I < X < Y < Z` per site.
pub fn pauli_basis(n_qubits: usize) -> Result<OperatorBasis> {
    if !(1..=10).contains(&n_qubits) {
        return Err(Error::InvalidArgument(format!(
            "pauli_basis supports 1..=10 qubits, got {n_qubits}"
        )));
    }
    const SITE: [char; 4] = ['I', 'X', 'Y', 'Z'];
    let count = 1usize << (2 * n_qubits);
    let mut elements = Vec::with_capacity(count - 1);
    let mut labels = Vec::with_capacity(count - 1);
    for idx in 1..count {
        let label: String = (0..n_qubits)
            .map(|site| SITE[(idx >> (2 * (n_qubits - 1 - site))) & 3])
            .collect();
        elements.push(pauli_string(&label)?);
        labels.push(label);
    }
    Ok(OperatorBasis { elements, labels })
}

/// Coefficients `c_mu = (L_mu|X)`; fails when the basis does not span `X`.
pub fn expand_in_basis(x: &CMatrix, basis: &OperatorBasis) -> Result<Vec<C64>> {
    let dim = basis
        .dim()
        .ok_or_else(|| Error::InvalidArgument("empty basis".into()))?;
    if x.nrows() != dim || !x.is_square() {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: x.nrows(),
        });
    }
    let scale = frobenius_norm(x).max(1.0);
    let trace = x.trace().norm() / dim as f64;
    if trace > 1e-10 * scale {
        return Err(Error::NotTraceless { trace });
    }
    let coefficients: Vec<C64> = basis
        .elements()
        .iter()
        .map(|e| frobenius_inner_unchecked(e, x))
        .collect();
    let residual = frobenius_norm(&(x - basis.combine(&coefficients)?));
    if residual > 1e-8 * scale {
        return Err(Error::SpanningFailure { residual });
    }
    Ok(coefficients)
}
