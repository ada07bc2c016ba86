//! Model Hamiltonian families used throughout the crate and its tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::operator::{pauli_matrix, CMatrix, HermitianOperator, C64};

fn check_params(lambda: &[f64], n: usize) -> Result<()> {
    if lambda.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: lambda.len(),
        });
    }
    if lambda.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("parameters"));
    }
    Ok(())
}

fn check_index(i: usize, n: usize) -> Result<()> {
    if i >= n {
        return Err(Error::InvalidArgument(format!(
            "parameter index {i} out of range for {n} parameters"
        )));
    }
    Ok(())
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Two-level avoided crossing `H = lambda sigma_z + delta sigma_x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LandauZener {
    pub delta: f64,
}

impl LandauZener {
    pub fn new(delta: f64) -> Self {
        Self { delta }
    }

    pub fn gap(&self, lambda: f64) -> f64 {
        2.0 * (lambda * lambda + self.delta * self.delta).sqrt()
    }

    /// Closed-form gauge potential `-(hbar delta) / (2 (lambda^2 + delta^2)) sigma_y`.
    pub fn gauge_potential(&self, lambda: f64, hbar: f64) -> CMatrix {
        let c = -hbar * self.delta / (2.0 * (lambda * lambda + self.delta * self.delta));
        pauli_matrix('Y').unwrap() * real(c)
    }
}

impl crate::schedule::ParametricFamily for LandauZener {
    fn dim(&self) -> usize {
        2
    }

    fn n_params(&self) -> usize {
        1
    }

    fn hamiltonian(&self, lambda: &[f64]) -> Result<HermitianOperator> {
        check_params(lambda, 1)?;
        HermitianOperator::new(
            pauli_matrix('Z').unwrap() * real(lambda[0])
                + pauli_matrix('X').unwrap() * real(self.delta),
        )
    }

    fn derivative(&self, lambda: &[f64], i: usize) -> Result<CMatrix> {
        check_params(lambda, 1)?;
        check_index(i, 1)?;
        Ok(pauli_matrix('Z').unwrap())
    }
}

/// Spin-1/2 in a field of fixed magnitude with polar angles
/// `(theta, phi)`: `H = b (sin theta cos phi X + sin theta sin phi Y + cos theta Z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochField {
    pub magnitude: f64,
}

impl crate::schedule::ParametricFamily for BlochField {
    fn dim(&self) -> usize {
        2
    }

    fn n_params(&self) -> usize {
        2
    }

    fn hamiltonian(&self, lambda: &[f64]) -> Result<HermitianOperator> {
        check_params(lambda, 2)?;
        let (th, ph) = (lambda[0], lambda[1]);
        let n = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
        HermitianOperator::new(field(n, self.magnitude))
    }

    fn derivative(&self, lambda: &[f64], i: usize) -> Result<CMatrix> {
        check_params(lambda, 2)?;
        check_index(i, 2)?;
        let (th, ph) = (lambda[0], lambda[1]);
        let n = if i == 0 {
            [th.cos() * ph.cos(), th.cos() * ph.sin(), -th.sin()]
        } else {
            [-th.sin() * ph.sin(), th.sin() * ph.cos(), 0.0]
        };
        Ok(field(n, self.magnitude))
    }
}

fn field(n: [f64; 3], b: f64) -> CMatrix {
    pauli_matrix('X').unwrap() * real(b * n[0])
        + pauli_matrix('Y').unwrap() * real(b * n[1])
        + pauli_matrix('Z').unwrap() * real(b * n[2])
}

/// Open transverse-field Ising chain with a longitudinal field,
/// `H = -J sum Z_i Z_{i+1} - g sum X_i - h sum Z_i`, parameters `(g, h)`.
#[derive(Clone, Debug)]
pub struct TfimChain {
    n_sites: usize,
    coupling: f64,
    zz: CMatrix,
    x_sum: CMatrix,
    z_sum: CMatrix,
}

impl TfimChain {
    pub const MAX_SITES: usize = 10;

    pub fn new(n_sites: usize, coupling: f64) -> Result<Self> {
        if !(2..=Self::MAX_SITES).contains(&n_sites) {
            return Err(Error::InvalidArgument(format!(
                "chain length must be in 2..={}, got {n_sites}",
                Self::MAX_SITES
            )));
        }
        if !coupling.is_finite() {
            return Err(Error::NonFinite("coupling"));
        }
        let dim = 1usize << n_sites;
        let mut zz = CMatrix::zeros(dim, dim);
        let mut z_sum = CMatrix::zeros(dim, dim);
        let mut x_sum = CMatrix::zeros(dim, dim);
        for basis in 0..dim {
            let spin = |site: usize| {
                if (basis >> (n_sites - 1 - site)) & 1 == 0 {
                    1.0
                } else {
                    -1.0
                }
            };
            let bond: f64 = (0..n_sites - 1).map(|i| spin(i) * spin(i + 1)).sum();
            let mag: f64 = (0..n_sites).map(spin).sum();
            zz[(basis, basis)] = real(bond);
            z_sum[(basis, basis)] = real(mag);
            for site in 0..n_sites {
                let flipped = basis ^ (1 << (n_sites - 1 - site));
                x_sum[(flipped, basis)] += real(1.0);
            }
        }
        Ok(Self {
            n_sites,
            coupling,
            zz,
            x_sum,
            z_sum,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }
}

impl crate::schedule::ParametricFamily for TfimChain {
    fn dim(&self) -> usize {
        1 << self.n_sites
    }

    fn n_params(&self) -> usize {
        2
    }

    fn hamiltonian(&self, lambda: &[f64]) -> Result<HermitianOperator> {
        check_params(lambda, 2)?;
        HermitianOperator::new(
            &self.zz * real(-self.coupling)
                - &self.x_sum * real(lambda[0])
                - &self.z_sum * real(lambda[1]),
        )
    }

    fn derivative(&self, lambda: &[f64], i: usize) -> Result<CMatrix> {
        check_params(lambda, 2)?;
        check_index(i, 2)?;
        Ok(if i == 0 {
            -self.x_sum.clone()
        } else {
            -self.z_sum.clone()
        })
    }
}

/// Gaussian unitary ensemble sample normalized so that `(H|H) ~ 1`.
pub fn random_hermitian<R: Rng>(dim: usize, rng: &mut R) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    let scale = 1.0 / (2.0 * dim as f64).sqrt();
    for i in 0..dim {
        let d: f64 = rng.sample(StandardNormal);
        m[(i, i)] = real(d * std::f64::consts::SQRT_2 * scale);
        for j in (i + 1)..dim {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = C64::new(re, im) * scale;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// Linear path `H(lambda) = H0 + lambda V` with seeded random `H0`, `V`.
#[derive(Clone, Debug)]
pub struct RandomHermitianPath {
    seed: u64,
    h0: CMatrix,
    v: CMatrix,
}

impl RandomHermitianPath {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionTooSmall(dim));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h0 = random_hermitian(dim, &mut rng);
        let v = random_hermitian(dim, &mut rng);
        Ok(Self { seed, h0, v })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn h0(&self) -> &CMatrix {
        &self.h0
    }

    pub fn v(&self) -> &CMatrix {
        &self.v
    }
}

impl crate::schedule::ParametricFamily for RandomHermitianPath {
    fn dim(&self) -> usize {
        self.h0.nrows()
    }

    fn n_params(&self) -> usize {
        1
    }

    fn hamiltonian(&self, lambda: &[f64]) -> Result<HermitianOperator> {
        check_params(lambda, 1)?;
        HermitianOperator::new(&self.h0 + &self.v * real(lambda[0]))
    }

    fn derivative(&self, lambda: &[f64], i: usize) -> Result<CMatrix> {
        check_params(lambda, 1)?;
        check_index(i, 1)?;
        Ok(self.v.clone())
    }
}
