//! Fast-forward scaling with a projection-operator gauge, fast-forwarded
//! counterdiabatic and nonadiabatic driving, and regularized Hamiltonians.
//!
//! Reference Hamiltonians are functions of the reference time `s`; their
//! `rate` is `dH/ds`. Fast-forward Hamiltonians are functions of the
//! fast-forward time `t` with `s = s(t)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operator::{check_finite, hermiticity_deviation, CMatrix, HermitianOperator, C64};
use crate::schedule::{Hamiltonian, ParametricFamily};
use crate::spectral::{
    adiabatic_gauge_potential, exact_cd_with, hermitian_part, parallel_transport_rates,
    DEFAULT_EPS_GAP_REL,
};

type RescaleFn = dyn Fn(f64) -> (f64, f64, f64) + Send + Sync;

/// A monotone map from fast-forward time `t` to reference time `s(t)`.
#[derive(Clone)]
pub enum TimeRescaling {
    /// `s = rate * t`.
    Uniform { rate: f64 },
    /// `s = t_ref (tau - sin(2 pi tau) / (2 pi))` with `tau = t / t_ff`, so
    /// that `ds/dt` vanishes at both ends.
    Smooth { t_ff: f64, t_ref: f64 },
    /// User-supplied `(s, ds/dt, d2s/dt2)` on `[0, t_ff]`.
    Custom { t_ff: f64, f: Arc<RescaleFn> },
}

impl fmt::Debug for TimeRescaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform { rate } => write!(f, "Uniform {{ rate: {rate} }}"),
            Self::Smooth { t_ff, t_ref } => {
                write!(f, "Smooth {{ t_ff: {t_ff}, t_ref: {t_ref} }}")
            }
            Self::Custom { t_ff, .. } => write!(f, "Custom {{ t_ff: {t_ff} }}"),
        }
    }
}

impl TimeRescaling {
    pub fn uniform(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rescaling rate must be positive, got {rate}"
            )));
        }
        Ok(Self::Uniform { rate })
    }

    pub fn smooth(t_ff: f64, t_ref: f64) -> Result<Self> {
        if !(t_ff.is_finite() && t_ff > 0.0 && t_ref.is_finite() && t_ref > 0.0) {
            return Err(Error::InvalidArgument(
                "rescaling durations must be positive".into(),
            ));
        }
        Ok(Self::Smooth { t_ff, t_ref })
    }

    /// Validates `s(0) = 0` and `ds/dt >= 0` on 1001 samples of `[0, t_ff]`.
    pub fn custom(
        t_ff: f64,
        f: impl Fn(f64) -> (f64, f64, f64) + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(t_ff.is_finite() && t_ff > 0.0) {
            return Err(Error::InvalidArgument(
                "rescaling duration must be positive".into(),
            ));
        }
        let (s0, _, _) = f(0.0);
        if s0.abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("rescaling has s(0) = {s0}")));
        }
        let mut prev = s0;
        for k in 1..=1000 {
            let (s, rate, _) = f(t_ff * k as f64 / 1000.0);
            if !(s.is_finite() && rate.is_finite()) || rate < 0.0 || s < prev {
                return Err(Error::InvalidArgument("rescaling is not monotone".into()));
            }
            prev = s;
        }
        Ok(Self::Custom {
            t_ff,
            f: Arc::new(f),
        })
    }

    /// `(s, ds/dt, d2s/dt2)` at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        match self {
            Self::Uniform { rate } => (rate * t, *rate, 0.0),
            Self::Smooth { t_ff, t_ref } => {
                let tau = t / t_ff;
                let w = 2.0 * PI * tau;
                (
                    t_ref * (tau - w.sin() / (2.0 * PI)),
                    t_ref / t_ff * (1.0 - w.cos()),
                    t_ref / (t_ff * t_ff) * 2.0 * PI * w.sin(),
                )
            }
            Self::Custom { f, .. } => f(t),
        }
    }

    pub fn s(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    pub fn rate(&self, t: f64) -> f64 {
        self.eval(t).1
    }

    pub fn accel(&self, t: f64) -> f64 {
        self.eval(t).2
    }
}

/// Rank-one projectors `P_sigma`, their time derivatives, and the gauge
/// phases `f_sigma` with their derivatives, all at one fast-forward time.
#[derive(Clone, Debug)]
pub struct GaugeSample {
    pub projectors: Vec<CMatrix>,
    pub projector_rates: Vec<CMatrix>,
    pub phases: Vec<f64>,
    pub phase_rates: Vec<f64>,
}

impl GaugeSample {
    /// Checks `sum P = 1` and `P^2 = P` within `1e-10`.
    pub fn validate(&self) -> Result<()> {
        let n = self.projectors.len();
        if n == 0
            || self.projector_rates.len() != n
            || self.phases.len() != n
            || self.phase_rates.len() != n
        {
            return Err(Error::InvalidArgument("inconsistent gauge sample".into()));
        }
        let d = self.projectors[0].nrows();
        let mut sum = CMatrix::zeros(d, d);
        let mut deviation = 0.0f64;
        for p in &self.projectors {
            check_finite(p, "gauge projector")?;
            sum += p;
            deviation = deviation.max(max_entry(&(p * p - p)));
            deviation = deviation.max(hermiticity_deviation(p));
        }
        deviation = deviation.max(max_entry(&(sum - CMatrix::identity(d, d))));
        if deviation > 1e-10 {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(())
    }

    /// `U_f = sum_sigma exp(i f_sigma) P_sigma`.
    pub fn unitary(&self) -> CMatrix {
        let d = self.projectors[0].nrows();
        let mut u = CMatrix::zeros(d, d);
        for (p, &f) in self.projectors.iter().zip(&self.phases) {
            u += p * C64::from_polar(1.0, f);
        }
        u
    }

    /// `dU_f/dt`.
    pub fn unitary_rate(&self) -> CMatrix {
        let d = self.projectors[0].nrows();
        let mut du = CMatrix::zeros(d, d);
        for k in 0..self.projectors.len() {
            let e = C64::from_polar(1.0, self.phases[k]);
            du += &self.projectors[k] * (C64::new(0.0, self.phase_rates[k]) * e);
            du += &self.projector_rates[k] * e;
        }
        du
    }
}

fn max_entry(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

/// A measurement-preserving fast-forward gauge.
pub trait FfGauge: Send + Sync {
    fn dim(&self) -> usize;

    fn sample(&self, t: f64) -> Result<GaugeSample>;
}

impl<T: FfGauge + ?Sized> FfGauge for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sample(&self, t: f64) -> Result<GaugeSample> {
        (**self).sample(t)
    }
}

type PhaseFn = dyn Fn(f64) -> (Vec<f64>, Vec<f64>) + Send + Sync;

/// Projectors onto the columns of a fixed unitary with caller-supplied
/// phase functions `(f, df/dt)`.
#[derive(Clone)]
pub struct FixedBasisGauge {
    basis: CMatrix,
    phases: Arc<PhaseFn>,
}

impl FixedBasisGauge {
    pub fn new(
        basis: CMatrix,
        phases: impl Fn(f64) -> (Vec<f64>, Vec<f64>) + Send + Sync + 'static,
    ) -> Result<Self> {
        let d = basis.nrows();
        if basis.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: basis.ncols(),
            });
        }
        let deviation = max_entry(&(basis.adjoint() * &basis - CMatrix::identity(d, d)));
        if deviation > 1e-10 {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(Self {
            basis,
            phases: Arc::new(phases),
        })
    }

    /// The computational basis with the given phases.
    pub fn computational(
        dim: usize,
        phases: impl Fn(f64) -> (Vec<f64>, Vec<f64>) + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(CMatrix::identity(dim, dim), phases)
    }
}

impl FfGauge for FixedBasisGauge {
    fn dim(&self) -> usize {
        self.basis.nrows()
    }

    fn sample(&self, t: f64) -> Result<GaugeSample> {
        let d = self.dim();
        let (phases, phase_rates) = (self.phases)(t);
        if phases.len() != d || phase_rates.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: phases.len(),
            });
        }
        let projectors = (0..d)
            .map(|k| self.basis.column(k) * self.basis.column(k).adjoint())
            .collect();
        Ok(GaugeSample {
            projectors,
            projector_rates: vec![CMatrix::zeros(d, d); d],
            phases,
            phase_rates,
        })
    }
}

// Five-point Gauss-Legendre rule on [-1, 1].
fn gauss_legendre_5() -> ([f64; 5], [f64; 5]) {
    let a = (5.0f64 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
    let b = (5.0f64 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
    let wa = (322.0 + 13.0 * 70.0f64.sqrt()) / 900.0;
    let wb = (322.0 - 13.0 * 70.0f64.sqrt()) / 900.0;
    ([-b, -a, 0.0, a, b], [wb, wa, 128.0 / 225.0, wa, wb])
}

/// The eigenprojector gauge of a reference Hamiltonian `H(s)` with phases
/// `f_n(t) = (1/hbar) int_0^t (ds/dt' - 1) E_n(s(t')) dt'`.
///
/// With this gauge the fast-forward of `H + H_cd` is `H(s) + (ds/dt) H_cd(s)`
/// and the fast-forward of the bare `H` is `H(s) + (ds/dt)(H_cd + H_nad)`.
pub struct EigenGauge<H> {
    ham: H,
    rescale: TimeRescaling,
    hbar: f64,
    table_step: f64,
    table: Vec<Vec<f64>>,
}

impl<H: Hamiltonian> EigenGauge<H> {
    /// Tabulates the phase integrals on `[0, t_max]` with `panels`
    /// Gauss-Legendre panels.
    pub fn new(
        ham: H,
        rescale: TimeRescaling,
        t_max: f64,
        panels: usize,
        hbar: f64,
    ) -> Result<Self> {
        if !(t_max.is_finite() && t_max > 0.0) || panels == 0 {
            return Err(Error::InvalidArgument(
                "phase table needs a positive duration and panel count".into(),
            ));
        }
        let mut gauge = Self {
            ham,
            rescale,
            hbar,
            table_step: t_max / panels as f64,
            table: Vec::with_capacity(panels + 1),
        };
        let mut acc = vec![0.0; gauge.ham.dim()];
        gauge.table.push(acc.clone());
        for k in 0..panels {
            let a = k as f64 * gauge.table_step;
            let inc = gauge.integrate(a, a + gauge.table_step)?;
            for (x, d) in acc.iter_mut().zip(inc) {
                *x += d;
            }
            gauge.table.push(acc.clone());
        }
        Ok(gauge)
    }

    pub fn hamiltonian(&self) -> &H {
        &self.ham
    }

    pub fn rescaling(&self) -> &TimeRescaling {
        &self.rescale
    }

    fn phase_rates(&self, t: f64) -> Result<Vec<f64>> {
        let (s, rate, _) = self.rescale.eval(t);
        let spec = self.ham.at(s)?.eigh();
        Ok(spec
            .values
            .iter()
            .map(|e| (rate - 1.0) * e / self.hbar)
            .collect())
    }

    fn integrate(&self, a: f64, b: f64) -> Result<Vec<f64>> {
        let (nodes, weights) = gauss_legendre_5();
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut out = vec![0.0; self.ham.dim()];
        for (x, w) in nodes.iter().zip(weights) {
            for (o, r) in out.iter_mut().zip(self.phase_rates(mid + half * x)?) {
                *o += w * half * r;
            }
        }
        Ok(out)
    }

    /// Gauge phases `f_n(t)`.
    pub fn phases(&self, t: f64) -> Result<Vec<f64>> {
        if t < 0.0 {
            return Err(Error::InvalidArgument(format!("negative time {t}")));
        }
        let k = ((t / self.table_step).floor() as usize).min(self.table.len() - 1);
        let t0 = k as f64 * self.table_step;
        let mut f = self.table[k].clone();
        if t > t0 {
            for (x, d) in f.iter_mut().zip(self.integrate(t0, t)?) {
                *x += d;
            }
        }
        Ok(f)
    }
}

impl<H: Hamiltonian> FfGauge for EigenGauge<H> {
    fn dim(&self) -> usize {
        self.ham.dim()
    }

    fn sample(&self, t: f64) -> Result<GaugeSample> {
        let (s, rate, _) = self.rescale.eval(t);
        let h = self.ham.at(s)?;
        let dh = self.ham.rate(s)?;
        let (spec, rates) = parallel_transport_rates(&h, &dh)?;
        let d = spec.dim();
        let mut projectors = Vec::with_capacity(d);
        let mut projector_rates = Vec::with_capacity(d);
        for n in 0..d {
            let v = spec.vectors.column(n);
            let dv = rates.column(n);
            projectors.push(v * v.adjoint());
            projector_rates.push((dv * v.adjoint() + v * dv.adjoint()) * C64::from(rate));
        }
        let phase_rates = spec
            .values
            .iter()
            .map(|e| (rate - 1.0) * e / self.hbar)
            .collect();
        Ok(GaugeSample {
            projectors,
            projector_rates,
            phases: self.phases(t)?,
            phase_rates,
        })
    }
}

/// `H_FF = (ds/dt) U_f H(s) U_f^dag + i hbar (dU_f/dt) U_f^dag`.
pub fn ff_hamiltonian(
    reference: &dyn Hamiltonian,
    gauge: &dyn FfGauge,
    rescale: &TimeRescaling,
    t: f64,
    hbar: f64,
) -> Result<HermitianOperator> {
    let (s, rate, _) = rescale.eval(t);
    if rate < 0.0 {
        return Err(Error::InvalidArgument("rescaling is not monotone".into()));
    }
    let sample = gauge.sample(t)?;
    sample.validate()?;
    let u = sample.unitary();
    let du = sample.unitary_rate();
    let h = reference.at(s)?;
    let m =
        (&u * h.matrix() * u.adjoint()) * C64::from(rate) + du * u.adjoint() * C64::new(0.0, hbar);
    let scale = max_entry(&m).max(1.0);
    let deviation = hermiticity_deviation(&m);
    if deviation > 1e-9 * scale {
        return Err(Error::NotHermitian {
            deviation,
            tolerance: 1e-9 * scale,
        });
    }
    HermitianOperator::new(hermitian_part(m))
}

/// [`ff_hamiltonian`] as a time-dependent Hamiltonian.
pub struct FastForward<H, G> {
    pub reference: H,
    pub gauge: G,
    pub rescale: TimeRescaling,
    pub hbar: f64,
}

impl<H: Hamiltonian, G: FfGauge> Hamiltonian for FastForward<H, G> {
    fn dim(&self) -> usize {
        self.reference.dim()
    }

    fn at(&self, t: f64) -> Result<HermitianOperator> {
        ff_hamiltonian(&self.reference, &self.gauge, &self.rescale, t, self.hbar)
    }
}

/// Fast-forwarded counterdiabatic driving `H(s) + (ds/dt) H_cd(s)`.
pub fn ff_of_cd(
    reference: &dyn Hamiltonian,
    rescale: &TimeRescaling,
    t: f64,
    hbar: f64,
) -> Result<HermitianOperator> {
    let (s, rate, _) = rescale.eval(t);
    let h = reference.at(s)?;
    let dh = reference.rate(s)? * C64::from(rate);
    let cd = exact_cd_with(&h, &dh, hbar, DEFAULT_EPS_GAP_REL, s)?;
    HermitianOperator::with_tolerance(h.matrix() + cd.matrix(), 1e-10)
}

/// [`ff_of_cd`] as a time-dependent Hamiltonian.
pub struct FfCd<H> {
    pub reference: H,
    pub rescale: TimeRescaling,
    pub hbar: f64,
}

impl<H: Hamiltonian> Hamiltonian for FfCd<H> {
    fn dim(&self) -> usize {
        self.reference.dim()
    }

    fn at(&self, t: f64) -> Result<HermitianOperator> {
        ff_of_cd(&self.reference, &self.rescale, t, self.hbar)
    }
}

/// `H_nad = -i hbar sum_{m != n} exp(-i (f_m - f_n)) |m><m|d_s n><n|` in the
/// eigenbasis of `h`, for phases with `hbar df_n/dt = (1 - ds/dt) E_n`.
pub fn ff_nonadiabatic_term(
    h: &HermitianOperator,
    dh_ds: &CMatrix,
    phases: &[f64],
    hbar: f64,
) -> Result<HermitianOperator> {
    let (spec, rates) = parallel_transport_rates(h, dh_ds)?;
    let d = spec.dim();
    if phases.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: phases.len(),
        });
    }
    let v = &spec.vectors;
    let conn = v.adjoint() * &rates;
    let mut m = CMatrix::zeros(d, d);
    for row in 0..d {
        for col in 0..d {
            if row != col {
                m[(row, col)] = C64::new(0.0, -hbar)
                    * C64::from_polar(1.0, -(phases[row] - phases[col]))
                    * conn[(row, col)];
            }
        }
    }
    HermitianOperator::with_tolerance(v * m * v.adjoint(), 1e-10)
}

/// `H(s) + (ds/dt)(H_cd(s) + H_nad(t))`, which reproduces the bare
/// reference dynamics on the fast-forward clock. With `include_nad = false`
/// this reduces to [`FfCd`].
pub struct FfNonadiabatic<H> {
    pub gauge: EigenGauge<H>,
    pub include_nad: bool,
}

impl<H: Hamiltonian> Hamiltonian for FfNonadiabatic<H> {
    fn dim(&self) -> usize {
        self.gauge.dim()
    }

    fn at(&self, t: f64) -> Result<HermitianOperator> {
        let (s, rate, _) = self.gauge.rescale.eval(t);
        let hbar = self.gauge.hbar;
        let h = self.gauge.ham.at(s)?;
        let dh = self.gauge.ham.rate(s)?;
        let cd = exact_cd_with(&h, &dh, hbar, DEFAULT_EPS_GAP_REL, s)?;
        let mut m = h.matrix() + cd.matrix() * C64::from(rate);
        if self.include_nad {
            // the nonadiabatic phases are the negatives of the gauge phases
            let f: Vec<f64> = self.gauge.phases(t)?.iter().map(|x| -x).collect();
            m += ff_nonadiabatic_term(&h, &dh, &f, hbar)?.matrix() * C64::from(rate);
        }
        HermitianOperator::with_tolerance(m, 1e-10)
    }
}

/// `H(lambda) + sum_i eps_i A_i(lambda)` along `lambda(t) = lambda_0 + eps t`.
pub struct RegularizedHamiltonian<F> {
    pub family: F,
    pub start: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub hbar: f64,
}

impl<F: ParametricFamily> RegularizedHamiltonian<F> {
    pub fn new(family: F, start: Vec<f64>, epsilon: Vec<f64>, hbar: f64) -> Result<Self> {
        let p = family.n_params();
        if start.len() != p || epsilon.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: if start.len() != p {
                    start.len()
                } else {
                    epsilon.len()
                },
            });
        }
        Ok(Self {
            family,
            start,
            epsilon,
            hbar,
        })
    }

    pub fn lambda(&self, t: f64) -> Vec<f64> {
        self.start
            .iter()
            .zip(&self.epsilon)
            .map(|(a, e)| a + e * t)
            .collect()
    }
}

/// `H(lambda) + scale * sum_i eps_i A_i(lambda)`.
pub fn regularized_hamiltonian<F: ParametricFamily + ?Sized>(
    family: &F,
    lambda: &[f64],
    epsilon: &[f64],
    scale: f64,
    hbar: f64,
) -> Result<HermitianOperator> {
    if epsilon.len() != family.n_params() {
        return Err(Error::DimensionMismatch {
            expected: family.n_params(),
            found: epsilon.len(),
        });
    }
    let mut m = family.hamiltonian(lambda)?.into_matrix();
    for (i, &e) in epsilon.iter().enumerate() {
        if e != 0.0 {
            m +=
                adiabatic_gauge_potential(family, lambda, i, hbar)?.matrix() * C64::from(scale * e);
        }
    }
    HermitianOperator::with_tolerance(m, 1e-10)
}

/// The fast-forwarded regularized Hamiltonian
/// `H(lambda) + (ds/dt) sum_i eps_i A_i(lambda)`.
pub fn ff_regularized<F: ParametricFamily + ?Sized>(
    family: &F,
    lambda: &[f64],
    epsilon: &[f64],
    rate: f64,
    hbar: f64,
) -> Result<HermitianOperator> {
    regularized_hamiltonian(family, lambda, epsilon, rate, hbar)
}

impl<F: ParametricFamily> Hamiltonian for RegularizedHamiltonian<F> {
    fn dim(&self) -> usize {
        self.family.dim()
    }

    fn at(&self, t: f64) -> Result<HermitianOperator> {
        regularized_hamiltonian(&self.family, &self.lambda(t), &self.epsilon, 1.0, self.hbar)
    }

    fn rate(&self, t: f64) -> Result<CMatrix> {
        let h = 1e-5 * t.abs().max(1.0);
        let plus = self.at(t + h)?;
        let minus = self.at(t - h)?;
        Ok((plus.matrix() - minus.matrix()) / C64::from(2.0 * h))
    }
}
