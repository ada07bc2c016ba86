//! Time-dependent Hamiltonians and parameter schedules.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operator::{CMatrix, HermitianOperator, C64};

/// A Hamiltonian sampled in time. `rate` defaults to a centered finite
/// difference; implementors with analytic derivatives should override it.
pub trait Hamiltonian: Send + Sync {
    fn dim(&self) -> usize;

    fn at(&self, t: f64) -> Result<HermitianOperator>;

    fn rate(&self, t: f64) -> Result<CMatrix> {
        let h = 1e-5 * t.abs().max(1.0);
        let plus = self.at(t + h)?;
        let minus = self.at(t - h)?;
        Ok((plus.matrix() - minus.matrix()) / C64::from(2.0 * h))
    }
}

impl<T: Hamiltonian + ?Sized> Hamiltonian for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn at(&self, t: f64) -> Result<HermitianOperator> {
        (**self).at(t)
    }
    fn rate(&self, t: f64) -> Result<CMatrix> {
        (**self).rate(t)
    }
}

impl<T: Hamiltonian + ?Sized> Hamiltonian for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn at(&self, t: f64) -> Result<HermitianOperator> {
        (**self).at(t)
    }
    fn rate(&self, t: f64) -> Result<CMatrix> {
        (**self).rate(t)
    }
}

impl<T: Hamiltonian + ?Sized> Hamiltonian for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn at(&self, t: f64) -> Result<HermitianOperator> {
        (**self).at(t)
    }
    fn rate(&self, t: f64) -> Result<CMatrix> {
        (**self).rate(t)
    }
}

type MatrixFn = dyn Fn(f64) -> Result<CMatrix> + Send + Sync;

/// A Hamiltonian defined by closures.
pub struct FnHamiltonian {
    dim: usize,
    f: Box<MatrixFn>,
    df: Option<Box<MatrixFn>>,
}

impl FnHamiltonian {
    pub fn new(dim: usize, f: impl Fn(f64) -> Result<CMatrix> + Send + Sync + 'static) -> Self {
        Self {
            dim,
            f: Box::new(f),
            df: None,
        }
    }

    pub fn with_rate(
        mut self,
        df: impl Fn(f64) -> Result<CMatrix> + Send + Sync + 'static,
    ) -> Self {
        self.df = Some(Box::new(df));
        self
    }

    /// A time-independent Hamiltonian.
    pub fn constant(h: HermitianOperator) -> Self {
        let dim = h.dim();
        let m = h.into_matrix();
        Self::new(dim, move |_| Ok(m.clone())).with_rate(move |_| Ok(CMatrix::zeros(dim, dim)))
    }
}

impl Hamiltonian for FnHamiltonian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn at(&self, t: f64) -> Result<HermitianOperator> {
        let m = (self.f)(t)?;
        if m.nrows() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: m.nrows(),
            });
        }
        HermitianOperator::new(m)
    }

    fn rate(&self, t: f64) -> Result<CMatrix> {
        match &self.df {
            Some(df) => df(t),
            None => {
                let h = 1e-5 * t.abs().max(1.0);
                Ok(((self.f)(t + h)? - (self.f)(t - h)?) / C64::from(2.0 * h))
            }
        }
    }
}

/// Pointwise sum of two Hamiltonians.
pub struct Sum<A, B>(pub A, pub B);

impl<A: Hamiltonian, B: Hamiltonian> Hamiltonian for Sum<A, B> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn at(&self, t: f64) -> Result<HermitianOperator> {
        let a = self.0.at(t)?;
        let b = self.1.at(t)?;
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: b.dim(),
            });
        }
        HermitianOperator::with_tolerance(a.matrix() + b.matrix(), 1e-10)
    }

    fn rate(&self, t: f64) -> Result<CMatrix> {
        Ok(self.0.rate(t)? + self.1.rate(t)?)
    }
}

/// A family `H(lambda)` with analytic parameter derivatives.
pub trait ParametricFamily: Send + Sync {
    fn dim(&self) -> usize;

    fn n_params(&self) -> usize;

    fn hamiltonian(&self, lambda: &[f64]) -> Result<HermitianOperator>;

    /// `dH / d lambda_i`.
    fn derivative(&self, lambda: &[f64], i: usize) -> Result<CMatrix>;

    /// `sum_i v_i dH/d lambda_i`.
    fn directional_derivative(&self, lambda: &[f64], v: &[f64]) -> Result<CMatrix> {
        if v.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                found: v.len(),
            });
        }
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        for (i, vi) in v.iter().enumerate() {
            if *vi != 0.0 {
                out += self.derivative(lambda, i)? * C64::from(*vi);
            }
        }
        Ok(out)
    }
}

impl<T: ParametricFamily + ?Sized> ParametricFamily for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn n_params(&self) -> usize {
        (**self).n_params()
    }
    fn hamiltonian(&self, lambda: &[f64]) -> Result<HermitianOperator> {
        (**self).hamiltonian(lambda)
    }
    fn derivative(&self, lambda: &[f64], i: usize) -> Result<CMatrix> {
        (**self).derivative(lambda, i)
    }
}

impl<T: ParametricFamily + ?Sized> ParametricFamily for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn n_params(&self) -> usize {
        (**self).n_params()
    }
    fn hamiltonian(&self, lambda: &[f64]) -> Result<HermitianOperator> {
        (**self).hamiltonian(lambda)
    }
    fn derivative(&self, lambda: &[f64], i: usize) -> Result<CMatrix> {
        (**self).derivative(lambda, i)
    }
}

/// Shape of the interpolation `g: [0, 1] -> [0, 1]` between the endpoints.
#[derive(Clone)]
pub enum Ramp {
    /// `g(tau) = tau`.
    Linear,
    /// `g(tau) = tau - sin(2 pi tau) / (2 pi)`; `g'` vanishes at both ends.
    Smooth,
    /// Returns `(g(tau), g'(tau))`.
    Custom(Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>),
}

impl std::fmt::Debug for Ramp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ramp::Linear => write!(f, "Linear"),
            Ramp::Smooth => write!(f, "Smooth"),
            Ramp::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Ramp {
    pub fn eval(&self, tau: f64) -> (f64, f64) {
        use std::f64::consts::TAU;
        match self {
            Ramp::Linear => (tau, 1.0),
            Ramp::Smooth => (tau - (TAU * tau).sin() / TAU, 1.0 - (TAU * tau).cos()),
            Ramp::Custom(g) => g(tau),
        }
    }
}

/// `lambda(t) = start + (end - start) g(t / T)`.
#[derive(Clone, Debug)]
pub struct ParamSchedule {
    duration: f64,
    start: Vec<f64>,
    end: Vec<f64>,
    ramp: Ramp,
}

impl ParamSchedule {
    pub fn new(duration: f64, start: Vec<f64>, end: Vec<f64>, ramp: Ramp) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "schedule duration must be positive, got {duration}"
            )));
        }
        if start.len() != end.len() || start.is_empty() {
            return Err(Error::InvalidArgument(
                "schedule endpoints must be nonempty and of equal length".into(),
            ));
        }
        if start.iter().chain(&end).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("schedule endpoints"));
        }
        Ok(Self {
            duration,
            start,
            end,
            ramp,
        })
    }

    pub fn linear(duration: f64, start: Vec<f64>, end: Vec<f64>) -> Result<Self> {
        Self::new(duration, start, end, Ramp::Linear)
    }

    pub fn smooth(duration: f64, start: Vec<f64>, end: Vec<f64>) -> Result<Self> {
        Self::new(duration, start, end, Ramp::Smooth)
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn n_params(&self) -> usize {
        self.start.len()
    }

    pub fn ramp(&self) -> &Ramp {
        &self.ramp
    }

    pub fn lambda(&self, t: f64) -> Vec<f64> {
        let (g, _) = self.ramp.eval(t / self.duration);
        self.start
            .iter()
            .zip(&self.end)
            .map(|(a, b)| a + (b - a) * g)
            .collect()
    }

    pub fn dlambda(&self, t: f64) -> Vec<f64> {
        let (_, dg) = self.ramp.eval(t / self.duration);
        self.start
            .iter()
            .zip(&self.end)
            .map(|(a, b)| (b - a) * dg / self.duration)
            .collect()
    }

    /// Largest relative disagreement between `dlambda` and a centered finite
    /// difference of `lambda` over the given sample times.
    pub fn derivative_consistency(&self, times: &[f64]) -> f64 {
        let h = 1e-6 * self.duration;
        let mut worst = 0.0f64;
        for &t in times {
            let plus = self.lambda(t + h);
            let minus = self.lambda(t - h);
            let analytic = self.dlambda(t);
            let scale = analytic
                .iter()
                .fold(0.0f64, |a, x| a.max(x.abs()))
                .max(1e-300);
            for i in 0..analytic.len() {
                let fd = (plus[i] - minus[i]) / (2.0 * h);
                worst = worst.max((fd - analytic[i]).abs() / scale);
            }
        }
        worst
    }
}

/// A parametric family driven along a schedule.
pub struct Protocol<F> {
    pub family: F,
    pub schedule: ParamSchedule,
}

impl<F: ParametricFamily> Protocol<F> {
    pub fn new(family: F, schedule: ParamSchedule) -> Result<Self> {
        if family.n_params() != schedule.n_params() {
            return Err(Error::DimensionMismatch {
                expected: family.n_params(),
                found: schedule.n_params(),
            });
        }
        Ok(Self { family, schedule })
    }

    pub fn duration(&self) -> f64 {
        self.schedule.duration()
    }
}

impl<F: ParametricFamily> Hamiltonian for Protocol<F> {
    fn dim(&self) -> usize {
        self.family.dim()
    }

    fn at(&self, t: f64) -> Result<HermitianOperator> {
        self.family.hamiltonian(&self.schedule.lambda(t))
    }

    fn rate(&self, t: f64) -> Result<CMatrix> {
        self.family
            .directional_derivative(&self.schedule.lambda(t), &self.schedule.dlambda(t))
    }
}

/// `n_points` equally spaced times from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n_points: usize) -> Vec<f64> {
    match n_points {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / (n_points - 1) as f64;
            let mut v: Vec<f64> = (0..n_points).map(|i| a + step * i as f64).collect();
            v[n_points - 1] = b;
            v
        }
    }
}

pub(crate) fn check_grid(grid: &[f64], min_len: usize) -> Result<()> {
    if grid.len() < min_len {
        return Err(Error::InvalidArgument(format!(
            "time grid needs at least {min_len} points, got {}",
            grid.len()
        )));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("time grid"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "time grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Second-order finite-difference weights for `d/dt` at grid index `i`
/// on a possibly nonuniform grid with at least three points.
pub fn derivative_weights(grid: &[f64], i: usize) -> [(usize, f64); 3] {
    let n = grid.len();
    if i == 0 {
        let (h1, h2) = (grid[1] - grid[0], grid[2] - grid[1]);
        [
            (0, -(2.0 * h1 + h2) / (h1 * (h1 + h2))),
            (1, (h1 + h2) / (h1 * h2)),
            (2, -h1 / (h2 * (h1 + h2))),
        ]
    } else if i == n - 1 {
        let (h1, h2) = (grid[n - 2] - grid[n - 3], grid[n - 1] - grid[n - 2]);
        [
            (n - 3, h2 / (h1 * (h1 + h2))),
            (n - 2, -(h1 + h2) / (h1 * h2)),
            (n - 1, (2.0 * h2 + h1) / (h2 * (h1 + h2))),
        ]
    } else {
        let (h1, h2) = (grid[i] - grid[i - 1], grid[i + 1] - grid[i]);
        [
            (i - 1, -h2 / (h1 * (h1 + h2))),
            (i, (h2 - h1) / (h1 * h2)),
            (i + 1, h1 / (h2 * (h1 + h2))),
        ]
    }
}

/// Applies [`derivative_weights`] to matrix-valued samples.
pub fn differentiate_samples(samples: &[CMatrix], grid: &[f64]) -> Result<Vec<CMatrix>> {
    check_grid(grid, 3)?;
    if samples.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: samples.len(),
        });
    }
    Ok((0..grid.len())
        .map(|i| {
            let mut acc = CMatrix::zeros(samples[i].nrows(), samples[i].ncols());
            for (k, w) in derivative_weights(grid, i) {
                acc += &samples[k] * C64::from(w);
            }
            acc
        })
        .collect())
}
