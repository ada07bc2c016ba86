//! One-dimensional coordinate-space fast-forward: the phase fixed by the
//! continuity equation, the potentials that generate a prescribed amplitude,
//! the fast-forward potential, and a split-step Fourier integrator used as an
//! independent reference.
//!
//! Spatial derivatives and the flux integral use fourth-order stencils on a
//! uniform grid. Outside the support `r >= r_floor` the potentials are held
//! at their boundary values.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::fastforward::TimeRescaling;
use crate::operator::C64;

/// Default amplitude below which the phase is not reconstructed.
pub const DEFAULT_R_FLOOR: f64 = 1e-8;

/// A uniform 1-D grid with particle mass and `hbar`.
#[derive(Clone, Debug)]
pub struct GridSystem {
    x: Vec<f64>,
    dx: f64,
    mass: f64,
    hbar: f64,
    r_floor: f64,
}

impl GridSystem {
    pub fn new(x_min: f64, x_max: f64, n: usize, mass: f64, hbar: f64) -> Result<Self> {
        if n < 8 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 8 points, got {n}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::InvalidArgument(
                "grid bounds must be finite and increasing".into(),
            ));
        }
        if !(mass > 0.0 && hbar > 0.0) {
            return Err(Error::InvalidArgument(
                "mass and hbar must be positive".into(),
            ));
        }
        let dx = (x_max - x_min) / n as f64;
        Ok(Self {
            x: (0..n).map(|i| x_min + dx * i as f64).collect(),
            dx,
            mass,
            hbar,
            r_floor: DEFAULT_R_FLOOR,
        })
    }

    pub fn with_r_floor(mut self, r_floor: f64) -> Self {
        self.r_floor = r_floor;
        self
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn r_floor(&self) -> f64 {
        self.r_floor
    }

    /// `int r^2 dx`.
    pub fn norm_sqr(&self, r: &[f64]) -> f64 {
        r.iter().map(|v| v * v).sum::<f64>() * self.dx
    }

    /// `sqrt(int (rho_a - rho_b)^2 dx)`.
    pub fn density_l2_distance(&self, a: &[C64], b: &[C64]) -> f64 {
        (a.iter()
            .zip(b)
            .map(|(p, q)| (p.norm_sqr() - q.norm_sqr()).powi(2))
            .sum::<f64>()
            * self.dx)
            .sqrt()
    }
}

/// A prescribed amplitude `r(x, s)` and its reference-time derivative.
pub trait AmplitudeModel: Send + Sync {
    /// `(r, dr/ds)` on the grid points `x` at reference time `s`.
    fn sample(&self, x: &[f64], s: f64) -> (Vec<f64>, Vec<f64>);
}

impl<T: AmplitudeModel + ?Sized> AmplitudeModel for &T {
    fn sample(&self, x: &[f64], s: f64) -> (Vec<f64>, Vec<f64>) {
        (**self).sample(x, s)
    }
}

impl<T: AmplitudeModel + ?Sized> AmplitudeModel for Arc<T> {
    fn sample(&self, x: &[f64], s: f64) -> (Vec<f64>, Vec<f64>) {
        (**self).sample(x, s)
    }
}

fn gaussian(x: f64, center: f64, sigma: f64) -> f64 {
    let z = (x - center) / sigma;
    (2.0 * std::f64::consts::PI * sigma * sigma).powf(-0.25) * (-0.25 * z * z).exp()
}

/// A centered Gaussian whose width moves from `sigma0` to `sigma1` over
/// `[0, duration]` along a smoothstep with vanishing end rates.
#[derive(Clone, Copy, Debug)]
pub struct BreathingGaussian {
    pub sigma0: f64,
    pub sigma1: f64,
    pub duration: f64,
}

impl BreathingGaussian {
    /// `(sigma, dsigma/ds)`; constant outside `[0, duration]`.
    pub fn width(&self, s: f64) -> (f64, f64) {
        let tau = (s / self.duration).clamp(0.0, 1.0);
        let inside = s > 0.0 && s < self.duration;
        let shape = tau * tau * (3.0 - 2.0 * tau);
        let rate = if inside {
            6.0 * tau * (1.0 - tau) / self.duration
        } else {
            0.0
        };
        let span = self.sigma1 - self.sigma0;
        (self.sigma0 + span * shape, span * rate)
    }
}

impl AmplitudeModel for BreathingGaussian {
    fn sample(&self, x: &[f64], s: f64) -> (Vec<f64>, Vec<f64>) {
        let (sigma, dsigma) = self.width(s);
        let r: Vec<f64> = x.iter().map(|&x| gaussian(x, 0.0, sigma)).collect();
        let dr = x
            .iter()
            .zip(&r)
            .map(|(&x, &r)| r * dsigma * (x * x / (2.0 * sigma.powi(3)) - 0.5 / sigma))
            .collect();
        (r, dr)
    }
}

/// A Gaussian of fixed width translating at constant velocity.
#[derive(Clone, Copy, Debug)]
pub struct TranslatingGaussian {
    pub sigma: f64,
    pub x0: f64,
    pub velocity: f64,
}

impl AmplitudeModel for TranslatingGaussian {
    fn sample(&self, x: &[f64], s: f64) -> (Vec<f64>, Vec<f64>) {
        let c = self.x0 + self.velocity * s;
        let r: Vec<f64> = x.iter().map(|&x| gaussian(x, c, self.sigma)).collect();
        let dr = x
            .iter()
            .zip(&r)
            .map(|(&x, &r)| r * self.velocity * (x - c) / (2.0 * self.sigma * self.sigma))
            .collect();
        (r, dr)
    }
}

/// First derivative, fourth order in the interior.
fn d1(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| {
            if i >= 2 && i + 2 < n {
                (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * dx)
            } else if i == 0 {
                (f[1] - f[0]) / dx
            } else if i == n - 1 {
                (f[n - 1] - f[n - 2]) / dx
            } else {
                (f[i + 1] - f[i - 1]) / (2.0 * dx)
            }
        })
        .collect()
}

/// Second derivative, fourth order in the interior.
fn d2(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| {
            if i >= 2 && i + 2 < n {
                (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2])
                    / (12.0 * dx * dx)
            } else if i >= 1 && i + 1 < n {
                (f[i - 1] - 2.0 * f[i] + f[i + 1]) / (dx * dx)
            } else {
                0.0
            }
        })
        .collect()
}

/// Cumulative integral from the left end, fourth order.
fn cumulative(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    for i in 0..n - 1 {
        let inc = if i == 0 {
            dx / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
        } else if i == n - 2 {
            dx / 24.0 * (f[n - 4] - 5.0 * f[n - 3] + 19.0 * f[n - 2] + 9.0 * f[n - 1])
        } else {
            dx / 24.0 * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2])
        };
        out[i + 1] = out[i] + inc;
    }
    out
}

/// The phase reconstructed from the continuity equation.
#[derive(Clone, Debug)]
pub struct PhaseProfile {
    /// `theta(x)`, zero at `anchor`.
    pub theta: Vec<f64>,
    /// `d theta / dx`.
    pub gradient: Vec<f64>,
    /// Probability flux `r^2 d theta/dx`.
    pub flux: Vec<f64>,
    /// First and last grid index with `r >= r_floor`.
    pub support: (usize, usize),
    pub anchor: usize,
}

/// Solves `d/dx (r^2 d theta/dx) = -(m/hbar) d/dt (r^2)` with zero flux at
/// the left end. Interior points below `r_floor` that carry flux are
/// reported as ill-conditioned. `anchor` defaults to the peak of `r`.
pub fn phase_from_continuity(
    grid: &GridSystem,
    r: &[f64],
    dr_dt: &[f64],
    anchor: Option<usize>,
) -> Result<PhaseProfile> {
    let n = grid.len();
    if r.len() != n || dr_dt.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if r.len() != n { r.len() } else { dr_dt.len() },
        });
    }
    if r.iter().chain(dr_dt).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("amplitude"));
    }
    if r.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument(
            "amplitude must be non-negative".into(),
        ));
    }
    let source: Vec<f64> = r
        .iter()
        .zip(dr_dt)
        .map(|(r, dr)| -grid.mass / grid.hbar * 2.0 * r * dr)
        .collect();
    let peak = r
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    // integrate toward the peak from each end so that the flux in either
    // tail is accurate relative to the local density
    let from_left = cumulative(&source, grid.dx);
    let reversed: Vec<f64> = source.iter().rev().copied().collect();
    let from_right: Vec<f64> = cumulative(&reversed, grid.dx).into_iter().rev().collect();
    let total = from_left[n - 1];
    let scale = from_left.iter().fold(0.0f64, |a, f| a.max(f.abs()));
    if total.abs() > 1e-6 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidArgument(format!(
            "amplitude rate does not conserve the norm (net flux {total:e})"
        )));
    }
    let flux: Vec<f64> = (0..n)
        .map(|i| {
            if i <= peak {
                from_left[i]
            } else {
                -from_right[i]
            }
        })
        .collect();
    let floor = grid.r_floor;
    let lo = r.iter().position(|&v| v >= floor);
    let hi = r.iter().rposition(|&v| v >= floor);
    let (Some(lo), Some(hi)) = (lo, hi) else {
        return Err(Error::IllConditioned {
            x: grid.x[0],
            amplitude: r.iter().fold(0.0, |a: f64, &b| a.max(b)),
            flux: 0.0,
        });
    };
    let flux_scale = flux[lo..=hi].iter().fold(0.0f64, |a, f| a.max(f.abs()));
    let mut gradient = vec![0.0; n];
    for i in lo..=hi {
        if r[i] >= floor {
            gradient[i] = flux[i] / (r[i] * r[i]);
        } else if flux[i].abs() > 1e-8 * flux_scale.max(f64::MIN_POSITIVE) {
            return Err(Error::IllConditioned {
                x: grid.x[i],
                amplitude: r[i],
                flux: flux[i],
            });
        }
    }
    // linear extrapolation of the gradient into the tails
    if hi > lo + 1 {
        let left_slope = (gradient[lo + 1] - gradient[lo]) / grid.dx;
        for i in 0..lo {
            gradient[i] = gradient[lo] - left_slope * (lo - i) as f64 * grid.dx;
        }
        let right_slope = (gradient[hi] - gradient[hi - 1]) / grid.dx;
        for i in hi + 1..n {
            gradient[i] = gradient[hi] + right_slope * (i - hi) as f64 * grid.dx;
        }
    }
    let anchor = anchor.unwrap_or(peak);
    let integral = cumulative(&gradient, grid.dx);
    let theta = integral.iter().map(|v| v - integral[anchor]).collect();
    Ok(PhaseProfile {
        theta,
        gradient,
        flux,
        support: (lo, hi),
        anchor,
    })
}

/// Potentials at one reference time.
#[derive(Clone, Debug)]
pub struct PotentialSample {
    /// `Re V = -hbar d_t theta + (hbar^2/2m)(r''/r - theta'^2)`.
    pub re_v: Vec<f64>,
    /// `Im V = hbar r_t/r + (hbar^2/2m)(2 r' theta'/r + theta'')`, zero up to
    /// discretization on the support.
    pub im_v: Vec<f64>,
    pub phase: PhaseProfile,
    /// `d theta / ds` at fixed `x`.
    pub dtheta_ds: Vec<f64>,
}

impl PotentialSample {
    /// Largest `|Im V|` on the support.
    pub fn max_im_v(&self) -> f64 {
        let (lo, hi) = self.phase.support;
        self.im_v[lo..=hi]
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

fn clamp_outside(v: &mut [f64], support: (usize, usize)) {
    let (lo, hi) = support;
    let (left, right) = (v[lo], v[hi]);
    for x in &mut v[..lo] {
        *x = left;
    }
    for x in &mut v[hi + 1..] {
        *x = right;
    }
}

/// Step used for the finite-difference `d theta / ds`.
const PHASE_STEP: f64 = 1e-4;

/// Real and imaginary potentials that generate `r(x, s) exp(i theta(x, s))`.
pub fn potentials_from_wavefunction(
    grid: &GridSystem,
    model: &dyn AmplitudeModel,
    s: f64,
) -> Result<PotentialSample> {
    let (r, dr) = model.sample(&grid.x, s);
    let phase = phase_from_continuity(grid, &r, &dr, None)?;
    let (rp, dp) = model.sample(&grid.x, s + PHASE_STEP);
    let (rm, dm) = model.sample(&grid.x, s - PHASE_STEP);
    let plus = phase_from_continuity(grid, &rp, &dp, Some(phase.anchor))?;
    let minus = phase_from_continuity(grid, &rm, &dm, Some(phase.anchor))?;
    let dtheta_ds: Vec<f64> = plus
        .theta
        .iter()
        .zip(&minus.theta)
        .map(|(a, b)| (a - b) / (2.0 * PHASE_STEP))
        .collect();
    let (hbar, mass) = (grid.hbar, grid.mass);
    let kin = hbar * hbar / (2.0 * mass);
    // r'/r and r''/r through ln r, which is smooth where r decays fast
    let log_r: Vec<f64> = r.iter().map(|&v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let l1 = d1(&log_r, grid.dx);
    let l2 = d2(&log_r, grid.dx);
    let th2 = d1(&phase.gradient, grid.dx);
    let (lo, hi) = phase.support;
    let n = grid.len();
    let mut re_v = vec![0.0; n];
    let mut im_v = vec![0.0; n];
    for i in lo..=hi {
        let g = phase.gradient[i];
        re_v[i] = -hbar * dtheta_ds[i] + kin * (l2[i] + l1[i] * l1[i] - g * g);
        im_v[i] = hbar * dr[i] / r[i] + kin * (2.0 * l1[i] * g + th2[i]);
    }
    clamp_outside(&mut re_v, phase.support);
    Ok(PotentialSample {
        re_v,
        im_v,
        phase,
        dtheta_ds,
    })
}

/// The fast-forward potential with phase choice `f = (ds/dt - 1) theta`:
/// `V_FF = Re V - hbar s'' theta - hbar (s'^2 - 1) d_s theta
///         - (hbar^2/2m)(s'^2 - 1) theta'^2`, evaluated at `s(t)`.
pub fn ff_potential(
    grid: &GridSystem,
    model: &dyn AmplitudeModel,
    rescale: &TimeRescaling,
    t: f64,
) -> Result<Vec<f64>> {
    let (s, rate, accel) = rescale.eval(t);
    let p = potentials_from_wavefunction(grid, model, s)?;
    let kin = grid.hbar * grid.hbar / (2.0 * grid.mass);
    let factor = rate * rate - 1.0;
    let (lo, hi) = p.phase.support;
    let mut v = p.re_v.clone();
    for i in lo..=hi {
        let g = p.phase.gradient[i];
        v[i] -= grid.hbar * accel * p.phase.theta[i]
            + grid.hbar * factor * p.dtheta_ds[i]
            + kin * factor * g * g;
    }
    clamp_outside(&mut v, p.phase.support);
    Ok(v)
}

/// `r exp(i theta)` at reference time `s`.
pub fn wavefunction(grid: &GridSystem, model: &dyn AmplitudeModel, s: f64) -> Result<Vec<C64>> {
    let (r, dr) = model.sample(&grid.x, s);
    let phase = phase_from_continuity(grid, &r, &dr, None)?;
    Ok(r.iter()
        .zip(&phase.theta)
        .map(|(&r, &th)| C64::from_polar(r, th))
        .collect())
}

/// Strang split-step Fourier integration of
/// `i hbar psi_t = -(hbar^2/2m) psi_xx + V(x, t) psi` on the periodic grid,
/// with the potential sampled at each step midpoint.
pub fn split_step_evolve(
    grid: &GridSystem,
    psi0: &[C64],
    potential: &dyn Fn(f64) -> Result<Vec<f64>>,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<Vec<C64>> {
    let n = grid.len();
    if psi0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: psi0.len(),
        });
    }
    if steps == 0 || !(t1 > t0) {
        return Err(Error::InvalidArgument(
            "split-step needs t1 > t0 and steps > 0".into(),
        ));
    }
    let dt = (t1 - t0) / steps as f64;
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let length = grid.dx * n as f64;
    let kinetic: Vec<Complex<f64>> = (0..n)
        .map(|j| {
            let m = if j <= n / 2 {
                j as f64
            } else {
                j as f64 - n as f64
            };
            let k = 2.0 * std::f64::consts::PI * m / length;
            let phase = -grid.hbar * k * k * dt / (2.0 * grid.mass);
            Complex::from_polar(1.0 / n as f64, phase)
        })
        .collect();
    let mut psi: Vec<Complex<f64>> = psi0.to_vec();
    for step in 0..steps {
        let tm = t0 + (step as f64 + 0.5) * dt;
        let v = potential(tm)?;
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("potential"));
        }
        let half: Vec<Complex<f64>> = v
            .iter()
            .map(|&v| Complex::from_polar(1.0, -v * dt / (2.0 * grid.hbar)))
            .collect();
        for (p, h) in psi.iter_mut().zip(&half) {
            *p *= h;
        }
        forward.process(&mut psi);
        for (p, k) in psi.iter_mut().zip(&kinetic) {
            *p *= k;
        }
        inverse.process(&mut psi);
        for (p, h) in psi.iter_mut().zip(&half) {
            *p *= h;
        }
    }
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourth_order_stencils() {
        let dx = 0.01;
        let x: Vec<f64> = (0..200).map(|i| i as f64 * dx).collect();
        let f: Vec<f64> = x.iter().map(|x| x.sin()).collect();
        let df = d1(&f, dx);
        let ddf = d2(&f, dx);
        let cf = cumulative(&f, dx);
        for i in 2..198 {
            assert!((df[i] - x[i].cos()).abs() < 1e-9);
            assert!((ddf[i] + x[i].sin()).abs() < 1e-7);
        }
        for i in 0..200 {
            let e = (cf[i] - (1.0 - x[i].cos())).abs();
            assert!(e < 1e-9, "{i}: {e:e}");
        }
    }

    #[test]
    fn static_amplitude_has_flat_phase() {
        let grid = GridSystem::new(-10.0, 10.0, 256, 1.0, 1.0).unwrap();
        let model = BreathingGaussian {
            sigma0: 1.0,
            sigma1: 1.0,
            duration: 1.0,
        };
        let (r, dr) = model.sample(grid.x(), 0.5);
        let p = phase_from_continuity(&grid, &r, &dr, None).unwrap();
        assert!(p.gradient.iter().all(|g| g.abs() < 1e-14));
    }

    #[test]
    fn flux_through_a_node_is_ill_conditioned() {
        let grid = GridSystem::new(-10.0, 10.0, 256, 1.0, 1.0).unwrap();
        let x = grid.x();
        let r: Vec<f64> = x
            .iter()
            .map(|&x| (x.abs() - 0.5).max(0.0).min(1.0) * (-0.1 * x * x).exp())
            .collect();
        let dr: Vec<f64> = x
            .iter()
            .map(|&x| if x < 0.0 { 0.1 } else { -0.1 } * (-0.1 * x * x).exp())
            .collect();
        let err = phase_from_continuity(&grid, &r, &dr, None);
        assert!(matches!(err, Err(Error::IllConditioned { .. })));
    }
}
