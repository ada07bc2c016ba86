//! Quantum-speed-limit certificates: lower bounds on the overlap of two
//! driven states from the difference of their generators.

use std::f64::consts::FRAC_PI_2;

use crate::digitized::TrotterPlan;
use crate::dynamics::{grids_match, StateTrajectory};
use crate::error::{Error, Result};
use crate::operator::{CMatrix, CVector};
use crate::schedule::Hamiltonian;

/// Overlap magnitudes above one by more than this are reported as warnings
/// before being clamped.
pub const CLAMP_WARN_EXCESS: f64 = 1e-9;

/// Cumulative angle, bound `cos(angle)` and, when both trajectories are
/// known, the observed overlap `|<psi_1|psi_2>|` on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub grid: Vec<f64>,
    /// `L(t)` for continuous bounds; `L_n` on the end point of slice `n`
    /// (zero at `t = 0`) for discrete bounds.
    pub integrand: Vec<f64>,
    pub angle: Vec<f64>,
    pub bound: Vec<f64>,
    pub observed: Option<Vec<f64>>,
    /// Set when the angle exceeds `pi/2`, where the bound carries no
    /// information.
    pub vacuous: bool,
    pub warnings: Vec<String>,
}

impl BoundReport {
    fn new(grid: Vec<f64>, integrand: Vec<f64>, angle: Vec<f64>) -> Self {
        let bound = angle.iter().map(|a| a.cos()).collect();
        let vacuous = angle.iter().any(|&a| a > FRAC_PI_2);
        Self {
            grid,
            integrand,
            angle,
            bound,
            observed: None,
            vacuous,
            warnings: Vec::new(),
        }
    }

    pub fn final_angle(&self) -> f64 {
        *self.angle.last().expect("report is nonempty")
    }

    pub fn final_bound(&self) -> f64 {
        *self.bound.last().expect("report is nonempty")
    }

    /// Smallest `observed - bound` over the grid.
    pub fn min_margin(&self) -> Option<f64> {
        self.observed.as_ref().map(|obs| {
            obs.iter()
                .zip(&self.bound)
                .map(|(o, b)| o - b)
                .fold(f64::INFINITY, f64::min)
        })
    }

    /// Whether `observed >= bound - tol` everywhere.
    pub fn holds(&self, tol: f64) -> Option<bool> {
        self.min_margin().map(|m| m >= -tol)
    }
}

/// Standard deviation `sqrt(<X^2> - <X>^2)` of a Hermitian `x` in the
/// normalized state `psi`, evaluated as `||(X - <X>) psi||`.
pub fn standard_deviation(x: &CMatrix, psi: &CVector) -> Result<f64> {
    if x.nrows() != psi.len() || x.ncols() != psi.len() {
        return Err(Error::DimensionMismatch {
            expected: psi.len(),
            found: x.nrows(),
        });
    }
    let xpsi = x * psi;
    let mean = psi.dotc(&xpsi).re;
    Ok((xpsi - psi * crate::C64::from(mean)).norm())
}

fn observed_overlaps(a: &StateTrajectory, b: &StateTrajectory) -> Result<Vec<f64>> {
    if !grids_match(&a.grid, &b.grid) {
        return Err(Error::InvalidArgument(
            "reference and comparison trajectories use different grids".into(),
        ));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| x.dotc(y).norm())
        .collect())
}

/// Continuous bound `cos((1/hbar) int_0^t L)` with
/// `L = sigma[H1 - H2, psi_ref]`. `reference` solves the Schrodinger equation
/// under either Hamiltonian; `other`, when given, is the second trajectory
/// on the same grid and fills the observed overlaps. The angle uses the
/// trapezoid rule on the reference grid.
pub fn qsl_continuous(
    h1: &dyn Hamiltonian,
    h2: &dyn Hamiltonian,
    reference: &StateTrajectory,
    other: Option<&StateTrajectory>,
) -> Result<BoundReport> {
    if h1.dim() != h2.dim() {
        return Err(Error::DimensionMismatch {
            expected: h1.dim(),
            found: h2.dim(),
        });
    }
    if reference.is_empty() {
        return Err(Error::InvalidArgument(
            "reference trajectory is empty".into(),
        ));
    }
    let integrand = reference
        .grid
        .iter()
        .zip(&reference.states)
        .map(|(&t, psi)| {
            let diff = h1.at(t)?.matrix() - h2.at(t)?.matrix();
            standard_deviation(&diff, psi)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut angle = Vec::with_capacity(integrand.len());
    let mut acc = 0.0;
    angle.push(0.0);
    for i in 1..integrand.len() {
        let dt = reference.grid[i] - reference.grid[i - 1];
        acc += 0.5 * dt * (integrand[i - 1] + integrand[i]) / reference.hbar;
        angle.push(acc);
    }
    let mut report = BoundReport::new(reference.grid.clone(), integrand, angle);
    if let Some(other) = other {
        report.observed = Some(observed_overlaps(reference, other)?);
    }
    Ok(report)
}

/// Discrete bound `cos(sum_n L_n)` with
/// `L_n = arccos |<psi_ref(t_n)| U_other,n U_ref,n^dag |psi_ref(t_n)>|`.
/// `reference` is the trajectory generated by `u_ref` and must be sampled at
/// `t = 0` and at every slice end of `plan`.
pub fn qsl_discrete(
    u_ref: &[CMatrix],
    u_other: &[CMatrix],
    reference: &StateTrajectory,
    other: Option<&StateTrajectory>,
    plan: &TrotterPlan,
) -> Result<BoundReport> {
    let m = plan.slices();
    if u_ref.len() != m || u_other.len() != m {
        return Err(Error::InvalidArgument(format!(
            "expected {m} step unitaries, got {} and {}",
            u_ref.len(),
            u_other.len()
        )));
    }
    let mut slice_grid = vec![0.0];
    slice_grid.extend((0..m).map(|n| plan.slice_end(n)));
    if !grids_match(&reference.grid, &slice_grid) {
        return Err(Error::InvalidArgument(
            "reference trajectory is not sampled at the slice ends".into(),
        ));
    }
    let d = reference.dim();
    let mut warnings = Vec::new();
    let mut integrand = vec![0.0];
    for n in 0..m {
        let (a, b) = (&u_ref[n], &u_other[n]);
        if a.nrows() != d || b.nrows() != d || a.ncols() != d || b.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: a.nrows().max(b.nrows()),
            });
        }
        let psi = &reference.states[n + 1];
        let back = a.adjoint() * psi;
        let mut c = psi.dotc(&(b * back)).norm();
        if c > 1.0 {
            if c - 1.0 > CLAMP_WARN_EXCESS {
                warnings.push(format!(
                    "slice {}: overlap exceeds one by {:e}; clamped",
                    n + 1,
                    c - 1.0
                ));
            }
            c = 1.0;
        }
        integrand.push(c.acos());
    }
    let angle = integrand
        .iter()
        .scan(0.0, |acc, l| {
            *acc += l;
            Some(*acc)
        })
        .collect();
    let mut report = BoundReport::new(slice_grid, integrand, angle);
    report.warnings = warnings;
    if let Some(other) = other {
        report.observed = Some(observed_overlaps(reference, other)?);
    }
    Ok(report)
}
