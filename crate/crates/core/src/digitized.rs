//! Lie-Trotter digitization of counterdiabatic driving and empirical
//! error-scaling fits.

use crate::dynamics::{evolution_operator, StateTrajectory};
use crate::error::{Error, Result};
use crate::operator::{propagator, CMatrix, CVector, Ket};
use crate::schedule::Hamiltonian;

/// Infidelities below this value are excluded from scaling fits.
pub const INFIDELITY_FLOOR: f64 = 1e-12;

/// Which factor of each slice acts on the state first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SliceOrdering {
    /// `e^{-i dt H} e^{-i dt H_cd}`: the counterdiabatic factor acts first.
    #[default]
    CdFirst,
    /// `e^{-i dt H_cd} e^{-i dt H}`: the reference factor acts first.
    HFirst,
}

/// Time at which each slice samples its Hamiltonians.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SampleRule {
    /// Slice `n` (1-based) samples at `n T / M`.
    #[default]
    RightEndpoint,
    /// Slice `n` samples at `(n - 1/2) T / M`.
    Midpoint,
}

/// Uniform partition of `[0, T]` into `M` Trotter slices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrotterPlan {
    slices: usize,
    total_time: f64,
    pub ordering: SliceOrdering,
    pub sampling: SampleRule,
}

impl TrotterPlan {
    pub fn new(slices: usize, total_time: f64) -> Result<Self> {
        if slices == 0 {
            return Err(Error::InvalidArgument(
                "slice count must be positive".into(),
            ));
        }
        if !(total_time.is_finite() && total_time > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "total time must be positive, got {total_time}"
            )));
        }
        Ok(Self {
            slices,
            total_time,
            ordering: SliceOrdering::default(),
            sampling: SampleRule::default(),
        })
    }

    pub fn with_ordering(mut self, ordering: SliceOrdering) -> Self {
        self.ordering = ordering;
        self
    }

    pub fn with_sampling(mut self, sampling: SampleRule) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn dt(&self) -> f64 {
        self.total_time / self.slices as f64
    }

    /// End time of slice `n` (0-based), i.e. `(n + 1) T / M`.
    pub fn slice_end(&self, n: usize) -> f64 {
        if n + 1 == self.slices {
            self.total_time
        } else {
            (n + 1) as f64 * self.dt()
        }
    }

    /// Sampling time of slice `n` (0-based).
    pub fn sample_time(&self, n: usize) -> f64 {
        match self.sampling {
            SampleRule::RightEndpoint => self.slice_end(n),
            SampleRule::Midpoint => (n as f64 + 0.5) * self.dt(),
        }
    }
}

/// The unitary of each slice, in application order.
pub fn slice_unitaries(
    h: &dyn Hamiltonian,
    cd: &dyn Hamiltonian,
    plan: &TrotterPlan,
    hbar: f64,
) -> Result<Vec<CMatrix>> {
    if h.dim() != cd.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: cd.dim(),
        });
    }
    let dt = plan.dt();
    (0..plan.slices)
        .map(|n| {
            let t = plan.sample_time(n);
            let uh = propagator(h.at(t)?.matrix(), dt, hbar);
            let ucd = propagator(cd.at(t)?.matrix(), dt, hbar);
            Ok(match plan.ordering {
                SliceOrdering::CdFirst => uh * ucd,
                SliceOrdering::HFirst => ucd * uh,
            })
        })
        .collect()
}

/// Applies the `M` slice unitaries of `plan` to `psi0`.
pub fn trotter_cd_evolve(
    h: &dyn Hamiltonian,
    cd: &dyn Hamiltonian,
    plan: &TrotterPlan,
    psi0: &Ket,
    hbar: f64,
) -> Result<Ket> {
    if psi0.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: psi0.dim(),
        });
    }
    let mut psi = psi0.vector().clone();
    for u in slice_unitaries(h, cd, plan, hbar)? {
        psi = u * psi;
    }
    Ket::new(psi)
}

/// The full product of slice unitaries.
pub fn trotter_propagator(
    h: &dyn Hamiltonian,
    cd: &dyn Hamiltonian,
    plan: &TrotterPlan,
    hbar: f64,
) -> Result<CMatrix> {
    let d = h.dim();
    Ok(slice_unitaries(h, cd, plan, hbar)?
        .into_iter()
        .fold(CMatrix::identity(d, d), |acc, u| u * acc))
}

/// Propagator of `ham` over each slice of `plan`, integrated with `substeps`
/// midpoint-exponential steps per slice.
pub fn exact_slice_unitaries(
    ham: &dyn Hamiltonian,
    plan: &TrotterPlan,
    substeps: usize,
    hbar: f64,
) -> Result<Vec<CMatrix>> {
    (0..plan.slices)
        .map(|n| {
            let t0 = if n == 0 { 0.0 } else { plan.slice_end(n - 1) };
            evolution_operator(ham, t0, plan.slice_end(n), substeps, hbar)
        })
        .collect()
}

/// Applies `steps` in order to `psi0`, recording the state at `t = 0` and at
/// every slice end.
pub fn step_trajectory(
    steps: &[CMatrix],
    psi0: &Ket,
    plan: &TrotterPlan,
    hbar: f64,
) -> Result<StateTrajectory> {
    if steps.len() != plan.slices {
        return Err(Error::InvalidArgument(format!(
            "{} step unitaries for {} slices",
            steps.len(),
            plan.slices
        )));
    }
    let mut psi = psi0.vector().clone();
    let mut states = Vec::with_capacity(steps.len() + 1);
    states.push(psi.clone());
    for u in steps {
        if u.nrows() != psi.len() || u.ncols() != psi.len() {
            return Err(Error::DimensionMismatch {
                expected: psi.len(),
                found: u.nrows(),
            });
        }
        psi = u * psi;
        states.push(psi.clone());
    }
    let mut grid = vec![0.0];
    grid.extend((0..plan.slices).map(|n| plan.slice_end(n)));
    Ok(StateTrajectory {
        grid,
        states,
        method: "slice_product".into(),
        steps_per_interval: 1,
        hbar,
    })
}

/// Least-squares fit of `log y = intercept + slope log M`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// 95% confidence interval of the slope.
    pub slope_band: (f64, f64),
    pub n_points: usize,
}

/// Two-sided 95% Student-t quantiles for 1..=30 degrees of freedom.
const T_QUANTILES: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042,
];

/// Fits a power law through the points with `y >= floor`. Returns `None`
/// when fewer than two points remain.
pub fn fit_power_law(ms: &[usize], ys: &[f64], floor: f64) -> Option<ScalingFit> {
    let pts: Vec<(f64, f64)> = ms
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y.is_finite() && y >= floor)
        .map(|(&m, &y)| ((m as f64).ln(), y.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (stderr, half) = if n > 2 {
        let sse: f64 = pts
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).powi(2))
            .sum();
        let se = (sse / (nf - 2.0) / sxx).sqrt();
        let q = T_QUANTILES.get(n - 3).copied().unwrap_or(1.960);
        (se, q * se)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Some(ScalingFit {
        slope,
        intercept,
        slope_stderr: stderr,
        slope_band: (slope - half, slope + half),
        n_points: n,
    })
}

/// Error of one slice count.
#[derive(Clone, Debug, PartialEq)]
pub struct DigitizationPoint {
    pub slices: usize,
    pub error: f64,
    /// False when the error fell below the floor and was left out of the fit.
    pub included: bool,
}

/// Per-`M` error table with its power-law fit.
#[derive(Clone, Debug, PartialEq)]
pub struct DigitizationReport {
    pub points: Vec<DigitizationPoint>,
    pub floor: f64,
    /// `None` when fewer than two points lie above the floor.
    pub fit: Option<ScalingFit>,
}

impl DigitizationReport {
    pub fn fit_skipped(&self) -> bool {
        self.fit.is_none()
    }

    fn from_errors(ms: &[usize], errors: Vec<f64>, floor: f64) -> Self {
        let fit = fit_power_law(ms, &errors, floor);
        let points = ms
            .iter()
            .zip(errors)
            .map(|(&m, e)| DigitizationPoint {
                slices: m,
                error: e,
                included: e >= floor,
            })
            .collect();
        Self { points, floor, fit }
    }
}

fn check_sweep(ms: &[usize]) -> Result<()> {
    if ms.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "slice sweep needs at least 4 values, got {}",
            ms.len()
        )));
    }
    let lo = ms.iter().copied().min().unwrap_or(0);
    let hi = ms.iter().copied().max().unwrap_or(0);
    if lo == 0 || hi < 4 * lo {
        return Err(Error::InvalidArgument(
            "slice sweep must span at least two octaves".into(),
        ));
    }
    Ok(())
}

/// Infidelity `1 - |<target|psi_M(T)>|^2` for each slice count in `ms`,
/// with a log-log fit over the points above [`INFIDELITY_FLOOR`]. `template`
/// supplies the total time, ordering and sampling rule.
pub fn digitization_error(
    h: &dyn Hamiltonian,
    cd: &dyn Hamiltonian,
    template: &TrotterPlan,
    ms: &[usize],
    psi0: &Ket,
    target: &CVector,
    hbar: f64,
) -> Result<DigitizationReport> {
    check_sweep(ms)?;
    if target.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: target.len(),
        });
    }
    let errors = ms
        .iter()
        .map(|&m| {
            let plan = TrotterPlan {
                slices: m,
                ..*template
            };
            let psi = trotter_cd_evolve(h, cd, &plan, psi0, hbar)?;
            Ok((1.0 - target.dotc(psi.vector()).norm_sqr()).max(0.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(DigitizationReport::from_errors(
        ms,
        errors,
        INFIDELITY_FLOOR,
    ))
}

/// Spectral norm of `a - b`.
pub fn operator_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).singular_values().max()
}

/// Spectral-norm distance between the Trotter propagator and `exact` for each
/// slice count, with a log-log fit.
pub fn propagator_error(
    h: &dyn Hamiltonian,
    cd: &dyn Hamiltonian,
    template: &TrotterPlan,
    ms: &[usize],
    exact: &CMatrix,
    hbar: f64,
) -> Result<DigitizationReport> {
    check_sweep(ms)?;
    let errors = ms
        .iter()
        .map(|&m| {
            let plan = TrotterPlan {
                slices: m,
                ..*template
            };
            Ok(operator_distance(
                &trotter_propagator(h, cd, &plan, hbar)?,
                exact,
            ))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(DigitizationReport::from_errors(
        ms,
        errors,
        INFIDELITY_FLOOR,
    ))
}
