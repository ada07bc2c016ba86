//! Norm-preserving integration of the time-dependent Schrodinger equation.

use crate::error::{Error, Result};
use crate::operator::{propagator, CMatrix, CVector, Ket, C64};
use crate::schedule::{check_grid, Hamiltonian};
use crate::spectral::EigenPath;

/// States sampled on a time grid.
#[derive(Clone, Debug)]
pub struct StateTrajectory {
    pub grid: Vec<f64>,
    pub states: Vec<CVector>,
    pub method: String,
    pub steps_per_interval: usize,
    pub hbar: f64,
}

impl StateTrajectory {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    pub fn last(&self) -> &CVector {
        self.states.last().expect("trajectory is nonempty")
    }

    /// Largest `| ||psi|| - 1 |` over the trajectory.
    pub fn max_norm_drift(&self) -> f64 {
        self.states
            .iter()
            .map(|s| (s.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Midpoint-exponential propagator from `t0` to `t1` with `steps` equal
/// substeps.
pub fn evolution_operator(
    ham: &dyn Hamiltonian,
    t0: f64,
    t1: f64,
    steps: usize,
    hbar: f64,
) -> Result<CMatrix> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be positive".into()));
    }
    let dt = (t1 - t0) / steps as f64;
    let d = ham.dim();
    let mut u = CMatrix::identity(d, d);
    for k in 0..steps {
        let tm = t0 + (k as f64 + 0.5) * dt;
        let h = ham.at(tm)?;
        u = propagator(h.matrix(), dt, hbar) * u;
    }
    Ok(u)
}

/// Integrates `i hbar d/dt psi = H psi` over `grid`, taking
/// `steps_per_interval` midpoint-exponential steps between grid points.
pub fn evolve(
    ham: &dyn Hamiltonian,
    psi0: &Ket,
    grid: &[f64],
    steps_per_interval: usize,
    hbar: f64,
) -> Result<StateTrajectory> {
    check_grid(grid, 1)?;
    if steps_per_interval == 0 {
        return Err(Error::InvalidArgument(
            "steps_per_interval must be positive".into(),
        ));
    }
    if psi0.dim() != ham.dim() {
        return Err(Error::DimensionMismatch {
            expected: ham.dim(),
            found: psi0.dim(),
        });
    }
    let mut states = Vec::with_capacity(grid.len());
    let mut psi = psi0.vector().clone();
    states.push(psi.clone());
    for w in grid.windows(2) {
        let dt = (w[1] - w[0]) / steps_per_interval as f64;
        for k in 0..steps_per_interval {
            let tm = w[0] + (k as f64 + 0.5) * dt;
            let h = ham.at(tm)?;
            psi = propagator(h.matrix(), dt, hbar) * psi;
        }
        states.push(psi.clone());
    }
    Ok(StateTrajectory {
        grid: grid.to_vec(),
        states,
        method: "midpoint_exponential".into(),
        steps_per_interval,
        hbar,
    })
}

/// `<a|b>`.
pub fn overlap(a: &CVector, b: &CVector) -> Result<C64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(a.dotc(b))
}

/// `|<a|b>|^2`.
pub fn fidelity(a: &CVector, b: &CVector) -> Result<f64> {
    Ok(overlap(a, b)?.norm_sqr())
}

pub(crate) fn grids_match(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0))
}

/// Adiabatic-frame coefficients `c_n(t) = exp(+i/hbar int E_n) <n(t)|psi(t)>`
/// indexed as `[time][mode]`. The energy integral uses the trapezoid rule on
/// the shared grid.
pub fn adiabatic_coefficients(
    trajectory: &StateTrajectory,
    path: &EigenPath,
) -> Result<Vec<Vec<C64>>> {
    if !grids_match(&trajectory.grid, path.grid()) {
        return Err(Error::InvalidArgument(
            "trajectory and eigenpath grids differ".into(),
        ));
    }
    if trajectory.dim() != path.dim() {
        return Err(Error::DimensionMismatch {
            expected: path.dim(),
            found: trajectory.dim(),
        });
    }
    let hbar = trajectory.hbar;
    let k = path.n_levels();
    let mut integral = vec![0.0; k];
    let mut out = Vec::with_capacity(trajectory.len());
    for (i, psi) in trajectory.states.iter().enumerate() {
        if i > 0 {
            let dt = path.grid()[i] - path.grid()[i - 1];
            for (n, acc) in integral.iter_mut().enumerate() {
                *acc += 0.5 * dt * (path.energy(i - 1, n) + path.energy(i, n));
            }
        }
        let row = (0..k)
            .map(|n| {
                let proj = path.vectors(i).column(n).dotc(psi);
                C64::from_polar(1.0, integral[n] / hbar) * proj
            })
            .collect();
        out.push(row);
    }
    Ok(out)
}
