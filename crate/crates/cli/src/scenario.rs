//! Executes a validated scenario and collects its artifacts in memory.

use std::collections::BTreeMap;
use std::sync::Arc;

use shortcut_forge::agp::{
    algebraic_system, cd_from_system, krylov_chain, krylov_system, odd_commutator_closure,
    variational_cd_precise, variational_system, VariationalCdTerm,
};
use shortcut_forge::digitized::{
    digitization_error, slice_unitaries, step_trajectory, SampleRule, SliceOrdering, TrotterPlan,
};
use shortcut_forge::dynamics::{evolve, StateTrajectory};
use shortcut_forge::fastforward::{FfCd, TimeRescaling};
use shortcut_forge::grid::{
    ff_potential, potentials_from_wavefunction, split_step_evolve, wavefunction, BreathingGaussian,
    GridSystem,
};
use shortcut_forge::invariant::DynamicalInvariant;
use shortcut_forge::models::{LandauZener, RandomHermitianPath, TfimChain};
use shortcut_forge::operator::frobenius_norm;
use shortcut_forge::qsl::qsl_continuous;
use shortcut_forge::schedule::{linspace, FnHamiltonian, Ramp, Sum};
use shortcut_forge::spectral::{
    adiabatic_state, eigenpath, exact_cd_with, mode_cd, EigenPathOptions, ModeCounterdiabaticTerm,
    DEFAULT_EPS_GAP_REL,
};
use shortcut_forge::{
    CMatrix, CVector, Hamiltonian, HermitianOperator, Ket, ParamSchedule, ParametricFamily,
    Protocol, C64,
};

use crate::artifacts::{Artifacts, Summary, Table, TOOL_NAME};
use crate::config::{
    MethodConfig, OrderingConfig, RampKind, SamplingConfig, ScenarioConfig, SystemConfig,
};
use crate::error::{numerical, setup, CliError};

/// Per-level populations and CD matrix elements are written only up to
/// these dimensions.
const MAX_POPULATION_DIM: usize = 8;
const MAX_CD_ELEMENT_DIM: usize = 4;

/// Order up to which the variational system is solved in double precision.
const DOUBLE_PRECISION_MAX_ORDER: usize = 2;

type Family = Arc<dyn ParametricFamily>;
type Proto = Protocol<Family>;
type CdFn = dyn Fn(&HermitianOperator, &CMatrix, f64) -> shortcut_forge::Result<HermitianOperator>
    + Send
    + Sync;

struct Outcome {
    table: Table,
    final_fidelity: f64,
    slopes: BTreeMap<String, f64>,
    residuals: BTreeMap<String, f64>,
    extra: Vec<(String, Table)>,
}

impl Outcome {
    fn new(table: Table, final_fidelity: f64) -> Self {
        Self {
            table,
            final_fidelity,
            slopes: BTreeMap::new(),
            residuals: BTreeMap::new(),
            extra: Vec::new(),
        }
    }
}

/// Runs `cfg` and returns its artifacts without touching the filesystem.
pub fn execute(cfg: &ScenarioConfig) -> Result<Artifacts, CliError> {
    cfg.validate()?;
    let outcome = match (&cfg.system, &cfg.method) {
        (SystemConfig::Grid1d { .. }, MethodConfig::Ff { rate, rescaling }) => {
            run_grid(cfg, *rate, *rescaling)?
        }
        (SystemConfig::Grid1d { .. }, _) => {
            return Err(CliError::Config(
                "grid_1d systems support only the ff method".into(),
            ))
        }
        (_, method) => {
            let p = Arc::new(protocol(cfg)?);
            match method {
                MethodConfig::Trotter {
                    slices,
                    ordering,
                    sampling,
                } => run_trotter(cfg, &p, slices, *ordering, *sampling)?,
                MethodConfig::Ff { rate, rescaling } => run_ff(cfg, &p, *rate, *rescaling)?,
                MethodConfig::Qsl { order } => run_qsl(cfg, &p, *order)?,
                MethodConfig::Invariant {} => run_invariant(cfg, &p)?,
                other => run_cd(cfg, &p, other)?,
            }
        }
    };
    let summary_finite = outcome.final_fidelity.is_finite()
        && outcome
            .slopes
            .values()
            .chain(outcome.residuals.values())
            .all(|v| v.is_finite());
    let table_finite = outcome.table.rows().iter().flatten().all(|v| v.is_finite());
    if !(summary_finite && table_finite) {
        return Err(CliError::Numerical {
            module: "shortcut_forge_cli::scenario",
            source: shortcut_forge::Error::NonFinite("run results"),
        });
    }
    let summary = Summary {
        tool: TOOL_NAME.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.config_hash(),
        scenario_hash: cfg.scenario_hash(),
        system: cfg.system.name().into(),
        method: cfg.method.name().into(),
        final_fidelity: outcome.final_fidelity,
        slopes: outcome.slopes,
        residuals: outcome.residuals,
        columns: outcome.table.columns().to_vec(),
        default_tolerance: cfg.compare.default_tolerance,
        tolerances: cfg.compare.tolerances.clone(),
    };
    Ok(Artifacts {
        summary,
        timeseries: outcome.table,
        extra: outcome.extra,
    })
}

fn ramp(kind: RampKind) -> Ramp {
    match kind {
        RampKind::Linear => Ramp::Linear,
        RampKind::Smooth => Ramp::Smooth,
    }
}

fn protocol(cfg: &ScenarioConfig) -> Result<Proto, CliError> {
    let (family, start, end): (Family, Vec<f64>, Vec<f64>) = match &cfg.system {
        SystemConfig::LandauZener {
            delta,
            lambda_start,
            lambda_end,
        } => (
            Arc::new(LandauZener::new(*delta)),
            vec![*lambda_start],
            vec![*lambda_end],
        ),
        SystemConfig::TfimChain {
            n_sites,
            coupling,
            g_start,
            g_end,
            h_start,
            h_end,
        } => (
            Arc::new(TfimChain::new(*n_sites, *coupling).map_err(setup)?),
            vec![*g_start, *h_start],
            vec![*g_end, *h_end],
        ),
        SystemConfig::RandomHermitian {
            dim,
            seed,
            lambda_start,
            lambda_end,
        } => (
            Arc::new(RandomHermitianPath::new(*dim, *seed).map_err(setup)?),
            vec![*lambda_start],
            vec![*lambda_end],
        ),
        SystemConfig::Grid1d { .. } => {
            return Err(CliError::Config("grid_1d has no matrix protocol".into()))
        }
    };
    let schedule = ParamSchedule::new(cfg.duration, start, end, ramp(cfg.ramp)).map_err(setup)?;
    Protocol::new(family, schedule).map_err(setup)
}

fn eigenvector(p: &Proto, t: f64, level: usize) -> Result<CVector, CliError> {
    Ok(p.at(t)
        .map_err(numerical("shortcut_forge::spectral"))?
        .eigh()
        .vector(level))
}

fn initial_state(cfg: &ScenarioConfig, p: &Proto) -> Result<Ket, CliError> {
    Ket::new(eigenvector(p, 0.0, cfg.level)?).map_err(numerical("shortcut_forge::operator"))
}

fn lambda_columns(p: &Proto) -> Vec<String> {
    (0..p.schedule.n_params())
        .map(|i| format!("lambda_{i}"))
        .collect()
}

fn population_columns(dim: usize) -> Vec<String> {
    if dim <= MAX_POPULATION_DIM {
        (0..dim).map(|n| format!("population_{n}")).collect()
    } else {
        Vec::new()
    }
}

/// Fidelity with the tracked instantaneous eigenstate of `H(s)` and, for
/// small systems, the populations of all levels.
fn level_populations(
    p: &Proto,
    s: f64,
    psi: &CVector,
    level: usize,
) -> Result<(f64, Vec<f64>), CliError> {
    let spec = p
        .at(s)
        .map_err(numerical("shortcut_forge::spectral"))?
        .eigh();
    let pops: Vec<f64> = (0..spec.dim())
        .map(|n| spec.vectors.column(n).dotc(psi).norm_sqr())
        .collect();
    let fid = pops[level];
    if spec.dim() <= MAX_POPULATION_DIM {
        Ok((fid, pops))
    } else {
        Ok((fid, Vec::new()))
    }
}

fn cd_element_columns(dim: usize) -> Vec<String> {
    let mut out = Vec::new();
    if dim <= MAX_CD_ELEMENT_DIM {
        for i in 0..dim {
            for j in i..dim {
                out.push(format!("cd_re_{i}_{j}"));
                if i != j {
                    out.push(format!("cd_im_{i}_{j}"));
                }
            }
        }
    }
    out
}

fn cd_elements(cd: &CMatrix) -> Vec<f64> {
    let d = cd.nrows();
    let mut out = Vec::new();
    if d <= MAX_CD_ELEMENT_DIM {
        for i in 0..d {
            for j in i..d {
                out.push(cd[(i, j)].re);
                if i != j {
                    out.push(cd[(i, j)].im);
                }
            }
        }
    }
    out
}

fn cd_function(cfg: &ScenarioConfig, method: &MethodConfig) -> Arc<CdFn> {
    let hbar = cfg.hbar;
    let level = cfg.level;
    match method.clone() {
        MethodConfig::ExactCd { tracked_only: true } => {
            Arc::new(move |h, dh, _| mode_cd(h, dh, level, hbar))
        }
        MethodConfig::Variational { order } => Arc::new(move |h, dh, _| match order {
            Some(k) if k <= DOUBLE_PRECISION_MAX_ORDER => {
                cd_from_system(&variational_system(h, dh, k, hbar)?, h.dim())
            }
            _ => Ok(variational_cd_precise(h, dh, order, hbar)?.cd),
        }),
        MethodConfig::Algebraic {} => Arc::new(move |h, dh, _| {
            let basis = odd_commutator_closure(h, dh)?;
            if basis.is_empty() {
                return HermitianOperator::zeros(h.dim());
            }
            cd_from_system(&algebraic_system(h, dh, &basis, hbar)?, h.dim())
        }),
        MethodConfig::Krylov { k_max } => Arc::new(move |h, dh, _| {
            let d = h.dim();
            let chain = krylov_chain(h, dh, k_max.unwrap_or(d * d - d + 1), None)?;
            cd_from_system(&krylov_system(&chain, hbar), d)
        }),
        _ => Arc::new(move |h, dh, t| exact_cd_with(h, dh, hbar, DEFAULT_EPS_GAP_REL, t)),
    }
}

fn cd_hamiltonian(p: &Arc<Proto>, f: Arc<CdFn>) -> FnHamiltonian {
    let p = Arc::clone(p);
    FnHamiltonian::new(p.dim(), move |t| {
        let h = p.at(t)?;
        let dh = p.rate(t)?;
        Ok(f(&h, &dh, t)?.into_matrix())
    })
}

fn exact_cd_hamiltonian(cfg: &ScenarioConfig, p: &Arc<Proto>) -> FnHamiltonian {
    cd_hamiltonian(
        p,
        cd_function(
            cfg,
            &MethodConfig::ExactCd {
                tracked_only: false,
            },
        ),
    )
}

fn time_grid(cfg: &ScenarioConfig, end: f64) -> Vec<f64> {
    linspace(0.0, end, cfg.time_points)
}

fn run_cd(
    cfg: &ScenarioConfig,
    p: &Arc<Proto>,
    method: &MethodConfig,
) -> Result<Outcome, CliError> {
    let f = cd_function(cfg, method);
    let cd = cd_hamiltonian(p, Arc::clone(&f));
    let total = Sum(Arc::clone(p), &cd);
    let grid = time_grid(cfg, cfg.duration);
    let traj = evolve(
        &total,
        &initial_state(cfg, p)?,
        &grid,
        cfg.steps_per_interval,
        cfg.hbar,
    )
    .map_err(numerical("shortcut_forge::dynamics"))?;
    let dim = p.dim();
    let mut columns = vec!["time".to_string()];
    columns.extend(lambda_columns(p));
    columns.push("fidelity".into());
    columns.extend(population_columns(dim));
    columns.push("cd_norm".into());
    columns.extend(cd_element_columns(dim));
    let mut table = Table::new(columns);
    let mut min_fid = f64::INFINITY;
    for (i, &t) in grid.iter().enumerate() {
        let (fid, pops) = level_populations(p, t, &traj.states[i], cfg.level)?;
        min_fid = min_fid.min(fid);
        let op = cd.at(t).map_err(numerical("shortcut_forge::agp"))?;
        let mut row = vec![t];
        row.extend(p.schedule.lambda(t));
        row.push(fid);
        row.extend(pops);
        row.push(frobenius_norm(op.matrix()));
        row.extend(cd_elements(op.matrix()));
        table.push(row);
    }
    let final_fidelity = *table.column("fidelity").unwrap().last().unwrap();
    let mut out = Outcome::new(table, final_fidelity);
    out.residuals
        .insert("max_norm_drift".into(), traj.max_norm_drift());
    out.residuals.insert("min_fidelity".into(), min_fid);
    Ok(out)
}

fn plan_template(
    cfg: &ScenarioConfig,
    ordering: OrderingConfig,
    sampling: SamplingConfig,
) -> Result<TrotterPlan, CliError> {
    Ok(TrotterPlan::new(1, cfg.duration)
        .map_err(setup)?
        .with_ordering(match ordering {
            OrderingConfig::CdFirst => SliceOrdering::CdFirst,
            OrderingConfig::HFirst => SliceOrdering::HFirst,
        })
        .with_sampling(match sampling {
            SamplingConfig::RightEndpoint => SampleRule::RightEndpoint,
            SamplingConfig::Midpoint => SampleRule::Midpoint,
        }))
}

fn run_trotter(
    cfg: &ScenarioConfig,
    p: &Arc<Proto>,
    slices: &[usize],
    ordering: OrderingConfig,
    sampling: SamplingConfig,
) -> Result<Outcome, CliError> {
    let cd = exact_cd_hamiltonian(cfg, p);
    let template = plan_template(cfg, ordering, sampling)?;
    let psi0 = initial_state(cfg, p)?;
    let target = eigenvector(p, cfg.duration, cfg.level)?;
    let report = digitization_error(&**p, &cd, &template, slices, &psi0, &target, cfg.hbar)
        .map_err(numerical("shortcut_forge::digitized"))?;

    let m_max = *slices.last().expect("validated sweep");
    let plan = TrotterPlan::new(m_max, cfg.duration)
        .map_err(setup)?
        .with_ordering(template.ordering)
        .with_sampling(template.sampling);
    let steps = slice_unitaries(&**p, &cd, &plan, cfg.hbar)
        .map_err(numerical("shortcut_forge::digitized"))?;
    let traj = step_trajectory(&steps, &psi0, &plan, cfg.hbar)
        .map_err(numerical("shortcut_forge::digitized"))?;
    let mut columns = vec!["time".to_string()];
    columns.extend(lambda_columns(p));
    columns.push("fidelity".into());
    columns.extend(population_columns(p.dim()));
    let mut table = Table::new(columns);
    for (t, psi) in traj.grid.iter().zip(&traj.states) {
        let (fid, pops) = level_populations(p, *t, psi, cfg.level)?;
        let mut row = vec![*t];
        row.extend(p.schedule.lambda(*t));
        row.push(fid);
        row.extend(pops);
        table.push(row);
    }

    let mut scaling = Table::new(vec![
        "slices".into(),
        "infidelity".into(),
        "included".into(),
    ]);
    for pt in &report.points {
        scaling.push(vec![
            pt.slices as f64,
            pt.error,
            f64::from(u8::from(pt.included)),
        ]);
    }
    let final_fidelity = 1.0 - report.points.last().expect("validated sweep").error;
    let mut out = Outcome::new(table, final_fidelity);
    match &report.fit {
        Some(fit) => {
            out.slopes.insert("infidelity_vs_slices".into(), fit.slope);
            if fit.slope_stderr.is_finite() {
                out.slopes
                    .insert("infidelity_vs_slices_band_low".into(), fit.slope_band.0);
                out.slopes
                    .insert("infidelity_vs_slices_band_high".into(), fit.slope_band.1);
            }
            out.residuals
                .insert("fit_points".into(), fit.n_points as f64);
        }
        None => {
            out.residuals.insert("fit_points".into(), 0.0);
        }
    }
    out.residuals
        .insert("infidelity_floor".into(), report.floor);
    out.residuals
        .insert("max_norm_drift".into(), traj.max_norm_drift());
    out.extra.push(("scaling".into(), scaling));
    Ok(out)
}

fn rescaling(
    cfg: &ScenarioConfig,
    rate: f64,
    kind: RampKind,
) -> Result<(TimeRescaling, f64), CliError> {
    let t_ff = cfg.duration / rate;
    let r = match kind {
        RampKind::Linear => TimeRescaling::uniform(rate),
        RampKind::Smooth => TimeRescaling::smooth(t_ff, cfg.duration),
    }
    .map_err(setup)?;
    Ok((r, t_ff))
}

fn run_ff(
    cfg: &ScenarioConfig,
    p: &Arc<Proto>,
    rate: f64,
    kind: RampKind,
) -> Result<Outcome, CliError> {
    let (rescale, t_ff) = rescaling(cfg, rate, kind)?;
    let ham = FfCd {
        reference: Arc::clone(p),
        rescale: rescale.clone(),
        hbar: cfg.hbar,
    };
    let grid = time_grid(cfg, t_ff);
    let traj = evolve(
        &ham,
        &initial_state(cfg, p)?,
        &grid,
        cfg.steps_per_interval,
        cfg.hbar,
    )
    .map_err(numerical("shortcut_forge::fastforward"))?;
    let mut columns = vec!["time".to_string(), "s".to_string()];
    columns.extend(lambda_columns(p));
    columns.push("fidelity".into());
    columns.extend(population_columns(p.dim()));
    let mut table = Table::new(columns);
    for (i, &t) in grid.iter().enumerate() {
        let s = rescale.s(t).min(cfg.duration);
        let (fid, pops) = level_populations(p, s, &traj.states[i], cfg.level)?;
        let mut row = vec![t, s];
        row.extend(p.schedule.lambda(s));
        row.push(fid);
        row.extend(pops);
        table.push(row);
    }
    let final_fidelity = *table.column("fidelity").unwrap().last().unwrap();
    let mut out = Outcome::new(table, final_fidelity);
    out.residuals
        .insert("max_norm_drift".into(), traj.max_norm_drift());
    Ok(out)
}

fn run_grid(cfg: &ScenarioConfig, rate: f64, kind: RampKind) -> Result<Outcome, CliError> {
    let SystemConfig::Grid1d {
        x_min,
        x_max,
        points,
        mass,
        sigma_start,
        sigma_end,
    } = cfg.system
    else {
        unreachable!("checked by the caller");
    };
    let g = GridSystem::new(x_min, x_max, points, mass, cfg.hbar).map_err(setup)?;
    let model = BreathingGaussian {
        sigma0: sigma_start,
        sigma1: sigma_end,
        duration: cfg.duration,
    };
    let (rescale, t_ff) = rescaling(cfg, rate, kind)?;
    let grid_err = numerical("shortcut_forge::grid");
    let potential = |t: f64| ff_potential(&g, &model, &rescale, t);
    let times = time_grid(cfg, t_ff);
    let mut psi = wavefunction(&g, &model, 0.0).map_err(&grid_err)?;
    let mut table = Table::new(vec![
        "time".into(),
        "s".into(),
        "width".into(),
        "fidelity".into(),
        "density_distance".into(),
        "norm".into(),
    ]);
    let mut max_dist = 0.0f64;
    let mut max_im = 0.0f64;
    let dx = g.dx();
    for (i, &t) in times.iter().enumerate() {
        if i > 0 {
            psi = split_step_evolve(
                &g,
                &psi,
                &potential,
                times[i - 1],
                t,
                cfg.steps_per_interval,
            )
            .map_err(&grid_err)?;
        }
        let s = rescale.s(t).min(cfg.duration);
        let target = wavefunction(&g, &model, s).map_err(&grid_err)?;
        let overlap: C64 = target
            .iter()
            .zip(&psi)
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            * dx;
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx;
        let dist = g.density_l2_distance(&psi, &target);
        let im = potentials_from_wavefunction(&g, &model, s)
            .map_err(&grid_err)?
            .max_im_v();
        max_dist = max_dist.max(dist);
        max_im = max_im.max(im);
        table.push(vec![t, s, model.width(s).0, overlap.norm_sqr(), dist, norm]);
    }
    let final_fidelity = *table.column("fidelity").unwrap().last().unwrap();
    let mut out = Outcome::new(table, final_fidelity);
    out.residuals
        .insert("max_density_distance".into(), max_dist);
    out.residuals
        .insert("max_imaginary_potential".into(), max_im);
    Ok(out)
}

fn adiabatic_reference(
    cfg: &ScenarioConfig,
    p: &Proto,
    grid: &[f64],
) -> Result<StateTrajectory, CliError> {
    let opts = EigenPathOptions {
        levels: Some(cfg.level + 1),
        ..EigenPathOptions::default()
    };
    let path = eigenpath(p, grid, &opts).map_err(numerical("shortcut_forge::spectral"))?;
    let mut c0 = vec![C64::from(0.0); cfg.level + 1];
    c0[cfg.level] = C64::from(1.0);
    Ok(adiabatic_state(&path, &c0, cfg.hbar)
        .map_err(numerical("shortcut_forge::spectral"))?
        .trajectory)
}

fn run_qsl(cfg: &ScenarioConfig, p: &Arc<Proto>, order: usize) -> Result<Outcome, CliError> {
    let ideal = Sum(
        Arc::clone(p),
        ModeCounterdiabaticTerm::new(Arc::clone(p), cfg.level, cfg.hbar),
    );
    let approx = Sum(
        Arc::clone(p),
        VariationalCdTerm::new(Arc::clone(p), order, cfg.hbar),
    );
    let grid = time_grid(cfg, cfg.duration);
    let reference = adiabatic_reference(cfg, p, &grid)?;
    let driven = evolve(
        &approx,
        &initial_state(cfg, p)?,
        &grid,
        cfg.steps_per_interval,
        cfg.hbar,
    )
    .map_err(numerical("shortcut_forge::dynamics"))?;
    let report = qsl_continuous(&ideal, &approx, &reference, Some(&driven))
        .map_err(numerical("shortcut_forge::qsl"))?;
    let observed = report
        .observed
        .clone()
        .expect("comparison trajectory given");
    let mut columns = vec!["time".to_string()];
    columns.extend(lambda_columns(p));
    columns.extend(["integrand", "angle", "bound", "observed", "fidelity"].map(String::from));
    let mut table = Table::new(columns);
    for (i, &t) in grid.iter().enumerate() {
        let mut row = vec![t];
        row.extend(p.schedule.lambda(t));
        row.extend([
            report.integrand[i],
            report.angle[i],
            report.bound[i],
            observed[i],
            observed[i] * observed[i],
        ]);
        table.push(row);
    }
    let final_fidelity = observed.last().map_or(0.0, |o| o * o);
    let mut out = Outcome::new(table, final_fidelity);
    out.residuals.insert(
        "min_bound_margin".into(),
        report.min_margin().unwrap_or(0.0),
    );
    out.residuals
        .insert("final_angle".into(), report.final_angle());
    out.residuals
        .insert("vacuous".into(), f64::from(u8::from(report.vacuous)));
    out.residuals
        .insert("max_norm_drift".into(), driven.max_norm_drift());
    Ok(out)
}

fn run_invariant(cfg: &ScenarioConfig, p: &Arc<Proto>) -> Result<Outcome, CliError> {
    let grid = time_grid(cfg, cfg.duration);
    let path = eigenpath(&**p, &grid, &EigenPathOptions::default())
        .map_err(numerical("shortcut_forge::spectral"))?;
    let inv = DynamicalInvariant::from_eigenpath(&path, None)
        .map_err(numerical("shortcut_forge::invariant"))?;
    let cd = exact_cd_hamiltonian(cfg, p);
    let total = Sum(Arc::clone(p), &cd);
    let residual = inv
        .residual(&total, cfg.hbar)
        .map_err(numerical("shortcut_forge::invariant"))?;
    let tolerance = inv
        .default_tolerance(&total, cfg.hbar)
        .map_err(numerical("shortcut_forge::invariant"))?;
    let traj = evolve(
        &total,
        &initial_state(cfg, p)?,
        &grid,
        cfg.steps_per_interval,
        cfg.hbar,
    )
    .map_err(numerical("shortcut_forge::dynamics"))?;
    let mut columns = vec!["time".to_string()];
    columns.extend(lambda_columns(p));
    columns.extend(["invariant_residual", "fidelity"].map(String::from));
    let mut table = Table::new(columns);
    for (i, &t) in grid.iter().enumerate() {
        let (fid, _) = level_populations(p, t, &traj.states[i], cfg.level)?;
        let mut row = vec![t];
        row.extend(p.schedule.lambda(t));
        row.extend([residual[i], fid]);
        table.push(row);
    }
    let final_fidelity = *table.column("fidelity").unwrap().last().unwrap();
    let mut out = Outcome::new(table, final_fidelity);
    out.residuals.insert(
        "max_invariant_residual".into(),
        residual.iter().copied().fold(0.0, f64::max),
    );
    out.residuals
        .insert("invariant_residual_tolerance".into(), tolerance);
    out.residuals
        .insert("eigenvalue_drift".into(), inv.eigenvalue_drift());
    out.residuals
        .insert("max_norm_drift".into(), traj.max_norm_drift());
    Ok(out)
}
