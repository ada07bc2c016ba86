//! Acceptance suite: one PASS/FAIL line per criterion, written straight to
//! stderr so that it shows up in ordinary `cargo test` output.

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shortcut_forge::agp::{
    algebraic_system, cd_from_system, krylov_chain, krylov_system, odd_commutator_closure,
    variational_cd_precise, VariationalCdTerm,
};
use shortcut_forge::digitized::{
    digitization_error, exact_slice_unitaries, propagator_error, slice_unitaries, step_trajectory,
    TrotterPlan,
};
use shortcut_forge::dynamics::{evolution_operator, evolve, fidelity, StateTrajectory};
use shortcut_forge::fastforward::{EigenGauge, FfCd, FfNonadiabatic, TimeRescaling};
use shortcut_forge::grid::{
    ff_potential, potentials_from_wavefunction, split_step_evolve, wavefunction, BreathingGaussian,
    GridSystem,
};
use shortcut_forge::invariant::{
    invariant_residual, inverse_engineer_schedule, AlgebraSpec, DynamicalInvariant,
    EngineeredHamiltonian, InvariantTarget,
};
use shortcut_forge::models::{random_hermitian, BlochField, LandauZener, TfimChain};
use shortcut_forge::operator::{frobenius_norm, propagator};
use shortcut_forge::qsl::{qsl_continuous, qsl_discrete, BoundReport};
use shortcut_forge::schedule::{linspace, FnHamiltonian, Sum};
use shortcut_forge::spectral::{
    adiabatic_state, eigenpath, exact_cd, quantum_geometric_tensor, spectrum, CounterdiabaticTerm,
    EigenPathOptions, ModeCounterdiabaticTerm,
};
use shortcut_forge::{
    CMatrix, Hamiltonian, HermitianOperator, Ket, ParamSchedule, ParametricFamily, Protocol, C64,
};
use shortcut_forge_cli::config::parse_config;
use shortcut_forge_cli::scenario::execute;

const SWEEP: [usize; 6] = [8, 16, 32, 64, 128, 256];
const QSL_TOL: f64 = 1e-8;

/// Result of one criterion: whether it held and a short account of the
/// measured values.
struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn report(
    id: usize,
    name: &str,
    budget: Option<Duration>,
    check: impl FnOnce() -> Verdict,
) -> bool {
    let start = Instant::now();
    let v = check();
    let elapsed = start.elapsed();
    let in_time = budget.is_none_or(|b| elapsed <= b);
    let pass = v.pass && in_time;
    let budget = budget.map_or(String::new(), |b| format!(" (budget {}s)", b.as_secs()));
    let line = format!(
        "{} [{id}] {name}: {}; {:.2}s{budget}\n",
        if pass { "PASS" } else { "FAIL" },
        v.detail,
        elapsed.as_secs_f64(),
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    pass
}

fn lz(duration: f64, smooth: bool) -> Protocol<LandauZener> {
    let schedule = if smooth {
        ParamSchedule::smooth(duration, vec![-5.0], vec![5.0])
    } else {
        ParamSchedule::linear(duration, vec![-5.0], vec![5.0])
    }
    .unwrap();
    Protocol::new(LandauZener::new(1.0), schedule).unwrap()
}

fn ground_ket(ham: &dyn Hamiltonian, t: f64) -> Ket {
    Ket::new(ham.at(t).unwrap().eigh().vector(0)).unwrap()
}

fn adiabatic(ham: &dyn Hamiltonian, grid: &[f64]) -> StateTrajectory {
    let opts = EigenPathOptions {
        levels: Some(1),
        ..EigenPathOptions::default()
    };
    let path = eigenpath(ham, grid, &opts).unwrap();
    adiabatic_state(&path, &[C64::from(1.0)], 1.0)
        .unwrap()
        .trajectory
}

fn random_pair(dim: usize, seed: u64) -> (HermitianOperator, CMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = HermitianOperator::new(random_hermitian(dim, &mut rng)).unwrap();
    (h, random_hermitian(dim, &mut rng))
}

fn suite() -> impl Iterator<Item = (usize, u64)> {
    (0..20u64).map(|i| ([2, 3, 4, 8][i as usize % 4], 1000 + i))
}

fn dist(a: &CMatrix, b: &CMatrix) -> f64 {
    frobenius_norm(&(a - b))
}

fn exact_cd_tracks_adiabatic_state() -> Verdict {
    let mut worst = 0.0f64;
    for duration in [0.1, 1.0, 10.0] {
        let p = lz(duration, false);
        let driven = Sum(&p, CounterdiabaticTerm::new(&p, 1.0));
        let grid = linspace(0.0, duration, 401);
        let reference = adiabatic(&p, &grid);
        let traj = evolve(&driven, &ground_ket(&p, 0.0), &grid, 20, 1.0).unwrap();
        for (a, b) in reference.states.iter().zip(&traj.states) {
            worst = worst.max(1.0 - fidelity(a, b).unwrap());
        }
    }
    Verdict::new(
        worst <= 1e-6,
        format!("max infidelity {worst:.3e} (limit 1e-6)"),
    )
}

fn solvers_agree() -> Verdict {
    let mut pairwise = 0.0f64;
    let mut to_exact = 0.0f64;
    for (dim, seed) in suite() {
        let (h, dh) = random_pair(dim, seed);
        let exact = exact_cd(&h, &dh, 1.0).unwrap().into_matrix();
        let variational = variational_cd_precise(&h, &dh, None, 1.0)
            .unwrap()
            .cd
            .into_matrix();
        let basis = odd_commutator_closure(&h, &dh).unwrap();
        let algebraic = cd_from_system(&algebraic_system(&h, &dh, &basis, 1.0).unwrap(), dim)
            .unwrap()
            .into_matrix();
        let chain = krylov_chain(&h, &dh, usize::MAX, None).unwrap();
        let krylov = cd_from_system(&krylov_system(&chain, 1.0), dim)
            .unwrap()
            .into_matrix();
        let mut off_diagonal = exact.clone();
        let v = h.eigh().vectors;
        let mut in_eigenbasis = v.adjoint() * &off_diagonal * &v;
        in_eigenbasis.fill_diagonal(C64::from(0.0));
        off_diagonal = &v * in_eigenbasis * v.adjoint();
        let ops = [&variational, &algebraic, &krylov];
        for (i, a) in ops.iter().enumerate() {
            to_exact = to_exact.max(dist(a, &off_diagonal));
            for b in &ops[i + 1..] {
                pairwise = pairwise.max(dist(a, b));
            }
        }
    }
    Verdict::new(
        pairwise < 1e-7 && to_exact < 1e-7,
        format!("max pairwise {pairwise:.3e}, max to exact {to_exact:.3e} (limit 1e-7)"),
    )
}

fn krylov_structure() -> Verdict {
    let mut off_band = 0.0f64;
    let mut termination = 0.0f64;
    let mut all_terminated = true;
    for (dim, seed) in suite() {
        let (h, dh) = random_pair(dim, seed);
        let chain = krylov_chain(&h, &dh, usize::MAX, None).unwrap();
        let sys = krylov_system(&chain, 1.0);
        off_band = off_band.max(sys.max_off_band() / sys.b_norm());
        termination = termination.max(chain.b_next / chain.b[0]);
        all_terminated &= chain.terminated && chain.dimension() <= dim * dim - dim + 1;
    }
    let lz_family = LandauZener::new(1.0);
    let mut lz_err = 0.0f64;
    for lam in [-5.0, -1.3, -0.2, 0.4, 2.0, 5.0] {
        let h = lz_family.hamiltonian(&[lam]).unwrap();
        let dh = lz_family.derivative(&[lam], 0).unwrap();
        let chain = krylov_chain(&h, &dh, 16, None).unwrap();
        lz_err = lz_err
            .max((chain.coefficient(1) - 2.0).abs())
            .max((chain.coefficient(2) - 2.0 * f64::abs(lam)).abs());
    }
    Verdict::new(
        off_band < 1e-10 && termination < 1e-10 && all_terminated && lz_err < 1e-10,
        format!(
            "off-band {off_band:.3e}, b_K/b_0 {termination:.3e}, all terminated within D^2-D+1: {all_terminated}, LZ b-value error {lz_err:.3e}"
        ),
    )
}

fn invariant_is_conserved() -> Verdict {
    let mut drift = 0.0f64;
    let mut ratio = 0.0f64;
    for smooth in [false, true] {
        let p = lz(10.0, smooth);
        let driven = Sum(&p, CounterdiabaticTerm::new(&p, 1.0));
        let grid = linspace(0.0, 10.0, 20001);
        let path = eigenpath(&p, &grid, &EigenPathOptions::default()).unwrap();
        let inv = DynamicalInvariant::from_eigenpath(&path, None).unwrap();
        drift = drift.max(inv.eigenvalue_drift());
        let tol = inv.default_tolerance(&driven, 1.0).unwrap();
        let worst = inv
            .residual(&driven, 1.0)
            .unwrap()
            .into_iter()
            .fold(0.0, f64::max);
        ratio = ratio.max(worst / tol);
    }
    Verdict::new(
        drift < 1e-8 && ratio < 1.0,
        format!("eigenvalue drift {drift:.3e} (limit 1e-8), residual / (1e-6 scale) {ratio:.3e}"),
    )
}

fn ising_margins(n_sites: usize, points: usize) -> f64 {
    let chain = TfimChain::new(n_sites, 1.0).unwrap();
    let schedule = ParamSchedule::linear(1.0, vec![0.1, 0.2], vec![2.0, 0.2]).unwrap();
    let p = Protocol::new(chain, schedule).unwrap();
    let h1 = Sum(&p, ModeCounterdiabaticTerm::new(&p, 0, 1.0));
    let h2 = Sum(&p, VariationalCdTerm::new(&p, 1, 1.0));
    let grid = linspace(0.0, 1.0, points);
    let ideal = adiabatic(&p, &grid);
    let approx = evolve(&h2, &ground_ket(&p, 0.0), &grid, 4, 1.0).unwrap();
    let a = qsl_continuous(&h1, &h2, &ideal, Some(&approx)).unwrap();
    let b = qsl_continuous(&h1, &h2, &approx, Some(&ideal)).unwrap();
    margin(&a).min(margin(&b))
}

fn margin(r: &BoundReport) -> f64 {
    r.min_margin().unwrap()
}

fn qsl_holds() -> Verdict {
    let mut worst = f64::INFINITY;

    let p = lz(4.0, false);
    let driven = Sum(&p, CounterdiabaticTerm::new(&p, 1.0));
    let grid = linspace(0.0, 4.0, 2001);
    let ideal = adiabatic(&p, &grid);
    let bare = evolve(&p, &ground_ket(&p, 0.0), &grid, 8, 1.0).unwrap();
    worst = worst.min(margin(
        &qsl_continuous(&driven, &p, &ideal, Some(&bare)).unwrap(),
    ));
    worst = worst.min(margin(
        &qsl_continuous(&driven, &p, &bare, Some(&ideal)).unwrap(),
    ));

    worst = worst.min(ising_margins(4, 401)).min(ising_margins(6, 101));

    let p = lz(10.0, false);
    let cd = CounterdiabaticTerm::new(&p, 1.0);
    for m in SWEEP {
        let plan = TrotterPlan::new(m, 10.0).unwrap();
        let exact = exact_slice_unitaries(&Sum(&p, &cd), &plan, 8, 1.0).unwrap();
        let trotter = slice_unitaries(&p, &cd, &plan, 1.0).unwrap();
        let psi0 = ground_ket(&p, 0.0);
        let a = step_trajectory(&exact, &psi0, &plan, 1.0).unwrap();
        let b = step_trajectory(&trotter, &psi0, &plan, 1.0).unwrap();
        worst = worst.min(margin(
            &qsl_discrete(&exact, &trotter, &a, Some(&b), &plan).unwrap(),
        ));
        worst = worst.min(margin(
            &qsl_discrete(&trotter, &exact, &b, Some(&a), &plan).unwrap(),
        ));
    }

    for seed in 0..8 {
        let (a, b) = random_pair(3, 500 + seed);
        let h1 = FnHamiltonian::constant(a.clone());
        let h2 = FnHamiltonian::constant(HermitianOperator::new(b.clone()).unwrap());
        let grid = linspace(0.0, 1.0, 2001);
        let psi0 = Ket::basis(3, 0).unwrap();
        let exact = |m: &CMatrix| StateTrajectory {
            grid: grid.clone(),
            states: grid
                .iter()
                .map(|&t| propagator(m, t, 1.0) * psi0.vector())
                .collect(),
            method: "exact".into(),
            steps_per_interval: 1,
            hbar: 1.0,
        };
        let (x, y) = (exact(a.matrix()), exact(&b));
        worst = worst.min(margin(&qsl_continuous(&h1, &h2, &x, Some(&y)).unwrap()));
    }

    let mut qgt = 0.0f64;
    let p = lz(3.0, true);
    let driven = Sum(&p, CounterdiabaticTerm::new(&p, 1.0));
    let grid = linspace(0.0, 3.0, 301);
    let r = qsl_continuous(&driven, &p, &adiabatic(&p, &grid), None).unwrap();
    for (i, &t) in grid.iter().enumerate() {
        let g = quantum_geometric_tensor(&p.family, &p.schedule.lambda(t), 0).unwrap();
        let v = p.schedule.dlambda(t)[0];
        qgt = qgt.max((r.integrand[i] - (g[(0, 0)] * v * v).sqrt()).abs());
    }
    let schedule = ParamSchedule::smooth(2.0, vec![0.2, 0.0], vec![2.5, 1.7]).unwrap();
    let p = Protocol::new(BlochField { magnitude: 1.3 }, schedule).unwrap();
    let driven = Sum(&p, CounterdiabaticTerm::new(&p, 1.0));
    let grid = linspace(0.0, 2.0, 101);
    let r = qsl_continuous(&driven, &p, &adiabatic(&p, &grid), None).unwrap();
    for (i, &t) in grid.iter().enumerate() {
        let g = quantum_geometric_tensor(&p.family, &p.schedule.lambda(t), 0).unwrap();
        let v = p.schedule.dlambda(t);
        let q: f64 = (0..2)
            .flat_map(|a| (0..2).map(move |b| (a, b)))
            .map(|(a, b)| g[(a, b)] * v[a] * v[b])
            .sum();
        qgt = qgt.max((r.integrand[i] - q.max(0.0).sqrt()).abs());
    }

    let angle = |p: Protocol<LandauZener>| {
        let driven = Sum(&p, CounterdiabaticTerm::new(&p, 1.0));
        let grid = linspace(0.0, p.duration(), 20001);
        qsl_continuous(&driven, &p, &adiabatic(&p, &grid), None)
            .unwrap()
            .final_angle()
    };
    let invariance = (angle(lz(2.0, false)) - angle(lz(7.0, true))).abs();

    Verdict::new(
        worst >= -QSL_TOL && qgt < QSL_TOL && invariance < QSL_TOL,
        format!(
            "min margin {worst:.3e} (limit -1e-8), QGT deviation {qgt:.3e}, schedule dependence {invariance:.3e} (limits 1e-8)"
        ),
    )
}

fn digitization_scaling() -> Verdict {
    let p = lz(10.0, false);
    let cd = CounterdiabaticTerm::new(&p, 1.0);
    let psi0 = ground_ket(&p, 0.0);
    let target = p.at(10.0).unwrap().eigh().vector(0);
    let plan = TrotterPlan::new(1, 10.0).unwrap();
    let lz_fit = digitization_error(&p, &cd, &plan, &SWEEP, &psi0, &target, 1.0)
        .unwrap()
        .fit
        .map_or(f64::NAN, |f| f.slope);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = random_hermitian(4, &mut rng);
    let b = random_hermitian(4, &mut rng);
    let exact = propagator(&(&a + &b), 1.0, 1.0);
    let h = FnHamiltonian::constant(HermitianOperator::new(a).unwrap());
    let c = FnHamiltonian::constant(HermitianOperator::new(b).unwrap());
    let plan = TrotterPlan::new(1, 1.0).unwrap();
    let baseline = propagator_error(&h, &c, &plan, &SWEEP, &exact, 1.0)
        .unwrap()
        .fit
        .map_or(f64::NAN, |f| f.slope);
    Verdict::new(
        (-2.3..=-1.7).contains(&lz_fit) && (-1.3..=-0.7).contains(&baseline),
        format!(
            "LZ slope {lz_fit:.4} in [-2.3, -1.7], baseline slope {baseline:.4} in [-1.3, -0.7]"
        ),
    )
}

fn fast_forward_invariance() -> Verdict {
    let mut pop_err = 0.0f64;
    let reference = lz(10.0, false);
    for rate in [2.0, 4.0] {
        let t_ff = 10.0 / rate;
        let rescale = TimeRescaling::uniform(rate).unwrap();
        let ff = FfCd {
            reference: &reference,
            rescale: rescale.clone(),
            hbar: 1.0,
        };
        let t_grid = linspace(0.0, t_ff, 401);
        let s_grid: Vec<f64> = t_grid.iter().map(|&t| rescale.s(t)).collect();
        let target = adiabatic(&reference, &s_grid);
        let traj = evolve(&ff, &ground_ket(&reference, 0.0), &t_grid, 20, 1.0).unwrap();
        for (i, &s) in s_grid.iter().enumerate() {
            let v = spectrum(reference.at(s).unwrap().matrix()).vectors;
            for n in 0..2 {
                let a = v.column(n).dotc(&target.states[i]).norm_sqr();
                let b = v.column(n).dotc(&traj.states[i]).norm_sqr();
                pop_err = pop_err.max((a - b).abs());
            }
        }
    }

    let g = GridSystem::new(-20.0, 20.0, 2048, 1.0, 1.0).unwrap();
    let model = BreathingGaussian {
        sigma0: 1.0,
        sigma1: 2.0,
        duration: 5.0,
    };
    let psi0 = wavefunction(&g, &model, 0.0).unwrap();
    let reference_potential = |s: f64| potentials_from_wavefunction(&g, &model, s).map(|p| p.re_v);
    let slow = split_step_evolve(&g, &psi0, &reference_potential, 0.0, 5.0, 5000).unwrap();
    let mut density = 0.0f64;
    for rate in [2.0, 4.0] {
        let rescale = TimeRescaling::uniform(rate).unwrap();
        let potential = |t: f64| ff_potential(&g, &model, &rescale, t);
        let fast = split_step_evolve(&g, &psi0, &potential, 0.0, 5.0 / rate, 2000).unwrap();
        density = density.max(g.density_l2_distance(&fast, &slow));
    }

    let (t_ref, t_ff) = (100.0, 2.0);
    let slow_ref = lz(1.0, true);
    let slow_ref = Protocol::new(
        slow_ref.family,
        ParamSchedule::smooth(t_ref, vec![-5.0], vec![5.0]).unwrap(),
    )
    .unwrap();
    let rescale = TimeRescaling::smooth(t_ff, t_ref).unwrap();
    let run = |include_nad: bool| {
        let gauge = EigenGauge::new(&slow_ref, rescale.clone(), t_ff, 2000, 1.0).unwrap();
        let ff = FfNonadiabatic { gauge, include_nad };
        let traj = evolve(&ff, &ground_ket(&slow_ref, 0.0), &[0.0, t_ff], 40000, 1.0).unwrap();
        let target = slow_ref.at(t_ref).unwrap().eigh().vector(0);
        fidelity(&target, traj.last()).unwrap()
    };
    let drop = (run(true) - run(false)).abs();

    Verdict::new(
        pop_err < 1e-6 && density < 1e-4 && drop < 1e-4,
        format!(
            "population error {pop_err:.3e} (limit 1e-6), grid density distance {density:.3e}, drop-test change {drop:.3e} (limits 1e-4)"
        ),
    )
}

fn inverse_engineering() -> Verdict {
    let duration = 2.0;
    let theta = move |t: f64| {
        let s = t / duration;
        (
            0.5 * PI * s * s * (3.0 - 2.0 * s),
            0.5 * PI * 6.0 * s * (1.0 - s) / duration,
        )
    };
    let target = InvariantTarget::new(move |t| {
        let (th, dth) = theta(t);
        (
            vec![th.sin(), 0.0, th.cos()],
            vec![th.cos() * dth, 0.0, -th.sin() * dth],
        )
    });
    let algebra = AlgebraSpec::su2().unwrap();
    let grid = linspace(0.0, duration, 2001);
    let sol = inverse_engineer_schedule(&algebra, &target, &grid, 1.0, None).unwrap();
    let ham = EngineeredHamiltonian::new(algebra.clone(), target, 1.0);
    let f: Vec<CMatrix> = sol
        .invariant
        .iter()
        .map(|c| algebra.invariant(c).unwrap().into_matrix())
        .collect();
    let residual = invariant_residual(&ham, &f, &grid, 1.0)
        .unwrap()
        .into_iter()
        .fold(0.0, f64::max);
    let u = evolution_operator(&ham, 0.0, duration, 4000, 1.0).unwrap();
    let transported = dist(&(&u * &f[0] * u.adjoint()), &f[2000]);
    let (start, end) = sol.endpoint_commutators(&algebra).unwrap();
    Verdict::new(
        residual < 1e-6 && transported < 1e-6 && start < 1e-8 && end < 1e-8,
        format!(
            "invariant residual {residual:.3e}, transport error {transported:.3e} (limits 1e-6), endpoint commutators {start:.3e}, {end:.3e} (limit 1e-8)"
        ),
    )
}

const REPRO_CONFIGS: [&str; 3] = [
    r#"{"hbar": 1.0, "duration": 2.0, "time_points": 41,
        "system": {"type": "random_hermitian", "dim": 3, "seed": 42},
        "method": {"type": "variational"}}"#,
    r#"{"hbar": 1.0, "duration": 10.0,
        "system": {"type": "landau_zener", "delta": 1.0, "lambda_start": -5.0, "lambda_end": 5.0},
        "method": {"type": "trotter", "slices": [8, 16, 32, 64]}}"#,
    r#"{"hbar": 1.0, "duration": 1.0, "time_points": 21,
        "system": {"type": "tfim_chain", "n_sites": 3, "coupling": 1.0,
                   "g_start": 0.2, "g_end": 1.5, "h_start": 0.1, "h_end": 0.1},
        "method": {"type": "qsl", "order": 1}}"#,
];

fn reproducible_runs() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let mut identical = 0;
    let mut files = 0;
    for (i, text) in REPRO_CONFIGS.iter().enumerate() {
        let cfg = parse_config(text).unwrap();
        let dirs = [
            tmp.path().join(format!("{i}a")),
            tmp.path().join(format!("{i}b")),
        ];
        for d in &dirs {
            execute(&cfg).unwrap().write(d).unwrap();
        }
        for entry in std::fs::read_dir(&dirs[0]).unwrap() {
            let name = entry.unwrap().file_name();
            files += 1;
            let a = std::fs::read(dirs[0].join(&name)).unwrap();
            let b = std::fs::read(dirs[1].join(&name)).unwrap();
            if a == b {
                identical += 1;
            }
        }
    }
    Verdict::new(
        files > 0 && identical == files,
        format!("{identical} of {files} artifact files byte-identical across repeated runs"),
    )
}

#[test]
fn acceptance() {
    let secs = |s| Some(Duration::from_secs(s));
    let results = [
        report(
            1,
            "exact CD suppression",
            secs(5),
            exact_cd_tracks_adiabatic_state,
        ),
        report(2, "CD solver equivalence", secs(60), solvers_agree),
        report(3, "Krylov structure", None, krylov_structure),
        report(4, "dynamical invariant", None, invariant_is_conserved),
        report(5, "speed-limit inequality", None, qsl_holds),
        report(6, "digitization scaling", secs(30), digitization_scaling),
        report(7, "fast-forward invariance", None, fast_forward_invariance),
        report(8, "inverse engineering", None, inverse_engineering),
        report(9, "reproducibility", None, reproducible_runs),
    ];
    let failed: Vec<usize> = (1..=9).filter(|&i| !results[i - 1]).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
