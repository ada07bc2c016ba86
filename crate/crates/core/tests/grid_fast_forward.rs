use shortcut_forge::fastforward::TimeRescaling;
use shortcut_forge::grid::{
    ff_potential, phase_from_continuity, potentials_from_wavefunction, split_step_evolve,
    wavefunction, AmplitudeModel, BreathingGaussian, GridSystem, TranslatingGaussian,
};
use shortcut_forge::C64;

fn grid() -> GridSystem {
    GridSystem::new(-20.0, 20.0, 2048, 1.0, 1.0).unwrap()
}

/// Resolves the far tails of the support, where the flux integral is
/// dominated by fourth-order truncation error on the coarser grid.
fn fine_grid() -> GridSystem {
    GridSystem::new(-20.0, 20.0, 8192, 1.0, 1.0).unwrap()
}

fn breathing() -> BreathingGaussian {
    BreathingGaussian {
        sigma0: 1.0,
        sigma1: 2.0,
        duration: 5.0,
    }
}

/// Indices where `r` exceeds `rel` times its maximum.
fn bulk(r: &[f64], rel: f64) -> Vec<usize> {
    let max = r.iter().fold(0.0f64, |a, &b| a.max(b));
    (0..r.len()).filter(|&i| r[i] > rel * max).collect()
}

#[test]
fn amplitude_is_normalized() {
    let g = grid();
    for s in [0.0, 2.5, 5.0] {
        let (r, _) = breathing().sample(g.x(), s);
        assert!((g.norm_sqr(&r) - 1.0).abs() < 1e-6);
        assert!(r.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn translating_gaussian_has_boost_phase() {
    let g = grid();
    let model = TranslatingGaussian {
        sigma: 1.5,
        x0: -2.0,
        velocity: 0.7,
    };
    let (r, dr) = model.sample(g.x(), 1.0);
    let p = phase_from_continuity(&g, &r, &dr, None).unwrap();
    for i in bulk(&r, 1e-3) {
        assert!(
            (p.gradient[i] - 0.7).abs() < 1e-4,
            "x = {}: {}",
            g.x()[i],
            p.gradient[i]
        );
    }
}

#[test]
fn breathing_gaussian_has_quadratic_phase() {
    let g = fine_grid();
    let model = breathing();
    let s = 2.0;
    let (sigma, dsigma) = model.width(s);
    let (r, dr) = model.sample(g.x(), s);
    let p = phase_from_continuity(&g, &r, &dr, None).unwrap();
    for i in bulk(&r, 1e-4) {
        let expected = dsigma / sigma * g.x()[i];
        assert!((p.gradient[i] - expected).abs() < 1e-6);
    }
}

#[test]
fn even_amplitude_gives_odd_gradient() {
    let g = grid();
    let (r, dr) = breathing().sample(g.x(), 1.3);
    let p = phase_from_continuity(&g, &r, &dr, None).unwrap();
    let n = g.len();
    let (lo, hi) = p.support;
    let scale = p.gradient[lo..=hi]
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    for i in lo.max(1)..=hi {
        assert!((p.gradient[i] + p.gradient[n - i]).abs() < 1e-9 * scale);
    }
}

#[test]
fn static_amplitude_potential_is_quantum_pressure() {
    let g = grid();
    let model = BreathingGaussian {
        sigma0: 1.2,
        sigma1: 1.2,
        duration: 1.0,
    };
    let sigma: f64 = 1.2;
    let a = potentials_from_wavefunction(&g, &model, 0.2).unwrap();
    let b = potentials_from_wavefunction(&g, &model, 0.9).unwrap();
    let (r, _) = model.sample(g.x(), 0.2);
    for i in bulk(&r, 1e-3) {
        let x = g.x()[i];
        let expected = 0.5 * (x * x / (4.0 * sigma.powi(4)) - 1.0 / (2.0 * sigma * sigma));
        assert!((a.re_v[i] - expected).abs() < 1e-6);
        assert!((a.re_v[i] - b.re_v[i]).abs() < 1e-14);
    }
}

#[test]
fn imaginary_potential_vanishes_on_support() {
    let g = fine_grid();
    let model = breathing();
    for s in [0.7, 2.5, 4.1] {
        let p = potentials_from_wavefunction(&g, &model, s).unwrap();
        let (lo, hi) = p.phase.support;
        let scale = p.re_v[lo..=hi].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(
            p.max_im_v() < 1e-6 * scale,
            "s = {s}: {:e} vs {scale}",
            p.max_im_v()
        );
    }
}

#[test]
fn unit_rate_ff_potential_is_real_potential() {
    let g = grid();
    let model = breathing();
    let rescale = TimeRescaling::uniform(1.0).unwrap();
    let v = ff_potential(&g, &model, &rescale, 1.7).unwrap();
    let p = potentials_from_wavefunction(&g, &model, 1.7).unwrap();
    for (a, b) in v.iter().zip(&p.re_v) {
        assert!((a - b).abs() < 1e-12);
    }
}

fn analytic_density_distance(
    g: &GridSystem,
    psi: &[C64],
    model: &dyn AmplitudeModel,
    s: f64,
) -> f64 {
    let (r, _) = model.sample(g.x(), s);
    let target: Vec<C64> = r.iter().map(|&r| C64::from(r)).collect();
    g.density_l2_distance(psi, &target)
}

#[test]
fn reference_potential_generates_the_prescribed_density() {
    let g = grid();
    let model = breathing();
    let psi0 = wavefunction(&g, &model, 0.0).unwrap();
    let potential = |s: f64| potentials_from_wavefunction(&g, &model, s).map(|p| p.re_v);
    let psi = split_step_evolve(&g, &psi0, &potential, 0.0, 5.0, 5000).unwrap();
    let d = analytic_density_distance(&g, &psi, &model, 5.0);
    assert!(d < 1e-4, "distance {d:e}");
}

#[test]
fn ff_potential_tracks_density_at_triple_speed() {
    let g = grid();
    let model = breathing();
    let rate = 3.0;
    let t_ff = model.duration / rate;
    let rescale = TimeRescaling::uniform(rate).unwrap();
    let psi0 = wavefunction(&g, &model, 0.0).unwrap();
    let reference = {
        let potential = |s: f64| potentials_from_wavefunction(&g, &model, s).map(|p| p.re_v);
        split_step_evolve(&g, &psi0, &potential, 0.0, model.duration, 5000).unwrap()
    };
    let potential = |t: f64| ff_potential(&g, &model, &rescale, t);
    let mut psi = psi0.clone();
    let checkpoints = [0.25 * t_ff, 0.5 * t_ff, t_ff];
    let mut t0 = 0.0;
    for &t1 in &checkpoints {
        psi = split_step_evolve(&g, &psi, &potential, t0, t1, 1000).unwrap();
        let d = analytic_density_distance(&g, &psi, &model, rescale.s(t1));
        assert!(d < 1e-4, "t = {t1}: distance {d:e}");
        t0 = t1;
    }
    let d = g.density_l2_distance(&psi, &reference);
    assert!(d < 1e-4, "distance to reference simulation {d:e}");
}

#[test]
fn ff_potential_with_smooth_rescaling() {
    let g = grid();
    let model = breathing();
    let t_ff = 1.0;
    let rescale = TimeRescaling::smooth(t_ff, model.duration).unwrap();
    let psi0 = wavefunction(&g, &model, 0.0).unwrap();
    let potential = |t: f64| ff_potential(&g, &model, &rescale, t);
    let psi = split_step_evolve(&g, &psi0, &potential, 0.0, 0.5 * t_ff, 2000).unwrap();
    let d = analytic_density_distance(&g, &psi, &model, rescale.s(0.5 * t_ff));
    assert!(d < 1e-4, "midway distance {d:e}");
    let psi = split_step_evolve(&g, &psi, &potential, 0.5 * t_ff, t_ff, 2000).unwrap();
    let d = analytic_density_distance(&g, &psi, &model, model.duration);
    assert!(d < 1e-4, "final distance {d:e}");
}
