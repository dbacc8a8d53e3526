use num_complex::Complex64;

use sps_core::dynamics::{
    detect_blowup, evolve, evolve_radial, strang_step, virial_consistency, Detection, RadialSimConfig, SimConfig,
    Termination, Thresholds,
};
use sps_core::ground_state::{gaussian_start, solve_ground_state, SolverOptions};
use sps_core::{BoxField, BoxGrid, Couplings, RadialField};

fn gaussian_box(n: usize, l: f64, width: f64, mass: f64) -> BoxField {
    let g = BoxField::from_fn(BoxGrid::new(n, l).unwrap(), |x, y, z| {
        Complex64::new((-0.5 * (x * x + y * y + z * z) / (width * width)).exp(), 0.0)
    });
    let d = g.mass();
    g.scaled_by((mass / d).sqrt())
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn zero_field_stays_zero() {
    let u = BoxField::zeros(BoxGrid::new(8, 4.0).unwrap());
    let v = strang_step(&u, 0.1, Couplings::sps(4.0)).unwrap();
    assert!(v.values().iter().all(|z| *z == Complex64::default()));
}

#[test]
fn free_plane_wave_picks_up_the_exact_phase() {
    let grid = BoxGrid::new(16, 5.0).unwrap();
    let mode = [2, -1, 3];
    let u = BoxField::plane_wave(grid, mode, 0.8);
    let dt = 0.037;
    let v = strang_step(&u, dt, Couplings::free()).unwrap();
    let k = 2.0 * std::f64::consts::PI / 5.0;
    let k2 = k * k * mode.iter().map(|m| (m * m) as f64).sum::<f64>();
    let expected = u.with_phase(-k2 * dt);
    assert!(max_diff(v.values(), expected.values()) <= 1e-13);
}

#[test]
fn linear_runs_conserve_energy() {
    let u = gaussian_box(32, 12.0, 1.0, 1.0).with_phase(0.4);
    let cfg = SimConfig::new(0.01, 1.0, Couplings::free(), 10).unwrap();
    let rec = evolve(&u, &cfg).unwrap();
    assert_eq!(rec.termination, Termination::Completed);
    assert!(rec.energy_drift() <= 1e-12, "{}", rec.energy_drift());
    assert!(rec.mass_drift() <= 1e-12, "{}", rec.mass_drift());
}

#[test]
fn evolution_commutes_with_phase() {
    let u = gaussian_box(16, 12.0, 1.2, 2.0);
    let cp = Couplings::sps(4.0);
    let theta = 1.3;
    let mut a = u.clone();
    let mut b = u.with_phase(theta);
    for _ in 0..5 {
        a = strang_step(&a, 0.01, cp).unwrap();
        b = strang_step(&b, 0.01, cp).unwrap();
    }
    assert!(max_diff(b.values(), a.with_phase(theta).values()) <= 1e-13);
}

#[test]
fn free_packet_virial_is_exact() {
    let u = gaussian_box(32, 24.0, 2.0, 1.0);
    let cfg = SimConfig::new(0.01, 1.0, Couplings::free(), 5).unwrap();
    let rec = evolve(&u, &cfg).unwrap();
    let v = virial_consistency(&rec).unwrap();
    assert_eq!(v.compared, rec.samples.len() - 2, "{v:?}");
    assert!(v.max_relative_deviation <= 1e-9, "{v:?}");
    for s in &rec.samples {
        assert!((s.q - s.a).abs() <= 1e-15 * s.a);
    }
}

#[test]
fn radial_free_packet_virial_is_exact() {
    let u = gaussian_start(1.0, 512, 24.0).unwrap().with_phase(0.2);
    let mut cfg = RadialSimConfig::new(0.01, 1.0, Couplings::free(), 5).unwrap();
    cfg.adaptive = false;
    let rec = evolve_radial(&u, &cfg).unwrap();
    assert_eq!(rec.termination, Termination::Completed);
    assert!(virial_consistency(&rec).unwrap().max_relative_deviation <= 1e-10);
    assert!(rec.energy_drift() <= 1e-12);
}

#[test]
fn too_few_samples_is_an_error() {
    let u = gaussian_box(8, 12.0, 1.0, 1.0);
    let rec = evolve(&u, &SimConfig::new(0.1, 0.1, Couplings::free(), 1).unwrap()).unwrap();
    assert!(virial_consistency(&rec).is_err());
}

#[test]
fn config_checks_cadence_and_step_count() {
    let cp = Couplings::sps(4.0);
    assert!(SimConfig::new(0.0, 1.0, cp, 1).is_err());
    assert_eq!(SimConfig::new(1e-3, 1.0, cp, 10).unwrap().steps().unwrap(), 1000);
    assert!(SimConfig::new(1e-3, 1.0, cp, 7).is_err());
    assert!(SimConfig::new(0.3, 1.0, cp, 1).is_err());
}

#[test]
fn detector_prefers_the_resolution_guard() {
    let t = Thresholds::default();
    let mut s = sps_core::dynamics::Sample {
        t: 1.0,
        mass: 1.0,
        f: 0.0,
        a: 2e3,
        b: 0.0,
        c: 0.0,
        q: 0.0,
        virial: 0.0,
        tail_fraction: 1e-8,
        points: 64,
    };
    assert_eq!(detect_blowup(1.0, &s, &t), Detection::BlowupDetected);
    s.tail_fraction = 1e-5;
    assert_eq!(detect_blowup(1.0, &s, &t), Detection::UnderResolved);
    s.tail_fraction = 0.0;
    s.a = 10.0;
    assert_eq!(detect_blowup(1.0, &s, &t), Detection::None);
}

#[test]
fn radial_and_box_propagators_agree_on_a_smooth_datum() {
    let cp = Couplings::sps(4.0);
    let radial = gaussian_start(2.0, 512, 12.0).unwrap();
    let boxed = BoxField::from_radial(BoxGrid::new(64, 24.0).unwrap(), &radial);
    let mut rc = RadialSimConfig::new(2e-3, 0.5, cp, 50).unwrap();
    rc.adaptive = false;
    rc.jitter = 0.0;
    let r = evolve_radial(&radial, &rc).unwrap();
    let b = evolve(&boxed, &SimConfig::new(2e-3, 0.5, cp, 50).unwrap()).unwrap();
    for (x, y) in r.samples.iter().zip(&b.samples) {
        assert!((x.t - y.t).abs() < 1e-12);
        assert!((x.a - y.a).abs() <= 1e-4 * x.a, "A {} vs {}", x.a, y.a);
        assert!((x.virial - y.virial).abs() <= 1e-4 * x.virial, "V {} vs {}", x.virial, y.virial);
    }
}

#[test]
fn standing_wave_orbit_keeps_its_modulus() {
    let cp = Couplings::sps(4.0);
    let init = gaussian_start(0.5, 512, 40.0).unwrap();
    let gs = solve_ground_state(0.5, cp, &init, &SolverOptions::default()).unwrap();
    assert!(gs.converged);
    let period = 1.0 / gs.lambda_c.abs();
    let dt = 1e-3 * period;
    let mut cfg = RadialSimConfig::new(dt, 200.0 * dt, cp, 200).unwrap();
    cfg.adaptive = false;
    cfg.refine_tail = 1.0;
    let mut last: Option<RadialField> = None;
    let rec = sps_core::dynamics::evolve_radial_observed(&gs.field, &cfg, |_, f| last = Some(f.clone())).unwrap();
    let u = last.unwrap();
    let t = rec.samples.last().unwrap().t;
    let expected = gs.field.with_phase(-gs.lambda_c * t);
    let peak = gs.field.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let modulus = u.values().iter().zip(gs.field.values()).map(|(a, b)| (a.norm() - b.norm()).abs()).fold(0.0, f64::max);
    assert!(modulus <= 1e-3 * peak, "modulus error {:e}", modulus / peak);
    let phase = max_diff(u.values(), expected.values());
    assert!(phase <= 1e-3 * peak, "phase error {:e}", phase / peak);
    assert!(rec.mass_drift() <= 1e-12);
}

#[test]
fn coarse_grid_collapse_is_under_resolved() {
    let cp = Couplings::sps(4.0);
    let init = gaussian_start(0.5, 512, 40.0).unwrap();
    let gs = solve_ground_state(0.5, cp, &init, &SolverOptions::default()).unwrap();
    let u = gs.field.scaled(1.1).unwrap();
    let mut cfg = RadialSimConfig::new(1e-5, 20.0, cp, 100).unwrap();
    cfg.max_points = u.grid().len();
    let rec = evolve_radial(&u, &cfg).unwrap();
    assert_eq!(rec.termination, Termination::UnderResolved);
    assert!(rec.detection_time.unwrap() < 20.0);

    let boxed = BoxField::from_radial(BoxGrid::new(16, 2.0).unwrap(), &u);
    let rec = evolve(&boxed, &SimConfig::new(1e-5, 1e-3, cp, 10).unwrap()).unwrap();
    assert_eq!(rec.termination, Termination::UnderResolved);
}
