use proptest::prelude::*;

use sps_core::field::random_field;
use sps_core::fibering::{fiber_energy, project_to_v, t_star, FiberScan};
use sps_core::{Couplings, ProfileClass, RadialGrid};

fn grid() -> RadialGrid {
    RadialGrid::new(512, 24.0).unwrap()
}

fn class(i: u8) -> ProfileClass {
    ProfileClass::ALL[i as usize % 3]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn virial_combination_identity(seed in any::<u64>(), k in 0u8..3, p in 3.4f64..5.9, alpha in 0u8..2) {
        let u = random_field(&grid(), seed, class(k));
        let r = u.energy_report(Couplings::new(alpha as f64, 1.0, p).unwrap());
        let scale = r.identity_lhs().abs().max(r.identity_rhs().abs());
        prop_assert!((r.identity_lhs() - r.identity_rhs()).abs() <= 1e-12 * scale);
    }

    #[test]
    fn negative_energy_forces_negative_q(seed in any::<u64>(), k in 0u8..3, p in 3.4f64..5.9, amp in 0.1f64..20.0) {
        let u = random_field(&grid(), seed, class(k)).scaled_by(amp);
        let r = u.energy_report(Couplings::sps(p));
        prop_assert!(!(r.f < 0.0) || r.q < 0.0);
    }

    #[test]
    fn dilation_scales_components(seed in any::<u64>(), k in 0u8..3, t in 0.2f64..5.0, p in 3.4f64..5.9) {
        let u = random_field(&grid(), seed, class(k));
        let a = u.components(p);
        let b = u.scaled(t).unwrap().components(p);
        let e = 1.5 * (p - 2.0);
        prop_assert!((b.a - t * t * a.a).abs() <= 1e-11 * b.a);
        prop_assert!((b.b - t * a.b).abs() <= 1e-11 * b.b);
        prop_assert!((b.c - t.powf(e) * a.c).abs() <= 1e-11 * b.c.abs());
        prop_assert!((b.d - a.d).abs() <= 1e-12 * a.d);
    }

    #[test]
    fn phase_leaves_energies_unchanged(seed in any::<u64>(), k in 0u8..3, theta in -7.0f64..7.0) {
        let u = random_field(&grid(), seed, class(k));
        let a = u.energy_report(Couplings::sps(4.0));
        let b = u.with_phase(theta).energy_report(Couplings::sps(4.0));
        for (x, y) in [(a.a, b.a), (a.b, b.b), (a.c, b.c), (a.d, b.d)] {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs());
        }
    }

    #[test]
    fn fiber_has_a_single_maximum(a in 1e-3f64..1e3, b in 0.0f64..1e3, c in -1e3f64..-1e-3, p in 3.4f64..5.9) {
        let ts = t_star(a, b, c, p).unwrap();
        let scale = a * ts * ts + b * ts + c.abs() * ts.powf(1.5 * (p - 2.0));
        let (f_star, q_star) = fiber_energy(a, b, c, p, ts);
        prop_assert!(q_star.abs() <= 1e-12 * scale);
        for m in [0.25, 0.5, 0.9, 1.1, 2.0, 4.0] {
            let (f, q) = fiber_energy(a, b, c, p, m * ts);
            prop_assert!(f < f_star);
            prop_assert_eq!(q > 0.0, m < 1.0);
        }
    }

    #[test]
    fn fiber_derivative_is_q_over_t(a in 1e-2f64..1e2, b in 0.0f64..1e2, c in -1e2f64..-1e-2, p in 3.4f64..5.9, t in 0.1f64..10.0) {
        let h = 1e-5 * t;
        let fd = (fiber_energy(a, b, c, p, t + h).0 - fiber_energy(a, b, c, p, t - h).0) / (2.0 * h);
        let q = fiber_energy(a, b, c, p, t).1;
        let scale = a * t + b + c.abs() * t.powf(1.5 * (p - 2.0) - 1.0);
        prop_assert!((fd - q / t).abs() <= 1e-7 * scale);
    }

    #[test]
    fn projection_lands_on_the_constraint(seed in any::<u64>(), k in 0u8..3, p in 3.4f64..5.9) {
        let cp = Couplings::sps(p);
        let u = random_field(&grid(), seed, class(k));
        let (v, t) = project_to_v(&u, cp).unwrap();
        let r = v.energy_report(cp);
        prop_assert!(r.q.abs() <= 1e-11 * r.scale());
        prop_assert!((v.mass() - u.mass()).abs() <= 1e-12 * u.mass());
        let scan = FiberScan::with_values(&u.energy_report(cp), vec![t / 2.0, t, 2.0 * t]).unwrap();
        prop_assert!(scan.f_values[1] > scan.f_values[0] && scan.f_values[1] > scan.f_values[2]);
    }
}
