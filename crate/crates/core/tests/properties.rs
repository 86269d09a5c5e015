use proptest::prelude::*;

use pdmp_core::analysis::{tv_distance, Binning, EmpiricalLaw};
use pdmp_core::pdmp_sim::{reflect, simulate, unreflect};
use pdmp_core::rng::replica_stream;
use pdmp_core::scaling_lab::{simulate_scaled, InitialVelocity, ScalingFamily};
use pdmp_core::{Flavor, RatePair, RateSpec, State, Velocity};

fn spec() -> impl Strategy<Value = RateSpec> {
    prop_oneof![
        (0.1f64..5.0).prop_map(RateSpec::constant),
        (0.1f64..5.0, 0.0f64..3.0).prop_map(|(b, s)| RateSpec::affine(b, s)),
        (0.1f64..3.0, prop::collection::vec(0.01f64..2.0, 1..6)).prop_map(|(v0, incs)| {
            let mut knots = vec![0.0];
            let mut values = vec![v0];
            for (i, d) in incs.iter().enumerate() {
                knots.push(0.5 * (i + 1) as f64);
                values.push(values[i] + d);
            }
            RateSpec::tabulated(knots, values).unwrap()
        }),
    ]
}

fn pair() -> impl Strategy<Value = RatePair> {
    (0.2f64..3.0, 0.05f64..2.0, 0.0f64..2.0).prop_map(|(a, gap, slope)| {
        RatePair::new(RateSpec::constant(a), RateSpec::affine(a + gap, slope)).unwrap()
    })
}

fn histogram() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 1..60)
}

proptest! {
    #[test]
    fn inverse_integral_round_trips(r in spec(), x in 0.0f64..20.0) {
        let u = r.integral(x);
        let back = r.inverse_integral(u).unwrap();
        prop_assert!((back - x).abs() <= 1e-8 * (1.0 + x));
    }

    #[test]
    fn advance_and_retreat_spend_the_budget(r in spec(), x in 0.0f64..10.0, e in 0.0f64..5.0) {
        let t = r.advance(x, e);
        prop_assert!(((r.integral(x + t) - r.integral(x)) - e).abs() <= 1e-8 * (1.0 + e));
        match r.retreat(x, e) {
            Some(s) => prop_assert!(((r.integral(x) - r.integral(x - s)) - e).abs() <= 1e-8 * (1.0 + e)),
            None => prop_assert!(e >= r.integral(x)),
        }
    }

    #[test]
    fn potential_is_convex_and_even(p in pair(), y in -10.0f64..10.0, h in 0.01f64..3.0) {
        let f = |y: f64| p.potential(y);
        prop_assert!(f(y - h) + f(y + h) - 2.0 * f(y) >= -1e-9 * (1.0 + f(y).abs()));
        prop_assert!((f(y) - f(-y)).abs() <= 1e-12 * (1.0 + f(y).abs()));
    }

    #[test]
    fn tv_is_a_metric(a in histogram(), b in histogram(), c in histogram()) {
        let bins = Binning::new(-2.0, 2.0, 8).unwrap();
        let law = |xs: &[f64]| EmpiricalLaw::from_positions(xs, bins).unwrap();
        let (p, q, r) = (law(&a), law(&b), law(&c));
        let d = |x: &EmpiricalLaw, y: &EmpiricalLaw| tv_distance(x, y).unwrap();
        prop_assert_eq!(d(&p, &p), 0.0);
        prop_assert!((d(&p, &q) - d(&q, &p)).abs() < 1e-15);
        prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-12);
        prop_assert!((0.0..=1.0).contains(&d(&p, &q)));
    }

    #[test]
    fn reflect_then_unreflect_is_identity(p in pair(), y0 in -3.0f64..3.0, up in any::<bool>(), seed in 0u64..1000) {
        let v = if up { Velocity::Plus } else { Velocity::Minus };
        let mut rng = replica_stream(seed, 0);
        let traj = simulate(&p, State::new(y0, v), 8.0, Flavor::Unreflected, &mut rng).unwrap();
        let back = unreflect(&reflect(&traj).unwrap(), y0).unwrap();
        prop_assert_eq!(back.events.len(), traj.events.len());
        for k in 0..=80 {
            let t = 0.1 * k as f64;
            prop_assert!((back.position_at(t) - traj.position_at(t)).abs() < 1e-9);
        }
    }

    #[test]
    fn reflected_path_is_the_folded_path(p in pair(), y0 in -3.0f64..3.0, seed in 0u64..1000) {
        let mut rng = replica_stream(seed, 1);
        let traj = simulate(&p, State::new(y0, Velocity::Minus), 6.0, Flavor::Unreflected, &mut rng).unwrap();
        let folded = reflect(&traj).unwrap();
        for k in 0..=60 {
            let t = 0.1 * k as f64;
            prop_assert!((folded.position_at(t) - traj.position_at(t).abs()).abs() < 1e-9);
        }
    }

    #[test]
    fn time_change_inverse_is_consistent(n in 1u32..40, y0 in -2.0f64..2.0, seed in 0u64..1000) {
        let mut rng = replica_stream(seed, 2);
        let tc = simulate_scaled(&ScalingFamily::ornstein_uhlenbeck(n), y0, InitialVelocity::Uniform, 1.0, &mut rng).unwrap();
        let mut prev = -1.0;
        for k in 0..=50 {
            let t = 0.02 * k as f64;
            let tau = tc.tau_at(t);
            prop_assert!(tau > prev);
            prev = tau;
            prop_assert!((tc.t_at(tau) - t).abs() < 1e-9);
        }
    }
}
