//! Acceptance criteria, one line per criterion.
//!
//! Run with `cargo test -p pdmp-core --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use pdmp_core::analysis::{
    coupling_time_bound, coupling_time_bound_from_starts, default_decay_times, find_m_c,
    hitting_bound, lyapunov_drift_check, optimized_lyapunov, search_parameters, tv_curve,
    tv_to_reference, SearchConfig, FIGURE_TIMES,
};
use pdmp_core::coupling_engine::{couple_reflected, couple_reflected_paths};
use pdmp_core::jump_sampler::sample_jump;
use pdmp_core::pdmp_sim::{hitting_time_zero, states_at};
use pdmp_core::rng::replica_stream;
use pdmp_core::scaling_lab::{
    martingale_diagnostic, weak_convergence_report, InitialVelocity, ScalingFamily,
};
use pdmp_core::stats::{dkw_epsilon, ks_two_sample, max_survival_deviation, mean_se};
use pdmp_core::{Flavor, RatePair, State, Velocity};

const SEED: u64 = 2026;

type Case<'a> = (&'a str, &'a RatePair, f64, &'a dyn Fn(f64) -> f64);
type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn gaussian() -> RatePair {
    RatePair::affine(1.0, 1.0).unwrap()
}

fn ac1() -> Verdict {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let c = tv_to_reference(
        &gaussian(),
        State::new(5.0, Velocity::Minus),
        &FIGURE_TIMES,
        Flavor::Unreflected,
        100_000,
        SEED,
        |y| normal.cdf(y),
    )
    .unwrap();
    let strict = c.tv.windows(2).all(|w| w[1] < w[0]);
    let within = (1..c.tv.len()).all(|k| c.tv[k] <= c.tv[k - 1] + 2.0 * c.se[k]);
    let last = c.tv[c.tv.len() - 1];
    let tvs: Vec<String> = c.tv.iter().map(|v| format!("{v:.4}")).collect();
    Verdict {
        pass: within && last <= 0.05,
        detail: format!(
            "tv=[{}] strict={strict} within_2se={within} final={last:.4}<=0.05",
            tvs.join(",")
        ),
    }
}

fn ac2() -> Verdict {
    let pair = RatePair::constant(1.0, 3.0).unwrap();
    let laplace = |y: f64| {
        if y < 0.0 {
            0.5 * (2.0 * y).exp()
        } else {
            1.0 - 0.5 * (-2.0 * y).exp()
        }
    };
    let c = tv_to_reference(
        &pair,
        State::new(0.0, Velocity::Plus),
        &[30.0],
        Flavor::Unreflected,
        100_000,
        SEED,
        laplace,
    )
    .unwrap();
    Verdict {
        pass: c.tv[0] <= 0.03,
        detail: format!(
            "tv={:.4}<=0.03 se={:.4} bins={}",
            c.tv[0], c.se[0], c.binning.nbins
        ),
    }
}

fn ac3() -> Verdict {
    let (a, b, x, lambda): (f64, f64, f64, f64) = (1.0, 2.0, 1.0, 0.05);
    let lambda_c = 0.5 * (b.sqrt() - a.sqrt()).powi(2);
    let s = a + b - 2.0 * lambda;
    let c = 0.5 * (b - a - (s * s - 4.0 * a * b).sqrt());
    let exact = (c * x).exp();
    let pair = RatePair::constant(a, b).unwrap();
    let vals: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_stream(SEED, i);
            let z = hitting_time_zero(&pair, State::new(x, Velocity::Minus), &mut rng)
                .unwrap()
                .z_time;
            (lambda * z).exp()
        })
        .collect();
    let m = mean_se(&vals);
    let pass = lambda < lambda_c
        && (m.mean - exact).abs() <= 3.0 * m.se
        && (lambda_c - 0.08579).abs() < 1e-5;
    Verdict {
        pass,
        detail: format!(
            "mc={:.5}±{:.5} exact={exact:.5} lambda_c={lambda_c:.5}",
            m.mean, m.se
        ),
    }
}

fn ac4() -> Verdict {
    let n = 100_000usize;
    let band = dkw_epsilon(n, 0.01);
    let affine = gaussian();
    let constant = RatePair::constant(1.0, 2.0).unwrap();
    let b_affine = |y: f64| y + 0.5 * y * y;
    let b_constant = |y: f64| 2.0 * y;
    let draw = |pair: &RatePair, x: f64, v: Velocity, stream: u64| -> Vec<f64> {
        (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = replica_stream(SEED ^ stream, i);
                sample_jump(pair, x, v, &mut rng)
            })
            .collect()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    let cases: [Case; 3] = [
        ("affine", &affine, 0.0, &b_affine),
        ("affine", &affine, 2.0, &b_affine),
        ("constant", &constant, 1.0, &b_constant),
    ];
    for (k, (name, pair, x, big_b)) in cases.into_iter().enumerate() {
        let ts = draw(pair, x, Velocity::Plus, k as u64 + 1);
        let d = max_survival_deviation(&ts, |t| {
            if t < 0.0 {
                1.0
            } else {
                (-(big_b(x + t) - big_b(x))).exp()
            }
        });
        pass &= d <= band;
        parts.push(format!("dkw({name},x={x})={d:.4}"));
        if x > 0.0 {
            // a ≡ 1 in both families, so A(x) = x
            let ts = draw(pair, x, Velocity::Minus, k as u64 + 11);
            let p = (-x).exp();
            let freq = ts.iter().filter(|&&t| t == x).count() as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            pass &= (freq - p).abs() <= 3.0 * se;
            parts.push(format!("atom({name},x={x})={freq:.4}vs{p:.4}"));
        }
    }
    Verdict {
        pass,
        detail: format!("band={band:.4} {}", parts.join(" ")),
    }
}

fn ac5() -> Verdict {
    let pair = gaussian();
    let (s1, s2) = (
        State::new(2.0, Velocity::Plus),
        State::new(0.0, Velocity::Minus),
    );
    let n = 10_000u64;
    let horizon = 10.0;
    let runs: Vec<(f64, f64, bool, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_stream(SEED, i);
            let p = couple_reflected_paths(&pair, s1, s2, horizon, &mut rng).unwrap();
            let t_star = p.outcome.t_star;
            let coupled = t_star < horizon;
            let equal = !coupled
                || (0..=200).all(|k| {
                    let t = t_star + (horizon - t_star) * k as f64 / 200.0;
                    p.first.state_at(t) == p.second.state_at(t)
                });
            (
                p.first.position_at(5.0),
                p.second.position_at(5.0),
                coupled,
                equal,
            )
        })
        .collect();
    let indep = |s: State, stream: u64| -> Vec<f64> {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = replica_stream(SEED ^ stream, i);
                states_at(&pair, s, &[5.0], Flavor::Reflected, &mut rng).unwrap()[0].position
            })
            .collect()
    };
    let first: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let second: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let k1 = ks_two_sample(&first, &indep(s1, 101));
    let k2 = ks_two_sample(&second, &indep(s2, 102));
    let coupled = runs.iter().filter(|r| r.2).count();
    let equal = runs.iter().filter(|r| r.3).count();
    Verdict {
        pass: k1.p_value > 0.01 && k2.p_value > 0.01 && equal == runs.len(),
        detail: format!(
            "ks_p=({:.3},{:.3}) post_coupling_equal={equal}/{} coupled_before_{horizon}={coupled}",
            k1.p_value,
            k2.p_value,
            runs.len()
        ),
    }
}

fn ac6() -> Verdict {
    let times = default_decay_times();
    let c = tv_curve(
        &gaussian(),
        State::new(1.0, Velocity::Plus),
        State::new(0.0, Velocity::Minus),
        &times,
        Flavor::Unreflected,
        100_000,
        SEED,
    )
    .unwrap();
    let fit = c.fit().unwrap();
    Verdict {
        pass: fit.lambda_hat > 0.0 && fit.r2 > 0.9,
        detail: format!(
            "lambda_hat={:.4} K_hat={:.4} r2={:.4}>0.9 used={}/{}",
            fit.lambda_hat,
            fit.k_hat,
            fit.r2,
            fit.used,
            times.len()
        ),
    }
}

fn laplace_mc<F: Fn(u64) -> f64 + Sync>(n: u64, lambda: f64, sample: F) -> (f64, f64) {
    let vals: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| (lambda * sample(i)).exp())
        .collect();
    let m = mean_se(&vals);
    (m.mean, m.se)
}

fn ac7() -> Verdict {
    let pair = gaussian();
    let n = 100_000;
    let p = search_parameters(&pair, &SearchConfig::default()).unwrap();
    let (upper, lower) = (
        State::new(2.0, Velocity::Plus),
        State::new(0.0, Velocity::Minus),
    );
    let start_bound = coupling_time_bound_from_starts(&pair, upper, lower, &p).unwrap();
    let (m1, se1) = laplace_mc(n, p.lambda, |i| {
        let mut rng = replica_stream(SEED, i);
        couple_reflected(&pair, upper, lower, &mut rng)
            .unwrap()
            .t_star
    });
    let x = 1.0;
    let cross_bound = coupling_time_bound(&pair, x, &p).unwrap();
    let (m2, se2) = laplace_mc(n, p.lambda, |i| {
        let mut rng = replica_stream(SEED ^ 7, i);
        couple_reflected(
            &pair,
            State::new(x, Velocity::Plus),
            State::new(x, Velocity::Minus),
            &mut rng,
        )
        .unwrap()
        .t_star
    });
    let h = hitting_bound(&pair, 2.0, Velocity::Minus, 0.0).unwrap();
    let lambda_h = h.rho / 4.0;
    let hb = hitting_bound(&pair, 2.0, Velocity::Minus, lambda_h).unwrap();
    let (m3, se3) = laplace_mc(n, lambda_h, |i| {
        let mut rng = replica_stream(SEED ^ 13, i);
        hitting_time_zero(&pair, State::new(2.0, Velocity::Minus), &mut rng)
            .unwrap()
            .z_time
    });
    let pass = p.admissible && m1 <= start_bound && m2 <= cross_bound && m3 <= hb.bound;
    Verdict {
        pass,
        detail: format!(
            "R={} lambda={:.4} beta={:.4} | starts mc={m1:.4}±{se1:.4}<=bound={start_bound:.3} | crossing x={x} mc={m2:.4}±{se2:.4}<=bound={cross_bound:.3} | hitting mc={m3:.4}±{se3:.4}<=bound={:.3}",
            p.r, p.lambda, p.beta, hb.bound
        ),
    }
}

fn ac8() -> Verdict {
    let pair = gaussian();
    let m = find_m_c(&pair).unwrap();
    let (alpha, beta, rho) = optimized_lyapunov(&pair, m);
    let grid: Vec<f64> = (1..=5000).map(|k| m + 0.01 * k as f64).collect();
    let r = lyapunov_drift_check(&pair, alpha, beta, m, &grid).unwrap();
    Verdict {
        pass: r.max_deviation <= 1e-9 && (r.target + rho).abs() <= 1e-15,
        detail: format!(
            "M={m:.4} target={:.6} max_dev={:.2e}<=1e-9 points={}",
            r.target,
            r.max_deviation,
            grid.len()
        ),
    }
}

fn ac9() -> Verdict {
    let fams: Vec<ScalingFamily> = [4, 16, 64]
        .iter()
        .map(|&n| ScalingFamily::ornstein_uhlenbeck(n))
        .collect();
    let r =
        weak_convergence_report(&fams, 1.0, InitialVelocity::Uniform, 1.0, 10_000, SEED).unwrap();
    let ks: Vec<f64> = r.members.iter().map(|m| m.ks_exact.unwrap()).collect();
    let decreasing = ks.windows(2).all(|w| w[1] < w[0]);
    let last = ks[ks.len() - 1];
    Verdict {
        pass: decreasing && last <= 0.05,
        detail: format!(
            "ks_exact=[{:.4},{:.4},{:.4}] strictly_decreasing={decreasing} final<=0.05 ks_euler=[{:.4},{:.4},{:.4}] richardson={:.4}",
            ks[0], ks[1], ks[2], r.members[0].ks, r.members[1].ks, r.members[2].ks, r.richardson_ks
        ),
    }
}

fn ac10() -> Verdict {
    let r = martingale_diagnostic(
        &ScalingFamily::ornstein_uhlenbeck(16),
        1.0,
        InitialVelocity::Uniform,
        1.0,
        10_000,
        SEED,
    )
    .unwrap();
    Verdict {
        pass: r.mean.abs() <= 3.0 * r.se && r.square_mean.abs() <= 3.0 * r.square_se,
        detail: format!(
            "M={:.5}±{:.5} square={:.5}±{:.5}",
            r.mean, r.se, r.square_mean, r.square_se
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("AC1 figure reproduction", ac1),
        ("AC2 laplace invariant", ac2),
        ("AC3 constant-rate hitting", ac3),
        ("AC4 jump-law exactness", ac4),
        ("AC5 coupling validity", ac5),
        ("AC6 exponential decay", ac6),
        ("AC7 bound domination", ac7),
        ("AC8 lyapunov identity", ac8),
        ("AC9 diffusive scaling", ac9),
        ("AC10 martingales", ac10),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let v = run();
        failed += usize::from(!v.pass);
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] {name}: {} ({:.1}s)",
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
