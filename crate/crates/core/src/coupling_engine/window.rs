//! Laws of the unreflected process started at the origin, restricted to one
//! or two velocity switches before a fixed time, and their overlap `ε_t`.

use crate::error::Result;
use crate::numerics::{adaptive_simpson, integrate_pieces, solve_increasing};
use crate::rate_model::RatePair;

const TOL: f64 = 1e-8;

/// Density of the first jump time from `(0, +1)`.
pub fn first_jump_density(pair: &RatePair, s: f64) -> f64 {
    if s < 0.0 {
        return 0.0;
    }
    let b = pair.b();
    b.value(s) * (-b.integral(s)).exp()
}

/// Density of the first jump time from `(y, −1)`, `y >= 0`, for the
/// unreflected process (the path may pass through the origin).
pub fn downward_jump_density(pair: &RatePair, y: f64, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let (a, b) = (pair.a(), pair.b());
    if t < y {
        a.value(y - t) * (-(a.integral(y) - a.integral(y - t))).exp()
    } else {
        (-a.integral(y)).exp() * b.value(t - y) * (-b.integral(t - y)).exp()
    }
}

/// `P(T_1 > t)` from `(y, +1)` for the unreflected process, any real `y`.
pub fn upward_survival(pair: &RatePair, y: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let (a, b) = (pair.a(), pair.b());
    if y >= 0.0 {
        return (-(b.integral(y + t) - b.integral(y))).exp();
    }
    let x = -y;
    if y + t < 0.0 {
        (-(a.integral(x) - a.integral(x - t))).exp()
    } else {
        (-(a.integral(x) + b.integral(y + t))).exp()
    }
}

/// Sub-density at `(u, +1)` of the position at time `t`, started from
/// `(0, −1)`, on the event of exactly one switch.
pub fn h_minus(pair: &RatePair, t: f64, u: f64) -> f64 {
    if !(u > -t && u < t) {
        return 0.0;
    }
    let s = 0.5 * (t - u);
    0.5 * first_jump_density(pair, s) * upward_survival(pair, -s, 0.5 * (t + u))
}

/// Integrand of [`h_plus`] in the first inter-jump time `s1`.
pub fn h_plus_integrand(pair: &RatePair, t: f64, u: f64, s1: f64) -> f64 {
    let s2 = 0.5 * (t - u);
    0.5 * first_jump_density(pair, s1)
        * downward_jump_density(pair, s1, s2)
        * upward_survival(pair, s1 - s2, 0.5 * (t + u) - s1)
}

/// Sub-density at `(u, +1)` of the position at time `t`, started from
/// `(0, +1)`, on the event of exactly two switches.
pub fn h_plus(pair: &RatePair, t: f64, u: f64) -> f64 {
    if !(u > -t && u < t) {
        return 0.0;
    }
    let s2 = 0.5 * (t - u);
    let top = 0.5 * (t + u);
    let f = |s1: f64| h_plus_integrand(pair, t, u, s1);
    // the integrand has a kink where the second run reaches the origin
    if s2 > 0.0 && s2 < top {
        adaptive_simpson(&f, 0.0, s2, TOL) + adaptive_simpson(&f, s2, top, TOL)
    } else {
        adaptive_simpson(&f, 0.0, top, TOL)
    }
}

/// `ε_t = 2 ∫_{−t}^{t} min(h₋₁(u), h₁(u)) du`.
pub fn epsilon_t(pair: &RatePair, t: f64) -> f64 {
    if !(t > 0.0) {
        return 0.0;
    }
    let g = |u: f64| h_minus(pair, t, u).min(h_plus(pair, t, u));
    (2.0 * integrate_pieces(&g, -t, t, TOL, t / 16.0)).clamp(0.0, 1.0)
}

/// Draws the first inter-jump time of a path from `(0, +1)` conditioned on
/// two switches before `t` and ending at `(u, +1)`, from one uniform `p`.
pub fn sample_bridge_first_run(pair: &RatePair, t: f64, u: f64, p: f64) -> Result<f64> {
    let s2 = 0.5 * (t - u);
    let top = 0.5 * (t + u);
    let f = |s1: f64| h_plus_integrand(pair, t, u, s1);
    let mass = |s: f64| {
        if s2 > 0.0 && s2 < s {
            adaptive_simpson(&f, 0.0, s2, 1e-12) + adaptive_simpson(&f, s2, s, 1e-12)
        } else {
            adaptive_simpson(&f, 0.0, s, 1e-12)
        }
    };
    let total = mass(top);
    solve_increasing(mass, f, p * total, 0.0, top, 1e-12)
}
