//! Exact inter-jump times `T(x, ±1)` in the reflected frame.
//!
//! Moving away from the origin (`+1`) the switching rate is `b`, moving
//! towards it (`−1`) it is `a`; a downward run that reaches the origin ends
//! there, which puts an atom at `t = x`. All draws invert the integrated
//! rate, so one unit exponential determines one jump time.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{adaptive_simpson, integrate_pieces, integrate_to_infinity};
use crate::rate_model::RatePair;
use crate::rng::{bernoulli, unit_exponential};
use crate::state::Velocity;
use crate::stats::dkw_epsilon;

/// Jump time from `(x, v)` driven by the unit exponential `e`.
#[inline]
pub fn jump_time(pair: &RatePair, x: f64, v: Velocity, e: f64) -> f64 {
    match v {
        Velocity::Plus => pair.b().advance(x, e),
        Velocity::Minus => pair.a().retreat(x, e).unwrap_or(x),
    }
}

/// Draws `T(x, v)`.
#[inline]
pub fn sample_jump<R: Rng + ?Sized>(pair: &RatePair, x: f64, v: Velocity, rng: &mut R) -> f64 {
    jump_time(pair, x, v, unit_exponential(rng))
}

/// The law of `T(x, v)`: an absolutely continuous part plus, for `v = −1`,
/// an atom of mass `e^{−A(x)}` at `t = x`.
#[derive(Clone, Debug)]
pub struct JumpLaw {
    pub x: f64,
    pub v: Velocity,
    pub atom_mass: f64,
    pair: RatePair,
}

pub fn jump_law(pair: &RatePair, x: f64, v: Velocity) -> Result<JumpLaw> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("jump law needs x >= 0, got {x}")));
    }
    let atom_mass = match v {
        Velocity::Plus => 0.0,
        Velocity::Minus => (-pair.a().integral(x)).exp(),
    };
    Ok(JumpLaw {
        x,
        v,
        atom_mass,
        pair: pair.clone(),
    })
}

impl JumpLaw {
    /// Density of the absolutely continuous part.
    pub fn density(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let x = self.x;
        match self.v {
            Velocity::Plus => {
                let b = self.pair.b();
                b.value(x + t) * (-(b.integral(x + t) - b.integral(x))).exp()
            }
            Velocity::Minus => {
                if t >= x {
                    return 0.0;
                }
                let a = self.pair.a();
                a.value(x - t) * (-(a.integral(x) - a.integral(x - t))).exp()
            }
        }
    }

    /// `P(T > t)`.
    pub fn survival(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        let x = self.x;
        match self.v {
            Velocity::Plus => {
                let b = self.pair.b();
                (-(b.integral(x + t) - b.integral(x))).exp()
            }
            Velocity::Minus => {
                if t >= x {
                    return 0.0;
                }
                let a = self.pair.a();
                (-(a.integral(x) - a.integral(x - t))).exp()
            }
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.survival(t)
    }

    /// Atom mass plus the integral of the density.
    pub fn total_mass(&self) -> Result<f64> {
        let f = |t: f64| self.density(t);
        let continuous = match self.v {
            Velocity::Minus => integrate_pieces(&f, 0.0, self.x, 1e-12, 0.5),
            Velocity::Plus => {
                let first = 1.0 / self.pair.b().value(self.x);
                integrate_to_infinity(&f, 0.0, first, 1e-12, |t| self.survival(t), 1e-13)?
            }
        };
        Ok(self.atom_mass + continuous)
    }
}

/// `E[e^{λ T(x, v)}]`, `+∞` when it diverges.
pub fn laplace_jump(pair: &RatePair, x: f64, v: Velocity, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 1.0;
    }
    match v {
        Velocity::Plus => {
            if lambda >= pair.b_upper() {
                return f64::INFINITY;
            }
            let b = pair.b();
            let bx = b.integral(x);
            // E[e^{λT}] = 1 + λ ∫ e^{λt} P(T > t) dt
            let g = |t: f64| (lambda * t - (b.integral(x + t) - bx)).exp();
            let tail = |t: f64| {
                let gap = b.value(x + t) - lambda;
                if gap > 0.0 {
                    g(t) / gap
                } else {
                    f64::INFINITY
                }
            };
            let first = 0.5 / b.value(x).max(1e-3);
            match integrate_to_infinity(&g, 0.0, first, 1e-13, tail, 1e-14) {
                Ok(v) => 1.0 + lambda * v,
                Err(_) => f64::INFINITY,
            }
        }
        Velocity::Minus => {
            let a = pair.a();
            let ax = a.integral(x);
            let f = |t: f64| a.value(x - t) * (lambda * t - (ax - a.integral(x - t))).exp();
            (lambda * x - ax).exp() + integrate_pieces(&f, 0.0, x, 1e-13, 0.25)
        }
    }
}

/// Two jump times coupled so that one is surely no larger than the other.
///
/// `lower_time <= upper_time` always. For the `+1` coupling `lower_time` is
/// the time from the higher start `x`; for the `−1` coupling it is the time
/// from the lower start `x̃`. The excess `upper_time − lower_time` is the
/// `overshoot`, drawn fresh iff `bernoulli_mark` is set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoupledJumpPair {
    pub velocity: Velocity,
    pub lower_time: f64,
    pub upper_time: f64,
    pub bernoulli_mark: bool,
    pub mark_parameter: f64,
    pub overshoot: Option<f64>,
}

impl CoupledJumpPair {
    /// `T(x, v)` for the larger start `x`.
    pub fn time_at_x(&self) -> f64 {
        match self.velocity {
            Velocity::Plus => self.lower_time,
            Velocity::Minus => self.upper_time,
        }
    }

    /// `T(x̃, v)` for the smaller start `x̃`.
    pub fn time_at_x_tilde(&self) -> f64 {
        match self.velocity {
            Velocity::Plus => self.upper_time,
            Velocity::Minus => self.lower_time,
        }
    }
}

/// `(b(x+t) − b(x̃+t)) / b(x+t)`.
#[inline]
pub fn beta_mark(pair: &RatePair, x: f64, x_tilde: f64, t: f64) -> f64 {
    let b = pair.b();
    let hi = b.value(x + t);
    ((hi - b.value(x_tilde + t)) / hi).clamp(0.0, 1.0)
}

/// `(a(x̃−t) − a(x−t)) / a(x̃−t)` for `t < x̃`, and 1 at `t = x̃`.
#[inline]
pub fn alpha_mark(pair: &RatePair, x: f64, x_tilde: f64, t: f64) -> f64 {
    if t >= x_tilde {
        return 1.0;
    }
    let a = pair.a();
    let lo = a.value(x_tilde - t);
    ((lo - a.value(x - t)) / lo).clamp(0.0, 1.0)
}

/// Couples `T(x, +1)` and `T(x̃, +1)` for `x >= x̃` so that `T(x, +1) <= T(x̃, +1)`.
pub fn coupled_pair_plus<R: Rng + ?Sized>(
    pair: &RatePair,
    x: f64,
    x_tilde: f64,
    rng: &mut R,
) -> Result<CoupledJumpPair> {
    if !(x >= x_tilde && x_tilde >= 0.0) {
        return Err(Error::Precondition(format!(
            "need x >= x̃ >= 0, got x={x}, x̃={x_tilde}"
        )));
    }
    let t = sample_jump(pair, x, Velocity::Plus, rng);
    let beta = beta_mark(pair, x, x_tilde, t);
    let mark = bernoulli(rng, beta);
    let overshoot = mark.then(|| sample_jump(pair, x_tilde + t, Velocity::Plus, rng));
    Ok(CoupledJumpPair {
        velocity: Velocity::Plus,
        lower_time: t,
        upper_time: t + overshoot.unwrap_or(0.0),
        bernoulli_mark: mark,
        mark_parameter: beta,
        overshoot,
    })
}

/// Couples `T(x, −1)` and `T(x̃, −1)` for `x > x̃ > 0` so that `T(x̃, −1) <= T(x, −1)`.
pub fn coupled_pair_minus<R: Rng + ?Sized>(
    pair: &RatePair,
    x: f64,
    x_tilde: f64,
    rng: &mut R,
) -> Result<CoupledJumpPair> {
    if !(x > x_tilde && x_tilde > 0.0) {
        return Err(Error::Precondition(format!(
            "need x > x̃ > 0, got x={x}, x̃={x_tilde}"
        )));
    }
    let t = sample_jump(pair, x_tilde, Velocity::Minus, rng);
    let alpha = alpha_mark(pair, x, x_tilde, t);
    let mark = bernoulli(rng, alpha);
    let overshoot = mark.then(|| sample_jump(pair, x - t, Velocity::Minus, rng));
    Ok(CoupledJumpPair {
        velocity: Velocity::Minus,
        lower_time: t,
        upper_time: t + overshoot.unwrap_or(0.0),
        bernoulli_mark: mark,
        mark_parameter: alpha,
        overshoot,
    })
}

/// Empirical check of the stochastic order between `T(x, v)` and `T(x̃, v)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderReport {
    /// largest `F_dominating(t) − F_dominated(t)`; positive values contradict the order
    pub max_violation: f64,
    /// tolerance for two independent empirical CDFs at level 0.01
    pub band: f64,
    pub holds: bool,
}

/// `T(x,+1) ≤_sto T(x̃,+1)` and `T(x̃,−1) ≤_sto T(x,−1)` for `x > x̃`.
pub fn stochastic_order_check<R: Rng + ?Sized>(
    pair: &RatePair,
    x: f64,
    x_tilde: f64,
    v: Velocity,
    n: usize,
    rng: &mut R,
) -> Result<OrderReport> {
    if !(x >= x_tilde && x_tilde >= 0.0) || n == 0 {
        return Err(Error::Precondition(format!(
            "need x >= x̃ >= 0 and n > 0, got x={x}, x̃={x_tilde}, n={n}"
        )));
    }
    let mut at_x: Vec<f64> = (0..n).map(|_| sample_jump(pair, x, v, rng)).collect();
    let mut at_tilde: Vec<f64> = (0..n).map(|_| sample_jump(pair, x_tilde, v, rng)).collect();
    at_x.sort_by(f64::total_cmp);
    at_tilde.sort_by(f64::total_cmp);
    let (small, large) = match v {
        Velocity::Plus => (&at_x, &at_tilde),
        Velocity::Minus => (&at_tilde, &at_x),
    };
    let max_violation = max_cdf_excess(large, small);
    let band = 2.0 * dkw_epsilon(n, 0.01);
    Ok(OrderReport {
        max_violation,
        band,
        holds: max_violation <= band,
    })
}

/// `sup_t (F_p(t) − F_q(t))` for sorted samples.
fn max_cdf_excess(p: &[f64], q: &[f64]) -> f64 {
    let (np, nq) = (p.len() as f64, q.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best: f64 = 0.0;
    while i < p.len() || j < q.len() {
        let t = match (p.get(i), q.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => break,
        };
        while i < p.len() && p[i] <= t {
            i += 1;
        }
        while j < q.len() && q[j] <= t {
            j += 1;
        }
        best = best.max(i as f64 / np - j as f64 / nq);
    }
    best
}

/// `∫_0^∞ b(u) e^{−(B(x+u) − B(x))} h(u) du`, a helper for expectations over `T(x, +1)`.
pub fn expect_over_plus<H: Fn(f64) -> f64>(pair: &RatePair, x: f64, h: H) -> Result<f64> {
    let law = jump_law(pair, x, Velocity::Plus)?;
    let f = |t: f64| law.density(t) * h(t);
    let first = 0.5 / pair.b().value(x);
    integrate_to_infinity(&f, 0.0, first, 1e-12, |t| law.survival(t), 1e-13)
}

/// Quadrature of `E[h(T(x, −1))]`.
pub fn expect_over_minus<H: Fn(f64) -> f64>(pair: &RatePair, x: f64, h: H) -> Result<f64> {
    let law = jump_law(pair, x, Velocity::Minus)?;
    let f = |t: f64| law.density(t) * h(t);
    Ok(law.atom_mass * h(x) + adaptive_simpson(&f, 0.0, x, 1e-12))
}
