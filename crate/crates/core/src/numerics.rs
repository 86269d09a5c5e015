//! Quadrature and root finding used throughout the crate.
//!
//! Everything here works on plain `Fn(f64) -> f64` closures. Integrated rates
//! are `C^1` and strictly increasing, so a bracketing bisection followed by a
//! safeguarded Newton polish is enough for every inversion we need.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let fa = f(lo);
    let fb = f(hi);
    let m = 0.5 * (lo + hi);
    let fm = f(m);
    let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    sign * simpson_step(f, lo, hi, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || (b - a) <= f64::EPSILON * a.abs().max(1.0) {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson applied piecewise on `[a, b]` split into pieces no wider
/// than `max_piece`. Keeps the first subdivision from missing narrow features.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_piece: f64) -> f64 {
    if b == a {
        return 0.0;
    }
    if b < a {
        return -integrate_pieces(f, b, a, tol, max_piece);
    }
    let pieces = ((b - a) / max_piece).ceil().max(1.0) as usize;
    let width = (b - a) / pieces as f64;
    let piece_tol = tol / pieces as f64;
    (0..pieces)
        .map(|k| {
            let lo = a + k as f64 * width;
            let hi = if k + 1 == pieces { b } else { lo + width };
            adaptive_simpson(f, lo, hi, piece_tol)
        })
        .sum()
}

/// Integrates `f` over `[a, ∞)`.
///
/// `tail(t)` must bound `∫_t^∞ f` from above once it returns a finite value.
/// Pieces start at width `first_piece` and grow geometrically; integration
/// stops as soon as the tail bound drops below `tail_tol`.
pub fn integrate_to_infinity<F, T>(
    f: &F,
    a: f64,
    first_piece: f64,
    tol: f64,
    tail: T,
    tail_tol: f64,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    T: Fn(f64) -> f64,
{
    let mut total = 0.0;
    let mut lo = a;
    let mut width = first_piece;
    for _ in 0..20_000 {
        let hi = lo + width;
        let piece = adaptive_simpson(f, lo, hi, tol);
        if !piece.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite integrand on [{lo}, {hi}]"
            )));
        }
        total += piece;
        lo = hi;
        let bound = tail(lo);
        if bound.is_finite() && bound <= tail_tol * total.abs().max(1.0) {
            return Ok(total);
        }
        width = (width * 1.1).min(64.0 * first_piece.max(1.0));
    }
    Err(Error::Numerical("tail integration did not converge".into()))
}

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Five-point Gauss–Legendre rule on `[a, b]`; exact for polynomials of degree ≤ 9.
pub fn gauss_legendre5<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GL5_NODES
        .iter()
        .zip(GL5_WEIGHTS.iter())
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Solves `g(x) = target` for increasing `g` on the bracket `[lo, hi]`.
///
/// Bisection shrinks the bracket, then Newton steps (using `dg`) polish the
/// root; any Newton step leaving the bracket falls back to bisection.
pub fn solve_increasing<G, D>(
    g: G,
    dg: D,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64>
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    if !(lo <= hi) || !target.is_finite() {
        return Err(Error::Numerical(format!(
            "bad bracket [{lo}, {hi}] for target {target}"
        )));
    }
    let glo = g(lo) - target;
    if glo >= 0.0 {
        return Ok(lo);
    }
    let ghi = g(hi) - target;
    if ghi < 0.0 {
        return Err(Error::Numerical(format!(
            "target {target} not bracketed by [{lo}, {hi}]"
        )));
    }
    // coarse bisection: bring the bracket down to a width where Newton is safe
    for _ in 0..200 {
        if hi - lo <= 1e-3 * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) - target < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let r = g(x) - target;
        if r == 0.0 {
            return Ok(x);
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = dg(x);
        let mut next = if d > 0.0 && d.is_finite() {
            x - r / d
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - x).abs();
        x = next;
        if step <= tol.min(1e-12 * x.abs().max(1.0)) || hi - lo <= tol * 1e-3 {
            return Ok(x);
        }
    }
    if hi - lo <= tol {
        Ok(x)
    } else {
        Err(Error::Numerical("root polish did not converge".into()))
    }
}

/// Doubles `hi` from `start` until `g(hi) >= target`.
pub fn bracket_increasing<G: Fn(f64) -> f64>(g: G, target: f64, start: f64) -> Result<f64> {
    let mut hi = start.max(1e-3);
    for _ in 0..2100 {
        if g(hi) >= target {
            return Ok(hi);
        }
        hi *= 2.0;
        if !hi.is_finite() {
            break;
        }
    }
    Err(Error::Numerical(format!(
        "could not bracket target {target}"
    )))
}

/// Finds the smallest root of a decreasing-then-negative function by bisection:
/// requires `h(lo) > 0 >= h(hi)`.
pub fn bisect_sign_change<H: Fn(f64) -> f64>(h: H, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_smooth_functions() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-11);
        let v = adaptive_simpson(&|x: f64| (-x).exp(), 2.0, 0.0, 1e-12);
        assert!((v + (1.0 - (-2.0f64).exp())).abs() < 1e-11);
    }

    #[test]
    fn simpson_handles_kinks() {
        let v = integrate_pieces(&|x: f64| x.abs(), -1.0, 2.0, 1e-12, 0.5);
        assert!((v - 2.5).abs() < 1e-10);
    }

    #[test]
    fn tail_integration_of_exponential() {
        let v = integrate_to_infinity(
            &|x: f64| 3.0 * (-3.0 * x).exp(),
            0.0,
            0.5,
            1e-13,
            |t| (-3.0 * t).exp(),
            1e-14,
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-11);
    }

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        let v = gauss_legendre5(&|x: f64| x.powi(9) + 3.0 * x.powi(4), -1.0, 2.0);
        let exact = (2f64.powi(10) - 1.0) / 10.0 + 3.0 * (2f64.powi(5) + 1.0) / 5.0;
        assert!((v - exact).abs() < 1e-10);
    }

    #[test]
    fn newton_polish_reaches_tight_tolerance() {
        let x =
            solve_increasing(|x: f64| x + x * x / 2.0, |x| 1.0 + x, 4.0, 0.0, 10.0, 1e-12).unwrap();
        assert!((x - 2.0).abs() < 1e-12);
    }

    #[test]
    fn solver_rejects_unbracketed_targets() {
        assert!(solve_increasing(|x: f64| x, |_| 1.0, 5.0, 0.0, 1.0, 1e-12).is_err());
    }
}
