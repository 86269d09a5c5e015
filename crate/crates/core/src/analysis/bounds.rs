//! Analytic bounds on hitting and coupling times, and the search for
//! admissible parameters.

use rayon::prelude::*;
use serde::Serialize;

use crate::coupling_engine::stick_attempt;
use crate::error::{Error, Result};
use crate::jump_sampler::laplace_jump;
use crate::numerics::integrate_to_infinity;
use crate::rate_model::RatePair;
use crate::rng::replica_stream;
use crate::state::{State, Velocity};

/// `e^{−A(R)} ∫₀^∞ b(u) e^{−(B(R+u) − B(R))} du`.
pub fn p_r_lower_bound(pair: &RatePair, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("R must be positive, got {r}")));
    }
    let (a, b) = (pair.a(), pair.b());
    let br = b.integral(r);
    let f = |u: f64| b.value(u) * (-(b.integral(r + u) - br)).exp();
    // b(u) <= b(R+u), and the latter integrates to the survival
    let tail = |u: f64| (-(b.integral(r + u) - br)).exp();
    let first = 0.5 / b.value(r).max(1e-3);
    let v = integrate_to_infinity(&f, 0.0, first, 1e-12, tail, 1e-13)?;
    Ok(((-a.integral(r)).exp() * v).clamp(0.0, 1.0))
}

/// Right side minus left side of the condition defining `λ_c`.
fn lambda_c_gap(pair: &RatePair, alpha: f64, r: f64, lambda: f64) -> f64 {
    let abar = pair.a_upper();
    pair.b().value(r) * (1.0 - (-(abar + (alpha - 1.0) * lambda) * r).exp())
        - (alpha + 1.0) / (alpha - 1.0) * abar
        - (alpha + 1.0) * lambda
}

/// First `λ > 0` where the `λ_c` condition fails, to within `1e−10`.
pub fn lambda_c_search(pair: &RatePair, alpha: f64, r: f64) -> Result<f64> {
    if !(alpha > 1.0) || !(r > 0.0) {
        return Err(Error::Domain(format!(
            "need alpha > 1 and R > 0, got alpha={alpha}, R={r}"
        )));
    }
    if !pair.a_upper().is_finite() {
        return Err(Error::Infeasible("the rate a is unbounded".into()));
    }
    let g = |l: f64| lambda_c_gap(pair, alpha, r, l);
    if !(g(0.0) > 0.0) {
        return Err(Error::Infeasible(format!(
            "b(R)(1-e^(-a R)) too small for alpha={alpha}, R={r}; increase R"
        )));
    }
    let mut hi = 1e-3;
    while g(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Numerical("λ_c bracket diverged".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 * hi.max(1e-3) {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The two Laplace factors of the drift condition at level `R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub eta: f64,
    pub phi_plus: f64,
    pub phi_minus: f64,
    /// closed-form upper bound on `phi_plus · phi_minus`
    pub product_bound: f64,
}

pub fn admissibility_and_eta(
    pair: &RatePair,
    r: f64,
    lambda: f64,
    beta: f64,
) -> Result<Admissibility> {
    if !(lambda > 0.0 && lambda < beta && lambda + beta < pair.b_upper()) {
        return Err(Error::Precondition(format!(
            "need 0 < lambda < beta and lambda + beta < sup b, got lambda={lambda}, beta={beta}"
        )));
    }
    let phi_plus = laplace_jump(pair, r, Velocity::Plus, beta + lambda);
    let phi_minus = laplace_jump(pair, r, Velocity::Minus, lambda - beta);
    let product = phi_plus * phi_minus;
    let abar = pair.a_upper();
    let br = pair.b().value(r);
    let d = abar + beta - lambda;
    let plus_bound = if br > lambda + beta {
        br / (br - (lambda + beta))
    } else {
        f64::INFINITY
    };
    let minus_bound = (abar + (beta - lambda) * (-d * r).exp()) / d;
    Ok(Admissibility {
        admissible: product < 1.0,
        eta: 1.0 / product,
        phi_plus,
        phi_minus,
        product_bound: plus_bound * minus_bound,
    })
}

/// One stick attempt per replica on the grid of heights used by [`e_r_estimate`].
#[derive(Clone, Debug)]
pub struct StickSample {
    pub r: f64,
    pub heights: Vec<f64>,
    /// `(rise, failed)` per replica and height
    pub draws: Vec<Vec<(f64, bool)>>,
}

pub const ER_GRID: usize = 33;

/// Simulates `n / 33` stick attempts at each of 33 heights in `[0, R]`.
pub fn sample_sticks(pair: &RatePair, r: f64, n: usize, seed: u64) -> Result<StickSample> {
    let per = (n / ER_GRID).max(2);
    let heights: Vec<f64> = (0..ER_GRID)
        .map(|k| r * k as f64 / (ER_GRID - 1) as f64)
        .collect();
    let draws = heights
        .par_iter()
        .enumerate()
        .map(|(k, &y)| {
            (0..per)
                .map(|i| {
                    let mut rng = replica_stream(seed, (k * per + i) as u64);
                    stick_attempt(pair, y, &mut rng).map(|s| (s.rise, !s.success))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StickSample { r, heights, draws })
}

/// Grid estimate of `sup_y E_y[e^{γ U} 1{failure}]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErEstimate {
    /// largest per-height mean plus its standard error
    pub value: f64,
    pub at: f64,
    pub means: Vec<f64>,
    pub ses: Vec<f64>,
}

impl StickSample {
    pub fn estimate(&self, gamma: f64) -> ErEstimate {
        let mut means = Vec::with_capacity(self.heights.len());
        let mut ses = Vec::with_capacity(self.heights.len());
        for row in &self.draws {
            let vals: Vec<f64> = row
                .iter()
                .map(|&(u, fail)| if fail { (gamma * u).exp() } else { 0.0 })
                .collect();
            let s = crate::stats::mean_se(&vals);
            means.push(s.mean);
            ses.push(s.se);
        }
        let (k, value) = means.iter().zip(&ses).map(|(m, s)| m + s).enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (k, v)| if v > acc.1 { (k, v) } else { acc },
        );
        ErEstimate {
            value,
            at: self.heights[k],
            means,
            ses,
        }
    }

    /// Empirical success frequency at the top height `R`.
    pub fn success_at_top(&self) -> (f64, f64) {
        let row = self.draws.last().expect("grid is not empty");
        let vals: Vec<f64> = row
            .iter()
            .map(|&(_, fail)| if fail { 0.0 } else { 1.0 })
            .collect();
        let s = crate::stats::mean_se(&vals);
        (s.mean, s.se)
    }
}

pub fn e_r_estimate(
    pair: &RatePair,
    r: f64,
    gamma: f64,
    n: usize,
    seed: u64,
) -> Result<ErEstimate> {
    if !(gamma < pair.b_upper()) {
        return Err(Error::Precondition(format!(
            "gamma={gamma} must stay below sup b"
        )));
    }
    Ok(sample_sticks(pair, r, n, seed)?.estimate(gamma))
}

/// Parameters of the coupling-time bound together with derived quantities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundParams {
    #[serde(rename = "R")]
    pub r: f64,
    pub lambda: f64,
    pub beta: f64,
    pub alpha: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub eta: f64,
    #[serde(rename = "pR")]
    pub p_r: f64,
    #[serde(rename = "ER")]
    pub e_r: f64,
    pub lambda_c: f64,
    pub lambda_c_prime: f64,
    pub admissible: bool,
}

impl BoundParams {
    fn check(&self) -> Result<()> {
        if !self.admissible || !(self.e_r < 1.0) {
            return Err(Error::Precondition(format!(
                "parameters not admissible (eta={}, ER={})",
                self.eta, self.e_r
            )));
        }
        Ok(())
    }
}

/// `e^{β x 1{x>R}} φ_{(0,+1)}(λ) φ_{(R,−1)}(λ) / (1 − 𝓔_R(λ+β))` for two
/// paths glued at height `x`.
pub fn coupling_time_bound(pair: &RatePair, x: f64, p: &BoundParams) -> Result<f64> {
    p.check()?;
    let lift = if x > p.r { (p.beta * x).exp() } else { 1.0 };
    Ok(lift * stick_factor(pair, p))
}

fn stick_factor(pair: &RatePair, p: &BoundParams) -> f64 {
    laplace_jump(pair, 0.0, Velocity::Plus, p.lambda)
        * laplace_jump(pair, p.r, Velocity::Minus, p.lambda)
        / (1.0 - p.e_r)
}

/// Bound on `E[e^{λ T_*}]` for reflected paths started at `upper` and
/// `lower`, through `X_c ≤ (Z + x̃)/2` and the hitting-time bound at `λ + β/2`.
pub fn coupling_time_bound_from_starts(
    pair: &RatePair,
    upper: State,
    lower: State,
    p: &BoundParams,
) -> Result<f64> {
    p.check()?;
    if !(upper.position >= lower.position && lower.position >= 0.0) {
        return Err(Error::Precondition("need upper >= lower >= 0".into()));
    }
    let h = hitting_bound(
        pair,
        upper.position,
        upper.velocity,
        p.lambda + 0.5 * p.beta,
    )?;
    Ok(stick_factor(pair, p) * (0.5 * p.beta * lower.position).exp() * h.bound)
}

/// `√(b(M)/a(M)) e^{M(√b(M) − √a(M))²} (1 − e^{−A(M)})`; values below one
/// make `M` usable in [`hitting_bound`].
pub fn m_condition(pair: &RatePair, m: f64) -> f64 {
    let (a, b) = (pair.a().value(m), pair.b().value(m));
    let gap = b.sqrt() - a.sqrt();
    (b / a).sqrt() * (m * gap * gap).exp() * (1.0 - (-pair.a().integral(m)).exp())
}

/// Largest `M` on `(0, 50]` satisfying the condition, refined by bisection.
pub fn find_m_c(pair: &RatePair) -> Result<f64> {
    let step = 0.01;
    let n = 5000;
    let last = (1..=n)
        .rev()
        .find(|&k| m_condition(pair, k as f64 * step) < 1.0);
    let Some(k) = last else {
        return Err(Error::Infeasible(
            "no M on (0, 50] satisfies the hitting condition".into(),
        ));
    };
    if k == n {
        return Ok(n as f64 * step);
    }
    let (mut lo, mut hi) = (k as f64 * step, (k + 1) as f64 * step);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if m_condition(pair, mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Optimized Lyapunov exponents `(α, β, ρ)` at level `M`.
pub fn optimized_lyapunov(pair: &RatePair, m: f64) -> (f64, f64, f64) {
    let (a, b) = (pair.a().value(m), pair.b().value(m));
    let alpha = 0.5 * (b - a);
    let beta = 0.25 * (b.ln() - a.ln());
    let rho = 0.5 * (b.sqrt() - a.sqrt()).powi(2);
    (alpha, beta, rho)
}

/// Hitting-time bound `E[e^{λZ(x,v)}] ≤ C e^{(x∨M)(b(M)−a(M))/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HittingBound {
    #[serde(rename = "M_c")]
    pub m_c: f64,
    pub rho: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub bound: f64,
    /// the case-wise estimate before the constant is factored out
    pub direct: f64,
}

pub fn hitting_bound(pair: &RatePair, x: f64, v: Velocity, lambda: f64) -> Result<HittingBound> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("x must be nonnegative, got {x}")));
    }
    let m = find_m_c(pair)?;
    let (alpha, beta, rho) = optimized_lyapunov(pair, m);
    if !(lambda <= rho) {
        return Err(Error::Precondition(format!(
            "lambda={lambda} exceeds rho(M_c)={rho}"
        )));
    }
    let am = pair.a().integral(m);
    let stay = 1.0 - (-am).exp();
    let ratio = lambda.max(0.0) / rho;
    let denom = 1.0 - stay * (2.0 * lambda * m + 2.0 * ratio * beta).exp();
    if !(denom > 0.0) {
        return Err(Error::Infeasible(format!(
            "hitting bound diverges at lambda={lambda}"
        )));
    }
    let phi = (-am + lambda * m).exp() / denom;
    let c = (-alpha * m + lambda * m + 2.0 * ratio * beta).exp() * phi;
    let bound = c * (alpha * x.max(m)).exp();
    let direct = if x >= m {
        (ratio * (alpha * (x - m) + beta * (v.value() + 1.0))).exp() * phi
    } else if v == Velocity::Minus {
        phi
    } else {
        (lambda * m + 2.0 * ratio * beta).exp() * phi
    };
    Ok(HittingBound {
        m_c: m,
        rho,
        c,
        bound,
        direct,
    })
}

/// Drift ratios `Af/f` of `f(x,v) = e^{αx+βv}` on a grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftReport {
    #[serde(rename = "M")]
    pub m: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `−ρ(M)` for the optimized exponents
    pub target: f64,
    pub grid: Vec<f64>,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    pub sup_plus: f64,
    pub sup_minus: f64,
    /// largest `|max(plus, minus) − target|` over the grid points above `M`
    pub max_deviation: f64,
}

pub fn drift_ratios(pair: &RatePair, alpha: f64, beta: f64, x: f64) -> (f64, f64) {
    let plus = alpha - pair.b().value(x) * (1.0 - (-2.0 * beta).exp());
    let minus = -alpha + pair.a().value(x) * ((2.0 * beta).exp() - 1.0);
    (plus, minus)
}

pub fn lyapunov_drift_check(
    pair: &RatePair,
    alpha: f64,
    beta: f64,
    m: f64,
    grid: &[f64],
) -> Result<DriftReport> {
    if !(alpha > 0.0 && beta > 0.0 && m > 0.0) {
        return Err(Error::Domain("alpha, beta and M must be positive".into()));
    }
    let (a, b) = (pair.a().value(m), pair.b().value(m));
    let target = -0.5 * (b.sqrt() - a.sqrt()).powi(2);
    let pts: Vec<f64> = grid.iter().copied().filter(|&x| x > m).collect();
    let (plus, minus): (Vec<f64>, Vec<f64>) = pts
        .iter()
        .map(|&x| drift_ratios(pair, alpha, beta, x))
        .unzip();
    let sup = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_deviation = plus
        .iter()
        .zip(&minus)
        .map(|(p, q)| (p.max(*q) - target).abs())
        .fold(0.0, f64::max);
    Ok(DriftReport {
        m,
        alpha,
        beta,
        target,
        sup_plus: sup(&plus),
        sup_minus: sup(&minus),
        grid: pts,
        plus,
        minus,
        max_deviation,
    })
}

/// Settings for the automated parameter search.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub alphas: Vec<f64>,
    pub r_step: f64,
    pub r_max: f64,
    /// stick attempts used for 𝓔_R
    pub samples: usize,
    pub seed: u64,
    /// also keep `λ + β/2` within reach of the hitting-time bound
    pub with_hitting: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            alphas: vec![2.0, 3.0, 5.0],
            r_step: 0.25,
            r_max: 50.0,
            samples: 99_000,
            seed: 17,
            with_hitting: true,
        }
    }
}

/// Finds admissible `(R, λ, β)`: smallest feasible `R` on the scan, then
/// `λ = min(λ_c, λ'_c)/2` (also capped by the hitting-time range when
/// requested), halved until the drift condition holds. Returns the choice
/// with the largest `λ` over the configured `α`.
pub fn search_parameters(pair: &RatePair, cfg: &SearchConfig) -> Result<BoundParams> {
    let m = find_m_c(pair).ok();
    let mut best: Option<BoundParams> = None;
    for &alpha in &cfg.alphas {
        let Some(found) = search_alpha(pair, alpha, m, cfg)? else {
            continue;
        };
        if best.is_none_or(|b| found.lambda > b.lambda) {
            best = Some(found);
        }
    }
    best.ok_or_else(|| Error::Infeasible("no admissible (R, lambda, beta) found".into()))
}

fn search_alpha(
    pair: &RatePair,
    alpha: f64,
    m: Option<f64>,
    cfg: &SearchConfig,
) -> Result<Option<BoundParams>> {
    let mut r = cfg.r_step;
    let lambda_c = loop {
        if r > cfg.r_max {
            return Ok(None);
        }
        match lambda_c_search(pair, alpha, r) {
            Ok(l) => break l,
            Err(Error::Infeasible(_)) => r += cfg.r_step,
            Err(e) => return Err(e),
        }
    };
    let sticks = sample_sticks(pair, r, cfg.samples, cfg.seed)?;
    let below_one = |l: f64| sticks.estimate((alpha + 1.0) * l).value < 1.0;
    let lambda_c_prime = if below_one(lambda_c) {
        lambda_c
    } else {
        let (mut lo, mut hi) = (0.0, lambda_c);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if below_one(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    if !(lambda_c_prime > 0.0) {
        return Ok(None);
    }
    let mut cap = lambda_c.min(lambda_c_prime);
    let mut m_used = f64::NAN;
    if cfg.with_hitting {
        let Some(m) = m else { return Ok(None) };
        let (_, _, rho) = optimized_lyapunov(pair, m);
        cap = cap.min(rho / (1.0 + 0.5 * alpha));
        m_used = m;
    }
    let mut lambda = 0.5 * cap;
    for _ in 0..40 {
        let beta = alpha * lambda;
        let adm = admissibility_and_eta(pair, r, lambda, beta)?;
        let er = sticks.estimate(lambda + beta).value;
        if adm.admissible && er < 1.0 {
            return Ok(Some(BoundParams {
                r,
                lambda,
                beta,
                alpha,
                m: m_used,
                eta: adm.eta,
                p_r: p_r_lower_bound(pair, r)?,
                e_r: er,
                lambda_c,
                lambda_c_prime,
                admissible: true,
            }));
        }
        lambda *= 0.5;
    }
    Ok(None)
}

/// JSON-facing summary of a bound computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    #[serde(rename = "R")]
    pub r: f64,
    pub lambda: f64,
    pub beta: f64,
    pub alpha: f64,
    pub eta: f64,
    #[serde(rename = "pR")]
    pub p_r: f64,
    #[serde(rename = "ER")]
    pub e_r: f64,
    pub bound: f64,
    pub admissible: bool,
}

impl BoundReport {
    pub fn new(p: &BoundParams, bound: f64) -> Self {
        BoundReport {
            r: p.r,
            lambda: p.lambda,
            beta: p.beta,
            alpha: p.alpha,
            eta: p.eta,
            p_r: p.p_r,
            e_r: p.e_r,
            bound,
            admissible: p.admissible,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate_model::RateSpec;

    fn gaussian() -> RatePair {
        RatePair::affine(1.0, 1.0).unwrap()
    }

    #[test]
    fn p_r_constant_rates_closed_form() {
        let pair = RatePair::constant(1.0, 2.0).unwrap();
        for &r in &[0.5, 1.0, 3.0] {
            let v = p_r_lower_bound(&pair, r).unwrap();
            assert!((v - (-r).exp()).abs() < 1e-10, "{v}");
        }
    }

    #[test]
    fn p_r_tends_to_one_at_the_origin() {
        let v = p_r_lower_bound(&gaussian(), 1e-9).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
        let v = p_r_lower_bound(&gaussian(), 1.0).unwrap();
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn lambda_c_is_a_root_of_the_condition() {
        let pair = gaussian();
        assert!(matches!(
            lambda_c_search(&pair, 3.0, 0.01),
            Err(Error::Infeasible(_))
        ));
        let l = lambda_c_search(&pair, 3.0, 10.0).unwrap();
        assert!(l > 0.0);
        assert!(lambda_c_gap(&pair, 3.0, 10.0, l - 1e-6) > 0.0);
        assert!(lambda_c_gap(&pair, 3.0, 10.0, l + 1e-6) <= 0.0);
    }

    #[test]
    fn drift_product_respects_its_closed_form_bound() {
        let pair = RatePair::constant(1.0, 2.0).unwrap();
        let adm = admissibility_and_eta(&pair, 1.0, 0.01, 0.05).unwrap();
        // both factors are attained for constant rates
        assert!((adm.phi_plus * adm.phi_minus - adm.product_bound).abs() < 1e-9);
        // 2/1.94 · (1 + 0.04 e^{-1.04})/1.04 ≈ 1.0053
        assert!(!adm.admissible && adm.eta < 1.0);
        assert!((adm.eta - 1.0 / 1.005_26).abs() < 1e-4);
    }

    #[test]
    fn drift_preconditions() {
        assert!(admissibility_and_eta(&gaussian(), 1.0, 0.1, 0.05).is_err());
    }

    #[test]
    fn optimized_exponents_equalize_the_channels_at_m() {
        let pair = gaussian();
        let (alpha, beta, rho) = optimized_lyapunov(&pair, 2.0);
        let (p, q) = drift_ratios(&pair, alpha, beta, 2.0);
        assert!((p + rho).abs() < 1e-12 && (q + rho).abs() < 1e-12);
    }

    #[test]
    fn constant_rates_have_flat_drift() {
        let pair = RatePair::constant(1.0, 3.0).unwrap();
        let (alpha, beta, _) = optimized_lyapunov(&pair, 1.0);
        let grid: Vec<f64> = (0..50).map(|k| 1.0 + 0.3 * k as f64).collect();
        let rep = lyapunov_drift_check(&pair, alpha, beta, 1.0, &grid).unwrap();
        assert!(rep.plus.iter().all(|p| (p - rep.plus[0]).abs() < 1e-14));
        assert!(rep.max_deviation < 1e-12);
    }

    #[test]
    fn oversized_alpha_gives_positive_drift() {
        let pair = gaussian();
        let beta: f64 = 0.2;
        let alpha = 10.0 * pair.b().value(3.0) * (1.0 - (-2.0f64 * beta).exp());
        let rep = lyapunov_drift_check(&pair, alpha, beta, 1.0, &[2.0, 3.0]).unwrap();
        assert!(rep.sup_plus > 0.0);
    }

    #[test]
    fn hitting_bound_at_zero_lambda_is_at_least_one() {
        let h = hitting_bound(&gaussian(), 2.0, Velocity::Minus, 0.0).unwrap();
        assert!(h.bound >= 1.0 && h.direct >= 1.0 - 1e-12);
        assert!(h.direct <= h.bound * (1.0 + 1e-12));
    }

    #[test]
    fn m_c_satisfies_the_condition() {
        let pair = gaussian();
        let m = find_m_c(&pair).unwrap();
        assert!(m_condition(&pair, m) < 1.0);
        assert!(m_condition(&pair, m + 1e-6) >= 1.0 - 1e-9);
    }

    #[test]
    fn constant_rate_sticks_fail_off_the_atom() {
        let pair = RatePair::new(RateSpec::constant(1.0), RateSpec::constant(2.0)).unwrap();
        let s = sample_sticks(&pair, 1.0, 33 * 4000, 3).unwrap();
        let (freq, se) = s.success_at_top();
        let expected = (-1.0f64).exp();
        assert!((freq - expected).abs() < 4.0 * se, "{freq} vs {expected}");
    }

    #[test]
    fn zero_gamma_estimate_is_a_failure_probability() {
        let pair = gaussian();
        let s = sample_sticks(&pair, 1.0, 33 * 2000, 4).unwrap();
        let e = s.estimate(0.0);
        let p = p_r_lower_bound(&pair, 1.0).unwrap();
        assert!(e.value <= 1.0 - p + 3.0 * e.ses.iter().copied().fold(0.0, f64::max) + 1e-12);
    }
}
