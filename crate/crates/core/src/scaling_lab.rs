//! Diffusive scaling of the telegraph process.
//!
//! For a family with `a_N ≡ level·N` and `b_N(y) = level·N + gap + slope·|y|`
//! the time change `τ_N' = (a_N + b_N)(Y)/2` turns `Y^(N)` into
//! `ξ^(N)_t = Y^(N)_{τ_N(t)}`, which converges to the solution of
//! `dξ = dB − (sgn(ξ)c1(ξ) + c2(ξ)) dt` with `c1(y) = (gap + slope·|y|)/2`
//! and `c2 = 0`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::analysis::{freedman_diaconis, tv_distance, EmpiricalLaw};
use crate::error::{Error, Result};
use crate::numerics::gauss_legendre5;
use crate::pdmp_sim::{unfold, Walker};
use crate::rate_model::{RatePair, RateSpec};
use crate::rng::replica_stream;
use crate::state::{sgn, State, Velocity};
use crate::stats::{ks_one_sample, ks_two_sample, mean_se, raw_moments};

/// Member `N` of an affine scaling family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFamily {
    #[serde(rename = "N")]
    pub n: u32,
    pub level: f64,
    #[serde(default)]
    pub gap: f64,
    pub slope: f64,
}

impl ScalingFamily {
    pub fn new(n: u32, level: f64, gap: f64, slope: f64) -> Result<Self> {
        let f = ScalingFamily {
            n,
            level,
            gap,
            slope,
        };
        f.check()?;
        Ok(f)
    }

    /// `a_N ≡ N`, `b_N(y) = N + 2|y|`, whose limit is `dξ = dB − ξ dt`.
    pub fn ornstein_uhlenbeck(n: u32) -> Self {
        ScalingFamily {
            n,
            level: 1.0,
            gap: 0.0,
            slope: 2.0,
        }
    }

    fn check(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("scaling index must be positive".into()));
        }
        if !(self.level > 0.0 && self.level.is_finite()) {
            return Err(Error::Domain(format!(
                "level must be positive, got {}",
                self.level
            )));
        }
        if !(self.gap >= 0.0 && self.slope >= 0.0 && self.gap + self.slope > 0.0) {
            return Err(Error::Domain(
                "gap and slope must be non-negative, not both zero".into(),
            ));
        }
        if !(self.gap.is_finite() && self.slope.is_finite()) {
            return Err(Error::Domain("gap and slope must be finite".into()));
        }
        Ok(())
    }

    pub fn pair(&self) -> Result<RatePair> {
        self.check()?;
        let base = self.level * self.n as f64;
        RatePair::new(
            RateSpec::constant(base),
            RateSpec::affine(base + self.gap, self.slope),
        )
    }

    /// `(a_N + b_N)(y) = c + k|y|` as `(c, k)`.
    pub fn rate_sum(&self) -> (f64, f64) {
        (2.0 * self.level * self.n as f64 + self.gap, self.slope)
    }

    pub fn c1(&self, y: f64) -> f64 {
        0.5 * (self.gap + self.slope * y.abs())
    }

    pub fn c2(&self, _y: f64) -> f64 {
        0.0
    }

    /// Drift `sgn(y)c1(y) + c2(y)` subtracted in the limit equation.
    pub fn limit_drift(&self, y: f64) -> f64 {
        sgn(y) * self.c1(y) + self.c2(y)
    }

    fn same_limit(&self, other: &ScalingFamily) -> bool {
        self.gap == other.gap && self.slope == other.slope
    }

    /// Mean and standard deviation of the limit at time `t` from `xi0`, when
    /// the limit is Gaussian (`gap = 0`).
    pub fn limit_marginal(&self, xi0: f64, t: f64) -> Option<(f64, f64)> {
        if self.gap != 0.0 {
            return None;
        }
        let theta = 0.5 * self.slope;
        let var = if theta == 0.0 {
            t
        } else {
            -(-2.0 * theta * t).exp_m1() / (2.0 * theta)
        };
        Some((xi0 * (-theta * t).exp(), var.sqrt()))
    }
}

/// A linear stretch of the reflected path: `|Y|` moves from `x` with
/// velocity `v` under sign `sign`, starting at `τ = tau` and `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Knot {
    pub t: f64,
    pub tau: f64,
    pub x: f64,
    pub v: Velocity,
    pub sign: f64,
}

/// `τ_N` and its inverse along one simulated path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeChange {
    pub c: f64,
    pub k: f64,
    pub knots: Vec<Knot>,
    pub horizon: f64,
}

/// Elapsed `t` while `|Y|` runs from `x` with velocity `v` for `s` units of `τ`.
fn t_span(c: f64, k: f64, x: f64, v: Velocity, s: f64) -> f64 {
    let g = c + k * x;
    let kv = k * v.value();
    if kv == 0.0 {
        2.0 * s / g
    } else {
        2.0 / kv * (kv * s / g).ln_1p()
    }
}

/// Inverse of [`t_span`] in `s`; infinite when `|Y|` cannot run that long.
fn tau_span(c: f64, k: f64, x: f64, v: Velocity, dt: f64) -> f64 {
    let g = c + k * x;
    let kv = k * v.value();
    if kv == 0.0 {
        0.5 * g * dt
    } else {
        g * (0.5 * kv * dt).exp_m1() / kv
    }
}

impl TimeChange {
    fn piece(&self, by_t: bool, q: f64) -> &Knot {
        let i = self
            .knots
            .partition_point(|k| if by_t { k.t <= q } else { k.tau <= q });
        &self.knots[i.max(1) - 1]
    }

    /// `τ_N(t)` for `0 ≤ t ≤ horizon`.
    pub fn tau_at(&self, t: f64) -> f64 {
        let k = self.piece(true, t);
        k.tau + tau_span(self.c, self.k, k.x, k.v, t - k.t)
    }

    /// `τ_N^{-1}(τ)`.
    pub fn t_at(&self, tau: f64) -> f64 {
        let k = self.piece(false, tau);
        k.t + t_span(self.c, self.k, k.x, k.v, tau - k.tau)
    }

    /// `ξ^(N)_t`.
    pub fn xi_at(&self, t: f64) -> f64 {
        let k = self.piece(true, t);
        let s = tau_span(self.c, self.k, k.x, k.v, t - k.t);
        let x = (k.x + k.v.value() * s).max(0.0);
        unfold(k.sign, x, k.v).0
    }
}

/// One stretch handed to a [`drive`] visitor, lasting `s` units of `τ`.
#[derive(Clone, Copy, Debug)]
struct Piece {
    knot: Knot,
    s: f64,
}

/// Runs `Y^(N)` from `start` until `ξ`-time `t_end`, visiting each stretch,
/// and returns the final unreflected state.
fn drive<R, V>(
    family: &ScalingFamily,
    pair: &RatePair,
    start: State,
    t_end: f64,
    rng: &mut R,
    mut visit: V,
) -> Result<State>
where
    R: Rng + ?Sized,
    V: FnMut(&Piece),
{
    let (c, k) = family.rate_sum();
    let mut w = Walker::signed(pair, start.position, start.velocity, 0.0, rng);
    let mut t = 0.0;
    loop {
        let knot = Knot {
            t,
            tau: w.clock(),
            x: w.position(),
            v: w.velocity(),
            sign: w.sign(),
        };
        let s_full = w.next_event().0 - w.clock();
        let dt_full = t_span(c, k, knot.x, knot.v, s_full);
        if t + dt_full >= t_end {
            let s = tau_span(c, k, knot.x, knot.v, t_end - t).min(s_full);
            visit(&Piece { knot, s });
            w.advance_to(w.clock() + s);
            return Ok(w.signed_state());
        }
        visit(&Piece { knot, s: s_full });
        w.step(rng)?;
        t += dt_full;
    }
}

/// Initial velocity of the scaled process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialVelocity {
    Plus,
    Minus,
    /// `±1` with probability one half each
    Uniform,
}

impl InitialVelocity {
    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> Velocity {
        match self {
            InitialVelocity::Plus => Velocity::Plus,
            InitialVelocity::Minus => Velocity::Minus,
            InitialVelocity::Uniform => {
                if rng.random::<bool>() {
                    Velocity::Plus
                } else {
                    Velocity::Minus
                }
            }
        }
    }
}

fn check_horizon(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("horizon must be positive, got {h}")));
    }
    Ok(())
}

/// Simulates `ξ^(N)` on `[0, horizon]` and returns its time change, from
/// which `ξ^(N)` can be read at any time.
pub fn simulate_scaled<R: Rng + ?Sized>(
    family: &ScalingFamily,
    y0: f64,
    w0: InitialVelocity,
    horizon: f64,
    rng: &mut R,
) -> Result<TimeChange> {
    check_horizon(horizon)?;
    let pair = family.pair()?;
    let (c, k) = family.rate_sum();
    let v = w0.draw(rng);
    let mut knots = Vec::new();
    drive(family, &pair, State::new(y0, v), horizon, rng, |p| {
        knots.push(p.knot)
    })?;
    Ok(TimeChange {
        c,
        k,
        knots,
        horizon,
    })
}

/// `ξ^(N)` on the uniform grid `0, step, 2·step, … ≤ horizon`.
pub fn sample_scaled_grid<R: Rng + ?Sized>(
    family: &ScalingFamily,
    y0: f64,
    w0: InitialVelocity,
    horizon: f64,
    step: f64,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    if !(step > 0.0) {
        return Err(Error::Domain(format!(
            "grid step must be positive, got {step}"
        )));
    }
    let tc = simulate_scaled(family, y0, w0, horizon, rng)?;
    let m = (horizon / step + 1e-9).floor() as usize;
    Ok((0..=m)
        .map(|i| i as f64 * step)
        .map(|t| (t, tc.xi_at(t)))
        .collect())
}

/// `ξ^(N)_t` alone, without storing the path.
pub fn scaled_marginal<R: Rng + ?Sized>(
    family: &ScalingFamily,
    y0: f64,
    w0: InitialVelocity,
    t: f64,
    rng: &mut R,
) -> Result<f64> {
    let pair = family.pair()?;
    let v = w0.draw(rng);
    if t == 0.0 {
        return Ok(y0);
    }
    Ok(drive(family, &pair, State::new(y0, v), t, rng, |_| {})?.position)
}

/// Euler–Maruyama path of `dξ = dB − (sgn(ξ)c1(ξ) + c2(ξ)) dt` at every step.
pub fn simulate_limit_sde<C1, C2, R>(
    c1: C1,
    c2: C2,
    xi0: f64,
    horizon: f64,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<f64>>
where
    C1: Fn(f64) -> f64,
    C2: Fn(f64) -> f64,
    R: Rng + ?Sized,
{
    check_horizon(horizon)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("step must be positive, got {dt}")));
    }
    let steps = (horizon / dt).round().max(1.0) as usize;
    let h = horizon / steps as f64;
    let sq = h.sqrt();
    let mut path = Vec::with_capacity(steps + 1);
    let mut x = xi0;
    path.push(x);
    for _ in 0..steps {
        let z: f64 = rng.sample(StandardNormal);
        x += -(sgn(x) * c1(x) + c2(x)) * h + sq * z;
        path.push(x);
    }
    Ok(path)
}

/// Euler–Maruyama endpoints at steps `dt` and `dt/2` driven by the same
/// Brownian increments.
fn euler_pair<D: Fn(f64) -> f64, R: Rng + ?Sized>(
    drift: &D,
    xi0: f64,
    horizon: f64,
    dt: f64,
    rng: &mut R,
) -> (f64, f64) {
    let steps = (horizon / dt).round().max(1.0) as usize;
    let h = horizon / steps as f64;
    let half = 0.5 * h;
    let sq = half.sqrt();
    let (mut coarse, mut fine) = (xi0, xi0);
    for _ in 0..steps {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        fine += -drift(fine) * half + sq * z1;
        fine += -drift(fine) * half + sq * z2;
        coarse += -drift(coarse) * h + sq * (z1 + z2);
    }
    (coarse, fine)
}

/// Per-member line of a [`WeakConvergenceReport`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MemberReport {
    #[serde(rename = "N")]
    pub n: u32,
    /// two-sample KS distance to the Euler reference
    pub ks: f64,
    /// KS distance to the exact Gaussian limit marginal, when available
    pub ks_exact: Option<f64>,
    pub moments: [f64; 4],
    pub se: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakConvergenceReport {
    pub t: f64,
    pub y0: f64,
    pub replicas: usize,
    pub dt: f64,
    /// KS distance between the Euler references at `dt` and `dt/2`
    pub richardson_ks: f64,
    pub reference_moments: [f64; 4],
    pub members: Vec<MemberReport>,
    /// KS to the reference strictly decreases along the members
    pub ks_decreasing: bool,
    pub ks_exact_decreasing: Option<bool>,
}

/// Reference step of the limit equation.
pub const REFERENCE_DT: f64 = 1e-3;

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

/// Compares the law of `ξ^(N)_t` for each member against the limit equation.
///
/// All members must share the same limit. Each member uses the same
/// replica streams; the reference uses streams of its own.
pub fn weak_convergence_report(
    families: &[ScalingFamily],
    y0: f64,
    w0: InitialVelocity,
    t: f64,
    replicas: usize,
    seed: u64,
) -> Result<WeakConvergenceReport> {
    if families.len() < 2 {
        return Err(Error::Precondition(
            "weak convergence needs at least two members".into(),
        ));
    }
    if replicas < 2 {
        return Err(Error::Domain("need at least two replicas".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be non-negative, got {t}")));
    }
    let first = families[0];
    if families.iter().any(|f| !f.same_limit(&first)) {
        return Err(Error::Precondition("members have different limits".into()));
    }
    for f in families {
        f.check()?;
    }
    let drift = |x: f64| first.limit_drift(x);
    let reference: Vec<(f64, f64)> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_stream(seed ^ 0x5DEE_CE66_D1CE_4E5B, i);
            if t == 0.0 {
                (y0, y0)
            } else {
                euler_pair(&drift, y0, t, REFERENCE_DT, &mut rng)
            }
        })
        .collect();
    let coarse: Vec<f64> = reference.iter().map(|r| r.0).collect();
    let fine: Vec<f64> = reference.iter().map(|r| r.1).collect();
    let richardson_ks = ks_two_sample(&coarse, &fine).statistic;
    let exact = first.limit_marginal(y0, t);
    let mut members = Vec::with_capacity(families.len());
    for f in families {
        let xs = (0..replicas as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = replica_stream(seed, i);
                scaled_marginal(f, y0, w0, t, &mut rng)
            })
            .collect::<Result<Vec<f64>>>()?;
        let ks = ks_two_sample(&xs, &coarse).statistic;
        let ks_exact = exact.map(|(m, sd)| {
            if sd == 0.0 {
                xs.iter().filter(|&&x| x != m).count() as f64 / xs.len() as f64
            } else {
                let normal = Normal::new(m, sd).expect("positive sd");
                ks_one_sample(&xs, |x| normal.cdf(x)).statistic
            }
        });
        let (moments, se) = raw_moments(&xs);
        members.push(MemberReport {
            n: f.n,
            ks,
            ks_exact,
            moments,
            se,
        });
    }
    let ks: Vec<f64> = members.iter().map(|m| m.ks).collect();
    let ks_exact: Option<Vec<f64>> = members.iter().map(|m| m.ks_exact).collect();
    Ok(WeakConvergenceReport {
        t,
        y0,
        replicas,
        dt: REFERENCE_DT,
        richardson_ks,
        reference_moments: raw_moments(&coarse).0,
        ks_decreasing: strictly_decreasing(&ks),
        ks_exact_decreasing: ks_exact.map(|v| strictly_decreasing(&v)),
        members,
    })
}

/// Monte Carlo means of the martingale increments at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MartingaleReport {
    #[serde(rename = "N")]
    pub n: u32,
    pub t: f64,
    pub replicas: usize,
    /// mean and SE of `M_t − M_0`
    pub mean: f64,
    pub se: f64,
    /// mean and SE of the compensated square
    pub square_mean: f64,
    pub square_se: f64,
}

/// `(M_t − M_0, compensated square)` along one path.
///
/// With `κ = 1/(a_N + b_N)`, `M = Y + κ(Y)W − ∫(W + κ'(Y) − 2rκW)` and its
/// square is compensated by `∫4rκ²`, where `r` is the current switching rate.
fn martingale_sample<R: Rng + ?Sized>(
    family: &ScalingFamily,
    pair: &RatePair,
    y0: f64,
    w0: InitialVelocity,
    t: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let (c, k) = family.rate_sum();
    let v = w0.draw(rng);
    let kappa = |x: f64| 1.0 / (c + k * x);
    let mut drift = 0.0;
    let mut bracket = 0.0;
    let end = drive(family, pair, State::new(y0, v), t, rng, |p| {
        let Knot { x, v, sign, .. } = p.knot;
        let w = unfold(sign, 1.0, v).1.value();
        let dir = v.value();
        let rate = |x: f64| match v {
            Velocity::Plus => pair.b().value(x),
            Velocity::Minus => pair.a().value(x),
        };
        // d/dy κ(|y|) with sgn(0) = +1
        let kprime = |x: f64| -sign * k * kappa(x).powi(2);
        let at = |u: f64| (x + dir * u).max(0.0);
        drift += gauss_legendre5(
            &|u: f64| w + kprime(at(u)) - 2.0 * rate(at(u)) * kappa(at(u)) * w,
            0.0,
            p.s,
        );
        bracket += gauss_legendre5(&|u: f64| 4.0 * rate(at(u)) * kappa(at(u)).powi(2), 0.0, p.s);
    })?;
    let f = |s: State| s.position + kappa(s.position.abs()) * s.velocity.value();
    let m = f(end) - f(State::new(y0, v)) - drift;
    Ok((m, m * m - bracket))
}

/// Checks that `M_t − M_0` and its compensated square have mean zero.
pub fn martingale_diagnostic(
    family: &ScalingFamily,
    y0: f64,
    w0: InitialVelocity,
    t: f64,
    replicas: usize,
    seed: u64,
) -> Result<MartingaleReport> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    if replicas < 2 {
        return Err(Error::Domain("need at least two replicas".into()));
    }
    let pair = family.pair()?;
    let samples = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_stream(seed, i);
            martingale_sample(family, &pair, y0, w0, t, &mut rng)
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let m = mean_se(&samples.iter().map(|s| s.0).collect::<Vec<_>>());
    let q = mean_se(&samples.iter().map(|s| s.1).collect::<Vec<_>>());
    Ok(MartingaleReport {
        n: family.n,
        t,
        replicas,
        mean: m.mean,
        se: m.se,
        square_mean: q.mean,
        square_se: q.se,
    })
}

/// Long-run Euler histogram against the stationary density `∝ e^{−2U}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationaryReport {
    pub tv: f64,
    pub nbins: usize,
    pub replicas: usize,
}

/// Tabulated CDF of the density `∝ e^{−2U}`, `U(0) = 0`.
struct TabulatedCdf {
    lo: f64,
    h: f64,
    u: Vec<f64>,
    cum: Vec<f64>,
    z: f64,
}

impl TabulatedCdf {
    fn at(&self, y: f64) -> f64 {
        let cells = self.u.len() - 1;
        let r = (y - self.lo) / self.h;
        if r <= 0.0 {
            return 0.0;
        }
        if r >= cells as f64 {
            return 1.0;
        }
        let i = r as usize;
        let f = r - i as f64;
        let (d0, d1) = ((-2.0 * self.u[i]).exp(), (-2.0 * self.u[i + 1]).exp());
        (self.cum[i] + self.h * f * (d0 + 0.5 * f * (d1 - d0))) / self.z
    }
}

fn stationary_cdf<D: Fn(f64) -> f64>(drift: &D, reach: f64, cells: usize) -> TabulatedCdf {
    let h = 2.0 * reach / cells as f64;
    let node = |i: usize| -reach + i as f64 * h;
    let mid = cells / 2;
    let mut u = vec![0.0; cells + 1];
    u[mid] = gauss_legendre5(drift, 0.0, node(mid));
    for i in mid..cells {
        u[i + 1] = u[i] + gauss_legendre5(drift, node(i), node(i + 1));
    }
    for i in (0..mid).rev() {
        u[i] = u[i + 1] - gauss_legendre5(drift, node(i), node(i + 1));
    }
    let mut cum = vec![0.0; cells + 1];
    for i in 0..cells {
        cum[i + 1] = cum[i] + 0.5 * h * ((-2.0 * u[i]).exp() + (-2.0 * u[i + 1]).exp());
    }
    let z = cum[cells];
    TabulatedCdf {
        lo: -reach,
        h,
        u,
        cum,
        z,
    }
}

/// Runs `replicas` Euler paths of the limit equation for `horizon` from 0 and
/// compares their endpoints with the density `∝ e^{−2U}`, `U' = drift`.
pub fn stationary_check<D>(
    drift: D,
    horizon: f64,
    dt: f64,
    replicas: usize,
    seed: u64,
) -> Result<StationaryReport>
where
    D: Fn(f64) -> f64 + Sync,
{
    check_horizon(horizon)?;
    if replicas < 2 {
        return Err(Error::Domain("need at least two replicas".into()));
    }
    let xs = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_stream(seed, i);
            simulate_limit_sde(|_| 0.0, &drift, 0.0, horizon, dt, &mut rng).map(|p| p[p.len() - 1])
        })
        .collect::<Result<Vec<f64>>>()?;
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let binning = freedman_diaconis(&xs, lo, hi)?;
    let empirical = EmpiricalLaw::from_positions(&xs, binning)?;
    let reach = 2.0 * lo.abs().max(hi.abs()) + 1.0;
    let cdf = stationary_cdf(&drift, reach, 20_000);
    let exact = EmpiricalLaw::from_cdf(|y| cdf.at(y), binning, false);
    Ok(StationaryReport {
        tv: tv_distance(&empirical, &exact)?,
        nbins: binning.nbins,
        replicas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou(n: u32) -> ScalingFamily {
        ScalingFamily::ornstein_uhlenbeck(n)
    }

    #[test]
    fn constant_sum_gives_linear_time_change() {
        let f = ScalingFamily::new(8, 1.0, 0.5, 0.0).unwrap();
        let mut rng = replica_stream(1, 0);
        let tc = simulate_scaled(&f, 0.3, InitialVelocity::Plus, 2.0, &mut rng).unwrap();
        let (c, _) = f.rate_sum();
        for t in [0.0, 0.25, 1.0, 1.9] {
            assert!((tc.tau_at(t) - 0.5 * c * t).abs() < 1e-9 * c);
        }
    }

    #[test]
    fn time_change_round_trips() {
        let mut rng = replica_stream(2, 0);
        let tc = simulate_scaled(&ou(16), 1.0, InitialVelocity::Uniform, 3.0, &mut rng).unwrap();
        assert_eq!(tc.tau_at(0.0), 0.0);
        let mut prev = -1.0;
        for i in 0..=300 {
            let t = 3.0 * i as f64 / 300.0;
            let tau = tc.tau_at(t);
            assert!(tau > prev);
            prev = tau;
            assert!((tc.t_at(tau) - t).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn path_starts_at_y0_and_matches_marginal() {
        let f = ou(4);
        let mut a = replica_stream(3, 5);
        let mut b = replica_stream(3, 5);
        let tc = simulate_scaled(&f, -0.7, InitialVelocity::Minus, 1.0, &mut a).unwrap();
        assert_eq!(tc.xi_at(0.0), -0.7);
        let direct = scaled_marginal(&f, -0.7, InitialVelocity::Minus, 1.0, &mut b).unwrap();
        assert!((tc.xi_at(1.0) - direct).abs() < 1e-9);
    }

    #[test]
    fn path_is_continuous_on_a_grid() {
        let mut rng = replica_stream(4, 0);
        let grid =
            sample_scaled_grid(&ou(4), 0.0, InitialVelocity::Uniform, 1.0, 1e-4, &mut rng).unwrap();
        assert_eq!(grid.len(), 10_001);
        // ξ moves at speed τ' = (c + k|ξ|)/2
        let (c, k) = ou(4).rate_sum();
        for w in grid.windows(2) {
            let top = w[0].1.abs().max(w[1].1.abs());
            assert!((w[1].1 - w[0].1).abs() <= 1e-4 * (c + k * top) / 2.0 + 1e-12);
        }
    }

    #[test]
    fn ou_limit_coefficients() {
        let f = ou(10);
        for y in [-2.0, -0.5, 0.0, 0.7, 3.0] {
            assert!((f.limit_drift(y) - y).abs() < 1e-15);
        }
        let (m, sd) = f.limit_marginal(1.0, 1.0).unwrap();
        assert!((m - (-1.0f64).exp()).abs() < 1e-15);
        assert!((sd * sd - 0.5 * (1.0 - (-2.0f64).exp())).abs() < 1e-15);
        assert!(ScalingFamily::new(2, 1.0, 1.0, 0.0)
            .unwrap()
            .limit_marginal(0.0, 1.0)
            .is_none());
    }

    #[test]
    fn brownian_limit_variance() {
        let n = 20_000;
        let incr: Vec<f64> = (0..n)
            .map(|i| {
                let mut rng = replica_stream(5, i);
                let p = simulate_limit_sde(|_| 0.0, |_| 0.0, 0.3, 2.0, 0.01, &mut rng).unwrap();
                p[p.len() - 1] - 0.3
            })
            .collect();
        let sq: Vec<f64> = incr.iter().map(|x| x * x).collect();
        let s = mean_se(&sq);
        assert!((s.mean - 2.0).abs() < 3.0 * s.se, "{s:?}");
    }

    #[test]
    fn ou_stationary_variance() {
        let f = ou(1);
        let n = 20_000;
        let ends: Vec<f64> = (0..n)
            .map(|i| {
                let mut rng = replica_stream(6, i);
                let p = simulate_limit_sde(|y| f.c1(y), |y| f.c2(y), 0.0, 8.0, 0.005, &mut rng)
                    .unwrap();
                p[p.len() - 1]
            })
            .collect();
        let sq: Vec<f64> = ends.iter().map(|x| x * x).collect();
        let s = mean_se(&sq);
        assert!((s.mean - 0.5).abs() < 3.0 * s.se + 0.005, "{s:?}");
    }

    #[test]
    fn zero_time_report_has_zero_distance() {
        let r =
            weak_convergence_report(&[ou(2), ou(4)], 0.4, InitialVelocity::Uniform, 0.0, 200, 1)
                .unwrap();
        for m in &r.members {
            assert_eq!(m.ks, 0.0);
            assert_eq!(m.ks_exact, Some(0.0));
        }
    }

    #[test]
    fn mismatched_limits_are_rejected() {
        let other = ScalingFamily::new(4, 1.0, 0.0, 3.0).unwrap();
        assert!(
            weak_convergence_report(&[ou(2), other], 0.0, InitialVelocity::Plus, 1.0, 10, 1)
                .is_err()
        );
        assert!(weak_convergence_report(&[ou(2)], 0.0, InitialVelocity::Plus, 1.0, 10, 1).is_err());
    }

    #[test]
    fn constant_rate_martingale() {
        let f = ScalingFamily::new(4, 1.0, 1.0, 0.0).unwrap();
        let r = martingale_diagnostic(&f, 0.5, InitialVelocity::Uniform, 1.0, 4000, 3).unwrap();
        assert!(r.mean.abs() < 3.5 * r.se, "{r:?}");
        assert!(r.square_mean.abs() < 3.5 * r.square_se, "{r:?}");
    }

    #[test]
    fn ou_stationary_histogram() {
        let f = ou(1);
        let r = stationary_check(|y: f64| f.limit_drift(y), 6.0, 0.01, 20_000, 4).unwrap();
        assert!(r.tv < 0.05, "{r:?}");
    }
}
