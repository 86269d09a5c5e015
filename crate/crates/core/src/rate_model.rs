//! Jump-rate functions, their primitives and the induced invariant law.
//!
//! A rate is specified on `[0, ∞)` and extended evenly to `ℝ`. The pair
//! `(a, b)` holds the rate used while approaching the origin (`a`) and while
//! moving away from it (`b`).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{adaptive_simpson, bracket_increasing, solve_increasing};

const ROOT_TOL: f64 = 1e-10;

/// A rate function on `[0, ∞)`, evaluated on `ℝ` through `value(y) = value(|y|)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum RateSpec {
    Constant {
        level: f64,
    },
    /// `base + slope·|y|`
    Affine {
        base: f64,
        slope: f64,
    },
    /// Piecewise-linear through `(knots[i], values[i])`, constant outside the knot range.
    Tabulated {
        knots: Vec<f64>,
        values: Vec<f64>,
    },
}

/// Direction of a tabulated rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotonicity {
    NonIncreasing,
    NonDecreasing,
    /// constant data is both
    Flat,
}

impl RateSpec {
    pub fn constant(level: f64) -> Self {
        RateSpec::Constant { level }
    }

    pub fn affine(base: f64, slope: f64) -> Self {
        RateSpec::Affine { base, slope }
    }

    pub fn tabulated(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let spec = RateSpec::Tabulated { knots, values };
        spec.check_structure()?;
        Ok(spec)
    }

    /// Structural checks that do not depend on the admissibility hypothesis.
    pub fn check_structure(&self) -> Result<()> {
        match self {
            RateSpec::Constant { level } => {
                if !level.is_finite() {
                    return Err(Error::InvalidSpec(format!(
                        "constant level {level} is not finite"
                    )));
                }
            }
            RateSpec::Affine { base, slope } => {
                if !base.is_finite() || !slope.is_finite() {
                    return Err(Error::InvalidSpec(
                        "affine coefficients must be finite".into(),
                    ));
                }
            }
            RateSpec::Tabulated { knots, values } => {
                if knots.is_empty() || knots.len() != values.len() {
                    return Err(Error::InvalidSpec(
                        "tabulated rate needs equally many (at least one) knots and values".into(),
                    ));
                }
                if knots.iter().chain(values.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSpec("tabulated data must be finite".into()));
                }
                if knots[0] < 0.0 {
                    return Err(Error::InvalidSpec(
                        "tabulated knots must be non-negative".into(),
                    ));
                }
                if knots.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidSpec(
                        "tabulated knots must be strictly increasing".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Direction of monotonicity on `[0, ∞)`, `None` if the rate is not monotone.
    pub fn monotonicity(&self) -> Option<Monotonicity> {
        let classify = |up: bool, down: bool| match (up, down) {
            (false, false) => Some(Monotonicity::Flat),
            (true, false) => Some(Monotonicity::NonDecreasing),
            (false, true) => Some(Monotonicity::NonIncreasing),
            (true, true) => None,
        };
        match self {
            RateSpec::Constant { .. } => Some(Monotonicity::Flat),
            RateSpec::Affine { slope, .. } => classify(*slope > 0.0, *slope < 0.0),
            RateSpec::Tabulated { values, .. } => classify(
                values.windows(2).any(|w| w[1] > w[0]),
                values.windows(2).any(|w| w[1] < w[0]),
            ),
        }
    }

    /// Rate at `y`; even in `y`.
    #[inline]
    pub fn value(&self, y: f64) -> f64 {
        let x = y.abs();
        match self {
            RateSpec::Constant { level } => *level,
            RateSpec::Affine { base, slope } => base + slope * x,
            RateSpec::Tabulated { knots, values } => {
                let n = knots.len();
                if x <= knots[0] {
                    return values[0];
                }
                if x >= knots[n - 1] {
                    return values[n - 1];
                }
                let i = knots.partition_point(|k| *k <= x) - 1;
                let w = (x - knots[i]) / (knots[i + 1] - knots[i]);
                values[i] + w * (values[i + 1] - values[i])
            }
        }
    }

    /// Right derivative of the rate on `[0, ∞)`.
    pub fn slope_at(&self, x: f64) -> f64 {
        match self {
            RateSpec::Constant { .. } => 0.0,
            RateSpec::Affine { slope, .. } => *slope,
            RateSpec::Tabulated { knots, values } => {
                let n = knots.len();
                if x < knots[0] || x >= knots[n - 1] {
                    return 0.0;
                }
                let i = knots.partition_point(|k| *k <= x) - 1;
                (values[i + 1] - values[i]) / (knots[i + 1] - knots[i])
            }
        }
    }

    /// `∫_0^x value`, for `x >= 0`.
    pub fn integral(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        match self {
            RateSpec::Constant { level } => level * x,
            RateSpec::Affine { base, slope } => base * x + 0.5 * slope * x * x,
            RateSpec::Tabulated { knots, values } => {
                let n = knots.len();
                if x <= knots[0] {
                    return values[0] * x;
                }
                let mut acc = values[0] * knots[0];
                for i in 0..n - 1 {
                    let (k0, k1) = (knots[i], knots[i + 1]);
                    if x <= k1 {
                        let vx = values[i] + (x - k0) / (k1 - k0) * (values[i + 1] - values[i]);
                        return acc + 0.5 * (values[i] + vx) * (x - k0);
                    }
                    acc += 0.5 * (values[i] + values[i + 1]) * (k1 - k0);
                }
                acc + values[n - 1] * (x - knots[n - 1])
            }
        }
    }

    /// Inverse of [`RateSpec::integral`]: the `x >= 0` with `integral(x) = u`.
    pub fn inverse_integral(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0) || !u.is_finite() {
            return Err(Error::Domain(format!(
                "integrated rate value {u} is not a finite non-negative number"
            )));
        }
        if u == 0.0 {
            return Ok(0.0);
        }
        match self {
            RateSpec::Constant { level } => {
                if *level <= 0.0 {
                    return Err(Error::Domain("integrated rate is identically zero".into()));
                }
                Ok(u / level)
            }
            RateSpec::Affine { base, slope } => {
                let disc = base * base + 2.0 * slope * u;
                if disc < 0.0 || *base + disc.sqrt() <= 0.0 {
                    return Err(Error::Domain(format!(
                        "{u} exceeds the range of the integrated rate"
                    )));
                }
                Ok(2.0 * u / (base + disc.sqrt()))
            }
            RateSpec::Tabulated { .. } => {
                if self.sup() <= 0.0 || *self.last_value() <= 0.0 {
                    return Err(Error::Domain(format!(
                        "{u} exceeds the range of the integrated rate"
                    )));
                }
                let hi = bracket_increasing(|x| self.integral(x), u, 1.0)?;
                solve_increasing(
                    |x| self.integral(x),
                    |x| self.value(x),
                    u,
                    0.0,
                    hi,
                    ROOT_TOL,
                )
            }
        }
    }

    fn last_value(&self) -> &f64 {
        match self {
            RateSpec::Tabulated { values, .. } => values.last().expect("non-empty"),
            _ => unreachable!(),
        }
    }

    /// Duration `t >= 0` with `∫_x^{x+t} value = e`: the time to accumulate a
    /// unit-exponential budget `e` while moving away from the origin.
    #[inline]
    pub fn advance(&self, x: f64, e: f64) -> f64 {
        match self {
            RateSpec::Constant { level } => e / level,
            RateSpec::Affine { base, slope } => {
                let c = base + slope * x;
                let disc = c * c + 2.0 * slope * e;
                if disc < 0.0 {
                    return f64::INFINITY;
                }
                2.0 * e / (c + disc.sqrt())
            }
            RateSpec::Tabulated { .. } => match self.inverse_integral(self.integral(x) + e) {
                Ok(y) => (y - x).max(0.0),
                Err(_) => f64::INFINITY,
            },
        }
    }

    /// Duration `t < x` with `∫_{x-t}^x value = e` while moving towards the
    /// origin, or `None` when the budget outlasts the way down (`e >= ∫_0^x`).
    #[inline]
    pub fn retreat(&self, x: f64, e: f64) -> Option<f64> {
        if e >= self.integral(x) {
            return None;
        }
        Some(match self {
            RateSpec::Constant { level } => e / level,
            RateSpec::Affine { base, slope } => {
                let c = base + slope * x;
                let disc = (c * c - 2.0 * slope * e).max(0.0);
                2.0 * e / (c + disc.sqrt())
            }
            RateSpec::Tabulated { .. } => {
                let target = self.integral(x) - e;
                x - self.inverse_integral(target).ok()?
            }
        })
    }

    /// `sup_{y >= 0} value(y)`, possibly `+∞`.
    pub fn sup(&self) -> f64 {
        match self {
            RateSpec::Constant { level } => *level,
            RateSpec::Affine { base, slope } => {
                if *slope > 0.0 {
                    f64::INFINITY
                } else {
                    *base
                }
            }
            RateSpec::Tabulated { values, .. } => {
                values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    /// `inf_{y >= 0} value(y)`, possibly `-∞`.
    pub fn inf(&self) -> f64 {
        match self {
            RateSpec::Constant { level } => *level,
            RateSpec::Affine { base, slope } => {
                if *slope < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    *base
                }
            }
            RateSpec::Tabulated { values, .. } => {
                values.iter().copied().fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        self.monotonicity() == Some(Monotonicity::Flat)
    }
}

/// Selects one of the two integrated rates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    A,
    B,
}

/// Serializable form of a rate pair, as found in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePairSpec {
    pub a: RateSpec,
    pub b: RateSpec,
}

/// An admissible pair of jump rates with cached bounds.
///
/// `a` is non-increasing and `b` non-decreasing on `[0, ∞)`, both bounded
/// below by positive constants, and `b > a` away from the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct RatePair {
    a: RateSpec,
    b: RateSpec,
    a_lower: f64,
    a_upper: f64,
    b_lower: f64,
    b_upper: f64,
}

impl RatePair {
    /// Builds the pair and checks admissibility on the default validation grid.
    pub fn new(a: RateSpec, b: RateSpec) -> Result<Self> {
        let pair = Self::unchecked(a, b)?;
        let report = validate_hypothesis(&pair, DEFAULT_GRID_STEP, DEFAULT_GRID_EXTENT);
        if report.is_admissible() {
            Ok(pair)
        } else {
            Err(Error::Inadmissible(report))
        }
    }

    /// Builds the pair with structural checks only. Useful to report on
    /// inadmissible specifications; such pairs must not be simulated.
    pub fn unchecked(a: RateSpec, b: RateSpec) -> Result<Self> {
        a.check_structure()?;
        b.check_structure()?;
        Ok(RatePair {
            a_lower: a.inf(),
            a_upper: a.value(0.0),
            b_lower: b.inf(),
            b_upper: b.sup(),
            a,
            b,
        })
    }

    pub fn from_spec(spec: &RatePairSpec) -> Result<Self> {
        Self::new(spec.a.clone(), spec.b.clone())
    }

    pub fn to_spec(&self) -> RatePairSpec {
        RatePairSpec {
            a: self.a.clone(),
            b: self.b.clone(),
        }
    }

    /// Constant rates `a < b`.
    pub fn constant(a: f64, b: f64) -> Result<Self> {
        Self::new(RateSpec::constant(a), RateSpec::constant(b))
    }

    /// `a ≡ level`, `b(y) = level + slope·|y|`.
    pub fn affine(level: f64, slope: f64) -> Result<Self> {
        Self::new(RateSpec::constant(level), RateSpec::affine(level, slope))
    }

    pub fn a(&self) -> &RateSpec {
        &self.a
    }

    pub fn b(&self) -> &RateSpec {
        &self.b
    }

    pub fn spec(&self, which: Which) -> &RateSpec {
        match which {
            Which::A => &self.a,
            Which::B => &self.b,
        }
    }

    /// `inf a`, attained at infinity.
    pub fn a_lower(&self) -> f64 {
        self.a_lower
    }

    /// `a(0) = sup a`.
    pub fn a_upper(&self) -> f64 {
        self.a_upper
    }

    /// `inf b = b(0)`.
    pub fn b_lower(&self) -> f64 {
        self.b_lower
    }

    /// `sup b`, possibly `+∞`.
    pub fn b_upper(&self) -> f64 {
        self.b_upper
    }

    /// `∫_0^x` of the chosen rate.
    pub fn integrated_rate(&self, which: Which, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::Domain(format!(
                "integrated rate needs x >= 0, got {x}"
            )));
        }
        Ok(self.spec(which).integral(x))
    }

    /// Inverse of [`RatePair::integrated_rate`].
    pub fn inverse_integrated_rate(&self, which: Which, u: f64) -> Result<f64> {
        self.spec(which).inverse_integral(u)
    }

    /// `F(y) = ∫_0^|y| (b − a)`.
    pub fn potential(&self, y: f64) -> f64 {
        let x = y.abs();
        self.b.integral(x) - self.a.integral(x)
    }
}

pub const DEFAULT_GRID_STEP: f64 = 0.01;
pub const DEFAULT_GRID_EXTENT: f64 = 50.0;

/// The clauses of the admissibility hypothesis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Clause {
    ANonIncreasing,
    BNonDecreasing,
    APositiveLowerBound,
    BPositiveLowerBound,
    StrictGap,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Clause::ANonIncreasing => "a non-increasing on [0,∞)",
            Clause::BNonDecreasing => "b non-decreasing on [0,∞)",
            Clause::APositiveLowerBound => "a bounded below by a positive constant",
            Clause::BPositiveLowerBound => "b bounded below by a positive constant",
            Clause::StrictGap => "b(y)>a(y) for all y≠0",
        })
    }
}

/// One violated clause, with the first offending grid point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub clause: Clause,
    /// first offending point (`+∞` for a violation only visible in the limit)
    pub at: f64,
    /// number of offending grid points
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violated(&self, clause: Clause) -> Option<&Violation> {
        self.violations.iter().find(|v| v.clause == clause)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("admissible");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| {
                format!(
                    "{} violated at y={} ({} grid points)",
                    v.clause, v.at, v.count
                )
            })
            .collect();
        f.write_str(&parts.join("; "))
    }
}

/// Checks the admissibility hypothesis on the grid `{k·step : 0 <= k·step <= extent}`.
///
/// Violations are data: every violated clause is listed with its first
/// offending grid point.
pub fn validate_hypothesis(pair: &RatePair, grid_step: f64, extent: f64) -> ValidationReport {
    assert!(
        grid_step > 0.0 && extent > 0.0,
        "grid step and extent must be positive"
    );
    let n = (extent / grid_step).floor() as usize;
    let grid = |k: usize| k as f64 * grid_step;

    let mut found: Vec<Violation> = Vec::new();
    let note = |found: &mut Vec<Violation>, clause: Clause, at: f64| {
        if let Some(v) = found.iter_mut().find(|v| v.clause == clause) {
            v.count += 1;
        } else {
            found.push(Violation {
                clause,
                at,
                count: 1,
            });
        }
    };

    for k in 0..n {
        let (y0, y1) = (grid(k), grid(k + 1));
        if pair.a.value(y1) > pair.a.value(y0) {
            note(&mut found, Clause::ANonIncreasing, y1);
        }
        if pair.b.value(y1) < pair.b.value(y0) {
            note(&mut found, Clause::BNonDecreasing, y1);
        }
    }
    for k in 0..=n {
        let y = grid(k);
        if pair.a.value(y) <= 0.0 {
            note(&mut found, Clause::APositiveLowerBound, y);
        }
        if pair.b.value(y) <= 0.0 {
            note(&mut found, Clause::BPositiveLowerBound, y);
        }
        if k > 0 && pair.b.value(y) <= pair.a.value(y) {
            note(&mut found, Clause::StrictGap, y);
        }
    }
    // limits beyond the grid
    let limits = [
        (pair.a.inf() <= 0.0, Clause::APositiveLowerBound),
        (pair.b.inf() <= 0.0, Clause::BPositiveLowerBound),
        (pair.a.monotonicity().is_none(), Clause::ANonIncreasing),
        (pair.b.monotonicity().is_none(), Clause::BNonDecreasing),
    ];
    for (violated, clause) in limits {
        if violated && !found.iter().any(|v| v.clause == clause) {
            note(&mut found, clause, f64::INFINITY);
        }
    }
    ValidationReport { violations: found }
}

const TABLE_CELLS: usize = 4096;

/// The invariant law `μ(dy, dw) = e^{−F(y)}/C_F dy ⊗ (δ₋₁ + δ₊₁)/2`.
///
/// Holds a cumulative table of `∫_0^x e^{−F}` so that CDF and quantile
/// queries cost one short quadrature each.
#[derive(Clone, Debug)]
pub struct Potential {
    pair: RatePair,
    normalizer: f64,
    cutoff: f64,
    cell: f64,
    cumulative: Vec<f64>,
}

impl Potential {
    pub fn new(pair: &RatePair) -> Result<Self> {
        let weight = |y: f64| (-pair.potential(y)).exp();
        // beyond L, F(y) >= F(L) + (b(L) - a(L))(y - L), so the tail is below
        // e^{-F(L)} / (b(L) - a(L))
        let tail = |l: f64| {
            let gap = pair.b.value(l) - pair.a.value(l);
            if gap > 0.0 {
                weight(l) / gap
            } else {
                f64::INFINITY
            }
        };
        let mut cutoff = 1.0;
        while tail(cutoff) >= 1e-12 {
            cutoff *= 1.5;
            if cutoff > 1e6 {
                return Err(Error::Numerical(
                    "invariant density tail does not decay".into(),
                ));
            }
        }
        let cell = cutoff / TABLE_CELLS as f64;
        let mut cumulative = Vec::with_capacity(TABLE_CELLS + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for k in 0..TABLE_CELLS {
            let lo = k as f64 * cell;
            acc += adaptive_simpson(&weight, lo, lo + cell, 1e-9 / TABLE_CELLS as f64);
            cumulative.push(acc);
        }
        Ok(Potential {
            pair: pair.clone(),
            normalizer: 2.0 * acc,
            cutoff,
            cell,
            cumulative,
        })
    }

    /// `F(y)`.
    pub fn value(&self, y: f64) -> f64 {
        self.pair.potential(y)
    }

    /// `C_F = ∫_ℝ e^{−F}`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Radius beyond which the density mass is below `1e-12`.
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Open interval on which the Laplace transform of the position marginal is finite.
    pub fn laplace_domain(&self) -> (f64, f64) {
        let r = self.pair.b_upper() - self.pair.a_lower();
        (-r, r)
    }

    /// Position density of the invariant law, `e^{−F(y)}/C_F`.
    pub fn density(&self, y: f64) -> f64 {
        (-self.value(y)).exp() / self.normalizer
    }

    /// `∫_0^x e^{−F}` for `x >= 0`.
    fn half_mass(&self, x: f64) -> f64 {
        let weight = |y: f64| (-self.pair.potential(y)).exp();
        if x >= self.cutoff {
            let last = *self.cumulative.last().expect("table");
            return last + adaptive_simpson(&weight, self.cutoff, x, 1e-14);
        }
        let k = ((x / self.cell).floor() as usize).min(TABLE_CELLS - 1);
        let lo = k as f64 * self.cell;
        self.cumulative[k] + adaptive_simpson(&weight, lo, x, 1e-14)
    }

    /// CDF of the position marginal.
    pub fn cdf(&self, y: f64) -> f64 {
        let m = self.half_mass(y.abs()) / self.normalizer;
        if y >= 0.0 {
            0.5 + m
        } else {
            0.5 - m
        }
    }

    /// Position quantile: the `y` with `cdf(y) = p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile level {p} outside (0, 1)")));
        }
        if p == 0.5 {
            return Ok(0.0);
        }
        let target = (p - 0.5).abs() * self.normalizer;
        let weight = |y: f64| (-self.pair.potential(y)).exp();
        let last = *self.cumulative.last().expect("table");
        let x = if target >= last {
            let g = |x: f64| last + adaptive_simpson(&weight, self.cutoff, x, 1e-15);
            let hi = self.cutoff + bracket_increasing(|d| g(self.cutoff + d), target, 1.0)?;
            solve_increasing(g, weight, target, self.cutoff, hi, ROOT_TOL)?
        } else {
            let k = self
                .cumulative
                .partition_point(|c| *c <= target)
                .saturating_sub(1)
                .min(TABLE_CELLS - 1);
            let lo = k as f64 * self.cell;
            let base = self.cumulative[k];
            let g = |x: f64| base + adaptive_simpson(&weight, lo, x, 1e-15);
            solve_increasing(g, weight, target, lo, lo + self.cell, ROOT_TOL)?
        };
        Ok(if p > 0.5 { x } else { -x })
    }
}
