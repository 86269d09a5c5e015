//! Empirical laws, total-variation estimates and decay fits.

mod bounds;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pdmp_sim::states_at;
use crate::rate_model::RatePair;
use crate::rng::replica_stream;
use crate::state::{Flavor, State, Velocity};

pub use bounds::*;

/// Uniform partition of `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Binning {
    pub lo: f64,
    pub hi: f64,
    pub nbins: usize,
}

impl Binning {
    pub fn new(lo: f64, hi: f64, nbins: usize) -> Result<Self> {
        if !(lo < hi) || nbins == 0 || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Domain(format!(
                "bad binning [{lo}, {hi}] with {nbins} bins"
            )));
        }
        Ok(Binning { lo, hi, nbins })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.nbins as f64
    }

    pub fn edge(&self, k: usize) -> f64 {
        if k == self.nbins {
            self.hi
        } else {
            self.lo + k as f64 * self.width()
        }
    }

    /// Bin index, or `Err(false)` below and `Err(true)` above the range.
    fn locate(&self, x: f64) -> std::result::Result<usize, bool> {
        if x < self.lo {
            return Err(false);
        }
        if x > self.hi {
            return Err(true);
        }
        Ok((((x - self.lo) / self.width()) as usize).min(self.nbins - 1))
    }
}

/// Freedman–Diaconis binning of `xs` over the fixed range `[lo, hi]`.
pub fn freedman_diaconis(xs: &[f64], lo: f64, hi: f64) -> Result<Binning> {
    freedman_diaconis_for(xs, xs.len(), lo, hi)
}

/// Freedman–Diaconis binning with the spread of `xs` and the width rule
/// evaluated for histograms of `n` samples each.
pub fn freedman_diaconis_for(xs: &[f64], n: usize, lo: f64, hi: f64) -> Result<Binning> {
    if xs.is_empty() || n == 0 {
        return Err(Error::EmptySample);
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| sorted[((p * (sorted.len() - 1) as f64).round()) as usize];
    let iqr = q(0.75) - q(0.25);
    let width = 2.0 * iqr / (n as f64).cbrt();
    let nbins = if width > 0.0 {
        ((hi - lo) / width).ceil().clamp(1.0, 100_000.0) as usize
    } else {
        1
    };
    Binning::new(lo, hi, nbins)
}

/// Histogram of a law on `ℝ × {−1, +1}` (or of positions only).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalLaw {
    pub binning: Binning,
    pub mass_plus: Vec<f64>,
    pub mass_minus: Vec<f64>,
    /// out-of-range mass per channel `[minus, plus]`, below and above
    pub below: [f64; 2],
    pub above: [f64; 2],
    pub n: usize,
    /// when false all mass sits in the `+1` channel
    pub velocity_resolved: bool,
}

impl EmpiricalLaw {
    fn empty(binning: Binning, n: usize, velocity_resolved: bool) -> Self {
        EmpiricalLaw {
            binning,
            mass_plus: vec![0.0; binning.nbins],
            mass_minus: vec![0.0; binning.nbins],
            below: [0.0; 2],
            above: [0.0; 2],
            n,
            velocity_resolved,
        }
    }

    fn add(&mut self, x: f64, channel: usize, w: f64) {
        match self.binning.locate(x) {
            Ok(k) => {
                if channel == 1 {
                    self.mass_plus[k] += w;
                } else {
                    self.mass_minus[k] += w;
                }
            }
            Err(false) => self.below[channel] += w,
            Err(true) => self.above[channel] += w,
        }
    }

    /// Joint histogram of position and velocity.
    pub fn from_samples(samples: &[(f64, Velocity)], binning: Binning) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        let w = 1.0 / samples.len() as f64;
        let mut law = Self::empty(binning, samples.len(), true);
        for &(x, v) in samples {
            law.add(x, usize::from(v == Velocity::Plus), w);
        }
        Ok(law)
    }

    /// Histogram of positions only.
    pub fn from_positions(xs: &[f64], binning: Binning) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptySample);
        }
        let w = 1.0 / xs.len() as f64;
        let mut law = Self::empty(binning, xs.len(), false);
        for &x in xs {
            law.add(x, 1, w);
        }
        Ok(law)
    }

    /// Exact bin masses of a law with position cdf `cdf`; a joint law puts
    /// half of each bin on each velocity.
    pub fn from_cdf<F: Fn(f64) -> f64>(cdf: F, binning: Binning, velocity_resolved: bool) -> Self {
        let mut law = Self::empty(binning, 0, velocity_resolved);
        let split = if velocity_resolved { 0.5 } else { 1.0 };
        let mut prev = cdf(binning.lo);
        for k in 0..binning.nbins {
            let next = cdf(binning.edge(k + 1));
            let m = (next - prev).max(0.0);
            law.mass_plus[k] = split * m;
            if velocity_resolved {
                law.mass_minus[k] = split * m;
            }
            prev = next;
        }
        let lo = cdf(binning.lo);
        let hi = 1.0 - cdf(binning.hi);
        if velocity_resolved {
            law.below = [0.5 * lo, 0.5 * lo];
            law.above = [0.5 * hi, 0.5 * hi];
        } else {
            law.below = [0.0, lo];
            law.above = [0.0, hi];
        }
        law
    }

    pub fn total_mass(&self) -> f64 {
        self.cells().sum()
    }

    fn cells(&self) -> impl Iterator<Item = f64> + '_ {
        self.mass_plus
            .iter()
            .chain(self.mass_minus.iter())
            .chain(self.below.iter())
            .chain(self.above.iter())
            .copied()
    }
}

/// Histogram law of samples over `[lo, hi]` with `nbins` bins.
pub fn empirical_law(
    samples: &[(f64, Velocity)],
    lo: f64,
    hi: f64,
    nbins: usize,
) -> Result<EmpiricalLaw> {
    EmpiricalLaw::from_samples(samples, Binning::new(lo, hi, nbins)?)
}

fn compatible(p: &EmpiricalLaw, q: &EmpiricalLaw) -> Result<()> {
    if p.binning != q.binning || p.velocity_resolved != q.velocity_resolved {
        return Err(Error::BinningMismatch);
    }
    Ok(())
}

/// Half the `L¹` distance between two histograms on the same binning.
pub fn tv_distance(p: &EmpiricalLaw, q: &EmpiricalLaw) -> Result<f64> {
    compatible(p, q)?;
    let s: f64 = p.cells().zip(q.cells()).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * s).clamp(0.0, 1.0))
}

/// Standard error of [`tv_distance`] from the multinomial delta method;
/// laws with `n == 0` are treated as exact.
pub fn tv_standard_error(p: &EmpiricalLaw, q: &EmpiricalLaw) -> Result<f64> {
    compatible(p, q)?;
    let signs: Vec<f64> = p
        .cells()
        .zip(q.cells())
        .map(|(a, b)| (a - b).signum())
        .collect();
    let var = |law: &EmpiricalLaw| {
        if law.n == 0 {
            return 0.0;
        }
        let m: f64 = law.cells().zip(&signs).map(|(c, s)| c * s).sum();
        let m2: f64 = law.cells().zip(&signs).map(|(c, s)| c * s * s).sum();
        (m2 - m * m).max(0.0) / law.n as f64
    };
    Ok(0.5 * (var(p) + var(q)).sqrt())
}

/// Least-squares fit of `log tv = log K − λ t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub lambda_hat: f64,
    #[serde(rename = "K_hat")]
    pub k_hat: f64,
    pub r2: f64,
    /// number of points used
    pub used: usize,
}

/// Fits the strictly positive points.
pub fn decay_fit(times: &[f64], tvs: &[f64]) -> Result<DecayFit> {
    decay_fit_above(times, tvs, 0.0)
}

/// Fits the points with `tv > floor`.
pub fn decay_fit_above(times: &[f64], tvs: &[f64], floor: f64) -> Result<DecayFit> {
    if times.len() != tvs.len() {
        return Err(Error::Domain("times and tvs differ in length".into()));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(tvs)
        .filter(|(_, &v)| v > floor.max(0.0) && v.is_finite())
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} usable points, need 3",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if stt == 0.0 {
        return Err(Error::InsufficientData("all usable times coincide".into()));
    }
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sty * sty / (stt * syy)
    };
    Ok(DecayFit {
        lambda_hat: -slope,
        k_hat: intercept.exp(),
        r2,
        used: pts.len(),
    })
}

/// Observation times of the invariant-law figure.
pub const FIGURE_TIMES: [f64; 6] = [2.0, 6.0, 10.0, 14.0, 18.0, 22.0];

/// Default time grid of decay experiments: `1, 1.5, …, 8`.
pub fn default_decay_times() -> Vec<f64> {
    (2..=16).map(|k| 0.5 * k as f64).collect()
}

/// Noise floor below which histogram TV values are dropped from fits.
pub fn noise_floor(n: usize) -> f64 {
    2.0 / (n as f64).sqrt()
}

/// Total variation over a time grid between the laws of two started processes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TvCurve {
    pub times: Vec<f64>,
    pub tv: Vec<f64>,
    pub se: Vec<f64>,
    pub binning: Binning,
    pub floor: f64,
}

impl TvCurve {
    pub fn fit(&self) -> Result<DecayFit> {
        decay_fit_above(&self.times, &self.tv, self.floor)
    }
}

/// Samples `(position, velocity)` at each time for `replicas` independent
/// paths from `start`; result is indexed `[time][replica]`.
pub fn sample_marginals(
    pair: &RatePair,
    start: State,
    times: &[f64],
    flavor: Flavor,
    replicas: usize,
    seed: u64,
) -> Result<Vec<Vec<(f64, Velocity)>>> {
    let per: Vec<Vec<State>> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_stream(seed, i);
            states_at(pair, start, times, flavor, &mut rng)
        })
        .collect::<Result<_>>()?;
    Ok((0..times.len())
        .map(|k| per.iter().map(|p| (p[k].position, p[k].velocity)).collect())
        .collect())
}

fn pooled_binning(samples: &[&Vec<Vec<(f64, Velocity)>>], per_law: usize) -> Result<Binning> {
    let xs: Vec<f64> = samples
        .iter()
        .flat_map(|s| s.iter().flatten().map(|p| p.0))
        .collect();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo < hi) {
        return Binning::new(lo - 0.5, lo + 0.5, 1);
    }
    freedman_diaconis_for(&xs, per_law, lo, hi)
}

/// Histogram TV between the joint laws of two processes started at `s1`
/// and `s2`, simulated independently, on one shared binning.
pub fn tv_curve(
    pair: &RatePair,
    s1: State,
    s2: State,
    times: &[f64],
    flavor: Flavor,
    replicas: usize,
    seed: u64,
) -> Result<TvCurve> {
    let a = sample_marginals(pair, s1, times, flavor, replicas, seed)?;
    let b = sample_marginals(
        pair,
        s2,
        times,
        flavor,
        replicas,
        seed.wrapping_add(0x9E37_79B9_7F4A_7C15),
    )?;
    let binning = pooled_binning(&[&a, &b], replicas)?;
    let mut tv = Vec::with_capacity(times.len());
    let mut se = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        let p = EmpiricalLaw::from_samples(&a[k], binning)?;
        let q = EmpiricalLaw::from_samples(&b[k], binning)?;
        tv.push(tv_distance(&p, &q)?);
        se.push(tv_standard_error(&p, &q)?);
    }
    Ok(TvCurve {
        times: times.to_vec(),
        tv,
        se,
        binning,
        floor: noise_floor(replicas),
    })
}

/// Position histograms at each time next to the exact bin masses of a
/// reference law, on one shared binning.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReferenceComparison {
    pub curve: TvCurve,
    pub laws: Vec<EmpiricalLaw>,
    pub reference: EmpiricalLaw,
}

pub fn compare_to_reference<F: Fn(f64) -> f64>(
    pair: &RatePair,
    start: State,
    times: &[f64],
    flavor: Flavor,
    replicas: usize,
    seed: u64,
    cdf: F,
) -> Result<ReferenceComparison> {
    let a = sample_marginals(pair, start, times, flavor, replicas, seed)?;
    let binning = pooled_binning(&[&a], replicas)?;
    let reference = EmpiricalLaw::from_cdf(&cdf, binning, false);
    let mut tv = Vec::with_capacity(times.len());
    let mut se = Vec::with_capacity(times.len());
    let mut laws = Vec::with_capacity(times.len());
    for row in &a {
        let xs: Vec<f64> = row.iter().map(|p| p.0).collect();
        let p = EmpiricalLaw::from_positions(&xs, binning)?;
        tv.push(tv_distance(&p, &reference)?);
        se.push(tv_standard_error(&p, &reference)?);
        laws.push(p);
    }
    let curve = TvCurve {
        times: times.to_vec(),
        tv,
        se,
        binning,
        floor: noise_floor(replicas),
    };
    Ok(ReferenceComparison {
        curve,
        laws,
        reference,
    })
}

/// Histogram TV between the position law at each time and a reference law
/// given by its cdf.
pub fn tv_to_reference<F: Fn(f64) -> f64>(
    pair: &RatePair,
    start: State,
    times: &[f64],
    flavor: Flavor,
    replicas: usize,
    seed: u64,
    cdf: F,
) -> Result<TvCurve> {
    Ok(compare_to_reference(pair, start, times, flavor, replicas, seed, cdf)?.curve)
}

/// Empirical probability that the coupling has not yet happened by `t`,
/// an upper bound on the total variation between the two laws at `t`.
pub fn coupling_tail(t_stars: &[f64], t: f64) -> f64 {
    if t_stars.is_empty() {
        return f64::NAN;
    }
    t_stars.iter().filter(|&&s| s > t).count() as f64 / t_stars.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Binning {
        Binning::new(-1.0, 1.0, 4).unwrap()
    }

    #[test]
    fn single_sample_sits_in_its_bin() {
        let law = EmpiricalLaw::from_samples(&[(0.0, Velocity::Plus)], grid()).unwrap();
        assert_eq!(law.mass_plus, vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(law.total_mass(), 1.0);
    }

    #[test]
    fn split_channels_carry_half_each() {
        let law =
            EmpiricalLaw::from_samples(&[(0.3, Velocity::Plus), (0.3, Velocity::Minus)], grid())
                .unwrap();
        assert_eq!(law.mass_plus.iter().sum::<f64>(), 0.5);
        assert_eq!(law.mass_minus.iter().sum::<f64>(), 0.5);
    }

    #[test]
    fn empty_sample_is_an_error() {
        assert!(matches!(
            EmpiricalLaw::from_samples(&[], grid()),
            Err(Error::EmptySample)
        ));
    }

    #[test]
    fn out_of_range_mass_is_tracked() {
        let law =
            EmpiricalLaw::from_samples(&[(-3.0, Velocity::Plus), (5.0, Velocity::Minus)], grid())
                .unwrap();
        assert_eq!(law.below, [0.0, 0.5]);
        assert_eq!(law.above, [0.5, 0.0]);
        assert!((law.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tv_trivial_cases() {
        let p = EmpiricalLaw::from_samples(&[(-0.9, Velocity::Plus)], grid()).unwrap();
        let q = EmpiricalLaw::from_samples(&[(0.9, Velocity::Plus)], grid()).unwrap();
        let r =
            EmpiricalLaw::from_samples(&[(-0.9, Velocity::Plus), (0.9, Velocity::Plus)], grid())
                .unwrap();
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        assert_eq!(tv_distance(&p, &q).unwrap(), 1.0);
        assert_eq!(tv_distance(&p, &r).unwrap(), 0.5);
    }

    #[test]
    fn mismatched_binnings_are_rejected() {
        let p = EmpiricalLaw::from_samples(&[(0.0, Velocity::Plus)], grid()).unwrap();
        let q = EmpiricalLaw::from_samples(
            &[(0.0, Velocity::Plus)],
            Binning::new(-1.0, 1.0, 5).unwrap(),
        )
        .unwrap();
        assert!(matches!(tv_distance(&p, &q), Err(Error::BinningMismatch)));
    }

    #[test]
    fn synthetic_decay_is_recovered() {
        let t: Vec<f64> = (0..10).map(|k| k as f64 * 0.5).collect();
        let f = decay_fit(&t, &t.iter().map(|s| (-s).exp()).collect::<Vec<_>>()).unwrap();
        assert!((f.lambda_hat - 1.0).abs() < 1e-12 && (f.k_hat - 1.0).abs() < 1e-12);
        let f = decay_fit(
            &t,
            &t.iter().map(|s| 3.0 * (-2.0 * s).exp()).collect::<Vec<_>>(),
        )
        .unwrap();
        assert!((f.lambda_hat - 2.0).abs() < 1e-12 && (f.k_hat - 3.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decay_fit_needs_three_points() {
        assert!(matches!(
            decay_fit(&[0.0, 1.0, 2.0], &[1.0, 0.0, 0.5]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn analytic_law_matches_its_own_cdf() {
        let b = Binning::new(-2.0, 2.0, 8).unwrap();
        let law = EmpiricalLaw::from_cdf(|x: f64| 1.0 / (1.0 + (-x).exp()), b, true);
        assert!((law.total_mass() - 1.0).abs() < 1e-12);
        assert_eq!(law.mass_plus, law.mass_minus);
    }

    #[test]
    fn freedman_diaconis_width() {
        let xs: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0).collect();
        let b = freedman_diaconis(&xs, 0.0, 1.0).unwrap();
        let width = 2.0 * 0.5 / 1001f64.cbrt();
        assert_eq!(b.nbins, (1.0 / width).ceil() as usize);
    }
}
