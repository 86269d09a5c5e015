use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use pdmp_core::analysis::{default_decay_times, SearchConfig, FIGURE_TIMES};
use pdmp_core::coupling_engine::DEFAULT_WINDOW;
use pdmp_core::{Flavor, InitialVelocity, RatePairSpec, RateSpec, State, Velocity};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// overrides every per-experiment replica count
    pub replicas: Option<usize>,
    pub out: PathBuf,
    pub rates: RatePairSpec,
    pub simulate: SimulateParams,
    pub invariant: InvariantParams,
    pub couple: CoupleParams,
    pub decay: DecayParams,
    pub bounds: BoundsParams,
    pub scaling: ScalingParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            replicas: None,
            out: PathBuf::from("out"),
            rates: RatePairSpec {
                a: RateSpec::constant(1.0),
                b: RateSpec::affine(1.0, 1.0),
            },
            simulate: SimulateParams::default(),
            invariant: InvariantParams::default(),
            couple: CoupleParams::default(),
            decay: DecayParams::default(),
            bounds: BoundsParams::default(),
            scaling: ScalingParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateParams {
    pub start: State,
    pub horizon: f64,
    pub flavor: Flavor,
    pub replicas: usize,
    /// how many replicas have their full path written
    pub paths: usize,
    pub event_guard: Option<u64>,
}

impl Default for SimulateParams {
    fn default() -> Self {
        SimulateParams {
            start: State::new(0.0, Velocity::Plus),
            horizon: 10.0,
            flavor: Flavor::Unreflected,
            replicas: 1000,
            paths: 1,
            event_guard: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvariantParams {
    pub start: State,
    pub times: Vec<f64>,
    pub replicas: usize,
}

impl Default for InvariantParams {
    fn default() -> Self {
        InvariantParams {
            start: State::new(5.0, Velocity::Minus),
            times: FIGURE_TIMES.to_vec(),
            replicas: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoupleParams {
    pub first: State,
    pub second: State,
    pub flavor: Flavor,
    /// origin window length of the unreflected coupling
    pub window: f64,
    pub replicas: usize,
}

impl Default for CoupleParams {
    fn default() -> Self {
        CoupleParams {
            first: State::new(1.0, Velocity::Plus),
            second: State::new(0.0, Velocity::Minus),
            flavor: Flavor::Unreflected,
            window: DEFAULT_WINDOW,
            replicas: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayParams {
    pub first: State,
    pub second: State,
    pub flavor: Flavor,
    pub times: Vec<f64>,
    pub replicas: usize,
}

impl Default for DecayParams {
    fn default() -> Self {
        DecayParams {
            first: State::new(1.0, Velocity::Plus),
            second: State::new(0.0, Velocity::Minus),
            flavor: Flavor::Unreflected,
            times: default_decay_times(),
            replicas: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsParams {
    pub alphas: Vec<f64>,
    pub r_step: f64,
    pub r_max: f64,
    /// stick samples behind each E_R estimate
    pub samples: usize,
    pub with_hitting: bool,
    /// fixes R instead of scanning for it
    pub r: Option<f64>,
    /// fixes alpha instead of trying `alphas`
    pub alpha: Option<f64>,
    /// crossing height of the crossing-point bound
    pub crossing: f64,
    pub upper: State,
    pub lower: State,
    pub hitting_start: State,
    /// defaults to a quarter of the admissible range
    pub hitting_lambda: Option<f64>,
    /// Monte Carlo replicas checking each bound; 0 skips the check
    pub replicas: usize,
}

impl Default for BoundsParams {
    fn default() -> Self {
        let s = SearchConfig::default();
        BoundsParams {
            alphas: s.alphas,
            r_step: s.r_step,
            r_max: s.r_max,
            samples: s.samples,
            with_hitting: s.with_hitting,
            r: None,
            alpha: None,
            crossing: 1.0,
            upper: State::new(2.0, Velocity::Plus),
            lower: State::new(0.0, Velocity::Minus),
            hitting_start: State::new(2.0, Velocity::Minus),
            hitting_lambda: None,
            replicas: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingParams {
    pub ns: Vec<u32>,
    pub level: f64,
    pub gap: f64,
    pub slope: f64,
    pub y0: f64,
    pub w0: InitialVelocity,
    pub t: f64,
    pub replicas: usize,
    /// member used by the martingale diagnostic
    pub martingale_n: u32,
    /// grid step of the written sample path of the largest member
    pub path_step: f64,
}

impl Default for ScalingParams {
    fn default() -> Self {
        ScalingParams {
            ns: vec![4, 16, 64],
            level: 1.0,
            gap: 0.0,
            slope: 2.0,
            y0: 1.0,
            w0: InitialVelocity::Uniform,
            t: 1.0,
            replicas: 10_000,
            martingale_n: 16,
            path_step: 1e-3,
        }
    }
}

/// Reads a TOML or JSON config; the format follows the extension, and files
/// without a known extension are tried as TOML first.
pub fn load(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let cfg = match ext {
        "json" => serde_json::from_str(&text)
            .with_context(|| format!("invalid JSON config {}", path.display()))?,
        "toml" => toml::from_str(&text)
            .with_context(|| format!("invalid TOML config {}", path.display()))?,
        _ => match toml::from_str(&text) {
            Ok(c) => c,
            Err(e) => serde_json::from_str(&text)
                .map_err(|_| e)
                .with_context(|| format!("invalid config {}", path.display()))?,
        },
    };
    Ok(cfg)
}

pub fn check_positive(name: &str, x: f64) -> anyhow::Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        bail!("{name} must be positive and finite, got {x}");
    }
    Ok(())
}

pub fn check_times(times: &[f64]) -> anyhow::Result<()> {
    if times.is_empty() {
        bail!("time grid is empty");
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0])
    {
        bail!("time grid must be finite, non-negative and non-decreasing");
    }
    Ok(())
}
