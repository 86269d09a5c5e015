use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::anyhow;
use rayon::prelude::*;
use serde_json::{json, Value};

use pdmp_core::analysis::{
    compare_to_reference, coupling_time_bound, coupling_time_bound_from_starts, hitting_bound,
    search_parameters, tv_curve, BoundReport, SearchConfig,
};
use pdmp_core::coupling_engine::{couple_reflected, couple_unreflected};
use pdmp_core::pdmp_sim::{hitting_time_zero, simulate_guarded, DEFAULT_EVENT_GUARD};
use pdmp_core::rng::replica_stream;
use pdmp_core::scaling_lab::{martingale_diagnostic, sample_scaled_grid, weak_convergence_report};
use pdmp_core::stats::mean_se;
use pdmp_core::{Flavor, Potential, RatePair, ScalingFamily, State, Trajectory};

use crate::config::{check_positive, check_times, ExperimentConfig};

/// Why a run stopped; each kind has its own exit status.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Guard(anyhow::Error),
    Run(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Guard(_) => 3,
            Failure::Run(_) => 1,
        }
    }

    pub fn message(&self) -> String {
        let e = match self {
            Failure::Config(e) | Failure::Guard(e) | Failure::Run(e) => e,
        };
        format!("{e:#}")
    }
}

impl From<pdmp_core::Error> for Failure {
    fn from(e: pdmp_core::Error) -> Self {
        match e {
            pdmp_core::Error::EventGuard { .. } | pdmp_core::Error::IterationGuard(_) => {
                Failure::Guard(e.into())
            }
            _ => Failure::Run(e.into()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.into())
    }
}

type Outcome = Result<Value, Failure>;

fn config_err<T>(r: anyhow::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Config)
}

fn rate_pair(cfg: &ExperimentConfig) -> Result<RatePair, Failure> {
    RatePair::from_spec(&cfg.rates).map_err(|e| Failure::Config(e.into()))
}

fn replicas(cfg: &ExperimentConfig, default: usize) -> Result<usize, Failure> {
    let n = cfg.replicas.unwrap_or(default);
    if n == 0 {
        return Err(Failure::Config(anyhow!("replica count must be positive")));
    }
    Ok(n)
}

fn reflected_start(name: &str, s: &State) -> Result<(), Failure> {
    if !(s.position >= 0.0 && s.position.is_finite()) {
        return Err(Failure::Config(anyhow!(
            "{name} must have a finite position >= 0, got {}",
            s.position
        )));
    }
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json(dir: &Path, name: &str, v: &impl serde::Serialize) -> Result<(), Failure> {
    let mut f = create(dir, name)?;
    serde_json::to_writer(&mut f, v).map_err(|e| Failure::Run(e.into()))?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn to_value(v: &impl serde::Serialize) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn mean_and_se(xs: &[f64]) -> Value {
    let m = mean_se(xs);
    json!({ "mean": m.mean, "se": m.se })
}

pub fn simulate(cfg: &ExperimentConfig) -> Outcome {
    let p = &cfg.simulate;
    let pair = rate_pair(cfg)?;
    let n = replicas(cfg, p.replicas)?;
    config_err(check_positive("horizon", p.horizon))?;
    if p.flavor == Flavor::Reflected {
        reflected_start("start", &p.start)?;
    }
    let guard = p.event_guard.unwrap_or(DEFAULT_EVENT_GUARD);
    let trajs = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_stream(cfg.seed, i);
            simulate_guarded(&pair, p.start, p.horizon, p.flavor, guard, &mut rng)
        })
        .collect::<pdmp_core::Result<Vec<Trajectory>>>()?;
    let mut f = create(&cfg.out, "final_states.csv")?;
    writeln!(f, "replica,position,velocity,switches")?;
    for (i, t) in trajs.iter().enumerate() {
        let s = t.final_state();
        writeln!(
            f,
            "{i},{:.16e},{},{}",
            s.position,
            s.velocity.value() as i8,
            t.switches()
        )?;
    }
    f.flush()?;
    let mut f = create(&cfg.out, "paths.csv")?;
    writeln!(f, "replica,t,position,velocity")?;
    for (i, t) in trajs.iter().take(p.paths).enumerate() {
        let mut rows = vec![t.initial];
        rows.extend(t.events.iter().map(|e| e.state()));
        rows.push(t.final_state());
        for s in rows {
            writeln!(
                f,
                "{i},{:.16e},{:.16e},{}",
                s.clock,
                s.position,
                s.velocity.value() as i8
            )?;
        }
    }
    f.flush()?;
    let finals: Vec<f64> = trajs.iter().map(|t| t.final_state().position).collect();
    let switches: Vec<f64> = trajs.iter().map(|t| t.switches() as f64).collect();
    Ok(json!({
        "horizon": p.horizon,
        "final_position": mean_and_se(&finals),
        "switches": mean_and_se(&switches),
    }))
}

pub fn invariant(cfg: &ExperimentConfig) -> Outcome {
    let p = &cfg.invariant;
    let pair = rate_pair(cfg)?;
    let n = replicas(cfg, p.replicas)?;
    config_err(check_times(&p.times))?;
    let pot = Potential::new(&pair)?;
    let cmp = compare_to_reference(
        &pair,
        p.start,
        &p.times,
        Flavor::Unreflected,
        n,
        cfg.seed,
        |y| pot.cdf(y),
    )?;
    let b = cmp.curve.binning;
    let mut f = create(&cfg.out, "histograms.csv")?;
    writeln!(f, "t,bin_lo,bin_hi,empirical,invariant")?;
    for (t, law) in p.times.iter().zip(&cmp.laws) {
        for k in 0..b.nbins {
            writeln!(
                f,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                t,
                b.edge(k),
                b.edge(k + 1),
                law.mass_plus[k],
                cmp.reference.mass_plus[k]
            )?;
        }
    }
    f.flush()?;
    write_tv_csv(
        &cfg.out,
        "tv.csv",
        &cmp.curve.times,
        &cmp.curve.tv,
        &cmp.curve.se,
    )?;
    Ok(json!({ "times": p.times, "tv": cmp.curve.tv, "se": cmp.curve.se, "bins": b.nbins }))
}

fn write_tv_csv(dir: &Path, name: &str, t: &[f64], tv: &[f64], se: &[f64]) -> Result<(), Failure> {
    let mut f = create(dir, name)?;
    writeln!(f, "t,tv,se")?;
    for k in 0..t.len() {
        writeln!(f, "{:.16e},{:.16e},{:.16e}", t[k], tv[k], se[k])?;
    }
    f.flush()?;
    Ok(())
}

pub fn couple(cfg: &ExperimentConfig) -> Outcome {
    let p = &cfg.couple;
    let pair = rate_pair(cfg)?;
    let n = replicas(cfg, p.replicas)?;
    config_err(check_positive("window", p.window))?;
    if p.flavor == Flavor::Reflected {
        reflected_start("first", &p.first)?;
        reflected_start("second", &p.second)?;
    }
    let outcomes = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_stream(cfg.seed, i);
            match p.flavor {
                Flavor::Reflected => couple_reflected(&pair, p.first, p.second, &mut rng),
                Flavor::Unreflected => {
                    couple_unreflected(&pair, p.first, p.second, p.window, &mut rng)
                }
            }
        })
        .collect::<pdmp_core::Result<Vec<_>>>()?;
    let mut f = create(&cfg.out, "coupling.csv")?;
    writeln!(f, "replica,t_crossing,x_crossing,t_star,attempts,windows")?;
    for (i, o) in outcomes.iter().enumerate() {
        writeln!(
            f,
            "{i},{:.16e},{:.16e},{:.16e},{},{}",
            o.t_crossing, o.x_crossing, o.t_star, o.attempts, o.windows
        )?;
    }
    f.flush()?;
    let t_star: Vec<f64> = outcomes.iter().map(|o| o.t_star).collect();
    let t_cross: Vec<f64> = outcomes.iter().map(|o| o.t_crossing).collect();
    Ok(json!({
        "flavor": p.flavor,
        "t_star": mean_and_se(&t_star),
        "t_crossing": mean_and_se(&t_cross),
        "t_star_max": t_star.iter().cloned().fold(0.0, f64::max),
    }))
}

pub fn decay(cfg: &ExperimentConfig) -> Outcome {
    let p = &cfg.decay;
    let pair = rate_pair(cfg)?;
    let n = replicas(cfg, p.replicas)?;
    config_err(check_times(&p.times))?;
    if p.flavor == Flavor::Reflected {
        reflected_start("first", &p.first)?;
        reflected_start("second", &p.second)?;
    }
    let curve = tv_curve(&pair, p.first, p.second, &p.times, p.flavor, n, cfg.seed)?;
    write_tv_csv(&cfg.out, "decay.csv", &curve.times, &curve.tv, &curve.se)?;
    let fit = curve.fit()?;
    let fit_json = json!({ "lambda_hat": fit.lambda_hat, "K_hat": fit.k_hat, "r2": fit.r2 });
    write_json(&cfg.out, "fit.json", &fit_json)?;
    Ok(
        json!({ "fit": fit_json, "used": fit.used, "floor": curve.floor, "bins": curve.binning.nbins }),
    )
}

fn laplace_mc<F>(n: usize, lambda: f64, sample: F) -> Result<Value, Failure>
where
    F: Fn(u64) -> pdmp_core::Result<f64> + Sync,
{
    let vals = (0..n as u64)
        .into_par_iter()
        .map(|i| sample(i).map(|t| (lambda * t).exp()))
        .collect::<pdmp_core::Result<Vec<f64>>>()?;
    Ok(mean_and_se(&vals))
}

pub fn bounds(cfg: &ExperimentConfig) -> Outcome {
    let p = &cfg.bounds;
    let pair = rate_pair(cfg)?;
    let n = cfg.replicas.unwrap_or(p.replicas);
    reflected_start("upper", &p.upper)?;
    reflected_start("lower", &p.lower)?;
    reflected_start("hitting_start", &p.hitting_start)?;
    if !(p.crossing >= 0.0 && p.crossing.is_finite()) {
        return Err(Failure::Config(anyhow!(
            "crossing height must be finite and >= 0, got {}",
            p.crossing
        )));
    }
    let mut search = SearchConfig {
        alphas: p.alpha.map_or_else(|| p.alphas.clone(), |a| vec![a]),
        r_step: p.r_step,
        r_max: p.r_max,
        samples: p.samples,
        seed: cfg.seed,
        with_hitting: p.with_hitting,
    };
    if let Some(r) = p.r {
        config_err(check_positive("r", r))?;
        search.r_step = r;
        search.r_max = r;
    }
    config_err(check_positive("r_step", search.r_step))?;
    if search.alphas.is_empty() || search.alphas.iter().any(|a| a.is_nan() || *a <= 0.0) {
        return Err(Failure::Config(anyhow!("alphas must be positive")));
    }
    let params = search_parameters(&pair, &search)?;
    let crossing_bound = coupling_time_bound(&pair, p.crossing, &params)?;
    let start_bound = coupling_time_bound_from_starts(&pair, p.upper, p.lower, &params)?;
    let range = hitting_bound(
        &pair,
        p.hitting_start.position,
        p.hitting_start.velocity,
        0.0,
    )?;
    let lambda_h = p.hitting_lambda.unwrap_or(range.rho / 4.0);
    let hit = hitting_bound(
        &pair,
        p.hitting_start.position,
        p.hitting_start.velocity,
        lambda_h,
    )?;
    let report = BoundReport::new(&params, crossing_bound);
    write_json(&cfg.out, "bounds.json", &report)?;
    let mut detail = json!({
        "params": to_value(&params),
        "crossing": { "x": p.crossing, "bound": crossing_bound },
        "starts": { "upper": p.upper, "lower": p.lower, "bound": start_bound },
        "hitting": { "start": p.hitting_start, "lambda": lambda_h, "report": to_value(&hit) },
    });
    if n > 0 {
        let lam = params.lambda;
        let x = p.crossing;
        detail["crossing"]["monte_carlo"] = laplace_mc(n, lam, |i| {
            let mut rng = replica_stream(cfg.seed ^ 0xC2, i);
            let (up, down) = (
                State::new(x, pdmp_core::Velocity::Plus),
                State::new(x, pdmp_core::Velocity::Minus),
            );
            couple_reflected(&pair, up, down, &mut rng).map(|o| o.t_star)
        })?;
        detail["starts"]["monte_carlo"] = laplace_mc(n, lam, |i| {
            let mut rng = replica_stream(cfg.seed ^ 0xC1, i);
            couple_reflected(&pair, p.upper, p.lower, &mut rng).map(|o| o.t_star)
        })?;
        detail["hitting"]["monte_carlo"] = laplace_mc(n, lambda_h, |i| {
            let mut rng = replica_stream(cfg.seed ^ 0xC3, i);
            hitting_time_zero(&pair, p.hitting_start, &mut rng).map(|h| h.z_time)
        })?;
    }
    write_json(&cfg.out, "bounds_detail.json", &detail)?;
    Ok(json!({ "report": to_value(&report), "detail": detail }))
}

pub fn scaling(cfg: &ExperimentConfig) -> Outcome {
    let p = &cfg.scaling;
    let n = replicas(cfg, p.replicas)?;
    let families =
        p.ns.iter()
            .map(|&k| ScalingFamily::new(k, p.level, p.gap, p.slope))
            .collect::<pdmp_core::Result<Vec<_>>>()
            .map_err(|e| Failure::Config(e.into()))?;
    if families.len() < 2 {
        return Err(Failure::Config(anyhow!(
            "scaling needs at least two values of N"
        )));
    }
    config_err(check_positive("t", p.t))?;
    config_err(check_positive("path_step", p.path_step))?;
    let mart_family = ScalingFamily::new(p.martingale_n, p.level, p.gap, p.slope)
        .map_err(|e| Failure::Config(e.into()))?;
    let report = weak_convergence_report(&families, p.y0, p.w0, p.t, n, cfg.seed)?;
    let mart = martingale_diagnostic(&mart_family, p.y0, p.w0, p.t, n, cfg.seed)?;
    let mut f = create(&cfg.out, "scaling.jsonl")?;
    for m in &report.members {
        serde_json::to_writer(&mut f, m).map_err(|e| Failure::Run(e.into()))?;
        writeln!(f)?;
    }
    f.flush()?;
    write_json(&cfg.out, "martingale.json", &mart)?;
    let largest = families.iter().max_by_key(|f| f.n).expect("non-empty");
    let mut rng = replica_stream(cfg.seed, 0);
    let path = sample_scaled_grid(largest, p.y0, p.w0, p.t, p.path_step, &mut rng)?;
    let mut f = create(&cfg.out, "scaled_path.csv")?;
    writeln!(f, "t,xi")?;
    for (t, x) in path {
        writeln!(f, "{t:.16e},{x:.16e}")?;
    }
    f.flush()?;
    Ok(json!({
        "ks": report.members.iter().map(|m| m.ks).collect::<Vec<_>>(),
        "ks_exact": report.members.iter().map(|m| m.ks_exact).collect::<Vec<_>>(),
        "ks_decreasing": report.ks_decreasing,
        "richardson_ks": report.richardson_ks,
        "martingale": to_value(&mart),
    }))
}
