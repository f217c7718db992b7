use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use serde_json::json;
use squeeze_core::analysis::depth::{certify_depth, optimal_squeezing_curve_with, DepthCurve};
use squeeze_core::analysis::noise::{noise_monte_carlo, NoiseConfig, NoiseDistribution};
use squeeze_core::analysis::scaling::{fit_power_law, log_spaced_ns, scaling_study, Scheme};
use squeeze_core::optimize::{
    oat_baseline, optimize_nested, pareto_filter, pareto_sweep, OptimizationResult, OptimizerConfig, PenaltyConfig,
};
use squeeze_core::par::map_indices;
use squeeze_core::propagator::{evolve_oat, protocol_squeezing, run_protocol, uniform_times};
use squeeze_core::{DickeState, Execution, Protocol, SqueezingReport};

use crate::output::{num, ProtocolFile, Run};
use crate::{Common, Search};

const DEFAULT_BLOCKS: [usize; 22] =
    [1, 2, 3, 4, 5, 6, 8, 10, 12, 15, 20, 25, 30, 40, 50, 60, 80, 100, 120, 150, 200, 250];

/// Tolerance for re-evaluating a stored optimum.
const REEVAL_TOL: f64 = 1e-10;

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| anyhow::anyhow!("invalid {what} {s:?}: {e}")))
        .collect()
}

fn check_xi2(xi2: f64, context: &str) -> Result<()> {
    ensure!(xi2.is_finite() && xi2 > 0.0, "invariant violated: {context} has xi2 = {xi2}");
    Ok(())
}

fn optimizer_config(steps: usize, search: &Search, exec: Execution) -> OptimizerConfig {
    let mut c = OptimizerConfig::new(steps).with_seed(search.seed).with_execution(exec);
    if let Some(s) = search.starts {
        c = c.with_starts(s);
    }
    c
}

fn optimize_checked(n: usize, config: &OptimizerConfig, penalty: Option<&PenaltyConfig>) -> Result<OptimizationResult> {
    let r = optimize_nested(n, config, penalty)?;
    let again = protocol_squeezing(n, &r.protocol)?.xi2;
    ensure!(
        (again - r.xi2).abs() <= REEVAL_TOL,
        "invariant violated: stored optimum re-evaluates to {again}, reported {}",
        r.xi2
    );
    check_xi2(r.xi2, "optimized protocol")?;
    Ok(r)
}

fn trajectory_rows(times: &[f64], reports: &[SqueezingReport]) -> Vec<Vec<String>> {
    times.iter().zip(reports).map(|(t, r)| vec![num(*t), num(r.xi2), num(r.mean_spin_len), num(r.v_min)]).collect()
}

fn oat_reports(n: usize, times: &[f64], exec: Execution) -> Result<Vec<SqueezingReport>> {
    let start = DickeState::coherent_x(n)?;
    map_indices(exec, times.len(), |i| Ok(evolve_oat(&start, times[i])?.squeezing()?)).into_iter().collect()
}

fn protocol_reports(n: usize, protocol: &Protocol, times: &[f64]) -> Result<Vec<SqueezingReport>> {
    let run = run_protocol(n, protocol, Some(times))?;
    Ok(run.trajectory.context("trajectory was requested")?.into_iter().map(|(_, r)| r).collect())
}

/* landscape ****************************************************************/

#[derive(Args, Debug)]
pub struct LandscapeArgs {
    #[arg(long, default_value_t = 2000)]
    pub n_particles: usize,
    /// First-segment duration; defaults to 0.8 times the OAT optimum.
    #[arg(long)]
    pub t1: Option<f64>,
    /// Points over theta2 in [-pi/2, pi/2); an even count includes 0.
    #[arg(long, default_value_t = 90)]
    pub theta_points: usize,
    #[arg(long, default_value_t = 0.3)]
    pub t2_max: f64,
    /// Points over T2 in [0, t2-max].
    #[arg(long, default_value_t = 61)]
    pub t2_points: usize,
    #[command(flatten)]
    pub common: Common,
}

pub fn landscape(a: &LandscapeArgs) -> Result<PathBuf> {
    ensure!(a.theta_points >= 1 && a.t2_points >= 2, "grids must be nonempty");
    ensure!(a.t2_max > 0.0, "--t2-max must be positive");
    let n = a.n_particles;
    let oat = oat_baseline(n)?;
    let t1 = a.t1.unwrap_or(0.8 * oat.duration);
    ensure!(t1 >= 0.0 && t1.is_finite(), "--t1 must be nonnegative");
    let mut run = Run::new(
        "landscape",
        &a.common.out_dir,
        json!({"n_particles": n, "t1": t1, "theta_points": a.theta_points, "t2_max": a.t2_max, "t2_points": a.t2_points}),
        None,
    )?;
    let thetas: Vec<f64> = (0..a.theta_points).map(|i| -PI / 2.0 + PI * i as f64 / a.theta_points as f64).collect();
    let t2s = uniform_times(a.t2_max, a.t2_points);
    let cells = thetas.len() * t2s.len();
    let values: Vec<f64> = map_indices(a.common.execution(), cells, |c| {
        let p = Protocol::from_params(&[t1, thetas[c / t2s.len()], t2s[c % t2s.len()]])?;
        Ok(protocol_squeezing(n, &p)?.xi2)
    })
    .into_iter()
    .collect::<squeeze_core::Result<_>>()?;

    let mut rows = Vec::with_capacity(cells);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let mut best_axis = f64::INFINITY;
    for (c, &xi2) in values.iter().enumerate() {
        let (theta, t2) = (thetas[c / t2s.len()], t2s[c % t2s.len()]);
        check_xi2(xi2, "landscape cell")?;
        if xi2 < best.0 {
            best = (xi2, theta, t2);
        }
        if theta == 0.0 {
            best_axis = best_axis.min(xi2);
        }
        rows.push(vec![num(theta), num(t2), num(xi2), num(-xi2.log10())]);
    }
    run.csv("landscape.csv", &["theta2", "T2", "xi2", "minus_log10_xi2"], &rows)?;
    run.finish(json!({
        "oat_optimum": {"duration": oat.duration, "xi2": oat.xi2},
        "grid_minimum": {"theta2": best.1, "T2": best.2, "xi2": best.0},
        "best_on_theta2_zero": if best_axis.is_finite() { json!(best_axis) } else { json!(null) },
    }))
}

/* scaling ******************************************************************/

#[derive(Args, Debug)]
pub struct ScalingArgs {
    /// Comma-separated schemes among oat, tat, opt2, opt3.
    #[arg(long, default_value = "oat")]
    pub schemes: String,
    #[arg(long, default_value_t = 100)]
    pub n_min: usize,
    #[arg(long, default_value_t = 10_000)]
    pub n_max: usize,
    /// Log-spaced particle numbers; 8 per decade by default.
    #[arg(long)]
    pub n_count: Option<usize>,
    #[command(flatten)]
    pub search: Search,
    #[command(flatten)]
    pub common: Common,
}

pub fn scaling(a: &ScalingArgs) -> Result<PathBuf> {
    ensure!(a.n_min >= 2 && a.n_max > a.n_min, "need 2 <= --n-min < --n-max");
    let schemes: Vec<Scheme> = parse_list(&a.schemes, "scheme")?;
    ensure!(!schemes.is_empty(), "no schemes given");
    let count = a.n_count.unwrap_or_else(|| (8.0 * (a.n_max as f64 / a.n_min as f64).log10()).round() as usize + 1);
    let ns = log_spaced_ns(a.n_min, a.n_max, count.max(3));
    let mut run = Run::new(
        "scaling",
        &a.common.out_dir,
        json!({"schemes": schemes.iter().map(|s| s.name()).collect::<Vec<_>>(), "ns": ns, "starts": a.search.starts}),
        Some(a.search.seed),
    )?;
    let mut fits = Vec::new();
    let mut summary = serde_json::Map::new();
    for scheme in schemes {
        let config = optimizer_config(scheme.n_steps().unwrap_or(1), &a.search, a.common.execution());
        let points = scaling_study(&ns, scheme, &config)?;
        let mut rows = Vec::new();
        let mut protocols = Vec::new();
        for p in &points {
            check_xi2(p.xi2, &format!("{} at N = {}", scheme.name(), p.n_particles))?;
            rows.push(vec![p.n_particles.to_string(), num(p.xi2), num(p.duration)]);
            if let Some(pr) = &p.protocol {
                protocols.push(ProtocolFile::new(p.n_particles, pr, p.xi2, a.search.seed));
            }
        }
        let tag = scheme.name().to_ascii_lowercase();
        run.csv(&format!("scaling_{tag}.csv"), &["N", "xi2", "duration"], &rows)?;
        if !protocols.is_empty() {
            run.json(&format!("scaling_{tag}_protocols.json"), &protocols)?;
        }
        let fit = fit_power_law(&points)?;
        fits.push(vec![scheme.name().to_string(), num(fit.beta), num(fit.prefactor), num(fit.residual)]);
        summary.insert(
            scheme.name().into(),
            json!({"beta": fit.beta, "prefactor": fit.prefactor, "residual": fit.residual}),
        );
    }
    run.csv("scaling_fit.csv", &["scheme", "beta", "prefactor", "residual"], &fits)?;
    run.finish(serde_json::Value::Object(summary))
}

/* trajectory ***************************************************************/

#[derive(Args, Debug)]
pub struct TrajectoryArgs {
    #[arg(long, default_value_t = 2000)]
    pub n_particles: usize,
    /// Comma-separated schemes among oat, opt2, opt3.
    #[arg(long, default_value = "oat,opt2,opt3")]
    pub schemes: String,
    /// Extra protocol JSON file to trace.
    #[arg(long)]
    pub protocol: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[command(flatten)]
    pub search: Search,
    #[command(flatten)]
    pub common: Common,
}

pub fn trajectory(a: &TrajectoryArgs) -> Result<PathBuf> {
    ensure!(a.samples >= 2, "--samples must be at least 2");
    let n = a.n_particles;
    let schemes: Vec<Scheme> = parse_list(&a.schemes, "scheme")?;
    ensure!(!schemes.contains(&Scheme::Tat), "tat has no protocol trajectory; use scaling");
    let mut run = Run::new(
        "trajectory",
        &a.common.out_dir,
        json!({"n_particles": n, "schemes": a.schemes, "protocol": a.protocol, "samples": a.samples, "starts": a.search.starts}),
        Some(a.search.seed),
    )?;
    let exec = a.common.execution();
    let mut traces: Vec<(String, Protocol)> = Vec::new();
    for &s in &schemes {
        if let Some(steps) = s.n_steps() {
            let r = optimize_checked(n, &optimizer_config(steps, &a.search, exec), None)?;
            traces.push((s.name().to_ascii_lowercase(), r.protocol));
        }
    }
    if let Some(path) = &a.protocol {
        let file = ProtocolFile::load(path)?;
        ensure!(file.n_particles == n, "protocol file is for N = {}, not {n}", file.n_particles);
        traces.push(("custom".into(), file.protocol()?));
    }

    let oat = oat_baseline(n)?;
    let mut summary = serde_json::Map::new();
    summary.insert("oat_optimum".into(), json!({"duration": oat.duration, "xi2": oat.xi2}));
    if schemes.contains(&Scheme::Oat) {
        let horizon = traces.iter().map(|(_, p)| p.total_duration()).fold(3.0 * oat.duration, f64::max);
        let times = uniform_times(horizon, a.samples);
        let reports = oat_reports(n, &times, exec)?;
        for r in &reports {
            check_xi2(r.xi2, "OAT trajectory")?;
        }
        run.csv("trajectory_oat.csv", &["time", "xi2", "mean_spin", "v_min"], &trajectory_rows(&times, &reports))?;
    }
    for (name, protocol) in &traces {
        let times = uniform_times(protocol.total_duration(), a.samples);
        let reports = protocol_reports(n, protocol, &times)?;
        for r in &reports {
            check_xi2(r.xi2, &format!("{name} trajectory"))?;
        }
        let last = reports.last().context("no samples")?;
        run.csv(
            &format!("trajectory_{name}.csv"),
            &["time", "xi2", "mean_spin", "v_min"],
            &trajectory_rows(&times, &reports),
        )?;
        run.json(&format!("protocol_{name}.json"), &ProtocolFile::new(n, protocol, last.xi2, a.search.seed))?;
        summary.insert(name.clone(), json!({"xi2": last.xi2, "total_duration": protocol.total_duration()}));
    }
    run.finish(serde_json::Value::Object(summary))
}

/* pareto *******************************************************************/

#[derive(Args, Debug)]
pub struct ParetoArgs {
    #[arg(long, default_value_t = 2000)]
    pub n_particles: usize,
    #[arg(long, default_value_t = 2)]
    pub steps: usize,
    /// Comma-separated ascending duration weights; defaults to 0 followed by
    /// 24 values log-spaced over [1e-2, 1e3].
    #[arg(long)]
    pub lambda_grid: Option<String>,
    #[command(flatten)]
    pub search: Search,
    #[command(flatten)]
    pub common: Common,
}

pub fn pareto(a: &ParetoArgs) -> Result<PathBuf> {
    ensure!(a.steps >= 1, "--steps must be at least 1");
    let penalty = match &a.lambda_grid {
        Some(text) => PenaltyConfig::with_grid(parse_list(text, "lambda")?),
        None => PenaltyConfig::default_sweep(),
    };
    let n = a.n_particles;
    let mut run = Run::new(
        "pareto",
        &a.common.out_dir,
        json!({"n_particles": n, "steps": a.steps, "lambda_grid": penalty.lambda_grid, "starts": a.search.starts}),
        Some(a.search.seed),
    )?;
    let config = optimizer_config(a.steps, &a.search, a.common.execution());
    let points = pareto_sweep(n, &config, &penalty)?;
    let rows: Vec<Vec<String>> =
        points.iter().map(|p| vec![num(p.lambda), num(p.total_duration), num(p.xi2)]).collect();
    for p in &points {
        check_xi2(p.xi2, "pareto point")?;
    }
    run.csv("pareto_points.csv", &["lambda", "total_duration", "xi2"], &rows)?;
    let front = pareto_filter(&points);
    ensure!(front.windows(2).all(|w| w[1].xi2 <= w[0].xi2), "invariant violated: filtered front is not nonincreasing");
    let rows: Vec<Vec<String>> = front.iter().map(|p| vec![num(p.total_duration), num(p.xi2)]).collect();
    run.csv("pareto_front.csv", &["total_duration", "xi2"], &rows)?;
    let oat = oat_baseline(n)?;
    run.finish(json!({
        "oat_optimum": {"duration": oat.duration, "xi2": oat.xi2},
        "front_points": front.len(),
        "short_end": front.first().map(|p| json!({"duration": p.total_duration, "xi2": p.xi2})),
        "long_end": front.last().map(|p| json!({"duration": p.total_duration, "xi2": p.xi2})),
    }))
}

/* noise ********************************************************************/

#[derive(Args, Debug)]
pub struct NoiseArgs {
    #[arg(long, default_value_t = 2000)]
    pub n_particles: usize,
    /// Steps of the protocol to optimize when --protocol is not given.
    #[arg(long, default_value_t = 3)]
    pub steps: usize,
    #[arg(long)]
    pub protocol: Option<PathBuf>,
    /// Comma-separated relative error magnitudes.
    #[arg(long, default_value = "0,0.001,0.01,0.05")]
    pub rel_error: String,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Truncated Gaussian errors instead of uniform ones.
    #[arg(long)]
    pub gaussian: bool,
    #[command(flatten)]
    pub search: Search,
    #[command(flatten)]
    pub common: Common,
}

pub fn noise(a: &NoiseArgs) -> Result<PathBuf> {
    let eps: Vec<f64> = parse_list(&a.rel_error, "relative error")?;
    ensure!(!eps.is_empty(), "no relative errors given");
    let n = a.n_particles;
    let exec = a.common.execution();
    let mut run = Run::new(
        "noise",
        &a.common.out_dir,
        json!({"n_particles": n, "steps": a.steps, "protocol": a.protocol, "rel_error": eps,
               "trials": a.trials, "samples": a.samples, "gaussian": a.gaussian, "starts": a.search.starts}),
        Some(a.search.seed),
    )?;
    let protocol = match &a.protocol {
        Some(path) => {
            let file = ProtocolFile::load(path)?;
            ensure!(file.n_particles == n, "protocol file is for N = {}, not {n}", file.n_particles);
            file.protocol()?
        }
        None => {
            let r = optimize_checked(n, &optimizer_config(a.steps, &a.search, exec), None)?;
            run.json("noise_protocol.json", &ProtocolFile::new(n, &r.protocol, r.xi2, a.search.seed))?;
            r.protocol
        }
    };
    let mut summary = Vec::new();
    for &e in &eps {
        let mut cfg = NoiseConfig::new(e, a.trials, a.search.seed);
        cfg.samples = a.samples;
        cfg.execution = exec;
        if a.gaussian {
            cfg.distribution = NoiseDistribution::Gaussian;
        }
        let env = noise_monte_carlo(n, &protocol, &cfg)?;
        for i in 0..env.times.len() {
            ensure!(
                env.lo[i] <= env.mean[i] && env.mean[i] <= env.hi[i],
                "invariant violated: envelope out of order at t = {}",
                env.times[i]
            );
            ensure!(e > 0.0 || env.lo[i] == env.hi[i], "invariant violated: zero error spread at t = {}", env.times[i]);
        }
        let rows: Vec<Vec<String>> = (0..env.times.len())
            .map(|i| vec![num(env.times[i]), num(env.mean[i]), num(env.lo[i]), num(env.hi[i]), num(env.ideal[i])])
            .collect();
        run.csv(&format!("noise_eps_{}.csv", num(e)), &["time", "xi2_mean", "xi2_lo", "xi2_hi", "xi2_ideal"], &rows)?;
        summary.push(json!({"rel_error": e, "final_mean": env.final_mean(), "final_width": env.final_width(),
                            "ideal_final": env.ideal.last()}));
    }
    run.finish(json!({"envelopes": summary}))
}

/* depth ********************************************************************/

#[derive(Args, Debug)]
pub struct DepthArgs {
    #[arg(long, default_value_t = 200)]
    pub n_particles: usize,
    /// Steps of the optimized protocol compared with OAT.
    #[arg(long, default_value_t = 3)]
    pub steps: usize,
    /// Comma-separated block sizes to test; defaults to roughly 10 per decade
    /// up to N.
    #[arg(long)]
    pub block_sizes: Option<String>,
    /// Points of the tabulated contrast grid in the curve file.
    #[arg(long, default_value_t = 200)]
    pub contrast_points: usize,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[command(flatten)]
    pub search: Search,
    #[command(flatten)]
    pub common: Common,
}

pub fn depth(a: &DepthArgs) -> Result<PathBuf> {
    let n = a.n_particles;
    ensure!(n >= 2, "--n-particles must be at least 2");
    ensure!(a.samples >= 2 && a.contrast_points >= 2, "grids need at least two points");
    let blocks: Vec<usize> = match &a.block_sizes {
        Some(text) => parse_list(text, "block size")?,
        None => DEFAULT_BLOCKS
            .iter()
            .copied()
            .filter(|&b| b <= n)
            .chain([n])
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    ensure!(!blocks.is_empty() && blocks.iter().all(|&b| b >= 1), "block sizes must be positive");
    let exec = a.common.execution();
    let mut run = Run::new(
        "depth",
        &a.common.out_dir,
        json!({"n_particles": n, "steps": a.steps, "block_sizes": blocks, "contrast_points": a.contrast_points,
               "samples": a.samples, "starts": a.search.starts,
               "coordinates": "contrast x = <j_x>/j, min_jz2 = minimal <j_z^2> for j = n/2; state bound (N/n) f_n(2<S_x>/N)"}),
        Some(a.search.seed),
    )?;
    let curves: Vec<DepthCurve> =
        blocks.iter().map(|&b| optimal_squeezing_curve_with(b, &[], exec)).collect::<squeeze_core::Result<_>>()?;
    let grid: Vec<f64> = (1..=a.contrast_points).map(|i| i as f64 / a.contrast_points as f64).collect();
    let mut rows = Vec::new();
    for c in &curves {
        for &x in &grid {
            rows.push(vec![c.block_size.to_string(), num(x), num(c.eval(x))]);
        }
    }
    run.csv("depth_curves.csv", &["block_size", "contrast", "min_jz2"], &rows)?;

    let oat = oat_baseline(n)?;
    let opt = optimize_checked(n, &optimizer_config(a.steps, &a.search, exec), None)?;
    let opt_name = format!("opt{}", a.steps);
    let horizon = opt.total_duration.max(3.0 * oat.duration);
    let oat_times = uniform_times(horizon, a.samples);
    let opt_times = uniform_times(opt.total_duration, a.samples);
    let traces = [
        ("oat".to_string(), oat_times.clone(), oat_reports(n, &oat_times, exec)?),
        (opt_name.clone(), opt_times.clone(), protocol_reports(n, &opt.protocol, &opt_times)?),
    ];
    let mut rows = Vec::new();
    for (name, times, reports) in &traces {
        for (t, r) in times.iter().zip(reports) {
            let cert = certify_depth(n, r, &curves)?;
            rows.push(vec![
                name.clone(),
                num(*t),
                num(r.mean_spin_len),
                num(r.v_min),
                num(r.xi2),
                cert.depth.to_string(),
            ]);
        }
    }
    run.csv("depth_states.csv", &["scheme", "time", "mean_spin", "v_min", "xi2", "depth"], &rows)?;

    let at_optimum = |state: DickeState| -> Result<usize> { Ok(certify_depth(n, &state.squeezing()?, &curves)?.depth) };
    let oat_depth = at_optimum(evolve_oat(&DickeState::coherent_x(n)?, oat.duration)?)?;
    let opt_depth = certify_depth(n, &protocol_squeezing(n, &opt.protocol)?, &curves)?.depth;
    run.json(&format!("protocol_{opt_name}.json"), &ProtocolFile::new(n, &opt.protocol, opt.xi2, a.search.seed))?;
    let mut summary = serde_json::Map::new();
    summary.insert("oat_optimum".into(), json!({"duration": oat.duration, "xi2": oat.xi2, "depth": oat_depth}));
    summary.insert(opt_name, json!({"xi2": opt.xi2, "total_duration": opt.total_duration, "depth": opt_depth}));
    summary.insert(
        "depth_convention".into(),
        json!("largest n whose n-block bound is strictly violated; the stricter reading is n + 1"),
    );
    run.finish(serde_json::Value::Object(summary))
}

/* optimize *****************************************************************/

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[arg(long, default_value_t = 2000)]
    pub n_particles: usize,
    #[arg(long, default_value_t = 2)]
    pub steps: usize,
    /// Duration weight added to the objective.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// File name of the protocol JSON inside --out-dir.
    #[arg(long, default_value = "protocol.json")]
    pub output: String,
    #[command(flatten)]
    pub search: Search,
    #[command(flatten)]
    pub common: Common,
}

pub fn optimize(a: &OptimizeArgs) -> Result<PathBuf> {
    ensure!(a.steps >= 1, "--steps must be at least 1");
    if Path::new(&a.output).components().count() != 1 {
        bail!("--output must be a plain file name");
    }
    let n = a.n_particles;
    let mut run = Run::new(
        "optimize",
        &a.common.out_dir,
        json!({"n_particles": n, "steps": a.steps, "lambda": a.lambda, "starts": a.search.starts}),
        Some(a.search.seed),
    )?;
    let config = optimizer_config(a.steps, &a.search, a.common.execution());
    let penalty = PenaltyConfig::new(a.lambda);
    let r = optimize_checked(n, &config, Some(&penalty))?;
    run.json(&a.output, &ProtocolFile::new(n, &r.protocol, r.xi2, a.search.seed))?;
    let rows: Vec<Vec<String>> = r.history.iter().enumerate().map(|(i, v)| vec![i.to_string(), num(*v)]).collect();
    run.csv("optimize_history.csv", &["start", "best_objective"], &rows)?;
    let durations: Vec<f64> = r.protocol.segments().iter().map(|s| s.duration()).collect();
    run.finish(json!({
        "xi2": r.xi2,
        "objective": r.objective,
        "total_duration": r.total_duration,
        "segment_durations_nondecreasing": durations.windows(2).all(|w| w[1] >= w[0]),
        "starts_used": r.starts_used,
        "evals_used": r.evals_used,
    }))
}
