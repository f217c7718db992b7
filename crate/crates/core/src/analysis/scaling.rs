use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::{
    oat_baseline, optimize_nested, tat_baseline, warm_start_from, Objective, OptimizationResult, OptimizerConfig,
};
use crate::par::map_slice;
use crate::propagator::Protocol;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    Oat,
    Tat,
    Opt2,
    Opt3,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Oat => "OAT",
            Scheme::Tat => "TAT",
            Scheme::Opt2 => "OPT2",
            Scheme::Opt3 => "OPT3",
        }
    }

    /// Segment count of the optimized schemes.
    pub fn n_steps(self) -> Option<usize> {
        match self {
            Scheme::Opt2 => Some(2),
            Scheme::Opt3 => Some(3),
            _ => None,
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oat" => Ok(Scheme::Oat),
            "tat" => Ok(Scheme::Tat),
            "opt2" => Ok(Scheme::Opt2),
            "opt3" => Ok(Scheme::Opt3),
            _ => Err(Error::InvalidConfig(format!("unknown scheme {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n_particles: usize,
    pub xi2: f64,
    pub scheme: Scheme,
    /// Optimal duration (single-parameter schemes) or total protocol duration.
    pub duration: f64,
    /// Optimized protocol, for OPT schemes.
    pub protocol: Option<Protocol>,
}

/// Optimal squeezing of `scheme` at each `N` of the ascending list `ns`.
///
/// OAT and TAT points are independent one-dimensional searches. OPT points
/// start with a multi-start search at `ns[0]` and continue upward by warm
/// starts. For OPT3 the multi-start also starts from the OPT2 optimum at
/// `ns[0]`.
pub fn scaling_study(ns: &[usize], scheme: Scheme, config: &OptimizerConfig) -> Result<Vec<ScalingPoint>> {
    if ns.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("particle numbers must be strictly ascending".into()));
    }
    if ns[0] < 2 {
        return Err(Error::TooFewParticles { min: 2, got: ns[0] });
    }
    match scheme.n_steps() {
        None => {
            let points = map_slice(config.execution, ns, |&n| {
                let opt = match scheme {
                    Scheme::Oat => oat_baseline(n)?,
                    _ => tat_baseline(n)?,
                };
                Ok(ScalingPoint { n_particles: n, xi2: opt.xi2, scheme, duration: opt.duration, protocol: None })
            });
            points.into_iter().collect()
        }
        Some(steps) => {
            let config = OptimizerConfig { n_steps: steps, ..config.clone() };
            let first = optimize_scheme(ns[0], scheme, &config)?;
            let results = continuation(first, &ns[1..], &config, CONTINUATION_RATIO)?;
            Ok(results.iter().map(|r| point(scheme, r)).collect())
        }
    }
}

/// Largest ratio between consecutive particle numbers in a continuation.
pub const CONTINUATION_RATIO: f64 = 1.2;

/// Follows an optimum to each of the ascending `targets` by warm starts.
///
/// Steps between targets are split so that consecutive `N` differ by at most
/// `max_ratio`. Once two solved points exist, each parameter is extrapolated
/// as a power of `N` (linearly in `log N` when it changes sign), and the
/// local search starts from whichever of the extrapolation and the previous
/// optimum is better at the new `N`. Returns `first` followed by one result
/// per target.
pub fn continuation(
    first: OptimizationResult,
    targets: &[usize],
    config: &OptimizerConfig,
    max_ratio: f64,
) -> Result<Vec<OptimizationResult>> {
    if !(max_ratio > 1.0) {
        return Err(Error::InvalidConfig("continuation ratio must exceed 1".into()));
    }
    if targets.first().is_some_and(|&t| t <= first.n_particles) || targets.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("continuation targets must increase".into()));
    }
    let objective = |n: usize| Objective::new(n, config.n_steps);
    let mut trail: Vec<(usize, Vec<f64>)> = vec![(first.n_particles, first.protocol.to_params())];
    let mut out = vec![first];
    for &target in targets {
        let mut current = out.last().cloned().expect("starts with the first optimum");
        while current.n_particles < target {
            let n =
                ((current.n_particles as f64 * max_ratio).floor() as usize).max(current.n_particles + 1).min(target);
            let previous = current.protocol.to_params();
            let mut seed = previous.clone();
            if trail.len() >= 2 {
                let (na, pa) = &trail[trail.len() - 2];
                let (nb, pb) = &trail[trail.len() - 1];
                let predicted = extrapolate(*na, pa, *nb, pb, n);
                let obj = objective(n);
                if obj.value(&predicted) < obj.value(&previous) {
                    seed = predicted;
                }
            }
            let seed = obj_feasible(&objective(n), &seed)?;
            current = warm_start_from(n, &seed, config, None)?;
            trail.push((n, current.protocol.to_params()));
        }
        out.push(current);
    }
    Ok(out)
}

fn obj_feasible(objective: &Objective, params: &[f64]) -> Result<Protocol> {
    Ok(objective.feasible(params)?.protocol)
}

// Per-parameter power law through (na, pa) and (nb, pb), evaluated at n.
fn extrapolate(na: usize, pa: &[f64], nb: usize, pb: &[f64], n: usize) -> Vec<f64> {
    let span = (nb as f64 / na as f64).ln();
    let step = (n as f64 / nb as f64).ln();
    pa.iter()
        .zip(pb)
        .map(|(&a, &b)| if a * b > 0.0 { b * ((b / a).ln() / span * step).exp() } else { b + (b - a) / span * step })
        .collect()
}

/// Multi-start optimum of an OPT scheme at one `N`; OPT3 also starts from
/// the embedded OPT2 optimum.
pub fn optimize_scheme(n_particles: usize, scheme: Scheme, config: &OptimizerConfig) -> Result<OptimizationResult> {
    let steps = scheme
        .n_steps()
        .ok_or_else(|| Error::InvalidConfig(format!("{} is not an optimized scheme", scheme.name())))?;
    optimize_nested(n_particles, &OptimizerConfig { n_steps: steps, ..config.clone() }, None)
}

fn point(scheme: Scheme, r: &OptimizationResult) -> ScalingPoint {
    ScalingPoint {
        n_particles: r.n_particles,
        xi2: r.xi2,
        scheme,
        duration: r.total_duration,
        protocol: Some(r.protocol.clone()),
    }
}

/// Least-squares fit of `xi2 = prefactor * N^(-beta)` in log-log space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub beta: f64,
    pub prefactor: f64,
    /// RMS of the log-space residuals.
    pub residual: f64,
}

impl PowerLawFit {
    pub fn predict(&self, n: f64) -> f64 {
        self.prefactor * n.powf(-self.beta)
    }
}

pub fn fit_power_law(points: &[ScalingPoint]) -> Result<PowerLawFit> {
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.n_particles as f64, p.xi2)).collect();
    fit_power_law_pairs(&pairs)
}

/// Same fit on raw `(N, xi2)` pairs; `N` need not be an integer.
pub fn fit_power_law_pairs(pairs: &[(f64, f64)]) -> Result<PowerLawFit> {
    if pairs.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: pairs.len() });
    }
    if let Some(&(n, y)) = pairs.iter().find(|(n, y)| !(*n > 0.0 && *y > 0.0)) {
        return Err(Error::InvalidConfig(format!("power-law fit needs positive data, got ({n}, {y})")));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 1e-24 * (1.0 + mx * mx)) {
        return Err(Error::DegenerateAbscissa);
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(PowerLawFit { beta: -slope, prefactor: intercept.exp(), residual: (ss / m).sqrt() })
}

/// `count` integers log-spaced over `[lo, hi]`, deduplicated.
pub fn log_spaced_ns(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let mut ns: Vec<usize> =
        crate::optimize::log_space(lo as f64, hi as f64, count).into_iter().map(|x| x.round() as usize).collect();
    ns.dedup();
    ns
}
