//! Search for few-pulse twisting protocols that minimize the squeezing
//! parameter, optionally with the total duration as an additional cost.
//!
//! A protocol with `n` steps is packed as the flat vector
//! `(T1, theta2, T2, ..., theta_n, T_n)`; `theta1 = 0` is implicit.

pub mod simplex;

use std::cmp::Ordering;
use std::f64::consts::FRAC_PI_2;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{map_indices, Execution};
use crate::propagator::{canonical_theta, evolve_oat, evolve_tat, protocol_squeezing, tat_initial_state, Protocol};
use crate::spin::DickeState;

pub use simplex::{nelder_mead, SimplexOptions, SimplexResult};

/// Objective value reported when the mean spin vanishes.
pub const DEGENERATE_OBJECTIVE: f64 = 1e6;

/// Weight of the squared bound violation added to the objective.
pub const BOUND_PENALTY: f64 = 1e3;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 2_718_281_828;

/// Default upper bound on each segment duration, in units of `1/chi`.
pub const DEFAULT_T_MAX: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub n_steps: usize,
    pub starts: usize,
    pub seed: u64,
    /// Segment durations are confined to `[0, t_max]`.
    pub t_max: f64,
    /// Random starts draw durations log-uniformly from `[t_min_sample, t_max]`.
    pub t_min_sample: f64,
    pub x_tol: f64,
    pub f_tol: f64,
    /// Evaluation budget per local search.
    pub max_evals: usize,
    /// Initial simplex edge: this fraction of each duration, and this many
    /// radians for each angle.
    pub simplex_scale: f64,
    pub execution: Execution,
}

impl OptimizerConfig {
    /// Defaults: 64 starts for two steps, 256 for three or more.
    pub fn new(n_steps: usize) -> Self {
        let starts = match n_steps {
            0 | 1 => 1,
            2 => 64,
            _ => 256,
        };
        Self {
            n_steps,
            starts,
            seed: DEFAULT_SEED,
            t_max: DEFAULT_T_MAX,
            t_min_sample: 1e-4,
            x_tol: 1e-8,
            f_tol: 1e-10,
            max_evals: 20_000,
            simplex_scale: 0.2,
            execution: Execution::default(),
        }
    }

    pub fn with_starts(mut self, starts: usize) -> Self {
        self.starts = starts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn n_params(&self) -> usize {
        2 * self.n_steps - 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n_steps == 0 {
            return bad("n_steps must be at least 1");
        }
        if self.starts == 0 {
            return bad("starts must be at least 1");
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad("t_max must be positive");
        }
        if !(self.t_min_sample > 0.0 && self.t_min_sample <= self.t_max) {
            return bad("t_min_sample must lie in (0, t_max]");
        }
        if !(self.x_tol > 0.0 && self.f_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.max_evals == 0 {
            return bad("max_evals must be positive");
        }
        if !(self.simplex_scale > 0.0) {
            return bad("simplex_scale must be positive");
        }
        Ok(())
    }

    fn simplex_options(&self, x0: &[f64], scale: f64) -> SimplexOptions {
        let initial_step = x0
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                if i % 2 == 0 {
                    // duration: relative step, floored so zero-length segments can grow
                    (scale * x.abs()).max(scale * 1e-2 * self.t_max.min(0.1))
                } else {
                    scale
                }
            })
            .collect();
        SimplexOptions { x_tol: self.x_tol, f_tol: self.f_tol, max_evals: self.max_evals, initial_step, restart: true }
    }
}

/// Total-duration cost for the penalized objective `xi2 + lambda * T_total`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub lambda: f64,
    /// Ascending weights for [`pareto_sweep`].
    pub lambda_grid: Vec<f64>,
}

impl PenaltyConfig {
    pub fn new(lambda: f64) -> Self {
        Self { lambda, lambda_grid: vec![lambda] }
    }

    /// `0` followed by 24 weights log-spaced over `[1e-2, 1e3]`.
    pub fn default_sweep() -> Self {
        let mut grid = vec![0.0];
        grid.extend(log_space(1e-2, 1e3, 24));
        Self { lambda: 0.0, lambda_grid: grid }
    }

    pub fn with_grid(grid: Vec<f64>) -> Self {
        Self { lambda: grid.first().copied().unwrap_or(0.0), lambda_grid: grid }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig("lambda must be nonnegative".into()));
        }
        if self.lambda_grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidConfig("lambda grid must be nonnegative".into()));
        }
        Ok(())
    }
}

/// `count` points log-spaced over `[lo, hi]`, endpoints included.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
        }
    }
}

/* Objective ****************************************************************/

/// The squeezing objective for fixed `N`, step count and duration weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Objective {
    pub n_particles: usize,
    pub n_steps: usize,
    pub lambda: f64,
    pub t_max: f64,
}

/// A parameter vector mapped into bounds, with its bound penalty.
#[derive(Clone, Debug, PartialEq)]
pub struct Feasible {
    pub protocol: Protocol,
    pub penalty: f64,
}

impl Objective {
    pub fn new(n_particles: usize, n_steps: usize) -> Self {
        Self { n_particles, n_steps, lambda: 0.0, t_max: DEFAULT_T_MAX }
    }

    pub fn from_config(n_particles: usize, config: &OptimizerConfig, penalty: Option<&PenaltyConfig>) -> Self {
        Self { n_particles, n_steps: config.n_steps, lambda: penalty.map_or(0.0, |p| p.lambda), t_max: config.t_max }
    }

    /// Angles wrap (the objective is `pi`-periodic in each); durations are
    /// reflected into `[0, t_max]` and charged `BOUND_PENALTY * violation^2`.
    pub fn feasible(&self, params: &[f64]) -> Result<Feasible> {
        let expected = 2 * self.n_steps - 1;
        if params.len() != expected {
            return Err(Error::ParamLength { expected, got: params.len() });
        }
        let mut penalty = 0.0;
        let mut mapped = Vec::with_capacity(params.len());
        for (i, &x) in params.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::InvalidConfig(format!("non-finite parameter {x}")));
            }
            if i % 2 == 0 {
                let (t, violation) = reflect(x, self.t_max);
                penalty += BOUND_PENALTY * violation * violation;
                mapped.push(t);
            } else {
                mapped.push(canonical_theta(x));
            }
        }
        Ok(Feasible { protocol: Protocol::from_params(&mapped)?, penalty })
    }

    /// `xi2 + lambda * T_total + bound penalty`; always finite.
    pub fn value(&self, params: &[f64]) -> f64 {
        match self.feasible(params) {
            Ok(f) => self.protocol_value(&f.protocol) + f.penalty,
            Err(_) => DEGENERATE_OBJECTIVE,
        }
    }

    pub fn protocol_value(&self, protocol: &Protocol) -> f64 {
        let xi2 = match protocol_squeezing(self.n_particles, protocol) {
            Ok(r) if r.xi2.is_finite() => r.xi2,
            _ => DEGENERATE_OBJECTIVE,
        };
        xi2 + self.lambda * protocol.total_duration()
    }
}

// Reflects into [0, hi]; returns the mapped value and the distance outside.
fn reflect(x: f64, hi: f64) -> (f64, f64) {
    if x < 0.0 {
        ((-x).min(hi), -x)
    } else if x > hi {
        ((2.0 * hi - x).max(0.0), x - hi)
    } else {
        (x, 0.0)
    }
}

/// Unpenalized objective with default bounds: `xi2` of the decoded protocol.
pub fn objective(n_particles: usize, params: &[f64]) -> Result<f64> {
    if params.is_empty() || params.len() % 2 == 0 {
        return Err(Error::ParamLength { expected: 2 * (params.len() / 2) + 1, got: params.len() });
    }
    Ok(Objective::new(n_particles, (params.len() + 1) / 2).value(params))
}

/* Local and global search **************************************************/

/// Result of one local search.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Simplex descent with one restart; `f` at the result never exceeds `f(x0)`.
pub fn local_minimize<F>(f: F, x0: &[f64], config: &OptimizerConfig) -> LocalResult
where
    F: FnMut(&[f64]) -> f64,
{
    local_minimize_scaled(f, x0, config, config.simplex_scale)
}

fn local_minimize_scaled<F>(f: F, x0: &[f64], config: &OptimizerConfig, scale: f64) -> LocalResult
where
    F: FnMut(&[f64]) -> f64,
{
    let r = nelder_mead(f, x0, &config.simplex_options(x0, scale));
    LocalResult { x: r.x, f: r.f, evals: r.evals, converged: r.converged }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub n_particles: usize,
    pub protocol: Protocol,
    /// Unpenalized squeezing of `protocol`.
    pub xi2: f64,
    pub total_duration: f64,
    /// Value of the (possibly penalized) objective that was minimized.
    pub objective: f64,
    pub lambda: f64,
    pub seed: u64,
    pub starts_used: usize,
    pub evals_used: usize,
    /// Best-so-far objective after each start, in start order.
    pub history: Vec<f64>,
    /// Index of the winning start.
    pub best_start: usize,
}

impl OptimizationResult {
    pub fn params(&self) -> Vec<f64> {
        self.protocol.to_params()
    }
}

// One finished local search, ranked by (value, duration, start index).
#[derive(Clone, Debug)]
struct Candidate {
    index: usize,
    value: f64,
    duration: f64,
    protocol: Protocol,
    evals: usize,
}

fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    a.value.total_cmp(&b.value).then(a.duration.total_cmp(&b.duration)).then(a.index.cmp(&b.index))
}

/// Random starting point `index` for a configuration; reproducible from
/// `(seed, index)` alone.
pub fn random_start(config: &OptimizerConfig, index: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let (lo, hi) = (config.t_min_sample.ln(), config.t_max.ln());
    let mut x = Vec::with_capacity(config.n_params());
    for j in 0..config.n_steps {
        if j > 0 {
            x.push(rng.random_range(-FRAC_PI_2..FRAC_PI_2));
        }
        x.push(rng.random_range(lo..=hi).exp());
    }
    x
}

pub fn optimize_protocol(
    n_particles: usize,
    config: &OptimizerConfig,
    penalty: Option<&PenaltyConfig>,
) -> Result<OptimizationResult> {
    optimize_protocol_from(n_particles, config, penalty, &[])
}

/// Multi-start search: `config.starts` random starts plus one start at each
/// of `guesses` (which must have `config.n_steps` segments). Guess `i` is
/// start index `config.starts + i` for tie-breaking.
pub fn optimize_protocol_from(
    n_particles: usize,
    config: &OptimizerConfig,
    penalty: Option<&PenaltyConfig>,
    guesses: &[Protocol],
) -> Result<OptimizationResult> {
    config.validate()?;
    if let Some(p) = penalty {
        p.validate()?;
    }
    if n_particles < 1 {
        return Err(Error::TooFewParticles { min: 1, got: n_particles });
    }
    if let Some(g) = guesses.iter().find(|g| g.n_steps() != config.n_steps) {
        return Err(Error::ParamLength { expected: config.n_params(), got: g.n_params() });
    }
    let objective = Objective::from_config(n_particles, config, penalty);
    let total = config.starts + guesses.len();

    let runs: Vec<Result<Candidate>> = map_indices(config.execution, total, |index| {
        let x0 = if index < config.starts {
            random_start(config, index)
        } else {
            guesses[index - config.starts].to_params()
        };
        let local = local_minimize(|x| objective.value(x), &x0, config);
        let feasible = objective.feasible(&local.x)?;
        Ok(Candidate {
            index,
            value: local.f,
            duration: feasible.protocol.total_duration(),
            protocol: feasible.protocol,
            evals: local.evals,
        })
    });
    let runs: Vec<Candidate> = runs.into_iter().collect::<Result<_>>()?;
    finish(n_particles, config, &objective, runs)
}

fn finish(
    n_particles: usize,
    config: &OptimizerConfig,
    objective: &Objective,
    runs: Vec<Candidate>,
) -> Result<OptimizationResult> {
    let mut history = Vec::with_capacity(runs.len());
    let mut best_so_far = f64::INFINITY;
    for c in &runs {
        best_so_far = best_so_far.min(c.value);
        history.push(best_so_far);
    }
    let evals_used = runs.iter().map(|c| c.evals).sum();
    let starts_used = runs.len();
    let best = runs.into_iter().min_by(rank).ok_or(Error::InvalidConfig("no starts".into()))?;
    // Re-evaluate so the reported objective matches the stored protocol.
    let report = protocol_squeezing(n_particles, &best.protocol)?;
    let total_duration = best.protocol.total_duration();
    Ok(OptimizationResult {
        n_particles,
        xi2: report.xi2,
        total_duration,
        objective: objective.protocol_value(&best.protocol),
        lambda: objective.lambda,
        seed: config.seed,
        starts_used,
        evals_used,
        history,
        best_start: best.index,
        protocol: best.protocol,
    })
}

/// Multi-start search that also starts from the best `(n_steps - 1)`-step
/// protocol extended by a zero-length segment, so the result is never worse
/// than the shorter scheme. The shorter search uses at most 64 starts.
pub fn optimize_nested(
    n_particles: usize,
    config: &OptimizerConfig,
    penalty: Option<&PenaltyConfig>,
) -> Result<OptimizationResult> {
    if config.n_steps <= 1 {
        return optimize_protocol(n_particles, config, penalty);
    }
    let shorter = OptimizerConfig { n_steps: config.n_steps - 1, starts: config.starts.min(64), ..config.clone() };
    let base = optimize_nested(n_particles, &shorter, penalty)?;
    let guess = embed_extra_segment(&base.protocol)?;
    optimize_protocol_from(n_particles, config, penalty, &[guess])
}

/// `protocol` followed by a zero-length segment about its last axis.
pub fn embed_extra_segment(protocol: &Protocol) -> Result<Protocol> {
    let last = protocol.segments().last().expect("protocols are never empty");
    let mut params = protocol.to_params();
    params.push(last.theta());
    params.push(0.0);
    Protocol::from_params(&params)
}

/// Local search at `n_target` seeded with a previous optimum.
pub fn warm_start(
    n_target: usize,
    prior: &OptimizationResult,
    config: &OptimizerConfig,
    penalty: Option<&PenaltyConfig>,
) -> Result<OptimizationResult> {
    warm_start_from(n_target, &prior.protocol, config, penalty)
}

/// Local search at `n_target` from `seed`, with an initial simplex a quarter
/// the size used for random starts.
pub fn warm_start_from(
    n_target: usize,
    seed: &Protocol,
    config: &OptimizerConfig,
    penalty: Option<&PenaltyConfig>,
) -> Result<OptimizationResult> {
    config.validate()?;
    if seed.n_steps() != config.n_steps {
        return Err(Error::ParamLength { expected: config.n_params(), got: seed.n_params() });
    }
    let objective = Objective::from_config(n_target, config, penalty);
    let x0 = seed.to_params();
    let local = local_minimize_scaled(|x| objective.value(x), &x0, config, 0.25 * config.simplex_scale);
    let feasible = objective.feasible(&local.x)?;
    let candidate = Candidate {
        index: 0,
        value: local.f,
        duration: feasible.protocol.total_duration(),
        protocol: feasible.protocol,
        evals: local.evals,
    };
    finish(n_target, config, &objective, vec![candidate])
}

/* One-dimensional baselines ************************************************/

/// Optimal duration and squeezing of a single-parameter scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurationOptimum {
    pub duration: f64,
    pub xi2: f64,
}

/// Log-spaced scan of `f` over `[lo, hi]`, then golden-section refinement
/// around the best grid point.
pub fn minimize_duration<F>(f: F, lo: f64, hi: f64, points: usize) -> DurationOptimum
where
    F: Fn(f64) -> f64,
{
    let grid = log_space(lo, hi, points.max(3));
    let values: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
    let i = (0..grid.len()).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    let a = if i == 0 { 0.0 } else { grid[i - 1] };
    let b = grid[(i + 1).min(grid.len() - 1)];
    let (t, v) = golden_section(&f, a, b, 1e-14 * b.max(1e-300));
    if v <= values[i] {
        DurationOptimum { duration: t, xi2: v }
    } else {
        DurationOptimum { duration: grid[i], xi2: values[i] }
    }
}

fn golden_section<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn xi2_or_degenerate(state: &DickeState) -> f64 {
    state.squeezing().map_or(DEGENERATE_OBJECTIVE, |r| r.xi2)
}

/// Scan resolution shared by the one-dimensional baselines.
pub const BASELINE_SCAN_POINTS: usize = 600;

/// Best single-axis (`theta = 0`) twisting over `(0, DEFAULT_T_MAX]`.
pub fn oat_baseline(n_particles: usize) -> Result<DurationOptimum> {
    if n_particles < 2 {
        return Err(Error::TooFewParticles { min: 2, got: n_particles });
    }
    let start = DickeState::coherent_x(n_particles)?;
    let f = |t: f64| evolve_oat(&start, t).map_or(DEGENERATE_OBJECTIVE, |s| xi2_or_degenerate(&s));
    Ok(minimize_duration(f, 1e-6, DEFAULT_T_MAX, BASELINE_SCAN_POINTS))
}

/// Best two-axis twisting from the `+z` polarized state over
/// `(0, DEFAULT_T_MAX]`.
pub fn tat_baseline(n_particles: usize) -> Result<DurationOptimum> {
    if n_particles < 2 {
        return Err(Error::TooFewParticles { min: 2, got: n_particles });
    }
    let start = tat_initial_state(n_particles)?;
    let f = |t: f64| evolve_tat(&start, t).map_or(DEGENERATE_OBJECTIVE, |s| xi2_or_degenerate(&s));
    Ok(minimize_duration(f, 1e-6, DEFAULT_T_MAX, BASELINE_SCAN_POINTS))
}

/* Duration trade-off *******************************************************/

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub lambda: f64,
    pub total_duration: f64,
    pub xi2: f64,
    pub protocol: Protocol,
}

/// Minimizes `xi2 + lambda * T_total` for each `lambda` in the (ascending)
/// grid. The first weight gets a full multi-start search (as in
/// [`optimize_nested`]); each later one is warm-started from its
/// predecessor's optimum.
pub fn pareto_sweep(n_particles: usize, config: &OptimizerConfig, penalty: &PenaltyConfig) -> Result<Vec<ParetoPoint>> {
    penalty.validate()?;
    let grid = &penalty.lambda_grid;
    if grid.is_empty() {
        return Err(Error::InvalidConfig("lambda grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidConfig("lambda grid must be ascending".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    let mut prior: Option<OptimizationResult> = None;
    for &lambda in grid {
        let pen = PenaltyConfig::new(lambda);
        let result = match &prior {
            None => optimize_nested(n_particles, config, Some(&pen))?,
            Some(p) => warm_start(n_particles, p, config, Some(&pen))?,
        };
        points.push(ParetoPoint {
            lambda,
            total_duration: result.total_duration,
            xi2: result.xi2,
            protocol: result.protocol.clone(),
        });
        prior = Some(result);
    }
    Ok(points)
}

/// Non-dominated points sorted by increasing duration; `xi2` is strictly
/// decreasing along the result.
pub fn pareto_filter(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut sorted: Vec<&ParetoPoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.total_duration.total_cmp(&b.total_duration).then(a.xi2.total_cmp(&b.xi2)));
    let mut front: Vec<ParetoPoint> = Vec::new();
    for p in sorted {
        if front.last().is_none_or(|last| p.xi2 < last.xi2) {
            front.push(p.clone());
        }
    }
    front
}
