//! Robustness of a protocol against random relative errors in its control
//! parameters.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{map_indices, Execution};
use crate::propagator::{run_protocol, uniform_times, Protocol};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseDistribution {
    /// `u` uniform on `[-eps, eps]`.
    #[default]
    Uniform,
    /// `u` normal with standard deviation `eps`, truncated at `5 eps`.
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub rel_error: f64,
    pub trials: usize,
    pub seed: u64,
    /// Points on the shared time grid.
    pub samples: usize,
    pub distribution: NoiseDistribution,
    pub execution: Execution,
}

impl NoiseConfig {
    pub fn new(rel_error: f64, trials: usize, seed: u64) -> Self {
        Self {
            rel_error,
            trials,
            seed,
            samples: 200,
            distribution: NoiseDistribution::Uniform,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_error >= 0.0 && self.rel_error.is_finite()) {
            return Err(Error::InvalidConfig("relative error must be nonnegative".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("at least one trial is required".into()));
        }
        if self.samples < 2 {
            return Err(Error::InvalidConfig("at least two time samples are required".into()));
        }
        Ok(())
    }
}

/// Per-time statistics of `xi2` over the perturbed trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseEnvelope {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Unperturbed protocol on the same grid.
    pub ideal: Vec<f64>,
    /// `xi2(t)` of every trial.
    pub trajectories: Vec<Vec<f64>>,
    pub trials: usize,
    pub rel_error: f64,
}

impl NoiseEnvelope {
    pub fn final_width(&self) -> f64 {
        self.hi.last().copied().unwrap_or(0.0) - self.lo.last().copied().unwrap_or(0.0)
    }

    pub fn final_mean(&self) -> f64 {
        self.mean.last().copied().unwrap_or(f64::NAN)
    }
}

/// Unit-scale draws `u / eps` for trial `index`; scaling by `eps` afterwards
/// gives common random numbers across error magnitudes.
pub fn unit_perturbations(config: &NoiseConfig, index: usize, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    (0..count)
        .map(|_| match config.distribution {
            NoiseDistribution::Uniform => rng.random_range(-1.0..=1.0),
            NoiseDistribution::Gaussian => truncated_normal(&mut rng, 5.0),
        })
        .collect()
}

fn truncated_normal(rng: &mut ChaCha8Rng, cut: f64) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= cut {
            return z;
        }
    }
}

/// Protocol with every free parameter multiplied by `1 + eps * unit[i]`.
pub fn perturb(protocol: &Protocol, unit: &[f64], eps: f64) -> Result<Protocol> {
    let params: Vec<f64> = protocol.to_params().iter().zip(unit).map(|(p, u)| p * (1.0 + eps * u)).collect();
    Protocol::from_params(&params)
}

/// Runs `trials` perturbed copies of `protocol` and aggregates their `xi2(t)`
/// on a uniform grid spanning the longest trial. Trials that end earlier hold
/// their final value.
pub fn noise_monte_carlo(n_particles: usize, protocol: &Protocol, config: &NoiseConfig) -> Result<NoiseEnvelope> {
    config.validate()?;
    let n_params = protocol.n_params();
    let perturbed: Vec<Protocol> = (0..config.trials)
        .map(|i| perturb(protocol, &unit_perturbations(config, i, n_params), config.rel_error))
        .collect::<Result<_>>()?;
    let horizon = perturbed.iter().map(Protocol::total_duration).fold(protocol.total_duration(), f64::max);
    let times = uniform_times(horizon, config.samples);

    let trace = |p: &Protocol| -> Result<Vec<f64>> {
        let end = p.total_duration();
        let inside: Vec<f64> = times.iter().map(|&t| t.min(end)).collect();
        let run = run_protocol(n_particles, p, Some(&inside))?;
        Ok(run.trajectory.expect("sample times were given").into_iter().map(|(_, r)| r.xi2).collect())
    };
    let ideal = trace(protocol)?;
    let trajectories: Vec<Vec<f64>> =
        map_indices(config.execution, perturbed.len(), |i| trace(&perturbed[i])).into_iter().collect::<Result<_>>()?;

    let m = times.len();
    let mut mean = vec![0.0; m];
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for tr in &trajectories {
        for i in 0..m {
            mean[i] += tr[i];
            lo[i] = lo[i].min(tr[i]);
            hi[i] = hi[i].max(tr[i]);
        }
    }
    let count = trajectories.len() as f64;
    for i in 0..m {
        // Clamping absorbs the rounding of the sum when all trials agree.
        mean[i] = (mean[i] / count).clamp(lo[i], hi[i]);
    }
    Ok(NoiseEnvelope { times, mean, lo, hi, ideal, trajectories, trials: config.trials, rel_error: config.rel_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn protocol() -> Protocol {
        Protocol::from_params(&[0.02, -0.3, 0.1]).unwrap()
    }

    #[test]
    fn zero_error_reproduces_ideal() {
        let env = noise_monte_carlo(40, &protocol(), &NoiseConfig::new(0.0, 5, 1)).unwrap();
        for i in 0..env.times.len() {
            assert_eq!(env.lo[i], env.hi[i]);
            assert_eq!(env.mean[i], env.ideal[i]);
        }
    }

    #[test]
    fn envelope_orders_and_reproduces() {
        let mut c = NoiseConfig::new(0.05, 8, 7);
        c.samples = 20;
        let a = noise_monte_carlo(40, &protocol(), &c).unwrap();
        let b = noise_monte_carlo(40, &protocol(), &c).unwrap();
        assert_eq!(a, b);
        for i in 0..a.times.len() {
            assert!(a.lo[i] <= a.mean[i] && a.mean[i] <= a.hi[i]);
        }
        assert!(a.final_width() > 0.0);
    }

    #[test]
    fn draws_are_bounded() {
        let mut c = NoiseConfig::new(0.1, 1, 3);
        for i in 0..100 {
            assert!(unit_perturbations(&c, i, 5).iter().all(|u| u.abs() <= 1.0));
        }
        c.distribution = NoiseDistribution::Gaussian;
        let all: Vec<f64> = (0..200).flat_map(|i| unit_perturbations(&c, i, 5)).collect();
        assert!(all.iter().all(|u| u.abs() <= 5.0));
        let var = all.iter().map(|u| u * u).sum::<f64>() / all.len() as f64;
        assert!((var - 1.0).abs() < 0.2);
    }

    #[test]
    fn sequential_matches_parallel() {
        let mut c = NoiseConfig::new(0.02, 6, 11);
        c.samples = 10;
        let p = noise_monte_carlo(30, &protocol(), &c).unwrap();
        c.execution = Execution::Sequential;
        assert_eq!(p, noise_monte_carlo(30, &protocol(), &c).unwrap());
    }
}
