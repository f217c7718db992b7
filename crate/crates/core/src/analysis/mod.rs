//! Scaling-law studies, control-noise Monte Carlo and entanglement-depth
//! certification.

pub mod depth;
pub mod noise;
pub mod scaling;

pub use depth::{certify_depth, certify_depth_bisect, optimal_squeezing_curve, DepthCertificate, DepthCurve};
pub use noise::{noise_monte_carlo, NoiseConfig, NoiseDistribution, NoiseEnvelope};
pub use scaling::{fit_power_law, scaling_study, PowerLawFit, ScalingPoint, Scheme};
