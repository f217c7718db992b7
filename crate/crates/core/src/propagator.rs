//! Exact unitary evolution in the Dicke subspace.
//!
//! Time is measured in units of `1/chi`. Rotations use the convention
//! `R_x(phi) = exp(-i phi S_x)`, whose adjoint action sends `S_z` to
//! `cos(phi) S_z + sin(phi) S_y`. Hence
//! `exp(-i S_theta^2 T) = R_x(-theta) exp(-i S_z^2 T) R_x(theta)`.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::bessel::bessel_j_sequence;
use crate::error::{Error, Result};
use crate::spin::{ladder, m_value, DickeState, SqueezingReport};
use crate::tridiag::{Eigen, SymTridiagonal};

/// Largest Hilbert-space dimension for which dense rotation matrices are
/// built and cached.
pub const DENSE_ROTATION_MAX_DIM: usize = 4097;

// Total cached eigenvector storage, in f64 entries (256 MiB).
const CACHE_BUDGET: usize = 1 << 25;

/// Maps an angle onto `[-pi/2, pi/2)`; `S_theta^2` is `pi`-periodic in theta.
pub fn canonical_theta(theta: f64) -> f64 {
    if (-FRAC_PI_2..FRAC_PI_2).contains(&theta) {
        return theta;
    }
    let t = (theta + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2;
    if t >= FRAC_PI_2 {
        -FRAC_PI_2
    } else {
        t
    }
}

/// One twist step `exp(-i S_theta^2 T)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwistSegment {
    theta: f64,
    duration: f64,
}

impl TwistSegment {
    pub fn new(theta: f64, duration: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidAngle(theta));
        }
        check_duration(duration)?;
        Ok(Self { theta: canonical_theta(theta), duration })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }
}

/// Ordered twist segments in the effective frame, first applied first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    segments: Vec<TwistSegment>,
}

impl Protocol {
    pub fn new(segments: Vec<TwistSegment>) -> Result<Self> {
        match segments.first() {
            None => Err(Error::EmptyProtocol),
            Some(s) if s.theta != 0.0 => Err(Error::FirstAngleNonZero(s.theta)),
            Some(_) => Ok(Self { segments }),
        }
    }

    /// Plain one-axis twisting for `duration`.
    pub fn oat(duration: f64) -> Result<Self> {
        Self::new(vec![TwistSegment::new(0.0, duration)?])
    }

    /// Decodes the flat parameter vector `(T1, theta2, T2, ..., theta_n, T_n)`.
    pub fn from_params(params: &[f64]) -> Result<Self> {
        if params.is_empty() || params.len() % 2 == 0 {
            return Err(Error::ParamLength { expected: 2 * (params.len() / 2) + 1, got: params.len() });
        }
        let mut segments = vec![TwistSegment::new(0.0, params[0])?];
        for pair in params[1..].chunks(2) {
            segments.push(TwistSegment::new(pair[0], pair[1])?);
        }
        Self::new(segments)
    }

    pub fn to_params(&self) -> Vec<f64> {
        let mut p = vec![self.segments[0].duration];
        for s in &self.segments[1..] {
            p.push(s.theta);
            p.push(s.duration);
        }
        p
    }

    pub fn segments(&self) -> &[TwistSegment] {
        &self.segments
    }

    pub fn n_steps(&self) -> usize {
        self.segments.len()
    }

    /// Number of tunable parameters, `2n - 1`.
    pub fn n_params(&self) -> usize {
        2 * self.segments.len() - 1
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Appends a segment; used to embed an `n`-step optimum in `n + 1` steps.
    pub fn with_segment(&self, segment: TwistSegment) -> Self {
        let mut segments = self.segments.clone();
        segments.push(segment);
        Self { segments }
    }
}

/// Instantaneous rotation `exp(-i alpha S_x)` followed by plain `S_z^2`
/// twisting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub alpha: f64,
    pub duration: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub pulses: Vec<Pulse>,
}

impl PulseSequence {
    pub fn total_duration(&self) -> f64 {
        self.pulses.iter().map(|p| p.duration).sum()
    }
}

fn check_duration(duration: f64) -> Result<()> {
    if duration >= 0.0 && duration.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidDuration(duration))
    }
}

/* Generators ***************************************************************/

/// `S_x` in the `S_z` basis.
pub fn sx_tridiagonal(n_particles: usize) -> SymTridiagonal {
    let off = (1..=n_particles).map(|k| 0.5 * ladder(n_particles, k)).collect();
    SymTridiagonal::new(vec![0.0; n_particles + 1], off)
}

/// `G^dagger S_theta G` with `G = diag(i^k)`, which is real:
/// diagonal `cos(theta) m`, off-diagonal `sin(theta) <k-1|S+|k> / 2`.
pub fn s_theta_gauged(n_particles: usize, theta: f64) -> SymTridiagonal {
    let (s, c) = theta.sin_cos();
    let diag = (0..=n_particles).map(|k| c * m_value(n_particles, k)).collect();
    let off = (1..=n_particles).map(|k| 0.5 * s * ladder(n_particles, k)).collect();
    SymTridiagonal::new(diag, off)
}

// i^k
#[inline]
fn gauge(k: usize) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

fn spin_spectrum(n_particles: usize) -> Vec<f64> {
    (0..=n_particles).map(|j| j as f64 - 0.5 * n_particles as f64).collect()
}

/* Decomposition cache ******************************************************/

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum CacheKey {
    Sx(usize),
    Theta(usize, u64),
    Tat { n: usize, odd: bool },
}

#[derive(Default)]
struct DecompositionCache {
    entries: HashMap<CacheKey, Arc<Eigen>>,
    size: usize,
}

fn cache() -> &'static Mutex<DecompositionCache> {
    static CACHE: OnceLock<Mutex<DecompositionCache>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn cached<F>(key: CacheKey, build: F) -> Result<Arc<Eigen>>
where
    F: FnOnce() -> Result<Eigen>,
{
    if let Some(e) = cache().lock().expect("cache poisoned").entries.get(&key) {
        return Ok(Arc::clone(e));
    }
    // Built outside the lock; a concurrent duplicate build yields the same
    // deterministic result.
    let eig = Arc::new(build()?);
    let cost = eig.dim() * eig.dim();
    if cost <= CACHE_BUDGET {
        let mut guard = cache().lock().expect("cache poisoned");
        if guard.size + cost > CACHE_BUDGET {
            guard.entries.clear();
            guard.size = 0;
        }
        if guard.entries.insert(key, Arc::clone(&eig)).is_none() {
            guard.size += cost;
        }
    }
    Ok(eig)
}

/// Drops every cached eigendecomposition.
pub fn clear_cache() {
    let mut guard = cache().lock().expect("cache poisoned");
    guard.entries.clear();
    guard.size = 0;
}

fn sx_eigen(n_particles: usize) -> Result<Arc<Eigen>> {
    cached(CacheKey::Sx(n_particles), || Ok(sx_tridiagonal(n_particles).eigh_separated(&spin_spectrum(n_particles))))
}

fn theta_eigen(n_particles: usize, theta: f64) -> Result<Arc<Eigen>> {
    cached(CacheKey::Theta(n_particles, theta.to_bits()), || {
        Ok(s_theta_gauged(n_particles, theta).eigh_separated(&spin_spectrum(n_particles)))
    })
}

/* Rotations ****************************************************************/

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum RotationMethod {
    /// Picks whichever of the two exact methods is cheaper for the call.
    #[default]
    Auto,
    /// Dense eigendecomposition of `S_x`, cached per `N`.
    Eigen,
    /// Chebyshev expansion of `exp(-i alpha S_x)` over the support of the
    /// state.
    Chebyshev,
}

/// `exp(-i alpha S_x) |psi>`.
pub fn rotate_x(state: &DickeState, alpha: f64) -> Result<DickeState> {
    rotate_x_with(state, alpha, RotationMethod::Auto)
}

pub fn rotate_x_with(state: &DickeState, alpha: f64, method: RotationMethod) -> Result<DickeState> {
    if !alpha.is_finite() {
        return Err(Error::InvalidAngle(alpha));
    }
    let n = state.n_particles();
    if alpha == 0.0 {
        return Ok(state.clone());
    }
    let method = match method {
        RotationMethod::Auto => choose_rotation(state, alpha),
        m => m,
    };
    let amps = match method {
        RotationMethod::Eigen => {
            let eig = sx_eigen(n)?;
            eig.apply_function(state.amplitudes(), |l| C64::from_polar(1.0, -alpha * l))
        }
        _ => chebyshev_rotate_x(state.amplitudes(), n, alpha),
    };
    Ok(DickeState::from_raw(n, amps))
}

fn choose_rotation(state: &DickeState, alpha: f64) -> RotationMethod {
    let dim = state.dim();
    if dim > DENSE_ROTATION_MAX_DIM {
        return RotationMethod::Chebyshev;
    }
    let z = alpha.abs() * state.spin();
    let terms = z + 10.0 * z.cbrt() + 30.0;
    let (lo, hi) = support(state.amplitudes());
    let width = (hi - lo + 1) as f64;
    let cheb = 1.5 * terms * (width + 0.5 * terms).min(dim as f64);
    let dense = 2.0 * (dim * dim) as f64;
    if cheb < dense {
        RotationMethod::Chebyshev
    } else {
        RotationMethod::Eigen
    }
}

// Index range holding every amplitude above 1e-20 of the peak; the rest
// contributes below double-precision resolution.
fn support(psi: &[C64]) -> (usize, usize) {
    let peak = psi.iter().fold(0.0f64, |a, x| a.max(x.norm_sqr()));
    let cut = peak * 1e-40;
    let lo = psi.iter().position(|x| x.norm_sqr() > cut).unwrap_or(0);
    let hi = psi.iter().rposition(|x| x.norm_sqr() > cut).unwrap_or(psi.len() - 1);
    (lo, hi)
}

// exp(-i alpha S_x) psi = sum_k (2 - d_k0) (-i sgn)^k J_k(|alpha| S) T_k(S_x / S) psi
fn chebyshev_rotate_x(psi: &[C64], n: usize, alpha: f64) -> Vec<C64> {
    let dim = psi.len();
    let s = 0.5 * n as f64;
    let z = alpha.abs() * s;
    let bessel = bessel_j_sequence(z, 1e-18);
    // (-i)^k for alpha > 0, (+i)^k for alpha < 0
    let unit = if alpha > 0.0 { C64::new(0.0, -1.0) } else { C64::new(0.0, 1.0) };

    let off: Vec<f64> = (1..=n).map(|k| 0.5 * ladder(n, k) / s).collect();
    let (mut lo, mut hi) = support(psi);

    let mut prev: Vec<C64> = psi.to_vec();
    let mut out: Vec<C64> = psi.iter().map(|x| x * bessel[0]).collect();
    if bessel.len() == 1 {
        return out;
    }
    let grow = |lo: usize, hi: usize| (lo.saturating_sub(1), (hi + 1).min(dim - 1));

    // T_1 psi = H psi
    let mut cur = vec![C64::new(0.0, 0.0); dim];
    (lo, hi) = grow(lo, hi);
    scaled_matvec(&off, &prev, &mut cur, lo, hi, 1.0);
    let mut phase = unit;
    let coef = phase * (2.0 * bessel[1]);
    for i in lo..=hi {
        out[i] += cur[i] * coef;
    }

    for &jk in &bessel[2..] {
        (lo, hi) = grow(lo, hi);
        // next = 2 H cur - prev, written over prev
        next_chebyshev(&off, &cur, &mut prev, lo, hi);
        std::mem::swap(&mut prev, &mut cur);
        phase *= unit;
        let coef = phase * (2.0 * jk);
        for i in lo..=hi {
            out[i] += cur[i] * coef;
        }
    }
    out
}

#[inline]
fn scaled_matvec(off: &[f64], x: &[C64], y: &mut [C64], lo: usize, hi: usize, scale: f64) {
    let last = x.len() - 1;
    for i in lo..=hi {
        let mut acc = C64::new(0.0, 0.0);
        if i > 0 {
            acc += x[i - 1] * off[i - 1];
        }
        if i < last {
            acc += x[i + 1] * off[i];
        }
        y[i] = acc * scale;
    }
}

#[inline]
fn next_chebyshev(off: &[f64], cur: &[C64], prev: &mut [C64], lo: usize, hi: usize) {
    let last = cur.len() - 1;
    for i in lo..=hi {
        let mut acc = C64::new(0.0, 0.0);
        if i > 0 {
            acc += cur[i - 1] * off[i - 1];
        }
        if i < last {
            acc += cur[i + 1] * off[i];
        }
        prev[i] = acc * 2.0 - prev[i];
    }
}

/* Twisting *****************************************************************/

/// How [`evolve_twist`] realizes `exp(-i S_theta^2 T)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TwistStrategy {
    /// Diagonalize the gauge-transformed tridiagonal `S_theta`.
    #[default]
    Diagonalize,
    /// `R_x(-theta) exp(-i S_z^2 T) R_x(theta)`.
    RotatedFrame,
}

/// `exp(-i S_z^2 T)`, diagonal in the Dicke basis.
pub fn evolve_oat(state: &DickeState, duration: f64) -> Result<DickeState> {
    check_duration(duration)?;
    let n = state.n_particles();
    let amps = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let m = m_value(n, k);
            a * C64::from_polar(1.0, -m * m * duration)
        })
        .collect();
    Ok(DickeState::from_raw(n, amps))
}

pub fn evolve_twist(state: &DickeState, theta: f64, duration: f64) -> Result<DickeState> {
    evolve_twist_with(state, theta, duration, TwistStrategy::Diagonalize)
}

pub fn evolve_twist_with(state: &DickeState, theta: f64, duration: f64, strategy: TwistStrategy) -> Result<DickeState> {
    check_duration(duration)?;
    if !theta.is_finite() {
        return Err(Error::InvalidAngle(theta));
    }
    let theta = canonical_theta(theta);
    if duration == 0.0 {
        return Ok(state.clone());
    }
    if theta == 0.0 {
        return evolve_oat(state, duration);
    }
    match strategy {
        TwistStrategy::RotatedFrame => {
            let s = rotate_x(state, theta)?;
            let s = evolve_oat(&s, duration)?;
            rotate_x(&s, -theta)
        }
        TwistStrategy::Diagonalize => {
            let n = state.n_particles();
            let eig = theta_eigen(n, theta)?;
            let gauged: Vec<C64> = state.amplitudes().iter().enumerate().map(|(k, a)| a * gauge(k).conj()).collect();
            let mut out = eig.apply_function(&gauged, |l| C64::from_polar(1.0, -l * l * duration));
            out.iter_mut().enumerate().for_each(|(k, a)| *a *= gauge(k));
            Ok(DickeState::from_raw(n, out))
        }
    }
}

/* Two-axis twisting ********************************************************/

// S_x^2 - S_y^2 = (S+^2 + S-^2)/2 couples k with k +- 2 only, so it splits
// into the even-k and odd-k sectors, each a real tridiagonal chain.
fn tat_sector(n_particles: usize, odd: bool) -> Option<SymTridiagonal> {
    let first = usize::from(odd);
    if first > n_particles {
        return None;
    }
    let ks: Vec<usize> = (first..=n_particles).step_by(2).collect();
    let off = ks.windows(2).map(|w| 0.5 * ladder(n_particles, w[1] - 1) * ladder(n_particles, w[1])).collect();
    Some(SymTridiagonal::new(vec![0.0; ks.len()], off))
}

fn tat_eigen(n_particles: usize, odd: bool) -> Result<Option<Arc<Eigen>>> {
    match tat_sector(n_particles, odd) {
        None => Ok(None),
        Some(t) => cached(CacheKey::Tat { n: n_particles, odd }, || t.eigh()).map(Some),
    }
}

/// `exp(-i (S_x^2 - S_y^2) T)` with `chi_2 = 1`.
pub fn evolve_tat(state: &DickeState, duration: f64) -> Result<DickeState> {
    check_duration(duration)?;
    if duration == 0.0 {
        return Ok(state.clone());
    }
    let n = state.n_particles();
    let mut out = vec![C64::new(0.0, 0.0); n + 1];
    for odd in [false, true] {
        let Some(eig) = tat_eigen(n, odd)? else { continue };
        let first = usize::from(odd);
        let sector: Vec<C64> = state.amplitudes()[first..].iter().step_by(2).copied().collect();
        if sector.iter().all(|a| a.norm_sqr() == 0.0) {
            continue;
        }
        let evolved = eig.apply_function(&sector, |l| C64::from_polar(1.0, -l * duration));
        for (i, a) in evolved.into_iter().enumerate() {
            out[first + 2 * i] = a;
        }
    }
    Ok(DickeState::from_raw(n, out))
}

/// Initial state for two-axis twisting: polarized along `+z`, the axis
/// orthogonal to both twisting axes.
pub fn tat_initial_state(n_particles: usize) -> Result<DickeState> {
    DickeState::basis(n_particles, 0)
}

/* Protocol execution *******************************************************/

/// Pulses with `alpha_j = theta_j - theta_{j-1}` (`theta_0 = 0`).
pub fn protocol_to_pulses(protocol: &Protocol) -> PulseSequence {
    let mut last = 0.0;
    let pulses = protocol
        .segments()
        .iter()
        .map(|s| {
            let alpha = s.theta - last;
            last = s.theta;
            Pulse { alpha, duration: s.duration }
        })
        .collect();
    PulseSequence { pulses }
}

/// Lab-frame execution from the `+x` coherent state.
pub fn run_pulses(n_particles: usize, pulses: &PulseSequence) -> Result<DickeState> {
    let mut state = DickeState::coherent_x(n_particles)?;
    for p in &pulses.pulses {
        state = rotate_x(&state, p.alpha)?;
        state = evolve_oat(&state, p.duration)?;
    }
    Ok(state)
}

/// Final state of a protocol and, optionally, its squeezing at sample times.
#[derive(Clone, Debug)]
pub struct ProtocolRun {
    pub state: DickeState,
    pub trajectory: Option<Vec<(f64, SqueezingReport)>>,
}

pub fn run_protocol(n_particles: usize, protocol: &Protocol, sample_times: Option<&[f64]>) -> Result<ProtocolRun> {
    run_protocol_with(n_particles, protocol, sample_times, TwistStrategy::RotatedFrame)
}

/// Runs a protocol from the `+x` coherent state, segment by segment.
///
/// With [`TwistStrategy::RotatedFrame`] consecutive frame rotations are
/// merged, so the work is one rotation per segment plus the final
/// `R_x(-theta_n)` back into the effective frame. Squeezing is invariant
/// under rotations, so sampled reports are computed in the lab frame.
pub fn run_protocol_with(
    n_particles: usize,
    protocol: &Protocol,
    sample_times: Option<&[f64]>,
    strategy: TwistStrategy,
) -> Result<ProtocolRun> {
    let total = protocol.total_duration();
    if let Some(times) = sample_times {
        let slack = 1e-12 * total.max(1.0);
        if let Some(&bad) = times.iter().find(|&&t| !(t >= -slack && t <= total + slack)) {
            return Err(Error::SampleTimeOutOfRange { time: bad, total });
        }
    }

    let mut trajectory = sample_times.map(|t| Vec::with_capacity(t.len()));
    let mut order: Vec<usize> = sample_times.map_or(Vec::new(), |t| (0..t.len()).collect());
    if let Some(times) = sample_times {
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    }
    let mut samples: Vec<Option<(f64, SqueezingReport)>> = vec![None; order.len()];
    let mut next_sample = 0;

    let mut state = DickeState::coherent_x(n_particles)?;
    let mut start = 0.0;
    let mut frame = 0.0;
    let n_seg = protocol.n_steps();
    for (j, seg) in protocol.segments().iter().enumerate() {
        let end = if j + 1 == n_seg { f64::INFINITY } else { start + seg.duration };
        // Lab frame: rotate into the new twisting frame.
        let lab = match strategy {
            TwistStrategy::RotatedFrame => rotate_x(&state, seg.theta - frame)?,
            TwistStrategy::Diagonalize => state.clone(),
        };
        if let Some(times) = sample_times {
            while next_sample < order.len() && times[order[next_sample]] <= end {
                let idx = order[next_sample];
                let dt = (times[idx] - start).clamp(0.0, seg.duration);
                let s = match strategy {
                    TwistStrategy::RotatedFrame => evolve_oat(&lab, dt)?,
                    TwistStrategy::Diagonalize => evolve_twist_with(&lab, seg.theta, dt, TwistStrategy::Diagonalize)?,
                };
                samples[idx] = Some((times[idx], s.squeezing()?));
                next_sample += 1;
            }
        }
        state = match strategy {
            TwistStrategy::RotatedFrame => {
                frame = seg.theta;
                evolve_oat(&lab, seg.duration)?
            }
            TwistStrategy::Diagonalize => evolve_twist_with(&lab, seg.theta, seg.duration, TwistStrategy::Diagonalize)?,
        };
        start += seg.duration;
    }
    if strategy == TwistStrategy::RotatedFrame {
        state = rotate_x(&state, -frame)?;
    }
    if let Some(t) = trajectory.as_mut() {
        t.extend(samples.into_iter().map(|s| s.expect("every sample time is visited")));
    }
    Ok(ProtocolRun { state, trajectory })
}

/// Squeezing of a protocol's final state; skips the closing frame rotation.
pub fn protocol_squeezing(n_particles: usize, protocol: &Protocol) -> Result<SqueezingReport> {
    run_pulses(n_particles, &protocol_to_pulses(protocol))?.squeezing()
}

/// `count` uniform sample times over `[0, total]`, endpoints included.
pub fn uniform_times(total: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![total],
        _ => (0..count).map(|i| total * i as f64 / (count - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_state(n: usize, salt: u64) -> DickeState {
        let mut x = salt.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let amps = (0..=n).map(|_| C64::new(next(), next())).collect();
        DickeState::from_amplitudes(n, amps).unwrap()
    }

    #[test]
    fn canonical_theta_range() {
        for t in [-7.0, -FRAC_PI_2, 0.0, 1.0, FRAC_PI_2, 3.0, 12.5] {
            let c = canonical_theta(t);
            assert!((-FRAC_PI_2..FRAC_PI_2).contains(&c), "{t} -> {c}");
            assert!(((t - c) / PI - ((t - c) / PI).round()).abs() < 1e-12);
        }
        assert_eq!(canonical_theta(FRAC_PI_2), -FRAC_PI_2);
    }

    #[test]
    fn protocol_validation() {
        assert_eq!(Protocol::new(vec![]), Err(Error::EmptyProtocol));
        let bad = TwistSegment::new(0.3, 1.0).unwrap();
        assert!(matches!(Protocol::new(vec![bad]), Err(Error::FirstAngleNonZero(_))));
        assert!(matches!(TwistSegment::new(0.0, -1.0), Err(Error::InvalidDuration(_))));
        assert!(Protocol::from_params(&[0.1, 0.2]).is_err());
        let p = Protocol::from_params(&[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(p.to_params(), vec![0.1, 0.2, 0.3]);
        assert_eq!(p.n_params(), 3);
        assert!((p.total_duration() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn rotate_zero_is_identity() {
        let s = random_state(9, 1);
        assert_eq!(rotate_x(&s, 0.0).unwrap(), s);
    }

    #[test]
    fn rotation_methods_agree() {
        for (n, alpha, salt) in [(1, 0.4, 1), (8, -2.1, 2), (50, 0.05, 3), (200, 1.3, 4)] {
            let s = random_state(n, salt);
            let a = rotate_x_with(&s, alpha, RotationMethod::Eigen).unwrap();
            let b = rotate_x_with(&s, alpha, RotationMethod::Chebyshev).unwrap();
            let diff = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(diff < 1e-11, "N={n} alpha={alpha}: {diff}");
        }
    }

    #[test]
    fn rotation_of_coherent_x_is_a_phase() {
        let s = DickeState::coherent_x(30).unwrap();
        for alpha in [0.3, -1.7, 4.0] {
            let r = rotate_x(&s, alpha).unwrap();
            let overlap = s.inner(&r);
            let want = C64::from_polar(1.0, -alpha * 15.0);
            assert!((overlap - want).norm() < 1e-10);
        }
    }

    #[test]
    fn pi_rotation_flips_transverse_means() {
        let s = random_state(11, 7);
        let before = s.expectations();
        let after = rotate_x(&s, PI).unwrap().expectations();
        assert!((before.mean[0] - after.mean[0]).abs() < 1e-10);
        assert!((before.mean[1] + after.mean[1]).abs() < 1e-10);
        assert!((before.mean[2] + after.mean[2]).abs() < 1e-10);
    }

    #[test]
    fn oat_is_diagonal_phase() {
        let s = random_state(6, 3);
        let t = 0.37;
        let e = evolve_twist(&s, 0.0, t).unwrap();
        for (k, (a, b)) in s.amplitudes().iter().zip(e.amplitudes()).enumerate() {
            let m = m_value(6, k);
            assert!((a * C64::from_polar(1.0, -m * m * t) - b).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_duration_is_identity() {
        let s = random_state(5, 4);
        assert_eq!(evolve_twist(&s, 0.8, 0.0).unwrap(), s);
        assert_eq!(evolve_tat(&s, 0.0).unwrap(), s);
        assert!(matches!(evolve_twist(&s, 0.8, -0.1), Err(Error::InvalidDuration(_))));
        assert!(matches!(evolve_tat(&s, -0.1), Err(Error::InvalidDuration(_))));
    }

    #[test]
    fn twist_strategies_agree_n12() {
        let s = random_state(12, 5);
        let a = evolve_twist_with(&s, 0.7, 0.3, TwistStrategy::Diagonalize).unwrap();
        let b = evolve_twist_with(&s, 0.7, 0.3, TwistStrategy::RotatedFrame).unwrap();
        assert!(a.distance_up_to_phase(&b) < 1e-8);
    }

    #[test]
    fn s_theta_eigendecomposition_residual() {
        for (n, theta) in [(10, 0.3), (101, -1.2), (400, 1e-4)] {
            let a = s_theta_gauged(n, theta);
            let eig = theta_eigen(n, theta).unwrap();
            assert!(eig.max_residual(&a) <= 1e-10 * a.norm_inf());
        }
    }

    #[test]
    fn sample_times_out_of_range() {
        let p = Protocol::oat(0.1).unwrap();
        let err = run_protocol(10, &p, Some(&[0.05, 0.2])).unwrap_err();
        assert!(matches!(err, Error::SampleTimeOutOfRange { .. }));
    }

    #[test]
    fn pulse_conversion() {
        let p = Protocol::oat(0.2).unwrap();
        assert_eq!(protocol_to_pulses(&p).pulses, vec![Pulse { alpha: 0.0, duration: 0.2 }]);
        let p = Protocol::from_params(&[0.1, 0.4, 0.2, -0.3, 0.5]).unwrap();
        let pulses = protocol_to_pulses(&p).pulses;
        assert_eq!(pulses[1], Pulse { alpha: 0.4, duration: 0.2 });
        assert!((pulses[2].alpha - -0.7).abs() < 1e-15);
    }

    #[test]
    fn empty_pulse_sequence_is_coherent_state() {
        let s = run_pulses(7, &PulseSequence::default()).unwrap();
        assert_eq!(s, DickeState::coherent_x(7).unwrap());
    }
}
