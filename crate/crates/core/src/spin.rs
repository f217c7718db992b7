//! States in the symmetric (Dicke) subspace of `N` spin-1/2 particles and
//! their collective-spin moments.
//!
//! Basis index `k` labels `|S, m = S - k>` with `S = N/2`, so index 0 is the
//! state fully polarized along `+z`. Ladder matrix elements are
//! `<k-1| S+ |k> = sqrt(k (N - k + 1))`, all real and nonnegative.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean spin lengths at or below this are rejected by [`squeezing_parameter`].
pub const DEGENERATE_SIGNAL: f64 = 1e-12;

/// `<k-1| S+ |k>` for `N` particles, `1 <= k <= N`.
#[inline]
pub fn ladder(n_particles: usize, k: usize) -> f64 {
    ((k * (n_particles + 1 - k)) as f64).sqrt()
}

/// Magnetic quantum number `m = N/2 - k` of basis index `k`.
#[inline]
pub fn m_value(n_particles: usize, k: usize) -> f64 {
    0.5 * n_particles as f64 - k as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct DickeState {
    n_particles: usize,
    amplitudes: Vec<C64>,
}

impl DickeState {
    /// Spin coherent state polarized along `+x`: amplitude
    /// `sqrt(binom(N, k)) / 2^(N/2)` at index `k`.
    pub fn coherent_x(n_particles: usize) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::TooFewParticles { min: 1, got: 0 });
        }
        let n = n_particles;
        // log sqrt(binom(N, k)), filled from both ends toward the middle so
        // the accumulated rounding stays symmetric.
        let mut log_amp = vec![0.0; n + 1];
        let half = 0.5 * n as f64 * std::f64::consts::LN_2;
        log_amp[0] = -half;
        log_amp[n] = -half;
        for k in 1..=n / 2 {
            log_amp[k] = log_amp[k - 1] + 0.5 * (((n + 1 - k) as f64) / k as f64).ln();
            log_amp[n - k] = log_amp[k];
        }
        let amplitudes: Vec<C64> = log_amp.iter().map(|&l| C64::new(l.exp(), 0.0)).collect();
        let mut state = Self { n_particles, amplitudes };
        state.renormalize()?;
        Ok(state)
    }

    /// Basis state `|m = N/2 - k>`.
    pub fn basis(n_particles: usize, k: usize) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::TooFewParticles { min: 1, got: 0 });
        }
        if k > n_particles {
            return Err(Error::LengthMismatch { expected: n_particles + 1, got: k + 1 });
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); n_particles + 1];
        amplitudes[k] = C64::new(1.0, 0.0);
        Ok(Self { n_particles, amplitudes })
    }

    /// Wraps and normalizes arbitrary amplitudes.
    pub fn from_amplitudes(n_particles: usize, amplitudes: Vec<C64>) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::TooFewParticles { min: 1, got: 0 });
        }
        if amplitudes.len() != n_particles + 1 {
            return Err(Error::LengthMismatch { expected: n_particles + 1, got: amplitudes.len() });
        }
        let mut state = Self { n_particles, amplitudes };
        state.renormalize()?;
        Ok(state)
    }

    // Propagators hand back unitary images of valid states.
    pub(crate) fn from_raw(n_particles: usize, amplitudes: Vec<C64>) -> Self {
        debug_assert_eq!(amplitudes.len(), n_particles + 1);
        Self { n_particles, amplitudes }
    }

    fn renormalize(&mut self) -> Result<()> {
        let norm = self.norm_sqr().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        self.amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(())
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    /// Total spin `S = N/2`.
    pub fn spin(&self) -> f64 {
        0.5 * self.n_particles as f64
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(C64::norm_sqr).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.amplitudes.iter().zip(&other.amplitudes).fold(C64::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b)
    }

    /// `min over phi of |self - e^{i phi} other|`.
    pub fn distance_up_to_phase(&self, other: &Self) -> f64 {
        let overlap = self.inner(other);
        let phase = if overlap.norm() > 0.0 { overlap.conj() / overlap.norm() } else { C64::new(1.0, 0.0) };
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| (a - phase * b).norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn expectations(&self) -> SpinExpectations {
        expectations(self)
    }

    pub fn squeezing(&self) -> Result<SqueezingReport> {
        squeezing_parameter(self)
    }
}

pub fn make_coherent_x(n_particles: usize) -> Result<DickeState> {
    DickeState::coherent_x(n_particles)
}

/// First moments and symmetrized second moments of `(S_x, S_y, S_z)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinExpectations {
    pub mean: [f64; 3],
    pub second_moments: [[f64; 3]; 3],
}

impl SpinExpectations {
    pub fn total_spin_sq(&self) -> f64 {
        (0..3).map(|a| self.second_moments[a][a]).sum()
    }

    pub fn mean_len(&self) -> f64 {
        self.mean.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `<(n . S)^2>` for a unit vector `n`.
    pub fn second_moment_along(&self, n: [f64; 3]) -> f64 {
        let mut acc = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                acc += n[a] * self.second_moments[a][b] * n[b];
            }
        }
        acc
    }

    pub fn covariance(&self) -> [[f64; 3]; 3] {
        let mut c = self.second_moments;
        for a in 0..3 {
            for b in 0..3 {
                c[a][b] -= self.mean[a] * self.mean[b];
            }
        }
        c
    }
}

pub fn expectations(state: &DickeState) -> SpinExpectations {
    let n = state.n_particles;
    let psi = &state.amplitudes;
    let s = 0.5 * n as f64;

    let mut sz = 0.0;
    let mut sz2 = 0.0;
    for (k, a) in psi.iter().enumerate() {
        let p = a.norm_sqr();
        let m = m_value(n, k);
        sz += m * p;
        sz2 += m * m * p;
    }

    // <S+>, <S+ Sz + Sz S+>, <S+^2>
    let mut s_plus = C64::new(0.0, 0.0);
    let mut s_plus_z = C64::new(0.0, 0.0);
    let mut s_plus2 = C64::new(0.0, 0.0);
    for k in 1..=n {
        let c = ladder(n, k);
        let t = psi[k - 1].conj() * psi[k] * c;
        s_plus += t;
        s_plus_z += t * (n as f64 - 2.0 * k as f64 + 1.0);
        if k >= 2 {
            s_plus2 += psi[k - 2].conj() * psi[k] * (ladder(n, k - 1) * c);
        }
    }

    let transverse = s * (s + 1.0) - sz2;
    let sx2 = 0.5 * (transverse + s_plus2.re);
    let sy2 = 0.5 * (transverse - s_plus2.re);
    let sxy = 0.5 * s_plus2.im;
    let sxz = 0.5 * s_plus_z.re;
    let syz = 0.5 * s_plus_z.im;

    SpinExpectations {
        mean: [s_plus.re, s_plus.im, sz],
        second_moments: [[sx2, sxy, sxz], [sxy, sy2, syz], [sxz, syz, sz2]],
    }
}

/// Squeezing of a state relative to its own mean-spin direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezingReport {
    /// `N v_min / |<S>|^2`.
    pub xi2: f64,
    /// Smallest second moment `<S_n^2>` over unit `n` orthogonal to `<S>`.
    pub v_min: f64,
    /// Angle of the minimizing direction in the transverse frame
    /// `(e1, e2)`, in `[0, pi)`. For a mean spin along `+x` the frame is
    /// `(y, z)`.
    pub optimal_angle: f64,
    pub mean_spin_len: f64,
    pub mean: [f64; 3],
}

impl SqueezingReport {
    pub fn minus_log10_xi2(&self) -> f64 {
        -self.xi2.log10()
    }
}

/// Orthonormal `(e1, e2)` spanning the plane orthogonal to unit `n`.
pub fn transverse_frame(n: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let reference = if n[2].abs() > 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0] };
    let mut e1 = cross(reference, n);
    let len = e1.iter().map(|x| x * x).sum::<f64>().sqrt();
    e1.iter_mut().for_each(|x| *x /= len);
    let e2 = cross(n, e1);
    (e1, e2)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn squeezing_parameter(state: &DickeState) -> Result<SqueezingReport> {
    squeezing_from_expectations(state.n_particles, &expectations(state))
}

pub fn squeezing_from_expectations(n_particles: usize, ex: &SpinExpectations) -> Result<SqueezingReport> {
    let len = ex.mean_len();
    if !(len > DEGENERATE_SIGNAL) {
        return Err(Error::DegenerateSignal(len));
    }
    let n_hat = ex.mean.map(|x| x / len);
    let (e1, e2) = transverse_frame(n_hat);
    let a = ex.second_moment_along(e1);
    let c = ex.second_moment_along(e2);
    let mut b = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            b += e1[i] * ex.second_moments[i][j] * e2[j];
        }
    }
    let mid = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let v_min = mid - rad;
    // Direction of the larger eigenvalue is 0.5 atan2(2b, a - c).
    let angle = (0.5 * (2.0 * b).atan2(a - c) + std::f64::consts::FRAC_PI_2).rem_euclid(std::f64::consts::PI);
    Ok(SqueezingReport {
        xi2: n_particles as f64 * v_min / (len * len),
        v_min,
        optimal_angle: angle,
        mean_spin_len: len,
        mean: ex.mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn coherent_small_cases() {
        let s1 = make_coherent_x(1).unwrap();
        let r = 1.0 / 2f64.sqrt();
        for a in s1.amplitudes() {
            assert!((a.re - r).abs() < 1e-15 && a.im == 0.0);
        }
        let s2 = make_coherent_x(2).unwrap();
        let want = [0.5, r, 0.5];
        for (a, w) in s2.amplitudes().iter().zip(want) {
            assert!((a.re - w).abs() < 1e-15);
        }
    }

    #[test]
    fn coherent_large_is_sx_eigenstate() {
        let s = make_coherent_x(1000).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        let ex = s.expectations();
        assert!((ex.mean[0] - 500.0).abs() < 1e-9);
        assert!(ex.mean[1].abs() < 1e-12 && ex.mean[2].abs() < 1e-9);
    }

    #[test]
    fn rejects_zero_particles() {
        assert_eq!(make_coherent_x(0), Err(Error::TooFewParticles { min: 1, got: 0 }));
        assert!(DickeState::from_amplitudes(2, vec![C64::new(1.0, 0.0); 2]).is_err());
        assert_eq!(DickeState::from_amplitudes(1, vec![C64::new(0.0, 0.0); 2]), Err(Error::ZeroNorm));
    }

    #[test]
    fn coherent_moments_n2() {
        let ex = make_coherent_x(2).unwrap().expectations();
        assert!((ex.mean[0] - 1.0).abs() < 1e-14);
        assert!(ex.mean[1].abs() < 1e-14 && ex.mean[2].abs() < 1e-14);
        assert!((ex.second_moments[1][1] - 0.5).abs() < 1e-14);
        assert!((ex.second_moments[2][2] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn polarized_z_mean() {
        let ex = DickeState::basis(4, 0).unwrap().expectations();
        assert_eq!(ex.mean, [0.0, 0.0, 2.0]);
    }

    #[test]
    fn trace_is_casimir_for_arbitrary_state() {
        let amps: Vec<C64> = (0..7).map(|k| C64::from_polar(1.0 + k as f64 * 0.3, 0.7 * k as f64)).collect();
        let ex = DickeState::from_amplitudes(6, amps).unwrap().expectations();
        assert!((ex.total_spin_sq() - 12.0).abs() < 1e-9);
    }

    #[test]
    fn coherent_state_is_standard_quantum_limit() {
        for n in [1, 2, 5, 40, 301] {
            let rep = make_coherent_x(n).unwrap().squeezing().unwrap();
            assert!((rep.xi2 - 1.0).abs() < 1e-10, "N={n}: {}", rep.xi2);
            assert!((rep.v_min - n as f64 / 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_signal_is_an_error() {
        // Dicke state m = 0 has zero mean spin.
        let s = DickeState::basis(4, 2).unwrap();
        assert!(matches!(s.squeezing(), Err(Error::DegenerateSignal(_))));
    }

    #[test]
    fn angle_matches_minimizing_direction() {
        let amps: Vec<C64> =
            (0..11).map(|k| C64::from_polar((-(k as f64 - 3.0).powi(2) / 4.0).exp(), 0.2 * (k * k) as f64)).collect();
        let s = DickeState::from_amplitudes(10, amps).unwrap();
        let ex = s.expectations();
        let rep = s.squeezing().unwrap();
        let n_hat = ex.mean.map(|x| x / rep.mean_spin_len);
        let (e1, e2) = transverse_frame(n_hat);
        let dir = |phi: f64| {
            let (s, c) = phi.sin_cos();
            [0, 1, 2].map(|i| c * e1[i] + s * e2[i])
        };
        assert!((ex.second_moment_along(dir(rep.optimal_angle)) - rep.v_min).abs() < 1e-10);
        let scan_min =
            (0..20000).map(|i| ex.second_moment_along(dir(PI * i as f64 / 20000.0))).fold(f64::INFINITY, f64::min);
        assert!(scan_min >= rep.v_min - 1e-10);
        assert!(scan_min - rep.v_min < 1e-6);
    }
}
