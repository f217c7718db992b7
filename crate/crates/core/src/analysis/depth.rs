//! Entanglement depth from squeezing: the minimal `<j_z^2>` reachable by a
//! spin `j = n/2` at given contrast bounds what blocks of at most `n`
//! entangled particles can show.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::log_space;
use crate::par::{map_slice, Execution};
use crate::spin::{ladder, m_value, SqueezingReport};
use crate::tridiag::SymTridiagonal;

/// Initial coupling grid for the ground-state construction.
pub const MU_POINTS: usize = 800;
pub const MU_RANGE: (f64, f64) = (1e-6, 1e6);
/// Refinement inserts a midpoint wherever consecutive ground states are
/// further apart than this in `x` (or in `f / (n/4)`).
pub const REFINE_GAP: f64 = 1e-3;
const REFINE_ROUNDS: usize = 10;
/// Relative margin a variance must clear to count as below a bound, so
/// rounding in a saturating state certifies nothing.
pub const CERTIFY_MARGIN: f64 = 1e-9;

/// Lower bound `f(x)` on `<j_z^2>` at contrast `x = <j_x>/j` for `j = n/2`,
/// as points sorted by increasing `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthCurve {
    pub block_size: usize,
    pub points: Vec<(f64, f64)>,
}

impl DepthCurve {
    /// Piecewise-linear `f(x)`, held constant outside the tabulated range.
    pub fn eval(&self, x: f64) -> f64 {
        let p = &self.points;
        if x <= p[0].0 {
            return p[0].1;
        }
        if x >= p[p.len() - 1].0 {
            return p[p.len() - 1].1;
        }
        let i = p.partition_point(|q| q.0 <= x);
        let (x0, f0) = p[i - 1];
        let (x1, f1) = p[i];
        if x1 == x0 {
            return f0.min(f1);
        }
        f0 + (f1 - f0) * (x - x0) / (x1 - x0)
    }
}

// (x, f) for the ground state of j_z^2 - mu j_x.
fn ground_point(n: usize, mu: f64) -> Result<(f64, f64)> {
    let j = 0.5 * n as f64;
    let diag: Vec<f64> = (0..=n).map(|k| m_value(n, k).powi(2)).collect();
    let off: Vec<f64> = (1..=n).map(|k| -0.5 * mu * ladder(n, k)).collect();
    let h = SymTridiagonal::new(diag.clone(), off);
    let lambda = h.eigenvalues()?[0];
    let v = h.eigenvector(lambda);
    let jx: f64 = (1..=n).map(|k| v[k - 1] * v[k] * ladder(n, k)).sum();
    let jz2: f64 = v.iter().zip(&diag).map(|(a, d)| a * a * d).sum();
    Ok(((jx / j).clamp(0.0, 1.0), jz2))
}

/// Curve for blocks of `n` particles on `[0, 1]`. With an empty `contrast`
/// grid the envelope breakpoints are returned as they are; otherwise the
/// envelope is interpolated onto the grid.
pub fn optimal_squeezing_curve(n: usize, contrast: &[f64]) -> Result<DepthCurve> {
    optimal_squeezing_curve_with(n, contrast, Execution::default())
}

pub fn optimal_squeezing_curve_with(n: usize, contrast: &[f64], exec: Execution) -> Result<DepthCurve> {
    if n == 0 {
        return Err(Error::TooFewParticles { min: 1, got: 0 });
    }
    let scale = 0.25 * n as f64;
    let mut mus = log_space(MU_RANGE.0, MU_RANGE.1, MU_POINTS);
    let mut pts: Vec<(f64, f64)> =
        map_slice(exec, &mus, |&mu| ground_point(n, mu)).into_iter().collect::<Result<_>>()?;

    for _ in 0..REFINE_ROUNDS {
        let mut inserts = Vec::new();
        for i in 0..mus.len() - 1 {
            let dx = (pts[i + 1].0 - pts[i].0).abs();
            let df = (pts[i + 1].1 - pts[i].1).abs() / scale;
            if dx > REFINE_GAP || df > REFINE_GAP {
                inserts.push((i, (mus[i] * mus[i + 1]).sqrt()));
            }
        }
        if inserts.is_empty() {
            break;
        }
        let new_mus: Vec<f64> = inserts.iter().map(|&(_, m)| m).collect();
        let new_pts: Vec<(f64, f64)> =
            map_slice(exec, &new_mus, |&mu| ground_point(n, mu)).into_iter().collect::<Result<_>>()?;
        let mut merged_mu = Vec::with_capacity(mus.len() + inserts.len());
        let mut merged_pt = Vec::with_capacity(mus.len() + inserts.len());
        let mut next = inserts.iter().zip(&new_pts).peekable();
        for i in 0..mus.len() {
            merged_mu.push(mus[i]);
            merged_pt.push(pts[i]);
            if let Some(&(&(at, mu), &p)) = next.peek() {
                if at == i {
                    merged_mu.push(mu);
                    merged_pt.push(p);
                    next.next();
                }
            }
        }
        mus = merged_mu;
        pts = merged_pt;
    }

    // Each ground state gives the supporting line f >= f_i + mu_i j (x - x_i);
    // mu = 0 adds f >= min <j_z^2>, which is 0 for integer j and 1/4 otherwise.
    // Their upper envelope is a convex lower bound, exact at every x_i.
    let j = 0.5 * n as f64;
    let floor = if n % 2 == 0 { 0.0 } else { 0.25 };
    let lines: Vec<(f64, f64)> = std::iter::once((0.0, floor))
        .chain(mus.iter().zip(&pts).map(|(&mu, &(x, f))| (mu * j, f - mu * j * x)))
        .collect();
    let mut xs: Vec<f64> = vec![0.0, 1.0];
    xs.extend(pts.iter().map(|p| p.0));
    xs.extend(lines.windows(2).filter(|w| w[1].0 > w[0].0).map(|w| (w[0].1 - w[1].1) / (w[1].0 - w[0].0)));
    xs.retain(|x| (0.0..=1.0).contains(x));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let envelope = |&x: &f64| {
        let f = lines.iter().map(|&(slope, c)| c + slope * x).fold(floor, f64::max);
        (x, f.min(scale))
    };
    let pts = map_slice(exec, &xs, envelope);
    let raw = DepthCurve { block_size: n, points: pts };
    if contrast.is_empty() {
        return Ok(raw);
    }
    let points = contrast.iter().map(|&x| (x, raw.eval(x))).collect();
    Ok(DepthCurve { block_size: n, points })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthCertificate {
    /// Largest block size whose bound is strictly violated; `1` if none.
    pub depth: usize,
    /// Contrast `2 <S_x> / N` at which the bounds were read.
    pub contrast: f64,
    /// `(n, bound)` for every tested curve, bound in units of `S^2`.
    pub bounds: Vec<(usize, f64)>,
    pub any_violated: bool,
}

impl DepthCertificate {
    /// Block sizes whose bound is strictly violated.
    pub fn violated(&self, v_min: f64) -> Vec<usize> {
        self.bounds.iter().filter(|b| v_min < b.1 * (1.0 - CERTIFY_MARGIN)).map(|b| b.0).collect()
    }

    /// Under the stricter reading a violated `n`-block bound proves
    /// entanglement of at least `n + 1` particles.
    pub fn depth_exclusive(&self) -> usize {
        if self.any_violated {
            self.depth + 1
        } else {
            1
        }
    }
}

/// Compares `v_min` with `(N/n) f_n(2 <S_x> / N)` for each curve and
/// returns the largest `n` with `v_min` strictly below. The mean spin
/// length of `report` stands in for `<S_x>`.
pub fn certify_depth(n_particles: usize, report: &SqueezingReport, curves: &[DepthCurve]) -> Result<DepthCertificate> {
    if n_particles == 0 {
        return Err(Error::TooFewParticles { min: 1, got: 0 });
    }
    let big_n = n_particles as f64;
    let contrast = (2.0 * report.mean_spin_len / big_n).clamp(0.0, 1.0);
    let mut depth = 1;
    let mut any_violated = false;
    let mut bounds = Vec::with_capacity(curves.len());
    for c in curves {
        if c.points.is_empty() {
            return Err(Error::TooFewPoints { needed: 1, got: 0 });
        }
        let bound = big_n / c.block_size as f64 * c.eval(contrast);
        if report.v_min < bound * (1.0 - CERTIFY_MARGIN) {
            depth = depth.max(c.block_size);
            any_violated = true;
        }
        bounds.push((c.block_size, bound));
    }
    Ok(DepthCertificate { depth, contrast, bounds, any_violated })
}

/// Builds curves for `block_sizes` and certifies.
pub fn certify_depth_for(
    n_particles: usize,
    report: &SqueezingReport,
    block_sizes: &[usize],
) -> Result<DepthCertificate> {
    let curves: Vec<DepthCurve> =
        block_sizes.iter().map(|&n| optimal_squeezing_curve(n, &[])).collect::<Result<_>>()?;
    certify_depth(n_particles, report, &curves)
}

/// Largest violated block size in `1..=max_block`, found by bisection.
///
/// The scaled bound `(N/n) f_n` does not increase with `n`, so the violated
/// sizes form a prefix and about `log2(max_block)` curves suffice. The
/// returned certificate lists only the curves that were built.
pub fn certify_depth_bisect(
    n_particles: usize,
    report: &SqueezingReport,
    max_block: usize,
) -> Result<DepthCertificate> {
    if max_block == 0 {
        return Err(Error::TooFewParticles { min: 1, got: 0 });
    }
    let mut curves: Vec<DepthCurve> = Vec::new();
    let check = |n: usize, curves: &mut Vec<DepthCurve>| -> Result<bool> {
        let curve = optimal_squeezing_curve(n, &[])?;
        let cert = certify_depth(n_particles, report, std::slice::from_ref(&curve))?;
        curves.push(curve);
        Ok(cert.any_violated)
    };
    if !check(1, &mut curves)? {
        return certify_depth(n_particles, report, &curves);
    }
    // Invariant: lo violated, hi + 1 not known to be violated.
    let (mut lo, mut hi) = (1, max_block);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if check(mid, &mut curves)? {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    curves.sort_by_key(|c| c.block_size);
    certify_depth(n_particles, report, &curves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::DickeState;

    #[test]
    fn single_spin_is_flat() {
        let c = optimal_squeezing_curve(1, &[0.1, 0.5, 0.9]).unwrap();
        for &(_, f) in &c.points {
            assert!((f - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_contrast_end() {
        for n in [2, 3, 6, 7] {
            let c = optimal_squeezing_curve(n, &[]).unwrap();
            let expected = if n % 2 == 0 { 0.0 } else { 0.25 };
            assert!((c.eval(0.0) - expected).abs() < 1e-10, "n = {n}: {}", c.eval(0.0));
            assert!((c.eval(1e-4) - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn coherent_limit_and_monotonicity() {
        for n in [2, 5, 10] {
            let c = optimal_squeezing_curve(n, &[]).unwrap();
            let last = c.points.last().unwrap();
            assert_eq!(last.0, 1.0);
            assert!(last.1 <= 0.25 * n as f64 && last.1 > 0.25 * n as f64 * (1.0 - 1e-4));
            assert!(c.points.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
            assert!((c.eval(1.0 - 1e-12) - 0.25 * n as f64).abs() < 1e-4 * 0.25 * n as f64);
        }
    }

    #[test]
    fn larger_blocks_squeeze_more() {
        let grid: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
        let c4 = optimal_squeezing_curve(4, &grid).unwrap();
        let c8 = optimal_squeezing_curve(8, &grid).unwrap();
        for (a, b) in c4.points.iter().zip(&c8.points) {
            assert!(b.1 <= 2.0 * a.1 + 1e-12);
        }
    }

    #[test]
    fn bisection_matches_exhaustive_search() {
        let s = crate::propagator::evolve_oat(&DickeState::coherent_x(40).unwrap(), 0.05).unwrap();
        let r = s.squeezing().unwrap();
        let all: Vec<usize> = (1..=40).collect();
        let full = certify_depth_for(40, &r, &all).unwrap();
        let fast = certify_depth_bisect(40, &r, 40).unwrap();
        assert!(full.depth > 1);
        assert_eq!(full.depth, fast.depth);
    }

    #[test]
    fn coherent_state_certifies_nothing() {
        let s = DickeState::coherent_x(100).unwrap();
        let r = s.squeezing().unwrap();
        let cert = certify_depth_for(100, &r, &[1, 2, 4, 8]).unwrap();
        assert_eq!(cert.depth, 1);
    }
}
