//! Real symmetric tridiagonal eigensolvers.
//!
//! Two routes are provided. [`SymTridiagonal::eigh`] is the implicit-shift QL
//! algorithm with eigenvector accumulation, `O(n^3)` and robust for any
//! spectrum. [`SymTridiagonal::eigh_separated`] takes eigenvalues (from
//! [`SymTridiagonal::eigenvalues`] or known in closed form) and recovers each
//! eigenvector by shifted inverse iteration, `O(n^2)` in total; it requires a
//! spectrum without near-degenerate clusters.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const MAX_QL_ITERS: usize = 60;

/// Symmetric tridiagonal matrix stored as its diagonal and first
/// off-diagonal (`off[i]` couples rows `i` and `i + 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(!diag.is_empty(), "empty tridiagonal matrix");
        assert_eq!(off.len() + 1, diag.len(), "off-diagonal length must be n - 1");
        Self { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    /// Infinity-norm, an upper bound on the spectral radius.
    pub fn norm_inf(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
                let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
                left + self.diag[i].abs() + right
            })
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            y[i] = acc;
        }
    }

    /// Eigenvalues in ascending order (QL without vectors).
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        e.push(0.0);
        ql_implicit(&mut d, &mut e, None)?;
        d.sort_by(f64::total_cmp);
        Ok(d)
    }

    /// Full eigendecomposition by implicit QL with accumulated rotations.
    pub fn eigh(&self) -> Result<Eigen> {
        let n = self.dim();
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        e.push(0.0);
        let mut z = vec![0.0; n * n];
        for i in 0..n {
            z[i * n + i] = 1.0;
        }
        ql_implicit(&mut d, &mut e, Some(&mut z))?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        let values = order.iter().map(|&j| d[j]).collect();
        let mut vectors = Vec::with_capacity(n * n);
        for &j in &order {
            vectors.extend_from_slice(&z[j * n..(j + 1) * n]);
        }
        let mut eig = Eigen { n, values, vectors };
        eig.fix_signs();
        Ok(eig)
    }

    /// Eigenvectors for supplied eigenvalues by inverse iteration.
    ///
    /// Eigenvalues closer than `1e-8 * norm` are treated as a cluster and
    /// their vectors are Gram-Schmidt orthogonalized.
    pub fn eigh_separated(&self, eigenvalues: &[f64]) -> Eigen {
        let n = self.dim();
        assert_eq!(eigenvalues.len(), n);
        let norm = self.norm_inf().max(f64::MIN_POSITIVE);
        let delta = 4.0 * f64::EPSILON * norm;
        let cluster_tol = 1e-8 * norm;

        let mut vectors = vec![0.0; n * n];
        let mut cluster_start = 0;
        for (j, &lambda) in eigenvalues.iter().enumerate() {
            if j > 0 && (lambda - eigenvalues[j - 1]).abs() > cluster_tol {
                cluster_start = j;
            }
            let lu = TriLu::factor(&self.diag, &self.off, lambda + delta);
            let mut v = start_vector(n, j as u64);
            for _ in 0..3 {
                lu.solve(&mut v);
                let done = &vectors[..j * n];
                for k in cluster_start..j {
                    let prev = &done[k * n..(k + 1) * n];
                    let proj: f64 = prev.iter().zip(&v).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(prev).for_each(|(x, p)| *x -= proj * p);
                }
                normalize(&mut v);
            }
            vectors[j * n..(j + 1) * n].copy_from_slice(&v);
        }
        let mut eig = Eigen { n, values: eigenvalues.to_vec(), vectors };
        eig.fix_signs();
        eig
    }

    /// Unit eigenvector for an isolated eigenvalue `lambda`, by inverse
    /// iteration; the largest-magnitude component is positive.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.dim();
        let delta = 4.0 * f64::EPSILON * self.norm_inf().max(f64::MIN_POSITIVE);
        let lu = TriLu::factor(&self.diag, &self.off, lambda + delta);
        let mut v = start_vector(n, 0);
        for _ in 0..3 {
            lu.solve(&mut v);
            normalize(&mut v);
        }
        let peak = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        if peak < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    }
}

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending, vectors
/// stored column by column.
#[derive(Clone, Debug)]
pub struct Eigen {
    n: usize,
    values: Vec<f64>,
    vectors: Vec<f64>,
}

impl Eigen {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.n..(j + 1) * self.n]
    }

    /// Largest `|A v - lambda v|` over all eigenpairs.
    pub fn max_residual(&self, a: &SymTridiagonal) -> f64 {
        let mut av = vec![0.0; self.n];
        (0..self.n)
            .map(|j| {
                let v = self.vector(j);
                a.matvec(v, &mut av);
                av.iter().zip(v).map(|(x, y)| (x - self.values[j] * y).powi(2)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Coefficients `V^T x`.
    pub fn to_eigenbasis(&self, x: &[C64]) -> Vec<C64> {
        (0..self.n)
            .map(|j| self.vector(j).iter().zip(x).fold(C64::new(0.0, 0.0), |acc, (&v, &xi)| acc + xi * v))
            .collect()
    }

    /// `V c`.
    pub fn from_eigenbasis(&self, c: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.n];
        for (j, &cj) in c.iter().enumerate() {
            if cj.re == 0.0 && cj.im == 0.0 {
                continue;
            }
            for (yi, &v) in y.iter_mut().zip(self.vector(j)) {
                *yi += cj * v;
            }
        }
        y
    }

    /// `V diag(g(lambda)) V^T x`.
    pub fn apply_function<F>(&self, x: &[C64], g: F) -> Vec<C64>
    where
        F: Fn(f64) -> C64,
    {
        let mut c = self.to_eigenbasis(x);
        for (cj, &lambda) in c.iter_mut().zip(&self.values) {
            *cj *= g(lambda);
        }
        self.from_eigenbasis(&c)
    }

    // Largest-magnitude component of every eigenvector made positive, so
    // both solvers return the same vectors for a simple spectrum.
    fn fix_signs(&mut self) {
        let n = self.n;
        for col in self.vectors.chunks_mut(n) {
            let pivot = col.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() + 1e-12 { x } else { best });
            if pivot < 0.0 {
                col.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
}

// Implicit QL with Wilkinson shifts. `e[i]` couples `i` and `i + 1`;
// `e[n - 1]` is scratch. When `z` is given its columns are rotated along.
fn ql_implicit(d: &mut [f64], e: &mut [f64], mut z: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERS {
                return Err(Error::NoConvergence(MAX_QL_ITERS));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    let (lo, hi) = z.split_at_mut((i + 1) * n);
                    let zi = &mut lo[i * n..];
                    let zi1 = &mut hi[..n];
                    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                        let f = *b;
                        *b = s * *a + c * f;
                        *a = c * *a - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

// LU factorization of `T - shift I` with partial pivoting, the tridiagonal
// analogue of LAPACK's gttrf.
struct TriLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    l: Vec<f64>,
    swapped: Vec<bool>,
}

impl TriLu {
    fn factor(diag: &[f64], off: &[f64], shift: f64) -> Self {
        let n = diag.len();
        let tiny = f64::EPSILON * (diag.iter().chain(off).fold(0.0f64, |a, x| a.max(x.abs()))).max(f64::MIN_POSITIVE);
        let mut u0: Vec<f64> = diag.iter().map(|x| x - shift).collect();
        let mut u1 = off.to_vec();
        let mut u2 = vec![0.0; n.saturating_sub(2)];
        let lower = off;
        let mut l = vec![0.0; n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if u0[i].abs() >= lower[i].abs() {
                if u0[i] == 0.0 {
                    u0[i] = tiny;
                }
                let fact = lower[i] / u0[i];
                l[i] = fact;
                u0[i + 1] -= fact * u1[i];
            } else {
                let fact = u0[i] / lower[i];
                u0[i] = lower[i];
                let temp = u0[i + 1];
                u0[i + 1] = u1[i] - fact * temp;
                if i + 2 < n {
                    u2[i] = u1[i + 1];
                    u1[i + 1] = -fact * u2[i];
                }
                u1[i] = temp;
                l[i] = fact;
                swapped[i] = true;
            }
        }
        if u0[n - 1] == 0.0 {
            u0[n - 1] = tiny;
        }
        Self { u0, u1, u2, l, swapped }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.l[i] * b[i];
            } else {
                b[i + 1] -= self.l[i] * b[i];
            }
        }
        b[n - 1] /= self.u0[n - 1];
        if n >= 2 {
            b[n - 2] = (b[n - 2] - self.u1[n - 2] * b[n - 1]) / self.u0[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.u1[i] * b[i + 1] - self.u2[i] * b[i + 2]) / self.u0[i];
        }
        // Rescale to keep repeated solves away from overflow.
        let m = b.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if m > 1e100 || (m < 1e-100 && m > 0.0) {
            b.iter_mut().for_each(|x| *x /= m);
        }
    }
}

fn start_vector(n: usize, salt: u64) -> Vec<f64> {
    // splitmix64 stream; any vector with a component along the target works.
    let mut state = salt.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5_4A32_D192_ED03;
    (0..n)
        .map(|_| {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_tridiag(n: usize, salt: u64) -> SymTridiagonal {
        let d = start_vector(n, salt);
        let e = start_vector(n - 1, salt + 1000);
        SymTridiagonal::new(d, e)
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = SymTridiagonal::new(vec![2.0, -1.0], vec![0.5]);
        let eig = a.eigh().unwrap();
        let mid = 0.5;
        let rad = (1.5f64.powi(2) + 0.25).sqrt();
        assert!((eig.values()[0] - (mid - rad)).abs() < 1e-14);
        assert!((eig.values()[1] - (mid + rad)).abs() < 1e-14);
    }

    #[test]
    fn ql_residual_and_orthogonality() {
        for (n, salt) in [(1, 1), (7, 2), (64, 3), (200, 4)] {
            let a = if n == 1 { SymTridiagonal::new(vec![0.3], vec![]) } else { random_tridiag(n, salt) };
            let eig = a.eigh().unwrap();
            assert!(eig.max_residual(&a) <= 1e-12 * a.norm_inf().max(1.0));
            for i in 0..n {
                for j in 0..n {
                    let dot: f64 = eig.vector(i).iter().zip(eig.vector(j)).map(|(x, y)| x * y).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn inverse_iteration_matches_ql() {
        let a = random_tridiag(50, 9);
        let full = a.eigh().unwrap();
        let values = a.eigenvalues().unwrap();
        for (x, y) in values.iter().zip(full.values()) {
            assert!((x - y).abs() < 1e-12);
        }
        let fast = a.eigh_separated(&values);
        assert!(fast.max_residual(&a) < 1e-12);
        for j in 0..50 {
            for (x, y) in fast.vector(j).iter().zip(full.vector(j)) {
                assert!((x - y).abs() < 1e-9, "eigenvector {j} differs");
            }
        }
    }

    #[test]
    fn inverse_iteration_on_spin_x() {
        // S_x for spin 10; spectrum is exactly -10..=10.
        let n = 20;
        let off: Vec<f64> = (1..=n).map(|k| ((k * (n - k + 1)) as f64).sqrt() / 2.0).collect();
        let a = SymTridiagonal::new(vec![0.0; n + 1], off);
        let values: Vec<f64> = (0..=n).map(|k| k as f64 - 10.0).collect();
        let eig = a.eigh_separated(&values);
        assert!(eig.max_residual(&a) <= 1e-10 * a.norm_inf());
        let ql = a.eigenvalues().unwrap();
        for (x, y) in ql.iter().zip(&values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_matrix_is_trivial() {
        let a = SymTridiagonal::new(vec![3.0, 1.0, 2.0], vec![0.0, 0.0]);
        let eig = a.eigh().unwrap();
        assert_eq!(eig.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(eig.vector(0), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn apply_function_identity() {
        let a = random_tridiag(30, 5);
        let eig = a.eigh().unwrap();
        let x: Vec<C64> =
            start_vector(30, 77).into_iter().zip(start_vector(30, 78)).map(|(r, i)| C64::new(r, i)).collect();
        let y = eig.apply_function(&x, |_| C64::new(1.0, 0.0));
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
