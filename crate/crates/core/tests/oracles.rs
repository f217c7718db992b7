//! Library results checked against independent brute-force computations.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use squeeze_core::analysis::depth::optimal_squeezing_curve;
use squeeze_core::optimize::{local_minimize, oat_baseline, optimize_nested, warm_start, OptimizerConfig};
use squeeze_core::propagator::{evolve_oat, evolve_tat, protocol_squeezing};
use squeeze_core::DickeState;

type Mat = Vec<Vec<C64>>;

fn zeros(d: usize) -> Mat {
    vec![vec![C64::new(0.0, 0.0); d]; d]
}

/// Spin matrices in the basis `m = S, S-1, ..., -S`.
fn spin_matrices(n: usize) -> [Mat; 3] {
    let d = n + 1;
    let s = 0.5 * n as f64;
    let (mut x, mut y, mut z) = (zeros(d), zeros(d), zeros(d));
    for k in 0..d {
        let m = s - k as f64;
        z[k][k] = C64::new(m, 0.0);
        if k + 1 < d {
            // <m| S+ |m - 1>
            let up = (s * (s + 1.0) - m * (m - 1.0)).sqrt();
            x[k][k + 1] = C64::new(0.5 * up, 0.0);
            x[k + 1][k] = C64::new(0.5 * up, 0.0);
            y[k][k + 1] = C64::new(0.0, -0.5 * up);
            y[k + 1][k] = C64::new(0.0, 0.5 * up);
        }
    }
    [x, y, z]
}

fn matvec(a: &Mat, v: &[C64]) -> Vec<C64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let d = a.len();
    let mut c = zeros(d);
    for i in 0..d {
        for k in 0..d {
            for j in 0..d {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

fn expect(a: &Mat, v: &[C64]) -> f64 {
    v.iter().zip(matvec(a, v)).map(|(x, y)| (x.conj() * y).re).sum()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `exp(-i H t)` by Taylor series after scaling, then repeated squaring.
fn expm_i(h: &Mat, t: f64) -> Mat {
    let d = h.len();
    let squarings = 10;
    let scale = t / f64::from(1 << squarings);
    let mut term = zeros(d);
    let mut sum = zeros(d);
    for i in 0..d {
        term[i][i] = C64::new(1.0, 0.0);
        sum[i][i] = C64::new(1.0, 0.0);
    }
    for order in 1..30 {
        term = matmul(&term, h);
        let f = C64::new(0.0, -scale) / order as f64;
        term.iter_mut().flatten().for_each(|x| *x *= f);
        sum.iter_mut().flatten().zip(term.iter().flatten()).for_each(|(s, x)| *s += x);
    }
    for _ in 0..squarings {
        sum = matmul(&sum, &sum);
    }
    sum
}

#[test]
fn oat_squeezing_matches_dense_angle_scan() {
    let n = 20;
    let t = 0.05;
    let [sx, sy, sz] = spin_matrices(n);
    let s = 0.5 * n as f64;
    let psi: Vec<C64> = (0..=n)
        .map(|k| {
            let m = s - k as f64;
            C64::from_polar(binomial(n, k).sqrt() / 2f64.powf(s), -m * m * t)
        })
        .collect();
    let mean = expect(&sx, &psi);
    let mut v_min = f64::INFINITY;
    let steps = 100_000;
    for i in 0..steps {
        let phi = PI * i as f64 / steps as f64;
        let (c, sn) = (phi.cos(), phi.sin());
        let mut op = zeros(n + 1);
        for r in 0..=n {
            for q in 0..=n {
                op[r][q] = sy[r][q] * c + sz[r][q] * sn;
            }
        }
        let w = matvec(&op, &psi);
        v_min = v_min.min(w.iter().map(|x| x.norm_sqr()).sum());
    }
    let oracle = n as f64 * v_min / (mean * mean);
    let report = evolve_oat(&DickeState::coherent_x(n).unwrap(), t).unwrap().squeezing().unwrap();
    assert!((report.xi2 - oracle).abs() < 1e-8 * oracle, "{} vs {oracle}", report.xi2);
    assert!((report.mean_spin_len - mean.abs()).abs() < 1e-12);
}

#[test]
fn tat_matches_taylor_exponential() {
    for n in [2usize, 5] {
        let [sx, sy, _] = spin_matrices(n);
        let (xx, yy) = (matmul(&sx, &sx), matmul(&sy, &sy));
        let mut h = zeros(n + 1);
        for i in 0..=n {
            for j in 0..=n {
                h[i][j] = xx[i][j] - yy[i][j];
            }
        }
        for t in [0.1, 0.7, 2.3] {
            let u = expm_i(&h, t);
            for k in 0..=n {
                let got = evolve_tat(&DickeState::basis(n, k).unwrap(), t).unwrap();
                for (i, a) in got.amplitudes().iter().enumerate() {
                    assert!((a - u[i][k]).norm() < 1e-10, "n={n} t={t} k={k}");
                }
            }
        }
    }
}

#[test]
fn oat_baseline_matches_fine_grid() {
    let n = 50;
    let start = DickeState::coherent_x(n).unwrap();
    let grid = 100_000;
    let (t_best, xi2_best) = (1..=grid)
        .map(|i| {
            let t = i as f64 / grid as f64;
            (t, evolve_oat(&start, t).unwrap().squeezing().unwrap().xi2)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let b = oat_baseline(n).unwrap();
    assert!(b.xi2 <= xi2_best + 1e-12, "{} vs grid {xi2_best}", b.xi2);
    assert!((b.xi2 - xi2_best).abs() < 1e-6 * xi2_best);
    assert!((b.duration - t_best).abs() < 2e-5);
}

#[test]
fn local_search_finds_oat_minimum() {
    let n = 100;
    let start = DickeState::coherent_x(n).unwrap();
    let f = |x: &[f64]| {
        if x[0] < 0.0 {
            return 1e6;
        }
        evolve_oat(&start, x[0]).unwrap().squeezing().unwrap().xi2
    };
    let grid = 20_000;
    let t_grid = (1..=grid).map(|i| 0.1 * i as f64 / grid as f64).min_by(|&a, &b| f(&[a]).total_cmp(&f(&[b]))).unwrap();
    let r = local_minimize(f, &[0.5 * t_grid], &OptimizerConfig::new(1));
    assert!((r.x[0] - t_grid).abs() < 1e-5, "{} vs {t_grid}", r.x[0]);
}

#[test]
fn two_particle_depth_curve_bounds_all_spin_one_states() {
    let curve = optimal_squeezing_curve(2, &[]).unwrap();
    // Real spin-1 states a|1> + b|0> + c|-1> on a fine sphere grid.
    let bins = 50;
    let mut lowest = vec![f64::INFINITY; bins];
    let m = 600;
    for i in 0..=m {
        let u = PI * i as f64 / m as f64;
        for j in 0..2 * m {
            let v = PI * j as f64 / m as f64;
            let (a, b, c) = (u.sin() * v.cos(), u.cos(), u.sin() * v.sin());
            let x = 2f64.sqrt() * (a * b + b * c);
            let f = a * a + c * c;
            if x < 0.0 {
                continue;
            }
            // Slack covers linear interpolation between refined curve points.
            assert!(curve.eval(x) <= f + 1e-7, "x={x}: curve {} above state {f}", curve.eval(x));
            let bin = ((x * bins as f64) as usize).min(bins - 1);
            lowest[bin] = lowest[bin].min(f);
        }
    }
    for (bin, &f) in lowest.iter().enumerate() {
        let x = bin as f64 / bins as f64;
        assert!(f - curve.eval(x) < 0.05, "bin {bin}: brute {f} vs curve {}", curve.eval(x));
    }
}

#[test]
fn warm_start_never_worsens_its_seed() {
    let n = 300;
    let config = OptimizerConfig::new(2).with_starts(8);
    let prior = optimize_nested(n, &config, None).unwrap();
    let again = warm_start(n, &prior, &config, None).unwrap();
    assert!(again.xi2 <= prior.xi2 + config.f_tol);
    let check = protocol_squeezing(n, &again.protocol).unwrap().xi2;
    assert!((check - again.xi2).abs() < 1e-12 * check);
}

#[test]
fn optimum_moves_smoothly_with_particle_number() {
    let config = OptimizerConfig::new(2).with_starts(16);
    let a = optimize_nested(1000, &config, None).unwrap();
    let b = warm_start(1100, &a, &config, None).unwrap();
    for (p, q) in a.params().iter().zip(b.params()) {
        assert!((q - p).abs() < 0.2 * p.abs(), "{p} -> {q}");
    }
    assert!(b.xi2 < a.xi2);
}
