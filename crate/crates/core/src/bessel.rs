//! Bessel functions of the first kind for Chebyshev propagation.

/// `J_k(z)` for `k = 0..` until the terms fall below `tol * max |J_k|`,
/// by Miller's backward recurrence normalized with
/// `J_0 + 2 sum J_{2k} = 1`. Requires `z >= 0`.
pub fn bessel_j_sequence(z: f64, tol: f64) -> Vec<f64> {
    assert!(z >= 0.0 && z.is_finite(), "bessel argument must be finite and nonnegative");
    if z == 0.0 {
        return vec![1.0];
    }
    let start = {
        let s = (z + 20.0 * z.cbrt() + 40.0).ceil() as usize;
        s + (s & 1)
    };
    let mut j = vec![0.0; start + 2];
    j[start] = 1e-300;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let prev = (2.0 * k as f64 / z) * j[k] - j[k + 1];
        j[k - 1] = prev;
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * prev;
        }
        if prev.abs() > 1e250 {
            let scale = 1.0 / prev.abs();
            j[k - 1..].iter_mut().for_each(|x| *x *= scale);
            norm *= scale;
        }
    }
    norm += j[0];
    j.iter_mut().for_each(|x| *x /= norm);

    let peak = j.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let last = j.iter().rposition(|x| x.abs() > tol * peak).unwrap_or(0);
    j.truncate(last + 1);
    j
}

#[cfg(test)]
mod tests {
    use super::*;

    // Power series, adequate for small arguments.
    fn series(k: usize, z: f64) -> f64 {
        let mut term = (0.5 * z).powi(k as i32) / (1..=k).map(|i| i as f64).product::<f64>();
        let mut sum = term;
        for m in 1..60 {
            term *= -(0.25 * z * z) / (m as f64 * (m + k) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn matches_power_series() {
        for z in [0.1, 1.0, 2.5, 7.0] {
            let j = bessel_j_sequence(z, 1e-18);
            for k in 0..8.min(j.len()) {
                assert!((j[k] - series(k, z)).abs() < 1e-13, "J_{k}({z})");
            }
        }
    }

    #[test]
    fn known_values() {
        // J_0(10), J_1(10), J_0(100)
        let j = bessel_j_sequence(10.0, 1e-18);
        assert!((j[0] - -0.245_935_764_451_348_3).abs() < 1e-13);
        assert!((j[1] - 0.043_472_746_168_861_44).abs() < 1e-13);
        let j = bessel_j_sequence(100.0, 1e-18);
        assert!((j[0] - 0.019_985_850_304_223_12).abs() < 1e-12);
    }

    #[test]
    fn sum_rule_at_large_argument() {
        // sum_k (2 - delta_k0) J_k^2 = 1
        let j = bessel_j_sequence(5000.0, 1e-18);
        let s: f64 = j[0] * j[0] + 2.0 * j[1..].iter().map(|x| x * x).sum::<f64>();
        assert!((s - 1.0).abs() < 1e-10);
        assert!(j.len() > 5000 && j.len() < 5000 + 400);
    }

    #[test]
    fn zero_argument() {
        assert_eq!(bessel_j_sequence(0.0, 1e-18), vec![1.0]);
    }
}
