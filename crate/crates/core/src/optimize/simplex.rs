//! Nelder-Mead downhill simplex.

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexOptions {
    /// Stop when every vertex lies within this distance (max-norm) of the best.
    pub x_tol: f64,
    /// Stop when the spread of vertex values drops below this.
    pub f_tol: f64,
    pub max_evals: usize,
    /// Edge length of the initial simplex along each coordinate.
    pub initial_step: Vec<f64>,
    /// Rebuild the simplex around the converged point once and continue.
    pub restart: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

impl SimplexResult {
    pub fn budget_exhausted(&self) -> bool {
        !self.converged
    }
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(opts.initial_step.len(), x0.len(), "one step per coordinate");
    let mut evals = 0;
    let f0 = f(x0);
    evals += 1;
    let mut best = SimplexResult { x: x0.to_vec(), f: f0, evals, converged: false };

    let rounds = if opts.restart { 2 } else { 1 };
    for _ in 0..rounds {
        let budget = opts.max_evals.saturating_sub(best.evals);
        if budget == 0 {
            best.converged = false;
            break;
        }
        let run = descend(&mut f, &best.x, best.f, opts, budget);
        let total = best.evals + run.evals;
        if run.f <= best.f {
            best = SimplexResult { evals: total, ..run };
        } else {
            best.evals = total;
            best.converged = run.converged;
        }
        if !best.converged {
            break;
        }
    }
    best
}

fn descend<F>(f: &mut F, start: &[f64], f_start: f64, opts: &SimplexOptions, budget: usize) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let mut evals = 0;
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    values.push(f_start);
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += opts.initial_step[i];
        values.push(f(&v));
        evals += 1;
        simplex.push(v);
    }

    let mut converged = false;
    loop {
        // order: best first; stable sort keeps ties deterministic
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        values = idx.iter().map(|&i| values[i]).collect();

        let size =
            simplex[1..].iter().flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
        let spread = values[n] - values[0];
        if size < opts.x_tol || spread < opts.f_tol {
            converged = true;
            break;
        }
        if evals >= budget {
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect() };

        let xr = along(REFLECT);
        let fr = f(&xr);
        evals += 1;
        if fr < values[0] {
            let xe = along(EXPAND);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        // outside contraction when the reflection helped a little, inside otherwise
        let xc = if fr < values[n] { along(CONTRACT) } else { along(-CONTRACT) };
        let fc = f(&xc);
        evals += 1;
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=n {
            let v: Vec<f64> = simplex[0].iter().zip(&simplex[i]).map(|(b, x)| b + SHRINK * (x - b)).collect();
            values[i] = f(&v);
            simplex[i] = v;
            evals += 1;
        }
    }

    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    SimplexResult { x: simplex[best].clone(), f: values[best], evals, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(n: usize) -> SimplexOptions {
        SimplexOptions { x_tol: 1e-10, f_tol: 1e-20, max_evals: 20_000, initial_step: vec![0.3; n], restart: true }
    }

    #[test]
    fn quadratic_bowl() {
        let a = [0.7, -1.3, 2.2];
        let bowl = |x: &[f64]| x.iter().zip(&a).map(|(x, a)| (x - a).powi(2)).sum::<f64>();
        let r = nelder_mead(bowl, &[0.0, 0.0, 0.0], &opts(3));
        assert!(r.converged);
        for (x, a) in r.x.iter().zip(&a) {
            assert!((x - a).abs() < 1e-6);
        }
    }

    #[test]
    fn rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead(rosen, &[-1.2, 1.0], &opts(2));
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let mut o = opts(2);
        o.max_evals = 30;
        let r = nelder_mead(rosen, &[-1.2, 1.0], &o);
        assert!(r.budget_exhausted());
        assert!(r.evals <= 30 + 3);
        assert!(r.f <= rosen(&[-1.2, 1.0]));
    }
}
