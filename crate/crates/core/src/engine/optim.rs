//! Derivative-free minimization by the Nelder–Mead simplex method.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convolution::replicate_rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NelderMead {
    pub max_evals: usize,
    /// Stop when the spread of simplex values is below `ftol * (1 + |best|)`.
    pub ftol: f64,
    /// ...and every vertex is within `xtol` of the best one (max norm).
    pub xtol: f64,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            ftol: 1e-10,
            xtol: 1e-7,
            initial_step: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimize `f` from `x0`. NaN values are treated as `+inf`.
pub fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], opts: &NelderMead) -> Minimum {
    let n = x0.len();
    let eval = |x: &[f64]| finite_or_inf(f(x));
    if n == 0 {
        return Minimum {
            x: vec![],
            value: eval(x0),
            evaluations: 1,
            iterations: 0,
            converged: true,
        };
    }
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();
    let mut evals = n + 1;
    let mut iterations = 0;
    let mut converged = false;

    while evals < opts.max_evals {
        // stable sort keeps the earlier vertex first on ties
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let spread = values[n] - best;
        let size = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if best.is_finite() && spread <= opts.ftol * (1.0 + best.abs()) && size <= opts.xtol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(1.0);
        let fr = eval(&xr);
        evals += 1;
        if fr < values[0] {
            let xe = along(2.0);
            let fe = eval(&xe);
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
        let xc = if fr < values[n] { along(0.5) } else { along(-0.5) };
        let fc = eval(&xc);
        evals += 1;
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=n {
            let v: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, x)| b + 0.5 * (x - b))
                .collect();
            values[i] = eval(&v);
            simplex[i] = v;
        }
        evals += n;
    }

    let best = (0..=n).fold(0, |b, i| if values[i] < values[b] { i } else { b });
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        evaluations: evals,
        iterations,
        converged,
    }
}

/// Result of a multi-start run: the polished optimum plus bookkeeping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiStart {
    pub best: Minimum,
    pub evaluations: usize,
    pub iterations: usize,
    pub starts: usize,
}

/// Nelder–Mead from `x0` and from `restarts` points jittered by
/// `jitter * N(0, 1)` per coordinate, then a final run from the best point.
///
/// Starts run in parallel; each uses its own RNG stream so the outcome does not
/// depend on the thread count. The result is never worse than `f(x0)`.
pub fn minimize_with_restarts(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    x0: &[f64],
    opts: &NelderMead,
    restarts: usize,
    jitter: f64,
    seed: u64,
) -> MultiStart {
    let starts: Vec<Vec<f64>> = std::iter::once(x0.to_vec())
        .chain((1..=restarts).map(|r| {
            let mut rng = replicate_rng(seed, r);
            x0.iter()
                .map(|v| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    v + jitter * z
                })
                .collect()
        }))
        .collect();
    let runs: Vec<Minimum> = starts.par_iter().map(|s| nelder_mead(f, s, opts)).collect();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.value < runs[best].value {
            best = i;
        }
    }
    let polish = nelder_mead(f, &runs[best].x, opts);
    let evaluations = runs.iter().map(|r| r.evaluations).sum::<usize>() + polish.evaluations;
    let iterations = runs.iter().map(|r| r.iterations).sum::<usize>() + polish.iterations;
    let final_best = if polish.value <= runs[best].value {
        polish
    } else {
        Minimum {
            converged: polish.converged,
            ..runs[best].clone()
        }
    };
    MultiStart {
        best: final_best,
        evaluations,
        iterations,
        starts: starts.len(),
    }
}
