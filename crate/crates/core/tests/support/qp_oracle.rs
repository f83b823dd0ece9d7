//! Independent reference solver for tiny soft-margin SVM duals.
//!
//! Accelerated projected gradient ascent on the dense dual with adaptive
//! restart, run until the primal/dual gap certifies the objective. The
//! projection onto `{0 <= a <= C, y'a = 0}` is exact (breakpoint search).
//! Shares no code with the production solver.

#![allow(dead_code)]

pub struct OracleSolution {
    pub alpha: Vec<f64>,
    pub w: Vec<f64>,
    pub objective: f64,
    /// Primal objective minus dual objective at the returned point.
    pub gap: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn weights(xs: &[Vec<f64>], ys: &[f64], alpha: &[f64]) -> Vec<f64> {
    let d = xs[0].len();
    let mut w = vec![0.0; d];
    for ((x, &y), &a) in xs.iter().zip(ys).zip(alpha) {
        for k in 0..d {
            w[k] += a * y * x[k];
        }
    }
    w
}

pub fn dual_objective(xs: &[Vec<f64>], ys: &[f64], alpha: &[f64]) -> f64 {
    let w = weights(xs, ys, alpha);
    alpha.iter().sum::<f64>() - 0.5 * dot(&w, &w)
}

/// `min_b 1/2|w|^2 + C sum max(0, 1 - y(w.x - b))`; the hinge sum is convex
/// piecewise linear in b, so its minimum is at a breakpoint.
pub fn primal_objective(xs: &[Vec<f64>], ys: &[f64], c: f64, w: &[f64]) -> (f64, f64) {
    let wx: Vec<f64> = xs.iter().map(|x| dot(w, x)).collect();
    let hinge = |b: f64| -> f64 {
        wx.iter()
            .zip(ys)
            .map(|(f, y)| (1.0 - y * (f - b)).max(0.0))
            .sum::<f64>()
    };
    let mut best = (f64::INFINITY, 0.0);
    for (f, y) in wx.iter().zip(ys) {
        let b = f - y;
        let v = hinge(b);
        if v < best.0 {
            best = (v, b);
        }
    }
    (0.5 * dot(w, w) + c * best.0, best.1)
}

/// Euclidean projection onto `{0 <= a <= C, sum y_i a_i = 0}`.
fn project(v: &[f64], ys: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> {
        v.iter()
            .zip(ys)
            .map(|(vi, yi)| (vi - lam * yi).clamp(0.0, c))
            .collect()
    };
    let g = |lam: f64| -> f64 { dot(&at(lam), ys) };
    let mut bps: Vec<f64> = v
        .iter()
        .zip(ys)
        .flat_map(|(vi, yi)| [yi * vi, yi * (vi - c)])
        .collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    // g is non-increasing in lambda; find consecutive breakpoints bracketing 0
    let gs: Vec<f64> = bps.iter().map(|&l| g(l)).collect();
    for k in 0..bps.len() {
        if gs[k] == 0.0 {
            return at(bps[k]);
        }
        if k + 1 < bps.len() && gs[k] > 0.0 && gs[k + 1] < 0.0 {
            let (l0, l1) = (bps[k], bps[k + 1]);
            let lam = l0 + (l1 - l0) * gs[k] / (gs[k] - gs[k + 1]);
            return at(lam);
        }
    }
    // g is constant zero outside the breakpoints only if everything clips
    at(bps[0])
}

pub fn solve(xs: &[Vec<f64>], ys: &[f64], c: f64, gap_tol: f64, max_iter: usize) -> OracleSolution {
    let n = xs.len();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| ys[i] * ys[j] * dot(&xs[i], &xs[j])).collect())
        .collect();
    let lip = (0..n).map(|i| q[i][i]).sum::<f64>().max(1e-12);
    let step = 1.0 / lip;
    let grad = |a: &[f64]| -> Vec<f64> {
        // gradient of the dual objective: 1 - Q a
        (0..n).map(|i| 1.0 - dot(&q[i], a)).collect()
    };

    let mut x = vec![0.0; n];
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    while iterations < max_iter {
        iterations += 1;
        let g = grad(&y);
        let cand: Vec<f64> = y.iter().zip(&g).map(|(a, gi)| a + step * gi).collect();
        let x_new = project(&cand, ys, c);
        // restart momentum when it points against the gradient step
        let restart = dot(
            &g,
            &x_new.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>(),
        ) < 0.0;
        let t_new = if restart { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
        let mom = if restart { 0.0 } else { (t - 1.0) / t_new };
        y = x_new
            .iter()
            .zip(&x)
            .map(|(a, b)| a + mom * (a - b))
            .collect();
        x = x_new;
        t = t_new;
        if iterations % 25 == 0 {
            let w = weights(xs, ys, &x);
            let (p, _) = primal_objective(xs, ys, c, &w);
            gap = p - dual_objective(xs, ys, &x);
            if gap <= gap_tol {
                break;
            }
        }
    }
    let w = weights(xs, ys, &x);
    let objective = dual_objective(xs, ys, &x);
    let (p, _) = primal_objective(xs, ys, c, &w);
    OracleSolution {
        alpha: x,
        w,
        objective,
        gap: gap.min(p - objective),
        iterations,
    }
}
