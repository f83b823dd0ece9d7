//! Pairwise working-set ascent on the soft-margin dual
//!
//! ```text
//! max  W(a) = sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j <x_i, x_j>
//! s.t. 0 <= a_i <= C,  sum_i a_i y_i = 0
//! ```
//!
//! Written internally as the minimization of `1/2 a'Qa - e'a` with
//! `Q_ij = y_i y_j <x_i, x_j>`. Each step picks the maximal violating index
//! `i` and then the partner `j` with the largest second-order decrease, and
//! solves the two-variable subproblem analytically. Every step keeps
//! `sum a_i y_i` fixed at zero.
//!
//! Pair updates zig-zag on ill-conditioned faces, so once per sweep the
//! solver also takes a Newton step on the current free set: it solves the
//! equality-constrained reduced problem exactly and moves toward that point
//! with an exact line search, stopping at the first box bound.

use alloc::vec::Vec;

use crate::vectorizer::FeatureVector;

const TAU: f64 = 1e-12;
/// Free sets larger than this skip the Newton step (cubic cost).
const MAX_NEWTON_FREE: usize = 400;
/// Kernel-row cache budget in f64 entries (32 MiB).
const ROW_CACHE_ENTRIES: usize = 1 << 22;

pub(crate) struct Problem<'a> {
    pub xs: Vec<&'a FeatureVector>,
    /// +1.0 / -1.0
    pub ys: Vec<f64>,
    pub c: f64,
}

pub(crate) struct Solution {
    pub alpha: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl Problem<'_> {
    fn len(&self) -> usize {
        self.ys.len()
    }

    fn dim(&self) -> usize {
        self.xs.iter().filter_map(|x| x.max_index()).max().map_or(0, |m| m + 1)
    }

    fn is_upper(&self, a: f64) -> bool {
        a >= self.c
    }

    fn is_lower(a: f64) -> bool {
        a <= 0.0
    }

    /// Selects the working pair, or `None` when the maximal violation
    /// `m(a) - M(a)` is below `eps`. Ties go to the lowest index.
    fn select(
        &self,
        alpha: &[f64],
        grad: &[f64],
        diag: &[f64],
        rows: &mut Rows,
        q_i: &mut [f64],
        eps: f64,
    ) -> Option<(usize, usize)> {
        let n = self.len();
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let v = -self.ys[t] * grad[t];
            let in_up = if self.ys[t] > 0.0 {
                !self.is_upper(alpha[t])
            } else {
                !Self::is_lower(alpha[t])
            };
            if in_up && v > gmax {
                gmax = v;
                i_sel = Some(t);
            }
        }
        let i = i_sel?;
        rows.fill(self, i, q_i);

        let mut gmax2 = f64::NEG_INFINITY;
        let mut best = f64::INFINITY;
        let mut j_sel = None;
        for t in 0..n {
            let in_low = if self.ys[t] > 0.0 {
                !Self::is_lower(alpha[t])
            } else {
                !self.is_upper(alpha[t])
            };
            if !in_low {
                continue;
            }
            let v = -self.ys[t] * grad[t];
            // gmax2 tracks -M(a) = max over I_low of y_t G_t
            gmax2 = gmax2.max(-v);
            let grad_diff = gmax - v;
            if grad_diff > 0.0 {
                let quad = diag[i] + diag[t] - 2.0 * self.ys[i] * self.ys[t] * q_i[t];
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj = -(grad_diff * grad_diff) / quad;
                if obj < best {
                    best = obj;
                    j_sel = Some(t);
                }
            }
        }
        if gmax + gmax2 < eps {
            return None;
        }
        j_sel.map(|j| (i, j))
    }

    pub fn solve(&self, eps: f64, max_iter: usize) -> Solution {
        let n = self.len();
        let c = self.c;
        let mut alpha = alloc::vec![0.0; n];
        let mut grad = alloc::vec![-1.0; n];
        let diag: Vec<f64> = self.xs.iter().map(|x| x.norm_squared()).collect();
        let mut q_i = alloc::vec![0.0; n];
        let mut q_j = alloc::vec![0.0; n];
        let mut rows = Rows::new(self);

        let mut iterations = 0;
        let mut converged = false;
        while iterations < max_iter {
            let Some((i, j)) = self.select(&alpha, &grad, &diag, &mut rows, &mut q_i, eps) else {
                converged = true;
                break;
            };
            iterations += 1;
            rows.fill(self, j, &mut q_j);

            let (old_i, old_j) = (alpha[i], alpha[j]);
            if self.ys[i] != self.ys[j] {
                let quad = diag[i] + diag[j] + 2.0 * q_i[j];
                let quad = if quad > 0.0 { quad } else { TAU };
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let quad = diag[i] + diag[j] - 2.0 * q_i[j];
                let quad = if quad > 0.0 { quad } else { TAU };
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }

            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for t in 0..n {
                grad[t] += q_i[t] * di + q_j[t] * dj;
            }

            if iterations % n == 0 {
                self.newton_step(&mut alpha, &mut grad);
            }
        }

        Solution {
            alpha,
            iterations,
            converged,
        }
    }

    /// Minimizes the dual over the face fixed by the current bound variables.
    /// Returns whether any variable moved.
    fn newton_step(&self, alpha: &mut [f64], grad: &mut [f64]) -> bool {
        let c = self.c;
        let free: Vec<usize> = (0..alpha.len()).filter(|&t| alpha[t] > 0.0 && alpha[t] < c).collect();
        let k = free.len();
        if k < 2 || k > MAX_NEWTON_FREE {
            return false;
        }
        // [Q_FF + rI  y_F] [d]   [-G_F]
        // [y_F'       0  ] [v] = [  0 ]
        let m = k + 1;
        let mut q_ff = alloc::vec![0.0; k * k];
        for (a, &s) in free.iter().enumerate() {
            for (b, &t) in free.iter().enumerate().skip(a) {
                let q = self.ys[s] * self.ys[t] * self.xs[s].dot(self.xs[t]);
                q_ff[a * k + b] = q;
                q_ff[b * k + a] = q;
            }
        }
        let trace: f64 = (0..k).map(|a| q_ff[a * k + a]).sum();
        let ridge = 1e-12 * trace.max(1.0);
        let mut sys = alloc::vec![0.0; m * m];
        let mut rhs = alloc::vec![0.0; m];
        for a in 0..k {
            for b in 0..k {
                sys[a * m + b] = q_ff[a * k + b];
            }
            sys[a * m + a] += ridge;
            sys[a * m + k] = self.ys[free[a]];
            sys[k * m + a] = self.ys[free[a]];
            rhs[a] = -grad[free[a]];
        }
        if !solve_dense(&mut sys, &mut rhs, m) {
            return false;
        }
        // near-singular faces give large steps; restore y'd = 0 exactly
        let drift = free.iter().zip(&rhs[..k]).map(|(&t, &dt)| self.ys[t] * dt).sum::<f64>() / k as f64;
        let d: Vec<f64> = free.iter().zip(&rhs[..k]).map(|(&t, &dt)| dt - drift * self.ys[t]).collect();

        let slope: f64 = free.iter().zip(&d).map(|(&t, &dt)| grad[t] * dt).sum();
        if !(slope < 0.0) {
            return false;
        }
        let mut curvature = 0.0;
        for a in 0..k {
            let row: f64 = (0..k).map(|b| q_ff[a * k + b] * d[b]).sum();
            curvature += d[a] * row;
        }
        let mut step = if curvature > 0.0 { -slope / curvature } else { f64::INFINITY };
        let mut blocking = None;
        for (a, &t) in free.iter().enumerate() {
            let limit = if d[a] > 0.0 {
                (c - alpha[t]) / d[a]
            } else if d[a] < 0.0 {
                -alpha[t] / d[a]
            } else {
                continue;
            };
            if limit < step {
                step = limit;
                blocking = Some((a, if d[a] > 0.0 { c } else { 0.0 }));
            }
        }
        if !(step > 0.0 && step.is_finite()) {
            return false;
        }

        for (a, &t) in free.iter().enumerate() {
            let old = alpha[t];
            let new = match blocking {
                Some((b, bound)) if b == a => bound,
                _ => (old + step * d[a]).clamp(0.0, c),
            };
            let delta = new - old;
            if delta == 0.0 {
                continue;
            }
            alpha[t] = new;
        }
        self.refresh_gradient(alpha, grad);
        true
    }

    /// Recomputes `G = Qa - e` through `w = sum a_t y_t x_t`, which costs
    /// one pass over the data instead of one kernel row per changed variable.
    fn refresh_gradient(&self, alpha: &[f64], grad: &mut [f64]) {
        let mut w = alloc::vec![0.0; self.dim()];
        for (t, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                self.xs[t].add_scaled_to(&mut w, a * self.ys[t]);
            }
        }
        for (t, g) in grad.iter_mut().enumerate() {
            *g = self.ys[t] * self.xs[t].dot_dense(&w) - 1.0;
        }
    }
}

/// Rows of Q, computed on first use and kept while they fit the budget.
struct Rows {
    cached: Vec<Option<Vec<f64>>>,
    room: usize,
    /// Scatter buffer for the row's example; all zeros between calls.
    dense: Vec<f64>,
}

impl Rows {
    fn new(p: &Problem<'_>) -> Rows {
        let n = p.len();
        Rows {
            cached: alloc::vec![None; n],
            room: ROW_CACHE_ENTRIES / n.max(1),
            dense: alloc::vec![0.0; p.dim()],
        }
    }

    fn fill(&mut self, p: &Problem<'_>, i: usize, out: &mut [f64]) {
        if let Some(row) = &self.cached[i] {
            out.copy_from_slice(row);
            return;
        }
        let (xi, yi) = (p.xs[i], p.ys[i]);
        for &(k, v) in xi.entries() {
            self.dense[k] = v;
        }
        for (t, q) in out.iter_mut().enumerate() {
            *q = yi * p.ys[t] * p.xs[t].dot_dense(&self.dense);
        }
        for &(k, _) in xi.entries() {
            self.dense[k] = 0.0;
        }
        if self.room > 0 {
            self.room -= 1;
            self.cached[i] = Some(out.to_vec());
        }
    }
}

/// Gaussian elimination with partial pivoting on a row-major `n x n` system.
/// The solution overwrites `b`. Returns false for a numerically singular matrix.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))
            .expect("non-empty range");
        if a[pivot * n + col].abs() < 1e-300 {
            return false;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            b.swap(pivot, col);
        }
        let p = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / p;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
            b[r] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let s: f64 = (col + 1..n).map(|k| a[col * n + k] * b[k]).sum();
        b[col] = (b[col] - s) / a[col * n + col];
    }
    b.iter().all(|x| x.is_finite())
}
