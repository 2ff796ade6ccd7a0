//! Sequential minimal optimization for the binary soft-margin dual
//!
//! ```text
//! min ½ αᵀQα − eᵀα   s.t.  0 ≤ α_i ≤ C,  yᵀα = 0,   Q_ij = y_i y_j K_ij
//! ```
//!
//! Working pairs are chosen as in libsvm: `i` is the maximal violator in
//! `I_up`, `j` minimizes the second-order objective decrease within `I_low`.

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Decision function is `Σ α_i y_i K(x_i, x) + bias`.
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `max_{I_up} −y_t G_t − min_{I_low} −y_t G_t` at termination.
    pub violation: f64,
}

struct State<'a> {
    kernel: &'a [f64],
    y: &'a [f64],
    n: usize,
    c: f64,
    alpha: Vec<f64>,
    grad: Vec<f64>,
}

impl State<'_> {
    #[inline]
    fn q(&self, i: usize, j: usize) -> f64 {
        self.y[i] * self.y[j] * self.kernel[i * self.n + j]
    }

    fn in_up(&self, t: usize) -> bool {
        (self.y[t] > 0.0 && self.alpha[t] < self.c) || (self.y[t] < 0.0 && self.alpha[t] > 0.0)
    }

    fn in_low(&self, t: usize) -> bool {
        (self.y[t] > 0.0 && self.alpha[t] > 0.0) || (self.y[t] < 0.0 && self.alpha[t] < self.c)
    }

    /// Returns `(i, j, violation)`; `None` when either index set is empty.
    fn select(&self) -> Option<(usize, usize, f64)> {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..self.n {
            if self.in_up(t) {
                let v = -self.y[t] * self.grad[t];
                if v >= gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let i = i_sel?;

        let mut gmin = f64::INFINITY;
        let mut best = f64::INFINITY;
        let mut j_sel = None;
        for t in 0..self.n {
            if !self.in_low(t) {
                continue;
            }
            let v = -self.y[t] * self.grad[t];
            gmin = gmin.min(v);
            let b = gmax - v;
            if b > 0.0 {
                let mut a = self.q(i, i) + self.q(t, t) - 2.0 * self.y[i] * self.y[t] * self.q(i, t);
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(b * b) / a;
                if obj <= best {
                    best = obj;
                    j_sel = Some(t);
                }
            }
        }
        let violation = gmax - gmin;
        Some((i, j_sel.unwrap_or(i), violation))
    }

    fn update(&mut self, i: usize, j: usize) {
        let c = self.c;
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if self.y[i] != self.y[j] {
            let mut quad = self.q(i, i) + self.q(j, j) + 2.0 * self.q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = self.q(i, i) + self.q(j, j) - 2.0 * self.q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..self.n {
            self.grad[t] += self.q(t, i) * di + self.q(t, j) * dj;
        }
    }

    fn bias(&self) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum_free, mut n_free) = (0.0, 0usize);
        for t in 0..self.n {
            let yg = self.y[t] * self.grad[t];
            let at_upper = self.alpha[t] >= self.c;
            let at_lower = self.alpha[t] <= 0.0;
            if at_upper {
                if self.y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if at_lower {
                if self.y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                sum_free += yg;
            }
        }
        let rho = if n_free > 0 {
            sum_free / n_free as f64
        } else {
            (ub + lb) / 2.0
        };
        -rho
    }
}

/// Solves the dual for a precomputed row-major `n×n` kernel matrix and
/// labels `y ∈ {−1, +1}`. Deterministic: ties in pair selection go to the
/// highest index.
pub fn solve(kernel: &[f64], y: &[f64], c: f64, tol: f64, max_iter: usize) -> SmoSolution {
    let n = y.len();
    assert_eq!(kernel.len(), n * n, "kernel matrix must be n×n");
    let mut st = State {
        kernel,
        y,
        n,
        c,
        alpha: vec![0.0; n],
        grad: vec![-1.0; n],
    };
    let mut iterations = 0;
    let mut violation = f64::INFINITY;
    let mut converged = false;
    while iterations < max_iter {
        let Some((i, j, v)) = st.select() else {
            converged = true;
            violation = 0.0;
            break;
        };
        violation = v;
        if v < tol || i == j {
            converged = true;
            break;
        }
        st.update(i, j);
        iterations += 1;
    }
    if !converged {
        if let Some((_, _, v)) = st.select() {
            violation = v;
        }
        log::warn!("SMO stopped after {iterations} iterations, violation {violation:.3e}");
    }
    SmoSolution {
        bias: st.bias(),
        alpha: st.alpha,
        iterations,
        converged,
        violation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_gram(x: &[[f64; 2]]) -> Vec<f64> {
        x.iter()
            .flat_map(|a| x.iter().map(move |b| a[0] * b[0] + a[1] * b[1]))
            .collect()
    }

    #[test]
    fn two_points_hard_margin() {
        // x = ±1 on a line: w = 1, b = 0, α = ½ each.
        let x = [[1.0, 0.0], [-1.0, 0.0]];
        let y = [1.0, -1.0];
        let s = solve(&linear_gram(&x), &y, 100.0, 1e-6, 1000);
        assert!(s.converged);
        assert!((s.alpha[0] - 0.5).abs() < 1e-9);
        assert!((s.alpha[1] - 0.5).abs() < 1e-9);
        assert!(s.bias.abs() < 1e-9);
    }

    #[test]
    fn feasibility_and_kkt() {
        let x = [
            [0.0, 0.1],
            [0.3, -0.2],
            [1.0, 1.2],
            [1.4, 0.9],
            [0.7, 0.6],
            [0.5, 0.8],
        ];
        let y = [1.0, 1.0, -1.0, -1.0, 1.0, -1.0];
        let c = 2.0;
        let s = solve(&linear_gram(&x), &y, c, 1e-3, 10_000);
        assert!(s.converged);
        assert!(s.violation < 1e-3);
        assert!(s.alpha.iter().all(|&a| (0.0..=c).contains(&a)));
        let eq: f64 = s.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(eq.abs() < 1e-6);
    }

    #[test]
    fn single_class_terminates() {
        let x = [[0.0, 0.0], [1.0, 1.0]];
        let s = solve(&linear_gram(&x), &[1.0, 1.0], 1.0, 1e-3, 100);
        assert!(s.converged);
        assert!(s.alpha.iter().all(|&a| a == 0.0));
    }
}
