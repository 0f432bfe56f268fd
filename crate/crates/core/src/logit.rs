//! L2-regularized binary logistic regression over sparse rows, trained by
//! full-batch gradient descent. Shared by the Q/A classifier and the
//! party-model logistic baseline.
//!
//! Objective: `mean_i softplus(z_i) - y_i z_i + (l2 / 2) |w|^2` with
//! `z_i = w . x_i + b`; the bias is not regularized.
//!
//! The gradient is Lipschitz with constant at most
//! `L = 0.25 * max_i (|x_i|^2 + 1) + l2`, so any learning rate up to
//! `1 / L` ([`BinaryProblem::stable_learning_rate`]) makes the objective
//! non-increasing from one epoch to the next.

use rand::Rng;

use crate::rng::rng_from_seed;

pub type SparseRow = Vec<(usize, f64)>;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn dot(w: &[f64], row: &[(usize, f64)]) -> f64 {
    row.iter().map(|&(j, v)| w[j] * v).sum()
}

#[derive(Debug, Clone, Copy)]
pub struct BinaryProblem<'a> {
    pub rows: &'a [SparseRow],
    /// 1.0 for the positive class, 0.0 otherwise.
    pub targets: &'a [f64],
    pub dim: usize,
    pub l2: f64,
}

impl BinaryProblem<'_> {
    pub fn objective(&self, w: &[f64], b: f64) -> f64 {
        let n = self.rows.len().max(1) as f64;
        let data: f64 = self
            .rows
            .iter()
            .zip(self.targets)
            .map(|(x, &y)| {
                let z = dot(w, x) + b;
                softplus(z) - y * z
            })
            .sum();
        data / n + 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn gradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let n = self.rows.len().max(1) as f64;
        let mut gw = vec![0.0; self.dim];
        let mut gb = 0.0;
        for (x, &y) in self.rows.iter().zip(self.targets) {
            let r = sigmoid(dot(w, x) + b) - y;
            for &(j, v) in x {
                gw[j] += r * v;
            }
            gb += r;
        }
        for (g, wj) in gw.iter_mut().zip(w) {
            *g = *g / n + self.l2 * wj;
        }
        (gw, gb / n)
    }

    pub fn lipschitz_bound(&self) -> f64 {
        let max_sq = self
            .rows
            .iter()
            .map(|x| x.iter().map(|(_, v)| v * v).sum::<f64>())
            .fold(0.0, f64::max);
        0.25 * (max_sq + 1.0) + self.l2
    }

    /// Largest learning rate with a guaranteed monotone objective.
    pub fn stable_learning_rate(&self) -> f64 {
        1.0 / self.lipschitz_bound()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Stop once the largest gradient component falls below this.
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdOutcome {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Objective before the first step and after every epoch.
    pub loss_history: Vec<f64>,
    pub epochs_run: usize,
}

/// Small uniform initial weights in `[-1e-3, 1e-3)` drawn from `seed`.
pub fn initial_weights(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..dim).map(|_| rng.gen_range(-1e-3..1e-3)).collect()
}

pub fn gradient_descent(problem: &BinaryProblem<'_>, w0: Vec<f64>, b0: f64, cfg: GdConfig) -> GdOutcome {
    let mut w = w0;
    let mut b = b0;
    let mut history = vec![problem.objective(&w, b)];
    let mut epochs_run = 0;
    for _ in 0..cfg.max_epochs {
        let (gw, gb) = problem.gradient(&w, b);
        let gmax = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if gmax < cfg.tol {
            break;
        }
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= cfg.learning_rate * g;
        }
        b -= cfg.learning_rate * gb;
        history.push(problem.objective(&w, b));
        epochs_run += 1;
    }
    GdOutcome {
        weights: w,
        bias: b,
        loss_history: history,
        epochs_run,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<SparseRow>, Vec<f64>) {
        let rows = vec![
            vec![(0, 1.0), (2, 0.5)],
            vec![(1, 1.0)],
            vec![(0, 0.3), (1, 0.7)],
            vec![(2, -1.0)],
        ];
        (rows, vec![1.0, 0.0, 1.0, 0.0])
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (rows, y) = toy();
        let p = BinaryProblem {
            rows: &rows,
            targets: &y,
            dim: 3,
            l2: 0.1,
        };
        let w = vec![0.2, -0.4, 0.7];
        let b = 0.1;
        let (g, gb) = p.gradient(&w, b);
        let h = 1e-6;
        for j in 0..3 {
            let mut wp = w.clone();
            wp[j] += h;
            let mut wm = w.clone();
            wm[j] -= h;
            let fd = (p.objective(&wp, b) - p.objective(&wm, b)) / (2.0 * h);
            assert!((fd - g[j]).abs() / fd.abs().max(1e-8) < 1e-6, "coord {j}");
        }
        let fd = (p.objective(&w, b + h) - p.objective(&w, b - h)) / (2.0 * h);
        assert!((fd - gb).abs() < 1e-8);
    }

    #[test]
    fn descent_is_monotone_at_stable_rate() {
        let (rows, y) = toy();
        let p = BinaryProblem {
            rows: &rows,
            targets: &y,
            dim: 3,
            l2: 0.01,
        };
        let out = gradient_descent(
            &p,
            initial_weights(3, 1),
            0.0,
            GdConfig {
                learning_rate: p.stable_learning_rate(),
                max_epochs: 500,
                tol: 0.0,
            },
        );
        for pair in out.loss_history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-15);
        }
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
    }
}
