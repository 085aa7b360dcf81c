//! ν-one-class SVM with an RBF kernel.
//!
//! The dual is `min ½ αᵀKα` subject to `Σα = 1`, `0 ≤ α_i ≤ 1/(νn)`,
//! solved by pairwise (SMO) coordinate descent with second-order working
//! set selection. The anomaly score is `ρ − Σ α_i k(x_i, x)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, check_finite, Error, Result};

pub const KKT_TOLERANCE: f64 = 1e-4;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub rho: f64,
    pub gamma: f64,
    pub nu: f64,
    /// Training-set size, which fixes the box bound `1/(νn)`.
    pub n_train: usize,
}

#[derive(Debug, Clone)]
pub struct SvmFit {
    pub model: SvmModel,
    /// Dense dual solution over all training points.
    pub dual: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Final `max G(I_low) − min G(I_up)` gap.
    pub kkt_gap: f64,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    pub fn upper_bound(&self) -> f64 {
        1.0 / (self.nu * self.n_train as f64)
    }

    /// `Σ α_i k(x_i, x)`
    pub fn kernel_sum(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.alphas)
            .map(|(sv, a)| a * rbf(self.gamma, sv, x))
            .sum()
    }
}

pub fn rbf(gamma: f64, u: &[f64], v: &[f64]) -> f64 {
    let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

pub fn ocsvm_score(model: &SvmModel, x: &[f64]) -> Result<f64> {
    check_dim(model.dim(), x.len(), || "one-class SVM input".to_string())?;
    Ok(model.rho - model.kernel_sum(x))
}

pub fn fit_ocsvm(data: &[Vec<f64>], nu: f64, gamma: f64, seed: u64) -> Result<SvmFit> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!("one-class SVM needs n >= 2 samples, got {n}")));
    }
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::InvalidConfig(format!("nu must lie in (0, 1], got {nu}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidConfig(format!("gamma must be positive, got {gamma}")));
    }
    let d = data[0].len();
    for (i, x) in data.iter().enumerate() {
        check_dim(d, x.len(), || format!("SVM training sample {i}"))?;
        check_finite(x, || format!("SVM training sample {i}"))?;
    }

    let c = 1.0 / (nu * n as f64);
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        kernel[i * n + i] = 1.0;
        for j in 0..i {
            let k = rbf(gamma, &data[i], &data[j]);
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
        }
    }

    // feasible start: fill the box greedily in a seeded order
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut alpha = vec![0.0; n];
    let mut remaining = 1.0;
    for &i in &order {
        if remaining <= 0.0 {
            break;
        }
        let a = c.min(remaining);
        alpha[i] = a;
        remaining -= a;
    }

    let mut grad = vec![0.0; n];
    for (i, &a) in alpha.iter().enumerate() {
        if a != 0.0 {
            for (g, k) in grad.iter_mut().zip(&kernel[i * n..(i + 1) * n]) {
                *g += a * k;
            }
        }
    }

    let max_iter = (100 * n).max(1_000_000);
    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    while iterations < max_iter {
        // i: most negative gradient among variables that can still grow
        let mut up = None;
        let mut g_min = f64::INFINITY;
        let mut g_max = f64::NEG_INFINITY;
        for t in 0..n {
            if alpha[t] < c && grad[t] < g_min {
                g_min = grad[t];
                up = Some(t);
            }
            if alpha[t] > 0.0 && grad[t] > g_max {
                g_max = grad[t];
            }
        }
        gap = g_max - g_min;
        let Some(i) = up else { break };
        if gap < KKT_TOLERANCE {
            break;
        }

        let ki = &kernel[i * n..(i + 1) * n];
        let mut down = None;
        let mut best = f64::NEG_INFINITY;
        for t in 0..n {
            if alpha[t] > 0.0 && grad[t] > g_min {
                let b = grad[t] - g_min;
                let eta = (ki[i] + kernel[t * n + t] - 2.0 * ki[t]).max(TAU);
                let gain = b * b / eta;
                if gain > best {
                    best = gain;
                    down = Some(t);
                }
            }
        }
        let Some(j) = down else { break };

        let eta = (ki[i] + kernel[j * n + j] - 2.0 * ki[j]).max(TAU);
        let room_i = c - alpha[i];
        let room_j = alpha[j];
        let step = ((grad[j] - grad[i]) / eta).min(room_i).min(room_j);
        alpha[i] = if step == room_i { c } else { (alpha[i] + step).min(c) };
        alpha[j] = if step == room_j { 0.0 } else { (alpha[j] - step).max(0.0) };

        let kj = &kernel[j * n..(j + 1) * n];
        for ((g, a), b) in grad.iter_mut().zip(ki).zip(kj) {
            *g += step * (a - b);
        }
        iterations += 1;
    }

    let rho = solve_rho(&alpha, &grad, c);
    let objective = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * g).sum::<f64>();

    let (support_vectors, alphas): (Vec<Vec<f64>>, Vec<f64>) = data
        .iter()
        .zip(&alpha)
        .filter(|(_, &a)| a > 0.0)
        .map(|(x, &a)| (x.clone(), a))
        .unzip();

    Ok(SvmFit {
        model: SvmModel {
            support_vectors,
            alphas,
            rho,
            gamma,
            nu,
            n_train: n,
        },
        dual: alpha,
        objective,
        iterations,
        kkt_gap: gap,
    })
}

/// Offset from the KKT conditions: the mean decision value over free
/// support vectors; with none free, the midpoint of the feasible interval
/// (or its finite end when every α sits at the upper bound).
fn solve_rho(alpha: &[f64], grad: &[f64], c: f64) -> f64 {
    let mut free_sum = 0.0;
    let mut free_n = 0usize;
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for (&a, &g) in alpha.iter().zip(grad) {
        if a >= c {
            lower = lower.max(g);
        } else if a <= 0.0 {
            upper = upper.min(g);
        } else {
            free_sum += g;
            free_n += 1;
        }
    }
    if free_n > 0 {
        free_sum / free_n as f64
    } else if upper.is_finite() && lower.is_finite() {
        0.5 * (lower + upper)
    } else if lower.is_finite() {
        lower
    } else {
        upper
    }
}
