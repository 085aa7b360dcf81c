//! Naive reference implementations shared by the integration tests.
//! Each one recomputes its quantity from scratch without reusing library code.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use diffanon::oneclass::vae::VaeParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

/// `(APCER, BPCER)` at `t` by direct counting.
pub fn rates(bp: &[f64], at: &[f64], t: f64) -> (f64, f64) {
    let mut admitted = 0;
    for &s in at {
        if s <= t {
            admitted += 1;
        }
    }
    let mut rejected = 0;
    for &s in bp {
        if s > t {
            rejected += 1;
        }
    }
    (admitted as f64 / at.len() as f64, rejected as f64 / bp.len() as f64)
}

/// Every distinct score plus the two infinite sentinels, ascending.
pub fn thresholds(bp: &[f64], at: &[f64]) -> Vec<f64> {
    let mut t: Vec<f64> = bp.iter().chain(at).copied().collect();
    t.push(f64::NEG_INFINITY);
    t.push(f64::INFINITY);
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    t.dedup();
    t
}

/// `min_t max(APCER, BPCER)` over all candidate thresholds.
pub fn eer_minmax(bp: &[f64], at: &[f64]) -> f64 {
    thresholds(bp, at)
        .into_iter()
        .map(|t| {
            let (a, b) = rates(bp, at, t);
            a.max(b)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Crossing of `APCER − BPCER` found by scanning every candidate threshold
/// and interpolating linearly between the two points that bracket it.
pub fn eer_crossing(bp: &[f64], at: &[f64]) -> f64 {
    let ts = thresholds(bp, at);
    let mut prev: Option<(f64, f64)> = None;
    for t in ts {
        let (a, b) = rates(bp, at, t);
        if a - b >= 0.0 {
            return match prev {
                Some((pa, pb)) if a - b > 0.0 => {
                    let w = (pb - pa) / ((pb - pa) + (a - b));
                    pa + w * (a - pa)
                }
                _ => a,
            };
        }
        prev = Some((a, b));
    }
    unreachable!("APCER reaches 1 and BPCER 0 at +inf")
}

/// Lowest BPCER among thresholds whose APCER does not exceed `target`.
pub fn bpcer_at_apcer(bp: &[f64], at: &[f64], target: f64) -> f64 {
    thresholds(bp, at)
        .into_iter()
        .map(|t| rates(bp, at, t))
        .filter(|(a, _)| *a <= target)
        .map(|(_, b)| b)
        .fold(f64::INFINITY, f64::min)
}

fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    (0..b.len())
        .map(|o| {
            let mut s = b[o];
            for i in 0..n_in {
                s += w[o * n_in + i] * x[i];
            }
            s
        })
        .collect()
}

/// Batch-mean `½‖x − x̂‖² + KL` with fixed reparameterisation noise.
pub fn vae_loss(p: &VaeParams, batch: &[Vec<f64>], noise: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (x, eps) in batch.iter().zip(noise) {
        let h: Vec<f64> = affine(&p.encoder.w, &p.encoder.b, x).into_iter().map(f64::tanh).collect();
        let mu = affine(&p.mu_head.w, &p.mu_head.b, &h);
        let lv = affine(&p.logvar_head.w, &p.logvar_head.b, &h);
        let z: Vec<f64> = (0..mu.len()).map(|i| mu[i] + (0.5 * lv[i]).exp() * eps[i]).collect();
        let g: Vec<f64> = affine(&p.decoder.w, &p.decoder.b, &z).into_iter().map(f64::tanh).collect();
        let xh = affine(&p.output.w, &p.output.b, &g);
        let mut recon = 0.0;
        for i in 0..x.len() {
            recon += 0.5 * (x[i] - xh[i]).powi(2);
        }
        let mut kl = 0.0;
        for i in 0..mu.len() {
            kl += 0.5 * (mu[i] * mu[i] + lv[i].exp() - lv[i] - 1.0);
        }
        total += recon + kl;
    }
    total / batch.len() as f64
}

fn project_capped_simplex(v: &[f64], c: f64) -> Vec<f64> {
    // find tau with sum(clip(v - tau, 0, c)) = 1 by bisection
    let sum_at = |tau: f64| v.iter().map(|x| (x - tau).clamp(0.0, c)).sum::<f64>();
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - c - 1.0;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum_at(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.iter().map(|x| (x - tau).clamp(0.0, c)).collect()
}

/// Minimum of `½ αᵀKα` over `Σα = 1, 0 ≤ α ≤ c` by projected gradient descent.
pub fn qp_projected_gradient(kernel: &[Vec<f64>], c: f64, iterations: usize) -> (f64, Vec<f64>) {
    let n = kernel.len();
    let lipschitz: f64 = kernel
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let mut alpha = project_capped_simplex(&vec![1.0 / n as f64; n], c);
    for _ in 0..iterations {
        let grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| kernel[i][j] * alpha[j]).sum()).collect();
        let moved: Vec<f64> = (0..n).map(|i| alpha[i] - step * grad[i]).collect();
        alpha = project_capped_simplex(&moved, c);
    }
    let mut obj = 0.0;
    for i in 0..n {
        for j in 0..n {
            obj += 0.5 * alpha[i] * kernel[i][j] * alpha[j];
        }
    }
    (obj, alpha)
}

pub fn rbf_matrix(data: &[Vec<f64>], gamma: f64) -> Vec<Vec<f64>> {
    data.iter()
        .map(|a| {
            data.iter()
                .map(|b| {
                    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                    (-gamma * d2).exp()
                })
                .collect()
        })
        .collect()
}

/// Relative path to byte contents for every file under `root`.
pub fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}
