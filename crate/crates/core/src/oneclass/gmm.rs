//! Gaussian mixture density fitted by expectation-maximisation.
//!
//! Scores are negative log-densities, so higher means less like the bona
//! fide training population.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 500;
pub const TOLERANCE: f64 = 1e-7;
const EMPTY_MASS: f64 = 1e-12;
const MAX_RESEEDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    Diagonal,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Diagonal(Vec<f64>),
    /// Row-major `d x d` matrix with its lower Cholesky factor.
    Full {
        matrix: Vec<f64>,
        chol: Vec<f64>,
        log_det: f64,
    },
}

impl Covariance {
    pub fn full(matrix: Vec<f64>, d: usize) -> Result<Self> {
        let m = DMatrix::from_row_slice(d, d, &matrix);
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::Degenerate("covariance matrix is not positive definite".into()))?;
        let l = chol.l();
        let mut flat = vec![0.0; d * d];
        let mut log_det = 0.0;
        for i in 0..d {
            for j in 0..=i {
                flat[i * d + j] = l[(i, j)];
            }
            log_det += 2.0 * l[(i, i)].ln();
        }
        Ok(Covariance::Full {
            matrix,
            chol: flat,
            log_det,
        })
    }

    /// Diagonal entries, i.e. per-coordinate variances.
    pub fn variances(&self) -> Vec<f64> {
        match self {
            Covariance::Diagonal(v) => v.clone(),
            Covariance::Full { matrix, .. } => {
                let d = (matrix.len() as f64).sqrt() as usize;
                (0..d).map(|i| matrix[i * d + i]).collect()
            }
        }
    }

    fn log_density(&self, mean: &[f64], x: &[f64]) -> f64 {
        let d = mean.len() as f64;
        match self {
            Covariance::Diagonal(var) => {
                let mut acc = d * (2.0 * PI).ln();
                for ((xi, mi), vi) in x.iter().zip(mean).zip(var) {
                    let r = xi - mi;
                    acc += vi.ln() + r * r / vi;
                }
                -0.5 * acc
            }
            Covariance::Full { chol, log_det, .. } => {
                let n = mean.len();
                let mut y = vec![0.0; n];
                let mut maha = 0.0;
                for i in 0..n {
                    let mut s = x[i] - mean[i];
                    let row = &chol[i * n..i * n + i];
                    for (l, yj) in row.iter().zip(&y) {
                        s -= l * yj;
                    }
                    y[i] = s / chol[i * n + i];
                    maha += y[i] * y[i];
                }
                -0.5 * (d * (2.0 * PI).ln() + log_det + maha)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Covariance>,
}

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub model: GmmModel,
    /// Mean per-sample log-likelihood after every E-step.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
    pub reseeds: usize,
}

impl GmmModel {
    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    fn component_log_probs(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.weights[k].ln() + self.covariances[k].log_density(&self.means[k], x);
        }
    }

    /// `ln sum_k pi_k N(x; mu_k, Sigma_k)` via log-sum-exp.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut lp = vec![0.0; self.n_components()];
        self.component_log_probs(x, &mut lp);
        log_sum_exp(&lp)
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Anomaly score: negative log-density.
pub fn gmm_score(model: &GmmModel, x: &[f64]) -> Result<f64> {
    check_dim(model.dim(), x.len(), || "GMM input".to_string())?;
    Ok(-model.log_density(x))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn global_variance(data: &[Vec<f64>]) -> Vec<f64> {
    let n = data.len() as f64;
    let d = data[0].len();
    let mut mean = vec![0.0; d];
    for x in data {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; d];
    for x in data {
        for j in 0..d {
            let r = x[j] - mean[j];
            var[j] += r * r / n;
        }
    }
    var.iter().map(|v| v.max(VARIANCE_FLOOR)).collect()
}

/// k-means++ style D^2 seeding of the component means.
fn seed_means(data: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut centers = vec![data[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = data.iter().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if target < *w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = data[idx].clone();
        for (dist, x) in d2.iter_mut().zip(data) {
            *dist = dist.min(sq_dist(x, &c));
        }
        centers.push(c);
    }
    centers
}

fn initial_covariance(kind: CovarianceKind, var: &[f64]) -> Result<Covariance> {
    match kind {
        CovarianceKind::Diagonal => Ok(Covariance::Diagonal(var.to_vec())),
        CovarianceKind::Full => {
            let d = var.len();
            let mut m = vec![0.0; d * d];
            for i in 0..d {
                m[i * d + i] = var[i];
            }
            Covariance::full(m, d)
        }
    }
}

/// Covariance maximising the expected complete log-likelihood subject to
/// every eigenvalue (full) or variance (diagonal) staying at or above the floor.
fn floored_full_covariance(scatter: DMatrix<f64>, d: usize) -> Result<Covariance> {
    let eig = SymmetricEigen::new(scatter);
    let clipped = eig.eigenvalues.map(|l| l.max(VARIANCE_FLOOR));
    let m = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let mut flat = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            // symmetrise away rounding drift
            flat[i * d + j] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }
    Covariance::full(flat, d)
}

pub fn fit_gmm(data: &[Vec<f64>], k: usize, kind: CovarianceKind, seed: u64) -> Result<GmmFit> {
    let n = data.len();
    if k == 0 {
        return Err(Error::InvalidConfig("GMM needs at least one component".into()));
    }
    if n < k {
        return Err(Error::InvalidConfig(format!("GMM with K={k} needs n >= K samples, got {n}")));
    }
    let d = data[0].len();
    for (i, x) in data.iter().enumerate() {
        check_dim(d, x.len(), || format!("GMM training sample {i}"))?;
        check_finite(x, || format!("GMM training sample {i}"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let global_var = global_variance(data);
    let cov0 = initial_covariance(kind, &global_var)?;
    let mut model = GmmModel {
        weights: vec![1.0 / k as f64; k],
        means: seed_means(data, k, &mut rng),
        covariances: vec![cov0; k],
    };

    let mut resp = vec![0.0; n * k];
    let mut point_ll = vec![0.0; n];
    let mut trace = Vec::new();
    let mut prev: Option<f64> = None;
    let mut converged = false;
    let mut reseeds = 0;

    for _iter in 0..MAX_ITERATIONS {
        // E-step
        let mut total = 0.0;
        for (i, x) in data.iter().enumerate() {
            let r = &mut resp[i * k..(i + 1) * k];
            model.component_log_probs(x, r);
            let lse = log_sum_exp(r);
            point_ll[i] = lse;
            total += lse;
            r.iter_mut().for_each(|v| *v = (*v - lse).exp());
        }
        let ll = total / n as f64;
        if !ll.is_finite() {
            return Err(Error::Training("GMM log-likelihood became non-finite".into()));
        }
        trace.push(ll);

        let mass: Vec<f64> = (0..k).map(|c| (0..n).map(|i| resp[i * k + c]).sum()).collect();
        if let Some(empty) = mass.iter().position(|&m| m < EMPTY_MASS) {
            reseeds += 1;
            if reseeds > MAX_RESEEDS {
                return Err(Error::Training(format!(
                    "GMM component {empty} stayed empty after {MAX_RESEEDS} re-seeds"
                )));
            }
            let worst = (0..n)
                .min_by(|&a, &b| point_ll[a].total_cmp(&point_ll[b]))
                .expect("non-empty data");
            model.means[empty] = data[worst].clone();
            model.covariances[empty] = initial_covariance(kind, &global_var)?;
            model.weights[empty] = 1.0 / k as f64;
            let wsum: f64 = model.weights.iter().sum();
            model.weights.iter_mut().for_each(|w| *w /= wsum);
            prev = None;
            continue;
        }

        if let Some(p) = prev {
            if ll - p < TOLERANCE {
                converged = true;
                break;
            }
        }
        prev = Some(ll);

        // M-step
        for c in 0..k {
            let nk = mass[c];
            model.weights[c] = nk / n as f64;
            let mut mean = vec![0.0; d];
            for (i, x) in data.iter().enumerate() {
                let r = resp[i * k + c];
                for (m, v) in mean.iter_mut().zip(x) {
                    *m += r * v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= nk);
            model.covariances[c] = match kind {
                CovarianceKind::Diagonal => {
                    let mut var = vec![0.0; d];
                    for (i, x) in data.iter().enumerate() {
                        let r = resp[i * k + c];
                        for j in 0..d {
                            let e = x[j] - mean[j];
                            var[j] += r * e * e;
                        }
                    }
                    Covariance::Diagonal(var.iter().map(|v| (v / nk).max(VARIANCE_FLOOR)).collect())
                }
                CovarianceKind::Full => {
                    let mut s = DMatrix::<f64>::zeros(d, d);
                    for (i, x) in data.iter().enumerate() {
                        let r = resp[i * k + c];
                        let e = nalgebra::DVector::from_fn(d, |j, _| x[j] - mean[j]);
                        s.ger(r, &e, &e, 1.0);
                    }
                    floored_full_covariance(s / nk, d)?
                }
            };
            model.means[c] = mean;
        }
        let wsum: f64 = model.weights.iter().sum();
        model.weights.iter_mut().for_each(|w| *w /= wsum);
    }

    Ok(GmmFit {
        model,
        log_likelihood: trace,
        converged,
        reseeds,
    })
}
