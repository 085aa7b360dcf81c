//! Gaussian-latent variational autoencoder scored by its negative ELBO.
//!
//! Encoder `D -> H (tanh) -> (mu, log sigma^2)` with latent size `L`,
//! decoder `L -> H (tanh) -> D` (linear output). The per-sample loss is
//! `½‖x − x̂‖² + ½Σ(μ² + σ² − log σ² − 1)`, i.e. unit-variance Gaussian
//! reconstruction (up to constants) plus the closed-form KL to `N(0, I)`.
//! Gradients are derived by hand; training uses Adam on mini-batches and
//! every random draw comes from the seeded generator.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VaeArchitecture {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaeTraining {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

/// Affine layer, weights row-major `n_out x n_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            w: vec![0.0; n_in * n_out],
            b: vec![0.0; n_out],
        }
    }

    fn glorot(n_in: usize, n_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        let mut layer = Self::zeros(n_in, n_out);
        for w in &mut layer.w {
            *w = rng.random_range(-limit..limit);
        }
        layer
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out.iter_mut().zip(self.w.chunks_exact(self.n_in).zip(&self.b)) {
            *o = b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    /// Accumulates `d_out xᵀ` into the weight gradient and returns `Wᵀ d_out` in `d_in`.
    fn backward(&self, x: &[f64], d_out: &[f64], grad: &mut Dense, d_in: Option<&mut [f64]>) {
        for (o, &d) in d_out.iter().enumerate() {
            grad.b[o] += d;
            let row = &mut grad.w[o * self.n_in..(o + 1) * self.n_in];
            for (g, v) in row.iter_mut().zip(x) {
                *g += d * v;
            }
        }
        if let Some(d_in) = d_in {
            d_in.iter_mut().for_each(|v| *v = 0.0);
            for (row, &d) in self.w.chunks_exact(self.n_in).zip(d_out) {
                for (di, w) in d_in.iter_mut().zip(row) {
                    *di += w * d;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeParams {
    pub encoder: Dense,
    pub mu_head: Dense,
    pub logvar_head: Dense,
    pub decoder: Dense,
    pub output: Dense,
}

impl VaeParams {
    pub fn architecture(&self) -> VaeArchitecture {
        VaeArchitecture {
            input_dim: self.encoder.n_in,
            hidden_dim: self.encoder.n_out,
            latent_dim: self.mu_head.n_out,
        }
    }

    pub fn zeros(arch: VaeArchitecture) -> Self {
        let VaeArchitecture {
            input_dim: d,
            hidden_dim: h,
            latent_dim: l,
        } = arch;
        Self {
            encoder: Dense::zeros(d, h),
            mu_head: Dense::zeros(h, l),
            logvar_head: Dense::zeros(h, l),
            decoder: Dense::zeros(l, h),
            output: Dense::zeros(h, d),
        }
    }

    /// Glorot-uniform hidden layers; the output layer starts at zero so an
    /// untrained decoder reconstructs the zero vector.
    pub fn initialise(arch: VaeArchitecture, rng: &mut ChaCha8Rng) -> Self {
        let VaeArchitecture {
            input_dim: d,
            hidden_dim: h,
            latent_dim: l,
        } = arch;
        Self {
            encoder: Dense::glorot(d, h, rng),
            mu_head: Dense::glorot(h, l, rng),
            logvar_head: Dense::glorot(h, l, rng),
            decoder: Dense::glorot(l, h, rng),
            output: Dense::zeros(h, d),
        }
    }

    pub fn layers(&self) -> [&Dense; 5] {
        [&self.encoder, &self.mu_head, &self.logvar_head, &self.decoder, &self.output]
    }

    pub fn layers_mut(&mut self) -> [&mut Dense; 5] {
        [
            &mut self.encoder,
            &mut self.mu_head,
            &mut self.logvar_head,
            &mut self.decoder,
            &mut self.output,
        ]
    }

    /// Every weight and bias buffer, in a fixed order.
    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.layers_mut()
            .into_iter()
            .flat_map(|l| [&mut l.w, &mut l.b])
            .collect()
    }

    pub fn tensors(&self) -> Vec<&Vec<f64>> {
        self.layers().into_iter().flat_map(|l| [&l.w, &l.b]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.architecture();
        let shapes_ok = self.mu_head.n_in == a.hidden_dim
            && self.logvar_head.n_in == a.hidden_dim
            && self.logvar_head.n_out == a.latent_dim
            && self.decoder.n_in == a.latent_dim
            && self.decoder.n_out == a.hidden_dim
            && self.output.n_in == a.hidden_dim
            && self.output.n_out == a.input_dim
            && self
                .layers()
                .iter()
                .all(|l| l.w.len() == l.n_in * l.n_out && l.b.len() == l.n_out);
        if !shapes_ok {
            return Err(Error::ModelFormat("inconsistent VAE layer shapes".into()));
        }
        for t in self.tensors() {
            check_finite(t, || "VAE weights".to_string())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    pub params: VaeParams,
    pub training: VaeTraining,
}

#[derive(Debug, Clone)]
pub struct VaeFit {
    pub model: VaeModel,
    /// Mean per-sample loss for each epoch.
    pub epoch_losses: Vec<f64>,
    /// Batch-mean KL term at every optimiser step.
    pub step_kl: Vec<f64>,
}

/// Per-sample activations kept for the backward pass.
struct Trace {
    h: Vec<f64>,
    mu: Vec<f64>,
    logvar: Vec<f64>,
    z: Vec<f64>,
    g: Vec<f64>,
    x_hat: Vec<f64>,
}

impl Trace {
    fn new(a: VaeArchitecture) -> Self {
        Self {
            h: vec![0.0; a.hidden_dim],
            mu: vec![0.0; a.latent_dim],
            logvar: vec![0.0; a.latent_dim],
            z: vec![0.0; a.latent_dim],
            g: vec![0.0; a.hidden_dim],
            x_hat: vec![0.0; a.input_dim],
        }
    }
}

/// Reconstruction and KL terms for one sample. `eps = None` decodes the
/// encoder mean.
fn forward(p: &VaeParams, x: &[f64], eps: Option<&[f64]>, t: &mut Trace) -> (f64, f64) {
    p.encoder.forward(x, &mut t.h);
    t.h.iter_mut().for_each(|v| *v = v.tanh());
    p.mu_head.forward(&t.h, &mut t.mu);
    p.logvar_head.forward(&t.h, &mut t.logvar);
    match eps {
        Some(e) => {
            for (((z, m), lv), e) in t.z.iter_mut().zip(&t.mu).zip(&t.logvar).zip(e) {
                *z = m + (0.5 * lv).exp() * e;
            }
        }
        None => t.z.copy_from_slice(&t.mu),
    }
    p.decoder.forward(&t.z, &mut t.g);
    t.g.iter_mut().for_each(|v| *v = v.tanh());
    p.output.forward(&t.g, &mut t.x_hat);

    let recon = 0.5 * x.iter().zip(&t.x_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let kl = kl_divergence(&t.mu, &t.logvar);
    (recon, kl)
}

pub fn kl_divergence(mu: &[f64], logvar: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| m * m + lv.exp() - lv - 1.0)
        .sum::<f64>()
}

/// Batch-mean loss, batch-mean KL and the gradient of the loss, with the
/// reparameterisation noise supplied explicitly.
pub fn loss_and_gradient(p: &VaeParams, batch: &[&[f64]], noise: &[Vec<f64>]) -> (f64, f64, VaeParams) {
    let a = p.architecture();
    let mut grad = VaeParams::zeros(a);
    let mut t = Trace::new(a);
    let mut d_xhat = vec![0.0; a.input_dim];
    let mut d_g = vec![0.0; a.hidden_dim];
    let mut d_z = vec![0.0; a.latent_dim];
    let mut d_mu = vec![0.0; a.latent_dim];
    let mut d_lv = vec![0.0; a.latent_dim];
    let mut d_h = vec![0.0; a.hidden_dim];
    let mut d_h2 = vec![0.0; a.hidden_dim];
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut kl_total = 0.0;

    for (x, eps) in batch.iter().zip(noise) {
        let (recon, kl) = forward(p, x, Some(eps), &mut t);
        loss += recon + kl;
        kl_total += kl;

        for ((d, xh), xi) in d_xhat.iter_mut().zip(&t.x_hat).zip(x.iter()) {
            *d = (xh - xi) * scale;
        }
        p.output.backward(&t.g, &d_xhat, &mut grad.output, Some(&mut d_g));
        for (d, g) in d_g.iter_mut().zip(&t.g) {
            *d *= 1.0 - g * g;
        }
        p.decoder.backward(&t.z, &d_g, &mut grad.decoder, Some(&mut d_z));
        for i in 0..a.latent_dim {
            let sigma = (0.5 * t.logvar[i]).exp();
            d_mu[i] = d_z[i] + t.mu[i] * scale;
            d_lv[i] = d_z[i] * eps[i] * 0.5 * sigma + 0.5 * (sigma * sigma - 1.0) * scale;
        }
        p.mu_head.backward(&t.h, &d_mu, &mut grad.mu_head, Some(&mut d_h));
        p.logvar_head.backward(&t.h, &d_lv, &mut grad.logvar_head, Some(&mut d_h2));
        for ((d, d2), h) in d_h.iter_mut().zip(&d_h2).zip(&t.h) {
            *d = (*d + d2) * (1.0 - h * h);
        }
        p.encoder.backward(x, &d_h, &mut grad.encoder, None);
    }
    (loss * scale, kl_total * scale, grad)
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(p: &VaeParams, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = p.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
            lr,
        }
    }

    fn update(&mut self, p: &mut VaeParams, grad: &VaeParams) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        for (((w, g), m), v) in p
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..w.len() {
                m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * g[i];
                v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                w[i] -= self.lr * m_hat / (v_hat.sqrt() + Self::EPS);
            }
        }
    }
}

pub fn fit_vae(
    data: &[Vec<f64>],
    hidden_dim: usize,
    latent_dim: usize,
    training: VaeTraining,
) -> Result<VaeFit> {
    let n = data.len();
    let VaeTraining {
        epochs,
        batch_size,
        learning_rate,
        seed,
    } = training;
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::InvalidConfig(format!("learning_rate must be positive, got {learning_rate}")));
    }
    if batch_size == 0 || n < batch_size {
        return Err(Error::InvalidConfig(format!(
            "VAE needs n >= batch_size >= 1 (n={n}, batch_size={batch_size})"
        )));
    }
    if epochs == 0 || hidden_dim == 0 || latent_dim == 0 {
        return Err(Error::InvalidConfig("epochs, hidden_dim and latent_dim must be positive".into()));
    }
    let d = data[0].len();
    for (i, x) in data.iter().enumerate() {
        check_dim(d, x.len(), || format!("VAE training sample {i}"))?;
        check_finite(x, || format!("VAE training sample {i}"))?;
    }
    let arch = VaeArchitecture {
        input_dim: d,
        hidden_dim,
        latent_dim,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = VaeParams::initialise(arch, &mut rng);
    let mut adam = Adam::new(&params, learning_rate);
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(epochs);
    let mut step_kl = Vec::new();

    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<&[f64]> = chunk.iter().map(|&i| data[i].as_slice()).collect();
            let noise: Vec<Vec<f64>> = chunk
                .iter()
                .map(|_| (0..latent_dim).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            let (loss, kl, grad) = loss_and_gradient(&params, &batch, &noise);
            if !loss.is_finite() {
                return Err(Error::Training(format!("VAE loss became {loss} in epoch {epoch}")));
            }
            total += loss * chunk.len() as f64;
            step_kl.push(kl);
            adam.update(&mut params, &grad);
        }
        epoch_losses.push(total / n as f64);
    }

    Ok(VaeFit {
        model: VaeModel { params, training },
        epoch_losses,
        step_kl,
    })
}

/// Deterministic negative ELBO: reconstruction through the encoder mean
/// plus the KL term.
pub fn vae_score(model: &VaeModel, x: &[f64]) -> Result<f64> {
    let a = model.params.architecture();
    check_dim(a.input_dim, x.len(), || "VAE input".to_string())?;
    let mut t = Trace::new(a);
    let (recon, kl) = forward(&model.params, x, None, &mut t);
    Ok(recon + kl)
}
