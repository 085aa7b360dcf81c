use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{check_dim, Error, Result};

/// Mean vector plus orthonormal principal directions (one per row).
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    /// Sample variance along each component, descending.
    pub eigenvalues: Vec<f64>,
}

impl PcaBasis {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), x.len(), || "PCA input".to_string())?;
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(&centered).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, &w) in self.components.iter().zip(z) {
            for (o, v) in out.iter_mut().zip(c) {
                *o += w * v;
            }
        }
        out
    }
}

pub fn fit_pca(data: &[Vec<f64>], target_dim: usize) -> Result<PcaBasis> {
    let n = data.len();
    if n == 0 {
        return Err(Error::InvalidConfig("PCA needs at least one sample".into()));
    }
    let d = data[0].len();
    for row in data {
        check_dim(d, row.len(), || "PCA training data".to_string())?;
    }
    if target_dim > d.min(n) {
        return Err(Error::InvalidConfig(format!(
            "PCA target dimension {target_dim} exceeds min(D={d}, n={n})"
        )));
    }

    let mut mean = vec![0.0; d];
    for row in data {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, d, |i, j| data[i][j] - mean[j]);
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let cov = (centered.transpose() * &centered) / denom;
    if target_dim > 0 && cov.trace() <= 0.0 {
        return Err(Error::Degenerate(
            "zero variance: all PCA training points are identical".into(),
        ));
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut components = Vec::with_capacity(target_dim);
    let mut eigenvalues = Vec::with_capacity(target_dim);
    for &idx in order.iter().take(target_dim) {
        let mut c: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        if let Some(first) = c.iter().find(|v| v.abs() > 1e-12) {
            if *first < 0.0 {
                c.iter_mut().for_each(|v| *v = -*v);
            }
        }
        components.push(c);
        eigenvalues.push(eig.eigenvalues[idx].max(0.0));
    }
    Ok(PcaBasis {
        mean,
        components,
        eigenvalues,
    })
}
