//! Row normalization, PCA and per-dimension z-scoring.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{HalluError, Result};

/// How many principal components to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Components {
    Count(usize),
    /// Smallest q whose eigenvalues explain at least this fraction of variance.
    VarianceFraction(f64),
}

impl Default for Components {
    fn default() -> Self {
        Components::VarianceFraction(0.95)
    }
}

/// Relative eigenvalue floor below which a direction counts as rank-deficient.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessPipeline {
    pub input_dim: usize,
    /// Mean of the unit-normalized training rows.
    pub mean: Vec<f64>,
    /// `q` orthonormal columns, each of length `input_dim`.
    pub basis: Vec<Vec<f64>>,
    /// Eigenvalues of the kept columns, nonincreasing.
    pub eigenvalues: Vec<f64>,
    pub explained_fraction: f64,
    pub z_mean: Vec<f64>,
    pub z_std: Vec<f64>,
}

pub fn unit_normalize(row: &[f64]) -> Result<Vec<f64>> {
    let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(HalluError::input("cannot normalize a zero or non-finite row"));
    }
    Ok(row.iter().map(|x| x / norm).collect())
}

impl PreprocessPipeline {
    pub fn fit(rows: &[&[f64]], components: Components) -> Result<Self> {
        let s = rows.len();
        let d = rows.first().map_or(0, |r| r.len());
        if s < 2 || d == 0 {
            return Err(HalluError::input("PCA needs at least two nonempty rows"));
        }
        let normed = rows.iter().map(|r| unit_normalize(r)).collect::<Result<Vec<_>>>()?;
        if normed.iter().any(|r| r.len() != d) {
            return Err(HalluError::input("rows differ in length"));
        }
        let mut mean = vec![0.0; d];
        for r in &normed {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= s as f64);
        let centered = DMatrix::from_fn(s, d, |i, j| normed[i][j] - mean[j]);
        let cov = (centered.transpose() * &centered) / (s as f64 - 1.0);
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let total: f64 = values.iter().sum();
        let top = values[0];
        let rank = values.iter().filter(|v| **v > RANK_TOL * top.max(f64::MIN_POSITIVE)).count();
        if total <= 0.0 || rank == 0 {
            return Err(HalluError::input("training rows have no variance after normalization"));
        }
        let q = match components {
            Components::Count(q) => {
                if q == 0 || q > d.min(s - 1) {
                    return Err(HalluError::input(format!(
                        "q = {q} must lie in 1..={} (min of rows − 1 and dimension)",
                        d.min(s - 1)
                    )));
                }
                q
            }
            Components::VarianceFraction(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(HalluError::input(format!("variance fraction {f} outside (0, 1]")));
                }
                let mut acc = 0.0;
                let mut q = 0;
                for v in &values {
                    acc += v;
                    q += 1;
                    if acc >= f * total * (1.0 - 1e-12) {
                        break;
                    }
                }
                q.min(rank)
            }
        };
        if q > rank {
            return Err(HalluError::input(format!("q = {q} exceeds the achievable rank {rank}")));
        }
        let basis: Vec<Vec<f64>> = order[..q]
            .iter()
            .map(|&c| {
                let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
                // fix the sign so the largest-magnitude entry is positive
                let pivot = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
                if pivot < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
                v
            })
            .collect();
        let mut pipe = Self {
            input_dim: d,
            mean,
            basis,
            eigenvalues: values[..q].to_vec(),
            explained_fraction: values[..q].iter().sum::<f64>() / total,
            z_mean: vec![0.0; q],
            z_std: vec![1.0; q],
        };
        let projected: Vec<Vec<f64>> = normed.iter().map(|r| pipe.project(r)).collect();
        for k in 0..q {
            let col: Vec<f64> = projected.iter().map(|p| p[k]).collect();
            let (m, v) = crate::stats::mean_var(&col);
            if !(v > 0.0) {
                return Err(HalluError::input(format!("component {k} has zero variance")));
            }
            pipe.z_mean[k] = m;
            pipe.z_std[k] = v.sqrt();
        }
        Ok(pipe)
    }

    pub fn output_dim(&self) -> usize {
        self.basis.len()
    }

    fn project(&self, normed: &[f64]) -> Vec<f64> {
        self.basis
            .iter()
            .map(|b| b.iter().zip(normed).zip(&self.mean).map(|((b, x), m)| b * (x - m)).sum())
            .collect()
    }

    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.input_dim {
            return Err(HalluError::input(format!(
                "row has {} values, pipeline expects {}",
                row.len(),
                self.input_dim
            )));
        }
        let normed = unit_normalize(row)?;
        Ok(self
            .project(&normed)
            .iter()
            .zip(self.z_mean.iter().zip(&self.z_std))
            .map(|(p, (m, s))| (p - m) / s)
            .collect())
    }

    pub fn transform_all(&self, rows: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }

    /// Map a standardized vector back to the unit-normalized input space.
    pub fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for ((b, zk), (m, s)) in self.basis.iter().zip(z).zip(self.z_mean.iter().zip(&self.z_std)) {
            let p = zk * s + m;
            for (o, bj) in out.iter_mut().zip(b) {
                *o += p * bj;
            }
        }
        out
    }
}
