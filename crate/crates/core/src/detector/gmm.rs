//! Gaussian mixture density per class, fitted by EM.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HalluError, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceType {
    #[default]
    Diagonal,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    #[serde(default = "default_k")]
    pub components: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Stop when the relative log-likelihood improvement falls below this.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Added to every variance (diagonal) or to the covariance diagonal (full).
    #[serde(default = "default_reg")]
    pub reg: f64,
    #[serde(default)]
    pub covariance: CovarianceType,
}

fn default_k() -> usize {
    5
}
fn default_max_iter() -> usize {
    200
}
fn default_tol() -> f64 {
    1e-6
}
fn default_reg() -> f64 {
    1e-6
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            components: default_k(),
            max_iter: default_max_iter(),
            tol: default_tol(),
            reg: default_reg(),
            covariance: CovarianceType::Diagonal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ComponentCov {
    Diagonal(Vec<f64>),
    /// Row-major square matrix.
    Full(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: ComponentCov,
}

#[derive(Debug, Clone)]
enum Prepared {
    Diagonal { inv_var: Vec<f64>, log_norm: f64 },
    Full { chol: Cholesky<f64, Dyn>, log_norm: f64 },
}

impl Prepared {
    fn new(c: &GmmComponent) -> Result<Self> {
        let d = c.mean.len() as f64;
        match &c.cov {
            ComponentCov::Diagonal(v) => {
                if v.len() != c.mean.len() || v.iter().any(|x| !(*x > 0.0)) {
                    return Err(HalluError::model("diagonal variances must be positive and match the mean"));
                }
                let log_det: f64 = v.iter().map(|x| x.ln()).sum();
                Ok(Prepared::Diagonal {
                    inv_var: v.iter().map(|x| 1.0 / x).collect(),
                    log_norm: -0.5 * (d * (2.0 * PI).ln() + log_det),
                })
            }
            ComponentCov::Full(rows) => {
                let n = c.mean.len();
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(HalluError::model("covariance shape does not match the mean"));
                }
                let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
                let chol = Cholesky::new(m).ok_or_else(|| HalluError::model("covariance is not positive definite"))?;
                let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>();
                Ok(Prepared::Full { chol, log_norm: -0.5 * (d * (2.0 * PI).ln() + log_det) })
            }
        }
    }

    fn log_pdf(&self, mean: &[f64], x: &[f64]) -> f64 {
        match self {
            Prepared::Diagonal { inv_var, log_norm } => {
                let q: f64 = x.iter().zip(mean).zip(inv_var).map(|((x, m), iv)| (x - m).powi(2) * iv).sum();
                log_norm - 0.5 * q
            }
            Prepared::Full { chol, log_norm } => {
                let diff = DVector::from_iterator(x.len(), x.iter().zip(mean).map(|(x, m)| x - m));
                let y = chol.l_dirty().solve_lower_triangular(&diff).expect("Cholesky factor is nonsingular");
                log_norm - 0.5 * y.norm_squared()
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GmmDoc {
    dim: usize,
    components: Vec<GmmComponent>,
}

/// A fitted mixture; the density model of one class.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GmmDoc", into = "GmmDoc")]
pub struct ClassDensityModel {
    dim: usize,
    components: Vec<GmmComponent>,
    prepared: Vec<Prepared>,
}

impl PartialEq for ClassDensityModel {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.components == other.components
    }
}

impl TryFrom<GmmDoc> for ClassDensityModel {
    type Error = HalluError;
    fn try_from(doc: GmmDoc) -> Result<Self> {
        Self::new(doc.components).and_then(|m| {
            if m.dim != doc.dim {
                Err(HalluError::model("model dimension disagrees with its components"))
            } else {
                Ok(m)
            }
        })
    }
}

impl From<ClassDensityModel> for GmmDoc {
    fn from(m: ClassDensityModel) -> Self {
        GmmDoc { dim: m.dim, components: m.components }
    }
}

impl ClassDensityModel {
    pub fn new(components: Vec<GmmComponent>) -> Result<Self> {
        let dim = components.first().map(|c| c.mean.len()).ok_or_else(|| HalluError::model("mixture has no components"))?;
        if components.iter().any(|c| c.mean.len() != dim) {
            return Err(HalluError::model("components differ in dimension"));
        }
        let weights: Vec<f64> = components.iter().map(|c| c.weight).collect();
        crate::mixture::validate_weights(&weights).map_err(|e| HalluError::model(e.to_string()))?;
        let prepared = components.iter().map(Prepared::new).collect::<Result<_>>()?;
        Ok(Self { dim, components, prepared })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[GmmComponent] {
        &self.components
    }

    fn log_terms(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .zip(&self.prepared)
            .map(|(c, p)| c.weight.ln() + p.log_pdf(&c.mean, x))
            .collect()
    }

    /// Log mixture density, by log-sum-exp.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(HalluError::input(format!("point has {} dims, model has {}", x.len(), self.dim)));
        }
        Ok(log_sum_exp(&self.log_terms(x)))
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    /// Mean per-sample log-likelihood after each E-step.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
    pub reseeds: usize,
}

impl FitTrace {
    /// Largest drop between consecutive iterations (0 when monotone).
    pub fn max_decrease(&self) -> f64 {
        self.log_likelihood.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// k-means++ seeding: first center uniform, later ones drawn ∝ squared distance.
fn seed_centers<R: Rng>(data: &[&[f64]], k: usize, r: &mut R) -> Vec<Vec<f64>> {
    let mut centers = vec![data[r.random_range(0..data.len())].to_vec()];
    let mut d2: Vec<f64> = data.iter().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = r.random::<f64>() * total;
            let mut idx = data.len() - 1;
            for (i, w) in d2.iter().enumerate() {
                if u < *w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        } else {
            r.random_range(0..data.len())
        };
        centers.push(data[pick].to_vec());
        for (d, x) in d2.iter_mut().zip(data) {
            *d = d.min(sq_dist(x, &centers[centers.len() - 1]));
        }
    }
    centers
}

fn nearest(x: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best.0
}

/// Weighted M-step for one component. `resp[i]` is the responsibility of row `i`.
fn m_step(data: &[&[f64]], resp: &[f64], n_k: f64, n: usize, cfg: &GmmConfig) -> GmmComponent {
    let d = data[0].len();
    let mut mean = vec![0.0; d];
    for (x, r) in data.iter().zip(resp) {
        for (m, xi) in mean.iter_mut().zip(x.iter()) {
            *m += r * xi;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n_k);
    let cov = match cfg.covariance {
        CovarianceType::Diagonal => {
            let mut v = vec![0.0; d];
            for (x, r) in data.iter().zip(resp) {
                for ((vj, xj), mj) in v.iter_mut().zip(x.iter()).zip(&mean) {
                    *vj += r * (xj - mj).powi(2);
                }
            }
            ComponentCov::Diagonal(v.iter().map(|s| s / n_k + cfg.reg).collect())
        }
        CovarianceType::Full => {
            let mut c = vec![vec![0.0; d]; d];
            for (x, r) in data.iter().zip(resp) {
                for a in 0..d {
                    let da = x[a] - mean[a];
                    for b in 0..=a {
                        c[a][b] += r * da * (x[b] - mean[b]);
                    }
                }
            }
            for a in 0..d {
                for b in 0..=a {
                    c[a][b] /= n_k;
                    c[b][a] = c[a][b];
                }
                c[a][a] += cfg.reg;
            }
            ComponentCov::Full(c)
        }
    };
    GmmComponent { weight: n_k / n as f64, mean, cov }
}

fn normalize_weights(components: &mut [GmmComponent]) {
    let total: f64 = components.iter().map(|c| c.weight).sum();
    components.iter_mut().for_each(|c| c.weight /= total);
}

const EMPTY_MASS: f64 = 1e-10;

/// Fit a `cfg.components`-term mixture to `data` with EM.
///
/// Starts from k-means++ centers and a hard assignment; an empty component
/// is re-seeded at the worst-fit point once, a second one is an error.
pub fn fit_gmm(data: &[&[f64]], cfg: &GmmConfig, seed: u64) -> Result<(ClassDensityModel, FitTrace)> {
    let k = cfg.components;
    let n = data.len();
    if k == 0 {
        return Err(HalluError::input("need at least one mixture component"));
    }
    if n < k {
        return Err(HalluError::input(format!("{n} samples cannot support {k} components")));
    }
    if !(cfg.reg > 0.0) || !(cfg.tol >= 0.0) {
        return Err(HalluError::input("reg must be positive and tol nonnegative"));
    }
    let d = data[0].len();
    if d == 0 || data.iter().any(|x| x.len() != d || x.iter().any(|v| !v.is_finite())) {
        return Err(HalluError::input("rows must be finite and equally long"));
    }
    let mut r = rng::stream(seed, "detector/gmm/init");
    let mut reseeds = 0;

    let mut centers = seed_centers(data, k, &mut r);
    let mut assign: Vec<usize> = data.iter().map(|x| nearest(x, &centers)).collect();
    loop {
        let counts = (0..k).map(|c| assign.iter().filter(|a| **a == c).count()).collect::<Vec<_>>();
        let Some(empty) = counts.iter().position(|c| *c == 0) else { break };
        if reseeds > 0 {
            return Err(HalluError::Numerical(format!("component {empty} stayed empty after re-seeding")));
        }
        reseeds += 1;
        let far = (0..n)
            .max_by(|&a, &b| sq_dist(data[a], &centers[assign[a]]).total_cmp(&sq_dist(data[b], &centers[assign[b]])))
            .expect("data nonempty");
        centers[empty] = data[far].to_vec();
        assign = data.iter().map(|x| nearest(x, &centers)).collect();
    }
    let mut components: Vec<GmmComponent> = (0..k)
        .map(|c| {
            let resp: Vec<f64> = assign.iter().map(|a| if *a == c { 1.0 } else { 0.0 }).collect();
            let n_k = resp.iter().sum();
            m_step(data, &resp, n_k, n, cfg)
        })
        .collect();

    let mut trace = Vec::new();
    let mut converged = false;
    let model = loop {
        let model = ClassDensityModel::new(components.clone())?;
        let rows: Vec<(f64, Vec<f64>)> = data
            .par_iter()
            .map(|x| {
                let terms = model.log_terms(x);
                let ll = log_sum_exp(&terms);
                (ll, terms.iter().map(|t| (t - ll).exp()).collect())
            })
            .collect();
        let ll = rows.iter().map(|(l, _)| l).sum::<f64>() / n as f64;
        if !ll.is_finite() {
            return Err(HalluError::Numerical("log-likelihood became non-finite".into()));
        }
        if let Some(prev) = trace.last().copied() {
            let prev: f64 = prev;
            if (ll - prev).abs() <= cfg.tol * prev.abs().max(1.0) {
                converged = true;
            }
        }
        trace.push(ll);
        if converged || trace.len() > cfg.max_iter {
            break model;
        }
        let mut next = Vec::with_capacity(k);
        for c in 0..k {
            let resp: Vec<f64> = rows.iter().map(|(_, rs)| rs[c]).collect();
            let n_k: f64 = resp.iter().sum();
            if n_k < EMPTY_MASS * n as f64 {
                if reseeds > 0 {
                    return Err(HalluError::Numerical(format!("component {c} lost all mass twice")));
                }
                reseeds += 1;
                let worst = (0..n).min_by(|&a, &b| rows[a].0.total_cmp(&rows[b].0)).expect("data nonempty");
                let mut comp = m_step(data, &vec![1.0; n], n as f64, n, cfg);
                comp.mean = data[worst].to_vec();
                comp.weight = 1.0 / n as f64;
                next.push(comp);
                continue;
            }
            next.push(m_step(data, &resp, n_k, n, cfg));
        }
        normalize_weights(&mut next);
        components = next;
    };
    Ok((model, FitTrace { log_likelihood: trace, converged, reseeds }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn cluster(center: &[f64], std: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = rng::stream(seed, "cluster");
        (0..n)
            .map(|_| {
                center
                    .iter()
                    .map(|c| {
                        let z: f64 = StandardNormal.sample(&mut r);
                        c + std * z
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn single_component_is_sample_moments() {
        let data = cluster(&[1.0, -2.0], 0.7, 500, 1);
        let refs: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let cfg = GmmConfig { components: 1, ..Default::default() };
        let (m, _) = fit_gmm(&refs, &cfg, 4).unwrap();
        for j in 0..2 {
            let col: Vec<f64> = data.iter().map(|x| x[j]).collect();
            let (mean, var) = crate::stats::mean_var(&col);
            let pop = var * 499.0 / 500.0;
            assert!((m.components[0].mean[j] - mean).abs() < 1e-12);
            let ComponentCov::Diagonal(v) = &m.components[0].cov else { panic!() };
            assert!((v[j] - pop - 1e-6).abs() < 1e-12);
        }
    }

    #[test]
    fn separated_clusters_recovered() {
        let mut data = cluster(&[0.0, 0.0], 0.3, 400, 2);
        data.extend(cluster(&[5.0, 5.0], 0.3, 400, 3));
        let refs: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        for cov in [CovarianceType::Diagonal, CovarianceType::Full] {
            let cfg = GmmConfig { components: 2, covariance: cov, ..Default::default() };
            let (m, trace) = fit_gmm(&refs, &cfg, 11).unwrap();
            let mut means: Vec<Vec<f64>> = m.components.iter().map(|c| c.mean.clone()).collect();
            means.sort_by(|a, b| a[0].total_cmp(&b[0]));
            assert!(means[0].iter().all(|x| x.abs() < 0.1), "{means:?}");
            assert!(means[1].iter().all(|x| (x - 5.0).abs() < 0.1), "{means:?}");
            assert!(trace.max_decrease() <= 1e-9);
        }
    }

    #[test]
    fn log_density_matches_naive_sum() {
        let data = cluster(&[0.0, 1.0, 2.0], 1.0, 300, 5);
        let refs: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let (m, _) = fit_gmm(&refs, &GmmConfig { components: 3, ..Default::default() }, 9).unwrap();
        for x in &data[..20] {
            let naive: f64 = m
                .components
                .iter()
                .map(|c| {
                    let ComponentCov::Diagonal(v) = &c.cov else { panic!() };
                    let mut p = c.weight;
                    for j in 0..3 {
                        p *= (-(x[j] - c.mean[j]).powi(2) / (2.0 * v[j])).exp() / (2.0 * PI * v[j]).sqrt();
                    }
                    p
                })
                .sum();
            assert!((m.log_density(x).unwrap() - naive.ln()).abs() < 1e-9);
        }
        let far = m.log_density(&[1e6, -1e6, 1e6]).unwrap();
        assert!(far.is_finite() && far < -1e6);
        assert!(m.log_density(&[0.0]).is_err());
    }

    #[test]
    fn too_few_samples() {
        let data = [vec![0.0], vec![1.0]];
        let refs: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        assert!(fit_gmm(&refs, &GmmConfig { components: 3, ..Default::default() }, 1).is_err());
    }

    #[test]
    fn json_round_trip() {
        let data = cluster(&[0.0, 0.0], 1.0, 50, 6);
        let refs: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let (m, _) = fit_gmm(&refs, &GmmConfig { components: 2, covariance: CovarianceType::Full, ..Default::default() }, 1).unwrap();
        let back: ClassDensityModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.log_density(&[0.3, 0.1]).unwrap(), m.log_density(&[0.3, 0.1]).unwrap());
    }
}
