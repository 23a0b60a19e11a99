//! Latent-variable Gaussian mixtures: densities, the quadratic-loss optimal
//! estimator and its loss, plus the categorical (cross-entropy) analogue.
//!
//! A [`LatentMixture`] holds one Gaussian conditional law per latent state and
//! the state probabilities. All values are immutable once constructed.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{HalluError, Result};

/// Smallest admissible variance / eigenvalue.
pub const MIN_VARIANCE: f64 = 1e-12;

/// Tolerance on probability vectors summing to one.
pub const SIMPLEX_TOL: f64 = 1e-9;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Isotropic(f64),
    Diagonal(Vec<f64>),
    Full(DMatrix<f64>),
}

/// Multivariate normal `N(mean, cov)`.
#[derive(Debug, Clone)]
pub struct GaussianComponent {
    mean: Vec<f64>,
    cov: Covariance,
    log_det: f64,
    // lower Cholesky factor, only for full covariances
    chol: Option<DMatrix<f64>>,
    max_eig: f64,
}

impl PartialEq for GaussianComponent {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.cov == other.cov
    }
}

impl GaussianComponent {
    pub fn new(mean: Vec<f64>, cov: Covariance) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(HalluError::input("component mean must be nonempty"));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(HalluError::input("component mean has non-finite entries"));
        }
        let (log_det, chol, max_eig) = match &cov {
            Covariance::Isotropic(v) => {
                if !(v.is_finite() && *v >= MIN_VARIANCE) {
                    return Err(HalluError::model(format!("isotropic variance {v} is not positive")));
                }
                (d as f64 * v.ln(), None, *v)
            }
            Covariance::Diagonal(diag) => {
                if diag.len() != d {
                    return Err(HalluError::input(format!(
                        "diagonal covariance has length {} but mean has length {d}",
                        diag.len()
                    )));
                }
                if let Some(v) = diag.iter().find(|v| !(v.is_finite() && **v >= MIN_VARIANCE)) {
                    return Err(HalluError::model(format!("diagonal variance {v} is not positive")));
                }
                let max = diag.iter().cloned().fold(f64::MIN, f64::max);
                (diag.iter().map(|v| v.ln()).sum(), None, max)
            }
            Covariance::Full(m) => {
                if m.nrows() != d || m.ncols() != d {
                    return Err(HalluError::input(format!(
                        "full covariance is {}x{} but mean has length {d}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                for i in 0..d {
                    for j in 0..i {
                        let (a, b) = (m[(i, j)], m[(j, i)]);
                        if (a - b).abs() > 1e-10 * a.abs().max(b.abs()).max(1.0) {
                            return Err(HalluError::model("full covariance is not symmetric"));
                        }
                    }
                }
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(HalluError::model("full covariance has non-finite entries"));
                }
                let eig = SymmetricEigen::new(m.clone());
                let min = eig.eigenvalues.min();
                if min < MIN_VARIANCE {
                    return Err(HalluError::model(format!(
                        "full covariance is not positive definite (min eigenvalue {min:e})"
                    )));
                }
                let chol = m
                    .clone()
                    .cholesky()
                    .ok_or_else(|| HalluError::model("Cholesky factorization failed"))?;
                let l = chol.l();
                let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
                (log_det, Some(l), eig.eigenvalues.max())
            }
        };
        Ok(Self { mean, cov, log_det, chol, max_eig })
    }

    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        Self::new(mean, Covariance::Isotropic(variance))
    }

    pub fn diagonal(mean: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        Self::new(mean, Covariance::Diagonal(variances))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &Covariance {
        &self.cov
    }

    /// `ln det(Σ)`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn trace(&self) -> f64 {
        match &self.cov {
            Covariance::Isotropic(v) => v * self.dim() as f64,
            Covariance::Diagonal(d) => d.iter().sum(),
            Covariance::Full(m) => m.trace(),
        }
    }

    /// Largest eigenvalue of the covariance.
    pub fn max_eigenvalue(&self) -> f64 {
        self.max_eig
    }

    /// Marginal standard deviation along `axis`.
    pub fn axis_std(&self, axis: usize) -> f64 {
        match &self.cov {
            Covariance::Isotropic(v) => v.sqrt(),
            Covariance::Diagonal(d) => d[axis].sqrt(),
            Covariance::Full(m) => m[(axis, axis)].sqrt(),
        }
    }

    /// Dense covariance matrix.
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        match &self.cov {
            Covariance::Isotropic(v) => DMatrix::identity(d, d) * *v,
            Covariance::Diagonal(diag) => DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
            Covariance::Full(m) => m.clone(),
        }
    }

    /// `vᵀ Σ⁻¹ v`.
    pub fn inverse_quadratic_form(&self, v: &[f64]) -> f64 {
        match &self.cov {
            Covariance::Isotropic(var) => v.iter().map(|x| x * x).sum::<f64>() / var,
            Covariance::Diagonal(diag) => v.iter().zip(diag).map(|(x, s)| x * x / s).sum(),
            Covariance::Full(_) => {
                let l = self.chol.as_ref().expect("full covariance carries its factor");
                let y = l
                    .solve_lower_triangular(&DVector::from_column_slice(v))
                    .expect("Cholesky factor is nonsingular");
                y.norm_squared()
            }
        }
    }

    pub(crate) fn mahalanobis_sq(&self, point: &[f64]) -> f64 {
        let diff: Vec<f64> = point.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        self.inverse_quadratic_form(&diff)
    }

    /// `ln` of the density at the mean.
    pub fn log_peak_density(&self) -> f64 {
        -0.5 * (self.dim() as f64 * LN_2PI + self.log_det)
    }

    /// Density at the mean: `(2π)^{-d/2} det(Σ)^{-1/2}`.
    pub fn peak_density(&self) -> f64 {
        self.log_peak_density().exp()
    }

    fn check_dim(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(HalluError::input(format!(
                "point has dimension {} but component has dimension {}",
                point.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn log_density(&self, point: &[f64]) -> Result<f64> {
        self.check_dim(point)?;
        Ok(self.log_peak_density() - 0.5 * self.mahalanobis_sq(point))
    }

    pub fn density(&self, point: &[f64]) -> Result<f64> {
        self.log_density(point).map(f64::exp)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim()).map(|_| StandardNormal.sample(rng)).collect();
        match &self.cov {
            Covariance::Isotropic(v) => {
                let s = v.sqrt();
                self.mean.iter().zip(&z).map(|(m, z)| m + s * z).collect()
            }
            Covariance::Diagonal(diag) => self
                .mean
                .iter()
                .zip(&z)
                .zip(diag)
                .map(|((m, z), v)| m + v.sqrt() * z)
                .collect(),
            Covariance::Full(_) => {
                let l = self.chol.as_ref().expect("full covariance carries its factor");
                let lz = l * DVector::from_vec(z);
                self.mean.iter().zip(lz.iter()).map(|(m, v)| m + v).collect()
            }
        }
    }
}

/// Weighted collection of Gaussian conditional laws, one per latent state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureDoc", into = "MixtureDoc")]
pub struct LatentMixture {
    components: Vec<GaussianComponent>,
    weights: Vec<f64>,
}

pub(crate) fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(HalluError::input("weights must be nonempty"));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(HalluError::input(format!("weight {w} is negative or non-finite")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(HalluError::input(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

impl LatentMixture {
    pub fn new(components: Vec<GaussianComponent>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(HalluError::input("mixture needs at least one component"));
        }
        if components.len() != weights.len() {
            return Err(HalluError::input(format!(
                "{} components but {} weights",
                components.len(),
                weights.len()
            )));
        }
        validate_weights(&weights)?;
        let d = components[0].dim();
        if components.iter().any(|c| c.dim() != d) {
            return Err(HalluError::input("components have differing dimensions"));
        }
        Ok(Self { components, weights })
    }

    /// Single-state mixture.
    pub fn single(component: GaussianComponent) -> Self {
        Self { components: vec![component], weights: vec![1.0] }
    }

    pub fn n_states(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn component(&self, i: usize) -> Result<&GaussianComponent> {
        self.components
            .get(i)
            .ok_or_else(|| HalluError::input(format!("state {i} out of range (N = {})", self.n_states())))
    }

    /// Conditional density of state `i` at `point`.
    pub fn component_density(&self, i: usize, point: &[f64]) -> Result<f64> {
        self.component(i)?.density(point)
    }

    /// Conditional densities of every state at `point`.
    pub fn component_densities(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.density(point)).collect()
    }

    /// Marginal density `Σ_i p_i f_i(point)`.
    pub fn density(&self, point: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (c, w) in self.components.iter().zip(&self.weights) {
            total += w * c.density(point)?;
        }
        Ok(total)
    }

    /// Minimizer of the expected quadratic loss: the mixture mean `Σ_i p_i μ_i`.
    pub fn bayes_estimator(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (c, w) in self.components.iter().zip(&self.weights) {
            for (o, m) in out.iter_mut().zip(c.mean()) {
                *o += w * m;
            }
        }
        out
    }

    /// Expected squared error `E‖estimate − A‖²`, in closed form
    /// `Σ_i p_i (‖estimate − μ_i‖² + tr Σ_i)`.
    pub fn quadratic_loss(&self, estimate: &[f64]) -> Result<f64> {
        if estimate.len() != self.dim() {
            return Err(HalluError::input(format!(
                "estimate has dimension {} but mixture has dimension {}",
                estimate.len(),
                self.dim()
            )));
        }
        Ok(self
            .components
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| {
                let bias: f64 = estimate.iter().zip(c.mean()).map(|(e, m)| (e - m).powi(2)).sum();
                w * (bias + c.trace())
            })
            .sum())
    }

    /// Two-stage draw: latent state by weight, then that state's Gaussian.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, Vec<f64>) {
        let state = if self.n_states() == 1 {
            0
        } else {
            WeightedIndex::new(&self.weights).expect("weights validated").sample(rng)
        };
        (state, self.components[state].sample(rng))
    }

    /// Read a mixture from its JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum CovDoc {
    #[serde(rename = "iso")]
    Iso(f64),
    #[serde(rename = "diag")]
    Diag(Vec<f64>),
    #[serde(rename = "full")]
    Full(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDoc {
    pub mean: Vec<f64>,
    pub cov: CovDoc,
}

/// Wire form of a [`LatentMixture`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureDoc {
    #[serde(default = "crate::report::schema_v1")]
    pub schema: String,
    pub weights: Vec<f64>,
    pub components: Vec<ComponentDoc>,
}

impl TryFrom<ComponentDoc> for GaussianComponent {
    type Error = HalluError;

    fn try_from(doc: ComponentDoc) -> Result<Self> {
        let cov = match doc.cov {
            CovDoc::Iso(v) => Covariance::Isotropic(v),
            CovDoc::Diag(v) => Covariance::Diagonal(v),
            CovDoc::Full(rows) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(HalluError::input("full covariance must be square"));
                }
                Covariance::Full(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
        };
        GaussianComponent::new(doc.mean, cov)
    }
}

impl From<&GaussianComponent> for ComponentDoc {
    fn from(c: &GaussianComponent) -> Self {
        let cov = match &c.cov {
            Covariance::Isotropic(v) => CovDoc::Iso(*v),
            Covariance::Diagonal(d) => CovDoc::Diag(d.clone()),
            Covariance::Full(m) => {
                CovDoc::Full((0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect())
            }
        };
        ComponentDoc { mean: c.mean.clone(), cov }
    }
}

impl TryFrom<MixtureDoc> for LatentMixture {
    type Error = HalluError;

    fn try_from(doc: MixtureDoc) -> Result<Self> {
        let components = doc
            .components
            .into_iter()
            .map(GaussianComponent::try_from)
            .collect::<Result<Vec<_>>>()?;
        LatentMixture::new(components, doc.weights)
    }
}

impl From<LatentMixture> for MixtureDoc {
    fn from(m: LatentMixture) -> Self {
        MixtureDoc {
            schema: crate::report::schema_v1(),
            weights: m.weights.clone(),
            components: m.components.iter().map(ComponentDoc::from).collect(),
        }
    }
}

/// Probability vector over `C` classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexVector(Vec<f64>);

impl TryFrom<Vec<f64>> for SimplexVector {
    type Error = HalluError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        SimplexVector::new(v)
    }
}

impl From<SimplexVector> for Vec<f64> {
    fn from(s: SimplexVector) -> Self {
        s.0
    }
}

impl SimplexVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        validate_weights(&entries)?;
        Ok(Self(entries))
    }

    pub fn one_hot(classes: usize, index: usize) -> Result<Self> {
        if index >= classes {
            return Err(HalluError::input(format!("class {index} out of range (C = {classes})")));
        }
        let mut v = vec![0.0; classes];
        v[index] = 1.0;
        Ok(Self(v))
    }

    pub fn uniform(classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(HalluError::input("simplex needs at least one class"));
        }
        Ok(Self(vec![1.0 / classes as f64; classes]))
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `−Σ_t target(t) ln predicted(t)`, with `0 · ln 0 = 0`.
pub fn cross_entropy(target: &SimplexVector, predicted: &SimplexVector) -> f64 {
    target
        .0
        .iter()
        .zip(&predicted.0)
        .filter(|(q, _)| **q > 0.0)
        .map(|(q, p)| -q * p.ln())
        .sum()
}

fn check_targets(targets: &[(f64, SimplexVector)]) -> Result<(usize, f64)> {
    let Some((_, first)) = targets.first() else {
        return Err(HalluError::input("target set is empty"));
    };
    let c = first.len();
    if targets.iter().any(|(_, t)| t.len() != c) {
        return Err(HalluError::input("targets have differing class counts"));
    }
    if targets.iter().any(|(w, _)| !(w.is_finite() && *w >= 0.0)) {
        return Err(HalluError::input("target weights must be nonnegative"));
    }
    let total: f64 = targets.iter().map(|(w, _)| w).sum();
    if total <= 0.0 {
        return Err(HalluError::input("target weights sum to zero"));
    }
    Ok((c, total))
}

/// Expected cross-entropy of `candidate` over a weighted target sample.
pub fn expected_cross_entropy(targets: &[(f64, SimplexVector)], candidate: &SimplexVector) -> Result<f64> {
    let (c, total) = check_targets(targets)?;
    if candidate.len() != c {
        return Err(HalluError::input("candidate class count differs from targets"));
    }
    Ok(targets.iter().map(|(w, t)| w * cross_entropy(t, candidate)).sum::<f64>() / total)
}

/// Minimizer of expected cross-entropy: the entrywise mean of the targets.
/// Weights are normalized internally.
pub fn cross_entropy_optimal(targets: &[(f64, SimplexVector)]) -> Result<SimplexVector> {
    let (c, total) = check_targets(targets)?;
    let mut out = vec![0.0; c];
    for (w, t) in targets {
        for (o, q) in out.iter_mut().zip(&t.0) {
            *o += w / total * q;
        }
    }
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= s);
    Ok(SimplexVector(out))
}

/// Univariate normal density, used where a scalar Gaussian is all that is needed.
pub fn normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * variance)).exp() / (2.0 * PI * variance).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            let x = a + k as f64 * h;
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn standard_normal_at_zero() {
        let c = GaussianComponent::isotropic(vec![0.0], 1.0).unwrap();
        let v = c.density(&[0.0]).unwrap();
        assert!((v - 0.398_942_3).abs() < 1e-6);
        // quadrature oracle: integrates to one
        let mass = simpson(|x| c.density(&[x]).unwrap(), -10.0, 10.0, 2000);
        assert!((mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_d_identity_at_zero() {
        let c = GaussianComponent::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        assert!((c.density(&[0.0, 0.0]).unwrap() - 0.159_154_9).abs() < 1e-6);
        let mass = simpson(
            |x| simpson(|y| c.density(&[x, y]).unwrap(), -9.0, 9.0, 400),
            -9.0,
            9.0,
            400,
        );
        assert!((mass - 1.0).abs() < 1e-7);
    }

    #[test]
    fn density_at_mean_is_peak() {
        let full = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let c = GaussianComponent::new(vec![1.0, -1.0], Covariance::Full(full.clone())).unwrap();
        let expect = (2.0 * PI).powi(-1) * full.determinant().powf(-0.5);
        assert!((c.density(&[1.0, -1.0]).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn full_matches_diagonal() {
        let d = GaussianComponent::diagonal(vec![0.5, 1.0], vec![2.0, 0.5]).unwrap();
        let f = GaussianComponent::new(
            vec![0.5, 1.0],
            Covariance::Full(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5])),
        )
        .unwrap();
        for p in [[0.0, 0.0], [1.3, -2.0], [4.0, 1.0]] {
            assert!((d.log_density(&p).unwrap() - f.log_density(&p).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_covariances() {
        assert!(matches!(
            GaussianComponent::isotropic(vec![0.0], 0.0),
            Err(HalluError::Model(_))
        ));
        assert!(matches!(
            GaussianComponent::diagonal(vec![0.0, 0.0], vec![1.0, 1e-13]),
            Err(HalluError::Model(_))
        ));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            GaussianComponent::new(vec![0.0, 0.0], Covariance::Full(indefinite)),
            Err(HalluError::Model(_))
        ));
        assert!(matches!(
            GaussianComponent::diagonal(vec![0.0, 0.0], vec![1.0]),
            Err(HalluError::Input(_))
        ));
    }

    #[test]
    fn dimension_mismatch_is_input_error() {
        let c = GaussianComponent::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        assert!(matches!(c.density(&[0.0]), Err(HalluError::Input(_))));
    }

    #[test]
    fn mixture_of_two_at_origin() {
        let m = LatentMixture::new(
            vec![
                GaussianComponent::isotropic(vec![-2.0], 1.0).unwrap(),
                GaussianComponent::isotropic(vec![2.0], 1.0).unwrap(),
            ],
            vec![0.5, 0.5],
        )
        .unwrap();
        let expect = normal_pdf(2.0, 0.0, 1.0);
        assert!((m.density(&[0.0]).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 0.053_991_0).abs() < 1e-6);
        assert_eq!(m.bayes_estimator(), vec![0.0]);
    }

    #[test]
    fn weighted_mixture_is_direct_sum() {
        let m = LatentMixture::new(
            vec![
                GaussianComponent::isotropic(vec![0.0], 1.0).unwrap(),
                GaussianComponent::isotropic(vec![10.0], 1.0).unwrap(),
            ],
            vec![0.3, 0.7],
        )
        .unwrap();
        assert!((m.bayes_estimator()[0] - 7.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let x: f64 = rng.random_range(-3.0..13.0);
            let direct = 0.3 * normal_pdf(x, 0.0, 1.0) + 0.7 * normal_pdf(x, 10.0, 1.0);
            assert!((m.density(&[x]).unwrap() - direct).abs() <= 1e-12 * direct.max(1e-300));
        }
    }

    #[test]
    fn weights_validated() {
        let c = GaussianComponent::isotropic(vec![0.0], 1.0).unwrap();
        assert!(LatentMixture::new(vec![c.clone(), c.clone()], vec![0.5, 0.6]).is_err());
        assert!(LatentMixture::new(vec![c.clone(), c.clone()], vec![1.5, -0.5]).is_err());
        assert!(LatentMixture::new(vec![], vec![]).is_err());
        let c2 = GaussianComponent::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        assert!(LatentMixture::new(vec![c, c2], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn two_point_loss_closed_form() {
        let m = LatentMixture::new(
            vec![
                GaussianComponent::isotropic(vec![0.0], 1.0).unwrap(),
                GaussianComponent::isotropic(vec![10.0], 1.0).unwrap(),
            ],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert!((m.quadratic_loss(&[5.0]).unwrap() - 26.0).abs() < 1e-12);
        assert!(m.quadratic_loss(&[5.0, 1.0]).is_err());
    }

    #[test]
    fn json_round_trip_keeps_field_names() {
        let m = LatentMixture::new(
            vec![
                GaussianComponent::isotropic(vec![0.0, 1.0], 2.0).unwrap(),
                GaussianComponent::diagonal(vec![1.0, 1.0], vec![1.0, 3.0]).unwrap(),
                GaussianComponent::new(
                    vec![0.0, 0.0],
                    Covariance::Full(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0])),
                )
                .unwrap(),
            ],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap();
        let text = m.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["components"][0]["cov"]["kind"], "iso");
        assert_eq!(v["components"][1]["cov"]["kind"], "diag");
        assert_eq!(v["components"][2]["cov"]["kind"], "full");
        assert_eq!(LatentMixture::from_json(&text).unwrap(), m);
    }

    #[test]
    fn json_without_schema_field_parses() {
        let text = r#"{"weights":[1.0],"components":[{"mean":[0.0],"cov":{"kind":"iso","value":1.0}}]}"#;
        let m = LatentMixture::from_json(text).unwrap();
        assert_eq!(m.n_states(), 1);
        let bad = r#"{"weights":[1.0],"components":[{"mean":[0.0],"cov":{"kind":"iso","value":-1.0}}]}"#;
        assert!(LatentMixture::from_json(bad).is_err());
    }

    #[test]
    fn cross_entropy_optimum_examples() {
        let q = SimplexVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(cross_entropy_optimal(&[(1.0, q.clone())]).unwrap(), q);

        let hots: Vec<_> = (0..4).map(|i| (1.0, SimplexVector::one_hot(4, i).unwrap())).collect();
        let p = cross_entropy_optimal(&hots).unwrap();
        for v in p.entries() {
            assert!((v - 0.25).abs() < 1e-15);
        }
        assert!(cross_entropy_optimal(&[]).is_err());
    }
}
