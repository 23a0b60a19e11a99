//! Explicit hallucinating mixtures.
//!
//! Each builder returns a [`ConstructionReport`] whose verdict is recomputed
//! from the mixture itself through [`LatentMixture`] densities, so nothing in
//! the construction's own arithmetic is trusted.
//!
//! * [`construct_single_input`]: N−1 Gaussian states pushed away from the origin
//!   plus one wide balancing state, so the optimum sits at 0 and every
//!   conditional density there is at most δ.
//! * [`construct_semi_optimal`]: unit-covariance states paired so the optimum
//!   is 0 while every mean is far enough that the whole ε-ball hallucinates.
//! * [`construct_tilted`]: the semi-optimal witness with ε = L·B for an
//!   L-Lipschitz estimator evaluated at hinted inputs.
//! * [`construct_cross_entropy`]: the categorical analogue with one-hot targets.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{HalluError, Result};
use crate::mixture::{
    cross_entropy_optimal, validate_weights, ComponentDoc, Covariance, GaussianComponent, LatentMixture,
    SimplexVector,
};
use crate::regions::{check_delta, delta_hallucinates};
use crate::rng;

/// Tolerance on the estimator hitting the claimed optimum.
pub const OPTIMUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstructionDetails {
    SingleInput {
        /// Scale `m_i` of each pushed-out mean `μ_i = m_i·1`.
        scales: Vec<f64>,
        /// Variance `m_N` of the balancing state.
        balancing_variance: f64,
    },
    SemiOptimal {
        epsilon: f64,
        required_norm: f64,
        mean_norms: Vec<f64>,
        sampled_points: usize,
        /// Largest conditional density seen over the sampled ε-ball.
        max_sampled_density: f64,
        /// `(2π)^{-d/2} exp(−½(min‖μ_i‖ − ε)²)`, valid over the whole ball.
        analytic_bound: f64,
    },
    Tilted {
        hint_index: usize,
        hint_bound: f64,
        lipschitz: f64,
        epsilon: f64,
        /// `‖A(X+δ_i) − A(X)‖` of the candidate, when one was supplied.
        displacement: Option<f64>,
        applicable: bool,
    },
    CrossEntropy {
        states: usize,
        classes: usize,
        variance: f64,
        variance_bound: f64,
        sq_distances: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructionReport {
    pub construction: String,
    /// Absent for the categorical construction.
    pub mixture: Option<LatentMixture>,
    pub delta: f64,
    pub estimator_value: Vec<f64>,
    pub claimed_optimum: Vec<f64>,
    pub per_state_density: Vec<f64>,
    pub passed: bool,
    pub details: ConstructionDetails,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Parameters of the single-input witness. `weights` has N entries;
/// `covariances` gives Σ_1..Σ_{N−1}.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleInputSpec {
    pub dim: usize,
    pub delta: f64,
    pub weights: Vec<f64>,
    pub covariances: Vec<Covariance>,
}

/// Single-input witness.
///
/// `μ_i = m_i·1` with `m_i = sqrt((−2 ln δ − ln det Σ_i) / 1ᵀΣ_i⁻¹1)` for
/// `i < N`, which makes `f_i(0) = (2π)^{−d/2} δ`. The last state balances the
/// mean, `μ_N = −Σ_{i<N} (p_i/p_N) μ_i`, and has covariance `δ^{−2/d}·I` so
/// its peak density is at most δ.
pub fn construct_single_input(spec: &SingleInputSpec) -> Result<ConstructionReport> {
    check_delta(spec.delta)?;
    let n = spec.weights.len();
    if n < 2 {
        return Err(HalluError::input("construction needs at least two states"));
    }
    if spec.dim == 0 {
        return Err(HalluError::input("dimension must be positive"));
    }
    validate_weights(&spec.weights)?;
    let p_last = spec.weights[n - 1];
    if p_last <= 0.0 {
        return Err(HalluError::input("balancing state needs positive weight"));
    }
    if spec.covariances.len() != n - 1 {
        return Err(HalluError::input(format!(
            "expected {} covariances, got {}",
            n - 1,
            spec.covariances.len()
        )));
    }

    let ones = vec![1.0; spec.dim];
    let mut components = Vec::with_capacity(n);
    let mut scales = Vec::with_capacity(n - 1);
    for (i, cov) in spec.covariances.iter().enumerate() {
        let probe = GaussianComponent::new(vec![0.0; spec.dim], cov.clone())?;
        let numer = -2.0 * spec.delta.ln() - probe.log_det();
        if numer < 0.0 {
            return Err(HalluError::Infeasible(format!(
                "state {i}: −2 ln δ − ln det Σ = {numer:.6} < 0"
            )));
        }
        let m = (numer / probe.inverse_quadratic_form(&ones)).sqrt();
        scales.push(m);
        components.push(GaussianComponent::new(vec![m; spec.dim], cov.clone())?);
    }
    let mut last_mean = vec![0.0; spec.dim];
    for (c, p) in components.iter().zip(&spec.weights) {
        for (l, v) in last_mean.iter_mut().zip(c.mean()) {
            *l -= p / p_last * v;
        }
    }
    let balancing_variance = spec.delta.powf(-2.0 / spec.dim as f64);
    components.push(GaussianComponent::isotropic(last_mean, balancing_variance)?);

    let mixture = LatentMixture::new(components, spec.weights.clone())?;
    let optimum = vec![0.0; spec.dim];
    let estimator = mixture.bayes_estimator();
    let verdict = delta_hallucinates(&mixture, &optimum, spec.delta)?;
    let passed = verdict.hallucinates && max_abs_diff(&estimator, &optimum) <= OPTIMUM_TOL;
    Ok(ConstructionReport {
        construction: "single_input".into(),
        mixture: Some(mixture),
        delta: spec.delta,
        estimator_value: estimator,
        claimed_optimum: optimum,
        per_state_density: verdict.per_state_density,
        passed,
        details: ConstructionDetails::SingleInput { scales, balancing_variance },
    })
}

/// One witness per input; each input's outcome is kept separately.
pub fn construct_multi_input(specs: &[SingleInputSpec]) -> Vec<Result<ConstructionReport>> {
    specs.iter().map(construct_single_input).collect()
}

/// Parameters of the semi-optimal witness (unit covariance per state).
#[derive(Debug, Clone, PartialEq)]
pub struct SemiOptimalSpec {
    pub dim: usize,
    pub delta: f64,
    pub epsilon: f64,
    /// N weights, N even.
    pub weights: Vec<f64>,
    /// Outward scale `C ≥ 1` applied to every mean.
    pub scale: f64,
    /// Points sampled uniformly from the ε-ball.
    pub samples: usize,
    pub seed: u64,
}

impl SemiOptimalSpec {
    pub fn new(dim: usize, delta: f64, epsilon: f64, weights: Vec<f64>) -> Self {
        Self { dim, delta, epsilon, weights, scale: 1.0, samples: 1000, seed: 0 }
    }

    /// `sqrt(−2 ln δ) + ε`.
    pub fn required_norm(&self) -> f64 {
        (-2.0 * self.delta.ln()).sqrt() + self.epsilon
    }
}

/// Paired means along `1` with `p_i μ_i + p_j μ_j = 0` for `j = N−1−i` and
/// every norm at least `C·(sqrt(−2 ln δ) + ε)`.
fn semi_optimal_means(spec: &SemiOptimalSpec) -> Result<Vec<Vec<f64>>> {
    check_delta(spec.delta)?;
    let n = spec.weights.len();
    if n < 2 || !n.is_multiple_of(2) {
        return Err(HalluError::input(format!("state count must be even and ≥ 2, got {n}")));
    }
    if spec.dim == 0 {
        return Err(HalluError::input("dimension must be positive"));
    }
    if !(spec.epsilon >= 0.0 && spec.epsilon.is_finite()) {
        return Err(HalluError::input(format!("epsilon must be ≥ 0, got {}", spec.epsilon)));
    }
    if !(spec.scale >= 1.0 && spec.scale.is_finite()) {
        return Err(HalluError::input(format!("scale must be ≥ 1, got {}", spec.scale)));
    }
    validate_weights(&spec.weights)?;
    let target = spec.scale * spec.required_norm();
    let root_d = (spec.dim as f64).sqrt();
    let mut means = vec![Vec::new(); n];
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let (pi, pj) = (spec.weights[i], spec.weights[j]);
        if pi <= 0.0 || pj <= 0.0 {
            return Err(HalluError::Infeasible(format!(
                "states {i} and {j} cannot be paired: a zero weight forces a zero mean"
            )));
        }
        // ‖μ_j‖ = (p_i/p_j)‖μ_i‖, so lift the pair until the smaller norm reaches the target.
        let norm_i = target * (pj / pi).max(1.0);
        let s = norm_i / root_d;
        means[i] = vec![s; spec.dim];
        means[j] = vec![-pi / pj * s; spec.dim];
    }
    Ok(means)
}

fn semi_optimal_mixture(spec: &SemiOptimalSpec, center: &[f64]) -> Result<LatentMixture> {
    let means = semi_optimal_means(spec)?;
    let components = means
        .into_iter()
        .map(|m| {
            let shifted = m.iter().zip(center).map(|(a, c)| a + c).collect();
            GaussianComponent::isotropic(shifted, 1.0)
        })
        .collect::<Result<Vec<_>>>()?;
    LatentMixture::new(components, spec.weights.clone())
}

/// Uniform draw from the closed ball of radius `radius` around `center`.
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, center: &[f64], radius: f64) -> Vec<f64> {
    let d = center.len();
    let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / d as f64);
    center.iter().zip(&dir).map(|(c, v)| c + r * v / norm).collect()
}

/// Semi-optimal witness: every estimate within ε of the optimum hallucinates.
pub fn construct_semi_optimal(spec: &SemiOptimalSpec) -> Result<ConstructionReport> {
    let optimum = vec![0.0; spec.dim.max(1)];
    let mixture = semi_optimal_mixture(spec, &optimum)?;
    let estimator = mixture.bayes_estimator();
    let verdict = delta_hallucinates(&mixture, &optimum, spec.delta)?;

    let mut rng = rng::stream(spec.seed, "constructions/ball");
    let mut max_sampled = verdict.max_density();
    for _ in 0..spec.samples {
        let v0 = sample_ball(&mut rng, &optimum, spec.epsilon);
        let v = delta_hallucinates(&mixture, &v0, spec.delta)?;
        max_sampled = max_sampled.max(v.max_density());
    }

    let mean_norms: Vec<f64> = mixture
        .components()
        .iter()
        .map(|c| c.mean().iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let min_norm = mean_norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let d = spec.dim as f64;
    let analytic_bound =
        (2.0 * std::f64::consts::PI).powf(-d / 2.0) * (-0.5 * (min_norm - spec.epsilon).powi(2)).exp();

    let passed = verdict.hallucinates
        && max_sampled <= spec.delta
        && analytic_bound <= spec.delta
        && max_abs_diff(&estimator, &optimum) <= OPTIMUM_TOL;
    Ok(ConstructionReport {
        construction: "semi_optimal".into(),
        mixture: Some(mixture),
        delta: spec.delta,
        estimator_value: estimator,
        claimed_optimum: optimum,
        per_state_density: verdict.per_state_density,
        passed,
        details: ConstructionDetails::SemiOptimal {
            epsilon: spec.epsilon,
            required_norm: spec.required_norm(),
            mean_norms,
            sampled_points: spec.samples,
            max_sampled_density: max_sampled,
            analytic_bound,
        },
    })
}

/// Base input with latent hints `δ_i` for an L-Lipschitz estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltedFamily {
    pub base: Vec<f64>,
    pub hints: Vec<Vec<f64>>,
    pub lipschitz: f64,
}

impl TiltedFamily {
    /// `B = sup_i ‖δ_i‖`.
    pub fn hint_bound(&self) -> f64 {
        self.hints
            .iter()
            .map(|h| h.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Witnesses at tilted inputs `X + δ_i`.
///
/// Sets `ε = L·B` and builds the semi-optimal witness around the candidate's
/// value at `X` (or the origin when no candidate is given). With a candidate,
/// each `A(X+δ_i)` is checked against the Lipschitz displacement first; a
/// violation marks that report not applicable rather than failed.
pub fn construct_tilted(
    family: &TiltedFamily,
    base_spec: &SemiOptimalSpec,
    candidate: Option<&dyn Fn(&[f64]) -> Vec<f64>>,
) -> Result<Vec<ConstructionReport>> {
    if !(family.lipschitz > 0.0 && family.lipschitz.is_finite()) {
        return Err(HalluError::input("Lipschitz constant must be positive"));
    }
    if family.hints.iter().any(|h| h.len() != family.base.len()) {
        return Err(HalluError::input("hints must match the input dimension"));
    }
    if family.hints.iter().flatten().any(|v| !v.is_finite()) {
        return Err(HalluError::input("hints must be finite"));
    }
    let bound = family.hint_bound();
    let epsilon = family.lipschitz * bound;
    let spec = SemiOptimalSpec { epsilon, ..base_spec.clone() };

    let Some(candidate) = candidate else {
        let ball = construct_semi_optimal(&spec)?;
        return Ok((0..family.hints.len())
            .map(|k| ConstructionReport {
                construction: "tilted".into(),
                details: ConstructionDetails::Tilted {
                    hint_index: k,
                    hint_bound: bound,
                    lipschitz: family.lipschitz,
                    epsilon,
                    displacement: None,
                    applicable: true,
                },
                ..ball.clone()
            })
            .collect());
    };

    let center = candidate(&family.base);
    if center.len() != spec.dim {
        return Err(HalluError::input("candidate output dimension differs from construction dimension"));
    }
    let mixture = semi_optimal_mixture(&spec, &center)?;
    let estimator = mixture.bayes_estimator();
    let mut reports = Vec::with_capacity(family.hints.len());
    for (k, hint) in family.hints.iter().enumerate() {
        let x: Vec<f64> = family.base.iter().zip(hint).map(|(a, b)| a + b).collect();
        let value = candidate(&x);
        let displacement = value
            .iter()
            .zip(&center)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let applicable = displacement <= epsilon * (1.0 + 1e-12) + 1e-15;
        let verdict = delta_hallucinates(&mixture, &value, spec.delta)?;
        let passed =
            applicable && verdict.hallucinates && max_abs_diff(&estimator, &center) <= OPTIMUM_TOL;
        reports.push(ConstructionReport {
            construction: "tilted".into(),
            mixture: Some(mixture.clone()),
            delta: spec.delta,
            estimator_value: value,
            claimed_optimum: center.clone(),
            per_state_density: verdict.per_state_density,
            passed,
            details: ConstructionDetails::Tilted {
                hint_index: k,
                hint_bound: bound,
                lipschitz: family.lipschitz,
                epsilon,
                displacement: Some(displacement),
                applicable,
            },
        });
    }
    Ok(reports)
}

/// `−(N−1) / (N ln δ²)`: the largest target variance the categorical witness allows.
pub fn cross_entropy_variance_bound(states: usize, delta: f64) -> f64 {
    let n = states as f64;
    -(n - 1.0) / (n * (delta * delta).ln())
}

/// `(2πd)^{−1/2} exp(−s/(2d))`: the scalar-normal density the categorical
/// witness assigns to a prediction at squared distance `s` from a target.
pub fn cross_entropy_state_density(variance: f64, sq_distance: f64) -> f64 {
    (-sq_distance / (2.0 * variance)).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
}

/// Largest variance `d ≤` the bound at which the categorical density stays
/// at or below δ, found by bisection (the density increases with `d` on this range).
pub fn cross_entropy_feasible_variance(states: usize, delta: f64) -> Result<f64> {
    if states < 2 || !(delta > 0.0 && delta < 1.0) {
        return Err(HalluError::input("need N ≥ 2 and δ ∈ (0, 1)"));
    }
    let s = (states as f64 - 1.0) / states as f64;
    let bound = cross_entropy_variance_bound(states, delta);
    if cross_entropy_state_density(bound, s) <= delta {
        return Ok(bound);
    }
    let (mut lo, mut hi) = (0.0, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cross_entropy_state_density(mid, s) <= delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Categorical witness: `N` one-hot targets over `C ≥ N` classes with equal
/// latent weights and target variance `d`. The cross-entropy optimum is the
/// average `(1/N) Σ e_i`, at squared distance `(N−1)/N` from every target.
///
/// `variance = None` uses the bound `−(N−1)/(N ln δ²)` itself.
pub fn construct_cross_entropy(
    states: usize,
    classes: usize,
    delta: f64,
    variance: Option<f64>,
) -> Result<ConstructionReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(HalluError::input(format!("delta must lie in (0, 1), got {delta}")));
    }
    if states < 2 {
        return Err(HalluError::input("need at least two latent states"));
    }
    if classes < states {
        return Err(HalluError::input(format!("need C ≥ N, got C = {classes}, N = {states}")));
    }
    let bound = cross_entropy_variance_bound(states, delta);
    let variance = variance.unwrap_or(bound);
    if !(variance > 0.0 && variance <= bound) {
        return Err(HalluError::input(format!("variance must lie in (0, {bound}], got {variance}")));
    }
    let targets: Vec<SimplexVector> = (0..states)
        .map(|i| SimplexVector::one_hot(classes, i))
        .collect::<Result<_>>()?;
    let weighted: Vec<(f64, SimplexVector)> =
        targets.iter().map(|t| (1.0 / states as f64, t.clone())).collect();
    let optimum = cross_entropy_optimal(&weighted)?;
    let sq_distances: Vec<f64> = targets
        .iter()
        .map(|t| t.entries().iter().zip(optimum.entries()).map(|(a, b)| (a - b).powi(2)).sum())
        .collect();
    let per_state_density: Vec<f64> = sq_distances
        .iter()
        .map(|s| cross_entropy_state_density(variance, *s))
        .collect();
    let passed = per_state_density.iter().all(|f| *f <= delta);
    let claimed: Vec<f64> = (0..classes)
        .map(|t| if t < states { 1.0 / states as f64 } else { 0.0 })
        .collect();
    let passed = passed && max_abs_diff(optimum.entries(), &claimed) <= OPTIMUM_TOL;
    Ok(ConstructionReport {
        construction: "cross_entropy".into(),
        mixture: None,
        delta,
        estimator_value: optimum.entries().to_vec(),
        claimed_optimum: claimed,
        per_state_density,
        passed,
        details: ConstructionDetails::CrossEntropy {
            states,
            classes,
            variance,
            variance_bound: bound,
            sq_distances,
        },
    })
}

/// Which witness a spec file asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    #[serde(rename = "5.1")]
    SingleInput,
    #[serde(rename = "5.2")]
    SemiOptimal,
    #[serde(rename = "5.4")]
    Tilted,
    #[serde(rename = "D")]
    CrossEntropy,
}

/// JSON construction spec: the mixture document extended with the witness
/// kind and its parameters. For "5.1" the covariances of the listed
/// components supply Σ_1..Σ_{N−1} (means are ignored; a trailing N-th
/// component, if present, is ignored too).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstructionSpecDoc {
    #[serde(default = "crate::report::schema_v1")]
    pub schema: String,
    pub theorem: Theorem,
    pub delta: f64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default)]
    pub components: Vec<ComponentDoc>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub family: Option<TiltedFamily>,
    #[serde(default)]
    pub states: Option<usize>,
    #[serde(default)]
    pub classes: Option<usize>,
    #[serde(default)]
    pub variance: Option<f64>,
}

/// A spec file holds one construction or a list under `"inputs"` (one per input).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstructionFile {
    Many { inputs: Vec<ConstructionSpecDoc> },
    One(ConstructionSpecDoc),
}

impl ConstructionFile {
    pub fn specs(&self) -> Vec<&ConstructionSpecDoc> {
        match self {
            ConstructionFile::Many { inputs } => inputs.iter().collect(),
            ConstructionFile::One(s) => vec![s],
        }
    }
}

fn doc_covariances(doc: &ConstructionSpecDoc) -> Result<Vec<Covariance>> {
    doc.components
        .iter()
        .map(|c| GaussianComponent::try_from(c.clone()).map(|g| g.covariance().clone()))
        .collect()
}

impl ConstructionSpecDoc {
    fn dim(&self) -> Result<usize> {
        if let Some(d) = self.dim {
            return Ok(d);
        }
        self.components
            .first()
            .map(|c| c.mean.len())
            .ok_or_else(|| HalluError::input("spec needs \"dim\" or at least one component"))
    }

    fn semi_optimal(&self, epsilon: f64) -> Result<SemiOptimalSpec> {
        Ok(SemiOptimalSpec {
            dim: self.dim()?,
            delta: self.delta,
            epsilon,
            weights: self.weights.clone(),
            scale: self.scale.unwrap_or(1.0),
            samples: self.samples.unwrap_or(1000),
            seed: self.seed.unwrap_or(0),
        })
    }

    /// Build and verify the requested witness.
    pub fn run(&self, seed: Option<u64>) -> Result<Vec<ConstructionReport>> {
        match self.theorem {
            Theorem::SingleInput => {
                let n = self.weights.len();
                let mut covs = doc_covariances(self)?;
                if covs.len() == n {
                    covs.pop();
                }
                let dim = self.dim()?;
                if covs.is_empty() && n >= 2 {
                    covs = vec![Covariance::Isotropic(1.0); n - 1];
                }
                let spec = SingleInputSpec { dim, delta: self.delta, weights: self.weights.clone(), covariances: covs };
                Ok(vec![construct_single_input(&spec)?])
            }
            Theorem::SemiOptimal => {
                let mut spec = self.semi_optimal(self.epsilon.unwrap_or(0.0))?;
                if let Some(s) = seed {
                    spec.seed = s;
                }
                Ok(vec![construct_semi_optimal(&spec)?])
            }
            Theorem::Tilted => {
                let family = self
                    .family
                    .as_ref()
                    .ok_or_else(|| HalluError::input("5.4 spec needs a \"family\""))?;
                let mut spec = self.semi_optimal(0.0)?;
                if let Some(s) = seed {
                    spec.seed = s;
                }
                construct_tilted(family, &spec, None)
            }
            Theorem::CrossEntropy => {
                let states = self.states.ok_or_else(|| HalluError::input("D spec needs \"states\""))?;
                let classes = self.classes.unwrap_or(states);
                Ok(vec![construct_cross_entropy(states, classes, self.delta, self.variance)?])
            }
        }
    }
}

/// Random positive-definite covariance for randomized suites.
pub fn random_covariance<R: Rng + ?Sized>(rng: &mut R, dim: usize, kind: u8) -> Covariance {
    match kind % 3 {
        0 => Covariance::Isotropic(rng.random_range(0.3..2.0)),
        1 => Covariance::Diagonal((0..dim).map(|_| rng.random_range(0.3..2.0)).collect()),
        _ => {
            let a = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-0.5..0.5));
            let m = &a * a.transpose() + DMatrix::identity(dim, dim) * 0.5;
            Covariance::Full(m)
        }
    }
}
