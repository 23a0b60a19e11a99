//! Lower bound on the probability that the quadratic-loss optimum hallucinates,
//! when the conditional means are themselves random.
//!
//! Each state's mean `μ_i` is drawn independently from a law with common mean
//! `μ₀` and variance `σ_i^d`. With `d = (Σ_j p_j² σ_j^d)^{1/2}` and
//! `θ_i(α) = (αd + r_x)² / σ_i^d`, every state contributes
//! `P_i = max_{α>1, θ_i≤1} (1 − α⁻²)(1 − θ_i(α))²` and a moment ratio
//! `K_i = (E[(μ_i−μ₀)²])² / E[(μ_i−μ₀)⁴]`; the bound is `Π_i P_i K_i`.
//!
//! The verifiers here sample mean configurations and count how often the
//! optimum actually falls outside every high-density region.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HalluError, Result};
use crate::mixture::{normal_pdf, validate_weights, GaussianComponent};
use crate::regions::{check_delta, covering_radius};
use crate::rng;
use crate::stats::{wilson_interval, Frequency};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanFamily {
    /// `N(μ₀, s²)`, param = s.
    Gaussian,
    /// `μ₀ ± s` with equal probability, param = s.
    TwoPoint,
    /// `U[μ₀ − a, μ₀ + a]`, param = a.
    Uniform,
}

/// Law of one state's conditional mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanLaw {
    pub family: MeanFamily,
    pub mu0: f64,
    pub param: f64,
}

impl MeanLaw {
    pub fn new(family: MeanFamily, mu0: f64, param: f64) -> Self {
        Self { family, mu0, param }
    }

    pub fn gaussian(mu0: f64, s: f64) -> Self {
        Self::new(MeanFamily::Gaussian, mu0, s)
    }

    fn check(&self) -> Result<()> {
        if !(self.param > 0.0 && self.param.is_finite() && self.mu0.is_finite()) {
            return Err(HalluError::input(format!(
                "degenerate mean law: param must be positive, got {}",
                self.param
            )));
        }
        Ok(())
    }

    /// `σ_i^d = Var[μ_i]`.
    pub fn variance(&self) -> f64 {
        let s2 = self.param * self.param;
        match self.family {
            MeanFamily::Gaussian | MeanFamily::TwoPoint => s2,
            MeanFamily::Uniform => s2 / 3.0,
        }
    }

    /// `E[(μ_i − μ₀)⁴]`.
    pub fn fourth_central_moment(&self) -> f64 {
        let s4 = self.param.powi(4);
        match self.family {
            MeanFamily::Gaussian => 3.0 * s4,
            MeanFamily::TwoPoint => s4,
            MeanFamily::Uniform => s4 / 5.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            MeanFamily::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                self.mu0 + self.param * z
            }
            MeanFamily::TwoPoint => {
                if rng.random::<bool>() {
                    self.mu0 + self.param
                } else {
                    self.mu0 - self.param
                }
            }
            MeanFamily::Uniform => self.mu0 + rng.random_range(-self.param..=self.param),
        }
    }
}

/// `K = (E[(μ−μ₀)²])² / E[(μ−μ₀)⁴]`, in (0, 1].
pub fn moment_ratio_k(law: &MeanLaw) -> Result<f64> {
    law.check()?;
    Ok(law.variance().powi(2) / law.fourth_central_moment())
}

/// How the aggregate spread `d` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpreadVariant {
    /// `(Σ_j p_j² σ_j^d)^{1/2}`.
    #[default]
    Statement,
    /// `((Σ_j p_j²)(Σ_j σ_j^d))^{1/2}`, the form the Chebyshev–Cauchy step produces.
    Proof,
}

pub fn aggregate_spread_d(weights: &[f64], variances: &[f64], variant: SpreadVariant) -> Result<f64> {
    if weights.len() != variances.len() || weights.is_empty() {
        return Err(HalluError::input("weights and variances must have the same nonzero length"));
    }
    if variances.iter().any(|v| !(*v > 0.0)) {
        return Err(HalluError::input("mean-law variances must be positive"));
    }
    let d2 = match variant {
        SpreadVariant::Statement => weights.iter().zip(variances).map(|(p, s)| p * p * s).sum::<f64>(),
        SpreadVariant::Proof => {
            weights.iter().map(|p| p * p).sum::<f64>() * variances.iter().sum::<f64>()
        }
    };
    Ok(d2.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AlphaChoice {
    Feasible { alpha: f64, theta: f64, p: f64 },
    /// No `α > 1` keeps `θ_i(α) ≤ 1`.
    Infeasible { alpha_max: f64 },
}

impl AlphaChoice {
    pub fn p(&self) -> Option<f64> {
        match self {
            AlphaChoice::Feasible { p, .. } => Some(*p),
            AlphaChoice::Infeasible { .. } => None,
        }
    }
}

/// `θ(α) = (αd + r_x)² / σ`.
pub fn theta(alpha: f64, d: f64, r_x: f64, sigma_d: f64) -> f64 {
    (alpha * d + r_x).powi(2) / sigma_d
}

/// `g(α) = (1 − α⁻²)(1 − θ(α))²`, the per-state objective.
pub fn alpha_objective(alpha: f64, d: f64, r_x: f64, sigma_d: f64) -> f64 {
    (1.0 - alpha.powi(-2)) * (1.0 - theta(alpha, d, r_x, sigma_d)).powi(2)
}

const ALPHA_TOL: f64 = 1e-10;

/// Maximize `g` over `α ∈ (1, α_max]` where `θ(α_max) = 1`, by golden-section search.
pub fn optimize_alpha(sigma_d: f64, d: f64, r_x: f64) -> Result<AlphaChoice> {
    if !(d > 0.0) || !(sigma_d > 0.0) || r_x < 0.0 {
        return Err(HalluError::input("need d > 0, σ^d > 0 and r_x ≥ 0"));
    }
    let alpha_max = (sigma_d.sqrt() - r_x) / d;
    if alpha_max <= 1.0 {
        return Ok(AlphaChoice::Infeasible { alpha_max });
    }
    let g = |a: f64| alpha_objective(a, d, r_x, sigma_d);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (1.0, alpha_max);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    while hi - lo > ALPHA_TOL {
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + inv_phi * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - inv_phi * (hi - lo);
            g1 = g(x1);
        }
    }
    let alpha = 0.5 * (lo + hi);
    Ok(AlphaChoice::Feasible { alpha, theta: theta(alpha, d, r_x, sigma_d), p: g(alpha) })
}

/// Inputs of the lower bound; also the JSON wire format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    #[serde(default = "crate::report::schema_v1")]
    pub schema: String,
    pub weights: Vec<f64>,
    pub mean_laws: Vec<MeanLaw>,
    /// Uniform covering radius.
    pub r_x: f64,
    pub delta: f64,
    #[serde(default)]
    pub d_variant: SpreadVariant,
    /// Isotropic variance of each state's Gaussian, used by the Monte Carlo check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component_variance: Option<f64>,
}

impl BoundInputs {
    pub fn new(weights: Vec<f64>, mean_laws: Vec<MeanLaw>, r_x: f64, delta: f64) -> Self {
        Self {
            schema: crate::report::schema_v1(),
            weights,
            mean_laws,
            r_x,
            delta,
            d_variant: SpreadVariant::Statement,
            component_variance: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_weights(&self.weights)?;
        if self.weights.len() != self.mean_laws.len() {
            return Err(HalluError::input(format!(
                "{} weights but {} mean laws",
                self.weights.len(),
                self.mean_laws.len()
            )));
        }
        for law in &self.mean_laws {
            law.check()?;
        }
        let mu0 = self.mean_laws[0].mu0;
        if self.mean_laws.iter().any(|l| (l.mu0 - mu0).abs() > 1e-12) {
            return Err(HalluError::input("all mean laws must share one mean μ₀"));
        }
        if !(self.r_x >= 0.0 && self.r_x.is_finite()) {
            return Err(HalluError::input(format!("r_x must be ≥ 0, got {}", self.r_x)));
        }
        check_delta(self.delta)
    }

    pub fn variances(&self) -> Vec<f64> {
        self.mean_laws.iter().map(MeanLaw::variance).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateBound {
    pub sigma_d: f64,
    pub k: f64,
    pub alpha: AlphaChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub d: f64,
    pub d_variant: SpreadVariant,
    pub states: Vec<StateBound>,
    pub feasible: Vec<bool>,
    /// `Π_i P_i K_i`, present only when every state is feasible.
    pub product_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical: Option<McVerification>,
}

impl BoundReport {
    pub fn all_feasible(&self) -> bool {
        self.feasible.iter().all(|f| *f)
    }
}

pub fn hallucination_lower_bound(inputs: &BoundInputs) -> Result<BoundReport> {
    inputs.validate()?;
    let variances = inputs.variances();
    let d = aggregate_spread_d(&inputs.weights, &variances, inputs.d_variant)?;
    let mut states = Vec::with_capacity(variances.len());
    for (law, s) in inputs.mean_laws.iter().zip(&variances) {
        states.push(StateBound { sigma_d: *s, k: moment_ratio_k(law)?, alpha: optimize_alpha(*s, d, inputs.r_x)? });
    }
    let feasible: Vec<bool> = states.iter().map(|s| s.alpha.p().is_some()).collect();
    let product_bound = feasible
        .iter()
        .all(|f| *f)
        .then(|| states.iter().map(|s| s.alpha.p().unwrap() * s.k).product());
    Ok(BoundReport { d, d_variant: inputs.d_variant, states, feasible, product_bound, empirical: None })
}

/// Monte Carlo frequencies of the two hallucination events.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McVerification {
    pub trials: u64,
    pub component_variance: f64,
    pub covering_radius: f64,
    /// Optimum outside every covering ball `B_i(r_i)`.
    pub geometric: Frequency,
    /// Optimum δ-hallucinates: every conditional density ≤ δ.
    pub hallucination: Frequency,
}

/// Sample mean configurations, build the mixture with isotropic variance
/// `component_variance`, and count how often `A* = Σ p_i μ_i` falls outside
/// every covering ball and how often it δ-hallucinates.
///
/// Trials run in fixed partitions with per-partition streams, so counts
/// depend only on `(seed, trials)`.
pub fn mc_verify_bound(
    inputs: &BoundInputs,
    component_variance: f64,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<McVerification> {
    inputs.validate()?;
    let probe = GaussianComponent::isotropic(vec![0.0], component_variance)?;
    let radius = covering_radius(&probe, inputs.delta);
    if radius > inputs.r_x {
        return Err(HalluError::input(format!(
            "covering radius {radius:.6} exceeds r_x = {} at this component variance",
            inputs.r_x
        )));
    }
    let parts = rng::partitions(trials as usize);
    let (geo, hal) = rng::with_workers(workers, || {
        parts
            .par_iter()
            .map(|&(idx, count)| {
                let mut r = rng::partition(seed, "bounds/mc", idx);
                let mut mus = vec![0.0; inputs.weights.len()];
                let (mut geo, mut hal) = (0u64, 0u64);
                for _ in 0..count {
                    for (m, law) in mus.iter_mut().zip(&inputs.mean_laws) {
                        *m = law.sample(&mut r);
                    }
                    let a: f64 = mus.iter().zip(&inputs.weights).map(|(m, p)| m * p).sum();
                    if mus.iter().all(|m| (a - m).abs() > radius) {
                        geo += 1;
                    }
                    if mus.iter().all(|m| normal_pdf(a, *m, component_variance) <= inputs.delta) {
                        hal += 1;
                    }
                }
                (geo, hal)
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
    });
    Ok(McVerification {
        trials,
        component_variance,
        covering_radius: radius,
        geometric: Frequency::new(geo, trials),
        hallucination: Frequency::new(hal, trials),
    })
}

/// Parameters of the lemma checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaSpec {
    pub weights: Vec<f64>,
    pub mean_laws: Vec<MeanLaw>,
    /// θ for the Paley–Zygmund check on `T = (μ_1 − μ₀)²`.
    pub pz_theta: f64,
    /// Chebyshev deviation in standard deviations of `μ_1`.
    pub chebyshev_sigmas: f64,
    /// `d₁² = c4_scale · (Σ p_i²) σ^d` for the optimum-distance check.
    pub c4_scale: f64,
    /// θ for the per-state distance lower bound.
    pub c5_theta: f64,
}

impl LemmaSpec {
    pub fn new(weights: Vec<f64>, mean_laws: Vec<MeanLaw>) -> Self {
        Self { weights, mean_laws, pz_theta: 0.5, chebyshev_sigmas: 2.0, c4_scale: 2.0, c5_theta: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub name: String,
    /// Empirical probability (for the Cauchy check: fraction of violating draws).
    pub empirical: f64,
    /// Wilson interval at 3 standard errors.
    pub interval: (f64, f64),
    pub bound: f64,
    /// Whether the bound is a lower (`≥`) or upper (`≤`) bound on the probability.
    pub lower_bound: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub trials: u64,
    pub checks: Vec<LemmaCheck>,
}

impl LemmaReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

const SLACK_Z: f64 = 3.0;

fn probability_check(name: &str, hits: u64, trials: u64, bound: f64, lower_bound: bool) -> LemmaCheck {
    let (lo, hi) = wilson_interval(hits, trials, SLACK_Z);
    let passed = if lower_bound { hi >= bound } else { lo <= bound };
    LemmaCheck {
        name: name.into(),
        empirical: hits as f64 / trials as f64,
        interval: (lo, hi),
        bound,
        lower_bound,
        passed,
    }
}

/// Empirically check Paley–Zygmund, Chebyshev, Cauchy–Schwarz and the two
/// distance lemmas the bound is assembled from, each with 3-σ Wilson slack.
pub fn lemma_checks(spec: &LemmaSpec, trials: u64, seed: u64, workers: usize) -> Result<LemmaReport> {
    validate_weights(&spec.weights)?;
    if spec.weights.len() != spec.mean_laws.len() {
        return Err(HalluError::input("weights and mean laws differ in length"));
    }
    for law in &spec.mean_laws {
        law.check()?;
    }
    let mu0 = spec.mean_laws[0].mu0;
    if spec.mean_laws.iter().any(|l| (l.mu0 - mu0).abs() > 1e-12) {
        return Err(HalluError::input("all mean laws must share one mean μ₀"));
    }
    for (name, t) in [("pz_theta", spec.pz_theta), ("c5_theta", spec.c5_theta)] {
        if !(0.0..=1.0).contains(&t) {
            return Err(HalluError::input(format!("{name} must lie in [0, 1], got {t}")));
        }
    }
    if !(spec.chebyshev_sigmas > 0.0 && spec.c4_scale > 0.0) {
        return Err(HalluError::input("chebyshev_sigmas and c4_scale must be positive"));
    }

    let n = spec.weights.len();
    let variances: Vec<f64> = spec.mean_laws.iter().map(MeanLaw::variance).collect();
    let first = spec.mean_laws[0];
    let pz_threshold = spec.pz_theta * variances[0];
    let cheb_a = spec.chebyshev_sigmas * variances[0].sqrt();
    let sum_p2: f64 = spec.weights.iter().map(|p| p * p).sum();
    let sigma_total: f64 = variances.iter().sum();
    let d1_sq = spec.c4_scale * sum_p2 * sigma_total;

    #[derive(Default, Clone)]
    struct Counts {
        pz: u64,
        cheb: u64,
        cauchy_violations: u64,
        c4: u64,
        c5: Vec<u64>,
    }
    let parts = rng::partitions(trials as usize);
    let counts = rng::with_workers(workers, || {
        parts
            .par_iter()
            .map(|&(idx, count)| {
                let mut r = rng::partition(seed, "bounds/lemmas", idx);
                let mut c = Counts { c5: vec![0; n], ..Default::default() };
                let mut dev = vec![0.0; n];
                for _ in 0..count {
                    for (d, law) in dev.iter_mut().zip(&spec.mean_laws) {
                        *d = law.sample(&mut r) - mu0;
                    }
                    let t = dev[0] * dev[0];
                    if t > pz_threshold {
                        c.pz += 1;
                    }
                    if dev[0].abs() >= cheb_a {
                        c.cheb += 1;
                    }
                    let dot: f64 = spec.weights.iter().zip(&dev).map(|(p, d)| p * d).sum();
                    let sq_dev: f64 = dev.iter().map(|d| d * d).sum();
                    if dot * dot > sum_p2 * sq_dev * (1.0 + 1e-12) + 1e-300 {
                        c.cauchy_violations += 1;
                    }
                    if dot * dot >= d1_sq {
                        c.c4 += 1;
                    }
                    for (i, d) in dev.iter().enumerate() {
                        if d * d >= spec.c5_theta * variances[i] {
                            c.c5[i] += 1;
                        }
                    }
                }
                c
            })
            .reduce(
                || Counts { c5: vec![0; n], ..Default::default() },
                |mut a, b| {
                    a.pz += b.pz;
                    a.cheb += b.cheb;
                    a.cauchy_violations += b.cauchy_violations;
                    a.c4 += b.c4;
                    for (x, y) in a.c5.iter_mut().zip(&b.c5) {
                        *x += y;
                    }
                    a
                },
            )
    });

    let k_first = moment_ratio_k(&first)?;
    let mut checks = vec![
        probability_check(
            "paley_zygmund",
            counts.pz,
            trials,
            (1.0 - spec.pz_theta).powi(2) * k_first,
            true,
        ),
        probability_check("chebyshev", counts.cheb, trials, variances[0] / (cheb_a * cheb_a), false),
        LemmaCheck {
            name: "cauchy".into(),
            empirical: counts.cauchy_violations as f64 / trials as f64,
            interval: (0.0, 0.0),
            bound: 0.0,
            lower_bound: false,
            passed: counts.cauchy_violations == 0,
        },
        probability_check(
            "optimum_distance_upper",
            counts.c4,
            trials,
            (sum_p2 * sigma_total / d1_sq).min(1.0),
            false,
        ),
    ];
    let per_state: Vec<LemmaCheck> = spec
        .mean_laws
        .iter()
        .zip(&counts.c5)
        .map(|(law, hits)| {
            let bound = (1.0 - spec.c5_theta).powi(2) * moment_ratio_k(law).expect("laws checked above");
            probability_check("mean_distance_lower", *hits, trials, bound, true)
        })
        .collect();
    let worst = per_state
        .iter()
        .min_by(|a, b| (a.interval.1 - a.bound).total_cmp(&(b.interval.1 - b.bound)))
        .cloned()
        .expect("at least one state");
    checks.push(LemmaCheck { passed: per_state.iter().all(|c| c.passed), ..worst });
    Ok(LemmaReport { trials, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_ratios() {
        assert_eq!(moment_ratio_k(&MeanLaw::new(MeanFamily::TwoPoint, 0.0, 2.0)).unwrap(), 1.0);
        assert!((moment_ratio_k(&MeanLaw::gaussian(0.0, 1.0)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((moment_ratio_k(&MeanLaw::new(MeanFamily::Uniform, 1.0, 3.0)).unwrap() - 5.0 / 9.0).abs() < 1e-15);
        assert!(moment_ratio_k(&MeanLaw::gaussian(0.0, 0.0)).is_err());
    }

    #[test]
    fn spread_examples() {
        let d = aggregate_spread_d(&[0.5, 0.5], &[1.0, 1.0], SpreadVariant::Statement).unwrap();
        assert!((d - 0.707_11).abs() < 1e-5);
        assert_eq!(aggregate_spread_d(&[1.0], &[4.0], SpreadVariant::Statement).unwrap(), 2.0);
        let d = aggregate_spread_d(&[1.0, 0.0], &[4.0, 9.0], SpreadVariant::Statement).unwrap();
        assert_eq!(d, 2.0);
        // the proof's variant sums all variances
        let d = aggregate_spread_d(&[0.5, 0.5], &[1.0, 3.0], SpreadVariant::Proof).unwrap();
        assert!((d - (0.5f64 * 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn infeasible_when_radius_too_large() {
        let d = 0.5f64.sqrt();
        let r = optimize_alpha(1.0, d, 1.0 - d).unwrap();
        assert!(matches!(r, AlphaChoice::Infeasible { .. }));
        let r = optimize_alpha(1.0, d, 0.5).unwrap();
        assert!(matches!(r, AlphaChoice::Infeasible { .. }));
    }

    #[test]
    fn feasible_probability_in_unit_interval() {
        let AlphaChoice::Feasible { p, theta, alpha } = optimize_alpha(1.0, 0.5f64.sqrt(), 0.1).unwrap() else {
            panic!()
        };
        assert!(p > 0.0 && p < 1.0);
        assert!(theta <= 1.0);
        assert!(alpha > 1.0);
    }

    #[test]
    fn infeasible_state_gives_no_product() {
        let mut inputs = BoundInputs::new(
            vec![0.5, 0.5],
            vec![MeanLaw::gaussian(0.0, 1.0), MeanLaw::gaussian(0.0, 0.2)],
            0.1,
            0.1,
        );
        let r = hallucination_lower_bound(&inputs).unwrap();
        assert_eq!(r.feasible, vec![true, false]);
        assert!(r.product_bound.is_none());
        inputs.mean_laws[1].mu0 = 1.0;
        assert!(hallucination_lower_bound(&inputs).is_err());
    }

    #[test]
    fn two_point_laws_drop_moment_factor() {
        let inputs = BoundInputs::new(
            vec![0.5, 0.5],
            vec![MeanLaw::new(MeanFamily::TwoPoint, 0.0, 1.0); 2],
            0.1,
            0.1,
        );
        let r = hallucination_lower_bound(&inputs).unwrap();
        let prod: f64 = r.states.iter().map(|s| s.alpha.p().unwrap()).product();
        assert!((r.product_bound.unwrap() - prod).abs() < 1e-18);
    }

    #[test]
    fn precondition_on_covering_radius() {
        let inputs = BoundInputs::new(vec![0.5, 0.5], vec![MeanLaw::gaussian(0.0, 1.0); 2], 0.1, 0.1);
        assert!(mc_verify_bound(&inputs, 0.01, 100, 1, 1).is_err());
        assert!(mc_verify_bound(&inputs, 0.03 * 0.03, 100, 1, 1).is_ok());
    }

    #[test]
    fn json_schema_fields() {
        let text = r#"{"weights":[0.5,0.5],"mean_laws":[{"family":"gaussian","mu0":0.0,"param":1.0},
            {"family":"two_point","mu0":0.0,"param":1.0}],"r_x":0.1,"delta":0.1,"d_variant":"proof"}"#;
        let b: BoundInputs = serde_json::from_str(text).unwrap();
        assert_eq!(b.d_variant, SpreadVariant::Proof);
        assert_eq!(b.mean_laws[1].family, MeanFamily::TwoPoint);
    }
}
