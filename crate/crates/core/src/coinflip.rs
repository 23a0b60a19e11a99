//! Coin-flip experiment: exact Poisson-binomial targets, seeded datasets, a
//! linear quadratic-loss learner and a two-latent task that hallucinates.
//!
//! A task holds `2N` coins with distinct head probabilities. Each latent
//! state shows a label (a subset of coins, encoded as a binary vector) and
//! flips a subset of coins; usually the two coincide, but a label may hide
//! which subset was actually flipped.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HalluError, Result};
use crate::mixture::validate_weights;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CoinSet {
    head_probs: Vec<f64>,
}

impl CoinSet {
    pub fn new(head_probs: Vec<f64>) -> Result<Self> {
        if head_probs.is_empty() {
            return Err(HalluError::input("coin set is empty"));
        }
        if let Some(p) = head_probs.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(HalluError::input(format!("head probability {p} outside (0, 1)")));
        }
        let mut sorted = head_probs.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(HalluError::input("head probabilities must be pairwise distinct"));
        }
        Ok(Self { head_probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.head_probs
    }

    pub fn len(&self) -> usize {
        self.head_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.head_probs.is_empty()
    }
}

impl TryFrom<Vec<f64>> for CoinSet {
    type Error = HalluError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<CoinSet> for Vec<f64> {
    fn from(c: CoinSet) -> Self {
        c.head_probs
    }
}

/// One latent state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoinState {
    /// Coins shown in the input encoding.
    pub label: Vec<usize>,
    /// Coins actually flipped.
    pub coins: Vec<usize>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCoinTask {
    pub coins: CoinSet,
    pub states: Vec<CoinState>,
}

impl LatentCoinTask {
    pub fn new(coins: CoinSet, states: Vec<CoinState>) -> Result<Self> {
        if states.is_empty() {
            return Err(HalluError::input("task needs at least one state"));
        }
        let probs: Vec<f64> = states.iter().map(|s| s.prob).collect();
        validate_weights(&probs)?;
        for (i, s) in states.iter().enumerate() {
            if s.coins.is_empty() || s.label.is_empty() {
                return Err(HalluError::input(format!("state {i} has an empty subset")));
            }
            for set in [&s.coins, &s.label] {
                if let Some(j) = set.iter().find(|j| **j >= coins.len()) {
                    return Err(HalluError::input(format!("state {i} refers to coin {j} of {}", coins.len())));
                }
                let mut uniq = set.clone();
                uniq.sort_unstable();
                uniq.dedup();
                if uniq.len() != set.len() {
                    return Err(HalluError::input(format!("state {i} repeats a coin")));
                }
            }
        }
        Ok(Self { coins, states })
    }

    /// States whose label is the flipped subset itself.
    pub fn visible(coins: CoinSet, subsets: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        let states = subsets
            .into_iter()
            .map(|(coins, prob)| CoinState { label: coins.clone(), coins, prob })
            .collect();
        Self::new(coins, states)
    }

    /// Two states with the same label covering both subsets: the input does
    /// not reveal which subset was flipped.
    pub fn hidden_pair(coins: CoinSet, a: Vec<usize>, b: Vec<usize>, prob_a: f64) -> Result<Self> {
        let mut label: Vec<usize> = a.iter().chain(&b).copied().collect();
        label.sort_unstable();
        label.dedup();
        Self::new(
            coins,
            vec![
                CoinState { label: label.clone(), coins: a, prob: prob_a },
                CoinState { label, coins: b, prob: 1.0 - prob_a },
            ],
        )
    }

    /// `2n` coins: the first `n` near `p`, the rest mirrored to `1 − p`,
    /// spread by `jitter` so all probabilities are distinct; two equally
    /// likely states share one label.
    pub fn mirrored_demo(n: usize, p: f64, jitter: f64) -> Result<Self> {
        if n == 0 {
            return Err(HalluError::input("demo needs at least one coin per state"));
        }
        let low: Vec<f64> = (0..n).map(|j| p + (j as f64 - (n as f64 - 1.0) / 2.0) * jitter).collect();
        let probs: Vec<f64> = low.iter().copied().chain(low.iter().map(|q| 1.0 - q)).collect();
        Self::hidden_pair(CoinSet::new(probs)?, (0..n).collect(), (n..2 * n).collect(), 0.5)
    }

    pub fn n_coins(&self) -> usize {
        self.coins.len()
    }

    pub fn encoding(&self, state: usize) -> Vec<u8> {
        let mut e = vec![0u8; self.n_coins()];
        for &j in &self.states[state].label {
            e[j] = 1;
        }
        e
    }

    pub fn state_probs(&self, state: usize) -> Vec<f64> {
        self.states[state].coins.iter().map(|&j| self.coins.probs()[j]).collect()
    }

    pub fn state_mean(&self, state: usize) -> f64 {
        self.state_probs(state).iter().sum()
    }

    /// `(Pr[z | encoding], head probabilities of z)` for every state with that label.
    pub fn conditional_laws(&self, encoding: &[u8]) -> Result<Vec<(f64, Vec<f64>)>> {
        if encoding.len() != self.n_coins() {
            return Err(HalluError::input(format!(
                "encoding has {} bits for {} coins",
                encoding.len(),
                self.n_coins()
            )));
        }
        let matches: Vec<usize> = (0..self.states.len())
            .filter(|&i| self.states[i].prob > 0.0 && self.encoding(i) == encoding)
            .collect();
        let total: f64 = matches.iter().map(|&i| self.states[i].prob).sum();
        if matches.is_empty() {
            return Err(HalluError::input("encoding matches no state"));
        }
        Ok(matches.into_iter().map(|i| (self.states[i].prob / total, self.state_probs(i))).collect())
    }
}

/// Exact law of the number of heads among independent coins, by the
/// convolution recurrence.
pub fn poisson_binomial_pmf(probs: &[f64]) -> Result<Vec<f64>> {
    if probs.is_empty() {
        return Err(HalluError::input("empty coin subset"));
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(HalluError::input(format!("head probability {p} outside [0, 1]")));
    }
    let mut f = vec![0.0; probs.len() + 1];
    f[0] = 1.0;
    for (j, &p) in probs.iter().enumerate() {
        for k in (1..=j + 1).rev() {
            f[k] = f[k] * (1.0 - p) + f[k - 1] * p;
        }
        f[0] *= 1.0 - p;
    }
    Ok(f)
}

/// pmf of `k` heads, zero outside the support.
pub fn pmf_at(pmf: &[f64], k: i64) -> f64 {
    if k < 0 {
        0.0
    } else {
        pmf.get(k as usize).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipRow {
    pub encoding: Vec<u8>,
    /// Generating state, kept so conditional probabilities can be scored.
    pub state: usize,
    pub heads: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlipDataset {
    pub n_coins: usize,
    pub rows: Vec<FlipRow>,
}

impl FlipDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Columns `c0..c{n-1},state,heads`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..self.n_coins).map(|j| format!("c{j}")).collect();
        header.push("state".into());
        header.push("heads".into());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec: Vec<String> = row.encoding.iter().map(|b| b.to_string()).collect();
            rec.push(row.state.to_string());
            rec.push(row.heads.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let n_coins = r.headers()?.len().checked_sub(2).ok_or_else(|| HalluError::input("flip CSV needs coin columns"))?;
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |s: &str| s.trim().parse::<u64>().map_err(|_| HalluError::input(format!("bad field {s:?}")));
            let mut encoding = Vec::with_capacity(n_coins);
            for j in 0..n_coins {
                match parse(&rec[j])? {
                    b @ (0 | 1) => encoding.push(b as u8),
                    b => return Err(HalluError::input(format!("encoding bit {b} is not 0/1"))),
                }
            }
            let state = parse(&rec[n_coins])? as usize;
            let heads = parse(&rec[n_coins + 1])? as u32;
            if heads as usize > n_coins {
                return Err(HalluError::input("head count exceeds coin count"));
            }
            rows.push(FlipRow { encoding, state, heads });
        }
        Ok(Self { n_coins, rows })
    }
}

/// Draw `m` rows: a latent state, then its flipped coins.
pub fn generate_dataset(task: &LatentCoinTask, m: usize, seed: u64) -> Result<FlipDataset> {
    generate_labeled(task, m, seed, "coinflip/data")
}

fn generate_labeled(task: &LatentCoinTask, m: usize, seed: u64, label: &str) -> Result<FlipDataset> {
    if m == 0 {
        return Err(HalluError::input("need at least one flip (M ≥ 1)"));
    }
    let weights: Vec<f64> = task.states.iter().map(|s| s.prob).collect();
    let pick = WeightedIndex::new(&weights).map_err(|e| HalluError::input(e.to_string()))?;
    let encodings: Vec<Vec<u8>> = (0..task.states.len()).map(|i| task.encoding(i)).collect();
    let probs: Vec<Vec<f64>> = (0..task.states.len()).map(|i| task.state_probs(i)).collect();
    let rows = rng::partitions(m)
        .par_iter()
        .flat_map_iter(|&(idx, count)| {
            let mut r = rng::partition(seed, label, idx);
            (0..count)
                .map(|_| {
                    let state = pick.sample(&mut r);
                    let heads = probs[state].iter().filter(|p| r.random::<f64>() < **p).count() as u32;
                    FlipRow { encoding: encodings[state].clone(), state, heads }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(FlipDataset { n_coins: task.n_coins(), rows })
}

/// Conditional mean of the head count given the label.
pub fn bayes_prediction(task: &LatentCoinTask, encoding: &[u8]) -> Result<f64> {
    Ok(task
        .conditional_laws(encoding)?
        .iter()
        .map(|(w, probs)| w * probs.iter().sum::<f64>())
        .sum())
}

/// Bias-free linear map from the binary encoding to a predicted count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(n: usize) -> Self {
        Self { weights: vec![0.0; n] }
    }

    pub fn predict(&self, encoding: &[u8]) -> f64 {
        self.weights.iter().zip(encoding).filter(|(_, b)| **b == 1).map(|(w, _)| w).sum()
    }

    pub fn mse(&self, data: &FlipDataset) -> f64 {
        data.rows.iter().map(|r| (self.predict(&r.encoding) - r.heads as f64).powi(2)).sum::<f64>()
            / data.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Minibatch size; 0 means full batch (plain gradient descent).
    #[serde(default)]
    pub batch_size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub loss: f64,
    pub mean_conditional_pmf: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub rows: Vec<TraceRow>,
}

impl TrainingTrace {
    pub fn initial(&self) -> Option<&TraceRow> {
        self.rows.first()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Average, over `data`, of the generating state's exact pmf at the rounded
/// prediction (nearest integer, ties to even).
pub fn mean_conditional_pmf(task: &LatentCoinTask, model: &LinearModel, data: &FlipDataset) -> Result<f64> {
    let pmfs: Vec<Vec<f64>> =
        (0..task.states.len()).map(|i| poisson_binomial_pmf(&task.state_probs(i))).collect::<Result<_>>()?;
    let mut total = 0.0;
    for row in &data.rows {
        let pmf = pmfs
            .get(row.state)
            .ok_or_else(|| HalluError::input(format!("row names unknown state {}", row.state)))?;
        total += pmf_at(pmf, round_count(model.predict(&row.encoding)));
    }
    Ok(total / data.len() as f64)
}

fn round_count(x: f64) -> i64 {
    x.round_ties_even() as i64
}

const DIVERGENCE: f64 = 1e12;

/// SGD on mean squared error from the all-zeros model. The trace holds one
/// row per epoch, starting with the untrained model at epoch 0.
pub fn train_estimator(
    task: &LatentCoinTask,
    train: &FlipDataset,
    validation: &FlipDataset,
    cfg: &TrainConfig,
) -> Result<(LinearModel, TrainingTrace)> {
    if train.is_empty() || validation.is_empty() {
        return Err(HalluError::input("training and validation sets must be nonempty"));
    }
    if train.n_coins != task.n_coins() {
        return Err(HalluError::input("dataset and task disagree on coin count"));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(HalluError::input("learning rate must be positive"));
    }
    let n = task.n_coins();
    let mut model = LinearModel::zeros(n);
    let mut trace = TrainingTrace::default();
    let record = |model: &LinearModel, epoch: usize, trace: &mut TrainingTrace| -> Result<()> {
        let loss = model.mse(train);
        if !(loss <= DIVERGENCE) {
            return Err(HalluError::Numerical(format!("training diverged at epoch {epoch} (loss {loss:e})")));
        }
        let mean_conditional_pmf = mean_conditional_pmf(task, model, validation)?;
        trace.rows.push(TraceRow { epoch, loss, mean_conditional_pmf });
        Ok(())
    };
    record(&model, 0, &mut trace)?;

    let batch = if cfg.batch_size == 0 { train.len() } else { cfg.batch_size.min(train.len()) };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut r = rng::stream(cfg.seed, "coinflip/sgd");
    let mut grad = vec![0.0; n];
    for epoch in 1..=cfg.epochs {
        if batch < train.len() {
            order.shuffle(&mut r);
        }
        for chunk in order.chunks(batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in chunk {
                let row = &train.rows[i];
                let resid = model.predict(&row.encoding) - row.heads as f64;
                for (g, b) in grad.iter_mut().zip(&row.encoding) {
                    if *b == 1 {
                        *g += resid;
                    }
                }
            }
            let scale = 2.0 * cfg.learning_rate / chunk.len() as f64;
            for (w, g) in model.weights.iter_mut().zip(&grad) {
                *w -= scale * g;
            }
        }
        record(&model, epoch, &mut trace)?;
    }
    Ok((model, trace))
}

/// Minimum-norm least-squares weights, `(XᵀX)⁺ Xᵀy`; gradient descent from
/// zero converges to this point.
pub fn least_squares_solution(data: &FlipDataset) -> Result<LinearModel> {
    if data.is_empty() {
        return Err(HalluError::input("empty dataset"));
    }
    let n = data.n_coins;
    let mut xtx = DMatrix::<f64>::zeros(n, n);
    let mut xty = DVector::<f64>::zeros(n);
    for row in &data.rows {
        let on: Vec<usize> = (0..n).filter(|&j| row.encoding[j] == 1).collect();
        for &a in &on {
            xty[a] += row.heads as f64;
            for &b in &on {
                xtx[(a, b)] += 1.0;
            }
        }
    }
    let pinv = xtx.pseudo_inverse(1e-9).map_err(|e| HalluError::Numerical(e.to_string()))?;
    Ok(LinearModel { weights: (pinv * xty).iter().copied().collect() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoVerdict {
    pub prediction: f64,
    pub rounded: i64,
    pub pmf_per_state: Vec<f64>,
    pub delta: f64,
    pub hallucinates: bool,
}

/// Bayes prediction over weighted states, rounded, then scored under each
/// state's exact count law.
pub fn hallucination_demo(states: &[(f64, Vec<f64>)], delta: f64) -> Result<DemoVerdict> {
    let weights: Vec<f64> = states.iter().map(|s| s.0).collect();
    validate_weights(&weights)?;
    crate::regions::check_delta(delta)?;
    let prediction: f64 = states.iter().map(|(w, p)| w * p.iter().sum::<f64>()).sum();
    let rounded = round_count(prediction);
    let pmf_per_state: Vec<f64> = states
        .iter()
        .map(|(_, p)| poisson_binomial_pmf(p).map(|pmf| pmf_at(&pmf, rounded)))
        .collect::<Result<_>>()?;
    let hallucinates = pmf_per_state.iter().all(|f| *f <= delta);
    Ok(DemoVerdict { prediction, rounded, pmf_per_state, delta, hallucinates })
}

/// Demo and training run, as driven from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoinflipConfig {
    #[serde(default = "crate::report::schema_v1")]
    pub schema: String,
    /// Coins per state (the task has twice as many).
    #[serde(default = "default_coins")]
    pub coins_per_state: usize,
    #[serde(default = "default_p")]
    pub head_prob: f64,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    #[serde(default = "default_flips")]
    pub flips: usize,
    #[serde(default = "default_validation")]
    pub validation_flips: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_coins() -> usize {
    20
}
fn default_p() -> f64 {
    0.05
}
fn default_jitter() -> f64 {
    1e-6
}
fn default_flips() -> usize {
    20_000
}
fn default_validation() -> usize {
    2_000
}
fn default_delta() -> f64 {
    0.01
}
fn default_epochs() -> usize {
    10
}
fn default_lr() -> f64 {
    0.005
}
fn default_batch() -> usize {
    64
}

impl Default for CoinflipConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoinflipOutcome {
    pub verdict: DemoVerdict,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub loss_reduction: f64,
    pub final_mean_conditional_pmf: f64,
    pub model: LinearModel,
    #[serde(skip)]
    pub trace: TrainingTrace,
    #[serde(skip)]
    pub train: FlipDataset,
}

/// Build the mirrored two-latent task, check the δ verdict, and train the
/// linear learner on data drawn from it.
pub fn run_coinflip(cfg: &CoinflipConfig, seed: u64) -> Result<CoinflipOutcome> {
    let task = LatentCoinTask::mirrored_demo(cfg.coins_per_state, cfg.head_prob, cfg.jitter)?;
    let laws = task.conditional_laws(&task.encoding(0))?;
    let verdict = hallucination_demo(&laws, cfg.delta)?;
    let train = generate_dataset(&task, cfg.flips, seed)?;
    let validation = generate_labeled(&task, cfg.validation_flips, seed, "coinflip/validation")?;
    let tc = TrainConfig { epochs: cfg.epochs, learning_rate: cfg.learning_rate, batch_size: cfg.batch_size, seed };
    let (model, trace) = train_estimator(&task, &train, &validation, &tc)?;
    let initial_loss = trace.initial().expect("trace starts at epoch 0").loss;
    let last = *trace.last().expect("trace nonempty");
    Ok(CoinflipOutcome {
        verdict,
        initial_loss,
        final_loss: last.loss,
        loss_reduction: 1.0 - last.loss / initial_loss,
        final_mean_conditional_pmf: last.mean_conditional_pmf,
        model,
        trace,
        train,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enumerate(probs: &[f64]) -> Vec<f64> {
        let n = probs.len();
        let mut f = vec![0.0; n + 1];
        for mask in 0u32..(1 << n) {
            let mut w = 1.0;
            for (j, p) in probs.iter().enumerate() {
                w *= if mask >> j & 1 == 1 { *p } else { 1.0 - p };
            }
            f[mask.count_ones() as usize] += w;
        }
        f
    }

    #[test]
    fn fair_pair() {
        assert_eq!(poisson_binomial_pmf(&[0.5, 0.5]).unwrap(), vec![0.25, 0.5, 0.25]);
        assert!(poisson_binomial_pmf(&[]).is_err());
    }

    #[test]
    fn near_certain_coin() {
        let f = poisson_binomial_pmf(&[0.9999, 0.3]).unwrap();
        let e = enumerate(&[0.9999, 0.3]);
        assert!((f[0] - 0.00007).abs() < 1e-9);
        for (a, b) in f.iter().zip(&e) {
            assert!((a - b).abs() < 1e-15);
        }
        let g = poisson_binomial_pmf(&[1.0 - 1e-15, 0.3]).unwrap();
        assert!(g.iter().all(|x| x.is_finite() && *x >= 0.0));
    }

    #[test]
    fn binomial_tail_value() {
        let pmf = poisson_binomial_pmf(&[0.05; 20]).unwrap();
        let exact = 184_756.0 * 0.05f64.powi(10) * 0.95f64.powi(10);
        assert!((pmf[10] - exact).abs() < 1e-20);
        assert!((pmf[10] - 1.08e-8).abs() < 0.01e-8);
    }

    #[test]
    fn coin_set_rules() {
        assert!(CoinSet::new(vec![0.2, 0.2]).is_err());
        assert!(CoinSet::new(vec![0.0, 0.2]).is_err());
        assert!(CoinSet::new(vec![0.1, 0.2]).is_ok());
    }

    #[test]
    fn bayes_prediction_examples() {
        let coins = CoinSet::new(vec![0.8, 0.9, 0.7, 0.6, 0.2]).unwrap();
        let task = LatentCoinTask::visible(coins.clone(), vec![(vec![0, 1, 2, 3, 4], 1.0)]).unwrap();
        assert!((bayes_prediction(&task, &task.encoding(0)).unwrap() - 3.2).abs() < 1e-12);
        let task = LatentCoinTask::visible(coins, vec![(vec![0], 1.0)]).unwrap();
        assert!(bayes_prediction(&task, &[0, 1, 0, 0, 0]).is_err());

        let demo = LatentCoinTask::mirrored_demo(20, 0.05, 1e-6).unwrap();
        assert_eq!(bayes_prediction(&demo, &demo.encoding(0)).unwrap(), 10.0);
    }

    #[test]
    fn zero_flips_rejected() {
        let task = LatentCoinTask::mirrored_demo(2, 0.3, 0.01).unwrap();
        assert!(generate_dataset(&task, 0, 1).is_err());
    }

    #[test]
    fn ties_round_to_even() {
        assert_eq!(round_count(2.5), 2);
        assert_eq!(round_count(3.5), 4);
        assert_eq!(round_count(-0.4), 0);
    }

    #[test]
    fn untrained_loss_is_mean_square() {
        let task = LatentCoinTask::mirrored_demo(3, 0.2, 0.01).unwrap();
        let data = generate_dataset(&task, 500, 3).unwrap();
        let cfg = TrainConfig { epochs: 0, learning_rate: 0.01, batch_size: 0, seed: 1 };
        let (_, trace) = train_estimator(&task, &data, &data, &cfg).unwrap();
        let ms = data.rows.iter().map(|r| (r.heads as f64).powi(2)).sum::<f64>() / 500.0;
        assert_eq!(trace.rows.len(), 1);
        assert!((trace.rows[0].loss - ms).abs() < 1e-9);
    }

    #[test]
    fn divergence_is_reported() {
        let task = LatentCoinTask::mirrored_demo(10, 0.2, 0.01).unwrap();
        let data = generate_dataset(&task, 200, 3).unwrap();
        let cfg = TrainConfig { epochs: 200, learning_rate: 5.0, batch_size: 0, seed: 1 };
        assert!(matches!(train_estimator(&task, &data, &data, &cfg), Err(HalluError::Numerical(_))));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let task = LatentCoinTask::mirrored_demo(2, 0.3, 0.01).unwrap();
        let data = generate_dataset(&task, 20, 9).unwrap();
        let path = dir.path().join("flips.csv");
        data.write_csv(&path).unwrap();
        assert_eq!(FlipDataset::read_csv(&path).unwrap(), data);
    }
}
