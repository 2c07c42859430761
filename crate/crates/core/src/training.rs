//! Contrastive training of the bi-encoder on noisy positive pairs.
//!
//! The loss is an in-batch softmax over article candidates, scaled by a
//! trainable temperature and weighted per pair by a soft label that is
//! refurbished each epoch from the model's own predictions.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Qrels;
use crate::encoder::{EncodedInput, EncoderModel, Forward, Gradients};
use crate::error::{Error, Result};
use crate::evalmetrics::{evaluate, RankedList};

/// Lower bound for the temperature.
pub const TAU_MIN: f64 = 1e-3;

/// Loss value and gradients with respect to both embedding matrices and τ.
#[derive(Debug, Clone)]
pub struct MnrOutput {
    pub loss: f64,
    pub grad_c: Array2<f64>,
    pub grad_v: Array2<f64>,
    pub grad_tau: f64,
}

/// Row-wise softmax of `s / tau`.
fn softmax_rows(s: &Array2<f64>, tau: f64) -> (Array2<f64>, Array1<f64>) {
    let mut p = s / tau;
    let mut lse = Array1::zeros(s.nrows());
    for (i, mut row) in p.axis_iter_mut(Axis(0)).enumerate() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row /= sum;
        lse[i] = max + sum.ln();
    }
    (p, lse)
}

/// Label-weighted in-batch ranking loss.
///
/// `L = -(1/m) Σ_i a_i (s_ii/τ - log Σ_j exp(s_ij/τ))` with `s = C Vᵀ`,
/// `a_i = y_i` or `y_i²` when `weighted`.
pub fn mnr_loss(c: &Array2<f64>, v: &Array2<f64>, y: &[f64], tau: f64, weighted: bool) -> Result<MnrOutput> {
    let m = c.nrows();
    if m == 0 || v.nrows() != m || c.ncols() != v.ncols() || y.len() != m {
        return Err(Error::Config(format!(
            "inconsistent batch shapes: C {:?}, V {:?}, labels {}",
            c.shape(),
            v.shape(),
            y.len()
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::Config(format!("temperature must be positive, got {tau}")));
    }
    let s = c.dot(&v.t());
    let (p, lse) = softmax_rows(&s, tau);
    let a: Vec<f64> = y.iter().map(|&y| if weighted { y * y } else { y }).collect();
    let mf = m as f64;

    let mut loss = 0.0;
    let mut grad_tau = 0.0;
    let mut g = Array2::zeros((m, m));
    for i in 0..m {
        loss -= a[i] * (s[[i, i]] / tau - lse[i]);
        let expected: f64 = (0..m).map(|j| p[[i, j]] * s[[i, j]]).sum();
        grad_tau += a[i] * (s[[i, i]] - expected);
        for j in 0..m {
            let delta = if i == j { 1.0 } else { 0.0 };
            g[[i, j]] = -a[i] * (delta - p[[i, j]]) / (tau * mf);
        }
    }
    loss /= mf;
    grad_tau /= mf * tau * tau;
    if !loss.is_finite() || !grad_tau.is_finite() {
        return Err(Error::Numerical(format!("loss {loss}, dL/dtau {grad_tau}")));
    }
    Ok(MnrOutput {
        loss,
        grad_c: g.dot(v),
        grad_v: g.t().dot(c),
        grad_tau,
    })
}

/// Momentum mix of current labels and predictions.
pub fn refurbish(y: &[f64], y_hat: &[f64], alpha: f64) -> Vec<f64> {
    y.iter()
        .zip(y_hat)
        .map(|(&y, &p)| (alpha * y + (1.0 - alpha) * p).clamp(0.0, 1.0))
        .collect()
}

/// How the per-pair model prediction is read off a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prediction {
    /// Probability that the pair's own article wins the in-batch softmax.
    #[default]
    Softmax,
    /// `(1 + cos) / 2` of the pair's own similarity.
    Cosine01,
}

impl FromStr for Prediction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax" => Ok(Prediction::Softmax),
            "cosine01" => Ok(Prediction::Cosine01),
            _ => Err(Error::Config(format!("unknown prediction `{s}`"))),
        }
    }
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Prediction::Softmax => "softmax",
            Prediction::Cosine01 => "cosine01",
        })
    }
}

pub fn model_prediction(c: &Array2<f64>, v: &Array2<f64>, tau: f64, kind: Prediction) -> Vec<f64> {
    let s = c.dot(&v.t());
    match kind {
        Prediction::Softmax => {
            let (p, _) = softmax_rows(&s, tau);
            p.diag().to_vec()
        }
        Prediction::Cosine01 => s.diag().iter().map(|&x| ((1.0 + x) / 2.0).clamp(0.0, 1.0)).collect(),
    }
}

/// Order examples so that consecutive runs of `group_size` are nearest
/// neighbours under cosine similarity.
///
/// Groups are grown greedily from seeds visited in random order; each seed
/// takes its most similar unassigned examples (ties by index). Groups are
/// then shuffled and concatenated.
pub fn group_shuffle(embeddings: &Array2<f64>, group_size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = embeddings.nrows();
    let mut seeds: Vec<usize> = (0..n).collect();
    seeds.shuffle(rng);
    if group_size <= 1 {
        return seeds;
    }
    let sims = embeddings.dot(&embeddings.t());
    let mut assigned = vec![false; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &seed in &seeds {
        if assigned[seed] {
            continue;
        }
        assigned[seed] = true;
        let mut rest: Vec<usize> = (0..n).filter(|&j| !assigned[j]).collect();
        rest.sort_by(|&a, &b| sims[[seed, b]].total_cmp(&sims[[seed, a]]).then(a.cmp(&b)));
        let mut group = vec![seed];
        for j in rest.into_iter().take(group_size - 1) {
            assigned[j] = true;
            group.push(j);
        }
        groups.push(group);
    }
    groups.shuffle(rng);
    groups.concat()
}

/// Decoupled-weight-decay Adam.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: i32,
}

#[derive(Debug, Clone)]
pub struct Moments<D: ndarray::Dimension> {
    m: ndarray::Array<f64, D>,
    v: ndarray::Array<f64, D>,
}

impl<D: ndarray::Dimension> Moments<D> {
    pub fn zeros_like(a: &ndarray::Array<f64, D>) -> Self {
        Moments {
            m: ndarray::Array::zeros(a.raw_dim()),
            v: ndarray::Array::zeros(a.raw_dim()),
        }
    }
}

impl AdamW {
    pub fn new(beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Self {
        AdamW {
            beta1,
            beta2,
            eps,
            weight_decay,
            t: 0,
        }
    }

    /// Advance the shared step counter; call once per optimizer step.
    pub fn tick(&mut self) {
        self.t += 1;
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn update<D: ndarray::Dimension>(
        &self,
        param: &mut ndarray::Array<f64, D>,
        grad: &ndarray::Array<f64, D>,
        state: &mut Moments<D>,
        lr: f64,
        decay: bool,
    ) {
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let wd = if decay { self.weight_decay } else { 0.0 };
        ndarray::Zip::from(param)
            .and(grad)
            .and(&mut state.m)
            .and(&mut state.v)
            .for_each(|p, &g, m, v| {
                *p -= lr * wd * *p;
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            });
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub tau_lr: f64,
    pub tau_init: f64,
    pub train_tau: bool,
    /// Logits are `sim_scale * cos / tau`.
    pub sim_scale: f64,
    pub alpha: f64,
    /// First epoch (1-based) after which labels are refurbished; 0 disables.
    pub refurbish_start: usize,
    pub batch_size: usize,
    pub group_size: usize,
    pub group_shuffle: bool,
    pub epochs: usize,
    pub seed: u64,
    pub weighted: bool,
    /// Evaluate every N steps as well as each epoch; 0 means epochs only.
    pub eval_every: usize,
    pub warmup: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub prediction: Prediction,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-5,
            tau_lr: 0.4,
            tau_init: 1.0,
            train_tau: true,
            sim_scale: 20.0,
            alpha: 0.9,
            refurbish_start: 2,
            batch_size: 8,
            group_size: 4,
            group_shuffle: true,
            epochs: 10,
            seed: 42,
            weighted: true,
            eval_every: 250,
            warmup: 0.1,
            weight_decay: 1e-8,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            prediction: Prediction::Softmax,
        }
    }
}

impl TrainConfig {
    /// Plain in-batch training: fixed τ = 1, no refurbishment, no grouping.
    pub fn baseline() -> Self {
        TrainConfig {
            train_tau: false,
            tau_init: 1.0,
            refurbish_start: 0,
            group_shuffle: false,
            weighted: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.batch_size == 0 || self.group_size == 0 {
            return bad("batch_size and group_size must be positive");
        }
        if self.group_shuffle && !self.batch_size.is_multiple_of(self.group_size) {
            return bad("group_size must divide batch_size");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        if !(self.tau_init > TAU_MIN) {
            return bad("tau_init must exceed the temperature floor");
        }
        if !(0.0..1.0).contains(&self.warmup) {
            return bad("warmup must lie in [0, 1)");
        }
        if !(self.sim_scale > 0.0) {
            return bad("sim_scale must be positive");
        }
        if !(self.lr >= 0.0 && self.tau_lr >= 0.0) {
            return bad("learning rates must be non-negative");
        }
        Ok(())
    }

    /// Linear warmup then linear decay to zero.
    pub fn schedule(&self, step: usize, total: usize) -> f64 {
        let warm = (self.warmup * total as f64).ceil() as usize;
        if step < warm {
            (step + 1) as f64 / warm as f64
        } else {
            let rest = total.saturating_sub(warm).max(1);
            (total.saturating_sub(step) as f64 / rest as f64).clamp(0.0, 1.0)
        }
    }
}

/// One training example.
#[derive(Debug, Clone)]
pub struct TrainPair {
    pub tweet: EncodedInput,
    pub article: EncodedInput,
    pub label: f64,
}

/// Held-out queries ranked against a fixed article collection.
#[derive(Debug, Clone)]
pub struct DevSet {
    pub queries: Vec<(String, EncodedInput)>,
    pub articles: Vec<(String, EncodedInput)>,
    pub qrels: Qrels,
}

impl DevSet {
    pub fn rank(&self, model: &EncoderModel, k: usize) -> Result<Vec<RankedList>> {
        let mut docs = Array2::zeros((self.articles.len(), model.hidden()));
        for (i, (_, a)) in self.articles.iter().enumerate() {
            docs.row_mut(i).assign(&model.encode(a)?);
        }
        self.queries
            .iter()
            .map(|(qid, q)| {
                let scores = docs.dot(&model.encode(q)?);
                let scored = self
                    .articles
                    .iter()
                    .zip(scores.iter())
                    .map(|((id, _), &s)| (id.clone(), s))
                    .collect();
                let mut run = RankedList::from_scores(qid.clone(), scored)?;
                run.truncate(k);
                Ok(run)
            })
            .collect()
    }

    pub fn map_at_5(&self, model: &EncoderModel) -> Result<f64> {
        Ok(evaluate(&self.rank(model, 100)?, &self.qrels)?.map_at(5))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub tau: f64,
    pub mean_label: f64,
    pub dev_map5: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    /// Best checkpoint when a dev set is given, otherwise the final model.
    pub model: EncoderModel,
    pub tau: f64,
    pub labels: Vec<f64>,
    pub epoch: usize,
    pub steps: usize,
    pub best_dev_map5: Option<f64>,
    pub history: Vec<EpochLog>,
    /// Per-step batch losses.
    pub losses: Vec<f64>,
}

/// Training stopped on a non-finite value; `checkpoint` holds the last
/// state whose parameters were all finite.
#[derive(Debug)]
pub struct TrainError {
    pub error: Error,
    pub checkpoint: Box<TrainState>,
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (stopped after {} steps)", self.error, self.checkpoint.steps)
    }
}

impl std::error::Error for TrainError {}

impl From<TrainError> for Error {
    fn from(e: TrainError) -> Self {
        e.error
    }
}

struct Optim {
    adam: AdamW,
    emb: Moments<ndarray::Ix2>,
    proj: Moments<ndarray::Ix2>,
    bias: Moments<ndarray::Ix1>,
    tau: Moments<ndarray::Ix1>,
}

struct BatchResult {
    loss: f64,
    grads: Gradients,
    grad_tau: f64,
}

fn encode_rows(model: &EncoderModel, inputs: &[&EncodedInput]) -> Result<(Vec<Forward>, Array2<f64>)> {
    let mut rows = Array2::zeros((inputs.len(), model.hidden()));
    let mut fwds = Vec::with_capacity(inputs.len());
    for (i, x) in inputs.iter().enumerate() {
        let f = model.forward(x)?;
        rows.row_mut(i).assign(&f.output);
        fwds.push(f);
    }
    Ok((fwds, rows))
}

fn batch_step(
    model: &EncoderModel,
    pairs: &[TrainPair],
    idx: &[usize],
    labels: &[f64],
    tau: f64,
    scale: f64,
    weighted: bool,
) -> Result<BatchResult> {
    let tweets: Vec<&EncodedInput> = idx.iter().map(|&i| &pairs[i].tweet).collect();
    let articles: Vec<&EncodedInput> = idx.iter().map(|&i| &pairs[i].article).collect();
    let (fc, c) = encode_rows(model, &tweets)?;
    let (fv, v) = encode_rows(model, &articles)?;
    let y: Vec<f64> = idx.iter().map(|&i| labels[i]).collect();
    let out = mnr_loss(&c, &v, &y, tau / scale, weighted)?;
    let mut grads = Gradients::zeros(model);
    for (k, f) in fc.iter().enumerate() {
        model.backward(f, out.grad_c.row(k), &mut grads);
    }
    for (k, f) in fv.iter().enumerate() {
        model.backward(f, out.grad_v.row(k), &mut grads);
    }
    Ok(BatchResult {
        loss: out.loss,
        grads,
        grad_tau: out.grad_tau / scale,
    })
}

fn apply_step(model: &mut EncoderModel, tau: &mut f64, opt: &mut Optim, r: &BatchResult, lr: f64, tau_lr: Option<f64>) {
    opt.adam.tick();
    let mut dense = Array2::zeros(model.embeddings.raw_dim());
    for (&row, g) in &r.grads.embeddings {
        dense.row_mut(row as usize).assign(g);
    }
    opt.adam.update(&mut model.embeddings, &dense, &mut opt.emb, lr, true);
    opt.adam.update(&mut model.projection, &r.grads.projection, &mut opt.proj, lr, true);
    opt.adam.update(&mut model.bias, &r.grads.bias, &mut opt.bias, lr, true);
    if let Some(tlr) = tau_lr {
        let mut t = Array1::from(vec![*tau]);
        opt.adam.update(&mut t, &Array1::from(vec![r.grad_tau]), &mut opt.tau, tlr, false);
        *tau = t[0].max(TAU_MIN);
    }
}

/// Encode every tweet and group similar ones into consecutive runs.
fn epoch_order(model: &EncoderModel, pairs: &[TrainPair], cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if !cfg.group_shuffle {
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(rng);
        return Ok(order);
    }
    let tweets: Vec<&EncodedInput> = pairs.iter().map(|p| &p.tweet).collect();
    let (_, emb) = encode_rows(model, &tweets)?;
    Ok(group_shuffle(&emb, cfg.group_size, rng))
}

/// Predictions for every pair, computed batch by batch with the model as
/// it stands at the end of the epoch.
fn predict_epoch(
    model: &EncoderModel,
    pairs: &[TrainPair],
    batches: &[Vec<usize>],
    tau: f64,
    kind: Prediction,
) -> Result<Vec<f64>> {
    let mut y_hat = vec![0.0; pairs.len()];
    for idx in batches {
        let tweets: Vec<&EncodedInput> = idx.iter().map(|&i| &pairs[i].tweet).collect();
        let articles: Vec<&EncodedInput> = idx.iter().map(|&i| &pairs[i].article).collect();
        let (_, c) = encode_rows(model, &tweets)?;
        let (_, v) = encode_rows(model, &articles)?;
        for (k, p) in model_prediction(&c, &v, tau, kind).into_iter().enumerate() {
            y_hat[idx[k]] = p;
        }
    }
    Ok(y_hat)
}

/// Train `model` on `pairs`. With a dev set, the returned model is the
/// checkpoint with the best dev MAP@5.
pub fn train(
    model: EncoderModel,
    pairs: &[TrainPair],
    cfg: &TrainConfig,
    dev: Option<&DevSet>,
) -> std::result::Result<TrainState, TrainError> {
    let mut state = TrainState {
        tau: cfg.tau_init,
        labels: pairs.iter().map(|p| p.label.clamp(0.0, 1.0)).collect(),
        model,
        epoch: 0,
        steps: 0,
        best_dev_map5: None,
        history: Vec::new(),
        losses: Vec::new(),
    };
    let fail = |error: Error, st: &TrainState| TrainError {
        error,
        checkpoint: Box::new(st.clone()),
    };
    if let Err(e) = cfg.validate() {
        return Err(fail(e, &state));
    }
    if pairs.is_empty() {
        return Err(fail(Error::EmptyInput, &state));
    }
    let mut opt = Optim {
        adam: AdamW::new(cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay),
        emb: Moments::zeros_like(&state.model.embeddings),
        proj: Moments::zeros_like(&state.model.projection),
        bias: Moments::zeros_like(&state.model.bias),
        tau: Moments::zeros_like(&Array1::zeros(1)),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let steps_per_epoch = pairs.len().div_ceil(cfg.batch_size);
    let total = steps_per_epoch * cfg.epochs;
    let eval_interval = match cfg.eval_every {
        0 => steps_per_epoch,
        n => n.min(steps_per_epoch),
    };
    let mut current = state.model.clone();
    let mut tau = state.tau;

    let checkpoint = |current: &EncoderModel, tau: f64, state: &mut TrainState| -> Result<Option<f64>> {
        let Some(dev) = dev else {
            state.model = current.clone();
            state.tau = tau;
            return Ok(None);
        };
        let score = dev.map_at_5(current)?;
        if state.best_dev_map5.is_none_or(|b| score > b) {
            state.best_dev_map5 = Some(score);
            state.model = current.clone();
            state.tau = tau;
        }
        Ok(Some(score))
    };

    for epoch in 1..=cfg.epochs {
        let order = match epoch_order(&current, pairs, cfg, &mut rng) {
            Ok(o) => o,
            Err(e) => return Err(fail(e, &state)),
        };
        let batches: Vec<Vec<usize>> = order.chunks(cfg.batch_size).map(<[usize]>::to_vec).collect();
        let mut epoch_loss = 0.0;
        let mut dev_score = None;
        for idx in &batches {
            let r = match batch_step(&current, pairs, idx, &state.labels, tau, cfg.sim_scale, cfg.weighted) {
                Ok(r) => r,
                Err(e) => return Err(fail(e, &state)),
            };
            if !r.grads.all_finite() {
                return Err(fail(Error::Numerical("non-finite gradient".into()), &state));
            }
            let scale = cfg.schedule(state.steps, total);
            let tau_lr = cfg.train_tau.then_some(cfg.tau_lr * scale);
            apply_step(&mut current, &mut tau, &mut opt, &r, cfg.lr * scale, tau_lr);
            if !current.all_finite() || !tau.is_finite() {
                return Err(fail(Error::Numerical("non-finite parameters after update".into()), &state));
            }
            state.steps += 1;
            state.losses.push(r.loss);
            epoch_loss += r.loss;
            if state.steps.is_multiple_of(eval_interval) {
                match checkpoint(&current, tau, &mut state) {
                    Ok(s) => dev_score = s.or(dev_score),
                    Err(e) => return Err(fail(e, &state)),
                }
            }
        }
        if !state.steps.is_multiple_of(eval_interval) {
            match checkpoint(&current, tau, &mut state) {
                Ok(s) => dev_score = s.or(dev_score),
                Err(e) => return Err(fail(e, &state)),
            }
        }
        if cfg.refurbish_start > 0 && epoch >= cfg.refurbish_start {
            let y_hat = match predict_epoch(&current, pairs, &batches, tau / cfg.sim_scale, cfg.prediction) {
                Ok(y) => y,
                Err(e) => return Err(fail(e, &state)),
            };
            state.labels = refurbish(&state.labels, &y_hat, cfg.alpha);
        }
        state.epoch = epoch;
        state.history.push(EpochLog {
            epoch,
            mean_loss: epoch_loss / batches.len() as f64,
            tau,
            mean_label: state.labels.iter().sum::<f64>() / state.labels.len() as f64,
            dev_map5: dev_score,
        });
    }
    if dev.is_none() {
        state.tau = tau;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_pair_loss_is_zero() {
        let c = array![[0.6, 0.8]];
        let out = mnr_loss(&c, &c, &[1.0], 0.3, false).unwrap();
        assert!(out.loss.abs() < 1e-15);
    }

    #[test]
    fn zero_labels_zero_loss() {
        let c = array![[1.0, 0.0], [0.0, 1.0]];
        let v = array![[0.6, 0.8], [0.8, -0.6]];
        let out = mnr_loss(&c, &v, &[0.0, 0.0], 0.5, true).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(out.grad_c.iter().chain(out.grad_v.iter()).all(|&g| g == 0.0));
        assert_eq!(out.grad_tau, 0.0);
    }

    #[test]
    fn orthogonal_pair() {
        let e = array![[1.0, 0.0], [0.0, 1.0]];
        let out = mnr_loss(&e, &e, &[1.0, 1.0], 1.0, false).unwrap();
        assert!((out.loss - (1.0 + (-1.0f64).exp()).ln()).abs() < 1e-12);
        let p = model_prediction(&e, &e, 1.0, Prediction::Softmax);
        let want = std::f64::consts::E / (std::f64::consts::E + 1.0);
        assert!((p[0] - want).abs() < 1e-12);
    }

    #[test]
    fn predictions() {
        let c = array![[1.0, 0.0]];
        assert_eq!(model_prediction(&c, &c, 0.7, Prediction::Softmax), vec![1.0]);
        let same = array![[1.0, 0.0], [1.0, 0.0]];
        assert_eq!(model_prediction(&same, &same, 1.0, Prediction::Softmax), vec![0.5, 0.5]);
        let anti = array![[-1.0, 0.0]];
        assert_eq!(model_prediction(&c, &anti, 1.0, Prediction::Cosine01), vec![0.0]);
    }

    #[test]
    fn refurbish_examples() {
        assert_eq!(refurbish(&[0.3], &[0.9], 1.0), vec![0.3]);
        assert_eq!(refurbish(&[0.3], &[0.9], 0.0), vec![0.9]);
        assert!((refurbish(&[1.0], &[0.2], 0.9)[0] - 0.92).abs() < 1e-15);
    }

    #[test]
    fn bad_inputs() {
        let c = array![[1.0, 0.0]];
        assert!(matches!(mnr_loss(&c, &c, &[1.0], 0.0, false), Err(Error::Config(_))));
        assert!(mnr_loss(&c, &c, &[1.0, 1.0], 1.0, false).is_err());
        let nan = array![[f64::NAN, 0.0]];
        assert!(matches!(mnr_loss(&nan, &c, &[1.0], 1.0, false), Err(Error::Numerical(_))));
    }

    #[test]
    fn group_shuffle_small_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = Array2::from_shape_fn((8, 2), |(i, j)| if (i < 4) == (j == 0) { 1.0 } else { 0.0 });
        let order = group_shuffle(&e, 4, &mut rng);
        assert_eq!(order.len(), 8);
        for g in order.chunks(4) {
            assert!(g.iter().all(|&i| (i < 4) == (g[0] < 4)));
        }
        let plain = group_shuffle(&e, 1, &mut rng);
        let mut sorted = plain.clone();
        sorted.sort();
        assert_eq!(sorted, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn schedule_warms_then_decays() {
        let cfg = TrainConfig::default();
        assert!((cfg.schedule(0, 100) - 0.1).abs() < 1e-12);
        assert_eq!(cfg.schedule(9, 100), 1.0);
        assert_eq!(cfg.schedule(10, 100), 1.0);
        assert!(cfg.schedule(99, 100) > 0.0);
        assert!(cfg.schedule(55, 100) < 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            group_size: 3,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
