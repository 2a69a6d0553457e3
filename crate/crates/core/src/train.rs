//! Head training: weighted binary cross-entropy over all tracklet–detection
//! pairs of a frame pair, analytic backpropagation, clipped AdamW/SGD updates,
//! and a finite-difference gradient checker.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::head::{offset_grid, roi_align, HeadError, HeadParams, PartOffsetGrid, PartRelation};
use crate::pyramid::RelationMap;
use crate::types::{grid_box, BBox};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("no positive pairs in the training data")]
    NoPositivePairs,
    #[error("training needs at least one sequence with two or more frames")]
    NoTrainingData,
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("invalid loss config: {0}")]
    InvalidConfig(String),
    #[error("predictions and labels differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Head(#[from] HeadError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Optimizer {
    Sgd,
    #[default]
    AdamLike,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Positive-class weight; `None` uses clamp(#neg/#pos, 1, 50) per batch.
    pub w: Option<f64>,
    pub eps: f64,
    pub lr: f64,
    pub epochs: usize,
    pub grad_clip: f64,
    pub optimizer: Optimizer,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            w: None,
            eps: 1e-7,
            lr: 1e-3,
            epochs: 20,
            grad_clip: 1.0,
            optimizer: Optimizer::AdamLike,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if let Some(w) = self.w {
            if !(w > 0.0 && w.is_finite()) {
                return bad("w must be positive");
            }
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return bad("eps must lie in (0, 0.5)");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.grad_clip.is_nan() || self.grad_clip <= 0.0 {
            return bad("grad_clip must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must lie in [0, 1)");
        }
        if self.weight_decay < 0.0 {
            return bad("weight_decay must be non-negative");
        }
        Ok(())
    }
}

/// One labeled tracklet–detection pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub part: PartRelation,
    pub off: PartOffsetGrid,
    pub label: bool,
}

/// All N×M pairs of one frame pair: M tracklet parts, N·M offset grids and
/// labels stored detection-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBatch {
    pub n: usize,
    pub m: usize,
    pub parts: Vec<PartRelation>,
    pub offsets: Vec<PartOffsetGrid>,
    pub labels: Vec<bool>,
}

impl PairBatch {
    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|l| **l).count()
    }

    /// clamp(#neg/#pos, 1, 50); 1 when the batch has no positives.
    pub fn auto_weight(&self) -> f64 {
        let pos = self.positives();
        if pos == 0 {
            return 1.0;
        }
        ((self.labels.len() - pos) as f64 / pos as f64).clamp(1.0, 50.0)
    }

    /// Every pair as a standalone record.
    pub fn pairs(&self) -> Vec<TrainingPair> {
        (0..self.n * self.m)
            .map(|k| TrainingPair {
                part: self.parts[k % self.m].clone(),
                off: self.offsets[k].clone(),
                label: self.labels[k],
            })
            .collect()
    }
}

/// Builds the batch for one frame pair from ground truth. `prev` boxes act as
/// tracklets, `cur` boxes as detections; boxes are in image pixels.
pub fn build_pair_batch(
    map: &RelationMap,
    prev: &[(u64, BBox)],
    cur: &[(u64, BBox)],
    v: usize,
    stride: f64,
) -> Result<PairBatch, TrainError> {
    let trk: Vec<BBox> = prev.iter().map(|(_, b)| grid_box(b, stride)).collect();
    let parts = trk
        .iter()
        .map(|b| roi_align(map, b, v))
        .collect::<Result<Vec<_>, _>>()?;
    let mut offsets = Vec::with_capacity(cur.len() * prev.len());
    let mut labels = Vec::with_capacity(cur.len() * prev.len());
    for (did, db) in cur {
        let dg = grid_box(db, stride);
        for ((tid, _), tg) in prev.iter().zip(&trk) {
            offsets.push(offset_grid(&dg, tg, v)?);
            labels.push(did == tid);
        }
    }
    Ok(PairBatch {
        n: cur.len(),
        m: prev.len(),
        parts,
        offsets,
        labels,
    })
}

/// (1/NM)·Σ −[w·y·log p + (1−y)·log(1−p)] with p clamped to [eps, 1−eps].
pub fn wbce(preds: &[f64], labels: &[bool], w: f64, eps: f64) -> Result<f64, TrainError> {
    if preds.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    if preds.len() != labels.len() {
        return Err(TrainError::LengthMismatch(preds.len(), labels.len()));
    }
    let total: f64 = preds
        .iter()
        .zip(labels)
        .map(|(p, y)| {
            let p = p.clamp(eps, 1.0 - eps);
            if *y {
                -w * p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / preds.len() as f64)
}

/// ∂wbce/∂p for one element of a batch of `count` elements.
pub fn wbce_grad_p(p: f64, y: bool, w: f64, count: usize) -> f64 {
    let g = if y { -w / p } else { 1.0 / (1.0 - p) };
    g / count as f64
}

/// ∂wbce/∂logit for one element, zero where the clamp is active.
fn wbce_grad_logit(p: f64, y: bool, w: f64, eps: f64, count: usize) -> f64 {
    if p < eps || p > 1.0 - eps {
        return 0.0;
    }
    let g = if y { -w * (1.0 - p) } else { p };
    g / count as f64
}

/// Loss and flat gradient (file order) of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub loss: f64,
    pub grad: Vec<f64>,
}

struct Layout {
    conv_b: usize,
    fc1_w: usize,
    fc1_b: usize,
    fc2_w: usize,
    fc2_b: usize,
    total: usize,
}

fn layout(p: &HeadParams) -> Layout {
    let conv_b = p.conv_w.len();
    let fc1_w = conv_b + p.conv_b.len();
    let fc1_b = fc1_w + p.fc1_w.len();
    let fc2_w = fc1_b + p.fc1_b.len();
    let fc2_b = fc2_w + p.fc2_w.len();
    Layout {
        conv_b,
        fc1_w,
        fc1_b,
        fc2_w,
        fc2_b,
        total: fc2_b + 1,
    }
}

/// Exact gradients of the weighted BCE with respect to every head parameter.
pub fn backward(batch: &PairBatch, params: &HeadParams, w: f64, eps: f64) -> Result<Gradient, TrainError> {
    let count = batch.n * batch.m;
    if count == 0 {
        return Err(TrainError::EmptyBatch);
    }
    let lay = layout(params);
    let (v, c, hidden) = (params.v, params.c, params.hidden);
    let mid = params.fc1_b.len();

    // one gradient buffer per tracklet, summed in order afterwards
    let per_trk: Vec<(f64, Vec<f64>)> = (0..batch.m)
        .into_par_iter()
        .map(|j| -> Result<(f64, Vec<f64>), TrainError> {
            let part = &batch.parts[j];
            let base = params.tracklet_base(part)?;
            let mut g = vec![0.0; lay.total];
            let mut loss = 0.0;
            // conv input gradients accumulate per output channel, then multiply
            // the shared relation part once
            let mut dz1_part = vec![0.0; hidden];
            for i in 0..batch.n {
                let k = i * batch.m + j;
                let off = &batch.offsets[k];
                let y = batch.labels[k];
                let f = params.forward_from_base(&base, off)?;
                let p = f.prob;
                let pc = p.clamp(eps, 1.0 - eps);
                loss += if y { -w * pc.ln() } else { -(1.0 - pc).ln() };
                let dl = wbce_grad_logit(p, y, w, eps, count);
                if dl == 0.0 {
                    continue;
                }
                g[lay.fc2_b] += dl;
                let mut dz2 = vec![0.0; mid];
                for kk in 0..mid {
                    g[lay.fc2_w + kk] += dl * f.h2[kk];
                    if f.z2[kk] > 0.0 {
                        dz2[kk] = dl * params.fc2_w[kk];
                    }
                }
                let mut dh1 = vec![0.0; hidden];
                for kk in 0..mid {
                    if dz2[kk] == 0.0 {
                        continue;
                    }
                    g[lay.fc1_b + kk] += dz2[kk];
                    let row = kk * hidden;
                    for o in 0..hidden {
                        g[lay.fc1_w + row + o] += dz2[kk] * f.h1[o];
                        dh1[o] += params.fc1_w[row + o] * dz2[kk];
                    }
                }
                for o in 0..hidden {
                    if f.z1[o] <= 0.0 {
                        continue;
                    }
                    let d = dh1[o];
                    g[lay.conv_b + o] += d;
                    dz1_part[o] += d;
                    for a in 0..v {
                        for b in 0..v {
                            let (dx, dy) = off.at(a, b);
                            g[params.conv_index(o, c, a, b)] += d * dx;
                            g[params.conv_index(o, c + 1, a, b)] += d * dy;
                        }
                    }
                }
            }
            for (o, d) in dz1_part.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for a in 0..v {
                    for b in 0..v {
                        for (ch, x) in part.at(a, b).iter().enumerate() {
                            g[params.conv_index(o, ch, a, b)] += d * x;
                        }
                    }
                }
            }
            Ok((loss, g))
        })
        .collect::<Result<_, _>>()?;

    let mut grad = vec![0.0; lay.total];
    let mut loss = 0.0;
    for (l, g) in per_trk {
        loss += l;
        for (acc, x) in grad.iter_mut().zip(&g) {
            *acc += x;
        }
    }
    if grad.iter().any(|x| !x.is_finite()) {
        return Err(TrainError::NonFiniteGradient);
    }
    Ok(Gradient {
        loss: loss / count as f64,
        grad,
    })
}

/// Loss of a batch under the given parameters (forward only).
pub fn batch_loss(batch: &PairBatch, params: &HeadParams, w: f64, eps: f64) -> Result<f64, TrainError> {
    let probs = batch_scores(batch, params)?;
    wbce(&probs, &batch.labels, w, eps)
}

/// Head probabilities for every pair of a batch, detection-major.
pub fn batch_scores(batch: &PairBatch, params: &HeadParams) -> Result<Vec<f64>, TrainError> {
    let bases = batch
        .parts
        .iter()
        .map(|p| params.tracklet_base(p))
        .collect::<Result<Vec<_>, _>>()?;
    (0..batch.n * batch.m)
        .map(|k| Ok(params.forward_from_base(&bases[k % batch.m], &batch.offsets[k])?.prob))
        .collect()
}

/// Clamps every component into [−bound, bound].
pub fn clip_gradient(grad: &mut [f64], bound: f64) {
    for g in grad {
        *g = g.clamp(-bound, bound);
    }
}

/// Optimizer state over the flat parameter vector.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    cfg: LossConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptimizerState {
    pub fn new(cfg: LossConfig, n: usize) -> Self {
        Self {
            cfg,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One update with decoupled weight decay.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        let c = &self.cfg;
        match c.optimizer {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= c.lr * (g + c.weight_decay * *p);
                }
            }
            Optimizer::AdamLike => {
                self.t += 1;
                let bc1 = 1.0 - c.beta1.powi(self.t);
                let bc2 = 1.0 - c.beta2.powi(self.t);
                for k in 0..params.len() {
                    let g = grad[k];
                    self.m[k] = c.beta1 * self.m[k] + (1.0 - c.beta1) * g;
                    self.v[k] = c.beta2 * self.v[k] + (1.0 - c.beta2) * g * g;
                    let mh = self.m[k] / bc1;
                    let vh = self.v[k] / bc2;
                    params[k] -= c.lr * (mh / (vh.sqrt() + c.adam_eps) + c.weight_decay * params[k]);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: HeadParams,
    /// (epoch, mean batch loss before that epoch's updates); epoch 0 is the initialization.
    pub trace: Vec<(usize, f64)>,
}

fn batch_weight(batch: &PairBatch, cfg: &LossConfig) -> f64 {
    cfg.w.unwrap_or_else(|| batch.auto_weight())
}

/// Mean batch loss over a data set.
pub fn dataset_loss(batches: &[PairBatch], params: &HeadParams, cfg: &LossConfig) -> Result<f64, TrainError> {
    let live: Vec<&PairBatch> = batches.iter().filter(|b| b.n * b.m > 0).collect();
    if live.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let mut total = 0.0;
    for b in &live {
        total += batch_loss(b, params, batch_weight(b, cfg), cfg.eps)?;
    }
    Ok(total / live.len() as f64)
}

/// Full-batch updates, one per frame pair, for `cfg.epochs` passes in order.
pub fn fit(batches: &[PairBatch], init: HeadParams, cfg: &LossConfig) -> Result<FitResult, TrainError> {
    cfg.validate()?;
    init.validate()?;
    if batches.iter().all(|b| b.n * b.m == 0) {
        return Err(TrainError::NoTrainingData);
    }
    if batches.iter().all(|b| b.positives() == 0) {
        return Err(TrainError::NoPositivePairs);
    }
    let mut params = init;
    let mut flat = params.flatten();
    let mut opt = OptimizerState::new(*cfg, flat.len());
    let mut trace = vec![(0, dataset_loss(batches, &params, cfg)?)];
    for epoch in 1..=cfg.epochs {
        for b in batches.iter().filter(|b| b.n * b.m > 0) {
            let mut g = backward(b, &params, batch_weight(b, cfg), cfg.eps)?.grad;
            clip_gradient(&mut g, cfg.grad_clip);
            opt.step(&mut flat, &g);
            params.unflatten(&flat);
        }
        let loss = dataset_loss(batches, &params, cfg)?;
        log::debug!("epoch {epoch}: loss {loss:.6}");
        trace.push((epoch, loss));
    }
    Ok(FitResult { params, trace })
}

/// Loss trace as CSV with an `epoch,loss` header.
pub fn trace_csv(trace: &[(usize, f64)]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (e, l) in trace {
        s.push_str(&format!("{e},{l:.9}\n"));
    }
    s
}

/// Probability that a random positive outranks a random negative (ties count half).
pub fn ranking_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|a, b| scores[*a].total_cmp(&scores[*b]));
    let pos = labels.iter().filter(|l| **l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    // average ranks over tie groups
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < idx.len() {
        let mut e = k;
        while e + 1 < idx.len() && scores[idx[e + 1]] == scores[idx[k]] {
            e += 1;
        }
        let avg = (k + e) as f64 / 2.0 + 1.0;
        rank_sum += idx[k..=e].iter().filter(|i| labels[**i]).count() as f64 * avg;
        k = e + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Some(u / (pos * neg) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub configs: usize,
    pub params_checked: usize,
    pub max_rel_error: f64,
    pub threshold: f64,
    pub passed: bool,
}

pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_TOL: f64 = 1e-6;
/// Floor on the relative-error denominator, so parameters whose true
/// gradient is numerically zero are compared on an absolute scale.
pub const GRADCHECK_FLOOR: f64 = 1e-5;

pub fn relative_error(numeric: f64, analytic: f64) -> f64 {
    (numeric - analytic).abs() / (numeric.abs() + analytic.abs()).max(GRADCHECK_FLOOR)
}

/// A random batch for gradient checking.
pub fn random_batch(v: usize, c: usize, n: usize, m: usize, rng: &mut ChaCha8Rng) -> PairBatch {
    let parts = (0..m)
        .map(|_| PartRelation {
            v,
            c,
            data: (0..v * v * c).map(|_| rng.random_range(-1.0..1.0)).collect(),
        })
        .collect();
    let offsets = (0..n * m)
        .map(|_| PartOffsetGrid {
            v,
            data: (0..v * v * 2).map(|_| rng.random_range(-2.0..2.0)).collect(),
        })
        .collect();
    let mut labels: Vec<bool> = (0..n * m).map(|_| rng.random_bool(0.3)).collect();
    labels[0] = true;
    PairBatch {
        n,
        m,
        parts,
        offsets,
        labels,
    }
}

/// Compares analytic gradients with central differences on `configs`
/// random (v=2, c=8, hidden=4) heads and batches.
pub fn gradcheck(configs: usize, seed: u64) -> Result<GradCheckReport, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_err: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..configs {
        let params = HeadParams::random(2, 8, 4, rng.random());
        let batch = random_batch(2, 8, 3, 2, &mut rng);
        let w = rng.random_range(1.0..5.0);
        let eps = 1e-7;
        let analytic = backward(&batch, &params, w, eps)?.grad;
        let base = params.flatten();
        let mut probe = params.clone();
        for k in 0..base.len() {
            let mut x = base.clone();
            x[k] = base[k] + GRADCHECK_STEP;
            probe.unflatten(&x);
            let up = batch_loss(&batch, &probe, w, eps)?;
            x[k] = base[k] - GRADCHECK_STEP;
            probe.unflatten(&x);
            let down = batch_loss(&batch, &probe, w, eps)?;
            let numeric = (up - down) / (2.0 * GRADCHECK_STEP);
            max_err = max_err.max(relative_error(numeric, analytic[k]));
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        configs,
        params_checked: checked,
        max_rel_error: max_err,
        threshold: GRADCHECK_TOL,
        passed: max_err < GRADCHECK_TOL,
    })
}
