//! Losses, gradients, Adam, and the two training loops.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{arg_cotangent, Program};
use crate::error::{PhasorError, Result};
use crate::models::{
    binary_readout, encode_sequence, softmax, ParamVector, Readout, TransformerConfig, VpcConfig,
};
use crate::state::{from_phases, phase, Complex, PhaseVector, PhasorState};

const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub value: f64,
    pub per_sample: Vec<f64>,
}

impl LossValue {
    fn from_samples(per_sample: Vec<f64>) -> Self {
        let value = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
        LossValue { value, per_sample }
    }
}

pub fn mse_loss(predictions: &[f64], targets: &[f64]) -> Result<LossValue> {
    if predictions.is_empty() {
        return Err(PhasorError::invalid("mse_loss needs at least one sample"));
    }
    if predictions.len() != targets.len() {
        return Err(PhasorError::DimensionMismatch {
            expected: predictions.len(),
            actual: targets.len(),
        });
    }
    Ok(LossValue::from_samples(
        predictions.iter().zip(targets).map(|(p, t)| (p - t).powi(2)).collect(),
    ))
}

/// Mean of `−ln max(p_y, 1e-12)`.
pub fn ce_loss(probabilities: &[Vec<f64>], labels: &[usize]) -> Result<LossValue> {
    if probabilities.is_empty() {
        return Err(PhasorError::invalid("ce_loss needs at least one sample"));
    }
    if probabilities.len() != labels.len() {
        return Err(PhasorError::DimensionMismatch {
            expected: probabilities.len(),
            actual: labels.len(),
        });
    }
    let mut per_sample = Vec::with_capacity(labels.len());
    for (i, (p, &y)) in probabilities.iter().zip(labels).enumerate() {
        if y >= p.len() {
            return Err(PhasorError::invalid(format!(
                "sample {i}: label {y} out of range for {} classes",
                p.len()
            )));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(PhasorError::invalid(format!("sample {i}: probabilities sum to {sum}")));
        }
        per_sample.push(-p[y].max(PROB_FLOOR).ln());
    }
    Ok(LossValue::from_samples(per_sample))
}

/// A loss over a fixed batch as a function of the flat parameter vector.
pub trait Objective {
    fn n_params(&self) -> usize;
    fn loss(&self, params: &[f64]) -> Result<f64>;
    fn loss_and_grad(&self, params: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Exact gradient by reverse accumulation.
pub fn analytic_grad<O: Objective + ?Sized>(objective: &O, params: &[f64]) -> Result<Vec<f64>> {
    Ok(objective.loss_and_grad(params)?.1)
}

/// Central differences `(L(θ+h·e_k) − L(θ−h·e_k))/2h`.
pub fn finite_diff_grad<F>(loss: F, params: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(PhasorError::invalid(format!("step h must be positive, got {h}")));
    }
    let mut p = params.to_vec();
    let mut grad = Vec::with_capacity(p.len());
    for k in 0..p.len() {
        let orig = p[k];
        p[k] = orig + h;
        let up = loss(&p)?;
        p[k] = orig - h;
        let dn = loss(&p)?;
        p[k] = orig;
        grad.push((up - dn) / (2.0 * h));
    }
    Ok(grad)
}

fn check_batch(n_inputs: usize, n_targets: usize, n_threads: usize, inputs: &[PhasorState]) -> Result<()> {
    if n_inputs == 0 {
        return Err(PhasorError::invalid("batch is empty"));
    }
    if n_inputs != n_targets {
        return Err(PhasorError::DimensionMismatch {
            expected: n_inputs,
            actual: n_targets,
        });
    }
    if let Some(s) = inputs.iter().find(|s| s.n_threads() != n_threads) {
        return Err(PhasorError::DimensionMismatch {
            expected: n_threads,
            actual: s.n_threads(),
        });
    }
    Ok(())
}

/// VPC loss on a batch: MSE of the binary readout against 0/1 labels, or
/// cross-entropy of the multiclass readout.
#[derive(Debug, Clone)]
pub struct VpcObjective<'a> {
    cfg: VpcConfig,
    program: Program,
    inputs: &'a [PhasorState],
    labels: &'a [usize],
}

impl<'a> VpcObjective<'a> {
    pub fn new(cfg: VpcConfig, inputs: &'a [PhasorState], labels: &'a [usize]) -> Result<Self> {
        cfg.validate()?;
        check_batch(inputs.len(), labels.len(), cfg.n_threads, inputs)?;
        let classes = match cfg.readout {
            Readout::Binary => 2,
            Readout::Multiclass(k) => k,
        };
        if let Some(&y) = labels.iter().find(|&&y| y >= classes) {
            return Err(PhasorError::invalid(format!("label {y} out of range for {classes} classes")));
        }
        Ok(VpcObjective {
            program: cfg.program(),
            cfg,
            inputs,
            labels,
        })
    }

    fn sample(&self, z: &[Complex], y: usize, want_grad: bool) -> (f64, Vec<Complex>) {
        let n = z.len();
        let scale = 1.0 / self.inputs.len() as f64;
        let mut g = vec![Complex::new(0.0, 0.0); if want_grad { n } else { 0 }];
        match self.cfg.readout {
            Readout::Binary => {
                let phi = phase(z[0]);
                let p = if z[0].norm_sqr() > 0.0 { (phi.sin() + 1.0) / 2.0 } else { 0.5 };
                let diff = p - y as f64;
                if want_grad {
                    g[0] = arg_cotangent(z[0], scale * 2.0 * diff * phi.cos() / 2.0);
                }
                (diff * diff, g)
            }
            Readout::Multiclass(k) => {
                let phis: Vec<f64> = z[..k].iter().map(|&w| phase(w)).collect();
                let p = softmax(&phis.iter().map(|f| f.abs()).collect::<Vec<_>>());
                let loss = -p[y].max(PROB_FLOOR).ln();
                if want_grad && p[y] >= PROB_FLOOR {
                    for c in 0..k {
                        let dlogit = p[c] - f64::from(u8::from(c == y));
                        g[c] = arg_cotangent(z[c], scale * dlogit * phis[c].signum());
                    }
                }
                (loss, g)
            }
        }
    }
}

impl Objective for VpcObjective<'_> {
    fn n_params(&self) -> usize {
        self.cfg.param_count()
    }

    fn loss(&self, params: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (s, &y) in self.inputs.iter().zip(self.labels) {
            let trace = self.program.forward(s.values(), params)?;
            total += self.sample(trace.output(), y, false).0;
        }
        Ok(total / self.inputs.len() as f64)
    }

    fn loss_and_grad(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut total = 0.0;
        let mut grad = vec![0.0; params.len()];
        for (s, &y) in self.inputs.iter().zip(self.labels) {
            let trace = self.program.forward(s.values(), params)?;
            let (l, g_out) = self.sample(trace.output(), y, true);
            total += l;
            let (g, _) = self.program.backward(&trace, params, &g_out)?;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        Ok((total / self.inputs.len() as f64, grad))
    }
}

/// Forecast MSE of decoded thread-0 predictions.
#[derive(Debug, Clone)]
pub struct TransformerObjective<'a> {
    cfg: TransformerConfig,
    program: Program,
    inputs: &'a [PhasorState],
    targets: &'a [f64],
    scale: f64,
}

impl<'a> TransformerObjective<'a> {
    pub fn new(cfg: TransformerConfig, inputs: &'a [PhasorState], targets: &'a [f64], scale: f64) -> Result<Self> {
        cfg.validate()?;
        check_batch(inputs.len(), targets.len(), cfg.context_len, inputs)?;
        if !(scale > 0.0) {
            return Err(PhasorError::invalid("scale must be positive"));
        }
        Ok(TransformerObjective {
            program: cfg.program(),
            cfg,
            inputs,
            targets,
            scale,
        })
    }

    fn decode(&self, z: Complex) -> f64 {
        if z.norm_sqr() > 0.0 {
            phase(z) * self.scale / FRAC_PI_2
        } else {
            0.0
        }
    }

    pub fn predictions(&self, params: &[f64]) -> Result<Vec<f64>> {
        self.inputs
            .iter()
            .map(|s| Ok(self.decode(self.program.forward(s.values(), params)?.output()[0])))
            .collect()
    }
}

impl Objective for TransformerObjective<'_> {
    fn n_params(&self) -> usize {
        self.cfg.param_count()
    }

    fn loss(&self, params: &[f64]) -> Result<f64> {
        Ok(mse_loss(&self.predictions(params)?, self.targets)?.value)
    }

    fn loss_and_grad(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n = self.inputs.len() as f64;
        let mut total = 0.0;
        let mut grad = vec![0.0; params.len()];
        let mut g_out = vec![Complex::new(0.0, 0.0); self.cfg.context_len];
        for (s, &y) in self.inputs.iter().zip(self.targets) {
            let trace = self.program.forward(s.values(), params)?;
            let z = trace.output()[0];
            let diff = self.decode(z) - y;
            total += diff * diff;
            g_out[0] = arg_cotangent(z, 2.0 * diff / n * self.scale / FRAC_PI_2);
            let (g, _) = self.program.backward(&trace, params, &g_out)?;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        Ok((total / n, grad))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        AdamState {
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(state: &AdamState, params: &[f64], grad: &[f64]) -> Result<(AdamState, Vec<f64>)> {
    let n = state.m.len();
    for len in [params.len(), grad.len(), state.v.len()] {
        if len != n {
            return Err(PhasorError::DimensionMismatch { expected: n, actual: len });
        }
    }
    let mut next = state.clone();
    next.step += 1;
    let t = next.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let mut out = params.to_vec();
    for k in 0..n {
        next.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * grad[k];
        next.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * grad[k] * grad[k];
        let m_hat = next.m[k] / c1;
        let v_hat = next.v[k] / c2;
        out[k] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok((next, out))
}

/// Inputs, targets, and a disjoint exhaustive train/validation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset<X, Y> {
    pub inputs: Vec<X>,
    pub targets: Vec<Y>,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

impl<X, Y> LabeledDataset<X, Y> {
    pub fn new(inputs: Vec<X>, targets: Vec<Y>, train: Vec<usize>, validation: Vec<usize>) -> Result<Self> {
        let n = inputs.len();
        if targets.len() != n {
            return Err(PhasorError::DimensionMismatch {
                expected: n,
                actual: targets.len(),
            });
        }
        let mut seen = vec![false; n];
        for &i in train.iter().chain(&validation) {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(PhasorError::invalid("train/validation split is not a partition"));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(PhasorError::invalid("train/validation split is not exhaustive"));
        }
        Ok(LabeledDataset {
            inputs,
            targets,
            train,
            validation,
        })
    }

    /// First `⌊n·train_fraction⌋` indices of a seeded shuffle train; the
    /// rest validate.
    pub fn shuffled_split(inputs: Vec<X>, targets: Vec<Y>, train_fraction: f64, rng: &mut impl Rng) -> Result<Self> {
        let mut idx: Vec<usize> = (0..inputs.len()).collect();
        idx.shuffle(rng);
        let cut = (inputs.len() as f64 * train_fraction).floor() as usize;
        let validation = idx.split_off(cut);
        Self::new(inputs, targets, idx, validation)
    }

    /// Leading `⌊n·train_fraction⌋` samples train, the tail validates.
    pub fn chronological_split(inputs: Vec<X>, targets: Vec<Y>, train_fraction: f64) -> Result<Self> {
        let n = inputs.len();
        let cut = (n as f64 * train_fraction).floor() as usize;
        Self::new(inputs, targets, (0..cut).collect(), (cut..n).collect())
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            lr: 0.1,
            seed: 0,
            batch_size: 32,
        }
    }
}

/// Row `e` describes the parameters after `e` updates; row 0 is the
/// untrained baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

impl History {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub params: ParamVector,
    pub history: History,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedTransformer {
    pub params: ParamVector,
    pub history: History,
    pub scale: f64,
}

pub fn uniform_init(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-PI..PI)).collect()
}

/// Fraction of samples whose readout picks the right class.
pub fn vpc_accuracy(cfg: &VpcConfig, params: &[f64], inputs: &[PhasorState], labels: &[usize]) -> Result<f64> {
    if inputs.is_empty() {
        return Ok(0.0);
    }
    let prog = cfg.program();
    let mut correct = 0usize;
    for (s, &y) in inputs.iter().zip(labels) {
        let out = PhasorState::new(prog.forward(s.values(), params)?.output().to_vec())?;
        let pred = match cfg.readout {
            Readout::Binary => usize::from(binary_readout(&out).value > 0.5),
            Readout::Multiclass(k) => {
                let p = crate::models::multiclass_readout(&out, k)?;
                (0..k).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap_or(0)
            }
        };
        correct += usize::from(pred == y);
    }
    Ok(correct as f64 / inputs.len() as f64)
}

/// Full-batch Adam from `θ ~ Uniform(−π, π)`. The validation metric is
/// accuracy.
pub fn train_vpc(dataset: &LabeledDataset<PhaseVector, usize>, cfg: &VpcConfig, hyper: &TrainConfig) -> Result<Trained> {
    cfg.validate()?;
    if dataset.train.is_empty() {
        return Err(PhasorError::invalid("training split is empty"));
    }
    let encode = |idx: &[usize]| -> Result<(Vec<PhasorState>, Vec<usize>)> {
        let xs = idx.iter().map(|&i| from_phases(&dataset.inputs[i])).collect::<Result<_>>()?;
        Ok((xs, idx.iter().map(|&i| dataset.targets[i]).collect()))
    };
    let (train_x, train_y) = encode(&dataset.train)?;
    let (val_x, val_y) = encode(&dataset.validation)?;
    let objective = VpcObjective::new(*cfg, &train_x, &train_y)?;

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut params = uniform_init(&mut rng, cfg.param_count());
    let mut adam = AdamState::new(params.len(), hyper.lr);
    let mut history = History::default();
    for epoch in 0..=hyper.epochs {
        let (loss, grad) = objective.loss_and_grad(&params)?;
        history.records.push(EpochRecord {
            epoch,
            train_loss: loss,
            val_metric: vpc_accuracy(cfg, &params, &val_x, &val_y)?,
        });
        if epoch == hyper.epochs {
            break;
        }
        let (next, p) = adam_step(&adam, &params, &grad)?;
        adam = next;
        params = p;
    }
    Ok(Trained {
        params: ParamVector::vpc(cfg, params)?,
        history,
    })
}

/// Sliding windows of length `t` and their next-value targets.
pub fn windows(series: &[f64], t: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    if series.len() <= t {
        return (Vec::new(), Vec::new());
    }
    let xs = (0..series.len() - t).map(|i| series[i..i + t].to_vec()).collect();
    (xs, series[t..].to_vec())
}

/// Minibatch Adam on next-step prediction. Windows split 80/20 in time
/// order; the validation metric is test MSE.
pub fn train_transformer(series: &[f64], cfg: &TransformerConfig, hyper: &TrainConfig) -> Result<TrainedTransformer> {
    cfg.validate()?;
    let t = cfg.context_len;
    if series.len() <= t + 1 {
        return Err(PhasorError::invalid(format!(
            "series of length {} is too short for context {t}",
            series.len()
        )));
    }
    if hyper.batch_size == 0 {
        return Err(PhasorError::invalid("batch size must be positive"));
    }
    let scale = series.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let (xs, ys) = windows(series, t);
    let encoded = xs.iter().map(|w| encode_sequence(w, scale)).collect::<Result<Vec<_>>>()?;
    let data = LabeledDataset::chronological_split(encoded, ys, 0.8)?;
    let pick = |idx: &[usize]| -> (Vec<PhasorState>, Vec<f64>) {
        (
            idx.iter().map(|&i| data.inputs[i].clone()).collect(),
            idx.iter().map(|&i| data.targets[i]).collect(),
        )
    };
    let (train_x, train_y) = pick(&data.train);
    let (test_x, test_y) = pick(&data.validation);
    if train_x.is_empty() || test_x.is_empty() {
        return Err(PhasorError::invalid("series too short for an 80/20 split"));
    }
    let train_obj = TransformerObjective::new(*cfg, &train_x, &train_y, scale)?;
    let test_obj = TransformerObjective::new(*cfg, &test_x, &test_y, scale)?;

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut params = uniform_init(&mut rng, cfg.param_count());
    let mut adam = AdamState::new(params.len(), hyper.lr);
    let mut history = History::default();
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let record = |epoch: usize, params: &[f64]| -> Result<EpochRecord> {
        Ok(EpochRecord {
            epoch,
            train_loss: train_obj.loss(params)?,
            val_metric: test_obj.loss(params)?,
        })
    };
    history.records.push(record(0, &params)?);
    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(hyper.batch_size) {
            let bx: Vec<PhasorState> = batch.iter().map(|&i| train_x[i].clone()).collect();
            let by: Vec<f64> = batch.iter().map(|&i| train_y[i]).collect();
            let (_, grad) = TransformerObjective::new(*cfg, &bx, &by, scale)?.loss_and_grad(&params)?;
            let (next, p) = adam_step(&adam, &params, &grad)?;
            adam = next;
            params = p;
        }
        history.records.push(record(epoch, &params)?);
    }
    Ok(TrainedTransformer {
        params: ParamVector::transformer(cfg, params)?,
        history,
        scale,
    })
}
