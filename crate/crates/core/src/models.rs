//! Variational Phasor Circuit and Phasor Transformer forward maps.
//!
//! Both models are stacks of per-thread Shift layers around fixed unitaries:
//! pairwise Mix for the VPC, a global DFT for the transformer. Thread 0 is the
//! readout thread.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Program, SmoothOp};
use crate::error::{PhasorError, Result};
use crate::gates::{apply_dft, apply_mix, apply_normalize};
use crate::state::{cis, from_phases, phase, PhaseVector, PhasorState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamRole {
    VpcShift,
    PreFfn,
    PostFfn,
    ReadoutHead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamSlot {
    pub layer: usize,
    pub role: ParamRole,
    pub thread: usize,
}

/// Flat parameter array plus the slot each entry occupies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: Vec<ParamSlot>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, layout: Vec<ParamSlot>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(PhasorError::DimensionMismatch {
                expected: layout.len(),
                actual: values.len(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = layout.iter().find(|s| !seen.insert(**s)) {
            return Err(PhasorError::invalid(format!("duplicate parameter slot {dup:?}")));
        }
        Ok(ParamVector { values, layout })
    }

    pub fn vpc(cfg: &VpcConfig, values: Vec<f64>) -> Result<Self> {
        Self::new(values, cfg.layout())
    }

    pub fn transformer(cfg: &TransformerConfig, values: Vec<f64>) -> Result<Self> {
        Self::new(values, cfg.layout())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn layout(&self) -> &[ParamSlot] {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, layer: usize, role: ParamRole, thread: usize) -> Option<f64> {
        let slot = ParamSlot { layer, role, thread };
        self.layout.iter().position(|s| *s == slot).map(|i| self.values[i])
    }

    fn expect_layout(&self, expected: &[ParamSlot]) -> Result<()> {
        if self.layout.as_slice() == expected {
            Ok(())
        } else {
            Err(PhasorError::invalid(format!(
                "parameter layout does not match the model ({} slots given, {} expected)",
                self.layout.len(),
                expected.len()
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "classes")]
pub enum Readout {
    Binary,
    Multiclass(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VpcConfig {
    pub n_threads: usize,
    pub depth: usize,
    #[serde(default)]
    pub pullback_between_layers: bool,
    pub readout: Readout,
}

impl VpcConfig {
    pub fn new(n_threads: usize, depth: usize, readout: Readout) -> Result<Self> {
        let cfg = VpcConfig {
            n_threads,
            depth,
            pullback_between_layers: false,
            readout,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_pullback(mut self, on: bool) -> Self {
        self.pullback_between_layers = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_threads < 2 {
            return Err(PhasorError::invalid("a VPC needs at least 2 threads"));
        }
        if self.depth < 1 {
            return Err(PhasorError::invalid("a VPC needs at least one layer"));
        }
        if let Readout::Multiclass(k) = self.readout {
            if k < 2 || k > self.n_threads {
                return Err(PhasorError::invalid(format!(
                    "multiclass readout needs 2 ≤ K ≤ N, got K={k}, N={}",
                    self.n_threads
                )));
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        vpc_param_count(self.n_threads, self.depth)
    }

    /// Layer-major: slot `ℓ·N + k` shifts thread `k` in layer `ℓ`.
    pub fn layout(&self) -> Vec<ParamSlot> {
        (0..self.depth)
            .flat_map(|layer| {
                (0..self.n_threads).map(move |thread| ParamSlot {
                    layer,
                    role: ParamRole::VpcShift,
                    thread,
                })
            })
            .collect()
    }

    /// The same forward map as a differentiable program.
    pub fn program(&self) -> Program {
        let n = self.n_threads;
        let mut prog = Program::new(n);
        for layer in 0..self.depth {
            for k in 0..n {
                prog.shift_param(k, layer * n + k).expect("thread in range");
            }
            for j in (0..n - 1).step_by(2) {
                prog.push(SmoothOp::Mix { j, k: j + 1 })
                    .expect("pair in range");
            }
            if self.pullback_between_layers && layer + 1 < self.depth {
                prog.push(SmoothOp::Normalize).expect("whole state");
            }
        }
        prog
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformerConfig {
    pub context_len: usize,
    pub depth: usize,
    #[serde(default)]
    pub readout_head: bool,
}

impl TransformerConfig {
    pub fn new(context_len: usize, depth: usize, readout_head: bool) -> Result<Self> {
        let cfg = TransformerConfig {
            context_len,
            depth,
            readout_head,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.context_len < 2 {
            return Err(PhasorError::invalid("context length must be at least 2"));
        }
        if self.depth < 1 {
            return Err(PhasorError::invalid("a transformer needs at least one block"));
        }
        Ok(())
    }

    /// Pre and post shifts of one block.
    pub fn per_block_param_count(&self) -> usize {
        2 * self.context_len
    }

    /// All blocks together, excluding the head.
    pub fn blocks_param_count(&self) -> usize {
        2 * self.depth * self.context_len
    }

    pub fn param_count(&self) -> usize {
        transformer_param_count(self.context_len, self.depth, self.readout_head)
    }

    /// Per block: T pre-shifts then T post-shifts; the head (layer = D) last.
    pub fn layout(&self) -> Vec<ParamSlot> {
        let t = self.context_len;
        let mut out = Vec::with_capacity(self.param_count());
        for layer in 0..self.depth {
            for role in [ParamRole::PreFfn, ParamRole::PostFfn] {
                out.extend((0..t).map(|thread| ParamSlot { layer, role, thread }));
            }
        }
        if self.readout_head {
            out.extend((0..t).map(|thread| ParamSlot {
                layer: self.depth,
                role: ParamRole::ReadoutHead,
                thread,
            }));
        }
        out
    }

    pub fn program(&self) -> Program {
        let t = self.context_len;
        let mut prog = Program::new(t);
        for layer in 0..self.depth {
            let base = 2 * layer * t;
            for k in 0..t {
                prog.shift_param(k, base + k).expect("thread in range");
            }
            prog.push(SmoothOp::Dft).expect("whole state");
            for k in 0..t {
                prog.shift_param(k, base + t + k).expect("thread in range");
            }
        }
        if self.readout_head {
            let base = self.blocks_param_count();
            for k in 0..t {
                prog.shift_param(k, base + k).expect("thread in range");
            }
        }
        prog
    }
}

pub fn vpc_param_count(n_threads: usize, depth: usize) -> usize {
    n_threads * depth
}

pub fn transformer_param_count(context_len: usize, depth: usize, readout_head: bool) -> usize {
    (2 * depth + usize::from(readout_head)) * context_len
}

fn shift_all(state: &PhasorState, params: &[f64]) -> Result<PhasorState> {
    if params.len() != state.n_threads() {
        return Err(PhasorError::DimensionMismatch {
            expected: state.n_threads(),
            actual: params.len(),
        });
    }
    let values = state.values().iter().zip(params).map(|(z, &t)| z * cis(t)).collect();
    PhasorState::new(values)
}

/// Shift every thread by its parameter, then Mix pairs (0,1), (2,3), …
/// With odd N the last thread is shifted only.
pub fn vpc_layer(state: &PhasorState, layer_params: &[f64]) -> Result<PhasorState> {
    let mut s = shift_all(state, layer_params)?;
    let n = s.n_threads();
    for j in (0..n.saturating_sub(1)).step_by(2) {
        s = apply_mix(&s, j, j + 1)?;
    }
    Ok(s)
}

pub fn vpc_forward(encoded: &PhasorState, params: &ParamVector, cfg: &VpcConfig) -> Result<PhasorState> {
    cfg.validate()?;
    if encoded.n_threads() != cfg.n_threads {
        return Err(PhasorError::DimensionMismatch {
            expected: cfg.n_threads,
            actual: encoded.n_threads(),
        });
    }
    params.expect_layout(&cfg.layout())?;
    let n = cfg.n_threads;
    let mut s = encoded.clone();
    for (layer, chunk) in params.values().chunks(n).enumerate() {
        s = vpc_layer(&s, chunk)?;
        if cfg.pullback_between_layers && layer + 1 < cfg.depth {
            s = apply_normalize(&s);
        }
    }
    Ok(s)
}

/// A readout value with a flag for an undefined thread-0 phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub value: f64,
    pub undefined_phase: bool,
}

/// `p = (sin φ₀ + 1)/2`.
pub fn binary_readout(state: &PhasorState) -> Reading {
    let z = state[0];
    if z.norm_sqr() == 0.0 {
        return Reading {
            value: 0.5,
            undefined_phase: true,
        };
    }
    Reading {
        value: (phase(z).sin() + 1.0) / 2.0,
        undefined_phase: false,
    }
}

/// Softmax of `|φ_c|` over the first `k` threads.
pub fn multiclass_readout(state: &PhasorState, k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > state.n_threads() {
        return Err(PhasorError::invalid(format!(
            "cannot read {k} classes from {} threads",
            state.n_threads()
        )));
    }
    let logits: Vec<f64> = state.values()[..k].iter().map(|&z| phase(z).abs()).collect();
    Ok(softmax(&logits))
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|x| x / sum).collect()
}

fn check_scale(scale: f64) -> Result<()> {
    if scale.is_finite() && scale > 0.0 {
        Ok(())
    } else {
        Err(PhasorError::invalid(format!("scale must be positive, got {scale}")))
    }
}

/// `φ_t = (s_t / scale)·π/2`.
pub fn encode_sequence(window: &[f64], scale: f64) -> Result<PhasorState> {
    check_scale(scale)?;
    from_phases(&PhaseVector(window.iter().map(|s| s / scale * FRAC_PI_2).collect()))
}

/// Shift(θ^pre), DFT over all threads, Shift(θ^post).
pub fn transformer_block(state: &PhasorState, pre: &[f64], post: &[f64]) -> Result<PhasorState> {
    let s = shift_all(state, pre)?;
    shift_all(&apply_dft(&s), post)
}

pub fn transformer_forward(
    encoded: &PhasorState,
    params: &ParamVector,
    cfg: &TransformerConfig,
) -> Result<PhasorState> {
    cfg.validate()?;
    let t = cfg.context_len;
    if encoded.n_threads() != t {
        return Err(PhasorError::DimensionMismatch {
            expected: t,
            actual: encoded.n_threads(),
        });
    }
    params.expect_layout(&cfg.layout())?;
    let v = params.values();
    let mut s = encoded.clone();
    for layer in 0..cfg.depth {
        let base = 2 * layer * t;
        s = transformer_block(&s, &v[base..base + t], &v[base + t..base + 2 * t])?;
    }
    if cfg.readout_head {
        s = shift_all(&s, &v[cfg.blocks_param_count()..])?;
    }
    Ok(s)
}

/// `ŝ = φ₀·scale/(π/2)`.
pub fn decode_prediction(state: &PhasorState, scale: f64) -> Result<Reading> {
    check_scale(scale)?;
    let z = state[0];
    if z.norm_sqr() == 0.0 {
        return Ok(Reading {
            value: 0.0,
            undefined_phase: true,
        });
    }
    Ok(Reading {
        value: phase(z) * scale / FRAC_PI_2,
        undefined_phase: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "config", rename_all = "lowercase")]
pub enum ModelConfig {
    Vpc(VpcConfig),
    Transformer(TransformerConfig),
}

impl ModelConfig {
    pub fn layout(&self) -> Vec<ParamSlot> {
        match self {
            ModelConfig::Vpc(c) => c.layout(),
            ModelConfig::Transformer(c) => c.layout(),
        }
    }
}

/// Serialized model: config, slot layout, flat parameters, and the decode
/// scale for forecasting models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    #[serde(flatten)]
    pub model: ModelConfig,
    pub layout: Vec<ParamSlot>,
    pub params: Vec<f64>,
    #[serde(default)]
    pub scale: Option<f64>,
}

impl Checkpoint {
    pub fn new(model: ModelConfig, params: &ParamVector, scale: Option<f64>) -> Result<Self> {
        params.expect_layout(&model.layout())?;
        Ok(Checkpoint {
            model,
            layout: params.layout().to_vec(),
            params: params.values().to_vec(),
            scale,
        })
    }

    pub fn param_vector(&self) -> Result<ParamVector> {
        let pv = ParamVector::new(self.params.clone(), self.layout.clone())?;
        pv.expect_layout(&self.model.layout())?;
        Ok(pv)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| PhasorError::invalid(format!("bad checkpoint: {e}")))?;
        match &ck.model {
            ModelConfig::Vpc(c) => c.validate()?,
            ModelConfig::Transformer(c) => c.validate()?,
        }
        ck.param_vector()?;
        Ok(ck)
    }
}
