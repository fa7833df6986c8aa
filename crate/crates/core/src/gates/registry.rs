//! Name-keyed gate registry.
//!
//! Every gate implements [`Gate`]. A [`GateRegistry`] maps the canonical
//! lowercase gate name to a builder that turns a wire-level
//! [`GateInstruction`] into a boxed gate, so circuits loaded from JSON and
//! circuits built in code go through the same validation.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::*;

/// Identifier of every primitive gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    Shift,
    Invert,
    Mix,
    Dft,
    Permute,
    Reverse,
    Accumulate,
    GridPropagate,
    Threshold,
    Saturate,
    Normalize,
    LogCompress,
    CrossCorrelate,
    Convolve,
    Kuramoto,
    Hebbian,
    Ising,
    Synaptic,
    AsymmetricCouple,
    EncodePhase,
    EncodeAmplitude,
}

impl GateKind {
    pub const ALL: [GateKind; 21] = [
        GateKind::Shift,
        GateKind::Invert,
        GateKind::Mix,
        GateKind::Dft,
        GateKind::Permute,
        GateKind::Reverse,
        GateKind::Accumulate,
        GateKind::GridPropagate,
        GateKind::Threshold,
        GateKind::Saturate,
        GateKind::Normalize,
        GateKind::LogCompress,
        GateKind::CrossCorrelate,
        GateKind::Convolve,
        GateKind::Kuramoto,
        GateKind::Hebbian,
        GateKind::Ising,
        GateKind::Synaptic,
        GateKind::AsymmetricCouple,
        GateKind::EncodePhase,
        GateKind::EncodeAmplitude,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            GateKind::Shift => "shift",
            GateKind::Invert => "invert",
            GateKind::Mix => "mix",
            GateKind::Dft => "dft",
            GateKind::Permute => "permute",
            GateKind::Reverse => "reverse",
            GateKind::Accumulate => "accumulate",
            GateKind::GridPropagate => "grid_propagate",
            GateKind::Threshold => "threshold",
            GateKind::Saturate => "saturate",
            GateKind::Normalize => "normalize",
            GateKind::LogCompress => "log_compress",
            GateKind::CrossCorrelate => "cross_correlate",
            GateKind::Convolve => "convolve",
            GateKind::Kuramoto => "kuramoto",
            GateKind::Hebbian => "hebbian",
            GateKind::Ising => "ising",
            GateKind::Synaptic => "synaptic",
            GateKind::AsymmetricCouple => "asymmetric_couple",
            GateKind::EncodePhase => "encode_phase",
            GateKind::EncodeAmplitude => "encode_amplitude",
        }
    }

    /// Short code used by the text renderer.
    pub fn code(&self) -> &'static str {
        match self {
            GateKind::Shift => "S",
            GateKind::Invert => "I",
            GateKind::Mix => "M",
            GateKind::Dft => "F",
            GateKind::Permute => "P",
            GateKind::Reverse => "R",
            GateKind::Accumulate => "A",
            GateKind::GridPropagate => "G",
            GateKind::Threshold => "T",
            GateKind::Saturate => "Q",
            GateKind::Normalize => "N",
            GateKind::LogCompress => "L",
            GateKind::CrossCorrelate => "CC",
            GateKind::Convolve => "CV",
            GateKind::Kuramoto => "K",
            GateKind::Hebbian => "H",
            GateKind::Ising => "Z",
            GateKind::Synaptic => "Y",
            GateKind::AsymmetricCouple => "AC",
            GateKind::EncodePhase => "EP",
            GateKind::EncodeAmplitude => "EA",
        }
    }

    pub fn from_name(name: &str) -> Option<GateKind> {
        GateKind::ALL.iter().copied().find(|k| k.name() == name)
    }

    /// Shift, Invert, Mix, DFT and Permute: exact members of U(N).
    pub fn is_unitary(&self) -> bool {
        matches!(
            self,
            GateKind::Shift | GateKind::Invert | GateKind::Mix | GateKind::Dft | GateKind::Permute
        )
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Wire-level description of one gate application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateInstruction {
    pub gate: String,
    #[serde(default)]
    pub targets: Vec<usize>,
    #[serde(default)]
    pub params: Map<String, Value>,
}

fn params(pairs: Value) -> Map<String, Value> {
    match pairs {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

fn complex_json(v: &[Complex]) -> Value {
    Value::Array(v.iter().map(|z| json!([z.re, z.im])).collect())
}

impl GateInstruction {
    pub fn new(gate: impl Into<String>, targets: Vec<usize>, params: Map<String, Value>) -> Self {
        GateInstruction {
            gate: gate.into(),
            targets,
            params,
        }
    }

    fn bare(kind: GateKind, targets: Vec<usize>) -> Self {
        Self::new(kind.name(), targets, Map::new())
    }

    pub fn shift(k: usize, theta: f64) -> Self {
        Self::new("shift", vec![k], params(json!({ "theta": theta })))
    }
    pub fn invert(k: usize) -> Self {
        Self::bare(GateKind::Invert, vec![k])
    }
    pub fn mix(j: usize, k: usize) -> Self {
        Self::bare(GateKind::Mix, vec![j, k])
    }
    pub fn dft() -> Self {
        Self::bare(GateKind::Dft, vec![])
    }
    pub fn permute(order: &[usize]) -> Self {
        Self::new("permute", vec![], params(json!({ "order": order })))
    }
    pub fn reverse() -> Self {
        Self::bare(GateKind::Reverse, vec![])
    }
    pub fn accumulate() -> Self {
        Self::bare(GateKind::Accumulate, vec![])
    }
    pub fn grid_propagate(rows: usize, cols: usize) -> Self {
        Self::new(
            "grid_propagate",
            vec![],
            params(json!({ "rows": rows, "cols": cols })),
        )
    }
    pub fn threshold(tau: f64) -> Self {
        Self::new("threshold", vec![], params(json!({ "tau": tau })))
    }
    pub fn saturate(levels: u32) -> Self {
        Self::new("saturate", vec![], params(json!({ "levels": levels })))
    }
    pub fn normalize() -> Self {
        Self::bare(GateKind::Normalize, vec![])
    }
    pub fn log_compress(mu: f64) -> Self {
        Self::new("log_compress", vec![], params(json!({ "mu": mu })))
    }
    pub fn cross_correlate(pattern: &[Complex]) -> Self {
        let mut p = Map::new();
        p.insert("kernel".into(), complex_json(pattern));
        Self::new("cross_correlate", vec![], p)
    }
    pub fn convolve(kernel: &[Complex]) -> Self {
        let mut p = Map::new();
        p.insert("kernel".into(), complex_json(kernel));
        Self::new("convolve", vec![], p)
    }
    pub fn kuramoto(k: f64, dt: f64) -> Self {
        Self::new("kuramoto", vec![], params(json!({ "k": k, "dt": dt })))
    }
    pub fn hebbian(eta: f64) -> Self {
        Self::new("hebbian", vec![], params(json!({ "eta": eta })))
    }
    pub fn ising(k: f64, dt: f64) -> Self {
        Self::new("ising", vec![], params(json!({ "k": k, "dt": dt })))
    }
    pub fn synaptic(src: usize, dst: usize, eta: f64) -> Self {
        Self::new("synaptic", vec![src, dst], params(json!({ "eta": eta })))
    }
    pub fn asymmetric_couple(matrix: &[Vec<f64>], dt: f64) -> Self {
        Self::new(
            "asymmetric_couple",
            vec![],
            params(json!({ "matrix": matrix, "dt": dt })),
        )
    }
    pub fn encode_phase(values: &[f64], mode: EncodeMode) -> Self {
        Self::new(
            "encode_phase",
            vec![],
            params(json!({ "values": values, "mode": mode.as_str() })),
        )
    }
    pub fn encode_amplitude(values: &[f64]) -> Self {
        Self::new("encode_amplitude", vec![], params(json!({ "values": values })))
    }

    // parameter accessors; errors name the missing or malformed key

    fn param(&self, key: &str) -> Result<&Value> {
        self.params
            .get(key)
            .ok_or_else(|| PhasorError::invalid(format!("{}: missing param `{key}`", self.gate)))
    }

    fn bad(&self, key: &str, want: &str) -> PhasorError {
        PhasorError::invalid(format!("{}: param `{key}` must be {want}", self.gate))
    }

    pub fn real(&self, key: &str) -> Result<f64> {
        let v = self
            .param(key)?
            .as_f64()
            .ok_or_else(|| self.bad(key, "a number"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.bad(key, "finite"))
        }
    }

    pub fn integer(&self, key: &str) -> Result<u64> {
        self.param(key)?
            .as_u64()
            .ok_or_else(|| self.bad(key, "a non-negative integer"))
    }

    pub fn reals(&self, key: &str) -> Result<Vec<f64>> {
        let arr = self
            .param(key)?
            .as_array()
            .ok_or_else(|| self.bad(key, "an array of numbers"))?;
        arr.iter()
            .map(|v| {
                v.as_f64()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| self.bad(key, "an array of finite numbers"))
            })
            .collect()
    }

    pub fn indices(&self, key: &str) -> Result<Vec<usize>> {
        let arr = self
            .param(key)?
            .as_array()
            .ok_or_else(|| self.bad(key, "an array of indices"))?;
        arr.iter()
            .map(|v| {
                v.as_u64()
                    .map(|x| x as usize)
                    .ok_or_else(|| self.bad(key, "an array of indices"))
            })
            .collect()
    }

    pub fn complexes(&self, key: &str) -> Result<Vec<Complex>> {
        let arr = self
            .param(key)?
            .as_array()
            .ok_or_else(|| self.bad(key, "an array of [re, im] pairs"))?;
        arr.iter()
            .map(|pair| match pair.as_array().map(|p| p.as_slice()) {
                Some([re, im]) => match (re.as_f64(), im.as_f64()) {
                    (Some(re), Some(im)) if re.is_finite() && im.is_finite() => {
                        Ok(Complex::new(re, im))
                    }
                    _ => Err(self.bad(key, "an array of finite [re, im] pairs")),
                },
                _ => Err(self.bad(key, "an array of [re, im] pairs")),
            })
            .collect()
    }

    pub fn matrix(&self, key: &str) -> Result<Vec<Vec<f64>>> {
        let rows = self
            .param(key)?
            .as_array()
            .ok_or_else(|| self.bad(key, "an array of rows"))?;
        rows.iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| self.bad(key, "an array of rows"))?
                    .iter()
                    .map(|v| {
                        v.as_f64()
                            .filter(|x| x.is_finite())
                            .ok_or_else(|| self.bad(key, "a matrix of finite numbers"))
                    })
                    .collect()
            })
            .collect()
    }

    pub fn text(&self, key: &str) -> Result<&str> {
        self.param(key)?
            .as_str()
            .ok_or_else(|| self.bad(key, "a string"))
    }

    fn target_count(&self, n: usize) -> Result<()> {
        if self.targets.len() == n {
            Ok(())
        } else {
            Err(PhasorError::invalid(format!(
                "{} takes {n} target(s), got {}",
                self.gate,
                self.targets.len()
            )))
        }
    }
}

/// A gate that can be placed in a circuit.
pub trait Gate: Send + Sync + fmt::Debug {
    /// Built-in kind; `None` for gates defined outside this crate.
    fn kind(&self) -> Option<GateKind> {
        None
    }

    /// Name used in circuit JSON.
    fn name(&self) -> String {
        self.instruction().gate
    }

    /// Short label for the text renderer.
    fn code(&self) -> String {
        self.kind().map_or_else(|| "?".to_string(), |k| k.code().to_string())
    }

    fn is_unitary(&self) -> bool {
        self.kind().is_some_and(|k| k.is_unitary())
    }

    /// Checks that the gate fits a state of `n_threads` threads.
    fn validate(&self, n_threads: usize) -> Result<()>;

    fn apply(&self, state: &PhasorState) -> Result<PhasorState>;

    /// Threads the gate acts on; empty means all threads.
    fn targets(&self) -> Vec<usize> {
        Vec::new()
    }

    /// Matrix form, only for linear gates.
    fn matrix(&self, _n_threads: usize) -> Option<DMatrix<Complex>> {
        None
    }

    /// Wire-level description that rebuilds this gate.
    fn instruction(&self) -> GateInstruction;
}

fn index_ok(k: usize, n: usize) -> Result<()> {
    if k < n {
        Ok(())
    } else {
        Err(PhasorError::IndexOutOfRange {
            index: k,
            n_threads: n,
        })
    }
}

fn length_ok(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(PhasorError::DimensionMismatch { expected, actual })
    }
}

fn any_n(_: usize) -> Result<()> {
    Ok(())
}

macro_rules! whole_state_gate {
    ($name:ident, $kind:expr, |$s:ident| $apply:expr, $matrix:expr) => {
        #[derive(Debug, Clone)]
        pub struct $name;

        impl Gate for $name {
            fn kind(&self) -> Option<GateKind> {
                Some($kind)
            }
            fn validate(&self, n: usize) -> Result<()> {
                any_n(n)
            }
            fn apply(&self, $s: &PhasorState) -> Result<PhasorState> {
                Ok($apply)
            }
            fn matrix(&self, n: usize) -> Option<DMatrix<Complex>> {
                let f: fn(usize) -> Option<DMatrix<Complex>> = $matrix;
                f(n)
            }
            fn instruction(&self) -> GateInstruction {
                GateInstruction::bare($kind, vec![])
            }
        }
    };
}

whole_state_gate!(Dft, GateKind::Dft, |s| apply_dft(s), |n| Some(dft_matrix(n)));
whole_state_gate!(Reverse, GateKind::Reverse, |s| apply_reverse(s), |_| None);
whole_state_gate!(
    Accumulate,
    GateKind::Accumulate,
    |s| apply_accumulate(s),
    |n| Some(accumulate_matrix(n))
);
whole_state_gate!(Normalize, GateKind::Normalize, |s| apply_normalize(s), |_| None);

#[derive(Debug, Clone)]
pub struct Shift {
    pub k: usize,
    pub theta: f64,
}

impl Gate for Shift {
    fn kind(&self) -> Option<GateKind> {
        Some(GateKind::Shift)
    }
    fn validate(&self, n: usize) -> Result<()> {
        index_ok(self.k, n)
    }
    fn apply(&self, s: &PhasorState) -> Result<PhasorState> {
        apply_shift(s, self.k, self.theta)
    }
    fn targets(&self) -> Vec<usize> {
        vec![self.k]
    }
    fn matrix(&self, n: usize) -> Option<DMatrix<Complex>> {
        Some(shift_matrix(n, self.k, self.theta))
    }
    fn instruction(&self) -> GateInstruction {
        GateInstruction::shift(self.k, self.theta)
    }
}

#[derive(Debug, Clone)]
pub struct Invert {
    pub k: usize,
}

impl Gate for Invert {
    fn kind(&self) -> Option<GateKind> {
        Some(GateKind::Invert)
    }
    fn validate(&self, n: usize) -> Result<()> {
        index_ok(self.k, n)
    }
    fn apply(&self, s: &PhasorState) -> Result<PhasorState> {
        apply_invert(s, self.k)
    }
    fn targets(&self) -> Vec<usize> {
        vec![self.k]
    }
    fn matrix(&self, n: usize) -> Option<DMatrix<Complex>> {
        Some(invert_matrix(n, self.k))
    }
    fn instruction(&self) -> GateInstruction {
        GateInstruction::invert(self.k)
    }
}

#[derive(Debug, Clone)]
pub struct Mix {
    pub j: usize,
    pub k: usize,
}

impl Gate for Mix {
    fn kind(&self) -> Option<GateKind> {
        Some(GateKind::Mix)
    }
    fn validate(&self, n: usize) -> Result<()> {
        index_ok(self.j, n)?;
        index_ok(self.k, n)
    }
    fn apply(&self, s: &PhasorState) -> Result<PhasorState> {
        apply_mix(s, self.j, self.k)
    }
    fn targets(&self) -> Vec<usize> {
        vec![self.j, self.k]
    }
    fn matrix(&self, n: usize) -> Option<DMatrix<Complex>> {
        Some(mix_matrix(n, self.j, self.k))
    }
    fn instruction(&self) -> GateInstruction {
        GateInstruction::mix(self.j, self.k)
    }
}

#[derive(Debug, Clone)]
pub struct Permute {
    pub order: Vec<usize>,
}

impl Gate for Permute {
    fn kind(&self) -> Option<GateKind> {
        Some(GateKind::Permute)
    }
    fn validate(&self, n: usize) -> Result<()> {
        check_permutation(&self.order, n)
    }
    fn apply(&self, s: &PhasorState) -> Result<PhasorState> {
        apply_permute(s, &self.order)
    }
    fn matrix(&self, _n: usize) -> Option<DMatrix<Complex>> {
        Some(permute_matrix(&self.order))
    }
    fn instruction(&self) -> GateInstruction {
        GateInstruction::permute(&self.order)
    }
}

#[derive(Debug, Clone)]
pub struct GridPropagate {
    pub shape: GridShape,
}

impl Gate for GridPropagate {
    fn kind(&self) -> Option<GateKind> {
        Some(GateKind::GridPropagate)
    }
    fn validate(&self, n: usize) -> Result<()> {
        length_ok(n, self.shape.len())
    }
    fn apply(&self, s: &PhasorState) -> Result<PhasorState> {
        apply_grid_propagate(s, self.shape)
    }
    fn instruction(&self) -> GateInstruction {
        GateInstruction::grid_propagate(self.shape.rows, self.shape.cols)
    }
}

#[derive(Debug, Clone)]
pub struct Threshold {
    pub tau: f64,
}

impl Gate for Threshold {
    fn kind(&self) -> Option<GateKind> {
        Some(GateKind::Threshold)
    }
    fn validate(&self, n: usize) -> Result<()> {
        any_n(n)
    }
    fn apply(&self, s: &PhasorState) -> Result<PhasorState> {
        apply_threshold(s, self.tau)
    }
    fn instruction(&self) -> GateInstruction {
        GateInstruction::threshold(self.tau)
    }
}

#[derive(Debug, Clone)]
pub struct Saturate {
    pub levels: u32,
}

impl Gate for Saturate {
    fn kind(&self) -> Option<GateKind> {
        Some(GateKind::Saturate)
    }
    fn validate(&self, n: usize) -> Result<()> {
        any_n(n)
    }
    fn apply(&self, s: &PhasorState) -> Result<PhasorState> {
        apply_saturate(s, self.levels)
    }
    fn instruction(&self) -> GateInstruction {
        GateInstruction::saturate(self.levels)
    }
}

#[derive(Debug, Clone)]
pub struct LogCompress {
    pub mu: f64,
}

impl Gate for LogCompress {
    fn kind(&self) -> Option<GateKind> {
        Some(GateKind::LogCompress)
    }
    fn validate(&self, n: usize) -> Result<()> {
        any_n(n)
    }
    fn apply(&self, s: &PhasorState) -> Result<PhasorState> {
        apply_log_compress(s, self.mu)
    }
    fn instruction(&self) -> GateInstruction {
        GateInstruction::log_compress(self.mu)
    }
}

#[derive(Debug, Clone)]
pub struct CrossCorrelate {
    pub pattern: Vec<Complex>,
}

impl Gate for CrossCorrelate {
    fn kind(&self) -> Option<GateKind> {
        Some(GateKind::CrossCorrelate)
    }
    fn validate(&self, n: usize) -> Result<()> {
        check_kernel(&self.pattern, n, "pattern")
    }
    fn apply(&self, s: &PhasorState) -> Result<PhasorState> {
        apply_cross_correlate(s, &self.pattern)
    }
    fn instruction(&self) -> GateInstruction {
        GateInstruction::cross_correlate(&self.pattern)
    }
}

#[derive(Debug, Clone)]
pub struct Convolve {
    pub kernel: Vec<Complex>,
}

impl Gate for Convolve {
    fn kind(&self) -> Option<GateKind> {
        Some(GateKind::Convolve)
    }
    fn validate(&self, n: usize) -> Result<()> {
        check_kernel(&self.kernel, n, "kernel")
    }
    fn apply(&self, s: &PhasorState) -> Result<PhasorState> {
        apply_convolve(s, &self.kernel)
    }
    fn instruction(&self) -> GateInstruction {
        GateInstruction::convolve(&self.kernel)
    }
}

#[derive(Debug, Clone)]
pub struct Kuramoto {
    pub coupling: f64,
    pub dt: f64,
}

impl Gate for Kuramoto {
    fn kind(&self) -> Option<GateKind> {
        Some(GateKind::Kuramoto)
    }
    fn validate(&self, n: usize) -> Result<()> {
        any_n(n)
    }
    fn apply(&self, s: &PhasorState) -> Result<PhasorState> {
        apply_kuramoto(s, self.coupling, self.dt)
    }
    fn instruction(&self) -> GateInstruction {
        GateInstruction::kuramoto(self.coupling, self.dt)
    }
}

#[derive(Debug, Clone)]
pub struct Hebbian {
    pub eta: f64,
}

impl Gate for Hebbian {
    fn kind(&self) -> Option<GateKind> {
        Some(GateKind::Hebbian)
    }
    fn validate(&self, n: usize) -> Result<()> {
        any_n(n)
    }
    fn apply(&self, s: &PhasorState) -> Result<PhasorState> {
        apply_hebbian_pull(s, self.eta)
    }
    fn instruction(&self) -> GateInstruction {
        GateInstruction::hebbian(self.eta)
    }
}

#[derive(Debug, Clone)]
pub struct Ising {
    pub coupling: f64,
    pub dt: f64,
}

impl Gate for Ising {
    fn kind(&self) -> Option<GateKind> {
        Some(GateKind::Ising)
    }
    fn validate(&self, n: usize) -> Result<()> {
        any_n(n)
    }
    fn apply(&self, s: &PhasorState) -> Result<PhasorState> {
        apply_ising(s, self.coupling, self.dt)
    }
    fn instruction(&self) -> GateInstruction {
        GateInstruction::ising(self.coupling, self.dt)
    }
}

#[derive(Debug, Clone)]
pub struct Synaptic {
    pub src: usize,
    pub dst: usize,
    pub eta: f64,
}

impl Gate for Synaptic {
    fn kind(&self) -> Option<GateKind> {
        Some(GateKind::Synaptic)
    }
    fn validate(&self, n: usize) -> Result<()> {
        index_ok(self.src, n)?;
        index_ok(self.dst, n)
    }
    fn apply(&self, s: &PhasorState) -> Result<PhasorState> {
        apply_synaptic(s, self.src, self.dst, self.eta)
    }
    fn targets(&self) -> Vec<usize> {
        vec![self.src, self.dst]
    }
    fn instruction(&self) -> GateInstruction {
        GateInstruction::synaptic(self.src, self.dst, self.eta)
    }
}

#[derive(Debug, Clone)]
pub struct AsymmetricCouple {
    pub matrix: Vec<Vec<f64>>,
    pub dt: f64,
}

impl Gate for AsymmetricCouple {
    fn kind(&self) -> Option<GateKind> {
        Some(GateKind::AsymmetricCouple)
    }
    fn validate(&self, n: usize) -> Result<()> {
        check_coupling_matrix(&self.matrix, n)
    }
    fn apply(&self, s: &PhasorState) -> Result<PhasorState> {
        apply_asymmetric_couple(s, &self.matrix, self.dt)
    }
    fn instruction(&self) -> GateInstruction {
        GateInstruction::asymmetric_couple(&self.matrix, self.dt)
    }
}

/// Replaces the state with encoded data.
#[derive(Debug, Clone)]
pub struct EncodePhase {
    pub values: Vec<f64>,
    pub mode: EncodeMode,
}

impl Gate for EncodePhase {
    fn kind(&self) -> Option<GateKind> {
        Some(GateKind::EncodePhase)
    }
    fn validate(&self, n: usize) -> Result<()> {
        length_ok(n, self.values.len())
    }
    fn apply(&self, s: &PhasorState) -> Result<PhasorState> {
        length_ok(s.n_threads(), self.values.len())?;
        encode_phase(&self.values, self.mode)
    }
    fn instruction(&self) -> GateInstruction {
        GateInstruction::encode_phase(&self.values, self.mode)
    }
}

#[derive(Debug, Clone)]
pub struct EncodeAmplitude {
    pub values: Vec<f64>,
}

impl Gate for EncodeAmplitude {
    fn kind(&self) -> Option<GateKind> {
        Some(GateKind::EncodeAmplitude)
    }
    fn validate(&self, n: usize) -> Result<()> {
        length_ok(n, self.values.len())
    }
    fn apply(&self, s: &PhasorState) -> Result<PhasorState> {
        encode_amplitude(s, &self.values)
    }
    fn instruction(&self) -> GateInstruction {
        GateInstruction::encode_amplitude(&self.values)
    }
}

pub type GateBuilder = fn(&GateInstruction) -> Result<Box<dyn Gate>>;

fn build_shift(i: &GateInstruction) -> Result<Box<dyn Gate>> {
    i.target_count(1)?;
    Ok(Box::new(Shift {
        k: i.targets[0],
        theta: i.real("theta")?,
    }))
}

fn build_invert(i: &GateInstruction) -> Result<Box<dyn Gate>> {
    i.target_count(1)?;
    Ok(Box::new(Invert { k: i.targets[0] }))
}

fn build_mix(i: &GateInstruction) -> Result<Box<dyn Gate>> {
    i.target_count(2)?;
    if i.targets[0] == i.targets[1] {
        return Err(PhasorError::invalid("mix needs two distinct threads"));
    }
    Ok(Box::new(Mix {
        j: i.targets[0],
        k: i.targets[1],
    }))
}

fn build_permute(i: &GateInstruction) -> Result<Box<dyn Gate>> {
    i.target_count(0)?;
    let order = i.indices("order")?;
    check_permutation(&order, order.len())?;
    Ok(Box::new(Permute { order }))
}

fn build_grid(i: &GateInstruction) -> Result<Box<dyn Gate>> {
    i.target_count(0)?;
    let shape = GridShape::new(i.integer("rows")? as usize, i.integer("cols")? as usize)?;
    Ok(Box::new(GridPropagate { shape }))
}

fn build_threshold(i: &GateInstruction) -> Result<Box<dyn Gate>> {
    i.target_count(0)?;
    let tau = i.real("tau")?;
    if tau < 0.0 {
        return Err(PhasorError::invalid("threshold tau must be >= 0"));
    }
    Ok(Box::new(Threshold { tau }))
}

fn build_saturate(i: &GateInstruction) -> Result<Box<dyn Gate>> {
    i.target_count(0)?;
    let levels = i.integer("levels")?;
    if !(2..=u32::MAX as u64).contains(&levels) {
        return Err(PhasorError::invalid("saturate needs at least 2 levels"));
    }
    Ok(Box::new(Saturate {
        levels: levels as u32,
    }))
}

fn build_log_compress(i: &GateInstruction) -> Result<Box<dyn Gate>> {
    i.target_count(0)?;
    let mu = i.real("mu")?;
    if mu <= 0.0 {
        return Err(PhasorError::invalid("log_compress mu must be > 0"));
    }
    Ok(Box::new(LogCompress { mu }))
}

fn build_cross_correlate(i: &GateInstruction) -> Result<Box<dyn Gate>> {
    i.target_count(0)?;
    let pattern = i.complexes("kernel")?;
    if pattern.is_empty() {
        return Err(PhasorError::invalid("pattern is empty"));
    }
    Ok(Box::new(CrossCorrelate { pattern }))
}

fn build_convolve(i: &GateInstruction) -> Result<Box<dyn Gate>> {
    i.target_count(0)?;
    let kernel = i.complexes("kernel")?;
    if kernel.is_empty() {
        return Err(PhasorError::invalid("kernel is empty"));
    }
    Ok(Box::new(Convolve { kernel }))
}

fn positive_dt(i: &GateInstruction) -> Result<f64> {
    let dt = i.real("dt")?;
    if dt <= 0.0 {
        return Err(PhasorError::invalid(format!("{}: dt must be > 0", i.gate)));
    }
    Ok(dt)
}

fn build_kuramoto(i: &GateInstruction) -> Result<Box<dyn Gate>> {
    i.target_count(0)?;
    Ok(Box::new(Kuramoto {
        coupling: i.real("k")?,
        dt: positive_dt(i)?,
    }))
}

fn build_hebbian(i: &GateInstruction) -> Result<Box<dyn Gate>> {
    i.target_count(0)?;
    let eta = i.real("eta")?;
    if eta < 0.0 {
        return Err(PhasorError::invalid("hebbian eta must be >= 0"));
    }
    Ok(Box::new(Hebbian { eta }))
}

fn build_ising(i: &GateInstruction) -> Result<Box<dyn Gate>> {
    i.target_count(0)?;
    Ok(Box::new(Ising {
        coupling: i.real("k")?,
        dt: positive_dt(i)?,
    }))
}

fn build_synaptic(i: &GateInstruction) -> Result<Box<dyn Gate>> {
    i.target_count(2)?;
    if i.targets[0] == i.targets[1] {
        return Err(PhasorError::invalid("synaptic source and target must differ"));
    }
    Ok(Box::new(Synaptic {
        src: i.targets[0],
        dst: i.targets[1],
        eta: i.real("eta")?,
    }))
}

fn build_asymmetric(i: &GateInstruction) -> Result<Box<dyn Gate>> {
    i.target_count(0)?;
    let matrix = i.matrix("matrix")?;
    check_coupling_matrix(&matrix, matrix.len())?;
    Ok(Box::new(AsymmetricCouple {
        matrix,
        dt: positive_dt(i)?,
    }))
}

fn build_encode_phase(i: &GateInstruction) -> Result<Box<dyn Gate>> {
    i.target_count(0)?;
    let values = i.reals("values")?;
    let mode: EncodeMode = i.text("mode")?.parse()?;
    // surface constant-input errors at build time
    encode_phase(&values, mode)?;
    Ok(Box::new(EncodePhase { values, mode }))
}

fn build_encode_amplitude(i: &GateInstruction) -> Result<Box<dyn Gate>> {
    i.target_count(0)?;
    let values = i.reals("values")?;
    if values.iter().any(|m| *m < 0.0) {
        return Err(PhasorError::invalid("magnitudes must be >= 0"));
    }
    Ok(Box::new(EncodeAmplitude { values }))
}

/// Maps gate names to builders.
pub struct GateRegistry {
    builders: BTreeMap<String, GateBuilder>,
}

impl fmt::Debug for GateRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GateRegistry")
            .field("gates", &self.builders.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl GateRegistry {
    pub fn empty() -> Self {
        GateRegistry {
            builders: BTreeMap::new(),
        }
    }

    /// Registry with all 21 primitive gates.
    pub fn with_builtin_gates() -> Self {
        let mut r = Self::empty();
        r.register("shift", build_shift);
        r.register("invert", build_invert);
        r.register("mix", build_mix);
        r.register("dft", |i| {
            i.target_count(0)?;
            Ok(Box::new(Dft))
        });
        r.register("permute", build_permute);
        r.register("reverse", |i| {
            i.target_count(0)?;
            Ok(Box::new(Reverse))
        });
        r.register("accumulate", |i| {
            i.target_count(0)?;
            Ok(Box::new(Accumulate))
        });
        r.register("grid_propagate", build_grid);
        r.register("threshold", build_threshold);
        r.register("saturate", build_saturate);
        r.register("normalize", |i| {
            i.target_count(0)?;
            Ok(Box::new(Normalize))
        });
        r.register("log_compress", build_log_compress);
        r.register("cross_correlate", build_cross_correlate);
        r.register("convolve", build_convolve);
        r.register("kuramoto", build_kuramoto);
        r.register("hebbian", build_hebbian);
        r.register("ising", build_ising);
        r.register("synaptic", build_synaptic);
        r.register("asymmetric_couple", build_asymmetric);
        r.register("encode_phase", build_encode_phase);
        r.register("encode_amplitude", build_encode_amplitude);
        r
    }

    /// Shared registry of the primitive gates.
    pub fn builtin() -> &'static GateRegistry {
        static REGISTRY: OnceLock<GateRegistry> = OnceLock::new();
        REGISTRY.get_or_init(GateRegistry::with_builtin_gates)
    }

    /// Adds or replaces the builder for `name`.
    pub fn register(&mut self, name: impl Into<String>, builder: GateBuilder) {
        self.builders.insert(name.into(), builder);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.builders.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.builders.keys().map(String::as_str)
    }

    pub fn build(&self, instruction: &GateInstruction) -> Result<Box<dyn Gate>> {
        let builder = self
            .builders
            .get(&instruction.gate)
            .ok_or_else(|| PhasorError::UnknownGate(instruction.gate.clone()))?;
        builder(instruction)
    }
}
