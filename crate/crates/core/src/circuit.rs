//! Declarative circuits over N threads.
//!
//! Appending validates eagerly; nothing is computed until [`Circuit::run`].
//! Measurements are non-destructive named snapshots.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{PhasorError, Result};
use crate::gates::{EncodeMode, Gate, GateInstruction, GateRegistry};
use crate::state::{coherence, phases_of, Complex, PhaseVector, PhasorState};

pub const MEASURE: &str = "measure";

#[derive(Debug, Clone)]
enum Step {
    Gate(Arc<dyn Gate>),
    Measure(String),
}

#[derive(Debug, Clone)]
pub struct Circuit {
    n_threads: usize,
    steps: Vec<Step>,
}

/// Observables captured at one point of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub state: PhasorState,
    pub phases: PhaseVector,
    pub magnitudes: Vec<f64>,
    pub coherence: f64,
    pub undefined_phase: Vec<usize>,
}

impl Snapshot {
    pub fn of(state: &PhasorState) -> Self {
        let reading = phases_of(state);
        Snapshot {
            state: state.clone(),
            phases: reading.phases,
            magnitudes: state.magnitudes(),
            coherence: coherence(state),
            undefined_phase: reading.undefined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    #[serde(rename = "final")]
    pub final_snapshot: Snapshot,
    pub snapshots: BTreeMap<String, Snapshot>,
}

impl ExecutionResult {
    pub fn final_state(&self) -> &PhasorState {
        &self.final_snapshot.state
    }

    pub fn snapshot(&self, name: &str) -> Option<&Snapshot> {
        self.snapshots.get(name)
    }
}

/// On-disk circuit description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitJson {
    pub threads: usize,
    pub instructions: Vec<GateInstruction>,
}

impl Circuit {
    pub fn new(n_threads: usize) -> Result<Self> {
        if n_threads == 0 {
            return Err(PhasorError::invalid("a circuit needs at least one thread"));
        }
        Ok(Circuit {
            n_threads,
            steps: Vec::new(),
        })
    }

    pub fn n_threads(&self) -> usize {
        self.n_threads
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `(name, position)` of every measurement.
    pub fn measurements(&self) -> Vec<(&str, usize)> {
        self.steps
            .iter()
            .enumerate()
            .filter_map(|(i, s)| match s {
                Step::Measure(name) => Some((name.as_str(), i)),
                Step::Gate(_) => None,
            })
            .collect()
    }

    pub fn append(&mut self, instruction: GateInstruction) -> Result<&mut Self> {
        self.append_with(GateRegistry::builtin(), instruction)
    }

    /// Appends an instruction resolved through `registry`. `measure`
    /// instructions are handled by the circuit itself.
    pub fn append_with(
        &mut self,
        registry: &GateRegistry,
        instruction: GateInstruction,
    ) -> Result<&mut Self> {
        let index = self.steps.len();
        let wrap = |e: PhasorError| PhasorError::InvalidInstruction {
            index,
            gate: instruction.gate.clone(),
            reason: e.to_string(),
        };
        if instruction.gate == MEASURE {
            let name = instruction.text("name").map_err(wrap)?.to_string();
            return self.measure(name);
        }
        let gate = registry.build(&instruction).map_err(wrap)?;
        gate.validate(self.n_threads).map_err(wrap)?;
        self.steps.push(Step::Gate(Arc::from(gate)));
        Ok(self)
    }

    /// Appends an already-built gate.
    pub fn push_gate(&mut self, gate: Arc<dyn Gate>) -> Result<&mut Self> {
        let index = self.steps.len();
        gate.validate(self.n_threads)
            .map_err(|e| PhasorError::InvalidInstruction {
                index,
                gate: gate.name(),
                reason: e.to_string(),
            })?;
        self.steps.push(Step::Gate(gate));
        Ok(self)
    }

    pub fn measure(&mut self, name: impl Into<String>) -> Result<&mut Self> {
        let name = name.into();
        if self.measurements().iter().any(|(n, _)| *n == name) {
            return Err(PhasorError::DuplicateMeasurement(name));
        }
        self.steps.push(Step::Measure(name));
        Ok(self)
    }

    pub fn shift(&mut self, k: usize, theta: f64) -> Result<&mut Self> {
        self.append(GateInstruction::shift(k, theta))
    }
    pub fn invert(&mut self, k: usize) -> Result<&mut Self> {
        self.append(GateInstruction::invert(k))
    }
    pub fn mix(&mut self, j: usize, k: usize) -> Result<&mut Self> {
        self.append(GateInstruction::mix(j, k))
    }
    pub fn dft(&mut self) -> Result<&mut Self> {
        self.append(GateInstruction::dft())
    }
    pub fn permute(&mut self, order: &[usize]) -> Result<&mut Self> {
        self.append(GateInstruction::permute(order))
    }
    pub fn reverse(&mut self) -> Result<&mut Self> {
        self.append(GateInstruction::reverse())
    }
    pub fn accumulate(&mut self) -> Result<&mut Self> {
        self.append(GateInstruction::accumulate())
    }
    pub fn grid_propagate(&mut self, rows: usize, cols: usize) -> Result<&mut Self> {
        self.append(GateInstruction::grid_propagate(rows, cols))
    }
    pub fn threshold(&mut self, tau: f64) -> Result<&mut Self> {
        self.append(GateInstruction::threshold(tau))
    }
    pub fn saturate(&mut self, levels: u32) -> Result<&mut Self> {
        self.append(GateInstruction::saturate(levels))
    }
    pub fn normalize(&mut self) -> Result<&mut Self> {
        self.append(GateInstruction::normalize())
    }
    /// Re-projects the state onto the torus; same as [`Circuit::normalize`].
    pub fn pullback(&mut self) -> Result<&mut Self> {
        self.normalize()
    }
    pub fn log_compress(&mut self, mu: f64) -> Result<&mut Self> {
        self.append(GateInstruction::log_compress(mu))
    }
    pub fn cross_correlate(&mut self, pattern: &[Complex]) -> Result<&mut Self> {
        self.append(GateInstruction::cross_correlate(pattern))
    }
    pub fn convolve(&mut self, kernel: &[Complex]) -> Result<&mut Self> {
        self.append(GateInstruction::convolve(kernel))
    }
    pub fn kuramoto(&mut self, k: f64, dt: f64) -> Result<&mut Self> {
        self.append(GateInstruction::kuramoto(k, dt))
    }
    pub fn hebbian(&mut self, eta: f64) -> Result<&mut Self> {
        self.append(GateInstruction::hebbian(eta))
    }
    pub fn ising(&mut self, k: f64, dt: f64) -> Result<&mut Self> {
        self.append(GateInstruction::ising(k, dt))
    }
    pub fn synaptic(&mut self, src: usize, dst: usize, eta: f64) -> Result<&mut Self> {
        self.append(GateInstruction::synaptic(src, dst, eta))
    }
    pub fn asymmetric_couple(&mut self, matrix: &[Vec<f64>], dt: f64) -> Result<&mut Self> {
        self.append(GateInstruction::asymmetric_couple(matrix, dt))
    }
    pub fn encode_phase(&mut self, values: &[f64], mode: EncodeMode) -> Result<&mut Self> {
        self.append(GateInstruction::encode_phase(values, mode))
    }
    pub fn encode_amplitude(&mut self, values: &[f64]) -> Result<&mut Self> {
        self.append(GateInstruction::encode_amplitude(values))
    }

    /// Wire-level instruction list, measurements included.
    pub fn instructions(&self) -> Vec<GateInstruction> {
        self.steps
            .iter()
            .map(|s| match s {
                Step::Gate(g) => g.instruction(),
                Step::Measure(name) => {
                    let mut p = Map::new();
                    p.insert("name".into(), Value::String(name.clone()));
                    GateInstruction::new(MEASURE, vec![], p)
                }
            })
            .collect()
    }

    /// Executes the circuit from `initial`, or from the all-ones state.
    pub fn run(&self, initial: Option<&PhasorState>) -> Result<ExecutionResult> {
        let mut state = match initial {
            Some(s) if s.n_threads() != self.n_threads => {
                return Err(PhasorError::DimensionMismatch {
                    expected: self.n_threads,
                    actual: s.n_threads(),
                })
            }
            Some(s) => s.clone(),
            None => PhasorState::ones(self.n_threads)?,
        };
        let mut snapshots = BTreeMap::new();
        for step in &self.steps {
            match step {
                Step::Gate(g) => state = g.apply(&state)?,
                Step::Measure(name) => {
                    snapshots.insert(name.clone(), Snapshot::of(&state));
                }
            }
        }
        Ok(ExecutionResult {
            final_snapshot: Snapshot::of(&state),
            snapshots,
        })
    }

    /// `G_M ⋯ G_1` for a circuit made only of linear unitary gates.
    /// Measurements are skipped.
    pub fn composite_unitary(&self) -> Result<DMatrix<Complex>> {
        let n = self.n_threads;
        let mut u = DMatrix::<Complex>::identity(n, n);
        for (index, step) in self.steps.iter().enumerate() {
            let Step::Gate(g) = step else { continue };
            let unsupported = || PhasorError::UnsupportedComposition {
                index,
                gate: g.name(),
            };
            if !g.is_unitary() {
                return Err(unsupported());
            }
            let m = g.matrix(n).ok_or_else(unsupported)?;
            u = m * u;
        }
        Ok(u)
    }

    pub fn to_json(&self) -> CircuitJson {
        CircuitJson {
            threads: self.n_threads,
            instructions: self.instructions(),
        }
    }

    pub fn from_json(spec: &CircuitJson) -> Result<Self> {
        Self::from_json_with(GateRegistry::builtin(), spec)
    }

    pub fn from_json_with(registry: &GateRegistry, spec: &CircuitJson) -> Result<Self> {
        let mut c = Circuit::new(spec.threads)?;
        for instr in &spec.instructions {
            c.append_with(registry, instr.clone())?;
        }
        Ok(c)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("circuit json is serializable")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: CircuitJson = serde_json::from_str(text)
            .map_err(|e| PhasorError::invalid(format!("bad circuit json: {e}")))?;
        Self::from_json(&spec)
    }

    /// Plain-text drawing: one rail per thread, one column per instruction.
    pub fn render_text(&self) -> String {
        let n = self.n_threads;
        let label_w = format!("t{}", n - 1).len();
        let mut rails: Vec<String> = (0..n)
            .map(|k| format!("{:<w$}: -", format!("t{k}"), w = label_w))
            .collect();
        let mut gaps: Vec<String> = vec![" ".repeat(label_w + 3); n.saturating_sub(1)];

        for step in &self.steps {
            let (code, targets) = match step {
                Step::Gate(g) => (g.code(), g.targets()),
                Step::Measure(_) => ("#".to_string(), Vec::new()),
            };
            let targets = if targets.is_empty() {
                (0..n).collect()
            } else {
                targets
            };
            let lo = *targets.iter().min().expect("non-empty");
            let hi = *targets.iter().max().expect("non-empty");
            let cell = format!("[{code}]");
            let w = cell.len();
            let mid = w / 2;
            for (k, rail) in rails.iter_mut().enumerate() {
                if targets.contains(&k) {
                    rail.push_str(&cell);
                } else if k > lo && k < hi {
                    rail.push_str(&format!("{}|{}", "-".repeat(mid), "-".repeat(w - mid - 1)));
                } else {
                    rail.push_str(&"-".repeat(w));
                }
                rail.push('-');
            }
            for (k, gap) in gaps.iter_mut().enumerate() {
                if k >= lo && k < hi {
                    gap.push_str(&format!("{}|{}", " ".repeat(mid), " ".repeat(w - mid)));
                } else {
                    gap.push_str(&" ".repeat(w + 1));
                }
            }
        }

        let mut out = String::new();
        for k in 0..n {
            out.push_str(&rails[k]);
            out.push('\n');
            if k + 1 < n {
                out.push_str(gaps[k].trim_end());
                out.push('\n');
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::apply_matrix;
    use serde_json::json;
    use crate::state::{cis, l2_norm};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn close(a: Complex, b: Complex, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn default_initial_state_is_all_ones() {
        let c = Circuit::new(4).unwrap();
        let r = c.run(None).unwrap();
        assert_eq!(r.final_state().values(), &[Complex::new(1.0, 0.0); 4]);
        assert_abs_diff_eq!(r.final_snapshot.coherence, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn append_rejects_out_of_range_target_with_index() {
        let mut c = Circuit::new(4).unwrap();
        c.dft().unwrap();
        let err = c.shift(9, 0.1).unwrap_err();
        match err {
            PhasorError::InvalidInstruction { index, gate, .. } => {
                assert_eq!(index, 1);
                assert_eq!(gate, "shift");
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn duplicate_measurement_names_rejected() {
        let mut c = Circuit::new(2).unwrap();
        c.measure("a").unwrap();
        assert!(matches!(
            c.measure("a"),
            Err(PhasorError::DuplicateMeasurement(_))
        ));
    }

    #[test]
    fn shift_then_mix_matches_hand_product() {
        let mut c = Circuit::new(2).unwrap();
        c.shift(0, PI).unwrap().mix(0, 1).unwrap();
        let out = c.run(None).unwrap();
        let s = FRAC_1_SQRT_2;
        // M·(-1, 1) = ((-1 + i)/√2, (-i + 1)/√2)
        assert!(close(out.final_state()[0], Complex::new(-s, s), 1e-12));
        assert!(close(out.final_state()[1], Complex::new(s, -s), 1e-12));
    }

    #[test]
    fn empty_circuit_returns_initial() {
        let c = Circuit::new(3).unwrap();
        let init = PhasorState::new(vec![cis(0.3), cis(-1.0), Complex::new(2.0, 0.0)]).unwrap();
        assert_eq!(c.run(Some(&init)).unwrap().final_state(), &init);
    }

    #[test]
    fn dft_on_ones_hits_dc_bin() {
        let mut c = Circuit::new(4).unwrap();
        c.dft().unwrap();
        let out = c.run(None).unwrap();
        assert!(close(out.final_state()[0], Complex::new(2.0, 0.0), 1e-12));
        for k in 1..4 {
            assert!(out.final_state()[k].norm() < 1e-12);
        }
    }

    #[test]
    fn measurements_are_non_destructive_snapshots() {
        let mut c = Circuit::new(2).unwrap();
        c.measure("start").unwrap().mix(0, 1).unwrap().measure("mixed").unwrap();
        let r = c.run(None).unwrap();
        assert_eq!(r.snapshot("start").unwrap().coherence, 1.0);
        assert_eq!(r.snapshot("mixed").unwrap().state, *r.final_state());
        let snap = r.snapshot("mixed").unwrap();
        for (k, z) in snap.state.values().iter().enumerate() {
            assert_abs_diff_eq!(snap.magnitudes[k], z.norm(), epsilon = 1e-12);
        }
    }

    #[test]
    fn run_is_bitwise_deterministic() {
        let mut c = Circuit::new(5).unwrap();
        c.shift(1, 0.7).unwrap().mix(0, 1).unwrap().dft().unwrap().kuramoto(1.0, 0.1).unwrap();
        let a = c.run(None).unwrap();
        let b = c.run(None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mix_only_circuit_has_unit_determinant() {
        let mut c = Circuit::new(4).unwrap();
        c.mix(0, 1).unwrap().mix(2, 3).unwrap().mix(1, 2).unwrap();
        let u = c.composite_unitary().unwrap();
        assert!(close(u.determinant(), Complex::new(1.0, 0.0), 1e-10));
    }

    #[test]
    fn single_shift_determinant() {
        let mut c = Circuit::new(3).unwrap();
        c.shift(2, 0.9).unwrap();
        let u = c.composite_unitary().unwrap();
        assert!(close(u.determinant(), cis(0.9), 1e-10));
    }

    #[test]
    fn composite_rejects_nonlinear_instruction() {
        let mut c = Circuit::new(2).unwrap();
        c.mix(0, 1).unwrap().normalize().unwrap();
        match c.composite_unitary() {
            Err(PhasorError::UnsupportedComposition { index, gate }) => {
                assert_eq!(index, 1);
                assert_eq!(gate, "normalize");
            }
            other => panic!("unexpected {other:?}"),
        }
        let mut c = Circuit::new(2).unwrap();
        c.accumulate().unwrap();
        assert!(c.composite_unitary().is_err());
    }

    fn random_linear_circuit(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Circuit {
        let mut c = Circuit::new(n).unwrap();
        for _ in 0..len {
            match rng.random_range(0..5) {
                0 => c.shift(rng.random_range(0..n), rng.random_range(-PI..PI)).unwrap(),
                1 => c.invert(rng.random_range(0..n)).unwrap(),
                2 => {
                    let j = rng.random_range(0..n);
                    let k = (j + rng.random_range(1..n)) % n;
                    c.mix(j, k).unwrap()
                }
                3 => c.dft().unwrap(),
                _ => {
                    let mut order: Vec<usize> = (0..n).collect();
                    for i in (1..n).rev() {
                        order.swap(i, rng.random_range(0..=i));
                    }
                    c.permute(&order).unwrap()
                }
            };
        }
        c
    }

    #[test]
    fn random_linear_circuits_are_unitary_and_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.random_range(2..9);
            let c = random_linear_circuit(&mut rng, n, 12);
            let u = c.composite_unitary().unwrap();
            let id = DMatrix::<Complex>::identity(n, n);
            let err = (&u * u.adjoint() - id).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "U U^† deviates by {err}");

            let init = PhasorState::new(
                (0..n).map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect(),
            )
            .unwrap();
            let direct = c.run(Some(&init)).unwrap();
            let via_matrix = apply_matrix(&u, &init).unwrap();
            for (a, b) in direct.final_state().values().iter().zip(via_matrix.values()) {
                assert!(close(*a, *b, 1e-10));
            }
            assert_abs_diff_eq!(l2_norm(direct.final_state()), l2_norm(&init), epsilon = 1e-10);
        }
    }

    #[test]
    fn json_roundtrip_preserves_instructions() {
        let mut c = Circuit::new(4).unwrap();
        c.shift(0, 0.25)
            .unwrap()
            .mix(0, 1)
            .unwrap()
            .measure("mid")
            .unwrap()
            .permute(&[3, 2, 1, 0])
            .unwrap()
            .convolve(&[Complex::new(0.5, 0.5)])
            .unwrap()
            .encode_phase(&[0.0, 1.0, 2.0, 3.0], EncodeMode::Tanh)
            .unwrap()
            .saturate(4)
            .unwrap();
        let text = c.to_json_string();
        let back = Circuit::from_json_str(&text).unwrap();
        assert_eq!(back.to_json(), c.to_json());
        assert_eq!(back.run(None).unwrap(), c.run(None).unwrap());
    }

    #[test]
    fn json_schema_field_names() {
        let text = r#"{ "threads": 2, "instructions": [
            { "gate": "shift", "targets": [0], "params": { "theta": 1.5707963267948966 } },
            { "gate": "mix", "targets": [0, 1], "params": {} },
            { "gate": "measure", "targets": [], "params": { "name": "out" } }
        ] }"#;
        let c = Circuit::from_json_str(text).unwrap();
        let r = c.run(None).unwrap();
        // shift(π/2) then mix: (i, 1) → (i√2, 0)
        assert!(close(r.final_state()[0], Complex::new(0.0, 2f64.sqrt()), 1e-12));
        assert_eq!(r.snapshot("out").unwrap().undefined_phase, Vec::<usize>::new());
        let v: Value = serde_json::to_value(c.to_json()).unwrap();
        assert_eq!(v["instructions"][0]["gate"], json!("shift"));
        assert_eq!(v["instructions"][2]["params"]["name"], json!("out"));
    }

    #[test]
    fn json_rejects_unknown_gate() {
        let text = r#"{ "threads": 2, "instructions": [ { "gate": "teleport" } ] }"#;
        assert!(matches!(
            Circuit::from_json_str(text),
            Err(PhasorError::InvalidInstruction { index: 0, .. })
        ));
    }

    #[test]
    fn render_single_shift() {
        let mut c = Circuit::new(1).unwrap();
        c.shift(0, 0.1).unwrap();
        assert_eq!(c.render_text(), "t0: -[S]-\n");
    }

    #[test]
    fn render_mix_bracket() {
        let mut c = Circuit::new(3).unwrap();
        c.mix(0, 2).unwrap().shift(1, 0.0).unwrap();
        let expected = "t0: -[M]-----\n      |\nt1: --|--[S]-\n      |\nt2: -[M]-----\n";
        assert_eq!(c.render_text(), expected);
    }

    #[test]
    fn render_empty_rails() {
        let c = Circuit::new(2).unwrap();
        assert_eq!(c.render_text(), "t0: -\n\nt1: -\n");
    }
}
