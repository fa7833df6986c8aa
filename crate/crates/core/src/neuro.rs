//! Leaky phase oscillators and Hebbian phase memory.

use serde::{Deserialize, Serialize};

use crate::error::{PhasorError, Result};
use crate::gates::apply_saturate;
use crate::state::{from_phases, phase, wrap_phase, Complex, PhaseVector, PhasorState};

/// Euler-integrated LIP dynamics
/// `dφ_k/dt = −γ(φ_k − φ_rest) + Σ_j W_kj·sin(φ_k − φ_j) + I_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipConfig {
    pub gamma: f64,
    pub phi_rest: f64,
    pub coupling: Vec<Vec<f64>>,
    pub drive: Vec<f64>,
    pub dt: f64,
    pub steps: usize,
}

impl LipConfig {
    /// Two nodes coupled by `W₁₂ = W₂₁ = −2` with leak 0.1: the binding
    /// configuration.
    pub fn binding() -> Self {
        LipConfig {
            gamma: 0.1,
            phi_rest: 0.0,
            coupling: vec![vec![0.0, -2.0], vec![-2.0, 0.0]],
            drive: vec![0.0, 0.0],
            dt: 0.01,
            steps: 5000,
        }
    }

    pub fn n(&self) -> usize {
        self.drive.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if !(self.dt > 0.0) {
            return Err(PhasorError::invalid("dt must be positive"));
        }
        if self.coupling.len() != n || self.coupling.iter().any(|r| r.len() != n) {
            return Err(PhasorError::invalid(format!("coupling must be {n}×{n}")));
        }
        if self.coupling.iter().flatten().chain(&self.drive).any(|v| !v.is_finite())
            || !self.gamma.is_finite()
            || !self.phi_rest.is_finite()
        {
            return Err(PhasorError::invalid("LIP parameters must be finite"));
        }
        Ok(())
    }
}

pub fn lip_step(phases: &PhaseVector, cfg: &LipConfig) -> Result<PhaseVector> {
    cfg.validate()?;
    if phases.len() != cfg.n() {
        return Err(PhasorError::DimensionMismatch {
            expected: cfg.n(),
            actual: phases.len(),
        });
    }
    Ok(step_unchecked(phases.as_slice(), cfg))
}

fn step_unchecked(phi: &[f64], cfg: &LipConfig) -> PhaseVector {
    PhaseVector(
        phi.iter()
            .enumerate()
            .map(|(k, &pk)| {
                let coupling: f64 = phi
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != k)
                    .map(|(j, &pj)| cfg.coupling[k][j] * (pk - pj).sin())
                    .sum();
                pk + cfg.dt * (-cfg.gamma * (pk - cfg.phi_rest) + coupling + cfg.drive[k])
            })
            .collect(),
    )
}

/// `steps` Euler steps; the trajectory starts with `initial`.
pub fn lip_simulate(initial: &PhaseVector, cfg: &LipConfig) -> Result<Vec<PhaseVector>> {
    let mut traj = Vec::with_capacity(cfg.steps + 1);
    traj.push(initial.clone());
    if cfg.steps > 0 {
        lip_step(initial, cfg)?;
    }
    for _ in 0..cfg.steps {
        let next = step_unchecked(traj.last().unwrap().as_slice(), cfg);
        traj.push(next);
    }
    Ok(traj)
}

/// Hebbian outer-product memory `W = (1/P)·Σ_p z⁽ᵖ⁾ z⁽ᵖ⁾†`, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBank {
    w: Vec<Vec<Complex>>,
    patterns: Vec<PhasorState>,
}

impl MemoryBank {
    pub fn n(&self) -> usize {
        self.w.len()
    }

    pub fn n_patterns(&self) -> usize {
        self.patterns.len()
    }

    pub fn weights(&self) -> &[Vec<Complex>] {
        &self.w
    }

    pub fn patterns(&self) -> &[PhasorState] {
        &self.patterns
    }

    fn apply(&self, z: &[Complex]) -> Vec<Complex> {
        self.w
            .iter()
            .map(|row| row.iter().zip(z).map(|(w, x)| w * x).sum())
            .collect()
    }
}

pub fn memory_store(patterns: &[PhaseVector]) -> Result<MemoryBank> {
    let first = patterns
        .first()
        .ok_or_else(|| PhasorError::invalid("memory needs at least one pattern"))?;
    let n = first.len();
    let states = patterns
        .iter()
        .map(|p| {
            if p.len() != n {
                return Err(PhasorError::DimensionMismatch {
                    expected: n,
                    actual: p.len(),
                });
            }
            from_phases(p)
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = 1.0 / states.len() as f64;
    let mut w = vec![vec![Complex::new(0.0, 0.0); n]; n];
    for s in &states {
        for (j, row) in w.iter_mut().enumerate() {
            for (k, wjk) in row.iter_mut().enumerate() {
                if j != k {
                    *wjk += s[j] * s[k].conj() * scale;
                }
            }
        }
    }
    Ok(MemoryBank { w, patterns: states })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recall {
    pub state: PhasorState,
    /// Mean phase error after each iteration.
    pub errors: Vec<f64>,
    /// Threads whose update vanished and were held at zero.
    pub undefined: Vec<usize>,
}

fn check_recall(bank: &MemoryBank, probe: &PhasorState, dt: f64, iterations: usize) -> Result<()> {
    if probe.n_threads() != bank.n() {
        return Err(PhasorError::DimensionMismatch {
            expected: bank.n(),
            actual: probe.n_threads(),
        });
    }
    if iterations < 1 {
        return Err(PhasorError::invalid("recall needs at least one iteration"));
    }
    if !(dt > 0.0) {
        return Err(PhasorError::invalid("recall step must be positive"));
    }
    Ok(())
}

fn recall_step(bank: &MemoryBank, z: &[Complex], dt: f64) -> Vec<Complex> {
    let wz = bank.apply(z);
    z.iter()
        .zip(wz)
        .map(|(&x, y)| {
            if x.norm_sqr() == 0.0 {
                return x;
            }
            let u = x + y * dt;
            let m = u.norm();
            if m > 0.0 {
                u / m
            } else {
                Complex::new(0.0, 0.0)
            }
        })
        .collect()
}

/// Mean circular distance to `pattern` after removing the global rotation
/// `α = arg⟨pattern, state⟩`. Zero threads count as distance π.
pub fn aligned_phase_error(state: &PhasorState, pattern: &PhasorState) -> f64 {
    let overlap: Complex = state
        .values()
        .iter()
        .zip(pattern.values())
        .map(|(x, p)| x * p.conj())
        .sum();
    let alpha = if overlap.norm_sqr() > 0.0 { phase(overlap) } else { 0.0 };
    let total: f64 = state
        .values()
        .iter()
        .zip(pattern.values())
        .map(|(&x, &p)| {
            if x.norm_sqr() == 0.0 {
                std::f64::consts::PI
            } else {
                wrap_phase(phase(x) - phase(p) - alpha).abs()
            }
        })
        .sum();
    total / state.n_threads() as f64
}

/// Error against the best-matching stored pattern.
pub fn recall_error(bank: &MemoryBank, state: &PhasorState) -> f64 {
    bank.patterns
        .iter()
        .map(|p| aligned_phase_error(state, p))
        .fold(f64::INFINITY, f64::min)
}

/// Iterates `z ← (z + δt·Wz)/|z + δt·Wz|` elementwise.
pub fn memory_recall(bank: &MemoryBank, probe: &PhasorState, dt: f64, iterations: usize) -> Result<Recall> {
    run_recall(bank, probe, dt, iterations, None)
}

/// Recall with the state quantized to `levels` anchors after each step.
pub fn saturate_recall(
    bank: &MemoryBank,
    probe: &PhasorState,
    dt: f64,
    iterations: usize,
    levels: u32,
) -> Result<PhasorState> {
    if levels < 2 {
        return Err(PhasorError::invalid("saturate needs at least 2 levels"));
    }
    Ok(run_recall(bank, probe, dt, iterations, Some(levels))?.state)
}

fn run_recall(
    bank: &MemoryBank,
    probe: &PhasorState,
    dt: f64,
    iterations: usize,
    levels: Option<u32>,
) -> Result<Recall> {
    check_recall(bank, probe, dt, iterations)?;
    let mut z = probe.values().to_vec();
    let mut errors = Vec::with_capacity(iterations);
    let mut state = probe.clone();
    for _ in 0..iterations {
        state = PhasorState::new(recall_step(bank, &z, dt))?;
        if let Some(l) = levels {
            state = apply_saturate(&state, l)?;
        }
        z = state.values().to_vec();
        errors.push(recall_error(bank, &state));
    }
    Ok(Recall {
        undefined: state.undefined_threads(),
        state,
        errors,
    })
}
