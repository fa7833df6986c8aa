//! Phasor states and the global observables computed from them.
//!
//! A [`PhasorState`] holds one complex value per thread. States built with
//! [`from_phases`] live on the N-torus (every thread has unit magnitude);
//! linear mixing moves them off it while conserving the Euclidean norm.

use std::f64::consts::PI;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{PhasorError, Result};

pub type Complex = num_complex::Complex64;

/// Maps an angle onto the canonical range `(-π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let mut w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// `arg(z)` in `(-π, π]`. `atan2` can return `-π` for a negative real with a
/// negative-zero imaginary part; that point is folded onto `π`.
pub fn phase(z: Complex) -> f64 {
    let a = z.im.atan2(z.re);
    if a <= -PI {
        PI
    } else {
        a
    }
}

/// Unit phasor `e^{iφ}`.
pub fn cis(phi: f64) -> Complex {
    let (s, c) = phi.sin_cos();
    Complex::new(c, s)
}

/// Ordered list of phase angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct PhaseVector(pub Vec<f64>);

impl PhaseVector {
    pub fn new(phases: Vec<f64>) -> Self {
        PhaseVector(phases)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }
}

impl From<Vec<f64>> for PhaseVector {
    fn from(v: Vec<f64>) -> Self {
        PhaseVector(v)
    }
}

impl Index<usize> for PhaseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Phases extracted from a state together with the threads whose phase is
/// undefined (zero magnitude, reported as phase 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReading {
    pub phases: PhaseVector,
    pub undefined: Vec<usize>,
}

/// Complex state vector over `n_threads` threads.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasorState {
    values: Vec<Complex>,
}

impl PhasorState {
    pub fn new(values: Vec<Complex>) -> Result<Self> {
        if values.is_empty() {
            return Err(PhasorError::invalid("a state needs at least one thread"));
        }
        Ok(PhasorState { values })
    }

    /// The zero-phase initial state: every thread at `1 + 0i`.
    pub fn ones(n_threads: usize) -> Result<Self> {
        Self::new(vec![Complex::new(1.0, 0.0); n_threads])
    }

    /// Builds a state from values already known to be non-empty.
    pub(crate) fn from_vec_unchecked(values: Vec<Complex>) -> Self {
        debug_assert!(!values.is_empty());
        PhasorState { values }
    }

    pub fn n_threads(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Complex] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex> {
        self.values
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    /// Threads with exactly zero magnitude.
    pub fn undefined_threads(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, z)| z.re == 0.0 && z.im == 0.0)
            .map(|(k, _)| k)
            .collect()
    }

    /// Multiplies every thread by `e^{iα}`.
    pub fn rotated(&self, alpha: f64) -> Self {
        let w = cis(alpha);
        PhasorState::from_vec_unchecked(self.values.iter().map(|z| z * w).collect())
    }

    pub(crate) fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.n_threads() {
            Err(PhasorError::IndexOutOfRange {
                index: k,
                n_threads: self.n_threads(),
            })
        } else {
            Ok(())
        }
    }
}

impl Index<usize> for PhasorState {
    type Output = Complex;
    fn index(&self, i: usize) -> &Complex {
        &self.values[i]
    }
}

impl Serialize for PhasorState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.values.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PhasorState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        PhasorState::new(pairs.into_iter().map(|[re, im]| Complex::new(re, im)).collect())
            .map_err(serde::de::Error::custom)
    }
}

/// `z_k = e^{iφ_k}` for every thread.
pub fn from_phases(phases: &PhaseVector) -> Result<PhasorState> {
    if phases.is_empty() {
        return Err(PhasorError::invalid("phase vector is empty"));
    }
    if let Some(k) = phases.iter().position(|p| !p.is_finite()) {
        return Err(PhasorError::invalid(format!("phase {k} is not finite")));
    }
    Ok(PhasorState::from_vec_unchecked(
        phases.iter().map(|&p| cis(p)).collect(),
    ))
}

pub fn phases_of(state: &PhasorState) -> PhaseReading {
    let phases = state.values().iter().map(|&z| phase(z)).collect();
    PhaseReading {
        phases: PhaseVector(phases),
        undefined: state.undefined_threads(),
    }
}

/// `(1/N)·|Σ_k z_k|`.
pub fn coherence(state: &PhasorState) -> f64 {
    let sum: Complex = state.values().iter().sum();
    sum.norm() / state.n_threads() as f64
}

pub fn l2_norm(state: &PhasorState) -> f64 {
    state
        .values()
        .iter()
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}
