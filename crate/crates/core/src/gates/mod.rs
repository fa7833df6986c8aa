//! Primitive gates as pure state-to-state transforms.
//!
//! The free `apply_*` functions are the reference semantics. [`registry`]
//! wraps each of them behind the [`Gate`] trait so circuits can hold any gate
//! by name.

pub mod registry;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{PhasorError, Result};
use crate::state::{cis, from_phases, phase, phases_of, Complex, PhaseVector, PhasorState};

pub use registry::{Gate, GateInstruction, GateKind, GateRegistry};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(PhasorError::invalid(format!("{name} must be finite")))
    }
}

fn map_values(state: &PhasorState, f: impl Fn(Complex) -> Complex) -> PhasorState {
    PhasorState::from_vec_unchecked(state.values().iter().map(|&z| f(z)).collect())
}

// ---------------------------------------------------------------------------
// standard unitary gates

pub fn apply_shift(state: &PhasorState, k: usize, theta: f64) -> Result<PhasorState> {
    state.check_index(k)?;
    check_finite("theta", theta)?;
    let mut v = state.values().to_vec();
    v[k] *= cis(theta);
    Ok(PhasorState::from_vec_unchecked(v))
}

/// Negates thread `k` (a shift by π, computed exactly).
pub fn apply_invert(state: &PhasorState, k: usize) -> Result<PhasorState> {
    state.check_index(k)?;
    let mut v = state.values().to_vec();
    v[k] = -v[k];
    Ok(PhasorState::from_vec_unchecked(v))
}

/// 50/50 beam splitter on `(j, k)`: `(z_j + i z_k, i z_j + z_k) / √2`.
pub fn apply_mix(state: &PhasorState, j: usize, k: usize) -> Result<PhasorState> {
    state.check_index(j)?;
    state.check_index(k)?;
    if j == k {
        return Err(PhasorError::invalid("mix needs two distinct threads"));
    }
    let mut v = state.values().to_vec();
    let (a, b) = mix_pair(v[j], v[k]);
    v[j] = a;
    v[k] = b;
    Ok(PhasorState::from_vec_unchecked(v))
}

#[inline]
pub(crate) fn mix_pair(a: Complex, b: Complex) -> (Complex, Complex) {
    let i = Complex::i();
    ((a + i * b) * FRAC_1_SQRT_2, (i * a + b) * FRAC_1_SQRT_2)
}

/// `ω^m` for `m = 0..N`, `ω = e^{-2πi/N}`.
pub(crate) fn dft_twiddles(n: usize) -> Vec<Complex> {
    (0..n)
        .map(|m| cis(-2.0 * PI * m as f64 / n as f64))
        .collect()
}

/// Unitary DFT over all threads, `z'_k = N^{-1/2} Σ_n z_n ω^{kn}`.
pub fn apply_dft(state: &PhasorState) -> PhasorState {
    PhasorState::from_vec_unchecked(dft_values(state.values(), false))
}

/// Direct O(N²) evaluation; `inverse` conjugates the kernel (the adjoint).
pub(crate) fn dft_values(z: &[Complex], inverse: bool) -> Vec<Complex> {
    let n = z.len();
    let tw = dft_twiddles(n);
    let scale = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|k| {
            let mut acc = Complex::new(0.0, 0.0);
            for (m, zm) in z.iter().enumerate() {
                let w = tw[(k * m) % n];
                acc += zm * if inverse { w.conj() } else { w };
            }
            acc * scale
        })
        .collect()
}

pub(crate) fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(PhasorError::DimensionMismatch {
            expected: n,
            actual: order.len(),
        });
    }
    let mut seen = vec![false; n];
    for &p in order {
        if p >= n || seen[p] {
            return Err(PhasorError::invalid(format!(
                "{order:?} is not a permutation of 0..{n}"
            )));
        }
        seen[p] = true;
    }
    Ok(())
}

/// `out[k] = in[order[k]]`.
pub fn apply_permute(state: &PhasorState, order: &[usize]) -> Result<PhasorState> {
    check_permutation(order, state.n_threads())?;
    Ok(PhasorState::from_vec_unchecked(
        order.iter().map(|&p| state[p]).collect(),
    ))
}

/// Global complex conjugation (anti-unitary).
pub fn apply_reverse(state: &PhasorState) -> PhasorState {
    map_values(state, |z| z.conj())
}

/// Prefix sums over threads.
pub fn apply_accumulate(state: &PhasorState) -> PhasorState {
    let mut acc = Complex::new(0.0, 0.0);
    PhasorState::from_vec_unchecked(
        state
            .values()
            .iter()
            .map(|z| {
                acc += z;
                acc
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    pub rows: usize,
    pub cols: usize,
}

impl GridShape {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(PhasorError::invalid("grid dimensions must be positive"));
        }
        Ok(GridShape { rows, cols })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One wavefront sweep over a row-major lattice: every cell except the seed
/// `(0,0)` becomes the sum of its top and left neighbors from the input.
pub fn apply_grid_propagate(state: &PhasorState, shape: GridShape) -> Result<PhasorState> {
    if shape.len() != state.n_threads() {
        return Err(PhasorError::DimensionMismatch {
            expected: state.n_threads(),
            actual: shape.len(),
        });
    }
    let z = state.values();
    let at = |r: usize, c: usize| z[r * shape.cols + c];
    let mut out = Vec::with_capacity(z.len());
    for r in 0..shape.rows {
        for c in 0..shape.cols {
            if r == 0 && c == 0 {
                out.push(at(0, 0));
                continue;
            }
            let mut acc = Complex::new(0.0, 0.0);
            if r > 0 {
                acc += at(r - 1, c);
            }
            if c > 0 {
                acc += at(r, c - 1);
            }
            out.push(acc);
        }
    }
    Ok(PhasorState::from_vec_unchecked(out))
}

// ---------------------------------------------------------------------------
// non-linear projections

fn unit(z: Complex) -> Complex {
    let m = z.norm();
    if m == 0.0 {
        Complex::new(0.0, 0.0)
    } else {
        cis(phase(z))
    }
}

/// `z/|z|` where `|z| ≥ τ`, otherwise 0.
pub fn apply_threshold(state: &PhasorState, tau: f64) -> Result<PhasorState> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(PhasorError::invalid("threshold tau must be finite and >= 0"));
    }
    Ok(map_values(state, |z| {
        let m = z.norm();
        if m >= tau && m > 0.0 {
            cis(phase(z))
        } else {
            Complex::new(0.0, 0.0)
        }
    }))
}

/// Level index for `arg(z)` quantized to `L` anchors; midpoints go to the
/// larger index.
pub(crate) fn saturate_level(theta: f64, levels: u32) -> i64 {
    let step = 2.0 * PI / levels as f64;
    (theta / step + 0.5).floor() as i64
}

/// Snaps each phase to the nearest multiple of `2π/L`. Zero threads snap to
/// level 0.
pub fn apply_saturate(state: &PhasorState, levels: u32) -> Result<PhasorState> {
    if levels < 2 {
        return Err(PhasorError::invalid("saturate needs at least 2 levels"));
    }
    Ok(map_values(state, |z| anchor(saturate_level(phase(z), levels), levels)))
}

/// `e^{2πi·level/L}`, exact at quarter turns so binary anchors are exactly ±1.
fn anchor(level: i64, levels: u32) -> Complex {
    let l = i64::from(levels);
    let level = level.rem_euclid(l);
    if (4 * level) % l == 0 {
        return match 4 * level / l {
            0 => Complex::new(1.0, 0.0),
            1 => Complex::new(0.0, 1.0),
            2 => Complex::new(-1.0, 0.0),
            _ => Complex::new(0.0, -1.0),
        };
    }
    cis(2.0 * PI * level as f64 / levels as f64)
}

/// Pull-back onto the torus. Zero threads stay zero (undefined phase).
pub fn apply_normalize(state: &PhasorState) -> PhasorState {
    map_values(state, unit)
}

/// μ-law style magnitude compression `ln(1+μm)/ln(1+μ)`, phase kept.
pub fn apply_log_compress(state: &PhasorState, mu: f64) -> Result<PhasorState> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(PhasorError::invalid("log_compress mu must be finite and > 0"));
    }
    let denom = mu.ln_1p();
    Ok(map_values(state, |z| {
        let m = z.norm();
        if m == 0.0 {
            z
        } else {
            z * ((mu * m).ln_1p() / denom / m)
        }
    }))
}

fn check_kernel(kernel: &[Complex], n: usize, what: &str) -> Result<()> {
    if kernel.is_empty() {
        return Err(PhasorError::invalid(format!("{what} is empty")));
    }
    if kernel.len() > n {
        return Err(PhasorError::invalid(format!(
            "{what} length {} exceeds {n} threads",
            kernel.len()
        )));
    }
    Ok(())
}

/// Circular normalized correlation `out[k] = (1/P) Σ_j in[(k+j) mod N]·conj(p[j])`.
pub fn apply_cross_correlate(state: &PhasorState, pattern: &[Complex]) -> Result<PhasorState> {
    let n = state.n_threads();
    check_kernel(pattern, n, "pattern")?;
    let z = state.values();
    let p = pattern.len() as f64;
    Ok(PhasorState::from_vec_unchecked(
        (0..n)
            .map(|k| {
                pattern
                    .iter()
                    .enumerate()
                    .map(|(j, q)| z[(k + j) % n] * q.conj())
                    .sum::<Complex>()
                    / p
            })
            .collect(),
    ))
}

/// Circular convolution `out[k] = Σ_j h[j]·in[(k−j) mod N]`.
pub fn apply_convolve(state: &PhasorState, kernel: &[Complex]) -> Result<PhasorState> {
    let n = state.n_threads();
    check_kernel(kernel, n, "kernel")?;
    let z = state.values();
    Ok(PhasorState::from_vec_unchecked(
        (0..n)
            .map(|k| {
                kernel
                    .iter()
                    .enumerate()
                    .map(|(j, h)| h * z[(k + n - j) % n])
                    .sum()
            })
            .collect(),
    ))
}

// ---------------------------------------------------------------------------
// neuromorphic phase updates: read phases, step, re-emit unit phasors

fn phase_step(state: &PhasorState, delta: impl Fn(&[f64], usize) -> f64) -> PhasorState {
    let phi = phases_of(state).phases.0;
    let next: Vec<f64> = (0..phi.len()).map(|k| phi[k] + delta(&phi, k)).collect();
    from_phases(&PhaseVector(next)).expect("phases derived from a valid state are finite")
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(PhasorError::invalid("dt must be finite and > 0"))
    }
}

/// One explicit-Euler mean-field Kuramoto step, `φ_k += K·dt·r·sin(ψ − φ_k)`.
pub fn apply_kuramoto(state: &PhasorState, coupling: f64, dt: f64) -> Result<PhasorState> {
    check_dt(dt)?;
    check_finite("k", coupling)?;
    let phi = phases_of(state).phases.0;
    let mean: Complex = phi.iter().map(|&p| cis(p)).sum::<Complex>() / phi.len() as f64;
    let (r, psi) = (mean.norm(), mean.arg());
    Ok(phase_step(state, |phi, k| {
        coupling * dt * r * (psi - phi[k]).sin()
    }))
}

fn chain_neighbors(n: usize, k: usize) -> impl Iterator<Item = usize> {
    let left = k.checked_sub(1);
    let right = if k + 1 < n { Some(k + 1) } else { None };
    left.into_iter().chain(right)
}

/// Nearest-neighbor phase pull on an open chain.
pub fn apply_hebbian_pull(state: &PhasorState, eta: f64) -> Result<PhasorState> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(PhasorError::invalid("hebbian eta must be finite and >= 0"));
    }
    let n = state.n_threads();
    Ok(phase_step(state, |phi, k| {
        eta * chain_neighbors(n, k)
            .map(|j| (phi[j] - phi[k]).sin())
            .sum::<f64>()
    }))
}

/// Anti-aligning nearest-neighbor step on an open chain.
pub fn apply_ising(state: &PhasorState, coupling: f64, dt: f64) -> Result<PhasorState> {
    check_dt(dt)?;
    check_finite("k", coupling)?;
    let n = state.n_threads();
    Ok(phase_step(state, |phi, k| {
        -coupling
            * dt
            * chain_neighbors(n, k)
                .map(|j| (phi[j] - phi[k]).sin())
                .sum::<f64>()
    }))
}

/// Directed drag of `dst` toward `src`; `src` is untouched.
pub fn apply_synaptic(state: &PhasorState, src: usize, dst: usize, eta: f64) -> Result<PhasorState> {
    state.check_index(src)?;
    state.check_index(dst)?;
    if src == dst {
        return Err(PhasorError::invalid("synaptic source and target must differ"));
    }
    check_finite("eta", eta)?;
    Ok(phase_step(state, |phi, k| {
        if k == dst {
            eta * (phi[src] - phi[dst]).sin()
        } else {
            0.0
        }
    }))
}

/// `φ_k += dt·Σ_j A[k][j]·sin(φ_j − φ_k)` with an arbitrary (non-symmetric) `A`.
pub fn apply_asymmetric_couple(
    state: &PhasorState,
    matrix: &[Vec<f64>],
    dt: f64,
) -> Result<PhasorState> {
    check_dt(dt)?;
    check_coupling_matrix(matrix, state.n_threads())?;
    Ok(phase_step(state, |phi, k| {
        dt * matrix[k]
            .iter()
            .zip(phi)
            .map(|(a, pj)| a * (pj - phi[k]).sin())
            .sum::<f64>()
    }))
}

pub(crate) fn check_coupling_matrix(matrix: &[Vec<f64>], n: usize) -> Result<()> {
    if matrix.len() != n {
        return Err(PhasorError::DimensionMismatch {
            expected: n,
            actual: matrix.len(),
        });
    }
    for row in matrix {
        if row.len() != n {
            return Err(PhasorError::DimensionMismatch {
                expected: n,
                actual: row.len(),
            });
        }
        if row.iter().any(|a| !a.is_finite()) {
            return Err(PhasorError::invalid("coupling matrix entries must be finite"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// encoding

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodeMode {
    /// min-max onto `[0, 2π)`
    Linear,
    /// `φ = π·tanh(x)`
    Tanh,
    /// `φ = x`
    Direct,
}

impl std::str::FromStr for EncodeMode {
    type Err = PhasorError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(EncodeMode::Linear),
            "tanh" => Ok(EncodeMode::Tanh),
            "direct" => Ok(EncodeMode::Direct),
            other => Err(PhasorError::invalid(format!("unknown encode mode `{other}`"))),
        }
    }
}

impl EncodeMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EncodeMode::Linear => "linear",
            EncodeMode::Tanh => "tanh",
            EncodeMode::Direct => "direct",
        }
    }
}

pub fn encode_phase(values: &[f64], mode: EncodeMode) -> Result<PhasorState> {
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(PhasorError::invalid(format!("value {k} is not finite")));
    }
    let phases = match mode {
        EncodeMode::Direct => values.to_vec(),
        EncodeMode::Tanh => values.iter().map(|v| PI * v.tanh()).collect(),
        EncodeMode::Linear => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo) {
                return Err(PhasorError::invalid(
                    "linear encoding needs a non-constant input",
                ));
            }
            // evenly spaced without the endpoint, so the maximum stays below 2π
            let n = values.len() as f64;
            let span = 2.0 * PI * (n - 1.0) / n;
            values.iter().map(|v| (v - lo) / (hi - lo) * span).collect()
        }
    };
    from_phases(&PhaseVector(phases))
}

/// Replaces magnitudes, keeps phases (`arg(0)` taken as 0).
pub fn encode_amplitude(state: &PhasorState, magnitudes: &[f64]) -> Result<PhasorState> {
    if magnitudes.len() != state.n_threads() {
        return Err(PhasorError::DimensionMismatch {
            expected: state.n_threads(),
            actual: magnitudes.len(),
        });
    }
    if magnitudes.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
        return Err(PhasorError::invalid("magnitudes must be finite and >= 0"));
    }
    Ok(PhasorState::from_vec_unchecked(
        state
            .values()
            .iter()
            .zip(magnitudes)
            .map(|(&z, &m)| if m == 0.0 { Complex::new(0.0, 0.0) } else { cis(phase(z)) * m })
            .collect(),
    ))
}

// ---------------------------------------------------------------------------
// matrices of the linear gates

pub(crate) fn identity(n: usize) -> DMatrix<Complex> {
    DMatrix::identity(n, n)
}

pub(crate) fn shift_matrix(n: usize, k: usize, theta: f64) -> DMatrix<Complex> {
    let mut m = identity(n);
    m[(k, k)] = cis(theta);
    m
}

pub(crate) fn invert_matrix(n: usize, k: usize) -> DMatrix<Complex> {
    let mut m = identity(n);
    m[(k, k)] = Complex::new(-1.0, 0.0);
    m
}

pub(crate) fn mix_matrix(n: usize, j: usize, k: usize) -> DMatrix<Complex> {
    let mut m = identity(n);
    let d = Complex::new(FRAC_1_SQRT_2, 0.0);
    let o = Complex::new(0.0, FRAC_1_SQRT_2);
    m[(j, j)] = d;
    m[(k, k)] = d;
    m[(j, k)] = o;
    m[(k, j)] = o;
    m
}

pub(crate) fn dft_matrix(n: usize) -> DMatrix<Complex> {
    let tw = dft_twiddles(n);
    let s = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, n, |r, c| tw[(r * c) % n] * s)
}

pub(crate) fn permute_matrix(order: &[usize]) -> DMatrix<Complex> {
    let n = order.len();
    let mut m = DMatrix::zeros(n, n);
    for (k, &p) in order.iter().enumerate() {
        m[(k, p)] = Complex::new(1.0, 0.0);
    }
    m
}

pub(crate) fn accumulate_matrix(n: usize) -> DMatrix<Complex> {
    DMatrix::from_fn(n, n, |r, c| {
        if c <= r {
            Complex::new(1.0, 0.0)
        } else {
            Complex::new(0.0, 0.0)
        }
    })
}

/// Matrix of a linear gate on `n_threads` threads.
pub fn gate_matrix(instruction: &GateInstruction, n_threads: usize) -> Result<DMatrix<Complex>> {
    let gate = GateRegistry::builtin().build(instruction)?;
    gate.validate(n_threads)?;
    gate.matrix(n_threads)
        .ok_or_else(|| PhasorError::NotLinear(instruction.gate.clone()))
}

/// Applies a matrix to a state vector.
pub fn apply_matrix(m: &DMatrix<Complex>, state: &PhasorState) -> Result<PhasorState> {
    if m.ncols() != state.n_threads() {
        return Err(PhasorError::DimensionMismatch {
            expected: m.ncols(),
            actual: state.n_threads(),
        });
    }
    let v = nalgebra::DVector::from_column_slice(state.values());
    PhasorState::new((m * v).iter().copied().collect())
}

#[cfg(test)]
mod tests;
