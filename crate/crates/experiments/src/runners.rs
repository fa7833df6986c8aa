//! End-to-end runs of each experiment, returning typed reports.

use std::f64::consts::{FRAC_PI_2, PI};

use anyhow::{ensure, Result};
use phasor_core::gates::{apply_dft, apply_mix};
use phasor_core::models::{Checkpoint, ModelConfig, Readout, TransformerConfig, VpcConfig};
use phasor_core::neuro::{
    memory_recall, memory_store, recall_error, saturate_recall, lip_simulate, LipConfig,
};
use phasor_core::optim::{train_transformer, train_vpc, History, TrainConfig};
use phasor_core::{
    coherence, from_phases, Circuit, Complex, Gate, GateInstruction, GateRegistry, PhaseVector, PhasorError,
    PhasorState,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{gen_classification_dataset, gen_ohlcv, gen_signal, Crisis, OhlcvDay};

// -- classification -------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifySettings {
    pub samples: usize,
    pub threads: usize,
    pub depth: usize,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for ClassifySettings {
    fn default() -> Self {
        ClassifySettings {
            samples: 1000,
            threads: 16,
            depth: 1,
            epochs: 200,
            lr: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyReport {
    pub history: History,
    pub checkpoint: Checkpoint,
    pub validation_accuracy: f64,
    pub final_train_loss: f64,
    pub param_count: usize,
}

/// Data and parameter initialization both derive from `seed`.
pub fn run_classification(settings: &ClassifySettings, seed: u64) -> Result<ClassifyReport> {
    let data = gen_classification_dataset(settings.samples, settings.threads, seed)?;
    let cfg = VpcConfig::new(settings.threads, settings.depth, Readout::Binary)?;
    let hyper = TrainConfig {
        epochs: settings.epochs,
        lr: settings.lr,
        seed,
        batch_size: data.train.len(),
    };
    let trained = train_vpc(&data, &cfg, &hyper)?;
    let last = *trained.history.last().expect("history holds the baseline");
    Ok(ClassifyReport {
        checkpoint: Checkpoint::new(ModelConfig::Vpc(cfg), &trained.params, None)?,
        history: trained.history,
        validation_accuracy: last.val_metric,
        final_train_loss: last.train_loss,
        param_count: cfg.param_count(),
    })
}

// -- forecasting ----------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastSettings {
    pub points: usize,
    pub noise_std: f64,
    pub context: usize,
    pub depth: usize,
    pub readout_head: bool,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for ForecastSettings {
    fn default() -> Self {
        ForecastSettings {
            points: 1000,
            noise_std: 0.1,
            context: 10,
            depth: 2,
            readout_head: true,
            epochs: 100,
            lr: 0.01,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastReport {
    pub history: History,
    pub checkpoint: Checkpoint,
    pub test_mse: f64,
    pub param_count: usize,
}

pub fn run_forecast(settings: &ForecastSettings, seed: u64) -> Result<ForecastReport> {
    let series = gen_signal(settings.points, settings.noise_std, seed)?;
    let cfg = TransformerConfig::new(settings.context, settings.depth, settings.readout_head)?;
    let hyper = TrainConfig {
        epochs: settings.epochs,
        lr: settings.lr,
        seed,
        batch_size: settings.batch_size,
    };
    let trained = train_transformer(&series, &cfg, &hyper)?;
    let last = *trained.history.last().expect("history holds the baseline");
    Ok(ForecastReport {
        checkpoint: Checkpoint::new(ModelConfig::Transformer(cfg), &trained.params, Some(trained.scale))?,
        history: trained.history,
        test_mse: last.val_metric,
        param_count: cfg.param_count(),
    })
}

// -- volatility -----------------------------------------------------------

pub const VOLATILITY_WINDOW: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayCoherence {
    pub day: usize,
    pub coherence: f64,
}

/// Feature circuit for one day: encode shifts on the zero-phase state,
/// Mix on (0,1), (1,2), (2,3), then DFT.
pub fn volatility_circuit(phases: &[f64; 5]) -> Result<Circuit> {
    let mut c = Circuit::new(5)?;
    for (k, &p) in phases.iter().enumerate() {
        c.shift(k, p)?;
    }
    c.mix(0, 1)?.mix(1, 2)?.mix(2, 3)?.dft()?;
    Ok(c)
}

/// Coherence per day from the trailing-window z-score of each feature,
/// mapped by `φ = π·tanh(z)`. Days before the first full window are
/// skipped; a zero-variance window gives `z = 0`.
pub fn run_volatility_indicator(ohlcv: &[OhlcvDay], window: usize) -> Result<Vec<DayCoherence>> {
    ensure!(window >= 2, "window must span at least 2 days");
    ensure!(
        ohlcv.len() >= window,
        "series of {} days is shorter than the {window}-day window",
        ohlcv.len()
    );
    let mut out = Vec::with_capacity(ohlcv.len() + 1 - window);
    for t in window - 1..ohlcv.len() {
        let span = &ohlcv[t + 1 - window..=t];
        let today = ohlcv[t].features();
        let mut phases = [0.0; 5];
        for (f, phase) in phases.iter_mut().enumerate() {
            let xs: Vec<f64> = span.iter().map(|d| d.features()[f]).collect();
            let mean = xs.iter().sum::<f64>() / window as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / window as f64;
            let z = if var > 0.0 { (today[f] - mean) / var.sqrt() } else { 0.0 };
            *phase = PI * z.tanh();
        }
        let result = volatility_circuit(&phases)?.run(None)?;
        out.push(DayCoherence {
            day: ohlcv[t].day,
            coherence: result.final_snapshot.coherence,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolatilityReport {
    pub series: Vec<DayCoherence>,
    pub crisis_mean: f64,
    pub calm_mean: f64,
}

impl VolatilityReport {
    /// Non-crisis mean minus crisis mean.
    pub fn gap(&self) -> f64 {
        self.calm_mean - self.crisis_mean
    }
}

pub fn run_volatility(days: usize, crisis: Crisis, seed: u64) -> Result<VolatilityReport> {
    let market = gen_ohlcv(days, crisis, seed)?;
    let series = run_volatility_indicator(&market, VOLATILITY_WINDOW)?;
    let mean = |inside: bool| {
        let v: Vec<f64> = series
            .iter()
            .filter(|d| crisis.contains(d.day) == inside)
            .map(|d| d.coherence)
            .collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    Ok(VolatilityReport {
        crisis_mean: mean(true),
        calm_mean: mean(false),
        series,
    })
}

// -- period finding -------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodReport {
    pub base: u64,
    pub modulus: u64,
    pub sequence: Vec<u64>,
    pub spectrum: Vec<[f64; 2]>,
    pub magnitudes: Vec<f64>,
    pub dominant_bin: usize,
    /// Nonzero bins whose magnitude ties the dominant one within 1e-9.
    pub tied_bins: Vec<usize>,
    pub period: u64,
    pub factors: Vec<u64>,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn pow_mod(base: u64, exp: u64, modulus: u64) -> u64 {
    (0..exp).fold(1 % modulus, |acc, _| acc * base % modulus)
}

/// DFT of `base^n mod modulus` encoded as `φ_n = 2π·v_n/modulus` over
/// `len` samples. The period estimate is `len / gcd(k, len)` for the
/// dominant nonzero bin `k` (lowest index on ties), confirmed classically by
/// `base^r ≡ 1`. Factors are `gcd(base^{r/2} ± 1, modulus)`.
pub fn run_period_finding_with(base: u64, modulus: u64, len: usize) -> Result<PeriodReport> {
    ensure!(len >= 2 && modulus >= 2, "need at least two samples and a modulus ≥ 2");
    let sequence: Vec<u64> = (0..len as u64).map(|n| pow_mod(base, n, modulus)).collect();
    let phases: Vec<f64> = sequence.iter().map(|&v| 2.0 * PI * v as f64 / modulus as f64).collect();
    let mut c = Circuit::new(len)?;
    c.dft()?;
    let out = c.run(Some(&from_phases(&PhaseVector(phases))?))?;
    let spectrum: Vec<Complex> = out.final_state().values().to_vec();
    let magnitudes: Vec<f64> = spectrum.iter().map(|z| z.norm()).collect();
    let peak = magnitudes[1..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tied_bins: Vec<usize> = (1..len).filter(|&k| (magnitudes[k] - peak).abs() < 1e-9).collect();
    let dominant_bin = tied_bins[0];
    let period = (len / gcd(dominant_bin as u64, len as u64) as usize) as u64;
    ensure!(
        pow_mod(base, period, modulus) == 1,
        "spectral period {period} does not satisfy {base}^r ≡ 1 (mod {modulus})"
    );
    let mut factors = Vec::new();
    if period.is_multiple_of(2) {
        let half = pow_mod(base, period / 2, modulus);
        for f in [gcd(half + modulus - 1, modulus), gcd(half + 1, modulus)] {
            if f != 1 && f != modulus && !factors.contains(&f) {
                factors.push(f);
            }
        }
        factors.sort_unstable();
    }
    Ok(PeriodReport {
        base,
        modulus,
        sequence,
        spectrum: spectrum.iter().map(|z| [z.re, z.im]).collect(),
        magnitudes,
        dominant_bin,
        tied_bins,
        period,
        factors,
    })
}

pub fn run_period_finding() -> Result<PeriodReport> {
    run_period_finding_with(7, 15, 4)
}

// -- fibonacci ------------------------------------------------------------

pub const FIBONACCI_SWEEP: &str = "fibonacci_sweep";

/// In-place two-term recurrence `z_k ← z_{k−1} + z_{k−2}` for `k = 2..N−1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct FibonacciSweep;

impl Gate for FibonacciSweep {
    fn code(&self) -> String {
        "FS".into()
    }

    fn validate(&self, n_threads: usize) -> phasor_core::Result<()> {
        if n_threads < 2 {
            return Err(PhasorError::InvalidArgument("the sweep needs at least 2 threads".into()));
        }
        Ok(())
    }

    fn apply(&self, state: &PhasorState) -> phasor_core::Result<PhasorState> {
        self.validate(state.n_threads())?;
        let mut z = state.values().to_vec();
        for k in 2..z.len() {
            z[k] = z[k - 1] + z[k - 2];
        }
        PhasorState::new(z)
    }

    fn instruction(&self) -> GateInstruction {
        GateInstruction::new(FIBONACCI_SWEEP, vec![], Default::default())
    }
}

/// The built-in gates plus the experiment-only sweep.
pub fn gate_registry() -> GateRegistry {
    let mut r = GateRegistry::with_builtin_gates();
    r.register(FIBONACCI_SWEEP, |ins| {
        if !ins.targets.is_empty() {
            return Err(PhasorError::InvalidArgument("fibonacci_sweep acts on all threads".into()));
        }
        Ok(Box::new(FibonacciSweep))
    });
    r
}

pub fn fibonacci_circuit(n_threads: usize) -> Result<Circuit> {
    let mut c = Circuit::new(n_threads)?;
    c.append_with(&gate_registry(), FibonacciSweep.instruction())?;
    Ok(c)
}

/// Magnitudes after the sweep from amplitude 1 on threads 0 and 1.
pub fn run_fibonacci(n_threads: usize) -> Result<Vec<f64>> {
    ensure!(n_threads >= 2, "fibonacci needs at least 2 threads");
    let mut init = vec![Complex::new(0.0, 0.0); n_threads];
    init[0] = Complex::new(1.0, 0.0);
    init[1] = Complex::new(1.0, 0.0);
    let out = fibonacci_circuit(n_threads)?.run(Some(&PhasorState::new(init)?))?;
    Ok(out.final_snapshot.magnitudes)
}

// -- appendix -------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedDft {
    pub n: usize,
    pub magnitude: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixReport {
    pub sweep_points: usize,
    pub max_interference_deviation: f64,
    pub intensity_at_half_pi: f64,
    pub intensity_at_minus_half_pi: f64,
    pub aligned: Vec<AlignedDft>,
    pub max_dft_deviation: f64,
}

/// Mix interference `|out₀|² = 1 + sin Δφ` over a sweep of `Δφ ∈ [−π, π]`,
/// and `√N` amplification of a DFT-aligned input (every bin `j` checked).
pub fn run_appendix_checks() -> Result<AppendixReport> {
    let points = 1000;
    let intensity = |dphi: f64| -> Result<f64> {
        let s = from_phases(&PhaseVector(vec![dphi, 0.0]))?;
        Ok(apply_mix(&s, 0, 1)?[0].norm_sqr())
    };
    let mut max_dev = 0.0f64;
    for i in 0..points {
        let dphi = -PI + 2.0 * PI * i as f64 / (points - 1) as f64;
        max_dev = max_dev.max((intensity(dphi)? - (1.0 + dphi.sin())).abs());
    }
    let mut aligned = Vec::new();
    for n in [4usize, 16, 64] {
        let mut worst = AlignedDft {
            n,
            magnitude: 0.0,
            deviation: -1.0,
        };
        for j in 0..n {
            let phases = (0..n).map(|k| 2.0 * PI * ((j * k) % n) as f64 / n as f64).collect();
            let m = apply_dft(&from_phases(&PhaseVector(phases))?)[j].norm();
            let dev = (m - (n as f64).sqrt()).abs();
            if dev > worst.deviation {
                worst = AlignedDft {
                    n,
                    magnitude: m,
                    deviation: dev,
                };
            }
        }
        aligned.push(worst);
    }
    Ok(AppendixReport {
        sweep_points: points,
        max_interference_deviation: max_dev,
        intensity_at_half_pi: intensity(FRAC_PI_2)?,
        intensity_at_minus_half_pi: intensity(-FRAC_PI_2)?,
        max_dft_deviation: aligned.iter().map(|a| a.deviation).fold(0.0, f64::max),
        aligned,
    })
}

// -- associative memory ---------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryReport {
    pub pattern: PhaseVector,
    pub flipped: Vec<usize>,
    pub initial_error: f64,
    pub errors: Vec<f64>,
    pub saturate_exact: bool,
}

impl MemoryReport {
    /// Smallest error reached within the iteration budget.
    pub fn best_error(&self) -> f64 {
        self.errors.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

pub fn alternating_pattern(n: usize) -> PhaseVector {
    PhaseVector((0..n).map(|k| if k % 2 == 0 { 0.0 } else { PI }).collect())
}

/// One stored alternating pattern; the probe flips `round(fraction·N)`
/// seeded positions by π.
pub fn run_memory(n: usize, flip_fraction: f64, dt: f64, iterations: usize, seed: u64) -> Result<MemoryReport> {
    ensure!(n >= 2, "memory needs at least 2 threads");
    let pattern = alternating_pattern(n);
    let bank = memory_store(std::slice::from_ref(&pattern))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = ((flip_fraction * n as f64).round() as usize).min(n);
    let mut flipped = sample(&mut rng, n, count).into_vec();
    flipped.sort_unstable();
    let mut probe = pattern.0.clone();
    for &k in &flipped {
        probe[k] += PI;
    }
    let probe = from_phases(&PhaseVector(probe))?;
    let recall = memory_recall(&bank, &probe, dt, iterations)?;
    let snapped = saturate_recall(&bank, &probe, dt, iterations, 2)?;
    let target = phasor_core::gates::apply_saturate(&from_phases(&pattern)?, 2)?;
    Ok(MemoryReport {
        initial_error: recall_error(&bank, &probe),
        saturate_exact: snapped == target,
        errors: recall.errors,
        pattern,
        flipped,
    })
}

// -- binding --------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct BindingReport {
    pub trajectory: Vec<PhaseVector>,
    pub final_difference: f64,
}

pub fn run_binding(cfg: &LipConfig, initial: &PhaseVector) -> Result<BindingReport> {
    ensure!(initial.len() == 2, "binding uses two oscillators");
    let trajectory = lip_simulate(initial, cfg)?;
    let last = trajectory.last().expect("trajectory holds the initial state");
    Ok(BindingReport {
        final_difference: (last[0] - last[1]).abs(),
        trajectory,
    })
}

pub fn trajectory_coherence(phases: &PhaseVector) -> f64 {
    from_phases(phases).map(|s| coherence(&s)).unwrap_or(0.0)
}

// -- kuramoto -------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KuramotoSettings {
    pub threads: usize,
    pub coupling: f64,
    pub dt: f64,
    pub steps: usize,
    pub runs: usize,
    pub target: f64,
}

impl Default for KuramotoSettings {
    fn default() -> Self {
        KuramotoSettings {
            threads: 20,
            coupling: 3.0,
            dt: 0.1,
            steps: 50,
            runs: 100,
            target: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KuramotoReport {
    pub initial: Vec<f64>,
    pub finals: Vec<f64>,
}

impl KuramotoReport {
    pub fn count_at_least(&self, target: f64) -> usize {
        self.finals.iter().filter(|&&c| c >= target).count()
    }
}

/// `runs` Uniform(−π, π) populations drawn in sequence from `seed`, each
/// stepped through a circuit of `steps` Kuramoto gates.
pub fn run_kuramoto(settings: &KuramotoSettings, seed: u64) -> Result<KuramotoReport> {
    let mut c = Circuit::new(settings.threads)?;
    for _ in 0..settings.steps {
        c.kuramoto(settings.coupling, settings.dt)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut initial = Vec::with_capacity(settings.runs);
    let mut finals = Vec::with_capacity(settings.runs);
    for _ in 0..settings.runs {
        let phases: Vec<f64> = (0..settings.threads).map(|_| rng.random_range(-PI..PI)).collect();
        let s = from_phases(&PhaseVector(phases))?;
        initial.push(coherence(&s));
        finals.push(c.run(Some(&s))?.final_snapshot.coherence);
    }
    Ok(KuramotoReport { initial, finals })
}
