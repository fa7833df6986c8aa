//! Seeded synthetic data: phase classification, a multi-tone signal, and an
//! OHLCV market with an injected high-volatility window.

use std::f64::consts::PI;

use anyhow::{bail, ensure, Result};
use phasor_core::optim::LabeledDataset;
use phasor_core::PhaseVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

/// `y = 1` when `Σ cos φ_k > 0`. Phases are Uniform(−π, π); 80/20 split by
/// a seeded shuffle.
pub fn gen_classification_dataset(n: usize, dims: usize, seed: u64) -> Result<LabeledDataset<PhaseVector, usize>> {
    ensure!(n >= 1 && dims >= 1, "need at least one sample and one dimension");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<PhaseVector> = (0..n)
        .map(|_| PhaseVector((0..dims).map(|_| rng.random_range(-PI..PI)).collect()))
        .collect();
    let targets = inputs.iter().map(classify_label).collect();
    Ok(LabeledDataset::shuffled_split(inputs, targets, 0.8, &mut rng)?)
}

pub fn classify_label(phases: &PhaseVector) -> usize {
    usize::from(phases.iter().map(|p| p.cos()).sum::<f64>() > 0.0)
}

/// `sin t + 0.5 cos 3t + 0.25 sin 7t + ε` on a uniform grid over `[0, 20π]`.
pub fn gen_signal(n_points: usize, noise_std: f64, seed: u64) -> Result<Vec<f64>> {
    ensure!(n_points >= 2, "signal needs at least 2 points");
    ensure!(noise_std >= 0.0 && noise_std.is_finite(), "noise std must be ≥ 0");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_std)?;
    let step = 20.0 * PI / (n_points - 1) as f64;
    Ok((0..n_points)
        .map(|i| {
            let t = i as f64 * step;
            let clean = t.sin() + 0.5 * (3.0 * t).cos() + 0.25 * (7.0 * t).sin();
            if noise_std > 0.0 {
                clean + noise.sample(&mut rng)
            } else {
                clean
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhlcvDay {
    pub day: usize,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl OhlcvDay {
    pub fn features(&self) -> [f64; 5] {
        [self.open, self.high, self.low, self.close, self.volume]
    }
}

/// Inclusive day range of elevated volatility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crisis {
    pub start: usize,
    pub end: usize,
}

impl Crisis {
    pub const DEFAULT: Crisis = Crisis { start: 80, end: 120 };

    pub fn contains(&self, day: usize) -> bool {
        (self.start..=self.end).contains(&day)
    }
}

pub const CALM_VOL: f64 = 0.02;
pub const CRISIS_VOL: f64 = 0.10;
pub const CRISIS_VOLUME_FACTOR: f64 = 3.0;
const BASE_VOLUME: f64 = 1.0e6;
const VOLUME_SIGMA: f64 = 0.25;

/// Geometric random walk starting at 100 whose daily log-return std is 0.02,
/// or 0.10 inside the crisis. Each day opens at the previous close; high and
/// low extend past the open/close range by a half-volatility excursion.
/// Volume is lognormal with mean 10⁶, tripled during the crisis.
pub fn gen_ohlcv(days: usize, crisis: Crisis, seed: u64) -> Result<Vec<OhlcvDay>> {
    if crisis.start > crisis.end || crisis.end >= days {
        bail!("crisis window {}..={} does not fit in {days} days", crisis.start, crisis.end);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0)?;
    let volume = LogNormal::new(-VOLUME_SIGMA * VOLUME_SIGMA / 2.0, VOLUME_SIGMA)?;
    let mut prev_close = 100.0f64;
    let mut out = Vec::with_capacity(days);
    for day in 0..days {
        let in_crisis = crisis.contains(day);
        let sigma = if in_crisis { CRISIS_VOL } else { CALM_VOL };
        let open = prev_close;
        let close = open * (sigma * std_normal.sample(&mut rng)).exp();
        let up = (0.5 * sigma * std_normal.sample(&mut rng)).abs();
        let down = (0.5 * sigma * std_normal.sample(&mut rng)).abs();
        let factor = if in_crisis { CRISIS_VOLUME_FACTOR } else { 1.0 };
        out.push(OhlcvDay {
            day,
            open,
            high: open.max(close) * up.exp(),
            low: open.min(close) * (-down).exp(),
            close,
            volume: BASE_VOLUME * factor * volume.sample(&mut rng),
        });
        prev_close = close;
    }
    Ok(out)
}
