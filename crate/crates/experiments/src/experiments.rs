//! Named experiments behind a trait-object registry, each producing an
//! [`ExperimentResult`] with its acceptance checks.

use std::collections::BTreeMap;

use anyhow::{anyhow, Result};
use phasor_core::neuro::LipConfig;
use phasor_core::PhaseVector;
use serde_json::json;

use crate::data::Crisis;
use crate::report::{Check, Comparison, ExperimentResult, Table};
use crate::runners::*;

/// Command-line overrides shared by every experiment. `None` keeps the
/// experiment's reference setting.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunContext {
    pub seed: u64,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub threads: Option<usize>,
    pub depth: Option<usize>,
    pub context: Option<usize>,
}

impl RunContext {
    pub fn with_seed(seed: u64) -> Self {
        RunContext {
            seed,
            ..Default::default()
        }
    }
}

pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn run(&self, ctx: &RunContext) -> Result<ExperimentResult>;
}

pub struct Registry {
    entries: BTreeMap<&'static str, Box<dyn Experiment>>,
    order: Vec<&'static str>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            entries: BTreeMap::new(),
            order: Vec::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Registry::empty();
        r.register(Box::new(Classify));
        r.register(Box::new(Forecast));
        r.register(Box::new(Volatility));
        r.register(Box::new(PeriodFind));
        r.register(Box::new(Fibonacci));
        r.register(Box::new(Memory));
        r.register(Box::new(Binding));
        r.register(Box::new(Kuramoto));
        r.register(Box::new(VerifyAppendix));
        r
    }

    pub fn register(&mut self, e: Box<dyn Experiment>) {
        let name = e.name();
        if self.entries.insert(name, e).is_none() {
            self.order.push(name);
        }
    }

    pub fn get(&self, name: &str) -> Option<&dyn Experiment> {
        self.entries.get(name).map(|b| b.as_ref())
    }

    /// Names in registration order.
    pub fn names(&self) -> &[&'static str] {
        &self.order
    }

    pub fn run(&self, name: &str, ctx: &RunContext) -> Result<ExperimentResult> {
        self.get(name)
            .ok_or_else(|| anyhow!("unknown experiment {name:?}"))?
            .run(ctx)
    }
}

fn history_table(h: &phasor_core::optim::History, metric: &str) -> Table {
    let mut t = Table::new(["epoch", "train_loss", metric]);
    for r in &h.records {
        t.push(vec![r.epoch as f64, r.train_loss, r.val_metric]);
    }
    t
}

pub struct Classify;

impl Experiment for Classify {
    fn name(&self) -> &'static str {
        "classify"
    }

    fn summary(&self) -> &'static str {
        "variational phasor circuit on the cosine-sum labels"
    }

    fn run(&self, ctx: &RunContext) -> Result<ExperimentResult> {
        let d = ClassifySettings::default();
        let s = ClassifySettings {
            threads: ctx.threads.unwrap_or(d.threads),
            depth: ctx.depth.unwrap_or(d.depth),
            epochs: ctx.epochs.unwrap_or(d.epochs),
            lr: ctx.lr.unwrap_or(d.lr),
            ..d
        };
        let r = run_classification(&s, ctx.seed)?;
        Ok(ExperimentResult::new(self.name(), ctx.seed)
            .config("settings", s)
            .metric("validation_accuracy", r.validation_accuracy)
            .metric("final_train_loss", r.final_train_loss)
            .metric("param_count", r.param_count as f64)
            .check(Check::new("validation_accuracy", r.validation_accuracy, Comparison::Ge, 0.95))
            .check(Check::new("final_train_loss", r.final_train_loss, Comparison::Lt, 0.05))
            .table(history_table(&r.history, "val_accuracy"))
            .extra(json!({ "checkpoint": r.checkpoint })))
    }
}

pub struct Forecast;

impl Experiment for Forecast {
    fn name(&self) -> &'static str {
        "forecast"
    }

    fn summary(&self) -> &'static str {
        "phasor transformer next-step forecast of the multi-tone signal"
    }

    fn run(&self, ctx: &RunContext) -> Result<ExperimentResult> {
        let d = ForecastSettings::default();
        let s = ForecastSettings {
            context: ctx.context.unwrap_or(d.context),
            depth: ctx.depth.unwrap_or(d.depth),
            epochs: ctx.epochs.unwrap_or(d.epochs),
            lr: ctx.lr.unwrap_or(d.lr),
            ..d
        };
        let r = run_forecast(&s, ctx.seed)?;
        Ok(ExperimentResult::new(self.name(), ctx.seed)
            .config("settings", s)
            .metric("test_mse", r.test_mse)
            .metric("param_count", r.param_count as f64)
            .check(Check::new("test_mse", r.test_mse, Comparison::Le, 0.15))
            .table(history_table(&r.history, "test_mse"))
            .extra(json!({ "checkpoint": r.checkpoint })))
    }
}

pub struct Volatility;

impl Experiment for Volatility {
    fn name(&self) -> &'static str {
        "volatility"
    }

    fn summary(&self) -> &'static str {
        "coherence of normalized OHLCV features across an injected crisis"
    }

    fn run(&self, ctx: &RunContext) -> Result<ExperimentResult> {
        let crisis = Crisis::DEFAULT;
        let days = 200;
        let r = run_volatility(days, crisis, ctx.seed)?;
        let mut t = Table::new(["day", "coherence", "crisis"]);
        for d in &r.series {
            t.push(vec![d.day as f64, d.coherence, f64::from(u8::from(crisis.contains(d.day)))]);
        }
        let lo = r.series.iter().map(|d| d.coherence).fold(f64::INFINITY, f64::min);
        let hi = r.series.iter().map(|d| d.coherence).fold(f64::NEG_INFINITY, f64::max);
        Ok(ExperimentResult::new(self.name(), ctx.seed)
            .config("days", days)
            .config("crisis", crisis)
            .config("window", VOLATILITY_WINDOW)
            .metric("crisis_mean", r.crisis_mean)
            .metric("calm_mean", r.calm_mean)
            .metric("gap", r.gap())
            .check(Check::new("gap", r.gap(), Comparison::Ge, 0.2))
            .check(Check::new("min_coherence", lo, Comparison::Ge, 0.0))
            .check(Check::new("max_coherence", hi, Comparison::Le, 1.0))
            .table(t))
    }
}

pub struct PeriodFind;

impl Experiment for PeriodFind {
    fn name(&self) -> &'static str {
        "period-find"
    }

    fn summary(&self) -> &'static str {
        "spectral period of 7^n mod 15 and the derived factors"
    }

    fn run(&self, ctx: &RunContext) -> Result<ExperimentResult> {
        let r = run_period_finding()?;
        let mut t = Table::new(["bin", "re", "im", "magnitude"]);
        for (k, (z, m)) in r.spectrum.iter().zip(&r.magnitudes).enumerate() {
            t.push(vec![k as f64, z[0], z[1], *m]);
        }
        let factors_ok = r.factors == [3, 5];
        Ok(ExperimentResult::new(self.name(), ctx.seed)
            .config("base", r.base)
            .config("modulus", r.modulus)
            .metric("period", r.period as f64)
            .metric("dominant_bin", r.dominant_bin as f64)
            .check(Check::new("period", r.period as f64, Comparison::Eq, 4.0))
            .check(Check::new("factors_3_5", f64::from(u8::from(factors_ok)), Comparison::Eq, 1.0))
            .table(t)
            .extra(serde_json::to_value(&r)?))
    }
}

pub struct Fibonacci;

impl Experiment for Fibonacci {
    fn name(&self) -> &'static str {
        "fibonacci"
    }

    fn summary(&self) -> &'static str {
        "two-term sweep reproducing the Fibonacci numbers as magnitudes"
    }

    fn run(&self, ctx: &RunContext) -> Result<ExperimentResult> {
        let n = ctx.threads.unwrap_or(8);
        let m = run_fibonacci(n)?;
        let (mut a, mut b) = (1.0f64, 1.0f64);
        let mut worst = 0.0f64;
        let mut t = Table::new(["thread", "magnitude"]);
        for (k, &v) in m.iter().enumerate() {
            let want = if k < 2 { 1.0 } else {
                let c = a + b;
                a = b;
                b = c;
                c
            };
            worst = worst.max((v - want).abs());
            t.push(vec![k as f64, v]);
        }
        Ok(ExperimentResult::new(self.name(), ctx.seed)
            .config("threads", n)
            .metric("max_deviation", worst)
            .check(Check::new("max_deviation", worst, Comparison::Lt, 1e-9))
            .table(t))
    }
}

pub struct Memory;

impl Experiment for Memory {
    fn name(&self) -> &'static str {
        "memory"
    }

    fn summary(&self) -> &'static str {
        "recall of an alternating pattern from a 20%-flipped probe"
    }

    fn run(&self, ctx: &RunContext) -> Result<ExperimentResult> {
        let n = ctx.threads.unwrap_or(16);
        let r = run_memory(n, 0.2, 0.5, 10, ctx.seed)?;
        let mut t = Table::new(["iteration", "error"]);
        t.push(vec![0.0, r.initial_error]);
        for (i, e) in r.errors.iter().enumerate() {
            t.push(vec![(i + 1) as f64, *e]);
        }
        Ok(ExperimentResult::new(self.name(), ctx.seed)
            .config("threads", n)
            .config("flipped", &r.flipped)
            .metric("initial_error", r.initial_error)
            .metric("best_error", r.best_error())
            .check(Check::new("best_error", r.best_error(), Comparison::Lt, 0.05))
            .check(Check::new("saturate_exact", f64::from(u8::from(r.saturate_exact)), Comparison::Eq, 1.0))
            .table(t))
    }
}

pub struct Binding;

impl Experiment for Binding {
    fn name(&self) -> &'static str {
        "binding"
    }

    fn summary(&self) -> &'static str {
        "two-node leaky phase integrator reaching phase lock"
    }

    fn run(&self, ctx: &RunContext) -> Result<ExperimentResult> {
        let cfg = LipConfig::binding();
        let initial = PhaseVector(vec![0.3, 2.1]);
        let r = run_binding(&cfg, &initial)?;
        let mut t = Table::new(["step", "phi0", "phi1", "coherence"]);
        for (i, p) in r.trajectory.iter().enumerate().step_by(50) {
            t.push(vec![i as f64, p[0], p[1], trajectory_coherence(p)]);
        }
        Ok(ExperimentResult::new(self.name(), ctx.seed)
            .config("lip", &cfg)
            .config("initial", &initial)
            .metric("final_difference", r.final_difference)
            .check(Check::new("final_difference", r.final_difference, Comparison::Lt, 1e-3))
            .table(t))
    }
}

pub struct Kuramoto;

impl Experiment for Kuramoto {
    fn name(&self) -> &'static str {
        "kuramoto"
    }

    fn summary(&self) -> &'static str {
        "synchronization of random oscillator populations"
    }

    fn run(&self, ctx: &RunContext) -> Result<ExperimentResult> {
        let d = KuramotoSettings::default();
        let s = KuramotoSettings {
            threads: ctx.threads.unwrap_or(d.threads),
            ..d
        };
        let r = run_kuramoto(&s, ctx.seed)?;
        let hits = r.count_at_least(s.target);
        let mut t = Table::new(["run", "initial", "final"]);
        for (i, (a, b)) in r.initial.iter().zip(&r.finals).enumerate() {
            t.push(vec![i as f64, *a, *b]);
        }
        Ok(ExperimentResult::new(self.name(), ctx.seed)
            .config("settings", s)
            .metric("runs_synchronized", hits as f64)
            .metric("min_final", r.finals.iter().cloned().fold(f64::INFINITY, f64::min))
            .check(Check::new("runs_synchronized", hits as f64, Comparison::Ge, 99.0))
            .table(t))
    }
}

pub struct VerifyAppendix;

impl Experiment for VerifyAppendix {
    fn name(&self) -> &'static str {
        "verify-appendix"
    }

    fn summary(&self) -> &'static str {
        "interference law and DFT amplification"
    }

    fn run(&self, ctx: &RunContext) -> Result<ExperimentResult> {
        let r = run_appendix_checks()?;
        let mut t = Table::new(["n", "magnitude", "deviation"]);
        for a in &r.aligned {
            t.push(vec![a.n as f64, a.magnitude, a.deviation]);
        }
        Ok(ExperimentResult::new(self.name(), ctx.seed)
            .config("sweep_points", r.sweep_points)
            .metric("max_interference_deviation", r.max_interference_deviation)
            .metric("max_dft_deviation", r.max_dft_deviation)
            .metric("intensity_at_half_pi", r.intensity_at_half_pi)
            .metric("intensity_at_minus_half_pi", r.intensity_at_minus_half_pi)
            .check(Check::new("max_interference_deviation", r.max_interference_deviation, Comparison::Lt, 1e-12))
            .check(Check::new("max_dft_deviation", r.max_dft_deviation, Comparison::Lt, 1e-9))
            .table(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lists_every_experiment() {
        let r = Registry::builtin();
        assert_eq!(
            r.names(),
            ["classify", "forecast", "volatility", "period-find", "fibonacci", "memory", "binding", "kuramoto", "verify-appendix"]
        );
        assert!(r.get("nope").is_none());
        assert!(r.run("nope", &RunContext::default()).is_err());
    }

    #[test]
    fn cheap_experiments_pass() {
        let r = Registry::builtin();
        for name in ["period-find", "fibonacci", "memory", "binding", "verify-appendix"] {
            let res = r.run(name, &RunContext::default()).unwrap();
            assert!(res.passed(), "{name}: {:?}", res.checks);
        }
    }

    #[test]
    fn overrides_reach_the_runner() {
        let ctx = RunContext {
            threads: Some(12),
            ..Default::default()
        };
        let res = Registry::builtin().run("fibonacci", &ctx).unwrap();
        assert_eq!(res.table.unwrap().rows.len(), 12);
    }
}
