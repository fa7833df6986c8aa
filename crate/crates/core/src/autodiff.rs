//! Reverse-mode differentiation through the smooth gate subset.
//!
//! A [`Program`] is a straight-line list of [`SmoothOp`]s whose Shift angles
//! are either fixed or read from a flat parameter vector. The forward pass
//! records every intermediate state; the backward pass pulls an output
//! cotangent back to the input and accumulates `dL/dθ`.
//!
//! Cotangents of a real loss with respect to a complex value `z` are carried
//! as `∂L/∂Re z + i·∂L/∂Im z`, so a linear map `A` pulls back through `A†`.

use crate::circuit::{Circuit, MEASURE};
use crate::error::{PhasorError, Result};
use crate::gates::{check_permutation, dft_values, mix_pair, GateKind};
use crate::state::{cis, Complex};

/// Angle source for a Shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle {
    Fixed(f64),
    Param(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SmoothOp {
    Shift { thread: usize, angle: Angle },
    Invert { thread: usize },
    Mix { j: usize, k: usize },
    Permute { order: Vec<usize> },
    Dft,
    Normalize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    n_threads: usize,
    n_params: usize,
    ops: Vec<SmoothOp>,
}

/// Intermediate states from a forward pass; `states[0]` is the input.
#[derive(Debug, Clone)]
pub struct Trace {
    states: Vec<Vec<Complex>>,
}

impl Trace {
    pub fn output(&self) -> &[Complex] {
        self.states.last().expect("trace holds the input")
    }
}

impl Program {
    pub fn new(n_threads: usize) -> Self {
        Program {
            n_threads,
            n_params: 0,
            ops: Vec::new(),
        }
    }

    pub fn n_threads(&self) -> usize {
        self.n_threads
    }

    /// One past the largest parameter index referenced.
    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn ops(&self) -> &[SmoothOp] {
        &self.ops
    }

    pub fn push(&mut self, op: SmoothOp) -> Result<&mut Self> {
        let n = self.n_threads;
        let check = |k: usize| {
            if k < n {
                Ok(())
            } else {
                Err(PhasorError::IndexOutOfRange {
                    index: k,
                    n_threads: n,
                })
            }
        };
        match &op {
            SmoothOp::Shift { thread, angle } => {
                check(*thread)?;
                if let Angle::Param(p) = angle {
                    self.n_params = self.n_params.max(p + 1);
                }
            }
            SmoothOp::Invert { thread } => check(*thread)?,
            SmoothOp::Mix { j, k } => {
                check(*j)?;
                check(*k)?;
                if j == k {
                    return Err(PhasorError::invalid("mix needs two distinct threads"));
                }
            }
            SmoothOp::Permute { order } => check_permutation(order, n)?,
            SmoothOp::Dft | SmoothOp::Normalize => {}
        }
        self.ops.push(op);
        Ok(self)
    }

    pub fn shift_param(&mut self, thread: usize, param: usize) -> Result<&mut Self> {
        self.push(SmoothOp::Shift {
            thread,
            angle: Angle::Param(param),
        })
    }

    /// Converts the linear-and-pullback part of a circuit. Every Shift becomes
    /// a trainable parameter, numbered in circuit order; the returned vector
    /// holds the circuit's own angles as the starting point.
    pub fn from_circuit(circuit: &Circuit) -> Result<(Program, Vec<f64>)> {
        let mut prog = Program::new(circuit.n_threads());
        let mut init = Vec::new();
        for (index, ins) in circuit.instructions().iter().enumerate() {
            if ins.gate == MEASURE {
                continue;
            }
            let unsupported = || PhasorError::UnsupportedGradient {
                index,
                gate: ins.gate.clone(),
            };
            let kind = GateKind::from_name(&ins.gate).ok_or_else(unsupported)?;
            let t = &ins.targets;
            let op = match kind {
                GateKind::Shift => {
                    init.push(ins.real("theta")?);
                    SmoothOp::Shift {
                        thread: t[0],
                        angle: Angle::Param(init.len() - 1),
                    }
                }
                GateKind::Invert => SmoothOp::Invert { thread: t[0] },
                GateKind::Mix => SmoothOp::Mix { j: t[0], k: t[1] },
                GateKind::Permute => SmoothOp::Permute {
                    order: ins.indices("order")?,
                },
                GateKind::Dft => SmoothOp::Dft,
                GateKind::Normalize => SmoothOp::Normalize,
                _ => return Err(unsupported()),
            };
            prog.push(op)?;
        }
        Ok((prog, init))
    }

    fn check_inputs(&self, z0: &[Complex], params: &[f64]) -> Result<()> {
        if z0.len() != self.n_threads {
            return Err(PhasorError::DimensionMismatch {
                expected: self.n_threads,
                actual: z0.len(),
            });
        }
        if params.len() < self.n_params {
            return Err(PhasorError::DimensionMismatch {
                expected: self.n_params,
                actual: params.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, z0: &[Complex], params: &[f64]) -> Result<Trace> {
        self.check_inputs(z0, params)?;
        let mut states = Vec::with_capacity(self.ops.len() + 1);
        states.push(z0.to_vec());
        for op in &self.ops {
            let z = states.last().unwrap();
            let next = match op {
                SmoothOp::Shift { thread, angle } => {
                    let mut out = z.clone();
                    out[*thread] *= cis(resolve(*angle, params));
                    out
                }
                SmoothOp::Invert { thread } => {
                    let mut out = z.clone();
                    out[*thread] = -out[*thread];
                    out
                }
                SmoothOp::Mix { j, k } => {
                    let mut out = z.clone();
                    let (a, b) = mix_pair(z[*j], z[*k]);
                    out[*j] = a;
                    out[*k] = b;
                    out
                }
                SmoothOp::Permute { order } => order.iter().map(|&p| z[p]).collect(),
                SmoothOp::Dft => dft_values(z, false),
                SmoothOp::Normalize => z
                    .iter()
                    .map(|&w| {
                        let m = w.norm();
                        if m > 0.0 {
                            w / m
                        } else {
                            Complex::new(0.0, 0.0)
                        }
                    })
                    .collect(),
            };
            states.push(next);
        }
        Ok(Trace { states })
    }

    /// Pulls `g_out` back through the recorded pass. Returns `dL/dθ` (length
    /// `params.len()`) and the cotangent of the input state.
    pub fn backward(&self, trace: &Trace, params: &[f64], g_out: &[Complex]) -> Result<(Vec<f64>, Vec<Complex>)> {
        if g_out.len() != self.n_threads {
            return Err(PhasorError::DimensionMismatch {
                expected: self.n_threads,
                actual: g_out.len(),
            });
        }
        let mut grad = vec![0.0; params.len()];
        let mut g = g_out.to_vec();
        for (i, op) in self.ops.iter().enumerate().rev() {
            let before = &trace.states[i];
            let after = &trace.states[i + 1];
            match op {
                SmoothOp::Shift { thread, angle } => {
                    let k = *thread;
                    let theta = resolve(*angle, params);
                    if let Angle::Param(p) = angle {
                        // z' = e^{iθ} z  ⇒  dz'/dθ = i·z'
                        grad[*p] += (g[k].conj() * Complex::i() * after[k]).re;
                    }
                    g[k] *= cis(-theta);
                }
                SmoothOp::Invert { thread } => g[*thread] = -g[*thread],
                SmoothOp::Mix { j, k } => {
                    let (a, b) = (g[*j], g[*k]);
                    let h = std::f64::consts::FRAC_1_SQRT_2;
                    g[*j] = (a - Complex::i() * b) * h;
                    g[*k] = (b - Complex::i() * a) * h;
                }
                SmoothOp::Permute { order } => {
                    let mut back = vec![Complex::new(0.0, 0.0); g.len()];
                    for (k, &p) in order.iter().enumerate() {
                        back[p] = g[k];
                    }
                    g = back;
                }
                SmoothOp::Dft => g = dft_values(&g, true),
                SmoothOp::Normalize => {
                    for k in 0..g.len() {
                        let m = before[k].norm();
                        g[k] = if m > 0.0 {
                            let u = after[k];
                            (g[k] - u * (u.conj() * g[k]).re) / m
                        } else {
                            Complex::new(0.0, 0.0)
                        };
                    }
                }
            }
        }
        Ok((grad, g))
    }
}

fn resolve(angle: Angle, params: &[f64]) -> f64 {
    match angle {
        Angle::Fixed(t) => t,
        Angle::Param(p) => params[p],
    }
}

/// Cotangent of `z` given `dL/dφ` for `φ = arg z`; zero at the origin.
pub fn arg_cotangent(z: Complex, dl_dphi: f64) -> Complex {
    let m2 = z.norm_sqr();
    if m2 > 0.0 {
        Complex::i() * z * (dl_dphi / m2)
    } else {
        Complex::new(0.0, 0.0)
    }
}
