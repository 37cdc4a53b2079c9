//! Discrete-time satisfaction and robustness.

use thiserror::Error;

use crate::formula::{compile, CompiledExpr, CompiledFormula, DerivativeSide, Formula, Node, ValidationError};
use crate::signal::Signal;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonitorError {
    #[error("invalid formula: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ValidationError>),
    #[error("step {step} needs sample {needed}, but the signal has samples 0..={last}")]
    OutOfRange { step: usize, needed: i64, last: usize },
    #[error("derivative at step {step} needs a sample beyond the signal boundary")]
    DerivativeAtBoundary { step: usize },
}

/// Robustness of one subformula at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeValue {
    pub node: usize,
    pub step: usize,
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport {
    pub value: f64,
    /// `value >= 0`; zero robustness counts as satisfaction.
    pub satisfied: bool,
    /// Every evaluated `(node, step)` pair, sorted; empty unless requested.
    pub per_node: Vec<NodeValue>,
}

/// A formula compiled against a signal's dimensions and time step.
pub struct Monitor<'s> {
    signal: &'s Signal,
    formula: CompiledFormula,
}

impl<'s> Monitor<'s> {
    pub fn new(signal: &'s Signal, f: &Formula) -> Result<Self, MonitorError> {
        let formula = compile(f, signal.delta_t, &signal.dims).map_err(MonitorError::Invalid)?;
        Ok(Monitor { signal, formula })
    }

    pub fn from_compiled(signal: &'s Signal, formula: CompiledFormula) -> Self {
        Monitor { signal, formula }
    }

    pub fn compiled(&self) -> &CompiledFormula {
        &self.formula
    }

    /// Boolean satisfaction at step `k`.
    pub fn sat(&self, k: usize) -> Result<bool, MonitorError> {
        let mut ev = Eval::<Option<bool>>::new(self);
        ev.check_range(k)?;
        ev.sat(self.formula.root, k)
    }

    /// Robustness at step `k`, optionally with every intermediate value.
    pub fn robustness(&self, k: usize, per_node: bool) -> Result<RobustnessReport, MonitorError> {
        let mut ev = Eval::<f64>::new(self);
        ev.check_range(k)?;
        let value = ev.rob(self.formula.root, k)?;
        let per_node = if per_node { ev.table() } else { Vec::new() };
        Ok(RobustnessReport { value, satisfied: value >= 0.0, per_node })
    }
}

/// Boolean satisfaction of `f` by `s` at step `k`.
pub fn sat(s: &Signal, f: &Formula, k: usize) -> Result<bool, MonitorError> {
    Monitor::new(s, f)?.sat(k)
}

/// Robustness of `f` on `s` at step `k`.
pub fn robustness(s: &Signal, f: &Formula, k: usize) -> Result<RobustnessReport, MonitorError> {
    Monitor::new(s, f)?.robustness(k, false)
}

trait Unset: Copy {
    const UNSET: Self;
}

impl Unset for f64 {
    const UNSET: f64 = f64::NAN;
}

impl Unset for Option<bool> {
    const UNSET: Option<bool> = None;
}

struct Eval<'a, 's, T> {
    m: &'a Monitor<'s>,
    stride: usize,
    memo: Vec<T>,
}

impl<'a, 's, T: Unset> Eval<'a, 's, T> {
    fn new(m: &'a Monitor<'s>) -> Self {
        let stride = m.signal.samples.len();
        Eval { m, stride, memo: vec![T::UNSET; stride * m.formula.len()] }
    }

    fn check_range(&self, k: usize) -> Result<(), MonitorError> {
        let last = self.m.signal.last_step();
        if k > last {
            return Err(MonitorError::OutOfRange { step: k, needed: k as i64, last });
        }
        Ok(())
    }

    fn sample(&self, k: i64, step: usize) -> Result<&[f64], MonitorError> {
        let last = self.m.signal.last_step();
        if k < 0 || k > last as i64 {
            return Err(MonitorError::OutOfRange { step, needed: k, last });
        }
        Ok(&self.m.signal.samples[k as usize])
    }

    /// Atom robustness; sign matches the discrete satisfaction check exactly.
    fn atom(&self, id: usize, k: usize) -> Result<Option<f64>, MonitorError> {
        let dt = self.m.signal.delta_t;
        let g = |e: &CompiledExpr, j: i64| -> Result<f64, MonitorError> { Ok(e.eval(self.sample(j, k)?)) };
        let ki = k as i64;
        Ok(Some(match self.m.formula.node(id) {
            Node::Pred { expr, threshold } => g(expr, ki)? - threshold,
            Node::Integral { expr, a, b, threshold } => {
                let mut sum = 0.0;
                for j in ki + a..ki + b {
                    sum += g(expr, j)? * dt;
                }
                sum - threshold
            }
            Node::Derivative { expr, side, threshold } => {
                let (prev, next) = match side {
                    DerivativeSide::Right => (ki, ki + 1),
                    DerivativeSide::Left => (ki - 1, ki),
                };
                if prev < 0 || next > self.m.signal.last_step() as i64 {
                    return Err(MonitorError::DerivativeAtBoundary { step: k });
                }
                (g(expr, next)? - g(expr, prev)? - threshold * dt) / dt
            }
            _ => return Ok(None),
        }))
    }
}

impl Eval<'_, '_, f64> {
    fn rob(&mut self, id: usize, k: usize) -> Result<f64, MonitorError> {
        let slot = id * self.stride + k;
        if !self.memo[slot].is_nan() {
            return Ok(self.memo[slot]);
        }
        let v = match self.atom(id, k)? {
            Some(v) => v,
            None => match self.m.formula.node(id).clone() {
                Node::Not(c) => -self.rob(c, k)?,
                Node::And(cs) => {
                    let mut v = f64::INFINITY;
                    for c in cs {
                        v = v.min(self.rob(c, k)?);
                    }
                    v
                }
                Node::Or(cs) => {
                    let mut v = f64::NEG_INFINITY;
                    for c in cs {
                        v = v.max(self.rob(c, k)?);
                    }
                    v
                }
                Node::Globally { lo, hi, child } => {
                    let mut v = f64::INFINITY;
                    for j in k + lo..=k + hi {
                        v = v.min(self.rob(child, j)?);
                    }
                    v
                }
                Node::Eventually { lo, hi, child } => {
                    let mut v = f64::NEG_INFINITY;
                    for j in k + lo..=k + hi {
                        v = v.max(self.rob(child, j)?);
                    }
                    v
                }
                _ => unreachable!("atoms handled above"),
            },
        };
        self.memo[slot] = v;
        Ok(v)
    }

    fn table(&self) -> Vec<NodeValue> {
        let mut out = Vec::new();
        for node in 0..self.m.formula.len() {
            let label = self.m.formula.label(node);
            for step in 0..self.stride {
                let value = self.memo[node * self.stride + step];
                if !value.is_nan() {
                    out.push(NodeValue { node, step, label: label.clone(), value });
                }
            }
        }
        out
    }
}

impl Eval<'_, '_, Option<bool>> {
    fn sat(&mut self, id: usize, k: usize) -> Result<bool, MonitorError> {
        let slot = id * self.stride + k;
        if let Some(b) = self.memo[slot] {
            return Ok(b);
        }
        let b = match self.atom(id, k)? {
            Some(v) => v >= 0.0,
            None => match self.m.formula.node(id).clone() {
                Node::Not(c) => !self.sat(c, k)?,
                Node::And(cs) => {
                    let mut all = true;
                    for c in cs {
                        all &= self.sat(c, k)?;
                    }
                    all
                }
                Node::Or(cs) => {
                    let mut any = false;
                    for c in cs {
                        any |= self.sat(c, k)?;
                    }
                    any
                }
                Node::Globally { lo, hi, child } => {
                    let mut all = true;
                    for j in k + lo..=k + hi {
                        all &= self.sat(child, j)?;
                    }
                    all
                }
                Node::Eventually { lo, hi, child } => {
                    let mut any = false;
                    for j in k + lo..=k + hi {
                        any |= self.sat(child, j)?;
                    }
                    any
                }
                _ => unreachable!("atoms handled above"),
            },
        };
        self.memo[slot] = Some(b);
        Ok(b)
    }
}
