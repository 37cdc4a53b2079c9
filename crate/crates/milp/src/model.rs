//! In-memory mixed-integer linear model.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::ModelError;

/// Opaque handle to a model variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

/// A single linear row `Σ coeff·var  sense  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinConstraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinConstraint {
    /// Smallest and largest attainable activity given per-variable bounds.
    pub fn activity_range(&self, bounds: &[(f64, f64)]) -> (f64, f64) {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for &(v, a) in &self.terms {
            let (l, u) = bounds[v.0];
            if a >= 0.0 {
                lo += a * l;
                hi += a * u;
            } else {
                lo += a * u;
                hi += a * l;
            }
        }
        (lo, hi)
    }

    /// Signed violation of the row at `x` (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act: f64 = self.terms.iter().map(|&(v, a)| a * x[v.0]).sum();
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// Minimisation model over continuous and binary variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpModel {
    vars: Vec<Variable>,
    constraints: Vec<LinConstraint>,
    objective: Vec<(VarId, f64)>,
    objective_offset: f64,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lo: f64, hi: f64) -> VarId {
        let (lo, hi) = match kind {
            VarKind::Binary => (lo.max(0.0), hi.min(1.0)),
            VarKind::Continuous => (lo, hi),
        };
        self.vars.push(Variable {
            name: name.into(),
            kind,
            lo,
            hi,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lo: f64, hi: f64) -> VarId {
        self.add_var(name, VarKind::Continuous, lo, hi)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    /// Adds a row, merging repeated variables and dropping zero coefficients.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        let terms = merge_terms(terms);
        self.constraints.push(LinConstraint {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn set_objective(&mut self, terms: impl IntoIterator<Item = (VarId, f64)>, offset: f64) {
        self.objective = merge_terms(terms);
        self.objective_offset = offset;
    }

    pub fn set_bounds(&mut self, v: VarId, lo: f64, hi: f64) {
        let var = &mut self.vars[v.0];
        var.lo = lo;
        var.hi = hi;
    }

    /// Changes the kind of `v`; binaries are clamped to `[0, 1]`.
    pub fn set_kind(&mut self, v: VarId, kind: VarKind) {
        let var = &mut self.vars[v.0];
        var.kind = kind;
        if kind == VarKind::Binary {
            var.lo = var.lo.max(0.0);
            var.hi = var.hi.min(1.0);
        }
    }

    pub fn var(&self, v: VarId) -> &Variable {
        &self.vars[v.0]
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn constraints(&self) -> &[LinConstraint] {
        &self.constraints
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn objective_offset(&self) -> f64 {
        self.objective_offset
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| VarId(i))
    }

    pub fn num_binaries(&self) -> usize {
        self.binaries().count()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.vars.iter().map(|v| (v.lo, v.hi)).collect()
    }

    pub fn find_var(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn evaluate_objective(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().map(|&(v, c)| c * x[v.0]).sum::<f64>()
    }

    /// Largest row violation, bound violation and integrality violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> (f64, f64, f64) {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(x) / (1.0 + c.rhs.abs()))
            .fold(0.0, f64::max);
        let mut bounds: f64 = 0.0;
        let mut integrality: f64 = 0.0;
        for (v, &xv) in self.vars.iter().zip(x) {
            bounds = bounds.max(v.lo - xv).max(xv - v.hi);
            if v.kind == VarKind::Binary {
                integrality = integrality.max((xv - xv.round()).abs());
            }
        }
        (rows, bounds, integrality)
    }

    /// Checks that every referenced variable exists, names are unique and
    /// binaries are boxed in `[0, 1]`.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.vars.len();
        let mut seen = BTreeMap::new();
        for (i, v) in self.vars.iter().enumerate() {
            if v.name.is_empty() {
                return Err(ModelError::EmptyName(i));
            }
            if let Some(prev) = seen.insert(v.name.as_str(), i) {
                return Err(ModelError::DuplicateName {
                    name: v.name.clone(),
                    first: prev,
                    second: i,
                });
            }
            if v.lo.is_nan() || v.hi.is_nan() {
                return Err(ModelError::InvalidBounds(v.name.clone()));
            }
            if v.kind == VarKind::Binary && (v.lo < 0.0 || v.hi > 1.0) {
                return Err(ModelError::BinaryBounds(v.name.clone()));
            }
        }
        let check = |v: VarId, ctx: &str| {
            if v.0 >= n {
                Err(ModelError::UnknownVariable {
                    var: v.0,
                    context: ctx.to_string(),
                })
            } else {
                Ok(())
            }
        };
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(ModelError::NonFiniteCoefficient(c.name.clone()));
            }
            for &(v, a) in &c.terms {
                check(v, &c.name)?;
                if !a.is_finite() {
                    return Err(ModelError::NonFiniteCoefficient(c.name.clone()));
                }
            }
        }
        for &(v, a) in &self.objective {
            check(v, "objective")?;
            if !a.is_finite() {
                return Err(ModelError::NonFiniteCoefficient("objective".into()));
            }
        }
        Ok(())
    }
}

fn merge_terms(terms: impl IntoIterator<Item = (VarId, f64)>) -> Vec<(VarId, f64)> {
    let mut merged: Vec<(VarId, f64)> = Vec::new();
    for (v, a) in terms {
        match merged.iter_mut().find(|(w, _)| *w == v) {
            Some(slot) => slot.1 += a,
            None => merged.push((v, a)),
        }
    }
    merged.retain(|&(_, a)| a != 0.0);
    merged
}
