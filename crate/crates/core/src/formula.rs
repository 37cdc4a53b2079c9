//! Formula AST for STL with integral and derivative predicates.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Byte range into the source text a node was parsed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
}

impl SourceSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        SourceSpan { start, end }
    }

    pub fn join(self, other: SourceSpan) -> SourceSpan {
        SourceSpan::new(self.start.min(other.start), self.end.max(other.end))
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// Time interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub dim: String,
    pub coeff: f64,
    /// The term reads `coeff * |dim|`.
    pub abs: bool,
}

/// `Σ coeff·dim (or coeff·|dim|) + constant`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearExpr {
    pub terms: Vec<Term>,
    pub constant: f64,
}

impl LinearExpr {
    pub fn var(dim: impl Into<String>) -> Self {
        LinearExpr::term(dim, 1.0)
    }

    pub fn term(dim: impl Into<String>, coeff: f64) -> Self {
        LinearExpr {
            terms: vec![Term { dim: dim.into(), coeff, abs: false }],
            constant: 0.0,
        }
    }

    pub fn abs(dim: impl Into<String>) -> Self {
        LinearExpr {
            terms: vec![Term { dim: dim.into(), coeff: 1.0, abs: true }],
            constant: 0.0,
        }
    }

    pub fn plus(mut self, dim: impl Into<String>, coeff: f64) -> Self {
        self.terms.push(Term { dim: dim.into(), coeff, abs: false });
        self
    }

    pub fn negated(&self) -> LinearExpr {
        LinearExpr {
            terms: self
                .terms
                .iter()
                .map(|t| Term { dim: t.dim.clone(), coeff: -t.coeff, abs: t.abs })
                .collect(),
            constant: -self.constant,
        }
    }

    pub fn has_abs(&self) -> bool {
        self.terms.iter().any(|t| t.abs)
    }

    /// Evaluates the expression given a lookup from dimension name to value.
    pub fn eval_with(&self, mut value: impl FnMut(&str) -> f64) -> f64 {
        self.terms.iter().fold(self.constant, |acc, t| {
            let v = value(&t.dim);
            acc + t.coeff * if t.abs { v.abs() } else { v }
        })
    }
}

/// How an atom was written in the source. Atoms are always stored in `>=` form;
/// `<=` atoms hold the mirrored expression and threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Comparison {
    #[default]
    Ge,
    Le,
}

/// `expr >= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub expr: LinearExpr,
    pub threshold: f64,
    pub written: Comparison,
}

impl Predicate {
    pub fn ge(expr: LinearExpr, threshold: f64) -> Self {
        Predicate { expr, threshold, written: Comparison::Ge }
    }

    /// `expr <= threshold`, stored as `-expr >= -threshold`.
    pub fn le(expr: LinearExpr, threshold: f64) -> Self {
        Predicate { expr: expr.negated(), threshold: -threshold, written: Comparison::Le }
    }
}

/// `∫_{t+a}^{t+b} expr dt >= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralPredicate {
    pub expr: LinearExpr,
    pub bounds: Interval,
    pub threshold: f64,
    pub written: Comparison,
}

impl IntegralPredicate {
    pub fn ge(expr: LinearExpr, bounds: Interval, threshold: f64) -> Self {
        IntegralPredicate { expr, bounds, threshold, written: Comparison::Ge }
    }

    pub fn le(expr: LinearExpr, bounds: Interval, threshold: f64) -> Self {
        IntegralPredicate {
            expr: expr.negated(),
            bounds,
            threshold: -threshold,
            written: Comparison::Le,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DerivativeSide {
    /// Backward difference `g(x_k) - g(x_{k-1})`.
    Left,
    /// Forward difference `g(x_{k+1}) - g(x_k)`.
    Right,
}

/// `d expr / dt± >= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativePredicate {
    pub expr: LinearExpr,
    pub side: DerivativeSide,
    pub threshold: f64,
    pub written: Comparison,
}

impl DerivativePredicate {
    pub fn ge(expr: LinearExpr, side: DerivativeSide, threshold: f64) -> Self {
        DerivativePredicate { expr, side, threshold, written: Comparison::Ge }
    }

    pub fn le(expr: LinearExpr, side: DerivativeSide, threshold: f64) -> Self {
        DerivativePredicate {
            expr: expr.negated(),
            side,
            threshold: -threshold,
            written: Comparison::Le,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FormulaKind {
    Pred(Predicate),
    IntPred(IntegralPredicate),
    DerPred(DerivativePredicate),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Globally(Interval, Box<Formula>),
}

/// A formula node. Equality is structural and ignores spans.
#[derive(Debug, Clone)]
pub struct Formula {
    pub kind: FormulaKind,
    pub span: Option<SourceSpan>,
}

impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl From<FormulaKind> for Formula {
    fn from(kind: FormulaKind) -> Self {
        Formula { kind, span: None }
    }
}

impl Formula {
    pub fn with_span(mut self, span: SourceSpan) -> Self {
        self.span = Some(span);
        self
    }

    pub fn pred(p: Predicate) -> Self {
        FormulaKind::Pred(p).into()
    }

    pub fn ge(expr: LinearExpr, threshold: f64) -> Self {
        Formula::pred(Predicate::ge(expr, threshold))
    }

    pub fn le(expr: LinearExpr, threshold: f64) -> Self {
        Formula::pred(Predicate::le(expr, threshold))
    }

    pub fn integral(p: IntegralPredicate) -> Self {
        FormulaKind::IntPred(p).into()
    }

    pub fn derivative(p: DerivativePredicate) -> Self {
        FormulaKind::DerPred(p).into()
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        FormulaKind::Not(Box::new(f)).into()
    }

    pub fn and(children: Vec<Formula>) -> Self {
        FormulaKind::And(children).into()
    }

    pub fn or(children: Vec<Formula>) -> Self {
        FormulaKind::Or(children).into()
    }

    pub fn implies(lhs: Formula, rhs: Formula) -> Self {
        FormulaKind::Implies(Box::new(lhs), Box::new(rhs)).into()
    }

    pub fn eventually(lo: f64, hi: f64, f: Formula) -> Self {
        FormulaKind::Eventually(Interval::new(lo, hi), Box::new(f)).into()
    }

    pub fn globally(lo: f64, hi: f64, f: Formula) -> Self {
        FormulaKind::Globally(Interval::new(lo, hi), Box::new(f)).into()
    }

    pub fn children(&self) -> Vec<&Formula> {
        match &self.kind {
            FormulaKind::Pred(_) | FormulaKind::IntPred(_) | FormulaKind::DerPred(_) => vec![],
            FormulaKind::Not(c) | FormulaKind::Eventually(_, c) | FormulaKind::Globally(_, c) => {
                vec![c]
            }
            FormulaKind::And(cs) | FormulaKind::Or(cs) => cs.iter().collect(),
            FormulaKind::Implies(a, b) => vec![a, b],
        }
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    /// Dimension names referenced anywhere in the formula, in first-use order.
    pub fn dimensions(&self) -> Vec<String> {
        fn walk(f: &Formula, out: &mut Vec<String>) {
            let expr = match &f.kind {
                FormulaKind::Pred(p) => Some(&p.expr),
                FormulaKind::IntPred(p) => Some(&p.expr),
                FormulaKind::DerPred(p) => Some(&p.expr),
                _ => None,
            };
            if let Some(e) = expr {
                for t in &e.terms {
                    if !out.contains(&t.dim) {
                        out.push(t.dim.clone());
                    }
                }
            }
            for c in f.children() {
                walk(c, out);
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("bound {value} is not an integer multiple of the time step {delta_t}")]
    NonDivisibleBound { value: f64, delta_t: f64, span: Option<SourceSpan> },
    #[error("integral window starts at global time {earliest} + ({a}) < 0")]
    NegativeGlobalTime { earliest: f64, a: f64, span: Option<SourceSpan> },
    #[error("empty interval [{lo}, {hi}]")]
    EmptyInterval { lo: f64, hi: f64, span: Option<SourceSpan> },
    #[error("temporal interval [{lo}, {hi}] starts before 0")]
    NegativeTemporalBound { lo: f64, hi: f64, span: Option<SourceSpan> },
    #[error("malformed expression: {reason}")]
    MalformedExpr { reason: String, span: Option<SourceSpan> },
    #[error("{op} needs at least 2 operands, got {count}")]
    TooFewOperands { op: &'static str, count: usize, span: Option<SourceSpan> },
    #[error("unknown dimension `{name}`")]
    UnknownDimension { name: String, span: Option<SourceSpan> },
    #[error("time step {delta_t} must be positive and finite")]
    InvalidTimeStep { delta_t: f64 },
}

impl ValidationError {
    pub fn span(&self) -> Option<SourceSpan> {
        match self {
            ValidationError::NonDivisibleBound { span, .. }
            | ValidationError::NegativeGlobalTime { span, .. }
            | ValidationError::EmptyInterval { span, .. }
            | ValidationError::NegativeTemporalBound { span, .. }
            | ValidationError::MalformedExpr { span, .. }
            | ValidationError::TooFewOperands { span, .. }
            | ValidationError::UnknownDimension { span, .. } => *span,
            ValidationError::InvalidTimeStep { .. } => None,
        }
    }
}

/// Checks well-formedness and that every bound is a multiple of `delta_t`.
/// Dimension names are not checked; see [`compile`].
pub fn validate(f: &Formula, delta_t: f64) -> Result<(), Vec<ValidationError>> {
    compile_inner(f, delta_t, None).map(|_| ())
}

/// Horizon in seconds. Right derivatives look one step ahead, so `delta_t` is needed.
pub fn horizon(f: &Formula, delta_t: f64) -> f64 {
    match &f.kind {
        FormulaKind::Pred(_) => 0.0,
        FormulaKind::IntPred(p) => integral_horizon(p.bounds),
        FormulaKind::DerPred(p) => match p.side {
            DerivativeSide::Right => delta_t,
            DerivativeSide::Left => 0.0,
        },
        FormulaKind::Not(c) => horizon(c, delta_t),
        FormulaKind::And(cs) | FormulaKind::Or(cs) => {
            cs.iter().map(|c| horizon(c, delta_t)).fold(0.0, f64::max)
        }
        FormulaKind::Implies(a, b) => horizon(a, delta_t).max(horizon(b, delta_t)),
        FormulaKind::Eventually(i, c) | FormulaKind::Globally(i, c) => match &c.kind {
            FormulaKind::IntPred(p) => i.hi.max(i.hi + p.bounds.hi),
            _ => i.hi + horizon(c, delta_t),
        },
    }
}

fn integral_horizon(b: Interval) -> f64 {
    b.lo.abs().max(b.hi).max(b.hi - b.lo)
}

/// Expression with dimensions resolved to indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledExpr {
    /// `(dimension index, coefficient, abs)`.
    pub terms: Vec<(usize, f64, bool)>,
    pub constant: f64,
}

impl CompiledExpr {
    pub fn eval(&self, sample: &[f64]) -> f64 {
        self.terms.iter().fold(self.constant, |acc, &(d, c, abs)| {
            let v = sample[d];
            acc + c * if abs { v.abs() } else { v }
        })
    }

    pub fn has_abs(&self) -> bool {
        self.terms.iter().any(|t| t.2)
    }
}

/// Step-indexed node. Implication is already desugared.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Pred { expr: CompiledExpr, threshold: f64 },
    /// Sum over steps `k + a .. k + b - 1`.
    Integral { expr: CompiledExpr, a: i64, b: i64, threshold: f64 },
    Derivative { expr: CompiledExpr, side: DerivativeSide, threshold: f64 },
    Not(usize),
    And(Vec<usize>),
    Or(Vec<usize>),
    Eventually { lo: usize, hi: usize, child: usize },
    Globally { lo: usize, hi: usize, child: usize },
}

/// Hash-consed arena form of a validated formula.
///
/// Structurally identical subformulas share one node, children precede parents,
/// and the root is the last node.
#[derive(Debug, Clone)]
pub struct CompiledFormula {
    pub nodes: Vec<Node>,
    pub root: usize,
    pub delta_t: f64,
    pub dims: Vec<String>,
    /// Source text position of the first occurrence of each node.
    pub spans: Vec<Option<SourceSpan>>,
}

impl CompiledFormula {
    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Short label used in per-node reports.
    pub fn label(&self, id: usize) -> String {
        let expr = |e: &CompiledExpr| {
            let mut s = String::new();
            for (i, &(d, c, abs)) in e.terms.iter().enumerate() {
                let name = if abs { format!("abs({})", self.dims[d]) } else { self.dims[d].clone() };
                let sign = if c.is_sign_negative() { "-" } else if i > 0 { "+" } else { "" };
                let mag = c.abs();
                if mag == 1.0 {
                    s.push_str(&format!("{sign}{name}"));
                } else {
                    s.push_str(&format!("{sign}{mag}*{name}"));
                }
            }
            if e.constant != 0.0 {
                s.push_str(&format!("{:+}", e.constant));
            }
            s
        };
        match &self.nodes[id] {
            Node::Pred { expr: e, threshold } => format!("{} >= {threshold}", expr(e)),
            Node::Integral { expr: e, a, b, threshold } => {
                format!("I[{a},{b}]({}) >= {threshold}", expr(e))
            }
            Node::Derivative { expr: e, side, threshold } => {
                let s = if *side == DerivativeSide::Right { '+' } else { '-' };
                format!("D{s}({}) >= {threshold}", expr(e))
            }
            Node::Not(c) => format!("!#{c}"),
            Node::And(cs) => join_ids("&&", cs),
            Node::Or(cs) => join_ids("||", cs),
            Node::Eventually { lo, hi, child } => format!("F[{lo},{hi}] #{child}"),
            Node::Globally { lo, hi, child } => format!("G[{lo},{hi}] #{child}"),
        }
    }

    /// Largest sample offset (relative to the evaluation step) any subformula touches.
    pub fn max_offset(&self) -> i64 {
        self.offsets().1
    }

    /// `(min, max)` sample offsets touched by the root relative to its evaluation step.
    pub fn offsets(&self) -> (i64, i64) {
        let mut range = vec![(0i64, 0i64); self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            range[id] = match node {
                Node::Pred { .. } => (0, 0),
                Node::Integral { a, b, .. } => (*a, *b - 1),
                Node::Derivative { side: DerivativeSide::Right, .. } => (0, 1),
                Node::Derivative { side: DerivativeSide::Left, .. } => (-1, 0),
                Node::Not(c) => range[*c],
                Node::And(cs) | Node::Or(cs) => cs.iter().fold((i64::MAX, i64::MIN), |acc, c| {
                    (acc.0.min(range[*c].0), acc.1.max(range[*c].1))
                }),
                Node::Eventually { lo, hi, child } | Node::Globally { lo, hi, child } => {
                    (range[*child].0 + *lo as i64, range[*child].1 + *hi as i64)
                }
            };
        }
        range[self.root]
    }
}

fn join_ids(op: &str, ids: &[usize]) -> String {
    ids.iter().map(|c| format!("#{c}")).collect::<Vec<_>>().join(&format!(" {op} "))
}

/// Validates `f` and lowers it to step indices with dimensions resolved against `dims`.
pub fn compile(
    f: &Formula,
    delta_t: f64,
    dims: &[String],
) -> Result<CompiledFormula, Vec<ValidationError>> {
    compile_inner(f, delta_t, Some(dims))
}

fn compile_inner(
    f: &Formula,
    delta_t: f64,
    dims: Option<&[String]>,
) -> Result<CompiledFormula, Vec<ValidationError>> {
    if !(delta_t.is_finite() && delta_t > 0.0) {
        return Err(vec![ValidationError::InvalidTimeStep { delta_t }]);
    }
    let mut c = Compiler {
        delta_t,
        dims: dims.map(|d| d.to_vec()).unwrap_or_default(),
        open_dims: dims.is_none(),
        nodes: Vec::new(),
        spans: Vec::new(),
        index: HashMap::new(),
        errors: Vec::new(),
    };
    let root = c.lower(f, 0.0);
    if c.errors.is_empty() {
        Ok(CompiledFormula {
            nodes: c.nodes,
            root: root.unwrap_or(0),
            delta_t,
            dims: c.dims,
            spans: c.spans,
        })
    } else {
        Err(c.errors)
    }
}

struct Compiler {
    delta_t: f64,
    dims: Vec<String>,
    /// Unknown names are appended instead of reported.
    open_dims: bool,
    nodes: Vec<Node>,
    spans: Vec<Option<SourceSpan>>,
    index: HashMap<String, usize>,
    errors: Vec<ValidationError>,
}

impl Compiler {
    fn intern(&mut self, node: Node, span: Option<SourceSpan>) -> usize {
        let key = format!("{node:?}");
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        self.nodes.push(node);
        self.spans.push(span);
        self.index.insert(key, self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    fn steps(&mut self, value: f64, span: Option<SourceSpan>) -> Option<i64> {
        if !value.is_finite() {
            self.errors.push(ValidationError::MalformedExpr {
                reason: format!("non-finite bound {value}"),
                span,
            });
            return None;
        }
        let r = value / self.delta_t;
        let n = r.round();
        if (r - n).abs() > 1e-9 * n.abs().max(1.0) {
            self.errors.push(ValidationError::NonDivisibleBound {
                value,
                delta_t: self.delta_t,
                span,
            });
            return None;
        }
        Some(n as i64)
    }

    fn expr(&mut self, e: &LinearExpr, span: Option<SourceSpan>) -> Option<CompiledExpr> {
        let before = self.errors.len();
        let bad = |reason: String, errors: &mut Vec<ValidationError>| {
            errors.push(ValidationError::MalformedExpr { reason, span });
        };
        if e.terms.is_empty() {
            bad("expression has no signal terms".into(), &mut self.errors);
        }
        if !e.constant.is_finite() {
            bad(format!("non-finite constant {}", e.constant), &mut self.errors);
        }
        let mut terms = Vec::with_capacity(e.terms.len());
        for (i, t) in e.terms.iter().enumerate() {
            if t.dim.is_empty() {
                bad("empty dimension name".into(), &mut self.errors);
                continue;
            }
            if !t.coeff.is_finite() {
                bad(format!("non-finite coefficient on `{}`", t.dim), &mut self.errors);
            }
            if e.terms[..i].iter().any(|u| u.dim == t.dim && u.abs == t.abs) {
                bad(format!("dimension `{}` appears twice", t.dim), &mut self.errors);
            }
            let d = match self.dims.iter().position(|d| *d == t.dim) {
                Some(d) => d,
                None if self.open_dims => {
                    self.dims.push(t.dim.clone());
                    self.dims.len() - 1
                }
                None => {
                    self.errors.push(ValidationError::UnknownDimension { name: t.dim.clone(), span });
                    continue;
                }
            };
            terms.push((d, t.coeff, t.abs));
        }
        let ok = self.errors.len() == before;
        ok.then_some(CompiledExpr { terms, constant: e.constant })
    }

    fn threshold(&mut self, c: f64, span: Option<SourceSpan>) -> Option<f64> {
        if c.is_finite() {
            Some(c)
        } else {
            self.errors.push(ValidationError::MalformedExpr {
                reason: format!("non-finite threshold {c}"),
                span,
            });
            None
        }
    }

    /// `earliest` is the smallest global time at which this node is evaluated.
    fn lower(&mut self, f: &Formula, earliest: f64) -> Option<usize> {
        let span = f.span;
        let node = match &f.kind {
            FormulaKind::Pred(p) => {
                let expr = self.expr(&p.expr, span);
                let threshold = self.threshold(p.threshold, span);
                Node::Pred { expr: expr?, threshold: threshold? }
            }
            FormulaKind::IntPred(p) => {
                let expr = self.expr(&p.expr, span);
                let threshold = self.threshold(p.threshold, span);
                let Interval { lo, hi } = p.bounds;
                if !(hi > lo) {
                    self.errors.push(ValidationError::EmptyInterval { lo, hi, span });
                }
                if earliest + lo < 0.0 {
                    self.errors.push(ValidationError::NegativeGlobalTime { earliest, a: lo, span });
                }
                let a = self.steps(lo, span);
                let b = self.steps(hi, span);
                let (a, b) = (a?, b?);
                if b <= a {
                    return None;
                }
                Node::Integral { expr: expr?, a, b, threshold: threshold? }
            }
            FormulaKind::DerPred(p) => {
                let expr = self.expr(&p.expr, span);
                let threshold = self.threshold(p.threshold, span);
                Node::Derivative { expr: expr?, side: p.side, threshold: threshold? }
            }
            FormulaKind::Not(c) => Node::Not(self.lower(c, earliest)?),
            FormulaKind::And(cs) | FormulaKind::Or(cs) => {
                let is_and = matches!(f.kind, FormulaKind::And(_));
                if cs.len() < 2 {
                    self.errors.push(ValidationError::TooFewOperands {
                        op: if is_and { "&&" } else { "||" },
                        count: cs.len(),
                        span,
                    });
                }
                let ids: Vec<Option<usize>> = cs.iter().map(|c| self.lower(c, earliest)).collect();
                let ids: Vec<usize> = ids.into_iter().collect::<Option<_>>()?;
                if ids.is_empty() {
                    return None;
                }
                if is_and {
                    Node::And(ids)
                } else {
                    Node::Or(ids)
                }
            }
            FormulaKind::Implies(a, b) => {
                let a = self.lower(a, earliest);
                let b = self.lower(b, earliest);
                let na = self.intern(Node::Not(a?), span);
                Node::Or(vec![na, b?])
            }
            FormulaKind::Eventually(i, c) | FormulaKind::Globally(i, c) => {
                let Interval { lo, hi } = *i;
                let mut ok = true;
                if lo < 0.0 {
                    self.errors.push(ValidationError::NegativeTemporalBound { lo, hi, span });
                    ok = false;
                }
                if hi < lo {
                    self.errors.push(ValidationError::EmptyInterval { lo, hi, span });
                    ok = false;
                }
                let s_lo = self.steps(lo, span);
                let s_hi = self.steps(hi, span);
                let child = self.lower(c, earliest + lo.max(0.0));
                let (s_lo, s_hi, child) = (s_lo?, s_hi?, child?);
                if !ok {
                    return None;
                }
                let (lo, hi) = (s_lo as usize, s_hi as usize);
                if matches!(f.kind, FormulaKind::Eventually(..)) {
                    Node::Eventually { lo, hi, child }
                } else {
                    Node::Globally { lo, hi, child }
                }
            }
        };
        Some(self.intern(node, span))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(c: f64) -> Formula {
        Formula::ge(LinearExpr::var("x"), c)
    }

    fn int(a: f64, b: f64, c: f64) -> Formula {
        Formula::integral(IntegralPredicate::ge(LinearExpr::var("x"), Interval::new(a, b), c))
    }

    #[test]
    fn validate_examples() {
        assert!(validate(&Formula::globally(0.0, 5.0, x(0.0)), 1.0).is_ok());
        let e = validate(&Formula::eventually(0.0, 3.0, int(-5.0, 0.0, 1.0)), 1.0).unwrap_err();
        assert!(matches!(e[0], ValidationError::NegativeGlobalTime { .. }));
        let e = validate(&Formula::globally(0.0, 2.5, x(0.0)), 1.0).unwrap_err();
        assert!(matches!(e[0], ValidationError::NonDivisibleBound { .. }));
        let e = validate(&Formula::globally(5.0, 0.0, x(0.0)), 1.0).unwrap_err();
        assert!(matches!(e[0], ValidationError::EmptyInterval { .. }));
        let e = validate(&int(2.0, 2.0, 0.0), 1.0).unwrap_err();
        assert!(matches!(e[0], ValidationError::EmptyInterval { .. }));
    }

    #[test]
    fn negative_integral_bound_allowed_after_shift() {
        let f = Formula::globally(5.0, 8.0, int(-5.0, 0.0, 1.0));
        assert!(validate(&f, 1.0).is_ok());
        let f = Formula::globally(4.0, 8.0, int(-5.0, 0.0, 1.0));
        assert!(validate(&f, 1.0).is_err());
    }

    #[test]
    fn malformed_expressions() {
        let empty = Formula::ge(LinearExpr::default(), 1.0);
        assert!(matches!(validate(&empty, 1.0).unwrap_err()[0], ValidationError::MalformedExpr { .. }));
        let dup = Formula::ge(LinearExpr::var("x").plus("x", 2.0), 1.0);
        assert!(matches!(validate(&dup, 1.0).unwrap_err()[0], ValidationError::MalformedExpr { .. }));
        let single = Formula::and(vec![x(1.0)]);
        assert!(matches!(validate(&single, 1.0).unwrap_err()[0], ValidationError::TooFewOperands { .. }));
    }

    #[test]
    fn unknown_dimension() {
        let dims = vec!["y".to_string()];
        let e = compile(&x(1.0), 1.0, &dims).unwrap_err();
        assert!(matches!(&e[0], ValidationError::UnknownDimension { name, .. } if name == "x"));
    }

    #[test]
    fn horizon_rules() {
        assert_eq!(horizon(&Formula::globally(0.0, 5.0, Formula::eventually(0.0, 4.0, x(0.0))), 1.0), 9.0);
        let f = Formula::and(vec![Formula::globally(0.0, 5.0, x(0.0)), Formula::eventually(0.0, 4.0, x(10.0))]);
        assert_eq!(horizon(&f, 1.0), 5.0);
        assert_eq!(horizon(&int(-10.0, 0.0, 0.0), 1.0), 10.0);
        assert_eq!(horizon(&Formula::eventually(0.0, 4.0, int(0.0, 2.0, 3.0)), 1.0), 6.0);
        let d = Formula::derivative(DerivativePredicate::ge(LinearExpr::var("x"), DerivativeSide::Right, 0.0));
        assert_eq!(horizon(&d, 0.5), 0.5);
    }

    #[test]
    fn compile_shares_identical_subformulas() {
        let f = Formula::and(vec![
            Formula::eventually(0.0, 2.0, x(1.0)),
            Formula::globally(0.0, 2.0, x(1.0)),
        ]);
        let c = compile(&f, 1.0, &["x".to_string()]).unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(c.root, 3);
    }

    #[test]
    fn implies_desugars() {
        let f = Formula::implies(x(1.0), x(2.0));
        let c = compile(&f, 1.0, &["x".to_string()]).unwrap();
        match c.node(c.root) {
            Node::Or(cs) => assert!(matches!(c.node(cs[0]), Node::Not(_))),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn offsets_cover_window() {
        let f = Formula::eventually(1.0, 4.0, int(0.0, 2.0, 3.0));
        let c = compile(&f, 1.0, &["x".to_string()]).unwrap();
        assert_eq!(c.offsets(), (1, 5));
    }

    #[test]
    fn le_atoms_are_mirrored() {
        let p = Predicate::le(LinearExpr::var("x"), 2.0);
        assert_eq!(p.threshold, -2.0);
        assert_eq!(p.expr.terms[0].coeff, -1.0);
    }
}
