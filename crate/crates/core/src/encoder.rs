//! Big-M encoding of compiled formulas into mixed-integer linear constraints.

use std::collections::HashMap;

use stlid_milp::{MilpModel, Sense, VarId};
use thiserror::Error;

use crate::formula::{CompiledExpr, CompiledFormula, DerivativeSide, Node};

pub const DEFAULT_BIG_M: f64 = 1e4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncodeError {
    #[error("node {node} at step {step} needs sample {needed}, outside 0..={horizon}")]
    WindowOverflow { node: usize, step: usize, needed: i64, horizon: usize },
    #[error("row {row} needs M >= {needed}, but big-M is {big_m}")]
    BigMTooSmall { row: String, needed: f64, big_m: f64 },
    #[error("signal table has {found} dimensions, formula uses {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodeOptions {
    pub big_m: f64,
    /// Emit only the implications needed for `z = 1` at the root.
    ///
    /// The model then guarantees `z = 1 ⇒ satisfied` for every binary reached
    /// with positive polarity (and `z = 0 ⇒ violated` for negative), rather than
    /// the full equivalence. Feasibility of `z_root = 1` is unchanged.
    pub one_sided: bool,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions { big_m: DEFAULT_BIG_M, one_sided: false }
    }
}

/// Which implications of `z ⇔ φ` have been emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pol(u8);

impl Pol {
    /// `z = 1 ⇒ φ`
    const POS: Pol = Pol(1);
    /// `z = 0 ⇒ ¬φ`
    const NEG: Pol = Pol(2);
    const BOTH: Pol = Pol(3);
    const NONE: Pol = Pol(0);

    fn has(self, p: Pol) -> bool {
        self.0 & p.0 == p.0
    }
    fn minus(self, p: Pol) -> Pol {
        Pol(self.0 & !p.0)
    }
    fn union(self, p: Pol) -> Pol {
        Pol(self.0 | p.0)
    }
    fn flip(self) -> Pol {
        Pol(((self.0 & 1) << 1) | ((self.0 & 2) >> 1))
    }
    fn is_empty(self) -> bool {
        self.0 == 0
    }
}

/// `Σ terms + constant`.
#[derive(Debug, Clone, Default)]
struct Affine {
    terms: Vec<(VarId, f64)>,
    constant: f64,
}

impl Affine {
    fn add(&mut self, v: VarId, c: f64) {
        match self.terms.iter_mut().find(|(u, _)| *u == v) {
            Some(t) => t.1 += c,
            None => self.terms.push((v, c)),
        }
    }
}

/// Owns the encoding of one compiled formula into `model`.
///
/// Satisfaction binaries are memoized per `(node, step)`, so subformulas shared
/// through hash-consing and overlapping temporal windows reuse one variable.
pub struct EncodingContext<'a> {
    pub model: &'a mut MilpModel,
    formula: &'a CompiledFormula,
    /// `signal[dim][step]`
    signal: Vec<Vec<VarId>>,
    horizon: usize,
    options: EncodeOptions,
    memo: HashMap<(usize, usize), (VarId, Pol)>,
    abs_memo: HashMap<VarId, VarId>,
    next_aux: usize,
}

impl<'a> EncodingContext<'a> {
    /// `signal[dim][step]` must list one variable per formula dimension and step `0..=H`.
    pub fn new(
        model: &'a mut MilpModel,
        formula: &'a CompiledFormula,
        signal: Vec<Vec<VarId>>,
        options: EncodeOptions,
    ) -> Result<Self, EncodeError> {
        if signal.len() != formula.dims.len() {
            return Err(EncodeError::DimensionMismatch { expected: formula.dims.len(), found: signal.len() });
        }
        let horizon = signal.iter().map(|s| s.len()).min().unwrap_or(0).saturating_sub(1);
        Ok(EncodingContext {
            model,
            formula,
            signal,
            horizon,
            options,
            memo: HashMap::new(),
            abs_memo: HashMap::new(),
            next_aux: 0,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Satisfaction binary of the formula root at step `k`.
    pub fn encode(&mut self, k: usize) -> Result<VarId, EncodeError> {
        let need = if self.options.one_sided { Pol::POS } else { Pol::BOTH };
        self.node(self.formula.root, k, need)
    }

    /// Satisfaction binary of an arbitrary node at step `k`, with both implications.
    pub fn encode_node(&mut self, id: usize, k: usize) -> Result<VarId, EncodeError> {
        self.node(id, k, Pol::BOTH)
    }

    /// Binaries created so far, by `(node, step)`.
    pub fn satisfaction_vars(&self) -> Vec<((usize, usize), VarId)> {
        let mut out: Vec<_> = self.memo.iter().map(|(&key, &(v, _))| (key, v)).collect();
        out.sort();
        out
    }

    /// Continuous variable equal to `e` at step `k`, with every `|v|` resolved exactly.
    pub fn encode_abs(&mut self, e: &CompiledExpr, k: usize) -> Result<VarId, EncodeError> {
        let mut aff = Affine { terms: vec![], constant: e.constant };
        for &(d, c, abs) in &e.terms {
            let v = self.var(d, k as i64, self.formula.root, k)?;
            if abs {
                let w = self.abs_var(v)?;
                aff.add(w, c);
            } else {
                aff.add(v, c);
            }
        }
        if let [(w, c)] = aff.terms[..] {
            if c == 1.0 && aff.constant == 0.0 {
                return Ok(w);
            }
        }
        let (lo, hi) = self.range(&aff);
        let id = self.aux_id();
        let out = self.model.add_continuous(format!("e_{id}"), lo, hi);
        let mut terms = aff.terms.clone();
        terms.push((out, -1.0));
        self.model.add_constraint(format!("e_{id}_def"), terms, Sense::Eq, -aff.constant);
        Ok(out)
    }

    fn aux_id(&mut self) -> usize {
        self.next_aux += 1;
        self.next_aux - 1
    }

    fn var(&self, dim: usize, j: i64, node: usize, step: usize) -> Result<VarId, EncodeError> {
        if j < 0 || j > self.horizon as i64 {
            return Err(EncodeError::WindowOverflow { node, step, needed: j, horizon: self.horizon });
        }
        Ok(self.signal[dim][j as usize])
    }

    fn bounds(&self, v: VarId) -> (f64, f64) {
        let var = self.model.var(v);
        (var.lo, var.hi)
    }

    /// Range of `a` over the current variable bounds.
    fn range(&self, a: &Affine) -> (f64, f64) {
        let (mut lo, mut hi) = (a.constant, a.constant);
        for &(v, c) in &a.terms {
            if c == 0.0 {
                continue;
            }
            let (l, h) = self.bounds(v);
            let (x, y) = if c > 0.0 { (c * l, c * h) } else { (c * h, c * l) };
            lo += x;
            hi += y;
        }
        (lo, hi)
    }

    /// Big-M for a row that must be switched off: an infinite estimate falls back
    /// to `big_m`; a finite one larger than `big_m` is an error.
    fn big_m(&self, needed: f64, row: &str) -> Result<f64, EncodeError> {
        if !needed.is_finite() {
            return Ok(self.options.big_m);
        }
        if needed > self.options.big_m {
            return Err(EncodeError::BigMTooSmall { row: row.to_string(), needed, big_m: self.options.big_m });
        }
        Ok(needed.max(0.0))
    }

    /// `w = |v|` via `w ≥ ±v`, `w ≤ v + M(1−s)`, `w ≤ −v + M·s`.
    fn abs_var(&mut self, v: VarId) -> Result<VarId, EncodeError> {
        if let Some(&w) = self.abs_memo.get(&v) {
            return Ok(w);
        }
        let (lo, hi) = self.bounds(v);
        let id = self.aux_id();
        let name = format!("w_{id}");
        let top = lo.abs().max(hi.abs());
        let w_lo = if lo >= 0.0 {
            lo
        } else if hi <= 0.0 {
            -hi
        } else {
            0.0
        };
        let w = self.model.add_continuous(name.clone(), w_lo, top);
        self.model.add_constraint(format!("{name}_ge_pos"), vec![(w, 1.0), (v, -1.0)], Sense::Ge, 0.0);
        self.model.add_constraint(format!("{name}_ge_neg"), vec![(w, 1.0), (v, 1.0)], Sense::Ge, 0.0);
        // w - v ≤ M(1-s) needs M ≥ max(w - v) = 2·max(-v); w + v ≤ M·s needs M ≥ 2·max(v).
        let m_pos = self.big_m(2.0 * (-lo).max(0.0), &name)?;
        let m_neg = self.big_m(2.0 * hi.max(0.0), &name)?;
        let s = self.model.add_binary(format!("s_{id}"));
        self.model.add_constraint(
            format!("{name}_le_pos"),
            vec![(w, 1.0), (v, -1.0), (s, m_pos)],
            Sense::Le,
            m_pos,
        );
        self.model.add_constraint(format!("{name}_le_neg"), vec![(w, 1.0), (v, 1.0), (s, -m_neg)], Sense::Le, 0.0);
        self.abs_memo.insert(v, w);
        Ok(w)
    }

    fn node(&mut self, id: usize, k: usize, need: Pol) -> Result<VarId, EncodeError> {
        let (z, done) = match self.memo.get(&(id, k)) {
            Some(&(z, done)) => (z, done),
            None => {
                let z = self.model.add_binary(format!("z_{id}_{k}"));
                (z, Pol::NONE)
            }
        };
        let todo = need.minus(done);
        if todo.is_empty() {
            return Ok(z);
        }
        self.memo.insert((id, k), (z, done.union(todo)));
        let name = format!("z_{id}_{k}");
        match self.formula.node(id).clone() {
            Node::Pred { expr, threshold } => {
                let parts = self.atom_parts(id, k, &[(0, 1.0)], &expr, threshold)?;
                self.atom_rows(z, parts, todo, &name)?;
            }
            Node::Integral { expr, a, b, threshold } => {
                let dt = self.formula.delta_t;
                let offsets: Vec<(i64, f64)> = (a..b).map(|j| (j, dt)).collect();
                let parts = self.atom_parts(id, k, &offsets, &expr, threshold)?;
                self.atom_rows(z, parts, todo, &name)?;
            }
            Node::Derivative { expr, side, threshold } => {
                let offsets = match side {
                    DerivativeSide::Right => [(1, 1.0), (0, -1.0)],
                    DerivativeSide::Left => [(0, 1.0), (-1, -1.0)],
                };
                let parts = self.atom_parts(id, k, &offsets, &expr, threshold * self.formula.delta_t)?;
                self.atom_rows(z, parts, todo, &name)?;
            }
            Node::Not(c) => {
                let zc = self.node(c, k, todo.flip())?;
                if done.is_empty() {
                    self.model.add_constraint(format!("{name}_not"), vec![(z, 1.0), (zc, 1.0)], Sense::Eq, 1.0);
                }
            }
            Node::And(cs) => {
                let zs = cs.iter().map(|&c| self.node(c, k, todo)).collect::<Result<Vec<_>, _>>()?;
                self.conjunction(z, &zs, todo, &name);
            }
            Node::Or(cs) => {
                let zs = cs.iter().map(|&c| self.node(c, k, todo)).collect::<Result<Vec<_>, _>>()?;
                self.disjunction(z, &zs, todo, &name);
            }
            Node::Globally { lo, hi, child } => {
                self.check_window(id, k, k + hi)?;
                let zs = (k + lo..=k + hi).map(|j| self.node(child, j, todo)).collect::<Result<Vec<_>, _>>()?;
                self.conjunction(z, &zs, todo, &name);
            }
            Node::Eventually { lo, hi, child } => {
                self.check_window(id, k, k + hi)?;
                let zs = (k + lo..=k + hi).map(|j| self.node(child, j, todo)).collect::<Result<Vec<_>, _>>()?;
                self.disjunction(z, &zs, todo, &name);
            }
        }
        Ok(z)
    }

    fn check_window(&self, node: usize, step: usize, last: usize) -> Result<(), EncodeError> {
        if last > self.horizon {
            return Err(EncodeError::WindowOverflow { node, step, needed: last as i64, horizon: self.horizon });
        }
        Ok(())
    }

    /// `z ≤ z_i` and `z ≥ Σ z_i − (m − 1)`.
    fn conjunction(&mut self, z: VarId, zs: &[VarId], need: Pol, name: &str) {
        if need.has(Pol::POS) {
            for (i, &c) in zs.iter().enumerate() {
                self.model.add_constraint(format!("{name}_and{i}"), vec![(z, 1.0), (c, -1.0)], Sense::Le, 0.0);
            }
        }
        if need.has(Pol::NEG) {
            let mut terms: Vec<(VarId, f64)> = zs.iter().map(|&c| (c, -1.0)).collect();
            terms.push((z, 1.0));
            self.model.add_constraint(format!("{name}_and"), terms, Sense::Ge, 1.0 - zs.len() as f64);
        }
    }

    /// `z ≥ z_i` and `z ≤ Σ z_i`.
    fn disjunction(&mut self, z: VarId, zs: &[VarId], need: Pol, name: &str) {
        if need.has(Pol::NEG) {
            for (i, &c) in zs.iter().enumerate() {
                self.model.add_constraint(format!("{name}_or{i}"), vec![(z, 1.0), (c, -1.0)], Sense::Ge, 0.0);
            }
        }
        if need.has(Pol::POS) {
            let mut terms: Vec<(VarId, f64)> = zs.iter().map(|&c| (c, -1.0)).collect();
            terms.push((z, 1.0));
            self.model.add_constraint(format!("{name}_or"), terms, Sense::Le, 0.0);
        }
    }

    /// Collects `Σ_j scale_j · expr(x_{k+j}) − threshold` as an affine part plus
    /// the abs terms that are not sign-definite under the variable bounds.
    fn atom_parts(
        &mut self,
        node: usize,
        k: usize,
        offsets: &[(i64, f64)],
        expr: &CompiledExpr,
        threshold: f64,
    ) -> Result<(Affine, Vec<(VarId, f64)>), EncodeError> {
        let mut aff = Affine { terms: vec![], constant: -threshold };
        let mut abs_terms: Vec<(VarId, f64)> = Vec::new();
        for &(j, scale) in offsets {
            aff.constant += scale * expr.constant;
            for &(d, c, abs) in &expr.terms {
                let v = self.var(d, k as i64 + j, node, k)?;
                let c = c * scale;
                if !abs {
                    aff.add(v, c);
                    continue;
                }
                let (lo, hi) = self.bounds(v);
                if lo >= 0.0 {
                    aff.add(v, c);
                } else if hi <= 0.0 {
                    aff.add(v, -c);
                } else {
                    match abs_terms.iter_mut().find(|(u, _)| *u == v) {
                        Some(t) => t.1 += c,
                        None => abs_terms.push((v, c)),
                    }
                }
            }
        }
        abs_terms.retain(|t| t.1 != 0.0);
        Ok((aff, abs_terms))
    }

    fn atom_rows(
        &mut self,
        z: VarId,
        (mut aff, abs_terms): (Affine, Vec<(VarId, f64)>),
        need: Pol,
        name: &str,
    ) -> Result<(), EncodeError> {
        if let [(v, c)] = abs_terms[..] {
            // c·|v| = max(c·v, −c·v) for c > 0 and min(...) for c < 0.
            let mut e1 = aff.clone();
            e1.add(v, c);
            let mut e2 = aff;
            e2.add(v, -c);
            return self.two_branch_rows(z, e1, e2, c > 0.0, need, name);
        }
        for (v, c) in abs_terms {
            let w = self.abs_var(v)?;
            aff.add(w, c);
        }
        self.big_m_rows(z, &aff, need, name)
    }

    /// `z = 1 ⇒ e ≥ 0` and `z = 0 ⇒ e ≤ 0`.
    fn big_m_rows(&mut self, z: VarId, e: &Affine, need: Pol, name: &str) -> Result<(), EncodeError> {
        let (lo, hi) = self.range(e);
        if need.has(Pol::POS) {
            let m = self.big_m(-lo, name)?;
            if m > 0.0 {
                // e ≥ M(z − 1)
                let mut terms = e.terms.clone();
                terms.push((z, -m));
                self.model.add_constraint(format!("{name}_ge"), terms, Sense::Ge, -m - e.constant);
            }
        }
        if need.has(Pol::NEG) {
            let m = self.big_m(hi, name)?;
            if m > 0.0 {
                // e ≤ M z
                let mut terms = e.terms.clone();
                terms.push((z, -m));
                self.model.add_constraint(format!("{name}_le"), terms, Sense::Le, -e.constant);
            }
        }
        Ok(())
    }

    /// Atom value is `max(e1, e2)` when `is_max`, else `min(e1, e2)`; one extra
    /// binary `s` selects the branch on the disjunctive side.
    fn two_branch_rows(
        &mut self,
        z: VarId,
        e1: Affine,
        e2: Affine,
        is_max: bool,
        need: Pol,
        name: &str,
    ) -> Result<(), EncodeError> {
        let (lo1, hi1) = self.range(&e1);
        let (lo2, hi2) = self.range(&e2);
        // Conjunctive side: each branch alone, switched by z.
        let conj = if is_max { Pol::NEG } else { Pol::POS };
        if need.has(conj) {
            if is_max {
                // z = 0 ⇒ e1 ≤ 0 ∧ e2 ≤ 0
                for (i, (e, hi)) in [(&e1, hi1), (&e2, hi2)].into_iter().enumerate() {
                    let m = self.big_m(hi, name)?;
                    let mut terms = e.terms.clone();
                    terms.push((z, -m));
                    self.model.add_constraint(format!("{name}_le{i}"), terms, Sense::Le, -e.constant);
                }
            } else {
                // z = 1 ⇒ e1 ≥ 0 ∧ e2 ≥ 0
                for (i, (e, lo)) in [(&e1, lo1), (&e2, lo2)].into_iter().enumerate() {
                    let m = self.big_m(-lo, name)?;
                    let mut terms = e.terms.clone();
                    terms.push((z, -m));
                    self.model.add_constraint(format!("{name}_ge{i}"), terms, Sense::Ge, -m - e.constant);
                }
            }
        }
        let disj = conj.flip();
        if need.has(disj) {
            let id = self.aux_id();
            let s = self.model.add_binary(format!("s_{id}"));
            if is_max {
                // z = 1 ⇒ e1 ≥ 0 (s = 0) ∨ e2 ≥ 0 (s = 1)
                let m1 = self.big_m(-lo1, name)?;
                let mut t1 = e1.terms.clone();
                t1.extend([(z, -m1), (s, m1)]);
                self.model.add_constraint(format!("{name}_ge0"), t1, Sense::Ge, -m1 - e1.constant);
                let m2 = self.big_m(-lo2, name)?;
                let mut t2 = e2.terms.clone();
                t2.extend([(z, -m2), (s, -m2)]);
                self.model.add_constraint(format!("{name}_ge1"), t2, Sense::Ge, -2.0 * m2 - e2.constant);
            } else {
                // z = 0 ⇒ e1 ≤ 0 (s = 0) ∨ e2 ≤ 0 (s = 1)
                let m1 = self.big_m(hi1, name)?;
                let mut t1 = e1.terms.clone();
                t1.extend([(z, -m1), (s, -m1)]);
                self.model.add_constraint(format!("{name}_le0"), t1, Sense::Le, -e1.constant);
                let m2 = self.big_m(hi2, name)?;
                let mut t2 = e2.terms.clone();
                t2.extend([(z, -m2), (s, m2)]);
                self.model.add_constraint(format!("{name}_le1"), t2, Sense::Le, m2 - e2.constant);
            }
        }
        Ok(())
    }
}

/// Adds one continuous variable `x_<dim>_<k>` per dimension and step `0..=horizon`.
pub fn add_signal_vars(
    model: &mut MilpModel,
    dims: &[String],
    horizon: usize,
    bounds: impl Fn(usize, usize) -> (f64, f64),
) -> Vec<Vec<VarId>> {
    dims.iter()
        .enumerate()
        .map(|(d, name)| {
            (0..=horizon)
                .map(|k| {
                    let (lo, hi) = bounds(d, k);
                    model.add_continuous(format!("x_{name}_{k}"), lo, hi)
                })
                .collect()
        })
        .collect()
}
