//! Bound propagation and big-M coefficient tightening.
//!
//! Every reduction keeps the set of integer-feasible points unchanged; only
//! the LP relaxation shrinks. Fixed variables are substituted out and the
//! reduced model is returned together with the mapping needed to lift a
//! solution back.

use crate::model::{LinConstraint, MilpModel, Sense, VarId, VarKind};

const FEAS_TOL: f64 = 1e-9;
const MAX_ROUNDS: usize = 25;

#[derive(Debug, Clone)]
pub struct Presolved {
    pub model: MilpModel,
    /// Original variable -> index in the reduced model.
    pub var_map: Vec<Option<VarId>>,
    /// Values of variables fixed during presolve.
    pub fixed: Vec<f64>,
    pub stats: PresolveStats,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PresolveStats {
    pub rounds: usize,
    pub fixed_vars: usize,
    pub removed_rows: usize,
    pub tightened_coefficients: usize,
}

impl Presolved {
    /// Lifts a reduced-model assignment back to the original variables.
    pub fn postsolve(&self, reduced: &[f64]) -> Vec<f64> {
        self.var_map
            .iter()
            .zip(&self.fixed)
            .map(|(m, &f)| match m {
                Some(v) => reduced[v.0],
                None => f,
            })
            .collect()
    }
}

/// Row kept as `lo ≤ Σ a·x ≤ hi`.
#[derive(Debug, Clone)]
struct Row {
    terms: Vec<(usize, f64)>,
    lo: f64,
    hi: f64,
    alive: bool,
}

struct Activity {
    min: f64,
    max: f64,
    min_inf: usize,
    max_inf: usize,
}

fn activity(row: &Row, lo: &[f64], hi: &[f64]) -> Activity {
    let mut a = Activity {
        min: 0.0,
        max: 0.0,
        min_inf: 0,
        max_inf: 0,
    };
    for &(j, c) in &row.terms {
        let (l, u) = if c > 0.0 { (lo[j], hi[j]) } else { (hi[j], lo[j]) };
        if l.is_finite() {
            a.min += c * l;
        } else {
            a.min_inf += 1;
        }
        if u.is_finite() {
            a.max += c * u;
        } else {
            a.max_inf += 1;
        }
    }
    a
}

/// Returns `None` when presolve proves the model infeasible.
pub fn presolve(model: &MilpModel) -> Option<Presolved> {
    let n = model.num_vars();
    let is_bin: Vec<bool> = model.vars().iter().map(|v| v.kind == VarKind::Binary).collect();
    let mut lo: Vec<f64> = model.vars().iter().map(|v| v.lo).collect();
    let mut hi: Vec<f64> = model.vars().iter().map(|v| v.hi).collect();
    for j in 0..n {
        if is_bin[j] {
            lo[j] = (lo[j] - FEAS_TOL).ceil().max(0.0);
            hi[j] = (hi[j] + FEAS_TOL).floor().min(1.0);
        }
    }
    let mut rows: Vec<Row> = model
        .constraints()
        .iter()
        .map(|c| {
            let (l, u) = match c.sense {
                Sense::Le => (f64::NEG_INFINITY, c.rhs),
                Sense::Ge => (c.rhs, f64::INFINITY),
                Sense::Eq => (c.rhs, c.rhs),
            };
            Row {
                terms: c.terms.iter().map(|&(v, a)| (v.0, a)).collect(),
                lo: l,
                hi: u,
                alive: true,
            }
        })
        .collect();
    let mut stats = PresolveStats::default();

    for round in 0..MAX_ROUNDS {
        stats.rounds = round + 1;
        let mut changed = false;
        for row in rows.iter_mut() {
            if !row.alive {
                continue;
            }
            // Drop fixed variables into the bounds.
            let mut shift = 0.0;
            row.terms.retain(|&(j, c)| {
                if lo[j] == hi[j] {
                    shift += c * lo[j];
                    false
                } else {
                    true
                }
            });
            if shift != 0.0 {
                row.lo -= shift;
                row.hi -= shift;
            }
            let act = activity(row, &lo, &hi);
            let finite = |v: f64| if v.is_finite() { v.abs() } else { 0.0 };
            let tol = FEAS_TOL * (1.0 + finite(row.lo).max(finite(row.hi)));
            if act.min_inf == 0 && act.min > row.hi + tol.max(1e-7 * (1.0 + act.min.abs())) {
                return None;
            }
            if act.max_inf == 0 && act.max < row.lo - tol.max(1e-7 * (1.0 + act.max.abs())) {
                return None;
            }
            if row.terms.is_empty() {
                row.alive = false;
                stats.removed_rows += 1;
                continue;
            }
            let lo_redundant = !row.lo.is_finite() || (act.min_inf == 0 && act.min >= row.lo);
            let hi_redundant = !row.hi.is_finite() || (act.max_inf == 0 && act.max <= row.hi);
            if lo_redundant && hi_redundant {
                row.alive = false;
                stats.removed_rows += 1;
                changed = true;
                continue;
            }
            if row.terms.len() == 1 {
                let (j, c) = row.terms[0];
                let (mut l, mut u) = if c > 0.0 {
                    (row.lo / c, row.hi / c)
                } else {
                    (row.hi / c, row.lo / c)
                };
                if is_bin[j] {
                    l = (l - 1e-9).ceil();
                    u = (u + 1e-9).floor();
                }
                if l > lo[j] {
                    lo[j] = l;
                }
                if u < hi[j] {
                    hi[j] = u;
                }
                if lo[j] > hi[j] {
                    if lo[j] - hi[j] > 1e-7 * (1.0 + lo[j].abs()) || is_bin[j] {
                        return None;
                    }
                    let mid = 0.5 * (lo[j] + hi[j]);
                    lo[j] = mid;
                    hi[j] = mid;
                }
                row.alive = false;
                stats.removed_rows += 1;
                changed = true;
                continue;
            }
            // Implied bounds for each variable.
            for k in 0..row.terms.len() {
                let (j, c) = row.terms[k];
                let (cl, cu) = if c > 0.0 { (lo[j], hi[j]) } else { (hi[j], lo[j]) };
                // Residual activity of the other terms.
                let rest_min = if cl.is_finite() {
                    if act.min_inf == 0 { Some(act.min - c * cl) } else { None }
                } else if act.min_inf == 1 {
                    Some(act.min)
                } else {
                    None
                };
                let rest_max = if cu.is_finite() {
                    if act.max_inf == 0 { Some(act.max - c * cu) } else { None }
                } else if act.max_inf == 1 {
                    Some(act.max)
                } else {
                    None
                };
                // c·x ≤ hi − rest_min ; c·x ≥ lo − rest_max
                let mut new_lo = lo[j];
                let mut new_hi = hi[j];
                if let (Some(rm), true) = (rest_min, row.hi.is_finite()) {
                    let b = (row.hi - rm) / c;
                    if c > 0.0 {
                        new_hi = new_hi.min(b);
                    } else {
                        new_lo = new_lo.max(b);
                    }
                }
                if let (Some(rm), true) = (rest_max, row.lo.is_finite()) {
                    let b = (row.lo - rm) / c;
                    if c > 0.0 {
                        new_lo = new_lo.max(b);
                    } else {
                        new_hi = new_hi.min(b);
                    }
                }
                if is_bin[j] {
                    new_lo = (new_lo - 1e-9).ceil();
                    new_hi = (new_hi + 1e-9).floor();
                } else {
                    // Relax derived continuous bounds slightly.
                    if new_lo > lo[j] {
                        new_lo -= 1e-9 * (1.0 + new_lo.abs());
                    }
                    if new_hi < hi[j] {
                        new_hi += 1e-9 * (1.0 + new_hi.abs());
                    }
                }
                let range = if lo[j].is_finite() && hi[j].is_finite() { hi[j] - lo[j] } else { f64::INFINITY };
                let min_gain = if is_bin[j] { 0.5 } else { 1e-3 * range.min(1e6).max(1e-6) };
                if new_lo > lo[j] + min_gain || (!lo[j].is_finite() && new_lo.is_finite()) {
                    lo[j] = new_lo;
                    changed = true;
                }
                if new_hi < hi[j] - min_gain || (!hi[j].is_finite() && new_hi.is_finite()) {
                    hi[j] = new_hi;
                    changed = true;
                }
                if lo[j] > hi[j] {
                    if is_bin[j] || lo[j] - hi[j] > 1e-6 * (1.0 + lo[j].abs()) {
                        return None;
                    }
                    let mid = 0.5 * (lo[j] + hi[j]);
                    lo[j] = mid;
                    hi[j] = mid;
                }
            }
        }
        // Big-M coefficient tightening on one-sided rows.
        for row in rows.iter_mut() {
            if !row.alive || (row.lo.is_finite() && row.hi.is_finite()) {
                continue;
            }
            if tighten_row(row, &lo, &hi, &is_bin) {
                stats.tightened_coefficients += 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // Assemble the reduced model.
    let mut reduced = MilpModel::new();
    let mut var_map = vec![None; n];
    let mut fixed = vec![0.0; n];
    for j in 0..n {
        let v = model.var(VarId(j));
        if lo[j] == hi[j] || (is_bin[j] && hi[j] - lo[j] < 0.5) {
            fixed[j] = lo[j];
            stats.fixed_vars += 1;
        } else {
            var_map[j] = Some(reduced.add_var(v.name.clone(), v.kind, lo[j], hi[j]));
        }
    }
    for (i, row) in rows.iter().enumerate() {
        if !row.alive {
            continue;
        }
        let mut shift = 0.0;
        let mut terms = Vec::with_capacity(row.terms.len());
        for &(j, c) in &row.terms {
            match var_map[j] {
                Some(v) => terms.push((v, c)),
                None => shift += c * fixed[j],
            }
        }
        let name = model.constraints()[i].name.clone();
        if terms.is_empty() {
            continue;
        }
        let (l, u) = (row.lo - shift, row.hi - shift);
        if l == u {
            reduced.add_constraint(name, terms, Sense::Eq, l);
        } else {
            if l.is_finite() {
                reduced.add_constraint(name.clone(), terms.clone(), Sense::Ge, l);
            }
            if u.is_finite() {
                reduced.add_constraint(name, terms, Sense::Le, u);
            }
        }
    }
    let mut offset = model.objective_offset();
    let mut obj = Vec::new();
    for &(v, c) in model.objective() {
        match var_map[v.0] {
            Some(w) => obj.push((w, c)),
            None => offset += c * fixed[v.0],
        }
    }
    reduced.set_objective(obj, offset);
    Some(Presolved {
        model: reduced,
        var_map,
        fixed,
        stats,
    })
}

/// Shrinks the coefficient of a binary whose activation makes a one-sided
/// row redundant by a margin.
fn tighten_row(row: &mut Row, lo: &[f64], hi: &[f64], is_bin: &[bool]) -> bool {
    // Normalise to Σ a·x ≥ b.
    let flip = !row.lo.is_finite();
    let sign = if flip { -1.0 } else { 1.0 };
    let b = if flip { -row.hi } else { row.lo };
    let act = {
        let r = Row {
            terms: row.terms.iter().map(|&(j, c)| (j, sign * c)).collect(),
            lo: b,
            hi: f64::INFINITY,
            alive: true,
        };
        activity(&r, lo, hi)
    };
    if act.min_inf > 0 {
        return false;
    }
    let mut changed = false;
    let mut b = b;
    for k in 0..row.terms.len() {
        let (j, c0) = row.terms[k];
        if !is_bin[j] || lo[j] != 0.0 || hi[j] != 1.0 {
            continue;
        }
        let a = sign * c0;
        // Minimum activity of the other terms (recomputed: b and a may move).
        let rest_min: f64 = row
            .terms
            .iter()
            .enumerate()
            .filter(|&(kk, _)| kk != k)
            .map(|(_, &(jj, cc))| {
                let cc = sign * cc;
                if cc > 0.0 { cc * lo[jj] } else { cc * hi[jj] }
            })
            .sum();
        if a > 0.0 {
            // z = 1 redundant iff rest_min + a ≥ b.
            let slack = rest_min + a - b;
            if slack > 1e-7 * (1.0 + a.abs()) && rest_min < b {
                let new_a = b - rest_min;
                row.terms[k].1 = sign * new_a;
                changed = true;
            }
        } else if a < 0.0 {
            // z = 0 redundant iff rest_min ≥ b.
            let slack = rest_min - b;
            if slack > 1e-7 * (1.0 + a.abs()) && rest_min + a < b {
                b += slack;
                row.terms[k].1 = sign * (a + slack);
                changed = true;
            }
        }
    }
    if changed {
        if flip {
            row.hi = -b;
        } else {
            row.lo = b;
        }
    }
    changed
}

/// Reduced view of a single row, used by tests.
pub fn row_range(c: &LinConstraint) -> (f64, f64) {
    match c.sense {
        Sense::Le => (f64::NEG_INFINITY, c.rhs),
        Sense::Ge => (c.rhs, f64::INFINITY),
        Sense::Eq => (c.rhs, c.rhs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn big_m_coefficient_is_tightened() {
        // x - 100 z >= 1 - 100 with x in [0, 5]: when z = 0 the row is
        // redundant once the coefficient drops to 1.
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 5.0);
        let z = m.add_binary("z");
        m.add_constraint("r", [(x, 1.0), (z, -100.0)], Sense::Ge, -99.0);
        let p = presolve(&m).unwrap();
        let c = &p.model.constraints()[0];
        let zc = c.terms.iter().find(|t| t.0 == p.var_map[z.0].unwrap()).unwrap().1;
        assert!((zc + 1.0).abs() < 1e-9, "{c:?}");
        assert!((c.rhs - 0.0).abs() < 1e-9, "{c:?}");
    }

    #[test]
    fn singleton_rows_fix_binaries() {
        let mut m = MilpModel::new();
        let z = m.add_binary("z");
        let w = m.add_binary("w");
        m.add_constraint("fix", [(z, 1.0)], Sense::Eq, 1.0);
        m.add_constraint("imp", [(z, 1.0), (w, -1.0)], Sense::Le, 0.0);
        let p = presolve(&m).unwrap();
        assert_eq!(p.fixed[z.0], 1.0);
        assert!(p.var_map[w.0].is_none());
        assert_eq!(p.fixed[w.0], 1.0);
        assert_eq!(p.model.num_constraints(), 0);
    }

    #[test]
    fn one_sided_rows_keep_a_tight_tolerance() {
        // Fixing both binaries leaves 0 >= 1 in a row with an infinite upper side.
        let mut m = MilpModel::new();
        let z = m.add_binary("z");
        let s = m.add_binary("s");
        m.add_constraint("a", [(z, 1.0)], Sense::Eq, 1.0);
        m.add_constraint("b", [(s, 7.0)], Sense::Ge, 7.0);
        m.add_constraint("c", [(z, -104.0), (s, -1.0)], Sense::Ge, -104.0);
        assert!(presolve(&m).is_none());
    }

    #[test]
    fn detects_infeasibility() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 1.0);
        m.add_constraint("a", [(x, 1.0)], Sense::Ge, 2.0);
        assert!(presolve(&m).is_none());
    }
}
