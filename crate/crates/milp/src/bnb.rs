//! Best-first branch and bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::model::{MilpModel, VarId, VarKind};
use crate::presolve::{presolve, PresolveStats, Presolved};
use crate::simplex::{Basis, LpData, LpOutcome, Simplex};

/// Per-LP iteration cap; generous compared to the model sizes handled here.
const LP_ITER_LIMIT: usize = 200_000;

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
    /// Absolute optimality gap.
    pub gap: f64,
    pub integrality_tol: f64,
    pub presolve: bool,
    pub branching: Branching,
    /// Print a progress line to stderr every this many nodes.
    pub log_every: Option<u64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            node_limit: None,
            time_limit: None,
            gap: 1e-6,
            integrality_tol: 1e-6,
            presolve: true,
            branching: Branching::Reliability,
            log_every: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NodeLimit,
    TimeLimit,
}

impl SolveStatus {
    pub fn is_limit(self) -> bool {
        matches!(self, SolveStatus::NodeLimit | SolveStatus::TimeLimit)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub nodes: u64,
    pub simplex_iterations: u64,
    pub wall_time: Duration,
    pub presolve: Option<PresolveStats>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Objective of the returned assignment, offset included.
    pub objective: Option<f64>,
    /// Proven lower bound on the optimum.
    pub best_bound: f64,
    /// Value of every model variable, indexed by `VarId`.
    pub assignment: Option<Vec<f64>>,
    /// Row multipliers, only for pure LP solves.
    pub row_duals: Option<Vec<f64>>,
    pub stats: SolveStats,
}

impl SolveResult {
    pub fn value(&self, v: VarId) -> Option<f64> {
        self.assignment.as_ref().map(|a| a[v.0])
    }

    pub fn has_solution(&self) -> bool {
        self.assignment.is_some()
    }

    fn empty(status: SolveStatus, started: Instant) -> Self {
        SolveResult {
            status,
            objective: None,
            best_bound: if status == SolveStatus::Infeasible { f64::INFINITY } else { f64::NEG_INFINITY },
            assignment: None,
            row_duals: None,
            stats: SolveStats {
                wall_time: started.elapsed(),
                ..SolveStats::default()
            },
        }
    }
}

/// Solves the LP relaxation with primal simplex from the slack basis.
pub fn solve_lp(model: &MilpModel) -> SolveResult {
    let started = Instant::now();
    let data = LpData::from_model(model);
    let mut lp = Simplex::new(&data);
    let outcome = lp.primal_simplex(LP_ITER_LIMIT);
    let mut res = match outcome {
        LpOutcome::Optimal => {
            let x = lp.structural_values();
            let obj = model.evaluate_objective(&x);
            SolveResult {
                status: SolveStatus::Optimal,
                objective: Some(obj),
                best_bound: obj,
                assignment: Some(x),
                row_duals: Some(lp.row_duals()),
                stats: SolveStats::default(),
            }
        }
        LpOutcome::Infeasible => SolveResult::empty(SolveStatus::Infeasible, started),
        LpOutcome::Unbounded => SolveResult::empty(SolveStatus::Unbounded, started),
        LpOutcome::Cutoff | LpOutcome::IterationLimit => SolveResult::empty(SolveStatus::NodeLimit, started),
    };
    res.stats.simplex_iterations = lp.iterations as u64;
    res.stats.nodes = 1;
    res.stats.wall_time = started.elapsed();
    res
}

/// Variable selection rule at a fractional node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branching {
    /// Binary farthest from integrality; ties go to the lowest index.
    MostFractional,
    /// Pseudocosts, initialised by strong branching until reliable.
    Reliability,
}

/// Chain of binary fixings from the root to a node.
struct Fix {
    var: usize,
    value: f64,
    parent: Option<Rc<Fix>>,
}

/// How a node was created, for pseudocost bookkeeping.
#[derive(Clone, Copy)]
struct Origin {
    var: usize,
    up: bool,
    frac: f64,
    parent_obj: f64,
}

struct Node {
    bound: f64,
    depth: u32,
    seq: u64,
    parent_id: u64,
    fixes: Option<Rc<Fix>>,
    basis: Option<Rc<Basis>>,
    origin: Option<Origin>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    /// Max-heap order: smaller bound first, then deeper, then older.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Solves `model` to proven optimality (within `options.gap`) or until a limit.
pub fn solve_milp(model: &MilpModel, options: &SolverOptions) -> SolveResult {
    let started = Instant::now();
    if options.presolve {
        let Some(pre) = presolve(model) else {
            return SolveResult::empty(SolveStatus::Infeasible, started);
        };
        let mut res = branch_and_bound(&pre.model, options, started);
        res.stats.presolve = Some(pre.stats.clone());
        lift(&pre, model, &mut res);
        polish(model, options, &mut res);
        res
    } else {
        let mut res = branch_and_bound(model, options, started);
        polish(model, options, &mut res);
        res
    }
}

/// Re-solves the LP with every binary fixed at its incumbent value, removing
/// the slack that integrality tolerance and relaxed presolve bounds leave behind.
fn polish(model: &MilpModel, options: &SolverOptions, res: &mut SolveResult) {
    let Some(x) = res.assignment.as_ref() else { return };
    let mut fixed = model.clone();
    let binaries: Vec<VarId> = model.binaries().collect();
    for &b in &binaries {
        let v = x[b.0].round();
        fixed.set_bounds(b, v, v);
    }
    let lp = solve_lp(&fixed);
    res.stats.simplex_iterations += lp.stats.simplex_iterations;
    let (Some(obj), Some(y)) = (lp.objective, lp.assignment) else { return };
    if obj <= res.objective.unwrap_or(f64::INFINITY) + options.gap {
        res.objective = Some(obj);
        if res.status == SolveStatus::Optimal {
            res.best_bound = obj;
        }
        res.assignment = Some(y);
    }
}

fn lift(pre: &Presolved, original: &MilpModel, res: &mut SolveResult) {
    if let Some(x) = res.assignment.take() {
        let full = pre.postsolve(&x);
        res.objective = Some(original.evaluate_objective(&full));
        res.assignment = Some(full);
    }
}

const RELIABLE: u32 = 4;
const MAX_STRONG: usize = 24;
const LOOKAHEAD: usize = 8;
const STRONG_ITERS: usize = 150;
const MIN_GAIN: f64 = 1e-6;

#[derive(Clone, Default)]
struct Pseudocost {
    down_sum: f64,
    down_n: u32,
    up_sum: f64,
    up_n: u32,
}

impl Pseudocost {
    fn record(&mut self, up: bool, per_unit: f64) {
        if up {
            self.up_sum += per_unit;
            self.up_n += 1;
        } else {
            self.down_sum += per_unit;
            self.down_n += 1;
        }
    }
}

struct Pseudocosts {
    vars: Vec<Pseudocost>,
}

impl Pseudocosts {
    fn averages(&self) -> (f64, f64) {
        let (mut ds, mut dn, mut us, mut un) = (0.0, 0u32, 0.0, 0u32);
        for p in &self.vars {
            ds += p.down_sum;
            dn += p.down_n;
            us += p.up_sum;
            un += p.up_n;
        }
        let d = if dn > 0 { ds / dn as f64 } else { 1.0 };
        let u = if un > 0 { us / un as f64 } else { 1.0 };
        (d, u)
    }

    fn estimate(&self, j: usize, frac: f64, avg: (f64, f64)) -> (f64, f64) {
        let p = &self.vars[j];
        let d = if p.down_n > 0 { p.down_sum / p.down_n as f64 } else { avg.0 };
        let u = if p.up_n > 0 { p.up_sum / p.up_n as f64 } else { avg.1 };
        (d * frac, u * (1.0 - frac))
    }
}

fn score(down: f64, up: f64) -> f64 {
    down.max(MIN_GAIN) * up.max(MIN_GAIN)
}

/// Outcome of a trial solve with one binary fixed.
#[derive(Clone, Copy)]
enum Trial {
    Pruned,
    Bound(f64),
}

struct Choice {
    var: usize,
    frac: f64,
    /// Lower bounds for the down and up child; `None` when pruned.
    down: Option<f64>,
    up: Option<f64>,
}

fn trial<'a>(lp: &mut Simplex<'a>, saved: &Simplex<'a>, j: usize, value: f64, cutoff: f64, iters: &mut u64) -> Trial {
    let (lo, hi) = saved.bounds(j);
    lp.set_bounds(j, value, value);
    let it0 = lp.iterations;
    let outcome = lp.solve(cutoff, STRONG_ITERS);
    *iters += (lp.iterations - it0) as u64;
    let res = match outcome {
        LpOutcome::Infeasible | LpOutcome::Cutoff => Trial::Pruned,
        LpOutcome::Optimal | LpOutcome::IterationLimit => {
            let v = lp.objective();
            if v >= cutoff {
                Trial::Pruned
            } else {
                Trial::Bound(v)
            }
        }
        LpOutcome::Unbounded => Trial::Bound(f64::NEG_INFINITY),
    };
    lp.clone_from(saved);
    lp.set_bounds(j, lo, hi);
    res
}

#[allow(clippy::too_many_arguments)]
fn select_reliability<'a>(
    lp: &mut Simplex<'a>,
    fractional: &[(usize, f64)],
    obj: f64,
    cutoff: f64,
    pc: &mut Pseudocosts,
    iters: &mut u64,
) -> Choice {
    let avg = pc.averages();
    let mut cands: Vec<(usize, f64, f64)> = fractional
        .iter()
        .map(|&(j, f)| {
            let (d, u) = pc.estimate(j, f, avg);
            (j, f, score(d, u))
        })
        .collect();
    // Highest pseudocost score first; ties by index.
    cands.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));

    let mut best: Option<(f64, Choice)> = None;
    let mut strong_done = 0;
    let mut since_improve = 0;
    let saved = lp.clone();
    for &(j, f, est_score) in &cands {
        let p = &pc.vars[j];
        let reliable = p.down_n.min(p.up_n) >= RELIABLE;
        let (s, down, up) = if reliable || strong_done >= MAX_STRONG {
            (est_score, Some(obj), Some(obj))
        } else {
            strong_done += 1;
            let td = trial(lp, &saved, j, 0.0, cutoff, iters);
            let tu = trial(lp, &saved, j, 1.0, cutoff, iters);
            let down = match td {
                Trial::Bound(v) => {
                    pc.vars[j].record(false, (v - obj).max(0.0) / f);
                    Some(v.max(obj))
                }
                Trial::Pruned => None,
            };
            let up = match tu {
                Trial::Bound(v) => {
                    pc.vars[j].record(true, (v - obj).max(0.0) / (1.0 - f));
                    Some(v.max(obj))
                }
                Trial::Pruned => None,
            };
            if down.is_none() || up.is_none() {
                // One side is pruned: branching here removes it for free.
                return Choice { var: j, frac: f, down, up };
            }
            let s = score(down.unwrap() - obj, up.unwrap() - obj);
            (s, down, up)
        };
        if best.as_ref().is_none_or(|(bs, _)| s > *bs) {
            best = Some((s, Choice { var: j, frac: f, down, up }));
            since_improve = 0;
        } else {
            since_improve += 1;
            if since_improve >= LOOKAHEAD && strong_done > 0 {
                break;
            }
        }
    }
    best.map(|(_, c)| c).expect("at least one fractional candidate")
}

fn branch_and_bound(model: &MilpModel, options: &SolverOptions, started: Instant) -> SolveResult {
    let data = LpData::from_model(model);
    let n = data.n;
    let binaries: Vec<usize> = model.binaries().map(|v| v.0).collect();
    let root_lo: Vec<f64> = data.lo[..n].to_vec();
    let root_hi: Vec<f64> = data.hi[..n].to_vec();
    let offset = model.objective_offset();

    let mut lp = Simplex::new(&data);
    let mut stats = SolveStats::default();
    let mut pc = Pseudocosts {
        vars: vec![Pseudocost::default(); n],
    };
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut heap = BinaryHeap::new();
    let mut seq: u64 = 0;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        depth: 0,
        seq,
        parent_id: u64::MAX,
        fixes: None,
        basis: None,
        origin: None,
    });
    let mut applied: Vec<usize> = Vec::new();
    let mut last_solved: u64 = u64::MAX;
    let mut status = None;
    let mut unresolved = false;

    while let Some(node) = heap.pop() {
        let cutoff = incumbent.as_ref().map_or(f64::INFINITY, |(v, _)| v - options.gap);
        if node.bound >= cutoff {
            continue;
        }
        if options.node_limit.is_some_and(|lim| stats.nodes >= lim) {
            heap.push(node);
            status = Some(SolveStatus::NodeLimit);
            break;
        }
        if options.time_limit.is_some_and(|lim| started.elapsed() >= lim) {
            heap.push(node);
            status = Some(SolveStatus::TimeLimit);
            break;
        }
        stats.nodes += 1;
        let node_id = node.seq;

        // Install the node's bounds.
        for &j in &applied {
            lp.set_bounds(j, root_lo[j], root_hi[j]);
        }
        applied.clear();
        let mut f = node.fixes.as_deref();
        while let Some(fix) = f {
            lp.set_bounds(fix.var, fix.value, fix.value);
            applied.push(fix.var);
            f = fix.parent.as_deref();
        }
        if node.parent_id != last_solved {
            if let Some(b) = &node.basis {
                lp.load_basis(b);
            }
        }

        let it0 = lp.iterations;
        let mut outcome = lp.solve(cutoff, LP_ITER_LIMIT);
        if outcome == LpOutcome::IterationLimit {
            outcome = lp.primal_simplex(LP_ITER_LIMIT);
        }
        stats.simplex_iterations += (lp.iterations - it0) as u64;
        last_solved = node_id;

        if let Some(every) = options.log_every {
            if stats.nodes % every == 0 {
                eprintln!(
                    "nodes {:>8}  open {:>8}  bound {:>12.6}  incumbent {:>12}  {:>7.1}s",
                    stats.nodes,
                    heap.len(),
                    node.bound + offset,
                    incumbent.as_ref().map_or("-".to_string(), |(v, _)| format!("{:.6}", v + offset)),
                    started.elapsed().as_secs_f64()
                );
            }
        }

        match outcome {
            LpOutcome::Optimal => {}
            LpOutcome::Infeasible | LpOutcome::Cutoff => continue,
            LpOutcome::Unbounded => {
                if node.depth == 0 {
                    status = Some(SolveStatus::Unbounded);
                    break;
                }
                unresolved = true;
                continue;
            }
            LpOutcome::IterationLimit => {
                unresolved = true;
                continue;
            }
        }
        let obj = lp.objective();
        if let Some(o) = node.origin {
            let width = if o.up { 1.0 - o.frac } else { o.frac };
            pc.vars[o.var].record(o.up, (obj - o.parent_obj).max(0.0) / width);
        }
        if obj >= cutoff {
            continue;
        }

        let x = lp.values();
        let fractional: Vec<(usize, f64)> = binaries
            .iter()
            .filter_map(|&j| {
                let frac = x[j] - x[j].floor();
                (frac > options.integrality_tol && frac < 1.0 - options.integrality_tol).then_some((j, frac))
            })
            .collect();
        if fractional.is_empty() {
            let mut sol = lp.structural_values();
            for &j in &binaries {
                sol[j] = sol[j].round();
            }
            let value = model.evaluate_objective(&sol) - offset;
            if incumbent.as_ref().is_none_or(|(v, _)| value < *v) {
                incumbent = Some((value, sol));
            }
            continue;
        }
        let choice = match options.branching {
            Branching::MostFractional => {
                let mut best = fractional[0];
                for &(j, frac) in &fractional[1..] {
                    if (frac - 0.5).abs() < (best.1 - 0.5).abs() {
                        best = (j, frac);
                    }
                }
                Choice {
                    var: best.0,
                    frac: best.1,
                    down: Some(obj),
                    up: Some(obj),
                }
            }
            Branching::Reliability => {
                let mut sb_iters = 0;
                let c = select_reliability(&mut lp, &fractional, obj, cutoff, &mut pc, &mut sb_iters);
                stats.simplex_iterations += sb_iters;
                c
            }
        };
        let basis = Rc::new(lp.basis());
        let depth = node.depth + 1;
        for (value, bound) in [(0.0, choice.down), (1.0, choice.up)] {
            let Some(bound) = bound else { continue };
            seq += 1;
            heap.push(Node {
                bound,
                depth,
                seq,
                parent_id: node_id,
                fixes: Some(Rc::new(Fix {
                    var: choice.var,
                    value,
                    parent: node.fixes.clone(),
                })),
                basis: Some(basis.clone()),
                origin: Some(Origin {
                    var: choice.var,
                    up: value == 1.0,
                    frac: choice.frac,
                    parent_obj: obj,
                }),
            });
        }
    }

    let best_open = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let status = status.unwrap_or(match (&incumbent, unresolved) {
        (_, true) => SolveStatus::NodeLimit,
        (Some(_), false) => SolveStatus::Optimal,
        (None, false) => SolveStatus::Infeasible,
    });
    stats.wall_time = started.elapsed();
    let inc_val = incumbent.as_ref().map_or(f64::INFINITY, |(v, _)| *v);
    let (objective, assignment) = match incumbent {
        Some((v, x)) => (Some(v + offset), Some(x)),
        None => (None, None),
    };
    let best_bound = match status {
        SolveStatus::Optimal => objective.unwrap_or(f64::INFINITY),
        SolveStatus::Infeasible => f64::INFINITY,
        SolveStatus::Unbounded => f64::NEG_INFINITY,
        _ => best_open.min(inc_val) + offset,
    };
    SolveResult {
        status,
        objective,
        best_bound,
        assignment,
        row_duals: None,
        stats,
    }
}

/// True when every binary in `x` is within `tol` of an integer.
pub fn is_integral(model: &MilpModel, x: &[f64], tol: f64) -> bool {
    model
        .vars()
        .iter()
        .zip(x)
        .all(|(v, &xv)| v.kind != VarKind::Binary || (xv - xv.round()).abs() <= tol)
}
