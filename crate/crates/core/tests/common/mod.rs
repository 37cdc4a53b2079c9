#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stlid::{
    DerivativePredicate, DerivativeSide, Formula, FormulaKind, IntegralPredicate, Interval, LinearExpr, Predicate,
    Signal, Term,
};
use stlid_milp::{MilpModel, Sense, VarKind};

/// Direct recursion over the syntax tree, independent of compilation and memoization.
pub struct Oracle<'a> {
    pub signal: &'a Signal,
}

fn steps(t: f64, dt: f64) -> i64 {
    (t / dt).round() as i64
}

impl Oracle<'_> {
    fn g(&self, e: &LinearExpr, k: i64) -> Option<f64> {
        if k < 0 || k as usize >= self.signal.samples.len() {
            return None;
        }
        let row = &self.signal.samples[k as usize];
        Some(e.eval_with(|d| row[self.signal.dims.iter().position(|x| x == d).unwrap()]))
    }

    fn atom(&self, f: &Formula, k: i64) -> Option<Option<f64>> {
        let dt = self.signal.delta_t;
        Some(match &f.kind {
            FormulaKind::Pred(p) => self.g(&p.expr, k).map(|v| v - p.threshold),
            FormulaKind::IntPred(p) => {
                let (a, b) = (steps(p.bounds.lo, dt), steps(p.bounds.hi, dt));
                let vals: Option<Vec<f64>> = (k + a..k + b).map(|j| self.g(&p.expr, j)).collect();
                vals.map(|v| v.iter().fold(0.0, |s, g| s + g * dt) - p.threshold)
            }
            FormulaKind::DerPred(p) => {
                let (lo, hi) = match p.side {
                    DerivativeSide::Right => (k, k + 1),
                    DerivativeSide::Left => (k - 1, k),
                };
                match (self.g(&p.expr, lo), self.g(&p.expr, hi)) {
                    (Some(a), Some(b)) => Some((b - a - p.threshold * dt) / dt),
                    _ => None,
                }
            }
            _ => return None,
        })
    }

    /// `None` when some needed sample is missing.
    pub fn sat(&self, f: &Formula, k: i64) -> Option<bool> {
        if let Some(v) = self.atom(f, k) {
            return v.map(|v| v >= 0.0);
        }
        let dt = self.signal.delta_t;
        match &f.kind {
            FormulaKind::Not(c) => self.sat(c, k).map(|b| !b),
            FormulaKind::And(cs) => cs.iter().map(|c| self.sat(c, k)).collect::<Option<Vec<_>>>().map(|v| v.iter().all(|&b| b)),
            FormulaKind::Or(cs) => cs.iter().map(|c| self.sat(c, k)).collect::<Option<Vec<_>>>().map(|v| v.iter().any(|&b| b)),
            FormulaKind::Implies(a, b) => {
                let (a, b) = (self.sat(a, k)?, self.sat(b, k)?);
                Some(!a || b)
            }
            FormulaKind::Globally(i, c) => {
                let vs: Option<Vec<bool>> = (k + steps(i.lo, dt)..=k + steps(i.hi, dt)).map(|j| self.sat(c, j)).collect();
                vs.map(|v| v.iter().all(|&b| b))
            }
            FormulaKind::Eventually(i, c) => {
                let vs: Option<Vec<bool>> = (k + steps(i.lo, dt)..=k + steps(i.hi, dt)).map(|j| self.sat(c, j)).collect();
                vs.map(|v| v.iter().any(|&b| b))
            }
            _ => unreachable!(),
        }
    }

    pub fn rob(&self, f: &Formula, k: i64) -> Option<f64> {
        if let Some(v) = self.atom(f, k) {
            return v;
        }
        let dt = self.signal.delta_t;
        let fold = |vs: Option<Vec<f64>>, min: bool| {
            vs.map(|v| v.into_iter().fold(if min { f64::INFINITY } else { f64::NEG_INFINITY }, |a, b| if min { a.min(b) } else { a.max(b) }))
        };
        match &f.kind {
            FormulaKind::Not(c) => self.rob(c, k).map(|v| -v),
            FormulaKind::And(cs) => fold(cs.iter().map(|c| self.rob(c, k)).collect(), true),
            FormulaKind::Or(cs) => fold(cs.iter().map(|c| self.rob(c, k)).collect(), false),
            FormulaKind::Implies(a, b) => Some((-self.rob(a, k)?).max(self.rob(b, k)?)),
            FormulaKind::Globally(i, c) => {
                fold((k + steps(i.lo, dt)..=k + steps(i.hi, dt)).map(|j| self.rob(c, j)).collect(), true)
            }
            FormulaKind::Eventually(i, c) => {
                fold((k + steps(i.lo, dt)..=k + steps(i.hi, dt)).map(|j| self.rob(c, j)).collect(), false)
            }
            _ => unreachable!(),
        }
    }
}

/// Random formulas over a fixed set of dimensions, with intervals on the `delta_t` grid.
pub struct Gen<'r> {
    pub rng: &'r mut ChaCha8Rng,
    pub dims: Vec<String>,
    pub delta_t: f64,
    /// Thresholds on a coarse grid make exact ties likely.
    pub grid: bool,
    pub max_window: i64,
}

impl Gen<'_> {
    fn threshold(&mut self) -> f64 {
        if self.grid {
            self.rng.gen_range(-6..=6) as f64 * 0.5
        } else {
            self.rng.gen_range(-3.0..3.0)
        }
    }

    fn expr(&mut self) -> LinearExpr {
        let n = self.rng.gen_range(1..=self.dims.len().min(2));
        let mut dims = self.dims.clone();
        dims.shuffle(self.rng);
        let terms = dims[..n]
            .iter()
            .map(|d| Term {
                dim: d.clone(),
                coeff: *[1.0, -1.0, 2.0, 0.5, -1.5].choose(self.rng).unwrap(),
                abs: self.rng.gen_bool(0.25),
            })
            .collect();
        LinearExpr { terms, constant: 0.0 }
    }

    fn window(&mut self) -> Interval {
        let lo = self.rng.gen_range(0..=1);
        let hi = lo + self.rng.gen_range(0..=self.max_window);
        Interval::new(lo as f64 * self.delta_t, hi as f64 * self.delta_t)
    }

    pub fn atom(&mut self) -> Formula {
        let ge = self.rng.gen_bool(0.6);
        let (expr, c) = (self.expr(), self.threshold());
        match self.rng.gen_range(0..6) {
            0 | 1 | 2 => {
                if ge {
                    Formula::pred(Predicate::ge(expr, c))
                } else {
                    Formula::pred(Predicate::le(expr, c))
                }
            }
            3 | 4 => {
                let a = self.rng.gen_range(0..=1);
                let b = a + self.rng.gen_range(1..=2);
                let iv = Interval::new(a as f64 * self.delta_t, b as f64 * self.delta_t);
                if ge {
                    Formula::integral(IntegralPredicate::ge(expr, iv, c))
                } else {
                    Formula::integral(IntegralPredicate::le(expr, iv, c))
                }
            }
            _ => {
                let side = if self.rng.gen_bool(0.5) { DerivativeSide::Left } else { DerivativeSide::Right };
                if ge {
                    Formula::derivative(DerivativePredicate::ge(expr, side, c))
                } else {
                    Formula::derivative(DerivativePredicate::le(expr, side, c))
                }
            }
        }
    }

    pub fn formula(&mut self, depth: usize) -> Formula {
        if depth == 0 || self.rng.gen_bool(0.25) {
            return self.atom();
        }
        let d = depth - 1;
        match self.rng.gen_range(0..7) {
            0 => Formula::not(self.formula(d)),
            1 => {
                let n = self.rng.gen_range(2..=3);
                Formula::and((0..n).map(|_| self.formula(d)).collect())
            }
            2 => {
                let n = self.rng.gen_range(2..=3);
                Formula::or((0..n).map(|_| self.formula(d)).collect())
            }
            3 => Formula::implies(self.formula(d), self.formula(d)),
            4 | 5 => {
                let i = self.window();
                Formula::eventually(i.lo, i.hi, self.formula(d))
            }
            _ => {
                let i = self.window();
                Formula::globally(i.lo, i.hi, self.formula(d))
            }
        }
    }

    pub fn signal(&mut self, len: usize) -> Signal {
        let grid = self.grid;
        let samples = (0..len)
            .map(|_| {
                self.dims
                    .iter()
                    .map(|_| if grid { self.rng.gen_range(-4..=4) as f64 * 0.5 } else { self.rng.gen_range(-3.0..3.0) })
                    .collect()
            })
            .collect();
        Signal::new(self.delta_t, self.dims.clone(), samples).unwrap()
    }
}

pub fn dims(n: usize) -> Vec<String> {
    ["x", "y"][..n].iter().map(|s| s.to_string()).collect()
}

/// Feasibility of a model whose continuous variables are determined once the
/// binaries are fixed: every binary assignment is tried, and the remaining
/// variables are pinned by propagating single-unknown rows.
pub fn enumerate_feasible(model: &MilpModel) -> Result<bool, String> {
    let bins: Vec<usize> = model.binaries().map(|v| v.0).collect();
    if bins.len() > 20 {
        return Err(format!("{} binaries", bins.len()));
    }
    let base: Vec<(f64, f64)> = model.vars().iter().map(|v| (v.lo, v.hi)).collect();
    for mask in 0u32..(1 << bins.len()) {
        let mut b = base.clone();
        for (i, &j) in bins.iter().enumerate() {
            let v = ((mask >> i) & 1) as f64;
            if v < b[j].0 || v > b[j].1 {
                continue;
            }
            b[j] = (v, v);
        }
        if bins.iter().any(|&j| b[j].0 != b[j].1) {
            continue;
        }
        if propagate_and_check(model, &mut b)? {
            return Ok(true);
        }
    }
    Ok(false)
}

const TOL: f64 = 1e-9;

fn propagate_and_check(model: &MilpModel, b: &mut [(f64, f64)]) -> Result<bool, String> {
    let pinned = |b: &[(f64, f64)], j: usize| b[j].1 - b[j].0 <= TOL;
    loop {
        let mut changed = false;
        for row in model.constraints() {
            let free: Vec<&(stlid_milp::VarId, f64)> = row.terms.iter().filter(|(v, _)| !pinned(b, v.0)).collect();
            if free.len() != 1 {
                continue;
            }
            let (v, a) = *free[0];
            let rest: f64 = row.terms.iter().filter(|(u, _)| *u != v).map(|(u, c)| c * b[u.0].0).sum();
            // a·x + rest (sense) rhs
            let bound = (row.rhs - rest) / a;
            let (lo, hi) = &mut b[v.0];
            let (new_lo, new_hi) = match (row.sense, a > 0.0) {
                (Sense::Eq, _) => (bound, bound),
                (Sense::Le, true) | (Sense::Ge, false) => (*lo, hi.min(bound)),
                (Sense::Ge, true) | (Sense::Le, false) => (lo.max(bound), *hi),
            };
            if new_lo > new_hi + TOL {
                return Ok(false);
            }
            if new_lo > *lo + TOL || new_hi < *hi - TOL {
                *lo = new_lo;
                *hi = new_hi.max(new_lo);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if let Some(j) = (0..b.len()).find(|&j| !pinned(b, j)) {
        return Err(format!("variable {} not determined", model.vars()[j].name));
    }
    let x: Vec<f64> = b.iter().map(|p| p.0).collect();
    let (rows, bounds, _) = model.max_violation(&x);
    Ok(rows <= 1e-7 && bounds <= 1e-7)
}

/// Fixes `model`'s variables named `x_<dim>_<k>` to the signal values with equality rows.
pub fn pin_signal(model: &mut MilpModel, signal: &Signal, vars: &[Vec<stlid_milp::VarId>]) {
    for (i, d) in signal.dims.iter().enumerate() {
        for (k, row) in signal.samples.iter().enumerate() {
            model.add_constraint(format!("pin_{d}_{k}"), vec![(vars[i][k], 1.0)], Sense::Eq, row[i]);
        }
    }
}

pub fn count_binaries(model: &MilpModel) -> usize {
    model.vars().iter().filter(|v| v.kind == VarKind::Binary).count()
}

pub fn random_gen(rng: &mut ChaCha8Rng, grid: bool, max_window: i64) -> Gen<'_> {
    let n = rng.gen_range(1..=2);
    let delta_t = if rng.gen_bool(0.7) { 1.0 } else { 0.5 };
    Gen { rng, dims: dims(n), delta_t, grid, max_window }
}

pub fn horizon_steps(f: &Formula, dt: f64) -> usize {
    (stlid::horizon(f, dt) / dt).round() as usize
}

/// Outcome of one monitor-versus-oracle comparison.
#[derive(Debug, Default, Clone, Copy)]
pub struct MonitorCase {
    pub satisfied: Option<bool>,
    pub zero_robustness: bool,
}

/// Random formula (depth ≤ 3) and signal (≤ 9 samples), checked against [`Oracle`].
pub fn monitor_case(rng: &mut ChaCha8Rng) -> Result<MonitorCase, String> {
    let grid = rng.gen_bool(0.5);
    let (f, signal, k) = loop {
        let mut g = random_gen(rng, grid, 2);
        let f = g.formula(3);
        let h = horizon_steps(&f, g.delta_t);
        if h > 7 {
            continue;
        }
        let len = g.rng.gen_range(h + 1..=9);
        let k = g.rng.gen_range(0..=len - 1 - h);
        break (f, g.signal(len), k);
    };
    let ctx = || format!("formula {f}\nsignal {:?} dt {} k {k}", signal.samples, signal.delta_t);
    let oracle = Oracle { signal: &signal };
    let want_sat = oracle.sat(&f, k as i64);
    let want_rob = oracle.rob(&f, k as i64);
    let got_sat = stlid::sat(&signal, &f, k);
    let got_rob = stlid::robustness(&signal, &f, k);
    match (want_sat, got_sat, want_rob, got_rob) {
        (None, Err(_), None, Err(_)) => Ok(MonitorCase::default()),
        (Some(ws), Ok(gs), Some(wr), Ok(gr)) => {
            if ws != gs {
                return Err(format!("verdict {gs}, oracle {ws}\n{}", ctx()));
            }
            if (wr - gr.value).abs() > 1e-9 * (1.0 + wr.abs()) {
                return Err(format!("robustness {}, oracle {wr}\n{}", gr.value, ctx()));
            }
            if (gr.value > 0.0 && !gs) || (gr.value < 0.0 && gs) {
                return Err(format!("robustness {} disagrees with verdict {gs}\n{}", gr.value, ctx()));
            }
            Ok(MonitorCase { satisfied: Some(gs), zero_robustness: gr.value == 0.0 })
        }
        (ws, gs, wr, gr) => Err(format!("oracle {ws:?}/{wr:?}, monitor {gs:?}/{gr:?}\n{}", ctx())),
    }
}

/// Outcome of one encoder-versus-monitor comparison.
#[derive(Debug, Clone, Copy)]
pub struct EncoderCase {
    pub satisfied: bool,
    pub binaries: usize,
}

/// Random formula over a pinned random signal: `z_root = 1` is feasible under
/// exhaustive binary enumeration exactly when the monitor reports satisfaction.
/// Signals whose robustness table has a near-zero entry are redrawn, since the
/// encoding is non-strict on both sides of a tie. Models with fewer than three
/// binaries are redrawn.
pub fn encoder_case(rng: &mut ChaCha8Rng, one_sided: bool, max_binaries: usize) -> Result<EncoderCase, String> {
    use stlid::{add_signal_vars, compile, EncodeOptions, EncodingContext, Monitor};
    loop {
        let mut g = random_gen(rng, false, 1);
        let f = g.formula(3);
        let dt = g.delta_t;
        let h = horizon_steps(&f, dt);
        if h > 6 {
            continue;
        }
        let len = h + 1 + g.rng.gen_range(0..=1);
        let signal = g.signal(len);
        let k = g.rng.gen_range(0..len - h);
        let Ok(monitor) = Monitor::new(&signal, &f) else { return Err(format!("invalid formula {f}")) };
        let report = match monitor.robustness(k, true) {
            Ok(r) => r,
            Err(_) => continue,
        };
        if report.per_node.iter().any(|n| n.value.abs() < 1e-6) {
            continue;
        }
        let compiled = compile(&f, dt, &signal.dims).map_err(|e| format!("{e:?}"))?;
        let mut model = MilpModel::new();
        let vars = add_signal_vars(&mut model, &compiled.dims, len - 1, |_, _| (-5.0, 5.0));
        let pinned = Signal {
            delta_t: dt,
            dims: compiled.dims.clone(),
            samples: signal
                .samples
                .iter()
                .map(|row| compiled.dims.iter().map(|d| row[signal.dim_index(d).unwrap()]).collect())
                .collect(),
        };
        pin_signal(&mut model, &pinned, &vars);
        let root = {
            let mut ctx = EncodingContext::new(&mut model, &compiled, vars, EncodeOptions { big_m: 1e4, one_sided })
                .map_err(|e| e.to_string())?;
            ctx.encode(k).map_err(|e| format!("{e}\nformula {f}"))?
        };
        model.add_constraint("spec", vec![(root, 1.0)], Sense::Eq, 1.0);
        let binaries = count_binaries(&model);
        if binaries > max_binaries || binaries < 3 {
            continue;
        }
        let feasible = enumerate_feasible(&model).map_err(|e| format!("{e}\nformula {f}"))?;
        if feasible != report.satisfied {
            return Err(format!(
                "encoding feasible = {feasible}, monitor robustness {}\nformula {f}\nsignal {:?} dt {dt} k {k} one_sided {one_sided}",
                report.value, signal.samples
            ));
        }
        return Ok(EncoderCase { satisfied: report.satisfied, binaries });
    }
}

/// `(formula, horizon at δt = 1)`.
pub const HORIZON_TABLE: [(&str, f64); 20] = [
    ("x >= 0", 0.0),
    ("G[0,5] F[0,4] x >= 0", 9.0),
    ("G[0,5] x >= 0 && F[0,4] x >= 10", 5.0),
    ("I[0,2](x) >= 3", 2.0),
    ("I[1,4](x) >= 3", 4.0),
    ("I[3,4](x) >= 0", 4.0),
    ("F[0,4] I[0,2](x) >= 3", 6.0),
    ("G[2,3] I[1,5](x) >= 0", 8.0),
    ("F[1,1] I[0,0.5](x) >= 0", 1.5),
    ("G[0,19] D+(x) >= 0", 20.0),
    ("G[1,20] D-(x) >= 0", 20.0),
    ("D+(x) >= 0", 1.0),
    ("D-(x) >= 0", 0.0),
    ("!G[0,3] x >= 0", 3.0),
    ("x >= 0 => F[2,7] x >= 1", 7.0),
    ("F[0,2] (x >= 0 || G[1,3] x >= 1)", 5.0),
    ("G[0,1] F[1,2] G[2,3] x >= 0", 6.0),
    ("F[0,14] (G[0,6] x >= 0 && I[0,6](abs(x)) >= 2)", 20.0),
    ("G[0,2] (I[0,3](x) >= 0 && x >= 1)", 5.0),
    ("F[0,17] G[0,3] x >= 1.5", 20.0),
];
