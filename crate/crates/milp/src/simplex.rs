//! Bounded revised simplex over the computational form `A·x − s = 0`.
//!
//! Every row `i` owns a logical variable `s_i = a_i·x` whose bounds carry the
//! row sense and right-hand side, so the all-logical basis is always a valid
//! starting point. Structural columns are `0..n`, logicals `n..n+m`.

use crate::lu::{LuFactors, SparseCol};
use crate::model::{MilpModel, Sense};

pub const PRIMAL_TOL: f64 = 1e-7;
pub const DUAL_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
/// Consecutive degenerate pivots before switching to Bland's rule.
pub const BLAND_AFTER: usize = 1000;

/// Sparse LP data in computational form.
#[derive(Debug, Clone)]
pub struct LpData {
    pub n: usize,
    pub m: usize,
    pub cols: Vec<Vec<(usize, f64)>>,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub cost: Vec<f64>,
    /// Bounds of all `n + m` variables (structurals then logicals).
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl LpData {
    /// Builds the relaxation of `model` (integrality dropped).
    pub fn from_model(model: &MilpModel) -> Self {
        let n = model.num_vars();
        let m = model.num_constraints();
        let mut cols = vec![Vec::new(); n];
        let mut rows = vec![Vec::new(); m];
        let mut lo: Vec<f64> = model.vars().iter().map(|v| v.lo).collect();
        let mut hi: Vec<f64> = model.vars().iter().map(|v| v.hi).collect();
        for (i, c) in model.constraints().iter().enumerate() {
            for &(v, a) in &c.terms {
                cols[v.0].push((i, a));
                rows[i].push((v.0, a));
            }
            let (l, u) = match c.sense {
                Sense::Le => (f64::NEG_INFINITY, c.rhs),
                Sense::Ge => (c.rhs, f64::INFINITY),
                Sense::Eq => (c.rhs, c.rhs),
            };
            lo.push(l);
            hi.push(u);
        }
        let mut cost = vec![0.0; n];
        for &(v, c) in model.objective() {
            cost[v.0] += c;
        }
        LpData {
            n,
            m,
            cols,
            rows,
            cost,
            lo,
            hi,
        }
    }

    fn column(&self, j: usize) -> SparseCol {
        if j < self.n {
            self.cols[j].clone()
        } else {
            vec![(j - self.n, -1.0)]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

/// Basis header sufficient to warm-start another solve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub basic: Vec<u32>,
    pub status: Vec<Status>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal,
    Infeasible,
    Unbounded,
    /// Dual objective exceeded the supplied cutoff.
    Cutoff,
    IterationLimit,
}

#[derive(Clone)]
pub struct Simplex<'a> {
    data: &'a LpData,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    pos_of: Vec<usize>,
    status: Vec<Status>,
    x: Vec<f64>,
    d: Vec<f64>,
    lu: LuFactors,
    dse: Vec<f64>,
    pub iterations: usize,
    degenerate_run: usize,
}

const NONE: usize = usize::MAX;

fn nonbasic_status(lo: f64, hi: f64) -> Status {
    if lo.is_finite() {
        Status::AtLower
    } else if hi.is_finite() {
        Status::AtUpper
    } else {
        Status::Free
    }
}

impl<'a> Simplex<'a> {
    /// Starts from the all-logical basis.
    pub fn new(data: &'a LpData) -> Self {
        let n = data.n;
        let m = data.m;
        let total = n + m;
        let mut status = Vec::with_capacity(total);
        for j in 0..n {
            status.push(nonbasic_status(data.lo[j], data.hi[j]));
        }
        status.extend(std::iter::repeat(Status::Basic).take(m));
        let basis: Vec<usize> = (n..total).collect();
        let mut pos_of = vec![NONE; total];
        for (p, &j) in basis.iter().enumerate() {
            pos_of[j] = p;
        }
        let mut cost = data.cost.clone();
        cost.resize(total, 0.0);
        let mut s = Simplex {
            data,
            lo: data.lo.clone(),
            hi: data.hi.clone(),
            cost,
            basis,
            pos_of,
            status,
            x: vec![0.0; total],
            d: vec![0.0; total],
            lu: LuFactors::default(),
            dse: vec![1.0; m],
            iterations: 0,
            degenerate_run: 0,
        };
        s.refactor();
        s.compute_primal();
        s.compute_duals();
        s
    }

    pub fn num_structural(&self) -> usize {
        self.data.n
    }

    /// Replaces the bounds of variable `j` (structural index).
    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lo[j] = lo;
        self.hi[j] = hi;
        if self.status[j] != Status::Basic {
            self.status[j] = match self.status[j] {
                Status::AtUpper if hi.is_finite() => Status::AtUpper,
                Status::AtLower if lo.is_finite() => Status::AtLower,
                _ => nonbasic_status(lo, hi),
            };
        }
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.hi[j])
    }

    pub fn basis(&self) -> Basis {
        Basis {
            basic: self.basis.iter().map(|&j| j as u32).collect(),
            status: self.status.clone(),
        }
    }

    /// Installs a basis snapshot and refactorises.
    pub fn load_basis(&mut self, b: &Basis) {
        self.basis = b.basic.iter().map(|&j| j as usize).collect();
        self.status = b.status.clone();
        self.pos_of.iter_mut().for_each(|p| *p = NONE);
        for (p, &j) in self.basis.iter().enumerate() {
            self.pos_of[j] = p;
        }
        for j in 0..self.status.len() {
            if self.status[j] != Status::Basic {
                self.set_bounds(j, self.lo[j], self.hi[j]);
            }
        }
        self.dse.iter_mut().for_each(|w| *w = 1.0);
        self.refactor();
        self.compute_primal();
        self.compute_duals();
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            Status::AtLower => self.lo[j],
            Status::AtUpper => self.hi[j],
            Status::Free => 0.0,
            Status::Basic => self.x[j],
        }
    }

    fn refactor(&mut self) {
        let m = self.data.m;
        loop {
            let cols: Vec<SparseCol> = self.basis.iter().map(|&j| self.data.column(j)).collect();
            match LuFactors::factorize(m, &cols) {
                Ok(lu) => {
                    self.lu = lu;
                    return;
                }
                Err(sing) => {
                    // Swap dependent columns for the logicals of uncovered rows.
                    for (&p, &r) in sing.positions.iter().zip(&sing.rows) {
                        let old = self.basis[p];
                        let new = self.data.n + r;
                        self.pos_of[old] = NONE;
                        self.status[old] = nonbasic_status(self.lo[old], self.hi[old]);
                        if self.status[new] == Status::Basic {
                            continue;
                        }
                        self.basis[p] = new;
                        self.pos_of[new] = p;
                        self.status[new] = Status::Basic;
                    }
                }
            }
        }
    }

    fn compute_primal(&mut self) {
        let n = self.data.n;
        let m = self.data.m;
        let total = n + m;
        let mut rhs = vec![0.0; m];
        for j in 0..total {
            if self.status[j] == Status::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v != 0.0 {
                if j < n {
                    for &(i, a) in &self.data.cols[j] {
                        rhs[i] -= a * v;
                    }
                } else {
                    rhs[j - n] += v;
                }
            }
        }
        self.lu.ftran(&mut rhs);
        for (p, &j) in self.basis.iter().enumerate() {
            self.x[j] = rhs[p];
        }
    }

    fn duals(&self) -> Vec<f64> {
        let mut y: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        self.lu.btran(&mut y);
        y
    }

    fn compute_duals(&mut self) {
        let y = self.duals();
        let n = self.data.n;
        for j in 0..n + self.data.m {
            self.d[j] = if self.status[j] == Status::Basic {
                0.0
            } else if j < n {
                self.cost[j] - self.data.cols[j].iter().map(|&(i, a)| y[i] * a).sum::<f64>()
            } else {
                self.cost[j] + y[j - n]
            };
        }
    }

    /// Row multipliers `y` with `Bᵀy = c_B`.
    pub fn row_duals(&self) -> Vec<f64> {
        self.duals()
    }

    pub fn reduced_costs(&self) -> &[f64] {
        &self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn structural_values(&self) -> Vec<f64> {
        self.x[..self.data.n].to_vec()
    }

    pub fn objective(&self) -> f64 {
        self.x.iter().zip(&self.cost).map(|(x, c)| x * c).sum()
    }

    fn pivot_row(&self, r: usize) -> Vec<f64> {
        let m = self.data.m;
        let mut rho = vec![0.0; m];
        rho[r] = 1.0;
        self.lu.btran(&mut rho);
        self.row_times_matrix(&rho)
    }

    /// `ρᵀ·Â` over all columns (basic entries included).
    fn row_times_matrix(&self, rho: &[f64]) -> Vec<f64> {
        let n = self.data.n;
        let mut alpha = vec![0.0; n + self.data.m];
        for (i, &ri) in rho.iter().enumerate() {
            if ri.abs() > 1e-14 {
                for &(j, a) in &self.data.rows[i] {
                    alpha[j] += ri * a;
                }
                alpha[n + i] = -ri;
            }
        }
        alpha
    }

    fn ftran_column(&self, j: usize) -> Vec<f64> {
        let mut col = vec![0.0; self.data.m];
        if j < self.data.n {
            for &(i, a) in &self.data.cols[j] {
                col[i] = a;
            }
        } else {
            col[j - self.data.n] = -1.0;
        }
        self.lu.ftran(&mut col);
        col
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lo[j] - PRIMAL_TOL * (1.0 + self.lo[j].abs()) {
            v - self.lo[j]
        } else if v > self.hi[j] + PRIMAL_TOL * (1.0 + self.hi[j].abs()) {
            v - self.hi[j]
        } else {
            0.0
        }
    }

    pub fn is_primal_feasible(&self) -> bool {
        self.basis.iter().all(|&j| self.infeasibility(j) == 0.0)
    }

    fn is_dual_feasible_at(&self, j: usize) -> bool {
        if self.lo[j] == self.hi[j] {
            return true;
        }
        match self.status[j] {
            Status::Basic => true,
            Status::AtLower => self.d[j] >= -DUAL_TOL,
            Status::AtUpper => self.d[j] <= DUAL_TOL,
            Status::Free => self.d[j].abs() <= DUAL_TOL,
        }
    }

    /// Flips boxed nonbasics to the bound their reduced cost prefers.
    /// Returns false when some dual infeasibility cannot be repaired.
    fn make_dual_feasible(&mut self) -> bool {
        let mut flipped = false;
        let mut ok = true;
        for j in 0..self.status.len() {
            if self.is_dual_feasible_at(j) {
                continue;
            }
            let want = if self.d[j] > 0.0 { Status::AtLower } else { Status::AtUpper };
            let finite = match want {
                Status::AtLower => self.lo[j].is_finite(),
                _ => self.hi[j].is_finite(),
            };
            if finite {
                self.status[j] = want;
                flipped = true;
            } else {
                ok = false;
            }
        }
        if flipped {
            self.compute_primal();
        }
        ok
    }

    fn maybe_refactor(&mut self) {
        if self.lu.num_etas() >= REFACTOR_EVERY {
            self.refactor();
            self.compute_primal();
            self.compute_duals();
        }
    }

    fn replace_basic(&mut self, r: usize, q: usize, leaving_status: Status, alpha_col: &[f64]) {
        let p = self.basis[r];
        self.status[p] = leaving_status;
        self.pos_of[p] = NONE;
        self.basis[r] = q;
        self.pos_of[q] = r;
        self.status[q] = Status::Basic;
        self.lu.update(r, alpha_col);
        self.iterations += 1;
    }

    /// Solves from the current basis: dual simplex when the basis is dual
    /// feasible, otherwise primal simplex.
    pub fn solve(&mut self, cutoff: f64, max_iter: usize) -> LpOutcome {
        self.compute_primal();
        self.compute_duals();
        if self.make_dual_feasible() {
            match self.dual_simplex(cutoff, max_iter) {
                LpOutcome::Optimal => {}
                other => return other,
            }
        }
        // Either dual infeasible from the start or cleaning up after drift.
        self.primal_simplex(max_iter)
    }

    /// Dual simplex; requires a dual feasible basis.
    pub fn dual_simplex(&mut self, cutoff: f64, max_iter: usize) -> LpOutcome {
        let start = self.iterations;
        loop {
            if self.iterations - start >= max_iter {
                return LpOutcome::IterationLimit;
            }
            if cutoff.is_finite() && self.objective() > cutoff {
                return LpOutcome::Cutoff;
            }
            let bland = self.degenerate_run > BLAND_AFTER;
            // Leaving row: steepest-edge weighted infeasibility.
            let mut r = NONE;
            let mut best = 0.0;
            for (p, &j) in self.basis.iter().enumerate() {
                let inf = self.infeasibility(j);
                if inf == 0.0 {
                    continue;
                }
                let score = if bland { -(j as f64) } else { inf * inf / self.dse[p] };
                if r == NONE || score > best {
                    best = score;
                    r = p;
                }
            }
            if r == NONE {
                // Primal feasible; confirm dual feasibility survived.
                self.compute_duals();
                if (0..self.status.len()).all(|j| self.is_dual_feasible_at(j)) {
                    return LpOutcome::Optimal;
                }
                if !self.make_dual_feasible() {
                    return self.primal_simplex(max_iter);
                }
                continue;
            }
            let p = self.basis[r];
            let to_lower = self.x[p] < self.lo[p];
            let delta = if to_lower { self.x[p] - self.lo[p] } else { self.x[p] - self.hi[p] };

            let mut rho = vec![0.0; self.data.m];
            rho[r] = 1.0;
            self.lu.btran(&mut rho);
            let alpha_row = self.row_times_matrix(&rho);

            // Harris two-pass ratio test on reduced costs.
            let eligible = |j: usize, a: f64| -> bool {
                if a.abs() < PIVOT_TOL || self.lo[j] == self.hi[j] {
                    return false;
                }
                match self.status[j] {
                    Status::Basic => false,
                    Status::AtLower => if to_lower { a < 0.0 } else { a > 0.0 },
                    Status::AtUpper => if to_lower { a > 0.0 } else { a < 0.0 },
                    Status::Free => true,
                }
            };
            let mut bound = f64::INFINITY;
            for (j, &a) in alpha_row.iter().enumerate() {
                if eligible(j, a) {
                    let ratio = (self.d[j].abs() + DUAL_TOL) / a.abs();
                    if ratio < bound {
                        bound = ratio;
                    }
                }
            }
            if bound == f64::INFINITY {
                return LpOutcome::Infeasible;
            }
            let mut q = NONE;
            let mut q_abs = 0.0;
            for (j, &a) in alpha_row.iter().enumerate() {
                if eligible(j, a) && self.d[j].abs() / a.abs() <= bound {
                    let better = if bland { q == NONE } else { a.abs() > q_abs };
                    if better {
                        q = j;
                        q_abs = a.abs();
                    }
                }
            }
            let alpha_rq = alpha_row[q];
            let alpha_col = self.ftran_column(q);
            if (alpha_col[r] - alpha_rq).abs() > 1e-6 * (1.0 + alpha_rq.abs()) {
                // Factorisation drifted; rebuild and retry.
                self.refactor();
                self.compute_primal();
                self.compute_duals();
                if !self.make_dual_feasible() {
                    return self.primal_simplex(max_iter);
                }
                continue;
            }

            // Dual step.
            let theta = self.d[q] / alpha_rq;
            if theta == 0.0 {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }
            for (j, &a) in alpha_row.iter().enumerate() {
                if a != 0.0 && self.status[j] != Status::Basic {
                    self.d[j] -= theta * a;
                }
            }
            self.d[q] = 0.0;
            self.d[p] = -theta;

            // Primal step.
            let t = delta / alpha_rq;
            self.x[q] += t;
            for (i, &a) in alpha_col.iter().enumerate() {
                if a != 0.0 {
                    self.x[self.basis[i]] -= a * t;
                }
            }
            self.x[p] = if to_lower { self.lo[p] } else { self.hi[p] };

            // Steepest-edge weights.
            let mut tau = rho.clone();
            self.lu.ftran(&mut tau);
            let wr = self.dse[r];
            for (i, &a) in alpha_col.iter().enumerate() {
                if i != r && a != 0.0 {
                    let ratio = a / alpha_rq;
                    let w = self.dse[i] - 2.0 * ratio * tau[i] + ratio * ratio * wr;
                    self.dse[i] = w.max(1e-4);
                }
            }
            self.dse[r] = (wr / (alpha_rq * alpha_rq)).max(1e-4);

            let leaving = if to_lower { Status::AtLower } else { Status::AtUpper };
            self.replace_basic(r, q, leaving, &alpha_col);
            self.maybe_refactor();
        }
    }

    /// Two-phase primal simplex from the current basis.
    pub fn primal_simplex(&mut self, max_iter: usize) -> LpOutcome {
        let start = self.iterations;
        self.degenerate_run = 0;
        loop {
            if self.iterations - start >= max_iter {
                return LpOutcome::IterationLimit;
            }
            let phase1 = !self.is_primal_feasible();
            // Phase costs and duals.
            let mut cb: Vec<f64> = vec![0.0; self.data.m];
            for (p, &j) in self.basis.iter().enumerate() {
                cb[p] = if phase1 {
                    let inf = self.infeasibility(j);
                    if inf < 0.0 {
                        -1.0
                    } else if inf > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.cost[j]
                };
            }
            self.lu.btran(&mut cb);
            let y = cb;
            let n = self.data.n;
            let total = n + self.data.m;
            let bland = self.degenerate_run > BLAND_AFTER;

            let mut q = NONE;
            let mut best = 0.0;
            let mut q_dir = 0.0;
            for j in 0..total {
                if self.status[j] == Status::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let cj = if phase1 { 0.0 } else { self.cost[j] };
                let dj = if j < n {
                    cj - self.data.cols[j].iter().map(|&(i, a)| y[i] * a).sum::<f64>()
                } else {
                    cj + y[j - n]
                };
                if !phase1 {
                    self.d[j] = dj;
                }
                let dir = match self.status[j] {
                    Status::AtLower if dj < -DUAL_TOL => 1.0,
                    Status::AtUpper if dj > DUAL_TOL => -1.0,
                    Status::Free if dj.abs() > DUAL_TOL => -dj.signum(),
                    _ => continue,
                };
                if bland {
                    q = j;
                    q_dir = dir;
                    break;
                }
                if dj.abs() > best {
                    best = dj.abs();
                    q = j;
                    q_dir = dir;
                }
            }
            if q == NONE {
                if phase1 {
                    return LpOutcome::Infeasible;
                }
                for &j in &self.basis {
                    self.d[j] = 0.0;
                }
                return LpOutcome::Optimal;
            }

            let alpha_col = self.ftran_column(q);
            // Basic i moves by -alpha_i * dir * t.
            let mut t_max = self.hi[q] - self.lo[q];
            let mut r = NONE;
            let mut leave_to_lower = false;
            for (i, &a) in alpha_col.iter().enumerate() {
                if a.abs() < PIVOT_TOL {
                    continue;
                }
                let j = self.basis[i];
                let rate = -a * q_dir;
                let xi = self.x[j];
                let inf = if phase1 { self.infeasibility(j) } else { 0.0 };
                let (limit, lower) = if rate > 0.0 {
                    if inf < 0.0 {
                        ((self.lo[j] - xi) / rate, true)
                    } else if inf > 0.0 {
                        continue;
                    } else if self.hi[j].is_finite() {
                        (((self.hi[j] - xi) / rate).max(0.0), false)
                    } else {
                        continue;
                    }
                } else if inf > 0.0 {
                    ((xi - self.hi[j]) / -rate, false)
                } else if inf < 0.0 {
                    continue;
                } else if self.lo[j].is_finite() {
                    (((xi - self.lo[j]) / -rate).max(0.0), true)
                } else {
                    continue;
                };
                let better = if bland {
                    limit < t_max - 1e-12 || (limit <= t_max + 1e-12 && r != NONE && j < self.basis[r])
                } else {
                    limit < t_max
                        || (limit <= t_max + 1e-12 && r != NONE && a.abs() > alpha_col[r].abs())
                };
                if better {
                    t_max = limit;
                    r = i;
                    leave_to_lower = lower;
                }
            }
            if t_max == f64::INFINITY {
                return LpOutcome::Unbounded;
            }
            if t_max < 1e-12 {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }
            let step = t_max * q_dir;
            self.x[q] += step;
            for (i, &a) in alpha_col.iter().enumerate() {
                if a != 0.0 {
                    self.x[self.basis[i]] -= a * step;
                }
            }
            if r == NONE {
                // Bound flip of the entering variable.
                self.status[q] = if q_dir > 0.0 { Status::AtUpper } else { Status::AtLower };
                self.x[q] = self.nonbasic_value(q);
                self.iterations += 1;
                continue;
            }
            let p = self.basis[r];
            self.x[p] = if leave_to_lower { self.lo[p] } else { self.hi[p] };
            let st = if leave_to_lower { Status::AtLower } else { Status::AtUpper };
            self.replace_basic(r, q, st, &alpha_col);
            self.dse.iter_mut().for_each(|w| *w = 1.0);
            self.maybe_refactor();
        }
    }

    /// Recomputes values from scratch and reports the largest row residual
    /// and bound violation.
    pub fn residuals(&mut self) -> (f64, f64) {
        self.refactor();
        self.compute_primal();
        self.compute_duals();
        let n = self.data.n;
        let mut row_res: f64 = 0.0;
        for i in 0..self.data.m {
            let act: f64 = self.data.rows[i].iter().map(|&(j, a)| a * self.x[j]).sum();
            row_res = row_res.max((act - self.x[n + i]).abs());
        }
        let mut bound: f64 = 0.0;
        for j in 0..self.x.len() {
            bound = bound.max(self.lo[j] - self.x[j]).max(self.x[j] - self.hi[j]);
        }
        (row_res, bound)
    }

    /// Lagrangian lower bound `Σ_j min_{l≤x≤u} d_j(y)·x_j` for multipliers `y`.
    pub fn lagrangian_bound(&self, y: &[f64]) -> f64 {
        let n = self.data.n;
        let mut total = 0.0;
        for j in 0..n + self.data.m {
            let dj = if j < n {
                self.cost[j] - self.data.cols[j].iter().map(|&(i, a)| y[i] * a).sum::<f64>()
            } else {
                self.cost[j] + y[j - n]
            };
            let term = if dj > 0.0 {
                dj * self.lo[j]
            } else if dj < 0.0 {
                dj * self.hi[j]
            } else {
                0.0
            };
            if term.is_nan() {
                continue;
            }
            total += term;
        }
        total
    }

    pub fn pivot_row_for_tests(&self, r: usize) -> Vec<f64> {
        self.pivot_row(r)
    }
}
