//! Optimal trajectory synthesis for linear systems under a formula.

use stlid_milp::{solve_milp, MilpModel, Sense, SolveStats, SolveStatus, SolverOptions, VarId};
use thiserror::Error;

use crate::encoder::{EncodeError, EncodeOptions, EncodingContext, DEFAULT_BIG_M};
use crate::formula::{compile, horizon, CompiledFormula, Formula, ValidationError};
use crate::monitor::{Monitor, MonitorError, RobustnessReport};
use crate::signal::Signal;

pub const DEFAULT_INPUT_BOUND: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid formula: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ValidationError>),
    #[error("horizon {horizon} steps is shorter than the formula horizon of {needed} steps")]
    HorizonTooShort { needed: usize, horizon: usize },
    #[error("encoding failed: {0}")]
    Encode(#[from] EncodeError),
    #[error("monitor rejects the synthesized trajectory (robustness {robustness})")]
    MonitorMismatch { robustness: f64 },
    #[error("monitor failed on the synthesized trajectory: {0}")]
    Monitor(#[from] MonitorError),
    #[error("input split not exclusive at step {step}, input {input}: u+ = {pos}, u- = {neg}")]
    SplitNotExclusive { step: usize, input: usize, pos: f64, neg: f64 },
}

/// `x_{k+1} = A x_k + B u_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub x0: Vec<f64>,
    pub delta_t: f64,
    pub dims: Vec<String>,
    pub inputs: Vec<String>,
}

impl LinearSystem {
    pub fn new(
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        x0: Vec<f64>,
        delta_t: f64,
        dims: Vec<String>,
        inputs: Vec<String>,
    ) -> Result<Self, SynthesisError> {
        let sys = LinearSystem { a, b, x0, delta_t, dims, inputs };
        sys.check()?;
        Ok(sys)
    }

    fn check(&self) -> Result<(), SynthesisError> {
        let bad = |m: String| Err(SynthesisError::InvalidSystem(m));
        let n = self.dims.len();
        let m = self.inputs.len();
        if n == 0 {
            return bad("no state dimensions".into());
        }
        if !(self.delta_t.is_finite() && self.delta_t > 0.0) {
            return bad(format!("time step {} must be positive", self.delta_t));
        }
        if self.a.len() != n || self.a.iter().any(|r| r.len() != n) {
            return bad(format!("A must be {n}x{n}"));
        }
        if self.b.len() != n || self.b.iter().any(|r| r.len() != m) {
            return bad(format!("B must be {n}x{m}"));
        }
        if self.x0.len() != n {
            return bad(format!("x0 must have {n} entries"));
        }
        let all = self.a.iter().flatten().chain(self.b.iter().flatten()).chain(&self.x0);
        if all.clone().any(|v| !v.is_finite()) {
            return bad("non-finite entry".into());
        }
        for names in [&self.dims, &self.inputs] {
            for (i, d) in names.iter().enumerate() {
                if d.is_empty() || names[..i].contains(d) || (names == &self.inputs && self.dims.contains(d)) {
                    return bad(format!("name `{d}` is empty or repeated"));
                }
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.dims.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        (0..self.num_states())
            .map(|i| {
                let ax: f64 = self.a[i].iter().zip(x).map(|(a, x)| a * x).sum();
                let bu: f64 = self.b[i].iter().zip(u).map(|(b, u)| b * u).sum();
                ax + bu
            })
            .collect()
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = x0;
        self
    }
}

/// Planar double integrator with states `(x, vx, y, vy)` and inputs `(ux, uy)`, starting at rest at the origin.
pub fn double_integrator(delta_t: f64) -> LinearSystem {
    let dt = delta_t;
    let h = 0.5 * dt * dt;
    LinearSystem {
        a: vec![
            vec![1.0, dt, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, dt],
            vec![0.0, 0.0, 0.0, 1.0],
        ],
        b: vec![vec![h, 0.0], vec![dt, 0.0], vec![0.0, h], vec![0.0, dt]],
        x0: vec![0.0; 4],
        delta_t,
        dims: ["x", "vx", "y", "vy"].map(String::from).to_vec(),
        inputs: ["ux", "uy"].map(String::from).to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisProblem {
    pub system: LinearSystem,
    pub spec: Formula,
    /// Number of steps `H`; states run over `0..=H`, inputs over `0..H`.
    pub horizon: usize,
    pub input_bounds: Vec<(f64, f64)>,
    pub big_m: f64,
    /// See [`EncodeOptions::one_sided`].
    pub one_sided: bool,
}

impl SynthesisProblem {
    /// Inputs bounded by `±10`, big-M `1e4`, one-sided encoding.
    pub fn new(system: LinearSystem, spec: Formula, horizon: usize) -> Self {
        let m = system.num_inputs();
        SynthesisProblem {
            system,
            spec,
            horizon,
            input_bounds: vec![(-DEFAULT_INPUT_BOUND, DEFAULT_INPUT_BOUND); m],
            big_m: DEFAULT_BIG_M,
            one_sided: true,
        }
    }
}

/// MILP for a synthesis problem plus handles to its trajectory variables.
#[derive(Debug, Clone)]
pub struct SynthesisModel {
    pub model: MilpModel,
    pub formula: CompiledFormula,
    /// `states[k][i]`
    pub states: Vec<Vec<VarId>>,
    /// `inputs[k][j]`
    pub inputs: Vec<Vec<VarId>>,
    pub inputs_pos: Vec<Vec<VarId>>,
    pub inputs_neg: Vec<Vec<VarId>>,
    /// Satisfaction binary of the specification at step 0, fixed to 1.
    pub root: VarId,
}

/// Interval bounds on each state reachable under the input bounds.
pub fn reachable_bounds(sys: &LinearSystem, horizon: usize, input_bounds: &[(f64, f64)]) -> Vec<Vec<(f64, f64)>> {
    let mut out = vec![sys.x0.iter().map(|&v| (v, v)).collect::<Vec<_>>()];
    for _ in 0..horizon {
        let prev = out.last().unwrap();
        let next = (0..sys.num_states())
            .map(|i| {
                let (mut lo, mut hi) = (0.0, 0.0);
                let pairs = sys.a[i].iter().zip(prev.iter()).chain(sys.b[i].iter().zip(input_bounds.iter()));
                for (&c, &(l, h)) in pairs {
                    if c == 0.0 {
                        continue;
                    }
                    let (x, y) = if c > 0.0 { (c * l, c * h) } else { (c * h, c * l) };
                    lo += x;
                    hi += y;
                }
                (lo, hi)
            })
            .collect();
        out.push(next);
    }
    out
}

/// Builds the mixed-integer program: pinned initial state, dynamics, `u = u⁺ − u⁻`,
/// objective `Σ (u⁺ + u⁻)`, and the encoded specification required at step 0.
pub fn build(p: &SynthesisProblem) -> Result<SynthesisModel, SynthesisError> {
    let sys = &p.system;
    sys.check()?;
    let m = sys.num_inputs();
    if p.input_bounds.len() != m || p.input_bounds.iter().any(|&(l, h)| !(l <= h) || l.is_nan()) {
        return Err(SynthesisError::InvalidSystem(format!("need {m} input bounds with lo <= hi")));
    }
    let formula = compile(&p.spec, sys.delta_t, &sys.dims).map_err(SynthesisError::Invalid)?;
    let needed = (horizon(&p.spec, sys.delta_t) / sys.delta_t - 1e-9).ceil().max(0.0) as usize;
    if p.horizon < needed {
        return Err(SynthesisError::HorizonTooShort { needed, horizon: p.horizon });
    }

    let bounds = reachable_bounds(sys, p.horizon, &p.input_bounds);
    let mut model = MilpModel::new();
    let states: Vec<Vec<VarId>> = (0..=p.horizon)
        .map(|k| {
            sys.dims
                .iter()
                .enumerate()
                .map(|(i, d)| model.add_continuous(format!("x_{d}_{k}"), bounds[k][i].0, bounds[k][i].1))
                .collect()
        })
        .collect();
    let mut inputs = Vec::with_capacity(p.horizon);
    let mut inputs_pos = Vec::with_capacity(p.horizon);
    let mut inputs_neg = Vec::with_capacity(p.horizon);
    for k in 0..p.horizon {
        let (mut u, mut up, mut um) = (vec![], vec![], vec![]);
        for (j, &(lo, hi)) in p.input_bounds.iter().enumerate() {
            u.push(model.add_continuous(format!("u_{j}_{k}"), lo, hi));
            up.push(model.add_continuous(format!("up_{j}_{k}"), 0.0, hi.max(0.0)));
            um.push(model.add_continuous(format!("um_{j}_{k}"), 0.0, (-lo).max(0.0)));
        }
        inputs.push(u);
        inputs_pos.push(up);
        inputs_neg.push(um);
    }

    for (i, d) in sys.dims.iter().enumerate() {
        model.add_constraint(format!("init_{d}"), vec![(states[0][i], 1.0)], Sense::Eq, sys.x0[i]);
    }
    for k in 0..p.horizon {
        for (i, d) in sys.dims.iter().enumerate() {
            let mut terms = vec![(states[k + 1][i], 1.0)];
            terms.extend((0..sys.num_states()).filter(|&j| sys.a[i][j] != 0.0).map(|j| (states[k][j], -sys.a[i][j])));
            terms.extend((0..m).filter(|&j| sys.b[i][j] != 0.0).map(|j| (inputs[k][j], -sys.b[i][j])));
            model.add_constraint(format!("dyn_{d}_{k}"), terms, Sense::Eq, 0.0);
        }
        for j in 0..m {
            model.add_constraint(
                format!("split_{j}_{k}"),
                vec![(inputs[k][j], 1.0), (inputs_pos[k][j], -1.0), (inputs_neg[k][j], 1.0)],
                Sense::Eq,
                0.0,
            );
        }
    }
    model.set_objective(
        inputs_pos.iter().flatten().chain(inputs_neg.iter().flatten()).map(|&v| (v, 1.0)),
        0.0,
    );

    // Signal table in formula dimension order.
    let signal: Vec<Vec<VarId>> = formula
        .dims
        .iter()
        .map(|d| {
            let i = sys.dims.iter().position(|s| s == d).expect("compiled against system dims");
            states.iter().map(|row| row[i]).collect()
        })
        .collect();
    let options = EncodeOptions { big_m: p.big_m, one_sided: p.one_sided };
    let root = {
        let mut ctx = EncodingContext::new(&mut model, &formula, signal, options)?;
        ctx.encode(0)?
    };
    model.add_constraint("spec", vec![(root, 1.0)], Sense::Eq, 1.0);
    Ok(SynthesisModel { model, formula, states, inputs, inputs_pos, inputs_neg, root })
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub status: SolveStatus,
    /// `states[k][i]`, empty without a solution.
    pub states: Vec<Vec<f64>>,
    /// `inputs[k][j]`, empty without a solution.
    pub inputs: Vec<Vec<f64>>,
    /// `Σ_k |u_k|₁`.
    pub cost: Option<f64>,
    pub best_bound: f64,
    pub monitor: Option<RobustnessReport>,
    pub stats: SolveStats,
    pub num_vars: usize,
    pub num_binaries: usize,
    pub num_constraints: usize,
}

impl SynthesisResult {
    pub fn has_solution(&self) -> bool {
        !self.states.is_empty()
    }

    /// Largest `|x_{k+1} − A x_k − B u_k|` over the trajectory.
    pub fn dynamics_residual(&self, sys: &LinearSystem) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.inputs.len() {
            let pred = sys.step(&self.states[k], &self.inputs[k]);
            for (p, x) in pred.iter().zip(&self.states[k + 1]) {
                worst = worst.max((p - x).abs());
            }
        }
        worst
    }

    pub fn trajectory(&self, sys: &LinearSystem) -> Option<Signal> {
        Signal::new(sys.delta_t, sys.dims.clone(), self.states.clone()).ok()
    }
}

/// Tolerance for the monitor cross-check on returned trajectories.
pub const MONITOR_TOL: f64 = 1e-6;

/// Builds and solves the problem, then checks the trajectory with the monitor.
pub fn synthesize(p: &SynthesisProblem, options: &SolverOptions) -> Result<SynthesisResult, SynthesisError> {
    let sm = build(p)?;
    solve_built(p, &sm, options)
}

/// Solves an already built model; see [`synthesize`].
pub fn solve_built(
    p: &SynthesisProblem,
    sm: &SynthesisModel,
    options: &SolverOptions,
) -> Result<SynthesisResult, SynthesisError> {
    let res = solve_milp(&sm.model, options);
    let mut out = SynthesisResult {
        status: res.status,
        states: vec![],
        inputs: vec![],
        cost: None,
        best_bound: res.best_bound,
        monitor: None,
        stats: res.stats.clone(),
        num_vars: sm.model.num_vars(),
        num_binaries: sm.model.num_binaries(),
        num_constraints: sm.model.num_constraints(),
    };
    let Some(x) = res.assignment.as_ref() else {
        return Ok(out);
    };
    out.states = sm.states.iter().map(|row| row.iter().map(|v| x[v.0]).collect()).collect();
    out.inputs = sm.inputs.iter().map(|row| row.iter().map(|v| x[v.0]).collect()).collect();
    out.cost = Some(out.inputs.iter().flatten().map(|u| u.abs()).sum());
    if res.status == SolveStatus::Optimal {
        for (k, (up, um)) in sm.inputs_pos.iter().zip(&sm.inputs_neg).enumerate() {
            for (j, (a, b)) in up.iter().zip(um).enumerate() {
                let (pos, neg) = (x[a.0], x[b.0]);
                if pos * neg > 1e-7 {
                    return Err(SynthesisError::SplitNotExclusive { step: k, input: j, pos, neg });
                }
            }
        }
    }
    let signal = out.trajectory(&p.system).expect("trajectory shape matches system");
    let report = Monitor::from_compiled(&signal, sm.formula.clone()).robustness(0, false)?;
    if res.status == SolveStatus::Optimal && report.value < -MONITOR_TOL {
        return Err(SynthesisError::MonitorMismatch { robustness: report.value });
    }
    out.monitor = Some(report);
    Ok(out)
}
