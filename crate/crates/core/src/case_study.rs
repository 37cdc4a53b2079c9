//! Planar double-integrator mission with regions A, B and C over 20 s.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::formula::Formula;
use crate::parser::parse;
use crate::synthesis::{double_integrator, LinearSystem, SynthesisProblem, SynthesisResult};

pub const HORIZON: usize = 20;
pub const DELTA_T: f64 = 1.0;
pub const X0: [f64; 4] = [0.5, 0.0, 0.5, 0.0];

/// Axis-aligned box `[x_lo, x_hi] × [y_lo, y_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub name: &'static str,
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Region {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x.0 && x <= self.x.1 && y >= self.y.0 && y <= self.y.1
    }

    fn spec_text(&self) -> String {
        format!(
            "let {} = x >= {} && x <= {} && y >= {} && y <= {};\n",
            self.name, self.x.0, self.x.1, self.y.0, self.y.1
        )
    }
}

pub const REGION_A: Region = Region { name: "inA", x: (1.5, 2.0), y: (4.75, 5.25) };
pub const REGION_B: Region = Region { name: "inB", x: (4.0, 5.0), y: (1.0, 3.0) };
pub const REGION_C: Region = Region { name: "inC", x: (2.0, 4.0), y: (1.0, 5.0) };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Integral and derivative requirements in A and B.
    Full,
    /// Without the travel-distance integrals in B.
    NoInt,
    /// Without the acceleration limits in A and B.
    NoDer,
    /// Without either.
    None,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoInt, Variant::NoDer, Variant::None];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoInt => "no_int",
            Variant::NoDer => "no_der",
            Variant::None => "none",
        }
    }

    pub fn has_integrals(self) -> bool {
        matches!(self, Variant::Full | Variant::NoDer)
    }

    pub fn has_region_derivatives(self) -> bool {
        matches!(self, Variant::Full | Variant::NoInt)
    }

    /// Reference optimal cost for this scenario.
    pub fn reference_cost(self) -> f64 {
        match self {
            Variant::Full => 6.5363,
            Variant::NoDer => 4.8253,
            Variant::NoInt => 4.0749,
            Variant::None => 3.9930,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variant `{s}` (expected full, no_int, no_der or none)"))
    }
}

/// Mission specification in the formula language.
pub fn spec_text(variant: Variant) -> String {
    let mut text = String::new();
    for r in [REGION_A, REGION_B, REGION_C] {
        text.push_str(&r.spec_text());
    }
    text.push_str("F[0,17] G[0,3] inA\n");
    if variant.has_integrals() {
        text.push_str("&& F[0,14] (G[0,6] inB && I[0,6](abs(vx)) >= 2 && I[0,6](abs(vy)) >= 2)\n");
    } else {
        text.push_str("&& F[0,14] G[0,6] inB\n");
    }
    if variant.has_region_derivatives() {
        text.push_str(
            "&& G[1,20] ((inA || inB) => (D-(vx) <= 0.25 && D-(vx) >= -0.25 && D-(vy) <= 0.25 && D-(vy) >= -0.25))\n",
        );
    }
    text.push_str("&& G[0,19] (D+(vx) <= 0.5 && D+(vx) >= -0.5 && D+(vy) <= 0.5 && D+(vy) >= -0.5)\n");
    text.push_str("&& G[0,20] (inC => abs(vx) >= 1)\n");
    text
}

pub fn spec(variant: Variant) -> Formula {
    parse(&spec_text(variant)).expect("built-in mission specification parses")
}

/// Double integrator from `(0.5, 0, 0.5, 0)` over 20 steps of 1 s, inputs within `±10`.
pub fn problem(variant: Variant) -> SynthesisProblem {
    let mut sys = double_integrator(DELTA_T);
    sys.x0 = X0.to_vec();
    SynthesisProblem::new(sys, spec(variant), HORIZON)
}

/// `t, <states>, <inputs>`; the input columns are empty on the last row.
pub fn trajectory_csv(sys: &LinearSystem, r: &SynthesisResult) -> String {
    let mut out = format!("t,{},{}\n", sys.dims.join(","), sys.inputs.join(","));
    for (k, x) in r.states.iter().enumerate() {
        let _ = write!(out, "{}", k as f64 * sys.delta_t);
        for v in x {
            let _ = write!(out, ",{v}");
        }
        for j in 0..sys.num_inputs() {
            match r.inputs.get(k) {
                Some(u) => {
                    let _ = write!(out, ",{}", u[j]);
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

fn column(sys: &LinearSystem, r: &SynthesisResult, name: &str) -> Vec<f64> {
    let i = sys.dims.iter().position(|d| d == name).expect("double-integrator dimension");
    r.states.iter().map(|x| x[i]).collect()
}

/// `t, vx, vy, speed`.
pub fn velocity_csv(sys: &LinearSystem, r: &SynthesisResult) -> String {
    let (vx, vy) = (column(sys, r, "vx"), column(sys, r, "vy"));
    let mut out = String::from("t,vx,vy,speed\n");
    for k in 0..vx.len() {
        let _ = writeln!(out, "{},{},{},{}", k as f64 * sys.delta_t, vx[k], vy[k], vx[k].hypot(vy[k]));
    }
    out
}

/// Right-difference accelerations `(v_{k+1} - v_k) / δt` for `k < H`.
pub fn accelerations(sys: &LinearSystem, r: &SynthesisResult) -> Vec<(f64, f64)> {
    let (vx, vy) = (column(sys, r, "vx"), column(sys, r, "vy"));
    (0..vx.len().saturating_sub(1))
        .map(|k| ((vx[k + 1] - vx[k]) / sys.delta_t, (vy[k + 1] - vy[k]) / sys.delta_t))
        .collect()
}

/// `t, ax, ay` from right differences.
pub fn acceleration_csv(sys: &LinearSystem, r: &SynthesisResult) -> String {
    let mut out = String::from("t,ax,ay\n");
    for (k, (ax, ay)) in accelerations(sys, r).into_iter().enumerate() {
        let _ = writeln!(out, "{},{ax},{ay}", k as f64 * sys.delta_t);
    }
    out
}

/// Positions `(x, y)` of a double-integrator trajectory.
pub fn positions(sys: &LinearSystem, r: &SynthesisResult) -> Vec<(f64, f64)> {
    column(sys, r, "x").into_iter().zip(column(sys, r, "y")).collect()
}

/// One solved scenario for the summary table.
pub struct SummaryRow<'a> {
    pub variant: Variant,
    pub result: &'a SynthesisResult,
}

/// Deterministic summary: no timing columns.
pub fn summary_csv(rows: &[SummaryRow<'_>]) -> String {
    let mut out = String::from("variant,status,cost,reference_cost,robustness,nodes,binaries,constraints\n");
    for row in rows {
        let r = row.result;
        let cost = r.cost.map_or(String::new(), |c| format!("{c:.6}"));
        let rob = r.monitor.as_ref().map_or(String::new(), |m| format!("{:.6}", m.value));
        let _ = writeln!(
            out,
            "{},{:?},{cost},{},{rob},{},{},{}",
            row.variant,
            r.status,
            row.variant.reference_cost(),
            r.stats.nodes,
            r.num_binaries,
            r.num_constraints
        );
    }
    out
}

/// Human-readable table with solve times.
pub fn summary_text(rows: &[SummaryRow<'_>]) -> String {
    let mut out = format!(
        "{:<8} {:<10} {:>10} {:>10} {:>8} {:>10} {:>9} {:>10}\n",
        "variant", "status", "cost", "reference", "diff%", "robust", "nodes", "time[s]"
    );
    for row in rows {
        let r = row.result;
        let reference = row.variant.reference_cost();
        let (cost, diff) = match r.cost {
            Some(c) => (format!("{c:.4}"), format!("{:+.1}", 100.0 * (c - reference) / reference)),
            None => ("-".into(), "-".into()),
        };
        let rob = r.monitor.as_ref().map_or("-".into(), |m| format!("{:.4}", m.value));
        let _ = writeln!(
            out,
            "{:<8} {:<10} {:>10} {:>10.4} {:>8} {:>10} {:>9} {:>10.2}",
            row.variant.name(),
            format!("{:?}", r.status),
            cost,
            reference,
            diff,
            rob,
            r.stats.nodes,
            r.stats.wall_time.as_secs_f64()
        );
    }
    out
}
