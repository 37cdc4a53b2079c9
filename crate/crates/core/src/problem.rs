//! Flat `key = value` problem files.
//!
//! ```text
//! # planar double integrator
//! delta_t = 1
//! dims = x, vx, y, vy
//! inputs = ux, uy
//! A = 1 1 0 0; 0 1 0 0; 0 0 1 1; 0 0 0 1
//! B = 0.5 0; 1 0; 0 0.5; 0 1
//! x0 = 0.5 0 0.5 0
//! horizon = 20
//! input_lo = -10 -10
//! input_hi = 10 10
//! big_m = 10000
//! spec = F[0,17] G[0,3] x >= 1.5
//!     && G[0,20] D+(vx) <= 0.5
//! ```
//!
//! Indented lines continue the previous value. `variant = <name>` may replace
//! `spec` to use the built-in mission specification.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::case_study::{self, Variant};
use crate::encoder::DEFAULT_BIG_M;
use crate::parser::{parse, print, ParseError};
use crate::synthesis::{LinearSystem, SynthesisError, SynthesisProblem, DEFAULT_INPUT_BOUND};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing key `{0}`")]
    Missing(&'static str),
    #[error("key `{key}`: {message}")]
    BadValue { key: String, message: String },
    #[error("spec: {}", .error.message)]
    Spec { error: ParseError, text: String },
    #[error(transparent)]
    System(#[from] SynthesisError),
}

const KEYS: [&str; 12] =
    ["delta_t", "dims", "inputs", "A", "B", "x0", "horizon", "input_lo", "input_hi", "big_m", "spec", "variant"];

/// Parses a problem file; the spec text is returned alongside.
pub fn parse_problem(text: &str) -> Result<(SynthesisProblem, String), ProblemError> {
    let mut entries: BTreeMap<&str, (usize, String)> = BTreeMap::new();
    let mut current: Option<&str> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if raw.starts_with([' ', '\t']) {
            let Some(key) = current else {
                return Err(ProblemError::Syntax { line, message: "continuation without a key".into() });
            };
            let value = &mut entries.get_mut(key).expect("current key present").1;
            value.push('\n');
            value.push_str(trimmed);
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(ProblemError::Syntax { line, message: "expected `key = value`".into() });
        };
        let key = key.trim();
        let Some(&key) = KEYS.iter().find(|k| **k == key) else {
            return Err(ProblemError::Syntax { line, message: format!("unknown key `{key}`") });
        };
        if entries.insert(key, (line, value.trim().to_string())).is_some() {
            return Err(ProblemError::Syntax { line, message: format!("duplicate key `{key}`") });
        }
        current = Some(key);
    }

    let get = |k: &'static str| entries.get(k).map(|(_, v)| v.as_str()).ok_or(ProblemError::Missing(k));
    let bad = |k: &str, m: String| ProblemError::BadValue { key: k.to_string(), message: m };
    let number = |k: &'static str, s: &str| s.trim().parse::<f64>().map_err(|_| bad(k, format!("bad number `{s}`")));
    let vector = |k: &'static str, s: &str| -> Result<Vec<f64>, ProblemError> {
        s.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).map(|t| number(k, t)).collect()
    };
    let matrix = |k: &'static str| -> Result<Vec<Vec<f64>>, ProblemError> {
        get(k)?.split(';').map(|row| vector(k, row)).collect()
    };
    let names = |k: &'static str| -> Result<Vec<String>, ProblemError> {
        Ok(get(k)?.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
    };

    let delta_t = number("delta_t", get("delta_t")?)?;
    let dims = names("dims")?;
    let inputs = names("inputs")?;
    let system = LinearSystem::new(matrix("A")?, matrix("B")?, vector("x0", get("x0")?)?, delta_t, dims, inputs)?;
    let horizon = get("horizon")?.parse::<usize>().map_err(|_| bad("horizon", "expected a step count".into()))?;

    let spec_text = match (entries.get("spec"), entries.get("variant")) {
        (Some(_), Some(_)) => return Err(bad("variant", "give either `spec` or `variant`, not both".into())),
        (Some((_, s)), None) => s.clone(),
        (None, Some((_, v))) => case_study::spec_text(v.parse::<Variant>().map_err(|m| bad("variant", m))?),
        (None, None) => return Err(ProblemError::Missing("spec")),
    };
    let spec = parse(&spec_text).map_err(|error| ProblemError::Spec { error, text: spec_text.clone() })?;

    let m = system.num_inputs();
    let side = |k: &'static str, default: f64| -> Result<Vec<f64>, ProblemError> {
        match entries.get(k) {
            None => Ok(vec![default; m]),
            Some((_, s)) => {
                let v = vector(k, s)?;
                match v.len() {
                    1 => Ok(vec![v[0]; m]),
                    n if n == m => Ok(v),
                    n => Err(bad(k, format!("expected 1 or {m} values, got {n}"))),
                }
            }
        }
    };
    let lo = side("input_lo", -DEFAULT_INPUT_BOUND)?;
    let hi = side("input_hi", DEFAULT_INPUT_BOUND)?;
    let big_m = match entries.get("big_m") {
        Some((_, s)) => number("big_m", s)?,
        None => DEFAULT_BIG_M,
    };
    if !(big_m.is_finite() && big_m > 0.0) {
        return Err(bad("big_m", "must be positive".into()));
    }
    let mut problem = SynthesisProblem::new(system, spec, horizon);
    problem.input_bounds = lo.into_iter().zip(hi).collect();
    problem.big_m = big_m;
    Ok((problem, spec_text))
}

/// Renders a problem in the file format; `parse_problem` reads it back unchanged.
pub fn write_problem(p: &SynthesisProblem) -> String {
    let s = &p.system;
    let row = |r: &[f64]| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
    let mat = |m: &[Vec<f64>]| m.iter().map(|r| row(r)).collect::<Vec<_>>().join("; ");
    let mut out = String::new();
    let _ = writeln!(out, "delta_t = {}", s.delta_t);
    let _ = writeln!(out, "dims = {}", s.dims.join(", "));
    let _ = writeln!(out, "inputs = {}", s.inputs.join(", "));
    let _ = writeln!(out, "A = {}", mat(&s.a));
    let _ = writeln!(out, "B = {}", mat(&s.b));
    let _ = writeln!(out, "x0 = {}", row(&s.x0));
    let _ = writeln!(out, "horizon = {}", p.horizon);
    let _ = writeln!(out, "input_lo = {}", row(&p.input_bounds.iter().map(|b| b.0).collect::<Vec<_>>()));
    let _ = writeln!(out, "input_hi = {}", row(&p.input_bounds.iter().map(|b| b.1).collect::<Vec<_>>()));
    let _ = writeln!(out, "big_m = {}", p.big_m);
    let _ = writeln!(out, "spec = {}", print(&p.spec));
    out
}
