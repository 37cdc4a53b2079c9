//! CPLEX LP text format: writer and a reader for the subset it emits.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::LpFormatError;
use crate::model::{MilpModel, Sense, VarId, VarKind};

const TERMS_PER_LINE: usize = 8;

/// Shortest decimal that round-trips the value (at most 17 significant digits).
fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v == 0.0 {
        "0".into()
    } else if (1e-4..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn sanitize(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.[]{}!\"#$%&()/,;?@'`|~".contains(c) { c } else { '_' })
        .collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit() || c == '.') || out.eq_ignore_ascii_case("e") {
        out.insert(0, '_');
    }
    out
}

fn write_terms(out: &mut String, terms: &[(VarId, f64)], names: &[String]) {
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for (k, &(v, c)) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c < 0.0 { '-' } else { '+' };
        if k == 0 && sign == '+' {
            let _ = write!(out, " {} {}", num(c), names[v.0]);
        } else {
            let _ = write!(out, " {} {} {}", sign, num(c.abs()), names[v.0]);
        }
    }
}

/// Renders `model` as LP text. Variable and row names are sanitised.
pub fn write_lp(model: &MilpModel) -> String {
    let names: Vec<String> = model.vars().iter().map(|v| sanitize(&v.name)).collect();
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    write_terms(&mut out, model.objective(), &names);
    let off = model.objective_offset();
    if off != 0.0 {
        let _ = write!(out, " {} {}", if off < 0.0 { '-' } else { '+' }, num(off.abs()));
    }
    out.push_str("\nSubject To\n");
    for (i, c) in model.constraints().iter().enumerate() {
        let name = if c.name.is_empty() { format!("r{i}") } else { sanitize(&c.name) };
        let _ = write!(out, " {name}:");
        write_terms(&mut out, &c.terms, &names);
        let _ = writeln!(out, " {} {}", c.sense.symbol(), num(c.rhs));
    }
    out.push_str("Bounds\n");
    for (v, name) in model.vars().iter().zip(&names) {
        if v.kind == VarKind::Binary && v.lo == 0.0 && v.hi == 1.0 {
            continue;
        }
        if v.lo == f64::NEG_INFINITY && v.hi == f64::INFINITY {
            let _ = writeln!(out, " {name} free");
        } else if v.lo == v.hi {
            let _ = writeln!(out, " {name} = {}", num(v.lo));
        } else {
            let _ = writeln!(out, " {} <= {name} <= {}", num(v.lo), num(v.hi));
        }
    }
    let bins: Vec<&String> = model
        .vars()
        .iter()
        .zip(&names)
        .filter(|(v, _)| v.kind == VarKind::Binary)
        .map(|(_, n)| n)
        .collect();
    if !bins.is_empty() {
        out.push_str("Binary\n");
        for chunk in bins.chunks(TERMS_PER_LINE) {
            out.push(' ');
            out.push_str(&chunk.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" "));
            out.push('\n');
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binary,
}

struct Reader {
    model: MilpModel,
    index: HashMap<String, VarId>,
}

impl Reader {
    fn var(&mut self, name: &str) -> VarId {
        if let Some(&v) = self.index.get(name) {
            return v;
        }
        let v = self.model.add_continuous(name, 0.0, f64::INFINITY);
        self.index.insert(name.to_string(), v);
        v
    }
}

fn parse_num(tok: &str) -> Option<f64> {
    match tok.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        _ => tok.parse().ok(),
    }
}

fn tokenize(s: &str) -> Vec<String> {
    let mut toks = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let flush = |cur: &mut String, toks: &mut Vec<String>| {
            if !cur.is_empty() {
                toks.push(std::mem::take(cur));
            }
        };
        if c.is_whitespace() {
            flush(&mut cur, &mut toks);
        } else if c == '<' || c == '>' || c == '=' {
            flush(&mut cur, &mut toks);
            let mut op = c.to_string();
            if i + 1 < chars.len() && chars[i + 1] == '=' {
                op.push('=');
                i += 1;
            }
            toks.push(op);
        } else if (c == '+' || c == '-') && !is_exponent_prefix(&cur) {
            flush(&mut cur, &mut toks);
            toks.push(c.to_string());
        } else if c == ':' {
            cur.push(c);
            flush(&mut cur, &mut toks);
        } else {
            cur.push(c);
        }
        i += 1;
    }
    if !cur.is_empty() {
        toks.push(cur);
    }
    toks
}

/// True for a partial number such as `1.5e` awaiting its exponent sign.
fn is_exponent_prefix(cur: &str) -> bool {
    cur.starts_with(|c: char| c.is_ascii_digit() || c == '.') && (cur.ends_with('e') || cur.ends_with('E'))
}

/// Parses `coef name` sequences. Returns terms and the constant part.
fn parse_expr(rd: &mut Reader, toks: &[String], line: usize) -> Result<(Vec<(VarId, f64)>, f64), LpFormatError> {
    let mut terms = Vec::new();
    let mut constant = 0.0;
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for t in toks {
        match t.as_str() {
            "+" | "-" => {
                if let Some(c) = coef.take() {
                    constant += sign * c;
                    sign = 1.0;
                }
                if t == "-" {
                    sign = -sign;
                }
            }
            _ => {
                if let Some(v) = parse_num(t) {
                    if coef.is_some() {
                        return Err(LpFormatError::Syntax {
                            line,
                            message: "two consecutive numbers".into(),
                        });
                    }
                    coef = Some(v);
                } else {
                    terms.push((rd.var(t), sign * coef.take().unwrap_or(1.0)));
                    sign = 1.0;
                }
            }
        }
    }
    if let Some(c) = coef {
        constant += sign * c;
    }
    Ok((terms, constant))
}

/// Reads the LP subset produced by [`write_lp`].
pub fn read_lp(text: &str) -> Result<MilpModel, LpFormatError> {
    let mut rd = Reader {
        model: MilpModel::new(),
        index: HashMap::new(),
    };
    let mut section = Section::None;
    let mut seen_objective = false;
    let mut seen_end = false;
    let mut pending: Vec<String> = Vec::new();
    let mut pending_line = 0;
    let mut objective: Vec<(VarId, f64)> = Vec::new();
    let mut offset = 0.0;
    let mut bounds: Vec<(VarId, Option<f64>, Option<f64>)> = Vec::new();
    let mut binaries: Vec<VarId> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        let header = match lower.as_str() {
            "minimize" | "minimise" | "min" => Some(Section::Objective),
            "subject to" | "st" | "s.t." | "such that" => Some(Section::Constraints),
            "bounds" => Some(Section::Bounds),
            "binary" | "binaries" | "bin" => Some(Section::Binary),
            "end" => {
                seen_end = true;
                Some(Section::None)
            }
            _ => None,
        };
        if let Some(h) = header {
            if !pending.is_empty() {
                return Err(LpFormatError::Syntax {
                    line: pending_line,
                    message: "unterminated row".into(),
                });
            }
            if h == Section::Objective {
                seen_objective = true;
            }
            section = h;
            continue;
        }
        let toks = tokenize(line);
        match section {
            Section::None => {
                return Err(LpFormatError::Syntax {
                    line: line_no,
                    message: format!("content outside any section: `{line}`"),
                })
            }
            Section::Objective => {
                let body: &[String] = if toks.first().is_some_and(|t| t.ends_with(':')) { &toks[1..] } else { &toks };
                let (t, c) = parse_expr(&mut rd, body, line_no)?;
                objective.extend(t);
                offset += c;
            }
            Section::Constraints => {
                if pending.is_empty() {
                    pending_line = line_no;
                }
                pending.extend(toks);
                let Some(op_pos) = pending.iter().position(|t| matches!(t.as_str(), "<=" | ">=" | "=" | "<" | ">" | "=<" | "=>")) else {
                    continue;
                };
                // The row ends once a right-hand side follows the comparison.
                let rhs_toks = &pending[op_pos + 1..];
                if rhs_toks.is_empty() || rhs_toks == ["-"] || rhs_toks == ["+"] {
                    continue;
                }
                let (name, body_start) = if pending[0].ends_with(':') {
                    (pending[0].trim_end_matches(':').to_string(), 1)
                } else {
                    (format!("r{}", rd.model.num_constraints()), 0)
                };
                let body = pending[body_start..op_pos].to_vec();
                let (terms, constant) = parse_expr(&mut rd, &body, pending_line)?;
                let rhs_str: String = rhs_toks.concat();
                let rhs = parse_num(&rhs_str).ok_or_else(|| LpFormatError::Syntax {
                    line: line_no,
                    message: format!("bad right-hand side `{rhs_str}`"),
                })?;
                let sense = match pending[op_pos].as_str() {
                    "<=" | "<" | "=<" => Sense::Le,
                    ">=" | ">" | "=>" => Sense::Ge,
                    _ => Sense::Eq,
                };
                rd.model.add_constraint(name, terms, sense, rhs - constant);
                pending.clear();
            }
            Section::Bounds => {
                let joined = glue_signs(&toks);
                let err = || LpFormatError::Syntax {
                    line: line_no,
                    message: format!("bad bound `{line}`"),
                };
                match joined.as_slice() {
                    [name, free] if free.eq_ignore_ascii_case("free") => {
                        let v = rd.var(name);
                        bounds.push((v, Some(f64::NEG_INFINITY), Some(f64::INFINITY)));
                    }
                    [lo, l1, name, l2, hi] if l1 == "<=" && l2 == "<=" => {
                        let v = rd.var(name);
                        bounds.push((v, Some(parse_num(lo).ok_or_else(err)?), Some(parse_num(hi).ok_or_else(err)?)));
                    }
                    [name, op, val] => {
                        let v = rd.var(name);
                        let x = parse_num(val).ok_or_else(err)?;
                        match op.as_str() {
                            "<=" => bounds.push((v, None, Some(x))),
                            ">=" => bounds.push((v, Some(x), None)),
                            "=" => bounds.push((v, Some(x), Some(x))),
                            _ => return Err(err()),
                        }
                    }
                    _ => return Err(err()),
                }
            }
            Section::Binary => {
                for t in toks {
                    let v = rd.var(&t);
                    binaries.push(v);
                }
            }
        }
    }
    if !seen_objective {
        return Err(LpFormatError::MissingSection("Minimize"));
    }
    if !seen_end {
        return Err(LpFormatError::MissingSection("End"));
    }
    if !pending.is_empty() {
        return Err(LpFormatError::Syntax {
            line: pending_line,
            message: "unterminated row".into(),
        });
    }
    let mut model = rd.model;
    for v in binaries {
        model.set_kind(v, VarKind::Binary);
    }
    for (v, lo, hi) in bounds {
        let cur = model.var(v).clone();
        model.set_bounds(v, lo.unwrap_or(cur.lo), hi.unwrap_or(cur.hi));
    }
    model.set_objective(objective, offset);
    Ok(model)
}

/// Joins a leading sign with the following number (`-`, `5` → `-5`).
fn glue_signs(toks: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if (toks[i] == "-" || toks[i] == "+") && i + 1 < toks.len() {
            out.push(format!("{}{}", toks[i], toks[i + 1]));
            i += 2;
        } else {
            out.push(toks[i].clone());
            i += 1;
        }
    }
    out
}
