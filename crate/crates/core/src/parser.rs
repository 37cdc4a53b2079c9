//! Text syntax for formulas.
//!
//! ```text
//! file    := ('let' IDENT '=' formula ';')* formula
//! formula := or ('=>' formula)?
//! or      := and ('||' and)*
//! and     := unary ('&&' unary)*
//! unary   := '!' unary | 'G[' num ',' num ']' unary | 'F[' num ',' num ']' unary
//!          | '(' formula ')' | IDENT (let-bound) | atom
//! atom    := expr cmp num
//!          | 'I[' num ',' num ']' '(' expr ')' cmp num
//!          | ('D+' | 'D-') '(' expr ')' cmp num
//! expr    := ['-'] term (('+' | '-') term)*
//! term    := num ['*' (IDENT | 'abs(' IDENT ')')] | IDENT | 'abs(' IDENT ')'
//! cmp     := '>=' | '<='
//! ```

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::formula::{
    Comparison, DerivativePredicate, DerivativeSide, Formula, FormulaKind, IntegralPredicate,
    Interval, LinearExpr, Predicate, SourceSpan, Term,
};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at {span}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    /// Renders the error with the offending line and a caret marker.
    pub fn render(&self, text: &str) -> String {
        let start = self.span.start.min(text.len());
        let line_start = text[..start].rfind('\n').map_or(0, |i| i + 1);
        let line_end = text[start..].find('\n').map_or(text.len(), |i| start + i);
        let line_no = text[..start].matches('\n').count() + 1;
        let col = text[line_start..start].chars().count();
        let width = text[start..self.span.end.min(line_end).max(start)].chars().count().max(1);
        let mut out = format!("error: {}\n --> line {line_no}, column {}\n", self.message, col + 1);
        let _ = writeln!(out, "  | {}", &text[line_start..line_end]);
        let _ = write!(out, "  | {}{}", " ".repeat(col), "^".repeat(width));
        if !self.expected.is_empty() {
            let _ = write!(out, "\n  = expected one of: {}", self.expected.join(", "));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    /// `G[`, `F[`, `I[`
    Open(char),
    /// `D+(` or `D-(`
    Deriv(DerivativeSide),
    AbsOpen,
    Let,
    LParen,
    RParen,
    RBracket,
    Comma,
    Semi,
    Assign,
    Not,
    And,
    Or,
    Implies,
    Ge,
    Le,
    Plus,
    Minus,
    Star,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Num(n) => format!("number `{n}`"),
            Tok::Open(c) => format!("`{c}[`"),
            Tok::Deriv(DerivativeSide::Right) => "`D+(`".into(),
            Tok::Deriv(DerivativeSide::Left) => "`D-(`".into(),
            Tok::AbsOpen => "`abs(`".into(),
            Tok::Let => "`let`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Assign => "`=`".into(),
            Tok::Not => "`!`".into(),
            Tok::And => "`&&`".into(),
            Tok::Or => "`||`".into(),
            Tok::Implies => "`=>`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, SourceSpan)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |start: usize, end: usize, message: String| ParseError {
        span: SourceSpan::new(start, end),
        message,
        expected: vec![],
    };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let two = if i + 1 < bytes.len() { &bytes[i..i + 2] } else { &bytes[i..i + 1] };
        let (tok, len) = match two {
            b"&&" => (Tok::And, 2),
            b"||" => (Tok::Or, 2),
            b"=>" => (Tok::Implies, 2),
            b">=" => (Tok::Ge, 2),
            b"<=" => (Tok::Le, 2),
            _ => match c {
                b'(' => (Tok::LParen, 1),
                b')' => (Tok::RParen, 1),
                b']' => (Tok::RBracket, 1),
                b',' => (Tok::Comma, 1),
                b';' => (Tok::Semi, 1),
                b'=' => (Tok::Assign, 1),
                b'!' => (Tok::Not, 1),
                b'+' => (Tok::Plus, 1),
                b'-' => (Tok::Minus, 1),
                b'*' => (Tok::Star, 1),
                b'0'..=b'9' | b'.' => {
                    let mut j = i;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j] == b'.' {
                        j += 1;
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                    }
                    let s = &text[i..j];
                    let v: f64 = s
                        .parse()
                        .map_err(|_| err(start, j, format!("invalid number `{s}`")))?;
                    (Tok::Num(v), j - i)
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    let mut j = i;
                    while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                        j += 1;
                    }
                    let word = &text[i..j];
                    let next = bytes.get(j).copied();
                    match (word, next) {
                        ("G" | "F" | "I", Some(b'[')) => (Tok::Open(word.chars().next().unwrap()), j - i + 1),
                        ("abs", Some(b'(')) => (Tok::AbsOpen, j - i + 1),
                        ("D", Some(s @ (b'+' | b'-'))) if bytes.get(j + 1) == Some(&b'(') => {
                            let side = if s == b'+' { DerivativeSide::Right } else { DerivativeSide::Left };
                            (Tok::Deriv(side), j - i + 2)
                        }
                        ("let", _) => (Tok::Let, 3),
                        _ => (Tok::Ident(word.to_string()), j - i),
                    }
                }
                _ => {
                    let ch = text[i..].chars().next().unwrap();
                    return Err(err(start, start + ch.len_utf8(), format!("unexpected character `{ch}`")));
                }
            },
        };
        i += len;
        out.push((tok, SourceSpan::new(start, i)));
    }
    out.push((Tok::Eof, SourceSpan::new(text.len(), text.len())));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, SourceSpan)>,
    pos: usize,
    lets: HashMap<String, Formula>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].0
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].1
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.toks[self.pos - 1].1.end
        }
    }

    fn bump(&mut self) -> (Tok, SourceSpan) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let (tok, span) = &self.toks[self.pos];
        ParseError {
            span: *span,
            message: format!("unexpected {}", tok.describe()),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expect(&mut self, tok: Tok, name: &str) -> Result<SourceSpan, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            Err(self.error(&[name]))
        }
    }

    fn file(&mut self) -> Result<Formula, ParseError> {
        while *self.peek() == Tok::Let {
            self.bump();
            let name = match self.bump() {
                (Tok::Ident(s), _) => s,
                _ => {
                    self.pos -= 1;
                    return Err(self.error(&["identifier"]));
                }
            };
            self.expect(Tok::Assign, "`=`")?;
            let f = self.formula()?;
            self.expect(Tok::Semi, "`;`")?;
            self.lets.insert(name, f);
        }
        let f = self.formula()?;
        if *self.peek() != Tok::Eof {
            return Err(self.error(&["`&&`", "`||`", "`=>`", "end of input"]));
        }
        Ok(f)
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let start = self.span().start;
        let lhs = self.or()?;
        if *self.peek() == Tok::Implies {
            self.bump();
            let rhs = self.formula()?;
            let span = SourceSpan::new(start, self.prev_end());
            return Ok(Formula::implies(lhs, rhs).with_span(span));
        }
        Ok(lhs)
    }

    fn chain(&mut self, op: Tok, is_and: bool) -> Result<Formula, ParseError> {
        let start = self.span().start;
        let mut items = vec![if is_and { self.unary()? } else { self.chain(Tok::And, true)? }];
        while *self.peek() == op {
            self.bump();
            items.push(if is_and { self.unary()? } else { self.chain(Tok::And, true)? });
        }
        if items.len() == 1 {
            return Ok(items.pop().unwrap());
        }
        let span = SourceSpan::new(start, self.prev_end());
        let f = if is_and { Formula::and(items) } else { Formula::or(items) };
        Ok(f.with_span(span))
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        self.chain(Tok::Or, false)
    }

    fn interval(&mut self) -> Result<Interval, ParseError> {
        let lo = self.number()?;
        self.expect(Tok::Comma, "`,`")?;
        let hi = self.number()?;
        self.expect(Tok::RBracket, "`]`")?;
        Ok(Interval::new(lo, hi))
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let neg = match self.peek() {
            Tok::Minus => {
                self.bump();
                true
            }
            Tok::Plus => {
                self.bump();
                false
            }
            _ => false,
        };
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            _ => Err(self.error(&["number"])),
        }
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        let start = self.span().start;
        let f = match self.peek().clone() {
            Tok::Not => {
                self.bump();
                Formula::not(self.unary()?)
            }
            Tok::Open(c @ ('G' | 'F')) => {
                self.bump();
                let i = self.interval()?;
                let child = Box::new(self.unary()?);
                Formula::from(if c == 'G' {
                    FormulaKind::Globally(i, child)
                } else {
                    FormulaKind::Eventually(i, child)
                })
            }
            Tok::LParen => {
                self.bump();
                let f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                return Ok(f);
            }
            Tok::Ident(name)
                if self.lets.contains_key(&name)
                    && !matches!(self.peek_at(1), Tok::Star | Tok::Plus | Tok::Minus | Tok::Ge | Tok::Le) =>
            {
                self.bump();
                return Ok(self.lets[&name].clone());
            }
            Tok::Open('I') => {
                self.bump();
                let bounds = self.interval()?;
                self.expect(Tok::LParen, "`(`")?;
                let expr = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                let (cmp, c) = self.comparison()?;
                Formula::integral(match cmp {
                    Comparison::Ge => IntegralPredicate::ge(expr, bounds, c),
                    Comparison::Le => IntegralPredicate::le(expr, bounds, c),
                })
            }
            Tok::Deriv(side) => {
                self.bump();
                let expr = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                let (cmp, c) = self.comparison()?;
                Formula::derivative(match cmp {
                    Comparison::Ge => DerivativePredicate::ge(expr, side, c),
                    Comparison::Le => DerivativePredicate::le(expr, side, c),
                })
            }
            Tok::Ident(_) | Tok::Num(_) | Tok::Minus | Tok::Plus | Tok::AbsOpen => {
                let expr = self.expr()?;
                let (cmp, c) = self.comparison()?;
                Formula::pred(match cmp {
                    Comparison::Ge => Predicate::ge(expr, c),
                    Comparison::Le => Predicate::le(expr, c),
                })
            }
            _ => {
                return Err(self.error(&[
                    "`!`", "`G[`", "`F[`", "`(`", "`I[`", "`D+(`", "`D-(`", "expression",
                ]))
            }
        };
        Ok(f.with_span(SourceSpan::new(start, self.prev_end())))
    }

    fn comparison(&mut self) -> Result<(Comparison, f64), ParseError> {
        let cmp = match self.peek() {
            Tok::Ge => Comparison::Ge,
            Tok::Le => Comparison::Le,
            _ => return Err(self.error(&["`>=`", "`<=`"])),
        };
        self.bump();
        Ok((cmp, self.number()?))
    }

    fn expr(&mut self) -> Result<LinearExpr, ParseError> {
        let mut e = LinearExpr::default();
        let mut sign = match self.peek() {
            Tok::Minus => {
                self.bump();
                -1.0
            }
            Tok::Plus => {
                self.bump();
                1.0
            }
            _ => 1.0,
        };
        loop {
            match self.peek().clone() {
                Tok::Num(v) => {
                    self.bump();
                    if *self.peek() == Tok::Star {
                        self.bump();
                        let (dim, abs) = self.signal_ref()?;
                        e.terms.push(Term { dim, coeff: sign * v, abs });
                    } else {
                        e.constant += sign * v;
                    }
                }
                Tok::Ident(_) | Tok::AbsOpen => {
                    let (dim, abs) = self.signal_ref()?;
                    e.terms.push(Term { dim, coeff: sign, abs });
                }
                _ => return Err(self.error(&["number", "identifier", "`abs(`"])),
            }
            sign = match self.peek() {
                Tok::Plus => 1.0,
                Tok::Minus => -1.0,
                _ => return Ok(e),
            };
            self.bump();
        }
    }

    fn signal_ref(&mut self) -> Result<(String, bool), ParseError> {
        match self.bump() {
            (Tok::Ident(s), _) => Ok((s, false)),
            (Tok::AbsOpen, _) => {
                let name = match self.bump() {
                    (Tok::Ident(s), _) => s,
                    _ => {
                        self.pos -= 1;
                        return Err(self.error(&["identifier"]));
                    }
                };
                self.expect(Tok::RParen, "`)`")?;
                Ok((name, true))
            }
            _ => {
                self.pos -= 1;
                Err(self.error(&["identifier", "`abs(`"]))
            }
        }
    }
}

/// Parses a formula, optionally preceded by `let NAME = formula;` definitions.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    Parser { toks, pos: 0, lets: HashMap::new() }.file()
}

/// Canonical text for `f`; `parse(&print(f)) == f`.
pub fn print(f: &Formula) -> String {
    let mut s = String::new();
    write_formula(&mut s, f, Prec::Implies);
    s
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print(self))
    }
}

#[derive(PartialEq, PartialOrd, Clone, Copy)]
enum Prec {
    Implies,
    Or,
    And,
    Unary,
}

fn write_formula(out: &mut String, f: &Formula, ctx: Prec) {
    let own = match &f.kind {
        FormulaKind::Implies(..) => Prec::Implies,
        FormulaKind::Or(_) => Prec::Or,
        FormulaKind::And(_) => Prec::And,
        _ => Prec::Unary,
    };
    // Flattened chains re-parse as one node, so nested same-kind operands need parens.
    let paren = own < ctx || (own == ctx && own != Prec::Unary && own != Prec::Implies);
    if paren {
        out.push('(');
    }
    match &f.kind {
        FormulaKind::Pred(p) => write_atom(out, "", &p.expr, p.threshold, p.written, ""),
        FormulaKind::IntPred(p) => {
            let head = format!("I[{},{}](", p.bounds.lo, p.bounds.hi);
            write_atom(out, &head, &p.expr, p.threshold, p.written, ")");
        }
        FormulaKind::DerPred(p) => {
            let head = if p.side == DerivativeSide::Right { "D+(" } else { "D-(" };
            write_atom(out, head, &p.expr, p.threshold, p.written, ")");
        }
        FormulaKind::Not(c) => {
            out.push('!');
            write_formula(out, c, Prec::Unary);
        }
        FormulaKind::And(cs) | FormulaKind::Or(cs) => {
            let op = if own == Prec::And { " && " } else { " || " };
            let child_ctx = if own == Prec::And { Prec::And } else { Prec::Or };
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    out.push_str(op);
                }
                // Operands one level tighter than the chain itself.
                let tighter = if child_ctx == Prec::And { Prec::Unary } else { Prec::And };
                let needs = match &c.kind {
                    FormulaKind::And(_) if child_ctx == Prec::Or => Prec::And,
                    _ => tighter,
                };
                write_formula(out, c, needs);
            }
        }
        FormulaKind::Implies(a, b) => {
            write_formula(out, a, Prec::Or);
            out.push_str(" => ");
            write_formula(out, b, Prec::Implies);
        }
        FormulaKind::Eventually(i, c) | FormulaKind::Globally(i, c) => {
            let op = if matches!(f.kind, FormulaKind::Globally(..)) { 'G' } else { 'F' };
            let _ = write!(out, "{op}[{},{}] ", i.lo, i.hi);
            write_formula(out, c, Prec::Unary);
        }
    }
    if paren {
        out.push(')');
    }
}

fn write_atom(
    out: &mut String,
    head: &str,
    expr: &LinearExpr,
    threshold: f64,
    written: Comparison,
    tail: &str,
) {
    let (expr, threshold, cmp) = match written {
        Comparison::Ge => (expr.clone(), threshold, ">="),
        Comparison::Le => (expr.negated(), -threshold, "<="),
    };
    out.push_str(head);
    write_expr(out, &expr);
    out.push_str(tail);
    let _ = write!(out, " {cmp} {threshold}");
}

fn write_expr(out: &mut String, e: &LinearExpr) {
    for (i, t) in e.terms.iter().enumerate() {
        let neg = t.coeff.is_sign_negative();
        match (i, neg) {
            (0, true) => out.push('-'),
            (0, false) => {}
            (_, true) => out.push_str(" - "),
            (_, false) => out.push_str(" + "),
        }
        let mag = t.coeff.abs();
        if mag != 1.0 {
            let _ = write!(out, "{mag}*");
        }
        if t.abs {
            let _ = write!(out, "abs({})", t.dim);
        } else {
            out.push_str(&t.dim);
        }
    }
    if e.constant != 0.0 || e.terms.is_empty() {
        let sep = match (e.terms.is_empty(), e.constant.is_sign_negative()) {
            (true, true) => "-",
            (true, false) => "",
            (false, true) => " - ",
            (false, false) => " + ",
        };
        let _ = write!(out, "{sep}{}", e.constant.abs());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::validate;

    #[test]
    fn parses_integral_under_eventually() {
        let f = parse("F[0,4] I[0,2](x) >= 3").unwrap();
        let expected = Formula::eventually(
            0.0,
            4.0,
            Formula::integral(IntegralPredicate::ge(LinearExpr::var("x"), Interval::new(0.0, 2.0), 3.0)),
        );
        assert_eq!(f, expected);
        assert_eq!(print(&f), "F[0,4] I[0,2](x) >= 3");
    }

    #[test]
    fn parses_implication_with_abs() {
        let text = "let inC = x >= 2 && x <= 4 && y >= 1 && y <= 5;\nG[0,20] ( inC => abs(vx) >= 1 )";
        let f = parse(text).unwrap();
        let FormulaKind::Globally(_, body) = &f.kind else { panic!() };
        let FormulaKind::Implies(lhs, rhs) = &body.kind else { panic!() };
        assert!(matches!(&lhs.kind, FormulaKind::And(cs) if cs.len() == 4));
        let FormulaKind::Pred(p) = &rhs.kind else { panic!() };
        assert!(p.expr.terms[0].abs);
    }

    #[test]
    fn unbound_name_is_an_error() {
        let text = "G[0,20] ( inC => abs(vx) >= 1 )";
        let e = parse(text).unwrap_err();
        assert_eq!(&text[e.span.start..e.span.end], "=>");
    }

    #[test]
    fn simple_predicate() {
        assert_eq!(parse("x >= 1").unwrap(), Formula::ge(LinearExpr::var("x"), 1.0));
        assert_eq!(print(&Formula::ge(LinearExpr::var("x"), 1.0)), "x >= 1");
    }

    #[test]
    fn reversed_interval_fails_validation() {
        let f = parse("G[5,0] x >= 1").unwrap();
        assert!(validate(&f, 1.0).is_err());
    }

    #[test]
    fn le_round_trips() {
        let f = parse("2*x - abs(y) + 1 <= -0.5").unwrap();
        let FormulaKind::Pred(p) = &f.kind else { panic!() };
        assert_eq!(p.written, Comparison::Le);
        assert_eq!(p.threshold, 0.5);
        assert_eq!(print(&f), "2*x - abs(y) + 1 <= -0.5");
    }

    #[test]
    fn precedence() {
        let f = parse("a >= 1 && b >= 1 || c >= 1 => d >= 1 => e >= 1").unwrap();
        let FormulaKind::Implies(lhs, rhs) = &f.kind else { panic!() };
        assert!(matches!(lhs.kind, FormulaKind::Or(_)));
        assert!(matches!(rhs.kind, FormulaKind::Implies(..)));
        assert_eq!(parse(&print(&f)).unwrap(), f);
    }

    #[test]
    fn nested_chains_keep_structure() {
        let f = parse("a >= 1 && (b >= 1 && c >= 1)").unwrap();
        let FormulaKind::And(cs) = &f.kind else { panic!() };
        assert_eq!(cs.len(), 2);
        assert_eq!(parse(&print(&f)).unwrap(), f);
        let g = parse("(a >= 1 => b >= 1) => c >= 1").unwrap();
        assert_eq!(parse(&print(&g)).unwrap(), g);
    }

    #[test]
    fn derivative_atoms() {
        let f = parse("D+(vx) <= 0.5 && D-(vx) >= -0.25").unwrap();
        assert_eq!(print(&f), "D+(vx) <= 0.5 && D-(vx) >= -0.25");
    }

    #[test]
    fn errors_carry_spans() {
        let text = "G[0,5] (x >= 1";
        let e = parse(text).unwrap_err();
        assert_eq!(e.span.start, text.len());
        assert!(e.expected.contains(&"`)`".to_string()));
        let e = parse("x >= $").unwrap_err();
        assert_eq!(e.span, SourceSpan::new(5, 6));
        assert!(e.render("x >= $").contains('^'));
    }

    #[test]
    fn spans_cover_nodes() {
        let text = "F[0,4] I[0,2](x) >= 3";
        let f = parse(text).unwrap();
        assert_eq!(f.span, Some(SourceSpan::new(0, text.len())));
        assert_eq!(f.children()[0].span, Some(SourceSpan::new(7, text.len())));
    }
}
