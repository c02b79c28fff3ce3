//! Recursive-descent parser for hypothesis strings such as
//! `"a > b > c; a = b & c > 0"`.

use nalgebra::DMatrix;

use super::{ConstraintMatrices, ParameterSpace};
use crate::error::{Error, ParseError, ParseErrorKind, Result};
use crate::{linalg, lp};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Plus,
    Minus,
    Star,
    Eq,
    Lt,
    Gt,
    LParen,
    RParen,
    Comma,
    Amp,
    Semi,
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Name(n) => format!("`{n}`"),
        Tok::Plus => "'+'".into(),
        Tok::Minus => "'-'".into(),
        Tok::Star => "'*'".into(),
        Tok::Eq => "'='".into(),
        Tok::Lt => "'<'".into(),
        Tok::Gt => "'>'".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::Comma => "','".into(),
        Tok::Amp => "'&'".into(),
        Tok::Semi => "';'".into(),
        Tok::End => "end of input".into(),
    }
}

fn syntax(msg: impl Into<String>, pos: usize) -> Error {
    ParseError::new(ParseErrorKind::Syntax(msg.into()), Some(pos)).into()
}

fn lex(input: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = input.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &input[start..i];
            let v: f64 = text.parse().map_err(|_| syntax(format!("bad number `{text}`"), start))?;
            if !v.is_finite() {
                return Err(syntax(format!("number `{text}` is out of range"), start));
            }
            out.push((Tok::Num(v), start));
            continue;
        }
        if c.is_ascii_alphabetic() {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.') {
                i += 1;
            }
            out.push((Tok::Name(input[start..i].to_string()), start));
            continue;
        }
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'=' => Tok::Eq,
            b'<' => Tok::Lt,
            b'>' => Tok::Gt,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'&' => Tok::Amp,
            b';' => Tok::Semi,
            _ => {
                let ch = input[start..].chars().next().unwrap_or('?');
                return Err(syntax(format!("unexpected character '{ch}'"), start));
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, input.len()));
    Ok(out)
}

/// `coefs . θ + constant`
#[derive(Debug, Clone)]
struct LinExpr {
    coefs: Vec<f64>,
    constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cmp {
    Eq,
    Lt,
    Gt,
}

#[derive(Debug, Clone)]
struct RawRow {
    coefs: Vec<f64>,
    rhs: f64,
    equality: bool,
    pos: usize,
}

struct RawHypothesis {
    rows: Vec<RawRow>,
    start: usize,
    end: usize,
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    i: usize,
    space: &'a ParameterSpace,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn pos(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn system(&mut self) -> Result<Vec<RawHypothesis>> {
        let mut hyps = Vec::new();
        loop {
            let start = self.pos();
            let mut rows = Vec::new();
            loop {
                self.constraint(&mut rows)?;
                match self.peek() {
                    Tok::Amp => {
                        self.bump();
                    }
                    Tok::Semi | Tok::End => break,
                    t => {
                        return Err(syntax(
                            format!("expected '&', ';' or end of input, found {}", describe(t)),
                            self.pos(),
                        ))
                    }
                }
            }
            let end = self.pos();
            hyps.push(RawHypothesis { rows, start, end });
            if let (Tok::End, _) = self.bump() {
                return Ok(hyps);
            }
        }
    }

    fn constraint(&mut self, rows: &mut Vec<RawRow>) -> Result<()> {
        let mut left = self.side()?;
        let mut n_cmp = 0;
        loop {
            let cmp = match self.peek() {
                Tok::Eq => Cmp::Eq,
                Tok::Lt => Cmp::Lt,
                Tok::Gt => Cmp::Gt,
                t => {
                    if n_cmp == 0 {
                        return Err(syntax(format!("expected '=', '<' or '>', found {}", describe(t)), self.pos()));
                    }
                    return Ok(());
                }
            };
            let (_, pos) = self.bump();
            let right = self.side()?;
            for l in &left {
                for r in &right {
                    rows.push(make_row(l, r, cmp, pos));
                }
            }
            left = right;
            n_cmp += 1;
        }
    }

    fn side(&mut self) -> Result<Vec<LinExpr>> {
        if *self.peek() != Tok::LParen {
            return Ok(vec![self.expr()?]);
        }
        self.bump();
        let mut items = vec![self.expr()?];
        loop {
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                    items.push(self.expr()?);
                }
                Tok::RParen => {
                    self.bump();
                    return Ok(items);
                }
                t => return Err(syntax(format!("expected ',' or ')', found {}", describe(t)), self.pos())),
            }
        }
    }

    fn expr(&mut self) -> Result<LinExpr> {
        let mut e = LinExpr { coefs: vec![0.0; self.space.len()], constant: 0.0 };
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
            self.term(&mut e, sign)?;
            sign = match self.peek() {
                Tok::Plus => 1.0,
                Tok::Minus => -1.0,
                _ => return Ok(e),
            };
            self.bump();
        }
    }

    fn term(&mut self, e: &mut LinExpr, sign: f64) -> Result<()> {
        let (tok, pos) = self.bump();
        match tok {
            Tok::Num(v) => {
                let star = *self.peek() == Tok::Star;
                if star {
                    self.bump();
                }
                match self.peek().clone() {
                    Tok::Name(n) => {
                        let (_, npos) = self.bump();
                        let j = self.lookup(&n, npos)?;
                        e.coefs[j] += sign * v;
                    }
                    t if star => {
                        return Err(syntax(
                            format!("expected a parameter name after '*', found {}", describe(&t)),
                            self.pos(),
                        ))
                    }
                    _ => e.constant += sign * v,
                }
                Ok(())
            }
            Tok::Name(n) => {
                let j = self.lookup(&n, pos)?;
                e.coefs[j] += sign;
                Ok(())
            }
            t => Err(syntax(format!("expected a number or parameter name, found {}", describe(&t)), pos)),
        }
    }

    fn lookup(&self, name: &str, pos: usize) -> Result<usize> {
        self.space
            .index_of(name)
            .ok_or_else(|| ParseError::new(ParseErrorKind::UnknownIdentifier(name.to_string()), Some(pos)).into())
    }
}

fn make_row(l: &LinExpr, r: &LinExpr, cmp: Cmp, pos: usize) -> RawRow {
    // l - r  (cmp)  0
    let diff: Vec<f64> = l.coefs.iter().zip(&r.coefs).map(|(a, b)| a - b).collect();
    let constant = l.constant - r.constant;
    match cmp {
        Cmp::Lt => RawRow { coefs: diff.iter().map(|v| -v).collect(), rhs: constant, equality: false, pos },
        _ => RawRow { coefs: diff, rhs: -constant, equality: cmp == Cmp::Eq, pos },
    }
}

fn clean(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

/// Scales a row so its first nonzero coefficient has magnitude one (and is
/// positive for equalities), then clears denominators up to 1000 when the
/// coefficients are rational.
fn normalize(row: &RawRow) -> Result<RawRow> {
    let lead = row.coefs.iter().copied().find(|c| *c != 0.0);
    let Some(lead) = lead else {
        return Err(ParseError::new(ParseErrorKind::DegenerateRow, Some(row.pos)).into());
    };
    let mut s = lead.abs();
    if row.equality && lead < 0.0 {
        s = -s;
    }
    let mult = (1..=1000u32).map(f64::from).find(|&m| {
        row.coefs.iter().all(|c| {
            let x = c / s * m;
            (x - x.round()).abs() <= 1e-9 * x.abs().max(1.0)
        })
    });
    let (factor, round) = match mult {
        Some(m) => (m / s, true),
        None => (1.0 / s, false),
    };
    let coefs = row
        .coefs
        .iter()
        .map(|c| {
            let x = c * factor;
            clean(if round { x.round() } else { x })
        })
        .collect();
    Ok(RawRow { coefs, rhs: clean(row.rhs * factor), equality: row.equality, pos: row.pos })
}

fn same_coefs(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn build(raw: &RawHypothesis, p: usize, source: String) -> Result<ConstraintMatrices> {
    let mut eq: Vec<RawRow> = Vec::new();
    let mut ord: Vec<RawRow> = Vec::new();
    for r in &raw.rows {
        let r = normalize(r)?;
        let bucket = if r.equality { &mut eq } else { &mut ord };
        if let Some(prev) = bucket.iter().find(|x| same_coefs(&x.coefs, &r.coefs)) {
            if close(prev.rhs, r.rhs) {
                continue;
            }
            if r.equality {
                return Err(ParseError::new(ParseErrorKind::Contradictory, Some(r.pos)).into());
            }
        }
        bucket.push(r);
    }
    let to_pairs = |rows: &[RawRow]| rows.iter().map(|r| (r.coefs.clone(), r.rhs)).collect::<Vec<_>>();
    let cm = ConstraintMatrices::from_rows(p, &to_pairs(&eq), &to_pairs(&ord)).with_source(source);
    validate(&cm)?;
    Ok(cm)
}

/// Rejects dependent or inconsistent equalities and hypotheses whose order
/// region has no interior.
pub fn validate(cm: &ConstraintMatrices) -> Result<()> {
    let q_e = cm.n_equalities();
    if q_e > 0 {
        let rank = linalg::rank(&cm.re);
        if rank < q_e {
            let mut aug = DMatrix::zeros(q_e, cm.n_params() + 1);
            aug.columns_mut(0, cm.n_params()).copy_from(&cm.re);
            aug.set_column(cm.n_params(), &cm.r_e);
            if linalg::rank(&aug) > rank {
                return Err(Error::Infeasible(format!("equality constraints in `{}` are inconsistent", cm.source)));
            }
            return Err(Error::RedundantEqualities(cm.source.clone()));
        }
    }
    let feasible = if cm.n_orders() == 0 { true } else { lp::has_interior(&cm.ro, &cm.r_o, &cm.re, &cm.r_e) };
    if !feasible {
        return Err(Error::Infeasible(format!("`{}` admits no parameter values", cm.source)));
    }
    Ok(())
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `;`-separated hypotheses into constraint matrices over `space`.
pub fn parse(input: &str, space: &ParameterSpace) -> Result<Vec<ConstraintMatrices>> {
    if input.trim().is_empty() {
        return Err(ParseError::new(ParseErrorKind::Empty, None).into());
    }
    let toks = lex(input)?;
    let mut parser = Parser { toks, i: 0, space };
    let raw = parser.system()?;
    raw.iter().map(|h| build(h, space.len(), collapse_ws(&input[h.start..h.end]))).collect()
}

/// Convenience for a single hypothesis that must not contain `;`.
pub fn parse_one(input: &str, space: &ParameterSpace) -> Result<ConstraintMatrices> {
    let mut v = parse(input, space)?;
    if v.len() != 1 {
        return Err(Error::invalid(format!("expected a single hypothesis, got {}", v.len())));
    }
    Ok(v.remove(0))
}
