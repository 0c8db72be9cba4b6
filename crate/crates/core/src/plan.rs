//! The plan language: one statement per line, `#` starts a comment.
//!
//! Parsing tracks which generator and class names exist at every line, so a
//! reference to an unknown symbol is reported before anything runs.

use std::collections::HashSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::blowdown::hj_expansion;
use crate::lattice::{parse_monomials, Parity};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Signed multiples of named classes, in source order.
pub type Terms = Vec<(BigInt, String)>;

pub fn format_terms(terms: &Terms) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    let mut s = String::new();
    for (i, (c, name)) in terms.iter().enumerate() {
        if c.is_negative() {
            s.push('-');
        } else if i > 0 {
            s.push('+');
        }
        let a = c.abs();
        if !a.is_one() {
            s.push_str(&a.to_string());
        }
        s.push_str(name);
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComparedForm {
    Restricted,
    Exotic,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SwOp {
    /// {0}, as on a K3 surface.
    Zero,
    /// {±K} from the current canonical class.
    Taubes,
    Blowup(String),
    Minimality,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Statement {
    SurfaceBlowup(usize),
    SurfaceRuled(u32),
    SurfaceAbstract,
    Gen { square: i64, names: Vec<String> },
    Meet { a: String, b: String, value: i64 },
    Canonical(Terms),
    Invariants { e: i64, sigma: i64, parity: Parity },
    AssumeSc(String),
    Class { name: String, terms: Terms },
    Resolve { name: String, parts: Vec<Terms> },
    Blowup(Option<String>),
    Ledger,
    Component { name: String, terms: Terms, mult: u64 },
    Fiber(Terms),
    Convert,
    Step { through: Vec<(String, u64)>, exceptional: u64, b_drop: u64, name: Option<String> },
    Finalize { name: String, genus: i64 },
    Plumbing { p: u64, q: u64 },
    Embed { index: usize, terms: Terms },
    Blowdown,
    Pair { a: String, b: String },
    Descent(String),
    Symplectic(String),
    Functional { k: String, w: String },
    Compare { form: ComparedForm, scale: BigRational, text: String },
    Sw(SwOp),
    Fibration { kf2: i64, chi: i64, g: i64, b: i64 },
    Claim { key: String, text: String },
    Verdict(String),
    Assert { key: String, value: String },
    Report(Option<String>),
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Statement::*;
        match self {
            SurfaceBlowup(k) => write!(f, "surface blowup {k}"),
            SurfaceRuled(n) => write!(f, "surface ruled {n}"),
            SurfaceAbstract => f.write_str("surface abstract"),
            Gen { square, names } => write!(f, "gen {square} {}", names.join(" ")),
            Meet { a, b, value } => write!(f, "meet {a} {b} {value}"),
            Canonical(t) => write!(f, "canonical {}", format_terms(t)),
            Invariants { e, sigma, parity } => {
                let p = if *parity == Parity::Even { "even" } else { "odd" };
                write!(f, "invariants {e} {sigma} {p}")
            }
            AssumeSc(s) => write!(f, "assume sc \"{s}\""),
            Class { name, terms } => write!(f, "class {name} = {}", format_terms(terms)),
            Resolve { name, parts } => {
                let p: Vec<String> = parts.iter().map(format_terms).collect();
                write!(f, "resolve {name} = {}", p.join(", "))
            }
            Blowup(None) => f.write_str("blowup"),
            Blowup(Some(n)) => write!(f, "blowup {n}"),
            Ledger => f.write_str("ledger"),
            Component { name, terms, mult } => write!(f, "component {name} = {} mult {mult}", format_terms(terms)),
            Fiber(t) => write!(f, "fiber {}", format_terms(t)),
            Convert => f.write_str("convert"),
            Step { through, exceptional, b_drop, name } => {
                f.write_str("step")?;
                for (n, m) in through {
                    write!(f, " {n}:{m}")?;
                }
                write!(f, " exc {exceptional}")?;
                if *b_drop != 1 {
                    write!(f, " b {b_drop}")?;
                }
                if let Some(n) = name {
                    write!(f, " as {n}")?;
                }
                Ok(())
            }
            Finalize { name, genus } => write!(f, "finalize as {name} genus {genus}"),
            Plumbing { p, q } => write!(f, "plumbing {p} {q}"),
            Embed { index, terms } => write!(f, "embed u{index} = {}", format_terms(terms)),
            Blowdown => f.write_str("blowdown"),
            Pair { a, b } => write!(f, "pair {a} {b}"),
            Descent(c) => write!(f, "descent {c}"),
            Symplectic(w) => write!(f, "symplectic {w}"),
            Functional { k, w } => write!(f, "functional {k} {w}"),
            Compare { form, scale, text } => {
                let which = if *form == ComparedForm::Exotic { "exotic" } else { "restricted" };
                write!(f, "compare {which} {scale} \"{text}\"")
            }
            Sw(op) => match op {
                SwOp::Zero => f.write_str("sw zero"),
                SwOp::Taubes => f.write_str("sw taubes"),
                SwOp::Blowup(g) => write!(f, "sw blowup {g}"),
                SwOp::Minimality => f.write_str("sw minimality"),
            },
            Fibration { kf2, chi, g, b } => write!(f, "fibration {kf2} {chi} {g} {b}"),
            Claim { key, text } => write!(f, "claim {key} \"{text}\""),
            Verdict(tag) => write!(f, "verdict {tag}"),
            Assert { key, value } if value.is_empty() || value.contains(['#', '"', ' ']) => {
                write!(f, "assert {key} \"{value}\"")
            }
            Assert { key, value } => write!(f, "assert {key} {value}"),
            Report(None) => f.write_str("report"),
            Report(Some(p)) => write!(f, "report {p}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Located {
    pub line: usize,
    pub statement: Statement,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SurgeryPlan {
    pub statements: Vec<Located>,
}

impl SurgeryPlan {
    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }
}

impl fmt::Display for SurgeryPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.statements {
            writeln!(f, "{}", s.statement)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Kind {
    None,
    Blowup(usize),
    Ruled(u32),
    Abstract,
}

/// Names visible at a given line.
#[derive(Clone, Debug)]
struct Scope {
    kind: Kind,
    gens: Vec<String>,
    classes: HashSet<String>,
    symplectic: HashSet<String>,
    ledger: Option<LedgerScope>,
    chain_len: Option<usize>,
}

#[derive(Clone, Debug, Default)]
struct LedgerScope {
    components: Vec<String>,
    exceptionals: Vec<String>,
    pending: Option<String>,
    started: bool,
}

impl Scope {
    fn new() -> Self {
        Scope {
            kind: Kind::None,
            gens: Vec::new(),
            classes: HashSet::new(),
            symplectic: HashSet::new(),
            ledger: None,
            chain_len: None,
        }
    }

    fn known(&self, name: &str) -> bool {
        self.gens.iter().any(|g| g == name) || self.classes.contains(name)
    }

    fn set_blowup(&mut self, k: usize) {
        self.kind = Kind::Blowup(k);
        self.gens = std::iter::once("h".to_string()).chain((1..=k).map(|i| format!("e{i}"))).collect();
    }
}

struct Cursor<'a> {
    line_no: usize,
    line: &'a str,
    toks: Vec<(usize, &'a str)>,
    at: usize,
}

impl<'a> Cursor<'a> {
    fn new(line_no: usize, line: &'a str) -> Result<Self, ParseError> {
        let mut toks = Vec::new();
        let b = line.as_bytes();
        let mut i = 0;
        while i < b.len() {
            if b[i].is_ascii_whitespace() {
                i += 1;
                continue;
            }
            let start = i;
            if b[i] == b'"' {
                i += 1;
                while i < b.len() && b[i] != b'"' {
                    i += 1;
                }
                if i >= b.len() {
                    return Err(ParseError { line: line_no, column: start + 1, message: "unterminated string".into() });
                }
                i += 1;
            } else {
                while i < b.len() && !b[i].is_ascii_whitespace() {
                    i += 1;
                }
            }
            toks.push((start, &line[start..i]));
        }
        Ok(Cursor { line_no, line, toks, at: 0 })
    }

    fn col(&self) -> usize {
        self.toks.get(self.at).map(|t| t.0 + 1).unwrap_or(self.line.len() + 1)
    }

    fn err<T>(&self, column: usize, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { line: self.line_no, column, message: message.into() })
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str), ParseError> {
        match self.toks.get(self.at) {
            Some(t) => {
                self.at += 1;
                Ok(*t)
            }
            None => self.err(self.col(), format!("arity: expected {what}")),
        }
    }

    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.at).map(|t| t.1)
    }

    fn done(&self) -> Result<(), ParseError> {
        match self.toks.get(self.at) {
            Some((c, t)) => self.err(c + 1, format!("arity: unexpected `{t}`")),
            None => Ok(()),
        }
    }

    fn int<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, ParseError> {
        let (c, t) = self.next(what)?;
        t.parse().or_else(|_| self.err(c + 1, format!("expected {what}, found `{t}`")))
    }

    fn word(&mut self, what: &str) -> Result<String, ParseError> {
        let (c, t) = self.next(what)?;
        if !is_ident(t) {
            return self.err(c + 1, format!("expected {what}, found `{t}`"));
        }
        Ok(t.to_string())
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        let (c, t) = self.next(&format!("`{kw}`"))?;
        if t != kw {
            return self.err(c + 1, format!("expected `{kw}`, found `{t}`"));
        }
        Ok(())
    }

    fn string(&mut self, what: &str) -> Result<String, ParseError> {
        let (c, t) = self.next(what)?;
        if t.len() < 2 || !t.starts_with('"') || !t.ends_with('"') {
            return self.err(c + 1, format!("expected quoted {what}"));
        }
        Ok(t[1..t.len() - 1].to_string())
    }

    /// Everything after the current token position, with its column.
    fn rest(&mut self) -> (usize, &'a str) {
        let col = self.col();
        let text = self.toks.get(self.at).map(|t| &self.line[t.0..]).unwrap_or("");
        self.at = self.toks.len();
        (col, text)
    }
}

fn is_ident(t: &str) -> bool {
    let mut ch = t.chars();
    matches!(ch.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && ch.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

fn is_key(t: &str) -> bool {
    !t.is_empty() && t.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '=' | '-' | '\''))
}

fn strip_comment(raw: &str) -> &str {
    let mut quoted = false;
    for (i, c) in raw.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &raw[..i],
            _ => {}
        }
    }
    raw
}

pub fn parse(text: &str) -> Result<SurgeryPlan, ParseError> {
    let mut scope = Scope::new();
    let mut statements = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw);
        if line.trim().is_empty() {
            continue;
        }
        let st = parse_line(line_no, line, &mut scope)?;
        statements.push(Located { line: line_no, statement: st });
    }
    Ok(SurgeryPlan { statements })
}

fn terms_at(cur: &Cursor, col: usize, text: &str, scope: &Scope, extra: &[&str]) -> Result<Terms, ParseError> {
    let terms = parse_monomials(text).or_else(|e| cur.err(col, e.to_string()))?;
    for (_, name) in &terms {
        if !scope.known(name) && !extra.contains(&name.as_str()) {
            let off = symbol_offset(text, name).unwrap_or(0);
            return cur.err(col + off, format!("undefined symbol `{name}`"));
        }
    }
    Ok(terms)
}

/// Byte offset of `name` as a whole identifier inside `text`.
fn symbol_offset(text: &str, name: &str) -> Option<usize> {
    let ident = |c: char| c.is_ascii_alphanumeric() || c == '_' || c == '\'';
    text.match_indices(name).map(|(i, _)| i).find(|&i| {
        let before = text[..i].chars().next_back();
        let after = text[i + name.len()..].chars().next();
        !before.is_some_and(|c| c.is_ascii_alphabetic() || c == '_') && !after.is_some_and(ident)
    })
}

fn class_ref(cur: &mut Cursor, scope: &Scope, what: &str) -> Result<String, ParseError> {
    let col = cur.col();
    let name = cur.word(what)?;
    if name != "K" && !scope.known(&name) {
        return cur.err(col, format!("undefined symbol `{name}`"));
    }
    Ok(name)
}

fn parse_line(line_no: usize, line: &str, scope: &mut Scope) -> Result<Statement, ParseError> {
    use Statement::*;
    let mut cur = Cursor::new(line_no, line)?;
    let (head_col, head) = cur.next("a statement")?;
    let need_surface = |cur: &Cursor, scope: &Scope| {
        if scope.kind == Kind::None {
            cur.err(head_col + 1, "no surface declared")
        } else {
            Ok(())
        }
    };
    let st = match head {
        "surface" => {
            let (c, which) = cur.next("surface kind")?;
            let st = match which {
                "blowup" => {
                    let k = cur.int("blow-up count")?;
                    scope.set_blowup(k);
                    SurfaceBlowup(k)
                }
                "ruled" => {
                    let n: u32 = cur.int("degree")?;
                    scope.kind = Kind::Ruled(n);
                    scope.gens = vec!["Cinf".into(), "F".into(), "C0".into()];
                    SurfaceRuled(n)
                }
                "abstract" => {
                    scope.kind = Kind::Abstract;
                    scope.gens.clear();
                    SurfaceAbstract
                }
                other => return cur.err(c + 1, format!("unknown surface kind `{other}`")),
            };
            scope.classes.clear();
            scope.symplectic.clear();
            scope.ledger = None;
            scope.chain_len = None;
            st
        }
        "gen" => {
            if scope.kind != Kind::Abstract {
                return cur.err(head_col + 1, "`gen` needs an abstract surface");
            }
            let square = cur.int("self-intersection")?;
            let mut names = Vec::new();
            while cur.peek().is_some() {
                let col = cur.col();
                let n = cur.word("generator name")?;
                if scope.known(&n) || names.contains(&n) {
                    return cur.err(col, format!("duplicate generator `{n}`"));
                }
                names.push(n);
            }
            if names.is_empty() {
                return cur.err(cur.col(), "arity: expected generator names");
            }
            scope.gens.extend(names.iter().cloned());
            Gen { square, names }
        }
        "meet" => {
            if scope.kind != Kind::Abstract {
                return cur.err(head_col + 1, "`meet` needs an abstract surface");
            }
            let gen = |cur: &mut Cursor| -> Result<String, ParseError> {
                let col = cur.col();
                let n = cur.word("generator")?;
                if !scope.gens.contains(&n) {
                    return cur.err(col, format!("undefined symbol `{n}`"));
                }
                Ok(n)
            };
            let a = gen(&mut cur)?;
            let b = gen(&mut cur)?;
            Meet { a, b, value: cur.int("intersection number")? }
        }
        "canonical" => {
            if scope.kind != Kind::Abstract {
                return cur.err(head_col + 1, "`canonical` needs an abstract surface");
            }
            let (col, text) = cur.rest();
            Canonical(terms_at(&cur, col, text, scope, &[])?)
        }
        "invariants" => {
            need_surface(&cur, scope)?;
            let e = cur.int("Euler characteristic")?;
            let sigma = cur.int("signature")?;
            let (c, p) = cur.next("parity")?;
            let parity = match p {
                "even" => Parity::Even,
                "odd" => Parity::Odd,
                _ => return cur.err(c + 1, "parity must be `even` or `odd`"),
            };
            Invariants { e, sigma, parity }
        }
        "assume" => {
            cur.keyword("sc")?;
            AssumeSc(cur.string("justification")?)
        }
        "class" => {
            need_surface(&cur, scope)?;
            let name = cur.word("class name")?;
            cur.keyword("=")?;
            let (col, text) = cur.rest();
            let terms = terms_at(&cur, col, text, scope, &[])?;
            scope.classes.insert(name.clone());
            Class { name, terms }
        }
        "resolve" => {
            need_surface(&cur, scope)?;
            let name = cur.word("class name")?;
            cur.keyword("=")?;
            let (col, text) = cur.rest();
            let mut parts = Vec::new();
            let mut off = 0;
            for piece in text.split(',') {
                parts.push(terms_at(&cur, col + off, piece, scope, &[])?);
                off += piece.len() + 1;
            }
            if parts.len() < 2 {
                return cur.err(col, "arity: resolve needs at least two classes");
            }
            scope.classes.insert(name.clone());
            Resolve { name, parts }
        }
        "blowup" => {
            need_surface(&cur, scope)?;
            let name = if cur.peek().is_some() { Some(cur.word("exceptional name")?) } else { None };
            match (&scope.kind, &name) {
                (Kind::Blowup(k), None) => {
                    let k = *k + 1;
                    scope.kind = Kind::Blowup(k);
                    scope.gens.push(format!("e{k}"));
                }
                (Kind::Blowup(k), Some(n)) if *n == format!("e{}", k + 1) => {
                    scope.kind = Kind::Blowup(k + 1);
                    scope.gens.push(n.clone());
                }
                (Kind::Ruled(_), _) => return cur.err(head_col + 1, "cannot blow up a ruled basis; use a ledger and convert"),
                (_, None) => return cur.err(cur.col(), "arity: abstract blow-ups need a name"),
                (_, Some(n)) => {
                    if scope.known(n) {
                        return cur.err(head_col + 1, format!("duplicate generator `{n}`"));
                    }
                    scope.kind = Kind::Abstract;
                    scope.gens.push(n.clone());
                }
            }
            Blowup(name)
        }
        "ledger" => {
            need_surface(&cur, scope)?;
            scope.ledger = Some(LedgerScope::default());
            Ledger
        }
        "component" | "fiber" | "convert" | "step" | "finalize" => {
            let Some(ledger) = scope.ledger.clone() else { return cur.err(head_col + 1, "no ledger open") };
            let mut ledger = ledger;
            let st = match head {
                "component" | "fiber" if ledger.started => {
                    return cur.err(head_col + 1, "ledger already started");
                }
                "component" => {
                    let name = cur.word("component name")?;
                    if ledger.components.contains(&name) {
                        return cur.err(head_col + 1, format!("duplicate component `{name}`"));
                    }
                    cur.keyword("=")?;
                    let (col, text) = cur.rest();
                    let Some(mpos) = text.rfind(" mult ") else { return cur.err(col, "arity: expected `mult <m>`") };
                    let terms = terms_at(&cur, col, &text[..mpos], scope, &[])?;
                    let m = text[mpos + 6..].trim();
                    let mult: u64 = m.parse().or_else(|_| cur.err(col + mpos + 6, format!("bad multiplicity `{m}`")))?;
                    if mult == 0 {
                        return cur.err(col + mpos + 6, "multiplicity must be positive");
                    }
                    ledger.components.push(name.clone());
                    Component { name, terms, mult }
                }
                "fiber" => {
                    let (col, text) = cur.rest();
                    Fiber(terms_at(&cur, col, text, scope, &[])?)
                }
                "convert" => {
                    let n = match scope.kind {
                        Kind::Ruled(n @ (2 | 3)) => n,
                        _ => return cur.err(head_col + 1, "convert needs a ruled surface of degree 2 or 3"),
                    };
                    ledger.started = true;
                    scope.set_blowup(if n == 2 { 2 } else { 1 });
                    scope.classes.clear();
                    if n == 2 {
                        ledger.pending = Some("e".into());
                    }
                    Convert
                }
                "step" => {
                    if matches!(scope.kind, Kind::Ruled(_)) {
                        return cur.err(head_col + 1, "cannot blow up a ruled basis; convert first");
                    }
                    ledger.started = true;
                    let mut through = Vec::new();
                    while let Some(t) = cur.peek() {
                        if t == "exc" {
                            break;
                        }
                        let (c, t) = cur.next("component:multiplicity")?;
                        let Some((n, m)) = t.split_once(':') else {
                            return cur.err(c + 1, format!("expected component:multiplicity, found `{t}`"));
                        };
                        if !ledger.components.iter().chain(&ledger.exceptionals).any(|x| x == n) {
                            return cur.err(c + 1, format!("undefined component `{n}`"));
                        }
                        let m: u64 = m.parse().or_else(|_| cur.err(c + 1, format!("bad multiplicity in `{t}`")))?;
                        if m == 0 {
                            return cur.err(c + 1, "multiplicity must be positive");
                        }
                        through.push((n.to_string(), m));
                    }
                    cur.keyword("exc")?;
                    let exceptional = cur.int("exceptional multiplicity")?;
                    let mut b_drop = 1;
                    let mut name = None;
                    while let Some(t) = cur.peek() {
                        match t {
                            "b" => {
                                cur.next("b")?;
                                b_drop = cur.int("B multiplicity")?;
                            }
                            "as" => {
                                cur.next("as")?;
                                name = Some(cur.word("exceptional name")?);
                            }
                            _ => break,
                        }
                    }
                    let new = if let Some(p) = ledger.pending.take() {
                        // The residual curve already lives in the lattice.
                        let n = name.clone().unwrap_or(p);
                        ledger.exceptionals.push(n.clone());
                        if exceptional > 0 {
                            ledger.components.push(n);
                        }
                        cur.done()?;
                        scope.ledger = Some(ledger);
                        return Ok(Step { through, exceptional, b_drop, name });
                    } else {
                        match (&scope.kind, &name) {
                            (Kind::Blowup(k), None) => {
                                let k = *k + 1;
                                scope.kind = Kind::Blowup(k);
                                format!("e{k}")
                            }
                            (Kind::Blowup(k), Some(n)) if *n == format!("e{}", k + 1) => {
                                scope.kind = Kind::Blowup(k + 1);
                                n.clone()
                            }
                            (_, n) => {
                                scope.kind = Kind::Abstract;
                                n.clone().unwrap_or_else(|| format!("x{}", ledger.exceptionals.len() + 1))
                            }
                        }
                    };
                    scope.gens.push(new.clone());
                    if exceptional > 0 {
                        ledger.components.push(new.clone());
                    }
                    ledger.exceptionals.push(new);
                    Step { through, exceptional, b_drop, name }
                }
                _ => {
                    let mut name = "Bt".to_string();
                    let mut genus = 2;
                    while let Some(t) = cur.peek() {
                        match t {
                            "as" => {
                                cur.next("as")?;
                                name = cur.word("class name")?;
                            }
                            "genus" => {
                                cur.next("genus")?;
                                genus = cur.int("genus")?;
                            }
                            _ => break,
                        }
                    }
                    for c in &ledger.components {
                        scope.classes.insert(format!("A_{c}"));
                    }
                    scope.classes.insert(name.clone());
                    scope.ledger = None;
                    cur.done()?;
                    return Ok(Finalize { name, genus });
                }
            };
            scope.ledger = Some(ledger);
            st
        }
        "plumbing" => {
            need_surface(&cur, scope)?;
            let c = cur.col();
            let p = cur.int("p")?;
            let q = cur.int("q")?;
            let w = hj_expansion(p, q).or_else(|e| cur.err(c, e.to_string()))?;
            scope.chain_len = Some(w.len());
            Plumbing { p, q }
        }
        "embed" => {
            let Some(len) = scope.chain_len else { return cur.err(head_col + 1, "no plumbing declared") };
            let (c, t) = cur.next("vertex u<i>")?;
            let index: usize = t
                .strip_prefix('u')
                .and_then(|s| s.parse().ok())
                .filter(|&i| i >= 1 && i <= len)
                .map_or_else(|| cur.err(c + 1, format!("vertex `{t}` not in u1..u{len}")), Ok)?;
            cur.keyword("=")?;
            let (col, text) = cur.rest();
            Embed { index, terms: terms_at(&cur, col, text, scope, &[])? }
        }
        "blowdown" => {
            if scope.chain_len.take().is_none() {
                return cur.err(head_col + 1, "no plumbing declared");
            }
            Blowdown
        }
        "pair" => {
            let a = class_ref(&mut cur, scope, "class")?;
            let b = class_ref(&mut cur, scope, "class")?;
            Pair { a, b }
        }
        "descent" => Descent(class_ref(&mut cur, scope, "class")?),
        "symplectic" => {
            need_surface(&cur, scope)?;
            let w = cur.word("name")?;
            scope.symplectic.insert(w.clone());
            Symplectic(w)
        }
        "functional" => {
            let k = class_ref(&mut cur, scope, "class")?;
            let col = cur.col();
            let w = cur.word("symplectic class")?;
            if !scope.symplectic.contains(&w) {
                return cur.err(col, format!("undefined symplectic class `{w}`"));
            }
            Functional { k, w }
        }
        "compare" => {
            let (c, which) = cur.next("`exotic` or `restricted`")?;
            let form = match which {
                "exotic" => ComparedForm::Exotic,
                "restricted" => ComparedForm::Restricted,
                _ => return cur.err(c + 1, "expected `exotic` or `restricted`"),
            };
            let (c, s) = cur.next("scale")?;
            let scale: BigRational = s.parse().or_else(|_| cur.err(c + 1, format!("bad scale `{s}`")))?;
            if scale.is_zero() {
                return cur.err(c + 1, "scale must be nonzero");
            }
            Compare { form, scale, text: cur.string("linear form")? }
        }
        "sw" => {
            let (c, op) = cur.next("sw operation")?;
            Sw(match op {
                "zero" => SwOp::Zero,
                "taubes" => SwOp::Taubes,
                "minimality" => SwOp::Minimality,
                "blowup" => {
                    let col = cur.col();
                    let g = cur.word("exceptional generator")?;
                    if !scope.gens.contains(&g) {
                        return cur.err(col, format!("undefined symbol `{g}`"));
                    }
                    SwOp::Blowup(g)
                }
                _ => return cur.err(c + 1, format!("unknown sw operation `{op}`")),
            })
        }
        "fibration" => Fibration {
            kf2: cur.int("K_f^2")?,
            chi: cur.int("chi_f")?,
            g: cur.int("genus")?,
            b: cur.int("base genus")?,
        },
        "claim" => {
            let (c, key) = cur.next("key")?;
            if !is_key(key) {
                return cur.err(c + 1, format!("bad key `{key}`"));
            }
            Claim { key: key.to_string(), text: cur.string("claimed value")? }
        }
        "verdict" => Verdict(if cur.peek().is_some() { cur.word("tag")? } else { "result".into() }),
        "assert" => {
            let (c, key) = cur.next("key")?;
            if !is_key(key) {
                return cur.err(c + 1, format!("bad key `{key}`"));
            }
            let value = match cur.peek() {
                Some(t) if t.starts_with('"') => cur.string("value")?,
                _ => cur.next("value")?.1.to_string(),
            };
            Assert { key: key.to_string(), value }
        }
        "report" => Report(cur.peek().map(str::to_string).map(|p| {
            cur.at += 1;
            p
        })),
        other => return cur.err(head_col + 1, format!("unknown statement `{other}`")),
    };
    cur.done()?;
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_plan_parses() {
        let text = "surface blowup 17\nclass s = 8h -4e1 -2e2 -2e17\nplumbing 11 1\nembed u1 = s\nblowdown\nreport\n";
        let plan = parse(text).unwrap();
        assert_eq!(plan.len(), 6);
        assert_eq!(parse(&plan.to_string()).unwrap().statements.iter().map(|s| &s.statement).collect::<Vec<_>>(),
            plan.statements.iter().map(|s| &s.statement).collect::<Vec<_>>());
    }

    #[test]
    fn undefined_generator() {
        let err = parse("surface blowup 2\nclass x = 2h + 3q7").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("q7"), "{err}");
        assert_eq!(err.column, 17);
        let err = parse("surface blowup 12\nclass x = e12 - e1x").unwrap_err();
        assert_eq!(err.column, 17);
    }

    #[test]
    fn arity_and_context_errors() {
        assert!(parse("surface blowup").unwrap_err().message.contains("arity"));
        assert!(parse("class x = h").unwrap_err().message.contains("no surface"));
        assert!(parse("surface blowup 1\nembed u1 = h").unwrap_err().message.contains("no plumbing"));
        assert!(parse("surface blowup 1\nplumbing 2 1\nembed u2 = h").is_err());
        assert!(parse("surface blowup 1\nfrobnicate").is_err());
        assert!(parse("surface blowup 1\nblowup\nclass x = e2").is_ok());
        assert!(parse("surface ruled 2\nclass x = C0 + F").is_ok());
        assert!(parse("surface ruled 2\nclass x = h").is_err());
    }

    #[test]
    fn ledger_scope() {
        let text = "surface ruled 2\nledger\ncomponent F = F mult 5\ncomponent C0 = C0 mult 2\nfiber 2C0+5F\nconvert\n\
                    step F:1 C0:1 exc 6\nstep e:1 F:1 exc 10\nstep e3:1 exc 0\nfinalize as Bt genus 2\nclass y = Bt - A_e3 + e4";
        let plan = parse(text).unwrap();
        assert_eq!(plan.len(), 11);
        assert!(parse("surface ruled 2\nledger\ncomponent F = F mult 5\nconvert\nstep G:1 exc 1").is_err());
    }
}
