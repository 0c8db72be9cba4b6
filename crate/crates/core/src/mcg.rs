//! Words in the Dehn twists about the standard chain a₁, …, a_{2g+1} on a
//! closed genus-g surface, their elementary rewrites, and their action on
//! first homology.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::linalg::{rank, IntMatrix};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum McgError {
    #[error("generator a{index} out of range for genus {genus}")]
    OutOfRange { index: u32, genus: u32 },
    #[error("cannot parse word at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("{mv} does not apply: {reason}")]
    NotApplicable { mv: String, reason: String },
    #[error("line {line}: {message}")]
    Derivation { line: usize, message: String },
    #[error("invalid chain homology: {0}")]
    Homology(String),
}

type Result<T> = std::result::Result<T, McgError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Letter {
    pub index: u32,
    pub inverse: bool,
}

impl Letter {
    pub fn pos(index: u32) -> Self {
        Letter { index, inverse: false }
    }

    pub fn neg(index: u32) -> Self {
        Letter { index, inverse: true }
    }

    pub fn inv(self) -> Self {
        Letter { index: self.index, inverse: !self.inverse }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inverse { write!(f, "a{}^-1", self.index) } else { write!(f, "a{}", self.index) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TwistWord {
    genus: u32,
    letters: Vec<Letter>,
}

impl TwistWord {
    pub fn new(genus: u32, letters: Vec<Letter>) -> Result<Self> {
        for l in &letters {
            if l.index == 0 || l.index > 2 * genus + 1 {
                return Err(McgError::OutOfRange { index: l.index, genus });
            }
        }
        Ok(TwistWord { genus, letters })
    }

    pub fn empty(genus: u32) -> Self {
        TwistWord { genus, letters: Vec::new() }
    }

    /// Parses a word, flattening any parenthesised groups.
    pub fn parse(genus: u32, text: &str) -> Result<Self> {
        let blocks = parse_blocks(genus, text)?;
        let letters = blocks.into_iter().flat_map(|b| b.letters).collect();
        Ok(TwistWord { genus, letters })
    }

    pub fn genus(&self) -> u32 {
        self.genus
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Self {
        TwistWord { genus: self.genus, letters: self.letters.iter().rev().map(|l| l.inv()).collect() }
    }

    pub fn concat(&self, other: &TwistWord) -> Self {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        TwistWord { genus: self.genus.max(other.genus), letters }
    }

    pub fn power(&self, n: u32) -> Self {
        TwistWord { genus: self.genus, letters: (0..n).flat_map(|_| self.letters.iter().copied()).collect() }
    }

    /// Cancels adjacent `x x⁻¹` pairs until none remain.
    pub fn free_reduce(&self) -> Self {
        let mut out: Vec<Letter> = Vec::with_capacity(self.letters.len());
        for &l in &self.letters {
            if out.last() == Some(&l.inv()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        TwistWord { genus: self.genus, letters: out }
    }
}

impl fmt::Display for TwistWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.letters.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(" "))
    }
}

/// `(a1 … a_{2g} a_{2g+1}² a_{2g} … a1)²`
pub fn hyperelliptic_relator(g: u32) -> TwistWord {
    let n = 2 * g + 1;
    let mut half: Vec<Letter> = (1..=n).map(Letter::pos).collect();
    half.push(Letter::pos(n));
    half.extend((1..n).rev().map(Letter::pos));
    TwistWord { genus: g, letters: half }.power(2)
}

/// `(a1 a2 … a_{2g+1})^{2g+2}`
pub fn chain_relator(g: u32) -> TwistWord {
    TwistWord { genus: g, letters: (1..=2 * g + 1).map(Letter::pos).collect() }.power(2 * g + 2)
}

/// Parses a word into blocks. Top-level parenthesised groups are blocks of
/// their own; runs of letters between groups form one block each. Groups
/// and letters accept an integer exponent such as `a5^2` or `(a1 a2)^-1`.
pub fn parse_blocks(genus: u32, text: &str) -> Result<Vec<TwistWord>> {
    let mut p = WordParser { text, bytes: text.as_bytes(), pos: 0, genus };
    let mut blocks = Vec::new();
    let mut run: Vec<Letter> = Vec::new();
    loop {
        p.skip_ws();
        match p.peek() {
            None => break,
            Some(b'(') => {
                if !run.is_empty() {
                    blocks.push(TwistWord { genus, letters: std::mem::take(&mut run) });
                }
                let g = p.group()?;
                blocks.push(TwistWord { genus, letters: g });
            }
            Some(_) => run.extend(p.atom()?),
        }
    }
    if !run.is_empty() {
        blocks.push(TwistWord { genus, letters: run });
    }
    Ok(blocks)
}

struct WordParser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    genus: u32,
}

impl WordParser<'_> {
    fn err<T>(&self, message: &str) -> Result<T> {
        Err(McgError::Syntax { offset: self.pos, message: message.to_string() })
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|b| b.is_ascii_whitespace() || b == b'*') {
            self.pos += 1;
        }
    }

    fn number(&mut self) -> Option<i64> {
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        let n = self.text[start..self.pos].parse().ok();
        if n.is_none() {
            self.pos = start;
        }
        n
    }

    fn exponent(&mut self) -> Result<i64> {
        if self.peek() != Some(b'^') {
            return Ok(1);
        }
        self.pos += 1;
        match self.number() {
            Some(n) => Ok(n),
            None => self.err("expected an integer exponent"),
        }
    }

    fn raise(letters: Vec<Letter>, exp: i64) -> Vec<Letter> {
        let base: Vec<Letter> = if exp < 0 { letters.iter().rev().map(|l| l.inv()).collect() } else { letters };
        (0..exp.unsigned_abs()).flat_map(|_| base.iter().copied()).collect()
    }

    fn atom(&mut self) -> Result<Vec<Letter>> {
        match self.peek() {
            Some(b'(') => self.group(),
            Some(b'a') => {
                self.pos += 1;
                let start = self.pos;
                while self.peek().is_some_and(|b| b.is_ascii_digit()) {
                    self.pos += 1;
                }
                let Ok(index) = self.text[start..self.pos].parse::<u32>() else {
                    return self.err("expected a generator index after `a`");
                };
                if index == 0 || index > 2 * self.genus + 1 {
                    return Err(McgError::OutOfRange { index, genus: self.genus });
                }
                let exp = self.exponent()?;
                Ok(Self::raise(vec![Letter::pos(index)], exp))
            }
            _ => self.err("expected a generator `a<i>` or `(`"),
        }
    }

    fn group(&mut self) -> Result<Vec<Letter>> {
        self.pos += 1;
        let mut inner = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b')') => {
                    self.pos += 1;
                    let exp = self.exponent()?;
                    return Ok(Self::raise(inner, exp));
                }
                None => return self.err("unclosed `(`"),
                Some(_) => inner.extend(self.atom()?),
            }
        }
    }
}

/// Elementary rewrites; positions are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    /// `x y → (x y x⁻¹) x`
    HurwitzRight(usize),
    /// `x y → y (y⁻¹ x y)`
    HurwitzLeft(usize),
    /// Braid relation on three letters, in any exponent pattern it covers.
    Braid(usize),
    /// Swap two letters on disjoint (or equal) curves.
    Commute(usize),
    /// Insert `x x⁻¹` before the position.
    Insert(usize, Letter),
    /// Delete an adjacent `x x⁻¹` pair.
    Cancel(usize),
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Move::HurwitzRight(i) => write!(f, "HR {i}"),
            Move::HurwitzLeft(i) => write!(f, "HL {i}"),
            Move::Braid(i) => write!(f, "BRAID {i}"),
            Move::Commute(i) => write!(f, "COMM {i}"),
            Move::Insert(i, l) => write!(f, "INS {i} {l}"),
            Move::Cancel(i) => write!(f, "CANCEL {i}"),
        }
    }
}

impl Move {
    pub fn parse(genus: u32, line: &str) -> Result<Move> {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let bad = |m: &str| McgError::Syntax { offset: 0, message: format!("{m}: `{line}`") };
        let pos = |t: Option<&&str>| -> Result<usize> {
            t.and_then(|s| s.parse::<usize>().ok()).filter(|&i| i >= 1).ok_or_else(|| bad("expected a 1-based position"))
        };
        let mv = match toks.first().copied() {
            Some("HR") => Move::HurwitzRight(pos(toks.get(1))?),
            Some("HL") => Move::HurwitzLeft(pos(toks.get(1))?),
            Some("BRAID") => Move::Braid(pos(toks.get(1))?),
            Some("COMM") => Move::Commute(pos(toks.get(1))?),
            Some("CANCEL") => Move::Cancel(pos(toks.get(1))?),
            Some("INS") => {
                let i = pos(toks.get(1))?;
                let w = TwistWord::parse(genus, toks.get(2).ok_or_else(|| bad("INS needs a letter"))?)?;
                if w.len() != 1 {
                    return Err(bad("INS takes a single letter"));
                }
                Move::Insert(i, w.letters[0])
            }
            _ => return Err(bad("unknown move")),
        };
        let expected = match mv {
            Move::Insert(..) => 3,
            _ => 2,
        };
        if toks.len() != expected {
            return Err(bad("wrong number of arguments"));
        }
        Ok(mv)
    }
}

fn braid_image(x: Letter, y: Letter, z: Letter) -> Option<[Letter; 3]> {
    if x.index != z.index || x.index.abs_diff(y.index) != 1 {
        return None;
    }
    let (a, b) = (x.index, y.index);
    let mk = |i, inv| Letter { index: i, inverse: inv };
    // x^α y^β x^γ = y^α' x^β' y^γ'
    let (p, q, r) = match (x.inverse, y.inverse, z.inverse) {
        (false, false, false) => (false, false, false),
        (true, true, true) => (true, true, true),
        (false, false, true) => (true, false, false),
        (true, false, false) => (false, false, true),
        (false, true, true) => (true, true, false),
        (true, true, false) => (false, true, true),
        _ => return None,
    };
    Some([mk(b, p), mk(a, q), mk(b, r)])
}

pub fn apply_move(word: &TwistWord, mv: &Move) -> Result<TwistWord> {
    let l = &word.letters;
    let fail = |reason: &str| McgError::NotApplicable { mv: mv.to_string(), reason: reason.to_string() };
    let need = |i: usize, n: usize| -> Result<usize> {
        if i >= 1 && i - 1 + n <= l.len() { Ok(i - 1) } else { Err(fail("position out of range")) }
    };
    let mut out = l.clone();
    match *mv {
        Move::HurwitzRight(i) => {
            let k = need(i, 2)?;
            let (x, y) = (l[k], l[k + 1]);
            out.splice(k..k + 2, [x, y, x.inv(), x]);
        }
        Move::HurwitzLeft(i) => {
            let k = need(i, 2)?;
            let (x, y) = (l[k], l[k + 1]);
            out.splice(k..k + 2, [y, y.inv(), x, y]);
        }
        Move::Braid(i) => {
            let k = need(i, 3)?;
            let img = braid_image(l[k], l[k + 1], l[k + 2])
                .ok_or_else(|| fail("letters are not a braid pattern on adjacent curves"))?;
            out.splice(k..k + 3, img);
        }
        Move::Commute(i) => {
            let k = need(i, 2)?;
            let (x, y) = (l[k], l[k + 1]);
            if x.index.abs_diff(y.index) == 1 {
                return Err(fail("adjacent chain curves do not commute"));
            }
            out.swap(k, k + 1);
        }
        Move::Insert(i, x) => {
            if i == 0 || i > l.len() + 1 {
                return Err(fail("position out of range"));
            }
            if x.index == 0 || x.index > 2 * word.genus + 1 {
                return Err(McgError::OutOfRange { index: x.index, genus: word.genus });
            }
            out.splice(i - 1..i - 1, [x, x.inv()]);
        }
        Move::Cancel(i) => {
            let k = need(i, 2)?;
            if l[k + 1] != l[k].inv() {
                return Err(fail("letters are not inverse to each other"));
            }
            out.drain(k..k + 2);
        }
    }
    Ok(TwistWord { genus: word.genus, letters: out })
}

/// Which fiber shape a factorization block describes, judged on homology.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    NodalSpherical(usize),
    LefschetzNodal,
    Other,
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockKind::NodalSpherical(n) => write!(f, "spherical {n}-nodal"),
            BlockKind::LefschetzNodal => f.write_str("lefschetz nodal"),
            BlockKind::Other => f.write_str("other"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerivationStep {
    pub line: usize,
    pub mv: Move,
    pub expect: Option<TwistWord>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    pub genus: u32,
    pub start: TwistWord,
    pub steps: Vec<DerivationStep>,
    pub end: Vec<TwistWord>,
    /// Claimed shapes of end blocks (0-based block index).
    pub claims: Vec<(usize, BlockKind)>,
}

impl Derivation {
    /// Line-oriented format:
    ///
    /// ```text
    /// genus 2
    /// start a1 a2 a3 a4
    /// HR 3
    /// expect a1 a2 a3 a4 a3^-1 a3
    /// end (a4^-1 a1 a3 a4)(a4^-1 a3^-1 a2 a4 a3 a4)
    /// fiber 1 spherical 2
    /// ```
    pub fn parse(text: &str) -> Result<Derivation> {
        let mut genus = None;
        let mut start = None;
        let mut steps: Vec<DerivationStep> = Vec::new();
        let mut end = None;
        let mut claims = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |e: McgError| McgError::Derivation { line: line_no, message: e.to_string() };
            let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            if head == "genus" {
                genus = Some(rest.parse::<u32>().map_err(|_| McgError::Derivation {
                    line: line_no,
                    message: "genus must be a positive integer".into(),
                })?);
                continue;
            }
            let g = genus.ok_or(McgError::Derivation { line: line_no, message: "`genus` must come first".into() })?;
            match head {
                "start" => start = Some(TwistWord::parse(g, rest).map_err(at)?),
                "expect" => {
                    let w = TwistWord::parse(g, rest).map_err(at)?;
                    match steps.last_mut() {
                        Some(s) if s.expect.is_none() => s.expect = Some(w),
                        _ => {
                            return Err(McgError::Derivation {
                                line: line_no,
                                message: "`expect` must follow a move".into(),
                            })
                        }
                    }
                }
                "end" => end = Some(parse_blocks(g, rest).map_err(at)?),
                "fiber" => {
                    let toks: Vec<&str> = rest.split_whitespace().collect();
                    let bad = || McgError::Derivation { line: line_no, message: format!("bad fiber claim `{rest}`") };
                    let idx: usize = toks.first().and_then(|t| t.parse().ok()).filter(|&i| i >= 1).ok_or_else(bad)?;
                    let kind = match (toks.get(1).copied(), toks.get(2)) {
                        (Some("spherical"), Some(n)) => BlockKind::NodalSpherical(n.parse().map_err(|_| bad())?),
                        (Some("lefschetz"), None) => BlockKind::LefschetzNodal,
                        (Some("other"), None) => BlockKind::Other,
                        _ => return Err(bad()),
                    };
                    claims.push((idx - 1, kind));
                }
                _ => steps.push(DerivationStep { line: line_no, mv: Move::parse(g, line).map_err(at)?, expect: None }),
            }
        }
        let missing = |what: &str| McgError::Derivation { line: 0, message: format!("missing `{what}`") };
        Ok(Derivation {
            genus: genus.ok_or_else(|| missing("genus"))?,
            start: start.ok_or_else(|| missing("start"))?,
            steps,
            end: end.ok_or_else(|| missing("end"))?,
            claims,
        })
    }

    pub fn end_word(&self) -> TwistWord {
        TwistWord { genus: self.genus, letters: self.end.iter().flat_map(|b| b.letters.iter().copied()).collect() }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("genus {}\nstart {}\n", self.genus, self.start);
        for st in &self.steps {
            s.push_str(&format!("{}\n", st.mv));
            if let Some(w) = &st.expect {
                s.push_str(&format!("expect {w}\n"));
            }
        }
        let blocks: Vec<String> = self.end.iter().map(|b| format!("({b})")).collect();
        s.push_str(&format!("end {}\n", blocks.join("")));
        for (i, k) in &self.claims {
            let kind = match k {
                BlockKind::NodalSpherical(n) => format!("spherical {n}"),
                BlockKind::LefschetzNodal => "lefschetz".into(),
                BlockKind::Other => "other".into(),
            };
            s.push_str(&format!("fiber {} {kind}\n", i + 1));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerivationOutcome {
    pub ok: bool,
    /// 1-based index of the first failing move; `steps + 1` when only the end word differs.
    pub failing_step: Option<usize>,
    pub reason: Option<String>,
    pub checkpoints: usize,
    pub last_word: TwistWord,
}

pub fn verify_derivation(d: &Derivation) -> DerivationOutcome {
    let mut w = d.start.clone();
    let mut checkpoints = 0;
    for (i, st) in d.steps.iter().enumerate() {
        let fail = |reason: String, w: TwistWord| DerivationOutcome {
            ok: false,
            failing_step: Some(i + 1),
            reason: Some(format!("line {}: {reason}", st.line)),
            checkpoints,
            last_word: w,
        };
        match apply_move(&w, &st.mv) {
            Ok(next) => w = next,
            Err(e) => return fail(e.to_string(), w),
        }
        if let Some(exp) = &st.expect {
            if *exp != w {
                return fail(format!("expected `{exp}`, got `{w}`"), w);
            }
            checkpoints += 1;
        }
    }
    if w != d.end_word() {
        return DerivationOutcome {
            ok: false,
            failing_step: Some(d.steps.len() + 1),
            reason: Some(format!("final word `{w}` differs from `{}`", d.end_word())),
            checkpoints,
            last_word: w,
        };
    }
    DerivationOutcome { ok: true, failing_step: None, reason: None, checkpoints, last_word: w }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TwistSign {
    /// T_c(x) = x + ⟨x,c⟩c for a positive twist.
    #[default]
    Plus,
    /// T_c(x) = x - ⟨x,c⟩c for a positive twist.
    Minus,
}

/// Homology classes of the chain curves in coordinates (x₁…x_g, y₁…y_g),
/// with ⟨xᵢ, yⱼ⟩ = δᵢⱼ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainHomology {
    genus: u32,
    classes: Vec<Vec<BigInt>>,
    sign: TwistSign,
}

impl ChainHomology {
    /// c_{2i-1} = xᵢ, c_{2i} = yᵢ - y_{i+1} (yg for i = g), c_{2g+1} = x₁ + … + x_g.
    pub fn standard(genus: u32) -> Self {
        let g = genus as usize;
        let unit = |k: usize| {
            let mut v = vec![BigInt::zero(); 2 * g];
            v[k] = BigInt::one();
            v
        };
        let mut classes = Vec::new();
        for i in 0..g {
            classes.push(unit(i));
            let mut y = unit(g + i);
            if i + 1 < g {
                y[g + i + 1] = BigInt::from(-1);
            }
            classes.push(y);
        }
        classes.push((0..2 * g).map(|k| if k < g { BigInt::one() } else { BigInt::zero() }).collect());
        Self::new(genus, classes, TwistSign::Plus).expect("standard chain is valid")
    }

    pub fn new(genus: u32, classes: Vec<Vec<BigInt>>, sign: TwistSign) -> Result<Self> {
        let n = 2 * genus as usize + 1;
        if classes.len() != n || classes.iter().any(|c| c.len() != 2 * genus as usize) {
            return Err(McgError::Homology(format!("need {n} vectors of length {}", 2 * genus)));
        }
        let h = ChainHomology { genus, classes, sign };
        for i in 0..n {
            if h.classes[i].iter().all(Zero::is_zero) {
                return Err(McgError::Homology(format!("c{} is zero", i + 1)));
            }
            for j in i + 1..n {
                let p = h.form(&h.classes[i], &h.classes[j]);
                let ok = if j == i + 1 { p == BigInt::one() || p == BigInt::from(-1) } else { p.is_zero() };
                if !ok {
                    return Err(McgError::Homology(format!("<c{}, c{}> = {p}", i + 1, j + 1)));
                }
            }
        }
        Ok(h)
    }

    pub fn with_sign(mut self, sign: TwistSign) -> Self {
        self.sign = sign;
        self
    }

    pub fn genus(&self) -> u32 {
        self.genus
    }

    pub fn class(&self, index: u32) -> &[BigInt] {
        &self.classes[index as usize - 1]
    }

    pub fn form(&self, u: &[BigInt], v: &[BigInt]) -> BigInt {
        let g = self.genus as usize;
        (0..g).map(|i| &u[i] * &v[g + i] - &u[g + i] * &v[i]).sum()
    }

    /// Matrix of the twist (or its inverse) about one chain curve.
    pub fn letter_matrix(&self, l: Letter) -> IntMatrix {
        let dim = 2 * self.genus as usize;
        let c = self.class(l.index);
        let mut s: i64 = if self.sign == TwistSign::Plus { 1 } else { -1 };
        if l.inverse {
            s = -s;
        }
        let mut m = IntMatrix::identity(dim);
        for j in 0..dim {
            let mut ej = vec![BigInt::zero(); dim];
            ej[j] = BigInt::one();
            let f = self.form(&ej, c) * s;
            if f.is_zero() {
                continue;
            }
            for i in 0..dim {
                let v = m.get(i, j) + &f * &c[i];
                m.set(i, j, v);
            }
        }
        m
    }
}

/// Left-to-right product of the letters' matrices.
pub fn word_to_matrix(word: &TwistWord, hom: &ChainHomology) -> IntMatrix {
    let dim = 2 * hom.genus as usize;
    word.letters.iter().fold(IntMatrix::identity(dim), |acc, &l| acc.mul(&hom.letter_matrix(l)))
}

pub fn is_symplectic(m: &IntMatrix, genus: u32) -> bool {
    let g = genus as usize;
    let mut j = IntMatrix::zeros(2 * g, 2 * g);
    for i in 0..g {
        j.set(i, g + i, BigInt::one());
        j.set(g + i, i, BigInt::from(-1));
    }
    m.transpose().mul(&j).mul(m) == j
}

/// A conjugate `u · core · u⁻¹` of a single twist.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factor {
    pub conjugator: Vec<Letter>,
    pub core: Letter,
}

/// Splits a word into conjugates of single positive twists, if it has that shape.
pub fn conjugate_factors(word: &TwistWord) -> Option<Vec<Factor>> {
    let mut memo = HashMap::new();
    split(&word.letters, 0, word.letters.len(), &mut memo)
}

type Memo = HashMap<(usize, usize), Option<Vec<Factor>>>;

fn split(l: &[Letter], lo: usize, hi: usize, memo: &mut Memo) -> Option<Vec<Factor>> {
    if lo == hi {
        return Some(Vec::new());
    }
    if let Some(r) = memo.get(&(lo, hi)) {
        return r.clone();
    }
    let mut result = None;
    // A common conjugator wrapped around the whole range.
    if hi - lo >= 3 && l[lo] == l[hi - 1].inv() {
        if let Some(inner) = split(l, lo + 1, hi - 1, memo) {
            if !inner.is_empty() {
                result = Some(
                    inner
                        .into_iter()
                        .map(|mut f| {
                            f.conjugator.insert(0, l[lo]);
                            f
                        })
                        .collect(),
                );
            }
        }
    }
    if result.is_none() {
        // Peel off a leading `u x u⁻¹`.
        let mut u = 0;
        while lo + 2 * u < hi {
            let len = 2 * u + 1;
            let mirrored = (0..u).all(|t| l[lo + len - 1 - t] == l[lo + t].inv());
            if mirrored && !l[lo + u].inverse {
                if let Some(rest) = split(l, lo + len, hi, memo) {
                    let mut v = vec![Factor { conjugator: l[lo..lo + u].to_vec(), core: l[lo + u] }];
                    v.extend(rest);
                    result = Some(v);
                    break;
                }
            }
            u += 1;
        }
    }
    memo.insert((lo, hi), result.clone());
    result
}

/// Homology class of the curve `u(c)` for a factor `u · a_c · u⁻¹`.
pub fn factor_class(f: &Factor, hom: &ChainHomology) -> Vec<BigInt> {
    let w = TwistWord { genus: hom.genus, letters: f.conjugator.clone() };
    word_to_matrix(&w, hom).mul_vec(hom.class(f.core.index))
}

/// Judges a block on homology only: g positive cores with nonzero, pairwise
/// orthogonal, linearly independent classes give a spherical g-nodal fiber;
/// a single positive core gives a Lefschetz nodal fiber.
pub fn classify_block(block: &TwistWord, hom: &ChainHomology) -> BlockKind {
    let Some(factors) = conjugate_factors(block) else { return BlockKind::Other };
    if factors.is_empty() {
        return BlockKind::Other;
    }
    let classes: Vec<Vec<BigInt>> = factors.iter().map(|f| factor_class(f, hom)).collect();
    if classes.iter().any(|c| c.iter().all(Zero::is_zero)) {
        return BlockKind::Other;
    }
    if classes.len() == 1 {
        return BlockKind::LefschetzNodal;
    }
    let n = classes.len();
    let disjoint = (0..n).all(|i| (i + 1..n).all(|j| hom.form(&classes[i], &classes[j]).is_zero()));
    if disjoint && n == hom.genus as usize && rank(&classes) == n {
        BlockKind::NodalSpherical(n)
    } else {
        BlockKind::Other
    }
}

/// Moves rewriting `a1 a2 … a_{2g}` (optionally followed by `a_{2g+1}`) into
/// `(a1 a3 … a_{2g-1})` times a remainder, by Hurwitz moves and commutations.
pub fn odd_chain_split(genus: u32, with_last: bool) -> Derivation {
    let mut start: Vec<Letter> = (1..=2 * genus).map(Letter::pos).collect();
    if with_last {
        start.push(Letter::pos(2 * genus + 1));
    }
    let start = TwistWord { genus, letters: start };
    let mut w = start.clone();
    let mut steps = Vec::new();
    let mut line = 3;
    let mut push = |w: &mut TwistWord, mv: Move| {
        *w = apply_move(w, &mv).expect("generated move applies");
        steps.push(DerivationStep { line, mv, expect: None });
        line += 1;
    };
    for i in 1..genus {
        let odd = 2 * i + 1;
        // The untouched pair a_{2i} a_{2i+1} sits right after the last rewrite.
        let k = w
            .letters
            .windows(2)
            .rposition(|p| p[0] == Letter::pos(2 * i) && p[1] == Letter::pos(odd))
            .expect("pair present");
        push(&mut w, Move::HurwitzLeft(k + 1));
        let mut at = k + 1;
        while at > i as usize + 1 {
            push(&mut w, Move::Commute(at - 1));
            at -= 1;
        }
    }
    if let Some(last) = steps.last_mut() {
        last.expect = Some(w.clone());
    }
    let g = genus as usize;
    let head = TwistWord { genus, letters: w.letters[..g].to_vec() };
    let tail = TwistWord { genus, letters: w.letters[g..].to_vec() };
    Derivation { genus, start, steps, end: vec![head, tail], claims: vec![(0, BlockKind::NodalSpherical(g))] }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(g: u32, s: &str) -> TwistWord {
        TwistWord::parse(g, s).unwrap()
    }

    #[test]
    fn parse_and_print() {
        let x = w(2, "a1 a2^-1 (a3 a4)^-1 a5^2");
        assert_eq!(x.to_string(), "a1 a2^-1 a4^-1 a3^-1 a5 a5");
        assert!(matches!(TwistWord::parse(2, "a6"), Err(McgError::OutOfRange { .. })));
        assert!(matches!(TwistWord::parse(2, "b1"), Err(McgError::Syntax { .. })));
        let blocks = parse_blocks(2, "(a1 a4)(a2 a5)a5^-1 a3 a4 a3^-1 a5").unwrap();
        assert_eq!(blocks.len(), 3);
        assert_eq!(blocks[2].to_string(), "a5^-1 a3 a4 a3^-1 a5");
    }

    #[test]
    fn elementary_moves() {
        let x = w(2, "a3 a4");
        assert_eq!(apply_move(&x, &Move::HurwitzRight(1)).unwrap(), w(2, "a3 a4 a3^-1 a3"));
        assert_eq!(apply_move(&x, &Move::HurwitzLeft(1)).unwrap(), w(2, "a4 a4^-1 a3 a4"));
        assert_eq!(apply_move(&w(2, "a3 a4 a3"), &Move::Braid(1)).unwrap(), w(2, "a4 a3 a4"));
        assert_eq!(apply_move(&w(2, "a1 a3"), &Move::Commute(1)).unwrap(), w(2, "a3 a1"));
        assert!(apply_move(&w(2, "a1 a2"), &Move::Commute(1)).is_err());
        assert!(apply_move(&w(2, "a1 a3 a1"), &Move::Braid(1)).is_err());
        assert!(apply_move(&w(2, "a3 a4^-1 a3"), &Move::Braid(1)).is_err());
        assert_eq!(apply_move(&w(2, "a1"), &Move::Insert(2, Letter::neg(4))).unwrap(), w(2, "a1 a4^-1 a4"));
        assert_eq!(apply_move(&w(2, "a1 a4 a4^-1"), &Move::Cancel(2)).unwrap(), w(2, "a1"));
        assert!(apply_move(&w(2, "a1 a4"), &Move::Cancel(1)).is_err());
    }

    #[test]
    fn standard_homology_is_valid() {
        for g in 1..=4 {
            ChainHomology::standard(g);
        }
        let h = ChainHomology::standard(2);
        let bad = vec![h.class(1).to_vec(); 5];
        assert!(ChainHomology::new(2, bad, TwistSign::Plus).is_err());
    }

    fn transvection_oracle(g: usize, c: &[i64], s: i64) -> Vec<Vec<i64>> {
        // x ↦ x + s⟨x,c⟩c written out entrywise.
        let form = |u: &[i64], v: &[i64]| (0..g).map(|i| u[i] * v[g + i] - u[g + i] * v[i]).sum::<i64>();
        let mut m = vec![vec![0; 2 * g]; 2 * g];
        for j in 0..2 * g {
            let mut e = vec![0; 2 * g];
            e[j] = 1;
            let f = form(&e, c) * s;
            for i in 0..2 * g {
                m[i][j] = e[i] + f * c[i];
            }
        }
        m
    }

    fn oracle_product(g: usize, word: &TwistWord, h: &ChainHomology) -> Vec<Vec<i64>> {
        let mut acc: Vec<Vec<i64>> = (0..2 * g).map(|i| (0..2 * g).map(|j| i64::from(i == j)).collect()).collect();
        for l in word.letters() {
            let c: Vec<i64> = h.class(l.index).iter().map(|x| i64::try_from(x).unwrap()).collect();
            let t = transvection_oracle(g, &c, if l.inverse { -1 } else { 1 });
            acc = (0..2 * g)
                .map(|i| (0..2 * g).map(|j| (0..2 * g).map(|k| acc[i][k] * t[k][j]).sum()).collect())
                .collect();
        }
        acc
    }

    #[test]
    fn relators_act_trivially() {
        for g in 2..=3 {
            let h = ChainHomology::standard(g);
            let id = IntMatrix::identity(2 * g as usize);
            assert_eq!(word_to_matrix(&hyperelliptic_relator(g), &h), id);
            assert_eq!(word_to_matrix(&chain_relator(g), &h), id);
            let oracle = oracle_product(g as usize, &chain_relator(g), &h);
            assert_eq!(IntMatrix::from_rows(&oracle), id);
        }
        assert_eq!(word_to_matrix(&TwistWord::empty(2), &ChainHomology::standard(2)), IntMatrix::identity(4));
    }

    #[test]
    fn matrices_match_oracle_and_are_symplectic() {
        let h = ChainHomology::standard(2);
        let x = w(2, "a1 a2 a3^-1 a5 a4 a2^-1");
        let m = word_to_matrix(&x, &h);
        assert_eq!(m, IntMatrix::from_rows(&oracle_product(2, &x, &h)));
        assert!(is_symplectic(&m, 2));
    }

    #[test]
    fn block_shapes() {
        let h = ChainHomology::standard(2);
        let c = |s: &str| classify_block(&w(2, s), &h);
        assert_eq!(c("a4^-1 a1 a3 a4"), BlockKind::NodalSpherical(2));
        assert_eq!(c("a4^-1 a3^-1 a2 a4 a3 a4"), BlockKind::NodalSpherical(2));
        assert_eq!(c("a1 a4"), BlockKind::NodalSpherical(2));
        assert_eq!(c("a2 a5"), BlockKind::NodalSpherical(2));
        assert_eq!(c("a5^-1 a3 a4 a3^-1 a5"), BlockKind::LefschetzNodal);
        assert_eq!(c("a1 a2"), BlockKind::Other);
        assert_eq!(c("a1^-1"), BlockKind::Other);
        assert_eq!(c("a1 a1"), BlockKind::Other);
    }

    #[test]
    fn genus_three_blocks() {
        let h = ChainHomology::standard(3);
        let c = |s: &str| classify_block(&w(3, s), &h);
        assert_eq!(c("a1 a2 a1^-1 (a1 a3 a5) (a1 a2 a1^-1)^-1"), BlockKind::NodalSpherical(3));
        assert_eq!(c("(a1 a2 a1^-1)(a5^-1 a4 a5) a7"), BlockKind::NodalSpherical(3));
        assert_eq!(c("a7^-1 a6 a7"), BlockKind::LefschetzNodal);
    }

    #[test]
    fn generated_odd_chain_splits_verify() {
        for g in 2..=4 {
            for last in [false, true] {
                let d = odd_chain_split(g, last);
                let out = verify_derivation(&d);
                assert!(out.ok, "{:?}", out.reason);
                let h = ChainHomology::standard(g);
                assert_eq!(classify_block(&d.end[0], &h), BlockKind::NodalSpherical(g as usize));
                assert_eq!(word_to_matrix(&d.start, &h), word_to_matrix(&d.end_word(), &h));
                assert_eq!(Derivation::parse(&d.to_text()).unwrap(), d);
            }
        }
    }

    #[test]
    fn derivation_failure_is_reported() {
        let text = "genus 2\nstart a1 a2\nCOMM 1\nend a2 a1\n";
        let out = verify_derivation(&Derivation::parse(text).unwrap());
        assert!(!out.ok);
        assert_eq!(out.failing_step, Some(1));
        let text = "genus 2\nstart a1 a3\nCOMM 1\nexpect a1 a3\nend a3 a1\n";
        let out = verify_derivation(&Derivation::parse(text).unwrap());
        assert_eq!(out.failing_step, Some(1));
        let text = "genus 2\nstart a1 a3\nCOMM 1\nend a1 a3\n";
        assert_eq!(verify_derivation(&Derivation::parse(text).unwrap()).failing_step, Some(2));
    }
}
