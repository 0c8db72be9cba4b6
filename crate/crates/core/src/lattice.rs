//! Integer intersection lattices, divisor classes and the numerical
//! invariants (e, σ, parity) that travel with them through surgery.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::linalg::IntMatrix;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("classes live in different lattices")]
    Mismatch,
    #[error("lattice has no canonical class")]
    NoCanonical,
    #[error("unknown generator or class `{0}`")]
    UnknownSymbol(String),
    #[error("malformed class expression at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("operation needs a blow-up lattice, got {0}")]
    WrongKind(String),
    #[error("resolution needs at least two classes")]
    TooFewClasses,
    #[error("no homeomorphism label: {0}")]
    Unsupported(String),
    #[error("inconsistent invariants: {0}")]
    Invariants(String),
    #[error("gram matrix is not symmetric")]
    Asymmetric,
    #[error("duplicate generator `{0}`")]
    Duplicate(String),
}

pub type Result<T> = std::result::Result<T, LatticeError>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LatticeKind {
    Blowup(usize),
    Ruled(u32),
    Abstract,
}

impl fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatticeKind::Blowup(k) => write!(f, "blowup({k})"),
            LatticeKind::Ruled(n) => write!(f, "ruled({n})"),
            LatticeKind::Abstract => f.write_str("abstract"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntersectionLattice {
    kind: LatticeKind,
    names: Vec<String>,
    gram: IntMatrix,
    canonical: Option<Vec<BigInt>>,
    // Named non-generator classes, e.g. C0 = Cinf - nF on a ruled surface.
    aliases: Vec<(String, Vec<BigInt>)>,
}

fn ints(xs: &[i64]) -> Vec<BigInt> {
    xs.iter().map(|&x| BigInt::from(x)).collect()
}

impl IntersectionLattice {
    pub fn blowup(k: usize) -> Arc<Self> {
        let mut names = vec!["h".to_string()];
        names.extend((1..=k).map(|i| format!("e{i}")));
        let mut gram = IntMatrix::identity(k + 1);
        for i in 1..=k {
            gram.set(i, i, BigInt::from(-1));
        }
        let mut canonical = vec![BigInt::one(); k + 1];
        canonical[0] = BigInt::from(-3);
        Arc::new(IntersectionLattice {
            kind: LatticeKind::Blowup(k),
            names,
            gram,
            canonical: Some(canonical),
            aliases: Vec::new(),
        })
    }

    pub fn ruled(n: u32) -> Arc<Self> {
        let n64 = i64::from(n);
        Arc::new(IntersectionLattice {
            kind: LatticeKind::Ruled(n),
            names: vec!["Cinf".into(), "F".into()],
            gram: IntMatrix::from_rows(&[vec![n64, 1], vec![1, 0]]),
            canonical: Some(ints(&[-2, n64 - 2])),
            aliases: vec![("C0".into(), ints(&[1, -n64]))],
        })
    }

    /// An arbitrary symmetric form; `canonical` may be absent.
    pub fn abstract_lattice(
        names: Vec<String>,
        gram: IntMatrix,
        canonical: Option<Vec<BigInt>>,
    ) -> Result<Arc<Self>> {
        if !gram.is_symmetric() || gram.rows() != names.len() {
            return Err(LatticeError::Asymmetric);
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(LatticeError::Duplicate(n.clone()));
            }
        }
        if let Some(k) = &canonical {
            assert_eq!(k.len(), names.len(), "canonical class has wrong length");
        }
        Ok(Arc::new(IntersectionLattice {
            kind: LatticeKind::Abstract,
            names,
            gram,
            canonical,
            aliases: Vec::new(),
        }))
    }

    pub fn kind(&self) -> &LatticeKind {
        &self.kind
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rank(&self) -> usize {
        self.names.len()
    }

    pub fn gram(&self) -> &IntMatrix {
        &self.gram
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn lookup(&self, name: &str) -> Option<Vec<BigInt>> {
        if let Some(i) = self.index_of(name) {
            let mut v = vec![BigInt::zero(); self.rank()];
            v[i] = BigInt::one();
            return Some(v);
        }
        self.aliases.iter().find(|(n, _)| n == name).map(|(_, v)| v.clone())
    }

    /// Adds one exceptional generator `e{k+1}` to a blow-up lattice.
    pub fn blow_up(&self) -> Result<Arc<Self>> {
        match self.kind {
            LatticeKind::Blowup(k) => {
                let next = format!("e{}", k + 1);
                let mut out = self.extended(next)?;
                out.kind = LatticeKind::Blowup(k + 1);
                Ok(Arc::new(out))
            }
            _ => Err(LatticeError::WrongKind(self.kind.to_string())),
        }
    }

    /// Blow-up with an explicit exceptional name; works for abstract lattices too.
    pub fn blow_up_as(&self, name: &str) -> Result<Arc<Self>> {
        match self.kind {
            LatticeKind::Ruled(_) => Err(LatticeError::WrongKind(self.kind.to_string())),
            LatticeKind::Blowup(k) if name == format!("e{}", k + 1) => self.blow_up(),
            _ => {
                let mut out = self.extended(name.to_string())?;
                out.kind = LatticeKind::Abstract;
                Ok(Arc::new(out))
            }
        }
    }

    fn extended(&self, name: String) -> Result<IntersectionLattice> {
        if self.index_of(&name).is_some() {
            return Err(LatticeError::Duplicate(name));
        }
        let n = self.rank();
        let mut gram = IntMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                gram.set(i, j, self.gram.get(i, j).clone());
            }
        }
        gram.set(n, n, BigInt::from(-1));
        let canonical = self.canonical.as_ref().map(|k| {
            let mut k = k.clone();
            k.push(BigInt::one());
            k
        });
        let aliases = self
            .aliases
            .iter()
            .map(|(a, v)| {
                let mut v = v.clone();
                v.push(BigInt::zero());
                (a.clone(), v)
            })
            .collect();
        let mut names = self.names.clone();
        names.push(name);
        Ok(IntersectionLattice { kind: self.kind.clone(), names, gram, canonical, aliases })
    }

    /// True when `self` is `other` with extra generators appended.
    pub fn is_prefix_of(&self, other: &IntersectionLattice) -> bool {
        let n = self.rank();
        n <= other.rank()
            && self.names[..] == other.names[..n]
            && (0..n).all(|i| (0..n).all(|j| self.gram.get(i, j) == other.gram.get(i, j)))
    }

    pub fn determinant(&self) -> BigInt {
        self.gram.determinant()
    }

    /// `b+ - b-` of the form (zero eigenvalues ignored).
    pub fn signature(&self) -> i64 {
        let (p, n, _) = self.gram.inertia();
        p as i64 - n as i64
    }
}

pub fn zero(lattice: &Arc<IntersectionLattice>) -> DivisorClass {
    DivisorClass { lattice: lattice.clone(), coeffs: vec![BigInt::zero(); lattice.rank()] }
}

pub fn generator(lattice: &Arc<IntersectionLattice>, name: &str) -> Result<DivisorClass> {
    lattice
        .lookup(name)
        .map(|coeffs| DivisorClass { lattice: lattice.clone(), coeffs })
        .ok_or_else(|| LatticeError::UnknownSymbol(name.to_string()))
}

pub fn canonical_class(lattice: &Arc<IntersectionLattice>) -> Result<DivisorClass> {
    lattice
        .canonical
        .clone()
        .map(|coeffs| DivisorClass { lattice: lattice.clone(), coeffs })
        .ok_or(LatticeError::NoCanonical)
}

pub fn from_coeffs(lattice: &Arc<IntersectionLattice>, coeffs: Vec<BigInt>) -> DivisorClass {
    assert_eq!(coeffs.len(), lattice.rank(), "coefficient vector has wrong length");
    DivisorClass { lattice: lattice.clone(), coeffs }
}

/// Parses a monomial string such as `4h-2e1-e2` against the lattice's generators.
pub fn parse_class(lattice: &Arc<IntersectionLattice>, text: &str) -> Result<DivisorClass> {
    let terms = parse_monomials(text)?;
    let mut out = zero(lattice);
    for (c, sym) in terms {
        let g = generator(lattice, &sym)?;
        out = out.checked_add(&g.scale(&c))?;
    }
    Ok(out)
}

/// Splits `"8h -4e1 - 2 e2 + C0"` into `(coefficient, symbol)` pairs.
///
/// Symbols start with a letter; a bare integer term is rejected.
pub fn parse_monomials(text: &str) -> Result<Vec<(BigInt, String)>> {
    let bytes = text.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    let skip_ws = |i: &mut usize| {
        while *i < bytes.len() && bytes[*i].is_ascii_whitespace() {
            *i += 1;
        }
    };
    let err = |offset: usize, m: &str| LatticeError::Syntax { offset, message: m.to_string() };
    skip_ws(&mut i);
    if i == bytes.len() {
        return Err(err(i, "empty class"));
    }
    if text.trim() == "0" {
        return Ok(out);
    }
    let mut first = true;
    while i < bytes.len() {
        let mut negative = false;
        if bytes[i] == b'+' || bytes[i] == b'-' {
            negative = bytes[i] == b'-';
            i += 1;
            skip_ws(&mut i);
        } else if !first {
            return Err(err(i, "expected `+` or `-`"));
        }
        first = false;
        let start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        let mut coeff = if start == i {
            BigInt::one()
        } else {
            text[start..i].parse::<BigInt>().map_err(|_| err(start, "bad integer"))?
        };
        skip_ws(&mut i);
        if i < bytes.len() && bytes[i] == b'*' {
            i += 1;
            skip_ws(&mut i);
        }
        let sym_start = i;
        if i >= bytes.len() || !(bytes[i].is_ascii_alphabetic() || bytes[i] == b'_') {
            return Err(err(i, "expected a generator name"));
        }
        while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'\'') {
            i += 1;
        }
        if negative {
            coeff = -coeff;
        }
        out.push((coeff, text[sym_start..i].to_string()));
        skip_ws(&mut i);
    }
    Ok(out)
}

/// Formats coefficients against names as `4h-2e1-e2`; the zero class is `0`.
pub fn format_monomials(names: &[String], coeffs: &[BigInt]) -> String {
    let mut s = String::new();
    for (name, c) in names.iter().zip(coeffs) {
        if c.is_zero() {
            continue;
        }
        if c.is_negative() {
            s.push('-');
        } else if !s.is_empty() {
            s.push('+');
        }
        let a = c.abs();
        if !a.is_one() {
            s.push_str(&a.to_string());
        }
        s.push_str(name);
    }
    if s.is_empty() {
        s.push('0');
    }
    s
}

#[derive(Clone, Debug)]
pub struct DivisorClass {
    lattice: Arc<IntersectionLattice>,
    coeffs: Vec<BigInt>,
}

impl PartialEq for DivisorClass {
    fn eq(&self, other: &Self) -> bool {
        self.same_lattice(other) && self.coeffs == other.coeffs
    }
}

impl Eq for DivisorClass {}

impl DivisorClass {
    pub fn lattice(&self) -> &Arc<IntersectionLattice> {
        &self.lattice
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn coeff(&self, name: &str) -> Option<&BigInt> {
        self.lattice.index_of(name).map(|i| &self.coeffs[i])
    }

    pub fn same_lattice(&self, other: &DivisorClass) -> bool {
        Arc::ptr_eq(&self.lattice, &other.lattice) || *self.lattice == *other.lattice
    }

    fn check(&self, other: &DivisorClass) -> Result<()> {
        if self.same_lattice(other) { Ok(()) } else { Err(LatticeError::Mismatch) }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    pub fn pair(&self, other: &DivisorClass) -> Result<BigInt> {
        self.check(other)?;
        Ok(self.lattice.gram.bilinear(&self.coeffs, &other.coeffs))
    }

    pub fn square(&self) -> BigInt {
        self.lattice.gram.bilinear(&self.coeffs, &self.coeffs)
    }

    pub fn checked_add(&self, other: &DivisorClass) -> Result<DivisorClass> {
        self.check(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(DivisorClass { lattice: self.lattice.clone(), coeffs })
    }

    pub fn checked_sub(&self, other: &DivisorClass) -> Result<DivisorClass> {
        self.check(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(DivisorClass { lattice: self.lattice.clone(), coeffs })
    }

    pub fn scale(&self, c: &BigInt) -> DivisorClass {
        DivisorClass { lattice: self.lattice.clone(), coeffs: self.coeffs.iter().map(|a| a * c).collect() }
    }

    pub fn neg(&self) -> DivisorClass {
        self.scale(&BigInt::from(-1))
    }

    /// (K·D + D²)/2 + 1.
    pub fn adjunction_genus(&self) -> Result<BigRational> {
        let k = canonical_class(&self.lattice)?;
        let kd = k.pair(self)?;
        let total = kd + self.square();
        Ok(BigRational::new(total, BigInt::from(2)) + BigRational::one())
    }

    /// Re-expresses the class in a lattice that extends this one by new generators.
    pub fn extend_to(&self, target: &Arc<IntersectionLattice>) -> Result<DivisorClass> {
        if !self.lattice.is_prefix_of(target) {
            return Err(LatticeError::Mismatch);
        }
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(target.rank(), BigInt::zero());
        Ok(DivisorClass { lattice: target.clone(), coeffs })
    }

    /// `D - m·e` where `e` is the last generator of `blown`.
    pub fn proper_transform(&self, blown: &Arc<IntersectionLattice>, m: &BigInt) -> Result<DivisorClass> {
        let mut d = self.extend_to(blown)?;
        if blown.rank() == self.lattice.rank() {
            return Err(LatticeError::Mismatch);
        }
        let last = blown.rank() - 1;
        d.coeffs[last] -= m;
        Ok(d)
    }
}

impl fmt::Display for DivisorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_monomials(&self.lattice.names, &self.coeffs))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Resolution {
    pub class: DivisorClass,
    pub square: BigInt,
    /// `((i, j), D_i·D_j)` for every pair consumed by the smoothing.
    pub pairwise: Vec<((usize, usize), BigInt)>,
}

pub fn resolve(classes: &[DivisorClass]) -> Result<Resolution> {
    if classes.len() < 2 {
        return Err(LatticeError::TooFewClasses);
    }
    let mut sum = classes[0].clone();
    for c in &classes[1..] {
        sum = sum.checked_add(c)?;
    }
    let mut pairwise = Vec::new();
    for i in 0..classes.len() {
        for j in i + 1..classes.len() {
            pairwise.push(((i, j), classes[i].pair(&classes[j])?));
        }
    }
    let square = sum.square();
    Ok(Resolution { class: sum, square, pairwise })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifoldInvariants {
    pub e: i64,
    pub sigma: i64,
    pub b1: i64,
    pub parity: Parity,
    /// Justification text when simple connectivity has been asserted.
    pub simply_connected: Option<String>,
}

impl ManifoldInvariants {
    pub fn new(e: i64, sigma: i64, parity: Parity) -> Result<Self> {
        let inv = ManifoldInvariants { e, sigma, b1: 0, parity, simply_connected: None };
        inv.validate()?;
        Ok(inv)
    }

    pub fn blowup_surface(k: usize) -> Self {
        let k = k as i64;
        ManifoldInvariants { e: 3 + k, sigma: 1 - k, b1: 0, parity: Parity::Odd, simply_connected: None }
    }

    pub fn with_sc(mut self, why: impl Into<String>) -> Self {
        self.simply_connected = Some(why.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        let b2 = self.b2();
        if b2 < 0 || (b2 + self.sigma) % 2 != 0 || b2 < self.sigma.abs() {
            return Err(LatticeError::Invariants(format!(
                "e={}, sigma={}, b1={} give no non-negative integral b2+/b2-",
                self.e, self.sigma, self.b1
            )));
        }
        Ok(())
    }

    pub fn b2(&self) -> i64 {
        self.e - 2 + 2 * self.b1
    }

    pub fn b2_plus(&self) -> i64 {
        (self.b2() + self.sigma) / 2
    }

    pub fn b2_minus(&self) -> i64 {
        (self.b2() - self.sigma) / 2
    }

    pub fn c1sq(&self) -> i64 {
        3 * self.sigma + 2 * self.e
    }

    /// Holomorphic Euler characteristic (e + σ)/4, when integral.
    pub fn chi_h(&self) -> Option<i64> {
        let s = self.e + self.sigma;
        if s % 4 == 0 { Some(s / 4) } else { None }
    }

    pub fn blow_up(&self) -> Self {
        ManifoldInvariants {
            e: self.e + 1,
            sigma: self.sigma - 1,
            b1: self.b1,
            parity: Parity::Odd,
            simply_connected: self.simply_connected.clone(),
        }
    }

    pub fn connected_sum(&self, other: &ManifoldInvariants) -> Self {
        let parity = if self.parity == Parity::Odd || other.parity == Parity::Odd {
            Parity::Odd
        } else {
            Parity::Even
        };
        let simply_connected = match (&self.simply_connected, &other.simply_connected) {
            (Some(a), Some(b)) => Some(format!("{a}; {b}")),
            _ => None,
        };
        ManifoldInvariants {
            e: self.e + other.e - 2,
            sigma: self.sigma + other.sigma,
            b1: self.b1 + other.b1,
            parity,
            simply_connected,
        }
    }

    pub fn homeo_type(&self) -> Result<HomeoType> {
        if self.simply_connected.is_none() {
            return Err(LatticeError::Unsupported("simple connectivity not asserted".into()));
        }
        if self.b1 != 0 {
            return Err(LatticeError::Unsupported("b1 is nonzero".into()));
        }
        if self.parity == Parity::Even {
            return Err(LatticeError::Unsupported("even intersection form".into()));
        }
        self.validate()?;
        Ok(HomeoType { plus: self.b2_plus() as u64, minus: self.b2_minus() as u64 })
    }
}

/// `m CP² # n CP̄²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HomeoType {
    pub plus: u64,
    pub minus: u64,
}

impl fmt::Display for HomeoType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lead = |m: u64| if m == 1 { String::new() } else { m.to_string() };
        match (self.plus, self.minus) {
            (0, 0) => f.write_str("S⁴"),
            (m, 0) => write!(f, "{}CP²", lead(m)),
            (0, n) => write!(f, "{}CP̄²", lead(n)),
            (m, n) => write!(f, "{}CP²#{}CP̄²", lead(m), n),
        }
    }
}

impl HomeoType {
    /// Compact form `mCP²#n` that leaves the CP̄² summand implicit.
    pub fn short(&self) -> String {
        match (self.plus, self.minus) {
            (p, n) if p > 0 && n > 0 => {
                let lead = if p == 1 { String::new() } else { p.to_string() };
                format!("{lead}CP²#{n}")
            }
            _ => self.to_string(),
        }
    }
}

/// Integer value of a rational, if it is one.
pub fn as_integer(q: &BigRational) -> Option<i64> {
    if q.denom().is_one() { q.numer().to_i64() } else { None }
}

/// Residue of `a` modulo `m` in `[0, m)`.
pub fn residue(a: &BigInt, m: &BigInt) -> BigInt {
    a.mod_floor(m)
}
