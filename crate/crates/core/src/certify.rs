//! Linear forms in the symplectic-class parameters, their positivity on the
//! cone of admissible parameters, and basic-class bookkeeping.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::blowdown::{descent_check, BlowdownError, PlumbingEmbedding};
use crate::lattice::{DivisorClass, IntersectionLattice, LatticeError, LatticeKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CertifyError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Blowdown(#[from] BlowdownError),
    #[error("symbol order differs: {0}")]
    Symbols(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("cannot parse linear form at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("the standard parameter class needs a blow-up lattice")]
    NotBlowup,
}

pub type Result<T> = std::result::Result<T, CertifyError>;

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Σ cᵢ·symbolᵢ over a fixed, ordered symbol list.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SymbolicLinearForm {
    symbols: Arc<Vec<String>>,
    coeffs: Vec<BigRational>,
}

impl SymbolicLinearForm {
    pub fn zero(symbols: Arc<Vec<String>>) -> Self {
        let n = symbols.len();
        SymbolicLinearForm { symbols, coeffs: vec![BigRational::zero(); n] }
    }

    pub fn variable(symbols: Arc<Vec<String>>, name: &str) -> Result<Self> {
        let mut f = Self::zero(symbols);
        let i = f.index(name)?;
        f.coeffs[i] = BigRational::one();
        Ok(f)
    }

    /// Symbols a, b1 … bk.
    pub fn standard_symbols(k: usize) -> Arc<Vec<String>> {
        let mut v = vec!["a".to_string()];
        v.extend((1..=k).map(|i| format!("b{i}")));
        Arc::new(v)
    }

    pub fn from_coeffs(symbols: Arc<Vec<String>>, coeffs: Vec<BigRational>) -> Self {
        assert_eq!(symbols.len(), coeffs.len(), "coefficient vector has wrong length");
        SymbolicLinearForm { symbols, coeffs }
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.symbols.iter().position(|s| s == name).ok_or_else(|| CertifyError::UnknownSymbol(name.to_string()))
    }

    pub fn coeff(&self, name: &str) -> Result<&BigRational> {
        Ok(&self.coeffs[self.index(name)?])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.symbols != other.symbols {
            return Err(CertifyError::Symbols(format!("{:?} vs {:?}", self.symbols, other.symbols)));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(SymbolicLinearForm { symbols: self.symbols.clone(), coeffs })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&rat(-1)))
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        SymbolicLinearForm { symbols: self.symbols.clone(), coeffs: self.coeffs.iter().map(|x| x * c).collect() }
    }

    pub fn evaluate(&self, values: &[BigRational]) -> BigRational {
        self.coeffs.iter().zip(values).map(|(c, v)| c * v).sum()
    }

    /// Least common denominator of the coefficients.
    pub fn denominator(&self) -> BigInt {
        self.coeffs.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()))
    }

    /// Integer coefficients after clearing the common denominator.
    pub fn scaled_integers(&self) -> (BigInt, Vec<BigInt>) {
        let d = self.denominator();
        let ints = self.coeffs.iter().map(|c| (c * BigRational::from_integer(d.clone())).to_integer()).collect();
        (d, ints)
    }

    /// Symbols whose coefficients differ from `other`, with both values.
    pub fn differences(&self, other: &Self) -> Result<Vec<(String, BigRational, BigRational)>> {
        self.check(other)?;
        Ok(self
            .symbols
            .iter()
            .zip(self.coeffs.iter().zip(&other.coeffs))
            .filter(|(_, (a, b))| a != b)
            .map(|(s, (a, b))| (s.clone(), a.clone(), b.clone()))
            .collect())
    }

    /// Reads `517a - 319b1 - 88(b4..b13) - 99(b2, b3, b14..b17)`; a bracket
    /// applies its coefficient to each listed symbol, and a symbol listed
    /// twice accumulates.
    pub fn parse(symbols: Arc<Vec<String>>, text: &str) -> Result<Self> {
        let mut out = Self::zero(symbols);
        let b = text.as_bytes();
        let mut pos = 0;
        let err = |pos: usize, m: &str| CertifyError::Syntax { offset: pos, message: m.to_string() };
        let skip = |pos: &mut usize| {
            while *pos < b.len() && b[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
        };
        let ident = |pos: &mut usize| -> Option<String> {
            let start = *pos;
            while *pos < b.len() && (b[*pos].is_ascii_alphanumeric() || b[*pos] == b'_' || b[*pos] == b'\'') {
                *pos += 1;
            }
            (*pos > start && b[start].is_ascii_alphabetic()).then(|| text[start..*pos].to_string())
        };
        let mut first = true;
        loop {
            skip(&mut pos);
            if pos >= b.len() {
                break;
            }
            let mut sign = 1;
            if b[pos] == b'+' || b[pos] == b'-' {
                if b[pos] == b'-' {
                    sign = -1;
                }
                pos += 1;
                skip(&mut pos);
            } else if !first {
                return Err(err(pos, "expected `+` or `-`"));
            }
            first = false;
            let start = pos;
            while pos < b.len() && (b[pos].is_ascii_digit() || b[pos] == b'/') {
                pos += 1;
            }
            let c: BigRational = if pos == start {
                BigRational::one()
            } else {
                text[start..pos].parse().map_err(|_| err(start, "bad coefficient"))?
            };
            let c = c * rat(sign);
            skip(&mut pos);
            let mut names = Vec::new();
            if pos < b.len() && b[pos] == b'(' {
                pos += 1;
                loop {
                    skip(&mut pos);
                    let Some(lo) = ident(&mut pos) else { return Err(err(pos, "expected a symbol")) };
                    skip(&mut pos);
                    if text[pos..].starts_with("..") {
                        pos += 2;
                        skip(&mut pos);
                        let Some(hi) = ident(&mut pos) else { return Err(err(pos, "expected a range end")) };
                        let (i, j) = (out.index(&lo)?, out.index(&hi)?);
                        if j < i {
                            return Err(err(pos, "empty range"));
                        }
                        names.extend(out.symbols[i..=j].iter().cloned());
                    } else {
                        names.push(lo);
                    }
                    skip(&mut pos);
                    match b.get(pos) {
                        Some(b',') | Some(b'+') => pos += 1,
                        Some(b')') => {
                            pos += 1;
                            break;
                        }
                        _ => return Err(err(pos, "expected `,`, `+` or `)`")),
                    }
                }
            } else {
                let Some(n) = ident(&mut pos) else { return Err(err(pos, "expected a symbol")) };
                names.push(n);
            }
            for n in names {
                let i = out.index(&n)?;
                out.coeffs[i] += &c;
            }
        }
        Ok(out)
    }
}

impl SymbolicLinearForm {
    fn render(&self, d: &BigInt) -> String {
        let mut body = String::new();
        for (s, c) in self.symbols.iter().zip(&self.coeffs) {
            let c = (c * BigRational::from_integer(d.clone())).to_integer();
            if c.is_zero() {
                continue;
            }
            if c.is_negative() {
                body.push('-');
            } else if !body.is_empty() {
                body.push('+');
            }
            let m = c.abs();
            if !m.is_one() {
                body.push_str(&m.to_string());
            }
            body.push_str(s);
        }
        if body.is_empty() {
            body.push('0');
        }
        if d.is_one() { body } else { format!("1/{d}({body})") }
    }

    /// Like `Display`, but written over `scale` when the denominator divides it.
    pub fn over(&self, scale: &BigInt) -> String {
        let d = self.denominator();
        if !scale.is_zero() && (scale % &d).is_zero() { self.render(&scale.abs()) } else { self.render(&d) }
    }
}

impl fmt::Display for SymbolicLinearForm {
    /// `1/121(517a-319b1-…)`, or the bare integer form when the denominator is 1.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&self.denominator()))
    }
}

/// A class whose coefficients are linear forms, e.g. w = a·h − Σ bᵢ·eᵢ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolicClass {
    lattice: Arc<IntersectionLattice>,
    coeffs: Vec<SymbolicLinearForm>,
}

impl SymbolicClass {
    /// a·h − b₁e₁ − … − b_k e_k on CP² # k CP̄².
    pub fn standard(lattice: &Arc<IntersectionLattice>) -> Result<Self> {
        let LatticeKind::Blowup(k) = lattice.kind() else { return Err(CertifyError::NotBlowup) };
        let syms = SymbolicLinearForm::standard_symbols(*k);
        let mut coeffs = vec![SymbolicLinearForm::variable(syms.clone(), "a")?];
        for i in 1..=*k {
            coeffs.push(SymbolicLinearForm::variable(syms.clone(), &format!("b{i}"))?.scale(&rat(-1)));
        }
        Ok(SymbolicClass { lattice: lattice.clone(), coeffs })
    }

    pub fn lattice(&self) -> &Arc<IntersectionLattice> {
        &self.lattice
    }

    pub fn symbols(&self) -> Arc<Vec<String>> {
        self.coeffs[0].symbols.clone()
    }

    /// D·w as a linear form.
    pub fn pair(&self, d: &DivisorClass) -> Result<SymbolicLinearForm> {
        if **d.lattice() != *self.lattice {
            return Err(LatticeError::Mismatch.into());
        }
        let g = self.lattice.gram();
        let mut out = SymbolicLinearForm::zero(self.symbols());
        for (i, di) in d.coeffs().iter().enumerate() {
            if di.is_zero() {
                continue;
            }
            for (j, wj) in self.coeffs.iter().enumerate() {
                let gij = g.get(i, j);
                if gij.is_zero() {
                    continue;
                }
                out = out.add(&wj.scale(&BigRational::from_integer(di * gij)))?;
            }
        }
        Ok(out)
    }
}

/// κᵀM⁻¹ω with κᵢ = K·uᵢ and ωᵢ = w·uᵢ.
pub fn restrict_and_pair(k: &DivisorClass, w: &SymbolicClass, emb: &PlumbingEmbedding) -> Result<SymbolicLinearForm> {
    let kappa = emb.pairings(k)?;
    let omega: Vec<SymbolicLinearForm> = emb.classes().iter().map(|u| w.pair(u)).collect::<Result<_>>()?;
    let inv = emb.chain().inverse();
    let mut out = SymbolicLinearForm::zero(w.symbols());
    for (i, ki) in kappa.iter().enumerate() {
        if ki.is_zero() {
            continue;
        }
        for (j, wj) in omega.iter().enumerate() {
            let c = inv.get(i, j) * BigRational::from_integer(ki.clone());
            out = out.add(&wj.scale(&c))?;
        }
    }
    Ok(out)
}

/// K·w minus the part carried by each plumbing.
pub fn exotic_functional(
    k: &DivisorClass,
    w: &SymbolicClass,
    embeddings: &[PlumbingEmbedding],
) -> Result<SymbolicLinearForm> {
    let mut f = w.pair(k)?;
    for emb in embeddings {
        f = f.sub(&restrict_and_pair(k, w, emb)?)?;
    }
    Ok(f)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Positivity {
    pub positive: bool,
    /// (label, value) at every vertex of the a = 1 slice.
    pub vertex_values: Vec<(String, BigRational)>,
    /// A vertex with the least value.
    pub witness: String,
}

/// Vertices of {1 ≥ b₁ ≥ … ≥ b_k ≥ 0, Σbᵢ ≤ 1}: the origin and
/// b₁ = … = b_m = 1/m for m = 1..k.
pub fn cone_vertices(k: usize) -> Vec<(String, Vec<BigRational>)> {
    let mut out = Vec::with_capacity(k + 1);
    let mut origin = vec![BigRational::zero(); k + 1];
    origin[0] = BigRational::one();
    out.push(("m=0".to_string(), origin));
    for m in 1..=k {
        let mut v = vec![BigRational::zero(); k + 1];
        v[0] = BigRational::one();
        for x in v.iter_mut().skip(1).take(m) {
            *x = BigRational::new(BigInt::one(), BigInt::from(m));
        }
        out.push((format!("m={m}"), v));
    }
    out
}

/// Decides f > 0 on the open cone a > b₁ > … > b_k > 0, a > Σbᵢ. The form
/// must use the standard symbols a, b1 … bk.
pub fn positivity_over_cone(f: &SymbolicLinearForm) -> Result<Positivity> {
    let k = f.symbols.len() - 1;
    if *f.symbols != *SymbolicLinearForm::standard_symbols(k) {
        return Err(CertifyError::Symbols(f.symbols.join(",")));
    }
    let vertex_values: Vec<(String, BigRational)> =
        cone_vertices(k).into_iter().map(|(l, v)| (l, f.evaluate(&v))).collect();
    let (witness, min) = vertex_values
        .iter()
        .min_by(|x, y| x.1.cmp(&y.1))
        .map(|(l, v)| (l.clone(), v.clone()))
        .expect("at least one vertex");
    // A nonzero linear form that is ≥ 0 on a full-dimensional cone is > 0 inside it.
    let positive = !min.is_negative() && !f.is_zero();
    Ok(Positivity { positive, vertex_values, witness })
}

/// A class on a manifold obtained by rational blowdowns, kept as its
/// source class together with the plumbings that were cut out.
#[derive(Clone, Debug)]
pub struct DescendedClass {
    pub source: DivisorClass,
    pub embeddings: Vec<PlumbingEmbedding>,
}

impl DescendedClass {
    /// L·L′ − Σ L|_P · L′|_P.
    pub fn pair(&self, other: &DescendedClass) -> Result<BigRational> {
        let mut p = BigRational::from_integer(self.source.pair(&other.source)?);
        for emb in &self.embeddings {
            p -= emb.restricted_pairing(&self.source, &other.source)?;
        }
        Ok(p)
    }

    fn sub(&self, other: &DescendedClass) -> Result<DescendedClass> {
        Ok(DescendedClass { source: self.source.checked_sub(&other.source)?, embeddings: self.embeddings.clone() })
    }

    pub fn square(&self) -> Result<BigRational> {
        self.pair(self)
    }
}

impl PartialEq for DescendedClass {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

/// Classes with nonzero Seiberg–Witten value, with their values.
#[derive(Clone, Debug, PartialEq)]
pub struct BasicClassSet {
    pub label: String,
    pub entries: Vec<(DescendedClass, BigInt)>,
}

fn plain(d: DivisorClass) -> DescendedClass {
    DescendedClass { source: d, embeddings: Vec::new() }
}

impl BasicClassSet {
    /// Vanishing invariant, e.g. for a connected sum with two CP² summands.
    pub fn trivial(label: impl Into<String>) -> Self {
        BasicClassSet { label: label.into(), entries: Vec::new() }
    }

    /// {0} with value 1, as on a K3 surface.
    pub fn zero_class(label: impl Into<String>, lattice: &Arc<IntersectionLattice>) -> Self {
        BasicClassSet { label: label.into(), entries: vec![(plain(crate::lattice::zero(lattice)), BigInt::one())] }
    }

    /// {K, −K}; the value on −K is (−1)^((e+σ)/4).
    pub fn taubes(label: impl Into<String>, k: &DivisorClass, e: i64, sigma: i64) -> Self {
        let sign = if ((e + sigma) / 4).is_even() { 1 } else { -1 };
        BasicClassSet {
            label: label.into(),
            entries: vec![(plain(k.clone()), BigInt::one()), (plain(k.neg()), BigInt::from(sign))],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_trivial(&self) -> bool {
        self.entries.is_empty()
    }

    /// Each L becomes L ± e in the blown-up lattice, values unchanged.
    pub fn blowup(&self, e: &DivisorClass) -> Result<Self> {
        let mut entries: Vec<(DescendedClass, BigInt)> = Vec::new();
        for (c, v) in &self.entries {
            let base = c.source.extend_to(e.lattice())?;
            for s in [base.checked_add(e)?, base.checked_sub(e)?] {
                if let Some(slot) = entries.iter_mut().find(|(x, _)| x.source == s) {
                    slot.1 += v;
                } else {
                    entries.push((DescendedClass { source: s, embeddings: c.embeddings.clone() }, v.clone()));
                }
            }
        }
        entries.retain(|(_, v)| !v.is_zero());
        Ok(BasicClassSet { label: self.label.clone(), entries })
    }

    /// Keeps the classes that pass the descent test on the plumbing.
    pub fn descend(&self, emb: &PlumbingEmbedding) -> Result<Self> {
        let mut entries = Vec::new();
        for (c, v) in &self.entries {
            let d = descent_check(&c.source, emb)?;
            if d.vertex_condition && d.square_condition {
                let mut c = c.clone();
                c.embeddings.push(emb.clone());
                entries.push((c, v.clone()));
            }
        }
        Ok(BasicClassSet { label: self.label.clone(), entries })
    }

    pub fn negation_closed(&self) -> bool {
        self.entries.iter().all(|(c, v)| {
            let n = c.source.neg();
            self.entries.iter().any(|(d, w)| d.source == n && w.abs() == v.abs())
        })
    }

    /// Minimal unless two basic classes differ by a class of square −4.
    pub fn minimality(&self) -> Result<Minimality> {
        for (i, (k1, _)) in self.entries.iter().enumerate() {
            for (k2, _) in &self.entries[i + 1..] {
                let sq = k1.sub(k2)?.square()?;
                if sq == rat(-4) {
                    return Ok(Minimality {
                        minimal: false,
                        offending: Some((k1.source.to_string(), k2.source.to_string())),
                    });
                }
            }
        }
        Ok(Minimality { minimal: true, offending: None })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Minimality {
    pub minimal: bool,
    pub offending: Option<(String, String)>,
}

/// Inputs to the final call; each route cites a rule rather than proving it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VerdictInputs {
    pub homeo_label: Option<String>,
    /// The standard target carries no symplectic structure with K·w > 0,
    /// and the constructed manifold has K·w > 0 for every admissible w.
    pub positivity: Option<bool>,
    /// Basic classes survive on the constructed manifold while the standard
    /// target has vanishing invariant.
    pub sw_nonvanishing: Option<bool>,
    pub target_sw_trivial: Option<bool>,
    pub minimal: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Exotic { target: String, route: String },
    Undetermined(String),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Exotic { target, route } => {
                write!(f, "exotic {target} relative to cited rules ({route})")
            }
            Verdict::Undetermined(why) => write!(f, "undetermined: {why}"),
        }
    }
}

pub fn verdict(v: &VerdictInputs) -> Verdict {
    let Some(target) = v.homeo_label.clone() else {
        return Verdict::Undetermined("homeomorphism type unknown".into());
    };
    if v.positivity == Some(true) {
        return Verdict::Exotic { target, route: "K.w > 0 on the symplectic cone".into() };
    }
    if v.sw_nonvanishing == Some(true) && v.target_sw_trivial == Some(true) {
        let route = if v.minimal == Some(true) { "SW nonvanishing, minimal" } else { "SW nonvanishing" };
        return Verdict::Exotic { target, route: route.into() };
    }
    match v.positivity {
        Some(false) => Verdict::Undetermined("functional not positive on the cone".into()),
        _ => Verdict::Undetermined("no distinguishing invariant recorded".into()),
    }
}
