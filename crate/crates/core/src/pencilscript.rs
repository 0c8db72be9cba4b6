//! Blow-up ledgers that separate the two generating members of a pencil,
//! and lattice checks for relations among curves on an abstract surface.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;
use thiserror::Error;

use crate::hirzebruch::{BasisMap, RuledError};
use crate::lattice::{
    generator, zero, DivisorClass, IntersectionLattice, LatticeError, LatticeKind, Parity,
};
use crate::linalg::IntMatrix;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Ruled(#[from] RuledError),
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("duplicate component `{0}`")]
    DuplicateComponent(String),
    #[error("step {step} unbalanced: A side {a} but B side {b}")]
    Unbalanced { step: usize, a: String, b: String },
    #[error("multiplicity through `{0}` must be positive")]
    ZeroDrop(String),
    #[error("cannot blow up a {0} lattice; convert first")]
    CannotBlowUp(String),
    #[error("fiber check failed: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

pub type Result<T> = std::result::Result<T, LedgerError>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub name: String,
    pub class: DivisorClass,
    pub mult: u64,
}

/// One point to blow up: the A-side components through it with their
/// multiplicities, the multiplicity of the new exceptional curve in the A
/// side (0 leaves it out), and how often the B member passes through it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepSpec {
    pub through: Vec<(String, u64)>,
    pub exceptional_mult: u64,
    pub b_drop: u64,
    pub name: Option<String>,
}

impl StepSpec {
    pub fn new(through: &[(&str, u64)], exceptional_mult: u64) -> Self {
        StepSpec {
            through: through.iter().map(|(n, m)| (n.to_string(), *m)).collect(),
            exceptional_mult,
            b_drop: 1,
            name: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    pub step: usize,
    pub exceptional: Option<String>,
    pub b_side: DivisorClass,
    pub balanced: bool,
}

#[derive(Clone, Debug)]
pub struct PencilLedger {
    lattice: Arc<IntersectionLattice>,
    a_side: Vec<Component>,
    b_side: DivisorClass,
    // Exceptional classes by name, including ones left out of the A side.
    exceptionals: Vec<(String, DivisorClass)>,
    // An exceptional curve already present in the lattice, used by the next step.
    pending: Option<(String, DivisorClass)>,
    log: Vec<StepRecord>,
}

impl PencilLedger {
    pub fn new(a_side: Vec<Component>, b_side: DivisorClass) -> Result<Self> {
        let lattice = b_side.lattice().clone();
        for (i, c) in a_side.iter().enumerate() {
            if a_side[..i].iter().any(|d| d.name == c.name) {
                return Err(LedgerError::DuplicateComponent(c.name.clone()));
            }
            if !c.class.same_lattice(&b_side) {
                return Err(LatticeError::Mismatch.into());
            }
        }
        let mut ledger =
            PencilLedger { lattice, a_side, b_side, exceptionals: Vec::new(), pending: None, log: Vec::new() };
        ledger.check_balance(0)?;
        ledger.log.push(StepRecord { step: 0, exceptional: None, b_side: ledger.b_side.clone(), balanced: true });
        Ok(ledger)
    }

    pub fn lattice(&self) -> &Arc<IntersectionLattice> {
        &self.lattice
    }

    pub fn a_side(&self) -> &[Component] {
        &self.a_side
    }

    pub fn b_side(&self) -> &DivisorClass {
        &self.b_side
    }

    pub fn log(&self) -> &[StepRecord] {
        &self.log
    }

    pub fn pending(&self) -> Option<&(String, DivisorClass)> {
        self.pending.as_ref()
    }

    pub fn a_total(&self) -> Result<DivisorClass> {
        let mut sum = zero(&self.lattice);
        for c in &self.a_side {
            sum = sum.checked_add(&c.class.scale(&BigInt::from(c.mult)))?;
        }
        Ok(sum)
    }

    fn check_balance(&self, step: usize) -> Result<()> {
        let a = self.a_total()?;
        if a != self.b_side {
            return Err(LedgerError::Unbalanced { step, a: a.to_string(), b: self.b_side.to_string() });
        }
        Ok(())
    }

    fn lookup(&self, name: &str) -> Option<DivisorClass> {
        self.a_side
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.class.clone())
            .or_else(|| self.exceptionals.iter().find(|(n, _)| n == name).map(|(_, c)| c.clone()))
    }

    /// Moves every class through a basis change. The map's residual curve, if
    /// any, becomes the exceptional curve used by the next step.
    pub fn convert(&mut self, map: &BasisMap, residual_name: &str) -> Result<()> {
        for c in &mut self.a_side {
            c.class = map.apply(&c.class)?;
        }
        for (_, c) in &mut self.exceptionals {
            *c = map.apply(c)?;
        }
        self.b_side = map.apply(&self.b_side)?;
        self.lattice = map.target().clone();
        self.pending = map.residual().map(|r| (residual_name.to_string(), r.clone()));
        Ok(())
    }

    /// Applies one blow-up. On a balance failure the ledger is left untouched.
    pub fn step(&mut self, spec: &StepSpec) -> Result<&StepRecord> {
        for (n, m) in &spec.through {
            if *m == 0 {
                return Err(LedgerError::ZeroDrop(n.clone()));
            }
            if self.lookup(n).is_none() {
                return Err(LedgerError::UnknownComponent(n.clone()));
            }
        }
        let mut next = self.clone();
        let (name, exc) = match next.pending.take() {
            Some((pname, class)) => (spec.name.clone().unwrap_or(pname), class),
            None => {
                let blown = match self.lattice.kind() {
                    LatticeKind::Blowup(_) if spec.name.is_none() => self.lattice.blow_up()?,
                    LatticeKind::Ruled(_) => return Err(LedgerError::CannotBlowUp(self.lattice.kind().to_string())),
                    _ => {
                        let n = spec.name.clone().unwrap_or_else(|| format!("x{}", self.log.len()));
                        self.lattice.blow_up_as(&n)?
                    }
                };
                let name = blown.names().last().cloned().unwrap_or_default();
                for c in &mut next.a_side {
                    c.class = c.class.extend_to(&blown)?;
                }
                for (_, c) in &mut next.exceptionals {
                    *c = c.extend_to(&blown)?;
                }
                next.b_side = next.b_side.extend_to(&blown)?;
                next.lattice = blown.clone();
                let e = generator(&blown, &name)?;
                (name, e)
            }
        };
        let drop = |c: &DivisorClass, m: u64| c.checked_sub(&exc.scale(&BigInt::from(m)));
        for (n, m) in &spec.through {
            if let Some(c) = next.a_side.iter_mut().find(|c| &c.name == n) {
                c.class = drop(&c.class, *m)?;
            }
            if let Some((_, c)) = next.exceptionals.iter_mut().find(|(x, _)| x == n) {
                *c = drop(c, *m)?;
            }
        }
        next.b_side = drop(&next.b_side, spec.b_drop)?;
        next.exceptionals.push((name.clone(), exc.clone()));
        if spec.exceptional_mult > 0 {
            if next.a_side.iter().any(|c| c.name == name) {
                return Err(LedgerError::DuplicateComponent(name));
            }
            next.a_side.push(Component { name: name.clone(), class: exc, mult: spec.exceptional_mult });
        }
        let step = self.log.len();
        next.check_balance(step)?;
        next.log.push(StepRecord { step, exceptional: Some(name), b_side: next.b_side.clone(), balanced: true });
        *self = next;
        Ok(self.log.last().expect("just pushed"))
    }

    /// Balance checkpoints passed so far, counting the initial state.
    pub fn checkpoints(&self) -> usize {
        self.log.iter().filter(|r| r.balanced).count()
    }

    /// Checks the separated configuration as a fiber of the given genus.
    pub fn finalize(&self, genus: i64) -> Result<FiberConfiguration> {
        let mut problems = Vec::new();
        let fiber = self.b_side.clone();
        if self.a_total()? != fiber {
            problems.push(format!("components sum to {} instead of {fiber}", self.a_total()?));
        }
        if !fiber.square().is_zero() {
            problems.push(format!("fiber square is {}", fiber.square()));
        }
        let mut components = Vec::new();
        for c in &self.a_side {
            let g = c.class.adjunction_genus()?;
            if !g.is_zero() {
                problems.push(format!("component {} = {} has genus {g}", c.name, c.class));
            }
            components.push(FiberComponent {
                name: c.name.clone(),
                class: c.class.clone(),
                mult: c.mult,
                square: c.class.square(),
                genus: g.to_integer(),
            });
        }
        let fg = fiber.adjunction_genus()?;
        if fg != BigInt::from(genus).into() {
            problems.push(format!("fiber genus is {fg}, expected {genus}"));
        }
        if !problems.is_empty() {
            return Err(LedgerError::Invalid(problems));
        }
        let sections = self
            .exceptionals
            .iter()
            .filter(|(n, _)| !self.a_side.iter().any(|c| &c.name == n))
            .map(|(n, c)| (n.clone(), c.clone()))
            .collect();
        Ok(FiberConfiguration { components, fiber_class: fiber, sections })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberComponent {
    pub name: String,
    pub class: DivisorClass,
    pub mult: u64,
    pub square: BigInt,
    pub genus: BigInt,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberConfiguration {
    pub components: Vec<FiberComponent>,
    pub fiber_class: DivisorClass,
    /// Exceptional curves that ended up outside the fiber.
    pub sections: Vec<(String, DivisorClass)>,
}

impl FiberConfiguration {
    pub fn multiplicities(&self) -> Vec<u64> {
        self.components.iter().map(|c| c.mult).collect()
    }

    pub fn squares(&self) -> Vec<BigInt> {
        self.components.iter().map(|c| c.square.clone()).collect()
    }

    /// Self-intersections outside the expected shape: exactly one −(g+1)
    /// curve, all others −1 or −2.
    pub fn shape_warnings(&self, genus: i64) -> Vec<String> {
        let special = BigInt::from(-(genus + 1));
        let mut out = Vec::new();
        let n = self.components.iter().filter(|c| c.square == special).count();
        if n != 1 {
            out.push(format!("{n} components of square {special}, expected one"));
        }
        for c in &self.components {
            if c.square != special && c.square != BigInt::from(-1) && c.square != BigInt::from(-2) {
                out.push(format!("component {} has square {}", c.name, c.square));
            }
        }
        out
    }
}

impl fmt::Display for FiberConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "fiber {}", self.fiber_class)?;
        for c in &self.components {
            writeln!(f, "  {} x{}: {} (square {})", c.name, c.mult, c.class, c.square)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationCheck {
    pub consistent: bool,
    /// First generator pairing nontrivially with lhs − rhs.
    pub witness: Option<String>,
    /// Every nonzero pairing of lhs − rhs with a generator.
    pub defects: Vec<(String, BigInt)>,
    pub parity: Parity,
    /// Set when the defect pattern is forced by the form's parity.
    pub note: Option<String>,
}

/// Necessary condition for `lhs = rhs` in the lattice: the difference pairs
/// to zero with every generator.
pub fn verify_relation(lhs: &DivisorClass, rhs: &DivisorClass) -> Result<RelationCheck> {
    let diff = lhs.checked_sub(rhs)?;
    let lat = diff.lattice().clone();
    let mut defects = Vec::new();
    for name in lat.names() {
        let p = diff.pair(&generator(&lat, name)?)?;
        if !p.is_zero() {
            defects.push((name.clone(), p));
        }
    }
    let parity = form_parity(lat.gram());
    // On an even form D·D is even for every D; an odd defect on D·D itself
    // shows the stated squares cannot all hold together with the relation.
    let self_defect = diff.square();
    let note = (!defects.is_empty() && parity == Parity::Odd)
        .then(|| {
            let odd: Vec<String> = lat
                .names()
                .iter()
                .enumerate()
                .filter(|(i, _)| lat.gram().get(*i, *i).is_odd())
                .map(|(_, n)| n.clone())
                .collect();
            format!(
                "form is odd on {}; (lhs-rhs)^2 = {self_defect}; an even form with the same incidences may differ",
                odd.join(",")
            )
        });
    Ok(RelationCheck { consistent: defects.is_empty(), witness: defects.first().map(|d| d.0.clone()), defects, parity, note })
}

pub fn form_parity(gram: &IntMatrix) -> Parity {
    if (0..gram.rows()).all(|i| gram.get(i, i).is_even()) {
        Parity::Even
    } else {
        Parity::Odd
    }
}

/// Builds an abstract lattice from a list of names, self-intersections and
/// symmetric incidences; unlisted pairs are 0.
pub fn gram_from_incidences(
    names: &[String],
    squares: &[i64],
    incidences: &[(&str, &str, i64)],
    canonical: Option<Vec<BigInt>>,
) -> std::result::Result<Arc<IntersectionLattice>, LatticeError> {
    let n = names.len();
    let mut gram = IntMatrix::zeros(n, n);
    for (i, s) in squares.iter().enumerate() {
        gram.set(i, i, BigInt::from(*s));
    }
    let idx = |s: &str| names.iter().position(|x| x == s).ok_or_else(|| LatticeError::UnknownSymbol(s.to_string()));
    for (a, b, v) in incidences {
        let (i, j) = (idx(a)?, idx(b)?);
        gram.set(i, j, BigInt::from(*v));
        gram.set(j, i, BigInt::from(*v));
    }
    IntersectionLattice::abstract_lattice(names.to_vec(), gram, canonical)
}

/// Which self-intersection to use for the curves over the five lines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum K3Variant {
    /// F_i² = G_i² = −3, with F_i·G_i = 3 as the second relation requires.
    Literal,
    /// F_i² = G_i² = −2 and F_i·G_i = 2, as on the K3 surface itself.
    Even,
}

/// E0, E1..E5, F1..F5, G1..G5 on the double plane: E0·Ei = 1, Ei·Fi = Ei·Gi = 1,
/// the F's meet pairwise once (common point p), as do the G's (point q).
pub fn k3_lattice(variant: K3Variant) -> Arc<IntersectionLattice> {
    let mut names = vec!["E0".to_string()];
    for p in ["E", "F", "G"] {
        names.extend((1..=5).map(|i| format!("{p}{i}")));
    }
    let (curve_sq, fg) = match variant {
        K3Variant::Literal => (-3, 3),
        K3Variant::Even => (-2, 2),
    };
    let mut squares = vec![-2; 6];
    squares.extend([curve_sq; 10]);
    let mut inc: Vec<(String, String, i64)> = Vec::new();
    for i in 1..=5 {
        inc.push(("E0".into(), format!("E{i}"), 1));
        inc.push((format!("E{i}"), format!("F{i}"), 1));
        inc.push((format!("E{i}"), format!("G{i}"), 1));
        inc.push((format!("F{i}"), format!("G{i}"), fg));
        for j in i + 1..=5 {
            inc.push((format!("F{i}"), format!("F{j}"), 1));
            inc.push((format!("G{i}"), format!("G{j}"), 1));
        }
    }
    let inc: Vec<(&str, &str, i64)> = inc.iter().map(|(a, b, v)| (a.as_str(), b.as_str(), *v)).collect();
    let k = vec![BigInt::zero(); names.len()];
    gram_from_incidences(&names, &squares, &inc, Some(k)).expect("fixed data is valid")
}

fn sum_of(lat: &Arc<IntersectionLattice>, terms: &[(i64, String)]) -> DivisorClass {
    let mut d = zero(lat);
    for (c, n) in terms {
        d = d.checked_add(&generator(lat, n).expect("known generator").scale(&BigInt::from(*c))).expect("same lattice");
    }
    d
}

/// `5E0 = Σ (Fi − 2Ei)` and, for each i, `Gi + Fi = 2E0 + Σ_{j≠i} Ej`.
pub fn k3_relations(lat: &Arc<IntersectionLattice>) -> Vec<(String, DivisorClass, DivisorClass)> {
    let mut out = Vec::new();
    let lhs = sum_of(lat, &[(5, "E0".into())]);
    let rhs: Vec<(i64, String)> = (1..=5).flat_map(|i| [(1, format!("F{i}")), (-2, format!("E{i}"))]).collect();
    out.push(("5E0 = sum(Fi-2Ei)".to_string(), lhs, sum_of(lat, &rhs)));
    for i in 1..=5 {
        let lhs = sum_of(lat, &[(1, format!("G{i}")), (1, format!("F{i}"))]);
        let mut rhs = vec![(2, "E0".to_string())];
        rhs.extend((1..=5).filter(|&j| j != i).map(|j| (1, format!("E{j}"))));
        out.push((format!("G{i}+F{i} = 2E0+sum(Ej, j!={i})"), lhs, sum_of(lat, &rhs)));
    }
    out
}

/// Three rational curves F, G, E through one point: F² = G² = −3, E² = −2,
/// each pair meeting once.
pub fn ix2_lattice() -> Arc<IntersectionLattice> {
    let names: Vec<String> = ["F", "G", "E"].iter().map(|s| s.to_string()).collect();
    gram_from_incidences(&names, &[-3, -3, -2], &[("F", "G", 1), ("F", "E", 1), ("G", "E", 1)], None)
        .expect("fixed data is valid")
}

/// A D7 chain E1..E7 (E5 branching to E6 and E7) with F meeting E6 and G meeting E7.
pub fn ix4_lattice() -> Arc<IntersectionLattice> {
    let mut names: Vec<String> = (1..=7).map(|i| format!("E{i}")).collect();
    names.push("F".into());
    names.push("G".into());
    let mut squares = vec![-2; 7];
    squares.extend([-3, -3]);
    let inc = [
        ("E1", "E2", 1),
        ("E2", "E3", 1),
        ("E3", "E4", 1),
        ("E4", "E5", 1),
        ("E5", "E6", 1),
        ("E5", "E7", 1),
        ("F", "E6", 1),
        ("G", "E7", 1),
    ];
    gram_from_incidences(&names, &squares, &inc, None).expect("fixed data is valid")
}
