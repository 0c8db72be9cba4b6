//! Hirzebruch surfaces F_n, their identification with blow-ups of the plane,
//! and the numerical invariants of genus-g fibrations.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::lattice::{
    canonical_class, from_coeffs, generator, parse_class, DivisorClass, HomeoType, IntersectionLattice,
    LatticeError, LatticeKind, ManifoldInvariants, Parity,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuledError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("no built-in basis conversion for F_{0}")]
    UnsupportedDegree(u32),
    #[error("map does not preserve the pairing on ({0}, {1})")]
    NotIsometric(String, String),
    #[error("class is not in ruled({0})")]
    WrongSource(u32),
    #[error("pencil needs k = g + 1 - n > 0, got {0}")]
    EmptyPencil(i64),
}

type Result<T> = std::result::Result<T, RuledError>;

#[derive(Clone, Debug)]
pub struct RuledModel {
    pub n: u32,
    pub lattice: Arc<IntersectionLattice>,
}

impl RuledModel {
    pub fn new(n: u32) -> Self {
        let lattice = IntersectionLattice::ruled(n);
        let m = RuledModel { n, lattice };
        let c0 = m.c_zero();
        assert_eq!(c0.square(), BigInt::from(-i64::from(n)));
        assert!(c0.pair(&m.c_inf()).unwrap().is_zero());
        m
    }

    pub fn c_inf(&self) -> DivisorClass {
        generator(&self.lattice, "Cinf").unwrap()
    }

    pub fn c_zero(&self) -> DivisorClass {
        generator(&self.lattice, "C0").unwrap()
    }

    pub fn fiber(&self) -> DivisorClass {
        generator(&self.lattice, "F").unwrap()
    }

    /// `a·C0 + b·F`.
    pub fn divisor(&self, a: i64, b: i64) -> DivisorClass {
        self.c_zero()
            .scale(&BigInt::from(a))
            .checked_add(&self.fiber().scale(&BigInt::from(b)))
            .unwrap()
    }
}

pub fn canonical(n: u32) -> DivisorClass {
    canonical_class(&IntersectionLattice::ruled(n)).unwrap()
}

/// A linear map from ruled(n) into another lattice, given on `Cinf` and `F`.
#[derive(Clone, Debug)]
pub struct BasisMap {
    source: Arc<IntersectionLattice>,
    target: Arc<IntersectionLattice>,
    images: Vec<DivisorClass>,
    /// Class of the exceptional curve that F_n misses: the canonical classes
    /// satisfy φ(K) + residual = K_target. Absent when φ(K) = K_target.
    residual: Option<DivisorClass>,
}

impl BasisMap {
    /// The identifications F₂ # CP̄² ≅ CP² # 2CP̄² and F₃ ≅ CP² # CP̄², with F ↦ h − e1.
    pub fn builtin(n: u32) -> Result<Self> {
        let (k, cinf, residual) = match n {
            2 => (2, "2h-e1-e2", Some("h-e1-e2")),
            3 => (1, "2h-e1", None),
            _ => return Err(RuledError::UnsupportedDegree(n)),
        };
        let target = IntersectionLattice::blowup(k);
        let images = vec![parse_class(&target, cinf)?, parse_class(&target, "h-e1")?];
        let residual = residual.map(|r| parse_class(&target, r)).transpose()?;
        Self::custom(IntersectionLattice::ruled(n), target, images, residual)
    }

    pub fn custom(
        source: Arc<IntersectionLattice>,
        target: Arc<IntersectionLattice>,
        images: Vec<DivisorClass>,
        residual: Option<DivisorClass>,
    ) -> Result<Self> {
        let n = match source.kind() {
            LatticeKind::Ruled(n) => *n,
            _ => return Err(LatticeError::WrongKind(source.kind().to_string()).into()),
        };
        if images.len() != source.rank() || images.iter().any(|c| !Arc::ptr_eq(c.lattice(), &target) && **c.lattice() != *target) {
            return Err(RuledError::WrongSource(n));
        }
        let map = BasisMap { source, target, images, residual };
        map.validate()?;
        Ok(map)
    }

    fn validate(&self) -> Result<()> {
        let names = self.source.names();
        for i in 0..names.len() {
            for j in i..names.len() {
                let want = self.source.gram().get(i, j);
                let got = self.images[i].pair(&self.images[j])?;
                if &got != want {
                    return Err(RuledError::NotIsometric(names[i].clone(), names[j].clone()));
                }
            }
        }
        Ok(())
    }

    pub fn degree(&self) -> u32 {
        match self.source.kind() {
            LatticeKind::Ruled(n) => *n,
            _ => unreachable!(),
        }
    }

    pub fn target(&self) -> &Arc<IntersectionLattice> {
        &self.target
    }

    pub fn residual(&self) -> Option<&DivisorClass> {
        self.residual.as_ref()
    }

    pub fn apply(&self, d: &DivisorClass) -> Result<DivisorClass> {
        if **d.lattice() != *self.source {
            return Err(RuledError::WrongSource(self.degree()));
        }
        let mut out = from_coeffs(&self.target, vec![BigInt::zero(); self.target.rank()]);
        for (c, img) in d.coeffs().iter().zip(&self.images) {
            out = out.checked_add(&img.scale(c))?;
        }
        Ok(out)
    }

    /// φ(K_source) (+ residual) compared with the target canonical class.
    pub fn maps_canonical(&self) -> Result<bool> {
        let k = canonical_class(&self.source)?;
        let mut image = self.apply(&k)?;
        if let Some(r) = &self.residual {
            image = image.checked_add(r)?;
        }
        Ok(image == canonical_class(&self.target)?)
    }
}

pub fn to_blowup_basis(n: u32, d: &DivisorClass) -> Result<DivisorClass> {
    BasisMap::builtin(n)?.apply(d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ampleness {
    pub very_ample: bool,
    pub irreducible_member: bool,
}

/// Criteria for `a·C0 + b·F` on F_n: very ample iff a > 0 and b > an; the
/// complete linear system has an irreducible member iff it is very ample,
/// or it is F itself, or C0, or n > 0, a > 0 and b = an.
pub fn ample_predicates(a: i64, b: i64, n: u32) -> Ampleness {
    let n = i64::from(n);
    let very_ample = a > 0 && b > a * n;
    let irreducible_member = very_ample
        || (a == 0 && b == 1)
        || (a == 1 && b == 0)
        || (n > 0 && a > 0 && b == a * n);
    Ampleness { very_ample, irreducible_member }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PencilStats {
    pub k: i64,
    pub base_points: BigInt,
    pub genus: BigRational,
}

/// The pencil |2Cinf + kF| on F_n with k = g + 1 - n.
pub fn pencil_stats(g: i64, n: u32) -> Result<PencilStats> {
    let k = g + 1 - i64::from(n);
    if k <= 0 {
        return Err(RuledError::EmptyPencil(k));
    }
    let m = RuledModel::new(n);
    let d = m
        .c_inf()
        .scale(&BigInt::from(2))
        .checked_add(&m.fiber().scale(&BigInt::from(k)))?;
    Ok(PencilStats { k, base_points: d.square(), genus: d.adjunction_genus()? })
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct FibrationInvariants {
    pub kf2: i64,
    pub chi_f: i64,
    pub q_f: i64,
    pub e_f: i64,
    pub g: i64,
    pub b: i64,
}

impl FibrationInvariants {
    pub fn new(kf2: i64, chi_f: i64, g: i64, b: i64) -> Self {
        FibrationInvariants { kf2, chi_f, g, b, ..Default::default() }
    }

    /// Fills `e_f` from the topological Euler numbers of the singular fibers.
    pub fn with_singular_fibers(mut self, chi_top: &[i64]) -> Self {
        self.e_f = chi_top.iter().map(|c| c - (2 - 2 * self.g)).sum();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FibrationTotals {
    pub c1sq: i64,
    pub chi: i64,
    pub e: i64,
    pub sigma: i64,
    pub label: Option<HomeoType>,
}

/// Absolute invariants of the total space; `flags` carries the parity and a
/// simple-connectivity justification when a homeomorphism label is wanted.
pub fn fibration_totals(fi: &FibrationInvariants, flags: Option<(Parity, &str)>) -> FibrationTotals {
    let c1sq = fi.kf2 + 8 * (fi.g - 1) * (fi.b - 1);
    let chi = fi.chi_f + (fi.g - 1) * (fi.b - 1);
    let e = 12 * chi - c1sq;
    let sigma = c1sq - 8 * chi;
    let label = flags.and_then(|(parity, why)| {
        ManifoldInvariants::new(e, sigma, parity).ok()?.with_sc(why).homeo_type().ok()
    });
    FibrationTotals { c1sq, chi, e, sigma, label }
}

pub fn genus_is(d: &DivisorClass, g: i64) -> bool {
    d.adjunction_genus().map(|x| x == BigRational::from_integer(BigInt::from(g))).unwrap_or(false)
}
