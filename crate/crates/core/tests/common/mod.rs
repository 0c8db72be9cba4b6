//! Property checks shared by the proptest suite and the acceptance runner.
#![allow(dead_code)]

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use surgery_core::blowdown::{blowdown_invariants, hj_expansion};
use surgery_core::certify::{positivity_over_cone, BasicClassSet, DescendedClass, SymbolicLinearForm};
use surgery_core::hirzebruch::BasisMap;
use surgery_core::lattice::{
    canonical_class, from_coeffs, DivisorClass, IntersectionLattice, ManifoldInvariants, Parity,
};
use surgery_core::mcg::{
    apply_move, classify_block, word_to_matrix, ChainHomology, Letter, Move, TwistWord,
};
use surgery_core::pencilscript::verify_relation;
use surgery_core::plan::parse;

pub type Check = Result<(), TestCaseError>;

fn int(n: i64) -> BigInt {
    BigInt::from(n)
}

fn class(lat: &Arc<IntersectionLattice>, c: &[i64]) -> DivisorClass {
    let mut v: Vec<BigInt> = c.iter().map(|&x| int(x)).collect();
    v.resize(lat.rank(), BigInt::zero());
    from_coeffs(lat, v)
}

/// Either CP² # k CP̄² (k < 9) or a Hirzebruch surface of degree < 5.
pub fn arb_lattice() -> impl Strategy<Value = Arc<IntersectionLattice>> {
    prop_oneof![
        (0usize..9).prop_map(IntersectionLattice::blowup),
        (0u32..5).prop_map(IntersectionLattice::ruled),
    ]
}

pub fn arb_coeffs() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(-20i64..=20, 9)
}

pub fn pairing_is_bilinear_and_k_characteristic(
    lat: Arc<IntersectionLattice>,
    x: Vec<i64>,
    y: Vec<i64>,
    z: Vec<i64>,
    a: i64,
    b: i64,
) -> Check {
    let (x, y, z) = (class(&lat, &x), class(&lat, &y), class(&lat, &z));
    let lhs = x.scale(&int(a)).checked_add(&y.scale(&int(b))).unwrap().pair(&z).unwrap();
    let rhs = int(a) * x.pair(&z).unwrap() + int(b) * y.pair(&z).unwrap();
    prop_assert_eq!(lhs, rhs);
    prop_assert_eq!(x.pair(&y).unwrap(), y.pair(&x).unwrap());
    let k = canonical_class(&lat).unwrap();
    let parity = (k.pair(&x).unwrap() - x.square()) % int(2);
    prop_assert!(parity.is_zero(), "K.x and x.x differ in parity for {}", x);
    Ok(())
}

pub fn basis_map_preserves_pairing(n: u32, x: (i64, i64), y: (i64, i64)) -> Check {
    let map = BasisMap::builtin(n).unwrap();
    let lat = IntersectionLattice::ruled(n);
    let (x, y) = (class(&lat, &[x.0, x.1]), class(&lat, &[y.0, y.1]));
    let (mx, my) = (map.apply(&x).unwrap(), map.apply(&y).unwrap());
    prop_assert_eq!(mx.pair(&my).unwrap(), x.pair(&y).unwrap());
    Ok(())
}

fn word_from(genus: u32, raw: &[(u32, bool)]) -> TwistWord {
    let n = 2 * genus + 1;
    let letters = raw.iter().map(|&(i, inv)| Letter { index: 1 + i % n, inverse: inv }).collect();
    TwistWord::new(genus, letters).unwrap()
}

pub fn arb_word_and_moves() -> impl Strategy<Value = (u32, Vec<(u32, bool)>, Vec<(u8, usize, u32, bool)>)> {
    (
        2u32..=3,
        prop::collection::vec((0u32..7, any::<bool>()), 1..9),
        prop::collection::vec((0u8..6, 0usize..12, 0u32..7, any::<bool>()), 1..12),
    )
}

/// Applies whichever of the random moves are legal; the monodromy must not change.
pub fn moves_preserve_matrix(genus: u32, raw: Vec<(u32, bool)>, moves: Vec<(u8, usize, u32, bool)>) -> Check {
    let h = ChainHomology::standard(genus);
    let mut w = word_from(genus, &raw);
    let want = word_to_matrix(&w, &h);
    for (kind, pos, letter, inv) in moves {
        let i = 1 + pos % (w.len() + 1);
        let l = Letter { index: 1 + letter % (2 * genus + 1), inverse: inv };
        let mv = match kind {
            0 => Move::HurwitzRight(i),
            1 => Move::HurwitzLeft(i),
            2 => Move::Braid(i),
            3 => Move::Commute(i),
            4 => Move::Insert(i, l),
            _ => Move::Cancel(i),
        };
        if let Ok(next) = apply_move(&w, &mv) {
            prop_assert_eq!(word_to_matrix(&next, &h), want.clone(), "{} on {}", mv, w);
            w = next;
        }
    }
    Ok(())
}

pub fn word_round_trip(genus: u32, raw: Vec<(u32, bool)>) -> Check {
    let w = word_from(genus, &raw);
    prop_assert_eq!(TwistWord::parse(genus, &w.to_string()).unwrap(), w);
    Ok(())
}

fn terms(picks: &[(i64, usize)], gens: &[String]) -> String {
    let mut s = String::new();
    for (i, (c, g)) in picks.iter().enumerate() {
        let c = if *c == 0 { 1 } else { *c };
        let sign = if c < 0 { "-" } else if i > 0 { "+" } else { "" };
        s.push_str(&format!("{sign} {}{} ", c.abs(), gens[g % gens.len()]));
    }
    s
}

pub fn arb_plan_ops() -> impl Strategy<Value = (usize, Vec<(u8, Vec<(i64, usize)>)>)> {
    (0usize..5, prop::collection::vec((0u8..8, prop::collection::vec((-4i64..=4, 0usize..40), 1..4)), 0..16))
}

/// Builds a valid plan from random choices.
pub fn plan_text(k: usize, ops: &[(u8, Vec<(i64, usize)>)]) -> String {
    let mut gens: Vec<String> = std::iter::once("h".to_string()).chain((1..=k).map(|i| format!("e{i}"))).collect();
    let mut names: Vec<String> = Vec::new();
    let mut out = format!("surface blowup {k}\n");
    for (n, (op, picks)) in ops.iter().enumerate() {
        let pool: Vec<String> = gens.iter().chain(&names).cloned().collect();
        match op {
            0 | 1 => {
                out.push_str(&format!("class c{n} = {}\n", terms(picks, &pool)));
                names.push(format!("c{n}"));
            }
            2 => {
                out.push_str("blowup\n");
                gens.push(format!("e{}", gens.len()));
            }
            3 => {
                let a = &pool[picks[0].1 % pool.len()];
                out.push_str(&format!("pair {a} K\n"));
            }
            4 => {
                out.push_str(&format!("resolve r{n} = {}, {}\n", terms(picks, &pool), terms(&picks[..1], &gens)));
                names.push(format!("r{n}"));
            }
            5 => {
                let (p, q) = [(2, 1), (3, 1), (5, 2), (7, 3), (11, 1)][picks[0].1 % 5];
                out.push_str(&format!("plumbing {p} {q}\nembed u1 = {}\n", terms(picks, &pool)));
            }
            6 => out.push_str(&format!("claim key.{n} \"some # text {}\"\n", picks.len())),
            _ => out.push_str(&format!("assert key.{n} \"value {}\"\nreport pair.\n", picks[0].0)),
        }
    }
    out
}

pub fn plan_round_trip(k: usize, ops: Vec<(u8, Vec<(i64, usize)>)>) -> Check {
    let text = plan_text(k, &ops);
    let plan = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
    let printed = plan.to_string();
    let again = parse(&printed).map_err(|e| TestCaseError::fail(format!("{e}\n{printed}")))?;
    let a: Vec<_> = plan.statements.iter().map(|s| &s.statement).collect();
    let b: Vec<_> = again.statements.iter().map(|s| &s.statement).collect();
    prop_assert_eq!(a, b);
    prop_assert_eq!(again.to_string(), printed);
    Ok(())
}

pub fn arb_blowdown() -> impl Strategy<Value = (i64, i64, bool, u64, u64)> {
    (0i64..30, 0i64..40, any::<bool>(), 2u64..30, 1u64..30)
}

/// Rational blowdown removes negative-definite classes only.
pub fn blowdown_keeps_b2_plus(plus: i64, minus: i64, odd: bool, p: u64, q: u64) -> Check {
    let q = 1 + (q - 1) % (p - 1);
    let Ok(weights) = hj_expansion(p, q) else { return Ok(()) };
    let parity = if odd { Parity::Odd } else { Parity::Even };
    let inv = ManifoldInvariants::new(2 + plus + minus, plus - minus, parity).unwrap();
    match blowdown_invariants(&inv, weights.len()) {
        Ok(out) => {
            prop_assert_eq!(out.b2_plus(), inv.b2_plus());
            prop_assert_eq!(out.b2_minus(), inv.b2_minus() - weights.len() as i64);
        }
        Err(_) => prop_assert!((minus as usize) < weights.len()),
    }
    Ok(())
}

/// Every fraction n/d in (0, 1) with d ≤ 8.
fn grid() -> Vec<BigRational> {
    let mut v: Vec<BigRational> = Vec::new();
    for d in 2..=8i64 {
        for n in 1..d {
            let q = BigRational::new(int(n), int(d));
            if !v.contains(&q) {
                v.push(q);
            }
        }
    }
    v.sort();
    v
}

pub fn arb_functional() -> impl Strategy<Value = (Vec<i64>, Vec<Vec<usize>>)> {
    (1usize..=6).prop_flat_map(|k| {
        (
            prop::collection::vec(-12i64..=12, k + 1),
            prop::collection::vec(prop::collection::vec(0usize..64, k), 40),
        )
    })
}

/// Cone positivity agrees with sampling the open cone on a rational grid.
pub fn positivity_matches_grid(coeffs: Vec<i64>, samples: Vec<Vec<usize>>) -> Check {
    let k = coeffs.len() - 1;
    let syms = SymbolicLinearForm::standard_symbols(k);
    let f = SymbolicLinearForm::from_coeffs(syms, coeffs.iter().map(|&c| BigRational::from_integer(int(c))).collect());
    let pos = positivity_over_cone(&f).unwrap();
    let least = pos.vertex_values.iter().map(|(_, v)| v.clone()).min().unwrap();
    let g = grid();
    for pick in samples {
        let mut b: Vec<BigRational> = pick.iter().map(|&i| g[i % g.len()].clone()).collect();
        b.sort_by(|x, y| y.cmp(x));
        b.dedup();
        let sum: BigRational = b.iter().cloned().sum();
        if b.len() < k || sum >= BigRational::one() {
            continue;
        }
        let mut point = vec![BigRational::one()];
        point.extend(b);
        let v = f.evaluate(&point);
        prop_assert!(v >= least, "sample below the least vertex value");
        if pos.positive {
            prop_assert!(v > BigRational::zero(), "positive form vanishes inside the cone");
        }
    }
    Ok(())
}

fn set_from(lat: &Arc<IntersectionLattice>, raw: &[Vec<i64>]) -> BasicClassSet {
    let mut s = BasicClassSet::trivial("S");
    for (i, c) in raw.iter().enumerate() {
        let d = class(lat, c);
        if !s.entries.iter().any(|(x, _)| x.source == d) {
            s.entries.push((DescendedClass { source: d, embeddings: vec![] }, int(1 + i as i64)));
        }
    }
    s
}

pub fn arb_class_set() -> impl Strategy<Value = Vec<Vec<i64>>> {
    prop::collection::vec(prop::collection::vec(-3i64..=3, 5), 1..7)
}

pub fn sw_blowup_doubles_and_minimality_is_symmetric(raw: Vec<Vec<i64>>) -> Check {
    let lat = IntersectionLattice::blowup(4);
    let s = set_from(&lat, &raw);
    let bigger = lat.blow_up().unwrap();
    let e = surgery_core::lattice::generator(&bigger, "e5").unwrap();
    let up = s.blowup(&e).unwrap();
    prop_assert_eq!(up.len(), 2 * s.len());
    let negated: Vec<Vec<i64>> = raw.iter().map(|c| c.iter().map(|x| -x).collect()).collect();
    let n = set_from(&lat, &negated);
    prop_assert_eq!(s.minimality().unwrap().minimal, n.minimality().unwrap().minimal);
    Ok(())
}

pub fn relation_with_itself_is_consistent(lat: Arc<IntersectionLattice>, x: Vec<i64>) -> Check {
    let x = class(&lat, &x);
    let r = verify_relation(&x, &x).unwrap();
    prop_assert!(r.consistent);
    prop_assert!(r.witness.is_none());
    Ok(())
}

pub fn arb_block() -> impl Strategy<Value = (u32, Vec<u32>, Vec<(u32, bool)>)> {
    (2u32..=3, prop::collection::vec(0u32..7, 1..4), prop::collection::vec((0u32..7, any::<bool>()), 0..4))
}

/// Conjugating every factor of a block by the same word keeps its kind.
pub fn block_kind_is_conjugation_invariant(genus: u32, cores: Vec<u32>, conj: Vec<(u32, bool)>) -> Check {
    let h = ChainHomology::standard(genus);
    let n = 2 * genus + 1;
    let block = TwistWord::new(genus, cores.iter().map(|&i| Letter::pos(1 + i % n)).collect()).unwrap();
    let c = word_from(genus, &conj);
    let mut conjugated = TwistWord::empty(genus);
    for &i in &cores {
        let one = TwistWord::new(genus, vec![Letter::pos(1 + i % n)]).unwrap();
        conjugated = conjugated.concat(&c.concat(&one).concat(&c.inverse()));
    }
    let conjugated = conjugated.free_reduce();
    prop_assert_eq!(classify_block(&block, &h), classify_block(&conjugated, &h), "{} vs {}", block, conjugated);
    Ok(())
}
