//! Executes a parsed plan against the library and collects a report.

use std::collections::HashMap;
use std::sync::Arc;

use indexmap::IndexMap;
use num_bigint::BigInt;
use num_traits::Zero;
use thiserror::Error;

use crate::blowdown::{blowdown_invariants, continued_fraction_value, descent_check, PlumbingChain, PlumbingEmbedding};
use crate::certify::{
    exotic_functional, positivity_over_cone, restrict_and_pair, verdict, BasicClassSet, Minimality, Positivity,
    SymbolicClass, SymbolicLinearForm, VerdictInputs,
};
use crate::hirzebruch::{fibration_totals, BasisMap, FibrationInvariants};
use crate::lattice::{
    canonical_class, generator, resolve, zero, DivisorClass, IntersectionLattice, ManifoldInvariants, Parity,
};
use crate::linalg::IntMatrix;
use crate::pencilscript::{Component, PencilLedger, StepSpec};
use crate::plan::{ComparedForm, Statement, SurgeryPlan, SwOp, Terms};
use crate::report::Report;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RunError {
    #[error("line {line}: `{statement}`: {message}")]
    Failed { line: usize, statement: String, message: String },
    #[error("line {line}: assertion failed: {key} is {found}, expected {expected}")]
    Assertion { line: usize, key: String, expected: String, found: String },
}

type R<T> = Result<T, String>;

fn err<E: ToString>(e: E) -> String {
    e.to_string()
}

fn join<T: ToString>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

#[derive(Default)]
struct Draft {
    names: Vec<String>,
    squares: Vec<i64>,
    meets: Vec<(String, String, i64)>,
    canonical: Option<Terms>,
}

struct LedgerRun {
    components: Vec<Component>,
    fiber: Option<DivisorClass>,
    ledger: Option<PencilLedger>,
}

struct FunctionalState {
    positivity: Positivity,
    restricted: SymbolicLinearForm,
    exotic: SymbolicLinearForm,
}

#[derive(Default)]
struct Machine {
    lattice: Option<Arc<IntersectionLattice>>,
    draft: Option<Draft>,
    ruled: Option<u32>,
    classes: IndexMap<String, DivisorClass>,
    inv: Option<ManifoldInvariants>,
    ledger: Option<LedgerRun>,
    chain: Option<(PlumbingChain, Vec<Option<DivisorClass>>)>,
    embeddings: Vec<PlumbingEmbedding>,
    blowdowns: usize,
    symplectic: HashMap<String, SymbolicClass>,
    functional: Option<FunctionalState>,
    sw: Option<BasicClassSet>,
    minimal: Option<Minimality>,
    report: Report,
    filters: Option<Vec<String>>,
}

pub fn run(plan: &SurgeryPlan) -> Result<Report, RunError> {
    let mut m = Machine::default();
    for located in &plan.statements {
        if let Statement::Assert { key, value } = &located.statement {
            let found = m.report.get(key).map(|v| v.to_string()).unwrap_or_else(|| "missing".into());
            if &found != value {
                return Err(RunError::Assertion {
                    line: located.line,
                    key: key.clone(),
                    expected: value.clone(),
                    found,
                });
            }
            continue;
        }
        m.exec(&located.statement).map_err(|message| RunError::Failed {
            line: located.line,
            statement: located.statement.to_string(),
            message,
        })?;
    }
    Ok(match &m.filters {
        Some(f) if !f.iter().any(String::is_empty) => m.report.filtered(f),
        _ => m.report,
    })
}

/// Parses and runs in one go; parse failures come back as the error string.
pub fn run_text(text: &str) -> Result<Report, String> {
    let plan = crate::plan::parse(text).map_err(err)?;
    run(&plan).map_err(err)
}

impl Machine {
    fn reset_surface(&mut self) {
        let report = std::mem::take(&mut self.report);
        let filters = self.filters.take();
        let blowdowns = self.blowdowns;
        *self = Machine { report, filters, blowdowns, ..Default::default() };
    }

    fn lattice(&mut self) -> R<Arc<IntersectionLattice>> {
        if let Some(d) = self.draft.take() {
            let n = d.names.len();
            let mut gram = IntMatrix::zeros(n, n);
            for (i, s) in d.squares.iter().enumerate() {
                gram.set(i, i, BigInt::from(*s));
            }
            let idx = |s: &str| d.names.iter().position(|x| x == s).ok_or(format!("unknown generator `{s}`"));
            for (a, b, v) in &d.meets {
                let (i, j) = (idx(a)?, idx(b)?);
                gram.set(i, j, BigInt::from(*v));
                gram.set(j, i, BigInt::from(*v));
            }
            let canonical = match &d.canonical {
                Some(t) => {
                    let mut k = vec![BigInt::zero(); n];
                    for (c, name) in t {
                        k[idx(name)?] += c;
                    }
                    Some(k)
                }
                None => None,
            };
            self.lattice = Some(IntersectionLattice::abstract_lattice(d.names, gram, canonical).map_err(err)?);
        }
        self.lattice.clone().ok_or_else(|| "no surface declared".into())
    }

    fn draft(&mut self) -> R<&mut Draft> {
        if self.lattice.is_some() {
            return Err("generators must be declared before the lattice is used".into());
        }
        Ok(self.draft.get_or_insert_with(Draft::default))
    }

    fn inv(&self) -> R<&ManifoldInvariants> {
        self.inv.as_ref().ok_or_else(|| "no invariants known; declare them with `invariants`".into())
    }

    fn named(&mut self, name: &str) -> R<DivisorClass> {
        let lat = self.lattice()?;
        if name == "K" {
            return canonical_class(&lat).map_err(err);
        }
        if let Some(c) = self.classes.get(name) {
            return c.extend_to(&lat).map_err(err);
        }
        generator(&lat, name).map_err(err)
    }

    fn class_of(&mut self, terms: &Terms) -> R<DivisorClass> {
        let mut out = zero(&self.lattice()?);
        for (c, name) in terms {
            out = out.checked_add(&self.named(name)?.scale(c)).map_err(err)?;
        }
        Ok(out)
    }

    fn ledger(&mut self) -> R<&mut LedgerRun> {
        self.ledger.as_mut().ok_or_else(|| "no ledger open".into())
    }

    /// Starts the ledger on first use.
    fn started(&mut self) -> R<&mut PencilLedger> {
        let l = self.ledger()?;
        if l.ledger.is_none() {
            let fiber = l.fiber.clone().ok_or("ledger has no `fiber` class")?;
            l.ledger = Some(PencilLedger::new(l.components.clone(), fiber).map_err(err)?);
        }
        Ok(l.ledger.as_mut().expect("just set"))
    }

    fn set(&mut self, key: impl Into<String>, value: impl Into<crate::report::Value>) {
        self.report.set(key, value);
    }

    fn exec(&mut self, st: &Statement) -> R<()> {
        use Statement::*;
        match st {
            SurfaceBlowup(k) => {
                self.reset_surface();
                self.lattice = Some(IntersectionLattice::blowup(*k));
                self.inv = Some(ManifoldInvariants::blowup_surface(*k).with_sc("rational surface"));
            }
            SurfaceRuled(n) => {
                self.reset_surface();
                self.lattice = Some(IntersectionLattice::ruled(*n));
                self.ruled = Some(*n);
                let parity = if n % 2 == 0 { Parity::Even } else { Parity::Odd };
                self.inv = Some(ManifoldInvariants::new(4, 0, parity).map_err(err)?.with_sc("rational surface"));
            }
            SurfaceAbstract => {
                self.reset_surface();
                self.draft = Some(Draft::default());
            }
            Gen { square, names } => {
                let d = self.draft()?;
                for n in names {
                    d.names.push(n.clone());
                    d.squares.push(*square);
                }
            }
            Meet { a, b, value } => self.draft()?.meets.push((a.clone(), b.clone(), *value)),
            Canonical(t) => self.draft()?.canonical = Some(t.clone()),
            Invariants { e, sigma, parity } => {
                self.inv = Some(ManifoldInvariants::new(*e, *sigma, *parity).map_err(err)?);
            }
            AssumeSc(why) => {
                let inv = self.inv()?.clone();
                self.inv = Some(inv.with_sc(why.clone()));
            }
            Class { name, terms } => {
                let c = self.class_of(terms)?;
                self.classes.insert(name.clone(), c);
            }
            Resolve { name, parts } => {
                let classes = parts.iter().map(|t| self.class_of(t)).collect::<R<Vec<_>>>()?;
                let r = resolve(&classes).map_err(err)?;
                self.set(format!("resolve.{name}.class"), r.class.to_string());
                self.set(format!("resolve.{name}.square"), r.square.clone());
                self.classes.insert(name.clone(), r.class);
            }
            Blowup(name) => {
                let lat = self.lattice()?;
                let next = match name {
                    None => lat.blow_up(),
                    Some(n) => lat.blow_up_as(n),
                }
                .map_err(err)?;
                self.lattice = Some(next);
                if let Some(inv) = &self.inv {
                    self.inv = Some(inv.blow_up());
                }
            }
            Ledger => {
                self.lattice()?;
                self.ledger = Some(LedgerRun { components: Vec::new(), fiber: None, ledger: None });
            }
            Component { name, terms, mult } => {
                let class = self.class_of(terms)?;
                self.ledger()?.components.push(crate::pencilscript::Component {
                    name: name.clone(),
                    class,
                    mult: *mult,
                });
            }
            Fiber(t) => {
                let c = self.class_of(t)?;
                self.ledger()?.fiber = Some(c);
            }
            Convert => {
                let n = self.ruled.ok_or("convert needs a ruled surface")?;
                let map = BasisMap::builtin(n).map_err(err)?;
                self.started()?.convert(&map, "e").map_err(err)?;
                self.lattice = Some(map.target().clone());
                self.ruled = None;
                self.classes.clear();
            }
            Step { through, exceptional, b_drop, name } => {
                let spec = StepSpec {
                    through: through.clone(),
                    exceptional_mult: *exceptional,
                    b_drop: *b_drop,
                    name: name.clone(),
                };
                let ledger = self.started()?;
                ledger.step(&spec).map_err(err)?;
                let lat = ledger.lattice().clone();
                self.lattice = Some(lat);
                if let Some(inv) = &self.inv {
                    self.inv = Some(inv.blow_up());
                }
            }
            Finalize { name, genus } => {
                let ledger = self.started()?.clone();
                let cfg = ledger.finalize(*genus).map_err(err)?;
                let log = ledger.log();
                self.set(format!("{name}.class"), cfg.fiber_class.to_string());
                self.set(format!("{name}.square"), cfg.fiber_class.square());
                let g = cfg.fiber_class.adjunction_genus().map_err(err)?;
                self.set(format!("{name}.genus"), g);
                self.set(format!("{name}.steps"), log.len() - 1);
                self.set(format!("{name}.checkpoints"), ledger.checkpoints());
                for r in log {
                    self.set(format!("{name}.step.{}", r.step), r.b_side.to_string());
                }
                self.set(format!("{name}.components"), join(cfg.components.iter().map(|c| &c.name)));
                self.set(format!("{name}.mults"), join(cfg.multiplicities()));
                self.set(format!("{name}.squares"), join(cfg.squares()));
                let sections: Vec<String> = cfg.sections.iter().map(|(n, c)| format!("{n}:{c}")).collect();
                self.set(format!("{name}.sections"), if sections.is_empty() { "none".into() } else { sections.join(" ") });
                let warnings = cfg.shape_warnings(*genus);
                self.set(format!("{name}.shape"), if warnings.is_empty() { "ok".into() } else { warnings.join("; ") });
                for c in &cfg.components {
                    self.classes.insert(format!("A_{}", c.name), c.class.clone());
                }
                self.classes.insert(name.clone(), cfg.fiber_class.clone());
                self.ledger = None;
            }
            Plumbing { p, q } => {
                let chain = PlumbingChain::new(*p, *q).map_err(err)?;
                let key = format!("plumbing.{}", self.blowdowns + 1);
                self.set(format!("{key}.weights"), join(chain.weights().iter().map(|w| -(*w as i64))));
                self.set(format!("{key}.value"), continued_fraction_value(chain.weights()));
                self.set(format!("{key}.det"), chain.determinant());
                self.set(format!("{key}.boundary"), chain.boundary().to_string());
                let inv = chain.inverse();
                self.set(format!("{key}.inverse.first"), join(inv.column(0)));
                self.set(format!("{key}.inverse.last"), join(inv.column(chain.len() - 1)));
                let n = chain.len();
                self.chain = Some((chain, vec![None; n]));
            }
            Embed { index, terms } => {
                let c = self.class_of(terms)?;
                let (_, slots) = self.chain.as_mut().ok_or("no plumbing declared")?;
                slots[index - 1] = Some(c);
            }
            Blowdown => self.blowdown()?,
            Pair { a, b } => {
                let v = self.named(a)?.pair(&self.named(b)?).map_err(err)?;
                self.set(format!("pair.{a}.{b}"), v);
            }
            Descent(x) => {
                let c = self.named(x)?;
                let emb = self.embeddings.last().ok_or("no blowdown performed")?;
                let d = descent_check(&c, emb).map_err(err)?;
                self.set(format!("descent.{x}.pairings"), join(d.pairings));
                self.set(format!("descent.{x}.vertex"), d.vertex_condition);
                self.set(format!("descent.{x}.restricted_square"), d.restricted_square);
                self.set(format!("descent.{x}.square"), d.square_condition);
            }
            Symplectic(w) => {
                let s = SymbolicClass::standard(&self.lattice()?).map_err(err)?;
                self.symplectic.insert(w.clone(), s);
            }
            Functional { k, w } => self.functional(k, w)?,
            Compare { form, scale, text } => {
                let f = self.functional.as_ref().ok_or("no functional computed")?;
                let (which, computed) = match form {
                    ComparedForm::Restricted => ("restricted", &f.restricted),
                    ComparedForm::Exotic => ("exotic", &f.exotic),
                };
                let inner = SymbolicLinearForm::parse(Arc::new(computed.symbols().to_vec()), text).map_err(err)?;
                let claimed = inner.scale(scale);
                let diffs = claimed.differences(computed).map_err(err)?;
                let scale = self.scale();
                self.set(format!("compare.{which}.form"), claimed.over(&scale));
                self.set(format!("compare.{which}.matches"), diffs.is_empty());
                let listed: Vec<String> = diffs.iter().map(|(s, a, b)| format!("{s}:{a}->{b}")).collect();
                self.set(format!("compare.{which}.differs"), if listed.is_empty() { "none".into() } else { listed.join(" ") });
            }
            Sw(op) => self.sw(op)?,
            Fibration { kf2, chi, g, b } => {
                let fi = FibrationInvariants::new(*kf2, *chi, *g, *b);
                let flags = self
                    .inv
                    .as_ref()
                    .and_then(|i| i.simply_connected.as_ref().map(|why| (i.parity, why.clone())));
                let t = fibration_totals(&fi, flags.as_ref().map(|(p, w)| (*p, w.as_str())));
                self.set("fibration.c1sq", t.c1sq);
                self.set("fibration.chi", t.chi);
                self.set("fibration.e", t.e);
                self.set("fibration.sigma", t.sigma);
                self.set("fibration.label", t.label.map(|h| h.short()).unwrap_or_else(|| "unknown".into()));
            }
            Claim { key, text } => {
                let found = self.report.get(key).ok_or(format!("no report key `{key}` to compare against"))?;
                let matches = found.to_string() == *text;
                self.set(format!("claim.{key}"), text.clone());
                self.set(format!("claim.{key}.matches"), matches);
            }
            Verdict(tag) => self.verdict(tag)?,
            Assert { .. } => unreachable!("handled by the driver"),
            Report(prefix) => {
                self.filters.get_or_insert_with(Vec::new).push(prefix.clone().unwrap_or_default());
            }
        }
        Ok(())
    }

    fn blowdown(&mut self) -> R<()> {
        let (chain, slots) = self.chain.take().ok_or("no plumbing declared")?;
        let k = chain.len();
        let emb = if slots.iter().all(Option::is_none) {
            None
        } else {
            let mut classes = Vec::with_capacity(k);
            for (i, s) in slots.into_iter().enumerate() {
                classes.push(s.ok_or(format!("vertex u{} has no class", i + 1))?);
            }
            Some(PlumbingEmbedding::new(chain, classes).map_err(err)?)
        };
        let inv = blowdown_invariants(self.inv()?, k).map_err(err)?;
        self.blowdowns += 1;
        let key = format!("blowdown.{}", self.blowdowns);
        self.set(format!("{key}.k"), k);
        self.set(format!("{key}.e"), inv.e);
        self.set(format!("{key}.sigma"), inv.sigma);
        self.set(format!("{key}.b2plus"), inv.b2_plus());
        self.inv = Some(inv);
        if let Some(emb) = emb {
            let lat = self.lattice()?;
            if let Ok(kc) = canonical_class(&lat) {
                let d = descent_check(&kc, &emb).map_err(err)?;
                self.set(format!("{key}.K.pairings"), join(d.pairings));
                self.set(format!("{key}.K.restricted_square"), d.restricted_square);
            }
            if let Some(sw) = &self.sw {
                let next = sw.descend(&emb).map_err(err)?;
                self.set(format!("{key}.sw.classes"), next.len());
                self.sw = Some(next);
                self.minimal = None;
            }
            self.embeddings.push(emb);
        } else if self.sw.is_some() {
            return Err("basic classes cannot descend through an unembedded plumbing".into());
        }
        Ok(())
    }

    /// Product of the plumbing determinants, the natural denominator for functionals.
    fn scale(&self) -> BigInt {
        self.embeddings.iter().map(|e| e.chain().determinant()).product()
    }

    fn functional(&mut self, k: &str, w: &str) -> R<()> {
        let kc = self.named(k)?;
        let ws = self.symplectic.get(w).ok_or(format!("no symplectic class `{w}`"))?.clone();
        let mut restricted = SymbolicLinearForm::zero(ws.symbols());
        for emb in &self.embeddings {
            restricted = restricted.add(&restrict_and_pair(&kc, &ws, emb).map_err(err)?).map_err(err)?;
        }
        let exotic = exotic_functional(&kc, &ws, &self.embeddings).map_err(err)?;
        let positivity = positivity_over_cone(&exotic).map_err(err)?;
        let scale = self.scale();
        self.set("functional.Kw", ws.pair(&kc).map_err(err)?.to_string());
        self.set("functional.restricted", restricted.over(&scale));
        self.set("functional.exotic", exotic.over(&scale));
        self.set("functional.positive", positivity.positive);
        self.set("functional.witness", positivity.witness.clone());
        for (label, v) in &positivity.vertex_values {
            self.set(format!("functional.vertex.{}", label.replace('=', "")), v.clone());
        }
        self.functional = Some(FunctionalState { positivity, restricted, exotic });
        Ok(())
    }

    fn sw(&mut self, op: &SwOp) -> R<()> {
        match op {
            SwOp::Zero => {
                let lat = self.lattice()?;
                self.sw = Some(BasicClassSet::zero_class("SW", &lat));
            }
            SwOp::Taubes => {
                let k = self.named("K")?;
                let inv = self.inv()?;
                self.sw = Some(BasicClassSet::taubes("SW", &k, inv.e, inv.sigma));
            }
            SwOp::Blowup(g) => {
                let e = self.named(g)?;
                let sw = self.sw.as_ref().ok_or("no basic classes recorded")?;
                self.sw = Some(sw.blowup(&e).map_err(err)?);
            }
            SwOp::Minimality => {
                let sw = self.sw.as_ref().ok_or("no basic classes recorded")?;
                self.minimal = Some(sw.minimality().map_err(err)?);
            }
        }
        Ok(())
    }

    fn verdict(&mut self, tag: &str) -> R<()> {
        let inv = self.inv()?.clone();
        let homeo = inv.homeo_type().ok();
        self.set(format!("{tag}.e"), inv.e);
        self.set(format!("{tag}.sigma"), inv.sigma);
        self.set(format!("{tag}.b2plus"), inv.b2_plus());
        self.set(format!("{tag}.label"), homeo.map(|h| h.short()).unwrap_or_else(|| "unknown".into()));
        if let Some(sw) = &self.sw {
            self.set(format!("{tag}.sw.classes"), sw.len());
        }
        if let Some(m) = self.minimal.clone() {
            self.set(format!("{tag}.minimal"), m.minimal);
            if let Some((a, b)) = m.offending {
                self.set(format!("{tag}.offending"), format!("{a} {b}"));
            }
        }
        let inputs = VerdictInputs {
            homeo_label: homeo.map(|h| h.short()),
            positivity: self.functional.as_ref().map(|f| f.positivity.positive),
            sw_nonvanishing: self.sw.as_ref().map(|s| !s.is_trivial()),
            // A connected sum of two pieces with b2+ > 0 has vanishing invariant.
            target_sw_trivial: homeo.and_then(|h| (h.plus >= 2).then_some(true)),
            minimal: self.minimal.as_ref().map(|m| m.minimal),
        };
        self.set(format!("{tag}.verdict"), verdict(&inputs).to_string());
        Ok(())
    }
}
