//! Gröbner bases over the even polynomial subring, with cofactor tracking.
//!
//! The model layer uses this module for three things:
//!
//! 1. normal forms against a Jacobian ideal — the remainder gives the
//!    cohomology-basis coefficients of a class, and the tracked quotients
//!    (*against the original generators*, not the internal basis) give the
//!    gauge witness;
//! 2. staircase enumeration (standard monomials) — the cohomology basis of
//!    an isolated-singularity model, with a zero-dimensionality check;
//! 3. graded slices of the staircase for weighted-homogeneous ideals — the
//!    cohomology basis of a gauged model, degree by degree.
//!
//! Every division result carries the full reconstruction identity
//! `p = Σ q_j·g_j + r` over the original generators; the identity is
//! re-verified in debug builds and by the test suite.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use num_traits::One;

use crate::algebra::{Element, Monomial, Parity, VariableTable};
use crate::scalar::Rat;

/// Monomial orders on the active (even) variables.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MonomialOrder {
    /// Graded reverse lexicographic (the default).
    GrevLex,
    /// Graded lexicographic.
    GrLex,
    /// Weighted degree (weights from the variable table) with graded
    /// reverse lexicographic tie-break.
    WeightedGrevLex,
}

/// Errors from basis construction and queries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroebnerError {
    /// A generator or query polynomial involves an odd variable.
    OddVariable {
        /// Name of the odd variable.
        name: String,
    },
    /// A generator or query polynomial involves a variable outside the
    /// active subring.
    InactiveVariable {
        /// Name of the inactive variable.
        name: String,
    },
    /// No generators were supplied.
    EmptyGenerators,
    /// The staircase is infinite: some active variable has no pure power
    /// among the leading monomials.
    NotZeroDimensional {
        /// An active variable with no pure-power leading monomial.
        name: String,
    },
    /// Graded slices require strictly positive weights on active variables.
    NonPositiveWeight {
        /// Name of the non-positively-weighted variable.
        name: String,
    },
    /// Graded slices require weight-homogeneous generators.
    NonHomogeneousIdeal,
}

impl fmt::Display for GroebnerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroebnerError::OddVariable { name } => {
                write!(f, "polynomial involves odd variable `{name}`")
            }
            GroebnerError::InactiveVariable { name } => {
                write!(f, "polynomial involves variable `{name}` outside the active subring")
            }
            GroebnerError::EmptyGenerators => write!(f, "no ideal generators supplied"),
            GroebnerError::NotZeroDimensional { name } => write!(
                f,
                "ideal is not zero-dimensional: no pure power of `{name}` among leading monomials"
            ),
            GroebnerError::NonPositiveWeight { name } => {
                write!(f, "graded slice requires positive weight on `{name}`")
            }
            GroebnerError::NonHomogeneousIdeal => {
                write!(f, "graded slice requires weight-homogeneous generators")
            }
        }
    }
}

/// Comparison context: order + active variable set + weights.
#[derive(Clone)]
struct OrderCtx {
    order: MonomialOrder,
    active: Vec<usize>,
    weights: Vec<i64>, // aligned with `active`
}

impl OrderCtx {
    fn degree(&self, m: &Monomial) -> u32 {
        self.active.iter().map(|&i| m.0[i]).sum()
    }

    fn weighted_degree(&self, m: &Monomial) -> i64 {
        self.active
            .iter()
            .zip(&self.weights)
            .map(|(&i, &w)| w * m.0[i] as i64)
            .sum()
    }

    fn cmp(&self, a: &Monomial, b: &Monomial) -> Ordering {
        match self.order {
            MonomialOrder::GrevLex => self
                .degree(a)
                .cmp(&self.degree(b))
                .then_with(|| self.revlex_tie(a, b)),
            MonomialOrder::GrLex => self.degree(a).cmp(&self.degree(b)).then_with(|| {
                for &i in &self.active {
                    match a.0[i].cmp(&b.0[i]) {
                        Ordering::Equal => {}
                        other => return other,
                    }
                }
                Ordering::Equal
            }),
            MonomialOrder::WeightedGrevLex => self
                .weighted_degree(a)
                .cmp(&self.weighted_degree(b))
                .then_with(|| self.degree(a).cmp(&self.degree(b)))
                .then_with(|| self.revlex_tie(a, b)),
        }
    }

    /// Reverse-lexicographic tie-break for equal degrees: the monomial whose
    /// last differing exponent is *smaller* is the larger one.
    fn revlex_tie(&self, a: &Monomial, b: &Monomial) -> Ordering {
        for &i in self.active.iter().rev() {
            match a.0[i].cmp(&b.0[i]) {
                Ordering::Equal => {}
                Ordering::Less => return Ordering::Greater,
                Ordering::Greater => return Ordering::Less,
            }
        }
        Ordering::Equal
    }
}

/// Outcome of dividing `p` by the original generators: the reconstruction
/// identity `p = Σ quotients[j]·generator_j + remainder` holds exactly, and
/// no remainder term is divisible by any basis leading monomial.
#[derive(Clone, Debug, PartialEq)]
pub struct DivisionResult {
    /// Fully reduced normal form.
    pub remainder: Element,
    /// Quotients against the *original* generators, in input order.
    pub quotients: Vec<Element>,
}

/// A reduced, monic Gröbner basis with cofactors over the original
/// generators.
pub struct GroebnerBasis {
    table: Arc<VariableTable>,
    ctx: OrderCtx,
    gens: Vec<Element>,
    basis: Vec<Element>,
    /// `basis[i] = Σ_j cofactors[i][j] · gens[j]`.
    cofactors: Vec<Vec<Element>>,
}

fn leading_monomial<'a>(ctx: &OrderCtx, p: &'a Element) -> Option<&'a Monomial> {
    p.terms().keys().max_by(|a, b| ctx.cmp(a, b))
}

fn check_active(
    table: &VariableTable,
    active: &[usize],
    p: &Element,
) -> Result<(), GroebnerError> {
    let active_set: BTreeSet<usize> = active.iter().copied().collect();
    for m in p.terms().keys() {
        for (i, &e) in m.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if table.var(i).parity == Parity::Odd {
                return Err(GroebnerError::OddVariable {
                    name: table.var(i).name.clone(),
                });
            }
            if !active_set.contains(&i) {
                return Err(GroebnerError::InactiveVariable {
                    name: table.var(i).name.clone(),
                });
            }
        }
    }
    Ok(())
}

/// A working polynomial with its representation over the original generators.
#[derive(Clone)]
struct Tracked {
    p: Element,
    rep: Vec<Element>,
}

impl Tracked {
    fn sub_scaled(&mut self, other: &Tracked, factor: &Element) {
        let delta = factor.mul(&other.p);
        self.p = self.p.sub(&delta);
        for (r, o) in self.rep.iter_mut().zip(&other.rep) {
            if !o.is_zero() {
                *r = r.sub(&factor.mul(o));
            }
        }
    }
}

/// Full division of `p` by `divisors` (tracked), producing tracked quotients
/// and a remainder none of whose terms is divisible by any divisor LM.
fn divide_tracked(
    ctx: &OrderCtx,
    table: &Arc<VariableTable>,
    p: &Element,
    divisors: &[(Monomial, Element)], // (cached LM, monic divisor)
) -> (Vec<Element>, Element) {
    let mut work = p.clone();
    let mut remainder = Element::zero(table);
    let mut quotients = vec![Element::zero(table); divisors.len()];
    while let Some(lm) = leading_monomial(ctx, &work).cloned() {
        let lc = work.coeff(&lm);
        match divisors.iter().position(|(dm, _)| lm.divisible_by(dm)) {
            Some(k) => {
                let (dm, d) = &divisors[k];
                let qm = lm.div(dm);
                let qterm = Element::from_monomial(table, qm, lc).expect("even monomial");
                quotients[k] = quotients[k].add(&qterm);
                work = work.sub(&qterm.mul(d));
            }
            None => {
                let t = Element::from_monomial(table, lm.clone(), lc.clone()).expect("even");
                remainder = remainder.add(&t);
                work = work.sub(&t);
            }
        }
    }
    (quotients, remainder)
}

/// Computes a reduced Gröbner basis of the ideal generated by `gens` on the
/// given active variables (defaults to all even variables of the table).
///
/// Buchberger's algorithm with the product (coprime-LM) criterion and the
/// chain criterion, normal pair-selection strategy, followed by
/// minimalisation and full inter-reduction. Cofactors over the original
/// generators are tracked through every step.
pub fn groebner_basis(
    gens: &[Element],
    order: MonomialOrder,
    active: Option<Vec<usize>>,
) -> Result<GroebnerBasis, GroebnerError> {
    let first = gens.iter().find(|g| !g.is_zero());
    let Some(first) = first else {
        return Err(GroebnerError::EmptyGenerators);
    };
    let table = first.table().clone();
    let active = active.unwrap_or_else(|| table.even_indices());
    let weights = active.iter().map(|&i| table.var(i).weight).collect();
    let ctx = OrderCtx {
        order,
        active,
        weights,
    };
    for g in gens {
        check_active(&table, &ctx.active, g)?;
    }

    // Seed the working basis with the nonzero generators, made monic.
    let mut work: Vec<Tracked> = Vec::new();
    for (j, g) in gens.iter().enumerate() {
        if g.is_zero() {
            continue;
        }
        let lm = leading_monomial(&ctx, g).expect("nonzero").clone();
        let lc = g.coeff(&lm);
        let inv = Rat::one() / lc;
        let mut rep = vec![Element::zero(&table); gens.len()];
        rep[j] = Element::constant(&table, inv.clone());
        work.push(Tracked {
            p: g.scale(&inv),
            rep,
        });
    }

    let lm_of = |w: &Tracked| -> Monomial { leading_monomial(&ctx, &w.p).expect("nonzero").clone() };

    // Pair queue ordered by (lcm degree, i, j) — the normal strategy.
    let mut queue: BTreeSet<(u32, usize, usize)> = BTreeSet::new();
    let mut done: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut lms: Vec<Monomial> = work.iter().map(&lm_of).collect();
    for i in 0..work.len() {
        for j in (i + 1)..work.len() {
            queue.insert((lms[i].lcm(&lms[j]).degree(), i, j));
        }
    }

    while let Some(&(deg, i, j)) = queue.iter().next() {
        queue.remove(&(deg, i, j));
        done.insert((i, j));
        let lcm = lms[i].lcm(&lms[j]);
        // Product criterion: coprime leading monomials reduce to zero.
        if lcm.degree() == lms[i].degree() + lms[j].degree() {
            continue;
        }
        // Chain criterion: an intermediate k whose LM divides the lcm and
        // whose pairs with i and j are both settled makes (i,j) redundant.
        let chained = (0..work.len()).any(|k| {
            k != i
                && k != j
                && lcm.divisible_by(&lms[k])
                && done.contains(&(i.min(k), i.max(k)))
                && done.contains(&(j.min(k), j.max(k)))
        });
        if chained {
            continue;
        }

        // S-polynomial, with representation tracking.
        let ui = Element::from_monomial(&table, lcm.div(&lms[i]), Rat::one()).expect("even");
        let uj = Element::from_monomial(&table, lcm.div(&lms[j]), Rat::one()).expect("even");
        let mut s = Tracked {
            p: ui.mul(&work[i].p).sub(&uj.mul(&work[j].p)),
            rep: work[i]
                .rep
                .iter()
                .zip(&work[j].rep)
                .map(|(a, b)| ui.mul(a).sub(&uj.mul(b)))
                .collect(),
        };
        // Full reduction against the current basis.
        let divisors: Vec<(Monomial, Element)> = work
            .iter()
            .enumerate()
            .map(|(k, w)| (lms[k].clone(), w.p.clone()))
            .collect();
        let (qs, r) = divide_tracked(&ctx, &table, &s.p, &divisors);
        for (k, q) in qs.iter().enumerate() {
            if !q.is_zero() {
                let other = work[k].clone();
                s.sub_scaled(&other, q);
            }
        }
        debug_assert_eq!(s.p, r);
        if r.is_zero() {
            continue;
        }
        // Normalise to monic and adopt.
        let lm = leading_monomial(&ctx, &r).expect("nonzero").clone();
        let inv = Rat::one() / r.coeff(&lm);
        let newcomer = Tracked {
            p: r.scale(&inv),
            rep: s.rep.iter().map(|e| e.scale(&inv)).collect(),
        };
        let idx = work.len();
        work.push(newcomer);
        lms.push(lm);
        for k in 0..idx {
            queue.insert((lms[k].lcm(&lms[idx]).degree(), k, idx));
        }
    }

    // Minimalisation: drop members whose LM is divisible by another's.
    let keep: Vec<usize> = (0..work.len())
        .filter(|&i| {
            !(0..work.len())
                .any(|k| k != i && lms[i].divisible_by(&lms[k]) && !(lms[k] == lms[i] && k > i))
        })
        .collect();
    let mut reduced: Vec<Tracked> = keep.iter().map(|&i| work[i].clone()).collect();
    let mut red_lms: Vec<Monomial> = keep.iter().map(|&i| lms[i].clone()).collect();

    // Full inter-reduction of tails (LMs are already minimal).
    for i in 0..reduced.len() {
        let divisors: Vec<(Monomial, Element)> = (0..reduced.len())
            .filter(|&k| k != i)
            .map(|k| (red_lms[k].clone(), reduced[k].p.clone()))
            .collect();
        let rep_sources: Vec<usize> = (0..reduced.len()).filter(|&k| k != i).collect();
        let (qs, r) = divide_tracked(&ctx, &table, &reduced[i].p, &divisors);
        for (pos, q) in qs.iter().enumerate() {
            if !q.is_zero() {
                let other = reduced[rep_sources[pos]].clone();
                reduced[i].sub_scaled(&other, q);
            }
        }
        debug_assert_eq!(reduced[i].p, r);
        // Re-normalise (tail reduction keeps the LM, but be safe).
        let lm = leading_monomial(&ctx, &reduced[i].p).expect("nonzero").clone();
        let inv = Rat::one() / reduced[i].p.coeff(&lm);
        reduced[i].p = reduced[i].p.scale(&inv);
        for e in reduced[i].rep.iter_mut() {
            *e = e.scale(&inv);
        }
        red_lms[i] = lm;
    }

    // Deterministic output order: ascending leading monomial.
    let mut order_idx: Vec<usize> = (0..reduced.len()).collect();
    order_idx.sort_by(|&a, &b| ctx.cmp(&red_lms[a], &red_lms[b]));
    let basis: Vec<Element> = order_idx.iter().map(|&i| reduced[i].p.clone()).collect();
    let cofactors: Vec<Vec<Element>> = order_idx.iter().map(|&i| reduced[i].rep.clone()).collect();

    let gb = GroebnerBasis {
        table,
        ctx,
        gens: gens.to_vec(),
        basis,
        cofactors,
    };
    debug_assert!(gb.verify_cofactors());
    Ok(gb)
}

impl GroebnerBasis {
    /// The reduced, monic basis, ascending in the monomial order.
    pub fn basis(&self) -> &[Element] {
        &self.basis
    }

    /// The original generators.
    pub fn generators(&self) -> &[Element] {
        &self.gens
    }

    /// The monomial order in use.
    pub fn order(&self) -> MonomialOrder {
        self.ctx.order
    }

    /// Active variable indices.
    pub fn active(&self) -> &[usize] {
        &self.ctx.active
    }

    /// Cofactor matrix: `basis[i] = Σ_j cofactors()[i][j] · generators()[j]`.
    pub fn cofactors(&self) -> &[Vec<Element>] {
        &self.cofactors
    }

    /// Leading monomials of the basis.
    pub fn leading_monomials(&self) -> Vec<Monomial> {
        self.basis
            .iter()
            .map(|p| leading_monomial(&self.ctx, p).expect("nonzero").clone())
            .collect()
    }

    /// True when the ideal is the unit ideal.
    pub fn contains_one(&self) -> bool {
        self.basis.iter().any(|p| {
            leading_monomial(&self.ctx, p).is_some_and(|m| m.degree() == 0)
        })
    }

    /// Checks the stored reconstruction identities (used by tests).
    pub fn verify_cofactors(&self) -> bool {
        self.basis.iter().zip(&self.cofactors).all(|(b, rep)| {
            let mut acc = Element::zero(&self.table);
            for (c, g) in rep.iter().zip(&self.gens) {
                acc = acc.add(&c.mul(g));
            }
            acc == *b
        })
    }

    /// Remainder of `p` modulo the ideal (the normal form).
    pub fn reduce(&self, p: &Element) -> Result<Element, GroebnerError> {
        check_active(&self.table, &self.ctx.active, p)?;
        let divisors: Vec<(Monomial, Element)> = self
            .leading_monomials()
            .into_iter()
            .zip(self.basis.iter().cloned())
            .collect();
        let (_, r) = divide_tracked(&self.ctx, &self.table, p, &divisors);
        Ok(r)
    }

    /// Full division: normal form plus quotients over the *original*
    /// generators, satisfying `p = Σ qⱼ·genⱼ + remainder` exactly.
    pub fn normal_form(&self, p: &Element) -> Result<DivisionResult, GroebnerError> {
        check_active(&self.table, &self.ctx.active, p)?;
        let divisors: Vec<(Monomial, Element)> = self
            .leading_monomials()
            .into_iter()
            .zip(self.basis.iter().cloned())
            .collect();
        let (qb, remainder) = divide_tracked(&self.ctx, &self.table, p, &divisors);
        // Map basis quotients through the cofactor matrix.
        let mut quotients = vec![Element::zero(&self.table); self.gens.len()];
        for (i, q) in qb.iter().enumerate() {
            if q.is_zero() {
                continue;
            }
            for (j, c) in self.cofactors[i].iter().enumerate() {
                if !c.is_zero() {
                    quotients[j] = quotients[j].add(&q.mul(c));
                }
            }
        }
        let result = DivisionResult {
            remainder,
            quotients,
        };
        debug_assert!({
            let mut acc = result.remainder.clone();
            for (q, g) in result.quotients.iter().zip(&self.gens) {
                acc = acc.add(&q.mul(g));
            }
            acc == *p
        });
        Ok(result)
    }

    /// Per-variable staircase bounds: for each active variable the least
    /// pure-power exponent among leading monomials, or an error if none
    /// exists (the ideal is then not zero-dimensional).
    fn staircase_box(&self) -> Result<Vec<(usize, u32)>, GroebnerError> {
        let lms = self.leading_monomials();
        let mut bounds = Vec::new();
        for &i in &self.ctx.active {
            let bound = lms
                .iter()
                .filter(|m| m.0[i] > 0 && m.degree() == m.0[i])
                .map(|m| m.0[i])
                .min();
            match bound {
                Some(b) => bounds.push((i, b)),
                None => {
                    return Err(GroebnerError::NotZeroDimensional {
                        name: self.table.var(i).name.clone(),
                    })
                }
            }
        }
        Ok(bounds)
    }

    /// The standard monomials (staircase) of a zero-dimensional ideal,
    /// sorted ascending by (total degree, exponents).
    pub fn standard_monomials(&self) -> Result<Vec<Monomial>, GroebnerError> {
        if self.contains_one() {
            return Ok(Vec::new());
        }
        let bounds = self.staircase_box()?;
        let lms = self.leading_monomials();
        let n = self.table.len();
        let mut out = Vec::new();
        let mut exps = vec![0u32; n];
        enumerate_box(&bounds, 0, &mut exps, &mut |e| {
            let m = Monomial(e.to_vec().into_boxed_slice());
            if !lms.iter().any(|lm| m.divisible_by(lm)) {
                out.push(m);
            }
        });
        out.sort_by_key(|m| (m.degree(), m.clone()));
        Ok(out)
    }

    /// The standard monomials of exact weighted degree `d` for a
    /// weight-homogeneous ideal with positive active weights.
    pub fn graded_slice(&self, d: i64) -> Result<Vec<Monomial>, GroebnerError> {
        for &i in &self.ctx.active {
            if self.table.var(i).weight <= 0 {
                return Err(GroebnerError::NonPositiveWeight {
                    name: self.table.var(i).name.clone(),
                });
            }
        }
        for b in &self.basis {
            if b.weight().is_none() {
                return Err(GroebnerError::NonHomogeneousIdeal);
            }
        }
        let lms = self.leading_monomials();
        let n = self.table.len();
        let mut out = Vec::new();
        let mut exps = vec![0u32; n];
        enumerate_weighted(
            &self.ctx.active,
            &self.ctx.weights,
            0,
            d,
            &mut exps,
            &mut |e| {
                let m = Monomial(e.to_vec().into_boxed_slice());
                if !lms.iter().any(|lm| m.divisible_by(lm)) {
                    out.push(m);
                }
            },
        );
        out.sort_by_key(|m| (m.degree(), m.clone()));
        Ok(out)
    }
}

/// Enumerates exponent vectors inside the staircase box (exclusive bounds).
fn enumerate_box(
    bounds: &[(usize, u32)],
    k: usize,
    exps: &mut Vec<u32>,
    visit: &mut impl FnMut(&[u32]),
) {
    if k == bounds.len() {
        visit(exps);
        return;
    }
    let (var, bound) = bounds[k];
    for e in 0..bound {
        exps[var] = e;
        enumerate_box(bounds, k + 1, exps, visit);
    }
    exps[var] = 0;
}

/// Enumerates active exponent vectors of exact weighted degree `remaining`.
fn enumerate_weighted(
    active: &[usize],
    weights: &[i64],
    k: usize,
    remaining: i64,
    exps: &mut Vec<u32>,
    visit: &mut impl FnMut(&[u32]),
) {
    if k == active.len() {
        if remaining == 0 {
            visit(exps);
        }
        return;
    }
    if remaining < 0 {
        return;
    }
    let var = active[k];
    let w = weights[k];
    let max = remaining / w;
    for e in 0..=max {
        exps[var] = e as u32;
        enumerate_weighted(active, weights, k + 1, remaining - e * w, exps, visit);
    }
    exps[var] = 0;
}
