//! The free graded-commutative algebra `𝒞` on a table of even and odd
//! variables, together with the second-order BV operator `Δ`, the BV bracket
//! `(·,·)`, and the differentials `Q = (S,·)` and `K = Q − ħΔ`.
//!
//! # Grading and signs
//!
//! Every variable carries a *ghost number* (an integer) and a *parity* (even
//! or odd). Monomial commutation signs use the parity; the Koszul prefactors
//! of the bracket and of `Δ`-type identities use the ghost number mod 2. For
//! both shipped model classes these coincide, but the engine keeps the two
//! notions separate so that arbitrary tables stay well-defined.
//!
//! Odd variables square to zero; a canonical monomial lists its variables in
//! declaration order. Derivatives with respect to odd variables are *left*
//! derivatives: the variable is commuted to the front (collecting a sign per
//! odd variable it passes) and then struck.
//!
//! # BV pairs
//!
//! `Δ` is a sum over declared variable pairs `(v, v*)` where ghost numbers
//! sum to `−1` and parities differ. For a pair whose non-negative-ghost
//! member is even (e.g. a coordinate `x` with its antifield `η`) the
//! contribution is `+∂²/∂v∂v*`; when that member is odd (a ghost `c` with its
//! antifield `c*`) the contribution is `−∂²/∂v∂v*`. With this convention
//! `Δ(x·η) = 1` and `Δ(c·c*) = −1`, so `(x,η) = (c,c*) = 1`.
//!
//! The bracket is derived from `Δ` by the defining relation
//!
//! ```text
//! (−1)^|a| (a,b) = Δ(a·b) − Δa·b − (−1)^|a| a·Δb ,
//! ```
//!
//! which makes `(·,·)` a graded Lie bracket of ghost degree `+1` satisfying
//! the graded Poisson rule; `Q = (S,·)` and `K = −ħΔ + Q` then obey
//! `K(ab) − Ka·b − (−1)^|a| a·Kb = −ħ(−1)^|a| (a,b)`.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Signed, Zero};

use crate::scalar::{rat_to_string, Rat};

/// Parity of a variable: governs commutation signs.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Parity {
    /// Commutes with everything.
    Even,
    /// Ante-commutes with other odd variables; squares to zero.
    Odd,
}

/// A single generator of the polynomial BV algebra.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variable {
    /// Display name; must be unique within a table.
    pub name: String,
    /// Ghost number (cohomological degree).
    pub ghost: i32,
    /// Commutation parity.
    pub parity: Parity,
    /// Weight for graded monomial orders and graded slices (e.g. a `C*`
    /// charge). Plain total degree corresponds to weight 1 everywhere.
    pub weight: i64,
    /// Index of the BV partner, if this variable belongs to a `Δ`-pair.
    pub partner: Option<usize>,
}

impl Variable {
    /// Convenience constructor for an unpaired variable of weight 1.
    pub fn new(name: &str, ghost: i32, parity: Parity) -> Self {
        Variable {
            name: name.to_owned(),
            ghost,
            parity,
            weight: 1,
            partner: None,
        }
    }
}

/// Errors from table construction and algebra operations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AlgebraError {
    /// Two variables share a name.
    DuplicateName(String),
    /// A partner index is out of range, self-referential, or asymmetric.
    BadPartner {
        /// Index of the offending variable.
        index: usize,
    },
    /// Ghost numbers of a BV pair must sum to −1.
    PairGhostSum {
        /// Name of the pair's field member.
        field: String,
        /// Name of the pair's antifield member.
        antifield: String,
    },
    /// Exactly one member of a BV pair must be odd.
    PairParity {
        /// Name of the pair's field member.
        field: String,
        /// Name of the pair's antifield member.
        antifield: String,
    },
    /// An odd variable appeared with exponent ≥ 2.
    OddExponent {
        /// Name of the odd variable.
        name: String,
    },
    /// Operands belong to different variable tables.
    TableMismatch,
    /// Division by `ħ` hit a nonzero `ħ⁰` part.
    HbarDivision,
    /// A variable index was out of range for the table.
    NoSuchVariable {
        /// The out-of-range index.
        index: usize,
    },
}

impl fmt::Display for AlgebraError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgebraError::DuplicateName(n) => write!(f, "duplicate variable name `{n}`"),
            AlgebraError::BadPartner { index } => {
                write!(f, "variable {index} has a missing or asymmetric BV partner")
            }
            AlgebraError::PairGhostSum { field, antifield } => write!(
                f,
                "ghost numbers of BV pair `{field}`/`{antifield}` must sum to -1"
            ),
            AlgebraError::PairParity { field, antifield } => write!(
                f,
                "exactly one member of BV pair `{field}`/`{antifield}` must be odd"
            ),
            AlgebraError::OddExponent { name } => {
                write!(f, "odd variable `{name}` cannot carry exponent >= 2")
            }
            AlgebraError::TableMismatch => {
                write!(f, "operands belong to different variable tables")
            }
            AlgebraError::HbarDivision => {
                write!(f, "division by hbar: classical part is nonzero")
            }
            AlgebraError::NoSuchVariable { index } => {
                write!(f, "variable index {index} out of range")
            }
        }
    }
}

/// An ordered table of variables together with its BV pairing.
#[derive(Debug, PartialEq)]
pub struct VariableTable {
    vars: Vec<Variable>,
    /// Each BV pair `(field, antifield)` listed once, `ghost(field) > ghost(antifield)`.
    pairs: Vec<(usize, usize)>,
}

impl VariableTable {
    /// Validates and freezes a variable table.
    ///
    /// Partner declarations must be symmetric; within a pair the ghost
    /// numbers sum to −1 and exactly one member is odd. Unpaired variables
    /// are allowed (they simply do not contribute to `Δ`).
    pub fn new(vars: Vec<Variable>) -> Result<Arc<Self>, AlgebraError> {
        let mut seen = BTreeMap::new();
        for (i, v) in vars.iter().enumerate() {
            if seen.insert(v.name.clone(), i).is_some() {
                return Err(AlgebraError::DuplicateName(v.name.clone()));
            }
        }
        let mut pairs = Vec::new();
        for (i, v) in vars.iter().enumerate() {
            let Some(j) = v.partner else { continue };
            if j >= vars.len() || j == i || vars[j].partner != Some(i) {
                return Err(AlgebraError::BadPartner { index: i });
            }
            if i < j {
                let (fi, ai) = if vars[i].ghost > vars[j].ghost { (i, j) } else { (j, i) };
                if vars[fi].ghost + vars[ai].ghost != -1 {
                    return Err(AlgebraError::PairGhostSum {
                        field: vars[fi].name.clone(),
                        antifield: vars[ai].name.clone(),
                    });
                }
                if vars[fi].parity == vars[ai].parity {
                    return Err(AlgebraError::PairParity {
                        field: vars[fi].name.clone(),
                        antifield: vars[ai].name.clone(),
                    });
                }
                pairs.push((fi, ai));
            }
        }
        Ok(Arc::new(VariableTable { vars, pairs }))
    }

    /// Number of variables.
    pub fn len(&self) -> usize {
        self.vars.len()
    }

    /// True for the empty table.
    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// The variable at `index`.
    pub fn var(&self, index: usize) -> &Variable {
        &self.vars[index]
    }

    /// All variables in declaration order.
    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    /// The BV pairs `(field, antifield)`, each listed once.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Index of the variable named `name`.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    /// Indices of all even variables.
    pub fn even_indices(&self) -> Vec<usize> {
        (0..self.vars.len())
            .filter(|&i| self.vars[i].parity == Parity::Even)
            .collect()
    }

    fn same(a: &Arc<VariableTable>, b: &Arc<VariableTable>) -> bool {
        Arc::ptr_eq(a, b) || **a == **b
    }
}

/// Exponent vector of a monomial, aligned with the variable table.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Monomial(pub Box<[u32]>);

impl Monomial {
    /// The empty monomial `1` on a table of `n` variables.
    pub fn one(n: usize) -> Self {
        Monomial(vec![0; n].into_boxed_slice())
    }

    /// Total (unweighted) degree.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Weighted degree with respect to the table.
    pub fn weight(&self, table: &VariableTable) -> i64 {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &e)| table.var(i).weight * e as i64)
            .sum()
    }

    /// Ghost number.
    pub fn ghost(&self, table: &VariableTable) -> i32 {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &e)| table.var(i).ghost * e as i32)
            .sum()
    }

    /// Ascending indices of odd variables present (each with exponent 1).
    fn odd_support(&self, table: &VariableTable) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|&(i, &e)| e > 0 && table.var(i).parity == Parity::Odd)
            .map(|(i, _)| i)
            .collect()
    }

    /// True when `other` divides `self` exponent-wise.
    pub fn divisible_by(&self, other: &Monomial) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a >= b)
    }

    /// Exponent-wise quotient; caller must ensure divisibility.
    pub fn div(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    /// Exponent-wise least common multiple.
    pub fn lcm(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| *a.max(b))
                .collect(),
        )
    }
}

/// Multiplies two canonical monomials. Returns `None` when a shared odd
/// variable kills the product, otherwise the product and its Koszul sign.
fn mul_monomials(table: &VariableTable, a: &Monomial, b: &Monomial) -> Option<(Monomial, i32)> {
    let odd_a = a.odd_support(table);
    let mut inversions = 0usize;
    if !odd_a.is_empty() {
        for j in b.odd_support(table) {
            if a.0[j] > 0 {
                return None; // odd variable squared
            }
            // `j` moves left past every odd variable of `a` with larger index.
            inversions += odd_a.iter().filter(|&&i| i > j).count();
        }
    } else {
        for j in b.odd_support(table) {
            if a.0[j] > 0 {
                return None;
            }
        }
    }
    let exps: Box<[u32]> = a.0.iter().zip(b.0.iter()).map(|(x, y)| x + y).collect();
    let sign = if inversions % 2 == 0 { 1 } else { -1 };
    Some((Monomial(exps), sign))
}

/// Left derivative of a canonical monomial with respect to variable `i`.
/// Returns the coefficient (with Koszul sign) and the reduced monomial, or
/// `None` when the variable is absent.
fn derive_monomial(table: &VariableTable, m: &Monomial, i: usize) -> Option<(Rat, Monomial)> {
    let e = m.0[i];
    if e == 0 {
        return None;
    }
    let mut exps = m.0.clone();
    exps[i] = e - 1;
    match table.var(i).parity {
        Parity::Even => Some((Rat::from_integer(e.into()), Monomial(exps))),
        Parity::Odd => {
            // Move the variable to the front past every earlier odd variable.
            let crossings = m
                .odd_support(table)
                .iter()
                .filter(|&&k| k < i)
                .count();
            let sign = if crossings % 2 == 0 { 1 } else { -1 };
            Some((Rat::from_integer(sign.into()), Monomial(exps)))
        }
    }
}

/// An element of the free graded-commutative algebra: a finite rational
/// linear combination of canonical monomials.
#[derive(Clone, Debug)]
pub struct Element {
    table: Arc<VariableTable>,
    terms: BTreeMap<Monomial, Rat>,
}

impl Element {
    /// The zero element.
    pub fn zero(table: &Arc<VariableTable>) -> Self {
        Element {
            table: table.clone(),
            terms: BTreeMap::new(),
        }
    }

    /// The unit element `1`.
    pub fn one(table: &Arc<VariableTable>) -> Self {
        Element::constant(table, Rat::one())
    }

    /// A constant.
    pub fn constant(table: &Arc<VariableTable>, r: Rat) -> Self {
        let mut e = Element::zero(table);
        if !r.is_zero() {
            e.terms.insert(Monomial::one(table.len()), r);
        }
        e
    }

    /// The variable `index` as an element.
    pub fn variable(table: &Arc<VariableTable>, index: usize) -> Result<Self, AlgebraError> {
        if index >= table.len() {
            return Err(AlgebraError::NoSuchVariable { index });
        }
        let mut exps = vec![0u32; table.len()];
        exps[index] = 1;
        Element::from_monomial(table, Monomial(exps.into_boxed_slice()), Rat::one())
    }

    /// A single term `r · m`, validating odd exponents.
    pub fn from_monomial(
        table: &Arc<VariableTable>,
        m: Monomial,
        r: Rat,
    ) -> Result<Self, AlgebraError> {
        for (i, &e) in m.0.iter().enumerate() {
            if e >= 2 && table.var(i).parity == Parity::Odd {
                return Err(AlgebraError::OddExponent {
                    name: table.var(i).name.clone(),
                });
            }
        }
        let mut el = Element::zero(table);
        if !r.is_zero() {
            el.terms.insert(m, r);
        }
        Ok(el)
    }

    /// Builds from a term list, merging duplicates and dropping zeros.
    pub fn from_terms(
        table: &Arc<VariableTable>,
        terms: impl IntoIterator<Item = (Monomial, Rat)>,
    ) -> Result<Self, AlgebraError> {
        let mut el = Element::zero(table);
        for (m, r) in terms {
            let t = Element::from_monomial(table, m, r)?;
            el = el.add(&t);
        }
        Ok(el)
    }

    /// The variable table this element lives on.
    pub fn table(&self) -> &Arc<VariableTable> {
        &self.table
    }

    /// Borrow of the term map (canonical monomial → coefficient).
    pub fn terms(&self) -> &BTreeMap<Monomial, Rat> {
        &self.terms
    }

    /// True for the zero element.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of terms.
    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Coefficient of a monomial.
    pub fn coeff(&self, m: &Monomial) -> Rat {
        self.terms.get(m).cloned().unwrap_or_else(Rat::zero)
    }

    /// Largest total degree among terms (`None` when zero).
    pub fn max_degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    /// Ghost number when all terms agree (`Some(0)` for zero).
    pub fn ghost_number(&self) -> Option<i32> {
        let mut it = self.terms.keys().map(|m| m.ghost(&self.table));
        let Some(first) = it.next() else {
            return Some(0);
        };
        it.all(|g| g == first).then_some(first)
    }

    /// True when every term has ghost number `g`.
    pub fn is_ghost(&self, g: i32) -> bool {
        self.terms.keys().all(|m| m.ghost(&self.table) == g)
    }

    /// Weighted degree when all terms agree (`Some(0)` for zero).
    pub fn weight(&self) -> Option<i64> {
        let mut it = self.terms.keys().map(|m| m.weight(&self.table));
        let Some(first) = it.next() else {
            return Some(0);
        };
        it.all(|w| w == first).then_some(first)
    }

    /// Splits into ghost-homogeneous components, ascending in ghost number.
    pub fn ghost_components(&self) -> Vec<(i32, Element)> {
        let mut parts: BTreeMap<i32, Element> = BTreeMap::new();
        for (m, r) in &self.terms {
            let g = m.ghost(&self.table);
            parts
                .entry(g)
                .or_insert_with(|| Element::zero(&self.table))
                .terms
                .insert(m.clone(), r.clone());
        }
        parts.into_iter().collect()
    }

    fn insert_term(&mut self, m: Monomial, r: Rat) {
        if r.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            alloc::collections::btree_map::Entry::Vacant(v) => {
                v.insert(r);
            }
            alloc::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += r;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    /// Sum. Panics on table mismatch (use [`Element::try_mul`]-style checks
    /// upstream when mixing sources).
    pub fn add(&self, other: &Element) -> Element {
        assert!(
            VariableTable::same(&self.table, &other.table),
            "{}",
            AlgebraError::TableMismatch
        );
        let mut out = self.clone();
        for (m, r) in &other.terms {
            out.insert_term(m.clone(), r.clone());
        }
        out
    }

    /// Difference.
    pub fn sub(&self, other: &Element) -> Element {
        self.add(&other.neg())
    }

    /// Additive inverse.
    pub fn neg(&self) -> Element {
        Element {
            table: self.table.clone(),
            terms: self.terms.iter().map(|(m, r)| (m.clone(), -r)).collect(),
        }
    }

    /// Product by a rational scalar.
    pub fn scale(&self, r: &Rat) -> Element {
        if r.is_zero() {
            return Element::zero(&self.table);
        }
        Element {
            table: self.table.clone(),
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * r)).collect(),
        }
    }

    /// Graded-commutative product, checking table compatibility.
    pub fn try_mul(&self, other: &Element) -> Result<Element, AlgebraError> {
        if !VariableTable::same(&self.table, &other.table) {
            return Err(AlgebraError::TableMismatch);
        }
        let mut out = Element::zero(&self.table);
        for (ma, ra) in &self.terms {
            for (mb, rb) in &other.terms {
                if let Some((m, sign)) = mul_monomials(&self.table, ma, mb) {
                    let mut c = ra * rb;
                    if sign < 0 {
                        c = -c;
                    }
                    out.insert_term(m, c);
                }
            }
        }
        Ok(out)
    }

    /// Graded-commutative product. Panics on table mismatch.
    pub fn mul(&self, other: &Element) -> Element {
        self.try_mul(other).expect("table mismatch in product")
    }

    /// Left partial derivative with respect to variable `index`.
    pub fn derivative(&self, index: usize) -> Element {
        let mut out = Element::zero(&self.table);
        for (m, r) in &self.terms {
            if let Some((c, dm)) = derive_monomial(&self.table, m, index) {
                out.insert_term(dm, c * r);
            }
        }
        out
    }

    /// The second-order BV operator `Δ` (ghost degree `+1`).
    pub fn bv_delta(&self) -> Element {
        let mut out = Element::zero(&self.table);
        for &(field, anti) in self.table.pairs() {
            let sign_neg = self.table.var(field).parity == Parity::Odd;
            for (m, r) in &self.terms {
                if m.0[field] == 0 || m.0[anti] == 0 {
                    continue;
                }
                let (c1, m1) = derive_monomial(&self.table, m, anti).expect("exponent checked");
                let (c2, m2) = derive_monomial(&self.table, &m1, field).expect("exponent checked");
                let mut c = r * c1 * c2;
                if sign_neg {
                    c = -c;
                }
                out.insert_term(m2, c);
            }
        }
        out
    }

    /// The BV bracket `(a, b)` (ghost degree `+1`), defined by
    /// `(−1)^|a| (a,b) = Δ(a·b) − Δa·b − (−1)^|a| a·Δb` and extended by
    /// linearity over the ghost-homogeneous components of `a`.
    pub fn bv_bracket(&self, other: &Element) -> Element {
        let mut out = Element::zero(&self.table);
        let b_delta = other.bv_delta();
        for (g, a) in self.ghost_components() {
            let ab = a.mul(other);
            let lead = ab.bv_delta().sub(&a.bv_delta().mul(other));
            let signed = if g.rem_euclid(2) == 1 { lead.neg() } else { lead };
            out = out.add(&signed.sub(&a.mul(&b_delta)));
        }
        out
    }
}

impl PartialEq for Element {
    fn eq(&self, other: &Self) -> bool {
        VariableTable::same(&self.table, &other.table) && self.terms == other.terms
    }
}

impl Eq for Element {}

impl core::ops::Add for &Element {
    type Output = Element;
    fn add(self, rhs: &Element) -> Element {
        Element::add(self, rhs)
    }
}

impl core::ops::Sub for &Element {
    type Output = Element;
    fn sub(self, rhs: &Element) -> Element {
        Element::sub(self, rhs)
    }
}

impl core::ops::Mul for &Element {
    type Output = Element;
    fn mul(self, rhs: &Element) -> Element {
        Element::mul(self, rhs)
    }
}

impl core::ops::Neg for &Element {
    type Output = Element;
    fn neg(self) -> Element {
        Element::neg(self)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // Deterministic: ascending total degree, then exponent order.
        let mut keys: Vec<&Monomial> = self.terms.keys().collect();
        keys.sort_by_key(|m| (m.degree(), (*m).clone()));
        let mut first = true;
        for m in keys {
            let c = &self.terms[m];
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
                first = false;
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let is_const = m.degree() == 0;
            let unit = mag.is_one() && !is_const;
            if !unit {
                write!(f, "{}", rat_to_string(&mag))?;
            }
            let mut sep = !unit;
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if sep {
                    write!(f, "*")?;
                }
                sep = true;
                write!(f, "{}", self.table.var(i).name)?;
                if e > 1 {
                    write!(f, "^{e}")?;
                }
            }
        }
        Ok(())
    }
}

/// The differential `Q a = (S, a)` for an action `S`.
pub fn q_operator(action: &Element, a: &Element) -> Element {
    action.bv_bracket(a)
}

/// A polynomial in `ħ` with algebra-element coefficients.
///
/// Invariant: the last coefficient is nonzero (zero is the empty list).
#[derive(Clone, Debug)]
pub struct HbarPoly {
    table: Arc<VariableTable>,
    coeffs: Vec<Element>,
}

impl HbarPoly {
    /// Zero.
    pub fn zero(table: &Arc<VariableTable>) -> Self {
        HbarPoly {
            table: table.clone(),
            coeffs: Vec::new(),
        }
    }

    /// Embeds a classical element at `ħ⁰`.
    pub fn classical(e: Element) -> Self {
        let table = e.table().clone();
        let mut p = HbarPoly {
            table,
            coeffs: vec![e],
        };
        p.normalise();
        p
    }

    /// Builds from coefficients (index = power of `ħ`).
    pub fn from_coeffs(table: &Arc<VariableTable>, coeffs: Vec<Element>) -> Self {
        let mut p = HbarPoly {
            table: table.clone(),
            coeffs,
        };
        p.normalise();
        p
    }

    fn normalise(&mut self) {
        while self.coeffs.last().is_some_and(Element::is_zero) {
            self.coeffs.pop();
        }
    }

    /// The variable table.
    pub fn table(&self) -> &Arc<VariableTable> {
        &self.table
    }

    /// Coefficient of `ħ^k`.
    pub fn coeff(&self, k: usize) -> Element {
        self.coeffs
            .get(k)
            .cloned()
            .unwrap_or_else(|| Element::zero(&self.table))
    }

    /// All coefficients, lowest power first.
    pub fn coeffs(&self) -> &[Element] {
        &self.coeffs
    }

    /// The `ħ⁰` part.
    pub fn classical_part(&self) -> Element {
        self.coeff(0)
    }

    /// True for zero.
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Ghost number when all coefficients agree (`ħ` carries ghost 0).
    pub fn ghost_number(&self) -> Option<i32> {
        let mut g = None;
        for c in &self.coeffs {
            if c.is_zero() {
                continue;
            }
            let cg = c.ghost_number()?;
            match g {
                None => g = Some(cg),
                Some(prev) if prev != cg => return None,
                _ => {}
            }
        }
        Some(g.unwrap_or(0))
    }

    /// Sum.
    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n).map(|k| self.coeff(k).add(&other.coeff(k))).collect();
        HbarPoly::from_coeffs(&self.table, coeffs)
    }

    /// Difference.
    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// Additive inverse.
    pub fn neg(&self) -> Self {
        HbarPoly {
            table: self.table.clone(),
            coeffs: self.coeffs.iter().map(Element::neg).collect(),
        }
    }

    /// Product (`ħ` is even and central).
    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return HbarPoly::zero(&self.table);
        }
        let n = self.coeffs.len() + other.coeffs.len() - 1;
        let mut coeffs = vec![Element::zero(&self.table); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                coeffs[i + j] = coeffs[i + j].add(&a.mul(b));
            }
        }
        HbarPoly::from_coeffs(&self.table, coeffs)
    }

    /// Product by a rational scalar.
    pub fn scale(&self, r: &Rat) -> Self {
        HbarPoly::from_coeffs(
            &self.table,
            self.coeffs.iter().map(|c| c.scale(r)).collect(),
        )
    }

    /// Product by `ħ^k`.
    pub fn mul_hbar_pow(&self, k: usize) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let mut coeffs = vec![Element::zero(&self.table); k];
        coeffs.extend(self.coeffs.iter().cloned());
        HbarPoly::from_coeffs(&self.table, coeffs)
    }

    /// Exact division by `ħ`; fails when the classical part is nonzero.
    pub fn div_hbar(&self) -> Result<Self, AlgebraError> {
        if !self.coeff(0).is_zero() {
            return Err(AlgebraError::HbarDivision);
        }
        if self.is_zero() {
            return Ok(self.clone());
        }
        Ok(HbarPoly::from_coeffs(
            &self.table,
            self.coeffs[1..].to_vec(),
        ))
    }

    /// `Δ`, coefficient-wise.
    pub fn bv_delta(&self) -> Self {
        HbarPoly::from_coeffs(
            &self.table,
            self.coeffs.iter().map(Element::bv_delta).collect(),
        )
    }

    /// BV bracket, bilinear over `ħ`.
    pub fn bv_bracket(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return HbarPoly::zero(&self.table);
        }
        let n = self.coeffs.len() + other.coeffs.len() - 1;
        let mut coeffs = vec![Element::zero(&self.table); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                coeffs[i + j] = coeffs[i + j].add(&a.bv_bracket(b));
            }
        }
        HbarPoly::from_coeffs(&self.table, coeffs)
    }

    /// `Q = (S, ·)`, coefficient-wise.
    pub fn q_operator(&self, action: &Element) -> Self {
        HbarPoly::from_coeffs(
            &self.table,
            self.coeffs.iter().map(|c| q_operator(action, c)).collect(),
        )
    }

    /// `K = −ħΔ + Q` for the given action.
    pub fn k_operator(&self, action: &Element) -> Self {
        self.q_operator(action).sub(&self.bv_delta().mul_hbar_pow(1))
    }
}

impl PartialEq for HbarPoly {
    fn eq(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs
    }
}

impl Eq for HbarPoly {}

impl fmt::Display for HbarPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if k == 0 {
                write!(f, "{c}")?;
            } else if k == 1 {
                write!(f, "hbar*({c})")?;
            } else {
                write!(f, "hbar^{k}*({c})")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, rat_int};

    /// `x¹..xᵐ` even ghost 0 paired with `η₁..ηₘ` odd ghost −1.
    fn coordinate_table(m: usize) -> Arc<VariableTable> {
        use alloc::format;
        let mut vars = Vec::new();
        for i in 0..m {
            vars.push(Variable {
                name: format!("x{i}"),
                ghost: 0,
                parity: Parity::Even,
                weight: 1,
                partner: Some(m + i),
            });
        }
        for i in 0..m {
            vars.push(Variable {
                name: format!("eta{i}"),
                ghost: -1,
                parity: Parity::Odd,
                weight: 1,
                partner: Some(i),
            });
        }
        VariableTable::new(vars).unwrap()
    }

    /// `c` odd ghost +1 paired with `cs` even ghost −2.
    fn ghost_pair_table() -> Arc<VariableTable> {
        let vars = vec![
            Variable {
                name: "c".into(),
                ghost: 1,
                parity: Parity::Odd,
                weight: 0,
                partner: Some(1),
            },
            Variable {
                name: "cs".into(),
                ghost: -2,
                parity: Parity::Even,
                weight: 0,
                partner: Some(0),
            },
        ];
        VariableTable::new(vars).unwrap()
    }

    fn var(t: &Arc<VariableTable>, name: &str) -> Element {
        Element::variable(t, t.index_of(name).unwrap()).unwrap()
    }

    #[test]
    fn table_validation() {
        let bad = vec![
            Variable::new("x", 0, Parity::Even),
            Variable::new("x", -1, Parity::Odd),
        ];
        assert!(matches!(
            VariableTable::new(bad),
            Err(AlgebraError::DuplicateName(_))
        ));

        let mut v1 = Variable::new("x", 0, Parity::Even);
        v1.partner = Some(1);
        let v2 = Variable::new("y", -1, Parity::Odd); // partner not symmetric
        assert!(matches!(
            VariableTable::new(vec![v1.clone(), v2]),
            Err(AlgebraError::BadPartner { .. })
        ));

        let mut v2 = Variable::new("y", 0, Parity::Odd); // ghosts sum to 0
        v2.partner = Some(0);
        assert!(matches!(
            VariableTable::new(vec![v1.clone(), v2]),
            Err(AlgebraError::PairGhostSum { .. })
        ));

        let mut v2 = Variable::new("y", -1, Parity::Even); // both even
        v2.partner = Some(0);
        assert!(matches!(
            VariableTable::new(vec![v1, v2]),
            Err(AlgebraError::PairParity { .. })
        ));
    }

    #[test]
    fn odd_variables_square_to_zero() {
        let t = coordinate_table(2);
        let eta0 = var(&t, "eta0");
        let eta1 = var(&t, "eta1");
        assert!(eta0.mul(&eta0).is_zero());
        // Anticommutativity: η₀η₁ = −η₁η₀.
        let a = eta0.mul(&eta1);
        let b = eta1.mul(&eta0);
        assert_eq!(a, b.neg());
        assert!(!a.is_zero());
    }

    #[test]
    fn super_commutativity_of_products() {
        let t = coordinate_table(2);
        let x = var(&t, "x0");
        let eta0 = var(&t, "eta0");
        // Even times odd commutes.
        assert_eq!(x.mul(&eta0), eta0.mul(&x));
    }

    #[test]
    fn left_derivative_signs() {
        let t = coordinate_table(2);
        let eta0 = var(&t, "eta0");
        let eta1 = var(&t, "eta1");
        let m = eta0.mul(&eta1); // canonical η₀η₁
        // ∂/∂η₁ must cross η₀: sign −1.
        let d1 = m.derivative(t.index_of("eta1").unwrap());
        assert_eq!(d1, eta0.neg());
        let d0 = m.derivative(t.index_of("eta0").unwrap());
        assert_eq!(d0, eta1);
    }

    #[test]
    fn delta_on_coordinate_pairs() {
        let t = coordinate_table(1);
        let x = var(&t, "x0");
        let eta = var(&t, "eta0");
        // Δ(xη) = 1.
        assert_eq!(x.mul(&eta).bv_delta(), Element::one(&t));
        // Δ(x²η) = 2x.
        let x2eta = x.mul(&x).mul(&eta);
        assert_eq!(x2eta.bv_delta(), x.scale(&rat_int(2)));
        // Δ(x) = Δ(η) = 0.
        assert!(x.bv_delta().is_zero());
        assert!(eta.bv_delta().is_zero());
    }

    #[test]
    fn delta_on_ghost_pair_is_negative() {
        let t = ghost_pair_table();
        let c = var(&t, "c");
        let cs = var(&t, "cs");
        // Δ(c·cs) = −1 so that (c, cs) = +1.
        assert_eq!(c.mul(&cs).bv_delta(), Element::constant(&t, rat_int(-1)));
        assert_eq!(c.bv_bracket(&cs), Element::one(&t));
        assert_eq!(cs.bv_bracket(&c), Element::constant(&t, rat_int(-1)));
    }

    #[test]
    fn delta_squares_to_zero_on_samples() {
        let t = coordinate_table(2);
        let x0 = var(&t, "x0");
        let x1 = var(&t, "x1");
        let e0 = var(&t, "eta0");
        let e1 = var(&t, "eta1");
        let sample = x0
            .mul(&x0)
            .mul(&x1)
            .mul(&e0)
            .mul(&e1)
            .add(&x1.mul(&x1).mul(&e1).scale(&rat(3, 2)));
        assert!(sample.bv_delta().bv_delta().is_zero());
    }

    #[test]
    fn bracket_of_coordinates() {
        let t = coordinate_table(1);
        let x = var(&t, "x0");
        let eta = var(&t, "eta0");
        assert_eq!(x.bv_bracket(&eta), Element::one(&t));
        assert_eq!(eta.bv_bracket(&x), Element::constant(&t, rat_int(-1)));
        // (x³, η) = 3x².
        let x3 = x.mul(&x).mul(&x);
        assert_eq!(x3.bv_bracket(&eta), x.mul(&x).scale(&rat_int(3)));
        // (x, x) = (η, η) = 0.
        assert!(x.bv_bracket(&x).is_zero());
        assert!(eta.bv_bracket(&eta).is_zero());
    }

    #[test]
    fn q_and_k_for_cubic_action() {
        // S = x³/3: Q(η) = x², K(xη) = x³ − ħ.
        let t = coordinate_table(1);
        let x = var(&t, "x0");
        let eta = var(&t, "eta0");
        let s = x.mul(&x).mul(&x).scale(&rat(1, 3));
        assert_eq!(q_operator(&s, &eta), x.mul(&x));
        assert!(q_operator(&s, &x).is_zero());

        let xeta = HbarPoly::classical(x.mul(&eta));
        let k = xeta.k_operator(&s);
        assert_eq!(k.coeff(0), x.mul(&x).mul(&x));
        assert_eq!(k.coeff(1), Element::constant(&t, rat_int(-1)));
    }

    #[test]
    fn hbar_division() {
        let t = coordinate_table(1);
        let x = var(&t, "x0");
        let p = HbarPoly::from_coeffs(&t, vec![Element::zero(&t), x.clone()]);
        assert_eq!(p.div_hbar().unwrap(), HbarPoly::classical(x.clone()));
        let q = HbarPoly::classical(x);
        assert_eq!(q.div_hbar(), Err(AlgebraError::HbarDivision));
    }

    #[test]
    fn table_mismatch_is_detected() {
        let t1 = coordinate_table(1);
        let t2 = coordinate_table(2);
        let a = var(&t1, "x0");
        let b = var(&t2, "x0");
        assert_eq!(a.try_mul(&b), Err(AlgebraError::TableMismatch));
        // Structurally equal tables are compatible even as distinct `Arc`s.
        let t3 = coordinate_table(1);
        let c = var(&t3, "x0");
        assert_eq!(a.try_mul(&c).unwrap(), a.mul(&a.clone()).clone());
    }

    #[test]
    fn display_rendering() {
        use alloc::format;
        let t = coordinate_table(1);
        let x = var(&t, "x0");
        let e = x.mul(&x).scale(&rat(-1, 2)).add(&Element::one(&t));
        assert_eq!(format!("{e}"), "1 - 1/2*x0^2");
    }
}
