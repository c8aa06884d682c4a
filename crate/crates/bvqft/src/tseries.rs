//! Formal series in the coupling constants `t^γ` dual to the cohomology
//! basis, with coefficients in `𝒞[ħ]`.
//!
//! A series is stored as a map from words (multiplicity vectors over the
//! basis) to plain word coefficients: the series `Σ_w t^w · c_w` keeps `c_w`
//! itself, with no internal symmetry factorials. Symmetric-tensor values are
//! converted at the boundary: a tensor entry for the word `w` equals
//! `(Π_γ w_γ!) · c_w`, and the factorial is applied exactly once, inside
//! [`StructureTensor::from_series`]/[`TSeries::tensor_coeff`] on the way out
//! and inside [`StructureTensor::apply_sharp`] on the way in.
//!
//! All couplings are even: the engine only supports models whose cohomology
//! representatives are even, which both shipped classes satisfy. Under that
//! assumption coupling monomials are central and all Koszul signs live in
//! the algebra coefficients.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Zero};

use crate::algebra::{AlgebraError, HbarPoly, Parity, VariableTable};
use crate::model::{Model, ModelError};
use crate::scalar::{HbarScalar, Rat};

/// A word in the couplings: `w[γ]` is the multiplicity of `t^γ`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Word(pub Box<[u32]>);

impl Word {
    /// The empty word of the given dimension.
    pub fn empty(dim: usize) -> Self {
        Word(vec![0; dim].into_boxed_slice())
    }

    /// The single-letter word `t^γ`.
    pub fn letter(dim: usize, gamma: usize) -> Self {
        let mut w = vec![0; dim];
        w[gamma] += 1;
        Word(w.into_boxed_slice())
    }

    /// The word of a multiset of basis indices.
    pub fn from_indices(dim: usize, indices: &[usize]) -> Self {
        let mut w = vec![0; dim];
        for &i in indices {
            w[i] += 1;
        }
        Word(w.into_boxed_slice())
    }

    /// Total degree `Σ_γ w_γ` (the arity of the tensor slot).
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// The symmetry factor `Π_γ w_γ!`.
    pub fn factorial(&self) -> Rat {
        let mut out = Rat::one();
        for &e in self.0.iter() {
            out *= crate::scalar::factorial(e as u64);
        }
        out
    }

    /// Componentwise sum.
    pub fn concat(&self, other: &Word) -> Word {
        Word(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Removes one occurrence of letter `γ`; `None` if absent.
    pub fn strike(&self, gamma: usize) -> Option<Word> {
        if self.0[gamma] == 0 {
            return None;
        }
        let mut w = self.0.clone();
        w[gamma] -= 1;
        Some(Word(w))
    }

    /// Expands the word into its multiset of letters.
    pub fn letters(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.degree() as usize);
        for (i, &e) in self.0.iter().enumerate() {
            for _ in 0..e {
                out.push(i);
            }
        }
        out
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// A polynomial in the couplings with coefficients in `𝒞[ħ]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TSeries {
    table: Arc<VariableTable>,
    dim: usize,
    terms: BTreeMap<Word, HbarPoly>,
}

impl TSeries {
    /// The zero series.
    pub fn zero(table: &Arc<VariableTable>, dim: usize) -> Self {
        TSeries {
            table: table.clone(),
            dim,
            terms: BTreeMap::new(),
        }
    }

    /// The tautological degree-one series `Σ_γ t^γ · O_γ`.
    ///
    /// Fails when any basis representative is odd (the series layer requires
    /// even couplings throughout).
    pub fn theta_one(model: &Model) -> Result<Self, ModelError> {
        let dim = model.h_basis().len();
        let mut out = TSeries::zero(model.table(), dim);
        for (g, class) in model.h_basis().iter().enumerate() {
            for m in class.repr.terms().keys() {
                let odd: u32 = m
                    .0
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| model.table().var(i).parity == Parity::Odd)
                    .map(|(_, &e)| e)
                    .sum();
                if odd % 2 != 0 {
                    return Err(ModelError::InvalidStructure(
                        "cohomology representatives must be even for the coupling series".into(),
                    ));
                }
            }
            out.add_term(
                Word::letter(dim, g),
                HbarPoly::classical(class.repr.clone()),
            );
        }
        Ok(out)
    }

    /// Number of couplings.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The variable table of the coefficients.
    pub fn table(&self) -> &Arc<VariableTable> {
        &self.table
    }

    /// Word/coefficient pairs (zero coefficients are never stored).
    pub fn terms(&self) -> &BTreeMap<Word, HbarPoly> {
        &self.terms
    }

    /// True when the series has no terms.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The plain coefficient of `t^w` (zero if absent).
    pub fn coeff(&self, w: &Word) -> HbarPoly {
        self.terms
            .get(w)
            .cloned()
            .unwrap_or_else(|| HbarPoly::zero(&self.table))
    }

    /// The symmetric-tensor value at `w`: `(Π w_γ!) · coeff(w)`.
    pub fn tensor_coeff(&self, w: &Word) -> HbarPoly {
        self.coeff(w).scale(&w.factorial())
    }

    /// Adds `c · t^w` in place, dropping the term if it cancels.
    pub fn add_term(&mut self, w: Word, c: HbarPoly) {
        if c.is_zero() {
            return;
        }
        use alloc::collections::btree_map::Entry;
        match self.terms.entry(w) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let sum = o.get().add(&c);
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    /// Sum.
    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), c.clone());
        }
        out
    }

    /// Difference.
    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// Negation.
    pub fn neg(&self) -> Self {
        self.map_coeffs(HbarPoly::neg)
    }

    /// Scales every coefficient by a rational.
    pub fn scale(&self, r: &Rat) -> Self {
        if r.is_zero() {
            return TSeries::zero(&self.table, self.dim);
        }
        self.map_coeffs(|c| c.scale(r))
    }

    /// Multiplies every coefficient by `ħ^k`.
    pub fn mul_hbar_pow(&self, k: usize) -> Self {
        self.map_coeffs(|c| c.mul_hbar_pow(k))
    }

    /// Applies a map to every coefficient, dropping zeros.
    pub fn map_coeffs(&self, f: impl Fn(&HbarPoly) -> HbarPoly) -> Self {
        let mut out = TSeries::zero(&self.table, self.dim);
        for (w, c) in &self.terms {
            out.add_term(w.clone(), f(c));
        }
        out
    }

    /// Product of series (couplings are even and central: words add, the
    /// algebra coefficients multiply in order).
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = TSeries::zero(&self.table, self.dim);
        for (w1, c1) in &self.terms {
            for (w2, c2) in &other.terms {
                out.add_term(w1.concat(w2), c1.mul(c2));
            }
        }
        out
    }

    /// BV bracket, extended coefficient-wise over the couplings.
    pub fn bracket(&self, other: &Self) -> Self {
        let mut out = TSeries::zero(&self.table, self.dim);
        for (w1, c1) in &self.terms {
            for (w2, c2) in &other.terms {
                out.add_term(w1.concat(w2), c1.bv_bracket(c2));
            }
        }
        out
    }

    /// `∂/∂t^γ` (couplings are even: plain Leibniz, multiplicity factor).
    pub fn deriv(&self, gamma: usize) -> Self {
        let mut out = TSeries::zero(&self.table, self.dim);
        for (w, c) in &self.terms {
            if let Some(v) = w.strike(gamma) {
                out.add_term(v, c.scale(&Rat::from_integer(w.0[gamma].into())));
            }
        }
        out
    }

    /// `Δ` coefficient-wise.
    pub fn delta_op(&self) -> Self {
        self.map_coeffs(HbarPoly::bv_delta)
    }

    /// `Q = (S, ·)` coefficient-wise.
    pub fn q_op(&self, model: &Model) -> Self {
        self.map_coeffs(|c| model.q_hbar(c))
    }

    /// `K = −ħΔ + Q` coefficient-wise.
    pub fn k_op(&self, model: &Model) -> Self {
        self.map_coeffs(|c| model.k(c))
    }

    /// Exact division by `ħ`; fails if any coefficient has a classical part.
    pub fn div_hbar(&self) -> Result<Self, AlgebraError> {
        let mut out = TSeries::zero(&self.table, self.dim);
        for (w, c) in &self.terms {
            out.add_term(w.clone(), c.div_hbar()?);
        }
        Ok(out)
    }

    /// Largest word degree present (`None` when zero).
    pub fn max_word_degree(&self) -> Option<u32> {
        self.terms.keys().map(Word::degree).max()
    }
}

/// A symmetric tensor `H^{⊗k} → H` with rational values, stored sparsely as
/// word → value-vector (the word is the sorted multiset of arguments).
#[derive(Clone, Debug, PartialEq)]
pub struct StructureTensor {
    arity: usize,
    dim: usize,
    entries: BTreeMap<Word, Vec<Rat>>,
}

impl StructureTensor {
    /// The zero tensor of the given arity.
    pub fn zero(arity: usize, dim: usize) -> Self {
        StructureTensor {
            arity,
            dim,
            entries: BTreeMap::new(),
        }
    }

    /// The arity `k`.
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// The coefficient dimension (`dim H`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All nonzero entries.
    pub fn entries(&self) -> &BTreeMap<Word, Vec<Rat>> {
        &self.entries
    }

    /// True when every value vanishes.
    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sets the value at a word (dropped when identically zero).
    pub fn insert(&mut self, w: Word, value: Vec<Rat>) {
        debug_assert_eq!(w.degree() as usize, self.arity);
        debug_assert_eq!(value.len(), self.dim);
        if value.iter().any(|r| !r.is_zero()) {
            self.entries.insert(w, value);
        }
    }

    /// The tensor value at a word (`None` = zero).
    pub fn value(&self, w: &Word) -> Option<&[Rat]> {
        self.entries.get(w).map(Vec::as_slice)
    }

    /// The tensor value on an explicit multiset of arguments.
    pub fn value_at(&self, args: &[usize]) -> Option<&[Rat]> {
        debug_assert_eq!(args.len(), self.arity);
        self.value(&Word::from_indices(self.dim, args))
    }

    /// The derivation `m^♯ = Σ_A (t^A / A!) · m_A^γ · ∂/∂t^γ` applied to a
    /// series.
    pub fn apply_sharp(&self, x: &TSeries) -> TSeries {
        let mut out = TSeries::zero(x.table(), x.dim());
        // Precompute the γ-derivatives that actually occur.
        let mut derivs: BTreeMap<usize, TSeries> = BTreeMap::new();
        for value in self.entries.values() {
            for (g, r) in value.iter().enumerate() {
                if !r.is_zero() && !derivs.contains_key(&g) {
                    derivs.insert(g, x.deriv(g));
                }
            }
        }
        for (a, value) in &self.entries {
            let inv_fact = a.factorial().recip();
            for (g, r) in value.iter().enumerate() {
                if r.is_zero() {
                    continue;
                }
                let d = &derivs[&g];
                for (w, c) in d.terms() {
                    out.add_term(a.concat(w), c.scale(&(r * &inv_fact)));
                }
            }
        }
        out
    }

    /// Extracts the arity-`k` tensor from a degree-`k` series with values in
    /// `span{O_γ}` and `ħ`-free coefficients.
    ///
    /// Fails with `ReconstructionFailed` if any coefficient leaves the span
    /// or carries `ħ` (callers only pass series that must be classical).
    pub fn from_series(model: &Model, arity: usize, x: &TSeries) -> Result<Self, ModelError> {
        let dim = model.h_basis().len();
        let mut out = StructureTensor::zero(arity, dim);
        for (w, c) in x.terms() {
            debug_assert_eq!(w.degree() as usize, arity);
            if c.coeffs().len() > 1 {
                return Err(ModelError::ReconstructionFailed);
            }
            let coords = model
                .h_coordinates(&c.classical_part())
                .ok_or(ModelError::ReconstructionFailed)?;
            let f = w.factorial();
            out.insert(w.clone(), coords.into_iter().map(|r| r * &f).collect());
        }
        Ok(out)
    }
}

/// A symmetric tensor with values in `ℚ[ħ]^dim` (the quantum products
/// underlying the correlation functions).
#[derive(Clone, Debug, PartialEq)]
pub struct HbarTensor {
    arity: usize,
    dim: usize,
    entries: BTreeMap<Word, Vec<HbarScalar>>,
}

impl HbarTensor {
    /// The zero tensor.
    pub fn zero(arity: usize, dim: usize) -> Self {
        HbarTensor {
            arity,
            dim,
            entries: BTreeMap::new(),
        }
    }

    /// The arity.
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// The coefficient dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All nonzero entries.
    pub fn entries(&self) -> &BTreeMap<Word, Vec<HbarScalar>> {
        &self.entries
    }

    /// The value at a word (`None` = zero).
    pub fn value(&self, w: &Word) -> Option<&[HbarScalar]> {
        self.entries.get(w).map(Vec::as_slice)
    }

    /// Sets a value (dropped when identically zero).
    pub fn insert(&mut self, w: Word, value: Vec<HbarScalar>) {
        debug_assert_eq!(w.degree() as usize, self.arity);
        if value.iter().any(|s| !s.is_zero()) {
            self.entries.insert(w, value);
        }
    }

    /// Extracts the arity-`k` tensor from a degree-`k` series with values in
    /// `span{O_γ} ⊗ ℚ[ħ]`.
    pub fn from_series(model: &Model, arity: usize, x: &TSeries) -> Result<Self, ModelError> {
        let dim = model.h_basis().len();
        let mut out = HbarTensor::zero(arity, dim);
        for (w, c) in x.terms() {
            debug_assert_eq!(w.degree() as usize, arity);
            let f = w.factorial();
            let mut value = vec![HbarScalar::zero(); dim];
            for (k, e) in c.coeffs().iter().enumerate() {
                let coords = model
                    .h_coordinates(e)
                    .ok_or(ModelError::ReconstructionFailed)?;
                for (g, r) in coords.into_iter().enumerate() {
                    if !r.is_zero() {
                        value[g] = value[g].add(&HbarScalar::monomial(r * &f, k));
                    }
                }
            }
            out.insert(w.clone(), value);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Element;
    use crate::model::tests::cusp_model;
    use crate::scalar::{rat, rat_int};

    #[test]
    fn word_basics() {
        let w = Word::from_indices(3, &[0, 2, 2, 2]);
        assert_eq!(w.0.as_ref(), &[1, 0, 3]);
        assert_eq!(w.degree(), 4);
        assert_eq!(w.factorial(), rat_int(6));
        assert_eq!(w.letters(), vec![0, 2, 2, 2]);
        assert_eq!(w.strike(1), None);
        assert_eq!(
            w.strike(2).unwrap(),
            Word::from_indices(3, &[0, 2, 2])
        );
    }

    #[test]
    fn theta_one_and_derivatives() {
        let model = cusp_model();
        let th1 = TSeries::theta_one(&model).unwrap();
        assert_eq!(th1.terms().len(), 2);
        // ∂₀Θ₁ = O_0 = 1, as a degree-0 series.
        let d0 = th1.deriv(0);
        assert_eq!(
            d0.coeff(&Word::empty(2)),
            HbarPoly::classical(Element::one(model.table()))
        );
        // Θ₁² has the cross terms with multiplicity coefficients 1 (plain
        // word coefficients, no symmetry factor).
        let sq = th1.mul(&th1);
        let x = Element::variable(model.table(), 0).unwrap();
        assert_eq!(
            sq.coeff(&Word::from_indices(2, &[0, 1])),
            HbarPoly::classical(x.scale(&rat_int(2)))
        );
        assert_eq!(
            sq.tensor_coeff(&Word::from_indices(2, &[1, 1])),
            HbarPoly::classical(x.mul(&x).scale(&rat_int(2)))
        );
    }

    #[test]
    fn sharp_application_is_a_derivation_substitute() {
        let model = cusp_model();
        let th1 = TSeries::theta_one(&model).unwrap();
        // m₂ = multiplication table of ℚ[x]/(x²): m(e₀,e₀)=e₀, m(e₀,e₁)=e₁,
        // m(e₁,e₁)=0.
        let mut m2 = StructureTensor::zero(2, 2);
        m2.insert(Word::from_indices(2, &[0, 0]), vec![rat_int(1), rat_int(0)]);
        m2.insert(Word::from_indices(2, &[0, 1]), vec![rat_int(0), rat_int(1)]);
        let y = m2.apply_sharp(&th1);
        // m♯Θ₁ at word (2,0): (t⁰)²/2!·m_{00}^0·∂₀Θ₁ coefficient = 1/2·1·1.
        assert_eq!(
            y.coeff(&Word::from_indices(2, &[0, 0])),
            HbarPoly::classical(Element::one(model.table()).scale(&rat(1, 2)))
        );
        // At word (1,1): t⁰t¹·m_{01}^1·∂₁Θ₁ = x, with 1/A! = 1.
        let x = Element::variable(model.table(), 0).unwrap();
        assert_eq!(
            y.coeff(&Word::from_indices(2, &[0, 1])),
            HbarPoly::classical(x)
        );
        // Tensor round trip: extract back the values inserted.
        let t = StructureTensor::from_series(&model, 2, &y).unwrap();
        assert_eq!(
            t.value(&Word::from_indices(2, &[0, 0])).unwrap(),
            &[rat_int(1), rat_int(0)]
        );
        assert_eq!(
            t.value_at(&[0, 1]).unwrap(),
            &[rat_int(0), rat_int(1)]
        );
        assert!(t.value_at(&[1, 1]).is_none());
    }

    #[test]
    fn series_bracket_and_k() {
        let model = cusp_model();
        let th1 = TSeries::theta_one(&model).unwrap();
        // (Θ₁, Θ₁) = 0: all representatives are functions of x only.
        assert!(th1.bracket(&th1).is_zero());
        // KΘ₁ = QΘ₁ = 0 on cohomology representatives.
        assert!(th1.k_op(&model).is_zero());
        // K(t¹·xη) = t¹·(x³ − ħ).
        let x = Element::variable(model.table(), 0).unwrap();
        let eta = Element::variable(model.table(), 1).unwrap();
        let mut s = TSeries::zero(model.table(), 2);
        s.add_term(Word::letter(2, 1), HbarPoly::classical(x.mul(&eta)));
        let k = s.k_op(&model);
        let c = k.coeff(&Word::letter(2, 1));
        assert_eq!(c.coeff(0), x.mul(&x).mul(&x));
        assert_eq!(c.coeff(1), Element::constant(model.table(), rat_int(-1)));
    }
}
