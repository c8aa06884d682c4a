//! Correlation functions, quantum products and quantum coordinates.
//!
//! From the solved master-equation layers the module builds the closed
//! observable series
//!
//! ```text
//! Ω₁ = Θ₁,   Ω_n = (−ħ)^{n−1}·Θ_n + (1/n) Σ_{j=1}^{n−1} j(−ħ)^{j−1}·Θ_j·Ω_{n−j},
//! ```
//!
//! verifies `KΩ_n = 0` and `∂₀Ω_n = Ω_{n−1}`, and splits each layer on
//! cohomology as `Ω_n = p_n^♯Θ₁ + K x_n`, where the quantum products `p_n`
//! (tensors with values in `ℚ[ħ]`) and the witnesses `x_n` satisfy the
//! recursions
//!
//! ```text
//! p_n^♯ = (−ħ)^{n−2} m_n^♯ + (1/(n(n−1))) Σ_{k=2}^{n−1} (−ħ)^{k−2} k(k−1)·m_k^♯ p_{n+1−k}^♯,
//! x_2 = Λ₂,
//! x_n = (−ħ)^{n−2} Λ_n + (1/(n(n−1))) Σ_{k=2}^{n−1} (−ħ)^{k−2} k(k−1)·[m_k^♯ x_{n+1−k} + Λ_k·Ω_{n−k}].
//! ```
//!
//! The split is re-verified exactly at every order, as is the tensor
//! compatibility `p_n(e₀, …) = p_{n−1}(…)`.
//!
//! Correlation functions are `⟨π_w⟩ = Σ_γ p_w^γ ⟨O_γ⟩ ∈ ℚ[ħ]` against an
//! expectation vector `⟨O_γ⟩`, and the quantum coordinates have word
//! coefficients `T^γ_w = p_w^γ / ((−ħ)^{|w|−1}·Π_α c_α!)`, which satisfy
//! `∂₀T^γ = δ₀^γ − (1/ħ)·T^γ`.
//!
//! Two independent cross-checks guard the whole chain: a set-partition
//! formula for the observable tensors, `π_n = Σ_λ (−ħ)^{n−|λ|} Π_B φ_{|B|}`,
//! compared block by block against the `Ω` recursion, and a purely
//! combinatorial component recursion for `p_n` over argument subsets,
//! compared entry by entry against the operator path.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::algebra::HbarPoly;
use crate::scalar::{rat, rat_int, HbarLaurent, HbarScalar, Rat};
use crate::solver::{CheckRecord, MasterState, SolverError};
use crate::tseries::{HbarTensor, TSeries, Word};

/// All correlator-side layers up to the solved order.
pub struct CorrelatorData {
    order: usize,
    /// `omega[n]` for `1 ≤ n ≤ order`; index 0 unused.
    omega: Vec<TSeries>,
    /// `p_series[n] = p_n^♯Θ₁` for `2 ≤ n ≤ order`; 0, 1 unused.
    p_series: Vec<TSeries>,
    /// Witnesses `x_n` for `2 ≤ n ≤ order`; 0, 1 unused.
    x_series: Vec<TSeries>,
    /// Extracted tensors `p_n` for `2 ≤ n ≤ order`; 0, 1 unused.
    p_tensor: Vec<HbarTensor>,
    log: Vec<CheckRecord>,
}

fn sign_pow(j: usize) -> Rat {
    if j % 2 == 0 {
        rat_int(1)
    } else {
        rat_int(-1)
    }
}

/// Builds every correlator layer for the solved orders and verifies the
/// closure, descent, and splitting identities exactly.
pub fn build_correlators(state: &MasterState) -> Result<CorrelatorData, SolverError> {
    let n_max = state.order();
    let dim = state.theta(1).dim();
    let table = state.model().table();
    let zero = TSeries::zero(table, dim);
    let mut data = CorrelatorData {
        order: n_max,
        omega: vec![zero.clone(), state.theta(1).clone()],
        p_series: vec![zero.clone(), zero.clone()],
        x_series: vec![zero.clone(), zero],
        p_tensor: vec![HbarTensor::zero(0, dim), HbarTensor::zero(1, dim)],
        log: Vec::new(),
    };
    let check = |log: &mut Vec<CheckRecord>, name: &str, order: usize, passed: bool| {
        log.push(CheckRecord {
            name: name.into(),
            order,
            passed,
        });
        if passed {
            Ok(())
        } else {
            Err(SolverError::IdentityViolation {
                name: name.into(),
                order,
            })
        }
    };

    let k1_ok = data.omega[1].k_op(state.model()).is_zero();
    check(&mut data.log, "K(Omega_1) = 0", 1, k1_ok)?;

    for n in 2..=n_max {
        // Ω_n = (−ħ)^{n−1} Θ_n + (1/n) Σ j(−ħ)^{j−1} Θ_j Ω_{n−j}.
        let mut omega_n = state
            .theta(n)
            .scale(&sign_pow(n - 1))
            .mul_hbar_pow(n - 1);
        for j in 1..n {
            let term = state.theta(j).mul(&data.omega[n - j]);
            omega_n = omega_n.add(
                &term
                    .scale(&(sign_pow(j - 1) * rat(j as i64, n as i64)))
                    .mul_hbar_pow(j - 1),
            );
        }

        check(
            &mut data.log,
            "K(Omega_n) = 0",
            n,
            omega_n.k_op(state.model()).is_zero(),
        )?;
        check(
            &mut data.log,
            "d_0 Omega_n = Omega_{n-1}",
            n,
            omega_n.deriv(0) == data.omega[n - 1],
        )?;

        // p_n^♯Θ₁ and x_n by their recursions.
        let mut p_n = state.structure_tensor(n).apply_sharp(state.theta(1));
        p_n = p_n.scale(&sign_pow(n - 2)).mul_hbar_pow(n - 2);
        let mut x_n = state
            .lambda(n)
            .scale(&sign_pow(n - 2))
            .mul_hbar_pow(n - 2);
        let denom = rat(1, (n * (n - 1)) as i64);
        for k in 2..n {
            let coeff = sign_pow(k - 2) * rat_int((k * (k - 1)) as i64) * &denom;
            let sharp_p = state
                .structure_tensor(k)
                .apply_sharp(&data.p_series[n + 1 - k]);
            p_n = p_n.add(&sharp_p.scale(&coeff).mul_hbar_pow(k - 2));
            let sharp_x = state
                .structure_tensor(k)
                .apply_sharp(&data.x_series[n + 1 - k]);
            let gauge = state.lambda(k).mul(&data.omega[n - k]);
            x_n = x_n.add(&sharp_x.add(&gauge).scale(&coeff).mul_hbar_pow(k - 2));
        }

        let split_ok = omega_n == p_n.add(&x_n.k_op(state.model()));
        check(&mut data.log, "Omega_n = p_n#Theta_1 + K(x_n)", n, split_ok)?;

        let tensor = HbarTensor::from_series(state.model(), n, &p_n)?;

        // p_n(e₀, v) = p_{n−1}(v) for n ≥ 3.
        if n >= 3 {
            let mut words: BTreeSet<Word> = data.p_tensor[n - 1].entries().keys().cloned().collect();
            for w in tensor.entries().keys() {
                if let Some(v) = w.strike(0) {
                    words.insert(v);
                }
            }
            let zero_vec = vec![HbarScalar::zero(); dim];
            let compat = words.iter().all(|v| {
                let lifted = v.concat(&Word::letter(dim, 0));
                let lhs = tensor.value(&lifted).unwrap_or(zero_vec.as_slice());
                let rhs = data.p_tensor[n - 1].value(v).unwrap_or(zero_vec.as_slice());
                lhs == rhs
            });
            check(&mut data.log, "p_n(e_0, ...) = p_{n-1}(...)", n, compat)?;
        }

        data.omega.push(omega_n);
        data.p_series.push(p_n);
        data.x_series.push(x_n);
        data.p_tensor.push(tensor);
    }
    Ok(data)
}

impl CorrelatorData {
    /// Highest built order.
    pub fn order(&self) -> usize {
        self.order
    }

    /// The closed observable layer `Ω_n`, `1 ≤ n ≤ order`.
    pub fn omega(&self, n: usize) -> &TSeries {
        &self.omega[n]
    }

    /// The cohomology-valued series `p_n^♯Θ₁`, `2 ≤ n ≤ order`.
    pub fn p_series(&self, n: usize) -> &TSeries {
        &self.p_series[n]
    }

    /// The quantum product tensor `p_n`, `2 ≤ n ≤ order`.
    pub fn p_tensor(&self, n: usize) -> &HbarTensor {
        &self.p_tensor[n]
    }

    /// Everything verified during the build.
    pub fn log(&self) -> &[CheckRecord] {
        &self.log
    }

    /// The correlator table `⟨π_w⟩ = Σ_γ p_w^γ ⟨O_γ⟩` for all words with
    /// `1 ≤ |w| ≤ order` (arity one is `⟨O_γ⟩` itself). Zero values are
    /// omitted.
    pub fn expectation_table(&self, expectation: &[Rat]) -> BTreeMap<Word, HbarScalar> {
        let dim = expectation.len();
        let mut out = BTreeMap::new();
        for (g, e) in expectation.iter().enumerate() {
            if !e.is_zero() {
                out.insert(Word::letter(dim, g), HbarScalar::constant(e.clone()));
            }
        }
        for n in 2..=self.order {
            for (w, value) in self.p_tensor[n].entries() {
                let mut acc = HbarScalar::zero();
                for (v, e) in value.iter().zip(expectation) {
                    acc = acc.add(&v.scale(e));
                }
                if !acc.is_zero() {
                    out.insert(w.clone(), acc);
                }
            }
        }
        out
    }

    /// The quantum coordinates: for each `γ`, the word coefficients
    /// `T^γ_w = p_w^γ / ((−ħ)^{|w|−1} Π c_α!)` for `2 ≤ |w| ≤ order`, plus
    /// the linear term `T^γ_{e_γ} = 1`. Verifies
    /// `∂₀T^γ = δ₀^γ − (1/ħ)T^γ` on every word of degree `< order` before
    /// returning.
    pub fn quantum_coordinates(
        &self,
        dim: usize,
    ) -> Result<Vec<BTreeMap<Word, HbarLaurent>>, SolverError> {
        let mut coords: Vec<BTreeMap<Word, HbarLaurent>> = vec![BTreeMap::new(); dim];
        for (g, t) in coords.iter_mut().enumerate() {
            t.insert(
                Word::letter(dim, g),
                HbarLaurent::from_poly(&HbarScalar::constant(rat_int(1))),
            );
        }
        for n in 2..=self.order {
            for (w, value) in self.p_tensor[n].entries() {
                let norm = (w.factorial() * sign_pow(n - 1)).recip();
                for (g, p) in value.iter().enumerate() {
                    if p.is_zero() {
                        continue;
                    }
                    let t = HbarLaurent::from_poly_shifted(&p.scale(&norm), -((n - 1) as i64));
                    coords[g].insert(w.clone(), t);
                }
            }
        }

        // ∂₀T^γ = δ₀^γ − (1/ħ)T^γ, word by word up to degree order−1.
        for (g, t) in coords.iter().enumerate() {
            let mut words: BTreeSet<Word> = BTreeSet::new();
            words.insert(Word::empty(dim));
            for w in t.keys() {
                if (w.degree() as usize) < self.order {
                    words.insert(w.clone());
                }
                if let Some(v) = w.strike(0) {
                    words.insert(v);
                }
            }
            let zero = HbarLaurent::from_poly(&HbarScalar::zero());
            for v in words {
                let lifted = v.concat(&Word::letter(dim, 0));
                let mult = rat_int((v.0[0] + 1) as i64);
                let lhs = t.get(&lifted).unwrap_or(&zero).scale(&mult);
                let mut rhs = t.get(&v).unwrap_or(&zero).mul_hbar_pow(-1).neg();
                if g == 0 && v.degree() == 0 {
                    rhs = rhs.add(&HbarLaurent::from_poly(&HbarScalar::constant(rat_int(1))));
                }
                if lhs != rhs {
                    return Err(SolverError::IdentityViolation {
                        name: "d_0 T = delta_0 - T/hbar".into(),
                        order: v.degree() as usize + 1,
                    });
                }
            }
        }
        Ok(coords)
    }
}

/// Verifies the closed forms of the first two quantum-product operators,
///
/// ```text
/// p₃^♯ = ⅓ m₂^♯m₂^♯ − ħ·m₃^♯,
/// p₄^♯ = (1/18) m₂^♯m₂^♯m₂^♯ − (ħ/6) m₂^♯m₃^♯ − (ħ/2) m₃^♯m₂^♯ + ħ²·m₄^♯,
/// ```
///
/// by applying both sides to `Θ₁`. Requires `order ≥ 4`.
pub fn verify_closed_forms(
    state: &MasterState,
    data: &CorrelatorData,
) -> Result<(), SolverError> {
    let th1 = state.theta(1);
    let m2 = state.structure_tensor(2);
    let m3 = state.structure_tensor(3);
    let m4 = state.structure_tensor(4);

    let m2th = m2.apply_sharp(th1);
    let p3 = m2
        .apply_sharp(&m2th)
        .scale(&rat(1, 3))
        .sub(&m3.apply_sharp(th1).mul_hbar_pow(1));
    if p3 != *data.p_series(3) {
        return Err(SolverError::IdentityViolation {
            name: "p_3 closed form".into(),
            order: 3,
        });
    }

    let m3th = m3.apply_sharp(th1);
    let p4 = m2
        .apply_sharp(&m2.apply_sharp(&m2th))
        .scale(&rat(1, 18))
        .sub(&m2.apply_sharp(&m3th).scale(&rat(1, 6)).mul_hbar_pow(1))
        .sub(&m3.apply_sharp(&m2th).scale(&rat(1, 2)).mul_hbar_pow(1))
        .add(&m4.apply_sharp(th1).mul_hbar_pow(2));
    if p4 != *data.p_series(4) {
        return Err(SolverError::IdentityViolation {
            name: "p_4 closed form".into(),
            order: 4,
        });
    }
    Ok(())
}

/// All set partitions of `{0, …, n−1}`, each partition a list of blocks.
fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut current: Vec<Vec<usize>> = Vec::new();
    fn rec(i: usize, n: usize, current: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            out.push(current.clone());
            return;
        }
        for b in 0..current.len() {
            current[b].push(i);
            rec(i + 1, n, current, out);
            current[b].pop();
        }
        current.push(vec![i]);
        rec(i + 1, n, current, out);
        current.pop();
    }
    rec(0, n, &mut current, &mut out);
    out
}

/// All `k`-element index subsets of `{0, …, n−1}`.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Enumerates all words of the given degree over `dim` letters.
fn words_of_degree(dim: usize, degree: usize) -> Vec<Word> {
    let mut out = Vec::new();
    let mut exps = vec![0u32; dim];
    fn rec(i: usize, left: usize, exps: &mut Vec<u32>, out: &mut Vec<Word>) {
        if i + 1 == exps.len() {
            exps[i] = left as u32;
            out.push(Word(exps.clone().into_boxed_slice()));
            exps[i] = 0;
            return;
        }
        for e in 0..=left {
            exps[i] = e as u32;
            rec(i + 1, left - e, exps, out);
        }
        exps[i] = 0;
    }
    if dim == 0 {
        return out;
    }
    rec(0, degree, &mut exps, &mut out);
    out
}

/// The combinatorial component recursion for the quantum products:
///
/// ```text
/// p_n(a₁…a_n) = (−ħ)^{n−2} m_n(a₁…a_n)
///   + (1/(n(n−1))) Σ_{k=2}^{n−1} (−ħ)^{k−2} k(k−1)
///       Σ_{|T|=k} Σ_γ m_k(a_T)^γ · p_{n+1−k}(e_γ, a_{T^c})
/// ```
///
/// memoised on sorted argument words.
fn component_p(
    state: &MasterState,
    memo: &mut BTreeMap<Word, Vec<HbarScalar>>,
    w: &Word,
) -> Vec<HbarScalar> {
    if let Some(v) = memo.get(w) {
        return v.clone();
    }
    let dim = w.0.len();
    let n = w.degree() as usize;
    let letters = w.letters();
    let mut out = vec![HbarScalar::zero(); dim];
    if let Some(m_n) = state.structure_tensor(n).value(w) {
        let sign = sign_pow(n - 2);
        for (o, r) in out.iter_mut().zip(m_n) {
            *o = o.add(&HbarScalar::monomial(r * &sign, n - 2));
        }
    }
    let denom = rat(1, (n * (n - 1)) as i64);
    for k in 2..n {
        let coeff = sign_pow(k - 2) * rat_int((k * (k - 1)) as i64) * &denom;
        for subset in combinations(n, k) {
            let sub: Vec<usize> = subset.iter().map(|&i| letters[i]).collect();
            let Some(mk) = state.structure_tensor(k).value_at(&sub) else {
                continue;
            };
            let mk = mk.to_vec();
            let mut rest: Vec<usize> = Vec::with_capacity(n - k);
            let in_subset: BTreeSet<usize> = subset.iter().cloned().collect();
            for (i, &a) in letters.iter().enumerate() {
                if !in_subset.contains(&i) {
                    rest.push(a);
                }
            }
            for (g, r) in mk.iter().enumerate() {
                if r.is_zero() {
                    continue;
                }
                let mut args = rest.clone();
                args.push(g);
                let inner = component_p(state, memo, &Word::from_indices(dim, &args));
                let scale = HbarScalar::monomial(r * &coeff, k - 2);
                for (o, p) in out.iter_mut().zip(&inner) {
                    *o = o.add(&p.mul(&scale));
                }
            }
        }
    }
    memo.insert(w.clone(), out.clone());
    out
}

/// Runs the two independent oracles against the operator-path results, for
/// every word of arity `2 ≤ n ≤ max_arity`:
///
/// * the set-partition formula `π_w = Σ_λ (−ħ)^{|w|−|λ|} Π_B φ_{|B|}` must
///   reproduce the tensor coefficients of `Ω_n` and be `K`-closed;
/// * the component recursion for `p_n` must reproduce the extracted tensor.
pub fn run_partition_oracle(
    state: &MasterState,
    data: &CorrelatorData,
    max_arity: usize,
) -> Result<(), SolverError> {
    let model = state.model();
    let dim = state.theta(1).dim();
    let mut memo: BTreeMap<Word, Vec<HbarScalar>> = BTreeMap::new();
    // Seed arity 1: p₁ is the identity.
    for g in 0..dim {
        let mut v = vec![HbarScalar::zero(); dim];
        v[g] = HbarScalar::constant(rat_int(1));
        memo.insert(Word::letter(dim, g), v);
    }
    let fail = |name: &str, order: usize| SolverError::IdentityViolation {
        name: name.into(),
        order,
    };

    for n in 2..=max_arity {
        let partitions = set_partitions(n);
        for w in words_of_degree(dim, n) {
            let letters = w.letters();
            // Partition formula for the observable tensor.
            let mut pi = HbarPoly::zero(model.table());
            for partition in &partitions {
                let mut product = HbarPoly::classical(crate::algebra::Element::one(model.table()));
                for block in partition {
                    let args: Vec<usize> = block.iter().map(|&i| letters[i]).collect();
                    let sub = Word::from_indices(dim, &args);
                    let phi = state.theta(args.len()).tensor_coeff(&sub);
                    product = product.mul(&phi);
                    if product.is_zero() {
                        break;
                    }
                }
                let hops = n - partition.len();
                pi = pi.add(&product.scale(&sign_pow(hops)).mul_hbar_pow(hops));
            }
            if !model.k(&pi).is_zero() {
                return Err(fail("K(pi_w) = 0 (partition oracle)", n));
            }
            if pi != data.omega(n).tensor_coeff(&w) {
                return Err(fail("partition formula = Omega tensor", n));
            }
            // Component recursion for the quantum product.
            let direct = component_p(state, &mut memo, &w);
            let zero_vec = vec![HbarScalar::zero(); dim];
            let extracted = data.p_tensor(n).value(&w).unwrap_or(zero_vec.as_slice());
            if direct.as_slice() != extracted {
                return Err(fail("component p recursion = operator p", n));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{cusp_model, fermat_cubic_model};
    use crate::solver::MasterState;

    fn solved_cusp(order: usize) -> MasterState {
        let mut st = MasterState::new(cusp_model()).unwrap();
        st.solve_to(order).unwrap();
        st
    }

    #[test]
    fn cusp_correlator_chain() {
        let st = solved_cusp(6);
        let data = build_correlators(&st).unwrap();
        assert!(data.log().iter().all(|r| r.passed));
        verify_closed_forms(&st, &data).unwrap();
        run_partition_oracle(&st, &data, 4).unwrap();

        // p₂ = m₂, so ⟨π_{x,x}⟩ = 0 against the socle functional while
        // ⟨π_{1,x}⟩ = 1.
        let expectation = vec![rat_int(0), rat_int(1)];
        let table = data.expectation_table(&expectation);
        assert!(table.get(&Word::from_indices(2, &[1, 1])).is_none());
        assert_eq!(
            table.get(&Word::from_indices(2, &[0, 1])).unwrap(),
            &HbarScalar::constant(rat_int(1))
        );
        // p₃(e₁,e₁,e₁) = −ħ·m₃(e₁,e₁,e₁) = ħ·e₀.
        let p3 = data.p_tensor(3);
        let v = p3.value(&Word::from_indices(2, &[1, 1, 1])).unwrap();
        assert_eq!(v[0], HbarScalar::monomial(rat_int(1), 1));
        assert!(v[1].is_zero());
    }

    #[test]
    fn cusp_quantum_coordinates() {
        let st = solved_cusp(5);
        let data = build_correlators(&st).unwrap();
        let coords = data.quantum_coordinates(2).unwrap();
        // Linear terms.
        assert_eq!(
            coords[1].get(&Word::letter(2, 1)).unwrap(),
            &HbarLaurent::from_poly(&HbarScalar::constant(rat_int(1)))
        );
        // T⁰ at word (t¹)³: p⁰ = ħ, so ħ/((−ħ)²·3!) = 1/(6ħ).
        let w = Word::from_indices(2, &[1, 1, 1]);
        let expected = HbarLaurent::from_poly_shifted(&HbarScalar::constant(rat(1, 6)), -1);
        assert_eq!(coords[0].get(&w).unwrap(), &expected);
        // T¹ at the unit word: T¹_{0,1} = p^1_{01}/(−ħ) = −1/ħ.
        let w01 = Word::from_indices(2, &[0, 1]);
        let expected01 = HbarLaurent::from_poly_shifted(&HbarScalar::constant(rat_int(-1)), -1);
        assert_eq!(coords[1].get(&w01).unwrap(), &expected01);
    }

    #[test]
    fn fermat_cubic_correlator_chain() {
        let mut st = MasterState::new(fermat_cubic_model()).unwrap();
        st.solve_to(4).unwrap();
        let data = build_correlators(&st).unwrap();
        assert!(data.log().iter().all(|r| r.passed));
        verify_closed_forms(&st, &data).unwrap();
        run_partition_oracle(&st, &data, 4).unwrap();
        data.quantum_coordinates(2).unwrap();
    }
}
