//! Two independent routes to every correlator, compared exactly.
//!
//! The engine extracts an observable tensor per word through the operator
//! path (`p_n^♯` recursion); the set-partition formula
//! `π_w = Σ_λ (−ħ)^{|w|−|λ|} Π_B φ_{|B|}` recomputes it combinatorially.
//! Both must agree coefficient-by-coefficient, the arity-3 and arity-4
//! operators must match their symbolic closed forms, and expectations must
//! be insensitive to unit insertions.

mod common;

use std::collections::BTreeMap;

use bvqft::correlators::{build_correlators, run_partition_oracle, verify_closed_forms};
use bvqft::scalar::{HbarScalar, Rat};
use bvqft::solver::MasterState;
use bvqft::tseries::Word;
use common::rat_i;

#[test]
fn partition_formula_agrees_with_the_operator_path() {
    for (name, model, _) in common::shipped_models() {
        let mut state = MasterState::new(model).unwrap();
        state.solve_to(4).unwrap();
        let data = build_correlators(&state).unwrap();
        run_partition_oracle(&state, &data, 4)
            .unwrap_or_else(|e| panic!("{name}: partition oracle disagrees: {e}"));
        verify_closed_forms(&state, &data)
            .unwrap_or_else(|e| panic!("{name}: closed form fails: {e}"));
        assert!(data.log().iter().all(|r| r.passed), "{name}: correlator check failed");
    }
}

#[test]
fn unit_insertions_do_not_change_expectations() {
    for (name, model, order) in common::shipped_models() {
        let mut state = MasterState::new(model).unwrap();
        state.solve_to(order).unwrap();
        let data = build_correlators(&state).unwrap();
        let mut expectation = vec![rat_i(0); state.model().h_basis().len()];
        expectation[state.model().socle_index()] = rat_i(1);
        let table: BTreeMap<Word, HbarScalar> = data.expectation_table(&expectation);

        let dim = state.theta(1).dim();
        let zero = HbarScalar::zero();
        let value = |w: &Word| table.get(w).cloned().unwrap_or_else(|| zero.clone());
        let mut compared = 0usize;
        for w in table.keys() {
            if (w.degree() as usize) < order {
                let padded = w.concat(&Word::letter(dim, 0));
                assert_eq!(
                    value(&padded),
                    value(w),
                    "{name}: unit insertion changed <pi_{w:?}>"
                );
                compared += 1;
            }
        }
        assert!(compared > 0, "{name}: no padded words compared");
    }
}

#[test]
fn socle_expectations_of_single_insertions_are_the_pairing() {
    // ⟨t^γ⟩ reads off the expectation vector itself: the arity-1 correlator
    // of the class e_γ against the socle functional.
    for (name, model, _) in common::shipped_models() {
        let socle = model.socle_index();
        let dim = model.h_basis().len();
        let mut state = MasterState::new(model).unwrap();
        state.solve_to(2).unwrap();
        let data = build_correlators(&state).unwrap();
        let mut expectation = vec![rat_i(0); dim];
        expectation[socle] = rat_i(1);
        let table = data.expectation_table(&expectation);
        for g in 0..dim {
            let got = table.get(&Word::letter(dim, g)).cloned().unwrap_or_else(HbarScalar::zero);
            let want = if g == socle {
                HbarScalar::constant(Rat::from_integer(1.into()))
            } else {
                HbarScalar::zero()
            };
            assert_eq!(got, want, "{name}: <t^{g}> wrong");
        }
    }
}
