//! The four shipped models, constructed through the public API, plus small
//! random-element helpers shared by the integration tests.

// Each integration-test binary compiles this module separately and uses a
// subset of it.
#![allow(dead_code)]

use std::sync::Arc;

use bvqft::algebra::{Element, Parity, Variable, VariableTable};
use bvqft::groebner::MonomialOrder;
use bvqft::model::{build_model, GaugedSpec, IsolatedSpec, Model, ModelSpec};
use bvqft::scalar::Rat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rat_i(n: i64) -> Rat {
    Rat::from_integer(n.into())
}

/// Coordinates named `names`, each paired with an odd ghost-(−1) antifield
/// named by appending `s`.
pub fn coordinate_table(names: &[&str]) -> Arc<VariableTable> {
    let m = names.len();
    let mut vars = Vec::new();
    for (i, n) in names.iter().enumerate() {
        vars.push(Variable {
            name: (*n).into(),
            ghost: 0,
            parity: Parity::Even,
            weight: 1,
            partner: Some(m + i),
        });
    }
    for (i, n) in names.iter().enumerate() {
        vars.push(Variable {
            name: format!("{n}s"),
            ghost: -1,
            parity: Parity::Odd,
            weight: -1,
            partner: Some(i),
        });
    }
    VariableTable::new(vars).unwrap()
}

fn var(t: &Arc<VariableTable>, name: &str) -> Element {
    Element::variable(t, t.index_of(name).unwrap()).unwrap()
}

fn isolated(table: Arc<VariableTable>, action: Element) -> Model {
    build_model(ModelSpec::Isolated(IsolatedSpec {
        table,
        action,
        order: MonomialOrder::GrevLex,
        degree_cap: 40,
    }))
    .unwrap()
}

/// `S = x³/3`: cohomology `{1, x}`.
pub fn a2_model() -> Model {
    let t = coordinate_table(&["x"]);
    let x = var(&t, "x");
    let action = x.mul(&x).mul(&x).scale(&Rat::new(1.into(), 3.into()));
    isolated(t, action)
}

/// `S = x⁴/4`: cohomology `{1, x, x²}`.
pub fn a3_model() -> Model {
    let t = coordinate_table(&["x"]);
    let x = var(&t, "x");
    let action = x.mul(&x).mul(&x).mul(&x).scale(&Rat::new(1.into(), 4.into()));
    isolated(t, action)
}

/// `S = x³/3 + y³/3 + x·y`: four nondegenerate critical points,
/// cohomology `{1, x, y, x·y}`.
pub fn twovar_model() -> Model {
    let t = coordinate_table(&["x", "y"]);
    let x = var(&t, "x");
    let y = var(&t, "y");
    let third = Rat::new(1.into(), 3.into());
    let action = x
        .mul(&x)
        .mul(&x)
        .scale(&third)
        .add(&y.mul(&y).mul(&y).scale(&third))
        .add(&x.mul(&y));
    isolated(t, action)
}

/// Gauged Fermat cubic: `S = p·(x₁³+x₂³+x₃³) + c·(Σxᵢxᵢˢ − 3p·pˢ)`,
/// cohomology `{1, p·x₁x₂x₃}`.
pub fn fermat_cubic_model() -> Model {
    let mut vars = Vec::new();
    vars.push(Variable {
        name: "p".into(),
        ghost: 0,
        parity: Parity::Even,
        weight: -3,
        partner: Some(4),
    });
    for i in 1..=3usize {
        vars.push(Variable {
            name: format!("x{i}"),
            ghost: 0,
            parity: Parity::Even,
            weight: 1,
            partner: Some(4 + i),
        });
    }
    vars.push(Variable {
        name: "ps".into(),
        ghost: -1,
        parity: Parity::Odd,
        weight: 3,
        partner: Some(0),
    });
    for i in 1..=3usize {
        vars.push(Variable {
            name: format!("x{i}s"),
            ghost: -1,
            parity: Parity::Odd,
            weight: -1,
            partner: Some(i),
        });
    }
    vars.push(Variable { name: "c".into(), ghost: 1, parity: Parity::Odd, weight: 0, partner: Some(9) });
    vars.push(Variable { name: "cs".into(), ghost: -2, parity: Parity::Even, weight: 0, partner: Some(8) });
    let t = VariableTable::new(vars).unwrap();
    let p = var(&t, "p");
    let c = var(&t, "c");
    let mut g = Element::zero(&t);
    let mut r = Element::zero(&t);
    for i in 1..=3 {
        let x = var(&t, &format!("x{i}"));
        g = g.add(&x.mul(&x).mul(&x));
        r = r.add(&x.mul(&var(&t, &format!("x{i}s"))));
    }
    r = r.sub(&p.mul(&var(&t, "ps")).scale(&rat_i(3)));
    let action = p.mul(&g).add(&c.mul(&r));
    build_model(ModelSpec::Gauged(GaugedSpec {
        table: t,
        action,
        p: 0,
        coords: vec![1, 2, 3],
        ghost: 8,
        ghost_antifield: 9,
        order: MonomialOrder::GrevLex,
        degree_cap: 24,
    }))
    .unwrap()
}

/// All four shipped models with the order each is exercised to.
pub fn shipped_models() -> Vec<(&'static str, Model, usize)> {
    vec![
        ("a2", a2_model(), 6),
        ("a3", a3_model(), 6),
        ("twovar", twovar_model(), 6),
        ("fermat_cubic", fermat_cubic_model(), 4),
    ]
}

/// A random monomial over the table: bounded exponents, odd variables at
/// most once, with a nonzero rational coefficient.
pub fn random_monomial(t: &Arc<VariableTable>, rng: &mut ChaCha8Rng) -> Element {
    loop {
        let mut e = Element::constant(t, rat_i(rng.random_range(-3..=3)));
        for i in 0..t.len() {
            let max = if t.var(i).parity == Parity::Odd { 1 } else { 2 };
            for _ in 0..rng.random_range(0..=max) {
                e = e.mul(&Element::variable(t, i).unwrap());
            }
        }
        if !e.is_zero() {
            return e;
        }
    }
}

/// A random element that is homogeneous in parity (not necessarily in
/// ghost number); returns the element with its parity bit.
pub fn random_parity_homogeneous(t: &Arc<VariableTable>, rng: &mut ChaCha8Rng) -> (Element, i32) {
    loop {
        let m = random_monomial(t, rng);
        let parity = m.ghost_number().unwrap().rem_euclid(2);
        let mut e = m;
        for _ in 0..2 {
            let extra = random_monomial(t, rng);
            if extra.ghost_number().unwrap().rem_euclid(2) == parity {
                e = e.add(&extra);
            }
        }
        if !e.is_zero() {
            return (e, parity);
        }
    }
}

/// An arbitrary (inhomogeneous) random element.
pub fn random_element(t: &Arc<VariableTable>, rng: &mut ChaCha8Rng) -> Element {
    let mut e = Element::zero(t);
    for _ in 0..3 {
        e = e.add(&random_monomial(t, rng));
    }
    e
}
