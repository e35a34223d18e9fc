use std::collections::BTreeMap;
use std::collections::BTreeSet;

use proptest::prelude::*;

use crate::algebra::{Context, ScalarExpr};

use super::pole::{PoleForm, PoleKey, PoleLoc, TermKey};
use super::rat::RatExpr;
use super::vpoly::{VPoly, Var};
use super::{parse_form, rat_to_poles, DiffForm, FormError, FormVariable, LaurentPoint};

fn zv() -> Var {
    Var::new("z")
}

fn one_var(text: &str) -> DiffForm {
    let ctx = Context::empty();
    parse_form(&ctx, &[FormVariable::new("z", 0)], text).unwrap()
}

fn two_var(text: &str) -> DiffForm {
    let ctx = Context::empty();
    parse_form(
        &ctx,
        &[FormVariable::new("z1", 0), FormVariable::new("z2", 0)],
        text,
    )
    .unwrap()
}

fn scalar_of(f: &DiffForm) -> ScalarExpr {
    f.body_rat().as_constant().expect("scalar form")
}

#[test]
fn laurent_simple_pole_window() {
    let f = one_var("dz[z] / (z - 1)");
    let ctx = Context::empty();
    let exp = f
        .laurent(&zv(), &LaurentPoint::finite_int(&ctx, 1), (-2, 0))
        .unwrap();
    assert!(exp.coeff(-2).unwrap().is_zero());
    assert!(scalar_of(exp.coeff(-1).unwrap()).is_one());
    assert!(exp.coeff(0).unwrap().is_zero());
}

#[test]
fn laurent_bergman_slice() {
    // dz1 dz2/(z1-z2)^2 expanded in z1 at 0: k-th coefficient (k+1) z2^-(k+2).
    let f = two_var("dz[z1] * dz[z2] / (z1 - z2)^2");
    let ctx = Context::empty();
    let exp = f
        .laurent(&Var::new("z1"), &LaurentPoint::finite_int(&ctx, 0), (0, 2))
        .unwrap();
    for k in 0..=2i64 {
        let expect = parse_form(
            &ctx,
            &[FormVariable::new("z2", 0)],
            &format!("{} * dz[z2] / z2^{}", k + 1, k + 2),
        )
        .unwrap();
        assert!(exp.coeff(k).unwrap().equal(&expect), "k={k}");
    }
}

#[test]
fn laurent_polar_window_at_zero() {
    let f = one_var("(1 + z) * dz[z] / z^2");
    let ctx = Context::empty();
    let exp = f
        .laurent(&zv(), &LaurentPoint::finite_int(&ctx, 0), (-2, -1))
        .unwrap();
    assert!(scalar_of(exp.coeff(-2).unwrap()).is_one());
    assert!(scalar_of(exp.coeff(-1).unwrap()).is_one());
}

#[test]
fn residue_examples() {
    let ctx = Context::empty();
    let at0 = LaurentPoint::finite_int(&ctx, 0);
    let at1 = LaurentPoint::finite_int(&ctx, 1);
    assert!(scalar_of(&one_var("dz[z] / z").residue(&zv(), &at0).unwrap()).is_one());
    assert!(one_var("dz[z] / (z - 1)^2")
        .residue(&zv(), &at1)
        .unwrap()
        .is_zero());
    assert!(scalar_of(
        &one_var("(1 + z) * dz[z] / z^2")
            .residue(&zv(), &at0)
            .unwrap()
    )
    .is_one());
}

#[test]
fn involute_examples() {
    let f = one_var("dz[z] / z");
    assert!(f.involute(&zv()).unwrap().equal(&one_var("-dz[z] / z")));

    let g = one_var("z * dz[z]");
    assert!(g.involute(&zv()).unwrap().equal(&one_var("-dz[z] / z^3")));

    let h = one_var("(1 + z^2) * dz[z] / (z^2 - 1)");
    let hh = h.involute(&zv()).unwrap().involute(&zv()).unwrap();
    assert!(hh.equal(&h));
}

#[test]
fn partial_fractions_two_simple_poles() {
    let f = one_var("dz[z] / ((z - 1) * (z + 1))");
    let pf = f.partial_fractions(&zv()).unwrap();
    assert!(pf.poly_part.is_zero());
    assert_eq!(pf.terms.len(), 2);
    let ctx = Context::empty();
    for t in &pf.terms {
        assert_eq!(t.order, 1);
        let c = t.coeff.body_rat().as_constant().unwrap();
        let at_one = t.pole.eq_rat(&RatExpr::one(&ctx));
        if at_one {
            assert_eq!(c, ScalarExpr::ratio(&ctx, 1, 2));
        } else {
            assert_eq!(c, ScalarExpr::ratio(&ctx, -1, 2));
        }
    }
    assert!(pf.reassemble().equal(&f));
}

#[test]
fn partial_fractions_double_pole_and_poly_part() {
    let f = one_var("dz[z] / (z - 1)^2");
    let pf = f.partial_fractions(&zv()).unwrap();
    assert_eq!(pf.terms.len(), 1);
    assert_eq!(pf.terms[0].order, 2);
    assert!(pf.reassemble().equal(&f));

    // z^3/(z^2 - 1): polynomial part z, simple poles +-1 with coefficient 1/2.
    let g = one_var("z^3 * dz[z] / (z^2 - 1)");
    let pf = g.partial_fractions(&zv()).unwrap();
    assert!(pf.poly_part.equal(&one_var("z * dz[z]")));
    assert_eq!(pf.terms.len(), 2);
    let ctx = Context::empty();
    for t in &pf.terms {
        assert_eq!(t.order, 1);
        assert_eq!(
            t.coeff.body_rat().as_constant().unwrap(),
            ScalarExpr::ratio(&ctx, 1, 2)
        );
    }
    assert!(pf.reassemble().equal(&g));
}

#[test]
fn partial_fractions_pole_away_from_marked_points() {
    let f = one_var("dz[z] / ((z - 3)^2 * (z + 5))");
    let pf = f.partial_fractions(&zv()).unwrap();
    assert!(pf.reassemble().equal(&f));
    assert_eq!(pf.terms.len(), 3); // orders 1,2 at 3 and order 1 at -5
}

#[test]
fn primitive_examples() {
    let ctx = Context::empty();
    // dz/z^2 from 1 -> 1 - 1/z
    let f = one_var("dz[z] / z^2");
    let p = f.primitive_from(&zv(), &RatExpr::one(&ctx)).unwrap();
    let expect = one_var("1 - 1/z");
    assert!(p.equal(&expect));

    // 2z dz from 0 -> z^2
    let g = one_var("2 * z * dz[z]");
    let p = g.primitive_from(&zv(), &RatExpr::zero(&ctx)).unwrap();
    assert!(p.equal(&one_var("z^2")));

    // dz/(z-3)^2 from 1: vanishes at 1 and differentiates back.
    let h = one_var("dz[z] / (z - 3)^2");
    let p = h.primitive_from(&zv(), &RatExpr::one(&ctx)).unwrap();
    let at1 = p.eval_var(&zv(), &RatExpr::one(&ctx)).unwrap();
    assert!(at1.is_zero());
    assert!(p.differentiate(&zv()).unwrap().equal(&h));

    // Simple pole refuses.
    let s = one_var("dz[z] / z");
    assert!(matches!(
        s.primitive_from(&zv(), &RatExpr::one(&ctx)),
        Err(FormError::SimplePole(_))
    ));
}

#[test]
fn symmetry_examples() {
    let swap: BTreeMap<Var, Var> = [
        (Var::new("z1"), Var::new("z2")),
        (Var::new("z2"), Var::new("z1")),
    ]
    .into_iter()
    .collect();
    let b = two_var("dz[z1] * dz[z2] / (z1 - z2)^2");
    assert!(b.is_symmetric(&swap).unwrap());
    let g = two_var("z1 * dz[z1] * dz[z2]");
    assert!(!g.is_symmetric(&swap).unwrap());
    let id: BTreeMap<Var, Var> = BTreeMap::new();
    assert!(g.is_symmetric(&id).unwrap());
}

#[test]
fn symmetry_rejects_color_violation() {
    let ctx = Context::empty();
    let f = parse_form(
        &ctx,
        &[FormVariable::new("z1", 1), FormVariable::new("z2", 2)],
        "dz[z1] * dz[z2] / (z1 - z2)^2",
    )
    .unwrap();
    let swap: BTreeMap<Var, Var> = [
        (Var::new("z1"), Var::new("z2")),
        (Var::new("z2"), Var::new("z1")),
    ]
    .into_iter()
    .collect();
    assert!(matches!(
        f.is_symmetric(&swap),
        Err(FormError::ColorMismatch)
    ));
}

#[test]
fn residue_at_infinity_matches_involuted_residue_at_zero() {
    let f = one_var("(z^2 + 3 * z + 1) * dz[z] / ((z - 2) * (z + 1)^2)");
    let ctx = Context::empty();
    let via_inf = f.residue(&zv(), &LaurentPoint::Infinity).unwrap();
    let via_inv = f
        .involute(&zv())
        .unwrap()
        .residue(&zv(), &LaurentPoint::finite_int(&ctx, 0))
        .unwrap();
    assert_eq!(scalar_of(&via_inf), scalar_of(&via_inv));
}

#[test]
fn pole_basis_roundtrip() {
    let cases = [
        "dz[z] / (z - 1)^2",
        "(3 + z) * dz[z] / (z^2 - 1)",
        "dz[z] / z^2 + 4 * dz[z] / (z + 1)^3",
        "z^2 * dz[z] + dz[z] / ((z - 1) * z)",
    ];
    for c in cases {
        let f = one_var(c);
        let vars: BTreeSet<Var> = [zv()].into_iter().collect();
        let p = rat_to_poles(&f.body_rat(), &vars).unwrap_or_else(|| panic!("convertible: {c}"));
        assert!(p.to_rat().eq_rat(&f.body_rat()), "case {c}");
    }
    // A pole away from the marked points is not convertible.
    let f = one_var("dz[z] / (z - 2)");
    let vars: BTreeSet<Var> = [zv()].into_iter().collect();
    assert!(rat_to_poles(&f.body_rat(), &vars).is_none());
}

#[test]
fn pole_basis_multivariate_roundtrip() {
    let f = two_var("dz[z1] * dz[z2] * (z1 + z2) / ((z1 - 1)^2 * (z2 + 1)^3)");
    let vars: BTreeSet<Var> = [Var::new("z1"), Var::new("z2")].into_iter().collect();
    let p = rat_to_poles(&f.body_rat(), &vars).unwrap();
    assert!(p.to_rat().eq_rat(&f.body_rat()));
}

#[test]
fn form_display_roundtrip() {
    let ctx = Context::empty();
    let decls = [FormVariable::new("z1", 0), FormVariable::new("z2", 0)];
    let cases = [
        "dz[z1] * dz[z2] / (z1 - z2)^2",
        "(z1^2 + 1) * dz[z1] * dz[z2] / ((z1 - 1) * (z2 + 1)^2)",
        "3 * dz[z1]^-1 * dz[z2] * z1",
    ];
    for c in cases {
        let f = parse_form(&ctx, &decls, c).unwrap();
        let printed = f.to_string();
        let back = parse_form(&ctx, &decls, &printed).unwrap();
        assert!(f.equal(&back), "case `{c}` printed `{printed}`");
    }
    // Pole-basis bodies print and parse back to the same value.
    let mut vars = BTreeSet::new();
    vars.insert(Var::new("z1"));
    let mut key = TermKey::new();
    key.insert(Var::new("z1"), PoleKey::Pole(PoleLoc::PlusOne, 2));
    let p = PoleForm::term(&ctx, vars, key, ScalarExpr::from_int(&ctx, 7));
    let colors = [(Var::new("z1"), 0usize)].into_iter().collect();
    let f = DiffForm::from_poles(p, &colors);
    let printed = f.to_string();
    let back = parse_form(&ctx, &decls[..1], &printed).unwrap();
    assert!(f.equal(&back), "poles printed `{printed}`");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Sum of residues over all finite poles plus infinity vanishes.
    #[test]
    fn residue_sum_is_zero(
        pole_sel in proptest::collection::btree_set(-3i64..=3, 1..=3),
        orders in proptest::collection::vec(1u32..=3, 3),
        num_coeffs in proptest::collection::vec(-5i64..=5, 1..=5),
    ) {
        let ctx = Context::empty();
        let z = zv();
        let mut den = Vec::new();
        for (i, p) in pole_sel.iter().enumerate() {
            let lin = VPoly::var(&ctx, &z).sub(&VPoly::constant(ScalarExpr::from_int(&ctx, *p)));
            den.push((lin, orders[i % orders.len()]));
        }
        let mut num = VPoly::zero(&ctx);
        for (e, c) in num_coeffs.iter().enumerate() {
            num = num.add(&VPoly::var(&ctx, &z).pow(e as u32).scale(&ScalarExpr::from_int(&ctx, *c)));
        }
        prop_assume!(!num.is_zero());
        let expr = RatExpr { num, den }.normalized();
        let decls = [FormVariable::new("z", 0)];
        let f = DiffForm::new_rat(&ctx, &[(decls[0].clone(), 1)], expr);
        let mut total = ScalarExpr::zero(&ctx);
        for p in &pole_sel {
            let r = f.residue(&z, &LaurentPoint::finite_int(&ctx, *p)).unwrap();
            total = total.add(&r.body_rat().as_constant().unwrap());
        }
        let at_inf = f.residue(&z, &LaurentPoint::Infinity).unwrap();
        total = total.add(&at_inf.body_rat().as_constant().unwrap());
        prop_assert!(total.is_zero(), "residue sum {total}");
    }

    /// Partial fractions reassemble to the input exactly.
    #[test]
    fn partial_fractions_reassembles(
        pole_sel in proptest::collection::btree_set(-2i64..=2, 1..=3),
        orders in proptest::collection::vec(1u32..=2, 3),
        num_coeffs in proptest::collection::vec(-4i64..=4, 1..=6),
    ) {
        let ctx = Context::empty();
        let z = zv();
        let mut den = Vec::new();
        for (i, p) in pole_sel.iter().enumerate() {
            let lin = VPoly::var(&ctx, &z).sub(&VPoly::constant(ScalarExpr::from_int(&ctx, *p)));
            den.push((lin, orders[i % orders.len()]));
        }
        let mut num = VPoly::zero(&ctx);
        for (e, c) in num_coeffs.iter().enumerate() {
            num = num.add(&VPoly::var(&ctx, &z).pow(e as u32).scale(&ScalarExpr::from_int(&ctx, *c)));
        }
        prop_assume!(!num.is_zero());
        let expr = RatExpr { num, den }.normalized();
        let decls = [FormVariable::new("z", 0)];
        let f = DiffForm::new_rat(&ctx, &[(decls[0].clone(), 1)], expr);
        let pf = f.partial_fractions(&z).unwrap();
        prop_assert!(pf.reassemble().equal(&f));
    }

    /// primitive_from differentiates back to the input.
    #[test]
    fn primitive_differentiates_back(
        pole in -2i64..=2,
        order in 2u32..=4,
        num_coeffs in proptest::collection::vec(-4i64..=4, 1..=3),
    ) {
        let ctx = Context::empty();
        let z = zv();
        let lin = VPoly::var(&ctx, &z).sub(&VPoly::constant(ScalarExpr::from_int(&ctx, pole)));
        let mut num = VPoly::zero(&ctx);
        for (e, c) in num_coeffs.iter().enumerate() {
            num = num.add(&VPoly::var(&ctx, &z).pow(e as u32).scale(&ScalarExpr::from_int(&ctx, *c)));
        }
        prop_assume!(!num.is_zero());
        // Keep the numerator degree below the pole order so no simple pole
        // appears after partial fractions... not guaranteed; skip if it does.
        let expr = RatExpr { num, den: vec![(lin, order)] }.normalized();
        let decls = [FormVariable::new("z", 0)];
        let f = DiffForm::new_rat(&ctx, &[(decls[0].clone(), 1)], expr);
        let base = RatExpr::constant(ScalarExpr::from_int(&ctx, if pole == 1 { 5 } else { 1 }));
        match f.primitive_from(&z, &base) {
            Ok(p) => {
                prop_assert!(p.differentiate(&z).unwrap().equal(&f));
                prop_assert!(p.eval_var(&z, &base).unwrap().is_zero());
            }
            Err(FormError::SimplePole(_)) => {} // legitimate rejection
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }
}
