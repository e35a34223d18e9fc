//! Sum-of-products pole-basis representation.
//!
//! A stable correlator on the unit-circle spectral curves only ever has poles
//! at `z = -1, 0, +1` in each variable, so it decomposes as a finite sum of
//! separable terms
//!
//! ```text
//!   c * prod_v basis_v(z_v),  basis in { (z-a)^-k : a in {-1,0,1} } u { z^m }
//! ```
//!
//! one differential factor `dz_v` per variable being implicit. Products over
//! disjoint variable sets, residues at the three marked points, the local
//! involution and permutation symmetry all act term by term, which keeps the
//! recursion cost proportional to the number of terms rather than the size of
//! an expanded numerator.

use std::collections::{BTreeMap, BTreeSet};

use crate::algebra::{Context, ScalarExpr};

use super::rat::RatExpr;
use super::vpoly::{VPoly, Var};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum PoleLoc {
    MinusOne,
    Zero,
    PlusOne,
}

impl PoleLoc {
    pub fn value(&self) -> i64 {
        match self {
            PoleLoc::MinusOne => -1,
            PoleLoc::Zero => 0,
            PoleLoc::PlusOne => 1,
        }
    }
    pub fn from_value(v: i64) -> Option<PoleLoc> {
        match v {
            -1 => Some(PoleLoc::MinusOne),
            0 => Some(PoleLoc::Zero),
            1 => Some(PoleLoc::PlusOne),
            _ => None,
        }
    }
    /// The two branch points.
    pub fn branch_points() -> [PoleLoc; 2] {
        [PoleLoc::PlusOne, PoleLoc::MinusOne]
    }
}

/// Per-variable basis element.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum PoleKey {
    /// `(z - loc)^-k`, `k >= 1`.
    Pole(PoleLoc, u32),
    /// `z^m`, `m >= 1` (`m = 0` is the absent entry).
    Pow(u32),
}

pub type TermKey = BTreeMap<Var, PoleKey>;

#[derive(Clone, Debug)]
pub struct PoleForm {
    pub ctx: Context,
    pub vars: BTreeSet<Var>,
    pub terms: BTreeMap<TermKey, ScalarExpr>,
}

impl PartialEq for PoleForm {
    fn eq(&self, other: &Self) -> bool {
        self.vars == other.vars && self.terms == other.terms
    }
}
impl Eq for PoleForm {}

impl PoleForm {
    pub fn zero(ctx: &Context, vars: BTreeSet<Var>) -> PoleForm {
        PoleForm {
            ctx: ctx.clone(),
            vars,
            terms: BTreeMap::new(),
        }
    }

    /// Scalar (no variables).
    pub fn scalar(c: ScalarExpr) -> PoleForm {
        let ctx = c.context().clone();
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(TermKey::new(), c);
        }
        PoleForm {
            ctx,
            vars: BTreeSet::new(),
            terms,
        }
    }

    /// Single term `c * prod basis`.
    pub fn term(ctx: &Context, vars: BTreeSet<Var>, key: TermKey, c: ScalarExpr) -> PoleForm {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            debug_assert!(key.keys().all(|v| vars.contains(v)));
            terms.insert(key, c);
        }
        PoleForm {
            ctx: ctx.clone(),
            vars,
            terms,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    fn insert_add(terms: &mut BTreeMap<TermKey, ScalarExpr>, k: TermKey, c: ScalarExpr) {
        if c.is_zero() {
            return;
        }
        match terms.entry(k) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get().add(&c);
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, o: &PoleForm) -> PoleForm {
        assert_eq!(self.vars, o.vars, "pole forms over different variable sets");
        let mut terms = self.terms.clone();
        for (k, c) in &o.terms {
            Self::insert_add(&mut terms, k.clone(), c.clone());
        }
        PoleForm {
            ctx: self.ctx.clone(),
            vars: self.vars.clone(),
            terms,
        }
    }

    pub fn neg(&self) -> PoleForm {
        PoleForm {
            ctx: self.ctx.clone(),
            vars: self.vars.clone(),
            terms: self.terms.iter().map(|(k, c)| (k.clone(), c.neg())).collect(),
        }
    }

    pub fn sub(&self, o: &PoleForm) -> PoleForm {
        self.add(&o.neg())
    }

    pub fn scale(&self, c: &ScalarExpr) -> PoleForm {
        if c.is_zero() {
            return PoleForm::zero(&self.ctx, self.vars.clone());
        }
        PoleForm {
            ctx: self.ctx.clone(),
            vars: self.vars.clone(),
            terms: self.terms.iter().map(|(k, x)| (k.clone(), x.mul(c))).collect(),
        }
    }

    /// Product over disjoint variable sets.
    pub fn tensor(&self, o: &PoleForm) -> PoleForm {
        assert!(
            self.vars.is_disjoint(&o.vars),
            "tensor product requires disjoint variables"
        );
        let mut vars = self.vars.clone();
        vars.extend(o.vars.iter().cloned());
        let mut terms = BTreeMap::new();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &o.terms {
                let mut k = ka.clone();
                k.extend(kb.iter().map(|(v, p)| (v.clone(), *p)));
                Self::insert_add(&mut terms, k, ca.mul(cb));
            }
        }
        PoleForm {
            ctx: self.ctx.clone(),
            vars,
            terms,
        }
    }

    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> PoleForm {
        let vars = self
            .vars
            .iter()
            .map(|v| map.get(v).cloned().unwrap_or_else(|| v.clone()))
            .collect();
        let mut terms = BTreeMap::new();
        for (k, c) in &self.terms {
            let k2: TermKey = k
                .iter()
                .map(|(v, p)| (map.get(v).cloned().unwrap_or_else(|| v.clone()), *p))
                .collect();
            Self::insert_add(&mut terms, k2, c.clone());
        }
        PoleForm {
            ctx: self.ctx.clone(),
            vars,
            terms,
        }
    }

    /// Largest pole order at `loc` in variable `v` (0 when regular there).
    pub fn pole_order(&self, v: &Var, loc: PoleLoc) -> u32 {
        self.terms
            .keys()
            .filter_map(|k| match k.get(v) {
                Some(PoleKey::Pole(l, ord)) if *l == loc => Some(*ord),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// All pole locations present in variable `v`.
    pub fn pole_locs(&self, v: &Var) -> BTreeSet<PoleLoc> {
        self.terms
            .keys()
            .filter_map(|k| match k.get(v) {
                Some(PoleKey::Pole(l, _)) => Some(*l),
                _ => None,
            })
            .collect()
    }

    /// Residue at `v = loc`: picks the simple-pole coefficients; drops `v`.
    pub fn residue(&self, v: &Var, loc: PoleLoc) -> PoleForm {
        assert!(self.vars.contains(v));
        let mut vars = self.vars.clone();
        vars.remove(v);
        let mut terms = BTreeMap::new();
        for (k, c) in &self.terms {
            if let Some(PoleKey::Pole(l, 1)) = k.get(v) {
                if *l == loc {
                    let mut k2 = k.clone();
                    k2.remove(v);
                    Self::insert_add(&mut terms, k2, c.clone());
                }
            }
        }
        PoleForm {
            ctx: self.ctx.clone(),
            vars,
            terms,
        }
    }

    /// Pullback under `v -> 1/v` of the `dz_v` slot, including the Jacobian of
    /// the differential: `dz -> -dz / v^2`.
    pub fn involute(&self, v: &Var) -> PoleForm {
        assert!(self.vars.contains(v), "involute: unknown variable");
        let mut out = PoleForm::zero(&self.ctx, self.vars.clone());
        for (k, c) in &self.terms {
            let rest: TermKey = k
                .iter()
                .filter(|(kv, _)| *kv != v)
                .map(|(kv, p)| (kv.clone(), *p))
                .collect();
            let pieces = involute_basis(&self.ctx, k.get(v).copied(), v);
            for (vkey, coeff) in pieces {
                let mut k2 = rest.clone();
                if let Some(p) = vkey {
                    k2.insert(v.clone(), p);
                }
                Self::insert_add(&mut out.terms, k2, c.mul(&coeff));
            }
        }
        out
    }

    /// Linear loop-equation operator in one variable: `f + involute_v(f)`.
    pub fn s_op(&self, v: &Var) -> PoleForm {
        self.add(&self.involute(v))
    }

    /// Keep only the terms whose `v`-dependence is polar at the branch points.
    pub fn branch_polar_part(&self, v: &Var) -> PoleForm {
        let mut terms = BTreeMap::new();
        for (k, c) in &self.terms {
            match k.get(v) {
                Some(PoleKey::Pole(l, _)) if *l != PoleLoc::Zero => {
                    Self::insert_add(&mut terms, k.clone(), c.clone());
                }
                _ => {}
            }
        }
        PoleForm {
            ctx: self.ctx.clone(),
            vars: self.vars.clone(),
            terms,
        }
    }

    /// Expand to a single rational expression (coefficient of `prod dz_v`).
    pub fn to_rat(&self) -> RatExpr {
        let mut acc = RatExpr::zero(&self.ctx);
        for (k, c) in &self.terms {
            let mut term = RatExpr::constant(c.clone());
            for (v, p) in k {
                match p {
                    PoleKey::Pow(m) => {
                        term = term.mul(&RatExpr::from_poly(VPoly::var(&self.ctx, v).pow(*m)));
                    }
                    PoleKey::Pole(loc, ord) => {
                        let lin = VPoly::var(&self.ctx, v).sub(&VPoly::constant(
                            ScalarExpr::from_int(&self.ctx, loc.value()),
                        ));
                        term = term.mul(&RatExpr {
                            num: VPoly::one(&self.ctx),
                            den: vec![(lin, *ord)],
                        });
                    }
                }
            }
            acc = acc.add(&term);
        }
        acc
    }
}

/// `basis(1/v) * (-1/v^2)` re-expanded in the pole basis of `v`.
/// Returns (new key or None for constant, scalar coefficient) pairs.
fn involute_basis(
    ctx: &Context,
    key: Option<PoleKey>,
    _v: &Var,
) -> Vec<(Option<PoleKey>, ScalarExpr)> {
    let minus_one = ScalarExpr::from_int(ctx, -1);
    match key {
        // Constant in v: dz -> -dz/v^2.
        None => vec![(Some(PoleKey::Pole(PoleLoc::Zero, 2)), minus_one)],
        Some(PoleKey::Pow(m)) => vec![(Some(PoleKey::Pole(PoleLoc::Zero, m + 2)), minus_one)],
        Some(PoleKey::Pole(PoleLoc::Zero, k)) => {
            // v^k * (-1/v^2)
            match k {
                1 => vec![(Some(PoleKey::Pole(PoleLoc::Zero, 1)), minus_one)],
                2 => vec![(None, minus_one)],
                _ => vec![(Some(PoleKey::Pow(k - 2)), minus_one)],
            }
        }
        Some(PoleKey::Pole(loc, k)) => {
            // With s = +-1: (1/v - s) = -s(v - s)/v, so
            //   (1/v - s)^-k * (-1/v^2) = -(-1)^k s^k v^(k-2) (v-s)^-k.
            let s = loc.value();
            let m1k: i64 = if k % 2 == 0 { 1 } else { -1 };
            let sk: i64 = if s == 1 || k % 2 == 0 { 1 } else { -1 };
            let sign_coeff = -m1k * sk;
            if k >= 2 {
                // v^(k-2) = ((v-s)+s)^(k-2), binomial expansion.
                let mut out = Vec::new();
                let n = k - 2;
                for j in 0..=n {
                    let spow: i64 = if s == 1 || (n - j) % 2 == 0 { 1 } else { -1 };
                    let coeff = ScalarExpr::from_int(ctx, sign_coeff * binomial(n, j) * spow);
                    out.push((Some(PoleKey::Pole(loc, k - j)), coeff));
                }
                out
            } else {
                // k = 1: sign_coeff = s and v^-1 (v-s)^-1 = s[(v-s)^-1 - v^-1],
                // so the images carry coefficients +1 and -1 exactly.
                vec![
                    (Some(PoleKey::Pole(loc, 1)), ScalarExpr::one(ctx)),
                    (
                        Some(PoleKey::Pole(PoleLoc::Zero, 1)),
                        ScalarExpr::from_int(ctx, -1),
                    ),
                ]
            }
        }
    }
}

fn binomial(n: u32, k: u32) -> i64 {
    let mut r: i64 = 1;
    for i in 0..k.min(n - k) {
        r = r * (n - i) as i64 / (i + 1) as i64;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> Context {
        Context::empty()
    }

    fn z() -> Var {
        Var::new("z")
    }

    fn single(key: Option<PoleKey>, c: i64) -> PoleForm {
        let ctx = ctx();
        let mut vars = BTreeSet::new();
        vars.insert(z());
        let mut k = TermKey::new();
        if let Some(p) = key {
            k.insert(z(), p);
        }
        PoleForm::term(&ctx, vars, k, ScalarExpr::from_int(&ctx, c))
    }

    #[test]
    fn involute_is_involutive() {
        // Check on a mixed form: 3/(z-1)^2 + 5/z - 7 z^3 + 2/(z+1)^3
        let f = single(Some(PoleKey::Pole(PoleLoc::PlusOne, 2)), 3)
            .add(&single(Some(PoleKey::Pole(PoleLoc::Zero, 1)), 5))
            .add(&single(Some(PoleKey::Pow(3)), -7))
            .add(&single(Some(PoleKey::Pole(PoleLoc::MinusOne, 3)), 2));
        let ff = f.involute(&z()).involute(&z());
        assert_eq!(f, ff);
    }

    #[test]
    fn involute_matches_rational_computation() {
        // iota*( dz/(z-1)^2 ) computed via the rational layer.
        let f = single(Some(PoleKey::Pole(PoleLoc::PlusOne, 2)), 1);
        let g = f.involute(&z());
        let ctx = ctx();
        // Direct: (1/z - 1)^-2 * (-1/z^2) = -z^2/(z-1)^2 * 1/z^2... = -1/(1-z)^2 * ...
        let rat = f.to_rat().sub_recip(&z());
        let jac = RatExpr {
            num: VPoly::one(&ctx).neg(),
            den: vec![(VPoly::var(&ctx, &z()), 2)],
        };
        let expect = rat.mul(&jac);
        assert!(g.to_rat().eq_rat(&expect));
    }

    #[test]
    fn s_op_kills_even_double_poles() {
        // S[ dz/(z-1)^2 ] = 0 and S[ dz/(z+1)^2 ] = 0.
        for loc in [PoleLoc::PlusOne, PoleLoc::MinusOne] {
            let f = single(Some(PoleKey::Pole(loc, 2)), 1);
            assert!(f.s_op(&z()).is_zero(), "loc {loc:?}");
        }
        // S[ dz/z ] = dz/z - dz/z = ... iota*(dz/z) = -dz/z, so S = 0 as well.
        let f = single(Some(PoleKey::Pole(PoleLoc::Zero, 1)), 1);
        assert!(f.s_op(&z()).is_zero());
        // S[ dz/z^2 ] = dz/z^2 - dz != 0.
        let f = single(Some(PoleKey::Pole(PoleLoc::Zero, 2)), 1);
        assert!(!f.s_op(&z()).is_zero());
    }

    #[test]
    fn residue_extracts_simple_poles() {
        let f = single(Some(PoleKey::Pole(PoleLoc::PlusOne, 1)), 4)
            .add(&single(Some(PoleKey::Pole(PoleLoc::PlusOne, 2)), 9));
        let r = f.residue(&z(), PoleLoc::PlusOne);
        assert_eq!(
            r.terms.get(&TermKey::new()),
            Some(&ScalarExpr::from_int(&ctx(), 4))
        );
        assert!(f.residue(&z(), PoleLoc::MinusOne).is_zero());
    }
}
