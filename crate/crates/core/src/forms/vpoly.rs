//! Polynomials in named form variables with `ScalarExpr` coefficients.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::algebra::{Context, ScalarExpr};

/// Interned variable name. Ordered by name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: &str) -> Var {
        Var(Arc::from(name))
    }
    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Monomial in form variables; zero exponents are never stored.
#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub struct VMono(pub BTreeMap<Var, u32>);

impl VMono {
    pub fn one() -> VMono {
        VMono(BTreeMap::new())
    }
    pub fn var(v: &Var) -> VMono {
        let mut m = BTreeMap::new();
        m.insert(v.clone(), 1);
        VMono(m)
    }
    pub fn degree(&self) -> u32 {
        self.0.values().sum()
    }
    pub fn exp(&self, v: &Var) -> u32 {
        self.0.get(v).copied().unwrap_or(0)
    }
    pub fn mul(&self, o: &VMono) -> VMono {
        let mut m = self.0.clone();
        for (v, e) in &o.0 {
            *m.entry(v.clone()).or_insert(0) += e;
        }
        VMono(m)
    }
    pub fn div(&self, o: &VMono) -> Option<VMono> {
        let mut m = self.0.clone();
        for (v, e) in &o.0 {
            let cur = m.get_mut(v)?;
            if *cur < *e {
                return None;
            }
            *cur -= *e;
            if *cur == 0 {
                m.remove(v);
            }
        }
        Some(VMono(m))
    }
    fn with_exp(&self, v: &Var, e: u32) -> VMono {
        let mut m = self.0.clone();
        if e == 0 {
            m.remove(v);
        } else {
            m.insert(v.clone(), e);
        }
        VMono(m)
    }
}

// Graded lexicographic monomial order.
impl Ord for VMono {
    fn cmp(&self, other: &Self) -> Ordering {
        let d = self.degree().cmp(&other.degree());
        if d != Ordering::Equal {
            return d;
        }
        let vars: BTreeSet<&Var> = self.0.keys().chain(other.0.keys()).collect();
        for v in vars {
            let c = self.exp(v).cmp(&other.exp(v));
            if c != Ordering::Equal {
                return c;
            }
        }
        Ordering::Equal
    }
}
impl PartialOrd for VMono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multivariate polynomial in form variables over exact scalars.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VPoly {
    pub ctx: Context,
    pub terms: BTreeMap<VMono, ScalarExpr>,
}

impl VPoly {
    pub fn zero(ctx: &Context) -> VPoly {
        VPoly {
            ctx: ctx.clone(),
            terms: BTreeMap::new(),
        }
    }
    pub fn constant(c: ScalarExpr) -> VPoly {
        let ctx = c.context().clone();
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(VMono::one(), c);
        }
        VPoly { ctx, terms }
    }
    pub fn one(ctx: &Context) -> VPoly {
        Self::constant(ScalarExpr::one(ctx))
    }
    pub fn var(ctx: &Context, v: &Var) -> VPoly {
        let mut terms = BTreeMap::new();
        terms.insert(VMono::var(v), ScalarExpr::one(ctx));
        VPoly {
            ctx: ctx.clone(),
            terms,
        }
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms.keys().next().unwrap().0.is_empty())
    }
    pub fn as_constant(&self) -> Option<ScalarExpr> {
        if self.terms.is_empty() {
            return Some(ScalarExpr::zero(&self.ctx));
        }
        if self.is_constant() {
            return Some(self.terms.values().next().unwrap().clone());
        }
        None
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut s = BTreeSet::new();
        for m in self.terms.keys() {
            for v in m.0.keys() {
                s.insert(v.clone());
            }
        }
        s
    }

    pub fn degree_in(&self, v: &Var) -> u32 {
        self.terms.keys().map(|m| m.exp(v)).max().unwrap_or(0)
    }
    pub fn depends_on(&self, v: &Var) -> bool {
        self.terms.keys().any(|m| m.exp(v) > 0)
    }

    fn insert_add(terms: &mut BTreeMap<VMono, ScalarExpr>, m: VMono, c: ScalarExpr) {
        if c.is_zero() {
            return;
        }
        match terms.entry(m) {
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

    pub fn add(&self, o: &VPoly) -> VPoly {
        assert!(self.ctx == o.ctx);
        let mut terms = self.terms.clone();
        for (m, c) in &o.terms {
            Self::insert_add(&mut terms, m.clone(), c.clone());
        }
        VPoly {
            ctx: self.ctx.clone(),
            terms,
        }
    }
    pub fn neg(&self) -> VPoly {
        VPoly {
            ctx: self.ctx.clone(),
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c.neg())).collect(),
        }
    }
    pub fn sub(&self, o: &VPoly) -> VPoly {
        self.add(&o.neg())
    }
    pub fn mul(&self, o: &VPoly) -> VPoly {
        assert!(self.ctx == o.ctx);
        let mut terms = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                Self::insert_add(&mut terms, ma.mul(mb), ca.mul(cb));
            }
        }
        VPoly {
            ctx: self.ctx.clone(),
            terms,
        }
    }
    pub fn scale(&self, c: &ScalarExpr) -> VPoly {
        if c.is_zero() {
            return VPoly::zero(&self.ctx);
        }
        VPoly {
            ctx: self.ctx.clone(),
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k.mul(c))).collect(),
        }
    }
    pub fn pow(&self, mut n: u32) -> VPoly {
        let mut acc = VPoly::one(&self.ctx);
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Leading (monomial, coefficient) under the graded-lex order.
    pub fn leading(&self) -> Option<(&VMono, &ScalarExpr)> {
        self.terms.iter().next_back()
    }

    /// Exact division; None when not divisible.
    pub fn div_exact(&self, o: &VPoly) -> Option<VPoly> {
        assert!(!o.is_zero(), "division by zero polynomial");
        let mut rem = self.clone();
        let mut quot = BTreeMap::new();
        let (lm, lc) = {
            let (m, c) = o.leading().unwrap();
            (m.clone(), c.clone())
        };
        let lc_inv = lc.inv().expect("leading coefficient invertible");
        while !rem.is_zero() {
            let (rm, rc) = {
                let (m, c) = rem.leading().unwrap();
                (m.clone(), c.clone())
            };
            let qm = rm.div(&lm)?;
            let qc = rc.mul(&lc_inv);
            let mut part_terms = BTreeMap::new();
            part_terms.insert(qm.clone(), qc.clone());
            let part = VPoly {
                ctx: self.ctx.clone(),
                terms: part_terms,
            };
            rem = rem.sub(&part.mul(o));
            Self::insert_add(&mut quot, qm, qc);
        }
        Some(VPoly {
            ctx: self.ctx.clone(),
            terms: quot,
        })
    }

    /// View as univariate in `v`: coefficient of v^k at index k.
    pub fn coeffs_in(&self, v: &Var) -> Vec<VPoly> {
        let deg = self.degree_in(v) as usize;
        let mut out = vec![VPoly::zero(&self.ctx); deg + 1];
        for (m, c) in &self.terms {
            let e = m.exp(v) as usize;
            let m2 = m.with_exp(v, 0);
            Self::insert_add(&mut out[e].terms, m2, c.clone());
        }
        out
    }

    pub fn from_coeffs_in(ctx: &Context, v: &Var, coeffs: &[VPoly]) -> VPoly {
        let mut out = VPoly::zero(ctx);
        for (e, c) in coeffs.iter().enumerate() {
            for (m, k) in &c.terms {
                let mut mm = m.0.clone();
                if e > 0 {
                    *mm.entry(v.clone()).or_insert(0) += e as u32;
                }
                Self::insert_add(&mut out.terms, VMono(mm), k.clone());
            }
        }
        out
    }

    /// Derivative with respect to a form variable.
    pub fn derivative(&self, v: &Var) -> VPoly {
        let mut terms = BTreeMap::new();
        for (m, c) in &self.terms {
            let e = m.exp(v);
            if e == 0 {
                continue;
            }
            let m2 = m.with_exp(v, e - 1);
            Self::insert_add(
                &mut terms,
                m2,
                c.mul(&ScalarExpr::from_int(&self.ctx, e as i64)),
            );
        }
        VPoly {
            ctx: self.ctx.clone(),
            terms,
        }
    }

    /// Rename variables according to the map (missing names are kept).
    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> VPoly {
        let mut terms = BTreeMap::new();
        for (m, c) in &self.terms {
            let mut m2 = BTreeMap::new();
            for (v, e) in &m.0 {
                let nv = map.get(v).cloned().unwrap_or_else(|| v.clone());
                *m2.entry(nv).or_insert(0) += e;
            }
            Self::insert_add(&mut terms, VMono(m2), c.clone());
        }
        VPoly {
            ctx: self.ctx.clone(),
            terms,
        }
    }

    /// Map every coefficient through `f` (used for parameter substitution).
    pub fn map_coeffs(&self, f: &mut dyn FnMut(&ScalarExpr) -> ScalarExpr) -> VPoly {
        let mut terms = BTreeMap::new();
        for (m, c) in &self.terms {
            Self::insert_add(&mut terms, m.clone(), f(c));
        }
        VPoly {
            ctx: self.ctx.clone(),
            terms,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Context;

    #[test]
    fn division_roundtrip() {
        let ctx = Context::empty();
        let z = Var::new("z");
        let w = Var::new("w");
        let zp = VPoly::var(&ctx, &z);
        let wp = VPoly::var(&ctx, &w);
        let one = VPoly::one(&ctx);
        let a = zp.add(&wp).mul(&zp.sub(&one));
        assert_eq!(a.div_exact(&zp.add(&wp)).unwrap(), zp.sub(&one));
        assert!(a.div_exact(&zp.add(&one)).is_none());
    }

    #[test]
    fn coeffs_in_roundtrip() {
        let ctx = Context::empty();
        let z = Var::new("z");
        let w = Var::new("w");
        let p = VPoly::var(&ctx, &z)
            .pow(2)
            .mul(&VPoly::var(&ctx, &w))
            .add(&VPoly::one(&ctx));
        let cs = p.coeffs_in(&z);
        assert_eq!(cs.len(), 3);
        assert_eq!(VPoly::from_coeffs_in(&ctx, &z, &cs), p);
    }
}

impl Ord for VPoly {
    fn cmp(&self, other: &Self) -> Ordering {
        let mut a = self.terms.iter().rev();
        let mut b = other.terms.iter().rev();
        loop {
            match (a.next(), b.next()) {
                (None, None) => return Ordering::Equal,
                (None, Some(_)) => return Ordering::Less,
                (Some(_), None) => return Ordering::Greater,
                (Some((ma, ca)), Some((mb, cb))) => {
                    let c = ma.cmp(mb).then_with(|| ca.cmp(cb));
                    if c != Ordering::Equal {
                        return c;
                    }
                }
            }
        }
    }
}
impl PartialOrd for VPoly {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
