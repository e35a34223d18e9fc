//! Rational expressions in form variables with factored denominators.
//!
//! Denominators are kept as an explicit multiset of polynomial factors. All
//! pole structure the engine ever creates is a product of such factors, so no
//! multivariate factorization is needed: cancellation is repeated exact
//! division, and pole orders fall out of the factor list.

use std::collections::{BTreeMap, BTreeSet};

use crate::algebra::{Context, ScalarExpr};

use super::vpoly::{VPoly, Var};
use super::FormError;

/// `num / prod_i factor_i^mult_i`, with each factor monic under the graded-lex
/// leading term and the list sorted and deduplicated.
#[derive(Clone, Debug)]
pub struct RatExpr {
    pub num: VPoly,
    pub den: Vec<(VPoly, u32)>,
}

impl RatExpr {
    pub fn ctx(&self) -> &Context {
        &self.num.ctx
    }

    pub fn zero(ctx: &Context) -> RatExpr {
        RatExpr {
            num: VPoly::zero(ctx),
            den: Vec::new(),
        }
    }
    pub fn one(ctx: &Context) -> RatExpr {
        RatExpr {
            num: VPoly::one(ctx),
            den: Vec::new(),
        }
    }
    pub fn constant(c: ScalarExpr) -> RatExpr {
        RatExpr {
            num: VPoly::constant(c),
            den: Vec::new(),
        }
    }
    pub fn var(ctx: &Context, v: &Var) -> RatExpr {
        RatExpr {
            num: VPoly::var(ctx, v),
            den: Vec::new(),
        }
    }
    pub fn from_poly(p: VPoly) -> RatExpr {
        RatExpr {
            num: p,
            den: Vec::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut s = self.num.vars();
        for (f, _) in &self.den {
            s.extend(f.vars());
        }
        s
    }

    pub fn den_poly(&self) -> VPoly {
        let mut d = VPoly::one(self.ctx());
        for (f, m) in &self.den {
            d = d.mul(&f.pow(*m));
        }
        d
    }

    pub fn as_constant(&self) -> Option<ScalarExpr> {
        if self.den.is_empty() {
            self.num.as_constant()
        } else {
            let d = self.den_poly().as_constant()?;
            let n = self.num.as_constant()?;
            n.div(&d).ok()
        }
    }

    /// Canonical cleanup: monic factors, cancellation, merged duplicates.
    pub fn normalized(mut self) -> RatExpr {
        if self.num.is_zero() {
            return RatExpr::zero(self.ctx());
        }
        let ctx = self.ctx().clone();
        let mut scale = ScalarExpr::one(&ctx);
        let mut factors: BTreeMap<VPoly, u32> = BTreeMap::new();
        for (f, m) in std::mem::take(&mut self.den) {
            if m == 0 {
                continue;
            }
            assert!(!f.is_zero(), "zero factor in denominator");
            if let Some(c) = f.as_constant() {
                scale = scale.mul(&c.pow(m as i64).expect("constant factor invertible"));
                continue;
            }
            let lc = f.leading().unwrap().1.clone();
            let monic = if lc.is_one() {
                f
            } else {
                f.scale(&lc.inv().expect("leading coefficient invertible"))
            };
            if !lc.is_one() {
                scale = scale.mul(&lc.pow(m as i64).expect("unit"));
            }
            *factors.entry(monic).or_insert(0) += m;
        }
        let mut num = self.num.scale(&scale.inv().expect("unit scale"));
        // Cancel factors dividing the numerator.
        let mut out: Vec<(VPoly, u32)> = Vec::new();
        for (f, mut m) in factors {
            while m > 0 {
                match num.div_exact(&f) {
                    Some(q) => {
                        num = q;
                        m -= 1;
                    }
                    None => break,
                }
            }
            if m > 0 {
                out.push((f, m));
            }
        }
        RatExpr { num, den: out }
    }

    pub fn add(&self, o: &RatExpr) -> RatExpr {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        // Common denominator via factor-wise max multiplicity.
        let mut all: BTreeMap<VPoly, (u32, u32)> = BTreeMap::new();
        for (f, m) in &self.den {
            all.entry(f.clone()).or_insert((0, 0)).0 = *m;
        }
        for (f, m) in &o.den {
            all.entry(f.clone()).or_insert((0, 0)).1 = *m;
        }
        let mut num_a = self.num.clone();
        let mut num_b = o.num.clone();
        let mut den = Vec::new();
        for (f, (ma, mb)) in all {
            let m = ma.max(mb);
            if m > ma {
                num_a = num_a.mul(&f.pow(m - ma));
            }
            if m > mb {
                num_b = num_b.mul(&f.pow(m - mb));
            }
            den.push((f, m));
        }
        RatExpr {
            num: num_a.add(&num_b),
            den,
        }
        .normalized()
    }

    pub fn neg(&self) -> RatExpr {
        RatExpr {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }
    pub fn sub(&self, o: &RatExpr) -> RatExpr {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &RatExpr) -> RatExpr {
        let mut den = self.den.clone();
        den.extend(o.den.iter().cloned());
        RatExpr {
            num: self.num.mul(&o.num),
            den,
        }
        .normalized()
    }

    pub fn scale(&self, c: &ScalarExpr) -> RatExpr {
        RatExpr {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    /// Reciprocal; the numerator becomes a single opaque denominator factor.
    pub fn recip(&self) -> Result<RatExpr, FormError> {
        if self.is_zero() {
            return Err(FormError::DivisionByZero);
        }
        Ok(RatExpr {
            num: self.den_poly(),
            den: vec![(self.num.clone(), 1)],
        }
        .normalized())
    }

    pub fn div(&self, o: &RatExpr) -> Result<RatExpr, FormError> {
        Ok(self.mul(&o.recip()?))
    }

    pub fn pow(&self, n: i64) -> Result<RatExpr, FormError> {
        if n < 0 {
            return self.recip()?.pow(-n);
        }
        let mut acc = RatExpr::one(self.ctx());
        for _ in 0..n {
            acc = acc.mul(self);
        }
        Ok(acc)
    }

    /// Substitute `v -> 1/v`, multiplying through by the right power of `v`.
    pub fn sub_recip(&self, v: &Var) -> RatExpr {
        let ctx = self.ctx().clone();
        let reverse = |p: &VPoly| -> (VPoly, u32) {
            // p(1/v) = v^-d * rev(p) with d = deg_v(p)
            let d = p.degree_in(v);
            let coeffs = p.coeffs_in(v);
            let mut rev = Vec::with_capacity(coeffs.len());
            for i in (0..coeffs.len()).rev() {
                rev.push(coeffs[i].clone());
            }
            (VPoly::from_coeffs_in(&ctx, v, &rev), d)
        };
        let (num_rev, dn) = reverse(&self.num);
        let mut den = Vec::new();
        let mut vpow: i64 = -(dn as i64);
        for (f, m) in &self.den {
            let (f_rev, df) = reverse(f);
            vpow += (df as i64) * (*m as i64);
            den.push((f_rev, *m));
        }
        let mut num = num_rev;
        if vpow > 0 {
            num = num.mul(&VPoly::var(&ctx, v).pow(vpow as u32));
        } else if vpow < 0 {
            den.push((VPoly::var(&ctx, v), (-vpow) as u32));
        }
        RatExpr { num, den }.normalized()
    }

    /// Substitute a variable by a rational value. Errors when the value hits a
    /// pole of the expression.
    pub fn eval_at(&self, v: &Var, value: &RatExpr) -> Result<RatExpr, FormError> {
        let subst_poly = |p: &VPoly| -> RatExpr {
            let coeffs = p.coeffs_in(v);
            let mut acc = RatExpr::zero(self.ctx());
            for c in coeffs.iter().rev() {
                acc = acc.mul(value).add(&RatExpr::from_poly(c.clone()));
            }
            acc
        };
        let mut acc = subst_poly(&self.num);
        for (f, m) in &self.den {
            let fv = subst_poly(f);
            if fv.is_zero() {
                return Err(FormError::EvaluationAtPole);
            }
            acc = acc.mul(&fv.recip()?.pow(*m as i64)?);
        }
        Ok(acc)
    }

    /// Derivative with respect to a form variable.
    pub fn derivative(&self, v: &Var) -> RatExpr {
        // (num / prod f_i^m_i)' =
        //   [num' prod f_i - num sum_i m_i f_i' prod_{j != i} f_j] / prod f_i^{m_i+1}
        let ctx = self.ctx().clone();
        let mut lead = self.num.derivative(v);
        for (f, _) in &self.den {
            lead = lead.mul(f);
        }
        let mut correction = VPoly::zero(&ctx);
        for (i, (f, m)) in self.den.iter().enumerate() {
            let mut t = self
                .num
                .mul(&f.derivative(v))
                .scale(&ScalarExpr::from_int(&ctx, *m as i64));
            for (j, (g, _)) in self.den.iter().enumerate() {
                if i != j {
                    t = t.mul(g);
                }
            }
            correction = correction.add(&t);
        }
        RatExpr {
            num: lead.sub(&correction),
            den: self.den.iter().map(|(f, m)| (f.clone(), m + 1)).collect(),
        }
        .normalized()
    }

    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> RatExpr {
        RatExpr {
            num: self.num.rename(map),
            den: self.den.iter().map(|(f, m)| (f.rename(map), *m)).collect(),
        }
        .normalized()
    }

    /// Order of vanishing of the denominator at `v = point` minus that of the
    /// numerator is the pole order; this returns the denominator part only.
    pub fn den_vanishing_order(&self, v: &Var, point: &RatExpr) -> u32 {
        let mut total = 0u32;
        for (f, m) in &self.den {
            total += vanishing_order(f, v, point) * m;
        }
        total
    }

    /// Structural equality via cross-multiplication.
    pub fn eq_rat(&self, o: &RatExpr) -> bool {
        if self.is_zero() {
            return o.is_zero();
        }
        if o.is_zero() {
            return false;
        }
        self.num.mul(&o.den_poly()) == o.num.mul(&self.den_poly())
    }
}

/// Order of vanishing of polynomial `f` at `v = point` (point free of `v`).
///
/// Extra v-free factors picked up while clearing the point's denominator do
/// not vanish at the point, so the order is unaffected by them.
pub fn vanishing_order(f: &VPoly, v: &Var, point: &RatExpr) -> u32 {
    let pd = point.den_poly();
    let pn = point.num.clone();
    let lin = VPoly::var(&f.ctx, v).mul(&pd).sub(&pn);
    let mut ord = 0;
    let mut cur = f.clone();
    loop {
        if cur.is_zero() || !cur.depends_on(v) {
            // A v-free nonzero polynomial cannot vanish identically at v=point.
            return ord;
        }
        let val = cur
            .coeffs_in(v)
            .iter()
            .rev()
            .fold(RatExpr::zero(&f.ctx), |acc, c| {
                acc.mul(point).add(&RatExpr::from_poly(c.clone()))
            });
        if !val.is_zero() {
            return ord;
        }
        let deg = cur.degree_in(v);
        let mut scaled = cur.clone();
        for _ in 0..deg {
            scaled = scaled.mul(&pd);
        }
        match scaled.div_exact(&lin) {
            Some(q) => {
                cur = q;
                ord += 1;
            }
            None => return ord,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Context;

    fn z() -> Var {
        Var::new("z")
    }

    fn zp(ctx: &Context) -> VPoly {
        VPoly::var(ctx, &z())
    }

    #[test]
    fn cancellation() {
        let ctx = Context::empty();
        let one = VPoly::one(&ctx);
        // (z^2 - 1) / (z - 1) = z + 1
        let num = zp(&ctx).pow(2).sub(&one);
        let e = RatExpr {
            num,
            den: vec![(zp(&ctx).sub(&one), 1)],
        }
        .normalized();
        assert!(e.den.is_empty());
        assert_eq!(e.num, zp(&ctx).add(&one));
    }

    #[test]
    fn add_with_common_denominator() {
        let ctx = Context::empty();
        let one = VPoly::one(&ctx);
        let a = RatExpr {
            num: one.clone(),
            den: vec![(zp(&ctx).sub(&one), 1)],
        };
        let b = RatExpr {
            num: one.clone(),
            den: vec![(zp(&ctx).add(&one), 1)],
        };
        let s = a.add(&b);
        // 1/(z-1) + 1/(z+1) = 2z/(z^2-1)
        let expect = RatExpr {
            num: zp(&ctx).scale(&ScalarExpr::from_int(&ctx, 2)),
            den: vec![(zp(&ctx).sub(&one), 1), (zp(&ctx).add(&one), 1)],
        };
        assert!(s.eq_rat(&expect));
    }

    #[test]
    fn sub_recip_of_simple_pole() {
        let ctx = Context::empty();
        let one = VPoly::one(&ctx);
        // f = 1/(z-1); f(1/z) = z/(1-z)
        let f = RatExpr {
            num: one.clone(),
            den: vec![(zp(&ctx).sub(&one), 1)],
        };
        let g = f.sub_recip(&z());
        let expect = RatExpr {
            num: zp(&ctx).neg(),
            den: vec![(zp(&ctx).sub(&one), 1)],
        };
        assert!(g.eq_rat(&expect));
    }

    #[test]
    fn vanishing_order_detects_multiplicity() {
        let ctx = Context::empty();
        let one = VPoly::one(&ctx);
        let f = zp(&ctx).sub(&one).pow(3).mul(&zp(&ctx).add(&one));
        let at_one = RatExpr::one(&ctx);
        assert_eq!(vanishing_order(&f, &z(), &at_one), 3);
        let at_minus = RatExpr::constant(ScalarExpr::from_int(&ctx, -1));
        assert_eq!(vanishing_order(&f, &z(), &at_minus), 1);
        let at_two = RatExpr::constant(ScalarExpr::from_int(&ctx, 2));
        assert_eq!(vanishing_order(&f, &z(), &at_two), 0);
    }

    #[test]
    fn eval_at_value_and_pole() {
        let ctx = Context::empty();
        let one = VPoly::one(&ctx);
        let f = RatExpr {
            num: zp(&ctx).clone(),
            den: vec![(zp(&ctx).sub(&one), 1)],
        };
        let v = f
            .eval_at(&z(), &RatExpr::constant(ScalarExpr::from_int(&ctx, 3)))
            .unwrap();
        assert_eq!(v.as_constant().unwrap(), ScalarExpr::ratio(&ctx, 3, 2));
        assert!(f.eval_at(&z(), &RatExpr::one(&ctx)).is_err());
    }
}
