//! Single-variable Laurent expansion of rational expressions.
//!
//! Everything is exact: the expansion point is a rational expression in the
//! other variables (or one of the marked points -1, 0, +1), coefficients come
//! out as rational expressions in the remaining variables, and pole orders
//! are read off the factored denominator rather than guessed.

use crate::algebra::ScalarExpr;

use super::rat::RatExpr;
use super::vpoly::{VPoly, Var};
use super::FormError;

/// Laurent series data: coefficient `i` corresponds to exponent `min + i`.
#[derive(Clone, Debug)]
pub struct LaurentSeries<T> {
    pub min: i64,
    pub coeffs: Vec<T>,
}

impl<T> LaurentSeries<T> {
    pub fn empty() -> LaurentSeries<T> {
        LaurentSeries {
            min: 0,
            coeffs: Vec::new(),
        }
    }
    pub fn coeff(&self, e: i64) -> Option<&T> {
        if e < self.min {
            return None;
        }
        self.coeffs.get((e - self.min) as usize)
    }
    pub fn max_exp(&self) -> i64 {
        self.min + self.coeffs.len() as i64 - 1
    }
}

/// Generic truncated product of two Laurent series.
pub fn ls_mul<A, B, C>(
    a: &LaurentSeries<A>,
    b: &LaurentSeries<B>,
    hi: i64,
    zero: impl Fn() -> C,
    mul: impl Fn(&A, &B) -> C,
    add: impl Fn(&C, &C) -> C,
) -> LaurentSeries<C> {
    if a.coeffs.is_empty() || b.coeffs.is_empty() {
        return LaurentSeries::empty();
    }
    let min = a.min + b.min;
    if min > hi {
        return LaurentSeries::empty();
    }
    let len = (hi - min + 1) as usize;
    let mut out: Vec<C> = (0..len).map(|_| zero()).collect();
    for (i, ca) in a.coeffs.iter().enumerate() {
        for (j, cb) in b.coeffs.iter().enumerate() {
            if i + j >= len {
                break;
            }
            out[i + j] = add(&out[i + j], &mul(ca, cb));
        }
    }
    LaurentSeries { min, coeffs: out }
}

pub fn ls_add<T: Clone>(
    a: &LaurentSeries<T>,
    b: &LaurentSeries<T>,
    zero: impl Fn() -> T,
    add: impl Fn(&T, &T) -> T,
) -> LaurentSeries<T> {
    if a.coeffs.is_empty() {
        return b.clone();
    }
    if b.coeffs.is_empty() {
        return a.clone();
    }
    let min = a.min.min(b.min);
    let max = a.max_exp().max(b.max_exp());
    let len = (max - min + 1) as usize;
    let mut out: Vec<T> = (0..len).map(|_| zero()).collect();
    for (i, c) in a.coeffs.iter().enumerate() {
        out[(a.min - min) as usize + i] = add(&out[(a.min - min) as usize + i], c);
    }
    for (i, c) in b.coeffs.iter().enumerate() {
        out[(b.min - min) as usize + i] = add(&out[(b.min - min) as usize + i], c);
    }
    LaurentSeries { min, coeffs: out }
}

/// Taylor coefficients of `p(v)` around `v = point`, exact and complete.
fn taylor_shift(p: &VPoly, v: &Var, point: &RatExpr) -> Vec<RatExpr> {
    let ctx = &p.ctx;
    let coeffs = p.coeffs_in(v);
    let deg = coeffs.len().saturating_sub(1);
    // Powers of the point.
    let mut powers: Vec<RatExpr> = Vec::with_capacity(deg + 1);
    powers.push(RatExpr::one(ctx));
    for _ in 0..deg {
        powers.push(powers.last().unwrap().mul(point));
    }
    let mut out = Vec::with_capacity(deg + 1);
    for k in 0..=deg {
        let mut acc = RatExpr::zero(ctx);
        for j in k..=deg {
            if coeffs[j].is_zero() {
                continue;
            }
            let b = binom_i64(j as u64, k as u64);
            let term = RatExpr::from_poly(coeffs[j].clone())
                .scale(&ScalarExpr::from_int(ctx, b))
                .mul(&powers[j - k]);
            acc = acc.add(&term);
        }
        out.push(acc);
    }
    out
}

fn binom_i64(n: u64, k: u64) -> i64 {
    let k = k.min(n - k);
    let mut r: i128 = 1;
    for i in 0..k {
        r = r * (n - i) as i128 / (i + 1) as i128;
    }
    r as i64
}

/// Multiplicative inverse of a unit power series, `len` coefficients.
fn invert_unit_series(u: &[RatExpr], len: usize) -> Result<Vec<RatExpr>, FormError> {
    let ctx = u[0].ctx().clone();
    let u0_inv = u[0].recip()?;
    let mut out = Vec::with_capacity(len);
    out.push(u0_inv.clone());
    for k in 1..len {
        let mut acc = RatExpr::zero(&ctx);
        for i in 1..=k.min(u.len() - 1) {
            if u[i].is_zero() || out[k - i].is_zero() {
                continue;
            }
            acc = acc.add(&u[i].mul(&out[k - i]));
        }
        out.push(acc.neg().mul(&u0_inv));
    }
    Ok(out)
}

fn mul_trunc(a: &[RatExpr], b: &[RatExpr], len: usize) -> Vec<RatExpr> {
    let ctx = if !a.is_empty() {
        a[0].ctx().clone()
    } else {
        b[0].ctx().clone()
    };
    let mut out = vec![RatExpr::zero(&ctx); len];
    for i in 0..a.len().min(len) {
        if a[i].is_zero() {
            continue;
        }
        for j in 0..b.len() {
            if i + j >= len {
                break;
            }
            if b[j].is_zero() {
                continue;
            }
            out[i + j] = out[i + j].add(&a[i].mul(&b[j]));
        }
    }
    out
}

/// Expand `f` around `v = point` with all exponents up to `hi` inclusive.
/// Coefficients are rational expressions in the remaining variables. The
/// expansion is exact from the true leading exponent onwards.
pub fn expand_rat(
    f: &RatExpr,
    v: &Var,
    point: &RatExpr,
    hi: i64,
) -> Result<LaurentSeries<RatExpr>, FormError> {
    let ctx = f.ctx().clone();
    if f.is_zero() {
        return Ok(LaurentSeries::empty());
    }
    assert!(!point.vars().contains(v), "expansion point depends on the variable");
    // Shift the numerator.
    let num_shift = taylor_shift(&f.num, v, point);
    // Shift each denominator factor and record its valuation.
    let mut total_val: i64 = 0;
    let mut units: Vec<(Vec<RatExpr>, u32)> = Vec::new();
    for (fac, m) in &f.den {
        let shifted = taylor_shift(fac, v, point);
        let val = shifted
            .iter()
            .position(|c| !c.is_zero())
            .expect("nonzero factor");
        total_val += (val as i64) * (*m as i64);
        units.push((shifted[val..].to_vec(), *m));
    }
    let len_i = hi + total_val + 1;
    if len_i <= 0 {
        return Ok(LaurentSeries::empty());
    }
    let len = len_i as usize;
    // Product of inverse unit series.
    let mut acc: Vec<RatExpr> = num_shift;
    acc.truncate(len);
    if acc.is_empty() {
        acc.push(RatExpr::zero(&ctx));
    }
    for (unit, m) in units {
        let inv = invert_unit_series(&unit, len)?;
        for _ in 0..m {
            acc = mul_trunc(&acc, &inv, len);
        }
    }
    // Trim zero edges.
    let mut min = -total_val;
    while !acc.is_empty() && acc[0].is_zero() {
        acc.remove(0);
        min += 1;
    }
    while acc.last().map(|c| c.is_zero()).unwrap_or(false) {
        acc.pop();
    }
    Ok(LaurentSeries { min, coeffs: acc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Context;

    fn z() -> Var {
        Var::new("z")
    }

    #[test]
    fn simple_pole_series() {
        // 1/(z-1) around z=1: exactly eps^-1.
        let ctx = Context::empty();
        let one = VPoly::one(&ctx);
        let f = RatExpr {
            num: one.clone(),
            den: vec![(VPoly::var(&ctx, &z()).sub(&one), 1)],
        };
        let s = expand_rat(&f, &z(), &RatExpr::one(&ctx), 3).unwrap();
        assert_eq!(s.min, -1);
        assert!(s.coeff(-1).unwrap().eq_rat(&RatExpr::one(&ctx)));
        for e in 0..=3 {
            assert!(s.coeff(e).map(|c| c.is_zero()).unwrap_or(true), "exp {e}");
        }
    }

    #[test]
    fn geometric_series_at_zero() {
        // 1/(1-z) = sum z^k.
        let ctx = Context::empty();
        let one = VPoly::one(&ctx);
        let f = RatExpr {
            num: one.clone(),
            den: vec![(one.sub(&VPoly::var(&ctx, &z())), 1)],
        };
        let s = expand_rat(&f, &z(), &RatExpr::zero(&ctx), 4).unwrap();
        assert_eq!(s.min, 0);
        for e in 0..=4 {
            assert!(s.coeff(e).unwrap().eq_rat(&RatExpr::one(&ctx)), "exp {e}");
        }
    }

    #[test]
    fn double_pole_at_other_variable() {
        // 1/(z-w)^2 around z=0: coefficient of z^k is (k+1)/w^(k+2).
        let ctx = Context::empty();
        let w = Var::new("w");
        let f = RatExpr {
            num: VPoly::one(&ctx),
            den: vec![(VPoly::var(&ctx, &z()).sub(&VPoly::var(&ctx, &w)), 2)],
        };
        let s = expand_rat(&f, &z(), &RatExpr::zero(&ctx), 2).unwrap();
        for k in 0..=2i64 {
            let expect = RatExpr {
                num: VPoly::one(&ctx).scale(&ScalarExpr::from_int(&ctx, k + 1)),
                den: vec![(VPoly::var(&ctx, &w), (k + 2) as u32)],
            };
            assert!(s.coeff(k).unwrap().eq_rat(&expect), "k={k}");
        }
    }

    #[test]
    fn expansion_at_variable_point() {
        // 1/(z-w) around z=w+eps ... coefficient of eps^-1 is 1.
        let ctx = Context::empty();
        let w = Var::new("w");
        let f = RatExpr {
            num: VPoly::one(&ctx),
            den: vec![(VPoly::var(&ctx, &z()).sub(&VPoly::var(&ctx, &w)), 1)],
        };
        let s = expand_rat(&f, &z(), &RatExpr::var(&ctx, &w), 1).unwrap();
        assert_eq!(s.min, -1);
        assert!(s.coeff(-1).unwrap().eq_rat(&RatExpr::one(&ctx)));
        assert!(s.coeff(0).unwrap().is_zero());
    }
}
