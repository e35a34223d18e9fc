//! Dense-exponent multivariate polynomials over arbitrary-precision rationals.
//!
//! Monomials are exponent vectors over a fixed parameter list (the `Context`
//! owns the list; polynomials only know its length). The term order is
//! lexicographic on the exponent vector, which matches lexicographic order on
//! parameter names because contexts sort their parameters at construction.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Integer, One, Signed, Zero};

/// Exponent vector. Length equals the arity of the owning context.
pub type Mono = Vec<u32>;

fn mono_mul(a: &Mono, b: &Mono) -> Mono {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn mono_div(a: &Mono, b: &Mono) -> Option<Mono> {
    let mut out = Vec::with_capacity(a.len());
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return None;
        }
        out.push(x - y);
    }
    Some(out)
}

/// Multivariate polynomial with `BigRational` coefficients.
///
/// Invariant: no zero coefficients are stored; all keys have length `arity`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct QPoly {
    pub arity: usize,
    pub terms: BTreeMap<Mono, BigRational>,
}

impl QPoly {
    pub fn zero(arity: usize) -> Self {
        QPoly {
            arity,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(arity: usize, c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(vec![0; arity], c);
        }
        QPoly { arity, terms }
    }

    pub fn one(arity: usize) -> Self {
        Self::constant(arity, BigRational::one())
    }

    pub fn var(arity: usize, idx: usize) -> Self {
        assert!(idx < arity, "variable index out of range");
        let mut mono = vec![0; arity];
        mono[idx] = 1;
        let mut terms = BTreeMap::new();
        terms.insert(mono, BigRational::one());
        QPoly { arity, terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms.keys().next().unwrap().iter().all(|&e| e == 0))
    }

    /// Constant term as a rational (zero if absent).
    pub fn constant_term(&self) -> BigRational {
        self.terms
            .get(&vec![0; self.arity])
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    /// The whole polynomial as a rational if it is constant.
    pub fn as_constant(&self) -> Option<BigRational> {
        if self.is_constant() {
            Some(self.constant_term())
        } else {
            None
        }
    }

    pub fn degree_in(&self, idx: usize) -> u32 {
        self.terms.keys().map(|m| m[idx]).max().unwrap_or(0)
    }

    pub fn depends_on(&self, idx: usize) -> bool {
        self.terms.keys().any(|m| m[idx] > 0)
    }

    /// Leading monomial/coefficient under lex order. None for zero.
    pub fn leading(&self) -> Option<(&Mono, &BigRational)> {
        self.terms.iter().next_back()
    }

    fn insert_add(terms: &mut BTreeMap<Mono, BigRational>, m: Mono, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get().clone() + c;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &QPoly) -> QPoly {
        assert_eq!(self.arity, other.arity);
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            Self::insert_add(&mut terms, m.clone(), c.clone());
        }
        QPoly {
            arity: self.arity,
            terms,
        }
    }

    pub fn neg(&self) -> QPoly {
        QPoly {
            arity: self.arity,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }

    pub fn sub(&self, other: &QPoly) -> QPoly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &QPoly) -> QPoly {
        assert_eq!(self.arity, other.arity);
        let mut terms = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                Self::insert_add(&mut terms, mono_mul(ma, mb), ca * cb);
            }
        }
        QPoly {
            arity: self.arity,
            terms,
        }
    }

    pub fn scale(&self, c: &BigRational) -> QPoly {
        if c.is_zero() {
            return QPoly::zero(self.arity);
        }
        QPoly {
            arity: self.arity,
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    pub fn pow(&self, mut n: u32) -> QPoly {
        let mut base = self.clone();
        let mut acc = QPoly::one(self.arity);
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

    /// Exact division. Returns None when `other` does not divide `self`.
    pub fn div_exact(&self, other: &QPoly) -> Option<QPoly> {
        assert_eq!(self.arity, other.arity);
        assert!(!other.is_zero(), "division by zero polynomial");
        let mut rem = self.clone();
        let mut quot = BTreeMap::new();
        let (lm, lc) = (other.leading().unwrap().0.clone(), other.leading().unwrap().1.clone());
        while !rem.is_zero() {
            let (rm, rc) = {
                let (m, c) = rem.leading().unwrap();
                (m.clone(), c.clone())
            };
            let qm = mono_div(&rm, &lm)?;
            let qc = rc / &lc;
            let mut partial = BTreeMap::new();
            partial.insert(qm.clone(), qc.clone());
            let part = QPoly {
                arity: self.arity,
                terms: partial,
            };
            rem = rem.sub(&part.mul(other));
            Self::insert_add(&mut quot, qm, qc);
        }
        Some(QPoly {
            arity: self.arity,
            terms: quot,
        })
    }

    /// Partial derivative with respect to parameter `idx`.
    pub fn derivative(&self, idx: usize) -> QPoly {
        let mut terms = BTreeMap::new();
        for (m, c) in &self.terms {
            if m[idx] == 0 {
                continue;
            }
            let mut m2 = m.clone();
            let e = m2[idx];
            m2[idx] -= 1;
            Self::insert_add(&mut terms, m2, c * BigRational::from_integer(BigInt::from(e)));
        }
        QPoly {
            arity: self.arity,
            terms,
        }
    }

    /// Substitute parameter `idx` by a polynomial.
    pub fn substitute(&self, idx: usize, value: &QPoly) -> QPoly {
        assert_eq!(self.arity, value.arity);
        let mut out = QPoly::zero(self.arity);
        // Horner over the substituted variable, grouped by exponent.
        let mut by_exp: BTreeMap<u32, QPoly> = BTreeMap::new();
        for (m, c) in &self.terms {
            let e = m[idx];
            let mut m2 = m.clone();
            m2[idx] = 0;
            let entry = by_exp.entry(e).or_insert_with(|| QPoly::zero(self.arity));
            Self::insert_add(&mut entry.terms, m2, c.clone());
        }
        let mut pow_cache = QPoly::one(self.arity);
        let mut last_e = 0u32;
        for (e, coeff) in by_exp {
            for _ in last_e..e {
                pow_cache = pow_cache.mul(value);
            }
            last_e = e;
            out = out.add(&coeff.mul(&pow_cache));
        }
        out
    }

    /// Coefficients viewed as a univariate polynomial in parameter `idx`.
    /// Entry k holds the (arity-preserving) coefficient of idx^k.
    pub fn coeffs_in(&self, idx: usize) -> Vec<QPoly> {
        let deg = self.degree_in(idx) as usize;
        let mut out = vec![QPoly::zero(self.arity); deg + 1];
        for (m, c) in &self.terms {
            let e = m[idx] as usize;
            let mut m2 = m.clone();
            m2[idx] = 0;
            Self::insert_add(&mut out[e].terms, m2, c.clone());
        }
        out
    }

    /// Rebuild from univariate coefficients in `idx`.
    pub fn from_coeffs_in(arity: usize, idx: usize, coeffs: &[QPoly]) -> QPoly {
        let mut out = QPoly::zero(arity);
        for (e, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mut xe = vec![0u32; arity];
            xe[idx] = e as u32;
            let mut t = BTreeMap::new();
            t.insert(xe, BigRational::one());
            out = out.add(&c.mul(&QPoly { arity, terms: t }));
        }
        out
    }

    /// Clear rational denominators: returns (integer-coefficient poly, common denominator).
    fn to_integer(&self) -> (BTreeMap<Mono, BigInt>, BigInt) {
        let mut den = BigInt::one();
        for c in self.terms.values() {
            den = den.lcm(c.denom());
        }
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| (m.clone(), c.numer() * (&den / c.denom())))
            .collect();
        (terms, den)
    }

    /// Content (gcd of integer coefficients) after clearing denominators,
    /// with a positive sign convention on the leading coefficient.
    fn integer_primitive(&self) -> QPoly {
        if self.is_zero() {
            return self.clone();
        }
        let (int_terms, _) = self.to_integer();
        let mut g = BigInt::zero();
        for c in int_terms.values() {
            g = g.gcd(c);
        }
        let lead_neg = int_terms.iter().next_back().map(|(_, c)| c.is_negative()).unwrap_or(false);
        if lead_neg {
            g = -g;
        }
        QPoly {
            arity: self.arity,
            terms: int_terms
                .into_iter()
                .map(|(m, c)| (m, BigRational::from_integer(c / &g)))
                .collect(),
        }
    }

    /// Multivariate gcd, normalized primitive with positive leading coefficient.
    /// gcd(0, g) = primitive(g).
    pub fn gcd(&self, other: &QPoly) -> QPoly {
        assert_eq!(self.arity, other.arity);
        if self.is_zero() {
            return other.integer_primitive();
        }
        if other.is_zero() {
            return self.integer_primitive();
        }
        // Work variable-by-variable: pick the highest-index parameter either
        // polynomial actually uses.
        let var = (0..self.arity)
            .rev()
            .find(|&i| self.depends_on(i) || other.depends_on(i));
        match var {
            None => QPoly::one(self.arity),
            Some(v) => gcd_in_var(&self.integer_primitive(), &other.integer_primitive(), v).integer_primitive(),
        }
    }
}

/// Content of `p` seen as univariate in `v`: gcd of its coefficients.
fn content_in(p: &QPoly, v: usize) -> QPoly {
    let coeffs = p.coeffs_in(v);
    let mut g = QPoly::zero(p.arity);
    for c in coeffs {
        if !c.is_zero() {
            g = g.gcd(&c);
            if g.is_constant() {
                break;
            }
        }
    }
    if g.is_zero() {
        QPoly::one(p.arity)
    } else {
        g
    }
}

/// Pseudo-remainder of a by b in variable v (b nonzero in v).
fn pseudo_rem(a: &QPoly, b: &QPoly, v: usize) -> QPoly {
    let db = b.degree_in(v);
    let b_coeffs = b.coeffs_in(v);
    let lb = b_coeffs[db as usize].clone();
    let mut r = a.clone();
    while !r.is_zero() && r.degree_in(v) >= db {
        let dr = r.degree_in(v);
        let r_coeffs = r.coeffs_in(v);
        let lr = r_coeffs[dr as usize].clone();
        // r <- lb * r - lr * x^(dr-db) * b
        let mut shift = vec![0u32; a.arity];
        shift[v] = dr - db;
        let mut t = BTreeMap::new();
        t.insert(shift, BigRational::one());
        let shift_poly = QPoly {
            arity: a.arity,
            terms: t,
        };
        r = r.mul(&lb).sub(&lr.mul(&shift_poly).mul(b));
    }
    r
}

fn gcd_in_var(a: &QPoly, b: &QPoly, v: usize) -> QPoly {
    let (mut f, mut g) = if a.degree_in(v) >= b.degree_in(v) {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    };
    let cf = content_in(&f, v);
    let cg = content_in(&g, v);
    let cont = cf.gcd(&cg);
    f = f.div_exact(&cf).unwrap();
    g = g.div_exact(&cg).unwrap();
    while !g.is_zero() && g.degree_in(v) > 0 {
        let r = pseudo_rem(&f, &g, v);
        f = g;
        g = if r.is_zero() {
            r
        } else {
            let c = content_in(&r, v);
            r.div_exact(&c).unwrap()
        };
    }
    if g.is_zero() {
        cont.mul(&f)
    } else {
        // g is a nonzero constant in v: the primitive gcd in v is trivial.
        cont
    }
}

impl Ord for QPoly {
    fn cmp(&self, other: &Self) -> Ordering {
        let mut it_a = self.terms.iter().rev();
        let mut it_b = other.terms.iter().rev();
        loop {
            match (it_a.next(), it_b.next()) {
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

impl PartialOrd for QPoly {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::FromPrimitive;

    fn r(n: i64) -> BigRational {
        BigRational::from_i64(n).unwrap()
    }

    // Two-parameter helpers: x = var 0, y = var 1.
    fn x() -> QPoly {
        QPoly::var(2, 0)
    }
    fn y() -> QPoly {
        QPoly::var(2, 1)
    }
    fn c(n: i64) -> QPoly {
        QPoly::constant(2, r(n))
    }

    #[test]
    fn mul_and_div_exact_roundtrip() {
        let a = x().add(&y()).mul(&x().sub(&c(3)));
        let b = x().add(&y());
        assert_eq!(a.div_exact(&b).unwrap(), x().sub(&c(3)));
        assert!(a.div_exact(&x().add(&c(1))).is_none());
    }

    #[test]
    fn gcd_of_difference_of_squares() {
        // gcd(x^2 - y^2, x^2 + 2xy + y^2) = x + y
        let p = x().mul(&x()).sub(&y().mul(&y()));
        let q = x().add(&y()).mul(&x().add(&y()));
        let g = p.gcd(&q);
        assert_eq!(g, x().add(&y()));
    }

    #[test]
    fn gcd_univariate() {
        // gcd((x-1)(x+2), (x-1)(x-5)) = x - 1
        let p = x().sub(&c(1)).mul(&x().add(&c(2)));
        let q = x().sub(&c(1)).mul(&x().sub(&c(5)));
        assert_eq!(p.gcd(&q), x().sub(&c(1)));
    }

    #[test]
    fn gcd_with_rational_coefficients() {
        // gcd normalizes to a primitive integer polynomial.
        let p = x().mul(&x()).sub(&c(1)).scale(&BigRational::new(1.into(), 2.into()));
        let q = x().sub(&c(1)).scale(&r(7));
        assert_eq!(p.gcd(&q), x().sub(&c(1)));
    }

    #[test]
    fn substitute_evaluates() {
        // (x^2 + y) with x := y  ->  y^2 + y
        let p = x().mul(&x()).add(&y());
        let s = p.substitute(0, &y());
        assert_eq!(s, y().mul(&y()).add(&y()));
    }
}
