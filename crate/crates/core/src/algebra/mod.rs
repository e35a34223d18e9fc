//! Exact scalar arithmetic over declared parameter sets.
//!
//! A [`Context`] declares the parameters a computation may mention (N, alpha,
//! beta, t, couplings, ...). A [`ScalarExpr`] is a rational function in those
//! parameters over arbitrary-precision rationals, kept in a canonical form so
//! that equality is literal comparison:
//!
//! * numerator and denominator are coprime,
//! * the denominator is monic under the lexicographic monomial order,
//! * `beta` never appears above degree one (`beta^2` rewrites to
//!   `1 - alpha^2`), and the denominator is beta-free,
//! * when a parameter is declared in series mode, every value is a truncated
//!   power series in it and the truncation order never grows.
//!
//! Declaring `beta` requires `alpha`; the pair models an exact square root
//! `beta = sqrt(1 - alpha^2)` without leaving rational arithmetic.

pub mod poly;

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

use poly::QPoly;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("parameter `{0}` is not declared in this context")]
    UndeclaredParameter(String),
    #[error("operands belong to different contexts")]
    ContextMismatch,
    #[error("division by the zero expression")]
    DivisionByZero,
    #[error("division by a series with no invertible constant term")]
    NonUnitSeriesDivision,
    #[error("expression has a pole at {0} = 0")]
    PoleAtExpansionPoint(String),
    #[error("constant term is not a perfect square over the rationals")]
    NotAPerfectSquare,
    #[error("constant term of series square root is zero")]
    ZeroConstantTerm,
    #[error("at most one series-mode parameter is supported")]
    MultipleSeriesParams,
    #[error("declaring `beta` requires declaring `alpha`")]
    BetaRequiresAlpha,
    #[error("duplicate parameter `{0}`")]
    DuplicateParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Declaration mode of a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamMode {
    Exact,
    /// Truncated power series around 0, keeping exponents `0..=order`.
    Series(usize),
}

#[derive(Debug)]
struct ContextInner {
    /// Parameter names, sorted; index = position in every exponent vector.
    names: Vec<String>,
    modes: Vec<ParamMode>,
    alpha: Option<usize>,
    beta: Option<usize>,
    series: Option<(usize, usize)>,
}

/// Shared, immutable parameter declaration.
#[derive(Clone)]
pub struct Context {
    inner: Arc<ContextInner>,
}

impl fmt::Debug for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Context{:?}", self.inner.names)
    }
}

impl PartialEq for Context {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.names == other.inner.names && self.inner.modes == other.inner.modes)
    }
}
impl Eq for Context {}

impl Context {
    pub fn new(params: &[(&str, ParamMode)]) -> Result<Context, AlgebraError> {
        let mut decls: Vec<(String, ParamMode)> =
            params.iter().map(|(n, m)| (n.to_string(), *m)).collect();
        decls.sort_by(|a, b| a.0.cmp(&b.0));
        for w in decls.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(AlgebraError::DuplicateParameter(w[0].0.clone()));
            }
        }
        let names: Vec<String> = decls.iter().map(|d| d.0.clone()).collect();
        let modes: Vec<ParamMode> = decls.iter().map(|d| d.1).collect();
        let alpha = names.iter().position(|n| n == "alpha");
        let beta = names.iter().position(|n| n == "beta");
        if beta.is_some() && alpha.is_none() {
            return Err(AlgebraError::BetaRequiresAlpha);
        }
        let mut series = None;
        for (i, m) in modes.iter().enumerate() {
            if let ParamMode::Series(ord) = m {
                if series.is_some() {
                    return Err(AlgebraError::MultipleSeriesParams);
                }
                series = Some((i, *ord));
            }
        }
        if let (Some(b), Some((s, _))) = (beta, series) {
            // beta-conjugation happens inside exact coefficients; the series
            // parameter must not be alpha or beta themselves.
            if s == b || Some(s) == alpha {
                return Err(AlgebraError::MultipleSeriesParams);
            }
        }
        Ok(Context {
            inner: Arc::new(ContextInner {
                names,
                modes,
                alpha,
                beta,
                series,
            }),
        })
    }

    /// Context with no parameters: plain rational arithmetic.
    pub fn empty() -> Context {
        Context::new(&[]).unwrap()
    }

    pub fn arity(&self) -> usize {
        self.inner.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.inner.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.inner.names.iter().position(|n| n == name)
    }

    pub fn mode(&self, idx: usize) -> ParamMode {
        self.inner.modes[idx]
    }

    pub fn series_param(&self) -> Option<(usize, usize)> {
        self.inner.series
    }

    fn beta(&self) -> Option<usize> {
        self.inner.beta
    }
    fn alpha(&self) -> Option<usize> {
        self.inner.alpha
    }
}

/// `1 - alpha^2` in a context that declares alpha.
fn one_minus_alpha_sq(ctx: &Context) -> QPoly {
    let a = ctx.alpha().expect("alpha not declared");
    let alpha = QPoly::var(ctx.arity(), a);
    QPoly::one(ctx.arity()).sub(&alpha.mul(&alpha))
}

/// Rewrite every beta power above one via beta^2 -> 1 - alpha^2.
fn beta_reduce(ctx: &Context, p: &QPoly) -> QPoly {
    let b = match ctx.beta() {
        Some(b) if p.degree_in(b) >= 2 => b,
        _ => return p.clone(),
    };
    let rel = one_minus_alpha_sq(ctx);
    let coeffs = p.coeffs_in(b);
    let mut out = QPoly::zero(ctx.arity());
    let beta = QPoly::var(ctx.arity(), b);
    for (e, c) in coeffs.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let mut t = c.mul(&rel.pow((e / 2) as u32));
        if e % 2 == 1 {
            t = t.mul(&beta);
        }
        out = out.add(&t);
    }
    out
}

/// beta -> -beta.
fn beta_conjugate(ctx: &Context, p: &QPoly) -> QPoly {
    let b = match ctx.beta() {
        Some(b) => b,
        None => return p.clone(),
    };
    let coeffs = p.coeffs_in(b);
    let beta = QPoly::var(ctx.arity(), b);
    let mut out = QPoly::zero(ctx.arity());
    for (e, c) in coeffs.iter().enumerate() {
        let sign = if e % 2 == 1 { c.neg() } else { c.clone() };
        out = out.add(&sign.mul(&beta.pow(e as u32)));
    }
    out
}

/// Canonical fraction of beta-reduced polynomials.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Frac {
    num: QPoly,
    den: QPoly,
}

impl Frac {
    fn zero(ctx: &Context) -> Frac {
        Frac {
            num: QPoly::zero(ctx.arity()),
            den: QPoly::one(ctx.arity()),
        }
    }

    fn from_poly(ctx: &Context, p: QPoly) -> Frac {
        Frac {
            num: beta_reduce(ctx, &p),
            den: QPoly::one(ctx.arity()),
        }
        .normalized(ctx)
    }

    fn new(ctx: &Context, num: QPoly, den: QPoly) -> Result<Frac, AlgebraError> {
        if den.is_zero() {
            return Err(AlgebraError::DivisionByZero);
        }
        Ok(Frac { num, den }.normalized(ctx))
    }

    fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    fn normalized(mut self, ctx: &Context) -> Frac {
        self.num = beta_reduce(ctx, &self.num);
        self.den = beta_reduce(ctx, &self.den);
        assert!(!self.den.is_zero(), "zero denominator after reduction");
        if self.num.is_zero() {
            return Frac::zero(ctx);
        }
        // Clear beta from the denominator by conjugation.
        if let Some(b) = ctx.beta() {
            if self.den.depends_on(b) {
                let conj = beta_conjugate(ctx, &self.den);
                self.num = beta_reduce(ctx, &self.num.mul(&conj));
                self.den = beta_reduce(ctx, &self.den.mul(&conj));
                debug_assert!(!self.den.depends_on(b));
            }
        }
        // Cancel the gcd. With beta present, split num = A + B*beta and use
        // gcd(A, B, den), all beta-free, which keeps the representative unique.
        let num_content = match ctx.beta() {
            Some(b) if self.num.depends_on(b) => {
                let cs = self.num.coeffs_in(b);
                let mut g = QPoly::zero(ctx.arity());
                for c in cs {
                    g = g.gcd(&c);
                }
                g
            }
            _ => self.num.clone(),
        };
        let g = num_content.gcd(&self.den);
        if !g.is_constant() || g.as_constant().map(|c| !c.is_one()).unwrap_or(false) {
            self.num = self.num.div_exact(&g).unwrap();
            self.den = self.den.div_exact(&g).unwrap();
        }
        // Monic denominator.
        let lc = self.den.leading().unwrap().1.clone();
        if !lc.is_one() {
            let inv = BigRational::one() / lc;
            self.num = self.num.scale(&inv);
            self.den = self.den.scale(&inv);
        }
        self
    }

    fn add(&self, ctx: &Context, o: &Frac) -> Frac {
        Frac {
            num: self.num.mul(&o.den).add(&o.num.mul(&self.den)),
            den: self.den.mul(&o.den),
        }
        .normalized(ctx)
    }

    fn neg(&self) -> Frac {
        Frac {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    fn mul(&self, ctx: &Context, o: &Frac) -> Frac {
        Frac {
            num: self.num.mul(&o.num),
            den: self.den.mul(&o.den),
        }
        .normalized(ctx)
    }

    fn inv(&self, ctx: &Context) -> Result<Frac, AlgebraError> {
        if self.num.is_zero() {
            return Err(AlgebraError::DivisionByZero);
        }
        Frac::new(ctx, self.den.clone(), self.num.clone())
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Repr {
    Exact(Frac),
    /// Coefficients of series_param^0 ..= series_param^order; each Frac is
    /// free of the series parameter.
    Series(Vec<Frac>),
}

/// Exact rational function in the declared parameters, canonical form.
#[derive(Clone)]
pub struct ScalarExpr {
    ctx: Context,
    repr: Arc<Repr>,
}

impl PartialEq for ScalarExpr {
    fn eq(&self, other: &Self) -> bool {
        self.ctx == other.ctx && self.repr == other.repr
    }
}
impl Eq for ScalarExpr {}

impl PartialOrd for ScalarExpr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ScalarExpr {
    fn cmp(&self, other: &Self) -> Ordering {
        self.repr.cmp(&other.repr)
    }
}

impl std::hash::Hash for ScalarExpr {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        // Hash via the printed canonical form; cheap enough for small scalars.
        self.to_string().hash(state)
    }
}

impl ScalarExpr {
    fn from_repr(ctx: &Context, repr: Repr) -> ScalarExpr {
        ScalarExpr {
            ctx: ctx.clone(),
            repr: Arc::new(repr),
        }
    }

    fn series_split(ctx: &Context, p: &QPoly) -> Vec<Frac> {
        let (idx, order) = ctx.series_param().expect("not a series context");
        let mut coeffs = p.coeffs_in(idx);
        coeffs.truncate(order + 1);
        coeffs.resize(order + 1, QPoly::zero(ctx.arity()));
        coeffs.into_iter().map(|c| Frac::from_poly(ctx, c)).collect()
    }

    fn from_poly(ctx: &Context, p: QPoly) -> ScalarExpr {
        let repr = match ctx.series_param() {
            None => Repr::Exact(Frac::from_poly(ctx, p)),
            Some(_) => Repr::Series(Self::series_split(ctx, &p)),
        };
        Self::from_repr(ctx, repr)
    }

    pub fn zero(ctx: &Context) -> ScalarExpr {
        Self::from_poly(ctx, QPoly::zero(ctx.arity()))
    }

    pub fn one(ctx: &Context) -> ScalarExpr {
        Self::from_poly(ctx, QPoly::one(ctx.arity()))
    }

    pub fn from_int(ctx: &Context, n: i64) -> ScalarExpr {
        Self::from_poly(
            ctx,
            QPoly::constant(ctx.arity(), BigRational::from_integer(BigInt::from(n))),
        )
    }

    pub fn from_rational(ctx: &Context, r: BigRational) -> ScalarExpr {
        Self::from_poly(ctx, QPoly::constant(ctx.arity(), r))
    }

    pub fn ratio(ctx: &Context, num: i64, den: i64) -> ScalarExpr {
        assert!(den != 0);
        Self::from_rational(
            ctx,
            BigRational::new(BigInt::from(num), BigInt::from(den)),
        )
    }

    pub fn param(ctx: &Context, name: &str) -> Result<ScalarExpr, AlgebraError> {
        let idx = ctx
            .index_of(name)
            .ok_or_else(|| AlgebraError::UndeclaredParameter(name.to_string()))?;
        Ok(Self::from_poly(ctx, QPoly::var(ctx.arity(), idx)))
    }

    pub fn context(&self) -> &Context {
        &self.ctx
    }

    pub fn is_zero(&self) -> bool {
        match &*self.repr {
            Repr::Exact(f) => f.is_zero(),
            Repr::Series(cs) => cs.iter().all(|c| c.is_zero()),
        }
    }

    pub fn is_one(&self) -> bool {
        match &*self.repr {
            Repr::Exact(f) => f.den.is_constant() && f.num == f.den,
            Repr::Series(cs) => {
                cs[0].den.is_constant()
                    && cs[0].num == cs[0].den
                    && cs[1..].iter().all(|c| c.is_zero())
            }
        }
    }

    /// The value as a plain rational, when it is constant.
    pub fn as_rational(&self) -> Option<BigRational> {
        match &*self.repr {
            Repr::Exact(f) => {
                if f.num.is_constant() && f.den.is_constant() {
                    Some(f.num.constant_term() / f.den.constant_term())
                } else {
                    None
                }
            }
            Repr::Series(cs) => {
                if cs[1..].iter().all(|c| c.is_zero())
                    && cs[0].num.is_constant()
                    && cs[0].den.is_constant()
                {
                    Some(cs[0].num.constant_term() / cs[0].den.constant_term())
                } else {
                    None
                }
            }
        }
    }

    fn check_ctx(&self, other: &ScalarExpr) {
        assert!(
            self.ctx == other.ctx,
            "scalar operands belong to different contexts"
        );
    }

    pub fn add(&self, other: &ScalarExpr) -> ScalarExpr {
        self.check_ctx(other);
        let repr = match (&*self.repr, &*other.repr) {
            (Repr::Exact(a), Repr::Exact(b)) => Repr::Exact(a.add(&self.ctx, b)),
            (Repr::Series(a), Repr::Series(b)) => Repr::Series(
                a.iter()
                    .zip(b)
                    .map(|(x, y)| x.add(&self.ctx, y))
                    .collect(),
            ),
            _ => unreachable!("mixed representations within one context"),
        };
        Self::from_repr(&self.ctx, repr)
    }

    pub fn neg(&self) -> ScalarExpr {
        let repr = match &*self.repr {
            Repr::Exact(a) => Repr::Exact(a.neg()),
            Repr::Series(a) => Repr::Series(a.iter().map(|c| c.neg()).collect()),
        };
        Self::from_repr(&self.ctx, repr)
    }

    pub fn sub(&self, other: &ScalarExpr) -> ScalarExpr {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &ScalarExpr) -> ScalarExpr {
        self.check_ctx(other);
        let repr = match (&*self.repr, &*other.repr) {
            (Repr::Exact(a), Repr::Exact(b)) => Repr::Exact(a.mul(&self.ctx, b)),
            (Repr::Series(a), Repr::Series(b)) => {
                let n = a.len();
                let mut out = vec![Frac::zero(&self.ctx); n];
                for (i, x) in a.iter().enumerate() {
                    if x.is_zero() {
                        continue;
                    }
                    for (j, y) in b.iter().enumerate() {
                        if i + j >= n {
                            break;
                        }
                        if y.is_zero() {
                            continue;
                        }
                        out[i + j] = out[i + j].add(&self.ctx, &x.mul(&self.ctx, y));
                    }
                }
                Repr::Series(out)
            }
            _ => unreachable!("mixed representations within one context"),
        };
        Self::from_repr(&self.ctx, repr)
    }

    pub fn inv(&self) -> Result<ScalarExpr, AlgebraError> {
        let repr = match &*self.repr {
            Repr::Exact(a) => Repr::Exact(a.inv(&self.ctx)?),
            Repr::Series(a) => {
                if a[0].is_zero() {
                    return Err(if self.is_zero() {
                        AlgebraError::DivisionByZero
                    } else {
                        AlgebraError::NonUnitSeriesDivision
                    });
                }
                let n = a.len();
                let c0_inv = a[0].inv(&self.ctx)?;
                let mut out = vec![Frac::zero(&self.ctx); n];
                out[0] = c0_inv.clone();
                for k in 1..n {
                    let mut acc = Frac::zero(&self.ctx);
                    for i in 1..=k {
                        if a[i].is_zero() || out[k - i].is_zero() {
                            continue;
                        }
                        acc = acc.add(&self.ctx, &a[i].mul(&self.ctx, &out[k - i]));
                    }
                    out[k] = acc.neg().mul(&self.ctx, &c0_inv);
                }
                Repr::Series(out)
            }
        };
        Ok(Self::from_repr(&self.ctx, repr))
    }

    pub fn div(&self, other: &ScalarExpr) -> Result<ScalarExpr, AlgebraError> {
        self.check_ctx(other);
        Ok(self.mul(&other.inv()?))
    }

    pub fn pow(&self, n: i64) -> Result<ScalarExpr, AlgebraError> {
        if n < 0 {
            return self.inv()?.pow(-n);
        }
        let mut acc = ScalarExpr::one(&self.ctx);
        let mut base = self.clone();
        let mut k = n as u64;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        Ok(acc)
    }

    /// Structural equality after canonicalization; errors on context mismatch.
    pub fn try_equals(&self, other: &ScalarExpr) -> Result<bool, AlgebraError> {
        if self.ctx != other.ctx {
            return Err(AlgebraError::ContextMismatch);
        }
        Ok(self.repr == other.repr)
    }

    /// Substitute one parameter by an expression of the same context.
    pub fn substitute_param(&self, name: &str, value: &ScalarExpr) -> Result<ScalarExpr, AlgebraError> {
        self.check_ctx(value);
        let idx = self
            .ctx
            .index_of(name)
            .ok_or_else(|| AlgebraError::UndeclaredParameter(name.to_string()))?;
        let subst_poly = |p: &QPoly| -> Result<ScalarExpr, AlgebraError> {
            let coeffs = p.coeffs_in(idx);
            let mut acc = ScalarExpr::zero(&self.ctx);
            // Horner from the top coefficient down.
            for c in coeffs.iter().rev() {
                acc = acc.mul(value);
                acc = acc.add(&ScalarExpr::from_poly(&self.ctx, c.clone()));
            }
            Ok(acc)
        };
        match &*self.repr {
            Repr::Exact(f) => subst_poly(&f.num)?.div(&subst_poly(&f.den)?),
            Repr::Series(cs) => {
                let (sidx, _) = self.ctx.series_param().unwrap();
                assert_ne!(sidx, idx, "cannot substitute the series parameter");
                let t = ScalarExpr::from_poly(&self.ctx, QPoly::var(self.ctx.arity(), sidx));
                let mut acc = ScalarExpr::zero(&self.ctx);
                let mut tp = ScalarExpr::one(&self.ctx);
                for c in cs {
                    let cexpr = ScalarExpr::from_repr(&self.ctx, Repr::Exact(c.clone()));
                    // Coefficients are series-free; lift via exact substitution.
                    let c_sub = ScalarExpr::from_poly(&self.ctx, QPoly::zero(self.ctx.arity()))
                        .add(&lift_exact(&self.ctx, &cexpr, idx, value)?);
                    acc = acc.add(&c_sub.mul(&tp));
                    tp = tp.mul(&t);
                }
                Ok(acc)
            }
        }
    }

    /// Taylor coefficients `0..=order` at `param = 0`.
    pub fn series_truncate(&self, param: &str, order: usize) -> Result<TruncatedSeries, AlgebraError> {
        let idx = self
            .ctx
            .index_of(param)
            .ok_or_else(|| AlgebraError::UndeclaredParameter(param.to_string()))?;
        match &*self.repr {
            Repr::Series(cs) => {
                let (sidx, sord) = self.ctx.series_param().unwrap();
                assert_eq!(sidx, idx, "series context expands only in its series parameter");
                let take = order.min(sord);
                let mut coeffs: Vec<ScalarExpr> = cs[..=take]
                    .iter()
                    .map(|c| ScalarExpr::from_repr(&self.ctx, Repr::Exact(c.clone())))
                    .collect();
                coeffs.resize(order + 1, ScalarExpr::zero(&self.ctx));
                Ok(TruncatedSeries {
                    param: param.to_string(),
                    order,
                    coeffs,
                })
            }
            Repr::Exact(f) => {
                // Strip common powers of the parameter, then invert the unit part.
                let mut num_c = f.num.coeffs_in(idx);
                let mut den_c = f.den.coeffs_in(idx);
                let vnum = num_c.iter().position(|c| !c.is_zero()).unwrap_or(usize::MAX);
                let vden = den_c.iter().position(|c| !c.is_zero()).unwrap_or(0);
                if self.is_zero() {
                    return Ok(TruncatedSeries::zeros(&self.ctx, param, order));
                }
                if vden > vnum {
                    return Err(AlgebraError::PoleAtExpansionPoint(param.to_string()));
                }
                num_c.drain(..vden);
                den_c.drain(..vden);
                let shift = vnum.saturating_sub(vden).min(order + 1);
                // Series inversion of den over fractions in the other parameters.
                let to_expr = |p: &QPoly| ScalarExpr::from_repr(&self.ctx, Repr::Exact(Frac::from_poly(&self.ctx, p.clone())));
                let d0 = to_expr(&den_c[0]).inv()?;
                let mut inv: Vec<ScalarExpr> = Vec::with_capacity(order + 1);
                inv.push(d0.clone());
                for k in 1..=order {
                    let mut acc = ScalarExpr::zero(&self.ctx);
                    for i in 1..=k.min(den_c.len() - 1) {
                        acc = acc.add(&to_expr(&den_c[i]).mul(&inv[k - i]));
                    }
                    inv.push(acc.neg().mul(&d0));
                }
                let mut coeffs = vec![ScalarExpr::zero(&self.ctx); order + 1];
                for k in 0..=order {
                    let mut acc = ScalarExpr::zero(&self.ctx);
                    for i in 0..=k {
                        if i < num_c.len() {
                            acc = acc.add(&to_expr(&num_c[i]).mul(&inv[k - i]));
                        }
                    }
                    coeffs[k] = acc;
                }
                let _ = shift;
                Ok(TruncatedSeries {
                    param: param.to_string(),
                    order,
                    coeffs,
                })
            }
        }
    }

    /// Canonical textual form; `parse` on the result returns an equal value.
    pub fn parse(ctx: &Context, text: &str) -> Result<ScalarExpr, AlgebraError> {
        parser::parse(ctx, text)
    }
}

fn lift_exact(
    ctx: &Context,
    c: &ScalarExpr,
    idx: usize,
    value: &ScalarExpr,
) -> Result<ScalarExpr, AlgebraError> {
    match &*c.repr {
        Repr::Exact(f) => {
            let horner = |p: &QPoly| -> ScalarExpr {
                let coeffs = p.coeffs_in(idx);
                let mut acc = ScalarExpr::zero(ctx);
                for cc in coeffs.iter().rev() {
                    acc = acc.mul(value);
                    acc = acc.add(&ScalarExpr::from_poly(ctx, cc.clone()));
                }
                acc
            };
            horner(&f.num).div(&horner(&f.den))
        }
        Repr::Series(_) => unreachable!("series coefficient inside series"),
    }
}

impl<'a> std::ops::Add for &'a ScalarExpr {
    type Output = ScalarExpr;
    fn add(self, rhs: &'a ScalarExpr) -> ScalarExpr {
        ScalarExpr::add(self, rhs)
    }
}
impl<'a> std::ops::Sub for &'a ScalarExpr {
    type Output = ScalarExpr;
    fn sub(self, rhs: &'a ScalarExpr) -> ScalarExpr {
        ScalarExpr::sub(self, rhs)
    }
}
impl<'a> std::ops::Mul for &'a ScalarExpr {
    type Output = ScalarExpr;
    fn mul(self, rhs: &'a ScalarExpr) -> ScalarExpr {
        ScalarExpr::mul(self, rhs)
    }
}
impl std::ops::Neg for &ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        ScalarExpr::neg(self)
    }
}

/// Truncated power series in one named parameter with `ScalarExpr` coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSeries {
    pub param: String,
    pub order: usize,
    pub coeffs: Vec<ScalarExpr>,
}

impl TruncatedSeries {
    pub fn zeros(ctx: &Context, param: &str, order: usize) -> TruncatedSeries {
        TruncatedSeries {
            param: param.to_string(),
            order,
            coeffs: vec![ScalarExpr::zero(ctx); order + 1],
        }
    }

    pub fn coeff(&self, k: usize) -> &ScalarExpr {
        &self.coeffs[k]
    }

    fn check_compat(&self, other: &TruncatedSeries) {
        assert_eq!(self.param, other.param, "series in different parameters");
        assert_eq!(self.order, other.order, "series of different orders");
    }

    pub fn add(&self, other: &TruncatedSeries) -> TruncatedSeries {
        self.check_compat(other);
        TruncatedSeries {
            param: self.param.clone(),
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn mul(&self, other: &TruncatedSeries) -> TruncatedSeries {
        self.check_compat(other);
        let ctx = self.coeffs[0].context().clone();
        let mut out = vec![ScalarExpr::zero(&ctx); self.order + 1];
        for i in 0..=self.order {
            if self.coeffs[i].is_zero() {
                continue;
            }
            for j in 0..=(self.order - i) {
                if other.coeffs[j].is_zero() {
                    continue;
                }
                out[i + j] = out[i + j].add(&self.coeffs[i].mul(&other.coeffs[j]));
            }
        }
        TruncatedSeries {
            param: self.param.clone(),
            order: self.order,
            coeffs: out,
        }
    }

    pub fn scale(&self, c: &ScalarExpr) -> TruncatedSeries {
        TruncatedSeries {
            param: self.param.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|x| x.mul(c)).collect(),
        }
    }

    /// Square root with result constant term positive rational; the constant
    /// term must be a perfect square (after scaling it is 1).
    pub fn sqrt(&self) -> Result<TruncatedSeries, AlgebraError> {
        let ctx = self.coeffs[0].context().clone();
        let c0 = &self.coeffs[0];
        if c0.is_zero() {
            return Err(AlgebraError::ZeroConstantTerm);
        }
        let root = if c0.is_one() {
            ScalarExpr::one(&ctx)
        } else {
            let r = c0.as_rational().ok_or(AlgebraError::NotAPerfectSquare)?;
            if r.is_negative() {
                return Err(AlgebraError::NotAPerfectSquare);
            }
            let ns = r.numer().sqrt();
            let ds = r.denom().sqrt();
            if &ns * &ns != *r.numer() || &ds * &ds != *r.denom() {
                return Err(AlgebraError::NotAPerfectSquare);
            }
            ScalarExpr::from_rational(&ctx, BigRational::new(ns, ds))
        };
        // Normalize to unit constant term, take the sqrt there, scale back.
        let c0_inv = c0.inv()?;
        let a: Vec<ScalarExpr> = self.coeffs.iter().map(|c| c.mul(&c0_inv)).collect();
        let half = ScalarExpr::ratio(&ctx, 1, 2);
        let mut b = vec![ScalarExpr::zero(&ctx); self.order + 1];
        b[0] = ScalarExpr::one(&ctx);
        for n in 1..=self.order {
            let mut acc = a[n].clone();
            for i in 1..n {
                acc = acc.sub(&b[i].mul(&b[n - i]));
            }
            b[n] = acc.mul(&half);
        }
        Ok(TruncatedSeries {
            param: self.param.clone(),
            order: self.order,
            coeffs: b.iter().map(|c| c.mul(&root)).collect(),
        })
    }
}

// ---------------------------------------------------------------------------
// Printing and parsing
// ---------------------------------------------------------------------------

fn fmt_poly(ctx: &Context, p: &QPoly, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if p.is_zero() {
        return write!(f, "0");
    }
    let mut first = true;
    for (mono, coeff) in p.terms.iter().rev() {
        if first {
            first = false;
        } else {
            write!(f, " + ")?;
        }
        let mut parts: Vec<String> = Vec::new();
        let is_const_mono = mono.iter().all(|&e| e == 0);
        if !coeff.is_one() || is_const_mono {
            if coeff.denom().is_one() {
                parts.push(format!("{}", coeff.numer()));
            } else {
                parts.push(format!("({}/{})", coeff.numer(), coeff.denom()));
            }
        }
        for (i, &e) in mono.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if e == 1 {
                parts.push(ctx.names()[i].clone());
            } else {
                parts.push(format!("{}^{}", ctx.names()[i], e));
            }
        }
        write!(f, "{}", parts.join(" * "))?;
    }
    Ok(())
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.repr {
            Repr::Exact(fr) => {
                if fr.den.is_constant() && fr.den.constant_term().is_one() {
                    write!(f, "(")?;
                    fmt_poly(&self.ctx, &fr.num, f)?;
                    write!(f, ")")
                } else {
                    write!(f, "((")?;
                    fmt_poly(&self.ctx, &fr.num, f)?;
                    write!(f, ") / (")?;
                    fmt_poly(&self.ctx, &fr.den, f)?;
                    write!(f, "))")
                }
            }
            Repr::Series(cs) => {
                let (sidx, _) = self.ctx.series_param().unwrap();
                let name = &self.ctx.names()[sidx];
                let mut first = true;
                write!(f, "(")?;
                for (k, c) in cs.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    if !first {
                        write!(f, " + ")?;
                    }
                    first = false;
                    let ce = ScalarExpr::from_repr(&self.ctx, Repr::Exact(c.clone()));
                    match k {
                        0 => write!(f, "{}", ce)?,
                        1 => write!(f, "{} * {}", ce, name)?,
                        _ => write!(f, "{} * {}^{}", ce, name, k)?,
                    }
                }
                if first {
                    write!(f, "0")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Debug for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{}", c)?,
                1 => write!(f, "{} * {}", c, self.param)?,
                _ => write!(f, "{} * {}^{}", c, self.param, k)?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O({}^{})", self.param, self.order + 1)
    }
}

mod parser {
    use super::*;

    #[derive(Debug, Clone, PartialEq)]
    enum Tok {
        Int(BigInt),
        Name(String),
        Plus,
        Minus,
        Star,
        Slash,
        Caret,
        LParen,
        RParen,
    }

    fn lex(s: &str) -> Result<Vec<Tok>, AlgebraError> {
        let mut out = Vec::new();
        let mut it = s.chars().peekable();
        while let Some(&c) = it.peek() {
            match c {
                ' ' | '\t' | '\n' | '\r' => {
                    it.next();
                }
                '+' => {
                    it.next();
                    out.push(Tok::Plus);
                }
                '-' => {
                    it.next();
                    out.push(Tok::Minus);
                }
                '*' => {
                    it.next();
                    out.push(Tok::Star);
                }
                '/' => {
                    it.next();
                    out.push(Tok::Slash);
                }
                '^' => {
                    it.next();
                    out.push(Tok::Caret);
                }
                '(' => {
                    it.next();
                    out.push(Tok::LParen);
                }
                ')' => {
                    it.next();
                    out.push(Tok::RParen);
                }
                '0'..='9' => {
                    let mut n = String::new();
                    while let Some(&d) = it.peek() {
                        if d.is_ascii_digit() {
                            n.push(d);
                            it.next();
                        } else {
                            break;
                        }
                    }
                    out.push(Tok::Int(n.parse().unwrap()));
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let mut n = String::new();
                    while let Some(&d) = it.peek() {
                        if d.is_ascii_alphanumeric() || d == '_' {
                            n.push(d);
                            it.next();
                        } else {
                            break;
                        }
                    }
                    out.push(Tok::Name(n));
                }
                other => {
                    return Err(AlgebraError::Parse(format!("unexpected character `{other}`")));
                }
            }
        }
        Ok(out)
    }

    struct P<'a> {
        ctx: &'a Context,
        toks: Vec<Tok>,
        pos: usize,
    }

    impl<'a> P<'a> {
        fn peek(&self) -> Option<&Tok> {
            self.toks.get(self.pos)
        }
        fn bump(&mut self) -> Option<Tok> {
            let t = self.toks.get(self.pos).cloned();
            if t.is_some() {
                self.pos += 1;
            }
            t
        }
        fn expect(&mut self, t: Tok) -> Result<(), AlgebraError> {
            match self.bump() {
                Some(x) if x == t => Ok(()),
                other => Err(AlgebraError::Parse(format!("expected {t:?}, found {other:?}"))),
            }
        }

        fn expr(&mut self) -> Result<ScalarExpr, AlgebraError> {
            let mut acc = self.term()?;
            loop {
                match self.peek() {
                    Some(Tok::Plus) => {
                        self.bump();
                        acc = acc.add(&self.term()?);
                    }
                    Some(Tok::Minus) => {
                        self.bump();
                        acc = acc.sub(&self.term()?);
                    }
                    _ => return Ok(acc),
                }
            }
        }

        fn term(&mut self) -> Result<ScalarExpr, AlgebraError> {
            let mut acc = self.factor()?;
            loop {
                match self.peek() {
                    Some(Tok::Star) => {
                        self.bump();
                        acc = acc.mul(&self.factor()?);
                    }
                    Some(Tok::Slash) => {
                        self.bump();
                        acc = acc.div(&self.factor()?)?;
                    }
                    _ => return Ok(acc),
                }
            }
        }

        fn factor(&mut self) -> Result<ScalarExpr, AlgebraError> {
            if matches!(self.peek(), Some(Tok::Minus)) {
                self.bump();
                return Ok(self.factor()?.neg());
            }
            let base = self.atom()?;
            if matches!(self.peek(), Some(Tok::Caret)) {
                self.bump();
                let neg = if matches!(self.peek(), Some(Tok::Minus)) {
                    self.bump();
                    true
                } else {
                    false
                };
                match self.bump() {
                    Some(Tok::Int(n)) => {
                        let mut e: i64 = n
                            .try_into()
                            .map_err(|_| AlgebraError::Parse("exponent too large".into()))?;
                        if neg {
                            e = -e;
                        }
                        return base.pow(e);
                    }
                    other => {
                        return Err(AlgebraError::Parse(format!(
                            "expected integer exponent, found {other:?}"
                        )))
                    }
                }
            }
            Ok(base)
        }

        fn atom(&mut self) -> Result<ScalarExpr, AlgebraError> {
            match self.bump() {
                Some(Tok::Int(n)) => Ok(ScalarExpr::from_rational(
                    self.ctx,
                    BigRational::from_integer(n),
                )),
                Some(Tok::Name(n)) => ScalarExpr::param(self.ctx, &n),
                Some(Tok::LParen) => {
                    let e = self.expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(e)
                }
                other => Err(AlgebraError::Parse(format!("unexpected token {other:?}"))),
            }
        }
    }

    pub fn parse(ctx: &Context, text: &str) -> Result<ScalarExpr, AlgebraError> {
        let toks = lex(text)?;
        let mut p = P { ctx, toks, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(AlgebraError::Parse("trailing input".into()));
        }
        Ok(e)
    }
}

/// Canonicalization entry point named after its role; constructors already
/// normalize, so this is the identity on well-formed values.
pub fn normalize(e: &ScalarExpr) -> ScalarExpr {
    e.clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab_ctx() -> Context {
        Context::new(&[("alpha", ParamMode::Exact), ("beta", ParamMode::Exact)]).unwrap()
    }

    #[test]
    fn gcd_reduction() {
        let ctx = Context::empty();
        let e = ScalarExpr::from_int(&ctx, 2).div(&ScalarExpr::from_int(&ctx, 4)).unwrap();
        assert_eq!(e, ScalarExpr::ratio(&ctx, 1, 2));
    }

    #[test]
    fn polynomial_factor_cancellation() {
        // (alpha^2 - 1)/(alpha - 1) = alpha + 1
        let ctx = ab_ctx();
        let a = ScalarExpr::param(&ctx, "alpha").unwrap();
        let one = ScalarExpr::one(&ctx);
        let num = a.mul(&a).sub(&one);
        let den = a.sub(&one);
        let e = num.div(&den).unwrap();
        assert_eq!(e, a.add(&one));
    }

    #[test]
    fn beta_square_rewrites() {
        let ctx = ab_ctx();
        let a = ScalarExpr::param(&ctx, "alpha").unwrap();
        let b = ScalarExpr::param(&ctx, "beta").unwrap();
        let lhs = b.mul(&b);
        let rhs = ScalarExpr::one(&ctx).sub(&a.mul(&a));
        assert!(lhs.try_equals(&rhs).unwrap());
    }

    #[test]
    fn beta_denominator_clears() {
        // 1/beta = beta/(1 - alpha^2)
        let ctx = ab_ctx();
        let a = ScalarExpr::param(&ctx, "alpha").unwrap();
        let b = ScalarExpr::param(&ctx, "beta").unwrap();
        let e = ScalarExpr::one(&ctx).div(&b).unwrap();
        let expect = b
            .div(&ScalarExpr::one(&ctx).sub(&a.mul(&a)))
            .unwrap();
        assert_eq!(e, expect);
        // And beta * (1/beta) = 1.
        assert!(e.mul(&b).is_one());
    }

    #[test]
    fn product_difference_of_squares() {
        let ctx = ab_ctx();
        let a = ScalarExpr::param(&ctx, "alpha").unwrap();
        let one = ScalarExpr::one(&ctx);
        let lhs = a.add(&one).mul(&a.sub(&one));
        let rhs = a.mul(&a).sub(&one);
        assert!(lhs.try_equals(&rhs).unwrap());
    }

    #[test]
    fn n_and_inverse_n_differ() {
        let ctx = Context::new(&[("N", ParamMode::Exact)]).unwrap();
        let n = ScalarExpr::param(&ctx, "N").unwrap();
        let invn = ScalarExpr::one(&ctx).div(&n).unwrap();
        assert!(!n.try_equals(&invn).unwrap());
    }

    #[test]
    fn geometric_series_truncation() {
        let ctx = Context::new(&[("t", ParamMode::Exact)]).unwrap();
        let t = ScalarExpr::param(&ctx, "t").unwrap();
        let e = ScalarExpr::one(&ctx)
            .div(&ScalarExpr::one(&ctx).sub(&t))
            .unwrap();
        let s = e.series_truncate("t", 3).unwrap();
        for k in 0..=3 {
            assert!(s.coeff(k).is_one(), "coefficient {k}");
        }
    }

    #[test]
    fn constant_series() {
        let ctx = Context::new(&[("t", ParamMode::Exact)]).unwrap();
        let e = ScalarExpr::from_int(&ctx, 5);
        let s = e.series_truncate("t", 4).unwrap();
        assert_eq!(s.coeff(0), &ScalarExpr::from_int(&ctx, 5));
        for k in 1..=4 {
            assert!(s.coeff(k).is_zero());
        }
    }

    #[test]
    fn pole_at_expansion_point_rejected() {
        let ctx = Context::new(&[("t", ParamMode::Exact)]).unwrap();
        let t = ScalarExpr::param(&ctx, "t").unwrap();
        let e = ScalarExpr::one(&ctx).div(&t).unwrap();
        assert!(matches!(
            e.series_truncate("t", 2),
            Err(AlgebraError::PoleAtExpansionPoint(_))
        ));
        // t/t = 1 is fine.
        let f = t.div(&t).unwrap();
        assert!(f.series_truncate("t", 2).unwrap().coeff(0).is_one());
    }

    #[test]
    fn sqrt_of_one_minus_4t() {
        let ctx = Context::new(&[("t", ParamMode::Exact)]).unwrap();
        let t = ScalarExpr::param(&ctx, "t").unwrap();
        let e = ScalarExpr::one(&ctx).sub(&ScalarExpr::from_int(&ctx, 4).mul(&t));
        let s = e.series_truncate("t", 3).unwrap();
        let r = s.sqrt().unwrap();
        // 1 - 2t - 2t^2 - 4t^3
        assert!(r.coeff(0).is_one());
        assert_eq!(r.coeff(1), &ScalarExpr::from_int(&ctx, -2));
        assert_eq!(r.coeff(2), &ScalarExpr::from_int(&ctx, -2));
        assert_eq!(r.coeff(3), &ScalarExpr::from_int(&ctx, -4));
        // Squaring oracle.
        assert_eq!(r.mul(&r), s);
    }

    #[test]
    fn sqrt_of_constant_four() {
        let ctx = Context::new(&[("t", ParamMode::Exact)]).unwrap();
        let s = ScalarExpr::from_int(&ctx, 4).series_truncate("t", 0).unwrap();
        let r = s.sqrt().unwrap();
        assert_eq!(r.coeff(0), &ScalarExpr::from_int(&ctx, 2));
        // Non-square constant errors.
        let s3 = ScalarExpr::from_int(&ctx, 3).series_truncate("t", 0).unwrap();
        assert!(matches!(s3.sqrt(), Err(AlgebraError::NotAPerfectSquare)));
        let s0 = ScalarExpr::zero(&ctx).series_truncate("t", 0).unwrap();
        assert!(matches!(s0.sqrt(), Err(AlgebraError::ZeroConstantTerm)));
    }

    #[test]
    fn series_mode_arithmetic() {
        let ctx = Context::new(&[("t", ParamMode::Series(4))]).unwrap();
        let t = ScalarExpr::param(&ctx, "t").unwrap();
        let one = ScalarExpr::one(&ctx);
        // 1/(1-t) in series mode is the truncated geometric series.
        let g = one.div(&one.sub(&t)).unwrap();
        let check = one
            .add(&t)
            .add(&t.pow(2).unwrap())
            .add(&t.pow(3).unwrap())
            .add(&t.pow(4).unwrap());
        assert_eq!(g, check);
        // (1-t)*(1/(1-t)) = 1 exactly at this order.
        assert!(one.sub(&t).mul(&g).is_one());
        // Dividing by t is not allowed in series mode.
        assert!(matches!(one.div(&t), Err(AlgebraError::NonUnitSeriesDivision)));
    }

    #[test]
    fn parse_print_roundtrip() {
        let ctx = Context::new(&[
            ("N", ParamMode::Exact),
            ("alpha", ParamMode::Exact),
            ("beta", ParamMode::Exact),
        ])
        .unwrap();
        let cases = [
            "1/2",
            "(alpha + 1) / (alpha - 1)",
            "beta * beta",
            "N^3 - 2/7 * N + 1",
            "-(alpha^2 - 1) / (N * (alpha + 3))",
            "beta / (1 - alpha^2)",
        ];
        for c in cases {
            let e = ScalarExpr::parse(&ctx, c).unwrap();
            let printed = e.to_string();
            let back = ScalarExpr::parse(&ctx, &printed).unwrap();
            assert_eq!(e, back, "roundtrip failed for `{c}` printed as `{printed}`");
        }
    }

    #[test]
    fn undeclared_parameter_is_error() {
        let ctx = Context::empty();
        assert!(matches!(
            ScalarExpr::parse(&ctx, "gamma + 1"),
            Err(AlgebraError::UndeclaredParameter(_))
        ));
    }

    #[test]
    fn normalize_is_idempotent() {
        let ctx = ab_ctx();
        let e = ScalarExpr::parse(&ctx, "(alpha^2 - 1) / (alpha - 1) + beta^3").unwrap();
        assert_eq!(normalize(&e), normalize(&normalize(&e)));
    }

    #[test]
    fn substitute_param_value() {
        let ctx = Context::new(&[("alpha", ParamMode::Exact), ("d", ParamMode::Exact)]).unwrap();
        let e = ScalarExpr::parse(&ctx, "(d - 1) * alpha^2 / (d + alpha)").unwrap();
        let sub = e
            .substitute_param("d", &ScalarExpr::from_int(&ctx, 6))
            .unwrap();
        let expect = ScalarExpr::parse(&ctx, "5 * alpha^2 / (6 + alpha)").unwrap();
        assert_eq!(sub, expect);
    }
}
