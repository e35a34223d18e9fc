//! Rational differential forms in several colored variables.
//!
//! A [`DiffForm`] carries a set of named variables, each with a color and an
//! integer differential degree (`dz` power; recursion kernels use degree -1),
//! and a body that is either a general factored rational expression or a
//! pole-basis sum ([`pole::PoleForm`]) for the forms whose poles sit at the
//! marked points -1, 0, +1. Laurent expansion, residues, the local involution
//! `z -> 1/z`, partial fractions and primitives are all exact.

pub mod laurent;
pub mod pole;
pub mod rat;
pub mod vpoly;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::algebra::{AlgebraError, Context, ScalarExpr};

use laurent::expand_rat;
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use pole::{PoleForm, PoleKey, PoleLoc};
use rat::{vanishing_order, RatExpr};
use vpoly::{VPoly, Var};

#[derive(Debug, Clone, thiserror::Error)]
pub enum FormError {
    #[error("division by a zero expression")]
    DivisionByZero,
    #[error("evaluation hits a pole")]
    EvaluationAtPole,
    #[error("unknown form variable `{0}`")]
    UnknownVariable(String),
    #[error("operation requires differential degree one in `{0}`")]
    WrongDifferentialDegree(String),
    #[error("simple pole in `{0}`: primitive would need a logarithm")]
    SimplePole(String),
    #[error("denominator factor irreducible over the working field: {0}")]
    IrreducibleFactor(String),
    #[error("permutation does not preserve variable colors")]
    ColorMismatch,
    #[error("forms have incompatible variables or differential degrees")]
    IncompatibleVariables,
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Chart marker for a form variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    Finite,
    Infinity,
}

/// Declared variable of a form: name, curve component color, chart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormVariable {
    pub var: Var,
    pub color: usize,
    pub chart: Chart,
}

impl FormVariable {
    pub fn new(name: &str, color: usize) -> FormVariable {
        FormVariable {
            var: Var::new(name),
            color,
            chart: Chart::Finite,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarInfo {
    pub color: usize,
    pub dz: i32,
}

#[derive(Clone, Debug)]
pub enum Body {
    Rat(RatExpr),
    Poles(PoleForm),
}

/// Expansion point of a Laurent expansion.
#[derive(Clone, Debug)]
pub enum LaurentPoint {
    Finite(RatExpr),
    Infinity,
}

impl LaurentPoint {
    pub fn finite_int(ctx: &Context, v: i64) -> LaurentPoint {
        LaurentPoint::Finite(RatExpr::constant(ScalarExpr::from_int(ctx, v)))
    }
}

/// Differential form: rational coefficient times `prod_v dz_v^(e_v)`.
#[derive(Clone, Debug)]
pub struct DiffForm {
    ctx: Context,
    vars: BTreeMap<Var, VarInfo>,
    body: Body,
}

impl DiffForm {
    pub fn new_rat(ctx: &Context, vars: &[(FormVariable, i32)], expr: RatExpr) -> DiffForm {
        let mut map = BTreeMap::new();
        for (fv, dz) in vars {
            map.insert(
                fv.var.clone(),
                VarInfo {
                    color: fv.color,
                    dz: *dz,
                },
            );
        }
        for v in expr.vars() {
            assert!(map.contains_key(&v), "undeclared form variable `{v}`");
        }
        DiffForm {
            ctx: ctx.clone(),
            vars: map,
            body: Body::Rat(expr),
        }
    }

    /// One-form in each listed variable (the common case).
    pub fn one_form(ctx: &Context, vars: &[FormVariable], expr: RatExpr) -> DiffForm {
        let declared: Vec<(FormVariable, i32)> = vars.iter().map(|v| (v.clone(), 1)).collect();
        Self::new_rat(ctx, &declared, expr)
    }

    pub fn from_poles(p: PoleForm, colors: &BTreeMap<Var, usize>) -> DiffForm {
        let mut map = BTreeMap::new();
        for v in &p.vars {
            map.insert(
                v.clone(),
                VarInfo {
                    color: colors.get(v).copied().unwrap_or(0),
                    dz: 1,
                },
            );
        }
        DiffForm {
            ctx: p.ctx.clone(),
            vars: map,
            body: Body::Poles(p),
        }
    }

    pub fn zero_like(&self) -> DiffForm {
        DiffForm {
            ctx: self.ctx.clone(),
            vars: self.vars.clone(),
            body: Body::Rat(RatExpr::zero(&self.ctx)),
        }
    }

    pub fn scalar(c: ScalarExpr) -> DiffForm {
        DiffForm {
            ctx: c.context().clone(),
            vars: BTreeMap::new(),
            body: Body::Rat(RatExpr::constant(c)),
        }
    }

    pub fn context(&self) -> &Context {
        &self.ctx
    }

    pub fn vars(&self) -> &BTreeMap<Var, VarInfo> {
        &self.vars
    }

    pub fn var_names(&self) -> Vec<Var> {
        self.vars.keys().cloned().collect()
    }

    pub fn dz_power(&self, v: &Var) -> i32 {
        self.vars.get(v).map(|i| i.dz).unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        match &self.body {
            Body::Rat(r) => r.is_zero(),
            Body::Poles(p) => p.is_zero(),
        }
    }

    pub fn body(&self) -> &Body {
        &self.body
    }

    /// Coefficient as a single rational expression (may be large).
    pub fn body_rat(&self) -> RatExpr {
        match &self.body {
            Body::Rat(r) => r.clone(),
            Body::Poles(p) => p.to_rat(),
        }
    }

    /// Pole-basis body when representable there.
    pub fn body_poles(&self) -> Option<PoleForm> {
        match &self.body {
            Body::Poles(p) => Some(p.clone()),
            Body::Rat(r) => {
                let vars: BTreeSet<Var> = self.vars.keys().cloned().collect();
                rat_to_poles(r, &vars)
            }
        }
    }

    /// Re-express in the pole basis in place when possible.
    pub fn compact(self) -> DiffForm {
        if matches!(self.body, Body::Poles(_)) {
            return self;
        }
        if self.vars.values().any(|i| i.dz != 1) {
            return self;
        }
        match self.body_poles() {
            Some(p) => DiffForm {
                ctx: self.ctx,
                vars: self.vars,
                body: Body::Poles(p),
            },
            None => self,
        }
    }

    pub fn scale(&self, c: &ScalarExpr) -> DiffForm {
        let body = match &self.body {
            Body::Rat(r) => Body::Rat(r.scale(c)),
            Body::Poles(p) => Body::Poles(p.scale(c)),
        };
        DiffForm {
            ctx: self.ctx.clone(),
            vars: self.vars.clone(),
            body,
        }
    }

    pub fn neg(&self) -> DiffForm {
        self.scale(&ScalarExpr::from_int(&self.ctx, -1))
    }

    pub fn add(&self, other: &DiffForm) -> Result<DiffForm, FormError> {
        if self.is_zero() && self.vars.is_empty() {
            return Ok(other.clone());
        }
        if other.is_zero() && other.vars.is_empty() {
            return Ok(self.clone());
        }
        if self.vars != other.vars {
            return Err(FormError::IncompatibleVariables);
        }
        let body = match (&self.body, &other.body) {
            (Body::Poles(a), Body::Poles(b)) => Body::Poles(a.add(b)),
            (Body::Rat(a), Body::Rat(b)) => Body::Rat(a.add(b)),
            (a, b) => {
                let ra = match a {
                    Body::Rat(r) => r.clone(),
                    Body::Poles(p) => p.to_rat(),
                };
                let rb = match b {
                    Body::Rat(r) => r.clone(),
                    Body::Poles(p) => p.to_rat(),
                };
                Body::Rat(ra.add(&rb))
            }
        };
        Ok(DiffForm {
            ctx: self.ctx.clone(),
            vars: self.vars.clone(),
            body,
        })
    }

    pub fn sub(&self, other: &DiffForm) -> Result<DiffForm, FormError> {
        self.add(&other.neg())
    }

    /// Product over disjoint variable sets (tensor of forms).
    pub fn mul(&self, other: &DiffForm) -> Result<DiffForm, FormError> {
        for v in other.vars.keys() {
            if self.vars.contains_key(v) {
                return Err(FormError::IncompatibleVariables);
            }
        }
        let mut vars = self.vars.clone();
        vars.extend(other.vars.iter().map(|(v, i)| (v.clone(), *i)));
        let body = match (&self.body, &other.body) {
            (Body::Poles(a), Body::Poles(b)) => Body::Poles(a.tensor(b)),
            _ => Body::Rat(self.body_rat().mul(&other.body_rat())),
        };
        Ok(DiffForm {
            ctx: self.ctx.clone(),
            vars,
            body,
        })
    }

    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> DiffForm {
        let vars = self
            .vars
            .iter()
            .map(|(v, i)| (map.get(v).cloned().unwrap_or_else(|| v.clone()), *i))
            .collect();
        let body = match &self.body {
            Body::Rat(r) => Body::Rat(r.rename(map)),
            Body::Poles(p) => Body::Poles(p.rename(map)),
        };
        DiffForm {
            ctx: self.ctx.clone(),
            vars,
            body,
        }
    }

    /// Substitute `v -> 1/v`, transforming the differential factors.
    pub fn involute(&self, v: &Var) -> Result<DiffForm, FormError> {
        let info = *self
            .vars
            .get(v)
            .ok_or_else(|| FormError::UnknownVariable(v.name().into()))?;
        match &self.body {
            Body::Poles(p) if info.dz == 1 => Ok(DiffForm {
                ctx: self.ctx.clone(),
                vars: self.vars.clone(),
                body: Body::Poles(p.involute(v)),
            }),
            _ => {
                let mut r = self.body_rat().sub_recip(v);
                let e = info.dz;
                // dz -> -dz/v^2, applied e times (negative e inverts).
                if e != 0 {
                    if e % 2 != 0 {
                        r = r.neg();
                    }
                    let power = 2 * e.unsigned_abs();
                    let vp = VPoly::var(&self.ctx, v).pow(power);
                    if e > 0 {
                        r = r
                            .mul(&RatExpr {
                                num: VPoly::one(&self.ctx),
                                den: vec![(VPoly::var(&self.ctx, v), power)],
                            })
                            .normalized();
                    } else {
                        r = r.mul(&RatExpr::from_poly(vp));
                    }
                }
                Ok(DiffForm {
                    ctx: self.ctx.clone(),
                    vars: self.vars.clone(),
                    body: Body::Rat(r),
                })
            }
        }
    }

    /// Linear loop-equation operator in `v`: `f + involute_v(f)`.
    pub fn s_op(&self, v: &Var) -> Result<DiffForm, FormError> {
        self.add(&self.involute(v)?)
    }

    /// Laurent expansion in `v`. Coefficients are forms in the remaining
    /// variables; the differential factor `dz_v^(e)` is factored out. At
    /// infinity the expansion runs in the chart `w = 1/v` after pullback.
    pub fn laurent(
        &self,
        v: &Var,
        point: &LaurentPoint,
        window: (i64, i64),
    ) -> Result<LaurentExpansion, FormError> {
        let info = self
            .vars
            .get(v)
            .copied()
            .ok_or_else(|| FormError::UnknownVariable(v.name().into()))?;
        match point {
            LaurentPoint::Infinity => {
                let pulled = self.involute(v)?;
                let mut exp = pulled.laurent(
                    v,
                    &LaurentPoint::finite_int(&self.ctx, 0),
                    window,
                )?;
                exp.point = LaurentPoint::Infinity;
                Ok(exp)
            }
            LaurentPoint::Finite(p) => {
                let series = expand_rat(&self.body_rat(), v, p, window.1)?;
                let mut rest_vars = self.vars.clone();
                rest_vars.remove(v);
                let mut coeffs = BTreeMap::new();
                for e in window.0..=window.1 {
                    let c = series
                        .coeff(e)
                        .cloned()
                        .unwrap_or_else(|| RatExpr::zero(&self.ctx));
                    coeffs.insert(
                        e,
                        DiffForm {
                            ctx: self.ctx.clone(),
                            vars: rest_vars.clone(),
                            body: Body::Rat(c),
                        },
                    );
                }
                Ok(LaurentExpansion {
                    var: v.clone(),
                    dz_power: info.dz,
                    point: point.clone(),
                    window,
                    coeffs,
                })
            }
        }
    }

    /// Residue in `v` at a point; requires differential degree one in `v`.
    pub fn residue(&self, v: &Var, point: &LaurentPoint) -> Result<DiffForm, FormError> {
        let info = self
            .vars
            .get(v)
            .copied()
            .ok_or_else(|| FormError::UnknownVariable(v.name().into()))?;
        if info.dz != 1 {
            return Err(FormError::WrongDifferentialDegree(v.name().into()));
        }
        // Pole-basis fast path at the marked points.
        if let (Body::Poles(p), LaurentPoint::Finite(fp)) = (&self.body, point) {
            if let Some(c) = fp.as_constant().and_then(|c| c.as_rational()) {
                if c.denom().is_one() {
                    if let Some(loc) = c.numer().try_into().ok().and_then(PoleLoc::from_value) {
                        let res = p.residue(v, loc);
                        let mut vars = self.vars.clone();
                        vars.remove(v);
                        return Ok(DiffForm {
                            ctx: self.ctx.clone(),
                            vars,
                            body: Body::Poles(res),
                        });
                    }
                }
            }
        }
        match point {
            LaurentPoint::Infinity => {
                let pulled = self.involute(v)?;
                pulled.residue(v, &LaurentPoint::finite_int(&self.ctx, 0))
            }
            LaurentPoint::Finite(_) => {
                let exp = self.laurent(v, point, (-1, -1))?;
                let mut c = exp.coeffs.into_values().next().unwrap();
                c.vars.remove(v);
                Ok(c)
            }
        }
    }

    /// Permutation symmetry. The map must be a color-preserving bijection of
    /// the form's variables.
    pub fn is_symmetric(&self, perm: &BTreeMap<Var, Var>) -> Result<bool, FormError> {
        for (a, b) in perm {
            let ia = self
                .vars
                .get(a)
                .ok_or_else(|| FormError::UnknownVariable(a.name().into()))?;
            let ib = self
                .vars
                .get(b)
                .ok_or_else(|| FormError::UnknownVariable(b.name().into()))?;
            if ia.color != ib.color {
                return Err(FormError::ColorMismatch);
            }
        }
        let renamed = self.rename(perm);
        Ok(self.equal(&renamed))
    }

    /// Value equality (independent of body representation).
    pub fn equal(&self, other: &DiffForm) -> bool {
        if self.vars != other.vars {
            return false;
        }
        match (&self.body, &other.body) {
            (Body::Poles(a), Body::Poles(b)) => a == b,
            _ => self.body_rat().eq_rat(&other.body_rat()),
        }
    }

    /// Partial-fraction decomposition in `v`.
    pub fn partial_fractions(&self, v: &Var) -> Result<PartialFractions, FormError> {
        let info = self
            .vars
            .get(v)
            .copied()
            .ok_or_else(|| FormError::UnknownVariable(v.name().into()))?;
        let expr = self.body_rat();
        let ctx = self.ctx.clone();
        // Collect linear-in-v pole locations with multiplicity.
        let mut poles: Vec<(RatExpr, u32)> = Vec::new();
        let mut rest_factors: Vec<(VPoly, u32)> = Vec::new();
        for (f, m) in &expr.den {
            if !f.depends_on(v) {
                rest_factors.push((f.clone(), *m));
                continue;
            }
            for (root, mult) in split_linear_roots(f, v)? {
                add_pole(&mut poles, root, mult * m);
            }
        }
        let _ = rest_factors;
        // Polar coefficients via exact Laurent windows at each pole.
        let mut terms = Vec::new();
        let mut polar_sum = RatExpr::zero(&ctx);
        for (root, m) in &poles {
            let series = expand_rat(&expr, v, root, -1)?;
            for k in 1..=*m {
                let c = match series.coeff(-(k as i64)) {
                    Some(c) if !c.is_zero() => c.clone(),
                    _ => continue,
                };
                // c / (v - root)^k
                let pd = root.den_poly();
                let lin = VPoly::var(&ctx, v).mul(&pd).sub(&root.num);
                let den_term = RatExpr {
                    num: pd.pow(k),
                    den: vec![(lin, k)],
                }
                .normalized();
                polar_sum = polar_sum.add(&c.mul(&den_term));
                let mut rest_vars = self.vars.clone();
                rest_vars.remove(v);
                terms.push(PartialFractionTerm {
                    pole: root.clone(),
                    order: k,
                    coeff: DiffForm {
                        ctx: ctx.clone(),
                        vars: rest_vars,
                        body: Body::Rat(c),
                    },
                });
            }
        }
        let poly = expr.sub(&polar_sum);
        if poly.den.iter().any(|(f, _)| f.depends_on(v)) {
            return Err(FormError::IrreducibleFactor(format!(
                "residual v-dependent denominator in partial fractions over `{v}`"
            )));
        }
        Ok(PartialFractions {
            var: v.clone(),
            dz_power: info.dz,
            var_info: self.vars.clone(),
            poly_part: DiffForm {
                ctx: ctx.clone(),
                vars: self.vars.clone(),
                body: Body::Rat(poly),
            },
            terms,
        })
    }

    /// Primitive in `v` vanishing at `basepoint`. Requires dz degree one and
    /// no simple pole in `v`; the result has differential degree zero in `v`.
    pub fn primitive_from(&self, v: &Var, basepoint: &RatExpr) -> Result<DiffForm, FormError> {
        let info = self
            .vars
            .get(v)
            .copied()
            .ok_or_else(|| FormError::UnknownVariable(v.name().into()))?;
        if info.dz != 1 {
            return Err(FormError::WrongDifferentialDegree(v.name().into()));
        }
        let ctx = self.ctx.clone();
        let pf = self.partial_fractions(v)?;
        let mut acc = RatExpr::zero(&ctx);
        for t in &pf.terms {
            if t.order == 1 {
                return Err(FormError::SimplePole(v.name().into()));
            }
            // integral of (v-r)^-k is (v-r)^(1-k)/(1-k)
            let k = t.order;
            let pd = t.pole.den_poly();
            let lin = VPoly::var(&ctx, v).mul(&pd).sub(&t.pole.num);
            let anti = RatExpr {
                num: pd.pow(k - 1),
                den: vec![(lin, k - 1)],
            }
            .normalized()
            .scale(
                &ScalarExpr::from_int(&ctx, 1i64 - k as i64)
                    .inv()
                    .expect("nonzero"),
            );
            acc = acc.add(&t.coeff.body_rat().mul(&anti));
        }
        // Polynomial part integrates termwise.
        let poly = pf.poly_part.body_rat();
        if !poly.is_zero() {
            let coeffs = poly.num.coeffs_in(v);
            let mut int_num = VPoly::zero(&ctx);
            for (e, c) in coeffs.iter().enumerate() {
                let scaled = c.scale(
                    &ScalarExpr::from_int(&ctx, (e + 1) as i64)
                        .inv()
                        .expect("nonzero"),
                );
                int_num = int_num.add(&scaled.mul(&VPoly::var(&ctx, v).pow((e + 1) as u32)));
            }
            acc = acc.add(&RatExpr {
                num: int_num,
                den: poly.den.clone(),
            });
        }
        // Fix the constant so the primitive vanishes at the basepoint.
        let at_base = acc.eval_at(v, basepoint)?;
        let fixed = acc.sub(&at_base);
        let mut vars = self.vars.clone();
        vars.get_mut(v).unwrap().dz = 0;
        Ok(DiffForm {
            ctx,
            vars,
            body: Body::Rat(fixed),
        })
    }

    /// Derivative of the coefficient in `v` (raises dz degree by one), the
    /// exact inverse of `primitive_from` up to the integration constant.
    pub fn differentiate(&self, v: &Var) -> Result<DiffForm, FormError> {
        let mut vars = self.vars.clone();
        let info = vars
            .get_mut(v)
            .ok_or_else(|| FormError::UnknownVariable(v.name().into()))?;
        info.dz += 1;
        Ok(DiffForm {
            ctx: self.ctx.clone(),
            vars,
            body: Body::Rat(self.body_rat().derivative(v)),
        })
    }

    /// Evaluate (substitute) a variable at a rational point. The variable must
    /// have differential degree zero.
    pub fn eval_var(&self, v: &Var, value: &RatExpr) -> Result<DiffForm, FormError> {
        let info = self
            .vars
            .get(v)
            .copied()
            .ok_or_else(|| FormError::UnknownVariable(v.name().into()))?;
        if info.dz != 0 {
            return Err(FormError::WrongDifferentialDegree(v.name().into()));
        }
        let r = self.body_rat().eval_at(v, value)?;
        let mut vars = self.vars.clone();
        vars.remove(v);
        Ok(DiffForm {
            ctx: self.ctx.clone(),
            vars,
            body: Body::Rat(r),
        })
    }

    /// Locations (over the marked points) where the form has poles in `v`,
    /// with orders, read from the factored denominator.
    pub fn pole_audit(&self, v: &Var) -> Vec<(String, u32)> {
        match &self.body {
            Body::Poles(p) => {
                let mut out = Vec::new();
                for loc in [PoleLoc::MinusOne, PoleLoc::Zero, PoleLoc::PlusOne] {
                    let ord = p.pole_order(v, loc);
                    if ord > 0 {
                        out.push((format!("{}", loc.value()), ord));
                    }
                }
                out
            }
            Body::Rat(r) => {
                let ctx = &self.ctx;
                let mut out = Vec::new();
                for val in [-1i64, 0, 1] {
                    let point = RatExpr::constant(ScalarExpr::from_int(ctx, val));
                    let ord = r.den_vanishing_order(v, &point);
                    if ord > 0 {
                        out.push((format!("{val}"), ord));
                    }
                }
                // Any factor vanishing nowhere on {-1,0,1} but depending on v
                // is an off-marked pole; report it textually.
                for (f, m) in &r.den {
                    if !f.depends_on(v) {
                        continue;
                    }
                    let marked: u32 = [-1i64, 0, 1]
                        .iter()
                        .map(|&val| {
                            vanishing_order(
                                f,
                                v,
                                &RatExpr::constant(ScalarExpr::from_int(ctx, val)),
                            )
                        })
                        .sum();
                    if (marked as usize) < f.degree_in(v) as usize {
                        out.push((format!("factor of degree {}", f.degree_in(v)), *m));
                    }
                }
                out
            }
        }
    }
}

fn add_pole(poles: &mut Vec<(RatExpr, u32)>, root: RatExpr, mult: u32) {
    for (r, m) in poles.iter_mut() {
        if r.eq_rat(&root) {
            *m += mult;
            return;
        }
    }
    poles.push((root, mult));
}

/// Split a denominator factor into linear-in-`v` roots. Tries the marked
/// points, then (for constant-coefficient factors) rational root candidates.
fn split_linear_roots(f: &VPoly, v: &Var) -> Result<Vec<(RatExpr, u32)>, FormError> {
    let ctx = &f.ctx;
    let mut cur = f.clone();
    let mut roots: Vec<(RatExpr, u32)> = Vec::new();
    loop {
        let deg = cur.degree_in(v);
        if deg == 0 {
            return Ok(roots);
        }
        if deg == 1 {
            // a*v + b with a, b free of v: root = -b/a.
            let cs = cur.coeffs_in(v);
            let a = RatExpr::from_poly(cs[1].clone());
            let b = RatExpr::from_poly(cs[0].clone());
            let root = b.neg().div(&a)?;
            add_pole(&mut roots, root, 1);
            return Ok(roots);
        }
        let mut advanced = false;
        for cand in root_candidates(&cur, v) {
            let ord = vanishing_order(&cur, v, &cand);
            if ord > 0 {
                let pd = cand.den_poly();
                let lin = VPoly::var(ctx, v).mul(&pd).sub(&cand.num);
                for _ in 0..ord {
                    let d = cur.degree_in(v);
                    let mut scaled = cur.clone();
                    for _ in 0..d {
                        scaled = scaled.mul(&pd);
                    }
                    cur = scaled.div_exact(&lin).expect("root divides");
                }
                add_pole(&mut roots, cand, ord);
                advanced = true;
                break;
            }
        }
        if !advanced {
            return Err(FormError::IrreducibleFactor(format!(
                "degree-{deg} factor in `{v}`"
            )));
        }
    }
}

/// Candidate roots: the marked points plus rational root candidates for
/// constant-coefficient factors.
fn root_candidates(f: &VPoly, v: &Var) -> Vec<RatExpr> {
    let ctx = &f.ctx;
    let mut out = vec![
        RatExpr::constant(ScalarExpr::from_int(ctx, 0)),
        RatExpr::one(ctx),
        RatExpr::constant(ScalarExpr::from_int(ctx, -1)),
    ];
    let coeffs = f.coeffs_in(v);
    let rationals: Option<Vec<BigRational>> = coeffs
        .iter()
        .map(|c| c.as_constant().and_then(|s| s.as_rational()))
        .collect();
    if let Some(rs) = rationals {
        // Clear denominators, then p/q with p | a0, q | lead.
        let mut lcm = BigInt::one();
        for r in &rs {
            lcm = num::Integer::lcm(&lcm, r.denom());
        }
        let ints: Vec<BigInt> = rs.iter().map(|r| r.numer() * (&lcm / r.denom())).collect();
        let trailing = ints.iter().find(|c| !c.is_zero()).cloned().unwrap_or_default();
        let leading = ints.last().cloned().unwrap_or_default();
        let bound = BigInt::from(1000u32);
        if !trailing.is_zero() && trailing.abs() < bound && leading.abs() < bound {
            let p_divs = small_divisors(&trailing);
            let q_divs = small_divisors(&leading);
            for p in &p_divs {
                for q in &q_divs {
                    for sign in [1i64, -1] {
                        let r = BigRational::new(p * BigInt::from(sign), q.clone());
                        out.push(RatExpr::constant(ScalarExpr::from_rational(ctx, r)));
                    }
                }
            }
        }
    }
    out
}

fn small_divisors(n: &BigInt) -> Vec<BigInt> {
    let n: i64 = n.abs().try_into().unwrap_or(0);
    let mut out = Vec::new();
    let mut d = 1i64;
    while d * d <= n {
        if n % d == 0 {
            out.push(BigInt::from(d));
            out.push(BigInt::from(n / d));
        }
        d += 1;
    }
    out.sort();
    out.dedup();
    out
}

/// Exact windowed expansion of a form in one variable.
pub struct LaurentExpansion {
    pub var: Var,
    pub dz_power: i32,
    pub point: LaurentPoint,
    pub window: (i64, i64),
    pub coeffs: BTreeMap<i64, DiffForm>,
}

impl LaurentExpansion {
    pub fn coeff(&self, k: i64) -> Option<&DiffForm> {
        self.coeffs.get(&k)
    }
}

pub struct PartialFractionTerm {
    pub pole: RatExpr,
    pub order: u32,
    pub coeff: DiffForm,
}

pub struct PartialFractions {
    pub var: Var,
    pub dz_power: i32,
    var_info: BTreeMap<Var, VarInfo>,
    pub poly_part: DiffForm,
    pub terms: Vec<PartialFractionTerm>,
}

impl PartialFractions {
    /// Rebuild the decomposed form exactly.
    pub fn reassemble(&self) -> DiffForm {
        let ctx = self.poly_part.ctx.clone();
        let mut acc = self.poly_part.body_rat();
        for t in &self.terms {
            let pd = t.pole.den_poly();
            let lin = VPoly::var(&ctx, &self.var).mul(&pd).sub(&t.pole.num);
            let den_term = RatExpr {
                num: pd.pow(t.order),
                den: vec![(lin, t.order)],
            }
            .normalized();
            acc = acc.add(&t.coeff.body_rat().mul(&den_term));
        }
        DiffForm {
            ctx,
            vars: self.var_info.clone(),
            body: Body::Rat(acc),
        }
    }
}

/// Convert a factored rational expression to the pole basis when all its
/// poles sit over the marked points.
pub fn rat_to_poles(f: &RatExpr, vars: &BTreeSet<Var>) -> Option<PoleForm> {
    let ctx = f.ctx().clone();
    if f.is_zero() {
        return Some(PoleForm::zero(&ctx, vars.clone()));
    }
    // Find a variable with denominator dependence.
    let den_var = f
        .den
        .iter()
        .flat_map(|(fac, _)| fac.vars())
        .find(|v| vars.contains(v));
    match den_var {
        None => {
            // Pure polynomial: monomials to Pow keys.
            let mut acc = PoleForm::zero(&ctx, vars.clone());
            let den_const = f.den_poly().as_constant()?;
            let scale = den_const.inv().ok()?;
            for (mono, c) in &f.num.terms {
                let mut key = pole::TermKey::new();
                for (v, e) in &mono.0 {
                    if !vars.contains(v) {
                        return None;
                    }
                    key.insert(v.clone(), PoleKey::Pow(*e));
                }
                acc = acc.add(&PoleForm::term(&ctx, vars.clone(), key, c.mul(&scale)));
            }
            Some(acc)
        }
        Some(v) => {
            // Per-location multiplicities in v.
            let mut mult: BTreeMap<PoleLoc, u32> = BTreeMap::new();
            for (fac, m) in &f.den {
                if !fac.depends_on(&v) {
                    continue;
                }
                // Factor must be exactly (v - loc)^1 in canonical form.
                let deg = fac.degree_in(&v);
                let mut remaining = deg;
                for loc in [PoleLoc::MinusOne, PoleLoc::Zero, PoleLoc::PlusOne] {
                    let point = RatExpr::constant(ScalarExpr::from_int(&ctx, loc.value()));
                    let ord = vanishing_order(fac, &v, &point);
                    if ord > 0 {
                        *mult.entry(loc).or_insert(0) += ord * m;
                        remaining -= ord;
                    }
                }
                if remaining != 0 || fac.vars().len() > 1 {
                    return None;
                }
            }
            let mut rest_vars = vars.clone();
            rest_vars.remove(&v);
            let mut acc = PoleForm::zero(&ctx, vars.clone());
            let mut polar_sum = RatExpr::zero(&ctx);
            for (loc, m) in &mult {
                let point = RatExpr::constant(ScalarExpr::from_int(&ctx, loc.value()));
                let series = expand_rat(f, &v, &point, -1).ok()?;
                for k in 1..=*m {
                    let c = match series.coeff(-(k as i64)) {
                        Some(c) if !c.is_zero() => c.clone(),
                        _ => continue,
                    };
                    let sub = rat_to_poles(&c, &rest_vars)?;
                    let lin = VPoly::var(&ctx, &v).sub(&VPoly::constant(ScalarExpr::from_int(
                        &ctx,
                        loc.value(),
                    )));
                    let den_term = RatExpr {
                        num: VPoly::one(&ctx),
                        den: vec![(lin, k)],
                    };
                    polar_sum = polar_sum.add(&c.mul(&den_term));
                    let mut vset = BTreeSet::new();
                    vset.insert(v.clone());
                    let mut key = pole::TermKey::new();
                    key.insert(v.clone(), PoleKey::Pole(*loc, k));
                    let basis = PoleForm::term(&ctx, vset, key, ScalarExpr::one(&ctx));
                    acc = acc.add(&basis.tensor(&sub));
                }
            }
            // Polynomial remainder in v.
            let q = f.sub(&polar_sum);
            if q.den.iter().any(|(fac, _)| fac.depends_on(&v)) {
                return None;
            }
            if !q.is_zero() {
                let coeffs = q.num.coeffs_in(&v);
                for (e, c) in coeffs.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    let piece = RatExpr {
                        num: c.clone(),
                        den: q.den.clone(),
                    }
                    .normalized();
                    let sub = rat_to_poles(&piece, &rest_vars)?;
                    let mut vset = BTreeSet::new();
                    vset.insert(v.clone());
                    let mut key = pole::TermKey::new();
                    if e > 0 {
                        key.insert(v.clone(), PoleKey::Pow(e as u32));
                    }
                    let basis = PoleForm::term(&ctx, vset, key, ScalarExpr::one(&ctx));
                    acc = acc.add(&basis.tensor(&sub));
                }
            }
            Some(acc)
        }
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

fn fmt_vpoly(p: &VPoly, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if p.is_zero() {
        return write!(f, "0");
    }
    let mut first = true;
    for (mono, c) in p.terms.iter().rev() {
        if !first {
            write!(f, " + ")?;
        }
        first = false;
        let mut parts = Vec::new();
        if !c.is_one() || mono.0.is_empty() {
            parts.push(format!("{c}"));
        }
        for (v, e) in &mono.0 {
            if *e == 1 {
                parts.push(v.name().to_string());
            } else {
                parts.push(format!("{}^{}", v.name(), e));
            }
        }
        write!(f, "{}", parts.join(" * "))?;
    }
    Ok(())
}

struct RatDisplay<'a>(&'a RatExpr);
impl fmt::Display for RatDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        fmt_vpoly(&self.0.num, f)?;
        write!(f, ")")?;
        if !self.0.den.is_empty() {
            write!(f, " / (")?;
            let mut first = true;
            for (fac, m) in &self.0.den {
                if !first {
                    write!(f, " * ")?;
                }
                first = false;
                write!(f, "(")?;
                fmt_vpoly(fac, f)?;
                write!(f, ")")?;
                if *m != 1 {
                    write!(f, "^{m}")?;
                }
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for DiffForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.body {
            Body::Rat(r) => {
                write!(f, "{}", RatDisplay(r))?;
            }
            Body::Poles(p) => {
                if p.is_zero() {
                    write!(f, "(0)")?;
                } else {
                    let mut first = true;
                    for (key, c) in &p.terms {
                        if !first {
                            write!(f, " + ")?;
                        }
                        first = false;
                        write!(f, "({c}")?;
                        for (v, k) in key {
                            match k {
                                PoleKey::Pow(m) => {
                                    if *m == 1 {
                                        write!(f, " * {}", v.name())?;
                                    } else {
                                        write!(f, " * {}^{}", v.name(), m)?;
                                    }
                                }
                                PoleKey::Pole(loc, m) => {
                                    let base = match loc {
                                        PoleLoc::Zero => v.name().to_string(),
                                        PoleLoc::PlusOne => format!("({} - 1)", v.name()),
                                        PoleLoc::MinusOne => format!("({} + 1)", v.name()),
                                    };
                                    write!(f, " / {base}^{m}")?;
                                }
                            }
                        }
                        write!(f, ")")?;
                    }
                }
            }
        }
        for (v, info) in &self.vars {
            match info.dz {
                0 => {}
                1 => write!(f, " * dz[{}]", v.name())?,
                e => write!(f, " * dz[{}]^{}", v.name(), e)?,
            }
        }
        Ok(())
    }
}

/// Parse a form in the textual format emitted by `Display`.
pub fn parse_form(
    ctx: &Context,
    decls: &[FormVariable],
    text: &str,
) -> Result<DiffForm, FormError> {
    form_parser::parse(ctx, decls, text)
}

mod form_parser {
    use super::*;

    #[derive(Clone, Debug, PartialEq)]
    enum Tok {
        Int(BigInt),
        Name(String),
        Dz(String),
        Plus,
        Minus,
        Star,
        Slash,
        Caret,
        LParen,
        RParen,
    }

    fn lex(s: &str) -> Result<Vec<Tok>, FormError> {
        let mut out = Vec::new();
        let chars: Vec<char> = s.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            match c {
                ' ' | '\t' | '\n' | '\r' => i += 1,
                '+' => {
                    out.push(Tok::Plus);
                    i += 1;
                }
                '-' => {
                    out.push(Tok::Minus);
                    i += 1;
                }
                '*' => {
                    out.push(Tok::Star);
                    i += 1;
                }
                '/' => {
                    out.push(Tok::Slash);
                    i += 1;
                }
                '^' => {
                    out.push(Tok::Caret);
                    i += 1;
                }
                '(' => {
                    out.push(Tok::LParen);
                    i += 1;
                }
                ')' => {
                    out.push(Tok::RParen);
                    i += 1;
                }
                '0'..='9' => {
                    let mut n = String::new();
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        n.push(chars[i]);
                        i += 1;
                    }
                    out.push(Tok::Int(n.parse().unwrap()));
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let mut n = String::new();
                    while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                        n.push(chars[i]);
                        i += 1;
                    }
                    if n == "dz" && i < chars.len() && chars[i] == '[' {
                        i += 1;
                        let mut name = String::new();
                        while i < chars.len() && chars[i] != ']' {
                            name.push(chars[i]);
                            i += 1;
                        }
                        if i == chars.len() {
                            return Err(FormError::Parse("unterminated dz[...]".into()));
                        }
                        i += 1;
                        out.push(Tok::Dz(name));
                    } else {
                        out.push(Tok::Name(n));
                    }
                }
                other => return Err(FormError::Parse(format!("unexpected character `{other}`"))),
            }
        }
        Ok(out)
    }

    /// Parse value: rational coefficient plus dz exponents.
    #[derive(Clone)]
    struct Val {
        expr: RatExpr,
        dz: BTreeMap<Var, i32>,
    }

    impl Val {
        fn lit(ctx: &Context, e: RatExpr) -> Val {
            let _ = ctx;
            Val {
                expr: e,
                dz: BTreeMap::new(),
            }
        }
        fn mul(&self, o: &Val) -> Val {
            let mut dz = self.dz.clone();
            for (v, e) in &o.dz {
                *dz.entry(v.clone()).or_insert(0) += e;
            }
            dz.retain(|_, e| *e != 0);
            Val {
                expr: self.expr.mul(&o.expr),
                dz,
            }
        }
        fn div(&self, o: &Val) -> Result<Val, FormError> {
            let mut dz = self.dz.clone();
            for (v, e) in &o.dz {
                *dz.entry(v.clone()).or_insert(0) -= e;
            }
            dz.retain(|_, e| *e != 0);
            Ok(Val {
                expr: self.expr.div(&o.expr)?,
                dz,
            })
        }
        fn pow(&self, n: i64) -> Result<Val, FormError> {
            let mut dz = BTreeMap::new();
            for (v, e) in &self.dz {
                let p = e * n as i32;
                if p != 0 {
                    dz.insert(v.clone(), p);
                }
            }
            Ok(Val {
                expr: self.expr.pow(n)?,
                dz,
            })
        }
        fn add(&self, o: &Val) -> Result<Val, FormError> {
            if self.dz != o.dz {
                return Err(FormError::Parse(
                    "added terms carry different differential factors".into(),
                ));
            }
            Ok(Val {
                expr: self.expr.add(&o.expr),
                dz: self.dz.clone(),
            })
        }
        fn neg(&self) -> Val {
            Val {
                expr: self.expr.neg(),
                dz: self.dz.clone(),
            }
        }
    }

    struct P<'a> {
        ctx: &'a Context,
        decls: &'a [FormVariable],
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

        fn var_lookup(&self, name: &str) -> Option<&FormVariable> {
            self.decls.iter().find(|d| d.var.name() == name)
        }

        fn expr(&mut self) -> Result<Val, FormError> {
            let mut acc = self.term()?;
            loop {
                match self.peek() {
                    Some(Tok::Plus) => {
                        self.bump();
                        let t = self.term()?;
                        acc = acc.add(&t)?;
                    }
                    Some(Tok::Minus) => {
                        self.bump();
                        let t = self.term()?;
                        acc = acc.add(&t.neg())?;
                    }
                    _ => return Ok(acc),
                }
            }
        }

        fn term(&mut self) -> Result<Val, FormError> {
            let mut acc = self.factor()?;
            loop {
                match self.peek() {
                    Some(Tok::Star) => {
                        self.bump();
                        let t = self.factor()?;
                        acc = acc.mul(&t);
                    }
                    Some(Tok::Slash) => {
                        self.bump();
                        let t = self.factor()?;
                        acc = acc.div(&t)?;
                    }
                    _ => return Ok(acc),
                }
            }
        }

        fn factor(&mut self) -> Result<Val, FormError> {
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
                            .map_err(|_| FormError::Parse("exponent too large".into()))?;
                        if neg {
                            e = -e;
                        }
                        return base.pow(e);
                    }
                    other => {
                        return Err(FormError::Parse(format!(
                            "expected integer exponent, found {other:?}"
                        )))
                    }
                }
            }
            Ok(base)
        }

        fn atom(&mut self) -> Result<Val, FormError> {
            match self.bump() {
                Some(Tok::Int(n)) => Ok(Val::lit(
                    self.ctx,
                    RatExpr::constant(ScalarExpr::from_rational(
                        self.ctx,
                        BigRational::from_integer(n),
                    )),
                )),
                Some(Tok::Name(n)) => {
                    if let Some(fv) = self.var_lookup(&n) {
                        Ok(Val::lit(self.ctx, RatExpr::var(self.ctx, &fv.var)))
                    } else if self.ctx.index_of(&n).is_some() {
                        Ok(Val::lit(
                            self.ctx,
                            RatExpr::constant(ScalarExpr::param(self.ctx, &n)?),
                        ))
                    } else {
                        Err(FormError::UnknownVariable(n))
                    }
                }
                Some(Tok::Dz(name)) => {
                    let fv = self
                        .var_lookup(&name)
                        .ok_or(FormError::UnknownVariable(name.clone()))?;
                    let mut dz = BTreeMap::new();
                    dz.insert(fv.var.clone(), 1);
                    Ok(Val {
                        expr: RatExpr::one(self.ctx),
                        dz,
                    })
                }
                Some(Tok::LParen) => {
                    let e = self.expr()?;
                    match self.bump() {
                        Some(Tok::RParen) => Ok(e),
                        other => Err(FormError::Parse(format!("expected `)`, found {other:?}"))),
                    }
                }
                other => Err(FormError::Parse(format!("unexpected token {other:?}"))),
            }
        }
    }

    pub fn parse(ctx: &Context, decls: &[FormVariable], text: &str) -> Result<DiffForm, FormError> {
        let toks = lex(text)?;
        let mut p = P {
            ctx,
            decls,
            toks,
            pos: 0,
        };
        let val = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(FormError::Parse("trailing input".into()));
        }
        let declared: Vec<(FormVariable, i32)> = decls
            .iter()
            .map(|d| (d.clone(), val.dz.get(&d.var).copied().unwrap_or(0)))
            .collect();
        Ok(DiffForm::new_rat(ctx, &declared, val.expr))
    }
}

#[cfg(test)]
mod tests;
