//! Truncated multivariate power series (jets) at a base point.
//!
//! A `Jet` is the Taylor expansion of a germ to a fixed total order `N`
//! at a fixed base point; absent coefficients mean zero and arithmetic
//! never reports anything beyond order `N`. Truncation order is carried
//! on every jet and mixing orders is an error - callers widen or
//! truncate explicitly. Coefficient storage is dense over the graded
//! monomial table, which is shared per `(n, order)`.

use crate::error::{Error, Result};
use crate::scalar::{rat, Backend, Scalar};
use num_rational::BigRational;
use num_traits::One;
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

/// Packed exponent vector: exponent of variable `i` in byte `i`.
pub type Mono = u64;

pub fn mono_pack(exps: &[u8]) -> Mono {
    let mut m = 0u64;
    for (i, e) in exps.iter().enumerate() {
        m |= (*e as u64) << (8 * i);
    }
    m
}

pub fn mono_unpack(m: Mono, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((m >> (8 * i)) & 0xff) as u8).collect()
}

pub fn mono_degree(m: Mono, n: usize) -> usize {
    (0..n).map(|i| ((m >> (8 * i)) & 0xff) as usize).sum()
}

/// Monomial table for jets in `n` variables truncated at total order `N`.
/// Monomials are sorted by (degree, lex), so the table for a smaller
/// order is always a prefix.
#[derive(Debug)]
pub struct JetCtx {
    pub n: usize,
    pub order: usize,
    pub monos: Vec<Mono>,
    pub degs: Vec<u32>,
    rank: HashMap<Mono, u32>,
    /// First rank of each degree d (and one past the end at degs_start[N+1]).
    pub degree_start: Vec<usize>,
}

impl JetCtx {
    pub fn get(n: usize, order: usize) -> Arc<JetCtx> {
        static REGISTRY: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetCtx>>>> = OnceLock::new();
        let reg = REGISTRY.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = reg.lock().unwrap();
        map.entry((n, order))
            .or_insert_with(|| Arc::new(JetCtx::build(n, order)))
            .clone()
    }

    fn build(n: usize, order: usize) -> JetCtx {
        assert!(n >= 1 && n <= 8, "jets support 1..=8 variables");
        assert!(order <= 60, "truncation order out of supported range");
        let mut monos: Vec<Vec<u8>> = Vec::new();
        let mut cur = vec![0u8; n];
        fn rec(i: usize, remaining: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
            if i == cur.len() {
                out.push(cur.clone());
                return;
            }
            for e in 0..=remaining {
                cur[i] = e as u8;
                rec(i + 1, remaining - e, cur, out);
            }
            cur[i] = 0;
        }
        rec(0, order, &mut cur, &mut monos);
        monos.sort_by_key(|m| {
            let d: usize = m.iter().map(|&e| e as usize).sum();
            (d, m.clone())
        });
        let packed: Vec<Mono> = monos.iter().map(|m| mono_pack(m)).collect();
        let degs: Vec<u32> = monos
            .iter()
            .map(|m| m.iter().map(|&e| e as u32).sum())
            .collect();
        let mut rank = HashMap::with_capacity(packed.len());
        for (i, m) in packed.iter().enumerate() {
            rank.insert(*m, i as u32);
        }
        let mut degree_start = vec![0usize; order + 2];
        for d in 0..=order {
            degree_start[d] = degs.partition_point(|&x| (x as usize) < d);
        }
        degree_start[order + 1] = packed.len();
        JetCtx { n, order, monos: packed, degs, rank, degree_start }
    }

    pub fn len(&self) -> usize {
        self.monos.len()
    }

    pub fn rank_of(&self, m: Mono) -> Option<usize> {
        self.rank.get(&m).map(|&r| r as usize)
    }
}

#[derive(Clone)]
pub struct Jet {
    pub ctx: Arc<JetCtx>,
    pub base: Arc<Vec<Scalar>>,
    pub backend: Backend,
    pub coeffs: Vec<Scalar>,
}

impl Jet {
    pub fn zero(ctx: &Arc<JetCtx>, base: &Arc<Vec<Scalar>>, backend: &Backend) -> Jet {
        Jet {
            ctx: ctx.clone(),
            base: base.clone(),
            backend: backend.clone(),
            coeffs: vec![Scalar::zero(); ctx.len()],
        }
    }

    pub fn constant(ctx: &Arc<JetCtx>, base: &Arc<Vec<Scalar>>, backend: &Backend, v: Scalar) -> Jet {
        let mut j = Jet::zero(ctx, base, backend);
        j.coeffs[0] = v;
        j
    }

    /// The coordinate function x_i as a jet: base_i + xi_i.
    pub fn coordinate(ctx: &Arc<JetCtx>, base: &Arc<Vec<Scalar>>, backend: &Backend, i: usize) -> Jet {
        assert!(i < ctx.n);
        let mut j = Jet::zero(ctx, base, backend);
        j.coeffs[0] = base[i].clone();
        if ctx.order >= 1 {
            let m = mono_pack(&unit_exp(ctx.n, i));
            let r = ctx.rank_of(m).unwrap();
            j.coeffs[r] = Scalar::one();
        }
        j
    }

    /// Single monomial c * xi^alpha (in the shifted variables).
    pub fn monomial(
        ctx: &Arc<JetCtx>,
        base: &Arc<Vec<Scalar>>,
        backend: &Backend,
        alpha: &[u8],
        c: Scalar,
    ) -> Jet {
        let mut j = Jet::zero(ctx, base, backend);
        let r = ctx.rank_of(mono_pack(alpha)).expect("monomial above order");
        j.coeffs[r] = c;
        j
    }

    pub fn n(&self) -> usize {
        self.ctx.n
    }

    pub fn order(&self) -> usize {
        self.ctx.order
    }

    pub fn const_term(&self) -> &Scalar {
        &self.coeffs[0]
    }

    pub fn coeff(&self, alpha: &[u8]) -> Scalar {
        match self.ctx.rank_of(mono_pack(alpha)) {
            Some(r) => self.coeffs[r].clone(),
            None => Scalar::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// First nonzero coefficient in graded order, as (exponents, value).
    pub fn first_nonzero(&self) -> Option<(Vec<u8>, Scalar)> {
        for (i, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                return Some((mono_unpack(self.ctx.monos[i], self.ctx.n), c.clone()));
            }
        }
        None
    }

    fn check_compatible(&self, other: &Jet) -> Result<()> {
        if self.ctx.n != other.ctx.n {
            return Err(Error::ShapeMismatch(format!(
                "jets in {} vs {} variables",
                self.ctx.n, other.ctx.n
            )));
        }
        if self.ctx.order != other.ctx.order {
            return Err(Error::ShapeMismatch(format!(
                "jet orders {} vs {} (no silent promotion)",
                self.ctx.order, other.ctx.order
            )));
        }
        if !same_base(&self.base, &other.base) {
            return Err(Error::ShapeMismatch("jets at different base points".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Jet) -> Result<Jet> {
        self.check_compatible(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.add(b))
            .collect();
        Ok(Jet {
            ctx: self.ctx.clone(),
            base: self.base.clone(),
            backend: widen(&self.backend, &other.backend),
            coeffs,
        })
    }

    pub fn sub(&self, other: &Jet) -> Result<Jet> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Jet {
        Jet {
            ctx: self.ctx.clone(),
            base: self.base.clone(),
            backend: self.backend.clone(),
            coeffs: self.coeffs.iter().map(|c| c.neg()).collect(),
        }
    }

    pub fn scale(&self, s: &Scalar) -> Jet {
        Jet {
            ctx: self.ctx.clone(),
            base: self.base.clone(),
            backend: widen(&self.backend, &s.backend()),
            coeffs: self.coeffs.iter().map(|c| c.mul(s)).collect(),
        }
    }

    pub fn scale_rat(&self, r: &BigRational) -> Jet {
        self.scale(&Scalar::Rat(r.clone()))
    }

    pub fn mul(&self, other: &Jet) -> Result<Jet> {
        self.check_compatible(other)?;
        let ctx = &self.ctx;
        let order = ctx.order as u32;
        let mut out = vec![Scalar::zero(); ctx.len()];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let di = ctx.degs[i];
            for (j, b) in other.coeffs.iter().enumerate() {
                if di + ctx.degs[j] > order {
                    break;
                }
                if b.is_zero() {
                    continue;
                }
                let m = ctx.monos[i] + ctx.monos[j];
                let r = ctx.rank_of(m).expect("product monomial in table");
                out[r] = out[r].add(&a.mul(b));
            }
        }
        Ok(Jet {
            ctx: self.ctx.clone(),
            base: self.base.clone(),
            backend: widen(&self.backend, &other.backend),
            coeffs: out,
        })
    }

    /// Multiplicative inverse; requires an invertible constant term.
    pub fn inverse(&self) -> Result<Jet> {
        if self.const_term().is_zero() {
            return Err(Error::DivisionByNonUnit);
        }
        let c0 = self.const_term().inv()?;
        // Newton iteration z -> z(2 - a z), doubling correct order each step.
        let mut z = Jet::constant(&self.ctx, &self.base, &self.backend, c0);
        let two = Jet::constant(&self.ctx, &self.base, &self.backend, Scalar::from_int(2));
        let steps = order_steps(self.ctx.order);
        for _ in 0..steps {
            let az = self.mul(&z)?;
            z = z.mul(&two.sub(&az)?)?;
        }
        Ok(z)
    }

    pub fn div(&self, other: &Jet) -> Result<Jet> {
        self.mul(&other.inverse()?)
    }

    /// Partial derivative with respect to variable `i`; order drops by one.
    pub fn derivative(&self, i: usize) -> Jet {
        assert!(self.ctx.order >= 1, "cannot differentiate an order-0 jet");
        let nctx = JetCtx::get(self.ctx.n, self.ctx.order - 1);
        let mut out = vec![Scalar::zero(); nctx.len()];
        for (r, m) in nctx.monos.iter().enumerate() {
            let mm = m + (1u64 << (8 * i));
            if let Some(src) = self.ctx.rank_of(mm) {
                let e = ((mm >> (8 * i)) & 0xff) as i64;
                out[r] = self.coeffs[src].mul(&Scalar::from_int(e));
            }
        }
        Jet { ctx: nctx, base: self.base.clone(), backend: self.backend.clone(), coeffs: out }
    }

    /// d^alpha applied repeatedly, then truncated to `target_order`.
    pub fn derivative_multi(&self, alpha: &[u8], target_order: usize) -> Result<Jet> {
        let total: usize = alpha.iter().map(|&e| e as usize).sum();
        if self.ctx.order < total + target_order {
            return Err(Error::OrderDeficit {
                needed: total + target_order,
                got: self.ctx.order,
                what: "derivative_multi",
            });
        }
        let mut j = self.clone();
        for (i, &e) in alpha.iter().enumerate() {
            for _ in 0..e {
                j = j.derivative(i);
            }
        }
        Ok(j.truncate(target_order))
    }

    /// Restrict to a lower truncation order (prefix copy).
    pub fn truncate(&self, order: usize) -> Jet {
        assert!(order <= self.ctx.order);
        if order == self.ctx.order {
            return self.clone();
        }
        let nctx = JetCtx::get(self.ctx.n, order);
        let coeffs = self.coeffs[..nctx.len()].to_vec();
        Jet { ctx: nctx, base: self.base.clone(), backend: self.backend.clone(), coeffs }
    }

    /// Widen the truncation order, filling the tail with zeros. This is
    /// only exact when the germ is a polynomial of degree <= the current
    /// order; callers assert that by choosing this method.
    pub fn widen_zero_padded(&self, order: usize) -> Jet {
        assert!(order >= self.ctx.order);
        if order == self.ctx.order {
            return self.clone();
        }
        let nctx = JetCtx::get(self.ctx.n, order);
        let mut coeffs = vec![Scalar::zero(); nctx.len()];
        coeffs[..self.coeffs.len()].clone_from_slice(&self.coeffs);
        Jet { ctx: nctx, base: self.base.clone(), backend: self.backend.clone(), coeffs }
    }

    /// Evaluate the truncated polynomial at shift values xi = s.
    pub fn eval_shift(&self, s: &[Scalar]) -> Scalar {
        let mut acc = Scalar::zero();
        for (r, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mut term = c.clone();
            let m = self.ctx.monos[r];
            for (i, sv) in s.iter().enumerate() {
                let e = ((m >> (8 * i)) & 0xff) as i64;
                for _ in 0..e {
                    term = term.mul(sv);
                }
            }
            acc = acc.add(&term);
        }
        acc
    }

    /// Exact composition: self is a jet in m variables, `inner` provides m
    /// jets in the target variables whose constant terms equal self's base.
    pub fn compose(&self, inner: &[Jet]) -> Result<Jet> {
        if inner.len() != self.ctx.n {
            return Err(Error::ShapeMismatch(format!(
                "composition arity {} vs {}",
                inner.len(),
                self.ctx.n
            )));
        }
        for w in inner.windows(2) {
            w[0].check_compatible(&w[1])?;
        }
        let ictx = inner[0].ctx.clone();
        if ictx.order != self.ctx.order {
            return Err(Error::ShapeMismatch(format!(
                "composition orders {} vs {}",
                ictx.order, self.ctx.order
            )));
        }
        for (i, ij) in inner.iter().enumerate() {
            if !ij.const_term().identical(&self.base[i]) {
                return Err(Error::ShapeMismatch(
                    "inner constant terms must match outer base point".into(),
                ));
            }
        }
        let backend = inner
            .iter()
            .fold(self.backend.clone(), |b, j| widen(&b, &j.backend));
        // Shifted inner components (zero constant term), with powers cached.
        let mut pows: Vec<Vec<Jet>> = Vec::with_capacity(inner.len());
        for ij in inner {
            let mut d = ij.clone();
            d.coeffs[0] = Scalar::zero();
            let mut list = vec![Jet::constant(&ictx, &ij.base, &backend, Scalar::one()), d.clone()];
            for _ in 2..=self.ctx.order {
                let next = list.last().unwrap().mul(&d)?;
                list.push(next);
            }
            pows.push(list);
        }
        let mut out = Jet::zero(&ictx, &inner[0].base, &backend);
        for (r, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let m = self.ctx.monos[r];
            let mut term: Option<Jet> = None;
            for i in 0..self.ctx.n {
                let e = ((m >> (8 * i)) & 0xff) as usize;
                if e == 0 {
                    continue;
                }
                term = Some(match term {
                    None => pows[i][e].clone(),
                    Some(t) => t.mul(&pows[i][e])?,
                });
            }
            let term = match term {
                None => Jet::constant(&ictx, &inner[0].base, &backend, c.clone()),
                Some(t) => t.scale(c),
            };
            out = out.add(&term)?;
        }
        Ok(out)
    }

    /// Square root with the backend's designated root of the constant term.
    pub fn sqrt(&self) -> Result<Jet> {
        let c0 = self.const_term().sqrt()?;
        if c0.is_zero() {
            return Err(Error::RootNotRepresentable(
                "sqrt of jet with zero constant term".into(),
            ));
        }
        let mut z = Jet::constant(&self.ctx, &self.base, &self.backend, c0);
        let half = Scalar::from_frac(1, 2);
        let steps = order_steps(self.ctx.order);
        for _ in 0..steps {
            let q = self.div(&z)?;
            z = z.add(&q)?.scale(&half);
        }
        let check = z.mul(&z)?;
        if !check.equals(self) {
            return Err(Error::Invalid("sqrt iteration failed to verify".into()));
        }
        Ok(z)
    }

    /// Exponential. Exact backends require a zero constant term; the float
    /// backend accepts any constant.
    pub fn exp(&self) -> Result<Jet> {
        let c = self.const_term().clone();
        let scale = if c.is_zero() {
            Scalar::one()
        } else {
            match (&self.backend, &c) {
                (Backend::Float(_), Scalar::Flt(f)) => Scalar::Flt(f.exp()),
                (Backend::Float(p), Scalar::Rat(r)) => {
                    Scalar::Flt(crate::scalar::BigFloat::from_rational(r, *p).exp())
                }
                _ => {
                    return Err(Error::RootNotRepresentable(
                        "exp of nonzero constant term in an exact backend".into(),
                    ))
                }
            }
        };
        let mut w = self.clone();
        w.coeffs[0] = Scalar::zero();
        let mut acc = Jet::constant(&self.ctx, &self.base, &self.backend, Scalar::one());
        let mut pw = Jet::constant(&self.ctx, &self.base, &self.backend, Scalar::one());
        let mut fact = BigRational::one();
        for j in 1..=self.ctx.order {
            pw = pw.mul(&w)?;
            fact *= BigRational::from_integer(j.into());
            acc = acc.add(&pw.scale_rat(&fact.recip()))?;
        }
        Ok(acc.scale(&scale))
    }

    /// Rational power a^(p/q); the constant term's q-th root must exist in
    /// the backend. Satisfies (result)^q = a^p to order N by construction.
    pub fn pow_rational(&self, p: i64, q: u32) -> Result<Jet> {
        let c = self.const_term();
        if c.is_zero() {
            return Err(Error::DivisionByNonUnit);
        }
        let c_pow = c.pow_rational(p, q)?;
        // a = c (1 + w); binomial series for (1+w)^(p/q).
        let w = self.scale(&c.inv()?);
        let mut w0 = w;
        w0.coeffs[0] = Scalar::zero();
        let r = rat(p, q as i64);
        let mut acc = Jet::constant(&self.ctx, &self.base, &self.backend, Scalar::one());
        let mut pw = Jet::constant(&self.ctx, &self.base, &self.backend, Scalar::one());
        let mut coef = BigRational::one();
        for j in 1..=self.ctx.order {
            pw = pw.mul(&w0)?;
            let jr = BigRational::from_integer((j as i64).into());
            coef = coef * (&r - (jr.clone() - BigRational::one())) / jr;
            acc = acc.add(&pw.scale_rat(&coef))?;
        }
        Ok(acc.scale(&c_pow))
    }

    pub fn pow_int(&self, e: u32) -> Result<Jet> {
        let mut acc = Jet::constant(&self.ctx, &self.base, &self.backend, Scalar::one());
        for _ in 0..e {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Coefficient-wise equality (exact in exact backends).
    pub fn equals(&self, other: &Jet) -> bool {
        self.check_compatible(other).is_ok()
            && self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .all(|(a, b)| a.equals(b))
    }

    /// Recenter the variables: same germ, base coordinates permuted into a
    /// different variable embedding. `map[i]` gives the target variable for
    /// source variable i; unused target variables get fresh base values.
    pub fn embed(&self, target_n: usize, map: &[usize], target_base: &Arc<Vec<Scalar>>) -> Jet {
        let nctx = JetCtx::get(target_n, self.ctx.order);
        let mut out = vec![Scalar::zero(); nctx.len()];
        for (r, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let src = mono_unpack(self.ctx.monos[r], self.ctx.n);
            let mut dst = vec![0u8; target_n];
            for (i, &e) in src.iter().enumerate() {
                dst[map[i]] = e;
            }
            let nr = nctx.rank_of(mono_pack(&dst)).unwrap();
            out[nr] = c.clone();
        }
        Jet { ctx: nctx, base: target_base.clone(), backend: self.backend.clone(), coeffs: out }
    }
}

fn order_steps(order: usize) -> usize {
    let mut s = 1;
    let mut covered = 1usize;
    while covered < order + 1 {
        covered *= 2;
        s += 1;
    }
    s + 1
}

fn unit_exp(n: usize, i: usize) -> Vec<u8> {
    let mut e = vec![0u8; n];
    e[i] = 1;
    e
}

pub fn same_base(a: &Arc<Vec<Scalar>>, b: &Arc<Vec<Scalar>>) -> bool {
    Arc::ptr_eq(a, b)
        || (a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.identical(y)))
}

pub fn widen(a: &Backend, b: &Backend) -> Backend {
    match (a, b) {
        (Backend::Rational, other) => other.clone(),
        (other, Backend::Rational) => other.clone(),
        (Backend::Float(p), Backend::Float(q)) => Backend::Float(*p.max(q)),
        (Backend::Extension(t), Backend::Extension(_)) => Backend::Extension(t.clone()),
        _ => panic!("cannot mix extension and float backends"),
    }
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet(n={}, N={};", self.ctx.n, self.ctx.order)?;
        let mut shown = 0;
        for (r, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let e = mono_unpack(self.ctx.monos[r], self.ctx.n);
            write!(f, " {:?}:{}", e, c)?;
            shown += 1;
            if shown > 16 {
                write!(f, " ...")?;
                break;
            }
        }
        write!(f, ")")
    }
}

/// A tuple of jets sharing variables, order and base point.
#[derive(Clone, Debug)]
pub struct JetMap {
    pub components: Vec<Jet>,
}

impl JetMap {
    pub fn new(components: Vec<Jet>) -> Result<JetMap> {
        if components.is_empty() {
            return Err(Error::ShapeMismatch("empty jet map".into()));
        }
        for w in components.windows(2) {
            w[0].check_compatible(&w[1])?;
        }
        Ok(JetMap { components })
    }

    pub fn n(&self) -> usize {
        self.components[0].n()
    }

    pub fn order(&self) -> usize {
        self.components[0].order()
    }
}

/// Solve F(x, y) = 0 for y(x) near a seed, by Newton iteration on jets.
///
/// `fs` are m jets in n+m variables (the last m variables are solved for),
/// whose base point is (x0, seed). Verifies F(x0, seed) = 0 and that the
/// m x m Jacobian in the solved variables is invertible, then returns
/// y(x) with F(x, y(x)) identically zero to the requested order
/// (checked by back-substitution).
pub fn solve_implicit(fs: &[Jet], n_free: usize) -> Result<JetMap> {
    let m = fs.len();
    if m == 0 {
        return Err(Error::ShapeMismatch("no equations".into()));
    }
    for w in fs.windows(2) {
        w[0].check_compatible(&w[1])?;
    }
    let total = fs[0].n();
    if total != n_free + m {
        return Err(Error::ShapeMismatch(format!(
            "{m} equations in {total} variables with {n_free} free"
        )));
    }
    let order = fs[0].order();
    for f in fs {
        if !f.const_term().is_zero() {
            return Err(Error::SeedNotRoot);
        }
    }
    let backend = fs
        .iter()
        .fold(Backend::Rational, |b, f| widen(&b, &f.backend));
    let octx = JetCtx::get(n_free, order);
    let obase: Arc<Vec<Scalar>> = Arc::new(fs[0].base[..n_free].to_vec());
    let seed: Vec<Scalar> = fs[0].base[n_free..].to_vec();

    // Constant Jacobian check.
    let jac0: Vec<Vec<Scalar>> = (0..m)
        .map(|j| {
            (0..m)
                .map(|k| {
                    let mut a = vec![0u8; total];
                    a[n_free + k] = 1;
                    fs[j].coeff(&a)
                })
                .collect()
        })
        .collect();
    if crate::linalg::det(&jac0).is_zero() {
        return Err(Error::SingularJacobian);
    }

    let coords: Vec<Jet> = (0..n_free)
        .map(|i| Jet::coordinate(&octx, &obase, &backend, i))
        .collect();
    let mut ys: Vec<Jet> = seed
        .iter()
        .map(|s| Jet::constant(&octx, &obase, &backend, s.clone()))
        .collect();

    // Jacobian jets of F in the solved variables.
    let steps = order_steps(order) + 1;
    for step in 0..=steps {
        let mut inner = coords.clone();
        inner.extend(ys.iter().cloned());
        // Residuals; note F jets widened so composition orders agree.
        let residuals: Vec<Jet> = fs
            .iter()
            .map(|f| f.compose(&inner))
            .collect::<Result<_>>()?;
        if residuals.iter().all(|r| r.is_zero()) {
            return JetMap::new(ys);
        }
        if step == steps {
            break;
        }
        let mut jac: Vec<Vec<Jet>> = Vec::with_capacity(m);
        for f in fs {
            let mut row = Vec::with_capacity(m);
            for k in 0..m {
                // derivative drops the order; recompose at full order by
                // widening (derivative tail is only used below its order).
                let d = f.derivative(n_free + k).widen_zero_padded(order);
                row.push(d.compose(&inner)?);
            }
            jac.push(row);
        }
        let delta = crate::linalg::solve_jet_system(&jac, &residuals)?;
        for (y, d) in ys.iter_mut().zip(delta) {
            *y = y.sub(&d)?;
        }
    }
    Err(Error::SeedNotRoot)
}

/// Invert an n -> n jet map y = phi(u) around its base, returning u(y)
/// with u(phi(u)) = u. The Jacobian must be invertible at the base.
pub fn invert_map(phi: &JetMap) -> Result<JetMap> {
    let n = phi.n();
    let order = phi.order();
    let total = 2 * n;
    let yctx = JetCtx::get(total, order);
    // Combined base: (y0 = phi const terms, u0 = phi base).
    let mut cbase: Vec<Scalar> = phi
        .components
        .iter()
        .map(|c| c.const_term().clone())
        .collect();
    cbase.extend(phi.components[0].base.iter().cloned());
    let cbase = Arc::new(cbase);
    let backend = phi
        .components
        .iter()
        .fold(Backend::Rational, |b, c| widen(&b, &c.backend));
    // F_i(y, u) = phi_i(u) - y_i, jets in 2n variables.
    let map: Vec<usize> = (n..2 * n).collect();
    let mut fs = Vec::with_capacity(n);
    for (i, c) in phi.components.iter().enumerate() {
        let emb = c.embed(total, &map, &cbase);
        let yi = Jet::coordinate(&yctx, &cbase, &backend, i);
        fs.push(emb.sub(&yi)?);
    }
    solve_implicit(&fs, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rctx(n: usize, order: usize) -> (Arc<JetCtx>, Arc<Vec<Scalar>>, Backend) {
        (
            JetCtx::get(n, order),
            Arc::new(vec![Scalar::zero(); n]),
            Backend::Rational,
        )
    }

    fn x(ctx: &Arc<JetCtx>, base: &Arc<Vec<Scalar>>, b: &Backend, i: usize) -> Jet {
        Jet::coordinate(ctx, base, b, i)
    }

    #[test]
    fn difference_of_squares() {
        let (ctx, base, b) = rctx(1, 2);
        let one = Jet::constant(&ctx, &base, &b, Scalar::one());
        let xx = x(&ctx, &base, &b, 0);
        let p = one.add(&xx).unwrap();
        let q = one.sub(&xx).unwrap();
        let prod = p.mul(&q).unwrap();
        let expect = one.sub(&xx.mul(&xx).unwrap()).unwrap();
        assert!(prod.equals(&expect));
    }

    #[test]
    fn geometric_series() {
        let (ctx, base, b) = rctx(1, 3);
        let one = Jet::constant(&ctx, &base, &b, Scalar::one());
        let xx = x(&ctx, &base, &b, 0);
        let q = one.sub(&xx).unwrap();
        let inv = one.div(&q).unwrap();
        for k in 0..=3u8 {
            assert!(inv.coeff(&[k]).equals(&Scalar::one()));
        }
    }

    #[test]
    fn truncation_drops_high_degree() {
        let (ctx, base, b) = rctx(1, 2);
        let xx = x(&ctx, &base, &b, 0);
        let x2 = xx.mul(&xx).unwrap();
        let x3 = x2.mul(&xx).unwrap();
        assert!(x3.is_zero());
        let s = x2.add(&x3).unwrap();
        assert!(s.equals(&x2));
    }

    #[test]
    fn compose_square_of_x_plus_x2() {
        // outer = u^2, inner = x + x^2, order 3 -> x^2 + 2x^3
        let n = 3;
        let ctx1 = JetCtx::get(1, n);
        let base0 = Arc::new(vec![Scalar::zero()]);
        let b = Backend::Rational;
        let u = Jet::coordinate(&ctx1, &base0, &b, 0);
        let outer = u.mul(&u).unwrap();
        let inner = u.add(&u.mul(&u).unwrap()).unwrap();
        let res = outer.compose(&[inner]).unwrap();
        assert!(res.coeff(&[2]).equals(&Scalar::one()));
        assert!(res.coeff(&[3]).equals(&Scalar::from_int(2)));
        assert!(res.coeff(&[1]).is_zero());
    }

    #[test]
    fn compose_bilinear() {
        // outer = u1 u2, inner = (x, -x), order 2 -> -x^2
        let ctx2 = JetCtx::get(2, 2);
        let base2 = Arc::new(vec![Scalar::zero(); 2]);
        let b = Backend::Rational;
        let u1 = Jet::coordinate(&ctx2, &base2, &b, 0);
        let u2 = Jet::coordinate(&ctx2, &base2, &b, 1);
        let outer = u1.mul(&u2).unwrap();
        let ctx1 = JetCtx::get(1, 2);
        let base1 = Arc::new(vec![Scalar::zero()]);
        let xx = Jet::coordinate(&ctx1, &base1, &b, 0);
        let res = outer.compose(&[xx.clone(), xx.neg()]).unwrap();
        assert!(res.coeff(&[2]).equals(&Scalar::from_int(-1)));
        assert!(res.coeff(&[0]).is_zero() && res.coeff(&[1]).is_zero());
    }

    #[test]
    fn compose_exp_of_2x() {
        // exp-series of u to order 4, inner = 2x -> 1+2x+2x^2+(4/3)x^3+(2/3)x^4
        let ctx1 = JetCtx::get(1, 4);
        let base0 = Arc::new(vec![Scalar::zero()]);
        let b = Backend::Rational;
        let u = Jet::coordinate(&ctx1, &base0, &b, 0);
        let eu = u.exp().unwrap();
        let two_x = u.scale(&Scalar::from_int(2));
        let res = eu.compose(&[two_x]).unwrap();
        let expect = [rat(1, 1), rat(2, 1), rat(2, 1), rat(4, 3), rat(2, 3)];
        for (k, e) in expect.iter().enumerate() {
            assert!(res.coeff(&[k as u8]).equals(&Scalar::Rat(e.clone())));
        }
    }

    #[test]
    fn sqrt_binomial_series() {
        // sqrt(1+x) at order 2 -> 1 + x/2 - x^2/8
        let (ctx, base, b) = rctx(1, 2);
        let one = Jet::constant(&ctx, &base, &b, Scalar::one());
        let xx = x(&ctx, &base, &b, 0);
        let s = one.add(&xx).unwrap().sqrt().unwrap();
        assert!(s.coeff(&[0]).equals(&Scalar::one()));
        assert!(s.coeff(&[1]).equals(&Scalar::from_frac(1, 2)));
        assert!(s.coeff(&[2]).equals(&Scalar::from_frac(-1, 8)));
    }

    #[test]
    fn exp_series_rational() {
        let (ctx, base, b) = rctx(1, 3);
        let xx = x(&ctx, &base, &b, 0);
        let e = xx.exp().unwrap();
        assert!(e.coeff(&[0]).equals(&Scalar::one()));
        assert!(e.coeff(&[1]).equals(&Scalar::one()));
        assert!(e.coeff(&[2]).equals(&Scalar::from_frac(1, 2)));
        assert!(e.coeff(&[3]).equals(&Scalar::from_frac(1, 6)));
    }

    #[test]
    fn pow_negative_half() {
        // (1+x)^(-1/2) -> 1 - x/2 + (3/8) x^2
        let (ctx, base, b) = rctx(1, 2);
        let one = Jet::constant(&ctx, &base, &b, Scalar::one());
        let xx = x(&ctx, &base, &b, 0);
        let p = one.add(&xx).unwrap().pow_rational(-1, 2).unwrap();
        assert!(p.coeff(&[0]).equals(&Scalar::one()));
        assert!(p.coeff(&[1]).equals(&Scalar::from_frac(-1, 2)));
        assert!(p.coeff(&[2]).equals(&Scalar::from_frac(3, 8)));
    }

    #[test]
    fn implicit_solve_parabola() {
        // F = y - x^2, seed 0 -> y(x) = x^2
        let order = 4;
        let ctx = JetCtx::get(2, order);
        let base = Arc::new(vec![Scalar::zero(), Scalar::zero()]);
        let b = Backend::Rational;
        let xj = Jet::coordinate(&ctx, &base, &b, 0);
        let yj = Jet::coordinate(&ctx, &base, &b, 1);
        let f = yj.sub(&xj.mul(&xj).unwrap()).unwrap();
        let sol = solve_implicit(&[f], 1).unwrap();
        let y = &sol.components[0];
        assert!(y.coeff(&[2]).equals(&Scalar::one()));
        assert!(y.coeff(&[0]).is_zero() && y.coeff(&[1]).is_zero());
    }

    #[test]
    fn implicit_solve_sqrt() {
        // F = y^2 - (1+x), seed 1, order 2 -> 1 + x/2 - x^2/8
        let ctx = JetCtx::get(2, 2);
        let base = Arc::new(vec![Scalar::zero(), Scalar::one()]);
        let b = Backend::Rational;
        let xj = Jet::coordinate(&ctx, &base, &b, 0);
        let yj = Jet::coordinate(&ctx, &base, &b, 1);
        let one = Jet::constant(&ctx, &base, &b, Scalar::one());
        let f = yj.mul(&yj).unwrap().sub(&one.add(&xj).unwrap()).unwrap();
        let sol = solve_implicit(&[f], 1).unwrap();
        let y = &sol.components[0];
        assert!(y.coeff(&[0]).equals(&Scalar::one()));
        assert!(y.coeff(&[1]).equals(&Scalar::from_frac(1, 2)));
        assert!(y.coeff(&[2]).equals(&Scalar::from_frac(-1, 8)));
    }

    #[test]
    fn implicit_solve_rejects_bad_seed() {
        let ctx = JetCtx::get(2, 2);
        let base = Arc::new(vec![Scalar::zero(), Scalar::one()]);
        let b = Backend::Rational;
        let xj = Jet::coordinate(&ctx, &base, &b, 0);
        let yj = Jet::coordinate(&ctx, &base, &b, 1);
        // F = y - x - 5 has F(base) = -4 != 0.
        let five = Jet::constant(&ctx, &base, &b, Scalar::from_int(5));
        let f = yj.sub(&xj).unwrap().sub(&five).unwrap();
        assert!(matches!(solve_implicit(&[f], 1), Err(Error::SeedNotRoot)));
    }

    #[test]
    fn invert_map_roundtrip() {
        // phi(u) = u + u^2 in one variable; check u(phi(u)) = u.
        let order = 5;
        let ctx = JetCtx::get(1, order);
        let base = Arc::new(vec![Scalar::zero()]);
        let b = Backend::Rational;
        let u = Jet::coordinate(&ctx, &base, &b, 0);
        let phi = u.add(&u.mul(&u).unwrap()).unwrap();
        let inv = invert_map(&JetMap::new(vec![phi.clone()]).unwrap()).unwrap();
        let roundtrip = inv.components[0].compose(&[phi]).unwrap();
        assert!(roundtrip.equals(&u));
    }

    #[test]
    fn order_mixing_is_an_error() {
        let ctx2 = JetCtx::get(1, 2);
        let ctx3 = JetCtx::get(1, 3);
        let base = Arc::new(vec![Scalar::zero()]);
        let b = Backend::Rational;
        let a = Jet::coordinate(&ctx2, &base, &b, 0);
        let c = Jet::coordinate(&ctx3, &base, &b, 0);
        assert!(a.add(&c).is_err());
    }
}
