//! Evaluation of the stationary-phase coefficients A_k, two independent
//! ways: the graph sum over edge-multiplicity tables (with exact Wick
//! contraction of Taylor-coefficient tensors against propagator copies)
//! and the Gaussian-moment rescaling method. Both are normalized so that
//! for f = -(x_1^2+...+x_n^2)/2 the coefficients are A_k = Lap^k g / k!
//! at the dual point; admissibility (A_k = 0) is insensitive to the
//! normalization, and cross-engine equality is asserted exactly.
//!
//! Every computation here runs over jet coefficients: order-0 jets give
//! pointwise values, order-M jets give A_k as a function germ at the
//! base point (needed to certify "A_k vanishes identically" to a stated
//! functional order).

use crate::error::{Error, Result};
use crate::jet::{mono_pack, Jet, JetCtx};
use crate::linalg::invert_jet_matrix;
use crate::loops::{enumerate_graphs, LoopGraph};
use crate::scalar::Scalar;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use std::collections::HashMap;
use std::sync::Arc;

/// Truncated series in hbar. Coefficients are jets; order-0 jets encode
/// pointwise values. In pointwise mode the leading coefficient equals g
/// at the base point.
#[derive(Clone, Debug)]
pub struct HbarSeries {
    pub coeffs: Vec<Jet>,
}

impl HbarSeries {
    pub fn k_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn scalar_coeffs(&self) -> Vec<Scalar> {
        self.coeffs.iter().map(|j| j.const_term().clone()).collect()
    }
}

/// A_k as a linear functional of g: a map from derivative multi-indices
/// (applied to g, truncated to the functional order) to jet weights.
/// Building one of these does all the f-side contraction work once; it
/// can then be applied to many g's.
pub struct GFunctional {
    pub loop_order: usize,
    pub func_order: usize,
    pub n: usize,
    /// packed exponent of the g-derivative -> weight.
    pub terms: HashMap<u64, Jet>,
    proto: Jet,
}

impl GFunctional {
    /// Evaluate A_k(f, g) as a jet of the functional order.
    /// Requires g order >= 2k + functional order.
    pub fn apply(&self, g: &Jet) -> Result<Jet> {
        let need = 2 * self.loop_order + self.func_order;
        if g.order() < need {
            return Err(Error::OrderDeficit {
                needed: need,
                got: g.order(),
                what: "g jet in coefficient evaluation",
            });
        }
        let mut acc = Jet::zero(&self.proto.ctx, &self.proto.base, &self.proto.backend);
        for (mask, w) in &self.terms {
            let alpha = crate::jet::mono_unpack(*mask, self.n);
            let dg = g.derivative_multi(&alpha, self.func_order)?;
            if dg.is_zero() {
                continue;
            }
            acc = acc.add(&w.mul(&dg)?)?;
        }
        Ok(acc)
    }
}

/// Propagator: exact inverse Hessian of f at the base point.
pub struct Propagator {
    pub entries: Vec<Vec<Scalar>>,
}

pub fn propagator(f: &Jet) -> Result<Propagator> {
    let n = f.n();
    if f.order() < 2 {
        return Err(Error::OrderDeficit { needed: 2, got: f.order(), what: "Hessian" });
    }
    let hess: Vec<Vec<Scalar>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut alpha = vec![0u8; n];
                    alpha[i] += 1;
                    alpha[j] += 1;
                    deriv_value(f, &alpha)
                })
                .collect()
        })
        .collect();
    if crate::linalg::det(&hess).is_zero() {
        return Err(Error::SingularHessian);
    }
    Ok(Propagator { entries: crate::linalg::invert(&hess)? })
}

/// Derivative value of a jet at its base point: coeff * alpha!.
pub fn deriv_value(f: &Jet, alpha: &[u8]) -> Scalar {
    let c = f.coeff(alpha);
    if c.is_zero() {
        return Scalar::zero();
    }
    let mut fact = BigInt::one();
    for &e in alpha {
        for i in 2..=e as u64 {
            fact *= BigInt::from(i);
        }
    }
    c.mul(&Scalar::Rat(BigRational::from_integer(fact)))
}

/// Half-edge assignment state while eliminating one f-vertex.
type Pending = Vec<(u8, u8)>;

struct Assigner<'a> {
    vars: &'a [usize],
    prop: &'a [Vec<Jet>],
    m: usize,
    n: usize,
}

impl<'a> Assigner<'a> {
    #[allow(clippy::too_many_arguments)]
    fn assign(
        &self,
        selfloops: usize,
        future: &[u8],
        gedges: usize,
        exps: &mut Vec<u8>,
        gmask: u64,
        pending: &mut Pending,
        weight: Jet,
        out: &mut Vec<(u64, Pending, Vec<u8>, Jet)>,
    ) -> Result<()> {
        if weight.is_zero() {
            return Ok(());
        }
        if selfloops > 0 {
            for a in 0..self.m {
                for b in 0..self.m {
                    if self.prop[a][b].is_zero() {
                        continue;
                    }
                    let w = weight.mul(&self.prop[a][b])?;
                    exps[self.vars[a]] += 1;
                    exps[self.vars[b]] += 1;
                    self.assign(selfloops - 1, future, gedges, exps, gmask, pending, w, out)?;
                    exps[self.vars[a]] -= 1;
                    exps[self.vars[b]] -= 1;
                }
            }
            return Ok(());
        }
        if let Some((&j, rest_future)) = future.split_first() {
            for a in 0..self.m {
                for b in 0..self.m {
                    if self.prop[a][b].is_zero() {
                        continue;
                    }
                    let w = weight.mul(&self.prop[a][b])?;
                    exps[self.vars[a]] += 1;
                    pending.push((j, self.vars[b] as u8));
                    self.assign(0, rest_future, gedges, exps, gmask, pending, w, out)?;
                    pending.pop();
                    exps[self.vars[a]] -= 1;
                }
            }
            return Ok(());
        }
        if gedges > 0 {
            for a in 0..self.m {
                for b in 0..self.m {
                    if self.prop[a][b].is_zero() {
                        continue;
                    }
                    let w = weight.mul(&self.prop[a][b])?;
                    // a-side index goes to the g-derivative, b-side to f.
                    let g2 = gmask + (1u64 << (8 * self.vars[a]));
                    exps[self.vars[b]] += 1;
                    self.assign(0, future, gedges - 1, exps, g2, pending, w, out)?;
                    exps[self.vars[b]] -= 1;
                }
            }
            return Ok(());
        }
        let _ = self.n;
        out.push((gmask, pending.clone(), exps.clone(), weight));
        Ok(())
    }
}

/// Build the A_k functional of g for the given f, functional order, and
/// contraction variable set. Requires f order >= 2k + 2 + func_order.
pub fn g_functional(f: &Jet, k: usize, func_order: usize, vars: &[usize]) -> Result<GFunctional> {
    let graphs = enumerate_graphs(k);
    g_functional_with(f, k, func_order, vars, &graphs)
}

pub fn g_functional_with(
    f: &Jet,
    k: usize,
    func_order: usize,
    vars: &[usize],
    graphs: &[LoopGraph],
) -> Result<GFunctional> {
    let n = f.n();
    if f.order() < 2 * k + 2 + func_order {
        return Err(Error::OrderDeficit {
            needed: 2 * k + 2 + func_order,
            got: f.order(),
            what: "f jet in coefficient evaluation",
        });
    }
    for &v in vars {
        assert!(v < n, "contraction variable out of range");
    }
    let octx = JetCtx::get(n, func_order);
    let proto = Jet::zero(&octx, &f.base, &f.backend);

    // Hessian restricted to the contraction variables, as jets of the
    // functional order; its exact inverse is the propagator.
    let hess: Vec<Vec<Jet>> = vars
        .iter()
        .map(|&i| {
            vars.iter()
                .map(|&j| {
                    let mut alpha = vec![0u8; n];
                    alpha[i] += 1;
                    alpha[j] += 1;
                    f.derivative_multi(&alpha, func_order)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let const_hess: Vec<Vec<Scalar>> = hess
        .iter()
        .map(|row| row.iter().map(|j| j.const_term().clone()).collect())
        .collect();
    if crate::linalg::det(&const_hess).is_zero() {
        return Err(Error::SingularHessian);
    }
    let prop = invert_jet_matrix(&hess)?;

    // Memoized derivative tensors of f (symmetric: keyed by exponent).
    let mut tensor_memo: HashMap<u64, Jet> = HashMap::new();

    let mut terms: HashMap<u64, Jet> = HashMap::new();
    let m = vars.len();
    let assigner = Assigner { vars, prop: &prop, m, n };

    for graph in graphs {
        // Per-graph scale: (-1)^v / Sym, times the engine normalization
        // (-2)^k that pins A_k = Lap^k g / k! on the standard Gaussian.
        let mut scale = BigRational::one() / graph.symmetry_factor();
        if graph.v % 2 == 1 {
            scale = -scale;
        }
        scale *= BigRational::from_integer(BigInt::from(-2)).pow(k as i32);

        let mut states: HashMap<(u64, Pending), Jet> = HashMap::new();
        states.insert(
            (0u64, Vec::new()),
            Jet::constant(&octx, &f.base, &f.backend, Scalar::one()),
        );

        for i in 1..=graph.v {
            let mut next: HashMap<(u64, Pending), Jet> = HashMap::new();
            for ((gmask, pending), weight) in states.into_iter() {
                // indices already fixed by earlier vertices
                let mut fixed = vec![0u8; n];
                let mut rest: Pending = Vec::new();
                for &(vtx, var) in &pending {
                    if vtx as usize == i {
                        fixed[var as usize] += 1;
                    } else {
                        rest.push((vtx, var));
                    }
                }
                let selfloops = graph.a(i, i);
                let mut future: Vec<u8> = Vec::new();
                for j in i + 1..=graph.v {
                    for _ in 0..graph.a(i, j) {
                        future.push(j as u8);
                    }
                }
                let gedges = graph.a(0, i);

                let mut results: Vec<(u64, Pending, Vec<u8>, Jet)> = Vec::new();
                let mut exps = fixed;
                let mut pend = rest;
                assigner.assign(
                    selfloops, &future, gedges, &mut exps, gmask, &mut pend, weight,
                    &mut results,
                )?;
                for (gm, mut pnd, ex, w) in results {
                    let mask = mono_pack(&ex);
                    let t = match tensor_memo.get(&mask) {
                        Some(t) => t.clone(),
                        None => {
                            let t = f.derivative_multi(&ex, func_order)?;
                            tensor_memo.insert(mask, t.clone());
                            t
                        }
                    };
                    if t.is_zero() {
                        continue;
                    }
                    let w2 = w.mul(&t)?;
                    if w2.is_zero() {
                        continue;
                    }
                    pnd.sort_unstable();
                    let entry = next
                        .entry((gm, pnd))
                        .or_insert_with(|| Jet::zero(&octx, &f.base, &f.backend));
                    *entry = entry.add(&w2)?;
                }
            }
            states = next;
        }

        // g-vertex self-loops: propagator traces on the g side.
        let mut final_states: HashMap<u64, Jet> = HashMap::new();
        for ((gmask, pending), weight) in states.into_iter() {
            debug_assert!(pending.is_empty());
            let mut cur: Vec<(u64, Jet)> = vec![(gmask, weight)];
            for _ in 0..graph.a(0, 0) {
                let mut nxt: Vec<(u64, Jet)> = Vec::new();
                for (gm, w) in cur {
                    for a in 0..m {
                        for b in 0..m {
                            if prop[a][b].is_zero() {
                                continue;
                            }
                            let w2 = w.mul(&prop[a][b])?;
                            let gm2 = gm + (1u64 << (8 * vars[a])) + (1u64 << (8 * vars[b]));
                            nxt.push((gm2, w2));
                        }
                    }
                }
                cur = nxt;
            }
            for (gm, w) in cur {
                let entry = final_states
                    .entry(gm)
                    .or_insert_with(|| Jet::zero(&octx, &f.base, &f.backend));
                *entry = entry.add(&w)?;
            }
        }

        for (gm, w) in final_states {
            let scaled = w.scale_rat(&scale);
            if scaled.is_zero() {
                continue;
            }
            let entry = terms
                .entry(gm)
                .or_insert_with(|| Jet::zero(&octx, &f.base, &f.backend));
            *entry = entry.add(&scaled)?;
        }
    }

    terms.retain(|_, w| !w.is_zero());
    Ok(GFunctional { loop_order: k, func_order, n, terms, proto })
}

/// A_k at the base point by the graph sum.
pub fn a_k_graphs(f: &Jet, g: &Jet, k: usize) -> Result<Scalar> {
    let gf = g_functional(f, k, 0, &all_vars(f.n()))?;
    Ok(gf.apply(g)?.const_term().clone())
}

/// A_k as a jet of order `func_order` in the base variables.
pub fn a_k_jet(f: &Jet, g: &Jet, k: usize, func_order: usize) -> Result<Jet> {
    let gf = g_functional(f, k, func_order, &all_vars(f.n()))?;
    gf.apply(g)
}

pub fn all_vars(n: usize) -> Vec<usize> {
    (0..n).collect()
}

// ---------------------------------------------------------------------------
// Gaussian-moment method
// ---------------------------------------------------------------------------

/// Dense polynomial in the rescaled variables with jet coefficients.
struct PolyJ {
    ctx: Arc<JetCtx>,
    coeffs: Vec<Jet>,
}

impl PolyJ {
    fn zero(ctx: &Arc<JetCtx>, proto: &Jet) -> PolyJ {
        PolyJ {
            ctx: ctx.clone(),
            coeffs: vec![Jet::zero(&proto.ctx, &proto.base, &proto.backend); ctx.len()],
        }
    }

    fn mul(&self, other: &PolyJ, cap: usize) -> Result<PolyJ> {
        let proto = &self.coeffs[0];
        let mut out = PolyJ::zero(&self.ctx, proto);
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let di = self.ctx.degs[i] as usize;
            for (j, b) in other.coeffs.iter().enumerate() {
                if di + other.ctx.degs[j] as usize > cap {
                    break;
                }
                if b.is_zero() {
                    continue;
                }
                let mm = self.ctx.monos[i] + other.ctx.monos[j];
                let r = self.ctx.rank_of(mm).expect("moment monomial in table");
                out.coeffs[r] = out.coeffs[r].add(&a.mul(b)?)?;
            }
        }
        Ok(out)
    }

    fn second_derivative(&self, a: usize, b: usize) -> PolyJ {
        let proto = &self.coeffs[0];
        let mut out = PolyJ::zero(&self.ctx, proto);
        for (r, mono) in self.ctx.monos.iter().enumerate() {
            let m1 = mono + (1u64 << (8 * a));
            let e1 = ((m1 >> (8 * a)) & 0xff) as i64;
            let m2 = m1 + (1u64 << (8 * b));
            let e2 = ((m2 >> (8 * b)) & 0xff) as i64;
            if let Some(src) = self.ctx.rank_of(m2) {
                if self.coeffs[src].is_zero() {
                    continue;
                }
                out.coeffs[r] = self.coeffs[src].scale(&Scalar::from_int(e1 * e2));
            }
        }
        out
    }
}

/// A_k by the moment method: split off the quadratic part, rescale, expand
/// the exponential of the higher parts, and evaluate Gaussian moments by
/// repeated application of the propagator Laplacian (odd degrees vanish).
pub fn a_k_moments(f: &Jet, g: &Jet, k: usize) -> Result<Scalar> {
    Ok(a_k_moments_jet(f, g, k, 0)?.const_term().clone())
}

pub fn a_k_moments_jet(f: &Jet, g: &Jet, k: usize, func_order: usize) -> Result<Jet> {
    let n = f.n();
    if f.order() < 2 * k + 2 + func_order {
        return Err(Error::OrderDeficit {
            needed: 2 * k + 2 + func_order,
            got: f.order(),
            what: "f jet in moment method",
        });
    }
    if g.order() < 2 * k + func_order {
        return Err(Error::OrderDeficit {
            needed: 2 * k + func_order,
            got: g.order(),
            what: "g jet in moment method",
        });
    }
    let octx = JetCtx::get(n, func_order);
    let proto = Jet::zero(&octx, &f.base, &f.backend);

    let hess: Vec<Vec<Jet>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut alpha = vec![0u8; n];
                    alpha[i] += 1;
                    alpha[j] += 1;
                    f.derivative_multi(&alpha, func_order)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let const_hess: Vec<Vec<Scalar>> = hess
        .iter()
        .map(|row| row.iter().map(|j| j.const_term().clone()).collect())
        .collect();
    if crate::linalg::det(&const_hess).is_zero() {
        return Err(Error::SingularHessian);
    }
    let prop = invert_jet_matrix(&hess)?;

    let dmax = 6 * k;
    let pctx = JetCtx::get(n, dmax);

    // Homogeneous Taylor part of degree `deg` as a moment polynomial.
    let part = |jet: &Jet, deg: usize| -> Result<PolyJ> {
        let mut p = PolyJ::zero(&pctx, &proto);
        for (r, mono) in pctx.monos.iter().enumerate() {
            if pctx.degs[r] as usize != deg {
                continue;
            }
            let alpha = crate::jet::mono_unpack(*mono, n);
            let c = jet.derivative_multi(&alpha, func_order)?;
            if c.is_zero() {
                continue;
            }
            let mut fact = BigRational::one();
            for &e in &alpha {
                for i in 2..=e as u64 {
                    fact *= BigRational::from_integer(BigInt::from(i));
                }
            }
            p.coeffs[r] = c.scale_rat(&fact.recip());
        }
        Ok(p)
    };

    let mut fparts: Vec<Option<PolyJ>> = Vec::with_capacity(2 * k + 3);
    for d in 0..=2 * k + 2 {
        fparts.push(if d >= 3 { Some(part(f, d)?) } else { None });
    }
    let mut gparts: Vec<PolyJ> = Vec::with_capacity(2 * k + 1);
    for d in 0..=2 * k {
        gparts.push(part(g, d)?);
    }

    let gauss_moment = |poly: &PolyJ, deg: usize| -> Result<Jet> {
        if deg % 2 == 1 {
            return Ok(Jet::zero(&proto.ctx, &proto.base, &proto.backend));
        }
        let m_steps = deg / 2;
        let mut cur = PolyJ { ctx: poly.ctx.clone(), coeffs: poly.coeffs.clone() };
        let minus_half = BigRational::new(BigInt::from(-1), BigInt::from(2));
        for _ in 0..m_steps {
            let mut acc = PolyJ::zero(&cur.ctx, &proto);
            for a in 0..n {
                for b in 0..n {
                    if prop[a][b].is_zero() {
                        continue;
                    }
                    let d2 = cur.second_derivative(a, b);
                    for (r, c) in d2.coeffs.iter().enumerate() {
                        if c.is_zero() {
                            continue;
                        }
                        acc.coeffs[r] = acc.coeffs[r].add(&c.mul(&prop[a][b])?)?;
                    }
                }
            }
            for c in acc.coeffs.iter_mut() {
                *c = c.scale_rat(&minus_half);
            }
            cur = acc;
        }
        let mut fact = BigRational::one();
        for i in 2..=m_steps as u64 {
            fact *= BigRational::from_integer(BigInt::from(i));
        }
        Ok(cur.coeffs[0].scale_rat(&fact.recip()))
    };

    // Sum over (g-part degree, counts of higher Taylor parts) with
    // hbar-weight m + sum (i-2) c_i = 2k.
    let mut acc = Jet::zero(&proto.ctx, &proto.base, &proto.backend);
    let degrees: Vec<usize> = (3..=2 * k + 2).collect();
    let mut counts = vec![0usize; degrees.len()];

    fn walk(
        idx: usize,
        weight_left: usize,
        degrees: &[usize],
        counts: &mut Vec<usize>,
        visit: &mut impl FnMut(&[usize], usize) -> Result<()>,
    ) -> Result<()> {
        if idx == degrees.len() {
            return visit(counts, weight_left);
        }
        let step = degrees[idx] - 2;
        let mut c = 0;
        while c * step <= weight_left {
            counts[idx] = c;
            walk(idx + 1, weight_left - c * step, degrees, counts, visit)?;
            c += 1;
        }
        counts[idx] = 0;
        Ok(())
    }

    {
        let acc_ref = &mut acc;
        let mut visit = |counts: &[usize], m_deg: usize| -> Result<()> {
            if m_deg > 2 * k {
                return Ok(());
            }
            let mut poly: Option<PolyJ> = None;
            let mut deg = m_deg;
            let mut co = BigRational::one();
            for (idx, &c) in counts.iter().enumerate() {
                for _ in 0..c {
                    let fp = fparts[degrees[idx]].as_ref().unwrap();
                    deg += degrees[idx];
                    poly = Some(match poly {
                        None => PolyJ { ctx: fp.ctx.clone(), coeffs: fp.coeffs.clone() },
                        Some(p) => p.mul(fp, 6 * k)?,
                    });
                }
                let mut fact = BigRational::one();
                for i in 2..=c as u64 {
                    fact *= BigRational::from_integer(BigInt::from(i));
                }
                co /= fact;
            }
            let gp = &gparts[m_deg];
            let full = match poly {
                None => PolyJ { ctx: gp.ctx.clone(), coeffs: gp.coeffs.clone() },
                Some(p) => p.mul(gp, 6 * k)?,
            };
            let moment = gauss_moment(&full, deg)?;
            *acc_ref = acc_ref.add(&moment.scale_rat(&co))?;
            Ok(())
        };
        walk(0, 2 * k, &degrees, &mut counts, &mut visit)?;
    }

    // Engine normalization: 2^k, matching the graph engine.
    let norm = BigRational::from_integer(BigInt::from(2)).pow(k as i32);
    Ok(acc.scale_rat(&norm))
}

// ---------------------------------------------------------------------------
// Closed-form first coefficient
// ---------------------------------------------------------------------------

/// The explicit five-term expression for the first coefficient, contracted
/// directly (no graph enumeration), under the same normalization.
pub fn a1_closed(f: &Jet, g: &Jet) -> Result<Scalar> {
    let n = f.n();
    if f.order() < 4 {
        return Err(Error::OrderDeficit { needed: 4, got: f.order(), what: "f in closed-form A1" });
    }
    if g.order() < 2 {
        return Err(Error::OrderDeficit { needed: 2, got: g.order(), what: "g in closed-form A1" });
    }
    let p = propagator(f)?.entries;
    let g0 = g.const_term().clone();
    let df = |alpha: &[usize]| -> Scalar {
        let mut e = vec![0u8; n];
        for &i in alpha {
            e[i] += 1;
        }
        deriv_value(f, &e)
    };
    let dg = |alpha: &[usize]| -> Scalar {
        let mut e = vec![0u8; n];
        for &i in alpha {
            e[i] += 1;
        }
        deriv_value(g, &e)
    };

    let mut t1 = Scalar::zero();
    for i in 0..n {
        for j in 0..n {
            t1 = t1.add(&p[i][j].mul(&dg(&[i, j])));
        }
    }
    t1 = t1.mul(&Scalar::from_frac(1, 2));

    let mut t2 = Scalar::zero();
    let mut t3 = Scalar::zero();
    for i1 in 0..n {
        for j1 in 0..n {
            for i2 in 0..n {
                for j2 in 0..n {
                    let pp = p[i1][j1].mul(&p[i2][j2]);
                    t2 = t2.add(&pp.mul(&dg(&[i1])).mul(&df(&[j1, i2, j2])));
                    t3 = t3.add(&pp.mul(&df(&[i1, j1, i2, j2])));
                }
            }
        }
    }
    t2 = t2.mul(&Scalar::from_frac(-1, 2));
    t3 = t3.mul(&g0).mul(&Scalar::from_frac(-1, 8));

    let mut t4 = Scalar::zero();
    let mut t5 = Scalar::zero();
    for i1 in 0..n {
        for j1 in 0..n {
            for i2 in 0..n {
                for j2 in 0..n {
                    for i3 in 0..n {
                        for j3 in 0..n {
                            let ppp = p[i1][j1].mul(&p[i2][j2]).mul(&p[i3][j3]);
                            t4 = t4.add(&ppp.mul(&df(&[i1, j1, i2])).mul(&df(&[j2, i3, j3])));
                            t5 = t5.add(&ppp.mul(&df(&[i1, i2, i3])).mul(&df(&[j1, j2, j3])));
                        }
                    }
                }
            }
        }
    }
    t4 = t4.mul(&g0).mul(&Scalar::from_frac(1, 8));
    t5 = t5.mul(&g0).mul(&Scalar::from_frac(1, 12));

    let literal = t1.add(&t2).add(&t3).add(&t4).add(&t5);
    Ok(literal.mul(&Scalar::from_int(-2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{eval_jet, parse};
    use crate::scalar::Backend;

    fn jet_of(src: &str, vars: &[&str], base: &[i64], order: usize) -> Jet {
        let names: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        let e = parse(src, &names).unwrap();
        let b = Arc::new(base.iter().map(|&v| Scalar::from_int(v)).collect::<Vec<_>>());
        eval_jet(&e, &b, vars.len(), order, &Backend::Rational).unwrap()
    }

    #[test]
    fn gaussian_pair_gives_laplacian() {
        // f = -x^2/2, g = x^2 at base 0: A_1 = g'' = 2.
        let f = jet_of("-x^2/2", &["x"], &[0], 6);
        let g = jet_of("x^2", &["x"], &[0], 4);
        let a1 = a_k_graphs(&f, &g, 1).unwrap();
        assert!(a1.equals(&Scalar::from_int(2)), "a1 = {a1}");
        let a1m = a_k_moments(&f, &g, 1).unwrap();
        assert!(a1m.equals(&Scalar::from_int(2)));
        let a1c = a1_closed(&f, &g).unwrap();
        assert!(a1c.equals(&Scalar::from_int(2)));
        let a2 = a_k_graphs(&f, &g, 2).unwrap();
        assert!(a2.is_zero());
    }

    #[test]
    fn harmonic_g_vanishes() {
        let f = jet_of("-(x1^2 + x2^2)/2", &["x1", "x2"], &[0, 0], 12);
        let g = jet_of("x1^2 - x2^2", &["x1", "x2"], &[0, 0], 10);
        for k in 1..=4 {
            assert!(a_k_graphs(&f, &g, k).unwrap().is_zero(), "A_{k} nonzero");
        }
        let g2 = jet_of("x1^2 + x2^2", &["x1", "x2"], &[0, 0], 10);
        let a1 = a_k_graphs(&f, &g2, 1).unwrap();
        assert!(a1.equals(&Scalar::from_int(4)));
    }

    #[test]
    fn cubic_perturbation_cross_checks() {
        // f = -x^2/2 + x^3, g = 1: normalized A_1 = 15, A_2 = 4 * 3465/8.
        let f = jet_of("-x^2/2 + x^3", &["x"], &[0], 8);
        let g = jet_of("1", &["x"], &[0], 6);
        let a1 = a_k_graphs(&f, &g, 1).unwrap();
        assert!(a1.equals(&Scalar::from_int(15)), "a1 = {a1}");
        let a1m = a_k_moments(&f, &g, 1).unwrap();
        assert!(a1m.equals(&Scalar::from_int(15)));
        let a2 = a_k_graphs(&f, &g, 2).unwrap();
        let a2m = a_k_moments(&f, &g, 2).unwrap();
        assert!(a2.equals(&Scalar::from_frac(3465, 2)), "a2 = {a2}");
        assert!(a2m.equals(&a2));
    }

    #[test]
    fn engines_agree_on_two_variable_jet() {
        let f = jet_of(
            "-(x1^2 + x1*x2 + 3*x2^2)/2 + x1^3 - x2^3/2 + x1*x2^3/3",
            &["x1", "x2"],
            &[0, 0],
            8,
        );
        let g = jet_of("1 + x1 - 2*x2 + x1*x2^2", &["x1", "x2"], &[0, 0], 6);
        for k in 1..=2 {
            let ag = a_k_graphs(&f, &g, k).unwrap();
            let am = a_k_moments(&f, &g, k).unwrap();
            assert!(ag.equals(&am), "k={k}: {ag} vs {am}");
        }
        let a1c = a1_closed(&f, &g).unwrap();
        assert!(a1c.equals(&a_k_graphs(&f, &g, 1).unwrap()));
    }

    #[test]
    fn functional_mode_matches_gaussian_heat_coefficients() {
        // For f = -(x1^2+x2^2)/2 the k-th coefficient as a germ is
        // Lap^k g / k!; check the jet against the exact polynomial.
        let f = jet_of("-(x1^2 + x2^2)/2", &["x1", "x2"], &[0, 0], 9);
        let g = jet_of("x1^4 + x2^4 + x1*x2", &["x1", "x2"], &[0, 0], 7);
        let a1 = a_k_jet(&f, &g, 1, 2).unwrap();
        // Lap g = 12 x1^2 + 12 x2^2.
        assert!(a1.coeff(&[0, 0]).is_zero());
        assert!(a1.coeff(&[2, 0]).equals(&Scalar::from_int(12)));
        assert!(a1.coeff(&[0, 2]).equals(&Scalar::from_int(12)));
        assert!(a1.coeff(&[1, 1]).is_zero());
        // Lap^2 g / 2 = (24 + 24)/2 = 24.
        let a2 = a_k_jet(&f, &g, 2, 1).unwrap();
        assert!(a2.coeff(&[0, 0]).equals(&Scalar::from_int(24)));
        let a2m = a_k_moments_jet(&f, &g, 2, 1).unwrap();
        assert!(a2.equals(&a2m));
    }

    #[test]
    fn linear_in_g() {
        let f = jet_of("-(x1^2 + 2*x2^2)/2 + x1^2*x2", &["x1", "x2"], &[0, 0], 6);
        let g1 = jet_of("x1 + x2^2", &["x1", "x2"], &[0, 0], 4);
        let g2 = jet_of("1 - x1*x2", &["x1", "x2"], &[0, 0], 4);
        let combo = g1
            .scale(&Scalar::from_int(3))
            .add(&g2.scale(&Scalar::from_int(-7)))
            .unwrap();
        let lhs = a_k_graphs(&f, &combo, 1).unwrap();
        let rhs = a_k_graphs(&f, &g1, 1)
            .unwrap()
            .mul(&Scalar::from_int(3))
            .add(&a_k_graphs(&f, &g2, 1).unwrap().mul(&Scalar::from_int(-7)));
        assert!(lhs.equals(&rhs));
    }
}
