//! Exact dense linear algebra over `Scalar`, plus small systems over the
//! jet ring. Elimination is deterministic: pivots are chosen by position
//! (first row with an invertible entry), never by magnitude, so runs
//! reproduce bit-for-bit over exact fields.

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::scalar::Scalar;

pub fn det(m: &[Vec<Scalar>]) -> Scalar {
    let n = m.len();
    if n == 0 {
        return Scalar::one();
    }
    let mut a: Vec<Vec<Scalar>> = m.to_vec();
    let mut sign = false;
    let mut acc = Scalar::one();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero());
        let Some(p) = pivot else {
            return Scalar::zero();
        };
        if p != col {
            a.swap(p, col);
            sign = !sign;
        }
        let pv = a[col][col].clone();
        acc = acc.mul(&pv);
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].div(&pv).expect("pivot invertible");
            for c in col..n {
                let t = a[col][c].mul(&factor);
                a[r][c] = a[r][c].sub(&t);
            }
        }
    }
    if sign {
        acc.neg()
    } else {
        acc
    }
}

pub fn invert(m: &[Vec<Scalar>]) -> Result<Vec<Vec<Scalar>>> {
    let n = m.len();
    let mut a: Vec<Vec<Scalar>> = m.to_vec();
    let mut inv: Vec<Vec<Scalar>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { Scalar::one() } else { Scalar::zero() })
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero());
        let Some(p) = pivot else {
            return Err(Error::SingularHessian);
        };
        a.swap(p, col);
        inv.swap(p, col);
        let pv = a[col][col].clone();
        for c in 0..n {
            a[col][c] = a[col][c].div(&pv)?;
            inv[col][c] = inv[col][c].div(&pv)?;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for c in 0..n {
                let t = a[col][c].mul(&factor);
                a[r][c] = a[r][c].sub(&t);
                let t2 = inv[col][c].mul(&factor);
                inv[r][c] = inv[r][c].sub(&t2);
            }
        }
    }
    Ok(inv)
}

/// Row-reduce in place; returns pivot column list.
fn echelonize(rows: &mut Vec<Vec<Scalar>>) -> Vec<usize> {
    let nrows = rows.len();
    if nrows == 0 {
        return vec![];
    }
    let ncols = rows[0].len();
    let mut pivots = Vec::new();
    let mut r0 = 0usize;
    for col in 0..ncols {
        let pivot = (r0..nrows).find(|&r| !rows[r][col].is_zero());
        let Some(p) = pivot else { continue };
        rows.swap(p, r0);
        let pv = rows[r0][col].clone();
        for c in col..ncols {
            rows[r0][c] = rows[r0][c].div(&pv).expect("pivot invertible");
        }
        for r in 0..nrows {
            if r == r0 || rows[r][col].is_zero() {
                continue;
            }
            let factor = rows[r][col].clone();
            for c in col..ncols {
                let t = rows[r0][c].mul(&factor);
                rows[r][c] = rows[r][c].sub(&t);
            }
        }
        pivots.push(col);
        r0 += 1;
        if r0 == nrows {
            break;
        }
    }
    pivots
}

pub fn rank(rows: &[Vec<Scalar>]) -> usize {
    let mut m = rows.to_vec();
    echelonize(&mut m).len()
}

/// Exact nullspace basis of the row system, echelonized deterministically.
/// Basis vectors are indexed by free columns in increasing order, with a 1
/// in their free position.
pub fn nullspace(rows: &[Vec<Scalar>]) -> Vec<Vec<Scalar>> {
    if rows.is_empty() {
        return vec![];
    }
    let ncols = rows[0].len();
    let mut m = rows.to_vec();
    let pivots = echelonize(&mut m);
    let mut is_pivot = vec![false; ncols];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let mut basis = Vec::new();
    for free in 0..ncols {
        if is_pivot[free] {
            continue;
        }
        let mut v = vec![Scalar::zero(); ncols];
        v[free] = Scalar::one();
        for (ri, &p) in pivots.iter().enumerate() {
            // row ri: x_p + sum(coeff * x_free) = 0
            v[p] = m[ri][free].neg();
        }
        basis.push(v);
    }
    basis
}

/// Solve J * x = b where J is a square matrix of jets with invertible
/// constant-term matrix (used by the implicit solver).
pub fn solve_jet_system(jac: &[Vec<Jet>], rhs: &[Jet]) -> Result<Vec<Jet>> {
    let n = jac.len();
    let mut a: Vec<Vec<Jet>> = jac.to_vec();
    let mut b: Vec<Jet> = rhs.to_vec();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].const_term().is_zero());
        let Some(p) = pivot else {
            return Err(Error::SingularJacobian);
        };
        a.swap(p, col);
        b.swap(p, col);
        let pv = a[col][col].clone();
        let pinv = pv.inverse()?;
        for c in 0..n {
            a[col][c] = a[col][c].mul(&pinv)?;
        }
        b[col] = b[col].mul(&pinv)?;
        for r in 0..n {
            if r == col {
                continue;
            }
            if a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for c in 0..n {
                let t = a[col][c].mul(&factor)?;
                a[r][c] = a[r][c].sub(&t)?;
            }
            let t = b[col].mul(&factor)?;
            b[r] = b[r].sub(&t)?;
        }
    }
    Ok(b)
}

/// Invert a square matrix of jets whose constant-term matrix is invertible.
pub fn invert_jet_matrix(m: &[Vec<Jet>]) -> Result<Vec<Vec<Jet>>> {
    let n = m.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let rhs: Vec<Jet> = (0..n)
            .map(|i| {
                if i == j {
                    let ct = &m[0][0];
                    crate::jet::Jet::constant(&ct.ctx, &ct.base, &ct.backend, Scalar::one())
                } else {
                    let ct = &m[0][0];
                    crate::jet::Jet::zero(&ct.ctx, &ct.base, &ct.backend)
                }
            })
            .collect();
        cols.push(solve_jet_system(m, &rhs)?);
    }
    // cols[j][i] = (M^-1)_{ij}; transpose into row-major.
    Ok((0..n)
        .map(|i| (0..n).map(|j| cols[j][i].clone()).collect())
        .collect())
}

/// Determinant of a square matrix of jets (fraction-free is unnecessary:
/// sizes here are tiny, so cofactor expansion is fine and allocation-light).
pub fn det_jet(m: &[Vec<Jet>]) -> Result<Jet> {
    let n = m.len();
    assert!(n >= 1);
    if n == 1 {
        return Ok(m[0][0].clone());
    }
    let proto = &m[0][0];
    let mut acc = Jet::zero(&proto.ctx, &proto.base, &proto.backend);
    let idx: Vec<usize> = (1..n).collect();
    for (j, cell) in m[0].iter().enumerate() {
        if cell.is_zero() {
            continue;
        }
        let sub: Vec<Vec<Jet>> = idx
            .iter()
            .map(|&r| {
                (0..n)
                    .filter(|&c| c != j)
                    .map(|c| m[r][c].clone())
                    .collect()
            })
            .collect();
        let minor = det_jet(&sub)?;
        let term = cell.mul(&minor)?;
        acc = if j % 2 == 0 { acc.add(&term)? } else { acc.sub(&term)? };
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: i64) -> Scalar {
        Scalar::from_int(v)
    }

    #[test]
    fn det_and_invert() {
        let m = vec![vec![s(2), s(-1)], vec![s(-1), s(2)]];
        assert!(det(&m).equals(&s(3)));
        let inv = invert(&m).unwrap();
        assert!(inv[0][0].equals(&Scalar::from_frac(2, 3)));
        assert!(inv[0][1].equals(&Scalar::from_frac(1, 3)));
    }

    #[test]
    fn nullspace_of_rank_one() {
        let rows = vec![vec![s(1), s(2), s(3)]];
        let ns = nullspace(&rows);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            let dot = v[0]
                .mul(&s(1))
                .add(&v[1].mul(&s(2)))
                .add(&v[2].mul(&s(3)));
            assert!(dot.is_zero());
        }
    }

    #[test]
    fn rank_counts_pivots() {
        let rows = vec![
            vec![s(1), s(2)],
            vec![s(2), s(4)],
            vec![s(0), s(1)],
        ];
        assert_eq!(rank(&rows), 2);
    }
}
