//! Feynman-graph data for the stationary-phase coefficients.
//!
//! A term of the order-k coefficient is indexed by a vertex count `v`,
//! an ordered degree sequence `d_0; d_1 >= ... >= d_v >= 3` with
//! `sum d_i = 2(k+v)`, and a symmetric edge-multiplicity table `a_ij`
//! (including loops `a_ii`) consistent with the degrees. Vertex 0 is
//! the exceptional vertex carrying derivatives of g; vertices 1..=v
//! carry derivatives of f. The evaluation engine walks the literal sum
//! over these tables; isomorphism classes (tables identified under
//! permutations of equal-degree f-vertices) are only computed for the
//! class-count regression.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopGraph {
    /// Number of f-vertices (the g-vertex is extra and labeled 0).
    pub v: usize,
    /// Degrees d_0, d_1, ..., d_v.
    pub degrees: Vec<usize>,
    /// Upper-triangular multiplicities: mult[i][j - i] = a_ij for j >= i.
    pub mult: Vec<Vec<usize>>,
    pub loop_order: usize,
}

impl LoopGraph {
    pub fn a(&self, i: usize, j: usize) -> usize {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        self.mult[lo][hi - lo]
    }

    pub fn edge_count(&self) -> usize {
        let mut e = 0;
        for i in 0..=self.v {
            for j in i..=self.v {
                e += self.a(i, j);
            }
        }
        e
    }

    /// Symmetry factor: prod(m_i!) over repeated-degree multiplicities of
    /// d_1..d_v, times prod(a_ij!) and prod(2^a_ii).
    pub fn symmetry_factor(&self) -> BigRational {
        let mut sym = BigInt::one();
        let mut run = 1usize;
        for i in 2..=self.v {
            if self.degrees[i] == self.degrees[i - 1] {
                run += 1;
            } else {
                sym *= factorial(run);
                run = 1;
            }
        }
        if self.v >= 1 {
            sym *= factorial(run);
        }
        for i in 0..=self.v {
            for j in i..=self.v {
                sym *= factorial(self.a(i, j));
            }
            sym *= BigInt::from(1u64 << self.a(i, i));
        }
        BigRational::from_integer(sym)
    }
}

fn factorial(n: usize) -> BigInt {
    let mut acc = BigInt::one();
    for i in 2..=n {
        acc *= BigInt::from(i);
    }
    acc
}

/// All ordered (degree-sequence, multiplicity-table) terms at loop order k.
pub fn enumerate_graphs(k: usize) -> Vec<LoopGraph> {
    assert!(k >= 1, "loop order starts at 1");
    let mut out = Vec::new();
    for v in 0..=2 * k {
        let total = 2 * (k + v);
        // degree sequences d_1 >= ... >= d_v >= 3 with sum <= total,
        // d_0 = total - sum >= 0.
        let mut seq = Vec::with_capacity(v);
        gen_degrees(v, total, usize::MAX, &mut seq, &mut |degs: &[usize]| {
            let sum: usize = degs.iter().sum();
            let d0 = total - sum;
            let mut degrees = vec![d0];
            degrees.extend_from_slice(degs);
            gen_tables(&degrees, k, &mut out);
        });
    }
    out
}

fn gen_degrees(
    remaining_vertices: usize,
    budget: usize,
    max_degree: usize,
    seq: &mut Vec<usize>,
    emit: &mut impl FnMut(&[usize]),
) {
    if remaining_vertices == 0 {
        emit(seq);
        return;
    }
    if budget < 3 * remaining_vertices {
        return;
    }
    // Each remaining vertex needs degree >= 3.
    let cap = max_degree.min(budget - 3 * (remaining_vertices - 1));
    let mut d = 3;
    while d <= cap {
        seq.push(d);
        gen_degrees(remaining_vertices - 1, budget - d, d, seq, emit);
        seq.pop();
        d += 1;
    }
}

/// Backtrack over symmetric multiplicity tables consistent with `degrees`.
fn gen_tables(degrees: &[usize], k: usize, out: &mut Vec<LoopGraph>) {
    let nv = degrees.len(); // v + 1 vertices (g-vertex included)
    let v = nv - 1;
    let mut rem: Vec<usize> = degrees.to_vec();
    let mut table: Vec<Vec<usize>> = (0..nv).map(|i| vec![0usize; nv - i]).collect();

    #[allow(clippy::too_many_arguments)]
    fn rec(
        i: usize,
        j: usize,
        nv: usize,
        rem: &mut Vec<usize>,
        table: &mut Vec<Vec<usize>>,
        degrees: &[usize],
        v: usize,
        k: usize,
        out: &mut Vec<LoopGraph>,
    ) {
        if i == nv {
            if rem.iter().all(|&r| r == 0) {
                out.push(LoopGraph {
                    v,
                    degrees: degrees.to_vec(),
                    mult: table.clone(),
                    loop_order: k,
                });
            }
            return;
        }
        let (ni, nj) = if j == nv - 1 { (i + 1, i + 1) } else { (i, j + 1) };
        if i == j {
            // Self-loops consume 2 at a time.
            let maxa = rem[i] / 2;
            for a in 0..=maxa {
                table[i][0] = a;
                rem[i] -= 2 * a;
                let feasible = if i == nv - 1 {
                    rem[i] == 0
                } else {
                    let capacity: usize = (i + 1..nv).map(|j2| rem[j2]).sum();
                    rem[i] <= capacity
                };
                if feasible {
                    rec(ni, nj, nv, rem, table, degrees, v, k, out);
                }
                rem[i] += 2 * a;
                table[i][0] = 0;
            }
        } else {
            let maxa = rem[i].min(rem[j]);
            for a in 0..=maxa {
                table[i][j - i] = a;
                rem[i] -= a;
                rem[j] -= a;
                let feasible = if j == nv - 1 {
                    rem[i] == 0
                } else {
                    let capacity: usize = (j + 1..nv).map(|j2| rem[j2]).sum();
                    rem[i] <= capacity
                };
                if feasible {
                    rec(ni, nj, nv, rem, table, degrees, v, k, out);
                }
                rem[i] += a;
                rem[j] += a;
                table[i][j - i] = 0;
            }
        }
    }

    rec(0, 0, nv, &mut rem, &mut table, degrees, v, k, out);
}

/// Number of isomorphism classes: tables identified by permutations of
/// equal-degree f-vertices (canonical minimal table).
pub fn isomorphism_class_count(k: usize) -> usize {
    use std::collections::HashSet;
    let graphs = enumerate_graphs(k);
    let mut classes: HashSet<(Vec<usize>, Vec<usize>)> = HashSet::new();
    for g in &graphs {
        classes.insert((g.degrees.clone(), canonical_table(g)));
    }
    classes.len()
}

/// Minimal flattened table over the group permuting equal-degree f-vertices.
fn canonical_table(g: &LoopGraph) -> Vec<usize> {
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut i = 1;
    while i <= g.v {
        let mut j = i;
        while j + 1 <= g.v && g.degrees[j + 1] == g.degrees[i] {
            j += 1;
        }
        blocks.push((i..=j).collect());
        i = j + 1;
    }
    let mut best: Option<Vec<usize>> = None;
    let mut perm: Vec<usize> = (0..=g.v).collect();
    permute_blocks(&blocks, 0, &mut perm, &mut |perm| {
        let mut flat = Vec::with_capacity((g.v + 1) * (g.v + 2) / 2);
        for i in 0..=g.v {
            for j in i..=g.v {
                flat.push(g.a(perm[i], perm[j]));
            }
        }
        match &best {
            None => best = Some(flat),
            Some(b) if flat < *b => best = Some(flat),
            _ => {}
        }
    });
    best.unwrap()
}

fn permute_blocks(
    blocks: &[Vec<usize>],
    bi: usize,
    perm: &mut Vec<usize>,
    emit: &mut impl FnMut(&Vec<usize>),
) {
    if bi == blocks.len() {
        emit(perm);
        return;
    }
    let block = blocks[bi].clone();
    let mut order: Vec<usize> = block.clone();
    let blocks_rest = blocks;
    heap_permutations(&mut order, 0, &mut |arr| {
        for (slot, &val) in block.iter().zip(arr.iter()) {
            perm[*slot] = val;
        }
        permute_blocks(blocks_rest, bi + 1, perm, emit);
    });
    for &slot in &block {
        perm[slot] = slot;
    }
}

fn heap_permutations(arr: &mut Vec<usize>, i: usize, emit: &mut impl FnMut(&Vec<usize>)) {
    if i == arr.len() {
        emit(arr);
        return;
    }
    for j in i..arr.len() {
        arr.swap(i, j);
        heap_permutations(arr, i + 1, emit);
        arr.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    #[test]
    fn order_one_has_five_graphs() {
        let graphs = enumerate_graphs(1);
        assert_eq!(graphs.len(), 5);
        assert_eq!(isomorphism_class_count(1), 5);
        // Symmetry factors of the five terms: 2, 2, 8, 8, 12.
        let mut syms: Vec<BigRational> = graphs.iter().map(|g| g.symmetry_factor()).collect();
        syms.sort();
        let expect: Vec<BigRational> = [2, 2, 8, 8, 12].iter().map(|&s| rat(s, 1)).collect();
        assert_eq!(syms, expect);
    }

    #[test]
    fn edge_count_constraint() {
        for k in 1..=3 {
            for g in enumerate_graphs(k) {
                let e = g.edge_count();
                assert_eq!(e, k + g.v, "e = k + v violated");
                assert!(e >= k && e <= 3 * k, "edge bounds violated");
                for i in 0..=g.v {
                    let mut d = 2 * g.a(i, i);
                    for j in 0..=g.v {
                        if j != i {
                            d += g.a(i, j);
                        }
                    }
                    assert_eq!(d, g.degrees[i]);
                }
            }
        }
    }

    #[test]
    fn class_counts_regression() {
        assert_eq!(isomorphism_class_count(1), 5);
        assert_eq!(isomorphism_class_count(2), 41);
        assert_eq!(isomorphism_class_count(3), 378);
    }
}
