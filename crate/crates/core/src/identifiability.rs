//! Structure admissibility: pooled domains, the greedy Kruskal check, and a
//! Kronecker-separability test oracle.
//!
//! A structure is admitted by the sampler only when every domain respects the
//! item cap and the greedy tripartition of pooled domains satisfies
//! sum_k min(kappa_k, C) >= 2C + 2. The greedy check is conservative: it
//! mirrors the deterministic procedure rather than searching all
//! tripartitions.

use nalgebra::DMatrix;

use crate::encoding::MappingVector;
use crate::error::Result;
use crate::model::DomainStructure;

/// Maximal item sets closed under "shares a domain in some class".
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PooledPartition {
    /// Disjoint blocks covering all items; each block sorted, blocks ordered
    /// by smallest member.
    pub blocks: Vec<Vec<usize>>,
}

struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

/// Connected components of the graph joining items that share a domain in
/// any class.
pub fn pooled_domains(structure: &DomainStructure) -> PooledPartition {
    let items = structure.n_items();
    let mut dsu = DisjointSet::new(items);
    for c in 0..structure.n_classes() {
        for d in structure.nonempty_domains(c) {
            let members = structure.items_in(c, d);
            for pair in members.windows(2) {
                dsu.union(pair[0], pair[1]);
            }
        }
    }
    blocks_from_roots(items, |j| dsu.find(j))
}

/// Pooled partition computed directly from per-class item partitions.
pub fn pooled_from_partitions(items: usize, partitions: &[Vec<Vec<usize>>]) -> PooledPartition {
    let mut dsu = DisjointSet::new(items);
    for partition in partitions {
        for members in partition {
            for pair in members.windows(2) {
                dsu.union(pair[0], pair[1]);
            }
        }
    }
    blocks_from_roots(items, |j| dsu.find(j))
}

fn blocks_from_roots(items: usize, mut root_of: impl FnMut(usize) -> usize) -> PooledPartition {
    let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); items];
    for j in 0..items {
        by_root[root_of(j)].push(j);
    }
    let mut blocks: Vec<Vec<usize>> = by_root.into_iter().filter(|b| !b.is_empty()).collect();
    blocks.sort_by_key(|b| b[0]);
    PooledPartition { blocks }
}

/// Greedy sufficient check for generic identifiability.
///
/// Blocks are taken in descending pattern count (ties broken by smallest
/// member item) and each is assigned to the tripartition part that maximizes
/// the increment of M = sum_k min(kappa_k, C); returns M >= 2C + 2.
pub fn kruskal_identifiable(
    pooled: &PooledPartition,
    cardinalities: &[u32],
    n_classes: usize,
) -> bool {
    // A single class is no mixture: pattern probabilities are observed
    // directly, so the tripartition requirement does not apply.
    if n_classes <= 1 {
        return true;
    }
    greedy_kruskal_value(pooled, cardinalities, n_classes) >= 2 * n_classes as u128 + 2
}

/// The greedy tripartition value M = sum_k min(kappa_k, C).
pub fn greedy_kruskal_value(
    pooled: &PooledPartition,
    cardinalities: &[u32],
    n_classes: usize,
) -> u128 {
    let c = n_classes as u128;
    let block_patterns = |block: &Vec<usize>| -> u128 {
        let mut prod: u128 = 1;
        for &j in block {
            prod = prod.saturating_mul(cardinalities[j] as u128);
        }
        prod
    };
    let mut order: Vec<usize> = (0..pooled.blocks.len()).collect();
    order.sort_by(|&a, &b| {
        block_patterns(&pooled.blocks[b])
            .cmp(&block_patterns(&pooled.blocks[a]))
            .then(pooled.blocks[a][0].cmp(&pooled.blocks[b][0]))
    });
    // Empty parts have kappa = 1 and contribute min(1, C) = 1.
    let mut kappa: [u128; 3] = [1, 1, 1];
    for idx in order {
        let patterns = block_patterns(&pooled.blocks[idx]);
        let mut best_part = 0;
        let mut best_gain = i64::MIN;
        for (part, &k) in kappa.iter().enumerate() {
            let before = k.min(c) as i64;
            let after = k.saturating_mul(patterns).min(c) as i64;
            if after - before > best_gain {
                best_gain = after - before;
                best_part = part;
            }
        }
        kappa[best_part] = kappa[best_part].saturating_mul(patterns);
    }
    kappa.iter().map(|&k| k.min(c)).sum()
}

/// True when every domain obeys the item cap and the Kruskal check passes.
pub fn admissible(
    structure: &DomainStructure,
    cardinalities: &[u32],
    max_items: u32,
    n_classes: usize,
) -> bool {
    for group in structure.class_groups() {
        for part in structure.class_partition(group.representative) {
            if part.len() as u32 > max_items {
                return false;
            }
        }
    }
    kruskal_identifiable(&pooled_domains(structure), cardinalities, n_classes)
}

/// Test oracle: does theta factor as an outer product over some nonempty
/// bipartition of the domain's items?
///
/// `theta` is indexed by the domain's own pattern ids (items ascending,
/// smallest item fastest-varying). For each bipartition the vector is
/// reshaped into a matrix and declared separable when the second singular
/// value is at most `tol`. Singleton domains have no bipartition and return
/// false by convention. Sampled theta is never filtered through this test;
/// the separable set has measure zero.
pub fn kronecker_separable(theta: &[f64], q_sub: &[u32], tol: f64) -> Result<bool> {
    let k = q_sub.len();
    let expected: u64 = q_sub.iter().map(|&q| q as u64).product();
    if theta.len() as u64 != expected {
        return Err(crate::error::Error::DimensionMismatch(format!(
            "theta has {} entries, cardinalities imply {}",
            theta.len(),
            expected
        )));
    }
    if k < 2 {
        return Ok(false);
    }
    let items: Vec<usize> = (0..k).collect();
    let full = MappingVector::new(&items, q_sub)?;
    // Enumerate bipartitions by nonempty proper subsets containing item 0
    // (complements cover the rest).
    for mask in 1..(1u32 << (k - 1)) {
        let side0: Vec<usize> = (0..k).filter(|&j| mask & (1 << j) != 0).collect();
        let side1: Vec<usize> = (0..k).filter(|&j| mask & (1 << j) == 0).collect();
        if side0.is_empty() || side1.is_empty() {
            continue;
        }
        let mv0 = MappingVector::new(&side0, q_sub)?;
        let mv1 = MappingVector::new(&side1, q_sub)?;
        let rows = mv0.pattern_count() as usize;
        let cols = mv1.pattern_count() as usize;
        let mut m = DMatrix::<f64>::zeros(rows, cols);
        let mut row = vec![0u32; k];
        for (r, &p) in theta.iter().enumerate() {
            for (j, digit) in full.decode(r as u64)? {
                row[j] = digit;
            }
            m[(mv0.encode(&row) as usize, mv1.encode(&row) as usize)] = p;
        }
        let mut singulars: Vec<f64> = m
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect();
        singulars.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if singulars.len() < 2 || singulars[1] <= tol {
            return Ok(true);
        }
    }
    Ok(false)
}
