//! Chain initialization: class assignments and starting structures.

use rand::Rng;

use crate::error::{Error, Result};
use crate::identifiability::admissible;
use crate::model::{Dataset, DomainStructure, StructureMode};

/// Overdispersed default seeding: pick the first center uniformly among
/// distinct rows, then repeatedly add the row farthest (in minimum L1
/// distance) from the chosen centers, and assign every subject to its nearest
/// center, lowest index winning ties.
pub fn seed_classes_default<R: Rng + ?Sized>(
    data: &Dataset,
    classes: usize,
    rng: &mut R,
) -> Result<Vec<u32>> {
    let n = data.n_subjects();
    if classes <= 1 {
        return Ok(vec![0; n]);
    }
    let mut distinct: Vec<usize> = Vec::new();
    {
        let mut seen = std::collections::HashSet::new();
        for i in 0..n {
            if seen.insert(data.row(i)) {
                distinct.push(i);
            }
        }
    }
    if distinct.len() < classes {
        return Err(Error::TooFewDistinctRows {
            needed: classes,
            found: distinct.len(),
        });
    }
    let l1 = |a: &[u32], b: &[u32]| -> u64 {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| (x as i64 - y as i64).unsigned_abs())
            .sum()
    };
    let mut centers: Vec<usize> = vec![distinct[rng.gen_range(0..distinct.len())]];
    while centers.len() < classes {
        let mut best_row = None;
        let mut best_dist = 0u64;
        for &candidate in &distinct {
            if centers.contains(&candidate) {
                continue;
            }
            let dist = centers
                .iter()
                .map(|&c| l1(data.row(candidate), data.row(c)))
                .min()
                .unwrap();
            if best_row.is_none() || dist > best_dist {
                best_row = Some(candidate);
                best_dist = dist;
            }
        }
        centers.push(best_row.expect("enough distinct rows"));
    }
    let assignment = (0..n)
        .map(|i| {
            let mut best_class = 0u32;
            let mut best_dist = u64::MAX;
            for (c, &center) in centers.iter().enumerate() {
                let dist = l1(data.row(i), data.row(center));
                if dist < best_dist {
                    best_dist = dist;
                    best_class = c as u32;
                }
            }
            best_class
        })
        .collect();
    Ok(assignment)
}

/// Independent uniform class assignments.
pub fn seed_classes_random<R: Rng + ?Sized>(n: usize, classes: usize, rng: &mut R) -> Vec<u32> {
    (0..n).map(|_| rng.gen_range(0..classes) as u32).collect()
}

/// A starting structure drawn uniformly over slot assignments, rejected
/// against admissibility. `groups` gives the effective class grouping at
/// start (a single group while the homogeneous warmup runs).
#[allow(clippy::too_many_arguments)]
pub fn seed_structure_random<R: Rng + ?Sized>(
    data: &Dataset,
    classes: usize,
    slots: u32,
    mode: StructureMode,
    equivalence: Option<&[u32]>,
    start_homogeneous: bool,
    max_items: u32,
    rng: &mut R,
) -> Result<DomainStructure> {
    let items = data.n_items();
    const ATTEMPTS: usize = 100_000;
    for _ in 0..ATTEMPTS {
        let delta: Vec<Vec<u32>> = if start_homogeneous {
            let col: Vec<u32> = (0..items).map(|_| rng.gen_range(0..slots)).collect();
            vec![col; classes]
        } else {
            // Draw one column per group representative and copy within groups.
            let labels: Vec<u32> = match (mode, equivalence) {
                (StructureMode::Homogeneous, _) => vec![0; classes],
                (StructureMode::Heterogeneous, _) => (0..classes as u32).collect(),
                (StructureMode::Partial, Some(eq)) => eq.to_vec(),
                (StructureMode::Partial, None) => {
                    return Err(Error::ConfigInvalid(
                        "partial mode needs equivalence labels".into(),
                    ))
                }
            };
            let mut per_label: std::collections::HashMap<u32, Vec<u32>> =
                std::collections::HashMap::new();
            let mut delta = Vec::with_capacity(classes);
            for &label in &labels {
                let col = per_label
                    .entry(label)
                    .or_insert_with(|| (0..items).map(|_| rng.gen_range(0..slots)).collect());
                delta.push(col.clone());
            }
            delta
        };
        let structure = DomainStructure::new(delta, slots, mode, equivalence)?;
        if admissible(&structure, data.cardinalities(), max_items, classes) {
            return Ok(structure);
        }
    }
    Err(Error::ConfigInvalid(
        "could not draw an admissible random structure".into(),
    ))
}
