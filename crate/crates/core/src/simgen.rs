//! Synthetic data generators for the three recovery-study scenarios, plus
//! generation from arbitrary (pi, theta, structure) truths.
//!
//! All scenarios use J = 24 binary items and C = 2 equally weighted classes.
//! Traditional data is conditionally independent; homogeneous data shares
//! domains {0,1,2}, {3,4}, {5,6} across classes; heterogeneous data gives
//! class 0 domains {0,1,2}, {5,6}, {7,8} and class 1 domains {2,3,4}, {7,8}.
//! The "bad seed" variant reuses the homogeneous marginals around one 4-item
//! and two 2-item domains; its source tables are not machine-readable, so the
//! pattern shapes follow the homogeneous tables and are documented defaults.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoding::MappingVector;
use crate::error::{Error, Result};
use crate::mathutil::derive_seed;
use crate::model::{Dataset, DomainStructure, ModelParams, StructureMode};

/// Which data-generating process to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Traditional,
    Homogeneous,
    /// The second homogeneous DGP with a 4-item domain.
    HomogeneousBad,
    Heterogeneous,
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Scenario::Traditional => "traditional",
            Scenario::Homogeneous => "homogeneous",
            Scenario::HomogeneousBad => "homogeneous_bad",
            Scenario::Heterogeneous => "heterogeneous",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "traditional" => Ok(Scenario::Traditional),
            "homogeneous" => Ok(Scenario::Homogeneous),
            "homogeneous_bad" | "homogeneous-bad" => Ok(Scenario::HomogeneousBad),
            "heterogeneous" => Ok(Scenario::Heterogeneous),
            other => Err(Error::ConfigInvalid(format!("unknown scenario {other:?}"))),
        }
    }
}

/// A fully materialized data-generating truth.
#[derive(Clone, Debug)]
pub struct Truth {
    pub cardinalities: Vec<u32>,
    pub structure: DomainStructure,
    pub params: ModelParams,
}

/// A plan for one synthetic dataset.
#[derive(Clone, Debug)]
pub struct GeneratorSpec {
    pub scenario: Scenario,
    pub n: usize,
    pub seed: u64,
}

const ITEMS: usize = 24;
const SLOTS: u32 = (ITEMS * ITEMS - 1) as u32;

/// Marginal P(X = 1 | class) pairs cycled over the conditionally
/// independent items of the traditional DGP.
const TRADITIONAL_MARGINALS: [(f64, f64); 6] = [
    (0.2, 0.8),
    (0.8, 0.2),
    (0.2, 0.5),
    (0.8, 0.8),
    (0.2, 0.2),
    (0.8, 0.5),
];

/// Marginal P(X = 1 | class) pairs for the independent items (7..=23) of the
/// homogeneous DGP, cycled in blocks of six.
const HOMOGENEOUS_TAIL_MARGINALS: [(f64, f64); 6] = [
    (0.8, 0.2),
    (0.2, 0.8),
    (0.8, 0.5),
    (0.2, 0.2),
    (0.8, 0.8),
    (0.2, 0.5),
];

fn bernoulli_theta(p_one: f64) -> Vec<f64> {
    vec![1.0 - p_one, p_one]
}

/// Three-item pattern table of the homogeneous DGP, ordered by pattern id
/// (first item fastest). The printed class-1 column sums to 0.98 and is
/// renormalized here.
fn homogeneous_triple() -> [Vec<f64>; 2] {
    let class0 = vec![0.30, 0.30, 0.02, 0.02, 0.02, 0.02, 0.02, 0.30];
    let raw1 = [0.40, 0.03, 0.03, 0.03, 0.03, 0.03, 0.03, 0.40];
    let sum: f64 = raw1.iter().sum();
    let class1 = raw1.iter().map(|v| v / sum).collect();
    [class0, class1]
}

fn pair_table(p00: f64, p10: f64, p01: f64, p11: f64) -> Vec<f64> {
    vec![p00, p10, p01, p11]
}

pub fn build_truth(scenario: Scenario) -> Truth {
    let cardinalities = vec![2u32; ITEMS];
    match scenario {
        Scenario::Traditional => {
            let structure =
                DomainStructure::all_singletons(ITEMS, 2, SLOTS, StructureMode::Homogeneous, None)
                    .expect("singleton truth");
            let mut params = ModelParams::empty(2, SLOTS);
            params.pi = vec![0.5, 0.5];
            for j in 0..ITEMS {
                let (p0, p1) = TRADITIONAL_MARGINALS[j % 6];
                params.theta[0][j] = bernoulli_theta(p0);
                params.theta[1][j] = bernoulli_theta(p1);
            }
            Truth {
                cardinalities,
                structure,
                params,
            }
        }
        Scenario::Homogeneous => {
            // Domains {0,1,2}, {3,4}, {5,6}; items 7..=23 independent.
            let mut col: Vec<u32> = vec![0, 0, 0, 1, 1, 2, 2];
            col.extend((3..20).map(|d| d as u32));
            let structure = DomainStructure::new(
                vec![col.clone(), col],
                SLOTS,
                StructureMode::Homogeneous,
                None,
            )
            .expect("homogeneous truth");
            let mut params = ModelParams::empty(2, SLOTS);
            params.pi = vec![0.5, 0.5];
            let triple = homogeneous_triple();
            params.theta[0][0] = triple[0].clone();
            params.theta[1][0] = triple[1].clone();
            for (class, flip) in [(0usize, false), (1usize, true)] {
                let pair = if flip {
                    pair_table(0.60, 0.05, 0.05, 0.30)
                } else {
                    pair_table(0.30, 0.05, 0.05, 0.60)
                };
                params.theta[class][1] = pair.clone();
                params.theta[class][2] = pair;
            }
            for j in 7..ITEMS {
                let (p0, p1) = HOMOGENEOUS_TAIL_MARGINALS[(j - 7) % 6];
                let slot = j - 4; // singleton slots start at 3
                params.theta[0][slot] = bernoulli_theta(p0);
                params.theta[1][slot] = bernoulli_theta(p1);
            }
            Truth {
                cardinalities,
                structure,
                params,
            }
        }
        Scenario::HomogeneousBad => {
            // One 4-item domain {0,1,2,3} and pairs {4,5}, {6,7}; the rest
            // independent with the homogeneous tail marginals.
            let mut col: Vec<u32> = vec![0, 0, 0, 0, 1, 1, 2, 2];
            col.extend((3..19).map(|d| d as u32));
            let structure = DomainStructure::new(
                vec![col.clone(), col],
                SLOTS,
                StructureMode::Homogeneous,
                None,
            )
            .expect("bad-seed truth");
            let mut params = ModelParams::empty(2, SLOTS);
            params.pi = vec![0.5, 0.5];
            // Concentrate on the all-zero and all-one patterns, uniform rest.
            let quad = |heavy_zero: f64, heavy_one: f64| -> Vec<f64> {
                let rest = (1.0 - heavy_zero - heavy_one) / 14.0;
                let mut t = vec![rest; 16];
                t[0] = heavy_zero;
                t[15] = heavy_one;
                t
            };
            params.theta[0][0] = quad(0.30, 0.30);
            params.theta[1][0] = quad(0.40, 0.20);
            for (class, flip) in [(0usize, false), (1usize, true)] {
                let pair = if flip {
                    pair_table(0.60, 0.05, 0.05, 0.30)
                } else {
                    pair_table(0.30, 0.05, 0.05, 0.60)
                };
                params.theta[class][1] = pair.clone();
                params.theta[class][2] = pair;
            }
            for j in 8..ITEMS {
                let (p0, p1) = HOMOGENEOUS_TAIL_MARGINALS[(j - 8) % 6];
                let slot = j - 5;
                params.theta[0][slot] = bernoulli_theta(p0);
                params.theta[1][slot] = bernoulli_theta(p1);
            }
            Truth {
                cardinalities,
                structure,
                params,
            }
        }
        Scenario::Heterogeneous => {
            // Class 0: {0,1,2}, {5,6}, {7,8}; class 1: {2,3,4}, {7,8}.
            let mut col0: Vec<u32> = vec![0, 0, 0, 1, 2, 3, 3, 4, 4];
            col0.extend((5..20).map(|d| d as u32));
            let mut col1: Vec<u32> = vec![0, 1, 2, 2, 2, 3, 4, 5, 5];
            col1.extend((6..21).map(|d| d as u32));
            let structure =
                DomainStructure::new(vec![col0, col1], SLOTS, StructureMode::Heterogeneous, None)
                    .expect("heterogeneous truth");
            let mut params = ModelParams::empty(2, SLOTS);
            params.pi = vec![0.5, 0.5];
            // Shared 3-item table: mass 0.30 on each single-one pattern.
            let triple = vec![0.02, 0.30, 0.30, 0.02, 0.30, 0.02, 0.02, 0.02];
            // Class 0 slots: 0={0,1,2}, 1={3}, 2={4}, 3={5,6}, 4={7,8}.
            params.theta[0][0] = triple.clone();
            params.theta[0][1] = bernoulli_theta(0.80);
            params.theta[0][2] = bernoulli_theta(0.20);
            params.theta[0][3] = pair_table(0.30, 0.05, 0.05, 0.60);
            params.theta[0][4] = pair_table(0.60, 0.05, 0.05, 0.30);
            // Class 1 slots: 0={0}, 1={1}, 2={2,3,4}, 3={5}, 4={6}, 5={7,8}.
            params.theta[1][0] = bernoulli_theta(0.80);
            params.theta[1][1] = bernoulli_theta(0.20);
            params.theta[1][2] = triple;
            params.theta[1][3] = bernoulli_theta(0.30);
            params.theta[1][4] = bernoulli_theta(0.30);
            params.theta[1][5] = pair_table(0.30, 0.05, 0.05, 0.60);
            // Items 9..=23 independent in both classes.
            let tail: [(f64, f64); 15] = [
                (0.50, 0.20),
                (0.20, 0.80),
                (0.80, 0.20),
                (0.50, 0.80),
                (0.20, 0.20),
                (0.80, 0.80),
                (0.50, 0.20),
                (0.20, 0.80),
                (0.80, 0.20),
                (0.50, 0.80),
                (0.20, 0.20),
                (0.80, 0.80),
                (0.50, 0.20),
                (0.20, 0.80),
                (0.80, 0.20),
            ];
            for (offset, &(p0, p1)) in tail.iter().enumerate() {
                let j = 9 + offset;
                params.theta[0][j - 4] = bernoulli_theta(p0);
                params.theta[1][j - 3] = bernoulli_theta(p1);
            }
            Truth {
                cardinalities,
                structure,
                params,
            }
        }
    }
}

/// Draws a dataset from a truth: class from pi, then one pattern per
/// nonempty domain, decoded into item responses. Returns the hidden labels.
pub fn generate(truth: &Truth, n: usize, seed: u64) -> Result<(Dataset, Vec<u32>)> {
    truth
        .params
        .validate(&truth.structure, &truth.cardinalities)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5157_u64));
    let classes_n = truth.params.pi.len();
    let items = truth.structure.n_items();
    // Per class: (slot, coding, cumulative theta).
    let mut domain_tables: Vec<Vec<(MappingVector, Vec<f64>)>> = Vec::with_capacity(classes_n);
    for c in 0..classes_n {
        let mut per_class = Vec::new();
        for d in truth.structure.nonempty_domains(c) {
            let members = truth.structure.items_in(c, d);
            let mv = MappingVector::new(&members, &truth.cardinalities)?;
            let theta = &truth.params.theta[c][d as usize];
            let mut cumulative = Vec::with_capacity(theta.len());
            let mut acc = 0.0;
            for &p in theta {
                acc += p;
                cumulative.push(acc);
            }
            per_class.push((mv, cumulative));
        }
        domain_tables.push(per_class);
    }
    let mut rows: Vec<Vec<u32>> = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen();
        let mut class = classes_n - 1;
        let mut acc = 0.0;
        for (c, &p) in truth.params.pi.iter().enumerate() {
            acc += p;
            if u < acc {
                class = c;
                break;
            }
        }
        labels.push(class as u32);
        let mut row = vec![0u32; items];
        for (mv, cumulative) in &domain_tables[class] {
            let v: f64 = rng.gen();
            let pattern = cumulative
                .iter()
                .position(|&c| v < c)
                .unwrap_or(cumulative.len() - 1);
            for (j, digit) in mv.decode(pattern as u64)? {
                row[j] = digit;
            }
        }
        rows.push(row);
    }
    let names: Vec<String> = (0..items).map(|j| format!("item_{j}")).collect();
    let data = Dataset::new(&rows, truth.cardinalities.clone(), Some(names))?;
    Ok((data, labels))
}

/// Convenience wrapper for scenario-based generation.
pub fn generate_scenario(spec: &GeneratorSpec) -> Result<(Truth, Dataset, Vec<u32>)> {
    let truth = build_truth(spec.scenario);
    let (data, labels) = generate(&truth, spec.n, spec.seed)?;
    Ok((truth, data, labels))
}

/// Writes `truth.json`: pi, theta (keyed by canonical domain), the canonical
/// structure, and the hidden class labels.
pub fn write_truth_json<P: AsRef<Path>>(truth: &Truth, labels: &[u32], path: P) -> Result<()> {
    let canon = truth.structure.canonicalize();
    let mut theta_entries = Vec::new();
    for c in 0..truth.params.pi.len() {
        let parts = truth.structure.class_partition(c);
        for (canon_id, items) in parts.iter().enumerate() {
            let slot = truth.structure.domain_of(items[0], c);
            theta_entries.push(serde_json::json!({
                "class": c,
                "domain": canon_id,
                "items": items,
                "probs": truth.params.theta[c][slot as usize],
            }));
        }
    }
    let value = serde_json::json!({
        "pi": truth.params.pi,
        "theta": theta_entries,
        "structure": canon.to_report_json(),
        "classes": labels,
    });
    std::fs::write(path, serde_json::to_string_pretty(&value)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truths_satisfy_model_invariants() {
        for scenario in [
            Scenario::Traditional,
            Scenario::Homogeneous,
            Scenario::HomogeneousBad,
            Scenario::Heterogeneous,
        ] {
            let truth = build_truth(scenario);
            truth
                .params
                .validate(&truth.structure, &truth.cardinalities)
                .unwrap_or_else(|e| panic!("{scenario}: {e}"));
        }
    }

    #[test]
    fn traditional_truth_spot_values() {
        let truth = build_truth(Scenario::Traditional);
        for j in [0usize, 6, 12, 18] {
            assert!((truth.params.theta[0][j][1] - 0.2).abs() < 1e-12);
            assert!((truth.params.theta[1][j][1] - 0.8).abs() < 1e-12);
        }
        for j in [3usize, 9, 15, 21] {
            assert!((truth.params.theta[0][j][1] - 0.8).abs() < 1e-12);
            assert!((truth.params.theta[1][j][1] - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn homogeneous_truth_spot_values() {
        let truth = build_truth(Scenario::Homogeneous);
        // Domain {3,4} is slot 1; pattern (1,1) has id 3.
        assert!((truth.params.theta[0][1][3] - 0.60).abs() < 1e-12);
        assert!((truth.params.theta[1][1][3] - 0.30).abs() < 1e-12);
        // Marginal of item 3 in class 0 is 0.05 + 0.60 = 0.65.
        let marginals = crate::encoding::marginal_item_probs(
            &truth.params,
            &truth.structure,
            &truth.cardinalities,
        )
        .unwrap();
        assert!((marginals[0][3][1] - 0.65).abs() < 1e-12);
    }

    #[test]
    fn heterogeneous_truth_spot_values() {
        let truth = build_truth(Scenario::Heterogeneous);
        // Pattern (1,0,0) of the shared triple has id 1 and probability 0.30
        // in both classes.
        assert!((truth.params.theta[0][0][1] - 0.30).abs() < 1e-12);
        assert!((truth.params.theta[1][2][1] - 0.30).abs() < 1e-12);
        // Class partitions differ.
        assert_ne!(
            truth.structure.class_partition(0),
            truth.structure.class_partition(1)
        );
    }

    #[test]
    fn empty_generation_is_allowed() {
        let truth = build_truth(Scenario::Homogeneous);
        let (data, labels) = generate(&truth, 0, 1).unwrap();
        assert_eq!(data.n_subjects(), 0);
        assert!(labels.is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let truth = build_truth(Scenario::Heterogeneous);
        let (a, la) = generate(&truth, 50, 9).unwrap();
        let (b, lb) = generate(&truth, 50, 9).unwrap();
        assert_eq!(la, lb);
        for i in 0..50 {
            assert_eq!(a.row(i), b.row(i));
        }
        let (c, _) = generate(&truth, 50, 10).unwrap();
        assert!((0..50).any(|i| a.row(i) != c.row(i)));
    }

    #[test]
    fn traditional_marginals_match_at_scale() {
        let truth = build_truth(Scenario::Traditional);
        let n = 50_000;
        let (data, labels) = generate(&truth, n, 123).unwrap();
        // P(X_0 = 1 | class 1) = 0.8 within four binomial sigma.
        let class1: Vec<usize> = (0..n).filter(|&i| labels[i] == 1).collect();
        let ones = class1.iter().filter(|&&i| data.response(i, 0) == 1).count();
        let share = ones as f64 / class1.len() as f64;
        let sigma = (0.8 * 0.2 / class1.len() as f64).sqrt();
        assert!((share - 0.8).abs() < 4.0 * sigma, "share {share}");
        // Class share near 0.5.
        let share1 = class1.len() as f64 / n as f64;
        let sigma1 = (0.25 / n as f64).sqrt();
        assert!((share1 - 0.5).abs() < 4.0 * sigma1);
    }

    #[test]
    fn homogeneous_pair_joint_matches_at_scale() {
        let truth = build_truth(Scenario::Homogeneous);
        let n = 50_000;
        let (data, labels) = generate(&truth, n, 321).unwrap();
        let class0: Vec<usize> = (0..n).filter(|&i| labels[i] == 0).collect();
        let mut counts = [0usize; 4];
        for &i in &class0 {
            let r = (data.response(i, 3) + 2 * data.response(i, 4)) as usize;
            counts[r] += 1;
        }
        let expected = [0.30, 0.05, 0.05, 0.60];
        for (r, &want) in expected.iter().enumerate() {
            let got = counts[r] as f64 / class0.len() as f64;
            let sigma = (want * (1.0 - want) / class0.len() as f64).sqrt();
            assert!(
                (got - want).abs() < 4.0 * sigma,
                "pattern {r}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn regenerated_pattern_ids_round_trip() {
        let truth = build_truth(Scenario::Heterogeneous);
        let (data, labels) = generate(&truth, 200, 77).unwrap();
        // Re-encoding each subject's responses under its class's codings
        // reproduces a valid pattern in range for every domain.
        for (i, &label) in labels.iter().enumerate() {
            let c = label as usize;
            for d in truth.structure.nonempty_domains(c) {
                let members = truth.structure.items_in(c, d);
                let mv = MappingVector::new(&members, &truth.cardinalities).unwrap();
                let r = mv.encode(data.row(i));
                assert!(r < mv.pattern_count());
                let decoded = mv.decode(r).unwrap();
                for (j, digit) in decoded {
                    assert_eq!(digit, data.response(i, j));
                }
            }
        }
    }
}
