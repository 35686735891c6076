//! Property tests for the structure algebra and coding layers.

mod common;

use proptest::prelude::*;

use dlcm::encoding::MappingVector;
use dlcm::identifiability::{
    greedy_kruskal_value, kruskal_identifiable, pooled_domains, PooledPartition,
};
use dlcm::model::{structures_equal, DomainStructure, StructureMode};

/// Strategy: a random structure with small dimensions.
fn structure_strategy() -> impl Strategy<Value = DomainStructure> {
    (2usize..=6, 1usize..=3, 4u32..=8).prop_flat_map(|(items, classes, slots)| {
        proptest::collection::vec(proptest::collection::vec(0..slots, items), classes).prop_map(
            move |delta| {
                DomainStructure::new(delta, slots, StructureMode::Heterogeneous, None).unwrap()
            },
        )
    })
}

/// Random relabeling: apply a permutation of slot ids to every class column.
fn relabel(structure: &DomainStructure, offset: u32) -> DomainStructure {
    let slots = structure.slots();
    let perm: Vec<u32> = (0..slots).map(|d| (d + offset) % slots).collect();
    let delta: Vec<Vec<u32>> = structure
        .delta()
        .iter()
        .map(|col| col.iter().map(|&d| perm[d as usize]).collect())
        .collect();
    DomainStructure::new(
        delta,
        slots,
        structure.mode(),
        Some(structure.equivalence()),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn canonicalize_is_idempotent_and_label_invariant(
        s in structure_strategy(),
        offset in 1u32..4,
    ) {
        let canon = s.canonicalize();
        prop_assert_eq!(canon.clone(), canon.canonicalize());
        let relabeled = relabel(&s, offset).canonicalize();
        prop_assert_eq!(canon.delta(), relabeled.delta());
        prop_assert!(structures_equal(&s, &relabeled).unwrap());
    }

    #[test]
    fn pooled_domains_equal_brute_force_closure(s in structure_strategy()) {
        let pooled = pooled_domains(&s);
        let partitions: Vec<Vec<Vec<usize>>> =
            (0..s.n_classes()).map(|c| s.class_partition(c)).collect();
        let expected = common::closure_blocks(s.n_items(), &partitions);
        prop_assert_eq!(pooled.blocks, expected);
    }

    #[test]
    fn kruskal_is_invariant_under_relabeling(
        s in structure_strategy(),
        offset in 1u32..4,
        classes in 2usize..=4,
    ) {
        let q = vec![2u32; s.n_items()];
        let a = kruskal_identifiable(&pooled_domains(&s), &q, classes);
        let b = kruskal_identifiable(&pooled_domains(&relabel(&s, offset)), &q, classes);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn merging_blocks_never_increases_greedy_value(
        sizes in proptest::collection::vec(1usize..=3, 2..6),
        classes in 2usize..=4,
        pick in any::<(usize, usize)>(),
    ) {
        // Build singleton-ish pooled blocks over consecutive items.
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut next = 0usize;
        for s in &sizes {
            blocks.push((next..next + s).collect());
            next += s;
        }
        let q = vec![2u32; next];
        let before = greedy_kruskal_value(&PooledPartition { blocks: blocks.clone() }, &q, classes);
        let i = pick.0 % blocks.len();
        let mut j = pick.1 % blocks.len();
        if i == j {
            j = (j + 1) % blocks.len();
        }
        if i != j {
            let (a, b) = (i.min(j), i.max(j));
            let moved = blocks.remove(b);
            blocks[a].extend(moved);
            blocks[a].sort_unstable();
            blocks.sort_by_key(|blk| blk[0]);
            let after = greedy_kruskal_value(&PooledPartition { blocks }, &q, classes);
            prop_assert!(after <= before, "merge raised M: {before} -> {after}");
        }
    }

    #[test]
    fn encode_decode_bijection_on_random_domains(
        q in proptest::collection::vec(2u32..=4, 1..=5),
    ) {
        let items: Vec<usize> = (0..q.len()).collect();
        let mv = MappingVector::new(&items, &q).unwrap();
        let total = mv.pattern_count();
        prop_assert_eq!(total, q.iter().map(|&x| x as u64).product::<u64>());
        let mut row = vec![0u32; q.len()];
        for r in 0..total {
            for (j, digit) in mv.decode(r).unwrap() {
                row[j] = digit;
            }
            prop_assert_eq!(mv.encode(&row), r);
        }
    }

    #[test]
    fn size_class_masses_sum_to_one(items in 2usize..=5, slots in 2u32..=6) {
        // Summing the size-class prior over every partition-shape of `items`
        // (counted once per multiset) must give exactly one when domains fit.
        let mut total = 0.0;
        for partition in common::set_partitions(items) {
            if partition.len() > slots as usize {
                continue;
            }
            let mut sizes: Vec<usize> = partition.iter().map(|b| b.len()).collect();
            sizes.sort_unstable_by(|a, b| b.cmp(a));
            // size_class_prior covers all partitions with this multiset at
            // once, so divide by the number of partitions sharing it.
            let same: usize = common::set_partitions(items)
                .iter()
                .filter(|p| {
                    let mut s: Vec<usize> = p.iter().map(|b| b.len()).collect();
                    s.sort_unstable_by(|a, b| b.cmp(a));
                    s == sizes
                })
                .count();
            total += dlcm::priors::size_class_prior(&sizes, items, slots).unwrap() / same as f64;
        }
        prop_assert!((total - 1.0).abs() < 1e-9, "total {total}");
    }
}
