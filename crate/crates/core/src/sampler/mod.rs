//! Metropolis-within-Gibbs sampling of domain latent class models.

mod config;
mod gibbs;
mod propose;
mod seeding;
mod worker;

pub use config::{ModelKind, Resolved, SamplerConfig, SeedStyle};
pub use gibbs::domain_log_marginal;
pub use propose::{propose_swap, ProposalContext, ProposalOutcome};
pub use seeding::{seed_classes_default, seed_classes_random, seed_structure_random};

use rayon::prelude::*;

use crate::error::Result;
use crate::model::Dataset;
use crate::record::ChainRecord;

/// Runs a single chain. `chain_index` selects the chain's seed stream from
/// the root seed, so chains of one fit never share randomness.
pub fn run_chain(data: &Dataset, config: &SamplerConfig, chain_index: u32) -> Result<ChainRecord> {
    let resolved = config.resolve(data)?;
    let worker = worker::Worker::new(data, config, &resolved, chain_index)?;
    worker.run()
}

/// Runs `config.chains` chains in parallel and returns them in index order.
pub fn run_chains(data: &Dataset, config: &SamplerConfig) -> Result<Vec<ChainRecord>> {
    let resolved = config.resolve(data)?;
    (0..resolved.chains)
        .into_par_iter()
        .map(|k| {
            let worker = worker::Worker::new(data, config, &resolved, k)?;
            worker.run()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{structures_equal, DomainStructure, StructureMode};

    fn toy_data(n: usize) -> Dataset {
        // Items 0 and 1 perfectly correlated, item 2 independent noise.
        let rows: Vec<Vec<u32>> = (0..n)
            .map(|i| {
                let a = (i % 2) as u32;
                vec![a, a, ((i / 2) % 2) as u32]
            })
            .collect();
        Dataset::new(&rows, vec![2, 2, 2], None).unwrap()
    }

    #[test]
    fn zero_main_iterations_record_only_warmup() {
        let data = toy_data(8);
        let mut config = SamplerConfig::new(1);
        config.warmup = 4;
        config.main = 0;
        config.seed = 3;
        let record = run_chain(&data, &config, 0).unwrap();
        assert_eq!(record.total_iterations(), 4);
        assert_eq!(record.main_iterations(), 0);
    }

    #[test]
    fn fixed_structure_never_moves() {
        let data = toy_data(10);
        let mut config = SamplerConfig::new(2);
        config.model = ModelKind::Traditional;
        config.warmup = 5;
        config.main = 20;
        config.seed = 1;
        let record = run_chain(&data, &config, 0).unwrap();
        let singles =
            DomainStructure::all_singletons(3, 2, 8, StructureMode::Homogeneous, None).unwrap();
        for s in &record.structures {
            assert!(structures_equal(s, &singles).unwrap());
        }
        assert_eq!(record.meta.proposals, 0);
    }

    #[test]
    fn identical_seeds_give_bit_identical_records() {
        let data = toy_data(30);
        let mut config = SamplerConfig::new(2);
        config.warmup = 20;
        config.main = 30;
        config.seed = 77;
        config.audit_every = Some(10);
        let a = run_chain(&data, &config, 0).unwrap();
        let b = run_chain(&data, &config, 0).unwrap();
        assert_eq!(a.pi, b.pi);
        assert_eq!(a.loglik, b.loglik);
        assert_eq!(a.meta.accepted, b.meta.accepted);
        let pairs = a.structures.iter().zip(&b.structures);
        for (x, y) in pairs {
            assert_eq!(x.delta(), y.delta());
        }
        // A different chain index diverges.
        let c = run_chain(&data, &config, 1).unwrap();
        assert_ne!(a.pi, c.pi);
    }

    #[test]
    fn counts_audit_passes_every_sweep_on_small_runs() {
        let data = toy_data(24);
        for model in [ModelKind::Homogeneous, ModelKind::Heterogeneous] {
            let mut config = SamplerConfig::new(2);
            config.model = model;
            config.warmup = 30;
            config.main = 40;
            config.seed = 5;
            config.hyper.n_homo_iters = Some(10);
            config.audit_every = Some(1); // audit after every iteration
            run_chain(&data, &config, 0).unwrap();
        }
    }

    #[test]
    fn collapsed_and_noncollapsed_runs_audit_cleanly() {
        let data = toy_data(16);
        for collapsed in [false, true] {
            let mut config = SamplerConfig::new(2);
            config.collapsed_class_update = collapsed;
            config.warmup = 10;
            config.main = 20;
            config.seed = 8;
            config.audit_every = Some(1);
            run_chain(&data, &config, 0).unwrap();
        }
    }

    #[test]
    fn merge_of_perfectly_correlated_items_is_accepted_quickly() {
        // Items 0 and 1 always agree; the collapsed marginal gain for
        // merging them dwarfs the prior cost, so a short run must visit the
        // merged structure.
        let data = toy_data(400);
        let mut config = SamplerConfig::new(1);
        config.warmup = 0;
        config.main = 30;
        config.seed = 2;
        let record = run_chain(&data, &config, 0).unwrap();
        let merged =
            DomainStructure::new(vec![vec![0, 0, 1]], 8, StructureMode::Homogeneous, None).unwrap();
        let hit = record
            .structures
            .iter()
            .any(|s| structures_equal(s, &merged).unwrap());
        assert!(hit, "merged structure never visited");
    }

    #[test]
    fn acceptance_ratio_of_correlated_merge_is_enormous() {
        // Direct computation of the log acceptance ratio for merging two
        // perfectly correlated binary items on n = 500 subjects: the
        // marginal-likelihood gain is on the order of n ln 2.
        use crate::sampler::gibbs::domain_log_marginal;
        let n: u32 = 500;
        let merged = [n / 2, 0, 0, n / 2];
        let split = [n / 2, n / 2];
        let gain = domain_log_marginal(&merged, 1.0) - 2.0 * domain_log_marginal(&split, 1.0);
        assert!(gain > 200.0, "log marginal gain {gain}");
    }

    #[test]
    fn heterogeneous_release_copies_warmup_partition() {
        let data = toy_data(40);
        let mut config = SamplerConfig::new(2);
        config.model = ModelKind::Heterogeneous;
        config.warmup = 20;
        config.main = 10;
        config.hyper.n_homo_iters = Some(20);
        config.seed = 4;
        let record = run_chain(&data, &config, 0).unwrap();
        // During the homogeneous phase every recorded structure has equal
        // per-class partitions.
        for s in record.structures.iter().take(20) {
            assert_eq!(s.class_partition(0), s.class_partition(1));
        }
    }

    #[test]
    fn run_chains_returns_ordered_independent_chains() {
        let data = toy_data(12);
        let mut config = SamplerConfig::new(2);
        config.chains = 3;
        config.warmup = 5;
        config.main = 5;
        config.seed = 6;
        let records = run_chains(&data, &config).unwrap();
        assert_eq!(records.len(), 3);
        for (k, r) in records.iter().enumerate() {
            assert_eq!(r.meta.chain_index, k as u32);
        }
        assert_ne!(records[0].pi, records[1].pi);
    }
}
