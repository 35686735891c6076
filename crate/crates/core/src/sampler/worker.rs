//! The Metropolis-within-Gibbs chain worker.
//!
//! Each iteration runs four updates: (1) a Metropolis-Hastings sweep over the
//! domain structure with theta collapsed out, repeated n_domain_iters times
//! per class group; (2) a Gibbs redraw of every nonempty theta from its
//! Dirichlet full conditional; (3) a Gibbs redraw of pi; (4) a Gibbs redraw
//! of every subject's class, either conditional on (pi, theta) or collapsed.
//! Heterogeneous and partial fits run their first n_homo_iters iterations
//! under the homogeneous restriction, then copy the shared partition into
//! every class group and release.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoding::MappingVector;
use crate::error::{Error, Result};
use crate::identifiability::{kruskal_identifiable, pooled_from_partitions};
use crate::mathutil::{categorical_from_log, derive_seed, dirichlet_draw, logsumexp};
use crate::model::{ChainState, Dataset, DomainStructure, ModelParams, StructureMode};
use crate::priors::log_prior_class;
use crate::record::{ChainMeta, ChainRecord, ThetaEntry};
use crate::sampler::config::{Resolved, SamplerConfig, SeedStyle};
use crate::sampler::gibbs::domain_log_marginal;
use crate::sampler::propose::{propose_swap, ProposalContext};
use crate::sampler::seeding;

/// Per-class-group caches: the shared partition and subject patterns.
struct GroupState {
    /// Member classes, ascending.
    classes: Vec<usize>,
    /// Sorted nonempty slot ids.
    active: Vec<u32>,
    /// items[slot]: sorted member items; empty when the slot is empty.
    items: Vec<Vec<usize>>,
    /// mv[slot]: coding for the slot's items.
    mv: Vec<Option<MappingVector>>,
    /// patterns[slot][subject]: the subject's pattern id under this coding.
    patterns: Vec<Vec<u32>>,
}

impl GroupState {
    fn clear_slot(&mut self, slot: u32) {
        let s = slot as usize;
        self.items[s].clear();
        self.mv[s] = None;
        self.patterns[s].clear();
    }

    fn set_slot(&mut self, slot: u32, items: Vec<usize>, mv: MappingVector, patterns: Vec<u32>) {
        let s = slot as usize;
        self.items[s] = items;
        self.mv[s] = Some(mv);
        self.patterns[s] = patterns;
    }

    fn rebuild_active(&mut self) {
        self.active = (0..self.items.len() as u32)
            .filter(|&d| !self.items[d as usize].is_empty())
            .collect();
    }
}

pub(crate) struct Worker<'a> {
    data: &'a Dataset,
    cfg: &'a Resolved,
    config_echo: SamplerConfig,
    chain_index: u32,
    chain_seed: u64,
    pub(crate) rng: ChaCha8Rng,
    groups: Vec<GroupState>,
    group_of_class: Vec<usize>,
    delta: Vec<Vec<u32>>,
    pub(crate) classes: Vec<u32>,
    pub(crate) counts_class: Vec<u32>,
    pub(crate) counts_theta: Vec<Vec<Vec<u32>>>,
    pi: Vec<f64>,
    theta: Vec<Vec<Vec<f64>>>,
    ln_pi: Vec<f64>,
    ln_theta: Vec<Vec<Vec<f64>>>,
    released: bool,
    proposed: u64,
    accepted: u64,
}

impl<'a> Worker<'a> {
    pub(crate) fn new(
        data: &'a Dataset,
        config: &SamplerConfig,
        cfg: &'a Resolved,
        chain_index: u32,
    ) -> Result<Self> {
        let chain_seed = derive_seed(cfg.seed, chain_index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(chain_seed);
        let classes_n = cfg.classes;

        let classes = match cfg.seed_style {
            SeedStyle::Default => seeding::seed_classes_default(data, classes_n, &mut rng)?,
            SeedStyle::Random => {
                seeding::seed_classes_random(data.n_subjects(), classes_n, &mut rng)
            }
        };

        // Heterogeneous and partial fits start under homogeneous restrictions.
        let start_merged = cfg.mode != StructureMode::Homogeneous && cfg.n_homo_iters > 0;
        let structure = match (&cfg.fixed_structure, cfg.seed_style) {
            (Some(fixed), _) => fixed.clone(),
            (None, SeedStyle::Default) => DomainStructure::all_singletons(
                data.n_items(),
                classes_n,
                cfg.slots,
                cfg.mode,
                cfg.equivalence.as_deref(),
            )?,
            (None, SeedStyle::Random) => seeding::seed_structure_random(
                data,
                classes_n,
                cfg.slots,
                cfg.mode,
                cfg.equivalence.as_deref(),
                start_merged,
                cfg.max_items,
                &mut rng,
            )?,
        };

        let delta = structure.delta().to_vec();
        let mut worker = Worker {
            data,
            cfg,
            config_echo: config.clone(),
            chain_index,
            chain_seed,
            rng,
            groups: Vec::new(),
            group_of_class: vec![0; classes_n],
            delta,
            classes,
            counts_class: vec![0; classes_n],
            counts_theta: vec![vec![Vec::new(); cfg.slots as usize]; classes_n],
            pi: vec![1.0 / classes_n as f64; classes_n],
            theta: vec![vec![Vec::new(); cfg.slots as usize]; classes_n],
            ln_pi: vec![0.0; classes_n],
            ln_theta: vec![vec![Vec::new(); cfg.slots as usize]; classes_n],
            released: !start_merged,
            proposed: 0,
            accepted: 0,
        };
        let labels = worker.effective_labels();
        worker.build_groups(&labels)?;
        worker.rebuild_counts();
        // Complete the state so iteration 1's collapsed sweep starts from a
        // consistent (theta, pi) pair.
        worker.gibbs_theta();
        worker.gibbs_pi();
        Ok(worker)
    }

    fn effective_labels(&self) -> Vec<u32> {
        if !self.released {
            return vec![0; self.cfg.classes];
        }
        match self.cfg.mode {
            StructureMode::Homogeneous => vec![0; self.cfg.classes],
            StructureMode::Heterogeneous => (0..self.cfg.classes as u32).collect(),
            StructureMode::Partial => self
                .cfg
                .equivalence
                .clone()
                .expect("partial mode resolved with labels"),
        }
    }

    fn build_groups(&mut self, labels: &[u32]) -> Result<()> {
        let mut order: Vec<u32> = Vec::new();
        for &l in labels {
            if !order.contains(&l) {
                order.push(l);
            }
        }
        self.groups.clear();
        for (g, &label) in order.iter().enumerate() {
            let members: Vec<usize> = (0..self.cfg.classes)
                .filter(|&c| labels[c] == label)
                .collect();
            for &c in &members {
                self.group_of_class[c] = g;
            }
            let rep = members[0];
            let slots = self.cfg.slots as usize;
            let mut group = GroupState {
                classes: members,
                active: Vec::new(),
                items: vec![Vec::new(); slots],
                mv: vec![None; slots],
                patterns: vec![Vec::new(); slots],
            };
            for j in 0..self.data.n_items() {
                group.items[self.delta[rep][j] as usize].push(j);
            }
            group.rebuild_active();
            for &slot in &group.active {
                let items = group.items[slot as usize].clone();
                let mv = MappingVector::new(&items, self.data.cardinalities())?;
                let patterns = self.encode_column(&mv);
                group.mv[slot as usize] = Some(mv);
                group.patterns[slot as usize] = patterns;
            }
            self.groups.push(group);
        }
        Ok(())
    }

    fn encode_column(&self, mv: &MappingVector) -> Vec<u32> {
        (0..self.data.n_subjects())
            .map(|i| mv.encode(self.data.row(i)) as u32)
            .collect()
    }

    fn rebuild_counts(&mut self) {
        for c in 0..self.cfg.classes {
            self.counts_class[c] = 0;
            for slot in 0..self.cfg.slots as usize {
                self.counts_theta[c][slot].clear();
            }
            let group = &self.groups[self.group_of_class[c]];
            for &slot in &group.active {
                let patterns = group.mv[slot as usize]
                    .as_ref()
                    .expect("active slot has coding")
                    .pattern_count() as usize;
                self.counts_theta[c][slot as usize] = vec![0; patterns];
            }
        }
        for i in 0..self.data.n_subjects() {
            let c = self.classes[i] as usize;
            self.counts_class[c] += 1;
            let group = &self.groups[self.group_of_class[c]];
            for &slot in &group.active {
                let r = group.patterns[slot as usize][i] as usize;
                self.counts_theta[c][slot as usize][r] += 1;
            }
        }
    }

    /// Copies the shared warmup partition into each mode-defined class group.
    fn release_groups(&mut self) -> Result<()> {
        self.released = true;
        let labels = self.effective_labels();
        self.build_groups(&labels)
    }

    fn current_structure(&self) -> DomainStructure {
        DomainStructure::new(
            self.delta.clone(),
            self.cfg.slots,
            self.cfg.mode,
            self.cfg.equivalence.as_deref(),
        )
        .expect("worker state is always a valid structure")
    }

    pub(crate) fn state(&self) -> ChainState {
        ChainState {
            structure: self.current_structure(),
            params: ModelParams {
                pi: self.pi.clone(),
                theta: self.theta.clone(),
            },
            classes: self.classes.clone(),
            counts_class: self.counts_class.clone(),
            counts_theta: self.counts_theta.clone(),
            rng: self.rng.clone(),
            iteration: 0,
        }
    }

    fn structure_sweep(&mut self) -> Result<()> {
        for g in 0..self.groups.len() {
            for _ in 0..self.cfg.n_domain_iters {
                self.proposed += 1;
                self.try_structure_move(g)?;
            }
        }
        Ok(())
    }

    fn try_structure_move(&mut self, g: usize) -> Result<()> {
        let n = self.data.n_subjects();
        let group = &self.groups[g];
        let aligned_items: Vec<Vec<usize>> = group
            .active
            .iter()
            .map(|&d| group.items[d as usize].clone())
            .collect();
        let ctx = ProposalContext {
            active: &group.active,
            items: &aligned_items,
            slots: self.cfg.slots,
            p_empty: self.cfg.p_empty,
            max_items: self.cfg.max_items,
        };
        let proposal = match propose_swap(&ctx, &mut self.rng) {
            Ok(p) => p,
            Err(Error::NoValidProposal) => return Ok(()),
            Err(e) => return Err(e),
        };
        let (d1, d2) = (proposal.d1 as usize, proposal.d2 as usize);
        let side_a = &proposal.items_d1;
        let side_b = &proposal.items_d2;

        // Admissibility of the full candidate structure.
        let mut partitions: Vec<Vec<Vec<usize>>> = Vec::with_capacity(self.cfg.classes);
        for c in 0..self.cfg.classes {
            let gc = self.group_of_class[c];
            let grp = &self.groups[gc];
            let mut parts: Vec<Vec<usize>> = Vec::new();
            for &slot in &grp.active {
                if gc == g && (slot as usize == d1 || slot as usize == d2) {
                    continue;
                }
                parts.push(grp.items[slot as usize].clone());
            }
            if gc == g {
                if !side_a.is_empty() {
                    parts.push(side_a.clone());
                }
                if !side_b.is_empty() {
                    parts.push(side_b.clone());
                }
            }
            partitions.push(parts);
        }
        let pooled = pooled_from_partitions(self.data.n_items(), &partitions);
        if !kruskal_identifiable(&pooled, self.data.cardinalities(), self.cfg.classes) {
            return Ok(());
        }

        // Prior difference for this group's representative partition.
        let rep = self.groups[g].classes[0];
        let current_parts: Vec<Vec<usize>> = self.groups[g]
            .active
            .iter()
            .map(|&slot| self.groups[g].items[slot as usize].clone())
            .collect();
        let spec = self.cfg.prior_spec();
        let delta_prior = log_prior_class(&partitions[rep], self.data.cardinalities(), &spec)?
            - log_prior_class(&current_parts, self.data.cardinalities(), &spec)?;

        // Collapsed likelihood difference over the touched domains, for every
        // class in the group.
        let mv_a = if side_a.is_empty() {
            None
        } else {
            Some(MappingVector::new(side_a, self.data.cardinalities())?)
        };
        let mv_b = if side_b.is_empty() {
            None
        } else {
            Some(MappingVector::new(side_b, self.data.cardinalities())?)
        };
        let pat_a: Vec<u32> = mv_a
            .as_ref()
            .map(|mv| self.encode_column(mv))
            .unwrap_or_default();
        let pat_b: Vec<u32> = mv_b
            .as_ref()
            .map(|mv| self.encode_column(mv))
            .unwrap_or_default();

        let mut in_group = vec![false; self.cfg.classes];
        for &c in &self.groups[g].classes {
            in_group[c] = true;
        }
        let ra = mv_a
            .as_ref()
            .map(|m| m.pattern_count() as usize)
            .unwrap_or(0);
        let rb = mv_b
            .as_ref()
            .map(|m| m.pattern_count() as usize)
            .unwrap_or(0);
        let mut new_a: Vec<Vec<u32>> = vec![vec![0; ra]; self.cfg.classes];
        let mut new_b: Vec<Vec<u32>> = vec![vec![0; rb]; self.cfg.classes];
        for i in 0..n {
            let c = self.classes[i] as usize;
            if !in_group[c] {
                continue;
            }
            if ra > 0 {
                new_a[c][pat_a[i] as usize] += 1;
            }
            if rb > 0 {
                new_b[c][pat_b[i] as usize] += 1;
            }
        }
        let alpha = self.cfg.alpha_theta;
        let mut delta_ll = 0.0;
        for &c in &self.groups[g].classes {
            delta_ll += domain_log_marginal(&new_a[c], alpha)
                + domain_log_marginal(&new_b[c], alpha)
                - domain_log_marginal(&self.counts_theta[c][d1], alpha)
                - domain_log_marginal(&self.counts_theta[c][d2], alpha);
        }

        let log_accept = delta_prior + delta_ll - proposal.log_forward_over_backward;
        if log_accept < 0.0 && self.rng.gen::<f64>().ln() >= log_accept {
            return Ok(());
        }

        // Accept: rewrite delta, caches, counts, and refresh touched theta.
        self.accepted += 1;
        let member_classes = self.groups[g].classes.clone();
        for &c in &member_classes {
            for &item in side_a {
                self.delta[c][item] = proposal.d1;
            }
            for &item in side_b {
                self.delta[c][item] = proposal.d2;
            }
        }
        {
            let group = &mut self.groups[g];
            match mv_a {
                Some(mv) => group.set_slot(proposal.d1, side_a.clone(), mv, pat_a),
                None => group.clear_slot(proposal.d1),
            }
            match mv_b {
                Some(mv) => group.set_slot(proposal.d2, side_b.clone(), mv, pat_b),
                None => group.clear_slot(proposal.d2),
            }
            group.rebuild_active();
        }
        for &c in &member_classes {
            self.counts_theta[c][d1] = std::mem::take(&mut new_a[c]);
            self.counts_theta[c][d2] = std::mem::take(&mut new_b[c]);
            self.theta[c][d1] = self.draw_theta(c, d1);
            self.theta[c][d2] = self.draw_theta(c, d2);
        }
        Ok(())
    }

    fn draw_theta(&mut self, class: usize, slot: usize) -> Vec<f64> {
        let counts = &self.counts_theta[class][slot];
        if counts.is_empty() {
            return Vec::new();
        }
        let alphas: Vec<f64> = counts
            .iter()
            .map(|&n| self.cfg.alpha_theta + n as f64)
            .collect();
        dirichlet_draw(&mut self.rng, &alphas)
    }

    pub(crate) fn gibbs_theta(&mut self) {
        // Structure moves keep theta empty on emptied slots, so only active
        // slots need redrawing.
        for c in 0..self.cfg.classes {
            let group = self.group_of_class[c];
            let active = self.groups[group].active.clone();
            for &slot in &active {
                self.theta[c][slot as usize] = self.draw_theta(c, slot as usize);
            }
        }
    }

    pub(crate) fn gibbs_pi(&mut self) {
        let alphas: Vec<f64> = self
            .counts_class
            .iter()
            .zip(&self.cfg.alpha_class)
            .map(|(&n, &a)| a + n as f64)
            .collect();
        self.pi = dirichlet_draw(&mut self.rng, &alphas);
    }

    fn refresh_log_params(&mut self) {
        for c in 0..self.cfg.classes {
            self.ln_pi[c] = self.pi[c].ln();
            for slot in 0..self.cfg.slots as usize {
                let theta = &self.theta[c][slot];
                let ln = &mut self.ln_theta[c][slot];
                ln.clear();
                ln.extend(theta.iter().map(|&p| p.ln()));
            }
        }
    }

    /// Class log-weights for one subject under the current (pi, theta).
    fn class_weights(&self, i: usize, out: &mut Vec<f64>) {
        out.clear();
        for c in 0..self.cfg.classes {
            let group = &self.groups[self.group_of_class[c]];
            let mut v = self.ln_pi[c];
            for &slot in &group.active {
                let r = group.patterns[slot as usize][i] as usize;
                v += self.ln_theta[c][slot as usize][r];
            }
            out.push(v);
        }
    }

    fn remove_subject_counts(&mut self, i: usize) {
        let c = self.classes[i] as usize;
        self.counts_class[c] -= 1;
        let group = &self.groups[self.group_of_class[c]];
        for &slot in &group.active {
            let r = group.patterns[slot as usize][i] as usize;
            self.counts_theta[c][slot as usize][r] -= 1;
        }
    }

    fn add_subject_counts(&mut self, i: usize, c: usize) {
        self.counts_class[c] += 1;
        let group = &self.groups[self.group_of_class[c]];
        for &slot in &group.active {
            let r = group.patterns[slot as usize][i] as usize;
            self.counts_theta[c][slot as usize][r] += 1;
        }
    }

    /// Non-collapsed class sweep; also returns the per-subject mixture
    /// log-likelihood under the iteration's (pi, theta).
    pub(crate) fn gibbs_classes(&mut self) -> Vec<f64> {
        let n = self.data.n_subjects();
        let mut loglik = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(self.cfg.classes);
        if self.cfg.collapsed_class_update {
            // Log-likelihood first: it is defined by (pi, theta), which the
            // collapsed sweep does not touch.
            for i in 0..n {
                self.class_weights(i, &mut weights);
                loglik.push(logsumexp(&weights));
            }
            self.gibbs_classes_collapsed();
        } else {
            for i in 0..n {
                self.class_weights(i, &mut weights);
                loglik.push(logsumexp(&weights));
                let new = categorical_from_log(&mut self.rng, &weights);
                let old = self.classes[i] as usize;
                if new != old {
                    self.remove_subject_counts(i);
                    self.classes[i] = new as u32;
                    self.add_subject_counts(i, new);
                }
            }
        }
        loglik
    }

    pub(crate) fn gibbs_classes_collapsed(&mut self) {
        let n = self.data.n_subjects();
        let alpha = self.cfg.alpha_theta;
        let mut weights = Vec::with_capacity(self.cfg.classes);
        for i in 0..n {
            self.remove_subject_counts(i);
            weights.clear();
            for c in 0..self.cfg.classes {
                let group = &self.groups[self.group_of_class[c]];
                let occupancy = self.counts_class[c] as f64;
                let mut v = (occupancy + self.cfg.alpha_class[c]).ln();
                for &slot in &group.active {
                    let table = &self.counts_theta[c][slot as usize];
                    let r = group.patterns[slot as usize][i] as usize;
                    v += (table[r] as f64 + alpha).ln()
                        - (occupancy + table.len() as f64 * alpha).ln();
                }
                weights.push(v);
            }
            let new = categorical_from_log(&mut self.rng, &weights);
            self.classes[i] = new as u32;
            self.add_subject_counts(i, new);
        }
    }

    /// Canonical domain ids for a group: active slots ranked by smallest
    /// member item.
    fn canonical_ranks(&self, g: usize) -> Vec<(u32, u32)> {
        let group = &self.groups[g];
        let mut order: Vec<u32> = group.active.clone();
        order.sort_by_key(|&slot| group.items[slot as usize][0]);
        order
            .iter()
            .enumerate()
            .map(|(rank, &slot)| (slot, rank as u32))
            .collect()
    }

    fn snapshot_theta(&self) -> Vec<ThetaEntry> {
        let mut entries = Vec::new();
        for c in 0..self.cfg.classes {
            let g = self.group_of_class[c];
            let mut ranks = self.canonical_ranks(g);
            ranks.sort_by_key(|&(_, rank)| rank);
            for (slot, rank) in ranks {
                entries.push(ThetaEntry {
                    class: c as u32,
                    domain: rank,
                    probs: self.theta[c][slot as usize].clone(),
                });
            }
        }
        entries
    }

    pub(crate) fn run(mut self) -> Result<ChainRecord> {
        let start = Instant::now();
        let total = self.cfg.total_iterations();
        let n = self.data.n_subjects();
        let mut structures = Vec::with_capacity(total as usize);
        let mut pi_trace = Vec::with_capacity(total as usize);
        let mut theta_trace = if self.cfg.record_params {
            Some(Vec::with_capacity(total as usize))
        } else {
            None
        };
        let mut loglik = Vec::with_capacity(total as usize);
        let audit_every =
            self.cfg
                .audit_every
                .unwrap_or(if cfg!(debug_assertions) { 256 } else { 0 });

        for t in 1..=total {
            if !self.released && t > self.cfg.n_homo_iters {
                self.release_groups()?;
            }
            if self.cfg.fixed_structure.is_none() {
                self.structure_sweep()?;
            }
            self.gibbs_theta();
            self.gibbs_pi();
            self.refresh_log_params();
            let ll_row = self.gibbs_classes();

            let canon = self.current_structure().canonicalize();
            debug_assert!(
                crate::identifiability::admissible(
                    &canon,
                    self.data.cardinalities(),
                    self.cfg.max_items,
                    self.cfg.classes
                ),
                "iteration {t}: recorded structure must be admissible"
            );
            structures.push(canon);
            pi_trace.push(self.pi.clone());
            if let Some(trace) = theta_trace.as_mut() {
                trace.push(self.snapshot_theta());
            }
            if n > 0 {
                loglik.push(ll_row);
            }

            if audit_every > 0 && (t % audit_every == 0 || t == total) {
                let state = self.state();
                if !state.audit_counts(self.data)? {
                    return Err(Error::ConfigInvalid(format!(
                        "count audit failed at iteration {t}"
                    )));
                }
            }
        }

        let acceptance_rate = if self.proposed > 0 {
            self.accepted as f64 / self.proposed as f64
        } else {
            0.0
        };
        Ok(ChainRecord {
            meta: ChainMeta {
                chain_index: self.chain_index,
                seed: self.chain_seed,
                config: self.config_echo,
                n_subjects: n,
                n_items: self.data.n_items(),
                cardinalities: self.data.cardinalities().to_vec(),
                slots: self.cfg.slots,
                warmup: self.cfg.warmup,
                main: self.cfg.main,
                proposals: self.proposed,
                accepted: self.accepted,
                acceptance_rate,
                runtime_ms: start.elapsed().as_millis() as u64,
            },
            structures,
            pi: pi_trace,
            theta: theta_trace,
            loglik,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::config::ModelKind;

    fn tiny_data() -> Dataset {
        let rows = vec![vec![0u32], vec![1]];
        Dataset::new(&rows, vec![2], None).unwrap()
    }

    /// Exact single-site collapsed conditional by quadrature over (pi, theta).
    ///
    /// Two subjects, two classes, one binary item, alpha_c = alpha_theta = 1.
    /// P(c_i = c | c_other, x) integrates pi_c * theta_{c,x_i}-style terms
    /// against the priors; computed with Simpson's rule on [0, 1]^3.
    fn quadrature_conditional(x: [u32; 2], i: usize, c_other: u32, target: u32) -> f64 {
        let simpson = |f: &dyn Fn(f64) -> f64| -> f64 {
            let steps = 400;
            let h = 1.0 / steps as f64;
            let mut total = f(0.0) + f(1.0);
            for k in 1..steps {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                total += w * f(k as f64 * h);
            }
            total * h / 3.0
        };
        // Joint mass of (c_i = c, c_other fixed, data) with flat priors:
        // integral over pi of pi_ci * pi_cother  x  per-class Bernoulli
        // integrals over theta.
        let joint = |ci: u32| -> f64 {
            let classes = [
                if i == 0 { ci } else { c_other },
                if i == 0 { c_other } else { ci },
            ];
            let pi_term = simpson(&|p: f64| {
                let probs = [p, 1.0 - p];
                probs[classes[0] as usize] * probs[classes[1] as usize]
            });
            let mut theta_term = 1.0;
            for class in 0..2u32 {
                let members: Vec<usize> = (0..2).filter(|&s| classes[s] == class).collect();
                if members.is_empty() {
                    continue;
                }
                theta_term *= simpson(&|th: f64| {
                    members
                        .iter()
                        .map(|&s| if x[s] == 1 { th } else { 1.0 - th })
                        .product()
                });
            }
            pi_term * theta_term
        };
        let num = joint(target);
        let den = joint(0) + joint(1);
        num / den
    }

    #[test]
    fn collapsed_sweep_matches_quadrature_oracle() {
        let data = tiny_data();
        let mut config = SamplerConfig::new(2);
        config.model = ModelKind::Traditional;
        config.collapsed_class_update = true;
        config.warmup = 0;
        config.main = 1;
        config.seed = 9;
        let resolved = config.resolve(&data).unwrap();

        // Full-sweep transition: from (0, 0), update subject 0 given c_1 = 0,
        // then subject 1 given the new c_0. Compose the quadrature
        // conditionals for the exact distribution over end states.
        let x = [0u32, 1];
        let mut expected = [[0.0f64; 2]; 2];
        for c0 in 0..2u32 {
            let p0 = quadrature_conditional(x, 0, 0, c0);
            for c1 in 0..2u32 {
                let p1 = quadrature_conditional(x, 1, c0, c1);
                expected[c0 as usize][c1 as usize] = p0 * p1;
            }
        }

        let reps = 200_000usize;
        let mut counts = [[0usize; 2]; 2];
        let mut worker = Worker::new(&data, &config, &resolved, 0).unwrap();
        for _ in 0..reps {
            worker.classes = vec![0, 0];
            worker.rebuild_counts();
            worker.gibbs_classes_collapsed();
            counts[worker.classes[0] as usize][worker.classes[1] as usize] += 1;
        }
        for c0 in 0..2 {
            for c1 in 0..2 {
                let observed = counts[c0][c1] as f64 / reps as f64;
                let want = expected[c0][c1];
                let sigma = (want * (1.0 - want) / reps as f64).sqrt().max(1e-4);
                assert!(
                    (observed - want).abs() < 4.0 * sigma.max(2.5e-4) + 1e-3,
                    "state ({c0},{c1}): observed {observed:.4}, expected {want:.4}"
                );
            }
        }
    }

    #[test]
    fn single_class_collapsed_update_keeps_classes() {
        let data = tiny_data();
        let mut config = SamplerConfig::new(1);
        config.model = ModelKind::Traditional;
        config.collapsed_class_update = true;
        config.warmup = 0;
        config.main = 5;
        let resolved = config.resolve(&data).unwrap();
        let worker = Worker::new(&data, &config, &resolved, 0).unwrap();
        let record = worker.run().unwrap();
        assert_eq!(record.structures.len(), 5);
    }

    #[test]
    fn zero_mass_class_is_never_selected() {
        // Freeze pi and theta by hand, then run the non-collapsed weights:
        // a class with theta = 0 on the observed pattern never wins.
        let data = tiny_data();
        let mut config = SamplerConfig::new(2);
        config.model = ModelKind::Traditional;
        config.warmup = 0;
        config.main = 1;
        let resolved = config.resolve(&data).unwrap();
        let mut worker = Worker::new(&data, &config, &resolved, 3).unwrap();
        worker.pi = vec![0.5, 0.5];
        worker.theta[0][0] = vec![1.0, 0.0]; // class 0 only emits x = 0
        worker.theta[1][0] = vec![0.0, 1.0]; // class 1 only emits x = 1
        worker.refresh_log_params();
        for _ in 0..50 {
            let mut weights = Vec::new();
            worker.class_weights(1, &mut weights); // subject with x = 1
            let pick = categorical_from_log(&mut worker.rng, &weights);
            assert_eq!(pick, 1);
        }
    }
}
