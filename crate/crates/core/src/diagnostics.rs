//! Fit and convergence diagnostics: LPPD, WAIC, the multivariate
//! Gelman-Rubin statistic, and structure summaries.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mathutil::logsumexp;
use crate::model::{structures_equal, DomainStructure, ModelParams, StructureMode};
use crate::record::ChainRecord;

/// Log pointwise predictive density:
/// sum_i ln[(1/T) sum_t P(X_i | omega_t)].
pub fn lppd(loglik: &[Vec<f64>]) -> Result<f64> {
    let iters = loglik.len();
    if iters == 0 || loglik[0].is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let subjects = loglik[0].len();
    let ln_t = (iters as f64).ln();
    let mut total = 0.0;
    let mut column = Vec::with_capacity(iters);
    for i in 0..subjects {
        column.clear();
        column.extend(loglik.iter().map(|row| row[i]));
        total += logsumexp(&column) - ln_t;
    }
    Ok(total)
}

/// WAIC penalty: 2 sum_i [ln mean_t P - mean_t ln P]; nonnegative by Jensen.
pub fn waic_penalty(loglik: &[Vec<f64>]) -> Result<f64> {
    let iters = loglik.len();
    if iters == 0 || loglik[0].is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let subjects = loglik[0].len();
    let ln_t = (iters as f64).ln();
    let mut total = 0.0;
    let mut column = Vec::with_capacity(iters);
    for i in 0..subjects {
        column.clear();
        column.extend(loglik.iter().map(|row| row[i]));
        let ln_mean = logsumexp(&column) - ln_t;
        let mean_ln: f64 = column.iter().sum::<f64>() / iters as f64;
        total += ln_mean - mean_ln;
    }
    Ok(2.0 * total)
}

/// WAIC = -2 lppd + 2 penalty.
pub fn waic(loglik: &[Vec<f64>]) -> Result<f64> {
    Ok(-2.0 * lppd(loglik)? + 2.0 * waic_penalty(loglik)?)
}

/// Multivariate potential scale reduction factor over per-chain matrices of
/// monitored scalars (chains x iterations x coordinates).
///
/// Uses the largest-eigenvalue form: Rhat^2 = (n-1)/n + ((m+1)/m) lambda_1
/// with lambda_1 the top eigenvalue of W^{-1} B / n. Coordinates with no
/// variance anywhere are dropped first.
pub fn gelman_rubin(chains: &[Vec<Vec<f64>>]) -> Result<f64> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::TooFewChains);
    }
    let n = chains[0].len();
    if n < 10 || chains.iter().any(|c| c.len() != n) {
        return Err(Error::TooFewChains);
    }
    let p_full = chains[0][0].len();
    if p_full == 0 {
        return Err(Error::EmptyMatrix);
    }

    // Drop degenerate coordinates.
    let mut keep = Vec::new();
    for j in 0..p_full {
        let mut mean = 0.0;
        let mut count = 0.0;
        for chain in chains {
            for row in chain {
                mean += row[j];
                count += 1.0;
            }
        }
        mean /= count;
        let mut var = 0.0;
        for chain in chains {
            for row in chain {
                var += (row[j] - mean).powi(2);
            }
        }
        if var / count > 1e-12 {
            keep.push(j);
        }
    }
    let nf = n as f64;
    let mf = m as f64;
    if keep.is_empty() {
        // All coordinates constant: between-chain variance is zero.
        return Ok(((nf - 1.0) / nf).sqrt());
    }
    let p = keep.len();

    let mut chain_means: Vec<DVector<f64>> = Vec::with_capacity(m);
    for chain in chains {
        let mut mean = DVector::<f64>::zeros(p);
        for row in chain {
            for (a, &j) in keep.iter().enumerate() {
                mean[a] += row[j];
            }
        }
        mean /= nf;
        chain_means.push(mean);
    }
    let grand = {
        let mut g = DVector::<f64>::zeros(p);
        for mean in &chain_means {
            g += mean;
        }
        g / mf
    };

    let mut within = DMatrix::<f64>::zeros(p, p);
    for (chain, mean) in chains.iter().zip(&chain_means) {
        for row in chain {
            let mut dev = DVector::<f64>::zeros(p);
            for (a, &j) in keep.iter().enumerate() {
                dev[a] = row[j] - mean[a];
            }
            within.syger(1.0, &dev, &dev, 1.0);
        }
    }
    within /= mf * (nf - 1.0);

    let mut between_over_n = DMatrix::<f64>::zeros(p, p);
    for mean in &chain_means {
        let dev = mean - &grand;
        between_over_n.syger(1.0, &dev, &dev, 1.0);
    }
    between_over_n /= mf - 1.0;

    // Symmetrize (syger fills one triangle).
    let within = symmetrize(&within);
    let between_over_n = symmetrize(&between_over_n);

    // lambda_1 of W^{-1} B/n via Cholesky whitening, with a ridge fallback.
    let mut ridge = 0.0;
    let trace = within.trace().max(1e-300);
    let lambda = loop {
        let mut w = within.clone();
        for d in 0..p {
            w[(d, d)] += ridge;
        }
        if let Some(chol) = w.cholesky() {
            let l_inv = chol
                .l()
                .try_inverse()
                .expect("triangular factor invertible");
            let m = &l_inv * &between_over_n * l_inv.transpose();
            let eig = symmetrize(&m).symmetric_eigen();
            break eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        }
        ridge = if ridge == 0.0 {
            trace * 1e-12 / p as f64
        } else {
            ridge * 10.0
        };
        if ridge > trace {
            return Err(Error::ConfigInvalid(
                "within-chain covariance is singular".into(),
            ));
        }
    };
    Ok(((nf - 1.0) / nf + ((mf + 1.0) / mf) * lambda).sqrt())
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// One ranked structure with its visit share.
#[derive(Clone, Debug)]
pub struct StructureShare {
    pub structure: DomainStructure,
    pub share: f64,
    pub visits: usize,
}

/// Tallies post-warmup canonical structures across chains, descending share.
pub fn structure_mode(records: &[ChainRecord], warmup_cut: usize) -> Vec<StructureShare> {
    let mut tally: HashMap<Vec<u32>, (usize, &DomainStructure)> = HashMap::new();
    let mut total = 0usize;
    for record in records {
        for structure in record.structures.iter().skip(warmup_cut) {
            total += 1;
            let key = structure.canonical_key();
            tally
                .entry(key)
                .and_modify(|(count, _)| *count += 1)
                .or_insert((1, structure));
        }
    }
    let mut shares: Vec<StructureShare> = tally
        .into_iter()
        .map(|(key, (visits, structure))| {
            let _ = key;
            StructureShare {
                structure: structure.clone(),
                share: visits as f64 / total.max(1) as f64,
                visits,
            }
        })
        .collect();
    shares.sort_by(|a, b| {
        b.visits.cmp(&a.visits).then_with(|| {
            a.structure
                .canonical_key()
                .cmp(&b.structure.canonical_key())
        })
    });
    shares
}

/// True when the structures describe the same partitions up to a relabeling
/// of classes (and of domain ids). Recovery scoring uses this: the sampler's
/// class labels are arbitrary relative to a generator's.
pub fn structures_match_up_to_class_relabel(a: &DomainStructure, b: &DomainStructure) -> bool {
    if a.n_items() != b.n_items() || a.n_classes() != b.n_classes() || a.mode() != b.mode() {
        return false;
    }
    if a.mode() == StructureMode::Homogeneous {
        return structures_equal(a, b).unwrap_or(false);
    }
    let classes = a.n_classes();
    let mut perm: Vec<usize> = (0..classes).collect();
    loop {
        let delta: Vec<Vec<u32>> = perm.iter().map(|&c| a.delta()[c].clone()).collect();
        let eq: Vec<u32> = perm.iter().map(|&c| a.equivalence()[c]).collect();
        if let Ok(candidate) = DomainStructure::new(delta, a.slots(), a.mode(), Some(&eq)) {
            if structures_equal(&candidate, b).unwrap_or(false) {
                return true;
            }
        }
        if !next_permutation(&mut perm) {
            return false;
        }
    }
}

fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// First iteration (1-based, warmup included) whose structure matches the
/// truth up to relabeling, or None.
pub fn first_hit(record: &ChainRecord, truth: &DomainStructure) -> Option<u64> {
    record
        .structures
        .iter()
        .position(|s| structures_match_up_to_class_relabel(s, truth))
        .map(|idx| idx as u64 + 1)
}

/// Summary of one fit (all chains pooled).
#[derive(Clone, Debug, Serialize)]
pub struct FitSummary {
    pub lppd: f64,
    pub waic_penalty: f64,
    pub waic: f64,
    /// Pooled post-warmup iterations.
    pub n_eff_iters: usize,
    pub mode_share: Option<f64>,
    pub mode_structure: Option<serde_json::Value>,
    pub psrf: Option<f64>,
}

/// Builds the monitored matrices for Gelman-Rubin from recorded chains:
/// class probabilities (all but the last), marginal item probabilities
/// (categories 1.. for each class and item), and the total log-likelihood.
/// Class labels are aligned across chains by greedy matching of mean
/// marginal profiles.
pub fn monitor_matrices(records: &[ChainRecord], warmup_cut: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    if records.len() < 2 {
        return Err(Error::TooFewChains);
    }
    let cardinalities = records[0].meta.cardinalities.clone();
    let classes = records[0].pi.first().map(|p| p.len()).unwrap_or(0);
    // Per chain: per iteration marginals[c][j][q].
    let mut all_marginals: Vec<Vec<Vec<Vec<Vec<f64>>>>> = Vec::with_capacity(records.len());
    for record in records {
        let theta = record
            .theta
            .as_ref()
            .ok_or_else(|| Error::ConfigInvalid("chain record lacks theta draws".into()))?;
        let mut per_iter = Vec::new();
        for (idx, entries) in theta.iter().enumerate().skip(warmup_cut) {
            let structure = &record.structures[idx];
            let mut params = ModelParams::empty(classes, structure.slots());
            params.pi = record.pi[idx].clone();
            for entry in entries {
                params.theta[entry.class as usize][entry.domain as usize] = entry.probs.clone();
            }
            per_iter.push(crate::encoding::marginal_item_probs(
                &params,
                structure,
                &cardinalities,
            )?);
        }
        if per_iter.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        all_marginals.push(per_iter);
    }

    // Mean profile per chain and class, for label alignment.
    let profile = |chain: &Vec<Vec<Vec<Vec<f64>>>>, c: usize| -> Vec<f64> {
        let iters = chain.len() as f64;
        let mut acc: Vec<f64> = Vec::new();
        for iter in chain {
            let flat: Vec<f64> = iter[c].iter().flatten().copied().collect();
            if acc.is_empty() {
                acc = flat;
            } else {
                for (a, v) in acc.iter_mut().zip(flat) {
                    *a += v;
                }
            }
        }
        acc.iter().map(|v| v / iters).collect()
    };
    let reference: Vec<Vec<f64>> = (0..classes)
        .map(|c| profile(&all_marginals[0], c))
        .collect();
    let mut alignments: Vec<Vec<usize>> = Vec::with_capacity(records.len());
    alignments.push((0..classes).collect());
    for chain in all_marginals.iter().skip(1) {
        let profiles: Vec<Vec<f64>> = (0..classes).map(|c| profile(chain, c)).collect();
        // Greedy matching: repeatedly take the closest (reference, chain)
        // class pair.
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (r, rp) in reference.iter().enumerate() {
            for (c, cp) in profiles.iter().enumerate() {
                let dist: f64 = rp.iter().zip(cp).map(|(&a, &b)| (a - b).powi(2)).sum();
                pairs.push((dist, r, c));
            }
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut map = vec![usize::MAX; classes];
        let mut used_r = vec![false; classes];
        let mut used_c = vec![false; classes];
        for (_, r, c) in pairs {
            if !used_r[r] && !used_c[c] {
                used_r[r] = true;
                used_c[c] = true;
                map[r] = c;
            }
        }
        alignments.push(map);
    }

    let mut out = Vec::with_capacity(records.len());
    for (k, record) in records.iter().enumerate() {
        let map = &alignments[k];
        let marginals = &all_marginals[k];
        let mut rows = Vec::with_capacity(marginals.len());
        for (offset, iter_marginals) in marginals.iter().enumerate() {
            let idx = warmup_cut + offset;
            let mut row = Vec::new();
            let pi = &record.pi[idx];
            for &c in map.iter().take(classes.saturating_sub(1)) {
                row.push(pi[c]);
            }
            for &c in map.iter() {
                for (j, &q_j) in cardinalities.iter().enumerate() {
                    row.extend(&iter_marginals[c][j][1..q_j as usize]);
                }
            }
            let ll: f64 = record.loglik[idx].iter().sum();
            row.push(ll);
            rows.push(row);
        }
        out.push(rows);
    }
    Ok(out)
}

/// Pools chains into one summary: LPPD/WAIC over post-warmup draws, the mode
/// structure, and (for two or more chains with recorded theta) the PSRF.
pub fn fit_summary(records: &[ChainRecord]) -> Result<FitSummary> {
    if records.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let warmup = records[0].meta.warmup as usize;
    let mut pooled: Vec<Vec<f64>> = Vec::new();
    for record in records {
        for row in record.loglik.iter().skip(warmup) {
            pooled.push(row.clone());
        }
    }
    let (lppd_v, penalty_v, waic_v) = if pooled.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let l = lppd(&pooled)?;
        let p = waic_penalty(&pooled)?;
        (l, p, -2.0 * l + 2.0 * p)
    };
    let shares = structure_mode(records, warmup);
    let mode = shares.first();
    let psrf = if records.len() >= 2 && records.iter().all(|r| r.theta.is_some()) {
        match monitor_matrices(records, warmup) {
            Ok(matrices) => gelman_rubin(&matrices).ok(),
            Err(_) => None,
        }
    } else {
        None
    };
    Ok(FitSummary {
        lppd: lppd_v,
        waic_penalty: penalty_v,
        waic: waic_v,
        n_eff_iters: pooled.len(),
        mode_share: mode.map(|m| m.share),
        mode_structure: mode.map(|m| m.structure.to_report_json()),
        psrf,
    })
}
