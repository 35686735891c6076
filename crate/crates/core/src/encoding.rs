//! Mixed-radix coding between multivariate responses and integer domain
//! patterns, plus the likelihood evaluations built on it.
//!
//! For an item set S with cardinalities Q, the mapping vector V(S) assigns
//! place value 1 to the smallest item and the running product of earlier
//! cardinalities to each later item, so the smallest item varies fastest.
//! A response row x maps to pattern id r = V(S)^T x in {0, .., R-1} with
//! R = prod_{j in S} Q_j.

use crate::error::{Error, Result};
use crate::mathutil::logsumexp;
use crate::model::{DomainStructure, ModelParams};

/// Place-value coding for one item set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MappingVector {
    entries: Vec<u64>,
    items: Vec<usize>,
    radices: Vec<u32>,
    pattern_count: u64,
}

impl MappingVector {
    /// Builds the mapping vector for `items` (deduplicated, any order)
    /// against the full cardinality vector.
    pub fn new(items: &[usize], cardinalities: &[u32]) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut sorted: Vec<usize> = items.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if let Some(&j) = sorted.iter().find(|&&j| j >= cardinalities.len()) {
            return Err(Error::DimensionMismatch(format!(
                "item {j} outside {} items",
                cardinalities.len()
            )));
        }
        let mut entries = vec![0u64; cardinalities.len()];
        let mut radices = Vec::with_capacity(sorted.len());
        let mut place = 1u64;
        for &j in &sorted {
            entries[j] = place;
            radices.push(cardinalities[j]);
            place = place
                .checked_mul(cardinalities[j] as u64)
                .ok_or_else(|| Error::ConfigInvalid("pattern count overflows u64".into()))?;
        }
        Ok(MappingVector {
            entries,
            items: sorted,
            radices,
            pattern_count: place,
        })
    }

    /// Total number of patterns R.
    pub fn pattern_count(&self) -> u64 {
        self.pattern_count
    }

    /// Full-length place-value vector (zero for items outside the set).
    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    /// The encoded item set, ascending.
    pub fn items(&self) -> &[usize] {
        &self.items
    }

    /// r = V(S)^T x for a full response row.
    #[inline]
    pub fn encode(&self, row: &[u32]) -> u64 {
        self.items
            .iter()
            .map(|&j| self.entries[j] * row[j] as u64)
            .sum()
    }

    /// Inverse of `encode`: the unique partial response over S.
    pub fn decode(&self, pattern: u64) -> Result<Vec<(usize, u32)>> {
        if pattern >= self.pattern_count {
            return Err(Error::PatternOutOfRange {
                pattern,
                count: self.pattern_count,
            });
        }
        let mut rest = pattern;
        let mut out = Vec::with_capacity(self.items.len());
        for (&j, &q) in self.items.iter().zip(&self.radices) {
            out.push((j, (rest % q as u64) as u32));
            rest /= q as u64;
        }
        Ok(out)
    }

    /// The response digit of `item` inside `pattern`.
    #[inline]
    pub fn digit(&self, pattern: u64, item: usize) -> u32 {
        let pos = self
            .items
            .iter()
            .position(|&j| j == item)
            .expect("item in set");
        let place = self.entries[item];
        ((pattern / place) % self.radices[pos] as u64) as u32
    }
}

/// ln P(x | class c) = sum over nonempty domains of ln theta_{c,d,r}.
/// Returns negative infinity when some theta entry is exactly zero.
pub fn class_loglik(
    row: &[u32],
    class: usize,
    params: &ModelParams,
    structure: &DomainStructure,
    cardinalities: &[u32],
) -> Result<f64> {
    let mut total = 0.0;
    for d in structure.nonempty_domains(class) {
        let items = structure.items_in(class, d);
        let mv = MappingVector::new(&items, cardinalities)?;
        let r = mv.encode(row) as usize;
        let p = params.theta[class][d as usize][r];
        total += p.ln();
    }
    Ok(total)
}

/// ln P(x) marginalized over classes, via log-sum-exp.
pub fn mixture_loglik(
    row: &[u32],
    params: &ModelParams,
    structure: &DomainStructure,
    cardinalities: &[u32],
) -> Result<f64> {
    let mut terms = Vec::with_capacity(params.pi.len());
    for c in 0..params.pi.len() {
        terms.push(params.pi[c].ln() + class_loglik(row, c, params, structure, cardinalities)?);
    }
    let value = logsumexp(&terms);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::AllClassesZeroMass)
    }
}

/// Per-(class, item) marginal category probabilities
/// P(X_j = q | c) = sum over patterns whose decoded digit at j equals q.
pub fn marginal_item_probs(
    params: &ModelParams,
    structure: &DomainStructure,
    cardinalities: &[u32],
) -> Result<Vec<Vec<Vec<f64>>>> {
    let classes = structure.n_classes();
    let items = structure.n_items();
    let mut out = vec![vec![Vec::new(); items]; classes];
    for (c, per_class) in out.iter_mut().enumerate() {
        for d in structure.nonempty_domains(c) {
            let members = structure.items_in(c, d);
            let mv = MappingVector::new(&members, cardinalities)?;
            let theta = &params.theta[c][d as usize];
            for &j in &members {
                let mut marginal = vec![0.0; cardinalities[j] as usize];
                for (r, &p) in theta.iter().enumerate() {
                    marginal[mv.digit(r as u64, j) as usize] += p;
                }
                per_class[j] = marginal;
            }
        }
    }
    Ok(out)
}
