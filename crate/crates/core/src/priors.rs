//! Log prior mass of domain structures.
//!
//! All values are unnormalized log masses: the sampler only ever uses ratios,
//! and the normalizer over admissible structures is intractable. The bucket
//! prior puts equal mass on every slot assignment delta_c in Z_D^J, so a
//! partition {J(c,d)} has mass D! / ((D - |D_c|)! D^J) and larger D favors
//! structures with more, smaller domains. The pattern-adjusted prior divides
//! by prod_d Gamma(R_cd), cancelling the Dirichlet volume factor of theta.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathutil::ln_gamma;
use crate::model::DomainStructure;

/// Structure prior family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    Uniform,
    Bucket,
    PatternAdjusted,
}

impl std::fmt::Display for PriorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PriorKind::Uniform => "uniform",
            PriorKind::Bucket => "bucket",
            PriorKind::PatternAdjusted => "pattern_adjusted",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for PriorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(PriorKind::Uniform),
            "bucket" => Ok(PriorKind::Bucket),
            "pattern_adjusted" | "pattern-adjusted" => Ok(PriorKind::PatternAdjusted),
            other => Err(Error::ConfigInvalid(format!(
                "unknown prior kind {other:?}"
            ))),
        }
    }
}

/// Prior family plus the constants it needs.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PriorSpec {
    pub kind: PriorKind,
    /// Domain slots D.
    pub slots: u32,
    /// Consulted for validity only: the pattern-adjusted prior requires a
    /// uniform Dirichlet on theta.
    pub alpha_theta: f64,
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.slots == 0 {
            return Err(Error::ConfigInvalid("prior needs at least one slot".into()));
        }
        if self.kind == PriorKind::PatternAdjusted && (self.alpha_theta - 1.0).abs() > 1e-12 {
            return Err(Error::ConfigInvalid(
                "pattern-adjusted prior requires alpha_theta = 1".into(),
            ));
        }
        Ok(())
    }
}

/// Unnormalized log prior mass of one class's partition.
///
/// `partition` lists the nonempty domains as item sets covering the class's
/// items. Uniform returns zero; bucket returns
/// sum_{k < |D_c|} ln(D - k) - J ln D; pattern-adjusted subtracts
/// sum_d ln Gamma(R_d).
pub fn log_prior_class(
    partition: &[Vec<usize>],
    cardinalities: &[u32],
    spec: &PriorSpec,
) -> Result<f64> {
    let used = partition.len();
    let slots = spec.slots as usize;
    if used > slots {
        return Err(Error::TooManyDomains {
            used,
            available: slots,
        });
    }
    match spec.kind {
        PriorKind::Uniform => Ok(0.0),
        PriorKind::Bucket => Ok(bucket_log_mass(partition, spec.slots)),
        PriorKind::PatternAdjusted => {
            let mut value = bucket_log_mass(partition, spec.slots);
            for items in partition {
                let patterns: f64 = items.iter().map(|&j| cardinalities[j] as f64).product();
                value -= ln_gamma(patterns);
            }
            Ok(value)
        }
    }
}

fn bucket_log_mass(partition: &[Vec<usize>], slots: u32) -> f64 {
    let items: usize = partition.iter().map(|p| p.len()).sum();
    let d = slots as f64;
    let mut value = -(items as f64) * d.ln();
    for k in 0..partition.len() {
        value += (d - k as f64).ln();
    }
    value
}

/// Unnormalized log prior mass of a whole structure: the sum over one
/// representative class per equivalence group.
pub fn log_prior_structure(
    structure: &DomainStructure,
    cardinalities: &[u32],
    spec: &PriorSpec,
) -> Result<f64> {
    let mut total = 0.0;
    for group in structure.class_groups() {
        let partition = structure.class_partition(group.representative);
        total += log_prior_class(&partition, cardinalities, spec)?;
    }
    Ok(total)
}

/// Unnormalized bucket prior probability of a multiset of domain sizes:
/// [J! / (prod_d s_d! * prod_k m_k!)] * D! / ((D - |D_c|)! * D^J)
/// where m_k counts domains of size k.
pub fn size_class_prior(sizes: &[usize], items: usize, slots: u32) -> Result<f64> {
    let total: usize = sizes.iter().sum();
    if total != items {
        return Err(Error::SizesDontSumToJ {
            got: total,
            expected: items,
        });
    }
    if sizes.len() > slots as usize {
        return Err(Error::TooManyDomains {
            used: sizes.len(),
            available: slots as usize,
        });
    }
    let mut log_ways = ln_gamma(items as f64 + 1.0);
    for &s in sizes {
        log_ways -= ln_gamma(s as f64 + 1.0);
    }
    let mut multiplicity = std::collections::HashMap::new();
    for &s in sizes {
        *multiplicity.entry(s).or_insert(0usize) += 1;
    }
    for (_, m) in multiplicity {
        log_ways -= ln_gamma(m as f64 + 1.0);
    }
    let d = slots as f64;
    let mut log_perm = -(items as f64) * d.ln();
    for k in 0..sizes.len() {
        log_perm += (d - k as f64).ln();
    }
    Ok((log_ways + log_perm).exp())
}

/// Smallest D making the all-singleton size class at least q times as likely
/// as one pair plus singletons: ceil(J + (q/2) J (J - 1) - 1).
pub fn min_slots_for_ratio(items: u32, q: f64) -> u64 {
    let j = items as f64;
    (j + 0.5 * q * j * (j - 1.0) - 1.0).ceil() as u64
}
