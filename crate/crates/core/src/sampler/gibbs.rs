//! Conjugate updates and the collapsed domain marginal.

use crate::mathutil::ln_gamma;

/// ln of the theta-collapsed likelihood of one domain's pattern counts:
/// ln [ beta(alpha 1 + n) / beta(alpha 1) ]
///   = sum_r ln Gamma(alpha + n_r) - ln Gamma(R alpha + sum_r n_r)
///     - R ln Gamma(alpha) + ln Gamma(R alpha).
///
/// Empty count vectors (empty domains) and all-zero counts both give zero.
pub fn domain_log_marginal(counts: &[u32], alpha_theta: f64) -> f64 {
    if counts.is_empty() {
        return 0.0;
    }
    let r = counts.len() as f64;
    let total: u64 = counts.iter().map(|&n| n as u64).sum();
    if total == 0 {
        return 0.0;
    }
    let mut value = ln_gamma(r * alpha_theta) - r * ln_gamma(alpha_theta);
    for &n in counts {
        value += ln_gamma(alpha_theta + n as f64);
    }
    value - ln_gamma(r * alpha_theta + total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_counts_give_unit_ratio() {
        assert_eq!(domain_log_marginal(&[], 1.0), 0.0);
        assert_eq!(domain_log_marginal(&[0, 0, 0, 0], 1.0), 0.0);
        assert_eq!(domain_log_marginal(&[0, 0], 0.37), 0.0);
    }

    #[test]
    fn binary_domain_matches_beta_integral() {
        // alpha = 1, counts [2, 1]: integral of p^2 (1-p) dp = B(3, 2) = 1/12.
        let v = domain_log_marginal(&[2, 1], 1.0);
        assert!((v - (1.0f64 / 12.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn matches_sequential_predictive_decomposition() {
        // Polya urn: P(n) = prod_t (n_{x_t} before t + alpha) / (t - 1 + R alpha).
        let cases: Vec<(Vec<u32>, f64)> = vec![
            (vec![3, 0, 2], 1.0),
            (vec![1, 1, 1, 1], 0.5),
            (vec![5, 2], 2.0),
            (vec![0, 0, 4], 1.0),
        ];
        for (counts, alpha) in cases {
            let r = counts.len() as f64;
            let mut seen = vec![0u32; counts.len()];
            let mut t = 0u32;
            let mut log_sequential = 0.0;
            for (cell, &n) in counts.iter().enumerate() {
                for _ in 0..n {
                    log_sequential += ((seen[cell] as f64 + alpha) / (t as f64 + r * alpha)).ln();
                    seen[cell] += 1;
                    t += 1;
                }
            }
            let direct = domain_log_marginal(&counts, alpha);
            assert!(
                (direct - log_sequential).abs() < 1e-10,
                "counts {counts:?} alpha {alpha}: {direct} vs {log_sequential}"
            );
        }
    }
}
