//! Small numeric helpers shared across modules.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

pub use statrs::function::gamma::ln_gamma;

/// Numerically stable log(sum(exp(xs))).
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Draws from Dirichlet(alphas) by normalizing independent Gamma variates.
pub fn dirichlet_draw<R: Rng + ?Sized>(rng: &mut R, alphas: &[f64]) -> Vec<f64> {
    let mut draws: Vec<f64> = alphas
        .iter()
        .map(|&a| {
            let g = Gamma::new(a, 1.0).expect("positive Dirichlet concentration");
            g.sample(rng)
        })
        .collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 {
        for v in &mut draws {
            *v /= total;
        }
    } else {
        // All gamma draws underflowed; fall back to the mean direction.
        let asum: f64 = alphas.iter().sum();
        for (v, &a) in draws.iter_mut().zip(alphas) {
            *v = a / asum;
        }
    }
    draws
}

/// Samples an index proportional to exp(log_weights[i]).
pub fn categorical_from_log<R: Rng + ?Sized>(rng: &mut R, log_weights: &[f64]) -> usize {
    let max = log_weights
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return 0;
    }
    let weights: Vec<f64> = log_weights.iter().map(|w| (w - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Derives a stream seed from a root seed and an index (splitmix64 finalizer).
pub fn derive_seed(root: u64, index: u64) -> u64 {
    let mut z = root ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
