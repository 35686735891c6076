//! Shared oracles for integration tests. Everything here is deliberately
//! independent of the implementation paths it checks: plain quadrature,
//! exhaustive enumeration, and brute-force closures.

#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Adaptive Simpson quadrature on [a, b].
///
/// The interval is pre-split into panels: periodic integrands can fool the
/// two-level error estimate into terminating at the very first refinement.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const PANELS: usize = 9;
    let h = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|k| {
            adaptive_simpson_panel(
                f,
                a + k as f64 * h,
                a + (k + 1) as f64 * h,
                tol / PANELS as f64,
            )
        })
        .sum()
}

fn adaptive_simpson_panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 40)
}

/// Marginal likelihood of counts under a symmetric Dirichlet prior on a
/// binary cell vector, by quadrature:
/// integral of p^n0 (1-p)^n1 with respect to Beta(alpha, alpha).
///
/// Substituting p = sin^2(u) removes the endpoint singularities of alpha < 1.
pub fn binary_marginal_quadrature(n0: u32, n1: u32, alpha: f64) -> f64 {
    let ln_beta = statrs::function::gamma::ln_gamma(alpha) * 2.0
        - statrs::function::gamma::ln_gamma(2.0 * alpha);
    let integrand = move |u: f64| -> f64 {
        let (s, c) = u.sin_cos();
        if s <= 0.0 || c <= 0.0 {
            return 0.0;
        }
        // p = s^2, 1-p = c^2, dp = 2 s c du.
        let ln = (2.0 * (n0 as f64 + alpha - 1.0)) * s.ln()
            + (2.0 * (n1 as f64 + alpha - 1.0)) * c.ln()
            + (2.0 * s * c).ln()
            - ln_beta;
        ln.exp()
    };
    adaptive_simpson(&integrand, 0.0, std::f64::consts::FRAC_PI_2, 1e-12)
}

/// Same for a ternary cell vector under Dirichlet(alpha, alpha, alpha), by
/// nested quadrature over the simplex.
pub fn ternary_marginal_quadrature(n: [u32; 3], alpha: f64) -> f64 {
    let ln_beta = statrs::function::gamma::ln_gamma(alpha) * 3.0
        - statrs::function::gamma::ln_gamma(3.0 * alpha);
    let inner = move |p0: f64| -> f64 {
        adaptive_simpson(
            &|p1: f64| {
                let p2 = 1.0 - p0 - p1;
                if p0 <= 0.0 || p1 <= 0.0 || p2 <= 0.0 {
                    return 0.0;
                }
                ((n[0] as f64 + alpha - 1.0) * p0.ln()
                    + (n[1] as f64 + alpha - 1.0) * p1.ln()
                    + (n[2] as f64 + alpha - 1.0) * p2.ln()
                    - ln_beta)
                    .exp()
            },
            0.0,
            1.0 - p0,
            1e-12,
        )
    };
    adaptive_simpson(&inner, 0.0, 1.0, 1e-10)
}

/// All set partitions of {0, .., n-1}, each as sorted blocks ordered by
/// smallest member.
pub fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn extend(partitions: Vec<Vec<Vec<usize>>>, item: usize) -> Vec<Vec<Vec<usize>>> {
        let mut out = Vec::new();
        for partition in partitions {
            for b in 0..partition.len() {
                let mut next = partition.clone();
                next[b].push(item);
                out.push(next);
            }
            let mut next = partition;
            next.push(vec![item]);
            out.push(next);
        }
        out
    }
    let mut partitions = vec![vec![vec![0usize]]];
    for item in 1..n {
        partitions = extend(partitions, item);
    }
    if n == 0 {
        return vec![Vec::new()];
    }
    for partition in &mut partitions {
        partition.sort_by_key(|b| b[0]);
    }
    partitions
}

/// Upper-tail chi-squared p-value.
pub fn chi_squared_pvalue(statistic: f64, dof: f64) -> f64 {
    if dof <= 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof).expect("positive dof");
    1.0 - dist.cdf(statistic)
}

/// Brute-force transitive closure of the "shares a domain in some class"
/// relation, as sorted blocks ordered by smallest member.
pub fn closure_blocks(items: usize, partitions: &[Vec<Vec<usize>>]) -> Vec<Vec<usize>> {
    let mut related = vec![vec![false; items]; items];
    for (j, row) in related.iter_mut().enumerate() {
        row[j] = true;
    }
    for partition in partitions {
        for block in partition {
            for &a in block {
                for &b in block {
                    related[a][b] = true;
                }
            }
        }
    }
    // Floyd-Warshall style closure.
    for k in 0..items {
        for a in 0..items {
            if related[a][k] {
                let row: Vec<bool> = related[k].clone();
                for (b, &reach) in row.iter().enumerate() {
                    if reach {
                        related[a][b] = true;
                    }
                }
            }
        }
    }
    let mut seen = vec![false; items];
    let mut blocks = Vec::new();
    for j in 0..items {
        if seen[j] {
            continue;
        }
        let block: Vec<usize> = (j..items).filter(|&b| related[j][b]).collect();
        for &b in &block {
            seen[b] = true;
        }
        blocks.push(block);
    }
    blocks
}
