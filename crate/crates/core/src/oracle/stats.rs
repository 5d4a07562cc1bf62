//! Goodness-of-fit helpers for the Monte Carlo checks.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Clone, Debug, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Number of bins after merging sparse ones.
    pub bins: usize,
}

/// Pearson chi-square of `observed` counts against `probs`. Cells with
/// expected count below 5 are pooled (smallest first) before testing.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> ChiSquare {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let t = total as f64;
    let mut cells: Vec<(f64, f64)> = observed.iter().zip(probs).map(|(&o, &p)| (p * t, o as f64)).collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (e, o) in cells {
        acc.0 += e;
        acc.1 += o;
        if acc.0 >= 5.0 {
            merged.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 > 0.0 || acc.1 > 0.0 {
        match merged.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => merged.push(acc),
        }
    }
    let mut statistic = 0.0;
    for &(e, o) in &merged {
        if e > 0.0 {
            statistic += (o - e) * (o - e) / e;
        } else if o > 0.0 {
            statistic = f64::INFINITY;
        }
    }
    let bins = merged.len();
    let dof = bins.saturating_sub(1);
    let p_value = if dof == 0 {
        if statistic.is_finite() {
            1.0
        } else {
            0.0
        }
    } else if !statistic.is_finite() {
        0.0
    } else {
        let d = ChiSquared::new(dof as f64).expect("positive dof");
        1.0 - d.cdf(statistic)
    };
    ChiSquare {
        statistic,
        dof,
        p_value,
        bins,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KolmogorovSmirnov {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_test(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> KolmogorovSmirnov {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    KolmogorovSmirnov {
        statistic: d,
        p_value: kolmogorov_tail(lambda),
    }
}

/// `P(K > λ)` for the Kolmogorov distribution.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        s += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

/// Standard error of a binomial proportion at success probability `p`.
pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}
