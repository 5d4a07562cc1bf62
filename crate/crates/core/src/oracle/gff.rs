use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::report::{Check, Report};
use crate::error::{Error, Result};
use crate::graph::{Graph, KillingPlan};
use crate::linalg::{kernel, Matrix};
use crate::rng::RngStream;
use crate::wilson::sample_forest;

/// Largest graph accepted by [`gff_covariance_check`].
pub const GFF_CAP: usize = 64;
/// Share of entry pairs that must fall within [`GFF_SIGMAS`] standard errors.
pub const GFF_PASS_FRACTION: f64 = 0.95;
pub const GFF_SIGMAS: f64 = 4.0;

const CHUNKS: usize = 256;

#[derive(Clone, Debug, Serialize)]
pub struct GffReport {
    pub samples: usize,
    /// `Γ(x, y) = K(x, y) / (q μ(y))`.
    #[serde(skip)]
    pub gamma: Matrix,
    /// Monte Carlo `E[ξ̃_x ξ̃_y]`.
    #[serde(skip)]
    pub estimate: Matrix,
    /// Largest `|Γ̂ - Γ|` over the pairs `x ≤ y`.
    pub max_deviation: f64,
    /// Standard error at the pair realising `max_deviation`.
    pub max_deviation_se: f64,
    /// Largest deviation measured in standard errors.
    pub max_z: f64,
    /// Share of pairs `x ≤ y` within `GFF_SIGMAS` standard errors.
    pub fraction_within: f64,
    pub pass: bool,
}

struct Acc {
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Acc {
    fn new(n: usize) -> Self {
        Self {
            sum: vec![0.0; n * n],
            sq: vec![0.0; n * n],
        }
    }

    fn merge(mut self, o: Acc) -> Acc {
        for (a, b) in self.sum.iter_mut().zip(o.sum) {
            *a += b;
        }
        for (a, b) in self.sq.iter_mut().zip(o.sq) {
            *a += b;
        }
        self
    }
}

/// Covariance of the forest-averaged field `ξ̃_x = μ(A(x))^{-1} Σ_{y∈A(x)} ζ_y / √q`
/// against `K(x, y) / (q μ(y))`. With `zero_noise` the variables `ζ` are
/// set to 0, so the estimate must vanish.
pub fn gff_covariance_check(
    graph: &Graph,
    q: f64,
    samples: usize,
    seed: u64,
    zero_noise: bool,
) -> Result<(GffReport, Report)> {
    let n = graph.n();
    if n > GFF_CAP {
        return Err(Error::SizeCap { n, cap: GFF_CAP });
    }
    if samples < 2 {
        return Err(Error::InvalidArgument("at least two samples are needed".into()));
    }
    let mu = graph.check_reversible().ok_or(Error::NotReversible)?;
    let plan = KillingPlan::uniform(n, q)?;
    let k = kernel(graph, &plan)?;
    let gamma = Matrix::from_fn(n, n, |x, y| k.k[(x, y)] / (q * mu[y]));
    let sd: Vec<f64> = mu.iter().map(|m| m.sqrt()).collect();
    let inv_sqrt_q = 1.0 / q.sqrt();

    let acc = crate::parallel::install(|| {
        (0..CHUNKS)
            .into_par_iter()
            .map(|c| {
                let lo = c * samples / CHUNKS;
                let hi = (c + 1) * samples / CHUNKS;
                let mut rng = RngStream::new(seed, c as u64);
                let mut acc = Acc::new(n);
                let mut xi = vec![0.0; n];
                for _ in lo..hi {
                    let f = sample_forest(graph, &plan, &mut rng).forest;
                    let zeta: Vec<f64> = sd
                        .iter()
                        .map(|s| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            if zero_noise {
                                0.0
                            } else {
                                s * z
                            }
                        })
                        .collect();
                    let t = f.n_trees();
                    let mut num = vec![0.0; t];
                    let mut den = vec![0.0; t];
                    for x in 0..n {
                        let id = f.tree_id(x);
                        num[id] += zeta[x];
                        den[id] += mu[x];
                    }
                    for x in 0..n {
                        let id = f.tree_id(x);
                        xi[x] = num[id] / den[id] * inv_sqrt_q;
                    }
                    for x in 0..n {
                        for y in x..n {
                            let p = xi[x] * xi[y];
                            acc.sum[x * n + y] += p;
                            acc.sq[x * n + y] += p * p;
                        }
                    }
                }
                acc
            })
            .reduce(|| Acc::new(n), Acc::merge)
    });

    let s = samples as f64;
    let mut estimate = Matrix::zeros(n, n);
    let mut rep = Report::new("gff_covariance");
    let (mut within, mut pairs) = (0usize, 0usize);
    let (mut max_dev, mut max_dev_se, mut max_z) = (0.0f64, 0.0, 0.0f64);
    for x in 0..n {
        for y in x..n {
            let mean = acc.sum[x * n + y] / s;
            let var = (acc.sq[x * n + y] / s - mean * mean).max(0.0) * s / (s - 1.0);
            let se = (var / s).sqrt();
            estimate[(x, y)] = mean;
            estimate[(y, x)] = mean;
            // Γ is symmetric for reversible chains; use the mean of both entries.
            let target = 0.5 * (gamma[(x, y)] + gamma[(y, x)]);
            let dev = (mean - target).abs();
            let z = if se > 0.0 {
                dev / se
            } else if dev == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            pairs += 1;
            if z <= GFF_SIGMAS {
                within += 1;
            }
            if dev > max_dev {
                max_dev = dev;
                max_dev_se = se;
            }
            max_z = max_z.max(z);
        }
    }
    let fraction_within = within as f64 / pairs as f64;
    let pass = if zero_noise {
        estimate.max_abs() == 0.0
    } else {
        fraction_within >= GFF_PASS_FRACTION
    };
    if zero_noise {
        rep.push(Check::absolute("Γ̂ = 0 without noise", estimate.max_abs(), 0.0, 0.0));
    } else {
        rep.push(Check::with_error(
            format!("share of pairs within {GFF_SIGMAS} SE"),
            fraction_within,
            GFF_PASS_FRACTION,
            (GFF_PASS_FRACTION - fraction_within).max(0.0),
            0.0,
        ));
    }
    Ok((
        GffReport {
            samples,
            gamma,
            estimate,
            max_deviation: max_dev,
            max_deviation_se: max_dev_se,
            max_z,
            fraction_within,
            pass,
        },
        rep,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    #[test]
    fn two_cycle_covariance() {
        let (a, b, q) = (2.0, 3.0, 0.5);
        let g = build_graph(2, &[(0, 1, a), (1, 0, b)]).unwrap();
        let (r, rep) = gff_covariance_check(&g, q, 40_000, 11, false).unwrap();
        assert!((r.gamma[(0, 1)] - (a + b) / (q * (q + a + b))).abs() < 1e-12);
        assert!(rep.pass(), "{r:?}");
        let (z, rep) = gff_covariance_check(&g, q, 100, 11, true).unwrap();
        assert_eq!(z.estimate.max_abs(), 0.0);
        assert!(rep.pass());
    }

    #[test]
    fn irreversible_rejected() {
        let g = build_graph(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        assert!(matches!(
            gff_covariance_check(&g, 1.0, 10, 0, false),
            Err(Error::NotReversible)
        ));
    }
}
