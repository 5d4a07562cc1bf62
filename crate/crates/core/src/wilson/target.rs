use super::{sample_forest, SampleReport};
use crate::error::{Error, Result};
use crate::graph::{Forest, Graph, KillingPlan};
use crate::linalg::Spectrum;
use crate::rng::RngStream;

/// Iteration cap of the sampling-based targeting loop.
pub const TARGET_MAX_ITERATIONS: usize = 100;

const SOLVE_MAX_ITERATIONS: usize = 200;
const SOLVE_RTOL: f64 = 1e-10;

/// `Σ_i q / (q + λ_i)` for a real spectrum of `-L`.
pub fn expected_roots(spectrum: &Spectrum, q: f64) -> Result<f64> {
    let lambdas = spectrum.real()?;
    Ok(expected_from(&lambdas, q))
}

fn expected_from(lambdas: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        return lambdas.len() as f64;
    }
    lambdas.iter().map(|&l| q / (q + l.max(0.0))).sum()
}

/// The `q` with `Σ_i q/(q + λ_i) = m`, by the fixed-point map
/// `q ↦ q m / Σ_i q/(q + λ_i)` started at `q = 1`.
pub fn solve_target(spectrum: &Spectrum, m: usize) -> Result<f64> {
    let lambdas = spectrum.real()?;
    let n = lambdas.len();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("target {m} outside 1..={n}")));
    }
    if m == n {
        return Err(Error::DivergesToInfinity { m });
    }
    // One zero eigenvalue always contributes a full root.
    if m == 1 {
        return Err(Error::ZeroBoundary { m });
    }
    let target = m as f64;
    let mut q = 1.0f64;
    for _ in 0..SOLVE_MAX_ITERATIONS {
        let next = q * target / expected_from(&lambdas, q);
        let change = (next - q).abs() / next.abs().max(f64::MIN_POSITIVE);
        q = next;
        if change <= SOLVE_RTOL {
            return Ok(q);
        }
    }
    Err(Error::NoConvergence {
        iterations: SOLVE_MAX_ITERATIONS,
    })
}

/// Result of the sampling-based targeting loop.
#[derive(Clone, Debug)]
pub struct TargetOutcome {
    pub forest: Forest,
    pub q_final: f64,
    pub iterations: usize,
    /// `(q, r)` for each sample drawn.
    pub trace: Vec<(f64, usize)>,
}

/// Sample with uniform killing `q`, replace `q` by `q m / r` and repeat
/// until the root count `r` lies in `[m - 2√m, m + 2√m]`.
pub fn target_root_count(graph: &Graph, m: usize, q0: f64, rng: &mut RngStream) -> Result<TargetOutcome> {
    let n = graph.n();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("target {m} outside 1..={n}")));
    }
    if !(q0 > 0.0) || !q0.is_finite() {
        return Err(Error::InvalidArgument(format!("initial q must be positive, got {q0}")));
    }
    let mf = m as f64;
    let (lo, hi) = (mf - 2.0 * mf.sqrt(), mf + 2.0 * mf.sqrt());
    let mut q = q0;
    let mut trace = Vec::new();
    for it in 1..=TARGET_MAX_ITERATIONS {
        let plan = KillingPlan::uniform(n, q)?;
        let SampleReport { forest, n_roots, .. } = sample_forest(graph, &plan, rng);
        let r = n_roots;
        trace.push((q, r));
        log::debug!("targeting iteration {it}: q = {q:e}, r = {r}");
        if (lo..=hi).contains(&(r as f64)) {
            return Ok(TargetOutcome {
                forest,
                q_final: q,
                iterations: it,
                trace,
            });
        }
        q = q * mf / r as f64;
    }
    Err(Error::IterationCap { trace })
}

/// Rejection sampling of `ν_q( · | |ρ| = m)`.
pub fn sample_conditioned(graph: &Graph, q: f64, m: usize, rng: &mut RngStream, max_tries: usize) -> Result<Forest> {
    let n = graph.n();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("target {m} outside 1..={n}")));
    }
    let plan = KillingPlan::uniform(n, q)?;
    let mut histogram = vec![0usize; n + 1];
    for _ in 0..max_tries {
        let r = sample_forest(graph, &plan, rng);
        histogram[r.n_roots] += 1;
        if r.n_roots == m {
            return Ok(r.forest);
        }
    }
    Err(Error::Exhausted {
        m,
        tries: max_tries,
        histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    #[test]
    fn boundary_targets() {
        let s = Spectrum::from_real(vec![0.0, 5.0]);
        assert!(matches!(solve_target(&s, 2), Err(Error::DivergesToInfinity { m: 2 })));
        assert!(matches!(solve_target(&s, 1), Err(Error::ZeroBoundary { m: 1 })));
        let mut prev = 0.0;
        for q in [0.1, 1.0, 10.0, 1e3, 1e6] {
            let e = expected_roots(&s, q).unwrap();
            assert!(e > prev && e < 2.0);
            prev = e;
        }
    }

    #[test]
    fn fixed_point_matches_bisection() {
        let s = Spectrum::from_real(vec![0.0, 0.3, 0.9, 1.7, 2.2, 3.1, 4.0, 6.5]);
        let q = solve_target(&s, 4).unwrap();
        assert!((expected_roots(&s, q).unwrap() - 4.0).abs() <= 1e-8);
        let (mut lo, mut hi) = (1e-9f64, 1e9f64);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if expected_roots(&s, mid).unwrap() < 4.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((q - lo).abs() <= 1e-7 * q);
    }

    #[test]
    fn full_target_is_immediate() {
        let g = build_graph(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let out = target_root_count(&g, 2, 1e12, &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(out.iterations, 1);
        // Window [1 - 2, 1 + 2] accepts everything on two vertices.
        let out = target_root_count(&g, 1, 1.0, &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn exhausted_reports_histogram() {
        let g = build_graph(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        match sample_conditioned(&g, 1e-4, 2, &mut RngStream::new(0, 0), 10) {
            Err(Error::Exhausted { histogram, tries, .. }) => {
                assert_eq!(tries, 10);
                assert_eq!(histogram.iter().sum::<usize>(), 10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
