use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Graph, KillingPlan};
use crate::linalg::{complement, eigenvalues, generator_block, kernel, Matrix};
use crate::oracle::{Check, Report};
use crate::rng::splitmix64;

/// Relative size of the deterministic conductance jitter applied when the
/// absorbed spectrum is degenerate.
pub const JITTER: f64 = 1e-9;
/// Eigenvalue gaps below this fraction of the spectral scale count as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-8;
/// Entries of `ν^x_k` may dip to `-NONNEG_TOL · ‖ν^x_k‖∞`.
pub const NONNEG_TOL: f64 = 1e-9;

/// Spectrum of `[-L]_{R^c}` for a reversible chain, ascending, through the
/// symmetrisation by `μ`.
pub fn absorbed_spectrum(graph: &Graph, mu: &[f64], transient: &[usize]) -> Result<Vec<f64>> {
    let block: Matrix = generator_block(graph, transient);
    let mu_t: Vec<f64> = transient.iter().map(|&x| mu[x]).collect();
    eigenvalues(&block.neg(), Some(&mu_t))?.real()
}

fn is_degenerate(lambda: &[f64]) -> bool {
    let scale = lambda.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    lambda.windows(2).any(|w| w[1] - w[0] < DEGENERACY_GAP * scale)
}

/// The same chain with every conductance `μ(x) w(x, y)` multiplied by
/// `1 + JITTER · h({x, y})`, `h` a fixed hash in `[-1, 1]`; stays reversible
/// with respect to `μ`.
pub fn jittered(graph: &Graph) -> Result<Graph> {
    graph.map_rates(|x, y, r| {
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        let h = splitmix64(((a as u64) << 32) ^ b as u64);
        let s = (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
        r * (1.0 + JITTER * s)
    })
}

/// `ν^x_{l-1} = δ_x`, `ν^x_{k-1} = ν^x_k ([L]_{R^c} + λ_k) / λ_k`.
#[derive(Clone, Debug, Serialize)]
pub struct LocalEquilibriaSeq {
    pub r: Vec<usize>,
    pub x: usize,
    /// `R^c`, ascending; entries of each `ν^x_k` follow this order.
    pub transient: Vec<usize>,
    /// `λ_{0,R} ≤ … ≤ λ_{l-1,R}`.
    pub eigenvalues: Vec<f64>,
    /// `nu[k] = ν^x_k`, `k = 0..l`.
    pub nu: Vec<Vec<f64>>,
    /// Whether the jittered chain was used.
    pub jittered: bool,
}

impl LocalEquilibriaSeq {
    pub fn l(&self) -> usize {
        self.transient.len()
    }

    /// Smallest `ν^x_k(y) / ‖ν^x_k‖∞` over all `k` and `y`.
    pub fn min_relative_entry(&self) -> f64 {
        self.nu
            .iter()
            .map(|v| {
                let s = v.iter().fold(0.0f64, |m, a| m.max(a.abs())).max(f64::MIN_POSITIVE);
                v.iter().fold(f64::INFINITY, |m, a| m.min(a / s))
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn nonnegative(&self) -> bool {
        self.min_relative_entry() >= -NONNEG_TOL
    }

    /// `P_x(X(T_q ∧ T_R) = y)` rebuilt from the sequence.
    pub fn reconstruct(&self, q: f64, y: usize) -> f64 {
        let j = match self.transient.binary_search(&y) {
            Ok(j) => j,
            Err(_) => return 0.0,
        };
        let l = self.l();
        let mut carry = 1.0;
        let mut total = 0.0;
        for k in (0..l).rev() {
            let lam = self.eigenvalues[k];
            total += carry * q / (q + lam) * self.nu[k][j];
            carry *= lam / (q + lam);
        }
        total
    }

    /// `k,` followed by one column per vertex of `R^c`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,lambda");
        for y in &self.transient {
            s.push_str(&format!(",nu_{y}"));
        }
        s.push('\n');
        for k in (0..self.l()).rev() {
            s.push_str(&format!("{k},{}", self.eigenvalues[k]));
            for v in &self.nu[k] {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

pub(crate) fn prepare(graph: &Graph, r: &[usize]) -> Result<(Graph, Vec<f64>, Vec<usize>, Vec<f64>, bool)> {
    let mu = graph.check_reversible().ok_or(Error::NotReversible)?;
    let mut r = r.to_vec();
    r.sort_unstable();
    r.dedup();
    if r.len() >= graph.n() {
        return Err(Error::InvalidArgument("R must be a proper subset".into()));
    }
    let transient = complement(graph.n(), &r);
    if !graph.block_is_irreducible(&transient) {
        return Err(Error::ReducibleAfterAbsorption);
    }
    let lambda = absorbed_spectrum(graph, &mu, &transient)?;
    if is_degenerate(&lambda) {
        log::warn!("degenerate absorbed spectrum; applying a {JITTER:e} relative conductance jitter");
        let g = jittered(graph)?;
        let lambda = absorbed_spectrum(&g, &mu, &transient)?;
        return Ok((g, mu, transient, lambda, true));
    }
    Ok((graph.clone(), mu, transient, lambda, false))
}

/// Local equilibria of the chain absorbed in `r`, started at `x ∉ r`.
pub fn local_equilibria(graph: &Graph, r: &[usize], x: usize) -> Result<LocalEquilibriaSeq> {
    let (g, _, transient, lambda, jittered) = prepare(graph, r)?;
    sequence(&g, r, x, transient, lambda, jittered)
}

pub(crate) fn sequence(
    g: &Graph,
    r: &[usize],
    x: usize,
    transient: Vec<usize>,
    lambda: Vec<f64>,
    jittered: bool,
) -> Result<LocalEquilibriaSeq> {
    let i = transient
        .binary_search(&x)
        .map_err(|_| Error::InvalidArgument(format!("start {x} lies in R")))?;
    let l = transient.len();
    let block: Matrix = generator_block(g, &transient);
    let mut nu = vec![Vec::new(); l];
    let mut cur = vec![0.0; l];
    cur[i] = 1.0;
    nu[l - 1] = cur.clone();
    for k in (1..l).rev() {
        let lam = lambda[k];
        let mut next = block.left_mul_vec(&cur);
        for (a, c) in next.iter_mut().zip(&cur) {
            *a = (*a + lam * c) / lam;
        }
        nu[k - 1] = next.clone();
        cur = next;
    }
    let mut r = r.to_vec();
    r.sort_unstable();
    r.dedup();
    Ok(LocalEquilibriaSeq {
        r,
        x,
        transient,
        eigenvalues: lambda,
        nu,
        jittered,
    })
}

/// Nonnegativity of every `ν^x_k`, and the mixture formula against the
/// kernel of the chain killed at rate `q` on `R^c` and absorbed on `R`.
pub fn local_equilibria_check(graph: &Graph, r: &[usize], qs: &[f64]) -> Result<Report> {
    let (g, _, transient, lambda, jit) = prepare(graph, r)?;
    let n = g.n();
    let mut rep = Report::new("local_equilibria");
    let mut kernels = Vec::new();
    for &q in qs {
        let rates: Vec<f64> = (0..n)
            .map(|v| {
                if transient.binary_search(&v).is_ok() {
                    q
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        kernels.push(kernel(&g, &KillingPlan::new(rates)?)?);
    }
    for &x in &transient {
        let seq = sequence(&g, r, x, transient.clone(), lambda.clone(), jit)?;
        let m = seq.min_relative_entry();
        rep.push(Check::at_most(format!("ν^{x}_k ≥ 0"), -m, 0.0, NONNEG_TOL));
        for (q, k) in qs.iter().zip(&kernels) {
            for &y in &transient {
                rep.push(Check::close(
                    format!("mixture of ν^{x}_k = P_{x}(X(T_q ∧ T_R) = {y}), q = {q}"),
                    seq.reconstruct(*q, y),
                    k.get(x, y),
                    1e-8,
                ));
            }
        }
    }
    Ok(rep)
}
