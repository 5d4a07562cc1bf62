//! Seeded batches of random instances run through the oracle identities.

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{
    chain_stationarity_exact, coalescence_marginal_test, tree_chain_root_marginal, CoalescenceOptions,
};
use crate::error::{Error, Result};
use crate::graph::{Graph, KillingPlan};
use crate::linalg::complement;
use crate::mw::{divdiff_nonneg_check, mw_instance_check, random_divdiff_instance, MwOptions};
use crate::oracle::instances::{random_digraph, random_plan, random_reversible};
use crate::oracle::{Check, Oracle, Report};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Partition,
    Determinantal,
    Hitting,
    Fw,
    Cumulant,
    Mw,
    Dynamics,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Partition,
        Suite::Determinantal,
        Suite::Hitting,
        Suite::Fw,
        Suite::Cumulant,
        Suite::Mw,
        Suite::Dynamics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Partition => "partition",
            Suite::Determinantal => "determinantal",
            Suite::Hitting => "hitting",
            Suite::Fw => "fw",
            Suite::Cumulant => "cumulant",
            Suite::Mw => "mw",
            Suite::Dynamics => "dynamics",
        }
    }

    /// Largest instance each suite accepts.
    pub fn n_cap(self) -> usize {
        match self {
            Suite::Partition | Suite::Determinantal | Suite::Hitting | Suite::Fw => 7,
            Suite::Cumulant => 6,
            Suite::Mw => 7,
            Suite::Dynamics => 4,
        }
    }

    fn tag(self) -> u64 {
        Suite::ALL.iter().position(|&s| s == self).expect("listed") as u64 + 1
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite '{s}'")))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyConfig {
    pub n_max: usize,
    pub instances: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub instances: usize,
    pub checks: usize,
    pub failures: usize,
    pub max_error: f64,
    pub pass: bool,
    /// Name of the first failing check, with its instance.
    pub first_failure: Option<String>,
}

const Q_UNIFORM: [f64; 4] = [0.25, 0.5, 1.0, 2.5];

fn size(rng: &mut RngStream, n_max: usize) -> usize {
    2 + rng.index(n_max - 1)
}

fn density(rng: &mut RngStream) -> f64 {
    0.35 + 0.65 * rng.uniform()
}

/// Random `R ⊊ X`, possibly empty, whose complement is irreducible.
fn absorbing_set(graph: &Graph, rng: &mut RngStream) -> Vec<usize> {
    let n = graph.n();
    loop {
        let r: Vec<usize> = (0..n).filter(|_| rng.uniform() < 0.3).collect();
        if r.len() < n && graph.block_is_irreducible(&complement(n, &r)) {
            return r;
        }
    }
}

/// Checks for instance `i` of a suite.
pub fn suite_instance(suite: Suite, cfg: &VerifyConfig, i: usize) -> Result<Report> {
    let n_max = cfg.n_max.min(suite.n_cap()).max(2);
    let mut rng = RngStream::new(cfg.seed, (suite.tag() << 40) | i as u64);
    let n = size(&mut rng, n_max);
    let d = density(&mut rng);
    let q = Q_UNIFORM[rng.index(Q_UNIFORM.len())];
    match suite {
        Suite::Partition | Suite::Determinantal => {
            let g = random_digraph(n, d, &mut rng);
            let plan = random_plan(n, &mut rng);
            let o = Oracle::new(&g)?;
            if suite == Suite::Partition {
                o.partition_check(&plan)
            } else {
                o.determinantal_check_all(&plan)
            }
        }
        Suite::Hitting => {
            let g = random_digraph(n, d, &mut rng);
            let plan = random_plan(n, &mut rng);
            let o = Oracle::new(&g)?;
            let mut rep = o.hitting_formula_check_all(&plan)?;
            rep.identity = "hitting".into();
            rep.extend(o.hitting_formula_check_all(&KillingPlan::uniform(n, q)?)?);
            rep.extend(o.max_hitting_bound_check(q)?);
            let rg = random_reversible(n, d, &mut rng);
            let (_, bern, roots) = Oracle::new(&rg)?.root_count_check(q)?;
            if bern.is_none() {
                return Err(Error::ComplexSpectrum);
            }
            rep.extend(roots);
            Ok(rep)
        }
        Suite::Fw => {
            let g = random_digraph(n, d, &mut rng);
            let o = Oracle::new(&g)?;
            let mut rep = o.fw_check_all()?;
            rep.extend(o.rooted_partition_sweep(q)?);
            Ok(rep)
        }
        Suite::Cumulant => {
            let g = random_digraph(n, d, &mut rng);
            Oracle::new(&g)?.cumulant_check_all(q, 4)
        }
        Suite::Mw => {
            let g = random_reversible(n, d, &mut rng);
            let r = absorbing_set(&g, &mut rng);
            let opts = MwOptions {
                exact_recursions: n <= 5,
                forest_sum: n <= 5,
                grids: 2,
                seed: rng.next_u64(),
            };
            let mut rep = mw_instance_check(&g, &r, opts)?;
            for _ in 0..2 {
                let (a, b, k) = random_divdiff_instance(&mut rng);
                rep.extend(divdiff_nonneg_check(&a, &b, k)?.1);
            }
            Ok(rep)
        }
        Suite::Dynamics => {
            let g = random_digraph(n, d, &mut rng);
            let mut rep = chain_stationarity_exact(&g, q)?;
            rep.extend(tree_chain_root_marginal(&g)?.2);
            if i == 0 {
                let m = coalescence_marginal_test(&g, 1.0, 20_000, rng.next_u64(), CoalescenceOptions::default())?;
                rep.push(Check::at_most(
                    "coalescence marginal chi-square p-value > 0.001",
                    -m.chi_square.p_value,
                    -1e-3,
                    0.0,
                ));
                rep.push(Check::at_most(
                    "root count drops by at most 1",
                    m.max_decrement as f64,
                    1.0,
                    0.0,
                ));
            }
            Ok(rep)
        }
    }
}

pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> Result<SuiteOutcome> {
    if cfg.n_max < 2 {
        return Err(Error::InvalidArgument("--n-max must be at least 2".into()));
    }
    let reports: Vec<Result<Report>> = crate::parallel::install(|| {
        (0..cfg.instances)
            .into_par_iter()
            .map(|i| suite_instance(suite, cfg, i))
            .collect()
    });
    let mut out = SuiteOutcome {
        suite,
        instances: cfg.instances,
        checks: 0,
        failures: 0,
        max_error: 0.0,
        pass: true,
        first_failure: None,
    };
    for (i, rep) in reports.into_iter().enumerate() {
        let rep = rep?;
        out.checks += rep.checks.len();
        out.max_error = out.max_error.max(rep.max_error());
        for c in rep.failures() {
            out.failures += 1;
            out.first_failure.get_or_insert_with(|| {
                format!(
                    "instance {i}: {} (lhs {:e}, rhs {:e}, error {:e})",
                    c.name, c.lhs, c.rhs, c.error
                )
            });
        }
    }
    out.pass = out.failures == 0;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_passes_a_few_instances() {
        let cfg = VerifyConfig {
            n_max: 4,
            instances: 6,
            seed: 11,
        };
        for s in Suite::ALL {
            let o = run_suite(s, &cfg).unwrap();
            assert!(o.pass, "{o:?}");
            assert!(o.checks > 0);
        }
    }

    #[test]
    fn names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }
}
