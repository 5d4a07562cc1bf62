//! End-to-end acceptance run: one line per criterion, exit status 1 if any
//! criterion fails.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use rootforest::dynamics::{
    chain_stationarity_exact, coalescence_marginal_test, tree_chain_root_marginal, CoalescenceOptions,
};
use rootforest::graph::{brownian_sheet_metropolis, build_graph, grid_graph, Topology};
use rootforest::linalg::complement;
use rootforest::mw::{divdiff_nonneg_check, mw_instance_check, random_divdiff_instance, MwOptions};
use rootforest::oracle::instances::{random_digraph, random_plan, random_reversible};
use rootforest::oracle::stats::chi_square;
use rootforest::oracle::{gff_covariance_check, ForestTable, Oracle, Report};
use rootforest::wilson::{sample_forest, sample_map, target_root_count, SamplerOptions};
use rootforest::{Error, Graph, KillingPlan, RngStream};

const SEED: u64 = 20_240_917;
const Q_VALUES: [f64; 4] = [0.25, 0.5, 1.0, 2.5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn finish(rep: &Report, extra: String) -> Outcome {
    let first = rep
        .failures()
        .next()
        .map(|c| format!("; first failure: {} ({:e} vs {:e})", c.name, c.lhs, c.rhs))
        .unwrap_or_default();
    Outcome {
        pass: rep.pass(),
        detail: format!(
            "{} checks, max error {:.2e}{extra}{first}",
            rep.checks.len(),
            rep.max_error()
        ),
    }
}

fn within(elapsed: Duration, limit: f64) -> String {
    format!(", {:.1} s (limit {limit} s)", elapsed.as_secs_f64())
}

/// Instance `i` of the shared digraph set: `n ≤ 5`, integer rates 1–4.
fn digraph_instance(i: usize) -> (Graph, KillingPlan, f64) {
    let mut rng = RngStream::new(SEED, i as u64);
    let n = 2 + rng.index(4);
    let d = 0.35 + 0.65 * rng.uniform();
    let g = random_digraph(n, d, &mut rng);
    let plan = random_plan(n, &mut rng);
    let q = Q_VALUES[rng.index(Q_VALUES.len())];
    (g, plan, q)
}

fn over_instances(count: usize, f: impl Fn(usize) -> rootforest::Result<Report> + Sync) -> Report {
    let reports: Vec<Report> = (0..count)
        .into_par_iter()
        .map(|i| f(i).unwrap_or_else(|e| panic!("instance {i}: {e}")))
        .collect();
    let mut all = Report::new("batch");
    for r in reports {
        all.extend(r);
    }
    all
}

fn c1() -> Outcome {
    let start = Instant::now();
    let rep = over_instances(200, |i| {
        let (g, plan, q) = digraph_instance(i);
        let o = Oracle::new(&g)?;
        let mut r = o.partition_check(&plan)?;
        r.extend(o.partition_check(&KillingPlan::uniform(g.n(), q)?)?);
        Ok(r)
    });
    let el = start.elapsed();
    let mut out = finish(&rep, within(el, 60.0));
    out.pass &= el.as_secs_f64() < 60.0;
    out
}

fn c2() -> Outcome {
    let start = Instant::now();
    let rep = over_instances(200, |i| {
        let (g, plan, _) = digraph_instance(i);
        Oracle::new(&g)?.determinantal_check_all(&plan)
    });
    let el = start.elapsed();
    let mut out = finish(&rep, within(el, 120.0));
    out.pass &= el.as_secs_f64() < 120.0;
    out
}

fn c3() -> Outcome {
    let rep = over_instances(200, |i| {
        let mut rng = RngStream::new(SEED ^ 0x3, i as u64);
        let n = 2 + rng.index(4);
        let g = random_reversible(n, 0.35 + 0.65 * rng.uniform(), &mut rng);
        let q = Q_VALUES[rng.index(Q_VALUES.len())];
        let (_, bern, rep) = Oracle::new(&g)?.root_count_check(q)?;
        if bern.is_none() {
            return Err(Error::ComplexSpectrum);
        }
        Ok(rep)
    });
    finish(&rep, String::new())
}

fn c4() -> Outcome {
    let rep = over_instances(200, |i| {
        let (g, plan, q) = digraph_instance(i);
        let o = Oracle::new(&g)?;
        let mut r = o.hitting_formula_check_all(&plan)?;
        r.extend(o.hitting_formula_check_all(&KillingPlan::uniform(g.n(), q)?)?);
        r.extend(o.max_hitting_bound_check(q)?);
        Ok(r)
    });
    finish(&rep, String::new())
}

fn c5() -> Outcome {
    let rep = over_instances(200, |i| {
        let (g, _, q) = digraph_instance(i);
        let o = Oracle::new(&g)?;
        let mut r = o.fw_check_all()?;
        r.extend(o.rooted_partition_sweep(q)?);
        Ok(r)
    });
    finish(&rep, String::new())
}

fn c6() -> Outcome {
    let start = Instant::now();
    let samples = 100_000;
    let results: Vec<(f64, usize)> = (0..30)
        .map(|i| {
            let mut rng = RngStream::new(SEED ^ 0x6, i);
            let n = 2 + rng.index(3);
            let g = random_digraph(n, 0.35 + 0.65 * rng.uniform(), &mut rng);
            let plan = random_plan(n, &mut rng);
            let table = ForestTable::enumerate(&g).unwrap();
            let probs = table.probabilities(&plan);
            let idx = sample_map(&g, &plan, SEED + i, samples, &SamplerOptions::default(), |r| {
                table.index_of(r.forest.parents()).expect("enumerated")
            });
            let mut counts = vec![0u64; table.len()];
            for k in idx {
                counts[k] += 1;
            }
            (chi_square(&counts, &probs).p_value, table.len())
        })
        .collect();
    let el = start.elapsed();
    let passing = results.iter().filter(|(p, _)| *p > 1e-3).count();
    let min_p = results.iter().map(|r| r.0).fold(1.0, f64::min);
    Outcome {
        pass: passing >= 29 && el.as_secs_f64() < 300.0,
        detail: format!(
            "{passing}/30 graphs at p > 0.001 (min p {min_p:.3e}){}",
            within(el, 300.0)
        ),
    }
}

fn c7() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for m in [100usize, 1000] {
        let runs: Vec<(Option<usize>, f64)> = (0..10u64)
            .into_par_iter()
            .map(|s| {
                let t = Instant::now();
                let g = brownian_sheet_metropolis(128, 128, 0.04, s).unwrap();
                let it = match target_root_count(&g, m, 1.0, &mut RngStream::new(SEED ^ 0x7, s)) {
                    Ok(o) => Some(o.iterations),
                    Err(Error::IterationCap { .. }) => None,
                    Err(e) => panic!("{e}"),
                };
                (it, t.elapsed().as_secs_f64())
            })
            .collect();
        let ok = runs
            .iter()
            .filter(|(it, t)| it.is_some_and(|k| k <= 25) && *t < 300.0)
            .count();
        let worst = runs.iter().map(|r| r.0.unwrap_or(usize::MAX)).max().unwrap_or(0);
        pass &= ok >= 9;
        parts.push(format!("m = {m}: {ok}/10 within 25 iterations (max {worst})"));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

/// Every strongly connected graph on 2 or 3 vertices with rates in {1, 2, 3}.
fn small_graphs() -> Vec<Graph> {
    let mut out = Vec::new();
    for a in 1..=3 {
        for b in 1..=3 {
            out.push(build_graph(2, &[(0, 1, a as f64), (1, 0, b as f64)]).unwrap());
        }
    }
    let pairs = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)];
    for code in 0..4usize.pow(6) {
        let mut edges = Vec::new();
        let mut c = code;
        for &(x, y) in &pairs {
            let r = c % 4;
            c /= 4;
            if r > 0 {
                edges.push((x, y, r as f64));
            }
        }
        if let Ok(g) = build_graph(3, &edges) {
            out.push(g);
        }
    }
    out
}

fn c8() -> Outcome {
    let graphs = small_graphs();
    let count = graphs.len();
    let reports: Vec<Report> = graphs
        .par_iter()
        .map(|g| {
            let mut r = chain_stationarity_exact(g, 1.5).unwrap();
            r.extend(chain_stationarity_exact(g, 0.25).unwrap());
            r.extend(tree_chain_root_marginal(g).unwrap().2);
            r
        })
        .collect();
    let mut rep = Report::new("chain");
    for r in reports {
        rep.extend(r);
    }
    finish(&rep, format!(", {count} graphs"))
}

fn c9() -> Outcome {
    let graphs: Vec<Graph> = (0..4)
        .map(|i| {
            let mut rng = RngStream::new(SEED ^ 0x9, i);
            random_digraph(2 + i as usize % 3, 0.7, &mut rng)
        })
        .collect();
    let mut lines = Vec::new();
    let mut pass = true;
    let mut min_p = 1.0f64;
    let mut worst_drop = 0;
    for (gi, g) in graphs.iter().enumerate() {
        for (ti, t) in [0.5, 2.0, 8.0].into_iter().enumerate() {
            let r = coalescence_marginal_test(
                g,
                t,
                100_000,
                SEED + (10 * gi + ti) as u64,
                CoalescenceOptions::default(),
            )
            .unwrap();
            min_p = min_p.min(r.chi_square.p_value);
            worst_drop = worst_drop.max(r.max_decrement);
            if !r.pass(1e-3) {
                pass = false;
                lines.push(format!("graph {gi} t = {t}: p {:.3e}", r.chi_square.p_value));
            }
        }
    }
    Outcome {
        pass,
        detail: format!(
            "12 (graph, t) pairs, min p {min_p:.3e}, largest root-count drop {worst_drop}{}",
            if lines.is_empty() {
                String::new()
            } else {
                format!("; {}", lines.join(", "))
            }
        ),
    }
}

fn c10() -> Outcome {
    let rep = over_instances(500, |i| {
        let mut rng = RngStream::new(SEED ^ 0xa, i as u64);
        let n = 2 + rng.index(6);
        let g = random_reversible(n, 0.35 + 0.65 * rng.uniform(), &mut rng);
        let r = loop {
            let r: Vec<usize> = (0..n).filter(|_| rng.uniform() < 0.3).collect();
            if r.len() < n && g.block_is_irreducible(&complement(n, &r)) {
                break r;
            }
        };
        let opts = MwOptions {
            exact_recursions: n <= 5,
            forest_sum: n <= 5,
            grids: 1,
            seed: i as u64,
        };
        mw_instance_check(&g, &r, opts)
    });
    let mut rng = RngStream::new(SEED ^ 0xa4, 0);
    let mut lemma = Report::new("divdiff_nonneg");
    for _ in 0..1000 {
        let (a, b, k) = random_divdiff_instance(&mut rng);
        lemma.extend(divdiff_nonneg_check(&a, &b, k).unwrap().1);
    }
    let mut out = finish(&rep, String::new());
    out.pass &= lemma.pass();
    out.detail.push_str(&format!(
        "; 1000 divided-difference instances, {} below zero",
        lemma.failures().count()
    ));
    out
}

fn c11() -> Outcome {
    let rep = over_instances(120, |i| {
        let mut rng = RngStream::new(SEED ^ 0xb, i as u64);
        let n = 2 + rng.index(5);
        let g = random_digraph(n, 0.35 + 0.65 * rng.uniform(), &mut rng);
        let q = Q_VALUES[rng.index(Q_VALUES.len())];
        Oracle::new(&g)?.cumulant_check_all(q, 4)
    });
    finish(&rep, String::new())
}

fn c12() -> Outcome {
    let g = grid_graph(8, 8, Topology::Torus, None).unwrap();
    let (r, _) = gff_covariance_check(&g, 0.1, 100_000, SEED, false).unwrap();
    Outcome {
        pass: r.pass,
        detail: format!(
            "{:.1}% of pairs within 4 SE, max |z| {:.2}",
            100.0 * r.fraction_within,
            r.max_z
        ),
    }
}

fn c13() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (side, limit) in [(512usize, 30.0), (256, 5.0)] {
        let g = grid_graph(side, side, Topology::Torus, None).unwrap();
        let plan = KillingPlan::uniform(g.n(), 0.001).unwrap();
        let t = Instant::now();
        let rep = sample_forest(&g, &plan, &mut RngStream::new(SEED, side as u64));
        let s = t.elapsed().as_secs_f64();
        pass &= s < limit;
        parts.push(format!(
            "{side}x{side}: {s:.2} s (limit {limit} s, {} roots)",
            rep.n_roots
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("partition function equals det(Q - L), exact and float", c1),
        ("determinantal root marginals", c2),
        ("root-count law is a Bernoulli convolution", c3),
        ("hitting-time formulas and max-hitting bounds", c4),
        ("forest sums for hitting distributions and times", c5),
        ("Wilson sampler exactness (chi-square)", c6),
        ("root targeting on the 128x128 Brownian-sheet grid", c7),
        ("forest-chain invariance and tree-chain root marginal", c8),
        ("coalescence marginal at t = 0.5, 2, 8", c9),
        ("local equilibria, absorption decomposition, W recursions", c10),
        ("cycle-formula cumulants", c11),
        ("Gaussian free field covariance", c12),
        ("sampling time on 512x512 and 256x256 tori", c13),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{}] criterion {:>2}: {name} — {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
