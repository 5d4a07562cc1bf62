use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use super::enumerate::{mask_of, members, ForestTable};
use super::report::{Check, Report};
use crate::error::{Error, Result};
use crate::graph::{Graph, KillingPlan, PlanKind};
use crate::linalg::{
    char_poly, complement, det, det_sub, eigenvalues, generator_block, kernel, kernel_exact, q_minus_l, Absorption,
    Kernel, Lu, Matrix, Scalar, Spectrum,
};

/// Float tolerance of the enumeration identities.
pub const TOL: f64 = 1e-8;
/// Tolerance of the hitting-time x-independence and Freidlin–Wentzell checks.
pub const TIGHT_TOL: f64 = 1e-10;

fn q2f(v: &BigRational) -> f64 {
    ToPrimitive::to_f64(v).unwrap_or(f64::NAN)
}

/// Law of the number of roots.
#[derive(Clone, Debug, Serialize)]
pub struct RootLaw {
    /// `pmf[k] = P(|ρ| = k)`, `k = 0..=n`.
    pub pmf: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
}

impl RootLaw {
    pub fn from_pmf(pmf: Vec<f64>) -> Self {
        let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let second: f64 = pmf.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum();
        Self {
            pmf,
            mean,
            variance: second - mean * mean,
        }
    }

    /// Law of a sum of independent Bernoulli variables.
    pub fn bernoulli_sum(params: &[f64]) -> Self {
        let mut pmf = vec![1.0];
        for &p in params {
            let mut next = vec![0.0; pmf.len() + 1];
            for (k, &v) in pmf.iter().enumerate() {
                next[k] += v * (1.0 - p);
                next[k + 1] += v * p;
            }
            pmf = next;
        }
        let mean = params.iter().sum();
        let variance = params.iter().map(|p| p * (1.0 - p)).sum();
        Self { pmf, mean, variance }
    }
}

/// Enumeration-backed verifier for one small graph.
pub struct Oracle<'g> {
    graph: &'g Graph,
    table: ForestTable,
}

impl<'g> Oracle<'g> {
    pub fn new(graph: &'g Graph) -> Result<Self> {
        Ok(Self {
            graph,
            table: ForestTable::enumerate(graph)?,
        })
    }

    pub fn table(&self) -> &ForestTable {
        &self.table
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    fn n(&self) -> usize {
        self.graph.n()
    }

    fn weights_q(&self, plan: &KillingPlan) -> (Vec<f64>, f64) {
        let w: Vec<f64> = (0..self.table.len()).map(|i| self.table.weight_q(i, plan)).collect();
        let z = w.iter().sum();
        (w, z)
    }

    fn weights_q_exact(&self, plan: &KillingPlan) -> (Vec<BigRational>, BigRational) {
        let w: Vec<BigRational> = (0..self.table.len())
            .map(|i| self.table.weight_q_exact(self.graph, i, plan))
            .collect();
        let z = w.iter().fold(BigRational::zero(), |a, b| a + b);
        (w, z)
    }

    /// `ν_Q` over the table.
    pub fn probabilities(&self, plan: &KillingPlan) -> Vec<f64> {
        self.table.probabilities(plan)
    }

    /// Enumerated root-count law under uniform killing `q`.
    pub fn root_law(&self, q: f64) -> Result<RootLaw> {
        let plan = KillingPlan::uniform(self.n(), q)?;
        let (w, z) = self.weights_q(&plan);
        let mut pmf = vec![0.0; self.n() + 1];
        for (i, wi) in w.iter().enumerate() {
            pmf[self.table.n_roots(i)] += wi / z;
        }
        Ok(RootLaw::from_pmf(pmf))
    }

    // ---------------------------------------------------------------- partition

    pub fn partition_check(&self, plan: &KillingPlan) -> Result<Report> {
        let mut rep = Report::new("partition");
        let g = self.graph;
        let (_, z_enum) = self.weights_q(plan);
        let (_, m) = q_minus_l::<f64>(g, plan);
        rep.push(Check::relative("Z_Q = det_{X∖S}(Q-L)", z_enum, det(&m), TOL));

        let (_, z_exact) = self.weights_q_exact(plan);
        let (_, m_exact) = q_minus_l::<BigRational>(g, plan);
        let d_exact = det(&m_exact);
        rep.push(Check::exact(
            "Z_Q = det_{X∖S}(Q-L) [exact]",
            q2f(&z_exact),
            q2f(&d_exact),
            z_exact == d_exact,
        ));

        match plan.kind() {
            PlanKind::Uniform(_) => {
                let l = g.generator_matrix()?;
                self.poly_checks(&mut rep, "Z(q) = χ_L(q)", 0, &l)?;
            }
            PlanKind::SetRestricted { set, .. } => {
                let rc = complement(self.n(), set);
                let block: Matrix = generator_block(g, &rc);
                self.poly_checks(&mut rep, "Z_R(q) = χ_{[L]_{R^c}}(q)", mask_of(set), &block)?;
            }
            PlanKind::General => {}
        }
        Ok(rep)
    }

    fn poly_checks(&self, rep: &mut Report, name: &str, r_mask: u16, block: &Matrix) -> Result<()> {
        let enum_f = self.table.restricted_polynomial(r_mask);
        let fl_f = char_poly(block);
        let err = enum_f.max_rel_diff(&fl_f);
        rep.push(Check::with_error(
            format!("{name} coefficients"),
            enum_f.coeff(1),
            fl_f.coeff(1),
            err,
            TOL,
        ));
        let enum_x = self.table.restricted_polynomial_exact(self.graph, r_mask);
        let fl_x = char_poly(&block.to_exact());
        rep.push(Check::exact(
            format!("{name} coefficients [exact]"),
            q2f(&enum_x.coeff(1)),
            q2f(&fl_x.coeff(1)),
            enum_x == fl_x,
        ));
        Ok(())
    }

    // ------------------------------------------------------------ determinantal

    /// `P_Q(A ⊆ ρ ∖ S) = det_A(K)` for one subset `A ⊆ X ∖ S`.
    pub fn determinantal_check(&self, plan: &KillingPlan, a: &[usize]) -> Result<Report> {
        let k = kernel(self.graph, plan)?;
        let (w, z) = self.weights_q(plan);
        let mut rep = Report::new("determinantal");
        rep.push(self.determinantal_one(&k, &w, z, a)?);
        Ok(rep)
    }

    fn determinantal_one(&self, k: &Kernel, w: &[f64], z: f64, a: &[usize]) -> Result<Check> {
        let pos = positions(k, a)?;
        let mask = mask_of(a);
        let p: f64 = (0..w.len())
            .filter(|&i| self.table.root_mask(i) & mask == mask)
            .map(|i| w[i])
            .sum::<f64>()
            / z;
        Ok(Check::close(
            format!("P(A ⊆ ρ∖S) = det_A(K), A = {a:?}"),
            p,
            det_sub(&k.k, &pos),
            TOL,
        ))
    }

    /// Every `A ⊆ X ∖ S`, in float and in exact arithmetic.
    pub fn determinantal_check_all(&self, plan: &KillingPlan) -> Result<Report> {
        let k = kernel(self.graph, plan)?;
        let kx: Kernel<BigRational> = kernel_exact(self.graph, plan)?;
        let (w, z) = self.weights_q(plan);
        let (wx, zx) = self.weights_q_exact(plan);
        let finite = plan.finite_vertices();
        let mut rep = Report::new("determinantal");
        for sub in 0u32..(1 << finite.len()) {
            let a: Vec<usize> = (0..finite.len())
                .filter(|&j| sub & (1 << j) != 0)
                .map(|j| finite[j])
                .collect();
            rep.push(self.determinantal_one(&k, &w, z, &a)?);
            let mask = mask_of(&a);
            let mut p = BigRational::zero();
            for (i, wi) in wx.iter().enumerate() {
                if self.table.root_mask(i) & mask == mask {
                    p += wi;
                }
            }
            p /= zx.clone();
            let pos = positions(&kx, &a)?;
            let d = det_sub(&kx.k, &pos);
            rep.push(Check::exact(
                format!("P(A ⊆ ρ∖S) = det_A(K) [exact], A = {a:?}"),
                q2f(&p),
                q2f(&d),
                p == d,
            ));
        }
        Ok(rep)
    }

    // --------------------------------------------------------------- root count

    /// Enumerated root-count law against the Bernoulli convolution of the
    /// spectrum (when real) and against the characteristic polynomial.
    pub fn root_count_check(&self, q: f64) -> Result<(RootLaw, Option<RootLaw>, Report)> {
        let enumerated = self.root_law(q)?;
        let mut rep = Report::new("root_count");
        let l = self.graph.generator_matrix()?;
        let chi = char_poly(&l);
        let zq = chi.eval(&q);
        for k in 0..=self.n() {
            let alg = chi.coeff(k) * q.powi(k as i32) / zq;
            rep.push(Check::close(
                format!("P(|ρ|={k}) = c_k q^k / χ_L(q)"),
                enumerated.pmf[k],
                alg,
                TOL,
            ));
        }
        let mu = self.graph.check_reversible();
        let spec = eigenvalues(&l.neg(), mu.as_deref())?;
        let bern = if spec.all_real {
            let params: Vec<f64> = spec.real()?.iter().map(|&lam| q / (q + lam.max(0.0))).collect();
            let b = RootLaw::bernoulli_sum(&params);
            for k in 0..=self.n() {
                rep.push(Check::close(
                    format!("P(|ρ|={k}) = Bernoulli convolution"),
                    enumerated.pmf[k],
                    b.pmf[k],
                    TOL,
                ));
            }
            rep.push(Check::close("E|ρ| = Σ q/(q+λ_i)", enumerated.mean, b.mean, TOL));
            rep.push(Check::close(
                "Var|ρ| = Σ p_i(1-p_i)",
                enumerated.variance,
                b.variance,
                TOL,
            ));
            Some(b)
        } else {
            None
        };
        Ok((enumerated, bern, rep))
    }

    // ------------------------------------------------------------ hitting times

    fn absorptions(&self, w: &[f64]) -> Result<HashMap<u16, Absorption>> {
        let mut cache = HashMap::new();
        for (i, &wi) in w.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            let m = self.table.root_mask(i);
            if let std::collections::hash_map::Entry::Vacant(e) = cache.entry(m) {
                e.insert(Absorption::new(self.graph, &members(m, self.n()))?);
            }
        }
        Ok(cache)
    }

    /// `E_Q[E_x[T_ρ]]` by enumeration and linear solves, for every `x`.
    pub fn mean_hitting_times(&self, plan: &KillingPlan) -> Result<Vec<f64>> {
        let (w, z) = self.weights_q(plan);
        let cache = self.absorptions(&w)?;
        Ok((0..self.n())
            .map(|x| {
                w.iter()
                    .enumerate()
                    .filter(|(_, &wi)| wi > 0.0)
                    .map(|(i, &wi)| wi / z * cache[&self.table.root_mask(i)].time_from(x))
                    .sum()
            })
            .collect())
    }

    /// Right-hand side `Σ_y (1/q(y)) [P(ρ(τ_x) = {y}) - P(ρ = {y})]`. Each
    /// term is formed as `w_Q(φ) / q(y)` with the factor `q(y)` cancelled, so
    /// vertices with zero rate contribute their limit rather than `0/0`.
    fn general_hitting_rhs(&self, plan: &KillingPlan, z: f64, x: usize) -> f64 {
        let n = self.n();
        let mut total = 0.0;
        for i in 0..self.table.len() {
            let mask = self.table.root_mask(i);
            if plan.infinite_set().iter().any(|&s| mask & (1 << s) == 0) {
                continue;
            }
            let y = self.table.root_of(i, x);
            if plan.is_infinite(y) {
                continue;
            }
            let mut v = self.table.weight(i);
            for r in 0..n {
                if r != y && mask & (1 << r) != 0 && !plan.is_infinite(r) {
                    v *= plan.q(r);
                }
            }
            total += v;
            if mask.count_ones() == 1 {
                total -= self.table.weight(i);
            }
        }
        total / z
    }

    pub fn hitting_formula_check(&self, plan: &KillingPlan, x: usize) -> Result<Report> {
        let (w, z) = self.weights_q(plan);
        let times = self.mean_hitting_times(plan)?;
        let mut rep = Report::new("hitting");
        let rhs = self.general_hitting_rhs(plan, z, x);
        rep.push(Check::close(
            format!("E_Q[E_x T_ρ] general formula, x = {x}"),
            times[x],
            rhs,
            TOL,
        ));
        if let Some(q) = plan.uniform_q() {
            let p1: f64 = (0..w.len())
                .filter(|&i| self.table.n_roots(i) == 1)
                .map(|i| w[i])
                .sum::<f64>()
                / z;
            rep.push(Check::close(
                format!("E_q[E_x T_ρ] = (1 - P(|ρ|=1))/q, x = {x}"),
                times[x],
                (1.0 - p1) / q,
                TOL,
            ));
        }
        Ok(rep)
    }

    /// All three hitting-time formulas at every start point, plus
    /// x-independence of the unconditioned and conditioned means under
    /// uniform killing (general rates give x-dependent means).
    pub fn hitting_formula_check_all(&self, plan: &KillingPlan) -> Result<Report> {
        let (w, z) = self.weights_q(plan);
        let cache = self.absorptions(&w)?;
        let n = self.n();
        let mut rep = Report::new("hitting");
        let times: Vec<f64> = (0..n)
            .map(|x| {
                (0..w.len())
                    .filter(|&i| w[i] > 0.0)
                    .map(|i| w[i] / z * cache[&self.table.root_mask(i)].time_from(x))
                    .sum()
            })
            .collect();
        for x in 0..n {
            let rhs = self.general_hitting_rhs(plan, z, x);
            rep.push(Check::close(
                format!("E_Q[E_x T_ρ] general formula, x = {x}"),
                times[x],
                rhs,
                TOL,
            ));
        }
        if let Some(q) = plan.uniform_q() {
            let sp = spread(&times);
            rep.push(Check::with_error(
                "E_q[E_x T_ρ] independent of x",
                sp,
                0.0,
                sp,
                TIGHT_TOL,
            ));
            let mut pk = vec![0.0; n + 2];
            for (i, &wi) in w.iter().enumerate() {
                pk[self.table.n_roots(i)] += wi / z;
            }
            for &t in &times {
                rep.push(Check::close(
                    "E_q[E_x T_ρ] = (1 - P(|ρ|=1))/q",
                    t,
                    (1.0 - pk[1]) / q,
                    TOL,
                ));
            }
            for m in 1..=n {
                if pk[m] <= 0.0 {
                    continue;
                }
                let cond: Vec<f64> = (0..n)
                    .map(|x| {
                        (0..w.len())
                            .filter(|&i| w[i] > 0.0 && self.table.n_roots(i) == m)
                            .map(|i| w[i] / z * cache[&self.table.root_mask(i)].time_from(x))
                            .sum::<f64>()
                            / pk[m]
                    })
                    .collect();
                let rhs = pk[m + 1] / (q * pk[m]);
                for &c in &cond {
                    rep.push(Check::close(
                        format!("E_q[E_x T_ρ | |ρ|={m}] = P(m+1)/(q P(m))"),
                        c,
                        rhs,
                        TOL,
                    ));
                }
                let s = spread(&cond);
                rep.push(Check::with_error(
                    format!("E_q[E_x T_ρ | |ρ|={m}] independent of x"),
                    s,
                    0.0,
                    s,
                    TIGHT_TOL * rhs.max(1.0),
                ));
            }
        }
        Ok(rep)
    }

    /// Expected maximal hitting time of the roots against its bounds.
    pub fn max_hitting_bound_check(&self, q: f64) -> Result<Report> {
        let n = self.n();
        let plan = KillingPlan::uniform(n, q)?;
        let (w, z) = self.weights_q(&plan);
        let cache = self.absorptions(&w)?;
        let mut rep = Report::new("max_hitting");
        let mut pk = vec![0.0; n + 2];
        let mut max_by_k = vec![0.0; n + 2];
        let mut lhs = 0.0;
        for (i, &wi) in w.iter().enumerate() {
            let a = &cache[&self.table.root_mask(i)];
            let mx = (0..n).map(|x| a.time_from(x)).fold(0.0, f64::max);
            let k = self.table.n_roots(i);
            pk[k] += wi / z;
            max_by_k[k] += wi / z * mx;
            lhs += wi / z * mx;
        }
        let mean: f64 = pk.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let bound = (mean - pk[1]) / q;
        rep.push(Check::at_most(
            "E_q[max_x E_x T_ρ] ≤ (E|ρ| - P(|ρ|=1))/q",
            lhs,
            bound,
            1e-12 + TOL * bound,
        ));
        let l = self.graph.generator_matrix()?;
        let mu = self.graph.check_reversible();
        let spec = eigenvalues(&l.neg(), mu.as_deref())?;
        if spec.all_real {
            let lam = spec.real()?;
            let s: f64 = lam.iter().map(|&v| q / (q + v.max(0.0))).sum();
            let prod: f64 = lam[1..].iter().map(|&v| v / (q + v)).product();
            rep.push(Check::close("spectral form of the bound", bound, (s - prod) / q, TOL));
        }
        for m in 1..=n {
            if pk[m] <= 0.0 {
                continue;
            }
            let cond = max_by_k[m] / pk[m];
            let b = (m + 1) as f64 * pk[m + 1] / (q * pk[m]);
            rep.push(Check::at_most(
                format!("E_q[max_x E_x T_ρ | |ρ|={m}] ≤ (m+1)P(m+1)/(q P(m))"),
                cond,
                b,
                1e-12 + TOL * b,
            ));
        }
        Ok(rep)
    }

    // ------------------------------------------------------- Freidlin–Wentzell

    /// Forest sums for `P_x(X(T_R) = y)` and `E_x[T_R]` against linear solves.
    pub fn fw_check(&self, r: &[usize], x: usize, y: usize) -> Result<Report> {
        let abs = Absorption::<f64>::new(self.graph, r)?;
        let mut rep = Report::new("freidlin_wentzell");
        self.fw_into(&mut rep, &abs, mask_of(r), x, Some(y));
        Ok(rep)
    }

    fn fw_into(&self, rep: &mut Report, abs: &Absorption, r_mask: u16, x: usize, y: Option<usize>) {
        let t = &self.table;
        let z_r0: f64 = t.with_root_set(r_mask).iter().map(|&i| t.weight(i as usize)).sum();
        let ys: Vec<usize> = match y {
            Some(y) => vec![y],
            None => abs.absorbing.clone(),
        };
        for y in ys {
            let s: f64 = t
                .with_root_set(r_mask)
                .iter()
                .map(|&i| i as usize)
                .filter(|&i| t.root_of(i, x) == y)
                .map(|i| t.weight(i))
                .sum();
            rep.push(Check::close(
                format!("P_{x}(X(T_R)={y}) forest sum, R mask {r_mask:#b}"),
                s / z_r0,
                abs.exit_prob(x, y),
                TIGHT_TOL,
            ));
        }
        let mut s = 0.0;
        for &yv in &abs.transient {
            let m = r_mask | (1 << yv);
            s += t
                .with_root_set(m)
                .iter()
                .map(|&i| i as usize)
                .filter(|&i| t.root_of(i, x) == yv)
                .map(|i| t.weight(i))
                .sum::<f64>();
        }
        rep.push(Check::close(
            format!("E_{x}[T_R] forest sum, R mask {r_mask:#b}"),
            s / z_r0,
            abs.time_from(x),
            TIGHT_TOL,
        ));
    }

    /// Every nonempty proper `R`, every `x ∉ R` and `y ∈ R`.
    pub fn fw_check_all(&self) -> Result<Report> {
        let n = self.n();
        let mut rep = Report::new("freidlin_wentzell");
        for r_mask in 1u16..((1u32 << n) - 1) as u16 {
            let r = members(r_mask, n);
            let abs = Absorption::<f64>::new(self.graph, &r)?;
            for x in 0..n {
                if r_mask & (1 << x) == 0 {
                    self.fw_into(&mut rep, &abs, r_mask, x, None);
                }
            }
        }
        Ok(rep)
    }

    // ---------------------------------------------------------------- cumulants

    /// `κ_A` from the long-cycle formula against Möbius inversion of the
    /// enumerated moments `P(B ⊆ ρ)`.
    pub fn cumulant_check(&self, q: f64, a: &[usize]) -> Result<Report> {
        let plan = KillingPlan::uniform(self.n(), q)?;
        let k = kernel(self.graph, &plan)?;
        let (w, z) = self.weights_q(&plan);
        let mut rep = Report::new("cumulant");
        rep.push(self.cumulant_one(&k, &w, z, a));
        Ok(rep)
    }

    fn cumulant_one(&self, k: &Kernel, w: &[f64], z: f64, a: &[usize]) -> Check {
        let cyc = cycle_cumulant(&k.k, a);
        let moment = |sub: &[usize]| -> f64 {
            let m = mask_of(sub);
            (0..w.len())
                .filter(|&i| self.table.root_mask(i) & m == m)
                .map(|i| w[i])
                .sum::<f64>()
                / z
        };
        let mob = moebius_cumulant(a, &moment);
        Check::close(format!("κ_A cycle formula, A = {a:?}"), cyc, mob, 1e-9)
    }

    pub fn cumulant_check_all(&self, q: f64, max_size: usize) -> Result<Report> {
        let n = self.n();
        let plan = KillingPlan::uniform(n, q)?;
        let k = kernel(self.graph, &plan)?;
        let (w, z) = self.weights_q(&plan);
        let mut rep = Report::new("cumulant");
        for mask in 1u16..(1u32 << n) as u16 {
            if mask.count_ones() as usize <= max_size {
                rep.push(self.cumulant_one(&k, &w, z, &members(mask, n)));
            }
        }
        Ok(rep)
    }

    // -------------------------------------------------------- rooted partitions

    /// `P(ρ = {x_i} | partition = {A_i}) = Π μ_{A_i}(x_i)`.
    pub fn rooted_partition_check(&self, q: f64, blocks: &[Vec<usize>], roots: &[usize]) -> Result<Report> {
        let n = self.n();
        if blocks.len() != roots.len() {
            return Err(Error::InvalidArgument("one root per block is required".into()));
        }
        let mut cover = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            for &x in block {
                if x >= n || cover[x] != usize::MAX {
                    return Err(Error::InvalidArgument("blocks must partition the vertex set".into()));
                }
                cover[x] = b;
            }
        }
        if cover.contains(&usize::MAX) {
            return Err(Error::InvalidArgument("blocks must cover the vertex set".into()));
        }
        for (block, &r) in blocks.iter().zip(roots) {
            if !block.contains(&r) {
                return Err(Error::InvalidArgument(format!("root {r} not in its block")));
            }
            if !self.graph.block_has_sink(block) {
                return Err(Error::ReducibleBlock(block.clone()));
            }
        }
        let plan = KillingPlan::uniform(n, q)?;
        let (w, z) = self.weights_q(&plan);
        let block_masks: Vec<u16> = (0..n).map(|x| mask_of(&blocks[cover[x]])).collect();
        let root_mask = mask_of(roots);
        let (mut num, mut den) = (0.0, 0.0);
        for (i, &wi) in w.iter().enumerate() {
            if self.table.tree_masks(i) == block_masks {
                den += wi / z;
                if self.table.root_mask(i) == root_mask {
                    num += wi / z;
                }
            }
        }
        let mut rep = Report::new("rooted_partition");
        let mut product = 1.0;
        for (block, &r) in blocks.iter().zip(roots) {
            let (mu_solve, mu_tree) = self.restricted_equilibria(block)?;
            let j = block.iter().position(|&v| v == r).expect("root in block");
            for (a, b) in mu_solve.iter().zip(&mu_tree) {
                rep.push(Check::close(
                    format!("μ_A solve = tree sum, A = {block:?}"),
                    *a,
                    *b,
                    TOL,
                ));
            }
            product *= mu_solve[j];
        }
        rep.push(Check::close(
            format!("P(ρ = {roots:?} | partition) = Π μ_A(x)"),
            num / den,
            product,
            TOL,
        ));
        Ok(rep)
    }

    /// Checks the rooted-partition identity for every partition with
    /// positive probability, grouping the enumeration once.
    pub fn rooted_partition_sweep(&self, q: f64) -> Result<Report> {
        let n = self.n();
        let plan = KillingPlan::uniform(n, q)?;
        let (w, _) = self.weights_q(&plan);
        let mut groups: HashMap<Vec<u16>, (f64, HashMap<u16, f64>)> = HashMap::new();
        for (i, &wi) in w.iter().enumerate() {
            let masks = self.table.tree_masks(i);
            let mut key = masks.clone();
            key.sort_unstable();
            key.dedup();
            let e = groups.entry(key).or_insert_with(|| (0.0, HashMap::new()));
            e.0 += wi;
            *e.1.entry(self.table.root_mask(i)).or_insert(0.0) += wi;
        }
        let mut mu_cache: HashMap<u16, Vec<f64>> = HashMap::new();
        let mut rep = Report::new("rooted_partition");
        let mut keys: Vec<_> = groups.keys().cloned().collect();
        keys.sort();
        for key in keys {
            let (total, by_roots) = &groups[&key];
            for &bm in &key {
                if let std::collections::hash_map::Entry::Vacant(e) = mu_cache.entry(bm) {
                    let block = members(bm, n);
                    let (a, b) = self.restricted_equilibria(&block)?;
                    for (u, v) in a.iter().zip(&b) {
                        rep.push(Check::close(
                            format!("μ_A solve = tree sum, A = {block:?}"),
                            *u,
                            *v,
                            TOL,
                        ));
                    }
                    e.insert(a);
                }
            }
            let mut observed_mass = 0.0;
            let mut rm: Vec<_> = by_roots.iter().collect();
            rm.sort_by_key(|(m, _)| **m);
            for (&roots, &wr) in rm {
                let mut product = 1.0;
                for &bm in &key {
                    let r = (bm & roots).trailing_zeros() as usize;
                    let block = members(bm, n);
                    let j = block.iter().position(|&v| v == r).expect("one root per block");
                    product *= mu_cache[&bm][j];
                }
                observed_mass += product;
                rep.push(Check::close(
                    format!("P(ρ = {:?} | partition {key:?}) = Π μ_A(x)", members(roots, n)),
                    wr / total,
                    product,
                    TOL,
                ));
            }
            rep.push(Check::close(
                format!("Σ Π μ_A over observed roots, partition {key:?}"),
                observed_mass,
                1.0,
                TOL,
            ));
        }
        Ok(rep)
    }

    /// Stationary law of the dynamics restricted to `block`, by solving the
    /// balance equations and by summing spanning trees of the block.
    pub fn restricted_equilibria(&self, block: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
        if !self.graph.block_has_sink(block) {
            return Err(Error::ReducibleBlock(block.to_vec()));
        }
        Ok((
            restricted_stationary(self.graph, block)?,
            tree_sum_measure(self.graph, block),
        ))
    }
}

fn positions(k: &Kernel<impl Scalar>, a: &[usize]) -> Result<Vec<usize>> {
    a.iter()
        .map(|&x| {
            k.position(x)
                .ok_or_else(|| Error::InvalidArgument(format!("vertex {x} has infinite killing rate")))
        })
        .collect()
}

fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

/// `(-1)^{|A|-1} Σ_{σ long cycle on A} Π_x K(x, σ(x))`; `kk` is indexed by
/// vertex.
pub fn cycle_cumulant(kk: &Matrix, a: &[usize]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if a.len() == 1 {
        return kk[(a[0], a[0])];
    }
    let first = a[0];
    let mut rest: Vec<usize> = a[1..].to_vec();
    let mut total = 0.0;
    permute(&mut rest, 0, &mut |perm| {
        let mut p = kk[(first, perm[0])];
        for w in perm.windows(2) {
            p *= kk[(w[0], w[1])];
        }
        p *= kk[(perm[perm.len() - 1], first)];
        total += p;
    });
    let sign = if a.len() % 2 == 1 { 1.0 } else { -1.0 };
    sign * total
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

/// `κ_A = Σ_π (-1)^{|π|-1} (|π|-1)! Π_{B∈π} m(B)` over set partitions of `A`.
pub fn moebius_cumulant(a: &[usize], moment: &dyn Fn(&[usize]) -> f64) -> f64 {
    let mut total = 0.0;
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    set_partitions(a, 0, &mut blocks, &mut |p| {
        let k = p.len();
        let fact: f64 = (1..k).map(|i| i as f64).product();
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        total += sign * fact * p.iter().map(|b| moment(b)).product::<f64>();
    });
    total
}

pub(crate) fn set_partitions(a: &[usize], i: usize, blocks: &mut Vec<Vec<usize>>, f: &mut impl FnMut(&[Vec<usize>])) {
    if i == a.len() {
        f(blocks);
        return;
    }
    for b in 0..blocks.len() {
        blocks[b].push(a[i]);
        set_partitions(a, i + 1, blocks, f);
        blocks[b].pop();
    }
    blocks.push(vec![a[i]]);
    set_partitions(a, i + 1, blocks, f);
    blocks.pop();
}

/// Solve `μ L_A = 0`, `Σ μ = 1` for the dynamics on `block` with jumps
/// leaving the block suppressed.
pub fn restricted_stationary(graph: &Graph, block: &[usize]) -> Result<Vec<f64>> {
    let k = block.len();
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let mut pos = vec![usize::MAX; graph.n()];
    for (i, &x) in block.iter().enumerate() {
        pos[x] = i;
    }
    let mut la = Matrix::zeros(k, k);
    for (i, &x) in block.iter().enumerate() {
        for (y, r) in graph.neighbours(x) {
            let j = pos[y];
            if j != usize::MAX {
                la[(i, j)] += r;
                la[(i, i)] -= r;
            }
        }
    }
    let mut a = la.transpose();
    for j in 0..k {
        a[(k - 1, j)] = 1.0;
    }
    let mut b = vec![0.0; k];
    b[k - 1] = 1.0;
    let mu = Lu::new(&a)
        .solve(&b)
        .map_err(|_| Error::ReducibleBlock(block.to_vec()))?;
    Ok(mu)
}

/// `μ_A(x) ∝ Σ_{τ spanning tree of A rooted at x} w(τ)`, by enumeration.
pub fn tree_sum_measure(graph: &Graph, block: &[usize]) -> Vec<f64> {
    let k = block.len();
    let mut pos = vec![usize::MAX; graph.n()];
    for (i, &x) in block.iter().enumerate() {
        pos[x] = i;
    }
    let adj: Vec<Vec<(usize, f64)>> = block
        .iter()
        .map(|&x| {
            graph
                .neighbours(x)
                .filter(|(y, _)| pos[*y] != usize::MAX)
                .map(|(y, r)| (pos[y], r))
                .collect()
        })
        .collect();
    let mut sums = vec![0.0; k];
    for root in 0..k {
        let mut parent = vec![usize::MAX; k];
        let mut assigned = vec![false; k];
        assigned[root] = true;
        tree_recurse(&adj, root, 0, &mut parent, &mut assigned, 1.0, &mut sums[root]);
    }
    let z: f64 = sums.iter().sum();
    sums.iter().map(|s| s / z).collect()
}

fn tree_recurse(
    adj: &[Vec<(usize, f64)>],
    root: usize,
    i: usize,
    parent: &mut [usize],
    assigned: &mut [bool],
    w: f64,
    acc: &mut f64,
) {
    let k = adj.len();
    if i == k {
        *acc += w;
        return;
    }
    if i == root {
        tree_recurse(adj, root, i + 1, parent, assigned, w, acc);
        return;
    }
    assigned[i] = true;
    for &(j, r) in &adj[i] {
        // Reject if following parents from j returns to i.
        let mut v = j;
        let cycle = loop {
            if v == i {
                break true;
            }
            if v == root || !assigned[v] || parent[v] == usize::MAX {
                break false;
            }
            v = parent[v];
        };
        if cycle {
            continue;
        }
        parent[i] = j;
        tree_recurse(adj, root, i + 1, parent, assigned, w * r, acc);
    }
    parent[i] = usize::MAX;
    assigned[i] = false;
}

/// Eigenvalues of `-L` with the reversible symmetrisation when available.
pub fn generator_spectrum(graph: &Graph) -> Result<Spectrum> {
    let l = graph.generator_matrix()?;
    let mu = graph.check_reversible();
    eigenvalues(&l.neg(), mu.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, grid_graph, Topology};

    fn two_cycle(a: f64, b: f64) -> Graph {
        build_graph(2, &[(0, 1, a), (1, 0, b)]).unwrap()
    }

    fn complete3() -> Graph {
        let mut e = Vec::new();
        for x in 0..3 {
            for y in 0..3 {
                if x != y {
                    e.push((x, y, 1.0));
                }
            }
        }
        build_graph(3, &e).unwrap()
    }

    #[test]
    fn partition_examples() {
        let g = two_cycle(2.0, 3.0);
        let o = Oracle::new(&g).unwrap();
        let r = o.partition_check(&KillingPlan::uniform(2, 0.5).unwrap()).unwrap();
        assert!(r.pass(), "{r:?}");
        let k3 = complete3();
        let o3 = Oracle::new(&k3).unwrap();
        assert_eq!(o3.table().root_count_polynomial().coeffs, vec![0.0, 9.0, 6.0, 1.0]);
        assert!(o3
            .partition_check(&KillingPlan::uniform(3, 1.5).unwrap())
            .unwrap()
            .pass());
        // Z_R(0) on the 2-cycle with R = {0} is the single forest 1 → 0.
        let plan = KillingPlan::set_restricted(2, 0.0, &[0]).unwrap();
        let (w, z) = o.weights_q(&plan);
        assert_eq!(z, 3.0);
        assert_eq!(w.iter().filter(|&&v| v > 0.0).count(), 1);
        assert!(o.partition_check(&plan).unwrap().pass());
    }

    #[test]
    fn determinantal_examples() {
        let (a, b, q) = (2.0, 3.0, 0.5);
        let g = two_cycle(a, b);
        let o = Oracle::new(&g).unwrap();
        let plan = KillingPlan::uniform(2, q).unwrap();
        let r = o.determinantal_check(&plan, &[0]).unwrap();
        assert!((r.checks[0].lhs - (q + b) / (q + a + b)).abs() < 1e-14);
        assert!(o.determinantal_check(&plan, &[]).unwrap().checks[0].lhs == 1.0);
        let k3 = complete3();
        let o3 = Oracle::new(&k3).unwrap();
        assert!(o3
            .determinantal_check_all(&KillingPlan::uniform(3, 0.75).unwrap())
            .unwrap()
            .pass());
    }

    #[test]
    fn root_count_examples() {
        let (a, b, q) = (2.0, 3.0, 0.5);
        let g = two_cycle(a, b);
        let (en, bern, rep) = Oracle::new(&g).unwrap().root_count_check(q).unwrap();
        assert!(rep.pass());
        assert_eq!(en.pmf[0], 0.0);
        assert!((en.pmf[1] - (a + b) / (q + a + b)).abs() < 1e-14);
        assert!(bern.is_some());
        let k3 = complete3();
        let (en, _, rep) = Oracle::new(&k3).unwrap().root_count_check(1.0).unwrap();
        assert!(rep.pass());
        assert!((en.pmf[1] - 9.0 / 16.0).abs() < 1e-14);
    }

    #[test]
    fn hitting_examples() {
        let (a, b, q) = (2.0, 3.0, 0.5);
        let g = two_cycle(a, b);
        let o = Oracle::new(&g).unwrap();
        let plan = KillingPlan::uniform(2, q).unwrap();
        let t = o.mean_hitting_times(&plan).unwrap();
        for x in 0..2 {
            assert!((t[x] - 1.0 / (q + a + b)).abs() < 1e-14);
        }
        assert!(o.hitting_formula_check_all(&plan).unwrap().pass());
        let k3 = complete3();
        let o3 = Oracle::new(&k3).unwrap();
        let q = 1.3;
        let law = o3.root_law(q).unwrap();
        assert!((law.pmf[2] / (q * law.pmf[1]) - 2.0 / 3.0).abs() < 1e-14);
        assert!(o3
            .hitting_formula_check_all(&KillingPlan::uniform(3, q).unwrap())
            .unwrap()
            .pass());
        assert!(o3.max_hitting_bound_check(q).unwrap().pass());
        let r = o.max_hitting_bound_check(0.5).unwrap();
        assert!((r.checks[0].lhs - r.checks[0].rhs).abs() < 1e-14);
    }

    #[test]
    fn freidlin_wentzell_examples() {
        let g = grid_graph(3, 1, Topology::Rectangle, None).unwrap();
        let o = Oracle::new(&g).unwrap();
        let r = o.fw_check(&[0, 2], 1, 0).unwrap();
        assert!((r.checks[0].lhs - 0.5).abs() < 1e-15);
        assert!(r.pass());
        assert!(Oracle::new(&complete3()).unwrap().fw_check_all().unwrap().pass());
    }

    #[test]
    fn cumulant_examples() {
        let k3 = complete3();
        let o = Oracle::new(&k3).unwrap();
        let q = 0.8;
        let k = kernel(&k3, &KillingPlan::uniform(3, q).unwrap()).unwrap();
        assert!((cycle_cumulant(&k.k, &[1]) - k.k[(1, 1)]).abs() < 1e-15);
        let two = cycle_cumulant(&k.k, &[0, 2]);
        assert!((two + k.k[(0, 2)] * k.k[(2, 0)]).abs() < 1e-15);
        assert!(o.cumulant_check_all(q, 3).unwrap().pass());
    }

    #[test]
    fn rooted_partition_examples() {
        let k3 = complete3();
        let o = Oracle::new(&k3).unwrap();
        let r = o.rooted_partition_check(1.0, &[vec![0, 1], vec![2]], &[0, 2]).unwrap();
        assert!(r.pass());
        assert!((r.checks.last().unwrap().rhs - 0.5).abs() < 1e-14);
        let r = o.rooted_partition_check(1.0, &[vec![0, 1, 2]], &[1]).unwrap();
        assert!(r.pass());
        let g = two_cycle(2.0, 3.0);
        let r = Oracle::new(&g)
            .unwrap()
            .rooted_partition_check(1.0, &[vec![0], vec![1]], &[0, 1])
            .unwrap();
        assert!(r.pass());
        assert!(o.rooted_partition_sweep(0.6).unwrap().pass());
        let path = grid_graph(3, 1, Topology::Rectangle, None).unwrap();
        assert!(matches!(
            Oracle::new(&path)
                .unwrap()
                .rooted_partition_check(1.0, &[vec![0, 2], vec![1]], &[0, 1]),
            Err(Error::ReducibleBlock(_))
        ));
    }
}
