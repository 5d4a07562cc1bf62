use crate::error::{Error, Result};

/// Shape of a killing plan.
#[derive(Clone, Debug, PartialEq)]
pub enum PlanKind {
    /// `q(x) = q > 0` everywhere.
    Uniform(f64),
    /// `q(x) = ∞` on `set`, `q(x) = q ≥ 0` elsewhere.
    SetRestricted {
        q: f64,
        set: Vec<usize>,
    },
    General,
}

/// Per-vertex killing rates `q(x) ∈ [0, ∞]`; `f64::INFINITY` marks the set `S`.
#[derive(Clone, Debug, PartialEq)]
pub struct KillingPlan {
    q: Vec<f64>,
    s: Vec<usize>,
    kind: PlanKind,
}

impl KillingPlan {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::InvalidKillingPlan("no vertices".into()));
        }
        if let Some(x) = q.iter().position(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::InvalidKillingPlan(format!("q({x}) = {} is not in [0, ∞]", q[x])));
        }
        if q.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidKillingPlan("every killing rate is zero".into()));
        }
        let s: Vec<usize> = (0..q.len()).filter(|&x| q[x] == f64::INFINITY).collect();
        let kind = classify(&q, &s);
        Ok(Self { q, s, kind })
    }

    pub fn uniform(n: usize, q: f64) -> Result<Self> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::InvalidKillingPlan(format!(
                "uniform killing needs 0 < q < ∞, got {q}"
            )));
        }
        Self::new(vec![q; n])
    }

    /// `q` off `set`, infinite on `set`.
    pub fn set_restricted(n: usize, q: f64, set: &[usize]) -> Result<Self> {
        if !(q >= 0.0) || !q.is_finite() {
            return Err(Error::InvalidKillingPlan(format!("q must be finite and >= 0, got {q}")));
        }
        let mut v = vec![q; n];
        for &x in set {
            if x >= n {
                return Err(Error::VertexOutOfRange { vertex: x, n });
            }
            v[x] = f64::INFINITY;
        }
        Self::new(v)
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    #[inline]
    pub fn q(&self, x: usize) -> f64 {
        self.q[x]
    }

    pub fn rates(&self) -> &[f64] {
        &self.q
    }

    /// Vertices with infinite killing rate, ascending.
    pub fn infinite_set(&self) -> &[usize] {
        &self.s
    }

    #[inline]
    pub fn is_infinite(&self, x: usize) -> bool {
        self.q[x] == f64::INFINITY
    }

    /// `X ∖ S`, ascending.
    pub fn finite_vertices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&x| !self.is_infinite(x)).collect()
    }

    pub fn kind(&self) -> &PlanKind {
        &self.kind
    }

    /// The uniform rate when the plan is uniform.
    pub fn uniform_q(&self) -> Option<f64> {
        match self.kind {
            PlanKind::Uniform(q) => Some(q),
            _ => None,
        }
    }

    /// Same structure with every finite rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.q
                .iter()
                .map(|&v| if v.is_infinite() { v } else { v * factor })
                .collect(),
        )
    }
}

fn classify(q: &[f64], s: &[usize]) -> PlanKind {
    let finite: Vec<f64> = q.iter().copied().filter(|v| v.is_finite()).collect();
    let same = finite.windows(2).all(|w| w[0] == w[1]);
    if !same {
        return PlanKind::General;
    }
    let value = finite.first().copied().unwrap_or(0.0);
    if s.is_empty() {
        PlanKind::Uniform(value)
    } else {
        PlanKind::SetRestricted {
            q: value,
            set: s.to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        assert_eq!(*KillingPlan::uniform(3, 0.5).unwrap().kind(), PlanKind::Uniform(0.5));
        let p = KillingPlan::set_restricted(3, 0.0, &[1]).unwrap();
        assert_eq!(*p.kind(), PlanKind::SetRestricted { q: 0.0, set: vec![1] });
        assert_eq!(p.finite_vertices(), vec![0, 2]);
        let g = KillingPlan::new(vec![1.0, 2.0, f64::INFINITY]).unwrap();
        assert_eq!(*g.kind(), PlanKind::General);
        assert_eq!(g.infinite_set(), &[2]);
    }

    #[test]
    fn rejects_vanishing_plan() {
        assert!(KillingPlan::new(vec![0.0, 0.0]).is_err());
        assert!(KillingPlan::set_restricted(2, 0.0, &[]).is_err());
        assert!(KillingPlan::new(vec![-1.0, 1.0]).is_err());
        assert!(KillingPlan::uniform(2, 0.0).is_err());
    }
}
