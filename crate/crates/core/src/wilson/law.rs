use super::LerwPath;
use crate::error::{Error, Result};
use crate::graph::{Graph, KillingPlan};
use crate::linalg::{det_sub, shifted_generator_block, Scalar};

/// Exact probability that the loop-erased walk from `path.points[0]`,
/// stopped on `set` (and killed according to `plan`, if any), equals `path`:
/// the product of the rates along the path times
/// `det_{B^c ∖ {y_0..y_{l-1}}}(Q - L) / det_{B^c}(Q - L)`.
pub fn lerw_law(graph: &Graph, set: &[usize], path: &LerwPath, plan: Option<&KillingPlan>) -> Result<f64> {
    lerw_law_exact::<f64>(graph, set, path, plan)
}

pub fn lerw_law_exact<T: Scalar>(
    graph: &Graph,
    set: &[usize],
    path: &LerwPath,
    plan: Option<&KillingPlan>,
) -> Result<T> {
    let n = graph.n();
    let mut absorbing = vec![false; n];
    for &b in set {
        if b >= n {
            return Err(Error::VertexOutOfRange { vertex: b, n });
        }
        absorbing[b] = true;
    }
    let mut q = vec![T::zero(); n];
    if let Some(p) = plan {
        for x in 0..n {
            if p.is_infinite(x) {
                absorbing[x] = true;
            } else {
                q[x] = T::from_f64(p.q(x));
            }
        }
    }
    let pts = &path.points;
    if pts.is_empty() {
        return Err(Error::InvalidArgument("empty path".into()));
    }
    let mut seen = vec![false; n];
    for &v in pts {
        if v >= n {
            return Err(Error::VertexOutOfRange { vertex: v, n });
        }
        if seen[v] {
            return Err(Error::InvalidArgument(format!("path revisits vertex {v}")));
        }
        seen[v] = true;
    }
    let walked = if path.killed { pts.len() } else { pts.len() - 1 };
    if walked == 0 {
        return Err(Error::InvalidArgument("path must leave its start".into()));
    }
    if pts[..walked].iter().any(|&v| absorbing[v]) {
        return Err(Error::InvalidArgument("path enters the absorbing set early".into()));
    }
    if !path.killed && !absorbing[pts[walked]] {
        return Err(Error::InvalidArgument("path does not end in the absorbing set".into()));
    }

    let mut weight = T::one();
    for w in pts.windows(2) {
        let r = graph.rate(w[0], w[1]);
        if r <= 0.0 {
            return Ok(T::zero());
        }
        weight = weight * T::from_f64(r);
    }
    if path.killed {
        weight = weight * q[pts[walked - 1]].clone();
    }
    let bc: Vec<usize> = (0..n).filter(|&x| !absorbing[x]).collect();
    let rest: Vec<usize> = bc.iter().copied().filter(|x| !pts[..walked].contains(x)).collect();
    let m = shifted_generator_block(graph, &q, &(0..n).collect::<Vec<_>>());
    let num = det_sub(&m, &rest);
    let den = det_sub(&m, &bc);
    if den.is_zero() {
        return Err(Error::SingularBlock);
    }
    Ok(weight * num / den)
}
