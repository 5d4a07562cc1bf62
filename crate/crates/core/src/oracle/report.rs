use serde::Serialize;

/// One compared quantity.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub error: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    /// `|a - b| / max(1, |a|, |b|)`: absolute for probabilities, relative
    /// for large quantities.
    pub fn close(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let error = crate::linalg::mixed_err(lhs, rhs);
        Self::with_error(name, lhs, rhs, error, tol)
    }

    /// Plain relative comparison `|a - b| / max(|a|, |b|)`.
    pub fn relative(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let error = crate::linalg::rel_err(lhs, rhs);
        Self::with_error(name, lhs, rhs, error, tol)
    }

    pub fn absolute(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        Self::with_error(name, lhs, rhs, (lhs - rhs).abs(), tol)
    }

    pub fn with_error(name: impl Into<String>, lhs: f64, rhs: f64, error: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            error,
            tol,
            pass: error <= tol && error.is_finite(),
        }
    }

    /// `lhs ≤ rhs + tol`; `error` holds the violation (0 when satisfied).
    pub fn at_most(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let error = (lhs - rhs).max(0.0);
        Self::with_error(name, lhs, rhs, error, tol)
    }

    /// An exact equality; `error` is 0 or 1.
    pub fn exact(name: impl Into<String>, lhs: f64, rhs: f64, equal: bool) -> Self {
        Self::with_error(name, lhs, rhs, if equal { 0.0 } else { 1.0 }, 0.0)
    }
}

/// A named group of checks for one identity on one instance.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    pub identity: String,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(identity: impl Into<String>) -> Self {
        Self {
            identity: identity.into(),
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn max_error(&self) -> f64 {
        self.checks.iter().map(|c| c.error).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// `{identity, lhs, rhs, error, pass}` summary taken from the worst check.
    pub fn summary(&self) -> ReportSummary {
        let worst = self.checks.iter().max_by(|a, b| {
            (!a.pass)
                .cmp(&!b.pass)
                .then((a.error / a.tol.max(f64::MIN_POSITIVE)).total_cmp(&(b.error / b.tol.max(f64::MIN_POSITIVE))))
        });
        ReportSummary {
            identity: self.identity.clone(),
            checks: self.checks.len(),
            lhs: worst.map_or(0.0, |c| c.lhs),
            rhs: worst.map_or(0.0, |c| c.rhs),
            error: self.max_error(),
            pass: self.pass(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportSummary {
    pub identity: String,
    pub checks: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub error: f64,
    pub pass: bool,
}
