//! Estimate reports: the one record type every verification battery emits.

use std::collections::BTreeMap;

/// Outcome of a single estimate check — analytic or Monte Carlo.
///
/// `pass` refers to the tested inequality; it is only meaningful when the
/// run was in regime, and the constructor enforces `pass ⇒ regime_ok`.
/// `meta` is an ordered map (deterministic serialization) of auxiliary
/// diagnostics.
#[derive(Clone, Debug)]
pub struct EstimateReport {
    /// Which estimate this row describes.
    pub name: String,
    /// Left-hand side of the tested inequality (the measured quantity).
    pub lhs: f64,
    /// Standard error of `lhs` whenever it is a Monte Carlo average.
    pub se: Option<f64>,
    /// Right-hand side of the tested inequality (the bound).
    pub rhs: f64,
    /// `lhs / ‖f‖` or the analogous normalized constant, where applicable.
    pub implied_constant: f64,
    /// Whether the run stayed inside the estimate's validity regime
    /// (truncation tails negligible, box exits rare, λ above threshold…).
    pub regime_ok: bool,
    /// Whether the tested inequality held. Forced to `false` out of regime.
    pub pass: bool,
    /// Auxiliary diagnostics, ordered for reproducible output.
    pub meta: BTreeMap<String, String>,
}

impl EstimateReport {
    /// Build a report, enforcing the `pass ⇒ regime_ok` invariant.
    pub fn new(
        name: impl Into<String>,
        lhs: f64,
        se: Option<f64>,
        rhs: f64,
        implied_constant: f64,
        regime_ok: bool,
        pass: bool,
    ) -> Self {
        EstimateReport {
            name: name.into(),
            lhs,
            se,
            rhs,
            implied_constant,
            regime_ok,
            pass: pass && regime_ok,
            meta: BTreeMap::new(),
        }
    }

    /// Attach a diagnostic key/value pair.
    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    /// One-line human-readable summary.
    pub fn summary_line(&self) -> String {
        let verdict = if !self.regime_ok {
            "OUT-OF-REGIME"
        } else if self.pass {
            "PASS"
        } else {
            "FAIL"
        };
        let se = self
            .se
            .map(|s| format!(" (se {s:.3e})"))
            .unwrap_or_default();
        format!(
            "{}: {} lhs {:.6e}{} vs rhs {:.6e}, implied constant {:.6e}",
            self.name, verdict, self.lhs, se, self.rhs, self.implied_constant
        )
    }
}
