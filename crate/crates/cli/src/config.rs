//! Run configuration: a flat `key = value` text format, strict parsing, and
//! field-by-field validation.
//!
//! The format is deliberately minimal so configs diff cleanly and can be
//! produced by any tool: one `key = value` pair per line, `#` starts a
//! comment, blank lines are ignored. Unknown keys and duplicate keys are
//! hard errors (silent typos in experiment configs are how wrong numbers
//! get published). Every field except `experiment` has a default, so the
//! smallest valid config is a single line naming the experiment.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use stablelab::presets::CoefficientPreset;
use stablelab::{Error, Result};

/// Which verification battery a run executes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    /// Pointwise generator values: singular-integral quadrature (or a
    /// second-difference reference at the diffusive endpoint) against the
    /// spectral route.
    SymbolCheck,
    /// Manufactured-solution recovery for the variable-coefficient solver.
    SolveManufactured,
    /// Energy and sup-norm inequality battery for solved fields.
    AprioriBattery,
    /// Monte Carlo occupation-functional bounds: discounted, plain, and
    /// window-localized rows over a battery of forcing shapes.
    KrylovBattery,
    /// Path-functional vs solver cross-check on a single forcing.
    FeynmanKac,
    /// Single window-localized occupation bound with a stopped clock.
    LocalKrylov,
    /// Coefficient-smoothing ladder: W1 distances between endpoint laws of
    /// consecutive family members under common noise.
    ConvergenceStudy,
    /// Closed-form threshold and symbol constants.
    Constants,
}

impl Experiment {
    /// Every experiment, in the order `list-experiments` prints them.
    pub const ALL: [Experiment; 8] = [
        Experiment::SymbolCheck,
        Experiment::SolveManufactured,
        Experiment::AprioriBattery,
        Experiment::KrylovBattery,
        Experiment::FeynmanKac,
        Experiment::LocalKrylov,
        Experiment::ConvergenceStudy,
        Experiment::Constants,
    ];

    /// Stable config-file name of the experiment.
    pub fn name(self) -> &'static str {
        match self {
            Experiment::SymbolCheck => "symbol_check",
            Experiment::SolveManufactured => "solve_manufactured",
            Experiment::AprioriBattery => "apriori_battery",
            Experiment::KrylovBattery => "krylov_battery",
            Experiment::FeynmanKac => "feynman_kac",
            Experiment::LocalKrylov => "local_krylov",
            Experiment::ConvergenceStudy => "convergence_study",
            Experiment::Constants => "constants",
        }
    }

    /// One-line description for `list-experiments`.
    pub fn blurb(self) -> &'static str {
        match self {
            Experiment::SymbolCheck => {
                "generator values by singular-integral quadrature vs the spectral route"
            }
            Experiment::SolveManufactured => {
                "variable-coefficient solver recovers a manufactured solution"
            }
            Experiment::AprioriBattery => {
                "energy and sup-norm inequalities on solved fields"
            }
            Experiment::KrylovBattery => {
                "occupation-functional bounds: discounted, plain, and localized rows"
            }
            Experiment::FeynmanKac => {
                "path functional vs solver value for one forcing (paired defect)"
            }
            Experiment::LocalKrylov => {
                "stopped, window-localized occupation bound"
            }
            Experiment::ConvergenceStudy => {
                "W1 ladder between smoothed-coefficient members under common noise"
            }
            Experiment::Constants => "closed-form threshold and symbol constants",
        }
    }

    /// Parse a config-file experiment name.
    pub fn parse(text: &str) -> Result<Experiment> {
        for e in Experiment::ALL {
            if e.name() == text {
                return Ok(e);
            }
        }
        let valid: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
        Err(Error::invalid(
            "experiment",
            format!("unknown experiment {text:?}; valid names: {}", valid.join(", ")),
        ))
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Fully resolved run configuration (defaults applied, overrides folded in).
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub alpha: f64,
    pub lam: f64,
    pub mu: f64,
    pub nu: f64,
    pub k: f64,
    pub coefficient_preset: CoefficientPreset,
    pub n_t: usize,
    pub n_x: usize,
    pub len_t: f64,
    pub len_x: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub x0: f64,
    pub seed: u64,
    pub out_path: String,
}

impl ExperimentConfig {
    /// Baseline values for every optional field.
    pub fn defaults(experiment: Experiment) -> ExperimentConfig {
        ExperimentConfig {
            experiment,
            alpha: 1.5,
            lam: 1.0,
            mu: 0.8,
            nu: 1.2,
            k: 0.3,
            coefficient_preset: CoefficientPreset::SmoothSine,
            n_t: 64,
            n_x: 128,
            len_t: 32.0,
            len_x: 64.0,
            n_paths: 20_000,
            dt: 0.125,
            horizon: 16.0,
            x0: 0.0,
            seed: 42,
            out_path: "out".to_string(),
        }
    }

    /// Canonical `key = value` echo of the config, one line per field, in
    /// the fixed key order used everywhere (files, docs, tests).
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for (key, value) in self.echo_pairs() {
            s.push_str(&key);
            s.push_str(" = ");
            s.push_str(&value);
            s.push('\n');
        }
        s
    }

    fn echo_pairs(&self) -> Vec<(String, String)> {
        vec![
            ("experiment".into(), self.experiment.name().into()),
            ("alpha".into(), format!("{}", self.alpha)),
            ("lam".into(), format!("{}", self.lam)),
            ("mu".into(), format!("{}", self.mu)),
            ("nu".into(), format!("{}", self.nu)),
            ("k".into(), format!("{}", self.k)),
            (
                "coefficient_preset".into(),
                self.coefficient_preset.name().into(),
            ),
            ("n_t".into(), format!("{}", self.n_t)),
            ("n_x".into(), format!("{}", self.n_x)),
            ("len_t".into(), format!("{}", self.len_t)),
            ("len_x".into(), format!("{}", self.len_x)),
            ("n_paths".into(), format!("{}", self.n_paths)),
            ("dt".into(), format!("{}", self.dt)),
            ("horizon".into(), format!("{}", self.horizon)),
            ("x0".into(), format!("{}", self.x0)),
            ("seed".into(), format!("{}", self.seed)),
            ("out_path".into(), self.out_path.clone()),
        ]
    }

    /// Check every field against the domain the downstream modules require,
    /// reporting violations by field name.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha <= 2.0) {
            return Err(Error::invalid(
                "alpha",
                format!("stability index must lie in (1, 2] (got {})", self.alpha),
            ));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(
                "mu",
                format!("lower diffusion bound must be positive (got {})", self.mu),
            ));
        }
        if !(self.nu.is_finite() && self.nu >= self.mu) {
            return Err(Error::invalid(
                "nu",
                format!(
                    "bounds out of order: mu = {} must not exceed nu = {}",
                    self.mu, self.nu
                ),
            ));
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::invalid(
                "k",
                format!("drift bound must be nonnegative (got {})", self.k),
            ));
        }
        if !(self.lam > 0.0 && self.lam.is_finite()) {
            return Err(Error::invalid(
                "lam",
                format!("discount rate must be positive (got {})", self.lam),
            ));
        }
        for (name, n) in [("n_t", self.n_t), ("n_x", self.n_x)] {
            if !n.is_power_of_two() || n < 8 {
                return Err(Error::invalid(
                    name,
                    format!("grid size must be a power of two, at least 8 (got {n})"),
                ));
            }
        }
        for (name, len) in [("len_t", self.len_t), ("len_x", self.len_x)] {
            if !(len > 0.0 && len.is_finite()) {
                return Err(Error::invalid(
                    name,
                    format!("box side length must be positive (got {len})"),
                ));
            }
        }
        if self.n_paths < 2 {
            return Err(Error::invalid(
                "n_paths",
                format!("need at least two sample paths (got {})", self.n_paths),
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(
                "dt",
                format!("step size must be positive (got {})", self.dt),
            ));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid(
                "horizon",
                format!("path horizon must be positive (got {})", self.horizon),
            ));
        }
        if !(self.dt <= self.horizon) {
            return Err(Error::invalid(
                "dt",
                format!(
                    "step size dt = {} must not exceed horizon = {}",
                    self.dt, self.horizon
                ),
            ));
        }
        if !(self.x0.is_finite() && self.x0.abs() < 0.5 * self.len_x) {
            return Err(Error::invalid(
                "x0",
                format!(
                    "start point must lie strictly inside the spatial box (got {} with len_x = {})",
                    self.x0, self.len_x
                ),
            ));
        }
        if self.out_path.is_empty() {
            return Err(Error::invalid("out_path", "output directory must be nonempty"));
        }
        Ok(())
    }
}

fn parse_number<T: FromStr>(key: &'static str, raw: &str, expected: &str) -> Result<T> {
    raw.parse::<T>()
        .map_err(|_| Error::invalid(key, format!("expected {expected}, got {raw:?}")))
}

/// Parse config text. `experiment` must be present; all other keys are
/// optional and default as documented. Unknown or repeated keys are errors.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut pairs: Vec<(String, String, usize)> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::invalid(
                "config",
                format!("line {}: expected 'key = value', got {:?}", idx + 1, line),
            )
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(Error::invalid(
                "config",
                format!("line {}: empty key before '='", idx + 1),
            ));
        }
        if !seen.insert(key.clone()) {
            return Err(Error::invalid(
                "config",
                format!("duplicate key {key:?} on line {}", idx + 1),
            ));
        }
        pairs.push((key, value, idx + 1));
    }

    let experiment_raw = pairs
        .iter()
        .find(|(k, _, _)| k == "experiment")
        .map(|(_, v, _)| v.clone())
        .ok_or_else(|| Error::invalid("experiment", "config must name an experiment"))?;
    let mut cfg = ExperimentConfig::defaults(Experiment::parse(&experiment_raw)?);

    for (key, value, _line) in &pairs {
        let v = value.as_str();
        match key.as_str() {
            "experiment" => {}
            "alpha" => cfg.alpha = parse_number("alpha", v, "a real number")?,
            "lam" => cfg.lam = parse_number("lam", v, "a real number")?,
            "mu" => cfg.mu = parse_number("mu", v, "a real number")?,
            "nu" => cfg.nu = parse_number("nu", v, "a real number")?,
            "k" => cfg.k = parse_number("k", v, "a real number")?,
            "coefficient_preset" => cfg.coefficient_preset = CoefficientPreset::parse(v)?,
            "n_t" => cfg.n_t = parse_number("n_t", v, "a positive integer")?,
            "n_x" => cfg.n_x = parse_number("n_x", v, "a positive integer")?,
            "len_t" => cfg.len_t = parse_number("len_t", v, "a real number")?,
            "len_x" => cfg.len_x = parse_number("len_x", v, "a real number")?,
            "n_paths" => cfg.n_paths = parse_number("n_paths", v, "a positive integer")?,
            "dt" => cfg.dt = parse_number("dt", v, "a real number")?,
            "horizon" => cfg.horizon = parse_number("horizon", v, "a real number")?,
            "x0" => cfg.x0 = parse_number("x0", v, "a real number")?,
            "seed" => cfg.seed = parse_number("seed", v, "an unsigned 64-bit integer")?,
            "out_path" => cfg.out_path = v.to_string(),
            other => {
                return Err(Error::invalid(
                    "config",
                    format!("unknown key {other:?} (check spelling; see README for the key list)"),
                ));
            }
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config("experiment = constants\n").unwrap();
        assert_eq!(cfg.experiment, Experiment::Constants);
        assert_eq!(cfg.alpha, 1.5);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.n_t, 64);
        assert_eq!(cfg.out_path, "out");
        cfg.validate().unwrap();
    }

    #[test]
    fn comments_blanks_and_spacing_are_tolerated() {
        let text = "\n# a comment\n  experiment=feynman_kac   # trailing\n\nseed =  7\nalpha=2.0\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.experiment, Experiment::FeynmanKac);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.alpha, 2.0);
    }

    #[test]
    fn unknown_key_is_rejected_by_name() {
        let err = parse_config("experiment = constants\nalpa = 1.5\n").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("alpa"), "message should name the key: {msg}");
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let err = parse_config("experiment = constants\nseed = 1\nseed = 2\n").unwrap_err();
        assert!(format!("{err}").contains("duplicate"), "{err}");
    }

    #[test]
    fn missing_experiment_is_rejected() {
        let err = parse_config("alpha = 1.5\n").unwrap_err();
        assert!(format!("{err}").contains("experiment"), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_config("experiment = constants\nthis is not a pair\n").unwrap_err();
        assert!(format!("{err}").contains("line 2"), "{err}");
    }

    #[test]
    fn bad_number_is_rejected_by_field() {
        let err = parse_config("experiment = constants\nalpha = fast\n").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("alpha") && msg.contains("fast"), "{msg}");
    }

    #[test]
    fn ordered_bounds_violation_names_both_fields() {
        let mut cfg = parse_config("experiment = constants\n").unwrap();
        cfg.mu = 2.0;
        cfg.nu = 1.0;
        let err = cfg.validate().unwrap_err();
        let msg = format!("{err}");
        assert!(
            msg.contains("mu") && msg.contains("nu"),
            "both field names should appear: {msg}"
        );
    }

    #[test]
    fn validation_rejects_out_of_domain_fields() {
        let base = parse_config("experiment = constants\n").unwrap();
        let cases: Vec<(&str, Box<dyn Fn(&mut ExperimentConfig)>)> = vec![
            ("alpha", Box::new(|c| c.alpha = 1.0)),
            ("alpha", Box::new(|c| c.alpha = 2.5)),
            ("mu", Box::new(|c| c.mu = 0.0)),
            ("k", Box::new(|c| c.k = -1.0)),
            ("lam", Box::new(|c| c.lam = 0.0)),
            ("n_t", Box::new(|c| c.n_t = 48)),
            ("n_x", Box::new(|c| c.n_x = 4)),
            ("len_t", Box::new(|c| c.len_t = 0.0)),
            ("n_paths", Box::new(|c| c.n_paths = 1)),
            ("dt", Box::new(|c| c.dt = 0.0)),
            ("dt", Box::new(|c| { c.dt = 4.0; c.horizon = 2.0 })),
            ("horizon", Box::new(|c| c.horizon = -1.0)),
            ("x0", Box::new(|c| c.x0 = 64.0)),
            ("out_path", Box::new(|c| c.out_path = String::new())),
        ];
        for (field, tweak) in cases {
            let mut cfg = base.clone();
            tweak(&mut cfg);
            match cfg.validate() {
                Err(Error::InvalidArgument { name, .. }) => {
                    assert_eq!(name, field, "wrong field blamed");
                }
                other => panic!("expected invalid-argument error for {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(Experiment::parse(e.name()).unwrap(), e);
        }
        assert!(Experiment::parse("nope").is_err());
    }

    #[test]
    fn echo_is_reparseable_and_canonical() {
        let cfg = parse_config("experiment = krylov_battery\nseed = 9\nalpha = 1.8\n").unwrap();
        let echoed = cfg.echo();
        let back = parse_config(&echoed).unwrap();
        assert_eq!(back.echo(), echoed);
        assert_eq!(back.seed, 9);
        assert_eq!(back.alpha, 1.8);
    }
}
