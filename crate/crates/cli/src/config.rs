//! Run configuration: TOML with one level of sections, every key optional,
//! unknown keys rejected.

use couette_core::resolvent::BoundaryCondition;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// A configuration problem with its key path and line (1-based) when known.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}{}: {message}", path, line.map(|l| format!(" (line {l})")).unwrap_or_default())]
pub struct ConfigError {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bc {
    NavierSlip,
    NonSlip,
}

impl From<Bc> for BoundaryCondition {
    fn from(b: Bc) -> Self {
        match b {
            Bc::NavierSlip => BoundaryCondition::NavierSlip,
            Bc::NonSlip => BoundaryCondition::NonSlip,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepCase {
    NavierL2,
    NavierHm1,
    NonSlipL2,
    NonSlipHm1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Airy,
    Bvp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub jobs: usize,
    pub seed: u64,
    pub formats: Vec<Format>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { jobs: 1, seed: 1, formats: vec![Format::Csv, Format::Json, Format::Svg] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AirySection {
    /// Extra band heights for `a(δ)`; `δ = 0` is always evaluated.
    pub deltas: Vec<f64>,
    pub wronskian_points: usize,
    pub wronskian_radius: f64,
}

impl Default for AirySection {
    fn default() -> Self {
        Self { deltas: vec![0.15, 0.2], wronskian_points: 20, wronskian_radius: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolventSection {
    pub nu: f64,
    pub k: i64,
    pub lambda: f64,
    pub epsilon: f64,
    pub bc: Bc,
    /// Grid order; 0 selects the resolution rule.
    pub order: usize,
}

impl Default for ResolventSection {
    fn default() -> Self {
        Self { nu: 1e-4, k: 1, lambda: 0.0, epsilon: 0.0, bc: Bc::NonSlip, order: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub cases: Vec<SweepCase>,
    pub nu_values: Vec<f64>,
    pub k_values: Vec<i64>,
    pub resolution: usize,
    pub fit: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            cases: vec![SweepCase::NavierL2, SweepCase::NonSlipL2, SweepCase::NonSlipHm1],
            nu_values: vec![1e-3, 1e-4, 1e-5, 1e-6],
            k_values: vec![1],
            resolution: 1,
            fit: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomogSection {
    pub nu_values: Vec<f64>,
    pub k_values: Vec<i64>,
    pub lambdas: Vec<f64>,
    pub source: Source,
    pub cbound_nu_values: Vec<f64>,
    pub cbound_k_values: Vec<i64>,
}

impl Default for HomogSection {
    fn default() -> Self {
        Self {
            nu_values: vec![1e-3, 1e-4, 1e-5],
            k_values: vec![1, 2, 10],
            lambdas: vec![-0.9, -0.5, 0.0, 0.5, 0.9],
            source: Source::Airy,
            cbound_nu_values: vec![1e-3, 1e-4, 1e-5],
            cbound_k_values: vec![1, 2, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub nu_values: Vec<f64>,
    pub k: i64,
    pub decay_nu_values: Vec<f64>,
    pub decay_k_values: Vec<i64>,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            nu_values: vec![1e-3, 1e-4, 1e-5, 1e-6],
            k: 1,
            decay_nu_values: vec![1e-3, 1e-4, 1e-5],
            decay_k_values: vec![1, 2, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSection {
    /// Paired with `k_values` entry by entry.
    pub nu_values: Vec<f64>,
    pub k_values: Vec<i64>,
    pub t_end: f64,
    pub splitting_nu: f64,
    pub splitting_k: i64,
    pub splitting_t_end: f64,
}

impl Default for EvolveSection {
    fn default() -> Self {
        Self {
            nu_values: vec![1e-3, 1e-4, 1e-5, 1e-3, 1e-4],
            k_values: vec![1, 1, 1, 2, 2],
            t_end: 10.0,
            splitting_nu: 1e-3,
            splitting_k: 2,
            splitting_t_end: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSection {
    pub nu_values: Vec<f64>,
    /// `‖u₀‖_{H²}` in units of `ν^{1/2}`.
    pub amplitude: f64,
    pub k_max: usize,
    /// Multiplies the horizon `20 ν^{-1/3}`.
    pub t_end_scale: f64,
    /// Also bisect for the threshold amplitude.
    pub probe: bool,
    pub probe_nu_values: Vec<f64>,
    pub amplitude_lo: f64,
    pub amplitude_hi: f64,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        Self {
            nu_values: vec![1e-3, 1e-4],
            amplitude: 0.01,
            k_max: 8,
            t_end_scale: 1.0,
            probe: false,
            probe_nu_values: vec![1e-2, 1e-3, 1e-4, 1e-5],
            amplitude_lo: 0.01,
            amplitude_hi: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Verdict keys to evaluate.
    pub criteria: Vec<String>,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self { criteria: crate::suite::Criterion::ALL.iter().map(|c| c.key().to_string()).collect() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub run: RunSection,
    pub airy: AirySection,
    pub resolvent: ResolventSection,
    pub sweep: SweepSection,
    pub homog: HomogSection,
    pub spectrum: SpectrumSection,
    pub evolve: EvolveSection,
    pub threshold: ThresholdSection,
    pub report: ReportSection,
}

/// Line of `byte` in `text`, 1-based.
fn line_of(text: &str, byte: usize) -> usize {
    text[..byte.min(text.len())].matches('\n').count() + 1
}

/// `section.key` for the line holding `byte`.
fn path_at(text: &str, byte: usize) -> String {
    let line = line_of(text, byte);
    let mut section = String::new();
    let mut key = String::new();
    for (i, l) in text.lines().enumerate() {
        if i + 1 > line {
            break;
        }
        let t = l.trim();
        if t.starts_with('[') {
            section = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = t.split_once('=') {
            key = k.trim().to_string();
        }
    }
    match (section.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => section,
        (false, false) => format!("{section}.{key}"),
    }
}

/// Line holding `key` inside `[section]`, if written.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, l) in text.lines().enumerate() {
        let t = l.trim();
        if t.starts_with('[') {
            current = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
        } else if current == section && t.split_once('=').map(|(k, _)| k.trim() == key).unwrap_or(false) {
            return Some(i + 1);
        }
    }
    None
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let config: Config = toml::from_str(text).map_err(|e| {
        let (path, line) = match e.span() {
            Some(span) => (path_at(text, span.start), Some(line_of(text, span.start))),
            None => (String::new(), None),
        };
        ConfigError { path, line, message: e.message().trim().to_string() }
    })?;
    config.validate().map_err(|(section, key, message)| ConfigError {
        path: format!("{section}.{key}"),
        line: locate(text, section, key),
        message,
    })?;
    Ok(config)
}

type Violation = (&'static str, &'static str, String);

fn positive(section: &'static str, key: &'static str, values: &[f64]) -> Result<(), Violation> {
    if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        let name = if key.contains("nu") { "nu" } else { key };
        return Err((section, key, format!("{name} must be positive")));
    }
    Ok(())
}

fn nonempty<T>(section: &'static str, key: &'static str, values: &[T]) -> Result<(), Violation> {
    if values.is_empty() {
        return Err((section, key, "list must not be empty".into()));
    }
    Ok(())
}

fn wavenumbers(section: &'static str, key: &'static str, values: &[i64]) -> Result<(), Violation> {
    nonempty(section, key, values)?;
    if values.contains(&0) {
        return Err((section, key, "|k| must be at least 1".into()));
    }
    Ok(())
}

fn decades(values: &[f64]) -> f64 {
    let (lo, hi) = values.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &v| (a.min(v), b.max(v)));
    (hi / lo).log10()
}

impl Config {
    fn validate(&self) -> Result<(), Violation> {
        if self.run.jobs == 0 {
            return Err(("run", "jobs", "jobs must be at least 1".into()));
        }
        let a = &self.airy;
        if a.deltas.iter().any(|d| !(0.0..=couette_core::airy::DELTA_0).contains(d)) {
            return Err(("airy", "deltas", format!("delta must lie in [0, {}]", couette_core::airy::DELTA_0)));
        }
        if a.wronskian_points == 0 {
            return Err(("airy", "wronskian_points", "need at least one point".into()));
        }
        positive("airy", "wronskian_radius", &[a.wronskian_radius])?;

        let r = &self.resolvent;
        positive("resolvent", "nu", &[r.nu])?;
        wavenumbers("resolvent", "k", &[r.k])?;
        if !r.lambda.is_finite() {
            return Err(("resolvent", "lambda", "lambda must be finite".into()));
        }
        if !(r.epsilon >= 0.0) {
            return Err(("resolvent", "epsilon", "epsilon must be nonnegative".into()));
        }
        if r.order != 0 && r.order < 4 {
            return Err(("resolvent", "order", "order must be 0 (automatic) or at least 4".into()));
        }

        let s = &self.sweep;
        nonempty("sweep", "cases", &s.cases)?;
        nonempty("sweep", "nu_values", &s.nu_values)?;
        positive("sweep", "nu_values", &s.nu_values)?;
        wavenumbers("sweep", "k_values", &s.k_values)?;
        if s.resolution == 0 {
            return Err(("sweep", "resolution", "resolution must be at least 1".into()));
        }
        if s.fit && decades(&s.nu_values) < 2.0 - 1e-9 {
            return Err(("sweep", "nu_values", "exponent fit requires ≥ 2 decades".into()));
        }

        let h = &self.homog;
        nonempty("homog", "nu_values", &h.nu_values)?;
        positive("homog", "nu_values", &h.nu_values)?;
        wavenumbers("homog", "k_values", &h.k_values)?;
        nonempty("homog", "lambdas", &h.lambdas)?;
        nonempty("homog", "cbound_nu_values", &h.cbound_nu_values)?;
        positive("homog", "cbound_nu_values", &h.cbound_nu_values)?;
        wavenumbers("homog", "cbound_k_values", &h.cbound_k_values)?;

        let p = &self.spectrum;
        nonempty("spectrum", "nu_values", &p.nu_values)?;
        positive("spectrum", "nu_values", &p.nu_values)?;
        wavenumbers("spectrum", "k", &[p.k])?;
        nonempty("spectrum", "decay_nu_values", &p.decay_nu_values)?;
        positive("spectrum", "decay_nu_values", &p.decay_nu_values)?;
        wavenumbers("spectrum", "decay_k_values", &p.decay_k_values)?;

        let e = &self.evolve;
        nonempty("evolve", "nu_values", &e.nu_values)?;
        positive("evolve", "nu_values", &e.nu_values)?;
        wavenumbers("evolve", "k_values", &e.k_values)?;
        if e.nu_values.len() != e.k_values.len() {
            return Err(("evolve", "k_values", "k_values must pair with nu_values entry by entry".into()));
        }
        positive("evolve", "t_end", &[e.t_end])?;
        positive("evolve", "splitting_nu", &[e.splitting_nu])?;
        wavenumbers("evolve", "splitting_k", &[e.splitting_k])?;
        positive("evolve", "splitting_t_end", &[e.splitting_t_end])?;

        let t = &self.threshold;
        nonempty("threshold", "nu_values", &t.nu_values)?;
        positive("threshold", "nu_values", &t.nu_values)?;
        positive("threshold", "amplitude", &[t.amplitude])?;
        if t.k_max < 2 {
            return Err(("threshold", "k_max", "k_max must be at least 2".into()));
        }
        positive("threshold", "t_end_scale", &[t.t_end_scale])?;
        positive("threshold", "probe_nu_values", &t.probe_nu_values)?;
        positive("threshold", "amplitude_lo", &[t.amplitude_lo])?;
        if !(t.amplitude_hi > t.amplitude_lo) {
            return Err(("threshold", "amplitude_hi", "amplitude_hi must exceed amplitude_lo".into()));
        }

        for c in &self.report.criteria {
            if crate::suite::Criterion::from_key(c).is_none() {
                return Err(("report", "criteria", format!("unknown criterion {c}")));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical form, ignoring pool size and output formats.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.run.jobs = 1;
        canonical.run.formats.clear();
        let text = toml::to_string(&canonical).unwrap_or_default();
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_takes_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.hash(), Config::default().hash());
    }

    #[test]
    fn negative_viscosity_is_rejected_with_location() {
        let e = parse_config("[resolvent]\nk = 2\nnu = -1\n").unwrap_err();
        assert_eq!(e.path, "resolvent.nu");
        assert_eq!(e.line, Some(3));
        assert_eq!(e.message, "nu must be positive");
    }

    #[test]
    fn single_viscosity_fit_is_rejected() {
        let e = parse_config("[sweep]\nnu_values = [1e-4]\n").unwrap_err();
        assert_eq!(e.message, "exponent fit requires ≥ 2 decades");
        assert_eq!(e.line, Some(2));
        assert!(parse_config("[sweep]\nnu_values = [1e-4]\nfit = false\n").is_ok());
    }

    #[test]
    fn unknown_keys_and_type_errors_carry_paths() {
        let e = parse_config("[airy]\n\nbogus = 1\n").unwrap_err();
        assert_eq!(e.path, "airy.bogus");
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("unknown field"), "{}", e.message);
        let e = parse_config("[evolve]\nt_end = \"long\"\n").unwrap_err();
        assert_eq!((e.path.as_str(), e.line), ("evolve.t_end", Some(2)));
        let e = parse_config("[nonsense]\n").unwrap_err();
        assert_eq!(e.line, Some(1));
    }

    #[test]
    fn pool_size_does_not_change_the_hash() {
        let a = parse_config("[run]\njobs = 4\n").unwrap();
        let b = parse_config("[run]\nseed = 9\n").unwrap();
        assert_eq!(a.hash(), Config::default().hash());
        assert_ne!(b.hash(), Config::default().hash());
    }

    #[test]
    fn evolve_lists_must_pair() {
        let e = parse_config("[evolve]\nnu_values = [1e-3]\nk_values = [1, 2]\n").unwrap_err();
        assert_eq!(e.path, "evolve.k_values");
    }
}
