//! Batch verification runs for the Couette resolvent and stability numerics:
//! configuration, case records, criteria and report emission.

pub mod config;
pub mod emit;
pub mod error;
pub mod report;
pub mod suite;

use std::path::Path;

use config::{Config, Format};
use emit::{render, write_files};
use error::CliResult;
use report::ReportDocument;
use suite::{resolvent_case, run_report, Criterion, SuiteRun};

/// Subcommands and the verdicts each evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Airy constant and kernel accuracy.
    Airy,
    /// Operator norms of one resolvent case.
    Resolvent,
    /// Homogeneous pair cross-validation and coefficient bounds.
    Homog,
    /// Resolvent scaling sweeps over the viscosity.
    Sweep,
    /// Spectral gap and time-domain decay rates.
    Spectrum,
    /// Space-time estimate and homogeneous splitting.
    Evolve,
    /// Nonlinear stability runs and optional threshold probe.
    Threshold,
    /// Every criterion listed in the report section.
    Report,
}

impl Command {
    pub fn criteria(&self, cfg: &Config) -> Vec<Criterion> {
        use Criterion::*;
        match self {
            Command::Airy => vec![AiryConstant, AiryKernel],
            Command::Resolvent => vec![],
            Command::Homog => vec![HomogeneousPair, CoefficientBounds],
            Command::Sweep => vec![NavierSlipScaling, NonSlipScaling],
            Command::Spectrum => vec![EnhancedDissipation],
            Command::Evolve => vec![SpaceTimeEstimate, HomogeneousSplitting],
            Command::Threshold => vec![NonlinearStability],
            Command::Report => cfg.report.criteria.iter().filter_map(|k| Criterion::from_key(k)).collect(),
        }
    }
}

/// Runs a subcommand and writes its files to `out`.
pub fn execute(command: Command, cfg: &Config, out: &Path) -> CliResult<SuiteRun> {
    let formats: Vec<Format> = cfg.run.formats.clone();
    let run = if command == Command::Resolvent {
        let mut document = ReportDocument::new(suite::provenance(cfg));
        document.merge(resolvent_case(cfg)?);
        let (document, files) = render(&document, &formats)?;
        write_files(out, &files)?;
        SuiteRun { document, timings: vec![] }
    } else {
        let (run, files) = run_report(cfg, &command.criteria(cfg), &formats)?;
        write_files(out, &files)?;
        run
    };
    Ok(run)
}
