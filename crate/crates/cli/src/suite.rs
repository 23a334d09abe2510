//! Verification criteria: each runs its computations and returns records,
//! fits and one named verdict.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use couette_core::airy::{a0, airy, airy_bi, log_derivative_sup};
use couette_core::estimates::{
    fit_power_law, spectrum, verify_c_bounds, verify_navier_hm1, verify_navier_l2, verify_nonslip, verify_w12_bounds,
    CBoundSpec, DataNorm, ResolventMap, Response, SpectrumOptions, SweepReport, SweepSpec, W12Spec,
};
use couette_core::evolution::{decay_study, homogeneous_splitting, max_dt, moment_compatible_vorticity, run, EvolutionCase};
use couette_core::nonlinear::{probe_threshold, simulate, NonlinearConfig, ThresholdProbe, Verdict as RunVerdict, TAIL_TOL};
use couette_core::resolvent::{BoundaryCondition, Discretization, EllipticSolver, PairSource, ResolventCase};
use couette_core::spectral::grid_order_for;
use couette_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Config, Format, Source, SweepCase};
use crate::emit::{render, Emitted};
use crate::error::{CliError, CliResult};
use crate::report::{CaseRecord, FitSummary, Provenance, ReportDocument, Section, TimeSeries, Verdict, TOOL_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Criterion {
    AiryConstant,
    AiryKernel,
    NavierSlipScaling,
    NonSlipScaling,
    HomogeneousPair,
    CoefficientBounds,
    EnhancedDissipation,
    SpaceTimeEstimate,
    HomogeneousSplitting,
    NonlinearStability,
    Determinism,
}

impl Criterion {
    pub const ALL: [Criterion; 11] = [
        Criterion::AiryConstant,
        Criterion::AiryKernel,
        Criterion::NavierSlipScaling,
        Criterion::NonSlipScaling,
        Criterion::HomogeneousPair,
        Criterion::CoefficientBounds,
        Criterion::EnhancedDissipation,
        Criterion::SpaceTimeEstimate,
        Criterion::HomogeneousSplitting,
        Criterion::NonlinearStability,
        Criterion::Determinism,
    ];

    pub fn key(&self) -> &'static str {
        match self {
            Criterion::AiryConstant => "airy_constant",
            Criterion::AiryKernel => "airy_kernel",
            Criterion::NavierSlipScaling => "navier_slip_scaling",
            Criterion::NonSlipScaling => "non_slip_scaling",
            Criterion::HomogeneousPair => "homogeneous_pair",
            Criterion::CoefficientBounds => "coefficient_bounds",
            Criterion::EnhancedDissipation => "enhanced_dissipation",
            Criterion::SpaceTimeEstimate => "space_time_estimate",
            Criterion::HomogeneousSplitting => "homogeneous_splitting",
            Criterion::NonlinearStability => "nonlinear_stability",
            Criterion::Determinism => "determinism",
        }
    }

    pub fn number(&self) -> usize {
        Criterion::ALL.iter().position(|c| c == self).unwrap_or(0) + 1
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Criterion::ALL.iter().copied().find(|c| c.key() == key)
    }

    /// Wall-clock budget, if any.
    pub fn budget(&self) -> Option<Duration> {
        let s = match self {
            Criterion::AiryConstant => 10,
            Criterion::AiryKernel => 5,
            Criterion::NavierSlipScaling => 300,
            Criterion::NonSlipScaling => 600,
            Criterion::HomogeneousPair => 120,
            Criterion::CoefficientBounds => 180,
            Criterion::EnhancedDissipation => 600,
            Criterion::SpaceTimeEstimate => 900,
            Criterion::HomogeneousSplitting => 300,
            Criterion::NonlinearStability => 1800,
            Criterion::Determinism => return None,
        };
        Some(Duration::from_secs(s))
    }
}

/// Reference values.
pub const AIRY_CONSTANT: f64 = -0.4843;
pub const AIRY_CONSTANT_TOL: f64 = 5e-4;
pub const AI0_REFERENCE: f64 = 0.355_028_053_887_817_239_260_063_186_004;
pub const AIP0_REFERENCE: f64 = -0.258_819_403_792_806_798_405_183_560_189;
pub const RESOLUTION_STABILITY: f64 = 0.01;
pub const CROSS_TOL: f64 = 1e-6;
pub const SPLITTING_TOL: f64 = 1e-6;
pub const DECAY_NU_TOL: f64 = 0.07;
pub const DECAY_K_TOL: f64 = 0.1;
/// `(grid multiplier, time-step divisor)` refinements of the space-time runs.
pub const REFINEMENTS: [(usize, f64); 4] = [(1, 1.0), (1, 2.0), (2, 1.0), (2, 2.0)];

struct Ctx<'a> {
    cfg: &'a Config,
    prov: Provenance,
}

impl Ctx<'_> {
    fn record(&self, id: String) -> CaseRecord {
        CaseRecord::new(id, &self.prov)
    }
}

fn verdict(key: &str, pass: bool, detail: String, records: Vec<String>, fits: Vec<String>) -> Option<(String, Verdict)> {
    Some((key.to_string(), Verdict { pass, detail, records, fits }))
}

fn airy_constant(ctx: &Ctx) -> CliResult<Section> {
    let key = Criterion::AiryConstant.key();
    let mut deltas = vec![0.0];
    deltas.extend(ctx.cfg.airy.deltas.iter().copied().filter(|&d| d != 0.0));
    let mut s = Section::default();
    let mut a_zero = f64::NAN;
    for d in deltas {
        let a = log_derivative_sup(d)?;
        if d == 0.0 {
            a_zero = a;
        }
        s.records.push(ctx.record(format!("{key}/delta={d:?}")).param("delta", d).result("a", a));
    }
    let pass = (a_zero - AIRY_CONSTANT).abs() <= AIRY_CONSTANT_TOL && a_zero < -1.0 / 3.0;
    s.verdict = verdict(key, pass, format!("a(0) = {a_zero:.6}"), vec![format!("{key}/delta=0.0")], vec![]);
    Ok(s)
}

fn airy_kernel(ctx: &Ctx) -> CliResult<Section> {
    let key = Criterion::AiryKernel.key();
    let zero = Complex64::new(0.0, 0.0);
    let at0 = airy(zero)?;
    let e_ai = ((at0.ai() - AI0_REFERENCE) / AI0_REFERENCE).norm();
    let e_aip = ((at0.ai_prime() - AIP0_REFERENCE) / AIP0_REFERENCE).norm();
    let e_a0 = ((a0(zero)?.value() - 1.0 / 3.0) * 3.0).norm();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.run.seed);
    let radius = ctx.cfg.airy.wronskian_radius;
    let mut worst = 0.0_f64;
    let mut worst_raw = 0.0_f64;
    for _ in 0..ctx.cfg.airy.wronskian_points {
        let r = radius * rng.random::<f64>().sqrt();
        let theta = std::f64::consts::TAU * rng.random::<f64>();
        let z = Complex64::from_polar(r, theta);
        let a = airy(z)?;
        let (bi, bip) = airy_bi(z)?;
        let w = a.ai() * bip - a.ai_prime() * bi;
        worst_raw = worst_raw.max((w * std::f64::consts::PI - 1.0).norm());
        worst = worst.max(wronskian_defect(a.ai(), a.ai_prime(), bi, bip));
    }
    let id = format!("{key}/origin");
    let rec = ctx
        .record(id.clone())
        .param("wronskian_points", ctx.cfg.airy.wronskian_points)
        .param("wronskian_radius", radius)
        .param("seed", ctx.cfg.run.seed as f64)
        .result("ai0_rel_error", e_ai)
        .result("aip0_rel_error", e_aip)
        .result("a0_rel_error", e_a0)
        .result("wronskian_max_error", worst)
        .result("wronskian_max_abs_error", worst_raw);
    let pass = e_ai <= 1e-11 && e_aip <= 1e-11 && e_a0 <= 1e-9 && worst <= 1e-9 && worst_raw <= 1e-9;
    let detail =
        format!("Ai(0) {e_ai:.1e}, Ai'(0) {e_aip:.1e}, A0(0) {e_a0:.1e}, Wronskian {worst_raw:.1e} ({worst:.1e} scaled)");
    Ok(Section { records: vec![rec], verdict: verdict(key, pass, detail, vec![id], vec![]), ..Default::default() })
}

/// `|Ai Bi' - Ai' Bi - 1/π|` relative to the size of the two products, the
/// scale at which floating-point cancellation limits the identity.
pub fn wronskian_defect(ai: Complex64, aip: Complex64, bi: Complex64, bip: Complex64) -> f64 {
    let scale = (ai * bip).norm() + (aip * bi).norm();
    (ai * bip - aip * bi - 1.0 / std::f64::consts::PI).norm() / scale.max(1.0 / std::f64::consts::PI)
}

/// Points behind a sweep fit, recovered from the fit's name suffix.
fn sweep_points(rep: &SweepReport, name: &str, variable: &str) -> (Vec<f64>, Vec<f64>) {
    let (base, suffix) = name.split_once('@').map(|(a, b)| (a, Some(b))).unwrap_or((name, None));
    let rows = rep.rows.iter().filter(|r| r.series == base).filter(|r| match (variable, suffix) {
        ("nu", Some(s)) => s == format!("k={}", r.k),
        ("k", Some(s)) => s == format!("nu={:e}", r.nu),
        _ => true,
    });
    rows.map(|r| if variable == "nu" { (r.nu, r.value) } else { ((r.k as f64).abs(), r.value) }).unzip()
}

fn sweep_section(ctx: &Ctx, prefix: &str, rep: &SweepReport) -> Section {
    let mut s = Section::default();
    for r in &rep.rows {
        s.records.push(
            ctx.record(format!("{prefix}/{}/nu={:e}/k={}", r.series, r.nu, r.k))
                .param("nu", r.nu)
                .param("k", r.k)
                .param("N", r.order)
                .param("bc", rep.bc.label())
                .param("data", rep.data.label())
                .result("lambda_star", r.lambda)
                .result("value", r.value)
                .result("normalized", r.normalized),
        );
    }
    for c in &rep.constants {
        s.records.push(ctx.record(format!("{prefix}/constant/{}", c.name)).result("constant", c.value));
    }
    for f in &rep.fits {
        let (xs, ys) = sweep_points(rep, &f.name, &f.variable);
        s.fits.push(FitSummary::from_fit(prefix, f, xs, ys));
    }
    s
}

/// ν-fits of one series at the first wavenumber.
fn nu_fits<'a>(section: &'a Section, prefix: &str, series: &str, k: i64) -> Vec<&'a FitSummary> {
    section
        .fits
        .iter()
        .filter(|f| f.variable == "nu" && (f.name == format!("{prefix}/{series}") || f.name == format!("{prefix}/{series}@k={k}")))
        .collect()
}

fn sweep_spec(cfg: &Config, data: DataNorm, bc: BoundaryCondition) -> CliResult<SweepSpec> {
    let mut spec = SweepSpec::new(cfg.sweep.nu_values.clone(), cfg.sweep.k_values.clone(), data, bc);
    spec.resolution = cfg.sweep.resolution;
    if cfg.sweep.fit {
        spec.validate_for_fit()?;
    } else {
        spec.validate()?;
    }
    Ok(spec)
}

fn fit_verdict(key: &str, fits: &[&FitSummary], expected: usize) -> Option<(String, Verdict)> {
    let pass = fits.len() == expected && fits.iter().all(|f| f.pass);
    let detail = if fits.is_empty() {
        "no fit available".to_string()
    } else {
        fits.iter()
            .map(|f| format!("{} {:.4} (target {:.4}, r2 {:.4})", f.name, f.exponent, f.target_exponent, f.r2))
            .collect::<Vec<_>>()
            .join("; ")
    };
    verdict(key, pass, detail, vec![], fits.iter().map(|f| f.name.clone()).collect())
}

fn navier_scaling(ctx: &Ctx) -> CliResult<Section> {
    let key = Criterion::NavierSlipScaling.key();
    let mut out = Section::default();
    let k = ctx.cfg.sweep.k_values[0];
    let mut required = Vec::new();
    for case in &ctx.cfg.sweep.cases {
        match case {
            SweepCase::NavierL2 => {
                let rep = verify_navier_l2(&sweep_spec(ctx.cfg, DataNorm::L2, BoundaryCondition::NavierSlip)?)?;
                let prefix = format!("{key}/l2");
                let s = sweep_section(ctx, &prefix, &rep);
                for series in ["w_l2", "u_l2"] {
                    required.extend(nu_fits(&s, &prefix, series, k).into_iter().cloned());
                }
                merge(&mut out, s);
            }
            SweepCase::NavierHm1 => {
                let rep = verify_navier_hm1(&sweep_spec(ctx.cfg, DataNorm::Hm1, BoundaryCondition::NavierSlip)?)?;
                merge(&mut out, sweep_section(ctx, &format!("{key}/hm1"), &rep));
            }
            _ => {}
        }
    }
    let refs: Vec<&FitSummary> = required.iter().collect();
    out.verdict = fit_verdict(key, &refs, 2);
    Ok(out)
}

fn nonslip_scaling(ctx: &Ctx) -> CliResult<Section> {
    let key = Criterion::NonSlipScaling.key();
    let mut out = Section::default();
    let k = ctx.cfg.sweep.k_values[0];
    let mut required = Vec::new();
    for case in &ctx.cfg.sweep.cases {
        let (data, series, label) = match case {
            SweepCase::NonSlipL2 => (DataNorm::L2, "w_l2", "l2"),
            SweepCase::NonSlipHm1 => (DataNorm::Hm1, "u_l2", "hm1"),
            _ => continue,
        };
        let rep = verify_nonslip(&sweep_spec(ctx.cfg, data, BoundaryCondition::NonSlip)?)?;
        let prefix = format!("{key}/{label}");
        let s = sweep_section(ctx, &prefix, &rep);
        required.extend(nu_fits(&s, &prefix, series, k).into_iter().cloned());
        merge(&mut out, s);
    }
    let refs: Vec<&FitSummary> = required.iter().collect();
    out.verdict = fit_verdict(key, &refs, 2);
    Ok(out)
}

fn merge(into: &mut Section, part: Section) {
    into.records.extend(part.records);
    into.fits.extend(part.fits);
    into.series.extend(part.series);
}

fn relative_change(a: f64, b: f64) -> f64 {
    (b / a - 1.0).abs()
}

fn homogeneous_pair(ctx: &Ctx) -> CliResult<Section> {
    let key = Criterion::HomogeneousPair.key();
    let h = &ctx.cfg.homog;
    let source = match h.source {
        Source::Airy => PairSource::Airy,
        Source::Bvp => PairSource::BoundaryValueProblem,
    };
    let spec = |resolution, cross_check| W12Spec {
        nu_values: h.nu_values.clone(),
        k_values: h.k_values.clone(),
        lambdas: h.lambdas.clone(),
        epsilon: 0.0,
        resolution,
        source,
        cross_check,
    };
    let coarse = verify_w12_bounds(&spec(1, true))?;
    let fine = verify_w12_bounds(&spec(2, false))?;
    let mut s = Section::default();
    for r in &coarse.rows {
        s.records.push(
            ctx.record(format!("{key}/nu={:e}/k={}/lambda={:?}", r.nu, r.k, r.lambda))
                .param("nu", r.nu)
                .param("k", r.k)
                .param("lambda", r.lambda)
                .param("N", r.order)
                .result("l1_sum", r.l1_sum)
                .result("cross_w1", r.cross_w1.unwrap_or(0.0))
                .result("cross_w2", r.cross_w2.unwrap_or(0.0))
                .result("w1_linf_normalized", r.w1_linf_normalized)
                .result("w2_linf_normalized", r.w2_linf_normalized)
                .result("rho_half_normalized", r.rho_half_normalized)
                .result("rho_neg_quarter_normalized", r.w1_rho_neg_quarter_normalized.max(r.w2_rho_neg_quarter_normalized)),
        );
    }
    let mut constants = ctx.record(format!("{key}/constants"));
    for (label, rep) in [("coarse", &coarse), ("fine", &fine)] {
        constants = constants
            .result(&format!("l1_constant_{label}"), rep.l1_constant)
            .result(&format!("linf_constant_{label}"), rep.linf_constant)
            .result(&format!("rho_half_constant_{label}"), rep.rho_half_constant)
            .result(&format!("rho_neg_quarter_constant_{label}"), rep.rho_neg_quarter_constant);
        if let Some(c) = rep.c_ij_constant {
            constants = constants.result(&format!("c_ij_constant_{label}"), c);
        }
    }
    let cross = coarse.worst_cross.unwrap_or(f64::INFINITY);
    let drift = relative_change(coarse.l1_constant, fine.l1_constant);
    constants = constants.result("worst_cross", cross).result("l1_resolution_drift", drift);
    s.records.push(constants);
    let pass = cross <= CROSS_TOL && drift <= RESOLUTION_STABILITY;
    let detail = format!("cross {cross:.2e}, C = {:.6} (drift {drift:.2e})", coarse.l1_constant);
    s.verdict = verdict(key, pass, detail, vec![format!("{key}/constants")], vec![]);
    Ok(s)
}

fn coefficient_bounds(ctx: &Ctx) -> CliResult<Section> {
    let key = Criterion::CoefficientBounds.key();
    let h = &ctx.cfg.homog;
    let spec = |resolution| CBoundSpec {
        nu_values: h.cbound_nu_values.clone(),
        k_values: h.cbound_k_values.clone(),
        lambdas: CBoundSpec::default_lambdas(&h.cbound_k_values),
        epsilon: 0.0,
        resolution,
    };
    let coarse = verify_c_bounds(&spec(1))?;
    let fine = verify_c_bounds(&spec(2))?;
    let mut s = Section::default();
    let mut groups: BTreeMap<(i64, u64), (f64, f64, f64)> = BTreeMap::new();
    for r in &coarse.rows {
        let e = groups.entry((r.k, r.nu.to_bits())).or_insert((r.nu, 0.0, 0.0));
        e.1 = e.1.max(r.l2_normalized);
        e.2 = e.2.max(r.hm1_normalized);
    }
    for ((k, _), (nu, l2, hm1)) in groups {
        s.records.push(
            ctx.record(format!("{key}/nu={nu:e}/k={k}"))
                .param("nu", nu)
                .param("k", k)
                .result("l2_normalized_sup", l2)
                .result("hm1_normalized_sup", hm1),
        );
    }
    let d_l2 = relative_change(coarse.l2_constant, fine.l2_constant);
    let d_hm1 = relative_change(coarse.hm1_constant, fine.hm1_constant);
    s.records.push(
        ctx.record(format!("{key}/constants"))
            .result("l2_constant_coarse", coarse.l2_constant)
            .result("l2_constant_fine", fine.l2_constant)
            .result("hm1_constant_coarse", coarse.hm1_constant)
            .result("hm1_constant_fine", fine.hm1_constant)
            .result("l2_drift", d_l2)
            .result("hm1_drift", d_hm1),
    );
    let pass = d_l2 <= RESOLUTION_STABILITY && d_hm1 <= RESOLUTION_STABILITY;
    let detail = format!(
        "L2 constant {:.6} (drift {d_l2:.2e}), H-1 constant {:.6} (drift {d_hm1:.2e})",
        coarse.l2_constant, coarse.hm1_constant
    );
    s.verdict = verdict(key, pass, detail, vec![format!("{key}/constants")], vec![]);
    Ok(s)
}

fn enhanced_dissipation(ctx: &Ctx) -> CliResult<Section> {
    let key = Criterion::EnhancedDissipation.key();
    let p = &ctx.cfg.spectrum;
    let mut s = Section::default();
    let mut gaps = Vec::new();
    for &nu in &p.nu_values {
        let case = ResolventCase::new(nu, p.k, 0.0, 0.0, BoundaryCondition::NonSlip)?;
        let disc = Discretization::for_case(&case)?;
        let rep = spectrum(&case, &disc, SpectrumOptions { psi: false, pseudo_eta: None })?;
        s.records.push(
            ctx.record(format!("{key}/gap/nu={nu:e}/k={}", p.k))
                .param("nu", nu)
                .param("k", p.k)
                .param("N", disc.order())
                .param("bc", "non_slip")
                .result("gap", rep.gap),
        );
        gaps.push(rep.gap);
    }
    let span = p.nu_values.iter().copied().fold(0.0, f64::max) / p.nu_values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut fit_names = Vec::new();
    let mut pass = span.log10() >= 3.0 - 1e-9;
    let mut detail = Vec::new();
    let gap_fit = fit_power_law("gap", "nu", &p.nu_values, &gaps, 1.0 / 3.0, 0.05)?;
    pass &= gap_fit.pass;
    detail.push(format!("gap exponent {:.4}", gap_fit.exponent));
    let summary = FitSummary::from_fit(key, &gap_fit, p.nu_values.clone(), gaps);
    fit_names.push(summary.name.clone());
    s.fits.push(summary);
    for bc in [BoundaryCondition::NavierSlip, BoundaryCondition::NonSlip] {
        let study = decay_study(&p.decay_nu_values, &p.decay_k_values, bc, DECAY_NU_TOL, DECAY_K_TOL)?;
        let prefix = format!("{key}/decay/{}", bc.label());
        for &(nu, k, rate) in &study.rates {
            s.records.push(
                ctx.record(format!("{prefix}/nu={nu:e}/k={k}"))
                    .param("nu", nu)
                    .param("k", k)
                    .param("bc", bc.label())
                    .result("rate", rate),
            );
        }
        for f in &study.fits {
            let (xs, ys): (Vec<f64>, Vec<f64>) = study
                .rates
                .iter()
                .filter(|r| match f.variable.as_str() {
                    "nu" => f.name.ends_with(&format!("@k={}", r.1)),
                    _ => f.name.ends_with(&format!("@nu={:e}", r.0)),
                })
                .map(|r| if f.variable == "nu" { (r.0, r.2) } else { ((r.1 as f64).abs(), r.2) })
                .unzip();
            let summary = FitSummary::from_fit(&prefix, f, xs, ys);
            pass &= summary.pass;
            fit_names.push(summary.name.clone());
            s.fits.push(summary);
        }
        // exponent farthest from its target, per variable
        let worst = |v: &str| {
            study
                .fits
                .iter()
                .filter(|f| f.variable == v)
                .max_by(|a, b| (a.exponent - a.target_exponent).abs().total_cmp(&(b.exponent - b.target_exponent).abs()))
                .map(|f| f.exponent)
                .unwrap_or(f64::NAN)
        };
        detail.push(format!("{} decay nu-exponent {:.4}, k-exponent {:.4}", bc.label(), worst("nu"), worst("k")));
    }
    s.verdict = verdict(key, pass, detail.join("; "), vec![], fit_names);
    Ok(s)
}

fn space_time(ctx: &Ctx) -> CliResult<Section> {
    let key = Criterion::SpaceTimeEstimate.key();
    let e = &ctx.cfg.evolve;
    let mut s = Section::default();
    let mut worst_drift = 0.0_f64;
    let mut constant = 0.0_f64;
    for (&nu, &k) in e.nu_values.iter().zip(&e.k_values) {
        let kf = k as f64;
        let mut ratios = Vec::new();
        for (grid, divisor) in REFINEMENTS {
            let order = grid_order_for(nu, kf)? * grid;
            let disc = Discretization::new(order)?;
            let w0 = moment_compatible_vorticity(&disc, kf, |y| Complex64::new(1.0 + 0.5 * y, 0.3 * y * y));
            let case = EvolutionCase::new(nu, k, w0, max_dt(nu, k) / divisor, e.t_end, BoundaryCondition::NonSlip)?;
            let ledger = run(&case)?;
            s.records.push(
                ctx.record(format!("{key}/nu={nu:e}/k={k}/N={order}/dt={:?}", case.dt))
                    .param("nu", nu)
                    .param("k", k)
                    .param("N", order)
                    .param("dt", case.dt)
                    .param("t_end", e.t_end)
                    .result("prop_lhs", ledger.prop_lhs)
                    .result("data_functional", ledger.data_functional)
                    .result("ratio", ledger.prop_ratio)
                    .result("max_moment_defect", ledger.max_moment_defect),
            );
            ratios.push(ledger.prop_ratio);
        }
        let base = ratios[0];
        let drift = ratios.iter().map(|r| relative_change(base, *r)).fold(0.0, f64::max);
        worst_drift = worst_drift.max(drift);
        constant = constant.max(ratios.iter().copied().fold(0.0, f64::max));
    }
    s.records.push(ctx.record(format!("{key}/constant")).result("constant", constant).result("refinement_drift", worst_drift));
    let pass = worst_drift <= RESOLUTION_STABILITY && constant.is_finite();
    let detail = format!("constant {constant:.6}, refinement drift {worst_drift:.2e}");
    s.verdict = verdict(key, pass, detail, vec![format!("{key}/constant")], vec![]);
    Ok(s)
}

fn splitting(ctx: &Ctx) -> CliResult<Section> {
    let key = Criterion::HomogeneousSplitting.key();
    let e = &ctx.cfg.evolve;
    let (nu, k) = (e.splitting_nu, e.splitting_k);
    let disc = Discretization::new(grid_order_for(nu, k as f64)?)?;
    let w0 = moment_compatible_vorticity(&disc, k as f64, |y| Complex64::new(1.0 + 0.5 * y, 0.3 * y * y));
    let case = EvolutionCase::new(nu, k, w0, max_dt(nu, k), e.splitting_t_end, BoundaryCondition::NonSlip)?;
    let rep = homogeneous_splitting(&case)?;
    let id = format!("{key}/nu={nu:e}/k={k}");
    let rec = ctx
        .record(id.clone())
        .param("nu", nu)
        .param("k", k)
        .param("N", disc.order())
        .param("dt", case.dt)
        .param("t_end", e.splitting_t_end)
        .result("defect", rep.defect)
        .result("closed_form_defect", rep.closed_form_defect)
        .result("part1_initial", rep.initial_norms[0])
        .result("part2_initial", rep.initial_norms[1])
        .result("part3_initial", rep.initial_norms[2]);
    let pass = rep.defect <= SPLITTING_TOL;
    Ok(Section {
        records: vec![rec],
        verdict: verdict(key, pass, format!("defect {:.2e}", rep.defect), vec![id], vec![]),
        ..Default::default()
    })
}

fn nonlinear_stability(ctx: &Ctx) -> CliResult<Section> {
    let key = Criterion::NonlinearStability.key();
    let t = &ctx.cfg.threshold;
    let mut s = Section::default();
    let mut constant = 0.0_f64;
    let mut pass = true;
    let mut ids = Vec::new();
    for &nu in &t.nu_values {
        let scale = t.amplitude * nu.sqrt();
        let mut cfg = NonlinearConfig::new(nu, scale);
        cfg.k_max = t.k_max;
        cfg.t_end = Some(t.t_end_scale * cfg.t_end());
        let r = simulate(&cfg)?;
        let c = r.energy.total / scale;
        constant = constant.max(c);
        pass &= r.blow_up.is_none() && r.tail_ratio <= TAIL_TOL && c.is_finite();
        let id = format!("{key}/nu={nu:e}");
        let mut rec = ctx
            .record(id.clone())
            .param("nu", nu)
            .param("amplitude", scale)
            .param("k_max", t.k_max)
            .param("N", cfg.order()?)
            .param("dt", cfg.dt())
            .param("t_end", cfg.t_end())
            .param("verdict", r.verdict.label())
            .result("energy_total", r.energy.total)
            .result("e0", r.energy.e0)
            .result("constant", c)
            .result("tail_ratio", r.tail_ratio)
            .result("velocity_ratio", r.velocity_ratio)
            .result("blow_up", if r.blow_up.is_some() { 1.0 } else { 0.0 });
        for (i, ek) in r.energy.ek.iter().enumerate() {
            rec = rec.result(&format!("e{}", i + 1), *ek);
        }
        s.records.push(rec);
        s.series.push(TimeSeries { id: id.clone(), quantity: "energy_total".into(), points: r.monitor.clone() });
        ids.push(id);
    }
    s.records.push(ctx.record(format!("{key}/constant")).result("constant", constant));
    ids.push(format!("{key}/constant"));
    if t.probe {
        let mut spec = ThresholdProbe::new(t.probe_nu_values.clone(), t.amplitude_lo, t.amplitude_hi)?;
        spec.k_max = t.k_max;
        let probe = probe_threshold(&spec, t.t_end_scale)?;
        for (i, (nu, amp, v)) in probe.verdicts.iter().enumerate() {
            s.records.push(
                ctx.record(format!("{key}/probe/{i}"))
                    .param("nu", *nu)
                    .param("amplitude", *amp)
                    .param("verdict", v.label())
                    .result("stable", if *v == RunVerdict::Stable { 1.0 } else { 0.0 }),
            );
        }
        if let Some(f) = &probe.fitted_beta {
            let (xs, ys) = probe.thresholds.iter().copied().unzip();
            s.fits.push(FitSummary::from_fit(&format!("{key}/exploratory"), f, xs, ys));
        }
    }
    let detail = format!("C = {constant:.6}, growth factor {}", couette_core::nonlinear::GROWTH_FACTOR);
    s.verdict = verdict(key, pass, detail, ids, vec![]);
    Ok(s)
}

/// Records from a single resolvent case (no verdict).
pub fn resolvent_case(cfg: &Config) -> CliResult<Section> {
    let r = &cfg.resolvent;
    let case = ResolventCase::new(r.nu, r.k, r.lambda, r.epsilon, r.bc.into())?;
    let disc = if r.order == 0 { Discretization::for_case(&case)? } else { Discretization::new(r.order)? };
    let elliptic = EllipticSolver::new(case.kf(), &disc)?;
    let map = ResolventMap::new(&case, &disc, &elliptic)?;
    let prov = Provenance { version: TOOL_VERSION.into(), config_hash: cfg.hash() };
    let mut rec = CaseRecord::new(format!("resolvent/nu={:e}/k={}/lambda={:?}", r.nu, r.k, r.lambda), &prov)
        .param("nu", r.nu)
        .param("k", r.k)
        .param("lambda", r.lambda)
        .param("epsilon", r.epsilon)
        .param("bc", case.bc.label())
        .param("N", disc.order());
    for data in [DataNorm::L2, DataNorm::Hm1] {
        for resp in [Response::Vorticity, Response::Velocity, Response::VorticityGradient, Response::RhoHalf] {
            rec = rec.result(&format!("{}_{}", resp.label(), data.label()), map.norm(data, resp)?.value);
        }
    }
    Ok(Section { records: vec![rec], ..Default::default() })
}

fn run_criterion(c: Criterion, ctx: &Ctx) -> CliResult<Section> {
    match c {
        Criterion::AiryConstant => airy_constant(ctx),
        Criterion::AiryKernel => airy_kernel(ctx),
        Criterion::NavierSlipScaling => navier_scaling(ctx),
        Criterion::NonSlipScaling => nonslip_scaling(ctx),
        Criterion::HomogeneousPair => homogeneous_pair(ctx),
        Criterion::CoefficientBounds => coefficient_bounds(ctx),
        Criterion::EnhancedDissipation => enhanced_dissipation(ctx),
        Criterion::SpaceTimeEstimate => space_time(ctx),
        Criterion::HomogeneousSplitting => splitting(ctx),
        Criterion::NonlinearStability => nonlinear_stability(ctx),
        Criterion::Determinism => Ok(Section::default()),
    }
}

/// One pass over the criteria, merged in criterion order.
#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub document: ReportDocument,
    pub timings: Vec<(Criterion, Duration)>,
}

pub fn provenance(cfg: &Config) -> Provenance {
    Provenance { version: TOOL_VERSION.into(), config_hash: cfg.hash() }
}

/// Runs the criteria (except determinism) on a pool of `run.jobs` workers.
pub fn run_suite(cfg: &Config, criteria: &[Criterion]) -> CliResult<SuiteRun> {
    let prov = provenance(cfg);
    let ctx = Ctx { cfg, prov: prov.clone() };
    let mut list: Vec<Criterion> = criteria.iter().copied().filter(|c| *c != Criterion::Determinism).collect();
    list.sort();
    list.dedup();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.jobs)
        .build()
        .map_err(|e| CliError::Report(format!("worker pool: {e}")))?;
    let results: Vec<(Criterion, CliResult<Section>, Duration)> = pool.install(|| {
        list.par_iter()
            .map(|&c| {
                let start = Instant::now();
                let r = run_criterion(c, &ctx);
                (c, r, start.elapsed())
            })
            .collect()
    });
    let mut document = ReportDocument::new(prov);
    let mut timings = Vec::new();
    for (c, r, d) in results {
        document.merge(r.map_err(|e| CliError::Report(format!("{}: {e}", c.key())))?);
        timings.push((c, d));
    }
    document.validate()?;
    Ok(SuiteRun { document, timings })
}

/// Runs the suite; with determinism requested, runs it twice and compares
/// the rendered CSV and JSON byte for byte.
pub fn run_report(cfg: &Config, criteria: &[Criterion], formats: &[Format]) -> CliResult<(SuiteRun, Vec<Emitted>)> {
    let mut first = run_suite(cfg, criteria)?;
    if criteria.contains(&Criterion::Determinism) {
        let second = run_suite(cfg, criteria)?;
        let data_formats = [Format::Csv, Format::Json];
        let (_, a) = render(&first.document, &data_formats)?;
        let (_, b) = render(&second.document, &data_formats)?;
        let differing: Vec<String> =
            a.iter().zip(&b).filter(|(x, y)| x.bytes != y.bytes).map(|(x, _)| x.name.clone()).collect();
        let pass = differing.is_empty() && a.len() == b.len();
        let detail = if pass {
            format!("{} files byte-identical across two runs", a.len())
        } else {
            format!("differing: {}", differing.join(", "))
        };
        first.document.verdicts.insert(
            Criterion::Determinism.key().into(),
            Verdict { pass, detail, records: vec![], fits: vec![] },
        );
    }
    let (doc, files) = render(&first.document, formats)?;
    first.document = doc;
    Ok((first, files))
}
