//! Acceptance run: the full suite twice, one pass/fail line per criterion.
//!
//! Each check re-reads the emitted records and fits and applies its
//! tolerance directly, independent of the verdicts the suite computed.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Duration;

use couette_cli::config::{Config, Format};
use couette_cli::emit::render;
use couette_cli::report::{CaseRecord, FitSummary, ReportDocument, Value};
use couette_cli::suite::{run_suite, Criterion, SuiteRun};
use couette_core::airy::{a0, airy};
use couette_core::Complex64;

type Check = Result<String, String>;
/// `(N, dt, ratio)` of each refinement, keyed by `(ν, k)` bit patterns.
type Refinements = BTreeMap<(u64, u64), Vec<(f64, f64, f64)>>;

fn record<'a>(doc: &'a ReportDocument, id: &str) -> Result<&'a CaseRecord, String> {
    doc.records.iter().find(|r| r.id == id).ok_or_else(|| format!("missing record {id}"))
}

fn result(r: &CaseRecord, key: &str) -> Result<f64, String> {
    r.results.get(key).copied().ok_or_else(|| format!("{}: missing {key}", r.id))
}

fn param(r: &CaseRecord, key: &str) -> Result<f64, String> {
    match r.parameters.get(key) {
        Some(Value::Number(v)) => Ok(*v),
        _ => Err(format!("{}: missing numeric {key}", r.id)),
    }
}

fn with_prefix<'a>(doc: &'a ReportDocument, prefix: &str) -> Vec<&'a CaseRecord> {
    doc.records.iter().filter(|r| r.id.starts_with(prefix)).collect()
}

fn fit<'a>(doc: &'a ReportDocument, names: &[String]) -> Result<&'a FitSummary, String> {
    doc.fits.iter().find(|f| names.contains(&f.name)).ok_or_else(|| format!("missing fit {}", names[0]))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn decades(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    (hi / lo).log10()
}

fn exponent_within(f: &FitSummary, target: f64, tol: f64, min_r2: f64) -> Check {
    ensure((f.exponent - target).abs() <= tol && f.r2 >= min_r2, || {
        format!("{}: exponent {:.4} vs {target:.4} ± {tol}, r2 {:.4}", f.name, f.exponent, f.r2)
    })?;
    Ok(format!("{} {:.4}", f.name, f.exponent))
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

fn airy_constant(doc: &ReportDocument) -> Check {
    let a = result(record(doc, "airy_constant/delta=0.0")?, "a")?;
    ensure((a + 0.4843).abs() <= 5e-4 && a < -1.0 / 3.0, || format!("a(0) = {a}"))?;
    Ok(format!("a(0) = {a:.6}"))
}

fn airy_kernel(doc: &ReportDocument) -> Check {
    let z = Complex64::new(0.0, 0.0);
    let (ai, aip, _) = couette_oracle::airy(z);
    let at0 = airy(z).map_err(|e| e.to_string())?;
    let e_ai = rel(at0.ai(), ai);
    let e_aip = rel(at0.ai_prime(), aip);
    let e_a0 = rel(a0(z).map_err(|e| e.to_string())?.value(), couette_oracle::a0(z));
    ensure(e_ai <= 1e-11 && e_aip <= 1e-11 && e_a0 <= 1e-9, || {
        format!("origin errors {e_ai:.1e}, {e_aip:.1e}, {e_a0:.1e}")
    })?;
    let r = record(doc, "airy_kernel/origin")?;
    let points = param(r, "wronskian_points")?;
    let raw = result(r, "wronskian_max_abs_error")?;
    let scaled = result(r, "wronskian_max_error")?;
    ensure(points >= 20.0 && raw <= 1e-9 && scaled <= 1e-9, || {
        format!("Wronskian over {points} points: {raw:.1e} ({scaled:.1e} scaled)")
    })?;
    Ok(format!("origin {e_ai:.1e}/{e_aip:.1e}/{e_a0:.1e}, Wronskian {raw:.1e} at {points} points"))
}

/// Fit of `series` against ν at k = 1, under either naming.
fn nu_fit<'a>(doc: &'a ReportDocument, prefix: &str, series: &str) -> Result<&'a FitSummary, String> {
    let f = fit(doc, &[format!("{prefix}/{series}@k=1"), format!("{prefix}/{series}")])?;
    ensure(f.variable == "nu", || format!("{}: fitted against {}", f.name, f.variable))?;
    let lo = f.xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = f.xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ensure(lo <= 1e-6 * 1.0001 && hi >= 1e-3 * 0.9999, || format!("{}: ν range [{lo:e}, {hi:e}]", f.name))?;
    Ok(f)
}

fn navier_scaling(doc: &ReportDocument) -> Check {
    let w = exponent_within(nu_fit(doc, "navier_slip_scaling/l2", "w_l2")?, -1.0 / 3.0, 0.05, 0.98)?;
    let u = exponent_within(nu_fit(doc, "navier_slip_scaling/l2", "u_l2")?, -1.0 / 6.0, 0.05, 0.98)?;
    Ok(format!("{w}; {u}"))
}

fn nonslip_scaling(doc: &ReportDocument) -> Check {
    let w = exponent_within(nu_fit(doc, "non_slip_scaling/l2", "w_l2")?, -5.0 / 12.0, 0.05, 0.98)?;
    let u = exponent_within(nu_fit(doc, "non_slip_scaling/hm1", "u_l2")?, -0.5, 0.05, 0.98)?;
    Ok(format!("{w}; {u}"))
}

fn homogeneous_pair(doc: &ReportDocument) -> Check {
    let rows: Vec<_> = with_prefix(doc, "homogeneous_pair/nu=");
    let grid = |key: &str| {
        let mut v: Vec<u64> = rows.iter().filter_map(|r| param(r, key).ok()).map(f64::to_bits).collect();
        v.sort();
        v.dedup();
        v.len()
    };
    ensure(grid("nu") >= 3 && grid("k") >= 3 && grid("lambda") >= 5, || "grid smaller than 3x3x5".into())?;
    let mut cross = 0.0_f64;
    for r in &rows {
        cross = cross.max(result(r, "cross_w1")?).max(result(r, "cross_w2")?);
    }
    let c = record(doc, "homogeneous_pair/constants")?;
    let (coarse, fine) = (result(c, "l1_constant_coarse")?, result(c, "l1_constant_fine")?);
    let drift = (fine / coarse - 1.0).abs();
    ensure(cross <= 1e-6 && drift <= 0.01, || format!("cross {cross:.2e}, drift {drift:.2e}"))?;
    Ok(format!("{} cases, cross {cross:.2e}, C = {coarse:.6}, drift {drift:.2e}", rows.len()))
}

fn coefficient_bounds(doc: &ReportDocument) -> Check {
    let c = record(doc, "coefficient_bounds/constants")?;
    let mut out = Vec::new();
    for label in ["l2", "hm1"] {
        let coarse = result(c, &format!("{label}_constant_coarse"))?;
        let fine = result(c, &format!("{label}_constant_fine"))?;
        let drift = (fine / coarse - 1.0).abs();
        ensure(coarse.is_finite() && drift <= 0.01, || format!("{label}: {coarse} -> {fine}"))?;
        out.push(format!("{label} {coarse:.6} (drift {drift:.2e})"));
    }
    Ok(out.join(", "))
}

fn enhanced_dissipation(doc: &ReportDocument) -> Check {
    let gap = fit(doc, &["enhanced_dissipation/gap".to_string()])?;
    ensure(decades(&gap.xs) >= 3.0 - 1e-9, || format!("gap fit spans {:.2} decades", decades(&gap.xs)))?;
    let mut out = vec![exponent_within(gap, 1.0 / 3.0, 0.05, 0.0)?];
    for bc in ["navier_slip", "non_slip"] {
        let prefix = format!("enhanced_dissipation/decay/{bc}/");
        let fits: Vec<_> = doc.fits.iter().filter(|f| f.name.starts_with(&prefix)).collect();
        ensure(fits.iter().any(|f| f.variable == "nu") && fits.iter().any(|f| f.variable == "k"), || {
            format!("{bc}: missing decay fits")
        })?;
        for f in fits {
            let (target, tol) = if f.variable == "nu" { (1.0 / 3.0, 0.07) } else { (2.0 / 3.0, 0.1) };
            exponent_within(f, target, tol, 0.0)?;
        }
        out.push(format!("{bc} decay fits within tolerance"));
    }
    Ok(out.join("; "))
}

fn space_time(doc: &ReportDocument) -> Check {
    let mut runs = Refinements::new();
    for r in with_prefix(doc, "space_time_estimate/nu=") {
        let key = (param(r, "nu")?.to_bits(), param(r, "k")?.to_bits());
        runs.entry(key).or_default().push((param(r, "N")?, param(r, "dt")?, result(r, "ratio")?));
    }
    let nus: std::collections::BTreeSet<u64> = runs.keys().map(|k| k.0).collect();
    ensure(runs.len() >= 5 && nus.len() >= 3, || format!("{} runs over {} viscosities", runs.len(), nus.len()))?;
    let mut drift = 0.0_f64;
    let mut constant = 0.0_f64;
    for refinements in runs.values() {
        let ns: std::collections::BTreeSet<u64> = refinements.iter().map(|r| r.0.to_bits()).collect();
        let dts: std::collections::BTreeSet<u64> = refinements.iter().map(|r| r.1.to_bits()).collect();
        ensure(ns.len() == 2 && dts.len() == 2, || "each run needs N and dt halving".into())?;
        let base = refinements[0].2;
        for r in refinements {
            drift = drift.max((r.2 / base - 1.0).abs());
            constant = constant.max(r.2);
        }
    }
    let recorded = result(record(doc, "space_time_estimate/constant")?, "constant")?;
    ensure(drift <= 0.01 && constant <= recorded && constant.is_finite(), || {
        format!("drift {drift:.2e}, max ratio {constant} vs recorded {recorded}")
    })?;
    Ok(format!("{} runs, C = {recorded:.6}, drift {drift:.2e}", runs.len()))
}

fn splitting(doc: &ReportDocument) -> Check {
    let r = with_prefix(doc, "homogeneous_splitting/").into_iter().next().ok_or("missing splitting record")?;
    let defect = result(r, "defect")?;
    ensure(defect <= 1e-6, || format!("defect {defect:.2e}"))?;
    Ok(format!("defect {defect:.2e}"))
}

fn nonlinear_stability(doc: &ReportDocument) -> Check {
    let c = result(record(doc, "nonlinear_stability/constant")?, "constant")?;
    ensure(c.is_finite() && c > 0.0, || format!("C = {c}"))?;
    let mut out = Vec::new();
    for nu in [1e-3_f64, 1e-4] {
        let r = record(doc, &format!("nonlinear_stability/nu={nu:e}"))?;
        let amp = param(r, "amplitude")?;
        let total = result(r, "energy_total")?;
        ensure((amp / (0.01 * nu.sqrt()) - 1.0).abs() <= 1e-12 && param(r, "k_max")? == 8.0, || {
            format!("ν = {nu:e}: amplitude {amp}, K_max {:?}", param(r, "k_max"))
        })?;
        ensure(result(r, "blow_up")? == 0.0 && total <= c * amp * (1.0 + 1e-12), || {
            format!("ν = {nu:e}: ΣE {total} vs C·amp {}", c * amp)
        })?;
        out.push(format!("ν = {nu:e}: ΣE/amp {:.4}", total / amp));
    }
    Ok(format!("C = {c:.6}; {}", out.join(", ")))
}

fn determinism(first: &ReportDocument, second: &ReportDocument) -> Check {
    let formats = [Format::Csv, Format::Json];
    let (_, a) = render(first, &formats).map_err(|e| e.to_string())?;
    let (_, b) = render(second, &formats).map_err(|e| e.to_string())?;
    ensure(a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.name == y.name && x.bytes == y.bytes), || {
        "rendered reports differ between runs".into()
    })?;
    let bytes: usize = a.iter().map(|f| f.bytes.len()).sum();
    Ok(format!("{} files, {bytes} bytes identical", a.len()))
}

fn timing(run: &SuiteRun, c: Criterion) -> Option<Duration> {
    run.timings.iter().find(|(k, _)| *k == c).map(|(_, d)| *d)
}

fn main() -> ExitCode {
    let cfg = Config::default();
    let first = match run_suite(&cfg, &Criterion::ALL) {
        Ok(r) => r,
        Err(e) => {
            println!("suite failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    let second = match run_suite(&cfg, &Criterion::ALL) {
        Ok(r) => r,
        Err(e) => {
            println!("second suite run failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    let doc = &first.document;
    let mut failures = 0;
    for c in Criterion::ALL {
        let mut check = match c {
            Criterion::AiryConstant => airy_constant(doc),
            Criterion::AiryKernel => airy_kernel(doc),
            Criterion::NavierSlipScaling => navier_scaling(doc),
            Criterion::NonSlipScaling => nonslip_scaling(doc),
            Criterion::HomogeneousPair => homogeneous_pair(doc),
            Criterion::CoefficientBounds => coefficient_bounds(doc),
            Criterion::EnhancedDissipation => enhanced_dissipation(doc),
            Criterion::SpaceTimeEstimate => space_time(doc),
            Criterion::HomogeneousSplitting => splitting(doc),
            Criterion::NonlinearStability => nonlinear_stability(doc),
            Criterion::Determinism => determinism(doc, &second.document),
        };
        let mut clock = String::new();
        if let (Some(budget), Some(took)) = (c.budget(), timing(&first, c)) {
            clock = format!(" [{:.1} s of {} s]", took.as_secs_f64(), budget.as_secs());
            if took > budget {
                check = check.and_then(|_| Err(format!("took {:.1} s", took.as_secs_f64())));
            }
        }
        if c != Criterion::Determinism && doc.verdicts.get(c.key()).is_some_and(|v| !v.pass) {
            check = check.and_then(|_| Err("suite verdict failed".into()));
        }
        let (label, text) = match &check {
            Ok(s) => ("PASS", s),
            Err(s) => ("FAIL", s),
        };
        println!("{label} {:>2} {}: {text}{clock}", c.number(), c.key());
        failures += usize::from(check.is_err());
    }
    println!("acceptance: {} of {} criteria pass", Criterion::ALL.len() - failures, Criterion::ALL.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
