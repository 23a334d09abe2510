//! CSV, JSON and SVG renderings of a report.

use std::collections::BTreeSet;
use std::path::Path;

use crate::config::Format;
use crate::error::{CliError, CliResult};
use crate::report::{FitSummary, ReportDocument, Value};

/// One rendered output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emitted {
    pub name: String,
    pub bytes: Vec<u8>,
}

fn number(v: f64) -> String {
    format!("{v:?}")
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| CliError::Report(format!("csv buffer: {e}")))
}

/// Records with one column per parameter and result key, in sorted order.
pub fn records_csv(report: &ReportDocument) -> CliResult<Vec<u8>> {
    let params: BTreeSet<&str> = report.records.iter().flat_map(|r| r.parameters.keys().map(String::as_str)).collect();
    let results: BTreeSet<&str> = report.records.iter().flat_map(|r| r.results.keys().map(String::as_str)).collect();
    let mut header = vec!["id".to_string(), "version".to_string(), "config_hash".to_string()];
    header.extend(params.iter().map(|p| format!("param:{p}")));
    header.extend(results.iter().map(|p| format!("result:{p}")));
    let rows: Vec<Vec<String>> = report
        .records
        .iter()
        .map(|r| {
            let mut row = vec![r.id.clone(), r.provenance.version.clone(), r.provenance.config_hash.clone()];
            row.extend(params.iter().map(|p| r.parameters.get(*p).map(Value::to_string).unwrap_or_default()));
            row.extend(results.iter().map(|p| r.results.get(*p).map(|v| number(*v)).unwrap_or_default()));
            row
        })
        .collect();
    csv_bytes(&header, &rows)
}

pub fn fits_csv(report: &ReportDocument) -> CliResult<Vec<u8>> {
    let header: Vec<String> = ["name", "variable", "exponent", "intercept", "r2", "target_exponent", "tolerance", "pass", "points"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = report
        .fits
        .iter()
        .map(|f| {
            vec![
                f.name.clone(),
                f.variable.clone(),
                number(f.exponent),
                number(f.intercept),
                number(f.r2),
                number(f.target_exponent),
                number(f.tolerance),
                f.pass.to_string(),
                f.xs.len().to_string(),
            ]
        })
        .collect();
    csv_bytes(&header, &rows)
}

pub fn verdicts_csv(report: &ReportDocument) -> CliResult<Vec<u8>> {
    let header: Vec<String> = ["criterion", "pass", "detail"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> =
        report.verdicts.iter().map(|(k, v)| vec![k.clone(), v.pass.to_string(), v.detail.clone()]).collect();
    csv_bytes(&header, &rows)
}

pub fn series_csv(report: &ReportDocument) -> CliResult<Vec<u8>> {
    let header: Vec<String> = ["id", "quantity", "t", "value"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = report
        .series
        .iter()
        .flat_map(|s| s.points.iter().map(move |(t, v)| vec![s.id.clone(), s.quantity.clone(), number(*t), number(*v)]))
        .collect();
    csv_bytes(&header, &rows)
}

pub fn json(report: &ReportDocument) -> CliResult<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text.into_bytes())
}

/// Reads a JSON report back.
pub fn ingest_json(bytes: &[u8]) -> CliResult<ReportDocument> {
    Ok(serde_json::from_slice(bytes)?)
}

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 50.0;

/// Log-log plot of the fitted points with the fitted line and one
/// reference line per target exponent, anchored at the data centroid.
pub fn fit_svg(fit: &FitSummary, targets: &[f64]) -> String {
    let lx: Vec<f64> = fit.xs.iter().map(|x| x.log10()).collect();
    let ly: Vec<f64> = fit.ys.iter().map(|y| y.log10()).collect();
    let bounds = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() && hi > lo {
            (lo - 0.1 * (hi - lo), hi + 0.1 * (hi - lo))
        } else if lo.is_finite() {
            (lo - 0.5, lo + 0.5)
        } else {
            (0.0, 1.0)
        }
    };
    let (x0, x1) = bounds(&lx);
    let (y0, y1) = bounds(&ly);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    s.push_str(&format!("<title>{}</title>\n", escape(&fit.name)));
    s.push_str(&format!(
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">log10 {}</text>\n",
        WIDTH / 2.0,
        HEIGHT - 15.0,
        escape(&fit.variable)
    ));
    s.push_str(&format!(
        "<text x=\"{MARGIN}\" y=\"30\" font-size=\"12\">{}: slope {:.4} (target {:.4}), r2 {:.4}</text>\n",
        escape(&fit.name),
        fit.exponent,
        fit.target_exponent,
        fit.r2
    ));
    let line = |class: &str, slope: f64, intercept: f64, style: &str| {
        format!(
            "<line class=\"{class}\" x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" {style}/>\n",
            px(x0),
            py(intercept + slope * x0),
            px(x1),
            py(intercept + slope * x1)
        )
    };
    let ln10 = std::f64::consts::LN_10;
    s.push_str(&line("fit", fit.exponent, fit.intercept / ln10, "stroke=\"steelblue\" stroke-width=\"1.5\""));
    let n = lx.len().max(1) as f64;
    let (cx, cy) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    for &t in targets {
        s.push_str(&line("reference", t, cy - t * cx, "stroke=\"gray\" stroke-dasharray=\"6 4\""));
    }
    for (x, y) in lx.iter().zip(&ly) {
        s.push_str(&format!("<circle class=\"point\" cx=\"{:.3}\" cy=\"{:.3}\" r=\"3\" fill=\"black\"/>\n", px(*x), py(*y)));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

/// Renders every requested format; the returned document lists the files.
pub fn render(report: &ReportDocument, formats: &[Format]) -> CliResult<(ReportDocument, Vec<Emitted>)> {
    report.validate()?;
    let formats: BTreeSet<Format> = formats.iter().copied().collect();
    let mut doc = report.clone();
    let mut names = Vec::new();
    if formats.contains(&Format::Csv) {
        names.extend(["records.csv", "fits.csv", "verdicts.csv", "series.csv"].map(String::from));
    }
    let svgs: Vec<(String, String)> = if formats.contains(&Format::Svg) {
        doc.fits.iter().map(|f| (format!("fit_{}.svg", file_stem(&f.name)), fit_svg(f, &[f.target_exponent]))).collect()
    } else {
        Vec::new()
    };
    names.extend(svgs.iter().map(|s| s.0.clone()));
    if formats.contains(&Format::Json) {
        names.push("report.json".into());
    }
    doc.emitted_files = names;
    let mut files = Vec::new();
    if formats.contains(&Format::Csv) {
        files.push(Emitted { name: "records.csv".into(), bytes: records_csv(&doc)? });
        files.push(Emitted { name: "fits.csv".into(), bytes: fits_csv(&doc)? });
        files.push(Emitted { name: "verdicts.csv".into(), bytes: verdicts_csv(&doc)? });
        files.push(Emitted { name: "series.csv".into(), bytes: series_csv(&doc)? });
    }
    files.extend(svgs.into_iter().map(|(name, text)| Emitted { name, bytes: text.into_bytes() }));
    if formats.contains(&Format::Json) {
        files.push(Emitted { name: "report.json".into(), bytes: json(&doc)? });
    }
    Ok((doc, files))
}

pub fn write_files(dir: &Path, files: &[Emitted]) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io { context: format!("creating {}", dir.display()), source })?;
    for f in files {
        let path = dir.join(&f.name);
        std::fs::write(&path, &f.bytes).map_err(|source| CliError::Io { context: format!("writing {}", path.display()), source })?;
    }
    Ok(())
}
