use couette_cli::config::{parse_config, Format};
use couette_cli::emit::{fit_svg, ingest_json, json, records_csv, render, write_files};
use couette_cli::report::{CaseRecord, FitSummary, Provenance, ReportDocument, Section, TimeSeries, Verdict};
use couette_cli::suite::{run_report, wronskian_defect, Criterion};
use couette_core::Complex64;

fn provenance() -> Provenance {
    Provenance { version: "0.1.0".into(), config_hash: "abc".into() }
}

fn fit(name: &str) -> FitSummary {
    FitSummary {
        name: name.into(),
        variable: "nu".into(),
        exponent: -0.33,
        intercept: 0.1,
        r2: 0.999,
        target_exponent: -1.0 / 3.0,
        tolerance: 0.05,
        pass: true,
        xs: vec![1e-3, 1e-4, 1e-5, 1e-6],
        ys: vec![10.0, 21.5, 46.4, 100.0],
    }
}

fn sample() -> ReportDocument {
    let p = provenance();
    let mut doc = ReportDocument::new(p.clone());
    doc.merge(Section {
        records: vec![
            CaseRecord::new("b", &p).param("nu", 1e-4).param("bc", "non_slip").result("value", 0.1),
            CaseRecord::new("a", &p).param("k", 2_i64).result("gap", 1.0 / 3.0),
        ],
        fits: vec![fit("sweep/w_l2")],
        series: vec![TimeSeries { id: "a".into(), quantity: "energy".into(), points: vec![(0.0, 1.0), (0.5, 0.25)] }],
        verdict: Some((
            "sweep".into(),
            Verdict { pass: true, detail: "ok".into(), records: vec!["a".into()], fits: vec!["sweep/w_l2".into()] },
        )),
    });
    doc
}

#[test]
fn empty_report_csv_is_a_header() {
    let doc = ReportDocument::new(provenance());
    let bytes = records_csv(&doc).unwrap();
    assert_eq!(String::from_utf8(bytes).unwrap(), "id,version,config_hash\n");
}

#[test]
fn records_csv_has_sorted_columns_and_blank_gaps() {
    let text = String::from_utf8(records_csv(&sample()).unwrap()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "id,version,config_hash,param:bc,param:k,param:nu,result:gap,result:value");
    assert_eq!(lines[1], "b,0.1.0,abc,non_slip,,0.0001,,0.1");
    assert_eq!(lines[2], "a,0.1.0,abc,,2.0,,0.3333333333333333,");
}

#[test]
fn json_round_trip_is_byte_identical() {
    let doc = sample();
    let first = json(&doc).unwrap();
    let back = ingest_json(&first).unwrap();
    assert_eq!(back, doc);
    assert_eq!(json(&back).unwrap(), first);
}

#[test]
fn svg_has_one_reference_line_per_target() {
    for targets in [vec![], vec![-1.0 / 3.0], vec![-1.0 / 3.0, -0.5, -5.0 / 12.0]] {
        let svg = fit_svg(&fit("f"), &targets);
        assert_eq!(svg.matches("class=\"reference\"").count(), targets.len());
        assert_eq!(svg.matches("class=\"fit\"").count(), 1);
        assert_eq!(svg.matches("class=\"point\"").count(), 4);
    }
}

#[test]
fn validation_rejects_duplicates_nonfinite_and_dangling_references() {
    assert!(sample().validate().is_ok());
    let mut dup = sample();
    dup.records.push(dup.records[0].clone());
    assert!(dup.validate().is_err());
    let mut nan = sample();
    nan.records[0].results.insert("value".into(), f64::NAN);
    assert!(nan.validate().is_err());
    let mut dangling = sample();
    dangling.verdicts.get_mut("sweep").unwrap().fits.push("missing".into());
    assert!(dangling.validate().is_err());
}

#[test]
fn render_lists_every_emitted_file() {
    let (doc, files) = render(&sample(), &[Format::Svg, Format::Json, Format::Csv]).unwrap();
    let names: Vec<&str> = files.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(names, doc.emitted_files.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(names.contains(&"fit_sweep_w_l2.svg"));
    assert_eq!(names.last(), Some(&"report.json"));
    let dir = tempfile::tempdir().unwrap();
    write_files(dir.path(), &files).unwrap();
    let written = std::fs::read(dir.path().join("report.json")).unwrap();
    assert_eq!(ingest_json(&written).unwrap().emitted_files, doc.emitted_files);
}

#[test]
fn airy_criteria_are_reproducible_and_pass() {
    let cfg = parse_config("[run]\nseed = 7\n").unwrap();
    let criteria = [Criterion::AiryConstant, Criterion::AiryKernel, Criterion::Determinism];
    let (run, files) = run_report(&cfg, &criteria, &[Format::Csv, Format::Json]).unwrap();
    assert_eq!(run.document.verdicts.len(), 3);
    assert!(run.document.all_pass(), "{:?}", run.document.verdicts);
    let (again, files2) = run_report(&cfg, &criteria, &[Format::Csv, Format::Json]).unwrap();
    assert_eq!(files, files2);
    assert_eq!(again.document.provenance.config_hash, cfg.hash());
}

#[test]
fn wronskian_defect_is_scale_relative() {
    let pi = std::f64::consts::PI;
    let zero = Complex64::new(0.0, 0.0);
    let big = Complex64::new(1e7, 0.0);
    assert!(wronskian_defect(big, zero, zero, 1.0 / (pi * big)) < 1e-15);
    let off = wronskian_defect(big, zero, zero, (1.0 / pi + 1e-3) / big);
    assert!((off - 1e-3 / (1.0 / pi + 1e-3)).abs() < 1e-12);
    // cancelling products set the scale
    let huge = wronskian_defect(big, big, big, big + 1.0 / (pi * big));
    assert!(huge < 1e-14, "{huge}");
}
