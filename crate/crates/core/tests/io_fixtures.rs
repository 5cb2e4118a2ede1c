use std::path::{Path, PathBuf};

use matround_core::io::driver::{run_driver, Driver};
use matround_core::io::instance::parse_instance;
use matround_core::io::report::{emit_report, ReportFormat, CSV_COLUMNS};
use matround_core::walk::WalkConfig;

fn fixtures() -> Vec<(Driver, PathBuf)> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut out = Vec::new();
    for entry in std::fs::read_dir(root).unwrap() {
        let dir = entry.unwrap().path();
        let driver: Driver = dir.file_name().unwrap().to_str().unwrap().parse().unwrap();
        for f in std::fs::read_dir(&dir).unwrap() {
            out.push((driver, f.unwrap().path()));
        }
    }
    out.sort_by(|a, b| a.1.cmp(&b.1));
    out
}

#[test]
fn three_fixtures_per_driver() {
    let all = fixtures();
    for d in [Driver::Round, Driver::RoundMatroid, Driver::Degmat, Driver::Multicrit, Driver::Rsp, Driver::LaminarRsp] {
        assert_eq!(all.iter().filter(|(x, _)| *x == d).count(), 3, "{d}");
    }
}

#[test]
fn parse_emit_parse_is_idempotent() {
    for (_, path) in fixtures() {
        let once = parse_instance(&std::fs::read(&path).unwrap()).unwrap();
        let twice = parse_instance(once.to_json().as_bytes()).unwrap();
        assert_eq!(once, twice, "{}", path.display());
        assert_eq!(once.to_json(), twice.to_json());
    }
}

#[test]
fn every_fixture_runs_and_reports_each_constraint() {
    let cfg = WalkConfig::practical();
    for (driver, path) in fixtures() {
        let inst = parse_instance(&std::fs::read(&path).unwrap()).unwrap();
        let report = run_driver(driver, &inst, &cfg, 1).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let csv = emit_report(&report, ReportFormat::Csv);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        assert_eq!(lines.count(), report.rows.len());
        assert!(report.rows.iter().all(|r| r.ratio().is_finite()));
        let again = run_driver(driver, &inst, &cfg, 1).unwrap();
        assert_eq!(emit_report(&again, ReportFormat::Table), emit_report(&report, ReportFormat::Table));
    }
}
