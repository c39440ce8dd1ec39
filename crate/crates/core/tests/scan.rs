use std::path::Path;

use spinchaos::coverage::HistogramSpec;
use spinchaos::ensemble::RandomizationConfig;
use spinchaos::lyapunov::LleConfig;
use spinchaos::scan::{run_scan, Diagnostics, IcSource, ScanOptions, ScanSpec};

fn small_spec() -> ScanSpec {
    ScanSpec {
        name: "small".into(),
        amplitudes: vec![0.5, 2.2],
        ics: IcSource::Haar { count: 20 },
        diagnostics: Diagnostics { lle: true, coverage: true, ..Default::default() },
        lle: LleConfig { iterations: 4, ..LleConfig::default() },
        histogram: HistogramSpec { samples: 150, ..HistogramSpec::default() },
        ..ScanSpec::default()
    }
}

fn rand_spec() -> ScanSpec {
    ScanSpec {
        name: "small-rand".into(),
        amplitudes: vec![2.2],
        ics: IcSource::Points { points: vec!["xR".into(), "xC".into()] },
        diagnostics: Diagnostics { randomization: true, ..Default::default() },
        randomization: RandomizationConfig { n_ens: 300, t_final_tau: 1.0, ..RandomizationConfig::default() },
        ..ScanSpec::default()
    }
}

fn body(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn tables_do_not_depend_on_thread_count() {
    for spec in [small_spec(), rand_spec()] {
        let mut tables = Vec::new();
        for threads in [1, 4] {
            let dir = tempfile::tempdir().unwrap();
            let opts = ScanOptions { out_dir: Some(dir.path().to_path_buf()), threads: Some(threads), ..Default::default() };
            let report = run_scan(&spec, &opts).unwrap();
            assert!(report.failures.is_empty());
            let files: Vec<String> = ["lle.csv", "coverage.csv", "randomization.csv", "delta2.csv"]
                .iter()
                .map(|f| dir.path().join(f))
                .filter(|p| p.exists())
                .map(|p| body(&p))
                .collect();
            assert!(!files.is_empty());
            tables.push(files);
        }
        assert_eq!(tables[0], tables[1], "{}", spec.name);
    }
}

#[test]
fn interrupted_scan_resumes_to_the_same_table() {
    let spec = small_spec();
    let whole = tempfile::tempdir().unwrap();
    run_scan(&spec, &ScanOptions { out_dir: Some(whole.path().to_path_buf()), ..Default::default() }).unwrap();

    let parts = tempfile::tempdir().unwrap();
    let opts = ScanOptions { out_dir: Some(parts.path().to_path_buf()), max_tasks: Some(1), ..Default::default() };
    let first = run_scan(&spec, &opts).unwrap();
    assert!(first.incomplete);
    assert!(!parts.path().join("lle.csv").exists());
    // a torn record from an interrupted write is ignored
    let partial = std::fs::read_dir(parts.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_string_lossy().starts_with(".partial-"))
        .expect("partial results kept");
    let mut f = std::fs::OpenOptions::new().append(true).open(&partial).unwrap();
    std::io::Write::write_all(&mut f, b"{\"t\":\"lle\",\"point\":1,").unwrap();

    let resumed = run_scan(&spec, &ScanOptions { resume: true, ..opts.clone().with_max(None) }).unwrap();
    assert_eq!(resumed.resumed, 16);
    assert!(!resumed.incomplete);
    for f in ["lle.csv", "coverage.csv"] {
        assert_eq!(body(&whole.path().join(f)), body(&parts.path().join(f)), "{f}");
    }
    assert!(!partial.exists());
}

trait WithMax {
    fn with_max(self, m: Option<usize>) -> Self;
}

impl WithMax for ScanOptions {
    fn with_max(mut self, m: Option<usize>) -> Self {
        self.max_tasks = m;
        self
    }
}

#[test]
fn a_point_reproduces_in_isolation() {
    let spec = small_spec();
    let full = run_scan(&spec, &ScanOptions::default()).unwrap();
    let only = ScanSpec { amplitudes: vec![2.2], ..spec.clone() };
    let alone = run_scan(&only, &ScanOptions::default()).unwrap();
    let strip = |r: &spinchaos::scan::LleRow| (r.ic, r.initial, r.lambda, r.stderr, r.coverage);
    let in_grid: Vec<_> = full.lle_at(1).map(strip).collect();
    let isolated: Vec<_> = alone.lle_at(0).map(strip).collect();
    assert_eq!(in_grid.len(), 20);
    assert_eq!(in_grid, isolated);
}

#[test]
fn manifest_lists_outputs_and_spec_hash() {
    let dir = tempfile::tempdir().unwrap();
    let spec = rand_spec();
    run_scan(&spec, &ScanOptions { out_dir: Some(dir.path().to_path_buf()), ..Default::default() }).unwrap();
    let m: serde_json::Value = serde_json::from_str(&body(&dir.path().join("manifest.json"))).unwrap();
    assert_eq!(m["spec_sha256"], spec.hash());
    let outs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(outs.contains(&"randomization.csv") && outs.contains(&"randomization.json"));
    let back: ScanSpec = serde_json::from_value(m["spec"].clone()).unwrap();
    assert_eq!(back, spec);
    let h = spinchaos::output::read_header(&dir.path().join("randomization.csv")).unwrap();
    assert_eq!(h.get("seed"), Some(spec.seed.to_string().as_str()));
}
