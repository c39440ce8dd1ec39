use std::path::Path;
use std::process::{Command, Output};

fn spinchaos(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinchaos"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn data_rows(path: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn dips_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = spinchaos(tmp.path(), &["dips", "--omega-m", "60", "--count", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,j1_root,hbarD_over_eps");
    assert_eq!(lines[2], "2,7.015587,9.3541");
    assert_eq!(lines.len(), 5);
}

#[test]
fn polar_state_stays_put_without_rabi_coupling() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["--rabi-hz", "0", "--out", "o", "evolve", "--init", "polar", "--duration", "0.05", "--sample-every", "0.01"];
    let out = spinchaos(tmp.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&tmp.path().join("o/trajectory.csv"));
    assert_eq!(rows.len(), 6);
    for r in &rows {
        // rho0, m, E
        assert_eq!(r[2], 1.0);
        assert_eq!(r[3], 0.0);
        assert_eq!(r[6], 0.0);
    }
}

#[test]
fn evolve_conserves_energy_and_replays() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["--out", "a", "evolve", "--init", "xC", "--duration", "0.2", "--sample-every", "0.01"];
    assert!(spinchaos(tmp.path(), &args).status.success());
    let rows = data_rows(&tmp.path().join("a/trajectory.csv"));
    let e0 = rows[0][6];
    assert!(rows.iter().all(|r| (r[6] - e0).abs() < 1e-9));

    let replay = spinchaos(tmp.path(), &["--from-manifest", "a/trajectory.csv", "--out", "b"]);
    assert!(replay.status.success(), "{}", String::from_utf8_lossy(&replay.stderr));
    assert_eq!(rows, data_rows(&tmp.path().join("b/trajectory.csv")));
}

#[test]
fn config_file_and_flags_combine() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("run.toml"), "dt = 2e-5\n[system]\nomega_rabi = 0.0\n").unwrap();
    let args = ["--config", "run.toml", "--out", "o", "evolve", "--init", "polar", "--duration", "0.01", "--sample-every", "0.01"];
    assert!(spinchaos(tmp.path(), &args).status.success());
    let text = std::fs::read_to_string(tmp.path().join("o/trajectory.csv")).unwrap();
    assert!(text.contains(r#""dt":0.00002"#), "{text}");
    assert!(text.contains(r#""omega_rabi":0.0"#));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let usage = spinchaos(tmp.path(), &["bogus"]);
    assert_eq!(usage.status.code(), Some(1));
    let help = spinchaos(tmp.path(), &["--help"]);
    assert_eq!(help.status.code(), Some(0));

    let bad_dt = spinchaos(tmp.path(), &["--dt", "1", "evolve", "--init", "xC"]);
    assert_eq!(bad_dt.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&bad_dt.stderr);
    assert!(msg.contains("dt") && msg.contains("hint:"), "{msg}");

    let bad_ic = spinchaos(tmp.path(), &["evolve", "--init", "0.9,0.5,0,0"]);
    assert_eq!(bad_ic.status.code(), Some(1));

    let huge = spinchaos(tmp.path(), &["evolve", "--init", "xC", "--duration", "1e300"]);
    assert_eq!(huge.status.code(), Some(1));

    // a step far too coarse for the field blows up the norm
    let blowup = spinchaos(tmp.path(), &["--drive-amp", "1e9", "--out", "o", "lle", "--init", "xC", "--iterations", "2"]);
    assert_eq!(blowup.status.code(), Some(2), "{}", String::from_utf8_lossy(&blowup.stderr));
}

#[test]
fn scan_estimate_and_spec() {
    let tmp = tempfile::tempdir().unwrap();
    let est = spinchaos(tmp.path(), &["scan", "fig4", "--estimate"]);
    assert!(est.status.success());
    assert!(!est.stdout.is_empty());
    let spec = spinchaos(tmp.path(), &["scan", "fig6", "--print-spec"]);
    assert!(spec.status.success());
    let text = String::from_utf8(spec.stdout).unwrap();
    let parsed: toml::Value = toml::from_str(&text).unwrap();
    assert_eq!(parsed["name"].as_str(), Some("fig6"));
    assert!(spinchaos(tmp.path(), &["scan", "nope", "--estimate"]).status.code() == Some(1));
}
