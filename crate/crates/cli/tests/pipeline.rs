use std::process::Command;

use lgvortex_cli::{emit_plot_data, parse_config, run, PlotData, RunConfig, RunError, Stage};

fn config(n: i64, m_xy: usize, pipeline: &[Stage], dir: &std::path::Path) -> RunConfig {
    let mut c = RunConfig::new(n, 1.0, 1.0);
    c.grid.m_xy = m_xy;
    c.pipeline = pipeline.to_vec();
    c.output_dir = dir.to_path_buf();
    c
}

#[test]
fn profile_only_pipeline_writes_profile_tables() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = run(&config(1, 64, &[Stage::Profile], dir.path())).unwrap();
    let names: Vec<&str> = manifest.files.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(names, ["config.toml", "plot_profiles.csv", "profile.csv", "summary.json"]);
    assert!(manifest.passed());
    let header = std::fs::read_to_string(dir.path().join("plot_profiles.csv")).unwrap();
    assert!(header.starts_with("r,f,a\n"));
}

#[test]
fn rerun_reproduces_checksums() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run(&config(1, 64, &[Stage::Background], a.path())).unwrap();
    let second = run(&config(1, 64, &[Stage::Background], b.path())).unwrap();
    assert_eq!(first.config_hash, second.config_hash);
    let outputs = |m: &lgvortex_cli::RunManifest| m.files.iter().filter(|f| f.path != "config.toml").cloned().collect::<Vec<_>>();
    assert_eq!(outputs(&first), outputs(&second));
    assert!(outputs(&first).iter().any(|f| f.path == "background.csv"));
    let again = run(&config(1, 64, &[Stage::Background], a.path())).unwrap();
    assert_eq!(first.files, again.files);
}

#[test]
fn plot_data_needs_its_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = run(&config(1, 64, &[Stage::Profile], dir.path())).unwrap();
    assert!(matches!(emit_plot_data(&mut manifest, PlotData::Spectrum), Err(RunError::MissingStage(Stage::Spectrum))));
}

#[test]
fn mode_densities_are_localized() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = run(&config(1, 96, &[Stage::Spectrum], dir.path())).unwrap();
    assert!(manifest.passed(), "{:?}", manifest.checks);
    let densities: Vec<_> = manifest.files.iter().filter(|f| f.path.starts_with("plot_mode_density_")).collect();
    assert_eq!(densities.len(), 2);
    for f in densities {
        let text = std::fs::read_to_string(dir.path().join(&f.path)).unwrap();
        let (mut best, mut at) = (0.0, f64::INFINITY);
        for line in text.lines().skip(1) {
            let c: Vec<f64> = line.split(',').map(|t| t.parse().unwrap()).collect();
            if c[2] > best {
                best = c[2];
                at = c[0].hypot(c[1]);
            }
        }
        assert!(at < 3.0, "density peaks at r = {at}");
    }
    let spectrum = std::fs::read_to_string(dir.path().join("plot_spectrum.csv")).unwrap();
    let sigma: Vec<f64> = spectrum.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(sigma.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn vacuum_pipeline_reports_broken_supersymmetry() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = run(&config(0, 64, &[Stage::All], dir.path())).unwrap();
    assert!(manifest.passed(), "{:?}", manifest.checks);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["kernel"], 0);
    assert_eq!(summary["witten_index"], 0);
    assert_eq!(summary["supersymmetry"], "broken");
    assert_eq!(summary["flux"], 0.0);
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lgvortex"))
}

#[test]
fn invalid_config_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[vortex]\nn = -1\ne = 0\nv = 1\n").unwrap();
    let out = binary().args(["report", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("vortex.n") && err.contains("vortex.e"), "{err}");
}

#[test]
fn unknown_flag_exits_with_usage_code() {
    let out = binary().args(["solve", "--kappa", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_subcommand_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = binary().args(["solve", "--n", "2", "--grid", "64", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.path().join("background.csv").exists());
    let effective = std::fs::read_to_string(dir.path().join("config.toml")).unwrap();
    let reparsed = parse_config(&effective).unwrap();
    assert_eq!(reparsed.vortex.n, 2);
    assert_eq!(reparsed.grid.m_xy, 64);
}
