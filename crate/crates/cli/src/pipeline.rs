//! Stage execution, reports, plot tables and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use lgvortex_core::spectral::{index_from_operators, smallest_singulars};
use lgvortex_core::susy::VerificationReport;
use lgvortex_core::{
    assemble_d, assemble_d_adjoint, assemble_d_boson, bosonic_residual, build_susy, energy, fermion_to_boson, flux,
    sample_background, solve_profile, translation_mode_overlap, verify_unbroken, Background2D, IndexReport,
    ProfileMethod, RadialProfile, SpectralReport, SparseOperator,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{expand_pipeline, RunConfig, Stage};

/// Random vectors used by the algebra check.
pub const ALGEBRA_SAMPLES: usize = 100;
/// Bound on the smallest regular singular value of `D†`, in units of `e v`.
pub const ADJOINT_GAP_MIN: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: lgvortex_core::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("stage {0} has not been run")]
    MissingStage(Stage),
    #[error("malformed output file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

impl RunError {
    /// True for iteration caps and unconverged solves.
    pub fn is_non_convergence(&self) -> bool {
        use lgvortex_core::Error as E;
        matches!(
            self,
            RunError::Stage { source: E::NonConvergence(_) | E::NoConvergence { .. } | E::ChannelNonConvergence { .. }, .. }
        )
    }
}

type RunResult<T> = std::result::Result<T, RunError>;

/// One pass/fail check recorded in the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: Stage,
    pub status: String,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub artifact_version: String,
    pub output_dir: PathBuf,
    pub stages: Vec<StageRecord>,
    pub files: Vec<FileRecord>,
    pub checks: Vec<Check>,
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn has_stage(&self, stage: Stage) -> bool {
        self.stages.iter().any(|s| s.name == stage && s.status == "ok")
    }

    fn record_file(&mut self, rel: &str) -> RunResult<()> {
        let path = self.output_dir.join(rel);
        let bytes = fs::read(&path).map_err(|source| RunError::Io { path: path.clone(), source })?;
        let sha256 = hex(&Sha256::digest(&bytes));
        self.files.retain(|f| f.path != rel);
        self.files.push(FileRecord { path: rel.to_string(), sha256 });
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything the stages produce, kept in memory for later stages.
#[derive(Default)]
struct State {
    profile: Option<RadialProfile>,
    background: Option<Background2D>,
    d: Option<SparseOperator>,
    spectrum: Option<SpectralReport>,
    index: Option<IndexReport>,
}

/// Summary values and checks accumulated over the stages.
#[derive(Default)]
struct Recorder {
    summary: BTreeMap<String, serde_json::Value>,
    checks: Vec<Check>,
}

impl Recorder {
    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.to_string(), passed, detail });
    }

    fn put<T: Serialize>(&mut self, key: &str, value: T) {
        self.summary.insert(key.to_string(), serde_json::to_value(value).expect("summary value serializes"));
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

fn create(dir: &Path, rel: &str) -> RunResult<BufWriter<fs::File>> {
    let path = dir.join(rel);
    fs::File::create(&path).map(BufWriter::new).map_err(io_err(&path))
}

fn write_with<F>(manifest: &mut RunManifest, stage: Stage, rel: &str, f: F) -> RunResult<()>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> lgvortex_core::Result<()>,
{
    let mut w = create(&manifest.output_dir, rel)?;
    f(&mut w).map_err(|source| RunError::Stage { stage, source })?;
    w.flush().map_err(io_err(&manifest.output_dir.join(rel)))?;
    drop(w);
    manifest.record_file(rel)
}

fn stage_err(stage: Stage) -> impl FnOnce(lgvortex_core::Error) -> RunError {
    move |source| RunError::Stage { stage, source }
}

/// Run the configured pipeline, writing every output into `output_dir`.
pub fn run(config: &RunConfig) -> RunResult<RunManifest> {
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let effective = config.to_toml();
    // The hash covers the inputs only, so runs into different directories agree.
    let inputs = RunConfig { output_dir: PathBuf::from("."), ..config.clone() }.to_toml();
    let mut manifest = RunManifest {
        config_hash: hex(&Sha256::digest(inputs.as_bytes())),
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        output_dir: dir.clone(),
        stages: Vec::new(),
        files: Vec::new(),
        checks: Vec::new(),
    };
    fs::write(dir.join("config.toml"), &effective).map_err(io_err(&dir.join("config.toml")))?;
    manifest.record_file("config.toml")?;

    let mut state = State::default();
    let mut rec = Recorder::default();
    for stage in expand_pipeline(&config.pipeline) {
        let start = Instant::now();
        log::info!("stage {stage}");
        let outcome = match stage {
            Stage::Profile => stage_profile(config, &mut state, &mut rec, &mut manifest),
            Stage::Background => stage_background(config, &mut state, &mut rec, &mut manifest),
            Stage::Spectrum => stage_spectrum(config, &mut state, &mut rec, &mut manifest),
            Stage::Index => stage_index(config, &mut state, &mut rec, &mut manifest),
            Stage::Algebra => stage_algebra(config, &mut state, &mut rec, &mut manifest),
            Stage::Bosonmap => stage_bosonmap(config, &mut state, &mut rec, &mut manifest),
            Stage::All => Ok(()),
        };
        let wall_time_s = start.elapsed().as_secs_f64();
        let status = if outcome.is_ok() { "ok" } else { "failed" };
        manifest.stages.push(StageRecord { name: stage, status: status.to_string(), wall_time_s });
        if let Err(e) = outcome {
            write_manifest(&manifest)?;
            return Err(e);
        }
    }

    for which in [PlotData::Profiles, PlotData::Spectrum, PlotData::ModeDensity] {
        if manifest.has_stage(which.stage()) {
            emit_plot_data(&mut manifest, which)?;
        }
    }

    manifest.checks = rec.checks.clone();
    rec.put("checks", rec.checks.clone());
    rec.put("all_passed", manifest.passed());
    write_with(&mut manifest, Stage::All, "summary.json", |w| Ok(serde_json::to_writer_pretty(w, &rec.summary)?))?;
    write_manifest(&manifest)?;
    Ok(manifest)
}

fn write_manifest(manifest: &RunManifest) -> RunResult<()> {
    let path = manifest.output_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(io_err(&path))
}

fn stage_profile(config: &RunConfig, state: &mut State, rec: &mut Recorder, manifest: &mut RunManifest) -> RunResult<()> {
    let st = Stage::Profile;
    let params = config.params();
    let shooting = solve_profile(params, ProfileMethod::Shooting).map_err(stage_err(st))?;
    let relaxed = solve_profile(params, ProfileMethod::Relaxation).map_err(stage_err(st))?;
    let sup = shooting
        .f
        .iter()
        .zip(&relaxed.f)
        .chain(shooting.a.iter().zip(&relaxed.a))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let last = shooting.f.len() - 1;
    rec.put("profile_residual", shooting.residual_norm);
    rec.put("profile_method_difference", sup);
    rec.put("core_coefficient", shooting.core_coefficient);
    rec.check("profile_residual", shooting.residual_norm <= 1e-8, format!("{:.3e}", shooting.residual_norm));
    rec.check("profile_methods_agree", sup <= 1e-6, format!("sup |shooting - relaxation| = {sup:.3e}"));
    if params.n > 0 {
        let tail = shooting.f[last].min(shooting.a[last]);
        rec.check("profile_asymptotics", tail >= 1.0 - 1e-3, format!("min(f, a)(r_max) = {tail:.9}"));
    }
    write_with(manifest, st, "profile.csv", |w| shooting.write_csv(w))?;
    state.profile = Some(shooting);
    Ok(())
}

fn stage_background(config: &RunConfig, state: &mut State, rec: &mut Recorder, manifest: &mut RunManifest) -> RunResult<()> {
    let st = Stage::Background;
    let profile = state.profile.as_ref().ok_or(RunError::MissingStage(Stage::Profile))?;
    let bg = sample_background(profile, config.grid.m_xy).map_err(stage_err(st))?;
    let p = config.params();
    let phi = flux(&bg);
    let en = energy(&bg);
    let winding = bg.winding_number();
    rec.put("flux", phi);
    rec.put("energy", en);
    rec.put("winding_number", winding);
    rec.check("winding_number", winding == p.n, format!("{winding}"));
    if p.n > 0 {
        let quant = phi * p.e / (2.0 * std::f64::consts::PI * p.n as f64);
        rec.put("flux_quantization", quant);
        rec.check("flux_quantized", (quant - 1.0).abs() < 1e-3, format!("e Φ / (2π n) = {quant:.9}"));
        let ratio = en / (p.e * p.v * p.v * phi.abs());
        rec.put("energy_bound_ratio", ratio);
        rec.check("energy_saturates_bound", (0.99..=1.01).contains(&ratio), format!("E / (e v² |Φ|) = {ratio:.6}"));
    } else {
        rec.check("vacuum_flux_zero", phi.abs() < 1e-12, format!("{phi:.3e}"));
    }
    write_with(manifest, st, "background.csv", |w| bg.write_csv(w))?;
    state.d = Some(assemble_d(&bg, config.grid.scheme).map_err(stage_err(st))?);
    state.background = Some(bg);
    Ok(())
}

fn spectrum_k(config: &RunConfig) -> usize {
    config.spectral.k.max(2 * config.vortex.n.unsigned_abs() as usize + 4)
}

fn stage_spectrum(config: &RunConfig, state: &mut State, rec: &mut Recorder, manifest: &mut RunManifest) -> RunResult<()> {
    let st = Stage::Spectrum;
    let d = state.d.as_ref().ok_or(RunError::MissingStage(Stage::Background))?;
    let report = smallest_singulars(d, spectrum_k(config), config.tol_zero(), config.spectral.seed).map_err(stage_err(st))?;
    let expected = 2 * config.vortex.n.unsigned_abs() as usize;
    rec.put("kernel", report.kernel_count);
    rec.put("kernel_resolved", report.resolved);
    rec.put("kernel_gap_ratio", report.gap_ratio);
    rec.check(
        "kernel_count",
        report.resolved && report.kernel_count == expected,
        format!("{} (expected {expected}), gap ratio {:.3e}, resolved {}", report.kernel_count, report.gap_ratio, report.resolved),
    );
    write_with(manifest, st, "spectrum_D.json", |w| report.write_json(w))?;
    let basis = report.kernel_basis();
    for (i, v) in basis.iter().enumerate() {
        write_with(manifest, st, &format!("kernel_mode_{i}.csv"), |w| v.write_csv(w))?;
    }
    state.spectrum = Some(report);
    Ok(())
}

fn stage_index(config: &RunConfig, state: &mut State, rec: &mut Recorder, manifest: &mut RunManifest) -> RunResult<()> {
    let st = Stage::Index;
    let bg = state.background.as_ref().ok_or(RunError::MissingStage(Stage::Background))?;
    let rd = state.spectrum.clone().ok_or(RunError::MissingStage(Stage::Spectrum))?;
    let dt = assemble_d_adjoint(bg, config.grid.scheme).map_err(stage_err(st))?;
    let rdt = smallest_singulars(&dt, spectrum_k(config), config.tol_zero(), config.spectral.seed).map_err(stage_err(st))?;
    let report = IndexReport::from_reports(config.vortex.n, rd, rdt);
    let n2 = 2 * config.vortex.n.unsigned_abs() as i64;
    let ev = config.params().ev();
    let gap = report.d_adjoint.sigma_above_kernel.unwrap_or(0.0);
    rec.put("adjoint_kernel", report.n_plus);
    rec.put("adjoint_sigma_above_lattice_modes", gap);
    rec.put("adjoint_raw_near_zero", report.raw_near_zero_d_adjoint);
    rec.put("witten_index", report.witten_index);
    rec.put("fredholm_index", report.fredholm_index);
    rec.put("index_resolved", report.resolved);
    rec.put("witten_sign_note", "reported as dim ker D†D - dim ker DD† (= +2n); the source text states -2n, only |Δ| is asserted");
    rec.check("adjoint_kernel_empty", report.d_adjoint.resolved && report.n_plus == 0, format!("{}", report.n_plus));
    rec.check(
        "adjoint_gap",
        gap >= ADJOINT_GAP_MIN * ev,
        format!("first singular value of D† above its lattice near-zero block: {gap:.6}"),
    );
    rec.check(
        "witten_index_magnitude",
        report.resolved && report.witten_index.abs() == n2 && report.witten_index == report.fredholm_index,
        format!("Δ = {}, Fredholm index {}", report.witten_index, report.fredholm_index),
    );
    write_with(manifest, st, "index.json", |w| report.write_json(w))?;
    state.index = Some(report);
    Ok(())
}

fn stage_algebra(config: &RunConfig, state: &mut State, rec: &mut Recorder, manifest: &mut RunManifest) -> RunResult<()> {
    let st = Stage::Algebra;
    let bg = state.background.as_ref().ok_or(RunError::MissingStage(Stage::Background))?;
    let d = state.d.as_ref().ok_or(RunError::MissingStage(Stage::Background))?;
    let index = state.index.as_ref().ok_or(RunError::MissingStage(Stage::Index))?;
    let seed = config.spectral.seed;
    let fermionic = build_susy(d).map_err(stage_err(st))?.verify_algebra(ALGEBRA_SAMPLES, seed).map_err(stage_err(st))?;
    let db = assemble_d_boson(bg, config.grid.scheme).map_err(stage_err(st))?;
    let bosonic = build_susy(&db).map_err(stage_err(st))?.verify_algebra(ALGEBRA_SAMPLES, seed).map_err(stage_err(st))?;
    let verdict = verify_unbroken(index);
    let report = VerificationReport::new(&fermionic, verdict);
    rec.put("algebra_residuals", &fermionic.residuals);
    rec.put("bosonic_algebra_residuals", &bosonic.residuals);
    rec.put("min_rayleigh_quotient", fermionic.min_rayleigh);
    rec.put("supersymmetry", verdict);
    for (name, r) in [("fermionic", &fermionic), ("bosonic", &bosonic)] {
        rec.check(&format!("{name}_algebra_structural"), r.structural_exact(), format!("{:?}", r.residuals));
        rec.check(&format!("{name}_algebra_product"), r.product_residual() <= 1e-12, format!("{:.3e}", r.product_residual()));
        rec.check(&format!("{name}_hamiltonian_psd"), r.min_rayleigh >= -1e-10, format!("{:.3e}", r.min_rayleigh));
    }
    let expected = if config.vortex.n == 0 { "broken" } else { "unbroken" };
    rec.check("supersymmetry_verdict", verdict.to_string() == expected, verdict.to_string());
    write_with(manifest, st, "algebra.json", |w| report.write_json(w))?;
    Ok(())
}

fn stage_bosonmap(config: &RunConfig, state: &mut State, rec: &mut Recorder, manifest: &mut RunManifest) -> RunResult<()> {
    let st = Stage::Bosonmap;
    let bg = state.background.as_ref().ok_or(RunError::MissingStage(Stage::Background))?;
    let d = state.d.as_ref().ok_or(RunError::MissingStage(Stage::Background))?;
    let spectrum = state.spectrum.as_ref().ok_or(RunError::MissingStage(Stage::Spectrum))?;
    let tol = config.tol_zero();
    let basis = spectrum.kernel_basis();
    let mut residuals = Vec::with_capacity(basis.len());
    for (i, v) in basis.iter().enumerate() {
        let pair = fermion_to_boson(v).map_err(stage_err(st))?;
        let r = bosonic_residual(&pair, bg).map_err(stage_err(st))?;
        residuals.push(r / pair.norm());
        write_with(manifest, st, &format!("boson_mode_{i}.csv"), |w| pair.write_csv(w))?;
    }
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    rec.put("bosonic_residuals", &residuals);
    rec.check("bosonic_residual", worst <= tol, format!("max residual / norm = {worst:.3e}"));

    let db = assemble_d_boson(bg, config.grid.scheme).map_err(stage_err(st))?;
    let identical = db.bit_identical(d);
    rec.put("boson_operator_bit_identical", identical);
    rec.check("boson_operator_identical", identical, String::new());
    let dbt = db.conj_transpose(lgvortex_core::OperatorTag::DAdjoint);
    let report = index_from_operators(config.vortex.n, &db, &dbt, spectrum_k(config), tol, config.spectral.seed)
        .map_err(stage_err(st))?;
    let n2 = 2 * config.vortex.n.unsigned_abs() as usize;
    rec.put("bosonic_kernel", report.n_minus);
    rec.put("bosonic_witten_index", report.witten_index);
    rec.check("bosonic_kernel", report.d.resolved && report.n_minus == n2, format!("{}", report.n_minus));
    rec.check(
        "bosonic_witten_index_magnitude",
        report.resolved && report.witten_index.unsigned_abs() as usize == n2,
        format!("{}", report.witten_index),
    );
    if config.vortex.n == 1 {
        let overlap = translation_mode_overlap(bg, &basis).map_err(stage_err(st))?;
        rec.put("translation_overlap", overlap);
        rec.check("translation_overlap", overlap >= 0.99, format!("{overlap:.6}"));
    }
    write_with(manifest, st, "bosonic_index.json", |w| report.write_json(w))?;
    Ok(())
}

/// Plot-ready tables derived from earlier outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotData {
    /// `plot_profiles.csv`: `r,f,a`.
    Profiles,
    /// `plot_mode_density_<i>.csv`: `x,y,density` with `|ψ↓|² + |χ↑|²`.
    ModeDensity,
    /// `plot_spectrum.csv`: `index,sigma`, ascending.
    Spectrum,
}

impl PlotData {
    pub fn stage(self) -> Stage {
        match self {
            PlotData::Profiles => Stage::Profile,
            PlotData::ModeDensity | PlotData::Spectrum => Stage::Spectrum,
        }
    }
}

fn read_lines(path: &Path) -> RunResult<Vec<String>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    BufReader::new(file).lines().collect::<Result<_, _>>().map_err(io_err(path))
}

fn malformed(path: &Path, reason: impl Into<String>) -> RunError {
    RunError::Malformed { path: path.to_path_buf(), reason: reason.into() }
}

/// Write the plot table `which` from the files of a completed run and add it
/// to the manifest.
pub fn emit_plot_data(manifest: &mut RunManifest, which: PlotData) -> RunResult<Vec<String>> {
    if !manifest.has_stage(which.stage()) {
        return Err(RunError::MissingStage(which.stage()));
    }
    let dir = manifest.output_dir.clone();
    let mut written = Vec::new();
    match which {
        PlotData::Profiles => {
            let src = dir.join("profile.csv");
            let mut out = String::from("r,f,a\n");
            for line in read_lines(&src)?.iter().skip(1) {
                let cols: Vec<&str> = line.split(',').collect();
                if cols.len() < 3 {
                    return Err(malformed(&src, format!("short row {line:?}")));
                }
                out.push_str(&format!("{},{},{}\n", cols[0], cols[1], cols[2]));
            }
            fs::write(dir.join("plot_profiles.csv"), out).map_err(io_err(&dir.join("plot_profiles.csv")))?;
            written.push("plot_profiles.csv".to_string());
        }
        PlotData::Spectrum => {
            let src = dir.join("spectrum_D.json");
            let text = fs::read_to_string(&src).map_err(io_err(&src))?;
            let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| malformed(&src, e.to_string()))?;
            let sigma = value["sigma"].as_array().ok_or_else(|| malformed(&src, "no sigma array"))?;
            let mut out = String::from("index,sigma\n");
            for (i, s) in sigma.iter().enumerate() {
                let s = s.as_f64().ok_or_else(|| malformed(&src, "non-numeric sigma"))?;
                out.push_str(&format!("{i},{s:.16e}\n"));
            }
            fs::write(dir.join("plot_spectrum.csv"), out).map_err(io_err(&dir.join("plot_spectrum.csv")))?;
            written.push("plot_spectrum.csv".to_string());
        }
        PlotData::ModeDensity => {
            let mut i = 0;
            while dir.join(format!("kernel_mode_{i}.csv")).exists() {
                let src = dir.join(format!("kernel_mode_{i}.csv"));
                let mut out = String::from("x,y,density\n");
                for line in read_lines(&src)?.iter().skip(1) {
                    let c: Vec<f64> = line.split(',').map(|t| t.parse::<f64>()).collect::<Result<_, _>>().map_err(|e| malformed(&src, e.to_string()))?;
                    if c.len() != 6 {
                        return Err(malformed(&src, format!("expected 6 columns, got {}", c.len())));
                    }
                    let density = c[2] * c[2] + c[3] * c[3] + c[4] * c[4] + c[5] * c[5];
                    out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", c[0], c[1], density));
                }
                let name = format!("plot_mode_density_{i}.csv");
                fs::write(dir.join(&name), out).map_err(io_err(&dir.join(&name)))?;
                written.push(name);
                i += 1;
            }
        }
    }
    for name in &written {
        manifest.record_file(name)?;
    }
    Ok(written)
}
