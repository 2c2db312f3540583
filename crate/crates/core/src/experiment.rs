//! End-to-end experiments: build a code, plan and simulate circuit
//! instances at every noise factor, decode, estimate and extrapolate.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::circuit::{format_sig12, serialize_circuit, Circuit, LocationPolicy};
use crate::codes::{build_fig2_example, build_repetition, build_surface_d3, BuiltCode, CodeError, LogicalStateSpec};
use crate::decoder::{verify_distance, DecoderError, LogicalDecoder};
use crate::estimator::{
    draw_instances, estimate_expectation, outcome_table, plan_instances, simulate_outcomes, Estimate, EstimatorError,
};
use crate::noise::{derive_seed, device_preset, NoiseError, NoiseModel};
use crate::pauli::Pauli;
use crate::scaling::{scaling_sweep, write_scaling_csv, LogicalRateModel, ScalingError, ScalingRow};
use crate::sim::{Route, SimError, Simulator, DEFAULT_BUDGET};
use crate::zne::{leading_order, scan_delta_eta, write_scan_csv, DataPoint, ScanRow, ZneError};

/// Seed stream of the instance draw and shots at grid point i: (R_STREAM, i).
const R_STREAM: u64 = 0x7267_7269_64;
const CALIBRATION_STREAM: u64 = 0x6361_6c69_62;
const BLOCH_STREAM: u64 = 0x626c_6f63_68;
const CALIBRATION_STEPS: usize = 30;
const CALIBRATION_MAX: f64 = 0.3;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("code: {0}")]
    Code(#[from] CodeError),
    #[error("noise model: {0}")]
    Noise(#[from] NoiseError),
    #[error("simulator: {0}")]
    Sim(#[from] SimError),
    #[error("decoder: {0}")]
    Decoder(#[from] DecoderError),
    #[error("estimator: {0}")]
    Estimator(#[from] EstimatorError),
    #[error("extrapolation: {0}")]
    Zne(#[from] ZneError),
    #[error("scaling: {0}")]
    Scaling(#[from] ScalingError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    /// Failures caused by a simulator, decoder or enumeration limit.
    pub fn is_capacity(&self) -> bool {
        let sim = |e: &SimError| e.is_capacity();
        let dec = |e: &DecoderError| match e {
            DecoderError::TooManyDefects { .. } | DecoderError::TooManyDetectors(_) | DecoderError::TooManyPatterns { .. } => true,
            DecoderError::Sim(s) => sim(s),
            _ => false,
        };
        match self {
            ExperimentError::Sim(e) => sim(e),
            ExperimentError::Decoder(e) => dec(e),
            ExperimentError::Estimator(EstimatorError::Decoder(e)) => dec(e),
            _ => false,
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(
            self,
            ExperimentError::Config(_)
                | ExperimentError::Json(_)
                | ExperimentError::Code(_)
                | ExperimentError::Noise(NoiseError::UnknownPreset(_))
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Fig2,
    Repetition,
    Surface,
    Scaling,
}

/// Axes of the large-scale projection sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalingGrid {
    pub p: Vec<f64>,
    pub d: Vec<usize>,
    #[serde(rename = "N")]
    pub n: Vec<f64>,
    pub prefactor: f64,
}

impl Default for ScalingGrid {
    fn default() -> Self {
        Self {
            p: vec![1e-3],
            d: vec![3, 5, 7, 9, 11],
            n: vec![5e7],
            prefactor: crate::scaling::DEFAULT_PREFACTOR,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub d: usize,
    #[serde(rename = "M")]
    pub rounds: usize,
    /// Unit injection probability.
    pub p: f64,
    pub r_grid: Vec<f64>,
    #[serde(rename = "N_total")]
    pub n_total: u64,
    #[serde(rename = "S")]
    pub shots: u64,
    #[serde(rename = "K")]
    pub k_list: Vec<usize>,
    pub seed: u64,
    /// Device noise for the repetition and feedback circuits.
    pub noise_preset: String,
    pub output_dir: PathBuf,
    /// Minimum instance share per error count.
    pub min_frac: f64,
    /// Distance used by the corrected-series fit; the code's own by default.
    pub effective_d: Option<usize>,
    /// Data-qubit angles of the feedback example.
    pub theta: [f64; 3],
    /// Surface code logical state: `zero`, `plus` or `psi`.
    pub state: String,
    /// Surface code readout basis, `Z` or `X`.
    pub basis: String,
    /// Background depolarizing rate; calibrated when absent.
    pub p_dep: Option<f64>,
    /// Corrected ⟨Z_L⟩ of |0_L⟩ that the background rate is tuned to.
    pub calibration_target: f64,
    pub calibration_shots: u64,
    /// Also estimate (⟨X_L⟩, ⟨Z_L⟩) at r = 1 for zero, plus and psi.
    pub bloch: bool,
    pub scaling: ScalingGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Repetition,
            d: 3,
            rounds: 1,
            p: 0.036,
            r_grid: vec![1.0, 1.5, 2.0, 2.5, 3.0],
            n_total: 1000,
            shots: 150,
            k_list: vec![1, 2, 3],
            seed: 1,
            noise_preset: "processor1".into(),
            output_dir: "out".into(),
            min_frac: crate::estimator::DEFAULT_MIN_FRAC,
            effective_d: None,
            theta: [-0.4 * std::f64::consts::PI, 0.0, 0.0],
            state: "zero".into(),
            basis: "Z".into(),
            p_dep: None,
            calibration_target: 0.90,
            calibration_shots: 20_000,
            bloch: false,
            scaling: ScalingGrid::default(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

/// Sets a dotted `key` in a JSON document; `value` is parsed as JSON and
/// falls back to a plain string.
pub fn apply_override(doc: &mut serde_json::Value, key: &str, value: &str) -> Result<(), ExperimentError> {
    let parsed = serde_json::from_str(value).unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| config_err(format!("cannot set {key}: {part} is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| serde_json::json!({}));
    }
    Err(config_err("empty override key"))
}

impl ExperimentConfig {
    /// Parses a JSON document with `key=value` overrides applied on top.
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self, ExperimentError> {
        let mut doc: serde_json::Value = if text.trim().is_empty() {
            serde_json::json!({})
        } else {
            serde_json::from_str(text)?
        };
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| config_err(format!("override {o:?} is not key=value")))?;
            apply_override(&mut doc, k.trim(), v.trim())?;
        }
        let cfg: Self = serde_json::from_value(doc)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, overrides)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.experiment == ExperimentKind::Scaling {
            if self.k_list.is_empty() || self.k_list.contains(&0) {
                return Err(config_err("K list must hold orders of at least 1"));
            }
            return Ok(());
        }
        if !self.r_grid.contains(&1.0) {
            return Err(config_err("r_grid must contain 1"));
        }
        for (i, r) in self.r_grid.iter().enumerate() {
            if !(r.is_finite() && *r > 0.0) {
                return Err(config_err(format!("noise factor {r} must be positive")));
            }
            if self.r_grid[..i].contains(r) {
                return Err(config_err(format!("noise factor {r} listed twice")));
            }
        }
        if !(0.0..1.0).contains(&self.p) {
            return Err(config_err(format!("p = {} outside [0, 1)", self.p)));
        }
        if self.n_total == 0 || self.shots == 0 {
            return Err(config_err("N_total and S must be at least 1"));
        }
        if self.k_list.is_empty() || self.k_list.contains(&0) {
            return Err(config_err("K list must hold orders of at least 1"));
        }
        device_preset(&self.noise_preset)?;
        if self.experiment == ExperimentKind::Surface {
            self.logical_state()?;
            self.readout_basis()?;
        }
        Ok(())
    }

    pub fn logical_state(&self) -> Result<LogicalStateSpec, ExperimentError> {
        state_from_name(&self.state)
    }

    pub fn readout_basis(&self) -> Result<Pauli, ExperimentError> {
        match self.basis.as_str() {
            "Z" | "z" => Ok(Pauli::Z),
            "X" | "x" => Ok(Pauli::X),
            b => Err(config_err(format!("readout basis {b:?} must be X or Z"))),
        }
    }
}

pub fn state_from_name(name: &str) -> Result<LogicalStateSpec, ExperimentError> {
    match name {
        "zero" => Ok(LogicalStateSpec::Zero),
        "plus" => Ok(LogicalStateSpec::Plus),
        "psi" => Ok(LogicalStateSpec::psi()),
        s => Err(config_err(format!("logical state {s:?} must be zero, plus or psi"))),
    }
}

/// A code with its r = 1 noise model and decoder.
pub struct Prepared {
    pub code: BuiltCode,
    pub model: NoiseModel,
    pub decoder: LogicalDecoder,
    pub p_dep: Option<f64>,
}

impl Prepared {
    fn new(code: BuiltCode, model: NoiseModel, p_dep: Option<f64>) -> Result<Self, ExperimentError> {
        let decoder = LogicalDecoder::new(&code, &model)?;
        Ok(Self {
            code,
            model,
            decoder,
            p_dep,
        })
    }

    /// Noiseless value of the logical observable.
    pub fn ideal_value(&self) -> Result<f64, ExperimentError> {
        let sim = Simulator::new(&self.code.circuit, &NoiseModel::ideal())?;
        Ok(sim.exact(&self.decoder, &[], DEFAULT_BUDGET, Route::Auto)?)
    }
}

/// The surface code noise is injection plus the uniform background alone; the
/// device preset does not apply.
fn surface_code(cfg: &ExperimentConfig, spec: &LogicalStateSpec, basis: Pauli, p_dep: f64) -> Result<Prepared, ExperimentError> {
    let code = build_surface_d3(spec, basis, cfg.p)?;
    let model = code.with_background(code.noise_model(&NoiseModel::ideal())?, p_dep)?;
    Prepared::new(code, model, Some(p_dep))
}

/// Background depolarizing rate at which the corrected ⟨Z_L⟩ of |0_L⟩ with
/// injection disabled equals `cfg.calibration_target`. Bisection on a
/// fixed-seed Monte Carlo estimate.
pub fn calibrate_background(cfg: &ExperimentConfig) -> Result<f64, ExperimentError> {
    let seed = derive_seed(cfg.seed, CALIBRATION_STREAM, 0);
    let value = |p_dep: f64| -> Result<f64, ExperimentError> {
        let prep = surface_code(cfg, &LogicalStateSpec::Zero, Pauli::Z, p_dep)?;
        let sim = Simulator::new(&prep.code.circuit, &prep.model.without_injection())?;
        Ok(sim.estimate(&prep.decoder, &[], cfg.calibration_shots, seed, 0)?.mean)
    };
    let target = cfg.calibration_target;
    if value(0.0)? < target {
        return Err(config_err(format!("calibration target {target} lies above the noiseless-background value")));
    }
    if value(CALIBRATION_MAX)? > target {
        return Err(config_err(format!("calibration target {target} needs p_dep above {CALIBRATION_MAX}")));
    }
    let (mut lo, mut hi) = (0.0, CALIBRATION_MAX);
    for _ in 0..CALIBRATION_STEPS {
        let mid = 0.5 * (lo + hi);
        if value(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, ExperimentError> {
    let device = device_preset(&cfg.noise_preset)?;
    match cfg.experiment {
        ExperimentKind::Fig2 => {
            let [t0, t2, t4] = cfg.theta;
            let code = build_fig2_example(t0, t2, t4, cfg.p)?;
            let model = code.noise_model(&device)?;
            Prepared::new(code, model, None)
        }
        ExperimentKind::Repetition => {
            let code = build_repetition(cfg.d, cfg.rounds, cfg.p)?;
            let model = code.noise_model(&device)?;
            Prepared::new(code, model, None)
        }
        ExperimentKind::Surface => {
            let p_dep = match cfg.p_dep {
                Some(p) => p,
                None => calibrate_background(cfg)?,
            };
            surface_code(cfg, &cfg.logical_state()?, cfg.readout_basis()?, p_dep)
        }
        ExperimentKind::Scaling => Err(config_err("the scaling experiment has no circuit")),
    }
}

/// Corrected and uncorrected estimates at one noise factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointRow {
    pub r: f64,
    pub corrected: Estimate,
    pub uncorrected: Estimate,
}

/// Instance-sampled estimates of both series at noise factor `r`. The
/// uncorrected series reads the raw logical value; circuits with feedback or
/// post-selection run a separate circuit without them.
pub fn estimate_point(prep: &Prepared, cfg: &ExperimentConfig, r: f64, seed: u64) -> Result<PointRow, ExperimentError> {
    let code = &prep.code;
    let sites = code.injection_sites();
    let plan = plan_instances(sites.len(), r * code.p, cfg.n_total, cfg.min_frac)?;
    let set = draw_instances(&plan, &sites, cfg.shots, seed);
    // injected errors come from the instances, everything else is sampled
    let background = prep.model.without_injection();
    let sim = Simulator::new(&code.circuit, &background)?;
    let outcomes = simulate_outcomes(&sim, &set, seed)?;
    let corrected_table = outcome_table(&outcomes, |o| prep.decoder.value(o.bits))?;
    let corrected = estimate_expectation(&set, &plan, &corrected_table, code.circuit.has_postselection())?;
    let raw = |o: &crate::sim::ShotOutcome| Ok(code.raw_value(o.bits));
    let uncorrected_circuit = code.uncorrected_circuit();
    let uncorrected_table = if uncorrected_circuit == code.circuit {
        outcome_table(&outcomes, raw)?
    } else {
        let usim = Simulator::new(&uncorrected_circuit, &background)?;
        outcome_table(&simulate_outcomes(&usim, &set, seed)?, raw)?
    };
    let uncorrected = estimate_expectation(&set, &plan, &uncorrected_table, false)?;
    Ok(PointRow {
        r,
        corrected,
        uncorrected,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlochRow {
    pub state: String,
    pub basis: char,
    pub ideal: f64,
    pub corrected: Estimate,
    pub uncorrected: Estimate,
}

/// Logical X and Z of the three Bloch-plane states at r = 1.
pub fn bloch_points(cfg: &ExperimentConfig, p_dep: f64) -> Result<Vec<BlochRow>, ExperimentError> {
    let mut rows = Vec::new();
    for (i, name) in ["zero", "plus", "psi"].iter().enumerate() {
        let spec = state_from_name(name)?;
        let (x, z) = spec.bloch();
        for (j, (basis, ideal)) in [(Pauli::X, x), (Pauli::Z, z)].into_iter().enumerate() {
            let prep = surface_code(cfg, &spec, basis, p_dep)?;
            let seed = derive_seed(cfg.seed, BLOCH_STREAM, (2 * i + j) as u64);
            let row = estimate_point(&prep, cfg, 1.0, seed)?;
            rows.push(BlochRow {
                state: name.to_string(),
                basis: basis.letter(),
                ideal,
                corrected: row.corrected,
                uncorrected: row.uncorrected,
            });
        }
    }
    Ok(rows)
}

pub fn data_points(rows: &[PointRow], corrected: bool, shots: u64) -> Vec<DataPoint> {
    rows.iter()
        .map(|row| {
            let e = if corrected { row.corrected } else { row.uncorrected };
            DataPoint {
                r: row.r,
                value: e.mean,
                stderr: e.stderr,
                shots,
            }
        })
        .collect()
}

/// Everything one experiment writes.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub points: Vec<PointRow>,
    pub scan: Vec<ScanRow>,
    pub scan_uncorrected: Vec<ScanRow>,
    pub bloch: Vec<BlochRow>,
    pub scaling: Vec<ScalingRow>,
    pub ideal: f64,
    pub manifest: serde_json::Value,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn usable_orders(ks: &[usize], n_points: usize) -> Vec<usize> {
    ks.iter().copied().filter(|&k| k < n_points).collect()
}

fn circuit_hashes(prep: &Prepared) -> serde_json::Value {
    let text = |c: &Circuit| sha256_hex(serialize_circuit(c).as_bytes());
    serde_json::json!({
        "circuit": text(&prep.code.circuit),
        "uncorrected_circuit": text(&prep.code.uncorrected_circuit()),
        "detectors": sha256_hex(prep.code.detectors_text().as_bytes()),
        "decoder_graph": prep.decoder.graph().map(|g| sha256_hex(g.to_text().as_bytes())),
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    cfg.validate()?;
    if cfg.experiment == ExperimentKind::Scaling {
        return run_scaling(cfg);
    }
    let prep = prepare(cfg)?;
    let ideal = prep.ideal_value()?;
    let seeds: Vec<u64> = (0..cfg.r_grid.len())
        .map(|i| derive_seed(cfg.seed, R_STREAM, i as u64))
        .collect();
    let points = cfg
        .r_grid
        .iter()
        .zip(&seeds)
        .map(|(&r, &s)| estimate_point(&prep, cfg, r, s))
        .collect::<Result<Vec<_>, _>>()?;
    let d_eff = cfg.effective_d.unwrap_or(prep.code.d);
    let ks = usable_orders(&cfg.k_list, points.len());
    let shots = cfg.n_total * cfg.shots;
    let scan = scan_delta_eta(&data_points(&points, true, shots), d_eff, &ks, ideal)?;
    let scan_uncorrected = scan_delta_eta(&data_points(&points, false, shots), 1, &ks, ideal)?;
    let bloch = match (cfg.experiment, cfg.bloch) {
        (ExperimentKind::Surface, true) => bloch_points(cfg, prep.p_dep.unwrap_or(0.0))?,
        _ => Vec::new(),
    };
    let manifest = serde_json::json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "seeds": { "experiment": cfg.seed, "per_r": seeds },
        "code": prep.code.manifest(),
        "hashes": circuit_hashes(&prep),
        "ideal": ideal,
        "effective_d": d_eff,
        "leading_order": leading_order(d_eff),
        "p_dep": prep.p_dep,
        "locations": prep.code.circuit.fault_locations(LocationPolicy::InjectionOnly).len(),
    });
    Ok(RunOutput {
        points,
        scan,
        scan_uncorrected,
        bloch,
        scaling: Vec::new(),
        ideal,
        manifest,
    })
}

fn run_scaling(cfg: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    let g = &cfg.scaling;
    let model = LogicalRateModel::calibrated(
        g.prefactor,
        crate::scaling::CALIBRATION_P,
        crate::scaling::CALIBRATION_D,
        crate::scaling::CALIBRATION_RATE,
    );
    let rows = scaling_sweep(&model, &g.p, &g.d, &g.n, &cfg.k_list)?;
    let manifest = serde_json::json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "model": model,
    });
    Ok(RunOutput {
        points: Vec::new(),
        scan: Vec::new(),
        scan_uncorrected: Vec::new(),
        bloch: Vec::new(),
        scaling: rows,
        ideal: 1.0,
        manifest,
    })
}

pub fn write_points_csv<W: Write>(w: W, rows: &[PointRow]) -> Result<(), ExperimentError> {
    let mut out = csv::Writer::from_writer(w);
    let header = ["r", "corrected_mean", "corrected_stderr", "uncorrected_mean", "uncorrected_stderr"];
    out.write_record(header).map_err(std::io::Error::from)?;
    for row in rows {
        out.write_record([
            format_sig12(row.r),
            format_sig12(row.corrected.mean),
            format_sig12(row.corrected.stderr),
            format_sig12(row.uncorrected.mean),
            format_sig12(row.uncorrected.stderr),
        ])
        .map_err(std::io::Error::from)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_bloch_csv<W: Write>(w: W, rows: &[BlochRow]) -> Result<(), ExperimentError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "state",
        "basis",
        "ideal",
        "corrected_mean",
        "corrected_stderr",
        "uncorrected_mean",
        "uncorrected_stderr",
    ])
    .map_err(std::io::Error::from)?;
    for row in rows {
        out.write_record([
            row.state.clone(),
            row.basis.to_string(),
            format_sig12(row.ideal),
            format_sig12(row.corrected.mean),
            format_sig12(row.corrected.stderr),
            format_sig12(row.uncorrected.mean),
            format_sig12(row.uncorrected.stderr),
        ])
        .map_err(std::io::Error::from)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads `points.csv` back into both series.
pub fn read_points_csv(path: &Path, shots: u64) -> Result<(Vec<DataPoint>, Vec<DataPoint>), ExperimentError> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let mut corrected = Vec::new();
    let mut uncorrected = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let num = |i: usize| -> Result<f64, ExperimentError> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| config_err(format!("{}: bad number in column {i}", path.display())))
        };
        let r = num(0)?;
        corrected.push(DataPoint {
            r,
            value: num(1)?,
            stderr: num(2)?,
            shots,
        });
        uncorrected.push(DataPoint {
            r,
            value: num(3)?,
            stderr: num(4)?,
            shots,
        });
    }
    Ok((corrected, uncorrected))
}

/// Serialized artifacts keyed by file name, in write order.
pub fn render_artifacts(out: &RunOutput) -> Result<Vec<(&'static str, Vec<u8>)>, ExperimentError> {
    let mut files = Vec::new();
    if !out.scaling.is_empty() {
        let mut buf = Vec::new();
        write_scaling_csv(&mut buf, &out.scaling)?;
        files.push(("scaling.csv", buf));
    } else {
        let mut buf = Vec::new();
        write_points_csv(&mut buf, &out.points)?;
        files.push(("points.csv", buf));
        let mut buf = Vec::new();
        write_scan_csv(&mut buf, &out.scan)?;
        files.push(("zne_scan.csv", buf));
        let mut buf = Vec::new();
        write_scan_csv(&mut buf, &out.scan_uncorrected)?;
        files.push(("zne_scan_uncorrected.csv", buf));
    }
    if !out.bloch.is_empty() {
        let mut buf = Vec::new();
        write_bloch_csv(&mut buf, &out.bloch)?;
        files.push(("bloch.csv", buf));
    }
    let mut manifest = serde_json::to_vec_pretty(&out.manifest)?;
    manifest.push(b'\n');
    files.push(("manifest.json", manifest));
    Ok(files)
}

/// Writes every artifact into `dir`; files written before a failure are
/// removed again.
pub fn write_artifacts(out: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let files = render_artifacts(out)?;
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, bytes) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            return Err(e.into());
        }
        written.push(path);
    }
    Ok(written)
}

/// Runs `cfg` and writes its artifacts to `cfg.output_dir`.
pub fn run_and_write(cfg: &ExperimentConfig) -> Result<(RunOutput, Vec<PathBuf>), ExperimentError> {
    let out = run_experiment(cfg)?;
    let paths = write_artifacts(&out, &cfg.output_dir)?;
    Ok((out, paths))
}

/// Instance budgets used for the hardware runs, by code distance and round
/// count; the surface code entry is `(3, 1)` under [`ExperimentKind::Surface`].
pub fn table_budget(kind: ExperimentKind, d: usize, rounds: usize) -> Option<u64> {
    let row: &[u64] = match (kind, d) {
        (ExperimentKind::Repetition, 3) => &[1000, 1000, 1500, 2000],
        (ExperimentKind::Repetition, 5) => &[3500, 5000, 5000, 6000],
        (ExperimentKind::Repetition, 7) => &[6000, 6000, 6000, 7000],
        (ExperimentKind::Surface, 3) => &[4000],
        _ => return None,
    };
    rounds.checked_sub(1).and_then(|i| row.get(i)).copied()
}

/// The fixed-total-rate multi-round family: rounds 1..=4 with the unit
/// probability lowered as rounds are added.
pub const FIXED_TOTAL_RATE: [(usize, f64); 4] = [(1, 0.136), (2, 0.094), (3, 0.072), (4, 0.057)];

/// Each member takes the tabulated instance budget for its round count when
/// one exists for the base distance.
pub fn fixed_total_rate_configs(base: &ExperimentConfig) -> Vec<ExperimentConfig> {
    FIXED_TOTAL_RATE
        .iter()
        .map(|&(rounds, p)| {
            let mut c = base.clone();
            c.experiment = ExperimentKind::Repetition;
            c.rounds = rounds;
            c.p = p;
            c.n_total = table_budget(ExperimentKind::Repetition, base.d, rounds).unwrap_or(base.n_total);
            c.output_dir = base.output_dir.join(format!("M{rounds}"));
            c
        })
        .collect()
}

/// One member of the multi-round family: its corrected unmitigated bias and
/// the first-order extrapolation with the smallest bias.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundSummary {
    pub rounds: usize,
    pub p: f64,
    pub n_total: u64,
    pub delta0: f64,
    pub rs: Vec<f64>,
    pub delta: f64,
    pub eta: f64,
}

pub fn round_summary(cfg: &ExperimentConfig, out: &RunOutput) -> Option<RoundSummary> {
    let best = out
        .scan
        .iter()
        .filter(|row| row.k == 1)
        .min_by(|a, b| a.delta.total_cmp(&b.delta))?;
    Some(RoundSummary {
        rounds: cfg.rounds,
        p: cfg.p,
        n_total: cfg.n_total,
        delta0: best.delta0,
        rs: best.rs.clone(),
        delta: best.delta,
        eta: best.eta,
    })
}

pub fn write_round_summary_csv<W: Write>(w: W, rows: &[RoundSummary]) -> Result<(), ExperimentError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["M", "p", "N_total", "delta0", "r_subset", "delta", "eta"])
        .map_err(std::io::Error::from)?;
    for r in rows {
        let rs: Vec<String> = r.rs.iter().map(|&x| format_sig12(x)).collect();
        out.write_record([
            r.rounds.to_string(),
            format_sig12(r.p),
            r.n_total.to_string(),
            format_sig12(r.delta0),
            rs.join(";"),
            format_sig12(r.delta),
            format_sig12(r.eta),
        ])
        .map_err(std::io::Error::from)?;
    }
    out.flush()?;
    Ok(())
}

/// Runs the multi-round family under `base.output_dir`, one subdirectory per
/// round count, plus `multiround.csv` summarising them.
pub fn run_multiround(base: &ExperimentConfig) -> Result<(Vec<RoundSummary>, Vec<PathBuf>), ExperimentError> {
    let mut rows = Vec::new();
    let mut paths = Vec::new();
    for cfg in fixed_total_rate_configs(base) {
        let (out, written) = run_and_write(&cfg)?;
        paths.extend(written);
        rows.extend(round_summary(&cfg, &out));
    }
    let mut buf = Vec::new();
    write_round_summary_csv(&mut buf, &rows)?;
    fs::create_dir_all(&base.output_dir)?;
    let path = base.output_dir.join("multiround.csv");
    fs::write(&path, buf)?;
    paths.push(path);
    Ok((rows, paths))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub skipped: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            skipped: false,
            detail,
        }
    }

    fn skipped(name: &str, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: true,
            skipped: true,
            detail,
        }
    }

    pub fn line(&self) -> String {
        let tag = match (self.skipped, self.passed) {
            (true, _) => "SKIP",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        };
        format!("{tag} {}: {}", self.name, self.detail)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Checks reachable at the configuration's scale: quiet detectors without
/// noise, exhaustive decoding below half the distance, vanishing low-order
/// noise coefficients, and the sampled estimator against exact enumeration.
pub fn verify(cfg: &ExperimentConfig) -> Result<VerifyReport, ExperimentError> {
    cfg.validate()?;
    if cfg.experiment == ExperimentKind::Scaling {
        let model = LogicalRateModel::default();
        let rate = model.rate(crate::scaling::CALIBRATION_P, crate::scaling::CALIBRATION_D);
        let ok = (rate / crate::scaling::CALIBRATION_RATE - 1.0).abs() < 1e-9;
        return Ok(VerifyReport {
            checks: vec![Check::new("calibration", ok, format!("P_L = {rate:e}, p_th = {}", model.p_th))],
        });
    }
    let cfg_fixed;
    let cfg = if cfg.experiment == ExperimentKind::Surface && cfg.p_dep.is_none() {
        // verification does not need the calibrated background
        cfg_fixed = ExperimentConfig {
            p_dep: Some(0.0),
            ..cfg.clone()
        };
        &cfg_fixed
    } else {
        cfg
    };
    let prep = prepare(cfg)?;
    let code = &prep.code;
    let mut checks = Vec::new();

    let quiet_sim = Simulator::new(&code.circuit, &NoiseModel::ideal())?;
    let loud = quiet_sim
        .shots(&[], 1000, cfg.seed, 0)
        .iter()
        .filter(|o| o.accepted && code.syndrome(o.bits) != 0)
        .count();
    checks.push(Check::new("ideal_detectors_quiet", loud == 0, format!("{loud} of 1000 shots fired a detector")));

    if code.logical.decoder.is_some() {
        let t = (code.d - 1) / 2;
        let rep = verify_distance(code, &prep.model, t)?;
        checks.push(Check::new(
            "decoder_distance",
            rep.passed(),
            format!("t = {t}: {} patterns over {} locations", rep.patterns, rep.locations),
        ));
    }

    let injection_only = code.noise_model(&NoiseModel::ideal())?;
    let e = leading_order(cfg.effective_d.unwrap_or(code.d));
    match Simulator::new(&code.circuit, &injection_only)
        .and_then(|s| s.polynomial(&prep.decoder, LocationPolicy::InjectionOnly, DEFAULT_BUDGET, Route::Auto))
    {
        Ok(poly) => {
            let coeffs = poly.coeffs();
            let worst = coeffs.iter().skip(1).take(e.saturating_sub(1)).fold(0.0f64, |m, c| m.max(c.abs()));
            checks.push(Check::new(
                "low_order_coefficients_vanish",
                worst < 1e-10,
                format!("max |a_k| for 1 <= k < {e}: {worst:e}"),
            ));
        }
        Err(err) if err.is_capacity() => {
            checks.push(Check::skipped("low_order_coefficients_vanish", err.to_string()));
        }
        Err(err) => return Err(err.into()),
    }

    match Simulator::new(&code.circuit, &prep.model).and_then(|s| s.exact(&prep.decoder, &[], DEFAULT_BUDGET, Route::Auto)) {
        Ok(exact) => {
            let row = estimate_point(&prep, cfg, 1.0, derive_seed(cfg.seed, R_STREAM, 0))?;
            let dev = (row.corrected.mean - exact).abs();
            let tol = 3.0 * row.corrected.stderr;
            checks.push(Check::new(
                "estimator_matches_exact",
                dev <= tol || dev < 1e-12,
                format!("estimate {} ± {} vs exact {exact}", row.corrected.mean, row.corrected.stderr),
            ));
        }
        Err(err) if err.is_capacity() => checks.push(Check::skipped("estimator_matches_exact", err.to_string())),
        Err(err) => return Err(err.into()),
    }
    Ok(VerifyReport { checks })
}
