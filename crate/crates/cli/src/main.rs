use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use qec_zne::circuit::serialize_circuit;
use qec_zne::decoder::verify_distance;
use qec_zne::experiment::{
    prepare, read_points_csv, run_and_write, run_multiround, verify, write_artifacts, ExperimentConfig, ExperimentError,
    ExperimentKind,
};
use qec_zne::zne::{scan_delta_eta, write_scan_csv};

const EXIT_CONFIG: u8 = 2;
const EXIT_CAPACITY: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(name = "qec-zne", version, about = "Zero-noise extrapolation on error-corrected circuits")]
struct Cli {
    /// Worker thread cap; all cores by default.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON experiment config; defaults apply when omitted.
    config: Option<PathBuf>,
    /// Field override, `key=value` with a JSON or bare string value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, ExperimentError> {
        match &self.config {
            Some(path) => ExperimentConfig::load(path, &self.overrides),
            None => ExperimentConfig::from_json("", &self.overrides),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write points, scans and a manifest.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the fixed-total-rate family for rounds 1 to 4.
    Multiround {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the checks reachable at the config's scale.
    Verify {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Extrapolate every subset of a points file.
    Scan {
        points: PathBuf,
        /// Effective code distance of the series.
        #[arg(long, short)]
        d: usize,
        /// Extrapolation orders.
        #[arg(long = "K", value_delimiter = ',', default_value = "1,2,3")]
        k: Vec<usize>,
        /// Noiseless value of the observable.
        #[arg(long, default_value_t = 1.0)]
        ideal: f64,
        /// Scan the uncorrected series instead of the corrected one.
        #[arg(long)]
        uncorrected: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Large-scale projection sweep.
    Scaling {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive decoding of every fault pattern up to weight t.
    DecodeCheck {
        #[command(flatten)]
        config: ConfigArgs,
        /// Fault weight; (d-1)/2 by default.
        #[arg(long)]
        t: Option<usize>,
    },
    /// Write the circuit, detectors, decoder graph and code summary.
    ExportCircuit {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Verification,
    Experiment(ExperimentError),
    Other(anyhow::Error),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        Failure::Experiment(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.into())
    }
}

fn write_or_print(out: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            print!("{}", String::from_utf8_lossy(bytes));
            Ok(())
        }
    }
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config, out } => {
            let mut cfg = config.load()?;
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let (_, paths) = run_and_write(&cfg)?;
            for p in paths {
                println!("{}", p.display());
            }
        }
        Command::Multiround { config, out } => {
            let mut cfg = config.load()?;
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let (_, paths) = run_multiround(&cfg)?;
            for p in paths {
                println!("{}", p.display());
            }
        }
        Command::Verify { config } => {
            let report = verify(&config.load()?)?;
            for c in &report.checks {
                println!("{}", c.line());
            }
            if !report.passed() {
                return Err(Failure::Verification);
            }
        }
        Command::Scan {
            points,
            d,
            k,
            ideal,
            uncorrected,
            out,
        } => {
            let (corr, raw) = read_points_csv(&points, 1)?;
            let series = if uncorrected { raw } else { corr };
            let ks: Vec<usize> = k.into_iter().filter(|&k| k >= 1 && k < series.len()).collect();
            let rows = scan_delta_eta(&series, d, &ks, ideal).map_err(ExperimentError::from)?;
            let mut buf = Vec::new();
            write_scan_csv(&mut buf, &rows)?;
            write_or_print(out.as_deref(), &buf)?;
        }
        Command::Scaling { config, out } => {
            let mut cfg = config.load()?;
            cfg.experiment = ExperimentKind::Scaling;
            let result = qec_zne::experiment::run_experiment(&cfg)?;
            match out {
                Some(dir) => {
                    for p in write_artifacts(&result, &dir)? {
                        println!("{}", p.display());
                    }
                }
                None => {
                    let mut buf = Vec::new();
                    qec_zne::scaling::write_scaling_csv(&mut buf, &result.scaling).map_err(ExperimentError::from)?;
                    write_or_print(None, &buf)?;
                }
            }
        }
        Command::DecodeCheck { config, t } => {
            let mut cfg = config.load()?;
            cfg.p_dep.get_or_insert(0.0);
            let prep = prepare(&cfg)?;
            if prep.code.logical.decoder.is_none() {
                return Err(ExperimentError::Config(format!("{} has no decoder", prep.code.name)).into());
            }
            let t = t.unwrap_or((prep.code.d - 1) / 2);
            let rep = verify_distance(&prep.code, &prep.model, t).map_err(ExperimentError::from)?;
            println!(
                "{} {}: t={t} patterns={} locations={} min_failing_weight={}",
                if rep.passed() { "PASS" } else { "FAIL" },
                prep.code.name,
                rep.patterns,
                rep.locations,
                rep.min_failing_weight.map_or("none".into(), |w| w.to_string())
            );
            if !rep.passed() {
                return Err(Failure::Verification);
            }
        }
        Command::ExportCircuit { config, out } => {
            let mut cfg = config.load()?;
            cfg.p_dep.get_or_insert(0.0);
            let prep = prepare(&cfg)?;
            let code = &prep.code;
            fs::create_dir_all(&out)?;
            let mut detectors = code.detectors_text();
            detectors.push_str(&code.logical_line());
            detectors.push('\n');
            let mut summary = serde_json::to_string_pretty(&code.manifest()).map_err(anyhow::Error::from)?;
            summary.push('\n');
            let mut files = vec![
                ("circuit.circ", serialize_circuit(&code.circuit)),
                ("uncorrected.circ", serialize_circuit(&code.uncorrected_circuit())),
                ("detectors.txt", detectors),
                ("code.json", summary),
            ];
            if let Some(g) = prep.decoder.graph() {
                files.push(("decoder_graph.txt", g.to_text()));
            }
            for (name, text) in files {
                let p = out.join(name);
                fs::write(&p, text)?;
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(EXIT_VERIFY),
        Err(Failure::Experiment(e)) => {
            eprintln!("error: {e}");
            if e.is_capacity() {
                ExitCode::from(EXIT_CAPACITY)
            } else if e.is_config() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::FAILURE
            }
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
