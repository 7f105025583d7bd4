//! Command-line front end: configuration loading, the worker pool and artifact output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use crate::basis::{composite_dimension, estimate_dimension};
use crate::config::{preset, RunFile};
use crate::error::{Error, Result};
use crate::hamiltonian::Assembler;
use crate::observables::{band_structure_at, dielectric_t0_with, write_header, Header};
use crate::oracle::run_conformance;
use crate::solve::SolverMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Band structure along the configured path, written to bands.csv.
    Bands,
    /// Zero-temperature dielectric matrix, written to dielectric.csv.
    Dielectric,
    /// Conformance checks against the reference oracle, written to conformance.json.
    Check,
    /// Resolved configuration and block dimension, without computing anything.
    Info,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "blochkit", version, about = "Bloch-block exciton polaron-polariton calculations")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON configuration document.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Shipped preset to use instead of a configuration file.
    #[arg(long)]
    pub preset: Option<String>,
    /// Worker threads for the K-point sweep.
    #[arg(long, env = "BLOCHKIT_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, default_value = ".")]
    pub output: PathBuf,
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// False only when `check` found a failing check.
    pub passed: bool,
    pub summary: String,
}

fn load(cli: &Cli) -> Result<Option<RunFile>> {
    match (&cli.config, &cli.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            RunFile::parse(&text).map(Some).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
        (None, Some(name)) => preset(name).map(Some),
        (None, None) => Ok(None),
    }
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok((path, BufWriter::new(f)))
}

#[derive(Serialize)]
struct SolverSummary {
    dense_points: usize,
    lanczos_points: usize,
    davidson_points: usize,
    max_iterations: usize,
    max_residual: f64,
}

/// Runs one command. Errors are configuration, validation or numerical failures.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let workers = cli.workers.unwrap_or(1);
    if workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    std::fs::create_dir_all(&cli.output)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", cli.output.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    let run = load(cli)?;
    if cli.command == Command::Check {
        let mu = match &run {
            Some(r) => r.model.build()?.exciton.reduced_mass,
            None => 0.15,
        };
        let report = pool.install(|| run_conformance(mu, true))?;
        let path = cli.output.join("conformance.json");
        report.write_json(&path)?;
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        let summary = if failed.is_empty() {
            format!("{} checks passed", report.checks.len())
        } else {
            format!("{} of {} checks failed: {}", failed.len(), report.checks.len(), failed.join("; "))
        };
        return Ok(Outcome { files: vec![path], passed: failed.is_empty(), summary });
    }
    let run = run.ok_or_else(|| Error::Config("this command needs --config or --preset".into()))?;
    let expanded = run.expanded()?;
    let model = run.model.build()?;
    let (config_path, mut w) = create(&cli.output, "config.expanded.json")?;
    w.write_all(expanded.to_json()?.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()?;
    let mut files = vec![config_path];

    let mut header = Header::new();
    header.add("command", &format!("{:?}", cli.command).to_lowercase())?;
    header.add("config", &expanded)?;
    header.add("te_polarization", "theta_q + pi/2")?;

    let summary = match cli.command {
        Command::Info => {
            let dim = estimate_dimension(&model.truncation, &model)?;
            let basis = composite_dimension(&model.truncation, &model).map(|b| b.summary());
            let (path, mut w) = create(&cli.output, "info.json")?;
            let info = serde_json::json!({
                "dimension": dim.to_string(),
                "dimension_cap": model.truncation.dimension_cap,
                "basis": basis.as_ref().ok(),
                "refusal": basis.as_ref().err().map(|e| e.to_string()),
                "photon_modes": model.photons.len(),
                "phonon_modes": model.phonons.len(),
            });
            w.write_all(serde_json::to_string_pretty(&info)?.as_bytes())?;
            w.write_all(b"\n")?;
            w.flush()?;
            files.push(path);
            format!("block dimension {dim}")
        }
        Command::Bands => {
            let basis = Arc::new(composite_dimension(&model.truncation, &model)?);
            let summary = basis.summary();
            let asm = Assembler::new(&model, basis)?;
            let samples = run.bands.path.sample(model.exciton.b1, model.exciton.b2)?;
            let table = pool.install(|| band_structure_at(&asm, &samples, run.bands.nbands, run.bands.tol))?;
            let metas: Vec<_> = table.points.iter().map(|p| &p.meta).collect();
            header.add("basis", &summary)?;
            header.add(
                "solver",
                &SolverSummary {
                    dense_points: metas.iter().filter(|m| m.method == SolverMethod::Dense).count(),
                    lanczos_points: metas.iter().filter(|m| m.method == SolverMethod::Lanczos).count(),
                    davidson_points: metas.iter().filter(|m| m.method == SolverMethod::Davidson).count(),
                    max_iterations: metas.iter().map(|m| m.iterations).max().unwrap_or(0),
                    max_residual: metas.iter().flat_map(|m| m.residuals.iter().copied()).fold(0.0, f64::max),
                },
            )?;
            let (path, mut w) = create(&cli.output, "bands.csv")?;
            write_header(&mut w, &header)?;
            table.write_csv(&mut w)?;
            w.flush()?;
            files.push(path);
            format!("{} K-points x {} bands, dimension {}", table.points.len(), table.nbands, summary.dim)
        }
        Command::Dielectric => {
            let omega = run.dielectric.omega.values()?;
            let basis = composite_dimension(&model.truncation, &model)?.summary();
            let table = pool.install(|| dielectric_t0_with(&model, &omega, &run.dielectric.options))?;
            header.add("basis", &basis)?;
            header.add("method", &table.method)?;
            header.add("eta_au", &table.eta)?;
            header.add("ground_energy_au", &table.ground_energy)?;
            header.add("transitions", &table.transitions.len())?;
            header.add("solver", &table.meta)?;
            header.add("warnings", &table.warnings)?;
            let (path, mut w) = create(&cli.output, "dielectric.csv")?;
            write_header(&mut w, &header)?;
            table.write_csv(&mut w)?;
            w.flush()?;
            files.push(path);
            let (path, mut w) = create(&cli.output, "transitions.csv")?;
            write_header(&mut w, &header)?;
            table.write_transitions_csv(&mut w)?;
            w.flush()?;
            files.push(path);
            let mut s = format!("{} frequencies, {} transitions", table.omega.len(), table.transitions.len());
            for warning in &table.warnings {
                s.push_str(&format!("\nwarning: {warning}"));
            }
            s
        }
        Command::Check => unreachable!(),
    };
    Ok(Outcome { files, passed: true, summary })
}
