//! Command-line front end: `generate`, `extract`, `run` and `report`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gapbench::harness::{
    emit_report, extract_for, load_source, read_report, run_experiment, DatasetSource, ExperimentConfig, ReportFormat,
};
use gapbench::io::{read_json, write_dataset, write_manifest, write_scenes};
use gapbench::synthgen::{generate, GeneratorConfig};

/// Only the output directory may be overridden from the environment.
const OUT_ENV: &str = "GAPBENCH_OUT";

/// Exit status when the run completed but some grid cells failed.
const CELLS_FAILED: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "gapbench", version, about = "Gap-acceptance prediction benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic scenes from a generator or experiment config.
    Generate(Common),
    /// Extract the sample datasets of an experiment without training.
    Extract(Common),
    /// Run the full experiment grid and write the report.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Format::Json, Format::Csv])]
        format: Vec<Format>,
    },
    /// Re-render an existing report.json.
    Report {
        /// Path of a previously written report.json.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Format::Csv])]
        format: Vec<Format>,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace every seed in the config with this value.
    #[arg(long)]
    seed_override: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

fn output_dir(flag: Option<&Path>, fallback: &Path) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => fallback.to_path_buf(),
    }
}

fn load_experiment(common: &Common) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::from_file(&common.config)
        .with_context(|| format!("reading experiment config {}", common.config.display()))?;
    if let Some(seed) = common.seed_override {
        config.override_seed(seed);
    }
    config.validate()?;
    Ok(config)
}

fn write_generated(cfg: &GeneratorConfig, dir: &Path) -> Result<usize> {
    let generated = generate::<f64>(cfg)?;
    write_scenes(dir, &generated.scenes)?;
    write_manifest(dir, &generated.truth)?;
    Ok(generated.scenes.len())
}

fn cmd_generate(common: &Common) -> Result<()> {
    let raw: serde_json::Value = read_json(&common.config)?;
    if raw.get("datasets").is_some() {
        let config = load_experiment(common)?;
        let root = output_dir(common.out.as_deref(), &config.output_dir).join("scenes");
        let mut any = false;
        for entry in &config.datasets {
            if let DatasetSource::Generator { config: g } = &entry.source {
                let n = write_generated(g, &root.join(&entry.name))?;
                eprintln!("{}: {n} scenes", entry.name);
                any = true;
            }
        }
        if !any {
            bail!("experiment config has no generator datasets");
        }
    } else {
        let mut cfg: GeneratorConfig = serde_json::from_value(raw)
            .with_context(|| format!("parsing generator config {}", common.config.display()))?;
        if let Some(seed) = common.seed_override {
            cfg.seed = seed;
        }
        let dir = output_dir(common.out.as_deref(), Path::new("gapbench-out/scenes"));
        let n = write_generated(&cfg, &dir)?;
        eprintln!("{n} scenes written to {}", dir.display());
    }
    Ok(())
}

fn cmd_extract(common: &Common) -> Result<()> {
    let config = load_experiment(common)?;
    let root = output_dir(common.out.as_deref(), &config.output_dir).join("datasets");
    let hash = config.hash()?;
    for entry in &config.datasets {
        let scenes = load_source(entry).with_context(|| format!("loading dataset {}", entry.name))?;
        for policy in &config.policies {
            for &n_inputs in &config.n_inputs {
                let dataset = extract_for(&config, &scenes, *policy, n_inputs)?;
                let dir = root.join(&entry.name).join(format!("{}-n{n_inputs}", policy.name()));
                write_dataset(&dir, &dataset, &hash)?;
                eprintln!(
                    "{} {} n_I={n_inputs}: {} samples ({} scenes excluded)",
                    entry.name,
                    policy.name(),
                    dataset.samples.len(),
                    dataset.stats.excluded.values().sum::<usize>(),
                );
            }
        }
    }
    Ok(())
}

fn cmd_run(common: &Common, formats: &[Format]) -> Result<ExitCode> {
    let config = load_experiment(common)?;
    let dir = output_dir(common.out.as_deref(), &config.output_dir);
    let report = run_experiment(&config)?;
    let formats: Vec<ReportFormat> = formats.iter().map(|&f| f.into()).collect();
    for p in emit_report(&report, &dir, &formats)? {
        eprintln!("wrote {}", p.display());
    }
    let failed = report.failed_cells();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed", report.cells.len());
        return Ok(ExitCode::from(CELLS_FAILED));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(input: &Path, out: Option<&Path>, formats: &[Format]) -> Result<ExitCode> {
    let report = read_report(input)?;
    let fallback = input.parent().unwrap_or(Path::new("."));
    let dir = output_dir(out, fallback);
    let formats: Vec<ReportFormat> = formats.iter().map(|&f| f.into()).collect();
    for p in emit_report(&report, &dir, &formats)? {
        eprintln!("wrote {}", p.display());
    }
    eprintln!("config hash {}", report.config_hash);
    if report.all_ok() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(CELLS_FAILED))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(c) => cmd_generate(c).map(|_| ExitCode::SUCCESS),
        Command::Extract(c) => cmd_extract(c).map(|_| ExitCode::SUCCESS),
        Command::Run { common, format } => cmd_run(common, format),
        Command::Report { input, out, format } => cmd_report(input, out.as_deref(), format),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
