//! Command-line driver: config ingestion, experiment execution, and
//! machine-readable result emission.
//!
//! All physical-unit handling lives here: the config file speaks in
//! unit-suffixed strings ("200mW", "20MHz", "9dB") and the core library
//! receives only normalized quantities. Exit status: 0 when every requested
//! computation converged, 1 when a numerical diagnostic aborted the run
//! (or would have, without `--keep-going`), 2 for configuration, usage, or
//! I/O errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use cellfree::harness::{
    empirical_cdf, mean, outage_rate, preset_runs, run_experiment, run_experiment_keep_going,
    ExperimentConfig, FailedUnit, PresetId, PresetRun, RateSamples, ReceiverKind,
};
use cellfree::receivers::MfConvention;

/// Uplink cell-free massive MIMO Monte Carlo experiment runner.
#[derive(Parser, Debug)]
#[command(name = "cellfree", version, about)]
struct Cli {
    /// TOML experiment config (see README for the key list).
    #[arg(long, value_name = "FILE", conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Bundled preset family: dense, antenna-sweep, or network-scaling.
    #[arg(long, value_name = "ID")]
    preset: Option<String>,

    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,

    /// Comma-separated receiver labels
    /// (MF, MMSE, PMMSE-smart, PMMSE-random, LSFD, DE-PMMSE).
    #[arg(long, value_delimiter = ',', value_name = "LABELS")]
    receivers: Option<Vec<String>>,

    /// Network-snapshot count override.
    #[arg(long)]
    snapshots: Option<usize>,

    /// Channel-realization count override.
    #[arg(long)]
    realizations: Option<usize>,

    /// Apply max-min power control to the LSFD receiver.
    #[arg(long)]
    power_control: bool,

    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR", default_value = "out")]
    output: PathBuf,

    /// Table format (the manifest is always JSON).
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,

    /// Record failing work units in the manifest and keep running instead
    /// of aborting.
    #[arg(long)]
    keep_going: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let started = Instant::now();
    let runs = resolve_runs(&cli)?;
    fs::create_dir_all(&cli.output)
        .with_context(|| format!("creating output directory {}", cli.output.display()))?;

    let mut manifests = Vec::new();
    let mut summary_rows = Vec::new();
    for run in &runs {
        let run_started = Instant::now();
        let (samples, failures) = if cli.keep_going {
            let outcome = run_experiment_keep_going(&run.config)
                .map_err(|e| anyhow!("{}: {e}", run.label))?;
            (outcome.samples, outcome.failures)
        } else {
            match run_experiment(&run.config) {
                Ok(samples) => (samples, Vec::new()),
                Err(error) => {
                    eprintln!("{}: {error}", run.label);
                    return Ok(ExitCode::FAILURE);
                }
            }
        };
        let dir = cli.output.join(&run.label);
        fs::create_dir_all(&dir)
            .with_context(|| format!("creating run directory {}", dir.display()))?;
        write_samples(&dir, &samples, cli.format)?;
        write_cdfs(&dir, &samples, cli.format)?;
        summary_rows.extend(summarize(run, &samples));
        manifests.push(run_manifest(run, &samples, failures, run_started));
    }

    write_summary(&cli.output, &summary_rows, cli.format)?;
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        format: match cli.format {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
        .to_string(),
        duration_s: started.elapsed().as_secs_f64(),
        runs: manifests,
    };
    let path = cli.output.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(ExitCode::SUCCESS)
}

/// Expands the CLI invocation into labeled experiment configs.
fn resolve_runs(cli: &Cli) -> Result<Vec<PresetRun>> {
    let mut runs = match (&cli.config, &cli.preset) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let file: FileConfig = toml::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?;
            vec![PresetRun {
                label: "custom".to_string(),
                config: file.into_config()?,
            }]
        }
        (None, Some(id)) => preset_runs(id.parse::<PresetId>()?),
        (None, None) => bail!("nothing to run: pass --config FILE or --preset ID"),
        (Some(_), Some(_)) => unreachable!("clap rejects --config with --preset"),
    };
    for run in &mut runs {
        let config = &mut run.config;
        if let Some(seed) = cli.seed {
            config.master_seed = seed;
        }
        if let Some(n) = cli.snapshots {
            config.n_snapshots = n;
        }
        if let Some(n) = cli.realizations {
            config.n_realizations = n;
        }
        if let Some(labels) = &cli.receivers {
            config.receivers = parse_receivers(labels)?;
        }
        if cli.power_control {
            config.power_control = true;
        }
        config.validate()?;
    }
    Ok(runs)
}

fn parse_receivers(labels: &[String]) -> Result<Vec<ReceiverKind>> {
    labels
        .iter()
        .map(|label| {
            ReceiverKind::from_label(label).ok_or_else(|| {
                let valid: Vec<&str> = ReceiverKind::ALL.iter().map(|r| r.label()).collect();
                anyhow!(
                    "receivers: unknown receiver {label:?} (expected one of {})",
                    valid.join(", ")
                )
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Config file schema
// ---------------------------------------------------------------------------

/// The TOML schema. Every key is spelled out here; unknown keys anywhere are
/// rejected. Only the network dimensions are mandatory.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    m: usize,
    k: usize,
    tau: usize,
    snapshots: Option<usize>,
    realizations: Option<usize>,
    seed: Option<u64>,
    power_control: Option<bool>,
    receivers: Option<Vec<String>>,
    /// "all-ones" (default) or "index-ramp".
    mf_convention: Option<String>,
    area: Option<AreaSection>,
    path_loss: Option<PathLossSection>,
    shadowing: Option<ShadowingSection>,
    radio: Option<RadioSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AreaSection {
    side_km: Option<f64>,
    wrap: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathLossSection {
    /// Carrier frequency, e.g. "1900MHz".
    frequency: Option<String>,
    base_station_height_m: Option<f64>,
    receiver_height_m: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShadowingSection {
    sigma_db: Option<f64>,
    split_delta: Option<f64>,
    d_decorr_km: Option<f64>,
    corr_base: Option<f64>,
    independent: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RadioSection {
    /// e.g. "200mW" or "0.2W".
    transmit_power: Option<String>,
    /// e.g. "20MHz".
    bandwidth: Option<String>,
    /// e.g. "9dB".
    noise_figure: Option<String>,
    ref_temperature_k: Option<f64>,
}

impl FileConfig {
    fn into_config(self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::new(self.m, self.k, self.tau);
        if let Some(n) = self.snapshots {
            config.n_snapshots = n;
        }
        if let Some(n) = self.realizations {
            config.n_realizations = n;
        }
        if let Some(seed) = self.seed {
            config.master_seed = seed;
        }
        if let Some(flag) = self.power_control {
            config.power_control = flag;
        }
        if let Some(labels) = &self.receivers {
            config.receivers = parse_receivers(labels)?;
        }
        if let Some(name) = &self.mf_convention {
            config.mf_convention = match name.as_str() {
                "all-ones" => MfConvention::AllOnes,
                "index-ramp" => MfConvention::IndexRamp,
                other => bail!(
                    "mf_convention: unknown value {other:?} (expected \"all-ones\" or \"index-ramp\")"
                ),
            };
        }
        if let Some(area) = self.area {
            if let Some(side) = area.side_km {
                config.area.side_km = side;
            }
            if let Some(wrap) = area.wrap {
                config.area.wrap = wrap;
            }
        }
        if let Some(pl) = self.path_loss {
            let f_mhz = match &pl.frequency {
                Some(s) => parse_unit(s, "path_loss.frequency", &[("GHz", 1e3), ("MHz", 1.0)])?,
                None => 1900.0,
            };
            let h_b = pl.base_station_height_m.unwrap_or(15.0);
            let h_r = pl.receiver_height_m.unwrap_or(1.65);
            config.path_loss = cellfree::network::PathLossParams::from_cost231(f_mhz, h_b, h_r);
        }
        if let Some(sh) = self.shadowing {
            if let Some(v) = sh.sigma_db {
                config.shadowing.sigma_db = v;
            }
            if let Some(v) = sh.split_delta {
                config.shadowing.split_delta = v;
            }
            if let Some(v) = sh.d_decorr_km {
                config.shadowing.d_decorr_km = v;
            }
            if let Some(v) = sh.corr_base {
                config.shadowing.corr_base = v;
            }
            if let Some(v) = sh.independent {
                config.shadowing.independent = v;
            }
        }
        if let Some(radio) = self.radio {
            if let Some(s) = &radio.transmit_power {
                config.noise.tx_power_w =
                    parse_unit(s, "radio.transmit_power", &[("mW", 1e-3), ("W", 1.0)])?;
            }
            if let Some(s) = &radio.bandwidth {
                config.noise.bandwidth_hz = parse_unit(
                    s,
                    "radio.bandwidth",
                    &[("GHz", 1e9), ("MHz", 1e6), ("kHz", 1e3), ("Hz", 1.0)],
                )?;
            }
            if let Some(s) = &radio.noise_figure {
                config.noise.noise_figure_db =
                    parse_unit(s, "radio.noise_figure", &[("dB", 1.0)])?;
            }
            if let Some(t) = radio.ref_temperature_k {
                config.noise.ref_temperature_k = t;
            }
        }
        config.validate()?;
        Ok(config)
    }
}

/// Parses "200mW"-style values: a number followed by one of the accepted
/// unit suffixes, each with its scale to the canonical unit. Longer suffixes
/// are matched first so "MHz" is never read as "Hz".
fn parse_unit(text: &str, field: &str, units: &[(&str, f64)]) -> Result<f64> {
    let trimmed = text.trim();
    let mut by_length: Vec<&(&str, f64)> = units.iter().collect();
    by_length.sort_by_key(|(suffix, _)| std::cmp::Reverse(suffix.len()));
    for (suffix, scale) in by_length {
        if let Some(number) = trimmed.strip_suffix(suffix) {
            let value: f64 = number.trim().parse().map_err(|_| {
                anyhow!("{field}: cannot parse number in {text:?} (before {suffix:?})")
            })?;
            return Ok(value * scale);
        }
    }
    let expected: Vec<&str> = units.iter().map(|(s, _)| *s).collect();
    bail!(
        "{field}: missing or unknown unit in {text:?} (expected a suffix of {})",
        expected.join(", ")
    )
}

// ---------------------------------------------------------------------------
// Output emission
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Manifest {
    tool_version: String,
    format: String,
    duration_s: f64,
    runs: Vec<RunManifest>,
}

#[derive(Serialize)]
struct RunManifest {
    label: String,
    config: ExperimentConfig,
    /// Receiver noise power the normalization divided by, in watts.
    noise_variance_w: f64,
    /// Transmit SNR the core modules ran at: tx_power_w / noise_variance_w.
    normalized_rho: f64,
    receivers: Vec<ReceiverManifest>,
    failures: Vec<FailedUnit>,
    duration_s: f64,
}

#[derive(Serialize)]
struct ReceiverManifest {
    receiver: String,
    n_samples: usize,
    n_infinite: usize,
    n_failed: usize,
}

#[derive(Serialize)]
struct SummaryRow {
    run: String,
    receiver: String,
    outage_rate: f64,
    mean_rate: f64,
    n_samples: usize,
    seed: u64,
}

#[derive(Serialize)]
struct SampleRow<'a> {
    receiver: &'a str,
    user: usize,
    snapshot: usize,
    rate: f64,
}

#[derive(Serialize)]
struct CdfRow<'a> {
    receiver: &'a str,
    rate: f64,
    cdf: f64,
}

fn run_manifest(
    run: &PresetRun,
    samples: &RateSamples,
    failures: Vec<FailedUnit>,
    started: Instant,
) -> RunManifest {
    RunManifest {
        label: run.label.clone(),
        config: run.config.clone(),
        noise_variance_w: run.config.noise.noise_variance_w(),
        normalized_rho: run.config.noise.normalized_rho(),
        receivers: samples
            .per_receiver
            .iter()
            .map(|r| ReceiverManifest {
                receiver: r.receiver.label().to_string(),
                n_samples: r.pool().len(),
                n_infinite: r.n_infinite(),
                n_failed: r.n_failed(),
            })
            .collect(),
        failures,
        duration_s: started.elapsed().as_secs_f64(),
    }
}

fn summarize(run: &PresetRun, samples: &RateSamples) -> Vec<SummaryRow> {
    samples
        .per_receiver
        .iter()
        .map(|r| {
            let pool = r.pool();
            SummaryRow {
                run: run.label.clone(),
                receiver: r.receiver.label().to_string(),
                outage_rate: outage_rate(&pool, 0.05).unwrap_or(f64::NAN),
                mean_rate: mean(&pool).unwrap_or(f64::NAN),
                n_samples: pool.len(),
                seed: run.config.master_seed,
            }
        })
        .collect()
}

/// Per-sample table: one row per finite (receiver, snapshot, user) rate.
/// Skipped units are listed in the manifest instead; diverged (+inf)
/// predictor values are counted in the manifest.
fn write_samples(dir: &Path, samples: &RateSamples, format: OutputFormat) -> Result<()> {
    let mut rows = Vec::new();
    for r in &samples.per_receiver {
        for snapshot in 0..samples.n_snapshots {
            for user in 0..samples.n_users {
                let rate = r.samples[snapshot * samples.n_users + user];
                if rate.is_finite() {
                    rows.push(SampleRow {
                        receiver: r.receiver.label(),
                        user,
                        snapshot,
                        rate,
                    });
                }
            }
        }
    }
    match format {
        OutputFormat::Csv => {
            let mut text = String::from("receiver,user,snapshot,rate\n");
            for row in &rows {
                writeln!(
                    text,
                    "{},{},{},{}",
                    row.receiver, row.user, row.snapshot, row.rate
                )?;
            }
            write_file(dir.join("samples.csv"), &text)
        }
        OutputFormat::Json => write_file(dir.join("samples.json"), &to_json(&rows)?),
    }
}

/// Empirical CDF of each receiver's pooled per-user rates.
fn write_cdfs(dir: &Path, samples: &RateSamples, format: OutputFormat) -> Result<()> {
    let mut rows: Vec<CdfRow> = Vec::new();
    for r in &samples.per_receiver {
        let pool = r.pool();
        if pool.is_empty() {
            continue;
        }
        let cdf = empirical_cdf(&pool).expect("pool is nonempty");
        for (x, p) in cdf.xs.iter().zip(&cdf.ps) {
            rows.push(CdfRow {
                receiver: r.receiver.label(),
                rate: *x,
                cdf: *p,
            });
        }
    }
    match format {
        OutputFormat::Csv => {
            let mut text = String::from("receiver,rate,cdf\n");
            for row in &rows {
                writeln!(text, "{},{},{}", row.receiver, row.rate, row.cdf)?;
            }
            write_file(dir.join("cdf.csv"), &text)
        }
        OutputFormat::Json => write_file(dir.join("cdf.json"), &to_json(&rows)?),
    }
}

fn write_summary(dir: &Path, rows: &[SummaryRow], format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut text = String::from("run,receiver,outage_rate,mean_rate,n_samples,seed\n");
            for row in rows {
                writeln!(
                    text,
                    "{},{},{},{},{},{}",
                    row.run, row.receiver, row.outage_rate, row.mean_rate, row.n_samples, row.seed
                )?;
            }
            write_file(dir.join("summary.csv"), &text)
        }
        OutputFormat::Json => write_file(dir.join("summary.json"), &to_json(rows)?),
    }
}

fn to_json<T: Serialize>(rows: &[T]) -> Result<String> {
    Ok(serde_json::to_string_pretty(rows)?)
}

fn write_file(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}
