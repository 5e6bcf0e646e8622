use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use vec_offload::baselines::Scheme;
use vec_offload::config::{parse_f64, ScenarioConfig};
use vec_offload::federated::GlobalModelStore;
use vec_offload::nn::Checkpoint;
use vec_offload::output::{self, SweepAxis};
use vec_offload::sim;
use vec_offload::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Train,
    Test,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Fgnn,
    Gfsac,
    Lfsac,
    Gdbr,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Fgnn => Scheme::Fgnn,
            SchemeArg::Gfsac => Scheme::Gfsac,
            SchemeArg::Lfsac => Scheme::Lfsac,
            SchemeArg::Gdbr => Scheme::Gdbr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AxisArg {
    Lambda,
    Speed,
}

/// Vehicular edge computing AoI simulator with federated SAC power control.
#[derive(Debug, Parser)]
#[command(name = "vec-offload", version)]
struct Cli {
    /// `key = value` config file applied on top of the desk-scale preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scheme to run; a sweep without it covers all four.
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Seeds per sweep point, counting up from `--seed`.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Slots of the selected stage (training slots for train and sweep).
    #[arg(long)]
    slots: Option<usize>,
    /// Road segment length, m.
    #[arg(long)]
    lg: Option<f64>,
    /// Total vehicle arrival rate, vehicles/s (fractions such as 1/8 accepted).
    #[arg(long, value_parser = number)]
    lambda: Option<f64>,
    /// Speed of every lane, m/s.
    #[arg(long)]
    speed: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "train")]
    mode: Mode,
    #[arg(long, value_enum)]
    sweep_axis: Option<AxisArg>,
    /// Comma-separated axis values.
    #[arg(long)]
    sweep_values: Option<String>,
    /// Global-model checkpoint: written by train, read by test.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

fn number(raw: &str) -> std::result::Result<f64, String> {
    parse_f64(raw)
}

fn build_config(cli: &Cli) -> Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::load(path, ScenarioConfig::desk_scale())?,
        None => ScenarioConfig::desk_scale(),
    };
    if let Some(lg) = cli.lg {
        cfg.segment_len = lg;
    }
    if let Some(l) = cli.lambda {
        cfg.arrival_rate = l;
        cfg.lane_arrival_rates.clear();
    }
    if let Some(v) = cli.speed {
        cfg.set_uniform_speed(v);
    }
    if let Some(n) = cli.slots {
        match cli.mode {
            Mode::Test => cfg.test_slots = n,
            Mode::Train | Mode::Sweep => cfg.train_slots = n,
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = build_config(cli)?;
    let scheme: Scheme = cli.scheme.map(Into::into).unwrap_or(Scheme::Fgnn);
    let ckpt = cli
        .checkpoint
        .clone()
        .unwrap_or_else(|| cli.out.join("model.ckpt"));
    match cli.mode {
        Mode::Train => {
            let t = sim::run_training(&cfg, scheme, cli.seed)?;
            output::emit_results(&t.records, &t.summary, &cfg, &cli.out, "train_")?;
            t.store.to_checkpoint().save(&ckpt)?;
            std::fs::write(cli.out.join("config.txt"), cfg.to_text())
                .map_err(|e| Error::io(&cli.out, e))?;
            println!(
                "train {scheme} seed {}: avg AoI {:.4} s",
                cli.seed, t.summary.avg_aoi
            );
        }
        Mode::Test => {
            let store = if ckpt.exists() {
                GlobalModelStore::from_checkpoint(&Checkpoint::load(&ckpt)?)?
            } else {
                let t = sim::run_training(&cfg, scheme, cli.seed)?;
                output::emit_results(&t.records, &t.summary, &cfg, &cli.out, "train_")?;
                t.store
            };
            let (summary, records) = sim::run_test(&cfg, scheme, cli.seed, &store)?;
            output::emit_results(&records, &summary, &cfg, &cli.out, "test_")?;
            println!(
                "test {scheme} seed {}: avg AoI {:.4} s",
                cli.seed, summary.avg_aoi
            );
        }
        Mode::Sweep => {
            let axis = match cli.sweep_axis {
                Some(AxisArg::Lambda) | None => SweepAxis::Lambda,
                Some(AxisArg::Speed) => SweepAxis::Speed,
            };
            let raw = cli
                .sweep_values
                .as_deref()
                .ok_or_else(|| Error::Invalid("--sweep-values is required in sweep mode".into()))?;
            let values = raw
                .split(',')
                .map(|v| parse_f64(v).map_err(|e| Error::Invalid(format!("--sweep-values: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            let schemes: Vec<Scheme> = match cli.scheme {
                Some(s) => vec![s.into()],
                None => Scheme::ALL.to_vec(),
            };
            let seeds: Vec<u64> = (cli.seed..cli.seed + cli.seeds.max(1)).collect();
            let rows = output::sweep(&cfg, axis, &values, &schemes, &seeds)?;
            output::emit_sweep(&rows, &cli.out)?;
            println!("sweep over {}: {} rows", axis.name(), rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
