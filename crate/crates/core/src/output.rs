//! Result files: per-slot CSV, run summary, plot data and sweep tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::baselines::Scheme;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::sim::{self, MetricsRecord, RunSummary};

pub const RECORDS_HEADER: &str = "slot,avg_aoi,avg_power,delivered_bits,n_vehicles,mean_reward";
pub const SWEEP_HEADER: &str = "axis_value,scheme,seed,avg_aoi,avg_power,throughput";
pub const CURVE_HEADER: &str = "slot,seconds,avg_aoi,avg_aoi_ma,avg_power,throughput";
pub const SWEEP_PLOT_HEADER: &str = "axis_value,scheme,seeds,avg_aoi,avg_power,throughput";

/// Window of the moving average in the learning-curve file, slots.
pub const CURVE_WINDOW: usize = 1000;

pub fn records_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{:?},{:?},{:?},{},{:?}",
            r.slot, r.avg_aoi, r.avg_power, r.delivered_bits, r.n_vehicles, r.mean_reward
        );
    }
    out
}

/// Parses a records CSV written by [`records_csv`].
pub fn parse_records_csv(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(RECORDS_HEADER) {
        return Err(Error::invalid("records CSV header mismatch"));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let bad = || Error::invalid(format!("bad records row `{l}`"));
            if f.len() != 6 {
                return Err(bad());
            }
            Ok(MetricsRecord {
                slot: f[0].parse().map_err(|_| bad())?,
                avg_aoi: f[1].parse().map_err(|_| bad())?,
                avg_power: f[2].parse().map_err(|_| bad())?,
                delivered_bits: f[3].parse().map_err(|_| bad())?,
                n_vehicles: f[4].parse().map_err(|_| bad())?,
                mean_reward: f[5].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Structured `key = value` summary, grouped in sections.
pub fn summary_text(s: &RunSummary) -> String {
    let c = &s.counters;
    let mut out = String::new();
    let _ = writeln!(out, "[run]");
    let _ = writeln!(out, "scheme = {}", s.scheme);
    let _ = writeln!(out, "stage = {}", s.stage.name());
    let _ = writeln!(out, "seed = {}", s.seed);
    let _ = writeln!(out, "config_sha256 = {}", s.config_hash);
    let _ = writeln!(out, "slots = {}", s.slots);
    let _ = writeln!(out, "wall_seconds = {:.3}", s.wall_seconds);
    let _ = writeln!(out, "\n[averages]");
    let _ = writeln!(out, "avg_aoi = {:?}", s.avg_aoi);
    let _ = writeln!(out, "avg_power = {:?}", s.avg_power);
    let _ = writeln!(out, "avg_delivered_bits = {:?}", s.avg_delivered_bits);
    let _ = writeln!(out, "throughput = {:?}", s.throughput);
    let _ = writeln!(out, "avg_vehicles = {:?}", s.avg_vehicles);
    let _ = writeln!(out, "avg_reward = {:?}", s.avg_reward);
    let _ = writeln!(out, "\n[events]");
    let _ = writeln!(out, "arrivals = {}", c.arrivals);
    let _ = writeln!(out, "departures = {}", c.departures);
    let _ = writeln!(out, "tasks = {}", c.tasks);
    let _ = writeln!(out, "delivered_tasks = {}", c.delivered_tasks);
    let _ = writeln!(out, "uploads = {}", c.uploads);
    let _ = writeln!(out, "local_train_rounds = {}", c.local_train_rounds);
    let _ = writeln!(out, "local_aggregations = {}", c.local_aggregations);
    let _ = writeln!(out, "global_aggregations = {}", c.global_aggregations);
    let _ = writeln!(out, "gnn_rounds = {}", c.gnn_rounds);
    let _ = writeln!(out, "store_version = {}", s.store_version);
    out
}

/// Learning-curve plot data; time is given both in slots and seconds.
pub fn curve_csv(records: &[MetricsRecord], slot_seconds: f64) -> String {
    let mut out = String::new();
    out.push_str(CURVE_HEADER);
    out.push('\n');
    let mut window_sum = 0.0;
    for (i, r) in records.iter().enumerate() {
        window_sum += r.avg_aoi;
        if i >= CURVE_WINDOW {
            window_sum -= records[i - CURVE_WINDOW].avg_aoi;
        }
        let ma = window_sum / (i + 1).min(CURVE_WINDOW) as f64;
        let _ = writeln!(
            out,
            "{},{:?},{:?},{:?},{:?},{:?}",
            r.slot,
            r.slot as f64 * slot_seconds,
            r.avg_aoi,
            ma,
            r.avg_power,
            r.delivered_bits / slot_seconds
        );
    }
    out
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Writes `<prefix>records.csv`, `<prefix>summary.txt` and `<prefix>curve.csv` into `dir`.
pub fn emit_results(
    records: &[MetricsRecord],
    summary: &RunSummary,
    cfg: &ScenarioConfig,
    dir: &Path,
    prefix: &str,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, &format!("{prefix}records.csv"), &records_csv(records))?;
    write(dir, &format!("{prefix}summary.txt"), &summary_text(summary))?;
    write(
        dir,
        &format!("{prefix}curve.csv"),
        &curve_csv(records, cfg.slot),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Lambda,
    Speed,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Lambda => "lambda",
            SweepAxis::Speed => "speed",
        }
    }

    /// `cfg` with the axis set to `value` (total arrival rate, or speed of every lane).
    pub fn apply(self, cfg: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut c = cfg.clone();
        match self {
            SweepAxis::Lambda => {
                c.arrival_rate = value;
                c.lane_arrival_rates.clear();
            }
            SweepAxis::Speed => c.set_uniform_speed(value),
        }
        c
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(SweepAxis::Lambda),
            "speed" => Ok(SweepAxis::Speed),
            _ => Err(Error::invalid(format!(
                "unknown sweep axis `{s}` (expected lambda or speed)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub scheme: Scheme,
    pub seed: u64,
    pub avg_aoi: f64,
    pub avg_power: f64,
    pub throughput: f64,
}

/// Train then test every `(value, scheme, seed)` combination; rows come out
/// in that nesting order.
pub fn sweep(
    cfg: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    schemes: &[Scheme],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::invalid("sweep needs at least one axis value"));
    }
    let mut rows = Vec::with_capacity(values.len() * schemes.len() * seeds.len());
    for &value in values {
        let c = axis.apply(cfg, value);
        for &scheme in schemes {
            for &seed in seeds {
                let trained = sim::run_training(&c, scheme, seed)?;
                let (summary, _) = sim::run_test(&c, scheme, seed, &trained.store)?;
                rows.push(SweepRow {
                    axis_value: value,
                    scheme,
                    seed,
                    avg_aoi: summary.avg_aoi,
                    avg_power: summary.avg_power,
                    throughput: summary.throughput,
                });
            }
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{:?},{},{},{:?},{:?},{:?}",
            r.axis_value, r.scheme, r.seed, r.avg_aoi, r.avg_power, r.throughput
        );
    }
    out
}

/// Seed-averaged sweep table, one row per `(axis value, scheme)`.
pub fn sweep_plot_csv(rows: &[SweepRow]) -> String {
    let mut keys: Vec<(f64, Scheme)> = Vec::new();
    for r in rows {
        if !keys
            .iter()
            .any(|&(v, s)| v == r.axis_value && s == r.scheme)
        {
            keys.push((r.axis_value, r.scheme));
        }
    }
    let mut out = String::new();
    out.push_str(SWEEP_PLOT_HEADER);
    out.push('\n');
    for (v, s) in keys {
        let group: Vec<&SweepRow> = rows
            .iter()
            .filter(|r| r.axis_value == v && r.scheme == s)
            .collect();
        let n = group.len() as f64;
        let mean = |f: fn(&SweepRow) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
        let _ = writeln!(
            out,
            "{:?},{},{},{:?},{:?},{:?}",
            v,
            s,
            group.len(),
            mean(|r| r.avg_aoi),
            mean(|r| r.avg_power),
            mean(|r| r.throughput)
        );
    }
    out
}

pub fn emit_sweep(rows: &[SweepRow], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, "sweep.csv", &sweep_csv(rows))?;
    write(dir, "sweep_plot.csv", &sweep_plot_csv(rows))
}
