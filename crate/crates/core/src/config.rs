//! Scenario configuration.
//!
//! [`ScenarioConfig`] carries every environment constant and learning
//! hyperparameter the simulator uses. The on-disk form is flat UTF-8
//! `key = value` text; `#` starts a comment, lists are comma separated and
//! unknown keys are rejected. Keys are spelled exactly like the struct fields.
//!
//! ```
//! use vec_offload::config::ScenarioConfig;
//!
//! let cfg = ScenarioConfig::from_str_checked("lanes = 2\nsegment_len = 50\n").unwrap();
//! assert_eq!(cfg.lanes, 2);
//! assert_eq!(cfg.node_count(), 20);
//! assert!(ScenarioConfig::from_str_checked("lanes = 2\nwarp_drive = 1\n").is_err());
//! ```

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

trait ConfigValue: Sized {
    fn parse_value(raw: &str) -> std::result::Result<Self, String>;
    fn render(&self) -> String;
}

impl ConfigValue for usize {
    fn parse_value(raw: &str) -> std::result::Result<Self, String> {
        raw.parse().map_err(|e| format!("{e}"))
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl ConfigValue for f64 {
    fn parse_value(raw: &str) -> std::result::Result<Self, String> {
        parse_f64(raw)
    }
    fn render(&self) -> String {
        format!("{self:?}")
    }
}

impl ConfigValue for Vec<f64> {
    fn parse_value(raw: &str) -> std::result::Result<Self, String> {
        if raw.trim().is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',').map(parse_f64).collect()
    }
    fn render(&self) -> String {
        self.iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl ConfigValue for Vec<usize> {
    fn parse_value(raw: &str) -> std::result::Result<Self, String> {
        if raw.trim().is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|e| format!("{e}")))
            .collect()
    }
    fn render(&self) -> String {
        self.iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Accepts plain floats plus `a/b` fractions (`1/8` reads better than `0.125`).
pub fn parse_f64(raw: &str) -> std::result::Result<f64, String> {
    let raw = raw.trim();
    if let Some((num, den)) = raw.split_once('/') {
        let n: f64 = num.trim().parse().map_err(|e| format!("{e}"))?;
        let d: f64 = den.trim().parse().map_err(|e| format!("{e}"))?;
        return Ok(n / d);
    }
    raw.parse().map_err(|e| format!("`{raw}`: {e}"))
}

macro_rules! scenario_config {
    ($( $(#[$doc:meta])* $field:ident : $ty:ty = $default:expr ),* $(,)?) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct ScenarioConfig {
            $( $(#[$doc])* pub $field: $ty, )*
        }

        impl Default for ScenarioConfig {
            fn default() -> Self {
                Self { $( $field: $default, )* }
            }
        }

        impl ScenarioConfig {
            /// Every config key, in file order.
            pub const KEYS: &'static [&'static str] = &[$( stringify!($field), )*];

            /// Sets one field from its textual form.
            pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
                match key {
                    $( stringify!($field) => {
                        self.$field = <$ty as ConfigValue>::parse_value(raw).map_err(|msg| {
                            Error::InvalidValue { key: key.to_string(), msg }
                        })?;
                    } )*
                    other => return Err(Error::UnknownKey(other.to_string())),
                }
                Ok(())
            }

            /// `(key, rendered value)` pairs in file order.
            pub fn entries(&self) -> Vec<(&'static str, String)> {
                vec![$( (stringify!($field), ConfigValue::render(&self.$field)), )*]
            }
        }
    };
}

scenario_config! {
    /// Number of lanes `L`.
    lanes: usize = 4,
    /// Per-lane speed in m/s. Empty means every lane uses 30 km/h.
    lane_speeds: Vec<f64> = Vec::new(),
    /// Total vehicle arrival rate over all lanes, vehicles/s.
    arrival_rate: f64 = 1.0 / 8.0,
    /// Explicit per-lane arrival rates; empty means `arrival_rate / lanes` each.
    lane_arrival_rates: Vec<f64> = Vec::new(),
    /// RSU coverage radius `D_r`, m. The road spans `[-D_r, D_r]`.
    rsu_radius: f64 = 250.0,
    /// V2V communication range `D_c`, m.
    v2v_range: f64 = 100.0,
    /// Slot length `tau`, s.
    slot: f64 = 0.02,
    /// Mean task inter-generation time `mu`, s.
    task_mean_interval: f64 = 0.2,
    /// Minimum task size, bits (0.1 MB).
    task_size_min: f64 = 8.0e5,
    /// Maximum task size, bits (10 MB).
    task_size_max: f64 = 8.0e7,
    /// Maximum transmit power, W.
    p_max: f64 = 20.0,
    /// Uplink bandwidth, Hz.
    bandwidth: f64 = 2.0e8,
    /// Noise power, W.
    noise: f64 = 3.98e-14,
    /// Shadowing standard deviation, dB.
    shadow_sigma: f64 = 2.2,
    /// Shadowing decorrelation distance, m.
    decorrelation: f64 = 10.0,
    /// Carrier frequency, Hz.
    carrier: f64 = 28.0e9,
    /// Speed of light, m/s.
    lightspeed: f64 = 3.0e8,
    /// Road segment length `L_g`, m. One graph node per segment per lane.
    segment_len: f64 = 50.0,
    /// Departure penalty decay `delta`.
    penalty_decay: f64 = 0.9999,
    /// Departure penalty weight `omega_2`.
    penalty_weight: f64 = 0.9999,
    reward_scale: f64 = 0.1,
    /// Discount `gamma`, shared by the SAC critics and the GNN critic.
    discount: f64 = 0.99,
    /// Training slots (20 000 s at the default slot length).
    train_slots: usize = 1_000_000,
    /// Test slots (2 000 s at the default slot length).
    test_slots: usize = 100_000,
    /// Lateral distance between adjacent lanes, m.
    lane_spacing: f64 = 3.5,
    /// RSU y-coordinate; the RSU sits at `(0, rsu_offset)`.
    rsu_offset: f64 = 10.0,

    lr_actor: f64 = 1e-4,
    lr_critic: f64 = 1e-3,
    lr_temperature: f64 = 1e-4,
    lr_gnn: f64 = 1e-3,
    lr_gnn_critic: f64 = 1e-3,
    /// Per-vehicle replay capacity `D_s`.
    replay_capacity: usize = 500,
    /// RSU graph replay capacity `D_g`.
    gnn_replay_capacity: usize = 5000,
    /// Replay size required before a vehicle trains.
    warmup: usize = 256,
    /// Graph replay size required before the GNN trains.
    gnn_warmup: usize = 256,
    batch_size: usize = 128,
    gnn_batch_size: usize = 128,
    /// Soft target update every this many SAC iterations.
    target_update_period: usize = 1,
    gnn_target_update_period: usize = 1,
    tau_critic1: f64 = 0.005,
    tau_critic2: f64 = 0.005,
    tau_gnn: f64 = 0.005,
    /// GNN training fires every this many slots.
    gnn_train_period: usize = 10,
    gnn_iterations: usize = 5,
    /// Per-vehicle SAC iteration counts; each vehicle draws one at spawn.
    iteration_choices: Vec<usize> = vec![5, 10, 20, 40, 50],
    /// Vehicles run a local training round every this many slots.
    local_train_period: usize = 1,
    /// Hidden width of the actor and critic MLPs (two hidden layers).
    hidden_width: usize = 256,
    /// Hidden widths of the GNN message-passing layers.
    gnn_hidden: Vec<usize> = vec![128, 64],
    /// Hidden width of the GNN critic MLP (two hidden layers).
    gnn_critic_width: usize = 256,
    /// SAC target entropy.
    target_entropy: f64 = 1.0,
    /// Initial SAC temperature.
    init_temperature: f64 = 0.2,
    /// Price weight of the GDBR surrogate.
    gdbr_kappa: f64 = 0.5,
    /// AoI normalization cap for the observation vector, s.
    norm_aoi: f64 = 10.0,
    /// Vehicle-count normalization for the observation vector.
    norm_vehicles: f64 = 50.0,
    /// Channel gain normalization for the observation vector, dB.
    norm_gain_db: f64 = 100.0,
}

/// Default speed when `lane_speeds` is empty: 30 km/h.
pub const DEFAULT_SPEED: f64 = 30.0 / 3.6;

impl ScenarioConfig {
    /// Reduced-volume preset used by the acceptance runs and as the CLI default.
    ///
    /// Environment constants are unchanged apart from two lanes. The learning
    /// volume is cut so that one 50 000-slot training run fits a single core:
    /// narrower SAC networks, a local training round every second of
    /// simulated time and a sparser GNN schedule.
    pub fn desk_scale() -> Self {
        Self {
            lanes: 2,
            train_slots: 50_000,
            test_slots: 10_000,
            hidden_width: 64,
            gnn_critic_width: 64,
            batch_size: 64,
            gnn_batch_size: 32,
            local_train_period: 50,
            gnn_train_period: 250,
            ..Self::default()
        }
    }

    pub fn from_str_checked(text: &str) -> Result<Self> {
        Self::overlay(Self::default(), text)
    }

    /// Applies `key = value` lines from `text` on top of `base`.
    pub fn overlay(mut base: Self, text: &str) -> Result<Self> {
        for (idx, line) in text.lines().enumerate() {
            let line = match line.split_once('#') {
                Some((before, _)) => before,
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigSyntax {
                line: idx + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            base.set(key.trim(), value.trim())?;
        }
        base.validate()?;
        Ok(base)
    }

    pub fn load(path: &Path, base: Self) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::overlay(base, &text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// SHA-256 of the canonical text form, hex encoded.
    pub fn hash_hex(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::invalid(m));
        if self.lanes == 0 {
            return fail("lanes must be >= 1".into());
        }
        if !self.lane_speeds.is_empty() && self.lane_speeds.len() != self.lanes {
            return fail(format!(
                "lane_speeds has {} entries for {} lanes",
                self.lane_speeds.len(),
                self.lanes
            ));
        }
        if self
            .lane_speeds
            .iter()
            .any(|v| !(*v >= 0.0) || !v.is_finite())
        {
            return fail("lane speeds must be finite and >= 0".into());
        }
        if !self.lane_arrival_rates.is_empty() && self.lane_arrival_rates.len() != self.lanes {
            return fail(format!(
                "lane_arrival_rates has {} entries for {} lanes",
                self.lane_arrival_rates.len(),
                self.lanes
            ));
        }
        if !(self.arrival_rate >= 0.0) || self.lane_arrival_rates.iter().any(|r| !(*r >= 0.0)) {
            return fail("arrival rates must be >= 0".into());
        }
        let positive = [
            ("rsu_radius", self.rsu_radius),
            ("v2v_range", self.v2v_range),
            ("slot", self.slot),
            ("task_mean_interval", self.task_mean_interval),
            ("task_size_min", self.task_size_min),
            ("task_size_max", self.task_size_max),
            ("p_max", self.p_max),
            ("bandwidth", self.bandwidth),
            ("noise", self.noise),
            ("decorrelation", self.decorrelation),
            ("carrier", self.carrier),
            ("lightspeed", self.lightspeed),
            ("segment_len", self.segment_len),
            ("reward_scale", self.reward_scale),
            ("lr_actor", self.lr_actor),
            ("lr_critic", self.lr_critic),
            ("lr_temperature", self.lr_temperature),
            ("lr_gnn", self.lr_gnn),
            ("lr_gnn_critic", self.lr_gnn_critic),
            ("init_temperature", self.init_temperature),
            ("norm_aoi", self.norm_aoi),
            ("norm_vehicles", self.norm_vehicles),
            ("norm_gain_db", self.norm_gain_db),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return fail(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        if !(self.shadow_sigma >= 0.0) {
            return fail("shadow_sigma must be >= 0".into());
        }
        if self.task_size_min > self.task_size_max {
            return fail("task_size_min exceeds task_size_max".into());
        }
        if !(self.penalty_decay > 0.0 && self.penalty_decay <= 1.0) {
            return fail("penalty_decay must lie in (0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return fail("discount must lie in [0, 1]".into());
        }
        self.segments_per_lane()?;
        for (name, t) in [
            ("tau_critic1", self.tau_critic1),
            ("tau_critic2", self.tau_critic2),
            ("tau_gnn", self.tau_gnn),
        ] {
            if !(t > 0.0 && t <= 1.0) {
                return fail(format!("{name} must lie in (0, 1]"));
            }
        }
        let nonzero = [
            ("replay_capacity", self.replay_capacity),
            ("gnn_replay_capacity", self.gnn_replay_capacity),
            ("batch_size", self.batch_size),
            ("gnn_batch_size", self.gnn_batch_size),
            ("target_update_period", self.target_update_period),
            ("gnn_target_update_period", self.gnn_target_update_period),
            ("gnn_train_period", self.gnn_train_period),
            ("local_train_period", self.local_train_period),
            ("hidden_width", self.hidden_width),
            ("gnn_critic_width", self.gnn_critic_width),
        ];
        for (name, v) in nonzero {
            if v == 0 {
                return fail(format!("{name} must be >= 1"));
            }
        }
        if self.iteration_choices.is_empty() || self.iteration_choices.contains(&0) {
            return fail("iteration_choices must be a non-empty list of positive counts".into());
        }
        if self.gnn_hidden.is_empty() || self.gnn_hidden.contains(&0) {
            return fail("gnn_hidden must be a non-empty list of positive widths".into());
        }
        Ok(())
    }

    /// Segments per lane, `2 D_r / L_g`; errors unless that is a whole number.
    pub fn segments_per_lane(&self) -> Result<usize> {
        let ratio = 2.0 * self.rsu_radius / self.segment_len;
        let rounded = ratio.round();
        if !(self.segment_len > 0.0)
            || rounded < 1.0
            || (ratio - rounded).abs() > 1e-9 * ratio.max(1.0)
        {
            return Err(Error::invalid(format!(
                "road length {} m is not divisible by segment_len {} m",
                2.0 * self.rsu_radius,
                self.segment_len
            )));
        }
        Ok(rounded as usize)
    }

    /// Total graph nodes, `(2 D_r / L_g) * L`. Assumes a validated config.
    pub fn node_count(&self) -> usize {
        self.segments_per_lane().unwrap_or(0) * self.lanes
    }

    pub fn lane_speed(&self, lane: usize) -> f64 {
        self.lane_speeds.get(lane).copied().unwrap_or(DEFAULT_SPEED)
    }

    pub fn lane_rate(&self, lane: usize) -> f64 {
        match self.lane_arrival_rates.get(lane) {
            Some(r) => *r,
            None => self.arrival_rate / self.lanes as f64,
        }
    }

    /// Sets every lane to the same speed.
    pub fn set_uniform_speed(&mut self, speed: f64) {
        self.lane_speeds = vec![speed; self.lanes];
    }

    pub fn lane_y(&self, lane: usize) -> f64 {
        lane as f64 * self.lane_spacing
    }
}
