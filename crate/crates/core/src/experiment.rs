//! Seeded Monte Carlo orchestration, parameter sweeps and CSV output.
//!
//! A trial is a pure function of `(seed, trial index, scenario)`. The
//! deployment depends only on the seed and the trial index, so every sweep
//! point sees the same random deployments (common random numbers), and
//! trials can run on any number of threads without changing a single bit
//! of the output.

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geometry::{face_set_with, sample_deployment, Deployment, FaceSet};
use crate::localization::{network_localize, Channels, LocalizationResult, NoiseKey};
use crate::optical::{WaterKind, WaterType};
use crate::rng::{Purpose, SeededRng};
use crate::routing::{build_graph, e2e_rates, is_connected, NetworkGraph, NetworkMode};

pub const TOOL_VERSION: &str = concat!("uoan-core ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    NFaces,
    DivergenceHalfAngle,
    WaterType,
    NodeCount,
    NoiseSigmaDb,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::NFaces => "n_faces",
            SweepParam::DivergenceHalfAngle => "divergence_half_angle",
            SweepParam::WaterType => "water_type",
            SweepParam::NodeCount => "node_count",
            SweepParam::NoiseSigmaDb => "noise_sigma_db",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Int(i) => write!(f, "{i}"),
            SweepValue::Float(x) => write!(f, "{x}"),
            SweepValue::Text(s) => f.write_str(s),
        }
    }
}

impl SweepValue {
    fn as_f64(&self) -> Option<f64> {
        match *self {
            SweepValue::Int(i) => Some(i as f64),
            SweepValue::Float(x) => Some(x),
            SweepValue::Text(_) => None,
        }
    }

    fn as_count(&self) -> Option<usize> {
        match *self {
            SweepValue::Int(i) if i >= 0 => Some(i as usize),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<SweepValue>,
    /// Repeat the sweep once per listed water type; empty means the
    /// configured `optical.water_type` only.
    pub water_types: Vec<WaterKind>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            param: SweepParam::NFaces,
            values: [2, 4, 8, 16, 32].map(SweepValue::Int).to_vec(),
            water_types: Vec::new(),
        }
    }
}

impl SweepSpec {
    /// Configs for every sweep point in output order: water types outer,
    /// values inner.
    pub fn points(&self, cfg: &Config) -> Result<Vec<(SweepValue, Config)>> {
        let waters = if self.water_types.is_empty() {
            vec![cfg.optical.water_type]
        } else {
            self.water_types.clone()
        };
        let mut out = Vec::with_capacity(waters.len() * self.values.len());
        for w in waters {
            let mut base = cfg.clone();
            base.optical.water_type = w;
            for v in &self.values {
                out.push((v.clone(), base.at_sweep_value(self.param, v)?));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub seed: u64,
    pub trials: usize,
    /// Links used for E2E rate and connectivity.
    pub routing_mode: NetworkMode,
    /// Localization is evaluated for each listed mode.
    pub localization_modes: Vec<NetworkMode>,
    pub connectivity_threshold_bps: f64,
    /// Count unreachable nodes as 0 bps in `mean_e2e_bps`; otherwise the
    /// mean covers reachable nodes only.
    pub unreachable_as_zero: bool,
    pub sweep: SweepSpec,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            seed: 1,
            trials: 200,
            routing_mode: NetworkMode::Optical,
            localization_modes: vec![
                NetworkMode::Acoustic,
                NetworkMode::Optical,
                NetworkMode::Hybrid,
            ],
            connectivity_threshold_bps: 1.0e5,
            unreachable_as_zero: true,
            sweep: SweepSpec::default(),
        }
    }
}

impl ExperimentSection {
    pub(crate) fn validate(&self, cfg: &Config) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("experiment.trials", "must be at least 1"));
        }
        if !(self.connectivity_threshold_bps.is_finite() && self.connectivity_threshold_bps > 0.0) {
            return Err(Error::config(
                "experiment.connectivity_threshold_bps",
                "must be positive",
            ));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::config(
                "experiment.sweep.values",
                "must not be empty",
            ));
        }
        if !self.localization_modes.is_empty() && cfg.geometry.anchor_count < 4 {
            return Err(Error::config(
                "geometry.anchor_count",
                "localization needs at least 4 anchors",
            ));
        }
        if self.sweep.param == SweepParam::WaterType && !self.sweep.water_types.is_empty() {
            return Err(Error::config(
                "experiment.sweep.water_types",
                "cannot be combined with a water_type sweep",
            ));
        }
        for (_, point) in self.sweep.points(cfg)? {
            point.geometry.validate()?;
            point.localization.validate()?;
        }
        Ok(())
    }
}

impl Config {
    /// Copy of the config with one sweep value applied.
    pub fn at_sweep_value(&self, param: SweepParam, value: &SweepValue) -> Result<Config> {
        let key = "experiment.sweep.values";
        let bad = |what: &str| {
            Error::config(
                key,
                format!("{} expects {what}, got {value}", param.as_str()),
            )
        };
        let mut cfg = self.clone();
        match param {
            SweepParam::NFaces => {
                cfg.geometry.n_faces = value
                    .as_count()
                    .filter(|&n| n > 0)
                    .ok_or_else(|| bad("positive integers"))?;
            }
            SweepParam::NodeCount => {
                cfg.geometry.node_count = value
                    .as_count()
                    .filter(|&n| n > 0)
                    .ok_or_else(|| bad("positive integers"))?;
            }
            SweepParam::DivergenceHalfAngle => {
                cfg.geometry.divergence_half_angle =
                    Some(value.as_f64().ok_or_else(|| bad("angles in radians"))?);
            }
            SweepParam::NoiseSigmaDb => {
                let s = value
                    .as_f64()
                    .filter(|s| *s >= 0.0)
                    .ok_or_else(|| bad("non-negative numbers"))?;
                cfg.localization.optical_sigma_db = s;
                cfg.localization.acoustic_sigma_db = s;
            }
            SweepParam::WaterType => {
                let kind = match value {
                    SweepValue::Text(s) => WaterKind::parse(s),
                    _ => None,
                };
                cfg.optical.water_type = kind.ok_or_else(|| bad("water type names"))?;
            }
        }
        Ok(cfg)
    }
}

/// Derived per-scenario state shared by all trials of a sweep point.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: Config,
    pub faces: FaceSet,
    pub water: WaterType,
}

impl Scenario {
    pub fn new(cfg: &Config) -> Result<Self> {
        cfg.validate()?;
        let g = &cfg.geometry;
        let faces = face_set_with(g.n_faces, g.face_angle_rule, g.divergence_half_angle)
            .map_err(|e| Error::config("geometry.n_faces", e.to_string()))?;
        Ok(Scenario {
            water: cfg.optical.water()?,
            faces,
            cfg: cfg.clone(),
        })
    }

    pub fn deployment(&self, trial: u64) -> Result<Deployment> {
        let seed = self.cfg.experiment.seed;
        let mut nodes = SeededRng::substream(seed, Purpose::NodePositions, trial);
        let mut anchors = SeededRng::substream(seed, Purpose::AnchorPositions, trial);
        sample_deployment(&self.cfg.geometry, &mut nodes, &mut anchors)
    }

    pub fn graph(&self, dep: &Deployment, mode: NetworkMode) -> Result<NetworkGraph> {
        build_graph(
            dep,
            &self.faces,
            &self.cfg.optical.link,
            &self.water,
            Some(&self.cfg.acoustic),
            mode,
        )
    }

    pub fn localize(
        &self,
        dep: &Deployment,
        mode: NetworkMode,
        trial: u64,
    ) -> Result<LocalizationResult> {
        let ch = Channels {
            faces: &self.faces,
            optical: &self.cfg.optical.link,
            water: &self.water,
            acoustic: &self.cfg.acoustic,
        };
        let key = NoiseKey {
            seed: self.cfg.experiment.seed,
            trial,
        };
        network_localize(dep, &ch, &self.cfg.localization, mode, key)
    }

    pub fn run_trial(&self, trial: u64) -> Result<TrialRecord> {
        let dep = self.deployment(trial)?;
        let exp = &self.cfg.experiment;
        let g = self.graph(&dep, exp.routing_mode)?;
        let rates = e2e_rates(&g, g.sink())?;
        let n = rates.len() as f64;
        let total: f64 = rates.values().sum();
        let reachable: Vec<f64> = rates.values().copied().filter(|&r| r > 0.0).collect();
        let mean_e2e_reachable_bps = if reachable.is_empty() {
            None
        } else {
            Some(reachable.iter().sum::<f64>() / reachable.len() as f64)
        };
        let mut localization = Vec::new();
        for &mode in &exp.localization_modes {
            let r = self.localize(&dep, mode, trial)?;
            localization.push(LocalizationSummary {
                mode,
                rmse: r.rmse,
                rmse_all: r.rmse_all,
                localized_fraction: r.localized_fraction,
            });
        }
        Ok(TrialRecord {
            trial,
            mean_e2e_bps: total / n,
            mean_e2e_reachable_bps,
            min_e2e_bps: rates.values().copied().fold(f64::INFINITY, f64::min),
            reachable_fraction: reachable.len() as f64 / n,
            connected: is_connected(&rates, exp.connectivity_threshold_bps),
            localization,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationSummary {
    pub mode: NetworkMode,
    pub rmse: Option<f64>,
    pub rmse_all: f64,
    pub localized_fraction: f64,
}

/// Everything one trial contributes to the sweep aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    /// Mean over nodes with unreachable nodes at 0 bps.
    pub mean_e2e_bps: f64,
    /// Mean over reachable nodes only.
    pub mean_e2e_reachable_bps: Option<f64>,
    pub min_e2e_bps: f64,
    pub reachable_fraction: f64,
    pub connected: bool,
    pub localization: Vec<LocalizationSummary>,
}

impl TrialRecord {
    pub fn localization_for(&self, mode: NetworkMode) -> Option<&LocalizationSummary> {
        self.localization.iter().find(|l| l.mode == mode)
    }
}

/// Runs trial `trial_index` of the (unswept) configuration.
pub fn run_trial(cfg: &Config, trial_index: u64) -> Result<TrialRecord> {
    Scenario::new(cfg)?.run_trial(trial_index)
}

/// Deployment and routing graph of one trial.
pub fn trial_graph(cfg: &Config, trial_index: u64) -> Result<(Deployment, NetworkGraph)> {
    let sc = Scenario::new(cfg)?;
    let dep = sc.deployment(trial_index)?;
    let g = sc.graph(&dep, cfg.experiment.routing_mode)?;
    Ok((dep, g))
}

/// Mean and standard error; `(NaN, NaN)` for no samples, stderr 0 for one.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    match xs.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (xs[0], 0.0),
        n => {
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (mean, (var / n as f64).sqrt())
        }
    }
}

/// Localization aggregates for one mode at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeStats {
    pub rmse_m: f64,
    pub stderr_rmse_m: f64,
    pub rmse_all_m: f64,
    pub stderr_rmse_all_m: f64,
    pub localized_frac: f64,
}

impl ModeStats {
    const MISSING: ModeStats = ModeStats {
        rmse_m: f64::NAN,
        stderr_rmse_m: f64::NAN,
        rmse_all_m: f64::NAN,
        stderr_rmse_all_m: f64::NAN,
        localized_frac: f64::NAN,
    };

    fn from_trials(trials: &[TrialRecord], mode: NetworkMode) -> Self {
        let rows: Vec<&LocalizationSummary> = trials
            .iter()
            .filter_map(|t| t.localization_for(mode))
            .collect();
        if rows.is_empty() {
            return Self::MISSING;
        }
        let rmse: Vec<f64> = rows.iter().filter_map(|r| r.rmse).collect();
        let all: Vec<f64> = rows.iter().map(|r| r.rmse_all).collect();
        let frac: Vec<f64> = rows.iter().map(|r| r.localized_fraction).collect();
        let (rmse_m, stderr_rmse_m) = mean_stderr(&rmse);
        let (rmse_all_m, stderr_rmse_all_m) = mean_stderr(&all);
        ModeStats {
            rmse_m,
            stderr_rmse_m,
            rmse_all_m,
            stderr_rmse_all_m,
            localized_frac: mean_stderr(&frac).0,
        }
    }
}

/// Aggregates at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sweep_param: SweepParam,
    pub sweep_value: SweepValue,
    pub water_type: WaterKind,
    pub n_faces: usize,
    pub divergence_rad: f64,
    pub trials: usize,
    pub mean_e2e_bps: f64,
    pub stderr_e2e_bps: f64,
    pub mean_e2e_with_zeros_bps: f64,
    pub mean_e2e_reachable_bps: f64,
    pub conn_prob: f64,
    pub acoustic: ModeStats,
    pub optical: ModeStats,
    pub hybrid: ModeStats,
}

impl SweepPoint {
    pub fn mode(&self, mode: NetworkMode) -> &ModeStats {
        match mode {
            NetworkMode::Acoustic => &self.acoustic,
            NetworkMode::Optical => &self.optical,
            NetworkMode::Hybrid => &self.hybrid,
        }
    }

    fn aggregate(sc: &Scenario, value: &SweepValue, trials: &[TrialRecord]) -> Self {
        let exp = &sc.cfg.experiment;
        let with_zeros: Vec<f64> = trials.iter().map(|t| t.mean_e2e_bps).collect();
        let reachable: Vec<f64> = trials
            .iter()
            .filter_map(|t| t.mean_e2e_reachable_bps)
            .collect();
        let (mean_z, se_z) = mean_stderr(&with_zeros);
        let (mean_r, se_r) = mean_stderr(&reachable);
        let (mean_e2e_bps, stderr_e2e_bps) = if exp.unreachable_as_zero {
            (mean_z, se_z)
        } else {
            (mean_r, se_r)
        };
        let connected = trials.iter().filter(|t| t.connected).count();
        SweepPoint {
            sweep_param: exp.sweep.param,
            sweep_value: value.clone(),
            water_type: sc.water.name,
            n_faces: sc.faces.n_faces(),
            divergence_rad: sc.faces.divergence_half_angle(),
            trials: trials.len(),
            mean_e2e_bps,
            stderr_e2e_bps,
            mean_e2e_with_zeros_bps: mean_z,
            mean_e2e_reachable_bps: mean_r,
            conn_prob: connected as f64 / trials.len() as f64,
            acoustic: ModeStats::from_trials(trials, NetworkMode::Acoustic),
            optical: ModeStats::from_trials(trials, NetworkMode::Optical),
            hybrid: ModeStats::from_trials(trials, NetworkMode::Hybrid),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
}

/// Worker count for trial execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Serial,
    Threads(usize),
    /// Rayon's default (machine parallelism).
    Auto,
}

fn run_trials(sc: &Scenario, par: Parallelism) -> Result<Vec<TrialRecord>> {
    let n = sc.cfg.experiment.trials as u64;
    let work = || (0..n).into_par_iter().map(|t| sc.run_trial(t)).collect();
    match par {
        Parallelism::Serial => (0..n).map(|t| sc.run_trial(t)).collect(),
        Parallelism::Auto => work(),
        Parallelism::Threads(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::Domain(e.to_string()))?
            .install(work),
    }
}

/// Runs every sweep point; trials of a point may run in parallel but the
/// result does not depend on `par`.
pub fn run_sweep(cfg: &Config, par: Parallelism) -> Result<SweepResult> {
    cfg.validate()?;
    let mut points = Vec::new();
    for (value, point_cfg) in cfg.experiment.sweep.points(cfg)? {
        let sc = Scenario::new(&point_cfg)?;
        let trials = run_trials(&sc, par)?;
        points.push(SweepPoint::aggregate(&sc, &value, &trials));
    }
    Ok(SweepResult { points })
}

/// Column order of the results file. The first fifteen columns are the
/// stable core schema; the rest carry the alternative conventions.
pub const CSV_COLUMNS: &[&str] = &[
    "sweep_param",
    "sweep_value",
    "water_type",
    "n_faces",
    "divergence_rad",
    "trials",
    "mean_e2e_bps",
    "stderr_e2e_bps",
    "conn_prob",
    "rmse_acoustic_m",
    "rmse_optical_m",
    "rmse_hybrid_m",
    "localized_frac_acoustic",
    "localized_frac_optical",
    "localized_frac_hybrid",
    "stderr_rmse_acoustic_m",
    "stderr_rmse_optical_m",
    "stderr_rmse_hybrid_m",
    "rmse_all_acoustic_m",
    "rmse_all_optical_m",
    "rmse_all_hybrid_m",
    "stderr_rmse_all_acoustic_m",
    "stderr_rmse_all_optical_m",
    "stderr_rmse_all_hybrid_m",
    "mean_e2e_with_zeros_bps",
    "mean_e2e_reachable_bps",
];

fn num(x: f64) -> String {
    format!("{x}")
}

impl SweepResult {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(CSV_COLUMNS).map_err(ser)?;
        for p in &self.points {
            let (a, o, h) = (&p.acoustic, &p.optical, &p.hybrid);
            let row = vec![
                p.sweep_param.as_str().to_string(),
                p.sweep_value.to_string(),
                p.water_type.to_string(),
                p.n_faces.to_string(),
                num(p.divergence_rad),
                p.trials.to_string(),
                num(p.mean_e2e_bps),
                num(p.stderr_e2e_bps),
                num(p.conn_prob),
                num(a.rmse_m),
                num(o.rmse_m),
                num(h.rmse_m),
                num(a.localized_frac),
                num(o.localized_frac),
                num(h.localized_frac),
                num(a.stderr_rmse_m),
                num(o.stderr_rmse_m),
                num(h.stderr_rmse_m),
                num(a.rmse_all_m),
                num(o.rmse_all_m),
                num(h.rmse_all_m),
                num(a.stderr_rmse_all_m),
                num(o.stderr_rmse_all_m),
                num(h.stderr_rmse_all_m),
                num(p.mean_e2e_with_zeros_bps),
                num(p.mean_e2e_reachable_bps),
            ];
            w.write_record(&row).map_err(ser)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// `results.csv` → `results.manifest.toml`.
pub fn manifest_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("manifest.toml")
}

/// Config echo followed by a `[manifest]` table.
pub fn manifest(cfg: &Config) -> Result<String> {
    let mut text = cfg.to_toml()?;
    text.push_str(&format!(
        "\n[manifest]\nseed = {}\ntool_version = \"{}\"\n",
        cfg.experiment.seed, TOOL_VERSION
    ));
    Ok(text)
}

fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| Error::io(path, e))
}

/// Runs the sweep and writes the CSV plus its manifest. Both output files
/// are opened before any trial runs so an unwritable path fails fast.
pub fn run_sweep_to_file(cfg: &Config, csv_path: &Path, par: Parallelism) -> Result<SweepResult> {
    use std::io::Write;
    cfg.validate()?;
    let man_path = manifest_path(csv_path);
    let mut csv_file = create(csv_path)?;
    let mut man_file = create(&man_path)?;
    let result = run_sweep(cfg, par)?;
    csv_file
        .write_all(result.to_csv()?.as_bytes())
        .map_err(|e| Error::io(csv_path, e))?;
    man_file
        .write_all(manifest(cfg)?.as_bytes())
        .map_err(|e| Error::io(&man_path, e))?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Config {
        let mut cfg = Config::default();
        cfg.geometry.node_count = 12;
        cfg.experiment.trials = 3;
        cfg.experiment.sweep.values = vec![SweepValue::Int(4), SweepValue::Int(8)];
        cfg
    }

    #[test]
    fn trial_is_deterministic() {
        let cfg = small();
        assert_eq!(run_trial(&cfg, 2).unwrap(), run_trial(&cfg, 2).unwrap());
        assert_ne!(run_trial(&cfg, 1).unwrap().mean_e2e_bps, f64::NAN,);
    }

    #[test]
    fn deployment_ignores_channel_parameters() {
        let a = small();
        let mut b = small();
        b.geometry.n_faces = 32;
        b.optical.water_type = WaterKind::Harbor;
        let da = Scenario::new(&a).unwrap().deployment(5).unwrap();
        let db = Scenario::new(&b).unwrap().deployment(5).unwrap();
        assert_eq!(da, db);
    }

    #[test]
    fn single_trial_has_zero_stderr() {
        let mut cfg = small();
        cfg.experiment.trials = 1;
        let r = run_sweep(&cfg, Parallelism::Serial).unwrap();
        for p in &r.points {
            assert_eq!(p.stderr_e2e_bps, 0.0);
            assert_eq!(p.acoustic.stderr_rmse_all_m, 0.0);
            assert!(p.conn_prob == 0.0 || p.conn_prob == 1.0);
        }
    }

    #[test]
    fn serial_and_parallel_agree() {
        let cfg = small();
        let a = run_sweep(&cfg, Parallelism::Serial)
            .unwrap()
            .to_csv()
            .unwrap();
        let b = run_sweep(&cfg, Parallelism::Threads(3))
            .unwrap()
            .to_csv()
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn connectivity_probability_is_a_plain_fraction() {
        let mut cfg = small();
        cfg.experiment.trials = 6;
        cfg.experiment.sweep.values = vec![SweepValue::Int(8)];
        let sc = Scenario::new(
            &cfg.at_sweep_value(SweepParam::NFaces, &SweepValue::Int(8))
                .unwrap(),
        )
        .unwrap();
        let trials: Vec<TrialRecord> = (0..6).map(|t| sc.run_trial(t).unwrap()).collect();
        let expected = trials.iter().filter(|t| t.connected).count() as f64 / 6.0;
        let r = run_sweep(&cfg, Parallelism::Auto).unwrap();
        assert_eq!(r.points[0].conn_prob, expected);
        // Permuting trial order leaves aggregates unchanged.
        let mut rev = trials.clone();
        rev.reverse();
        let p1 = SweepPoint::aggregate(&sc, &SweepValue::Int(8), &trials);
        let p2 = SweepPoint::aggregate(&sc, &SweepValue::Int(8), &rev);
        assert!((p1.mean_e2e_bps - p2.mean_e2e_bps).abs() <= 1e-9 * p1.mean_e2e_bps.abs());
        assert_eq!(p1.conn_prob, p2.conn_prob);
    }

    #[test]
    fn bad_sweep_values_rejected() {
        let mut cfg = small();
        cfg.experiment.sweep = SweepSpec {
            param: SweepParam::WaterType,
            values: vec![SweepValue::Text("swamp".into())],
            water_types: vec![],
        };
        assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
        cfg.experiment.sweep = SweepSpec {
            param: SweepParam::DivergenceHalfAngle,
            values: vec![SweepValue::Float(3.0)],
            water_types: vec![],
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn water_series_repeats_the_sweep() {
        let mut cfg = small();
        cfg.experiment.trials = 1;
        cfg.experiment.sweep.water_types = vec![WaterKind::PureSea, WaterKind::Harbor];
        let r = run_sweep(&cfg, Parallelism::Serial).unwrap();
        let got: Vec<(WaterKind, usize)> =
            r.points.iter().map(|p| (p.water_type, p.n_faces)).collect();
        assert_eq!(
            got,
            [
                (WaterKind::PureSea, 4),
                (WaterKind::PureSea, 8),
                (WaterKind::Harbor, 4),
                (WaterKind::Harbor, 8)
            ]
        );
        cfg.experiment.sweep.param = SweepParam::WaterType;
        cfg.experiment.sweep.values = vec![SweepValue::Text("harbor".into())];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let r = run_sweep(&small(), Parallelism::Serial).unwrap();
        let text = r.to_csv().unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn manifest_echoes_config() {
        let cfg = small();
        let m = manifest(&cfg).unwrap();
        assert!(m.contains("tool_version"));
        let echoed: toml::Table = m.parse().unwrap();
        assert_eq!(echoed["experiment"]["trials"].as_integer(), Some(3));
    }
}
