//! Run configuration: a flat `key = value` text format, every key also
//! addressable as a `--key value` command-line flag (flag wins). The key
//! namespace is the configuration contract, so unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::data::StreamSpec;
use crate::error::{Result, VdsomError};
use crate::grid::{GridSpec, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmKind {
    Vdsom,
    Dsom,
}

impl std::fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AlgorithmKind::Vdsom => write!(f, "vdsom"),
            AlgorithmKind::Dsom => write!(f, "dsom"),
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = VdsomError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(VdsomError::Config(format!(
                "unknown optimizer `{other}`, expected adam|sgd"
            ))),
        }
    }
}

impl std::str::FromStr for AlgorithmKind {
    type Err = VdsomError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vdsom" => Ok(AlgorithmKind::Vdsom),
            "dsom" => Ok(AlgorithmKind::Dsom),
            other => Err(VdsomError::Config(format!(
                "unknown algorithm `{other}`, expected vdsom|dsom"
            ))),
        }
    }
}

/// Everything a training run depends on. A `RunConfig` fully determines
/// every emitted byte.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub eta: f64,
    pub sigma0: f64,
    pub lr: f64,
    pub steps: u64,
    pub optimizer: OptimizerKind,
    pub algorithm: AlgorithmKind,
    pub stream: StreamSpec,
    pub seed: u64,
    pub log_interval: u64,
    /// `None` selects the default cadence (step 0 and every 7500 steps);
    /// an explicit empty list disables snapshots.
    pub snapshot_steps: Option<Vec<u64>>,
    pub output_dir: PathBuf,
    pub sigma_min: f64,
    pub paper_exact_gsigma: bool,
    /// Declared image shape (rows, cols) of the observation space; enables
    /// PGM tile emission when it matches the stream dimension.
    pub image_shape: Option<(usize, usize)>,
    /// Held-out batch size for the distortion time series.
    pub eval_batch: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: GridSpec::planar(15, 15, -1.0, 1.0),
            eta: 1.0,
            sigma0: 5.0,
            lr: 1e-3,
            steps: 60_000,
            optimizer: OptimizerKind::Adam,
            algorithm: AlgorithmKind::Vdsom,
            stream: StreamSpec::moons(0.05, 1),
            seed: 42,
            log_interval: 100,
            snapshot_steps: None,
            output_dir: PathBuf::from("out"),
            sigma_min: 1e-4,
            paper_exact_gsigma: false,
            image_shape: None,
            eval_batch: 1024,
        }
    }
}

/// Snapshot cadence when none is configured: step 0 and every 7500 steps.
pub fn default_snapshot_steps(steps: u64) -> Vec<u64> {
    (0..=steps).step_by(7500).collect()
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma0 <= 0.0 {
            return Err(VdsomError::Config(format!(
                "sigma0 must be positive, got {}",
                self.sigma0
            )));
        }
        if self.steps == 0 {
            return Err(VdsomError::Config("steps must be at least 1".into()));
        }
        if self.log_interval == 0 {
            return Err(VdsomError::Config("log_interval must be at least 1".into()));
        }
        if self.eta <= 0.0 || !self.eta.is_finite() {
            return Err(VdsomError::Config(format!(
                "eta must be positive and finite, got {}",
                self.eta
            )));
        }
        if self.lr < 0.0 || !self.lr.is_finite() {
            return Err(VdsomError::Config(format!(
                "lr must be nonnegative and finite, got {}",
                self.lr
            )));
        }
        if self.sigma_min <= 0.0 {
            return Err(VdsomError::Config(format!(
                "sigma_min must be positive, got {}",
                self.sigma_min
            )));
        }
        if self.eval_batch == 0 {
            return Err(VdsomError::Config("eval_batch must be at least 1".into()));
        }
        Ok(())
    }

    /// Snapshot steps, falling back to the default cadence.
    pub fn snapshot_steps_or_default(&self) -> Vec<u64> {
        match &self.snapshot_steps {
            Some(steps) => steps.clone(),
            None => default_snapshot_steps(self.steps),
        }
    }
}

/// Parses the `key = value` text format: one pair per line, `#` comments,
/// blank lines ignored. Later duplicates win.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            VdsomError::Config(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| VdsomError::Config(format!("key `{key}`: cannot parse `{value}`: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(VdsomError::Config(format!(
            "key `{key}`: expected true|false, got `{other}`"
        ))),
    }
}

fn take(map: &mut BTreeMap<String, String>, key: &str) -> Option<String> {
    map.remove(key)
}

/// Builds the stream rooted at `prefix` (e.g. `stream`), consuming its keys.
/// Children of a mutating stream live under `<prefix>.first` and
/// `<prefix>.second`; their seeds default to the parent's seed and seed + 1.
fn build_stream(
    map: &mut BTreeMap<String, String>,
    prefix: &str,
    default_seed: u64,
) -> Result<StreamSpec> {
    let key = |suffix: &str| format!("{prefix}.{suffix}");
    let kind = take(map, &key("kind")).unwrap_or_else(|| "moons".to_string());
    let seed = match take(map, &key("seed")) {
        Some(v) => parse(&key("seed"), &v)?,
        None => default_seed,
    };
    match kind.as_str() {
        "moons" => {
            let noise_std = match take(map, &key("noise_std")) {
                Some(v) => parse(&key("noise_std"), &v)?,
                None => 0.05,
            };
            Ok(StreamSpec::moons(noise_std, seed))
        }
        "circles" => {
            let noise_std = match take(map, &key("noise_std")) {
                Some(v) => parse(&key("noise_std"), &v)?,
                None => 0.05,
            };
            let inner_factor = match take(map, &key("inner_factor")) {
                Some(v) => parse(&key("inner_factor"), &v)?,
                None => 0.5,
            };
            Ok(StreamSpec::circles(noise_std, inner_factor, seed))
        }
        "idx_file" => {
            let path = take(map, &key("path")).ok_or_else(|| {
                VdsomError::Config(format!("key `{}` is required for idx_file", key("path")))
            })?;
            Ok(StreamSpec::idx_file(path, seed))
        }
        "mutate" => {
            let switch_step = match take(map, &key("switch_step")) {
                Some(v) => parse(&key("switch_step"), &v)?,
                None => {
                    return Err(VdsomError::Config(format!(
                        "key `{}` is required for mutate",
                        key("switch_step")
                    )))
                }
            };
            let first = build_stream(map, &key("first"), seed)?;
            let second = build_stream(map, &key("second"), seed.wrapping_add(1))?;
            Ok(StreamSpec::mutate(first, second, switch_step))
        }
        other => Err(VdsomError::Config(format!(
            "key `{}`: unknown stream kind `{other}`, expected moons|circles|idx_file|mutate",
            key("kind")
        ))),
    }
}

/// Builds a full run configuration from flat key-value pairs, starting at
/// the documented defaults. Rejects keys it does not know.
pub fn config_from_kv(mut map: BTreeMap<String, String>) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();

    if let Some(v) = take(&mut map, "grid.rows") {
        cfg.grid.rows = parse("grid.rows", &v)?;
    }
    if let Some(v) = take(&mut map, "grid.cols") {
        cfg.grid.cols = parse("grid.cols", &v)?;
    }
    if let Some(v) = take(&mut map, "grid.topology") {
        cfg.grid.topology = parse::<Topology>("grid.topology", &v)?;
    }
    if let Some(v) = take(&mut map, "grid.lo") {
        cfg.grid.coord_range.0 = parse("grid.lo", &v)?;
    }
    if let Some(v) = take(&mut map, "grid.hi") {
        cfg.grid.coord_range.1 = parse("grid.hi", &v)?;
    }
    if let Some(v) = take(&mut map, "eta") {
        cfg.eta = parse("eta", &v)?;
    }
    if let Some(v) = take(&mut map, "sigma0") {
        cfg.sigma0 = parse("sigma0", &v)?;
    }
    if let Some(v) = take(&mut map, "lr") {
        cfg.lr = parse("lr", &v)?;
    }
    if let Some(v) = take(&mut map, "steps") {
        cfg.steps = parse("steps", &v)?;
    }
    if let Some(v) = take(&mut map, "optimizer") {
        cfg.optimizer = v.parse()?;
    }
    if let Some(v) = take(&mut map, "algorithm") {
        cfg.algorithm = v.parse()?;
    }
    if let Some(v) = take(&mut map, "seed") {
        cfg.seed = parse("seed", &v)?;
    }
    if let Some(v) = take(&mut map, "log_interval") {
        cfg.log_interval = parse("log_interval", &v)?;
    }
    if let Some(v) = take(&mut map, "snapshot_steps") {
        cfg.snapshot_steps = Some(parse_step_list("snapshot_steps", &v)?);
    }
    if let Some(v) = take(&mut map, "output_dir") {
        cfg.output_dir = PathBuf::from(v);
    }
    if let Some(v) = take(&mut map, "sigma_min") {
        cfg.sigma_min = parse("sigma_min", &v)?;
    }
    if let Some(v) = take(&mut map, "paper_exact_gsigma") {
        cfg.paper_exact_gsigma = parse_bool("paper_exact_gsigma", &v)?;
    }
    if let Some(v) = take(&mut map, "eval_batch") {
        cfg.eval_batch = parse("eval_batch", &v)?;
    }
    let image_rows = take(&mut map, "image_rows");
    let image_cols = take(&mut map, "image_cols");
    cfg.image_shape = match (image_rows, image_cols) {
        (Some(r), Some(c)) => Some((parse("image_rows", &r)?, parse("image_cols", &c)?)),
        (None, None) => None,
        _ => {
            return Err(VdsomError::Config(
                "image_rows and image_cols must be set together".into(),
            ))
        }
    };

    cfg.stream = build_stream(&mut map, "stream", 1)?;

    if let Some((key, _)) = map.into_iter().next() {
        return Err(VdsomError::Config(format!("unknown key `{key}`")));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_step_list(key: &str, value: &str) -> Result<Vec<u64>> {
    if value.trim().is_empty() || value.trim() == "none" {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|part| parse(key, part.trim()))
        .collect()
}
