//! Experiment drivers: a single training run with file emission, the
//! elasticity sweep over both algorithms, and the gradient verification
//! entry point.

use std::path::PathBuf;

use crate::config::{AlgorithmKind, OptimizerKind, RunConfig};
use crate::data::{ObservationStream, StreamSpec, EVAL_SEED_SALT};
use crate::dsom::{dsom_step, DsomState};
use crate::elbo::{gradient, MapState, VdsomConfig};
use crate::error::{Result, VdsomError};
use crate::grid::{build_grid, Grid};
use crate::metrics::{distortion, organization_score, LogRecord, TrainLog};
use crate::optim::{adam_step, sgd_step, AdamState};
use crate::render::{fmt_g9, write_csv, write_map_svg, write_weight_tiles_pgm};
use crate::rng::SplitMix64;

/// Seed perturbation for the organization-score pair sampler.
const ORG_SEED_SALT: u64 = 0x0c3a_5f91_6d2e_b744;

/// Result of one training run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub log: TrainLog,
    pub final_weights: Vec<Vec<f64>>,
    /// Final bandwidth; `None` for the DSOM baseline, which has none.
    pub final_sigma: Option<f64>,
    /// Distortion of the final map on the last phase's held-out batch.
    pub final_distortion: f64,
    /// (adjacent_mean, random_mean) of the final map, when the grid has at
    /// least four nodes.
    pub organization: Option<(f64, f64)>,
    pub emitted: Vec<PathBuf>,
}

/// Standard-normal initial weights, seeded.
fn init_weights(seed: u64, nodes: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = SplitMix64::new(seed);
    (0..nodes)
        .map(|_| (0..dim).map(|_| rng.normal()).collect())
        .collect()
}

/// Squared distance to the nearest weight and its index (lowest on ties).
fn nearest_weight(weights: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut winner = 0;
    let mut best = f64::INFINITY;
    for (i, w) in weights.iter().enumerate() {
        let d: f64 = w.iter().zip(x).map(|(wi, xi)| (xi - wi) * (xi - wi)).sum();
        if d < best {
            best = d;
            winner = i;
        }
    }
    (winner, best)
}

enum Learner {
    Vdsom {
        theta: MapState,
        vcfg: VdsomConfig,
        adam: Option<AdamState>,
        lr: f64,
    },
    Dsom(DsomState),
}

impl Learner {
    fn weights(&self) -> &Vec<Vec<f64>> {
        match self {
            Learner::Vdsom { theta, .. } => &theta.weights,
            Learner::Dsom(state) => &state.weights,
        }
    }

    fn sigma(&self) -> Option<f64> {
        match self {
            Learner::Vdsom { theta, .. } => Some(theta.sigma),
            Learner::Dsom(_) => None,
        }
    }

    /// Consumes one observation. Returns the values logged for this step:
    /// (sigma column, objective column). For the baseline the bandwidth
    /// column carries the comparable per-step radius `eta * |x - w_s|` and
    /// the objective column the winner's squared error.
    fn step(&mut self, grid: &Grid, x: &[f64], sigma_min: f64) -> Result<(f64, f64)> {
        match self {
            Learner::Vdsom {
                theta,
                vcfg,
                adam,
                lr,
            } => {
                let grad = gradient(grid, theta, vcfg, x)?;
                match adam {
                    Some(state) => adam_step(state, theta, &grad, sigma_min)?,
                    None => sgd_step(theta, &grad, *lr, sigma_min)?,
                }
                Ok((theta.sigma, grad.objective))
            }
            Learner::Dsom(state) => {
                let (_, f_s) = nearest_weight(&state.weights, x);
                dsom_step(state, grid, x)?;
                let radius = (state.eta * f_s.sqrt()).max(sigma_min);
                Ok((radius, f_s))
            }
        }
    }
}

/// Held-out evaluation batches, re-drawn at every stream phase boundary so
/// the distortion series tracks the data the run currently sees.
struct PhasedEval {
    phases: Vec<(u64, StreamSpec)>,
    next_phase: usize,
    batch_len: usize,
    batch: Vec<Vec<f64>>,
}

impl PhasedEval {
    fn new(stream: &StreamSpec, batch_len: usize) -> Result<Self> {
        let phases: Vec<(u64, StreamSpec)> = stream
            .phases()
            .into_iter()
            .map(|(start, spec)| (start, spec.clone()))
            .collect();
        let mut eval = PhasedEval {
            phases,
            next_phase: 0,
            batch_len,
            batch: Vec::new(),
        };
        eval.advance(1)?;
        Ok(eval)
    }

    /// Refreshes the batch if `step` enters a new phase.
    fn advance(&mut self, step: u64) -> Result<()> {
        while self.next_phase < self.phases.len() && self.phases[self.next_phase].0 <= step {
            let spec = self.phases[self.next_phase].1.with_salted_seed(EVAL_SEED_SALT);
            self.batch = ObservationStream::from_spec(&spec)?.take_batch(self.batch_len);
            self.next_phase += 1;
        }
        Ok(())
    }
}

struct TrainedRun {
    log: TrainLog,
    learner: Learner,
    grid: Grid,
    eval: PhasedEval,
}

fn train(config: &RunConfig, emit_dir: Option<&PathBuf>) -> Result<(TrainedRun, Vec<PathBuf>)> {
    config.validate()?;
    let grid = build_grid(&config.grid)?;
    let mut stream = ObservationStream::from_spec(&config.stream)?;
    let dim = stream.dim();
    let nodes = grid.n();

    let weights = init_weights(config.seed, nodes, dim);
    let mut learner = match config.algorithm {
        AlgorithmKind::Vdsom => Learner::Vdsom {
            theta: MapState::new(weights, config.sigma0),
            vcfg: VdsomConfig {
                eta: config.eta,
                sigma_min: config.sigma_min,
                paper_exact_gsigma: config.paper_exact_gsigma,
            },
            adam: match config.optimizer {
                OptimizerKind::Adam => Some(AdamState::new(nodes, dim, config.lr)),
                OptimizerKind::Sgd => None,
            },
            lr: config.lr,
        },
        AlgorithmKind::Dsom => Learner::Dsom(DsomState::new(weights, config.eta, config.lr)?),
    };

    let mut eval = PhasedEval::new(&config.stream, config.eval_batch)?;
    let snapshot_steps = config.snapshot_steps_or_default();
    let mut log = TrainLog::new();
    let mut emitted = Vec::new();

    let tiles = config
        .image_shape
        .filter(|(r, c)| r * c == dim && r * c > 0);

    let snapshot = |step: u64,
                        weights: &[Vec<f64>],
                        eval: &PhasedEval,
                        log: &mut TrainLog,
                        emitted: &mut Vec<PathBuf>|
     -> Result<()> {
        log.push_snapshot(step, weights.to_vec());
        if let Some(dir) = emit_dir {
            if dim == 2 {
                let path = dir.join(format!("map_step{step:06}.svg"));
                write_map_svg(&grid, weights, Some(&eval.batch), &path)?;
                emitted.push(path);
            }
            if let Some((r, c)) = tiles {
                let path = dir.join(format!("weights_step{step:06}.pgm"));
                write_weight_tiles_pgm(weights, r, c, grid.rows(), grid.cols(), &path)?;
                emitted.push(path);
            }
        }
        Ok(())
    };

    if snapshot_steps.contains(&0) {
        snapshot(0, learner.weights(), &eval, &mut log, &mut emitted)?;
    }

    for step in 1..=config.steps {
        eval.advance(step)?;
        let x = stream.next_observation();
        let (sigma_column, objective) =
            learner
                .step(&grid, &x, config.sigma_min)
                .map_err(|e| VdsomError::Stream {
                    step,
                    message: e.to_string(),
                })?;

        if step % config.log_interval == 0 {
            let d = distortion(learner.weights(), &eval.batch)?;
            log.push_record(LogRecord {
                step,
                sigma: sigma_column,
                distortion: d,
                objective,
            })?;
        }
        if step > 0 && snapshot_steps.contains(&step) {
            snapshot(step, learner.weights(), &eval, &mut log, &mut emitted)?;
        }
    }

    Ok((
        TrainedRun {
            log,
            learner,
            grid,
            eval,
        },
        emitted,
    ))
}

fn outcome_of(config: &RunConfig, run: TrainedRun, emitted: Vec<PathBuf>) -> Result<RunOutcome> {
    let final_distortion = distortion(run.learner.weights(), &run.eval.batch)?;
    let organization = if run.grid.n() >= 4 {
        let mut rng = SplitMix64::new(config.seed ^ ORG_SEED_SALT);
        Some(organization_score(
            &run.grid,
            run.learner.weights(),
            &mut rng,
        )?)
    } else {
        None
    };
    Ok(RunOutcome {
        final_sigma: run.learner.sigma(),
        final_weights: run.learner.weights().clone(),
        final_distortion,
        organization,
        log: run.log,
        emitted,
    })
}

/// Trains per the configuration and emits files under `output_dir`:
/// `train.csv` always, `map_step*.svg` snapshots for 2D observations, and
/// `weights_step*.pgm` tile sheets when the declared image shape matches
/// the observation dimension.
pub fn run_train(config: &RunConfig) -> Result<RunOutcome> {
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| VdsomError::io(&config.output_dir, e))?;
    let (run, mut emitted) = train(config, Some(&config.output_dir))?;
    let csv_path = config.output_dir.join("train.csv");
    write_csv(&run.log, &csv_path)?;
    emitted.insert(0, csv_path);
    outcome_of(config, run, emitted)
}

/// Trains without touching the filesystem; used by the sweep and by tests.
pub fn train_in_memory(config: &RunConfig) -> Result<RunOutcome> {
    let (run, emitted) = train(config, None)?;
    outcome_of(config, run, emitted)
}

/// One sweep cell.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub algorithm: AlgorithmKind,
    pub eta: f64,
    /// Final distortion on the sweep-wide shared held-out batch.
    pub distortion: f64,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<(AlgorithmKind, f64, String)>,
    pub csv_path: PathBuf,
}

/// Full training run per (algorithm, eta) pair; runs execute concurrently,
/// each on its own state, and the aggregate CSV is written once in
/// deterministic (algorithm, eta) order. Every run sees the identical
/// observation sequence and is scored on one shared held-out batch, so the
/// comparison isolates the learning rule.
pub fn run_sweep(
    base: &RunConfig,
    etas: &[f64],
    algorithms: &[AlgorithmKind],
) -> Result<SweepOutcome> {
    if etas.is_empty() {
        return Err(VdsomError::Config("sweep needs at least one eta".into()));
    }
    if algorithms.is_empty() {
        return Err(VdsomError::Config(
            "sweep needs at least one algorithm".into(),
        ));
    }
    base.validate()?;
    std::fs::create_dir_all(&base.output_dir).map_err(|e| VdsomError::io(&base.output_dir, e))?;

    let shared_eval = ObservationStream::from_spec(&base.stream.with_salted_seed(EVAL_SEED_SALT))?
        .take_batch(base.eval_batch);

    let combos: Vec<(AlgorithmKind, f64)> = algorithms
        .iter()
        .flat_map(|&alg| etas.iter().map(move |&eta| (alg, eta)))
        .collect();

    type RunResult = std::result::Result<(SweepRow, TrainLog), (AlgorithmKind, f64, String)>;
    let results: Vec<RunResult> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = combos
                .iter()
                .map(|&(alg, eta)| {
                    let shared_eval = &shared_eval;
                    scope.spawn(move || {
                        let mut config = base.clone();
                        config.algorithm = alg;
                        config.eta = eta;
                        config.snapshot_steps = Some(Vec::new());
                        let outcome =
                            train_in_memory(&config).map_err(|e| (alg, eta, e.to_string()))?;
                        let score = distortion(&outcome.final_weights, shared_eval)
                            .map_err(|e| (alg, eta, e.to_string()))?;
                        Ok((
                            SweepRow {
                                algorithm: alg,
                                eta,
                                distortion: score,
                            },
                            outcome.log,
                        ))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sweep worker panicked"))
                .collect()
        });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for result in results {
        match result {
            Ok((row, log)) => {
                let per_run = base
                    .output_dir
                    .join(format!("sweep_{}_eta{}.csv", row.algorithm, row.eta));
                write_csv(&log, &per_run)?;
                rows.push(row);
            }
            Err(failure) => failures.push(failure),
        }
    }

    let csv_path = base.output_dir.join("sweep.csv");
    let mut csv = String::from("algorithm,eta,distortion\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{}\n",
            row.algorithm,
            row.eta,
            fmt_g9(row.distortion)
        ));
    }
    std::fs::write(&csv_path, csv).map_err(|e| VdsomError::io(&csv_path, e))?;

    Ok(SweepOutcome {
        rows,
        failures,
        csv_path,
    })
}
