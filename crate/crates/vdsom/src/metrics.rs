//! Quantitative evaluation: quantization distortion, the training time
//! series, and a topographic-organization score.

use crate::error::{Result, VdsomError};
use crate::grid::Grid;
use crate::rng::SplitMix64;

/// One sampled point of the training time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub step: u64,
    pub sigma: f64,
    pub distortion: f64,
    pub objective: f64,
}

/// A full weight matrix captured at a snapshot step.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: u64,
    pub weights: Vec<Vec<f64>>,
}

/// Time series of bandwidth, distortion and objective, with optional map
/// snapshots. Steps are strictly increasing and sigma stays positive.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
    pub snapshots: Vec<Snapshot>,
}

impl TrainLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_record(&mut self, record: LogRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.step <= last.step {
                return Err(VdsomError::InvalidArgument(format!(
                    "log steps must increase: {} after {}",
                    record.step, last.step
                )));
            }
        }
        if record.sigma <= 0.0 {
            return Err(VdsomError::InvalidArgument(format!(
                "log sigma must be positive, got {}",
                record.sigma
            )));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn push_snapshot(&mut self, step: u64, weights: Vec<Vec<f64>>) {
        self.snapshots.push(Snapshot { step, weights });
    }

    /// Record at exactly `step`, if one was sampled there.
    pub fn record_at(&self, step: u64) -> Option<&LogRecord> {
        self.records.iter().find(|r| r.step == step)
    }
}

/// Mean over the batch of the minimum squared distance to any weight.
pub fn distortion(weights: &[Vec<f64>], samples: &[Vec<f64>]) -> Result<f64> {
    if samples.is_empty() {
        return Err(VdsomError::InvalidArgument("empty sample batch".into()));
    }
    if weights.is_empty() {
        return Err(VdsomError::InvalidArgument("empty weight set".into()));
    }
    let dim = weights[0].len();
    let mut total = 0.0;
    for x in samples {
        if x.len() != dim {
            return Err(VdsomError::DimensionMismatch {
                expected: dim,
                got: x.len(),
            });
        }
        let mut best = f64::INFINITY;
        for w in weights {
            let d: f64 = w.iter().zip(x).map(|(wi, xi)| (xi - wi) * (xi - wi)).sum();
            if d < best {
                best = d;
            }
        }
        total += best;
    }
    Ok(total / samples.len() as f64)
}

/// Contrast between observation-space distances of lattice-adjacent node
/// pairs and of uniformly random distinct pairs (equal count, seeded).
/// An organized map keeps adjacent weights closer than random ones:
/// `adjacent_mean < random_mean`.
pub fn organization_score(
    grid: &Grid,
    weights: &[Vec<f64>],
    rng: &mut SplitMix64,
) -> Result<(f64, f64)> {
    let n = grid.n();
    if n < 4 {
        return Err(VdsomError::InvalidArgument(format!(
            "organization score needs at least 4 nodes, grid has {n}"
        )));
    }
    if weights.len() != n {
        return Err(VdsomError::DimensionMismatch {
            expected: n,
            got: weights.len(),
        });
    }

    let pair_distance = |i: usize, j: usize| -> f64 {
        weights[i]
            .iter()
            .zip(&weights[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };

    let edges = grid.edges();
    let adjacent_mean =
        edges.iter().map(|&(i, j)| pair_distance(i, j)).sum::<f64>() / edges.len() as f64;

    let mut random_sum = 0.0;
    for _ in 0..edges.len() {
        let i = rng.index(n);
        let mut j = rng.index(n - 1);
        if j >= i {
            j += 1;
        }
        random_sum += pair_distance(i, j);
    }
    let random_mean = random_sum / edges.len() as f64;

    Ok((adjacent_mean, random_mean))
}
