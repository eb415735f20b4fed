//! Per-sample variational objective and its stochastic gradient.
//!
//! The model attaches a Gaussian of shared bandwidth `sigma` to every
//! lattice node; the variational posterior over nodes is a softmax over
//! latent distances to the winner with radius `eta * sigma`. Minimizing the
//! resulting free energy adapts both the weights and the neighborhood
//! radius, which is what distinguishes this trainer from a scheduled SOM.
//!
//! All responsibilities and `q ln q` terms are evaluated from max-shifted
//! logits so that underflowed responsibilities contribute exactly zero and
//! no output is ever NaN for positive `sigma`.

use crate::error::{Result, VdsomError};
use crate::grid::Grid;

/// Model parameters: one weight vector per lattice node plus the shared
/// bandwidth `sigma` (observation-space units).
#[derive(Debug, Clone, PartialEq)]
pub struct MapState {
    pub weights: Vec<Vec<f64>>,
    pub sigma: f64,
}

impl MapState {
    pub fn new(weights: Vec<Vec<f64>>, sigma: f64) -> Self {
        MapState { weights, sigma }
    }

    /// Node count.
    pub fn n(&self) -> usize {
        self.weights.len()
    }

    /// Observation dimension.
    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub(crate) fn validate(&self, grid: &Grid) -> Result<()> {
        if self.sigma <= 0.0 || !self.sigma.is_finite() {
            return Err(VdsomError::InvalidArgument(format!(
                "sigma must be positive and finite, got {}",
                self.sigma
            )));
        }
        if self.weights.len() != grid.n() {
            return Err(VdsomError::DimensionMismatch {
                expected: grid.n(),
                got: self.weights.len(),
            });
        }
        let m = self.dim();
        if let Some(w) = self.weights.iter().find(|w| w.len() != m) {
            return Err(VdsomError::DimensionMismatch {
                expected: m,
                got: w.len(),
            });
        }
        Ok(())
    }
}

/// Training hyperparameters for the variational map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VdsomConfig {
    /// Elasticity: couples latent radius to bandwidth (radius = eta * sigma).
    pub eta: f64,
    /// Lower clamp applied to sigma by the optimizer steps.
    pub sigma_min: f64,
    /// Use the published elasticity factor `eta` in the bandwidth gradient
    /// instead of the derived `1/eta^2`. The two agree at eta = 1; the
    /// derived form is the one finite differences confirm.
    pub paper_exact_gsigma: bool,
}

impl Default for VdsomConfig {
    fn default() -> Self {
        VdsomConfig {
            eta: 1.0,
            sigma_min: 1e-4,
            paper_exact_gsigma: false,
        }
    }
}

impl VdsomConfig {
    pub fn with_eta(eta: f64) -> Self {
        VdsomConfig {
            eta,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.eta <= 0.0 || !self.eta.is_finite() {
            return Err(VdsomError::InvalidArgument(format!(
                "eta must be positive and finite, got {}",
                self.eta
            )));
        }
        if self.sigma_min <= 0.0 {
            return Err(VdsomError::InvalidArgument(format!(
                "sigma_min must be positive, got {}",
                self.sigma_min
            )));
        }
        Ok(())
    }
}

/// One stochastic gradient evaluation plus its diagnostics.
#[derive(Debug, Clone)]
pub struct VdsomGradient {
    /// Derivative of the per-sample objective along sigma.
    pub g_sigma: f64,
    /// Derivative along each weight vector.
    pub g_weights: Vec<Vec<f64>>,
    /// Best-matching node (lowest index on ties).
    pub winner: usize,
    /// Posterior responsibilities, summing to one.
    pub responsibilities: Vec<f64>,
    /// Per-sample objective value at the evaluation point.
    pub objective: f64,
    /// Responsibility-weighted mean squared latent distance to the winner.
    pub d_star: f64,
}

fn check_observation(x: &[f64], m: usize) -> Result<()> {
    if x.len() != m {
        return Err(VdsomError::DimensionMismatch {
            expected: m,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(VdsomError::NonFinite("observation".into()));
    }
    Ok(())
}

/// Squared observation distances `f_z = |x - w_z|^2` and the winning node.
fn quantization_errors(weights: &[Vec<f64>], x: &[f64]) -> (Vec<f64>, usize) {
    let mut f = Vec::with_capacity(weights.len());
    let mut winner = 0;
    let mut best = f64::INFINITY;
    for (z, w) in weights.iter().enumerate() {
        let fz: f64 = w.iter().zip(x).map(|(wi, xi)| (xi - wi) * (xi - wi)).sum();
        if fz < best {
            best = fz;
            winner = z;
        }
        f.push(fz);
    }
    (f, winner)
}

/// Max-shifted log-responsibilities for the logits
/// `-d_{z,winner} / (2 eta^2 sigma^2)`. Always finite.
fn log_responsibilities(dist2_row: &[f64], sigma: f64, eta: f64) -> Vec<f64> {
    let inv = 1.0 / (2.0 * eta * eta * sigma * sigma);
    let logits: Vec<f64> = dist2_row.iter().map(|d| -d * inv).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - max - lse).collect()
}

/// Posterior responsibility of every node given the winner:
/// `q_z = softmax(-d_{z,winner} / (2 eta^2 sigma^2))`.
pub fn responsibilities(grid: &Grid, winner: usize, sigma: f64, eta: f64) -> Result<Vec<f64>> {
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(VdsomError::InvalidArgument(format!(
            "sigma must be positive and finite, got {sigma}"
        )));
    }
    if eta <= 0.0 || !eta.is_finite() {
        return Err(VdsomError::InvalidArgument(format!(
            "eta must be positive and finite, got {eta}"
        )));
    }
    if winner >= grid.n() {
        return Err(VdsomError::IndexOutOfRange {
            index: winner,
            nodes: grid.n(),
        });
    }
    Ok(log_responsibilities(grid.dist2_row(winner), sigma, eta)
        .iter()
        .map(|lq| lq.exp())
        .collect())
}

/// Objective contribution of one sample with the winner pinned to `winner`:
/// `F_x = sum_z q_z (ln q_z - ln p_z)` with `ln p_z = -m ln sigma - f_z / (2 sigma^2)`.
///
/// Pinning the winner makes this function smooth in the weights and sigma,
/// which is what the finite-difference verification of [`gradient`] relies
/// on; the winner has no gradient by definition.
pub fn objective_with_winner(
    grid: &Grid,
    state: &MapState,
    cfg: &VdsomConfig,
    x: &[f64],
    winner: usize,
) -> Result<f64> {
    cfg.validate()?;
    state.validate(grid)?;
    check_observation(x, state.dim())?;
    if winner >= grid.n() {
        return Err(VdsomError::IndexOutOfRange {
            index: winner,
            nodes: grid.n(),
        });
    }

    let m = state.dim() as f64;
    let sigma = state.sigma;
    let log_q = log_responsibilities(grid.dist2_row(winner), sigma, cfg.eta);
    let mut value = 0.0;
    for (z, w) in state.weights.iter().enumerate() {
        let fz: f64 = w.iter().zip(x).map(|(wi, xi)| (xi - wi) * (xi - wi)).sum();
        let log_p = -m * sigma.ln() - fz / (2.0 * sigma * sigma);
        let q = log_q[z].exp();
        // q * log_q underflows to zero together with q; never ln(stored q).
        value += q * (log_q[z] - log_p);
    }
    Ok(value)
}

/// Per-sample objective with the winner chosen as `argmin_z |x - w_z|^2`
/// (lowest index on ties). Returns the value and the winner.
pub fn per_sample_objective(
    grid: &Grid,
    state: &MapState,
    cfg: &VdsomConfig,
    x: &[f64],
) -> Result<(f64, usize)> {
    state.validate(grid)?;
    check_observation(x, state.dim())?;
    let (_, winner) = quantization_errors(&state.weights, x);
    let value = objective_with_winner(grid, state, cfg, x, winner)?;
    Ok((value, winner))
}

/// Stochastic gradient of the per-sample objective along `(sigma, {w_z})`,
/// treating the winner and its latent-distance column as gradient-free.
///
/// The bandwidth gradient defaults to the elasticity factor `1/eta^2`,
/// which is the derivative of the softmax logits and the form that matches
/// finite differences of [`per_sample_objective`];
/// `cfg.paper_exact_gsigma` switches to the published factor `eta` (the two
/// coincide at eta = 1).
pub fn gradient(grid: &Grid, state: &MapState, cfg: &VdsomConfig, x: &[f64]) -> Result<VdsomGradient> {
    cfg.validate()?;
    state.validate(grid)?;
    check_observation(x, state.dim())?;

    let m = state.dim() as f64;
    let sigma = state.sigma;
    let (f, winner) = quantization_errors(&state.weights, x);
    let log_q = log_responsibilities(grid.dist2_row(winner), sigma, cfg.eta);
    let q: Vec<f64> = log_q.iter().map(|lq| lq.exp()).collect();
    let d_row = grid.dist2_row(winner);

    let d_star: f64 = d_row.iter().zip(&q).map(|(d, qz)| d * qz).sum();

    let elasticity_factor = if cfg.paper_exact_gsigma {
        cfg.eta
    } else {
        1.0 / (cfg.eta * cfg.eta)
    };

    let mut g_sigma_sum = 0.0;
    let mut objective = 0.0;
    for z in 0..grid.n() {
        let log_p = -m * sigma.ln() - f[z] / (2.0 * sigma * sigma);
        let organization = elasticity_factor * (1.0 + log_q[z] - log_p) * (d_row[z] - d_star);
        g_sigma_sum += (organization - f[z]) * q[z];
        objective += q[z] * (log_q[z] - log_p);
    }
    let g_sigma = m / sigma + g_sigma_sum / (sigma * sigma * sigma);

    let inv_sigma2 = 1.0 / (sigma * sigma);
    let g_weights: Vec<Vec<f64>> = state
        .weights
        .iter()
        .zip(&q)
        .map(|(w, qz)| {
            w.iter()
                .zip(x)
                .map(|(wi, xi)| -(qz * inv_sigma2) * (xi - wi))
                .collect()
        })
        .collect();

    Ok(VdsomGradient {
        g_sigma,
        g_weights,
        winner,
        responsibilities: q,
        objective,
        d_star,
    })
}
