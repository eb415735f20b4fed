//! Time-invariant dynamic SOM baseline.
//!
//! The neighborhood width scales with the winner's quantization error
//! instead of a time schedule: nodes whose latent distance to the winner is
//! large relative to `eta^2 * |x - w_s|^2` barely move, so the map
//! self-anneals as it fits the data.

use crate::error::{Result, VdsomError};
use crate::grid::Grid;

/// Baseline state: codebook plus its two scalar hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DsomState {
    pub weights: Vec<Vec<f64>>,
    pub eta: f64,
    pub lr: f64,
}

impl DsomState {
    pub fn new(weights: Vec<Vec<f64>>, eta: f64, lr: f64) -> Result<Self> {
        if eta <= 0.0 || !eta.is_finite() {
            return Err(VdsomError::InvalidArgument(format!(
                "eta must be positive and finite, got {eta}"
            )));
        }
        if lr < 0.0 || !lr.is_finite() {
            return Err(VdsomError::InvalidArgument(format!(
                "learning rate must be nonnegative and finite, got {lr}"
            )));
        }
        Ok(DsomState { weights, eta, lr })
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }
}

/// One online update:
/// `w_i += lr * |x - w_i| * exp(-d_{i,s} / (eta^2 |x - w_s|^2)) * (x - w_i)`
/// with winner `s = argmin_i |x - w_i|` (lowest index on ties). A sample
/// that coincides with the winner weight leaves the whole map untouched.
///
/// Returns the winner index.
pub fn dsom_step(state: &mut DsomState, grid: &Grid, x: &[f64]) -> Result<usize> {
    if state.weights.len() != grid.n() {
        return Err(VdsomError::DimensionMismatch {
            expected: grid.n(),
            got: state.weights.len(),
        });
    }
    if x.len() != state.dim() {
        return Err(VdsomError::DimensionMismatch {
            expected: state.dim(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(VdsomError::NonFinite("observation".into()));
    }

    let mut winner = 0;
    let mut best = f64::INFINITY;
    let mut f = Vec::with_capacity(state.weights.len());
    for (i, w) in state.weights.iter().enumerate() {
        let fi: f64 = w.iter().zip(x).map(|(wi, xi)| (xi - wi) * (xi - wi)).sum();
        if fi < best {
            best = fi;
            winner = i;
        }
        f.push(fi);
    }

    if best == 0.0 {
        return Ok(winner);
    }

    let d_row = grid.dist2_row(winner);
    let inv_radius2 = 1.0 / (state.eta * state.eta * best);
    for (i, w) in state.weights.iter_mut().enumerate() {
        let h = (-d_row[i] * inv_radius2).exp();
        let rate = state.lr * f[i].sqrt() * h;
        for (wj, xj) in w.iter_mut().zip(x) {
            *wj += rate * (*xj - *wj);
        }
    }
    Ok(winner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};

    #[test]
    fn exact_winner_hit_freezes_map() {
        let grid = build_grid(&GridSpec::planar(2, 2, -1.0, 1.0)).unwrap();
        let weights = vec![
            vec![0.5, 0.5],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
        ];
        let mut state = DsomState::new(weights.clone(), 1.0, 0.5).unwrap();
        let winner = dsom_step(&mut state, &grid, &[0.5, 0.5]).unwrap();
        assert_eq!(winner, 0);
        assert_eq!(state.weights, weights);
    }

    #[test]
    fn single_node_closed_form() {
        let grid = build_grid(&GridSpec::toroidal(1, 1)).unwrap();
        let mut state = DsomState::new(vec![vec![0.0, 0.0]], 1.0, 0.5).unwrap();
        dsom_step(&mut state, &grid, &[1.0, 0.0]).unwrap();
        assert_eq!(state.weights[0], vec![0.5, 0.0]);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let grid = build_grid(&GridSpec::toroidal(1, 2)).unwrap();
        let mut state = DsomState::new(vec![vec![0.0], vec![3.0]], 1.0, 0.0).unwrap();
        dsom_step(&mut state, &grid, &[1.0]).unwrap();
        assert_eq!(state.weights, vec![vec![0.0], vec![3.0]]);
        assert!(DsomState::new(vec![vec![0.0]], 0.0, 0.1).is_err());
        assert!(DsomState::new(vec![vec![0.0]], 1.0, -0.1).is_err());
    }

    #[test]
    fn update_bounded_by_lr_times_squared_error() {
        let grid = build_grid(&GridSpec::planar(3, 3, -1.0, 1.0)).unwrap();
        let weights: Vec<Vec<f64>> = (0..9)
            .map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.1).cos()])
            .collect();
        let mut state = DsomState::new(weights.clone(), 1.0, 0.3).unwrap();
        let x = [2.0, -1.5];
        dsom_step(&mut state, &grid, &x).unwrap();
        for (before, after) in weights.iter().zip(&state.weights) {
            let f: f64 = before.iter().zip(x).map(|(w, xi)| (xi - w) * (xi - w)).sum();
            let moved: f64 = before
                .iter()
                .zip(after)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(moved <= 0.3 * f + 1e-12, "moved {moved}, bound {}", 0.3 * f);
        }
    }

    #[test]
    fn distant_nodes_barely_move() {
        // d / (eta^2 f_s) > 10 implies factor < e^-10
        let grid = build_grid(&GridSpec::toroidal(1, 2)).unwrap(); // d(0,1) = 1
        let weights = vec![vec![0.0], vec![5.0]];
        let mut state = DsomState::new(weights, 1.0, 1.0).unwrap();
        // winner 0 with f_s = (0.01)^2 = 1e-4; node 1 has d = 1, ratio 1e4
        dsom_step(&mut state, &grid, &[0.01]).unwrap();
        let moved = (state.weights[1][0] - 5.0).abs();
        assert!(moved < 1.0 * 5.0 * (-10.0f64).exp());
    }

    #[test]
    fn deterministic() {
        let grid = build_grid(&GridSpec::toroidal(3, 3)).unwrap();
        let run = || {
            let weights: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64, -(i as f64)]).collect();
            let mut state = DsomState::new(weights, 1.5, 0.1).unwrap();
            for k in 0..20 {
                dsom_step(&mut state, &grid, &[(k as f64).sin(), (k as f64).cos()]).unwrap();
            }
            state.weights
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let grid = build_grid(&GridSpec::toroidal(1, 1)).unwrap();
        let mut state = DsomState::new(vec![vec![0.0, 0.0]], 1.0, 0.1).unwrap();
        assert!(dsom_step(&mut state, &grid, &[1.0]).is_err());
    }
}
