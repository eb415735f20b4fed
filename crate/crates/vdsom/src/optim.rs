//! Stochastic gradient descent drivers for `theta = ({w_z}, sigma)`.
//!
//! Both steppers treat the parameters as one flat vector (the weight
//! components node-major, the bandwidth last) and clamp sigma from below
//! after the update so it can never leave the positive reals.

use crate::elbo::{MapState, VdsomGradient};
use crate::error::{Result, VdsomError};

/// Adam moment accumulators over the flat parameter vector
/// (n*m weight components followed by one sigma component).
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step_count: u64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl AdamState {
    /// Fresh state with the optimizer's standard constants
    /// (beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8).
    pub fn new(nodes: usize, dim: usize, alpha: f64) -> Self {
        Self::with_hyperparameters(nodes, dim, alpha, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyperparameters(
        nodes: usize,
        dim: usize,
        alpha: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) -> Self {
        let len = nodes * dim + 1;
        AdamState {
            step_count: 0,
            alpha,
            beta1,
            beta2,
            epsilon,
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
        }
    }

    fn param_len(&self) -> usize {
        self.first_moment.len()
    }
}

fn check_gradient(theta: &MapState, grad: &VdsomGradient) -> Result<()> {
    if grad.g_weights.len() != theta.weights.len() {
        return Err(VdsomError::DimensionMismatch {
            expected: theta.weights.len(),
            got: grad.g_weights.len(),
        });
    }
    for (gw, w) in grad.g_weights.iter().zip(&theta.weights) {
        if gw.len() != w.len() {
            return Err(VdsomError::DimensionMismatch {
                expected: w.len(),
                got: gw.len(),
            });
        }
    }
    if !grad.g_sigma.is_finite() || grad.g_weights.iter().flatten().any(|g| !g.is_finite()) {
        return Err(VdsomError::NonFinite("gradient".into()));
    }
    Ok(())
}

/// One Adam update of all weight components and sigma, with the sigma
/// clamp applied after the move. Rejects non-finite gradients without
/// touching `theta` or the moments.
pub fn adam_step(
    state: &mut AdamState,
    theta: &mut MapState,
    grad: &VdsomGradient,
    sigma_min: f64,
) -> Result<()> {
    check_gradient(theta, grad)?;
    let expected = theta.n() * theta.dim() + 1;
    if state.param_len() != expected {
        return Err(VdsomError::DimensionMismatch {
            expected,
            got: state.param_len(),
        });
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let bias1 = 1.0 - state.beta1.powi(t);
    let bias2 = 1.0 - state.beta2.powi(t);

    let mut update = |idx: usize, g: f64, value: &mut f64| {
        let m = state.beta1 * state.first_moment[idx] + (1.0 - state.beta1) * g;
        let v = state.beta2 * state.second_moment[idx] + (1.0 - state.beta2) * g * g;
        state.first_moment[idx] = m;
        state.second_moment[idx] = v;
        let m_hat = m / bias1;
        let v_hat = v / bias2;
        *value -= state.alpha * m_hat / (v_hat.sqrt() + state.epsilon);
    };

    let dim = theta.dim();
    for (z, w) in theta.weights.iter_mut().enumerate() {
        for (j, wj) in w.iter_mut().enumerate() {
            update(z * dim + j, grad.g_weights[z][j], wj);
        }
    }
    let sigma_idx = theta.weights.len() * dim;
    let mut sigma = theta.sigma;
    update(sigma_idx, grad.g_sigma, &mut sigma);
    theta.sigma = sigma.max(sigma_min);
    Ok(())
}

/// Plain SGD update `theta <- theta - lr * g` with the sigma clamp.
pub fn sgd_step(theta: &mut MapState, grad: &VdsomGradient, lr: f64, sigma_min: f64) -> Result<()> {
    if !lr.is_finite() {
        return Err(VdsomError::InvalidArgument(format!(
            "learning rate must be finite, got {lr}"
        )));
    }
    check_gradient(theta, grad)?;
    for (w, gw) in theta.weights.iter_mut().zip(&grad.g_weights) {
        for (wj, gj) in w.iter_mut().zip(gw) {
            *wj -= lr * gj;
        }
    }
    theta.sigma = (theta.sigma - lr * grad.g_sigma).max(sigma_min);
    Ok(())
}
