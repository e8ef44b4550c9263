use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adam hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdamConfig<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> Default for AdamConfig<T> {
    /// η = 0.05, β = (0.9, 0.999), ε = 1e-8.
    fn default() -> Self {
        Self {
            learning_rate: T::lit(0.05),
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
        }
    }
}

impl<T: Scalar> AdamConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |b: T| b >= T::zero() && b < T::one();
        if !in_unit(self.beta1) || !in_unit(self.beta2) {
            return Err(Error::InvalidParameter("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.learning_rate > T::zero()) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        if !(self.epsilon >= T::zero()) {
            return Err(Error::InvalidParameter(
                "Adam epsilon must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Bias-corrected first and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    config: AdamConfig<T>,
    t: u64,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig<T>, dim: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            t: 0,
            m: vec![T::zero(); dim],
            v: vec![T::zero(); dim],
        })
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn config(&self) -> &AdamConfig<T> {
        &self.config
    }

    /// One update of `params` in place.
    pub fn step(&mut self, params: &mut [T], grad: &[T]) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::ShapeMismatch {
                expected: self.m.len(),
                actual: params.len().min(grad.len()),
            });
        }
        self.t += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.t as i32;
        let bias1 = T::one() - beta1.powi(t);
        let bias2 = T::one() - beta2.powi(t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (T::one() - beta1) * g;
            *v = beta2 * *v + (T::one() - beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p = *p - learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// Result of a fixed-length Adam descent.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamRun<T> {
    /// Parameters after the last update.
    pub params: Vec<T>,
    /// Loss before every update plus the final loss (`steps + 1` entries).
    pub history: Vec<T>,
    /// Lowest-loss iterate visited (first one on ties).
    pub best_params: Vec<T>,
    pub best_step: usize,
}

/// Runs exactly `steps` Adam updates on `objective`, which returns the loss
/// and its gradient at the given parameters.
pub fn adam_run<T, F>(
    initial: &[T],
    mut objective: F,
    config: AdamConfig<T>,
    steps: usize,
) -> Result<AdamRun<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
{
    if steps == 0 {
        return Err(Error::InvalidParameter("Adam needs at least one step".into()));
    }
    let mut state = AdamState::new(config, initial.len())?;
    let mut params = initial.to_vec();
    let mut history = Vec::with_capacity(steps + 1);
    let mut best_params = params.clone();
    let mut best_step = 0;
    for step in 0..=steps {
        let (loss, grad) = objective(&params)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss at step {step}")));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient at step {step}")));
        }
        if step > 0 && loss < history[best_step] {
            best_step = step;
            best_params.clone_from(&params);
        }
        history.push(loss);
        if step < steps {
            state.step(&mut params, &grad)?;
        }
    }
    Ok(AdamRun {
        params,
        history,
        best_params,
        best_step,
    })
}
