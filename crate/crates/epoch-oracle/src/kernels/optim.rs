//! Optimizer update rules applied during benchmarked backward passes.
//!
//! The update for each kind follows the classic formulation; the constants
//! below are fixed so identical inputs always produce identical updates.

use crate::error::{Error, Result};
use crate::kernels::tensor::Scalar;
use crate::kernels::types::OptimizerKind;

pub const MOMENTUM_MU: f64 = 0.9;
pub const ADADELTA_RHO: f64 = 0.95;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const RMSPROP_RHO: f64 = 0.9;
pub const EPSILON: f64 = 1e-8;
pub const RMSPROP_EPSILON: f64 = 1e-10;

/// Per-parameter-tensor optimizer state. Buffers start at zero, so a zero
/// gradient leaves parameters untouched for every kind.
#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerState<T> {
    Stateless,
    Momentum { velocity: Vec<T> },
    Adadelta { accum: Vec<T>, accum_update: Vec<T> },
    Adagrad { accum: Vec<T> },
    Adam { first: Vec<T>, second: Vec<T> },
    RmsProp { mean_square: Vec<T> },
}

impl<T: Scalar> OptimizerState<T> {
    /// Fresh state for `kind` over a parameter tensor of length `len`.
    pub fn new(kind: OptimizerKind, len: usize) -> Result<Self> {
        let zeros = || vec![T::zero(); len];
        match kind {
            OptimizerKind::None => {
                Err(Error::invalid("optimizer `none` denotes a pure forward pass"))
            }
            OptimizerKind::GradientDescent => Ok(OptimizerState::Stateless),
            OptimizerKind::Momentum => Ok(OptimizerState::Momentum { velocity: zeros() }),
            OptimizerKind::Adadelta => {
                Ok(OptimizerState::Adadelta { accum: zeros(), accum_update: zeros() })
            }
            OptimizerKind::Adagrad => Ok(OptimizerState::Adagrad { accum: zeros() }),
            OptimizerKind::Adam => Ok(OptimizerState::Adam { first: zeros(), second: zeros() }),
            OptimizerKind::RmsProp => Ok(OptimizerState::RmsProp { mean_square: zeros() }),
        }
    }

    fn matches(&self, kind: OptimizerKind) -> bool {
        matches!(
            (self, kind),
            (OptimizerState::Stateless, OptimizerKind::GradientDescent)
                | (OptimizerState::Momentum { .. }, OptimizerKind::Momentum)
                | (OptimizerState::Adadelta { .. }, OptimizerKind::Adadelta)
                | (OptimizerState::Adagrad { .. }, OptimizerKind::Adagrad)
                | (OptimizerState::Adam { .. }, OptimizerKind::Adam)
                | (OptimizerState::RmsProp { .. }, OptimizerKind::RmsProp)
        )
    }

    fn len(&self) -> Option<usize> {
        match self {
            OptimizerState::Stateless => None,
            OptimizerState::Momentum { velocity } => Some(velocity.len()),
            OptimizerState::Adadelta { accum, .. } => Some(accum.len()),
            OptimizerState::Adagrad { accum } => Some(accum.len()),
            OptimizerState::Adam { first, .. } => Some(first.len()),
            OptimizerState::RmsProp { mean_square } => Some(mean_square.len()),
        }
    }
}

fn c<T: Scalar>(v: f64) -> T {
    T::from(v).unwrap()
}

/// Apply one update of `kind` to `params` in place. `step_index` counts
/// completed steps (0 on the first call); Adam uses it for bias correction.
pub fn optimizer_step<T: Scalar>(
    kind: OptimizerKind,
    params: &mut [T],
    grads: &[T],
    state: &mut OptimizerState<T>,
    step_index: usize,
    lr: T,
) -> Result<()> {
    if kind == OptimizerKind::None {
        return Err(Error::invalid("optimizer `none` denotes a pure forward pass"));
    }
    if params.len() != grads.len() {
        return Err(Error::invalid(format!(
            "parameter/gradient length mismatch: {} vs {}",
            params.len(),
            grads.len()
        )));
    }
    if !state.matches(kind) {
        return Err(Error::invalid(format!("optimizer state does not belong to `{kind}`")));
    }
    if let Some(len) = state.len() {
        if len != params.len() {
            return Err(Error::invalid(format!(
                "optimizer state length {} does not match parameter length {}",
                len,
                params.len()
            )));
        }
    }

    match state {
        OptimizerState::Stateless => {
            for (p, &g) in params.iter_mut().zip(grads) {
                *p -= lr * g;
            }
        }
        OptimizerState::Momentum { velocity } => {
            let mu = c::<T>(MOMENTUM_MU);
            for ((p, v), &g) in params.iter_mut().zip(velocity).zip(grads) {
                *v = mu * *v + g;
                *p -= lr * *v;
            }
        }
        OptimizerState::Adadelta { accum, accum_update } => {
            let rho = c::<T>(ADADELTA_RHO);
            let eps = c::<T>(EPSILON);
            let one_minus = T::one() - rho;
            for (((p, a), au), &g) in
                params.iter_mut().zip(accum).zip(accum_update).zip(grads)
            {
                *a = rho * *a + one_minus * g * g;
                let update = g * ((*au + eps).sqrt() / (*a + eps).sqrt());
                *au = rho * *au + one_minus * update * update;
                *p -= lr * update;
            }
        }
        OptimizerState::Adagrad { accum } => {
            let eps = c::<T>(EPSILON);
            for ((p, a), &g) in params.iter_mut().zip(accum).zip(grads) {
                *a += g * g;
                *p -= lr * g / (a.sqrt() + eps);
            }
        }
        OptimizerState::Adam { first, second } => {
            let b1 = c::<T>(ADAM_BETA1);
            let b2 = c::<T>(ADAM_BETA2);
            let eps = c::<T>(EPSILON);
            let t = (step_index + 1) as i32;
            let corr1 = T::one() - b1.powi(t);
            let corr2 = T::one() - b2.powi(t);
            for ((p, m), (v, &g)) in
                params.iter_mut().zip(first).zip(second.iter_mut().zip(grads))
            {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let m_hat = *m / corr1;
                let v_hat = *v / corr2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        OptimizerState::RmsProp { mean_square } => {
            let rho = c::<T>(RMSPROP_RHO);
            let eps = c::<T>(RMSPROP_EPSILON);
            for ((p, ms), &g) in params.iter_mut().zip(mean_square).zip(grads) {
                *ms = rho * *ms + (T::one() - rho) * g * g;
                *p -= lr * g / (*ms + eps).sqrt();
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_descent_definition() {
        let mut p = [1.0f64];
        let mut state = OptimizerState::new(OptimizerKind::GradientDescent, 1).unwrap();
        optimizer_step(OptimizerKind::GradientDescent, &mut p, &[0.5], &mut state, 0, 0.1)
            .unwrap();
        assert!((p[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged_for_every_kind() {
        for kind in OptimizerKind::TRAINABLE {
            let mut p = [1.25f64, -3.5];
            let mut state = OptimizerState::new(kind, 2).unwrap();
            optimizer_step(kind, &mut p, &[0.0, 0.0], &mut state, 0, 0.1).unwrap();
            assert_eq!(p, [1.25, -3.5], "{kind} moved params on a zero gradient");
        }
    }

    #[test]
    fn adam_first_step_is_roughly_signed_lr() {
        let mut p = [1.0f64];
        let mut state = OptimizerState::new(OptimizerKind::Adam, 1).unwrap();
        optimizer_step(OptimizerKind::Adam, &mut p, &[2.0], &mut state, 0, 0.1).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-6, "got {}", p[0]);
    }

    #[test]
    fn none_is_rejected() {
        assert!(OptimizerState::<f64>::new(OptimizerKind::None, 1).is_err());
        let mut p = [1.0f64];
        let mut state = OptimizerState::Stateless;
        assert!(
            optimizer_step(OptimizerKind::None, &mut p, &[1.0], &mut state, 0, 0.1).is_err()
        );
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let mut p = [1.0f64];
        let mut state = OptimizerState::new(OptimizerKind::Adam, 1).unwrap();
        assert!(
            optimizer_step(OptimizerKind::Momentum, &mut p, &[1.0], &mut state, 0, 0.1).is_err()
        );
    }
}
