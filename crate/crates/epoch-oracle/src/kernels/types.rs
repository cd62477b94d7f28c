//! Activation and optimizer identifiers shared across the toolkit.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::kernels::tensor::Scalar;

/// Activation applied to a layer output. `None` leaves the pre-activation
/// untouched; `Softmax` acts over the output (channel) dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    None,
    ReLU,
    Softmax,
    Sigmoid,
    Tanh,
}

impl ActivationKind {
    /// All variants in canonical (encoding) order.
    pub const ALL: [ActivationKind; 5] = [
        ActivationKind::None,
        ActivationKind::ReLU,
        ActivationKind::Softmax,
        ActivationKind::Sigmoid,
        ActivationKind::Tanh,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&a| a == self).unwrap()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActivationKind::None => "none",
            ActivationKind::ReLU => "relu",
            ActivationKind::Softmax => "softmax",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(ActivationKind::None),
            "relu" => Ok(ActivationKind::ReLU),
            "softmax" => Ok(ActivationKind::Softmax),
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "tanh" => Ok(ActivationKind::Tanh),
            other => Err(Error::invalid(format!("unknown activation `{other}`"))),
        }
    }
}

/// Optimizer attached to a benchmarked configuration. `None` marks a pure
/// forward pass with no backpropagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    None,
    GradientDescent,
    Adadelta,
    Adagrad,
    Momentum,
    Adam,
    RmsProp,
}

impl OptimizerKind {
    /// All variants in canonical (encoding) order, `None` first.
    pub const ALL: [OptimizerKind; 7] = [
        OptimizerKind::None,
        OptimizerKind::GradientDescent,
        OptimizerKind::Adadelta,
        OptimizerKind::Adagrad,
        OptimizerKind::Momentum,
        OptimizerKind::Adam,
        OptimizerKind::RmsProp,
    ];

    /// The six trainable choices (everything but `None`).
    pub const TRAINABLE: [OptimizerKind; 6] = [
        OptimizerKind::GradientDescent,
        OptimizerKind::Adadelta,
        OptimizerKind::Adagrad,
        OptimizerKind::Momentum,
        OptimizerKind::Adam,
        OptimizerKind::RmsProp,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&o| o == self).unwrap()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::None => "none",
            OptimizerKind::GradientDescent => "gradient-descent",
            OptimizerKind::Adadelta => "adadelta",
            OptimizerKind::Adagrad => "adagrad",
            OptimizerKind::Momentum => "momentum",
            OptimizerKind::Adam => "adam",
            OptimizerKind::RmsProp => "rmsprop",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "forward" => Ok(OptimizerKind::None),
            "gradient-descent" | "gd" | "sgd" => Ok(OptimizerKind::GradientDescent),
            "adadelta" => Ok(OptimizerKind::Adadelta),
            "adagrad" => Ok(OptimizerKind::Adagrad),
            "momentum" => Ok(OptimizerKind::Momentum),
            "adam" => Ok(OptimizerKind::Adam),
            "rmsprop" | "rms-prop" => Ok(OptimizerKind::RmsProp),
            other => Err(Error::invalid(format!("unknown optimizer `{other}`"))),
        }
    }
}

/// Apply `act` in place to one output vector (a row for dense layers, the
/// channel fiber at one spatial position for convolutions).
///
/// Softmax subtracts the running maximum before exponentiation.
pub(crate) fn apply_activation<T: Scalar>(act: ActivationKind, row: &mut [T]) {
    match act {
        ActivationKind::None => {}
        ActivationKind::ReLU => {
            for v in row.iter_mut() {
                if *v < T::zero() {
                    *v = T::zero();
                }
            }
        }
        ActivationKind::Sigmoid => {
            for v in row.iter_mut() {
                *v = T::one() / (T::one() + (-*v).exp());
            }
        }
        ActivationKind::Tanh => {
            for v in row.iter_mut() {
                *v = v.tanh();
            }
        }
        ActivationKind::Softmax => {
            let mut max = T::neg_infinity();
            for &v in row.iter() {
                if v > max {
                    max = v;
                }
            }
            let mut sum = T::zero();
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v = *v / sum;
            }
        }
    }
}

/// Pull an upstream gradient back through `act`.
///
/// `pre` is the pre-activation vector, `post` the activated output,
/// `upstream` dL/d(post); the result dL/d(pre) is written to `out`.
pub(crate) fn activation_backward<T: Scalar>(
    act: ActivationKind,
    pre: &[T],
    post: &[T],
    upstream: &[T],
    out: &mut [T],
) {
    match act {
        ActivationKind::None => out.copy_from_slice(upstream),
        ActivationKind::ReLU => {
            for i in 0..out.len() {
                out[i] = if pre[i] > T::zero() { upstream[i] } else { T::zero() };
            }
        }
        ActivationKind::Sigmoid => {
            for i in 0..out.len() {
                out[i] = upstream[i] * post[i] * (T::one() - post[i]);
            }
        }
        ActivationKind::Tanh => {
            for i in 0..out.len() {
                out[i] = upstream[i] * (T::one() - post[i] * post[i]);
            }
        }
        ActivationKind::Softmax => {
            // dz_i = s_i * (g_i - sum_j g_j s_j)
            let mut dot = T::zero();
            for i in 0..out.len() {
                dot += upstream[i] * post[i];
            }
            for i in 0..out.len() {
                out[i] = post[i] * (upstream[i] - dot);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_names() {
        for a in ActivationKind::ALL {
            assert_eq!(a.as_str().parse::<ActivationKind>().unwrap(), a);
        }
        for o in OptimizerKind::ALL {
            assert_eq!(o.as_str().parse::<OptimizerKind>().unwrap(), o);
        }
        assert_eq!("sgd".parse::<OptimizerKind>().unwrap(), OptimizerKind::GradientDescent);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut row = [1.0f64, 2.0, 3.0, 400.0];
        apply_activation(ActivationKind::Softmax, &mut row);
        let sum: f64 = row.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(row.iter().all(|v| v.is_finite()));
    }
}
