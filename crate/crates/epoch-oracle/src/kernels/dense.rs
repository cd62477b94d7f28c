//! Fully connected layer, forward and backward.

use crate::error::{Error, Result};
use crate::kernels::tensor::{Matrix, Scalar};
use crate::kernels::types::{activation_backward, apply_activation, ActivationKind};

/// Parameters of a dense layer: an `inputs x outputs` weight matrix and an
/// optional bias of length `outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<T> {
    pub weights: Matrix<T>,
    pub bias: Option<Vec<T>>,
}

impl<T: Scalar> DenseParams<T> {
    pub fn new(weights: Matrix<T>, bias: Option<Vec<T>>) -> Result<Self> {
        if let Some(b) = &bias {
            if b.len() != weights.cols() {
                return Err(Error::invalid(format!(
                    "bias length {} does not match output count {}",
                    b.len(),
                    weights.cols()
                )));
            }
        }
        Ok(Self { weights, bias })
    }

    pub fn inputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.cols()
    }
}

/// Gradients of a dense layer with respect to `sum(out * upstream)`.
#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub weights: Matrix<T>,
    pub bias: Option<Vec<T>>,
    pub input: Matrix<T>,
}

fn check_dense_input<T: Scalar>(input: &Matrix<T>, params: &DenseParams<T>) -> Result<()> {
    if input.cols() != params.inputs() {
        return Err(Error::invalid(format!(
            "input has {} columns but the layer expects {}",
            input.cols(),
            params.inputs()
        )));
    }
    Ok(())
}

/// Pre-activation `input . W + bias`. Accumulation runs over the input index
/// in ascending order so repeated calls are bit-identical.
fn dense_preactivation<T: Scalar>(input: &Matrix<T>, params: &DenseParams<T>) -> Matrix<T> {
    let batch = input.rows();
    let outputs = params.outputs();
    let mut z = Matrix::zeros(batch, outputs);
    for b in 0..batch {
        let zrow = z.row_mut(b);
        if let Some(bias) = &params.bias {
            zrow.copy_from_slice(bias);
        }
        let inrow = input.row(b);
        for (i, &v) in inrow.iter().enumerate() {
            let wrow = params.weights.row(i);
            for (zo, &w) in zrow.iter_mut().zip(wrow) {
                *zo += v * w;
            }
        }
    }
    z
}

/// Forward pass: `act(input . W + bias)` for a `batch x inputs` matrix.
pub fn dense_forward<T: Scalar>(
    input: &Matrix<T>,
    params: &DenseParams<T>,
    act: ActivationKind,
) -> Result<Matrix<T>> {
    check_dense_input(input, params)?;
    let mut out = dense_preactivation(input, params);
    for b in 0..out.rows() {
        apply_activation(act, out.row_mut(b));
    }
    Ok(out)
}

/// Gradients of `sum(out * upstream)` w.r.t. weights, bias and input.
pub fn dense_backward<T: Scalar>(
    input: &Matrix<T>,
    params: &DenseParams<T>,
    act: ActivationKind,
    upstream: &Matrix<T>,
) -> Result<DenseGrads<T>> {
    check_dense_input(input, params)?;
    let batch = input.rows();
    let outputs = params.outputs();
    let inputs = params.inputs();
    if upstream.rows() != batch || upstream.cols() != outputs {
        return Err(Error::invalid(format!(
            "upstream gradient is {}x{} but the layer output is {}x{}",
            upstream.rows(),
            upstream.cols(),
            batch,
            outputs
        )));
    }

    let z = dense_preactivation(input, params);
    let mut post = z.clone();
    for b in 0..batch {
        apply_activation(act, post.row_mut(b));
    }

    // dL/dz, row by row.
    let mut dz = Matrix::zeros(batch, outputs);
    for b in 0..batch {
        activation_backward(act, z.row(b), post.row(b), upstream.row(b), dz.row_mut(b));
    }

    let mut grad_w = Matrix::zeros(inputs, outputs);
    let mut grad_bias = params.bias.as_ref().map(|_| vec![T::zero(); outputs]);
    let mut grad_in = Matrix::zeros(batch, inputs);

    for b in 0..batch {
        let dzrow = dz.row(b);
        let inrow = input.row(b);
        if let Some(gb) = &mut grad_bias {
            for (g, &d) in gb.iter_mut().zip(dzrow) {
                *g += d;
            }
        }
        for i in 0..inputs {
            let v = inrow[i];
            let gwrow = grad_w.row_mut(i);
            for (g, &d) in gwrow.iter_mut().zip(dzrow) {
                *g += v * d;
            }
        }
        let ginrow = grad_in.row_mut(b);
        for i in 0..inputs {
            let wrow = params.weights.row(i);
            let mut acc = T::zero();
            for (&w, &d) in wrow.iter().zip(dzrow) {
                acc += w * d;
            }
            ginrow[i] = acc;
        }
    }

    Ok(DenseGrads { weights: grad_w, bias: grad_bias, input: grad_in })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> Matrix<f64> {
        Matrix::new(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn identity_weights_pass_input_through() {
        let params =
            DenseParams::new(mat(2, 2, &[1.0, 0.0, 0.0, 1.0]), None).unwrap();
        let input = mat(1, 2, &[3.0, -1.0]);
        let out = dense_forward(&input, &params, ActivationKind::None).unwrap();
        assert_eq!(out.data(), &[3.0, -1.0]);
    }

    #[test]
    fn relu_clamps_negatives() {
        let params =
            DenseParams::new(mat(2, 2, &[1.0, 0.0, 0.0, 1.0]), None).unwrap();
        let input = mat(1, 2, &[3.0, -1.0]);
        let out = dense_forward(&input, &params, ActivationKind::ReLU).unwrap();
        assert_eq!(out.data(), &[3.0, 0.0]);
    }

    #[test]
    fn bias_enters_the_dot_product() {
        let params = DenseParams::new(mat(2, 1, &[1.0, 1.0]), Some(vec![1.0])).unwrap();
        let input = mat(1, 2, &[2.0, 3.0]);
        let out = dense_forward(&input, &params, ActivationKind::None).unwrap();
        assert_eq!(out.data(), &[6.0]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let params = DenseParams::new(mat(2, 2, &[1.0; 4]), None).unwrap();
        let input = mat(1, 3, &[1.0, 2.0, 3.0]);
        assert!(dense_forward(&input, &params, ActivationKind::None).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let params = DenseParams::new(mat(3, 2, &[0.5; 6]), Some(vec![0.1, 0.2])).unwrap();
        let input = mat(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let grads =
            dense_backward(&input, &params, ActivationKind::Tanh, &Matrix::zeros(2, 2)).unwrap();
        assert!(grads.weights.data().iter().all(|&g| g == 0.0));
        assert!(grads.bias.unwrap().iter().all(|&g| g == 0.0));
        assert!(grads.input.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn scalar_chain_rule() {
        // W = [[2]], input [3], upstream [1]: dW = 3, dinput = 2.
        let params = DenseParams::new(mat(1, 1, &[2.0]), None).unwrap();
        let input = mat(1, 1, &[3.0]);
        let upstream = mat(1, 1, &[1.0]);
        let grads = dense_backward(&input, &params, ActivationKind::None, &upstream).unwrap();
        assert_eq!(grads.weights.data(), &[3.0]);
        assert_eq!(grads.input.data(), &[2.0]);
    }

    #[test]
    fn forward_is_pure() {
        let params = DenseParams::new(mat(4, 3, &[0.3; 12]), Some(vec![0.1; 3])).unwrap();
        let input = mat(2, 4, &[0.7; 8]);
        let a = dense_forward(&input, &params, ActivationKind::Sigmoid).unwrap();
        let b = dense_forward(&input, &params, ActivationKind::Sigmoid).unwrap();
        let bits = |m: &Matrix<f64>| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }
}
