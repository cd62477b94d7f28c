//! 2D convolution (cross-correlation) with stride and zero padding.
//!
//! The accumulation order per output element is fixed: kernel y, then
//! kernel x, with the input channel innermost. Out-of-bounds taps are
//! skipped, which is arithmetically the zero-padding sum in the same order.

use crate::error::{Error, Result};
use crate::featurespace::output_dim;
use crate::kernels::tensor::{Scalar, Tensor4};
use crate::kernels::types::{activation_backward, apply_activation, ActivationKind};

/// Parameters of a conv2d layer. The kernel has dims (K, K, C_in, C_out).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T> {
    pub kernel: Tensor4<T>,
    pub bias: Option<Vec<T>>,
    pub stride: usize,
    pub padding: usize,
}

impl<T: Scalar> ConvParams<T> {
    pub fn new(
        kernel: Tensor4<T>,
        bias: Option<Vec<T>>,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let [kh, kw, _cin, cout] = kernel.dims();
        if kh == 0 || kh != kw {
            return Err(Error::invalid("kernel must be square and at least 1x1"));
        }
        if stride < 1 {
            return Err(Error::invalid("stride must be at least 1"));
        }
        if let Some(b) = &bias {
            if b.len() != cout {
                return Err(Error::invalid(format!(
                    "bias length {} does not match output depth {}",
                    b.len(),
                    cout
                )));
            }
        }
        Ok(Self { kernel, bias, stride, padding })
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel.dims()[0]
    }

    pub fn in_depth(&self) -> usize {
        self.kernel.dims()[2]
    }

    pub fn out_depth(&self) -> usize {
        self.kernel.dims()[3]
    }
}

/// Gradients of a conv layer with respect to `sum(out * upstream)`.
#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub kernel: Tensor4<T>,
    pub bias: Option<Vec<T>>,
    pub input: Tensor4<T>,
}

fn conv_output_dims<T: Scalar>(input: &Tensor4<T>, params: &ConvParams<T>) -> Result<[usize; 4]> {
    let [b, h, w, cin] = input.dims();
    if h < 1 || w < 1 {
        return Err(Error::invalid("input height and width must be at least 1"));
    }
    if cin != params.in_depth() {
        return Err(Error::invalid(format!(
            "input depth {} does not match kernel depth {}",
            cin,
            params.in_depth()
        )));
    }
    let k = params.kernel_size();
    let h_out = output_dim(h, k, params.stride, params.padding)?;
    let w_out = output_dim(w, k, params.stride, params.padding)?;
    Ok([b, h_out, w_out, params.out_depth()])
}

/// Pre-activation cross-correlation; `acc` rows start from the bias.
fn conv_preactivation<T: Scalar>(input: &Tensor4<T>, params: &ConvParams<T>) -> Result<Tensor4<T>> {
    let out_dims = conv_output_dims(input, params)?;
    let [batch, h_out, w_out, c_out] = out_dims;
    let [_, h, w, c_in] = input.dims();
    let k = params.kernel_size();
    let stride = params.stride;
    let pad = params.padding as isize;

    let mut out = Tensor4::zeros(out_dims);
    let kdata = params.kernel.data();
    for b in 0..batch {
        for oy in 0..h_out {
            for ox in 0..w_out {
                let base = out.offset(b, oy, ox, 0);
                {
                    let acc = &mut out.data_mut()[base..base + c_out];
                    if let Some(bias) = &params.bias {
                        acc.copy_from_slice(bias);
                    }
                    for ky in 0..k {
                        let iy = (oy * stride + ky) as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = (ox * stride + kx) as isize - pad;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let in_base =
                                ((b * h + iy as usize) * w + ix as usize) * c_in;
                            let in_fiber = &input.data()[in_base..in_base + c_in];
                            let k_base = ((ky * k + kx) * c_in) * c_out;
                            for (ci, &v) in in_fiber.iter().enumerate() {
                                let krow = &kdata[k_base + ci * c_out..k_base + (ci + 1) * c_out];
                                for (a, &kv) in acc.iter_mut().zip(krow) {
                                    *a += v * kv;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Forward pass: stride-S, zero-padding-P cross-correlation, optional bias,
/// then activation over the channel fiber at each spatial position.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor4<T>,
    params: &ConvParams<T>,
    act: ActivationKind,
) -> Result<Tensor4<T>> {
    let mut out = conv_preactivation(input, params)?;
    let [batch, h_out, w_out, c_out] = out.dims();
    for b in 0..batch {
        for oy in 0..h_out {
            for ox in 0..w_out {
                let base = out.offset(b, oy, ox, 0);
                apply_activation(act, &mut out.data_mut()[base..base + c_out]);
            }
        }
    }
    Ok(out)
}

/// Gradients of `sum(out * upstream)` w.r.t. kernel, bias and input.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor4<T>,
    params: &ConvParams<T>,
    act: ActivationKind,
    upstream: &Tensor4<T>,
) -> Result<ConvGrads<T>> {
    let out_dims = conv_output_dims(input, params)?;
    if upstream.dims() != out_dims {
        return Err(Error::invalid(format!(
            "upstream gradient dims {:?} do not match output dims {:?}",
            upstream.dims(),
            out_dims
        )));
    }
    let [batch, h_out, w_out, c_out] = out_dims;
    let [_, h, w, c_in] = input.dims();
    let k = params.kernel_size();
    let stride = params.stride;
    let pad = params.padding as isize;

    let pre = conv_preactivation(input, params)?;
    let mut post = pre.clone();
    for b in 0..batch {
        for oy in 0..h_out {
            for ox in 0..w_out {
                let base = post.offset(b, oy, ox, 0);
                apply_activation(act, &mut post.data_mut()[base..base + c_out]);
            }
        }
    }

    // dL/dz at every output position.
    let mut dz = Tensor4::zeros(out_dims);
    for b in 0..batch {
        for oy in 0..h_out {
            for ox in 0..w_out {
                let base = dz.offset(b, oy, ox, 0);
                let range = base..base + c_out;
                activation_backward(
                    act,
                    &pre.data()[range.clone()],
                    &post.data()[range.clone()],
                    &upstream.data()[range.clone()],
                    &mut dz.data_mut()[range],
                );
            }
        }
    }

    let mut grad_kernel = Tensor4::zeros(params.kernel.dims());
    let mut grad_bias = params.bias.as_ref().map(|_| vec![T::zero(); c_out]);
    let mut grad_input = Tensor4::zeros(input.dims());
    let kdata = params.kernel.data();

    for b in 0..batch {
        for oy in 0..h_out {
            for ox in 0..w_out {
                let dz_base = dz.offset(b, oy, ox, 0);
                let dzv = &dz.data()[dz_base..dz_base + c_out];
                if let Some(gb) = &mut grad_bias {
                    for (g, &d) in gb.iter_mut().zip(dzv) {
                        *g += d;
                    }
                }
                for ky in 0..k {
                    let iy = (oy * stride + ky) as isize - pad;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = (ox * stride + kx) as isize - pad;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let in_base = ((b * h + iy as usize) * w + ix as usize) * c_in;
                        let k_base = ((ky * k + kx) * c_in) * c_out;
                        for ci in 0..c_in {
                            let v = input.data()[in_base + ci];
                            let gk = &mut grad_kernel.data_mut()
                                [k_base + ci * c_out..k_base + (ci + 1) * c_out];
                            for (g, &d) in gk.iter_mut().zip(dzv) {
                                *g += v * d;
                            }
                            let krow = &kdata[k_base + ci * c_out..k_base + (ci + 1) * c_out];
                            let mut acc = T::zero();
                            for (&kv, &d) in krow.iter().zip(dzv) {
                                acc += kv * d;
                            }
                            grad_input.data_mut()[in_base + ci] += acc;
                        }
                    }
                }
            }
        }
    }

    Ok(ConvGrads { kernel: grad_kernel, bias: grad_bias, input: grad_input })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one_kernel_scales_input() {
        let input =
            Tensor4::new([1, 3, 3, 1], (1..=9).map(|v| v as f64).collect()).unwrap();
        let kernel = Tensor4::new([1, 1, 1, 1], vec![2.0]).unwrap();
        let params = ConvParams::new(kernel, None, 1, 0).unwrap();
        let out = conv2d_forward(&input, &params, ActivationKind::None).unwrap();
        for (o, i) in out.data().iter().zip(input.data()) {
            assert_eq!(*o, 2.0 * i);
        }
    }

    #[test]
    fn all_ones_three_by_three_sums_to_nine() {
        let input = Tensor4::new([1, 3, 3, 1], vec![1.0f64; 9]).unwrap();
        let kernel = Tensor4::new([3, 3, 1, 1], vec![1.0f64; 9]).unwrap();
        let params = ConvParams::new(kernel, None, 1, 0).unwrap();
        let out = conv2d_forward(&input, &params, ActivationKind::None).unwrap();
        assert_eq!(out.dims(), [1, 1, 1, 1]);
        assert_eq!(out.data()[0], 9.0);
    }

    #[test]
    fn too_small_output_is_rejected() {
        let input = Tensor4::new([1, 2, 2, 1], vec![1.0f64; 4]).unwrap();
        let kernel = Tensor4::new([3, 3, 1, 1], vec![1.0f64; 9]).unwrap();
        let params = ConvParams::new(kernel, None, 1, 0).unwrap();
        assert!(conv2d_forward(&input, &params, ActivationKind::None).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let input = Tensor4::new([1, 4, 4, 2], vec![0.5f64; 32]).unwrap();
        let kernel = Tensor4::new([2, 2, 2, 3], vec![0.25f64; 24]).unwrap();
        let params = ConvParams::new(kernel, Some(vec![0.1; 3]), 1, 0).unwrap();
        let upstream = Tensor4::zeros([1, 3, 3, 3]);
        let grads =
            conv2d_backward(&input, &params, ActivationKind::Sigmoid, &upstream).unwrap();
        assert!(grads.kernel.data().iter().all(|&g| g == 0.0));
        assert!(grads.bias.unwrap().iter().all(|&g| g == 0.0));
        assert!(grads.input.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn scalar_conv_matches_scalar_dense_backward() {
        // 1x1 kernel on a 1x1 image is the scalar dense case: W=2, x=3, g=1.
        let input = Tensor4::new([1, 1, 1, 1], vec![3.0f64]).unwrap();
        let kernel = Tensor4::new([1, 1, 1, 1], vec![2.0f64]).unwrap();
        let params = ConvParams::new(kernel, None, 1, 0).unwrap();
        let upstream = Tensor4::new([1, 1, 1, 1], vec![1.0f64]).unwrap();
        let grads = conv2d_backward(&input, &params, ActivationKind::None, &upstream).unwrap();
        assert_eq!(grads.kernel.data(), &[3.0]);
        assert_eq!(grads.input.data(), &[2.0]);
    }

    #[test]
    fn forward_is_pure() {
        let input = Tensor4::new([1, 4, 4, 2], vec![0.37f32; 32]).unwrap();
        let kernel = Tensor4::new([3, 3, 2, 3], vec![0.21f32; 54]).unwrap();
        let params = ConvParams::new(kernel, Some(vec![0.5; 3]), 1, 1).unwrap();
        let a = conv2d_forward(&input, &params, ActivationKind::Sigmoid).unwrap();
        let b = conv2d_forward(&input, &params, ActivationKind::Sigmoid).unwrap();
        let bits = |t: &Tensor4<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn stride_and_padding_shape_arithmetic() {
        let input = Tensor4::new([1, 5, 5, 1], vec![1.0f64; 25]).unwrap();
        let kernel = Tensor4::new([2, 2, 1, 1], vec![1.0f64; 4]).unwrap();
        let params = ConvParams::new(kernel, None, 2, 0).unwrap();
        let out = conv2d_forward(&input, &params, ActivationKind::None).unwrap();
        assert_eq!(out.dims(), [1, 2, 2, 1]);
    }
}
