//! Output-shape arithmetic and analytic FLOP counts.
//!
//! Multiplies and adds are counted separately; a bias costs one add per
//! output element. Activations are not counted.

use crate::error::{Error, Result};

/// Spatial output size of a strided, padded window op:
/// `floor((input + 2*padding - kernel) / stride) + 1`.
pub fn output_dim(input: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    if input < 1 || kernel < 1 || stride < 1 {
        return Err(Error::invalid("input, kernel and stride must be at least 1"));
    }
    let span = input as i64 + 2 * padding as i64 - kernel as i64;
    if span < 0 {
        return Err(Error::invalid(format!(
            "window of size {kernel} does not fit an input of size {input} with padding {padding}"
        )));
    }
    Ok((span / stride as i64) as usize + 1)
}

fn mul_all(factors: &[u64]) -> Result<u64> {
    factors.iter().try_fold(1u64, |acc, &f| {
        acc.checked_mul(f)
            .ok_or_else(|| Error::Numerical("FLOP count overflows u64".into()))
    })
}

/// FLOPs of a dense forward pass: `B*O*(2I - 1)` plus `B*O` bias adds.
pub fn flops_dense(batch: usize, inputs: usize, outputs: usize, has_bias: bool) -> Result<u64> {
    if batch < 1 || inputs < 1 || outputs < 1 {
        return Err(Error::invalid("dense FLOP count needs batch, inputs, outputs >= 1"));
    }
    let taps = mul_all(&[2, inputs as u64])? - 1;
    let mac = mul_all(&[batch as u64, outputs as u64, taps])?;
    let bias = if has_bias { mul_all(&[batch as u64, outputs as u64])? } else { 0 };
    mac.checked_add(bias).ok_or_else(|| Error::Numerical("FLOP count overflows u64".into()))
}

/// FLOPs of a conv2d forward pass:
/// `B*H_out^2*C_out*(2*K^2*C_in - 1)` plus `B*H_out^2*C_out` bias adds.
#[allow(clippy::too_many_arguments)]
pub fn flops_conv(
    batch: usize,
    matrix_size: usize,
    kernel: usize,
    input_depth: usize,
    output_depth: usize,
    stride: usize,
    padding: usize,
    has_bias: bool,
) -> Result<u64> {
    if batch < 1 || input_depth < 1 || output_depth < 1 {
        return Err(Error::invalid("conv FLOP count needs batch and channel counts >= 1"));
    }
    let h_out = output_dim(matrix_size, kernel, stride, padding)? as u64;
    let taps = mul_all(&[2, kernel as u64, kernel as u64, input_depth as u64])? - 1;
    let mac = mul_all(&[batch as u64, h_out, h_out, output_depth as u64, taps])?;
    let bias = if has_bias {
        mul_all(&[batch as u64, h_out, h_out, output_depth as u64])?
    } else {
        0
    };
    mac.checked_add(bias).ok_or_else(|| Error::Numerical("FLOP count overflows u64".into()))
}
