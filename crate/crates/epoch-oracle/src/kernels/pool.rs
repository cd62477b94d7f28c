//! Max pooling over square windows.

use crate::error::{Error, Result};
use crate::featurespace::output_dim;
use crate::kernels::tensor::{Scalar, Tensor4};

/// Max over each KxK window with stride S and zero-area padding P.
///
/// Padded positions contribute negative infinity, so they are never selected;
/// `padding < kernel` is required so that every window contains at least one
/// real element.
pub fn maxpool_forward<T: Scalar>(
    input: &Tensor4<T>,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Result<Tensor4<T>> {
    if kernel < 1 || stride < 1 {
        return Err(Error::invalid("pool kernel and stride must be at least 1"));
    }
    if padding >= kernel {
        return Err(Error::invalid("pool padding must be smaller than the kernel"));
    }
    let [batch, h, w, channels] = input.dims();
    let h_out = output_dim(h, kernel, stride, padding)?;
    let w_out = output_dim(w, kernel, stride, padding)?;
    let pad = padding as isize;

    let mut out = Tensor4::zeros([batch, h_out, w_out, channels]);
    for b in 0..batch {
        for oy in 0..h_out {
            for ox in 0..w_out {
                for c in 0..channels {
                    let mut best = T::neg_infinity();
                    for ky in 0..kernel {
                        let iy = (oy * stride + ky) as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..kernel {
                            let ix = (ox * stride + kx) as isize - pad;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let v = input.at(b, iy as usize, ix as usize, c);
                            if v > best {
                                best = v;
                            }
                        }
                    }
                    *out.at_mut(b, oy, ox, c) = best;
                }
            }
        }
    }
    Ok(out)
}
