//! Shared test oracles: naive reference loops, finite differences,
//! instrumented operation counts, and synthetic cost surfaces.
//!
//! Everything here is independent of the library's kernel implementations:
//! the naive loops pad explicitly and iterate in the plainest possible
//! order, and the counters literally count multiplies and adds.

#![allow(dead_code)]

use epoch_oracle::bench::{BenchmarkRecord, RecordSource};
use epoch_oracle::featurespace::{
    encode, Connectivity, HardwareProfile, LayerConfig, SpaceSpec, Technology, I_FLOPS,
};
use epoch_oracle::kernels::{Scalar, Tensor4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn host_profile() -> HardwareProfile {
    HardwareProfile {
        name: "host-cpu".into(),
        technology: Technology::Host,
        gpu_count: 1,
        memory_gb: 5.0,
        clock_mhz: 2100.0,
        bandwidth_gbps: 12.0,
        core_count: 1,
        peak_gflops: 16.8,
        connectivity: Connectivity::Host,
    }
}

/// Explicitly zero-padded copy of a (B,H,W,C) tensor.
fn pad_input<T: Scalar>(input: &Tensor4<T>, padding: usize) -> Tensor4<T> {
    let [b, h, w, c] = input.dims();
    let mut out = Tensor4::zeros([b, h + 2 * padding, w + 2 * padding, c]);
    for bi in 0..b {
        for y in 0..h {
            for x in 0..w {
                for ci in 0..c {
                    *out.at_mut(bi, y + padding, x + padding, ci) = input.at(bi, y, x, ci);
                }
            }
        }
    }
    out
}

/// Direct six-nested-loop cross-correlation over an explicitly padded input.
/// No activation.
pub fn naive_conv2d(
    input: &Tensor4<f64>,
    kernel: &Tensor4<f64>,
    bias: Option<&[f64]>,
    stride: usize,
    padding: usize,
) -> Tensor4<f64> {
    let padded = pad_input(input, padding);
    let [b, ph, pw, c_in] = padded.dims();
    let [k, _, _, c_out] = kernel.dims();
    let h_out = (ph - k) / stride + 1;
    let w_out = (pw - k) / stride + 1;
    let mut out = Tensor4::zeros([b, h_out, w_out, c_out]);
    for bi in 0..b {
        for oy in 0..h_out {
            for ox in 0..w_out {
                for co in 0..c_out {
                    let mut acc = bias.map(|bv| bv[co]).unwrap_or(0.0);
                    for ky in 0..k {
                        for kx in 0..k {
                            for ci in 0..c_in {
                                acc += padded.at(bi, oy * stride + ky, ox * stride + kx, ci)
                                    * kernel.at(ky, kx, ci, co);
                            }
                        }
                    }
                    *out.at_mut(bi, oy, ox, co) = acc;
                }
            }
        }
    }
    out
}

/// Window-scan max pool over an explicitly (-inf)-padded input.
pub fn naive_maxpool<T: Scalar>(
    input: &Tensor4<T>,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Tensor4<T> {
    let [b, h, w, c] = input.dims();
    let (ph, pw) = (h + 2 * padding, w + 2 * padding);
    let h_out = (ph - kernel) / stride + 1;
    let w_out = (pw - kernel) / stride + 1;
    let mut out = Tensor4::zeros([b, h_out, w_out, c]);
    for bi in 0..b {
        for oy in 0..h_out {
            for ox in 0..w_out {
                for ci in 0..c {
                    let mut best = T::neg_infinity();
                    for ky in 0..kernel {
                        for kx in 0..kernel {
                            let y = (oy * stride + ky) as isize - padding as isize;
                            let x = (ox * stride + kx) as isize - padding as isize;
                            let v = if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
                                T::neg_infinity()
                            } else {
                                input.at(bi, y as usize, x as usize, ci)
                            };
                            if v > best {
                                best = v;
                            }
                        }
                    }
                    *out.at_mut(bi, oy, ox, ci) = best;
                }
            }
        }
    }
    out
}

/// Count multiplies and adds of a dense forward pass by running the loops.
pub fn count_dense_flops(batch: usize, inputs: usize, outputs: usize, has_bias: bool) -> u64 {
    let mut count = 0u64;
    for _b in 0..batch {
        for _o in 0..outputs {
            count += 1; // first multiply
            for _i in 1..inputs {
                count += 2; // multiply + accumulate add
            }
            if has_bias {
                count += 1; // bias add
            }
        }
    }
    count
}

/// Count multiplies and adds of a conv forward pass by running the loops
/// over the zero-padded input (padded taps are multiplied like any other).
#[allow(clippy::too_many_arguments)]
pub fn count_conv_flops(
    batch: usize,
    matrix: usize,
    kernel: usize,
    c_in: usize,
    c_out: usize,
    stride: usize,
    padding: usize,
    has_bias: bool,
) -> u64 {
    let padded = matrix + 2 * padding;
    assert!(padded >= kernel);
    let out = (padded - kernel) / stride + 1;
    let mut count = 0u64;
    for _b in 0..batch {
        for _oy in 0..out {
            for _ox in 0..out {
                for _co in 0..c_out {
                    let mut first = true;
                    for _ky in 0..kernel {
                        for _kx in 0..kernel {
                            for _ci in 0..c_in {
                                count += if first { 1 } else { 2 };
                                first = false;
                            }
                        }
                    }
                    if has_bias {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

/// Relative error with a small floor for near-zero gradients.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Saturating occupancy factor of the synthetic cost surface.
pub fn occupancy(batch: usize) -> f64 {
    (batch as f64 / 32.0).min(1.0)
}

/// Per-optimizer cost offset (milliseconds) of the synthetic surface.
pub fn optimizer_offset_ms(config: &LayerConfig) -> f64 {
    use epoch_oracle::kernels::OptimizerKind::*;
    match config.optimizer {
        None => 0.0,
        GradientDescent => 0.05,
        Adagrad => 0.20,
        Momentum => 0.10,
        RmsProp => 0.35,
        Adadelta => 0.40,
        Adam => 0.50,
    }
}

/// Ground-truth time of the synthetic nonlinear cost surface:
/// a*FLOPs + b*FLOPs/occupancy(B) + optimizer offset, plus a small base.
pub fn surface_time_ms(config: &LayerConfig, hw: &HardwareProfile) -> f64 {
    let flops = encode(config, hw).unwrap().values[I_FLOPS];
    let a = 2e-7;
    let b = 8e-8;
    0.01 + a * flops + b * flops / occupancy(config.batch_size) + optimizer_offset_ms(config)
}

/// Synthetic benchmark records over the sampled space, with ground-truth
/// times from the saturating cost surface plus multiplicative noise.
pub fn synthetic_records(
    spec: &SpaceSpec,
    count: usize,
    seed: u64,
    hw: &HardwareProfile,
    noise: f64,
) -> Vec<BenchmarkRecord> {
    let configs = epoch_oracle::featurespace::sample_space(spec, count, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    configs
        .into_iter()
        .map(|config| {
            let clean = surface_time_ms(&config, hw);
            let noisy = clean * (1.0 + noise * gaussian(&mut rng));
            let t = noisy.max(1e-4) as f32;
            BenchmarkRecord::new(config, hw.clone(), [t; 5], RecordSource::Imported).unwrap()
        })
        .collect()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; plenty for test noise.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Desk-scale sampling space used by the synthetic-surface tests.
pub fn desk_space() -> SpaceSpec {
    SpaceSpec::desk_scale(512, 64, 32)
}
