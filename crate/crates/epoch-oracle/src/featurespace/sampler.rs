//! Uniform random sampling of the configuration space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::featurespace::config::{
    ConvDims, DenseDims, LayerConfig, LayerKind, LayerShape, PoolDims, RecurrenceType,
    RecurrentDims, CONV_CHANNEL_BUDGET,
};
use crate::featurespace::flops::output_dim;
use crate::kernels::{ActivationKind, OptimizerKind};

/// Ranges and choice sets for every sampled field. Each field is drawn
/// independently and uniformly from its range.
#[derive(Debug, Clone)]
pub struct SpaceSpec {
    /// Layer kinds drawn uniformly per sample.
    pub kinds: Vec<LayerKind>,
    pub batch: (usize, usize),
    pub dense_inputs: (usize, usize),
    pub dense_outputs: (usize, usize),
    pub conv_matrix: (usize, usize),
    pub conv_kernel: (usize, usize),
    pub conv_stride: (usize, usize),
    pub conv_padding: (usize, usize),
    /// Channel counts are drawn from `1..=min(budget/matrix, cap)`.
    pub conv_channel_budget: usize,
    pub conv_channel_cap: usize,
    pub pool_kernel: (usize, usize),
    pub pool_stride: (usize, usize),
    pub pool_padding: (usize, usize),
    pub recurrent_inputs: (usize, usize),
    pub recurrent_units: (usize, usize),
    pub activations: Vec<ActivationKind>,
    pub optimizers: Vec<OptimizerKind>,
    /// Probability that a sample is a pure forward pass (optimizer `none`).
    pub forward_only_prob: f64,
}

impl Default for SpaceSpec {
    fn default() -> Self {
        SpaceSpec {
            kinds: vec![LayerKind::Dense, LayerKind::Conv2d],
            batch: (1, 64),
            dense_inputs: (1, 4096),
            dense_outputs: (1, 4096),
            conv_matrix: (1, 512),
            conv_kernel: (1, 7),
            conv_stride: (1, 4),
            conv_padding: (0, 3),
            conv_channel_budget: CONV_CHANNEL_BUDGET,
            conv_channel_cap: usize::MAX,
            pool_kernel: (1, 4),
            pool_stride: (1, 4),
            pool_padding: (0, 3),
            recurrent_inputs: (1, 4096),
            recurrent_units: (1, 4096),
            activations: vec![
                ActivationKind::None,
                ActivationKind::ReLU,
                ActivationKind::Sigmoid,
                ActivationKind::Tanh,
            ],
            optimizers: OptimizerKind::TRAINABLE.to_vec(),
            forward_only_prob: 0.5,
        }
    }
}

impl SpaceSpec {
    /// Defaults with dimension caps suitable for benchmarking on a laptop
    /// CPU: dense inputs/outputs up to `dense_cap`, conv matrices up to
    /// `matrix_cap`, channel counts up to `channel_cap`.
    pub fn desk_scale(dense_cap: usize, matrix_cap: usize, channel_cap: usize) -> Self {
        SpaceSpec {
            dense_inputs: (1, dense_cap),
            dense_outputs: (1, dense_cap),
            conv_matrix: (1, matrix_cap),
            conv_channel_cap: channel_cap,
            ..SpaceSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() || self.activations.is_empty() || self.optimizers.is_empty() {
            return Err(Error::invalid("kind/activation/optimizer choice sets must be non-empty"));
        }
        let ranges = [
            self.batch,
            self.dense_inputs,
            self.dense_outputs,
            self.conv_matrix,
            self.conv_kernel,
            self.conv_stride,
            self.pool_kernel,
            self.pool_stride,
            self.recurrent_inputs,
            self.recurrent_units,
        ];
        if ranges.iter().any(|&(lo, hi)| lo < 1 || hi < lo) {
            return Err(Error::invalid("sampling ranges must be non-empty and start at 1"));
        }
        if self.conv_padding.1 < self.conv_padding.0 || self.pool_padding.1 < self.pool_padding.0
        {
            return Err(Error::invalid("padding ranges must be non-empty"));
        }
        if !(0.0..=1.0).contains(&self.forward_only_prob) {
            return Err(Error::invalid("forward-only probability must lie in [0, 1]"));
        }
        if self.conv_channel_budget < self.conv_matrix.1 {
            return Err(Error::invalid(
                "channel budget must admit at least one channel at the largest matrix size",
            ));
        }
        Ok(())
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    rng.gen_range(lo..=hi)
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, choices: &[T]) -> T {
    choices[rng.gen_range(0..choices.len())]
}

/// Draw `count` configurations. Deterministic for a given seed.
///
/// Conv and pool window shapes are redrawn until the output dimension is at
/// least 1 (and pool padding is below the kernel), i.e. the shape tuple is
/// uniform over the valid region; all other fields stay independent.
pub fn sample_space(spec: &SpaceSpec, count: usize, seed: u64) -> Result<Vec<LayerConfig>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let kind = pick(&mut rng, &spec.kinds);
        let batch_size = draw(&mut rng, spec.batch);
        let activation = pick(&mut rng, &spec.activations);
        let optimizer = if rng.gen_bool(spec.forward_only_prob) {
            OptimizerKind::None
        } else {
            pick(&mut rng, &spec.optimizers)
        };
        let shape = match kind {
            LayerKind::Dense => LayerShape::Dense(DenseDims {
                inputs: draw(&mut rng, spec.dense_inputs),
                outputs: draw(&mut rng, spec.dense_outputs),
            }),
            LayerKind::Conv2d => {
                let (matrix_size, kernel, stride, padding) = loop {
                    let m = draw(&mut rng, spec.conv_matrix);
                    let k = draw(&mut rng, spec.conv_kernel);
                    let s = draw(&mut rng, spec.conv_stride);
                    let p = draw(&mut rng, spec.conv_padding);
                    if output_dim(m, k, s, p).is_ok() {
                        break (m, k, s, p);
                    }
                };
                let budget = (spec.conv_channel_budget / matrix_size).max(1);
                let cap = budget.min(spec.conv_channel_cap).max(1);
                LayerShape::Conv2d(ConvDims {
                    matrix_size,
                    kernel,
                    input_depth: rng.gen_range(1..=cap),
                    output_depth: rng.gen_range(1..=cap),
                    stride,
                    padding,
                    has_bias: rng.gen_bool(0.5),
                })
            }
            LayerKind::Pool => {
                let (kernel, stride, padding) = loop {
                    let k = draw(&mut rng, spec.pool_kernel);
                    let s = draw(&mut rng, spec.pool_stride);
                    let p = draw(&mut rng, spec.pool_padding);
                    if p < k {
                        break (k, s, p);
                    }
                };
                LayerShape::Pool(PoolDims { kernel, stride, padding })
            }
            LayerKind::Recurrent => LayerShape::Recurrent(RecurrentDims {
                inputs: draw(&mut rng, spec.recurrent_inputs),
                units: draw(&mut rng, spec.recurrent_units),
                recurrence: pick(&mut rng, &RecurrenceType::ALL),
                bidirectional: rng.gen_bool(0.5),
            }),
        };
        out.push(LayerConfig { batch_size, activation, optimizer, shape });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_count_yields_empty_list() {
        assert!(sample_space(&SpaceSpec::default(), 0, 7).unwrap().is_empty());
    }

    #[test]
    fn same_seed_same_samples() {
        let spec = SpaceSpec::default();
        let a = sample_space(&spec, 50, 123).unwrap();
        let b = sample_space(&spec, 50, 123).unwrap();
        assert_eq!(a, b);
        let c = sample_space(&spec, 50, 124).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn batch_size_mean_matches_uniform_range() {
        let spec = SpaceSpec { kinds: vec![LayerKind::Dense], ..SpaceSpec::default() };
        let samples = sample_space(&spec, 10_000, 42).unwrap();
        let mean =
            samples.iter().map(|c| c.batch_size as f64).sum::<f64>() / samples.len() as f64;
        assert!((mean - 32.5).abs() < 1.0, "mean batch size {mean}");
    }

    #[test]
    fn every_sample_satisfies_config_invariants() {
        let spec = SpaceSpec {
            kinds: LayerKind::ALL.to_vec(),
            activations: ActivationKind::ALL.to_vec(),
            ..SpaceSpec::default()
        };
        for cfg in sample_space(&spec, 100_000, 9).unwrap() {
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn forward_only_probability_is_respected() {
        let samples = sample_space(&SpaceSpec::default(), 10_000, 5).unwrap();
        let forward = samples.iter().filter(|c| c.forward_only()).count();
        let frac = forward as f64 / samples.len() as f64;
        assert!((frac - 0.5).abs() < 0.03, "forward-only fraction {frac}");
    }

    #[test]
    fn conv_channels_respect_the_budget() {
        let samples = sample_space(&SpaceSpec::default(), 5_000, 11).unwrap();
        for cfg in samples {
            if let LayerShape::Conv2d(c) = cfg.shape {
                assert!(c.input_depth * c.matrix_size <= CONV_CHANNEL_BUDGET);
                assert!(c.output_depth * c.matrix_size <= CONV_CHANNEL_BUDGET);
            }
        }
    }

    #[test]
    fn dense_space_cardinality_is_dwarfed_by_any_sample_count() {
        // 64 batch sizes x 4096 inputs x 4096 outputs of dimension choices:
        // over a billion combinations before activation/optimizer/direction
        // factors, so all realistic campaigns subsample the space.
        let spec = SpaceSpec::default();
        let dims = (spec.batch.1 as u64)
            * (spec.dense_inputs.1 as u64)
            * (spec.dense_outputs.1 as u64);
        assert_eq!(dims, 1_073_741_824);
        let largest_campaign = 50_000u64;
        assert!(largest_campaign < dims / 1000);
    }
}
