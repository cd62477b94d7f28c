//! Feature encoding: the fixed vector layout the predictor consumes.
//!
//! Layout: kind one-hot, batch, activation one-hot, optimizer one-hot
//! (forward-only runs are `none`), kind-specific numeric fields (absent
//! fields are 0), the analytic FLOP count, hardware numeric fields, and the
//! hardware one-hots. Values are emitted raw; scaling happens in the
//! dataset pipeline.

use crate::error::{Error, Result};
use crate::featurespace::config::{LayerConfig, LayerShape};
use crate::featurespace::flops::{flops_conv, flops_dense};
use crate::featurespace::hardware::HardwareProfile;

/// Identifier of this encoding layout; bumped whenever a slot moves.
pub const SCHEMA_ID: &str = "layer-features-v1";

/// How a slot behaves under scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotKind {
    /// Member of a one-hot group; passes through the scaler untouched.
    OneHot,
    /// A 0/1 indicator outside any one-hot group; passes through.
    Flag,
    /// Plain numeric; z-scored.
    Linear,
    /// Dimension-like numeric spanning orders of magnitude; log1p then
    /// z-scored.
    Log,
}

#[derive(Debug, Clone, Copy)]
pub struct Slot {
    pub name: &'static str,
    pub kind: SlotKind,
}

const fn slot(name: &'static str, kind: SlotKind) -> Slot {
    Slot { name, kind }
}

// Slot indices. Keep in sync with `SLOTS` below.
pub const I_KIND: usize = 0; // 4 slots
pub const I_BATCH: usize = 4;
pub const I_ACTIVATION: usize = 5; // 5 slots
pub const I_OPTIMIZER: usize = 10; // 7 slots
pub const I_DENSE_INPUTS: usize = 17;
pub const I_DENSE_OUTPUTS: usize = 18;
pub const I_CONV_MATRIX: usize = 19;
pub const I_CONV_KERNEL: usize = 20;
pub const I_CONV_CIN: usize = 21;
pub const I_CONV_COUT: usize = 22;
pub const I_CONV_STRIDE: usize = 23;
pub const I_CONV_PADDING: usize = 24;
pub const I_CONV_BIAS: usize = 25;
pub const I_POOL_KERNEL: usize = 26;
pub const I_POOL_STRIDE: usize = 27;
pub const I_POOL_PADDING: usize = 28;
pub const I_REC_INPUTS: usize = 29;
pub const I_REC_UNITS: usize = 30;
pub const I_REC_TYPE: usize = 31; // 3 slots
pub const I_REC_BIDIR: usize = 34;
pub const I_FLOPS: usize = 35;
pub const I_HW_GPU_COUNT: usize = 36;
pub const I_HW_MEMORY: usize = 37;
pub const I_HW_CLOCK: usize = 38;
pub const I_HW_BANDWIDTH: usize = 39;
pub const I_HW_CORES: usize = 40;
pub const I_HW_GFLOPS: usize = 41;
pub const I_HW_TECH: usize = 42; // 6 slots
pub const I_HW_CONN: usize = 48; // 4 slots
pub const FEATURE_DIM: usize = 52;

pub const SLOTS: [Slot; FEATURE_DIM] = [
    slot("kind=dense", SlotKind::OneHot),
    slot("kind=conv2d", SlotKind::OneHot),
    slot("kind=pool", SlotKind::OneHot),
    slot("kind=recurrent", SlotKind::OneHot),
    slot("batch", SlotKind::Log),
    slot("act=none", SlotKind::OneHot),
    slot("act=relu", SlotKind::OneHot),
    slot("act=softmax", SlotKind::OneHot),
    slot("act=sigmoid", SlotKind::OneHot),
    slot("act=tanh", SlotKind::OneHot),
    slot("opt=none", SlotKind::OneHot),
    slot("opt=gradient-descent", SlotKind::OneHot),
    slot("opt=adadelta", SlotKind::OneHot),
    slot("opt=adagrad", SlotKind::OneHot),
    slot("opt=momentum", SlotKind::OneHot),
    slot("opt=adam", SlotKind::OneHot),
    slot("opt=rmsprop", SlotKind::OneHot),
    slot("dense.inputs", SlotKind::Log),
    slot("dense.outputs", SlotKind::Log),
    slot("conv.matrix_size", SlotKind::Log),
    slot("conv.kernel", SlotKind::Log),
    slot("conv.c_in", SlotKind::Log),
    slot("conv.c_out", SlotKind::Log),
    slot("conv.stride", SlotKind::Log),
    slot("conv.padding", SlotKind::Log),
    slot("conv.has_bias", SlotKind::Flag),
    slot("pool.kernel", SlotKind::Log),
    slot("pool.stride", SlotKind::Log),
    slot("pool.padding", SlotKind::Log),
    slot("rec.inputs", SlotKind::Log),
    slot("rec.units", SlotKind::Log),
    slot("rec.type=default", SlotKind::Flag),
    slot("rec.type=lstm", SlotKind::Flag),
    slot("rec.type=gru", SlotKind::Flag),
    slot("rec.bidirectional", SlotKind::Flag),
    slot("flops", SlotKind::Log),
    slot("hw.gpu_count", SlotKind::Linear),
    slot("hw.memory_gb", SlotKind::Linear),
    slot("hw.clock_mhz", SlotKind::Linear),
    slot("hw.bandwidth_gbps", SlotKind::Linear),
    slot("hw.cores", SlotKind::Linear),
    slot("hw.peak_gflops", SlotKind::Linear),
    slot("hw.tech=turing", SlotKind::OneHot),
    slot("hw.tech=volta", SlotKind::OneHot),
    slot("hw.tech=pascal", SlotKind::OneHot),
    slot("hw.tech=maxwell", SlotKind::OneHot),
    slot("hw.tech=kepler", SlotKind::OneHot),
    slot("hw.tech=host", SlotKind::OneHot),
    slot("hw.conn=pcie3x16", SlotKind::OneHot),
    slot("hw.conn=pcie3x4", SlotKind::OneHot),
    slot("hw.conn=nvlink", SlotKind::OneHot),
    slot("hw.conn=host", SlotKind::OneHot),
];

/// One-hot groups as (start, length); each must sum to exactly 1.
pub const ONE_HOT_GROUPS: [(usize, usize); 5] = [
    (I_KIND, 4),
    (I_ACTIVATION, 5),
    (I_OPTIMIZER, 7),
    (I_HW_TECH, 6),
    (I_HW_CONN, 4),
];

pub fn feature_dim() -> usize {
    FEATURE_DIM
}

/// An encoded configuration plus the schema it was encoded under.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema_id: String,
}

impl FeatureVector {
    pub fn validate(&self) -> Result<()> {
        if self.schema_id != SCHEMA_ID {
            return Err(Error::Version(format!(
                "feature vector has schema `{}`, expected `{SCHEMA_ID}`",
                self.schema_id
            )));
        }
        if self.values.len() != FEATURE_DIM {
            return Err(Error::invalid(format!(
                "feature vector has {} slots, expected {FEATURE_DIM}",
                self.values.len()
            )));
        }
        for (start, len) in ONE_HOT_GROUPS {
            let sum: f64 = self.values[start..start + len].iter().sum();
            if sum != 1.0 {
                return Err(Error::invalid(format!(
                    "one-hot group at slot {start} sums to {sum}, expected exactly 1"
                )));
            }
        }
        Ok(())
    }
}

/// Encode a configuration/hardware pair into the fixed feature layout.
pub fn encode(config: &LayerConfig, hw: &HardwareProfile) -> Result<FeatureVector> {
    config.validate()?;
    hw.validate()?;

    let mut v = vec![0.0f64; FEATURE_DIM];
    v[I_KIND + config.kind().index()] = 1.0;
    v[I_BATCH] = config.batch_size as f64;
    v[I_ACTIVATION + config.activation.index()] = 1.0;
    v[I_OPTIMIZER + config.optimizer.index()] = 1.0;

    let flops = match &config.shape {
        LayerShape::Dense(d) => {
            v[I_DENSE_INPUTS] = d.inputs as f64;
            v[I_DENSE_OUTPUTS] = d.outputs as f64;
            // Benchmarked dense layers always carry a bias.
            flops_dense(config.batch_size, d.inputs, d.outputs, true)?
        }
        LayerShape::Conv2d(cd) => {
            v[I_CONV_MATRIX] = cd.matrix_size as f64;
            v[I_CONV_KERNEL] = cd.kernel as f64;
            v[I_CONV_CIN] = cd.input_depth as f64;
            v[I_CONV_COUT] = cd.output_depth as f64;
            v[I_CONV_STRIDE] = cd.stride as f64;
            v[I_CONV_PADDING] = cd.padding as f64;
            v[I_CONV_BIAS] = if cd.has_bias { 1.0 } else { 0.0 };
            flops_conv(
                config.batch_size,
                cd.matrix_size,
                cd.kernel,
                cd.input_depth,
                cd.output_depth,
                cd.stride,
                cd.padding,
                cd.has_bias,
            )?
        }
        LayerShape::Pool(p) => {
            v[I_POOL_KERNEL] = p.kernel as f64;
            v[I_POOL_STRIDE] = p.stride as f64;
            v[I_POOL_PADDING] = p.padding as f64;
            // Max pooling performs comparisons, not floating point math.
            0
        }
        LayerShape::Recurrent(r) => {
            v[I_REC_INPUTS] = r.inputs as f64;
            v[I_REC_UNITS] = r.units as f64;
            v[I_REC_TYPE + r.recurrence.index()] = 1.0;
            v[I_REC_BIDIR] = if r.bidirectional { 1.0 } else { 0.0 };
            0
        }
    };
    v[I_FLOPS] = flops as f64;

    v[I_HW_GPU_COUNT] = hw.gpu_count as f64;
    v[I_HW_MEMORY] = hw.memory_gb as f64;
    v[I_HW_CLOCK] = hw.clock_mhz as f64;
    v[I_HW_BANDWIDTH] = hw.bandwidth_gbps as f64;
    v[I_HW_CORES] = hw.core_count as f64;
    v[I_HW_GFLOPS] = hw.peak_gflops as f64;
    v[I_HW_TECH + hw.technology.index()] = 1.0;
    v[I_HW_CONN + hw.connectivity.index()] = 1.0;

    let fv = FeatureVector { values: v, schema_id: SCHEMA_ID.to_string() };
    fv.validate()?;
    Ok(fv)
}
