//! The feature taxonomy: layer configurations, hardware descriptors, FLOP
//! analytics, one-hot encodings and uniform sampling of the space.

mod config;
mod flops;
mod hardware;
mod sampler;
mod schema;

pub use config::{
    ConvDims, DenseDims, LayerConfig, LayerKind, LayerShape, PoolDims, RecurrenceType,
    RecurrentDims, CONV_CHANNEL_BUDGET,
};
pub use flops::{flops_conv, flops_dense, output_dim};
pub use hardware::{Connectivity, HardwareProfile, Technology};
pub use sampler::{sample_space, SpaceSpec};
pub use schema::{
    encode, feature_dim, FeatureVector, Slot, SlotKind, FEATURE_DIM, I_FLOPS, I_HW_BANDWIDTH,
    I_HW_CLOCK, I_HW_CORES, ONE_HOT_GROUPS, SCHEMA_ID, SLOTS,
};
