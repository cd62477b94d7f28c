//! Tour of the analytic layer: output-shape arithmetic, FLOP counts, and
//! the feature encoding the predictor consumes.
//!
//! ```bash
//! cargo run --example flops_and_shapes
//! ```

use epoch_oracle::featurespace::{
    encode, flops_conv, flops_dense, output_dim, ConvDims, HardwareProfile, LayerConfig, SLOTS,
};
use epoch_oracle::kernels::{ActivationKind, OptimizerKind};

fn main() -> epoch_oracle::Result<()> {
    // Spatial output size: floor((H + 2P - K) / S) + 1.
    println!("output_dim(224, k=3, s=1, p=1) = {}", output_dim(224, 3, 1, 1)?);
    println!("output_dim(5, k=2, s=2, p=0)   = {}", output_dim(5, 2, 2, 0)?);

    // Forward-pass FLOPs; multiplies and adds counted separately.
    println!(
        "dense  B=64 512->512 (bias) : {:>12} FLOPs",
        flops_dense(64, 512, 512, true)?
    );
    println!(
        "conv   B=64 56x56 3x3 64->64: {:>12} FLOPs",
        flops_conv(64, 56, 3, 64, 64, 1, 1, true)?
    );

    // Feature encoding: one fixed layout for every layer kind.
    let hw = HardwareProfile::from_file(format!(
        "{}/data/hw/v100.profile",
        env!("CARGO_MANIFEST_DIR")
    ))?;
    let conv = LayerConfig::conv2d(
        32,
        ConvDims {
            matrix_size: 56,
            kernel: 3,
            input_depth: 64,
            output_depth: 64,
            stride: 1,
            padding: 1,
            has_bias: true,
        },
        ActivationKind::ReLU,
        OptimizerKind::Adam,
    );
    let fv = encode(&conv, &hw)?;
    println!("\nencoded conv layer on {} ({} slots):", hw.name, fv.values.len());
    for (slot, value) in SLOTS.iter().zip(&fv.values) {
        if *value != 0.0 {
            println!("  {:<22} = {}", slot.name, value);
        }
    }
    Ok(())
}
