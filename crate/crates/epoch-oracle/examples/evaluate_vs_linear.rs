//! The nonlinearity argument in miniature: on a saturating cost surface,
//! the learned network beats a linear regression that sees the same numeric
//! features plus the FLOP count.
//!
//! Linear models assume time scales with operation count. Real devices
//! saturate: small batches underutilize the machine, and the optimizer
//! choice shifts cost in ways no FLOP count captures. This example builds
//! such a surface synthetically so it runs in seconds without a GPU.
//!
//! ```bash
//! cargo run --release --example evaluate_vs_linear
//! ```

use epoch_oracle::bench::{BenchmarkRecord, RecordSource};
use epoch_oracle::dataset::{split, Dataset};
use epoch_oracle::featurespace::{
    encode, feature_dim, sample_space, HardwareProfile, SpaceSpec, I_FLOPS,
};
use epoch_oracle::kernels::OptimizerKind;
use epoch_oracle::predictor::{
    evaluate, fit_linear, predict_linear, rmse, train, MlpArchitecture, TrainConfig,
};

fn main() -> epoch_oracle::Result<()> {
    let hw = HardwareProfile::from_file(format!(
        "{}/data/hw/v100.profile",
        env!("CARGO_MANIFEST_DIR")
    ))?;

    // Ground truth: a*FLOPs + b*FLOPs/occupancy(B) + optimizer offset.
    let spec = SpaceSpec::desk_scale(512, 64, 32);
    let configs = sample_space(&spec, 5000, 11)?;
    let records: Vec<BenchmarkRecord> = configs
        .into_iter()
        .map(|config| {
            let flops = encode(&config, &hw).unwrap().values[I_FLOPS];
            let occupancy = (config.batch_size as f64 / 32.0).min(1.0);
            let offset = match config.optimizer {
                OptimizerKind::None => 0.0,
                OptimizerKind::GradientDescent => 0.05,
                OptimizerKind::Momentum => 0.10,
                OptimizerKind::Adagrad => 0.20,
                OptimizerKind::RmsProp => 0.35,
                OptimizerKind::Adadelta => 0.40,
                OptimizerKind::Adam => 0.50,
            };
            let t = (0.01 + 2e-7 * flops + 8e-8 * flops / occupancy + offset) as f32;
            BenchmarkRecord::new(config, hw.clone(), [t; 5], RecordSource::Imported).unwrap()
        })
        .collect();
    let ds = Dataset::new(records);
    let splits = split(ds.len(), 0)?;

    eprintln!("training the network (~half a minute)...");
    let arch = MlpArchitecture::new(feature_dim(), vec![64, 32]).with_dropout(0.0);
    let cfg = TrainConfig { epochs: 300, lr0: 0.01, halve_every: 60, seed: 1, ..TrainConfig::default() };
    let (model, _) = train(&ds, &splits, &arch, &cfg)?;
    let mlp = evaluate(&model, &ds, &splits.test)?;

    let linear = fit_linear(&ds, &splits, true)?;
    let mut preds = Vec::new();
    let mut actual = Vec::new();
    for &i in &splits.test {
        let r = &ds.records[i];
        preds.push(predict_linear(&linear, &r.config, &r.hw)?);
        actual.push(r.median_ms as f64);
    }
    let linear_rmse = rmse(&preds, &actual)?;

    println!("test RMSE  network      : {:>8.4} ms", mlp.rmse_ms);
    println!("test RMSE  linear+flops : {:>8.4} ms", linear_rmse);
    println!("ratio                   : {:>8.3}", mlp.rmse_ms / linear_rmse);
    Ok(())
}
