//! Train the execution-time model end to end: benchmark a small campaign,
//! split 80/10/10, train with Adam on the halving schedule, save the model
//! and the per-epoch loss curve.
//!
//! ```bash
//! cargo run --release --example train_predictor
//! ```

use epoch_oracle::bench::{run_campaign, MemorySink, MonotonicClock};
use epoch_oracle::dataset::{split, Dataset};
use epoch_oracle::featurespace::{feature_dim, HardwareProfile, SpaceSpec};
use epoch_oracle::predictor::{evaluate, save_model, train, MlpArchitecture, TrainConfig};

fn main() -> epoch_oracle::Result<()> {
    let out_dir = format!("{}/target/example-out", env!("CARGO_MANIFEST_DIR"));
    std::fs::create_dir_all(&out_dir)?;

    let hw = HardwareProfile::from_file(format!(
        "{}/data/hw/host.profile",
        env!("CARGO_MANIFEST_DIR")
    ))?;

    eprintln!("benchmarking 400 configurations (a minute or so)...");
    let spec = SpaceSpec::desk_scale(256, 32, 16);
    let mut sink = MemorySink::new();
    let mut clock = MonotonicClock::new();
    run_campaign(&spec, 400, 7, &hw, &mut clock, &mut sink)?;
    let ds = Dataset::new(sink.records);

    let splits = split(ds.len(), 0)?;
    let arch = MlpArchitecture::new(feature_dim(), vec![256, 128, 64, 32]).with_dropout(0.0);
    // A soft learning rate suits the scaled log targets of host-CPU times.
    let cfg = TrainConfig { epochs: 150, lr0: 0.01, halve_every: 60, seed: 1, ..TrainConfig::default() };
    let (model, curve) = train(&ds, &splits, &arch, &cfg)?;

    let model_path = format!("{out_dir}/host-model.txt");
    save_model(&model, &model_path)?;

    let curve_path = format!("{out_dir}/loss-curve.csv");
    let mut w = String::from("epoch,lr,train_mse,test_rmsle\n");
    for s in &curve {
        w.push_str(&format!("{},{},{},{}\n", s.epoch, s.lr, s.train_mse, s.test_rmsle));
    }
    std::fs::write(&curve_path, w)?;

    let test = evaluate(&model, &ds, &splits.test)?;
    let validation = evaluate(&model, &ds, &splits.validation)?;
    println!("test        RMSE {:.4} ms   RMSLE {:.4}", test.rmse_ms, test.rmsle);
    println!("validation  RMSE {:.4} ms   RMSLE {:.4}", validation.rmse_ms, validation.rmsle);
    println!("model -> {model_path}");
    println!("curve -> {curve_path}");
    Ok(())
}
