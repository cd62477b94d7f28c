//! Cross-hardware modeling: load the shipped GPU profiles, train one model
//! on records from several machines, and predict a machine held out of
//! training. Times here are synthetic (scaled by peak throughput) so the
//! example runs anywhere; swap in imported CSVs from real machines to use
//! this for actual hardware choices.
//!
//! ```bash
//! cargo run --release --example hardware_profiles
//! ```

use epoch_oracle::bench::{BenchmarkRecord, RecordSource};
use epoch_oracle::dataset::{split, Dataset};
use epoch_oracle::featurespace::{
    encode, feature_dim, sample_space, HardwareProfile, SpaceSpec, I_FLOPS,
};
use epoch_oracle::predictor::{evaluate, train, MlpArchitecture, TrainConfig};

fn synthesize(hw: &HardwareProfile, count: usize, seed: u64) -> Vec<BenchmarkRecord> {
    let spec = SpaceSpec::desk_scale(512, 64, 32);
    sample_space(&spec, count, seed)
        .unwrap()
        .into_iter()
        .map(|config| {
            let flops = encode(&config, hw).unwrap().values[I_FLOPS];
            let occupancy = (config.batch_size as f64 / 32.0).min(1.0);
            // Cost scales inversely with peak throughput.
            let scale = 10_000.0 / hw.peak_gflops as f64;
            let t = (0.01 + scale * (2e-7 * flops + 8e-8 * flops / occupancy)) as f32;
            BenchmarkRecord::new(config, hw.clone(), [t; 5], RecordSource::Imported).unwrap()
        })
        .collect()
}

fn main() -> epoch_oracle::Result<()> {
    let dir = format!("{}/data/hw", env!("CARGO_MANIFEST_DIR"));
    let mut profiles = Vec::new();
    for file in ["v100", "p100", "gtx1080ti", "m60", "k80", "k40"] {
        profiles.push(HardwareProfile::from_file(format!("{dir}/{file}.profile"))?);
    }
    println!("{:<10} {:>6} {:>8} {:>8} {:>10}", "name", "cores", "clock", "GB/s", "GFLOPS");
    for p in &profiles {
        println!(
            "{:<10} {:>6} {:>8.0} {:>8.0} {:>10.1}",
            p.name, p.core_count, p.clock_mhz, p.bandwidth_gbps, p.peak_gflops
        );
    }

    // Hold the V100 out entirely; train on the other five machines.
    let mut train_records = Vec::new();
    for (i, p) in profiles.iter().enumerate().skip(1) {
        train_records.extend(synthesize(p, 400, 100 + i as u64));
    }
    let held_out = synthesize(&profiles[0], 200, 99);

    let ds = Dataset::new(train_records);
    let splits = split(ds.len(), 0)?;
    let arch = MlpArchitecture::new(feature_dim(), vec![128, 64, 32]).with_dropout(0.0);
    let cfg = TrainConfig { epochs: 80, lr0: 0.01, halve_every: 40, seed: 1, ..TrainConfig::default() };
    eprintln!("training the combined model on {} records from 5 machines...", ds.len());
    let (model, _) = train(&ds, &splits, &arch, &cfg)?;

    let combined = evaluate(&model, &ds, &splits.test)?;
    println!("\ncombined-model test RMSE: {:.4} ms", combined.rmse_ms);

    let holdout_ds = Dataset::new(held_out);
    let all: Vec<usize> = (0..holdout_ds.len()).collect();
    let holdout = evaluate(&model, &holdout_ds, &all)?;
    println!("held-out {} RMSE: {:.4} ms (machine unseen in training)", profiles[0].name, holdout.rmse_ms);
    Ok(())
}
