//! Whole-network composition: parse a description, predict every layer,
//! and aggregate the batch time T_b and epoch time E = p * T_b. Also emits
//! the forward/sgd/adam comparison across a batch-size sweep.
//!
//! ```bash
//! cargo run --release --example compose_network
//! ```

use epoch_oracle::bench::{run_campaign, MemorySink, MonotonicClock};
use epoch_oracle::composer::{compare_modes, parse_network, predict_network};
use epoch_oracle::dataset::{split, Dataset};
use epoch_oracle::featurespace::{feature_dim, HardwareProfile, SpaceSpec};
use epoch_oracle::predictor::{train, MlpArchitecture, TrainConfig};

fn main() -> epoch_oracle::Result<()> {
    let data = |rel: &str| format!("{}/data/{rel}", env!("CARGO_MANIFEST_DIR"));
    let out_dir = format!("{}/target/example-out", env!("CARGO_MANIFEST_DIR"));
    std::fs::create_dir_all(&out_dir)?;

    let hw = HardwareProfile::from_file(data("hw/host.profile"))?;

    eprintln!("benchmarking 500 configurations to train a quick model...");
    let spec = SpaceSpec::desk_scale(512, 64, 32);
    let mut sink = MemorySink::new();
    let mut clock = MonotonicClock::new();
    run_campaign(&spec, 500, 21, &hw, &mut clock, &mut sink)?;
    let ds = Dataset::new(sink.records);
    let splits = split(ds.len(), 0)?;
    let arch = MlpArchitecture::new(feature_dim(), vec![256, 128, 64, 32]).with_dropout(0.0);
    let cfg = TrainConfig { epochs: 120, lr0: 0.01, halve_every: 60, seed: 1, ..TrainConfig::default() };
    let (model, _) = train(&ds, &splits, &arch, &cfg)?;

    // The big VGG-16 description parses and composes; pool layers have no
    // records in the training data, so they show up flagged as unmodeled.
    let vgg16 = parse_network(data("nets/vgg16.net"))?;
    println!(
        "{}: {} layers, input {}x{}x{}",
        vgg16.name, vgg16.layer_count(), vgg16.input.0, vgg16.input.1, vgg16.input.2
    );

    let tiny = parse_network(data("nets/vgg_tiny.net"))?;
    let p = 100;
    let report = predict_network(&tiny, &model, &hw, p)?;
    println!("\n{} ({} mode, batch {}):", report.network, report.mode, report.batch_size);
    for l in &report.layers {
        let marker = if l.unmodeled { "  (unmodeled)" } else { "" };
        println!("  layer {:>2} {:<7} {:>10.4} ms{marker}", l.index, l.kind.to_string(), l.time_ms);
    }
    println!("  T_b = {:.4} ms\n  E   = {} * T_b = {:.4} ms", report.batch_time_ms, p, report.epoch_time_ms);

    // Forward vs sgd vs adam across batch sizes 1..64.
    let rows = compare_modes(&tiny, &model, &hw)?;
    let path = format!("{out_dir}/mode-sweep.csv");
    let mut csv = String::from("layer_index,kind,mode,batch,predicted_ms,unmodeled\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.layer_index, r.kind, r.mode, r.batch_size, r.predicted_ms,
            if r.unmodeled { 1 } else { 0 }
        ));
    }
    std::fs::write(&path, csv)?;
    println!("\nmode/batch sweep ({} rows) -> {path}", rows.len());
    Ok(())
}
