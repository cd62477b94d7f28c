//! The full loop at desk scale: benchmark atomic operations, train the
//! model, predict a small VGG-style network layer by layer, then actually
//! measure the same layers on this host and compare.
//!
//! ```bash
//! cargo run --release --example predict_vs_measured
//! ```

use epoch_oracle::bench::{run_campaign, MemorySink, MonotonicClock};
use epoch_oracle::composer::{measure_network_host, parse_network, predict_network};
use epoch_oracle::dataset::{split, Dataset};
use epoch_oracle::featurespace::{feature_dim, HardwareProfile, SpaceSpec};
use epoch_oracle::predictor::{train, MlpArchitecture, TrainConfig};

fn main() -> epoch_oracle::Result<()> {
    let data = |rel: &str| format!("{}/data/{rel}", env!("CARGO_MANIFEST_DIR"));
    let hw = HardwareProfile::from_file(data("hw/host.profile"))?;

    eprintln!("benchmarking 800 configurations (a few minutes)...");
    let spec = SpaceSpec::desk_scale(512, 64, 32);
    let mut sink = MemorySink::new();
    let mut clock = MonotonicClock::new();
    run_campaign(&spec, 800, 33, &hw, &mut clock, &mut sink)?;
    let ds = Dataset::new(sink.records);

    eprintln!("training the 4-hidden-layer predictor...");
    let splits = split(ds.len(), 0)?;
    let arch = MlpArchitecture::new(feature_dim(), vec![256, 128, 64, 32]).with_dropout(0.0);
    let cfg = TrainConfig { epochs: 200, lr0: 0.01, halve_every: 60, seed: 1, ..TrainConfig::default() };
    let (model, _) = train(&ds, &splits, &arch, &cfg)?;

    let desc = parse_network(data("nets/vgg_tiny.net"))?;
    let predicted = predict_network(&desc, &model, &hw, 1)?;
    eprintln!("measuring the same network on this host...");
    let measured = measure_network_host(&desc)?;

    println!(
        "\n{} ({} mode, batch {}):",
        predicted.network, predicted.mode, predicted.batch_size
    );
    println!("{:>5}  {:<7} {:>12} {:>12} {:>8}", "layer", "kind", "predicted", "measured", "ratio");
    for (p, m) in predicted.layers.iter().zip(&measured.layers) {
        let ratio = if m.time_ms > 0.0 && !p.unmodeled {
            format!("{:.2}", p.time_ms / m.time_ms)
        } else {
            "-".into()
        };
        println!(
            "{:>5}  {:<7} {:>12.4} {:>12.4} {:>8}{}",
            p.index,
            p.kind.to_string(),
            p.time_ms,
            m.time_ms,
            ratio,
            if p.unmodeled { "  (unmodeled)" } else { "" }
        );
    }
    let err = 100.0 * (predicted.batch_time_ms - measured.batch_time_ms)
        / measured.batch_time_ms;
    println!(
        "\npredicted T_b {:.4} ms vs measured {:.4} ms ({err:+.1}%)",
        predicted.batch_time_ms, measured.batch_time_ms
    );
    Ok(())
}
