//! How deep does the predictor need to be? Train one model per hidden
//! depth (1 through 7, pyramid widths) and tabulate the test RMSE.
//!
//! ```bash
//! cargo run --release --example depth_sweep
//! ```

use epoch_oracle::bench::{run_campaign, MemorySink, MonotonicClock};
use epoch_oracle::dataset::{split, Dataset};
use epoch_oracle::featurespace::{HardwareProfile, SpaceSpec};
use epoch_oracle::predictor::{default_hidden_widths, depth_sweep, TrainConfig};

fn main() -> epoch_oracle::Result<()> {
    let hw = HardwareProfile::from_file(format!(
        "{}/data/hw/host.profile",
        env!("CARGO_MANIFEST_DIR")
    ))?;

    eprintln!("benchmarking 300 configurations...");
    let spec = SpaceSpec::desk_scale(256, 32, 16);
    let mut sink = MemorySink::new();
    let mut clock = MonotonicClock::new();
    run_campaign(&spec, 300, 5, &hw, &mut clock, &mut sink)?;
    let ds = Dataset::new(sink.records);
    let splits = split(ds.len(), 0)?;

    let depths = [1, 2, 3, 4, 5, 6, 7];
    let cfg = TrainConfig { epochs: 60, lr0: 0.01, halve_every: 30, seed: 1, ..TrainConfig::default() };
    eprintln!("training {} models...", depths.len());
    let rows = depth_sweep(&ds, &splits, &depths, &cfg, 0.0, 1e-5)?;

    println!("{:>5}  {:<24} {:>12} {:>10}", "depth", "hidden widths", "rmse_ms", "rmsle");
    for row in rows {
        let widths = default_hidden_widths(row.depth)
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("/");
        println!(
            "{:>5}  {:<24} {:>12.4} {:>10.4}",
            row.depth, widths, row.test_rmse_ms, row.test_rmsle
        );
    }
    Ok(())
}
