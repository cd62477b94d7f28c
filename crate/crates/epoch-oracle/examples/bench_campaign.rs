//! Benchmark a random sample of layer configurations on this host and
//! stream the records into a CSV. Re-running resumes instead of repeating.
//!
//! ```bash
//! cargo run --release --example bench_campaign
//! ```

use epoch_oracle::bench::{run_campaign, MonotonicClock};
use epoch_oracle::dataset::CsvSink;
use epoch_oracle::featurespace::{HardwareProfile, SpaceSpec};

fn main() -> epoch_oracle::Result<()> {
    let out_dir = format!("{}/target/example-out", env!("CARGO_MANIFEST_DIR"));
    std::fs::create_dir_all(&out_dir)?;
    let csv = format!("{out_dir}/campaign.csv");

    let hw = HardwareProfile::from_file(format!(
        "{}/data/hw/host.profile",
        env!("CARGO_MANIFEST_DIR")
    ))?;

    // Dense and conv configurations, capped to laptop-friendly sizes.
    let spec = SpaceSpec::desk_scale(256, 32, 16);
    let mut sink = CsvSink::open(&csv)?;
    let mut clock = MonotonicClock::new();
    let written = run_campaign(&spec, 200, 42, &hw, &mut clock, &mut sink)?;

    println!("wrote {written} new records to {csv}");
    println!("re-run this example: it will skip configurations already present");
    Ok(())
}
