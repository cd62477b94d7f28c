//! Property-based invariants over the harness and persistence layers.

mod common;

use common::host_profile;
use epoch_oracle::bench::{median_of_5, BenchmarkRecord, RecordSource};
use epoch_oracle::dataset::{read_csv_from, split, write_csv_to};
use epoch_oracle::featurespace::{sample_space, LayerKind, SpaceSpec};
use proptest::prelude::*;

proptest! {
    #[test]
    fn median_is_permutation_invariant(
        mut times in proptest::array::uniform5(0.001f32..1000.0),
        swaps in proptest::collection::vec((0usize..5, 0usize..5), 0..10),
    ) {
        let base = median_of_5(times).unwrap();
        for (a, b) in swaps {
            times.swap(a, b);
        }
        prop_assert_eq!(median_of_5(times).unwrap(), base);
    }

    #[test]
    fn median_is_an_element_and_centered(times in proptest::array::uniform5(0.001f32..1000.0)) {
        let m = median_of_5(times).unwrap();
        prop_assert!(times.contains(&m));
        let below = times.iter().filter(|&&t| t < m).count();
        let above = times.iter().filter(|&&t| t > m).count();
        prop_assert!(below <= 2 && above <= 2);
    }

    #[test]
    fn splits_are_disjoint_and_exhaustive(n in 10usize..400, seed in any::<u64>()) {
        let s = split(n, seed).unwrap();
        prop_assert_eq!(s.train.len(), n * 8 / 10);
        prop_assert_eq!(s.test.len(), n / 10);
        let mut all: Vec<usize> =
            s.train.iter().chain(&s.test).chain(&s.validation).copied().collect();
        prop_assert_eq!(all.len(), n);
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn csv_roundtrip_preserves_records(seed in any::<u64>(), count in 1usize..20) {
        let spec = SpaceSpec {
            kinds: vec![LayerKind::Dense, LayerKind::Conv2d, LayerKind::Pool],
            ..SpaceSpec::desk_scale(64, 16, 4)
        };
        let configs = sample_space(&spec, count, seed).unwrap();
        let hw = host_profile();
        let mut rng_state = seed;
        let mut next_time = move || {
            // xorshift; decent spread of positive f32 run times
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            ((rng_state % 1_000_000) as f32 + 1.0) / 997.0
        };
        let records: Vec<BenchmarkRecord> = configs
            .into_iter()
            .map(|c| {
                let times = [next_time(), next_time(), next_time(), next_time(), next_time()];
                BenchmarkRecord::new(c, hw.clone(), times, RecordSource::MeasuredHost).unwrap()
            })
            .collect();

        let mut buf = Vec::new();
        write_csv_to(&records, &mut buf).unwrap();
        let ds = read_csv_from(buf.as_slice()).unwrap();
        prop_assert_eq!(ds.len(), records.len());
        for (orig, back) in records.iter().zip(&ds.records) {
            prop_assert_eq!(&orig.config, &back.config);
            prop_assert_eq!(&orig.hw, &back.hw);
            prop_assert_eq!(
                orig.run_times_ms.map(f32::to_bits),
                back.run_times_ms.map(f32::to_bits)
            );
            prop_assert_eq!(orig.median_ms.to_bits(), back.median_ms.to_bits());
        }
    }

    #[test]
    fn sampled_configs_always_validate(seed in any::<u64>()) {
        let spec = SpaceSpec {
            kinds: LayerKind::ALL.to_vec(),
            ..SpaceSpec::default()
        };
        for config in sample_space(&spec, 64, seed).unwrap() {
            prop_assert!(config.validate().is_ok());
        }
    }
}
