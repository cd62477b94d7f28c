//! In-process CLI tests: exit codes and the bench -> train -> eval ->
//! compose pipeline at desk scale.

mod common;

use epoch_oracle::cli::run_from;
use epoch_oracle::composer::parse_network;
use epoch_oracle::dataset::{read_csv, write_csv};
use epoch_oracle::featurespace::LayerKind;

fn args(s: &str) -> Vec<String> {
    std::iter::once("epoch-oracle".to_string())
        .chain(s.split_whitespace().map(String::from))
        .collect()
}

fn data_file(rel: &str) -> String {
    format!("{}/data/{rel}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn usage_errors_exit_2() {
    // Missing required --out.
    assert_eq!(run_from(args("bench --op conv --count 1 --seed 7 --hw x.profile")), 2);
    // Unknown subcommand.
    assert_eq!(run_from(args("frobnicate")), 2);
    // Bad enum value.
    assert_eq!(run_from(args("sample --op quantum --count 1")), 2);
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    // Nonexistent hardware profile.
    let cmd = format!(
        "bench --op dense --count 1 --seed 7 --hw /nonexistent.profile --out {}",
        out.display()
    );
    assert_eq!(run_from(args(&cmd)), 1);
}

#[test]
fn sample_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let cmd = format!("sample --op both --count 25 --seed 9 --out {}", out.display());
        assert_eq!(run_from(args(&cmd)), 0);
    }
    let read = |p: &std::path::Path| std::fs::read_to_string(p).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(read(&a).lines().count(), 26); // header + 25 configs
}

#[test]
fn bench_train_eval_compose_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let model = dir.path().join("model.txt");
    let curve = dir.path().join("curve.csv");
    let hw = data_file("hw/host.profile");

    // Benchmark a small campaign on the host.
    let cmd = format!(
        "bench --op both --count 60 --seed 11 --max-dense 64 --max-matrix 16 \
         --max-channels 4 --hw {hw} --out {}",
        csv.display()
    );
    assert_eq!(run_from(args(&cmd)), 0);
    assert_eq!(read_csv(&csv).unwrap().len(), 60);

    // Re-running the same campaign resumes: no new records.
    assert_eq!(run_from(args(&cmd)), 0);
    assert_eq!(read_csv(&csv).unwrap().len(), 60);

    // Train briefly.
    let cmd = format!(
        "train --data {} --model-out {} --curve-out {} --hidden 16,8 \
         --epochs 4 --dropout 0 --seed 1 --split-seed 0",
        csv.display(),
        model.display(),
        curve.display()
    );
    assert_eq!(run_from(args(&cmd)), 0);
    let curve_text = std::fs::read_to_string(&curve).unwrap();
    assert_eq!(curve_text.lines().count(), 1 + 4, "header plus one row per epoch");

    // Evaluate with the linear baseline.
    let scatter = dir.path().join("scatter.csv");
    let cmd = format!(
        "eval --model {} --data {} --split-seed 0 --baseline --scatter-out {}",
        model.display(),
        csv.display(),
        scatter.display()
    );
    assert_eq!(run_from(args(&cmd)), 0);
    let scatter_text = std::fs::read_to_string(&scatter).unwrap();
    assert_eq!(scatter_text.lines().count(), 1 + 6 + 6); // header + test + validation

    // Predict a single configuration.
    let cmd = format!(
        "predict --model {} --hw {hw} --op dense --batch 4 --in-dim 32 --out-dim 16 \
         --act relu --optimizer adam",
        model.display()
    );
    assert_eq!(run_from(args(&cmd)), 0);

    // Compose the tiny VGG-style network; pools are unmodeled, so the
    // strict run fails with exit 1 and the explicit opt-in succeeds.
    let net = data_file("nets/vgg_tiny.net");
    let report = dir.path().join("report.csv");
    let strict = format!(
        "compose --net {net} --model {} --hw {hw} --batches 10",
        model.display()
    );
    assert_eq!(run_from(args(&strict)), 1);
    let relaxed = format!(
        "compose --net {net} --model {} --hw {hw} --batches 10 --allow-unmodeled \
         --measure --out {}",
        model.display(),
        report.display()
    );
    assert_eq!(run_from(args(&relaxed)), 0);
    let report_text = std::fs::read_to_string(&report).unwrap();
    let lines: Vec<&str> = report_text.lines().collect();
    let desc = parse_network(&net).unwrap();
    assert_eq!(lines.len(), 1 + desc.layer_count() + 1); // header + layers + totals
    assert!(lines[0].ends_with(",measured_ms"));
    assert!(lines.last().unwrap().starts_with("total,"));

    // Depth sweep over two depths.
    let depths_out = dir.path().join("depths.csv");
    let cmd = format!(
        "sweep-depth --data {} --depths 1,2 --epochs 2 --dropout 0 --seed 1 \
         --split-seed 0 --out {}",
        csv.display(),
        depths_out.display()
    );
    assert_eq!(run_from(args(&cmd)), 0);
    let depth_text = std::fs::read_to_string(&depths_out).unwrap();
    assert_eq!(depth_text.lines().count(), 1 + 2);
}

#[test]
fn shipped_vgg16_description_has_21_layers() {
    let desc = parse_network(data_file("nets/vgg16.net")).unwrap();
    assert_eq!(desc.input, (224, 224, 3));
    assert_eq!(desc.layer_count(), 21);
    let resolved = desc.resolve().unwrap();
    let count = |k: LayerKind| resolved.iter().filter(|l| l.config.kind() == k).count();
    assert_eq!(count(LayerKind::Conv2d), 13);
    assert_eq!(count(LayerKind::Pool), 5);
    assert_eq!(count(LayerKind::Dense), 3);
    // Classifier head: 7*7*512 flattened into 4096.
    match resolved[18].config.shape {
        epoch_oracle::featurespace::LayerShape::Dense(d) => {
            assert_eq!(d.inputs, 25_088);
            assert_eq!(d.outputs, 4096);
        }
        _ => panic!("layer 18 should be dense"),
    }
}

#[test]
fn shipped_hardware_profiles_match_their_table() {
    struct Row {
        file: &'static str,
        name: &'static str,
        cores: u32,
        clock: f32,
        mem: f32,
        bw: f32,
    }
    let rows = [
        Row { file: "v100", name: "V100", cores: 5120, clock: 1455.0, mem: 16.0, bw: 900.0 },
        Row { file: "p100", name: "P100", cores: 3584, clock: 1303.0, mem: 16.0, bw: 732.0 },
        Row {
            file: "gtx1080ti",
            name: "GTX1080Ti",
            cores: 3584,
            clock: 1582.0,
            mem: 11.0,
            bw: 484.0,
        },
        Row { file: "m60", name: "M60", cores: 4096, clock: 1178.0, mem: 16.0, bw: 320.0 },
        Row { file: "k80", name: "K80", cores: 2496, clock: 875.0, mem: 12.0, bw: 240.0 },
        Row { file: "k40", name: "K40", cores: 2880, clock: 875.0, mem: 12.0, bw: 288.0 },
    ];
    for row in rows {
        let p = epoch_oracle::featurespace::HardwareProfile::from_file(data_file(&format!(
            "hw/{}.profile",
            row.file
        )))
        .unwrap();
        assert_eq!(p.name, row.name);
        assert_eq!(p.core_count, row.cores);
        assert_eq!(p.clock_mhz, row.clock);
        assert_eq!(p.memory_gb, row.mem);
        assert_eq!(p.bandwidth_gbps, row.bw);
    }
}

#[test]
fn eval_rejects_foreign_schema_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    let records = common::synthetic_records(
        &common::desk_space(),
        20,
        3,
        &common::host_profile(),
        0.0,
    );
    write_csv(&records, &csv).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap().replace("bench-v1", "bench-v2");
    std::fs::write(&csv, text).unwrap();

    let model = dir.path().join("model.txt");
    let arch = epoch_oracle::predictor::MlpArchitecture::new(
        epoch_oracle::featurespace::feature_dim(),
        vec![4],
    );
    let init = epoch_oracle::predictor::init(&arch, 1).unwrap();
    epoch_oracle::predictor::save_model(&init, &model).unwrap();

    let cmd =
        format!("eval --model {} --data {} --split-seed 0", model.display(), csv.display());
    assert_eq!(run_from(args(&cmd)), 1);
}
