//! Command-line entry point: campaigns, training, evaluation, composition.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{run_campaign, MonotonicClock};
use crate::composer::{
    compare_modes, measure_network, parse_network, predict_network, write_report_csv,
};
use crate::dataset::{read_csv, split, CsvSink, Dataset, SplitIndices};
use crate::error::{Error, Result};
use crate::featurespace::{
    feature_dim, ConvDims, HardwareProfile, LayerConfig, LayerKind, SpaceSpec,
};
use crate::kernels::{ActivationKind, OptimizerKind};
use crate::predictor::{
    depth_sweep, evaluate, fit_linear, load_model, predict_linear, rmse, save_model, train,
    MlpArchitecture, MlpPredictor, TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "epoch-oracle",
    about = "Benchmark atomic layer operations, learn an execution-time model, \
             and compose whole-network batch/epoch estimates",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print sampled layer configurations without benchmarking them.
    Sample(SampleArgs),
    /// Benchmark sampled configurations on this host and append them to a CSV.
    Bench(BenchArgs),
    /// Train the execution-time model on a benchmark CSV.
    Train(TrainArgs),
    /// Report RMSE/RMSLE of a trained model on the test and validation splits.
    Eval(EvalArgs),
    /// Predict the batch time of a single layer configuration.
    Predict(PredictArgs),
    /// Predict (and optionally measure) a whole network description.
    Compose(ComposeArgs),
    /// Train one model per hidden-layer depth and tabulate test RMSE.
    SweepDepth(SweepDepthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OpChoice {
    Dense,
    Conv,
    Both,
}

impl OpChoice {
    fn kinds(self) -> Vec<LayerKind> {
        match self {
            OpChoice::Dense => vec![LayerKind::Dense],
            OpChoice::Conv => vec![LayerKind::Conv2d],
            OpChoice::Both => vec![LayerKind::Dense, LayerKind::Conv2d],
        }
    }
}

#[derive(Args)]
struct SpaceArgs {
    /// Layer kinds to sample.
    #[arg(long, value_enum, default_value = "both")]
    op: OpChoice,
    /// Cap on dense inputs/outputs.
    #[arg(long, default_value_t = 4096)]
    max_dense: usize,
    /// Cap on the conv matrix size.
    #[arg(long, default_value_t = 512)]
    max_matrix: usize,
    /// Extra cap on conv channel counts (the 10000/matrix budget always applies).
    #[arg(long, default_value_t = usize::MAX)]
    max_channels: usize,
}

impl SpaceArgs {
    fn space(&self) -> SpaceSpec {
        SpaceSpec {
            kinds: self.op.kinds(),
            dense_inputs: (1, self.max_dense),
            dense_outputs: (1, self.max_dense),
            conv_matrix: (1, self.max_matrix),
            conv_channel_cap: self.max_channels,
            ..SpaceSpec::default()
        }
    }
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[arg(long)]
    count: usize,
    #[arg(long, env = "EPOCH_ORACLE_SEED", default_value_t = 0)]
    seed: u64,
    /// Write the configurations here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[arg(long)]
    count: usize,
    #[arg(long, env = "EPOCH_ORACLE_SEED", default_value_t = 0)]
    seed: u64,
    /// Hardware profile file describing this host.
    #[arg(long)]
    hw: PathBuf,
    /// Output CSV; an existing file is resumed, not overwritten.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Benchmark CSV produced by `bench`.
    #[arg(long)]
    data: PathBuf,
    /// Where to store the trained model.
    #[arg(long)]
    model_out: PathBuf,
    /// Optional per-epoch loss curve CSV.
    #[arg(long)]
    curve_out: Option<PathBuf>,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "256,128,64,32")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 128)]
    batch: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    /// Halve the learning rate every this many epochs.
    #[arg(long, default_value_t = 40)]
    halve_every: usize,
    #[arg(long, default_value_t = 1e-5)]
    l2: f64,
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    #[arg(long, env = "EPOCH_ORACLE_SEED", default_value_t = 0)]
    seed: u64,
    /// Seed of the 80/10/10 split.
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// Also fit and report the linear regression baseline (with FLOPs).
    #[arg(long)]
    baseline: bool,
    /// Predicted-vs-actual scatter CSV for plotting.
    #[arg(long)]
    scatter_out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    hw: PathBuf,
    #[arg(long, value_enum)]
    op: PredictOp,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    #[arg(long, default_value = "none", value_parser = parse_activation)]
    act: ActivationKind,
    /// Optimizer; `none` predicts a pure forward pass.
    #[arg(long, default_value = "none", value_parser = parse_optimizer)]
    optimizer: OptimizerKind,
    /// Dense inputs.
    #[arg(long)]
    in_dim: Option<usize>,
    /// Dense outputs.
    #[arg(long)]
    out_dim: Option<usize>,
    /// Conv matrix size.
    #[arg(long)]
    matrix: Option<usize>,
    /// Conv kernel size.
    #[arg(long)]
    kernel: Option<usize>,
    #[arg(long)]
    c_in: Option<usize>,
    #[arg(long)]
    c_out: Option<usize>,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, default_value_t = 0)]
    padding: usize,
    /// Conv bias flag (0 or 1).
    #[arg(long, default_value_t = 1)]
    bias: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PredictOp {
    Dense,
    Conv,
}

#[derive(Args)]
struct ComposeArgs {
    /// Network description file.
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    hw: PathBuf,
    /// Batch count p; the epoch estimate is p times the batch time.
    #[arg(long, default_value_t = 1)]
    batches: u64,
    /// Also measure every layer on this host (reference kernels).
    #[arg(long)]
    measure: bool,
    /// Keep going when the model does not cover a layer kind; such layers
    /// are reported as unmodeled with zero predicted time.
    #[arg(long)]
    allow_unmodeled: bool,
    /// Per-layer report CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Mode-comparison CSV: forward/sgd/adam across a batch-size sweep.
    #[arg(long)]
    sweep_modes: Option<PathBuf>,
}

#[derive(Args)]
struct SweepDepthArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7")]
    depths: Vec<usize>,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 128)]
    batch: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 40)]
    halve_every: usize,
    #[arg(long, default_value_t = 1e-5)]
    l2: f64,
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    #[arg(long, env = "EPOCH_ORACLE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// Depth-vs-RMSE CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_activation(s: &str) -> std::result::Result<ActivationKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_optimizer(s: &str) -> std::result::Result<OptimizerKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Run from process arguments.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Run with explicit arguments; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Sample(args) => cmd_sample(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Compose(args) => cmd_compose(args),
        Command::SweepDepth(args) => cmd_sweep_depth(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout()),
    })
}

fn cmd_sample(args: SampleArgs) -> Result<()> {
    let configs =
        crate::featurespace::sample_space(&args.space.space(), args.count, args.seed)?;
    let mut out = open_out(&args.out)?;
    writeln!(
        out,
        "op_type,batch,activation,optimizer,direction,in_dim,out_dim,matrix_size,kernel,\
         c_in,c_out,stride,padding,has_bias"
    )?;
    for c in configs {
        writeln!(out, "{}", c.csv_fields().join(","))?;
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let hw = HardwareProfile::from_file(&args.hw)?;
    let mut sink = CsvSink::open(&args.out)?;
    let mut clock = MonotonicClock::new();
    let written =
        run_campaign(&args.space.space(), args.count, args.seed, &hw, &mut clock, &mut sink)?;
    eprintln!("wrote {written} records to {}", args.out.display());
    Ok(())
}

fn load_dataset_with_split(data: &PathBuf, split_seed: u64) -> Result<(Dataset, SplitIndices)> {
    let ds = read_csv(data)?;
    let splits = split(ds.len(), split_seed)?;
    Ok((ds, splits))
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let (ds, splits) = load_dataset_with_split(&args.data, args.split_seed)?;
    let arch = MlpArchitecture::new(feature_dim(), args.hidden.clone())
        .with_dropout(args.dropout)
        .with_l2(args.l2);
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        lr0: args.lr,
        halve_every: args.halve_every,
        seed: args.seed,
    };
    let (model, curve) = train(&ds, &splits, &arch, &cfg)?;
    save_model(&model, &args.model_out)?;
    if let Some(curve_path) = &args.curve_out {
        let mut out = std::io::BufWriter::new(std::fs::File::create(curve_path)?);
        writeln!(out, "epoch,lr,train_mse,test_rmsle")?;
        for s in &curve {
            writeln!(out, "{},{},{},{}", s.epoch, s.lr, s.train_mse, s.test_rmsle)?;
        }
    }
    let last = curve.last().expect("at least one epoch");
    println!(
        "trained {} epochs on {} records; final test RMSLE {:.6}",
        curve.len(),
        ds.len(),
        last.test_rmsle
    );
    println!("model written to {}", args.model_out.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let (ds, splits) = load_dataset_with_split(&args.data, args.split_seed)?;
    let model = load_model(&args.model)?;
    let test = evaluate(&model, &ds, &splits.test)?;
    let validation = evaluate(&model, &ds, &splits.validation)?;
    println!("mlp test        RMSE {:.6} ms  RMSLE {:.6}", test.rmse_ms, test.rmsle);
    println!(
        "mlp validation  RMSE {:.6} ms  RMSLE {:.6}",
        validation.rmse_ms, validation.rmsle
    );

    if args.baseline {
        let linear = fit_linear(&ds, &splits, true)?;
        let eval_linear = |indices: &[usize]| -> Result<f64> {
            let mut preds = Vec::with_capacity(indices.len());
            let mut actual = Vec::with_capacity(indices.len());
            for &i in indices {
                let r = &ds.records[i];
                preds.push(predict_linear(&linear, &r.config, &r.hw)?);
                actual.push(r.median_ms as f64);
            }
            rmse(&preds, &actual)
        };
        println!("linear+flops test        RMSE {:.6} ms", eval_linear(&splits.test)?);
        println!("linear+flops validation  RMSE {:.6} ms", eval_linear(&splits.validation)?);
    }

    if let Some(path) = &args.scatter_out {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "split,predicted_ms,actual_ms")?;
        for (p, a) in &test.points {
            writeln!(out, "test,{p},{a}")?;
        }
        for (p, a) in &validation.points {
            writeln!(out, "validation,{p},{a}")?;
        }
    }
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let hw = HardwareProfile::from_file(&args.hw)?;
    let missing = |what: &str| Error::invalid(format!("--{what} is required for this op"));
    let config = match args.op {
        PredictOp::Dense => LayerConfig::dense(
            args.batch,
            args.in_dim.ok_or_else(|| missing("in-dim"))?,
            args.out_dim.ok_or_else(|| missing("out-dim"))?,
            args.act,
            args.optimizer,
        ),
        PredictOp::Conv => LayerConfig::conv2d(
            args.batch,
            ConvDims {
                matrix_size: args.matrix.ok_or_else(|| missing("matrix"))?,
                kernel: args.kernel.ok_or_else(|| missing("kernel"))?,
                input_depth: args.c_in.ok_or_else(|| missing("c-in"))?,
                output_depth: args.c_out.ok_or_else(|| missing("c-out"))?,
                stride: args.stride,
                padding: args.padding,
                has_bias: args.bias != 0,
            },
            args.act,
            args.optimizer,
        ),
    };
    let ms = model.predict_time_ms(&config, &hw)?;
    println!("{ms:.6}");
    Ok(())
}

fn cmd_compose(args: ComposeArgs) -> Result<()> {
    let desc = parse_network(&args.net)?;
    let model: MlpPredictor = load_model(&args.model)?;
    let hw = HardwareProfile::from_file(&args.hw)?;
    let report = predict_network(&desc, &model, &hw, args.batches)?;
    if report.has_unmodeled() && !args.allow_unmodeled {
        let kinds: Vec<String> = report
            .layers
            .iter()
            .filter(|l| l.unmodeled)
            .map(|l| l.kind.to_string())
            .collect();
        return Err(Error::UnsupportedLayer(format!(
            "{} (re-run with --allow-unmodeled to report them as zero)",
            kinds.join(", ")
        )));
    }
    let measured = if args.measure {
        let mut clock = MonotonicClock::new();
        Some(measure_network(&desc, &mut clock)?)
    } else {
        None
    };

    println!(
        "network {} on {} ({} mode, batch {})",
        report.network, report.hardware, report.mode, report.batch_size
    );
    let head = if measured.is_some() {
        format!("{:>5}  {:<8} {:>14} {:>14}", "layer", "kind", "predicted_ms", "measured_ms")
    } else {
        format!("{:>5}  {:<8} {:>14}", "layer", "kind", "predicted_ms")
    };
    println!("{head}");
    for (i, l) in report.layers.iter().enumerate() {
        let marker = if l.unmodeled { " (unmodeled)" } else { "" };
        match &measured {
            Some(m) => println!(
                "{:>5}  {:<8} {:>14.6} {:>14.6}{marker}",
                l.index,
                l.kind.to_string(),
                l.time_ms,
                m.layers[i].time_ms
            ),
            None => println!(
                "{:>5}  {:<8} {:>14.6}{marker}",
                l.index,
                l.kind.to_string(),
                l.time_ms
            ),
        }
    }
    println!("batch time T_b = {:.6} ms", report.batch_time_ms);
    if let Some(m) = &measured {
        println!("measured  T_b = {:.6} ms", m.batch_time_ms);
    }
    println!(
        "epoch time E = p * T_b = {} * {:.6} = {:.6} ms",
        report.batch_count, report.batch_time_ms, report.epoch_time_ms
    );

    if let Some(path) = &args.out {
        let out = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_report_csv(&report, measured.as_ref(), out)?;
    }
    if let Some(path) = &args.sweep_modes {
        let rows = compare_modes(&desc, &model, &hw)?;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "layer_index,kind,mode,batch,predicted_ms,unmodeled")?;
        for r in rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.layer_index,
                r.kind,
                r.mode,
                r.batch_size,
                r.predicted_ms,
                if r.unmodeled { 1 } else { 0 }
            )?;
        }
    }
    Ok(())
}

fn cmd_sweep_depth(args: SweepDepthArgs) -> Result<()> {
    let (ds, splits) = load_dataset_with_split(&args.data, args.split_seed)?;
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        lr0: args.lr,
        halve_every: args.halve_every,
        seed: args.seed,
    };
    let rows = depth_sweep(&ds, &splits, &args.depths, &cfg, args.dropout, args.l2)?;
    let mut out = open_out(&args.out)?;
    writeln!(out, "depth,test_rmse_ms,test_rmsle")?;
    for r in &rows {
        writeln!(out, "{},{},{}", r.depth, r.test_rmse_ms, r.test_rmsle)?;
    }
    Ok(())
}
