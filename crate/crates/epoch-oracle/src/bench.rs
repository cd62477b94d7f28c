//! Timing harness: one warm-up, five measured runs, median.
//!
//! Timed runs must own the process; the campaign driver is single-threaded
//! and never overlaps two timed regions.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::featurespace::{
    sample_space, HardwareProfile, LayerConfig, LayerShape, SpaceSpec,
};
use crate::kernels::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, maxpool_forward,
    optimizer_step, ConvParams, DenseParams, Matrix, OptimizerState, Tensor4,
};

/// Number of measured runs per configuration.
pub const TIMED_RUNS: usize = 5;

/// Discarded warm-up runs before the measured ones.
pub const WARMUP_RUNS: usize = 1;

/// Floor for a single measured run; guards the positive-time invariant
/// against clock granularity on sub-resolution operations.
pub const MIN_RUN_MS: f32 = 1e-6;

/// Standalone pool configurations carry no input dimensions, so the harness
/// times them on a fixed square input.
pub const POOL_BENCH_MATRIX: usize = 32;
pub const POOL_BENCH_CHANNELS: usize = 8;

/// Learning rate handed to the optimizer inside timed backward passes. The
/// value does not affect cost, only the (discarded) parameter trajectory.
const BENCH_LR: f32 = 0.01;

/// Monotonic time source with at least microsecond resolution. `now` takes
/// `&mut self` so scripted test clocks can advance internal state.
pub trait Clock {
    fn now(&mut self) -> Duration;
}

/// Wall clock backed by [`Instant`]; nanosecond resolution on Linux.
pub struct MonotonicClock {
    origin: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&mut self) -> Duration {
        self.origin.elapsed()
    }
}

/// Test clock scripted with the elapsed duration of each timed region.
///
/// The harness brackets every timed region with exactly two `now` calls;
/// this clock returns the current timestamp on the opening call and advances
/// by the next scripted duration on the closing call.
pub struct ScriptedClock {
    elapsed_per_region: std::vec::IntoIter<Duration>,
    current: Duration,
    opening: bool,
}

impl ScriptedClock {
    pub fn from_millis(regions: &[f64]) -> Self {
        Self {
            elapsed_per_region: regions
                .iter()
                .map(|&ms| Duration::from_secs_f64(ms / 1e3))
                .collect::<Vec<_>>()
                .into_iter(),
            current: Duration::ZERO,
            opening: true,
        }
    }
}

impl Clock for ScriptedClock {
    fn now(&mut self) -> Duration {
        if !self.opening {
            self.current += self.elapsed_per_region.next().unwrap_or(Duration::ZERO);
        }
        self.opening = !self.opening;
        self.current
    }
}

/// Where a record came from: timed on this host or read from a CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordSource {
    MeasuredHost,
    Imported,
}

/// One measured configuration: the five run times and their median.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRecord {
    pub config: LayerConfig,
    pub hw: HardwareProfile,
    pub run_times_ms: [f32; TIMED_RUNS],
    pub median_ms: f32,
    pub source: RecordSource,
}

impl BenchmarkRecord {
    pub fn new(
        config: LayerConfig,
        hw: HardwareProfile,
        run_times_ms: [f32; TIMED_RUNS],
        source: RecordSource,
    ) -> Result<Self> {
        if run_times_ms.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(Error::invalid("run times must be positive and finite"));
        }
        let median_ms = median_of_5(run_times_ms)?;
        Ok(Self { config, hw, run_times_ms, median_ms, source })
    }

    /// Stable digest of the canonical configuration encoding, used by
    /// campaign resume bookkeeping.
    pub fn config_hash(&self) -> String {
        config_hash(&self.config)
    }
}

/// Sorted middle element of five finite values.
pub fn median_of_5(times: [f32; TIMED_RUNS]) -> Result<f32> {
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("median requires finite inputs"));
    }
    let mut sorted = times;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(sorted[TIMED_RUNS / 2])
}

/// Digest of the canonical (CSV-field) encoding of a configuration.
pub fn config_hash(config: &LayerConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config.csv_fields().join(",").as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn try_alloc_f32(len: usize, what: &str) -> Result<Vec<f32>> {
    let mut v: Vec<f32> = Vec::new();
    v.try_reserve_exact(len)
        .map_err(|_| Error::ResourceExhausted(format!("cannot allocate {what} ({len} floats)")))?;
    v.resize(len, 0.0);
    Ok(v)
}

fn fill_uniform(rng: &mut ChaCha8Rng, data: &mut [f32], scale: f32) {
    for v in data.iter_mut() {
        *v = rng.gen_range(-scale..=scale);
    }
}

enum Subject {
    Dense {
        input: Matrix<f32>,
        params: DenseParams<f32>,
        upstream: Matrix<f32>,
        weight_state: Option<OptimizerState<f32>>,
        bias_state: Option<OptimizerState<f32>>,
    },
    Conv {
        input: Tensor4<f32>,
        params: ConvParams<f32>,
        upstream: Tensor4<f32>,
        kernel_state: Option<OptimizerState<f32>>,
        bias_state: Option<OptimizerState<f32>>,
    },
    Pool {
        input: Tensor4<f32>,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
}

impl Subject {
    /// Build input tensors and parameters for `config`. All data comes from
    /// a generator seeded by the config hash, so a given configuration is
    /// always benchmarked on identical data, reused across the five runs.
    fn build(config: &LayerConfig) -> Result<Self> {
        config.validate()?;
        let hash = config_hash(config);
        let mut seed_bytes = [0u8; 8];
        for (i, b) in seed_bytes.iter_mut().enumerate() {
            *b = u8::from_str_radix(&hash[2 * i..2 * i + 2], 16).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(u64::from_le_bytes(seed_bytes));
        let training = !config.forward_only();
        let state_for = |len: usize| -> Result<Option<OptimizerState<f32>>> {
            if training {
                Ok(Some(OptimizerState::new(config.optimizer, len)?))
            } else {
                Ok(None)
            }
        };
        match &config.shape {
            LayerShape::Dense(d) => {
                let b = config.batch_size;
                let mut input = try_alloc_f32(b * d.inputs, "dense input")?;
                fill_uniform(&mut rng, &mut input, 1.0);
                let mut weights = try_alloc_f32(d.inputs * d.outputs, "dense weights")?;
                fill_uniform(&mut rng, &mut weights, 0.5);
                let mut bias = try_alloc_f32(d.outputs, "dense bias")?;
                fill_uniform(&mut rng, &mut bias, 0.5);
                let mut upstream = try_alloc_f32(b * d.outputs, "dense upstream")?;
                fill_uniform(&mut rng, &mut upstream, 1.0);
                Ok(Subject::Dense {
                    input: Matrix::new(b, d.inputs, input)?,
                    params: DenseParams::new(
                        Matrix::new(d.inputs, d.outputs, weights)?,
                        Some(bias),
                    )?,
                    upstream: Matrix::new(b, d.outputs, upstream)?,
                    weight_state: state_for(d.inputs * d.outputs)?,
                    bias_state: state_for(d.outputs)?,
                })
            }
            LayerShape::Conv2d(c) => {
                let b = config.batch_size;
                let h = c.matrix_size;
                let h_out = crate::featurespace::output_dim(h, c.kernel, c.stride, c.padding)?;
                let mut input = try_alloc_f32(b * h * h * c.input_depth, "conv input")?;
                fill_uniform(&mut rng, &mut input, 1.0);
                let klen = c.kernel * c.kernel * c.input_depth * c.output_depth;
                let mut kernel = try_alloc_f32(klen, "conv kernel")?;
                fill_uniform(&mut rng, &mut kernel, 0.5);
                let bias = if c.has_bias {
                    let mut bias = try_alloc_f32(c.output_depth, "conv bias")?;
                    fill_uniform(&mut rng, &mut bias, 0.5);
                    Some(bias)
                } else {
                    None
                };
                let mut upstream =
                    try_alloc_f32(b * h_out * h_out * c.output_depth, "conv upstream")?;
                fill_uniform(&mut rng, &mut upstream, 1.0);
                let bias_state =
                    if c.has_bias { state_for(c.output_depth)? } else { None };
                Ok(Subject::Conv {
                    input: Tensor4::new([b, h, h, c.input_depth], input)?,
                    params: ConvParams::new(
                        Tensor4::new(
                            [c.kernel, c.kernel, c.input_depth, c.output_depth],
                            kernel,
                        )?,
                        bias,
                        c.stride,
                        c.padding,
                    )?,
                    upstream: Tensor4::new([b, h_out, h_out, c.output_depth], upstream)?,
                    kernel_state: state_for(klen)?,
                    bias_state,
                })
            }
            LayerShape::Pool(p) => {
                let b = config.batch_size;
                let h = POOL_BENCH_MATRIX;
                let ch = POOL_BENCH_CHANNELS;
                crate::featurespace::output_dim(h, p.kernel, p.stride, p.padding)?;
                let mut input = try_alloc_f32(b * h * h * ch, "pool input")?;
                fill_uniform(&mut rng, &mut input, 1.0);
                Ok(Subject::Pool {
                    input: Tensor4::new([b, h, h, ch], input)?,
                    kernel: p.kernel,
                    stride: p.stride,
                    padding: p.padding,
                })
            }
            LayerShape::Recurrent(_) => Err(Error::invalid(
                "recurrent layers have no reference kernel and cannot be benchmarked",
            )),
        }
    }

    /// One complete iteration: forward, and for training configurations the
    /// backward pass plus optimizer updates on the layer's own parameters.
    /// Pool layers have no parameters and are always timed forward-only.
    fn run_once(&mut self, config: &LayerConfig, step: usize) -> Result<()> {
        let act = config.activation;
        match self {
            Subject::Dense { input, params, upstream, weight_state, bias_state } => {
                if let Some(wstate) = weight_state {
                    let grads = dense_backward(input, params, act, upstream)?;
                    optimizer_step(
                        config.optimizer,
                        params.weights.data_mut(),
                        grads.weights.data(),
                        wstate,
                        step,
                        BENCH_LR,
                    )?;
                    if let (Some(bias), Some(gbias), Some(bstate)) =
                        (params.bias.as_mut(), grads.bias.as_ref(), bias_state.as_mut())
                    {
                        optimizer_step(config.optimizer, bias, gbias, bstate, step, BENCH_LR)?;
                    }
                    std::hint::black_box(params.weights.data().first().copied());
                } else {
                    let out = dense_forward(input, params, act)?;
                    std::hint::black_box(out.data().first().copied());
                }
            }
            Subject::Conv { input, params, upstream, kernel_state, bias_state } => {
                if let Some(kstate) = kernel_state {
                    let grads = conv2d_backward(input, params, act, upstream)?;
                    optimizer_step(
                        config.optimizer,
                        params.kernel.data_mut(),
                        grads.kernel.data(),
                        kstate,
                        step,
                        BENCH_LR,
                    )?;
                    if let (Some(bias), Some(gbias), Some(bstate)) =
                        (params.bias.as_mut(), grads.bias.as_ref(), bias_state.as_mut())
                    {
                        optimizer_step(config.optimizer, bias, gbias, bstate, step, BENCH_LR)?;
                    }
                    std::hint::black_box(params.kernel.data().first().copied());
                } else {
                    let out = conv2d_forward(input, params, act)?;
                    std::hint::black_box(out.data().first().copied());
                }
            }
            Subject::Pool { input, kernel, stride, padding } => {
                let out = maxpool_forward(input, *kernel, *stride, *padding)?;
                std::hint::black_box(out.data().first().copied());
            }
        }
        Ok(())
    }
}

/// Time `work` with the standard protocol: `WARMUP_RUNS` discarded calls,
/// then `TIMED_RUNS` measured ones. Returns per-run times in milliseconds.
pub fn time_runs(
    clock: &mut dyn Clock,
    mut work: impl FnMut() -> Result<()>,
) -> Result<[f32; TIMED_RUNS]> {
    for _ in 0..WARMUP_RUNS {
        work()?;
    }
    let mut times = [0.0f32; TIMED_RUNS];
    for t in times.iter_mut() {
        let start = clock.now();
        work()?;
        let end = clock.now();
        *t = (((end - start).as_secs_f64() * 1e3) as f32).max(MIN_RUN_MS);
    }
    Ok(times)
}

/// Benchmark one configuration: build the subject, warm up, time five runs.
pub fn run_benchmark(
    config: &LayerConfig,
    hw: &HardwareProfile,
    clock: &mut dyn Clock,
) -> Result<BenchmarkRecord> {
    let mut subject = Subject::build(config)?;
    let mut step = 0usize;
    let times = time_runs(clock, || {
        let r = subject.run_once(config, step);
        step += 1;
        r
    })?;
    BenchmarkRecord::new(config.clone(), hw.clone(), times, RecordSource::MeasuredHost)
}

/// Destination for campaign records, with resume bookkeeping.
pub trait RecordSink {
    /// Consume one already-present record with this config hash, if any.
    /// Returns true when the campaign should skip benchmarking it again.
    fn take_existing(&mut self, config_hash: &str) -> bool;

    fn write(&mut self, record: &BenchmarkRecord) -> Result<()>;
}

/// In-memory sink for tests and ad hoc callers.
#[derive(Default)]
pub struct MemorySink {
    pub records: Vec<BenchmarkRecord>,
    existing: HashMap<String, usize>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pre-populate resume state from records benchmarked earlier.
    pub fn with_existing(records: Vec<BenchmarkRecord>) -> Self {
        let mut existing: HashMap<String, usize> = HashMap::new();
        for r in &records {
            *existing.entry(r.config_hash()).or_default() += 1;
        }
        Self { records, existing }
    }
}

impl RecordSink for MemorySink {
    fn take_existing(&mut self, config_hash: &str) -> bool {
        match self.existing.get_mut(config_hash) {
            Some(n) if *n > 0 => {
                *n -= 1;
                true
            }
            _ => false,
        }
    }

    fn write(&mut self, record: &BenchmarkRecord) -> Result<()> {
        self.records.push(record.clone());
        Ok(())
    }
}

/// Sample `count` configurations and benchmark each one, streaming records
/// into `sink`. Already-present configurations (by hash) are skipped, so an
/// interrupted campaign can be resumed with the same arguments. Returns the
/// number of records written.
pub fn run_campaign(
    spec: &SpaceSpec,
    count: usize,
    seed: u64,
    hw: &HardwareProfile,
    clock: &mut dyn Clock,
    sink: &mut dyn RecordSink,
) -> Result<usize> {
    let configs = sample_space(spec, count, seed)?;
    let mut written = 0usize;
    for (i, config) in configs.iter().enumerate() {
        let hash = config_hash(config);
        if sink.take_existing(&hash) {
            eprintln!("[{}/{}] {} skipped (already benchmarked)", i + 1, count, config.kind());
            continue;
        }
        let record = run_benchmark(config, hw, clock)?;
        sink.write(&record)?;
        written += 1;
        eprintln!(
            "[{}/{}] {} batch={} {} median={:.4} ms",
            i + 1,
            count,
            config.kind(),
            config.batch_size,
            if config.forward_only() { "forward" } else { "forward-backward" },
            record.median_ms
        );
    }
    Ok(written)
}
