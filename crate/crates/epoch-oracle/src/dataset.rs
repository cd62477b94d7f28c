//! Persistence, seeded splits and feature scaling for benchmark records.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::{BenchmarkRecord, RecordSource, TIMED_RUNS};
use crate::error::{Error, Result};
use crate::featurespace::{
    encode, ConvDims, Connectivity, DenseDims, FeatureVector, HardwareProfile, LayerConfig,
    LayerShape, PoolDims, SlotKind, Technology, FEATURE_DIM, SCHEMA_ID, SLOTS,
};
use crate::kernels::{ActivationKind, OptimizerKind};

/// Schema identifier stamped into every CSV row this version writes.
pub const DATASET_SCHEMA_ID: &str = "bench-v1";

/// The exact CSV header, in column order.
pub const CSV_HEADER: [&str; 28] = [
    "schema_id",
    "op_type",
    "batch",
    "activation",
    "optimizer",
    "direction",
    "in_dim",
    "out_dim",
    "matrix_size",
    "kernel",
    "c_in",
    "c_out",
    "stride",
    "padding",
    "has_bias",
    "hw_name",
    "hw_cores",
    "hw_clock_mhz",
    "hw_mem_gb",
    "hw_bw_gbps",
    "hw_peak_gflops",
    "hw_connectivity",
    "t1_ms",
    "t2_ms",
    "t3_ms",
    "t4_ms",
    "t5_ms",
    "t_median_ms",
];

/// A loaded set of benchmark records with a uniform schema.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<BenchmarkRecord>,
    pub schema_id: String,
}

impl Dataset {
    pub fn new(records: Vec<BenchmarkRecord>) -> Self {
        Self { records, schema_id: DATASET_SCHEMA_ID.to_string() }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Encode every record; returns raw feature vectors and median targets.
    pub fn encode_all(&self) -> Result<(Vec<FeatureVector>, Vec<f64>)> {
        let mut xs = Vec::with_capacity(self.len());
        let mut ys = Vec::with_capacity(self.len());
        for r in &self.records {
            xs.push(encode(&r.config, &r.hw)?);
            ys.push(r.median_ms as f64);
        }
        Ok((xs, ys))
    }
}

/// Serialize an `f32` with nine significant digits; this round-trips every
/// finite value bit-exactly.
fn fmt_f32(v: f32) -> String {
    format!("{v:.8e}")
}

fn record_to_row(r: &BenchmarkRecord) -> Result<Vec<String>> {
    if matches!(r.config.shape, LayerShape::Recurrent(_)) {
        return Err(Error::invalid(
            "recurrent records cannot be persisted in the bench-v1 CSV schema",
        ));
    }
    let mut row: Vec<String> = Vec::with_capacity(CSV_HEADER.len());
    row.push(DATASET_SCHEMA_ID.to_string());
    row.extend(r.config.csv_fields());
    row.push(r.hw.name.clone());
    row.push(r.hw.core_count.to_string());
    row.push(fmt_f32(r.hw.clock_mhz));
    row.push(fmt_f32(r.hw.memory_gb));
    row.push(fmt_f32(r.hw.bandwidth_gbps));
    row.push(fmt_f32(r.hw.peak_gflops));
    row.push(r.hw.connectivity.to_string());
    for t in r.run_times_ms {
        row.push(fmt_f32(t));
    }
    row.push(fmt_f32(r.median_ms));
    Ok(row)
}

/// Write records to a CSV writer. Recurrent records have no columns in this
/// schema and are rejected.
pub fn write_csv_to(records: &[BenchmarkRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_io_error)?;
    for r in records {
        w.write_record(&record_to_row(r)?).map_err(csv_io_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(records: &[BenchmarkRecord], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv_to(records, std::io::BufWriter::new(file))
}

fn csv_io_error(e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::parse(pos.line() as usize, e.to_string()),
        None => Error::invalid(e.to_string()),
    }
}

struct RowReader<'a> {
    line: usize,
    record: &'a csv::StringRecord,
}

impl<'a> RowReader<'a> {
    fn field(&self, idx: usize) -> Result<&'a str> {
        self.record.get(idx).ok_or_else(|| {
            Error::parse(self.line, format!("missing column {} ({})", idx, CSV_HEADER[idx]))
        })
    }

    fn required<T: std::str::FromStr>(&self, idx: usize) -> Result<T> {
        let raw = self.field(idx)?;
        raw.parse().map_err(|_| {
            Error::parse(
                self.line,
                format!("column {} ({}) has invalid value `{raw}`", idx, CSV_HEADER[idx]),
            )
        })
    }

    fn required_if<T: std::str::FromStr>(&self, idx: usize, what: &str) -> Result<T> {
        let raw = self.field(idx)?;
        if raw.is_empty() {
            return Err(Error::parse(
                self.line,
                format!("column {} ({}) is required for {what}", idx, CSV_HEADER[idx]),
            ));
        }
        self.required(idx)
    }

    fn empty(&self, idx: usize) -> Result<()> {
        if self.field(idx)?.is_empty() {
            Ok(())
        } else {
            Err(Error::parse(
                self.line,
                format!("column {} ({}) must be empty for this op_type", idx, CSV_HEADER[idx]),
            ))
        }
    }
}

fn parse_row(row: &RowReader<'_>) -> Result<BenchmarkRecord> {
    let schema: String = row.required(0)?;
    if schema != DATASET_SCHEMA_ID {
        return Err(Error::Version(format!(
            "row schema `{schema}` does not match `{DATASET_SCHEMA_ID}`"
        )));
    }
    let op: String = row.required(1)?;
    let batch: usize = row.required(2)?;
    let activation: ActivationKind = row
        .required::<String>(3)?
        .parse()
        .map_err(|e: Error| Error::parse(row.line, e.to_string()))?;
    let optimizer: OptimizerKind = row
        .required::<String>(4)?
        .parse()
        .map_err(|e: Error| Error::parse(row.line, e.to_string()))?;
    let direction: String = row.required(5)?;
    let expected_direction =
        if optimizer == OptimizerKind::None { "forward" } else { "forward-backward" };
    if direction != expected_direction {
        return Err(Error::parse(
            row.line,
            format!("direction `{direction}` contradicts optimizer `{optimizer}`"),
        ));
    }

    let shape = match op.as_str() {
        "dense" => {
            for idx in 8..=14 {
                row.empty(idx)?;
            }
            LayerShape::Dense(DenseDims {
                inputs: row.required_if(6, "dense")?,
                outputs: row.required_if(7, "dense")?,
            })
        }
        "conv2d" => {
            row.empty(6)?;
            row.empty(7)?;
            LayerShape::Conv2d(ConvDims {
                matrix_size: row.required_if(8, "conv2d")?,
                kernel: row.required_if(9, "conv2d")?,
                input_depth: row.required_if(10, "conv2d")?,
                output_depth: row.required_if(11, "conv2d")?,
                stride: row.required_if(12, "conv2d")?,
                padding: row.required_if(13, "conv2d")?,
                has_bias: row.required_if::<u8>(14, "conv2d")? != 0,
            })
        }
        "pool" => {
            for idx in [6, 7, 8, 10, 11, 14] {
                row.empty(idx)?;
            }
            LayerShape::Pool(PoolDims {
                kernel: row.required_if(9, "pool")?,
                stride: row.required_if(12, "pool")?,
                padding: row.required_if(13, "pool")?,
            })
        }
        other => {
            return Err(Error::parse(row.line, format!("unknown op_type `{other}`")));
        }
    };

    let config = LayerConfig { batch_size: batch, activation, optimizer, shape };
    config.validate().map_err(|e| Error::parse(row.line, e.to_string()))?;

    let connectivity: Connectivity = row
        .required::<String>(21)?
        .parse()
        .map_err(|e: Error| Error::parse(row.line, e.to_string()))?;
    // Technology and GPU count have no columns in this schema; imported
    // records carry the neutral defaults.
    let hw = HardwareProfile {
        name: row.required(15)?,
        technology: Technology::Host,
        gpu_count: 1,
        core_count: row.required(16)?,
        clock_mhz: row.required(17)?,
        memory_gb: row.required(18)?,
        bandwidth_gbps: row.required(19)?,
        peak_gflops: row.required(20)?,
        connectivity,
    };
    hw.validate().map_err(|e| Error::parse(row.line, e.to_string()))?;

    let mut times = [0.0f32; TIMED_RUNS];
    for (i, t) in times.iter_mut().enumerate() {
        *t = row.required(22 + i)?;
    }
    let stored_median: f32 = row.required(27)?;
    let record = BenchmarkRecord::new(config, hw, times, RecordSource::Imported)
        .map_err(|e| Error::parse(row.line, e.to_string()))?;
    if record.median_ms.to_bits() != stored_median.to_bits() {
        return Err(Error::parse(
            row.line,
            format!(
                "stored median {stored_median} is not the sorted middle of the run times \
                 (expected {})",
                record.median_ms
            ),
        ));
    }
    Ok(record)
}

/// Read a dataset from a CSV reader. The header row is mandatory.
pub fn read_csv_from(input: impl Read) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    {
        let headers = reader.headers().map_err(csv_io_error)?;
        let expected: Vec<&str> = CSV_HEADER.to_vec();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Version(format!(
                "unexpected CSV header `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_io_error)?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        records.push(parse_row(&RowReader { line, record: &row })?);
    }
    Ok(Dataset::new(records))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv_from(std::io::BufReader::new(file))
}

/// Campaign sink backed by a CSV file. Opening an existing file loads its
/// config hashes for resume bookkeeping and appends new records after the
/// ones already present; a fresh file gets the header row.
pub struct CsvSink {
    writer: csv::Writer<std::fs::File>,
    existing: std::collections::HashMap<String, usize>,
    written: usize,
}

impl CsvSink {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut existing = std::collections::HashMap::new();
        let preexisting = path.exists() && std::fs::metadata(path)?.len() > 0;
        if preexisting {
            for r in &read_csv(path)?.records {
                *existing.entry(r.config_hash()).or_default() += 1;
            }
        }
        let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        let mut writer =
            csv::WriterBuilder::new().has_headers(false).from_writer(file);
        if !preexisting {
            writer.write_record(CSV_HEADER).map_err(csv_io_error)?;
            writer.flush()?;
        }
        Ok(Self { writer, existing, written: 0 })
    }

    pub fn written(&self) -> usize {
        self.written
    }
}

impl crate::bench::RecordSink for CsvSink {
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
        self.writer.write_record(&record_to_row(record)?).map_err(csv_io_error)?;
        self.writer.flush()?;
        self.written += 1;
        Ok(())
    }
}

/// Disjoint, exhaustive train/test/validation indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub validation: Vec<usize>,
    pub seed: u64,
}

/// Shuffle `0..n` by `seed` and partition 80/10/10 (floor arithmetic; the
/// validation split takes the remainder).
pub fn split(n: usize, seed: u64) -> Result<SplitIndices> {
    if n < 10 {
        return Err(Error::invalid(format!("need at least 10 records to split, got {n}")));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let n_train = n * 8 / 10;
    let n_test = n / 10;
    let validation = indices.split_off(n_train + n_test);
    let test = indices.split_off(n_train);
    Ok(SplitIndices { train: indices, test, validation, seed })
}

/// Per-slot scaling statistics fitted on the training split only.
///
/// One-hot and flag slots pass through; linear slots are z-scored; log slots
/// (dimensions, FLOPs) and the time target go through log1p first. Applying
/// a scaler is not idempotent: it must run exactly once per vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub slot_mean: Vec<f64>,
    pub slot_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
    pub schema_id: String,
}

fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 0.0 { std } else { 1.0 })
}

impl Scaler {
    /// Pass-through scaler (means 0, stds 1) for the current schema.
    pub fn identity() -> Self {
        Scaler {
            slot_mean: vec![0.0; FEATURE_DIM],
            slot_std: vec![1.0; FEATURE_DIM],
            target_mean: 0.0,
            target_std: 1.0,
            schema_id: SCHEMA_ID.to_string(),
        }
    }

    pub fn apply(&self, fv: &FeatureVector) -> Result<FeatureVector> {
        if fv.schema_id != self.schema_id {
            return Err(Error::Version(format!(
                "feature schema `{}` does not match scaler schema `{}`",
                fv.schema_id, self.schema_id
            )));
        }
        let mut values = fv.values.clone();
        for (i, v) in values.iter_mut().enumerate() {
            match SLOTS[i].kind {
                SlotKind::OneHot | SlotKind::Flag => {}
                SlotKind::Linear => *v = (*v - self.slot_mean[i]) / self.slot_std[i],
                SlotKind::Log => *v = (v.ln_1p() - self.slot_mean[i]) / self.slot_std[i],
            }
        }
        Ok(FeatureVector { values, schema_id: fv.schema_id.clone() })
    }

    /// Map a time in milliseconds into scaled log space.
    pub fn scale_target(&self, time_ms: f64) -> f64 {
        (time_ms.ln_1p() - self.target_mean) / self.target_std
    }

    /// Invert [`Scaler::scale_target`], clamping at zero. The log-space
    /// value is capped below the exp overflow threshold so predictions stay
    /// finite even for wildly out-of-range network outputs.
    pub fn unscale_target(&self, scaled: f64) -> f64 {
        (scaled * self.target_std + self.target_mean).min(700.0).exp_m1().max(0.0)
    }
}

/// Fit a scaler on the training rows of `ds` only.
pub fn fit_scaler(ds: &Dataset, train: &[usize]) -> Result<Scaler> {
    if train.is_empty() {
        return Err(Error::invalid("cannot fit a scaler on an empty training split"));
    }
    let mut slot_mean = vec![0.0; FEATURE_DIM];
    let mut slot_std = vec![1.0; FEATURE_DIM];

    let mut columns: Vec<Vec<f64>> =
        (0..FEATURE_DIM).map(|_| Vec::with_capacity(train.len())).collect();
    let mut targets = Vec::with_capacity(train.len());
    for &idx in train {
        let r = ds
            .records
            .get(idx)
            .ok_or_else(|| Error::invalid(format!("train index {idx} out of bounds")))?;
        let fv = encode(&r.config, &r.hw)?;
        for (c, v) in columns.iter_mut().zip(&fv.values) {
            c.push(*v);
        }
        targets.push((r.median_ms as f64).ln_1p());
    }

    for i in 0..FEATURE_DIM {
        match SLOTS[i].kind {
            SlotKind::OneHot | SlotKind::Flag => {}
            SlotKind::Linear => {
                let (m, s) = moments(&columns[i]);
                slot_mean[i] = m;
                slot_std[i] = s;
            }
            SlotKind::Log => {
                let logged: Vec<f64> = columns[i].iter().map(|v| v.ln_1p()).collect();
                let (m, s) = moments(&logged);
                slot_mean[i] = m;
                slot_std[i] = s;
            }
        }
    }
    let (target_mean, target_std) = moments(&targets);
    Ok(Scaler { slot_mean, slot_std, target_mean, target_std, schema_id: SCHEMA_ID.to_string() })
}
