//! Line-oriented text serialization of trained predictors.
//!
//! Floats are written with 17 significant digits, which round-trips every
//! finite f64 bit-exactly, so a saved and reloaded model predicts
//! identically.

use std::fmt::Write as FmtWrite;
use std::path::Path;

use crate::dataset::Scaler;
use crate::error::{Error, Result};
use crate::featurespace::{LayerKind, SCHEMA_ID};
use crate::kernels::Matrix;
use crate::predictor::mlp::{MlpArchitecture, MlpPredictor};

const MAGIC: &str = "mlp-predictor v1";

fn g17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Render a predictor into the v1 text format.
pub fn model_to_string(p: &MlpPredictor) -> String {
    let mut s = String::new();
    let arch = p.arch();
    writeln!(s, "{MAGIC}").unwrap();
    writeln!(s, "schema {}", p.schema_id()).unwrap();
    let dims: Vec<String> = std::iter::once(arch.input_dim)
        .chain(arch.hidden.iter().copied())
        .chain(std::iter::once(1))
        .map(|d| d.to_string())
        .collect();
    writeln!(s, "arch {}", dims.join(" ")).unwrap();
    writeln!(s, "dropout {}", g17(arch.dropout_rate)).unwrap();
    writeln!(s, "l2 {}", g17(arch.l2_lambda)).unwrap();

    let scaler = p.scaler();
    writeln!(s, "scaler {}", scaler.slot_mean.len()).unwrap();
    for (m, sd) in scaler.slot_mean.iter().zip(&scaler.slot_std) {
        writeln!(s, "slot {} {}", g17(*m), g17(*sd)).unwrap();
    }
    writeln!(s, "target {} {}", g17(scaler.target_mean), g17(scaler.target_std)).unwrap();
    let kinds: Vec<&str> = p.trained_kinds().iter().map(|k| k.as_str()).collect();
    writeln!(s, "kinds {}", kinds.join(" ")).unwrap();

    for (k, (w, b)) in p.weights().iter().zip(p.biases()).enumerate() {
        writeln!(s, "W{} {} {}", k + 1, w.rows(), w.cols()).unwrap();
        for r in 0..w.rows() {
            let row: Vec<String> = w.row(r).iter().map(|&v| g17(v)).collect();
            writeln!(s, "{}", row.join(" ")).unwrap();
        }
        writeln!(s, "b{} {}", k + 1, b.len()).unwrap();
        let row: Vec<String> = b.iter().map(|&v| g17(v)).collect();
        writeln!(s, "{}", row.join(" ")).unwrap();
    }
    s
}

pub fn save_model(p: &MlpPredictor, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model_to_string(p))?;
    Ok(())
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        for (idx, raw) in self.iter.by_ref() {
            let line = raw.trim();
            if !line.is_empty() {
                return Ok((idx + 1, line));
            }
        }
        Err(Error::parse(0, format!("file ended early, expected {what}")))
    }
}

fn parse_floats(line: &str, line_no: usize, expect: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = line
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(line_no, format!("bad float: {e}")))?;
    if values.len() != expect {
        return Err(Error::parse(
            line_no,
            format!("expected {expect} values, found {}", values.len()),
        ));
    }
    Ok(values)
}

fn expect_tag<'a>(line: &'a str, tag: &str, line_no: usize) -> Result<&'a str> {
    line.strip_prefix(tag)
        .map(str::trim)
        .ok_or_else(|| Error::parse(line_no, format!("expected `{tag} ...`, got `{line}`")))
}

/// Parse the v1 text format back into a predictor.
pub fn model_from_string(text: &str) -> Result<MlpPredictor> {
    let mut lines = Lines { iter: text.lines().enumerate() };

    let (no, magic) = lines.next("the header")?;
    if magic != MAGIC {
        return Err(Error::Version(format!("line {no}: `{magic}` is not `{MAGIC}`")));
    }
    let (no, line) = lines.next("the schema line")?;
    let schema = expect_tag(line, "schema", no)?;
    if schema != SCHEMA_ID {
        return Err(Error::Version(format!(
            "model was trained under feature schema `{schema}`, this build encodes `{SCHEMA_ID}`"
        )));
    }

    let (no, line) = lines.next("the arch line")?;
    let dims: Vec<usize> = expect_tag(line, "arch", no)?
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(no, format!("bad arch dimension: {e}")))?;
    if dims.len() < 3 || *dims.last().unwrap() != 1 {
        return Err(Error::parse(no, "arch must list input, hidden widths, and a final 1"));
    }
    let input_dim = dims[0];
    let hidden = dims[1..dims.len() - 1].to_vec();

    let (no, line) = lines.next("the dropout line")?;
    let dropout_rate: f64 = expect_tag(line, "dropout", no)?
        .parse()
        .map_err(|e| Error::parse(no, format!("bad dropout: {e}")))?;
    let (no, line) = lines.next("the l2 line")?;
    let l2_lambda: f64 = expect_tag(line, "l2", no)?
        .parse()
        .map_err(|e| Error::parse(no, format!("bad l2: {e}")))?;

    let (no, line) = lines.next("the scaler header")?;
    let n_slots: usize = expect_tag(line, "scaler", no)?
        .parse()
        .map_err(|e| Error::parse(no, format!("bad scaler length: {e}")))?;
    if n_slots != input_dim {
        return Err(Error::parse(no, "scaler length must equal the input dimension"));
    }
    let mut slot_mean = Vec::with_capacity(n_slots);
    let mut slot_std = Vec::with_capacity(n_slots);
    for _ in 0..n_slots {
        let (no, line) = lines.next("a scaler slot line")?;
        let values = parse_floats(expect_tag(line, "slot", no)?, no, 2)?;
        slot_mean.push(values[0]);
        slot_std.push(values[1]);
    }
    let (no, line) = lines.next("the target line")?;
    let values = parse_floats(expect_tag(line, "target", no)?, no, 2)?;
    let scaler = Scaler {
        slot_mean,
        slot_std,
        target_mean: values[0],
        target_std: values[1],
        schema_id: SCHEMA_ID.to_string(),
    };

    let (no, line) = lines.next("the kinds line")?;
    let trained_kinds: Vec<LayerKind> = expect_tag(line, "kinds", no)?
        .split_whitespace()
        .map(|t| t.parse::<LayerKind>())
        .collect::<Result<_>>()
        .map_err(|e| Error::parse(no, e.to_string()))?;

    let mut weights = Vec::with_capacity(dims.len() - 1);
    let mut biases = Vec::with_capacity(dims.len() - 1);
    for k in 0..dims.len() - 1 {
        let (rows, cols) = (dims[k], dims[k + 1]);
        let (no, line) = lines.next("a weight block header")?;
        let header = expect_tag(line, &format!("W{}", k + 1), no)?;
        let dims_found: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(no, format!("bad weight dims: {e}")))?;
        if dims_found != [rows, cols] {
            return Err(Error::parse(
                no,
                format!("weight block W{} is {dims_found:?}, expected [{rows}, {cols}]", k + 1),
            ));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (no, line) = lines.next("a weight row")?;
            data.extend(parse_floats(line, no, cols)?);
        }
        weights.push(Matrix::new(rows, cols, data)?);

        let (no, line) = lines.next("a bias block header")?;
        let len: usize = expect_tag(line, &format!("b{}", k + 1), no)?
            .parse()
            .map_err(|e| Error::parse(no, format!("bad bias length: {e}")))?;
        if len != cols {
            return Err(Error::parse(no, format!("bias b{} must have {cols} values", k + 1)));
        }
        let (no, line) = lines.next("the bias values")?;
        biases.push(parse_floats(line, no, cols)?);
    }

    let arch = MlpArchitecture { input_dim, hidden, dropout_rate, l2_lambda };
    arch.validate()?;
    Ok(MlpPredictor { arch, weights, biases, scaler, schema_id: SCHEMA_ID.to_string(), trained_kinds })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpPredictor> {
    model_from_string(&std::fs::read_to_string(path)?)
}
