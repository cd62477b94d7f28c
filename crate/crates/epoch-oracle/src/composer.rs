//! Whole-network prediction: parse a network description, predict every
//! layer, and aggregate the batch time `T_b` (exact sum of per-layer times)
//! and the epoch time `E = p * T_b`.

use std::io::Write;
use std::path::Path;

use crate::bench::{time_runs, Clock, MonotonicClock};
use crate::error::{Error, Result};
use crate::featurespace::{
    output_dim, ConvDims, HardwareProfile, LayerConfig, LayerKind, PoolDims,
};
use crate::kernels::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, maxpool_forward,
    optimizer_step, ActivationKind, ConvParams, DenseParams, Matrix, OptimizerKind,
    OptimizerState, Tensor4,
};
use crate::predictor::MlpPredictor;

/// Padding directive on a conv layer: explicit pixels or `same`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadSpec {
    Pixels(usize),
    Same,
}

/// One parsed layer directive.
#[derive(Debug, Clone, PartialEq)]
pub enum NetLayer {
    Conv {
        kernel: usize,
        stride: usize,
        padding: PadSpec,
        out_depth: usize,
        activation: ActivationKind,
        has_bias: bool,
    },
    MaxPool {
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Dense {
        outputs: usize,
        activation: ActivationKind,
    },
}

/// A whole network: input shape, batch size, training mode, ordered layers.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDescription {
    pub name: String,
    /// Input height, width, channels.
    pub input: (usize, usize, usize),
    pub batch_size: usize,
    /// Optimizer applied to every layer; `None` means forward only.
    pub mode: OptimizerKind,
    pub layers: Vec<NetLayer>,
}

/// A layer resolved against the shape chain.
#[derive(Debug, Clone)]
pub struct ResolvedLayer {
    pub index: usize,
    pub config: LayerConfig,
    /// (H, W, C) entering the layer; dense layers see the flattened count in
    /// C with H = W = 1.
    pub input_shape: (usize, usize, usize),
    pub output_shape: (usize, usize, usize),
}

impl NetworkDescription {
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// Walk the shape chain and produce one benchmarkable configuration per
    /// layer. Fails with the layer index when shapes stop chaining.
    pub fn resolve(&self) -> Result<Vec<ResolvedLayer>> {
        if self.layers.is_empty() {
            return Err(Error::invalid("a network needs at least one layer"));
        }
        let (mut h, mut w, mut c) = self.input;
        if h < 1 || w < 1 || c < 1 {
            return Err(Error::invalid("input shape must be positive in every dimension"));
        }
        let mut flattened: Option<usize> = None;
        let mut resolved = Vec::with_capacity(self.layers.len());
        let chain_err =
            |index: usize, msg: String| Error::invalid(format!("layer {index}: {msg}"));
        for (index, layer) in self.layers.iter().enumerate() {
            let input_shape = flattened.map(|n| (1, 1, n)).unwrap_or((h, w, c));
            let config = match *layer {
                NetLayer::Conv { kernel, stride, padding, out_depth, activation, has_bias } => {
                    if flattened.is_some() {
                        return Err(chain_err(
                            index,
                            "conv layer after a dense layer (shape already flattened)".into(),
                        ));
                    }
                    if h != w {
                        return Err(chain_err(
                            index,
                            format!("conv layer needs a square input, got {h}x{w}"),
                        ));
                    }
                    let pad = match padding {
                        PadSpec::Pixels(p) => p,
                        PadSpec::Same => {
                            if kernel % 2 == 0 {
                                return Err(chain_err(
                                    index,
                                    format!("`same` padding needs an odd kernel, got {kernel}"),
                                ));
                            }
                            (kernel - 1) / 2
                        }
                    };
                    let out = output_dim(h, kernel, stride, pad)
                        .map_err(|e| chain_err(index, e.to_string()))?;
                    let dims = ConvDims {
                        matrix_size: h,
                        kernel,
                        input_depth: c,
                        output_depth: out_depth,
                        stride,
                        padding: pad,
                        has_bias,
                    };
                    h = out;
                    w = out;
                    c = out_depth;
                    LayerConfig::conv2d(self.batch_size, dims, activation, self.mode)
                }
                NetLayer::MaxPool { kernel, stride, padding } => {
                    if flattened.is_some() {
                        return Err(chain_err(
                            index,
                            "pool layer after a dense layer (shape already flattened)".into(),
                        ));
                    }
                    if h != w {
                        return Err(chain_err(
                            index,
                            format!("pool layer needs a square input, got {h}x{w}"),
                        ));
                    }
                    let out = output_dim(h, kernel, stride, padding)
                        .map_err(|e| chain_err(index, e.to_string()))?;
                    h = out;
                    w = out;
                    LayerConfig::pool(
                        self.batch_size,
                        PoolDims { kernel, stride, padding },
                        self.mode,
                    )
                }
                NetLayer::Dense { outputs, activation } => {
                    let inputs = match flattened {
                        Some(n) => n,
                        None => h * w * c, // implicit flatten after spatial layers
                    };
                    flattened = Some(outputs);
                    LayerConfig::dense(self.batch_size, inputs, outputs, activation, self.mode)
                }
            };
            config.validate().map_err(|e| chain_err(index, e.to_string()))?;
            let output_shape = flattened.map(|n| (1, 1, n)).unwrap_or((h, w, c));
            resolved.push(ResolvedLayer { index, config, input_shape, output_shape });
        }
        Ok(resolved)
    }
}

fn parse_kv(token: &str, line_no: usize) -> Result<(&str, &str)> {
    token
        .split_once('=')
        .ok_or_else(|| Error::parse(line_no, format!("expected key=value, got `{token}`")))
}

fn parse_layer_args(
    tokens: &[&str],
    line_no: usize,
    allowed: &[&str],
) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for token in tokens {
        let (k, v) = parse_kv(token, line_no)?;
        if !allowed.contains(&k) {
            return Err(Error::parse(line_no, format!("unknown argument `{k}`")));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn lookup<'a>(args: &'a [(String, String)], key: &str) -> Option<&'a str> {
    args.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn require<'a>(args: &'a [(String, String)], key: &str, line_no: usize) -> Result<&'a str> {
    lookup(args, key)
        .ok_or_else(|| Error::parse(line_no, format!("missing required argument `{key}=`")))
}

fn parse_num(v: &str, what: &str, line_no: usize) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::parse(line_no, format!("{what} must be an integer, got `{v}`")))
}

/// Parse the line-oriented network grammar. `#` starts a comment. Header
/// directives (`network`, `input`, `batch`, `mode`) must all be present.
pub fn parse_network_str(text: &str) -> Result<NetworkDescription> {
    let mut name = None;
    let mut input = None;
    let mut batch_size = None;
    let mut mode = None;
    let mut layers = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[0] {
            "network" => {
                name = Some(tokens[1..].join(" "));
            }
            "input" => {
                if tokens.len() != 4 {
                    return Err(Error::parse(line_no, "input needs `input <H> <W> <C>`"));
                }
                input = Some((
                    parse_num(tokens[1], "input height", line_no)?,
                    parse_num(tokens[2], "input width", line_no)?,
                    parse_num(tokens[3], "input channels", line_no)?,
                ));
            }
            "batch" => {
                if tokens.len() != 2 {
                    return Err(Error::parse(line_no, "batch needs `batch <B>`"));
                }
                batch_size = Some(parse_num(tokens[1], "batch size", line_no)?);
            }
            "mode" => {
                if tokens.len() != 2 {
                    return Err(Error::parse(line_no, "mode needs `mode <name>`"));
                }
                mode = Some(
                    tokens[1]
                        .parse::<OptimizerKind>()
                        .map_err(|e| Error::parse(line_no, e.to_string()))?,
                );
            }
            "conv" => {
                let args = parse_layer_args(
                    &tokens[1..],
                    line_no,
                    &["k", "s", "p", "out", "act", "bias"],
                )?;
                let padding = match lookup(&args, "p").unwrap_or("0") {
                    "same" => PadSpec::Same,
                    v => PadSpec::Pixels(parse_num(v, "padding", line_no)?),
                };
                layers.push(NetLayer::Conv {
                    kernel: parse_num(require(&args, "k", line_no)?, "kernel", line_no)?,
                    stride: parse_num(lookup(&args, "s").unwrap_or("1"), "stride", line_no)?,
                    padding,
                    out_depth: parse_num(require(&args, "out", line_no)?, "out", line_no)?,
                    activation: lookup(&args, "act")
                        .unwrap_or("none")
                        .parse()
                        .map_err(|e: Error| Error::parse(line_no, e.to_string()))?,
                    has_bias: lookup(&args, "bias").unwrap_or("1") != "0",
                });
            }
            "maxpool" => {
                let args = parse_layer_args(&tokens[1..], line_no, &["k", "s", "p"])?;
                layers.push(NetLayer::MaxPool {
                    kernel: parse_num(require(&args, "k", line_no)?, "kernel", line_no)?,
                    stride: parse_num(lookup(&args, "s").unwrap_or("1"), "stride", line_no)?,
                    padding: parse_num(lookup(&args, "p").unwrap_or("0"), "padding", line_no)?,
                });
            }
            "dense" => {
                let args = parse_layer_args(&tokens[1..], line_no, &["out", "act"])?;
                layers.push(NetLayer::Dense {
                    outputs: parse_num(require(&args, "out", line_no)?, "out", line_no)?,
                    activation: lookup(&args, "act")
                        .unwrap_or("none")
                        .parse()
                        .map_err(|e: Error| Error::parse(line_no, e.to_string()))?,
                });
            }
            other => {
                return Err(Error::parse(line_no, format!("unknown directive `{other}`")));
            }
        }
    }

    let desc = NetworkDescription {
        name: name.ok_or_else(|| Error::invalid("missing `network <name>` directive"))?,
        input: input.ok_or_else(|| Error::invalid("missing `input <H> <W> <C>` directive"))?,
        batch_size: batch_size.ok_or_else(|| Error::invalid("missing `batch <B>` directive"))?,
        mode: mode.ok_or_else(|| Error::invalid("missing `mode <name>` directive"))?,
        layers,
    };
    desc.resolve()?; // validate the shape chain before handing it out
    Ok(desc)
}

pub fn parse_network(path: impl AsRef<Path>) -> Result<NetworkDescription> {
    parse_network_str(&std::fs::read_to_string(path)?)
}

/// Anything that can estimate a single layer's batch execution time.
pub trait TimePredictor {
    fn predict_layer_ms(&self, config: &LayerConfig, hw: &HardwareProfile) -> Result<f64>;

    /// Whether this predictor models the given layer kind at all.
    fn covers(&self, kind: LayerKind) -> bool;
}

impl TimePredictor for MlpPredictor {
    fn predict_layer_ms(&self, config: &LayerConfig, hw: &HardwareProfile) -> Result<f64> {
        self.predict_time_ms(config, hw)
    }

    fn covers(&self, kind: LayerKind) -> bool {
        MlpPredictor::covers(self, kind)
    }
}

/// Per-layer entry of a report. `unmodeled` marks layers the predictor does
/// not cover; their time contributes zero.
#[derive(Debug, Clone)]
pub struct LayerTime {
    pub index: usize,
    pub kind: LayerKind,
    pub time_ms: f64,
    pub unmodeled: bool,
}

/// Whole-network timing report, predicted or measured.
#[derive(Debug, Clone)]
pub struct PredictionReport {
    pub network: String,
    pub hardware: String,
    pub mode: OptimizerKind,
    pub batch_size: usize,
    pub layers: Vec<LayerTime>,
    /// Exact sum of the per-layer times.
    pub batch_time_ms: f64,
    /// Number of batches per epoch.
    pub batch_count: u64,
    /// `batch_count as f64 * batch_time_ms`, exactly.
    pub epoch_time_ms: f64,
}

impl PredictionReport {
    fn from_layers(
        network: String,
        hardware: String,
        mode: OptimizerKind,
        batch_size: usize,
        layers: Vec<LayerTime>,
        batch_count: u64,
    ) -> Self {
        let batch_time_ms: f64 = layers.iter().map(|l| l.time_ms).sum();
        PredictionReport {
            network,
            hardware,
            mode,
            batch_size,
            layers,
            batch_time_ms,
            batch_count,
            epoch_time_ms: batch_count as f64 * batch_time_ms,
        }
    }

    pub fn has_unmodeled(&self) -> bool {
        self.layers.iter().any(|l| l.unmodeled)
    }
}

/// Predict every layer and aggregate `T_b` and `E = p * T_b`. Layer kinds
/// the predictor does not cover are reported as unmodeled with zero time.
pub fn predict_network(
    desc: &NetworkDescription,
    predictor: &dyn TimePredictor,
    hw: &HardwareProfile,
    batch_count: u64,
) -> Result<PredictionReport> {
    let mut layers = Vec::with_capacity(desc.layer_count());
    for layer in desc.resolve()? {
        let kind = layer.config.kind();
        if predictor.covers(kind) {
            let time_ms = predictor.predict_layer_ms(&layer.config, hw)?;
            layers.push(LayerTime { index: layer.index, kind, time_ms, unmodeled: false });
        } else {
            layers.push(LayerTime { index: layer.index, kind, time_ms: 0.0, unmodeled: true });
        }
    }
    Ok(PredictionReport::from_layers(
        desc.name.clone(),
        hw.name.clone(),
        desc.mode,
        desc.batch_size,
        layers,
        batch_count,
    ))
}

/// Batch sizes swept by [`compare_modes`].
pub const MODE_SWEEP_BATCHES: [usize; 7] = [1, 2, 4, 8, 16, 32, 64];

/// Modes compared by [`compare_modes`]: forward only, plain gradient
/// descent, and Adam.
pub const COMPARED_MODES: [OptimizerKind; 3] =
    [OptimizerKind::None, OptimizerKind::GradientDescent, OptimizerKind::Adam];

#[derive(Debug, Clone)]
pub struct ModeRow {
    pub layer_index: usize,
    pub kind: LayerKind,
    pub mode: OptimizerKind,
    pub batch_size: usize,
    pub predicted_ms: f64,
    pub unmodeled: bool,
}

/// Per-layer predictions under each mode and batch size in the sweep.
pub fn compare_modes(
    desc: &NetworkDescription,
    predictor: &dyn TimePredictor,
    hw: &HardwareProfile,
) -> Result<Vec<ModeRow>> {
    let mut rows = Vec::new();
    for mode in COMPARED_MODES {
        for batch in MODE_SWEEP_BATCHES {
            let variant = NetworkDescription { batch_size: batch, mode, ..desc.clone() };
            for layer in variant.resolve()? {
                let kind = layer.config.kind();
                let (predicted_ms, unmodeled) = if predictor.covers(kind) {
                    (predictor.predict_layer_ms(&layer.config, hw)?, false)
                } else {
                    (0.0, true)
                };
                rows.push(ModeRow {
                    layer_index: layer.index,
                    kind,
                    mode,
                    batch_size: batch,
                    predicted_ms,
                    unmodeled,
                });
            }
        }
    }
    Ok(rows)
}

/// Time one resolved layer on the host with the median-of-5 protocol.
///
/// Layers with parameters run forward+backward+update when the mode says
/// so; pooling has no parameters and is always timed forward-only.
fn measure_layer(
    layer: &ResolvedLayer,
    batch: usize,
    mode: OptimizerKind,
    clock: &mut dyn Clock,
) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(layer.index as u64 + 1);
    let mut fill = |len: usize, scale: f32| -> Vec<f32> {
        (0..len).map(|_| rng.gen_range(-scale..=scale)).collect()
    };
    let training = mode != OptimizerKind::None;
    let (ih, iw, ic) = layer.input_shape;
    let act = layer.config.activation;

    let times = match &layer.config.shape {
        crate::featurespace::LayerShape::Dense(d) => {
            let input = Matrix::new(batch, d.inputs, fill(batch * d.inputs, 1.0))?;
            let mut params = DenseParams::new(
                Matrix::new(d.inputs, d.outputs, fill(d.inputs * d.outputs, 0.5))?,
                Some(fill(d.outputs, 0.5)),
            )?;
            let upstream = Matrix::new(batch, d.outputs, fill(batch * d.outputs, 1.0))?;
            let mut wstate =
                training.then(|| OptimizerState::new(mode, d.inputs * d.outputs)).transpose()?;
            let mut bstate = training.then(|| OptimizerState::new(mode, d.outputs)).transpose()?;
            let mut step = 0usize;
            time_runs(clock, || {
                if let (Some(ws), Some(bs)) = (wstate.as_mut(), bstate.as_mut()) {
                    let grads = dense_backward(&input, &params, act, &upstream)?;
                    optimizer_step(
                        mode,
                        params.weights.data_mut(),
                        grads.weights.data(),
                        ws,
                        step,
                        0.01,
                    )?;
                    optimizer_step(
                        mode,
                        params.bias.as_mut().unwrap(),
                        grads.bias.as_ref().unwrap(),
                        bs,
                        step,
                        0.01,
                    )?;
                } else {
                    let out = dense_forward(&input, &params, act)?;
                    std::hint::black_box(out.data().first().copied());
                }
                step += 1;
                Ok(())
            })?
        }
        crate::featurespace::LayerShape::Conv2d(c) => {
            let input = Tensor4::new([batch, ih, iw, ic], fill(batch * ih * iw * ic, 1.0))?;
            let klen = c.kernel * c.kernel * c.input_depth * c.output_depth;
            let bias = c.has_bias.then(|| fill(c.output_depth, 0.5));
            let mut params = ConvParams::new(
                Tensor4::new(
                    [c.kernel, c.kernel, c.input_depth, c.output_depth],
                    fill(klen, 0.5),
                )?,
                bias,
                c.stride,
                c.padding,
            )?;
            let (oh, ow, oc) = layer.output_shape;
            let upstream = Tensor4::new([batch, oh, ow, oc], fill(batch * oh * ow * oc, 1.0))?;
            let mut kstate = training.then(|| OptimizerState::new(mode, klen)).transpose()?;
            let mut bstate = (training && c.has_bias)
                .then(|| OptimizerState::new(mode, c.output_depth))
                .transpose()?;
            let mut step = 0usize;
            time_runs(clock, || {
                if let Some(ks) = kstate.as_mut() {
                    let grads = conv2d_backward(&input, &params, act, &upstream)?;
                    optimizer_step(
                        mode,
                        params.kernel.data_mut(),
                        grads.kernel.data(),
                        ks,
                        step,
                        0.01,
                    )?;
                    if let (Some(b), Some(gb), Some(bs)) =
                        (params.bias.as_mut(), grads.bias.as_ref(), bstate.as_mut())
                    {
                        optimizer_step(mode, b, gb, bs, step, 0.01)?;
                    }
                } else {
                    let out = conv2d_forward(&input, &params, act)?;
                    std::hint::black_box(out.data().first().copied());
                }
                step += 1;
                Ok(())
            })?
        }
        crate::featurespace::LayerShape::Pool(p) => {
            let input = Tensor4::new([batch, ih, iw, ic], fill(batch * ih * iw * ic, 1.0))?;
            let (kernel, stride, padding) = (p.kernel, p.stride, p.padding);
            time_runs(clock, || {
                let out = maxpool_forward(&input, kernel, stride, padding)?;
                std::hint::black_box(out.data().first().copied());
                Ok(())
            })?
        }
        crate::featurespace::LayerShape::Recurrent(_) => {
            return Err(Error::UnsupportedLayer("recurrent".into()));
        }
    };
    Ok(crate::bench::median_of_5(times)? as f64)
}

/// Actually time every layer on the host and aggregate like
/// [`predict_network`]. The report's batch count is 1, so the epoch time
/// equals the batch time.
pub fn measure_network(
    desc: &NetworkDescription,
    clock: &mut dyn Clock,
) -> Result<PredictionReport> {
    let mut layers = Vec::with_capacity(desc.layer_count());
    for layer in desc.resolve()? {
        let time_ms = measure_layer(&layer, desc.batch_size, desc.mode, clock)?;
        layers.push(LayerTime {
            index: layer.index,
            kind: layer.config.kind(),
            time_ms,
            unmodeled: false,
        });
    }
    Ok(PredictionReport::from_layers(
        desc.name.clone(),
        "host".into(),
        desc.mode,
        desc.batch_size,
        layers,
        1,
    ))
}

/// Convenience wrapper with a fresh monotonic clock.
pub fn measure_network_host(desc: &NetworkDescription) -> Result<PredictionReport> {
    let mut clock = MonotonicClock::new();
    measure_network(desc, &mut clock)
}

/// Write a report as CSV (`layer_index,kind,mode,batch,predicted_ms` plus an
/// optional `measured_ms` column and a totals row).
pub fn write_report_csv(
    report: &PredictionReport,
    measured: Option<&PredictionReport>,
    mut out: impl Write,
) -> Result<()> {
    if let Some(m) = measured {
        if m.layers.len() != report.layers.len() {
            return Err(Error::invalid("measured report has a different layer count"));
        }
    }
    let header = if measured.is_some() {
        "layer_index,kind,mode,batch,predicted_ms,measured_ms"
    } else {
        "layer_index,kind,mode,batch,predicted_ms"
    };
    writeln!(out, "{header}")?;
    for (i, l) in report.layers.iter().enumerate() {
        let mut row =
            format!("{},{},{},{},{}", l.index, l.kind, report.mode, report.batch_size, l.time_ms);
        if let Some(m) = measured {
            row.push_str(&format!(",{}", m.layers[i].time_ms));
        }
        writeln!(out, "{row}")?;
    }
    let mut totals =
        format!("total,,{},{},{}", report.mode, report.batch_size, report.batch_time_ms);
    if let Some(m) = measured {
        totals.push_str(&format!(",{}", m.batch_time_ms));
    }
    writeln!(out, "{totals}")?;
    Ok(())
}
