//! The learned execution-time model: a feed-forward network regressing
//! scaled log time, trained with Adam on a halving learning-rate schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{fit_scaler, Dataset, Scaler, SplitIndices};
use crate::error::{Error, Result};
use crate::featurespace::{
    encode, FeatureVector, HardwareProfile, LayerConfig, LayerKind, SCHEMA_ID,
};
use crate::kernels::{optimizer_step, Matrix, OptimizerKind, OptimizerState};
use crate::predictor::metrics::loss_rmsle;

/// Hidden-layer layout and regularization of the predictor network. The
/// output head is always a single linear unit.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    /// Hidden widths j_1..j_m.
    pub hidden: Vec<usize>,
    pub dropout_rate: f64,
    pub l2_lambda: f64,
}

impl MlpArchitecture {
    /// Architecture with the default dropout (0.2) and L2 constant (1e-5).
    pub fn new(input_dim: usize, hidden: Vec<usize>) -> Self {
        Self { input_dim, hidden, dropout_rate: 0.2, l2_lambda: 1e-5 }
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rate = rate;
        self
    }

    pub fn with_l2(mut self, lambda: f64) -> Self {
        self.l2_lambda = lambda;
        self
    }

    /// Number of hidden layers.
    pub fn depth(&self) -> usize {
        self.hidden.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim < 1 {
            return Err(Error::invalid("input dimension must be at least 1"));
        }
        if self.hidden.is_empty() || self.hidden.iter().any(|&j| j < 1) {
            return Err(Error::invalid("need at least one hidden layer, all widths >= 1"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid("dropout rate must lie in [0, 1)"));
        }
        if self.l2_lambda < 0.0 || !self.l2_lambda.is_finite() {
            return Err(Error::invalid("l2 constant must be non-negative"));
        }
        Ok(())
    }
}

/// Default hidden widths per depth: a halving pyramid starting at 256 for up
/// to four hidden layers and 512 beyond.
pub fn default_hidden_widths(depth: usize) -> Vec<usize> {
    let start: usize = if depth <= 4 { 256 } else { 512 };
    (0..depth).map(|i| (start >> i).max(1)).collect()
}

/// Training schedule. Defaults: 300 epochs, batch 128, initial learning rate
/// 0.1 halved every 40 epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub halve_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 300, batch_size: 128, lr0: 0.1, halve_every: 40, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.batch_size < 1 || self.halve_every < 1 {
            return Err(Error::invalid("epochs, batch size and halving interval must be >= 1"));
        }
        if self.lr0 <= 0.0 || !self.lr0.is_finite() {
            return Err(Error::invalid("initial learning rate must be positive"));
        }
        Ok(())
    }

    /// `lr0 / 2^(epoch / halve_every)`.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.lr0 / f64::powi(2.0, (epoch / self.halve_every) as i32)
    }
}

/// Per-epoch training trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    /// Mean data-term MSE (in scaled log-target space) over the epoch.
    pub train_mse: f64,
    /// RMSLE of millisecond predictions on the test split.
    pub test_rmsle: f64,
}

/// Forward mode: inference, or training with a seeded dropout mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Infer,
    Train { dropout_seed: u64 },
}

/// The learned regressor: layer weights, the fitted scaler, and the layer
/// kinds it saw during training.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpPredictor {
    pub(crate) arch: MlpArchitecture,
    pub(crate) weights: Vec<Matrix<f64>>,
    pub(crate) biases: Vec<Vec<f64>>,
    pub(crate) scaler: Scaler,
    pub(crate) schema_id: String,
    pub(crate) trained_kinds: Vec<LayerKind>,
}

/// He-style initialization: weights ~ Normal(0, 2/fan_in), biases zero.
/// Deterministic for a given seed.
pub fn init(arch: &MlpArchitecture, seed: u64) -> Result<MlpPredictor> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dims = vec![arch.input_dim];
    dims.extend_from_slice(&arch.hidden);
    dims.push(1);

    let mut weights = Vec::with_capacity(dims.len() - 1);
    let mut biases = Vec::with_capacity(dims.len() - 1);
    for pair in dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let data: Vec<f64> = (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect();
        weights.push(Matrix::new(fan_in, fan_out, data)?);
        biases.push(vec![0.0; fan_out]);
    }
    Ok(MlpPredictor {
        arch: arch.clone(),
        weights,
        biases,
        scaler: Scaler::identity(),
        schema_id: SCHEMA_ID.to_string(),
        trained_kinds: Vec::new(),
    })
}

struct BatchTrace {
    /// Pre-activations per layer.
    zs: Vec<Matrix<f64>>,
    /// Layer inputs: acts[0] is the batch, acts[k+1] feeds layer k+1.
    acts: Vec<Matrix<f64>>,
    /// Inverted dropout mask over the final hidden layer, if active.
    mask: Option<Matrix<f64>>,
}

/// Gradients for every weight matrix and bias vector.
pub struct Gradients {
    pub weights: Vec<Matrix<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpPredictor {
    pub fn arch(&self) -> &MlpArchitecture {
        &self.arch
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    pub fn schema_id(&self) -> &str {
        &self.schema_id
    }

    pub fn trained_kinds(&self) -> &[LayerKind] {
        &self.trained_kinds
    }

    /// Whether records of this layer kind were present in the training data.
    pub fn covers(&self, kind: LayerKind) -> bool {
        self.trained_kinds.contains(&kind)
    }

    pub fn weights(&self) -> &[Matrix<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    /// Shift one weight by `delta`; finite-difference probes use this.
    pub fn nudge_weight(&mut self, layer: usize, row: usize, col: usize, delta: f64) {
        *self.weights[layer].at_mut(row, col) += delta;
    }

    pub fn nudge_bias(&mut self, layer: usize, idx: usize, delta: f64) {
        self.biases[layer][idx] += delta;
    }

    fn layer_count(&self) -> usize {
        self.weights.len()
    }

    fn dropout_mask(&self, rows: usize, seed: u64) -> Option<Matrix<f64>> {
        let rate = self.arch.dropout_rate;
        if rate == 0.0 {
            return None;
        }
        let width = *self.arch.hidden.last().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keep = 1.0 - rate;
        let data = (0..rows * width)
            .map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 })
            .collect();
        Some(Matrix::new(rows, width, data).expect("mask dims"))
    }

    fn forward_trace(&self, batch: Matrix<f64>, mode: ForwardMode) -> BatchTrace {
        let layers = self.layer_count();
        let rows = batch.rows();
        let mask = match mode {
            ForwardMode::Infer => None,
            ForwardMode::Train { dropout_seed } => self.dropout_mask(rows, dropout_seed),
        };
        let mut zs = Vec::with_capacity(layers);
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(batch);
        for k in 0..layers {
            let input = &acts[k];
            let w = &self.weights[k];
            let mut z = Matrix::zeros(rows, w.cols());
            for r in 0..rows {
                let zrow = z.row_mut(r);
                zrow.copy_from_slice(&self.biases[k]);
                let inrow = input.row(r);
                for (i, &v) in inrow.iter().enumerate() {
                    let wrow = w.row(i);
                    for (zo, &wv) in zrow.iter_mut().zip(wrow) {
                        *zo += v * wv;
                    }
                }
            }
            let mut a = z.clone();
            if k + 1 < layers {
                for v in a.data_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                if k == layers - 2 {
                    if let Some(mask) = &mask {
                        for (v, &m) in a.data_mut().iter_mut().zip(mask.data()) {
                            *v *= m;
                        }
                    }
                }
            }
            zs.push(z);
            acts.push(a);
        }
        BatchTrace { zs, acts, mask }
    }

    /// Scaled-log-time output for one scaler-applied feature vector.
    pub fn forward(&self, x: &FeatureVector, mode: ForwardMode) -> Result<f64> {
        if x.schema_id != self.schema_id {
            return Err(Error::Version(format!(
                "feature schema `{}` does not match model schema `{}`",
                x.schema_id, self.schema_id
            )));
        }
        if x.values.len() != self.arch.input_dim {
            return Err(Error::invalid(format!(
                "feature vector has {} slots, model expects {}",
                x.values.len(),
                self.arch.input_dim
            )));
        }
        let batch = Matrix::new(1, x.values.len(), x.values.clone())?;
        let trace = self.forward_trace(batch, mode);
        Ok(trace.acts.last().unwrap().at(0, 0))
    }

    /// Full training loss (data MSE in scaled target space plus the L2 term)
    /// and its gradients for one batch. Rows of `xs` are scaler-applied
    /// feature values; `ys` are scaled log targets.
    pub fn loss_and_gradients(
        &self,
        xs: &[Vec<f64>],
        ys: &[f64],
        mode: ForwardMode,
    ) -> Result<(f64, Gradients)> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::invalid("batch features and targets must match and be non-empty"));
        }
        let rows = xs.len();
        let cols = self.arch.input_dim;
        let mut flat = Vec::with_capacity(rows * cols);
        for x in xs {
            if x.len() != cols {
                return Err(Error::invalid("feature row width does not match the architecture"));
            }
            flat.extend_from_slice(x);
        }
        let trace = self.forward_trace(Matrix::new(rows, cols, flat)?, mode);
        let layers = self.layer_count();
        let pred = trace.acts.last().unwrap();

        let mut data_loss = 0.0;
        let mut dout = Matrix::zeros(rows, 1);
        for r in 0..rows {
            let diff = pred.at(r, 0) - ys[r];
            data_loss += diff * diff;
            *dout.at_mut(r, 0) = 2.0 * diff / rows as f64;
        }
        data_loss /= rows as f64;

        let l2 = self.arch.l2_lambda;
        let mut reg_loss = 0.0;
        for w in &self.weights {
            reg_loss += w.data().iter().map(|v| v * v).sum::<f64>();
        }
        let loss = data_loss + l2 * reg_loss;

        let mut grad_w: Vec<Matrix<f64>> =
            self.weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect();
        let mut grad_b: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();

        // dz for the current layer, walking backwards from the head.
        let mut dz = dout;
        for k in (0..layers).rev() {
            let input = &trace.acts[k];
            for r in 0..rows {
                let dzrow = dz.row(r);
                for (g, &d) in grad_b[k].iter_mut().zip(dzrow) {
                    *g += d;
                }
                let inrow = input.row(r);
                for (i, &v) in inrow.iter().enumerate() {
                    let grow = grad_w[k].row_mut(i);
                    for (g, &d) in grow.iter_mut().zip(dzrow) {
                        *g += v * d;
                    }
                }
            }
            if k == 0 {
                break;
            }
            // Propagate into the previous layer's pre-activation.
            let w = &self.weights[k];
            let mut da = Matrix::zeros(rows, w.rows());
            for r in 0..rows {
                let dzrow = dz.row(r);
                let darow = da.row_mut(r);
                for i in 0..w.rows() {
                    let wrow = w.row(i);
                    let mut acc = 0.0;
                    for (&wv, &d) in wrow.iter().zip(dzrow) {
                        acc += wv * d;
                    }
                    darow[i] = acc;
                }
            }
            if k - 1 == layers.saturating_sub(2) {
                if let Some(mask) = &trace.mask {
                    for (v, &m) in da.data_mut().iter_mut().zip(mask.data()) {
                        *v *= m;
                    }
                }
            }
            let zprev = &trace.zs[k - 1];
            for (v, &z) in da.data_mut().iter_mut().zip(zprev.data()) {
                if z <= 0.0 {
                    *v = 0.0;
                }
            }
            dz = da;
        }

        for (gw, w) in grad_w.iter_mut().zip(&self.weights) {
            for (g, &wv) in gw.data_mut().iter_mut().zip(w.data()) {
                *g += 2.0 * l2 * wv;
            }
        }

        Ok((loss, Gradients { weights: grad_w, biases: grad_b }))
    }

    /// Predicted batch execution time in milliseconds for one configuration:
    /// encode, scale, run the network, invert the log-target transform.
    /// Never negative.
    pub fn predict_time_ms(&self, config: &LayerConfig, hw: &HardwareProfile) -> Result<f64> {
        let fv = encode(config, hw)?;
        let scaled = self.scaler.apply(&fv)?;
        let out = self.forward(&scaled, ForwardMode::Infer)?;
        Ok(self.scaler.unscale_target(out))
    }
}

/// Train a predictor on the training split; records the test-split RMSLE
/// after every epoch. Deterministic for a given `cfg.seed`.
pub fn train(
    ds: &Dataset,
    splits: &SplitIndices,
    arch: &MlpArchitecture,
    cfg: &TrainConfig,
) -> Result<(MlpPredictor, Vec<EpochStats>)> {
    arch.validate()?;
    cfg.validate()?;
    if splits.train.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }

    let scaler = fit_scaler(ds, &splits.train)?;
    let (raw_features, raw_targets) = ds.encode_all()?;
    let scaled: Vec<Vec<f64>> = raw_features
        .iter()
        .map(|fv| scaler.apply(fv).map(|s| s.values))
        .collect::<Result<_>>()?;
    let scaled_targets: Vec<f64> =
        raw_targets.iter().map(|&t| scaler.scale_target(t)).collect();

    let mut predictor = init(arch, cfg.seed)?;
    predictor.scaler = scaler;
    let mut kinds: Vec<LayerKind> = Vec::new();
    for &i in &splits.train {
        let k = ds.records[i].config.kind();
        if !kinds.contains(&k) {
            kinds.push(k);
        }
    }
    predictor.trained_kinds = kinds;

    // Separate stream of the same seed for shuffling and dropout draws.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut w_states: Vec<OptimizerState<f64>> = predictor
        .weights
        .iter()
        .map(|w| OptimizerState::new(OptimizerKind::Adam, w.data().len()))
        .collect::<Result<_>>()?;
    let mut b_states: Vec<OptimizerState<f64>> = predictor
        .biases
        .iter()
        .map(|b| OptimizerState::new(OptimizerKind::Adam, b.len()))
        .collect::<Result<_>>()?;

    let test_actual: Vec<f64> =
        splits.test.iter().map(|&i| ds.records[i].median_ms as f64).collect();

    use rand::seq::SliceRandom;
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = splits.train.to_vec();
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate(epoch);
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let xs: Vec<Vec<f64>> = chunk.iter().map(|&i| scaled[i].clone()).collect();
            let ys: Vec<f64> = chunk.iter().map(|&i| scaled_targets[i]).collect();
            let mode = ForwardMode::Train { dropout_seed: rng.gen() };
            let (loss, grads) = predictor.loss_and_gradients(&xs, &ys, mode)?;
            for k in 0..predictor.weights.len() {
                optimizer_step(
                    OptimizerKind::Adam,
                    predictor.weights[k].data_mut(),
                    grads.weights[k].data(),
                    &mut w_states[k],
                    step,
                    lr,
                )?;
                optimizer_step(
                    OptimizerKind::Adam,
                    &mut predictor.biases[k],
                    &grads.biases[k],
                    &mut b_states[k],
                    step,
                    lr,
                )?;
            }
            step += 1;
            epoch_loss += loss;
            batches += 1;
        }

        let test_rmsle = if splits.test.is_empty() {
            f64::NAN
        } else {
            let preds: Vec<f64> = splits
                .test
                .iter()
                .map(|&i| {
                    let out = predictor
                        .forward(
                            &FeatureVector {
                                values: scaled[i].clone(),
                                schema_id: SCHEMA_ID.to_string(),
                            },
                            ForwardMode::Infer,
                        )
                        .expect("test row forward");
                    predictor.scaler.unscale_target(out)
                })
                .collect();
            loss_rmsle(&preds, &test_actual)?
        };
        curve.push(EpochStats {
            epoch,
            lr,
            train_mse: epoch_loss / batches.max(1) as f64,
            test_rmsle,
        });
    }

    Ok((predictor, curve))
}

/// Millisecond predictions and errors over a set of record indices.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub rmse_ms: f64,
    pub rmsle: f64,
    /// (predicted_ms, actual_ms) pairs in index order.
    pub points: Vec<(f64, f64)>,
}

/// Evaluate a trained predictor on the given record indices.
pub fn evaluate(predictor: &MlpPredictor, ds: &Dataset, indices: &[usize]) -> Result<EvalReport> {
    if indices.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty index set"));
    }
    let mut preds = Vec::with_capacity(indices.len());
    let mut actual = Vec::with_capacity(indices.len());
    for &i in indices {
        let r = ds
            .records
            .get(i)
            .ok_or_else(|| Error::invalid(format!("index {i} out of bounds")))?;
        preds.push(predictor.predict_time_ms(&r.config, &r.hw)?);
        actual.push(r.median_ms as f64);
    }
    Ok(EvalReport {
        rmse_ms: crate::predictor::metrics::rmse(&preds, &actual)?,
        rmsle: loss_rmsle(&preds, &actual)?,
        points: preds.into_iter().zip(actual).collect(),
    })
}

/// One row of a hidden-depth sweep.
#[derive(Debug, Clone, Copy)]
pub struct DepthSweepRow {
    pub depth: usize,
    pub test_rmse_ms: f64,
    pub test_rmsle: f64,
}

/// Train one model per hidden depth (default pyramid widths) and report the
/// test-split RMSE for each.
pub fn depth_sweep(
    ds: &Dataset,
    splits: &SplitIndices,
    depths: &[usize],
    cfg: &TrainConfig,
    dropout_rate: f64,
    l2_lambda: f64,
) -> Result<Vec<DepthSweepRow>> {
    let mut rows = Vec::with_capacity(depths.len());
    for &depth in depths {
        let arch = MlpArchitecture::new(
            crate::featurespace::feature_dim(),
            default_hidden_widths(depth),
        )
        .with_dropout(dropout_rate)
        .with_l2(l2_lambda);
        let (model, _) = train(ds, splits, &arch, cfg)?;
        let report = evaluate(&model, ds, &splits.test)?;
        rows.push(DepthSweepRow {
            depth,
            test_rmse_ms: report.rmse_ms,
            test_rmsle: report.rmsle,
        });
    }
    Ok(rows)
}
