//! Layer configuration: the hyperparameters of one atomic operation.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kernels::{ActivationKind, OptimizerKind};

/// Product of matrix size and channel count a conv layer may not exceed.
pub const CONV_CHANNEL_BUDGET: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Dense,
    Conv2d,
    Pool,
    Recurrent,
}

impl LayerKind {
    pub const ALL: [LayerKind; 4] =
        [LayerKind::Dense, LayerKind::Conv2d, LayerKind::Pool, LayerKind::Recurrent];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&k| k == self).unwrap()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Dense => "dense",
            LayerKind::Conv2d => "conv2d",
            LayerKind::Pool => "pool",
            LayerKind::Recurrent => "recurrent",
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dense" => Ok(LayerKind::Dense),
            "conv2d" | "conv" => Ok(LayerKind::Conv2d),
            "pool" | "maxpool" => Ok(LayerKind::Pool),
            "recurrent" => Ok(LayerKind::Recurrent),
            other => Err(Error::invalid(format!("unknown layer kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecurrenceType {
    Default,
    Lstm,
    Gru,
}

impl RecurrenceType {
    pub const ALL: [RecurrenceType; 3] =
        [RecurrenceType::Default, RecurrenceType::Lstm, RecurrenceType::Gru];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&r| r == self).unwrap()
    }
}

/// Dense layer dimensions. Benchmarked dense layers always carry a bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DenseDims {
    pub inputs: usize,
    pub outputs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConvDims {
    /// Height and width of the square input image.
    pub matrix_size: usize,
    pub kernel: usize,
    pub input_depth: usize,
    pub output_depth: usize,
    pub stride: usize,
    pub padding: usize,
    pub has_bias: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PoolDims {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RecurrentDims {
    pub inputs: usize,
    pub units: usize,
    pub recurrence: RecurrenceType,
    pub bidirectional: bool,
}

/// Kind-specific dimensions; exactly the fields of the kind are present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerShape {
    Dense(DenseDims),
    Conv2d(ConvDims),
    Pool(PoolDims),
    Recurrent(RecurrentDims),
}

/// One atomic operation's hyperparameters.
///
/// `optimizer == None` marks a pure forward pass; anything else times a
/// forward plus backward pass plus the optimizer update.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LayerConfig {
    pub batch_size: usize,
    pub activation: ActivationKind,
    pub optimizer: OptimizerKind,
    pub shape: LayerShape,
}

impl LayerConfig {
    pub fn dense(
        batch_size: usize,
        inputs: usize,
        outputs: usize,
        activation: ActivationKind,
        optimizer: OptimizerKind,
    ) -> Self {
        LayerConfig {
            batch_size,
            activation,
            optimizer,
            shape: LayerShape::Dense(DenseDims { inputs, outputs }),
        }
    }

    pub fn conv2d(
        batch_size: usize,
        dims: ConvDims,
        activation: ActivationKind,
        optimizer: OptimizerKind,
    ) -> Self {
        LayerConfig { batch_size, activation, optimizer, shape: LayerShape::Conv2d(dims) }
    }

    pub fn pool(batch_size: usize, dims: PoolDims, optimizer: OptimizerKind) -> Self {
        LayerConfig {
            batch_size,
            activation: ActivationKind::None,
            optimizer,
            shape: LayerShape::Pool(dims),
        }
    }

    pub fn kind(&self) -> LayerKind {
        match self.shape {
            LayerShape::Dense(_) => LayerKind::Dense,
            LayerShape::Conv2d(_) => LayerKind::Conv2d,
            LayerShape::Pool(_) => LayerKind::Pool,
            LayerShape::Recurrent(_) => LayerKind::Recurrent,
        }
    }

    pub fn forward_only(&self) -> bool {
        self.optimizer == OptimizerKind::None
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        match &self.shape {
            LayerShape::Dense(d) => {
                if d.inputs < 1 || d.outputs < 1 {
                    return Err(Error::invalid("dense inputs/outputs must be at least 1"));
                }
            }
            LayerShape::Conv2d(c) => {
                if c.matrix_size < 1 || c.kernel < 1 || c.stride < 1 {
                    return Err(Error::invalid(
                        "conv matrix, kernel and stride must be at least 1",
                    ));
                }
                if c.input_depth < 1 || c.output_depth < 1 {
                    return Err(Error::invalid("conv channel counts must be at least 1"));
                }
                // The 10000/matrix channel budget bounds the *sampled*
                // benchmark space, not what can be described or predicted;
                // full-size networks routinely exceed it.
            }
            LayerShape::Pool(p) => {
                if p.kernel < 1 || p.stride < 1 {
                    return Err(Error::invalid("pool kernel and stride must be at least 1"));
                }
                if p.padding >= p.kernel {
                    return Err(Error::invalid("pool padding must be smaller than the kernel"));
                }
            }
            LayerShape::Recurrent(r) => {
                if r.inputs < 1 || r.units < 1 {
                    return Err(Error::invalid("recurrent inputs/units must be at least 1"));
                }
            }
        }
        Ok(())
    }

    /// The fourteen configuration columns of the dataset CSV schema, in
    /// order: op_type, batch, activation, optimizer, direction, in_dim,
    /// out_dim, matrix_size, kernel, c_in, c_out, stride, padding, has_bias.
    /// Fields that do not apply to the kind are empty strings.
    pub fn csv_fields(&self) -> Vec<String> {
        let mut f = vec![
            self.kind().to_string(),
            self.batch_size.to_string(),
            self.activation.to_string(),
            self.optimizer.to_string(),
            if self.forward_only() { "forward".into() } else { "forward-backward".into() },
        ];
        let empty = String::new;
        match &self.shape {
            LayerShape::Dense(d) => {
                f.push(d.inputs.to_string());
                f.push(d.outputs.to_string());
                f.extend(std::iter::repeat_with(empty).take(7));
            }
            LayerShape::Conv2d(c) => {
                f.push(empty());
                f.push(empty());
                f.push(c.matrix_size.to_string());
                f.push(c.kernel.to_string());
                f.push(c.input_depth.to_string());
                f.push(c.output_depth.to_string());
                f.push(c.stride.to_string());
                f.push(c.padding.to_string());
                f.push(if c.has_bias { "1".into() } else { "0".into() });
            }
            LayerShape::Pool(p) => {
                f.push(empty());
                f.push(empty());
                f.push(empty());
                f.push(p.kernel.to_string());
                f.push(empty());
                f.push(empty());
                f.push(p.stride.to_string());
                f.push(p.padding.to_string());
                f.push(empty());
            }
            LayerShape::Recurrent(_) => {
                // No columns exist for recurrence type; recurrent records are
                // rejected by the CSV writer before this is reached.
                f.extend(std::iter::repeat_with(empty).take(9));
            }
        }
        f
    }
}
