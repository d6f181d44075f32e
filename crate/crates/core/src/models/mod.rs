//! Surrogate models mapping a normalised drive waveform to a normalised
//! power waveform, sample for sample and causally.
//!
//! All models take a batch as a `B × L` tape value (one sequence per row)
//! and return a `B × L` prediction.

mod attention;
mod cat;
mod lstm;
mod tdnn;
mod volterra;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Bound, Checkpoint, NamedTensor, ParamStore, Real, Tape, Var};
use crate::error::{Error, Result};

pub use attention::{conv_causal_attention, rk2_residual, AttentionWeights};
pub use cat::cat_forward;
pub use lstm::{lstm_forward, lstm_run, LstmState};
pub use tdnn::tdnn_forward;
pub use volterra::{feature_count, volterra_features, volterra_predict, volterra_regress, VolterraFit, DEFAULT_RIDGE};

/// Longest input a convolutional-attention model accepts (LPE table length).
pub const MAX_POSITIONS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    Volterra,
    Tdnn,
    Lstm,
    Cat,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Volterra, ModelKind::Tdnn, ModelKind::Lstm, ModelKind::Cat];

    pub fn tag(self) -> u32 {
        match self {
            ModelKind::Volterra => 0,
            ModelKind::Tdnn => 1,
            ModelKind::Lstm => 2,
            ModelKind::Cat => 3,
        }
    }

    pub fn from_tag(tag: u32) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.tag() == tag)
            .ok_or_else(|| Error::Format(format!("unknown model tag {tag}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Volterra => "volterra",
            ModelKind::Tdnn => "tdnn",
            ModelKind::Lstm => "lstm",
            ModelKind::Cat => "cat",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::validation(format!("unknown model {s:?}; expected volterra, tdnn, lstm or cat")))
    }
}

/// Architecture hyperparameters. Hidden activations are ReLU throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelConfig {
    /// Truncated Volterra series. Only `order = 2` is supported.
    Volterra { memory: usize, order: usize, ridge: f64 },
    /// Causal sliding window followed by a ReLU MLP applied per position.
    Tdnn {
        window: usize,
        hidden_nodes: usize,
        hidden_layers: usize,
    },
    /// Stacked LSTM with a two-layer ReLU head per step.
    Lstm { hidden_nodes: usize, layers: usize },
    /// Decoder-only convolutional-attention transformer.
    ///
    /// `mlp_hidden_layers` counts linear layers inside each MLP and
    /// `mlp_sublayers` counts attention/MLP sublayer pairs.
    Cat {
        embedding: usize,
        heads: usize,
        conv_window: usize,
        mlp_hidden: usize,
        mlp_hidden_layers: usize,
        mlp_sublayers: usize,
    },
}

impl ModelConfig {
    /// Table sizes used for the full-scale models.
    pub fn full(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Volterra => ModelConfig::Volterra {
                memory: 16,
                order: 2,
                ridge: DEFAULT_RIDGE,
            },
            ModelKind::Tdnn => ModelConfig::Tdnn {
                window: 25,
                hidden_nodes: 2048,
                hidden_layers: 1,
            },
            ModelKind::Lstm => ModelConfig::Lstm {
                hidden_nodes: 64,
                layers: 2,
            },
            ModelKind::Cat => ModelConfig::Cat {
                embedding: 128,
                heads: 8,
                conv_window: 19,
                mlp_hidden: 256,
                mlp_hidden_layers: 2,
                mlp_sublayers: 2,
            },
        }
    }

    /// Desk-scale variant: the CAT shrinks to embedding 64 with 4 heads.
    pub fn desk(kind: ModelKind) -> Self {
        match Self::full(kind) {
            ModelConfig::Cat {
                conv_window,
                mlp_hidden,
                mlp_hidden_layers,
                mlp_sublayers,
                ..
            } => ModelConfig::Cat {
                embedding: 64,
                heads: 4,
                conv_window,
                mlp_hidden,
                mlp_hidden_layers,
                mlp_sublayers,
            },
            other => other,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Volterra { .. } => ModelKind::Volterra,
            ModelConfig::Tdnn { .. } => ModelKind::Tdnn,
            ModelConfig::Lstm { .. } => ModelKind::Lstm,
            ModelConfig::Cat { .. } => ModelKind::Cat,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::validation(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        match *self {
            ModelConfig::Volterra { memory, order, ridge } => {
                positive("memory", memory)?;
                if order != 2 {
                    return Err(Error::validation(format!(
                        "only second-order Volterra is supported, got {order}"
                    )));
                }
                if !(ridge >= 0.0 && ridge.is_finite()) {
                    return Err(Error::validation(format!("ridge must be non-negative, got {ridge}")));
                }
            }
            ModelConfig::Tdnn {
                window,
                hidden_nodes,
                hidden_layers,
            } => {
                positive("window", window)?;
                positive("hidden_nodes", hidden_nodes)?;
                positive("hidden_layers", hidden_layers)?;
            }
            ModelConfig::Lstm { hidden_nodes, layers } => {
                positive("hidden_nodes", hidden_nodes)?;
                positive("layers", layers)?;
            }
            ModelConfig::Cat {
                embedding,
                heads,
                conv_window,
                mlp_hidden,
                mlp_hidden_layers,
                mlp_sublayers,
            } => {
                positive("embedding", embedding)?;
                positive("heads", heads)?;
                positive("conv_window", conv_window)?;
                positive("mlp_hidden", mlp_hidden)?;
                positive("mlp_sublayers", mlp_sublayers)?;
                if mlp_hidden_layers < 2 {
                    return Err(Error::validation("an MLP needs at least two linear layers"));
                }
                if embedding % heads != 0 {
                    return Err(Error::validation(format!(
                        "embedding {embedding} is not divisible by {heads} heads"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Integers stored alongside checkpoint weights.
    fn encode(&self) -> Vec<f32> {
        match *self {
            ModelConfig::Volterra { memory, order, ridge } => {
                // The ridge travels as four exact 16-bit chunks of its bits.
                let bits = ridge.to_bits();
                let mut v = vec![memory as f32, order as f32];
                v.extend((0..4).map(|k| ((bits >> (16 * k)) & 0xffff) as f32));
                v
            }
            ModelConfig::Tdnn {
                window,
                hidden_nodes,
                hidden_layers,
            } => vec![window as f32, hidden_nodes as f32, hidden_layers as f32],
            ModelConfig::Lstm { hidden_nodes, layers } => vec![hidden_nodes as f32, layers as f32],
            ModelConfig::Cat {
                embedding,
                heads,
                conv_window,
                mlp_hidden,
                mlp_hidden_layers,
                mlp_sublayers,
            } => vec![
                embedding as f32,
                heads as f32,
                conv_window as f32,
                mlp_hidden as f32,
                mlp_hidden_layers as f32,
                mlp_sublayers as f32,
            ],
        }
    }

    fn decode(kind: ModelKind, v: &[f32]) -> Result<Self> {
        let want = match kind {
            ModelKind::Volterra => 6,
            ModelKind::Tdnn => 3,
            ModelKind::Lstm => 2,
            ModelKind::Cat => 6,
        };
        if v.len() != want {
            return Err(Error::Format(format!(
                "{kind} config needs {want} entries, found {}",
                v.len()
            )));
        }
        let u = |i: usize| v[i] as usize;
        let cfg = match kind {
            ModelKind::Volterra => ModelConfig::Volterra {
                memory: u(0),
                order: u(1),
                ridge: f64::from_bits((0..4).fold(0u64, |acc, k| acc | ((v[2 + k] as u64) << (16 * k)))),
            },
            ModelKind::Tdnn => ModelConfig::Tdnn {
                window: u(0),
                hidden_nodes: u(1),
                hidden_layers: u(2),
            },
            ModelKind::Lstm => ModelConfig::Lstm {
                hidden_nodes: u(0),
                layers: u(1),
            },
            ModelKind::Cat => ModelConfig::Cat {
                embedding: u(0),
                heads: u(1),
                conv_window: u(2),
                mlp_hidden: u(3),
                mlp_hidden_layers: u(4),
                mlp_sublayers: u(5),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Human-readable `key=value` summary.
    pub fn describe(&self) -> String {
        match *self {
            ModelConfig::Volterra { memory, order, ridge } => {
                format!("volterra memory={memory} order={order} ridge={ridge:e}")
            }
            ModelConfig::Tdnn {
                window,
                hidden_nodes,
                hidden_layers,
            } => format!("tdnn window={window} hidden_nodes={hidden_nodes} hidden_layers={hidden_layers}"),
            ModelConfig::Lstm { hidden_nodes, layers } => format!("lstm hidden_nodes={hidden_nodes} layers={layers}"),
            ModelConfig::Cat {
                embedding,
                heads,
                conv_window,
                mlp_hidden,
                mlp_hidden_layers,
                mlp_sublayers,
            } => format!(
                "cat embedding={embedding} heads={heads} conv_window={conv_window} mlp_hidden={mlp_hidden} \
                 mlp_hidden_layers={mlp_hidden_layers} mlp_sublayers={mlp_sublayers}"
            ),
        }
    }
}

/// A configured model and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
}

impl<T: Real> Model<T> {
    /// Freshly initialised parameters: uniform fan-in weights, zero biases,
    /// unit layer-norm gains and N(0, 0.02²) positional embeddings.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = match config {
            ModelConfig::Volterra { memory, .. } => volterra::init(memory),
            ModelConfig::Tdnn {
                window,
                hidden_nodes,
                hidden_layers,
            } => tdnn::init(window, hidden_nodes, hidden_layers, &mut rng),
            ModelConfig::Lstm { hidden_nodes, layers } => lstm::init(hidden_nodes, layers, &mut rng),
            ModelConfig::Cat { .. } => cat::init(&config, &mut rng),
        }?;
        Ok(Self { config, params })
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind()
    }

    pub fn param_count(&self) -> usize {
        self.params.size()
    }

    /// Record the forward pass of a `B × L` batch.
    pub fn forward(&self, tape: &mut Tape<T>, bound: &Bound, input: Var) -> Result<Var> {
        match self.config {
            ModelConfig::Volterra { memory, .. } => volterra::forward(tape, bound, input, memory),
            ModelConfig::Tdnn { .. } => tdnn_forward(tape, bound, &self.config, input),
            ModelConfig::Lstm { .. } => lstm_forward(tape, bound, &self.config, input),
            ModelConfig::Cat { .. } => cat_forward(tape, bound, &self.config, input),
        }
    }

    /// Inference on a batch of equal-length waveforms, in the model's
    /// precision.
    pub fn predict(&self, inputs: &[&[f32]]) -> Result<Vec<Vec<T>>> {
        let Some(first) = inputs.first() else {
            return Ok(Vec::new());
        };
        let len = first.len();
        if inputs.iter().any(|x| x.len() != len) {
            return Err(Error::validation("all waveforms in a batch must share one length"));
        }
        if let ModelConfig::Volterra { memory, .. } = self.config {
            let coeffs: Vec<f64> = self.params.values()[0]
                .iter()
                .map(|c| c.to_f64().expect("finite"))
                .collect();
            return inputs
                .iter()
                .map(|x| {
                    let xd: Vec<f64> = x.iter().map(|&v| v as f64).collect();
                    volterra_predict(&coeffs, &xd, memory).map(|y| y.into_iter().map(T::of).collect())
                })
                .collect();
        }
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, false);
        let batch = Array2::from_shape_fn((inputs.len(), len), |(b, t)| T::of(inputs[b][t] as f64));
        let x = tape.constant(batch);
        let y = self.forward(&mut tape, &bound, x)?;
        Ok(tape.value(y).rows().into_iter().map(|r| r.to_vec()).collect())
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            config: self.config,
            params: self.params.cast(),
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut tensors: Vec<NamedTensor> = vec![NamedTensor {
            name: "meta.config".into(),
            dims: vec![self.config.encode().len()],
            data: self.config.encode(),
        }];
        tensors.extend(self.params.iter().map(|(name, v)| NamedTensor {
            name: name.to_string(),
            dims: vec![v.nrows(), v.ncols()],
            data: v.iter().map(|x| x.to_f32().expect("finite")).collect(),
        }));
        Checkpoint {
            kind: self.kind().tag(),
            tensors,
        }
    }

    /// Rebuild a model, checking every tensor against the declared config.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let kind = ModelKind::from_tag(ck.kind)?;
        let meta = ck
            .get("meta.config")
            .ok_or_else(|| Error::Format("checkpoint has no meta.config".into()))?;
        let config = ModelConfig::decode(kind, &meta.data)?;
        let mut model = Self::init(config, 0)?;
        let expected = ck.tensors.len() - 1;
        if expected != model.params.len() {
            return Err(Error::Format(format!(
                "{kind} checkpoint holds {expected} tensors, config needs {}",
                model.params.len()
            )));
        }
        for t in ck.tensors.iter().filter(|t| t.name != "meta.config") {
            let slot = model
                .params
                .get_mut(&t.name)
                .map_err(|_| Error::Format(format!("unexpected tensor {}", t.name)))?;
            if t.dims != [slot.nrows(), slot.ncols()] {
                return Err(Error::Format(format!(
                    "tensor {} has dims {:?}, expected {:?}",
                    t.name,
                    t.dims,
                    slot.shape()
                )));
            }
            for (dst, &src) in slot.iter_mut().zip(&t.data) {
                *dst = T::of(src as f64);
            }
        }
        Ok(model)
    }
}

/// `x·w + b` with a row-broadcast bias.
pub(crate) fn linear<T: Real>(tape: &mut Tape<T>, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = tape.matmul(x, w)?;
    tape.add_row(y, b)
}
