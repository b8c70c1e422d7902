//! The ELSR network.
//!
//! Default layout (nf = 6, scale 4):
//!
//! ```text
//! x ─ conv1 ─┬─ PReLU ─ conv2 ─ conv3 ─(+)─ conv4 ─ pixel_shuffle(4) ─ y
//!            └───────────────────────────┘
//! ```
//!
//! A single residual carries conv1's output to the input of the last conv.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autograd::{GradTape, Gradients, Var};
use crate::error::{invalid, Error, Result};
use crate::model::archive::WeightArchive;
use crate::model::config::{Activation, ModelConfig};
use crate::tensor::{self, ConvParams, Tensor};

pub const PRELU_INIT: f32 = 0.25;

#[derive(Clone, Debug, PartialEq)]
pub struct ElsrModel {
    config: ModelConfig,
    pub convs: Vec<ConvParams>,
    /// Per-channel PReLU slopes; empty for other activations.
    pub prelu: Vec<f32>,
    init: String,
}

/// Tape handles of a model's parameters for one forward/backward pass.
#[derive(Clone, Debug)]
pub struct ParamVars {
    convs: Vec<(Var, Var)>,
    prelu: Option<Var>,
}

/// One row of [`ElsrModel::layer_table`].
#[derive(Clone, Debug, PartialEq)]
pub struct LayerInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub params: usize,
    pub flops: u64,
}

/// Outcome of loading an archive into a model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadReport {
    pub loaded: Vec<String>,
    /// Layers left at their initial values, with the reason.
    pub skipped: Vec<(String, String)>,
}

impl ElsrModel {
    /// Builds a model with He-uniform (fan-in) conv weights, zero biases and
    /// PReLU slopes of 0.25, drawn deterministically from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let convs = config
            .conv_channels()
            .into_iter()
            .map(|(cin, cout)| {
                let bound = (6.0 / (cin * 9) as f64).sqrt() as f32;
                let w = Tensor::from_fn([cout, cin, 3, 3], |_, _, _, _| rng.gen_range(-bound..bound));
                ConvParams::new(w, vec![0.0; cout])
            })
            .collect::<Result<Vec<_>>>()?;
        let prelu = match config.activation {
            Activation::Prelu => vec![PRELU_INIT; config.nf],
            _ => Vec::new(),
        };
        let init = format!("he_uniform_fan_in bias=0 prelu={PRELU_INIT} seed={seed}");
        Ok(Self {
            config,
            convs,
            prelu,
            init,
        })
    }

    /// All weights, biases and slopes set to zero.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let convs = config
            .conv_channels()
            .into_iter()
            .map(|(cin, cout)| ConvParams::zeros(cout, cin))
            .collect();
        let prelu = match config.activation {
            Activation::Prelu => vec![0.0; config.nf],
            _ => Vec::new(),
        };
        Ok(Self {
            config,
            convs,
            prelu,
            init: "zeros".into(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn scale(&self) -> usize {
        self.config.scale
    }

    pub fn init_descriptor(&self) -> &str {
        &self.init
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let last = self.convs.len() - 1;
        let head = tensor::conv2d_3x3(input, &self.convs[0])?;
        let mut h = match self.config.activation {
            Activation::Prelu => tensor::prelu(&head, &self.prelu)?,
            Activation::Relu => tensor::relu(&head),
            Activation::LeakyRelu { slope } => tensor::leaky_relu(&head, slope),
        };
        for conv in &self.convs[1..last] {
            h = tensor::conv2d_3x3(&h, conv)?;
        }
        if self.config.residual {
            h = tensor::add(&h, &head)?;
        }
        let tail = tensor::conv2d_3x3(&h, &self.convs[last])?;
        tensor::pixel_shuffle(&tail, self.config.scale)
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.channels() != 3 {
            return Err(Error::ShapeMismatch {
                op: "forward",
                dim: "input channels",
                expected: 3,
                got: input.channels(),
            });
        }
        if input.height() == 0 || input.width() == 0 {
            return Err(invalid("forward", "empty input"));
        }
        Ok(())
    }

    /// Places every parameter on `tape` as a learnable leaf.
    pub fn record_params(&self, tape: &mut GradTape) -> ParamVars {
        let convs = self
            .convs
            .iter()
            .map(|c| {
                let w = tape.param(c.weight.clone());
                let b = tape.param(Tensor::channel_vector(c.bias.clone()));
                (w, b)
            })
            .collect();
        let prelu = (self.config.activation == Activation::Prelu)
            .then(|| tape.param(Tensor::channel_vector(self.prelu.clone())));
        ParamVars { convs, prelu }
    }

    /// Same computation as [`forward`](Self::forward), recorded on a tape.
    pub fn forward_tape(&self, tape: &mut GradTape, vars: &ParamVars, input: Var) -> Result<Var> {
        self.check_input(tape.value(input))?;
        let last = vars.convs.len() - 1;
        let (w, b) = vars.convs[0];
        let head = tape.conv2d_3x3(input, w, b)?;
        let mut h = match self.config.activation {
            Activation::Prelu => {
                let slope = vars.prelu.ok_or_else(|| Error::Tape("PReLU slope not recorded".into()))?;
                tape.prelu(head, slope)?
            }
            Activation::Relu => tape.relu(head),
            Activation::LeakyRelu { slope } => tape.leaky_relu(head, slope),
        };
        for &(w, b) in &vars.convs[1..last] {
            h = tape.conv2d_3x3(h, w, b)?;
        }
        if self.config.residual {
            h = tape.add(h, head)?;
        }
        let (w, b) = vars.convs[last];
        let tail = tape.conv2d_3x3(h, w, b)?;
        tape.pixel_shuffle(tail, self.config.scale)
    }

    /// Gradients in [`param_names`](Self::param_names) order.
    pub fn collect_grads(&self, grads: &Gradients, vars: &ParamVars) -> Result<Vec<Vec<f32>>> {
        let fetch = |v: Var| -> Result<Vec<f32>> {
            grads
                .get(v)
                .map(|t| t.data().to_vec())
                .ok_or_else(|| Error::Tape("parameter without gradient".into()))
        };
        let mut out = Vec::new();
        for (i, &(w, b)) in vars.convs.iter().enumerate() {
            out.push(fetch(w)?);
            out.push(fetch(b)?);
            if i == 0 {
                if let Some(s) = vars.prelu {
                    out.push(fetch(s)?);
                }
            }
        }
        Ok(out)
    }

    pub fn param_names(&self) -> Vec<String> {
        self.config.param_shapes().into_iter().map(|(n, _)| n).collect()
    }

    /// Mutable parameter slices in archive order.
    pub fn params_mut(&mut self) -> Vec<&mut [f32]> {
        let mut out: Vec<&mut [f32]> = Vec::new();
        let mut prelu = Some(self.prelu.as_mut_slice());
        let has_prelu = self.config.activation == Activation::Prelu;
        for (i, conv) in self.convs.iter_mut().enumerate() {
            out.push(conv.weight.data_mut());
            out.push(conv.bias.as_mut_slice());
            if i == 0 && has_prelu {
                out.push(prelu.take().expect("taken once"));
            }
        }
        out
    }

    fn params(&self) -> Vec<&[f32]> {
        let mut out: Vec<&[f32]> = Vec::new();
        for (i, conv) in self.convs.iter().enumerate() {
            out.push(conv.weight.data());
            out.push(&conv.bias);
            if i == 0 && self.config.activation == Activation::Prelu {
                out.push(&self.prelu);
            }
        }
        out
    }

    /// Learnable scalar count, summed layer by layer from the config.
    pub fn count_params(&self) -> usize {
        let convs: usize = self
            .config
            .conv_channels()
            .iter()
            .map(|&(cin, cout)| cout * cin * 9 + cout)
            .sum();
        let act = if self.config.activation == Activation::Prelu {
            self.config.nf
        } else {
            0
        };
        convs + act
    }

    /// FLOPs for one `h x w` low-resolution frame, one MAC counted as two.
    pub fn count_flops(&self, h: usize, w: usize) -> u64 {
        self.layer_table(h, w).iter().map(|l| l.flops).sum()
    }

    /// Per-layer parameter and FLOP breakdown at LR resolution `h x w`.
    pub fn layer_table(&self, h: usize, w: usize) -> Vec<LayerInfo> {
        let hw = (h * w) as u64;
        let nf = self.config.nf as u64;
        let mut rows = Vec::new();
        let channels = self.config.conv_channels();
        let last = channels.len() - 1;
        for (i, &(cin, cout)) in channels.iter().enumerate() {
            rows.push(LayerInfo {
                name: format!("conv{}", i + 1),
                shape: vec![cout, cin, 3, 3],
                params: cout * cin * 9 + cout,
                flops: 2 * 9 * (cin * cout) as u64 * hw,
            });
            if i == 0 {
                let (name, params) = match self.config.activation {
                    Activation::Prelu => ("prelu", self.config.nf),
                    Activation::Relu => ("relu", 0),
                    Activation::LeakyRelu { .. } => ("leaky_relu", 0),
                };
                rows.push(LayerInfo {
                    name: name.into(),
                    shape: if params > 0 { vec![params] } else { vec![] },
                    params,
                    flops: hw * nf,
                });
            }
            if i + 1 == last && self.config.residual {
                rows.push(LayerInfo {
                    name: "residual_add".into(),
                    shape: vec![],
                    params: 0,
                    flops: hw * nf,
                });
            }
        }
        rows.push(LayerInfo {
            name: format!("pixel_shuffle(x{})", self.config.scale),
            shape: vec![],
            params: 0,
            flops: 0,
        });
        rows
    }

    pub fn to_archive(&self) -> WeightArchive {
        let mut a = WeightArchive::new(self.config.scale as u32, self.config.nf as u32);
        a.init = Some(self.init.clone());
        for ((name, shape), data) in self.config.param_shapes().into_iter().zip(self.params()) {
            a.push(name, shape, data.to_vec()).expect("names unique by construction");
        }
        a
    }

    /// Copies archive entries into this model.
    ///
    /// Strict mode fails on the first missing, extra or mis-shaped layer and
    /// leaves the model untouched. With `allow_partial`, such layers keep
    /// their current values and are listed in the report.
    pub fn load_archive(&mut self, archive: &WeightArchive, allow_partial: bool) -> Result<LoadReport> {
        let shapes = self.config.param_shapes();
        let mut report = LoadReport::default();
        let mut plan: Vec<Option<&[f32]>> = Vec::with_capacity(shapes.len());
        for (name, shape) in &shapes {
            match archive.get(name) {
                Some(e) if &e.shape == shape => {
                    plan.push(Some(&e.data));
                    report.loaded.push(name.clone());
                }
                Some(e) => {
                    if !allow_partial {
                        return Err(Error::LayerShape {
                            name: name.clone(),
                            expected: shape.clone(),
                            found: e.shape.clone(),
                        });
                    }
                    plan.push(None);
                    report
                        .skipped
                        .push((name.clone(), format!("shape {:?} != expected {:?}", e.shape, shape)));
                }
                None => {
                    if !allow_partial {
                        return Err(Error::Archive {
                            offset: 0,
                            msg: format!("layer `{name}` missing from archive"),
                        });
                    }
                    plan.push(None);
                    report.skipped.push((name.clone(), "missing from archive".into()));
                }
            }
        }
        for e in &archive.entries {
            if !shapes.iter().any(|(n, _)| n == &e.name) {
                if !allow_partial {
                    return Err(Error::Archive {
                        offset: 0,
                        msg: format!("archive layer `{}` has no place in model {}", e.name, self.config),
                    });
                }
                report.skipped.push((e.name.clone(), "not part of this model".into()));
            }
        }
        for (dst, src) in self.params_mut().into_iter().zip(plan) {
            if let Some(src) = src {
                dst.copy_from_slice(src);
            }
        }
        if report.skipped.is_empty() {
            if let Some(init) = &archive.init {
                self.init = init.clone();
            }
        }
        Ok(report)
    }

    pub fn from_archive(archive: &WeightArchive, config: ModelConfig) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        model.load_archive(archive, false)?;
        model.init = archive.init.clone().unwrap_or_else(|| "archive".into());
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_archive().save(path)
    }
}

/// Reconstructs the architecture an archive was written from.
///
/// Scale and width come from the header, depth from the conv layer count.
/// The activation is PReLU when a slope tensor is present and ReLU
/// otherwise; the residual is assumed on.
pub fn config_from_archive(archive: &WeightArchive) -> Result<ModelConfig> {
    let nb_convs = (1..)
        .take_while(|i| archive.get(&format!("conv{i}.weight")).is_some())
        .count();
    let config = ModelConfig {
        scale: archive.scale as usize,
        nf: archive.nf as usize,
        nb_convs,
        activation: if archive.get("prelu.slope").is_some() {
            Activation::Prelu
        } else {
            Activation::Relu
        },
        residual: true,
    };
    config.validate()?;
    Ok(config)
}

/// Saves `model` atomically.
pub fn save_weights(model: &ElsrModel, path: &Path) -> Result<()> {
    model.save(path)
}

/// Loads an archive into a model built from `config`.
///
/// Layers that are skipped under `allow_partial` keep the deterministic
/// initialization of seed 0.
pub fn load_weights(path: &Path, config: &ModelConfig, allow_partial: bool) -> Result<(ElsrModel, LoadReport)> {
    let archive = WeightArchive::load(path)?;
    let mut model = ElsrModel::new(config.clone(), 0)?;
    let report = model.load_archive(&archive, allow_partial)?;
    Ok((model, report))
}
