//! Reverse-mode differentiation over the tensor kernels.
//!
//! A [`GradTape`] records every op in execution order together with its
//! output value. [`GradTape::backward`] walks the records in reverse and
//! accumulates gradients into every node that depends on a parameter.

use crate::autograd::loss;
use crate::error::{Error, Result};
use crate::tensor::{self, check_same_shape, Tensor};

/// Handle to a value recorded on a [`GradTape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param,
    Conv { input: Var, weight: Var, bias: Var },
    Prelu { input: Var, slope: Var },
    Relu { input: Var },
    LeakyRelu { input: Var, slope: f32 },
    Add { a: Var, b: Var },
    PixelShuffle { input: Var, r: usize },
    L1 { pred: Var, target: Var },
    Mse { pred: Var, target: Var },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct GradTape {
    nodes: Vec<Node>,
}

/// Gradients produced by one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Takes ownership of a gradient, leaving `None` behind.
    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

impl GradTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    /// Scalar value of a `[1, 1, 1, 1]` node (a loss).
    pub fn scalar(&self, var: Var) -> f32 {
        self.value(var).data()[0]
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Records a value that is never differentiated (inputs, targets).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Records a learnable leaf; it always receives a gradient.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Param, true)
    }

    /// `bias` and per-channel vectors are stored as `[1, C, 1, 1]` tensors.
    pub fn conv2d_3x3(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let out = tensor::conv_forward(self.value(input), self.value(weight), self.value(bias).data())?;
        let ng = self.needs(input) || self.needs(weight) || self.needs(bias);
        Ok(self.push(out, Op::Conv { input, weight, bias }, ng))
    }

    pub fn prelu(&mut self, input: Var, slope: Var) -> Result<Var> {
        let out = tensor::prelu(self.value(input), self.value(slope).data())?;
        let ng = self.needs(input) || self.needs(slope);
        Ok(self.push(out, Op::Prelu { input, slope }, ng))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let out = tensor::relu(self.value(input));
        let ng = self.needs(input);
        self.push(out, Op::Relu { input }, ng)
    }

    pub fn leaky_relu(&mut self, input: Var, slope: f32) -> Var {
        let out = tensor::leaky_relu(self.value(input), slope);
        let ng = self.needs(input);
        self.push(out, Op::LeakyRelu { input, slope }, ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = tensor::add(self.value(a), self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Add { a, b }, ng))
    }

    pub fn pixel_shuffle(&mut self, input: Var, r: usize) -> Result<Var> {
        let out = tensor::pixel_shuffle(self.value(input), r)?;
        let ng = self.needs(input);
        Ok(self.push(out, Op::PixelShuffle { input, r }, ng))
    }

    pub fn l1_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let v = loss::l1_loss(self.value(pred), self.value(target))?;
        let ng = self.needs(pred) || self.needs(target);
        Ok(self.push(Tensor::full([1, 1, 1, 1], v), Op::L1 { pred, target }, ng))
    }

    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let v = loss::mse_loss(self.value(pred), self.value(target))?;
        let ng = self.needs(pred) || self.needs(target);
        Ok(self.push(Tensor::full([1, 1, 1, 1], v), Op::Mse { pred, target }, ng))
    }

    /// Back-propagates from `output`, seeding its gradient with `seed` in
    /// every element.
    ///
    /// Every recorded parameter gets a gradient, zero-filled when the output
    /// does not depend on it.
    pub fn backward(&self, output: Var, seed: f32) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::Tape("backward called before any forward op was recorded".into()));
        }
        if output.0 >= self.nodes.len() {
            return Err(Error::Tape(format!("output var {} is not on this tape", output.0)));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Tensor::full(self.nodes[output.0].value.shape(), seed));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            match node.op {
                Op::Constant | Op::Param => {
                    grads[idx] = Some(g);
                }
                Op::Conv { input, weight, bias } => {
                    let w = self.value(weight);
                    if self.needs(weight) || self.needs(bias) {
                        let (gw, gb) = tensor::conv_backward_params(self.value(input), &g);
                        accumulate(&mut grads, weight, gw);
                        accumulate(&mut grads, bias, Tensor::channel_vector(gb));
                    }
                    if self.needs(input) {
                        accumulate(&mut grads, input, tensor::conv_backward_input(&g, w));
                    }
                }
                Op::Prelu { input, slope } => {
                    let x = self.value(input);
                    let slopes = self.value(slope).data();
                    let [n, c, h, w] = x.shape();
                    let hw = h * w;
                    let mut gx = g.clone();
                    let mut gs = vec![0.0f64; c];
                    for ni in 0..n {
                        for (ci, gsc) in gs.iter_mut().enumerate() {
                            let start = (ni * c + ci) * hw;
                            for k in start..start + hw {
                                let xv = x.data()[k];
                                if xv < 0.0 {
                                    *gsc += (g.data()[k] * xv) as f64;
                                    gx.data_mut()[k] *= slopes[ci];
                                }
                            }
                        }
                    }
                    if self.needs(slope) {
                        let gs = gs.into_iter().map(|v| v as f32).collect();
                        accumulate(&mut grads, slope, Tensor::channel_vector(gs));
                    }
                    if self.needs(input) {
                        accumulate(&mut grads, input, gx);
                    }
                }
                Op::Relu { input } => {
                    let gx = masked(&g, self.value(input), 0.0);
                    accumulate(&mut grads, input, gx);
                }
                Op::LeakyRelu { input, slope } => {
                    let gx = masked(&g, self.value(input), slope);
                    accumulate(&mut grads, input, gx);
                }
                Op::Add { a, b } => {
                    if self.needs(a) {
                        accumulate(&mut grads, a, g.clone());
                    }
                    if self.needs(b) {
                        accumulate(&mut grads, b, g);
                    }
                }
                Op::PixelShuffle { input, r } => {
                    accumulate(&mut grads, input, tensor::pixel_unshuffle(&g, r)?);
                }
                Op::L1 { pred, target } => {
                    let seed = g.data()[0];
                    let gp = loss::l1_grad(self.value(pred), self.value(target), seed);
                    self.loss_backward(&mut grads, pred, target, gp);
                }
                Op::Mse { pred, target } => {
                    let seed = g.data()[0];
                    let gp = loss::mse_grad(self.value(pred), self.value(target), seed);
                    self.loss_backward(&mut grads, pred, target, gp);
                }
            }
        }

        for (idx, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Param) && grads[idx].is_none() {
                grads[idx] = Some(Tensor::zeros(node.value.shape()));
            }
            if !matches!(node.op, Op::Param | Op::Constant) {
                grads[idx] = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn loss_backward(&self, grads: &mut [Option<Tensor>], pred: Var, target: Var, gp: Tensor) {
        if self.needs(target) {
            accumulate(grads, target, gp.map(|v| -v));
        }
        if self.needs(pred) {
            accumulate(grads, pred, gp);
        }
    }
}

fn masked(g: &Tensor, x: &Tensor, negative_scale: f32) -> Tensor {
    let data = g
        .data()
        .iter()
        .zip(x.data())
        .map(|(&gv, &xv)| if xv < 0.0 { gv * negative_scale } else { gv })
        .collect();
    Tensor::new(g.shape(), data).expect("same shape as upstream gradient")
}

fn accumulate(grads: &mut [Option<Tensor>], var: Var, g: Tensor) {
    match &mut grads[var.0] {
        Some(existing) => {
            debug_assert!(check_same_shape("accumulate", existing, &g).is_ok());
            for (a, b) in existing.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(g),
    }
}
