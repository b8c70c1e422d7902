//! Dense NCHW tensors and the forward kernels the network is built from.
//!
//! Every kernel is pure: inputs are borrowed, outputs are freshly allocated.
//! The convolution kernels are split over independent output planes, so
//! running them on the rayon pool never changes the per-element summation
//! order and results are identical with or without threads.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

/// Planes below this many multiply-adds are not worth a rayon task.
const PAR_THRESHOLD: usize = 1 << 15;

/// Dense 4-D f32 tensor in row-major N, C, H, W order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: [usize; 4],
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: [usize; 4], data: Vec<f32>) -> Result<Self> {
        let expected = shape.iter().product::<usize>();
        if data.len() != expected {
            return Err(Error::ShapeMismatch {
                op: "Tensor::new",
                dim: "data length",
                expected,
                got: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: [usize; 4], value: f32) -> Self {
        Self {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    /// Builds a tensor by evaluating `f(n, c, y, x)` at every index.
    pub fn from_fn(shape: [usize; 4], mut f: impl FnMut(usize, usize, usize, usize) -> f32) -> Self {
        let [n, c, h, w] = shape;
        let mut data = Vec::with_capacity(n * c * h * w);
        for ni in 0..n {
            for ci in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        data.push(f(ni, ci, y, x));
                    }
                }
            }
        }
        Self { shape, data }
    }

    /// A `[1, len, 1, 1]` tensor holding a per-channel vector.
    pub fn channel_vector(values: Vec<f32>) -> Self {
        Self {
            shape: [1, values.len(), 1, 1],
            data: values,
        }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn height(&self) -> usize {
        self.shape[2]
    }

    pub fn width(&self) -> usize {
        self.shape[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        let [_, cs, hs, ws] = self.shape;
        ((n * cs + c) * hs + y) * ws + x
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.index(n, c, y, x)]
    }

    /// One `H x W` plane.
    pub fn plane(&self, n: usize, c: usize) -> &[f32] {
        let hw = self.shape[2] * self.shape[3];
        let start = (n * self.shape[1] + c) * hw;
        &self.data[start..start + hw]
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f32 {
        assert_eq!(self.shape, other.shape, "max_abs_diff: shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Weights and bias of one 3x3 convolution.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams {
    pub weight: Tensor,
    pub bias: Vec<f32>,
}

impl ConvParams {
    pub fn new(weight: Tensor, bias: Vec<f32>) -> Result<Self> {
        let [cout, _, kh, kw] = weight.shape();
        if kh != 3 {
            return Err(shape_err("ConvParams::new", "kernel height", 3, kh));
        }
        if kw != 3 {
            return Err(shape_err("ConvParams::new", "kernel width", 3, kw));
        }
        if bias.len() != cout {
            return Err(shape_err("ConvParams::new", "bias length", cout, bias.len()));
        }
        Ok(Self { weight, bias })
    }

    pub fn zeros(cout: usize, cin: usize) -> Self {
        Self {
            weight: Tensor::zeros([cout, cin, 3, 3]),
            bias: vec![0.0; cout],
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }
}

fn shape_err(op: &'static str, dim: &'static str, expected: usize, got: usize) -> Error {
    Error::ShapeMismatch {
        op,
        dim,
        expected,
        got,
    }
}

/// Row range `y` such that `y + d` stays inside `0..len`, for tap offset `d`.
#[inline]
fn valid_range(len: usize, d: isize) -> std::ops::Range<usize> {
    let lo = (-d).max(0) as usize;
    let hi = (len as isize - d).clamp(0, len as isize) as usize;
    lo..hi.max(lo)
}

fn for_each_plane<F>(out: &mut [f32], plane_len: usize, work: usize, f: F)
where
    F: Fn(usize, &mut [f32]) + Sync + Send,
{
    if plane_len == 0 {
        return;
    }
    if work >= PAR_THRESHOLD {
        out.par_chunks_mut(plane_len)
            .enumerate()
            .for_each(|(i, p)| f(i, p));
    } else {
        out.chunks_mut(plane_len).enumerate().for_each(|(i, p)| f(i, p));
    }
}

/// 3x3 convolution, stride 1, zero padding 1.
pub fn conv2d_3x3(input: &Tensor, params: &ConvParams) -> Result<Tensor> {
    conv_forward(input, &params.weight, &params.bias)
}

pub(crate) fn conv_forward(input: &Tensor, weight: &Tensor, bias: &[f32]) -> Result<Tensor> {
    let [n, cin, h, w] = input.shape();
    let [cout, wcin, kh, kw] = weight.shape();
    if kh != 3 || kw != 3 {
        return Err(shape_err("conv2d_3x3", "kernel size", 3, if kh != 3 { kh } else { kw }));
    }
    if wcin != cin {
        return Err(shape_err("conv2d_3x3", "input channels", wcin, cin));
    }
    if bias.len() != cout {
        return Err(shape_err("conv2d_3x3", "bias length", cout, bias.len()));
    }
    if h == 0 || w == 0 {
        return Err(invalid("conv2d_3x3", "spatial extents must be at least 1"));
    }
    let hw = h * w;
    let mut out = vec![0.0f32; n * cout * hw];
    let wd = weight.data();
    let id = input.data();
    for_each_plane(&mut out, hw, n * cout * cin * hw * 9, |plane_idx, plane| {
        let (ni, co) = (plane_idx / cout, plane_idx % cout);
        plane.fill(bias[co]);
        for ci in 0..cin {
            let src = &id[(ni * cin + ci) * hw..(ni * cin + ci + 1) * hw];
            let taps = &wd[(co * cin + ci) * 9..(co * cin + ci + 1) * 9];
            accumulate_taps(plane, src, taps, h, w, 1);
        }
    });
    Tensor::new([n, cout, h, w], out)
}

/// `dst[y, x] += Σ taps[ky, kx] · src[y + sign·(ky-1), x + sign·(kx-1)]`.
///
/// `sign = 1` is the forward correlation; `sign = -1` scatters back through
/// it (the input-gradient of the forward pass).
#[inline]
fn accumulate_taps(dst: &mut [f32], src: &[f32], taps: &[f32], h: usize, w: usize, sign: isize) {
    for ky in 0..3 {
        let dy = sign * (ky as isize - 1);
        for kx in 0..3 {
            let t = taps[ky * 3 + kx];
            let dx = sign * (kx as isize - 1);
            let xs = valid_range(w, dx);
            for y in valid_range(h, dy) {
                let sy = (y as isize + dy) as usize;
                let d = &mut dst[y * w + xs.start..y * w + xs.end];
                let sx0 = (xs.start as isize + dx) as usize;
                let s = &src[sy * w + sx0..sy * w + sx0 + xs.len()];
                for (dv, sv) in d.iter_mut().zip(s) {
                    *dv += t * sv;
                }
            }
        }
    }
}

/// Gradient of the convolution with respect to its input.
pub(crate) fn conv_backward_input(grad_out: &Tensor, weight: &Tensor) -> Tensor {
    let [n, cout, h, w] = grad_out.shape();
    let cin = weight.shape()[1];
    let hw = h * w;
    let mut out = vec![0.0f32; n * cin * hw];
    let wd = weight.data();
    let gd = grad_out.data();
    for_each_plane(&mut out, hw, n * cout * cin * hw * 9, |plane_idx, plane| {
        let (ni, ci) = (plane_idx / cin, plane_idx % cin);
        for co in 0..cout {
            let src = &gd[(ni * cout + co) * hw..(ni * cout + co + 1) * hw];
            let taps = &wd[(co * cin + ci) * 9..(co * cin + ci + 1) * 9];
            accumulate_taps(plane, src, taps, h, w, -1);
        }
    });
    Tensor {
        shape: [n, cin, h, w],
        data: out,
    }
}

/// Gradients of the convolution with respect to its weight and bias.
pub(crate) fn conv_backward_params(input: &Tensor, grad_out: &Tensor) -> (Tensor, Vec<f32>) {
    let [n, cin, h, w] = input.shape();
    let cout = grad_out.shape()[1];
    let hw = h * w;
    let id = input.data();
    let gd = grad_out.data();
    let per_co = |co: usize| -> (Vec<f32>, f32) {
        let mut gw = vec![0.0f64; cin * 9];
        let mut gb = 0.0f64;
        for ni in 0..n {
            let g = &gd[(ni * cout + co) * hw..(ni * cout + co + 1) * hw];
            gb += g.iter().map(|&v| v as f64).sum::<f64>();
            for ci in 0..cin {
                let src = &id[(ni * cin + ci) * hw..(ni * cin + ci + 1) * hw];
                for ky in 0..3 {
                    let dy = ky as isize - 1;
                    for kx in 0..3 {
                        let dx = kx as isize - 1;
                        let xs = valid_range(w, dx);
                        let mut acc = 0.0f64;
                        for y in valid_range(h, dy) {
                            let sy = (y as isize + dy) as usize;
                            let sx0 = (xs.start as isize + dx) as usize;
                            let gr = &g[y * w + xs.start..y * w + xs.end];
                            let sr = &src[sy * w + sx0..sy * w + sx0 + xs.len()];
                            let row: f32 = gr.iter().zip(sr).map(|(a, b)| a * b).sum();
                            acc += row as f64;
                        }
                        gw[ci * 9 + ky * 3 + kx] += acc;
                    }
                }
            }
        }
        (gw.into_iter().map(|v| v as f32).collect(), gb as f32)
    };
    let results: Vec<(Vec<f32>, f32)> = if n * cout * cin * hw * 9 >= PAR_THRESHOLD {
        (0..cout).into_par_iter().map(per_co).collect()
    } else {
        (0..cout).map(per_co).collect()
    };
    let mut weight = Vec::with_capacity(cout * cin * 9);
    let mut bias = Vec::with_capacity(cout);
    for (gw, gb) in results {
        weight.extend(gw);
        bias.push(gb);
    }
    (
        Tensor {
            shape: [cout, cin, 3, 3],
            data: weight,
        },
        bias,
    )
}

/// Parametric ReLU with one learnable slope per channel.
pub fn prelu(input: &Tensor, slopes: &[f32]) -> Result<Tensor> {
    let [n, c, h, w] = input.shape();
    if slopes.len() != c {
        return Err(shape_err("prelu", "slope count", c, slopes.len()));
    }
    let hw = h * w;
    let mut data = input.data.clone();
    for ni in 0..n {
        for (ci, &s) in slopes.iter().enumerate() {
            let start = (ni * c + ci) * hw;
            for v in &mut data[start..start + hw] {
                if *v < 0.0 {
                    *v *= s;
                }
            }
        }
    }
    Ok(Tensor {
        shape: input.shape,
        data,
    })
}

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|v| if v < 0.0 { 0.0 } else { v })
}

pub fn leaky_relu(input: &Tensor, slope: f32) -> Tensor {
    input.map(|v| if v < 0.0 { v * slope } else { v })
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_same_shape("add", a, b)?;
    Ok(Tensor {
        shape: a.shape,
        data: a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect(),
    })
}

pub(crate) fn check_same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    const DIMS: [&str; 4] = ["batch", "channels", "height", "width"];
    for (i, dim) in DIMS.iter().enumerate() {
        if a.shape[i] != b.shape[i] {
            return Err(shape_err(op, dim, a.shape[i], b.shape[i]));
        }
    }
    Ok(())
}

/// Depth-to-space: `out[n, c, y·r+i, x·r+j] = in[n, c·r² + i·r + j, y, x]`.
pub fn pixel_shuffle(input: &Tensor, r: usize) -> Result<Tensor> {
    let [n, c, h, w] = input.shape();
    if r == 0 {
        return Err(invalid("pixel_shuffle", "upscale factor must be at least 1"));
    }
    let rr = r * r;
    if c % rr != 0 {
        return Err(invalid(
            "pixel_shuffle",
            format!("{c} channels not divisible by r² = {rr}"),
        ));
    }
    let oc = c / rr;
    let (oh, ow) = (h * r, w * r);
    let mut out = vec![0.0f32; input.len()];
    for ni in 0..n {
        for co in 0..oc {
            for i in 0..r {
                for j in 0..r {
                    let src = input.plane(ni, co * rr + i * r + j);
                    let base = (ni * oc + co) * oh * ow;
                    for y in 0..h {
                        let row = base + (y * r + i) * ow + j;
                        for x in 0..w {
                            out[row + x * r] = src[y * w + x];
                        }
                    }
                }
            }
        }
    }
    Tensor::new([n, oc, oh, ow], out)
}

/// Space-to-depth, the exact inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle(input: &Tensor, r: usize) -> Result<Tensor> {
    let [n, c, h, w] = input.shape();
    if r == 0 {
        return Err(invalid("pixel_unshuffle", "downscale factor must be at least 1"));
    }
    if h % r != 0 || w % r != 0 {
        return Err(invalid(
            "pixel_unshuffle",
            format!("spatial extents {h}x{w} not divisible by {r}"),
        ));
    }
    let rr = r * r;
    let (oh, ow) = (h / r, w / r);
    let mut out = vec![0.0f32; input.len()];
    for ni in 0..n {
        for ci in 0..c {
            let src = input.plane(ni, ci);
            for i in 0..r {
                for j in 0..r {
                    let base = ((ni * c * rr) + ci * rr + i * r + j) * oh * ow;
                    for y in 0..oh {
                        for x in 0..ow {
                            out[base + y * ow + x] = src[(y * r + i) * w + x * r + j];
                        }
                    }
                }
            }
        }
    }
    Tensor::new([n, c * rr, oh, ow], out)
}

/// Nearest-neighbour upsampling: `out[n, c, y, x] = in[n, c, y / r, x / r]`.
///
/// # Panics
/// If `r == 0`.
pub fn nearest_upsample(input: &Tensor, r: usize) -> Tensor {
    assert!(r >= 1, "nearest_upsample: r must be at least 1");
    let [n, c, h, w] = input.shape();
    Tensor::from_fn([n, c, h * r, w * r], |ni, ci, y, x| input.at(ni, ci, y / r, x / r))
}
