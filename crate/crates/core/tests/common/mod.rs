//! Independent f64 reference implementations shared by the integration
//! tests. Nothing here calls into the crate's kernels.

#![allow(dead_code)]

use elsr::model::{Activation, ModelConfig};
use elsr::ElsrModel;

/// Dense NCHW array in f64.
#[derive(Clone, Debug)]
pub struct Nd {
    pub shape: [usize; 4],
    pub data: Vec<f64>,
}

impl Nd {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_tensor(t: &elsr::Tensor) -> Self {
        Self {
            shape: t.shape(),
            data: t.data().iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn idx(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        let [_, cc, h, w] = self.shape;
        ((n * cc + c) * h + y) * w + x
    }

    pub fn get(&self, n: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.idx(n, c, y, x)]
    }
}

/// 3x3 convolution, stride 1, zero padding 1, as four nested loops over
/// output positions plus the kernel window.
pub fn conv3x3(x: &Nd, w: &[f64], b: &[f64], cout: usize) -> Nd {
    let [n, cin, h, wd] = x.shape;
    let mut out = Nd::zeros([n, cout, h, wd]);
    for ni in 0..n {
        for co in 0..cout {
            for y in 0..h {
                for xx in 0..wd {
                    let mut acc = b[co];
                    for ci in 0..cin {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let (sy, sx) = (y as i64 + ky as i64 - 1, xx as i64 + kx as i64 - 1);
                                if sy < 0 || sx < 0 || sy >= h as i64 || sx >= wd as i64 {
                                    continue;
                                }
                                acc += w[((co * cin + ci) * 3 + ky) * 3 + kx] * x.get(ni, ci, sy as usize, sx as usize);
                            }
                        }
                    }
                    let i = out.idx(ni, co, y, xx);
                    out.data[i] = acc;
                }
            }
        }
    }
    out
}

/// `out[n, c, y*r+i, x*r+j] = in[n, c*r*r + i*r + j, y, x]`.
pub fn pixel_shuffle(x: &Nd, r: usize) -> Nd {
    let [n, c, h, w] = x.shape;
    let co = c / (r * r);
    let mut out = Nd::zeros([n, co, h * r, w * r]);
    for ni in 0..n {
        for ci in 0..co {
            for y in 0..h * r {
                for xx in 0..w * r {
                    let src = ci * r * r + (y % r) * r + xx % r;
                    let i = out.idx(ni, ci, y, xx);
                    out.data[i] = x.get(ni, src, y / r, xx / r);
                }
            }
        }
    }
    out
}

/// Model parameters in archive order, widened to f64.
pub fn params_f64(model: &ElsrModel) -> Vec<Vec<f64>> {
    model.to_archive().entries.iter().map(|e| e.data.iter().map(|&v| v as f64).collect()).collect()
}

/// Forward pass of the ELSR graph in f64. Also returns every PReLU input so
/// callers can stay clear of the kink.
pub fn forward(cfg: &ModelConfig, params: &[Vec<f64>], input: &Nd) -> (Nd, Vec<f64>) {
    assert_eq!(cfg.activation, Activation::Prelu);
    let chans = cfg.conv_channels();
    let mut p = 0;
    let mut next = || {
        p += 1;
        p - 1
    };
    let (w1, b1, slope) = (next(), next(), next());
    let head = conv3x3(input, &params[w1], &params[b1], chans[0].1);
    let mut h = head.clone();
    let plane = head.shape[2] * head.shape[3];
    for (i, v) in h.data.iter_mut().enumerate() {
        let c = (i / plane) % head.shape[1];
        if *v < 0.0 {
            *v *= params[slope][c];
        }
    }
    for &(_, cout) in &chans[1..chans.len() - 1] {
        let (w, b) = (next(), next());
        h = conv3x3(&h, &params[w], &params[b], cout);
    }
    if cfg.residual {
        for (a, b) in h.data.iter_mut().zip(&head.data) {
            *a += b;
        }
    }
    let (w, b) = (next(), next());
    let tail = conv3x3(&h, &params[w], &params[b], chans.last().unwrap().1);
    (pixel_shuffle(&tail, cfg.scale), head.data)
}

pub fn mse(a: &Nd, b: &Nd) -> f64 {
    a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.data.len() as f64
}

pub fn l1(a: &Nd, b: &Nd) -> f64 {
    a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.data.len() as f64
}
