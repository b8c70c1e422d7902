//! Bicubic resampling with MATLAB `imresize` semantics.
//!
//! Cubic convolution kernel with `a = -0.5`. When shrinking, the kernel is
//! stretched by `1 / scale` (antialiasing). Out-of-range taps mirror the
//! image with the edge pixel repeated (`1..n, n..1`), weights are normalized
//! to sum to one, and the two separable passes run in f64 with a single
//! rounding to u8 at the end.

use crate::error::{invalid, Result};
use crate::imaging::buffer::ImageBuffer;

/// Cubic convolution kernel, `a = -0.5`.
pub fn cubic(x: f64) -> f64 {
    let ax = x.abs();
    let ax2 = ax * ax;
    let ax3 = ax2 * ax;
    if ax <= 1.0 {
        1.5 * ax3 - 2.5 * ax2 + 1.0
    } else if ax <= 2.0 {
        -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0
    } else {
        0.0
    }
}

/// Taps of one output sample along an axis.
#[derive(Clone, Debug)]
struct Contribution {
    indices: Vec<usize>,
    weights: Vec<f64>,
}

/// Maps a possibly out-of-range 0-based index onto `0..len` by symmetric
/// mirroring with the edge sample repeated.
fn mirror(i: i64, len: usize) -> usize {
    let period = 2 * len as i64;
    let m = i.rem_euclid(period) as usize;
    if m < len {
        m
    } else {
        period as usize - 1 - m
    }
}

fn contributions(in_len: usize, out_len: usize) -> Vec<Contribution> {
    let scale = out_len as f64 / in_len as f64;
    let (kernel_scale, width) = if scale < 1.0 { (scale, 4.0 / scale) } else { (1.0, 4.0) };
    let taps = width.ceil() as i64 + 2;
    (1..=out_len)
        .map(|x| {
            // Position of output sample `x` in 1-based input coordinates.
            let u = x as f64 / scale + 0.5 * (1.0 - 1.0 / scale);
            let left = (u - width / 2.0).floor() as i64;
            let mut indices = Vec::with_capacity(taps as usize);
            let mut weights = Vec::with_capacity(taps as usize);
            for k in 0..taps {
                let idx = left + k;
                let w = kernel_scale * cubic(kernel_scale * (u - idx as f64));
                if w != 0.0 {
                    indices.push(mirror(idx - 1, in_len));
                    weights.push(w);
                }
            }
            let sum: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= sum;
            }
            debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            Contribution { indices, weights }
        })
        .collect()
}

/// Resizes to `out_w x out_h`.
pub fn bicubic_resize(image: &ImageBuffer, out_w: usize, out_h: usize) -> Result<ImageBuffer> {
    if out_w == 0 || out_h == 0 {
        return Err(invalid("bicubic_resize", format!("output size {out_w}x{out_h} is empty")));
    }
    let (in_w, in_h) = (image.width(), image.height());
    if in_w == 0 || in_h == 0 {
        return Err(invalid("bicubic_resize", "input image is empty"));
    }
    let mut plane: Vec<f64> = image.data().iter().map(|&v| v as f64).collect();
    let (mut w, mut h) = (in_w, in_h);

    // Smaller scale first; rows first on ties.
    let rows_first = (out_h as f64 / in_h as f64) <= (out_w as f64 / in_w as f64);
    let passes: [bool; 2] = if rows_first { [true, false] } else { [false, true] };
    for vertical in passes {
        if vertical {
            let contrib = contributions(h, out_h);
            let mut next = vec![0.0f64; w * out_h * 3];
            for (oy, c) in contrib.iter().enumerate() {
                for (&iy, &wt) in c.indices.iter().zip(&c.weights) {
                    let src = &plane[iy * w * 3..(iy + 1) * w * 3];
                    let dst = &mut next[oy * w * 3..(oy + 1) * w * 3];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += wt * s;
                    }
                }
            }
            plane = next;
            h = out_h;
        } else {
            let contrib = contributions(w, out_w);
            let mut next = vec![0.0f64; out_w * h * 3];
            for y in 0..h {
                let row = &plane[y * w * 3..(y + 1) * w * 3];
                for (ox, c) in contrib.iter().enumerate() {
                    let mut acc = [0.0f64; 3];
                    for (&ix, &wt) in c.indices.iter().zip(&c.weights) {
                        for ch in 0..3 {
                            acc[ch] += wt * row[ix * 3 + ch];
                        }
                    }
                    next[(y * out_w + ox) * 3..(y * out_w + ox) * 3 + 3].copy_from_slice(&acc);
                }
            }
            plane = next;
            w = out_w;
        }
    }
    let data = plane.into_iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    ImageBuffer::new(out_w, out_h, data)
}

/// Bicubic upscaling by an integer factor.
pub fn bicubic_upscale(image: &ImageBuffer, scale: usize) -> Result<ImageBuffer> {
    bicubic_resize(image, image.width() * scale, image.height() * scale)
}

/// Bicubic downscaling by an integer factor; dimensions must divide evenly.
pub fn bicubic_downscale(image: &ImageBuffer, scale: usize) -> Result<ImageBuffer> {
    if scale == 0 || image.width() % scale != 0 || image.height() % scale != 0 {
        return Err(invalid(
            "bicubic_downscale",
            format!("{}x{} is not divisible by {scale}", image.width(), image.height()),
        ));
    }
    bicubic_resize(image, image.width() / scale, image.height() / scale)
}
