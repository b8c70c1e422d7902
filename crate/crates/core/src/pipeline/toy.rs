//! Synthetic video sequences in the REDS layout.
//!
//! Each sequence is a smooth two-colour gradient with a handful of shapes
//! (disks, rings, boxes, striped patches) drifting across the frame.
//! Pixels are 4×4 supersampled, so edges are anti-aliased and survive
//! bicubic downscaling the way natural edges do.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::imaging::{write_png, ImageBuffer};
use crate::pipeline::commands::{cmd_prepare_data, PrepareReport};
use crate::pipeline::layout::{frame_name, sequence_name, DatasetLayout, Split};

#[derive(Clone, Debug, PartialEq)]
pub struct ToyConfig {
    pub train_sequences: usize,
    pub val_sequences: usize,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    /// LR scales generated next to the HR frames.
    pub scales: Vec<usize>,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            train_sequences: 5,
            val_sequences: 2,
            frames: 4,
            width: 128,
            height: 128,
            seed: 0,
            scales: vec![2, 4],
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Kind {
    Disk,
    Ring,
    Box,
    Stripes { period: f32, angle: f32 },
}

#[derive(Clone, Debug)]
struct Shape {
    kind: Kind,
    cx: f32,
    cy: f32,
    radius: f32,
    vx: f32,
    vy: f32,
    color: [f32; 3],
}

impl Shape {
    /// Colour at `(x, y)` if the point is inside the shape.
    fn sample(&self, x: f32, y: f32) -> Option<[f32; 3]> {
        let (dx, dy) = (x - self.cx, y - self.cy);
        match self.kind {
            Kind::Disk => (dx * dx + dy * dy <= self.radius * self.radius).then_some(self.color),
            Kind::Ring => {
                let d = (dx * dx + dy * dy).sqrt();
                (d <= self.radius && d >= self.radius * 0.6).then_some(self.color)
            }
            Kind::Box => (dx.abs() <= self.radius && dy.abs() <= self.radius * 0.7).then_some(self.color),
            Kind::Stripes { period, angle } => {
                if dx.abs() > self.radius || dy.abs() > self.radius {
                    return None;
                }
                let t = dx * angle.cos() + dy * angle.sin();
                let on = (t / period).rem_euclid(1.0) < 0.5;
                Some(if on { self.color } else { self.color.map(|c| 1.0 - c) })
            }
        }
    }

    fn at_frame(&self, frame: usize) -> Shape {
        Shape {
            cx: self.cx + self.vx * frame as f32,
            cy: self.cy + self.vy * frame as f32,
            ..self.clone()
        }
    }
}

struct Scene {
    top: [f32; 3],
    bottom: [f32; 3],
    shapes: Vec<Shape>,
}

fn scene(seed: u64, width: usize, height: usize) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let color = |rng: &mut ChaCha8Rng| [rng.gen::<f32>(), rng.gen::<f32>(), rng.gen::<f32>()];
    let top = color(&mut rng);
    let bottom = color(&mut rng);
    let size = width.min(height) as f32;
    let count = rng.gen_range(5..=8);
    let shapes = (0..count)
        .map(|_| {
            let kind = match rng.gen_range(0..4) {
                0 => Kind::Disk,
                1 => Kind::Ring,
                2 => Kind::Box,
                _ => Kind::Stripes {
                    period: rng.gen_range(12.0..24.0),
                    angle: rng.gen_range(0.0..std::f32::consts::PI),
                },
            };
            Shape {
                kind,
                cx: rng.gen_range(0.0..width as f32),
                cy: rng.gen_range(0.0..height as f32),
                radius: rng.gen_range(0.08..0.25) * size,
                vx: rng.gen_range(-3.0..3.0),
                vy: rng.gen_range(-3.0..3.0),
                color: color(&mut rng),
            }
        })
        .collect();
    Scene { top, bottom, shapes }
}

/// Frame `frame` of the toy sequence identified by `seed`.
pub fn toy_frame(seed: u64, frame: usize, width: usize, height: usize) -> ImageBuffer {
    const SS: usize = 4;
    let sc = scene(seed, width, height);
    let shapes: Vec<Shape> = sc.shapes.iter().map(|s| s.at_frame(frame)).collect();
    ImageBuffer::from_fn(width, height, |px, py| {
        let mut acc = [0.0f32; 3];
        for sy in 0..SS {
            for sx in 0..SS {
                let x = px as f32 + (sx as f32 + 0.5) / SS as f32;
                let y = py as f32 + (sy as f32 + 0.5) / SS as f32;
                let t = y / height as f32;
                let mut c = [0.0; 3];
                for ch in 0..3 {
                    c[ch] = sc.top[ch] * (1.0 - t) + sc.bottom[ch] * t;
                }
                // Later shapes are drawn on top.
                for s in &shapes {
                    if let Some(v) = s.sample(x, y) {
                        c = v;
                    }
                }
                for ch in 0..3 {
                    acc[ch] += c[ch];
                }
            }
        }
        acc.map(|v| (v / (SS * SS) as f32 * 255.0).round().clamp(0.0, 255.0) as u8)
    })
}

#[derive(Clone, Debug, Default)]
pub struct ToyReport {
    pub hr_frames: usize,
    pub lr: Vec<(Split, usize, PrepareReport)>,
}

/// Writes the HR frames of every split and derives the LR trees for each
/// configured scale. Sequence `k` of a split is seeded by
/// `(seed, split, k)`, so splits never share content.
pub fn generate_toy_dataset(root: &Path, cfg: &ToyConfig, log: &mut dyn std::io::Write) -> Result<ToyReport> {
    for &s in &cfg.scales {
        if s == 0 || cfg.width % s != 0 || cfg.height % s != 0 {
            return Err(invalid(
                "toy dataset",
                format!("{}x{} is not divisible by scale {s}", cfg.width, cfg.height),
            ));
        }
    }
    let mut report = ToyReport::default();
    for (split, count, tag) in [(Split::Train, cfg.train_sequences, 1u64), (Split::Val, cfg.val_sequences, 2)] {
        if count == 0 {
            continue;
        }
        let layout = DatasetLayout::new(root, split);
        for k in 0..count {
            let seed = cfg
                .seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(tag << 32)
                .wrapping_add(k as u64);
            for f in 0..cfg.frames {
                let img = toy_frame(seed, f, cfg.width, cfg.height);
                let path = layout.hr_dir().join(sequence_name(k)).join(frame_name(f));
                write_png(&img, &path)?;
                report.hr_frames += 1;
            }
        }
        for &s in &cfg.scales {
            let r = cmd_prepare_data(&layout.hr_dir(), &layout.lr_dir(s), s, log)?;
            report.lr.push((split, s, r));
        }
    }
    Ok(report)
}
