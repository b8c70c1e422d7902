//! Patch sampling and the per-stage optimization loop.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autograd::adam::{adam_step, AdamState, ParamSlot};
use crate::autograd::loss::LossKind;
use crate::autograd::schedule::TrainStageConfig;
use crate::autograd::tape::GradTape;
use crate::error::{invalid, Error, Result};
use crate::imaging::{batch_to_tensor, read_png, ImageBuffer};
use crate::model::ElsrModel;
use crate::tensor::Tensor;

/// Aligned LR/HR crops of one training sample, as `[1, 3, h, w]` tensors in
/// `[0, 1]`.
pub fn sample_patch<R: Rng>(
    hr: &ImageBuffer,
    lr: &ImageBuffer,
    patch_size_hr: usize,
    scale: usize,
    rng: &mut R,
) -> Result<(Tensor, Tensor)> {
    let (lr_crop, hr_crop) = sample_crops(hr, lr, patch_size_hr, scale, false, rng)?;
    Ok((crate::imaging::to_tensor(&lr_crop), crate::imaging::to_tensor(&hr_crop)))
}

fn check_pair(hr: &ImageBuffer, lr: &ImageBuffer, scale: usize) -> Result<()> {
    if hr.width() != lr.width() * scale || hr.height() != lr.height() * scale {
        return Err(invalid(
            "sample_patch",
            format!(
                "HR {}x{} is not x{scale} of LR {}x{}",
                hr.width(),
                hr.height(),
                lr.width(),
                lr.height()
            ),
        ));
    }
    Ok(())
}

fn sample_crops<R: Rng>(
    hr: &ImageBuffer,
    lr: &ImageBuffer,
    patch_size_hr: usize,
    scale: usize,
    hflip: bool,
    rng: &mut R,
) -> Result<(ImageBuffer, ImageBuffer)> {
    if scale == 0 || patch_size_hr == 0 || patch_size_hr % scale != 0 {
        return Err(invalid(
            "sample_patch",
            format!("patch size {patch_size_hr} is not a positive multiple of scale {scale}"),
        ));
    }
    check_pair(hr, lr, scale)?;
    let p = patch_size_hr / scale;
    if p > lr.width() || p > lr.height() {
        return Err(invalid(
            "sample_patch",
            format!(
                "HR patch {patch_size_hr} larger than {}x{} frame",
                hr.width(),
                hr.height()
            ),
        ));
    }
    let y = rng.gen_range(0..=lr.height() - p);
    let x = rng.gen_range(0..=lr.width() - p);
    let lr_crop = lr.crop(x, y, p, p)?;
    let hr_crop = hr.crop(x * scale, y * scale, patch_size_hr, patch_size_hr)?;
    if hflip && rng.gen_bool(0.5) {
        Ok((mirror_x(&lr_crop), mirror_x(&hr_crop)))
    } else {
        Ok((lr_crop, hr_crop))
    }
}

fn mirror_x(img: &ImageBuffer) -> ImageBuffer {
    let w = img.width();
    ImageBuffer::from_fn(w, img.height(), |x, y| img.pixel(w - 1 - x, y))
}

enum FrameSource {
    Loaded { lr: ImageBuffer, hr: ImageBuffer },
    OnDisk { lr: PathBuf, hr: PathBuf },
}

/// Pool of LR/HR frame pairs that training batches are cropped from.
pub struct PatchSampler {
    frames: Vec<FrameSource>,
    scale: usize,
}

impl PatchSampler {
    pub fn from_pairs(pairs: Vec<(ImageBuffer, ImageBuffer)>, scale: usize) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Dataset("no training frames".into()));
        }
        let frames = pairs
            .into_iter()
            .map(|(lr, hr)| {
                check_pair(&hr, &lr, scale)?;
                Ok(FrameSource::Loaded { lr, hr })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { frames, scale })
    }

    /// Frames are read from disk on every draw; use for datasets that do
    /// not fit in memory.
    pub fn from_paths(pairs: Vec<(PathBuf, PathBuf)>, scale: usize) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Dataset("no training frames".into()));
        }
        let frames = pairs.into_iter().map(|(lr, hr)| FrameSource::OnDisk { lr, hr }).collect();
        Ok(Self { frames, scale })
    }

    pub fn load(pairs: Vec<(PathBuf, PathBuf)>, scale: usize) -> Result<Self> {
        let loaded = pairs
            .iter()
            .map(|(lr, hr)| Ok((read_png(lr)?, read_png(hr)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_pairs(loaded, scale)
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(lr, hr)` batch tensors of shape `[batch, 3, p/scale, p/scale]` and
    /// `[batch, 3, p, p]`.
    pub fn sample_batch<R: Rng>(
        &self,
        batch: usize,
        patch_size_hr: usize,
        hflip: bool,
        rng: &mut R,
    ) -> Result<(Tensor, Tensor)> {
        let mut lrs = Vec::with_capacity(batch);
        let mut hrs = Vec::with_capacity(batch);
        for _ in 0..batch {
            let idx = rng.gen_range(0..self.frames.len());
            let (lr, hr) = match &self.frames[idx] {
                FrameSource::Loaded { lr, hr } => {
                    sample_crops(hr, lr, patch_size_hr, self.scale, hflip, rng)?
                }
                FrameSource::OnDisk { lr, hr } => {
                    let (lr, hr) = (read_png(lr)?, read_png(hr)?);
                    sample_crops(&hr, &lr, patch_size_hr, self.scale, hflip, rng)?
                }
            };
            lrs.push(lr);
            hrs.push(hr);
        }
        let lr_refs: Vec<&ImageBuffer> = lrs.iter().collect();
        let hr_refs: Vec<&ImageBuffer> = hrs.iter().collect();
        Ok((batch_to_tensor(&lr_refs)?, batch_to_tensor(&hr_refs)?))
    }
}

/// Mean loss over one logging window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    /// Iterations completed when the window closed.
    pub iter: usize,
    pub lr: f32,
    pub loss: f32,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageOutcome {
    pub trace: Vec<TracePoint>,
    /// Loss of every iteration.
    pub losses: Vec<f32>,
}

impl StageOutcome {
    /// Mean of the last `n` iteration losses.
    pub fn tail_mean(&self, n: usize) -> f32 {
        let n = n.min(self.losses.len());
        if n == 0 {
            return f32::NAN;
        }
        let tail = &self.losses[self.losses.len() - n..];
        (tail.iter().map(|&v| v as f64).sum::<f64>() / n as f64) as f32
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,lr,loss\n");
        for p in &self.trace {
            let _ = writeln!(out, "{},{:e},{}", p.iter, p.lr, p.loss);
        }
        out
    }

    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        crate::model::archive::write_atomic(path, self.trace_csv().as_bytes())
    }
}

/// One optimizer step on a batch; returns the batch loss.
pub fn train_step(
    model: &mut ElsrModel,
    state: &mut AdamState,
    loss: LossKind,
    lr_batch: &Tensor,
    hr_batch: &Tensor,
    lr: f32,
) -> Result<f32> {
    let mut tape = GradTape::new();
    let vars = model.record_params(&mut tape);
    let x = tape.constant(lr_batch.clone());
    let target = tape.constant(hr_batch.clone());
    let pred = model.forward_tape(&mut tape, &vars, x)?;
    let l = match loss {
        LossKind::L1 => tape.l1_loss(pred, target)?,
        LossKind::Mse => tape.mse_loss(pred, target)?,
    };
    let value = tape.scalar(l);
    if !value.is_finite() {
        return Err(Error::NonFiniteLoss {
            iter: state.t as usize,
            loss: value,
        });
    }
    let grads = tape.backward(l, 1.0)?;
    let grads = model.collect_grads(&grads, &vars)?;
    let names = model.param_names();
    let mut slots: Vec<ParamSlot<'_>> = model
        .params_mut()
        .into_iter()
        .zip(&grads)
        .zip(&names)
        .map(|((value, grad), name)| ParamSlot { name, value, grad })
        .collect();
    adam_step(&mut slots, state, lr)?;
    Ok(value)
}

/// Runs every iteration of `stage` on `model` with a fresh Adam state.
///
/// Batches are drawn from a ChaCha8 stream seeded with `seed`; identical
/// inputs give bit-identical weights and losses.
pub fn run_stage(
    model: &mut ElsrModel,
    stage: &TrainStageConfig,
    data: &PatchSampler,
    seed: u64,
    log_every: usize,
) -> Result<StageOutcome> {
    run_stage_with(model, stage, data, seed, log_every, |_| {})
}

/// [`run_stage`] with a callback invoked on every closed logging window.
pub fn run_stage_with(
    model: &mut ElsrModel,
    stage: &TrainStageConfig,
    data: &PatchSampler,
    seed: u64,
    log_every: usize,
    mut on_point: impl FnMut(&TracePoint),
) -> Result<StageOutcome> {
    stage.validate()?;
    if model.scale() != stage.scale || data.scale() != stage.scale {
        return Err(invalid(
            "run_stage",
            format!(
                "scale mismatch: model x{}, stage x{}, data x{}",
                model.scale(),
                stage.scale,
                data.scale()
            ),
        ));
    }
    let log_every = log_every.max(1);
    let lens: Vec<usize> = model.params_mut().iter().map(|p| p.len()).collect();
    let mut state = AdamState::new(&lens);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcome = StageOutcome::default();
    let mut window = 0.0f64;
    let mut window_len = 0usize;

    for iter in 0..stage.total_iters {
        let lr = stage.lr_at(iter)?;
        let (x, y) = data.sample_batch(stage.batch_size, stage.patch_size_hr, stage.hflip, &mut rng)?;
        let loss = train_step(model, &mut state, stage.loss, &x, &y, lr).map_err(|e| match e {
            Error::NonFiniteLoss { loss, .. } => Error::NonFiniteLoss { iter, loss },
            other => other,
        })?;
        outcome.losses.push(loss);
        window += loss as f64;
        window_len += 1;
        if (iter + 1) % log_every == 0 || iter + 1 == stage.total_iters {
            let point = TracePoint {
                iter: iter + 1,
                lr,
                loss: (window / window_len as f64) as f32,
            };
            on_point(&point);
            outcome.trace.push(point);
            window = 0.0;
            window_len = 0;
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::schedule::InitFrom;
    use crate::model::ModelConfig;

    fn textured(w: usize, h: usize, seed: usize) -> ImageBuffer {
        ImageBuffer::from_fn(w, h, |x, y| {
            [
                ((x * 13 + y * 7 + seed) % 256) as u8,
                ((x * y + seed * 3) % 256) as u8,
                (((x / 4 + y / 4 + seed) % 2) * 200) as u8,
            ]
        })
    }

    fn stage(scale: usize, iters: usize, patch: usize) -> TrainStageConfig {
        TrainStageConfig {
            id: 1,
            scale,
            loss: LossKind::Mse,
            batch_size: 2,
            patch_size_hr: patch,
            total_iters: iters,
            lr_init: 1e-3,
            lr_milestones: vec![],
            lr_gamma: 0.5,
            init_from: InitFrom::Scratch,
            hflip: false,
        }
    }

    #[test]
    fn full_frame_patch_returns_whole_images() {
        let hr = textured(8, 8, 0);
        let lr = textured(4, 4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (l, h) = sample_patch(&hr, &lr, 8, 2, &mut rng).unwrap();
        assert_eq!(l, crate::imaging::to_tensor(&lr));
        assert_eq!(h, crate::imaging::to_tensor(&hr));
    }

    #[test]
    fn crops_are_aligned() {
        // LR pixel (x, y) encodes its own coordinates; HR pixel encodes the
        // LR pixel that covers it.
        let lr = ImageBuffer::from_fn(10, 7, |x, y| [x as u8, y as u8, 0]);
        let hr = ImageBuffer::from_fn(30, 21, |x, y| [(x / 3) as u8, (y / 3) as u8, 0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (l, h) = sample_crops(&hr, &lr, 9, 3, false, &mut rng).unwrap();
            for y in 0..9 {
                for x in 0..9 {
                    assert_eq!(h.pixel(x, y), l.pixel(x / 3, y / 3));
                }
            }
        }
    }

    #[test]
    fn flipped_crops_stay_aligned() {
        let lr = ImageBuffer::from_fn(10, 7, |x, y| [x as u8, y as u8, 0]);
        let hr = ImageBuffer::from_fn(20, 14, |x, y| [(x / 2) as u8, (y / 2) as u8, 0]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let (l, h) = sample_crops(&hr, &lr, 6, 2, true, &mut rng).unwrap();
            for y in 0..6 {
                for x in 0..6 {
                    assert_eq!(h.pixel(x, y), l.pixel(x / 2, y / 2));
                }
            }
        }
    }

    #[test]
    fn patch_errors() {
        let hr = textured(8, 8, 0);
        let lr = textured(4, 4, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_patch(&hr, &lr, 16, 2, &mut rng).is_err());
        assert!(sample_patch(&hr, &lr, 5, 2, &mut rng).is_err());
        assert!(sample_patch(&hr, &textured(3, 4, 0), 4, 2, &mut rng).is_err());
    }

    #[test]
    fn seeded_batches_repeat() {
        let s = PatchSampler::from_pairs(vec![(textured(16, 16, 1), textured(32, 32, 2))], 2).unwrap();
        let a = s.sample_batch(3, 8, true, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = s.sample_batch(3, 8, true, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0.shape(), [3, 3, 4, 4]);
        assert_eq!(a.1.shape(), [3, 3, 8, 8]);
    }

    #[test]
    fn zero_iterations_leave_model_unchanged() {
        let data = PatchSampler::from_pairs(vec![(textured(8, 8, 0), textured(16, 16, 0))], 2).unwrap();
        let mut m = ElsrModel::new(ModelConfig::new(2, 4), 1).unwrap();
        let before = m.clone();
        let out = run_stage(&mut m, &stage(2, 0, 8), &data, 0, 10).unwrap();
        assert_eq!(m, before);
        assert!(out.trace.is_empty());
    }

    #[test]
    fn scale_mismatch_rejected() {
        let data = PatchSampler::from_pairs(vec![(textured(8, 8, 0), textured(16, 16, 0))], 2).unwrap();
        let mut m = ElsrModel::new(ModelConfig::new(4, 4), 1).unwrap();
        assert!(run_stage(&mut m, &stage(2, 1, 8), &data, 0, 1).is_err());
    }

    #[test]
    fn identical_seeds_identical_traces() {
        let data = PatchSampler::from_pairs(vec![(textured(12, 12, 0), textured(24, 24, 0))], 2).unwrap();
        let run = || {
            let mut m = ElsrModel::new(ModelConfig::new(2, 4), 1).unwrap();
            let out = run_stage(&mut m, &stage(2, 30, 8), &data, 7, 5).unwrap();
            (m.to_archive().to_bytes(), out)
        };
        let (wa, ta) = run();
        let (wb, tb) = run();
        assert_eq!(wa, wb);
        assert_eq!(ta, tb);
        assert_eq!(ta.trace.len(), 6);
        assert!(ta.trace_csv().starts_with("iter,lr,loss\n5,1e-3,"));
    }

    #[test]
    fn non_finite_input_aborts() {
        let mut m = ElsrModel::new(ModelConfig::new(2, 4), 1).unwrap();
        let mut state = AdamState::new(&m.params_mut().iter().map(|p| p.len()).collect::<Vec<_>>());
        let x = Tensor::full([1, 3, 4, 4], f32::NAN);
        let y = Tensor::zeros([1, 3, 8, 8]);
        assert!(matches!(
            train_step(&mut m, &mut state, LossKind::Mse, &x, &y, 1e-3),
            Err(Error::NonFiniteLoss { .. })
        ));
    }
}
