//! Frame-by-frame PSNR evaluation over directory trees of PNGs.
//!
//! Frames are matched by their path relative to each root, so both flat
//! directories and REDS-style `<sequence>/<frame>.png` trees work.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::buffer::{from_tensor, read_png, to_tensor, ImageBuffer};
use crate::imaging::metrics::{format_db, psnr};
use crate::imaging::resize::bicubic_upscale;
use crate::model::ElsrModel;

#[derive(Clone, Debug, PartialEq)]
pub struct FrameScore {
    pub frame: String,
    pub psnr_db: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub frames: Vec<FrameScore>,
    pub mean_db: f64,
}

impl EvalReport {
    pub fn from_frames(frames: Vec<FrameScore>) -> Self {
        let mean_db = if frames.is_empty() {
            f64::NAN
        } else {
            frames.iter().map(|f| f.psnr_db).sum::<f64>() / frames.len() as f64
        };
        Self { frames, mean_db }
    }

    /// `frame,psnr_db` rows followed by a `mean` row; infinity as `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,psnr_db\n");
        for f in &self.frames {
            let _ = writeln!(out, "{},{}", f.frame, format_db(f.psnr_db));
        }
        let _ = writeln!(out, "mean,{}", format_db(self.mean_db));
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parses a report written by [`to_csv`](Self::to_csv); the mean row is
    /// recomputed, not trusted.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut frames = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            let (frame, value) = line.split_once(',').ok_or_else(|| Error::Config {
                line: i + 1,
                msg: format!("malformed row `{line}`"),
            })?;
            if frame == "mean" {
                continue;
            }
            let psnr_db = if value == "inf" {
                f64::INFINITY
            } else {
                value.parse().map_err(|_| Error::Config {
                    line: i + 1,
                    msg: format!("bad PSNR `{value}`"),
                })?
            };
            frames.push(FrameScore {
                frame: frame.to_string(),
                psnr_db,
            });
        }
        Ok(Self::from_frames(frames))
    }
}

/// Relative paths of all `.png` files under `root`, sorted.
pub fn list_frames(root: &Path) -> Result<Vec<String>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
                let rel = path.strip_prefix(root).expect("walked from root");
                out.push(rel.to_string_lossy().replace('\\', "/"));
            }
        }
        Ok(())
    }
    if !root.is_dir() {
        return Err(Error::Dataset(format!("{} is not a directory", root.display())));
    }
    let mut out = Vec::new();
    walk(root, root, &mut out)?;
    out.sort();
    Ok(out)
}

/// Frame names present in both trees; any one-sided frame is an error.
pub fn match_frames(a_dir: &Path, b_dir: &Path) -> Result<Vec<String>> {
    let a: BTreeSet<String> = list_frames(a_dir)?.into_iter().collect();
    let b: BTreeSet<String> = list_frames(b_dir)?.into_iter().collect();
    let only_a: Vec<&String> = a.difference(&b).collect();
    let only_b: Vec<&String> = b.difference(&a).collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        return Err(Error::Dataset(format!(
            "unmatched frames: only in {}: {:?}; only in {}: {:?}",
            a_dir.display(),
            only_a,
            b_dir.display(),
            only_b
        )));
    }
    if a.is_empty() {
        return Err(Error::Dataset(format!("no PNG frames under {}", a_dir.display())));
    }
    Ok(a.into_iter().collect())
}

/// Scores `produce(input_frame)` against the reference for every matched
/// frame. Frames run in parallel; results keep frame order.
pub fn evaluate_with<F>(input_dir: &Path, ref_dir: &Path, produce: F) -> Result<EvalReport>
where
    F: Fn(&ImageBuffer) -> Result<ImageBuffer> + Sync,
{
    let names = match_frames(input_dir, ref_dir)?;
    let frames = names
        .par_iter()
        .map(|name| {
            let input = read_png(&input_dir.join(name))?;
            let reference = read_png(&ref_dir.join(name))?;
            let output = produce(&input)?;
            Ok(FrameScore {
                frame: name.clone(),
                psnr_db: psnr(&output, &reference)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_frames(frames))
}

/// Runs the model on every LR frame and scores the 8-bit output.
pub fn eval_sequence(model: &ElsrModel, lr_dir: &Path, hr_dir: &Path) -> Result<EvalReport> {
    evaluate_with(lr_dir, hr_dir, |lr| super_resolve(model, lr))
}

/// Scores already-produced frames against references.
pub fn score_dirs(pred_dir: &Path, ref_dir: &Path) -> Result<EvalReport> {
    evaluate_with(pred_dir, ref_dir, |img| Ok(img.clone()))
}

/// Scores bicubic upscaling of the LR frames, the usual baseline.
pub fn eval_bicubic(lr_dir: &Path, hr_dir: &Path, scale: usize) -> Result<EvalReport> {
    evaluate_with(lr_dir, hr_dir, |lr| bicubic_upscale(lr, scale))
}

pub fn super_resolve(model: &ElsrModel, lr: &ImageBuffer) -> Result<ImageBuffer> {
    from_tensor(&model.forward(&to_tensor(lr))?)
}
