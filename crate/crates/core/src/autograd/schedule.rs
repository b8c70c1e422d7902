//! Training stage descriptors, their text format, and the step learning-rate
//! schedule.
//!
//! A stage file holds one `[stage.N]` section per stage with `key = value`
//! lines:
//!
//! ```text
//! # comments start with '#'
//! [stage.1]
//! scale = 2
//! loss = L1
//! batch_size = 64
//! patch_size_hr = 256
//! total_iters = 500000
//! lr_init = 5e-4
//! lr_milestones = 200000, 400000
//! lr_gamma = 0.5
//! init_from = scratch
//! ```
//!
//! `id` (roman or arabic, must agree with the section), `scale` (default 4)
//! and `hflip` (default false) are optional.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::autograd::loss::LossKind;
use crate::error::{invalid, Error, Result};

/// Where a stage's starting weights come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitFrom {
    Scratch,
    PreviousStage,
    /// The previous stage's ×2 weights, tiled into a ×4 tail.
    X2Adapted,
}

impl FromStr for InitFrom {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "scratch" => Ok(InitFrom::Scratch),
            "previous-stage" => Ok(InitFrom::PreviousStage),
            "x2-adapted" => Ok(InitFrom::X2Adapted),
            other => Err(format!(
                "unknown init_from `{other}` (expected scratch, previous-stage or x2-adapted)"
            )),
        }
    }
}

impl fmt::Display for InitFrom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitFrom::Scratch => "scratch",
            InitFrom::PreviousStage => "previous-stage",
            InitFrom::X2Adapted => "x2-adapted",
        })
    }
}

const ROMAN: [&str; 6] = ["I", "II", "III", "IV", "V", "VI"];

pub fn roman(id: u32) -> String {
    ROMAN
        .get((id as usize).wrapping_sub(1))
        .map_or_else(|| id.to_string(), |r| r.to_string())
}

fn parse_stage_id(s: &str) -> Option<u32> {
    if let Ok(n) = s.parse::<u32>() {
        return Some(n);
    }
    ROMAN
        .iter()
        .position(|r| r.eq_ignore_ascii_case(s))
        .map(|i| i as u32 + 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainStageConfig {
    pub id: u32,
    pub scale: usize,
    pub loss: LossKind,
    pub batch_size: usize,
    pub patch_size_hr: usize,
    pub total_iters: usize,
    pub lr_init: f32,
    pub lr_milestones: Vec<usize>,
    pub lr_gamma: f32,
    pub init_from: InitFrom,
    /// Random horizontal flips of sampled patches. Off unless requested.
    pub hflip: bool,
}

impl TrainStageConfig {
    pub fn validate(&self) -> Result<()> {
        let op = "stage config";
        if self.batch_size == 0 {
            return Err(invalid(op, "batch_size must be positive"));
        }
        if self.scale == 0 {
            return Err(invalid(op, "scale must be positive"));
        }
        if self.patch_size_hr == 0 || self.patch_size_hr % self.scale != 0 {
            return Err(invalid(
                op,
                format!(
                    "patch_size_hr {} must be a positive multiple of scale {}",
                    self.patch_size_hr, self.scale
                ),
            ));
        }
        if !(self.lr_init.is_finite() && self.lr_init >= 0.0) {
            return Err(invalid(op, "lr_init must be finite and non-negative"));
        }
        if !(self.lr_gamma > 0.0 && self.lr_gamma <= 1.0) {
            return Err(invalid(op, format!("lr_gamma {} outside (0, 1]", self.lr_gamma)));
        }
        if self.lr_milestones.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(op, "lr_milestones must be strictly increasing"));
        }
        if let Some(&last) = self.lr_milestones.last() {
            if last >= self.total_iters {
                return Err(invalid(
                    op,
                    format!("milestone {last} not below total_iters {}", self.total_iters),
                ));
            }
        }
        Ok(())
    }

    /// `lr_init · lr_gamma^k` where `k` counts milestones `<= iter`.
    pub fn lr_at(&self, iter: usize) -> Result<f32> {
        if iter >= self.total_iters {
            return Err(invalid(
                "lr_at",
                format!("iteration {iter} outside 0..{}", self.total_iters),
            ));
        }
        let passed = self.lr_milestones.iter().filter(|&&m| m <= iter).count();
        Ok((self.lr_init as f64 * (self.lr_gamma as f64).powi(passed as i32)) as f32)
    }

    /// Shrinks the stage to `iters` iterations, scaling milestones by
    /// `iters / total_iters` (floored).
    pub fn with_iters_override(&self, iters: usize) -> Result<Self> {
        let mut out = self.clone();
        out.total_iters = iters;
        out.lr_milestones = self
            .lr_milestones
            .iter()
            .map(|&m| ((m as u128 * iters as u128) / self.total_iters.max(1) as u128) as usize)
            .collect();
        out.validate().map_err(|e| {
            invalid(
                "iters override",
                format!("{iters} iterations collapse the schedule of stage {}: {e}", roman(self.id)),
            )
        })?;
        Ok(out)
    }

    pub fn lr_patch_size(&self) -> usize {
        self.patch_size_hr / self.scale
    }
}

impl fmt::Display for TrainStageConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "stage {}: x{} {} loss, batch {}, HR patch {}, {} iters, lr {:e}, milestones {:?}, gamma {}, init {}",
            roman(self.id),
            self.scale,
            self.loss,
            self.batch_size,
            self.patch_size_hr,
            self.total_iters,
            self.lr_init,
            self.lr_milestones,
            self.lr_gamma,
            self.init_from
        )
    }
}

/// The six-stage ELSR training procedure at full scale.
pub fn elsr_schedule() -> Vec<TrainStageConfig> {
    let stage = |id, scale, loss, patch, iters, lr, milestones: &[usize], init| TrainStageConfig {
        id,
        scale,
        loss,
        batch_size: 64,
        patch_size_hr: patch,
        total_iters: iters,
        lr_init: lr,
        lr_milestones: milestones.to_vec(),
        lr_gamma: 0.5,
        init_from: init,
        hflip: false,
    };
    use InitFrom::*;
    use LossKind::*;
    vec![
        stage(1, 2, L1, 256, 500_000, 5e-4, &[200_000, 400_000], Scratch),
        stage(2, 4, L1, 256, 500_000, 5e-5, &[100_000, 300_000, 450_000], X2Adapted),
        stage(3, 4, L1, 256, 300_000, 2e-4, &[200_000], PreviousStage),
        stage(4, 4, Mse, 256, 1_000_000, 2e-4, &[300_000, 600_000, 900_000], PreviousStage),
        stage(5, 4, Mse, 512, 500_000, 2e-4, &[100_000, 200_000, 300_000, 400_000], PreviousStage),
        stage(6, 4, Mse, 640, 50_000, 2e-5, &[], PreviousStage),
    ]
}

/// Ordered stages read from a stage file.
#[derive(Clone, Debug, PartialEq)]
pub struct StagePlan {
    pub stages: Vec<TrainStageConfig>,
}

impl StagePlan {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        text.parse()
    }

    pub fn stage(&self, id: u32) -> Option<&TrainStageConfig> {
        self.stages.iter().find(|s| s.id == id)
    }

    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for s in &self.stages {
            let milestones: Vec<String> = s.lr_milestones.iter().map(|m| m.to_string()).collect();
            out.push_str(&format!(
                "[stage.{}]\nid = {}\nscale = {}\nloss = {}\nbatch_size = {}\npatch_size_hr = {}\n\
                 total_iters = {}\nlr_init = {:e}\nlr_milestones = {}\nlr_gamma = {}\ninit_from = {}\nhflip = {}\n\n",
                s.id,
                roman(s.id),
                s.scale,
                s.loss,
                s.batch_size,
                s.patch_size_hr,
                s.total_iters,
                s.lr_init,
                milestones.join(", "),
                s.lr_gamma,
                s.init_from,
                s.hflip
            ));
        }
        out
    }
}

#[derive(Default)]
struct PendingStage {
    header_line: usize,
    id: u32,
    scale: Option<usize>,
    loss: Option<LossKind>,
    batch_size: Option<usize>,
    patch_size_hr: Option<usize>,
    total_iters: Option<usize>,
    lr_init: Option<f32>,
    lr_milestones: Option<Vec<usize>>,
    lr_gamma: Option<f32>,
    init_from: Option<InitFrom>,
    hflip: Option<bool>,
    seen: Vec<String>,
}

impl PendingStage {
    fn finish(self) -> Result<TrainStageConfig> {
        let line = self.header_line;
        let missing = |key: &str| Error::Config {
            line,
            msg: format!("stage.{} is missing required key `{key}`", self.id),
        };
        let cfg = TrainStageConfig {
            id: self.id,
            scale: self.scale.unwrap_or(4),
            loss: self.loss.ok_or_else(|| missing("loss"))?,
            batch_size: self.batch_size.ok_or_else(|| missing("batch_size"))?,
            patch_size_hr: self.patch_size_hr.ok_or_else(|| missing("patch_size_hr"))?,
            total_iters: self.total_iters.ok_or_else(|| missing("total_iters"))?,
            lr_init: self.lr_init.ok_or_else(|| missing("lr_init"))?,
            lr_milestones: self.lr_milestones.ok_or_else(|| missing("lr_milestones"))?,
            lr_gamma: self.lr_gamma.ok_or_else(|| missing("lr_gamma"))?,
            init_from: self.init_from.ok_or_else(|| missing("init_from"))?,
            hflip: self.hflip.unwrap_or(false),
        };
        cfg.validate().map_err(|e| Error::Config {
            line,
            msg: e.to_string(),
        })?;
        Ok(cfg)
    }
}

fn parse_int(s: &str) -> std::result::Result<usize, String> {
    s.replace('_', "")
        .parse::<usize>()
        .map_err(|_| format!("`{s}` is not a non-negative integer"))
}

fn parse_f32(s: &str) -> std::result::Result<f32, String> {
    s.parse::<f32>().map_err(|_| format!("`{s}` is not a number"))
}

impl FromStr for StagePlan {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut stages: Vec<TrainStageConfig> = Vec::new();
        let mut current: Option<PendingStage> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |msg: String| Error::Config { line: line_no, msg };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('[') {
                let name = header
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("unterminated section header `{line}`")))?
                    .trim();
                let id = name
                    .strip_prefix("stage.")
                    .and_then(parse_stage_id)
                    .filter(|&id| id >= 1)
                    .ok_or_else(|| err(format!("expected `[stage.N]`, found `[{name}]`")))?;
                if let Some(done) = current.take() {
                    stages.push(done.finish()?);
                }
                if stages.iter().any(|s| s.id == id) {
                    return Err(err(format!("duplicate section stage.{id}")));
                }
                current = Some(PendingStage {
                    header_line: line_no,
                    id,
                    ..Default::default()
                });
                continue;
            }

            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
            let stage = current
                .as_mut()
                .ok_or_else(|| err(format!("key `{key}` appears before any [stage.N] section")))?;
            if stage.seen.iter().any(|k| k == key) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            stage.seen.push(key.to_string());

            match key {
                "id" => {
                    let id = parse_stage_id(value).ok_or_else(|| err(format!("bad stage id `{value}`")))?;
                    if id != stage.id {
                        return Err(err(format!(
                            "id {value} disagrees with section stage.{}",
                            stage.id
                        )));
                    }
                }
                "scale" => stage.scale = Some(parse_int(value).map_err(err)?),
                "loss" => stage.loss = Some(value.parse().map_err(err)?),
                "batch_size" => stage.batch_size = Some(parse_int(value).map_err(err)?),
                "patch_size_hr" => stage.patch_size_hr = Some(parse_int(value).map_err(err)?),
                "total_iters" => stage.total_iters = Some(parse_int(value).map_err(err)?),
                "lr_init" => stage.lr_init = Some(parse_f32(value).map_err(err)?),
                "lr_gamma" => stage.lr_gamma = Some(parse_f32(value).map_err(err)?),
                "init_from" => stage.init_from = Some(value.parse().map_err(err)?),
                "hflip" => {
                    stage.hflip = Some(
                        value
                            .parse::<bool>()
                            .map_err(|_| err(format!("`{value}` is not true/false")))?,
                    )
                }
                "lr_milestones" => {
                    let inner = value.trim_start_matches('[').trim_end_matches(']').trim();
                    let list = if inner.is_empty() {
                        Vec::new()
                    } else {
                        inner
                            .split(',')
                            .map(|s| parse_int(s.trim()))
                            .collect::<std::result::Result<Vec<_>, _>>()
                            .map_err(err)?
                    };
                    stage.lr_milestones = Some(list);
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        if let Some(done) = current.take() {
            stages.push(done.finish()?);
        }
        if stages.is_empty() {
            return Err(Error::Config {
                line: 0,
                msg: "no [stage.N] sections found".into(),
            });
        }
        Ok(StagePlan { stages })
    }
}
