//! REDS-style dataset trees.
//!
//! ```text
//! <root>/<split>_sharp/<seq>/<frame>.png               HR
//! <root>/<split>_sharp_bicubic/X<scale>/<seq>/<frame>.png   LR
//! ```
//!
//! Sequence ids are zero-padded three-digit directories and frames are
//! zero-padded eight-digit PNGs, so an extracted REDS archive drops in as is.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imaging::eval::{list_frames, match_frames};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Dataset(format!("unknown split `{other}` (train|val|test)"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

pub fn sequence_name(index: usize) -> String {
    format!("{index:03}")
}

pub fn frame_name(index: usize) -> String {
    format!("{index:08}.png")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetLayout {
    pub root: PathBuf,
    pub split: Split,
}

impl DatasetLayout {
    pub fn new(root: impl Into<PathBuf>, split: Split) -> Self {
        Self {
            root: root.into(),
            split,
        }
    }

    pub fn hr_dir(&self) -> PathBuf {
        self.root.join(format!("{}_sharp", self.split))
    }

    pub fn lr_dir(&self, scale: usize) -> PathBuf {
        self.root
            .join(format!("{}_sharp_bicubic", self.split))
            .join(format!("X{scale}"))
    }

    /// Sequence directories under the HR root, sorted.
    pub fn sequences(&self) -> Result<Vec<String>> {
        let hr = self.hr_dir();
        if !hr.is_dir() {
            return Err(Error::Dataset(format!("missing HR directory {}", hr.display())));
        }
        let mut out = Vec::new();
        for entry in std::fs::read_dir(&hr)? {
            let entry = entry?;
            if entry.file_type()?.is_dir() {
                out.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        out.sort();
        Ok(out)
    }

    /// Sorted frame file names of one sequence.
    pub fn frames(&self, sequence: &str) -> Result<Vec<String>> {
        list_frames(&self.hr_dir().join(sequence))
    }

    /// `(lr, hr)` paths of every frame, in sequence then frame order. The
    /// LR and HR trees must hold exactly the same frames.
    pub fn frame_pairs(&self, scale: usize) -> Result<Vec<(PathBuf, PathBuf)>> {
        let (lr, hr) = (self.lr_dir(scale), self.hr_dir());
        if !lr.is_dir() {
            return Err(Error::Dataset(format!(
                "missing LR directory {}; run prepare-data for x{scale} first",
                lr.display()
            )));
        }
        Ok(match_frames(&lr, &hr)?
            .into_iter()
            .map(|name| (lr.join(&name), hr.join(&name)))
            .collect())
    }
}
