//! Binary weight archive.
//!
//! Layout (all integers little-endian `u32`, no padding):
//!
//! ```text
//! "ELSR" | version | scale | nf | layer_count
//! per layer: name_len | name (UTF-8) | ndim | dims[ndim] | f32 data
//! ```
//!
//! Trailing bytes after the last layer are rejected.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ELSR";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct ArchiveEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl ArchiveEntry {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightArchive {
    pub version: u32,
    pub scale: u32,
    pub nf: u32,
    /// How the weights were initialized. Informational; not serialized.
    pub init: Option<String>,
    pub entries: Vec<ArchiveEntry>,
}

impl WeightArchive {
    pub fn new(scale: u32, nf: u32) -> Self {
        Self {
            version: VERSION,
            scale,
            nf,
            init: None,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Result<()> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(Error::Archive {
                offset: 0,
                msg: format!("duplicate layer name `{name}`"),
            });
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Archive {
                offset: 0,
                msg: format!("layer `{name}`: shape {shape:?} needs {numel} values, got {}", data.len()),
            });
        }
        self.entries.push(ArchiveEntry { name, shape, data });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ArchiveEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ArchiveEntry> {
        self.entries.iter_mut().find(|e| e.name == name)
    }

    /// Total scalar count over all entries.
    pub fn numel(&self) -> usize {
        self.entries.iter().map(ArchiveEntry::numel).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.numel() * 4);
        out.extend_from_slice(MAGIC);
        for v in [self.version, self.scale, self.nf, self.entries.len() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for e in &self.entries {
            out.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
            out.extend_from_slice(e.name.as_bytes());
            out.extend_from_slice(&(e.shape.len() as u32).to_le_bytes());
            for &d in &e.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in &e.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4, "magic")?;
        if magic != MAGIC {
            return Err(Error::Archive {
                offset: 0,
                msg: format!("bad magic {magic:?}, expected \"ELSR\""),
            });
        }
        let version_at = r.pos;
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::Archive {
                offset: version_at,
                msg: format!("unsupported version {version}"),
            });
        }
        let scale = r.u32("scale")?;
        let nf = r.u32("nf")?;
        let count = r.u32("layer count")?;
        let mut archive = WeightArchive::new(scale, nf);
        for _ in 0..count {
            let entry_at = r.pos;
            let name_len = r.u32("name length")? as usize;
            let name_at = r.pos;
            let name = std::str::from_utf8(r.take(name_len, "layer name")?)
                .map_err(|_| Error::Archive {
                    offset: name_at,
                    msg: "layer name is not valid UTF-8".into(),
                })?
                .to_string();
            let ndim = r.u32("ndim")? as usize;
            let mut shape = Vec::with_capacity(ndim.min(8));
            for _ in 0..ndim {
                shape.push(r.u32("dimension")? as usize);
            }
            let numel = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|n| n.checked_mul(4).is_some())
                .ok_or_else(|| Error::Archive {
                    offset: entry_at,
                    msg: format!("layer `{name}`: shape {shape:?} overflows"),
                })?;
            let raw = r.take(numel * 4, "layer data")?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if archive.get(&name).is_some() {
                return Err(Error::Archive {
                    offset: entry_at,
                    msg: format!("duplicate layer name `{name}`"),
                });
            }
            archive.entries.push(ArchiveEntry { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::Archive {
                offset: r.pos,
                msg: format!("{} trailing bytes after last layer", bytes.len() - r.pos),
            });
        }
        Ok(archive)
    }

    /// Writes through a temporary file in the same directory and renames it
    /// into place, so readers never see a half-written archive.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Archive {
                offset: self.pos,
                msg: format!(
                    "truncated while reading {what} ({n} bytes needed, {} left)",
                    self.bytes.len() - self.pos
                ),
            }),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
