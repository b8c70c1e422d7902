//! The ELSR network, its weight archive, and ×2 → ×4 adaptation.

pub mod adapt;
pub mod archive;
pub mod config;
pub mod network;

pub use adapt::{adapt_weights_x2_to_x4, x4_source_channel};
pub use archive::{ArchiveEntry, WeightArchive};
pub use config::{Activation, ModelConfig};
pub use network::{config_from_archive, load_weights, save_weights, ElsrModel, LayerInfo, LoadReport, ParamVars};
