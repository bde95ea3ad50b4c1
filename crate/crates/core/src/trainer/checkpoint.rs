//! Checkpoint file format, bit-exact across save/load:
//!
//! ```text
//! 8 bytes  magic "VRAECKPT"
//! 4 bytes  format version, little-endian u32
//! 4 bytes  header length, little-endian u32
//! N bytes  UTF-8 JSON header: config, counters, RNG states, pitch map,
//!          metric history, and the array table
//! then     each array as little-endian f64 in declaration order:
//!          14 parameter groups, 14 first-moment groups, 14 second-moment
//!          groups
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Params;
use crate::optimizer::AdamState;
use crate::trainer::{MetricRow, TrainConfig};

const MAGIC: &[u8; 8] = b"VRAECKPT";
pub const FORMAT_VERSION: u32 = 1;

/// Full training state: enough to resume bit-exactly or to run inference.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub params: Params,
    pub adam: AdamState,
    /// Completed epochs.
    pub epoch: usize,
    /// State of the Gaussian source driving posterior sampling.
    pub model_rng_state: u64,
    /// State of the shuffle generator.
    pub shuffle_rng_state: u64,
    pub pitch_map: Vec<u8>,
    pub history: Vec<MetricRow>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: TrainConfig,
    epoch: usize,
    adam_t: u64,
    model_rng_state: u64,
    shuffle_rng_state: u64,
    pitch_map: Vec<u8>,
    history: Vec<MetricRow>,
    arrays: Vec<ArrayDesc>,
}

#[derive(Serialize, Deserialize, PartialEq)]
struct ArrayDesc {
    name: String,
    rows: usize,
    cols: usize,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let arrays = Params::shapes(&self.config.model)
            .iter()
            .map(|&(name, rows, cols)| ArrayDesc {
                name: name.to_string(),
                rows,
                cols,
            })
            .collect();
        let header = Header {
            config: self.config.clone(),
            epoch: self.epoch,
            adam_t: self.adam.t,
            model_rng_state: self.model_rng_state,
            shuffle_rng_state: self.shuffle_rng_state,
            pitch_map: self.pitch_map.clone(),
            history: self.history.clone(),
            arrays,
        };
        let json = serde_json::to_vec(&header)
            .map_err(|e| Error::Checkpoint(format!("header serialization: {e}")))?;

        let float_count = self.params.total_len() * 3;
        let mut out = Vec::with_capacity(16 + json.len() + float_count * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for source in [&self.params, &self.adam.m, &self.adam.v] {
            for (_, slice) in source.slices() {
                for v in slice {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::Checkpoint("file shorter than the fixed header".into()));
        }
        if &bytes[..8] != MAGIC {
            return Err(Error::Checkpoint("bad magic bytes; not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "format version {version}, this build reads {FORMAT_VERSION}"
            )));
        }
        let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let body_start = 16 + header_len;
        if bytes.len() < body_start {
            return Err(Error::Checkpoint("truncated header".into()));
        }
        let header: Header = serde_json::from_slice(&bytes[16..body_start])
            .map_err(|e| Error::Checkpoint(format!("header parse: {e}")))?;

        let shapes = Params::shapes(&header.config.model);
        let expected: Vec<ArrayDesc> = shapes
            .iter()
            .map(|&(name, rows, cols)| ArrayDesc {
                name: name.to_string(),
                rows,
                cols,
            })
            .collect();
        if header.arrays != expected {
            return Err(Error::Checkpoint(
                "array table does not match the model shape in the header".into(),
            ));
        }

        let mut params = Params::zeros(&header.config.model);
        let mut adam = AdamState::new(&header.config.model);
        adam.t = header.adam_t;
        let float_count = params.total_len() * 3;
        if bytes.len() != body_start + float_count * 8 {
            return Err(Error::Checkpoint(format!(
                "array section is {} bytes, expected {}",
                bytes.len() - body_start,
                float_count * 8
            )));
        }
        let mut pos = body_start;
        for target in [&mut params, &mut adam.m, &mut adam.v] {
            for (name, slice) in target.slices_mut() {
                for v in slice.iter_mut() {
                    *v = f64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap());
                    pos += 8;
                    if !v.is_finite() {
                        return Err(Error::Checkpoint(format!(
                            "non-finite value in array {name}"
                        )));
                    }
                }
            }
        }
        Ok(Checkpoint {
            config: header.config,
            params,
            adam,
            epoch: header.epoch,
            model_rng_state: header.model_rng_state,
            shuffle_rng_state: header.shuffle_rng_state,
            pitch_map: header.pitch_map,
            history: header.history,
        })
    }
}

pub fn save_checkpoint(c: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, c.to_bytes()?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&fs::read(path)?)
}
