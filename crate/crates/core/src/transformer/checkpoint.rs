//! Checkpoint layout: `BPTF`, format version, header length, a JSON header
//! (config, tokenizer fingerprint, seed, block table), then every parameter
//! as a little-endian `f64` in block order.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::config::TransformerConfig;
use super::model::TransformerLM;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"BPTF";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config: TransformerConfig,
    pub vocab_fingerprint: String,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    #[serde(flatten)]
    meta: CheckpointMeta,
    blocks: Vec<(String, usize, usize)>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::ModelFormat(msg.into())
}

pub fn write_checkpoint<W: Write>(model: &TransformerLM, meta: &CheckpointMeta, mut out: W) -> Result<()> {
    if &meta.config != model.config() {
        return Err(Error::Config("checkpoint metadata does not match the model".into()));
    }
    let header = Header {
        meta: meta.clone(),
        blocks: model.blocks().iter().map(|b| (b.name.clone(), b.rows, b.cols)).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let io = |e: std::io::Error| bad(e.to_string());
    out.write_all(MAGIC).map_err(io)?;
    out.write_u32::<LittleEndian>(VERSION).map_err(io)?;
    out.write_u32::<LittleEndian>(json.len() as u32).map_err(io)?;
    out.write_all(&json).map_err(io)?;
    for &x in model.params() {
        out.write_f64::<LittleEndian>(x).map_err(io)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<(TransformerLM, CheckpointMeta)> {
    let io = |e: std::io::Error| bad(e.to_string());
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(bad("bad magic"));
    }
    if input.read_u32::<LittleEndian>().map_err(io)? != VERSION {
        return Err(bad("unsupported version"));
    }
    let len = input.read_u32::<LittleEndian>().map_err(io)? as usize;
    let mut json = vec![0u8; len];
    input.read_exact(&mut json).map_err(io)?;
    let header: Header = serde_json::from_slice(&json)?;
    let mut model = TransformerLM::zeros(header.meta.config.clone())?;
    let expected: Vec<(String, usize, usize)> =
        model.blocks().iter().map(|b| (b.name.clone(), b.rows, b.cols)).collect();
    if expected != header.blocks {
        return Err(bad("block table does not match the configuration"));
    }
    for x in model.params_mut() {
        *x = input.read_f64::<LittleEndian>().map_err(io)?;
        if !x.is_finite() {
            return Err(bad("non-finite parameter"));
        }
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest).map_err(io)? != 0 {
        return Err(bad("trailing bytes"));
    }
    Ok((model, header.meta))
}

pub fn save_checkpoint(path: &Path, model: &TransformerLM, meta: &CheckpointMeta) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_checkpoint(model, meta, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(TransformerLM, CheckpointMeta)> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(f))
}
