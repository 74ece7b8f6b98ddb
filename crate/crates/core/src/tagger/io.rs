//! Model container: magic bytes, a little-endian `u32` version, a `u64`
//! header length, a JSON header, then every parameter block as
//! little-endian `f32` values in header order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Tag;
use crate::error::{Error, Result};
use crate::tagger::model::{TaggerConfig, TaggerModel, Vocabulary};

const MAGIC: &[u8; 8] = b"MTAGGER\0";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct BlockHeader {
    name: String,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: TaggerConfig,
    tags: Vec<Tag>,
    vocabulary: Vec<String>,
    blocks: Vec<BlockHeader>,
}

pub fn write_model<W: Write>(mut out: W, model: &TaggerModel) -> Result<()> {
    let blocks = model.blocks();
    let header = Header {
        config: model.config.clone(),
        tags: model.tags.clone(),
        vocabulary: model.vocab.tokens().to_vec(),
        blocks: blocks
            .iter()
            .map(|(name, b)| BlockHeader {
                name: name.clone(),
                len: b.len(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    out.write_all(MAGIC)?;
    out.write_all(&MODEL_VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    for (_, block) in &blocks {
        for v in block.iter() {
            out.write_all(&(*v as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(mut input: R) -> Result<TaggerModel> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::ModelFormat("not a tagger model file".into()));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != MODEL_VERSION {
        return Err(Error::ModelVersion(version));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut json = vec![0u8; len];
    input.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json)?;
    if header.tags != Tag::inventory() {
        return Err(Error::ModelFormat("tag inventory differs from this build".into()));
    }
    if header.vocabulary.first().map(String::as_str) != Some(Vocabulary::UNKNOWN) {
        return Err(Error::ModelFormat(
            "vocabulary must start with the unknown token".into(),
        ));
    }
    let vocab = Vocabulary::from_list(header.vocabulary);
    let mut model = TaggerModel::new(header.config, vocab, &mut ChaCha8Rng::seed_from_u64(0))?;
    let expected: Vec<(String, usize)> = model.blocks().iter().map(|(n, b)| (n.clone(), b.len())).collect();
    if expected.len() != header.blocks.len()
        || expected
            .iter()
            .zip(&header.blocks)
            .any(|((n, l), h)| *n != h.name || *l != h.len)
    {
        return Err(Error::ModelFormat("parameter blocks do not match the config".into()));
    }
    for block in model.blocks_mut() {
        for v in block.iter_mut() {
            input.read_exact(&mut word)?;
            *v = f32::from_le_bytes(word) as f64;
        }
    }
    if !model.is_finite() {
        return Err(Error::ModelFormat("non-finite parameter".into()));
    }
    Ok(model)
}

pub fn save_model(path: &Path, model: &TaggerModel) -> Result<()> {
    write_model(BufWriter::new(File::create(path)?), model)
}

pub fn load_model(path: &Path) -> Result<TaggerModel> {
    read_model(BufReader::new(File::open(path)?))
}
