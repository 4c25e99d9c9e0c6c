//! Binary checkpoints of a population run.
//!
//! Layout: `"IPBTCKPT"`, a little-endian u32 version, the SHA-256 of the
//! payload, then the payload. The payload is a u64 length and the JSON of
//! the [`EngineState`], a u64 blob count, and the encoded weights of every
//! member in order followed by the best model's weights if there is one.
//! RNG state is not stored: every random stream is keyed by counters that
//! live in the engine state.

use std::fs;
use std::io::Write;
use std::path::Path;

use ipbt_core::engine::EngineState;
use ipbt_core::trainable::{TrainableKind, WeightState};
use sha2::{Digest, Sha256};

use crate::{CliError, Result};

const MAGIC: &[u8; 8] = b"IPBTCKPT";
const VERSION: u32 = 1;
const HEADER: usize = 8 + 4 + 32;

pub fn encode(state: &EngineState, kind: TrainableKind) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(state).map_err(|e| CliError::Runtime(format!("cannot serialize state: {e}")))?;
    let mut blobs: Vec<&WeightState> = state.members.iter().map(|m| &m.weights).collect();
    if let Some(b) = &state.history.best {
        blobs.push(&b.weights);
    }
    let mut payload = Vec::with_capacity(16 + json.len());
    payload.extend_from_slice(&(json.len() as u64).to_le_bytes());
    payload.extend_from_slice(&json);
    payload.extend_from_slice(&(blobs.len() as u64).to_le_bytes());
    for w in blobs {
        payload.extend_from_slice(&w.encode(kind));
    }
    let mut out = Vec::with_capacity(HEADER + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&payload));
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode(bytes: &[u8], kind: TrainableKind) -> Result<EngineState> {
    let bad = |m: &str| CliError::Runtime(format!("bad checkpoint: {m}"));
    if bytes.len() < HEADER || &bytes[..8] != MAGIC {
        return Err(bad("missing magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let payload = &bytes[HEADER..];
    if Sha256::digest(payload).as_slice() != &bytes[12..HEADER] {
        return Err(bad("checksum mismatch"));
    }
    let mut pos = 0;
    let take_u64 = |pos: &mut usize| -> Result<u64> {
        let v = payload
            .get(*pos..*pos + 8)
            .ok_or_else(|| bad("truncated"))?;
        *pos += 8;
        Ok(u64::from_le_bytes(v.try_into().unwrap()))
    };
    let json_len = take_u64(&mut pos)? as usize;
    let json = payload.get(pos..pos + json_len).ok_or_else(|| bad("truncated state"))?;
    pos += json_len;
    let mut state: EngineState = serde_json::from_slice(json).map_err(|e| bad(&e.to_string()))?;
    let n_blobs = take_u64(&mut pos)? as usize;
    let expected = state.members.len() + usize::from(state.history.best.is_some());
    if n_blobs != expected {
        return Err(bad(&format!("{n_blobs} weight blobs, expected {expected}")));
    }
    let mut weights = Vec::with_capacity(n_blobs);
    for _ in 0..n_blobs {
        let (k, w, used) = WeightState::decode(&payload[pos..]).map_err(|e| bad(&e.to_string()))?;
        if k != kind {
            return Err(bad(&format!("weights belong to {k:?}, not {kind:?}")));
        }
        weights.push(w);
        pos += used;
    }
    if pos != payload.len() {
        return Err(bad("trailing bytes"));
    }
    let mut weights = weights.into_iter();
    for m in &mut state.members {
        m.weights = weights.next().unwrap();
    }
    if let Some(b) = &mut state.history.best {
        b.weights = weights.next().unwrap();
    }
    Ok(state)
}

/// Writes through a temporary file and a rename, so a crash leaves either
/// the old checkpoint or the new one.
pub fn save(path: &Path, state: &EngineState, kind: TrainableKind) -> Result<()> {
    let bytes = encode(state, kind)?;
    write_atomic(path, &bytes)
}

pub fn load(path: &Path, kind: TrainableKind) -> Result<EngineState> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes, kind).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(&tmp, e))?;
    f.sync_all().map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}
