use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum TrainableKind {
    QuadraticBowl = 1,
    LearningCurve = 2,
    TinyMlp = 3,
}

impl TrainableKind {
    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(TrainableKind::QuadraticBowl),
            2 => Some(TrainableKind::LearningCurve),
            3 => Some(TrainableKind::TinyMlp),
            _ => None,
        }
    }
}

/// Flat weight vector of a trainable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightState {
    pub values: Vec<f64>,
}

const MAGIC: [u8; 4] = *b"IPWS";
const VERSION: u8 = 1;

/// Bytes preceding the payload of an encoded [`WeightState`].
pub const WEIGHT_HEADER_LEN: usize = 16;

impl WeightState {
    pub fn new(values: Vec<f64>) -> Self {
        WeightState { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Encodes as `"IPWS"`, version byte, kind byte, two reserved bytes, the
    /// dimension as u64, then the values as little-endian f64.
    pub fn encode(&self, kind: TrainableKind) -> Vec<u8> {
        let mut out = Vec::with_capacity(WEIGHT_HEADER_LEN + 8 * self.values.len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(kind as u8);
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Decodes one state from the front of `bytes`, returning it and the
    /// number of bytes consumed.
    pub fn decode(bytes: &[u8]) -> Result<(TrainableKind, WeightState, usize)> {
        if bytes.len() < WEIGHT_HEADER_LEN {
            return Err(Error::Decode("truncated weight header".into()));
        }
        if bytes[..4] != MAGIC {
            return Err(Error::Decode("bad weight magic".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::Decode(alloc::format!(
                "unsupported weight format version {}",
                bytes[4]
            )));
        }
        let kind = TrainableKind::from_tag(bytes[5])
            .ok_or_else(|| Error::Decode(alloc::format!("unknown trainable tag {}", bytes[5])))?;
        let dim = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let end = dim
            .checked_mul(8)
            .and_then(|n| n.checked_add(WEIGHT_HEADER_LEN))
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| Error::Decode("truncated weight payload".into()))?;
        let values = bytes[WEIGHT_HEADER_LEN..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((kind, WeightState { values }, end))
    }
}
