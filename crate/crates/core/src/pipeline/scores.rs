//! Dense per-topic score files written by search and read by fusion.

use crate::index::{ScoreTag, ScoreVector};
use crate::{Error, Result};

pub const SCORES_MAGIC: [u8; 4] = *b"SCRS";
pub const SCORES_VERSION: u32 = 1;
pub const SCORES_HEADER_LEN: usize = 88;

/// A full-corpus score list plus the store it is aligned to.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseScores {
    pub tag: ScoreTag,
    /// Number of member queries averaged into the list (1 for user queries).
    pub n_members: u32,
    /// Hex store fingerprint.
    pub fingerprint: String,
    pub values: Vec<f64>,
}

fn tag_code(tag: ScoreTag) -> u8 {
    match tag {
        ScoreTag::User => 0,
        ScoreTag::T2t => 1,
        ScoreTag::T2i => 2,
        ScoreTag::I2t => 3,
        ScoreTag::Fused => 4,
    }
}

fn tag_from_code(code: u8) -> Option<ScoreTag> {
    Some(match code {
        0 => ScoreTag::User,
        1 => ScoreTag::T2t,
        2 => ScoreTag::T2i,
        3 => ScoreTag::I2t,
        4 => ScoreTag::Fused,
        _ => return None,
    })
}

pub fn parse_tag(s: &str) -> Option<ScoreTag> {
    [ScoreTag::User, ScoreTag::T2t, ScoreTag::T2i, ScoreTag::I2t, ScoreTag::Fused]
        .into_iter()
        .find(|t| t.as_str() == s)
}

impl DenseScores {
    pub fn to_score_vector(&self, qid: &str) -> ScoreVector {
        ScoreVector::new(qid, self.tag, self.values.clone())
    }

    /// Header: magic | version u32 | tag u8 | 3 zero bytes | n_members u32 |
    /// count u64 | 64 ASCII hex fingerprint bytes; then count f64 LE values.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(SCORES_HEADER_LEN + 8 * self.values.len());
        out.extend_from_slice(&SCORES_MAGIC);
        out.extend_from_slice(&SCORES_VERSION.to_le_bytes());
        out.push(tag_code(self.tag));
        out.extend_from_slice(&[0; 3]);
        out.extend_from_slice(&self.n_members.to_le_bytes());
        out.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        let mut fp = [b'0'; 64];
        let bytes = self.fingerprint.as_bytes();
        fp[..bytes.len().min(64)].copy_from_slice(&bytes[..bytes.len().min(64)]);
        out.extend_from_slice(&fp);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8], source_name: &str) -> Result<Self> {
        let fail = |reason: String| Error::Ingest {
            source_name: source_name.to_string(),
            reason,
        };
        if bytes.len() < SCORES_HEADER_LEN {
            return Err(fail(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if bytes[0..4] != SCORES_MAGIC {
            return Err(fail("bad magic at offset 0".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let version = u32_at(4);
        if version != SCORES_VERSION {
            return Err(fail(format!("unsupported version {version} at offset 4")));
        }
        let tag = tag_from_code(bytes[8]).ok_or_else(|| fail(format!("unknown tag {} at offset 8", bytes[8])))?;
        if bytes[9..12] != [0; 3] {
            return Err(fail("non-zero padding at offset 9".into()));
        }
        let n_members = u32_at(12);
        if n_members == 0 {
            return Err(fail("member count 0 at offset 12".into()));
        }
        let count = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
        let fingerprint = std::str::from_utf8(&bytes[24..88])
            .ok()
            .filter(|s| s.bytes().all(|b| b.is_ascii_hexdigit()))
            .ok_or_else(|| fail("fingerprint at offset 24 is not hex".into()))?
            .to_string();
        let payload = &bytes[SCORES_HEADER_LEN..];
        if (payload.len() as u64) != count.saturating_mul(8) {
            return Err(fail(format!(
                "payload is {} bytes, header count {count} needs {}",
                payload.len(),
                count.saturating_mul(8)
            )));
        }
        let mut values = Vec::with_capacity(count as usize);
        for (i, chunk) in payload.chunks_exact(8).enumerate() {
            let v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            if !v.is_finite() {
                return Err(fail(format!("non-finite value at offset {}", SCORES_HEADER_LEN + 8 * i)));
            }
            values.push(v);
        }
        Ok(DenseScores {
            tag,
            n_members,
            fingerprint,
            values,
        })
    }
}
