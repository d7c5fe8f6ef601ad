use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use super::DecodeError;

const MAGIC: &[u8; 4] = b"CTCL";
const VERSION: u32 = 1;
/// Allowed deviation of a row's probability mass from 1.
pub const ROW_MASS_TOLERANCE: f64 = 1e-3;

/// Per-frame natural-log token probabilities for one utterance, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMatrix {
    frames: usize,
    vocab_size: usize,
    data: Vec<f32>,
    /// Informational only.
    pub frame_ms: Option<f32>,
}

impl LogitMatrix {
    /// Wraps row-major log-probabilities, checking shape and row mass.
    pub fn new(frames: usize, vocab_size: usize, data: Vec<f32>) -> Result<Self, DecodeError> {
        if vocab_size == 0 {
            return Err(DecodeError::Logits("vocabulary size is zero".into()));
        }
        if data.len() != frames * vocab_size {
            return Err(DecodeError::Logits(format!(
                "expected {} values for {frames}x{vocab_size}, got {}",
                frames * vocab_size,
                data.len()
            )));
        }
        let m = Self {
            frames,
            vocab_size,
            data,
            frame_ms: None,
        };
        for t in 0..frames {
            let row = m.row(t);
            if row.iter().any(|v| v.is_nan() || *v > 0.0) {
                return Err(DecodeError::Logits(format!("frame {t}: invalid log-probability")));
            }
            let mass: f64 = row.iter().map(|&v| (v as f64).exp()).sum();
            if (mass - 1.0).abs() > ROW_MASS_TOLERANCE {
                return Err(DecodeError::Logits(format!("frame {t}: probabilities sum to {mass}")));
            }
        }
        Ok(m)
    }

    /// Builds a matrix from per-frame probability rows (not logs).
    pub fn from_probabilities(rows: &[Vec<f64>]) -> Result<Self, DecodeError> {
        let vocab_size = rows.first().map_or(1, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * vocab_size);
        for row in rows {
            if row.len() != vocab_size {
                return Err(DecodeError::Logits("ragged rows".into()));
            }
            data.extend(row.iter().map(|&p| p.ln() as f32));
        }
        Self::new(rows.len(), vocab_size, data)
    }

    pub fn empty(vocab_size: usize) -> Self {
        Self {
            frames: 0,
            vocab_size,
            data: Vec::new(),
            frame_ms: None,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.data[t * self.vocab_size..(t + 1) * self.vocab_size]
    }

    /// Copy of a frame range, for chunked streaming.
    pub fn slice(&self, range: Range<usize>) -> Self {
        Self {
            frames: range.len(),
            vocab_size: self.vocab_size,
            data: self.data[range.start * self.vocab_size..range.end * self.vocab_size].to_vec(),
            frame_ms: self.frame_ms,
        }
    }

    /// Writes the binary format: `CTCL`, u32 version, u32 frames, u32 vocab,
    /// then f32 values, all little-endian.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.frames as u32).to_le_bytes())?;
        w.write_all(&(self.vocab_size as u32).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.data.len() * 4);
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, DecodeError> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)
            .map_err(|e| DecodeError::Logits(format!("truncated header: {e}")))?;
        if &header[0..4] != MAGIC {
            return Err(DecodeError::Logits("bad magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().expect("4 bytes"));
        let version = word(4);
        if version != VERSION {
            return Err(DecodeError::Logits(format!("unsupported version {version}")));
        }
        let frames = word(8) as usize;
        let vocab_size = word(12) as usize;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != frames * vocab_size * 4 {
            return Err(DecodeError::Logits(format!(
                "payload has {} bytes, expected {}",
                bytes.len(),
                frames * vocab_size * 4
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Self::new(frames, vocab_size, data)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DecodeError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_bytes())
    }
}
