//! `ATN1` attention dumps.
//!
//! Layout (all little-endian):
//!
//! ```text
//! offset  size   field
//! 0       4      magic "ATN1"
//! 4       4      layer_index (u32)
//! 8       4      num_heads H (u32)
//! 12      4      seq_len S (u32)
//! 16      4      span_start (u32)
//! 20      4      span_len (u32)
//! 24      4      grid rows R (u32)
//! 28      4      grid cols C (u32)
//! 32      4*H*S  weights (f32), head-major
//! ```

use std::path::Path;

use crate::attention::{AttentionTensor, GridShape, ImageSpan};
use crate::error::{AtaError, Result};

pub const MAGIC: &[u8; 4] = b"ATN1";
pub const HEADER_LEN: usize = 32;

const FIELD_NAMES: [&str; 7] = [
    "layer_index",
    "num_heads",
    "seq_len",
    "span_start",
    "span_len",
    "grid_rows",
    "grid_cols",
];

/// Serializes a tensor; weights are narrowed to `f32`.
pub fn encode(t: &AttentionTensor) -> Result<Vec<u8>> {
    let span = t.image_span();
    let grid = t.grid();
    let fields = [
        t.layer_index(),
        t.num_heads(),
        t.seq_len(),
        span.start,
        span.len,
        grid.rows,
        grid.cols,
    ];
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * t.weights().len());
    out.extend_from_slice(MAGIC);
    for (name, value) in FIELD_NAMES.iter().zip(fields) {
        let v = u32::try_from(value)
            .map_err(|_| AtaError::structural(format!("{name} = {value} does not fit in u32")))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    for w in t.weights() {
        out.extend_from_slice(&(*w as f32).to_le_bytes());
    }
    Ok(out)
}

/// Parses a dump and validates the resulting tensor.
pub fn decode(bytes: &[u8]) -> Result<AttentionTensor> {
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        let found = &bytes[..bytes.len().min(4)];
        return Err(AtaError::Format {
            offset: 0,
            message: format!("bad magic {found:02x?}, expected \"ATN1\""),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(AtaError::Format {
            offset: bytes.len(),
            message: format!(
                "truncated header: expected {HEADER_LEN} bytes, got {}",
                bytes.len()
            ),
        });
    }

    let mut fields = [0usize; 7];
    for (i, f) in fields.iter_mut().enumerate() {
        let at = 4 + 4 * i;
        *f = u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    }
    let [layer, heads, seq, span_start, span_len, rows, cols] = fields;

    let expected = heads
        .checked_mul(seq)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| AtaError::Format {
            offset: 8,
            message: format!("payload size overflows for {heads} heads x {seq} tokens"),
        })?;
    if bytes.len() != expected {
        return Err(AtaError::Format {
            offset: bytes.len().min(expected),
            message: format!(
                "length mismatch: expected {expected} bytes for {heads} heads x {seq} tokens, got {}",
                bytes.len()
            ),
        });
    }

    let weights = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    AttentionTensor::new(
        layer,
        heads,
        seq,
        weights,
        ImageSpan {
            start: span_start,
            len: span_len,
        },
        GridShape::new(rows, cols),
    )
}

pub fn read(path: impl AsRef<Path>) -> Result<AttentionTensor> {
    decode(&std::fs::read(path)?)
}

pub fn write(path: impl AsRef<Path>, t: &AttentionTensor) -> Result<()> {
    std::fs::write(path, encode(t)?)?;
    Ok(())
}
