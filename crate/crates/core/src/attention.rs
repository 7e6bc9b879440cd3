//! Attention probes for the last query token.
//!
//! An [`AttentionTensor`] carries one post-softmax attention row per head,
//! all taken from the same layer and the same (final) query position. The
//! image tokens occupy a contiguous span of the key sequence and are laid
//! out row-major over the patch grid: patch `(i, j)` is token
//! `span.start + i * cols + j`.
//!
//! Nothing here touches value vectors, so probes can be produced by any
//! attention kernel that can report its softmax weights.

use crate::error::{AtaError, Result};

/// Tolerance on the per-head row sum of a softmax output.
pub const ROW_SUM_TOLERANCE: f64 = 1e-5;

/// Contiguous run of image tokens inside the key sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageSpan {
    pub start: usize,
    pub len: usize,
}

/// Patch-grid layout of the image tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShape {
    pub rows: usize,
    pub cols: usize,
}

impl GridShape {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }
}

/// Where the image tokens sit in a sequence, and which layer a probe came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenLayout {
    pub layer_index: usize,
    pub image_span: ImageSpan,
    pub grid: GridShape,
}

/// Per-head attention of the last query token over the whole sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTensor {
    layer_index: usize,
    num_heads: usize,
    seq_len: usize,
    /// Head-major, `num_heads * seq_len` weights.
    rows: Vec<f64>,
    image_span: ImageSpan,
    grid: GridShape,
}

impl AttentionTensor {
    /// Builds a tensor from head-major rows, checking every invariant.
    pub fn new(
        layer_index: usize,
        num_heads: usize,
        seq_len: usize,
        rows: Vec<f64>,
        image_span: ImageSpan,
        grid: GridShape,
    ) -> Result<Self> {
        if num_heads == 0 || seq_len == 0 {
            return Err(AtaError::structural(format!(
                "attention needs at least one head and one token (heads={num_heads}, seq_len={seq_len})"
            )));
        }
        if rows.len() != num_heads * seq_len {
            return Err(AtaError::structural(format!(
                "expected {} weights ({num_heads} heads x {seq_len} tokens), got {}",
                num_heads * seq_len,
                rows.len()
            )));
        }
        check_layout(seq_len, image_span, grid)?;

        for (head, row) in rows.chunks_exact(seq_len).enumerate() {
            if let Some(pos) = row.iter().position(|w| !w.is_finite() || *w < 0.0) {
                return Err(AtaError::numeric(format!(
                    "head {head} token {pos}: weight {} is not a finite non-negative number",
                    row[pos]
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(AtaError::numeric(format!(
                    "head {head}: attention row sums to {sum}, expected 1"
                )));
            }
        }

        Ok(Self {
            layer_index,
            num_heads,
            seq_len,
            rows,
            image_span,
            grid,
        })
    }

    pub fn layer_index(&self) -> usize {
        self.layer_index
    }

    pub fn num_heads(&self) -> usize {
        self.num_heads
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn image_span(&self) -> ImageSpan {
        self.image_span
    }

    pub fn grid(&self) -> GridShape {
        self.grid
    }

    /// Attention row of one head over the full sequence.
    pub fn head(&self, head: usize) -> &[f64] {
        &self.rows[head * self.seq_len..(head + 1) * self.seq_len]
    }

    /// All weights, head-major.
    pub fn weights(&self) -> &[f64] {
        &self.rows
    }
}

fn check_layout(seq_len: usize, span: ImageSpan, grid: GridShape) -> Result<()> {
    let end = span.start.checked_add(span.len);
    if span.len == 0 || end.is_none_or(|end| end > seq_len) {
        return Err(AtaError::structural(format!(
            "image span {}..{} does not fit a sequence of {seq_len} tokens",
            span.start,
            span.start.saturating_add(span.len)
        )));
    }
    if grid.cells() != span.len {
        return Err(AtaError::structural(format!(
            "patch grid {}x{} holds {} cells but the image span has {} tokens",
            grid.rows,
            grid.cols,
            grid.cells(),
            span.len
        )));
    }
    Ok(())
}

/// Non-negative map over the patch grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchAttentionMap {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub layer_index: usize,
}

impl PatchAttentionMap {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, layer_index: usize) -> Result<Self> {
        if rows * cols != values.len() {
            return Err(AtaError::structural(format!(
                "{rows}x{cols} grid cannot hold {} values",
                values.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            values,
            layer_index,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Row-major index of the largest entry (first one on ties).
    pub fn argmax(&self) -> Option<usize> {
        argmax(&self.values)
    }
}

/// Averages the image-token slice of every head into a patch map.
pub fn aggregate_heads(t: &AttentionTensor) -> Result<PatchAttentionMap> {
    check_layout(t.seq_len, t.image_span, t.grid)?;
    let span = t.image_span;
    let mut acc = vec![0.0f64; span.len];
    for h in 0..t.num_heads {
        let slice = &t.head(h)[span.start..span.start + span.len];
        for (a, w) in acc.iter_mut().zip(slice) {
            *a += w;
        }
    }
    let inv = t.num_heads as f64;
    acc.iter_mut().for_each(|a| *a /= inv);
    PatchAttentionMap::new(t.grid.rows, t.grid.cols, acc, t.layer_index)
}

/// Query and keys of a single head; `keys` is row-major `seq_len x head_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadQk {
    pub query: Vec<f64>,
    pub keys: Vec<f64>,
}

/// Scaled dot-product attention of the last query against every key,
/// one softmax row per head.
pub fn toy_attention(heads: &[HeadQk], head_dim: usize, layout: TokenLayout) -> Result<AttentionTensor> {
    if head_dim == 0 {
        return Err(AtaError::contract("head dimension must be at least 1"));
    }
    let first = heads
        .first()
        .ok_or_else(|| AtaError::structural("toy attention needs at least one head"))?;
    if first.keys.len() % head_dim != 0 {
        return Err(AtaError::structural(format!(
            "key buffer of {} values is not a multiple of head_dim {head_dim}",
            first.keys.len()
        )));
    }
    let seq_len = first.keys.len() / head_dim;
    let scale = 1.0 / (head_dim as f64).sqrt();

    let mut rows = Vec::with_capacity(heads.len() * seq_len);
    let mut logits = vec![0.0; seq_len];
    for (h, head) in heads.iter().enumerate() {
        if head.query.len() != head_dim || head.keys.len() != seq_len * head_dim {
            return Err(AtaError::structural(format!(
                "head {h}: query has {} dims and keys {} values, expected {head_dim} and {}",
                head.query.len(),
                head.keys.len(),
                seq_len * head_dim
            )));
        }
        if head.query.iter().chain(&head.keys).any(|v| !v.is_finite()) {
            return Err(AtaError::numeric(format!("head {h}: non-finite query or key entry")));
        }
        for (logit, key) in logits.iter_mut().zip(head.keys.chunks_exact(head_dim)) {
            *logit = dot(&head.query, key) * scale;
        }
        softmax_in_place(&mut logits)?;
        rows.extend_from_slice(&logits);
    }

    AttentionTensor::new(
        layout.layer_index,
        heads.len(),
        seq_len,
        rows,
        layout.image_span,
        layout.grid,
    )
}

/// Max-shifted softmax.
pub fn softmax_in_place(logits: &mut [f64]) -> Result<()> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(AtaError::numeric("softmax over non-finite logits"));
    }
    let mut total = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        total += *l;
    }
    logits.iter_mut().for_each(|l| *l /= total);
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}
