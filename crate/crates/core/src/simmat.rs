//! Cosine similarity matrices, bidirectional softmax, and threshold prediction.

use crate::alignment::{AlignmentSet, Granularity};
use crate::error::{AlignError, Result};
use crate::matrix::{norm, Matrix};

const UNIT_TOLERANCE: f64 = 1e-6;

/// One row per subword, each of Euclidean norm 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence(Matrix);

impl EmbeddingSequence {
    /// Scales every row to unit norm. Zero or non-finite rows are rejected.
    pub fn normalize(mut rows: Matrix) -> Result<Self> {
        for i in 0..rows.rows() {
            let row = rows.row_mut(i);
            let n = norm(row);
            if !(n.is_finite() && n > 0.0) {
                return Err(AlignError::validation(format!(
                    "embedding row {i} has norm {n} and cannot be normalized"
                )));
            }
            row.iter_mut().for_each(|v| *v /= n);
        }
        Ok(EmbeddingSequence(rows))
    }

    /// Wraps rows that are already unit-normalized.
    pub fn from_unit_rows(rows: Matrix) -> Result<Self> {
        for i in 0..rows.rows() {
            let n = norm(rows.row(i));
            if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
                return Err(AlignError::validation(format!("embedding row {i} has norm {n}, expected 1")));
            }
        }
        Ok(EmbeddingSequence(rows))
    }

    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

/// `m x n` cosine similarities between source rows and target rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix(Matrix);

impl SimilarityMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

/// `M = hs * ht^T` over unit rows, i.e. cosine similarity.
pub fn cosine_matrix(hs: &EmbeddingSequence, ht: &EmbeddingSequence) -> Result<SimilarityMatrix> {
    if hs.dim() != ht.dim() {
        return Err(AlignError::Shape(format!(
            "source dim {} differs from target dim {}",
            hs.dim(),
            ht.dim()
        )));
    }
    Ok(SimilarityMatrix(hs.0.matmul_t(&ht.0)?))
}

/// Row-normalized (`s2t`) and column-normalized (`t2s`) softmaxes of `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrices {
    pub s2t: Matrix,
    pub t2s: Matrix,
}

fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    values.iter_mut().for_each(|v| *v /= sum);
}

/// Softmax over each row and over each column of `scores / temperature`.
pub fn softmax_probs(scores: &Matrix, temperature: f64) -> ProbabilityMatrices {
    let (m, n) = scores.shape();
    let mut s2t = scores.clone();
    s2t.scale(1.0 / temperature);
    let mut t2s_t = s2t.transpose();
    for i in 0..m {
        softmax_in_place(s2t.row_mut(i));
    }
    for j in 0..n {
        softmax_in_place(t2s_t.row_mut(j));
    }
    ProbabilityMatrices {
        s2t,
        t2s: t2s_t.transpose(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictConfig {
    pub c: f64,
    pub temperature: f64,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig {
            c: 0.1,
            temperature: 1.0,
        }
    }
}

impl PredictConfig {
    pub fn new(c: f64, temperature: f64) -> Result<Self> {
        let cfg = PredictConfig { c, temperature };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(AlignError::validation(format!("c must be in (0, 1), got {}", self.c)));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(AlignError::validation(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Links whose probabilities in both directions are strictly greater than `c`.
pub fn predict(probs: &ProbabilityMatrices, c: f64) -> AlignmentSet {
    let (m, n) = probs.s2t.shape();
    let mut out = AlignmentSet::new(Granularity::Subword);
    for i in 0..m {
        for j in 0..n {
            if probs.s2t[(i, j)] > c && probs.t2s[(i, j)] > c {
                out.insert((i, j));
            }
        }
    }
    out
}

/// Embeddings to subword links in one call.
pub fn predict_from_embeddings(
    hs: &EmbeddingSequence,
    ht: &EmbeddingSequence,
    cfg: &PredictConfig,
) -> Result<AlignmentSet> {
    let sim = cosine_matrix(hs, ht)?;
    Ok(predict(&softmax_probs(sim.matrix(), cfg.temperature), cfg.c))
}
