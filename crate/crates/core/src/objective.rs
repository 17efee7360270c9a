//! The bidirectional alignment objective and its gradient with respect to the
//! similarity matrix.
//!
//! For an `m x n` score matrix `M` and supervised links `A'` with weights `w`,
//!
//! ```text
//! L = 1/m * sum_{(i,j) in A'} w_ij * P_s2t(i,j) + 1/n * sum_{(i,j) in A'} w_ij * P_t2s(i,j)
//! ```
//!
//! where `P_s2t` is the row softmax and `P_t2s` the column softmax of
//! `M / temperature`. `L` is maximized; it lies in `[0, 2]`.

use std::collections::BTreeMap;

use crate::alignment::{ensure_within, AlignmentSet, Link};
use crate::error::{AlignError, Result};
use crate::matrix::Matrix;
use crate::simmat::{softmax_probs, ProbabilityMatrices};

/// Per-link weights in `[0, 1]`; links without an entry weigh 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SupervisionWeights {
    weights: BTreeMap<Link, f64>,
}

impl SupervisionWeights {
    pub fn new(weights: BTreeMap<Link, f64>) -> Result<Self> {
        if let Some((l, w)) = weights.iter().find(|(_, w)| !(0.0..=1.0).contains(*w)) {
            return Err(AlignError::validation(format!(
                "weight {w} for link {l:?} is outside [0, 1]"
            )));
        }
        Ok(SupervisionWeights { weights })
    }

    pub fn uniform(supervision: &AlignmentSet, value: f64) -> Result<Self> {
        Self::new(supervision.iter().map(|&l| (l, value)).collect())
    }

    pub fn get(&self, link: &Link) -> f64 {
        self.weights.get(link).copied().unwrap_or(1.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Link, &f64)> + '_ {
        self.weights.iter()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        Self::new(self.weights.iter().map(|(&l, &w)| (l, w * alpha)).collect())
    }
}

/// Materializes the weights used by the objective: all ones when `weights`
/// is absent, otherwise `weights` after checking its keys lie in `supervision`.
pub fn weights_from_probabilities(
    supervision: &AlignmentSet,
    weights: Option<&SupervisionWeights>,
) -> Result<SupervisionWeights> {
    match weights {
        None => SupervisionWeights::uniform(supervision, 1.0),
        Some(w) => {
            if let Some((l, _)) = w.iter().find(|(l, _)| !supervision.contains(l)) {
                return Err(AlignError::validation(format!(
                    "weighted link {l:?} is not in the supervision set"
                )));
            }
            SupervisionWeights::new(w.weights.clone())
        }
    }
}

fn check(scores: &Matrix, supervision: &AlignmentSet) -> Result<()> {
    ensure_within(supervision, scores.rows(), scores.cols())
}

fn loss_from_probs(probs: &ProbabilityMatrices, supervision: &AlignmentSet, weights: &SupervisionWeights) -> f64 {
    let (m, n) = probs.s2t.shape();
    let (mut s2t, mut t2s) = (0.0, 0.0);
    for &(i, j) in supervision.iter() {
        let w = weights.get(&(i, j));
        s2t += w * probs.s2t[(i, j)];
        t2s += w * probs.t2s[(i, j)];
    }
    s2t / m as f64 + t2s / n as f64
}

pub fn loss(
    scores: &Matrix,
    supervision: &AlignmentSet,
    weights: &SupervisionWeights,
    temperature: f64,
) -> Result<f64> {
    check(scores, supervision)?;
    let probs = softmax_probs(scores, temperature);
    Ok(loss_from_probs(&probs, supervision, weights))
}

/// `dL/dM` through both softmax Jacobians.
///
/// Row term: `dL/dM[i][k] = (w_ik * P_ik * [ (i,k) in A' ] - P_ik * r_i) / (m T)`
/// with `r_i = sum_{j:(i,j) in A'} w_ij P_ij`; the column term is symmetric with
/// `1/n`.
pub fn grad_wrt_m(
    scores: &Matrix,
    supervision: &AlignmentSet,
    weights: &SupervisionWeights,
    temperature: f64,
) -> Result<Matrix> {
    Ok(loss_and_grad(scores, supervision, weights, temperature)?.1)
}

pub fn loss_and_grad(
    scores: &Matrix,
    supervision: &AlignmentSet,
    weights: &SupervisionWeights,
    temperature: f64,
) -> Result<(f64, Matrix)> {
    check(scores, supervision)?;
    let (m, n) = scores.shape();
    let probs = softmax_probs(scores, temperature);
    let value = loss_from_probs(&probs, supervision, weights);

    let mut row_mass = vec![0.0; m];
    let mut col_mass = vec![0.0; n];
    for &(i, j) in supervision.iter() {
        let w = weights.get(&(i, j));
        row_mass[i] += w * probs.s2t[(i, j)];
        col_mass[j] += w * probs.t2s[(i, j)];
    }

    let row_scale = 1.0 / (m as f64 * temperature);
    let col_scale = 1.0 / (n as f64 * temperature);
    let mut grad = Matrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            grad[(i, j)] = -row_scale * probs.s2t[(i, j)] * row_mass[i] - col_scale * probs.t2s[(i, j)] * col_mass[j];
        }
    }
    for &(i, j) in supervision.iter() {
        let w = weights.get(&(i, j));
        grad[(i, j)] += row_scale * w * probs.s2t[(i, j)] + col_scale * w * probs.t2s[(i, j)];
    }
    Ok((value, grad))
}
