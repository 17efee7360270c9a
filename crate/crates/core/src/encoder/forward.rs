//! Forward pass and reverse-mode gradients of the encoder.
//!
//! With `e_i` the embedding row of subword `i`:
//!
//! ```text
//! static: u_i = e_i
//! attn1:  q_i = Wq e_i, k_i = Wk e_i, v_i = Wv e_i
//!         a_ik = softmax_k(q_i . k_k / sqrt(d))
//!         u_i = e_i + sum_k a_ik v_k
//! h_i = u_i / |u_i|
//! ```

use rand::Rng;

use super::params::{EncoderGrads, EncoderParams};
use crate::error::{AlignError, Result};
use crate::matrix::{dot, norm, Matrix};
use crate::simmat::EmbeddingSequence;

struct AttnTrace {
    q: Matrix,
    k: Matrix,
    v: Matrix,
    weights: Matrix,
}

/// Intermediate values of one forward pass, kept for the backward pass.
pub(crate) struct EncodeTrace {
    ids: Vec<usize>,
    inputs: Matrix,
    attn: Option<AttnTrace>,
    /// Inverted-dropout multipliers applied to `u` (training only).
    mask: Option<Matrix>,
    norms: Vec<f64>,
    pub(crate) output: EmbeddingSequence,
}

fn row_softmax(m: &mut Matrix) {
    for i in 0..m.rows() {
        let row = m.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
}

fn check_ids(params: &EncoderParams, ids: &[usize]) -> Result<()> {
    if ids.is_empty() {
        return Err(AlignError::validation("cannot encode an empty sequence"));
    }
    if let Some(&bad) = ids.iter().find(|&&id| id >= params.vocab.len()) {
        return Err(AlignError::validation(format!(
            "unknown subword id {bad} (vocab size {})",
            params.vocab.len()
        )));
    }
    Ok(())
}

pub(crate) fn forward<R: Rng>(
    params: &EncoderParams,
    ids: &[usize],
    dropout: Option<(f64, &mut R)>,
) -> Result<EncodeTrace> {
    check_ids(params, ids)?;
    let d = params.dim();
    let mut inputs = Matrix::zeros(ids.len(), d);
    for (r, &id) in ids.iter().enumerate() {
        inputs.row_mut(r).copy_from_slice(params.embed.row(id));
    }

    let (mut hidden, attn) = match &params.attention {
        None => (inputs.clone(), None),
        Some(a) => {
            let q = inputs.matmul_t(&a.wq)?;
            let k = inputs.matmul_t(&a.wk)?;
            let v = inputs.matmul_t(&a.wv)?;
            let mut weights = q.matmul_t(&k)?;
            weights.scale(1.0 / (d as f64).sqrt());
            row_softmax(&mut weights);
            let mut u = weights.matmul(&v)?;
            u.add_assign(&inputs);
            (u, Some(AttnTrace { q, k, v, weights }))
        }
    };

    let mask = match dropout {
        Some((rate, rng)) if rate > 0.0 => {
            let keep = 1.0 / (1.0 - rate);
            let mut mask = Matrix::zeros(hidden.rows(), d);
            for x in mask.as_mut_slice() {
                *x = if rng.random::<f64>() < rate { 0.0 } else { keep };
            }
            for (h, m) in hidden.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                *h *= m;
            }
            Some(mask)
        }
        _ => None,
    };

    let norms: Vec<f64> = (0..hidden.rows()).map(|i| norm(hidden.row(i))).collect();
    let output = EmbeddingSequence::normalize(hidden)?;
    Ok(EncodeTrace {
        ids: ids.to_vec(),
        inputs,
        attn,
        mask,
        norms,
        output,
    })
}

/// Contextual unit-norm embeddings for a subword id sequence.
pub fn encode(params: &EncoderParams, subword_ids: &[usize]) -> Result<EmbeddingSequence> {
    Ok(forward::<rand::rngs::ThreadRng>(params, subword_ids, None)?.output)
}

/// Accumulates `dL/dparams` into `grads` given `dL/dh` for the traced pass.
pub(crate) fn backward(
    params: &EncoderParams,
    trace: &EncodeTrace,
    dl_dh: &Matrix,
    grads: &mut EncoderGrads,
) -> Result<()> {
    let h = trace.output.matrix();
    if dl_dh.shape() != h.shape() {
        return Err(AlignError::Shape(format!(
            "dL/dH is {}x{}, expected {}x{}",
            dl_dh.rows(),
            dl_dh.cols(),
            h.rows(),
            h.cols()
        )));
    }
    grads.check_shapes(params)?;
    let d = params.dim();

    // through h = u / |u|: du = (g - h (h . g)) / |u|
    let mut du = Matrix::zeros(h.rows(), d);
    for i in 0..h.rows() {
        let (hi, gi) = (h.row(i), dl_dh.row(i));
        let proj = dot(hi, gi);
        let inv = 1.0 / trace.norms[i];
        for ((o, &g), &hv) in du.row_mut(i).iter_mut().zip(gi).zip(hi) {
            *o = (g - hv * proj) * inv;
        }
    }
    if let Some(mask) = &trace.mask {
        for (g, m) in du.as_mut_slice().iter_mut().zip(mask.as_slice()) {
            *g *= m;
        }
    }

    let mut de = du.clone();
    if let (Some(a), Some(t)) = (&params.attention, &trace.attn) {
        let scale = 1.0 / (d as f64).sqrt();
        let dv = t.weights.transpose().matmul(&du)?;
        let da = du.matmul_t(&t.v)?;
        let mut ds = Matrix::zeros(da.rows(), da.cols());
        for i in 0..da.rows() {
            let w = t.weights.row(i);
            let inner = dot(w, da.row(i));
            for ((o, &wv), &dav) in ds.row_mut(i).iter_mut().zip(w).zip(da.row(i)) {
                *o = wv * (dav - inner) * scale;
            }
        }
        let dq = ds.matmul(&t.k)?;
        let dk = ds.transpose().matmul(&t.q)?;

        for (idx, (dproj, w)) in [(1, (&dq, &a.wq)), (2, (&dk, &a.wk)), (3, (&dv, &a.wv))] {
            grads.tensors[idx].add_assign(&dproj.transpose().matmul(&trace.inputs)?);
            de.add_assign(&dproj.matmul(w)?);
        }
    }

    let embed_grad = &mut grads.tensors[0];
    for (r, &id) in trace.ids.iter().enumerate() {
        for (o, &g) in embed_grad.row_mut(id).iter_mut().zip(de.row(r)) {
            *o += g;
        }
    }
    Ok(())
}

/// Exact parameter gradients for `dL/dH` over the encoding of `subword_ids`.
pub fn backprop_through_encoder(
    params: &EncoderParams,
    subword_ids: &[usize],
    dl_dh: &Matrix,
) -> Result<EncoderGrads> {
    let trace = forward::<rand::rngs::ThreadRng>(params, subword_ids, None)?;
    let mut grads = params.zero_grads();
    backward(params, &trace, dl_dh, &mut grads)?;
    Ok(grads)
}
