//! Glue from encoders or exported embeddings to word-level predictions.

use std::collections::BTreeMap;

use crate::alignment::{subwords_from_word_alignment, words_from_subword_alignment, AlignmentSet, GoldAlignment};
use crate::encoder::{encode, EncoderParams, EpochObserver};
use crate::error::{AlignError, Result};
use crate::eval::{corpus_eval, corpus_self_correction, EvalReport, SelfCorrectionRow};
use crate::io::corpus::CorpusHandle;
use crate::io::embeddings::EmbeddingRecordFile;
use crate::objective::SupervisionWeights;
use crate::simmat::{cosine_matrix, predict, softmax_probs, EmbeddingSequence, PredictConfig, ProbabilityMatrices};

/// Threshold candidates used when `c` is selected on a development set.
pub const DEFAULT_C_GRID: [f64; 10] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5];

/// Word-level supervision projected onto each pair's subwords.
pub fn project_to_subwords(corpus: &CorpusHandle, word_sets: &[AlignmentSet]) -> Result<Vec<AlignmentSet>> {
    if word_sets.len() != corpus.len() {
        return Err(AlignError::validation(format!(
            "{} alignment lines for {} sentence pairs",
            word_sets.len(),
            corpus.len()
        )));
    }
    word_sets
        .iter()
        .enumerate()
        .map(|(k, s)| subwords_from_word_alignment(s, &corpus.src_maps[k], &corpus.tgt_maps[k]))
        .collect()
}

/// Every subword link inherits the weight of the word link it expands.
pub fn project_weights_to_subwords(
    corpus: &CorpusHandle,
    word_weights: &[SupervisionWeights],
) -> Result<Vec<SupervisionWeights>> {
    if word_weights.len() != corpus.len() {
        return Err(AlignError::validation(format!(
            "{} weight blocks for {} sentence pairs",
            word_weights.len(),
            corpus.len()
        )));
    }
    word_weights
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let (src, tgt) = (&corpus.src_maps[k], &corpus.tgt_maps[k]);
            let mut out = BTreeMap::new();
            for (&(wi, wj), &value) in w.iter() {
                if wi >= src.word_count() || wj >= tgt.word_count() {
                    return Err(AlignError::validation(format!(
                        "sentence pair {k}: weighted link ({wi}, {wj}) out of bounds"
                    )));
                }
                for i in src.subwords_of(wi) {
                    for j in tgt.subwords_of(wj) {
                        out.insert((i, j), value);
                    }
                }
            }
            SupervisionWeights::new(out)
        })
        .collect()
}

pub fn corpus_probabilities(
    params: &EncoderParams,
    corpus: &CorpusHandle,
    temperature: f64,
) -> Result<Vec<ProbabilityMatrices>> {
    (0..corpus.len())
        .map(|k| {
            let hs = encode(params, &params.vocab.ids(corpus.src_maps[k].subword_tokens())?)?;
            let ht = encode(params, &params.vocab.ids(corpus.tgt_maps[k].subword_tokens())?)?;
            Ok(softmax_probs(cosine_matrix(&hs, &ht)?.matrix(), temperature))
        })
        .collect()
}

/// Probabilities from an embedding file; rows must match the corpus subword counts.
pub fn embedding_probabilities(
    file: &EmbeddingRecordFile,
    corpus: &CorpusHandle,
    temperature: f64,
) -> Result<Vec<ProbabilityMatrices>> {
    if file.records.len() != corpus.len() {
        return Err(AlignError::validation(format!(
            "embedding file has {} records, corpus has {} sentence pairs",
            file.records.len(),
            corpus.len()
        )));
    }
    file.records
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let (ns, nt) = (corpus.src_maps[k].subword_count(), corpus.tgt_maps[k].subword_count());
            if r.source.rows() != ns || r.target.rows() != nt {
                return Err(AlignError::validation(format!(
                    "record {k} has {}x{} rows, corpus pair has {ns}x{nt} subwords",
                    r.source.rows(),
                    r.target.rows()
                )));
            }
            let hs = EmbeddingSequence::normalize(r.source.clone())?;
            let ht = EmbeddingSequence::normalize(r.target.clone())?;
            Ok(softmax_probs(cosine_matrix(&hs, &ht)?.matrix(), temperature))
        })
        .collect()
}

/// Thresholds each pair's probabilities and lifts the links to word level.
pub fn predict_words(probs: &[ProbabilityMatrices], corpus: &CorpusHandle, c: f64) -> Result<Vec<AlignmentSet>> {
    probs
        .iter()
        .enumerate()
        .map(|(k, p)| words_from_subword_alignment(&predict(p, c), &corpus.src_maps[k], &corpus.tgt_maps[k]))
        .collect()
}

pub fn predict_corpus(params: &EncoderParams, corpus: &CorpusHandle, cfg: &PredictConfig) -> Result<Vec<AlignmentSet>> {
    cfg.validate()?;
    predict_words(&corpus_probabilities(params, corpus, cfg.temperature)?, corpus, cfg.c)
}

pub fn evaluate_params(
    params: &EncoderParams,
    corpus: &CorpusHandle,
    gold: &[GoldAlignment],
    cfg: &PredictConfig,
) -> Result<EvalReport> {
    corpus_eval(&predict_corpus(params, corpus, cfg)?, gold)
}

/// The grid value with the lowest AER on `gold`; ties go to the earlier value.
pub fn tune_threshold(
    params: &EncoderParams,
    corpus: &CorpusHandle,
    gold: &[GoldAlignment],
    grid: &[f64],
    temperature: f64,
) -> Result<(f64, EvalReport)> {
    let probs = corpus_probabilities(params, corpus, temperature)?;
    let mut best: Option<(f64, EvalReport)> = None;
    for &c in grid {
        PredictConfig::new(c, temperature)?;
        let report = corpus_eval(&predict_words(&probs, corpus, c)?, gold)?;
        if best.as_ref().is_none_or(|(_, b)| report.aer < b.aer) {
            best = Some((c, report));
        }
    }
    best.ok_or_else(|| AlignError::validation("threshold grid is empty"))
}

/// Reports AER on a held-out set after every epoch.
pub struct DevMonitor<'a> {
    pub corpus: &'a CorpusHandle,
    pub gold: &'a [GoldAlignment],
    pub predict: PredictConfig,
}

impl EpochObserver for DevMonitor<'_> {
    fn after_epoch(&mut self, _epoch: usize, params: &EncoderParams) -> Result<Option<f64>> {
        Ok(Some(evaluate_params(params, self.corpus, self.gold, &self.predict)?.aer))
    }
}

/// Keeps a copy of the parameters after every epoch.
#[derive(Default)]
pub struct Snapshots {
    pub params: Vec<EncoderParams>,
}

impl EpochObserver for Snapshots {
    fn after_epoch(&mut self, _epoch: usize, params: &EncoderParams) -> Result<Option<f64>> {
        self.params.push(params.clone());
        Ok(None)
    }
}

/// Self-correction of the training predictions against the third-party
/// supervision they were trained on, plus held-out AER, for each snapshot.
#[allow(clippy::too_many_arguments)]
pub fn self_correction_series(
    snapshots: &[EncoderParams],
    train: &CorpusHandle,
    third_party: &[AlignmentSet],
    train_gold: &[GoldAlignment],
    heldout: &CorpusHandle,
    heldout_gold: &[GoldAlignment],
    cfg: &PredictConfig,
) -> Result<Vec<SelfCorrectionRow>> {
    snapshots
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let preds = predict_corpus(p, train, cfg)?;
            Ok(SelfCorrectionRow {
                epoch: k + 1,
                report: corpus_self_correction(&preds, third_party, train_gold)?,
                aer: evaluate_params(p, heldout, heldout_gold, cfg)?.aer,
            })
        })
        .collect()
}
