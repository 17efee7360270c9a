use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adamw::{adamw_step, AdamWConfig, OptimState};
use super::forward::{backward, forward};
use super::params::{EncoderGrads, EncoderParams};
use crate::alignment::{ensure_within, AlignmentSet, Granularity};
use crate::error::{AlignError, Result};
use crate::io::corpus::CorpusHandle;
use crate::objective::{loss, loss_and_grad, weights_from_probabilities, SupervisionWeights};
use crate::simmat::cosine_matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub dropout_rate: f64,
    pub seed: u64,
    pub temperature: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            epochs: 10,
            batch_size: 8,
            weight_decay: 0.01,
            dropout_rate: 0.0,
            seed: 0,
            temperature: 1.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, v: String| Err(AlignError::validation(format!("{key} {v}")));
        // zero is accepted so a run can be checked against its initial state
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", format!("must be non-negative, got {}", self.learning_rate));
        }
        if self.epochs < 1 {
            return bad("epochs", "must be at least 1".into());
        }
        if self.batch_size < 1 {
            return bad("batch_size", "must be at least 1".into());
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay", format!("must be non-negative, got {}", self.weight_decay));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate", format!("must be in [0, 1), got {}", self.dropout_rate));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature", format!("must be positive, got {}", self.temperature));
        }
        for (key, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(key, format!("must be in [0, 1), got {b}"));
            }
        }
        if !(self.eps > 0.0) {
            return bad("eps", format!("must be positive, got {}", self.eps));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> AdamWConfig {
        AdamWConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of `-L` over the pairs seen in the epoch, at their pre-update values.
    pub mean_neg_loss: f64,
    pub dev_aer: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mean_neg_loss,dev_aer\n");
        for r in &self.epochs {
            let dev = r.dev_aer.map(|a| a.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", r.epoch, r.mean_neg_loss, dev));
        }
        out
    }
}

/// Hook run after every epoch; the returned value is stored as that epoch's dev AER.
pub trait EpochObserver {
    fn after_epoch(&mut self, epoch: usize, params: &EncoderParams) -> Result<Option<f64>>;
}

impl EpochObserver for () {
    fn after_epoch(&mut self, _epoch: usize, _params: &EncoderParams) -> Result<Option<f64>> {
        Ok(None)
    }
}

/// One sentence pair resolved to vocab ids, with its supervision.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    pub src_ids: Vec<usize>,
    pub tgt_ids: Vec<usize>,
    pub supervision: AlignmentSet,
    pub weights: SupervisionWeights,
}

/// Resolves and checks everything training needs, so bad input fails before epoch 1.
pub fn prepare_pairs(
    params: &EncoderParams,
    corpus: &CorpusHandle,
    supervision: &[AlignmentSet],
    weights: Option<&[SupervisionWeights]>,
) -> Result<Vec<TrainingPair>> {
    if supervision.len() != corpus.len() {
        return Err(AlignError::validation(format!(
            "{} supervision sets for {} sentence pairs",
            supervision.len(),
            corpus.len()
        )));
    }
    if let Some(w) = weights {
        if w.len() != corpus.len() {
            return Err(AlignError::validation(format!(
                "{} weight blocks for {} sentence pairs",
                w.len(),
                corpus.len()
            )));
        }
    }
    let mut out = Vec::with_capacity(corpus.len());
    for (k, sup) in supervision.iter().enumerate() {
        let (src, tgt) = (&corpus.src_maps[k], &corpus.tgt_maps[k]);
        let context = |e: AlignError| AlignError::validation(format!("sentence pair {k}: {e}"));
        sup.expect_granularity(Granularity::Subword).map_err(context)?;
        ensure_within(sup, src.subword_count(), tgt.subword_count()).map_err(context)?;
        let w = weights_from_probabilities(sup, weights.map(|w| &w[k])).map_err(context)?;
        out.push(TrainingPair {
            src_ids: params.vocab.ids(src.subword_tokens()).map_err(context)?,
            tgt_ids: params.vocab.ids(tgt.subword_tokens()).map_err(context)?,
            supervision: sup.clone(),
            weights: w,
        });
    }
    Ok(out)
}

fn accumulate_pair(
    params: &EncoderParams,
    pair: &TrainingPair,
    temperature: f64,
    dropout: Option<(f64, &mut ChaCha8Rng)>,
    grads: &mut EncoderGrads,
) -> Result<f64> {
    let (src, tgt) = match dropout {
        Some((rate, rng)) => (
            forward(params, &pair.src_ids, Some((rate, &mut *rng)))?,
            forward(params, &pair.tgt_ids, Some((rate, &mut *rng)))?,
        ),
        None => (
            forward::<ChaCha8Rng>(params, &pair.src_ids, None)?,
            forward::<ChaCha8Rng>(params, &pair.tgt_ids, None)?,
        ),
    };
    let sim = cosine_matrix(&src.output, &tgt.output)?;
    let (value, g) = loss_and_grad(sim.matrix(), &pair.supervision, &pair.weights, temperature)?;
    // M = Hs Ht^T
    let d_hs = g.matmul(tgt.output.matrix())?;
    let d_ht = g.transpose().matmul(src.output.matrix())?;
    backward(params, &src, &d_hs, grads)?;
    backward(params, &tgt, &d_ht, grads)?;
    Ok(value)
}

/// Objective `L` of one pair, without dropout.
pub fn pair_objective(params: &EncoderParams, pair: &TrainingPair, temperature: f64) -> Result<f64> {
    let hs = super::forward::encode(params, &pair.src_ids)?;
    let ht = super::forward::encode(params, &pair.tgt_ids)?;
    let sim = cosine_matrix(&hs, &ht)?;
    loss(sim.matrix(), &pair.supervision, &pair.weights, temperature)
}

/// Summed `L` over `pairs` and its exact gradient (for ascent), without dropout.
pub fn batch_objective_and_grad(
    params: &EncoderParams,
    pairs: &[TrainingPair],
    temperature: f64,
) -> Result<(f64, EncoderGrads)> {
    let mut grads = params.zero_grads();
    let mut total = 0.0;
    for p in pairs {
        total += accumulate_pair(params, p, temperature, None, &mut grads)?;
    }
    Ok((total, grads))
}

/// Fine-tunes a copy of `params_init` to maximize `L` under the given supervision.
pub fn finetune(
    corpus: &CorpusHandle,
    supervision: &[AlignmentSet],
    weights: Option<&[SupervisionWeights]>,
    cfg: &TrainConfig,
    params_init: &EncoderParams,
) -> Result<(EncoderParams, TrainHistory)> {
    finetune_with(corpus, supervision, weights, cfg, params_init, &mut ())
}

pub fn finetune_with(
    corpus: &CorpusHandle,
    supervision: &[AlignmentSet],
    weights: Option<&[SupervisionWeights]>,
    cfg: &TrainConfig,
    params_init: &EncoderParams,
    observer: &mut dyn EpochObserver,
) -> Result<(EncoderParams, TrainHistory)> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(AlignError::validation("cannot fine-tune on an empty corpus"));
    }
    let pairs = prepare_pairs(params_init, corpus, supervision, weights)?;
    let mut params = params_init.clone();
    let mut state = OptimState::new(&params);
    let opt = cfg.optimizer();
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut history = TrainHistory::default();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = params.zero_grads();
            for &k in batch {
                let dropout = (cfg.dropout_rate > 0.0).then_some((cfg.dropout_rate, &mut dropout_rng));
                epoch_loss += accumulate_pair(&params, &pairs[k], cfg.temperature, dropout, &mut grads)?;
            }
            // the optimizer descends, the objective is maximized
            grads.scale(-1.0);
            adamw_step(&mut params, &grads, &mut state, &opt)?;
        }
        let mean_neg_loss = -epoch_loss / pairs.len() as f64;
        let dev_aer = observer.after_epoch(epoch, &params)?;
        debug!("epoch {epoch}: mean -L {mean_neg_loss:.6}, dev AER {dev_aer:?}");
        history.epochs.push(EpochRecord {
            epoch,
            mean_neg_loss,
            dev_aer,
        });
    }
    if let Some(last) = history.epochs.last() {
        info!("fine-tuned {} epochs, final mean -L {:.6}", cfg.epochs, last.mean_neg_loss);
    }
    Ok((params, history))
}
