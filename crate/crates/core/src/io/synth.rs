//! Seeded synthetic parallel corpora with known gold alignments and noisy
//! third-party supervision.
//!
//! Source tokens are `w<k>` with `k` uniform in `0..vocab_size`; the target
//! token for `w<k>` is always `v<k>`. The target sentence is the source order
//! after a left-to-right pass of adjacent swaps, so gold is a bijection.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alignment::{AlignmentSet, GoldAlignment, Link, TokenSentencePair};
use crate::error::{AlignError, Result};
use crate::io::corpus::{CorpusHandle, SubwordMode};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub vocab_size: usize,
    pub pair_count: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability of swapping each adjacent target pair.
    pub swap_rate: f64,
    /// Share of gold links per sentence replaced by wrong links.
    pub corruption_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            vocab_size: 200,
            pair_count: 2000,
            min_len: 8,
            max_len: 12,
            swap_rate: 0.3,
            corruption_rate: 0.0,
            seed: 0,
        }
    }
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(AlignError::validation(format!("{name} must be in [0, 1], got {v}")))
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 {
            return Err(AlignError::validation("vocab must be at least 1"));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(AlignError::validation(format!(
                "need 1 <= min_len <= max_len, got min_len {} and max_len {}",
                self.min_len, self.max_len
            )));
        }
        check_rate("swap", self.swap_rate)?;
        check_rate("corruption", self.corruption_rate)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: CorpusHandle,
    pub gold: Vec<GoldAlignment>,
    /// Word-level corrupted copy of each gold sure set.
    pub supervision: Vec<AlignmentSet>,
}

/// Number of links to corrupt: `rate * count` rounded half-up.
pub fn corrupted_link_count(rate: f64, count: usize) -> usize {
    (rate * count as f64 + 0.5).floor() as usize
}

/// All in-bounds links of an `m x n` pair that are not in `exclude`.
fn links_outside(m: usize, n: usize, exclude: &AlignmentSet) -> Vec<Link> {
    (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|l| !exclude.contains(l))
        .collect()
}

fn corrupt(gold: &AlignmentSet, m: usize, n: usize, rate: f64, rng: &mut ChaCha8Rng) -> AlignmentSet {
    let wrong = links_outside(m, n, gold);
    let r = corrupted_link_count(rate, gold.len()).min(wrong.len());
    let mut kept: Vec<Link> = gold.iter().copied().collect();
    kept.shuffle(rng);
    kept.truncate(gold.len() - r);
    let mut added = wrong;
    let (chosen, _) = added.partial_shuffle(rng, r);
    AlignmentSet::words(kept.into_iter().chain(chosen.iter().copied()))
}

pub fn synthesize_corpus(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pairs = Vec::with_capacity(spec.pair_count);
    let mut gold = Vec::with_capacity(spec.pair_count);
    let mut supervision = Vec::with_capacity(spec.pair_count);
    for pair_id in 0..spec.pair_count {
        let len = rng.random_range(spec.min_len..=spec.max_len);
        let ids: Vec<usize> = (0..len).map(|_| rng.random_range(0..spec.vocab_size)).collect();
        // order[j] = source position realised at target position j
        let mut order: Vec<usize> = (0..len).collect();
        for k in 0..len.saturating_sub(1) {
            if rng.random::<f64>() < spec.swap_rate {
                order.swap(k, k + 1);
            }
        }
        let source: Vec<String> = ids.iter().map(|k| format!("w{k}")).collect();
        let target: Vec<String> = order.iter().map(|&i| format!("v{}", ids[i])).collect();
        let sure = AlignmentSet::words(order.iter().enumerate().map(|(j, &i)| (i, j)));
        let sup = corrupt(&sure, len, len, spec.corruption_rate, &mut rng);
        pairs.push(TokenSentencePair::new(source, target, pair_id)?);
        gold.push(GoldAlignment::from_sure(sure)?);
        supervision.push(sup);
    }
    Ok(SyntheticCorpus {
        corpus: CorpusHandle::from_pairs(pairs, SubwordMode::Identity),
        gold,
        supervision,
    })
}

/// Behaviour of a simulated third-party aligner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignerProfile {
    /// Probability that each gold sure link is emitted.
    pub recall: f64,
    /// Wrong links emitted per sentence, as a fraction of the gold link count.
    pub noise: f64,
}

/// Emits a noisy copy of each gold sure set: links dropped independently at
/// `1 - recall`, plus `noise * |S|` (rounded half-up) distinct wrong links.
pub fn simulate_aligner(
    corpus: &CorpusHandle,
    gold: &[GoldAlignment],
    profile: AlignerProfile,
    seed: u64,
) -> Result<Vec<AlignmentSet>> {
    check_rate("recall", profile.recall)?;
    if profile.noise < 0.0 {
        return Err(AlignError::validation("noise must be non-negative"));
    }
    if gold.len() != corpus.len() {
        return Err(AlignError::validation("gold and corpus lengths differ"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(gold.len());
    for (pair, g) in corpus.pairs.iter().zip(gold) {
        let mut set = AlignmentSet::words(g.sure().iter().copied().filter(|_| rng.random::<f64>() < profile.recall));
        let mut wrong = links_outside(pair.source_len(), pair.target_len(), g.possible());
        let r = corrupted_link_count(profile.noise, g.sure().len()).min(wrong.len());
        let (chosen, _) = wrong.partial_shuffle(&mut rng, r);
        for &l in chosen.iter() {
            set.insert(l);
        }
        out.push(set);
    }
    Ok(out)
}
