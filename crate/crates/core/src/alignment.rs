//! Alignment data types and word/subword granularity conversion.
//!
//! Positions are 0-based throughout. A sentence pair has `m` source positions
//! (rows of every matrix built over it) and `n` target positions (columns).

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;

use crate::error::{AlignError, Result};

/// A (source position, target position) link.
pub type Link = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Granularity {
    Word,
    Subword,
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Granularity::Word => f.write_str("word"),
            Granularity::Subword => f.write_str("subword"),
        }
    }
}

/// A set of links tagged with the granularity of its indices.
///
/// Iteration order is sorted by `(i, j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentSet {
    pairs: BTreeSet<Link>,
    granularity: Granularity,
}

impl AlignmentSet {
    pub fn new(granularity: Granularity) -> Self {
        AlignmentSet {
            pairs: BTreeSet::new(),
            granularity,
        }
    }

    pub fn from_pairs<I: IntoIterator<Item = Link>>(granularity: Granularity, pairs: I) -> Self {
        AlignmentSet {
            pairs: pairs.into_iter().collect(),
            granularity,
        }
    }

    pub fn words<I: IntoIterator<Item = Link>>(pairs: I) -> Self {
        Self::from_pairs(Granularity::Word, pairs)
    }

    pub fn subwords<I: IntoIterator<Item = Link>>(pairs: I) -> Self {
        Self::from_pairs(Granularity::Subword, pairs)
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    /// Returns true if the link was not already present.
    pub fn insert(&mut self, link: Link) -> bool {
        self.pairs.insert(link)
    }

    pub fn remove(&mut self, link: &Link) -> bool {
        self.pairs.remove(link)
    }

    pub fn contains(&self, link: &Link) -> bool {
        self.pairs.contains(link)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Link> + '_ {
        self.pairs.iter()
    }

    pub fn pairs(&self) -> &BTreeSet<Link> {
        &self.pairs
    }

    pub fn expect_granularity(&self, expected: Granularity) -> Result<()> {
        if self.granularity == expected {
            Ok(())
        } else {
            Err(AlignError::Granularity {
                expected,
                found: self.granularity,
            })
        }
    }

    fn same_granularity(&self, other: &AlignmentSet) -> Result<()> {
        other.expect_granularity(self.granularity)
    }

    pub fn union(&self, other: &AlignmentSet) -> Result<AlignmentSet> {
        self.same_granularity(other)?;
        Ok(Self::from_pairs(
            self.granularity,
            self.pairs.union(&other.pairs).copied(),
        ))
    }

    pub fn intersection(&self, other: &AlignmentSet) -> Result<AlignmentSet> {
        self.same_granularity(other)?;
        Ok(Self::from_pairs(
            self.granularity,
            self.pairs.intersection(&other.pairs).copied(),
        ))
    }

    pub fn difference(&self, other: &AlignmentSet) -> Result<AlignmentSet> {
        self.same_granularity(other)?;
        Ok(Self::from_pairs(
            self.granularity,
            self.pairs.difference(&other.pairs).copied(),
        ))
    }

    pub fn is_subset(&self, other: &AlignmentSet) -> Result<bool> {
        self.same_granularity(other)?;
        Ok(self.pairs.is_subset(&other.pairs))
    }

    /// Count of links shared with `other`.
    pub fn overlap(&self, other: &AlignmentSet) -> Result<usize> {
        self.same_granularity(other)?;
        Ok(self.pairs.intersection(&other.pairs).count())
    }
}

impl<'a> IntoIterator for &'a AlignmentSet {
    type Item = &'a Link;
    type IntoIter = std::collections::btree_set::Iter<'a, Link>;

    fn into_iter(self) -> Self::IntoIter {
        self.pairs.iter()
    }
}

/// Lists every link with `i >= src_len` or `j >= tgt_len`.
pub fn validate_alignment(
    align: &AlignmentSet,
    src_len: usize,
    tgt_len: usize,
) -> std::result::Result<(), Vec<Link>> {
    let violations: Vec<Link> = align
        .iter()
        .filter(|&&(i, j)| i >= src_len || j >= tgt_len)
        .copied()
        .collect();
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Like [`validate_alignment`] but reports the first violation as an error.
pub fn ensure_within(align: &AlignmentSet, rows: usize, cols: usize) -> Result<()> {
    validate_alignment(align, rows, cols).map_err(|v| {
        let (i, j) = v[0];
        AlignError::OutOfBounds { i, j, rows, cols }
    })
}

/// One parallel sentence pair of whitespace-free word tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSentencePair {
    pub source_tokens: Vec<String>,
    pub target_tokens: Vec<String>,
    pub pair_id: usize,
}

impl TokenSentencePair {
    pub fn new(source_tokens: Vec<String>, target_tokens: Vec<String>, pair_id: usize) -> Result<Self> {
        for (side, toks) in [("source", &source_tokens), ("target", &target_tokens)] {
            if toks.is_empty() {
                return Err(AlignError::validation(format!(
                    "pair {pair_id}: empty {side} sentence"
                )));
            }
            if let Some(t) = toks.iter().find(|t| t.is_empty() || t.chars().any(char::is_whitespace)) {
                return Err(AlignError::validation(format!(
                    "pair {pair_id}: invalid {side} token {t:?}"
                )));
            }
        }
        Ok(TokenSentencePair {
            source_tokens,
            target_tokens,
            pair_id,
        })
    }

    pub fn source_len(&self) -> usize {
        self.source_tokens.len()
    }

    pub fn target_len(&self) -> usize {
        self.target_tokens.len()
    }
}

/// Subword segmentation of one sentence and the word each subword came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordMap {
    subword_tokens: Vec<String>,
    word_of_subword: Vec<usize>,
}

impl SubwordMap {
    pub fn new(subword_tokens: Vec<String>, word_of_subword: Vec<usize>) -> Result<Self> {
        if subword_tokens.len() != word_of_subword.len() {
            return Err(AlignError::validation(format!(
                "subword map has {} tokens but {} word indices",
                subword_tokens.len(),
                word_of_subword.len()
            )));
        }
        if word_of_subword.first() != Some(&0) {
            return Err(AlignError::validation(
                "subword map must be non-empty and start at word 0",
            ));
        }
        for w in word_of_subword.windows(2) {
            if w[1] < w[0] || w[1] > w[0] + 1 {
                return Err(AlignError::validation(format!(
                    "subword map word indices must step by 0 or 1, found {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(SubwordMap {
            subword_tokens,
            word_of_subword,
        })
    }

    /// One subword per word.
    pub fn identity(words: &[String]) -> Self {
        SubwordMap {
            subword_tokens: words.to_vec(),
            word_of_subword: (0..words.len()).collect(),
        }
    }

    pub fn subword_tokens(&self) -> &[String] {
        &self.subword_tokens
    }

    pub fn word_of_subword(&self) -> &[usize] {
        &self.word_of_subword
    }

    pub fn subword_count(&self) -> usize {
        self.word_of_subword.len()
    }

    pub fn word_count(&self) -> usize {
        self.word_of_subword.last().map_or(0, |w| w + 1)
    }

    /// Subword positions owned by word `word`.
    pub fn subwords_of(&self, word: usize) -> Range<usize> {
        let start = self.word_of_subword.partition_point(|&w| w < word);
        let end = self.word_of_subword.partition_point(|&w| w <= word);
        start..end
    }
}

/// Gold links: sure `S` and possible `P`, with `S ⊆ P`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldAlignment {
    sure: AlignmentSet,
    possible: AlignmentSet,
}

impl GoldAlignment {
    /// Sure links missing from `possible` are added to it.
    pub fn new(sure: AlignmentSet, possible: AlignmentSet) -> Result<Self> {
        sure.expect_granularity(Granularity::Word)?;
        possible.expect_granularity(Granularity::Word)?;
        let mut possible = possible;
        let missing = sure.iter().filter(|l| !possible.contains(l)).count();
        if missing > 0 {
            log::warn!("{missing} sure link(s) were not marked possible; adding them to P");
            for &l in sure.iter() {
                possible.insert(l);
            }
        }
        Ok(GoldAlignment { sure, possible })
    }

    /// Gold where every link is sure (`S = P`).
    pub fn from_sure(sure: AlignmentSet) -> Result<Self> {
        let possible = sure.clone();
        Self::new(sure, possible)
    }

    pub fn empty() -> Self {
        GoldAlignment {
            sure: AlignmentSet::new(Granularity::Word),
            possible: AlignmentSet::new(Granularity::Word),
        }
    }

    pub fn sure(&self) -> &AlignmentSet {
        &self.sure
    }

    pub fn possible(&self) -> &AlignmentSet {
        &self.possible
    }
}

/// Two words are aligned if any of their subwords are.
pub fn words_from_subword_alignment(
    subword_align: &AlignmentSet,
    src_map: &SubwordMap,
    tgt_map: &SubwordMap,
) -> Result<AlignmentSet> {
    subword_align.expect_granularity(Granularity::Subword)?;
    ensure_within(subword_align, src_map.subword_count(), tgt_map.subword_count())?;
    Ok(AlignmentSet::words(subword_align.iter().map(|&(i, j)| {
        (src_map.word_of_subword[i], tgt_map.word_of_subword[j])
    })))
}

/// Expands each word link to every (source subword, target subword) combination.
pub fn subwords_from_word_alignment(
    word_align: &AlignmentSet,
    src_map: &SubwordMap,
    tgt_map: &SubwordMap,
) -> Result<AlignmentSet> {
    word_align.expect_granularity(Granularity::Word)?;
    ensure_within(word_align, src_map.word_count(), tgt_map.word_count())?;
    let mut out = AlignmentSet::new(Granularity::Subword);
    for &(wi, wj) in word_align.iter() {
        for i in src_map.subwords_of(wi) {
            for j in tgt_map.subwords_of(wj) {
                out.insert((i, j));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(words: &[usize]) -> SubwordMap {
        let toks = words.iter().map(|w| format!("s{w}")).collect();
        SubwordMap::new(toks, words.to_vec()).unwrap()
    }

    #[test]
    fn subwords_collapse_to_their_word() {
        let a = AlignmentSet::subwords([(0, 0), (1, 0)]);
        let w = words_from_subword_alignment(&a, &map(&[0, 0]), &map(&[0])).unwrap();
        assert_eq!(w, AlignmentSet::words([(0, 0)]));

        let a = AlignmentSet::subwords([(1, 0), (2, 1)]);
        let w = words_from_subword_alignment(&a, &map(&[0, 0, 1]), &map(&[0, 1])).unwrap();
        assert_eq!(w, AlignmentSet::words([(0, 0), (1, 1)]));
    }

    #[test]
    fn empty_conversions() {
        let m = map(&[0, 1]);
        let w = words_from_subword_alignment(&AlignmentSet::new(Granularity::Subword), &m, &m).unwrap();
        assert!(w.is_empty());
        let s = subwords_from_word_alignment(&AlignmentSet::new(Granularity::Word), &m, &m).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn out_of_bounds_subword_is_named() {
        let a = AlignmentSet::subwords([(0, 0), (3, 0)]);
        let err = words_from_subword_alignment(&a, &map(&[0, 0]), &map(&[0])).unwrap_err();
        assert!(err.to_string().contains("(3, 0)"), "{err}");
    }

    #[test]
    fn word_links_expand_cartesian() {
        let a = AlignmentSet::words([(0, 0)]);
        let s = subwords_from_word_alignment(&a, &map(&[0, 0]), &map(&[0])).unwrap();
        assert_eq!(s, AlignmentSet::subwords([(0, 0), (1, 0)]));

        let a = AlignmentSet::words([(0, 0), (1, 1)]);
        let s = subwords_from_word_alignment(&a, &map(&[0, 1]), &map(&[0, 1])).unwrap();
        assert_eq!(s, AlignmentSet::subwords([(0, 0), (1, 1)]));

        let err = subwords_from_word_alignment(&AlignmentSet::words([(2, 0)]), &map(&[0, 1]), &map(&[0]));
        assert!(matches!(err, Err(AlignError::OutOfBounds { .. })));
    }

    #[test]
    fn mixing_granularities_is_rejected() {
        let w = AlignmentSet::words([(0, 0)]);
        let s = AlignmentSet::subwords([(0, 0)]);
        assert!(matches!(w.union(&s), Err(AlignError::Granularity { .. })));
        assert!(words_from_subword_alignment(&w, &map(&[0]), &map(&[0])).is_err());
    }

    #[test]
    fn validation_lists_violations() {
        assert_eq!(validate_alignment(&AlignmentSet::words([(0, 0)]), 1, 1), Ok(()));
        assert_eq!(
            validate_alignment(&AlignmentSet::words([(2, 0)]), 2, 3),
            Err(vec![(2, 0)])
        );
        assert_eq!(validate_alignment(&AlignmentSet::new(Granularity::Word), 1, 1), Ok(()));
    }

    #[test]
    fn subword_map_invariants() {
        assert!(SubwordMap::new(vec!["a".into(), "b".into()], vec![0, 2]).is_err());
        assert!(SubwordMap::new(vec!["a".into()], vec![1]).is_err());
        assert!(SubwordMap::new(vec![], vec![]).is_err());
        let m = map(&[0, 0, 1, 2, 2, 2]);
        assert_eq!(m.word_count(), 3);
        assert_eq!(m.subwords_of(0), 0..2);
        assert_eq!(m.subwords_of(2), 3..6);
    }

    #[test]
    fn gold_unions_sure_into_possible() {
        let g = GoldAlignment::new(AlignmentSet::words([(0, 0)]), AlignmentSet::words([(1, 1)])).unwrap();
        assert_eq!(g.possible(), &AlignmentSet::words([(0, 0), (1, 1)]));
    }

    #[test]
    fn sentence_pair_rejects_empty_and_whitespace() {
        assert!(TokenSentencePair::new(vec![], vec!["x".into()], 0).is_err());
        assert!(TokenSentencePair::new(vec!["a b".into()], vec!["x".into()], 0).is_err());
        assert!(TokenSentencePair::new(vec!["a".into()], vec!["x".into()], 0).is_ok());
    }

    fn arb_map() -> impl Strategy<Value = SubwordMap> {
        prop::collection::vec(1usize..4, 1..6).prop_map(|sizes| {
            let words: Vec<usize> = sizes
                .iter()
                .enumerate()
                .flat_map(|(w, &k)| std::iter::repeat_n(w, k))
                .collect();
            map(&words)
        })
    }

    fn arb_case() -> impl Strategy<Value = (SubwordMap, SubwordMap, AlignmentSet, (usize, usize))> {
        (arb_map(), arb_map()).prop_flat_map(|(s, t)| {
            let (m, n) = (s.word_count(), t.word_count());
            (
                Just(s),
                Just(t),
                prop::collection::btree_set((0..m, 0..n), 0..(m * n + 1)),
                (0..m, 0..n),
            )
                .prop_map(|(s, t, pairs, extra)| (s, t, AlignmentSet::words(pairs), extra))
        })
    }

    proptest! {
        #[test]
        fn word_round_trip_is_identity((s, t, w, _) in arb_case()) {
            let sub = subwords_from_word_alignment(&w, &s, &t).unwrap();
            prop_assert!(sub.len() >= w.len());
            let back = words_from_subword_alignment(&sub, &s, &t).unwrap();
            prop_assert!(back.len() <= sub.len());
            prop_assert_eq!(back, w);
        }

        #[test]
        fn conversions_are_monotone((s, t, w, extra) in arb_case()) {
            let mut bigger = w.clone();
            bigger.insert(extra);
            let a = subwords_from_word_alignment(&w, &s, &t).unwrap();
            let b = subwords_from_word_alignment(&bigger, &s, &t).unwrap();
            prop_assert!(a.is_subset(&b).unwrap());
            let a2 = words_from_subword_alignment(&a, &s, &t).unwrap();
            let b2 = words_from_subword_alignment(&b, &s, &t).unwrap();
            prop_assert!(a2.is_subset(&b2).unwrap());
        }
    }
}
