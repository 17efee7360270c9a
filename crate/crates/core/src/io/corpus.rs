use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::alignment::{SubwordMap, TokenSentencePair};
use crate::error::{AlignError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubwordMode {
    /// Each word becomes a single subword.
    #[default]
    Identity,
    /// Words longer than 4 characters are split into 3-character pieces
    /// starting every 2 characters (`abcdef` -> `abc`, `cde`, `ef`).
    CharBigram,
}

impl FromStr for SubwordMode {
    type Err = AlignError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(SubwordMode::Identity),
            "char_bigram" => Ok(SubwordMode::CharBigram),
            other => Err(AlignError::validation(format!(
                "subword_mode must be identity or char_bigram, got {other:?}"
            ))),
        }
    }
}

pub fn segment_word(word: &str, mode: SubwordMode) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    if mode == SubwordMode::Identity || chars.len() <= 4 {
        return vec![word.to_string()];
    }
    let mut pieces = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + 3).min(chars.len());
        pieces.push(chars[start..end].iter().collect());
        if end == chars.len() {
            break;
        }
        start += 2;
    }
    pieces
}

pub fn subword_map(words: &[String], mode: SubwordMode) -> SubwordMap {
    let mut toks = Vec::new();
    let mut owners = Vec::new();
    for (w, word) in words.iter().enumerate() {
        for piece in segment_word(word, mode) {
            toks.push(piece);
            owners.push(w);
        }
    }
    SubwordMap::new(toks, owners).expect("segmentation yields a valid map for non-empty sentences")
}

/// Sentence pairs with their source and target segmentations.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusHandle {
    pub pairs: Vec<TokenSentencePair>,
    pub src_maps: Vec<SubwordMap>,
    pub tgt_maps: Vec<SubwordMap>,
}

impl CorpusHandle {
    pub fn from_pairs(pairs: Vec<TokenSentencePair>, mode: SubwordMode) -> Self {
        let src_maps = pairs.iter().map(|p| subword_map(&p.source_tokens, mode)).collect();
        let tgt_maps = pairs.iter().map(|p| subword_map(&p.target_tokens, mode)).collect();
        CorpusHandle {
            pairs,
            src_maps,
            tgt_maps,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Keeps the pairs at the given positions, in that order.
    pub fn subset(&self, indices: &[usize]) -> CorpusHandle {
        CorpusHandle {
            pairs: indices.iter().map(|&k| self.pairs[k].clone()).collect(),
            src_maps: indices.iter().map(|&k| self.src_maps[k].clone()).collect(),
            tgt_maps: indices.iter().map(|&k| self.tgt_maps[k].clone()).collect(),
        }
    }
}

fn read_text(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| AlignError::io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

/// Reads two line-aligned, whitespace-tokenized files.
pub fn read_parallel_corpus(src_path: &Path, tgt_path: &Path, mode: SubwordMode) -> Result<CorpusHandle> {
    let src = read_text(src_path)?;
    let tgt = read_text(tgt_path)?;
    if src.len() != tgt.len() {
        return Err(AlignError::validation(format!(
            "line count mismatch: {} has {} lines, {} has {}",
            src_path.display(),
            src.len(),
            tgt_path.display(),
            tgt.len()
        )));
    }
    let mut pairs = Vec::with_capacity(src.len());
    for (k, (s, t)) in src.iter().zip(&tgt).enumerate() {
        let s_toks: Vec<String> = s.split_whitespace().map(str::to_string).collect();
        let t_toks: Vec<String> = t.split_whitespace().map(str::to_string).collect();
        for (toks, path) in [(&s_toks, src_path), (&t_toks, tgt_path)] {
            if toks.is_empty() {
                return Err(AlignError::validation(format!(
                    "{}: line {}: empty sentence",
                    path.display(),
                    k + 1
                )));
            }
        }
        pairs.push(TokenSentencePair::new(s_toks, t_toks, k)?);
    }
    Ok(CorpusHandle::from_pairs(pairs, mode))
}

pub fn write_parallel_corpus(corpus: &CorpusHandle, src_path: &Path, tgt_path: &Path) -> Result<()> {
    let render = |side: fn(&TokenSentencePair) -> &[String]| {
        let mut out = String::new();
        for p in &corpus.pairs {
            out.push_str(&side(p).join(" "));
            out.push('\n');
        }
        out
    };
    fs::write(src_path, render(|p| &p.source_tokens)).map_err(|e| AlignError::io(src_path, e))?;
    fs::write(tgt_path, render(|p| &p.target_tokens)).map_err(|e| AlignError::io(tgt_path, e))
}
