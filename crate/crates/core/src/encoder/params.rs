use std::collections::HashMap;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{AlignError, Result};
use crate::io::corpus::CorpusHandle;
use crate::matrix::{norm, Matrix};

/// Subword string to row index of the embedding table.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Result<Self> {
        let mut v = Vocab::default();
        for t in tokens {
            if v.index.contains_key(&t) {
                return Err(AlignError::validation(format!("duplicate vocab entry {t:?}")));
            }
            v.push(t);
        }
        Ok(v)
    }

    /// Every subword of every corpus, in order of first appearance.
    pub fn from_corpora(corpora: &[&CorpusHandle]) -> Self {
        let mut v = Vocab::default();
        for c in corpora {
            for map in c.src_maps.iter().chain(&c.tgt_maps) {
                for t in map.subword_tokens() {
                    if !v.index.contains_key(t) {
                        v.push(t.clone());
                    }
                }
            }
        }
        v
    }

    fn push(&mut self, t: String) {
        self.index.insert(t.clone(), self.tokens.len());
        self.tokens.push(t);
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn ids(&self, tokens: &[String]) -> Result<Vec<usize>> {
        tokens
            .iter()
            .map(|t| {
                self.id(t)
                    .ok_or_else(|| AlignError::validation(format!("unknown subword {t:?}")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EncoderKind {
    /// Normalized embedding lookup.
    #[default]
    Static,
    /// Embedding lookup plus one residual single-head self-attention layer.
    Attn1,
}

impl EncoderKind {
    pub fn code(self) -> u32 {
        match self {
            EncoderKind::Static => 0,
            EncoderKind::Attn1 => 1,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(EncoderKind::Static),
            1 => Ok(EncoderKind::Attn1),
            other => Err(AlignError::validation(format!("unknown encoder kind {other}"))),
        }
    }
}

impl FromStr for EncoderKind {
    type Err = AlignError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(EncoderKind::Static),
            "attn1" => Ok(EncoderKind::Attn1),
            other => Err(AlignError::validation(format!("encoder must be static or attn1, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
}

/// Initialization settings for a fresh encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub dim: usize,
    /// Standard deviation of each embedding entry at init. Rows start with
    /// norm about `init_scale * sqrt(dim)`; with Adam's roughly fixed step
    /// size, larger rows rotate more slowly.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            kind: EncoderKind::Static,
            dim: 32,
            init_scale: 3.0,
            seed: 0,
        }
    }
}

const MIN_ROW_NORM: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub vocab: Vocab,
    pub kind: EncoderKind,
    pub embed: Matrix,
    pub attention: Option<Attention>,
}

impl EncoderParams {
    pub fn new(vocab: Vocab, embed: Matrix, attention: Option<Attention>) -> Result<Self> {
        let d = embed.cols();
        if d < 2 {
            return Err(AlignError::validation(format!("embedding dim must be at least 2, got {d}")));
        }
        if embed.rows() != vocab.len() {
            return Err(AlignError::Shape(format!(
                "embedding table has {} rows for {} vocab entries",
                embed.rows(),
                vocab.len()
            )));
        }
        if let Some(a) = &attention {
            for w in [&a.wq, &a.wk, &a.wv] {
                if w.shape() != (d, d) {
                    return Err(AlignError::Shape(format!(
                        "attention weight is {}x{}, expected {d}x{d}",
                        w.rows(),
                        w.cols()
                    )));
                }
            }
        }
        let kind = if attention.is_some() {
            EncoderKind::Attn1
        } else {
            EncoderKind::Static
        };
        Ok(EncoderParams {
            vocab,
            kind,
            embed,
            attention,
        })
    }

    /// Gaussian init; embedding rows shorter than 1e-3 are redrawn.
    pub fn init(vocab: Vocab, cfg: &EncoderConfig) -> Result<Self> {
        let d = cfg.dim;
        if d < 2 {
            return Err(AlignError::validation(format!("dim must be at least 2, got {d}")));
        }
        if !(cfg.init_scale > 0.0 && cfg.init_scale.is_finite()) {
            return Err(AlignError::validation(format!(
                "init_scale must be positive, got {}",
                cfg.init_scale
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let normal = Normal::new(0.0, cfg.init_scale).expect("positive scale");
        let mut embed = Matrix::zeros(vocab.len(), d);
        for i in 0..vocab.len() {
            loop {
                let row = embed.row_mut(i);
                row.iter_mut().for_each(|v| *v = normal.sample(&mut rng));
                if norm(row) >= MIN_ROW_NORM {
                    break;
                }
            }
        }
        let attention = match cfg.kind {
            EncoderKind::Static => None,
            EncoderKind::Attn1 => {
                // keeps Wq e, Wk e and Wv e entries near 0.5 in magnitude
                let std = 0.5 / (cfg.init_scale * (d as f64).sqrt());
                let w = Normal::new(0.0, std).expect("positive scale");
                let mut draw = || {
                    Matrix::from_vec(d, d, (0..d * d).map(|_| w.sample(&mut rng)).collect()).unwrap()
                };
                Some(Attention {
                    wq: draw(),
                    wk: draw(),
                    wv: draw(),
                })
            }
        };
        Self::new(vocab, embed, attention)
    }

    pub fn dim(&self) -> usize {
        self.embed.cols()
    }

    /// Parameter tensors in checkpoint order: embed, then Wq, Wk, Wv.
    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut t = vec![&self.embed];
        if let Some(a) = &self.attention {
            t.extend([&a.wq, &a.wk, &a.wv]);
        }
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut t = vec![&mut self.embed];
        if let Some(a) = &mut self.attention {
            t.extend([&mut a.wq, &mut a.wk, &mut a.wv]);
        }
        t
    }

    pub fn zero_grads(&self) -> EncoderGrads {
        EncoderGrads {
            tensors: self.tensors().iter().map(|t| Matrix::zeros(t.rows(), t.cols())).collect(),
        }
    }

    /// `params += scale * grads`.
    pub fn apply_gradient(&mut self, grads: &EncoderGrads, scale: f64) -> Result<()> {
        grads.check_shapes(self)?;
        for (p, g) in self.tensors_mut().into_iter().zip(&grads.tensors) {
            for (x, dx) in p.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *x += scale * dx;
            }
        }
        Ok(())
    }
}

/// Gradients shaped like [`EncoderParams::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrads {
    pub tensors: Vec<Matrix>,
}

impl EncoderGrads {
    pub fn embed(&self) -> &Matrix {
        &self.tensors[0]
    }

    pub fn add_assign(&mut self, other: &EncoderGrads) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.tensors.iter_mut().for_each(|t| t.scale(s));
    }

    pub fn is_zero(&self) -> bool {
        self.tensors.iter().all(|t| t.as_slice().iter().all(|&v| v == 0.0))
    }

    pub fn check_shapes(&self, params: &EncoderParams) -> Result<()> {
        let expected = params.tensors();
        if expected.len() != self.tensors.len()
            || expected.iter().zip(&self.tensors).any(|(p, g)| p.shape() != g.shape())
        {
            return Err(AlignError::Shape("gradient tensors do not match parameters".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(n: usize) -> Vocab {
        Vocab::from_tokens((0..n).map(|k| format!("t{k}"))).unwrap()
    }

    #[test]
    fn init_is_seeded_and_shaped() {
        let cfg = EncoderConfig {
            kind: EncoderKind::Attn1,
            dim: 4,
            ..EncoderConfig::default()
        };
        let a = EncoderParams::init(vocab(5), &cfg).unwrap();
        let b = EncoderParams::init(vocab(5), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tensors().len(), 4);
        assert_eq!(a.embed.shape(), (5, 4));
        for i in 0..5 {
            assert!(norm(a.embed.row(i)) >= MIN_ROW_NORM);
        }
        let c = EncoderParams::init(vocab(5), &EncoderConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_tiny_dim_and_bad_shapes() {
        let cfg = EncoderConfig { dim: 1, ..EncoderConfig::default() };
        assert!(EncoderParams::init(vocab(2), &cfg).is_err());
        assert!(EncoderParams::new(vocab(2), Matrix::zeros(3, 4), None).is_err());
        let a = Attention {
            wq: Matrix::zeros(4, 4),
            wk: Matrix::zeros(4, 3),
            wv: Matrix::zeros(4, 4),
        };
        assert!(EncoderParams::new(vocab(2), Matrix::zeros(2, 4), Some(a)).is_err());
    }

    #[test]
    fn vocab_lookup() {
        let v = vocab(3);
        assert_eq!(v.ids(&["t2".into(), "t0".into()]).unwrap(), vec![2, 0]);
        assert!(v.ids(&["zz".into()]).is_err());
        assert!(Vocab::from_tokens(["a".to_string(), "a".to_string()]).is_err());
    }
}
