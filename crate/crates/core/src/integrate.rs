//! Combining several third-party aligners into one supervision signal.
//!
//! Every aligner gets a corpus-global credit, `softmax(-dev_aer)` over all
//! aligners. A link's total credit is the sum of the credits of the aligners
//! that emit it; filtering keeps links whose total is above `f`, weighting
//! turns the total into `sigmoid(lambda * (total - f))`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::alignment::{AlignmentSet, Granularity, Link};
use crate::error::{AlignError, Result};
use crate::io::pharaoh::{read_alignment_file, IndexBase};
use crate::objective::SupervisionWeights;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignerRecord {
    pub name: String,
    pub per_sentence: Vec<AlignmentSet>,
    pub dev_aer: f64,
}

impl AlignerRecord {
    pub fn new(name: impl Into<String>, per_sentence: Vec<AlignmentSet>, dev_aer: f64) -> Result<Self> {
        let name = name.into();
        if !(0.0..=1.0).contains(&dev_aer) {
            return Err(AlignError::validation(format!(
                "aligner {name}: dev_aer must be a fraction in [0, 1], got {dev_aer}"
            )));
        }
        Ok(AlignerRecord {
            name,
            per_sentence,
            dev_aer,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CreditTable {
    pub credits: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationConfig {
    pub f: f64,
    pub lambda: f64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig { f: 0.45, lambda: 0.5 }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.f) {
            return Err(AlignError::validation(format!("f must be in [0, 1], got {}", self.f)));
        }
        if !(self.lambda > 0.0) {
            return Err(AlignError::validation(format!("lambda must be positive, got {}", self.lambda)));
        }
        Ok(())
    }
}

pub fn compute_credits(records: &[AlignerRecord]) -> Result<CreditTable> {
    if records.is_empty() {
        return Err(AlignError::validation("at least one aligner is required"));
    }
    let max = records.iter().map(|r| -r.dev_aer).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = records.iter().map(|r| (-r.dev_aer - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(CreditTable {
        credits: exps.into_iter().map(|e| e / sum).collect(),
    })
}

pub fn credit_total(link: Link, sentence: usize, records: &[AlignerRecord], credits: &CreditTable) -> f64 {
    records
        .iter()
        .zip(&credits.credits)
        .filter(|(r, _)| r.per_sentence[sentence].contains(&link))
        .map(|(_, &c)| c)
        .sum()
}

/// Checks the records line up and returns (sentence count, granularity).
fn check_compatible(records: &[AlignerRecord], credits: Option<&CreditTable>) -> Result<(usize, Granularity)> {
    let first = records
        .first()
        .ok_or_else(|| AlignError::validation("at least one aligner is required"))?;
    let n = first.per_sentence.len();
    let gran = first.per_sentence.first().map_or(Granularity::Subword, |s| s.granularity());
    for r in records {
        if r.per_sentence.len() != n {
            return Err(AlignError::validation(format!(
                "aligner {} covers {} sentences, {} covers {n}",
                r.name,
                r.per_sentence.len(),
                first.name
            )));
        }
        for s in &r.per_sentence {
            s.expect_granularity(gran)?;
        }
    }
    if let Some(c) = credits {
        if c.credits.len() != records.len() {
            return Err(AlignError::validation(format!(
                "{} credits for {} aligners",
                c.credits.len(),
                records.len()
            )));
        }
    }
    Ok((n, gran))
}

/// Per sentence, every linked pair with its total credit.
fn link_totals(records: &[AlignerRecord], credits: &CreditTable) -> Result<Vec<BTreeMap<Link, f64>>> {
    let (n, _) = check_compatible(records, Some(credits))?;
    Ok((0..n)
        .map(|k| {
            let mut totals = BTreeMap::new();
            // accumulate in aligner order so sums are reproducible
            for (r, &c) in records.iter().zip(&credits.credits) {
                for &l in r.per_sentence[k].iter() {
                    *totals.entry(l).or_insert(0.0) += c;
                }
            }
            totals
        })
        .collect())
}

pub fn integrate_filter(records: &[AlignerRecord], credits: &CreditTable, f: f64) -> Result<Vec<AlignmentSet>> {
    let (_, gran) = check_compatible(records, Some(credits))?;
    Ok(link_totals(records, credits)?
        .into_iter()
        .map(|t| AlignmentSet::from_pairs(gran, t.into_iter().filter(|&(_, c)| c > f).map(|(l, _)| l)))
        .collect())
}

pub fn sigmoid_weight(total: f64, cfg: &IntegrationConfig) -> f64 {
    1.0 / (1.0 + (-cfg.lambda * (total - cfg.f)).exp())
}

/// Weights over the union of all aligners' links.
pub fn integrate_weight(
    records: &[AlignerRecord],
    credits: &CreditTable,
    cfg: &IntegrationConfig,
) -> Result<Vec<SupervisionWeights>> {
    cfg.validate()?;
    link_totals(records, credits)?
        .into_iter()
        .map(|t| SupervisionWeights::new(t.into_iter().map(|(l, c)| (l, sigmoid_weight(c, cfg))).collect()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMode {
    Union,
    Intersection,
}

pub fn combine_baseline(records: &[AlignerRecord], mode: BaselineMode) -> Result<Vec<AlignmentSet>> {
    let (n, _) = check_compatible(records, None)?;
    (0..n)
        .map(|k| {
            let mut acc = records[0].per_sentence[k].clone();
            for r in &records[1..] {
                acc = match mode {
                    BaselineMode::Union => acc.union(&r.per_sentence[k])?,
                    BaselineMode::Intersection => acc.intersection(&r.per_sentence[k])?,
                };
            }
            Ok(acc)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub name: String,
    pub path: PathBuf,
    pub dev_aer: f64,
}

/// Tab-separated `name<TAB>path<TAB>dev_aer` lines; blank lines and lines
/// starting with `#` are skipped. Relative paths resolve against `dir`.
pub fn parse_manifest(text: &str, dir: &Path, context: &str) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| AlignError::Parse {
            context: context.to_string(),
            line: k + 1,
            column: 1,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected name<TAB>path<TAB>dev_aer, got {} fields", fields.len())));
        }
        let dev_aer: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad dev_aer {:?}", fields[2])))?;
        if !(0.0..=1.0).contains(&dev_aer) {
            return Err(bad(format!("dev_aer {dev_aer} is not a fraction in [0, 1]")));
        }
        let path = Path::new(fields[1].trim());
        out.push(ManifestEntry {
            name: fields[0].trim().to_string(),
            path: if path.is_absolute() { path.to_path_buf() } else { dir.join(path) },
            dev_aer,
        });
    }
    if out.is_empty() {
        return Err(AlignError::validation(format!("{context}: manifest lists no aligners")));
    }
    Ok(out)
}

/// Reads the manifest and every Pharaoh file it lists.
pub fn load_manifest(path: &Path, base: IndexBase, granularity: Granularity) -> Result<Vec<AlignerRecord>> {
    let text = fs::read_to_string(path).map_err(|e| AlignError::io(path, e))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, dir, &path.display().to_string())?
        .into_iter()
        .map(|e| {
            let sets = read_alignment_file(&e.path, base, granularity)?;
            AlignerRecord::new(e.name, sets, e.dev_aer)
        })
        .collect()
}
