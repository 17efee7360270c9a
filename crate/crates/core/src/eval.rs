//! Alignment error rate, precision/recall and the self-correction metrics.
//!
//! Corpus scores are micro-averaged: counts are pooled over sentences before
//! dividing. Ratios with a zero denominator are `None`, never 0.

use std::fmt::Write as _;

use crate::alignment::{AlignmentSet, GoldAlignment, Granularity};
use crate::error::{AlignError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounts {
    pub predicted: usize,
    pub sure: usize,
    pub possible: usize,
    pub hit_sure: usize,
    pub hit_possible: usize,
}

impl EvalCounts {
    pub fn of(pred: &AlignmentSet, gold: &GoldAlignment) -> Result<Self> {
        pred.expect_granularity(Granularity::Word)?;
        Ok(EvalCounts {
            predicted: pred.len(),
            sure: gold.sure().len(),
            possible: gold.possible().len(),
            hit_sure: pred.overlap(gold.sure())?,
            hit_possible: pred.overlap(gold.possible())?,
        })
    }

    pub fn add(&mut self, o: &EvalCounts) {
        self.predicted += o.predicted;
        self.sure += o.sure;
        self.possible += o.possible;
        self.hit_sure += o.hit_sure;
        self.hit_possible += o.hit_possible;
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    /// 0 when there is nothing to predict and nothing was predicted.
    pub aer: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub counts: EvalCounts,
}

impl EvalReport {
    pub fn from_counts(c: EvalCounts) -> Self {
        let den = c.predicted + c.sure;
        let aer = if den == 0 {
            0.0
        } else {
            1.0 - (c.hit_sure + c.hit_possible) as f64 / den as f64
        };
        EvalReport {
            aer,
            precision: ratio(c.hit_possible, c.predicted),
            recall: ratio(c.hit_sure, c.sure),
            counts: c,
        }
    }

    /// `metric,value,numerator,denominator`; the aer row carries the
    /// numerator and denominator of the subtracted ratio.
    pub fn to_csv(&self) -> String {
        let c = &self.counts;
        let mut out = String::from(CSV_HEADER);
        push_row(&mut out, "aer", Some(self.aer), c.hit_sure + c.hit_possible, c.predicted + c.sure);
        push_row(&mut out, "precision", self.precision, c.hit_possible, c.predicted);
        push_row(&mut out, "recall", self.recall, c.hit_sure, c.sure);
        out
    }
}

pub const CSV_HEADER: &str = "metric,value,numerator,denominator\n";

/// Printed in place of a ratio with a zero denominator.
pub const UNDEFINED: &str = "undefined";

pub fn format_value(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:?}"),
        None => UNDEFINED.to_string(),
    }
}

fn push_row(out: &mut String, metric: &str, value: Option<f64>, num: usize, den: usize) {
    let _ = writeln!(out, "{metric},{},{num},{den}", format_value(value));
}

pub fn aer(pred: &AlignmentSet, gold: &GoldAlignment) -> Result<f64> {
    Ok(EvalReport::from_counts(EvalCounts::of(pred, gold)?).aer)
}

pub fn precision_recall(pred: &AlignmentSet, gold: &GoldAlignment) -> Result<(Option<f64>, Option<f64>)> {
    let r = EvalReport::from_counts(EvalCounts::of(pred, gold)?);
    Ok((r.precision, r.recall))
}

fn check_lengths(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(AlignError::validation(format!("{what}: {a} predicted sentences vs {b} gold sentences")));
    }
    if a == 0 {
        return Err(AlignError::validation(format!("{what}: empty corpus")));
    }
    Ok(())
}

pub fn corpus_eval(preds: &[AlignmentSet], golds: &[GoldAlignment]) -> Result<EvalReport> {
    check_lengths("evaluation", preds.len(), golds.len())?;
    let mut total = EvalCounts::default();
    for (p, g) in preds.iter().zip(golds) {
        total.add(&EvalCounts::of(p, g)?);
    }
    Ok(EvalReport::from_counts(total))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SelfCorrectionCounts {
    /// |pred \ third| and how many of those are in P.
    pub new_total: usize,
    pub new_correct: usize,
    /// |third \ pred| and how many of those are not in P.
    pub del_total: usize,
    pub del_wrong: usize,
    /// |third ∩ pred| and how many of those are in P.
    pub remain_total: usize,
    pub remain_correct: usize,
}

impl SelfCorrectionCounts {
    pub fn of(pred: &AlignmentSet, third: &AlignmentSet, gold: &GoldAlignment) -> Result<Self> {
        pred.expect_granularity(Granularity::Word)?;
        third.expect_granularity(Granularity::Word)?;
        let p = gold.possible();
        let added = pred.difference(third)?;
        let deleted = third.difference(pred)?;
        let kept = third.intersection(pred)?;
        Ok(SelfCorrectionCounts {
            new_total: added.len(),
            new_correct: added.overlap(p)?,
            del_total: deleted.len(),
            del_wrong: deleted.len() - deleted.overlap(p)?,
            remain_total: kept.len(),
            remain_correct: kept.overlap(p)?,
        })
    }

    pub fn add(&mut self, o: &SelfCorrectionCounts) {
        self.new_total += o.new_total;
        self.new_correct += o.new_correct;
        self.del_total += o.del_total;
        self.del_wrong += o.del_wrong;
        self.remain_total += o.remain_total;
        self.remain_correct += o.remain_correct;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfCorrectionReport {
    pub new_precision: Option<f64>,
    pub del_rate: Option<f64>,
    pub remain_precision: Option<f64>,
    pub counts: SelfCorrectionCounts,
}

impl SelfCorrectionReport {
    pub fn from_counts(c: SelfCorrectionCounts) -> Self {
        SelfCorrectionReport {
            new_precision: ratio(c.new_correct, c.new_total),
            del_rate: ratio(c.del_wrong, c.del_total),
            remain_precision: ratio(c.remain_correct, c.remain_total),
            counts: c,
        }
    }

    pub fn to_csv(&self) -> String {
        let c = &self.counts;
        let mut out = String::from(CSV_HEADER);
        push_row(&mut out, "new", self.new_precision, c.new_correct, c.new_total);
        push_row(&mut out, "del", self.del_rate, c.del_wrong, c.del_total);
        push_row(&mut out, "remain", self.remain_precision, c.remain_correct, c.remain_total);
        out
    }
}

pub fn self_correction(pred: &AlignmentSet, third: &AlignmentSet, gold: &GoldAlignment) -> Result<SelfCorrectionReport> {
    Ok(SelfCorrectionReport::from_counts(SelfCorrectionCounts::of(pred, third, gold)?))
}

pub fn corpus_self_correction(
    preds: &[AlignmentSet],
    thirds: &[AlignmentSet],
    golds: &[GoldAlignment],
) -> Result<SelfCorrectionReport> {
    check_lengths("self-correction", preds.len(), golds.len())?;
    check_lengths("self-correction", thirds.len(), golds.len())?;
    let mut total = SelfCorrectionCounts::default();
    for ((p, t), g) in preds.iter().zip(thirds).zip(golds) {
        total.add(&SelfCorrectionCounts::of(p, t, g)?);
    }
    Ok(SelfCorrectionReport::from_counts(total))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfCorrectionRow {
    pub epoch: usize,
    pub report: SelfCorrectionReport,
    pub aer: f64,
}

/// `epoch,new,del,remain,aer`, one line per row.
pub fn self_correction_series_csv(rows: &[SelfCorrectionRow]) -> String {
    let mut out = String::from("epoch,new,del,remain,aer\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:?}",
            r.epoch,
            format_value(r.report.new_precision),
            format_value(r.report.del_rate),
            format_value(r.report.remain_precision),
            r.aer
        );
    }
    out
}
