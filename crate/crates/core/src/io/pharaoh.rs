//! Pharaoh alignment text: one line per sentence pair, whitespace-separated
//! `i-j` (sure) and `i?j` (possible) tokens. `p` is accepted as a synonym for `?`.

use std::fs;
use std::path::Path;

use crate::alignment::{AlignmentSet, GoldAlignment, Granularity, Link};
use crate::error::{AlignError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndexBase {
    #[default]
    Zero,
    One,
}

impl IndexBase {
    pub fn from_value(v: u64) -> Result<Self> {
        match v {
            0 => Ok(IndexBase::Zero),
            1 => Ok(IndexBase::One),
            other => Err(AlignError::validation(format!(
                "index_base must be 0 or 1, got {other}"
            ))),
        }
    }

    pub fn offset(self) -> usize {
        match self {
            IndexBase::Zero => 0,
            IndexBase::One => 1,
        }
    }
}

struct ParsedLine {
    sure: Vec<Link>,
    possible: Vec<Link>,
}

fn parse_err(context: &str, line: usize, column: usize, message: String) -> AlignError {
    AlignError::Parse {
        context: context.to_string(),
        line,
        column,
        message,
    }
}

fn parse_links(text: &str, base: IndexBase, context: &str, line_no: usize) -> Result<ParsedLine> {
    let mut sure = Vec::new();
    let mut possible = Vec::new();
    let mut rest = text;
    let mut offset = 0usize;
    loop {
        let trimmed = rest.trim_start();
        offset += rest.len() - trimmed.len();
        if trimmed.is_empty() {
            break;
        }
        let tok_len = trimmed.find(char::is_whitespace).unwrap_or(trimmed.len());
        let tok = &trimmed[..tok_len];
        let column = text[..offset].chars().count() + 1;

        let (sep_pos, is_sure) = match tok.find(['-', '?', 'p']) {
            Some(p) => (p, tok.as_bytes()[p] == b'-'),
            None => {
                return Err(parse_err(context, line_no, column, format!("malformed link {tok:?}")));
            }
        };
        let parse_index = |s: &str| -> Result<usize> {
            if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
                return Err(parse_err(context, line_no, column, format!("malformed link {tok:?}")));
            }
            let raw: usize = s
                .parse()
                .map_err(|_| parse_err(context, line_no, column, format!("index overflow in {tok:?}")))?;
            raw.checked_sub(base.offset()).ok_or_else(|| {
                parse_err(
                    context,
                    line_no,
                    column,
                    format!("link {tok:?} is negative after subtracting index base {}", base.offset()),
                )
            })
        };
        let i = parse_index(&tok[..sep_pos])?;
        let j = parse_index(&tok[sep_pos + 1..])?;
        if is_sure {
            sure.push((i, j));
        } else {
            possible.push((i, j));
        }

        offset += tok_len;
        rest = &trimmed[tok_len..];
    }
    Ok(ParsedLine { sure, possible })
}

/// Parses one gold line. Sure links land in both `S` and `P`.
pub fn parse_pharaoh_line(line: &str, base: IndexBase) -> Result<GoldAlignment> {
    parse_gold_at(line, base, "pharaoh", 1)
}

fn parse_gold_at(line: &str, base: IndexBase, context: &str, line_no: usize) -> Result<GoldAlignment> {
    let parsed = parse_links(line, base, context, line_no)?;
    let sure = AlignmentSet::words(parsed.sure.iter().copied());
    let possible = AlignmentSet::words(parsed.sure.into_iter().chain(parsed.possible));
    GoldAlignment::new(sure, possible)
}

/// Parses one line as a plain link set; sure and possible markers are both kept.
pub fn parse_alignment_line(
    line: &str,
    base: IndexBase,
    granularity: Granularity,
    line_no: usize,
) -> Result<AlignmentSet> {
    let parsed = parse_links(line, base, "pharaoh", line_no)?;
    Ok(AlignmentSet::from_pairs(
        granularity,
        parsed.sure.into_iter().chain(parsed.possible),
    ))
}

fn format_link(out: &mut String, (i, j): Link, sep: char, base: IndexBase) {
    if !out.is_empty() {
        out.push(' ');
    }
    let b = base.offset();
    out.push_str(&format!("{}{sep}{}", i + b, j + b));
}

/// Inverse of [`parse_pharaoh_line`]: links sorted by `(i, j)`, possible-only as `i?j`.
pub fn serialize_pharaoh(gold: &GoldAlignment, base: IndexBase) -> String {
    let mut out = String::new();
    for &link in gold.possible().iter() {
        let sep = if gold.sure().contains(&link) { '-' } else { '?' };
        format_link(&mut out, link, sep, base);
    }
    out
}

pub fn serialize_alignment(set: &AlignmentSet, base: IndexBase) -> String {
    let mut out = String::new();
    for &link in set.iter() {
        format_link(&mut out, link, '-', base);
    }
    out
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| AlignError::io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

pub fn read_gold_file(path: &Path, base: IndexBase) -> Result<Vec<GoldAlignment>> {
    let ctx = path.display().to_string();
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(k, line)| parse_gold_at(line, base, &ctx, k + 1))
        .collect()
}

pub fn read_alignment_file(path: &Path, base: IndexBase, granularity: Granularity) -> Result<Vec<AlignmentSet>> {
    let ctx = path.display().to_string();
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(k, line)| {
            let parsed = parse_links(line, base, &ctx, k + 1)?;
            Ok(AlignmentSet::from_pairs(
                granularity,
                parsed.sure.into_iter().chain(parsed.possible),
            ))
        })
        .collect()
}

fn join_lines<I: IntoIterator<Item = String>>(lines: I) -> String {
    let mut out = String::new();
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

pub fn write_alignment_file(path: &Path, sets: &[AlignmentSet], base: IndexBase) -> Result<()> {
    let text = join_lines(sets.iter().map(|s| serialize_alignment(s, base)));
    fs::write(path, text).map_err(|e| AlignError::io(path, e))
}

pub fn write_gold_file(path: &Path, golds: &[GoldAlignment], base: IndexBase) -> Result<()> {
    let text = join_lines(golds.iter().map(|g| serialize_pharaoh(g, base)));
    fs::write(path, text).map_err(|e| AlignError::io(path, e))
}
