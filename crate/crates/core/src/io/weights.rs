//! Weight sidecar: one block per sentence pair, each block a run of `i j w`
//! lines closed by an empty line. A sentence without weights is a lone empty line.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{AlignError, Result};
use crate::io::pharaoh::IndexBase;
use crate::objective::SupervisionWeights;

pub fn format_weights(blocks: &[SupervisionWeights], base: IndexBase) -> String {
    let b = base.offset();
    let mut out = String::new();
    for block in blocks {
        for (&(i, j), w) in block.iter() {
            out.push_str(&format!("{} {} {w}\n", i + b, j + b));
        }
        out.push('\n');
    }
    out
}

pub fn parse_weights(text: &str, base: IndexBase, context: &str) -> Result<Vec<SupervisionWeights>> {
    let mut blocks = Vec::new();
    let mut current = BTreeMap::new();
    let mut last_line = 0;
    for (k, line) in text.lines().enumerate() {
        last_line = k + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            blocks.push(SupervisionWeights::new(std::mem::take(&mut current))?);
            continue;
        }
        let bad = |message: String| AlignError::Parse {
            context: context.to_string(),
            line: k + 1,
            column: 1,
            message,
        };
        if fields.len() != 3 {
            return Err(bad(format!("expected `i j w`, got {line:?}")));
        }
        let index = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .ok()
                .and_then(|v| v.checked_sub(base.offset()))
                .ok_or_else(|| bad(format!("bad index {s:?}")))
        };
        let i = index(fields[0])?;
        let j = index(fields[1])?;
        let w: f64 = fields[2].parse().map_err(|_| bad(format!("bad weight {:?}", fields[2])))?;
        if !(0.0..=1.0).contains(&w) {
            return Err(bad(format!("weight {w} outside [0, 1]")));
        }
        if current.insert((i, j), w).is_some() {
            return Err(bad(format!("duplicate link {i} {j}")));
        }
    }
    if !current.is_empty() {
        return Err(AlignError::Parse {
            context: context.to_string(),
            line: last_line,
            column: 1,
            message: "last block is not closed by an empty line".into(),
        });
    }
    Ok(blocks)
}

pub fn write_weights_file(path: &Path, blocks: &[SupervisionWeights], base: IndexBase) -> Result<()> {
    fs::write(path, format_weights(blocks, base)).map_err(|e| AlignError::io(path, e))
}

pub fn read_weights_file(path: &Path, base: IndexBase) -> Result<Vec<SupervisionWeights>> {
    let text = fs::read_to_string(path).map_err(|e| AlignError::io(path, e))?;
    parse_weights(&text, base, &path.display().to_string())
}
