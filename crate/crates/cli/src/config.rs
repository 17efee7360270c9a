//! Every tunable is a key in [`KEYS`]. A key is settable as `--key VALUE` or
//! as `key = value` in the file given by `--config`; flags beat the file and
//! the file beats the defaults listed here.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::parser::ValueSource;
use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::error::CliError;

pub struct Key {
    pub name: &'static str,
    /// `None` for keys that have no default (paths, mostly).
    pub default: Option<&'static str>,
    pub help: &'static str,
    pub commands: &'static [&'static str],
}

const GEN: &[&str] = &["generate"];
const TRAIN: &[&str] = &["finetune"];
const TRAIN_EXTRACT: &[&str] = &["finetune", "extract"];
const CORPUS: &[&str] = &["finetune", "extract"];
const PHARAOH: &[&str] = &["finetune", "extract", "integrate", "evaluate", "selfcorrect"];
const INTEGRATE: &[&str] = &["integrate"];

pub const KEYS: &[Key] = &[
    // generate
    Key { name: "vocab", default: Some("200"), help: "Source vocabulary size", commands: GEN },
    Key { name: "pairs", default: Some("2000"), help: "Number of sentence pairs", commands: GEN },
    Key { name: "min-len", default: Some("8"), help: "Shortest sentence length", commands: GEN },
    Key { name: "max-len", default: Some("12"), help: "Longest sentence length", commands: GEN },
    Key { name: "swap", default: Some("0.3"), help: "Probability of swapping each adjacent target pair", commands: GEN },
    Key { name: "corruption", default: Some("0"), help: "Share of supervision links replaced by wrong links", commands: GEN },
    Key { name: "out", default: None, help: "Output directory (generate) or output file (extract, integrate; stdout if unset)", commands: &["generate", "extract", "integrate"] },
    // corpus and alignment files
    Key { name: "src", default: None, help: "Source side of the corpus, one sentence per line", commands: CORPUS },
    Key { name: "tgt", default: None, help: "Target side of the corpus", commands: CORPUS },
    Key { name: "subword-mode", default: Some("identity"), help: "Subword segmentation: identity or char_bigram", commands: CORPUS },
    Key { name: "index-base", default: Some("0"), help: "Index base of Pharaoh files: 0 or 1", commands: PHARAOH },
    // finetune
    Key { name: "supervision", default: None, help: "Third-party alignments (Pharaoh) used as training signal", commands: TRAIN },
    Key { name: "supervision-granularity", default: Some("word"), help: "Whether supervision indices are words or subwords", commands: TRAIN },
    Key { name: "weights", default: None, help: "Optional per-link weight sidecar; switches to the weighted objective", commands: TRAIN },
    Key { name: "encoder", default: Some("static"), help: "Encoder kind: static or attn1", commands: TRAIN },
    Key { name: "dim", default: Some("32"), help: "Embedding dimension", commands: TRAIN },
    Key { name: "init-scale", default: Some("3"), help: "Standard deviation of embedding entries at init", commands: TRAIN },
    Key { name: "lr", default: Some("0.01"), help: "AdamW learning rate", commands: TRAIN },
    Key { name: "epochs", default: Some("10"), help: "Training epochs", commands: TRAIN },
    Key { name: "batch-size", default: Some("8"), help: "Sentence pairs per optimizer step", commands: TRAIN },
    Key { name: "weight-decay", default: Some("0.01"), help: "Decoupled weight decay", commands: TRAIN },
    Key { name: "dropout", default: Some("0"), help: "Dropout rate on hidden rows before normalization", commands: TRAIN },
    Key { name: "beta1", default: Some("0.9"), help: "AdamW first-moment decay", commands: TRAIN },
    Key { name: "beta2", default: Some("0.999"), help: "AdamW second-moment decay", commands: TRAIN },
    Key { name: "eps", default: Some("1e-8"), help: "AdamW epsilon", commands: TRAIN },
    Key { name: "init-checkpoint", default: None, help: "Start from this checkpoint instead of a fresh init", commands: TRAIN },
    Key { name: "save-init", default: None, help: "Write the initial parameters to this checkpoint", commands: TRAIN },
    Key { name: "history", default: None, help: "Per-epoch history CSV (stdout if unset)", commands: TRAIN },
    Key { name: "dev-src", default: None, help: "Development source side, for per-epoch AER", commands: TRAIN },
    Key { name: "dev-tgt", default: None, help: "Development target side", commands: TRAIN },
    Key { name: "dev-gold", default: None, help: "Development gold alignments", commands: TRAIN },
    Key { name: "tune-c", default: Some("false"), help: "After training, pick c from a fixed grid by dev AER", commands: TRAIN },
    // finetune + extract
    Key { name: "checkpoint", default: None, help: "Encoder checkpoint (written by finetune, read by extract)", commands: TRAIN_EXTRACT },
    Key { name: "c", default: Some("0.1"), help: "Prediction threshold on both directional probabilities, in (0, 1)", commands: TRAIN_EXTRACT },
    Key { name: "temperature", default: Some("1"), help: "Softmax temperature", commands: TRAIN_EXTRACT },
    Key { name: "embeddings", default: None, help: "Embedding record file to extract from instead of a checkpoint", commands: &["extract"] },
    // integrate
    Key { name: "manifest", default: None, help: "Tab-separated name, Pharaoh path, dev AER per aligner", commands: INTEGRATE },
    Key { name: "mode", default: Some("filter"), help: "filter, weight, union or intersection", commands: INTEGRATE },
    Key { name: "f", default: Some("0.45"), help: "Credit threshold", commands: INTEGRATE },
    Key { name: "lambda", default: Some("0.5"), help: "Sigmoid steepness for weight mode", commands: INTEGRATE },
    Key { name: "weights-out", default: None, help: "Weight sidecar output (weight mode)", commands: INTEGRATE },
    // evaluate / selfcorrect
    Key { name: "pred", default: None, help: "Predicted alignments (Pharaoh)", commands: &["evaluate", "selfcorrect"] },
    Key { name: "gold", default: None, help: "Gold alignments with i-j sure and i?j possible links", commands: &["evaluate", "selfcorrect"] },
    Key { name: "third-party", default: None, help: "Third-party alignments the predictions were trained on", commands: &["selfcorrect"] },
];

/// Keys shared by every command.
pub const SEED_DEFAULT: &str = "0";

pub const COMMANDS: &[(&str, &str)] = &[
    ("generate", "Write a synthetic corpus with gold and corrupted supervision"),
    ("finetune", "Fine-tune an encoder on third-party supervision"),
    ("extract", "Predict word alignments from a checkpoint or embedding file"),
    ("integrate", "Combine several aligners into one supervision file"),
    ("evaluate", "Score predictions against gold (CSV to stdout)"),
    ("selfcorrect", "Compare predictions with the supervision they learned from (CSV to stdout)"),
];

pub fn key(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

pub fn build_cli() -> Command {
    let mut cmd = Command::new("wordalign")
        .about("Word alignment by fine-tuning embeddings on third-party alignments")
        .subcommand_required(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("PATH")
                .help("Flat `key = value` config file"),
        )
        .arg(
            Arg::new("seed")
                .long("seed")
                .global(true)
                .value_name("N")
                .default_value(SEED_DEFAULT)
                .help("Seed for generation, initialization and batch order"),
        );
    for &(name, about) in COMMANDS {
        let mut sub = Command::new(name).about(about);
        for k in KEYS.iter().filter(|k| k.commands.contains(&name)) {
            let mut arg = Arg::new(k.name).long(k.name).value_name("VALUE").help(k.help).action(ArgAction::Set);
            if let Some(d) = k.default {
                arg = arg.default_value(d);
            }
            if k.name == "tune-c" {
                arg = arg.num_args(0..=1).default_missing_value("true");
            }
            sub = sub.arg(arg);
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

/// Parses `key = value` lines; `#` starts a comment. Keys may use `_` for `-`.
pub fn parse_config_file(text: &str, path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: String| CliError::Validation(format!("{}:{}: {m}", path.display(), k + 1));
        let (name, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected `key = value`, got {line:?}")))?;
        let name = name.trim().replace('_', "-");
        if name != "seed" && key(&name).is_none() {
            return Err(bad(format!("unknown key `{name}`")));
        }
        if out.insert(name.clone(), value.trim().to_string()).is_some() {
            return Err(bad(format!("key `{name}` set twice")));
        }
    }
    Ok(out)
}

/// Final key values for one command.
#[derive(Debug, Clone)]
pub struct Resolved {
    values: BTreeMap<&'static str, String>,
}

impl Resolved {
    pub fn from_matches(command: &str, sub: &ArgMatches, global: &ArgMatches) -> Result<Self, CliError> {
        let file = match global.get_one::<String>("config").or_else(|| sub.get_one::<String>("config")) {
            Some(p) => {
                let path = Path::new(p);
                let text = fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
                parse_config_file(&text, path)?
            }
            None => BTreeMap::new(),
        };
        // global args (`seed`) propagate into the subcommand's matches
        let mut values = BTreeMap::new();
        let names = KEYS.iter().filter(|k| k.commands.contains(&command)).map(|k| k.name).chain(["seed"]);
        for name in names {
            let flag = sub.get_one::<String>(name).cloned();
            let value = match file.get(name) {
                Some(v) if sub.value_source(name) != Some(ValueSource::CommandLine) => Some(v.clone()),
                _ => flag,
            };
            if let Some(v) = value {
                values.insert(name, v);
            }
        }
        Ok(Resolved { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self
            .raw(key)
            .ok_or_else(|| CliError::Validation(format!("missing required key `{key}`")))?;
        raw.parse()
            .map_err(|e| CliError::Validation(format!("invalid value {raw:?} for `{key}`: {e}")))
    }

    pub fn path(&self, key: &str) -> Result<PathBuf, CliError> {
        self.get(key)
    }

    pub fn opt_path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(PathBuf::from)
    }

    /// `key = value` lines for every resolved key, sorted.
    pub fn dump(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
