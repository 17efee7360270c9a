use std::fs;
use std::io::Write;
use std::path::Path;

use log::{info, warn};
use wordalign::encoder::{
    finetune_with, read_checkpoint, write_checkpoint, EncoderConfig, EncoderKind, EncoderParams,
    TrainConfig, Vocab,
};
use wordalign::eval::{corpus_eval, corpus_self_correction};
use wordalign::integrate::{
    combine_baseline, compute_credits, integrate_filter, integrate_weight, load_manifest, BaselineMode,
    IntegrationConfig,
};
use wordalign::io::pharaoh::serialize_alignment;
use wordalign::io::{
    read_alignment_file, read_embeddings, read_gold_file, read_parallel_corpus, read_weights_file,
    write_alignment_file, write_gold_file, write_parallel_corpus, write_weights_file, IndexBase, SubwordMode,
    SyntheticSpec,
};
use wordalign::pipeline::{
    embedding_probabilities, predict_corpus, predict_words, project_to_subwords, project_weights_to_subwords,
    tune_threshold, DevMonitor, DEFAULT_C_GRID,
};
use wordalign::simmat::PredictConfig;
use wordalign::{AlignmentSet, Granularity};

use crate::config::Resolved;
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

pub fn run(command: &str, r: &Resolved) -> Result<()> {
    match command {
        "generate" => generate(r),
        "finetune" => finetune(r),
        "extract" => extract(r),
        "integrate" => integrate(r),
        "evaluate" => evaluate(r),
        "selfcorrect" => selfcorrect(r),
        other => Err(CliError::Validation(format!("unknown command {other:?}"))),
    }
}

fn index_base(r: &Resolved) -> Result<IndexBase> {
    Ok(IndexBase::from_value(r.get("index-base")?)?)
}

fn granularity(r: &Resolved, key: &str) -> Result<Granularity> {
    match r.raw(key) {
        Some("word") => Ok(Granularity::Word),
        Some("subword") => Ok(Granularity::Subword),
        other => Err(CliError::Validation(format!("`{key}` must be word or subword, got {other:?}"))),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })
}

fn print(text: &str) -> Result<()> {
    std::io::stdout()
        .write_all(text.as_bytes())
        .map_err(|e| CliError::Io { path: "<stdout>".into(), source: e })
}

/// Writes to the path under `key` if one is set, else to stdout.
fn emit(r: &Resolved, key: &str, text: &str) -> Result<()> {
    match r.opt_path(key) {
        Some(p) => write_file(&p, text),
        None => print(text),
    }
}

fn pharaoh_text(sets: &[AlignmentSet], base: IndexBase) -> String {
    sets.iter().map(|s| serialize_alignment(s, base) + "\n").collect()
}

fn generate(r: &Resolved) -> Result<()> {
    let spec = SyntheticSpec {
        vocab_size: r.get("vocab")?,
        pair_count: r.get("pairs")?,
        min_len: r.get("min-len")?,
        max_len: r.get("max-len")?,
        swap_rate: r.get("swap")?,
        corruption_rate: r.get("corruption")?,
        seed: r.get("seed")?,
    };
    let out = r.path("out")?;
    let syn = wordalign::io::synthesize_corpus(&spec)?;
    fs::create_dir_all(&out).map_err(|e| CliError::Io { path: out.clone(), source: e })?;
    write_parallel_corpus(&syn.corpus, &out.join("corpus.src"), &out.join("corpus.tgt"))?;
    write_gold_file(&out.join("gold.txt"), &syn.gold, IndexBase::Zero)?;
    write_alignment_file(&out.join("supervision.txt"), &syn.supervision, IndexBase::Zero)?;
    write_file(&out.join("generate.cfg"), &r.dump())?;
    info!("wrote {} sentence pairs to {}", spec.pair_count, out.display());
    Ok(())
}

fn finetune(r: &Resolved) -> Result<()> {
    let seed: u64 = r.get("seed")?;
    let mode: SubwordMode = r.get("subword-mode")?;
    let base = index_base(r)?;
    let sup_gran = granularity(r, "supervision-granularity")?;
    let cfg = TrainConfig {
        learning_rate: r.get("lr")?,
        epochs: r.get("epochs")?,
        batch_size: r.get("batch-size")?,
        weight_decay: r.get("weight-decay")?,
        dropout_rate: r.get("dropout")?,
        seed,
        temperature: r.get("temperature")?,
        beta1: r.get("beta1")?,
        beta2: r.get("beta2")?,
        eps: r.get("eps")?,
    };
    cfg.validate()?;
    let predict = PredictConfig::new(r.get("c")?, cfg.temperature)?;
    let checkpoint = r.path("checkpoint")?;
    let tune_c: bool = r.get("tune-c")?;

    let corpus = read_parallel_corpus(&r.path("src")?, &r.path("tgt")?, mode)?;
    let raw_sup = read_alignment_file(&r.path("supervision")?, base, sup_gran)?;
    let supervision = match sup_gran {
        Granularity::Word => project_to_subwords(&corpus, &raw_sup)?,
        Granularity::Subword => raw_sup,
    };
    let weights = match r.opt_path("weights") {
        Some(p) => {
            let blocks = read_weights_file(&p, base)?;
            Some(match sup_gran {
                Granularity::Word => project_weights_to_subwords(&corpus, &blocks)?,
                Granularity::Subword => blocks,
            })
        }
        None => None,
    };

    let dev_keys = [r.opt_path("dev-src"), r.opt_path("dev-tgt"), r.opt_path("dev-gold")];
    let dev = match dev_keys {
        [Some(s), Some(t), Some(g)] => Some((read_parallel_corpus(&s, &t, mode)?, read_gold_file(&g, base)?)),
        [None, None, None] => None,
        _ => return Err(CliError::Validation("dev-src, dev-tgt and dev-gold must be set together".into())),
    };
    if tune_c && dev.is_none() {
        return Err(CliError::Validation("tune-c needs dev-src, dev-tgt and dev-gold".into()));
    }

    let init = match r.opt_path("init-checkpoint") {
        Some(p) => read_checkpoint(&p)?,
        None => {
            let vocab = match &dev {
                Some((d, _)) => Vocab::from_corpora(&[&corpus, d]),
                None => Vocab::from_corpora(&[&corpus]),
            };
            let enc = EncoderConfig {
                kind: r.get::<EncoderKind>("encoder")?,
                dim: r.get("dim")?,
                init_scale: r.get("init-scale")?,
                seed,
            };
            EncoderParams::init(vocab, &enc)?
        }
    };
    if let Some(p) = r.opt_path("save-init") {
        write_checkpoint(&init, &p)?;
    }

    let (params, history) = match &dev {
        Some((d, g)) => {
            let mut monitor = DevMonitor { corpus: d, gold: g, predict };
            finetune_with(&corpus, &supervision, weights.as_deref(), &cfg, &init, &mut monitor)?
        }
        None => finetune_with(&corpus, &supervision, weights.as_deref(), &cfg, &init, &mut ())?,
    };
    write_checkpoint(&params, &checkpoint)?;
    emit(r, "history", &history.to_csv())?;

    if let (true, Some((d, g))) = (tune_c, &dev) {
        let (c, report) = tune_threshold(&params, d, g, &DEFAULT_C_GRID, cfg.temperature)?;
        eprintln!("selected c = {c} (dev AER {:.4})", report.aer);
    }
    Ok(())
}

fn extract(r: &Resolved) -> Result<()> {
    let cfg = PredictConfig::new(r.get("c")?, r.get("temperature")?)?;
    let base = index_base(r)?;
    let corpus = read_parallel_corpus(&r.path("src")?, &r.path("tgt")?, r.get("subword-mode")?)?;
    let preds = match (r.opt_path("checkpoint"), r.opt_path("embeddings")) {
        (Some(ck), None) => predict_corpus(&read_checkpoint(&ck)?, &corpus, &cfg)?,
        (None, Some(emb)) => {
            let file = read_embeddings(&emb)?;
            predict_words(&embedding_probabilities(&file, &corpus, cfg.temperature)?, &corpus, cfg.c)?
        }
        _ => return Err(CliError::Validation("set exactly one of checkpoint and embeddings".into())),
    };
    emit(r, "out", &pharaoh_text(&preds, base))
}

fn integrate(r: &Resolved) -> Result<()> {
    let base = index_base(r)?;
    let cfg = IntegrationConfig {
        f: r.get("f")?,
        lambda: r.get("lambda")?,
    };
    cfg.validate()?;
    let mode = r.raw("mode").unwrap_or_default().to_string();
    if !["filter", "weight", "union", "intersection"].contains(&mode.as_str()) {
        return Err(CliError::Validation(format!(
            "`mode` must be filter, weight, union or intersection, got {mode:?}"
        )));
    }
    let weights_out = r.opt_path("weights-out");
    if mode == "weight" && weights_out.is_none() {
        return Err(CliError::Validation("weight mode needs `weights-out`".into()));
    }
    let records = load_manifest(&r.path("manifest")?, base, Granularity::Word)?;
    let sets = match mode.as_str() {
        "filter" => integrate_filter(&records, &compute_credits(&records)?, cfg.f)?,
        "union" => combine_baseline(&records, BaselineMode::Union)?,
        "intersection" => combine_baseline(&records, BaselineMode::Intersection)?,
        _ => {
            let blocks = integrate_weight(&records, &compute_credits(&records)?, &cfg)?;
            write_weights_file(weights_out.as_deref().unwrap(), &blocks, base)?;
            combine_baseline(&records, BaselineMode::Union)?
        }
    };
    emit(r, "out", &pharaoh_text(&sets, base))
}

/// Predictions for `count` sentences. A file with no lines at all stands for
/// a system that predicted nothing anywhere.
fn read_predictions(path: &Path, base: IndexBase, count: usize) -> Result<Vec<AlignmentSet>> {
    let preds = read_alignment_file(path, base, Granularity::Word)?;
    if preds.is_empty() && count > 0 {
        warn!("{} is empty; scoring it as no links for all {count} sentences", path.display());
        return Ok(vec![AlignmentSet::new(Granularity::Word); count]);
    }
    if preds.len() != count {
        return Err(CliError::Validation(format!(
            "{} has {} lines but the gold file has {count}",
            path.display(),
            preds.len()
        )));
    }
    Ok(preds)
}

fn evaluate(r: &Resolved) -> Result<()> {
    let base = index_base(r)?;
    let gold = read_gold_file(&r.path("gold")?, base)?;
    let preds = read_predictions(&r.path("pred")?, base, gold.len())?;
    print(&&corpus_eval(&preds, &gold)?.to_csv())
}

fn selfcorrect(r: &Resolved) -> Result<()> {
    let base = index_base(r)?;
    let gold = read_gold_file(&r.path("gold")?, base)?;
    let preds = read_predictions(&r.path("pred")?, base, gold.len())?;
    let third_path = r.path("third-party")?;
    let third = read_alignment_file(&third_path, base, Granularity::Word)?;
    if third.len() != gold.len() {
        return Err(CliError::Validation(format!(
            "{} has {} lines but the gold file has {}",
            third_path.display(),
            third.len(),
            gold.len()
        )));
    }
    print(&&corpus_self_correction(&preds, &third, &gold)?.to_csv())
}
