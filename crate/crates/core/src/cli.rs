//! Command-line front end: subcommands, experiment directories and
//! provenance records.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::evalx;
use crate::miner::MiningLog;
use crate::pipeline::{self, RawInputs};
use crate::synthcorp;
use crate::textprep::{corpus_to_text, BpeModel, RawDocument};
use crate::util;

/// Environment variable overriding the output root directory.
pub const DATA_DIR_ENV: &str = "SSMINE_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Prep,
    Embed,
    Synth,
    Mine,
    Eval,
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Prep => "prep",
            Command::Embed => "embed",
            Command::Synth => "synth",
            Command::Mine => "mine",
            Command::Eval => "eval",
            Command::Report => "report",
        }
    }
}

/// Self-supervised parallel sentence mining from comparable corpora.
///
/// Any configuration key may also be given as a flag, either qualified
/// (`--miner.epochs 3`) or by its bare name when unique (`--batch_size 20`).
#[derive(Debug, Parser)]
#[command(name = "ssmine", version)]
pub struct Args {
    pub command: Command,
    #[arg(long)]
    pub config: PathBuf,
    /// Seed for every randomized step.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for scoring (0 = all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Log every scored candidate pair, not only channel acceptances.
    #[arg(long)]
    pub log_rejects: bool,
}

const OWN_FLAGS: &[&str] = &["config", "seed", "threads", "log-rejects", "help", "version"];

/// Splits config-key flags from the arguments clap handles.
pub fn split_overrides(args: Vec<OsString>) -> Result<(Vec<OsString>, Vec<(String, String)>)> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy().into_owned();
        let Some(flag) = s.strip_prefix("--") else {
            rest.push(a);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if name.is_empty() || OWN_FLAGS.contains(&name.as_str()) {
            rest.push(a);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .map(|v| v.to_string_lossy().into_owned())
                .ok_or_else(|| Error::InvalidArgument(format!("flag --{name} needs a value")))?,
        };
        overrides.push((name.replace('-', "_"), value));
    }
    Ok((rest, overrides))
}

/// Resolves the configuration: file, then flag overrides, then the
/// dedicated `--seed`, `--threads` and `--log-rejects` flags.
pub fn resolve_config(args: &Args, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    if !args.config.is_file() {
        return Err(Error::InvalidArgument(format!(
            "config file not found: {}",
            args.config.display()
        )));
    }
    let mut cfg = ExperimentConfig::load(&args.config)?;
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    if let Some(t) = args.threads {
        cfg.set("run.threads", &t.to_string())?;
    }
    if args.log_rejects {
        cfg.set("miner.log_rejects", "true")?;
    }
    Ok(cfg)
}

fn output_root(cfg: &ExperimentConfig) -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .or_else(|| cfg.path("paths.output_root"))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Creates a fresh `<timestamp>-<command>` directory under `root`.
pub fn create_run_dir(root: &Path, command: &str) -> Result<PathBuf> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
    let base = format!("{stamp}-{command}");
    for n in 1.. {
        let name = if n == 1 { base.clone() } else { format!("{base}-{n}") };
        let dir = root.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(&dir, e)),
        }
    }
    unreachable!()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

const INPUT_KEYS: &[&str] = &[
    "paths.corpus_l1",
    "paths.corpus_l2",
    "paths.pairs",
    "paths.truth",
    "paths.parallel_l1",
    "paths.parallel_l2",
    "paths.bpe",
    "paths.embeddings",
    "paths.log",
    "paths.lm_corpus_l1",
    "paths.lm_corpus_l2",
];

fn write_provenance(dir: &Path, command: Command, cfg: &ExperimentConfig) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "tool\tssmine {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "command\t{}", command.name());
    for k in ["embeddings.seed", "encoder.seed", "miner.seed", "synth.seed"] {
        let _ = writeln!(s, "{k}\t{}", cfg.raw(k));
    }
    for k in INPUT_KEYS {
        if let Some(p) = cfg.path(k).filter(|p| p.is_file()) {
            let _ = writeln!(s, "sha256\t{k}\t{}\t{}", sha256_file(&p)?, p.display());
        }
    }
    util::write_file(&dir.join("provenance.txt"), &s)
}

fn tokenized_docs(corpus: &crate::textprep::ComparableCorpus) -> (Vec<RawDocument>, Vec<RawDocument>) {
    let side = |docs: Vec<&crate::textprep::Document>| {
        docs.into_iter()
            .map(|d| RawDocument {
                doc_id: d.doc_id.clone(),
                lines: d.sentences.iter().map(|s| s.tokens.join(" ")).collect(),
            })
            .collect()
    };
    (
        side(corpus.doc_pairs.iter().map(|p| &p.l1).collect()),
        side(corpus.doc_pairs.iter().map(|p| &p.l2).collect()),
    )
}

fn cmd_prep(cfg: &mut ExperimentConfig, dir: &Path, embed: bool) -> Result<()> {
    let raw = RawInputs::load(cfg)?;
    let bpe = cfg.path("paths.bpe").map(|p| BpeModel::load(&p)).transpose()?;
    let prep = pipeline::prepare(&raw, cfg.n_merges()?, cfg.length_filter()?, bpe)?;
    let bpe_path = dir.join("bpe.model");
    prep.bpe.save(&bpe_path)?;
    let (t1, t2) = tokenized_docs(&prep.corpus);
    util::write_file(&dir.join(format!("tokens.{}", raw.lang_l1)), &corpus_to_text(&t1))?;
    util::write_file(&dir.join(format!("tokens.{}", raw.lang_l2)), &corpus_to_text(&t2))?;
    let r = &prep.report;
    let stats = format!(
        "doc_pairs\t{}\nsentences_l1\t{}\nsentences_l2\t{}\nvocab\t{}\ndropped_sentences\t{}\ndropped_doc_pairs\t{}\nmissing_docs\t{}\n",
        prep.corpus.doc_pairs.len(),
        prep.corpus.sentences_l1().count(),
        prep.corpus.sentences_l2().count(),
        prep.corpus.vocab.len(),
        r.dropped_sentences,
        r.dropped_doc_pairs,
        r.missing_docs
    );
    util::write_file(&dir.join("prep_report.txt"), &stats)?;
    cfg.set("paths.bpe", &bpe_path.display().to_string())?;
    if embed {
        let (table, rep) = pipeline::initial_embeddings(&prep.corpus, &cfg.align()?)?;
        let emb_path = dir.join("embeddings.vec");
        table.save(&emb_path, prep.corpus.vocab.tokens())?;
        let s = format!(
            "dictionary_size\t{}\ncosine_before\t{:.6}\ncosine_after\t{:.6}\n",
            rep.dictionary_size, rep.cosine_before, rep.cosine_after
        );
        util::write_file(&dir.join("align_report.txt"), &s)?;
        cfg.set("paths.embeddings", &emb_path.display().to_string())?;
    }
    Ok(())
}

fn cmd_synth(cfg: &mut ExperimentConfig, dir: &Path) -> Result<()> {
    let parallel = synthcorp::read_parallel(
        &cfg.require_path("paths.parallel_l1")?,
        &cfg.require_path("paths.parallel_l2")?,
    )?;
    let labeled = synthcorp::build_synthetic(&parallel, &cfg.synth()?)?;
    let (l1, l2) = (cfg.lang_l1().to_string(), cfg.lang_l2().to_string());
    labeled.write(dir, &l1, &l2)?;
    // Point the resolved config at the generated corpus so it can be mined.
    cfg.set("paths.corpus_l1", &dir.join(format!("corpus.{l1}")).display().to_string())?;
    cfg.set("paths.corpus_l2", &dir.join(format!("corpus.{l2}")).display().to_string())?;
    cfg.set("paths.pairs", &dir.join("pairs.tsv").display().to_string())?;
    cfg.set("paths.truth", &dir.join("truth.tsv").display().to_string())?;
    Ok(())
}

fn cmd_mine(cfg: &mut ExperimentConfig, dir: &Path) -> Result<()> {
    let raw = RawInputs::load(cfg)?;
    let truth = cfg.path("paths.truth").map(|p| synthcorp::read_truth(&p)).transpose()?;
    let run = pipeline::run_mining(cfg, &raw, truth.as_ref())?;
    let log_path = dir.join("mining_log.tsv");
    run.output.log.save(&log_path)?;
    run.output.write_exports(dir)?;
    let bpe_path = dir.join("bpe.model");
    run.prepared.bpe.save(&bpe_path)?;
    run.output.model.save(&dir.join("checkpoint.txt"))?;
    let mut losses = String::from("step,loss\n");
    for (i, l) in run.output.losses.iter().enumerate() {
        let _ = writeln!(losses, "{},{l:.6}", i + 1);
    }
    util::write_file(&dir.join("losses.csv"), &losses)?;
    if let Some(t) = &truth {
        evalx::accumulate(&run.output.log, t)?.save(&dir.join("pr.csv"))?;
    }
    pipeline::curriculum_report(cfg, &raw, &run.prepared.corpus, &run.output.log)?.write(dir)?;
    cfg.set("paths.log", &log_path.display().to_string())?;
    cfg.set("paths.bpe", &bpe_path.display().to_string())?;
    Ok(())
}

fn cmd_eval(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let truth_path = cfg.path("paths.truth").ok_or(Error::TruthRequired)?;
    if !truth_path.is_file() {
        return Err(Error::TruthRequired);
    }
    let truth = synthcorp::read_truth(&truth_path)?;
    let log = MiningLog::load(&cfg.require_path("paths.log")?)?;
    let series = evalx::accumulate(&log, &truth)?;
    if !evalx::dual_contained(&log) {
        return Err(Error::InvalidArgument("log has dual acceptances outside a channel".into()));
    }
    series.save(&dir.join("pr.csv"))
}

fn cmd_report(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let raw = RawInputs::load(cfg)?;
    let log = MiningLog::load(&cfg.require_path("paths.log")?)?;
    let bpe = Some(BpeModel::load(&cfg.require_path("paths.bpe")?)?);
    let prep = pipeline::prepare(&raw, cfg.n_merges()?, cfg.length_filter()?, bpe)?;
    pipeline::curriculum_report(cfg, &raw, &prep.corpus, &log)?.write(dir)
}

fn dispatch(command: Command, cfg: &mut ExperimentConfig, dir: &Path) -> Result<()> {
    match command {
        Command::Prep => cmd_prep(cfg, dir, false),
        Command::Embed => cmd_prep(cfg, dir, true),
        Command::Synth => cmd_synth(cfg, dir),
        Command::Mine => cmd_mine(cfg, dir),
        Command::Eval => cmd_eval(cfg, dir),
        Command::Report => cmd_report(cfg, dir),
    }
}

/// Runs one subcommand and returns its experiment directory. On failure
/// the partially written directory is removed.
pub fn run(args: &Args, overrides: &[(String, String)]) -> Result<PathBuf> {
    let mut cfg = resolve_config(args, overrides)?;
    if args.command == Command::Eval && cfg.path("paths.truth").is_none_or(|p| !p.is_file()) {
        return Err(Error::TruthRequired);
    }
    let threads = cfg.threads()?;
    if threads > 0 {
        // Fails harmlessly if a pool already exists in this process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let dir = create_run_dir(&output_root(&cfg), args.command.name())?;
    let result = write_provenance(&dir, args.command, &cfg)
        .and_then(|()| dispatch(args.command, &mut cfg, &dir))
        .and_then(|()| util::write_file(&dir.join("config.resolved"), &cfg.to_text()));
    match result {
        Ok(()) => Ok(dir),
        Err(e) => {
            let _ = fs::remove_dir_all(&dir);
            Err(e)
        }
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args(argv: Vec<OsString>) -> i32 {
    let (rest, overrides) = match split_overrides(argv) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let args = match Args::try_parse_from(rest) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&args, &overrides) {
        Ok(dir) => {
            println!("{}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            1
        }
    }
}
