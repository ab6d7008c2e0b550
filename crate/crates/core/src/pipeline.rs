//! End-to-end steps shared by the command line and the tests:
//! preprocessing, embedding initialization, mining and curriculum analysis.

use std::collections::HashSet;

use log::info;

use crate::config::ExperimentConfig;
use crate::curriculum::{self, Inputs, NGramLm, Report};
use crate::embeddings::{build_aligned_table, AlignConfig, AlignReport, EmbeddingTable};
use crate::encoder::EncoderModel;
use crate::error::Result;
use crate::miner::{run_loop, MiningLog, PairKey, RunOutput};
use crate::textprep::{
    build_corpus, learn_bpe, read_corpus, read_pairs, tokenize, tokenized_lines, BpeModel, BuildReport,
    ComparableCorpus, LengthFilter, RawDocument, RawSide,
};

/// Raw documents of both languages and their pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct RawInputs {
    pub lang_l1: String,
    pub lang_l2: String,
    pub docs_l1: Vec<RawDocument>,
    pub docs_l2: Vec<RawDocument>,
    pub pairs: Vec<(String, String)>,
}

impl RawInputs {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(RawInputs {
            lang_l1: cfg.lang_l1().to_string(),
            lang_l2: cfg.lang_l2().to_string(),
            docs_l1: read_corpus(&cfg.require_path("paths.corpus_l1")?)?,
            docs_l2: read_corpus(&cfg.require_path("paths.corpus_l2")?)?,
            pairs: read_pairs(&cfg.require_path("paths.pairs")?)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub bpe: BpeModel,
    pub corpus: ComparableCorpus,
    pub report: BuildReport,
}

/// Learns a joint BPE model on both languages (unless one is given) and
/// builds the filtered, tagged comparable corpus.
pub fn prepare(raw: &RawInputs, n_merges: usize, filter: LengthFilter, bpe: Option<BpeModel>) -> Result<Prepared> {
    let bpe = match bpe {
        Some(b) => b,
        None => {
            let mut lines = tokenized_lines(&raw.docs_l1, &raw.lang_l1);
            lines.extend(tokenized_lines(&raw.docs_l2, &raw.lang_l2));
            learn_bpe(&lines, n_merges)?
        }
    };
    let (corpus, report) = build_corpus(
        RawSide {
            lang: &raw.lang_l1,
            docs: &raw.docs_l1,
        },
        RawSide {
            lang: &raw.lang_l2,
            docs: &raw.docs_l2,
        },
        &raw.pairs,
        &bpe,
        filter,
    );
    info!(
        "prepared {} document pairs ({} sentences dropped, {} pairs dropped)",
        corpus.doc_pairs.len(),
        report.dropped_sentences,
        report.dropped_doc_pairs
    );
    Ok(Prepared { bpe, corpus, report })
}

/// Trains and aligns per-language embeddings over the corpus vocabulary.
pub fn initial_embeddings(corpus: &ComparableCorpus, cfg: &AlignConfig) -> Result<(EmbeddingTable, AlignReport)> {
    let s1: Vec<Vec<u32>> = corpus.sentences_l1().map(|s| s.content_ids().to_vec()).collect();
    let s2: Vec<Vec<u32>> = corpus.sentences_l2().map(|s| s.content_ids().to_vec()).collect();
    let (table, report) = build_aligned_table(&s1, &s2, corpus.vocab.tokens(), cfg)?;
    info!(
        "aligned embeddings: {} seed pairs, dictionary cosine {:.3} -> {:.3}",
        report.dictionary_size, report.cosine_before, report.cosine_after
    );
    Ok((table, report))
}

/// Everything produced by one mining run.
#[derive(Debug, Clone)]
pub struct MineRun {
    pub prepared: Prepared,
    pub embeddings: EmbeddingTable,
    pub align: Option<AlignReport>,
    pub output: RunOutput,
}

/// Preprocesses, initializes embeddings and runs the mining loop. A BPE
/// model or embedding table configured in `paths.*` is loaded instead of
/// being trained.
pub fn run_mining(cfg: &ExperimentConfig, raw: &RawInputs, truth: Option<&HashSet<PairKey>>) -> Result<MineRun> {
    let bpe = cfg.path("paths.bpe").map(|p| BpeModel::load(&p)).transpose()?;
    let prepared = prepare(raw, cfg.n_merges()?, cfg.length_filter()?, bpe)?;
    let align_cfg = cfg.align()?;
    let (embeddings, align) = match cfg.path("paths.embeddings") {
        Some(p) => (
            EmbeddingTable::load_for_vocab(&p, prepared.corpus.vocab.tokens(), align_cfg.skipgram.seed)?,
            None,
        ),
        None => {
            let (t, r) = initial_embeddings(&prepared.corpus, &align_cfg)?;
            (t, Some(r))
        }
    };
    let model = EncoderModel::new(cfg.encoder()?, embeddings.clone(), cfg.encoder_seed()?);
    let output = run_loop(&prepared.corpus, model, &cfg.miner()?, truth)?;
    Ok(MineRun {
        prepared,
        embeddings,
        align,
        output,
    })
}

/// Surface-word sentences of a raw corpus, as used by the language models.
pub fn lm_sentences(docs: &[RawDocument], lang: &str) -> Vec<Vec<String>> {
    docs.iter()
        .flat_map(|d| d.lines.iter())
        .map(|l| tokenize(l, lang))
        .filter(|s| !s.is_empty())
        .collect()
}

/// Language models for both sides: trained on `paths.lm_corpus_*` when
/// set, otherwise on the raw documents of the mined corpus.
pub fn language_models(cfg: &ExperimentConfig, raw: &RawInputs) -> Result<(NGramLm, NGramLm)> {
    let order = cfg.lm_order()?;
    let side = |key: &str, docs: &[RawDocument], lang: &str| -> Result<NGramLm> {
        let sents = match cfg.path(key) {
            Some(p) => lm_sentences(&read_corpus(&p)?, lang),
            None => lm_sentences(docs, lang),
        };
        curriculum::train_lm(&sents, order)
    };
    Ok((
        side("paths.lm_corpus_l1", &raw.docs_l1, &raw.lang_l1)?,
        side("paths.lm_corpus_l2", &raw.docs_l2, &raw.lang_l2)?,
    ))
}

/// Curriculum analysis of a mining log over its corpus.
pub fn curriculum_report(
    cfg: &ExperimentConfig,
    raw: &RawInputs,
    corpus: &ComparableCorpus,
    log: &MiningLog,
) -> Result<Report> {
    let shared = curriculum::shared_types(corpus);
    let (lm1, lm2) = language_models(cfg, raw)?;
    let inputs = Inputs {
        corpus,
        shared: &shared,
        lm_l1: Some(&lm1),
        lm_l2: Some(&lm2),
    };
    curriculum::analyze(log, &inputs, cfg.window()?, cfg.max_corr_pairs()?)
}
