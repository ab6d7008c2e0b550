//! Online mining loop: score every cross-document sentence combination with
//! the ratio margin, accept mutual top matches under both representations,
//! and train on accepted pairs whenever a batch fills up.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::encoder::{EncoderModel, SentenceRepr, TrainPair};
use crate::error::{Error, Result};
use crate::textprep::{ComparableCorpus, DocPair, Sentence};
use crate::util::{self, cosine, dot, norm};

pub const LOG_HEADER: &str = "epoch\tstep\tmodel_version\tdoc_id_l1\tline_l1\tdoc_id_l2\tline_l2\tscore_w\tscore_h\tacc_w\tacc_h\tacc_dual\tis_true_pair";

/// Positional identity of a sentence pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairKey {
    pub doc_l1: String,
    pub line_l1: usize,
    pub doc_l2: String,
    pub line_l2: usize,
}

impl PairKey {
    pub fn new(doc_l1: &str, line_l1: usize, doc_l2: &str, line_l2: usize) -> Self {
        PairKey {
            doc_l1: doc_l1.to_string(),
            line_l1,
            doc_l2: doc_l2.to_string(),
            line_l2,
        }
    }

    pub fn of(a: &Sentence, b: &Sentence) -> Self {
        Self::new(&a.doc_id, a.line_id, &b.doc_id, b.line_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePair {
    pub key: PairKey,
    pub score_w: f64,
    pub score_h: f64,
    pub accepted_w: bool,
    pub accepted_h: bool,
    pub accepted_dual: bool,
    /// Training steps completed in this run when the pair was scored.
    pub step: u64,
    pub model_version: u64,
    pub epoch: usize,
    pub is_true: Option<bool>,
}

/// Append-only record of scored pairs.
///
/// Pairs accepted by at least one channel are always recorded; the full
/// cross product is recorded when rejects are logged.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MiningLog {
    pub records: Vec<CandidatePair>,
}

impl MiningLog {
    pub fn push(&mut self, rec: CandidatePair) {
        debug_assert!(self.records.last().is_none_or(|l| l.step <= rec.step));
        self.records.push(rec);
    }

    pub fn epochs(&self) -> Vec<usize> {
        let mut e: Vec<usize> = self.records.iter().map(|r| r.epoch).collect();
        e.dedup();
        e
    }

    pub fn accepted(&self) -> impl Iterator<Item = &CandidatePair> {
        self.records.iter().filter(|r| r.accepted_dual)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::with_capacity(self.records.len() * 96);
        s.push_str(LOG_HEADER);
        s.push('\n');
        let b = |x: bool| if x { 1 } else { 0 };
        for r in &self.records {
            let truth = match r.is_true {
                Some(true) => "1",
                Some(false) => "0",
                None => "-",
            };
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:?}\t{:?}\t{}\t{}\t{}\t{}",
                r.epoch,
                r.step,
                r.model_version,
                r.key.doc_l1,
                r.key.line_l1,
                r.key.doc_l2,
                r.key.line_l2,
                r.score_w,
                r.score_h,
                b(r.accepted_w),
                b(r.accepted_h),
                b(r.accepted_dual),
                truth
            );
        }
        s
    }

    pub fn from_tsv(text: &str, src: &str) -> Result<Self> {
        let mut log = MiningLog::default();
        for (n, line) in util::data_lines(text, LOG_HEADER) {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 13 {
                return Err(Error::parse(src, n, "expected 13 columns"));
            }
            let num = |s: &str| -> Result<u64> {
                s.parse().map_err(|_| Error::parse(src, n, format!("bad integer `{s}`")))
            };
            let float = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::parse(src, n, format!("bad number `{s}`")))
            };
            let flag = |s: &str| -> Result<bool> {
                match s {
                    "1" => Ok(true),
                    "0" => Ok(false),
                    _ => Err(Error::parse(src, n, format!("bad flag `{s}`"))),
                }
            };
            log.records.push(CandidatePair {
                epoch: num(f[0])? as usize,
                step: num(f[1])?,
                model_version: num(f[2])?,
                key: PairKey::new(f[3], num(f[4])? as usize, f[5], num(f[6])? as usize),
                score_w: float(f[7])?,
                score_h: float(f[8])?,
                accepted_w: flag(f[9])?,
                accepted_h: flag(f[10])?,
                accepted_dual: flag(f[11])?,
                is_true: match f[12] {
                    "-" => None,
                    s => Some(flag(s)?),
                },
            });
        }
        Ok(log)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        util::write_file(path, &self.to_tsv())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_tsv(&util::read_to_string(path)?, &path.display().to_string())
    }
}

/// Sum of the `k` largest values divided by `2·min(k, n)`.
fn knn_term(values: &mut [f64], k: usize) -> f64 {
    let take = k.min(values.len());
    if take < values.len() {
        values.select_nth_unstable_by(take - 1, |a, b| b.total_cmp(a));
    }
    values[..take].iter().sum::<f64>() / (2 * take) as f64
}

fn ratio(cos: f64, denom: f64) -> f64 {
    if denom == 0.0 {
        0.0
    } else {
        cos / denom
    }
}

/// Ratio margin of `(x, y)`: `cos(x, y)` over the mean cosine of each side
/// to its `k` nearest neighbours on the other side (halved and summed).
///
/// With fewer than `k` candidates all of them are used.
pub fn margin_score(
    x: &[f64],
    y: &[f64],
    cands_x: &[&[f64]],
    cands_y: &[&[f64]],
    k: usize,
) -> Result<f64> {
    if cands_x.is_empty() || cands_y.is_empty() {
        return Err(Error::NoCandidates);
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut fx: Vec<f64> = cands_y.iter().map(|z| cosine(x, z)).collect();
    let mut fy: Vec<f64> = cands_x.iter().map(|z| cosine(y, z)).collect();
    Ok(ratio(cosine(x, y), knn_term(&mut fx, k) + knn_term(&mut fy, k)))
}

/// Margin scores of every `(i, j)` in `xs × ys`, row-major.
pub fn margin_matrix(xs: &[&[f64]], ys: &[&[f64]], k: usize) -> Result<Vec<f64>> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::NoCandidates);
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let unit = |v: &[f64]| -> Vec<f64> {
        let n = norm(v);
        if n == 0.0 {
            vec![0.0; v.len()]
        } else {
            v.iter().map(|x| x / n).collect()
        }
    };
    let ux: Vec<Vec<f64>> = xs.iter().map(|v| unit(v)).collect();
    let uy: Vec<Vec<f64>> = ys.iter().map(|v| unit(v)).collect();
    let (n1, n2) = (ux.len(), uy.len());
    let mut cos = vec![0.0; n1 * n2];
    for i in 0..n1 {
        for j in 0..n2 {
            cos[i * n2 + j] = dot(&ux[i], &uy[j]);
        }
    }
    let mut buf = Vec::with_capacity(n1.max(n2));
    let row_terms: Vec<f64> = (0..n1)
        .map(|i| {
            buf.clear();
            buf.extend_from_slice(&cos[i * n2..(i + 1) * n2]);
            knn_term(&mut buf, k)
        })
        .collect();
    let col_terms: Vec<f64> = (0..n2)
        .map(|j| {
            buf.clear();
            buf.extend((0..n1).map(|i| cos[i * n2 + j]));
            knn_term(&mut buf, k)
        })
        .collect();
    for i in 0..n1 {
        for j in 0..n2 {
            let c = &mut cos[i * n2 + j];
            *c = ratio(*c, row_terms[i] + col_terms[j]);
        }
    }
    Ok(cos)
}

/// Mutual-top pairs of a score matrix. Ties go to the lowest index.
pub fn mutual_top(scores: &[f64], n1: usize, n2: usize) -> Vec<(usize, usize)> {
    let argmax = |it: &mut dyn Iterator<Item = (usize, f64)>| {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in it {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| i)
    };
    let best_col: Vec<Option<usize>> = (0..n1)
        .map(|i| argmax(&mut (0..n2).map(|j| (j, scores[i * n2 + j]))))
        .collect();
    let best_row: Vec<Option<usize>> = (0..n2)
        .map(|j| argmax(&mut (0..n1).map(|i| (i, scores[i * n2 + j]))))
        .collect();
    (0..n1)
        .filter_map(|i| {
            let j = best_col[i]?;
            (best_row[j] == Some(i)).then_some((i, j))
        })
        .collect()
}

/// Channel scores and verdicts for one document pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub n1: usize,
    pub n2: usize,
    pub score_w: Vec<f64>,
    pub score_h: Vec<f64>,
    pub accepted_w: Vec<(usize, usize)>,
    pub accepted_h: Vec<(usize, usize)>,
    /// Intersection of both channels' mutual-top sets.
    pub accepted_dual: Vec<(usize, usize)>,
}

/// Selection from precomputed representations.
pub fn select_from_reprs(l1: &[SentenceRepr], l2: &[SentenceRepr], k: usize) -> Result<Selection> {
    let w1: Vec<&[f64]> = l1.iter().map(|r| r.cw.as_slice()).collect();
    let w2: Vec<&[f64]> = l2.iter().map(|r| r.cw.as_slice()).collect();
    let h1: Vec<&[f64]> = l1.iter().map(|r| r.ch.as_slice()).collect();
    let h2: Vec<&[f64]> = l2.iter().map(|r| r.ch.as_slice()).collect();
    let (n1, n2) = (l1.len(), l2.len());
    let score_w = margin_matrix(&w1, &w2, k)?;
    let score_h = margin_matrix(&h1, &h2, k)?;
    let accepted_w = mutual_top(&score_w, n1, n2);
    let accepted_h = mutual_top(&score_h, n1, n2);
    let hs: HashSet<(usize, usize)> = accepted_h.iter().copied().collect();
    let accepted_dual = accepted_w.iter().copied().filter(|p| hs.contains(p)).collect();
    Ok(Selection {
        n1,
        n2,
        score_w,
        score_h,
        accepted_w,
        accepted_h,
        accepted_dual,
    })
}

/// Scores a document pair against one model snapshot.
pub fn select_pairs(model: &EncoderModel, pair: &DocPair, k: usize) -> Result<Selection> {
    let rep = |ss: &[Sentence]| -> Result<Vec<SentenceRepr>> {
        ss.iter().map(|s| model.represent(s.content_ids())).collect()
    };
    select_from_reprs(&rep(&pair.l1.sentences)?, &rep(&pair.l2.sentences)?, k)
}

#[derive(Debug, Clone)]
pub struct MinerConfig {
    pub k: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Record the whole cross product, not only channel-accepted pairs.
    pub log_rejects: bool,
    /// With zero epochs, still run one scoring pass at the initial version.
    pub initial_scoring: bool,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig {
            k: 4,
            batch_size: 50,
            epochs: 10,
            seed: 1,
            log_rejects: false,
            initial_scoring: false,
        }
    }
}

/// Unique accepted pairs of one epoch (or of the whole run).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extraction {
    pub pairs: Vec<(String, String)>,
}

impl Extraction {
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        let mut l1 = String::new();
        let mut l2 = String::new();
        for (a, b) in &self.pairs {
            l1.push_str(a);
            l1.push('\n');
            l2.push_str(b);
            l2.push('\n');
        }
        util::write_file(&dir.join(format!("{stem}.l1")), &l1)?;
        util::write_file(&dir.join(format!("{stem}.l2")), &l2)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub model: EncoderModel,
    pub log: MiningLog,
    /// Per-epoch unique pairs, in epoch order.
    pub per_epoch: Vec<Extraction>,
    /// Union over all epochs.
    pub all: Extraction,
    pub losses: Vec<f64>,
}

impl RunOutput {
    /// Writes `extracted.epochN.{l1,l2}` and `extracted.all.{l1,l2}`.
    pub fn write_exports(&self, dir: &Path) -> Result<()> {
        for (i, e) in self.per_epoch.iter().enumerate() {
            e.write(dir, &format!("extracted.epoch{}", i + 1))?;
        }
        self.all.write(dir, "extracted.all")
    }
}

/// Dedup key of an extracted pair: its token sequences.
type TokenKey = (Vec<u32>, Vec<u32>);

struct Extractor {
    seen: HashSet<TokenKey>,
    out: Extraction,
}

impl Extractor {
    fn new() -> Self {
        Extractor {
            seen: HashSet::new(),
            out: Extraction::default(),
        }
    }

    fn add(&mut self, a: &Sentence, b: &Sentence) {
        if self.seen.insert((a.ids.clone(), b.ids.clone())) {
            self.out.pairs.push((a.surface(), b.surface()));
        }
    }
}

/// Runs the self-supervised mining loop.
///
/// Document pairs are visited in a seeded shuffled order each epoch. Within
/// one batch-fill window every document pair is scored against the same
/// model snapshot; document pairs are scored in parallel and merged in order,
/// so the result does not depend on the thread count.
pub fn run_loop(
    corpus: &ComparableCorpus,
    mut model: EncoderModel,
    cfg: &MinerConfig,
    truth: Option<&HashSet<PairKey>>,
) -> Result<RunOutput> {
    if corpus.doc_pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = MiningLog::default();
    let mut buffer: Vec<TrainPair> = Vec::new();
    let mut per_epoch = Vec::new();
    let mut all = Extractor::new();
    let mut losses = Vec::new();
    let start_version = model.version;
    let chunk = (rayon::current_num_threads() * 2).max(1);

    let passes: Vec<usize> = if cfg.epochs == 0 && cfg.initial_scoring {
        vec![0]
    } else {
        (1..=cfg.epochs).collect()
    };

    for epoch in passes {
        let train = epoch > 0;
        let mut order: Vec<usize> = (0..corpus.doc_pairs.len()).collect();
        order.shuffle(&mut rng);
        let mut extractor = Extractor::new();
        let mut accepted_in_epoch = 0usize;
        let mut pos = 0;
        while pos < order.len() {
            let end = (pos + chunk).min(order.len());
            let snapshot = &model;
            let results: Vec<Result<Selection>> = order[pos..end]
                .par_iter()
                .map(|&d| select_pairs(snapshot, &corpus.doc_pairs[d], cfg.k))
                .collect();
            let mut trained = false;
            for (offset, sel) in results.into_iter().enumerate() {
                let pair = &corpus.doc_pairs[order[pos + offset]];
                let sel = sel?;
                let step = model.version - start_version;
                record_selection(&mut log, pair, &sel, epoch, step, model.version, cfg, truth);
                for &(i, j) in &sel.accepted_dual {
                    let (a, b) = (&pair.l1.sentences[i], &pair.l2.sentences[j]);
                    extractor.add(a, b);
                    all.add(a, b);
                    accepted_in_epoch += 1;
                    buffer.push(TrainPair {
                        l1: a.content_ids().to_vec(),
                        l2: b.content_ids().to_vec(),
                    });
                }
                if train && buffer.len() >= cfg.batch_size {
                    while buffer.len() >= cfg.batch_size {
                        let batch: Vec<TrainPair> = buffer.drain(..cfg.batch_size).collect();
                        losses.push(model.train_step(&batch, &mut rng)?);
                    }
                    trained = true;
                }
                if trained {
                    pos += offset + 1;
                    break;
                }
            }
            if !trained {
                pos = end;
            }
        }
        if train && !buffer.is_empty() {
            let batch: Vec<TrainPair> = std::mem::take(&mut buffer);
            losses.push(model.train_step(&batch, &mut rng)?);
        }
        buffer.clear();
        if accepted_in_epoch == 0 {
            warn!("epoch {epoch}: no pairs accepted");
        }
        info!(
            "epoch {epoch}: {accepted_in_epoch} accepted, {} unique, model version {}",
            extractor.out.pairs.len(),
            model.version
        );
        per_epoch.push(extractor.out);
    }

    Ok(RunOutput {
        model,
        log,
        per_epoch,
        all: all.out,
        losses,
    })
}

#[allow(clippy::too_many_arguments)]
fn record_selection(
    log: &mut MiningLog,
    pair: &DocPair,
    sel: &Selection,
    epoch: usize,
    step: u64,
    version: u64,
    cfg: &MinerConfig,
    truth: Option<&HashSet<PairKey>>,
) {
    let aw: HashSet<(usize, usize)> = sel.accepted_w.iter().copied().collect();
    let ah: HashSet<(usize, usize)> = sel.accepted_h.iter().copied().collect();
    let cells: Vec<(usize, usize)> = if cfg.log_rejects {
        (0..sel.n1).flat_map(|i| (0..sel.n2).map(move |j| (i, j))).collect()
    } else {
        let mut c: Vec<(usize, usize)> = aw.union(&ah).copied().collect();
        c.sort_unstable();
        c
    };
    for (i, j) in cells {
        let (a, b) = (&pair.l1.sentences[i], &pair.l2.sentences[j]);
        let key = PairKey::of(a, b);
        let acc_w = aw.contains(&(i, j));
        let acc_h = ah.contains(&(i, j));
        log.push(CandidatePair {
            is_true: truth.map(|t| t.contains(&key)),
            key,
            score_w: sel.score_w[i * sel.n2 + j],
            score_h: sel.score_h[i * sel.n2 + j],
            accepted_w: acc_w,
            accepted_h: acc_h,
            accepted_dual: acc_w && acc_h,
            step,
            model_version: version,
            epoch,
        });
    }
}

/// Counts of dual-accepted records per epoch.
pub fn accepted_per_epoch(log: &MiningLog) -> HashMap<usize, usize> {
    let mut m = HashMap::new();
    for r in log.accepted() {
        *m.entry(r.epoch).or_default() += 1;
    }
    m
}
