//! Synthetic comparable corpora with ground truth, built from parallel data.
//!
//! A set of parallel pairs is reserved as true pairs. The target sides of the
//! remaining pairs are deranged to make non-parallel (false) pairs, which are
//! oversampled to reach the requested false:true ratio. Everything is then
//! shuffled and cut into pseudo-article pairs; a true pair's two sides always
//! land in the same article pair.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::miner::PairKey;
use crate::textprep::{self, RawDocument};
use crate::util;

pub const TRUTH_HEADER: &str = "doc_id_l1\tline_l1\tdoc_id_l2\tline_l2";
pub const ROLES_HEADER: &str = "side\tdoc_id\tline\trole\tsource";

/// Average sentences per article on the first-language side of the
/// Wikipedia editions used as reference (en–fr, en–de, en–es).
pub const REFERENCE_ARTICLE_LEN: [(&str, usize); 3] = [("fr", 28), ("de", 29), ("es", 32)];

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_true: usize,
    /// False pairs per true pair.
    pub ratio: f64,
    pub article_len: usize,
    pub seed: u64,
    /// Maximum times each deranged false pair may be reused on average.
    pub max_oversample: f64,
    pub lang_l1: String,
    pub lang_l2: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_true: 2000,
            ratio: 4.0,
            article_len: 28,
            seed: 1,
            max_oversample: 16.0,
            lang_l1: "l1".into(),
            lang_l2: "l2".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    L1,
    L2,
}

/// Truth role of one emitted sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleRecord {
    pub side: Side,
    pub doc_id: String,
    pub line: usize,
    pub is_true: bool,
    /// Index of the parallel input pair this sentence came from.
    pub source: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledComparableCorpus {
    pub docs_l1: Vec<RawDocument>,
    pub docs_l2: Vec<RawDocument>,
    pub pairs: Vec<(String, String)>,
    /// Sorted true-pair keys.
    pub truth: Vec<PairKey>,
    pub roles: Vec<RoleRecord>,
    pub ratio: f64,
    pub article_len: usize,
    pub n_false: usize,
}

#[derive(Debug, Clone, Copy)]
enum Entry {
    True(usize),
    False { src: usize, tgt: usize },
}

impl Entry {
    fn src(&self) -> usize {
        match *self {
            Entry::True(p) => p,
            Entry::False { src, .. } => src,
        }
    }

    fn tgt(&self) -> usize {
        match *self {
            Entry::True(p) => p,
            Entry::False { tgt, .. } => tgt,
        }
    }
}

/// Uniform random derangement of `0..n` by rejection sampling.
pub fn derangement(n: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("cannot derange {n} element(s)")));
    }
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        p.shuffle(rng);
        if p.iter().enumerate().all(|(i, &j)| i != j) {
            return Ok(p);
        }
    }
}

/// One L2 line slot inside an article: the parallel source index of its
/// text and whether it is the target of a true pair.
#[derive(Debug, Clone, Copy)]
struct Slot {
    source: usize,
    is_true: bool,
}

/// Moves false L2 lines between articles so that no article holds both
/// sides of an original parallel pair outside the truth set. Returns the
/// number of lines that could not be moved (possible with very few
/// articles or heavy oversampling).
fn repair_colocation(l1_sources: &[HashSet<usize>], l2: &mut [Vec<Slot>], rng: &mut impl Rng) -> usize {
    let n = l2.len();
    let mut unresolved = 0;
    for a in 0..n {
        for s in 0..l2[a].len() {
            let slot = l2[a][s];
            if slot.is_true || !l1_sources[a].contains(&slot.source) {
                continue;
            }
            let start = rng.gen_range(0..n);
            let mut fixed = false;
            'search: for off in 1..n {
                let b = (start + off) % n;
                if b == a || l1_sources[b].contains(&slot.source) {
                    continue;
                }
                for t in 0..l2[b].len() {
                    let other = l2[b][t];
                    if !other.is_true && !l1_sources[a].contains(&other.source) {
                        l2[b][t] = slot;
                        l2[a][s] = other;
                        fixed = true;
                        break 'search;
                    }
                }
            }
            if !fixed {
                unresolved += 1;
            }
        }
    }
    unresolved
}

/// Builds a labeled synthetic comparable corpus from parallel pairs.
pub fn build_synthetic(
    parallel: &[(String, String)],
    cfg: &SynthConfig,
) -> Result<LabeledComparableCorpus> {
    if parallel.len() <= cfg.n_true {
        return Err(Error::InvalidArgument(format!(
            "need more than {} parallel pairs, got {}",
            cfg.n_true,
            parallel.len()
        )));
    }
    if cfg.ratio.is_nan() || cfg.ratio < 0.0 {
        return Err(Error::InvalidArgument("ratio must be non-negative".into()));
    }
    if cfg.article_len == 0 {
        return Err(Error::InvalidArgument("article length must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut idx: Vec<usize> = (0..parallel.len()).collect();
    idx.shuffle(&mut rng);
    let (true_idx, rest) = idx.split_at(cfg.n_true);

    let n_false = (cfg.ratio * cfg.n_true as f64).round() as usize;
    let mut entries: Vec<Entry> = true_idx.iter().map(|&p| Entry::True(p)).collect();
    if n_false > 0 {
        if rest.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "remainder of size {} cannot be deranged",
                rest.len()
            )));
        }
        if n_false as f64 > rest.len() as f64 * cfg.max_oversample {
            return Err(Error::InvalidArgument(format!(
                "{n_false} false pairs exceed the oversampling cap ({} × {})",
                rest.len(),
                cfg.max_oversample
            )));
        }
        let sigma = derangement(rest.len(), &mut rng)?;
        let mut base: Vec<Entry> = (0..rest.len())
            .map(|i| Entry::False {
                src: rest[i],
                tgt: rest[sigma[i]],
            })
            .collect();
        base.shuffle(&mut rng);
        if n_false <= base.len() {
            entries.extend_from_slice(&base[..n_false]);
        } else {
            entries.extend_from_slice(&base);
            for _ in base.len()..n_false {
                entries.push(base[rng.gen_range(0..base.len())]);
            }
        }
    }
    entries.shuffle(&mut rng);

    let articles: Vec<&[Entry]> = entries.chunks(cfg.article_len).collect();
    let l1_sources: Vec<HashSet<usize>> = articles
        .iter()
        .map(|a| a.iter().map(Entry::src).collect())
        .collect();
    let mut l2: Vec<Vec<Slot>> = articles
        .iter()
        .map(|a| {
            let mut slots: Vec<Slot> = a
                .iter()
                .map(|e| Slot {
                    source: e.tgt(),
                    is_true: matches!(e, Entry::True(_)),
                })
                .collect();
            slots.shuffle(&mut rng);
            slots
        })
        .collect();
    let unresolved = repair_colocation(&l1_sources, &mut l2, &mut rng);
    if unresolved > 0 {
        log::warn!("{unresolved} false target sentence(s) share an article with their original source");
    }

    let mut docs_l1 = Vec::with_capacity(articles.len());
    let mut docs_l2 = Vec::with_capacity(articles.len());
    let mut pairs = Vec::with_capacity(articles.len());
    let mut truth = Vec::with_capacity(cfg.n_true);
    let mut roles = Vec::with_capacity(entries.len() * 2);
    for (k, (art, slots)) in articles.iter().zip(&l2).enumerate() {
        let id1 = format!("{}-{:05}", cfg.lang_l1, k + 1);
        let id2 = format!("{}-{:05}", cfg.lang_l2, k + 1);
        let true_tgt_line: HashMap<usize, usize> = slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_true)
            .map(|(j, s)| (s.source, j))
            .collect();
        let mut lines1 = Vec::with_capacity(art.len());
        for (i, e) in art.iter().enumerate() {
            lines1.push(parallel[e.src()].0.clone());
            let is_true = matches!(e, Entry::True(_));
            if is_true {
                truth.push(PairKey::new(&id1, i, &id2, true_tgt_line[&e.src()]));
            }
            roles.push(RoleRecord {
                side: Side::L1,
                doc_id: id1.clone(),
                line: i,
                is_true,
                source: e.src(),
            });
        }
        let mut lines2 = Vec::with_capacity(slots.len());
        for (j, s) in slots.iter().enumerate() {
            lines2.push(parallel[s.source].1.clone());
            roles.push(RoleRecord {
                side: Side::L2,
                doc_id: id2.clone(),
                line: j,
                is_true: s.is_true,
                source: s.source,
            });
        }
        docs_l1.push(RawDocument {
            doc_id: id1.clone(),
            lines: lines1,
        });
        docs_l2.push(RawDocument {
            doc_id: id2.clone(),
            lines: lines2,
        });
        pairs.push((id1, id2));
    }
    truth.sort();
    Ok(LabeledComparableCorpus {
        docs_l1,
        docs_l2,
        pairs,
        truth,
        roles,
        ratio: cfg.ratio,
        article_len: cfg.article_len,
        n_false,
    })
}

impl LabeledComparableCorpus {
    pub fn truth_set(&self) -> HashSet<PairKey> {
        self.truth.iter().cloned().collect()
    }

    /// Writes `corpus.<l1>`, `corpus.<l2>`, `pairs.tsv`, `truth.tsv` and
    /// `roles.tsv` into `dir`.
    pub fn write(&self, dir: &Path, lang_l1: &str, lang_l2: &str) -> Result<()> {
        textprep::write_corpus(&dir.join(format!("corpus.{lang_l1}")), &self.docs_l1)?;
        textprep::write_corpus(&dir.join(format!("corpus.{lang_l2}")), &self.docs_l2)?;
        textprep::write_pairs(&dir.join("pairs.tsv"), &self.pairs)?;
        write_truth(&dir.join("truth.tsv"), &self.truth)?;
        let mut s = format!("{ROLES_HEADER}\n");
        for r in &self.roles {
            let side = match r.side {
                Side::L1 => "l1",
                Side::L2 => "l2",
            };
            let role = if r.is_true { "true" } else { "false" };
            let _ = writeln!(s, "{side}\t{}\t{}\t{role}\t{}", r.doc_id, r.line, r.source);
        }
        util::write_file(&dir.join("roles.tsv"), &s)
    }
}

pub fn write_truth(path: &Path, truth: &[PairKey]) -> Result<()> {
    let mut s = format!("{TRUTH_HEADER}\n");
    for k in truth {
        let _ = writeln!(s, "{}\t{}\t{}\t{}", k.doc_l1, k.line_l1, k.doc_l2, k.line_l2);
    }
    util::write_file(path, &s)
}

pub fn parse_truth(text: &str, src: &str) -> Result<HashSet<PairKey>> {
    util::data_lines(text, TRUTH_HEADER)
        .map(|(n, l)| {
            let f: Vec<&str> = l.split('\t').collect();
            let line = |s: &str| -> Result<usize> {
                s.parse().map_err(|_| Error::parse(src, n, format!("bad line id `{s}`")))
            };
            if f.len() != 4 {
                return Err(Error::parse(src, n, "expected 4 columns"));
            }
            Ok(PairKey::new(f[0], line(f[1])?, f[2], line(f[3])?))
        })
        .collect()
}

pub fn read_truth(path: &Path) -> Result<HashSet<PairKey>> {
    parse_truth(&util::read_to_string(path)?, &path.display().to_string())
}

/// Reads a line-aligned parallel corpus from two plain text files.
pub fn read_parallel(path_l1: &Path, path_l2: &Path) -> Result<Vec<(String, String)>> {
    let a = util::read_to_string(path_l1)?;
    let b = util::read_to_string(path_l2)?;
    let la: Vec<&str> = a.lines().collect();
    let lb: Vec<&str> = b.lines().collect();
    if la.len() != lb.len() {
        return Err(Error::InvalidArgument(format!(
            "parallel files differ in length: {} vs {}",
            la.len(),
            lb.len()
        )));
    }
    Ok(la
        .into_iter()
        .zip(lb)
        .map(|(x, y)| (x.to_string(), y.to_string()))
        .collect())
}
