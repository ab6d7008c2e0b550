//! Curriculum analyses over a mining log: similarity of accepted pairs over
//! training time, Gunning Fog readability, homograph ratio, n-gram
//! perplexity, and Pearson correlations between them.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::miner::MiningLog;
use crate::textprep::{is_punct_token, ComparableCorpus, Sentence};
use crate::util;

pub const CURRICULUM_HEADER: &str = "window_start_step,metric,mean,count";
pub const GF_HIST_HEADER: &str = "phase,epoch,bin_start,count";
pub const CORRELATIONS_HEADER: &str = "epoch,var1,var2,r,n";
pub const END_OF_SENTENCE: &str = "</s>";
pub const DEFAULT_DISCOUNT: f64 = 0.75;

fn is_vowel(c: char) -> bool {
    matches!(
        c,
        'a' | 'e' | 'i' | 'o' | 'u' | 'y'
            | 'à' | 'á' | 'â' | 'ã' | 'ä' | 'å' | 'æ'
            | 'è' | 'é' | 'ê' | 'ë'
            | 'ì' | 'í' | 'î' | 'ï'
            | 'ò' | 'ó' | 'ô' | 'õ' | 'ö' | 'ø' | 'œ'
            | 'ù' | 'ú' | 'û' | 'ü'
            | 'ý' | 'ÿ'
    )
}

/// Number of maximal vowel groups, at least 1.
pub fn syllables(word: &str) -> Result<usize> {
    if word.is_empty() {
        return Err(Error::EmptyWord);
    }
    let mut groups = 0;
    let mut prev = false;
    for c in word.chars().flat_map(char::to_lowercase) {
        let v = is_vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    Ok(groups.max(1))
}

/// Word, sentence and complex-word counts of a text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FogCounts {
    pub words: usize,
    pub sentences: usize,
    pub complex: usize,
}

impl FogCounts {
    pub fn of_sentence(words: &[String]) -> Self {
        let mut c = FogCounts {
            sentences: 1,
            ..Default::default()
        };
        for w in words.iter().filter(|w| !w.is_empty() && !is_punct_token(w)) {
            c.words += 1;
            if syllables(w).unwrap_or(1) > 2 {
                c.complex += 1;
            }
        }
        c
    }

    pub fn add(&mut self, other: FogCounts) {
        self.words += other.words;
        self.sentences += other.sentences;
        self.complex += other.complex;
    }

    pub fn index(&self) -> Result<f64> {
        if self.words == 0 || self.sentences == 0 {
            return Err(Error::NoWords);
        }
        let w = self.words as f64;
        Ok(0.4 * (w / self.sentences as f64 + 100.0 * self.complex as f64 / w))
    }
}

/// Gunning Fog index of a text given as sentences of surface words.
pub fn gunning_fog(sentences: &[Vec<String>]) -> Result<f64> {
    let mut c = FogCounts::default();
    for s in sentences {
        c.add(FogCounts::of_sentence(s));
    }
    c.index()
}

/// Fraction of tokens in `shared`; 0 for no tokens.
pub fn shared_fraction<'a>(tokens: impl IntoIterator<Item = &'a String>, shared: &HashSet<String>) -> f64 {
    let (mut n, mut hit) = (0usize, 0usize);
    for t in tokens {
        n += 1;
        if shared.contains(t) {
            hit += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        hit as f64 / n as f64
    }
}

/// Homograph ratio of a sentence pair over both sides' content tokens.
pub fn homograph_ratio(l1: &[String], l2: &[String], shared: &HashSet<String>) -> f64 {
    shared_fraction(l1.iter().chain(l2), shared)
}

/// Content token types occurring on both sides of the corpus.
pub fn shared_types(corpus: &ComparableCorpus) -> HashSet<String> {
    let a: HashSet<&String> = corpus.sentences_l1().flat_map(|s| s.content_tokens()).collect();
    corpus
        .sentences_l2()
        .flat_map(|s| s.content_tokens())
        .filter(|t| a.contains(t))
        .cloned()
        .collect()
}

/// Interpolated absolute-discounting n-gram language model over words.
#[derive(Debug, Clone)]
pub struct NGramLm {
    order: usize,
    discount: f64,
    /// Known words plus the end-of-sentence symbol.
    vocab: HashMap<String, u32>,
    /// `ngrams[n - 1]` holds counts of n-grams.
    ngrams: Vec<HashMap<Vec<u32>, u64>>,
    /// `contexts[n - 1]` maps an (n-1)-word history to (total, distinct).
    contexts: Vec<HashMap<Vec<u32>, (u64, u64)>>,
}

impl NGramLm {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Vocabulary size including the end-of-sentence symbol, excluding unk.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn unk(&self) -> u32 {
        self.vocab.len() as u32
    }

    fn bos(&self) -> u32 {
        self.vocab.len() as u32 + 1
    }

    pub fn word_id(&self, w: &str) -> u32 {
        self.vocab.get(w).copied().unwrap_or(self.unk())
    }

    /// P(w | history); `history` is most-recent-last and padded as needed.
    pub fn prob_id(&self, w: u32, history: &[u32]) -> f64 {
        let mut p = 1.0 / (self.vocab.len() + 1) as f64;
        for n in 1..=self.order {
            let need = n - 1;
            let h: Vec<u32> = if history.len() >= need {
                history[history.len() - need..].to_vec()
            } else {
                let mut v = vec![self.bos(); need - history.len()];
                v.extend_from_slice(history);
                v
            };
            if let Some(&(total, distinct)) = self.contexts[n - 1].get(&h) {
                let mut key = h;
                key.push(w);
                let c = self.ngrams[n - 1].get(&key).copied().unwrap_or(0) as f64;
                let t = total as f64;
                p = ((c - self.discount).max(0.0) + self.discount * distinct as f64 * p) / t;
            }
        }
        p
    }

    pub fn prob(&self, w: &str, history: &[&str]) -> f64 {
        let h: Vec<u32> = history.iter().map(|x| self.word_id(x)).collect();
        self.prob_id(self.word_id(w), &h)
    }

    /// Natural-log probability of a sentence, end-of-sentence included.
    /// Returns (log probability, predicted tokens).
    pub fn sentence_logprob(&self, words: &[String]) -> (f64, usize) {
        let mut ids: Vec<u32> = words.iter().map(|w| self.word_id(w)).collect();
        ids.push(self.vocab[END_OF_SENTENCE]);
        let mut lp = 0.0;
        let mut hist: Vec<u32> = vec![self.bos(); self.order.saturating_sub(1)];
        for &w in &ids {
            lp += self.prob_id(w, &hist).ln();
            if !hist.is_empty() {
                hist.remove(0);
                hist.push(w);
            }
        }
        (lp, ids.len())
    }
}

pub fn train_lm(sentences: &[Vec<String>], order: usize) -> Result<NGramLm> {
    train_lm_with_discount(sentences, order, DEFAULT_DISCOUNT)
}

pub fn train_lm_with_discount(sentences: &[Vec<String>], order: usize, discount: f64) -> Result<NGramLm> {
    if order < 1 {
        return Err(Error::InvalidArgument("n-gram order must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&discount) {
        return Err(Error::InvalidArgument("discount must be in [0, 1)".into()));
    }
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut vocab: HashMap<String, u32> = HashMap::new();
    let mut words: Vec<&str> = sentences.iter().flatten().map(String::as_str).collect();
    words.push(END_OF_SENTENCE);
    words.sort_unstable();
    words.dedup();
    for w in words {
        let id = vocab.len() as u32;
        vocab.insert(w.to_string(), id);
    }
    let mut lm = NGramLm {
        order,
        discount,
        vocab,
        ngrams: vec![HashMap::new(); order],
        contexts: vec![HashMap::new(); order],
    };
    let eos = lm.vocab[END_OF_SENTENCE];
    let bos = lm.bos();
    for s in sentences {
        let mut seq = vec![bos; order - 1];
        seq.extend(s.iter().map(|w| lm.vocab[w.as_str()]));
        seq.push(eos);
        for pos in order - 1..seq.len() {
            for n in 1..=order {
                let gram = seq[pos + 1 - n..=pos].to_vec();
                *lm.ngrams[n - 1].entry(gram).or_default() += 1;
            }
        }
    }
    for n in 1..=order {
        let mut ctx: HashMap<Vec<u32>, (u64, u64)> = HashMap::new();
        for (gram, &c) in &lm.ngrams[n - 1] {
            let e = ctx.entry(gram[..n - 1].to_vec()).or_default();
            e.0 += c;
            e.1 += 1;
        }
        lm.contexts[n - 1] = ctx;
    }
    Ok(lm)
}

/// exp of the mean negative log-likelihood per token, end-of-sentence
/// symbols included.
pub fn perplexity(lm: &NGramLm, sentences: &[Vec<String>]) -> Result<f64> {
    if sentences.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (mut lp, mut n) = (0.0, 0usize);
    for s in sentences {
        let (l, k) = lm.sentence_logprob(s);
        lp += l;
        n += k;
    }
    Ok((-lp / n as f64).exp())
}

/// Sample Pearson correlation, computed in two passes.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument("length mismatch".into()));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidArgument("need at least two points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// What the analyses need to look sentences up and score them.
pub struct Inputs<'a> {
    pub corpus: &'a ComparableCorpus,
    pub shared: &'a HashSet<String>,
    pub lm_l1: Option<&'a NGramLm>,
    pub lm_l2: Option<&'a NGramLm>,
}

/// Measures of one dual-accepted pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatures {
    pub epoch: usize,
    pub step: u64,
    /// min(score_w, score_h).
    pub similarity: f64,
    pub homograph: f64,
    pub homograph_l1: f64,
    pub fog_l1: FogCounts,
    /// Sentence-level GF of the first-language side.
    pub gf_l1: Option<f64>,
    pub ppl_l1: Option<f64>,
    pub ppl_l2: Option<f64>,
}

fn lookup(sents: impl Iterator<Item = Sentence>) -> HashMap<(String, usize), Sentence> {
    sents.map(|s| ((s.doc_id.clone(), s.line_id), s)).collect()
}

/// Features of every dual-accepted record, in log order.
pub fn pair_features(log: &MiningLog, inputs: &Inputs<'_>) -> Result<Vec<PairFeatures>> {
    let l1 = lookup(inputs.corpus.sentences_l1().cloned());
    let l2 = lookup(inputs.corpus.sentences_l2().cloned());
    let ppl = |lm: Option<&NGramLm>, s: &Sentence| lm.map(|lm| perplexity(lm, std::slice::from_ref(&s.surface_words))).transpose();
    let mut out = Vec::new();
    for r in log.accepted() {
        let k = &r.key;
        let (Some(a), Some(b)) = (
            l1.get(&(k.doc_l1.clone(), k.line_l1)),
            l2.get(&(k.doc_l2.clone(), k.line_l2)),
        ) else {
            return Err(Error::InvalidArgument(format!(
                "log references a sentence missing from the corpus: {}:{} / {}:{}",
                k.doc_l1, k.line_l1, k.doc_l2, k.line_l2
            )));
        };
        let fog = FogCounts::of_sentence(&a.surface_words);
        out.push(PairFeatures {
            epoch: r.epoch,
            step: r.step,
            similarity: r.score_w.min(r.score_h),
            homograph: homograph_ratio(a.content_tokens(), b.content_tokens(), inputs.shared),
            homograph_l1: shared_fraction(a.content_tokens(), inputs.shared),
            fog_l1: fog,
            gf_l1: fog.index().ok(),
            ppl_l1: ppl(inputs.lm_l1, a)?,
            ppl_l2: ppl(inputs.lm_l2, b)?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub window_start: u64,
    pub metric: &'static str,
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub window: u64,
    pub records: Vec<MetricRecord>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl MetricSeries {
    pub fn windows(&self) -> Vec<u64> {
        let mut w: Vec<u64> = self.records.iter().map(|r| r.window_start).collect();
        w.dedup();
        w
    }

    /// `(window_start, mean)` of one metric in window order.
    pub fn metric(&self, name: &str) -> Vec<(u64, f64)> {
        self.records
            .iter()
            .filter(|r| r.metric == name)
            .map(|r| (r.window_start, r.mean))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{CURRICULUM_HEADER}\n");
        for r in &self.records {
            let _ = writeln!(s, "{},{},{:.6},{}", r.window_start, r.metric, r.mean, r.count);
        }
        s
    }
}

/// Per-window aggregates over disjoint windows of `window` training steps.
///
/// The `gf` metric is computed on the window's pooled first-language text;
/// `gf_sentence_mean` is the mean of sentence-level scores.
pub fn window_metrics(features: &[PairFeatures], window: u64) -> Result<MetricSeries> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be positive".into()));
    }
    let mut groups: BTreeMap<u64, Vec<&PairFeatures>> = BTreeMap::new();
    for f in features {
        groups.entry(f.step / window * window).or_default().push(f);
    }
    let mut records = Vec::new();
    for (start, fs) in groups {
        let push = |records: &mut Vec<MetricRecord>, metric: &'static str, values: Vec<f64>| {
            if let Some(m) = mean(&values) {
                records.push(MetricRecord {
                    window_start: start,
                    metric,
                    mean: m,
                    count: values.len(),
                });
            }
        };
        push(&mut records, "similarity", fs.iter().map(|f| f.similarity).collect());
        let mut pooled = FogCounts::default();
        for f in &fs {
            pooled.add(f.fog_l1);
        }
        if let Ok(gf) = pooled.index() {
            records.push(MetricRecord {
                window_start: start,
                metric: "gf",
                mean: gf,
                count: fs.len(),
            });
        }
        push(&mut records, "gf_sentence_mean", fs.iter().filter_map(|f| f.gf_l1).collect());
        push(&mut records, "homograph_ratio", fs.iter().map(|f| f.homograph).collect());
        push(&mut records, "homograph_ratio_l1", fs.iter().map(|f| f.homograph_l1).collect());
        push(&mut records, "perplexity_l1", fs.iter().filter_map(|f| f.ppl_l1).collect());
        push(&mut records, "perplexity_l2", fs.iter().filter_map(|f| f.ppl_l2).collect());
    }
    Ok(MetricSeries { window, records })
}

fn epochs_of(features: &[PairFeatures]) -> Vec<usize> {
    let mut e: Vec<usize> = features.iter().map(|f| f.epoch).collect();
    e.sort_unstable();
    e.dedup();
    e
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistRow {
    pub phase: &'static str,
    pub epoch: usize,
    pub bin_start: i64,
    pub count: usize,
}

/// Sentence-level GF histograms (bin width 1) of the first, middle and
/// last epochs.
pub fn gf_histograms(features: &[PairFeatures]) -> Vec<HistRow> {
    let epochs = epochs_of(features);
    if epochs.is_empty() {
        return Vec::new();
    }
    let phases = [
        ("first", epochs[0]),
        ("middle", epochs[epochs.len() / 2]),
        ("last", epochs[epochs.len() - 1]),
    ];
    let mut rows = Vec::new();
    for (phase, epoch) in phases {
        let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
        for gf in features.iter().filter(|f| f.epoch == epoch).filter_map(|f| f.gf_l1) {
            *bins.entry(gf.floor() as i64).or_default() += 1;
        }
        rows.extend(bins.into_iter().map(|(bin_start, count)| HistRow {
            phase,
            epoch,
            bin_start,
            count,
        }));
    }
    rows
}

pub fn gf_hist_csv(rows: &[HistRow]) -> String {
    let mut s = format!("{GF_HIST_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.phase, r.epoch, r.bin_start, r.count);
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrRow {
    pub epoch: usize,
    pub var1: &'static str,
    pub var2: &'static str,
    /// `None` when the correlation is undefined.
    pub r: Option<f64>,
    pub n: usize,
}

/// Pearson correlations over the first `max_pairs` accepted pairs of the
/// first and last epochs.
pub fn correlations(features: &[PairFeatures], max_pairs: usize) -> Vec<CorrRow> {
    let epochs = epochs_of(features);
    let mut chosen: Vec<usize> = epochs.first().into_iter().chain(epochs.last()).copied().collect();
    chosen.dedup();
    let mut rows = Vec::new();
    for epoch in chosen {
        let fs: Vec<&PairFeatures> = features
            .iter()
            .filter(|f| f.epoch == epoch && f.gf_l1.is_some())
            .take(max_pairs)
            .collect();
        let sim: Vec<f64> = fs.iter().map(|f| f.similarity).collect();
        let hom: Vec<f64> = fs.iter().map(|f| f.homograph).collect();
        let gf: Vec<f64> = fs.iter().filter_map(|f| f.gf_l1).collect();
        for (var1, xs, var2, ys) in [
            ("homograph_ratio", &hom, "similarity", &sim),
            ("gf", &gf, "similarity", &sim),
            ("gf", &gf, "homograph_ratio", &hom),
        ] {
            rows.push(CorrRow {
                epoch,
                var1,
                var2,
                r: pearson(xs, ys).ok(),
                n: fs.len(),
            });
        }
    }
    rows
}

pub fn correlations_csv(rows: &[CorrRow]) -> String {
    let mut s = format!("{CORRELATIONS_HEADER}\n");
    for r in rows {
        let v = r.r.map_or_else(|| "nan".to_string(), |x| format!("{x:.6}"));
        let _ = writeln!(s, "{},{},{},{},{}", r.epoch, r.var1, r.var2, v, r.n);
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub series: MetricSeries,
    pub features: Vec<PairFeatures>,
    pub gf_hist: Vec<HistRow>,
    pub correlations: Vec<CorrRow>,
}

pub fn analyze(log: &MiningLog, inputs: &Inputs<'_>, window: u64, max_corr_pairs: usize) -> Result<Report> {
    let features = pair_features(log, inputs)?;
    Ok(Report {
        series: window_metrics(&features, window)?,
        gf_hist: gf_histograms(&features),
        correlations: correlations(&features, max_corr_pairs),
        features,
    })
}

impl Report {
    /// Writes `curriculum.csv`, `gf_hist.csv` and `correlations.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        util::write_file(&dir.join("curriculum.csv"), &self.series.to_csv())?;
        util::write_file(&dir.join("gf_hist.csv"), &gf_hist_csv(&self.gf_hist))?;
        util::write_file(&dir.join("correlations.csv"), &correlations_csv(&self.correlations))
    }
}
