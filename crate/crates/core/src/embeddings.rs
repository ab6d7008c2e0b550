//! Pre-trained, cross-lingually aligned word embeddings.
//!
//! Each language gets its own skip-gram model over the shared subword
//! vocabulary. The second language is then rotated onto the first with an
//! orthogonal Procrustes map fitted on tokens spelled identically in both
//! languages, and both are folded into one table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::util::{self, dot};

/// `|vocab| × dim` matrix of word vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    data: Vec<f64>,
    normalized: bool,
}

impl EmbeddingTable {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        EmbeddingTable {
            dim,
            data: vec![0.0; rows * dim],
            normalized: false,
        }
    }

    /// Rows drawn uniformly from `(-scale, scale)`.
    pub fn random(rows: usize, dim: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let data = (0..rows * dim).map(|_| rng.gen_range(-scale..scale)).collect();
        EmbeddingTable {
            dim,
            data,
            normalized: false,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument("ragged embedding rows".into()));
        }
        Ok(EmbeddingTable {
            dim,
            data: rows.concat(),
            normalized: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        self.normalized = false;
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        self.normalized = false;
        &mut self.data
    }

    /// Scales every row to unit L2 norm. Zero rows stay zero.
    pub fn normalize_rows(&mut self) {
        let d = self.dim;
        for row in self.data.chunks_mut(d) {
            let n = util::norm(row);
            if n > 0.0 {
                row.iter_mut().for_each(|x| *x /= n);
            }
        }
        self.normalized = true;
    }

    /// Subtracts the mean of the given rows from each of them.
    pub fn center_rows(&mut self, rows: &[usize]) {
        if rows.is_empty() {
            return;
        }
        let d = self.dim;
        let mut mean = vec![0.0; d];
        for &r in rows {
            for (m, x) in mean.iter_mut().zip(self.row(r)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= rows.len() as f64);
        for &r in rows {
            for (x, m) in self.row_mut(r).iter_mut().zip(&mean) {
                *x -= m;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn to_text(&self, tokens: &[String]) -> Result<String> {
        if tokens.len() != self.rows() {
            return Err(Error::InvalidArgument(format!(
                "{} tokens for {} rows",
                tokens.len(),
                self.rows()
            )));
        }
        let mut s = format!("{} {}\n", self.rows(), self.dim);
        for (i, t) in tokens.iter().enumerate() {
            s.push_str(t);
            for v in self.row(i) {
                // `{:?}` prints the shortest representation that round-trips.
                let _ = write!(s, " {v:?}");
            }
            s.push('\n');
        }
        Ok(s)
    }

    /// Parses the `<count> <dim>` header format into (tokens, table).
    pub fn from_text(text: &str) -> Result<(Vec<String>, Self)> {
        let src = "<embeddings>";
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::parse(src, 1, "missing header"))?;
        let mut it = header.split_whitespace().map(str::parse::<usize>);
        let (Some(Ok(count)), Some(Ok(dim)), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::parse(src, 1, "expected `<count> <dim>`"));
        };
        let mut tokens = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        for (i, line) in lines.enumerate().take(count) {
            let mut fields = line.split(' ');
            let tok = fields.next().unwrap_or_default();
            let vals: Vec<f64> = fields
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(src, i + 2, "bad float"))?;
            if vals.len() != dim {
                return Err(Error::parse(src, i + 2, format!("expected {dim} values")));
            }
            tokens.push(tok.to_string());
            data.extend(vals);
        }
        if tokens.len() != count {
            return Err(Error::parse(src, count + 1, "fewer rows than declared"));
        }
        Ok((
            tokens,
            EmbeddingTable {
                dim,
                data,
                normalized: false,
            },
        ))
    }

    pub fn save(&self, path: &Path, tokens: &[String]) -> Result<()> {
        util::write_file(path, &self.to_text(tokens)?)
    }

    /// Loads external vectors for `vocab`; tokens missing from the file get
    /// seeded random rows.
    pub fn load_for_vocab(path: &Path, vocab: &[String], seed: u64) -> Result<Self> {
        let (tokens, table) = Self::from_text(&util::read_to_string(path)?)?;
        let by_token: std::collections::HashMap<&str, usize> =
            tokens.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = EmbeddingTable::random(vocab.len(), table.dim, 0.5, &mut rng);
        let mut missing = 0;
        for (i, t) in vocab.iter().enumerate() {
            match by_token.get(t.as_str()) {
                Some(&j) => out.row_mut(i).copy_from_slice(table.row(j)),
                None => missing += 1,
            }
        }
        if missing > 0 {
            warn!("{missing} of {} vocabulary tokens missing from {}", vocab.len(), path.display());
        }
        out.normalize_rows();
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 64,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
            seed: 1,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gradients of the negative-sampling loss.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGrad {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Negative-sampling loss for one (center, context) pair:
/// `-log σ(u_o·v_c) - Σ_k log σ(-u_k·v_c)`, with its gradients.
pub fn sgns_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> (f64, SgnsGrad) {
    let d = center.len();
    let s = dot(context, center);
    let p = sigmoid(s);
    let mut loss = -p.max(f64::MIN_POSITIVE).ln();
    let mut g_center: Vec<f64> = context.iter().map(|u| (p - 1.0) * u).collect();
    let g_context: Vec<f64> = center.iter().map(|v| (p - 1.0) * v).collect();
    let mut g_negs = Vec::with_capacity(negatives.len());
    for u in negatives {
        let q = sigmoid(dot(u, center));
        loss -= (1.0 - q).max(f64::MIN_POSITIVE).ln();
        for j in 0..d {
            g_center[j] += q * u[j];
        }
        g_negs.push(center.iter().map(|v| q * v).collect());
    }
    (
        loss,
        SgnsGrad {
            center: g_center,
            context: g_context,
            negatives: g_negs,
        },
    )
}

/// Cumulative unigram^0.75 table for negative sampling.
struct NegativeSampler {
    ids: Vec<u32>,
    cumulative: Vec<f64>,
}

impl NegativeSampler {
    fn new(counts: &BTreeMap<u32, u64>) -> Self {
        let mut ids = Vec::with_capacity(counts.len());
        let mut cumulative = Vec::with_capacity(counts.len());
        let mut acc = 0.0;
        for (&id, &c) in counts {
            acc += (c as f64).powf(0.75);
            ids.push(id);
            cumulative.push(acc);
        }
        NegativeSampler { ids, cumulative }
    }

    fn sample(&self, rng: &mut impl Rng) -> u32 {
        let total = *self.cumulative.last().expect("non-empty sampler");
        let x = rng.gen_range(0.0..total);
        let i = self.cumulative.partition_point(|&c| c <= x);
        self.ids[i.min(self.ids.len() - 1)]
    }
}

/// Trains skip-gram with negative sampling by plain SGD.
///
/// Returns the input (center) vectors for `vocab_size` rows, un-normalized.
/// Rows of tokens absent from `sentences` keep their random initialization.
pub fn train_skipgram(
    sentences: &[Vec<u32>],
    vocab_size: usize,
    cfg: &SkipGramConfig,
) -> Result<EmbeddingTable> {
    if sentences.iter().all(Vec::is_empty) {
        return Err(Error::EmptyCorpus);
    }
    if cfg.dim < 2 {
        return Err(Error::InvalidArgument("embedding dim must be at least 2".into()));
    }
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for s in sentences {
        for &t in s {
            if t as usize >= vocab_size {
                return Err(Error::OutOfVocab(t));
            }
            *counts.entry(t).or_default() += 1;
        }
    }
    if counts.len() < 2 {
        return Err(Error::VocabTooSmall(counts.len()));
    }

    let d = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut input = EmbeddingTable::random(vocab_size, d, 0.5 / d as f64, &mut rng);
    let mut output = vec![0.0; vocab_size * d];
    let sampler = NegativeSampler::new(&counts);

    let total_tokens: u64 = counts.values().sum();
    let total_steps = (total_tokens as f64) * cfg.epochs as f64;
    let mut seen = 0.0;
    let mut grad_center = vec![0.0; d];
    let data = input.as_mut_slice();

    for _ in 0..cfg.epochs {
        for s in sentences {
            for (pos, &center) in s.iter().enumerate() {
                let lr = (cfg.lr * (1.0 - seen / total_steps)).max(cfg.lr * 1e-4);
                seen += 1.0;
                let c0 = center as usize * d;
                let lo = pos.saturating_sub(cfg.window);
                let hi = (pos + cfg.window + 1).min(s.len());
                for ctx_pos in lo..hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let ctx = s[ctx_pos];
                    grad_center.iter_mut().for_each(|g| *g = 0.0);
                    for k in 0..=cfg.negatives {
                        let (target, label) = if k == 0 {
                            (ctx, 1.0)
                        } else {
                            let n = sampler.sample(&mut rng);
                            if n == ctx {
                                continue;
                            }
                            (n, 0.0)
                        };
                        let o0 = target as usize * d;
                        let score = dot(&data[c0..c0 + d], &output[o0..o0 + d]);
                        // d(loss)/d(score) = σ(score) - label
                        let g = sigmoid(score) - label;
                        for j in 0..d {
                            grad_center[j] += g * output[o0 + j];
                            output[o0 + j] -= lr * g * data[c0 + j];
                        }
                    }
                    for j in 0..d {
                        data[c0 + j] -= lr * grad_center[j];
                    }
                }
            }
        }
    }
    if !input.all_finite() {
        return Err(Error::InvalidArgument(
            "skip-gram diverged; lower the learning rate".into(),
        ));
    }
    Ok(input)
}

/// Identical surface forms present in both languages, most frequent first.
///
/// Frequencies are summed over both languages; ties sort by token.
pub fn seed_dictionary(
    freq_l1: &BTreeMap<String, u64>,
    freq_l2: &BTreeMap<String, u64>,
    top_n: usize,
) -> Result<Vec<(String, String)>> {
    let mut shared: Vec<(&String, u64)> = freq_l1
        .iter()
        .filter_map(|(t, a)| freq_l2.get(t).map(|b| (t, a + b)))
        .collect();
    if shared.is_empty() {
        return Err(Error::NoSeedDictionary);
    }
    shared.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(shared
        .into_iter()
        .take(top_n)
        .map(|(t, _)| (t.clone(), t.clone()))
        .collect())
}

/// Square orthogonal map, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Orthogonal {
    dim: usize,
    data: Vec<f64>,
}

impl Orthogonal {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Orthogonal { dim, data }
    }

    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dim * dim);
        Orthogonal { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.data.chunks(self.dim).map(|row| dot(row, v)).collect()
    }

    /// `max |WᵀW − I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let s: f64 = (0..d).map(|k| self.get(k, i) * self.get(k, j)).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }
}

/// Orthogonal `W` minimizing `Σ ‖W·src_i − tgt_i‖²` over dictionary pairs
/// `(src row, tgt row)`, from the SVD of the cross-covariance.
pub fn procrustes_align(
    src: &EmbeddingTable,
    tgt: &EmbeddingTable,
    dictionary: &[(u32, u32)],
) -> Result<Orthogonal> {
    let d = src.dim();
    if tgt.dim() != d {
        return Err(Error::InvalidArgument("embedding dims differ".into()));
    }
    if dictionary.len() < 2 {
        return Err(Error::DegenerateDictionary);
    }
    let mut m = DMatrix::<f64>::zeros(d, d);
    for &(s, t) in dictionary {
        let (s, t) = (s as usize, t as usize);
        if s >= src.rows() || t >= tgt.rows() {
            return Err(Error::OutOfVocab(s.max(t) as u32));
        }
        let (sv, tv) = (src.row(s), tgt.row(t));
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] += tv[i] * sv[j];
            }
        }
    }
    let svd = m.svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if !(max_sv > 0.0) || min_sv / max_sv < 1e-10 {
        return Err(Error::DegenerateDictionary);
    }
    let u = svd.u.ok_or(Error::DegenerateDictionary)?;
    let v_t = svd.v_t.ok_or(Error::DegenerateDictionary)?;
    let w = u * v_t;
    let data = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|ij| w[ij]).collect();
    Ok(Orthogonal { dim: d, data })
}

/// Mean cosine of dictionary pairs, optionally mapping the source side.
pub fn dictionary_cosine(
    src: &EmbeddingTable,
    tgt: &EmbeddingTable,
    dictionary: &[(u32, u32)],
    map: Option<&Orthogonal>,
) -> f64 {
    if dictionary.is_empty() {
        return 0.0;
    }
    let total: f64 = dictionary
        .iter()
        .map(|&(s, t)| {
            let sv = match map {
                Some(w) => w.apply(src.row(s as usize)),
                None => src.row(s as usize).to_vec(),
            };
            util::cosine(&sv, tgt.row(t as usize))
        })
        .sum();
    total / dictionary.len() as f64
}

/// Settings for the full bilingual initialization.
#[derive(Debug, Clone)]
pub struct AlignConfig {
    pub skipgram: SkipGramConfig,
    /// Maximum seed dictionary size.
    pub seed_dict_size: usize,
    /// Mean-center each language's vectors (between two unit
    /// normalizations) before mapping.
    pub center: bool,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            skipgram: SkipGramConfig::default(),
            seed_dict_size: 5000,
            center: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlignReport {
    pub dictionary_size: usize,
    pub cosine_before: f64,
    pub cosine_after: f64,
}

/// Trains one skip-gram model per language, maps the second onto the first
/// and merges both into a unit-normalized table over the shared vocabulary.
///
/// Rows of tokens seen in both languages average the two (mapped) vectors;
/// rows seen in neither keep a seeded random vector.
pub fn build_aligned_table(
    sentences_l1: &[Vec<u32>],
    sentences_l2: &[Vec<u32>],
    vocab: &[String],
    cfg: &AlignConfig,
) -> Result<(EmbeddingTable, AlignReport)> {
    let n = vocab.len();
    let mut sg2 = cfg.skipgram.clone();
    sg2.seed = cfg.skipgram.seed.wrapping_add(1);
    let mut e1 = train_skipgram(sentences_l1, n, &cfg.skipgram)?;
    let mut e2 = train_skipgram(sentences_l2, n, &sg2)?;
    let freqs = |ss: &[Vec<u32>]| {
        let mut f: BTreeMap<String, u64> = BTreeMap::new();
        for s in ss {
            for &t in s {
                *f.entry(vocab[t as usize].clone()).or_default() += 1;
            }
        }
        f
    };
    let f1 = freqs(sentences_l1);
    let f2 = freqs(sentences_l2);
    let present = |f: &BTreeMap<String, u64>| -> Vec<usize> {
        (0..n).filter(|&i| f.contains_key(&vocab[i])).collect()
    };
    for (e, f) in [(&mut e1, &f1), (&mut e2, &f2)] {
        e.normalize_rows();
        if cfg.center {
            e.center_rows(&present(f));
            e.normalize_rows();
        }
    }
    let index: std::collections::HashMap<&str, u32> =
        vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i as u32)).collect();
    let dict: Vec<(u32, u32)> = seed_dictionary(&f1, &f2, cfg.seed_dict_size)?
        .iter()
        .map(|(a, b)| (index[a.as_str()], index[b.as_str()]))
        .collect();

    // Map language 2 into language 1's space.
    let w = procrustes_align(&e2, &e1, &dict)?;
    let report = AlignReport {
        dictionary_size: dict.len(),
        cosine_before: dictionary_cosine(&e2, &e1, &dict, None),
        cosine_after: dictionary_cosine(&e2, &e1, &dict, Some(&w)),
    };

    let mut out = e1.clone();
    for (i, tok) in vocab.iter().enumerate() {
        let in1 = f1.contains_key(tok);
        let in2 = f2.contains_key(tok);
        if in2 {
            let mapped = w.apply(e2.row(i));
            let row = out.row_mut(i);
            if in1 {
                row.iter_mut().zip(&mapped).for_each(|(a, b)| *a = 0.5 * (*a + b));
            } else {
                row.copy_from_slice(&mapped);
            }
        }
    }
    out.normalize_rows();
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation2(theta: f64) -> [[f64; 2]; 2] {
        [[theta.cos(), -theta.sin()], [theta.sin(), theta.cos()]]
    }

    #[test]
    fn procrustes_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = EmbeddingTable::random(10, 4, 1.0, &mut rng);
        let dict: Vec<(u32, u32)> = (0..10).map(|i| (i, i)).collect();
        let w = procrustes_align(&e, &e, &dict).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let t = if i == j { 1.0 } else { 0.0 };
                assert!((w.get(i, j) - t).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let r = rotation2(0.7);
        let src = EmbeddingTable::from_rows(&[vec![1.0, 0.2], vec![-0.3, 0.9], vec![0.5, 0.5]])
            .unwrap();
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                let v = src.row(i);
                vec![r[0][0] * v[0] + r[0][1] * v[1], r[1][0] * v[0] + r[1][1] * v[1]]
            })
            .collect();
        let tgt = EmbeddingTable::from_rows(&rows).unwrap();
        let w = procrustes_align(&src, &tgt, &[(0, 0), (1, 1), (2, 2)]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((w.get(i, j) - r[i][j]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn procrustes_rejects_degenerate() {
        let e = EmbeddingTable::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            procrustes_align(&e, &e, &[(0, 0)]),
            Err(Error::DegenerateDictionary)
        ));
        // Two collinear pairs: rank 1 cross-covariance.
        let c = EmbeddingTable::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert!(matches!(
            procrustes_align(&c, &c, &[(0, 0), (1, 1)]),
            Err(Error::DegenerateDictionary)
        ));
    }

    fn freq(items: &[(&str, u64)]) -> BTreeMap<String, u64> {
        items.iter().map(|(t, c)| (t.to_string(), *c)).collect()
    }

    #[test]
    fn seed_dictionary_examples() {
        let d = seed_dictionary(
            &freq(&[("die", 1), ("cat", 1)]),
            &freq(&[("die", 1), ("chat", 1)]),
            10,
        )
        .unwrap();
        assert_eq!(d, vec![("die".to_string(), "die".to_string())]);

        assert!(matches!(
            seed_dictionary(&freq(&[("a", 1)]), &freq(&[("b", 1)]), 10),
            Err(Error::NoSeedDictionary)
        ));

        let d = seed_dictionary(
            &freq(&[("x", 1), ("y", 5)]),
            &freq(&[("x", 1), ("y", 1)]),
            1,
        )
        .unwrap();
        assert_eq!(d, vec![("y".to_string(), "y".to_string())]);
    }

    #[test]
    fn skipgram_zero_epochs_returns_init() {
        let cfg = SkipGramConfig {
            dim: 4,
            epochs: 0,
            ..Default::default()
        };
        let s = vec![vec![0, 1, 2]];
        let a = train_skipgram(&s, 3, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let init = EmbeddingTable::random(3, 4, 0.5 / 4.0, &mut rng);
        assert_eq!(a, init);
    }

    #[test]
    fn skipgram_errors() {
        let cfg = SkipGramConfig::default();
        assert!(matches!(
            train_skipgram(&[vec![0, 0, 0]], 3, &cfg),
            Err(Error::VocabTooSmall(1))
        ));
        assert!(matches!(train_skipgram(&[], 3, &cfg), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn skipgram_deterministic_and_cooccurrence() {
        // Tokens 0 and 1 always co-occur; 2 and 3 always co-occur; the two
        // groups never share a window.
        let mut s = Vec::new();
        for _ in 0..200 {
            s.push(vec![0, 1, 0, 1]);
            s.push(vec![2, 3, 2, 3]);
        }
        let cfg = SkipGramConfig {
            dim: 8,
            window: 2,
            negatives: 3,
            epochs: 20,
            lr: 0.05,
            seed: 9,
        };
        let a = train_skipgram(&s, 4, &cfg).unwrap();
        let b = train_skipgram(&s, 4, &cfg).unwrap();
        assert_eq!(a, b);
        let cab = util::cosine(a.row(0), a.row(1));
        let cac = util::cosine(a.row(0), a.row(2));
        assert!(cab > cac, "cos(A,B)={cab} cos(A,C)={cac}");
    }

    #[test]
    fn embedding_text_roundtrip() {
        let e = EmbeddingTable::from_rows(&[vec![0.1, -2.5], vec![1e-9, 3.0]]).unwrap();
        let toks = vec!["a".to_string(), "b</w>".to_string()];
        let (t2, e2) = EmbeddingTable::from_text(&e.to_text(&toks).unwrap()).unwrap();
        assert_eq!(t2, toks);
        assert_eq!(e2, e);
        assert!(EmbeddingTable::from_text("2 2\na 1 2\n").is_err());
    }

    #[test]
    fn normalize_rows_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut e = EmbeddingTable::random(20, 5, 1.0, &mut rng);
        e.normalize_rows();
        assert!(e.is_normalized());
        for i in 0..20 {
            assert!((util::norm(e.row(i)) - 1.0).abs() < 1e-6);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn procrustes_orthogonal_and_improves(seed in 0u64..1000, d in 2usize..7, extra in 0usize..10) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let n = d + extra + 1;
                let src = EmbeddingTable::random(n, d, 1.0, &mut rng);
                let tgt = EmbeddingTable::random(n, d, 1.0, &mut rng);
                let dict: Vec<(u32, u32)> = (0..n as u32).map(|i| (i, i)).collect();
                if let Ok(w) = procrustes_align(&src, &tgt, &dict) {
                    prop_assert!(w.orthogonality_error() < 1e-5);
                    // The fitted map never increases the squared residual
                    // relative to the identity map.
                    let resid = |m: &Orthogonal| -> f64 {
                        dict.iter().map(|&(s, t)| {
                            let v = m.apply(src.row(s as usize));
                            v.iter().zip(tgt.row(t as usize)).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                        }).sum()
                    };
                    prop_assert!(resid(&w) <= resid(&Orthogonal::identity(d)) + 1e-9);
                }
            }

            #[test]
            fn alignment_raises_dictionary_cosine(seed in 0u64..1000, d in 2usize..7) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let n = 3 * d;
                let mut src = EmbeddingTable::random(n, d, 1.0, &mut rng);
                let mut tgt = EmbeddingTable::random(n, d, 1.0, &mut rng);
                src.normalize_rows();
                tgt.normalize_rows();
                let dict: Vec<(u32, u32)> = (0..n as u32).map(|i| (i, i)).collect();
                if let Ok(w) = procrustes_align(&src, &tgt, &dict) {
                    let before = dictionary_cosine(&src, &tgt, &dict, None);
                    let after = dictionary_cosine(&src, &tgt, &dict, Some(&w));
                    prop_assert!(after >= before - 1e-12);
                }
            }
        }
    }
}
