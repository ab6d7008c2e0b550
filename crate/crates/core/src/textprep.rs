//! Tokenization, shared BPE, language tags and length filtering.
//!
//! Raw corpora are plain UTF-8 text with one sentence per line. A line of the
//! form `#DOC <doc_id>` opens a new document; document pairing comes from a
//! separate `pairs.tsv`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::util;

/// Suffix marking the last subword of a word.
pub const END_OF_WORD: &str = "</w>";

pub const DOC_MARKER: &str = "#DOC";

pub const PAIRS_HEADER: &str = "doc_id_l1\tdoc_id_l2";

pub const DEFAULT_MIN_LEN: usize = 6;
pub const DEFAULT_MAX_LEN: usize = 50;
pub const DEFAULT_N_MERGES: usize = 4000;

/// Language tag prepended to every sentence, e.g. `<2en>`.
pub fn lang_tag(lang: &str) -> String {
    format!("<2{lang}>")
}

pub fn is_lang_tag(token: &str) -> bool {
    token.starts_with("<2") && token.ends_with('>') && token.len() > 3
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '«' | '»' | '“' | '”' | '„' | '‘' | '’' | '‚' | '–' | '—' | '…' | '¿' | '¡' | '·'
        )
}

/// True when every character of `word` is punctuation.
pub fn is_punct_token(word: &str) -> bool {
    !word.is_empty() && word.chars().all(is_punct)
}

/// Lowercasing whitespace/punctuation tokenizer.
///
/// Text is NFC-normalized and lowercased; every punctuation character becomes
/// a token of its own. The language is accepted for interface symmetry and
/// does not change the rules.
pub fn tokenize(text: &str, _lang: &str) -> Vec<String> {
    let normalized: String = text.nfc().collect::<String>().to_lowercase();
    let mut out = Vec::new();
    for chunk in normalized.split_whitespace() {
        let mut cur = String::new();
        for c in chunk.chars() {
            if is_punct(c) {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            } else {
                cur.push(c);
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

/// Dense token ↔ id mapping.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `token` if absent and returns its id.
    pub fn insert(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Byte-pair encoding model shared by both languages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    alphabet: Vec<char>,
    ranks: HashMap<(String, String), usize>,
    vocab: Vocab,
}

impl BpeModel {
    fn from_parts(merges: Vec<(String, String)>, mut alphabet: Vec<char>) -> Self {
        alphabet.sort_unstable();
        alphabet.dedup();
        let mut vocab = Vocab::new();
        for c in &alphabet {
            let s = c.to_string();
            vocab.insert(&s);
            vocab.insert(&format!("{s}{END_OF_WORD}"));
        }
        let mut ranks = HashMap::with_capacity(merges.len());
        for (rank, (l, r)) in merges.iter().enumerate() {
            let joined = format!("{l}{r}");
            vocab.insert(&joined);
            vocab.insert(&format!("{joined}{END_OF_WORD}"));
            ranks.entry((l.clone(), r.clone())).or_insert(rank);
        }
        BpeModel {
            merges,
            alphabet,
            ranks,
            vocab,
        }
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn alphabet(&self) -> &[char] {
        &self.alphabet
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    /// Segments one word, applying merges in learned order. The last subword
    /// carries the end-of-word marker.
    pub fn segment_word(&self, word: &str) -> Vec<String> {
        let mut symbols: Vec<String> = word.chars().map(|c| c.to_string()).collect();
        if symbols.is_empty() {
            return symbols;
        }
        let mut next_rank = 0usize;
        loop {
            // Lowest-ranked merge at or after `next_rank` that is present.
            let best = symbols
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())).copied())
                .filter(|&r| r >= next_rank)
                .min();
            let Some(rank) = best else { break };
            let (l, r) = &self.merges[rank];
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && &symbols[i] == l && &symbols[i + 1] == r {
                    merged.push(format!("{l}{r}"));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = merged;
            next_rank = rank + 1;
        }
        if let Some(last) = symbols.last_mut() {
            last.push_str(END_OF_WORD);
        }
        symbols
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("bpe {} {}\n", self.merges.len(), self.alphabet.len());
        for (l, r) in &self.merges {
            let _ = writeln!(s, "{l} {r}");
        }
        for c in &self.alphabet {
            let _ = writeln!(s, "{c}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let src = "<bpe>";
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::parse(src, 1, "missing header"))?;
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 3 || fields[0] != "bpe" {
            return Err(Error::parse(src, 1, "expected `bpe <merges> <alphabet>`"));
        }
        let n_merges: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(src, 1, "bad merge count"))?;
        let n_alpha: usize = fields[2]
            .parse()
            .map_err(|_| Error::parse(src, 1, "bad alphabet size"))?;
        let mut merges = Vec::with_capacity(n_merges);
        for i in 0..n_merges {
            let line = lines
                .next()
                .ok_or_else(|| Error::parse(src, i + 2, "truncated merge list"))?;
            let (l, r) = line
                .split_once(' ')
                .ok_or_else(|| Error::parse(src, i + 2, "merge needs two symbols"))?;
            merges.push((l.to_string(), r.to_string()));
        }
        let mut alphabet = Vec::with_capacity(n_alpha);
        for i in 0..n_alpha {
            let line = lines
                .next()
                .ok_or_else(|| Error::parse(src, n_merges + i + 2, "truncated alphabet"))?;
            let mut chars = line.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => alphabet.push(c),
                _ => return Err(Error::parse(src, n_merges + i + 2, "expected one character")),
            }
        }
        Ok(Self::from_parts(merges, alphabet))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        util::write_file(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&util::read_to_string(path)?).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::parse(path.display().to_string(), line, msg),
            other => other,
        })
    }
}

/// Learns a BPE model by greedy highest-frequency pair merging.
///
/// Ties are broken by the lexicographic order of the `(left, right)` pair.
/// Pairs never cross word boundaries. Learning stops early when no word has
/// two symbols left.
pub fn learn_bpe(sentences: &[Vec<String>], n_merges: usize) -> Result<BpeModel> {
    let mut word_counts: BTreeMap<&str, u64> = BTreeMap::new();
    for s in sentences {
        for w in s {
            *word_counts.entry(w.as_str()).or_default() += 1;
        }
    }
    if word_counts.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    // Interned symbols.
    let mut table: Vec<String> = Vec::new();
    let mut intern: HashMap<String, u32> = HashMap::new();
    let mut sym = |s: &str, table: &mut Vec<String>| -> u32 {
        if let Some(&i) = intern.get(s) {
            return i;
        }
        let i = table.len() as u32;
        table.push(s.to_string());
        intern.insert(s.to_string(), i);
        i
    };

    let mut alphabet: Vec<char> = Vec::new();
    let mut words: Vec<(Vec<u32>, u64)> = Vec::with_capacity(word_counts.len());
    for (w, &n) in &word_counts {
        let mut ids = Vec::with_capacity(w.len());
        for c in w.chars() {
            alphabet.push(c);
            ids.push(sym(&c.to_string(), &mut table));
        }
        words.push((ids, n));
    }

    let mut merges = Vec::with_capacity(n_merges);
    let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
    for _ in 0..n_merges {
        counts.clear();
        for (ids, n) in &words {
            for w in ids.windows(2) {
                *counts.entry((w[0], w[1])).or_default() += n;
            }
        }
        let best = counts.iter().max_by(|(pa, ca), (pb, cb)| {
            ca.cmp(cb).then_with(|| {
                // Reversed so that the lexicographically smallest pair wins.
                let ka = (&table[pa.0 as usize], &table[pa.1 as usize]);
                let kb = (&table[pb.0 as usize], &table[pb.1 as usize]);
                kb.cmp(&ka)
            })
        });
        let Some((&(l, r), _)) = best else { break };
        let joined = format!("{}{}", table[l as usize], table[r as usize]);
        let m = sym(&joined, &mut table);
        merges.push((table[l as usize].clone(), table[r as usize].clone()));
        for (ids, _) in words.iter_mut() {
            if ids.len() < 2 {
                continue;
            }
            let mut out = Vec::with_capacity(ids.len());
            let mut i = 0;
            while i < ids.len() {
                if i + 1 < ids.len() && ids[i] == l && ids[i + 1] == r {
                    out.push(m);
                    i += 2;
                } else {
                    out.push(ids[i]);
                    i += 1;
                }
            }
            *ids = out;
        }
    }
    Ok(BpeModel::from_parts(merges, alphabet))
}

/// Segments a tokenized word sequence into subwords.
///
/// Characters outside the model's alphabet come out as single-character
/// subwords.
pub fn apply_bpe(model: &BpeModel, words: &[String]) -> Vec<String> {
    words.iter().flat_map(|w| model.segment_word(w)).collect()
}

/// Reassembles words from subwords using the end-of-word marker. Language
/// tags are skipped.
pub fn detokenize(tokens: &[String]) -> Vec<String> {
    let mut words = Vec::new();
    let mut cur = String::new();
    for t in tokens {
        if is_lang_tag(t) {
            continue;
        }
        if let Some(stem) = t.strip_suffix(END_OF_WORD) {
            cur.push_str(stem);
            words.push(std::mem::take(&mut cur));
        } else {
            cur.push_str(t);
        }
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    words
}

/// A filtered, segmented and tagged sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub lang: String,
    /// Subword tokens; the first one is the language tag.
    pub tokens: Vec<String>,
    /// Vocabulary ids parallel to `tokens`.
    pub ids: Vec<u32>,
    /// Pre-BPE words.
    pub surface_words: Vec<String>,
    pub doc_id: String,
    /// Line index inside the raw document.
    pub line_id: usize,
}

impl Sentence {
    /// Content tokens, tag excluded.
    pub fn content_tokens(&self) -> &[String] {
        &self.tokens[1..]
    }

    pub fn content_ids(&self) -> &[u32] {
        &self.ids[1..]
    }

    pub fn surface(&self) -> String {
        self.surface_words.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub doc_id: String,
    pub lang: String,
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocPair {
    pub l1: Document,
    pub l2: Document,
}

/// Paired documents of two languages over a shared vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparableCorpus {
    pub lang_l1: String,
    pub lang_l2: String,
    /// BPE vocabulary followed by the two language tags.
    pub vocab: Vocab,
    pub doc_pairs: Vec<DocPair>,
}

impl ComparableCorpus {
    pub fn sentences_l1(&self) -> impl Iterator<Item = &Sentence> {
        self.doc_pairs.iter().flat_map(|p| p.l1.sentences.iter())
    }

    pub fn sentences_l2(&self) -> impl Iterator<Item = &Sentence> {
        self.doc_pairs.iter().flat_map(|p| p.l2.sentences.iter())
    }

    /// Looks a sentence up by `(doc_id, line_id)` on either side.
    pub fn index(&self) -> HashMap<(&str, usize), &Sentence> {
        self.sentences_l1()
            .chain(self.sentences_l2())
            .map(|s| ((s.doc_id.as_str(), s.line_id), s))
            .collect()
    }
}

/// One raw document as read from a corpus file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub doc_id: String,
    pub lines: Vec<String>,
}

pub fn parse_corpus(text: &str, src: &str) -> Result<Vec<RawDocument>> {
    let mut docs: Vec<RawDocument> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix(DOC_MARKER) {
            let id = rest.trim();
            if id.is_empty() {
                return Err(Error::parse(src, i + 1, "document marker without id"));
            }
            docs.push(RawDocument {
                doc_id: id.to_string(),
                lines: Vec::new(),
            });
        } else {
            match docs.last_mut() {
                Some(d) => d.lines.push(line.to_string()),
                None if line.trim().is_empty() => {}
                None => return Err(Error::parse(src, i + 1, "text before first #DOC line")),
            }
        }
    }
    Ok(docs)
}

pub fn read_corpus(path: &Path) -> Result<Vec<RawDocument>> {
    parse_corpus(&util::read_to_string(path)?, &path.display().to_string())
}

pub fn corpus_to_text(docs: &[RawDocument]) -> String {
    let mut s = String::new();
    for d in docs {
        let _ = writeln!(s, "{DOC_MARKER} {}", d.doc_id);
        for l in &d.lines {
            s.push_str(l);
            s.push('\n');
        }
    }
    s
}

pub fn write_corpus(path: &Path, docs: &[RawDocument]) -> Result<()> {
    util::write_file(path, &corpus_to_text(docs))
}

pub fn parse_pairs(text: &str, src: &str) -> Result<Vec<(String, String)>> {
    util::data_lines(text, PAIRS_HEADER)
        .map(|(n, l)| {
            l.split_once('\t')
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .ok_or_else(|| Error::parse(src, n, "expected two tab-separated doc ids"))
        })
        .collect()
}

pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    parse_pairs(&util::read_to_string(path)?, &path.display().to_string())
}

pub fn write_pairs(path: &Path, pairs: &[(String, String)]) -> Result<()> {
    let mut s = format!("{PAIRS_HEADER}\n");
    for (a, b) in pairs {
        let _ = writeln!(s, "{a}\t{b}");
    }
    util::write_file(path, &s)
}

/// Tokenized word sequences of every line of `docs`.
pub fn tokenized_lines(docs: &[RawDocument], lang: &str) -> Vec<Vec<String>> {
    docs.iter()
        .flat_map(|d| d.lines.iter().map(move |l| tokenize(l, lang)))
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct LengthFilter {
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for LengthFilter {
    fn default() -> Self {
        LengthFilter {
            min_len: DEFAULT_MIN_LEN,
            max_len: DEFAULT_MAX_LEN,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub dropped_sentences: usize,
    pub dropped_doc_pairs: usize,
    pub missing_docs: usize,
    /// Total number of warnings raised.
    pub warnings: usize,
}

/// Per-language inputs for [`build_corpus`].
pub struct RawSide<'a> {
    pub lang: &'a str,
    pub docs: &'a [RawDocument],
}

fn process_doc(
    doc: &RawDocument,
    lang: &str,
    bpe: &BpeModel,
    vocab: &Vocab,
    filter: LengthFilter,
    cache: &mut HashMap<String, Vec<String>>,
    report: &mut BuildReport,
) -> Document {
    let tag = lang_tag(lang);
    let tag_id = vocab.id(&tag).expect("tags are registered before processing");
    let mut sentences = Vec::new();
    for (line_id, line) in doc.lines.iter().enumerate() {
        let words = tokenize(line, lang);
        let mut tokens = vec![tag.clone()];
        for w in &words {
            let seg = cache
                .entry(w.clone())
                .or_insert_with(|| bpe.segment_word(w));
            tokens.extend(seg.iter().cloned());
        }
        let n = tokens.len() - 1;
        if n < filter.min_len || n > filter.max_len {
            report.dropped_sentences += 1;
            continue;
        }
        let Some(ids) = tokens
            .iter()
            .map(|t| if t == &tag { Some(tag_id) } else { vocab.id(t) })
            .collect::<Option<Vec<u32>>>()
        else {
            // Characters unseen while learning BPE.
            report.dropped_sentences += 1;
            continue;
        };
        sentences.push(Sentence {
            lang: lang.to_string(),
            tokens,
            ids,
            surface_words: words,
            doc_id: doc.doc_id.clone(),
            line_id,
        });
    }
    Document {
        doc_id: doc.doc_id.clone(),
        lang: lang.to_string(),
        sentences,
    }
}

/// Builds the filtered, tagged comparable corpus.
///
/// Document pairs whose either side has no surviving sentence are dropped
/// with a warning, as are pairs referencing unknown documents.
pub fn build_corpus(
    l1: RawSide<'_>,
    l2: RawSide<'_>,
    pairs: &[(String, String)],
    bpe: &BpeModel,
    filter: LengthFilter,
) -> (ComparableCorpus, BuildReport) {
    let mut vocab = bpe.vocab().clone();
    vocab.insert(&lang_tag(l1.lang));
    vocab.insert(&lang_tag(l2.lang));

    let by_id_1: HashMap<&str, &RawDocument> =
        l1.docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let by_id_2: HashMap<&str, &RawDocument> =
        l2.docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();

    let mut report = BuildReport::default();
    let mut cache = HashMap::new();
    let mut doc_pairs = Vec::new();
    for (a, b) in pairs {
        let (Some(ra), Some(rb)) = (by_id_1.get(a.as_str()), by_id_2.get(b.as_str())) else {
            warn!("document pair ({a}, {b}) references a missing document");
            report.missing_docs += 1;
            report.warnings += 1;
            continue;
        };
        let da = process_doc(ra, l1.lang, bpe, &vocab, filter, &mut cache, &mut report);
        let db = process_doc(rb, l2.lang, bpe, &vocab, filter, &mut cache, &mut report);
        if da.sentences.is_empty() || db.sentences.is_empty() {
            warn!("document pair ({a}, {b}) has no surviving sentences; dropped");
            report.dropped_doc_pairs += 1;
            report.warnings += 1;
            continue;
        }
        doc_pairs.push(DocPair { l1: da, l2: db });
    }
    if doc_pairs.is_empty() {
        warn!("corpus is empty after filtering");
        report.warnings += 1;
    }
    let corpus = ComparableCorpus {
        lang_l1: l1.lang.to_string(),
        lang_l2: l2.lang.to_string(),
        vocab,
        doc_pairs,
    };
    (corpus, report)
}
