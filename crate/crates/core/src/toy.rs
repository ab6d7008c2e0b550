//! Procedural bilingual toy data.
//!
//! The first language (`en`) uses English function words and a generated
//! English-looking content lexicon; the second (`lx`) is a pseudo-language
//! with its own lexicon, noun-adjective order and verb-final clauses. Names,
//! numbers and a share of cognate content words are written identically in
//! both languages, and some `lx` words have two interchangeable spellings.
//!
//! Content words are ranked by frequency and rarer words are longer. Each
//! sentence draws a latent complexity: simple sentences are short, use the
//! frequent head of the lexicon and are full of names and numbers; complex
//! ones are long and reach deep into the rare, polysyllabic tail.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N_NOUNS: usize = 1200;
const N_ADJS: usize = 400;
const N_VERBS: usize = 500;
const N_ADVS: usize = 120;

const SIMPLE_PREPS: &[&str] = &["in", "on", "near", "by", "at"];
const COMPLEX_PREPS: &[&str] = &["within", "throughout", "beyond", "underneath", "alongside"];
const DETS: &[&str] = &["the", "a", "this", "that", "every", "some"];
const CONNECTIVES: &[&str] = &["and", "but", "because", "while", "although"];
const WHICH: &str = "which";
const NAME_SYLLABLES: &[&str] = &[
    "an", "bel", "cor", "dan", "el", "fen", "gar", "hal", "ir", "jon", "kel", "lor", "mar", "nor", "ol", "per",
    "ros", "sam", "tor", "val", "wen",
];
const EN_ONSETS: &[&str] = &[
    "b", "br", "c", "ch", "d", "f", "fl", "g", "gr", "h", "l", "m", "n", "p", "pl", "r", "s", "sh", "st", "t", "th",
    "tr", "w",
];
const EN_NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ea", "oo", "ai"];
const EN_CODAS: &[&str] = &["", "", "n", "r", "t", "st", "nd", "ck", "ll", "m", "s"];
const LX_ONSETS: &[&str] = &["k", "v", "z", "q", "x", "j", "t", "l", "m", "n", "r", "s", "d", "g", "b", "p"];
const LX_NUCLEI: &[&str] = &["a", "o", "u", "ä", "ö", "ü", "e", "i"];
const LX_CODAS: &[&str] = &["", "", "", "n", "r", "k", "sh", "z"];

/// Share of content words written identically in both languages.
pub const COGNATE_SHARE: f64 = 0.2;
/// Share of non-cognate content words with a second `lx` spelling.
pub const SYNONYM_SHARE: f64 = 0.3;

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Syllable count of the content word at frequency rank `r` out of `n`.
fn syllables_for_rank(r: usize, n: usize) -> usize {
    let f = r as f64 / n as f64;
    match f {
        f if f < 0.05 => 1,
        f if f < 0.2 => 2,
        f if f < 0.5 => 3,
        _ => 4,
    }
}

fn coin(rng: &mut ChaCha8Rng, n: usize, onsets: &[&str], nuclei: &[&str], codas: &[&str]) -> String {
    (0..n)
        .map(|_| {
            format!(
                "{}{}{}",
                onsets.choose(rng).unwrap(),
                nuclei.choose(rng).unwrap(),
                codas.choose(rng).unwrap()
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pos {
    Noun,
    Adj,
    Verb,
    Adv,
}

/// Word lists and translation tables of the toy language pair.
#[derive(Debug, Clone)]
pub struct Lexicon {
    nouns: Vec<String>,
    adjs: Vec<String>,
    verbs: Vec<String>,
    advs: Vec<String>,
    map: HashMap<String, Vec<String>>,
    pub names: Vec<String>,
}

impl Lexicon {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x006c_6578_6963_6f6e);
        let function: Vec<&str> = SIMPLE_PREPS
            .iter()
            .chain(COMPLEX_PREPS)
            .chain(DETS)
            .chain(CONNECTIVES)
            .chain([&WHICH])
            .copied()
            .collect();
        let mut used: HashSet<String> = function.iter().map(|w| w.to_string()).collect();
        let mut list = |n: usize, rng: &mut ChaCha8Rng| -> Vec<String> {
            (0..n)
                .map(|r| loop {
                    let w = coin(rng, syllables_for_rank(r, n), EN_ONSETS, EN_NUCLEI, EN_CODAS);
                    if used.insert(w.clone()) {
                        break w;
                    }
                })
                .collect()
        };
        let nouns = list(N_NOUNS, &mut rng);
        let adjs = list(N_ADJS, &mut rng);
        let verbs = list(N_VERBS, &mut rng);
        let advs = list(N_ADVS, &mut rng);

        let mut fresh = |n: usize, rng: &mut ChaCha8Rng| loop {
            let w = coin(rng, n, LX_ONSETS, LX_NUCLEI, LX_CODAS);
            if used.insert(w.clone()) {
                break w;
            }
        };
        let mut map = HashMap::new();
        for w in nouns.iter().chain(&adjs).chain(&verbs).chain(&advs) {
            let n = crate::curriculum::syllables(w).unwrap_or(1);
            let forms = if rng.gen_bool(COGNATE_SHARE) {
                vec![w.clone()]
            } else if rng.gen_bool(SYNONYM_SHARE) {
                vec![fresh(n, &mut rng), fresh(n, &mut rng)]
            } else {
                vec![fresh(n, &mut rng)]
            };
            map.insert(w.clone(), forms);
        }
        for w in function {
            let n = crate::curriculum::syllables(w).unwrap_or(1);
            map.insert(w.to_string(), vec![fresh(n, &mut rng)]);
        }
        let mut names = Vec::new();
        for a in NAME_SYLLABLES {
            for b in NAME_SYLLABLES {
                if a != b {
                    names.push(capitalize(&format!("{a}{b}")));
                }
            }
        }
        Lexicon {
            nouns,
            adjs,
            verbs,
            advs,
            map,
            names,
        }
    }

    fn words(&self, pos: Pos) -> &[String] {
        match pos {
            Pos::Noun => &self.nouns,
            Pos::Adj => &self.adjs,
            Pos::Verb => &self.verbs,
            Pos::Adv => &self.advs,
        }
    }

    /// The `lx` spellings of an `en` word; words outside the lexicon (names,
    /// numbers, punctuation) are their own translation.
    pub fn forms<'a>(&'a self, w: &'a str) -> Vec<&'a str> {
        match self.map.get(w) {
            Some(f) => f.iter().map(String::as_str).collect(),
            None => vec![w],
        }
    }
}

#[derive(Debug, Clone)]
enum Np {
    Name(String),
    Number(String),
    Phrase {
        det: &'static str,
        adjs: Vec<String>,
        noun: String,
    },
}

#[derive(Debug, Clone)]
struct Clause {
    subj: Np,
    verb: String,
    adv: Option<String>,
    obj: Np,
    pp: Option<(&'static str, Np)>,
}

struct Gen<'a> {
    lex: &'a Lexicon,
    rng: ChaCha8Rng,
}

impl Gen<'_> {
    /// Draws a content word; low complexity concentrates on frequent ranks.
    fn word(&mut self, c: f64, pos: Pos) -> String {
        let list = self.lex.words(pos);
        let alpha = 2.0 + 4.0 * (1.0 - c);
        let u: f64 = self.rng.gen();
        let r = ((list.len() as f64 * u.powf(alpha)) as usize).min(list.len() - 1);
        list[r].clone()
    }

    fn number(&mut self) -> String {
        if self.rng.gen_bool(0.6) {
            self.rng.gen_range(1700..2021).to_string()
        } else {
            self.rng.gen_range(2..500).to_string()
        }
    }

    fn np(&mut self, c: f64, name_p: f64, number_p: f64) -> Np {
        let u: f64 = self.rng.gen();
        if u < name_p {
            return Np::Name(self.lex.names.choose(&mut self.rng).unwrap().clone());
        }
        if u < name_p + number_p {
            return Np::Number(self.number());
        }
        let mut adjs = Vec::new();
        for p in [0.3 + 0.6 * c, 0.5 * c] {
            if self.rng.gen_bool(p.min(1.0)) {
                adjs.push(self.word(c, Pos::Adj));
            }
        }
        Np::Phrase {
            det: DETS.choose(&mut self.rng).unwrap(),
            adjs,
            noun: self.word(c, Pos::Noun),
        }
    }

    fn clause(&mut self, c: f64) -> Clause {
        let name_p = 0.75 * (1.0 - c).powi(2);
        let subj = self.np(c, name_p, 0.0);
        let obj = self.np(c, name_p, 0.1 * (1.0 - c));
        let verb = self.word(c, Pos::Verb);
        let adv = self.rng.gen_bool(0.7 * c).then(|| self.word(c, Pos::Adv));
        let pp = self.rng.gen_bool(0.6 + 0.3 * (1.0 - c)).then(|| {
            let list = if self.rng.gen_bool(c) { COMPLEX_PREPS } else { SIMPLE_PREPS };
            let prep = *list.choose(&mut self.rng).unwrap();
            let np = self.np(c, 0.5 * (1.0 - c), 0.9 * (1.0 - c).powi(2));
            (prep, np)
        });
        Clause {
            subj,
            verb,
            adv,
            obj,
            pp,
        }
    }

    fn tr(&mut self, w: &str) -> String {
        self.lex.forms(w).choose(&mut self.rng).unwrap().to_string()
    }

    fn np_l2(&mut self, np: &Np, out: &mut Vec<String>) {
        match np {
            Np::Name(s) | Np::Number(s) => out.push(s.clone()),
            Np::Phrase { det, adjs, noun } => {
                out.push(self.tr(det));
                out.push(self.tr(noun));
                for a in adjs {
                    out.push(self.tr(a));
                }
            }
        }
    }

    fn clause_l2(&mut self, c: &Clause, out: &mut Vec<String>) {
        self.np_l2(&c.subj, out);
        if let Some((p, np)) = &c.pp {
            out.push(self.tr(p));
            self.np_l2(np, out);
        }
        self.np_l2(&c.obj, out);
        if let Some(a) = &c.adv {
            out.push(self.tr(a));
        }
        out.push(self.tr(&c.verb));
    }
}

fn np_l1(np: &Np, out: &mut Vec<String>) {
    match np {
        Np::Name(s) | Np::Number(s) => out.push(s.clone()),
        Np::Phrase { det, adjs, noun } => {
            out.push(det.to_string());
            out.extend(adjs.iter().cloned());
            out.push(noun.clone());
        }
    }
}

fn clause_l1(c: &Clause, out: &mut Vec<String>) {
    np_l1(&c.subj, out);
    if let Some(a) = &c.adv {
        out.push(a.clone());
    }
    out.push(c.verb.clone());
    np_l1(&c.obj, out);
    if let Some((p, np)) = &c.pp {
        out.push(p.to_string());
        np_l1(np, out);
    }
}

/// One generated pair with its latent complexity.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPair {
    pub l1: String,
    pub l2: String,
    pub complexity: f64,
}

fn render(words: Vec<String>) -> String {
    let mut s = words.join(" ");
    s = s.replace(" ,", ",").replace(" .", ".");
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => s,
    }
}

/// Generates `n` parallel sentence pairs.
pub fn generate(n: usize, seed: u64) -> Vec<ToyPair> {
    let lex = Lexicon::new(seed);
    let mut g = Gen {
        lex: &lex,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let mut out = Vec::with_capacity(n);
    let mut seen = HashSet::new();
    while out.len() < n {
        let c: f64 = g.rng.gen();
        let n_clauses = 1 + usize::from(c > 0.55);
        let clauses: Vec<Clause> = (0..n_clauses).map(|_| g.clause(c)).collect();
        let links: Vec<&'static str> = (1..n_clauses)
            .map(|_| {
                if g.rng.gen_bool(0.5) {
                    WHICH
                } else {
                    CONNECTIVES.choose(&mut g.rng).unwrap()
                }
            })
            .collect();
        let (mut w1, mut w2) = (Vec::new(), Vec::new());
        for (i, cl) in clauses.iter().enumerate() {
            if i > 0 {
                w1.push(",".to_string());
                w1.push(links[i - 1].to_string());
                w2.push(",".to_string());
                let l = g.tr(links[i - 1]);
                w2.push(l);
            }
            clause_l1(cl, &mut w1);
            g.clause_l2(cl, &mut w2);
        }
        w1.push(".".into());
        w2.push(".".into());
        if w1.len() < 7 || w1.len() > 32 {
            continue;
        }
        let (l1, l2) = (render(w1), render(w2));
        if seen.insert(l1.clone()) {
            out.push(ToyPair {
                l1,
                l2,
                complexity: c,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curriculum::gunning_fog;
    use crate::textprep::tokenize;

    #[test]
    fn deterministic_and_distinct() {
        let a = generate(200, 3);
        assert_eq!(a, generate(200, 3));
        let s: HashSet<&String> = a.iter().map(|p| &p.l1).collect();
        assert_eq!(s.len(), 200);
    }

    #[test]
    fn spellings_are_unambiguous() {
        let lex = Lexicon::new(1);
        let mut owner: HashMap<&str, &str> = HashMap::new();
        for (w, forms) in &lex.map {
            for f in forms {
                assert!(owner.insert(f, w).is_none(), "{f} spells two words");
                if f != w {
                    assert!(!lex.map.contains_key(f.as_str()), "{f} is also an en word");
                }
            }
        }
    }

    #[test]
    fn rarer_words_are_longer() {
        let lex = Lexicon::new(2);
        let syl = |w: &String| crate::curriculum::syllables(w).unwrap();
        assert_eq!(syl(&lex.nouns[0]), 1);
        assert_eq!(syl(&lex.nouns[N_NOUNS - 1]), 4);
    }

    #[test]
    fn complexity_drives_readability() {
        let pairs = generate(600, 5);
        let gf = |lo: f64, hi: f64| {
            let s: Vec<Vec<String>> = pairs
                .iter()
                .filter(|p| p.complexity >= lo && p.complexity < hi)
                .map(|p| tokenize(&p.l1, "en"))
                .collect();
            gunning_fog(&s).unwrap()
        };
        assert!(gf(0.0, 0.3) + 5.0 < gf(0.7, 1.0));
    }
}
