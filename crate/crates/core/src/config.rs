//! Experiment configuration: a flat `key = value` file with `[section]`
//! headers. Every key has a default and may be overridden from the command
//! line; the resolved configuration is written next to every run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::embeddings::{AlignConfig, SkipGramConfig};
use crate::encoder::EncoderHyper;
use crate::error::{Error, Result};
use crate::miner::MinerConfig;
use crate::synthcorp::SynthConfig;
use crate::textprep::LengthFilter;
use crate::util;

/// Keys whose values are file paths, resolved against the config file.
const PATH_KEYS: &[&str] = &[
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
    "paths.output_root",
];

/// Every accepted key with its default value; empty means unset.
const DEFAULTS: &[(&str, &str)] = &[
    ("data.lang_l1", "en"),
    ("data.lang_l2", "lx"),
    ("paths.corpus_l1", ""),
    ("paths.corpus_l2", ""),
    ("paths.pairs", ""),
    ("paths.truth", ""),
    ("paths.parallel_l1", ""),
    ("paths.parallel_l2", ""),
    ("paths.bpe", ""),
    ("paths.embeddings", ""),
    ("paths.log", ""),
    ("paths.lm_corpus_l1", ""),
    ("paths.lm_corpus_l2", ""),
    ("paths.output_root", ""),
    ("textprep.n_merges", "4000"),
    ("textprep.min_len", "6"),
    ("textprep.max_len", "50"),
    ("embeddings.dim", "64"),
    ("embeddings.window", "5"),
    ("embeddings.negatives", "5"),
    ("embeddings.epochs", "5"),
    ("embeddings.lr", "0.025"),
    ("embeddings.seed", "1"),
    ("embeddings.seed_dict_size", "5000"),
    ("embeddings.center", "false"),
    ("encoder.d_h", "64"),
    ("encoder.lr", "0.05"),
    ("encoder.gamma", "0.2"),
    ("encoder.negatives_per_pair", "5"),
    ("encoder.init_scale", "2.0"),
    ("encoder.lr_decay_steps", "100"),
    ("encoder.clip_norm", "0"),
    ("encoder.zero_sum_init", "true"),
    ("encoder.seed", "1"),
    ("miner.k", "4"),
    ("miner.batch_size", "50"),
    ("miner.epochs", "10"),
    ("miner.seed", "1"),
    ("miner.log_rejects", "false"),
    ("miner.initial_scoring", "false"),
    ("synth.n_true", "2000"),
    ("synth.ratio", "4"),
    ("synth.article_len", "28"),
    ("synth.max_oversample", "16"),
    ("synth.seed", "1"),
    ("curriculum.lm_order", "3"),
    ("curriculum.window", "1000"),
    ("curriculum.max_corr_pairs", "10000"),
    ("run.threads", "0"),
];

const SEED_KEYS: &[&str] = &["embeddings.seed", "encoder.seed", "miner.seed", "synth.seed"];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    values: BTreeMap<String, String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            values: DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

fn is_known(key: &str) -> bool {
    DEFAULTS.iter().any(|(k, _)| *k == key)
}

impl ExperimentConfig {
    /// Parses config text; relative paths are resolved against `base`.
    pub fn parse(text: &str, src: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let n = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(Error::parse(src, n, "unterminated section header"));
                };
                section = name.trim().to_string();
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::parse(src, n, "expected `key = value`"));
            };
            let key = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            if !is_known(&key) {
                return Err(Error::parse(src, n, format!("unknown key `{key}`")));
            }
            let mut value = v.trim().to_string();
            if let Some(b) = base.filter(|_| PATH_KEYS.contains(&key.as_str()) && !value.is_empty()) {
                let p = Path::new(&value);
                if p.is_relative() {
                    value = b.join(p).display().to_string();
                }
            }
            cfg.values.insert(key, value);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = util::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string(), path.parent())
    }

    /// Sets a key given either fully qualified (`miner.k`) or by its bare
    /// name when that name is unique across sections (`k`).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let full = if is_known(key) {
            key.to_string()
        } else {
            let matches: Vec<&str> = DEFAULTS
                .iter()
                .map(|(k, _)| *k)
                .filter(|k| k.rsplit('.').next() == Some(key))
                .collect();
            match matches.as_slice() {
                [one] => one.to_string(),
                [] => return Err(Error::InvalidArgument(format!("unknown config key `{key}`"))),
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "ambiguous config key `{key}`; use one of {}",
                        matches.join(", ")
                    )))
                }
            }
        };
        self.values.insert(full, value.to_string());
        Ok(())
    }

    /// Sets the seed of every module.
    pub fn set_seed(&mut self, seed: u64) {
        for k in SEED_KEYS {
            self.values.insert(k.to_string(), seed.to_string());
        }
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.raw(key);
        v.parse()
            .map_err(|_| Error::InvalidArgument(format!("bad value `{v}` for `{key}`")))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let v = self.raw(key);
        (!v.is_empty()).then(|| PathBuf::from(v))
    }

    /// Like [`path`](Self::path) but fails with a diagnostic when unset.
    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        self.path(key)
            .ok_or_else(|| Error::InvalidArgument(format!("missing required setting `{key}`")))
    }

    pub fn lang_l1(&self) -> &str {
        self.raw("data.lang_l1")
    }

    pub fn lang_l2(&self) -> &str {
        self.raw("data.lang_l2")
    }

    pub fn n_merges(&self) -> Result<usize> {
        self.get("textprep.n_merges")
    }

    pub fn length_filter(&self) -> Result<LengthFilter> {
        let f = LengthFilter {
            min_len: self.get("textprep.min_len")?,
            max_len: self.get("textprep.max_len")?,
        };
        if f.min_len > f.max_len {
            return Err(Error::InvalidArgument("min_len exceeds max_len".into()));
        }
        Ok(f)
    }

    pub fn skipgram(&self) -> Result<SkipGramConfig> {
        Ok(SkipGramConfig {
            dim: self.get("embeddings.dim")?,
            window: self.get("embeddings.window")?,
            negatives: self.get("embeddings.negatives")?,
            epochs: self.get("embeddings.epochs")?,
            lr: self.get("embeddings.lr")?,
            seed: self.get("embeddings.seed")?,
        })
    }

    pub fn align(&self) -> Result<AlignConfig> {
        Ok(AlignConfig {
            skipgram: self.skipgram()?,
            seed_dict_size: self.get("embeddings.seed_dict_size")?,
            center: self.get("embeddings.center")?,
        })
    }

    pub fn encoder(&self) -> Result<EncoderHyper> {
        Ok(EncoderHyper {
            d: self.get("embeddings.dim")?,
            d_h: self.get("encoder.d_h")?,
            lr: self.get("encoder.lr")?,
            gamma: self.get("encoder.gamma")?,
            negatives_per_pair: self.get("encoder.negatives_per_pair")?,
            init_scale: self.get("encoder.init_scale")?,
            lr_decay_steps: self.get("encoder.lr_decay_steps")?,
            clip_norm: self.get("encoder.clip_norm")?,
            zero_sum_init: self.get("encoder.zero_sum_init")?,
        })
    }

    pub fn encoder_seed(&self) -> Result<u64> {
        self.get("encoder.seed")
    }

    pub fn miner(&self) -> Result<MinerConfig> {
        Ok(MinerConfig {
            k: self.get("miner.k")?,
            batch_size: self.get("miner.batch_size")?,
            epochs: self.get("miner.epochs")?,
            seed: self.get("miner.seed")?,
            log_rejects: self.get("miner.log_rejects")?,
            initial_scoring: self.get("miner.initial_scoring")?,
        })
    }

    pub fn synth(&self) -> Result<SynthConfig> {
        Ok(SynthConfig {
            n_true: self.get("synth.n_true")?,
            ratio: self.get("synth.ratio")?,
            article_len: self.get("synth.article_len")?,
            seed: self.get("synth.seed")?,
            max_oversample: self.get("synth.max_oversample")?,
            lang_l1: self.lang_l1().to_string(),
            lang_l2: self.lang_l2().to_string(),
        })
    }

    pub fn lm_order(&self) -> Result<usize> {
        self.get("curriculum.lm_order")
    }

    pub fn window(&self) -> Result<u64> {
        self.get("curriculum.window")
    }

    pub fn max_corr_pairs(&self) -> Result<usize> {
        self.get("curriculum.max_corr_pairs")
    }

    pub fn threads(&self) -> Result<usize> {
        self.get("run.threads")
    }

    /// Sectioned text of every key, defaults included.
    pub fn to_text(&self) -> String {
        let mut by_section: BTreeMap<&str, Vec<(&str, &str)>> = BTreeMap::new();
        for (k, v) in &self.values {
            let (s, name) = k.split_once('.').unwrap_or(("", k));
            by_section.entry(s).or_default().push((name, v));
        }
        let mut out = String::new();
        for (s, kv) in by_section {
            let _ = writeln!(out, "[{s}]");
            for (k, v) in kv {
                let _ = writeln!(out, "{k} = {v}");
            }
            out.push('\n');
        }
        out
    }
}
