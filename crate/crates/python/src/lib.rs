//! Python bindings: BPE, the sentence encoder, margin-based selection,
//! evaluation, the curriculum measures and the command-line runner.

use std::collections::HashSet;
use std::ffi::OsString;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ssmine::cli;
use ssmine::curriculum;
use ssmine::encoder::TrainPair;
use ssmine::evalx::{self, Channel, Mode};
use ssmine::miner::{self, PairKey};
use ssmine::textprep;
use ssmine::{EmbeddingTable, EncoderHyper, EncoderModel, SentenceRepr};

fn err(e: ssmine::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

type Key = (String, usize, String, usize);

/// `(epoch, channel, mode, precision, recall, n_extracted)`.
type PrRow = (usize, String, String, f64, f64, usize);

fn key_set(keys: Vec<Key>) -> HashSet<PairKey> {
    keys.into_iter().map(|(a, i, b, j)| PairKey::new(&a, i, &b, j)).collect()
}

/// Byte-pair encoding model.
#[pyclass(name = "Bpe", module = "ssmine_py")]
struct PyBpe(textprep::BpeModel);

#[pymethods]
impl PyBpe {
    /// Learns `n_merges` merges from tokenized sentences.
    #[staticmethod]
    fn learn(sentences: Vec<Vec<String>>, n_merges: usize) -> PyResult<Self> {
        textprep::learn_bpe(&sentences, n_merges).map(PyBpe).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        textprep::BpeModel::load(&path).map(PyBpe).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(err)
    }

    fn merges(&self) -> Vec<(String, String)> {
        self.0.merges().to_vec()
    }

    fn vocab(&self) -> Vec<String> {
        self.0.vocab().tokens().to_vec()
    }

    fn segment_word(&self, word: &str) -> Vec<String> {
        self.0.segment_word(word)
    }

    fn apply(&self, words: Vec<String>) -> Vec<String> {
        textprep::apply_bpe(&self.0, &words)
    }

    fn __len__(&self) -> usize {
        self.0.merges().len()
    }
}

/// Window encoder over a fixed embedding table.
#[pyclass(name = "Encoder", module = "ssmine_py")]
struct PyEncoder(EncoderModel);

#[pymethods]
impl PyEncoder {
    /// Unset hyper-parameters take the library defaults.
    #[new]
    #[pyo3(signature = (embeddings, d_h=None, gamma=None, lr=None, negatives=None, seed=0))]
    fn new(
        embeddings: Vec<Vec<f64>>,
        d_h: Option<usize>,
        gamma: Option<f64>,
        lr: Option<f64>,
        negatives: Option<usize>,
        seed: u64,
    ) -> PyResult<Self> {
        if embeddings.is_empty() {
            return Err(PyValueError::new_err("embedding table is empty"));
        }
        let emb = EmbeddingTable::from_rows(&embeddings).map_err(err)?;
        let mut hyper = EncoderHyper::default();
        hyper.d_h = d_h.unwrap_or(hyper.d_h);
        hyper.gamma = gamma.unwrap_or(hyper.gamma);
        hyper.lr = lr.unwrap_or(hyper.lr);
        hyper.negatives_per_pair = negatives.unwrap_or(hyper.negatives_per_pair);
        Ok(PyEncoder(EncoderModel::new(hyper, emb, seed)))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        EncoderModel::load(&path).map(PyEncoder).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(err)
    }

    #[getter]
    fn version(&self) -> u64 {
        self.0.version
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.hyper.d
    }

    #[getter]
    fn hidden_dim(&self) -> usize {
        self.0.hyper.d_h
    }

    /// `(cw, ch)` for a sentence of token ids.
    fn represent(&self, ids: Vec<u32>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let r = self.0.represent(&ids).map_err(err)?;
        Ok((r.cw, r.ch))
    }

    /// One optimizer step on `(l1_ids, l2_ids)` pairs; returns the loss.
    #[pyo3(signature = (pairs, seed=0))]
    fn train_step(&mut self, pairs: Vec<(Vec<u32>, Vec<u32>)>, seed: u64) -> PyResult<f64> {
        let batch: Vec<TrainPair> = pairs.into_iter().map(|(l1, l2)| TrainPair { l1, l2 }).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.0.train_step(&batch, &mut rng).map_err(err)
    }

    /// Dual selection between two documents given as token-id sentences.
    #[pyo3(signature = (doc_l1, doc_l2, k=4))]
    fn select(&self, doc_l1: Vec<Vec<u32>>, doc_l2: Vec<Vec<u32>>, k: usize) -> PyResult<Selection> {
        let rep = |d: &[Vec<u32>]| -> PyResult<Vec<SentenceRepr>> {
            d.iter().map(|s| self.0.represent(s).map_err(err)).collect()
        };
        let sel = miner::select_from_reprs(&rep(&doc_l1)?, &rep(&doc_l2)?, k).map_err(err)?;
        Ok(Selection::from(sel))
    }
}

/// Mutual-top pairs per channel and their intersection.
#[pyclass(name = "Selection", module = "ssmine_py", get_all)]
struct Selection {
    accepted_w: Vec<(usize, usize)>,
    accepted_h: Vec<(usize, usize)>,
    accepted_dual: Vec<(usize, usize)>,
    score_w: Vec<Vec<f64>>,
    score_h: Vec<Vec<f64>>,
}

impl From<miner::Selection> for Selection {
    fn from(s: miner::Selection) -> Self {
        let rows = |v: &[f64]| v.chunks(s.n2.max(1)).map(<[f64]>::to_vec).collect();
        Selection {
            score_w: rows(&s.score_w),
            score_h: rows(&s.score_h),
            accepted_w: s.accepted_w,
            accepted_h: s.accepted_h,
            accepted_dual: s.accepted_dual,
        }
    }
}

#[pymethods]
impl Selection {
    fn __repr__(&self) -> String {
        format!(
            "Selection(w={}, h={}, dual={})",
            self.accepted_w.len(),
            self.accepted_h.len(),
            self.accepted_dual.len()
        )
    }
}

/// Lowercasing tokenizer with punctuation split off.
#[pyfunction]
#[pyo3(signature = (text, lang="en"))]
fn tokenize(text: &str, lang: &str) -> Vec<String> {
    textprep::tokenize(text, lang)
}

/// Ratio-margin scores of every `(x, y)` pair, as rows.
#[pyfunction]
#[pyo3(signature = (xs, ys, k=4))]
fn margin_matrix(xs: Vec<Vec<f64>>, ys: Vec<Vec<f64>>, k: usize) -> PyResult<Vec<Vec<f64>>> {
    let xr: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let yr: Vec<&[f64]> = ys.iter().map(Vec::as_slice).collect();
    let m = miner::margin_matrix(&xr, &yr, k).map_err(err)?;
    Ok(m.chunks(ys.len()).map(<[f64]>::to_vec).collect())
}

/// Mutual-top pairs of a score matrix.
#[pyfunction]
fn mutual_top(scores: Vec<Vec<f64>>) -> PyResult<Vec<(usize, usize)>> {
    let n2 = scores.first().map_or(0, Vec::len);
    if scores.iter().any(|r| r.len() != n2) {
        return Err(PyValueError::new_err("ragged score matrix"));
    }
    Ok(miner::mutual_top(&scores.concat(), scores.len(), n2))
}

/// Gunning Fog index of sentences given as word lists.
#[pyfunction]
fn gunning_fog(sentences: Vec<Vec<String>>) -> PyResult<f64> {
    curriculum::gunning_fog(&sentences).map_err(err)
}

#[pyfunction]
fn syllables(word: &str) -> PyResult<usize> {
    curriculum::syllables(word).map_err(err)
}

#[pyfunction]
fn pearson(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    curriculum::pearson(&xs, &ys).map_err(err)
}

/// `(precision, recall)` of extracted pairs keyed by
/// `(doc_l1, line_l1, doc_l2, line_l2)`.
#[pyfunction]
fn precision_recall(extracted: Vec<Key>, truth: Vec<Key>) -> PyResult<(f64, f64)> {
    let s = evalx::precision_recall(&key_set(extracted), &key_set(truth)).map_err(err)?;
    Ok((s.precision, s.recall))
}

/// Per-epoch records `(epoch, channel, mode, precision, recall, n_extracted)`
/// of a saved mining log against a truth file.
#[pyfunction]
fn evaluate_log(log_path: PathBuf, truth_path: PathBuf) -> PyResult<Vec<PrRow>> {
    let log = ssmine::MiningLog::load(&log_path).map_err(err)?;
    let truth = ssmine::synthcorp::read_truth(&truth_path).map_err(err)?;
    let series = evalx::accumulate(&log, &truth).map_err(err)?;
    let mut out = Vec::new();
    for e in series.epochs() {
        for c in [Channel::W, Channel::H, Channel::Dual] {
            for m in [Mode::EpochWise, Mode::Accumulated] {
                if let Some(s) = series.get(e, c, m) {
                    out.push((e, c.to_string(), m.to_string(), s.precision, s.recall, s.n_extracted));
                }
            }
        }
    }
    Ok(out)
}

/// Runs a subcommand (`prep`, `embed`, `synth`, `mine`, `eval`, `report`)
/// and returns its experiment directory. Extra arguments are passed through,
/// e.g. `["--seed", "3", "--miner.epochs", "2"]`.
#[pyfunction]
#[pyo3(signature = (command, config, args=Vec::new()))]
fn run(command: &str, config: PathBuf, args: Vec<String>) -> PyResult<PathBuf> {
    let mut argv: Vec<OsString> = vec!["ssmine".into(), command.into(), "--config".into(), config.into()];
    argv.extend(args.into_iter().map(OsString::from));
    let (rest, overrides) = cli::split_overrides(argv).map_err(err)?;
    let parsed = <cli::Args as clap::Parser>::try_parse_from(rest).map_err(|e| PyValueError::new_err(e.to_string()))?;
    cli::run(&parsed, &overrides).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn ssmine_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBpe>()?;
    m.add_class::<PyEncoder>()?;
    m.add_class::<Selection>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(margin_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(mutual_top, m)?)?;
    m.add_function(wrap_pyfunction!(gunning_fog, m)?)?;
    m.add_function(wrap_pyfunction!(syllables, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(precision_recall, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_log, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
