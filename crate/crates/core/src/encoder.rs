//! The trainable sentence encoder.
//!
//! Each content token `t` gets a hidden state
//! `h_t = tanh(W·[e_{t-1}; e_t; e_{t+1}] + b)` (zero-padded at the edges).
//! A sentence is represented twice: `cw = Σ_t e_t` and `ch = Σ_t h_t`.
//! The embedding rows start from the aligned pre-trained table while `W` and
//! `b` start random, so the two representations mature at different speeds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::util::{self, dot, norm};

pub const CHECKPOINT_MAGIC: &str = "SSMINE-CHECKPOINT 1";

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderHyper {
    pub d: usize,
    pub d_h: usize,
    pub lr: f64,
    /// Hinge margin of the contrastive loss.
    pub gamma: f64,
    pub negatives_per_pair: usize,
    /// Half-width of the uniform initialization of `W`; with unit embedding
    /// rows this is roughly the standard deviation of the pre-activations.
    pub init_scale: f64,
    /// Inverse-sqrt decay: `lr_t = lr / sqrt(1 + t / lr_decay_steps)`.
    /// Zero disables the decay.
    pub lr_decay_steps: f64,
    /// Global gradient-norm clip; zero disables clipping.
    pub clip_norm: f64,
    /// Initialize the three column blocks of each row of `W` to sum to
    /// zero. The linear part of `ch` is then `(W_p + W_c + W_n)·cw` minus
    /// boundary terms, which vanishes, so at version 0 `ch` does not simply
    /// restate `cw` under a random linear map.
    pub zero_sum_init: bool,
}

impl Default for EncoderHyper {
    fn default() -> Self {
        EncoderHyper {
            d: 64,
            d_h: 64,
            lr: 0.05,
            gamma: 0.2,
            negatives_per_pair: 5,
            init_scale: 2.0,
            lr_decay_steps: 100.0,
            clip_norm: 0.0,
            zero_sum_init: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    pub hyper: EncoderHyper,
    pub emb: EmbeddingTable,
    /// `d_h × 3d`, row-major.
    pub w_enc: Vec<f64>,
    pub b_enc: Vec<f64>,
    pub version: u64,
}

/// The two sentence vectors at one model version.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceRepr {
    pub cw: Vec<f64>,
    pub ch: Vec<f64>,
    pub model_version: u64,
}

/// Cached activations of one sentence.
struct Forward {
    cw: Vec<f64>,
    ch: Vec<f64>,
    /// Per position: concatenated window input and hidden state.
    steps: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Gradients of the contrastive loss. Embedding gradients are sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub emb: BTreeMap<u32, Vec<f64>>,
    pub w_enc: Vec<f64>,
    pub b_enc: Vec<f64>,
}

impl Gradients {
    fn zeros(model: &EncoderModel) -> Self {
        Gradients {
            emb: BTreeMap::new(),
            w_enc: vec![0.0; model.w_enc.len()],
            b_enc: vec![0.0; model.b_enc.len()],
        }
    }

    pub fn norm(&self) -> f64 {
        let s: f64 = self.w_enc.iter().chain(&self.b_enc).map(|x| x * x).sum::<f64>()
            + self.emb.values().flatten().map(|x| x * x).sum::<f64>();
        s.sqrt()
    }

    fn all_finite(&self) -> bool {
        self.w_enc
            .iter()
            .chain(&self.b_enc)
            .chain(self.emb.values().flatten())
            .all(|x| x.is_finite())
    }
}

/// One accepted pair as content-token ids (language tags excluded).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainPair {
    pub l1: Vec<u32>,
    pub l2: Vec<u32>,
}

impl EncoderModel {
    /// Wraps pre-trained embeddings with a freshly seeded window encoder.
    pub fn new(mut hyper: EncoderHyper, emb: EmbeddingTable, seed: u64) -> Self {
        hyper.d = emb.dim();
        let d = hyper.d;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = hyper.init_scale;
        let mut w_enc: Vec<f64> = (0..hyper.d_h * 3 * d)
            .map(|_| if a > 0.0 { rng.gen_range(-a..a) } else { 0.0 })
            .collect();
        if hyper.zero_sum_init && d > 0 {
            for row in w_enc.chunks_mut(3 * d) {
                for j in 0..d {
                    let m = (row[j] + row[d + j] + row[2 * d + j]) / 3.0;
                    row[j] -= m;
                    row[d + j] -= m;
                    row[2 * d + j] -= m;
                }
            }
        }
        EncoderModel {
            b_enc: vec![0.0; hyper.d_h],
            hyper,
            emb,
            w_enc,
            version: 0,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.emb.rows()
    }

    fn check_ids(&self, ids: &[u32]) -> Result<()> {
        match ids.iter().find(|&&t| t as usize >= self.vocab_size()) {
            Some(&t) => Err(Error::OutOfVocab(t)),
            None => Ok(()),
        }
    }

    fn forward(&self, ids: &[u32]) -> Forward {
        let d = self.hyper.d;
        let dh = self.hyper.d_h;
        let mut cw = vec![0.0; d];
        let mut ch = vec![0.0; dh];
        let mut steps = Vec::with_capacity(ids.len());
        for t in 0..ids.len() {
            let mut x = vec![0.0; 3 * d];
            if t > 0 {
                x[..d].copy_from_slice(self.emb.row(ids[t - 1] as usize));
            }
            x[d..2 * d].copy_from_slice(self.emb.row(ids[t] as usize));
            if t + 1 < ids.len() {
                x[2 * d..].copy_from_slice(self.emb.row(ids[t + 1] as usize));
            }
            for (c, e) in cw.iter_mut().zip(&x[d..2 * d]) {
                *c += e;
            }
            let h: Vec<f64> = self
                .w_enc
                .chunks(3 * d)
                .zip(&self.b_enc)
                .map(|(row, b)| (dot(row, &x) + b).tanh())
                .collect();
            for (c, v) in ch.iter_mut().zip(&h) {
                *c += v;
            }
            steps.push((x, h));
        }
        Forward { cw, ch, steps }
    }

    /// Sentence representation over content-token ids.
    pub fn represent(&self, ids: &[u32]) -> Result<SentenceRepr> {
        self.check_ids(ids)?;
        let f = self.forward(ids);
        Ok(SentenceRepr {
            cw: f.cw,
            ch: f.ch,
            model_version: self.version,
        })
    }

    /// Accumulates gradients for one sentence given the loss gradients with
    /// respect to its `cw` and `ch`.
    fn backward(&self, ids: &[u32], f: &Forward, g_cw: &[f64], g_ch: &[f64], grads: &mut Gradients) {
        let d = self.hyper.d;
        let dh = self.hyper.d_h;
        let mut add_emb = |id: u32, g: &[f64]| {
            let row = grads.emb.entry(id).or_insert_with(|| vec![0.0; d]);
            for (r, v) in row.iter_mut().zip(g) {
                *r += v;
            }
        };
        let mut dx = vec![0.0; 3 * d];
        let mut dz = vec![0.0; dh];
        for (t, (x, h)) in f.steps.iter().enumerate() {
            for k in 0..dh {
                dz[k] = g_ch[k] * (1.0 - h[k] * h[k]);
            }
            dx.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..dh {
                let g = dz[k];
                if g == 0.0 {
                    continue;
                }
                let row = &self.w_enc[k * 3 * d..(k + 1) * 3 * d];
                let grow = &mut grads.w_enc[k * 3 * d..(k + 1) * 3 * d];
                for j in 0..3 * d {
                    grow[j] += g * x[j];
                    dx[j] += g * row[j];
                }
                grads.b_enc[k] += g;
            }
            if t > 0 {
                add_emb(ids[t - 1], &dx[..d]);
            }
            let mut center: Vec<f64> = dx[d..2 * d].to_vec();
            for (c, g) in center.iter_mut().zip(g_cw) {
                *c += g;
            }
            add_emb(ids[t], &center);
            if t + 1 < ids.len() {
                add_emb(ids[t + 1], &dx[2 * d..]);
            }
        }
    }

    /// Learning rate after `version` updates.
    pub fn current_lr(&self) -> f64 {
        let h = &self.hyper;
        if h.lr_decay_steps > 0.0 {
            h.lr / (1.0 + self.version as f64 / h.lr_decay_steps).sqrt()
        } else {
            h.lr
        }
    }

    /// Applies `params -= lr * grads` and bumps the version.
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) {
        for (w, g) in self.w_enc.iter_mut().zip(&grads.w_enc) {
            *w -= lr * g;
        }
        for (b, g) in self.b_enc.iter_mut().zip(&grads.b_enc) {
            *b -= lr * g;
        }
        for (&id, g) in &grads.emb {
            for (e, v) in self.emb.row_mut(id as usize).iter_mut().zip(g) {
                *e -= lr * v;
            }
        }
        self.version += 1;
    }

    /// One SGD step on the contrastive loss of `batch`, with negatives drawn
    /// uniformly from the other batch members. Returns the loss before the
    /// update.
    pub fn train_step(&mut self, batch: &[TrainPair], rng: &mut impl Rng) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let negatives = sample_negatives(batch.len(), self.hyper.negatives_per_pair, rng);
        let (loss, mut grads) = contrastive_loss(self, batch, &negatives)?;
        let lr = self.current_lr();
        if !loss.is_finite() || !grads.all_finite() {
            return Err(Error::NonFiniteLoss {
                version: self.version,
                lr,
            });
        }
        let clip = self.hyper.clip_norm;
        if clip > 0.0 {
            let n = grads.norm();
            if n > clip {
                let s = clip / n;
                grads.w_enc.iter_mut().for_each(|g| *g *= s);
                grads.b_enc.iter_mut().for_each(|g| *g *= s);
                grads.emb.values_mut().flatten().for_each(|g| *g *= s);
            }
        }
        self.apply_gradients(&grads, lr);
        Ok(loss)
    }

    pub fn to_text(&self) -> String {
        let h = &self.hyper;
        let mut s = String::new();
        let _ = writeln!(s, "{CHECKPOINT_MAGIC}");
        let _ = writeln!(
            s,
            "hyper {} {} {:?} {:?} {} {:?} {:?} {:?} {}",
            h.d,
            h.d_h,
            h.lr,
            h.gamma,
            h.negatives_per_pair,
            h.init_scale,
            h.lr_decay_steps,
            h.clip_norm,
            h.zero_sum_init
        );
        let _ = writeln!(s, "version {}", self.version);
        let _ = writeln!(s, "emb {} {}", self.emb.rows(), self.emb.dim());
        let write_row = |s: &mut String, row: &[f64]| {
            let parts: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&parts.join(" "));
            s.push('\n');
        };
        for i in 0..self.emb.rows() {
            write_row(&mut s, self.emb.row(i));
        }
        let _ = writeln!(s, "w {} {}", h.d_h, 3 * h.d);
        for row in self.w_enc.chunks(3 * h.d) {
            write_row(&mut s, row);
        }
        let _ = writeln!(s, "b {}", h.d_h);
        write_row(&mut s, &self.b_enc);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let src = "<checkpoint>";
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| {
            lines
                .next()
                .map(|(i, l)| (i + 1, l))
                .ok_or_else(|| Error::parse(src, 0, format!("missing {what}")))
        };
        let (n, magic) = next("magic")?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::parse(src, n, "not a checkpoint"));
        }
        fn fields<'a>(line: &'a str, key: &str, n: usize) -> Result<Vec<&'a str>> {
            let mut it = line.split(' ');
            if it.next() != Some(key) {
                return Err(Error::parse("<checkpoint>", n, format!("expected `{key}`")));
            }
            Ok(it.collect())
        }
        fn num<T: std::str::FromStr>(s: &str, n: usize) -> Result<T> {
            s.parse().map_err(|_| Error::parse("<checkpoint>", n, format!("bad number `{s}`")))
        }
        fn floats(line: &str, len: usize, n: usize) -> Result<Vec<f64>> {
            let v: Vec<f64> = line
                .split(' ')
                .filter(|s| !s.is_empty())
                .map(|s| num(s, n))
                .collect::<Result<_>>()?;
            if v.len() != len {
                return Err(Error::parse("<checkpoint>", n, format!("expected {len} values")));
            }
            Ok(v)
        }

        let (n, line) = next("hyper")?;
        let f = fields(line, "hyper", n)?;
        if f.len() != 9 {
            return Err(Error::parse(src, n, "expected 9 hyper-parameters"));
        }
        let hyper = EncoderHyper {
            d: num(f[0], n)?,
            d_h: num(f[1], n)?,
            lr: num(f[2], n)?,
            gamma: num(f[3], n)?,
            negatives_per_pair: num(f[4], n)?,
            init_scale: num(f[5], n)?,
            lr_decay_steps: num(f[6], n)?,
            clip_norm: num(f[7], n)?,
            zero_sum_init: num(f[8], n)?,
        };
        let (n, line) = next("version")?;
        let version: u64 = num(fields(line, "version", n)?.first().copied().unwrap_or(""), n)?;
        let (n, line) = next("emb")?;
        let f = fields(line, "emb", n)?;
        let (rows, dim): (usize, usize) = (num(f[0], n)?, num(f.get(1).copied().unwrap_or(""), n)?);
        if dim != hyper.d {
            return Err(Error::parse(src, n, "embedding dim disagrees with hyper"));
        }
        let mut emb_rows = Vec::with_capacity(rows);
        for _ in 0..rows {
            let (n, line) = next("embedding row")?;
            emb_rows.push(floats(line, dim, n)?);
        }
        let emb = if rows == 0 {
            EmbeddingTable::zeros(0, dim)
        } else {
            EmbeddingTable::from_rows(&emb_rows)?
        };
        let (n, line) = next("w")?;
        fields(line, "w", n)?;
        let mut w_enc = Vec::with_capacity(hyper.d_h * 3 * hyper.d);
        for _ in 0..hyper.d_h {
            let (n, line) = next("encoder row")?;
            w_enc.extend(floats(line, 3 * hyper.d, n)?);
        }
        let (n, line) = next("b")?;
        fields(line, "b", n)?;
        let (n, line) = next("bias")?;
        let b_enc = floats(line, hyper.d_h, n)?;
        Ok(EncoderModel {
            hyper,
            emb,
            w_enc,
            b_enc,
            version,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        util::write_file(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&util::read_to_string(path)?)
    }
}

/// For each batch member, up to `k` distinct other members.
pub fn sample_negatives(n: usize, k: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    (0..n)
        .map(|i| {
            let take = k.min(n.saturating_sub(1));
            if take == 0 {
                return Vec::new();
            }
            sample(rng, n - 1, take)
                .into_iter()
                .map(|j| if j >= i { j + 1 } else { j })
                .collect()
        })
        .collect()
}

/// Cosine and its gradients with respect to both arguments.
fn cosine_grad(u: &[f64], v: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return (0.0, vec![0.0; u.len()], vec![0.0; v.len()]);
    }
    let c = dot(u, v) / (nu * nv);
    let gu = u
        .iter()
        .zip(v)
        .map(|(a, b)| b / (nu * nv) - c * a / (nu * nu))
        .collect();
    let gv = u
        .iter()
        .zip(v)
        .map(|(a, b)| a / (nu * nv) - c * b / (nv * nv))
        .collect();
    (c, gu, gv)
}

fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    for (y, v) in acc.iter_mut().zip(x) {
        *y += a * v;
    }
}

/// Hinge terms of one channel. `anchors[i]` must be close to `others[i]`
/// and farther than `others[n]` for each negative `n`.
fn hinge_channel(
    gamma: f64,
    anchors: &[&[f64]],
    others: &[&[f64]],
    negatives: &[Vec<usize>],
    g_anchor: &mut [Vec<f64>],
    g_other: &mut [Vec<f64>],
) -> f64 {
    let mut loss = 0.0;
    for i in 0..anchors.len() {
        let (pos, gpa, gpo) = cosine_grad(anchors[i], others[i]);
        if negatives[i].is_empty() {
            let l = gamma - pos;
            if l > 0.0 {
                loss += l;
                axpy(&mut g_anchor[i], -1.0, &gpa);
                axpy(&mut g_other[i], -1.0, &gpo);
            }
            continue;
        }
        for &n in &negatives[i] {
            let (neg, gna, gno) = cosine_grad(anchors[i], others[n]);
            let l = gamma - pos + neg;
            if l > 0.0 {
                loss += l;
                axpy(&mut g_anchor[i], -1.0, &gpa);
                axpy(&mut g_other[i], -1.0, &gpo);
                axpy(&mut g_anchor[i], 1.0, &gna);
                axpy(&mut g_other[n], 1.0, &gno);
            }
        }
    }
    loss
}

/// Bidirectional hinge loss on both channels:
/// `Σ max(0, γ − cos(a_i, b_i) + cos(a_i, b_n))` plus the `b → a` direction,
/// for `ch` and for `cw`. Pairs without negatives contribute
/// `max(0, γ − cos(a_i, b_i))` per direction.
pub fn contrastive_loss(
    model: &EncoderModel,
    batch: &[TrainPair],
    negatives: &[Vec<usize>],
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if negatives.len() != batch.len() {
        return Err(Error::InvalidArgument("one negative list per pair required".into()));
    }
    for p in batch {
        model.check_ids(&p.l1)?;
        model.check_ids(&p.l2)?;
    }
    let fa: Vec<Forward> = batch.iter().map(|p| model.forward(&p.l1)).collect();
    let fb: Vec<Forward> = batch.iter().map(|p| model.forward(&p.l2)).collect();
    let n = batch.len();
    let (d, dh) = (model.hyper.d, model.hyper.d_h);
    let gamma = model.hyper.gamma;

    let mut ga_h = vec![vec![0.0; dh]; n];
    let mut gb_h = vec![vec![0.0; dh]; n];
    let mut ga_w = vec![vec![0.0; d]; n];
    let mut gb_w = vec![vec![0.0; d]; n];

    let ah: Vec<&[f64]> = fa.iter().map(|f| f.ch.as_slice()).collect();
    let bh: Vec<&[f64]> = fb.iter().map(|f| f.ch.as_slice()).collect();
    let aw: Vec<&[f64]> = fa.iter().map(|f| f.cw.as_slice()).collect();
    let bw: Vec<&[f64]> = fb.iter().map(|f| f.cw.as_slice()).collect();

    let mut loss = 0.0;
    loss += hinge_channel(gamma, &ah, &bh, negatives, &mut ga_h, &mut gb_h);
    loss += hinge_channel(gamma, &bh, &ah, negatives, &mut gb_h, &mut ga_h);
    loss += hinge_channel(gamma, &aw, &bw, negatives, &mut ga_w, &mut gb_w);
    loss += hinge_channel(gamma, &bw, &aw, negatives, &mut gb_w, &mut ga_w);

    let mut grads = Gradients::zeros(model);
    for i in 0..n {
        model.backward(&batch[i].l1, &fa[i], &ga_w[i], &ga_h[i], &mut grads);
        model.backward(&batch[i].l2, &fb[i], &gb_w[i], &gb_h[i], &mut grads);
    }
    Ok((loss, grads))
}
