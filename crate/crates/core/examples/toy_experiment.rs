//! Runs the bundled toy experiment in memory and prints the trends that the
//! curriculum analyses look at.
//!
//! Usage: cargo run --release --example toy_experiment -- [CONFIG] [key=value ...]

use std::path::PathBuf;

use ssmine::config::ExperimentConfig;
use ssmine::curriculum;
use ssmine::evalx::{self, Channel, Mode};
use ssmine::pipeline::{self, RawInputs};
use ssmine::synthcorp;

fn main() -> ssmine::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut args = std::env::args().skip(1).peekable();
    let conf = match args.peek() {
        Some(a) if !a.contains('=') => PathBuf::from(args.next().unwrap()),
        _ => PathBuf::from("data/toy/toy.conf"),
    };
    let mut cfg = ExperimentConfig::load(&conf)?;
    for a in args {
        let (k, v) = a.split_once('=').expect("overrides are key=value");
        cfg.set(k, v)?;
    }
    let t0 = std::time::Instant::now();
    let parallel = synthcorp::read_parallel(
        &cfg.require_path("paths.parallel_l1")?,
        &cfg.require_path("paths.parallel_l2")?,
    )?;
    let labeled = synthcorp::build_synthetic(&parallel, &cfg.synth()?)?;
    let truth = labeled.truth_set();
    let raw = RawInputs {
        lang_l1: cfg.lang_l1().into(),
        lang_l2: cfg.lang_l2().into(),
        docs_l1: labeled.docs_l1.clone(),
        docs_l2: labeled.docs_l2.clone(),
        pairs: labeled.pairs.clone(),
    };
    let run = pipeline::run_mining(&cfg, &raw, Some(&truth))?;
    let surviving = run
        .prepared
        .corpus
        .doc_pairs
        .iter()
        .flat_map(|p| p.l1.sentences.iter().flat_map(move |a| p.l2.sentences.iter().map(move |b| (a, b))))
        .filter(|(a, b)| truth.contains(&ssmine::miner::PairKey::of(a, b)))
        .count();
    println!(
        "prep: {} sentences dropped, {} of {} true pairs kept",
        run.prepared.report.dropped_sentences,
        surviving,
        truth.len()
    );
    if let Some(a) = &run.align {
        println!(
            "alignment: {} seed pairs, cosine {:.3} -> {:.3}",
            a.dictionary_size, a.cosine_before, a.cosine_after
        );
    }
    let pr = evalx::accumulate(&run.output.log, &truth)?;
    println!("epoch  P_w    P_h    P_dual  n_dual  R_dual_ep  R_dual_acc");
    for e in pr.epochs() {
        let g = |c, m| pr.get(e, c, m).unwrap();
        println!(
            "{e:>5}  {:.3}  {:.3}  {:.3}   {:>5}   {:.3}      {:.3}",
            g(Channel::W, Mode::EpochWise).precision,
            g(Channel::H, Mode::EpochWise).precision,
            g(Channel::Dual, Mode::EpochWise).precision,
            g(Channel::Dual, Mode::EpochWise).n_extracted,
            g(Channel::Dual, Mode::EpochWise).recall,
            g(Channel::Dual, Mode::Accumulated).recall,
        );
    }
    let report = pipeline::curriculum_report(&cfg, &raw, &run.prepared.corpus, &run.output.log)?;
    for m in ["similarity", "gf", "gf_sentence_mean", "homograph_ratio", "homograph_ratio_l1", "perplexity_l1"] {
        let v: Vec<f64> = report.series.metric(m).into_iter().map(|(_, x)| x).collect();
        if v.is_empty() {
            continue;
        }
        let q = (v.len() * 3 / 4).min(v.len() - 1);
        let last_q = v[q..].iter().sum::<f64>() / (v.len() - q) as f64;
        println!(
            "{m:<20} windows {:>3}  first {:>8.3}  last {:>8.3}  final-quarter mean {:>8.3}",
            v.len(),
            v[0],
            v[v.len() - 1],
            last_q
        );
    }
    for c in &report.correlations {
        println!("r(epoch {}, {} ~ {}) = {:?} over {}", c.epoch, c.var1, c.var2, c.r, c.n);
    }
    let l1: Vec<Vec<String>> = run.prepared.corpus.sentences_l1().map(|s| s.surface_words.clone()).collect();
    let gfs: Vec<f64> = l1.iter().filter_map(|s| curriculum::gunning_fog(std::slice::from_ref(s)).ok()).collect();
    let m = gfs.iter().sum::<f64>() / gfs.len() as f64;
    let var = gfs.iter().map(|g| (g - m).powi(2)).sum::<f64>() / gfs.len() as f64;
    println!("corpus sentence GF mean {m:.2} var {var:.2}; {} training steps; {:.1}s", run.output.losses.len(), t0.elapsed().as_secs_f64());
    Ok(())
}
