//! Extraction precision and recall against ground truth, per epoch and
//! accumulated over epochs, for each representation channel.

use std::collections::{BTreeSet, HashSet};
use std::fmt::{self, Write as _};
use std::path::Path;

use crate::error::{Error, Result};
use crate::miner::{CandidatePair, MiningLog, PairKey};
use crate::util;

pub const PR_HEADER: &str = "epoch,channel,mode,precision,recall,n_extracted,n_correct,empty";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    W,
    H,
    Dual,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::W, Channel::H, Channel::Dual];

    pub fn accepts(self, rec: &CandidatePair) -> bool {
        match self {
            Channel::W => rec.accepted_w,
            Channel::H => rec.accepted_h,
            Channel::Dual => rec.accepted_dual,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::W => "w",
            Channel::H => "h",
            Channel::Dual => "dual",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    EpochWise,
    Accumulated,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::EpochWise => "epoch",
            Mode::Accumulated => "accumulated",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrScore {
    pub precision: f64,
    pub recall: f64,
    pub n_extracted: usize,
    pub n_correct: usize,
    /// Nothing was extracted; precision is reported as 1.0 by convention.
    pub empty: bool,
}

/// Precision and recall of an extracted set, keyed by sentence position.
pub fn precision_recall(extracted: &HashSet<PairKey>, truth: &HashSet<PairKey>) -> Result<PrScore> {
    if truth.is_empty() {
        return Err(Error::InvalidArgument("empty ground truth".into()));
    }
    let correct = extracted.iter().filter(|k| truth.contains(k)).count();
    let empty = extracted.is_empty();
    Ok(PrScore {
        precision: if empty { 1.0 } else { correct as f64 / extracted.len() as f64 },
        recall: correct as f64 / truth.len() as f64,
        n_extracted: extracted.len(),
        n_correct: correct,
        empty,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrRecord {
    pub epoch: usize,
    pub channel: Channel,
    pub mode: Mode,
    pub score: PrScore,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrSeries {
    pub records: Vec<PrRecord>,
}

impl PrSeries {
    pub fn get(&self, epoch: usize, channel: Channel, mode: Mode) -> Option<&PrScore> {
        self.records
            .iter()
            .find(|r| r.epoch == epoch && r.channel == channel && r.mode == mode)
            .map(|r| &r.score)
    }

    pub fn epochs(&self) -> Vec<usize> {
        let s: BTreeSet<usize> = self.records.iter().map(|r| r.epoch).collect();
        s.into_iter().collect()
    }

    /// Series of one channel and mode, in epoch order.
    pub fn curve(&self, channel: Channel, mode: Mode) -> Vec<(usize, PrScore)> {
        self.records
            .iter()
            .filter(|r| r.channel == channel && r.mode == mode)
            .map(|r| (r.epoch, r.score))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{PR_HEADER}\n");
        for r in &self.records {
            let sc = &r.score;
            let _ = writeln!(
                s,
                "{},{},{},{:.6},{:.6},{},{},{}",
                r.epoch,
                r.channel,
                r.mode,
                sc.precision,
                sc.recall,
                sc.n_extracted,
                sc.n_correct,
                u8::from(sc.empty)
            );
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        util::write_file(path, &self.to_csv())
    }
}

/// Keys accepted by `channel` in `epoch`, deduplicated.
pub fn extracted_in_epoch(log: &MiningLog, epoch: usize, channel: Channel) -> HashSet<PairKey> {
    log.records
        .iter()
        .filter(|r| r.epoch == epoch && channel.accepts(r))
        .map(|r| r.key.clone())
        .collect()
}

/// Epoch-wise and accumulated P/R for every epoch present in the log
/// (from the first to the last, including epochs with no acceptances).
pub fn accumulate(log: &MiningLog, truth: &HashSet<PairKey>) -> Result<PrSeries> {
    let epochs = log.epochs();
    let (Some(&first), Some(&last)) = (epochs.first(), epochs.last()) else {
        return Ok(PrSeries::default());
    };
    accumulate_epochs(log, truth, first..=last)
}

pub fn accumulate_epochs(
    log: &MiningLog,
    truth: &HashSet<PairKey>,
    epochs: impl IntoIterator<Item = usize>,
) -> Result<PrSeries> {
    let mut series = PrSeries::default();
    let mut union: [HashSet<PairKey>; 3] = Default::default();
    for epoch in epochs {
        for (c, channel) in Channel::ALL.into_iter().enumerate() {
            let ext = extracted_in_epoch(log, epoch, channel);
            series.records.push(PrRecord {
                epoch,
                channel,
                mode: Mode::EpochWise,
                score: precision_recall(&ext, truth)?,
            });
            union[c].extend(ext);
            series.records.push(PrRecord {
                epoch,
                channel,
                mode: Mode::Accumulated,
                score: precision_recall(&union[c], truth)?,
            });
        }
    }
    Ok(series)
}

/// Checks from the log alone that every dual acceptance is also a
/// channel-w and channel-h acceptance, epoch by epoch.
pub fn dual_contained(log: &MiningLog) -> bool {
    log.epochs().into_iter().all(|e| {
        let w = extracted_in_epoch(log, e, Channel::W);
        let h = extracted_in_epoch(log, e, Channel::H);
        extracted_in_epoch(log, e, Channel::Dual)
            .iter()
            .all(|k| w.contains(k) && h.contains(k))
    })
}

/// Fraction of false pairs among the epoch's dual acceptances.
pub fn false_fraction(series: &PrSeries, epoch: usize) -> Option<f64> {
    series
        .get(epoch, Channel::Dual, Mode::EpochWise)
        .filter(|s| !s.empty)
        .map(|s| 1.0 - s.precision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn key(i: usize) -> PairKey {
        PairKey::new("a", i, "b", i)
    }

    fn set(ids: &[usize]) -> HashSet<PairKey> {
        ids.iter().map(|&i| key(i)).collect()
    }

    fn rec(i: usize, epoch: usize, w: bool, h: bool) -> CandidatePair {
        CandidatePair {
            key: key(i),
            score_w: 1.0,
            score_h: 1.0,
            accepted_w: w,
            accepted_h: h,
            accepted_dual: w && h,
            step: 0,
            model_version: 0,
            epoch,
            is_true: None,
        }
    }

    #[test]
    fn perfect_extraction() {
        let t = set(&[1, 2, 3]);
        let s = precision_recall(&t, &t).unwrap();
        assert_eq!((s.precision, s.recall, s.empty), (1.0, 1.0, false));
    }

    #[test]
    fn hand_counted() {
        let s = precision_recall(&set(&[1, 9]), &set(&[1, 2, 3, 4])).unwrap();
        assert_eq!((s.precision, s.recall), (0.5, 0.25));
    }

    #[test]
    fn empty_extraction_flagged() {
        let s = precision_recall(&HashSet::new(), &set(&[1])).unwrap();
        assert_eq!((s.precision, s.recall, s.empty), (1.0, 0.0, true));
        assert!(precision_recall(&set(&[1]), &HashSet::new()).is_err());
    }

    #[test]
    fn single_epoch_modes_agree() {
        let log = MiningLog {
            records: vec![rec(1, 1, true, true), rec(5, 1, true, false)],
        };
        let s = accumulate(&log, &set(&[1, 2])).unwrap();
        for c in Channel::ALL {
            assert_eq!(s.get(1, c, Mode::EpochWise), s.get(1, c, Mode::Accumulated));
        }
    }

    #[test]
    fn accumulated_precision_two_epochs() {
        let log = MiningLog {
            records: vec![rec(1, 1, true, true), rec(7, 2, true, true)],
        };
        let s = accumulate(&log, &set(&[1, 2])).unwrap();
        let acc = s.get(2, Channel::Dual, Mode::Accumulated).unwrap();
        assert_eq!(acc.precision, 0.5);
        assert_eq!(s.get(2, Channel::Dual, Mode::EpochWise).unwrap().precision, 0.0);
    }

    #[test]
    fn gaps_and_duplicates() {
        let log = MiningLog {
            records: vec![rec(1, 1, true, true), rec(1, 1, true, true), rec(2, 3, true, true)],
        };
        let s = accumulate(&log, &set(&[1, 2])).unwrap();
        assert_eq!(s.epochs(), vec![1, 2, 3]);
        assert_eq!(s.get(1, Channel::Dual, Mode::EpochWise).unwrap().n_extracted, 1);
        assert!(s.get(2, Channel::Dual, Mode::EpochWise).unwrap().empty);
        assert_eq!(false_fraction(&s, 2), None);
        assert_eq!(false_fraction(&s, 1), Some(0.0));
    }

    #[test]
    fn csv_shape() {
        let log = MiningLog {
            records: vec![rec(1, 1, true, true)],
        };
        let csv = accumulate(&log, &set(&[1])).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], PR_HEADER);
        assert_eq!(lines.len(), 7);
        assert!(lines.iter().any(|l| l.starts_with("1,dual,accumulated,1.000000,1.000000")));
    }

    fn arb_log() -> impl Strategy<Value = MiningLog> {
        prop::collection::vec((0usize..30, 1usize..6, any::<bool>(), any::<bool>()), 0..80)
            .prop_map(|v| MiningLog {
                records: v.into_iter().map(|(i, e, w, h)| rec(i, e, w, h)).collect(),
            })
    }

    proptest! {
        #[test]
        fn series_invariants(log in arb_log(), truth in prop::collection::hash_set(0usize..30, 1..15)) {
            let truth: HashSet<PairKey> = truth.into_iter().map(key).collect();
            let s = accumulate(&log, &truth).unwrap();
            prop_assert!(dual_contained(&log));
            for c in Channel::ALL {
                let acc = s.curve(c, Mode::Accumulated);
                for w in acc.windows(2) {
                    prop_assert!(w[1].1.recall >= w[0].1.recall);
                    prop_assert!(w[1].1.n_extracted >= w[0].1.n_extracted);
                }
                for (e, ep) in s.curve(c, Mode::EpochWise) {
                    let a = s.get(e, c, Mode::Accumulated).unwrap();
                    prop_assert!(ep.recall <= a.recall);
                    prop_assert!((0.0..=1.0).contains(&ep.precision));
                    prop_assert!((0.0..=1.0).contains(&ep.recall));
                }
            }
        }
    }
}
