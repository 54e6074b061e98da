//! Pair scoring, ROC/PR/DET curves, the equal error rate, score histograms
//! and the accept/reject rule.
//!
//! Scores are normalized distances: genuine pairs should score low. A pair
//! is accepted as genuine when its score is at most the threshold, so FMR(t)
//! is the fraction of forgery pairs scoring `≤ t` and FNMR(t) the fraction of
//! genuine pairs scoring `> t`.

mod metrics;
mod scoring;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::PairLabel;
use crate::error::{Error, Result};

pub use metrics::{fmr_fnmr_eer, histogram, pr_aupr, roc_auc, DetPoint, Histogram, PrPoint, RocPoint};
pub use scoring::{decide, score_pairs, score_pairs_with, verify, ScoredPair, Verification};

pub const DEFAULT_BINS: usize = 50;

/// Every curve and summary number for one scored pair list.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveReport {
    pub roc: Vec<RocPoint>,
    pub auc: f64,
    pub pr: Vec<PrPoint>,
    pub aupr: f64,
    pub fmr_fnmr: Vec<DetPoint>,
    pub eer: f64,
    pub eer_threshold: f64,
    pub hist_genuine: Histogram,
    pub hist_forged: Histogram,
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub auc: f64,
    pub aupr: f64,
    pub eer: f64,
    pub eer_threshold: f64,
    pub genuine_pairs: usize,
    pub forgery_pairs: usize,
}

impl CurveReport {
    pub fn new(scored: &[ScoredPair], bins: usize) -> Result<Self> {
        let (roc, auc) = roc_auc(scored)?;
        let (pr, aupr) = pr_aupr(scored)?;
        let (fmr_fnmr, eer, eer_threshold) = fmr_fnmr_eer(scored)?;
        let (hist_genuine, hist_forged) = histogram(scored, bins)?;
        Ok(Self {
            roc,
            auc,
            pr,
            aupr,
            fmr_fnmr,
            eer,
            eer_threshold,
            hist_genuine,
            hist_forged,
        })
    }

    pub fn summary(&self) -> Summary {
        Summary {
            auc: self.auc,
            aupr: self.aupr,
            eer: self.eer,
            eer_threshold: self.eer_threshold,
            genuine_pairs: self.hist_genuine.counts.iter().sum(),
            forgery_pairs: self.hist_forged.counts.iter().sum(),
        }
    }

    /// Writes `roc.csv`, `pr.csv`, `det.csv`, `hist_genuine.csv`,
    /// `hist_forged.csv` and `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut roc = String::from("threshold,fpr,tpr\n");
        for p in &self.roc {
            writeln!(roc, "{},{},{}", p.threshold, p.fpr, p.tpr).expect("string write");
        }
        let mut pr = String::from("threshold,recall,precision\n");
        for p in &self.pr {
            writeln!(pr, "{},{},{}", p.threshold, p.recall, p.precision).expect("string write");
        }
        let mut det = String::from("threshold,fmr,fnmr\n");
        for p in &self.fmr_fnmr {
            writeln!(det, "{},{},{}", p.threshold, p.fmr, p.fnmr).expect("string write");
        }
        let hist = |h: &Histogram| {
            let mut out = String::from("bin_lo,bin_hi,count,density\n");
            for (i, (c, d)) in h.counts.iter().zip(&h.densities).enumerate() {
                let lo = i as f64 * h.width();
                writeln!(out, "{lo},{},{c},{d}", lo + h.width()).expect("string write");
            }
            out
        };
        let summary = serde_json::to_string_pretty(&self.summary()).map_err(|e| Error::Format(e.to_string()))?;
        for (name, body) in [
            ("roc.csv", roc),
            ("pr.csv", pr),
            ("det.csv", det),
            ("hist_genuine.csv", hist(&self.hist_genuine)),
            ("hist_forged.csv", hist(&self.hist_forged)),
            ("summary.json", summary + "\n"),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        }
        Ok(())
    }
}

/// Reads a `summary.json` written by [`CurveReport::write`].
pub fn read_summary(path: &Path) -> Result<Summary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Scored pairs as CSV: `first,second,label,score`.
pub fn scores_csv(scored: &[ScoredPair]) -> String {
    let mut out = String::from("first,second,label,score\n");
    for s in scored {
        let label = match s.pair.label {
            PairLabel::Genuine => "genuine",
            PairLabel::Forgery => "forgery",
        };
        writeln!(out, "{},{},{label},{}", s.pair.first, s.pair.second, s.score).expect("string write");
    }
    out
}
