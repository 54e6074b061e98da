//! ROC, precision-recall, FMR/FNMR and the equal error rate for a list of
//! scored pairs.
//!
//! ```text
//! cargo run --example verification_metrics
//! ```

use sigscat::dataset::{EvalPair, PairLabel};
use sigscat::evaluation::{decide, CurveReport, ScoredPair};

fn main() -> sigscat::Result<()> {
    let genuine = [0.05, 0.12, 0.18, 0.22, 0.31, 0.40];
    let forged = [0.28, 0.45, 0.52, 0.60, 0.61, 0.77, 0.90];
    let scored: Vec<ScoredPair> = genuine
        .iter()
        .map(|&s| (s, PairLabel::Genuine))
        .chain(forged.iter().map(|&s| (s, PairLabel::Forgery)))
        .map(|(score, label)| ScoredPair {
            pair: EvalPair { first: 0, second: 1, label },
            score,
        })
        .collect();

    let report = CurveReport::new(&scored, 10)?;
    println!("AUC {:.4}  AUPR {:.4}", report.auc, report.aupr);
    println!("EER {:.4} at threshold {:.3}", report.eer, report.eer_threshold);
    println!("{:>9} {:>6} {:>6}", "threshold", "FMR", "FNMR");
    for p in &report.fmr_fnmr {
        println!("{:>9.3} {:>6.3} {:>6.3}", p.threshold, p.fmr, p.fnmr);
    }
    for score in [0.2, 0.35, 0.5] {
        println!("score {score}: {}", decide(score, report.eer_threshold).decision);
    }
    Ok(())
}
