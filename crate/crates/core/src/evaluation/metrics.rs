use serde::Serialize;

use super::ScoredPair;
use crate::dataset::PairLabel;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub fmr: f64,
    pub fnmr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub bins: usize,
    pub counts: Vec<usize>,
    pub densities: Vec<f64>,
}

impl Histogram {
    pub fn width(&self) -> f64 {
        1.0 / self.bins as f64
    }
}

/// Distinct scores in ascending order with the number of genuine and
/// forgery pairs at each.
struct Groups {
    scores: Vec<f64>,
    genuine: Vec<usize>,
    forged: Vec<usize>,
    total_genuine: usize,
    total_forged: usize,
}

fn group(scored: &[ScoredPair]) -> Result<Groups> {
    let mut sorted: Vec<(f64, PairLabel)> = Vec::with_capacity(scored.len());
    for s in scored {
        if !s.score.is_finite() {
            return Err(Error::Metric(format!("non-finite score {}", s.score)));
        }
        sorted.push((s.score, s.pair.label));
    }
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut g = Groups {
        scores: Vec::new(),
        genuine: Vec::new(),
        forged: Vec::new(),
        total_genuine: 0,
        total_forged: 0,
    };
    for (score, label) in sorted {
        if g.scores.last() != Some(&score) {
            g.scores.push(score);
            g.genuine.push(0);
            g.forged.push(0);
        }
        let last = g.scores.len() - 1;
        match label {
            PairLabel::Genuine => {
                g.genuine[last] += 1;
                g.total_genuine += 1;
            }
            PairLabel::Forgery => {
                g.forged[last] += 1;
                g.total_forged += 1;
            }
        }
    }
    Ok(g)
}

fn need_both(g: &Groups) -> Result<()> {
    if g.total_genuine == 0 || g.total_forged == 0 {
        return Err(Error::Metric(format!(
            "need both pair kinds, got {} genuine and {} forgery pairs",
            g.total_genuine, g.total_forged
        )));
    }
    Ok(())
}

/// ROC with genuine pairs as positives and `score ≤ t` as a positive test.
///
/// One point per distinct score plus the origin; the area is the trapezoid
/// sum, so tied scores count one half.
pub fn roc_auc(scored: &[ScoredPair]) -> Result<(Vec<RocPoint>, f64)> {
    let g = group(scored)?;
    need_both(&g)?;
    let (pos, neg) = (g.total_genuine as f64, g.total_forged as f64);
    let mut points = vec![RocPoint {
        threshold: f64::NEG_INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    for (i, &t) in g.scores.iter().enumerate() {
        let prev = *points.last().expect("origin");
        tp += g.genuine[i];
        fp += g.forged[i];
        let p = RocPoint {
            threshold: t,
            fpr: fp as f64 / neg,
            tpr: tp as f64 / pos,
        };
        auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
        points.push(p);
    }
    Ok((points, auc))
}

/// Precision and recall at every distinct score, and the step-interpolated
/// average precision `Σ (R_k − R_{k−1})·P_k`.
pub fn pr_aupr(scored: &[ScoredPair]) -> Result<(Vec<PrPoint>, f64)> {
    let g = group(scored)?;
    if g.total_genuine == 0 {
        return Err(Error::Metric("precision/recall needs at least one genuine pair".into()));
    }
    let pos = g.total_genuine as f64;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut points = Vec::with_capacity(g.scores.len());
    let (mut ap, mut last_recall) = (0.0, 0.0);
    for (i, &t) in g.scores.iter().enumerate() {
        tp += g.genuine[i];
        fp += g.forged[i];
        let p = PrPoint {
            threshold: t,
            recall: tp as f64 / pos,
            precision: tp as f64 / (tp + fp) as f64,
        };
        ap += (p.recall - last_recall) * p.precision;
        last_recall = p.recall;
        points.push(p);
    }
    Ok((points, ap))
}

/// FMR/FNMR over every distinct score and every midpoint between adjacent
/// distinct scores, with the equal error rate.
///
/// The EER is `(FMR + FNMR) / 2` where `|FMR − FNMR|` is smallest. Ties go to
/// the smaller threshold. Rates are constant on `[s_i, s_{i+1})`, so the
/// chosen operating range is reported by its midpoint (or by the largest
/// score when it is the last range).
pub fn fmr_fnmr_eer(scored: &[ScoredPair]) -> Result<(Vec<DetPoint>, f64, f64)> {
    let g = group(scored)?;
    need_both(&g)?;
    let (pos, neg) = (g.total_genuine as f64, g.total_forged as f64);
    let mut curve = Vec::with_capacity(2 * g.scores.len());
    let (mut accepted_genuine, mut accepted_forged) = (0usize, 0usize);
    let mut best: Option<(usize, f64)> = None;
    for (i, &t) in g.scores.iter().enumerate() {
        accepted_genuine += g.genuine[i];
        accepted_forged += g.forged[i];
        let fmr = accepted_forged as f64 / neg;
        let fnmr = (g.total_genuine - accepted_genuine) as f64 / pos;
        curve.push(DetPoint { threshold: t, fmr, fnmr });
        if let Some(&next) = g.scores.get(i + 1) {
            curve.push(DetPoint {
                threshold: t + (next - t) / 2.0,
                fmr,
                fnmr,
            });
        }
        let gap = (fmr - fnmr).abs();
        if best.is_none_or(|(_, b)| gap < b) {
            best = Some((curve.len() - 1, gap));
        }
    }
    let (at, _) = best.expect("non-empty");
    let p = curve[at];
    Ok((curve, (p.fmr + p.fnmr) / 2.0, p.threshold))
}

/// Per-class histograms over `bins` uniform bins of `[0, 1]`. The returned
/// pair is (genuine, forgery).
pub fn histogram(scored: &[ScoredPair], bins: usize) -> Result<(Histogram, Histogram)> {
    if bins == 0 {
        return Err(Error::Metric("histogram needs at least one bin".into()));
    }
    let build = |label: PairLabel| {
        let mut counts = vec![0usize; bins];
        let mut n = 0usize;
        for s in scored.iter().filter(|s| s.pair.label == label) {
            let b = ((s.score.clamp(0.0, 1.0) * bins as f64).floor() as usize).min(bins - 1);
            counts[b] += 1;
            n += 1;
        }
        let densities = counts
            .iter()
            .map(|&c| if n == 0 { 0.0 } else { c as f64 * bins as f64 / n as f64 })
            .collect();
        Histogram { bins, counts, densities }
    };
    Ok((build(PairLabel::Genuine), build(PairLabel::Forgery)))
}
