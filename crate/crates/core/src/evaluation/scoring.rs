use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{load_image, EvalPair, Label, SignatureCatalog, SignatureImage};
use crate::error::{Error, Result};
use crate::model::{distance, Embedding, SiameseModel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScoredPair {
    pub pair: EvalPair,
    /// Normalized distance in `[0, 1]`; lower is more similar.
    pub score: f64,
}

fn pair_error(catalog: &SignatureCatalog, index: usize, pair: &EvalPair, source: Error) -> Error {
    Error::Pair {
        index,
        first: catalog.record(pair.first).source_path(),
        second: catalog.record(pair.second).source_path(),
        source: Box::new(source),
    }
}

fn check_score(score: f64) -> Result<f64> {
    if score.is_finite() && (0.0..=1.0).contains(&score) {
        Ok(score)
    } else {
        Err(Error::Metric(format!("score {score} outside [0, 1]")))
    }
}

/// Scores `pairs` with an arbitrary embedding function.
///
/// With `cache` every distinct image is embedded exactly once; without it
/// both sides of every pair are embedded afresh. Output order follows
/// `pairs`.
pub fn score_pairs_with<F>(catalog: &SignatureCatalog, pairs: &[EvalPair], embed: F, cache: bool) -> Result<Vec<ScoredPair>>
where
    F: Fn(&SignatureImage) -> Result<Embedding> + Sync,
{
    let embed_record = |i: usize| catalog.load(i).and_then(|img| embed(&img));
    if !cache {
        return pairs
            .par_iter()
            .enumerate()
            .map(|(k, p)| {
                let score = embed_record(p.first)
                    .and_then(|a| Ok((a, embed_record(p.second)?)))
                    .and_then(|(a, b)| check_score(distance(&a, &b)?))
                    .map_err(|e| pair_error(catalog, k, p, e))?;
                Ok(ScoredPair { pair: *p, score })
            })
            .collect();
    }

    let unique: Vec<usize> = pairs
        .iter()
        .flat_map(|p| [p.first, p.second])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let embedded: Vec<Result<Embedding>> = unique.par_iter().map(|&i| embed_record(i)).collect();
    let mut table: Vec<Option<Embedding>> = vec![None; catalog.len()];
    for (&i, e) in unique.iter().zip(embedded) {
        match e {
            Ok(e) => table[i] = Some(e),
            Err(err) => {
                let (k, p) = pairs
                    .iter()
                    .enumerate()
                    .find(|(_, p)| p.first == i || p.second == i)
                    .expect("image comes from a pair");
                return Err(pair_error(catalog, k, p, err));
            }
        }
    }
    pairs
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let (a, b) = (table[p.first].as_ref(), table[p.second].as_ref());
            let score = distance(a.expect("embedded"), b.expect("embedded"))
                .and_then(check_score)
                .map_err(|e| pair_error(catalog, k, p, e))?;
            Ok(ScoredPair { pair: *p, score })
        })
        .collect()
}

/// Scores `pairs` with `model`, embedding each distinct image once.
pub fn score_pairs(catalog: &SignatureCatalog, pairs: &[EvalPair], model: &SiameseModel) -> Result<Vec<ScoredPair>> {
    score_pairs_with(catalog, pairs, |img| model.embed(&img.pixels), true)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Verification {
    pub score: f64,
    pub threshold: f64,
    pub decision: Label,
}

/// Compares two image files: genuine iff their score is at most `threshold`.
pub fn verify(first: &Path, second: &Path, model: &SiameseModel, threshold: f64) -> Result<Verification> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Config(format!("threshold must lie in [0, 1], got {threshold}")));
    }
    let a = model.embed(&load_image(first)?)?;
    let b = if first == second {
        a.clone()
    } else {
        model.embed(&load_image(second)?)?
    };
    Ok(decide(distance(&a, &b)?, threshold))
}

pub fn decide(score: f64, threshold: f64) -> Verification {
    Verification {
        score,
        threshold,
        decision: if score <= threshold { Label::Genuine } else { Label::Forged },
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;
    use crate::dataset::{generate_eval_pairs, synthesize_dataset, PairLabel, Split};

    /// A cheap deterministic stand-in for the network.
    fn toy_embed(img: &SignatureImage) -> Result<Embedding> {
        let d = img.pixels.data();
        let v: Vec<f32> = (0..4).map(|k| d.iter().skip(k).step_by(4).sum::<f32>()).collect();
        let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        Ok(Embedding::new(v.iter().map(|x| x / n).collect()))
    }

    #[test]
    fn cache_embeds_each_image_once() {
        let c = synthesize_dataset(2, 4, 3, 2).unwrap();
        let pairs = generate_eval_pairs(&c, Split::Test, None, 0).unwrap();
        let unique: BTreeSet<usize> = pairs.iter().flat_map(|p| [p.first, p.second]).collect();
        let calls = AtomicUsize::new(0);
        let counted = |img: &SignatureImage| {
            calls.fetch_add(1, Ordering::Relaxed);
            toy_embed(img)
        };
        let cached = score_pairs_with(&c, &pairs, counted, true).unwrap();
        assert_eq!(calls.load(Ordering::Relaxed), unique.len());
        let uncached = score_pairs_with(&c, &pairs, toy_embed, false).unwrap();
        assert_eq!(cached, uncached);
        assert!(cached.iter().zip(&pairs).all(|(s, p)| s.pair == *p));
    }

    #[test]
    fn an_image_against_itself_scores_zero() {
        let c = synthesize_dataset(1, 2, 1, 2).unwrap();
        let pair = EvalPair {
            first: 0,
            second: 0,
            label: PairLabel::Genuine,
        };
        let s = score_pairs_with(&c, &[pair], toy_embed, true).unwrap();
        assert_eq!(s[0].score, 0.0);
    }

    #[test]
    fn failures_carry_the_pair() {
        let c = synthesize_dataset(1, 2, 1, 2).unwrap();
        let pairs = generate_eval_pairs(&c, Split::Test, None, 0).unwrap();
        let broken = |_: &SignatureImage| -> Result<Embedding> { Err(Error::NonFinite("test".into())) };
        for cache in [true, false] {
            let err = score_pairs_with(&c, &pairs, broken, cache).unwrap_err();
            assert!(matches!(err, Error::Pair { .. }), "{err}");
            assert!(err.to_string().contains("memory:"));
        }
    }

    #[test]
    fn decision_rule() {
        assert_eq!(decide(0.3, 0.3).decision, Label::Genuine);
        assert_eq!(decide(0.3000001, 0.3).decision, Label::Forged);
        assert_eq!(decide(0.2, 0.0).decision, Label::Forged);
    }
}
