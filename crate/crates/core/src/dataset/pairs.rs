use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::catalog::{SignatureCatalog, Split};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairLabel {
    /// Two genuine signatures of one writer.
    Genuine,
    /// A genuine reference and a forgery of the same writer.
    Forgery,
}

/// Record indices into a catalog. `first` is always a genuine reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EvalPair {
    pub first: usize,
    pub second: usize,
    pub label: PairLabel,
}

fn cap(pairs: Vec<EvalPair>, limit: Option<usize>, rng: &mut ChaCha8Rng) -> Vec<EvalPair> {
    match limit {
        Some(k) if pairs.len() > k => {
            let mut keep = sample(rng, pairs.len(), k).into_vec();
            keep.sort_unstable();
            keep.into_iter().map(|i| pairs[i]).collect()
        }
        _ => pairs,
    }
}

/// Every genuine–genuine and genuine–forgery pair of each writer in `split`.
///
/// With `per_writer_cap`, each writer keeps at most that many pairs of each
/// kind, drawn without replacement from a generator seeded by `seed`. The
/// surviving pairs keep their enumeration order.
pub fn generate_eval_pairs(
    catalog: &SignatureCatalog,
    split: Split,
    per_writer_cap: Option<usize>,
    seed: u64,
) -> Result<Vec<EvalPair>> {
    let writers = catalog.writers_in(split);
    if writers.is_empty() {
        return Err(Error::Dataset(format!("the {split} split has no writers")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for w in writers {
        let sigs = &catalog.writers()[w];
        if sigs.genuine.len() < 2 {
            log::warn!("writer {w} has {} genuine signatures and contributes no genuine pairs", sigs.genuine.len());
        }
        let mut genuine = Vec::new();
        for (i, &a) in sigs.genuine.iter().enumerate() {
            for &b in &sigs.genuine[i + 1..] {
                genuine.push(EvalPair {
                    first: a,
                    second: b,
                    label: PairLabel::Genuine,
                });
            }
        }
        let forged = sigs
            .genuine
            .iter()
            .flat_map(|&a| {
                sigs.forged.iter().map(move |&b| EvalPair {
                    first: a,
                    second: b,
                    label: PairLabel::Forgery,
                })
            })
            .collect();
        out.extend(cap(genuine, per_writer_cap, &mut rng));
        out.extend(cap(forged, per_writer_cap, &mut rng));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::dataset::catalog::{writer_disjoint_split, ImageSource, Label, Layout, Provenance, SignatureRecord};
    use crate::tensor::Tensor;

    fn catalog(counts: &[(usize, usize)]) -> SignatureCatalog {
        let px = Arc::new(Tensor::<f32>::zeros(&[1, 1]).unwrap());
        let mut records = Vec::new();
        for (w, &(g, f)) in counts.iter().enumerate() {
            for (label, n) in [(Label::Genuine, g), (Label::Forged, f)] {
                for k in 0..n {
                    records.push(SignatureRecord {
                        id: format!("{w}-{label}-{k}"),
                        writer_id: format!("{w:03}"),
                        label,
                        source: ImageSource::Memory(px.clone()),
                    });
                }
            }
        }
        SignatureCatalog::from_records(
            records,
            Provenance {
                dataset: "test".into(),
                layout: Layout::Synthetic,
                layout_version: 1,
            },
        )
        .unwrap()
    }

    fn count(pairs: &[EvalPair], label: PairLabel) -> usize {
        pairs.iter().filter(|p| p.label == label).count()
    }

    #[test]
    fn closed_form_counts() {
        let pairs = generate_eval_pairs(&catalog(&[(24, 24)]), Split::Test, None, 0).unwrap();
        assert_eq!(count(&pairs, PairLabel::Genuine), 276);
        assert_eq!(count(&pairs, PairLabel::Forgery), 576);

        let pairs = generate_eval_pairs(&catalog(&[(1, 5)]), Split::Test, None, 0).unwrap();
        assert_eq!(count(&pairs, PairLabel::Genuine), 0);
        assert_eq!(count(&pairs, PairLabel::Forgery), 5);
    }

    #[test]
    fn capped_generation_is_deterministic() {
        let c = catalog(&[(24, 24), (6, 3)]);
        let a = generate_eval_pairs(&c, Split::Test, Some(10), 9).unwrap();
        assert_eq!(a, generate_eval_pairs(&c, Split::Test, Some(10), 9).unwrap());
        // 10 + 10 for the big writer, 10 + 10 capped from 15 and 18
        assert_eq!(a.len(), 40);
        assert_ne!(a, generate_eval_pairs(&c, Split::Test, Some(10), 10).unwrap());
    }

    #[test]
    fn empty_split_is_an_error() {
        let c = catalog(&[(3, 3)]);
        assert!(generate_eval_pairs(&c, Split::Train, None, 0).is_err());
    }

    proptest! {
        #[test]
        fn pairs_respect_invariants(
            counts in prop::collection::vec((0usize..6, 0usize..6), 2..7),
            train in 1usize..6,
            seed in any::<u64>(),
            limit in prop::option::of(1usize..8),
        ) {
            let counts: Vec<_> = counts.into_iter().map(|(g, f)| (g + 1, f)).collect();
            let c = catalog(&counts);
            let train = train.min(c.writers().len() - 1);
            let c = writer_disjoint_split(c, train, seed).unwrap();
            let test: BTreeMap<_, _> = c.split().iter().filter(|(_, s)| **s == Split::Test).collect();
            let pairs = generate_eval_pairs(&c, Split::Test, limit, seed).unwrap();
            for p in &pairs {
                let (a, b) = (c.record(p.first), c.record(p.second));
                prop_assert!(test.contains_key(&a.writer_id));
                prop_assert_eq!(&a.writer_id, &b.writer_id);
                prop_assert_eq!(a.label, Label::Genuine);
                match p.label {
                    PairLabel::Genuine => {
                        prop_assert_eq!(b.label, Label::Genuine);
                        prop_assert_ne!(p.first, p.second);
                    }
                    PairLabel::Forgery => prop_assert_eq!(b.label, Label::Forged),
                }
            }
            if limit.is_none() {
                let want: usize = test
                    .keys()
                    .map(|w| {
                        let s = &c.writers()[w.as_str()];
                        s.genuine.len() * (s.genuine.len() - 1) / 2 + s.genuine.len() * s.forged.len()
                    })
                    .sum();
                prop_assert_eq!(pairs.len(), want);
            }
        }
    }
}
