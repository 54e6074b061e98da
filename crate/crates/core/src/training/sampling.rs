use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{SignatureCatalog, Split};
use crate::error::{Error, Result};

/// Record indices into a catalog.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Anchors that can take part in a triplet: genuine signatures of writers
/// in `split` with at least one other genuine signature.
pub fn eligible_anchors(catalog: &SignatureCatalog, split: Split) -> Vec<usize> {
    catalog
        .writers_in(split)
        .into_iter()
        .map(|w| &catalog.writers()[w])
        .filter(|s| s.genuine.len() >= 2)
        .flat_map(|s| s.genuine.iter().copied())
        .collect()
}

/// Draws `count` triplets from the writers of `split`.
///
/// The anchor is a uniformly drawn eligible genuine signature and the
/// positive another genuine signature of the same writer. With probability
/// `negative_mix` the negative is a forgery of the anchor's writer, otherwise
/// a genuine signature of another writer in the split. When only one kind of
/// negative exists for a writer, that kind is used.
pub fn sample_triplets(
    catalog: &SignatureCatalog,
    split: Split,
    count: usize,
    negative_mix: f64,
    seed: u64,
) -> Result<Vec<Triplet>> {
    if !(0.0..=1.0).contains(&negative_mix) {
        return Err(Error::Config(format!("negative_mix must lie in [0, 1], got {negative_mix}")));
    }
    let writers = catalog.writers_in(split);
    for w in &writers {
        if catalog.writers()[*w].genuine.len() < 2 {
            log::warn!("writer {w} has fewer than 2 genuine signatures and is skipped for triplets");
        }
    }
    let anchors = eligible_anchors(catalog, split);
    if anchors.is_empty() {
        return Err(Error::Training(format!(
            "no writer in the {split} split has two genuine signatures"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let anchor = *anchors.choose(&mut rng).expect("non-empty");
        let writer = &catalog.record(anchor).writer_id;
        let own = &catalog.writers()[writer];
        let positive = loop {
            let p = *own.genuine.choose(&mut rng).expect("two genuine");
            if p != anchor {
                break p;
            }
        };
        let others: Vec<&str> = writers
            .iter()
            .copied()
            .filter(|w| *w != writer && !catalog.writers()[*w].genuine.is_empty())
            .collect();
        let want_forgery = rng.random_bool(negative_mix);
        let use_forgery = match (own.forged.is_empty(), others.is_empty()) {
            (true, true) => {
                return Err(Error::Training(format!(
                    "writer {writer} has no forgeries and no other writer shares its split"
                )))
            }
            (true, false) => false,
            (false, true) => true,
            (false, false) => want_forgery,
        };
        let negative = if use_forgery {
            *own.forged.choose(&mut rng).expect("non-empty")
        } else {
            let other = others.choose(&mut rng).expect("non-empty");
            *catalog.writers()[*other].genuine.choose(&mut rng).expect("non-empty")
        };
        out.push(Triplet {
            anchor,
            positive,
            negative,
        });
    }
    Ok(out)
}
