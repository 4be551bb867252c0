//! Deterministic, split-restricted reference sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::manifest::Manifest;
use crate::error::{Error, Result};

/// RNG stream for one foreground, derived from the manifest seed and the
/// foreground's identity so that every foreground replays independently.
pub fn foreground_rng(seed: u64, image_id: &str, fg_index: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((image_id.len() as u64).to_le_bytes());
    h.update(image_id.as_bytes());
    h.update((fg_index as u64).to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Ids eligible as references for `image_id`: active images in the same
/// split, excluding the image itself, sorted by id.
pub fn reference_pool<'a>(manifest: &'a Manifest, image_id: &str) -> Result<Vec<&'a str>> {
    let rec = manifest.record(image_id)?;
    let mut pool: Vec<&str> = manifest
        .active()
        .filter(|r| r.split == rec.split && r.id != image_id)
        .map(|r| r.id.as_str())
        .collect();
    pool.sort_unstable();
    Ok(pool)
}

/// Draws `references_per_foreground` distinct reference ids without replacement.
pub fn select_references(manifest: &Manifest, image_id: &str, fg_index: usize) -> Result<Vec<String>> {
    let rec = manifest.record(image_id)?;
    if fg_index >= rec.masks.len() {
        return Err(Error::UnknownForeground {
            image_id: image_id.to_string(),
            fg_index,
        });
    }
    let pool = reference_pool(manifest, image_id)?;
    let k = manifest.references_per_foreground;
    if pool.len() < k {
        return Err(Error::InsufficientPool {
            image_id: image_id.to_string(),
            available: pool.len(),
            required: k,
        });
    }
    let mut rng = foreground_rng(manifest.seed, image_id, fg_index);
    Ok(rand::seq::index::sample(&mut rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i].to_string())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::manifest::{ExclusionFlag, ImageRecord, Split};
    use std::collections::HashSet;

    fn manifest(n_train: usize, n_test: usize, k: usize, seed: u64) -> Manifest {
        let mut m = Manifest::new(seed);
        m.references_per_foreground = k;
        for i in 0..n_train + n_test {
            m.images.push(ImageRecord {
                id: format!("img{i:03}"),
                path: format!("img{i:03}.png").into(),
                masks: vec!["m0.png".into(), "m1.png".into()],
                split: if i < n_train { Split::Train } else { Split::Test },
                corners: None,
                exclude: vec![],
                reason: None,
            });
        }
        m
    }

    #[test]
    fn forced_pool_returns_everyone_else() {
        for seed in [0, 1, 99] {
            let m = manifest(11, 0, 10, seed);
            let refs: HashSet<String> = select_references(&m, "img004", 0).unwrap().into_iter().collect();
            let want: HashSet<String> = (0..11).filter(|&i| i != 4).map(|i| format!("img{i:03}")).collect();
            assert_eq!(refs, want);
        }
    }

    #[test]
    fn replay_is_deterministic() {
        let m = manifest(50, 0, 10, 7);
        assert_eq!(
            select_references(&m, "img010", 1).unwrap(),
            select_references(&m, "img010", 1).unwrap()
        );
        assert_ne!(
            select_references(&m, "img010", 0).unwrap(),
            select_references(&m, "img010", 1).unwrap()
        );
    }

    #[test]
    fn seed_change_alters_lists() {
        let a = manifest(50, 0, 10, 1);
        let b = manifest(50, 0, 10, 2);
        let differing = (0..20)
            .filter(|i| {
                let id = format!("img{i:03}");
                select_references(&a, &id, 0).unwrap() != select_references(&b, &id, 0).unwrap()
            })
            .count();
        assert!(differing >= 1);
    }

    #[test]
    fn pool_respects_split_and_exclusions() {
        let mut m = manifest(6, 6, 5, 3);
        m.images[7].exclude.push(ExclusionFlag::Duplicate);
        let refs = select_references(&m, "img000", 0).unwrap();
        assert!(refs.iter().all(|r| r.as_str() < "img006" && r != "img000"));
        let distinct: HashSet<_> = refs.iter().collect();
        assert_eq!(distinct.len(), 5);
        assert!(matches!(
            select_references(&m, "img006", 0),
            Err(Error::InsufficientPool { available: 4, required: 5, .. })
        ));
        assert!(matches!(
            select_references(&m, "img000", 2),
            Err(Error::UnknownForeground { .. })
        ));
    }
}
