use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatasetError, DatasetSplit, PredictionWindow};

/// Splits windows by target track so no track contributes to both sides.
/// The result depends only on the set of track keys, the ratio and the seed.
pub fn split_dataset(
    windows: &[PredictionWindow],
    test_ratio: f64,
    seed: u64,
) -> Result<DatasetSplit, DatasetError> {
    if !(test_ratio > 0.0 && test_ratio < 1.0) {
        return Err(DatasetError::BadRatio(test_ratio));
    }
    let keys: BTreeSet<(&str, u64)> =
        windows.iter().map(|w| (w.scene_id.as_str(), w.target_track_id)).collect();
    if keys.len() < 2 {
        return Err(DatasetError::TooFewTracks(keys.len()));
    }
    let mut keys: Vec<_> = keys.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    keys.shuffle(&mut rng);
    let n_test = ((keys.len() as f64 * test_ratio).round() as usize).clamp(1, keys.len() - 1);
    let test_keys: BTreeSet<_> = keys[..n_test].iter().copied().collect();

    let (test, train): (Vec<_>, Vec<_>) = windows
        .iter()
        .cloned()
        .partition(|w| test_keys.contains(&(w.scene_id.as_str(), w.target_track_id)));
    Ok(DatasetSplit { train, test, seed })
}
