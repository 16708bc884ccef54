use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::InstanceTable;
use crate::error::{Error, Result};

pub const DEFAULT_RATIOS: [f64; 3] = [0.6, 0.2, 0.2];

/// Seeded row-level shuffle followed by contiguous cuts of
/// `⌊r₀·N⌋`, `⌊r₁·N⌋` and the remainder.
pub fn split(
    table: &InstanceTable,
    ratios: [f64; 3],
    seed: u64,
) -> Result<(InstanceTable, InstanceTable, InstanceTable)> {
    let n = table.len();
    if n < 3 {
        return Err(Error::TooFewRows(n));
    }
    if ratios.iter().any(|&r| !(r > 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "split ratios {ratios:?} must be positive and sum to 1"
        )));
    }
    // The small slack keeps e.g. 0.6 * 10 from flooring to 5 on representation error.
    let cut = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
    let n_train = cut(ratios[0]);
    let n_val = cut(ratios[1]).min(n - n_train);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, rest) = order.split_at(n_train);
    let (val, test) = rest.split_at(n_val);
    Ok((table.subset(train), table.subset(val), table.subset(test)))
}
