//! Uniform negative sampling.

use crate::data::InteractionMatrix;
use crate::numerics::SeededRng;
use crate::{Error, Result};

/// `n_neg` distinct items drawn uniformly from all items, excluding the
/// user's training positives.
pub fn sample_negatives(
    train: &InteractionMatrix,
    user: usize,
    n_neg: usize,
    rng: &mut SeededRng,
) -> Result<Vec<usize>> {
    if user >= train.n_users() {
        return Err(Error::invalid(format!("user {user} out of range")));
    }
    let pool: Vec<usize> = (0..train.n_items()).collect();
    sample_negatives_from(&pool, train.row(user), n_neg, rng)
}

/// `n_neg` distinct entries of the sorted `pool` that are not in the sorted
/// `positives`, uniformly at random, in draw order.
///
/// Small eligible sets are sampled by partial Fisher-Yates over the explicit
/// list; large ones by rejection.
pub fn sample_negatives_from(
    pool: &[usize],
    positives: &[usize],
    n_neg: usize,
    rng: &mut SeededRng,
) -> Result<Vec<usize>> {
    let excluded = pool
        .iter()
        .filter(|p| positives.binary_search(p).is_ok())
        .count();
    let eligible = pool.len() - excluded;
    if eligible < n_neg {
        return Err(Error::invalid(format!(
            "only {eligible} negatives available, {n_neg} requested"
        )));
    }
    if n_neg * 4 >= eligible {
        let mut list: Vec<usize> = pool
            .iter()
            .copied()
            .filter(|p| positives.binary_search(p).is_err())
            .collect();
        rng.partial_shuffle(&mut list, n_neg);
        list.truncate(n_neg);
        return Ok(list);
    }
    let mut out = Vec::with_capacity(n_neg);
    while out.len() < n_neg {
        let c = pool[rng.below(pool.len())];
        if positives.binary_search(&c).is_err() && !out.contains(&c) {
            out.push(c);
        }
    }
    Ok(out)
}
