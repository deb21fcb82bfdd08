//! Binary-relevance ranking metrics at a cutoff.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RankMetrics {
    pub ndcg: f64,
    pub precision: f64,
    pub recall: f64,
    pub ap: f64,
}

fn check_k(k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::invalid("cutoff k must be at least 1"));
    }
    Ok(())
}

/// Discount of the 1-based `rank`.
fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

/// nDCG@k of a duplicate-free ranking against a sorted relevant set.
pub fn ndcg_at_k(ranked: &[usize], relevant: &[usize], k: usize) -> Result<f64> {
    Ok(metrics_at_k(ranked, relevant, k)?.ndcg)
}

/// nDCG, precision, recall and average precision at `k`; `relevant` sorted.
/// Average precision is normalised by `min(|relevant|, k)`. Everything is
/// zero when `relevant` is empty.
pub fn metrics_at_k(ranked: &[usize], relevant: &[usize], k: usize) -> Result<RankMetrics> {
    check_k(k)?;
    if relevant.is_empty() {
        return Ok(RankMetrics::default());
    }
    let mut hits = 0usize;
    let mut dcg = 0.0;
    let mut ap = 0.0;
    for (pos, item) in ranked.iter().take(k).enumerate() {
        if relevant.binary_search(item).is_ok() {
            hits += 1;
            dcg += discount(pos + 1);
            ap += hits as f64 / (pos + 1) as f64;
        }
    }
    let ideal_hits = relevant.len().min(k);
    let idcg: f64 = (1..=ideal_hits).map(discount).sum();
    Ok(RankMetrics {
        ndcg: dcg / idcg,
        precision: hits as f64 / k as f64,
        recall: hits as f64 / relevant.len() as f64,
        ap: ap / ideal_hits as f64,
    })
}
