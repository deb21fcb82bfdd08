//! Split-aware evaluation, missing-modality sweeps and report files.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{metrics_at_k, RankMetrics};
use crate::data::io::write_json;
use crate::data::{FeatureStore, IdMap, InteractionMatrix, Side, SplitKind};
use crate::model::{recommend_top_k, Scorer, SiBraR};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserMetrics {
    pub user: usize,
    pub ndcg: f64,
    pub precision: f64,
    pub recall: f64,
    pub ap: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalContext {
    pub split: Option<SplitKind>,
    pub partition: Option<String>,
    pub modalities: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub model_fingerprint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub n_users: usize,
    pub n_candidates: usize,
    /// Unweighted means over evaluated users.
    pub aggregates: RankMetrics,
    pub coverage: f64,
    pub context: EvalContext,
    pub per_user: Vec<UserMetrics>,
}

impl EvalReport {
    pub fn ndcg(&self) -> f64 {
        self.aggregates.ndcg
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }

    /// One row per user: `user,ndcg,precision,recall,ap`, with external ids
    /// when `users` is given.
    pub fn write_csv(&self, path: impl AsRef<Path>, users: Option<&IdMap>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("user,ndcg,precision,recall,ap\n");
        for m in &self.per_user {
            let id = match users {
                Some(map) => map.id(m.user).to_string(),
                None => m.user.to_string(),
            };
            out.push_str(&format!(
                "{id},{},{},{},{}\n",
                m.ndcg, m.precision, m.recall, m.ap
            ));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Ranks, for every user with interactions in `eval`, the items that have
/// interactions in `eval`; the user's `train` positives are excluded in the
/// warm protocol only.
pub fn evaluate<S: Scorer + ?Sized>(
    scorer: &S,
    train: &InteractionMatrix,
    eval: &InteractionMatrix,
    kind: SplitKind,
    k: usize,
    context: EvalContext,
) -> Result<EvalReport> {
    if k < 1 {
        return Err(Error::invalid("cutoff k must be at least 1"));
    }
    if eval.is_empty() {
        return Err(Error::invalid("evaluation matrix is empty"));
    }
    if scorer.n_users() != eval.n_users() || scorer.n_items() != eval.n_items() {
        return Err(Error::invalid(format!(
            "scorer covers {}x{} entities, evaluation matrix is {}x{}",
            scorer.n_users(),
            scorer.n_items(),
            eval.n_users(),
            eval.n_items()
        )));
    }
    let candidates = eval.active(Side::Item);
    let users = eval.active(Side::User);
    let results: Vec<Result<(UserMetrics, Vec<usize>)>> = users
        .par_iter()
        .map(|&u| {
            let exclude: &[usize] = match kind {
                SplitKind::Warm => train.row(u),
                _ => &[],
            };
            let ranked = recommend_top_k(scorer, u, &candidates, exclude, k);
            let m = metrics_at_k(&ranked, eval.row(u), k)?;
            Ok((
                UserMetrics {
                    user: u,
                    ndcg: m.ndcg,
                    precision: m.precision,
                    recall: m.recall,
                    ap: m.ap,
                },
                ranked,
            ))
        })
        .collect();

    let mut per_user = Vec::with_capacity(users.len());
    let mut recommended = vec![false; eval.n_items()];
    let mut sums = RankMetrics::default();
    for r in results {
        let (m, ranked) = r?;
        for i in ranked {
            recommended[i] = true;
        }
        sums.ndcg += m.ndcg;
        sums.precision += m.precision;
        sums.recall += m.recall;
        sums.ap += m.ap;
        per_user.push(m);
    }
    let n = per_user.len() as f64;
    Ok(EvalReport {
        k,
        n_users: per_user.len(),
        n_candidates: candidates.len(),
        aggregates: RankMetrics {
            ndcg: sums.ndcg / n,
            precision: sums.precision / n,
            recall: sums.recall / n,
            ap: sums.ap / n,
        },
        coverage: recommended.iter().filter(|&&b| b).count() as f64 / candidates.len() as f64,
        context: EvalContext {
            split: Some(kind),
            ..context
        },
        per_user,
    })
}

/// One row of a missing-modality sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub modalities: Vec<String>,
    /// Bit `j` set when the `j`-th training modality (sorted) is used.
    pub mask: u64,
    pub report: EvalReport,
}

/// Evaluates `model` once per non-empty subset of its training modalities,
/// sorted by nDCG descending (ties by mask). Entities with none of a subset's
/// modalities get a zero embedding for that run.
pub fn missing_modality_sweep(
    model: &SiBraR,
    train: &InteractionMatrix,
    eval: &InteractionMatrix,
    features: &FeatureStore,
    kind: SplitKind,
    k: usize,
    context: EvalContext,
) -> Result<Vec<SweepEntry>> {
    let mods = &model.modalities;
    if mods.len() > 20 {
        return Err(Error::invalid(format!(
            "{} training modalities give too many subsets to sweep",
            mods.len()
        )));
    }
    let mut out = Vec::new();
    for mask in 1u64..(1u64 << mods.len()) {
        let subset: Vec<String> = mods
            .iter()
            .enumerate()
            .filter(|(j, _)| mask >> j & 1 == 1)
            .map(|(_, m)| m.clone())
            .collect();
        let scorer = model.scorer(train, features, Some(&subset))?;
        let ctx = EvalContext {
            modalities: Some(subset.clone()),
            ..context.clone()
        };
        let report = evaluate(&scorer, train, eval, kind, k, ctx)?;
        out.push(SweepEntry {
            modalities: subset,
            mask,
            report,
        });
    }
    out.sort_by(|a, b| b.report.ndcg().total_cmp(&a.report.ndcg()).then(a.mask.cmp(&b.mask)));
    Ok(out)
}

/// `mask,modalities,ndcg,precision,recall,ap,coverage`, modalities joined by `+`.
pub fn write_sweep_csv(path: impl AsRef<Path>, entries: &[SweepEntry]) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::from("mask,modalities,ndcg,precision,recall,ap,coverage\n");
    for e in entries {
        let a = &e.report.aggregates;
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.mask,
            e.modalities.join("+"),
            a.ndcg,
            a.precision,
            a.recall,
            a.ap,
            e.report.coverage
        ));
    }
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Popularity;

    #[test]
    fn popular_test_item_ranks_first() {
        // item 0 is the most popular in train; user 2's only test item is 0
        let train = InteractionMatrix::from_pairs(
            3,
            4,
            [(0, 0), (1, 0), (0, 1), (1, 2), (2, 3)],
        )
        .unwrap();
        let test = InteractionMatrix::from_pairs(3, 4, [(2, 0), (0, 3), (1, 1)]).unwrap();
        let pop = Popularity::fit(&train);
        let r = evaluate(&pop, &train, &test, SplitKind::Warm, 10, EvalContext::default()).unwrap();
        let u2 = r.per_user.iter().find(|m| m.user == 2).unwrap();
        assert_eq!(u2.ndcg, 1.0);
        assert!(r.coverage <= 1.0);
        assert_eq!(r.n_users, 3);
    }

    #[test]
    fn empty_evaluation_is_an_error() {
        let train = InteractionMatrix::from_pairs(1, 2, [(0, 0)]).unwrap();
        let test = InteractionMatrix::empty(1, 2);
        let pop = Popularity::fit(&train);
        assert!(evaluate(&pop, &train, &test, SplitKind::Warm, 10, EvalContext::default()).is_err());
    }
}
