//! Ranking metrics, evaluation protocols and significance testing.

pub mod metrics;
pub mod protocol;
pub mod significance;

use serde::{Deserialize, Serialize};

pub use metrics::{metrics_at_k, ndcg_at_k, RankMetrics};
pub use protocol::{
    evaluate, missing_modality_sweep, write_sweep_csv, EvalContext, EvalReport, SweepEntry,
    UserMetrics,
};
pub use significance::{paired_t_test, PairedTTest};

use crate::{Error, Result};

/// One cell of the significance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub test: PairedTTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub metric: String,
    pub n_comparisons: usize,
    pub comparisons: Vec<Comparison>,
}

/// Paired t-tests on per-user nDCG for every unordered pair of named
/// reports, Bonferroni-corrected by the number of pairs. A single report is
/// compared with itself. All reports must cover the same users.
pub fn compare_reports(reports: &[(String, EvalReport)]) -> Result<SignificanceReport> {
    if reports.is_empty() {
        return Err(Error::invalid("no reports to compare"));
    }
    let users = |r: &EvalReport| r.per_user.iter().map(|m| m.user).collect::<Vec<_>>();
    let first = users(&reports[0].1);
    for (name, r) in reports {
        if users(r) != first {
            return Err(Error::invalid(format!(
                "report '{name}' covers different users than '{}'",
                reports[0].0
            )));
        }
    }
    let mut pairs = Vec::new();
    if reports.len() == 1 {
        pairs.push((0, 0));
    }
    for i in 0..reports.len() {
        for j in i + 1..reports.len() {
            pairs.push((i, j));
        }
    }
    let ndcg = |r: &EvalReport| r.per_user.iter().map(|m| m.ndcg).collect::<Vec<_>>();
    let n_comparisons = pairs.len();
    let comparisons = pairs
        .into_iter()
        .map(|(i, j)| {
            Ok(Comparison {
                a: reports[i].0.clone(),
                b: reports[j].0.clone(),
                test: paired_t_test(&ndcg(&reports[i].1), &ndcg(&reports[j].1), n_comparisons)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SignificanceReport {
        metric: "ndcg".into(),
        n_comparisons,
        comparisons,
    })
}
