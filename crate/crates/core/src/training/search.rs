//! Seeded random search over configurations and modality subsets.
//!
//! Trial `t` draws its configuration from stream `t` of the search seed and
//! trains with seed `derive_seed(search_seed, t)`, so any trial can be
//! re-created on its own and an interrupted search resumes from the saved
//! leaderboard.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::TrainConfig;
use super::fit::{fit_config, FitOutcome};
use crate::data::io::{read_json, write_json};
use crate::data::{FeatureStore, SplitBundle};
use crate::numerics::{derive_seed, SeededRng};
use crate::{Error, Result};

/// A hyperparameter domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Choice(Vec<Value>),
    Uniform([f64; 2]),
    LogUniform([f64; 2]),
    /// Inclusive integer range.
    Int([i64; 2]),
}

impl Domain {
    fn validate(&self, name: &str) -> Result<()> {
        let bad = match self {
            Domain::Choice(v) => v.is_empty(),
            Domain::Uniform([a, b]) => !(a.is_finite() && b.is_finite() && a <= b),
            Domain::LogUniform([a, b]) => !(*a > 0.0 && b.is_finite() && a <= b),
            Domain::Int([a, b]) => a > b,
        };
        if bad {
            return Err(Error::invalid(format!("empty or invalid domain for '{name}'")));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut SeededRng) -> Value {
        match self {
            Domain::Choice(v) => v[rng.below(v.len())].clone(),
            Domain::Uniform([a, b]) => Value::from(rng.uniform_range(*a, *b)),
            Domain::LogUniform([a, b]) => Value::from(rng.uniform_range(a.ln(), b.ln()).exp()),
            Domain::Int([a, b]) => Value::from(a + rng.below((b - a + 1) as usize) as i64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModalityPolicy {
    One,
    #[default]
    OneOrMore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    /// Fixed settings every trial starts from.
    #[serde(default)]
    pub base: TrainConfig,
    /// Domains keyed by [`TrainConfig`] field name.
    #[serde(default)]
    pub params: BTreeMap<String, Domain>,
    /// Candidate training modalities; empty keeps `base.training_modalities`.
    #[serde(default)]
    pub modalities: Vec<String>,
    #[serde(default)]
    pub policy: ModalityPolicy,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        for (name, d) in &self.params {
            d.validate(name)?;
        }
        if self.modalities.len() > 20 {
            return Err(Error::invalid("too many candidate modalities"));
        }
        Ok(())
    }

    /// Every modality subset the policy allows, in mask order.
    pub fn modality_subsets(&self) -> Vec<Vec<String>> {
        let mut mods = self.modalities.clone();
        mods.sort();
        mods.dedup();
        match self.policy {
            ModalityPolicy::One => mods.into_iter().map(|m| vec![m]).collect(),
            ModalityPolicy::OneOrMore => (1u64..(1u64 << mods.len()))
                .map(|mask| {
                    mods.iter()
                        .enumerate()
                        .filter(|(j, _)| mask >> j & 1 == 1)
                        .map(|(_, m)| m.clone())
                        .collect()
                })
                .collect(),
        }
    }

    /// Configuration of trial `trial` under `search_seed`.
    pub fn sample(&self, search_seed: u64, trial: usize) -> Result<TrainConfig> {
        let mut rng = SeededRng::derived(search_seed, trial as u64);
        let mut json = serde_json::to_value(&self.base).expect("config serialises");
        let obj = json.as_object_mut().expect("config is an object");
        for (name, d) in &self.params {
            if !obj.contains_key(name) {
                return Err(Error::invalid(format!("'{name}' is not a configuration field")));
            }
            obj.insert(name.clone(), d.sample(&mut rng));
        }
        let subsets = self.modality_subsets();
        if !subsets.is_empty() {
            let pick = subsets[rng.below(subsets.len())].clone();
            obj.insert("training_modalities".into(), Value::from(pick));
        }
        obj.insert("seed".into(), Value::from(derive_seed(search_seed, trial as u64)));
        let cfg: TrainConfig = serde_json::from_value(json)
            .map_err(|e| Error::invalid(format!("sampled configuration is invalid: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub trial: usize,
    pub fingerprint: String,
    pub val_ndcg: f64,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub config: TrainConfig,
}

/// Sorts by validation nDCG descending, ties by fingerprint.
pub fn sort_leaderboard(entries: &mut [LeaderboardEntry]) {
    entries.sort_by(|a, b| {
        b.val_ndcg
            .total_cmp(&a.val_ndcg)
            .then_with(|| a.fingerprint.cmp(&b.fingerprint))
    });
}

pub fn write_leaderboard_csv(path: impl AsRef<Path>, entries: &[LeaderboardEntry]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::from("rank,trial,fingerprint,val_ndcg,best_epoch,stopped_epoch,modalities\n");
    for (r, e) in entries.iter().enumerate() {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r + 1,
            e.trial,
            e.fingerprint,
            e.val_ndcg,
            e.best_epoch,
            e.stopped_epoch,
            e.config.training_modalities.join("+")
        ));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub struct SearchResult {
    pub best: TrainConfig,
    /// The best configuration refit from scratch.
    pub fit: FitOutcome,
    pub leaderboard: Vec<LeaderboardEntry>,
}

/// Runs `budget` trials. With `state_dir`, `leaderboard.json` there is read
/// first (finished trials are skipped) and rewritten after every trial, along
/// with `leaderboard.csv`.
pub fn random_search(
    space: &SearchSpace,
    budget: usize,
    bundle: &SplitBundle,
    features: &FeatureStore,
    seed: u64,
    state_dir: Option<&Path>,
) -> Result<SearchResult> {
    if budget < 1 {
        return Err(Error::invalid("budget must be at least 1"));
    }
    space.validate()?;
    let json_path = state_dir.map(|d| d.join("leaderboard.json"));
    let mut board: Vec<LeaderboardEntry> = match &json_path {
        Some(p) if p.exists() => read_json(p)?,
        _ => Vec::new(),
    };
    board.retain(|e| e.trial < budget);
    for trial in 0..budget {
        let cfg = space.sample(seed, trial)?;
        let fp = cfg.fingerprint();
        if let Some(done) = board.iter().find(|e| e.trial == trial) {
            if done.fingerprint != fp {
                return Err(Error::Fingerprint {
                    what: format!("search trial {trial}"),
                    expected: fp,
                    found: done.fingerprint.clone(),
                });
            }
            continue;
        }
        let out = fit_config(bundle, features, &cfg)?;
        board.push(LeaderboardEntry {
            trial,
            fingerprint: fp,
            val_ndcg: out.best_val_ndcg,
            best_epoch: out.best_epoch,
            stopped_epoch: out.stopped_epoch,
            config: cfg,
        });
        sort_leaderboard(&mut board);
        if let (Some(dir), Some(p)) = (state_dir, &json_path) {
            write_json(p, &board)?;
            write_leaderboard_csv(dir.join("leaderboard.csv"), &board)?;
        }
    }
    sort_leaderboard(&mut board);
    let best = board[0].config.clone();
    let fit = fit_config(bundle, features, &best)?;
    Ok(SearchResult {
        best,
        fit,
        leaderboard: board,
    })
}
