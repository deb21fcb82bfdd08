//! Warm, user-cold and item-cold train/validation/test protocols.

use serde::{Deserialize, Serialize};

use super::interactions::{InteractionMatrix, Side};
use crate::numerics::SeededRng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    Warm,
    UserCold,
    ItemCold,
}

impl SplitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::Warm => "warm",
            SplitKind::UserCold => "user_cold",
            SplitKind::ItemCold => "item_cold",
        }
    }

    pub fn cold_side(self) -> Option<Side> {
        match self {
            SplitKind::Warm => None,
            SplitKind::UserCold => Some(Side::User),
            SplitKind::ItemCold => Some(Side::Item),
        }
    }
}

impl std::str::FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "warm" => Ok(SplitKind::Warm),
            "user_cold" => Ok(SplitKind::UserCold),
            "item_cold" => Ok(SplitKind::ItemCold),
            other => Err(Error::invalid(format!("unknown split kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Valid,
    Test,
}

impl std::str::FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "valid" => Ok(Partition::Valid),
            "test" => Ok(Partition::Test),
            other => Err(Error::invalid(format!("unknown partition '{other}'"))),
        }
    }
}

/// Train / validation / test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for Ratios {
    fn default() -> Self {
        Self {
            train: 0.8,
            valid: 0.1,
            test: 0.1,
        }
    }
}

impl Ratios {
    pub fn new(train: f64, valid: f64, test: f64) -> Result<Self> {
        let r = Self { train, valid, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.valid, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid(format!("ratios must be non-negative: {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("ratios must sum to 1: {parts:?}")));
        }
        Ok(())
    }

    /// `(n_valid, n_test)` for a group of `n`: `max(1, round(ratio * n))` each.
    fn held_out_counts(&self, n: usize) -> (usize, usize) {
        let count = |ratio: f64| ((ratio * n as f64).round() as usize).max(1);
        (count(self.valid), count(self.test))
    }
}

impl std::str::FromStr for Ratios {
    type Err = Error;

    /// `"0.8,0.1,0.1"`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad ratio '{p}'")))
            })
            .collect::<Result<_>>()?;
        match parts.as_slice() {
            [a, b, c] => Ratios::new(*a, *b, *c),
            _ => Err(Error::invalid(format!("expected three ratios, got '{s}'"))),
        }
    }
}

/// Train/validation/test matrices over one shared entity index space.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitBundle {
    pub kind: SplitKind,
    pub train: InteractionMatrix,
    pub valid: InteractionMatrix,
    pub test: InteractionMatrix,
    pub ratios: Ratios,
    pub seed: u64,
}

impl SplitBundle {
    pub fn partition(&self, which: Partition) -> &InteractionMatrix {
        match which {
            Partition::Valid => &self.valid,
            Partition::Test => &self.test,
        }
    }

    pub fn n_users(&self) -> usize {
        self.train.n_users()
    }

    pub fn n_items(&self) -> usize {
        self.train.n_items()
    }
}

/// Per-user random partition of interactions.
///
/// Each user's items are shuffled; the first `max(1, round(test * n))` go to
/// test, the next `max(1, round(valid * n))` to validation, the rest to train.
pub fn split_warm(r: &InteractionMatrix, ratios: Ratios, seed: u64) -> Result<SplitBundle> {
    ratios.validate()?;
    let mut rng = SeededRng::new(seed);
    let (mut train, mut valid, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for u in 0..r.n_users() {
        let n = r.row(u).len();
        if n < 3 {
            return Err(Error::invalid(format!(
                "user {u} has {n} interactions; warm split needs at least 3"
            )));
        }
        let (n_valid, n_test) = ratios.held_out_counts(n);
        if n_valid + n_test >= n {
            return Err(Error::invalid(format!(
                "user {u}: {n} interactions leave no training data at ratios {ratios:?}"
            )));
        }
        let mut items = r.row(u).to_vec();
        rng.shuffle(&mut items);
        for (pos, &i) in items.iter().enumerate() {
            if pos < n_test {
                test.push((u, i));
            } else if pos < n_test + n_valid {
                valid.push((u, i));
            } else {
                train.push((u, i));
            }
        }
    }
    let (nu, ni) = (r.n_users(), r.n_items());
    Ok(SplitBundle {
        kind: SplitKind::Warm,
        train: InteractionMatrix::from_pairs(nu, ni, train)?,
        valid: InteractionMatrix::from_pairs(nu, ni, valid)?,
        test: InteractionMatrix::from_pairs(nu, ni, test)?,
        ratios,
        seed,
    })
}

/// Partition of the entities on `side` into disjoint train/validation/test
/// groups; every interaction follows its entity.
///
/// Entities with at least one interaction are shuffled; the first
/// `max(1, round(test * n))` are test, the next `max(1, round(valid * n))`
/// validation, the rest train.
pub fn split_cold(
    r: &InteractionMatrix,
    side: Side,
    ratios: Ratios,
    seed: u64,
) -> Result<SplitBundle> {
    ratios.validate()?;
    let mut entities = r.active(side);
    let n = entities.len();
    if n < 10 {
        return Err(Error::invalid(format!(
            "cold split needs at least 10 {}s with interactions, found {n}",
            side.as_str()
        )));
    }
    let (n_valid, n_test) = ratios.held_out_counts(n);
    if n_valid + n_test >= n {
        return Err(Error::invalid(format!(
            "{n} entities leave no training entities at ratios {ratios:?}"
        )));
    }
    let mut rng = SeededRng::new(seed);
    rng.shuffle(&mut entities);

    // 0 = train, 1 = valid, 2 = test
    let mut group = vec![0u8; r.n_entities(side)];
    for (pos, &e) in entities.iter().enumerate() {
        group[e] = if pos < n_test {
            2
        } else if pos < n_test + n_valid {
            1
        } else {
            0
        };
    }
    let mut parts: [Vec<(usize, usize)>; 3] = Default::default();
    for (u, i) in r.pairs() {
        let e = match side {
            Side::User => u,
            Side::Item => i,
        };
        parts[group[e] as usize].push((u, i));
    }
    let (nu, ni) = (r.n_users(), r.n_items());
    let [train, valid, test] = parts;
    Ok(SplitBundle {
        kind: match side {
            Side::User => SplitKind::UserCold,
            Side::Item => SplitKind::ItemCold,
        },
        train: InteractionMatrix::from_pairs(nu, ni, train)?,
        valid: InteractionMatrix::from_pairs(nu, ni, valid)?,
        test: InteractionMatrix::from_pairs(nu, ni, test)?,
        ratios,
        seed,
    })
}

/// Dispatches on `kind`.
pub fn split(r: &InteractionMatrix, kind: SplitKind, ratios: Ratios, seed: u64) -> Result<SplitBundle> {
    match kind {
        SplitKind::Warm => split_warm(r, ratios, seed),
        SplitKind::UserCold => split_cold(r, Side::User, ratios, seed),
        SplitKind::ItemCold => split_cold(r, Side::Item, ratios, seed),
    }
}
