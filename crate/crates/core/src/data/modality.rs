use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::interactions::{InteractionMatrix, Side};
use crate::{Error, Result};

/// Name reserved for the interaction-profile pseudo-modality.
pub const PROFILE: &str = "profile";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModalityKind {
    Vector,
    Categorical,
    Multilabel,
    Discrete,
    Profile,
}

impl std::str::FromStr for ModalityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "vector" => ModalityKind::Vector,
            "categorical" => ModalityKind::Categorical,
            "multilabel" => ModalityKind::Multilabel,
            "discrete" => ModalityKind::Discrete,
            "profile" => ModalityKind::Profile,
            other => return Err(Error::invalid(format!("unknown modality kind '{other}'"))),
        })
    }
}

/// Feature vectors of one modality for every entity of one side.
///
/// Unavailable entities keep an all-zero row; `available` is authoritative.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityTable {
    pub name: String,
    pub side: Side,
    pub kind: ModalityKind,
    dim: usize,
    features: Vec<f64>,
    available: Vec<bool>,
    /// Category labels for categorical and multilabel kinds, column order.
    pub vocabulary: Vec<String>,
}

impl ModalityTable {
    /// Validates and builds a table from row-major features.
    pub fn new(
        name: impl Into<String>,
        side: Side,
        kind: ModalityKind,
        dim: usize,
        features: Vec<f64>,
        available: Vec<bool>,
    ) -> Result<Self> {
        let name = name.into();
        let n = available.len();
        if features.len() != n * dim {
            return Err(Error::Dimension {
                expected: n * dim,
                actual: features.len(),
                context: format!("features of modality '{name}'"),
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "modality '{name}' entity {} column {}",
                pos / dim.max(1),
                pos % dim.max(1)
            )));
        }
        let table = Self {
            name,
            side,
            kind,
            dim,
            features,
            available,
            vocabulary: Vec::new(),
        };
        for e in 0..n {
            let row = table.row(e);
            if !table.available[e] {
                if row.iter().any(|&v| v != 0.0) {
                    return Err(Error::invalid(format!(
                        "modality '{}': unavailable entity {e} has a nonzero row",
                        table.name
                    )));
                }
                continue;
            }
            match kind {
                ModalityKind::Categorical => {
                    let ones = row.iter().filter(|&&v| v == 1.0).count();
                    let zeros = row.iter().filter(|&&v| v == 0.0).count();
                    if ones != 1 || ones + zeros != dim {
                        return Err(Error::invalid(format!(
                            "modality '{}': entity {e} is not one-hot",
                            table.name
                        )));
                    }
                }
                ModalityKind::Multilabel | ModalityKind::Profile => {
                    if row.iter().any(|&v| v != 0.0 && v != 1.0) {
                        return Err(Error::invalid(format!(
                            "modality '{}': entity {e} is not binary",
                            table.name
                        )));
                    }
                }
                ModalityKind::Discrete if dim != 1 => {
                    return Err(Error::invalid(format!(
                        "discrete modality '{}' must have one column",
                        table.name
                    )));
                }
                _ => {}
            }
        }
        Ok(table)
    }

    /// Builds a table from per-entity optional rows.
    pub fn from_rows(
        name: impl Into<String>,
        side: Side,
        kind: ModalityKind,
        dim: usize,
        rows: &[Option<Vec<f64>>],
    ) -> Result<Self> {
        let mut features = vec![0.0; rows.len() * dim];
        let mut available = vec![false; rows.len()];
        for (e, row) in rows.iter().enumerate() {
            if let Some(row) = row {
                if row.len() != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        actual: row.len(),
                        context: format!("row {e}"),
                    });
                }
                features[e * dim..(e + 1) * dim].copy_from_slice(row);
                available[e] = true;
            }
        }
        Self::new(name, side, kind, dim, features, available)
    }

    /// One-hot encoding of entity indices, i.e. an id lookup expressed as a
    /// modality.
    pub fn one_hot_ids(name: impl Into<String>, side: Side, n: usize) -> Self {
        let mut features = vec![0.0; n * n];
        for e in 0..n {
            features[e * n + e] = 1.0;
        }
        Self::new(
            name,
            side,
            ModalityKind::Categorical,
            n,
            features,
            vec![true; n],
        )
        .expect("identity is one-hot")
    }

    pub fn with_vocabulary(mut self, vocabulary: Vec<String>) -> Self {
        self.vocabulary = vocabulary;
        self
    }

    pub fn n_entities(&self) -> usize {
        self.available.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, entity: usize) -> &[f64] {
        &self.features[entity * self.dim..(entity + 1) * self.dim]
    }

    pub fn is_available(&self, entity: usize) -> bool {
        self.available[entity]
    }

    pub fn available(&self) -> &[bool] {
        &self.available
    }

    pub fn available_count(&self) -> usize {
        self.available.iter().filter(|&&a| a).count()
    }
}

/// Interaction profiles of one side as a modality. Entities with an empty
/// profile are marked unavailable.
pub fn profile_modality(r: &InteractionMatrix, side: Side) -> ModalityTable {
    let n = r.n_entities(side);
    let dim = r.n_entities(side.other());
    let mut features = vec![0.0; n * dim];
    let mut available = vec![false; n];
    for e in 0..n {
        let profile = r.profile(side, e);
        available[e] = !profile.is_empty();
        for &o in profile {
            features[e * dim + o] = 1.0;
        }
    }
    ModalityTable::new(PROFILE, side, ModalityKind::Profile, dim, features, available)
        .expect("profiles are binary")
}

/// Named modality tables for one side.
#[derive(Debug, Clone, Default)]
pub struct FeatureStore {
    tables: BTreeMap<String, ModalityTable>,
}

impl FeatureStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_tables(tables: impl IntoIterator<Item = ModalityTable>) -> Result<Self> {
        let mut store = Self::new();
        for t in tables {
            store.insert(t)?;
        }
        Ok(store)
    }

    pub fn insert(&mut self, table: ModalityTable) -> Result<()> {
        if let Some(first) = self.tables.values().next() {
            if first.side != table.side || first.n_entities() != table.n_entities() {
                return Err(Error::invalid(format!(
                    "modality '{}' ({:?}, {} entities) does not match store ({:?}, {} entities)",
                    table.name,
                    table.side,
                    table.n_entities(),
                    first.side,
                    first.n_entities()
                )));
            }
        }
        self.tables.insert(table.name.clone(), table);
        Ok(())
    }

    /// Adds (or replaces) the profile pseudo-modality derived from `train`.
    pub fn with_profile(mut self, train: &InteractionMatrix, side: Side) -> Result<Self> {
        self.tables.remove(PROFILE);
        self.insert(profile_modality(train, side))?;
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Result<&ModalityTable> {
        self.tables.get(name).ok_or_else(|| Error::UnknownModality {
            name: name.to_string(),
            known: self.names(),
        })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tables.contains_key(name)
    }

    pub fn names(&self) -> Vec<String> {
        self.tables.keys().cloned().collect()
    }

    pub fn tables(&self) -> impl Iterator<Item = &ModalityTable> {
        self.tables.values()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn n_entities(&self) -> Option<usize> {
        self.tables.values().next().map(|t| t.n_entities())
    }

    /// Names among `subset` that are available for `entity`, sorted.
    pub fn available_for(&self, entity: usize, subset: &[String]) -> Result<Vec<String>> {
        let mut out = Vec::new();
        for name in subset {
            if self.get(name)?.is_available(entity) {
                out.push(name.clone());
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn item_profiles_are_columns() {
        let r = InteractionMatrix::from_pairs(3, 2, [(0, 0), (2, 0)]).unwrap();
        let t = profile_modality(&r, Side::Item);
        assert_eq!(t.dim(), 3);
        assert_eq!(t.row(0), &[1.0, 0.0, 1.0]);
        assert_eq!(t.row(1), &[0.0, 0.0, 0.0]);
        assert_eq!(t.available(), &[true, false]);
    }

    #[test]
    fn user_profiles_are_rows() {
        let r = InteractionMatrix::from_pairs(2, 2, [(0, 0), (1, 1)]).unwrap();
        let t = profile_modality(&r, Side::User);
        assert_eq!(t.row(0), &[1.0, 0.0]);
        assert_eq!(t.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn invariants_are_enforced() {
        let bad_onehot = ModalityTable::new(
            "c",
            Side::Item,
            ModalityKind::Categorical,
            2,
            vec![1.0, 1.0],
            vec![true],
        );
        assert!(bad_onehot.is_err());
        let nonfinite = ModalityTable::new(
            "v",
            Side::Item,
            ModalityKind::Vector,
            1,
            vec![f64::NAN],
            vec![true],
        );
        assert!(nonfinite.is_err());
        let hidden_values = ModalityTable::new(
            "v",
            Side::Item,
            ModalityKind::Vector,
            1,
            vec![2.0],
            vec![false],
        );
        assert!(hidden_values.is_err());
    }

    #[test]
    fn store_rejects_mismatched_sides() {
        let a = ModalityTable::one_hot_ids("a", Side::Item, 3);
        let b = ModalityTable::one_hot_ids("b", Side::User, 3);
        let mut store = FeatureStore::new();
        store.insert(a).unwrap();
        assert!(store.insert(b).is_err());
        assert!(matches!(
            store.get("zzz"),
            Err(Error::UnknownModality { .. })
        ));
    }
}
