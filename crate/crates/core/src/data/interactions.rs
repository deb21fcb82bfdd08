use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which side of the user-item matrix an entity, modality or split refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    User,
    Item,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::User => Side::Item,
            Side::Item => Side::User,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::User => "user",
            Side::Item => "item",
        }
    }
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "user" => Ok(Side::User),
            "item" => Ok(Side::Item),
            other => Err(Error::invalid(format!("unknown side '{other}'"))),
        }
    }
}

/// Binary implicit-feedback matrix with both row (user profile) and column
/// (item profile) adjacency lists. Both views are sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionMatrix {
    n_users: usize,
    n_items: usize,
    rows: Vec<Vec<usize>>,
    cols: Vec<Vec<usize>>,
}

impl InteractionMatrix {
    pub fn from_pairs(
        n_users: usize,
        n_items: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut rows = vec![Vec::new(); n_users];
        for (u, i) in pairs {
            if u >= n_users || i >= n_items {
                return Err(Error::invalid(format!(
                    "interaction ({u}, {i}) outside {n_users} x {n_items}"
                )));
            }
            rows[u].push(i);
        }
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
        }
        Ok(Self::from_sorted_rows(n_items, rows))
    }

    fn from_sorted_rows(n_items: usize, rows: Vec<Vec<usize>>) -> Self {
        let mut cols = vec![Vec::new(); n_items];
        for (u, row) in rows.iter().enumerate() {
            for &i in row {
                cols[i].push(u);
            }
        }
        Self {
            n_users: rows.len(),
            n_items,
            rows,
            cols,
        }
    }

    pub fn empty(n_users: usize, n_items: usize) -> Self {
        Self::from_sorted_rows(n_items, vec![Vec::new(); n_users])
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.nnz() == 0
    }

    /// Items of user `u`, ascending.
    pub fn row(&self, u: usize) -> &[usize] {
        &self.rows[u]
    }

    /// Users of item `i`, ascending.
    pub fn col(&self, i: usize) -> &[usize] {
        &self.cols[i]
    }

    /// Profile of an entity on the given side.
    pub fn profile(&self, side: Side, entity: usize) -> &[usize] {
        match side {
            Side::User => self.row(entity),
            Side::Item => self.col(entity),
        }
    }

    pub fn n_entities(&self, side: Side) -> usize {
        match side {
            Side::User => self.n_users,
            Side::Item => self.n_items,
        }
    }

    pub fn contains(&self, u: usize, i: usize) -> bool {
        self.rows[u].binary_search(&i).is_ok()
    }

    /// All `(user, item)` pairs in row-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(u, row)| row.iter().map(move |&i| (u, i)))
    }

    /// Swaps the roles of users and items.
    pub fn transpose(&self) -> Self {
        Self {
            n_users: self.n_items,
            n_items: self.n_users,
            rows: self.cols.clone(),
            cols: self.rows.clone(),
        }
    }

    /// Interaction count per item (column sums).
    pub fn item_counts(&self) -> Vec<usize> {
        self.cols.iter().map(Vec::len).collect()
    }

    pub fn user_counts(&self) -> Vec<usize> {
        self.rows.iter().map(Vec::len).collect()
    }

    /// Entities on `side` with at least one interaction, ascending.
    pub fn active(&self, side: Side) -> Vec<usize> {
        (0..self.n_entities(side))
            .filter(|&e| !self.profile(side, e).is_empty())
            .collect()
    }
}

/// Dense re-indexing of external string ids, in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_ids(ids: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate id '{id}'")));
            }
        }
        Ok(Self { ids, index })
    }

    /// `n` synthetic ids `prefix0 .. prefix{n-1}`.
    pub fn sequential(prefix: &str, n: usize) -> Self {
        Self::from_ids((0..n).map(|i| format!("{prefix}{i}")).collect()).expect("unique")
    }

    pub fn get_or_insert(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), i);
        i
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}
