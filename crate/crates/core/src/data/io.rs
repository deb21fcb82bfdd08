//! CSV ingestion and split persistence.
//!
//! - interactions: `user_id,item_id` per line, header optional
//! - vector modality: `entity_id,v0,...,v{d-1}`
//! - categorical / multilabel: `entity_id,label[;label...]`
//! - discrete: `entity_id,value`
//!
//! A split directory holds `train.csv`, `valid.csv`, `test.csv` and
//! `manifest.json`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::interactions::{IdMap, InteractionMatrix, Side};
use super::modality::{ModalityKind, ModalityTable};
use super::split::{Ratios, SplitBundle, SplitKind};
use crate::fingerprint::{file_digest, FileDigest};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct LoadedInteractions {
    pub matrix: InteractionMatrix,
    pub users: IdMap,
    pub items: IdMap,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-empty trimmed lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn is_interaction_header(fields: &[&str]) -> bool {
    matches!(
        fields,
        [a, b] if a.eq_ignore_ascii_case("user_id") && b.eq_ignore_ascii_case("item_id")
    ) || matches!(fields, [a, b] if a.eq_ignore_ascii_case("user") && b.eq_ignore_ascii_case("item"))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads `user_id,item_id` rows, re-indexing ids densely in order of first
/// appearance and collapsing duplicates.
pub fn load_interactions(path: impl AsRef<Path>) -> Result<LoadedInteractions> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut users = IdMap::new();
    let mut items = IdMap::new();
    let mut pairs = Vec::new();
    for (idx, (line_no, line)) in content_lines(&text).enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if idx == 0 && is_interaction_header(&fields) {
            continue;
        }
        match fields.as_slice() {
            [u, i] if !u.is_empty() && !i.is_empty() => {
                pairs.push((users.get_or_insert(u), items.get_or_insert(i)));
            }
            _ => {
                return Err(parse_error(
                    path,
                    line_no,
                    format!("expected 'user_id,item_id', got '{line}'"),
                ))
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyInput(path.to_path_buf()));
    }
    let matrix = InteractionMatrix::from_pairs(users.len(), items.len(), pairs)?;
    Ok(LoadedInteractions {
        matrix,
        users,
        items,
    })
}

/// Reads interactions whose ids must already exist in the given maps.
pub fn load_interactions_indexed(
    path: impl AsRef<Path>,
    users: &IdMap,
    items: &IdMap,
) -> Result<InteractionMatrix> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut pairs = Vec::new();
    let mut unknown = BTreeSet::new();
    for (idx, (line_no, line)) in content_lines(&text).enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if idx == 0 && is_interaction_header(&fields) {
            continue;
        }
        let [u, i] = fields.as_slice() else {
            return Err(parse_error(path, line_no, format!("expected two fields, got '{line}'")));
        };
        match (users.get(u), items.get(i)) {
            (Some(u), Some(i)) => pairs.push((u, i)),
            (a, b) => {
                if a.is_none() {
                    unknown.insert(u.to_string());
                }
                if b.is_none() {
                    unknown.insert(i.to_string());
                }
            }
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownEntities {
            path: path.to_path_buf(),
            offenders: unknown.into_iter().collect(),
        });
    }
    InteractionMatrix::from_pairs(users.len(), items.len(), pairs)
}

/// Reads one modality file for the entities in `ids`.
///
/// Entities missing from the file get a zero row and `available = false`.
/// Categorical and multilabel vocabularies are the sorted set of observed
/// labels.
pub fn load_modality(
    path: impl AsRef<Path>,
    name: &str,
    side: Side,
    kind: ModalityKind,
    ids: &IdMap,
) -> Result<ModalityTable> {
    let path = path.as_ref();
    if kind == ModalityKind::Profile {
        return Err(Error::invalid(
            "profile modalities are derived from interactions, not loaded",
        ));
    }
    let text = read_text(path)?;
    let mut records: Vec<(usize, usize, Vec<String>)> = Vec::new();
    let mut unknown = BTreeSet::new();
    let mut seen = vec![false; ids.len()];
    for (idx, (line_no, line)) in content_lines(&text).enumerate() {
        let mut fields = line.split(',').map(str::trim);
        let id = fields.next().unwrap_or_default();
        let rest: Vec<String> = fields.map(String::from).collect();
        if idx == 0 && id.eq_ignore_ascii_case("entity_id") {
            continue;
        }
        if rest.is_empty() {
            return Err(parse_error(path, line_no, "row has no feature values"));
        }
        let Some(entity) = ids.get(id) else {
            unknown.insert(id.to_string());
            continue;
        };
        if std::mem::replace(&mut seen[entity], true) {
            return Err(parse_error(path, line_no, format!("duplicate entity '{id}'")));
        }
        records.push((line_no, entity, rest));
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownEntities {
            path: path.to_path_buf(),
            offenders: unknown.into_iter().collect(),
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyInput(path.to_path_buf()));
    }

    let n = ids.len();
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut vocabulary = Vec::new();
    let dim = match kind {
        ModalityKind::Vector | ModalityKind::Discrete => {
            let dim = records[0].2.len();
            for (line_no, entity, values) in &records {
                if values.len() != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        actual: values.len(),
                        context: format!("{}:{line_no}", path.display()),
                    });
                }
                let parsed = values
                    .iter()
                    .map(|v| {
                        v.parse::<f64>()
                            .ok()
                            .filter(|x| x.is_finite())
                            .ok_or_else(|| parse_error(path, *line_no, format!("bad number '{v}'")))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                rows[*entity] = Some(parsed);
            }
            dim
        }
        ModalityKind::Categorical | ModalityKind::Multilabel => {
            let label_sets: Vec<(usize, usize, Vec<String>)> = records
                .into_iter()
                .map(|(line_no, entity, fields)| {
                    let labels: Vec<String> = fields
                        .join(",")
                        .split(';')
                        .map(|l| l.trim().to_string())
                        .filter(|l| !l.is_empty())
                        .collect();
                    (line_no, entity, labels)
                })
                .collect();
            let vocab: BTreeSet<&String> = label_sets.iter().flat_map(|(_, _, l)| l).collect();
            vocabulary = vocab.into_iter().cloned().collect::<Vec<_>>();
            let dim = vocabulary.len();
            for (line_no, entity, labels) in &label_sets {
                if kind == ModalityKind::Categorical && labels.len() != 1 {
                    return Err(parse_error(
                        path,
                        *line_no,
                        format!("categorical row needs exactly one label, got {}", labels.len()),
                    ));
                }
                if labels.is_empty() {
                    return Err(parse_error(path, *line_no, "no labels"));
                }
                let mut row = vec![0.0; dim];
                for l in labels {
                    let col = vocabulary.binary_search(l).expect("label in vocabulary");
                    row[col] = 1.0;
                }
                rows[*entity] = Some(row);
            }
            dim
        }
        ModalityKind::Profile => unreachable!(),
    };
    Ok(ModalityTable::from_rows(name, side, kind, dim, &rows)?.with_vocabulary(vocabulary))
}

/// Writes `user_id,item_id` rows in row-major index order.
pub fn write_interactions(
    path: impl AsRef<Path>,
    matrix: &InteractionMatrix,
    users: &IdMap,
    items: &IdMap,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("user_id,item_id\n");
    for (u, i) in matrix.pairs() {
        out.push_str(users.id(u));
        out.push(',');
        out.push_str(items.id(i));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes a vector-kind modality as `entity_id,v0,...`; unavailable entities
/// are omitted.
pub fn write_vector_modality(
    path: impl AsRef<Path>,
    table: &ModalityTable,
    ids: &IdMap,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for e in 0..table.n_entities() {
        if !table.is_available(e) {
            continue;
        }
        out.push_str(ids.id(e));
        for v in table.row(e) {
            out.push(',');
            out.push_str(&format!("{v:?}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub kind: SplitKind,
    pub ratios: Ratios,
    pub seed: u64,
    pub user_ids: Vec<String>,
    pub item_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<FileDigest>,
}

pub const SPLIT_FILES: [&str; 3] = ["train.csv", "valid.csv", "test.csv"];

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Persists a split as three interaction CSVs plus `manifest.json`.
pub fn write_split(
    dir: impl AsRef<Path>,
    bundle: &SplitBundle,
    users: &IdMap,
    items: &IdMap,
    source: Option<&Path>,
) -> Result<()> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    let mats = [&bundle.train, &bundle.valid, &bundle.test];
    for (file, m) in SPLIT_FILES.iter().zip(mats) {
        write_interactions(dir.join(file), m, users, items)?;
    }
    let manifest = SplitManifest {
        kind: bundle.kind,
        ratios: bundle.ratios,
        seed: bundle.seed,
        user_ids: users.ids().to_vec(),
        item_ids: items.ids().to_vec(),
        source: source.map(file_digest).transpose()?,
    };
    write_json(dir.join("manifest.json"), &manifest)
}

#[derive(Debug, Clone)]
pub struct LoadedSplit {
    pub bundle: SplitBundle,
    pub users: IdMap,
    pub items: IdMap,
    pub manifest: SplitManifest,
    pub dir: PathBuf,
}

pub fn read_split(dir: impl AsRef<Path>) -> Result<LoadedSplit> {
    let dir = dir.as_ref();
    let manifest: SplitManifest = read_json(dir.join("manifest.json"))?;
    let users = IdMap::from_ids(manifest.user_ids.clone())?;
    let items = IdMap::from_ids(manifest.item_ids.clone())?;
    let train = load_interactions_indexed(dir.join(SPLIT_FILES[0]), &users, &items)?;
    let valid = load_interactions_indexed(dir.join(SPLIT_FILES[1]), &users, &items)?;
    let test = load_interactions_indexed(dir.join(SPLIT_FILES[2]), &users, &items)?;
    Ok(LoadedSplit {
        bundle: SplitBundle {
            kind: manifest.kind,
            train,
            valid,
            test,
            ratios: manifest.ratios,
            seed: manifest.seed,
        },
        users,
        items,
        manifest,
        dir: dir.to_path_buf(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn loads_and_reindexes() {
        let tmp = tempfile::tempdir().unwrap();
        let p = write(tmp.path(), "r.csv", "user_id,item_id\na,x\na,y\nb,x\n");
        let l = load_interactions(&p).unwrap();
        assert_eq!((l.matrix.n_users(), l.matrix.n_items()), (2, 2));
        assert_eq!(l.matrix.nnz(), 3);
        assert_eq!(l.users.id(1), "b");
    }

    #[test]
    fn duplicate_pairs_collapse() {
        let tmp = tempfile::tempdir().unwrap();
        let p = write(tmp.path(), "r.csv", "a,x\na,x\n");
        assert_eq!(load_interactions(&p).unwrap().matrix.nnz(), 1);
    }

    #[test]
    fn malformed_row_reports_line() {
        let tmp = tempfile::tempdir().unwrap();
        let p = write(tmp.path(), "r.csv", "a\n");
        match load_interactions(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        let e = write(tmp.path(), "e.csv", "\n\n");
        assert!(matches!(load_interactions(&e), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn categorical_is_one_hot_over_sorted_vocab() {
        let tmp = tempfile::tempdir().unwrap();
        let ids = IdMap::from_ids(vec!["x".into(), "y".into()]).unwrap();
        let p = write(tmp.path(), "g.csv", "x,rock\ny,jazz\n");
        let t = load_modality(&p, "genre", Side::Item, ModalityKind::Categorical, &ids).unwrap();
        assert_eq!(t.vocabulary, vec!["jazz", "rock"]);
        assert_eq!(t.row(0), &[0.0, 1.0]);
        assert_eq!(t.row(1), &[1.0, 0.0]);
    }

    #[test]
    fn multilabel_is_multi_hot() {
        let tmp = tempfile::tempdir().unwrap();
        let ids = IdMap::from_ids(vec!["x".into(), "y".into()]).unwrap();
        let p = write(tmp.path(), "t.csv", "x,a;b\ny,c\n");
        let t = load_modality(&p, "tags", Side::Item, ModalityKind::Multilabel, &ids).unwrap();
        assert_eq!(t.row(0), &[1.0, 1.0, 0.0]);
        assert_eq!(t.row(1), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn ragged_vectors_are_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let ids = IdMap::from_ids(vec!["x".into(), "y".into()]).unwrap();
        let p = write(tmp.path(), "v.csv", "x,1,2,3\ny,1,2,3,4\n");
        assert!(matches!(
            load_modality(&p, "v", Side::Item, ModalityKind::Vector, &ids),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn missing_entities_are_unavailable() {
        let tmp = tempfile::tempdir().unwrap();
        let ids = IdMap::sequential("i", 3);
        let p = write(tmp.path(), "v.csv", "i0,1.0\ni1,2.0\n");
        let t = load_modality(&p, "v", Side::Item, ModalityKind::Vector, &ids).unwrap();
        assert_eq!(t.available(), &[true, true, false]);
        assert_eq!(t.row(2), &[0.0]);
    }

    #[test]
    fn unknown_entities_are_listed() {
        let tmp = tempfile::tempdir().unwrap();
        let ids = IdMap::sequential("i", 2);
        let p = write(tmp.path(), "v.csv", "i0,1\nzz,2\nqq,3\n");
        match load_modality(&p, "v", Side::Item, ModalityKind::Vector, &ids) {
            Err(Error::UnknownEntities { offenders, .. }) => assert_eq!(offenders, vec!["qq", "zz"]),
            other => panic!("{other:?}"),
        }
    }
}
