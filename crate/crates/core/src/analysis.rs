//! Modality-gap statistics before and after the shared branch.
//!
//! For a uniform sample of entities that have every analysed modality, each
//! modality is embedded at two stages: the projector output `f_m(x_m)` (pre)
//! and the shared branch output `g(f_m(x_m))` (post). Per modality pair the
//! report gives the distance between the modality centroids, the mean cosine
//! between the two modality embeddings of the same entity, and the same mean
//! for mismatched (random) entity pairs. Pooled embeddings are also projected
//! onto their first ten principal components for plotting.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::io::write_json;
use crate::data::{FeatureStore, IdMap};
use crate::model::SiBraR;
use crate::numerics::{dot, pca, SeededRng};
use crate::{Error, Result};

/// Number of principal components exported per stage.
pub const N_COMPONENTS: usize = 10;

pub const DEFAULT_SAMPLE_SIZE: usize = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    PreBranch,
    PostBranch,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::PreBranch => "pre_branch",
            Stage::PostBranch => "post_branch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairGap {
    pub a: String,
    pub b: String,
    pub centroid_distance: f64,
    /// `None` when every same-entity cosine is undefined (a zero vector).
    pub same_entity_cosine: Option<f64>,
    pub random_pair_cosine: Option<f64>,
    pub undefined_same: usize,
    pub undefined_random: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRow {
    pub entity: usize,
    pub modality: String,
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub stage: Stage,
    pub sample_size: usize,
    pub pairs: Vec<PairGap>,
    /// Components actually estimated; the remaining projection columns are 0.
    pub n_components: usize,
    pub explained_variance_ratio: Vec<f64>,
    #[serde(skip)]
    pub projections: Vec<ProjectionRow>,
}

impl GapReport {
    /// Mean over pairs of the defined same-entity cosines.
    pub fn mean_same_entity_cosine(&self) -> Option<f64> {
        mean_defined(self.pairs.iter().map(|p| p.same_entity_cosine))
    }

    pub fn mean_random_pair_cosine(&self) -> Option<f64> {
        mean_defined(self.pairs.iter().map(|p| p.random_pair_cosine))
    }

    pub fn mean_centroid_distance(&self) -> f64 {
        self.pairs.iter().map(|p| p.centroid_distance).sum::<f64>() / self.pairs.len() as f64
    }
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapAnalysis {
    pub modalities: Vec<String>,
    /// Sampled entity indices, ascending; shared by both stages.
    pub entities: Vec<usize>,
    /// Requested size before clamping to the eligible population.
    pub requested_sample_size: usize,
    pub eligible: usize,
    pub seed: u64,
    pub pre: GapReport,
    pub post: GapReport,
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

fn centroid(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut c = vec![0.0; rows[0].len()];
    for r in rows {
        for (a, v) in c.iter_mut().zip(r) {
            *a += v;
        }
    }
    let n = rows.len() as f64;
    c.into_iter().map(|v| v / n).collect()
}

fn stage_report(
    stage: Stage,
    modalities: &[String],
    entities: &[usize],
    partner: &[Option<usize>],
    emb: &[Vec<Vec<f64>>],
) -> Result<GapReport> {
    let mut pairs = Vec::new();
    for a in 0..modalities.len() {
        for b in a + 1..modalities.len() {
            let (ea, eb) = (&emb[a], &emb[b]);
            let ca = centroid(ea);
            let cb = centroid(eb);
            let centroid_distance = ca
                .iter()
                .zip(&cb)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            let same: Vec<Option<f64>> = (0..entities.len()).map(|s| cosine(&ea[s], &eb[s])).collect();
            let random: Vec<Option<f64>> = partner
                .iter()
                .enumerate()
                .map(|(s, p)| p.and_then(|j| cosine(&ea[s], &eb[j])))
                .collect();
            pairs.push(PairGap {
                a: modalities[a].clone(),
                b: modalities[b].clone(),
                centroid_distance,
                same_entity_cosine: mean_defined(same.iter().copied()),
                random_pair_cosine: mean_defined(random.iter().copied()),
                undefined_same: same.iter().filter(|c| c.is_none()).count(),
                undefined_random: random.iter().filter(|c| c.is_none()).count(),
            });
        }
    }

    let mut pooled = Vec::new();
    let mut labels = Vec::new();
    for (m, rows) in emb.iter().enumerate() {
        for (s, r) in rows.iter().enumerate() {
            pooled.push(r.clone());
            labels.push((entities[s], m));
        }
    }
    let k = N_COMPONENTS.min(pooled.len()).min(pooled[0].len());
    let p = pca(&pooled, k)?;
    let projections = p
        .projections
        .iter()
        .zip(&labels)
        .map(|(coords, &(entity, m))| {
            let mut c = coords.clone();
            c.resize(N_COMPONENTS, 0.0);
            ProjectionRow {
                entity,
                modality: modalities[m].clone(),
                coords: c,
            }
        })
        .collect();
    Ok(GapReport {
        stage,
        sample_size: entities.len(),
        pairs,
        n_components: k,
        explained_variance_ratio: p.explained_variance_ratio,
        projections,
    })
}

/// Gap statistics of `model` over `modalities` (all training modalities when
/// `None`). The sample is drawn uniformly without replacement from entities
/// that have every analysed modality; `sample_size` is clamped to that
/// population. Each sampled entity's random partner is another sampled
/// entity, drawn once and reused at both stages.
pub fn gap_report(
    model: &SiBraR,
    features: &FeatureStore,
    modalities: Option<&[String]>,
    sample_size: usize,
    seed: u64,
) -> Result<GapAnalysis> {
    let mut mods: Vec<String> = modalities.unwrap_or(&model.modalities).to_vec();
    mods.sort();
    mods.dedup();
    if mods.len() < 2 {
        return Err(Error::invalid("gap analysis needs at least two modalities"));
    }
    for m in &mods {
        if !model.projectors.contains_key(m) {
            return Err(Error::UnknownModality {
                name: m.clone(),
                known: model.modalities.clone(),
            });
        }
    }
    if sample_size < 2 {
        return Err(Error::invalid("gap analysis needs a sample of at least 2"));
    }
    let n = features
        .n_entities()
        .ok_or_else(|| Error::invalid("feature store is empty"))?;
    let mut eligible = Vec::new();
    for e in 0..n {
        if features.available_for(e, &mods)?.len() == mods.len() {
            eligible.push(e);
        }
    }
    if eligible.len() < 2 {
        return Err(Error::invalid(format!(
            "only {} entities have all of {mods:?} available",
            eligible.len()
        )));
    }
    let take = sample_size.min(eligible.len());
    let mut rng = SeededRng::new(seed);
    let mut entities: Vec<usize> = rng
        .choose(eligible.len(), take)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    entities.sort_unstable();
    let partner: Vec<Option<usize>> = (0..take)
        .map(|s| {
            let j = rng.below(take - 1);
            Some(if j >= s { j + 1 } else { j })
        })
        .collect();

    let mut pre = Vec::with_capacity(mods.len());
    let mut post = Vec::with_capacity(mods.len());
    for m in &mods {
        let table = features.get(m)?;
        let mut pre_rows = Vec::with_capacity(take);
        let mut post_rows = Vec::with_capacity(take);
        for &e in &entities {
            let z = model.project(m, table.row(e))?;
            post_rows.push(model.branch.forward(&z)?);
            pre_rows.push(z);
        }
        pre.push(pre_rows);
        post.push(post_rows);
    }
    Ok(GapAnalysis {
        pre: stage_report(Stage::PreBranch, &mods, &entities, &partner, &pre)?,
        post: stage_report(Stage::PostBranch, &mods, &entities, &partner, &post)?,
        modalities: mods,
        entities,
        requested_sample_size: sample_size,
        eligible: eligible.len(),
        seed,
    })
}

impl GapAnalysis {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }

    /// `entity_id,modality,c1..c10,stage`.
    pub fn write_projections_csv(&self, path: impl AsRef<Path>, ids: Option<&IdMap>) -> Result<()> {
        let path = path.as_ref();
        let mut text = String::from("entity_id,modality");
        for c in 1..=N_COMPONENTS {
            text.push_str(&format!(",c{c}"));
        }
        text.push_str(",stage\n");
        for report in [&self.pre, &self.post] {
            for row in &report.projections {
                let id = match ids {
                    Some(map) => map.id(row.entity).to_string(),
                    None => row.entity.to_string(),
                };
                text.push_str(&id);
                text.push(',');
                text.push_str(&row.modality);
                for c in &row.coords {
                    text.push_str(&format!(",{c}"));
                }
                text.push(',');
                text.push_str(report.stage.as_str());
                text.push('\n');
            }
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ModalityKind, ModalityTable, Side};
    use crate::model::SiBraRConfig;
    use std::collections::BTreeMap;

    fn store(n: usize, d: usize) -> FeatureStore {
        let mut rng = SeededRng::new(5);
        let x: Vec<f64> = (0..n * d).map(|_| rng.gaussian()).collect();
        let t = |name: &str| {
            ModalityTable::new(name, Side::Item, ModalityKind::Vector, d, x.clone(), vec![true; n])
                .unwrap()
        };
        FeatureStore::from_tables([t("a"), t("b")]).unwrap()
    }

    fn model(n: usize, d: usize) -> SiBraR {
        let cfg = SiBraRConfig {
            d_emb: 6,
            branch_hidden: vec![],
            counterpart: crate::model::CounterpartKind::Lookup,
            ..SiBraRConfig::default()
        };
        let dims = BTreeMap::from([("a".to_string(), d), ("b".to_string(), d)]);
        let mut m = SiBraR::from_dims(cfg, &dims, 4, n, 1).unwrap();
        let a = m.projectors["a"].clone();
        m.projectors.insert("b".into(), a);
        m
    }

    #[test]
    fn identical_modalities_have_no_gap() {
        let (n, d) = (40, 5);
        let g = gap_report(&model(n, d), &store(n, d), None, 30, 2).unwrap();
        for r in [&g.pre, &g.post] {
            assert_eq!(r.pairs.len(), 1);
            assert!(r.pairs[0].centroid_distance < 1e-12);
            assert_eq!(r.projections.len(), 60);
            assert!(r.projections.iter().all(|p| p.coords.len() == N_COMPONENTS));
        }
        assert_eq!(g.entities.len(), 30);
    }

    #[test]
    fn zero_branch_flags_undefined_cosines() {
        let (n, d) = (20, 3);
        let mut m = model(n, d);
        for l in &mut m.branch.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
            l.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        let g = gap_report(&m, &store(n, d), None, 50, 0).unwrap();
        let p = &g.post.pairs[0];
        assert_eq!(p.centroid_distance, 0.0);
        assert_eq!(p.same_entity_cosine, None);
        assert_eq!(p.undefined_same, 20);
        assert_eq!(g.requested_sample_size, 50);
    }

    #[test]
    fn single_modality_is_an_error() {
        let (n, d) = (20, 3);
        let only_a = ["a".to_string()];
        assert!(gap_report(&model(n, d), &store(n, d), Some(&only_a), 10, 0).is_err());
    }
}
