//! The single-branch multimodal model.
//!
//! Terminology used throughout: the *target* side is the multimodal one (items
//! for the item variant, users for the user variant) and the *anchor* side is
//! embedded by the counterpart (a lookup table or a profile network). The user
//! variant is the item variant run on the transposed interaction matrix.
//!
//! A target embedding is `mean_m g(f_m(x_m))` over a set of modalities, where
//! `f_m` is the per-modality projector and `g` the shared branch. The mean is
//! always summed in sorted modality-name order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::table::EmbeddingTable;
use super::EmbeddingScorer;
use crate::data::{FeatureStore, InteractionMatrix, Side};
use crate::losses::{bpr_loss_grad, sinfonce_loss_grad, BatchLossConfig};
use crate::numerics::{
    dot, finite_diff_check, Activation, BlockInfo, DenseLayer, GradCheckReport, GradientTape,
    LayerGrads, Network, NetworkGrads, Parameterized, SeededRng,
};
use crate::training::negatives::sample_negatives_from;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CounterpartKind {
    Lookup,
    #[default]
    Profile,
}

/// Architecture of a single-branch model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SiBraRConfig {
    /// The multimodal side.
    pub side: Side,
    pub d_emb: usize,
    /// Projector output size, i.e. the shared branch input. Defaults to
    /// `d_emb` when zero.
    pub projector_dim: usize,
    pub projector_activation: Activation,
    pub projector_bias: bool,
    /// Hidden sizes of the shared branch `projector_dim -> ... -> d_emb`.
    pub branch_hidden: Vec<usize>,
    /// When false the branch is the identity and projectors map straight to
    /// `d_emb`.
    pub shared_branch: bool,
    pub counterpart: CounterpartKind,
    /// Hidden sizes of the counterpart profile network.
    pub counterpart_hidden: Vec<usize>,
}

impl Default for SiBraRConfig {
    fn default() -> Self {
        Self {
            side: Side::Item,
            d_emb: 32,
            projector_dim: 0,
            projector_activation: Activation::Relu,
            projector_bias: true,
            branch_hidden: vec![64],
            shared_branch: true,
            counterpart: CounterpartKind::Profile,
            counterpart_hidden: vec![64],
        }
    }
}

impl SiBraRConfig {
    pub fn projector_out(&self) -> usize {
        if !self.shared_branch || self.projector_dim == 0 {
            self.d_emb
        } else {
            self.projector_dim
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Counterpart {
    Lookup(EmbeddingTable),
    Profile(Network),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiBraR {
    pub config: SiBraRConfig,
    /// Training modalities, sorted.
    pub modalities: Vec<String>,
    pub projectors: BTreeMap<String, DenseLayer>,
    pub branch: Network,
    pub counterpart: Counterpart,
    pub n_anchors: usize,
    pub n_targets: usize,
}

#[derive(Debug, Clone)]
pub enum CounterpartGrads {
    Lookup(Vec<f64>),
    Profile(NetworkGrads),
}

/// Gradient buffer mirroring a [`SiBraR`] parameter layout.
#[derive(Debug, Clone)]
pub struct SiBraRGrads {
    info: Vec<BlockInfo>,
    pub projectors: BTreeMap<String, LayerGrads>,
    pub branch: NetworkGrads,
    pub counterpart: CounterpartGrads,
}

/// Training data oriented for one model: rows are anchors, columns targets.
#[derive(Debug, Clone)]
pub struct TrainView<'a> {
    pub side: Side,
    pub oriented: InteractionMatrix,
    pub features: &'a FeatureStore,
    /// Targets eligible as negatives: at least one training interaction and,
    /// when modalities are given, at least one of them available.
    pub negative_pool: Vec<usize>,
}

impl<'a> TrainView<'a> {
    pub fn new(
        side: Side,
        train: &InteractionMatrix,
        features: &'a FeatureStore,
        modalities: Option<&[String]>,
    ) -> Result<Self> {
        let oriented = match side {
            Side::Item => train.clone(),
            Side::User => train.transpose(),
        };
        let mut negative_pool = Vec::new();
        for t in oriented.active(Side::Item) {
            let ok = match modalities {
                Some(mods) => !features.available_for(t, mods)?.is_empty(),
                None => true,
            };
            if ok {
                negative_pool.push(t);
            }
        }
        Ok(Self {
            side,
            oriented,
            features,
            negative_pool,
        })
    }

    /// `(user, item)` to `(anchor, target)`.
    pub fn orient(&self, user: usize, item: usize) -> (usize, usize) {
        match self.side {
            Side::Item => (user, item),
            Side::User => (item, user),
        }
    }

    pub fn n_anchors(&self) -> usize {
        self.oriented.n_users()
    }

    pub fn n_targets(&self) -> usize {
        self.oriented.n_items()
    }

    /// Dense anchor profile (row of the oriented matrix).
    pub fn anchor_profile(&self, anchor: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n_targets()];
        for &t in self.oriented.row(anchor) {
            x[t] = 1.0;
        }
        x
    }
}

/// Draws `n_mod` of the `available` modality names (no draws when every
/// candidate is taken) and returns them sorted.
pub fn sample_modalities(available: &[String], n_mod: usize, rng: &mut SeededRng) -> Vec<String> {
    let mut pool = available.to_vec();
    if pool.len() > n_mod {
        rng.partial_shuffle(&mut pool, n_mod);
        pool.truncate(n_mod);
    }
    pool.sort();
    pool
}

enum CounterpartTape {
    Lookup(usize),
    Profile(GradientTape),
}

/// Forward record of one `(target, modality)` pass through `f_m` then `g`.
struct ModalityPass<'t> {
    modality: String,
    input: &'t [f64],
    projected: Vec<f64>,
    branch: GradientTape,
}

impl ModalityPass<'_> {
    fn output(&self) -> &[f64] {
        self.branch.output()
    }
}

impl SiBraR {
    /// Initialises projectors for `modalities` (which must exist in
    /// `features`), the shared branch and the counterpart for `n_anchors`
    /// anchors whose profiles have `n_targets` entries.
    pub fn new(
        config: SiBraRConfig,
        modalities: &[String],
        features: &FeatureStore,
        n_anchors: usize,
        n_targets: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut dims = BTreeMap::new();
        for name in modalities {
            let table = features.get(name)?;
            if table.side != config.side {
                return Err(Error::invalid(format!(
                    "modality '{name}' describes {}s but the model is {}-side",
                    table.side.as_str(),
                    config.side.as_str()
                )));
            }
            if table.n_entities() != n_targets {
                return Err(Error::Dimension {
                    expected: n_targets,
                    actual: table.n_entities(),
                    context: format!("entities in modality '{name}'"),
                });
            }
            dims.insert(name.clone(), table.dim());
        }
        Self::from_dims(config, &dims, n_anchors, n_targets, seed)
    }

    /// Like [`SiBraR::new`] from modality input sizes alone.
    pub fn from_dims(
        config: SiBraRConfig,
        dims: &BTreeMap<String, usize>,
        n_anchors: usize,
        n_targets: usize,
        seed: u64,
    ) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::invalid("at least one training modality is required"));
        }
        if config.d_emb == 0 {
            return Err(Error::invalid("d_emb must be positive"));
        }
        let names: Vec<String> = dims.keys().cloned().collect();
        let mut rng = SeededRng::derived(seed, 0x5eed);
        let d_proj = config.projector_out();

        let mut projectors = BTreeMap::new();
        for (name, &d_in) in dims {
            projectors.insert(
                name.clone(),
                DenseLayer::new(
                    d_in,
                    d_proj,
                    config.projector_activation,
                    config.projector_bias,
                    &mut rng,
                ),
            );
        }

        let branch = if config.shared_branch {
            let mut sizes = vec![d_proj];
            sizes.extend(&config.branch_hidden);
            sizes.push(config.d_emb);
            Network::mlp(&sizes, true, &mut rng)?
        } else {
            Network::identity(config.d_emb)
        };

        let counterpart = match config.counterpart {
            CounterpartKind::Lookup => {
                Counterpart::Lookup(EmbeddingTable::gaussian(n_anchors, config.d_emb, 0.1, &mut rng))
            }
            CounterpartKind::Profile => {
                let mut sizes = vec![n_targets];
                sizes.extend(&config.counterpart_hidden);
                sizes.push(config.d_emb);
                Counterpart::Profile(Network::mlp(&sizes, true, &mut rng)?)
            }
        };

        Ok(Self {
            config,
            modalities: names,
            projectors,
            branch,
            counterpart,
            n_anchors,
            n_targets,
        })
    }

    pub fn side(&self) -> Side {
        self.config.side
    }

    pub fn d_emb(&self) -> usize {
        self.config.d_emb
    }

    /// Input size of every projector, by modality.
    pub fn modality_dims(&self) -> BTreeMap<String, usize> {
        self.projectors
            .iter()
            .map(|(k, l)| (k.clone(), l.d_in()))
            .collect()
    }

    pub fn zero_grads(&self) -> SiBraRGrads {
        SiBraRGrads {
            info: self.block_info(),
            projectors: self
                .projectors
                .iter()
                .map(|(k, l)| (k.clone(), l.zero_grads()))
                .collect(),
            branch: self.branch.zero_grads(),
            counterpart: match &self.counterpart {
                Counterpart::Lookup(t) => CounterpartGrads::Lookup(vec![0.0; t.vectors.len()]),
                Counterpart::Profile(n) => CounterpartGrads::Profile(n.zero_grads()),
            },
        }
    }

    fn projector(&self, name: &str) -> Result<&DenseLayer> {
        self.projectors.get(name).ok_or_else(|| Error::UnknownModality {
            name: name.to_string(),
            known: self.modalities.clone(),
        })
    }

    /// Output of the projector for one entity's modality: `f_m(x_m)`.
    pub fn project(&self, name: &str, x: &[f64]) -> Result<Vec<f64>> {
        self.projector(name)?.forward(x)
    }

    /// `g(f_m(x_m))`.
    pub fn encode(&self, name: &str, x: &[f64]) -> Result<Vec<f64>> {
        self.branch.forward(&self.project(name, x)?)
    }

    /// Modalities among `subset` that are training modalities and available
    /// for `target`, sorted.
    pub fn effective_modalities(
        &self,
        target: usize,
        subset: &[String],
        features: &FeatureStore,
    ) -> Result<Vec<String>> {
        let mut wanted: Vec<String> = subset
            .iter()
            .filter(|m| self.projectors.contains_key(*m))
            .cloned()
            .collect();
        wanted.sort();
        wanted.dedup();
        features.available_for(target, &wanted)
    }

    /// Embedding of a target from the modalities in `subset` that it has:
    /// the mean of `g(f_m(x_m))`. Errors when none remain.
    pub fn embed_entity_multimodal(
        &self,
        target: usize,
        subset: &[String],
        features: &FeatureStore,
    ) -> Result<Vec<f64>> {
        let mods = self.effective_modalities(target, subset, features)?;
        if mods.is_empty() {
            return Err(Error::invalid(format!(
                "{} {target} has none of the modalities {subset:?} available",
                self.side().as_str()
            )));
        }
        let mut acc = vec![0.0; self.d_emb()];
        for m in &mods {
            let z = self.encode(m, features.get(m)?.row(target))?;
            for (a, v) in acc.iter_mut().zip(&z) {
                *a += v;
            }
        }
        let n = mods.len() as f64;
        Ok(acc.into_iter().map(|v| v / n).collect())
    }

    /// Counterpart embedding of an anchor; `profile` is its dense profile row
    /// (ignored by the lookup variant).
    pub fn embed_anchor(&self, anchor: usize, profile: &[f64]) -> Result<Vec<f64>> {
        match &self.counterpart {
            Counterpart::Lookup(t) => {
                if anchor >= t.n_rows() {
                    return Err(Error::invalid(format!("anchor {anchor} outside lookup table")));
                }
                Ok(t.row(anchor).to_vec())
            }
            Counterpart::Profile(net) => net.forward(profile),
        }
    }

    /// Inference embeddings for every user and item. Targets are averaged
    /// over `subset` (all training modalities when `None`) intersected with
    /// availability; targets left with no modality get a zero vector.
    pub fn scorer(
        &self,
        train: &InteractionMatrix,
        features: &FeatureStore,
        subset: Option<&[String]>,
    ) -> Result<EmbeddingScorer> {
        let view = TrainView::new(self.side(), train, features, None)?;
        let subset = subset.unwrap_or(&self.modalities);
        let d = self.d_emb();
        let mut targets = vec![0.0; view.n_targets() * d];
        for t in 0..view.n_targets() {
            let mods = self.effective_modalities(t, subset, features)?;
            if mods.is_empty() {
                continue;
            }
            let e = self.embed_entity_multimodal(t, &mods, features)?;
            targets[t * d..(t + 1) * d].copy_from_slice(&e);
        }
        let mut anchors = vec![0.0; view.n_anchors() * d];
        for a in 0..view.n_anchors() {
            let profile = match self.counterpart {
                Counterpart::Profile(_) => view.anchor_profile(a),
                Counterpart::Lookup(_) => Vec::new(),
            };
            let e = self.embed_anchor(a, &profile)?;
            anchors[a * d..(a + 1) * d].copy_from_slice(&e);
        }
        Ok(match self.side() {
            Side::Item => EmbeddingScorer::new(d, anchors, targets),
            Side::User => EmbeddingScorer::new(d, targets, anchors),
        })
    }

    fn forward_pass<'t>(&self, name: &str, input: &'t [f64]) -> Result<ModalityPass<'t>> {
        let projected = self.projector(name)?.forward(input)?;
        let branch = self.branch.forward_tape(&projected)?;
        Ok(ModalityPass {
            modality: name.to_string(),
            input,
            projected,
            branch,
        })
    }

    fn backward_pass(&self, pass: &ModalityPass<'_>, d_out: &[f64], grads: &mut SiBraRGrads) -> Result<()> {
        let d_proj = self
            .branch
            .backward(&pass.branch, d_out, &mut grads.branch, true)?
            .expect("input gradient requested");
        let layer = self.projector(&pass.modality)?;
        let g = grads
            .projectors
            .get_mut(&pass.modality)
            .ok_or_else(|| Error::invalid("gradient buffer lacks projector"))?;
        layer.backward(pass.input, &pass.projected, &d_proj, g, false);
        Ok(())
    }

    /// Composite loss of a batch of `(user, item)` training interactions,
    /// accumulating gradients into `grads`.
    ///
    /// Per interaction, in this order: embed the anchor with the counterpart;
    /// draw `n_neg` negatives (uniform, excluding the anchor's training
    /// positives, from the view's negative pool); draw `n_mod` modalities
    /// from those available for the positive target (no draw when all are
    /// taken). Each candidate is embedded over the drawn modalities it has,
    /// falling back to all of its available training modalities. BPR is
    /// accrued over the negatives. With two drawn modalities the symmetric
    /// InfoNCE term is accrued over the positive plus the negatives that have
    /// both; with a single available modality it is skipped.
    pub fn batch_loss(
        &self,
        batch: &[(usize, usize)],
        view: &TrainView<'_>,
        cfg: &BatchLossConfig,
        rng: &mut SeededRng,
        grads: &mut SiBraRGrads,
    ) -> Result<f64> {
        cfg.validate()?;
        if view.side != self.side() {
            return Err(Error::invalid("training view orientation differs from model side"));
        }
        let d = self.d_emb();
        let mut total = 0.0;
        for &(user, item) in batch {
            let (anchor, target) = view.orient(user, item);
            if anchor >= view.n_anchors()
                || target >= view.n_targets()
                || !view.oriented.contains(anchor, target)
            {
                return Err(Error::invalid(format!(
                    "({user}, {item}) is not a training interaction"
                )));
            }

            // anchor
            let (e_anchor, anchor_tape) = match &self.counterpart {
                Counterpart::Lookup(t) => (t.row(anchor).to_vec(), CounterpartTape::Lookup(anchor)),
                Counterpart::Profile(net) => {
                    let tape = net.forward_tape(&view.anchor_profile(anchor))?;
                    (tape.output().to_vec(), CounterpartTape::Profile(tape))
                }
            };

            let negatives = sample_negatives_from(
                &view.negative_pool,
                view.oriented.row(anchor),
                cfg.n_neg,
                rng,
            )?;
            let available = view.features.available_for(target, &self.modalities)?;
            if available.is_empty() {
                return Err(Error::invalid(format!(
                    "{} {target} has no available training modality",
                    self.side().as_str()
                )));
            }
            let drawn = sample_modalities(&available, cfg.n_mod(), rng);

            // candidates: positive first, then negatives
            let mut candidates = Vec::with_capacity(1 + negatives.len());
            candidates.push(target);
            candidates.extend(&negatives);
            let mut passes: Vec<Vec<ModalityPass<'_>>> = Vec::with_capacity(candidates.len());
            let mut embeddings: Vec<Vec<f64>> = Vec::with_capacity(candidates.len());
            for &c in &candidates {
                let mut mods = view.features.available_for(c, &drawn)?;
                if mods.is_empty() {
                    mods = view.features.available_for(c, &self.modalities)?;
                }
                if mods.is_empty() {
                    return Err(Error::invalid(format!("candidate {c} has no modality")));
                }
                let mut ps = Vec::with_capacity(mods.len());
                let mut e = vec![0.0; d];
                for m in &mods {
                    let pass = self.forward_pass(m, view.features.get(m)?.row(c))?;
                    for (a, v) in e.iter_mut().zip(pass.output()) {
                        *a += v;
                    }
                    ps.push(pass);
                }
                let n = ps.len() as f64;
                for v in &mut e {
                    *v /= n;
                }
                passes.push(ps);
                embeddings.push(e);
            }

            let logits: Vec<f64> = embeddings.iter().map(|e| dot(&e_anchor, e)).collect();
            let bpr = bpr_loss_grad(logits[0], &logits[1..])?;
            total += bpr.loss;

            let mut d_logits = Vec::with_capacity(candidates.len());
            d_logits.push(bpr.d_pos);
            d_logits.extend(&bpr.d_negs);

            let mut d_anchor = vec![0.0; d];
            // d_out per (candidate, pass)
            let mut d_outs: Vec<Vec<Vec<f64>>> = Vec::with_capacity(candidates.len());
            for (k, e) in embeddings.iter().enumerate() {
                for (da, v) in d_anchor.iter_mut().zip(e) {
                    *da += d_logits[k] * v;
                }
                let n = passes[k].len() as f64;
                let d_e: Vec<f64> = e_anchor.iter().map(|a| d_logits[k] * a / n).collect();
                d_outs.push(vec![d_e; passes[k].len()]);
            }

            if drawn.len() == 2 {
                let (m1, m2) = (&drawn[0], &drawn[1]);
                let mut idx1 = Vec::new();
                let mut idx2 = Vec::new();
                let mut rows = Vec::new();
                for (k, ps) in passes.iter().enumerate() {
                    let p1 = ps.iter().position(|p| &p.modality == m1);
                    let p2 = ps.iter().position(|p| &p.modality == m2);
                    if let (Some(p1), Some(p2)) = (p1, p2) {
                        rows.push(k);
                        idx1.push(p1);
                        idx2.push(p2);
                    }
                }
                let a: Vec<Vec<f64>> = rows
                    .iter()
                    .zip(&idx1)
                    .map(|(&k, &p)| passes[k][p].output().to_vec())
                    .collect();
                let b: Vec<Vec<f64>> = rows
                    .iter()
                    .zip(&idx2)
                    .map(|(&k, &p)| passes[k][p].output().to_vec())
                    .collect();
                let ctr = sinfonce_loss_grad(&a, &b, cfg.tau)?;
                total += cfg.lambda * ctr.loss;
                for (r, &k) in rows.iter().enumerate() {
                    for (dst, g) in d_outs[k][idx1[r]].iter_mut().zip(&ctr.d_mod1[r]) {
                        *dst += cfg.lambda * g;
                    }
                    for (dst, g) in d_outs[k][idx2[r]].iter_mut().zip(&ctr.d_mod2[r]) {
                        *dst += cfg.lambda * g;
                    }
                }
            }

            for (ps, ds) in passes.iter().zip(&d_outs) {
                for (pass, d_out) in ps.iter().zip(ds) {
                    self.backward_pass(pass, d_out, grads)?;
                }
            }
            match (anchor_tape, &self.counterpart, &mut grads.counterpart) {
                (CounterpartTape::Lookup(a), Counterpart::Lookup(_), CounterpartGrads::Lookup(g)) => {
                    for (dst, v) in g[a * d..(a + 1) * d].iter_mut().zip(&d_anchor) {
                        *dst += v;
                    }
                }
                (CounterpartTape::Profile(tape), Counterpart::Profile(net), CounterpartGrads::Profile(g)) => {
                    net.backward(&tape, &d_anchor, g, false)?;
                }
                _ => return Err(Error::invalid("counterpart gradient buffer mismatch")),
            }
        }
        if !total.is_finite() {
            return Err(Error::NonFinite(format!("batch loss {total}")));
        }
        Ok(total)
    }
}

impl SiBraR {
    /// Compares the analytic gradient of [`SiBraR::batch_loss`] with central
    /// differences. Every evaluation replays the same negative and modality
    /// draws from `sample_seed`.
    pub fn check_gradients(
        &self,
        batch: &[(usize, usize)],
        view: &TrainView<'_>,
        cfg: &BatchLossConfig,
        sample_seed: u64,
        tol: f64,
        max_coords: usize,
    ) -> Result<GradCheckReport> {
        let mut grads = self.zero_grads();
        self.batch_loss(batch, view, cfg, &mut SeededRng::new(sample_seed), &mut grads)?;
        let analytic = grads.flatten();
        let params = self.flatten();
        let mut probe = self.clone();
        let mut scratch = self.zero_grads();
        let mut failure = None;
        let loss = |x: &[f64]| {
            probe.assign_flat(x).expect("same layout");
            let mut rng = SeededRng::new(sample_seed);
            match probe.batch_loss(batch, view, cfg, &mut rng, &mut scratch) {
                Ok(l) => l,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        };
        let mut pick = SeededRng::derived(sample_seed, 1);
        let report = finite_diff_check(loss, &params, &analytic, 1e-5, tol, max_coords, &mut pick);
        match failure {
            Some(e) => Err(e),
            None => Ok(report),
        }
    }
}

impl Parameterized for SiBraR {
    fn block_info(&self) -> Vec<BlockInfo> {
        let mut out = Vec::new();
        for (name, layer) in &self.projectors {
            out.extend(layer.block_info_prefixed(&format!("projector.{name}")));
        }
        out.extend(self.branch.block_info_prefixed("branch"));
        match &self.counterpart {
            Counterpart::Lookup(t) => out.push(BlockInfo::new(
                "counterpart.table",
                vec![t.n_rows(), t.dim()],
            )),
            Counterpart::Profile(n) => out.extend(n.block_info_prefixed("counterpart")),
        }
        out
    }

    fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for layer in self.projectors.values() {
            out.extend(layer.blocks());
        }
        out.extend(self.branch.blocks());
        match &self.counterpart {
            Counterpart::Lookup(t) => out.push(&t.vectors),
            Counterpart::Profile(n) => out.extend(n.blocks()),
        }
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in self.projectors.values_mut() {
            out.extend(layer.blocks_mut());
        }
        out.extend(self.branch.blocks_mut());
        match &mut self.counterpart {
            Counterpart::Lookup(t) => out.push(&mut t.vectors),
            Counterpart::Profile(n) => out.extend(n.blocks_mut()),
        }
        out
    }
}

impl Parameterized for SiBraRGrads {
    fn block_info(&self) -> Vec<BlockInfo> {
        self.info.clone()
    }

    fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for g in self.projectors.values() {
            g.push_blocks(&mut out);
        }
        self.branch.push_blocks(&mut out);
        match &self.counterpart {
            CounterpartGrads::Lookup(v) => out.push(v),
            CounterpartGrads::Profile(n) => n.push_blocks(&mut out),
        }
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for g in self.projectors.values_mut() {
            g.push_blocks_mut(&mut out);
        }
        self.branch.push_blocks_mut(&mut out);
        match &mut self.counterpart {
            CounterpartGrads::Lookup(v) => out.push(v),
            CounterpartGrads::Profile(n) => n.push_blocks_mut(&mut out),
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ModalityKind, ModalityTable, PROFILE};

    /// 6 users x 14 items; two content modalities on items, one missing for
    /// item 13, plus the profile modality.
    fn fixture(counterpart: CounterpartKind) -> (InteractionMatrix, FeatureStore, SiBraR) {
        let mut rng = SeededRng::new(11);
        let pairs: Vec<(usize, usize)> = (0..6)
            .flat_map(|u| (0..4).map(move |k| (u, (u * 2 + k * 3) % 13)))
            .collect();
        let train = InteractionMatrix::from_pairs(6, 14, pairs).unwrap();
        let mut table = |name: &str, d: usize, missing: Option<usize>| {
            let rows: Vec<Option<Vec<f64>>> = (0..14)
                .map(|i| {
                    (Some(i) != missing).then(|| (0..d).map(|_| rng.gaussian()).collect())
                })
                .collect();
            ModalityTable::from_rows(name, Side::Item, ModalityKind::Vector, d, &rows).unwrap()
        };
        let store = FeatureStore::from_tables([table("audio", 5, None), table("text", 4, Some(13))])
            .unwrap()
            .with_profile(&train, Side::Item)
            .unwrap();
        let cfg = SiBraRConfig {
            d_emb: 4,
            projector_dim: 6,
            branch_hidden: vec![5],
            counterpart,
            counterpart_hidden: vec![3],
            ..SiBraRConfig::default()
        };
        let mods = vec!["audio".into(), "text".into(), PROFILE.into()];
        let model = SiBraR::new(cfg, &mods, &store, 6, 14, 3).unwrap();
        (train, store, model)
    }

    fn batch(train: &InteractionMatrix) -> Vec<(usize, usize)> {
        train.pairs().step_by(3).collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        for counterpart in [CounterpartKind::Lookup, CounterpartKind::Profile] {
            let (train, store, model) = fixture(counterpart);
            let view = TrainView::new(Side::Item, &train, &store, Some(&model.modalities)).unwrap();
            for cfg in [
                BatchLossConfig { n_neg: 3, ..Default::default() },
                BatchLossConfig { n_neg: 3, ctr_embs: true, lambda: 0.5, tau: 0.2 },
            ] {
                let r = model
                    .check_gradients(&batch(&train), &view, &cfg, 5, 1e-4, 400)
                    .unwrap();
                assert!(r.pass, "{counterpart:?} {cfg:?}: {r:?}");
            }
        }
    }

    #[test]
    fn user_side_gradients_match() {
        let (train, _, _) = fixture(CounterpartKind::Profile);
        let mut rng = SeededRng::new(2);
        let demo = ModalityTable::new(
            "demo",
            Side::User,
            ModalityKind::Vector,
            3,
            (0..18).map(|_| rng.gaussian()).collect(),
            vec![true; 6],
        )
        .unwrap();
        let store = FeatureStore::from_tables([demo])
            .unwrap()
            .with_profile(&train, Side::User)
            .unwrap();
        let cfg = SiBraRConfig {
            side: Side::User,
            d_emb: 3,
            branch_hidden: vec![],
            counterpart_hidden: vec![4],
            ..SiBraRConfig::default()
        };
        let mods = vec!["demo".to_string(), PROFILE.to_string()];
        let model = SiBraR::new(cfg, &mods, &store, 14, 6, 9).unwrap();
        let view = TrainView::new(Side::User, &train, &store, Some(&mods)).unwrap();
        let loss = BatchLossConfig { n_neg: 2, ctr_embs: true, lambda: 0.5, tau: 0.2 };
        let r = model.check_gradients(&batch(&train), &view, &loss, 1, 1e-4, 400).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn singleton_and_pair_means() {
        let (_, store, model) = fixture(CounterpartKind::Lookup);
        let audio = store.get("audio").unwrap().row(2);
        let text = store.get("text").unwrap().row(2);
        let va = model.encode("audio", audio).unwrap();
        let vt = model.encode("text", text).unwrap();
        assert_eq!(model.embed_entity_multimodal(2, &["audio".into()], &store).unwrap(), va);
        let both = model
            .embed_entity_multimodal(2, &["text".into(), "audio".into()], &store)
            .unwrap();
        for k in 0..4 {
            assert!((both[k] - (va[k] + vt[k]) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn missing_modalities_are_dropped() {
        let (_, store, model) = fixture(CounterpartKind::Lookup);
        // item 13 has no text and no interactions
        let all = model.modalities.clone();
        let e = model.embed_entity_multimodal(13, &all, &store).unwrap();
        let direct = model.encode("audio", store.get("audio").unwrap().row(13)).unwrap();
        assert_eq!(e, direct);
        assert!(model
            .embed_entity_multimodal(13, &["text".into(), PROFILE.into()], &store)
            .is_err());
    }

    #[test]
    fn subset_order_does_not_matter() {
        let (_, store, model) = fixture(CounterpartKind::Lookup);
        let a = vec!["audio".to_string(), "text".into(), PROFILE.into()];
        let b = vec![PROFILE.to_string(), "audio".into(), "text".into()];
        for i in 0..13 {
            assert_eq!(
                model.embed_entity_multimodal(i, &a, &store).unwrap(),
                model.embed_entity_multimodal(i, &b, &store).unwrap()
            );
        }
    }

    #[test]
    fn zero_lambda_contrastive_term_adds_nothing() {
        let (train, store, model) = fixture(CounterpartKind::Lookup);
        let view = TrainView::new(Side::Item, &train, &store, Some(&model.modalities)).unwrap();
        let b = batch(&train);
        let on = BatchLossConfig { n_neg: 3, ctr_embs: true, lambda: 0.0, tau: 0.5 };
        let mut g1 = model.zero_grads();
        let l1 = model.batch_loss(&b, &view, &on, &mut SeededRng::new(4), &mut g1).unwrap();
        // the same draws with a contrastive weight change the loss
        let mut g2 = model.zero_grads();
        let l2 = model
            .batch_loss(&b, &view, &BatchLossConfig { lambda: 1.0, ..on }, &mut SeededRng::new(4), &mut g2)
            .unwrap();
        assert!(l2 > l1);
        // and a one-modality model consumes the same draws with or without it
        let only = FeatureStore::from_tables([store.get("audio").unwrap().clone()]).unwrap();
        let single = SiBraR::new(model.config.clone(), &["audio".into()], &only, 6, 14, 3).unwrap();
        let view1 = TrainView::new(Side::Item, &train, &only, Some(&single.modalities)).unwrap();
        let off = BatchLossConfig { ctr_embs: false, ..on };
        let (mut ga, mut gb) = (single.zero_grads(), single.zero_grads());
        let la = single.batch_loss(&b, &view1, &on, &mut SeededRng::new(4), &mut ga).unwrap();
        let lb = single.batch_loss(&b, &view1, &off, &mut SeededRng::new(4), &mut gb).unwrap();
        assert_eq!(la, lb);
        assert_eq!(ga.flatten(), gb.flatten());
    }

    #[test]
    fn modality_draws_skip_when_all_taken() {
        let mut a = SeededRng::new(1);
        let b = SeededRng::new(1);
        let picked = sample_modalities(&["y".into(), "x".into()], 2, &mut a);
        assert_eq!(picked, vec!["x".to_string(), "y".into()]);
        assert_eq!(a.clone().next_u64(), b.clone().next_u64());
    }

    #[test]
    fn parameter_blocks_round_trip() {
        let (_, _, mut model) = fixture(CounterpartKind::Profile);
        let flat = model.flatten();
        let doubled: Vec<f64> = flat.iter().map(|v| 2.0 * v).collect();
        model.assign_flat(&doubled).unwrap();
        assert_eq!(model.flatten(), doubled);
        assert_eq!(model.zero_grads().n_params(), flat.len());
        let names: Vec<String> = model.block_info().into_iter().map(|b| b.name).collect();
        assert_eq!(names[0], "projector.audio.weight");
        assert!(names.contains(&"counterpart.1.bias".to_string()));
    }

    #[test]
    fn non_training_pair_is_rejected() {
        let (train, store, model) = fixture(CounterpartKind::Lookup);
        let view = TrainView::new(Side::Item, &train, &store, Some(&model.modalities)).unwrap();
        let mut g = model.zero_grads();
        let bad = (0..14).find(|&i| !train.contains(0, i)).unwrap();
        assert!(model
            .batch_loss(&[(0, bad)], &view, &BatchLossConfig::default(), &mut SeededRng::new(0), &mut g)
            .is_err());
    }
}
