//! Matrix factorisation, DeepMF, popularity and random baselines.

use serde::{Deserialize, Serialize};

use super::table::EmbeddingTable;
use super::EmbeddingScorer;
use super::Scorer;
use crate::data::InteractionMatrix;
use crate::losses::{bpr_loss_grad, BatchLossConfig};
use crate::model::sibrar::TrainView;
use crate::numerics::{
    derive_seed, dot, BlockInfo, Network, NetworkGrads, Parameterized, SeededRng,
};
use crate::training::negatives::sample_negatives_from;
use crate::{Error, Result};

/// BPR matrix factorisation: user and item lookup tables scored by dot
/// product.
#[derive(Debug, Clone, PartialEq)]
pub struct Mf {
    pub users: EmbeddingTable,
    pub items: EmbeddingTable,
}

#[derive(Debug, Clone)]
pub struct MfGrads {
    pub users: Vec<f64>,
    pub items: Vec<f64>,
    dims: (usize, usize, usize),
}

impl Mf {
    /// Entries from `N(0, 0.1^2)`.
    pub fn new(n_users: usize, n_items: usize, d_emb: usize, seed: u64) -> Self {
        let mut rng = SeededRng::derived(seed, 0x5eed);
        let users = EmbeddingTable::gaussian(n_users, d_emb, 0.1, &mut rng);
        let items = EmbeddingTable::gaussian(n_items, d_emb, 0.1, &mut rng);
        Self { users, items }
    }

    pub fn d_emb(&self) -> usize {
        self.users.dim()
    }

    pub fn zero_grads(&self) -> MfGrads {
        MfGrads {
            users: vec![0.0; self.users.vectors.len()],
            items: vec![0.0; self.items.vectors.len()],
            dims: (self.users.n_rows(), self.items.n_rows(), self.d_emb()),
        }
    }

    /// BPR over `n_neg` uniform negatives per interaction. Only the negative
    /// draws consume `rng`.
    pub fn batch_loss(
        &self,
        batch: &[(usize, usize)],
        view: &TrainView<'_>,
        cfg: &BatchLossConfig,
        rng: &mut SeededRng,
        grads: &mut MfGrads,
    ) -> Result<f64> {
        let d = self.d_emb();
        let mut total = 0.0;
        for &(u, i) in batch {
            if !view.oriented.contains(u, i) {
                return Err(Error::invalid(format!("({u}, {i}) is not a training interaction")));
            }
            let negs = sample_negatives_from(&view.negative_pool, view.oriented.row(u), cfg.n_neg, rng)?;
            let p = self.users.row(u);
            let pos = dot(p, self.items.row(i));
            let neg: Vec<f64> = negs.iter().map(|&j| dot(p, self.items.row(j))).collect();
            let g = bpr_loss_grad(pos, &neg)?;
            total += g.loss;
            let gu = &mut grads.users[u * d..(u + 1) * d];
            for (k, dst) in gu.iter_mut().enumerate() {
                *dst += g.d_pos * self.items.row(i)[k]
                    + negs
                        .iter()
                        .zip(&g.d_negs)
                        .map(|(&j, dn)| dn * self.items.row(j)[k])
                        .sum::<f64>();
            }
            for (k, &pk) in p.iter().enumerate() {
                grads.items[i * d + k] += g.d_pos * pk;
            }
            for (&j, dn) in negs.iter().zip(&g.d_negs) {
                for (k, &pk) in p.iter().enumerate() {
                    grads.items[j * d + k] += dn * pk;
                }
            }
        }
        Ok(total)
    }

    pub fn scorer(&self) -> EmbeddingScorer {
        EmbeddingScorer::new(self.d_emb(), self.users.vectors.clone(), self.items.vectors.clone())
    }
}

impl Parameterized for Mf {
    fn block_info(&self) -> Vec<BlockInfo> {
        vec![
            BlockInfo::new("users", vec![self.users.n_rows(), self.d_emb()]),
            BlockInfo::new("items", vec![self.items.n_rows(), self.d_emb()]),
        ]
    }

    fn blocks(&self) -> Vec<&[f64]> {
        vec![&self.users.vectors, &self.items.vectors]
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.users.vectors, &mut self.items.vectors]
    }
}

impl Parameterized for MfGrads {
    fn block_info(&self) -> Vec<BlockInfo> {
        let (nu, ni, d) = self.dims;
        vec![
            BlockInfo::new("users", vec![nu, d]),
            BlockInfo::new("items", vec![ni, d]),
        ]
    }

    fn blocks(&self) -> Vec<&[f64]> {
        vec![&self.users, &self.items]
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.users, &mut self.items]
    }
}

/// Two-tower model over interaction profiles: a user's item row and an item's
/// user column each go through their own MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepMf {
    pub user_net: Network,
    pub item_net: Network,
}

#[derive(Debug, Clone)]
pub struct DeepMfGrads {
    info: Vec<BlockInfo>,
    pub user_net: NetworkGrads,
    pub item_net: NetworkGrads,
}

impl DeepMf {
    pub fn new(n_users: usize, n_items: usize, hidden: &[usize], d_emb: usize, seed: u64) -> Result<Self> {
        let mut rng = SeededRng::derived(seed, 0x5eed);
        let sizes = |d_in: usize| {
            let mut s = vec![d_in];
            s.extend(hidden);
            s.push(d_emb);
            s
        };
        Ok(Self {
            user_net: Network::mlp(&sizes(n_items), true, &mut rng)?,
            item_net: Network::mlp(&sizes(n_users), true, &mut rng)?,
        })
    }

    pub fn zero_grads(&self) -> DeepMfGrads {
        DeepMfGrads {
            info: self.block_info(),
            user_net: self.user_net.zero_grads(),
            item_net: self.item_net.zero_grads(),
        }
    }

    pub fn batch_loss(
        &self,
        batch: &[(usize, usize)],
        view: &TrainView<'_>,
        cfg: &BatchLossConfig,
        rng: &mut SeededRng,
        grads: &mut DeepMfGrads,
    ) -> Result<f64> {
        let r = &view.oriented;
        let mut total = 0.0;
        for &(u, i) in batch {
            if !r.contains(u, i) {
                return Err(Error::invalid(format!("({u}, {i}) is not a training interaction")));
            }
            let negs = sample_negatives_from(&view.negative_pool, r.row(u), cfg.n_neg, rng)?;
            let ut = self.user_net.forward_tape(&dense(r.row(u), r.n_items()))?;
            let mut tapes = Vec::with_capacity(1 + negs.len());
            for &j in std::iter::once(&i).chain(&negs) {
                tapes.push(self.item_net.forward_tape(&dense(r.col(j), r.n_users()))?);
            }
            let p = ut.output();
            let logits: Vec<f64> = tapes.iter().map(|t| dot(p, t.output())).collect();
            let g = bpr_loss_grad(logits[0], &logits[1..])?;
            total += g.loss;
            let mut dp = vec![0.0; p.len()];
            for (k, tape) in tapes.iter().enumerate() {
                let dl = if k == 0 { g.d_pos } else { g.d_negs[k - 1] };
                for (a, q) in dp.iter_mut().zip(tape.output()) {
                    *a += dl * q;
                }
                let dq: Vec<f64> = p.iter().map(|x| dl * x).collect();
                self.item_net.backward(tape, &dq, &mut grads.item_net, false)?;
            }
            self.user_net.backward(&ut, &dp, &mut grads.user_net, false)?;
        }
        Ok(total)
    }

    pub fn scorer(&self, train: &InteractionMatrix) -> Result<EmbeddingScorer> {
        let d = self.user_net.d_out();
        let mut users = Vec::with_capacity(train.n_users() * d);
        for u in 0..train.n_users() {
            users.extend(self.user_net.forward(&dense(train.row(u), train.n_items()))?);
        }
        let mut items = Vec::with_capacity(train.n_items() * d);
        for i in 0..train.n_items() {
            items.extend(self.item_net.forward(&dense(train.col(i), train.n_users()))?);
        }
        Ok(EmbeddingScorer::new(d, users, items))
    }
}

fn dense(indices: &[usize], n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for &i in indices {
        x[i] = 1.0;
    }
    x
}

impl Parameterized for DeepMf {
    fn block_info(&self) -> Vec<BlockInfo> {
        let mut out = self.user_net.block_info_prefixed("user_net");
        out.extend(self.item_net.block_info_prefixed("item_net"));
        out
    }

    fn blocks(&self) -> Vec<&[f64]> {
        let mut out = self.user_net.blocks();
        out.extend(self.item_net.blocks());
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.user_net.blocks_mut();
        out.extend(self.item_net.blocks_mut());
        out
    }
}

impl Parameterized for DeepMfGrads {
    fn block_info(&self) -> Vec<BlockInfo> {
        self.info.clone()
    }

    fn blocks(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        self.user_net.push_blocks(&mut out);
        self.item_net.push_blocks(&mut out);
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        self.user_net.push_blocks_mut(&mut out);
        self.item_net.push_blocks_mut(&mut out);
        out
    }
}

/// Scores every item by its training interaction count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Popularity {
    counts: Vec<f64>,
    n_users: usize,
}

impl Popularity {
    pub fn fit(train: &InteractionMatrix) -> Self {
        Self {
            counts: train.item_counts().into_iter().map(|c| c as f64).collect(),
            n_users: train.n_users(),
        }
    }
}

impl Scorer for Popularity {
    fn n_users(&self) -> usize {
        self.n_users
    }

    fn n_items(&self) -> usize {
        self.counts.len()
    }

    fn score(&self, _user: usize, item: usize) -> f64 {
        self.counts[item]
    }
}

/// Uniform random scores, a pure function of `(seed, user, item)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomScorer {
    pub seed: u64,
    pub n_users: usize,
    pub n_items: usize,
}

impl Scorer for RandomScorer {
    fn n_users(&self) -> usize {
        self.n_users
    }

    fn n_items(&self) -> usize {
        self.n_items
    }

    fn score(&self, user: usize, item: usize) -> f64 {
        let bits = derive_seed(derive_seed(self.seed, user as u64), item as u64);
        (bits >> 11) as f64 / (1u64 << 53) as f64
    }
}
