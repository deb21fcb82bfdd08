//! Ranking and contrastive objectives.
//!
//! Both losses are in minimisation form. BPR is the sum over negatives of
//! `-ln sigmoid(pos - neg)`; symmetric InfoNCE is the sum of the two
//! directional cross-entropies that pick out the positive among
//! `{positive} U negatives` from raw dot products divided by the temperature.

use serde::{Deserialize, Serialize};

use crate::data::InteractionMatrix;
use crate::model::sibrar::{SiBraR, SiBraRGrads, TrainView};
use crate::numerics::{dot, SeededRng};
use crate::{Error, Result};

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("{what}[{i}] = {}", values[i]))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BprGrad {
    pub loss: f64,
    pub d_pos: f64,
    pub d_negs: Vec<f64>,
}

/// `sum_k softplus(neg_k - pos)`, i.e. `-sum_k ln sigmoid(pos - neg_k)`.
pub fn bpr_loss(pos_logit: f64, neg_logits: &[f64]) -> Result<f64> {
    bpr_loss_grad(pos_logit, neg_logits).map(|g| g.loss)
}

pub fn bpr_loss_grad(pos_logit: f64, neg_logits: &[f64]) -> Result<BprGrad> {
    if neg_logits.is_empty() {
        return Err(Error::invalid("bpr needs at least one negative"));
    }
    check_finite(&[pos_logit], "positive logit")?;
    check_finite(neg_logits, "negative logits")?;
    let mut loss = 0.0;
    let mut d_pos = 0.0;
    let d_negs = neg_logits
        .iter()
        .map(|&neg| {
            let margin = pos_logit - neg;
            loss += softplus(-margin);
            let s = sigmoid(-margin);
            d_pos -= s;
            s
        })
        .collect();
    Ok(BprGrad {
        loss,
        d_pos,
        d_negs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfoNceGrad {
    pub loss: f64,
    pub d_mod1: Vec<Vec<f64>>,
    pub d_mod2: Vec<Vec<f64>>,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// One direction: anchor `a[0]` against candidates `b`, positive at index 0.
/// Accumulates gradients into `d_a[0]` and every `d_b[k]`.
fn info_nce_direction(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    tau: f64,
    d_a: &mut [Vec<f64>],
    d_b: &mut [Vec<f64>],
) -> f64 {
    let anchor = &a[0];
    let logits: Vec<f64> = b.iter().map(|bk| dot(anchor, bk) / tau).collect();
    let lse = log_sum_exp(&logits);
    for (k, bk) in b.iter().enumerate() {
        let p = (logits[k] - lse).exp();
        let coeff = (p - if k == 0 { 1.0 } else { 0.0 }) / tau;
        for (d, v) in d_a[0].iter_mut().zip(bk) {
            *d += coeff * v;
        }
        for (d, v) in d_b[k].iter_mut().zip(anchor) {
            *d += coeff * v;
        }
    }
    lse - logits[0]
}

/// Symmetric InfoNCE between two modality embeddings of the same candidate
/// list (index 0 is the positive item).
pub fn sinfonce_loss(mod1: &[Vec<f64>], mod2: &[Vec<f64>], tau: f64) -> Result<f64> {
    sinfonce_loss_grad(mod1, mod2, tau).map(|g| g.loss)
}

pub fn sinfonce_loss_grad(mod1: &[Vec<f64>], mod2: &[Vec<f64>], tau: f64) -> Result<InfoNceGrad> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("temperature must be positive, got {tau}")));
    }
    if mod1.len() != mod2.len() {
        return Err(Error::Dimension {
            expected: mod1.len(),
            actual: mod2.len(),
            context: "contrastive candidate lists".into(),
        });
    }
    if mod1.is_empty() {
        return Err(Error::invalid("contrastive lists are empty"));
    }
    let d = mod1[0].len();
    if mod1.iter().chain(mod2).any(|v| v.len() != d) {
        return Err(Error::invalid("contrastive embeddings differ in dimension"));
    }
    for v in mod1.iter().chain(mod2) {
        check_finite(v, "contrastive embedding")?;
    }
    let mut d_mod1 = vec![vec![0.0; d]; mod1.len()];
    let mut d_mod2 = vec![vec![0.0; d]; mod2.len()];
    let l12 = info_nce_direction(mod1, mod2, tau, &mut d_mod1, &mut d_mod2);
    let l21 = info_nce_direction(mod2, mod1, tau, &mut d_mod2, &mut d_mod1);
    Ok(InfoNceGrad {
        loss: l12 + l21,
        d_mod1,
        d_mod2,
    })
}

/// Inputs of the composite batch loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchLossConfig {
    pub n_neg: usize,
    /// Apply the contrastive term (two modalities per interaction).
    pub ctr_embs: bool,
    /// Contrastive weight.
    pub lambda: f64,
    /// Contrastive temperature.
    pub tau: f64,
}

impl Default for BatchLossConfig {
    fn default() -> Self {
        Self {
            n_neg: 10,
            ctr_embs: false,
            lambda: 0.0,
            tau: 1.0,
        }
    }
}

impl BatchLossConfig {
    pub fn n_mod(&self) -> usize {
        if self.ctr_embs {
            2
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_neg < 1 {
            return Err(Error::invalid("n_neg must be at least 1"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::invalid(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::invalid(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Loss of one batch of `(user, item)` training interactions under the
/// single-branch model, accumulating parameter gradients into `grads`.
///
/// The returned value is `L_bpr + lambda * L_sinfonce`, summed (not averaged)
/// over the batch. See [`SiBraR::batch_loss`] for the sampling order.
pub fn batch_loss(
    batch: &[(usize, usize)],
    model: &SiBraR,
    view: &TrainView<'_>,
    cfg: &BatchLossConfig,
    rng: &mut SeededRng,
    grads: &mut SiBraRGrads,
) -> Result<f64> {
    model.batch_loss(batch, view, cfg, rng, grads)
}

/// Checks the batch against the training matrix it claims to come from.
pub fn check_batch(batch: &[(usize, usize)], train: &InteractionMatrix) -> Result<()> {
    for &(u, i) in batch {
        if u >= train.n_users() || i >= train.n_items() || !train.contains(u, i) {
            return Err(Error::invalid(format!(
                "({u}, {i}) is not a training interaction"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_logits_give_n_ln2() {
        let l = bpr_loss(0.3, &[0.3; 10]).unwrap();
        assert!((l - 10.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn unit_margin() {
        let l = bpr_loss(1.0, &[0.0; 10]).unwrap();
        // softplus(-1) = ln(1 + e^-1) = 0.31326168751822286
        assert!((l - 3.132_616_875_182_228_6).abs() < 1e-12, "{l}");
    }

    #[test]
    fn large_margin_vanishes() {
        let l = bpr_loss(1e6, &[0.0; 5]).unwrap();
        assert!(l >= 0.0 && l < 1e-300);
        let huge = bpr_loss(-1e6, &[0.0]).unwrap();
        assert!((huge - 1e6).abs() < 1e-6);
    }

    #[test]
    fn bpr_rejects_bad_input() {
        assert!(bpr_loss(0.0, &[]).is_err());
        assert!(bpr_loss(f64::NAN, &[0.0]).is_err());
        assert!(bpr_loss(0.0, &[f64::INFINITY]).is_err());
    }

    #[test]
    fn bpr_monotone_and_translation_invariant() {
        let negs = [0.2, -0.4, 1.1];
        let base = bpr_loss(0.5, &negs).unwrap();
        assert!(bpr_loss(0.6, &negs).unwrap() < base);
        let mut bumped = negs;
        bumped[1] += 0.1;
        assert!(bpr_loss(0.5, &bumped).unwrap() > base);
        let shifted: Vec<f64> = negs.iter().map(|v| v + 7.0).collect();
        assert!((bpr_loss(7.5, &shifted).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn identical_embeddings_give_two_ln_eleven() {
        let v = vec![vec![0.3, -0.2, 0.9]; 11];
        let l = sinfonce_loss(&v, &v, 1.0).unwrap();
        assert!((l - 2.0 * 11f64.ln()).abs() < 1e-12);
        assert!((2.0 * 11f64.ln() - 4.795_790_545_596_741).abs() < 1e-12);
    }

    #[test]
    fn separated_positive_vanishes() {
        let c = 1e3;
        let mut m1 = vec![vec![c, 0.0, 0.0]];
        let mut m2 = vec![vec![c, 0.0, 0.0]];
        for k in 0..4 {
            let mut v = vec![0.0; 3];
            v[1 + k % 2] = 1.0;
            m1.push(v.clone());
            m2.push(v);
        }
        let l = sinfonce_loss(&m1, &m2, 0.5).unwrap();
        assert!(l < 1e-12, "{l}");
    }

    #[test]
    fn sinfonce_symmetric_in_modalities() {
        let mut rng = SeededRng::new(8);
        let draw = |rng: &mut SeededRng| -> Vec<Vec<f64>> {
            (0..6).map(|_| (0..4).map(|_| rng.gaussian()).collect()).collect()
        };
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let ab = sinfonce_loss(&a, &b, 0.3).unwrap();
        let ba = sinfonce_loss(&b, &a, 0.3).unwrap();
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn sinfonce_errors() {
        let v = vec![vec![1.0]; 3];
        assert!(sinfonce_loss(&v, &v, 0.0).is_err());
        assert!(sinfonce_loss(&v, &v[..2], 1.0).is_err());
    }

    #[test]
    fn bpr_gradient_matches_differences() {
        let negs = [0.3, -1.2, 2.0];
        let g = bpr_loss_grad(0.7, &negs).unwrap();
        let h = 1e-6;
        let num_pos = (bpr_loss(0.7 + h, &negs).unwrap() - bpr_loss(0.7 - h, &negs).unwrap()) / (2.0 * h);
        assert!((num_pos - g.d_pos).abs() < 1e-8);
        for k in 0..3 {
            let mut p = negs;
            let mut m = negs;
            p[k] += h;
            m[k] -= h;
            let num = (bpr_loss(0.7, &p).unwrap() - bpr_loss(0.7, &m).unwrap()) / (2.0 * h);
            assert!((num - g.d_negs[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn sinfonce_gradient_matches_differences() {
        let mut rng = SeededRng::new(21);
        let draw = |rng: &mut SeededRng| -> Vec<Vec<f64>> {
            (0..4).map(|_| (0..3).map(|_| rng.gaussian()).collect()).collect()
        };
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let g = sinfonce_loss_grad(&a, &b, 0.4).unwrap();
        let h = 1e-6;
        for k in 0..4 {
            for c in 0..3 {
                let mut ap = a.clone();
                let mut am = a.clone();
                ap[k][c] += h;
                am[k][c] -= h;
                let num = (sinfonce_loss(&ap, &b, 0.4).unwrap() - sinfonce_loss(&am, &b, 0.4).unwrap())
                    / (2.0 * h);
                assert!((num - g.d_mod1[k][c]).abs() < 1e-7);
                let mut bp = b.clone();
                let mut bm = b.clone();
                bp[k][c] += h;
                bm[k][c] -= h;
                let num = (sinfonce_loss(&a, &bp, 0.4).unwrap() - sinfonce_loss(&a, &bm, 0.4).unwrap())
                    / (2.0 * h);
                assert!((num - g.d_mod2[k][c]).abs() < 1e-7);
            }
        }
    }
}
