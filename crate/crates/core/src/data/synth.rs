//! Synthetic multimodal datasets with a known latent structure.
//!
//! Users and items get standard-normal latent factors `p` and `q`. Every user
//! interacts with their `interactions_per_user` highest-scoring items under
//! `p . q` (ties to the lower index). A modality of dimension `d` is the
//! factor matrix pushed through a random orthonormal map plus gaussian noise,
//! so a lower `noise_std` gives a more informative modality.

use serde::{Deserialize, Serialize};

use super::interactions::{InteractionMatrix, Side};
use super::modality::{ModalityKind, ModalityTable};
use crate::numerics::{dot, SeededRng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticModality {
    pub name: String,
    pub dim: usize,
    pub noise_std: f64,
    #[serde(default = "default_side")]
    pub side: Side,
}

fn default_side() -> Side {
    Side::Item
}

impl SyntheticModality {
    pub fn item(name: impl Into<String>, dim: usize, noise_std: f64) -> Self {
        Self {
            name: name.into(),
            dim,
            noise_std,
            side: Side::Item,
        }
    }

    pub fn user(name: impl Into<String>, dim: usize, noise_std: f64) -> Self {
        Self {
            side: Side::User,
            ..Self::item(name, dim, noise_std)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub latent_dim: usize,
    pub interactions_per_user: usize,
    pub modalities: Vec<SyntheticModality>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim < 1 {
            return Err(Error::invalid("latent_dim must be at least 1"));
        }
        if self.n_users == 0 || self.n_items == 0 {
            return Err(Error::invalid("need at least one user and one item"));
        }
        if self.interactions_per_user > self.n_items {
            return Err(Error::invalid(format!(
                "interactions_per_user {} exceeds n_items {}",
                self.interactions_per_user, self.n_items
            )));
        }
        for m in &self.modalities {
            if !(m.noise_std >= 0.0) || !m.noise_std.is_finite() {
                return Err(Error::invalid(format!(
                    "modality '{}' has invalid noise_std {}",
                    m.name, m.noise_std
                )));
            }
            if m.dim == 0 {
                return Err(Error::invalid(format!("modality '{}' has dim 0", m.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub interactions: InteractionMatrix,
    pub modalities: Vec<ModalityTable>,
    pub user_factors: Vec<Vec<f64>>,
    pub item_factors: Vec<Vec<f64>>,
}

impl SyntheticData {
    /// Modalities of one side.
    pub fn modalities_for(&self, side: Side) -> Vec<ModalityTable> {
        self.modalities
            .iter()
            .filter(|m| m.side == side)
            .cloned()
            .collect()
    }

    /// Ground-truth affinity `p_u . q_i`.
    pub fn true_score(&self, user: usize, item: usize) -> f64 {
        dot(&self.user_factors[user], &self.item_factors[item])
    }
}

/// `rows x cols` matrix whose columns (if `rows >= cols`) or rows (otherwise)
/// are orthonormal, from Gram-Schmidt on a gaussian draw.
fn random_orthonormal(rows: usize, cols: usize, rng: &mut SeededRng) -> Vec<Vec<f64>> {
    let (long, short) = (rows.max(cols), rows.min(cols));
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
    while basis.len() < short {
        let mut v: Vec<f64> = (0..long).map(|_| rng.gaussian()).collect();
        for b in &basis {
            let proj = dot(&v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= proj * y;
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm < 1e-8 {
            continue;
        }
        for x in &mut v {
            *x /= norm;
        }
        basis.push(v);
    }
    // basis vectors live in R^long; lay them out as columns of a long x short
    // matrix, then transpose if the caller wanted the wide shape
    if rows >= cols {
        (0..rows)
            .map(|r| (0..cols).map(|c| basis[c][r]).collect())
            .collect()
    } else {
        basis
    }
}

pub fn synth_generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut factor_rng = SeededRng::derived(spec.seed, 1);
    let mut draw = |n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..spec.latent_dim).map(|_| factor_rng.gaussian()).collect())
            .collect()
    };
    let user_factors = draw(spec.n_users);
    let item_factors = draw(spec.n_items);

    let k = spec.interactions_per_user;
    let mut pairs = Vec::with_capacity(spec.n_users * k);
    let mut order: Vec<usize> = (0..spec.n_items).collect();
    for (u, p) in user_factors.iter().enumerate() {
        let scores: Vec<f64> = item_factors.iter().map(|q| dot(p, q)).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        pairs.extend(order[..k].iter().map(|&i| (u, i)));
    }
    let interactions = InteractionMatrix::from_pairs(spec.n_users, spec.n_items, pairs)?;

    let mut modalities = Vec::with_capacity(spec.modalities.len());
    for (idx, m) in spec.modalities.iter().enumerate() {
        let mut rng = SeededRng::derived(spec.seed, 100 + idx as u64);
        // latent_dim x dim map
        let map = random_orthonormal(spec.latent_dim, m.dim, &mut rng);
        let factors = match m.side {
            Side::User => &user_factors,
            Side::Item => &item_factors,
        };
        let mut features = Vec::with_capacity(factors.len() * m.dim);
        for f in factors {
            for c in 0..m.dim {
                let clean: f64 = (0..spec.latent_dim).map(|l| f[l] * map[l][c]).sum();
                features.push(clean + m.noise_std * rng.gaussian());
            }
        }
        modalities.push(ModalityTable::new(
            m.name.clone(),
            m.side,
            ModalityKind::Vector,
            m.dim,
            features,
            vec![true; factors.len()],
        )?);
    }

    Ok(SyntheticData {
        interactions,
        modalities,
        user_factors,
        item_factors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            n_users: 30,
            n_items: 40,
            latent_dim: 4,
            interactions_per_user: 6,
            modalities: vec![SyntheticModality::item("clean", 6, 0.0)],
            seed: 3,
        }
    }

    #[test]
    fn every_user_gets_k_items() {
        let d = synth_generate(&spec()).unwrap();
        assert!(d.interactions.user_counts().iter().all(|&c| c == 6));
        let again = synth_generate(&spec()).unwrap();
        assert_eq!(d.interactions, again.interactions);
        assert_eq!(d.modalities, again.modalities);
    }

    #[test]
    fn noiseless_modality_is_exact_linear_image() {
        let d = synth_generate(&spec()).unwrap();
        let table = &d.modalities[0];
        // the map has orthonormal rows (dim >= latent), so a . W^T recovers q;
        // least squares of q on a therefore has zero residual: solve it
        // directly via normal equations on the 6-dim features
        let n = d.item_factors.len();
        let a: Vec<&[f64]> = (0..n).map(|i| table.row(i)).collect();
        let ata = nalgebra::DMatrix::<f64>::from_fn(6, 6, |r, c| (0..n).map(|i| a[i][r] * a[i][c]).sum::<f64>());
        let pinv = ata.clone().pseudo_inverse(1e-10).unwrap();
        for l in 0..4 {
            let aty = nalgebra::DVector::<f64>::from_fn(6, |r, _| {
                (0..n).map(|i| a[i][r] * d.item_factors[i][l]).sum::<f64>()
            });
            let coef: nalgebra::DVector<f64> = &pinv * aty;
            let resid: f64 = (0..n)
                .map(|i| {
                    let fit: f64 = (0..6).map(|r| a[i][r] * coef[r]).sum();
                    (fit - d.item_factors[i][l]).powi(2)
                })
                .sum();
            assert!(resid < 1e-18, "residual {resid}");
        }
    }

    #[test]
    fn identical_users_get_identical_rows() {
        let mut d = synth_generate(&spec()).unwrap();
        d.user_factors[1] = d.user_factors[0].clone();
        // rerun the top-k rule by hand with the shared factor
        let top = |p: &[f64]| {
            let mut order: Vec<usize> = (0..d.item_factors.len()).collect();
            order.sort_by(|&a, &b| {
                dot(p, &d.item_factors[b])
                    .total_cmp(&dot(p, &d.item_factors[a]))
                    .then(a.cmp(&b))
            });
            let mut t = order[..6].to_vec();
            t.sort_unstable();
            t
        };
        assert_eq!(top(&d.user_factors[0]), top(&d.user_factors[1]));
        assert_eq!(top(&d.user_factors[0]), d.interactions.row(0));
    }

    #[test]
    fn orthonormal_shapes() {
        let mut rng = SeededRng::new(1);
        for (r, c) in [(4, 8), (8, 4), (5, 5)] {
            let m = random_orthonormal(r, c, &mut rng);
            assert_eq!(m.len(), r);
            assert!(m.iter().all(|row| row.len() == c));
            if r <= c {
                for a in 0..r {
                    for b in 0..r {
                        let d = dot(&m[a], &m[b]);
                        assert!((d - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec();
        s.interactions_per_user = 41;
        assert!(synth_generate(&s).is_err());
        let mut s = spec();
        s.latent_dim = 0;
        assert!(synth_generate(&s).is_err());
        let mut s = spec();
        s.modalities[0].noise_std = -1.0;
        assert!(synth_generate(&s).is_err());
    }
}
