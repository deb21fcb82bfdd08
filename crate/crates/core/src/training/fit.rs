//! The epoch loop.
//!
//! Randomness: model initialisation draws from the run seed; epoch `e`
//! (1-based) shuffles the training interactions with stream `2e` and draws
//! negatives and modalities with stream `2e + 1`, both derived from the run
//! seed.

use serde::{Deserialize, Serialize};

use super::config::{model_features, ModelKind, TrainConfig};
use crate::data::{FeatureStore, Side, SplitBundle};
use crate::evaluation::{evaluate, EvalContext};
use crate::model::{DeepMf, Mf, Popularity, RandomScorer, SiBraR, Trainable, TrainView, TrainedModel};
use crate::numerics::{AdamConfig, OptimizerState, Parameterized, SeededRng};
use crate::{Error, Result};

/// Cutoff used for model selection.
pub const VALIDATION_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_ndcg: f64,
}

/// Patience-based stopping on a metric to maximise.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    max_epochs: usize,
    epoch: usize,
    best: Option<f64>,
    best_epoch: usize,
    bad_epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub improved: bool,
    pub stop: bool,
}

impl EarlyStopping {
    pub fn new(patience: usize, max_epochs: usize) -> Self {
        Self {
            patience,
            max_epochs,
            epoch: 0,
            best: None,
            best_epoch: 0,
            bad_epochs: 0,
        }
    }

    /// Records the next epoch's metric. Only a strict improvement resets the
    /// patience counter; a non-finite metric never improves.
    pub fn observe(&mut self, metric: f64) -> Observation {
        self.epoch += 1;
        let improved = metric.is_finite() && self.best.is_none_or(|b| metric > b);
        if improved {
            self.best = Some(metric);
            self.best_epoch = self.epoch;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
        }
        Observation {
            improved,
            stop: self.bad_epochs >= self.patience || self.epoch >= self.max_epochs,
        }
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }
}

#[derive(Debug, Clone)]
pub struct FitResult<T> {
    /// Weights from `best_epoch`.
    pub model: T,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub best_val_ndcg: f64,
}

/// Trains `model` on `bundle.train`, validating on `bundle.valid` under the
/// bundle's protocol after every epoch.
pub fn fit<T: Trainable>(
    mut model: T,
    bundle: &SplitBundle,
    features: &FeatureStore,
    cfg: &TrainConfig,
) -> Result<FitResult<T>> {
    cfg.validate()?;
    if bundle.train.is_empty() {
        return Err(Error::invalid("training matrix is empty"));
    }
    let loss_cfg = cfg.loss_config();
    let mods = model.view_modalities();
    let view = TrainView::new(model.view_side(), &bundle.train, features, mods.as_deref())?;
    // interactions whose target has none of the training modalities cannot
    // be embedded and are left out
    let mut trainable = vec![false; view.n_targets()];
    for &t in &view.negative_pool {
        trainable[t] = true;
    }
    let pairs: Vec<(usize, usize)> = bundle
        .train
        .pairs()
        .filter(|&(u, i)| trainable[view.orient(u, i).1])
        .collect();
    if pairs.is_empty() {
        return Err(Error::invalid("no training interaction has an available training modality"));
    }
    let mut opt = OptimizerState::new(AdamConfig::new(cfg.lr, cfg.weight_decay), &model);
    let mut grads = model.new_grads();
    let mut stopper = EarlyStopping::new(cfg.patience, cfg.max_epochs);
    let mut best = model.clone();
    let mut history = Vec::new();

    loop {
        let epoch = stopper.epoch() + 1;
        let mut order = pairs.clone();
        SeededRng::derived(cfg.seed, 2 * epoch as u64).shuffle(&mut order);
        let mut rng = SeededRng::derived(cfg.seed, 2 * epoch as u64 + 1);
        let mut total = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            grads.zero();
            let loss = match model.batch_loss(batch, &view, &loss_cfg, &mut rng, &mut grads) {
                Ok(l) if l.is_finite() => l,
                Ok(l) => return Err(Error::Diverged { epoch, batch: b, loss: l }),
                Err(Error::NonFinite(_)) => {
                    return Err(Error::Diverged { epoch, batch: b, loss: f64::NAN })
                }
                Err(e) => return Err(e),
            };
            if !grads.all_finite() {
                return Err(Error::Diverged { epoch, batch: b, loss });
            }
            opt.step(&mut model, &grads)?;
            total += loss;
        }
        let scorer = model.embeddings(&bundle.train, features)?;
        let report = evaluate(
            &scorer,
            &bundle.train,
            &bundle.valid,
            bundle.kind,
            VALIDATION_K,
            EvalContext::default(),
        )?;
        let record = EpochRecord {
            epoch,
            train_loss: total / pairs.len() as f64,
            val_ndcg: report.ndcg(),
        };
        history.push(record);
        let obs = stopper.observe(record.val_ndcg);
        if obs.improved {
            best = model.clone();
        }
        if obs.stop {
            break;
        }
    }
    Ok(FitResult {
        model: best,
        best_epoch: stopper.best_epoch(),
        stopped_epoch: stopper.epoch(),
        best_val_ndcg: stopper.best().unwrap_or(f64::NAN),
        history,
    })
}

/// Builds the untrained model described by `cfg`. `features` must already
/// hold the modalities the model needs (see [`model_features`]).
pub fn build_model(cfg: &TrainConfig, bundle: &SplitBundle, features: &FeatureStore) -> Result<TrainedModel> {
    cfg.validate()?;
    let (nu, ni) = (bundle.n_users(), bundle.n_items());
    Ok(match cfg.model {
        ModelKind::Sibrar => {
            let (n_anchors, n_targets) = match cfg.side {
                Side::Item => (nu, ni),
                Side::User => (ni, nu),
            };
            TrainedModel::SiBraR(SiBraR::new(
                cfg.sibrar_config(),
                &cfg.training_modalities,
                features,
                n_anchors,
                n_targets,
                cfg.seed,
            )?)
        }
        ModelKind::Mf => TrainedModel::Mf(Mf::new(nu, ni, cfg.d_emb, cfg.seed)),
        ModelKind::Deepmf => TrainedModel::DeepMf(DeepMf::new(
            nu,
            ni,
            &cfg.counterpart_hidden,
            cfg.d_emb,
            cfg.seed,
        )?),
        ModelKind::Pop => TrainedModel::Pop(Popularity::fit(&bundle.train)),
        ModelKind::Rand => TrainedModel::Rand(RandomScorer {
            seed: cfg.seed,
            n_users: nu,
            n_items: ni,
        }),
    })
}

/// Result of [`fit_config`]; parameter-free models have an empty history.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: TrainedModel,
    /// The store the model was trained with (profile included when used).
    pub features: FeatureStore,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub best_val_ndcg: f64,
}

/// Builds and trains the model described by `cfg`; `base` holds the content
/// modalities of `cfg.side`.
pub fn fit_config(bundle: &SplitBundle, base: &FeatureStore, cfg: &TrainConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    let features = if cfg.model == ModelKind::Sibrar {
        model_features(base, &bundle.train, cfg.side, &cfg.training_modalities)?
    } else {
        FeatureStore::new()
    };
    let model = build_model(cfg, bundle, &features)?;
    fn wrap<T: Trainable>(r: FitResult<T>, f: impl Fn(T) -> TrainedModel, features: FeatureStore) -> FitOutcome {
        FitOutcome {
            model: f(r.model),
            features,
            history: r.history,
            best_epoch: r.best_epoch,
            stopped_epoch: r.stopped_epoch,
            best_val_ndcg: r.best_val_ndcg,
        }
    }
    Ok(match model {
        TrainedModel::SiBraR(m) => {
            let r = fit(m, bundle, &features, cfg)?;
            wrap(r, TrainedModel::SiBraR, features)
        }
        TrainedModel::Mf(m) => wrap(fit(m, bundle, &features, cfg)?, TrainedModel::Mf, features),
        TrainedModel::DeepMf(m) => {
            wrap(fit(m, bundle, &features, cfg)?, TrainedModel::DeepMf, features)
        }
        other => {
            let scorer = other.scorer(&bundle.train, &features, None)?;
            let report = evaluate(
                scorer.as_ref(),
                &bundle.train,
                &bundle.valid,
                bundle.kind,
                VALIDATION_K,
                EvalContext::default(),
            )?;
            FitOutcome {
                model: other,
                features,
                history: Vec::new(),
                best_epoch: 0,
                stopped_epoch: 0,
                best_val_ndcg: report.ndcg(),
            }
        }
    })
}
