//! Train the single-branch model on synthetic data and print its test nDCG@10
//! next to the popularity and random baselines.

use sibrar::data::{split, synth_generate, FeatureStore, Ratios, Side, SplitKind, SyntheticModality, SyntheticSpec};
use sibrar::evaluation::{evaluate, EvalContext};
use sibrar::training::{fit_config, ModelKind, TrainConfig};

fn main() -> sibrar::Result<()> {
    let spec = SyntheticSpec {
        n_users: 300,
        n_items: 200,
        latent_dim: 8,
        interactions_per_user: 15,
        modalities: vec![SyntheticModality::item("content", 16, 0.3)],
        seed: 7,
    };
    let data = synth_generate(&spec)?;
    let bundle = split(&data.interactions, SplitKind::Warm, Ratios::new(0.8, 0.1, 0.1)?, 7)?;
    let features = FeatureStore::from_tables(data.modalities_for(Side::Item))?;

    for model in [ModelKind::Sibrar, ModelKind::Pop, ModelKind::Rand] {
        let cfg = TrainConfig {
            model,
            training_modalities: vec!["content".into(), "profile".into()],
            max_epochs: 20,
            ..TrainConfig::default()
        };
        let out = fit_config(&bundle, &features, &cfg)?;
        let scorer = out.model.scorer(&bundle.train, &out.features, None)?;
        let report = evaluate(&*scorer, &bundle.train, &bundle.test, bundle.kind, 10, EvalContext::default())?;
        println!("{:<7} nDCG@10 {:.4}  ({} epochs)", out.model.kind(), report.ndcg(), out.stopped_epoch);
    }
    Ok(())
}
