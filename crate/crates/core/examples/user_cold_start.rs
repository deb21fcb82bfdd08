//! The mirrored setting: users without any training history are embedded
//! from user-side features, with a profile network on the item side.

use sibrar::data::{split, synth_generate, FeatureStore, Ratios, Side, SplitKind, SyntheticModality, SyntheticSpec};
use sibrar::evaluation::{evaluate, EvalContext};
use sibrar::training::{fit_config, ModelKind, TrainConfig};

fn main() -> sibrar::Result<()> {
    let spec = SyntheticSpec {
        n_users: 300,
        n_items: 150,
        latent_dim: 8,
        interactions_per_user: 15,
        modalities: vec![SyntheticModality::user("demographics", 12, 0.3)],
        seed: 5,
    };
    let data = synth_generate(&spec)?;
    let bundle = split(&data.interactions, SplitKind::UserCold, Ratios::new(0.8, 0.1, 0.1)?, 5)?;
    let features = FeatureStore::from_tables(data.modalities_for(Side::User))?;

    for model in [ModelKind::Sibrar, ModelKind::Pop] {
        let cfg = TrainConfig {
            model,
            side: Side::User,
            training_modalities: vec!["demographics".into()],
            max_epochs: 20,
            ..TrainConfig::default()
        };
        let out = fit_config(&bundle, &features, &cfg)?;
        let scorer = out.model.scorer(&bundle.train, &out.features, None)?;
        let report = evaluate(&*scorer, &bundle.train, &bundle.test, bundle.kind, 10, EvalContext::default())?;
        println!("{:<7} cold-user nDCG@10 {:.4}", out.model.kind(), report.ndcg());
    }
    Ok(())
}
