//! Recommend items that never appeared in training. Test items are embedded
//! from their content features alone.

use sibrar::data::{split, synth_generate, FeatureStore, Ratios, Side, SplitKind, SyntheticModality, SyntheticSpec};
use sibrar::evaluation::{evaluate, EvalContext};
use sibrar::model::recommend_top_k;
use sibrar::training::{fit_config, TrainConfig};

fn main() -> sibrar::Result<()> {
    let spec = SyntheticSpec {
        n_users: 300,
        n_items: 200,
        latent_dim: 8,
        interactions_per_user: 15,
        modalities: vec![SyntheticModality::item("content", 16, 0.3)],
        seed: 3,
    };
    let data = synth_generate(&spec)?;
    let bundle = split(&data.interactions, SplitKind::ItemCold, Ratios::new(0.8, 0.1, 0.1)?, 3)?;
    let features = FeatureStore::from_tables(data.modalities_for(Side::Item))?;
    let cfg = TrainConfig {
        training_modalities: vec!["content".into()],
        max_epochs: 20,
        ..TrainConfig::default()
    };
    let out = fit_config(&bundle, &features, &cfg)?;
    let scorer = out.model.scorer(&bundle.train, &out.features, None)?;
    let report = evaluate(&*scorer, &bundle.train, &bundle.test, bundle.kind, 10, EvalContext::default())?;
    println!(
        "cold items: {}  evaluated users: {}  nDCG@10 {:.4}",
        bundle.test.active(Side::Item).len(),
        report.n_users,
        report.ndcg()
    );

    let cold = bundle.test.active(Side::Item);
    let user = bundle.test.active(Side::User)[0];
    let top = recommend_top_k(&*scorer, user, &cold, &[], 5);
    println!("top cold items for user {user}: {top:?}  (held out: {:?})", bundle.test.row(user));
    Ok(())
}
