//! Train on three item modalities, then evaluate with every non-empty subset
//! of them available at inference time.

use sibrar::data::{split, synth_generate, FeatureStore, Ratios, Side, SplitKind, SyntheticModality, SyntheticSpec};
use sibrar::evaluation::{missing_modality_sweep, EvalContext};
use sibrar::model::TrainedModel;
use sibrar::training::{fit_config, TrainConfig};

fn main() -> sibrar::Result<()> {
    let spec = SyntheticSpec {
        n_users: 300,
        n_items: 200,
        latent_dim: 8,
        interactions_per_user: 15,
        modalities: vec![
            SyntheticModality::item("audio", 16, 0.2),
            SyntheticModality::item("lyrics", 16, 1.0),
            SyntheticModality::item("tags", 8, 3.0),
        ],
        seed: 11,
    };
    let data = synth_generate(&spec)?;
    let bundle = split(&data.interactions, SplitKind::ItemCold, Ratios::new(0.8, 0.1, 0.1)?, 11)?;
    let features = FeatureStore::from_tables(data.modalities_for(Side::Item))?;
    let cfg = TrainConfig {
        training_modalities: vec!["audio".into(), "lyrics".into(), "tags".into()],
        max_epochs: 20,
        ..TrainConfig::default()
    };
    let out = fit_config(&bundle, &features, &cfg)?;
    let TrainedModel::SiBraR(model) = &out.model else {
        unreachable!("the default model kind is the single-branch model")
    };
    let rows = missing_modality_sweep(model, &bundle.train, &bundle.test, &out.features, bundle.kind, 10, EvalContext::default())?;
    for row in rows {
        println!("{:<20} nDCG@10 {:.4}", row.modalities.join("+"), row.report.ndcg());
    }
    Ok(())
}
