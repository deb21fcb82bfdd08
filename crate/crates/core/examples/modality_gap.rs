//! Measure how far apart two modalities sit before and after the shared
//! branch, with and without the contrastive term.

use sibrar::analysis::gap_report;
use sibrar::data::{split, synth_generate, FeatureStore, Ratios, Side, SplitKind, SyntheticModality, SyntheticSpec};
use sibrar::model::TrainedModel;
use sibrar::training::{fit_config, TrainConfig};

fn main() -> sibrar::Result<()> {
    let spec = SyntheticSpec {
        n_users: 300,
        n_items: 200,
        latent_dim: 8,
        interactions_per_user: 15,
        modalities: vec![SyntheticModality::item("audio", 16, 0.3), SyntheticModality::item("text", 24, 0.3)],
        seed: 2,
    };
    let data = synth_generate(&spec)?;
    let bundle = split(&data.interactions, SplitKind::Warm, Ratios::new(0.8, 0.1, 0.1)?, 2)?;
    let features = FeatureStore::from_tables(data.modalities_for(Side::Item))?;

    for (label, ctr_embs, lambda) in [("bpr only", false, 0.0), ("bpr + infonce", true, 0.5)] {
        let cfg = TrainConfig {
            training_modalities: vec!["audio".into(), "text".into()],
            ctr_embs,
            lambda,
            tau: 0.2,
            max_epochs: 20,
            ..TrainConfig::default()
        };
        let out = fit_config(&bundle, &features, &cfg)?;
        let TrainedModel::SiBraR(model) = &out.model else {
            unreachable!("the default model kind is the single-branch model")
        };
        let gap = gap_report(model, &out.features, None, 500, 0)?;
        println!("{label}:");
        for (stage, r) in [("projected", &gap.pre), ("embedded", &gap.post)] {
            println!(
                "  {stage:<9} same-entity cosine {:.3}  centroid distance {:.3}",
                r.mean_same_entity_cosine().unwrap_or(f64::NAN),
                r.mean_centroid_distance()
            );
        }
    }
    Ok(())
}
