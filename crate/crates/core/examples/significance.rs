//! Paired t-tests on per-user nDCG between three models on the same test
//! users, Bonferroni-corrected for the number of pairs.

use sibrar::data::{split, synth_generate, FeatureStore, Ratios, Side, SplitKind, SyntheticModality, SyntheticSpec};
use sibrar::evaluation::{compare_reports, evaluate, EvalContext};
use sibrar::training::{fit_config, ModelKind, TrainConfig};

fn main() -> sibrar::Result<()> {
    let spec = SyntheticSpec {
        n_users: 300,
        n_items: 200,
        latent_dim: 8,
        interactions_per_user: 15,
        modalities: vec![SyntheticModality::item("content", 16, 0.3)],
        seed: 21,
    };
    let data = synth_generate(&spec)?;
    let bundle = split(&data.interactions, SplitKind::Warm, Ratios::new(0.8, 0.1, 0.1)?, 21)?;
    let features = FeatureStore::from_tables(data.modalities_for(Side::Item))?;

    let mut reports = Vec::new();
    for model in [ModelKind::Sibrar, ModelKind::Mf, ModelKind::Pop] {
        let cfg = TrainConfig {
            model,
            training_modalities: vec!["content".into()],
            max_epochs: 20,
            ..TrainConfig::default()
        };
        let out = fit_config(&bundle, &features, &cfg)?;
        let scorer = out.model.scorer(&bundle.train, &out.features, None)?;
        let report = evaluate(&*scorer, &bundle.train, &bundle.test, bundle.kind, 10, EvalContext::default())?;
        reports.push((out.model.kind().to_string(), report));
    }
    let sig = compare_reports(&reports)?;
    for c in &sig.comparisons {
        println!(
            "{:>6} vs {:<6} mean diff {:+.4}  p {:.2e}  corrected {:.2e}  {}",
            c.a,
            c.b,
            c.test.mean_diff,
            c.test.p,
            c.test.p_corrected,
            if c.test.significant { "significant" } else { "not significant" }
        );
    }
    Ok(())
}
