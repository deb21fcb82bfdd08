//! Compare the hand-written backward pass with central differences on a
//! small model, for the plain ranking loss and the composite loss.

use sibrar::data::{split, synth_generate, FeatureStore, Ratios, Side, SplitKind, SyntheticModality, SyntheticSpec};
use sibrar::losses::BatchLossConfig;
use sibrar::model::{SiBraR, SiBraRConfig, TrainView};
use sibrar::numerics::{Parameterized, SeededRng};

fn main() -> sibrar::Result<()> {
    let spec = SyntheticSpec {
        n_users: 20,
        n_items: 15,
        latent_dim: 3,
        interactions_per_user: 4,
        modalities: vec![SyntheticModality::item("audio", 5, 0.5), SyntheticModality::item("text", 7, 0.5)],
        seed: 1,
    };
    let data = synth_generate(&spec)?;
    let bundle = split(&data.interactions, SplitKind::Warm, Ratios::new(0.8, 0.1, 0.1)?, 1)?;
    let features = FeatureStore::from_tables(data.modalities_for(Side::Item))?;
    let mods = vec!["audio".to_string(), "text".to_string()];
    let config = SiBraRConfig { d_emb: 4, branch_hidden: vec![6], counterpart_hidden: vec![5], ..SiBraRConfig::default() };
    let mut model = SiBraR::new(config, &mods, &features, bundle.n_users(), bundle.n_items(), 0)?;

    // move off the relu kinks that zero biases sit on
    let mut rng = SeededRng::new(4);
    let jittered: Vec<f64> = model.flatten().iter().map(|v| v + 0.05 * rng.gaussian()).collect();
    model.assign_flat(&jittered)?;

    let view = TrainView::new(Side::Item, &bundle.train, &features, Some(&mods))?;
    let batch: Vec<(usize, usize)> = bundle.train.pairs().take(8).collect();
    for cfg in [
        BatchLossConfig { n_neg: 3, ..BatchLossConfig::default() },
        BatchLossConfig { n_neg: 3, ctr_embs: true, lambda: 0.5, tau: 0.2 },
    ] {
        let r = model.check_gradients(&batch, &view, &cfg, 42, 1e-4, usize::MAX)?;
        println!(
            "lambda {:.1}: {} coordinates, max relative error {:.2e} ({})",
            cfg.lambda,
            r.checked,
            r.max_rel_err,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(())
}
