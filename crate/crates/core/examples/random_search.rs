//! Random search over learning rate, embedding size and modality subsets.

use std::collections::BTreeMap;

use sibrar::data::{split, synth_generate, FeatureStore, Ratios, Side, SplitKind, SyntheticModality, SyntheticSpec};
use sibrar::training::{random_search, Domain, ModalityPolicy, SearchSpace, TrainConfig};

fn main() -> sibrar::Result<()> {
    let spec = SyntheticSpec {
        n_users: 200,
        n_items: 120,
        latent_dim: 6,
        interactions_per_user: 12,
        modalities: vec![SyntheticModality::item("clean", 12, 0.2), SyntheticModality::item("noisy", 12, 4.0)],
        seed: 9,
    };
    let data = synth_generate(&spec)?;
    let bundle = split(&data.interactions, SplitKind::ItemCold, Ratios::new(0.8, 0.1, 0.1)?, 9)?;
    let features = FeatureStore::from_tables(data.modalities_for(Side::Item))?;

    let space = SearchSpace {
        base: TrainConfig { max_epochs: 10, ..TrainConfig::default() },
        params: BTreeMap::from([
            ("lr".to_string(), Domain::LogUniform([3e-4, 3e-3])),
            ("d_emb".to_string(), Domain::Choice(vec![16.into(), 32.into()])),
        ]),
        modalities: vec!["clean".into(), "noisy".into()],
        policy: ModalityPolicy::OneOrMore,
    };
    let result = random_search(&space, 6, &bundle, &features, 1, None)?;
    for (rank, e) in result.leaderboard.iter().enumerate() {
        println!(
            "{}. trial {} lr {:.5} d_emb {:>2} {:<12} val nDCG@10 {:.4}",
            rank + 1,
            e.trial,
            e.config.lr,
            e.config.d_emb,
            e.config.training_modalities.join("+"),
            e.val_ndcg
        );
    }
    println!("refit best: val nDCG@10 {:.4}", result.fit.best_val_ndcg);
    Ok(())
}
