//! Load interactions and two item modalities from CSV files, persist an
//! item-cold split, read it back, train and write the evaluation report.

use std::path::Path;

use sibrar::data::{load_interactions, load_modality, read_split, split, write_split, FeatureStore, ModalityKind, Ratios, Side, SplitKind};
use sibrar::evaluation::{evaluate, EvalContext};
use sibrar::training::{fit_config, TrainConfig};

fn main() -> sibrar::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let out = std::env::temp_dir().join("sibrar-csv-pipeline");

    let loaded = load_interactions(data.join("interactions.csv"))?;
    let bundle = split(&loaded.matrix, SplitKind::ItemCold, Ratios::new(0.7, 0.15, 0.15)?, 0)?;
    write_split(out.join("split"), &bundle, &loaded.users, &loaded.items, Some(&data.join("interactions.csv")))?;
    let stored = read_split(out.join("split"))?;

    let features = FeatureStore::from_tables([
        load_modality(data.join("genre.csv"), "genre", Side::Item, ModalityKind::Categorical, &stored.items)?,
        load_modality(data.join("audio.csv"), "audio", Side::Item, ModalityKind::Vector, &stored.items)?,
    ])?;
    let cfg = TrainConfig {
        training_modalities: vec!["genre".into(), "audio".into()],
        d_emb: 8,
        branch_hidden: vec![8],
        counterpart_hidden: vec![8],
        n_neg: 2,
        batch_size: 16,
        lr: 0.01,
        ..TrainConfig::default()
    };
    let fitted = fit_config(&stored.bundle, &features, &cfg)?;
    let b = &stored.bundle;
    let scorer = fitted.model.scorer(&b.train, &fitted.features, None)?;
    let report = evaluate(&*scorer, &b.train, &b.test, b.kind, 10, EvalContext::default())?;
    report.write_json(out.join("eval_test.json"))?;
    report.write_csv(out.join("eval_test_users.csv"), Some(&stored.users))?;
    println!(
        "{} train / {} test interactions, nDCG@10 {:.4}; reports in {}",
        b.train.nnz(),
        b.test.nnz(),
        report.ndcg(),
        out.display()
    );
    Ok(())
}
