//! Command implementations behind the `sibrar` binary.
//!
//! Every command takes its randomness from a single `--seed` (or the seed in
//! its config) and writes plain JSON/CSV. Apart from `manifest.json`, which
//! carries timestamps, outputs are byte-identical across repeated runs with
//! the same inputs.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{gap_report, DEFAULT_SAMPLE_SIZE};
use crate::data::io::{
    ensure_dir, read_json, write_interactions, write_json, write_vector_modality, LoadedSplit,
    SPLIT_FILES,
};
use crate::data::{
    load_interactions, load_modality, read_split, split, write_split, FeatureStore, IdMap,
    ModalityKind, ModalityTable, Partition, Ratios, Side, SplitKind, SyntheticSpec,
};
use crate::evaluation::{
    compare_reports, evaluate, missing_modality_sweep, write_sweep_csv, EvalContext, EvalReport,
};
use crate::fingerprint::{file_digest, verify_digest, FileDigest};
use crate::model::{load_checkpoint, save_checkpoint, TrainedModel};
use crate::training::{
    model_features, random_search, FitOutcome, ModelKind, SearchSpace, TrainConfig, VALIDATION_K,
};
use crate::{data::synth_generate, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "sibrar", version, about = "Single-branch multimodal recommender experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split an interaction CSV into train/valid/test.
    Split(SplitArgs),
    /// Train a model on a split directory.
    Train(TrainArgs),
    /// Evaluate a trained run.
    Eval(EvalArgs),
    /// Evaluate a trained run on every subset of its modalities.
    Sweep(SweepArgs),
    /// Modality-gap statistics of a trained run.
    Gap(GapArgs),
    /// Random hyperparameter and modality search.
    Search(SearchArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Paired significance tests between evaluation reports.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub interactions: PathBuf,
    #[arg(long, value_parser = parse_from_str::<SplitKind>)]
    pub kind: SplitKind,
    #[arg(long, default_value = "0.8,0.1,0.1", value_parser = parse_from_str::<Ratios>)]
    pub ratios: Ratios,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Inputs shared by `train` and `search`.
#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub split_dir: PathBuf,
    /// Modality file as `NAME=KIND:PATH` (kind: vector, categorical,
    /// multilabel, discrete); repeatable.
    #[arg(long = "features", value_parser = parse_feature)]
    pub features: Vec<FeatureSource>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated training modalities; overrides the config.
    #[arg(long, value_delimiter = ',')]
    pub modalities: Option<Vec<String>>,
    /// JSON training config; defaults apply to missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub run_dir: PathBuf,
    #[arg(long, default_value = "test", value_parser = parse_from_str::<Partition>)]
    pub split: Partition,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Output directory; defaults to the run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub run_dir: PathBuf,
    #[arg(long, default_value = "test", value_parser = parse_from_str::<Partition>)]
    pub split: Partition,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GapArgs {
    #[arg(long)]
    pub run_dir: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
    pub sample_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated modalities to analyse; defaults to all training ones.
    #[arg(long, value_delimiter = ',')]
    pub modalities: Option<Vec<String>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Report JSON files, optionally as `NAME=PATH`.
    #[arg(long, num_args = 1.., required = true)]
    pub reports: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_from_str<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSource {
    pub name: String,
    pub kind: ModalityKind,
    pub path: PathBuf,
}

fn parse_feature(s: &str) -> std::result::Result<FeatureSource, String> {
    let (name, rest) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=KIND:PATH, got '{s}'"))?;
    let (kind, path) = rest
        .split_once(':')
        .ok_or_else(|| format!("expected NAME=KIND:PATH, got '{s}'"))?;
    Ok(FeatureSource {
        name: name.to_string(),
        kind: kind.parse().map_err(|e: Error| e.to_string())?,
        path: PathBuf::from(path),
    })
}

/// Lineage record written next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_fingerprint: String,
    pub seed: u64,
    pub split_dir: PathBuf,
    pub features: Vec<FeatureSource>,
    /// Digests of every input file, re-checked before the run is reused.
    pub inputs: Vec<FileDigest>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

/// Sidecar describing a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub kind: ModelKind,
    pub side: Side,
    pub training_modalities: Vec<String>,
    pub counterpart: String,
    pub d_emb: usize,
    pub seed: u64,
    pub config_fingerprint: String,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub best_val_ndcg: f64,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::fs::canonicalize(p).map_err(|e| Error::io(p, e))
}

fn load_features(
    sources: &[FeatureSource],
    split: &LoadedSplit,
    side: Side,
) -> Result<FeatureStore> {
    let ids = match side {
        Side::User => &split.users,
        Side::Item => &split.items,
    };
    let mut store = FeatureStore::new();
    for f in sources {
        store.insert(load_modality(&f.path, &f.name, side, f.kind, ids)?)?;
    }
    Ok(store)
}

fn split_digests(split_dir: &Path, sources: &[FeatureSource]) -> Result<Vec<FileDigest>> {
    let mut out = Vec::new();
    for f in SPLIT_FILES.iter().chain(["manifest.json"].iter()) {
        out.push(file_digest(&split_dir.join(f))?);
    }
    for f in sources {
        out.push(file_digest(&f.path)?);
    }
    Ok(out)
}

fn write_metrics_csv(path: &Path, outcome: &FitOutcome) -> Result<()> {
    let mut text = String::from("epoch,train_loss,val_ndcg@10\n");
    for r in &outcome.history {
        text.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.val_ndcg));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes a complete run directory for a fitted configuration.
fn write_run(
    dir: &Path,
    command: &str,
    cfg: &TrainConfig,
    outcome: &FitOutcome,
    split_dir: &Path,
    sources: &[FeatureSource],
    started: u64,
) -> Result<()> {
    ensure_dir(dir)?;
    let fp = cfg.fingerprint();
    write_json(dir.join("config.json"), cfg)?;
    write_metrics_csv(&dir.join("metrics.csv"), outcome)?;
    save_checkpoint(dir.join("checkpoint.json"), &outcome.model, &fp)?;
    let sidecar = ModelSidecar {
        kind: cfg.model,
        side: cfg.side,
        training_modalities: cfg.training_modalities.clone(),
        counterpart: serde_json::to_value(cfg.counterpart)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
        d_emb: cfg.d_emb,
        seed: cfg.seed,
        config_fingerprint: fp.clone(),
        best_epoch: outcome.best_epoch,
        stopped_epoch: outcome.stopped_epoch,
        best_val_ndcg: outcome.best_val_ndcg,
    };
    write_json(dir.join("model.json"), &sidecar)?;
    let manifest = RunManifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_fingerprint: fp,
        seed: cfg.seed,
        split_dir: split_dir.to_path_buf(),
        features: sources.to_vec(),
        inputs: split_digests(split_dir, sources)?,
        started_unix: started,
        finished_unix: now_unix(),
    };
    write_json(dir.join("manifest.json"), &manifest)
}

/// A run directory loaded and checked for tampering.
pub struct LoadedRun {
    pub manifest: RunManifest,
    pub config: TrainConfig,
    pub split: LoadedSplit,
    /// Features as the model sees them (profile included when trained on).
    pub features: FeatureStore,
    pub model: TrainedModel,
}

/// Loads a run, refusing when an input digest or the config fingerprint no
/// longer matches what the run recorded.
pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let manifest: RunManifest = read_json(dir.join("manifest.json"))?;
    for d in &manifest.inputs {
        verify_digest(d)?;
    }
    let config: TrainConfig = read_json(dir.join("config.json"))?;
    let fp = config.fingerprint();
    if fp != manifest.config_fingerprint {
        return Err(Error::Fingerprint {
            what: format!("{} (config.json)", dir.display()),
            expected: manifest.config_fingerprint.clone(),
            found: fp,
        });
    }
    let (model, _) = load_checkpoint(dir.join("checkpoint.json"), Some(&fp))?;
    let split = read_split(&manifest.split_dir)?;
    let features = if config.model == ModelKind::Sibrar {
        let base = load_features(&manifest.features, &split, config.side)?;
        model_features(&base, &split.bundle.train, config.side, &config.training_modalities)?
    } else {
        FeatureStore::new()
    };
    Ok(LoadedRun {
        manifest,
        config,
        split,
        features,
        model,
    })
}

fn context(run: &LoadedRun, partition: Partition) -> EvalContext {
    EvalContext {
        split: Some(run.split.bundle.kind),
        partition: Some(partition_name(partition).to_string()),
        modalities: match run.config.model {
            ModelKind::Sibrar => Some(run.config.training_modalities.clone()),
            _ => None,
        },
        seed: Some(run.config.seed),
        model_fingerprint: Some(run.manifest.config_fingerprint.clone()),
    }
}

fn partition_name(p: Partition) -> &'static str {
    match p {
        Partition::Valid => "valid",
        Partition::Test => "test",
    }
}

pub fn cmd_split(a: &SplitArgs) -> Result<()> {
    let loaded = load_interactions(&a.interactions)?;
    let bundle = split(&loaded.matrix, a.kind, a.ratios, a.seed)?;
    write_split(&a.out, &bundle, &loaded.users, &loaded.items, Some(&absolute(&a.interactions)?))?;
    println!(
        "{} split: train {} / valid {} / test {} interactions -> {}",
        a.kind.as_str(),
        bundle.train.nnz(),
        bundle.valid.nnz(),
        bundle.test.nnz(),
        a.out.display()
    );
    Ok(())
}

fn resolve_sources(sources: &[FeatureSource]) -> Result<Vec<FeatureSource>> {
    sources
        .iter()
        .map(|f| {
            Ok(FeatureSource {
                path: absolute(&f.path)?,
                ..f.clone()
            })
        })
        .collect()
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let started = now_unix();
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(m) = &a.modalities {
        cfg.training_modalities = m.clone();
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let split_dir = absolute(&a.data.split_dir)?;
    let sources = resolve_sources(&a.data.features)?;
    let split = read_split(&split_dir)?;
    let base = load_features(&sources, &split, cfg.side)?;
    let outcome = crate::training::fit_config(&split.bundle, &base, &cfg)?;
    write_run(&a.out, "train", &cfg, &outcome, &split_dir, &sources, started)?;
    println!(
        "trained {} for {} epochs (best {} with val nDCG@{} {:.4}) -> {}",
        outcome.model.kind(),
        outcome.stopped_epoch,
        outcome.best_epoch,
        VALIDATION_K,
        outcome.best_val_ndcg,
        a.out.display()
    );
    Ok(())
}

/// Evaluates a loaded run on one partition.
pub fn evaluate_run(run: &LoadedRun, partition: Partition, k: usize) -> Result<EvalReport> {
    let bundle = &run.split.bundle;
    let scorer = run.model.scorer(&bundle.train, &run.features, None)?;
    evaluate(
        scorer.as_ref(),
        &bundle.train,
        bundle.partition(partition),
        bundle.kind,
        k,
        context(run, partition),
    )
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let run = load_run(&a.run_dir)?;
    let report = evaluate_run(&run, a.split, a.k)?;
    let out = a.out.clone().unwrap_or_else(|| a.run_dir.clone());
    ensure_dir(&out)?;
    let name = partition_name(a.split);
    report.write_json(out.join(format!("eval_{name}.json")))?;
    report.write_csv(out.join(format!("eval_{name}_users.csv")), Some(&run.split.users))?;
    let m = &report.aggregates;
    println!(
        "{name}: nDCG@{k} {:.4}  P {:.4}  R {:.4}  MAP {:.4}  coverage {:.4}  ({} users)",
        m.ndcg,
        m.precision,
        m.recall,
        m.ap,
        report.coverage,
        report.n_users,
        k = a.k
    );
    Ok(())
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let run = load_run(&a.run_dir)?;
    let TrainedModel::SiBraR(model) = &run.model else {
        return Err(Error::invalid(format!(
            "sweep needs a single-branch model, run has '{}'",
            run.model.kind()
        )));
    };
    let bundle = &run.split.bundle;
    let entries = missing_modality_sweep(
        model,
        &bundle.train,
        bundle.partition(a.split),
        &run.features,
        bundle.kind,
        a.k,
        context(&run, a.split),
    )?;
    let out = a.out.clone().unwrap_or_else(|| a.run_dir.clone());
    ensure_dir(&out)?;
    let path = out.join(format!("sweep_{}.csv", partition_name(a.split)));
    write_sweep_csv(&path, &entries)?;
    for e in &entries {
        println!("{:>8.4}  {}", e.report.ndcg(), e.modalities.join("+"));
    }
    println!("{} subsets -> {}", entries.len(), path.display());
    Ok(())
}

pub fn cmd_gap(a: &GapArgs) -> Result<()> {
    let run = load_run(&a.run_dir)?;
    let TrainedModel::SiBraR(model) = &run.model else {
        return Err(Error::invalid("gap analysis needs a single-branch model"));
    };
    let analysis = gap_report(
        model,
        &run.features,
        a.modalities.as_deref(),
        a.sample_size,
        a.seed,
    )?;
    let out = a.out.clone().unwrap_or_else(|| a.run_dir.clone());
    ensure_dir(&out)?;
    analysis.write_json(out.join("gap_report.json"))?;
    let ids = match model.side() {
        Side::Item => &run.split.items,
        Side::User => &run.split.users,
    };
    analysis.write_projections_csv(out.join("projections.csv"), Some(ids))?;
    let fmt = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.4}"));
    for r in [&analysis.pre, &analysis.post] {
        println!(
            "{:<12} centroid distance {:.4}  same-entity cos {}  random-pair cos {}",
            r.stage.as_str(),
            r.mean_centroid_distance(),
            fmt(r.mean_same_entity_cosine()),
            fmt(r.mean_random_pair_cosine())
        );
    }
    Ok(())
}

pub fn cmd_search(a: &SearchArgs) -> Result<()> {
    let started = now_unix();
    let space: SearchSpace = read_json(&a.space)?;
    let split_dir = absolute(&a.data.split_dir)?;
    let sources = resolve_sources(&a.data.features)?;
    let split = read_split(&split_dir)?;
    let base = load_features(&sources, &split, space.base.side)?;
    ensure_dir(&a.out)?;
    let result = random_search(&space, a.budget, &split.bundle, &base, a.seed, Some(&a.out))?;
    write_run(
        &a.out.join("best"),
        "search",
        &result.best,
        &result.fit,
        &split_dir,
        &sources,
        started,
    )?;
    for (r, e) in result.leaderboard.iter().enumerate().take(10) {
        println!(
            "{:>3}. trial {:>3}  val nDCG@10 {:.4}  {}",
            r + 1,
            e.trial,
            e.val_ndcg,
            e.config.training_modalities.join("+")
        );
    }
    Ok(())
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let spec: SyntheticSpec = read_json(&a.spec)?;
    let data = synth_generate(&spec)?;
    ensure_dir(&a.out)?;
    let users = IdMap::sequential("u", spec.n_users);
    let items = IdMap::sequential("i", spec.n_items);
    write_interactions(a.out.join("interactions.csv"), &data.interactions, &users, &items)?;
    for t in &data.modalities {
        let ids = match t.side {
            Side::User => &users,
            Side::Item => &items,
        };
        // entities without interactions never enter a split's id map
        let active = data.interactions.active(t.side);
        let mut available = vec![false; t.n_entities()];
        for &e in &active {
            available[e] = t.is_available(e);
        }
        let features = (0..t.n_entities())
            .flat_map(|e| {
                let keep = available[e];
                t.row(e).iter().map(move |&v| if keep { v } else { 0.0 })
            })
            .collect();
        let written = ModalityTable::new(t.name.clone(), t.side, t.kind, t.dim(), features, available)?;
        write_vector_modality(a.out.join(format!("{}.csv", t.name)), &written, ids)?;
    }
    write_json(a.out.join("spec.json"), &spec)?;
    println!(
        "{} users, {} items, {} interactions, {} modalities -> {}",
        spec.n_users,
        spec.n_items,
        data.interactions.nnz(),
        data.modalities.len(),
        a.out.display()
    );
    Ok(())
}

pub fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let mut reports = Vec::new();
    for r in &a.reports {
        let (name, path) = match r.split_once('=') {
            Some((n, p)) => (n.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(r);
                let stem = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| r.clone());
                (stem, p)
            }
        };
        let report: EvalReport = read_json(&path)?;
        reports.push((name, report));
    }
    let sig = compare_reports(&reports)?;
    if let Some(out) = &a.out {
        write_json(out, &sig)?;
    }
    println!("{:<16} {:<16} {:>9} {:>10} {:>10}  sig", "a", "b", "t", "p", "p_bonf");
    for c in &sig.comparisons {
        let t = c.test.t.map_or("-".to_string(), |t| format!("{t:.3}"));
        println!(
            "{:<16} {:<16} {:>9} {:>10.4} {:>10.4}  {}",
            c.a,
            c.b,
            t,
            c.test.p,
            c.test.p_corrected,
            if c.test.significant { "*" } else { "" }
        );
    }
    Ok(())
}

/// Caps rayon's global pool from `SIBRAR_THREADS`.
fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("SIBRAR_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::invalid(format!("SIBRAR_THREADS must be a count, got '{v}'")))?;
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Split(a) => cmd_split(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Gap(a) => cmd_gap(a),
        Command::Search(a) => cmd_search(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::invalid(e.to_string()))?;
    run(&cli)
}
