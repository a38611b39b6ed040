//! Command-line entry points: corpus synthesis, feature extraction with
//! caching, cross-validation, and report merging.
//!
//! Every command is deterministic given its flags; all randomness flows
//! from explicit `--seed` values. Option precedence is flags, then the
//! `--options` key=value file, then built-in defaults. Logs go to standard
//! error; result tables go to standard output and `--out` files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::cache::{content_hash, FeatureCache};
use crate::error::{Error, Result};
use crate::eval::{
    self, cross_validate_features, filter_subset, grid_search_features, plan_folds, render_comparison,
    ClipFeature, EvalReport, ExperimentSpec, FeatureKind, FeatureSpec, GridPoint, HpSet, ModelSpec,
    Subset, Task,
};
use crate::ingest::{
    clip_path, generate_synthetic_corpus, parse_manifest, validate_manifest, ClipSource, ClipStore,
    DatasetManifest, SyntheticSpec,
};
use crate::learn::net::Architecture;
use crate::lld::Aggregation;

#[derive(Parser)]
#[command(
    name = "gruntkit",
    version,
    about = "Tennis-grunt classification pipeline: synthesis, features, training, cross-validation"
)]
struct Cli {
    /// Worker-thread cap for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Flat key=value options file; command-line flags take precedence.
    #[arg(long, global = true)]
    options: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic grunt corpus (clip store + manifest).
    Synth(SynthArgs),
    /// Extract features for every clip in a manifest into the cache.
    Extract(ExtractArgs),
    /// Run player-independent cross-validation and write reports.
    Crossval(CrossvalArgs),
    /// Merge report JSON files into one comparison table.
    Report(ReportArgs),
}

#[derive(Args, Default)]
struct SynthArgs {
    /// Number of synthetic players (half female, half male).
    #[arg(long)]
    players: Option<usize>,
    /// Clips per player; must be even so score labels balance.
    #[arg(long)]
    clips: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output clip-store directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Female F0 range as "lo:hi" in Hz.
    #[arg(long)]
    f0_female: Option<String>,
    /// Male F0 range as "lo:hi" in Hz.
    #[arg(long)]
    f0_male: Option<String>,
    /// Relative amplitude boost of scored clips.
    #[arg(long)]
    score_amplitude_effect: Option<f64>,
    /// Relative envelope-decay stretch of scored clips.
    #[arg(long)]
    score_duration_effect: Option<f64>,
}

#[derive(Args, Default)]
struct ExtractArgs {
    /// Manifest CSV (defaults to <clips>/manifest.csv).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Clip-store directory holding the per-clip WAV files.
    #[arg(long)]
    clips: Option<PathBuf>,
    /// Cache root directory.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Feature family: lld|mfcc|spectrogram|compare_functionals|egemaps_functionals.
    #[arg(long)]
    feature: Option<String>,
}

#[derive(Args, Default)]
struct CrossvalArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    clips: Option<PathBuf>,
    /// Optional cache root; missing features are computed and stored.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// sex | score
    #[arg(long)]
    task: Option<String>,
    /// women | men | combined
    #[arg(long)]
    subset: Option<String>,
    #[arg(long)]
    feature: Option<String>,
    /// mean | middle | flat (SVM over sequence features only).
    #[arg(long)]
    aggregation: Option<String>,
    /// svm | lstm_rnn | crnn
    #[arg(long)]
    model: Option<String>,
    /// Neural hyperparameter set I..VI, or "all" for the full grid.
    #[arg(long)]
    hp: Option<String>,
    /// SVM complexity value.
    #[arg(long)]
    c: Option<f64>,
    /// Evaluate the full C grid 1e-5..1e1.
    #[arg(long, default_value_t = false)]
    c_grid: bool,
    /// Training epochs for the neural models.
    #[arg(long)]
    epochs: Option<usize>,
    /// Subgradient epochs for the SVM.
    #[arg(long)]
    svm_iterations: Option<usize>,
    /// LSTM hidden width per direction.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json / report.txt.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Default)]
struct ReportArgs {
    /// Report JSON files to merge.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Also write the merged table to this path.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parse `std::env::args` and run. Returns the process exit code: zero iff
/// the command succeeded and every runtime assertion held.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let options = match &cli.options {
        Some(path) => parse_options_file(path)?,
        None => BTreeMap::new(),
    };
    if let Some(jobs) = cli.jobs.or_else(|| get_opt(&options, "jobs")) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Synth(args) => cmd_synth(args, &options),
        Command::Extract(args) => cmd_extract(args, &options),
        Command::Crossval(args) => cmd_crossval(args, &options),
        Command::Report(args) => cmd_report(args),
    }
}

/// Flat key=value document; `#` starts a comment line.
fn parse_options_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("{}:{}: expected key=value", path.display(), idx + 1))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn get_opt<T: FromStr>(options: &BTreeMap<String, String>, key: &str) -> Option<T> {
    options.get(key).and_then(|v| v.parse().ok())
}

/// flag value, then options-file value, then default
fn pick<T: Clone + FromStr>(
    flag: Option<T>,
    options: &BTreeMap<String, String>,
    key: &str,
    default: Option<T>,
) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    if let Some(raw) = options.get(key) {
        return raw
            .parse()
            .map_err(|_| Error::Config(format!("bad value '{raw}' for option {key}")));
    }
    default.ok_or_else(|| Error::Config(format!("missing required option --{key}")))
}

fn parse_range(text: &str) -> Result<(f64, f64)> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("expected lo:hi, got '{text}'")))?;
    let lo: f64 = lo.parse().map_err(|_| Error::Config(format!("bad number '{lo}'")))?;
    let hi: f64 = hi.parse().map_err(|_| Error::Config(format!("bad number '{hi}'")))?;
    Ok((lo, hi))
}

fn cmd_synth(args: SynthArgs, options: &BTreeMap<String, String>) -> Result<()> {
    let players = pick(args.players, options, "players", Some(20))?;
    let clips = pick(args.clips, options, "clips", Some(30))?;
    let seed = pick(args.seed, options, "seed", Some(7))?;
    let out: PathBuf = pick(args.out, options, "out", None)?;

    let mut spec = SyntheticSpec::new(players, clips, seed);
    if let Some(range) = args.f0_female.or_else(|| options.get("f0_female").cloned()) {
        spec.f0_range_female = parse_range(&range)?;
    }
    if let Some(range) = args.f0_male.or_else(|| options.get("f0_male").cloned()) {
        spec.f0_range_male = parse_range(&range)?;
    }
    spec.score_amplitude_effect =
        pick(args.score_amplitude_effect, options, "score_amplitude_effect", Some(0.2))?;
    spec.score_duration_effect =
        pick(args.score_duration_effect, options, "score_duration_effect", Some(0.1))?;

    eprintln!("synthesizing {} players x {} clips (seed {seed}) -> {}", players, clips, out.display());
    let corpus = generate_synthetic_corpus(&spec)?;
    corpus.write_to_dir(&out)?;
    let report = validate_manifest(&corpus.manifest);
    print!("{report}");
    if !report.is_balanced() {
        return Err(Error::Config("synthetic corpus failed balance validation".into()));
    }
    Ok(())
}

/// Open a clip store, honoring a manifest override.
fn open_store(manifest: Option<PathBuf>, clips: &Path) -> Result<ClipStore> {
    match manifest {
        None => ClipStore::open(clips),
        Some(path) => {
            let manifest = parse_manifest(&std::fs::read_to_string(path)?)?;
            for record in &manifest.records {
                if !clip_path(clips, record).is_file() {
                    return Err(Error::MissingAudio(record.clip_id()));
                }
            }
            Ok(ClipStore {
                dir: clips.to_path_buf(),
                manifest,
            })
        }
    }
}

/// Per-record content hashes of the stored clip WAV bytes.
fn store_hashes(store: &ClipStore) -> Result<Vec<u64>> {
    store
        .manifest
        .records
        .par_iter()
        .map(|record| {
            let bytes = std::fs::read(clip_path(&store.dir, record))?;
            Ok(content_hash(&bytes))
        })
        .collect()
}

fn cmd_extract(args: ExtractArgs, options: &BTreeMap<String, String>) -> Result<()> {
    let clips: PathBuf = pick(args.clips, options, "clips", None)?;
    let cache_root: PathBuf = pick(args.cache, options, "cache", None)?;
    let feature: FeatureKind = pick(args.feature, options, "feature", None)?.parse()?;
    let manifest_path = args.manifest.or_else(|| options.get("manifest").map(PathBuf::from));

    let store = open_store(manifest_path, &clips)?;
    let hashes = store_hashes(&store)?;
    let mut cache = FeatureCache::open(&cache_root, feature)?;

    // compute only what is stale or missing, in parallel, then append in
    // manifest order so reruns produce identical cache files
    let spec = FeatureSpec::sequence(feature);
    let missing: Vec<usize> = (0..store.manifest.records.len())
        .filter(|&i| !cache.contains(&store.manifest.records[i].clip_id(), hashes[i]))
        .collect();
    let computed: Vec<(usize, ClipFeature)> = missing
        .par_iter()
        .map(|&i| {
            let clip = store.load(&store.manifest.records[i])?;
            Ok((i, crate::eval::compute_feature(&clip, &spec)?))
        })
        .collect::<Result<_>>()?;
    for (i, feature_value) in &computed {
        cache.put(&store.manifest.records[*i].clip_id(), hashes[*i], feature_value)?;
    }
    cache.flush()?;
    write_functional_schema(&cache_root, feature)?;

    eprintln!(
        "extract: {} clips, {} computed, {} already cached ({})",
        store.manifest.records.len(),
        computed.len(),
        store.manifest.records.len() - computed.len(),
        feature.as_str()
    );
    println!(
        "{} entries in cache {}",
        cache.len(),
        cache_root.join(feature.as_str()).display()
    );
    Ok(())
}

/// Functional features publish their ordered (channel, statistic) naming
/// next to the cache so downstream consumers can interpret the vectors.
fn write_functional_schema(cache_root: &Path, feature: FeatureKind) -> Result<()> {
    if !feature.is_functional() {
        return Ok(());
    }
    // schema of the canonical LLD layout; computed once from a silent probe
    let probe = crate::ingest::AudioClip::new(vec![0.0; 16000], 16000);
    let llds = crate::lld::extract_llds(&probe, &crate::lld::LldConfig::default())?;
    let vector = match feature {
        FeatureKind::CompareFunctionals => crate::lld::functionals_compare_like(&llds)?,
        _ => {
            let smoothed = crate::lld::smooth_moving_average(&llds, 3)?;
            crate::lld::functionals_egemaps_like(&smoothed)?
        }
    };
    write_atomic(
        &cache_root.join(feature.as_str()).join("schema.json"),
        vector.schema.to_json().as_bytes(),
    )
}

#[derive(Debug)]
struct CrossvalPlan {
    spec: ExperimentSpec,
    grid: Option<Vec<GridPoint>>,
}

fn build_experiment(args: &CrossvalArgs, options: &BTreeMap<String, String>) -> Result<CrossvalPlan> {
    let task: Task = pick(args.task.clone(), options, "task", None)?.parse()?;
    let subset: Subset = pick(
        args.subset.clone(),
        options,
        "subset",
        Some("combined".to_string()),
    )?
    .parse()?;
    let feature_kind: FeatureKind = pick(args.feature.clone(), options, "feature", None)?.parse()?;
    let aggregation: Option<Aggregation> = match args
        .aggregation
        .clone()
        .or_else(|| options.get("aggregation").cloned())
    {
        Some(a) => Some(a.parse()?),
        None => None,
    };
    let model_name: String = pick(args.model.clone(), options, "model", None)?;
    let seed: u64 = pick(args.seed, options, "seed", Some(7))?;
    let epochs: usize = pick(args.epochs, options, "epochs", Some(30))?;
    let svm_iterations: usize = pick(args.svm_iterations, options, "svm_iterations", Some(1000))?;
    let hidden: usize = pick(args.hidden, options, "hidden", Some(64))?;

    let feature = FeatureSpec {
        kind: feature_kind,
        aggregation,
    };

    let hp_flag = args.hp.clone().or_else(|| options.get("hp").cloned());
    let c_flag = args.c.or_else(|| get_opt(options, "c"));
    let c_grid = args.c_grid || get_opt(options, "c_grid").unwrap_or(false);

    let (model, grid): (ModelSpec, Option<Vec<GridPoint>>) = match model_name.as_str() {
        "svm" => {
            let base = ModelSpec::Svm {
                c_value: c_flag.unwrap_or(1e-3),
                iterations: svm_iterations,
            };
            let grid = if c_grid {
                Some((-5..=1).map(|e| GridPoint::CValue(10f64.powi(e))).collect())
            } else {
                None
            };
            (base, grid)
        }
        "lstm_rnn" | "crnn" => {
            let architecture = if model_name == "crnn" {
                Architecture::Crnn
            } else {
                Architecture::LstmRnn
            };
            let (hp, grid) = match hp_flag.as_deref() {
                None | Some("I") => (HpSet::by_id("I")?, None),
                Some("all") => (
                    HpSet::by_id("I")?,
                    Some(HpSet::ALL.iter().map(|h| GridPoint::Hp(*h)).collect()),
                ),
                Some(id) => (HpSet::by_id(id)?, None),
            };
            let mut model = ModelSpec::net(architecture, hp, epochs);
            if let ModelSpec::Net { hidden: h, .. } = &mut model {
                *h = hidden;
            }
            (model, grid)
        }
        other => return Err(Error::Config(format!("unknown model '{other}'"))),
    };

    let spec = ExperimentSpec {
        task,
        subset,
        feature,
        model,
        seed_folds: seed,
        seed_train: seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1),
    };
    spec.validate()?;
    Ok(CrossvalPlan { spec, grid })
}

/// Load features through the cache when one is configured, computing and
/// storing anything stale; otherwise extract in memory.
fn load_features(
    store: &ClipStore,
    manifest: &DatasetManifest,
    feature: &FeatureSpec,
    cache_root: Option<&Path>,
) -> Result<Vec<ClipFeature>> {
    let Some(root) = cache_root else {
        return eval::compute_all_features(manifest, store, feature);
    };
    // the cache stores sequence/functional forms; aggregation happens here
    let mut cache = FeatureCache::open(root, feature.kind)?;
    let hashes: Vec<u64> = manifest
        .records
        .par_iter()
        .map(|record| {
            let bytes = std::fs::read(clip_path(&store.dir, record))?;
            Ok(content_hash(&bytes))
        })
        .collect::<Result<_>>()?;

    let cached: Vec<Option<ClipFeature>> = manifest
        .records
        .iter()
        .zip(&hashes)
        .map(|(record, &hash)| cache.get(&record.clip_id(), hash))
        .collect::<Result<_>>()?;

    let base_spec = FeatureSpec::sequence(feature.kind);
    let missing: Vec<usize> = (0..manifest.records.len()).filter(|&i| cached[i].is_none()).collect();
    let computed: Vec<(usize, ClipFeature)> = missing
        .par_iter()
        .map(|&i| {
            let clip = store.load(&manifest.records[i])?;
            Ok((i, crate::eval::compute_feature(&clip, &base_spec)?))
        })
        .collect::<Result<_>>()?;
    for (i, value) in &computed {
        cache.put(&manifest.records[*i].clip_id(), hashes[*i], value)?;
    }
    cache.flush()?;

    let mut by_index: BTreeMap<usize, ClipFeature> = computed.into_iter().collect();
    let mut features = Vec::with_capacity(manifest.records.len());
    for (i, slot) in cached.into_iter().enumerate() {
        let base = match slot {
            Some(f) => f,
            None => by_index.remove(&i).expect("computed above"),
        };
        features.push(apply_aggregation(base, feature)?);
    }
    Ok(features)
}

fn apply_aggregation(base: ClipFeature, feature: &FeatureSpec) -> Result<ClipFeature> {
    match (base, feature.aggregation) {
        (ClipFeature::Sequence(m), Some(kind)) => {
            Ok(ClipFeature::Vector(crate::lld::aggregate(&m, kind).values))
        }
        (other, _) => Ok(other),
    }
}

fn cmd_crossval(args: CrossvalArgs, options: &BTreeMap<String, String>) -> Result<()> {
    let clips: PathBuf = pick(args.clips.clone(), options, "clips", None)?;
    let out: PathBuf = pick(args.out.clone(), options, "out", None)?;
    let cache_root = args.cache.clone().or_else(|| options.get("cache").map(PathBuf::from));
    let manifest_path = args
        .manifest
        .clone()
        .or_else(|| options.get("manifest").map(PathBuf::from));
    let plan_cfg = build_experiment(&args, options)?;

    let store = open_store(manifest_path, &clips)?;
    let manifest = filter_subset(&store.manifest, plan_cfg.spec.subset);
    if manifest.records.is_empty() {
        return Err(Error::Config("no records left after subset filtering".into()));
    }
    let plan = plan_folds(&manifest, 5, plan_cfg.spec.seed_folds)?;

    eprintln!(
        "crossval: task={} subset={} feature={} model={} on {} clips / {} players",
        plan_cfg.spec.task.as_str(),
        plan_cfg.spec.subset.as_str(),
        plan_cfg.spec.feature.describe(),
        plan_cfg.spec.model.name(),
        manifest.records.len(),
        plan.fold_members.iter().map(|f| f.len()).sum::<usize>(),
    );

    let features = if matches!(plan_cfg.spec.model, ModelSpec::Constant { .. }) {
        Vec::new()
    } else {
        load_features(&store, &manifest, &plan_cfg.spec.feature, cache_root.as_deref())?
    };

    std::fs::create_dir_all(&out)?;
    match plan_cfg.grid {
        None => {
            let report = cross_validate_features(&manifest, &features, &plan, &plan_cfg.spec)?;
            write_atomic(&out.join("report.json"), report.to_json().as_bytes())?;
            write_atomic(&out.join("report.txt"), report.render_text().as_bytes())?;
            print!("{}", report.render_text());
        }
        Some(grid) => {
            let result = grid_search_features(&manifest, &features, &plan, &plan_cfg.spec, &grid)?;
            let mut text = render_comparison(&result.reports);
            let best = &result.reports[result.best_index];
            text.push_str(&format!(
                "best: {} {} -> Ø {:.1} % ± {:.1} %\n",
                best.model,
                best.hyperparameters
                    .hp_set
                    .clone()
                    .or_else(|| best.hyperparameters.c_value.map(|c| format!("C={c:.0e}")))
                    .unwrap_or_default(),
                100.0 * best.uar_mean,
                100.0 * best.uar_std
            ));
            for (i, report) in result.reports.iter().enumerate() {
                let tag = report
                    .hyperparameters
                    .hp_set
                    .clone()
                    .or_else(|| report.hyperparameters.c_value.map(|c| format!("c{c:.0e}")))
                    .unwrap_or_else(|| i.to_string());
                write_atomic(&out.join(format!("report_{tag}.json")), report.to_json().as_bytes())?;
            }
            write_atomic(&out.join("report.txt"), text.as_bytes())?;
            print!("{text}");
        }
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let mut reports = Vec::with_capacity(args.reports.len());
    for path in &args.reports {
        reports.push(EvalReport::load(path)?);
    }
    let text = render_comparison(&reports);
    if let Some(out) = &args.out {
        write_atomic(out, text.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

/// Write via a temp file and rename so readers never observe partial output.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
