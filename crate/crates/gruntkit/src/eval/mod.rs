//! Player-independent fold planning, cross-validation with leakage
//! assertions, confusion/UAR metrics, and hyperparameter grids.

pub mod features;
pub mod report;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{AnnotationRecord, ClipSource, DatasetManifest, Sex};
use crate::learn::net::{
    net_forward, net_train, Architecture, ForwardMode, NetConfig, Sample, TrainConfig,
};
use crate::learn::{standardize_fit, svm_predict, svm_train};
use crate::lld::Aggregation;

pub use features::{compute_feature, ChannelScaler, ClipFeature, FeatureKind, FeatureSpec};
pub use report::{render_comparison, ConfigFingerprint, EvalReport, HyperparameterInfo};

/// Which label is predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Sex,
    Score,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Sex => "sex",
            Task::Score => "score",
        }
    }

    pub fn label_of(self, record: &AnnotationRecord) -> usize {
        match self {
            Task::Sex => record.sex.class_id(),
            Task::Score => record.score.class_id(),
        }
    }

    pub fn class_names(self) -> Vec<String> {
        match self {
            Task::Sex => vec!["female".into(), "male".into()],
            Task::Score => vec!["scored".into(), "not_scored".into()],
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sex" => Ok(Task::Sex),
            "score" => Ok(Task::Score),
            other => Err(Error::Config(format!("unknown task '{other}'"))),
        }
    }
}

/// Which players participate: one sex only, or everyone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Women,
    Men,
    Combined,
}

impl Subset {
    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Women => "women",
            Subset::Men => "men",
            Subset::Combined => "combined",
        }
    }

    pub fn admits(self, sex: Sex) -> bool {
        match self {
            Subset::Women => sex == Sex::Female,
            Subset::Men => sex == Sex::Male,
            Subset::Combined => true,
        }
    }
}

impl std::str::FromStr for Subset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "women" => Ok(Subset::Women),
            "men" => Ok(Subset::Men),
            "combined" => Ok(Subset::Combined),
            other => Err(Error::Config(format!("unknown subset '{other}'"))),
        }
    }
}

/// Restrict a manifest to the players of one subset. Subset filtering runs
/// before fold planning, so subset experiments re-plan their own folds.
pub fn filter_subset(manifest: &DatasetManifest, subset: Subset) -> DatasetManifest {
    DatasetManifest {
        records: manifest
            .records
            .iter()
            .filter(|r| subset.admits(r.sex))
            .cloned()
            .collect(),
        audio_paths: manifest.audio_paths.clone(),
    }
}

/// A player-disjoint partition into `k` folds.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub fold_members: Vec<BTreeSet<String>>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn fold_of(&self, player_id: &str) -> Option<usize> {
        self.fold_members.iter().position(|m| m.contains(player_id))
    }
}

/// Seeded stratified fold assignment: players are shuffled within each sex
/// and dealt round-robin to folds, continuing the deal across sexes so
/// per-fold totals differ by at most one player.
pub fn plan_folds(manifest: &DatasetManifest, k: usize, seed: u64) -> Result<FoldPlan> {
    let mut players: BTreeMap<String, Sex> = BTreeMap::new();
    for r in &manifest.records {
        players.insert(r.player_id.clone(), r.sex);
    }
    if players.len() < k || k == 0 {
        return Err(Error::TooFewPlayers {
            k,
            players: players.len(),
        });
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut fold_members = vec![BTreeSet::new(); k];
    let mut next_fold = 0usize;
    for sex in [Sex::Female, Sex::Male] {
        let mut group: Vec<&String> = players
            .iter()
            .filter(|(_, s)| **s == sex)
            .map(|(p, _)| p)
            .collect();
        group.shuffle(&mut rng);
        for player in group {
            fold_members[next_fold % k].insert(player.clone());
            next_fold += 1;
        }
    }

    Ok(FoldPlan {
        k,
        fold_members,
        seed,
    })
}

/// Class-indexed prediction counts: `counts[truth][predicted]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConfusionMatrix {
    pub k_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k_classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_major(&self) -> &[u64] {
        &self.counts
    }

    pub fn from_counts(k_classes: usize, counts: Vec<u64>) -> Self {
        assert_eq!(counts.len(), k_classes * k_classes);
        Self { k_classes, counts }
    }
}

/// Tally `counts[i][j] = #(truth i, predicted j)`.
pub fn confusion(truth: &[usize], pred: &[usize], k_classes: usize) -> Result<ConfusionMatrix> {
    if truth.len() != pred.len() {
        return Err(Error::LabelLengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    let mut counts = vec![0u64; k_classes * k_classes];
    for (&t, &p) in truth.iter().zip(pred) {
        if t >= k_classes {
            return Err(Error::UnknownLabel(t));
        }
        if p >= k_classes {
            return Err(Error::UnknownLabel(p));
        }
        counts[t * k_classes + p] += 1;
    }
    Ok(ConfusionMatrix { k_classes, counts })
}

/// Unweighted average recall: the mean over classes of per-class recall.
/// Every class must appear in the ground truth.
pub fn uar(cm: &ConfusionMatrix) -> Result<f64> {
    let k = cm.k_classes;
    let mut acc = 0.0;
    for class in 0..k {
        let row_sum: u64 = (0..k).map(|j| cm.get(class, j)).sum();
        if row_sum == 0 {
            return Err(Error::EmptyClass(class));
        }
        acc += cm.get(class, class) as f64 / row_sum as f64;
    }
    Ok(acc / k as f64)
}

/// The six predefined hyperparameter sets (I..VI) of the neural grid.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HpSet {
    pub id: &'static str,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl HpSet {
    pub const ALL: [HpSet; 6] = [
        HpSet { id: "I", batch_size: 16, learning_rate: 5e-5 },
        HpSet { id: "II", batch_size: 16, learning_rate: 1e-4 },
        HpSet { id: "III", batch_size: 16, learning_rate: 1e-3 },
        HpSet { id: "IV", batch_size: 32, learning_rate: 1e-3 },
        HpSet { id: "V", batch_size: 64, learning_rate: 1e-4 },
        HpSet { id: "VI", batch_size: 64, learning_rate: 1e-5 },
    ];

    pub fn by_id(id: &str) -> Result<HpSet> {
        Self::ALL
            .iter()
            .find(|h| h.id.eq_ignore_ascii_case(id))
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown hyperparameter set '{id}' (I..VI)")))
    }
}

/// The model side of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Svm {
        c_value: f64,
        iterations: usize,
    },
    Net {
        architecture: Architecture,
        batch_size: usize,
        learning_rate: f64,
        epochs: usize,
        hidden: usize,
        hp_set: Option<String>,
    },
    /// Baseline that ignores features and always predicts one class.
    Constant { class: usize },
}

impl ModelSpec {
    pub fn svm(c_value: f64) -> Self {
        ModelSpec::Svm {
            c_value,
            iterations: 1000,
        }
    }

    pub fn net(architecture: Architecture, hp: HpSet, epochs: usize) -> Self {
        ModelSpec::Net {
            architecture,
            batch_size: hp.batch_size,
            learning_rate: hp.learning_rate,
            epochs,
            hidden: 64,
            hp_set: Some(hp.id.to_string()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Svm { .. } => "svm",
            ModelSpec::Net { architecture, .. } => architecture.as_str(),
            ModelSpec::Constant { .. } => "constant",
        }
    }
}

/// A fully specified experiment: what to predict, on which players, with
/// which features and model, under which seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub task: Task,
    pub subset: Subset,
    pub feature: FeatureSpec,
    pub model: ModelSpec,
    pub seed_folds: u64,
    pub seed_train: u64,
}

impl ExperimentSpec {
    /// Reject combinations outside the supported experiment matrix:
    /// vector models (SVM) take aggregated or functional features, sequence
    /// models take raw sequences, the spectrogram pairs only with flat
    /// aggregation or the CRNN, and sex prediction uses all players.
    pub fn validate(&self) -> Result<()> {
        let agg = self.feature.aggregation;
        let kind = self.feature.kind;
        match &self.model {
            ModelSpec::Svm { c_value, .. } => {
                if *c_value <= 0.0 {
                    return Err(Error::Config(format!("SVM C must be positive, got {c_value}")));
                }
                if kind.is_functional() {
                    if agg.is_some() {
                        return Err(Error::BadCombination(
                            "functional features are already one vector per clip; drop the aggregation"
                                .into(),
                        ));
                    }
                } else if agg.is_none() {
                    return Err(Error::BadCombination(format!(
                        "svm over {} needs an aggregation (mean/middle/flat)",
                        kind.as_str()
                    )));
                } else if kind == FeatureKind::Spectrogram && agg != Some(Aggregation::Flat) {
                    return Err(Error::BadCombination(
                        "spectrogram + svm is evaluated with flat aggregation only".into(),
                    ));
                }
            }
            ModelSpec::Net { architecture, .. } => {
                if agg.is_some() {
                    return Err(Error::BadCombination(
                        "sequence models consume unaggregated sequences".into(),
                    ));
                }
                match (architecture, kind) {
                    (Architecture::LstmRnn, FeatureKind::Lld | FeatureKind::Mfcc) => {}
                    (
                        Architecture::Crnn,
                        FeatureKind::Lld | FeatureKind::Mfcc | FeatureKind::Spectrogram,
                    ) => {}
                    _ => {
                        return Err(Error::BadCombination(format!(
                            "{} + {} is outside the supported matrix",
                            architecture.as_str(),
                            kind.as_str()
                        )))
                    }
                }
            }
            ModelSpec::Constant { class } => {
                if *class > 1 {
                    return Err(Error::Config("constant model class must be 0 or 1".into()));
                }
            }
        }
        if self.task == Task::Sex && self.subset != Subset::Combined {
            return Err(Error::BadCombination(
                "the sex task needs both sexes; use subset=combined".into(),
            ));
        }
        Ok(())
    }
}

/// Check that every record's player is assigned to exactly one fold.
fn check_plan(manifest: &DatasetManifest, plan: &FoldPlan) -> Result<()> {
    let players: BTreeSet<&str> = manifest.records.iter().map(|r| r.player_id.as_str()).collect();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for fold in &plan.fold_members {
        for p in fold {
            if !seen.insert(p.as_str()) {
                return Err(Error::Leakage(vec![p.clone()]));
            }
        }
    }
    for p in &players {
        if !seen.contains(p) {
            return Err(Error::Config(format!("player {p} missing from the fold plan")));
        }
    }
    Ok(())
}

/// Extract the configured feature for every manifest record, in record
/// order, clips processed in parallel.
pub fn compute_all_features(
    manifest: &DatasetManifest,
    source: &dyn ClipSource,
    feature: &FeatureSpec,
) -> Result<Vec<ClipFeature>> {
    manifest
        .records
        .par_iter()
        .map(|record| {
            let clip = source.load(record)?;
            compute_feature(&clip, feature)
        })
        .collect()
}

/// Run player-independent cross-validation and assemble the report.
///
/// For each fold, models train on the clips of all players outside the fold
/// (feature scaling fitted on training data only) and are evaluated on the
/// fold's players. A runtime assertion rejects any train/test player
/// overlap before training starts.
pub fn cross_validate(
    manifest: &DatasetManifest,
    source: &dyn ClipSource,
    plan: &FoldPlan,
    spec: &ExperimentSpec,
) -> Result<EvalReport> {
    spec.validate()?;
    // the constant baseline never reads features
    let clip_features = if matches!(spec.model, ModelSpec::Constant { .. }) {
        Vec::new()
    } else {
        compute_all_features(manifest, source, &spec.feature)?
    };
    cross_validate_features(manifest, &clip_features, plan, spec)
}

/// Cross-validation over already-extracted features (e.g. from the on-disk
/// cache). `clip_features` must align with `manifest.records`; it may be
/// empty for the constant baseline.
pub fn cross_validate_features(
    manifest: &DatasetManifest,
    clip_features: &[ClipFeature],
    plan: &FoldPlan,
    spec: &ExperimentSpec,
) -> Result<EvalReport> {
    spec.validate()?;
    check_plan(manifest, plan)?;
    if manifest.records.iter().any(|r| !spec.subset.admits(r.sex)) {
        return Err(Error::Config(
            "manifest contains records outside the requested subset; filter before planning".into(),
        ));
    }
    if !matches!(spec.model, ModelSpec::Constant { .. })
        && clip_features.len() != manifest.records.len()
    {
        return Err(Error::Config(format!(
            "{} features for {} records",
            clip_features.len(),
            manifest.records.len()
        )));
    }
    let labels: Vec<usize> = manifest.records.iter().map(|r| spec.task.label_of(r)).collect();

    let fold_results: Vec<Result<(f64, ConfusionMatrix, usize)>> = (0..plan.k)
        .into_par_iter()
        .map(|fold| run_fold(manifest, plan, spec, clip_features, &labels, fold))
        .collect();

    let mut per_fold_uar = Vec::with_capacity(plan.k);
    let mut per_fold_confusion = Vec::with_capacity(plan.k);
    let mut fold_test_counts = Vec::with_capacity(plan.k);
    for res in fold_results {
        let (fold_uar, cm, n_test) = res?;
        per_fold_uar.push(fold_uar);
        per_fold_confusion.push(cm.row_major().to_vec());
        fold_test_counts.push(n_test);
    }

    let uar_mean = per_fold_uar.iter().sum::<f64>() / plan.k as f64;
    let uar_std = (per_fold_uar
        .iter()
        .map(|u| (u - uar_mean) * (u - uar_mean))
        .sum::<f64>()
        / plan.k as f64)
        .sqrt();

    let players: BTreeSet<&str> = manifest.records.iter().map(|r| r.player_id.as_str()).collect();
    let hyperparameters = match &spec.model {
        ModelSpec::Svm { c_value, iterations } => HyperparameterInfo {
            model: "svm".into(),
            c_value: Some(*c_value),
            svm_iterations: Some(*iterations),
            hp_set: None,
            batch_size: None,
            learning_rate: None,
            epochs: None,
            lstm_hidden: None,
        },
        ModelSpec::Net {
            architecture,
            batch_size,
            learning_rate,
            epochs,
            hidden,
            hp_set,
        } => HyperparameterInfo {
            model: architecture.as_str().into(),
            c_value: None,
            svm_iterations: None,
            hp_set: hp_set.clone(),
            batch_size: Some(*batch_size),
            learning_rate: Some(*learning_rate),
            epochs: Some(*epochs),
            lstm_hidden: Some(*hidden),
        },
        ModelSpec::Constant { class } => HyperparameterInfo {
            model: format!("constant{class}"),
            c_value: None,
            svm_iterations: None,
            hp_set: None,
            batch_size: None,
            learning_rate: None,
            epochs: None,
            lstm_hidden: None,
        },
    };

    Ok(EvalReport {
        schema_version: report::REPORT_SCHEMA_VERSION,
        task: spec.task.as_str().into(),
        subset: spec.subset.as_str().into(),
        feature: spec.feature.describe(),
        model: spec.model.name().into(),
        hyperparameters,
        per_fold_uar,
        uar_mean,
        uar_std,
        per_fold_confusion,
        fold_test_counts,
        class_names: spec.task.class_names(),
        fingerprint: ConfigFingerprint {
            crate_version: env!("CARGO_PKG_VERSION").into(),
            seed_folds: plan.seed,
            seed_train: spec.seed_train,
            folds: plan.k,
            feature_schema: spec.feature.kind.schema_version().into(),
            feature_config: spec.feature.kind.config_summary().into(),
            players: players.len(),
            clips: manifest.records.len(),
        },
        generated_at_unix: report::unix_timestamp(),
    })
}

fn run_fold(
    manifest: &DatasetManifest,
    plan: &FoldPlan,
    spec: &ExperimentSpec,
    clip_features: &[ClipFeature],
    labels: &[usize],
    fold: usize,
) -> Result<(f64, ConfusionMatrix, usize)> {
    let test_players = &plan.fold_members[fold];
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (i, record) in manifest.records.iter().enumerate() {
        if test_players.contains(&record.player_id) {
            test_idx.push(i);
        } else {
            train_idx.push(i);
        }
    }

    // leakage assertion: no player on both sides
    let train_players: BTreeSet<&str> = train_idx
        .iter()
        .map(|&i| manifest.records[i].player_id.as_str())
        .collect();
    let overlap: Vec<String> = test_players
        .iter()
        .filter(|p| train_players.contains(p.as_str()))
        .cloned()
        .collect();
    if !overlap.is_empty() {
        return Err(Error::Leakage(overlap));
    }

    let truth: Vec<usize> = test_idx.iter().map(|&i| labels[i]).collect();
    let fold_seed = spec.seed_train.wrapping_add(fold as u64);

    let pred: Vec<usize> = match &spec.model {
        ModelSpec::Constant { class } => vec![*class; test_idx.len()],
        ModelSpec::Svm { c_value, iterations } => {
            let train_x: Vec<Vec<f64>> = train_idx
                .iter()
                .map(|&i| clip_features[i].as_vector().map(|v| v.to_vec()))
                .collect::<Result<_>>()?;
            let train_y: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
            let standardizer = standardize_fit(&train_x)?;
            let model = svm_train(&train_x, &train_y, *c_value, *iterations, fold_seed, standardizer)?;
            let test_x: Vec<Vec<f64>> = test_idx
                .iter()
                .map(|&i| clip_features[i].as_vector().map(|v| v.to_vec()))
                .collect::<Result<_>>()?;
            svm_predict(&model, &test_x)?.0
        }
        ModelSpec::Net {
            architecture,
            batch_size,
            learning_rate,
            epochs,
            hidden,
            ..
        } => {
            let train_seqs: Vec<&crate::dsp::FrameMatrix> = train_idx
                .iter()
                .map(|&i| clip_features[i].as_sequence())
                .collect::<Result<_>>()?;
            let scaler = ChannelScaler::fit(&train_seqs)?;
            let shape = (train_seqs[0].rows(), train_seqs[0].cols());
            let config = match architecture {
                Architecture::Crnn => NetConfig::crnn(shape),
                Architecture::LstmRnn => NetConfig::lstm_rnn(shape),
            }
            .with_hidden(*hidden);

            let samples: Vec<Sample> = train_idx
                .iter()
                .map(|&i| {
                    Ok(Sample {
                        input: scaler.transform(clip_features[i].as_sequence()?),
                        label: labels[i],
                    })
                })
                .collect::<Result<_>>()?;
            let train_config = TrainConfig::new(*batch_size, *learning_rate, *epochs, fold_seed);
            let (params, _history) = net_train(&config, &train_config, &samples)?;

            test_idx
                .iter()
                .map(|&i| {
                    let input = scaler.transform(clip_features[i].as_sequence()?);
                    let out = net_forward(&config, &params, &input, ForwardMode::Eval)?;
                    Ok(usize::from(out.logits[1] > out.logits[0]))
                })
                .collect::<Result<_>>()?
        }
    };

    let cm = confusion(&truth, &pred, 2)?;
    let fold_uar = uar(&cm)?;
    Ok((fold_uar, cm, test_idx.len()))
}

/// One grid coordinate: a predefined HP set for the nets or a C value for
/// the SVM.
#[derive(Debug, Clone, PartialEq)]
pub enum GridPoint {
    Hp(HpSet),
    CValue(f64),
}

/// Result of a grid run: all reports plus the winner (highest mean UAR,
/// ties broken by lower deviation, then grid order).
#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub reports: Vec<EvalReport>,
    pub best_index: usize,
}

pub fn grid_search(
    manifest: &DatasetManifest,
    source: &dyn ClipSource,
    plan: &FoldPlan,
    base: &ExperimentSpec,
    grid: &[GridPoint],
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    base.validate()?;
    // features extracted once, shared by every grid point
    let clip_features = compute_all_features(manifest, source, &base.feature)?;
    grid_search_features(manifest, &clip_features, plan, base, grid)
}

/// Grid search over already-extracted features.
pub fn grid_search_features(
    manifest: &DatasetManifest,
    clip_features: &[ClipFeature],
    plan: &FoldPlan,
    base: &ExperimentSpec,
    grid: &[GridPoint],
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let mut reports = Vec::with_capacity(grid.len());
    for point in grid {
        let mut spec = base.clone();
        match (point, &mut spec.model) {
            (GridPoint::Hp(hp), ModelSpec::Net { batch_size, learning_rate, hp_set, .. }) => {
                *batch_size = hp.batch_size;
                *learning_rate = hp.learning_rate;
                *hp_set = Some(hp.id.to_string());
            }
            (GridPoint::CValue(c), ModelSpec::Svm { c_value, .. }) => {
                *c_value = *c;
            }
            _ => {
                return Err(Error::Config(
                    "grid point kind does not match the model kind".into(),
                ))
            }
        }
        reports.push(cross_validate_features(manifest, clip_features, plan, &spec)?);
    }

    let mut best_index = 0;
    for (i, report) in reports.iter().enumerate().skip(1) {
        let best = &reports[best_index];
        let better = report.uar_mean > best.uar_mean
            || (report.uar_mean == best.uar_mean && report.uar_std < best.uar_std);
        if better {
            best_index = i;
        }
    }
    Ok(GridSearchResult {
        reports,
        best_index,
    })
}

#[cfg(test)]
mod tests;
