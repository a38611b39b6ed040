use super::*;
use crate::ingest::{generate_synthetic_corpus, parse_manifest, SyntheticSpec, MANIFEST_HEADER};
use rand::{RngExt, SeedableRng};

fn manifest_of(n_players: usize, clips_per_player: usize) -> DatasetManifest {
    let mut text = String::from(MANIFEST_HEADER);
    text.push('\n');
    for p in 0..n_players {
        let sex = if p < n_players.div_ceil(2) { "female" } else { "male" };
        for c in 0..clips_per_player {
            let score = if c % 2 == 0 { "scored" } else { "not_scored" };
            text.push_str(&format!("rec{p:02},p{p:02},{},1000,{sex},{score}\n", c * 1000));
        }
    }
    parse_manifest(&text).unwrap()
}

#[test]
fn twenty_players_give_balanced_folds() {
    let manifest = manifest_of(20, 2);
    let plan = plan_folds(&manifest, 5, 7).unwrap();
    for fold in &plan.fold_members {
        assert_eq!(fold.len(), 4);
        let females = fold.iter().filter(|p| p.as_str() < "p10").count();
        assert_eq!(females, 2, "fold {fold:?}");
    }
}

#[test]
fn five_players_one_per_fold() {
    let manifest = manifest_of(5, 2);
    let plan = plan_folds(&manifest, 5, 3).unwrap();
    for fold in &plan.fold_members {
        assert_eq!(fold.len(), 1);
    }
}

#[test]
fn plans_are_seed_deterministic() {
    let manifest = manifest_of(12, 2);
    assert_eq!(plan_folds(&manifest, 5, 9).unwrap(), plan_folds(&manifest, 5, 9).unwrap());
    assert_ne!(plan_folds(&manifest, 5, 9).unwrap(), plan_folds(&manifest, 5, 10).unwrap());
}

#[test]
fn too_few_players_rejected() {
    let manifest = manifest_of(4, 2);
    assert!(matches!(
        plan_folds(&manifest, 5, 0).unwrap_err(),
        Error::TooFewPlayers { k: 5, players: 4 }
    ));
}

#[test]
fn random_plans_satisfy_invariants() {
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(77);
    for trial in 0..200 {
        let players = rng.random_range(5..40usize);
        let manifest = manifest_of(players, 2);
        let plan = plan_folds(&manifest, 5, trial).unwrap();
        let mut all: Vec<&String> = Vec::new();
        for fold in &plan.fold_members {
            all.extend(fold.iter());
        }
        let unique: BTreeSet<&&String> = all.iter().collect();
        assert_eq!(unique.len(), all.len(), "folds overlap");
        assert_eq!(all.len(), players, "folds must cover every player");
        let sizes: Vec<usize> = plan.fold_members.iter().map(|f| f.len()).collect();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(hi - lo <= 1, "sizes {sizes:?}");
        // per-fold sex composition balanced within one player
        let females: Vec<usize> = plan
            .fold_members
            .iter()
            .map(|f| f.iter().filter(|p| p.as_str() < format!("p{:02}", players.div_ceil(2)).as_str()).count())
            .collect();
        let (flo, fhi) = (females.iter().min().unwrap(), females.iter().max().unwrap());
        assert!(fhi - flo <= 1, "female counts {females:?}");
    }
}

#[test]
fn confusion_diagonal_for_perfect_predictions() {
    let truth = vec![0, 1, 0, 1, 1];
    let cm = confusion(&truth, &truth, 2).unwrap();
    assert_eq!(cm.get(0, 0), 2);
    assert_eq!(cm.get(1, 1), 3);
    assert_eq!(cm.get(0, 1), 0);
    assert_eq!(cm.get(1, 0), 0);
}

#[test]
fn confusion_hand_count() {
    let truth = vec![0, 0, 1, 1];
    let pred = vec![0, 1, 1, 1];
    let cm = confusion(&truth, &pred, 2).unwrap();
    assert_eq!(cm.row_major(), &[1, 1, 0, 2]);
}

#[test]
fn confusion_matches_brute_force_tally() {
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(123);
    let n = 1000;
    let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..2usize)).collect();
    let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..2usize)).collect();
    let cm = confusion(&truth, &pred, 2).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let naive = truth
                .iter()
                .zip(&pred)
                .filter(|(t, p)| **t == i && **p == j)
                .count() as u64;
            assert_eq!(cm.get(i, j), naive);
        }
    }
    assert_eq!(cm.total(), n as u64);
}

#[test]
fn confusion_rejects_mismatched_lengths_and_labels() {
    assert!(matches!(
        confusion(&[0, 1], &[0], 2).unwrap_err(),
        Error::LabelLengthMismatch { .. }
    ));
    assert!(matches!(
        confusion(&[0, 2], &[0, 1], 2).unwrap_err(),
        Error::UnknownLabel(2)
    ));
}

#[test]
fn uar_anchored_example() {
    // female recall 96.5 %, male recall 87.5 % -> UAR 0.92
    let cm = ConfusionMatrix::from_counts(2, vec![193, 7, 25, 175]);
    let got = uar(&cm).unwrap();
    // bit-exact against the defining arithmetic, and at 0.92 within 1e-12
    assert_eq!(got, (193.0 / 200.0 + 175.0 / 200.0) / 2.0);
    assert!((got - 0.92).abs() < 1e-12);
}

#[test]
fn uar_perfect_is_one() {
    let cm = ConfusionMatrix::from_counts(2, vec![50, 0, 0, 30]);
    assert_eq!(uar(&cm).unwrap(), 1.0);
}

#[test]
fn uar_direct_arithmetic() {
    let cm = ConfusionMatrix::from_counts(2, vec![35, 5, 10, 30]);
    assert_eq!(uar(&cm).unwrap(), 0.8125);
}

#[test]
fn uar_rejects_empty_class() {
    let cm = ConfusionMatrix::from_counts(2, vec![10, 0, 0, 0]);
    assert!(matches!(uar(&cm).unwrap_err(), Error::EmptyClass(1)));
}

#[test]
fn uar_invariant_under_relabeling() {
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(9);
    for _ in 0..100 {
        let a = rng.random_range(1..50u64);
        let b = rng.random_range(0..50u64);
        let c = rng.random_range(0..50u64);
        let d = rng.random_range(1..50u64);
        let cm = ConfusionMatrix::from_counts(2, vec![a, b, c, d]);
        // swapping class ids permutes rows and columns
        let swapped = ConfusionMatrix::from_counts(2, vec![d, c, b, a]);
        assert!((uar(&cm).unwrap() - uar(&swapped).unwrap()).abs() < 1e-15);
    }
}

#[test]
fn uar_equals_accuracy_on_balanced_data() {
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n_per_class = rng.random_range(10..200usize);
        let mut truth = Vec::new();
        let mut pred = Vec::new();
        for class in 0..2usize {
            for _ in 0..n_per_class {
                truth.push(class);
                pred.push(rng.random_range(0..2usize));
            }
        }
        let cm = confusion(&truth, &pred, 2).unwrap();
        let accuracy = truth
            .iter()
            .zip(&pred)
            .filter(|(t, p)| t == p)
            .count() as f64
            / truth.len() as f64;
        assert!((uar(&cm).unwrap() - accuracy).abs() < 1e-12);
    }
}

fn small_corpus(seed: u64) -> (crate::ingest::SynthCorpus, FoldPlan) {
    let spec = SyntheticSpec::new(10, 4, seed);
    let corpus = generate_synthetic_corpus(&spec).unwrap();
    let plan = plan_folds(&corpus.manifest, 5, 21).unwrap();
    (corpus, plan)
}

#[test]
fn constant_model_scores_exact_chance_on_balanced_corpus() {
    let (corpus, plan) = small_corpus(5);
    let spec = ExperimentSpec {
        task: Task::Sex,
        subset: Subset::Combined,
        feature: FeatureSpec::sequence(FeatureKind::Mfcc),
        model: ModelSpec::Constant { class: 0 },
        seed_folds: 21,
        seed_train: 1,
    };
    let report = cross_validate(&corpus.manifest, &corpus, &plan, &spec).unwrap();
    assert!(
        (report.uar_mean - 0.5).abs() < 1e-12,
        "uar_mean {}",
        report.uar_mean
    );
    for u in &report.per_fold_uar {
        assert!((u - 0.5).abs() < 1e-12);
    }
}

#[test]
fn cross_validation_is_deterministic() {
    let (corpus, plan) = small_corpus(6);
    let spec = ExperimentSpec {
        task: Task::Sex,
        subset: Subset::Combined,
        feature: FeatureSpec::aggregated(FeatureKind::Mfcc, Aggregation::Mean),
        model: ModelSpec::svm(1e-2),
        seed_folds: 21,
        seed_train: 3,
    };
    let a = cross_validate(&corpus.manifest, &corpus, &plan, &spec).unwrap();
    let b = cross_validate(&corpus.manifest, &corpus, &plan, &spec).unwrap();
    assert_eq!(a.without_timestamp(), b.without_timestamp());
}

#[test]
fn report_std_matches_independent_two_pass_formula() {
    let (corpus, plan) = small_corpus(7);
    let spec = ExperimentSpec {
        task: Task::Score,
        subset: Subset::Combined,
        feature: FeatureSpec::aggregated(FeatureKind::Mfcc, Aggregation::Mean),
        model: ModelSpec::svm(1e-3),
        seed_folds: 21,
        seed_train: 5,
    };
    let report = cross_validate(&corpus.manifest, &corpus, &plan, &spec).unwrap();
    let mean: f64 = report.per_fold_uar.iter().sum::<f64>() / report.per_fold_uar.len() as f64;
    let var: f64 = report
        .per_fold_uar
        .iter()
        .map(|u| (u - mean).powi(2))
        .sum::<f64>()
        / report.per_fold_uar.len() as f64;
    assert!((report.uar_mean - mean).abs() < 1e-12);
    assert!((report.uar_std - var.sqrt()).abs() < 1e-12);
}

#[test]
fn subset_reports_cover_exactly_the_subset_clips() {
    let spec = SyntheticSpec::new(10, 4, 8);
    let corpus = generate_synthetic_corpus(&spec).unwrap();
    let women = filter_subset(&corpus.manifest, Subset::Women);
    assert_eq!(women.records.len(), 20);
    let plan = plan_folds(&women, 5, 13).unwrap();
    let exp = ExperimentSpec {
        task: Task::Score,
        subset: Subset::Women,
        feature: FeatureSpec::aggregated(FeatureKind::Mfcc, Aggregation::Mean),
        model: ModelSpec::svm(1e-2),
        seed_folds: 13,
        seed_train: 2,
    };
    let report = cross_validate(&women, &corpus, &plan, &exp).unwrap();
    let total: usize = report.fold_test_counts.iter().sum();
    assert_eq!(total, women.records.len());
}

#[test]
fn unfiltered_manifest_with_subset_rejected() {
    let (corpus, plan) = small_corpus(9);
    let exp = ExperimentSpec {
        task: Task::Score,
        subset: Subset::Women,
        feature: FeatureSpec::aggregated(FeatureKind::Mfcc, Aggregation::Mean),
        model: ModelSpec::svm(1e-2),
        seed_folds: 21,
        seed_train: 2,
    };
    assert!(cross_validate(&corpus.manifest, &corpus, &plan, &exp).is_err());
}

#[test]
fn invalid_combinations_rejected_before_compute() {
    let base = ExperimentSpec {
        task: Task::Sex,
        subset: Subset::Combined,
        feature: FeatureSpec::sequence(FeatureKind::CompareFunctionals),
        model: ModelSpec::net(Architecture::Crnn, HpSet::by_id("I").unwrap(), 10),
        seed_folds: 0,
        seed_train: 0,
    };
    assert!(matches!(base.validate().unwrap_err(), Error::BadCombination(_)));

    let spectro_lstm = ExperimentSpec {
        feature: FeatureSpec::sequence(FeatureKind::Spectrogram),
        model: ModelSpec::net(Architecture::LstmRnn, HpSet::by_id("I").unwrap(), 10),
        ..base.clone()
    };
    assert!(matches!(spectro_lstm.validate().unwrap_err(), Error::BadCombination(_)));

    let svm_no_agg = ExperimentSpec {
        feature: FeatureSpec::sequence(FeatureKind::Mfcc),
        model: ModelSpec::svm(1.0),
        ..base.clone()
    };
    assert!(matches!(svm_no_agg.validate().unwrap_err(), Error::BadCombination(_)));

    let sex_subset = ExperimentSpec {
        feature: FeatureSpec::aggregated(FeatureKind::Mfcc, Aggregation::Mean),
        model: ModelSpec::svm(1.0),
        subset: Subset::Men,
        ..base
    };
    assert!(matches!(sex_subset.validate().unwrap_err(), Error::BadCombination(_)));
}

#[test]
fn hp_sets_cover_the_six_predefined_points() {
    let expected = [
        ("I", 16, 5e-5),
        ("II", 16, 1e-4),
        ("III", 16, 1e-3),
        ("IV", 32, 1e-3),
        ("V", 64, 1e-4),
        ("VI", 64, 1e-5),
    ];
    assert_eq!(HpSet::ALL.len(), 6);
    for ((id, batch, lr), hp) in expected.iter().zip(HpSet::ALL.iter()) {
        assert_eq!(hp.id, *id);
        assert_eq!(hp.batch_size, *batch);
        assert_eq!(hp.learning_rate, *lr);
    }
}

#[test]
fn single_point_grid_is_trivially_best() {
    let (corpus, plan) = small_corpus(10);
    let base = ExperimentSpec {
        task: Task::Sex,
        subset: Subset::Combined,
        feature: FeatureSpec::aggregated(FeatureKind::Mfcc, Aggregation::Mean),
        model: ModelSpec::svm(1.0),
        seed_folds: 21,
        seed_train: 4,
    };
    let result = grid_search(&corpus.manifest, &corpus, &plan, &base, &[GridPoint::CValue(1e-3)])
        .unwrap();
    assert_eq!(result.reports.len(), 1);
    assert_eq!(result.best_index, 0);
    assert_eq!(result.reports[0].hyperparameters.c_value, Some(1e-3));
}

#[test]
fn c_grid_produces_seven_reports() {
    let (corpus, plan) = small_corpus(11);
    let base = ExperimentSpec {
        task: Task::Sex,
        subset: Subset::Combined,
        feature: FeatureSpec::aggregated(FeatureKind::Mfcc, Aggregation::Mean),
        model: ModelSpec::Svm {
            c_value: 1.0,
            iterations: 50,
        },
        seed_folds: 21,
        seed_train: 4,
    };
    let grid: Vec<GridPoint> = (-5..=1).map(|e| GridPoint::CValue(10f64.powi(e))).collect();
    let result = grid_search(&corpus.manifest, &corpus, &plan, &base, &grid).unwrap();
    assert_eq!(result.reports.len(), 7);
    let best = &result.reports[result.best_index];
    for r in &result.reports {
        assert!(best.uar_mean >= r.uar_mean);
    }
}

#[test]
fn mismatched_grid_point_rejected() {
    let (corpus, plan) = small_corpus(12);
    let base = ExperimentSpec {
        task: Task::Sex,
        subset: Subset::Combined,
        feature: FeatureSpec::aggregated(FeatureKind::Mfcc, Aggregation::Mean),
        model: ModelSpec::svm(1.0),
        seed_folds: 21,
        seed_train: 4,
    };
    let grid = [GridPoint::Hp(HpSet::by_id("I").unwrap())];
    assert!(grid_search(&corpus.manifest, &corpus, &plan, &base, &grid).is_err());
}

#[test]
fn report_json_round_trips() {
    let (corpus, plan) = small_corpus(13);
    let spec = ExperimentSpec {
        task: Task::Sex,
        subset: Subset::Combined,
        feature: FeatureSpec::aggregated(FeatureKind::Mfcc, Aggregation::Middle),
        model: ModelSpec::svm(1e-2),
        seed_folds: 21,
        seed_train: 6,
    };
    let report = cross_validate(&corpus.manifest, &corpus, &plan, &spec).unwrap();
    let json = report.to_json();
    let back = EvalReport::from_json(&json).unwrap();
    assert_eq!(report, back);
}
