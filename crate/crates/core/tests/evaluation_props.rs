mod common;

use proptest::prelude::*;

use common::random_dataset;
use gmil::data::{Label, MulticlassBag, MulticlassDataset};
use gmil::evaluation::{bench_scaling, cross_validate, one_vs_all, Confusion, FoldPlan};
use gmil::synth::{generate, generate_multiclass, SynthSpec};
use gmil::{classify_batch, train, Dataset, LloydConfig, NormalizationMode, TrainParams};

fn synth_params() -> TrainParams {
    TrainParams {
        clusters: 16,
        normalization: NormalizationMode::None,
        ..TrainParams::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn folds_partition_the_bags(seed in any::<u64>(), n in 4usize..60, k in 2usize..12) {
        let ds = random_dataset(seed, n, 2);
        prop_assume!(k <= ds.len());
        let plan = FoldPlan::stratified(&ds, k, seed).unwrap();
        let mut seen: Vec<&String> = plan.bag_ids.iter().flatten().collect();
        seen.sort();
        let mut all: Vec<&String> = ds.bags.iter().map(|b| &b.id).collect();
        all.sort();
        prop_assert_eq!(seen, all);
        for i in 0..k {
            prop_assert!(!plan.folds[i].is_empty());
            let train = ds.subset(&plan.train_indices(i));
            prop_assert!(train.n_positive() >= 1 && train.n_negative() >= 1);
        }
    }
}

#[test]
fn reports_are_deterministic_and_replayable() {
    let (ds, _) = generate(&SynthSpec::planted(2, 20, 20, 0.02, 8).unwrap()).unwrap();
    let params = TrainParams {
        seed: 4,
        ..synth_params()
    };
    let a = cross_validate(&ds, &params, 5, 9).unwrap();
    let b = cross_validate(&ds, &params, 5, 9).unwrap();
    assert_eq!(a.without_timings(), b.without_timings());
    assert_eq!(
        a.without_timings().to_json().unwrap(),
        b.without_timings().to_json().unwrap()
    );

    let plan = FoldPlan::stratified(&ds, 5, 9).unwrap();
    for (i, fold) in a.folds.iter().enumerate() {
        assert!((0.0..=1.0).contains(&fold.accuracy));
        assert_eq!(fold.confusion.total(), plan.folds[i].len());
        let cb = train(&ds.subset(&plan.train_indices(i)), &params).unwrap();
        let test = ds.subset(&plan.folds[i]);
        let preds = classify_batch(&test.bags, &cb).unwrap();
        let mut c = Confusion::default();
        for (bag, p) in test.bags.iter().zip(&preds) {
            c.record(bag.label, p.label);
        }
        assert_eq!(c, fold.confusion);
        assert_eq!(fold.predictions, preds.iter().map(|p| p.label).collect::<Vec<_>>());
    }
    let mean = a.folds.iter().map(|f| f.accuracy).sum::<f64>() / 5.0;
    assert_eq!(a.mean_accuracy, mean);
}

#[test]
fn two_classes_are_label_mirrors() {
    let (ds, _) = generate_multiclass(2, 2, 20, 0.02, 1).unwrap();
    let a = ds.one_vs_rest("class0").unwrap();
    let b = ds.one_vs_rest("class1").unwrap();
    for (x, y) in a.bags.iter().zip(&b.bags) {
        assert_ne!(x.label, y.label);
        assert_eq!(x.instances, y.instances);
    }
    let r = one_vs_all(&ds, &synth_params(), 5, 0).unwrap();
    assert_eq!(r.classes.len(), 2);
}

#[test]
fn five_planted_classes() {
    // the rest classes carry their own targets, which negative centers pick up
    let (ds, _) = generate_multiclass(2, 5, 30, 0.02, 3).unwrap();
    let params = TrainParams {
        clusters: 32,
        pos_centers: 1,
        neg_centers: 4,
        ..synth_params()
    };
    let r = one_vs_all(&ds, &params, 10, 3).unwrap();
    for c in &r.classes {
        assert!(c.report.mean_accuracy >= 0.9, "{}: {}", c.class, c.report.mean_accuracy);
    }
}

#[test]
fn duplicated_class_is_reported_not_rejected() {
    let (ds, _) = generate_multiclass(2, 2, 20, 0.02, 5).unwrap();
    let mut bags = ds.bags.clone();
    bags.extend(ds.bags.iter().filter(|b| b.class == "class0").map(|b| MulticlassBag {
        id: format!("copy-{}", b.id),
        class: "twin".into(),
        instances: b.instances.clone(),
    }));
    let ds = MulticlassDataset { dimension: 2, bags };
    let r = one_vs_all(&ds, &synth_params(), 5, 0).unwrap();
    let acc = |name: &str| r.classes.iter().find(|c| c.class == name).unwrap().report.mean_accuracy;
    assert!(acc("class0") < 0.8, "{}", acc("class0"));
    assert!(acc("twin") < 0.8, "{}", acc("twin"));
}

#[test]
fn one_class_is_an_error() {
    let ds = MulticlassDataset {
        dimension: 1,
        bags: vec![MulticlassBag {
            id: "a".into(),
            class: "only".into(),
            instances: vec![gmil::Instance(vec![0.0])],
        }],
    };
    assert!(one_vs_all(&ds, &synth_params(), 2, 0).is_err());
}

fn bench_template() -> SynthSpec {
    let mut t = SynthSpec::planted(4, 1, 1, 0.02, 0).unwrap();
    t.instances_per_bag = (10, 10);
    t
}

#[test]
fn single_size_bench_has_no_slope() {
    let params = TrainParams {
        clusters: 5,
        ..TrainParams::default()
    };
    let r = bench_scaling(&bench_template(), &[500], &params, 1).unwrap();
    assert_eq!(r.rows.len(), 1);
    assert_eq!(r.rows[0].instances, 500);
    assert!(r.slope.is_none());
    let mut csv = Vec::new();
    r.write_csv(&mut csv).unwrap();
    assert!(String::from_utf8(csv)
        .unwrap()
        .starts_with("instances,bags,train_seconds\n500,50,"));
}

#[test]
fn capped_bench_stays_near_linear() {
    let params = TrainParams {
        clusters: 20,
        sample_cap: Some(5_000),
        lloyd: LloydConfig { max_iter: 10, tol: 0.0 },
        ..TrainParams::default()
    };
    let r = bench_scaling(&bench_template(), &[20_000, 40_000, 80_000], &params, 3).unwrap();
    let slope = r.slope.unwrap();
    assert!(slope <= 1.15, "{slope} {:?}", r.rows);
}

#[test]
fn bench_sizes_must_ascend() {
    assert!(bench_scaling(&bench_template(), &[200, 100], &TrainParams::default(), 1).is_err());
}

#[test]
fn k_larger_than_bag_count_is_an_error() {
    let ds: Dataset = random_dataset(1, 4, 2);
    assert!(cross_validate(
        &ds,
        &TrainParams {
            clusters: 2,
            ..TrainParams::default()
        },
        5,
        0
    )
    .is_err());
    assert_eq!(ds.bags[0].label, Label::Positive);
}
