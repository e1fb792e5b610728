//! Acceptance criteria. Runs as a plain program (no test harness) so every
//! criterion prints exactly one PASS/FAIL line; exits non-zero if any fail.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gmil::clustering::{assign, squared_distance, ClusterModel};
use gmil::codebook::count_bins;
use gmil::data::{Bag, Dataset, Instance, Label};
use gmil::evaluation::{bench_scaling, cross_validate, cross_validate_grid};
use gmil::oracle::{verify_theorem1, BoundChainSuite};
use gmil::{classify_batch, generate, load_csv, min_hausdorff, train, CsvSchema, LloydConfig, NormalizationMode};
use gmil::{SynthSpec, TrainParams};

struct Outcome {
    passed: bool,
    detail: String,
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn musk_runs(file: &str, clusters: usize, p: usize, q: usize) -> (Vec<f64>, Vec<f64>) {
    let ds = load_csv(data(file), &CsvSchema::default()).expect("musk data");
    let mut acc = Vec::new();
    let mut secs = Vec::new();
    for seed in 0..10 {
        let params = TrainParams {
            clusters,
            pos_centers: p,
            neg_centers: q,
            epsilon: 1e-4,
            seed,
            normalization: NormalizationMode::MinMax,
            ..TrainParams::default()
        };
        let start = Instant::now();
        let r = cross_validate(&ds, &params, 10, seed).expect("cv");
        secs.push(start.elapsed().as_secs_f64());
        acc.push(r.mean_accuracy * 100.0);
    }
    (acc, secs)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn musk1() -> Outcome {
    let (acc, secs) = musk_runs("musk1.csv", 10, 2, 0);
    let m = mean(&acc);
    let total: f64 = secs.iter().sum();
    Outcome {
        passed: (78.0..=92.0).contains(&m) && total < 60.0,
        detail: format!("mean accuracy {m:.2}% (target 85.0 +/- 7), {total:.1}s for 10 seeds"),
    }
}

fn musk2() -> Outcome {
    let (acc, secs) = musk_runs("musk2.csv", 22, 2, 2);
    let m = mean(&acc);
    let worst = secs.iter().copied().fold(0.0, f64::max);
    Outcome {
        passed: (76.2..=90.2).contains(&m) && worst < 300.0,
        detail: format!("mean accuracy {m:.2}% over 10 seeds (target 83.2 +/- 7), slowest 10-fold run {worst:.1}s"),
    }
}

fn q_sensitivity() -> Outcome {
    let ds = load_csv(data("musk2.csv"), &CsvSchema::default()).expect("musk2");
    let qs = [0usize, 1, 2, 4, 8, 16];
    let pairs: Vec<(usize, usize)> = qs.iter().map(|&q| (2, q)).collect();
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 0..10 {
        let params = TrainParams {
            clusters: 22,
            pos_centers: 2,
            seed,
            ..TrainParams::default()
        };
        let reports = cross_validate_grid(&ds, &params, 10, seed, &pairs).expect("cv grid");
        let acc: Vec<f64> = reports.iter().map(|r| r.mean_accuracy).collect();
        let best_small = acc[..4].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        wins += usize::from(best_small > acc[5]);
        lines.push(format!("{:.3}/{:.3}", best_small, acc[5]));
    }
    Outcome {
        passed: wins >= 7,
        detail: format!(
            "best q<=4 beats q=16 in {wins}/10 runs (best small / q16: {})",
            lines.join(" ")
        ),
    }
}

fn theorem1() -> Outcome {
    let start = Instant::now();
    let r = verify_theorem1(100_000, &(2..=10).collect::<Vec<_>>(), 2024).expect("theorem1");
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        passed: r.violations == 0 && secs < 10.0,
        detail: format!(
            "{} trials ({} near equality), {} violations, worst log slack {:.2e}, {secs:.2}s",
            r.trials, r.near_equality_trials, r.violations, r.worst_log_slack
        ),
    }
}

fn bound_chain() -> Outcome {
    let reports = BoundChainSuite::default().run().expect("bound chain");
    let qualifying: usize = reports.iter().map(|r| r.qualifying).sum();
    let window: usize = reports.iter().map(|r| r.window_premise).sum();
    let violations: usize = reports.iter().map(|r| r.violations).sum();
    let target_ok = reports.iter().filter(|r| r.target_qualifies == Some(true)).count();
    let hits = reports.iter().filter(|r| r.argmaxes_hit_target() == Some(true)).count();
    Outcome {
        passed: violations == 0 && qualifying > 0,
        detail: format!(
            "{} datasets, {window} window-premise / {qualifying} qualifying candidates, {violations} violations; \
             target qualifies in {target_ok}/20, both maxima on target cell in {hits}/20",
            reports.len()
        ),
    }
}

fn planted_recovery() -> Outcome {
    let sigma = 0.02;
    let params = TrainParams {
        clusters: 16,
        pos_centers: 1,
        neg_centers: 0,
        normalization: NormalizationMode::None,
        ..TrainParams::default()
    };
    let mut acc = Vec::new();
    let mut recovered = 0;
    for seed in 0..10 {
        let spec = SynthSpec::planted(2, 50, 50, sigma, seed).expect("spec");
        let (train_ds, truth) = generate(&spec).expect("train set");
        let (test_ds, _) = generate(&spec.reseeded(seed + 1000)).expect("test set");
        let cb = train(&train_ds, &TrainParams { seed, ..params.clone() }).expect("train");
        let preds = classify_batch(&test_ds.bags, &cb).expect("classify");
        let correct = test_ds
            .bags
            .iter()
            .zip(&preds)
            .filter(|(b, p)| b.label == p.label)
            .count();
        acc.push(100.0 * correct as f64 / test_ds.len() as f64);
        let d = squared_distance(&cb.positive_centers[0], &truth.targets[0]).sqrt();
        recovered += usize::from(d <= 3.0 * sigma);
    }
    let m = mean(&acc);
    Outcome {
        passed: m >= 95.0 && recovered >= 9,
        detail: format!("mean held-out accuracy {m:.2}%, top center within 3 sigma in {recovered}/10"),
    }
}

fn scaling() -> Outcome {
    let mut template = SynthSpec::planted(8, 1, 1, 0.02, 0).expect("template");
    template.instances_per_bag = (10, 10);
    let params = TrainParams {
        clusters: 50,
        lloyd: LloydConfig { max_iter: 10, tol: 0.0 },
        ..TrainParams::default()
    };
    let r = bench_scaling(&template, &[10_000, 20_000, 40_000, 80_000], &params, 5).expect("bench");
    let slope = r.slope.expect("slope");
    let rows: Vec<String> = r
        .rows
        .iter()
        .map(|r| format!("{}:{:.3}s", r.instances, r.train_seconds))
        .collect();
    Outcome {
        passed: slope <= 1.15,
        detail: format!("log-log slope {slope:.3} ({})", rows.join(", ")),
    }
}

fn random_points(rng: &mut ChaCha8Rng, sizes: std::ops::RangeInclusive<usize>, d: usize) -> Vec<Vec<f64>> {
    let n = rng.random_range(sizes);
    // a coarse lattice makes exact ties common
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-3..=3) as f64 * 0.5).collect())
        .collect()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = [0usize; 3];
    for _ in 0..1000 {
        let d = rng.random_range(1..=4);
        let xs = random_points(&mut rng, 1..=6, d);
        let ys = random_points(&mut rng, 1..=6, d);
        let mut brute = f64::INFINITY;
        for x in &xs {
            for y in &ys {
                let s: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                brute = brute.min(s.sqrt());
            }
        }
        mismatches[0] += usize::from(min_hausdorff(&xs, &ys).unwrap() != brute);

        let k = rng.random_range(1..=5);
        let model = ClusterModel {
            centroids: random_points(&mut rng, k..=k, d),
            seed: None,
            inertia: 0.0,
            iterations: 0,
        };
        let n_bags = rng.random_range(2..=5);
        let bags: Vec<Bag> = (0..n_bags)
            .map(|i| {
                let label = if i % 2 == 0 { Label::Positive } else { Label::Negative };
                let pts = random_points(&mut rng, 1..=4, d);
                Bag::new(format!("b{i}"), label, pts.into_iter().map(Instance).collect()).unwrap()
            })
            .collect();
        let ds = Dataset::new(bags).unwrap();
        let points: Vec<&Instance> = ds.instances().collect();
        let got = assign(&points, &model).unwrap();
        let want: Vec<usize> = points
            .iter()
            .map(|x| {
                let dist: Vec<f64> = model
                    .centroids
                    .iter()
                    .map(|c| x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum())
                    .collect();
                (0..k).find(|&j| dist.iter().all(|&o| dist[j] <= o)).unwrap()
            })
            .collect();
        mismatches[1] += usize::from(got.0 != want);

        let counts = count_bins(&ds, &got, k).unwrap();
        let mut pos = vec![0u64; k];
        let mut neg = vec![0u64; k];
        let mut at = 0;
        for bag in &ds.bags {
            for _ in &bag.instances {
                if bag.label == Label::Positive {
                    pos[want[at]] += 1;
                } else {
                    neg[want[at]] += 1;
                }
                at += 1;
            }
        }
        mismatches[2] += usize::from(counts.positive != pos || counts.negative != neg);
    }
    Outcome {
        passed: mismatches == [0, 0, 0],
        detail: format!(
            "1000 random cases; mismatches min_hausdorff {}, assign {}, count_bins {}",
            mismatches[0], mismatches[1], mismatches[2]
        ),
    }
}

fn gmil(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_gmil"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let mut failures = Vec::new();
    let mut ok = true;
    for run in ["a", "b"] {
        let steps: [Vec<String>; 6] = [
            vec![
                "synth".into(),
                "--seed".into(),
                "5".into(),
                "--out".into(),
                p(&format!("{run}.csv")),
            ],
            vec![
                "train".into(),
                "--data".into(),
                p("a.csv"),
                "--clusters".into(),
                "12".into(),
                "--seed".into(),
                "3".into(),
                "--out".into(),
                p(&format!("{run}.model.json")),
            ],
            vec![
                "predict".into(),
                "--model".into(),
                p("a.model.json"),
                "--data".into(),
                p("a.csv"),
                "--out".into(),
                p(&format!("{run}.pred.csv")),
            ],
            vec![
                "cv".into(),
                "--data".into(),
                p("a.csv"),
                "--k-folds".into(),
                "5".into(),
                "--clusters".into(),
                "12".into(),
                "--seed".into(),
                "3".into(),
                "--omit-timings".into(),
                "--out".into(),
                p(&format!("{run}.cv.json")),
            ],
            vec![
                "verify".into(),
                "--check".into(),
                "theorem1".into(),
                "--trials".into(),
                "2000".into(),
                "--out".into(),
                p(&format!("{run}.verify.json")),
            ],
            vec![
                "bench".into(),
                "--sizes".into(),
                "1000,2000".into(),
                "--clusters".into(),
                "5".into(),
                "--repeats".into(),
                "1".into(),
                "--out".into(),
                p(&format!("{run}.bench.csv")),
            ],
        ];
        for s in &steps {
            let args: Vec<&str> = s.iter().map(String::as_str).collect();
            ok &= gmil(&args);
        }
    }
    let read = |name: String| std::fs::read(dir.path().join(name)).unwrap_or_default();
    for out in [
        "csv",
        "csv.truth.json",
        "model.json",
        "pred.csv",
        "cv.json",
        "verify.json",
    ] {
        if read(format!("a.{out}")) != read(format!("b.{out}")) || read(format!("a.{out}")).is_empty() {
            failures.push(out.to_string());
        }
    }
    // bench rows: everything but the timing column
    let strip = |name: &str| -> Vec<String> {
        String::from_utf8_lossy(&read(name.into()))
            .lines()
            .map(|l| l.rsplit_once(',').map(|(a, _)| a.to_string()).unwrap_or_default())
            .collect()
    };
    if strip("a.bench.csv") != strip("b.bench.csv") || strip("a.bench.csv").len() != 3 {
        failures.push("bench.csv".into());
    }
    Outcome {
        passed: ok && failures.is_empty(),
        detail: if ok && failures.is_empty() {
            "synth, train, predict, cv, verify, bench outputs identical across two runs".into()
        } else {
            format!("commands ok: {ok}; differing outputs: {failures:?}")
        },
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 musk1 reproduction", musk1),
        ("2 musk2 reproduction", musk2),
        ("3 q-sensitivity on musk2", q_sensitivity),
        ("4 sum/product ratio property", theorem1),
        ("5 bound-chain verification", bound_chain),
        ("6 planted-concept recovery", planted_recovery),
        ("7 linear scaling", scaling),
        ("8 oracle equivalence", oracle_equivalence),
        ("9 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        failed += usize::from(!o.passed);
        println!(
            "{} criterion {name}: {} [{:.1}s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/9 passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
