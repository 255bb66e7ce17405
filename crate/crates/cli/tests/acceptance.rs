//! Acceptance suite. Every criterion runs at its stated tolerance and prints
//! one PASS/FAIL line; the test fails if any criterion fails.
//!
//! Criterion 7 needs the FCPS files. Point `ICOT_FCPS_DIR` at a directory
//! holding `Tetra.lrn`, `Tetra.cls`, `TwoDiamonds.lrn` and `TwoDiamonds.cls`
//! to run it; otherwise it is reported as not run.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::{naive_dunn, naive_silhouette, small_instance};
use icot::oracle::{build_mio_model, check_feasibility, enumerate_optimal};
use icot::report::{run_methods, Method};
use icot::{
    dunn, fit, generate_synthetic, silhouette, Assignment, Criterion, Dataset, SearchConfig, SyntheticShape,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Silhouette of the hand instance {0, 0.1, 0.9, 1} split at 0.5,
/// (0.85/0.95 + 0.75/0.85) / 2, from the brute-force oracle.
const HAND_SILHOUETTE: f64 = 0.888_544_891_640_866_9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn report(line: &str) {
    // Written past the test harness capture so the lines always show.
    let mut err = std::io::stderr();
    let _ = writeln!(err, "{line}");
}

fn run(id: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    if let Some(limit) = limit {
        if elapsed > limit {
            out.pass = false;
            out.detail = format!("{}; exceeded the {:?} limit", out.detail, limit);
        }
    }
    let status = if out.pass { "PASS" } else { "FAIL" };
    report(&format!("[{status}] criterion {id} ({:.2}s): {}", elapsed.as_secs_f64(), out.detail));
    out.pass
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(2..=50);
        let p = rng.gen_range(1..=4);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.gen_range(0..10) as f64).collect()).collect();
        let Ok(data) = Dataset::from_rows(&rows) else { continue };
        let k = rng.gen_range(1..=6);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let a = Assignment::from_labels(&labels).unwrap();
        let s = silhouette(data.distances(), &a).unwrap().value;
        let d = dunn(data.distances(), &a).unwrap().value;
        let ds = naive_dunn(data.rows(), &labels);
        worst = worst
            .max((s - naive_silhouette(data.rows(), &labels)).abs())
            .max((d - ds).abs() / ds.max(1.0));
    }
    outcome(worst <= 1e-9, format!("max deviation from reference metrics {worst:.2e} (tolerance 1e-9)"))
}

fn small_instances() -> Vec<(Dataset, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    (0..50)
        .map(|_| {
            let (rows, depth) = small_instance(&mut rng);
            (Dataset::from_rows(&rows).unwrap(), depth)
        })
        .collect()
}

fn small_config(criterion: Criterion, depth: usize, seed: u64) -> SearchConfig {
    SearchConfig {
        criterion,
        max_depth: depth,
        min_bucket: 2,
        restarts: 50,
        seed,
        ..SearchConfig::default()
    }
}

fn criterion_2(instances: &[(Dataset, usize)]) -> Outcome {
    let mut exact = 0;
    let mut ratio_failures = Vec::new();
    for (idx, (data, depth)) in instances.iter().enumerate() {
        let mut all_equal = true;
        for c in Criterion::ALL {
            let (_, best) = enumerate_optimal(data, c, *depth, 2).unwrap();
            let found = fit(data, &small_config(c, *depth, idx as u64)).unwrap().score.value;
            if found < best.value - 0.01 * best.value.abs() {
                ratio_failures.push(format!("#{idx} {c}: {found} vs {}", best.value));
            }
            if (found - best.value).abs() > 1e-9 * best.value.abs().max(1.0) {
                all_equal = false;
            }
        }
        exact += usize::from(all_equal);
    }
    outcome(
        ratio_failures.is_empty() && exact >= 45,
        format!(
            "{exact}/50 instances match the exhaustive optimum on both criteria (need 45); below 0.99 x optimum: {}",
            if ratio_failures.is_empty() { "none".to_string() } else { ratio_failures.join(", ") }
        ),
    )
}

fn criterion_3(instances: &[(Dataset, usize)]) -> Outcome {
    let mut violated = Vec::new();
    let mut worst: f64 = 0.0;
    for (idx, (data, depth)) in instances.iter().enumerate() {
        let model = build_mio_model(data, *depth, 2, None).unwrap();
        for c in Criterion::ALL {
            let tree = fit(data, &small_config(c, *depth, idx as u64)).unwrap().tree;
            let check = check_feasibility(&model, &tree, data).unwrap();
            if !check.is_feasible() {
                violated.push(format!("#{idx} {c}: {}", check.violations[0].row));
            }
            worst = worst.max((check.model_silhouette - check.metric_silhouette).abs());
        }
    }
    outcome(
        violated.is_empty() && worst <= 1e-9,
        format!(
            "100 fitted trees, {} with violated rows; max model/metric Silhouette gap {worst:.2e}",
            violated.len()
        ),
    )
}

fn criterion_4() -> Outcome {
    let data = Dataset::from_rows(&[vec![0.0], vec![0.1], vec![0.9], vec![1.0]]).unwrap();
    let mut problems = Vec::new();
    let mut values = Vec::new();
    for (c, expected, tol) in [(Criterion::Silhouette, HAND_SILHOUETTE, 1e-6), (Criterion::Dunn, 8.0, 1e-9)] {
        let result = fit(&data, &SearchConfig { criterion: c, ..SearchConfig::default() }).unwrap();
        let first_leaf = result.tree.leaves().next().expect("trees have leaves");
        let threshold = result.tree.decision_path(first_leaf).first().map(|(rule, _)| rule.threshold);
        if result.tree.leaf_count() != 2 {
            problems.push(format!("{c}: {} leaves", result.tree.leaf_count()));
        }
        match threshold {
            Some(t) if t > 0.1 && t < 0.9 => {}
            other => problems.push(format!("{c}: threshold {other:?}")),
        }
        if (result.score.value - expected).abs() > tol {
            problems.push(format!("{c}: {} vs {expected}", result.score.value));
        }
        values.push(format!("{c} = {}", result.score.value));
    }
    outcome(
        problems.is_empty(),
        format!("2 leaves split inside (0.1, 0.9), {}{}", values.join(", "), if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }),
    )
}

fn desk_config(criterion: Criterion, seed: u64) -> SearchConfig {
    SearchConfig {
        criterion,
        seed,
        ..SearchConfig::default()
    }
}

fn score(rows: &[icot::report::MethodRow], method: Method, c: Criterion) -> f64 {
    rows.iter().find(|r| r.method == method).and_then(|r| r.score(c)).expect("method was run").value
}

fn criterion_5() -> Outcome {
    let seeds = 0..5u64;
    let mut notes = Vec::new();

    let mut close = 0;
    let mut recovered = 0;
    for seed in seeds.clone() {
        let labeled = generate_synthetic(SyntheticShape::Tetra, 400, seed).unwrap();
        let config = desk_config(Criterion::Silhouette, seed);
        let methods = [Method::Icot, Method::Kmeans, Method::TwoStep];
        let out = run_methods(&labeled.data, Some(&labeled.truth), &methods, &config).unwrap();
        let s: Vec<f64> = methods.iter().map(|&m| score(&out.rows, m, Criterion::Silhouette)).collect();
        let spread = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - s.iter().cloned().fold(f64::INFINITY, f64::min);
        close += usize::from(spread <= 0.02);
        let truth = Assignment::from_labels(&labeled.truth).unwrap();
        recovered += usize::from(out.fit.assignment.same_partition(&truth));
    }
    let a = close == 5 && recovered >= 4;
    notes.push(format!("(a) tetra: Silhouettes within 0.02 in {close}/5 seeds, truth recovered in {recovered}/5"));

    let mut wins_b = 0;
    for seed in seeds.clone() {
        let labeled = generate_synthetic(SyntheticShape::TargetRings, 400, seed).unwrap();
        let out = run_methods(&labeled.data, Some(&labeled.truth), &[Method::Icot, Method::Kmeans], &desk_config(Criterion::Dunn, seed)).unwrap();
        wins_b += usize::from(score(&out.rows, Method::Icot, Criterion::Dunn) > score(&out.rows, Method::Kmeans, Criterion::Dunn));
    }
    notes.push(format!("(b) target: ICOT Dunn > K-Means Dunn in {wins_b}/5"));

    let mut wins_c = 0;
    for seed in seeds {
        let labeled = generate_synthetic(SyntheticShape::WingNut, 400, seed).unwrap();
        let out = run_methods(&labeled.data, Some(&labeled.truth), &[Method::Icot, Method::TwoStep], &desk_config(Criterion::Dunn, seed)).unwrap();
        wins_c += usize::from(score(&out.rows, Method::Icot, Criterion::Dunn) >= score(&out.rows, Method::TwoStep, Criterion::Dunn));
    }
    notes.push(format!("(c) wingnut: ICOT Dunn >= two-step Dunn in {wins_c}/5"));
    outcome(a && wins_b == 5 && wins_c == 5, notes.join("; "))
}

fn criterion_6() -> Outcome {
    let mut runs = 0;
    let mut losses = Vec::new();
    for shape in SyntheticShape::ALL {
        for c in Criterion::ALL {
            for seed in 0..5u64 {
                let labeled = generate_synthetic(shape, 400, seed).unwrap();
                let out = run_methods(&labeled.data, Some(&labeled.truth), &[Method::Icot, Method::TwoStep], &desk_config(c, seed)).unwrap();
                let (icot, two) = (score(&out.rows, Method::Icot, c), score(&out.rows, Method::TwoStep, c));
                runs += 1;
                if icot < two {
                    losses.push(format!("{shape}/{c}/seed {seed}: {icot} < {two}"));
                }
            }
        }
    }
    outcome(
        losses.is_empty(),
        format!("ICOT >= two-step in {}/{runs} runs{}", runs - losses.len(), if losses.is_empty() { String::new() } else { format!(": {}", losses.join(", ")) }),
    )
}

/// `None` when the FCPS files are not available.
fn criterion_7() -> Option<Outcome> {
    let dir = PathBuf::from(std::env::var_os("ICOT_FCPS_DIR")?);
    let mut notes = Vec::new();
    let mut pass = true;
    for (name, target) in [("Tetra", 0.504), ("TwoDiamonds", 0.486)] {
        let lrn = dir.join(format!("{name}.lrn"));
        let cls = dir.join(format!("{name}.cls"));
        let loaded = icot::dataset::load_fcps(&lrn, cls.exists().then_some(cls.as_path()));
        let (data, truth) = match loaded {
            Ok(x) => x,
            Err(e) => return Some(outcome(false, format!("{name}: {e}"))),
        };
        let methods: Vec<Method> = if truth.is_some() { Method::ALL.to_vec() } else { vec![Method::Icot, Method::Kmeans, Method::TwoStep] };
        let out = run_methods(&data, truth.as_deref(), &methods, &desk_config(Criterion::Silhouette, 42)).unwrap();
        let check_all = name == "Tetra";
        for row in &out.rows {
            let s = row.score(Criterion::Silhouette).unwrap().value;
            let required = check_all || row.method == Method::Icot || row.method == Method::Truth;
            if required && (s - target).abs() > 0.005 {
                pass = false;
            }
            notes.push(format!("{name} {} {s:.3}", row.method));
        }
    }
    Some(outcome(pass, format!("targets Tetra 0.504, TwoDiamonds 0.486 (+-0.005): {}", notes.join(", "))))
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_icot")).args(args).output().expect("binary runs")
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("a.csv");
    let mut text = String::from("x,y\n");
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..120 {
        let (cx, cy) = [(0.0, 0.0), (3.0, 1.0), (1.0, 4.0)][i % 3];
        text.push_str(&format!("{},{}\n", cx + rng.gen::<f64>(), cy + rng.gen::<f64>()));
    }
    std::fs::write(&csv, text).unwrap();
    let csv = csv.to_str().unwrap().to_string();

    let runs: Vec<Vec<&str>> = vec![
        vec!["fit", "--input", &csv, "--criterion", "dunn", "--seed", "7"],
        vec!["fit", "--generate", "tetra", "--criterion", "silhouette"],
        vec!["benchmark", "--generate", "target_rings", "--restarts", "8"],
        vec!["benchmark", "--input", &csv, "--methods", "icot,kmeans,two_step"],
    ];
    let mut failures = Vec::new();
    for (r, args) in runs.iter().enumerate() {
        let mut artifacts = Vec::new();
        let mut stdout = Vec::new();
        for attempt in 0..2 {
            let tree = dir.path().join(format!("tree_{r}_{attempt}.json"));
            let rep = dir.path().join(format!("report_{r}_{attempt}.json"));
            let mut full = args.clone();
            let (t, p) = (tree.to_str().unwrap().to_string(), rep.to_str().unwrap().to_string());
            full.extend(["--out-tree", &t, "--out-report", &p]);
            let out = cli(&full);
            if !out.status.success() {
                failures.push(format!("{args:?} exited with {:?}", out.status.code()));
                continue;
            }
            artifacts.push((read(&tree), read(&rep)));
            stdout.push(out.stdout);
        }
        if artifacts.len() == 2 && (artifacts[0] != artifacts[1] || stdout[0] != stdout[1]) {
            failures.push(format!("{args:?} produced different bytes"));
        }
    }
    outcome(
        failures.is_empty(),
        format!("{} CLI invocations repeated: {}", runs.len(), if failures.is_empty() { "identical trees, reports and output".to_string() } else { failures.join("; ") }),
    )
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_default()
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut sequences = 0;
    let mut bad = Vec::new();
    for t in 0..100u64 {
        let n = rng.gen_range(10..60);
        let p = rng.gen_range(1..4);
        let rows = common::grid_points(&mut rng, n, p, 20);
        let Ok(data) = Dataset::from_rows(&rows) else { continue };
        let config = SearchConfig {
            criterion: if t % 2 == 0 { Criterion::Silhouette } else { Criterion::Dunn },
            max_depth: rng.gen_range(1..=4),
            min_bucket: rng.gen_range(1..=3),
            restarts: 3,
            seed: t,
            ..SearchConfig::default()
        };
        let result = fit(&data, &config).unwrap();
        for (r, trace) in result.trace.restarts.iter().enumerate() {
            sequences += 1;
            if trace.steps.windows(2).any(|w| w[1].objective <= w[0].objective + config.tolerance) {
                bad.push(format!("trace {t} restart {r}"));
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("{sequences} restart traces from 100 fits, {} with a step not improving by > 1e-8", bad.len()),
    )
}

#[test]
fn acceptance_criteria() {
    let instances = small_instances();
    let mut all = true;
    all &= run("1", Some(Duration::from_secs(10)), criterion_1);
    all &= run("2", Some(Duration::from_secs(120)), || criterion_2(&instances));
    all &= run("3", None, || criterion_3(&instances));
    all &= run("4", None, criterion_4);
    all &= run("5", Some(Duration::from_secs(600)), criterion_5);
    all &= run("6", None, criterion_6);
    match criterion_7() {
        Some(o) => {
            let status = if o.pass { "PASS" } else { "FAIL" };
            report(&format!("[{status}] criterion 7: {}", o.detail));
            all &= o.pass;
        }
        None => report("[NOT RUN] criterion 7: FCPS files not supplied (set ICOT_FCPS_DIR); not reproducible at desk scale, criteria 1-6 stand in"),
    }
    all &= run("8", None, criterion_8);
    all &= run("9", None, criterion_9);
    assert!(all, "at least one acceptance criterion failed, see the lines above");
}
