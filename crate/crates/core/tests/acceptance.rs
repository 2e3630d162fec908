//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints its PASS/FAIL line even when the suite output is captured.
//! `TOPREL_ACCEPTANCE=1,4` runs a subset.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;
use toprel::align::{align_topics, build_topic_groups, Matching, TopN};
use toprel::lda::{run_replications, LdaConfig, ReplicationSet, SeedMode};
use toprel::perturb::{run_perturbation, score_replications, Metric, PerturbMode, PerturbSettings, ScoreSettings};
use toprel::pipeline::{cmd_downstream, read_manifest, RunConfig};
use toprel::reliability::{
    cronbach_alpha, fit_single_factor, maximal_reliability, mcdonald_omega, multivariate_omega, proportion_above,
    reliability_report, spearman_brown, stratified_alpha, topic_similarity, ObservationMatrix, ReliabilityReport,
    ReportSettings, Source,
};
use toprel::stats::{median, spearman};
use toprel::synthgen::{generate, make_degenerate_replication, GenerativeSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn report_for(reps: &ReplicationSet) -> ReliabilityReport {
    let al = align_topics(reps, 0, TopN::default().fit_to(reps.vocab_size()), Matching::Greedy).unwrap();
    let groups = build_topic_groups(reps, &al).unwrap();
    reliability_report(
        &groups,
        &al,
        &reps.seeds,
        &reps.corpus_digest,
        &ReportSettings::default(),
    )
    .unwrap()
}

fn criterion_1() -> Outcome {
    let (corpus, _) = generate(&GenerativeSpec::trivial(7)).unwrap();
    let config = LdaConfig {
        alpha: 0.1,
        iterations: 200,
        burn_in: 100,
        ..LdaConfig::new(2)
    };
    let mut reps = run_replications(&corpus, &config, 10, SeedMode::Distinct, 11).unwrap();
    let degenerate = make_degenerate_replication(&reps.models[4], 0.01, 99).unwrap();
    reps.replace(5, degenerate).unwrap();

    let full = report_for(&reps);
    let pair = report_for(&reps.subset(&[4, 5]).unwrap());
    let sp = |r: &ReliabilityReport| r.coefficients.standard_practice.value;
    let omega = |r: &ReliabilityReport| r.coefficients.multivariate_omega.as_ref().map_or(f64::NAN, |c| c.value);
    let alpha = |r: &ReliabilityReport| r.per_topic[0].alpha.unwrap_or(f64::NAN);
    let unit = |x: f64| (0.95..1.0).contains(&x);
    let pass = sp(&full) == 1.0
        && unit(omega(&full))
        && unit(alpha(&full))
        && sp(&pair) == 1.0
        && omega(&pair) < 0.95
        && alpha(&pair) < 0.6;
    outcome(
        pass,
        format!(
            "full SP {} omega {:.5} alpha {:.4}; pair SP {} omega {:.4} alpha {:.4}",
            sp(&full),
            omega(&full),
            alpha(&full),
            sp(&pair),
            omega(&pair),
            alpha(&pair)
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..=8);
        let groups = common::random_groups(&mut rng, 1, n, 12, 10);
        let mr = maximal_reliability(&groups, &common::identity_alignment(1, n)).unwrap();
        let r = topic_similarity(&groups[0]).unwrap().r;
        worst = worst.max((mr - spearman_brown(r, n).unwrap()).abs());
    }
    outcome(worst <= 1e-12, format!("max |MR - SB| = {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let lambda = [0.9, 0.8, 0.7, 0.6];
    let f: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let data = DMatrix::from_fn(10_000, 4, |i, j| {
        let e: f64 = StandardNormal.sample(&mut rng);
        lambda[j] * f[i] + (1.0 - lambda[j] * lambda[j]).sqrt() * e
    });
    let m = ObservationMatrix::new(data, Source::DocTopic).unwrap();
    let loadings = fit_single_factor(&m).unwrap().loadings;
    let omega = mcdonald_omega(&m).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let sum: f64 = lambda.iter().sum();
    let analytic = sum * sum / (sum * sum + lambda.iter().map(|l| 1.0 - l * l).sum::<f64>());
    let worst = loadings
        .iter()
        .zip(lambda)
        .map(|(g, w)| (g - w).abs())
        .fold(0.0, f64::max);
    outcome(
        worst <= 0.05 && (omega - analytic).abs() <= 0.02 && elapsed < 10.0,
        format!("max loading error {worst:.4}, omega {omega:.4} vs {analytic:.4}, {elapsed:.2}s"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst = [0.0f64; 4];
    for _ in 0..20 {
        let k = rng.random_range(2..=4);
        let n = rng.random_range(2..=5);
        let d = rng.random_range(4..=8);
        let v = rng.random_range(4..=8);
        let groups = common::random_groups(&mut rng, k, n, d, v);
        let drop = k - 1;
        let m = ObservationMatrix::new(groups[0].theta_columns.clone(), Source::DocTopic).unwrap();
        let pairs = [
            (
                cronbach_alpha(&m).unwrap(),
                common::alpha_textbook(&common::cols(&groups[0].theta_columns)),
            ),
            (
                stratified_alpha(&groups, drop).unwrap(),
                common::stratified_alpha(&groups, drop),
            ),
            (
                multivariate_omega(&groups, drop).unwrap(),
                common::multivariate_omega(&groups, drop),
            ),
            (
                maximal_reliability(&groups, &common::identity_alignment(k, n)).unwrap(),
                common::maximal_reliability(&groups),
            ),
        ];
        for (w, (got, want)) in worst.iter_mut().zip(pairs) {
            *w = w.max((got - want).abs());
        }
    }
    outcome(
        worst.iter().all(|&w| w <= 1e-9),
        format!(
            "max error alpha {:.1e}, stratified {:.1e}, omega {:.1e}, maximal {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

/// Columns [x, y₁ … yₙ] with zero mean, so cosine equals correlation, and
/// cos(x, yⱼ) = sⱼ exactly.
fn matrix_with_similarities(x: &[f64], noise: &[Vec<f64>], s: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), s.len() + 1, |i, j| {
        if j == 0 {
            x[i]
        } else {
            s[j - 1] * x[i] + (1.0 - s[j - 1] * s[j - 1]).sqrt() * noise[j - 1][i]
        }
    })
}

fn unit_centred(mut v: Vec<f64>, against: &[&[f64]]) -> Vec<f64> {
    let m = common::mean(&v);
    v.iter_mut().for_each(|x| *x -= m);
    for a in against {
        let p: f64 = v.iter().zip(*a).map(|(x, y)| x * y).sum();
        v.iter_mut().zip(*a).for_each(|(x, y)| *x -= p * y);
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn sp_change(s: &[f64]) -> f64 {
    let at = |shift: f64| {
        let moved: Vec<f64> = s.iter().map(|x| x + shift).collect();
        proportion_above(&moved, 0.7).unwrap()
    };
    let base = at(0.0);
    (at(0.02) - base).abs().max((at(-0.02) - base).abs())
}

fn criterion_5() -> Outcome {
    let (topics, n, rows) = (10, 20, 2000);
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let mut all = Vec::new();
    let mut omega_change = 0.0f64;
    for _ in 0..topics {
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.65..0.75)).collect();
        let mut draw = || -> Vec<f64> { (0..rows).map(|_| StandardNormal.sample(&mut rng)).collect() };
        let x = unit_centred(draw(), &[]);
        let noise: Vec<Vec<f64>> = (0..n).map(|_| unit_centred(draw(), &[&x])).collect();
        let omega_at = |shift: f64| {
            let moved: Vec<f64> = s.iter().map(|v| v + shift).collect();
            let m = ObservationMatrix::new(matrix_with_similarities(&x, &noise, &moved), Source::DocTopic).unwrap();
            mcdonald_omega(&m).unwrap()
        };
        let base = omega_at(0.0);
        omega_change = omega_change
            .max((omega_at(0.02) - base).abs())
            .max((omega_at(-0.02) - base).abs());
        all.extend(s);
    }
    let change = sp_change(&all);

    // The expected shift in either direction is exactly 0.2, so how often a
    // fresh draw clears the strict threshold is worth reporting.
    let cleared = (0..100u64)
        .filter(|&seed| {
            let mut r = ChaCha8Rng::seed_from_u64(1000 + seed);
            let s: Vec<f64> = (0..topics * n).map(|_| r.random_range(0.65..0.75)).collect();
            sp_change(&s) > 0.2
        })
        .count();
    outcome(
        change > 0.2 && omega_change < 0.05,
        format!(
            "SP change {change:.3}, max omega change {omega_change:.4}; SP change > 0.2 in {cleared}/100 other draws"
        ),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let (corpus, _) = generate(&GenerativeSpec::nontrivial(3)).unwrap();
    let schedule = vec![0, 1, 10, 50, 100];
    let settings = PerturbSettings {
        lda: LdaConfig {
            iterations: 200,
            burn_in: 100,
            ..LdaConfig::new(50)
        },
        n_reps: 20,
        schedule: schedule.clone(),
        modes: vec![PerturbMode::Fixed],
        master_seed: 5,
        score: ScoreSettings::default(),
    };
    let rows = run_perturbation(&corpus, &settings).unwrap();
    let value = |metric: Metric, removed: usize| {
        rows.iter()
            .find(|r| r.metric == metric && r.removed == removed)
            .and_then(|r| r.value)
            .unwrap_or(f64::NAN)
    };
    let omega: Vec<f64> = schedule.iter().map(|&n| value(Metric::MultivariateOmega, n)).collect();
    let removed: Vec<f64> = schedule.iter().map(|&n| n as f64).collect();
    let rho = spearman(&removed, &omega);
    let sp_delta = (value(Metric::StandardPractice, 10) - value(Metric::StandardPractice, 1)).abs();
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        (omega[0] - 1.0).abs() < 1e-9 && rho <= -0.8 && sp_delta < 0.05,
        format!(
            "omega by removal {:?}, spearman {rho:.2}, SP change 1->10 {sp_delta:.3}, {elapsed:.0}s on one core",
            omega.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>()
        ),
    )
}

fn criterion_7() -> Outcome {
    let (corpus, _) = generate(&GenerativeSpec::nontrivial(3)).unwrap();
    let ks = [10, 25, 50];
    let mut per_seed = Vec::new();
    for master in [1u64, 2, 3] {
        let row: Vec<f64> = ks
            .iter()
            .map(|&k| {
                let config = LdaConfig {
                    iterations: 200,
                    burn_in: 100,
                    ..LdaConfig::new(k)
                };
                let reps = run_replications(&corpus, &config, 20, SeedMode::Distinct, master).unwrap();
                score_replications(&reps, &ScoreSettings::default())
                    .unwrap()
                    .into_iter()
                    .find(|(m, _)| *m == Metric::MultivariateOmega)
                    .and_then(|(_, v)| v.ok())
                    .unwrap_or(f64::NAN)
            })
            .collect();
        per_seed.push(row);
    }
    let medians: Vec<f64> = (0..ks.len())
        .map(|i| median(&per_seed.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .collect();
    let pass = medians.windows(2).all(|w| w[0] > w[1]);
    outcome(
        pass,
        format!(
            "median omega at K=10/25/50: {:.3}/{:.3}/{:.3}; per seed {:?}",
            medians[0],
            medians[1],
            medians[2],
            per_seed
                .iter()
                .map(|r| r.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join("/"))
                .collect::<Vec<_>>()
        ),
    )
}

fn run_cli(config: &Path, command: &str) -> bool {
    Command::new(env!("CARGO_BIN_EXE_toprel"))
        .args(["--config", config.to_str().unwrap(), command])
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let commands = ["generate", "fit", "align", "reliability", "perturb", "downstream"];
    for run in ["a", "b"] {
        let config = json!({
            "corpus": {"generate": {"preset": "trivial", "num_docs": 400, "label_strength": 5.0}},
            "k": [2, 3],
            "n_reps": 4,
            "seed": 8,
            "lda": {"alpha": 0.1, "iterations": 40, "burn_in": 20},
            "degenerate": {"replace": 3, "source": 2},
            "subsets": [[2, 3]],
            "bootstrap": 50,
            "removal_schedule": [0, 1, 4],
            "out": dir.path().join(run)
        });
        let path = dir.path().join(format!("{run}.json"));
        fs::write(&path, config.to_string()).unwrap();
        for c in commands {
            if !run_cli(&path, c) {
                return outcome(false, format!("{c} exited with an error"));
            }
        }
    }
    let mut mismatched = Vec::new();
    let mut files = 0;
    for c in commands {
        let a = fs::read(dir.path().join("a").join(c).join("manifest.json")).unwrap();
        let b = fs::read(dir.path().join("b").join(c).join("manifest.json")).unwrap();
        files += read_manifest(&dir.path().join("a").join(c)).unwrap().files.len();
        if a != b {
            mismatched.push(c);
        }
    }
    outcome(
        mismatched.is_empty(),
        format!(
            "{} commands, {files} files, mismatched manifests: {mismatched:?}",
            commands.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config: RunConfig = serde_json::from_value(json!({
        "corpus": {"generate": {"preset": "nontrivial", "label_strength": 10.0}},
        "k": [10, 25, 50],
        "n_reps": 10,
        "seed": 3,
        "lda": {"iterations": 200, "burn_in": 100},
        "out": dir.path()
    }))
    .unwrap();
    cmd_downstream(&config).unwrap();
    let mut iqr: Vec<(String, Vec<f64>)> = Vec::new();
    for k in [10, 25, 50] {
        let mut r = csv::Reader::from_path(dir.path().join(format!("downstream/k{k}/word_weights.csv"))).unwrap();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.unwrap();
            let q1: f64 = rec[2].parse().unwrap();
            let q3: f64 = rec[4].parse().unwrap();
            if iqr.len() <= i {
                iqr.push((rec[0].to_owned(), Vec::new()));
            }
            iqr[i].1.push(q3 - q1);
        }
    }
    let pass = iqr.len() == 2
        && iqr
            .iter()
            .all(|(_, v)| v.len() == 3 && v.windows(2).all(|w| w[0] < w[1]));
    outcome(
        pass,
        iqr.iter()
            .map(|(t, v)| {
                format!(
                    "{t}: IQR {}",
                    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" < ")
                )
            })
            .collect::<Vec<_>>()
            .join("; "),
    )
}

fn main() {
    let criteria: [(usize, &str, fn() -> Outcome); 9] = [
        (1, "trivial-data pathology", criterion_1),
        (2, "single-topic maximal reliability identity", criterion_2),
        (3, "factor recovery", criterion_3),
        (4, "coefficient oracles", criterion_4),
        (5, "cutoff pathology", criterion_5),
        (6, "word-removal sensitivity", criterion_6),
        (7, "declining reliability with K", criterion_7),
        (8, "rerun determinism", criterion_8),
        (9, "downstream instability", criterion_9),
    ];
    let only: Option<Vec<usize>> = std::env::var("TOPREL_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id} ({name}): {verdict} [{:.1}s] {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
