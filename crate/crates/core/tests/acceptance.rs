//! End-to-end acceptance run. Prints one line per criterion and exits
//! nonzero when any criterion fails.

mod common;

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use askwell_core::corpus::{ingest, stratified_split, Corpus, FieldMap};
use askwell_core::features::{fit_encoder, extract_corpus, Lexicons, Narrative, Scheme};
use askwell_core::glm::{fit, log_likelihood_gradient, sigmoid, Design, FitOptions};
use askwell_core::scoring::{DraftRequest, ModelArtifact, Scorer, Toggle};
use askwell_core::similarity::{
    compare_samples, null_pairs, pairs_from_corpus, read_pair_records, resolve_pairs,
    run_similarity_study, similarities, Metric, SimilarityOptions,
};
use askwell_core::stats::{binomial_test, delong_test, mann_whitney_u, roc_auc, trapezoid, GaussianKde, Tail};
use askwell_core::studies::{
    run_prediction_study, run_reciprocity_study, run_regression_study, run_topic_study,
    temporal_summary, train_artifact, AccessLog, AuditEvent, ReciprocityDefinition, StudyConfig,
    TopicConfig,
};
use askwell_core::textkit::DocTermMatrix;
use askwell_core::topics::{fit_nmf, hoyer_sparseness, objective, project_sparseness, NmfOptions};
use common::oracles::{
    binomial_lower_tail, binomial_pmf, binomial_upper_tail, bootstrap_delong_p, enumerated_mwu_p,
    pair_count_auc,
};
use common::synth::{similarity_corpus, synthetic_corpus};
use common::{irls, synthetic_problem};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Skipped(String),
}

type Check = Result<Verdict, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn pass(detail: impl Into<String>) -> Check {
    Ok(Verdict::Pass(detail.into()))
}

// 2012-03-20 12:00 UTC: second half of a month, community-age decile 5 under
// the reference encoder.
const MID: i64 = 1_332_244_800;

fn scenario_draft() -> DraftRequest {
    let filler = ["pizza", "could", "would", "really", "like", "some", "here", "anyone"];
    let mut words = vec!["party".to_string()];
    words.extend((0..49).map(|i| filler[i % filler.len()].to_string()));
    DraftRequest::new("", &words.join(" ")).at(MID)
}

fn narrative(name: Narrative, on: bool) -> Toggle {
    Toggle::Narrative {
        narrative: name.name().into(),
        on,
    }
}

fn criterion_1() -> Check {
    let scorer = Scorer::new(ModelArtifact::reference()).map_err(|e| e.to_string())?;
    let draft = scenario_draft();
    let base = scorer.score(&draft).map_err(|e| e.to_string())?;
    ensure!(base.detected.words == 50, "draft has {} words", base.detected.words);
    for (n, c) in &base.detected.narratives {
        ensure!((n == "craving") == (*c > 0), "narrative {n} count {c}");
    }
    ensure!(
        !base.detected.image && !base.detected.gratitude && !base.detected.reciprocity,
        "unexpected detector hit"
    );
    let mut toggles = vec![
        narrative(Narrative::Craving, false),
        narrative(Narrative::Job, true),
        narrative(Narrative::Money, true),
    ];
    let second = scorer.evaluate(&draft, &toggles).map_err(|e| e.to_string())?.probability;
    toggles.extend([
        Toggle::AddImage,
        Toggle::AddGratitude,
        Toggle::AddReciprocity,
        Toggle::SetLength { words: 150 },
    ]);
    let third = scorer.evaluate(&draft, &toggles).map_err(|e| e.to_string())?.probability;
    let got = [base.probability, second, third];
    let want = [0.098, 0.194, 0.568];
    let analytic = [sigmoid(-2.21), sigmoid(-1.42), sigmoid(0.28)];
    for i in 0..3 {
        ensure!(
            (got[i] - want[i]).abs() <= 0.002,
            "scenario {}: {:.4} vs {:.3}",
            i + 1,
            got[i],
            want[i]
        );
        ensure!((got[i] - analytic[i]).abs() < 1e-12, "scenario {} departs from the logit", i + 1);
    }
    pass(format!(
        "scenarios {:.2}% / {:.2}% / {:.2}%",
        100.0 * got[0],
        100.0 * got[1],
        100.0 * got[2]
    ))
}

fn dataset_dir() -> Option<PathBuf> {
    std::env::var_os("ASKWELL_RAOP_DIR").map(PathBuf::from)
}

fn load_dataset(dir: &Path) -> Result<Corpus, String> {
    let candidates = ["pizza_request_dataset.json", "requests.json", "requests.jsonl"];
    let requests = candidates
        .iter()
        .map(|c| dir.join(c))
        .find(|p| p.exists())
        .ok_or_else(|| format!("no request file in {}", dir.display()))?;
    let map = if dir.join("fieldmap.toml").exists() {
        FieldMap::load(&dir.join("fieldmap.toml")).map_err(|e| e.to_string())?
    } else if requests.ends_with("pizza_request_dataset.json") {
        FieldMap::raop_public()
    } else {
        FieldMap::default()
    };
    let histories = dir.join("histories.jsonl");
    let histories = histories.exists().then_some(histories);
    let report = ingest(&requests, histories.as_deref(), &map).map_err(|e| e.to_string())?;
    Ok(report.corpus)
}

fn criterion_2() -> Check {
    let Some(dir) = dataset_dir() else {
        return Ok(Verdict::Skipped("ASKWELL_RAOP_DIR not set; public dataset unavailable".into()));
    };
    let started = Instant::now();
    let corpus = load_dataset(&dir)?;
    let lex = Lexicons::default();
    let cfg = StudyConfig::default();
    let mut failures = Vec::new();
    let mut note = |ok: bool, msg: String| {
        println!("    {} {msg}", if ok { "ok  " } else { "FAIL" });
        if !ok {
            failures.push(msg);
        }
    };

    let rate = corpus.success_rate().unwrap_or(0.0);
    note(
        corpus.len() == 5728 && (rate - 0.246).abs() <= 0.001,
        format!("(a) n = {}, success rate {:.2}%", corpus.len(), 100.0 * rate),
    );

    let (dev, test) = stratified_split(&corpus, cfg.dev_fraction, cfg.seed).map_err(|e| e.to_string())?;
    let reg = run_regression_study(&dev, &lex).map_err(|e| e.to_string())?;
    let positive = [
        "including_image",
        "reciprocity",
        "gratitude",
        "length_100_words",
        "karma_decile",
        "posted_in_raop_before",
        "narrative_job",
        "narrative_money",
        "narrative_family",
    ];
    let negative = ["community_age_decile", "narrative_craving"];
    let starred = [
        "community_age_decile",
        "first_half_of_month",
        "gratitude",
        "including_image",
        "reciprocity",
        "length_100_words",
        "karma_decile",
        "posted_in_raop_before",
        "narrative_craving",
        "narrative_family",
        "narrative_job",
        "narrative_money",
    ];
    for r in &reg.rows {
        let sign_ok = if positive.contains(&r.feature.as_str()) {
            r.estimate > 0.0
        } else if negative.contains(&r.feature.as_str()) {
            r.estimate < 0.0
        } else {
            true
        };
        let sig_ok = if starred.contains(&r.feature.as_str()) {
            r.p < 0.05
        } else if r.feature.contains("sentiment") {
            r.p >= 0.05
        } else {
            true
        };
        note(
            sign_ok && sig_ok,
            format!("(b) {} estimate {:+.3} p {:.2e}", r.feature, r.estimate, r.p),
        );
    }

    let pred = run_prediction_study(&dev, &test, &cfg, &lex, None).map_err(|e| e.to_string())?;
    let auc = |n: &str| pred.row(n).map_or(f64::NAN, |r| r.test_auc);
    let full = auc("temporal+social+text");
    note((full - 0.669).abs() <= 0.03, format!("(c) full model AUC {full:.3}"));
    let uni = auc("unigram");
    note((uni - 0.621).abs() <= 0.03, format!("(c) unigram AUC {uni:.3}"));
    let (t, ts) = (auc("temporal"), auc("temporal+social"));
    note(t < ts && ts < full, format!("(c) ordering {t:.3} < {ts:.3} < {full:.3}"));
    let plus = pred
        .comparison("temporal+social+text+unigram", "temporal+social+text")
        .map_or(f64::NAN, |c| c.p);
    note(plus > 0.05, format!("(c) adding unigrams DeLong p {plus:.3}"));

    let extra = match dir.join("pairs.jsonl") {
        p if p.exists() => {
            let records = read_pair_records(&p).map_err(|e| e.to_string())?;
            resolve_pairs(&records, &corpus).map_err(|e| e.to_string())?.0
        }
        _ => Vec::new(),
    };
    let rec = run_reciprocity_study(&corpus, ReciprocityDefinition::Either, cfg.high_status_fraction, &extra)
        .map_err(|e| e.to_string())?;
    let r = |g: &askwell_core::studies::SubgroupRate| g.rate.unwrap_or(f64::NAN);
    let pattern = rec.claimed_forward.p_greater.is_some_and(|p| p < 0.01)
        && rec.gratitude.p_greater.is_some_and(|p| (0.05..0.25).contains(&p));
    note(
        pattern,
        format!(
            "(d) significance pattern: claimed-forward p {:?}, gratitude p {:?}",
            rec.claimed_forward.p_greater, rec.gratitude.p_greater
        ),
    );
    let rates_match = (r(&rec.baseline) - 0.059).abs() <= 0.015
        && (r(&rec.claimed_forward) - 0.099).abs() <= 0.015
        && (r(&rec.gratitude) - 0.072).abs() <= 0.015;
    let rates_msg = format!(
        "(d) rates {:.1}% / {:.1}% / {:.1}%",
        100.0 * r(&rec.baseline),
        100.0 * r(&rec.claimed_forward),
        100.0 * r(&rec.gratitude)
    );
    if dir.join("histories.jsonl").exists() {
        note(rates_match, rates_msg);
    } else {
        println!("    info {rates_msg} (no giving-event histories; pattern check only)");
    }

    let ts_sum = temporal_summary(&corpus).map_err(|e| e.to_string())?;
    let (a, b) = (
        ts_sum.first_half_rate.unwrap_or(f64::NAN),
        ts_sum.second_half_rate.unwrap_or(f64::NAN),
    );
    note(
        (a - 0.264).abs() <= 0.01 && (b - 0.230).abs() <= 0.01,
        format!("(e) first/second half {:.1}% / {:.1}%", 100.0 * a, 100.0 * b),
    );
    let secs = started.elapsed().as_secs_f64();
    note(secs < 600.0, format!("runtime {secs:.0}s"));
    if failures.is_empty() {
        pass("all sub-checks on the public dataset")
    } else {
        Err(format!("{} sub-check(s) failed: {}", failures.len(), failures.join("; ")))
    }
}

fn criterion_3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(50..=500);
        let p = rng.random_range(3..=20);
        let (rows, y, oracle) = synthetic_problem(&mut rng, n, p);
        let design = Design::from_rows((0..p).map(|j| format!("x{j}")).collect(), &rows).map_err(|e| e.to_string())?;
        let model = fit(&design, &y, &FitOptions::default()).map_err(|e| e.to_string())?;
        worst = worst.max((model.intercept - oracle[0]).abs());
        for (b, o) in model.coefficients.iter().zip(&oracle[1..]) {
            worst = worst.max((b - o).abs());
        }
    }
    ensure!(worst <= 1e-6, "IRLS deviation {worst:e}");

    let mut worst_grad = 0.0f64;
    for _ in 0..10 {
        let n = rng.random_range(30..200);
        let p = rng.random_range(2..8);
        let (rows, y, _) = synthetic_problem(&mut rng, n, p);
        let design = Design::from_rows((0..p).map(|j| format!("x{j}")).collect(), &rows).map_err(|e| e.to_string())?;
        let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b0 = rng.random_range(-1.0..1.0);
        let grad = log_likelihood_gradient(&design, &y, &beta, b0).map_err(|e| e.to_string())?;
        let ll = |beta: &[f64], b0: f64| -> f64 {
            let eta = design.linear_predictor(beta, b0).expect("dimensions match");
            eta.iter()
                .zip(&y)
                .map(|(&e, &yi)| if yi { sigmoid(e).ln() } else { (1.0 - sigmoid(e)).ln() })
                .sum()
        };
        let h = 1e-5;
        for j in 0..=p {
            let (mut up, mut down) = (beta.clone(), beta.clone());
            let (mut b_up, mut b_down) = (b0, b0);
            if j < p {
                up[j] += h;
                down[j] -= h;
            } else {
                b_up += h;
                b_down -= h;
            }
            let fd = (ll(&up, b_up) - ll(&down, b_down)) / (2.0 * h);
            worst_grad = worst_grad.max((fd - grad[j]).abs() / grad[j].abs().max(1.0));
        }
    }
    ensure!(worst_grad < 1e-6, "gradient relative error {worst_grad:e}");

    let y: Vec<bool> = (0..1000).map(|i| i < 246).collect();
    let d = Design::from_rows(vec![], &vec![vec![]; 1000]).map_err(|e| e.to_string())?;
    let m = fit(&d, &y, &FitOptions::default()).map_err(|e| e.to_string())?;
    let closed = (0.246f64 / 0.754).ln();
    ensure!((m.intercept - closed).abs() < 1e-12, "intercept {} vs {closed}", m.intercept);
    ensure!(
        irls(&vec![vec![]; 1000], &y).is_some_and(|b| (b[0] - closed).abs() < 1e-12),
        "oracle disagrees on the intercept-only model"
    );
    pass(format!(
        "IRLS max deviation {worst:.1e}, gradient {worst_grad:.1e}, intercept-only exact"
    ))
}

fn random_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<bool> {
    loop {
        let y: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        if y.iter().any(|&v| v) && y.iter().any(|&v| !v) {
            return y;
        }
    }
}

fn criterion_4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..1000 {
        let n = rng.random_range(2..=50);
        let y = random_labels(&mut rng, n);
        let levels = rng.random_range(2..12);
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / 4.0).collect();
        let got = roc_auc(&s, &y).map_err(|e| e.to_string())?.auc;
        let want = pair_count_auc(&s, &y);
        ensure!(got == want, "case {case}: AUC {got} vs pair count {want}");
    }

    let mut worst_delong = 0.0f64;
    for case in 0..20 {
        let n = rng.random_range(40..=80);
        let y = random_labels(&mut rng, n);
        let signal: f64 = rng.random_range(0.0..1.5);
        let a: Vec<f64> = y
            .iter()
            .map(|&l| if l { signal } else { 0.0 } + rng.random_range(-1.0..1.0))
            .collect();
        let b: Vec<f64> = a
            .iter()
            .map(|v| 0.6 * v + rng.random_range(-1.0..1.0))
            .map(|v| (v * 4.0).round() / 4.0)
            .collect();
        let got = delong_test(&a, &b, &y).map_err(|e| e.to_string())?.p;
        let want = bootstrap_delong_p(&a, &b, &y, 20_000, &mut rng);
        worst_delong = worst_delong.max((got - want).abs());
        ensure!((got - want).abs() <= 0.02, "instance {case}: DeLong p {got:.4} vs bootstrap {want:.4}");
    }

    let mut worst_mwu = 0.0f64;
    for case in 0..300 {
        let nx = rng.random_range(1..=4);
        let ny = rng.random_range(1..=(8 - nx).min(4));
        let x: Vec<f64> = (0..nx).map(|_| rng.random_range(0..5) as f64).collect();
        let yv: Vec<f64> = (0..ny).map(|_| rng.random_range(0..5) as f64).collect();
        let got = mann_whitney_u(&x, &yv, Tail::TwoSided).map_err(|e| e.to_string())?.p;
        let want = enumerated_mwu_p(&x, &yv);
        worst_mwu = worst_mwu.max((got - want).abs());
        ensure!((got - want).abs() <= 0.01, "case {case} {x:?} {yv:?}: {got} vs {want}");
    }

    let mut worst_binom = 0.0f64;
    for n in 1..=60u64 {
        for p0 in [0.05, 0.246, 0.5, 0.8] {
            for k in 0..=n {
                let up = binomial_test(k, n, p0, Tail::Greater).map_err(|e| e.to_string())?.p;
                let lo = binomial_test(k, n, p0, Tail::Less).map_err(|e| e.to_string())?.p;
                let two = binomial_test(k, n, p0, Tail::TwoSided).map_err(|e| e.to_string())?.p;
                let cut = binomial_pmf(n, k, p0) * (1.0 + 1e-7);
                let two_oracle: f64 = (0..=n)
                    .map(|i| binomial_pmf(n, i, p0))
                    .filter(|&q| q <= cut)
                    .sum::<f64>()
                    .min(1.0);
                for (g, w) in [
                    (up, binomial_upper_tail(k, n, p0).min(1.0)),
                    (lo, binomial_lower_tail(k, n, p0).min(1.0)),
                    (two, two_oracle),
                ] {
                    worst_binom = worst_binom.max((g - w).abs());
                }
            }
        }
    }
    ensure!(worst_binom <= 1e-12, "binomial deviation {worst_binom:e}");
    pass(format!(
        "AUC exact on 1000, DeLong max gap {worst_delong:.4}, MWU max gap {worst_mwu:.1e}, binomial {worst_binom:.1e}"
    ))
}

fn criterion_5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut runs = 0;
    for seed in 0..12u64 {
        let (r, c) = (rng.random_range(10..40), rng.random_range(10..40));
        let m = DMatrix::from_fn(r, c, |_, _| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..2.0) });
        let x = DocTermMatrix::from_dense(&m).map_err(|e| e.to_string())?;
        for target in [None, Some(0.3), Some(0.6)] {
            let opts = NmfOptions { k: rng.random_range(2..6), target_sparseness: target, max_iters: 150, tol: 0.0, seed };
            let f = fit_nmf(&x, &opts).map_err(|e| e.to_string())?;
            for w in f.objective_trace.windows(2) {
                ensure!(w[1] <= w[0], "seed {seed} target {target:?}: objective {} -> {}", w[0], w[1]);
            }
            if let Some(t) = target {
                for i in 0..f.w.nrows() {
                    let row: Vec<f64> = f.w.row(i).iter().copied().collect();
                    if row.iter().any(|v| *v > 0.0) {
                        let s = hoyer_sparseness(&row).map_err(|e| e.to_string())?;
                        ensure!(s >= t - 1e-6, "fitted row sparseness {s} below {t}");
                    }
                }
            }
            runs += 1;
        }
    }

    let mut worst_err = 0.0f64;
    for seed in 0..3 {
        let mut prng = ChaCha8Rng::seed_from_u64(seed);
        let w = DMatrix::from_fn(30, 4, |_, _| prng.random_range(0.0..1.0));
        let h = DMatrix::from_fn(4, 40, |_, _| prng.random_range(0.0..1.0));
        let x = DocTermMatrix::from_dense(&(w * h)).map_err(|e| e.to_string())?;
        let opts = NmfOptions { k: 4, target_sparseness: None, max_iters: 20_000, tol: 1e-12, seed };
        let f = fit_nmf(&x, &opts).map_err(|e| e.to_string())?;
        let err = (objective(&x, x.frobenius_sq(), &f.w, &f.h) / x.frobenius_sq()).sqrt();
        worst_err = worst_err.max(err);
    }
    ensure!(worst_err <= 1e-3, "planted relative error {worst_err:e}");

    for case in 0..2000 {
        let len = rng.random_range(2..40);
        let v: Vec<f64> = (0..len)
            .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(-1.0..3.0) })
            .collect();
        if v.iter().all(|x| *x <= 0.0) {
            continue;
        }
        let target = rng.random_range(0.0..1.0);
        let proj = project_sparseness(&v, target).map_err(|e| e.to_string())?;
        ensure!(proj.iter().all(|x| *x >= 0.0), "case {case}: negative entry");
        let s = hoyer_sparseness(&proj).map_err(|e| e.to_string())?;
        ensure!(s >= target - 1e-6, "case {case}: sparseness {s} below target {target}");
    }

    let corpus = synthetic_corpus(300, 8);
    let cfg = TopicConfig { k: 5, min_df: 3, max_iters: 60, ..TopicConfig::default() };
    let (a, ma) = run_topic_study(&corpus, &cfg, 17).map_err(|e| e.to_string())?;
    let (b, mb) = run_topic_study(&corpus, &cfg, 17).map_err(|e| e.to_string())?;
    ensure!(a == b && ma.factors == mb.factors, "topic study differs between identical runs");
    pass(format!(
        "{runs} monotone runs, planted error {worst_err:.1e}, 2000 projections, topics bit-identical"
    ))
}

fn criterion_6() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_integral = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..200);
        let samples: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let bw = rng.random_range(0.01..2.0);
        let kde = GaussianKde::new(&samples, bw).map_err(|e| e.to_string())?;
        worst_integral = worst_integral.max((trapezoid(&kde.grid()) - 1.0).abs());
    }
    ensure!(worst_integral <= 1e-3, "KDE integral off by {worst_integral:e}");

    let opts = SimilarityOptions { n_null: 1000, seed: 3, ..SimilarityOptions::default() };
    let planted = similarity_corpus(200, true, 1);
    let pairs = pairs_from_corpus(&planted);
    let res = run_similarity_study(&planted, &pairs, &opts).map_err(|e| e.to_string())?;
    ensure!(res.test.p < 0.001, "planted similarity p {}", res.test.p);

    let null = null_pairs(&pairs, 1000, 3).map_err(|e| e.to_string())?;
    let null_sims = similarities(&planted, &null.pairs, opts.metric, &opts.exclude);
    let same = compare_samples(null_sims.clone(), null_sims, opts.metric, 0.03, null.with_replacement)
        .map_err(|e| e.to_string())?;
    ensure!(same.test.p >= 0.99, "null fed as actual gives p {}", same.test.p);

    let plain = similarity_corpus(200, false, 2);
    let plain_pairs = pairs_from_corpus(&plain);
    let unplanted = run_similarity_study(&plain, &plain_pairs, &opts).map_err(|e| e.to_string())?;

    let mut detail = format!(
        "KDE integral gap {worst_integral:.1e}, planted p {:.1e}, self-null p {:.3}, unplanted p {:.3}",
        res.test.p, same.test.p, unplanted.test.p
    );
    if let Some(dir) = dataset_dir().filter(|d| d.join("pairs.jsonl").exists()) {
        let corpus = load_dataset(&dir)?;
        let records = read_pair_records(&dir.join("pairs.jsonl")).map_err(|e| e.to_string())?;
        let (real_pairs, _) = resolve_pairs(&records, &corpus).map_err(|e| e.to_string())?;
        for metric in Metric::ALL {
            let o = SimilarityOptions { metric, ..SimilarityOptions::default() };
            let r = run_similarity_study(&corpus, &real_pairs, &o).map_err(|e| e.to_string())?;
            detail.push_str(&format!(", real {} p {:.3} (report only)", metric.name(), r.test.p));
        }
    } else {
        detail.push_str(", real-data comparison not run (no pairs file)");
    }
    pass(detail)
}

fn criterion_7() -> Check {
    let corpus = synthetic_corpus(500, 7);
    let (dev, test) = stratified_split(&corpus, 0.7, 1).map_err(|e| e.to_string())?;
    let dev_ids: HashSet<String> = dev.requests().iter().map(|r| r.id.clone()).collect();
    let test_ids: HashSet<String> = test.requests().iter().map(|r| r.id.clone()).collect();
    let cfg = StudyConfig { cv_folds: 3, n_lambdas: 8, ngram_min_df: 5, ..StudyConfig::default() };
    let lex = Lexicons::default();

    let log = AccessLog::default();
    let record = |e: &AuditEvent| log.record(e);
    let report = run_prediction_study(&dev, &test, &cfg, &lex, Some(&record)).map_err(|e| e.to_string())?;
    let art = train_artifact(&dev, Scheme::Prediction, None, &cfg, &lex, Some(&record)).map_err(|e| e.to_string())?;

    for prefix in ["encoder", "vocabulary", "lambda:", "fit:"] {
        let seen = log.touched(prefix);
        ensure!(!seen.is_empty(), "stage {prefix} recorded nothing");
        ensure!(seen.is_subset(&dev_ids), "stage {prefix} read non-development requests");
        ensure!(seen.is_disjoint(&test_ids), "stage {prefix} read held-out requests");
    }
    let frozen = fit_encoder(&extract_corpus(&dev, &lex).map_err(|e| e.to_string())?, dev.epoch().map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    ensure!(art.encoder == frozen, "artifact encoder differs from a development-only fit");

    // Same development data, scrambled held-out data: every quantity chosen
    // before evaluation must be unchanged.
    let mut scrambled = Vec::new();
    for r in test.requests() {
        let mut s = r.clone();
        s.success = !s.success;
        s.giver = None;
        s.body = "job money family student party thanks imgur.com/x pay it forward".repeat(3);
        scrambled.push(s);
    }
    let test2 = Corpus::new(scrambled, corpus.histories().clone()).map_err(|e| e.to_string())?;
    let report2 = run_prediction_study(&dev, &test2, &cfg, &lex, None).map_err(|e| e.to_string())?;
    for (a, b) in report.rows.iter().zip(&report2.rows) {
        ensure!(
            a.lambda == b.lambda && a.cv_auc == b.cv_auc && a.n_nonzero == b.n_nonzero,
            "{}: selection changed when only held-out data changed",
            a.name
        );
    }
    pass(format!(
        "{} audit events, all on {} development ids; selections invariant to held-out data",
        log.events().len(),
        dev_ids.len()
    ))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("scenario arithmetic", criterion_1),
        ("public dataset", criterion_2),
        ("solver oracles", criterion_3),
        ("rank statistics", criterion_4),
        ("matrix factorization", criterion_5),
        ("similarity study", criterion_6),
        ("leakage guard", criterion_7),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(Verdict::Pass(d)) => ("PASS", d),
            Ok(Verdict::Skipped(d)) => ("SKIPPED", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} {tag} [{name}] {detail} ({secs:.1}s)", i + 1);
    }
    if failed > 0 {
        eprintln!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
