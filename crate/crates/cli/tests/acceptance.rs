//! Acceptance checks 1-9. Prints one PASS/FAIL line per criterion.
//!
//! Criterion 1 has one check that cannot hold: the session-116 counts give
//! 235/267 = 0.8801, which displays as 0.88, while the published column
//! reads 0.87. That mismatch is listed in `KNOWN_FAILURES` with its exact
//! message; the target exits non-zero on any other failure, or if the
//! known one changes or disappears.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use hearingkit_core::corpus::{Chamber, HearingType, Party};
use hearingkit_core::experiment::{
    build_datasets, collect_exchanges, display_percent, display_share, emit_qa_table, emit_table,
    emit_verification_table, render_prompt, roster_names, run_experiment, Dimension, FeatureSet,
    ModelConfig, ModelKind, SplitSpec, TableLayout, UtteranceKind,
};
use hearingkit_core::features::{complexity_features, Lexicons, TextStats};
use hearingkit_core::logit::BinaryProblem;
use hearingkit_core::models::{
    accuracy, feature_importance, predict_forest, predict_forest_all, train_forest, DataRow,
    Dataset, ForestHyper, Government, GroupKeys, ImportanceMode, LabelTask, NameStripper,
};
use hearingkit_core::qa::{
    classify_qa, design_matrix, load_training_corpus, score_confusion, train_qa, QaClass, QaHyper,
    Source,
};
use hearingkit_core::rng::{derive_seed, rng_from_seed};
use hearingkit_core::segment::verify::{score_verdicts, Verdict};
use hearingkit_core::segment::{segment_hearing, HeuristicRecognizer, SegmenterRules};
use hearingkit_core::stats::{ks_series_p, ks_statistic, ks_two_sample};
use hearingkit_core::synth::{
    derive_verdicts, labeled_corpus, score_boundaries, synth_corpus, BoundaryScore, SynthSpec,
};
use rand::seq::SliceRandom;
use rand::Rng;

type Outcome = Result<String, String>;

/// Criteria expected to fail, with the exact failure message.
const KNOWN_FAILURES: &[(u32, &str)] = &[(
    1,
    "session 116 accuracy displays as 0.88 (235/267 = 0.880150), published 0.87",
)];

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn confusion_vectors(q_true: usize, q_false: usize, a_true: usize, a_false: usize) -> (Vec<QaClass>, Vec<QaClass>) {
    use QaClass::{Answer as A, Question as Q};
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for (n, p, t) in [(q_true, Q, Q), (q_false, Q, A), (a_true, A, A), (a_false, A, Q)] {
        pred.extend(std::iter::repeat(p).take(n));
        truth.extend(std::iter::repeat(t).take(n));
    }
    (pred, truth)
}

fn c1_metric_arithmetic() -> Outcome {
    // Published question/answer identification counts per session.
    let sessions = [
        ("114", (20, 6, 26, 0), "0.88"),
        ("115", (105, 25, 127, 3), "0.89"),
        ("116", (101, 29, 134, 3), "0.87"),
        ("117", (65, 28, 93, 5), "0.83"),
    ];
    let mut columns = Vec::new();
    let mut mismatches = Vec::new();
    for (s, (qt, qf, at, af), published) in sessions {
        let (pred, truth) = confusion_vectors(qt, qf, at, af);
        let c = score_confusion(&pred, &truth).map_err(|e| e.to_string())?;
        check((c.q_true, c.q_false, c.a_true, c.a_false) == (qt, qf, at, af), format!("session {s} counts"))?;
        let shown = display_share(c.accuracy());
        if shown != published {
            mismatches.push(format!(
                "session {s} accuracy displays as {shown} ({}/{} = {:.6}), published {published}",
                c.correct(),
                c.total(),
                c.accuracy()
            ));
        }
        columns.push((s.to_string(), c));
    }
    let (pred, truth) = confusion_vectors(291, 88, 380, 11);
    let pooled = score_confusion(&pred, &truth).map_err(|e| e.to_string())?;
    check(format!("{:.4}", pooled.accuracy()) == "0.8714", "pooled accuracy is not 0.8714")?;
    check(display_percent(pooled.accuracy()) == "87.14", "pooled percent is not 87.14")?;
    let merged = columns.iter().fold(Default::default(), |acc: hearingkit_core::qa::QaConfusion, (_, c)| acc.merge(c));
    check(merged == pooled, "session columns do not add up to the pooled column")?;
    columns.push(("114-117".into(), pooled));
    let mut table = Vec::new();
    emit_qa_table(&columns, &mut table).map_err(|e| e.to_string())?;
    let table = String::from_utf8(table).unwrap();
    check(
        table.lines().last() == Some("accuracy_display,0.88,0.89,0.88,0.83,0.87"),
        format!("unexpected table tail {:?}", table.lines().last()),
    )?;

    // Segmentation verification: 50 hearings x 10 utterances per session.
    let published = [
        (108, 12, 20),
        (109, 8, 8),
        (110, 15, 5),
        (111, 8, 4),
        (112, 2, 2),
        (113, 36, 3),
        (114, 18, 9),
        (115, 18, 5),
        (116, 40, 12),
        (117, 69, 8),
    ];
    let mut ids = Vec::new();
    let mut verdicts = Vec::new();
    for (session, clubbed, broken) in published {
        for i in 0..500 {
            let v = if i < clubbed {
                Verdict::Clubbed
            } else if i < clubbed + broken {
                Verdict::Broken
            } else {
                Verdict::Correct
            };
            ids.push((format!("S{session}-u{i:05}"), session));
            verdicts.push((format!("S{session}-u{i:05}"), v));
        }
    }
    let session_of: HashMap<&str, u32> = ids.iter().map(|(id, s)| (id.as_str(), *s)).collect();
    let summary = score_verdicts(&verdicts, &session_of).map_err(|e| e.to_string())?;
    check(summary.total.verified == 5000 && summary.total.incorrect == 302, "total counts")?;
    check(summary.total.clubbed == 226 && summary.total.broken == 76, "error-type totals")?;
    check(summary.per_session.values().all(|t| t.is_consistent()), "per-session identity")?;
    let mut vt = Vec::new();
    emit_verification_table(&summary, &mut vt).map_err(|e| e.to_string())?;
    let vt = String::from_utf8(vt).unwrap();
    check(
        vt.lines().last() == Some("total,5000,302,226,76,0.9396,93.96"),
        format!("unexpected verification total {:?}", vt.lines().last()),
    )?;
    if mismatches.is_empty() {
        Ok("Q/A table and verification table reproduce exactly".into())
    } else {
        Err(mismatches.join("; "))
    }
}

fn c2_readability_oracle() -> Outcome {
    let path = fixtures().join("oracles/readability.csv");
    let mut rd = csv::Reader::from_path(&path).map_err(|e| e.to_string())?;
    let mut n = 0;
    let mut worst = 0.0f64;
    for rec in rd.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let u = |i: usize| rec[i].parse::<usize>().unwrap();
        let f = |i: usize| rec[i].parse::<f64>().unwrap();
        let stats = TextStats {
            n_words: u(0),
            n_sentences: u(1),
            n_characters_in_words: u(2),
            n_syllables: u(3),
            n_polysyllables: u(4),
            n_long_words: u(5),
            n_unique_words: u(6),
        };
        let c = complexity_features(&stats);
        for (got, want) in [(c.fkgl, f(7)), (c.smog, f(8)), (c.cli, f(9)), (c.lix, f(10))] {
            let err = (got.ok_or("missing formula value")? - want).abs();
            worst = worst.max(err);
        }
        n += 1;
    }
    check(n == 50, format!("expected 50 fixtures, read {n}"))?;
    check(worst <= 1e-9, format!("max error {worst:e}"))?;
    Ok(format!("50 fixtures, max abs error {worst:.1e}"))
}

fn brute_force_d(a: &[f64], b: &[f64]) -> f64 {
    let ecdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
    a.iter()
        .chain(b)
        .map(|&x| (ecdf(a, x) - ecdf(b, x)).abs())
        .fold(0.0, f64::max)
}

fn c3_ks_oracle() -> Outcome {
    let mut rng = rng_from_seed(3);
    for i in 0..1000 {
        let (na, nb) = (rng.gen_range(1..=50), rng.gen_range(1..=50));
        // Half the pairs draw from a small integer range to force ties.
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| if i % 2 == 0 { rng.gen_range(0..8) as f64 } else { rng.gen_range(-3.0..3.0) })
                .collect()
        };
        let (a, b) = (draw(na), draw(nb));
        let (s, bf) = (ks_statistic(&a, &b), brute_force_d(&a, &b));
        check(s == bf, format!("pair {i}: streaming {s} vs brute force {bf}"))?;
    }
    let path = fixtures().join("oracles/ks_series.csv");
    let mut rd = csv::Reader::from_path(&path).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut n = 0;
    for rec in rd.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let (l, p): (f64, f64) = (rec[0].parse().unwrap(), rec[1].parse().unwrap());
        worst = worst.max((ks_series_p(l) - p).abs());
        n += 1;
    }
    check(worst <= 1e-6, format!("series max error {worst:e}"))?;
    let same = ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?;
    check(same.statistic_d == 0.0 && same.p_value == 1.0, "identical samples")?;
    let disjoint = ks_two_sample(&[0.0, 0.0], &[1.0, 1.0]).map_err(|e| e.to_string())?;
    check(disjoint.statistic_d == 1.0, "disjoint samples")?;
    let half = ks_two_sample(&[1.0, 2.0], &[1.5, 2.5]).map_err(|e| e.to_string())?;
    check(half.statistic_d == 0.5, "interleaved samples")?;
    Ok(format!("1000 pairs exact, series max error {worst:.1e} over {n} lambdas, trivial cases hold"))
}

fn c4_segmentation() -> Outcome {
    let spec = SynthSpec {
        hearings: 50,
        sessions: (108..=117).collect(),
        adversarial: true,
        ..SynthSpec::default()
    };
    let corpus = synth_corpus(&spec, 2024).map_err(|e| e.to_string())?;
    let mut total = BoundaryScore::default();
    let mut ingests = 0;
    for h in &corpus {
        let mut seg = segment_hearing(&h.raw, &h.meta, &h.roster, SegmenterRules::default_rules(), &HeuristicRecognizer)
            .map_err(|e| e.to_string())?;
        check(seg.trimmed.reconstruct() == h.raw, format!("{} is not reconstructed exactly", h.meta.hearing_id))?;
        check(
            seg.segmentation.reconstruct_body() == seg.trimmed.body,
            format!("{} body is not reconstructed exactly", h.meta.hearing_id),
        )?;
        total.merge(score_boundaries(&h.truth, &seg));

        let session_of: HashMap<String, u32> = seg
            .hearing
            .utterances
            .iter()
            .map(|u| (u.utterance_id.clone(), h.meta.session))
            .collect();
        let lookup: HashMap<&str, u32> = session_of.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        let s = score_verdicts(&derive_verdicts(&h.truth, &seg), &lookup).map_err(|e| e.to_string())?;
        check(s.total.is_consistent(), "verdict identity")?;
        // Damage the segmentation and ingest again.
        if seg.segmentation.segments.len() > 4 {
            seg.segmentation.segments.remove(2);
            seg.hearing.utterances.remove(2);
            let s = score_verdicts(&derive_verdicts(&h.truth, &seg), &lookup).map_err(|e| e.to_string())?;
            check(s.total.is_consistent() && s.total.incorrect >= 1, "verdict identity after damage")?;
            ingests += 1;
        }
        ingests += 1;
    }
    check(total.accuracy() >= 0.99, format!("boundary accuracy {:.4}", total.accuracy()))?;
    Ok(format!(
        "{} true utterances, boundary accuracy {:.4}, {ingests} verdict ingests consistent",
        total.true_utterances,
        total.accuracy()
    ))
}

fn c5_qa_classifier() -> Outcome {
    let qa = fixtures().join("qa");
    let mut train = load_training_corpus(&qa.join("ama.csv"), Source::Ama).map_err(|e| e.to_string())?.examples;
    train.extend(load_training_corpus(&qa.join("ukparl.csv"), Source::UkParl).map_err(|e| e.to_string())?.examples);
    check(train.len() >= 2000, format!("only {} training rows", train.len()))?;
    let test = load_training_corpus(&qa.join("hand_test.csv"), Source::HandLabeled).map_err(|e| e.to_string())?.examples;
    let overlap = test.iter().filter(|t| train.iter().any(|r| r.text == t.text)).count();
    check(overlap == 0, format!("{overlap} test rows also appear in training"))?;

    let t = train_qa(&train, QaHyper::default()).map_err(|e| e.to_string())?;
    let pred: Vec<QaClass> = test.iter().map(|e| classify_qa(&t.model, &e.text).0).collect();
    let truth: Vec<QaClass> = test.iter().map(|e| e.label).collect();
    let acc = score_confusion(&pred, &truth).map_err(|e| e.to_string())?.accuracy();
    let n_q = truth.iter().filter(|&&c| c == QaClass::Question).count();
    let baseline = n_q.max(truth.len() - n_q) as f64 / truth.len() as f64;
    let margin = acc - baseline;

    // Central differences on the trained objective.
    let (rows, targets) = design_matrix(&t.model.vocabulary, &train);
    let problem = BinaryProblem {
        rows: &rows,
        targets: &targets,
        dim: t.model.vocabulary.len(),
        l2: QaHyper::default().l2,
    };
    let (w, b) = (t.model.weights.clone(), t.model.bias);
    let (gw, gb) = problem.gradient(&w, b);
    let h = 1e-5;
    let mut rng = rng_from_seed(5);
    let mut worst = 0.0f64;
    for _ in 0..30 {
        let j = rng.gen_range(0..w.len());
        let (mut up, mut down) = (w.clone(), w.clone());
        up[j] += h;
        down[j] -= h;
        let num = (problem.objective(&up, b) - problem.objective(&down, b)) / (2.0 * h);
        worst = worst.max((num - gw[j]).abs());
    }
    let num_b = (problem.objective(&w, b + h) - problem.objective(&w, b - h)) / (2.0 * h);
    worst = worst.max((num_b - gb).abs());

    check(margin >= 0.10, format!("accuracy {acc:.4} vs baseline {baseline:.4}"))?;
    check(worst < 1e-5, format!("gradient check error {worst:e}"))?;
    Ok(format!(
        "hand test accuracy {:.2}% vs majority {:.2}% (+{:.2} points), gradient error {worst:.1e}",
        100.0 * acc,
        100.0 * baseline,
        100.0 * margin
    ))
}

fn keys() -> GroupKeys {
    GroupKeys {
        session: 117,
        committee: "synthetic".into(),
        hearing_type: HearingType::General,
        government: Government::Unified,
        chamber: Chamber::House,
        presidency: Party::Democrat,
    }
}

/// Feature 0 separates the two classes; the other five are noise.
fn separable(n: usize, seed: u64) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let rows = (0..n)
        .map(|i| {
            let label = i % 2;
            let sep = if label == 0 { rng.gen_range(-2.0..-0.5) } else { rng.gen_range(0.5..2.0) };
            let mut features = vec![Some(sep)];
            features.extend((0..5).map(|_| Some(rng.gen_range(-1.0..1.0))));
            DataRow { id: format!("r{seed}-{i}"), features, label, keys: keys() }
        })
        .collect();
    Dataset {
        task: LabelTask::Standing,
        schema_version: "separable/1".into(),
        feature_names: (0..6).map(|j| format!("f{j}")).collect(),
        classes: LabelTask::Standing.classes(),
        rows,
    }
}

fn c6_forest() -> Outcome {
    let (train, test) = (separable(300, 1), separable(200, 2));
    let hyper = ForestHyper { n_estimators: 50, seed: 11, ..ForestHyper::default() };
    let m = train_forest(&train, hyper).map_err(|e| e.to_string())?;
    let pred = predict_forest_all(&m, &test).map_err(|e| e.to_string())?;
    check(accuracy(&pred, &test.labels()) == 1.0, "separable fixture not perfect")?;

    let again = train_forest(&train, hyper).map_err(|e| e.to_string())?;
    for r in &test.rows {
        let (l1, p1) = predict_forest(&m, &r.features).map_err(|e| e.to_string())?;
        let (l2, p2) = predict_forest(&again, &r.features).map_err(|e| e.to_string())?;
        let bits = |p: &[f64]| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        check(l1 == l2 && bits(&p1) == bits(&p2), "same seed gave different predictions")?;
    }

    let imp = feature_importance(&m, &test, ImportanceMode::Impurity, 0).map_err(|e| e.to_string())?;
    let sum: f64 = imp.values().sum();
    check((sum - 1.0).abs() <= 1e-9, format!("importances sum to {sum}"))?;

    let mut accs = Vec::new();
    for seed in 0..10u64 {
        let shuffle = |mut d: Dataset, s: u64| {
            let mut labels = d.labels();
            labels.shuffle(&mut rng_from_seed(s));
            for (r, l) in d.rows.iter_mut().zip(labels) {
                r.label = l;
            }
            d
        };
        let tr = shuffle(separable(400, 100 + seed), derive_seed(seed, 1));
        let te = shuffle(separable(400, 200 + seed), derive_seed(seed, 2));
        let m = train_forest(&tr, ForestHyper { n_estimators: 50, seed, ..ForestHyper::default() })
            .map_err(|e| e.to_string())?;
        accs.push(accuracy(&predict_forest_all(&m, &te).map_err(|e| e.to_string())?, &te.labels()));
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    check((mean - 0.5).abs() <= 0.05, format!("null accuracy {mean:.4}"))?;
    let (lo, hi) = accs.iter().fold((1.0f64, 0.0f64), |(l, h), &a| (l.min(a), h.max(a)));
    Ok(format!(
        "separable 100%, deterministic, importances sum {sum:.12}, null accuracy mean {mean:.4} (range {lo:.3}-{hi:.3})"
    ))
}

fn experiment_tables() -> Result<(Vec<Vec<u8>>, String), String> {
    let spec = SynthSpec { hearings: 40, min_exchanges: 10, max_exchanges: 16, ..SynthSpec::default() };
    let c = labeled_corpus(&spec, 31).map_err(|e| e.to_string())?;
    let rows = collect_exchanges(&c.hearings, &c.rosters, &c.pairs, &c.government).map_err(|e| e.to_string())?;
    let names = NameStripper::new(roster_names(&c.rosters));
    let dims: [&[Dimension]; 6] = [
        &[],
        &[Dimension::Committee],
        &[Dimension::Session],
        &[Dimension::HearingType],
        &[Dimension::Government, Dimension::Presidency],
        &[Dimension::Committee, Dimension::Session, Dimension::HearingType],
    ];
    let mut specs_checked = 0;
    let mut reports = 0;
    let mut outcomes = Vec::new();
    for d in dims {
        for kind in [UtteranceKind::Question, UtteranceKind::Answer, UtteranceKind::Both] {
            for task in [LabelTask::Affiliation, LabelTask::Standing] {
                let mut s = SplitSpec::new(d.to_vec(), kind, task);
                s.min_rows = 20;
                let built = build_datasets(&rows, &s, &FeatureSet::Linguistic, Lexicons::bundled(), &names)
                    .map_err(|e| e.to_string())?;
                let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
                for r in built.datasets.iter().flat_map(|d| d.dataset.rows.iter()) {
                    *seen.entry(r.id.as_str()).or_default() += 1;
                }
                for id in built.skipped.iter().flat_map(|s| s.row_ids.iter()) {
                    *seen.entry(id.as_str()).or_default() += 1;
                }
                check(
                    seen.len() == rows.len() && seen.values().all(|&n| n == 1)
                        && rows.iter().all(|r| seen.contains_key(r.pair_id.as_str())),
                    format!("{s:?} does not partition the rows"),
                )?;
                specs_checked += 1;
                if d.len() <= 1 && kind != UtteranceKind::Answer {
                    for model in [ModelKind::Forest { grid: None }, ModelKind::Logistic { hyper: None }] {
                        let cfg = ModelConfig { model, seed: 9, ..ModelConfig::default() };
                        for o in run_experiment(&built.datasets, &cfg) {
                            if let Some(r) = &o.report {
                                let class_counts: Vec<usize> = r.confusion.iter().map(|row| row.iter().sum()).collect();
                                let n: usize = class_counts.iter().sum();
                                let share = *class_counts.iter().max().unwrap() as f64 / n as f64;
                                check(n == r.n_test, format!("{}: confusion total {n} vs n_test {}", o.key, r.n_test))?;
                                check(
                                    r.baseline_accuracy == share,
                                    format!("{}: baseline {} vs test share {share}", o.key, r.baseline_accuracy),
                                )?;
                                reports += 1;
                            }
                            outcomes.push(o);
                        }
                    }
                }
            }
        }
    }
    check(reports > 0, "no split produced a report")?;
    let tables = TableLayout::ALL
        .iter()
        .map(|&l| {
            let mut buf = Vec::new();
            emit_table(&outcomes, l, &mut buf).map(|_| buf).map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((tables, format!("{} exchanges, {specs_checked} split specs partitioned, {reports} reports", rows.len())))
}

fn c7_experiment_grid() -> Outcome {
    let (first, detail) = experiment_tables()?;
    let (second, _) = experiment_tables()?;
    check(first == second, "table files differ between identical runs")?;
    Ok(format!("{detail}, tables byte-identical across runs"))
}

fn c8_prompts() -> Outcome {
    let q = "Why was the contract awarded without competition?";
    let a = "It was an emergency award.";
    let tail = "The question was asked by a person who is a member of a congressional committee, and whose party affiliation is either Democrat, Independent, or Republican.";
    let golden = [
        (
            UtteranceKind::Question,
            format!("What follows is a question that has been asked in a congressional hearing: Question: {q} {tail} Based on the question above, what is the party affiliation of the person who asked the question? Answer with either D for Democrat, I for Independent, or R for Republican. Do not explain."),
        ),
        (
            UtteranceKind::Answer,
            format!("What follows is a response to a question asked in a congressional hearing: Answer: {a} {tail} Based on the answer above, what is the party affiliation of the person who asked the question? Answer with either D for Democrat, I for Independent, or R for Republican. Do not explain."),
        ),
        (
            UtteranceKind::Both,
            format!("What follows is a question and its answer in a congressional hearing: Question: {q} Answer: {a} {tail} Based on the question and answer above, what is the party affiliation of the person who asked the question? Answer with either D for Democrat, I for Independent, or R for Republican. Do not explain."),
        ),
    ];
    for (kind, want) in golden {
        let got = render_prompt(kind, Some(q), Some(a)).map_err(|e| e.to_string())?;
        check(got == want, format!("{kind} prompt differs:\n got {got}\nwant {want}"))?;
    }
    Ok("three kinds match the golden strings".into())
}

fn hk(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hearingkit"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "`hearingkit {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn c9_smoke() -> Outcome {
    let fx = fixtures();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let t = tmp.path();
    let p = |s: &str| t.join(s).to_string_lossy().into_owned();
    let f = |s: &str| fx.join(s).to_string_lossy().into_owned();
    let raw = f("smoke/raw");
    let gov = f("smoke/raw/government.json");
    let steps: Vec<Vec<String>> = vec![
        vec!["segment".into(), "--input".into(), raw.clone(), "--out".into(), p("seg")],
        vec![
            "classify-qa".into(), "train".into(), "--ama".into(), f("qa/ama.csv"), "--ukparl".into(),
            f("qa/ukparl.csv"), "--out".into(), p("qa"),
        ],
        vec![
            "classify-qa".into(), "apply".into(), "--model".into(), p("qa/qa_model.json"), "--corpus".into(),
            p("seg"), "--out".into(), p("labeled"),
        ],
        vec!["pair".into(), "--corpus".into(), p("labeled"), "--out".into(), p("pairs")],
        vec!["features".into(), "--corpus".into(), p("labeled"), "--out".into(), p("features")],
        vec![
            "kstest".into(), "--corpus".into(), p("labeled"), "--pairs".into(), p("pairs/pairs.jsonl"),
            "--features".into(), p("features/features.csv"), "--government".into(), gov.clone(), "--out".into(),
            p("ks"),
        ],
        vec![
            "train".into(), "--experiment".into(), f("experiment.toml"), "--corpus".into(), p("labeled"),
            "--pairs".into(), p("pairs/pairs.jsonl"), "--government".into(), gov.clone(), "--out".into(), p("run"),
        ],
        vec!["evaluate".into(), "--run".into(), p("run"), "--out".into(), p("eval")],
        vec!["evaluate".into(), "--run".into(), p("run"), "--out".into(), p("eval2")],
    ];
    for s in &steps {
        hk(&s.iter().map(String::as_str).collect::<Vec<_>>())?;
    }
    let artifacts = [
        "seg/segmentation_report.jsonl",
        "seg/segmentation_failures.jsonl",
        "seg/CHRG-114hhrg10000/utterances.jsonl",
        "seg/CHRG-114hhrg10000/roster.json",
        "qa/qa_model.json",
        "qa/training_loss.csv",
        "qa/training_summary.json",
        "labeled/qa_labels.csv",
        "pairs/pairs.jsonl",
        "pairs/pairing_report.json",
        "features/features.csv",
        "ks/ks_question.csv",
        "ks/ks_answer.csv",
        "ks/heatmap_question.csv",
        "ks/heatmap_answer.csv",
        "run/run.json",
        "run/datasets.csv",
        "run/skipped.jsonl",
        "run/splits/000/plan.json",
        "run/splits/000/model.json",
        "eval/split_accuracy.csv",
        "eval/confusion.csv",
        "eval/feature_importance.csv",
        "eval/reports.jsonl",
    ];
    let mut missing: Vec<&str> = artifacts.iter().copied().filter(|a| !t.join(a).is_file()).collect();
    for dir in ["seg", "qa", "labeled", "pairs", "features", "ks", "run", "eval"] {
        if !t.join(dir).join("run_manifest.json").is_file() {
            missing.push(dir);
        }
    }
    check(missing.is_empty(), format!("missing artifacts: {missing:?}"))?;
    for name in ["split_accuracy.csv", "confusion.csv", "feature_importance.csv"] {
        let a = fs::read(t.join("eval").join(name)).map_err(|e| e.to_string())?;
        let b = fs::read(t.join("eval2").join(name)).map_err(|e| e.to_string())?;
        check(a == b, format!("{name} differs between evaluate runs"))?;
    }
    let pairs = fs::read_to_string(t.join("pairs/pairs.jsonl")).map_err(|e| e.to_string())?;
    Ok(format!(
        "{} steps exited 0, {} artifacts present, {} pairs",
        steps.len(),
        artifacts.len(),
        pairs.lines().count()
    ))
}

fn main() {
    let criteria: [(u32, &str, Duration, fn() -> Outcome); 9] = [
        (1, "metric arithmetic reproduction", Duration::from_secs(1), c1_metric_arithmetic),
        (2, "readability formula oracle", Duration::from_secs(1), c2_readability_oracle),
        (3, "KS oracle equivalence", Duration::from_secs(10), c3_ks_oracle),
        (4, "segmentation losslessness and accuracy", Duration::from_secs(30), c4_segmentation),
        (5, "Q/A classifier floor", Duration::from_secs(120), c5_qa_classifier),
        (6, "forest properties", Duration::from_secs(120), c6_forest),
        (7, "experiment partition and baselines", Duration::from_secs(120), c7_experiment_grid),
        (8, "prompt fidelity", Duration::from_secs(1), c8_prompts),
        (9, "end-to-end smoke", Duration::from_secs(300), c9_smoke),
    ];
    // Keep panic messages inside the criterion's FAIL line.
    panic::set_hook(Box::new(|_| {}));
    let mut unexpected = Vec::new();
    for (id, name, budget, f) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > budget => Err(format!("{d}; took {elapsed:.2?}, budget {budget:?}")),
            o => o,
        };
        let known = KNOWN_FAILURES.iter().find(|(k, _)| *k == id).map(|(_, m)| *m);
        match (&outcome, known) {
            (Ok(detail), None) => println!("PASS {id} {name}: {detail} [{elapsed:.2?}]"),
            (Err(msg), Some(expected)) if msg == expected => {
                println!("FAIL {id} {name}: {msg} [{elapsed:.2?}] (known)")
            }
            (Ok(detail), Some(_)) => {
                println!("PASS {id} {name}: {detail} [{elapsed:.2?}] (expected a failure)");
                unexpected.push(id);
            }
            (Err(msg), _) => {
                println!("FAIL {id} {name}: {msg} [{elapsed:.2?}]");
                unexpected.push(id);
            }
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected results for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
