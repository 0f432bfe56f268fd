use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Duration;

use hearingkit_core::corpus::{
    load_corpus, load_rosters, read_jsonl, store_corpus, store_roster, write_jsonl,
    GovernmentConfig, Hearing, HearingMeta, QaLabel, QaPair, Roster, META_FILE, ROSTER_FILE,
};
use hearingkit_core::experiment::{
    build_datasets, collect_exchanges, emit_qa_table, emit_table, emit_verification_table,
    fit_split, grouped_features, plan_splits, read_predictions, render_prompt, roster_names,
    score_external, score_split, ExperimentConfig, ModelKind, SplitOutcome, SplitPlan,
    TableLayout, TrainedModel, UtteranceKind,
};
use hearingkit_core::features::{extract_corpus, read_feature_matrix, write_feature_matrix, Lexicons};
use hearingkit_core::models::{majority_baseline, NameStripper};
use hearingkit_core::qa::{
    classify_qa, classify_with_threshold, load_training_corpus, pair_qa, score_confusion,
    train_qa, LexicalModel, QaClass, QaConfusion, QaHyper, Source,
};
use hearingkit_core::segment::fetch::{FetchConfig, Fetcher};
use hearingkit_core::segment::verify::{
    read_verdicts, score_verdicts, verify_sample, SampleManifest, SampleSpec,
};
use hearingkit_core::segment::{segment_hearing, HeuristicRecognizer, SegmenterRules};
use hearingkit_core::stats::{compare_groups, emit_heatmap_matrix, write_comparisons, PAIRS};
use hearingkit_core::synth::{government_table, synth_corpus, synth_qa_rows, write_qa_csv, SynthSpec};
use hearingkit_core::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifest::{self, RunManifest};
use crate::{
    ClassifyQaCommand, Cli, Command, Kind, SynthCommand, TextFormat, VerifyCommand,
};

pub const TRANSCRIPT_FILE: &str = "transcript.txt";
pub const TRUTH_FILE: &str = "truth.jsonl";
pub const RUN_FILE: &str = "run.json";

/// Bookkeeping shared by every subcommand: output directory, inputs to
/// checksum and the run manifest.
struct Run<'a> {
    cli: &'a Cli,
    name: &'static str,
    out: PathBuf,
    inputs: Vec<PathBuf>,
    started_at: String,
}

impl<'a> Run<'a> {
    fn start(cli: &'a Cli, name: &'static str, out: &Path) -> Result<Self> {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        Ok(Run {
            cli,
            name,
            out: out.to_path_buf(),
            inputs: Vec::new(),
            started_at: manifest::now(),
        })
    }

    /// Record an input; fails early with the path when it does not exist.
    fn input(&mut self, p: &Path) -> Result<()> {
        if !p.exists() {
            return Err(Error::io(
                p,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
            ));
        }
        self.inputs.push(p.to_path_buf());
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn finish(self) -> Result<()> {
        let config = serde_json::to_value(self.cli).expect("arguments serialize");
        let mut checksums = BTreeMap::new();
        for p in &self.inputs {
            checksums.insert(p.display().to_string(), manifest::checksum(p)?);
        }
        manifest::write(
            &self.out,
            &RunManifest {
                subcommand: self.name.into(),
                config_hash: manifest::config_hash(&config),
                config,
                input_checksums: checksums,
                seed: self.cli.seed,
                tool_version: env!("CARGO_PKG_VERSION").into(),
                started_at: self.started_at,
                finished_at: manifest::now(),
            },
        )
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Record {
        file: path.to_path_buf(),
        line: e.line(),
        field: "<record>".into(),
        message: e.to_string(),
    })
}

fn lexicons(dir: Option<&Path>) -> Result<Lexicons> {
    match dir {
        Some(d) => Lexicons::load(d),
        None => Ok(Lexicons::bundled().clone()),
    }
}

fn source_of(f: TextFormat) -> Source {
    match f {
        TextFormat::Ama => Source::Ama,
        TextFormat::Ukparl => Source::UkParl,
        TextFormat::Hand => Source::HandLabeled,
    }
}

fn utterance_kind(k: Kind) -> UtteranceKind {
    match k {
        Kind::Question => UtteranceKind::Question,
        Kind::Answer => UtteranceKind::Answer,
        Kind::Both => UtteranceKind::Both,
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fetch(a) => {
            let mut run = Run::start(cli, "fetch", &a.out)?;
            let mut ids = a.ids.clone();
            if let Some(f) = &a.ids_file {
                run.input(f)?;
                let text = fs::read_to_string(f).map_err(|e| Error::io(f, e))?;
                ids.extend(
                    text.lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty() && !l.starts_with('#'))
                        .map(String::from),
                );
            }
            if ids.is_empty() {
                return Err(Error::InvalidInput("no hearing ids given (--ids or --ids-file)".into()));
            }
            let mut cfg = FetchConfig::new(a.endpoint.clone(), a.cache_dir.clone());
            cfg.min_delay = Duration::from_millis(a.min_delay_ms);
            let fetcher = Fetcher::new(cfg);
            for id in &ids {
                let text = fetcher.fetch(id)?;
                let dir = run.path(id);
                fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                let p = dir.join(TRANSCRIPT_FILE);
                fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
            }
            eprintln!("fetched {} transcript(s), {} network request(s)", ids.len(), fetcher.network_calls());
            run.finish()
        }
        Command::Segment(a) => segment(cli, a),
        Command::ClassifyQa(c) => match c {
            ClassifyQaCommand::Train(a) => {
                let mut run = Run::start(cli, "classify-qa train", &a.out)?;
                let mut examples = Vec::new();
                let mut summary = BTreeMap::new();
                let sources = a
                    .ama
                    .iter()
                    .map(|p| (p, Source::Ama))
                    .chain(a.ukparl.iter().map(|p| (p, Source::UkParl)))
                    .chain(a.hand.iter().map(|p| (p, Source::HandLabeled)));
                for (path, source) in sources {
                    run.input(path)?;
                    let c = load_training_corpus(path, source)?;
                    summary.insert(
                        path.display().to_string(),
                        serde_json::json!({
                            "rows_read": c.rows_read,
                            "duplicates_removed": c.duplicates_removed,
                            "questions": c.count(QaClass::Question),
                            "answers": c.count(QaClass::Answer),
                        }),
                    );
                    examples.extend(c.examples);
                }
                if examples.is_empty() {
                    return Err(Error::InvalidInput("no training files given (--ama, --ukparl, --hand)".into()));
                }
                let t = train_qa(
                    &examples,
                    QaHyper {
                        learning_rate: a.learning_rate,
                        epochs: a.epochs,
                        l2: a.l2,
                        seed: cli.seed,
                    },
                )?;
                t.model.save(&run.path("qa_model.json"))?;
                let mut w = csv::Writer::from_path(run.path("training_loss.csv"))
                    .map_err(|e| Error::InvalidInput(e.to_string()))?;
                w.write_record(["epoch", "loss"]).map_err(|e| Error::InvalidInput(e.to_string()))?;
                for (i, l) in t.loss_history.iter().enumerate() {
                    w.write_record([i.to_string(), format!("{l}")])
                        .map_err(|e| Error::InvalidInput(e.to_string()))?;
                }
                w.flush().map_err(|e| Error::io(run.path("training_loss.csv"), e))?;
                write_json(
                    &run.path("training_summary.json"),
                    &serde_json::json!({
                        "inputs": summary,
                        "examples": examples.len(),
                        "vocabulary": t.model.vocabulary.len(),
                        "stable_learning_rate": t.stable_learning_rate,
                        "final_loss": t.loss_history.last(),
                    }),
                )?;
                run.finish()
            }
            ClassifyQaCommand::Apply(a) => {
                let mut run = Run::start(cli, "classify-qa apply", &a.out)?;
                run.input(&a.model)?;
                run.input(&a.corpus)?;
                let model = LexicalModel::load(&a.model)?;
                let mut corpus = load_corpus(&a.corpus)?;
                let rosters = load_rosters(&a.corpus)?;
                let mut rows = Vec::new();
                for h in &mut corpus {
                    for u in &mut h.utterances {
                        let (class, conf) = classify_qa(&model, &u.text);
                        u.qa_label = match a.min_confidence {
                            Some(t) => classify_with_threshold(&model, &u.text, t),
                            None => class.as_label(),
                        };
                        rows.push([u.utterance_id.clone(), format!("{:?}", u.qa_label), format!("{conf}")]);
                    }
                }
                store_corpus(&corpus, &a.out)?;
                for r in rosters.values() {
                    store_roster(r, &a.out)?;
                }
                let mut w = csv::Writer::from_path(run.path("qa_labels.csv"))
                    .map_err(|e| Error::InvalidInput(e.to_string()))?;
                w.write_record(["utterance_id", "label", "confidence"])
                    .map_err(|e| Error::InvalidInput(e.to_string()))?;
                for r in rows {
                    w.write_record(&r).map_err(|e| Error::InvalidInput(e.to_string()))?;
                }
                w.flush().map_err(|e| Error::io(run.path("qa_labels.csv"), e))?;
                run.finish()
            }
            ClassifyQaCommand::Evaluate(a) => {
                let mut run = Run::start(cli, "classify-qa evaluate", &a.out)?;
                run.input(&a.model)?;
                let model = LexicalModel::load(&a.model)?;
                let mut columns: Vec<(String, QaConfusion)> = Vec::new();
                let mut truth_all = Vec::new();
                if let Some(test) = &a.test {
                    run.input(test)?;
                    let c = load_training_corpus(test, source_of(a.format))?;
                    let pred: Vec<QaClass> = c.examples.iter().map(|e| classify_qa(&model, &e.text).0).collect();
                    let truth: Vec<QaClass> = c.examples.iter().map(|e| e.label).collect();
                    columns.push(("total".into(), score_confusion(&pred, &truth)?));
                    truth_all = truth;
                } else if let Some(corpus) = &a.corpus {
                    run.input(corpus)?;
                    let mut by_session: BTreeMap<u32, (Vec<QaClass>, Vec<QaClass>)> = BTreeMap::new();
                    for h in load_corpus(corpus)? {
                        for u in &h.utterances {
                            let truth = match u.qa_label {
                                QaLabel::Question => QaClass::Question,
                                QaLabel::Answer => QaClass::Answer,
                                _ => continue,
                            };
                            let e = by_session.entry(h.meta.session).or_default();
                            e.0.push(classify_qa(&model, &u.text).0);
                            e.1.push(truth);
                        }
                    }
                    let mut total = QaConfusion::default();
                    for (s, (p, t)) in &by_session {
                        let c = score_confusion(p, t)?;
                        total = total.merge(&c);
                        columns.push((s.to_string(), c));
                        truth_all.extend(t);
                    }
                    columns.push(("total".into(), total));
                } else {
                    return Err(Error::InvalidInput("give --test or --corpus".into()));
                }
                emit_qa_table(&columns, create(&run.path("qa_table.csv"))?)?;
                let total = &columns.last().expect("total column").1;
                let baseline = majority_baseline(&truth_all);
                write_json(
                    &run.path("qa_metrics.json"),
                    &serde_json::json!({
                        "n": total.total(),
                        "accuracy": total.accuracy(),
                        "baseline_class": baseline.map(|b| b.0.to_string()),
                        "baseline_accuracy": baseline.map(|b| b.1),
                    }),
                )?;
                run.finish()
            }
        },
        Command::Pair(a) => {
            let mut run = Run::start(cli, "pair", &a.out)?;
            run.input(&a.corpus)?;
            let corpus = load_corpus(&a.corpus)?;
            let rosters = load_rosters(&a.corpus)?;
            let mut pairs = Vec::new();
            let mut report = Vec::new();
            for h in &corpus {
                let roster = roster_for(&rosters, h)?;
                let o = pair_qa(&h.utterances, roster);
                report.push(serde_json::json!({
                    "hearing_id": h.meta.hearing_id,
                    "pairs": o.pairs.len(),
                    "unpaired_questions": o.unpaired_questions,
                    "orphan_answers": o.orphan_answers,
                }));
                pairs.extend(o.pairs);
            }
            write_jsonl(&run.path("pairs.jsonl"), &pairs)?;
            write_json(&run.path("pairing_report.json"), &report)?;
            run.finish()
        }
        Command::Features(a) => {
            let mut run = Run::start(cli, "features", &a.out)?;
            if a.export_lexicons {
                Lexicons::export_bundled(&run.path("lexicons"))?;
                return run.finish();
            }
            if let Some(l) = &a.lexicons {
                run.input(l)?;
            }
            let lex = lexicons(a.lexicons.as_deref())?;
            let corpus_dir = a.corpus.as_ref().expect("clap requires --corpus");
            run.input(corpus_dir)?;
            let corpus = load_corpus(corpus_dir)?;
            let utterances: Vec<_> = corpus.into_iter().flat_map(|h| h.utterances).collect();
            let rows = extract_corpus(&utterances, &lex);
            write_feature_matrix(&rows, create(&run.path("features.csv"))?)?;
            run.finish()
        }
        Command::Kstest(a) => {
            let mut run = Run::start(cli, "kstest", &a.out)?;
            for p in [&a.corpus, &a.pairs, &a.features, &a.government] {
                run.input(p)?;
            }
            let exchanges = exchanges(&a.corpus, &a.pairs, &a.government)?;
            let matrix = read_feature_matrix(&a.features)?;
            let rows = grouped_features(&exchanges, &matrix)?;
            let kinds: &[(QaClass, &str)] = match a.kind {
                Kind::Question => &[(QaClass::Question, "question")],
                Kind::Answer => &[(QaClass::Answer, "answer")],
                Kind::Both => &[(QaClass::Question, "question"), (QaClass::Answer, "answer")],
            };
            for &(kind, name) in kinds {
                let c = compare_groups(&rows, &PAIRS, kind);
                write_comparisons(&c.results, create(&run.path(&format!("ks_{name}.csv")))?)?;
                emit_heatmap_matrix(&c.results, create(&run.path(&format!("heatmap_{name}.csv")))?)?;
                write_jsonl(&run.path(&format!("ks_skipped_{name}.jsonl")), &c.skipped)?;
            }
            run.finish()
        }
        Command::Train(a) => train(cli, a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Prompts(a) => {
            let mut run = Run::start(cli, "prompts", &a.out)?;
            run.input(&a.corpus)?;
            run.input(&a.pairs)?;
            let corpus = load_corpus(&a.corpus)?;
            let rosters = load_rosters(&a.corpus)?;
            let pairs: Vec<QaPair> = read_jsonl(&a.pairs)?;
            let text: BTreeMap<&str, &str> = corpus
                .iter()
                .flat_map(|h| h.utterances.iter())
                .map(|u| (u.utterance_id.as_str(), u.text.as_str()))
                .collect();
            let stripper = NameStripper::new(roster_names(&rosters));
            let kind = utterance_kind(a.kind);
            let mut out = Vec::with_capacity(pairs.len());
            for p in &pairs {
                let get = |id: &str| -> Result<String> {
                    let t = text
                        .get(id)
                        .ok_or_else(|| Error::InvalidInput(format!("pair {} refers to unknown utterance {id}", p.pair_id)))?;
                    Ok(if a.keep_names { t.to_string() } else { stripper.strip(t) })
                };
                let q = get(&p.question_utterance_id)?;
                let ans = get(&p.answer_utterance_id)?;
                out.push(serde_json::json!({
                    "pair_id": p.pair_id,
                    "kind": kind.to_string(),
                    "prompt": render_prompt(kind, Some(&q), Some(&ans))?,
                }));
            }
            write_jsonl(&run.path("prompts.jsonl"), &out)?;
            run.finish()
        }
        Command::VerifySample(v) => match v {
            VerifyCommand::Sample(a) => {
                let mut run = Run::start(cli, "verify-sample sample", &a.out)?;
                run.input(&a.corpus)?;
                let corpus = load_corpus(&a.corpus)?;
                let m = verify_sample(
                    &corpus,
                    SampleSpec {
                        hearings_per_session: a.hearings_per_session,
                        utterances_per_hearing: a.utterances_per_hearing,
                    },
                    cli.seed,
                );
                for w in &m.warnings {
                    eprintln!("warning: {w}");
                }
                m.write_csv(&run.path("sample.csv"))?;
                run.finish()
            }
            VerifyCommand::Score(a) => {
                let mut run = Run::start(cli, "verify-sample score", &a.out)?;
                run.input(&a.manifest)?;
                run.input(&a.verdicts)?;
                let m = SampleManifest::read_csv(&a.manifest)?;
                let verdicts = read_verdicts(&a.verdicts)?;
                let summary = score_verdicts(&verdicts, &m.session_of())?;
                emit_verification_table(&summary, create(&run.path("verification_table.csv"))?)?;
                write_json(&run.path("verification_summary.json"), &summary)?;
                run.finish()
            }
        },
        Command::Synth(s) => match s {
            SynthCommand::Hearings(a) => {
                let run = Run::start(cli, "synth hearings", &a.out)?;
                if a.sessions.is_empty() || a.min_exchanges > a.max_exchanges {
                    return Err(Error::InvalidInput("need sessions and min-exchanges <= max-exchanges".into()));
                }
                let spec = SynthSpec {
                    hearings: a.hearings,
                    sessions: a.sessions.clone(),
                    min_exchanges: a.min_exchanges,
                    max_exchanges: a.max_exchanges,
                    adversarial: !a.consistent_markers,
                };
                for h in synth_corpus(&spec, cli.seed)? {
                    let dir = run.path(&h.meta.hearing_id);
                    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                    h.meta.save(&dir.join(META_FILE))?;
                    h.roster.save(&dir.join(ROSTER_FILE))?;
                    let t = dir.join(TRANSCRIPT_FILE);
                    fs::write(&t, &h.raw).map_err(|e| Error::io(&t, e))?;
                    write_jsonl(&dir.join(TRUTH_FILE), &h.truth)?;
                }
                government_table().save(&run.path("government.json"))?;
                run.finish()
            }
            SynthCommand::Qa(a) => {
                let run = Run::start(cli, "synth qa", &a.out)?;
                let source = source_of(a.source);
                let rows = synth_qa_rows(source, a.rows, cli.seed);
                let name = match a.source {
                    TextFormat::Ama => "ama.csv",
                    TextFormat::Ukparl => "ukparl.csv",
                    TextFormat::Hand => "hand.csv",
                };
                write_qa_csv(&rows, create(&run.path(name))?)?;
                run.finish()
            }
        },
    }
}

fn roster_for<'a>(rosters: &'a BTreeMap<String, Roster>, h: &Hearing) -> Result<&'a Roster> {
    rosters
        .get(&h.meta.hearing_id)
        .ok_or_else(|| Error::InvalidInput(format!("no roster for hearing {}", h.meta.hearing_id)))
}

fn exchanges(
    corpus_dir: &Path,
    pairs: &Path,
    government: &Path,
) -> Result<Vec<hearingkit_core::experiment::ExchangeRow>> {
    let corpus = load_corpus(corpus_dir)?;
    let rosters = load_rosters(corpus_dir)?;
    let pairs: Vec<QaPair> = read_jsonl(pairs)?;
    let gov = GovernmentConfig::load(government)?;
    collect_exchanges(&corpus, &rosters, &pairs, &gov)
}

fn segment(cli: &Cli, a: &crate::SegmentArgs) -> Result<()> {
    let mut run = Run::start(cli, "segment", &a.out)?;
    run.input(&a.input)?;
    let rules = match &a.rules {
        Some(p) => {
            run.input(p)?;
            SegmenterRules::load(p)?
        }
        None => SegmenterRules::default_rules().clone(),
    };
    let mut dirs = Vec::new();
    for entry in fs::read_dir(&a.input).map_err(|e| Error::io(&a.input, e))? {
        let p = entry.map_err(|e| Error::io(&a.input, e))?.path();
        if p.join(TRANSCRIPT_FILE).is_file() {
            dirs.push(p);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{}: no <hearing_id>/{TRANSCRIPT_FILE} directories",
            a.input.display()
        )));
    }
    let results: Vec<Result<_>> = dirs
        .par_iter()
        .map(|d| {
            let meta = HearingMeta::load(&d.join(META_FILE))?;
            let roster = Roster::load(&d.join(ROSTER_FILE))?;
            let tp = d.join(TRANSCRIPT_FILE);
            let raw = fs::read_to_string(&tp).map_err(|e| Error::io(&tp, e))?;
            let seg = segment_hearing(&raw, &meta, &roster, &rules, &HeuristicRecognizer)?;
            Ok((seg.hearing, seg.report, roster))
        })
        .collect();
    let mut hearings = Vec::new();
    let mut reports = Vec::new();
    let mut rosters = Vec::new();
    let mut failures = Vec::new();
    for (d, r) in dirs.iter().zip(results) {
        match r {
            Ok((h, rep, ros)) => {
                hearings.push(h);
                reports.push(rep);
                rosters.push(ros);
            }
            Err(e @ Error::SegmentationFailed { .. }) => {
                eprintln!("warning: {e}");
                failures.push(serde_json::json!({"input": d.display().to_string(), "error": e.to_string()}));
            }
            Err(e) => return Err(e),
        }
    }
    if hearings.is_empty() {
        return Err(Error::InvalidInput("no hearing could be segmented".into()));
    }
    store_corpus(&hearings, &a.out)?;
    for r in &rosters {
        store_roster(r, &a.out)?;
    }
    write_jsonl(&run.path("segmentation_report.jsonl"), &reports)?;
    write_jsonl(&run.path("segmentation_failures.jsonl"), &failures)?;
    run.finish()
}

#[derive(Debug, Serialize, Deserialize)]
struct RunIndex {
    experiment: ExperimentConfig,
    seed: u64,
    splits: Vec<SplitEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitEntry {
    key: String,
    dir: Option<String>,
    n_train: usize,
    n_test: usize,
    error: Option<String>,
    notes: Vec<String>,
}

fn train(cli: &Cli, a: &crate::TrainArgs) -> Result<()> {
    let mut run = Run::start(cli, "train", &a.out)?;
    run.input(&a.experiment)?;
    let text = fs::read_to_string(&a.experiment).map_err(|e| Error::io(&a.experiment, e))?;
    let exp: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", a.experiment.display())))?;
    exp.validate()?;
    let corpus = a
        .corpus
        .clone()
        .or_else(|| exp.corpus.clone())
        .ok_or_else(|| Error::Config("no corpus given (--corpus or `corpus` in the experiment file)".into()))?;
    for p in [&corpus, &a.pairs, &a.government] {
        run.input(p)?;
    }
    if let Some(l) = &a.lexicons {
        run.input(l)?;
    }
    let cfg = exp.model_config(cli.seed);
    let rows = exchanges(&corpus, &a.pairs, &a.government)?;
    let stripper = NameStripper::new(roster_names(&load_rosters(&corpus)?));
    let lex = lexicons(a.lexicons.as_deref())?;
    let built = build_datasets(&rows, &exp.split, &exp.features, &lex, &stripper)?;
    write_jsonl(&run.path("skipped.jsonl"), &built.skipped)?;

    let mut summary = csv::Writer::from_path(run.path("datasets.csv"))
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let classes = exp.split.task.classes();
    let mut header = vec!["split".to_string(), "rows".to_string()];
    header.extend(classes.iter().map(|c| format!("n_{c}")));
    summary.write_record(&header).map_err(|e| Error::InvalidInput(e.to_string()))?;
    for d in &built.datasets {
        let mut rec = vec![d.key.clone(), d.dataset.rows.len().to_string()];
        for k in 0..classes.len() {
            rec.push(d.dataset.rows.iter().filter(|r| r.label == k).count().to_string());
        }
        summary.write_record(&rec).map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    summary.flush().map_err(|e| Error::io(run.path("datasets.csv"), e))?;

    let plans = plan_splits(&built.datasets, cfg.test_fraction, cfg.seed);
    let splits_dir = run.path("splits");
    fs::create_dir_all(&splits_dir).map_err(|e| Error::io(&splits_dir, e))?;
    let entries: Vec<Result<SplitEntry>> = plans
        .into_par_iter()
        .enumerate()
        .zip(built.datasets.par_iter())
        .map(|((i, plan), d)| {
            let plan = match plan {
                Ok(p) => p,
                Err(e) => {
                    return Ok(SplitEntry {
                        key: d.key.clone(),
                        dir: None,
                        n_train: 0,
                        n_test: 0,
                        error: Some(e.to_string()),
                        notes: Vec::new(),
                    })
                }
            };
            let rel = format!("splits/{i:03}");
            let dir = run.out.join(&rel);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            write_json(&dir.join("plan.json"), &plan)?;
            let (error, notes) = match &cfg.model {
                ModelKind::External { .. } => (None, Vec::new()),
                _ => match fit_split(&plan, &cfg) {
                    Ok((model, notes)) => {
                        model.save(&dir.join("model.json"))?;
                        (None, notes)
                    }
                    Err(e) => (Some(e.to_string()), Vec::new()),
                },
            };
            Ok(SplitEntry {
                key: plan.key.clone(),
                dir: Some(rel),
                n_train: plan.train.rows.len(),
                n_test: plan.test.rows.len(),
                error,
                notes,
            })
        })
        .collect();
    let splits = entries.into_iter().collect::<Result<Vec<_>>>()?;
    for s in &splits {
        if let Some(e) = &s.error {
            eprintln!("warning: split {}: {e}", s.key);
        }
    }
    write_json(
        &run.path(RUN_FILE),
        &RunIndex {
            experiment: exp.clone(),
            seed: cfg.seed,
            splits,
        },
    )?;
    run.finish()
}

fn evaluate(cli: &Cli, a: &crate::EvaluateArgs) -> Result<()> {
    let mut run = Run::start(cli, "evaluate", &a.out)?;
    run.input(&a.run)?;
    let index: RunIndex = read_json(&a.run.join(RUN_FILE))?;
    let external = match &a.predictions {
        Some(p) => {
            run.input(p)?;
            Some(read_predictions(p)?)
        }
        None => match &index.experiment.model {
            ModelKind::External { predictions } => Some(predictions.clone()),
            _ => None,
        },
    };
    let model_name = if external.is_some() {
        "external".to_string()
    } else {
        index.experiment.model_config(index.seed).name().to_string()
    };
    let outcomes: Vec<SplitOutcome> = index
        .splits
        .par_iter()
        .map(|s| {
            let result = (|| {
                if let Some(e) = &s.error {
                    return Err(Error::InvalidInput(format!("training failed: {e}")));
                }
                let dir = a.run.join(s.dir.as_deref().expect("split without error has a dir"));
                let plan: SplitPlan = read_json(&dir.join("plan.json"))?;
                let report = match &external {
                    Some(p) => score_external(&plan, p)?,
                    None => {
                        let model = TrainedModel::load(&dir.join("model.json"))?;
                        score_split(&plan, &model, index.experiment.importances)?
                    }
                };
                Ok((report, s.notes.clone()))
            })();
            SplitOutcome::from_result(&s.key, &model_name, result)
        })
        .collect();
    for layout in TableLayout::ALL {
        emit_table(&outcomes, layout, create(&run.path(layout.file_name()))?)?;
    }
    write_jsonl(&run.path("reports.jsonl"), &outcomes)?;
    run.finish()
}
