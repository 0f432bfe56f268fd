//! Split-wise party experiments: dataset construction along committee /
//! session / hearing-type / government / presidency splits, model runs
//! against majority baselines, result tables and zero-shot prompts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Hearing, Party, QaPair, Roster, Standing};
use crate::corpus::GovernmentConfig;
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureRow, FeatureVector, Lexicons, SCHEMA, SCHEMA_VERSION};
use crate::models::{
    cross_validate_grid, evaluate, feature_importance, predict_forest_all, train_forest,
    train_logistic, DataRow, Dataset, EvalReport, ForestGrid, ForestHyper, ForestModel,
    Government, GroupKeys, ImportanceMode, LabelTask, LinearModel, LogisticHyper, NameStripper,
};
use crate::qa::{QaClass, QaConfusion};
use crate::stats::GroupedFeatures;
use crate::rng::{derive_seed_str, rng_from_seed};
use crate::segment::verify::VerificationSummary;
use crate::text::word_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Committee,
    Session,
    HearingType,
    Government,
    Presidency,
}

impl Dimension {
    pub fn name(self) -> &'static str {
        match self {
            Dimension::Committee => "committee",
            Dimension::Session => "session",
            Dimension::HearingType => "hearing_type",
            Dimension::Government => "government",
            Dimension::Presidency => "presidency",
        }
    }

    pub fn value(self, keys: &GroupKeys) -> String {
        match self {
            Dimension::Committee => keys.committee.clone(),
            Dimension::Session => keys.session.to_string(),
            Dimension::HearingType => format!("{:?}", keys.hearing_type),
            Dimension::Government => match keys.government {
                Government::Unified => "unified".into(),
                Government::Divided => "divided".into(),
            },
            Dimension::Presidency => keys.presidency.code().into(),
        }
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "committee" => Ok(Dimension::Committee),
            "session" => Ok(Dimension::Session),
            "hearing_type" => Ok(Dimension::HearingType),
            "government" => Ok(Dimension::Government),
            "presidency" => Ok(Dimension::Presidency),
            other => Err(Error::Config(format!("unknown split dimension `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtteranceKind {
    Question,
    Answer,
    Both,
}

impl FromStr for UtteranceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "question" | "q" => Ok(UtteranceKind::Question),
            "answer" | "a" => Ok(UtteranceKind::Answer),
            "both" => Ok(UtteranceKind::Both),
            other => Err(Error::Config(format!("unknown utterance kind `{other}`"))),
        }
    }
}

pub const DEFAULT_MIN_ROWS: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    #[serde(default)]
    pub dimensions: Vec<Dimension>,
    pub kind: UtteranceKind,
    pub task: LabelTask,
    #[serde(default = "default_min_rows")]
    pub min_rows: usize,
    /// Keep speaker names in the text instead of replacing them.
    #[serde(default)]
    pub keep_names: bool,
}

fn default_min_rows() -> usize {
    DEFAULT_MIN_ROWS
}

impl SplitSpec {
    pub fn new(dimensions: Vec<Dimension>, kind: UtteranceKind, task: LabelTask) -> Self {
        SplitSpec {
            dimensions,
            kind,
            task,
            min_rows: DEFAULT_MIN_ROWS,
            keep_names: false,
        }
    }

    pub fn validate(&self, folds: usize) -> Result<()> {
        if self.min_rows < 2 * folds {
            return Err(Error::Config(format!(
                "min_rows {} is below twice the fold count {folds}",
                self.min_rows
            )));
        }
        let uniq: BTreeSet<_> = self.dimensions.iter().collect();
        if uniq.len() != self.dimensions.len() {
            return Err(Error::Config("split dimensions repeat".into()));
        }
        Ok(())
    }
}

/// One question/answer exchange with the questioner's labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeRow {
    pub pair_id: String,
    pub question_id: String,
    pub answer_id: String,
    pub question: String,
    pub answer: String,
    pub party: Party,
    pub standing: Standing,
    pub keys: GroupKeys,
    /// The hearing type fell back to General for lack of metadata.
    pub hearing_type_inferred: bool,
}

impl ExchangeRow {
    pub fn text(&self, kind: UtteranceKind) -> String {
        match kind {
            UtteranceKind::Question => self.question.clone(),
            UtteranceKind::Answer => self.answer.clone(),
            UtteranceKind::Both => format!("{} {}", self.question, self.answer),
        }
    }
}

/// Join pairs with their hearings, rosters and the government table.
pub fn collect_exchanges(
    corpus: &[Hearing],
    rosters: &BTreeMap<String, Roster>,
    pairs: &[QaPair],
    government: &GovernmentConfig,
) -> Result<Vec<ExchangeRow>> {
    let hearings: BTreeMap<&str, &Hearing> =
        corpus.iter().map(|h| (h.meta.hearing_id.as_str(), h)).collect();
    let mut out = Vec::with_capacity(pairs.len());
    for p in pairs {
        let hearing_id = p
            .question_utterance_id
            .rsplit_once("-u")
            .map(|(h, _)| h)
            .ok_or_else(|| Error::InvalidInput(format!("bad utterance id in pair {}", p.pair_id)))?;
        let h = hearings.get(hearing_id).ok_or_else(|| {
            Error::InvalidInput(format!("pair {} refers to unknown hearing {hearing_id}", p.pair_id))
        })?;
        let text_of = |id: &str| -> Result<String> {
            h.utterances
                .iter()
                .find(|u| u.utterance_id == id)
                .map(|u| u.text.clone())
                .ok_or_else(|| Error::InvalidInput(format!("pair {} refers to unknown utterance {id}", p.pair_id)))
        };
        let roster = rosters.get(hearing_id).ok_or_else(|| {
            Error::InvalidInput(format!("no roster for hearing {hearing_id}"))
        })?;
        let person = roster.person(&p.questioner).ok_or_else(|| {
            Error::InvalidInput(format!("questioner {} not on roster {hearing_id}", p.questioner))
        })?;
        let ctx = government.context(h.meta.session).ok_or_else(|| {
            Error::Standing(format!("no government context for session {}", h.meta.session))
        })?;
        out.push(ExchangeRow {
            pair_id: p.pair_id.clone(),
            question_id: p.question_utterance_id.clone(),
            answer_id: p.answer_utterance_id.clone(),
            question: text_of(&p.question_utterance_id)?,
            answer: text_of(&p.answer_utterance_id)?,
            party: person.party,
            standing: government.standing(person, &h.meta)?,
            keys: GroupKeys {
                session: h.meta.session,
                committee: h.meta.committee.clone(),
                hearing_type: h.meta.hearing_type,
                government: if ctx.unified {
                    Government::Unified
                } else {
                    Government::Divided
                },
                chamber: h.meta.chamber,
                presidency: ctx.president_party,
            },
            hearing_type_inferred: h.meta.hearing_type_inferred,
        });
    }
    Ok(out)
}

/// Names of every person on any roster, full and surname.
pub fn roster_names(rosters: &BTreeMap<String, Roster>) -> Vec<String> {
    let mut names = BTreeSet::new();
    for r in rosters.values() {
        for p in &r.people {
            names.insert(p.display_name.clone());
            names.insert(p.surname.clone());
        }
    }
    names.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSet {
    /// The fixed linguistic feature schema.
    Linguistic,
    /// Unigram counts over the `max_vocab` most frequent tokens.
    Lexical { max_vocab: usize },
}

/// Rows that did not become part of any dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub key: String,
    pub row_ids: Vec<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub key: String,
    pub dataset: Dataset,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuiltDatasets {
    pub datasets: Vec<SplitDataset>,
    pub skipped: Vec<SkipRecord>,
}

pub fn split_key(dimensions: &[Dimension], keys: &GroupKeys) -> String {
    if dimensions.is_empty() {
        return "all".into();
    }
    dimensions
        .iter()
        .map(|d| format!("{}={}", d.name(), d.value(keys)))
        .collect::<Vec<_>>()
        .join("|")
}

fn label_of(task: LabelTask, row: &ExchangeRow) -> Option<usize> {
    match task {
        LabelTask::Affiliation => match row.party {
            Party::Democrat => Some(0),
            Party::Republican => Some(1),
            Party::Independent => Some(2),
            Party::None => None,
        },
        LabelTask::Standing => match row.standing {
            Standing::Majority => Some(0),
            Standing::Minority => Some(1),
            Standing::NotApplicable => None,
        },
    }
}

/// One dataset per distinct split key (ordered by key). Unlabeled rows and
/// splits below `min_rows` become skip records, so every input row lands
/// in exactly one dataset or one skip record.
pub fn build_datasets(
    rows: &[ExchangeRow],
    spec: &SplitSpec,
    features: &FeatureSet,
    lexicons: &Lexicons,
    names: &NameStripper,
) -> Result<BuiltDatasets> {
    if rows.is_empty() {
        return Err(Error::EmptySample("no exchanges to build datasets from".into()));
    }
    let texts: Vec<String> = rows
        .par_iter()
        .map(|r| {
            let t = r.text(spec.kind);
            if spec.keep_names {
                t
            } else {
                names.strip(&t)
            }
        })
        .collect();
    let (feature_names, schema_version, vectors): (Vec<String>, String, Vec<Vec<Option<f64>>>) =
        match features {
            FeatureSet::Linguistic => (
                SCHEMA.iter().map(|s| s.to_string()).collect(),
                SCHEMA_VERSION.to_string(),
                texts
                    .par_iter()
                    .map(|t| extract_features(t, lexicons).values)
                    .collect(),
            ),
            FeatureSet::Lexical { max_vocab } => {
                let tokens: Vec<Vec<String>> = texts.iter().map(|t| word_tokens(t)).collect();
                let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
                for ts in &tokens {
                    for t in ts {
                        *freq.entry(t.as_str()).or_insert(0) += 1;
                    }
                }
                let mut ranked: Vec<(&str, usize)> = freq.into_iter().collect();
                ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
                ranked.truncate(*max_vocab);
                let vocab: Vec<String> = ranked.iter().map(|(t, _)| format!("u:{t}")).collect();
                let index: BTreeMap<&str, usize> =
                    ranked.iter().enumerate().map(|(i, (t, _))| (*t, i)).collect();
                let vectors = tokens
                    .iter()
                    .map(|ts| {
                        let mut v = vec![Some(0.0); vocab.len()];
                        for t in ts {
                            if let Some(&i) = index.get(t.as_str()) {
                                v[i] = v[i].map(|c| c + 1.0);
                            }
                        }
                        v
                    })
                    .collect();
                (vocab, format!("lexical-unigram/{max_vocab}"), vectors)
            }
        };

    let mut groups: BTreeMap<String, Vec<DataRow>> = BTreeMap::new();
    let mut unlabeled = Vec::new();
    for (row, features) in rows.iter().zip(vectors) {
        let Some(label) = label_of(spec.task, row) else {
            unlabeled.push(row.pair_id.clone());
            continue;
        };
        groups
            .entry(split_key(&spec.dimensions, &row.keys))
            .or_default()
            .push(DataRow {
                id: row.pair_id.clone(),
                features,
                label,
                keys: row.keys.clone(),
            });
    }
    let mut out = BuiltDatasets::default();
    if !unlabeled.is_empty() {
        out.skipped.push(SkipRecord {
            key: "unlabeled".into(),
            row_ids: unlabeled,
            reason: format!("questioner has no {:?} label", spec.task),
        });
    }
    for (key, rows) in groups {
        if rows.len() < spec.min_rows {
            out.skipped.push(SkipRecord {
                row_ids: rows.iter().map(|r| r.id.clone()).collect(),
                reason: format!("{} rows, below min_rows {}", rows.len(), spec.min_rows),
                key,
            });
            continue;
        }
        let dataset = Dataset {
            task: spec.task,
            schema_version: schema_version.clone(),
            feature_names: feature_names.clone(),
            classes: spec.task.classes(),
            rows,
        };
        dataset.validate()?;
        out.datasets.push(SplitDataset { key, dataset });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Forest {
        #[serde(default)]
        grid: Option<ForestGrid>,
    },
    Logistic {
        #[serde(default)]
        hyper: Option<LogisticHyper>,
    },
    /// Labels produced elsewhere (e.g. by a language model), keyed by row id.
    External { predictions: BTreeMap<String, String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: ModelKind,
    pub test_fraction: f64,
    pub folds: usize,
    pub seed: u64,
    pub importances: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            model: ModelKind::Forest { grid: None },
            test_fraction: 0.2,
            folds: 5,
            seed: crate::rng::DEFAULT_SEED,
            importances: true,
        }
    }
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self.model {
            ModelKind::Forest { .. } => "forest",
            ModelKind::Logistic { .. } => "logistic",
            ModelKind::External { .. } => "external",
        }
    }
}

/// Stratified train/test indices: within each class a seeded shuffle puts
/// `round(n_class * test_fraction)` rows in the test split.
pub fn train_test_split(labels: &[usize], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = rng_from_seed(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for idx in by_class.values_mut() {
        idx.shuffle(&mut rng);
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Train and test halves of one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub key: String,
    pub seed: u64,
    pub train: Dataset,
    pub test: Dataset,
}

/// Seeded stratified train/test partition of every split. The seed of a
/// split depends only on the root seed and its key.
pub fn plan_splits(datasets: &[SplitDataset], test_fraction: f64, seed: u64) -> Vec<Result<SplitPlan>> {
    datasets
        .iter()
        .map(|split| {
            let data = &split.dataset;
            let seed = derive_seed_str(seed, &split.key);
            let (train_idx, test_idx) = train_test_split(&data.labels(), test_fraction, seed);
            if test_idx.is_empty() || train_idx.is_empty() {
                return Err(Error::EmptySample(format!(
                    "split {} leaves an empty train or test set",
                    split.key
                )));
            }
            Ok(SplitPlan {
                key: split.key.clone(),
                seed,
                train: data.subset(&train_idx),
                test: data.subset(&test_idx),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Forest(ForestModel),
    Logistic(LinearModel),
}

impl TrainedModel {
    pub fn predict(&self, data: &Dataset) -> Result<Vec<usize>> {
        match self {
            TrainedModel::Forest(m) => predict_forest_all(m, data),
            TrainedModel::Logistic(m) => data.rows.iter().map(|r| m.predict(&r.features)).collect(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string(self).expect("model serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        crate::corpus::parse_json_record(&text, path, 1)
    }
}

/// Fit the configured model on the train half. Returns notes from the
/// grid search (fallbacks, unstratified folds).
pub fn fit_split(plan: &SplitPlan, cfg: &ModelConfig) -> Result<(TrainedModel, Vec<String>)> {
    let mut notes = Vec::new();
    let model = match &cfg.model {
        ModelKind::Forest { grid } => {
            let hyper = match grid {
                Some(g) => match cross_validate_grid(&plan.train, g, cfg.folds, plan.seed) {
                    Ok(r) => {
                        notes.extend(r.warnings);
                        r.best
                    }
                    Err(e) => {
                        notes.push(format!("grid search skipped: {e}"));
                        ForestHyper::default()
                    }
                },
                None => ForestHyper::default(),
            };
            TrainedModel::Forest(train_forest(&plan.train, ForestHyper { seed: plan.seed, ..hyper })?)
        }
        ModelKind::Logistic { hyper } => {
            let h = LogisticHyper {
                seed: plan.seed,
                ..hyper.unwrap_or_default()
            };
            TrainedModel::Logistic(train_logistic(&plan.train, h)?)
        }
        ModelKind::External { .. } => {
            return Err(Error::Config("external predictions are scored, not trained".into()))
        }
    };
    Ok((model, notes))
}

/// Predict the test half and compare with the majority baseline.
pub fn score_split(plan: &SplitPlan, model: &TrainedModel, importances: bool) -> Result<EvalReport> {
    let pred = model.predict(&plan.test)?;
    let mut report = evaluate(
        &pred,
        &plan.test.labels(),
        &plan.test.classes,
        plan.train.rows.len(),
        plan.key.clone(),
    )?;
    if importances {
        if let TrainedModel::Forest(f) = model {
            report.importances = Some(feature_importance(f, &plan.test, ImportanceMode::Impurity, plan.seed)?);
        }
    }
    Ok(report)
}

/// Score labels produced outside this tool against the test half.
pub fn score_external(plan: &SplitPlan, predictions: &BTreeMap<String, String>) -> Result<EvalReport> {
    let classes = &plan.test.classes;
    let pred = plan
        .test
        .rows
        .iter()
        .map(|r| {
            let label = predictions
                .get(&r.id)
                .ok_or_else(|| Error::InvalidInput(format!("no external prediction for {}", r.id)))?;
            classes.iter().position(|c| c.eq_ignore_ascii_case(label.trim())).ok_or_else(|| {
                Error::InvalidInput(format!("prediction `{label}` for {} is not a class", r.id))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    evaluate(&pred, &plan.test.labels(), classes, plan.train.rows.len(), plan.key.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub key: String,
    pub model: String,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
    pub notes: Vec<String>,
}

impl SplitOutcome {
    pub fn from_result(key: &str, model: &str, r: Result<(EvalReport, Vec<String>)>) -> Self {
        match r {
            Ok((report, notes)) => SplitOutcome {
                key: key.into(),
                model: model.into(),
                report: Some(report),
                error: None,
                notes,
            },
            Err(e) => SplitOutcome {
                key: key.into(),
                model: model.into(),
                report: None,
                error: Some(e.to_string()),
                notes: Vec::new(),
            },
        }
    }
}

/// Plan, fit and score every split. Splits run in parallel; output
/// follows input order. A failing split is recorded and the run continues.
pub fn run_experiment(datasets: &[SplitDataset], cfg: &ModelConfig) -> Vec<SplitOutcome> {
    let plans = plan_splits(datasets, cfg.test_fraction, cfg.seed);
    datasets
        .par_iter()
        .zip(plans.into_par_iter())
        .map(|(split, plan)| {
            let result = plan.and_then(|plan| match &cfg.model {
                ModelKind::External { predictions } => Ok((score_external(&plan, predictions)?, Vec::new())),
                _ => {
                    let (model, notes) = fit_split(&plan, cfg)?;
                    Ok((score_split(&plan, &model, cfg.importances)?, notes))
                }
            });
            SplitOutcome::from_result(&split.key, cfg.name(), result)
        })
        .collect()
}

/// Predictions file: comma-separated with `id` and `label` columns.
pub fn read_predictions(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    let headers = r
        .headers()
        .map_err(|e| Error::record(path, 1, "<header>", e.to_string()))?
        .clone();
    let col = |n: &str| headers.iter().position(|h| h.trim() == n);
    let id = col("id").ok_or_else(|| Error::record(path, 1, "id", "missing column"))?;
    let label = col("label").ok_or_else(|| Error::record(path, 1, "label", "missing column"))?;
    let mut out = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::record(path, i + 2, "<row>", e.to_string()))?;
        let key = rec[id].trim().to_string();
        if out.insert(key.clone(), rec[label].trim().to_string()).is_some() {
            return Err(Error::record(path, i + 2, "id", format!("duplicate id `{key}`")));
        }
    }
    Ok(out)
}

/// Feature rows for group comparisons: the question and the answer of
/// each exchange, both grouped by the questioner's party and standing.
pub fn grouped_features(exchanges: &[ExchangeRow], matrix: &[FeatureRow]) -> Result<Vec<GroupedFeatures>> {
    let by_id: BTreeMap<&str, &FeatureRow> =
        matrix.iter().map(|r| (r.utterance_id.as_str(), r)).collect();
    let lookup = |id: &str| -> Result<FeatureVector> {
        by_id
            .get(id)
            .map(|r| r.features.clone())
            .ok_or_else(|| Error::InvalidInput(format!("no feature row for utterance {id}")))
    };
    let mut out = Vec::with_capacity(2 * exchanges.len());
    for e in exchanges {
        for (kind, id) in [(QaClass::Question, &e.question_id), (QaClass::Answer, &e.answer_id)] {
            out.push(GroupedFeatures {
                party: e.party,
                standing: e.standing,
                kind,
                features: lookup(id)?,
            });
        }
    }
    Ok(out)
}

/// Two-decimal display of a share, e.g. `0.8714 -> "0.87"`.
pub fn display_share(x: f64) -> String {
    format!("{x:.2}")
}

/// Two-decimal percentage, e.g. `0.5172 -> "51.72"`.
pub fn display_percent(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io {
        path: "<table output>".into(),
        source: std::io::Error::other(e.to_string()),
    }
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io("<table output>", e))
}

/// Question/answer identification table: one column per session plus any
/// pooled column, rows for the four counts, the full-precision accuracy
/// and its two-decimal display.
pub fn emit_qa_table(columns: &[(String, QaConfusion)], out: impl Write) -> Result<()> {
    let mut w = csv_writer(out);
    let mut header = vec!["row".to_string()];
    header.extend(columns.iter().map(|(c, _)| c.clone()));
    w.write_record(&header).map_err(csv_err)?;
    if columns.is_empty() {
        return finish(w);
    }
    let rows: [(&str, fn(&QaConfusion) -> String); 6] = [
        ("questions_true", |c| c.q_true.to_string()),
        ("questions_false", |c| c.q_false.to_string()),
        ("answers_true", |c| c.a_true.to_string()),
        ("answers_false", |c| c.a_false.to_string()),
        ("accuracy", |c| format!("{}", c.accuracy())),
        ("accuracy_display", |c| display_share(c.accuracy())),
    ];
    for (name, f) in rows {
        let mut rec = vec![name.to_string()];
        rec.extend(columns.iter().map(|(_, c)| f(c)));
        w.write_record(&rec).map_err(csv_err)?;
    }
    finish(w)
}

/// Segmentation verification table: per-session and total counts with the
/// share of correct utterances.
pub fn emit_verification_table(summary: &VerificationSummary, out: impl Write) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record([
        "session",
        "verified",
        "incorrect",
        "clubbed",
        "broken",
        "correct_rate",
        "correct_percent_display",
    ])
    .map_err(csv_err)?;
    let rows = summary
        .per_session
        .iter()
        .map(|(s, t)| (s.to_string(), t))
        .chain(std::iter::once(("total".to_string(), &summary.total)));
    for (label, t) in rows {
        w.write_record([
            label,
            t.verified.to_string(),
            t.incorrect.to_string(),
            t.clubbed.to_string(),
            t.broken.to_string(),
            format!("{}", t.correct_rate()),
            display_percent(t.correct_rate()),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableLayout {
    /// Accuracy vs. baseline per split.
    SplitAccuracy,
    /// Confusion counts per split.
    Confusion,
    /// Feature importances per split.
    FeatureImportance,
}

impl TableLayout {
    pub const ALL: [TableLayout; 3] = [
        TableLayout::SplitAccuracy,
        TableLayout::Confusion,
        TableLayout::FeatureImportance,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            TableLayout::SplitAccuracy => "split_accuracy.csv",
            TableLayout::Confusion => "confusion.csv",
            TableLayout::FeatureImportance => "feature_importance.csv",
        }
    }
}

/// Write one layout. Rows follow split-key order, then class or feature
/// order; numbers are written at full precision with display columns
/// alongside.
pub fn emit_table(outcomes: &[SplitOutcome], layout: TableLayout, out: impl Write) -> Result<()> {
    let mut sorted: Vec<&SplitOutcome> = outcomes.iter().collect();
    sorted.sort_by(|a, b| (&a.key, &a.model).cmp(&(&b.key, &b.model)));
    let mut w = csv_writer(out);
    match layout {
        TableLayout::SplitAccuracy => {
            w.write_record([
                "split",
                "model",
                "accuracy",
                "accuracy_display",
                "baseline",
                "baseline_class",
                "baseline_display",
                "beats_baseline",
                "degenerate",
                "n_train",
                "n_test",
                "error",
            ])
            .map_err(csv_err)?;
            for o in sorted {
                let rec = match &o.report {
                    Some(r) => vec![
                        o.key.clone(),
                        o.model.clone(),
                        format!("{}", r.accuracy),
                        display_percent(r.accuracy),
                        format!("{}", r.baseline_accuracy),
                        r.baseline_class.clone(),
                        format!("{}({})", display_percent(r.baseline_accuracy), r.baseline_class),
                        r.beats_baseline.to_string(),
                        r.degenerate.to_string(),
                        r.n_train.to_string(),
                        r.n_test.to_string(),
                        String::new(),
                    ],
                    None => {
                        let mut v = vec![o.key.clone(), o.model.clone()];
                        v.extend(std::iter::repeat_n(String::new(), 9));
                        v.push(o.error.clone().unwrap_or_default());
                        v
                    }
                };
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
        TableLayout::Confusion => {
            w.write_record(["split", "model", "true_class", "predicted_class", "count"])
                .map_err(csv_err)?;
            for o in sorted {
                let Some(r) = &o.report else { continue };
                for (t, row) in r.confusion.iter().enumerate() {
                    for (p, n) in row.iter().enumerate() {
                        w.write_record([
                            o.key.as_str(),
                            o.model.as_str(),
                            &r.classes[t],
                            &r.classes[p],
                            &n.to_string(),
                        ])
                        .map_err(csv_err)?;
                    }
                }
            }
        }
        TableLayout::FeatureImportance => {
            w.write_record(["split", "model", "feature", "importance"])
                .map_err(csv_err)?;
            for o in sorted {
                let Some(imp) = o.report.as_ref().and_then(|r| r.importances.as_ref()) else {
                    continue;
                };
                let mut ranked: Vec<(&String, &f64)> = imp.iter().collect();
                ranked.sort_by(|a, b| b.1.total_cmp(a.1).then(a.0.cmp(b.0)));
                for (f, v) in ranked {
                    w.write_record([o.key.as_str(), o.model.as_str(), f, &format!("{v}")])
                        .map_err(csv_err)?;
                }
            }
        }
    }
    finish(w)
}

/// Accuracy recomputed from a report's confusion matrix.
pub fn confusion_accuracy(r: &EvalReport) -> f64 {
    let total: usize = r.confusion.iter().flatten().sum();
    let diag: usize = (0..r.confusion.len()).map(|i| r.confusion[i][i]).sum();
    diag as f64 / total as f64
}

/// Majority share recomputed from a report's confusion matrix rows.
pub fn confusion_baseline(r: &EvalReport) -> f64 {
    let total: usize = r.confusion.iter().flatten().sum();
    let max = r
        .confusion
        .iter()
        .map(|row| row.iter().sum::<usize>())
        .max()
        .unwrap_or(0);
    max as f64 / total as f64
}

pub const PROMPT_TEMPLATE: &str = "What follows is a {type_text} in a congressional hearing: {utterance_text} The question was asked by a person who is a member of a congressional committee, and whose party affiliation is either Democrat, Independent, or Republican. Based on the {type_text_2} above, what is the party affiliation of the person who asked the question? Answer with either D for Democrat, I for Independent, or R for Republican. Do not explain.";

pub fn type_text(kind: UtteranceKind) -> &'static str {
    match kind {
        UtteranceKind::Question => "question that has been asked",
        UtteranceKind::Answer => "response to a question asked",
        UtteranceKind::Both => "question and its answer",
    }
}

pub fn type_text_2(kind: UtteranceKind) -> &'static str {
    match kind {
        UtteranceKind::Question => "question",
        UtteranceKind::Answer => "answer",
        UtteranceKind::Both => "question and answer",
    }
}

/// Zero-shot party prompt for an utterance of `kind`.
pub fn render_prompt(kind: UtteranceKind, question: Option<&str>, answer: Option<&str>) -> Result<String> {
    let need = |t: Option<&str>, what: &str| -> Result<String> {
        match t.map(str::trim) {
            Some(s) if !s.is_empty() => Ok(s.to_string()),
            _ => Err(Error::InvalidInput(format!(
                "{what} text is required for a {kind:?} prompt"
            ))),
        }
    };
    let utterance_text = match kind {
        UtteranceKind::Question => format!("Question: {}", need(question, "question")?),
        UtteranceKind::Answer => format!("Answer: {}", need(answer, "answer")?),
        UtteranceKind::Both => format!(
            "Question: {} Answer: {}",
            need(question, "question")?,
            need(answer, "answer")?
        ),
    };
    Ok(PROMPT_TEMPLATE
        .replace("{type_text}", type_text(kind))
        .replace("{type_text_2}", type_text_2(kind))
        .replace("{utterance_text}", &utterance_text))
}

impl fmt::Display for UtteranceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UtteranceKind::Question => "question",
            UtteranceKind::Answer => "answer",
            UtteranceKind::Both => "both",
        })
    }
}

/// Experiment settings as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Corpus store root; the command line may override it.
    #[serde(default)]
    pub corpus: Option<std::path::PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub split: SplitSpec,
    #[serde(default = "default_feature_set")]
    pub features: FeatureSet,
    #[serde(default = "default_model")]
    pub model: ModelKind,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_true")]
    pub importances: bool,
}

fn default_feature_set() -> FeatureSet {
    FeatureSet::Linguistic
}
fn default_model() -> ModelKind {
    ModelKind::Forest { grid: None }
}
fn default_test_fraction() -> f64 {
    0.2
}
fn default_folds() -> usize {
    5
}
fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    /// `seed` applies when the file names none.
    pub fn model_config(&self, seed: u64) -> ModelConfig {
        ModelConfig {
            model: self.model.clone(),
            test_fraction: self.test_fraction,
            folds: self.folds,
            seed: self.seed.unwrap_or(seed),
            importances: self.importances,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if matches!(self.model, ModelKind::Forest { grid: Some(_) }) {
            self.split.validate(self.folds)?;
        }
        Ok(())
    }
}

/// Class index of an exchange under `task`, `None` when unlabeled.
pub fn label_index(task: LabelTask, row: &ExchangeRow) -> Option<usize> {
    label_of(task, row)
}
