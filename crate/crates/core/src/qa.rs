//! Question / answer labeling of utterances and question-answer pairing.
//!
//! The classifier is L2-regularized logistic regression over lexical
//! features (unigrams, bigrams and three structural cues), trained on
//! labeled question/answer text from Reddit AMA threads, U.K. Parliament
//! written questions or hand-labeled hearing utterances.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{QaLabel, QaPair, Role, Roster, Utterance};
use crate::error::{Error, Result};
use crate::logit::{self, BinaryProblem, GdConfig, SparseRow};
use crate::text::{collapse_ws, word_tokens};

pub const MODEL_FORMAT: &str = "hearingkit-qa-lexical/1";
pub const MAX_BIGRAMS: usize = 50_000;

const INTERROGATIVES: &[&str] = &[
    "what", "why", "how", "when", "where", "who", "whom", "whose", "which", "is", "are", "am",
    "was", "were", "do", "does", "did", "can", "could", "would", "will", "should", "shall",
    "may", "might", "must", "have", "has", "had", "isn't", "aren't", "don't", "doesn't",
    "didn't", "can't", "won't", "wouldn't", "shouldn't", "couldn't",
];

/// Declaration order puts Question first, which is also the tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QaClass {
    Question,
    Answer,
}

impl QaClass {
    pub fn as_label(self) -> QaLabel {
        match self {
            QaClass::Question => QaLabel::Question,
            QaClass::Answer => QaLabel::Answer,
        }
    }
}

impl FromStr for QaClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "q" | "question" => Ok(QaClass::Question),
            "a" | "answer" => Ok(QaClass::Answer),
            other => Err(format!("unknown label `{other}` (expected question or answer)")),
        }
    }
}

impl fmt::Display for QaClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QaClass::Question => "question",
            QaClass::Answer => "answer",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "ama")]
    Ama,
    #[serde(rename = "ukparl")]
    UkParl,
    #[serde(rename = "hand")]
    HandLabeled,
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ama" => Ok(Source::Ama),
            "ukparl" | "uk-parl" | "uk_parl" => Ok(Source::UkParl),
            "hand" | "handlabeled" | "hand-labeled" | "hand_labeled" => Ok(Source::HandLabeled),
            other => Err(format!("unknown source `{other}` (expected ama, ukparl or hand)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledText {
    pub text: String,
    pub label: QaClass,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TrainingCorpus {
    pub examples: Vec<LabeledText>,
    pub rows_read: usize,
    pub duplicates_removed: usize,
}

impl TrainingCorpus {
    pub fn count(&self, label: QaClass) -> usize {
        self.examples.iter().filter(|e| e.label == label).count()
    }
}

/// Load a labeled training file. All formats share one comma-separated
/// layout with a header row and `text` and `label` columns; an optional
/// `source` column must agree with `format`, and any other columns (post
/// ids, question UINs, ...) are ignored. Labels are `question`/`answer`
/// (or `q`/`a`). Exact duplicate (text, label) rows are dropped and counted.
pub fn load_training_corpus(path: &Path, format: Source) -> Result<TrainingCorpus> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::record(path, 1, "<header>", e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let text_col = col("text").ok_or_else(|| Error::record(path, 1, "text", "missing column"))?;
    let label_col =
        col("label").ok_or_else(|| Error::record(path, 1, "label", "missing column"))?;
    let source_col = col("source");

    let mut corpus = TrainingCorpus::default();
    let mut seen = HashSet::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(line, |p| p.line() as usize);
            Error::record(path, line, "<row>", e.to_string())
        })?;
        corpus.rows_read += 1;
        let text = collapse_ws(rec.get(text_col).unwrap_or(""));
        if text.is_empty() {
            return Err(Error::record(path, line, "text", "empty text"));
        }
        let label: QaClass = rec
            .get(label_col)
            .unwrap_or("")
            .parse()
            .map_err(|m: String| Error::record(path, line, "label", m))?;
        if let Some(c) = source_col {
            let raw = rec.get(c).unwrap_or("").trim();
            if !raw.is_empty() {
                let s: Source = raw
                    .parse()
                    .map_err(|m: String| Error::record(path, line, "source", m))?;
                if s != format {
                    return Err(Error::record(
                        path,
                        line,
                        "source",
                        format!("row is tagged {s:?} but the file was loaded as {format:?}"),
                    ));
                }
            }
        }
        if !seen.insert((text.clone(), label)) {
            corpus.duplicates_removed += 1;
            continue;
        }
        corpus.examples.push(LabeledText {
            text,
            label,
            source: format,
        });
    }
    Ok(corpus)
}

/// Sparse named feature counts.
pub type TextFeatures = BTreeMap<String, f64>;

fn length_bucket(n: usize) -> &'static str {
    match n {
        0..=3 => "1-3",
        4..=10 => "4-10",
        11..=30 => "11-30",
        31..=100 => "31-100",
        _ => "100+",
    }
}

/// Lowercased unigram (`u:`) and bigram (`b:`) counts plus structural
/// flags: `s:qmark` (text ends in `?`), `s:interrogative` (first token is
/// an interrogative or auxiliary) and a one-hot `s:len=` token-count
/// bucket. Empty text gives an empty map.
pub fn featurize_text(text: &str) -> TextFeatures {
    let tokens = word_tokens(text);
    let mut f = TextFeatures::new();
    if tokens.is_empty() && !text.contains('?') {
        return f;
    }
    for t in &tokens {
        *f.entry(format!("u:{t}")).or_insert(0.0) += 1.0;
    }
    for w in tokens.windows(2) {
        *f.entry(format!("b:{} {}", w[0], w[1])).or_insert(0.0) += 1.0;
    }
    if text.trim_end().ends_with('?') {
        f.insert("s:qmark".into(), 1.0);
    }
    if tokens
        .first()
        .is_some_and(|t| INTERROGATIVES.contains(&t.as_str()))
    {
        f.insert("s:interrogative".into(), 1.0);
    }
    if !tokens.is_empty() {
        f.insert(format!("s:len={}", length_bucket(tokens.len())), 1.0);
    }
    f
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QaHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for QaHyper {
    fn default() -> Self {
        QaHyper {
            learning_rate: 1.0,
            epochs: 400,
            l2: 1e-4,
            seed: crate::rng::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub n_examples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexicalModel {
    pub format: String,
    pub vocabulary: BTreeMap<String, usize>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub training_meta: TrainingMeta,
}

impl LexicalModel {
    /// A model with all-zero weights over `vocabulary`.
    pub fn zeros(vocabulary: BTreeMap<String, usize>) -> Self {
        let n = vocabulary.len();
        LexicalModel {
            format: MODEL_FORMAT.into(),
            vocabulary,
            weights: vec![0.0; n],
            bias: 0.0,
            training_meta: TrainingMeta {
                seed: 0,
                epochs: 0,
                learning_rate: 0.0,
                l2: 0.0,
                n_examples: 0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Config(format!(
                "unsupported model format `{}` (expected {MODEL_FORMAT})",
                self.format
            )));
        }
        if self.weights.len() != self.vocabulary.len() {
            return Err(Error::Config(format!(
                "model has {} weights for {} vocabulary entries",
                self.weights.len(),
                self.vocabulary.len()
            )));
        }
        if self.vocabulary.values().any(|&i| i >= self.weights.len()) {
            return Err(Error::Config("vocabulary index out of range".into()));
        }
        if !self.bias.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Config("model holds non-finite weights".into()));
        }
        Ok(())
    }

    /// Unit-normalized sparse row over this model's vocabulary.
    pub fn vectorize(&self, text: &str) -> SparseRow {
        vectorize_with(&self.vocabulary, &featurize_text(text))
    }

    /// P(Question | text).
    pub fn probability(&self, text: &str) -> f64 {
        logit::sigmoid(logit::dot(&self.weights, &self.vectorize(text)) + self.bias)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: LexicalModel = crate::corpus::parse_json_record(&text, path, 1)?;
        model.validate()?;
        Ok(model)
    }
}

fn vectorize_with(vocab: &BTreeMap<String, usize>, feats: &TextFeatures) -> SparseRow {
    let mut row: SparseRow = feats
        .iter()
        .filter_map(|(k, v)| vocab.get(k).map(|&i| (i, *v)))
        .collect();
    let norm = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, v) in &mut row {
            *v /= norm;
        }
    }
    row.sort_unstable_by_key(|(i, _)| *i);
    row
}

/// Vocabulary: every unigram and structural feature in the corpus plus the
/// most frequent bigrams (ties broken lexicographically), capped at
/// [`MAX_BIGRAMS`].
pub fn build_vocabulary(featurized: &[TextFeatures]) -> BTreeMap<String, usize> {
    let mut unigrams = std::collections::BTreeSet::new();
    let mut bigrams: HashMap<&str, f64> = HashMap::new();
    for f in featurized {
        for (k, v) in f {
            if k.starts_with("b:") {
                *bigrams.entry(k.as_str()).or_insert(0.0) += v;
            } else {
                unigrams.insert(k.clone());
            }
        }
    }
    let mut ranked: Vec<(&str, f64)> = bigrams.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.truncate(MAX_BIGRAMS);
    let mut names: Vec<String> = unigrams.into_iter().collect();
    names.extend(ranked.into_iter().map(|(k, _)| k.to_string()));
    names.sort();
    names.into_iter().enumerate().map(|(i, k)| (k, i)).collect()
}

/// Rows and 0/1 targets (Question = 1) of `corpus` over `vocab`.
pub fn design_matrix(
    vocab: &BTreeMap<String, usize>,
    corpus: &[LabeledText],
) -> (Vec<SparseRow>, Vec<f64>) {
    corpus
        .iter()
        .map(|e| {
            (
                vectorize_with(vocab, &featurize_text(&e.text)),
                if e.label == QaClass::Question { 1.0 } else { 0.0 },
            )
        })
        .unzip()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaTraining {
    pub model: LexicalModel,
    /// Training objective before the first epoch and after each epoch.
    pub loss_history: Vec<f64>,
    /// Learning rates at or below this keep the objective non-increasing.
    pub stable_learning_rate: f64,
}

pub fn train_qa(corpus: &[LabeledText], hyper: QaHyper) -> Result<QaTraining> {
    let labels: HashSet<QaClass> = corpus.iter().map(|e| e.label).collect();
    if labels.len() < 2 {
        return Err(Error::SingleClass(format!(
            "{} example(s), labels {:?}",
            corpus.len(),
            labels
        )));
    }
    let featurized: Vec<TextFeatures> = corpus.iter().map(|e| featurize_text(&e.text)).collect();
    let vocab = build_vocabulary(&featurized);
    let (rows, targets): (Vec<SparseRow>, Vec<f64>) = featurized
        .iter()
        .zip(corpus)
        .map(|(f, e)| {
            (
                vectorize_with(&vocab, f),
                if e.label == QaClass::Question { 1.0 } else { 0.0 },
            )
        })
        .unzip();
    let problem = BinaryProblem {
        rows: &rows,
        targets: &targets,
        dim: vocab.len(),
        l2: hyper.l2,
    };
    let out = logit::gradient_descent(
        &problem,
        logit::initial_weights(vocab.len(), hyper.seed),
        0.0,
        GdConfig {
            learning_rate: hyper.learning_rate,
            max_epochs: hyper.epochs,
            tol: 0.0,
        },
    );
    let model = LexicalModel {
        format: MODEL_FORMAT.into(),
        vocabulary: vocab,
        weights: out.weights,
        bias: out.bias,
        training_meta: TrainingMeta {
            seed: hyper.seed,
            epochs: out.epochs_run,
            learning_rate: hyper.learning_rate,
            l2: hyper.l2,
            n_examples: corpus.len(),
        },
    };
    model.validate()?;
    Ok(QaTraining {
        model,
        loss_history: out.loss_history,
        stable_learning_rate: problem.stable_learning_rate(),
    })
}

/// Label and winning-class probability. A probability of exactly 0.5
/// counts as Question.
pub fn classify_qa(model: &LexicalModel, text: &str) -> (QaClass, f64) {
    let p = model.probability(text);
    if p >= 0.5 {
        (QaClass::Question, p)
    } else {
        (QaClass::Answer, 1.0 - p)
    }
}

/// Like [`classify_qa`] but returns `Other` when the winning probability
/// is below `min_confidence`. The threshold is uncalibrated.
pub fn classify_with_threshold(model: &LexicalModel, text: &str, min_confidence: f64) -> QaLabel {
    let (label, conf) = classify_qa(model, text);
    if conf < min_confidence {
        QaLabel::Other
    } else {
        label.as_label()
    }
}

/// Binary Q/A confusion counts in the row layout of a question/answer
/// evaluation table: `q_true` predicted Question and was one, `q_false`
/// predicted Question but was an Answer, and likewise for answers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaConfusion {
    pub q_true: usize,
    pub q_false: usize,
    pub a_true: usize,
    pub a_false: usize,
}

impl QaConfusion {
    pub fn total(&self) -> usize {
        self.q_true + self.q_false + self.a_true + self.a_false
    }

    pub fn correct(&self) -> usize {
        self.q_true + self.a_true
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        self.correct() as f64 / self.total() as f64
    }

    pub fn merge(&self, other: &QaConfusion) -> QaConfusion {
        QaConfusion {
            q_true: self.q_true + other.q_true,
            q_false: self.q_false + other.q_false,
            a_true: self.a_true + other.a_true,
            a_false: self.a_false + other.a_false,
        }
    }
}

pub fn score_confusion(predictions: &[QaClass], truths: &[QaClass]) -> Result<QaConfusion> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: truths.len(),
        });
    }
    let mut c = QaConfusion::default();
    for (p, t) in predictions.iter().zip(truths) {
        match (p, t) {
            (QaClass::Question, QaClass::Question) => c.q_true += 1,
            (QaClass::Question, QaClass::Answer) => c.q_false += 1,
            (QaClass::Answer, QaClass::Answer) => c.a_true += 1,
            (QaClass::Answer, QaClass::Question) => c.a_false += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingOutcome {
    pub pairs: Vec<QaPair>,
    /// Member questions superseded by a later member question or left
    /// open at the end of the hearing.
    pub unpaired_questions: Vec<String>,
    /// Witness answers with no open member question.
    pub orphan_answers: Vec<String>,
}

/// Pair each member question with the next witness answer that arrives
/// before another member question. Member answers, witness questions and
/// unlabeled or unknown-speaker utterances are skipped.
pub fn pair_qa(utterances: &[Utterance], roster: &Roster) -> PairingOutcome {
    let mut ordered: Vec<&Utterance> = utterances.iter().collect();
    ordered.sort_by_key(|u| u.sequence_no);
    let mut out = PairingOutcome::default();
    let mut open: Option<(&Utterance, &str)> = None;
    for u in ordered {
        let Some(speaker) = u.speaker.as_deref() else {
            continue;
        };
        let role = roster.role_of(speaker);
        match (u.qa_label, role) {
            (QaLabel::Question, Role::Member) => {
                if let Some((q, _)) = open.replace((u, speaker)) {
                    out.unpaired_questions.push(q.utterance_id.clone());
                }
            }
            (QaLabel::Answer, Role::Witness) => match open.take() {
                Some((q, questioner)) => out.pairs.push(QaPair {
                    pair_id: format!("{}-qa{:05}", u.hearing_id, out.pairs.len()),
                    question_utterance_id: q.utterance_id.clone(),
                    answer_utterance_id: u.utterance_id.clone(),
                    questioner: questioner.to_string(),
                    answerer: speaker.to_string(),
                }),
                None => out.orphan_answers.push(u.utterance_id.clone()),
            },
            _ => {}
        }
    }
    if let Some((q, _)) = open {
        out.unpaired_questions.push(q.utterance_id.clone());
    }
    out
}
