//! Party affiliation / standing classifiers: name removal, a CART random
//! forest, one-vs-rest logistic regression, majority baselines, stratified
//! cross-validation with grid search, and feature importance.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{Chamber, HearingType, Party};
use crate::error::{Error, Result};
use crate::logit::{self, BinaryProblem, GdConfig, SparseRow};
use crate::rng::{derive_seed, rng_from_seed};

pub const NAME_PLACEHOLDER: &str = "⟨NAME⟩";
pub const FOREST_FORMAT: &str = "hearingkit-forest/1";
pub const LINEAR_FORMAT: &str = "hearingkit-linear/1";

/// Replaces roster and directory names with [`NAME_PLACEHOLDER`].
#[derive(Debug, Clone)]
pub struct NameStripper {
    re: Option<Regex>,
}

impl NameStripper {
    /// `names` are full names and surnames; matching is case-insensitive
    /// on word boundaries, longest name first.
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut uniq: BTreeSet<String> = BTreeSet::new();
        for n in names {
            let n = n.as_ref().split_whitespace().collect::<Vec<_>>().join(" ");
            if n.chars().any(char::is_alphanumeric) {
                uniq.insert(n.to_lowercase());
            }
        }
        let mut list: Vec<String> = uniq.into_iter().collect();
        list.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        if list.is_empty() {
            return NameStripper { re: None };
        }
        let alts: Vec<String> = list
            .iter()
            .map(|n| {
                n.split(' ')
                    .map(regex::escape)
                    .collect::<Vec<_>>()
                    .join(r"\s+")
            })
            .collect();
        let re = Regex::new(&format!(r"(?i)\b(?:{})\b", alts.join("|"))).expect("escaped names");
        NameStripper { re: Some(re) }
    }

    pub fn strip(&self, text: &str) -> String {
        match &self.re {
            Some(re) => re.replace_all(text, NAME_PLACEHOLDER).into_owned(),
            None => text.to_string(),
        }
    }
}

/// Convenience wrapper over [`NameStripper`].
pub fn strip_speaker_names(text: &str, names: &[String]) -> String {
    NameStripper::new(names).strip(text)
}

/// Most frequent label and its share. Ties go to the smallest label.
pub fn majority_baseline<T: Ord + Copy>(labels: &[T]) -> Option<(T, f64)> {
    let mut counts: BTreeMap<T, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    let mut best: Option<(T, usize)> = None;
    for (l, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((l, c));
        }
    }
    best.map(|(l, c)| (l, c as f64 / labels.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LabelTask {
    Affiliation,
    Standing,
}

impl LabelTask {
    /// Class names in tie-break order.
    pub fn classes(self) -> Vec<String> {
        match self {
            LabelTask::Affiliation => vec!["D".into(), "R".into(), "I".into()],
            LabelTask::Standing => vec!["M".into(), "m".into()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Government {
    Unified,
    Divided,
}

/// Attributes rows are partitioned by.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupKeys {
    pub session: u32,
    pub committee: String,
    pub hearing_type: HearingType,
    pub government: Government,
    pub chamber: Chamber,
    pub presidency: Party,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRow {
    pub id: String,
    pub features: Vec<Option<f64>>,
    /// Index into [`Dataset::classes`].
    pub label: usize,
    pub keys: GroupKeys,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub task: LabelTask,
    pub schema_version: String,
    pub feature_names: Vec<String>,
    pub classes: Vec<String>,
    pub rows: Vec<DataRow>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        let d = self.feature_names.len();
        for r in &self.rows {
            if r.features.len() != d {
                return Err(Error::Invariant {
                    id: "dataset.schema".into(),
                    message: format!("row {} has {} features, schema has {d}", r.id, r.features.len()),
                });
            }
            if r.label >= self.classes.len() {
                return Err(Error::Invariant {
                    id: "dataset.label".into(),
                    message: format!("row {} has label index {}", r.id, r.label),
                });
            }
            if r.features.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Invariant {
                    id: "dataset.finite".into(),
                    message: format!("row {} holds a non-finite feature", r.id),
                });
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            ..self.empty_like()
        }
    }

    pub fn empty_like(&self) -> Dataset {
        Dataset {
            task: self.task,
            schema_version: self.schema_version.clone(),
            feature_names: self.feature_names.clone(),
            classes: self.classes.clone(),
            rows: Vec::new(),
        }
    }

    pub fn n_classes_present(&self) -> usize {
        self.rows.iter().map(|r| r.label).collect::<BTreeSet<_>>().len()
    }
}

/// Train-split medians used to fill null features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    pub medians: Vec<f64>,
}

impl Imputer {
    pub fn fit(data: &Dataset) -> Imputer {
        let medians = (0..data.feature_names.len())
            .map(|j| {
                let mut col: Vec<f64> = data.rows.iter().filter_map(|r| r.features[j]).collect();
                if col.is_empty() {
                    return 0.0;
                }
                col.sort_by(f64::total_cmp);
                let m = col.len() / 2;
                if col.len() % 2 == 1 {
                    col[m]
                } else {
                    (col[m - 1] + col[m]) / 2.0
                }
            })
            .collect();
        Imputer { medians }
    }

    pub fn apply(&self, row: &[Option<f64>]) -> Result<Vec<f64>> {
        if row.len() != self.medians.len() {
            return Err(Error::LengthMismatch {
                left: row.len(),
                right: self.medians.len(),
            });
        }
        Ok(row
            .iter()
            .zip(&self.medians)
            .map(|(v, m)| v.unwrap_or(*m))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestHyper {
    pub n_estimators: usize,
    /// `None` grows trees until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features tried per split; `None` means `max(1, floor(√d))`.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestHyper {
    fn default() -> Self {
        ForestHyper {
            n_estimators: 100,
            max_depth: None,
            min_samples_split: 2,
            max_features: None,
            seed: crate::rng::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        distribution: Vec<f64>,
    },
}

/// A CART tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_distribution(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { distribution } => return distribution,
            }
        }
    }

    pub fn used_features(&self) -> BTreeSet<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format: String,
    pub trees: Vec<Tree>,
    pub hyper: ForestHyper,
    pub classes: Vec<String>,
    pub feature_names: Vec<String>,
    pub imputer: Imputer,
    /// Total weighted Gini decrease per feature, unnormalized.
    pub gini_decrease: Vec<f64>,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    k: usize,
    hyper: &'a ForestHyper,
    max_features: usize,
    nodes: Vec<Node>,
    decrease: Vec<f64>,
    n_total: f64,
}

impl Grower<'_> {
    fn leaf(&self, idx: &[usize]) -> Node {
        let mut d = vec![0.0; self.k];
        for &i in idx {
            d[self.y[i]] += 1.0;
        }
        let n = idx.len() as f64;
        for v in &mut d {
            *v /= n;
        }
        Node::Leaf { distribution: d }
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut impl Rng) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            distribution: Vec::new(),
        });
        let mut counts = vec![0usize; self.k];
        for &i in &idx {
            counts[self.y[i]] += 1;
        }
        let n = idx.len();
        let parent = gini(&counts, n);
        let stop = parent == 0.0
            || n < self.hyper.min_samples_split.max(2)
            || self.hyper.max_depth.is_some_and(|m| depth >= m);
        let best = if stop { None } else { self.best_split(&idx, &counts, parent, rng) };
        match best {
            None => {
                self.nodes[id] = self.leaf(&idx);
            }
            Some((feature, threshold, gain)) => {
                self.decrease[feature] += gain * n as f64 / self.n_total;
                let (l, r): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
                let left = self.grow(l, depth + 1, rng);
                let right = self.grow(r, depth + 1, rng);
                self.nodes[id] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
            }
        }
        id
    }

    /// Best (feature, threshold, impurity decrease) among a random subset of
    /// features. Earlier candidates win ties.
    fn best_split(
        &self,
        idx: &[usize],
        counts: &[usize],
        parent: f64,
        rng: &mut impl Rng,
    ) -> Option<(usize, f64, f64)> {
        let d = self.x[0].len();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(rng);
        features.truncate(self.max_features);
        let n = idx.len();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order: Vec<usize> = idx.to_vec();
        for &f in &features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left = vec![0usize; self.k];
            let mut right = counts.to_vec();
            for s in 0..n - 1 {
                let c = self.y[order[s]];
                left[c] += 1;
                right[c] -= 1;
                let (lo, hi) = (self.x[order[s]][f], self.x[order[s + 1]][f]);
                if lo == hi {
                    continue;
                }
                let nl = s + 1;
                let nr = n - nl;
                let child = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
                let gain = parent - child;
                if gain > 1e-12 && best.is_none_or(|(_, _, g)| gain > g) {
                    let mut t = lo + (hi - lo) / 2.0;
                    if t >= hi {
                        t = lo;
                    }
                    best = Some((f, t, gain));
                }
            }
        }
        best
    }
}

fn dense(data: &Dataset, imputer: &Imputer) -> Vec<Vec<f64>> {
    data.rows
        .iter()
        .map(|r| imputer.apply(&r.features).expect("validated dataset"))
        .collect()
}

pub fn train_forest(train: &Dataset, hyper: ForestHyper) -> Result<ForestModel> {
    train.validate()?;
    if train.n_classes_present() < 2 {
        return Err(Error::SingleClass(format!(
            "forest training data has {} row(s) of one class",
            train.rows.len()
        )));
    }
    if hyper.n_estimators == 0 {
        return Err(Error::Config("n_estimators must be at least 1".into()));
    }
    let d = train.feature_names.len();
    if d == 0 {
        return Err(Error::Config("dataset has no features".into()));
    }
    let imputer = Imputer::fit(train);
    let x = dense(train, &imputer);
    let y = train.labels();
    let k = train.classes.len();
    let max_features = hyper
        .max_features
        .unwrap_or_else(|| ((d as f64).sqrt().floor() as usize).max(1))
        .clamp(1, d);
    let n = x.len();
    let grown: Vec<(Tree, Vec<f64>)> = (0..hyper.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(hyper.seed, t as u64));
            let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut g = Grower {
                x: &x,
                y: &y,
                k,
                hyper: &hyper,
                max_features,
                nodes: Vec::new(),
                decrease: vec![0.0; d],
                n_total: n as f64,
            };
            g.grow(sample, 0, &mut rng);
            (Tree { nodes: g.nodes }, g.decrease)
        })
        .collect();
    let mut gini_decrease = vec![0.0; d];
    let mut trees = Vec::with_capacity(grown.len());
    for (tree, dec) in grown {
        for (a, b) in gini_decrease.iter_mut().zip(dec) {
            *a += b;
        }
        trees.push(tree);
    }
    Ok(ForestModel {
        format: FOREST_FORMAT.into(),
        trees,
        hyper,
        classes: train.classes.clone(),
        feature_names: train.feature_names.clone(),
        imputer,
        gini_decrease,
    })
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

impl ForestModel {
    pub fn predict_dense(&self, x: &[f64]) -> (usize, Vec<f64>) {
        let mut p = vec![0.0; self.classes.len()];
        for t in &self.trees {
            for (a, b) in p.iter_mut().zip(t.leaf_distribution(x)) {
                *a += b;
            }
        }
        let n = self.trees.len() as f64;
        for v in &mut p {
            *v /= n;
        }
        (argmax(&p), p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_json(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: ForestModel = load_json(path)?;
        if m.format != FOREST_FORMAT {
            return Err(Error::Config(format!("unsupported forest format `{}`", m.format)));
        }
        for t in &m.trees {
            for node in &t.nodes {
                if let Node::Split { threshold, .. } = node {
                    if !threshold.is_finite() {
                        return Err(Error::Config("forest holds a non-finite threshold".into()));
                    }
                }
            }
        }
        Ok(m)
    }
}

/// Label index and class probabilities (the mean of the trees' leaf
/// distributions). The label is the most probable class, ties to the
/// earlier class.
pub fn predict_forest(model: &ForestModel, row: &[Option<f64>]) -> Result<(usize, Vec<f64>)> {
    let x = model.imputer.apply(row)?;
    Ok(model.predict_dense(&x))
}

pub fn predict_forest_all(model: &ForestModel, data: &Dataset) -> Result<Vec<usize>> {
    data.rows
        .iter()
        .map(|r| predict_forest(model, &r.features).map(|(l, _)| l))
        .collect()
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImportanceMode {
    Impurity,
    Permutation,
}

pub const PERMUTATION_REPEATS: usize = 5;

/// Impurity mode: total Gini decrease per feature over all trees,
/// normalized to sum to 1 (all zeros when no tree split). Permutation mode:
/// mean accuracy drop on `validation` over five shuffles of each column.
pub fn feature_importance(
    model: &ForestModel,
    validation: &Dataset,
    mode: ImportanceMode,
    seed: u64,
) -> Result<BTreeMap<String, f64>> {
    let values: Vec<f64> = match mode {
        ImportanceMode::Impurity => {
            let total: f64 = model.gini_decrease.iter().sum();
            if total > 0.0 {
                model.gini_decrease.iter().map(|v| v / total).collect()
            } else {
                vec![0.0; model.gini_decrease.len()]
            }
        }
        ImportanceMode::Permutation => {
            if validation.rows.is_empty() {
                return Err(Error::EmptySample(
                    "permutation importance needs validation rows".into(),
                ));
            }
            let x: Vec<Vec<f64>> = validation
                .rows
                .iter()
                .map(|r| model.imputer.apply(&r.features))
                .collect::<Result<_>>()?;
            let y = validation.labels();
            let score = |x: &[Vec<f64>]| {
                let pred: Vec<usize> = x.iter().map(|r| model.predict_dense(r).0).collect();
                accuracy(&pred, &y)
            };
            let base = score(&x);
            (0..model.feature_names.len())
                .into_par_iter()
                .map(|j| {
                    let mut drop = 0.0;
                    for r in 0..PERMUTATION_REPEATS {
                        let mut rng = rng_from_seed(derive_seed(
                            seed,
                            (j * PERMUTATION_REPEATS + r) as u64,
                        ));
                        let mut col: Vec<f64> = x.iter().map(|row| row[j]).collect();
                        col.shuffle(&mut rng);
                        let mut xp = x.clone();
                        for (row, v) in xp.iter_mut().zip(col) {
                            row[j] = v;
                        }
                        drop += base - score(&xp);
                    }
                    drop / PERMUTATION_REPEATS as f64
                })
                .collect()
        }
    };
    Ok(model.feature_names.iter().cloned().zip(values).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Folds {
    pub folds: Vec<Vec<usize>>,
    pub stratified: bool,
    pub warning: Option<String>,
}

/// k folds dealt round-robin from a seeded shuffle, class by class so each
/// fold holds every class's share to within one row. Falls back to plain
/// shuffled folds when a class has fewer than k rows.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<Folds> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    if labels.len() < k {
        return Err(Error::Config(format!(
            "{} rows cannot fill {k} folds",
            labels.len()
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = rng_from_seed(seed);
    let mut folds = vec![Vec::new(); k];
    let small: Vec<usize> = by_class
        .iter()
        .filter(|(_, v)| v.len() < k)
        .map(|(c, _)| *c)
        .collect();
    let (stratified, warning) = if small.is_empty() {
        let mut next = 0;
        for idx in by_class.values_mut() {
            idx.shuffle(&mut rng);
            for &i in idx.iter() {
                folds[next % k].push(i);
                next += 1;
            }
        }
        (true, None)
    } else {
        let mut all: Vec<usize> = (0..labels.len()).collect();
        all.shuffle(&mut rng);
        for (n, i) in all.into_iter().enumerate() {
            folds[n % k].push(i);
        }
        (
            false,
            Some(format!(
                "class(es) {small:?} have fewer than {k} rows; using unstratified folds"
            )),
        )
    };
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(Folds {
        folds,
        stratified,
        warning,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestGrid {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    pub min_samples_split: Vec<usize>,
}

impl Default for ForestGrid {
    fn default() -> Self {
        ForestGrid {
            n_estimators: vec![50, 100],
            max_depth: vec![Some(5), Some(10), None],
            min_samples_split: vec![2, 5],
        }
    }
}

impl ForestGrid {
    pub fn cells(&self, seed: u64) -> Vec<ForestHyper> {
        let mut out = Vec::new();
        for &n in &self.n_estimators {
            for &d in &self.max_depth {
                for &m in &self.min_samples_split {
                    out.push(ForestHyper {
                        n_estimators: n,
                        max_depth: d,
                        min_samples_split: m,
                        max_features: None,
                        seed,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub hyper: ForestHyper,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: ForestHyper,
    pub cells: Vec<GridCell>,
    pub stratified: bool,
    pub warnings: Vec<String>,
}

/// Size order used to break score ties: fewer trees, then shallower
/// (unbounded depth is deepest), then larger minimum split.
fn model_size(h: &ForestHyper) -> (usize, usize, std::cmp::Reverse<usize>) {
    (
        h.n_estimators,
        h.max_depth.unwrap_or(usize::MAX),
        std::cmp::Reverse(h.min_samples_split),
    )
}

pub fn cross_validate_grid(data: &Dataset, grid: &ForestGrid, k: usize, seed: u64) -> Result<GridResult> {
    let cells = grid.cells(seed);
    if cells.is_empty() {
        return Err(Error::Config("hyperparameter grid is empty".into()));
    }
    let folds = stratified_folds(&data.labels(), k, seed)?;
    let mut warnings: Vec<String> = folds.warning.iter().cloned().collect();
    let mut scored = Vec::with_capacity(cells.len());
    for hyper in cells {
        let mut fold_scores = Vec::with_capacity(k);
        for (fi, val_idx) in folds.folds.iter().enumerate() {
            let train_idx: Vec<usize> = folds
                .folds
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != fi)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            let train = data.subset(&train_idx);
            let val = data.subset(val_idx);
            let h = ForestHyper {
                seed: derive_seed(seed, fi as u64),
                ..hyper
            };
            let score = match train_forest(&train, h) {
                Ok(model) => accuracy(&predict_forest_all(&model, &val)?, &val.labels()),
                Err(Error::SingleClass(_)) => {
                    warnings.push(format!("fold {fi} training split holds one class"));
                    let (c, _) = majority_baseline(&train.labels()).expect("non-empty fold");
                    accuracy(&vec![c; val.rows.len()], &val.labels())
                }
                Err(e) => return Err(e),
            };
            fold_scores.push(score);
        }
        let mean_score = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
        scored.push(GridCell {
            hyper,
            fold_scores,
            mean_score,
        });
    }
    let best = scored
        .iter()
        .min_by(|a, b| {
            b.mean_score
                .total_cmp(&a.mean_score)
                .then(model_size(&a.hyper).cmp(&model_size(&b.hyper)))
        })
        .expect("non-empty grid")
        .hyper;
    Ok(GridResult {
        best,
        cells: scored,
        stratified: folds.stratified,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticHyper {
    /// `None` uses the stability bound of each one-vs-rest problem.
    pub learning_rate: Option<f64>,
    pub epochs: usize,
    pub l2: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for LogisticHyper {
    fn default() -> Self {
        LogisticHyper {
            learning_rate: None,
            epochs: 500,
            l2: 1e-3,
            tol: 1e-7,
            seed: crate::rng::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub format: String,
    pub classes: Vec<String>,
    pub feature_names: Vec<String>,
    pub imputer: Imputer,
    pub means: Vec<f64>,
    /// Column scales; constant columns have scale 1 and always map to 0.
    pub scales: Vec<f64>,
    /// One weight vector per class (one-vs-rest).
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub hyper: LogisticHyper,
}

impl LinearModel {
    pub fn standardize(&self, x: &[f64]) -> SparseRow {
        x.iter()
            .zip(self.means.iter().zip(&self.scales))
            .enumerate()
            .map(|(j, (v, (m, s)))| (j, (v - m) / s))
            .collect()
    }

    pub fn scores(&self, row: &[Option<f64>]) -> Result<Vec<f64>> {
        let z = self.standardize(&self.imputer.apply(row)?);
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| logit::sigmoid(logit::dot(w, &z) + b))
            .collect())
    }

    pub fn predict(&self, row: &[Option<f64>]) -> Result<usize> {
        Ok(argmax(&self.scores(row)?))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_json(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: LinearModel = load_json(path)?;
        if m.format != LINEAR_FORMAT {
            return Err(Error::Config(format!("unsupported linear format `{}`", m.format)));
        }
        Ok(m)
    }
}

/// Standardized design matrix and the per-column statistics.
pub fn standardize_columns(x: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = x.first().map_or(0, Vec::len);
    let n = x.len().max(1) as f64;
    let means: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let scales = (0..d)
        .map(|j| {
            let var = x.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd > 1e-12 * means[j].abs().max(1.0) {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (means, scales)
}

pub fn train_logistic(train: &Dataset, hyper: LogisticHyper) -> Result<LinearModel> {
    train.validate()?;
    if train.n_classes_present() < 2 {
        return Err(Error::SingleClass(format!(
            "logistic training data has {} row(s) of one class",
            train.rows.len()
        )));
    }
    let imputer = Imputer::fit(train);
    let x = dense(train, &imputer);
    let (means, scales) = standardize_columns(&x);
    let d = train.feature_names.len();
    let constant: Vec<bool> = (0..d)
        .map(|j| x.iter().all(|r| r[j] == x[0][j]))
        .collect();
    let mut model = LinearModel {
        format: LINEAR_FORMAT.into(),
        classes: train.classes.clone(),
        feature_names: train.feature_names.clone(),
        imputer,
        means,
        scales,
        weights: Vec::new(),
        biases: Vec::new(),
        hyper,
    };
    let rows: Vec<SparseRow> = x.iter().map(|r| model.standardize(r)).collect();
    for c in 0..train.classes.len() {
        let targets: Vec<f64> = train
            .rows
            .iter()
            .map(|r| if r.label == c { 1.0 } else { 0.0 })
            .collect();
        let problem = BinaryProblem {
            rows: &rows,
            targets: &targets,
            dim: d,
            l2: hyper.l2,
        };
        // Constant columns carry no signal; starting them at zero keeps
        // them at the regularized optimum of exactly zero.
        let mut w0 = logit::initial_weights(d, derive_seed(hyper.seed, c as u64));
        for (w, &is_const) in w0.iter_mut().zip(&constant) {
            if is_const {
                *w = 0.0;
            }
        }
        let out = logit::gradient_descent(
            &problem,
            w0,
            0.0,
            GdConfig {
                learning_rate: hyper
                    .learning_rate
                    .unwrap_or_else(|| problem.stable_learning_rate()),
                max_epochs: hyper.epochs,
                tol: hyper.tol,
            },
        );
        model.weights.push(out.weights);
        model.biases.push(out.bias);
    }
    Ok(model)
}

/// Confusion matrix with rows = true class and columns = predicted class.
pub fn confusion_matrix(pred: &[usize], truth: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        m[t][p] += 1;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub baseline_accuracy: f64,
    pub baseline_class: String,
    pub classes: Vec<String>,
    pub confusion: Vec<Vec<usize>>,
    pub n_train: usize,
    pub n_test: usize,
    pub split_spec: String,
    pub importances: Option<BTreeMap<String, f64>>,
    pub beats_baseline: bool,
    /// Test split holds a single class, so the baseline is trivially 1.
    pub degenerate: bool,
}

/// Accuracy and majority baseline over the same test labels.
pub fn evaluate(
    pred: &[usize],
    truth: &[usize],
    classes: &[String],
    n_train: usize,
    split_spec: impl Into<String>,
) -> Result<EvalReport> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    let (base_class, base_acc) = majority_baseline(truth)
        .ok_or_else(|| Error::EmptySample("empty test split".into()))?;
    let acc = accuracy(pred, truth);
    Ok(EvalReport {
        accuracy: acc,
        baseline_accuracy: base_acc,
        baseline_class: classes[base_class].clone(),
        classes: classes.to_vec(),
        confusion: confusion_matrix(pred, truth, classes.len()),
        n_train,
        n_test: truth.len(),
        split_spec: split_spec.into(),
        importances: None,
        beats_baseline: acc > base_acc,
        degenerate: truth.iter().collect::<BTreeSet<_>>().len() < 2,
    })
}

fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut s = serde_json::to_string(value).expect("model serializes");
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    crate::corpus::parse_json_record(&text, path, 1)
}
