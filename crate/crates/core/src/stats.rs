//! Two-sample Kolmogorov-Smirnov tests between party / standing groups and
//! heatmap-ready output.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Party, Standing};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, SCHEMA};
use crate::qa::QaClass;

/// Largest pooled sample size for which [`ks_exact_p`] is offered.
pub const EXACT_MAX_N: usize = 20;

/// Below this λ the p-value is evaluated through the equivalent Jacobi
/// theta form, which converges in a handful of terms where the alternating
/// series needs thousands.
const THETA_SWITCH: f64 = 0.3;
const SERIES_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stars {
    None,
    One,
    Two,
    Three,
}

impl Stars {
    pub fn as_str(self) -> &'static str {
        match self {
            Stars::None => "ns",
            Stars::One => "*",
            Stars::Two => "**",
            Stars::Three => "***",
        }
    }
}

/// Half-open buckets: [0, 0.001) is `***`, [0.001, 0.01) `**`,
/// [0.01, 0.05) `*`.
pub fn star_level(p: f64) -> Stars {
    if p < 0.001 {
        Stars::Three
    } else if p < 0.01 {
        Stars::Two
    } else if p < 0.05 {
        Stars::One
    } else {
        Stars::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic_d: f64,
    pub p_value: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub lambda: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub significant: bool,
    pub stars: Stars,
}

/// Sup-distance between the two right-continuous ECDFs, found in one merge
/// pass over the sorted samples. Ties are consumed on both sides before
/// the gap is measured.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    ks_statistic_sorted(&a, &b)
}

fn ks_statistic_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let v = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2 k² λ²)`, clamped to [0, 1].
pub fn ks_series_p(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    let p = if lambda < THETA_SWITCH {
        // 1 - sqrt(2π)/λ Σ_{k odd} exp(-k² π² / (8 λ²))
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        let mut k = 1.0f64;
        loop {
            let term = (-(k * k) * c).exp();
            sum += term;
            if term < SERIES_EPS {
                break;
            }
            k += 2.0;
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        let mut k = 1.0f64;
        loop {
            let term = (-2.0 * k * k * lambda * lambda).exp();
            sum += sign * term;
            if term < SERIES_EPS {
                break;
            }
            sign = -sign;
            k += 1.0;
        }
        2.0 * sum
    };
    p.clamp(0.0, 1.0)
}

/// `(√nₑ + 0.12 + 0.11/√nₑ)·D` with `nₑ = n_a n_b / (n_a + n_b)`.
pub fn ks_lambda(d: f64, n_a: usize, n_b: usize) -> f64 {
    let ne = (n_a as f64 * n_b as f64) / (n_a + n_b) as f64;
    let s = ne.sqrt();
    (s + 0.12 + 0.11 / s) * d
}

fn check_sample(x: &[f64], which: &str) -> Result<()> {
    if x.is_empty() {
        return Err(Error::EmptySample(format!("sample {which} is empty")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("sample {which} holds non-finite values")));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Two-sample KS test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    check_sample(a, "a")?;
    check_sample(b, "b")?;
    let d = ks_statistic(a, b);
    let lambda = ks_lambda(d, a.len(), b.len());
    let p = ks_series_p(lambda);
    let stars = star_level(p);
    Ok(KsResult {
        statistic_d: d,
        p_value: p,
        n_a: a.len(),
        n_b: b.len(),
        lambda,
        mean_a: mean(a),
        mean_b: mean(b),
        significant: stars != Stars::None,
        stars,
    })
}

/// Exact permutation p-value: the share of all splits of the pooled sample
/// into groups of the original sizes whose D is at least the observed D.
pub fn ks_exact_p(a: &[f64], b: &[f64]) -> Result<f64> {
    check_sample(a, "a")?;
    check_sample(b, "b")?;
    let n = a.len() + b.len();
    if n > EXACT_MAX_N {
        return Err(Error::InvalidInput(format!(
            "exact mode supports at most {EXACT_MAX_N} pooled values, got {n}"
        )));
    }
    let observed = ks_statistic(a, b);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let k = a.len();
    let (mut hits, mut total) = (0u64, 0u64);
    let mut left = Vec::with_capacity(k);
    let mut right = Vec::with_capacity(n - k);
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        left.clear();
        right.clear();
        for (i, &v) in pooled.iter().enumerate() {
            if mask >> i & 1 == 1 {
                left.push(v);
            } else {
                right.push(v);
            }
        }
        total += 1;
        if ks_statistic(&left, &right) >= observed - 1e-12 {
            hits += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    R,
    D,
    I,
    /// Majority party.
    M,
    /// Minority party.
    #[serde(rename = "m")]
    Min,
    /// Republican in the majority.
    #[serde(rename = "R.M.")]
    RM,
    /// Democrat in the majority.
    #[serde(rename = "D.M.")]
    DM,
}

impl Group {
    pub fn label(self) -> &'static str {
        match self {
            Group::R => "R",
            Group::D => "D",
            Group::I => "I",
            Group::M => "M",
            Group::Min => "m",
            Group::RM => "R.M.",
            Group::DM => "D.M.",
        }
    }

    pub fn contains(self, party: Party, standing: Standing) -> bool {
        match self {
            Group::R => party == Party::Republican,
            Group::D => party == Party::Democrat,
            Group::I => party == Party::Independent,
            Group::M => standing == Standing::Majority,
            Group::Min => standing == Standing::Minority,
            Group::RM => party == Party::Republican && standing == Standing::Majority,
            Group::DM => party == Party::Democrat && standing == Standing::Majority,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub const PAIRS: [(Group, Group); 5] = [
    (Group::R, Group::D),
    (Group::R, Group::I),
    (Group::D, Group::I),
    (Group::M, Group::Min),
    (Group::RM, Group::DM),
];

pub fn pair_label(pair: (Group, Group)) -> String {
    format!("{}-{}", pair.0.label(), pair.1.label())
}

/// One utterance's features with the speaker attributes used for grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedFeatures {
    pub party: Party,
    pub standing: Standing,
    pub kind: QaClass,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub left_group: Group,
    pub right_group: Group,
    pub feature_name: String,
    pub result: KsResult,
    /// `mean_a - mean_b`; positive when the left group is larger.
    pub direction: f64,
}

impl GroupComparison {
    /// `mean_a / mean_b`, undefined when the right mean is zero.
    pub fn mean_ratio(&self) -> Option<f64> {
        (self.result.mean_b != 0.0).then(|| self.result.mean_a / self.result.mean_b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedComparison {
    pub left_group: Group,
    pub right_group: Group,
    pub feature_name: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Comparisons {
    pub results: Vec<GroupComparison>,
    pub skipped: Vec<SkippedComparison>,
}

/// KS comparison for every (feature, group pair) over utterances of
/// `kind`. Null feature values are dropped; a side with fewer than two
/// values is skipped with a reason. Output is ordered by schema position,
/// then pair order.
pub fn compare_groups(
    rows: &[GroupedFeatures],
    pairs: &[(Group, Group)],
    kind: QaClass,
) -> Comparisons {
    let rows: Vec<&GroupedFeatures> = rows.iter().filter(|r| r.kind == kind).collect();
    let jobs: Vec<(usize, (Group, Group))> = (0..SCHEMA.len())
        .flat_map(|f| pairs.iter().map(move |&p| (f, p)))
        .collect();
    let outcomes: Vec<std::result::Result<GroupComparison, SkippedComparison>> = jobs
        .par_iter()
        .map(|&(f, (l, r))| {
            let column = |g: Group| -> Vec<f64> {
                rows.iter()
                    .filter(|row| g.contains(row.party, row.standing))
                    .filter_map(|row| row.features.values[f])
                    .collect()
            };
            let (a, b) = (column(l), column(r));
            let name = SCHEMA[f].to_string();
            if a.len() < 2 || b.len() < 2 {
                return Err(SkippedComparison {
                    left_group: l,
                    right_group: r,
                    feature_name: name,
                    reason: format!(
                        "fewer than 2 usable values ({}: {}, {}: {})",
                        l,
                        a.len(),
                        r,
                        b.len()
                    ),
                });
            }
            let result = ks_two_sample(&a, &b).expect("samples are non-empty and finite");
            Ok(GroupComparison {
                left_group: l,
                right_group: r,
                feature_name: name,
                direction: result.mean_a - result.mean_b,
                result,
            })
        })
        .collect();
    let mut out = Comparisons::default();
    for o in outcomes {
        match o {
            Ok(c) => out.results.push(c),
            Err(s) => out.skipped.push(s),
        }
    }
    out
}

pub const CELL_FIELDS: [&str; 5] = ["direction", "stars", "D", "p", "hatched"];

fn csv_err(e: csv::Error) -> Error {
    Error::Io {
        path: "<csv output>".into(),
        source: std::io::Error::other(e.to_string()),
    }
}

/// Wide matrix: one row per feature, and for each group pair present the
/// five cell fields `direction, stars, D, p, hatched` (hatched when not
/// significant). Pairs a feature was skipped for have empty cells.
pub fn emit_heatmap_matrix(comparisons: &[GroupComparison], out: impl Write) -> Result<()> {
    let mut pairs: Vec<(Group, Group)> = Vec::new();
    let mut features: Vec<&str> = Vec::new();
    for c in comparisons {
        let p = (c.left_group, c.right_group);
        if !pairs.contains(&p) {
            pairs.push(p);
        }
        if !features.contains(&c.feature_name.as_str()) {
            features.push(&c.feature_name);
        }
    }
    let order = |name: &str| SCHEMA.iter().position(|s| *s == name).unwrap_or(usize::MAX);
    features.sort_by_key(|f| (order(f), f.to_string()));
    let pair_order = |p: &(Group, Group)| PAIRS.iter().position(|q| q == p).unwrap_or(usize::MAX);
    pairs.sort_by_key(|p| (pair_order(p), *p));

    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["feature".to_string()];
    for &p in &pairs {
        for f in CELL_FIELDS {
            header.push(format!("{}:{f}", pair_label(p)));
        }
    }
    w.write_record(&header).map_err(csv_err)?;
    for feat in features {
        let mut rec = vec![feat.to_string()];
        for &p in &pairs {
            match comparisons
                .iter()
                .find(|c| c.feature_name == feat && (c.left_group, c.right_group) == p)
            {
                Some(c) => rec.extend([
                    format!("{}", c.direction),
                    c.result.stars.as_str().to_string(),
                    format!("{}", c.result.statistic_d),
                    format!("{}", c.result.p_value),
                    (!c.result.significant).to_string(),
                ]),
                None => rec.extend(std::iter::repeat_n(String::new(), CELL_FIELDS.len())),
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))
}

/// Long format with both means, their difference and their ratio.
pub fn write_comparisons(comparisons: &[GroupComparison], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "feature", "left", "right", "n_a", "n_b", "mean_a", "mean_b", "direction", "mean_ratio",
        "D", "lambda", "p", "stars", "significant",
    ])
    .map_err(csv_err)?;
    for c in comparisons {
        let r = &c.result;
        w.write_record([
            c.feature_name.clone(),
            c.left_group.label().to_string(),
            c.right_group.label().to_string(),
            r.n_a.to_string(),
            r.n_b.to_string(),
            format!("{}", r.mean_a),
            format!("{}", r.mean_b),
            format!("{}", c.direction),
            c.mean_ratio().map_or_else(|| "NA".to_string(), |x| format!("{x}")),
            format!("{}", r.statistic_d),
            format!("{}", r.lambda),
            format!("{}", r.p_value),
            r.stars.as_str().to_string(),
            r.significant.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))
}
