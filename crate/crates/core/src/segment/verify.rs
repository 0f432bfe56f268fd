//! Sampling utterances for manual verification of the segmentation, and
//! scoring the returned verdicts.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::corpus::Hearing;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, derive_seed_str, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub hearings_per_session: usize,
    pub utterances_per_hearing: usize,
}

/// Annotator verdict for one sampled utterance. `Clubbed`: several true
/// utterances merged into one. `Broken`: one true utterance split apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Correct,
    Clubbed,
    Broken,
}

impl FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "correct" => Ok(Verdict::Correct),
            "clubbed" => Ok(Verdict::Clubbed),
            "broken" => Ok(Verdict::Broken),
            other => Err(format!(
                "unknown verdict `{other}` (expected correct, clubbed or broken)"
            )),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Correct => "correct",
            Verdict::Clubbed => "clubbed",
            Verdict::Broken => "broken",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub session: u32,
    pub hearing_id: String,
    pub utterance_id: String,
    pub sequence_no: u32,
    /// Empty until an annotator fills it in.
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SampleManifest {
    pub rows: Vec<ManifestRow>,
    pub warnings: Vec<String>,
}

/// Draw a reproducible verification sample: per session, a uniform subset
/// of hearings; per hearing, a uniform subset of utterances (listed in
/// document order).
pub fn verify_sample(corpus: &[Hearing], spec: SampleSpec, seed: u64) -> SampleManifest {
    let mut by_session: BTreeMap<u32, Vec<&Hearing>> = BTreeMap::new();
    for h in corpus {
        by_session.entry(h.meta.session).or_default().push(h);
    }
    let mut manifest = SampleManifest::default();
    for (session, mut hearings) in by_session {
        hearings.sort_by(|a, b| a.meta.hearing_id.cmp(&b.meta.hearing_id));
        let take = spec.hearings_per_session.min(hearings.len());
        if take < spec.hearings_per_session {
            manifest.warnings.push(format!(
                "session {session}: only {} hearing(s), sampling all",
                hearings.len()
            ));
        }
        let mut rng = rng_from_seed(derive_seed(seed, u64::from(session)));
        let mut picked: Vec<usize> = sample(&mut rng, hearings.len(), take).into_vec();
        picked.sort_unstable();
        for hi in picked {
            let h = hearings[hi];
            let n = h.utterances.len();
            let k = spec.utterances_per_hearing.min(n);
            if k < spec.utterances_per_hearing {
                manifest.warnings.push(format!(
                    "hearing {}: only {n} utterance(s), sampling all",
                    h.meta.hearing_id
                ));
            }
            let mut urng = rng_from_seed(derive_seed_str(seed, &h.meta.hearing_id));
            let mut idx: Vec<usize> = sample(&mut urng, n, k).into_vec();
            idx.sort_unstable();
            for i in idx {
                let u = &h.utterances[i];
                manifest.rows.push(ManifestRow {
                    session,
                    hearing_id: h.meta.hearing_id.clone(),
                    utterance_id: u.utterance_id.clone(),
                    sequence_no: u.sequence_no,
                    verdict: None,
                });
            }
        }
    }
    manifest
}

impl SampleManifest {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(["session", "hearing_id", "utterance_id", "sequence_no", "verdict"])
            .map_err(|e| csv_err(path, e))?;
        for r in &self.rows {
            w.write_record([
                r.session.to_string(),
                r.hearing_id.clone(),
                r.utterance_id.clone(),
                r.sequence_no.to_string(),
                r.verdict.map(|v| v.to_string()).unwrap_or_default(),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let mut rows = Vec::new();
        for (i, rec) in r.deserialize::<RawManifestRow>().enumerate() {
            let line = i + 2;
            let raw = rec.map_err(|e| Error::record(path, line, "<row>", e.to_string()))?;
            let verdict = match raw.verdict.trim() {
                "" => None,
                v => Some(
                    v.parse()
                        .map_err(|m: String| Error::record(path, line, "verdict", m))?,
                ),
            };
            rows.push(ManifestRow {
                session: raw.session,
                hearing_id: raw.hearing_id,
                utterance_id: raw.utterance_id,
                sequence_no: raw.sequence_no,
                verdict,
            });
        }
        Ok(SampleManifest {
            rows,
            warnings: Vec::new(),
        })
    }

    pub fn session_of(&self) -> HashMap<&str, u32> {
        self.rows
            .iter()
            .map(|r| (r.utterance_id.as_str(), r.session))
            .collect()
    }
}

#[derive(Deserialize)]
struct RawManifestRow {
    session: u32,
    hearing_id: String,
    utterance_id: String,
    sequence_no: u32,
    #[serde(default)]
    verdict: String,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
        _ => {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::record(path, line, "<row>", e.to_string())
        }
    }
}

/// Read a verdict file: delimiter-separated rows with `utterance_id` and
/// `verdict` columns (a filled-in manifest also qualifies).
pub fn read_verdicts(path: &Path) -> Result<Vec<(String, Verdict)>> {
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::record(path, 1, name, "missing column"))
    };
    let id_col = col("utterance_id")?;
    let verdict_col = col("verdict")?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let id = rec
            .get(id_col)
            .filter(|s| !s.trim().is_empty())
            .ok_or_else(|| Error::record(path, line, "utterance_id", "missing value"))?;
        let v = rec
            .get(verdict_col)
            .ok_or_else(|| Error::record(path, line, "verdict", "missing value"))?
            .parse()
            .map_err(|m: String| Error::record(path, line, "verdict", m))?;
        out.push((id.trim().to_string(), v));
    }
    Ok(out)
}

/// Verdict counts for one session (or the total).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub verified: usize,
    pub correct: usize,
    /// Rows whose verdict is anything other than correct.
    pub incorrect: usize,
    pub clubbed: usize,
    pub broken: usize,
}

impl Tally {
    fn add(&mut self, v: Verdict) {
        self.verified += 1;
        match v {
            Verdict::Correct => self.correct += 1,
            Verdict::Clubbed => self.clubbed += 1,
            Verdict::Broken => self.broken += 1,
        }
        if v != Verdict::Correct {
            self.incorrect += 1;
        }
    }

    pub fn correct_rate(&self) -> f64 {
        if self.verified == 0 {
            return 0.0;
        }
        self.correct as f64 / self.verified as f64
    }

    /// The error-type columns add up to the incorrect column.
    pub fn is_consistent(&self) -> bool {
        self.clubbed + self.broken == self.incorrect
            && self.correct + self.incorrect == self.verified
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub per_session: BTreeMap<u32, Tally>,
    pub total: Tally,
}

/// Tally verdicts per session. `session_of` maps utterance ids to sessions
/// (see [`SampleManifest::session_of`]); unknown ids are an error.
pub fn score_verdicts(
    verdicts: &[(String, Verdict)],
    session_of: &HashMap<&str, u32>,
) -> Result<VerificationSummary> {
    let mut summary = VerificationSummary::default();
    for (id, v) in verdicts {
        let session = session_of.get(id.as_str()).ok_or_else(|| {
            Error::InvalidInput(format!("verdict for `{id}` which is not in the manifest"))
        })?;
        summary.per_session.entry(*session).or_default().add(*v);
        summary.total.add(*v);
    }
    debug_assert!(summary.total.is_consistent());
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Chamber, HearingMeta, HearingType, QaLabel, Utterance};

    fn corpus(sessions: &[u32], hearings: usize, utts: usize) -> Vec<Hearing> {
        let mut out = Vec::new();
        for &s in sessions {
            for h in 0..hearings {
                let id = format!("H{s}-{h:03}");
                let utterances = (0..utts)
                    .map(|i| Utterance {
                        utterance_id: format!("{id}-u{i:05}"),
                        hearing_id: id.clone(),
                        sequence_no: i as u32,
                        speaker: None,
                        raw_marker: "Mr. X".into(),
                        text: "t".into(),
                        qa_label: QaLabel::Unlabeled,
                    })
                    .collect();
                out.push(Hearing {
                    meta: HearingMeta::new(id, s, Chamber::House, "c", HearingType::General),
                    utterances,
                });
            }
        }
        out
    }

    #[test]
    fn sample_size_and_determinism() {
        let c = corpus(&(108..118).collect::<Vec<_>>(), 60, 15);
        let spec = SampleSpec {
            hearings_per_session: 50,
            utterances_per_hearing: 10,
        };
        let m1 = verify_sample(&c, spec, 3);
        assert_eq!(m1.rows.len(), 5000);
        assert!(m1.warnings.is_empty());
        assert_eq!(m1, verify_sample(&c, spec, 3));
        assert_ne!(m1.rows, verify_sample(&c, spec, 4).rows);
    }

    #[test]
    fn short_sessions_are_sampled_whole() {
        let c = corpus(&[110], 3, 4);
        let m = verify_sample(
            &c,
            SampleSpec {
                hearings_per_session: 5,
                utterances_per_hearing: 10,
            },
            1,
        );
        assert_eq!(m.rows.len(), 12);
        assert_eq!(m.warnings.len(), 4);
    }

    #[test]
    fn tally_identity() {
        let verdicts = vec![
            ("a".to_string(), Verdict::Correct),
            ("b".to_string(), Verdict::Clubbed),
            ("c".to_string(), Verdict::Broken),
        ];
        let map: HashMap<&str, u32> = [("a", 1), ("b", 1), ("c", 2)].into();
        let s = score_verdicts(&verdicts, &map).unwrap();
        assert_eq!(s.total.incorrect, 2);
        assert!(s.total.is_consistent());
        assert!(s.per_session.values().all(Tally::is_consistent));
        let bad = vec![("zz".to_string(), Verdict::Correct)];
        assert!(score_verdicts(&bad, &map).is_err());
    }
}
