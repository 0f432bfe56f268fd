//! Transcript segmentation: boilerplate trimming, speaker-marker detection,
//! utterance extraction and speaker resolution.
//!
//! Segmentation is lossless. Every character of the input ends up in the
//! trimmed head, the trimmed tail, the preamble before the first marker, or
//! one of the [`Piece`]s of a [`Segment`], so [`Trimmed::reconstruct`] and
//! [`Segmentation::reconstruct_body`] rebuild the input exactly.

pub mod fetch;
mod resolve;
pub mod verify;

use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{Hearing, HearingMeta, QaLabel, Role, Roster, Utterance};
use crate::error::{Error, Result};
use crate::text::{collapse_ws, normalize_name};

pub use resolve::{
    resolve_speaker, HeuristicRecognizer, RecognitionContext, Resolution, SpeakerRecognizer,
};

const DEFAULT_RULES: &str = include_str!("../../rules/default.toml");

/// Compiled segmentation rules.
#[derive(Debug, Clone)]
pub struct SegmenterRules {
    pub start_patterns: Vec<Regex>,
    pub end_patterns: Vec<Regex>,
    /// Anchored at the start of a line (after indentation).
    pub marker_patterns: Vec<Regex>,
    pub honorifics: Vec<String>,
    pub require_indent: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RulesFile {
    #[serde(default = "default_true")]
    require_indent: bool,
    honorifics: Vec<String>,
    start_patterns: Vec<String>,
    end_patterns: Vec<String>,
    marker_patterns: Vec<String>,
}

fn default_true() -> bool {
    true
}

impl SegmenterRules {
    /// Parse a rules file (TOML with named pattern lists).
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: RulesFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("segmenter rules: {e}")))?;
        let compile = |name: &str, pats: &[String], anchor: bool| -> Result<Vec<Regex>> {
            if pats.is_empty() {
                return Err(Error::Config(format!("segmenter rules: `{name}` is empty")));
            }
            pats.iter()
                .map(|p| {
                    let src = if anchor { format!("^(?:{p})") } else { p.clone() };
                    Regex::new(&src).map_err(|e| {
                        Error::Config(format!("segmenter rules: bad pattern in `{name}`: {e}"))
                    })
                })
                .collect()
        };
        let marker_patterns = compile("marker_patterns", &file.marker_patterns, true)?;
        for (re, src) in marker_patterns.iter().zip(&file.marker_patterns) {
            if !re.capture_names().any(|n| n == Some("marker")) {
                return Err(Error::Config(format!(
                    "segmenter rules: marker pattern lacks a `marker` group: {src}"
                )));
            }
        }
        if file.honorifics.is_empty() {
            return Err(Error::Config("segmenter rules: `honorifics` is empty".into()));
        }
        Ok(SegmenterRules {
            start_patterns: compile("start_patterns", &file.start_patterns, false)?,
            end_patterns: compile("end_patterns", &file.end_patterns, false)?,
            marker_patterns,
            honorifics: file.honorifics,
            require_indent: file.require_indent,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// The bundled rule set.
    pub fn default_rules() -> &'static SegmenterRules {
        static RULES: OnceLock<SegmenterRules> = OnceLock::new();
        RULES.get_or_init(|| SegmenterRules::from_toml(DEFAULT_RULES).expect("bundled rules"))
    }

    /// Name part of a marker with every configured honorific removed.
    fn marker_name(&self, marker: &str) -> String {
        let mut name = normalize_name(marker);
        loop {
            let before = name.len();
            for h in &self.honorifics {
                let h = normalize_name(h);
                let h = h.trim();
                if h.is_empty() {
                    continue;
                }
                if name == h {
                    name.clear();
                } else if let Some(rest) = name.strip_prefix(h).and_then(|r| r.strip_prefix(' ')) {
                    name = rest.to_string();
                }
            }
            if name.len() == before {
                return name;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub line_no: usize,
    pub message: String,
}

/// Result of [`trim_proceedings`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trimmed {
    pub head: String,
    pub body: String,
    pub tail: String,
    pub warnings: Vec<Warning>,
}

impl Trimmed {
    pub fn head_chars(&self) -> usize {
        self.head.chars().count()
    }

    pub fn tail_chars(&self) -> usize {
        self.tail.chars().count()
    }

    /// Number of lines removed in front of the body.
    pub fn head_lines(&self) -> usize {
        self.head.matches('\n').count()
    }

    pub fn reconstruct(&self) -> String {
        let mut s = String::with_capacity(self.head.len() + self.body.len() + self.tail.len());
        s.push_str(&self.head);
        s.push_str(&self.body);
        s.push_str(&self.tail);
        s
    }
}

fn line_start(text: &str, pos: usize) -> usize {
    text[..pos].rfind('\n').map_or(0, |i| i + 1)
}

fn line_end_inclusive(text: &str, pos: usize) -> usize {
    text[pos..].find('\n').map_or(text.len(), |i| pos + i + 1)
}

fn line_no_at(text: &str, pos: usize) -> usize {
    text[..pos].matches('\n').count() + 1
}

/// Cut the transcript down to the proceedings: from the line holding the
/// earliest start anchor through the line holding the last end anchor.
/// Missing anchors leave that side untouched and record a warning.
pub fn trim_proceedings(raw: &str, rules: &SegmenterRules) -> Trimmed {
    let mut warnings = Vec::new();
    let start = rules
        .start_patterns
        .iter()
        .filter_map(|re| re.find(raw).map(|m| m.start()))
        .min();
    let body_start = match start {
        Some(pos) => line_start(raw, pos),
        None => {
            warnings.push(Warning {
                line_no: 1,
                message: "no start-of-proceedings anchor found; keeping the head".into(),
            });
            0
        }
    };
    let end = rules
        .end_patterns
        .iter()
        .filter_map(|re| re.find_iter(&raw[body_start..]).last().map(|m| body_start + m.start()))
        .max();
    let body_end = match end {
        Some(pos) => line_end_inclusive(raw, pos),
        None => {
            warnings.push(Warning {
                line_no: line_no_at(raw, raw.len()),
                message: "no end-of-proceedings anchor found; keeping the tail".into(),
            });
            raw.len()
        }
    };
    Trimmed {
        head: raw[..body_start].to_string(),
        body: raw[body_start..body_end].to_string(),
        tail: raw[body_end..].to_string(),
        warnings,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PieceKind {
    Indent,
    Marker,
    Delimiter,
    Speech,
    StageDirection,
    Trailing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece {
    pub kind: PieceKind,
    pub text: String,
}

/// One utterance as found in the body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub raw_marker: String,
    /// Speech with stage directions removed and whitespace collapsed.
    pub text: String,
    /// 1-based line of the marker within the body.
    pub line_no: usize,
    /// The exact source text of the segment, in order.
    pub pieces: Vec<Piece>,
}

impl Segment {
    pub fn stage_directions(&self) -> impl Iterator<Item = &str> {
        self.pieces
            .iter()
            .filter(|p| p.kind == PieceKind::StageDirection)
            .map(|p| p.text.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    /// Body text before the first marker.
    pub preamble: String,
    pub segments: Vec<Segment>,
    pub warnings: Vec<Warning>,
}

impl Segmentation {
    pub fn reconstruct_body(&self) -> String {
        let mut s = self.preamble.clone();
        for seg in &self.segments {
            for p in &seg.pieces {
                s.push_str(&p.text);
            }
        }
        s
    }
}

fn stage_direction_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[[^\[\]]*\]").expect("static regex"))
}

struct MarkerHit {
    line_start: usize,
    indent_end: usize,
    marker_end: usize,
    match_end: usize,
}

fn find_marker(body: &str, line_start: usize, rules: &SegmenterRules) -> Option<MarkerHit> {
    let line_end = line_end_inclusive(body, line_start);
    let line = &body[line_start..line_end];
    let indent = line.len() - line.trim_start_matches([' ', '\t']).len();
    if indent == 0 && line_start != 0 && rules.require_indent {
        return None;
    }
    let rest = &line[indent..];
    for re in &rules.marker_patterns {
        let Some(caps) = re.captures(rest) else {
            continue;
        };
        let m = caps.name("marker").expect("validated at load");
        if rules.marker_name(m.as_str()).is_empty() {
            continue;
        }
        let whole = caps.get(0).expect("group 0");
        return Some(MarkerHit {
            line_start,
            indent_end: line_start + indent,
            marker_end: line_start + indent + m.end(),
            match_end: line_start + indent + whole.end(),
        });
    }
    None
}

/// Split a trimmed body into speaker-attributed segments. Every marker
/// opens a new segment that runs to the line holding the next marker.
pub fn segment_utterances(body: &str, rules: &SegmenterRules) -> Result<Segmentation> {
    let mut starts = vec![0];
    starts.extend(body.match_indices('\n').map(|(i, _)| i + 1).filter(|&i| i < body.len()));
    let hits: Vec<MarkerHit> = starts
        .into_iter()
        .filter_map(|s| find_marker(body, s, rules))
        .collect();
    if hits.is_empty() {
        return Err(Error::SegmentationFailed {
            hearing_id: String::new(),
        });
    }

    let mut warnings = Vec::new();
    let mut segments = Vec::with_capacity(hits.len());
    for (k, hit) in hits.iter().enumerate() {
        let end = hits.get(k + 1).map_or(body.len(), |h| h.line_start);
        let mut pieces = vec![Piece {
            kind: PieceKind::Indent,
            text: body[hit.line_start..hit.indent_end].to_string(),
        }];
        pieces.push(Piece {
            kind: PieceKind::Marker,
            text: body[hit.indent_end..hit.marker_end].to_string(),
        });
        pieces.push(Piece {
            kind: PieceKind::Delimiter,
            text: body[hit.marker_end..hit.match_end].to_string(),
        });

        let region = &body[hit.match_end..end];
        let content_len = region.trim_end().len();
        let content = &region[..content_len];
        let mut speech = String::new();
        let mut cursor = 0;
        for m in stage_direction_re().find_iter(content) {
            if m.start() > cursor {
                pieces.push(Piece {
                    kind: PieceKind::Speech,
                    text: content[cursor..m.start()].to_string(),
                });
                speech.push_str(&content[cursor..m.start()]);
            }
            pieces.push(Piece {
                kind: PieceKind::StageDirection,
                text: m.as_str().to_string(),
            });
            // Keep words on either side of the direction apart.
            speech.push(' ');
            warnings.push(Warning {
                line_no: line_no_at(body, hit.match_end + m.start()),
                message: format!("stage direction removed: {}", m.as_str()),
            });
            cursor = m.end();
        }
        if cursor < content.len() {
            pieces.push(Piece {
                kind: PieceKind::Speech,
                text: content[cursor..].to_string(),
            });
            speech.push_str(&content[cursor..]);
        }
        if content_len < region.len() {
            pieces.push(Piece {
                kind: PieceKind::Trailing,
                text: region[content_len..].to_string(),
            });
        }
        pieces.retain(|p| !p.text.is_empty() || p.kind == PieceKind::Marker);

        segments.push(Segment {
            raw_marker: body[hit.indent_end..hit.marker_end].to_string(),
            text: collapse_ws(&speech),
            line_no: line_no_at(body, hit.line_start),
            pieces,
        });
    }
    Ok(Segmentation {
        preamble: body[..hits[0].line_start].to_string(),
        segments,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationReport {
    pub hearing_id: String,
    pub n_utterances: usize,
    pub n_unresolved_speakers: usize,
    pub trimmed_head_chars: usize,
    pub trimmed_tail_chars: usize,
    pub warnings: Vec<Warning>,
    /// Speaker resolutions that relied on a tie-break heuristic.
    pub heuristic_decisions: Vec<Warning>,
}

#[derive(Debug, Clone)]
pub struct SegmentedHearing {
    pub hearing: Hearing,
    pub report: SegmentationReport,
    pub trimmed: Trimmed,
    pub segmentation: Segmentation,
}

pub fn utterance_id(hearing_id: &str, sequence_no: u32) -> String {
    format!("{hearing_id}-u{sequence_no:05}")
}

/// Full segmentation of one raw transcript: trim, split, resolve speakers.
/// Warning line numbers refer to the raw transcript.
pub fn segment_hearing(
    raw: &str,
    meta: &HearingMeta,
    roster: &Roster,
    rules: &SegmenterRules,
    recognizer: &dyn SpeakerRecognizer,
) -> Result<SegmentedHearing> {
    if raw.trim().is_empty() {
        return Err(Error::SegmentationFailed {
            hearing_id: meta.hearing_id.clone(),
        });
    }
    let trimmed = trim_proceedings(raw, rules);
    let offset = trimmed.head_lines();
    let segmentation = segment_utterances(&trimmed.body, rules).map_err(|e| match e {
        Error::SegmentationFailed { .. } => Error::SegmentationFailed {
            hearing_id: meta.hearing_id.clone(),
        },
        other => other,
    })?;

    let mut warnings = trimmed.warnings.clone();
    warnings.extend(segmentation.warnings.iter().map(|w| Warning {
        line_no: w.line_no + offset,
        message: w.message.clone(),
    }));
    let mut heuristic_decisions = Vec::new();
    let mut utterances = Vec::with_capacity(segmentation.segments.len());
    let mut ctx = RecognitionContext::default();
    for (i, seg) in segmentation.segments.iter().enumerate() {
        let line_no = seg.line_no + offset;
        let res = recognizer.recognize(&seg.raw_marker, roster, &ctx);
        if let Some(w) = res.warning {
            warnings.push(Warning { line_no, message: w });
        }
        if let Some(h) = res.heuristic {
            heuristic_decisions.push(Warning { line_no, message: h });
        }
        ctx = RecognitionContext {
            previous_role: Some(
                res.speaker
                    .as_deref()
                    .map_or(Role::Unknown, |id| roster.role_of(id)),
            ),
            previous_label: None,
        };
        let seq = i as u32;
        utterances.push(Utterance {
            utterance_id: utterance_id(&meta.hearing_id, seq),
            hearing_id: meta.hearing_id.clone(),
            sequence_no: seq,
            speaker: res.speaker,
            raw_marker: seg.raw_marker.clone(),
            text: seg.text.clone(),
            qa_label: QaLabel::Unlabeled,
        });
    }
    warnings.sort_by_key(|w| w.line_no);
    let report = SegmentationReport {
        hearing_id: meta.hearing_id.clone(),
        n_utterances: utterances.len(),
        n_unresolved_speakers: utterances.iter().filter(|u| u.speaker.is_none()).count(),
        trimmed_head_chars: trimmed.head_chars(),
        trimmed_tail_chars: trimmed.tail_chars(),
        warnings,
        heuristic_decisions,
    };
    Ok(SegmentedHearing {
        hearing: Hearing {
            meta: meta.clone(),
            utterances,
        },
        report,
        trimmed,
        segmentation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules() -> &'static SegmenterRules {
        SegmenterRules::default_rules()
    }

    #[test]
    fn bundled_rules_compile() {
        let r = rules();
        assert!(!r.start_patterns.is_empty());
        assert!(!r.end_patterns.is_empty());
        assert!(!r.marker_patterns.is_empty());
    }

    #[test]
    fn rules_reject_marker_pattern_without_group() {
        let bad = r#"
honorifics = ["Mr"]
start_patterns = ["x"]
end_patterns = ["y"]
marker_patterns = ['Mr\. \w+\. ']
"#;
        assert!(matches!(SegmenterRules::from_toml(bad), Err(Error::Config(_))));
        let empty = r#"
honorifics = ["Mr"]
start_patterns = []
end_patterns = ["y"]
marker_patterns = ['(?P<marker>x)']
"#;
        assert!(SegmenterRules::from_toml(empty).is_err());
    }

    #[test]
    fn two_simple_markers() {
        let seg = segment_utterances("Mr. Smith. Hello.\n Ms. Jones. Hi.", rules()).unwrap();
        let got: Vec<_> = seg
            .segments
            .iter()
            .map(|s| (s.raw_marker.as_str(), s.text.as_str()))
            .collect();
        assert_eq!(got, vec![("Mr. Smith", "Hello."), ("Ms. Jones", "Hi.")]);
        assert_eq!(seg.reconstruct_body(), "Mr. Smith. Hello.\n Ms. Jones. Hi.");
    }

    #[test]
    fn single_marker_spans_body() {
        let body = "Mr. Smith. One line.\nA wrapped continuation.\n    And another paragraph.\n";
        let seg = segment_utterances(body, rules()).unwrap();
        assert_eq!(seg.segments.len(), 1);
        assert_eq!(
            seg.segments[0].text,
            "One line. A wrapped continuation. And another paragraph."
        );
        assert_eq!(seg.reconstruct_body(), body);
    }

    #[test]
    fn no_marker_fails() {
        assert!(matches!(
            segment_utterances("nothing to see here.\n", rules()),
            Err(Error::SegmentationFailed { .. })
        ));
    }

    #[test]
    fn stage_directions_are_removed_and_warned() {
        let body = "    Mr. Smith. That is funny. [Laughter.] Anyway.\n    Ms. Jones. Yes.\n";
        let seg = segment_utterances(body, rules()).unwrap();
        assert_eq!(seg.segments[0].text, "That is funny. Anyway.");
        assert_eq!(
            seg.segments[0].stage_directions().collect::<Vec<_>>(),
            vec!["[Laughter.]"]
        );
        assert_eq!(seg.warnings.len(), 1);
        assert_eq!(seg.warnings[0].line_no, 1);
        assert_eq!(seg.reconstruct_body(), body);
    }

    #[test]
    fn marker_variants() {
        let body = concat!(
            "    Chairwoman MALONEY. Order.\n",
            "    MR. VAN HOLLEN. Yes.\n",
            "    Mr. Smith of New Jersey. Thanks.\n",
            "    The Chairman. Next.\n",
            "    JOHN DOE. Testimony.\n",
            "    MARIA DE LA ROSA. More testimony.\n",
            "    Senator Collins. Question?\n",
        );
        let seg = segment_utterances(body, rules()).unwrap();
        let markers: Vec<_> = seg.segments.iter().map(|s| s.raw_marker.as_str()).collect();
        assert_eq!(
            markers,
            vec![
                "Chairwoman MALONEY",
                "MR. VAN HOLLEN",
                "Mr. Smith of New Jersey",
                "The Chairman",
                "JOHN DOE",
                "MARIA DE LA ROSA",
                "Senator Collins"
            ]
        );
    }

    #[test]
    fn non_markers_are_left_in_speech() {
        let body = concat!(
            "    Mr. Smith. Opening.\n",
            "    Mr. Chairman, thank you for the time.\n",
            "    Mr. Chairman. I yield back.\n",
            "Mr. Jones. is a wrapped continuation line without indent.\n",
            "    Dr. Lee's report says otherwise.\n",
        );
        let seg = segment_utterances(body, rules()).unwrap();
        assert_eq!(seg.segments.len(), 1);
        assert_eq!(seg.reconstruct_body(), body);
    }

    #[test]
    fn trim_keeps_anchored_region() {
        let raw = "HEADER\nstuff\n    The Committee met, pursuant to notice.\n    Mr. A. Hi.\n    [Whereupon, at 11 a.m., the committee was adjourned.]\nAPPENDIX\n";
        let t = trim_proceedings(raw, rules());
        assert_eq!(t.head, "HEADER\nstuff\n");
        assert!(t.body.starts_with("    The Committee met"));
        assert!(t.body.ends_with("adjourned.]\n"));
        assert_eq!(t.tail, "APPENDIX\n");
        assert!(t.warnings.is_empty());
        assert_eq!(t.reconstruct(), raw);
    }

    #[test]
    fn trim_without_anchors_warns_twice() {
        let raw = "    Mr. A. Hello there.\n";
        let t = trim_proceedings(raw, rules());
        assert_eq!(t.body, raw);
        assert_eq!(t.warnings.len(), 2);
    }
}
