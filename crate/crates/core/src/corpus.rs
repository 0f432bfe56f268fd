//! Shared domain types and the on-disk corpus store.
//!
//! Store layout, one directory per hearing under the store root:
//!
//! ```text
//! <root>/<hearing_id>/meta.json         one HearingMeta record, one line
//! <root>/<hearing_id>/utterances.jsonl  one Utterance record per line, by sequence_no
//! <root>/<hearing_id>/roster.json       optional Roster for the hearing
//! ```
//!
//! Field names in the JSON records are exactly the Rust field names below.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::normalize_name;

pub const META_FILE: &str = "meta.json";
pub const UTTERANCES_FILE: &str = "utterances.jsonl";
pub const ROSTER_FILE: &str = "roster.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Chamber {
    House,
    Senate,
    Joint,
}

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum HearingType {
    #[default]
    General,
    Field,
    Oversight,
    Authorization,
    Nomination,
    Treaty,
    Markup,
}

impl HearingType {
    pub const ALL: [HearingType; 7] = [
        HearingType::General,
        HearingType::Field,
        HearingType::Oversight,
        HearingType::Authorization,
        HearingType::Nomination,
        HearingType::Treaty,
        HearingType::Markup,
    ];
}

/// Party affiliation. Declaration order is the tie-break order used by
/// baselines and classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    Democrat,
    Republican,
    Independent,
    None,
}

impl Party {
    /// One-letter code used in tables: D, R, I.
    pub fn code(self) -> &'static str {
        match self {
            Party::Democrat => "D",
            Party::Republican => "R",
            Party::Independent => "I",
            Party::None => "-",
        }
    }
}

impl FromStr for Party {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "d" | "democrat" | "democratic" => Ok(Party::Democrat),
            "r" | "republican" => Ok(Party::Republican),
            "i" | "independent" => Ok(Party::Independent),
            "none" | "" => Ok(Party::None),
            other => Err(Error::InvalidInput(format!("unknown party `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Member,
    Witness,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Standing {
    Majority,
    Minority,
    NotApplicable,
}

impl Standing {
    /// Table code: M for majority, m for minority.
    pub fn code(self) -> &'static str {
        match self {
            Standing::Majority => "M",
            Standing::Minority => "m",
            Standing::NotApplicable => "-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
}

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum QaLabel {
    Question,
    Answer,
    Other,
    #[default]
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "HearingMetaRecord", into = "HearingMetaRecord")]
pub struct HearingMeta {
    pub hearing_id: String,
    pub session: u32,
    pub chamber: Chamber,
    pub committee: String,
    pub hearing_type: HearingType,
    /// True when `hearing_type` was absent from the source metadata and fell
    /// back to `General`.
    pub hearing_type_inferred: bool,
    pub date: Option<NaiveDate>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HearingMetaRecord {
    hearing_id: String,
    session: u32,
    chamber: Chamber,
    committee: String,
    #[serde(default)]
    hearing_type: Option<HearingType>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    hearing_type_inferred: bool,
    #[serde(default)]
    date: Option<NaiveDate>,
}

impl TryFrom<HearingMetaRecord> for HearingMeta {
    type Error = String;

    fn try_from(r: HearingMetaRecord) -> std::result::Result<Self, String> {
        if r.hearing_id.trim().is_empty() {
            return Err("hearing_id must be non-empty".into());
        }
        let (hearing_type, inferred) = match r.hearing_type {
            Some(t) => (t, r.hearing_type_inferred),
            None => (HearingType::General, true),
        };
        Ok(HearingMeta {
            hearing_id: r.hearing_id,
            session: r.session,
            chamber: r.chamber,
            committee: r.committee,
            hearing_type,
            hearing_type_inferred: inferred,
            date: r.date,
        })
    }
}

impl From<HearingMeta> for HearingMetaRecord {
    fn from(m: HearingMeta) -> Self {
        HearingMetaRecord {
            hearing_id: m.hearing_id,
            session: m.session,
            chamber: m.chamber,
            committee: m.committee,
            hearing_type: Some(m.hearing_type),
            hearing_type_inferred: m.hearing_type_inferred,
            date: m.date,
        }
    }
}

impl HearingMeta {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_json_record(text.trim_end(), path, 1)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string(self).expect("meta serializes");
        s.push('\n');
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn new(
        hearing_id: impl Into<String>,
        session: u32,
        chamber: Chamber,
        committee: impl Into<String>,
        hearing_type: HearingType,
    ) -> Self {
        HearingMeta {
            hearing_id: hearing_id.into(),
            session,
            chamber,
            committee: committee.into(),
            hearing_type,
            hearing_type_inferred: false,
            date: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Person {
    pub person_id: String,
    pub display_name: String,
    pub surname: String,
    pub role: Role,
    pub party: Party,
    #[serde(default)]
    pub chamber: Option<Chamber>,
    pub standing: Standing,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    /// Party an Independent caucuses with, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caucus: Option<Party>,
}

impl Person {
    pub fn validate(&self) -> Result<()> {
        let bad = |message: &str| Error::Invariant {
            id: self.person_id.clone(),
            message: message.to_string(),
        };
        if self.person_id.is_empty() {
            return Err(bad("person_id must be non-empty"));
        }
        match self.role {
            Role::Witness => {
                if self.party != Party::None || self.standing != Standing::NotApplicable {
                    return Err(bad("witnesses carry no party and no standing"));
                }
            }
            Role::Member => {
                if self.party == Party::None {
                    return Err(bad("members must have a party"));
                }
            }
            Role::Unknown => {}
        }
        Ok(())
    }
}

/// People present at one hearing with a surname / full-name lookup index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roster {
    pub hearing_id: String,
    pub people: Vec<Person>,
    /// Normalized surname or full name → person ids carrying it. More than
    /// one id marks an ambiguous name.
    pub name_index: BTreeMap<String, Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct RosterRecord {
    hearing_id: String,
    people: Vec<Person>,
}

impl Roster {
    pub fn new(hearing_id: impl Into<String>, people: Vec<Person>) -> Result<Self> {
        let hearing_id = hearing_id.into();
        let mut seen = BTreeSet::new();
        let mut name_index: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for p in &people {
            p.validate()?;
            if !seen.insert(p.person_id.clone()) {
                return Err(Error::Invariant {
                    id: p.person_id.clone(),
                    message: format!("duplicate person_id in roster of `{hearing_id}`"),
                });
            }
            let mut keys = BTreeSet::new();
            keys.insert(normalize_name(&p.surname));
            keys.insert(normalize_name(&p.display_name));
            for k in keys.into_iter().filter(|k| !k.is_empty()) {
                name_index.entry(k).or_default().push(p.person_id.clone());
            }
        }
        Ok(Roster {
            hearing_id,
            people,
            name_index,
        })
    }

    pub fn person(&self, person_id: &str) -> Option<&Person> {
        self.people.iter().find(|p| p.person_id == person_id)
    }

    pub fn role_of(&self, person_id: &str) -> Role {
        self.person(person_id).map_or(Role::Unknown, |p| p.role)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rec: RosterRecord = parse_json_record(&text, path, 1)?;
        Roster::new(rec.hearing_id, rec.people)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let rec = RosterRecord {
            hearing_id: self.hearing_id.clone(),
            people: self.people.clone(),
        };
        let mut s = serde_json::to_string_pretty(&rec).expect("roster serializes");
        s.push('\n');
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Utterance {
    pub utterance_id: String,
    pub hearing_id: String,
    pub sequence_no: u32,
    /// `None` is the Unknown speaker.
    pub speaker: Option<String>,
    pub raw_marker: String,
    pub text: String,
    #[serde(default)]
    pub qa_label: QaLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub pair_id: String,
    pub question_utterance_id: String,
    pub answer_utterance_id: String,
    pub questioner: String,
    pub answerer: String,
}

/// A hearing's metadata together with its ordered utterances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hearing {
    pub meta: HearingMeta,
    pub utterances: Vec<Utterance>,
}

/// Check the per-hearing utterance invariants: matching hearing id,
/// gap-free sequence numbers starting at 0, and no marker left in the text.
pub fn validate_hearing(hearing: &Hearing) -> Result<()> {
    let id = &hearing.meta.hearing_id;
    if id.trim().is_empty() {
        return Err(Error::Invariant {
            id: String::new(),
            message: "hearing_id must be non-empty".into(),
        });
    }
    if id.contains(['/', '\\']) || id == "." || id == ".." {
        return Err(Error::Invariant {
            id: id.clone(),
            message: "hearing_id is not usable as a directory name".into(),
        });
    }
    for (i, u) in hearing.utterances.iter().enumerate() {
        let fail = |message: String| Error::Invariant {
            id: u.utterance_id.clone(),
            message,
        };
        if u.hearing_id != *id {
            return Err(fail(format!(
                "belongs to hearing `{}` but stored under `{id}`",
                u.hearing_id
            )));
        }
        if u.sequence_no as usize != i {
            return Err(fail(format!(
                "sequence_no {} where {i} was expected (sequence must be gap-free from 0)",
                u.sequence_no
            )));
        }
        if !u.raw_marker.is_empty() && u.text.starts_with(&u.raw_marker) {
            return Err(fail("text still carries its speaker marker".into()));
        }
    }
    Ok(())
}

/// Write a corpus to `root`. All hearings are validated before anything
/// is written.
pub fn store_corpus(hearings: &[Hearing], root: &Path) -> Result<()> {
    let mut ids = BTreeSet::new();
    for h in hearings {
        validate_hearing(h)?;
        if !ids.insert(h.meta.hearing_id.as_str()) {
            return Err(Error::Invariant {
                id: h.meta.hearing_id.clone(),
                message: "duplicate hearing_id in corpus".into(),
            });
        }
    }
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    for h in hearings {
        store_hearing(h, root)?;
    }
    Ok(())
}

fn store_hearing(h: &Hearing, root: &Path) -> Result<()> {
    let dir = root.join(&h.meta.hearing_id);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let meta_path = dir.join(META_FILE);
    let mut meta = serde_json::to_string(&h.meta).expect("meta serializes");
    meta.push('\n');
    fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))?;

    let utt_path = dir.join(UTTERANCES_FILE);
    let file = fs::File::create(&utt_path).map_err(|e| Error::io(&utt_path, e))?;
    let mut w = BufWriter::new(file);
    for u in &h.utterances {
        serde_json::to_writer(&mut w, u).expect("utterance serializes");
        w.write_all(b"\n").map_err(|e| Error::io(&utt_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&utt_path, e))
}

/// Read a corpus store. Hearings come back ordered by `hearing_id`,
/// utterances by `sequence_no`.
pub fn load_corpus(root: &Path) -> Result<Vec<Hearing>> {
    let mut hearings = Vec::new();
    for dir in hearing_dirs(root)? {
        let meta_path = dir.join(META_FILE);
        let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: HearingMeta = parse_json_record(meta_text.trim_end(), &meta_path, 1)?;

        let utt_path = dir.join(UTTERANCES_FILE);
        let mut utterances: Vec<Utterance> = read_jsonl(&utt_path)?;
        utterances.sort_by_key(|u| u.sequence_no);
        let hearing = Hearing { meta, utterances };
        validate_hearing(&hearing)?;
        hearings.push(hearing);
    }
    hearings.sort_by(|a, b| a.meta.hearing_id.cmp(&b.meta.hearing_id));
    Ok(hearings)
}

/// Load every `roster.json` in the store, keyed by hearing id.
pub fn load_rosters(root: &Path) -> Result<BTreeMap<String, Roster>> {
    let mut out = BTreeMap::new();
    for dir in hearing_dirs(root)? {
        let path = dir.join(ROSTER_FILE);
        if path.exists() {
            let r = Roster::load(&path)?;
            out.insert(r.hearing_id.clone(), r);
        }
    }
    Ok(out)
}

pub fn store_roster(roster: &Roster, root: &Path) -> Result<()> {
    let dir = root.join(&roster.hearing_id);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    roster.save(&dir.join(ROSTER_FILE))
}

fn hearing_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        if path.is_dir() && path.join(META_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Parse one JSON record, reporting the offending field path on failure.
pub(crate) fn parse_json_record<T: DeserializeOwned>(
    text: &str,
    file: &Path,
    line: usize,
) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let field = if field == "." { "<record>".to_string() } else { field };
        Error::record(file, line, field, e.inner().to_string())
    })
}

/// Read a JSON-lines file. Blank lines are skipped; line numbers in errors
/// are 1-based.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_json_record(&line, path, i + 1)?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).expect("record serializes");
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Which party controlled the presidency and each chamber in a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GovernmentRecord")]
pub struct GovernmentContext {
    pub session: u32,
    pub president_party: Party,
    pub house_majority: Party,
    pub senate_majority: Party,
    pub unified: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GovernmentRecord {
    session: u32,
    president_party: Party,
    house_majority: Party,
    senate_majority: Party,
    #[serde(default)]
    unified: Option<bool>,
}

impl TryFrom<GovernmentRecord> for GovernmentContext {
    type Error = String;

    fn try_from(r: GovernmentRecord) -> std::result::Result<Self, String> {
        if !matches!(r.president_party, Party::Democrat | Party::Republican) {
            return Err("president_party must be Democrat or Republican".into());
        }
        let ctx = GovernmentContext::new(
            r.session,
            r.president_party,
            r.house_majority,
            r.senate_majority,
        );
        match r.unified {
            Some(u) if u != ctx.unified => Err(format!(
                "unified={u} contradicts the party control of session {}",
                r.session
            )),
            _ => Ok(ctx),
        }
    }
}

impl GovernmentContext {
    pub fn new(session: u32, president: Party, house: Party, senate: Party) -> Self {
        GovernmentContext {
            session,
            president_party: president,
            house_majority: house,
            senate_majority: senate,
            unified: president == house && house == senate,
        }
    }

    pub fn majority_of(&self, chamber: Chamber) -> Option<Party> {
        match chamber {
            Chamber::House => Some(self.house_majority),
            Chamber::Senate => Some(self.senate_majority),
            Chamber::Joint => None,
        }
    }
}

impl fmt::Display for GovernmentContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "session {}: president {}, house {}, senate {} ({})",
            self.session,
            self.president_party.code(),
            self.house_majority.code(),
            self.senate_majority.code(),
            if self.unified { "unified" } else { "divided" }
        )
    }
}

/// Whether the member's party holds the majority of the chamber the
/// hearing belongs to. Joint hearings use the member's own chamber.
/// Independents count with their caucus party when one is known and as
/// minority otherwise.
pub fn derive_standing(
    person: &Person,
    meta: &HearingMeta,
    ctx: &GovernmentContext,
) -> Result<Standing> {
    if person.role != Role::Member {
        return Err(Error::Standing(format!(
            "`{}` is not a committee member",
            person.person_id
        )));
    }
    if ctx.session != meta.session {
        return Err(Error::Standing(format!(
            "context is for session {} but hearing `{}` is in session {}",
            ctx.session, meta.hearing_id, meta.session
        )));
    }
    let chamber = match meta.chamber {
        Chamber::Joint => match person.chamber {
            Some(c @ (Chamber::House | Chamber::Senate)) => c,
            _ => {
                return Err(Error::Standing(format!(
                    "chamber of `{}` unknown for joint hearing `{}`",
                    person.person_id, meta.hearing_id
                )))
            }
        },
        c => c,
    };
    let majority = ctx.majority_of(chamber).expect("house or senate");
    let effective = match person.party {
        Party::Independent => person.caucus,
        p => Some(p),
    };
    Ok(if effective == Some(majority) {
        Standing::Majority
    } else {
        Standing::Minority
    })
}

/// Per-session government contexts plus per-person caucus overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GovernmentConfig {
    pub sessions: Vec<GovernmentContext>,
    #[serde(default)]
    pub caucus_overrides: BTreeMap<String, Party>,
}

impl GovernmentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: GovernmentConfig = parse_json_record(&text, path, 1)?;
        let mut seen = BTreeSet::new();
        for s in &cfg.sessions {
            if !seen.insert(s.session) {
                return Err(Error::Config(format!(
                    "{}: session {} listed twice",
                    path.display(),
                    s.session
                )));
            }
        }
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self).expect("government serializes");
        s.push('\n');
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn context(&self, session: u32) -> Option<&GovernmentContext> {
        self.sessions.iter().find(|c| c.session == session)
    }

    /// Standing of `person` at `meta`, applying any caucus override first.
    pub fn standing(&self, person: &Person, meta: &HearingMeta) -> Result<Standing> {
        let ctx = self.context(meta.session).ok_or_else(|| {
            Error::Standing(format!("no government context for session {}", meta.session))
        })?;
        match self.caucus_overrides.get(&person.person_id) {
            Some(c) => {
                let mut p = person.clone();
                p.caucus = Some(*c);
                derive_standing(&p, meta, ctx)
            }
            None => derive_standing(person, meta, ctx),
        }
    }
}
