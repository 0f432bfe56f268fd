//! Synthetic hearings with known utterance boundaries, plus synthetic
//! question/answer training text. Used for golden fixtures, the smoke
//! pipeline and segmentation scoring.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    Chamber, Gender, GovernmentConfig, GovernmentContext, Hearing, HearingMeta, HearingType, Party,
    Person, QaLabel, QaPair, Role, Roster, Standing,
};
use crate::error::Result;
use crate::qa::{pair_qa, LabeledText, QaClass, Source};
use crate::rng::{derive_seed, rng_from_seed};
use crate::segment::verify::Verdict;
use crate::segment::{segment_hearing, HeuristicRecognizer, SegmentedHearing, SegmenterRules};

/// Party control for sessions 108 through 117.
pub fn government_table() -> GovernmentConfig {
    use Party::{Democrat as D, Republican as R};
    let rows = [
        (108, R, R, R),
        (109, R, R, R),
        (110, R, D, D),
        (111, D, D, D),
        (112, D, R, D),
        (113, D, R, D),
        (114, D, R, R),
        (115, R, R, R),
        (116, R, D, R),
        (117, D, D, D),
    ];
    GovernmentConfig {
        sessions: rows
            .iter()
            .map(|&(s, p, h, se)| GovernmentContext::new(s, p, h, se))
            .collect(),
        caucus_overrides: BTreeMap::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub hearings: usize,
    pub sessions: Vec<u32>,
    pub min_exchanges: usize,
    pub max_exchanges: usize,
    /// Vary marker honorifics and case within a hearing, add traps for
    /// the marker patterns.
    pub adversarial: bool,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            hearings: 3,
            sessions: vec![114, 115, 116, 117],
            min_exchanges: 6,
            max_exchanges: 12,
            adversarial: true,
        }
    }
}

/// One utterance as written into the transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrueUtterance {
    pub raw_marker: String,
    /// Person who actually speaks.
    pub author: String,
    /// What a roster lookup of `raw_marker` should give (`None` for role
    /// markers such as "The Chairman").
    pub expected_speaker: Option<String>,
    pub text: String,
    pub label: QaLabel,
    /// 1-based line of the marker in the raw transcript.
    pub line_no: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticHearing {
    pub meta: HearingMeta,
    pub roster: Roster,
    pub raw: String,
    pub truth: Vec<TrueUtterance>,
}

const FIRST_MALE: &[&str] = &[
    "John", "Robert", "James", "Michael", "David", "Thomas", "Daniel", "Mark", "Paul", "Steven",
    "Kevin", "Brian", "Gregory", "Raymond", "Carlos", "Henry",
];
const FIRST_FEMALE: &[&str] = &[
    "Mary", "Patricia", "Linda", "Barbara", "Susan", "Karen", "Nancy", "Lisa", "Carolyn", "Sheila",
    "Diana", "Maria", "Grace", "Elena", "Joyce", "Ruth",
];
const SURNAMES: &[&str] = &[
    "Whitfield", "Brennan", "Okafor", "Castillo", "Lindqvist", "Harrow", "Pemberton", "Vance",
    "Delgado", "Thornton", "Kowalski", "Ashby", "Nakamura", "Fairbanks", "Rutherford", "Quinlan",
    "Mercer", "Galloway", "Holloway", "Sandoval", "Prescott", "Whitaker", "Abernathy", "Calloway",
    "Jackson Lee", "Van Hollen", "De La Rosa", "O'Malley", "Smith-Barnes", "McAllister",
    "Ferreira", "Baptiste", "Lindgren", "Ostrowski", "Yamamoto", "Winslow", "Carrington", "Duval",
    "Esposito", "Hargrove",
];
const STATES: &[(&str, &str)] = &[
    ("Texas", "TX"),
    ("Ohio", "OH"),
    ("New Jersey", "NJ"),
    ("California", "CA"),
    ("Georgia", "GA"),
    ("New York", "NY"),
    ("Florida", "FL"),
    ("Michigan", "MI"),
];
const COMMITTEES: &[&str] = &[
    "Oversight and Reform",
    "Energy and Commerce",
    "Judiciary",
    "Homeland Security",
    "Armed Services",
    "Foreign Affairs",
];
const AGENCIES: &[&str] = &[
    "the Department", "the agency", "the Bureau", "the Administration", "your office",
    "the Service",
];
const WITNESS_TITLES: &[&str] = &["Secretary", "Director", "Administrator", "Commissioner"];

const NEUTRAL_TOPICS: &[&str] = &[
    "the budget request", "the audit findings", "the procurement process", "staffing levels",
    "the inspector general report", "the implementation timeline", "the data systems",
    "the grant program",
];
const DEM_TOPICS: &[&str] = &[
    "climate resilience", "affordable health care", "voting rights", "working families",
    "clean energy jobs", "environmental justice", "student debt relief", "public health equity",
];
const REP_TOPICS: &[&str] = &[
    "border security", "taxpayer dollars", "regulatory overreach", "energy independence",
    "inflation and spending", "small business burdens", "law enforcement support",
    "government waste",
];

fn pick<'a, T: ?Sized>(rng: &mut ChaCha8Rng, items: &'a [&'a T]) -> &'a T {
    items[rng.gen_range(0..items.len())]
}

fn topic(rng: &mut ChaCha8Rng, party: Party) -> &'static str {
    let flavored = rng.gen_bool(0.6);
    match party {
        Party::Democrat | Party::Independent if flavored => pick(rng, DEM_TOPICS),
        Party::Republican if flavored => pick(rng, REP_TOPICS),
        _ => pick(rng, NEUTRAL_TOPICS),
    }
}

fn question_sentence(rng: &mut ChaCha8Rng, party: Party) -> String {
    let t = topic(rng, party);
    let a = pick(rng, AGENCIES);
    let n = rng.gen_range(2..40);
    let year = rng.gen_range(2005..2023);
    match rng.gen_range(0..9) {
        0 => format!("What is {a} doing about {t}?"),
        1 => format!("How many people has {a} assigned to {t} since {year}?"),
        2 => format!("Why did {a} wait {n} months to act on {t}?"),
        3 => format!("Can you explain how {t} fits into the plan for next year?"),
        4 => format!("Will you commit to giving this committee a full briefing on {t}?"),
        5 => format!("Is it true that {a} ignored {n} warnings about {t}?"),
        6 => format!("Who approved the decision on {t} in {year}?"),
        7 => format!("Do you believe {a} has the authority it needs on {t}?"),
        _ => format!("When will {a} finally deliver the report on {t}?"),
    }
}

fn answer_sentence(rng: &mut ChaCha8Rng, party: Party) -> String {
    let t = topic(rng, party);
    let a = pick(rng, AGENCIES);
    let n = rng.gen_range(2..90);
    match rng.gen_range(0..9) {
        0 => format!("We have assigned {n} staff to {t} and expect results this fall."),
        1 => format!("I would be happy to follow up with your office on {t}."),
        2 => format!("That decision was made before I arrived, but I have reviewed it closely."),
        3 => format!("Our records show {n} open cases related to {t}."),
        4 => format!("Yes, and we are working with {a} to close the remaining gaps."),
        5 => format!("No, that is not accurate, and I can provide the documents."),
        6 => format!("The guidance on {t} was issued in March 2019 and updated last year."),
        7 => format!("We share the concern and have asked for {n} million dollars in the request."),
        _ => format!("I do not have that figure with me today, but I will get it to you."),
    }
}

fn statement_sentence(rng: &mut ChaCha8Rng, party: Party) -> String {
    let t = topic(rng, party);
    match rng.gen_range(0..6) {
        0 => format!("Today we examine {t} and what it means for the American people."),
        1 => format!("I thank the witnesses for being here to discuss {t}."),
        2 => "Without objection, all members will have five legislative days to submit remarks."
            .to_string(),
        3 => format!("This hearing matters because {t} affects every district in this country."),
        4 => format!("I want to associate myself with the concerns raised about {t}."),
        _ => "I look forward to a productive conversation this morning.".to_string(),
    }
}

#[derive(Debug, Clone)]
enum Token {
    Word(String),
    Stage(String),
}

type Paragraph = Vec<Token>;

fn words(s: &str) -> Vec<Token> {
    s.split_whitespace().map(|w| Token::Word(w.to_string())).collect()
}

struct Writer {
    out: String,
    line: usize,
    width: usize,
}

impl Writer {
    fn new() -> Self {
        Writer {
            out: String::new(),
            line: 1,
            width: 68,
        }
    }

    fn raw_line(&mut self, s: &str) {
        self.out.push_str(s);
        self.out.push('\n');
        self.line += 1;
    }

    /// Write one paragraph: indented first line with `lead` (marker and
    /// delimiter, if any), continuation lines flush left. `break_before`
    /// forces a line break in front of the word at that index.
    fn paragraph(&mut self, lead: &str, para: &Paragraph, break_before: &BTreeSet<usize>) {
        let mut cur = format!("    {lead}");
        let mut fresh = true;
        for (i, tok) in para.iter().enumerate() {
            let t = match tok {
                Token::Word(w) => w.as_str(),
                Token::Stage(s) => s.as_str(),
            };
            let forced = break_before.contains(&i);
            if !fresh && (forced || cur.len() + 1 + t.len() > self.width) {
                self.raw_line(&cur.clone());
                cur.clear();
                fresh = true;
            }
            if !fresh && !cur.ends_with(' ') {
                cur.push(' ');
            }
            cur.push_str(t);
            fresh = false;
        }
        self.raw_line(&cur);
    }
}

struct Cast {
    people: Vec<Person>,
    chair: usize,
    ranking: usize,
    members: Vec<usize>,
    witnesses: Vec<usize>,
    states: BTreeMap<usize, (&'static str, &'static str)>,
}

fn build_cast(rng: &mut ChaCha8Rng, meta: &HearingMeta, ctx: &GovernmentContext) -> Cast {
    let majority = ctx.majority_of(meta.chamber).unwrap_or(Party::Democrat);
    let minority = if majority == Party::Democrat {
        Party::Republican
    } else {
        Party::Democrat
    };
    let mut surnames: Vec<&str> = SURNAMES.to_vec();
    surnames.shuffle(rng);
    let mut surnames = surnames.into_iter();
    let mut people = Vec::new();
    let mut new_person = |rng: &mut ChaCha8Rng, role: Role, party: Party, idx: usize| {
        let gender = if rng.gen_bool(0.5) { Gender::Male } else { Gender::Female };
        let first = match gender {
            Gender::Male => pick(rng, FIRST_MALE),
            Gender::Female => pick(rng, FIRST_FEMALE),
        };
        let surname = surnames.next().expect("enough surnames");
        let standing = match (role, party) {
            (Role::Member, Party::Independent) => Standing::Minority,
            (Role::Member, p) if p == majority => Standing::Majority,
            (Role::Member, _) => Standing::Minority,
            _ => Standing::NotApplicable,
        };
        let tag = if role == Role::Member { "m" } else { "w" };
        Person {
            person_id: format!("{}-{tag}{idx}", meta.hearing_id),
            display_name: format!("{first} {surname}"),
            surname: surname.to_string(),
            role,
            party,
            chamber: (role == Role::Member).then_some(meta.chamber),
            standing,
            gender: Some(gender),
            caucus: (party == Party::Independent).then_some(Party::Democrat),
        }
    };
    people.push(new_person(rng, Role::Member, majority, 0));
    people.push(new_person(rng, Role::Member, minority, 1));
    let extra = rng.gen_range(2..=5);
    for i in 0..extra {
        let party = if meta.chamber == Chamber::Senate && rng.gen_bool(0.1) {
            Party::Independent
        } else if i % 2 == 0 {
            majority
        } else {
            minority
        };
        people.push(new_person(rng, Role::Member, party, i + 2));
    }
    let n_members = people.len();
    for i in 0..rng.gen_range(1..=3) {
        people.push(new_person(rng, Role::Witness, Party::None, i));
    }
    // Independents caucusing with the majority hold majority standing.
    for p in &mut people {
        if p.party == Party::Independent && p.caucus == Some(majority) {
            p.standing = Standing::Majority;
        }
    }
    let mut states = BTreeMap::new();
    for i in 0..n_members {
        states.insert(i, STATES[rng.gen_range(0..STATES.len())]);
    }
    Cast {
        chair: 0,
        ranking: 1,
        members: (0..n_members).collect(),
        witnesses: (n_members..people.len()).collect(),
        people,
        states,
    }
}

fn honorific(p: &Person) -> &'static str {
    match p.gender {
        Some(Gender::Female) => "Ms.",
        _ => "Mr.",
    }
}

/// Marker for person `i`. The consistent form follows the usual layout
/// (title plus capitalized surname); adversarial forms vary honorific and
/// case from one utterance to the next.
fn marker(rng: &mut ChaCha8Rng, cast: &Cast, i: usize, chamber: Chamber, adversarial: bool) -> (String, bool) {
    let p = &cast.people[i];
    let upper = p.surname.to_uppercase();
    let is_member = p.role == Role::Member;
    let chair_title = match p.gender {
        Some(Gender::Female) => "Chairwoman",
        _ => "Chairman",
    };
    let base = if i == cast.chair {
        format!("{chair_title} {upper}")
    } else if is_member && chamber == Chamber::Senate {
        format!("Senator {upper}")
    } else {
        format!("{} {upper}", honorific(p))
    };
    if !adversarial || rng.gen_bool(0.4) {
        return (base, true);
    }
    let (state, code) = cast.states.get(&i).copied().unwrap_or(("Ohio", "OH"));
    let hon = honorific(p);
    let options: Vec<(String, bool)> = if i == cast.chair {
        vec![
            ("The Chairman".into(), false),
            (format!("{chair_title} {}", p.surname), true),
            (format!("{} {}", chair_title.to_uppercase(), upper), true),
            (format!("{hon} {}", p.surname), true),
        ]
    } else if is_member {
        vec![
            (format!("{hon} {}", p.surname), true),
            (format!("{} {upper}", hon.to_uppercase()), true),
            (format!("{hon} {} of {state}", p.surname), true),
            (format!("{hon} {upper} ({}-{code})", p.party.code()), true),
            if chamber == Chamber::Senate {
                (format!("Senator {}", p.surname), true)
            } else {
                (format!("Representative {}", p.surname), true)
            },
        ]
    } else {
        vec![
            (format!("{hon} {}", p.surname), true),
            (format!("{} {upper}", hon.to_uppercase()), true),
            (format!("Dr. {upper}"), true),
            (format!("{} {upper}", pick(rng, WITNESS_TITLES)), true),
            (p.display_name.to_uppercase(), true),
        ]
    };
    options[rng.gen_range(0..options.len())].clone()
}

struct Turn {
    who: usize,
    label: QaLabel,
    paragraphs: Vec<Paragraph>,
}

fn speech(rng: &mut ChaCha8Rng, n: usize, mut sentence: impl FnMut(&mut ChaCha8Rng) -> String) -> Paragraph {
    let mut p = Vec::new();
    for _ in 0..n {
        p.extend(words(&sentence(rng)));
    }
    p
}

fn sprinkle_stage(rng: &mut ChaCha8Rng, para: &mut Paragraph) {
    if rng.gen_bool(0.12) && para.len() > 3 {
        let at = rng.gen_range(1..para.len());
        let s = if rng.gen_bool(0.5) { "[Laughter.]" } else { "[Inaudible.]" };
        para.insert(at, Token::Stage(s.into()));
    }
}

fn plan_turns(rng: &mut ChaCha8Rng, cast: &Cast, spec: &SynthSpec, adversarial: bool) -> Vec<Turn> {
    let party = |i: usize| cast.people[i].party;
    let chair = cast.chair;
    let mut turns = Vec::new();
    let mut opening = vec![{
        let mut p = words("The committee will come to order.");
        p.extend(speech(rng, 2, |r| statement_sentence(r, party(chair))));
        p
    }];
    if adversarial {
        // Paragraph starts that look like markers but are not.
        let ranking = &cast.people[cast.ranking];
        opening.push(words(&format!(
            "Representative {} asked for this hearing last year, and I agree it is overdue.",
            ranking.surname
        )));
    }
    turns.push(Turn { who: chair, label: QaLabel::Other, paragraphs: opening });
    turns.push(Turn {
        who: cast.ranking,
        label: QaLabel::Other,
        paragraphs: vec![speech(rng, 3, |r| statement_sentence(r, party(cast.ranking)))],
    });
    for &w in &cast.witnesses {
        let name = &cast.people[w];
        let mut paras = vec![speech(rng, 3, |r| answer_sentence(r, Party::None))];
        paras.push(vec![Token::Stage(format!(
            "[The prepared statement of {} {} follows:]",
            honorific(name),
            name.surname
        ))]);
        turns.push(Turn { who: w, label: QaLabel::Other, paragraphs: paras });
    }
    let exchanges = rng.gen_range(spec.min_exchanges..=spec.max_exchanges);
    for _ in 0..exchanges {
        let m = cast.members[rng.gen_range(0..cast.members.len())];
        let w = cast.witnesses[rng.gen_range(0..cast.witnesses.len())];
        let mut q = {
            let n = rng.gen_range(0..2);
            speech(rng, n, |r| statement_sentence(r, party(m)))
        };
        if adversarial && rng.gen_bool(0.3) {
            let other = &cast.people[cast.members[rng.gen_range(0..cast.members.len())]];
            q.extend(words(&format!(
                "I agree with {} {}. Senator {} made the same point.",
                honorific(other),
                other.surname,
                other.surname
            )));
        }
        let n = rng.gen_range(1..3);
        q.extend(speech(rng, n, |r| question_sentence(r, party(m))));
        sprinkle_stage(rng, &mut q);
        let mut q_paras = vec![q];
        if adversarial && rng.gen_bool(0.2) {
            let mut second = words("Mr. Chairman, if I may, one more point.");
            second.extend(words(&question_sentence(rng, party(m))));
            q_paras.push(second);
        }
        turns.push(Turn { who: m, label: QaLabel::Question, paragraphs: q_paras });
        let mut a = {
            let n = rng.gen_range(1..4);
            speech(rng, n, |r| answer_sentence(r, party(m)))
        };
        sprinkle_stage(rng, &mut a);
        turns.push(Turn { who: w, label: QaLabel::Answer, paragraphs: vec![a] });
        if rng.gen_bool(0.25) {
            turns.push(Turn {
                who: m,
                label: QaLabel::Other,
                paragraphs: vec![words("Thank you. I yield back.")],
            });
        }
    }
    turns.push(Turn {
        who: chair,
        label: QaLabel::Other,
        paragraphs: vec![
            words("I thank the witnesses for their testimony. The hearing record will remain open for ten days."),
            vec![Token::Stage("[Whereupon, at 12:14 p.m., the committee was adjourned.]".into())],
        ],
    });
    turns
}

fn preamble(w: &mut Writer, meta: &HearingMeta, cast: &Cast) {
    let chamber = match meta.chamber {
        Chamber::House => "House",
        Chamber::Senate => "Senate",
        Chamber::Joint => "Joint",
    };
    w.raw_line(&format!("[{chamber} Hearing, {} Congress]", meta.session));
    w.raw_line("[From the U.S. Government Publishing Office]");
    w.raw_line("");
    w.raw_line("");
    w.raw_line(&format!("                         {}", meta.committee.to_uppercase()));
    w.raw_line("");
    w.raw_line("                                HEARING");
    w.raw_line("");
    w.raw_line("    Members present:");
    for &m in &cast.members {
        w.raw_line(&format!("        {}", cast.people[m].display_name));
    }
    w.raw_line("");
    let chair = &cast.people[cast.chair];
    w.raw_line(&format!(
        "    The committee met, pursuant to notice, at 10:02 a.m., in Room 2154, Hon. {}",
        chair.display_name
    ));
    w.raw_line("[chairman of the committee] presiding.");
}

/// Generate one hearing. Utterance texts in `truth` are the spoken words
/// joined by single spaces, stage directions excluded.
pub fn synth_hearing(
    hearing_id: &str,
    meta_session: u32,
    chamber: Chamber,
    committee: &str,
    hearing_type: HearingType,
    government: &GovernmentConfig,
    spec: &SynthSpec,
    seed: u64,
) -> Result<SyntheticHearing> {
    let mut rng = rng_from_seed(seed);
    let meta = HearingMeta::new(hearing_id, meta_session, chamber, committee, hearing_type);
    let ctx = *government.context(meta_session).ok_or_else(|| {
        crate::Error::Standing(format!("no government context for session {meta_session}"))
    })?;
    let cast = build_cast(&mut rng, &meta, &ctx);
    let turns = plan_turns(&mut rng, &cast, spec, spec.adversarial);

    let mut w = Writer::new();
    preamble(&mut w, &meta, &cast);
    let mut truth = Vec::with_capacity(turns.len());
    for turn in turns {
        let (raw_marker, resolvable) = marker(&mut rng, &cast, turn.who, chamber, spec.adversarial);
        let line_no = w.line;
        let mut text_words = Vec::new();
        for (k, para) in turn.paragraphs.iter().enumerate() {
            let mut breaks = BTreeSet::new();
            if spec.adversarial {
                // A wrapped line that begins like a marker, flush left.
                for (i, t) in para.iter().enumerate() {
                    if let Token::Word(wd) = t {
                        if i > 0 && (wd == "Senator" || wd == "Mr.") && rng.gen_bool(0.7) {
                            breaks.insert(i);
                        }
                    }
                }
            }
            let lead = if k == 0 { format!("{raw_marker}. ") } else { String::new() };
            w.paragraph(&lead, para, &breaks);
            text_words.extend(para.iter().filter_map(|t| match t {
                Token::Word(wd) => Some(wd.clone()),
                Token::Stage(_) => None,
            }));
        }
        let author = cast.people[turn.who].person_id.clone();
        truth.push(TrueUtterance {
            raw_marker,
            expected_speaker: resolvable.then(|| author.clone()),
            author,
            text: text_words.join(" "),
            label: turn.label,
            line_no,
        });
    }
    w.raw_line("");
    w.raw_line("                                 <all>");
    let roster = Roster::new(hearing_id, cast.people)?;
    Ok(SyntheticHearing { meta, roster, raw: w.out, truth })
}

/// A corpus of `spec.hearings` hearings cycling through sessions,
/// chambers, committees and hearing types. Hearing `i` uses a seed derived
/// from `seed` and `i`, so corpora of different sizes share a prefix.
pub fn synth_corpus(spec: &SynthSpec, seed: u64) -> Result<Vec<SyntheticHearing>> {
    let gov = government_table();
    let types = [
        HearingType::Oversight,
        HearingType::General,
        HearingType::Authorization,
        HearingType::Nomination,
        HearingType::Field,
    ];
    (0..spec.hearings)
        .map(|i| {
            let session = spec.sessions[i % spec.sessions.len()];
            let chamber = if i % 3 == 2 { Chamber::Senate } else { Chamber::House };
            let id = format!("CHRG-{session}{}hrg{:05}", chamber_tag(chamber), 10_000 + i);
            synth_hearing(
                &id,
                session,
                chamber,
                COMMITTEES[i % COMMITTEES.len()],
                types[i % types.len()],
                &gov,
                spec,
                derive_seed(seed, i as u64),
            )
        })
        .collect()
}

fn chamber_tag(c: Chamber) -> &'static str {
    match c {
        Chamber::House => "h",
        Chamber::Senate => "s",
        Chamber::Joint => "j",
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryScore {
    pub true_utterances: usize,
    pub predicted_utterances: usize,
    /// Predicted utterances whose marker line, marker and text all match
    /// a true utterance.
    pub exact: usize,
}

impl BoundaryScore {
    /// Exact matches over the larger of the true and predicted counts.
    pub fn accuracy(&self) -> f64 {
        let denom = self.true_utterances.max(self.predicted_utterances);
        if denom == 0 {
            1.0
        } else {
            self.exact as f64 / denom as f64
        }
    }

    pub fn merge(&mut self, other: BoundaryScore) {
        self.true_utterances += other.true_utterances;
        self.predicted_utterances += other.predicted_utterances;
        self.exact += other.exact;
    }
}

fn predicted_lines(seg: &SegmentedHearing) -> Vec<usize> {
    let offset = seg.trimmed.head_lines();
    seg.segmentation.segments.iter().map(|s| s.line_no + offset).collect()
}

pub fn score_boundaries(truth: &[TrueUtterance], seg: &SegmentedHearing) -> BoundaryScore {
    let by_line: BTreeMap<usize, &TrueUtterance> = truth.iter().map(|t| (t.line_no, t)).collect();
    let lines = predicted_lines(seg);
    let exact = seg
        .hearing
        .utterances
        .iter()
        .zip(&lines)
        .filter(|(u, line)| {
            by_line
                .get(line)
                .is_some_and(|t| t.raw_marker == u.raw_marker && t.text == u.text)
        })
        .count();
    BoundaryScore {
        true_utterances: truth.len(),
        predicted_utterances: lines.len(),
        exact,
    }
}

/// Verdict for every predicted utterance, as an annotator comparing against
/// the truth would give it: `Clubbed` when its span holds more than one
/// true marker line, `Broken` when it holds none or cuts a true utterance
/// short, `Correct` otherwise.
pub fn derive_verdicts(truth: &[TrueUtterance], seg: &SegmentedHearing) -> Vec<(String, Verdict)> {
    let true_lines: Vec<usize> = truth.iter().map(|t| t.line_no).collect();
    let by_line: BTreeMap<usize, &TrueUtterance> = truth.iter().map(|t| (t.line_no, t)).collect();
    let lines = predicted_lines(seg);
    seg.hearing
        .utterances
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let start = lines[i];
            let end = lines.get(i + 1).copied().unwrap_or(usize::MAX);
            let inside = true_lines.iter().filter(|&&l| l >= start && l < end).count();
            let verdict = match inside {
                0 => Verdict::Broken,
                1 => match by_line.get(&start) {
                    Some(t) if t.text == u.text && t.raw_marker == u.raw_marker => Verdict::Correct,
                    Some(_) => Verdict::Broken,
                    None => Verdict::Clubbed,
                },
                _ => Verdict::Clubbed,
            };
            (u.utterance_id.clone(), verdict)
        })
        .collect()
}

/// A synthetic corpus segmented with the bundled rules, with question and
/// answer labels copied from the ground truth, plus its Q/A pairs.
#[derive(Debug, Clone)]
pub struct LabeledSynth {
    pub hearings: Vec<Hearing>,
    pub rosters: BTreeMap<String, Roster>,
    pub pairs: Vec<QaPair>,
    pub government: GovernmentConfig,
}

/// Labels go to predicted utterances whose marker line starts a true
/// utterance; anything else stays unlabeled.
pub fn labeled_corpus(spec: &SynthSpec, seed: u64) -> Result<LabeledSynth> {
    let mut out = LabeledSynth {
        hearings: Vec::new(),
        rosters: BTreeMap::new(),
        pairs: Vec::new(),
        government: government_table(),
    };
    for h in synth_corpus(spec, seed)? {
        let seg = segment_hearing(
            &h.raw,
            &h.meta,
            &h.roster,
            SegmenterRules::default_rules(),
            &HeuristicRecognizer,
        )?;
        let by_line: BTreeMap<usize, QaLabel> = h.truth.iter().map(|t| (t.line_no, t.label)).collect();
        let mut hearing = seg.hearing.clone();
        for (u, line) in hearing.utterances.iter_mut().zip(predicted_lines(&seg)) {
            if let Some(l) = by_line.get(&line) {
                u.qa_label = *l;
            }
        }
        out.pairs.extend(pair_qa(&hearing.utterances, &h.roster).pairs);
        out.rosters.insert(h.meta.hearing_id.clone(), h.roster);
        out.hearings.push(hearing);
    }
    Ok(out)
}

const AMA_Q: &[&str] = &[
    "What got you interested in {t} in the first place?",
    "How do you deal with burnout when working on {t}?",
    "If you could change one thing about {t}, what would it be?",
    "Do you think {t} will look different in ten years?",
    "Any advice for someone who wants to get into {t}?",
    "Why do so many people misunderstand {t}?",
    "What was the hardest part of writing about {t}?",
    "Which mistake in {t} taught you the most?",
    "Is there a book on {t} you would recommend to beginners?",
    "How much of your week actually goes to {t}?",
    "Where do you see the biggest opportunity in {t}?",
    "Have you ever regretted focusing on {t}?",
    "thanks for doing this! how did you start with {t}?",
    "Who inspired your work on {t}?",
    "What do you wish more people knew about {t}?",
    "Was there a moment you almost quit {t}?",
    "How has the internet changed {t} for you?",
    "What's the weirdest thing that happened to you while doing {t}?",
];
const AMA_Q_OPEN: &[&str] = &[
    "", "", "Hi!", "Thanks for doing this.", "Long-time fan here.", "Quick one:",
    "Sorry if this was asked already.", "Hello from Brazil!",
];
const AMA_Q_CLOSE: &[&str] = &["", "", "Thanks!", "Cheers.", "Love your work.", "Thanks in advance."];
const AMA_A_OPEN: &[&str] = &["", "", "Good question.", "Ha, ", "Great question!", "Oh man.", "Honestly?"];
const AMA_A_CLOSE: &[&str] = &["", "", "Hope that helps.", "Thanks for asking.", "Cheers!", "Edit: typo."];
const AMA_A: &[&str] = &[
    "Honestly it started as a hobby and {t} just kept pulling me back in.",
    "I take long walks and try not to think about {t} on weekends.",
    "I would make {t} far more accessible to people without money.",
    "Probably, but the basics of {t} will stay the same.",
    "Start small, find a mentor and read everything you can about {t}.",
    "Most coverage of {t} skips the boring details that matter.",
    "Finding the time, to be honest. {t} eats whole weekends.",
    "Trusting early results too much. That happens a lot in {t}.",
    "There is an older textbook on {t} that still holds up well.",
    "About half, the rest is email and meetings.",
    "I think the tools for {t} are finally getting good.",
    "Not really, it has been a good ride.",
    "A friend dragged me to a meetup about {t} and I stayed.",
    "My grandmother, who did {t} long before it was cool.",
    "That it is mostly patience. {t} rewards people who stick around.",
    "Twice, but a colleague talked me out of leaving {t} both times.",
    "It made {t} much easier to learn and much harder to make a living from.",
    "Someone once mailed me a very strange package about {t}. Long story.",
];
const UKP_Q: &[&str] = &[
    "To ask the Secretary of State for {d}, what assessment he has made of {t}.",
    "To ask the Secretary of State for {d}, how many officials are working on {t}.",
    "To ask the Secretary of State for {d}, what steps her Department is taking to improve {t}.",
    "To ask the Secretary of State for {d}, whether he plans to review {t}.",
    "To ask the Secretary of State for {d}, when she expects to publish guidance on {t}.",
    "To ask the Secretary of State for {d}, what funding has been allocated to {t} in each of the last three years.",
    "To ask the Secretary of State for {d}, if he will meet campaigners to discuss {t}.",
    "Will the Minister set out what the Government are doing about {t}?",
    "Does the Secretary of State agree that {t} needs urgent attention?",
    "What recent discussions has the Minister had with local authorities on {t}?",
    "To ask the Secretary of State for {d}, pursuant to the Answer of {day} {month}, what progress has been made on {t}.",
    "To ask the Secretary of State for {d}, what estimate he has made of the cost of {t} in {year}.",
];
const UKP_CLOSE: &[&str] = &[
    "", "", "", "I will place a copy in the Library of the House.",
    "Further details will be set out at the next fiscal event.",
    "The latest figures were published on {day} {month}.",
    "I will write to the honourable Member with further details.",
];
const MONTHS: &[&str] = &["January", "February", "March", "April", "June", "July", "October", "November"];
const UKP_A: &[&str] = &[
    "The Department keeps {t} under regular review and will report in due course.",
    "Information on {t} is not held centrally.",
    "We have allocated additional funding to {t} and will set out further details shortly.",
    "Officials meet stakeholders regularly to discuss {t}.",
    "The Government published its strategy on {t} earlier this year.",
    "Guidance on {t} will be published before the summer recess.",
    "The honourable Member raises an important point about {t}, and I will write to her.",
    "Figures on {t} are published annually by the Office for National Statistics.",
    "I refer the honourable Member to the answer I gave on 4 May.",
    "My Department has no plans to change its approach to {t}.",
    "Spending on {t} rose in {year} and we expect it to rise again.",
    "The Government are committed to {t} and have set out a ten-year plan.",
];
const AMA_TOPICS: &[&str] = &[
    "astronomy", "game design", "marine biology", "stand-up comedy", "beekeeping", "chess",
    "long-distance running", "urban planning", "film scoring", "volcanology", "baking",
    "cryptography", "archaeology", "mountain rescue",
];
const UKP_TOPICS: &[&str] = &[
    "rural bus services", "flood defences", "school funding", "hospital waiting times",
    "apprenticeships", "broadband rollout", "prison capacity", "social care staffing",
    "air quality", "housing supply", "fishing quotas", "rail electrification",
];
const UKP_DEPTS: &[&str] = &[
    "Transport", "Education", "Health and Social Care", "Justice", "Work and Pensions",
    "Environment, Food and Rural Affairs", "Housing, Communities and Local Government",
];

fn fill(template: &str, rng: &mut ChaCha8Rng, topic: &str) -> String {
    template
        .replace("{t}", topic)
        .replace("{d}", pick(rng, UKP_DEPTS))
        .replace("{day}", &rng.gen_range(1..29).to_string())
        .replace("{month}", pick(rng, MONTHS))
        .replace("{year}", &rng.gen_range(2010..2024).to_string())
}

fn wrap(open: &str, body: String, close: &str) -> String {
    let mut s = String::new();
    if !open.is_empty() {
        s.push_str(open);
        if !open.ends_with(' ') {
            s.push(' ');
        }
    }
    s.push_str(&body);
    if !close.is_empty() {
        s.push(' ');
        s.push_str(close);
    }
    s
}

/// `n` labeled rows in the style of `source` (ama or ukparl), alternating
/// questions and answers.
pub fn synth_qa_rows(source: Source, n: usize, seed: u64) -> Vec<LabeledText> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 { QaClass::Question } else { QaClass::Answer };
            let text = match (source, label) {
                (Source::UkParl, QaClass::Question) => {
                    let t = pick(&mut rng, UKP_TOPICS);
                    let tpl = pick(&mut rng, UKP_Q);
                    fill(tpl, &mut rng, t)
                }
                (Source::UkParl, QaClass::Answer) => {
                    let t = pick(&mut rng, UKP_TOPICS);
                    let tpl = pick(&mut rng, UKP_A);
                    let body = fill(tpl, &mut rng, t);
                    let close = pick(&mut rng, UKP_CLOSE);
                    let close = fill(close, &mut rng, t);
                    wrap("", body, &close)
                }
                (_, QaClass::Question) => {
                    let t = pick(&mut rng, AMA_TOPICS);
                    let (o, tpl, c) = (pick(&mut rng, AMA_Q_OPEN), pick(&mut rng, AMA_Q), pick(&mut rng, AMA_Q_CLOSE));
                    wrap(o, fill(tpl, &mut rng, t), c)
                }
                (_, QaClass::Answer) => {
                    let t = pick(&mut rng, AMA_TOPICS);
                    let (o, tpl, c) = (pick(&mut rng, AMA_A_OPEN), pick(&mut rng, AMA_A), pick(&mut rng, AMA_A_CLOSE));
                    wrap(o, fill(tpl, &mut rng, t), c)
                }
            };
            LabeledText { text, label, source }
        })
        .collect()
}

/// Write training rows as CSV with a format-specific id column.
pub fn write_qa_csv(rows: &[LabeledText], out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| crate::Error::Io {
        path: "<qa csv>".into(),
        source: std::io::Error::other(e.to_string()),
    };
    let id_col = match rows.first().map(|r| r.source) {
        Some(Source::UkParl) => "uin",
        _ => "post_id",
    };
    w.write_record([id_col, "source", "text", "label"]).map_err(io)?;
    for (i, r) in rows.iter().enumerate() {
        let src = match r.source {
            Source::Ama => "ama",
            Source::UkParl => "ukparl",
            Source::HandLabeled => "hand",
        };
        let label = match r.label {
            QaClass::Question => "question",
            QaClass::Answer => "answer",
        };
        w.write_record([format!("{i:06}").as_str(), src, &r.text, label])
            .map_err(io)?;
    }
    w.flush().map_err(|e| crate::Error::io("<qa csv>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segment(h: &SyntheticHearing) -> SegmentedHearing {
        segment_hearing(
            &h.raw,
            &h.meta,
            &h.roster,
            SegmenterRules::default_rules(),
            &HeuristicRecognizer,
        )
        .unwrap()
    }

    #[test]
    fn government_table_matches_known_control() {
        let g = government_table();
        assert_eq!(g.sessions.len(), 10);
        let unified: Vec<u32> = g.sessions.iter().filter(|c| c.unified).map(|c| c.session).collect();
        assert_eq!(unified, vec![108, 109, 111, 115, 117]);
    }

    #[test]
    fn synthetic_hearings_segment_exactly() {
        let spec = SynthSpec { hearings: 8, ..SynthSpec::default() };
        for h in synth_corpus(&spec, 11).unwrap() {
            let seg = segment(&h);
            let score = score_boundaries(&h.truth, &seg);
            assert_eq!(score.exact, h.truth.len(), "{}", h.meta.hearing_id);
            assert_eq!(seg.trimmed.reconstruct(), h.raw);
            for (u, t) in seg.hearing.utterances.iter().zip(&h.truth) {
                assert_eq!(u.speaker, t.expected_speaker, "{}", t.raw_marker);
            }
            assert!(derive_verdicts(&h.truth, &seg).iter().all(|(_, v)| *v == Verdict::Correct));
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let spec = SynthSpec::default();
        assert_eq!(synth_corpus(&spec, 5).unwrap(), synth_corpus(&spec, 5).unwrap());
        assert_ne!(synth_corpus(&spec, 5).unwrap(), synth_corpus(&spec, 6).unwrap());
    }

    #[test]
    fn merged_segments_are_clubbed() {
        let spec = SynthSpec { hearings: 1, adversarial: false, ..SynthSpec::default() };
        let h = &synth_corpus(&spec, 3).unwrap()[0];
        let mut seg = segment(h);
        // Drop one boundary: the merged utterance must read as clubbed.
        seg.segmentation.segments.remove(3);
        seg.hearing.utterances.remove(3);
        let v = derive_verdicts(&h.truth, &seg);
        assert_eq!(v[2].1, Verdict::Clubbed);
        assert_eq!(v.iter().filter(|(_, v)| *v != Verdict::Correct).count(), 1);
    }

    #[test]
    fn qa_rows_are_balanced() {
        let rows = synth_qa_rows(Source::UkParl, 100, 1);
        assert_eq!(rows.iter().filter(|r| r.label == QaClass::Question).count(), 50);
        let mut buf = Vec::new();
        write_qa_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("uin,source,text,label\n"));
    }
}
