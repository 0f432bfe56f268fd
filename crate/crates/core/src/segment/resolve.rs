use std::sync::OnceLock;

use regex::Regex;

use crate::corpus::{Gender, QaLabel, Role, Roster};
use crate::text::normalize_name;

/// What the recognizer knows about the conversation so far.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RecognitionContext {
    pub previous_role: Option<Role>,
    pub previous_label: Option<QaLabel>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Resolution {
    /// `None` means the speaker stays Unknown.
    pub speaker: Option<String>,
    pub warning: Option<String>,
    /// Set when a tie-break heuristic picked the speaker.
    pub heuristic: Option<String>,
}

/// Maps a speaker marker to a roster entry. The heuristic recognizer is the
/// only built-in; model-backed recognizers plug in here.
pub trait SpeakerRecognizer: Send + Sync {
    fn recognize(&self, raw_marker: &str, roster: &Roster, ctx: &RecognitionContext)
        -> Resolution;
}

/// Roster lookup by normalized name with honorific, gender and turn-taking
/// tie-breaks for duplicate surnames.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicRecognizer;

pub fn resolve_speaker(raw_marker: &str, roster: &Roster) -> Resolution {
    HeuristicRecognizer.recognize(raw_marker, roster, &RecognitionContext::default())
}

fn affiliation_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\s+\([^)]*\)|\s+of\s+[a-z][a-z ]*$").expect("static regex"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Cues {
    gender: Option<Gender>,
    member: bool,
}

fn cues(raw_marker: &str) -> Cues {
    let first = raw_marker
        .split_whitespace()
        .next()
        .unwrap_or("")
        .trim_end_matches('.')
        .to_ascii_lowercase();
    let gender = match first.as_str() {
        "mr" | "chairman" => Some(Gender::Male),
        "mrs" | "ms" | "chairwoman" => Some(Gender::Female),
        _ => None,
    };
    let member = matches!(
        first.as_str(),
        "chairman" | "chairwoman" | "chair" | "senator" | "representative" | "ranking"
    );
    Cues { gender, member }
}

impl SpeakerRecognizer for HeuristicRecognizer {
    fn recognize(
        &self,
        raw_marker: &str,
        roster: &Roster,
        ctx: &RecognitionContext,
    ) -> Resolution {
        let without_affiliation = affiliation_re().replace_all(raw_marker, "");
        let name = normalize_name(&without_affiliation);
        if name.is_empty() || name.starts_with("the ") {
            return Resolution {
                speaker: None,
                warning: Some(format!("marker `{raw_marker}` names a role, not a person")),
                heuristic: None,
            };
        }
        let surname = name.rsplit(' ').next().unwrap_or(&name);
        let candidates = roster
            .name_index
            .get(&name)
            .or_else(|| roster.name_index.get(surname));
        let Some(candidates) = candidates else {
            return Resolution {
                speaker: None,
                warning: Some(format!("marker `{raw_marker}` not found in roster")),
                heuristic: None,
            };
        };
        if let [only] = candidates.as_slice() {
            return Resolution {
                speaker: Some(only.clone()),
                ..Resolution::default()
            };
        }

        let cue = cues(raw_marker);
        let mut pool: Vec<&String> = candidates.iter().collect();
        let narrow = |pool: &mut Vec<&String>, keep: &dyn Fn(&String) -> bool| {
            let kept: Vec<&String> = pool.iter().copied().filter(|id| keep(id)).collect();
            if !kept.is_empty() {
                *pool = kept;
            }
        };
        if let Some(g) = cue.gender {
            narrow(&mut pool, &|id| {
                roster.person(id).and_then(|p| p.gender).is_none_or(|pg| pg == g)
            });
        }
        if cue.member {
            narrow(&mut pool, &|id| roster.role_of(id) == Role::Member);
        }
        if let [only] = pool.as_slice() {
            return Resolution {
                speaker: Some((*only).clone()),
                warning: None,
                heuristic: Some(format!(
                    "`{raw_marker}` disambiguated by honorific cue to `{only}`"
                )),
            };
        }

        let after_answer = ctx.previous_label == Some(QaLabel::Answer)
            || ctx.previous_role == Some(Role::Witness);
        if after_answer {
            let members: Vec<&String> = pool
                .iter()
                .copied()
                .filter(|id| roster.role_of(id) == Role::Member)
                .collect();
            if let [only] = members.as_slice() {
                return Resolution {
                    speaker: Some((*only).clone()),
                    warning: None,
                    heuristic: Some(format!(
                        "`{raw_marker}` resolved to member `{only}` following a witness turn"
                    )),
                };
            }
        }
        Resolution {
            speaker: None,
            warning: Some(format!(
                "marker `{raw_marker}` is ambiguous between {}",
                pool.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
            )),
            heuristic: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Party, Person, Standing};

    fn person(id: &str, name: &str, role: Role, party: Party, gender: Option<Gender>) -> Person {
        Person {
            person_id: id.into(),
            display_name: name.into(),
            surname: name.rsplit(' ').next().unwrap().into(),
            role,
            party,
            chamber: None,
            standing: if role == Role::Member {
                Standing::Majority
            } else {
                Standing::NotApplicable
            },
            gender,
            caucus: None,
        }
    }

    fn roster() -> Roster {
        Roster::new(
            "h",
            vec![
                person("T1", "John Tierney", Role::Member, Party::Democrat, Some(Gender::Male)),
                person("M1", "Carolyn Maloney", Role::Member, Party::Democrat, Some(Gender::Female)),
                person("S1", "Adam Smith", Role::Member, Party::Democrat, Some(Gender::Male)),
                person("S2", "Mary Smith", Role::Witness, Party::None, Some(Gender::Female)),
                person("J1", "Tom Jones", Role::Member, Party::Republican, Some(Gender::Male)),
                person("J2", "Bob Jones", Role::Witness, Party::None, Some(Gender::Male)),
                person("L1", "Sheila Jackson Lee", Role::Member, Party::Democrat, Some(Gender::Female)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn plain_lookup() {
        assert_eq!(resolve_speaker("Mr. Tierney", &roster()).speaker.as_deref(), Some("T1"));
        assert_eq!(
            resolve_speaker("Chairwoman MALONEY", &roster()).speaker.as_deref(),
            Some("M1")
        );
        assert_eq!(
            resolve_speaker("Mr. Tierney of Massachusetts", &roster()).speaker.as_deref(),
            Some("T1")
        );
        assert_eq!(
            resolve_speaker("Ms. Jackson Lee", &roster()).speaker.as_deref(),
            Some("L1")
        );
    }

    #[test]
    fn unknown_name_warns() {
        let r = resolve_speaker("Mr. Nobody", &roster());
        assert_eq!(r.speaker, None);
        assert!(r.warning.unwrap().contains("not found"));
        assert_eq!(resolve_speaker("The Chairman", &roster()).speaker, None);
    }

    #[test]
    fn gender_cue_breaks_tie() {
        let r = resolve_speaker("Ms. Smith", &roster());
        assert_eq!(r.speaker.as_deref(), Some("S2"));
        assert!(r.heuristic.is_some());
        assert_eq!(resolve_speaker("Mr. Smith", &roster()).speaker.as_deref(), Some("S1"));
    }

    #[test]
    fn turn_taking_breaks_remaining_tie() {
        let ctx = RecognitionContext {
            previous_role: Some(Role::Witness),
            previous_label: None,
        };
        let r = HeuristicRecognizer.recognize("Mr. Jones", &roster(), &ctx);
        assert_eq!(r.speaker.as_deref(), Some("J1"));
        assert!(r.heuristic.unwrap().contains("witness turn"));
        let r = resolve_speaker("Mr. Jones", &roster());
        assert_eq!(r.speaker, None);
        assert!(r.warning.unwrap().contains("ambiguous"));
    }
}
