//! Per-utterance linguistic features: complexity (readability formulas),
//! affect (sentiment lexicons), bias (verb and hedge lexicons), style
//! (punctuation, symbols, capitals) and event mentions (dates, places).
//!
//! # Counting rules
//!
//! * Words are the lowercased alphanumeric runs of [`word_tokens`];
//!   letters are their alphanumeric characters.
//! * Sentences end at a run of `.`, `!` or `?` unless the run is a single
//!   `.` after a known abbreviation or a one-letter initial. A trailing
//!   fragment without a terminator is a sentence of its own.
//! * Syllables are vowel groups (`aeiou`, plus `y` after the first letter),
//!   minus one for a silent final `e` (but not consonant + `le`) and for a
//!   silent `ed` ending (not after `t` or `d`), with at least one per word.
//! * Lexicon entries may span several words; they match contiguous token
//!   sequences and overlapping matches all count.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use sha2::{Digest, Sha256};

use crate::corpus::Utterance;
use crate::error::{Error, Result};
use crate::text::word_tokens;

pub const SCHEMA_VERSION: &str = "hearing-features/1";

pub const SCHEMA: [&str; 30] = [
    "ttr",
    "avgWlen",
    "wCount",
    "FKGLvl",
    "SmgIn",
    "CLIn",
    "lix",
    "vneg",
    "vneu",
    "vpos",
    "wneg",
    "wpos",
    "wneu",
    "sneg",
    "spos",
    "sneu",
    "bias",
    "assert",
    "facts",
    "hedges",
    "implctv",
    "repVerb",
    "poWords",
    "noWords",
    "punct_count",
    "symbol_count",
    "quote_count",
    "allcaps_count",
    "date_mentions",
    "location_mentions",
];

/// Features that are counts (non-negative integers stored as reals).
pub const COUNT_FEATURES: [&str; 21] = [
    "wCount",
    "wneg",
    "wpos",
    "wneu",
    "sneg",
    "spos",
    "sneu",
    "bias",
    "assert",
    "facts",
    "hedges",
    "implctv",
    "repVerb",
    "poWords",
    "noWords",
    "punct_count",
    "symbol_count",
    "quote_count",
    "allcaps_count",
    "date_mentions",
    "location_mentions",
];

pub fn schema_index(name: &str) -> Option<usize> {
    SCHEMA.iter().position(|s| *s == name)
}

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "jr", "sr", "st", "sen", "rep", "gen", "gov", "hon", "prof", "col",
    "lt", "sgt", "capt", "adm", "vs", "etc", "inc", "co", "corp", "ltd", "no", "dept", "approx",
    "mt", "ft", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov",
    "dec", "u.s", "e.g", "i.e", "a.m", "p.m",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TextStats {
    pub n_words: usize,
    pub n_sentences: usize,
    pub n_characters_in_words: usize,
    pub n_syllables: usize,
    pub n_polysyllables: usize,
    pub n_long_words: usize,
    pub n_unique_words: usize,
}

pub fn count_syllables(word: &str) -> usize {
    let w: Vec<char> = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    if w.is_empty() {
        return if word.chars().any(|c| c.is_alphanumeric()) { 1 } else { 0 };
    }
    let is_vowel = |i: usize| matches!(w[i], 'a' | 'e' | 'i' | 'o' | 'u') || (w[i] == 'y' && i > 0);
    let mut groups = 0usize;
    let mut prev = false;
    for i in 0..w.len() {
        let v = is_vowel(i);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    let n = w.len();
    let consonant = |c: char| c.is_alphabetic() && !matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
    if groups > 1 && n >= 2 && w[n - 1] == 'e' && w[n - 2] != 'e' {
        let consonant_le = n >= 3 && w[n - 2] == 'l' && consonant(w[n - 3]);
        // "-ee" endings and vowel-e endings are not the silent-e pattern.
        if !consonant_le && consonant(w[n - 2]) {
            groups -= 1;
        }
    } else if groups > 1 && n >= 3 && w[n - 2] == 'e' && w[n - 1] == 'd' {
        let before = w[n - 3];
        if consonant(before) && before != 't' && before != 'd' {
            groups -= 1;
        }
    }
    groups.max(1)
}

fn sentence_count(text: &str) -> usize {
    let mut sentences = 0;
    let mut open = false;
    for chunk in text.split_whitespace() {
        if chunk.chars().any(|c| c.is_alphanumeric()) {
            open = true;
        }
        let core = chunk.trim_end_matches(['"', '\'', ')', ']', '\u{201d}', '\u{2019}']);
        let term: String = core
            .chars()
            .rev()
            .take_while(|c| matches!(c, '.' | '!' | '?'))
            .collect();
        if term.is_empty() || !open {
            continue;
        }
        if term == "." {
            let word = core[..core.len() - 1]
                .trim_start_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase();
            let initial = word.chars().count() == 1 && word.chars().all(char::is_alphabetic);
            if initial || ABBREVIATIONS.contains(&word.as_str()) {
                continue;
            }
        }
        sentences += 1;
        open = false;
    }
    if open {
        sentences += 1;
    }
    sentences
}

pub fn compute_stats(text: &str) -> TextStats {
    let tokens = word_tokens(text);
    let mut s = TextStats {
        n_words: tokens.len(),
        n_sentences: if tokens.is_empty() { 0 } else { sentence_count(text).max(1) },
        ..TextStats::default()
    };
    let mut unique = HashSet::new();
    for t in &tokens {
        let letters = t.chars().filter(|c| c.is_alphanumeric()).count();
        let syl = count_syllables(t);
        s.n_characters_in_words += letters;
        s.n_syllables += syl;
        if syl >= 3 {
            s.n_polysyllables += 1;
        }
        if letters > 6 {
            s.n_long_words += 1;
        }
        unique.insert(t.as_str());
    }
    s.n_unique_words = unique.len();
    s
}

pub fn fkgl(words: f64, sentences: f64, syllables: f64) -> f64 {
    0.39 * (words / sentences) + 11.8 * (syllables / words) - 15.59
}

pub fn smog(polysyllables: f64, sentences: f64) -> f64 {
    1.0430 * (polysyllables * 30.0 / sentences).sqrt() + 3.1291
}

/// `l`: letters per 100 words, `s`: sentences per 100 words.
pub fn coleman_liau(l: f64, s: f64) -> f64 {
    0.0588 * l - 0.296 * s - 15.8
}

pub fn lix(words: f64, sentences: f64, long_words: f64) -> f64 {
    words / sentences + 100.0 * long_words / words
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Complexity {
    pub ttr: Option<f64>,
    pub avg_wlen: Option<f64>,
    pub w_count: f64,
    pub fkgl: Option<f64>,
    pub smog: Option<f64>,
    pub cli: Option<f64>,
    pub lix: Option<f64>,
}

/// Readability features from counts. With no words or no sentences every
/// ratio is `None`; the word count is always defined.
pub fn complexity_features(stats: &TextStats) -> Complexity {
    let w = stats.n_words as f64;
    let s = stats.n_sentences as f64;
    if stats.n_words == 0 || stats.n_sentences == 0 {
        return Complexity {
            w_count: w,
            ..Complexity::default()
        };
    }
    Complexity {
        ttr: Some(stats.n_unique_words as f64 / w),
        avg_wlen: Some(stats.n_characters_in_words as f64 / w),
        w_count: w,
        fkgl: Some(fkgl(w, s, stats.n_syllables as f64)),
        smog: Some(smog(stats.n_polysyllables as f64, s)),
        cli: Some(coleman_liau(
            100.0 * stats.n_characters_in_words as f64 / w,
            100.0 * s / w,
        )),
        lix: Some(lix(w, s, stats.n_long_words as f64)),
    }
}

/// Named lexicon lists. File stems double as list names.
pub const LIST_NAMES: [&str; 15] = [
    "weak_negative",
    "weak_positive",
    "weak_neutral",
    "strong_negative",
    "strong_positive",
    "strong_neutral",
    "bias_words",
    "assertives",
    "factives",
    "hedges",
    "implicatives",
    "report_verbs",
    "positive_opinion",
    "negative_opinion",
    "gazetteer",
];

pub const VALENCE_FILE: &str = "sentiment_valence.tsv";
pub const MANIFEST_FILE: &str = "MANIFEST.sha256";

macro_rules! bundled {
    ($($name:literal),*) => {
        &[$(($name, include_str!(concat!("../lexicons/", $name)))),*]
    };
}

const BUNDLED: &[(&str, &str)] = bundled!(
    "weak_negative.txt",
    "weak_positive.txt",
    "weak_neutral.txt",
    "strong_negative.txt",
    "strong_positive.txt",
    "strong_neutral.txt",
    "bias_words.txt",
    "assertives.txt",
    "factives.txt",
    "hedges.txt",
    "implicatives.txt",
    "report_verbs.txt",
    "positive_opinion.txt",
    "negative_opinion.txt",
    "gazetteer.txt",
    "sentiment_valence.tsv",
    "MANIFEST.sha256"
);

/// A word list, each entry stored as its token sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordList {
    entries: Vec<Vec<String>>,
    by_first: HashMap<String, Vec<usize>>,
}

impl WordList {
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = HashSet::new();
        let mut list = WordList::default();
        for e in entries {
            let toks = word_tokens(e.as_ref());
            if toks.is_empty() || !seen.insert(toks.clone()) {
                continue;
            }
            list.by_first
                .entry(toks[0].clone())
                .or_default()
                .push(list.entries.len());
            list.entries.push(toks);
        }
        list
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = String> + '_ {
        self.entries.iter().map(|e| e.join(" "))
    }

    /// Occurrences of any entry in `tokens`, overlaps included.
    pub fn count(&self, tokens: &[String]) -> usize {
        let mut n = 0;
        for i in 0..tokens.len() {
            if let Some(ids) = self.by_first.get(&tokens[i]) {
                for &id in ids {
                    let e = &self.entries[id];
                    if tokens.len() - i >= e.len() && tokens[i..i + e.len()] == e[..] {
                        n += 1;
                    }
                }
            }
        }
        n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicons {
    pub lists: BTreeMap<String, WordList>,
    pub valence: HashMap<String, f64>,
    /// sha256 of each source file, keyed by file name.
    pub checksums: BTreeMap<String, String>,
}

fn parse_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

fn parse_valence(text: &str, file: &Path) -> Result<HashMap<String, f64>> {
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (word, value) = line
            .split_once('\t')
            .ok_or_else(|| Error::record(file, i + 1, "valence", "expected word<TAB>value"))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|e| Error::record(file, i + 1, "valence", format!("{e}")))?;
        if !v.is_finite() {
            return Err(Error::record(file, i + 1, "valence", "non-finite value"));
        }
        map.insert(word.trim().to_lowercase(), v);
    }
    Ok(map)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn parse_manifest(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| {
            let mut it = l.split_whitespace();
            Some((it.nth(1)?.to_string(), l.split_whitespace().next()?.to_string()))
        })
        .collect()
}

impl Lexicons {
    fn from_sources(get: impl Fn(&str) -> Result<String>, origin: &Path) -> Result<Self> {
        let mut lists = BTreeMap::new();
        let mut checksums = BTreeMap::new();
        for name in LIST_NAMES {
            let file = format!("{name}.txt");
            let text = get(&file)?;
            checksums.insert(file, sha256_hex(text.as_bytes()));
            lists.insert(name.to_string(), WordList::new(parse_list(&text)));
        }
        let vtext = get(VALENCE_FILE)?;
        checksums.insert(VALENCE_FILE.to_string(), sha256_hex(vtext.as_bytes()));
        let valence = parse_valence(&vtext, &origin.join(VALENCE_FILE))?;
        if let Ok(manifest) = get(MANIFEST_FILE) {
            let expected = parse_manifest(&manifest);
            for (file, sum) in &checksums {
                match expected.get(file) {
                    Some(e) if e == sum => {}
                    Some(_) => {
                        return Err(Error::Config(format!(
                            "{}: checksum of {file} does not match {MANIFEST_FILE}; \
                             regenerate the manifest after editing lexicons",
                            origin.display()
                        )))
                    }
                    None => {
                        return Err(Error::Config(format!(
                            "{}: {file} is missing from {MANIFEST_FILE}",
                            origin.display()
                        )))
                    }
                }
            }
        }
        Ok(Lexicons {
            lists,
            valence,
            checksums,
        })
    }

    /// The lexicons compiled into the crate.
    pub fn bundled() -> &'static Lexicons {
        static LEX: OnceLock<Lexicons> = OnceLock::new();
        LEX.get_or_init(|| {
            Lexicons::from_sources(
                |f| {
                    BUNDLED
                        .iter()
                        .find(|(n, _)| *n == f)
                        .map(|(_, t)| t.to_string())
                        .ok_or_else(|| Error::Config(format!("no bundled {f}")))
                },
                Path::new("<bundled>"),
            )
            .expect("bundled lexicons are consistent")
        })
    }

    /// Load a lexicon directory: one `<list>.txt` per list name, the
    /// valence table, and optionally a sha256 manifest that must match.
    pub fn load(dir: &Path) -> Result<Self> {
        Lexicons::from_sources(
            |f| {
                let p = dir.join(f);
                fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
            },
            dir,
        )
    }

    /// Write the bundled lexicons and their manifest into `dir`.
    pub fn export_bundled(dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in BUNDLED {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }

    /// Recompute the manifest of a lexicon directory after edits.
    pub fn write_manifest(dir: &Path) -> Result<()> {
        let mut out = String::new();
        let mut files: Vec<String> = LIST_NAMES.iter().map(|n| format!("{n}.txt")).collect();
        files.push(VALENCE_FILE.into());
        files.sort();
        for f in files {
            let p = dir.join(&f);
            let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
            out.push_str(&format!("{}  {f}\n", sha256_hex(&bytes)));
        }
        let p = dir.join(MANIFEST_FILE);
        fs::write(&p, out).map_err(|e| Error::io(&p, e))
    }

    pub fn list(&self, name: &str) -> &WordList {
        self.lists
            .get(name)
            .unwrap_or_else(|| panic!("unknown lexicon list `{name}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affect {
    pub vneg: f64,
    pub vneu: f64,
    pub vpos: f64,
    pub wneg: usize,
    pub wpos: usize,
    pub wneu: usize,
    pub sneg: usize,
    pub spos: usize,
    pub sneu: usize,
}

/// Valence shares over tokens found in the valence table: positive words
/// contribute their valence to the positive mass, negative words the
/// absolute valence to the negative mass, and zero-valence words one unit
/// of neutral mass. With no covered tokens the text is fully neutral.
pub fn affect_features(text: &str, lex: &Lexicons) -> Affect {
    let tokens = word_tokens(text);
    let (mut neg, mut neu, mut pos) = (0.0, 0.0, 0.0);
    for t in &tokens {
        if let Some(&v) = lex.valence.get(t) {
            if v > 0.0 {
                pos += v;
            } else if v < 0.0 {
                neg -= v;
            } else {
                neu += 1.0;
            }
        }
    }
    let total = neg + neu + pos;
    let (vneg, vneu, vpos) = if total > 0.0 {
        let vneg = neg / total;
        let vpos = pos / total;
        (vneg, 1.0 - vneg - vpos, vpos)
    } else {
        (0.0, 1.0, 0.0)
    };
    let c = |n: &str| lex.list(n).count(&tokens);
    Affect {
        vneg,
        vneu: vneu.max(0.0),
        vpos,
        wneg: c("weak_negative"),
        wpos: c("weak_positive"),
        wneu: c("weak_neutral"),
        sneg: c("strong_negative"),
        spos: c("strong_positive"),
        sneu: c("strong_neutral"),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BiasCounts {
    pub bias: usize,
    pub assertives: usize,
    pub factives: usize,
    pub hedges: usize,
    pub implicatives: usize,
    pub report_verbs: usize,
    pub positive_opinion: usize,
    pub negative_opinion: usize,
}

pub fn bias_features(text: &str, lex: &Lexicons) -> BiasCounts {
    let tokens = word_tokens(text);
    let c = |n: &str| lex.list(n).count(&tokens);
    BiasCounts {
        bias: c("bias_words"),
        assertives: c("assertives"),
        factives: c("factives"),
        hedges: c("hedges"),
        implicatives: c("implicatives"),
        report_verbs: c("report_verbs"),
        positive_opinion: c("positive_opinion"),
        negative_opinion: c("negative_opinion"),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StyleEvent {
    pub punct: usize,
    pub symbols: usize,
    pub quotes: usize,
    pub allcaps: usize,
    pub dates: usize,
    pub locations: usize,
}

const PUNCT: &[char] = &[
    '.', ',', ';', ':', '!', '?', '-', '(', ')', '[', ']', '{', '}', '\'', '"', '\u{2018}',
    '\u{2019}', '\u{201c}', '\u{201d}', '\u{2026}', '\u{2013}', '\u{2014}',
];
const QUOTES: &[char] = &['"', '\u{201c}', '\u{201d}', '\u{00ab}', '\u{00bb}'];

fn date_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let months = "january|february|april|june|july|august|september|october|november|december|sept";
        let day = r"\d{1,2}(?:st|nd|rd|th)?";
        let year = r"(?:19|20)\d{2}";
        let pattern = format!(
            r"(?i)\b(?:(?:{months})\.?(?:\s+{day})?(?:,?\s+{year})?|(?:may|march)\s+{day}(?:,?\s+{year})?|(?:may|march)\s+{year}|\d{{1,2}}/\d{{1,2}}/\d{{4}}|{year})\b"
        );
        Regex::new(&pattern).expect("static regex")
    })
}

/// Date mentions: month names (`May` and `March` only with a day or
/// year), `MM/DD/YYYY` dates and bare years 1900-2099. A month-day-year
/// phrase counts once.
pub fn count_dates(text: &str) -> usize {
    date_re().find_iter(text).count()
}

pub fn count_allcaps(text: &str) -> usize {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|t| {
            let letters: Vec<char> = t.chars().filter(|c| c.is_alphabetic()).collect();
            letters.len() >= 2 && letters.iter().all(|c| c.is_uppercase())
        })
        .count()
}

pub fn style_event_features(text: &str, lex: &Lexicons) -> StyleEvent {
    let mut s = StyleEvent::default();
    for c in text.chars() {
        if PUNCT.contains(&c) {
            s.punct += 1;
        } else if !c.is_alphanumeric() && !c.is_whitespace() && !c.is_control() {
            s.symbols += 1;
        }
        if QUOTES.contains(&c) {
            s.quotes += 1;
        }
    }
    s.allcaps = count_allcaps(text);
    s.dates = count_dates(text);
    s.locations = lex.list("gazetteer").count(&word_tokens(text));
    s
}

/// Values in [`SCHEMA`] order; `None` marks a feature undefined for the
/// text (see [`complexity_features`]).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<Option<f64>>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        schema_index(name).and_then(|i| self.values[i])
    }
}

pub fn extract_features(text: &str, lex: &Lexicons) -> FeatureVector {
    let c = complexity_features(&compute_stats(text));
    let a = affect_features(text, lex);
    let b = bias_features(text, lex);
    let s = style_event_features(text, lex);
    let n = |v: usize| Some(v as f64);
    let values = vec![
        c.ttr,
        c.avg_wlen,
        Some(c.w_count),
        c.fkgl,
        c.smog,
        c.cli,
        c.lix,
        Some(a.vneg),
        Some(a.vneu),
        Some(a.vpos),
        n(a.wneg),
        n(a.wpos),
        n(a.wneu),
        n(a.sneg),
        n(a.spos),
        n(a.sneu),
        n(b.bias),
        n(b.assertives),
        n(b.factives),
        n(b.hedges),
        n(b.implicatives),
        n(b.report_verbs),
        n(b.positive_opinion),
        n(b.negative_opinion),
        n(s.punct),
        n(s.symbols),
        n(s.quotes),
        n(s.allcaps),
        n(s.dates),
        n(s.locations),
    ];
    debug_assert_eq!(values.len(), SCHEMA.len());
    FeatureVector { values }
}

/// One row of a feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub utterance_id: String,
    pub hearing_id: String,
    pub speaker: Option<String>,
    pub features: FeatureVector,
}

/// Features for every utterance, in input order.
pub fn extract_corpus(utterances: &[Utterance], lex: &Lexicons) -> Vec<FeatureRow> {
    utterances
        .par_iter()
        .map(|u| FeatureRow {
            utterance_id: u.utterance_id.clone(),
            hearing_id: u.hearing_id.clone(),
            speaker: u.speaker.clone(),
            features: extract_features(&u.text, lex),
        })
        .collect()
}

pub const ID_COLUMNS: [&str; 3] = ["utterance_id", "hearing_id", "speaker"];
pub const NA: &str = "NA";

pub fn matrix_header() -> Vec<&'static str> {
    ID_COLUMNS.iter().chain(SCHEMA.iter()).copied().collect()
}

pub fn format_value(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => NA.to_string(),
    }
}

/// Comma-separated matrix: id columns, then the schema in order. Missing
/// values are written as `NA`.
pub fn write_feature_matrix(rows: &[FeatureRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io {
        path: "<feature matrix>".into(),
        source: std::io::Error::other(e.to_string()),
    };
    w.write_record(matrix_header()).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.utterance_id.clone(),
            r.hearing_id.clone(),
            r.speaker.clone().unwrap_or_default(),
        ];
        rec.extend(r.features.values.iter().map(|v| format_value(*v)));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<feature matrix>", e))
}

pub fn read_feature_matrix(path: &Path) -> Result<Vec<FeatureRow>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::record(path, 1, "<header>", e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != matrix_header() {
        return Err(Error::record(
            path,
            1,
            "<header>",
            format!("header does not match feature schema {SCHEMA_VERSION}"),
        ));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::record(path, line, "<row>", e.to_string()))?;
        let mut values = Vec::with_capacity(SCHEMA.len());
        for (j, name) in SCHEMA.iter().enumerate() {
            let raw = &rec[ID_COLUMNS.len() + j];
            values.push(if raw == NA {
                None
            } else {
                Some(raw.parse::<f64>().map_err(|e| {
                    Error::record(path, line, *name, format!("`{raw}`: {e}"))
                })?)
            });
        }
        rows.push(FeatureRow {
            utterance_id: rec[0].to_string(),
            hearing_id: rec[1].to_string(),
            speaker: Some(rec[2].to_string()).filter(|s| !s.is_empty()),
            features: FeatureVector { values },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn syllables() {
        for (w, n) in [
            ("the", 1),
            ("cat", 1),
            ("cake", 1),
            ("table", 2),
            ("jumped", 1),
            ("wanted", 2),
            ("committee", 3),
            ("yes", 1),
            ("happy", 2),
            ("agree", 2),
            ("important", 3),
            ("2020", 1),
        ] {
            assert_eq!(count_syllables(w), n, "{w}");
        }
    }

    #[test]
    fn stats_examples() {
        let s = compute_stats("The cat sat.");
        assert_eq!(
            (s.n_words, s.n_sentences, s.n_characters_in_words, s.n_syllables),
            (3, 1, 9, 3)
        );
        assert_eq!(compute_stats(""), TextStats::default());
        let s = compute_stats("a a a a");
        assert_eq!((s.n_words, s.n_unique_words, s.n_sentences), (4, 1, 1));
        assert_eq!(compute_stats("Mr. Smith went home. He slept! Did he?").n_sentences, 3);
        assert_eq!(compute_stats("J. Q. Public arrived.").n_sentences, 1);
    }

    #[test]
    fn formulas() {
        assert!((fkgl(3.0, 1.0, 3.0) - (-2.62)).abs() < 1e-12);
        assert!((smog(30.0, 30.0) - (1.0430 * 30f64.sqrt() + 3.1291)).abs() < 1e-12);
        assert!((coleman_liau(500.0, 5.0) - 12.12).abs() < 1e-12);
        assert!((lix(10.0, 2.0, 4.0) - 45.0).abs() < 1e-12);
        let c = complexity_features(&TextStats::default());
        assert_eq!(c.fkgl, None);
        assert_eq!(c.ttr, None);
        assert_eq!(c.w_count, 0.0);
    }

    #[test]
    fn bundled_lexicons_load() {
        let lex = Lexicons::bundled();
        assert_eq!(lex.lists.len(), LIST_NAMES.len());
        assert!(lex.list("hedges").len() > 10);
        assert!(lex.valence.values().all(|v| v.is_finite()));
    }

    #[test]
    fn lexicon_dir_round_trip_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        Lexicons::export_bundled(dir.path()).unwrap();
        assert_eq!(&Lexicons::load(dir.path()).unwrap(), Lexicons::bundled());
        fs::write(dir.path().join("hedges.txt"), "maybe\n").unwrap();
        assert!(matches!(Lexicons::load(dir.path()), Err(Error::Config(_))));
        Lexicons::write_manifest(dir.path()).unwrap();
        let lex = Lexicons::load(dir.path()).unwrap();
        assert_eq!(lex.list("hedges").len(), 1);
        fs::remove_file(dir.path().join("factives.txt")).unwrap();
        assert!(matches!(Lexicons::load(dir.path()), Err(Error::Io { .. })));
    }

    fn lex_with(name: &str, words: &[&str]) -> Lexicons {
        let mut l = Lexicons::bundled().clone();
        l.lists.insert(name.into(), WordList::new(words));
        l
    }

    #[test]
    fn affect_examples() {
        let empty = Lexicons {
            lists: LIST_NAMES
                .iter()
                .map(|n| (n.to_string(), WordList::default()))
                .collect(),
            valence: HashMap::new(),
            checksums: BTreeMap::new(),
        };
        let a = affect_features("nothing to see", &empty);
        assert_eq!((a.vneg, a.vneu, a.vpos), (0.0, 1.0, 0.0));
        assert_eq!(a.wneg + a.wpos + a.wneu + a.sneg + a.spos + a.sneu, 0);
        let a = affect_features("superb", Lexicons::bundled());
        assert_eq!(a.spos, 1);
        assert_eq!(a.wneg + a.wpos + a.wneu + a.sneg + a.sneu, 0);
    }

    #[test]
    fn bias_examples() {
        let lex = lex_with("assertives", &["assert", "claim"]);
        assert_eq!(bias_features("I assert and claim this", &lex).assertives, 2);
        assert_eq!(bias_features("", Lexicons::bundled()), BiasCounts::default());
        let lex = lex_with("hedges", &["sort of", "of"]);
        assert_eq!(bias_features("sort of sort of", &lex).hedges, 4);
    }

    #[test]
    fn style_examples() {
        let lex = lex_with("gazetteer", &["ohio"]);
        let s = style_event_features("On 01/02/2020 in Ohio!", &lex);
        assert_eq!((s.dates, s.locations), (1, 1));
        assert!(s.punct >= 1);
        assert_eq!(style_event_features("", &lex), StyleEvent::default());
        assert_eq!(count_allcaps("HELLO WORLD"), 2);
        assert_eq!(count_allcaps("I am OK"), 1);
        assert_eq!(count_dates("we may go in March"), 0);
        assert_eq!(count_dates("on May 5, 2019 and March 2020"), 2);
        assert_eq!(count_dates("January 12th, 1999 then 2005"), 2);
        assert_eq!(count_dates("call 555-2100"), 0);
    }

    #[test]
    fn composition() {
        let lex = Lexicons::bundled();
        let t = "The committee will come to order. I think this is a terrible, TERRIBLE waste of $5 million in Texas since 2019!";
        let v = extract_features(t, lex);
        assert_eq!(v.values.len(), SCHEMA.len());
        assert_eq!(v, extract_features(t, lex));
        let c = complexity_features(&compute_stats(t));
        let a = affect_features(t, lex);
        let b = bias_features(t, lex);
        let s = style_event_features(t, lex);
        assert_eq!(v.get("FKGLvl"), c.fkgl);
        assert_eq!(v.get("lix"), c.lix);
        assert_eq!(v.get("vneg"), Some(a.vneg));
        assert_eq!(v.get("sneg"), Some(a.sneg as f64));
        assert_eq!(v.get("hedges"), Some(b.hedges as f64));
        assert_eq!(v.get("repVerb"), Some(b.report_verbs as f64));
        assert_eq!(v.get("symbol_count"), Some(s.symbols as f64));
        assert_eq!(v.get("allcaps_count"), Some(1.0));
        assert_eq!(v.get("location_mentions"), Some(1.0));
        assert_eq!(v.get("date_mentions"), Some(1.0));
    }

    #[test]
    fn matrix_round_trip() {
        let lex = Lexicons::bundled();
        let rows = vec![
            FeatureRow {
                utterance_id: "h-u00000".into(),
                hearing_id: "h".into(),
                speaker: Some("p1".into()),
                features: extract_features("Why did the agency fail?", lex),
            },
            FeatureRow {
                utterance_id: "h-u00001".into(),
                hearing_id: "h".into(),
                speaker: None,
                features: extract_features("", lex),
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let mut buf = Vec::new();
        write_feature_matrix(&rows, &mut buf).unwrap();
        fs::write(&p, &buf).unwrap();
        assert_eq!(read_feature_matrix(&p).unwrap(), rows);
        let header = String::from_utf8(buf).unwrap().lines().next().unwrap().to_string();
        assert_eq!(header, matrix_header().join(","));
    }

    proptest! {
        #[test]
        fn valence_shares_sum_to_one(words in prop::collection::vec("[a-z]{1,8}|good|bad|crisis|hearing|great", 0..30)) {
            let a = affect_features(&words.join(" "), Lexicons::bundled());
            prop_assert!((a.vneg + a.vneu + a.vpos - 1.0).abs() < 1e-12);
            for v in [a.vneg, a.vneu, a.vpos] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn ttr_bounds(words in prop::collection::vec("[a-z]{1,6}", 1..40)) {
            let s = compute_stats(&words.join(" "));
            let ttr = complexity_features(&s).ttr.unwrap();
            prop_assert!(ttr > 0.0 && ttr <= 1.0);
            let distinct = words.iter().collect::<HashSet<_>>().len() == words.len();
            prop_assert_eq!(ttr == 1.0, distinct);
            prop_assert!(s.n_unique_words <= s.n_words && s.n_polysyllables <= s.n_words);
            prop_assert!(s.n_sentences >= 1);
        }

        #[test]
        fn counts_ignore_case(text in "[a-zA-Z0-9 .,!?$%\"/-]{0,80}") {
            let lex = Lexicons::bundled();
            let lo = extract_features(&text.to_lowercase(), lex);
            let up = extract_features(&text.to_uppercase(), lex);
            for name in COUNT_FEATURES {
                if name == "allcaps_count" {
                    continue;
                }
                prop_assert_eq!(lo.get(name), up.get(name), "{}", name);
            }
        }
    }
}
