use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

use chrono::{DateTime, Datelike, Months, Timelike, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textkit::{load_wordlist, parse_wordlist, tokenize, URL_PATTERN};

/// Phrases signalling a promise to give back or pass the favor on.
pub const RECIPROCITY_PATTERN: &str =
    r"(?i)\b(pay(ing)?\s+(it|this)\s+(forward|back)|return\s+the\s+favor)\b";

/// Gratitude cues. An approximation of the gratitude marker used by
/// politeness classifiers.
pub const GRATITUDE_PATTERN: &str =
    r"(?i)\b(thank|thanks|thankful|grateful|gratitude|appreciate|appreciated)\b";

/// Emoticons: eyes, an optional nose, then a mouth.
pub const EMOTICON_PATTERN: &str = r"[:;=]['-]?[)(DPp]";

/// Candidate links inspected by [`detect_image`]: anything [`URL_PATTERN`]
/// matches, plus bare imgur addresses.
pub const IMAGE_LINK_PATTERN: &str = r"(?i)(?:\b(?:https?://|www\.)|\b(?:i\.)?imgur\.com/)\S+";

const IMAGE_EXTENSIONS: &[&str] = &[".jpg", ".jpeg", ".png", ".gif"];

fn regex(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("valid built-in pattern"))
}

pub fn detect_reciprocity(text: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    regex(&RE, RECIPROCITY_PATTERN).is_match(text)
}

pub fn detect_gratitude(text: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    regex(&RE, GRATITUDE_PATTERN).is_match(text)
}

pub fn detect_emoticon(text: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    regex(&RE, EMOTICON_PATTERN).is_match(text)
}

/// True when the text links to imgur or to a path ending in an image
/// extension.
pub fn detect_image(text: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    // Keep the shared url pattern and this one in step.
    debug_assert!(URL_PATTERN.contains("https?://"));
    regex(&RE, IMAGE_LINK_PATTERN)
        .find_iter(text)
        .any(|m| is_image_link(m.as_str()))
}

fn is_image_link(raw: &str) -> bool {
    let link = raw
        .trim_end_matches(|c: char| ")]}>.,;:!?'\"".contains(c))
        .to_ascii_lowercase();
    let rest = link.split_once("://").map(|(_, r)| r).unwrap_or(&link);
    let (host, path) = match rest.find(['/', '?', '#']) {
        Some(i) => rest.split_at(i),
        None => (rest, ""),
    };
    if host == "imgur.com" || host.ends_with(".imgur.com") {
        return true;
    }
    let path = path.split(['?', '#']).next().unwrap_or("");
    IMAGE_EXTENSIONS.iter().any(|ext| path.ends_with(ext))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Narrative {
    Money,
    Job,
    Student,
    Family,
    Craving,
}

impl Narrative {
    pub const ALL: [Narrative; 5] = [
        Narrative::Money,
        Narrative::Job,
        Narrative::Student,
        Narrative::Family,
        Narrative::Craving,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Narrative::Money => "money",
            Narrative::Job => "job",
            Narrative::Student => "student",
            Narrative::Family => "family",
            Narrative::Craving => "craving",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_name(name: &str) -> Option<Narrative> {
        Narrative::ALL.into_iter().find(|n| n.name().eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NarrativeLexicons {
    sets: [HashSet<String>; 5],
}

impl NarrativeLexicons {
    pub fn new(sets: [HashSet<String>; 5]) -> Result<Self> {
        for (n, set) in Narrative::ALL.iter().zip(&sets) {
            if set.is_empty() {
                return Err(Error::InvalidArgument(format!("{} lexicon is empty", n.name())));
            }
            if let Some(bad) = set.iter().find(|t| tokenize(t) != [t.as_str()]) {
                return Err(Error::InvalidArgument(format!(
                    "{} lexicon entry `{bad}` is not a single lowercase token",
                    n.name()
                )));
            }
        }
        Ok(NarrativeLexicons { sets })
    }

    /// Reads `money.txt`, `job.txt`, `student.txt`, `family.txt` and
    /// `craving.txt` from a directory.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut sets: [HashSet<String>; 5] = Default::default();
        for n in Narrative::ALL {
            sets[n.index()] = load_wordlist(&dir.join(format!("{}.txt", n.name())))?;
        }
        Self::new(sets)
    }

    pub fn get(&self, n: Narrative) -> &HashSet<String> {
        &self.sets[n.index()]
    }
}

impl Default for NarrativeLexicons {
    fn default() -> Self {
        let sets = [
            include_str!("../../data/narratives/money.txt"),
            include_str!("../../data/narratives/job.txt"),
            include_str!("../../data/narratives/student.txt"),
            include_str!("../../data/narratives/family.txt"),
            include_str!("../../data/narratives/craving.txt"),
        ]
        .map(parse_wordlist);
        NarrativeLexicons::new(sets).expect("built-in lexicons are valid")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct NarrativeHits {
    pub counts: [usize; 5],
    pub fractions: [f64; 5],
}

/// Lexicon token occurrences per narrative, and the same divided by the
/// word count of `text`.
pub fn detect_narratives(text: &str, lexicons: &NarrativeLexicons) -> NarrativeHits {
    let tokens = tokenize(text);
    let mut hits = NarrativeHits::default();
    for n in Narrative::ALL {
        let set = lexicons.get(n);
        let c = tokens.iter().filter(|t| set.contains(t.as_str())).count();
        hits.counts[n.index()] = c;
        if !tokens.is_empty() {
            hits.fractions[n.index()] = c as f64 / tokens.len() as f64;
        }
    }
    hits
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentimentLexicons {
    pub positive: HashSet<String>,
    pub negative: HashSet<String>,
}

impl SentimentLexicons {
    pub fn new(positive: HashSet<String>, negative: HashSet<String>) -> Result<Self> {
        if positive.is_empty() || negative.is_empty() {
            return Err(Error::InvalidArgument("sentiment lexicons must be non-empty".into()));
        }
        Ok(SentimentLexicons { positive, negative })
    }

    pub fn load(positive: &Path, negative: &Path) -> Result<Self> {
        Self::new(load_wordlist(positive)?, load_wordlist(negative)?)
    }
}

impl Default for SentimentLexicons {
    fn default() -> Self {
        SentimentLexicons {
            positive: parse_wordlist(include_str!("../../data/sentiment/positive.txt")),
            negative: parse_wordlist(include_str!("../../data/sentiment/negative.txt")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Sentiment {
    pub pos_sentence_frac: f64,
    pub neg_sentence_frac: f64,
    pub pos_word_frac: f64,
    pub neg_word_frac: f64,
    pub has_emoticon: bool,
}

/// Sentences are split on `.`, `!`, `?` and newlines; a sentence is positive
/// when it has more positive than negative lexicon hits and vice versa.
/// Sentence fractions are over sentences with at least one token.
pub fn sentiment_features(text: &str, lexicons: &SentimentLexicons) -> Sentiment {
    let mut out = Sentiment {
        has_emoticon: detect_emoticon(text),
        ..Sentiment::default()
    };
    let (mut n_sent, mut pos_sent, mut neg_sent) = (0usize, 0usize, 0usize);
    let (mut words, mut pos_words, mut neg_words) = (0usize, 0usize, 0usize);
    for sentence in text.split(['.', '!', '?', '\n']) {
        let tokens = tokenize(sentence);
        if tokens.is_empty() {
            continue;
        }
        let p = tokens.iter().filter(|t| lexicons.positive.contains(t.as_str())).count();
        let n = tokens.iter().filter(|t| lexicons.negative.contains(t.as_str())).count();
        n_sent += 1;
        words += tokens.len();
        pos_words += p;
        neg_words += n;
        match p.cmp(&n) {
            std::cmp::Ordering::Greater => pos_sent += 1,
            std::cmp::Ordering::Less => neg_sent += 1,
            std::cmp::Ordering::Equal => {}
        }
    }
    if n_sent > 0 {
        out.pos_sentence_frac = pos_sent as f64 / n_sent as f64;
        out.neg_sentence_frac = neg_sent as f64 / n_sent as f64;
        out.pos_word_frac = pos_words as f64 / words as f64;
        out.neg_word_frac = neg_words as f64 / words as f64;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Temporal {
    pub community_age_months: u32,
    pub first_half_month: bool,
    pub month: u32,
    /// 0 = Monday.
    pub weekday: u32,
    pub hour: u32,
    pub day_of_month: u32,
}

fn utc(t: i64) -> Result<DateTime<Utc>> {
    DateTime::from_timestamp(t, 0)
        .ok_or_else(|| Error::InvalidArgument(format!("timestamp {t} out of range")))
}

/// Calendar features in UTC. Community age is the number of whole calendar
/// months elapsed since `epoch` (month arithmetic clamps to month ends).
pub fn temporal_features(created_at: i64, epoch: i64) -> Result<Temporal> {
    if created_at < epoch {
        return Err(Error::BeforeEpoch { created_at, epoch });
    }
    let t = utc(created_at)?;
    let e = utc(epoch)?;
    let mut months = ((t.year() - e.year()) * 12 + t.month() as i32 - e.month() as i32).max(0) as u32;
    while months > 0 && e.checked_add_months(Months::new(months)).is_none_or(|m| m > t) {
        months -= 1;
    }
    Ok(Temporal {
        community_age_months: months,
        first_half_month: t.day() <= 15,
        month: t.month(),
        weekday: t.weekday().num_days_from_monday(),
        hour: t.hour(),
        day_of_month: t.day(),
    })
}
