//! Request and user-history data model, JSON-lines ingestion, stratified
//! splitting and point-in-time history queries.
//!
//! All history queries use a strict cut: an event at exactly the query time
//! does not count as "before".

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub id: String,
    #[serde(default)]
    pub requester: String,
    #[serde(default)]
    pub title: String,
    pub body: String,
    /// Unix seconds, UTC.
    pub created_at: i64,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub giver: Option<String>,
    /// Requester status captured by the data provider at request time. Used
    /// only when no event history is available for the requester.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requester_karma: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requester_posted_before: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requester_subreddits: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requester_account_age_days: Option<f64>,
}

impl RequestRecord {
    pub fn new(id: &str, requester: &str, body: &str, created_at: i64, success: bool) -> Self {
        RequestRecord {
            id: id.to_string(),
            requester: requester.to_string(),
            title: String::new(),
            body: body.to_string(),
            created_at,
            success,
            giver: None,
            requester_karma: None,
            requester_posted_before: None,
            requester_subreddits: None,
            requester_account_age_days: None,
        }
    }

    /// Title and body joined, the text scanned by detectors.
    pub fn full_text(&self) -> String {
        if self.title.is_empty() {
            self.body.clone()
        } else {
            format!("{}\n{}", self.title, self.body)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Post,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEvent {
    pub user: String,
    pub subreddit: String,
    pub created_at: i64,
    /// Up-votes minus down-votes.
    pub score: i64,
    pub kind: EventKind,
    /// The event records the user giving to someone else in the community.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub gave: bool,
}

pub type Histories = BTreeMap<String, Vec<HistoryEvent>>;

/// An immutable request collection plus the event histories of its users.
#[derive(Debug, Clone)]
pub struct Corpus {
    requests: Vec<RequestRecord>,
    index: HashMap<String, usize>,
    histories: Arc<Histories>,
    epoch: Option<i64>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.requests == other.requests
            && self.histories == other.histories
            && self.epoch == other.epoch
    }
}

impl Corpus {
    /// Validates records and sorts each user's history by time. The epoch is
    /// the earliest request time.
    pub fn new(requests: Vec<RequestRecord>, mut histories: Histories) -> Result<Self> {
        for r in &requests {
            validate_request(r).map_err(Error::InvalidArgument)?;
        }
        for events in histories.values_mut() {
            events.sort_by_key(|e| e.created_at);
        }
        let epoch = requests.iter().map(|r| r.created_at).min();
        Self::assemble(requests, Arc::new(histories), epoch)
    }

    fn assemble(
        requests: Vec<RequestRecord>,
        histories: Arc<Histories>,
        epoch: Option<i64>,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(requests.len());
        for (i, r) in requests.iter().enumerate() {
            if index.insert(r.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(Corpus {
            requests,
            index,
            histories,
            epoch,
        })
    }

    pub fn requests(&self) -> &[RequestRecord] {
        &self.requests
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&RequestRecord> {
        self.index.get(id).map(|&i| &self.requests[i])
    }

    pub fn histories(&self) -> &Histories {
        &self.histories
    }

    pub fn history(&self, user: &str) -> &[HistoryEvent] {
        self.histories.get(user).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Start of the community. Splits inherit the epoch of the corpus they
    /// were drawn from, so community age is comparable across them.
    pub fn epoch(&self) -> Result<i64> {
        self.epoch.ok_or(Error::EmptyCorpus)
    }

    pub fn success_rate(&self) -> Option<f64> {
        if self.requests.is_empty() {
            return None;
        }
        let s = self.requests.iter().filter(|r| r.success).count();
        Some(s as f64 / self.requests.len() as f64)
    }

    pub fn labels(&self) -> Vec<bool> {
        self.requests.iter().map(|r| r.success).collect()
    }

    /// Hex SHA-256 over request ids and outcomes, in corpus order.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for r in &self.requests {
            h.update(r.id.as_bytes());
            h.update([0u8, r.success as u8]);
        }
        hex::encode(h.finalize())
    }

    /// A sub-corpus holding the requests whose ids are in `ids`, sharing
    /// histories and epoch with `self`.
    pub fn subset(&self, ids: &HashSet<&str>) -> Corpus {
        let requests = self
            .requests
            .iter()
            .filter(|r| ids.contains(r.id.as_str()))
            .cloned()
            .collect();
        Corpus::assemble(requests, Arc::clone(&self.histories), self.epoch)
            .expect("subset of a valid corpus has unique ids")
    }

    fn before<'a>(&'a self, user: &str, t: i64) -> &'a [HistoryEvent] {
        let events = self.history(user);
        let cut = events.partition_point(|e| e.created_at < t);
        &events[..cut]
    }

    /// Sum of scores of the user's events strictly before `t`.
    pub fn karma_at(&self, user: &str, t: i64) -> i64 {
        self.before(user, t).iter().map(|e| e.score).sum()
    }

    /// Whether the user posted or commented in `community` strictly before `t`.
    pub fn posted_in_community_before(&self, user: &str, t: i64, community: &str) -> bool {
        self.posted_in_community_before_with(user, t, community, true)
    }

    pub fn posted_in_community_before_with(
        &self,
        user: &str,
        t: i64,
        community: &str,
        count_comments: bool,
    ) -> bool {
        self.before(user, t).iter().any(|e| {
            e.subreddit.eq_ignore_ascii_case(community)
                && (count_comments || e.kind == EventKind::Post)
        })
    }

    pub fn subreddit_set_before(&self, user: &str, t: i64) -> BTreeSet<String> {
        self.before(user, t).iter().map(|e| e.subreddit.clone()).collect()
    }

    /// Days between the user's first recorded event and `t`, if any event
    /// precedes `t`.
    pub fn account_age_days_at(&self, user: &str, t: i64) -> Option<f64> {
        self.before(user, t)
            .first()
            .map(|e| (t - e.created_at) as f64 / 86_400.0)
    }

    /// Whether the user has a giving event in `community` strictly after `t`.
    pub fn gave_after(&self, user: &str, t: i64, community: &str) -> bool {
        self.history(user).iter().any(|e| {
            e.gave && e.created_at > t && e.subreddit.eq_ignore_ascii_case(community)
        })
    }
}

fn validate_request(r: &RequestRecord) -> std::result::Result<(), String> {
    if r.created_at <= 0 {
        return Err(format!("request {}: created_at must be positive", r.id));
    }
    if r.giver.is_some() && !r.success {
        return Err(format!("request {}: giver recorded on an unsuccessful request", r.id));
    }
    Ok(())
}

/// Maps canonical field names to the names used by a source file. Fields
/// absent from the map are looked up under their canonical name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldMap {
    #[serde(default)]
    pub requests: BTreeMap<String, String>,
    #[serde(default)]
    pub histories: BTreeMap<String, String>,
}

impl FieldMap {
    /// Parses `[requests]` and `[histories]` tables of `canonical = "source"`
    /// entries.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }

    /// Mapping for the public single-request release, where the prior-post
    /// field is a count.
    pub fn raop_public() -> Self {
        Self::from_toml_str(include_str!("../data/raop_fieldmap.toml")).expect("bundled field map parses")
    }

    fn request_field<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.requests.get(canonical).map(String::as_str).unwrap_or(canonical)
    }

    fn history_field<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.histories.get(canonical).map(String::as_str).unwrap_or(canonical)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordSource {
    Requests,
    Histories,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedRecord {
    pub source: RecordSource,
    /// 1-based line (or array position) in the source file.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub corpus: Corpus,
    pub rejected: Vec<RejectedRecord>,
}

/// Values treated as "no giver".
const GIVER_NULLS: &[&str] = &["", "N/A", "n/a", "[deleted]"];

/// Loads requests (and optionally histories) from JSON-lines files. A file
/// whose first non-blank character is `[` is read as a JSON array instead.
/// Malformed records are skipped and reported; a duplicate request id is a
/// hard error.
pub fn ingest(
    requests_path: &Path,
    histories_path: Option<&Path>,
    field_map: &FieldMap,
) -> Result<IngestReport> {
    let mut rejected = Vec::new();
    let mut requests = Vec::new();
    for (line, item) in read_records(requests_path)? {
        match item.and_then(|v| parse_request(&v, field_map)) {
            Ok(r) => requests.push(r),
            Err(reason) => rejected.push(RejectedRecord {
                source: RecordSource::Requests,
                line,
                reason,
            }),
        }
    }
    let mut histories = Histories::new();
    if let Some(path) = histories_path {
        for (line, item) in read_records(path)? {
            match item.and_then(|v| parse_event(&v, field_map)) {
                Ok(e) => histories.entry(e.user.clone()).or_default().push(e),
                Err(reason) => rejected.push(RejectedRecord {
                    source: RecordSource::Histories,
                    line,
                    reason,
                }),
            }
        }
    }
    if !rejected.is_empty() {
        log::warn!("ingest skipped {} malformed records", rejected.len());
    }
    let corpus = Corpus::new(requests, histories)?;
    Ok(IngestReport { corpus, rejected })
}

type RawRecord = std::result::Result<Value, String>;

fn read_records(path: &Path) -> Result<Vec<(usize, RawRecord)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim_start().starts_with('[') {
        let items: Vec<Value> = serde_json::from_str(&text)?;
        return Ok(items.into_iter().enumerate().map(|(i, v)| (i + 1, Ok(v))).collect());
    }
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, serde_json::from_str(l).map_err(|e| format!("invalid json: {e}"))))
        .collect())
}

fn object(v: &Value) -> std::result::Result<&Map<String, Value>, String> {
    v.as_object().ok_or_else(|| "record is not a JSON object".to_string())
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str) -> Option<&'a Value> {
    obj.get(name).filter(|v| !v.is_null())
}

fn required<'a>(
    obj: &'a Map<String, Value>,
    canonical: &str,
    source: &str,
) -> std::result::Result<&'a Value, String> {
    field(obj, source).ok_or_else(|| {
        if canonical == source {
            format!("missing mandatory field `{canonical}`")
        } else {
            format!("missing mandatory field `{canonical}` (source `{source}`)")
        }
    })
}

fn as_string(v: &Value, name: &str) -> std::result::Result<String, String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(format!("field `{name}` is not a string")),
    }
}

fn as_timestamp(v: &Value, name: &str) -> std::result::Result<i64, String> {
    let t = match v {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().map(|f| f.floor() as i64)),
        Value::String(s) => s.trim().parse::<f64>().ok().map(|f| f.floor() as i64),
        _ => None,
    };
    t.ok_or_else(|| format!("field `{name}` is not a unix timestamp"))
}

fn as_integer(v: &Value, name: &str) -> std::result::Result<i64, String> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .or_else(|| n.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64)),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
    .ok_or_else(|| format!("field `{name}` is not an integer"))
}

fn as_bool(v: &Value, name: &str) -> std::result::Result<bool, String> {
    match v {
        Value::Bool(b) => Some(*b),
        Value::Number(n) => match n.as_f64() {
            Some(0.0) => Some(false),
            Some(1.0) => Some(true),
            _ => None,
        },
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => Some(true),
            "false" | "0" | "no" => Some(false),
            _ => None,
        },
        _ => None,
    }
    .ok_or_else(|| format!("field `{name}` is not a boolean"))
}

fn parse_request(v: &Value, map: &FieldMap) -> std::result::Result<RequestRecord, String> {
    let obj = object(v)?;
    let name = |c: &'static str| map.request_field(c);
    let id = as_string(required(obj, "id", name("id"))?, "id")?;
    let body = as_string(required(obj, "body", name("body"))?, "body")?;
    let created_at = as_timestamp(required(obj, "created_at", name("created_at"))?, "created_at")?;
    let success = as_bool(required(obj, "success", name("success"))?, "success")?;
    let optional_string = |c: &'static str| -> std::result::Result<Option<String>, String> {
        field(obj, name(c)).map(|v| as_string(v, c)).transpose()
    };
    let giver = optional_string("giver")?.filter(|g| !GIVER_NULLS.contains(&g.trim()));
    let subreddits = match field(obj, name("requester_subreddits")) {
        None => None,
        Some(Value::Array(items)) => Some(
            items
                .iter()
                .map(|s| as_string(s, "requester_subreddits"))
                .collect::<std::result::Result<Vec<_>, _>>()?,
        ),
        Some(_) => return Err("field `requester_subreddits` is not a list".into()),
    };
    let record = RequestRecord {
        id,
        requester: optional_string("requester")?.unwrap_or_default(),
        title: optional_string("title")?.unwrap_or_default(),
        body,
        created_at,
        success,
        giver,
        requester_karma: field(obj, name("requester_karma"))
            .map(|v| as_integer(v, "requester_karma"))
            .transpose()?,
        requester_posted_before: field(obj, name("requester_posted_before"))
            .map(|v| match v {
                Value::Number(n) if n.as_f64().is_some_and(|x| x > 1.0) => Ok(true),
                _ => as_bool(v, "requester_posted_before"),
            })
            .transpose()?,
        requester_subreddits: subreddits,
        requester_account_age_days: field(obj, name("requester_account_age_days"))
            .map(|v| v.as_f64().ok_or("field `requester_account_age_days` is not a number"))
            .transpose()?,
    };
    validate_request(&record)?;
    Ok(record)
}

fn parse_event(v: &Value, map: &FieldMap) -> std::result::Result<HistoryEvent, String> {
    let obj = object(v)?;
    let name = |c: &'static str| map.history_field(c);
    let created_at = as_timestamp(required(obj, "created_at", name("created_at"))?, "created_at")?;
    if created_at <= 0 {
        return Err("created_at must be positive".into());
    }
    let kind = match field(obj, name("kind")) {
        None => EventKind::Post,
        Some(v) => match as_string(v, "kind")?.to_ascii_lowercase().as_str() {
            "post" | "submission" => EventKind::Post,
            "comment" => EventKind::Comment,
            other => return Err(format!("unknown event kind `{other}`")),
        },
    };
    Ok(HistoryEvent {
        user: as_string(required(obj, "user", name("user"))?, "user")?,
        subreddit: as_string(required(obj, "subreddit", name("subreddit"))?, "subreddit")?,
        created_at,
        score: as_integer(required(obj, "score", name("score"))?, "score")?,
        kind,
        gave: field(obj, name("gave")).map(|v| as_bool(v, "gave")).transpose()?.unwrap_or(false),
    })
}

/// Writes records as canonical JSON lines.
pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

impl Corpus {
    /// Writes the canonical requests file and, if given, the histories file.
    pub fn write(&self, requests_path: &Path, histories_path: Option<&Path>) -> Result<()> {
        write_jsonl(requests_path, &self.requests)?;
        if let Some(p) = histories_path {
            write_jsonl(p, self.histories.values().flatten())?;
        }
        Ok(())
    }
}

/// Minimum count of each class for [`stratified_split`].
pub const MIN_CLASS_COUNT: usize = 10;

/// Deterministic per-class shuffle; the first `ceil(dev_fraction * n_class)`
/// requests of each class go to the development side.
pub fn stratified_split(corpus: &Corpus, dev_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    stratified_split_with(corpus, dev_fraction, seed, MIN_CLASS_COUNT)
}

pub fn stratified_split_with(
    corpus: &Corpus,
    dev_fraction: f64,
    seed: u64,
    min_per_class: usize,
) -> Result<(Corpus, Corpus)> {
    if !(dev_fraction > 0.0 && dev_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "dev_fraction must lie in (0, 1), got {dev_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dev_ids: HashSet<&str> = HashSet::new();
    for class in [true, false] {
        let mut ids: Vec<&str> = corpus
            .requests
            .iter()
            .filter(|r| r.success == class)
            .map(|r| r.id.as_str())
            .collect();
        if ids.len() < min_per_class.max(1) {
            return Err(Error::Stratification(format!(
                "{} requests labelled {class}, need at least {}",
                ids.len(),
                min_per_class.max(1)
            )));
        }
        ids.shuffle(&mut rng);
        let take = (dev_fraction * ids.len() as f64).ceil() as usize;
        dev_ids.extend(&ids[..take.min(ids.len())]);
    }
    let test_ids: HashSet<&str> = corpus
        .requests
        .iter()
        .map(|r| r.id.as_str())
        .filter(|id| !dev_ids.contains(id))
        .collect();
    Ok((corpus.subset(&dev_ids), corpus.subset(&test_ids)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn event(user: &str, sub: &str, t: i64, score: i64, kind: EventKind) -> HistoryEvent {
        HistoryEvent {
            user: user.into(),
            subreddit: sub.into(),
            created_at: t,
            score,
            kind,
            gave: false,
        }
    }

    fn corpus_with_history(events: Vec<HistoryEvent>) -> Corpus {
        let mut h = Histories::new();
        for e in events {
            h.entry(e.user.clone()).or_default().push(e);
        }
        Corpus::new(vec![RequestRecord::new("r1", "u", "", 1000, false)], h).unwrap()
    }

    #[test]
    fn karma_queries() {
        let c = corpus_with_history(vec![
            event("u", "pics", 200, 3, EventKind::Post),
            event("u", "aww", 100, 5, EventKind::Comment),
        ]);
        assert_eq!(c.karma_at("nobody", 150), 0);
        assert_eq!(c.karma_at("u", 150), 5);
        assert_eq!(c.karma_at("u", 100), 0);
        assert_eq!(c.karma_at("u", 201), 8);
    }

    #[test]
    fn community_membership() {
        let c = corpus_with_history(vec![
            event("u", "Random_Acts_Of_Pizza", 99, 1, EventKind::Comment),
            event("v", "random_acts_of_pizza", 100, 1, EventKind::Post),
        ]);
        assert!(!c.posted_in_community_before("nobody", 100, "Random_Acts_Of_Pizza"));
        assert!(c.posted_in_community_before("u", 100, "Random_Acts_Of_Pizza"));
        assert!(!c.posted_in_community_before_with("u", 100, "Random_Acts_Of_Pizza", false));
        assert!(!c.posted_in_community_before("v", 100, "Random_Acts_Of_Pizza"));
        assert!(c.posted_in_community_before("v", 101, "Random_Acts_Of_Pizza"));
    }

    #[test]
    fn subreddit_sets() {
        let c = corpus_with_history(vec![
            event("u", "aww", 10, 1, EventKind::Post),
            event("u", "pics", 20, 1, EventKind::Post),
            event("u", "aww", 30, 1, EventKind::Post),
            event("w", "later", 500, 1, EventKind::Post),
        ]);
        assert!(c.subreddit_set_before("nobody", 100).is_empty());
        let want: BTreeSet<String> = ["aww".to_string(), "pics".to_string()].into();
        assert_eq!(c.subreddit_set_before("u", 100), want);
        assert!(c.subreddit_set_before("w", 100).is_empty());
    }

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn ingest_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "r.jsonl", "");
        let rep = ingest(&p, None, &FieldMap::default()).unwrap();
        assert!(rep.corpus.is_empty());
        assert!(matches!(rep.corpus.epoch(), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn ingest_duplicate_id_is_hard_error() {
        let dir = tempfile::tempdir().unwrap();
        let line = r#"{"id":"a","body":"x","created_at":5,"success":true}"#;
        let p = write(dir.path(), "r.jsonl", &format!("{line}\n{line}\n"));
        assert!(matches!(ingest(&p, None, &FieldMap::default()), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn ingest_rejects_and_maps_fields() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "r.jsonl",
            concat!(
                r#"{"request_id":"a","request_text":"hi","unix_timestamp_of_request_utc":1317852607.0,"requester_received_pizza":true,"giver_username_if_known":"N/A"}"#,
                "\n",
                r#"{"request_id":"b","request_text":"hi","requester_received_pizza":false}"#,
                "\nnot json\n\n",
                r#"{"request_id":"c","request_text":"","unix_timestamp_of_request_utc":7,"requester_received_pizza":0,"giver_username_if_known":"g"}"#,
                "\n",
            ),
        );
        let map = FieldMap::from_toml_str(
            r#"
            [requests]
            id = "request_id"
            body = "request_text"
            created_at = "unix_timestamp_of_request_utc"
            success = "requester_received_pizza"
            giver = "giver_username_if_known"
            "#,
        )
        .unwrap();
        let rep = ingest(&p, None, &map).unwrap();
        assert_eq!(rep.corpus.len(), 1);
        let a = rep.corpus.get("a").unwrap();
        assert_eq!(a.created_at, 1317852607);
        assert_eq!(a.giver, None);
        let lines: Vec<usize> = rep.rejected.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![2, 3, 5]);
        assert!(rep.rejected[0].reason.contains("created_at"));
        assert!(rep.rejected[2].reason.contains("giver"));
    }

    #[test]
    fn ingest_json_array_and_histories() {
        let dir = tempfile::tempdir().unwrap();
        let r = write(
            dir.path(),
            "r.json",
            r#"[{"id":"a","requester":"u","body":"x","created_at":50,"success":false}]"#,
        );
        let h = write(
            dir.path(),
            "h.jsonl",
            concat!(
                r#"{"user":"u","subreddit":"aww","created_at":40,"score":3,"kind":"comment"}"#,
                "\n",
                r#"{"user":"u","subreddit":"aww","created_at":10,"score":2,"kind":"post"}"#,
                "\n",
                r#"{"user":"u","subreddit":"aww","created_at":10,"score":2,"kind":"tweet"}"#,
                "\n"
            ),
        );
        let rep = ingest(&r, Some(&h), &FieldMap::default()).unwrap();
        assert_eq!(rep.rejected.len(), 1);
        assert_eq!(rep.rejected[0].source, RecordSource::Histories);
        let hist = rep.corpus.history("u");
        assert_eq!(hist.len(), 2);
        assert!(hist[0].created_at <= hist[1].created_at);
        assert_eq!(rep.corpus.karma_at("u", 50), 5);
    }

    #[test]
    fn unreadable_file() {
        assert!(matches!(
            ingest(Path::new("/nonexistent/requests.jsonl"), None, &FieldMap::default()),
            Err(Error::Io { .. })
        ));
    }

    fn balanced(n_pos: usize, n_neg: usize) -> Corpus {
        let reqs = (0..n_pos + n_neg)
            .map(|i| RequestRecord::new(&format!("r{i}"), "u", "", 100 + i as i64, i < n_pos))
            .collect();
        Corpus::new(reqs, Histories::new()).unwrap()
    }

    #[test]
    fn split_small_symmetric() {
        let c = balanced(2, 2);
        let (dev, test) = stratified_split_with(&c, 0.5, 1, 1).unwrap();
        assert_eq!(dev.len(), 2);
        assert_eq!(test.len(), 2);
        assert_eq!(dev.labels().iter().filter(|&&l| l).count(), 1);
        assert_eq!(test.labels().iter().filter(|&&l| l).count(), 1);
        assert!(matches!(stratified_split(&c, 0.5, 1), Err(Error::Stratification(_))));
        assert!(stratified_split(&c, 1.0, 1).is_err());
    }

    #[test]
    fn split_rate_and_epoch() {
        let c = balanced(246, 754);
        let (dev, test) = stratified_split(&c, 0.7, 42).unwrap();
        let rate = c.success_rate().unwrap();
        assert!((dev.success_rate().unwrap() - rate).abs() <= 0.005);
        assert!((test.success_rate().unwrap() - rate).abs() <= 0.005);
        assert_eq!(dev.epoch().unwrap(), c.epoch().unwrap());
        assert_eq!(test.epoch().unwrap(), c.epoch().unwrap());
    }

    #[test]
    fn round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut h = Histories::new();
        h.insert(
            "u".into(),
            vec![
                event("u", "aww", 10, -2, EventKind::Comment),
                HistoryEvent { gave: true, ..event("u", "RAOP", 20, 4, EventKind::Post) },
            ],
        );
        let mut r = RequestRecord::new("a", "u", "some body", 30, true);
        r.title = "t".into();
        r.giver = Some("g".into());
        r.requester_subreddits = Some(vec!["aww".into()]);
        let c = Corpus::new(vec![r, RequestRecord::new("b", "v", "", 31, false)], h).unwrap();
        let rp = dir.path().join("r.jsonl");
        let hp = dir.path().join("h.jsonl");
        c.write(&rp, Some(&hp)).unwrap();
        let back = ingest(&rp, Some(&hp), &FieldMap::default()).unwrap();
        assert!(back.rejected.is_empty());
        assert_eq!(back.corpus, c);
    }

    proptest! {
        #[test]
        fn split_partitions(seed in any::<u64>(), n_pos in 10usize..40, n_neg in 10usize..60) {
            let c = balanced(n_pos, n_neg);
            let (dev, test) = stratified_split(&c, 0.7, seed).unwrap();
            prop_assert_eq!(dev.len() + test.len(), c.len());
            for r in c.requests() {
                prop_assert!(dev.get(&r.id).is_some() ^ test.get(&r.id).is_some());
            }
            let (dev2, _) = stratified_split(&c, 0.7, seed).unwrap();
            prop_assert_eq!(dev, dev2);
        }

        #[test]
        fn karma_monotone(scores in proptest::collection::vec((1i64..1000, 0i64..50), 0..20),
                          t1 in 0i64..1100, dt in 0i64..200) {
            let events: Vec<HistoryEvent> = scores
                .iter()
                .map(|&(t, s)| event("u", "x", t, s, EventKind::Post))
                .collect();
            let first = events.iter().map(|e| e.created_at).min();
            let c = corpus_with_history(events);
            prop_assert!(c.karma_at("u", t1) <= c.karma_at("u", t1 + dt));
            if let Some(f) = first {
                prop_assert_eq!(c.karma_at("u", f), 0);
            }
        }
    }
}
