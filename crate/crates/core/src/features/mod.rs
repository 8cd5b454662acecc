//! Request factors: narrative lexicons, evidence, gratitude, reciprocity,
//! sentiment, length, status and timing. [`extract_raw`] measures them from
//! a request and its requester's history; [`EncoderMeta`] freezes the
//! development-split statistics used to turn them into model inputs.

mod detect;
mod encode;

pub use detect::{
    detect_emoticon, detect_gratitude, detect_image, detect_narratives, detect_reciprocity,
    sentiment_features, temporal_features, Narrative, NarrativeHits, NarrativeLexicons,
    Sentiment, SentimentLexicons, Temporal, EMOTICON_PATTERN, GRATITUDE_PATTERN,
    IMAGE_LINK_PATTERN, RECIPROCITY_PATTERN,
};
pub use encode::{
    decile_code, encode, feature_names, fit_encoder, percentile, EncoderMeta, FeatureVector,
    Scheme, DECILE_FEATURES, MEDIAN_FEATURES,
};

use serde::Serialize;

use crate::corpus::{Corpus, RequestRecord};
use crate::error::Result;
use crate::textkit::word_count;

/// The community whose prior participation counts as "posted before".
pub const COMMUNITY: &str = "Random_Acts_Of_Pizza";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawFeatures {
    pub request_id: String,
    pub narrative_counts: [usize; 5],
    /// Lexicon hits over body word count, indexed by [`Narrative::index`].
    pub narrative_frac: [f64; 5],
    pub gratitude: bool,
    pub reciprocity: bool,
    pub has_image: bool,
    pub pos_sentence_frac: f64,
    pub neg_sentence_frac: f64,
    pub pos_word_frac: f64,
    pub neg_word_frac: f64,
    pub has_emoticon: bool,
    pub n_words: usize,
    pub karma: i64,
    pub posted_before: bool,
    pub account_age_days: f64,
    pub community_age_months: u32,
    pub first_half_month: bool,
    pub month: u32,
    pub weekday: u32,
    pub hour: u32,
    pub day_of_month: u32,
}

impl RawFeatures {
    pub fn narrative(&self, n: Narrative) -> f64 {
        self.narrative_frac[n.index()]
    }

    /// Flat `(name, value)` view of every field except the id, in a stable
    /// order. Booleans are 0/1.
    pub fn fields(&self) -> Vec<(String, f64)> {
        let b = |v: bool| if v { 1.0 } else { 0.0 };
        let mut out = Vec::with_capacity(30);
        for n in Narrative::ALL {
            out.push((format!("{}_count", n.name()), self.narrative_counts[n.index()] as f64));
        }
        for n in Narrative::ALL {
            out.push((format!("{}_frac", n.name()), self.narrative(n)));
        }
        out.extend([
            ("gratitude".to_string(), b(self.gratitude)),
            ("reciprocity".to_string(), b(self.reciprocity)),
            ("has_image".to_string(), b(self.has_image)),
            ("pos_sentence_frac".to_string(), self.pos_sentence_frac),
            ("neg_sentence_frac".to_string(), self.neg_sentence_frac),
            ("pos_word_frac".to_string(), self.pos_word_frac),
            ("neg_word_frac".to_string(), self.neg_word_frac),
            ("has_emoticon".to_string(), b(self.has_emoticon)),
            ("n_words".to_string(), self.n_words as f64),
            ("karma".to_string(), self.karma as f64),
            ("posted_before".to_string(), b(self.posted_before)),
            ("account_age_days".to_string(), self.account_age_days),
            ("community_age_months".to_string(), self.community_age_months as f64),
            ("first_half_month".to_string(), b(self.first_half_month)),
            ("month".to_string(), self.month as f64),
            ("weekday".to_string(), self.weekday as f64),
            ("hour".to_string(), self.hour as f64),
            ("day_of_month".to_string(), self.day_of_month as f64),
        ]);
        out
    }
}

/// Requester status at request time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, serde::Deserialize)]
pub struct UserStatus {
    pub karma: i64,
    pub posted_before: bool,
    pub account_age_days: f64,
}

/// Lexicons used by the text detectors.
#[derive(Debug, Clone, Default)]
pub struct Lexicons {
    pub narratives: NarrativeLexicons,
    pub sentiment: SentimentLexicons,
}

/// Measures every factor from text, status and timing alone. Detectors scan
/// title and body; length and narrative fractions use the body.
pub fn extract_text(
    id: &str,
    title: &str,
    body: &str,
    created_at: i64,
    epoch: i64,
    status: UserStatus,
    lexicons: &Lexicons,
) -> Result<RawFeatures> {
    let scanned = if title.is_empty() {
        body.to_string()
    } else {
        format!("{title}\n{body}")
    };
    let narratives = detect_narratives(body, &lexicons.narratives);
    let sentiment = sentiment_features(&scanned, &lexicons.sentiment);
    let time = temporal_features(created_at, epoch)?;
    Ok(RawFeatures {
        request_id: id.to_string(),
        narrative_counts: narratives.counts,
        narrative_frac: narratives.fractions,
        gratitude: detect_gratitude(&scanned),
        reciprocity: detect_reciprocity(&scanned),
        has_image: detect_image(&scanned),
        pos_sentence_frac: sentiment.pos_sentence_frac,
        neg_sentence_frac: sentiment.neg_sentence_frac,
        pos_word_frac: sentiment.pos_word_frac,
        neg_word_frac: sentiment.neg_word_frac,
        has_emoticon: sentiment.has_emoticon,
        n_words: word_count(body),
        karma: status.karma,
        posted_before: status.posted_before,
        account_age_days: status.account_age_days,
        community_age_months: time.community_age_months,
        first_half_month: time.first_half_month,
        month: time.month,
        weekday: time.weekday,
        hour: time.hour,
        day_of_month: time.day_of_month,
    })
}

/// Requester status at the moment of the request. Event histories take
/// precedence; provider snapshots on the record fill in for users without
/// any recorded events.
pub fn status_at(request: &RequestRecord, corpus: &Corpus) -> UserStatus {
    let user = request.requester.as_str();
    let t = request.created_at;
    if !corpus.history(user).is_empty() {
        return UserStatus {
            karma: corpus.karma_at(user, t),
            posted_before: corpus.posted_in_community_before(user, t, COMMUNITY),
            account_age_days: corpus.account_age_days_at(user, t).unwrap_or(0.0),
        };
    }
    UserStatus {
        karma: request.requester_karma.unwrap_or(0),
        posted_before: request.requester_posted_before.unwrap_or(false),
        account_age_days: request.requester_account_age_days.unwrap_or(0.0),
    }
}

pub fn extract_raw(request: &RequestRecord, corpus: &Corpus, lexicons: &Lexicons) -> Result<RawFeatures> {
    extract_text(
        &request.id,
        &request.title,
        &request.body,
        request.created_at,
        corpus.epoch()?,
        status_at(request, corpus),
        lexicons,
    )
}

/// Extracts every request of the corpus, in corpus order.
pub fn extract_corpus(corpus: &Corpus, lexicons: &Lexicons) -> Result<Vec<RawFeatures>> {
    corpus.requests().iter().map(|r| extract_raw(r, corpus, lexicons)).collect()
}
