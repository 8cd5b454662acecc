use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ensure_dir, write_csv, write_json};
use crate::corpus::{Corpus, RequestRecord};
use crate::error::{Error, Result};
use crate::features::{detect_gratitude, detect_reciprocity, percentile, status_at, COMMUNITY};
use crate::similarity::GiverReceiverPair;
use crate::stats::{binomial_test, Tail};

/// What counts as a successful requester later giving back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReciprocityDefinition {
    /// Named as the giver of a later request.
    GiverRecord,
    /// Has a later giving event in the community history.
    GivingEvent,
    #[default]
    Either,
}

impl ReciprocityDefinition {
    pub const ALL: [ReciprocityDefinition; 3] = [
        ReciprocityDefinition::GiverRecord,
        ReciprocityDefinition::GivingEvent,
        ReciprocityDefinition::Either,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReciprocityDefinition::GiverRecord => "giver-record",
            ReciprocityDefinition::GivingEvent => "giving-event",
            ReciprocityDefinition::Either => "either",
        }
    }
}

/// Times at which each user gave, from giver fields of the corpus plus any
/// extra pairs.
fn giving_times(corpus: &Corpus, extra: &[GiverReceiverPair]) -> HashMap<String, Vec<i64>> {
    let mut out: HashMap<String, Vec<i64>> = HashMap::new();
    for r in corpus.requests() {
        if let Some(g) = &r.giver {
            out.entry(g.clone()).or_default().push(r.created_at);
        }
    }
    for p in extra {
        out.entry(p.giver.clone()).or_default().push(p.t);
    }
    out
}

pub fn reciprocated(
    corpus: &Corpus,
    request: &RequestRecord,
    definition: ReciprocityDefinition,
    extra: &[GiverReceiverPair],
) -> bool {
    reciprocated_with(corpus, request, definition, &giving_times(corpus, extra))
}

fn reciprocated_with(
    corpus: &Corpus,
    request: &RequestRecord,
    definition: ReciprocityDefinition,
    gave: &HashMap<String, Vec<i64>>,
) -> bool {
    let user = request.requester.as_str();
    let t = request.created_at;
    let by_record = || gave.get(user).is_some_and(|ts| ts.iter().any(|&g| g > t));
    let by_event = || corpus.gave_after(user, t, COMMUNITY);
    match definition {
        ReciprocityDefinition::GiverRecord => by_record(),
        ReciprocityDefinition::GivingEvent => by_event(),
        ReciprocityDefinition::Either => by_record() || by_event(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupRate {
    pub group: String,
    pub n: usize,
    pub reciprocated: usize,
    pub rate: Option<f64>,
    /// One-sided binomial test of the subgroup rate exceeding the baseline.
    pub p_greater: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReciprocityReport {
    pub definition: ReciprocityDefinition,
    pub baseline: SubgroupRate,
    pub claimed_forward: SubgroupRate,
    pub gratitude: SubgroupRate,
    pub high_status: SubgroupRate,
    pub high_status_karma_cut: f64,
}

impl ReciprocityReport {
    pub fn groups(&self) -> [&SubgroupRate; 4] {
        [&self.baseline, &self.claimed_forward, &self.gratitude, &self.high_status]
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        ensure_dir(dir)?;
        let name = self.definition.name();
        let rows: Vec<SubgroupRate> = self.groups().into_iter().cloned().collect();
        write_csv(&dir.join(format!("reciprocity_{name}.csv")), &rows)?;
        write_json(&dir.join(format!("reciprocity_{name}.json")), self)
    }
}

/// Follow-through among successful requests: the share that later gave,
/// overall and within the claimed-forward, gratitude and high-status
/// subgroups. High status is karma at or above the given upper quantile of
/// successful requesters.
pub fn run_reciprocity_study(
    corpus: &Corpus,
    definition: ReciprocityDefinition,
    high_status_fraction: f64,
    extra_pairs: &[GiverReceiverPair],
) -> Result<ReciprocityReport> {
    if !(high_status_fraction > 0.0 && high_status_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "high-status fraction {high_status_fraction} outside (0, 1)"
        )));
    }
    let successful: Vec<&RequestRecord> = corpus.requests().iter().filter(|r| r.success).collect();
    if successful.is_empty() {
        return Err(Error::InvalidArgument("no successful requests".into()));
    }
    let gave = giving_times(corpus, extra_pairs);
    let outcome: Vec<bool> = successful
        .iter()
        .map(|r| reciprocated_with(corpus, r, definition, &gave))
        .collect();
    let karma: Vec<f64> = successful.iter().map(|r| status_at(r, corpus).karma as f64).collect();
    let mut sorted = karma.clone();
    sorted.sort_by(f64::total_cmp);
    let cut = percentile(&sorted, 100.0 * (1.0 - high_status_fraction));

    let k_all = outcome.iter().filter(|&&o| o).count();
    let base_rate = k_all as f64 / outcome.len() as f64;
    let group = |name: &str, member: &dyn Fn(usize) -> bool, test: bool| -> Result<SubgroupRate> {
        let idx: Vec<usize> = (0..successful.len()).filter(|&i| member(i)).collect();
        let k = idx.iter().filter(|&&i| outcome[i]).count();
        let n = idx.len();
        let p = if test && n > 0 && base_rate > 0.0 && base_rate < 1.0 {
            Some(binomial_test(k as u64, n as u64, base_rate, Tail::Greater)?.p)
        } else {
            None
        };
        Ok(SubgroupRate {
            group: name.to_string(),
            n,
            reciprocated: k,
            rate: (n > 0).then(|| k as f64 / n as f64),
            p_greater: p,
        })
    };
    let texts: Vec<String> = successful.iter().map(|r| r.full_text()).collect();
    Ok(ReciprocityReport {
        definition,
        baseline: group("all-successful", &|_| true, false)?,
        claimed_forward: group("claimed-forward", &|i| detect_reciprocity(&texts[i]), true)?,
        gratitude: group("gratitude", &|i| detect_gratitude(&texts[i]), true)?,
        high_status: group("high-status", &|i| karma[i] >= cut, true)?,
        high_status_karma_cut: cut,
    })
}
