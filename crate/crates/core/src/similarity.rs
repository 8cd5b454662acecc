//! Interest overlap between givers and receivers, compared against a
//! rewired null model of giver/receiver pairs.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::features::COMMUNITY;
use crate::stats::{mann_whitney_u, trapezoid, write_xy_csv, GaussianKde, Tail, TestResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Intersection,
    Jaccard,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Intersection, Metric::Jaccard];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Intersection => "intersection",
            Metric::Jaccard => "jaccard",
        }
    }

    /// KDE bandwidth used for plots of this metric unless overridden.
    pub fn default_bandwidth(self) -> f64 {
        match self {
            Metric::Intersection => 0.5,
            Metric::Jaccard => 0.03,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "intersection" => Ok(Metric::Intersection),
            "jaccard" => Ok(Metric::Jaccard),
            other => Err(Error::InvalidArgument(format!("unknown similarity metric {other:?}"))),
        }
    }
}

/// `|A ∩ B|`, or `|A ∩ B| / |A ∪ B|` with two empty sets scoring 0.
pub fn pair_similarity<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>, metric: Metric) -> f64 {
    let inter = a.intersection(b).count();
    match metric {
        Metric::Intersection => inter as f64,
        Metric::Jaccard => {
            let union = a.len() + b.len() - inter;
            if union == 0 {
                0.0
            } else {
                inter as f64 / union as f64
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GiverReceiverPair {
    pub request_id: String,
    pub giver: String,
    pub receiver: String,
    /// Time of the receiver's request, unix seconds.
    pub t: i64,
}

impl GiverReceiverPair {
    pub fn new(request_id: &str, giver: &str, receiver: &str, t: i64) -> Result<Self> {
        if giver == receiver {
            return Err(Error::InvalidArgument(format!(
                "request {request_id}: giver and receiver are both {giver:?}"
            )));
        }
        Ok(GiverReceiverPair {
            request_id: request_id.to_string(),
            giver: giver.to_string(),
            receiver: receiver.to_string(),
            t,
        })
    }
}

/// One line of a pairs file. `receiver` and `t` are filled in from the
/// corpus when omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub request_id: String,
    pub giver: String,
    #[serde(default)]
    pub receiver: Option<String>,
    #[serde(default)]
    pub t: Option<i64>,
}

pub fn read_pair_records(path: &Path) -> Result<Vec<PairRecord>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PairRecord = serde_json::from_str(&line).map_err(|e| {
            Error::Schema(format!("{}:{}: {e}", path.display(), n + 1))
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Resolves pair records against the corpus. Records whose giver equals
/// the receiver are dropped and counted.
pub fn resolve_pairs(records: &[PairRecord], corpus: &Corpus) -> Result<(Vec<GiverReceiverPair>, usize)> {
    let mut pairs = Vec::with_capacity(records.len());
    let mut self_pairs = 0;
    for r in records {
        let request = corpus.get(&r.request_id);
        let receiver = match (&r.receiver, request) {
            (Some(v), _) => v.clone(),
            (None, Some(req)) => req.requester.clone(),
            (None, None) => {
                return Err(Error::InvalidArgument(format!(
                    "pair for unknown request {} has no receiver",
                    r.request_id
                )))
            }
        };
        let t = match (r.t, request) {
            (Some(t), _) => t,
            (None, Some(req)) => req.created_at,
            (None, None) => {
                return Err(Error::InvalidArgument(format!(
                    "pair for unknown request {} has no time",
                    r.request_id
                )))
            }
        };
        if receiver == r.giver {
            self_pairs += 1;
            continue;
        }
        pairs.push(GiverReceiverPair::new(&r.request_id, &r.giver, &receiver, t)?);
    }
    Ok((pairs, self_pairs))
}

/// Pairs recorded directly on successful requests that name a giver.
pub fn pairs_from_corpus(corpus: &Corpus) -> Vec<GiverReceiverPair> {
    corpus
        .requests()
        .iter()
        .filter_map(|r| {
            let g = r.giver.as_deref()?;
            GiverReceiverPair::new(&r.id, g, &r.requester, r.created_at).ok()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullModel {
    /// Uniform draws from all unobserved giver/receiver combinations.
    #[default]
    Uniform,
    /// Permutations of the observed givers over the observed receivers, so
    /// every giver keeps its number of gifts.
    DegreePreserving,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSample {
    pub pairs: Vec<GiverReceiverPair>,
    pub model: NullModel,
    /// The request exceeded the number of distinct unobserved pairs, so
    /// pairs were drawn with replacement.
    pub with_replacement: bool,
}

pub fn null_pairs(pairs: &[GiverReceiverPair], n_samples: usize, seed: u64) -> Result<NullSample> {
    null_pairs_with(pairs, n_samples, seed, NullModel::Uniform)
}

/// Random giver/receiver pairs that never occurred. A null pair borrows
/// the request id and time of an observed pair of its receiver.
pub fn null_pairs_with(
    pairs: &[GiverReceiverPair],
    n_samples: usize,
    seed: u64,
    model: NullModel,
) -> Result<NullSample> {
    let givers: Vec<&str> = distinct(pairs.iter().map(|p| p.giver.as_str()));
    let receivers: Vec<&str> = distinct(pairs.iter().map(|p| p.receiver.as_str()));
    if givers.len() < 2 || receivers.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "null model needs at least 2 distinct givers and receivers, got {} and {}",
            givers.len(),
            receivers.len()
        )));
    }
    let observed: HashSet<(&str, &str)> =
        pairs.iter().map(|p| (p.giver.as_str(), p.receiver.as_str())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match model {
        NullModel::Uniform => uniform_null(pairs, &givers, &receivers, &observed, n_samples, &mut rng),
        NullModel::DegreePreserving => degree_preserving_null(pairs, &observed, n_samples, &mut rng),
    }
}

fn distinct<'a>(it: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let set: BTreeSet<&str> = it.collect();
    set.into_iter().collect()
}

fn anchor<'a>(pairs: &'a [GiverReceiverPair], receiver: &str) -> &'a GiverReceiverPair {
    pairs
        .iter()
        .find(|p| p.receiver == receiver)
        .expect("receiver taken from the pair list")
}

fn uniform_null(
    pairs: &[GiverReceiverPair],
    givers: &[&str],
    receivers: &[&str],
    observed: &HashSet<(&str, &str)>,
    n_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<NullSample> {
    let mut universe = Vec::new();
    for &r in receivers {
        for &g in givers {
            if g != r && !observed.contains(&(g, r)) {
                universe.push((g, r));
            }
        }
    }
    if universe.is_empty() {
        return Err(Error::InvalidArgument(
            "every giver/receiver combination was observed; no null pairs exist".into(),
        ));
    }
    let with_replacement = n_samples > universe.len();
    let picks: Vec<usize> = if with_replacement {
        (0..n_samples).map(|_| rng.random_range(0..universe.len())).collect()
    } else {
        index::sample(rng, universe.len(), n_samples).into_vec()
    };
    let out = picks
        .into_iter()
        .map(|i| {
            let (g, r) = universe[i];
            let a = anchor(pairs, r);
            GiverReceiverPair {
                request_id: a.request_id.clone(),
                giver: g.to_string(),
                receiver: r.to_string(),
                t: a.t,
            }
        })
        .collect();
    Ok(NullSample {
        pairs: out,
        model: NullModel::Uniform,
        with_replacement,
    })
}

const MAX_PERMUTATION_ATTEMPTS: usize = 1_000;

fn degree_preserving_null(
    pairs: &[GiverReceiverPair],
    observed: &HashSet<(&str, &str)>,
    n_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<NullSample> {
    let mut out = Vec::with_capacity(n_samples);
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut repeated = false;
    while out.len() < n_samples {
        let perm = valid_permutation(pairs, observed, rng)?;
        for (p, g) in pairs.iter().zip(perm) {
            if out.len() == n_samples {
                break;
            }
            repeated |= !seen.insert((g.to_string(), p.receiver.clone()));
            out.push(GiverReceiverPair {
                request_id: p.request_id.clone(),
                giver: g.to_string(),
                receiver: p.receiver.clone(),
                t: p.t,
            });
        }
    }
    Ok(NullSample {
        pairs: out,
        model: NullModel::DegreePreserving,
        with_replacement: repeated,
    })
}

fn valid_permutation<'a>(
    pairs: &'a [GiverReceiverPair],
    observed: &HashSet<(&str, &str)>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<&'a str>> {
    let bad = |g: &str, r: &str| g == r || observed.contains(&(g, r));
    let mut givers: Vec<&str> = pairs.iter().map(|p| p.giver.as_str()).collect();
    for _ in 0..MAX_PERMUTATION_ATTEMPTS {
        givers.shuffle(rng);
        // Repair conflicts by swapping with a random position that fixes both.
        for i in 0..givers.len() {
            if !bad(givers[i], &pairs[i].receiver) {
                continue;
            }
            for _ in 0..givers.len() * 4 {
                let j = rng.random_range(0..givers.len());
                if !bad(givers[j], &pairs[i].receiver) && !bad(givers[i], &pairs[j].receiver) {
                    givers.swap(i, j);
                    break;
                }
            }
        }
        if givers.iter().zip(pairs).all(|(g, p)| !bad(g, &p.receiver)) {
            return Ok(givers);
        }
    }
    Err(Error::InvalidArgument(
        "could not find a giver permutation avoiding observed pairs".into(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimilarityOptions {
    pub metric: Metric,
    /// Defaults to [`Metric::default_bandwidth`].
    pub bandwidth: Option<f64>,
    pub n_null: usize,
    pub seed: u64,
    pub null_model: NullModel,
    /// Communities left out of every interest set (compared
    /// case-insensitively). Defaults to the request community itself, which
    /// every participant shares by construction.
    pub exclude: Vec<String>,
}

impl Default for SimilarityOptions {
    fn default() -> Self {
        SimilarityOptions {
            metric: Metric::Jaccard,
            bandwidth: None,
            n_null: 1_000,
            seed: 0,
            null_model: NullModel::Uniform,
            exclude: vec![COMMUNITY.to_string()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityStudyResult {
    pub metric: Metric,
    pub bandwidth: f64,
    pub actual: Vec<f64>,
    pub null: Vec<f64>,
    pub null_with_replacement: bool,
    pub mean_actual: f64,
    pub mean_null: f64,
    pub actual_density: Vec<(f64, f64)>,
    pub null_density: Vec<(f64, f64)>,
    /// Two-sided Mann–Whitney test of actual against null similarities.
    pub test: TestResult,
}

impl SimilarityStudyResult {
    /// Writes both density grids as CSV and the result without grids as
    /// JSON into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let m = self.metric.name();
        write_xy_csv(&dir.join(format!("similarity_{m}_actual.csv")), ("x", "density"), &self.actual_density)?;
        write_xy_csv(&dir.join(format!("similarity_{m}_null.csv")), ("x", "density"), &self.null_density)?;
        let summary = serde_json::json!({
            "metric": self.metric,
            "bandwidth": self.bandwidth,
            "n_actual": self.actual.len(),
            "n_null": self.null.len(),
            "null_with_replacement": self.null_with_replacement,
            "mean_actual": self.mean_actual,
            "mean_null": self.mean_null,
            "actual_density_integral": trapezoid(&self.actual_density),
            "null_density_integral": trapezoid(&self.null_density),
            "test": self.test,
        });
        let path = dir.join(format!("similarity_{m}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&path, e))
    }
}

/// Interest set of `user` just before `t`: communities of earlier history
/// events, falling back to the snapshot list on the user's latest request
/// at or before `t` when there is no history.
pub fn interest_set(corpus: &Corpus, user: &str, t: i64, exclude: &[String]) -> BTreeSet<String> {
    let names: Vec<String> = if corpus.history(user).is_empty() {
        corpus
            .requests()
            .iter()
            .filter(|r| r.requester == user && r.created_at <= t)
            .max_by_key(|r| r.created_at)
            .and_then(|r| r.requester_subreddits.clone())
            .unwrap_or_default()
    } else {
        corpus.subreddit_set_before(user, t).into_iter().collect()
    };
    names
        .into_iter()
        .map(|s| s.to_lowercase())
        .filter(|s| !exclude.iter().any(|x| x.eq_ignore_ascii_case(s)))
        .collect()
}

pub fn similarities(
    corpus: &Corpus,
    pairs: &[GiverReceiverPair],
    metric: Metric,
    exclude: &[String],
) -> Vec<f64> {
    pairs
        .iter()
        .map(|p| {
            let a = interest_set(corpus, &p.giver, p.t, exclude);
            let b = interest_set(corpus, &p.receiver, p.t, exclude);
            pair_similarity(&a, &b, metric)
        })
        .collect()
}

/// Density grids and a two-sided rank test for two similarity samples.
pub fn compare_samples(
    actual: Vec<f64>,
    null: Vec<f64>,
    metric: Metric,
    bandwidth: f64,
    null_with_replacement: bool,
) -> Result<SimilarityStudyResult> {
    let actual_density = GaussianKde::new(&actual, bandwidth)?.grid();
    let null_density = GaussianKde::new(&null, bandwidth)?.grid();
    let test = mann_whitney_u(&actual, &null, Tail::TwoSided)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(SimilarityStudyResult {
        metric,
        bandwidth,
        mean_actual: mean(&actual),
        mean_null: mean(&null),
        actual,
        null,
        null_with_replacement,
        actual_density,
        null_density,
        test,
    })
}

pub fn run_similarity_study(
    corpus: &Corpus,
    pairs: &[GiverReceiverPair],
    opts: &SimilarityOptions,
) -> Result<SimilarityStudyResult> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no giver/receiver pairs".into()));
    }
    let bandwidth = opts.bandwidth.unwrap_or_else(|| opts.metric.default_bandwidth());
    let null = null_pairs_with(pairs, opts.n_null, opts.seed, opts.null_model)?;
    let actual = similarities(corpus, pairs, opts.metric, &opts.exclude);
    let null_sims = similarities(corpus, &null.pairs, opts.metric, &opts.exclude);
    compare_samples(actual, null_sims, opts.metric, bandwidth, null.with_replacement)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn pair(id: &str, g: &str, r: &str) -> GiverReceiverPair {
        GiverReceiverPair::new(id, g, r, 100).unwrap()
    }

    #[test]
    fn metric_examples() {
        let a = set(&["a", "b", "c"]);
        let b = set(&["b", "c", "d"]);
        assert_eq!(pair_similarity(&a, &b, Metric::Intersection), 2.0);
        assert_eq!(pair_similarity(&a, &b, Metric::Jaccard), 0.5);
        assert_eq!(pair_similarity(&a, &a, Metric::Jaccard), 1.0);
        let d = set(&["x"]);
        assert_eq!(pair_similarity(&a, &d, Metric::Intersection), 0.0);
        assert_eq!(pair_similarity(&a, &d, Metric::Jaccard), 0.0);
        assert_eq!(pair_similarity(&set(&[]), &set(&[]), Metric::Jaccard), 0.0);
    }

    #[test]
    fn two_pair_universe_is_the_swap() {
        let pairs = [pair("1", "g1", "r1"), pair("2", "g2", "r2")];
        let s = null_pairs(&pairs, 2, 3).unwrap();
        assert!(!s.with_replacement);
        let got: BTreeSet<(String, String)> =
            s.pairs.iter().map(|p| (p.giver.clone(), p.receiver.clone())).collect();
        let want: BTreeSet<(String, String)> = [("g1", "r2"), ("g2", "r1")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(got, want);
        let big = null_pairs(&pairs, 7, 3).unwrap();
        assert!(big.with_replacement);
        assert_eq!(big.pairs.len(), 7);
        assert_eq!(null_pairs(&pairs, 7, 3).unwrap(), big);
    }

    #[test]
    fn too_small_population() {
        assert!(null_pairs(&[pair("1", "g", "r1"), pair("2", "g", "r2")], 1, 0).is_err());
        assert!(GiverReceiverPair::new("1", "u", "u", 0).is_err());
    }

    #[test]
    fn degree_preserving_keeps_giver_counts() {
        let pairs: Vec<_> = (0..12)
            .map(|i| pair(&i.to_string(), &format!("g{}", i % 4), &format!("r{i}")))
            .collect();
        let s = null_pairs_with(&pairs, 12, 5, NullModel::DegreePreserving).unwrap();
        let count = |v: &[GiverReceiverPair], g: &str| v.iter().filter(|p| p.giver == g).count();
        for g in ["g0", "g1", "g2", "g3"] {
            assert_eq!(count(&s.pairs, g), count(&pairs, g));
        }
        let observed: HashSet<_> = pairs.iter().map(|p| (&p.giver, &p.receiver)).collect();
        assert!(s.pairs.iter().all(|p| !observed.contains(&(&p.giver, &p.receiver))));
    }
}
