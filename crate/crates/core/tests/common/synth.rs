//! Synthetic request corpora with planted effects.

use askwell_core::corpus::{Corpus, EventKind, Histories, HistoryEvent, RequestRecord};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const START: i64 = 1_291_766_400; // 2010-12-08
const MONTH: i64 = 30 * 86_400;

const FILLER: [&str; 24] = [
    "pizza", "would", "really", "like", "some", "food", "here", "please", "anyone", "help",
    "hungry", "house", "city", "dinner", "cheese", "pepperoni", "order", "delivery", "place",
    "around", "nothing", "fridge", "could", "someone",
];

pub struct Planted {
    pub image: bool,
    pub gratitude: bool,
    pub reciprocity: bool,
    pub job: bool,
    pub craving: bool,
    pub posted_before: bool,
    pub words: usize,
    pub karma: i64,
}

/// Corpus of `n` single-request users whose success follows a logistic
/// model of planted factors. Successful requesters later give back with a
/// higher chance when they promised to.
pub fn synthetic_corpus(n: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut requests = Vec::with_capacity(n);
    let mut histories = Histories::new();
    let givers: Vec<String> = (0..40).map(|g| format!("giver{g}")).collect();
    for i in 0..n {
        let user = format!("user{i}");
        let t = START + 86_400 + rng.random_range(0..30 * MONTH);
        let p = Planted {
            image: rng.random_bool(0.1),
            gratitude: rng.random_bool(0.4),
            reciprocity: rng.random_bool(0.15),
            job: rng.random_bool(0.2),
            craving: rng.random_bool(0.2),
            posted_before: rng.random_bool(0.1),
            words: rng.random_range(10..250),
            karma: 0,
        };
        let mut words: Vec<String> = (0..p.words)
            .map(|_| FILLER.choose(&mut rng).unwrap().to_string())
            .collect();
        let mut insert = |w: &str, rng: &mut ChaCha8Rng| {
            let at = rng.random_range(0..=words.len());
            words.insert(at, w.to_string());
        };
        if p.job {
            insert("job", &mut rng);
        }
        if p.craving {
            insert("party", &mut rng);
        }
        if p.gratitude {
            insert("thanks", &mut rng);
        }
        let mut body = words.join(" ");
        if p.reciprocity {
            body.push_str(". I will pay it forward");
        }
        if p.image {
            body.push_str(" http://i.imgur.com/abc.jpg");
        }

        let mut events = Vec::new();
        let n_events = rng.random_range(0..30);
        let mut karma = 0;
        for _ in 0..n_events {
            let score = rng.random_range(-2..40);
            karma += score;
            events.push(HistoryEvent {
                user: user.clone(),
                subreddit: ["AskReddit", "gaming", "pics", "funny", "food"].choose(&mut rng).unwrap().to_string(),
                created_at: t - rng.random_range(1..400) * 86_400,
                score,
                kind: EventKind::Comment,
                gave: false,
            });
        }
        if p.posted_before {
            events.push(HistoryEvent {
                user: user.clone(),
                subreddit: "Random_Acts_Of_Pizza".into(),
                created_at: t - 5 * 86_400,
                score: 1,
                kind: EventKind::Post,
                gave: false,
            });
            karma += 1;
        }
        let age_months = (t - START) / MONTH;
        let z = -1.4 + 0.9 * f(p.image) + 0.4 * f(p.gratitude) + 0.6 * f(p.reciprocity)
            + 0.35 * p.words as f64 / 100.0
            + 1.2 * f(p.posted_before)
            + 0.5 * f(p.job)
            - 0.6 * f(p.craving)
            + 0.002 * karma as f64
            - 0.03 * age_months as f64;
        let success = rng.random::<f64>() < 1.0 / (1.0 + (-z).exp());
        let mut r = RequestRecord::new(&format!("t3_{i}"), &user, &body, t, success);
        r.title = "[Request] pizza please".into();
        if success && rng.random_bool(0.5) {
            r.giver = Some(givers.choose(&mut rng).unwrap().clone());
        }
        if success {
            let chance = if p.reciprocity { 0.3 } else { 0.05 };
            if rng.random_bool(chance) {
                events.push(HistoryEvent {
                    user: user.clone(),
                    subreddit: "Random_Acts_Of_Pizza".into(),
                    created_at: t + 20 * 86_400,
                    score: 3,
                    kind: EventKind::Comment,
                    gave: true,
                });
            }
        }
        if !events.is_empty() {
            histories.insert(user.clone(), events);
        }
        requests.push(r);
    }
    Corpus::new(requests, histories).expect("synthetic corpus is valid")
}

fn f(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Givers helping receivers. With `planted`, each giver shares most of the
/// receiver's communities; otherwise interests are drawn independently.
pub fn similarity_corpus(n_pairs: usize, planted: bool, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let communities: Vec<String> = (0..60).map(|c| format!("sub{c}")).collect();
    let mut requests = Vec::with_capacity(n_pairs);
    let mut histories = Histories::new();
    let add = |user: &str, subs: &[String], histories: &mut Histories| {
        let events = histories.entry(user.to_string()).or_default();
        for (k, s) in subs.iter().enumerate() {
            events.push(HistoryEvent {
                user: user.to_string(),
                subreddit: s.clone(),
                created_at: START - 86_400 * (k as i64 + 1),
                score: 1,
                kind: EventKind::Comment,
                gave: false,
            });
        }
    };
    for i in 0..n_pairs {
        let t = START + 86_400 * (i as i64 + 1);
        let receiver = format!("receiver{i}");
        let giver = format!("helper{i}");
        let mine: Vec<String> = communities.choose_multiple(&mut rng, 6).cloned().collect();
        let theirs: Vec<String> = if planted {
            let mut s: Vec<String> = mine[..5].to_vec();
            s.push(communities.choose(&mut rng).unwrap().clone());
            s
        } else {
            communities.choose_multiple(&mut rng, 6).cloned().collect()
        };
        add(&receiver, &mine, &mut histories);
        add(&giver, &theirs, &mut histories);
        let mut r = RequestRecord::new(&format!("t3_s{i}"), &receiver, "pizza please", t, true);
        r.giver = Some(giver);
        requests.push(r);
    }
    Corpus::new(requests, histories).expect("similarity corpus is valid")
}
