//! Random delivery/label/feedback traces with per-step invariant checks.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spamsift_core::controller::{Command, Event, MailboxEntry, Reply};
use spamsift_core::synthetic::{generate_synthetic_corpus, VocabSpec};
use spamsift_core::{Controller, ControllerConfig, Label, Mode, RawMessage, VectorizerConfig};

#[derive(Debug, Default, Clone, Copy)]
pub struct TraceStats {
    pub events: usize,
    pub deliveries: usize,
    pub labels: usize,
    pub feedbacks: usize,
    pub rejected: usize,
    pub evictions: usize,
    pub retrains: usize,
    /// Feedback events after which the support-vector set differed.
    pub sv_changed: usize,
}

pub fn trace_config() -> ControllerConfig {
    ControllerConfig {
        capacity: 12,
        activation_threshold: 4,
        batch_size: 3,
        vectorizer: VectorizerConfig {
            min_df: 2,
            ..VectorizerConfig::default()
        },
        ..ControllerConfig::default()
    }
}

/// Checks the ranked part of the mailbox after one step: the kept entries
/// are the top `capacity` of everything that was ranked, and the evicted
/// ones are the rest, lowest first.
fn check_eviction(before: &[MailboxEntry], archived_before: usize, c: &Controller) {
    let known: BTreeSet<&str> = before.iter().map(|e| e.id.as_str()).collect();
    let newly_archived = &c.archive()[archived_before..];
    let mut pool: Vec<&MailboxEntry> = before.iter().collect();
    pool.extend(c.mailbox().entries().iter().filter(|e| !known.contains(e.id.as_str())));
    pool.extend(newly_archived.iter().filter(|e| !known.contains(e.id.as_str())));
    pool.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.delivered_at.cmp(&b.delivered_at)));
    let cap = c.config().capacity;
    let kept: Vec<&MailboxEntry> = pool.iter().take(cap).copied().collect();
    let mut dropped: Vec<&MailboxEntry> = pool.iter().skip(cap).copied().collect();
    dropped.reverse();
    assert_eq!(c.mailbox().entries().iter().collect::<Vec<_>>(), kept, "kept = top-capacity");
    assert_eq!(newly_archived.iter().collect::<Vec<_>>(), dropped, "evicted = bottom-k ascending");
}

fn check_state(c: &Controller, universe: &BTreeSet<String>) {
    let mb = c.mailbox();
    assert!(mb.entries().len() <= mb.capacity());
    assert!(mb.is_sorted());
    if c.mode() == Mode::Active {
        assert!(c.snapshot().is_some());
    }
    // pool and current labels partition the delivered messages
    let labeled: BTreeSet<String> = universe.iter().filter(|id| c.label_of(id).is_some()).cloned().collect();
    assert!(c.pool().is_disjoint(&labeled));
    assert_eq!(c.pool().len() + labeled.len(), universe.len());
    for q in &c.query_queue().ids {
        assert!(c.pool().contains(q));
    }
}

fn modes(c: &Controller) -> Vec<Mode> {
    c.log()
        .iter()
        .filter_map(|r| match r.event {
            Event::ModeEntered { mode } => Some(mode),
            _ => None,
        })
        .collect()
}

/// Runs `n_events` random commands and checks every invariant after each.
/// Returns the final controller with the statistics.
pub fn run_trace(seed: u64, n_events: usize, config: ControllerConfig) -> (Controller, TraceStats) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus = generate_synthetic_corpus(n_events, n_events, &VocabSpec::default(), seed).unwrap();
    let mut inbox: Vec<RawMessage> = corpus.into_messages();
    inbox.shuffle(&mut rng);
    let mut truth: BTreeMap<String, Label> = BTreeMap::new();
    let mut universe = BTreeSet::new();

    let mut c = Controller::new(config).unwrap();
    let mut stats = TraceStats::default();
    let mut records_seen = 0;

    for step in 0..n_events {
        let before = c.mailbox().entries().to_vec();
        let archived_before = c.archive().len();
        let store_before = c.label_records().to_vec();
        let sv_before = c.snapshot().map(|s| s.model.support_ids().to_vec());
        let version_before = c.model_version();

        let mut incoming = None;
        let roll: f64 = rng.gen();
        let pool: Vec<String> = c.pool().iter().cloned().collect();
        let cmd = if roll < 0.45 || pool.is_empty() {
            let m = inbox.pop().expect("corpus has a message per event");
            incoming = m.true_label;
            Command::Deliver {
                request_id: None,
                message_id: None,
                subject: m.subject,
                body: m.body,
            }
        } else if roll < 0.80 {
            // prefer answering queries, occasionally label anything
            let id = match c.query_queue().ids.first() {
                Some(q) if rng.gen_bool(0.7) => q.clone(),
                _ => pool.choose(&mut rng).unwrap().clone(),
            };
            let y = if rng.gen_bool(0.03) {
                Label::Spam // a human mistake, or a label for an unknown id below
            } else {
                truth[&id]
            };
            let message_id = if rng.gen_bool(0.02) { "nope".to_string() } else { id };
            Command::Label {
                request_id: rng.gen_bool(0.5).then(|| format!("r{step}")),
                message_id,
                label: y,
            }
        } else if roll < 0.90 {
            // mostly genuine misclassifications, sometimes a user overriding
            // a correct label; both are valid feedback
            let ranked = c.mailbox().entries();
            let open: Vec<_> = ranked.iter().filter(|e| c.label_of(&e.id) != Some(e.label_shown.other())).collect();
            let wrong: Vec<_> = open.iter().filter(|e| truth[&e.id] != e.label_shown).collect();
            let pick = match wrong.choose(&mut rng) {
                Some(e) if rng.gen_bool(0.7) => Some(**e),
                _ => open.choose(&mut rng).copied(),
            };
            let (id, y) = pick
                .map(|e| (e.id.clone(), e.label_shown.other()))
                .unwrap_or_else(|| (pool[0].clone(), Label::Spam));
            Command::Feedback {
                request_id: Some(format!("f{step}")),
                message_id: id,
                corrected_label: y,
            }
        } else if roll < 0.97 {
            Command::Queries { n: rng.gen_range(1..6) }
        } else {
            Command::Retrain { request_id: None }
        };

        let is_feedback = matches!(cmd, Command::Feedback { .. });
        let result = c.apply(cmd.clone());
        // retries with the same request id change nothing
        if cmd.request_id().is_some() && rng.gen_bool(0.1) {
            let len = c.log().len();
            assert_eq!(c.apply(cmd.clone()), result);
            assert_eq!(c.log().len(), len);
        }
        stats.events += 1;
        match (&cmd, &result) {
            (_, Err(_)) => stats.rejected += 1,
            (Command::Deliver { .. }, Ok(r)) => {
                stats.deliveries += 1;
                let Reply::Delivered(d) = r else { panic!("deliver replied {r:?}") };
                truth.insert(d.message_id.clone(), incoming.unwrap());
                universe.insert(d.message_id.clone());
            }
            (Command::Label { .. }, Ok(_)) => stats.labels += 1,
            (Command::Feedback { .. }, Ok(_)) => stats.feedbacks += 1,
            _ => {}
        }
        if is_feedback && result.is_ok() && c.model_version() != version_before {
            let after = c.snapshot().unwrap().model.support_ids().to_vec();
            if Some(after) != sv_before {
                stats.sv_changed += 1;
            }
        }

        check_eviction(&before, archived_before, &c);
        check_state(&c, &universe);
        // the labeled store only grows, and old records keep their labels
        let store = c.label_records();
        assert!(store.len() >= store_before.len());
        for (old, now) in store_before.iter().zip(store) {
            assert_eq!((&old.id, old.label, old.sequence), (&now.id, now.label, now.sequence));
            assert!(!old.superseded || now.superseded);
        }
        for r in &c.log()[records_seen..] {
            match &r.event {
                Event::Evicted { entries } => stats.evictions += entries.len(),
                Event::Trained(_) => stats.retrains += 1,
                _ => {}
            }
        }
        records_seen = c.log().len();
    }

    let m = modes(&c);
    assert_eq!(m[0], Mode::Training);
    assert!(m.windows(2).all(|w| w[0] != w[1]), "mode entries alternate");
    for (i, r) in c.log().iter().enumerate() {
        assert_eq!(r.sequence, i as u64);
    }
    (c, stats)
}
