//! The ranked, capacity-bounded inbox.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::Label;

/// A delivered message placed by the classifier. The score is the decision
/// value at delivery (or first scoring) time and is never recomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MailboxEntry {
    pub id: String,
    pub score: f64,
    pub label_shown: Label,
    pub delivered_at: u64,
    /// Model version that produced the score.
    pub model_version: u64,
    /// The message had no dictionary words, so its score is just `-b`.
    pub degenerate: bool,
}

/// A message delivered while no model was active; it has no score yet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingEntry {
    pub id: String,
    pub delivered_at: u64,
}

/// Ranked entries sorted by score descending, ties by earlier delivery.
/// Capacity bounds the ranked entries only; pending entries join the ranking
/// (and may be evicted) when the next model becomes active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mailbox {
    capacity: usize,
    entries: Vec<MailboxEntry>,
    pending: Vec<PendingEntry>,
}

fn ranks_before(a: &MailboxEntry, score: f64, delivered_at: u64) -> bool {
    a.score > score || (a.score == score && a.delivered_at < delivered_at)
}

impl Mailbox {
    pub fn new(capacity: usize) -> Mailbox {
        Mailbox {
            capacity,
            entries: Vec::new(),
            pending: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> &[MailboxEntry] {
        &self.entries
    }

    pub fn pending(&self) -> &[PendingEntry] {
        &self.pending
    }

    /// Ranked plus pending.
    pub fn len(&self) -> usize {
        self.entries.len() + self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, id: &str) -> Option<&MailboxEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn is_pending(&self, id: &str) -> bool {
        self.pending.iter().any(|e| e.id == id)
    }

    /// Sorted insert without eviction. Returns the position.
    pub fn insert(&mut self, entry: MailboxEntry) -> usize {
        let at = self
            .entries
            .partition_point(|e| ranks_before(e, entry.score, entry.delivered_at));
        self.entries.insert(at, entry);
        at
    }

    pub fn push_pending(&mut self, id: String, delivered_at: u64) {
        self.pending.push(PendingEntry { id, delivered_at });
    }

    pub fn take_pending(&mut self) -> Vec<PendingEntry> {
        core::mem::take(&mut self.pending)
    }

    /// Removes entries from the bottom of the list until the capacity holds.
    /// Evicted entries come back lowest score first.
    pub fn evict_overflow(&mut self) -> Vec<MailboxEntry> {
        let mut evicted = Vec::new();
        while self.entries.len() > self.capacity {
            evicted.push(self.entries.pop().expect("over capacity implies non-empty"));
        }
        evicted
    }

    pub fn is_sorted(&self) -> bool {
        self.entries
            .windows(2)
            .all(|w| ranks_before(&w[0], w[1].score, w[1].delivered_at))
    }
}
