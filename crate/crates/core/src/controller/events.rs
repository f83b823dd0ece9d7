//! Commands, their replies, and the append-only event log.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::mailbox::MailboxEntry;
use super::{ControllerConfig, Mode};
use crate::active::Batch;
use crate::eval::EvalReport;
use crate::fingerprint::Fingerprint;
use crate::Label;

/// Every state change enters through one of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    Deliver {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        request_id: Option<String>,
        /// Assigned by the controller when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        message_id: Option<String>,
        subject: String,
        body: String,
    },
    Label {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        request_id: Option<String>,
        message_id: String,
        label: Label,
    },
    Feedback {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        request_id: Option<String>,
        message_id: String,
        corrected_label: Label,
    },
    /// Logged only when it issues a fresh batch.
    Queries { n: usize },
    Retrain {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        request_id: Option<String>,
    },
}

impl Command {
    pub fn request_id(&self) -> Option<&str> {
        match self {
            Command::Deliver { request_id, .. }
            | Command::Label { request_id, .. }
            | Command::Feedback { request_id, .. }
            | Command::Retrain { request_id } => request_id.as_deref(),
            Command::Queries { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Reply {
    Delivered(DeliveryOutcome),
    Labeled(LabelOutcome),
    Feedback(FeedbackOutcome),
    Queries { batch: Batch },
    Retrained(RetrainOutcome),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryOutcome {
    pub message_id: String,
    pub delivered_at: u64,
    /// `None` when delivered unranked (training mode).
    pub placement: Option<Placement>,
    /// Entries pushed off the bottom of the mailbox by this delivery.
    pub evicted: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub position: usize,
    pub score: f64,
    pub label_shown: Label,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelOutcome {
    pub labeled_counts: LabelCounts,
    pub mode: Mode,
    /// A model was (re)trained as a consequence of this label.
    pub retrained: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub spam: usize,
    pub nonspam: usize,
}

impl LabelCounts {
    pub fn get(&self, y: Label) -> usize {
        match y {
            Label::Spam => self.spam,
            Label::Nonspam => self.nonspam,
        }
    }

    pub fn total(&self) -> usize {
        self.spam + self.nonspam
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackOutcome {
    pub retrain_started: bool,
    /// Whether the retrain produced a new active model.
    pub retrained: bool,
    pub mode: Mode,
    pub model_version: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrainOutcome {
    pub retrained: bool,
    pub mode: Mode,
    pub model_version: Option<u64>,
}

/// Summary of a successful training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub model_version: u64,
    pub labels_used: usize,
    pub dictionary_size: usize,
    pub dictionary: Fingerprint,
    pub model: Fingerprint,
    pub support_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<EvalReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    Configured(ControllerConfig),
    Command(Command),
    ModeEntered { mode: Mode },
    Trained(TrainingRecord),
    TrainFailed { reason: String },
    /// Pending entries that received scores when a model became active.
    Ranked { ids: Vec<String> },
    Evicted { entries: Vec<MailboxEntry> },
    QueriesIssued { batch: Batch },
}

/// One line of the event log. Timestamps are logical: the timestamp of a
/// record is its sequence number, which keeps replay exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub sequence: u64,
    pub timestamp: u64,
    #[serde(flatten)]
    pub event: Event,
}

/// Past replies by request id, so a retried request is answered from cache.
pub(crate) type ReplyCache = BTreeMap<String, (Command, Result<Reply, super::ControllerError>)>;
