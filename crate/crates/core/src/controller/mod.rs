//! The training/active mode machine around a live mailbox.
//!
//! In training mode (TM) arriving mail is pooled and delivered unranked while
//! the user supplies labels. Once each class has `activation_threshold`
//! labels the controller builds a dictionary from the labeled messages,
//! trains, and enters active mode (AM): new mail is scored and inserted by
//! decision value, and an active-learning batch is queued for labeling.
//! Feedback on a misclassified message sends the controller back through TM
//! for a full retrain.
//!
//! Every mutation is a [`Command`]. Applied commands are appended to the
//! event log followed by the records they caused, so replaying the commands
//! of a log on a fresh controller rebuilds the same state (see
//! [`Controller::replay`]).

mod events;
mod mailbox;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub use events::{
    Command, DeliveryOutcome, Event, FeedbackOutcome, LabelCounts, LabelOutcome, LogRecord,
    Placement, Reply, RetrainOutcome, TrainingRecord,
};
pub use mailbox::{Mailbox, MailboxEntry, PendingEntry};

use crate::active::{model_fingerprint, select_batch, Batch, Pool, SelectionStrategy};
use crate::corpus::RawMessage;
use crate::eval::{confusion, rates, EvalReport};
use crate::fingerprint::FingerprintBuilder;
use crate::svm::{self, LabeledExample, SvmModel, TrainConfig};
use crate::vectorizer::{
    build_dictionary_from_texts, vectorize_text, Dictionary, FeatureVector, VectorizeError,
    VectorizerConfig,
};
use crate::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "TM")]
    Training,
    #[serde(rename = "AM")]
    Active,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Training => "TM",
            Mode::Active => "AM",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Maximum number of ranked mailbox entries.
    pub capacity: usize,
    /// Labels needed from each class before the first model is trained.
    pub activation_threshold: usize,
    /// Size of each active-learning query batch.
    pub batch_size: usize,
    pub strategy: SelectionStrategy,
    pub seed: u64,
    pub vectorizer: VectorizerConfig,
    pub train: TrainConfig,
    /// Labeled messages used only to report metrics after each training.
    #[serde(default)]
    pub holdout: Vec<RawMessage>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            capacity: 500,
            activation_threshold: 10,
            batch_size: 5,
            strategy: SelectionStrategy::Closest,
            seed: 0,
            vectorizer: VectorizerConfig::default(),
            train: TrainConfig::default(),
            holdout: Vec::new(),
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let bad = |m: &str| Err(ControllerError::InvalidConfig(m.into()));
        if self.capacity == 0 {
            return bad("capacity must be at least 1");
        }
        if self.activation_threshold == 0 {
            return bad("activation threshold must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if let Err(e) = self.vectorizer.validate() {
            return Err(ControllerError::InvalidConfig(e.to_string()));
        }
        if let Some(m) = self.holdout.iter().find(|m| m.true_label.is_none()) {
            return Err(ControllerError::InvalidConfig(format!(
                "holdout message {:?} has no label",
                m.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControllerError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("unknown message {0:?}")]
    UnknownMessage(String),
    #[error("message id {0:?} already delivered")]
    DuplicateMessage(String),
    #[error("message {0:?} is already labeled")]
    AlreadyLabeled(String),
    #[error("operation requires mode {required}, controller is in {actual}")]
    WrongMode { required: Mode, actual: Mode },
    #[error("message {0:?} has not been classified")]
    NotClassified(String),
    #[error("message {message_id:?} was shown as {label_shown}; feedback must correct a misclassification")]
    NotMisclassified { message_id: String, label_shown: Label },
    #[error("need {threshold} labels per class, have {} spam and {} nonspam", counts.spam, counts.nonspam)]
    InsufficientLabels { counts: LabelCounts, threshold: usize },
    #[error("request id {0:?} was already used for a different request")]
    RequestIdReuse(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error("event log is empty")]
    Empty,
    #[error("event log does not start with a configuration record")]
    MissingConfiguration,
    #[error(transparent)]
    Config(ControllerError),
    #[error("replay diverged from the log at record {index}")]
    Diverged { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredMessage {
    pub message: RawMessage,
    pub delivered_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Supplied through the labeling path (training mode or a query).
    User,
    /// A correction of a misclassified message.
    Feedback,
}

/// One entry of the append-only labeled store. A correction never rewrites
/// a record: the old one is marked superseded and a new one is appended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub id: String,
    pub label: Label,
    pub provenance: Provenance,
    pub sequence: u64,
    pub superseded: bool,
}

/// A trained model with the dictionary its features refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u64,
    pub dictionary: Dictionary,
    pub model: SvmModel,
    pub labels_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub model_version: u64,
    pub labels_used: usize,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusView {
    pub mode: Mode,
    pub model_version: Option<u64>,
    pub labeled_counts: LabelCounts,
    pub pool_size: usize,
    pub mailbox_size: usize,
    pub capacity: usize,
    pub pending_queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MailboxItem {
    pub id: String,
    pub subject: String,
    /// Absent for mail delivered while no model was active.
    pub score: Option<f64>,
    pub label_shown: Option<Label>,
    pub delivered_at: u64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreProvenance {
    pub score: f64,
    pub label_shown: Label,
    pub model_version: u64,
    pub degenerate: bool,
    /// The entry was pushed out of the mailbox.
    pub archived: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageView {
    pub id: String,
    pub subject: String,
    pub body: String,
    pub delivered_at: u64,
    /// Current label in the labeled store.
    pub label: Option<Label>,
    pub in_pool: bool,
    pub scoring: Option<ScoreProvenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryItem {
    pub id: String,
    pub subject: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsView {
    pub report: Option<EvalReport>,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    config: ControllerConfig,
    mode: Mode,
    messages: BTreeMap<String, StoredMessage>,
    store: Vec<LabelRecord>,
    /// Index into `store` of each id's current record.
    current: BTreeMap<String, usize>,
    pool: BTreeSet<String>,
    /// Pool messages vectorized under the snapshot dictionary.
    pool_vectors: BTreeMap<String, FeatureVector>,
    snapshot: Option<Snapshot>,
    versions: u64,
    mailbox: Mailbox,
    archive: Vec<MailboxEntry>,
    queue: Batch,
    labels_since_train: usize,
    deliveries: u64,
    replies: events::ReplyCache,
    curve: Vec<CurvePoint>,
    log: Vec<LogRecord>,
}

impl Controller {
    pub fn new(config: ControllerConfig) -> Result<Controller, ControllerError> {
        config.validate()?;
        let mut c = Controller {
            mailbox: Mailbox::new(config.capacity),
            config: config.clone(),
            mode: Mode::Training,
            messages: BTreeMap::new(),
            store: Vec::new(),
            current: BTreeMap::new(),
            pool: BTreeSet::new(),
            pool_vectors: BTreeMap::new(),
            snapshot: None,
            versions: 0,
            archive: Vec::new(),
            queue: Batch::default(),
            labels_since_train: 0,
            deliveries: 0,
            replies: BTreeMap::new(),
            curve: Vec::new(),
            log: Vec::new(),
        };
        c.record(Event::Configured(config));
        c.record(Event::ModeEntered { mode: Mode::Training });
        Ok(c)
    }

    /// Rebuilds a controller by re-applying the commands of `records`, then
    /// checks that the rebuilt log matches the given one record for record.
    pub fn replay(records: &[LogRecord]) -> Result<Controller, ReplayError> {
        let first = records.first().ok_or(ReplayError::Empty)?;
        let Event::Configured(config) = &first.event else {
            return Err(ReplayError::MissingConfiguration);
        };
        let mut c = Controller::new(config.clone()).map_err(ReplayError::Config)?;
        for r in records {
            if let Event::Command(cmd) = &r.event {
                // failures were logged too and fail the same way again
                let _ = c.apply(cmd.clone());
            }
        }
        let n = c.log.len().max(records.len());
        if let Some(index) = (0..n).find(|&i| c.log.get(i) != records.get(i)) {
            return Err(ReplayError::Diverged { index });
        }
        Ok(c)
    }

    pub fn apply(&mut self, cmd: Command) -> Result<Reply, ControllerError> {
        self.apply_observed(cmd, &mut |_| {})
    }

    /// Like [`apply`](Self::apply), but calls `on_training` whenever the
    /// controller drops into training mode to retrain, before training runs.
    /// A service uses this to publish the TM state to readers.
    pub fn apply_observed(
        &mut self,
        cmd: Command,
        on_training: &mut dyn FnMut(&Controller),
    ) -> Result<Reply, ControllerError> {
        if let Some(rid) = cmd.request_id() {
            if let Some((prev, reply)) = self.replies.get(rid) {
                if *prev == cmd {
                    return reply.clone();
                }
                return Err(ControllerError::RequestIdReuse(rid.into()));
            }
        }
        if let Command::Queries { n } = cmd {
            return self.queries(n);
        }
        let seq = self.record(Event::Command(cmd.clone()));
        let result = match &cmd {
            Command::Deliver {
                message_id,
                subject,
                body,
                ..
            } => self.deliver_at(seq, message_id.clone(), subject, body),
            Command::Label { message_id, label, .. } => self.label_at(seq, message_id, *label, on_training),
            Command::Feedback {
                message_id,
                corrected_label,
                ..
            } => self.feedback_at(seq, message_id, *corrected_label, on_training),
            Command::Retrain { .. } => self.retrain_now(on_training),
            Command::Queries { .. } => unreachable!("handled above"),
        };
        if let Some(rid) = cmd.request_id() {
            self.replies.insert(rid.into(), (cmd.clone(), result.clone()));
        }
        result
    }

    pub fn deliver(&mut self, subject: &str, body: &str) -> Result<DeliveryOutcome, ControllerError> {
        match self.apply(Command::Deliver {
            request_id: None,
            message_id: None,
            subject: subject.into(),
            body: body.into(),
        })? {
            Reply::Delivered(d) => Ok(d),
            other => unreachable!("deliver replied {other:?}"),
        }
    }

    pub fn submit_label(&mut self, message_id: &str, label: Label) -> Result<LabelOutcome, ControllerError> {
        match self.apply(Command::Label {
            request_id: None,
            message_id: message_id.into(),
            label,
        })? {
            Reply::Labeled(o) => Ok(o),
            other => unreachable!("label replied {other:?}"),
        }
    }

    pub fn submit_feedback(
        &mut self,
        message_id: &str,
        corrected_label: Label,
    ) -> Result<FeedbackOutcome, ControllerError> {
        match self.apply(Command::Feedback {
            request_id: None,
            message_id: message_id.into(),
            corrected_label,
        })? {
            Reply::Feedback(o) => Ok(o),
            other => unreachable!("feedback replied {other:?}"),
        }
    }

    pub fn next_queries(&mut self, n: usize) -> Result<Batch, ControllerError> {
        match self.apply(Command::Queries { n })? {
            Reply::Queries { batch } => Ok(batch),
            other => unreachable!("queries replied {other:?}"),
        }
    }

    pub fn retrain(&mut self) -> Result<RetrainOutcome, ControllerError> {
        match self.apply(Command::Retrain { request_id: None })? {
            Reply::Retrained(o) => Ok(o),
            other => unreachable!("retrain replied {other:?}"),
        }
    }

    fn record(&mut self, event: Event) -> u64 {
        let sequence = self.log.len() as u64;
        self.log.push(LogRecord {
            sequence,
            timestamp: sequence,
            event,
        });
        sequence
    }

    fn require_mode(&self, required: Mode) -> Result<(), ControllerError> {
        if self.mode == required {
            Ok(())
        } else {
            Err(ControllerError::WrongMode {
                required,
                actual: self.mode,
            })
        }
    }

    fn enter(&mut self, mode: Mode) {
        debug_assert_ne!(self.mode, mode);
        self.mode = mode;
        self.record(Event::ModeEntered { mode });
    }

    fn deliver_at(
        &mut self,
        seq: u64,
        message_id: Option<String>,
        subject: &str,
        body: &str,
    ) -> Result<Reply, ControllerError> {
        let id = match message_id {
            Some(id) if id.is_empty() => {
                return Err(ControllerError::InvalidRequest("empty message id".into()))
            }
            Some(id) if self.messages.contains_key(&id) => return Err(ControllerError::DuplicateMessage(id)),
            Some(id) => id,
            None => {
                let mut n = self.deliveries + 1;
                while self.messages.contains_key(&format!("msg-{n:06}")) {
                    n += 1;
                }
                format!("msg-{n:06}")
            }
        };
        self.deliveries += 1;
        let mut message = RawMessage::new(id.clone(), subject, body);
        message.received_at = seq;
        self.messages.insert(
            id.clone(),
            StoredMessage {
                message,
                delivered_at: seq,
            },
        );
        self.pool.insert(id.clone());

        let mut outcome = DeliveryOutcome {
            message_id: id.clone(),
            delivered_at: seq,
            placement: None,
            evicted: Vec::new(),
        };
        match self.mode {
            Mode::Training => self.mailbox.push_pending(id, seq),
            Mode::Active => {
                let entry = self.score_entry(&id, seq);
                let x = self.vectorize_message(&id);
                self.pool_vectors.insert(id, x);
                let score = entry.score;
                let (label_shown, degenerate) = (entry.label_shown, entry.degenerate);
                let position = self.mailbox.insert(entry);
                outcome.placement = Some(Placement {
                    position,
                    score,
                    label_shown,
                    degenerate,
                });
                let evicted = self.evict();
                outcome.evicted = evicted;
            }
        }
        Ok(Reply::Delivered(outcome))
    }

    fn label_at(
        &mut self,
        seq: u64,
        id: &str,
        label: Label,
        on_training: &mut dyn FnMut(&Controller),
    ) -> Result<Reply, ControllerError> {
        if !self.messages.contains_key(id) {
            return Err(ControllerError::UnknownMessage(id.into()));
        }
        if self.current.contains_key(id) {
            return Err(ControllerError::AlreadyLabeled(id.into()));
        }
        let was_queued = !self.queue.is_empty();
        self.take_from_pool(id);
        self.push_label(id, label, Provenance::User, seq);

        let retrained = match self.mode {
            Mode::Training => self.maybe_activate(),
            Mode::Active => {
                let answered = was_queued && self.queue.is_empty();
                if answered || self.labels_since_train >= self.config.batch_size {
                    self.round_trip(on_training)
                } else {
                    false
                }
            }
        };
        Ok(Reply::Labeled(LabelOutcome {
            labeled_counts: self.labeled_counts(),
            mode: self.mode,
            retrained,
        }))
    }

    fn feedback_at(
        &mut self,
        seq: u64,
        id: &str,
        corrected: Label,
        on_training: &mut dyn FnMut(&Controller),
    ) -> Result<Reply, ControllerError> {
        self.require_mode(Mode::Active)?;
        if !self.messages.contains_key(id) {
            return Err(ControllerError::UnknownMessage(id.into()));
        }
        let shown = self
            .mailbox
            .get(id)
            .or_else(|| self.archive.iter().find(|e| e.id == id))
            .map(|e| e.label_shown)
            .ok_or_else(|| ControllerError::NotClassified(id.into()))?;
        if shown == corrected {
            return Err(ControllerError::NotMisclassified {
                message_id: id.into(),
                label_shown: shown,
            });
        }
        match self.current.get(id) {
            Some(&i) if self.store[i].label == corrected => {
                return Err(ControllerError::AlreadyLabeled(id.into()));
            }
            Some(&i) => self.store[i].superseded = true,
            None => self.take_from_pool(id),
        }
        self.push_label(id, corrected, Provenance::Feedback, seq);
        let retrained = self.round_trip(on_training);
        Ok(Reply::Feedback(FeedbackOutcome {
            retrain_started: true,
            retrained,
            mode: self.mode,
            model_version: self.model_version(),
        }))
    }

    fn retrain_now(&mut self, on_training: &mut dyn FnMut(&Controller)) -> Result<Reply, ControllerError> {
        let retrained = match self.mode {
            Mode::Active => self.round_trip(on_training),
            Mode::Training => {
                if !self.threshold_met() {
                    return Err(ControllerError::InsufficientLabels {
                        counts: self.labeled_counts(),
                        threshold: self.config.activation_threshold,
                    });
                }
                self.train_and_activate()
            }
        };
        Ok(Reply::Retrained(RetrainOutcome {
            retrained,
            mode: self.mode,
            model_version: self.model_version(),
        }))
    }

    fn queries(&mut self, n: usize) -> Result<Reply, ControllerError> {
        self.require_mode(Mode::Active)?;
        if n == 0 {
            return Err(ControllerError::InvalidRequest("query count must be at least 1".into()));
        }
        if self.queue.is_empty() && !self.pool.is_empty() {
            self.record(Event::Command(Command::Queries { n }));
            self.issue_queries(n);
        }
        let k = n.min(self.queue.len());
        Ok(Reply::Queries {
            batch: Batch {
                ids: self.queue.ids[..k].to_vec(),
                scores: self.queue.scores[..k].to_vec(),
            },
        })
    }

    fn take_from_pool(&mut self, id: &str) {
        self.pool.remove(id);
        self.pool_vectors.remove(id);
        if let Some(i) = self.queue.ids.iter().position(|q| q == id) {
            self.queue.ids.remove(i);
            self.queue.scores.remove(i);
        }
    }

    fn push_label(&mut self, id: &str, label: Label, provenance: Provenance, sequence: u64) {
        self.current.insert(id.into(), self.store.len());
        self.store.push(LabelRecord {
            id: id.into(),
            label,
            provenance,
            sequence,
            superseded: false,
        });
        self.labels_since_train += 1;
    }

    fn threshold_met(&self) -> bool {
        let counts = self.labeled_counts();
        Label::BOTH
            .iter()
            .all(|&y| counts.get(y) >= self.config.activation_threshold)
    }

    fn maybe_activate(&mut self) -> bool {
        self.mode == Mode::Training && self.threshold_met() && self.train_and_activate()
    }

    /// AM -> TM -> retrain -> AM. Stays in TM if training fails.
    fn round_trip(&mut self, on_training: &mut dyn FnMut(&Controller)) -> bool {
        self.enter(Mode::Training);
        on_training(self);
        self.train_and_activate()
    }

    fn train_and_activate(&mut self) -> bool {
        let (snapshot, record) = match self.fit() {
            Ok(fitted) => fitted,
            Err(reason) => {
                self.record(Event::TrainFailed { reason });
                return false;
            }
        };
        self.versions = snapshot.version;
        if let Some(report) = record.report {
            self.curve.push(CurvePoint {
                model_version: snapshot.version,
                labels_used: snapshot.labels_used,
                report,
            });
        }
        self.snapshot = Some(snapshot);
        self.labels_since_train = 0;
        self.record(Event::Trained(record));
        self.enter(Mode::Active);

        let ids: Vec<String> = self.pool.iter().cloned().collect();
        self.pool_vectors = ids
            .into_iter()
            .map(|id| {
                let x = self.vectorize_message(&id);
                (id, x)
            })
            .collect();

        let pending = self.mailbox.take_pending();
        if !pending.is_empty() {
            let ids = pending.iter().map(|p| p.id.clone()).collect();
            for p in pending {
                let entry = self.score_entry(&p.id, p.delivered_at);
                self.mailbox.insert(entry);
            }
            self.record(Event::Ranked { ids });
            self.evict();
        }

        self.queue = Batch::default();
        if !self.pool.is_empty() {
            self.issue_queries(self.config.batch_size);
        }
        true
    }

    fn fit(&self) -> Result<(Snapshot, TrainingRecord), String> {
        let labeled: Vec<(&str, Label)> = self
            .current
            .iter()
            .map(|(id, &i)| (id.as_str(), self.store[i].label))
            .collect();
        let texts: Vec<String> = labeled.iter().map(|(id, _)| self.messages[*id].message.text()).collect();
        let vcfg = &self.config.vectorizer;
        let dictionary = build_dictionary_from_texts(&texts, vcfg).map_err(|e| e.to_string())?;
        let examples = labeled
            .iter()
            .zip(&texts)
            .map(|(&(id, y), text)| Ok(LabeledExample::new(id, vectorize_text(text, &dictionary, vcfg)?, y)))
            .collect::<Result<Vec<_>, VectorizeError>>()
            .map_err(|e| e.to_string())?;
        let (model, _) =
            svm::train_with_dim(&examples, dictionary.len(), &self.config.train).map_err(|e| e.to_string())?;

        let report = if self.config.holdout.is_empty() {
            None
        } else {
            let test = self
                .config
                .holdout
                .iter()
                .map(|m| {
                    let x = vectorize_text(&m.text(), &dictionary, vcfg)?;
                    Ok(LabeledExample::new(m.id.clone(), x, m.true_label.expect("validated")))
                })
                .collect::<Result<Vec<_>, VectorizeError>>()
                .map_err(|e| e.to_string())?;
            let counts = confusion(&model, &test).map_err(|e| e.to_string())?;
            Some(rates(&counts).map_err(|e| e.to_string())?)
        };

        let version = self.versions + 1;
        let record = TrainingRecord {
            model_version: version,
            labels_used: labeled.len(),
            dictionary_size: dictionary.len(),
            dictionary: dictionary.fingerprint(),
            model: model_fingerprint(&model),
            support_ids: model.support_ids().to_vec(),
            report,
        };
        let snapshot = Snapshot {
            version,
            dictionary,
            model,
            labels_used: labeled.len(),
        };
        Ok((snapshot, record))
    }

    fn vectorize_message(&self, id: &str) -> FeatureVector {
        let snap = self.snapshot.as_ref().expect("vectorizing requires a model");
        vectorize_text(&self.messages[id].message.text(), &snap.dictionary, &self.config.vectorizer)
            .expect("dictionary was built with the controller's vectorizer config")
    }

    fn score_entry(&self, id: &str, delivered_at: u64) -> MailboxEntry {
        let snap = self.snapshot.as_ref().expect("scoring requires a model");
        let x = self.vectorize_message(id);
        let score = snap
            .model
            .decision_value(&x)
            .expect("vector and model share the snapshot dictionary");
        MailboxEntry {
            id: id.into(),
            score,
            label_shown: Label::from_score(score),
            delivered_at,
            model_version: snap.version,
            degenerate: x.is_zero(),
        }
    }

    fn evict(&mut self) -> Vec<String> {
        let evicted = self.mailbox.evict_overflow();
        if evicted.is_empty() {
            return Vec::new();
        }
        let ids = evicted.iter().map(|e| e.id.clone()).collect();
        self.archive.extend(evicted.iter().cloned());
        self.record(Event::Evicted { entries: evicted });
        ids
    }

    fn issue_queries(&mut self, n: usize) {
        let snap = self.snapshot.as_ref().expect("queries require a model");
        let pool = Pool::new(self.pool_vectors.iter().map(|(k, v)| (k.clone(), v.clone())))
            .expect("pool ids are unique");
        let seed = FingerprintBuilder::new()
            .u64(self.config.seed)
            .u64(snap.version)
            .u64(self.log.len() as u64)
            .finish()
            .0;
        let batch = select_batch(&snap.model, &pool, n, self.config.strategy, seed)
            .expect("n >= 1 and pool vectors match the model");
        self.queue = batch.clone();
        self.record(Event::QueriesIssued { batch });
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn snapshot(&self) -> Option<&Snapshot> {
        self.snapshot.as_ref()
    }

    pub fn model_version(&self) -> Option<u64> {
        self.snapshot.as_ref().map(|s| s.version)
    }

    pub fn mailbox(&self) -> &Mailbox {
        &self.mailbox
    }

    /// Entries evicted from the mailbox, in eviction order.
    pub fn archive(&self) -> &[MailboxEntry] {
        &self.archive
    }

    pub fn pool(&self) -> &BTreeSet<String> {
        &self.pool
    }

    pub fn query_queue(&self) -> &Batch {
        &self.queue
    }

    /// All label records, including superseded ones.
    pub fn label_records(&self) -> &[LabelRecord] {
        &self.store
    }

    pub fn label_of(&self, id: &str) -> Option<Label> {
        self.current.get(id).map(|&i| self.store[i].label)
    }

    pub fn labeled_counts(&self) -> LabelCounts {
        let mut counts = LabelCounts::default();
        for &i in self.current.values() {
            match self.store[i].label {
                Label::Spam => counts.spam += 1,
                Label::Nonspam => counts.nonspam += 1,
            }
        }
        counts
    }

    pub fn message(&self, id: &str) -> Option<&StoredMessage> {
        self.messages.get(id)
    }

    pub fn messages(&self) -> impl Iterator<Item = &StoredMessage> {
        self.messages.values()
    }

    pub fn curve(&self) -> &[CurvePoint] {
        &self.curve
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn status(&self) -> StatusView {
        StatusView {
            mode: self.mode,
            model_version: self.model_version(),
            labeled_counts: self.labeled_counts(),
            pool_size: self.pool.len(),
            mailbox_size: self.mailbox.len(),
            capacity: self.mailbox.capacity(),
            pending_queries: self.queue.len(),
        }
    }

    /// Ranked entries in mailbox order, then unranked ones in delivery order.
    pub fn mailbox_view(&self, limit: Option<usize>) -> Vec<MailboxItem> {
        let subject = |id: &str| self.messages[id].message.subject.clone();
        let ranked = self.mailbox.entries().iter().map(|e| MailboxItem {
            id: e.id.clone(),
            subject: subject(&e.id),
            score: Some(e.score),
            label_shown: Some(e.label_shown),
            delivered_at: e.delivered_at,
            degenerate: e.degenerate,
        });
        let pending = self.mailbox.pending().iter().map(|p| MailboxItem {
            id: p.id.clone(),
            subject: subject(&p.id),
            score: None,
            label_shown: None,
            delivered_at: p.delivered_at,
            degenerate: false,
        });
        ranked.chain(pending).take(limit.unwrap_or(usize::MAX)).collect()
    }

    pub fn message_view(&self, id: &str) -> Option<MessageView> {
        let stored = self.messages.get(id)?;
        let (entry, archived) = match self.mailbox.get(id) {
            Some(e) => (Some(e), false),
            None => (self.archive.iter().find(|e| e.id == id), true),
        };
        Some(MessageView {
            id: id.into(),
            subject: stored.message.subject.clone(),
            body: stored.message.body.clone(),
            delivered_at: stored.delivered_at,
            label: self.label_of(id),
            in_pool: self.pool.contains(id),
            scoring: entry.map(|e| ScoreProvenance {
                score: e.score,
                label_shown: e.label_shown,
                model_version: e.model_version,
                degenerate: e.degenerate,
                archived,
            }),
        })
    }

    /// The pending query batch with subjects, without issuing a new one.
    pub fn queries_view(&self, n: usize) -> Vec<QueryItem> {
        self.queue
            .ids
            .iter()
            .zip(&self.queue.scores)
            .take(n)
            .map(|(id, &score)| QueryItem {
                id: id.clone(),
                subject: self.messages[id].message.subject.clone(),
                score,
            })
            .collect()
    }

    pub fn metrics(&self) -> MetricsView {
        MetricsView {
            report: self.curve.last().map(|p| p.report),
            curve: self.curve.clone(),
        }
    }
}
