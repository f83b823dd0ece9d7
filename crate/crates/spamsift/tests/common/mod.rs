//! A service on an ephemeral port, a small HTTP client that speaks in
//! controller commands, and a scripted session used by several tests.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Mutex;

use serde_json::{json, Value};
use spamsift::formats::EventLogFile;
use spamsift::service::{self, Service, StateDir};
use spamsift_core::controller::Command;
use spamsift_core::{generate_synthetic_corpus, Controller, ControllerConfig, Label, RawMessage, VectorizerConfig, VocabSpec};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub fn session_config() -> ControllerConfig {
    ControllerConfig {
        capacity: 15,
        activation_threshold: 10,
        batch_size: 3,
        vectorizer: VectorizerConfig {
            min_df: 2,
            ..VectorizerConfig::default()
        },
        ..ControllerConfig::default()
    }
}

/// `2n` synthetic messages, alternating nonspam and spam.
pub fn interleaved(n: usize, seed: u64) -> Vec<RawMessage> {
    let msgs = generate_synthetic_corpus(n, n, &VocabSpec::default(), seed).unwrap().into_messages();
    let (ham, spam) = msgs.split_at(n);
    ham.iter().zip(spam).flat_map(|(h, s)| [h.clone(), s.clone()]).collect()
}

pub struct Running {
    pub api: Api,
    stop: oneshot::Sender<()>,
    task: JoinHandle<std::io::Result<Controller>>,
}

impl Running {
    pub async fn start(controller: Controller, state: Option<(StateDir, EventLogFile)>) -> Running {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let svc = Service::start(controller, state);
        let (stop, rx) = oneshot::channel::<()>();
        let task = tokio::spawn(service::serve(listener, svc, async {
            let _ = rx.await;
        }));
        Running {
            api: Api {
                base,
                http: reqwest::Client::new(),
                sent: Mutex::new(Vec::new()),
            },
            stop,
            task,
        }
    }

    /// Graceful shutdown; returns the writer's final controller.
    pub async fn stop(self) -> Controller {
        let _ = self.stop.send(());
        self.task.await.unwrap().unwrap()
    }
}

pub struct Api {
    pub base: String,
    pub http: reqwest::Client,
    /// Every command sent, in send order.
    pub sent: Mutex<Vec<Command>>,
}

impl Api {
    pub async fn get(&self, path: &str) -> (u16, Value) {
        let r = self.http.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap())
    }

    pub async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let r = self.http.post(format!("{}{path}", self.base)).json(&body).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap())
    }

    /// Sends the HTTP request that corresponds to `cmd` and records it.
    pub async fn send(&self, cmd: Command) -> (u16, Value) {
        self.sent.lock().unwrap().push(cmd.clone());
        match cmd {
            Command::Deliver {
                request_id,
                message_id,
                subject,
                body,
            } => {
                self.post(
                    "/messages",
                    json!({"request_id": request_id, "message_id": message_id, "subject": subject, "body": body}),
                )
                .await
            }
            Command::Label {
                request_id,
                message_id,
                label,
            } => {
                self.post("/labels", json!({"request_id": request_id, "message_id": message_id, "label": label}))
                    .await
            }
            Command::Feedback {
                request_id,
                message_id,
                corrected_label,
            } => {
                self.post(
                    "/feedback",
                    json!({"request_id": request_id, "message_id": message_id, "corrected_label": corrected_label}),
                )
                .await
            }
            Command::Queries { n } => self.get(&format!("/queries?n={n}")).await,
            Command::Retrain { request_id } => self.post("/admin/retrain", json!({ "request_id": request_id })).await,
        }
    }

    pub fn sent(&self) -> Vec<Command> {
        self.sent.lock().unwrap().clone()
    }
}

pub fn deliver(m: &RawMessage) -> Command {
    Command::Deliver {
        request_id: Some(format!("d-{}", m.id)),
        message_id: Some(m.id.clone()),
        subject: m.subject.clone(),
        body: m.body.clone(),
    }
}

pub fn label(id: &str, y: Label, rid: &str) -> Command {
    Command::Label {
        request_id: Some(rid.into()),
        message_id: id.into(),
        label: y,
    }
}

pub fn feedback(id: &str, y: Label, rid: &str) -> Command {
    Command::Feedback {
        request_id: Some(rid.into()),
        message_id: id.into(),
        corrected_label: y,
    }
}

fn label_of(v: &Value) -> Label {
    serde_json::from_value(v.clone()).unwrap()
}

/// Ranked mailbox entries as (id, shown label), server order.
pub async fn ranked(api: &Api) -> Vec<(String, Label)> {
    let (_, mb) = api.get("/mailbox").await;
    mb.as_array()
        .unwrap()
        .iter()
        .filter(|e| !e["label_shown"].is_null())
        .map(|e| (e["id"].as_str().unwrap().to_string(), label_of(&e["label_shown"])))
        .collect()
}

/// Picks a ranked, unlabeled entry to correct, preferring a genuine
/// misclassification. Returns (id, corrected label).
pub async fn feedback_target(api: &Api, truth: &BTreeMap<String, Label>, skip: &[String]) -> (String, Label) {
    let mut open = Vec::new();
    for (id, shown) in ranked(api).await {
        if skip.contains(&id) {
            continue;
        }
        let (_, m) = api.get(&format!("/message/{id}")).await;
        if m["label"].is_null() {
            open.push((id, shown));
        }
    }
    let pick = open.iter().find(|(id, shown)| truth[id] != *shown).or(open.first()).expect("an open ranked entry");
    (pick.0.clone(), pick.1.other())
}

/// Ingest, label 20 until activation, deliver more, answer queries, give
/// feedback, force a retrain. Every step's response is checked as it goes.
pub async fn scripted_session(api: &Api, seed: u64) -> BTreeMap<String, Label> {
    let msgs = interleaved(25, seed);
    let truth: BTreeMap<String, Label> = msgs.iter().map(|m| (m.id.clone(), m.true_label.unwrap())).collect();

    let (s, st) = api.get("/status").await;
    assert_eq!((s, st["mode"].as_str()), (200, Some("TM")));
    for m in &msgs[..30] {
        let (s, out) = api.send(deliver(m)).await;
        assert_eq!(s, 200, "{out}");
        assert!(out["placement"].is_null(), "training-mode deliveries are unranked");
    }
    // nothing to ask in training mode
    assert_eq!(api.send(Command::Queries { n: 3 }).await, (200, json!([])));

    // label the first 10 of each class; the 20th label activates
    let mut counts = BTreeMap::new();
    let mut last = Value::Null;
    for (i, m) in msgs[..30].iter().enumerate() {
        let y = truth[&m.id];
        let c = counts.entry(y).or_insert(0);
        if *c == 10 {
            continue;
        }
        *c += 1;
        let (s, out) = api.send(label(&m.id, y, &format!("l{i}"))).await;
        assert_eq!(s, 200, "{out}");
        last = out;
    }
    assert_eq!(last["mode"], "AM");
    assert_eq!(last["retrained"], true);
    assert_eq!(last["labeled_counts"], json!({"spam": 10, "nonspam": 10}));

    for m in &msgs[30..] {
        let (s, out) = api.send(deliver(m)).await;
        assert_eq!(s, 200, "{out}");
        assert!(out["placement"].is_object(), "active-mode deliveries are ranked");
    }
    let (_, st) = api.get("/status").await;
    assert_eq!(st["mailbox_size"], 15);

    let (s, batch) = api.send(Command::Queries { n: 3 }).await;
    assert_eq!(s, 200);
    let batch = batch.as_array().unwrap().clone();
    assert_eq!(batch.len(), 3);
    let mut last_label = None;
    for (k, q) in batch.iter().enumerate() {
        let id = q["id"].as_str().unwrap();
        let cmd = label(id, truth[id], &format!("q{k}"));
        let (s, out) = api.send(cmd.clone()).await;
        assert_eq!(s, 200, "{out}");
        last_label = Some((cmd, out));
    }
    // a client retry with the same request id changes nothing
    let (cmd, first) = last_label.unwrap();
    assert_eq!(api.send(cmd).await, (200, first));

    let (id, y) = feedback_target(api, &truth, &[]).await;
    let (s, out) = api.send(feedback(&id, y, "f1")).await;
    assert_eq!(s, 200, "{out}");
    assert_eq!(out["retrain_started"], true);
    assert_eq!(out["mode"], "AM");

    let (s, out) = api.send(Command::Retrain { request_id: Some("r1".into()) }).await;
    assert_eq!(s, 200, "{out}");
    assert_eq!(out["mode"], "AM");
    let (s, _) = api.send(Command::Queries { n: 2 }).await;
    assert_eq!(s, 200);
    truth
}

/// Applies `cmds` to a fresh controller in process, ignoring rejections
/// exactly as the server does.
pub fn in_process(config: ControllerConfig, cmds: &[Command]) -> Controller {
    let mut c = Controller::new(config).unwrap();
    for cmd in cmds {
        let _ = c.apply(cmd.clone());
    }
    c
}
