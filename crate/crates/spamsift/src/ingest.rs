//! Corpus loaders: a directory per class, and a minimal mbox reader.
//!
//! Directory layout: `<root>/{ham,spam,unlabeled}/<name>`, one UTF-8 message
//! per file, first line subject, the rest body. Mbox: `From ` at column 0
//! starts a message, `Subject:` comes from the header block, the body is
//! everything after the first blank line. No MIME decoding.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use spamsift_core::{Corpus, CorpusError, Label, RawMessage};

/// Class subdirectories in load order, with the label each one implies.
pub const CLASS_DIRS: [(&str, Option<Label>); 3] =
    [("ham", Some(Label::Nonspam)), ("spam", Some(Label::Spam)), ("unlabeled", None)];

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{}: {err}", path.display())]
    Path { path: PathBuf, err: io::Error },
    #[error("{}: no readable messages", .0.display())]
    Empty(PathBuf),
    #[error("{}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// A file that was skipped rather than loaded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestWarning {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub corpus: Corpus,
    pub warnings: Vec<IngestWarning>,
}

fn warn(warnings: &mut Vec<IngestWarning>, path: &Path, reason: impl Into<String>) {
    let reason = reason.into();
    tracing::warn!(path = %path.display(), "skipping: {reason}");
    warnings.push(IngestWarning {
        path: path.to_path_buf(),
        reason,
    });
}

/// Splits a message file into subject (first line) and body (the rest).
pub fn parse_message_file(text: &str) -> (String, String) {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    match text.split_once('\n') {
        Some((subject, body)) => (subject.trim_end_matches('\r').to_string(), body.to_string()),
        None => (text.trim_end_matches('\r').to_string(), String::new()),
    }
}

pub fn load_directory_corpus(root: &Path) -> Result<Ingested, IngestError> {
    let meta = fs::metadata(root).map_err(|err| IngestError::Path {
        path: root.to_path_buf(),
        err,
    })?;
    if !meta.is_dir() {
        return Err(IngestError::Path {
            path: root.to_path_buf(),
            err: io::Error::new(io::ErrorKind::NotADirectory, "not a directory"),
        });
    }

    let mut messages = Vec::new();
    let mut warnings = Vec::new();
    for (sub, label) in CLASS_DIRS {
        let dir = root.join(sub);
        if !dir.is_dir() {
            continue;
        }
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) => {
                warn(&mut warnings, &dir, e.to_string());
                continue;
            }
        };
        let mut files = Vec::new();
        for entry in entries {
            let entry = match entry {
                Ok(e) => e,
                Err(e) => {
                    warn(&mut warnings, &dir, e.to_string());
                    continue;
                }
            };
            let path = entry.path();
            if !path.is_file() {
                continue;
            }
            match entry.file_name().into_string() {
                Ok(name) => files.push((name, path)),
                Err(_) => warn(&mut warnings, &path, "file name is not UTF-8"),
            }
        }
        files.sort();
        for (name, path) in files {
            let text = match fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) => {
                    warn(&mut warnings, &path, e.to_string());
                    continue;
                }
            };
            let (subject, body) = parse_message_file(&text);
            let mut m = RawMessage::new(format!("{sub}/{name}"), subject, body);
            m.received_at = messages.len() as u64;
            m.true_label = label;
            messages.push(m);
        }
    }
    if messages.is_empty() {
        return Err(IngestError::Empty(root.to_path_buf()));
    }
    Ok(Ingested {
        corpus: Corpus::new(messages)?,
        warnings,
    })
}

pub fn load_mbox(path: &Path) -> Result<Ingested, IngestError> {
    let bytes = fs::read(path).map_err(|err| IngestError::Path {
        path: path.to_path_buf(),
        err,
    })?;
    // mail in the wild is not always UTF-8; keep what decodes
    let text = String::from_utf8_lossy(&bytes);
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let blocks = split_mbox(&text);
    if blocks.is_empty() {
        return Err(IngestError::Format {
            path: path.to_path_buf(),
            reason: "no \"From \" delimiter line".into(),
        });
    }
    let messages = blocks
        .iter()
        .enumerate()
        .map(|(i, lines)| {
            let (subject, body) = parse_mbox_block(lines);
            let mut m = RawMessage::new(format!("{name}#{}", i + 1), subject, body);
            m.received_at = i as u64;
            m
        })
        .collect();
    Ok(Ingested {
        corpus: Corpus::non_empty(messages)?,
        warnings: Vec::new(),
    })
}

/// Lines of each message, without the `From ` envelope line. Anything before
/// the first delimiter is dropped.
fn split_mbox(text: &str) -> Vec<Vec<&str>> {
    let mut blocks: Vec<Vec<&str>> = Vec::new();
    for line in text.split('\n') {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.starts_with("From ") {
            blocks.push(Vec::new());
        } else if let Some(b) = blocks.last_mut() {
            b.push(line);
        }
    }
    blocks
}

fn parse_mbox_block(lines: &[&str]) -> (String, String) {
    let split = lines.iter().position(|l| l.is_empty()).unwrap_or(lines.len());
    let (headers, rest) = lines.split_at(split);

    let mut subject: Option<String> = None;
    let mut in_subject = false;
    for h in headers {
        if in_subject && h.starts_with([' ', '\t']) {
            // folded continuation of the subject line
            let s = subject.as_mut().expect("set when in_subject");
            s.push(' ');
            s.push_str(h.trim());
            continue;
        }
        in_subject = false;
        if subject.is_none() {
            if let Some((name, value)) = h.split_once(':') {
                if name.eq_ignore_ascii_case("subject") {
                    subject = Some(value.trim().to_string());
                    in_subject = true;
                }
            }
        }
    }

    let body: Vec<&str> = rest
        .iter()
        .skip(1)
        .map(|l| {
            // mboxrd quoting: ">From " at column 0 was escaped on write
            if l.trim_start_matches('>').starts_with("From ") && l.starts_with('>') {
                &l[1..]
            } else {
                l
            }
        })
        .collect();
    let mut body = body.join("\n");
    let trimmed = body.trim_end_matches('\n').len();
    body.truncate(trimmed);
    (subject.unwrap_or_default(), body)
}

/// Directory corpora for directories, mbox for plain files.
pub fn load_path(path: &Path) -> Result<Ingested, IngestError> {
    if path.is_dir() {
        load_directory_corpus(path)
    } else {
        load_mbox(path)
    }
}
