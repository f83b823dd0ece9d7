//! On-disk formats: corpus JSONL, dictionary text files, model files,
//! cycle-history CSV, comparison summaries and the controller event log.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use spamsift_core::controller::LogRecord;
use spamsift_core::eval::{Comparison, EvalReport};
use spamsift_core::fingerprint::Fingerprint;
use spamsift_core::svm::{deserialize_model, serialize_model, CodecError};
use spamsift_core::vectorizer::DictionaryEntry;
use spamsift_core::{Corpus, CorpusError, CycleHistory, Dictionary, SvmModel, VectorizerConfig};

pub const DICTIONARY_MAGIC: &str = "spamsift-dictionary";
pub const DICTIONARY_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{}: {err}", path.display())]
    Io { path: PathBuf, err: io::Error },
    #[error("line {line}: {err}")]
    Json { line: usize, err: serde_json::Error },
    #[error("line {line}: {reason}")]
    Dictionary { line: usize, reason: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] CodecError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Stream(#[from] io::Error),
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> FormatError + '_ {
    move |err| FormatError::Io {
        path: path.to_path_buf(),
        err,
    }
}

pub fn open(path: &Path) -> Result<BufReader<File>, FormatError> {
    File::open(path).map(BufReader::new).map_err(io_at(path))
}

/// Writes through a sibling temp file and renames it into place, so readers
/// never see a half-written file.
pub fn write_atomic(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<(), FormatError>) -> Result<(), FormatError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let file = File::create(&tmp).map_err(io_at(&tmp))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(io_at(&tmp))?;
    drop(w);
    fs::rename(&tmp, path).map_err(io_at(path))
}

// ---- corpus -------------------------------------------------------------

/// One `RawMessage` JSON object per line, in corpus order.
pub fn write_corpus(w: &mut dyn Write, corpus: &Corpus) -> Result<(), FormatError> {
    for m in corpus.messages() {
        serde_json::to_writer(&mut *w, m).map_err(|err| FormatError::Json { line: 0, err })?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_corpus(r: impl BufRead) -> Result<Corpus, FormatError> {
    let messages = read_ndjson(r)?;
    Ok(Corpus::new(messages)?)
}

pub fn load_corpus(path: &Path) -> Result<Corpus, FormatError> {
    read_corpus(open(path)?)
}

pub fn save_corpus(path: &Path, corpus: &Corpus) -> Result<(), FormatError> {
    write_atomic(path, |w| write_corpus(w, corpus))
}

fn read_ndjson<T: serde::de::DeserializeOwned>(r: impl BufRead) -> Result<Vec<T>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|err| FormatError::Json { line: i + 1, err })?);
    }
    Ok(out)
}

// ---- dictionary ---------------------------------------------------------

/// Text layout, one item per line:
///
/// ```text
/// spamsift-dictionary 1
/// n_docs 70
/// config min_df=3 stoplist=false punctuation=true lowercase=true fingerprint=...
/// words 412
/// <word> <index> <df> <idf>
/// ```
///
/// Words never contain whitespace. IDF values are written in the shortest
/// decimal form that parses back to the same `f64`.
pub fn write_dictionary(w: &mut dyn Write, dict: &Dictionary, config: &VectorizerConfig) -> Result<(), FormatError> {
    writeln!(w, "{DICTIONARY_MAGIC} {DICTIONARY_VERSION}")?;
    writeln!(w, "n_docs {}", dict.n_docs())?;
    writeln!(
        w,
        "config min_df={} stoplist={} punctuation={} lowercase={} fingerprint={}",
        config.min_df,
        config.use_stoplist,
        config.keep_punctuation_tokens,
        config.lowercase,
        dict.config_fingerprint()
    )?;
    writeln!(w, "words {}", dict.len())?;
    let mut rows: Vec<(&str, &DictionaryEntry)> = dict.iter().collect();
    rows.sort_by_key(|(_, e)| e.index);
    for (word, e) in rows {
        writeln!(w, "{word} {} {} {:?}", e.index, e.df, e.idf)?;
    }
    Ok(())
}

pub fn read_dictionary(r: impl BufRead) -> Result<(Dictionary, VectorizerConfig), FormatError> {
    let mut lines = r.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String), FormatError> {
        match lines.next() {
            Some((i, l)) => Ok((i + 1, l?)),
            None => Err(FormatError::Dictionary {
                line: 0,
                reason: format!("unexpected end of file, expected {what}"),
            }),
        }
    };
    let bad = |line: usize, reason: String| FormatError::Dictionary { line, reason };

    let (n, header) = next("header")?;
    match header.split_once(' ') {
        Some((DICTIONARY_MAGIC, v)) if v.trim() == DICTIONARY_VERSION.to_string() => {}
        Some((DICTIONARY_MAGIC, v)) => return Err(bad(n, format!("unsupported dictionary version {v}"))),
        _ => return Err(bad(n, "not a dictionary file".into())),
    }

    let (n, line) = next("n_docs")?;
    let n_docs: usize = keyed(&line, "n_docs")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad(n, "expected `n_docs <count>`".into()))?;

    let (n, line) = next("config")?;
    let fields = keyed(&line, "config").ok_or_else(|| bad(n, "expected `config ...`".into()))?;
    let mut config = VectorizerConfig::default();
    let mut fingerprint = None;
    for kv in fields.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(n, format!("malformed field {kv:?}")))?;
        let flag = || v.parse::<bool>().map_err(|_| bad(n, format!("{k} must be true or false")));
        match k {
            "min_df" => config.min_df = v.parse().map_err(|_| bad(n, "min_df must be a count".into()))?,
            "stoplist" => config.use_stoplist = flag()?,
            "punctuation" => config.keep_punctuation_tokens = flag()?,
            "lowercase" => config.lowercase = flag()?,
            "fingerprint" => fingerprint = Fingerprint::parse_hex(v),
            _ => return Err(bad(n, format!("unknown config field {k:?}"))),
        }
    }
    let fingerprint = fingerprint.ok_or_else(|| bad(n, "missing or malformed fingerprint".into()))?;
    if fingerprint != config.fingerprint() {
        return Err(bad(n, "config fingerprint does not match the config fields".into()));
    }

    let (n, line) = next("words")?;
    let count: usize = keyed(&line, "words")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad(n, "expected `words <count>`".into()))?;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, line) = next("a word row")?;
        let cols: Vec<&str> = line.split(' ').collect();
        let [word, index, df, idf] = cols[..] else {
            return Err(bad(n, "expected `<word> <index> <df> <idf>`".into()));
        };
        let index = index.parse().map_err(|_| bad(n, "bad index".into()))?;
        let df = df.parse().map_err(|_| bad(n, "bad df".into()))?;
        let idf = idf.parse().map_err(|_| bad(n, "bad idf".into()))?;
        entries.push((word.to_string(), DictionaryEntry { index, df, idf }));
    }
    if let Ok((n, extra)) = next("end of file") {
        if !extra.trim().is_empty() {
            return Err(bad(n, "trailing content after the last word".into()));
        }
    }
    let dict = Dictionary::from_parts(entries, n_docs, fingerprint, config.min_df)
        .map_err(|e| bad(0, e.to_string()))?;
    Ok((dict, config))
}

fn keyed<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    line.strip_prefix(key)?.strip_prefix(' ').map(str::trim)
}

pub fn load_dictionary(path: &Path) -> Result<(Dictionary, VectorizerConfig), FormatError> {
    read_dictionary(open(path)?)
}

pub fn save_dictionary(path: &Path, dict: &Dictionary, config: &VectorizerConfig) -> Result<(), FormatError> {
    write_atomic(path, |w| write_dictionary(w, dict, config))
}

// ---- model --------------------------------------------------------------

pub fn load_model(path: &Path) -> Result<SvmModel, FormatError> {
    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes).map_err(io_at(path))?;
    Ok(deserialize_model(&bytes)?)
}

pub fn save_model(path: &Path, model: &SvmModel) -> Result<(), FormatError> {
    let bytes = serialize_model(model);
    write_atomic(path, |w| Ok(w.write_all(&bytes)?))
}

// ---- cycle histories and comparisons ------------------------------------

pub const HISTORY_COLUMNS: [&str; 7] =
    ["iteration", "labels_used", "strategy", "accuracy", "miss_rate", "false_alarm_rate", "n_support"];

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:?}")).unwrap_or_default()
}

/// One row per iteration, columns as in [`HISTORY_COLUMNS`]. Rates that are
/// undefined (or iterations without a test set) are empty fields.
pub fn write_history(w: &mut dyn Write, history: &CycleHistory) -> Result<(), FormatError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(HISTORY_COLUMNS)?;
    for r in &history.records {
        let rep = r.report.as_ref();
        out.write_record([
            r.iteration.to_string(),
            r.labels_used.to_string(),
            history.strategy.to_string(),
            opt(rep.and_then(EvalReport::accuracy)),
            opt(rep.and_then(|e| e.miss_rate)),
            opt(rep.and_then(|e| e.false_alarm_rate)),
            r.n_support.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn history_bytes(history: &CycleHistory) -> Vec<u8> {
    let mut buf = Vec::new();
    write_history(&mut buf, history).expect("writing to memory");
    buf
}

/// Per-strategy aggregate rows.
pub fn write_summary(w: &mut dyn Write, comparison: &Comparison) -> Result<(), FormatError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["strategy", "runs", "reached_target", "median_labels_to_target", "mean_final_accuracy"])?;
    for s in &comparison.summary {
        out.write_record([
            s.strategy.to_string(),
            s.runs.to_string(),
            s.reached.to_string(),
            opt(s.median_labels_to_target),
            format!("{:?}", s.mean_final_accuracy),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Long-format points for plotting accuracy against labels used.
pub fn write_plot_data(w: &mut dyn Write, comparison: &Comparison) -> Result<(), FormatError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["strategy", "seed", "labels_used", "accuracy"])?;
    for (strategy, runs) in &comparison.histories {
        for h in runs {
            for r in &h.records {
                if let Some(a) = r.report.as_ref().and_then(EvalReport::accuracy) {
                    out.write_record([strategy.to_string(), h.seed.to_string(), r.labels_used.to_string(), format!("{a:?}")])?;
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    target_accuracy: f64,
    seeds: &'a [u64],
    summary: &'a [spamsift_core::eval::StrategySummary],
}

/// Writes `summary.json`, `summary.csv`, `plot.csv` and one history CSV per
/// run under `curves/`. Returns the paths written.
pub fn save_comparison(dir: &Path, comparison: &Comparison) -> Result<Vec<PathBuf>, FormatError> {
    let curves = dir.join("curves");
    fs::create_dir_all(&curves).map_err(io_at(&curves))?;
    let mut written = Vec::new();
    let json = dir.join("summary.json");
    write_atomic(&json, |w| {
        let s = SummaryFile {
            target_accuracy: comparison.target_accuracy,
            seeds: &comparison.seeds,
            summary: &comparison.summary,
        };
        serde_json::to_writer_pretty(&mut *w, &s).map_err(|err| FormatError::Json { line: 0, err })?;
        Ok(w.write_all(b"\n")?)
    })?;
    written.push(json);
    let summary = dir.join("summary.csv");
    write_atomic(&summary, |w| write_summary(w, comparison))?;
    written.push(summary);
    let plot = dir.join("plot.csv");
    write_atomic(&plot, |w| write_plot_data(w, comparison))?;
    written.push(plot);
    for runs in comparison.histories.values() {
        for h in runs {
            let p = curves.join(format!("{}-seed{}.csv", h.strategy, h.seed));
            write_atomic(&p, |w| write_history(w, h))?;
            written.push(p);
        }
    }
    Ok(written)
}

// ---- evaluation reports ---------------------------------------------------

pub fn format_report(report: &EvalReport) -> String {
    let rate = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
    let c = &report.counts;
    format!(
        "messages      {}\n\
         error rate    {}\n\
         miss rate     {}   (nonspam classified as spam: {} of {})\n\
         false alarm   {}   (spam classified as nonspam: {} of {})\n",
        c.total(),
        rate(report.error_rate),
        rate(report.miss_rate),
        c.nonspam_misclassified,
        c.n_nonspam_total,
        rate(report.false_alarm_rate),
        c.spam_misclassified,
        c.n_spam_total,
    )
}

// ---- event log ------------------------------------------------------------

pub fn write_log_records(w: &mut dyn Write, records: &[LogRecord]) -> Result<(), FormatError> {
    for r in records {
        serde_json::to_writer(&mut *w, r).map_err(|err| FormatError::Json { line: 0, err })?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_event_log(r: impl BufRead) -> Result<Vec<LogRecord>, FormatError> {
    read_ndjson(r)
}

pub fn load_event_log(path: &Path) -> Result<Vec<LogRecord>, FormatError> {
    read_event_log(open(path)?)
}

/// Append-only event log file. `sync` writes the records it has not seen yet.
pub struct EventLogFile {
    path: PathBuf,
    out: BufWriter<File>,
    written: usize,
}

impl EventLogFile {
    /// Opens `path` for appending; `already` records are assumed to be in it.
    pub fn append(path: &Path, already: usize) -> Result<EventLogFile, FormatError> {
        let file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_at(path))?;
        Ok(EventLogFile {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
            written: already,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn sync(&mut self, log: &[LogRecord]) -> Result<(), FormatError> {
        if log.len() > self.written {
            write_log_records(&mut self.out, &log[self.written..])?;
            self.written = log.len();
        }
        self.out.flush().map_err(io_at(&self.path))?;
        self.out.get_ref().sync_data().map_err(io_at(&self.path))
    }
}
