//! `spamsift` command line. Exit status: 0 success, 1 usage error, 2 data or
//! model error.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use spamsift_core::eval::ExperimentConfig;
use spamsift_core::{
    build_dictionary, compare_strategies, generate_synthetic_corpus, ActiveLearningConfig, ControllerConfig, Corpus,
    Label, RawMessage, SelectionStrategy, StopRule, TrainConfig, VectorizerConfig, VocabSpec,
};

use crate::formats;
use crate::ingest;
use crate::pipeline;
use crate::service::{self, Service, StateDir};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "spamsift", version, about = "SVM spam triage with active learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Load a directory corpus (ham/, spam/, unlabeled/) or an mbox file into a corpus file.
    Ingest {
        path: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Generate a labeled synthetic corpus.
    Synth {
        #[arg(long, default_value_t = 50)]
        spam: usize,
        #[arg(long, default_value_t = 50)]
        nonspam: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        overlap: Option<f64>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Build a TF-IDF dictionary from a corpus file.
    BuildDict {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        vectorizer: VectorizerArgs,
    },
    /// Train a model on the labeled messages of a corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100.0)]
        c: f64,
        /// Also write the training diagnostics as JSON.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Evaluate a model on a labeled corpus.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare active-learning strategies over several seeds.
    SimulateAl(SimulateArgs),
    /// Classify one message file (first line subject, rest body).
    Classify {
        file: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dict: PathBuf,
    },
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct VectorizerArgs {
    #[arg(long, default_value_t = 3)]
    pub min_df: usize,
    /// Drop common English function words.
    #[arg(long)]
    pub stoplist: bool,
    /// Ignore punctuation tokens.
    #[arg(long)]
    pub no_punctuation: bool,
    /// Keep letter case.
    #[arg(long)]
    pub keep_case: bool,
}

impl VectorizerArgs {
    fn config(&self) -> VectorizerConfig {
        VectorizerConfig {
            min_df: self.min_df,
            use_stoplist: self.stoplist,
            keep_punctuation_tokens: !self.no_punctuation,
            lowercase: !self.keep_case,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Labeled corpus file; the default synthetic corpus when absent.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Comma-separated strategies: closest, furthest, random.
    #[arg(long, value_delimiter = ',', default_value = "closest,random")]
    pub strategy: Vec<SelectionStrategy>,
    #[arg(long, default_value_t = 5)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    /// First seed; runs use seed, seed+1, ...
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop once this many labels are used; the whole pool when absent.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Test accuracy that counts as reaching the target.
    #[arg(long, default_value_t = 0.9)]
    pub target: f64,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 100.0)]
    pub c: f64,
    /// Output directory for the summary, plot data and per-run curves.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Event log, model and dictionary live here.
    #[arg(long)]
    pub state_dir: PathBuf,
    /// Corpus file delivered on a fresh start.
    #[arg(long)]
    pub inbox: Option<PathBuf>,
    /// Labeled corpus used only to report metrics after each training.
    #[arg(long)]
    pub holdout: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub capacity: usize,
    /// Labels needed per class before the first model.
    #[arg(long, default_value_t = 10)]
    pub threshold: usize,
    #[arg(long, default_value_t = 5)]
    pub batch_size: usize,
    #[arg(long, default_value = "closest")]
    pub strategy: SelectionStrategy,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub vectorizer: VectorizerArgs,
}

/// Failure of a subcommand, split by exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the exit status. Normal output goes to `out`, diagnostics to
/// stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            EXIT_DATA
        }
    }
}

pub fn dispatch(cmd: Cmd, out: &mut dyn Write) -> Result<(), Failure> {
    match cmd {
        Cmd::Ingest { path, out: dest } => {
            let loaded = ingest::load_path(&path)?;
            formats::save_corpus(&dest, &loaded.corpus)?;
            let c = &loaded.corpus;
            writeln!(
                out,
                "{} messages ({} spam, {} nonspam, {} unlabeled), {} skipped -> {}",
                c.len(),
                c.count(Label::Spam),
                c.count(Label::Nonspam),
                c.len() - c.n_labeled(),
                loaded.warnings.len(),
                dest.display()
            )?;
        }
        Cmd::Synth {
            spam,
            nonspam,
            seed,
            overlap,
            out: dest,
        } => {
            let mut spec = VocabSpec::default();
            if let Some(o) = overlap {
                if !(0.0..=1.0).contains(&o) {
                    return Err(usage("--overlap must be within [0, 1]"));
                }
                spec = spec.with_overlap(o);
            }
            let corpus = generate_synthetic_corpus(spam, nonspam, &spec, seed)?;
            formats::save_corpus(&dest, &corpus)?;
            writeln!(out, "{} messages -> {}", corpus.len(), dest.display())?;
        }
        Cmd::BuildDict {
            corpus,
            out: dest,
            vectorizer,
        } => {
            let cfg = vectorizer.config();
            if cfg.min_df == 0 {
                return Err(usage("--min-df must be at least 1"));
            }
            let corpus = load_corpus(&corpus)?;
            let dict = build_dictionary(&corpus, &cfg)?;
            formats::save_dictionary(&dest, &dict, &cfg)?;
            writeln!(out, "{} words from {} documents -> {}", dict.len(), dict.n_docs(), dest.display())?;
        }
        Cmd::Train {
            corpus,
            dict,
            out: dest,
            c,
            diagnostics,
        } => {
            if !(c > 0.0 && c.is_finite()) {
                return Err(usage("--c must be a positive number"));
            }
            let corpus = load_corpus(&corpus)?;
            let (dict, cfg) = load_dictionary(&dict)?;
            let (model, diag) = pipeline::train_corpus(&corpus, &dict, &cfg, &TrainConfig::default().with_c(c))?;
            formats::save_model(&dest, &model)?;
            if let Some(p) = diagnostics {
                formats::write_atomic(&p, |w| {
                    serde_json::to_writer_pretty(&mut *w, &diag)
                        .map_err(|err| formats::FormatError::Json { line: 0, err })?;
                    Ok(w.write_all(b"\n")?)
                })?;
            }
            let margin = diag.geometric_margin.map(|m| format!("{m:.6}")).unwrap_or_else(|| "-".into());
            writeln!(
                out,
                "trained on {} messages: {} support vectors ({} at C), objective {:.6}, margin {margin}, {} iterations -> {}",
                diag.slacks.len(),
                diag.n_support,
                diag.n_bounded,
                diag.objective,
                diag.iterations,
                dest.display()
            )?;
        }
        Cmd::Eval {
            model,
            dict,
            corpus,
            report,
        } => {
            let model = formats::load_model(&model).with_context(|| format!("reading {}", model.display()))?;
            let (dict, cfg) = load_dictionary(&dict)?;
            let corpus = load_corpus(&corpus)?;
            let r = pipeline::evaluate(&model, &corpus, &dict, &cfg)?;
            write!(out, "{}", formats::format_report(&r))?;
            if let Some(p) = report {
                formats::write_atomic(&p, |w| {
                    serde_json::to_writer_pretty(&mut *w, &r)
                        .map_err(|err| formats::FormatError::Json { line: 0, err })?;
                    Ok(w.write_all(b"\n")?)
                })?;
            }
        }
        Cmd::SimulateAl(args) => simulate(args, out)?,
        Cmd::Classify { file, model, dict } => {
            let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let (subject, body) = ingest::parse_message_file(&text);
            let model = formats::load_model(&model).with_context(|| format!("reading {}", model.display()))?;
            let (dict, cfg) = load_dictionary(&dict)?;
            let m = RawMessage::new(file.display().to_string(), subject, body);
            let (label, score) = pipeline::classify(&model, &dict, &cfg, &m)?;
            writeln!(out, "label={label} score={score}")?;
        }
        Cmd::Serve(args) => serve(args)?,
    }
    Ok(())
}

fn load_corpus(path: &Path) -> anyhow::Result<Corpus> {
    formats::load_corpus(path).with_context(|| format!("reading corpus {}", path.display()))
}

fn load_dictionary(path: &Path) -> anyhow::Result<(spamsift_core::Dictionary, VectorizerConfig)> {
    formats::load_dictionary(path).with_context(|| format!("reading dictionary {}", path.display()))
}

fn simulate(args: SimulateArgs, out: &mut dyn Write) -> Result<(), Failure> {
    if args.strategy.is_empty() {
        return Err(usage("--strategy needs at least one strategy"));
    }
    if args.seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    if args.batch_size == 0 {
        return Err(usage("--batch-size must be at least 1"));
    }
    if !(0.0..=1.0).contains(&args.target) {
        return Err(usage("--target must be within [0, 1]"));
    }
    if !(args.train_fraction > 0.0 && args.train_fraction < 1.0) {
        return Err(usage("--train-fraction must be strictly between 0 and 1"));
    }
    let mut strategies = args.strategy.clone();
    strategies.dedup();

    let corpus = match &args.corpus {
        Some(p) => load_corpus(p)?,
        None => generate_synthetic_corpus(50, 50, &VocabSpec::default(), 42)?,
    };
    let al = ActiveLearningConfig {
        batch_size: args.batch_size,
        seed: args.seed,
        stop: StopRule {
            budget: args.budget,
            target_accuracy: None,
        },
        ..ActiveLearningConfig::default()
    };
    let experiment = ExperimentConfig {
        train_fraction: args.train_fraction,
        target_accuracy: args.target,
        ..ExperimentConfig::default()
    };
    let started = Instant::now();
    let cmp = compare_strategies(&corpus, &strategies, &al, &TrainConfig::default().with_c(args.c), &experiment, args.seeds)?;
    let elapsed = started.elapsed();

    writeln!(out, "{} seeds, target accuracy {}, {:.2?}", cmp.seeds.len(), cmp.target_accuracy, elapsed)?;
    writeln!(out, "{:<10} {:>8} {:>8} {:>14} {:>14}", "strategy", "runs", "reached", "median_labels", "final_acc")?;
    for s in &cmp.summary {
        let median = s.median_labels_to_target.map(|m| format!("{m}")).unwrap_or_else(|| "unreached".into());
        writeln!(
            out,
            "{:<10} {:>8} {:>8} {:>14} {:>14.4}",
            s.strategy.as_str(),
            s.runs,
            s.reached,
            median,
            s.mean_final_accuracy
        )?;
    }
    if let Some(dir) = &args.out {
        let written = formats::save_comparison(dir, &cmp)?;
        writeln!(out, "wrote {} files under {}", written.len(), dir.display())?;
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let holdout = match &args.holdout {
        Some(p) => load_corpus(p)?.into_messages(),
        None => Vec::new(),
    };
    let config = ControllerConfig {
        capacity: args.capacity,
        activation_threshold: args.threshold,
        batch_size: args.batch_size,
        strategy: args.strategy,
        seed: args.seed,
        vectorizer: args.vectorizer.config(),
        holdout,
        ..ControllerConfig::default()
    };
    if let Err(e) = config.validate() {
        return Err(usage(e.to_string()));
    }
    let inbox = args.inbox.as_deref().map(load_corpus).transpose()?;
    let state = StateDir::new(&args.state_dir)?;
    let (controller, log) = state.open(config, inbox.as_ref())?;

    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(args.bind)
            .await
            .with_context(|| format!("binding {}", args.bind))?;
        tracing::info!("listening on http://{}", listener.local_addr()?);
        let svc = Service::start(controller, Some((state, log)));
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        };
        let c = service::serve(listener, svc, shutdown).await?;
        tracing::info!("stopped after {} log records", c.log().len());
        Ok::<_, anyhow::Error>(())
    })
    .map_err(|e| Failure::Data(anyhow!(e)))
}
