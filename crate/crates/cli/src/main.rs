//! `peripartum`: operator commands over a journal-backed store.
//!
//! Read-only commands replay the journal without creating it; `ingest` and
//! `synth` append to it. Failures exit with the codes documented in
//! [`exit`].

mod exit;

use std::collections::BTreeMap;
use std::io::{Read as _, Write as _};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand, ValueEnum};
use peripartum_core::constraint::ViolationReport;
use peripartum_core::ingest::{run_ingestion_file, SourceConfig, SourceKind};
use peripartum_core::journal::{replay, Journal};
use peripartum_core::synth::{transactions, SynthConfig};
use peripartum_core::{build_catalog, diff, emit_ddl, full_scan, CanonicalStore};
use peripartum_nl2sql::{ExchangeStage, Model, PromptOptions, RemoteConfig, RemoteModel, Session, StubModel};
use peripartum_service::{export_sql, AppState, ModelChoice, ServiceConfig};
use peripartum_sql::exec::ResultTable;
use peripartum_sql::guardrail::Limits;
use peripartum_sql::{pipeline, stored};
use serde::Serialize;

use exit::{fail, quiet, Class};

#[derive(Debug, Parser)]
#[command(name = "peripartum", version, about = "Unified peripartum record store with natural-language querying")]
struct Cli {
    /// Journal file holding the store.
    #[arg(long, global = true, env = "PERIPARTUM_STORE")]
    store: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
    Csv,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Use the offline stub instead of a remote endpoint.
    #[arg(long)]
    stub: bool,
    /// Base URL of an OpenAI-compatible chat-completion endpoint.
    #[arg(long)]
    model_endpoint: Option<String>,
    /// Model name sent to the endpoint.
    #[arg(long, default_value = "default")]
    model: String,
    /// Seconds before a model request is abandoned.
    #[arg(long, default_value_t = 120)]
    model_timeout: u64,
    /// Add rule-derived schema notes to the context prompt.
    #[arg(long)]
    comments: bool,
}

impl ModelArgs {
    fn choice(&self) -> ModelChoice {
        match (&self.model_endpoint, self.stub) {
            (Some(url), false) => {
                let mut remote = RemoteConfig::from_env(url.clone(), self.model.clone());
                remote.timeout = Duration::from_secs(self.model_timeout);
                ModelChoice::Remote(remote)
            }
            _ => ModelChoice::Stub,
        }
    }

    fn prompt(&self) -> PromptOptions {
        PromptOptions::with_comments(self.comments)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the schema as CREATE TABLE statements.
    Ddl,
    /// Print a DDL + INSERT script that loads the store into PostgreSQL.
    Export,
    /// Ingest a legacy export into the store.
    Ingest {
        file: PathBuf,
        /// Source kind; taken from the config file when omitted.
        #[arg(long)]
        kind: Option<SourceKind>,
        /// JSON source configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Exit with status 5 when any row is quarantined.
        #[arg(long)]
        strict: bool,
        /// Report only; leave the store untouched.
        #[arg(long)]
        dry_run: bool,
        /// Write quarantined rows, with reasons, to this CSV file.
        #[arg(long)]
        quarantine_out: Option<PathBuf>,
    },
    /// Scan the whole store against every integrity rule.
    Check {
        /// Journal to check; defaults to --store.
        path: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Run a stored query.
    Query {
        /// Stored query name; `--list` shows them all.
        name: Option<String>,
        /// Parameter as key=value; repeatable.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        #[arg(long)]
        list: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long)]
        row_limit: Option<usize>,
    },
    /// Run a SELECT from a file (`-` reads stdin).
    Sql {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long, default_value_t = Limits::default().max_rows)]
        row_limit: usize,
    },
    /// Parse, guard, resolve and lint a statement without running it.
    Sqlcheck {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Translate a question to SQL and run it.
    Ask {
        question: String,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Write a synthetic store as a journal.
    Synth {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        patients: usize,
        /// Journal to create; defaults to --store.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace an existing file.
        #[arg(long)]
        force: bool,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = Limits::default().max_rows)]
        row_limit: usize,
        /// Browser origin allowed by CORS; repeatable. None allows any.
        #[arg(long = "cors-origin")]
        cors_origins: Vec<String>,
        /// Require this bearer token on every route but /health.
        #[arg(long, env = "PERIPARTUM_API_TOKEN", hide_env_values = true)]
        api_token: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(Class::Usage.code()) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let class = exit::classify(&err);
            let message = format!("{err:#}");
            if !message.is_empty() {
                eprintln!("error: {message}");
            }
            ExitCode::from(class.code())
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let store_path = cli.store;
    match cli.command {
        Command::Ddl => {
            print!("{}", emit_ddl(&build_catalog())?);
            Ok(())
        }
        Command::Export => {
            let store = load(require_store(&store_path)?)?;
            print!("{}", export_sql(&build_catalog(), &store)?);
            Ok(())
        }
        Command::Ingest { file, kind, config, strict, dry_run, quarantine_out } => {
            ingest(require_store(&store_path)?, &file, kind, config.as_deref(), strict, dry_run, quarantine_out)
        }
        Command::Check { path, format } => {
            let path = path.or(store_path).ok_or_else(|| fail(Class::Usage, "no store given (use --store or PERIPARTUM_STORE)"))?;
            check(&path, format)
        }
        Command::Query { name, params, list, format, row_limit } => {
            if list {
                return list_queries(format);
            }
            let name = name.ok_or_else(|| fail(Class::Usage, "a query name is required (see --list)"))?;
            let store = load(require_store(&store_path)?)?;
            query(&store, &name, &params, format, row_limit)
        }
        Command::Sql { file, format, row_limit } => {
            let store = load(require_store(&store_path)?)?;
            let sql = read_source(&file)?;
            let limits = Limits { max_rows: row_limit, ..Limits::default() };
            let (validated, table) = pipeline::run(&sql, &build_catalog(), &store, limits).map_err(exit::pipeline)?;
            for l in &validated.lints {
                eprintln!("warning: [{}] {}", l.rule.code(), l.message);
            }
            print_table(&table, format)
        }
        Command::Sqlcheck { file, format } => sqlcheck(&read_source(&file)?, format),
        Command::Ask { question, model, format } => {
            let store = match &store_path {
                Some(p) => load(p)?,
                None => CanonicalStore::new(),
            };
            ask(store, &question, &model, format)
        }
        Command::Synth { seed, patients, out, force } => {
            let out = out.or(store_path).ok_or_else(|| fail(Class::Usage, "no output given (use --out or --store)"))?;
            synth(seed, patients, &out, force)
        }
        Command::Serve { bind, model, row_limit, cors_origins, api_token } => {
            let store = require_store(&store_path)?.to_path_buf();
            let config = ServiceConfig {
                bind,
                store,
                model: model.choice(),
                prompt: model.prompt(),
                limits: Limits { max_rows: row_limit, ..Limits::default() },
                cors_origins,
                api_token,
            };
            serve(&config)
        }
    }
}

fn require_store(path: &Option<PathBuf>) -> anyhow::Result<&Path> {
    path.as_deref().ok_or_else(|| fail(Class::Usage, "no store given (use --store or PERIPARTUM_STORE)"))
}

/// Replays without creating the file; a missing journal is an empty store.
fn load(path: &Path) -> anyhow::Result<CanonicalStore> {
    Ok(replay(path).with_context(|| format!("loading {}", path.display()))?.store)
}

fn read_source(path: &Path) -> anyhow::Result<String> {
    if path.as_os_str() == "-" {
        let mut text = String::new();
        std::io::stdin().read_to_string(&mut text).context("reading stdin")?;
        return Ok(text);
    }
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn print_json(value: &impl Serialize) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn print_table(table: &ResultTable, format: Format) -> anyhow::Result<()> {
    match format {
        Format::Json => print_json(table),
        Format::Text => {
            print!("{}", table.to_text());
            Ok(())
        }
        Format::Csv => {
            print!("{}", table.to_csv());
            Ok(())
        }
    }
}

fn ingest(
    store_path: &Path,
    file: &Path,
    kind: Option<SourceKind>,
    config_path: Option<&Path>,
    strict: bool,
    dry_run: bool,
    quarantine_out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let config = match config_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let config: SourceConfig = serde_json::from_str(&text)
                .map_err(|e| fail(Class::Usage, format!("invalid config {}: {e}", p.display())))?;
            if let Some(k) = kind.filter(|k| *k != config.source_kind) {
                return Err(fail(Class::Usage, format!("--kind {k} contradicts the config ({})", config.source_kind)));
            }
            config
        }
        None => SourceConfig::for_kind(kind.ok_or_else(|| fail(Class::Usage, "--kind or --config is required"))?),
    };

    let (mut journal, replayed) = if dry_run {
        (None, replay(store_path)?)
    } else {
        let (j, r) = Journal::open(store_path)?;
        (Some(j), r)
    };
    let (after, report) = run_ingestion_file(file, &config, &replayed.store).map_err(|e| match e {
        peripartum_core::ingest::IngestError::Io { .. } => anyhow::Error::new(e),
        other => fail(Class::Other, other.to_string()),
    })?;
    if let Some(journal) = journal.as_mut() {
        let tx = diff(&replayed.store, &after);
        if !tx.is_empty() {
            journal.commit(&replayed.store, &tx).map_err(|e| match e {
                peripartum_core::journal::CommitError::Rejected(tx) => fail(Class::Constraint, tx.to_string()),
                peripartum_core::journal::CommitError::Journal(j) => anyhow::Error::new(j),
            })?;
        }
    }
    if let Some(out) = quarantine_out {
        std::fs::write(&out, report.quarantine_csv()).with_context(|| format!("writing {}", out.display()))?;
    }
    print_json(&report)?;
    if strict && !report.quarantined.is_empty() {
        eprintln!("error: {} row(s) quarantined", report.quarantined.len());
        return Err(quiet(Class::Constraint));
    }
    Ok(())
}

fn check(path: &Path, format: Format) -> anyhow::Result<()> {
    if !path.exists() {
        return Err(fail(Class::Io, format!("no journal at {}", path.display())));
    }
    let store = load(path)?;
    let report = ViolationReport { violations: full_scan(&store) };
    match format {
        Format::Json => print_json(&report)?,
        _ => {
            let n = report.violations.len();
            println!("{n} violation{} in {} records", if n == 1 { "" } else { "s" }, store.total_records());
            for v in &report.violations {
                println!("{v}");
            }
        }
    }
    if report.violations.is_empty() {
        Ok(())
    } else {
        Err(quiet(Class::Constraint))
    }
}

fn list_queries(format: Format) -> anyhow::Result<()> {
    if format == Format::Json {
        return print_json(&stored::STORED_QUERIES);
    }
    for q in &stored::STORED_QUERIES {
        println!("{}  {}", q.name, q.description);
        for p in q.params {
            println!("    --param {}=<{:?}>  default {}  {}", p.name, p.ty, p.default, p.description);
        }
    }
    Ok(())
}

fn query(
    store: &CanonicalStore,
    name: &str,
    params: &[String],
    format: Format,
    row_limit: Option<usize>,
) -> anyhow::Result<()> {
    let q = stored::find(name).ok_or_else(|| fail(Class::Usage, format!("no stored query named \"{name}\"")))?;
    let mut args = BTreeMap::new();
    for p in params {
        let (k, v) =
            p.split_once('=').ok_or_else(|| fail(Class::Usage, format!("parameter `{p}` is not KEY=VALUE")))?;
        args.insert(k.trim().to_string(), v.to_string());
    }
    let table = q.run(&args, &build_catalog(), store, row_limit).map_err(exit::stored)?;
    print_table(&table, format)
}

fn sqlcheck(sql: &str, format: Format) -> anyhow::Result<()> {
    let report = pipeline::check(sql, &build_catalog(), Limits::default());
    if format == Format::Json {
        print_json(&report)?;
    } else {
        let mark = |ok: Option<bool>| match ok {
            Some(true) => "ok",
            Some(false) => "FAILED",
            None => "not reached",
        };
        println!("parse:     {}", mark(report.parse.as_ref().map(|s| s.ok)));
        println!("guardrail: {}", mark(report.guardrail.as_ref().map(|v| v.accepted)));
        println!("resolve:   {}", mark(report.resolve.as_ref().map(|s| s.ok)));
        if let Some(e) = &report.error {
            println!("error:     {}", e.message);
        }
        if let Some(sql) = &report.canonical_sql {
            println!("canonical: {sql}");
        }
        for l in &report.lints {
            println!("[{}] {:?}: {}", l.rule.code(), l.severity, l.message);
        }
        if report.ok && report.lints.is_empty() {
            println!("no findings");
        }
    }
    match report.stage {
        Some(stage) => Err(quiet(Class::of_stage(stage))),
        None => Ok(()),
    }
}

fn model_from(args: &ModelArgs) -> anyhow::Result<Arc<dyn Model>> {
    Ok(match args.choice() {
        ModelChoice::Stub => Arc::new(StubModel::builtin()),
        ModelChoice::Remote(config) => Arc::new(RemoteModel::new(config)?),
    })
}

fn ask(store: CanonicalStore, question: &str, args: &ModelArgs, format: Format) -> anyhow::Result<()> {
    let session = Session::new(Arc::new(build_catalog()), store, model_from(args)?, &args.prompt(), Limits::default());
    let ex = session.answer(question);
    match format {
        Format::Json => print_json(&ex.without_timing())?,
        _ => {
            if let Some(sql) = &ex.sql {
                println!("SQL:\n{}\n", sql.trim_end());
            }
            for l in &ex.lints {
                println!("[{}] {:?}: {}", l.rule.code(), l.severity, l.message);
            }
            if let Some(table) = &ex.result {
                if format == Format::Csv {
                    print!("{}", table.to_csv());
                } else {
                    print!("{}", table.to_text());
                }
            }
        }
    }
    match &ex.error {
        None => Ok(()),
        Some(e) => {
            let class = match e.stage {
                ExchangeStage::Parse => Class::Parse,
                ExchangeStage::Resolve => Class::Resolve,
                ExchangeStage::Guardrail => Class::Guardrail,
                ExchangeStage::Translate | ExchangeStage::Execute => Class::Other,
            };
            Err(fail(class, e.message.clone()))
        }
    }
}

fn synth(seed: u64, patients: usize, out: &Path, force: bool) -> anyhow::Result<()> {
    if out.exists() {
        if !force {
            return Err(fail(Class::Io, format!("{} exists (use --force to replace it)", out.display())));
        }
        std::fs::remove_file(out).with_context(|| format!("removing {}", out.display()))?;
    }
    let txs = transactions(&SynthConfig::new(seed, patients)).map_err(|e| fail(Class::Usage, e.to_string()))?;
    let (mut journal, replayed) = Journal::open(out)?;
    let mut store = replayed.store;
    for tx in &txs {
        store = journal.commit(&store, tx).map_err(|e| fail(Class::Constraint, e.to_string()))?;
    }
    eprintln!(
        "wrote {} transactions, {} records, to {}",
        journal.last_seq(),
        store.total_records(),
        out.display()
    );
    Ok(())
}

fn serve(config: &ServiceConfig) -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    // Built outside the runtime: the remote model owns a blocking client.
    let state = AppState::open(config).map_err(|e| match e {
        peripartum_service::ServiceError::Journal(j) => anyhow::Error::new(j).context("refusing to start"),
        other => fail(Class::Other, other.to_string()),
    })?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(peripartum_service::serve(state.clone(), config))?;
    drop(runtime);
    Ok(())
}
