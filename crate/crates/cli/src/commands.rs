//! Subcommands. Each returns the process exit code.

use crate::dialogue::{parse_utterances, render_transcript};
use crate::packs::{load_pack_file, malformed, PackRegistry, PackState};
use crate::server::{router, AppState};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use tutorloop_core::replay::replay_events;
use tutorloop_core::session::NullSink;
use tutorloop_core::store::read_log_file;
use tutorloop_core::{
    ContentPack, EchoGenerator, Engine, EngineConfig, EventStore, FileEventStore, Fixtures, Generator, HttpGenerator,
    MemoryEventStore, Mode, ScriptedGenerator, Session, SteppingClock, StoreError, Strictness,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tutorloop", version, about = "Expectation/misconception tutoring engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Start the HTTP service.
    Serve(ServeArgs),
    /// Validate a content pack and print the report.
    Validate {
        pack: PathBuf,
        /// Warn on unknown fields instead of rejecting them.
        #[arg(long)]
        lenient: bool,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run an offline session with the template backend and print the transcript.
    Simulate {
        pack: PathBuf,
        utterances: PathBuf,
        /// Also write the session's event log here.
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::Tutoring)]
        mode: ModeArg,
        #[arg(long, default_value = "sim")]
        session_id: String,
    },
    /// Rebuild a session from its event log and check it against a fresh run.
    Replay {
        log: PathBuf,
        /// Accept a log whose final line was torn by a crash.
        #[arg(long)]
        allow_truncated: bool,
    },
    /// Print the LCC table for a transcript using the lexical matcher.
    Score { pack: PathBuf, transcript: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Assessment,
    Tutoring,
    Vicarious,
    Gaming,
    TeachableAgent,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Assessment => Mode::Assessment,
            ModeArg::Tutoring => Mode::Tutoring,
            ModeArg::Vicarious => Mode::Vicarious,
            ModeArg::Gaming => Mode::Gaming,
            ModeArg::TeachableAgent => Mode::TeachableAgent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Http,
    Scripted,
    Echo,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// TOML engine config (thresholds, mode bands, backend settings).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = BackendArg::Scripted)]
    pub backend: BackendArg,
    /// Fixture file for the scripted backend. Without it, replies are rendered from templates.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    #[arg(long, default_value = "packs")]
    pub packs: PathBuf,
    #[arg(long, default_value = "events")]
    pub events: PathBuf,
    /// Overrides the chat completions base URL from the config.
    #[arg(long)]
    pub base_url: Option<String>,
    /// Overrides the model name from the config.
    #[arg(long)]
    pub model: Option<String>,
}

pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Serve(args) => serve(args),
        Command::Validate { pack, lenient, json } => validate(&pack, lenient, json),
        Command::Simulate { pack, utterances, events, mode, session_id } => {
            simulate(&pack, &utterances, events.as_deref(), mode.into(), &session_id)
        }
        Command::Replay { log, allow_truncated } => replay(&log, allow_truncated),
        Command::Score { pack, transcript } => score(&pack, &transcript),
    }
}

fn io_fail(path: &Path, e: impl std::fmt::Display) -> i32 {
    eprintln!("error: {}: {e}", path.display());
    EXIT_IO
}

fn validate(path: &Path, lenient: bool, json: bool) -> i32 {
    let strictness = if lenient { Strictness::Lenient } else { Strictness::Strict };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return io_fail(path, e),
    };
    let report = match ContentPack::from_json_str(&text, strictness) {
        Ok(loaded) => loaded.report,
        Err(e) => malformed(path, &e),
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        println!("{report}");
    }
    if report.ok {
        EXIT_OK
    } else {
        EXIT_FAILED
    }
}

/// Loads a pack for offline commands, printing the report on failure.
fn offline_pack(path: &Path) -> Result<ContentPack, i32> {
    match load_pack_file(path, Strictness::Strict) {
        Ok(PackState::Valid(p)) => Ok(*p),
        Ok(PackState::Invalid(report)) => {
            eprintln!("{report}");
            Err(EXIT_FAILED)
        }
        Err(e) => Err(io_fail(path, e)),
    }
}

fn read_inputs(path: &Path) -> Result<Vec<tutorloop_core::TurnInput>, i32> {
    let text = std::fs::read_to_string(path).map_err(|e| io_fail(path, e))?;
    parse_utterances(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_USAGE
    })
}

/// The deterministic engine used by `simulate` and `score`.
pub fn offline_engine() -> Engine {
    Engine::new(Arc::new(ScriptedGenerator::templates()), EngineConfig::default())
        .with_clock(Arc::new(SteppingClock::default()))
}

/// Runs every input through a fresh session. Refused turns (bad assessment
/// data) stop the run.
pub fn run_offline(
    engine: &Engine,
    pack: ContentPack,
    inputs: Vec<tutorloop_core::TurnInput>,
    mode: Mode,
    session_id: &str,
    store: &MemoryEventStore,
) -> Result<Session, tutorloop_core::EngineError> {
    let mut session = engine.create_session(session_id, pack, mode, store)?;
    for input in inputs {
        engine.run_turn(&mut session, input, store)?;
    }
    Ok(session)
}

fn simulate(pack: &Path, utterances: &Path, events: Option<&Path>, mode: Mode, session_id: &str) -> i32 {
    let pack = match offline_pack(pack) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let inputs = match read_inputs(utterances) {
        Ok(i) => i,
        Err(code) => return code,
    };
    let store = MemoryEventStore::new();
    let session = match run_offline(&offline_engine(), pack, inputs, mode, session_id, &store) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILED;
        }
    };
    print!("{}", render_transcript(&session));
    if let Some(path) = events {
        let log: String = match store.load_events(session_id) {
            Ok(l) => l.events.iter().map(|e| e.to_line() + "\n").collect(),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_FAILED;
            }
        };
        if let Err(e) = std::fs::write(path, log) {
            return io_fail(path, e);
        }
    }
    EXIT_OK
}

fn replay(path: &Path, allow_truncated: bool) -> i32 {
    let log = match read_log_file(path) {
        Ok(l) => l,
        Err(StoreError::Io { source, .. }) => return io_fail(path, source),
        Err(e) => {
            eprintln!("corrupt log: {e}");
            return EXIT_FAILED;
        }
    };
    for w in &log.warnings {
        eprintln!("warning: {w}");
    }
    let (session, report) = match replay_events(&log.events) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("replay failed: {e}");
            return EXIT_FAILED;
        }
    };
    println!(
        "session {}: {} events, {} turns, status {}, overall {:.6}",
        session.session_id,
        report.events,
        report.turns,
        session.status(),
        session.score_state.overall
    );
    println!("responses {}", if report.rerendered { "re-rendered from templates" } else { "taken from the log" });
    for d in &report.divergences {
        println!("divergence: {d}");
    }
    if !report.ok() {
        println!("FAIL: replay diverges from the log");
        EXIT_FAILED
    } else if !log.warnings.is_empty() && !allow_truncated {
        println!("FAIL: log has a torn final line (use --allow-truncated to accept)");
        EXIT_FAILED
    } else {
        println!("OK");
        EXIT_OK
    }
}

fn score(pack: &Path, transcript: &Path) -> i32 {
    let pack = match offline_pack(pack) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let inputs = match read_inputs(transcript) {
        Ok(i) => i,
        Err(code) => return code,
    };
    let engine = offline_engine();
    let mut session = match engine.create_session("score", pack, Mode::Tutoring, &NullSink) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILED;
        }
    };
    for input in inputs {
        if let Err(e) = engine.run_turn(&mut session, input, &NullSink) {
            eprintln!("error: {e}");
            return EXIT_FAILED;
        }
    }
    print!("{}", session.lcc_csv());
    EXIT_OK
}

fn build_generator(args: &ServeArgs, config: &EngineConfig) -> Result<Arc<dyn Generator>, String> {
    Ok(match args.backend {
        BackendArg::Echo => Arc::new(EchoGenerator),
        BackendArg::Scripted => match &args.fixtures {
            None => Arc::new(ScriptedGenerator::templates()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                let fixtures = Fixtures::from_json_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
                Arc::new(ScriptedGenerator::from_fixtures(fixtures))
            }
        },
        BackendArg::Http => {
            let mut cfg = config.backend.clone();
            if let Some(url) = &args.base_url {
                cfg.base_url = url.clone();
            }
            if let Some(model) = &args.model {
                cfg.model_name = model.clone();
            }
            Arc::new(HttpGenerator::new(cfg).map_err(|e| e.to_string())?)
        }
    })
}

fn serve(args: ServeArgs) -> i32 {
    let config = match &args.config {
        Some(path) => match EngineConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        },
        None => EngineConfig::default(),
    };
    let generator = match build_generator(&args, &config) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_IO;
        }
    };
    let packs = match PackRegistry::load_dir(&args.packs) {
        Ok(p) => p,
        Err(e) => return io_fail(&args.packs, e),
    };
    for entry in packs.iter() {
        if let PackState::Invalid(report) = &entry.state {
            tracing::warn!(pack = %entry.id, "invalid pack:\n{report}");
        }
    }
    let store = match FileEventStore::open(&args.events) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_IO;
        }
    };
    let state = Arc::new(AppState::new(Engine::new(generator, config), packs, Arc::new(store)));
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_IO;
        }
    };
    runtime.block_on(async move {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = match tokio::net::TcpListener::bind(&addr).await {
            Ok(l) => l,
            Err(e) => {
                eprintln!("error: cannot bind {addr}: {e}");
                return EXIT_IO;
            }
        };
        tracing::info!("listening on {addr}");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        match axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_IO
            }
        }
    })
}
