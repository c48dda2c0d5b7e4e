use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use palm::acceptance;
use palm::backend::BackendSpec;
use palm::llm::LlmConfig;
use palm::runlog::{read_records, RunLogError, StreamingLog};
use palm::service;
use palm_core::corpus::{self, EXAMPLES};
use palm_core::coverage::measure;
use palm_core::driver::{build_prompt, generate_all, verify, Domains, RunState, RunStatus, Scripted, DEFAULT_TRIAL_LIMIT};
use palm_core::extract::ExtractionConfig;
use palm_core::interp::{run_program, ExecOptions};
use palm_core::testcase::TestCase;
use palm_core::{pretty_print, Analysis};
use thiserror::Error;

#[derive(Parser)]
#[command(name = "palm", version, about = "Path-aware unit test generation for a small Java-like language")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ProgramArgs {
    /// Source file, or `example:NAME` for a built-in example.
    #[arg(long, short)]
    program: String,
    /// Entry function; defaults to the example's entry or the last function.
    #[arg(long)]
    entry: Option<String>,
    /// Additional functions whose bodies are enumerated at call sites.
    #[arg(long, value_delimiter = ',')]
    symbolic: Vec<String>,
    #[arg(long)]
    loop_bound: Option<u32>,
    #[arg(long)]
    recursion_bound: Option<u32>,
    #[arg(long)]
    max_paths: Option<usize>,
    /// Keep constant conditions instead of folding and pruning them.
    #[arg(long)]
    no_fold: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    BruteForce,
    Scripted,
    Llm,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in example programs.
    Examples,
    /// Parse and type-check a program, then print it back.
    Parse {
        #[command(flatten)]
        program: ProgramArgs,
    },
    /// List the enumerated paths.
    Paths {
        #[command(flatten)]
        program: ProgramArgs,
        #[arg(long)]
        json: bool,
    },
    /// Print the symbolic tree.
    Tree {
        #[command(flatten)]
        program: ProgramArgs,
        /// Graphviz output instead of JSON.
        #[arg(long, conflicts_with = "json")]
        dot: bool,
        #[arg(long)]
        json: bool,
    },
    /// Print the generation prompt for one path.
    Prompt {
        #[command(flatten)]
        program: ProgramArgs,
        #[arg(long)]
        path: u32,
    },
    /// Generate tests for every uncovered path and write a JSON-lines log.
    Run {
        #[command(flatten)]
        program: ProgramArgs,
        #[arg(long, value_enum, default_value = "brute-force")]
        backend: BackendKind,
        #[arg(long, default_value = "run.jsonl")]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TRIAL_LIMIT)]
        trial_limit: u32,
        /// JSON array of test literals answered in order (scripted backend).
        #[arg(long)]
        script: Option<PathBuf>,
        /// Earlier run log whose replies are played back (scripted backend).
        #[arg(long, conflicts_with = "script")]
        replay: Option<PathBuf>,
        /// JSON file with brute-force input domains.
        #[arg(long)]
        domains: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        base_url: Option<String>,
    },
    /// Check a test against one path.
    Verify {
        #[command(flatten)]
        program: ProgramArgs,
        #[arg(long)]
        path: u32,
        #[arg(long)]
        test: String,
    },
    /// Find the path a test follows.
    Locate {
        #[command(flatten)]
        program: ProgramArgs,
        #[arg(long)]
        test: String,
    },
    /// Path, branch and line coverage of a suite.
    Coverage {
        #[command(flatten)]
        program: ProgramArgs,
        /// JSON array of test literals, or a run log (its covering tests are used).
        #[arg(long)]
        tests: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run a test on the original program and print the outcome.
    Exec {
        #[command(flatten)]
        program: ProgramArgs,
        #[arg(long, visible_alias = "run-test")]
        test: String,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
    /// Run the built-in acceptance checks.
    Accept {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{0}")]
    Program(String),
    #[error(transparent)]
    RunLog(#[from] RunLogError),
    #[error("invalid JSON in {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    /// The command ran but its answer is negative (test diverged, check failed).
    #[error("")]
    Negative,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|source| CliError::Json { path: path.into(), source })
}

struct Loaded {
    analysis: Analysis,
    domains: Domains,
}

fn load(args: &ProgramArgs) -> Result<Loaded, CliError> {
    let (source, mut cfg, domains) = match args.program.strip_prefix("example:") {
        Some(name) => {
            let ex = corpus::example(name).ok_or_else(|| CliError::Usage(format!("unknown example {name}")))?;
            (ex.source.to_string(), ex.config(), ex.domains())
        }
        None => (read(Path::new(&args.program))?, ExtractionConfig::default(), Domains::default()),
    };
    let program = palm_core::parse(&source).map_err(|e| CliError::Program(format!("{}: {e}", args.program)))?;
    if let Some(e) = &args.entry {
        cfg.entry_function = e.clone();
    }
    cfg = service::resolve_entry(&program, cfg);
    cfg.symbolic_functions.extend(args.symbolic.iter().cloned());
    cfg.loop_bound = args.loop_bound.unwrap_or(cfg.loop_bound);
    cfg.recursion_bound = args.recursion_bound.unwrap_or(cfg.recursion_bound);
    cfg.max_paths = args.max_paths.unwrap_or(cfg.max_paths);
    cfg.fold &= !args.no_fold;
    let analysis = Analysis::new(program, cfg).map_err(|e| CliError::Program(e.to_string()))?;
    if analysis.extraction.truncated {
        log::warn!("stopped after {} paths; raise --max-paths to see more", analysis.paths().len());
    }
    Ok(Loaded { analysis, domains })
}

fn parse_test(a: &Analysis, text: &str) -> Result<TestCase, CliError> {
    a.parse_test(text).map_err(|e| CliError::Usage(format!("bad test `{text}`: {e}")))
}

fn print_json(v: &impl serde::Serialize) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v).map_err(io::Error::other)?;
    writeln!(out)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Negative) => ExitCode::from(1),
        Err(CliError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    let mut stdout = io::stdout().lock();
    match command {
        Command::Examples => {
            for ex in EXAMPLES {
                writeln!(stdout, "{:<12} {:<16} {}", ex.name, ex.entry, ex.description)?;
            }
        }
        Command::Parse { program } => {
            let source = match program.program.strip_prefix("example:") {
                Some(name) => corpus::example(name).ok_or_else(|| CliError::Usage(format!("unknown example {name}")))?.source.to_string(),
                None => read(Path::new(&program.program))?,
            };
            let parsed = palm_core::parse(&source).map_err(|e| CliError::Program(format!("{}: {e}", program.program)))?;
            write!(stdout, "{}", pretty_print(&parsed))?;
        }
        Command::Paths { program, json } => {
            let a = load(&program)?.analysis;
            if json {
                let docs: Vec<_> = a.paths().iter().map(|p| p.to_json()).collect();
                return print_json(&docs);
            }
            for p in a.paths() {
                let status = a.tree.status(p.id).map_or("?".into(), |s| format!("{s:?}"));
                writeln!(stdout, "// path {} [{status}]", p.id)?;
                writeln!(stdout, "{}", p.pretty(&a.program))?;
            }
        }
        Command::Tree { program, dot, .. } => {
            let a = load(&program)?.analysis;
            if dot {
                write!(stdout, "{}", a.tree.to_dot())?;
            } else {
                print_json(&a.tree.to_json())?;
            }
        }
        Command::Prompt { program, path } => {
            let a = load(&program)?.analysis;
            let v = a.path(path).ok_or_else(|| CliError::Usage(format!("unknown path {path}")))?;
            write!(stdout, "{}", build_prompt(&a, v))?;
        }
        Command::Run { program, backend, out, trial_limit, script, replay, domains, model, base_url } => {
            let loaded = load(&program)?;
            let a = loaded.analysis;
            let spec = match backend {
                BackendKind::BruteForce => BackendSpec::BruteForce {
                    domains: domains.as_deref().map(read_json).transpose()?,
                },
                BackendKind::Scripted => match (&script, &replay) {
                    (Some(s), _) => BackendSpec::Scripted { tests: read_json(s)?, repeat: None },
                    (None, Some(_)) => BackendSpec::Scripted { tests: Vec::new(), repeat: None },
                    (None, None) => return Err(CliError::Usage("the scripted backend needs --script or --replay".into())),
                },
                BackendKind::Llm => {
                    let mut config = LlmConfig::default();
                    config.model = model.unwrap_or(config.model);
                    config.base_url = base_url.unwrap_or(config.base_url);
                    BackendSpec::Llm { config }
                }
            };
            let mut generator = match &replay {
                Some(log) => Box::new(Scripted::replay(&read_records(log)?)),
                None => spec.build(&loaded.domains),
            };
            let file = fs::File::create(&out).map_err(|source| CliError::Read { path: out.clone(), source })?;
            let mut hooks = StreamingLog::new(io::BufWriter::new(file));
            let mut state = RunState::new(&a, a.tree.clone(), generator.name(), trial_limit.max(1));
            generate_all(&a, &mut state, generator.as_mut(), &mut hooks);
            if let Some(e) = hooks.error.take() {
                return Err(e.into());
            }
            for note in &state.notes {
                log::warn!("{note}");
            }
            let targets = a.tree.target_paths();
            let covered = targets.iter().filter(|&&p| state.tree.status(p) == Some(palm_core::tree::Status::Covered)).count();
            writeln!(
                stdout,
                "{:?}: {covered}/{} target paths covered in {} trials, log written to {}",
                state.status,
                targets.len(),
                state.trials.len(),
                out.display()
            )?;
            if let Some(e) = &state.error {
                return Err(CliError::Program(format!("run aborted: {e}")));
            }
            debug_assert!(state.status != RunStatus::Running);
        }
        Command::Verify { program, path, test } => {
            let a = load(&program)?.analysis;
            let mut tree = a.tree.clone();
            let record = verify(&a, &mut tree, path, &test, palm::runlog::unix_millis())
                .map_err(|e| CliError::Usage(e.to_string()))?;
            print_json(&record)?;
            if !record.verdict.is_covered() {
                return Err(CliError::Negative);
            }
        }
        Command::Locate { program, test } => {
            let a = load(&program)?.analysis;
            let located = a.locate(&parse_test(&a, &test)?);
            let mut doc = serde_json::to_value(&located).map_err(io::Error::other)?;
            // The trace is long and mostly useful through the HTTP API.
            if let Some(o) = doc["exec"].as_object_mut() {
                o.remove("trace");
            }
            print_json(&doc)?;
            if located.path_id.is_none() {
                return Err(CliError::Negative);
            }
        }
        Command::Coverage { program, tests, json } => {
            let a = load(&program)?.analysis;
            let text = read(&tests)?;
            let literals: Vec<String> = match serde_json::from_str::<Vec<String>>(&text) {
                Ok(list) => list,
                Err(_) => read_records(&tests)?
                    .into_iter()
                    .filter(|r| r.verdict.is_covered())
                    .filter_map(|r| r.test)
                    .collect(),
            };
            let suite = literals.iter().map(|t| parse_test(&a, t)).collect::<Result<Vec<_>, _>>()?;
            let report = measure(&a, &a.tree, &suite);
            if json {
                print_json(&report.to_json())?;
            } else {
                write!(stdout, "{}", report.to_table())?;
            }
        }
        Command::Exec { program, test } => {
            let a = load(&program)?.analysis;
            let result = run_program(&a.program, &parse_test(&a, &test)?, ExecOptions::default());
            let mut doc = serde_json::to_value(&result).map_err(io::Error::other)?;
            if let Some(o) = doc.as_object_mut() {
                o.remove("trace");
            }
            print_json(&doc)?;
        }
        Command::Serve { host, port } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve((host, port).into()))?;
        }
        Command::Accept { json } => {
            let results = acceptance::run_all();
            if json {
                print_json(&results)?;
            } else {
                for r in &results {
                    writeln!(stdout, "{}", r.line())?;
                }
            }
            if results.iter().any(|r| !r.passed) {
                return Err(CliError::Negative);
            }
        }
    }
    Ok(())
}
