mod repl;

use std::io::{self, BufReader, IsTerminal, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use runtimesearch::bench::{run_benchmark, Workload, DEFAULT_RUNS, STANDARD_ITERATIONS};
use runtimesearch::bytecode::{disassemble, ProgramImage, SiteId};
use runtimesearch::instrument::{instrument, ScopePattern};
use runtimesearch::lang::{build, SourceUnit};
use runtimesearch::protocol::{serve, DEFAULT_PORT};
use runtimesearch::search::{DebugSession, SessionConfig};
use runtimesearch::vm::{Control, ExecHooks, InputFixture, Stop, Vm};

use repl::{LineMailbox, Printer, QueryFlags};

const EXIT_COMPILE: u8 = 1;
const EXIT_FAULT: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "runtimesearch",
    version,
    about = "Search string values in a running MiniLang program"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Program {
    /// MiniLang source files; together they must define `main`.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// File whose lines feed `readline()`.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct Scope {
    /// Which functions get capture points, as `unit.function` globs
    /// separated by commas.
    #[arg(long, default_value = "*")]
    scope: String,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a program without a debugger.
    Run {
        #[command(flatten)]
        program: Program,
    },
    /// Debug a program from the terminal or a command script.
    Debug {
        #[command(flatten)]
        program: Program,
        #[command(flatten)]
        scope: Scope,
        /// Read debugger commands from this file instead of stdin.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        ignore_case: bool,
        #[arg(long)]
        regex: bool,
        /// Don't pause at the same site twice in a row.
        #[arg(long)]
        skip_repeats: bool,
    },
    /// Serve a debug session over TCP (NDJSON or WebSocket).
    Serve {
        #[command(flatten)]
        program: Program,
        #[command(flatten)]
        scope: Scope,
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Print the bytecode, instrumented when `--scope` is given.
    Disasm {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        scope: Option<String>,
    },
    /// Measure capture overhead on the standard workload.
    Bench {
        #[arg(long, default_value_t = DEFAULT_RUNS)]
        runs: usize,
        #[arg(long, default_value_t = STANDARD_ITERATIONS)]
        iterations: u64,
        #[arg(long)]
        json: bool,
    },
}

/// Errors that map to a specific exit status.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Compile(String),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Compile(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for Failure {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Failure>() {
                Some(Failure::Usage(_)) => ExitCode::from(EXIT_USAGE),
                Some(Failure::Compile(_)) => ExitCode::from(EXIT_COMPILE),
                None => ExitCode::FAILURE,
            }
        }
    }
}

fn dispatch(cmd: Cmd) -> anyhow::Result<ExitCode> {
    match cmd {
        Cmd::Run { program } => run(&program),
        Cmd::Debug {
            program,
            scope,
            script,
            ignore_case,
            regex,
            skip_repeats,
        } => {
            let flags = QueryFlags {
                ignore_case,
                regex,
                skip_repeats,
            };
            debug(&program, &scope, script, flags)
        }
        Cmd::Serve {
            program,
            scope,
            port,
            host,
        } => {
            let (image, units) = load_instrumented(&program.files, &scope.scope)?;
            let config = session_config(&program)?;
            let listener = TcpListener::bind((host.as_str(), port))
                .with_context(|| format!("cannot listen on {host}:{port}"))?;
            eprintln!("listening on {}", listener.local_addr()?);
            serve(listener, image, units, config)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Disasm { files, scope } => {
            let (units, plain) = load(&files)?;
            drop(units);
            let image = match scope {
                Some(s) => instrument(&plain, &parse_scope(&s)?)?,
                None => plain,
            };
            print!("{}", disassemble(&image));
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Bench {
            runs,
            iterations,
            json,
        } => {
            if runs == 0 {
                return Err(Failure::Usage("--runs must be at least 1".into()).into());
            }
            let report = run_benchmark(&Workload::standard(iterations), runs)?;
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_text());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load(files: &[PathBuf]) -> anyhow::Result<(Vec<SourceUnit>, ProgramImage)> {
    let mut units = Vec::new();
    for path in files {
        let unit = SourceUnit::read(path)
            .with_context(|| format!("cannot read {}", path.display()))?
            .map_err(|e| Failure::Compile(format!("{}: {e}", path.display())))?;
        units.push(unit);
    }
    let image = build(&units).map_err(|e| {
        let names: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
        Failure::Compile(format!("{}: {e}", names.join(", ")))
    })?;
    Ok((units, image))
}

fn parse_scope(text: &str) -> anyhow::Result<ScopePattern> {
    ScopePattern::parse(text).map_err(|e| Failure::Usage(format!("--scope `{text}`: {e}")).into())
}

fn load_instrumented(
    files: &[PathBuf],
    scope: &str,
) -> anyhow::Result<(Arc<ProgramImage>, Vec<SourceUnit>)> {
    let scope = parse_scope(scope)?;
    let (units, plain) = load(files)?;
    Ok((Arc::new(instrument(&plain, &scope)?), units))
}

fn input_fixture(path: &Option<PathBuf>) -> anyhow::Result<InputFixture> {
    match path {
        None => Ok(InputFixture::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read input {}", p.display()))?;
            Ok(InputFixture::from_text(&text))
        }
    }
}

fn session_config(program: &Program) -> anyhow::Result<SessionConfig> {
    Ok(SessionConfig {
        input: input_fixture(&program.input)?,
        ..SessionConfig::default()
    })
}

struct Stdout(io::Stdout);

impl ExecHooks for Stdout {
    fn capture(&mut self, _: SiteId, _: &str) -> Control {
        Control::Continue
    }
    fn poll(&mut self) -> Control {
        Control::Continue
    }
    fn output(&mut self, text: &str) {
        let _ = self.0.write_all(text.as_bytes());
    }
}

fn run(program: &Program) -> anyhow::Result<ExitCode> {
    let (_, image) = load(&program.files)?;
    let mut vm = Vm::new(Arc::new(image), input_fixture(&program.input)?)?;
    let mut out = Stdout(io::stdout());
    let stop = vm.run(&mut out)?;
    let _ = out.0.flush();
    match stop {
        Stop::Finished => Ok(ExitCode::SUCCESS),
        Stop::Fault(f) => {
            eprintln!("runtime fault: {f}");
            Ok(ExitCode::from(EXIT_FAULT))
        }
        other => bail!("program stopped unexpectedly: {other:?}"),
    }
}

fn debug(
    program: &Program,
    scope: &Scope,
    script: Option<PathBuf>,
    flags: QueryFlags,
) -> anyhow::Result<ExitCode> {
    let (image, units) = load_instrumented(&program.files, &scope.scope)?;
    let mut session = DebugSession::new(image, units, session_config(program)?);
    let mut printer = Printer { out: io::stdout() };
    match script {
        Some(path) => {
            let file = std::fs::File::open(&path)
                .with_context(|| format!("cannot read script {}", path.display()))?;
            let mut mb = LineMailbox::new(BufReader::new(file), io::stdout(), true, flags);
            session.run(&mut mb, &mut printer);
        }
        None => {
            let stdin = io::stdin();
            let echo = !stdin.is_terminal();
            if !echo {
                eprintln!("{}", repl::HELP);
            }
            let mut mb = LineMailbox::new(stdin.lock(), io::stdout(), echo, flags);
            session.run(&mut mb, &mut printer);
        }
    }
    Ok(ExitCode::SUCCESS)
}
