//! The debug session: a state machine that owns the VM and the search
//! controller, takes commands from a [`Mailbox`] and reports through an
//! [`Outbound`].
//!
//! Commands are handled one at a time. While the program is idle (not
//! started, paused or terminated) the session blocks on [`Mailbox::wait`].
//! While it runs, the VM polls the mailbox at its control points and the
//! commands that make sense mid-run (`find`, `pause`, `stop`, `source`) are
//! applied there; everything else is answered with a `bad_state` error. Every
//! command gets exactly one response, and that response is sent before any
//! event the command causes.

use std::collections::VecDeque;
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;

use serde::{Deserialize, Serialize};

use super::controller::{CaptureEvent, SearchController, SessionState, Verdict};
use super::query::{Query, QueryError};
use crate::bytecode::{CaptureKind, ProgramImage, SiteId};
use crate::lang::SourceUnit;
use crate::vm::{
    Control, ExecHooks, FrameInfo, InputFixture, PauseCause, RunMode, Stop, Vm, VmError,
    DEFAULT_POLL_INTERVAL,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Launch { stop_on_entry: bool },
    Find(Query),
    FindNext,
    Continue,
    StepIn,
    StepOver,
    StepOut,
    Pause,
    StackTrace,
    Variables { frame: usize },
    Source,
    Stop,
}

impl Command {
    /// Wire name of the command.
    pub fn name(&self) -> &'static str {
        match self {
            Command::Launch { .. } => "launch",
            Command::Find(_) => "find",
            Command::FindNext => "findNext",
            Command::Continue => "continue",
            Command::StepIn => "stepIn",
            Command::StepOver => "stepOver",
            Command::StepOut => "stepOut",
            Command::Pause => "pause",
            Command::StackTrace => "stackTrace",
            Command::Variables { .. } => "variables",
            Command::Source => "source",
            Command::Stop => "stop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CommandError {
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("no frame {0}")]
    NoSuchFrame(usize),
    #[error("program is not paused")]
    NotPaused,
    #[error("program is not running")]
    NotRunning,
    #[error("program is already launched")]
    AlreadyStarted,
    #[error("no active query")]
    NoActiveQuery,
    #[error("session is over")]
    SessionOver,
}

impl CommandError {
    pub fn code(&self) -> &'static str {
        match self {
            CommandError::BadRequest(_) | CommandError::Query(_) | CommandError::NoSuchFrame(_) => {
                "bad_request"
            }
            _ => "bad_state",
        }
    }
}

/// A command as it arrives, with the request id to echo. `command` holds the
/// parse error when the request was malformed, so that the error response
/// keeps its place in the reply order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub id: Option<u64>,
    pub name: String,
    pub command: Result<Command, CommandError>,
}

impl Envelope {
    pub fn new(id: u64, command: Command) -> Self {
        Envelope {
            id: Some(id),
            name: command.name().to_string(),
            command: Ok(command),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reply {
    Ack,
    StackTrace(Vec<FrameInfo>),
    Variables(Vec<Variable>),
    Source(Vec<SourceUnit>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub id: Option<u64>,
    pub command: String,
    pub result: Result<Reply, CommandError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    Entry,
    Match,
    Step,
    Fault,
    /// Paused on request.
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SiteInfo {
    pub id: SiteId,
    pub function: String,
    pub unit: String,
    pub line: u32,
    pub kind: CaptureKind,
    pub instr_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StopInfo {
    pub reason: StopReason,
    pub function: String,
    pub unit: String,
    pub line: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<SiteInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminateReason {
    /// The program ran to completion.
    Exited,
    Stopped,
    /// Execution was resumed after a runtime fault.
    Fault,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Stopped(StopInfo),
    Output(String),
    Terminated(TerminateReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outgoing {
    Response(Response),
    Event(Event),
}

/// The sending side of a mailbox has gone away.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Disconnected;

pub trait Mailbox {
    /// A command that is already waiting, if any. Never blocks.
    fn poll(&mut self) -> Result<Option<Envelope>, Disconnected>;
    /// Blocks until a command arrives. `None` means the client is gone.
    fn wait(&mut self) -> Option<Envelope>;
}

pub trait Outbound {
    fn send(&mut self, msg: Outgoing);
}

impl Mailbox for mpsc::Receiver<Envelope> {
    fn poll(&mut self) -> Result<Option<Envelope>, Disconnected> {
        match self.try_recv() {
            Ok(env) => Ok(Some(env)),
            Err(mpsc::TryRecvError::Empty) => Ok(None),
            Err(mpsc::TryRecvError::Disconnected) => Err(Disconnected),
        }
    }

    fn wait(&mut self) -> Option<Envelope> {
        self.recv().ok()
    }
}

impl Outbound for Vec<Outgoing> {
    fn send(&mut self, msg: Outgoing) {
        self.push(msg);
    }
}

impl Outbound for mpsc::Sender<Outgoing> {
    fn send(&mut self, msg: Outgoing) {
        // a vanished client is noticed on the mailbox side
        let _ = mpsc::Sender::send(self, msg);
    }
}

/// Fixed list of commands, handed out only while the session is idle, so a
/// script sees the same pauses on every run.
#[derive(Debug, Default)]
pub struct ScriptMailbox {
    commands: VecDeque<Envelope>,
}

impl ScriptMailbox {
    pub fn new(commands: impl IntoIterator<Item = Command>) -> Self {
        ScriptMailbox {
            commands: commands
                .into_iter()
                .enumerate()
                .map(|(i, c)| Envelope::new(i as u64 + 1, c))
                .collect(),
        }
    }
}

impl Mailbox for ScriptMailbox {
    fn poll(&mut self) -> Result<Option<Envelope>, Disconnected> {
        Ok(None)
    }

    fn wait(&mut self) -> Option<Envelope> {
        self.commands.pop_front()
    }
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub input: InputFixture,
    pub poll_interval: u32,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            input: InputFixture::default(),
            poll_interval: DEFAULT_POLL_INTERVAL,
        }
    }
}

enum Action {
    None,
    Launch { stop_on_entry: bool },
    Resume(RunMode),
    Halt,
}

pub struct DebugSession {
    image: Arc<ProgramImage>,
    sources: Vec<SourceUnit>,
    config: SessionConfig,
    vm: Option<Vm>,
    ctl: SearchController,
    state: SessionState,
}

impl DebugSession {
    /// `image` should be instrumented; an uninstrumented image runs fine but
    /// never matches.
    pub fn new(image: Arc<ProgramImage>, sources: Vec<SourceUnit>, config: SessionConfig) -> Self {
        DebugSession {
            image,
            sources,
            config,
            vm: None,
            ctl: SearchController::new(),
            state: SessionState::NotStarted,
        }
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn controller(&self) -> &SearchController {
        &self.ctl
    }

    /// Serves commands until the mailbox closes. A session that is still
    /// live at that point is stopped.
    pub fn run<M: Mailbox, O: Outbound>(&mut self, mailbox: &mut M, out: &mut O) {
        while let Some(env) = mailbox.wait() {
            self.handle(env, mailbox, out);
        }
        if self.state != SessionState::Terminated {
            self.terminate(TerminateReason::Stopped, out);
        }
    }

    /// Handles one command received while idle.
    pub fn handle<M: Mailbox, O: Outbound>(&mut self, env: Envelope, mailbox: &mut M, out: &mut O) {
        let Envelope { id, name, command } = env;
        let planned = command.and_then(|c| self.plan(c));
        let (result, action) = match planned {
            Ok((reply, action)) => (Ok(reply), action),
            Err(e) => (Err(e), Action::None),
        };
        out.send(Outgoing::Response(Response {
            id,
            command: name,
            result,
        }));
        match action {
            Action::None => {}
            Action::Launch { stop_on_entry } => self.launch(stop_on_entry, mailbox, out),
            Action::Resume(mode) => self.resume(mode, mailbox, out),
            Action::Halt => self.terminate(TerminateReason::Stopped, out),
        }
    }

    /// Validates a command against the current state and applies its effect
    /// on the controller. Execution, if any, is left to the returned action.
    fn plan(&mut self, command: Command) -> Result<(Reply, Action), CommandError> {
        use SessionState::*;
        let state = self.state;
        let idle_guard = || match state {
            Terminated => Err(CommandError::SessionOver),
            NotStarted => Err(CommandError::NotPaused),
            _ => Ok(()),
        };
        let ack = |action| Ok((Reply::Ack, action));
        match command {
            Command::Source => Ok((Reply::Source(self.sources.clone()), Action::None)),
            Command::Launch { stop_on_entry } => match state {
                NotStarted => ack(Action::Launch { stop_on_entry }),
                Terminated => Err(CommandError::SessionOver),
                _ => Err(CommandError::AlreadyStarted),
            },
            Command::Find(query) => {
                if state == Terminated {
                    return Err(CommandError::SessionOver);
                }
                self.ctl.set_query(query.compile()?);
                if state == NotStarted {
                    ack(Action::Launch {
                        stop_on_entry: false,
                    })
                } else {
                    ack(Action::Resume(RunMode::Continue))
                }
            }
            Command::FindNext => {
                if state == Terminated {
                    return Err(CommandError::SessionOver);
                }
                if self.ctl.query().is_none() {
                    return Err(CommandError::NoActiveQuery);
                }
                idle_guard()?;
                self.ctl.resume_search();
                ack(Action::Resume(RunMode::Continue))
            }
            Command::Continue => {
                idle_guard()?;
                self.ctl.suspend();
                ack(Action::Resume(RunMode::Continue))
            }
            Command::StepIn | Command::StepOver | Command::StepOut => {
                idle_guard()?;
                let mode = match command {
                    Command::StepIn => RunMode::StepIn,
                    Command::StepOver => RunMode::StepOver,
                    _ => RunMode::StepOut,
                };
                ack(Action::Resume(mode))
            }
            Command::Pause => match state {
                Terminated => Err(CommandError::SessionOver),
                _ => Err(CommandError::NotRunning),
            },
            Command::StackTrace => {
                idle_guard()?;
                let frames = self.snapshot()?;
                Ok((Reply::StackTrace(frames), Action::None))
            }
            Command::Variables { frame } => {
                idle_guard()?;
                let frames = self.snapshot()?;
                let info = frames
                    .into_iter()
                    .nth(frame)
                    .ok_or(CommandError::NoSuchFrame(frame))?;
                let vars = info
                    .locals
                    .into_iter()
                    .map(|(name, value)| Variable { name, value })
                    .collect();
                Ok((Reply::Variables(vars), Action::None))
            }
            Command::Stop => match state {
                Terminated => Err(CommandError::SessionOver),
                _ => ack(Action::Halt),
            },
        }
    }

    fn snapshot(&self) -> Result<Vec<FrameInfo>, CommandError> {
        self.vm
            .as_ref()
            .ok_or(CommandError::NotPaused)?
            .snapshot_stack()
            .map_err(|_| CommandError::NotPaused)
    }

    fn launch<M: Mailbox, O: Outbound>(
        &mut self,
        stop_on_entry: bool,
        mailbox: &mut M,
        out: &mut O,
    ) {
        let input = std::mem::take(&mut self.config.input);
        let vm = match Vm::new(Arc::clone(&self.image), input) {
            Ok(vm) => vm.with_poll_interval(self.config.poll_interval),
            Err(_) => {
                // images from the compiler always have an entry point
                self.terminate(TerminateReason::Fault, out);
                return;
            }
        };
        self.vm = Some(vm);
        if stop_on_entry {
            let vm = self.vm.as_mut().expect("just launched");
            vm.pause_at_entry().expect("fresh VM");
            self.state = SessionState::PausedAtStep;
            let info = self.stop_info(StopReason::Entry);
            out.send(Outgoing::Event(Event::Stopped(info)));
        } else {
            self.resume(RunMode::Continue, mailbox, out);
        }
    }

    fn resume<M: Mailbox, O: Outbound>(&mut self, mode: RunMode, mailbox: &mut M, out: &mut O) {
        let vm = self.vm.as_mut().expect("resume needs a launched program");
        self.state = SessionState::Running;
        let mut hooks = RunHooks {
            ctl: &mut self.ctl,
            image: &self.image,
            sources: &self.sources,
            mailbox,
            out,
            matched: None,
        };
        let result = vm.resume(mode, &mut hooks);
        let matched = hooks.matched.take();
        match result {
            Ok(Stop::Finished) => self.terminate(TerminateReason::Exited, out),
            Ok(Stop::Halted) => self.terminate(TerminateReason::Stopped, out),
            Ok(Stop::Paused(PauseCause::Capture(site))) => {
                self.state = SessionState::PausedAtMatch;
                let mut info = self.stop_info(StopReason::Match);
                let s = &self.image.capture_sites[site as usize];
                info.site = Some(SiteInfo {
                    id: s.id,
                    function: s.function.clone(),
                    unit: s.unit.clone(),
                    line: s.line,
                    kind: s.kind,
                    instr_index: s.instr_index,
                });
                info.value = matched;
                info.match_count = Some(self.ctl.match_count());
                out.send(Outgoing::Event(Event::Stopped(info)));
            }
            Ok(Stop::Paused(cause)) => {
                self.state = SessionState::PausedAtStep;
                let reason = if cause == PauseCause::Step {
                    StopReason::Step
                } else {
                    StopReason::Stopped
                };
                let info = self.stop_info(reason);
                out.send(Outgoing::Event(Event::Stopped(info)));
            }
            Ok(Stop::Fault(fault)) => {
                self.state = SessionState::PausedAtStep;
                let mut info = self.stop_info(StopReason::Fault);
                info.message = Some(fault.kind.to_string());
                out.send(Outgoing::Event(Event::Stopped(info)));
            }
            Err(VmError::Faulted(_)) => self.terminate(TerminateReason::Fault, out),
            Err(_) => self.terminate(TerminateReason::Stopped, out),
        }
    }

    fn stop_info(&self, reason: StopReason) -> StopInfo {
        let vm = self.vm.as_ref().expect("stopped program");
        let (function, unit) = vm
            .frames()
            .last()
            .map(|f| {
                let func = self.image.function(f.func);
                (func.name.clone(), func.unit.clone())
            })
            .unwrap_or_default();
        StopInfo {
            reason,
            function,
            unit,
            line: vm.frame_line(0).unwrap_or(0),
            site: None,
            value: None,
            match_count: None,
            message: None,
        }
    }

    fn terminate<O: Outbound>(&mut self, reason: TerminateReason, out: &mut O) {
        self.vm = None;
        self.ctl.suspend();
        self.state = SessionState::Terminated;
        out.send(Outgoing::Event(Event::Terminated(reason)));
    }
}

/// VM hooks used while the session runs.
struct RunHooks<'a, M, O> {
    ctl: &'a mut SearchController,
    image: &'a ProgramImage,
    sources: &'a [SourceUnit],
    mailbox: &'a mut M,
    out: &'a mut O,
    matched: Option<String>,
}

impl<M: Mailbox, O: Outbound> RunHooks<'_, M, O> {
    fn respond(&mut self, env: &Envelope, result: Result<Reply, CommandError>) {
        self.out.send(Outgoing::Response(Response {
            id: env.id,
            command: env.name.clone(),
            result,
        }));
    }
}

impl<M: Mailbox, O: Outbound> ExecHooks for RunHooks<'_, M, O> {
    #[inline]
    fn capture(&mut self, site: SiteId, value: &str) -> Control {
        if !self.ctl.searching() {
            return Control::Continue;
        }
        let sequence_no = self.ctl.next_sequence();
        let event = CaptureEvent {
            site: &self.image.capture_sites[site as usize],
            value,
            sequence_no,
        };
        match self.ctl.on_capture(&event) {
            Verdict::Continue => Control::Continue,
            Verdict::PauseAtMatch => {
                self.matched = Some(value.to_string());
                Control::Pause
            }
        }
    }

    #[inline]
    fn poll(&mut self) -> Control {
        loop {
            let env = match self.mailbox.poll() {
                Ok(Some(env)) => env,
                Ok(None) => return Control::Continue,
                // nobody is left to see the program, so stop it
                Err(Disconnected) => return Control::Halt,
            };
            let command = match &env.command {
                Ok(c) => c.clone(),
                Err(e) => {
                    let e = e.clone();
                    self.respond(&env, Err(e));
                    continue;
                }
            };
            match command {
                Command::Find(query) => match query.compile() {
                    Ok(q) => {
                        self.ctl.set_query(q);
                        self.respond(&env, Ok(Reply::Ack));
                    }
                    Err(e) => self.respond(&env, Err(e.into())),
                },
                Command::Pause => {
                    self.respond(&env, Ok(Reply::Ack));
                    return Control::Pause;
                }
                Command::Stop => {
                    self.respond(&env, Ok(Reply::Ack));
                    return Control::Halt;
                }
                Command::Source => {
                    let sources = self.sources.to_vec();
                    self.respond(&env, Ok(Reply::Source(sources)));
                }
                Command::Launch { .. } => self.respond(&env, Err(CommandError::AlreadyStarted)),
                _ => self.respond(&env, Err(CommandError::NotPaused)),
            }
        }
    }

    fn output(&mut self, text: &str) {
        self.out
            .send(Outgoing::Event(Event::Output(text.to_string())));
    }
}

/// A session running on its own thread.
pub struct SessionHandle {
    pub commands: mpsc::Sender<Envelope>,
    pub events: mpsc::Receiver<Outgoing>,
    pub thread: thread::JoinHandle<()>,
}

/// Starts a session on a new thread. The VM holds non-`Send` values, so it is
/// created there and never leaves. Dropping `commands` ends the session.
pub fn spawn_session(
    image: Arc<ProgramImage>,
    sources: Vec<SourceUnit>,
    config: SessionConfig,
) -> SessionHandle {
    let (cmd_tx, mut cmd_rx) = mpsc::channel::<Envelope>();
    let (mut out_tx, out_rx) = mpsc::channel::<Outgoing>();
    let thread = thread::Builder::new()
        .name("debug-session".into())
        .spawn(move || {
            let mut session = DebugSession::new(image, sources, config);
            session.run(&mut cmd_rx, &mut out_tx);
        })
        .expect("spawn session thread");
    SessionHandle {
        commands: cmd_tx,
        events: out_rx,
        thread,
    }
}
