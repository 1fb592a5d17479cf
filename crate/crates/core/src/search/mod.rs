//! Query matching and the debug session that drives the VM.

mod controller;
mod query;
mod session;

pub use controller::{CaptureEvent, SearchController, SessionState, Verdict};
pub use query::{matches, CompiledQuery, Query, QueryError};
pub use session::{
    spawn_session, Command, CommandError, DebugSession, Disconnected, Envelope, Event, Mailbox,
    Outbound, Outgoing, Reply, Response, ScriptMailbox, SessionConfig, SessionHandle, SiteInfo,
    StopInfo, StopReason, TerminateReason, Variable,
};
