//! Wire protocol: newline-delimited JSON over TCP, or the same JSON objects
//! as WebSocket text messages on the same port.
//!
//! Requests look like `{"id":1,"command":"find","body":{"text":"hi"}}` (the
//! `"type":"request"` tag is optional). Every request gets one response
//! echoing its id, `{"type":"response","id":1,"command":"find","ok":true}`,
//! or on failure `"ok":false` with `"error"` set to `bad_request` or
//! `bad_state`. Events carry no id:
//! `{"type":"event","event":"stopped","body":{...}}`.

mod message;
mod server;

use std::cell::RefCell;
use std::collections::VecDeque;
use std::rc::Rc;
use std::sync::Arc;

pub use message::{
    busy, command_of, encode, encode_event, encode_response, parse_request, query_body,
    terminated_reason, EventMessage, Message, RequestMessage, ResponseMessage,
};
pub use server::{serve, DEFAULT_PORT};

use crate::bytecode::ProgramImage;
use crate::lang::SourceUnit;
use crate::search::{
    DebugSession, Disconnected, Envelope, Mailbox, Outbound, Outgoing, SessionConfig,
};

/// Client lines are prefixed `> `, server lines `< `.
pub const CLIENT_PREFIX: &str = "> ";
pub const SERVER_PREFIX: &str = "< ";

struct Replay {
    requests: VecDeque<String>,
    log: Rc<RefCell<Vec<String>>>,
}

impl Mailbox for Replay {
    fn poll(&mut self) -> Result<Option<Envelope>, Disconnected> {
        Ok(None)
    }

    fn wait(&mut self) -> Option<Envelope> {
        let line = self.requests.pop_front()?;
        self.log.borrow_mut().push(format!("{CLIENT_PREFIX}{line}"));
        Some(parse_request(&line))
    }
}

struct Recorder(Rc<RefCell<Vec<String>>>);

impl Outbound for Recorder {
    fn send(&mut self, msg: Outgoing) {
        self.0
            .borrow_mut()
            .push(format!("{SERVER_PREFIX}{}", encode(&msg).to_line()));
    }
}

/// Runs request lines through a fresh in-process session, each one delivered
/// once the previous has settled, and returns the interleaved transcript.
pub fn transcript(
    image: Arc<ProgramImage>,
    sources: Vec<SourceUnit>,
    config: SessionConfig,
    requests: &[&str],
) -> Vec<String> {
    let log = Rc::new(RefCell::new(Vec::new()));
    let mut mailbox = Replay {
        requests: requests.iter().map(|s| s.to_string()).collect(),
        log: Rc::clone(&log),
    };
    let mut out = Recorder(Rc::clone(&log));
    DebugSession::new(image, sources, config).run(&mut mailbox, &mut out);
    drop(mailbox);
    drop(out);
    Rc::try_unwrap(log).expect("sole owner").into_inner()
}
