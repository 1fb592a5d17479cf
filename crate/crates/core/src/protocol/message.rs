//! Wire messages and their mapping to session commands and output.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::search::{
    Command, CommandError, Envelope, Event, Outgoing, Query, Reply, Response, TerminateReason,
};

/// One line of the protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Message {
    Request(RequestMessage),
    Response(ResponseMessage),
    Event(EventMessage),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestMessage {
    pub id: u64,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseMessage {
    pub id: Option<u64>,
    pub command: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMessage {
    pub event: String,
    pub body: Value,
}

impl Message {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("messages always serialize")
    }

    /// Parses any message. A request may leave out `"type"`.
    pub fn parse(line: &str) -> Result<Message, serde_json::Error> {
        let mut value: Value = serde_json::from_str(line)?;
        if let Value::Object(map) = &mut value {
            map.entry("type").or_insert_with(|| Value::from("request"));
        }
        serde_json::from_value(value)
    }

    pub fn request(id: u64, command: &str, body: Option<Value>) -> Message {
        Message::Request(RequestMessage {
            id,
            command: command.to_string(),
            body,
        })
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct LaunchArgs {
    #[serde(default = "yes")]
    stop_on_entry: bool,
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VariablesArgs {
    #[serde(default)]
    frame: usize,
}

fn args<T: for<'de> Deserialize<'de>>(body: Option<Value>) -> Result<T, CommandError> {
    serde_json::from_value(body.unwrap_or_else(|| json!({})))
        .map_err(|e| CommandError::BadRequest(format!("bad body: {e}")))
}

fn no_args(body: &Option<Value>) -> Result<(), CommandError> {
    match body {
        None | Some(Value::Null) => Ok(()),
        Some(Value::Object(m)) if m.is_empty() => Ok(()),
        Some(_) => Err(CommandError::BadRequest("command takes no body".into())),
    }
}

/// Maps a request to a session command.
pub fn command_of(name: &str, body: Option<Value>) -> Result<Command, CommandError> {
    let simple = |c: Command| no_args(&body).map(|()| c);
    match name {
        "launch" => args::<LaunchArgs>(body).map(|a| Command::Launch {
            stop_on_entry: a.stop_on_entry,
        }),
        "find" => {
            let body = body.ok_or_else(|| CommandError::BadRequest("find needs a query".into()))?;
            let query: Query = serde_json::from_value(body)
                .map_err(|e| CommandError::BadRequest(format!("bad query: {e}")))?;
            Ok(Command::Find(query))
        }
        "variables" => args::<VariablesArgs>(body).map(|a| Command::Variables { frame: a.frame }),
        "findNext" => simple(Command::FindNext),
        "continue" => simple(Command::Continue),
        "stepIn" => simple(Command::StepIn),
        "stepOver" => simple(Command::StepOver),
        "stepOut" => simple(Command::StepOut),
        "pause" => simple(Command::Pause),
        "stackTrace" => simple(Command::StackTrace),
        "source" => simple(Command::Source),
        "stop" => simple(Command::Stop),
        other => Err(CommandError::BadRequest(format!(
            "unknown command `{other}`"
        ))),
    }
}

/// Decodes one incoming line. Never fails: a malformed line becomes an
/// envelope carrying a `bad_request` error so it still gets a response.
pub fn parse_request(line: &str) -> Envelope {
    let bad = |id, name: &str, msg: String| Envelope {
        id,
        name: name.to_string(),
        command: Err(CommandError::BadRequest(msg)),
    };
    let value: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return bad(None, "", format!("malformed frame: {e}")),
    };
    let Value::Object(mut map) = value else {
        return bad(None, "", "malformed frame: expected an object".into());
    };
    let id = map.get("id").and_then(Value::as_u64);
    let name = map
        .get("command")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    if let Some(t) = map.get("type") {
        if t != "request" {
            return bad(id, &name, "only requests are accepted".into());
        }
    }
    if id.is_none() {
        return bad(None, &name, "request needs a numeric id".into());
    }
    if name.is_empty() {
        return bad(id, "", "request needs a command".into());
    }
    let body = map.remove("body");
    Envelope {
        id,
        command: command_of(&name, body),
        name,
    }
}

fn reply_body(reply: &Reply) -> Option<Value> {
    match reply {
        Reply::Ack => None,
        Reply::StackTrace(frames) => Some(json!({
            "frames": frames
                .iter()
                .enumerate()
                .map(|(i, f)| json!({"id": i, "function": f.function, "unit": f.unit, "line": f.line}))
                .collect::<Vec<_>>()
        })),
        Reply::Variables(vars) => Some(json!({
            "variables": vars
                .iter()
                .map(|v| json!({"name": v.name, "value": v.value}))
                .collect::<Vec<_>>()
        })),
        Reply::Source(units) => Some(json!({
            "sources": units
                .iter()
                .map(|u| json!({"unit": u.unit_name, "path": u.path, "text": u.source}))
                .collect::<Vec<_>>()
        })),
    }
}

pub fn encode_response(r: &Response) -> Message {
    let (ok, body, error, message) = match &r.result {
        Ok(reply) => (true, reply_body(reply), None, None),
        Err(e) => (false, None, Some(e.code().to_string()), Some(e.to_string())),
    };
    Message::Response(ResponseMessage {
        id: r.id,
        command: r.command.clone(),
        ok,
        body,
        error,
        message,
    })
}

pub fn encode_event(e: &Event) -> Message {
    let (event, body) = match e {
        Event::Stopped(info) => ("stopped", serde_json::to_value(info).expect("stop info")),
        Event::Output(text) => ("output", json!({ "text": text })),
        Event::Terminated(reason) => ("terminated", json!({ "reason": reason })),
    };
    Message::Event(EventMessage {
        event: event.to_string(),
        body,
    })
}

pub fn encode(out: &Outgoing) -> Message {
    match out {
        Outgoing::Response(r) => encode_response(r),
        Outgoing::Event(e) => encode_event(e),
    }
}

/// Error sent to a client that connects while another one is attached.
pub fn busy() -> Message {
    Message::Response(ResponseMessage {
        id: None,
        command: String::new(),
        ok: false,
        body: None,
        error: Some("busy".into()),
        message: Some("another client is attached".into()),
    })
}

/// Builds the request body for a query.
pub fn query_body(query: &Query) -> Value {
    serde_json::to_value(query).expect("query serializes")
}

/// Lets tests and clients read a terminated reason back.
pub fn terminated_reason(body: &Value) -> Option<TerminateReason> {
    serde_json::from_value(body.get("reason")?.clone()).ok()
}
