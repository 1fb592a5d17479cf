use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;

use runtimesearch::instrument::{instrument, ScopePattern};
use runtimesearch::lang::{build, SourceUnit};
use runtimesearch::protocol::{self, serve, Message, CLIENT_PREFIX, SERVER_PREFIX};
use runtimesearch::search::SessionConfig;

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn demo() -> (Arc<runtimesearch::bytecode::ProgramImage>, Vec<SourceUnit>) {
    let path = golden("upper_demo.mls");
    let unit = SourceUnit::read(&path).unwrap().unwrap();
    // keep the path stable across checkouts
    let unit = SourceUnit::new("upper_demo.mls", unit.source).unwrap();
    let plain = build(std::slice::from_ref(&unit)).unwrap();
    (
        Arc::new(instrument(&plain, &ScopePattern::all()).unwrap()),
        vec![unit],
    )
}

fn requests() -> Vec<String> {
    std::fs::read_to_string(golden("upper_session.requests"))
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

fn expected_transcript() -> Vec<String> {
    let path = golden("upper_session.transcript");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        let (image, sources) = demo();
        let reqs = requests();
        let reqs: Vec<&str> = reqs.iter().map(String::as_str).collect();
        let lines = protocol::transcript(image, sources, SessionConfig::default(), &reqs);
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    }
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn in_process_transcript_matches_golden() {
    let (image, sources) = demo();
    let reqs = requests();
    let reqs: Vec<&str> = reqs.iter().map(String::as_str).collect();
    let got = protocol::transcript(image, sources, SessionConfig::default(), &reqs);
    assert_eq!(got, expected_transcript());
}

#[test]
fn golden_transcript_round_trips() {
    for line in expected_transcript() {
        let json = line
            .strip_prefix(CLIENT_PREFIX)
            .or_else(|| line.strip_prefix(SERVER_PREFIX))
            .unwrap();
        let parsed = Message::parse(json).unwrap();
        let again = Message::parse(&parsed.to_line()).unwrap();
        assert_eq!(parsed, again);
        if line.starts_with(SERVER_PREFIX) {
            assert_eq!(parsed.to_line(), json, "server lines are canonical");
        }
    }
}

/// Whether the client should wait for a stop or termination after the
/// response to this request.
fn runs_program(request: &str) -> bool {
    let Ok(Message::Request(r)) = Message::parse(request) else {
        return false;
    };
    matches!(
        r.command.as_str(),
        "launch" | "find" | "findNext" | "continue" | "stepIn" | "stepOver" | "stepOut"
    )
}

/// Sends each request once the previous one has settled and records the
/// exchange, like the in-process transcript.
fn lockstep(
    mut send: impl FnMut(&str),
    mut recv: impl FnMut() -> String,
    requests: &[String],
) -> Vec<String> {
    let mut log = Vec::new();
    for req in requests {
        log.push(format!("{CLIENT_PREFIX}{req}"));
        send(req);
        let id = serde_json::from_str::<serde_json::Value>(req).unwrap()["id"].as_u64();
        let ok;
        loop {
            let line = recv();
            log.push(format!("{SERVER_PREFIX}{line}"));
            if let Message::Response(r) = Message::parse(&line).unwrap() {
                if r.id == id {
                    ok = r.ok;
                    break;
                }
            }
        }
        if ok && runs_program(req) {
            loop {
                let line = recv();
                log.push(format!("{SERVER_PREFIX}{line}"));
                if let Message::Event(e) = Message::parse(&line).unwrap() {
                    if e.event == "stopped" || e.event == "terminated" {
                        break;
                    }
                }
            }
        }
    }
    log
}

fn start_server() -> (u16, thread::JoinHandle<std::io::Result<()>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let (image, sources) = demo();
    let server = thread::spawn(move || serve(listener, image, sources, SessionConfig::default()));
    (port, server)
}

#[test]
fn tcp_transcript_matches_golden() {
    let (port, server) = start_server();
    let stream = TcpStream::connect(("127.0.0.1", port)).unwrap();
    let mut writer = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);
    let log = lockstep(
        |req| {
            writeln!(writer, "{req}").unwrap();
        },
        || {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            line.trim_end().to_string()
        },
        &requests(),
    );
    assert_eq!(log, expected_transcript());
    drop(writer);
    drop(reader);
    server.join().unwrap().unwrap();
}

#[test]
fn websocket_transcript_matches_golden() {
    let (port, server) = start_server();
    let stream = TcpStream::connect(("127.0.0.1", port)).unwrap();
    let (ws, _) = tungstenite::client(format!("ws://127.0.0.1:{port}/"), stream).unwrap();
    let ws = std::cell::RefCell::new(ws);
    let log = lockstep(
        |req| {
            ws.borrow_mut()
                .send(tungstenite::Message::text(req))
                .unwrap()
        },
        || loop {
            if let tungstenite::Message::Text(t) = ws.borrow_mut().read().unwrap() {
                return t.as_str().to_string();
            }
        },
        &requests(),
    );
    assert_eq!(log, expected_transcript());
    ws.borrow_mut().close(None).unwrap();
    // drain until the server finishes the close handshake
    while ws.borrow_mut().read().is_ok() {}
    server.join().unwrap().unwrap();
}

#[test]
fn second_client_is_turned_away() {
    let (port, server) = start_server();
    let first = TcpStream::connect(("127.0.0.1", port)).unwrap();
    let mut first_writer = first.try_clone().unwrap();
    let mut first_reader = BufReader::new(first);
    writeln!(first_writer, r#"{{"id":1,"command":"source"}}"#).unwrap();
    let mut line = String::new();
    first_reader.read_line(&mut line).unwrap();
    assert!(line.contains(r#""ok":true"#));

    let second = TcpStream::connect(("127.0.0.1", port)).unwrap();
    let mut second_reader = BufReader::new(second);
    let mut refusal = String::new();
    second_reader.read_line(&mut refusal).unwrap();
    let Message::Response(r) = Message::parse(refusal.trim_end()).unwrap() else {
        panic!("expected a response, got {refusal}");
    };
    assert!(!r.ok);
    assert_eq!(r.error.as_deref(), Some("busy"));
    let mut rest = String::new();
    assert_eq!(
        second_reader.read_line(&mut rest).unwrap(),
        0,
        "closed after refusal"
    );

    // the first client is unaffected
    writeln!(first_writer, r#"{{"id":2,"command":"frobnicate"}}"#).unwrap();
    line.clear();
    first_reader.read_line(&mut line).unwrap();
    assert!(line.contains(r#""id":2"#) && line.contains("bad_request"));
    drop(first_writer);
    drop(first_reader);
    server.join().unwrap().unwrap();
}

#[test]
fn disconnect_stops_a_running_program() {
    let src = "fn main() {\n  let i = 0;\n  while (i < 100000000) { i = i + 1; }\n}";
    let unit = SourceUnit::new("spin.mls", src).unwrap();
    let plain = build(std::slice::from_ref(&unit)).unwrap();
    let image = Arc::new(instrument(&plain, &ScopePattern::all()).unwrap());
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let server =
        thread::spawn(move || serve(listener, image, vec![unit], SessionConfig::default()));
    let stream = TcpStream::connect(("127.0.0.1", port)).unwrap();
    let mut writer = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);
    writeln!(
        writer,
        r#"{{"id":1,"command":"launch","body":{{"stopOnEntry":false}}}}"#
    )
    .unwrap();
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    assert!(line.contains(r#""ok":true"#));
    writeln!(writer, r#"{{"id":2,"command":"pause"}}"#).unwrap();
    let mut seen = Vec::new();
    while !seen
        .iter()
        .any(|l: &String| l.contains(r#""event":"stopped""#))
    {
        line.clear();
        reader.read_line(&mut line).unwrap();
        seen.push(line.clone());
    }
    assert!(seen[0].contains(r#""id":2"#));
    assert!(seen.last().unwrap().contains(r#""reason":"stopped""#));
    writeln!(writer, r#"{{"id":3,"command":"continue"}}"#).unwrap();
    writer.shutdown(std::net::Shutdown::Write).unwrap();
    let rest: Vec<String> = reader.lines().map(Result::unwrap).collect();
    assert!(
        rest.last().unwrap().contains(r#""event":"terminated""#),
        "{rest:?}"
    );
    server.join().unwrap().unwrap();
}
