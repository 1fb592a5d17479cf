use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::TryRecvError;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use tungstenite::Message as WsMessage;

use super::message::{busy, encode, parse_request};
use crate::bytecode::ProgramImage;
use crate::lang::SourceUnit;
use crate::search::{spawn_session, SessionConfig, SessionHandle};

pub const DEFAULT_PORT: u16 = 4711;

const IDLE_TICK: Duration = Duration::from_millis(10);

/// Serves one debug session to the first client that connects, and returns
/// when that client disconnects. Clients connecting in the meantime get a
/// `busy` error and are closed.
pub fn serve(
    listener: TcpListener,
    image: Arc<ProgramImage>,
    sources: Vec<SourceUnit>,
    config: SessionConfig,
) -> io::Result<()> {
    let (stream, _) = listener.accept()?;
    let done = Arc::new(AtomicBool::new(false));
    let rejecter = {
        let done = Arc::clone(&done);
        listener.set_nonblocking(true)?;
        thread::spawn(move || reject_others(listener, &done))
    };
    let session = spawn_session(image, sources, config);
    let result = if is_websocket(&stream)? {
        serve_websocket(stream, session)
    } else {
        serve_ndjson(stream, session)
    };
    done.store(true, Ordering::Relaxed);
    let _ = rejecter.join();
    result
}

fn reject_others(listener: TcpListener, done: &AtomicBool) {
    while !done.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, _)) => {
                let _ = stream.set_nonblocking(false);
                let _ = reject(stream);
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(IDLE_TICK),
            Err(_) => thread::sleep(IDLE_TICK),
        }
    }
}

fn reject(mut stream: TcpStream) -> io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(2)))?;
    let line = busy().to_line();
    if is_websocket(&stream).unwrap_or(false) {
        if let Ok(mut ws) = tungstenite::accept(stream) {
            let _ = ws.send(WsMessage::text(line));
            let _ = ws.close(None);
            let _ = ws.flush();
        }
        return Ok(());
    }
    writeln!(stream, "{line}")?;
    stream.flush()
}

/// Browsers open with an HTTP upgrade request; line clients start with JSON.
fn is_websocket(stream: &TcpStream) -> io::Result<bool> {
    let mut first = [0u8; 1];
    let n = stream.peek(&mut first)?;
    Ok(n == 1 && first[0] == b'G')
}

fn serve_ndjson(stream: TcpStream, session: SessionHandle) -> io::Result<()> {
    let SessionHandle {
        commands,
        events,
        thread: worker,
    } = session;
    let reader_stream = stream.try_clone()?;
    let reader = thread::spawn(move || {
        for line in BufReader::new(reader_stream).lines() {
            let Ok(line) = line else { break };
            if line.trim().is_empty() {
                continue;
            }
            if commands.send(parse_request(&line)).is_err() {
                break;
            }
        }
        // dropping `commands` ends the session
    });
    let mut writer = io::BufWriter::new(stream);
    let mut write_ok = true;
    for msg in events {
        if write_ok {
            write_ok = writeln!(writer, "{}", encode(&msg).to_line())
                .and_then(|()| writer.flush())
                .is_ok();
        }
    }
    let _ = worker.join();
    let _ = reader.join();
    Ok(())
}

fn serve_websocket(stream: TcpStream, session: SessionHandle) -> io::Result<()> {
    let mut ws = tungstenite::accept(stream).map_err(|e| io::Error::other(e.to_string()))?;
    ws.get_mut().set_read_timeout(Some(IDLE_TICK))?;
    let SessionHandle {
        commands,
        events,
        thread: worker,
    } = session;
    let mut open = true;
    while open {
        loop {
            match events.try_recv() {
                Ok(msg) => {
                    if ws.send(WsMessage::text(encode(&msg).to_line())).is_err() {
                        open = false;
                        break;
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => {
                    open = false;
                    break;
                }
            }
        }
        if !open {
            break;
        }
        match ws.read() {
            Ok(WsMessage::Text(text)) => {
                for line in text.as_str().lines().filter(|l| !l.trim().is_empty()) {
                    let _ = commands.send(parse_request(line));
                }
            }
            Ok(WsMessage::Close(_)) => open = false,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(
                    e.kind(),
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                ) => {}
            Err(_) => open = false,
        }
    }
    drop(commands);
    for msg in events {
        let _ = ws.send(WsMessage::text(encode(&msg).to_line()));
    }
    let _ = ws.close(None);
    let _ = ws.flush();
    let _ = worker.join();
    Ok(())
}
