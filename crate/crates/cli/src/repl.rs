//! Line-oriented front end to a debug session.
//!
//! Transcript format: prompts and echoed commands start with `> `, session
//! events with `! `, replies to `stack` / `locals` are indented by two
//! spaces, and program output is printed as is.

use std::io::{BufRead, Write};

use runtimesearch::search::{
    Command, Disconnected, Envelope, Event, Mailbox, Outbound, Outgoing, Query, Reply, Response,
    StopInfo, StopReason, TerminateReason,
};

pub const HELP: &str = "commands: find <text>, next, step, over, out, continue, stack, locals [frame], source, launch, quit";

/// Defaults applied to every `find`.
#[derive(Debug, Clone, Default)]
pub struct QueryFlags {
    pub ignore_case: bool,
    pub regex: bool,
    pub skip_repeats: bool,
}

impl QueryFlags {
    fn query(&self, text: &str) -> Query {
        let mut q = Query::new(text);
        q.match_case = !self.ignore_case;
        q.regex = self.regex;
        q.skip_repeated_site = self.skip_repeats;
        q
    }
}

pub enum Parsed {
    Command(Command),
    Quit,
    Help,
    Empty,
}

pub fn parse_line(line: &str, flags: &QueryFlags) -> Result<Parsed, String> {
    let line = line.trim();
    let (word, rest) = match line.split_once(char::is_whitespace) {
        Some((w, r)) => (w, r.trim()),
        None => (line, ""),
    };
    let no_arg = |c: Command| {
        if rest.is_empty() {
            Ok(Parsed::Command(c))
        } else {
            Err(format!("`{word}` takes no argument"))
        }
    };
    match word {
        "" => Ok(Parsed::Empty),
        "find" if rest.is_empty() => Err("usage: find <text>".into()),
        "find" => Ok(Parsed::Command(Command::Find(flags.query(rest)))),
        "next" => no_arg(Command::FindNext),
        "step" => no_arg(Command::StepIn),
        "over" => no_arg(Command::StepOver),
        "out" => no_arg(Command::StepOut),
        "continue" => no_arg(Command::Continue),
        "stack" => no_arg(Command::StackTrace),
        "source" => no_arg(Command::Source),
        "launch" => no_arg(Command::Launch {
            stop_on_entry: true,
        }),
        "locals" if rest.is_empty() => Ok(Parsed::Command(Command::Variables { frame: 0 })),
        "locals" => rest
            .parse()
            .map(|frame| Parsed::Command(Command::Variables { frame }))
            .map_err(|_| format!("bad frame number `{rest}`")),
        "quit" => Ok(Parsed::Quit),
        "help" => Ok(Parsed::Help),
        other => Err(format!("unknown command `{other}`; {HELP}")),
    }
}

/// Reads commands from a script (echoing them) or from an interactive
/// terminal (prompting for them).
pub struct LineMailbox<R, W> {
    input: R,
    out: W,
    echo: bool,
    flags: QueryFlags,
    next_id: u64,
}

impl<R: BufRead, W: Write> LineMailbox<R, W> {
    pub fn new(input: R, out: W, echo: bool, flags: QueryFlags) -> Self {
        LineMailbox {
            input,
            out,
            echo,
            flags,
            next_id: 1,
        }
    }
}

impl<R: BufRead, W: Write> Mailbox for LineMailbox<R, W> {
    fn poll(&mut self) -> Result<Option<Envelope>, Disconnected> {
        // the session runs on this thread, so nothing can arrive mid-run
        Ok(None)
    }

    fn wait(&mut self) -> Option<Envelope> {
        loop {
            if !self.echo {
                let _ = write!(self.out, "> ");
                let _ = self.out.flush();
            }
            let mut line = String::new();
            match self.input.read_line(&mut line) {
                Ok(0) | Err(_) => return None,
                Ok(_) => {}
            }
            let line = line.trim_end_matches(['\n', '\r']);
            if self.echo {
                let _ = writeln!(self.out, "> {line}");
            }
            match parse_line(line, &self.flags) {
                Ok(Parsed::Command(c)) => {
                    let env = Envelope::new(self.next_id, c);
                    self.next_id += 1;
                    return Some(env);
                }
                Ok(Parsed::Quit) => return None,
                Ok(Parsed::Help) => {
                    let _ = writeln!(self.out, "  {HELP}");
                }
                Ok(Parsed::Empty) => {}
                Err(e) => {
                    let _ = writeln!(self.out, "! error: {e}");
                }
            }
        }
    }
}

fn describe_stop(s: &StopInfo) -> String {
    let reason = match s.reason {
        StopReason::Entry => "entry",
        StopReason::Match => "match",
        StopReason::Step => "step",
        StopReason::Fault => "fault",
        StopReason::Stopped => "stopped",
    };
    let mut text = format!(
        "! stopped: {reason} at {}.{}:{}",
        s.unit, s.function, s.line
    );
    if let (Some(site), Some(value)) = (&s.site, &s.value) {
        text.push_str(&format!(
            " site {} {} {:?}",
            site.id,
            site.kind.name(),
            value
        ));
        if let Some(n) = s.match_count {
            text.push_str(&format!(" (match {n})"));
        }
    }
    if let Some(m) = &s.message {
        text.push_str(&format!(": {m}"));
    }
    text
}

/// Prints session output in transcript form.
pub struct Printer<W> {
    pub out: W,
}

impl<W: Write> Printer<W> {
    fn reply(&mut self, reply: &Reply) {
        let out = &mut self.out;
        match reply {
            Reply::Ack => {}
            Reply::StackTrace(frames) => {
                for (i, f) in frames.iter().enumerate() {
                    let _ = writeln!(out, "  #{i} {}.{}:{}", f.unit, f.function, f.line);
                }
            }
            Reply::Variables(vars) => {
                if vars.is_empty() {
                    let _ = writeln!(out, "  (no locals)");
                }
                for v in vars {
                    let _ = writeln!(out, "  {} = {}", v.name, v.value);
                }
            }
            Reply::Source(units) => {
                for u in units {
                    let _ = writeln!(out, "  -- {} ({})", u.unit_name, u.path);
                    for (n, line) in u.source.lines().enumerate() {
                        let _ = writeln!(out, "  {:>4}  {line}", n + 1);
                    }
                }
            }
        }
    }
}

impl<W: Write> Outbound for Printer<W> {
    fn send(&mut self, msg: Outgoing) {
        match msg {
            Outgoing::Response(Response {
                result: Ok(reply), ..
            }) => self.reply(&reply),
            Outgoing::Response(Response {
                result: Err(e),
                command,
                ..
            }) => {
                let _ = writeln!(self.out, "! error {} ({command}): {e}", e.code());
            }
            Outgoing::Event(Event::Output(text)) => {
                let _ = write!(self.out, "{text}");
            }
            Outgoing::Event(Event::Stopped(s)) => {
                let _ = writeln!(self.out, "{}", describe_stop(&s));
            }
            Outgoing::Event(Event::Terminated(r)) => {
                let reason = match r {
                    TerminateReason::Exited => "exited",
                    TerminateReason::Stopped => "stopped",
                    TerminateReason::Fault => "fault",
                };
                let _ = writeln!(self.out, "! terminated: {reason}");
            }
        }
        let _ = self.out.flush();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cmd(line: &str) -> Command {
        match parse_line(line, &QueryFlags::default()).unwrap() {
            Parsed::Command(c) => c,
            _ => panic!("not a command: {line}"),
        }
    }

    #[test]
    fn repl_words_map_to_protocol_commands() {
        assert_eq!(
            cmd("find some text"),
            Command::Find(Query::new("some text"))
        );
        assert_eq!(cmd("next"), Command::FindNext);
        assert_eq!(cmd("step"), Command::StepIn);
        assert_eq!(cmd("over"), Command::StepOver);
        assert_eq!(cmd("out"), Command::StepOut);
        assert_eq!(cmd("continue"), Command::Continue);
        assert_eq!(cmd("stack"), Command::StackTrace);
        assert_eq!(cmd("locals"), Command::Variables { frame: 0 });
        assert_eq!(cmd("  locals 2 "), Command::Variables { frame: 2 });
        assert!(matches!(
            parse_line("quit", &QueryFlags::default()),
            Ok(Parsed::Quit)
        ));
    }

    #[test]
    fn flags_shape_queries() {
        let flags = QueryFlags {
            ignore_case: true,
            regex: true,
            skip_repeats: true,
        };
        let Ok(Parsed::Command(Command::Find(q))) = parse_line("find a.b", &flags) else {
            panic!()
        };
        assert_eq!(q, Query::new("a.b").ignore_case().regex().skip_repeats());
    }

    #[test]
    fn bad_lines() {
        let f = QueryFlags::default();
        assert!(parse_line("find", &f).is_err());
        assert!(parse_line("next 3", &f).is_err());
        assert!(parse_line("locals x", &f).is_err());
        assert!(parse_line("frobnicate", &f).is_err());
    }
}
