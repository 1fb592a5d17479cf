//! Three-condition overhead measurement: the program without capture points,
//! with capture points but no active query, and while searching for a short
//! string that never occurs.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::bytecode::ProgramImage;
use crate::instrument::{instrument, ScopePattern};
use crate::lang::{build, LangError, SourceUnit};
use crate::search::{
    Command, DebugSession, Event, Outbound, Outgoing, Query, ScriptMailbox, SessionConfig,
    StopInfo, TerminateReason,
};

pub const STANDARD_ITERATIONS: u64 = 10_000_000;
pub const DEFAULT_RUNS: usize = 3;
/// Never occurs in the standard workload.
pub const STANDARD_QUERY: &str = "zq";

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("workload does not compile: {0}")]
    Compile(#[from] LangError),
    #[error("workload fault: {0}")]
    WorkloadFault(String),
    #[error("runs must be at least 1")]
    NoRuns,
}

#[derive(Debug, Clone)]
pub struct Workload {
    pub name: String,
    pub source: String,
    pub query: Query,
}

impl Workload {
    /// String churn: concatenation, `upper` and comparison in a loop.
    pub fn standard(iterations: u64) -> Self {
        let source = format!(
            "fn main() {{
  let i = 0;
  let hits = 0;
  while (i < {iterations}) {{
    let s = \"ab\" + \"cd\";
    let u = upper(s);
    if (u == \"ABCD\") {{
      hits = hits + 1;
    }}
    i = i + 1;
  }}
  print(str(hits));
}}
"
        );
        Workload {
            name: format!("string-churn-{iterations}"),
            source,
            query: Query::new(STANDARD_QUERY),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub workload: String,
    pub runs: usize,
    pub plain_seconds: f64,
    pub instrumented_seconds: f64,
    pub searching_seconds: f64,
    /// instrumented / plain
    pub instrumented_ratio: f64,
    /// searching / instrumented
    pub searching_ratio: f64,
    /// Largest relative spread (max - min) / mean seen in any condition.
    pub noise_margin: f64,
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let rows: [(&str, String); 8] = [
            ("workload", self.workload.clone()),
            ("runs", self.runs.to_string()),
            ("plain", format!("{:.3} s", self.plain_seconds)),
            (
                "instrumented",
                format!("{:.3} s", self.instrumented_seconds),
            ),
            ("searching", format!("{:.3} s", self.searching_seconds)),
            (
                "instrumented/plain",
                format!("{:.3}", self.instrumented_ratio),
            ),
            (
                "searching/instrumented",
                format!("{:.3}", self.searching_ratio),
            ),
            (
                "noise margin",
                format!("{:.1} %", self.noise_margin * 100.0),
            ),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Default)]
struct Tally {
    stopped: Option<StopInfo>,
    terminated: Option<TerminateReason>,
}

impl Outbound for Tally {
    fn send(&mut self, msg: Outgoing) {
        match msg {
            Outgoing::Event(Event::Stopped(s)) => {
                self.stopped.get_or_insert(s);
            }
            Outgoing::Event(Event::Terminated(r)) => self.terminated = Some(r),
            _ => {}
        }
    }
}

/// Runs the program once under a debug session and returns the wall time.
fn time_once(image: &Arc<ProgramImage>, first: Command) -> Result<f64, BenchError> {
    let mut session = DebugSession::new(Arc::clone(image), Vec::new(), SessionConfig::default());
    let mut tally = Tally::default();
    let start = Instant::now();
    session.run(&mut ScriptMailbox::new([first]), &mut tally);
    let elapsed = start.elapsed().as_secs_f64();
    if let Some(stop) = tally.stopped {
        let what = match stop.value {
            Some(v) => format!("query matched {v:?} at line {}", stop.line),
            None => format!(
                "paused ({:?}) at line {}{}",
                stop.reason,
                stop.line,
                stop.message.map(|m| format!(": {m}")).unwrap_or_default()
            ),
        };
        return Err(BenchError::WorkloadFault(what));
    }
    match tally.terminated {
        Some(TerminateReason::Exited) => Ok(elapsed.max(f64::MIN_POSITIVE)),
        other => Err(BenchError::WorkloadFault(format!(
            "program ended with {other:?}"
        ))),
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn spread(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::MIN, f64::max);
    let min = xs.iter().copied().fold(f64::MAX, f64::min);
    (max - min) / mean(xs)
}

/// Measures the three conditions `runs` times each. Rounds interleave the
/// conditions so slow drift of the machine affects all of them alike.
pub fn run_benchmark(workload: &Workload, runs: usize) -> Result<BenchReport, BenchError> {
    if runs == 0 {
        return Err(BenchError::NoRuns);
    }
    let unit = SourceUnit::new(format!("{}.mls", workload.name), workload.source.clone())?;
    let plain = Arc::new(build(&[unit])?);
    let instrumented = Arc::new(
        instrument(&plain, &ScopePattern::all())
            .map_err(|e| BenchError::WorkloadFault(e.to_string()))?,
    );
    workload
        .query
        .compile()
        .map_err(|e| BenchError::WorkloadFault(e.to_string()))?;

    let launch = Command::Launch {
        stop_on_entry: false,
    };
    let mut samples = [Vec::new(), Vec::new(), Vec::new()];
    for _ in 0..runs {
        samples[0].push(time_once(&plain, launch.clone())?);
        samples[1].push(time_once(&instrumented, launch.clone())?);
        samples[2].push(time_once(
            &instrumented,
            Command::Find(workload.query.clone()),
        )?);
    }
    let [p, i, s] = samples.each_ref().map(|xs| mean(xs));
    Ok(BenchReport {
        workload: workload.name.clone(),
        runs,
        plain_seconds: p,
        instrumented_seconds: i,
        searching_seconds: s,
        instrumented_ratio: i / p,
        searching_ratio: s / i,
        noise_margin: samples.iter().map(|xs| spread(xs)).fold(0.0, f64::max),
    })
}
