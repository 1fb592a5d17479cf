#![allow(dead_code)]

pub mod gen;
pub mod oracle;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use runtimesearch::bytecode::{ProgramImage, SiteId};
use runtimesearch::instrument::{instrument, ScopePattern};
use runtimesearch::lang::ast::Program;
use runtimesearch::lang::{build, parse_unit, SourceUnit};
use runtimesearch::vm::{Control, ExecHooks, InputFixture, Stop, Vm};

pub use oracle::{Logged, Trace};

/// A corpus entry: one `.mls` file, or a directory of units, plus an
/// optional `.input` fixture next to it.
pub struct Case {
    pub name: String,
    pub units: Vec<SourceUnit>,
    pub input: String,
}

impl Case {
    pub fn programs(&self) -> Vec<Program> {
        self.units
            .iter()
            .map(|u| parse_unit(&u.source, &u.unit_name).unwrap())
            .collect()
    }

    pub fn plain(&self) -> ProgramImage {
        build(&self.units).unwrap_or_else(|e| panic!("{}: {e}", self.name))
    }
}

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/corpus")
}

fn read_unit(path: &Path) -> SourceUnit {
    let source = std::fs::read_to_string(path).unwrap();
    let file = path.file_name().unwrap().to_str().unwrap();
    SourceUnit::new(file, source).unwrap()
}

pub fn corpus() -> Vec<Case> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir() || p.extension().is_some_and(|x| x == "mls"))
        .collect();
    entries.sort();
    entries
        .into_iter()
        .map(|path| {
            let name = path.file_stem().unwrap().to_str().unwrap().to_string();
            let units = if path.is_dir() {
                let mut files: Vec<PathBuf> = std::fs::read_dir(&path)
                    .unwrap()
                    .map(|e| e.unwrap().path())
                    .filter(|p| p.extension().is_some_and(|x| x == "mls"))
                    .collect();
                files.sort();
                files.iter().map(|f| read_unit(f)).collect()
            } else {
                vec![read_unit(&path)]
            };
            let input = std::fs::read_to_string(path.with_extension("input")).unwrap_or_default();
            Case { name, units, input }
        })
        .collect()
}

pub fn instrumented(plain: &ProgramImage, scope: &str) -> Arc<ProgramImage> {
    Arc::new(instrument(plain, &ScopePattern::parse(scope).unwrap()).unwrap())
}

#[derive(Default)]
struct Recorder {
    sites: Vec<(SiteId, String)>,
    stdout: String,
}

impl ExecHooks for Recorder {
    fn capture(&mut self, site: SiteId, value: &str) -> Control {
        self.sites.push((site, value.to_string()));
        Control::Continue
    }
    fn poll(&mut self) -> Control {
        Control::Continue
    }
    fn output(&mut self, text: &str) {
        self.stdout.push_str(text);
    }
}

/// Runs the image to completion, recording every capture in the oracle's
/// log format.
pub fn run_vm(image: Arc<ProgramImage>, input: &str) -> Trace {
    let mut vm = Vm::new(Arc::clone(&image), InputFixture::from_text(input)).unwrap();
    let mut rec = Recorder::default();
    let fault_line = match vm.run(&mut rec).unwrap() {
        Stop::Finished => None,
        Stop::Fault(f) => Some(f.line),
        other => panic!("unexpected stop {other:?}"),
    };
    let log = rec
        .sites
        .into_iter()
        .map(|(id, value)| {
            let site = image.site_lookup(id).unwrap();
            Logged {
                unit: site.unit.clone(),
                function: site.function.clone(),
                kind: site.kind.name(),
                line: site.line,
                value,
            }
        })
        .collect();
    Trace {
        stdout: rec.stdout,
        log,
        fault_line,
    }
}

/// The oracle's trace restricted to functions the scope pattern selects.
pub fn run_oracle(programs: &[Program], input: &str, scope: &str) -> Trace {
    let scope = ScopePattern::parse(scope).unwrap();
    oracle::trace(programs, input, &|unit, function| {
        scope.matches(unit, function)
    })
}

/// Raw capture sequence of a full run: site ids and values.
pub fn captures(image: Arc<ProgramImage>, input: &str) -> Vec<(SiteId, String)> {
    let mut vm = Vm::new(image, InputFixture::from_text(input)).unwrap();
    let mut rec = Recorder::default();
    vm.run(&mut rec).unwrap();
    rec.sites
}
