//! MiniLang front end: lexer, parser and bytecode compiler.
//!
//! MiniLang is a small dynamically typed language with functions, `let`
//! bindings, `if`/`while`, integers, booleans, strings, records with named
//! fields and a handful of string builtins. Source files use the `.mls`
//! extension.

pub mod ast;
mod compiler;
mod lexer;
mod parser;

use std::path::Path;

pub use compiler::{compile, compile_units, ENTRY_POINT};
pub use parser::parse_unit;

use crate::bytecode::ProgramImage;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LangError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: u32,
        column: u32,
        message: String,
    },
    #[error("no `main` function")]
    MissingMain,
    #[error("line {line}: unknown identifier `{name}`")]
    UnknownIdentifier { name: String, line: u32 },
    #[error("line {line}: `{name}` takes {expected} argument(s), got {found}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
        line: u32,
    },
    #[error("line {line}: function `{name}` is already defined")]
    DuplicateFunction { name: String, line: u32 },
    #[error("line {line}: parameter `{name}` is declared twice")]
    DuplicateParameter { name: String, line: u32 },
    #[error("line {line}: `{name}` does not produce a value")]
    VoidValue { name: String, line: u32 },
    #[error("cannot derive a unit name from `{0}`")]
    UnitName(String),
}

/// One source file. `unit_name` comes from the file stem and is what scope
/// patterns match against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub path: String,
    pub source: String,
    pub unit_name: String,
}

impl SourceUnit {
    pub fn new(path: impl Into<String>, source: impl Into<String>) -> Result<Self, LangError> {
        let path = path.into();
        let unit_name = unit_name_for(&path)?;
        Ok(SourceUnit {
            path,
            source: source.into(),
            unit_name,
        })
    }

    pub fn read(path: &Path) -> std::io::Result<Result<Self, LangError>> {
        let source = std::fs::read_to_string(path)?;
        Ok(SourceUnit::new(path.display().to_string(), source))
    }
}

/// File stem with every non-identifier character replaced by `_`.
fn unit_name_for(path: &str) -> Result<String, LangError> {
    let stem = Path::new(path)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default();
    let mut name: String = stem
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if name.is_empty() {
        return Err(LangError::UnitName(path.to_string()));
    }
    if name.starts_with(|c: char| c.is_ascii_digit()) {
        name.insert(0, '_');
    }
    Ok(name)
}

/// Parses a standalone program; it must define `main`.
pub fn parse(unit: &SourceUnit) -> Result<ast::Program, LangError> {
    let program = parse_unit(&unit.source, &unit.unit_name)?;
    if program.function(ENTRY_POINT).is_none() {
        return Err(LangError::MissingMain);
    }
    Ok(program)
}

/// Parses and compiles a set of units into one image.
pub fn build(units: &[SourceUnit]) -> Result<ProgramImage, LangError> {
    let programs = units
        .iter()
        .map(|u| parse_unit(&u.source, &u.unit_name))
        .collect::<Result<Vec<_>, _>>()?;
    compile_units(&programs)
}
