use std::fmt::Write as _;
use std::rc::Rc;

use crate::bytecode::Constant;

/// Heap index of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RecordRef(pub u32);

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(Rc<str>),
    Int(i64),
    Bool(bool),
    Record(RecordRef),
    Null,
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Str(_) => "string",
            Value::Int(_) => "int",
            Value::Bool(_) => "bool",
            Value::Record(_) => "record",
            Value::Null => "null",
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl From<&Constant> for Value {
    fn from(c: &Constant) -> Self {
        match c {
            Constant::Str(s) => Value::Str(Rc::from(s.as_str())),
            Constant::Int(i) => Value::Int(*i),
            Constant::Bool(b) => Value::Bool(*b),
            Constant::Null => Value::Null,
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(Rc::from(s))
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(Rc::from(s))
    }
}

/// Fields in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Record {
    pub fields: Vec<(String, Value)>,
}

impl Record {
    pub fn get(&self, field: &str) -> Option<&Value> {
        self.fields.iter().find(|(f, _)| f == field).map(|(_, v)| v)
    }

    pub fn set(&mut self, field: &str, value: Value) {
        match self.fields.iter_mut().find(|(f, _)| f == field) {
            Some((_, slot)) => *slot = value,
            None => self.fields.push((field.to_string(), value)),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Heap {
    records: Vec<Record>,
}

impl Heap {
    pub fn alloc(&mut self, record: Record) -> RecordRef {
        self.records.push(record);
        RecordRef(self.records.len() as u32 - 1)
    }

    pub fn get(&self, r: RecordRef) -> &Record {
        &self.records[r.0 as usize]
    }

    pub fn get_mut(&mut self, r: RecordRef) -> &mut Record {
        &mut self.records[r.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Program-facing text of a value, as produced by `print` and `str`.
/// Strings appear raw; records are rendered one level deep.
pub fn display(value: &Value, heap: &Heap) -> String {
    match value {
        Value::Str(s) => s.to_string(),
        other => render(other, heap),
    }
}

/// Debugger-facing text of a value: strings are quoted, records are shown as
/// `{field: value, ...}` with nested records collapsed to `{...}`.
pub fn render(value: &Value, heap: &Heap) -> String {
    render_at(value, heap, true)
}

fn render_at(value: &Value, heap: &Heap, expand: bool) -> String {
    match value {
        Value::Str(s) => serde_json::to_string(&**s).unwrap_or_default(),
        Value::Int(i) => i.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Null => "null".into(),
        Value::Record(_) if !expand => "{...}".into(),
        Value::Record(r) => {
            let mut out = String::from("{");
            for (i, (name, v)) in heap.get(*r).fields.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{name}: {}", render_at(v, heap, false));
            }
            out.push('}');
            out
        }
    }
}
