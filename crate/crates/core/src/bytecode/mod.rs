//! Compiled program representation shared by the compiler, the instrumenter,
//! the VM and the debug session.

mod disasm;
mod verify;

use std::fmt;

pub use disasm::{assemble, disassemble, disassemble_function, AsmError};
pub use verify::{verify_function, verify_image, VerifyError};

pub type FuncId = u32;
pub type SiteId = u32;
pub type ConstId = u32;

/// Constant pool entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Constant {
    Str(String),
    Int(i64),
    Bool(bool),
    Null,
}

impl fmt::Display for Constant {
    /// Literal syntax, as used in the disassembly.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Str(s) => f.write_str(&serde_json::to_string(s).map_err(|_| fmt::Error)?),
            Constant::Int(i) => write!(f, "{i}"),
            Constant::Bool(b) => write!(f, "{b}"),
            Constant::Null => f.write_str("null"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    /// `+` whose operand types are only known at runtime.
    Add,
    /// `+` with at least one operand statically known to be a string.
    Concat,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
}

impl BinOp {
    pub const ALL: [BinOp; 9] = [
        BinOp::Add,
        BinOp::Concat,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Rem,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Lt,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Concat => "concat",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
            BinOp::Rem => "rem",
            BinOp::Eq => "eq",
            BinOp::Ne => "ne",
            BinOp::Lt => "lt",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<BinOp> {
        BinOp::ALL.into_iter().find(|op| op.mnemonic() == s)
    }

    /// Whether the result can be a string at runtime.
    pub fn may_yield_string(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Concat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Upper,
    Lower,
    Len,
    Str,
    Print,
    Readline,
}

impl Builtin {
    pub const ALL: [Builtin; 6] = [
        Builtin::Upper,
        Builtin::Lower,
        Builtin::Len,
        Builtin::Str,
        Builtin::Print,
        Builtin::Readline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Upper => "upper",
            Builtin::Lower => "lower",
            Builtin::Len => "len",
            Builtin::Str => "str",
            Builtin::Print => "print",
            Builtin::Readline => "readline",
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        Builtin::ALL.into_iter().find(|b| b.name() == name)
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Readline => 0,
            _ => 1,
        }
    }

    /// `print` consumes its argument and pushes nothing.
    pub fn pushes_value(self) -> bool {
        !matches!(self, Builtin::Print)
    }

    pub fn returns_string(self) -> bool {
        matches!(
            self,
            Builtin::Upper | Builtin::Lower | Builtin::Str | Builtin::Readline
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instruction {
    PushConst(ConstId),
    LoadLocal(u16),
    StoreLocal(u16),
    LoadField(String),
    StoreField(String),
    /// Pops one value per field name (in order) and pushes the new record.
    NewRecord(Vec<String>),
    Call(FuncId),
    CallBuiltin(Builtin),
    BinOp(BinOp),
    Jump(u32),
    JumpIfFalse(u32),
    Return,
    Pop,
    /// Reports the string on top of the stack to the capture hook. Never
    /// changes the stack.
    Capture(SiteId),
}

impl Instruction {
    pub fn mnemonic(&self) -> &'static str {
        match self {
            Instruction::PushConst(_) => "PushConst",
            Instruction::LoadLocal(_) => "LoadLocal",
            Instruction::StoreLocal(_) => "StoreLocal",
            Instruction::LoadField(_) => "LoadField",
            Instruction::StoreField(_) => "StoreField",
            Instruction::NewRecord(_) => "NewRecord",
            Instruction::Call(_) => "Call",
            Instruction::CallBuiltin(_) => "CallBuiltin",
            Instruction::BinOp(_) => "BinOp",
            Instruction::Jump(_) => "Jump",
            Instruction::JumpIfFalse(_) => "JumpIfFalse",
            Instruction::Return => "Return",
            Instruction::Pop => "Pop",
            Instruction::Capture(_) => "Capture",
        }
    }

    pub fn jump_target(&self) -> Option<u32> {
        match self {
            Instruction::Jump(t) | Instruction::JumpIfFalse(t) => Some(*t),
            _ => None,
        }
    }

    pub fn jump_target_mut(&mut self) -> Option<&mut u32> {
        match self {
            Instruction::Jump(t) | Instruction::JumpIfFalse(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionBytecode {
    pub name: String,
    pub unit: String,
    pub arity: usize,
    /// One name per local slot; parameters come first.
    pub local_names: Vec<String>,
    pub code: Vec<Instruction>,
    /// Source line of each instruction, parallel to `code`.
    pub lines: Vec<u32>,
}

impl FunctionBytecode {
    /// `unit.function`, the name scope patterns are matched against.
    pub fn qualified_name(&self) -> String {
        format!("{}.{}", self.unit, self.name)
    }

    pub fn line_at(&self, index: usize) -> u32 {
        self.lines
            .get(index)
            .or(self.lines.last())
            .copied()
            .unwrap_or(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum CaptureKind {
    Const,
    LocalRead,
    FieldRead,
    CallResult,
}

impl CaptureKind {
    pub fn name(self) -> &'static str {
        match self {
            CaptureKind::Const => "Const",
            CaptureKind::LocalRead => "LocalRead",
            CaptureKind::FieldRead => "FieldRead",
            CaptureKind::CallResult => "CallResult",
        }
    }

    pub fn from_name(s: &str) -> Option<CaptureKind> {
        [
            CaptureKind::Const,
            CaptureKind::LocalRead,
            CaptureKind::FieldRead,
            CaptureKind::CallResult,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }

    /// The capture kind of a value-producing instruction, if it has one.
    pub fn of_instruction(instr: &Instruction) -> Option<CaptureKind> {
        match instr {
            Instruction::PushConst(_) => Some(CaptureKind::Const),
            Instruction::LoadLocal(_) => Some(CaptureKind::LocalRead),
            Instruction::LoadField(_) => Some(CaptureKind::FieldRead),
            Instruction::Call(_) => Some(CaptureKind::CallResult),
            Instruction::CallBuiltin(b) if b.pushes_value() => Some(CaptureKind::CallResult),
            Instruction::BinOp(op) if op.may_yield_string() => Some(CaptureKind::CallResult),
            _ => None,
        }
    }
}

impl fmt::Display for CaptureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A static location whose pushed string value is observed at runtime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureSite {
    pub id: SiteId,
    pub function: String,
    pub unit: String,
    /// Index of the producing instruction. Before instrumentation this is an
    /// index into the original code; in an instrumented image it indexes the
    /// instrumented code, where the `Capture` follows at `instr_index + 1`.
    pub instr_index: u32,
    pub line: u32,
    pub kind: CaptureKind,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ImageError {
    #[error("unknown capture site {0}")]
    UnknownSite(SiteId),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramImage {
    pub functions: Vec<FunctionBytecode>,
    pub constants: Vec<Constant>,
    pub capture_sites: Vec<CaptureSite>,
    pub entry: String,
    /// Scope pattern the image was instrumented with; `None` for a plain image.
    pub instrumented_scope: Option<String>,
}

impl ProgramImage {
    pub fn is_instrumented(&self) -> bool {
        self.instrumented_scope.is_some()
    }

    pub fn function(&self, id: FuncId) -> &FunctionBytecode {
        &self.functions[id as usize]
    }

    pub fn function_id(&self, name: &str) -> Option<FuncId> {
        self.functions
            .iter()
            .position(|f| f.name == name)
            .map(|i| i as FuncId)
    }

    pub fn entry_id(&self) -> Result<FuncId, ImageError> {
        self.function_id(&self.entry)
            .ok_or_else(|| ImageError::UnknownFunction(self.entry.clone()))
    }

    pub fn site_lookup(&self, id: SiteId) -> Result<&CaptureSite, ImageError> {
        self.capture_sites
            .get(id as usize)
            .ok_or(ImageError::UnknownSite(id))
    }

    pub fn units(&self) -> Vec<&str> {
        let mut units: Vec<&str> = Vec::new();
        for f in &self.functions {
            if !units.contains(&f.unit.as_str()) {
                units.push(&f.unit);
            }
        }
        units
    }
}

/// Free-function form of [`ProgramImage::site_lookup`].
pub fn site_lookup(image: &ProgramImage, id: SiteId) -> Result<&CaptureSite, ImageError> {
    image.site_lookup(id)
}
