//! Text form of a program image.
//!
//! Instruction lines are `index<TAB>opcode<TAB>operand<TAB>line`. A full image
//! dump adds directive lines (starting with `.`) for the entry point, the
//! constant pool, the capture-site table and each function header, so that
//! [`assemble`] can rebuild an identical image.

use std::fmt::Write as _;

use super::{
    BinOp, Builtin, CaptureKind, CaptureSite, Constant, FuncId, FunctionBytecode, Instruction,
    ProgramImage,
};

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct AsmError {
    pub line: usize,
    pub message: String,
}

fn operand(image: &ProgramImage, instr: &Instruction) -> String {
    match instr {
        Instruction::PushConst(c) => image
            .constants
            .get(*c as usize)
            .map(ToString::to_string)
            .unwrap_or_else(|| format!("#{c}")),
        Instruction::LoadLocal(s) | Instruction::StoreLocal(s) => s.to_string(),
        Instruction::LoadField(f) | Instruction::StoreField(f) => f.clone(),
        Instruction::NewRecord(fields) => fields.join(","),
        Instruction::Call(f) => match image.functions.get(*f as usize) {
            Some(func) => format!("{}/{}", func.name, func.arity),
            None => format!("#{f}"),
        },
        Instruction::CallBuiltin(b) => format!("{}/{}", b.name(), b.arity()),
        Instruction::BinOp(op) => op.mnemonic().to_string(),
        Instruction::Jump(t) | Instruction::JumpIfFalse(t) => t.to_string(),
        Instruction::Return | Instruction::Pop => String::new(),
        Instruction::Capture(s) => s.to_string(),
    }
}

/// Instruction lines of one function.
pub fn disassemble_function(image: &ProgramImage, id: FuncId) -> String {
    let func = image.function(id);
    let mut out = String::new();
    for (index, instr) in func.code.iter().enumerate() {
        let _ = writeln!(
            out,
            "{index}\t{}\t{}\t{}",
            instr.mnemonic(),
            operand(image, instr),
            func.line_at(index)
        );
    }
    out
}

/// Full, reassemblable dump of an image.
pub fn disassemble(image: &ProgramImage) -> String {
    let mut out = String::new();
    let _ = writeln!(out, ".entry\t{}", image.entry);
    if let Some(scope) = &image.instrumented_scope {
        let _ = writeln!(out, ".scope\t{scope}");
    }
    for (i, c) in image.constants.iter().enumerate() {
        let _ = writeln!(out, ".const\t{i}\t{c}");
    }
    for s in &image.capture_sites {
        let _ = writeln!(
            out,
            ".site\t{}\t{}\t{}\t{}\t{}\t{}",
            s.id, s.unit, s.function, s.instr_index, s.line, s.kind
        );
    }
    for (id, func) in image.functions.iter().enumerate() {
        let _ = writeln!(
            out,
            ".function\t{}\t{}\t{}\t{}",
            func.unit,
            func.name,
            func.arity,
            func.local_names.join(",")
        );
        out.push_str(&disassemble_function(image, id as FuncId));
    }
    out
}

fn parse_literal(text: &str) -> Option<Constant> {
    match text {
        "null" => Some(Constant::Null),
        "true" => Some(Constant::Bool(true)),
        "false" => Some(Constant::Bool(false)),
        _ if text.starts_with('"') => serde_json::from_str(text).ok().map(Constant::Str),
        _ => text.parse().ok().map(Constant::Int),
    }
}

fn split_names(text: &str) -> Vec<String> {
    if text.is_empty() {
        Vec::new()
    } else {
        text.split(',').map(str::to_string).collect()
    }
}

/// Parses the output of [`disassemble`] back into an image.
pub fn assemble(text: &str) -> Result<ProgramImage, AsmError> {
    let mut image = ProgramImage {
        functions: Vec::new(),
        constants: Vec::new(),
        capture_sites: Vec::new(),
        entry: String::new(),
        instrumented_scope: None,
    };
    // Operands that name functions are resolved once all headers are known.
    let mut pending_calls: Vec<(usize, usize, String, usize)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let err = |message: String| AsmError {
            line: lineno,
            message,
        };
        if raw.is_empty() {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        let num = |i: usize| -> Result<u32, AsmError> {
            cols.get(i)
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| err(format!("expected a number in column {}", i + 1)))
        };
        let text_col = |i: usize| -> Result<&str, AsmError> {
            cols.get(i)
                .copied()
                .ok_or_else(|| err(format!("missing column {}", i + 1)))
        };
        match cols[0] {
            ".entry" => image.entry = text_col(1)?.to_string(),
            ".scope" => image.instrumented_scope = Some(text_col(1)?.to_string()),
            ".const" => {
                let lit = text_col(2)?;
                let c = parse_literal(lit).ok_or_else(|| err(format!("bad literal {lit}")))?;
                image.constants.push(c);
            }
            ".site" => {
                let kind = text_col(6)?;
                image.capture_sites.push(CaptureSite {
                    id: num(1)?,
                    unit: text_col(2)?.to_string(),
                    function: text_col(3)?.to_string(),
                    instr_index: num(4)?,
                    line: num(5)?,
                    kind: CaptureKind::from_name(kind)
                        .ok_or_else(|| err(format!("bad capture kind {kind}")))?,
                });
            }
            ".function" => image.functions.push(FunctionBytecode {
                unit: text_col(1)?.to_string(),
                name: text_col(2)?.to_string(),
                arity: num(3)? as usize,
                local_names: split_names(text_col(4)?),
                code: Vec::new(),
                lines: Vec::new(),
            }),
            _ => {
                let fi = image.functions.len();
                let func = image
                    .functions
                    .last_mut()
                    .ok_or_else(|| err("instruction outside a function".into()))?;
                let index = num(0)? as usize;
                if index != func.code.len() {
                    return Err(err(format!("expected instruction {}", func.code.len())));
                }
                let op = text_col(3).and(text_col(2))?;
                let line = num(3)?;
                let opcode = cols[1];
                let instr = match opcode {
                    "PushConst" => {
                        let c =
                            parse_literal(op).ok_or_else(|| err(format!("bad literal {op}")))?;
                        let id = image
                            .constants
                            .iter()
                            .position(|k| *k == c)
                            .ok_or_else(|| err(format!("{op} is not in the constant pool")))?;
                        Instruction::PushConst(id as u32)
                    }
                    "LoadLocal" | "StoreLocal" => {
                        let slot = op.parse().map_err(|_| err(format!("bad slot {op}")))?;
                        if opcode == "LoadLocal" {
                            Instruction::LoadLocal(slot)
                        } else {
                            Instruction::StoreLocal(slot)
                        }
                    }
                    "LoadField" => Instruction::LoadField(op.to_string()),
                    "StoreField" => Instruction::StoreField(op.to_string()),
                    "NewRecord" => Instruction::NewRecord(split_names(op)),
                    "Call" => {
                        let (name, arity) = op
                            .rsplit_once('/')
                            .and_then(|(n, a)| Some((n, a.parse().ok()?)))
                            .ok_or_else(|| err(format!("bad call operand {op}")))?;
                        pending_calls.push((fi - 1, index, name.to_string(), arity));
                        Instruction::Call(u32::MAX)
                    }
                    "CallBuiltin" => {
                        let name = op.split('/').next().unwrap_or_default();
                        Instruction::CallBuiltin(
                            Builtin::from_name(name)
                                .ok_or_else(|| err(format!("unknown builtin {op}")))?,
                        )
                    }
                    "BinOp" => Instruction::BinOp(
                        BinOp::from_mnemonic(op)
                            .ok_or_else(|| err(format!("unknown operator {op}")))?,
                    ),
                    "Jump" | "JumpIfFalse" => {
                        let t = op
                            .parse()
                            .map_err(|_| err(format!("bad jump target {op}")))?;
                        if opcode == "Jump" {
                            Instruction::Jump(t)
                        } else {
                            Instruction::JumpIfFalse(t)
                        }
                    }
                    "Return" => Instruction::Return,
                    "Pop" => Instruction::Pop,
                    "Capture" => {
                        Instruction::Capture(op.parse().map_err(|_| err(format!("bad site {op}")))?)
                    }
                    other => return Err(err(format!("unknown opcode {other}"))),
                };
                func.code.push(instr);
                func.lines.push(line);
            }
        }
    }

    for (fi, index, name, arity) in pending_calls {
        let target = image
            .functions
            .iter()
            .position(|f| f.name == name && f.arity == arity)
            .ok_or_else(|| AsmError {
                line: 0,
                message: format!("call to unknown function {name}/{arity}"),
            })?;
        image.functions[fi].code[index] = Instruction::Call(target as u32);
    }
    if image.entry.is_empty() {
        return Err(AsmError {
            line: 0,
            message: "missing .entry".into(),
        });
    }
    Ok(image)
}
