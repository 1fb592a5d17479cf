use std::collections::HashMap;

use super::ast::{BinaryOp, Expr, ExprKind, FuncDecl, Literal, Program, Stmt, StmtKind};
use super::LangError;
use crate::bytecode::{
    BinOp, Builtin, ConstId, Constant, FuncId, FunctionBytecode, Instruction, ProgramImage,
};

pub const ENTRY_POINT: &str = "main";

/// Compiles a single-unit program.
pub fn compile(program: &Program) -> Result<ProgramImage, LangError> {
    compile_units(std::slice::from_ref(program))
}

/// Compiles and links several units into one image. Function names share a
/// single namespace across units; exactly one unit must define `main`.
pub fn compile_units(units: &[Program]) -> Result<ProgramImage, LangError> {
    let mut signatures: HashMap<&str, (FuncId, usize)> = HashMap::new();
    let mut decls: Vec<(&str, &FuncDecl)> = Vec::new();
    for unit in units {
        for decl in &unit.functions {
            if Builtin::from_name(&decl.name).is_some()
                || signatures.contains_key(decl.name.as_str())
            {
                return Err(LangError::DuplicateFunction {
                    name: decl.name.clone(),
                    line: decl.line,
                });
            }
            signatures.insert(&decl.name, (decls.len() as FuncId, decl.params.len()));
            decls.push((&unit.unit, decl));
        }
    }
    match signatures.get(ENTRY_POINT) {
        None => return Err(LangError::MissingMain),
        Some(&(id, arity)) if arity != 0 => {
            return Err(LangError::ArityMismatch {
                name: ENTRY_POINT.into(),
                expected: 0,
                found: arity,
                line: decls[id as usize].1.line,
            })
        }
        Some(_) => {}
    }

    let mut pool = ConstPool::default();
    let mut functions = Vec::with_capacity(decls.len());
    for (unit, decl) in decls {
        let mut fc = FunctionCompiler {
            signatures: &signatures,
            pool: &mut pool,
            code: Vec::new(),
            lines: Vec::new(),
            local_names: decl.params.clone(),
            scopes: vec![decl
                .params
                .iter()
                .enumerate()
                .map(|(i, p)| (p.clone(), i as u16))
                .collect()],
            last_line: decl.line,
        };
        fc.block(&decl.body)?;
        // implicit `return null`, attributed to the last statement's line so
        // that stepping off the final line leaves the function
        let line = fc.last_line;
        let null = fc.pool.intern(Constant::Null);
        fc.emit(Instruction::PushConst(null), line);
        fc.emit(Instruction::Return, line);
        functions.push(FunctionBytecode {
            name: decl.name.clone(),
            unit: unit.to_string(),
            arity: decl.params.len(),
            local_names: fc.local_names,
            code: fc.code,
            lines: fc.lines,
        });
    }
    Ok(ProgramImage {
        functions,
        constants: pool.constants,
        capture_sites: Vec::new(),
        entry: ENTRY_POINT.into(),
        instrumented_scope: None,
    })
}

#[derive(Default)]
struct ConstPool {
    constants: Vec<Constant>,
    index: HashMap<Constant, ConstId>,
}

impl ConstPool {
    fn intern(&mut self, c: Constant) -> ConstId {
        if let Some(&id) = self.index.get(&c) {
            return id;
        }
        let id = self.constants.len() as ConstId;
        self.constants.push(c.clone());
        self.index.insert(c, id);
        id
    }
}

struct FunctionCompiler<'a> {
    signatures: &'a HashMap<&'a str, (FuncId, usize)>,
    pool: &'a mut ConstPool,
    code: Vec<Instruction>,
    lines: Vec<u32>,
    local_names: Vec<String>,
    scopes: Vec<HashMap<String, u16>>,
    last_line: u32,
}

impl FunctionCompiler<'_> {
    fn emit(&mut self, instr: Instruction, line: u32) -> usize {
        self.code.push(instr);
        self.lines.push(line);
        self.last_line = line;
        self.code.len() - 1
    }

    fn here(&self) -> u32 {
        self.code.len() as u32
    }

    fn patch(&mut self, at: usize, target: u32) {
        if let Some(t) = self.code[at].jump_target_mut() {
            *t = target;
        }
    }

    fn resolve(&self, name: &str, line: u32) -> Result<u16, LangError> {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name).copied())
            .ok_or_else(|| LangError::UnknownIdentifier {
                name: name.to_string(),
                line,
            })
    }

    fn declare(&mut self, name: &str, line: u32) -> Result<u16, LangError> {
        let slot = u16::try_from(self.local_names.len()).map_err(|_| LangError::Syntax {
            line,
            column: 1,
            message: "too many local variables".into(),
        })?;
        self.local_names.push(name.to_string());
        self.scopes
            .last_mut()
            .expect("function scope")
            .insert(name.to_string(), slot);
        Ok(slot)
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<(), LangError> {
        stmts.iter().try_for_each(|s| self.stmt(s))
    }

    fn scoped_block(&mut self, stmts: &[Stmt]) -> Result<(), LangError> {
        self.scopes.push(HashMap::new());
        let result = self.block(stmts);
        self.scopes.pop();
        result
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<(), LangError> {
        let line = stmt.line;
        match &stmt.kind {
            StmtKind::Let { name, value } => {
                self.expr(value)?;
                let slot = self.declare(name, line)?;
                self.emit(Instruction::StoreLocal(slot), line);
            }
            StmtKind::Assign { name, value } => {
                let slot = self.resolve(name, line)?;
                self.expr(value)?;
                self.emit(Instruction::StoreLocal(slot), line);
            }
            StmtKind::FieldAssign {
                object,
                field,
                value,
            } => {
                self.expr(object)?;
                self.expr(value)?;
                self.emit(Instruction::StoreField(field.clone()), line);
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                self.expr(cond)?;
                let to_else = self.emit(Instruction::JumpIfFalse(0), line);
                self.scoped_block(then_body)?;
                match else_body {
                    Some(else_body) => {
                        let to_end = self.emit(Instruction::Jump(0), self.last_line);
                        let else_start = self.here();
                        self.patch(to_else, else_start);
                        self.scoped_block(else_body)?;
                        let end = self.here();
                        self.patch(to_end, end);
                    }
                    None => {
                        let end = self.here();
                        self.patch(to_else, end);
                    }
                }
            }
            StmtKind::While { cond, body } => {
                let top = self.here();
                self.expr(cond)?;
                let exit = self.emit(Instruction::JumpIfFalse(0), line);
                self.scoped_block(body)?;
                self.emit(Instruction::Jump(top), line);
                let end = self.here();
                self.patch(exit, end);
            }
            StmtKind::Return(value) => {
                match value {
                    Some(v) => self.expr(v)?,
                    None => {
                        let null = self.pool.intern(Constant::Null);
                        self.emit(Instruction::PushConst(null), line);
                    }
                }
                self.emit(Instruction::Return, line);
            }
            StmtKind::Print(value) => {
                self.expr(value)?;
                self.emit(Instruction::CallBuiltin(Builtin::Print), line);
            }
            StmtKind::Block(stmts) => self.scoped_block(stmts)?,
            StmtKind::Expr(e) => {
                self.expr(e)?;
                self.emit(Instruction::Pop, line);
            }
        }
        Ok(())
    }

    fn expr(&mut self, expr: &Expr) -> Result<(), LangError> {
        let line = expr.line;
        match &expr.kind {
            ExprKind::Literal(lit) => {
                let c = match lit {
                    Literal::Str(s) => Constant::Str(s.clone()),
                    Literal::Int(i) => Constant::Int(*i),
                    Literal::Bool(b) => Constant::Bool(*b),
                    Literal::Null => Constant::Null,
                };
                let id = self.pool.intern(c);
                self.emit(Instruction::PushConst(id), line);
            }
            ExprKind::Var(name) => {
                let slot = self.resolve(name, line)?;
                self.emit(Instruction::LoadLocal(slot), line);
            }
            ExprKind::Field { object, field } => {
                self.expr(object)?;
                self.emit(Instruction::LoadField(field.clone()), line);
            }
            ExprKind::Record(fields) => {
                for (_, value) in fields {
                    self.expr(value)?;
                }
                let names = fields.iter().map(|(n, _)| n.clone()).collect();
                self.emit(Instruction::NewRecord(names), line);
            }
            ExprKind::Call { name, args } => {
                let (instr, expected) = if let Some(builtin) = Builtin::from_name(name) {
                    if !builtin.pushes_value() {
                        return Err(LangError::VoidValue {
                            name: name.clone(),
                            line,
                        });
                    }
                    (Instruction::CallBuiltin(builtin), builtin.arity())
                } else {
                    let &(id, arity) = self.signatures.get(name.as_str()).ok_or_else(|| {
                        LangError::UnknownIdentifier {
                            name: name.clone(),
                            line,
                        }
                    })?;
                    (Instruction::Call(id), arity)
                };
                if args.len() != expected {
                    return Err(LangError::ArityMismatch {
                        name: name.clone(),
                        expected,
                        found: args.len(),
                        line,
                    });
                }
                for arg in args {
                    self.expr(arg)?;
                }
                self.emit(instr, line);
            }
            ExprKind::Binary { op, lhs, rhs } => {
                self.expr(lhs)?;
                self.expr(rhs)?;
                let op = match op {
                    BinaryOp::Add if statically_string(lhs) || statically_string(rhs) => {
                        BinOp::Concat
                    }
                    BinaryOp::Add => BinOp::Add,
                    BinaryOp::Sub => BinOp::Sub,
                    BinaryOp::Mul => BinOp::Mul,
                    BinaryOp::Div => BinOp::Div,
                    BinaryOp::Rem => BinOp::Rem,
                    BinaryOp::Eq => BinOp::Eq,
                    BinaryOp::Ne => BinOp::Ne,
                    BinaryOp::Lt => BinOp::Lt,
                };
                self.emit(Instruction::BinOp(op), line);
            }
        }
        Ok(())
    }
}

/// Syntactic check for expressions that always evaluate to a string.
fn statically_string(expr: &Expr) -> bool {
    match &expr.kind {
        ExprKind::Literal(Literal::Str(_)) => true,
        ExprKind::Call { name, .. } => {
            Builtin::from_name(name).is_some_and(Builtin::returns_string)
        }
        ExprKind::Binary {
            op: BinaryOp::Add,
            lhs,
            rhs,
        } => statically_string(lhs) || statically_string(rhs),
        _ => false,
    }
}
