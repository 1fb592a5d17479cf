//! Conservative "may this value be a string" analysis.
//!
//! Abstract interpretation over the operand stack with a small type-set
//! lattice. Local slots are tracked flow-insensitively: a slot's type set is
//! the union of everything ever stored into it (parameters may hold anything).

use crate::bytecode::{BinOp, Builtin, Constant, FuncId, Instruction, ProgramImage};

type Ty = u8;
const STR: Ty = 1;
const INT: Ty = 2;
const BOOL: Ty = 4;
const NULL: Ty = 8;
const REC: Ty = 16;
const ANY: Ty = STR | INT | BOOL | NULL | REC;

fn const_ty(c: &Constant) -> Ty {
    match c {
        Constant::Str(_) => STR,
        Constant::Int(_) => INT,
        Constant::Bool(_) => BOOL,
        Constant::Null => NULL,
    }
}

fn plus_ty(a: Ty, b: Ty) -> Ty {
    let mut t = 0;
    if (a | b) & STR != 0 {
        t |= STR;
    }
    if a & INT != 0 && b & INT != 0 {
        t |= INT;
    }
    t
}

/// For each instruction: whether the value it pushes may be a string.
/// Instructions that push nothing map to `false`.
pub fn may_yield_string(image: &ProgramImage, id: FuncId) -> Vec<bool> {
    let func = image.function(id);
    let n = func.code.len();
    let mut slots: Vec<Ty> = (0..func.local_names.len())
        .map(|i| if i < func.arity { ANY } else { NULL })
        .collect();

    let pushed = loop {
        let mut pushed: Vec<Option<Ty>> = vec![None; n];
        let mut states: Vec<Option<Vec<Ty>>> = vec![None; n];
        let mut grew = false;
        let mut work = vec![(0usize, Vec::<Ty>::new())];
        while let Some((index, mut stack)) = work.pop() {
            if index >= n {
                continue;
            }
            match &mut states[index] {
                Some(seen) if seen.len() == stack.len() => {
                    let merged: Vec<Ty> = seen.iter().zip(&stack).map(|(a, b)| a | b).collect();
                    if merged == *seen {
                        continue;
                    }
                    *seen = merged.clone();
                    stack = merged;
                }
                // inconsistent depths never pass verification; give up on precision
                Some(_) => return vec![true; n],
                slot @ None => *slot = Some(stack.clone()),
            }
            let mut pop = |k: usize| -> Vec<Ty> { stack.split_off(stack.len().saturating_sub(k)) };
            let push: Option<Ty> = match &func.code[index] {
                Instruction::PushConst(c) => {
                    Some(image.constants.get(*c as usize).map_or(ANY, const_ty))
                }
                Instruction::LoadLocal(s) => Some(slots.get(*s as usize).copied().unwrap_or(ANY)),
                Instruction::StoreLocal(s) => {
                    let t = pop(1).first().copied().unwrap_or(ANY);
                    if let Some(slot) = slots.get_mut(*s as usize) {
                        if *slot | t != *slot {
                            *slot |= t;
                            grew = true;
                        }
                    }
                    None
                }
                Instruction::LoadField(_) => {
                    pop(1);
                    Some(ANY)
                }
                Instruction::StoreField(_) => {
                    pop(2);
                    None
                }
                Instruction::NewRecord(fields) => {
                    pop(fields.len());
                    Some(REC)
                }
                Instruction::Call(f) => {
                    pop(image.functions.get(*f as usize).map_or(0, |f| f.arity));
                    Some(ANY)
                }
                Instruction::CallBuiltin(b) => {
                    pop(b.arity());
                    match b {
                        Builtin::Print => None,
                        Builtin::Len => Some(INT),
                        _ => Some(STR),
                    }
                }
                Instruction::BinOp(op) => {
                    let args = pop(2);
                    let (a, b) = (
                        args.first().copied().unwrap_or(ANY),
                        args.get(1).copied().unwrap_or(ANY),
                    );
                    Some(match op {
                        BinOp::Add | BinOp::Concat => plus_ty(a, b),
                        BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => INT,
                        BinOp::Eq | BinOp::Ne | BinOp::Lt => BOOL,
                    })
                }
                Instruction::JumpIfFalse(_) | Instruction::Pop | Instruction::Return => {
                    pop(1);
                    None
                }
                Instruction::Jump(_) | Instruction::Capture(_) => None,
            };
            if let Some(t) = push {
                stack.push(t);
                pushed[index] = Some(pushed[index].unwrap_or(0) | t);
            }
            match &func.code[index] {
                Instruction::Return => {}
                Instruction::Jump(t) => work.push((*t as usize, stack)),
                Instruction::JumpIfFalse(t) => {
                    work.push((*t as usize, stack.clone()));
                    work.push((index + 1, stack));
                }
                _ => work.push((index + 1, stack)),
            }
        }
        if !grew {
            break pushed;
        }
    };

    func.code
        .iter()
        .zip(pushed)
        .map(|(instr, ty)| match ty {
            Some(t) => t & STR != 0,
            // unreachable: fall back to what the opcode alone says
            None => match instr {
                Instruction::PushConst(c) => {
                    matches!(image.constants.get(*c as usize), Some(Constant::Str(_)))
                }
                Instruction::CallBuiltin(b) => b.returns_string(),
                Instruction::BinOp(op) => op.may_yield_string(),
                Instruction::LoadLocal(_) | Instruction::LoadField(_) | Instruction::Call(_) => {
                    true
                }
                _ => false,
            },
        })
        .collect()
}
