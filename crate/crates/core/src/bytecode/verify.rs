use super::{FuncId, Instruction, ProgramImage};

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum VerifyError {
    #[error("{function}: line table has {lines} entries for {code} instructions")]
    LineTable {
        function: String,
        lines: usize,
        code: usize,
    },
    #[error("{function}@{index}: {what} operand {operand} out of range")]
    Operand {
        function: String,
        index: usize,
        what: &'static str,
        operand: u32,
    },
    #[error("{function}@{index}: operand stack underflow")]
    Underflow { function: String, index: usize },
    #[error("{function}@{index}: stack depth {found} disagrees with {expected} on another path")]
    Inconsistent {
        function: String,
        index: usize,
        expected: u32,
        found: u32,
    },
    #[error("{function}@{index}: return with stack depth {depth}")]
    ReturnDepth {
        function: String,
        index: usize,
        depth: u32,
    },
    #[error("{function}: control falls off the end of the code")]
    FallsOffEnd { function: String },
    #[error("capture site {site} does not match the code: {reason}")]
    SiteMismatch { site: u32, reason: String },
}

/// (values popped, values pushed) for one instruction.
fn stack_effect(image: &ProgramImage, instr: &Instruction) -> (u32, u32) {
    match instr {
        Instruction::PushConst(_) | Instruction::LoadLocal(_) => (0, 1),
        Instruction::StoreLocal(_) | Instruction::Pop | Instruction::JumpIfFalse(_) => (1, 0),
        Instruction::LoadField(_) => (1, 1),
        Instruction::StoreField(_) => (2, 0),
        Instruction::NewRecord(fields) => (fields.len() as u32, 1),
        Instruction::Call(f) => {
            let arity = image
                .functions
                .get(*f as usize)
                .map(|f| f.arity as u32)
                .unwrap_or(0);
            (arity, 1)
        }
        Instruction::CallBuiltin(b) => (b.arity() as u32, u32::from(b.pushes_value())),
        Instruction::BinOp(_) => (2, 1),
        Instruction::Jump(_) => (0, 0),
        Instruction::Return => (1, 0),
        // needs a value to look at but leaves it in place
        Instruction::Capture(_) => (1, 1),
    }
}

/// Checks operands and runs an abstract interpretation of the operand stack.
/// Returns the stack depth before each instruction (`None` when unreachable).
pub fn verify_function(image: &ProgramImage, id: FuncId) -> Result<Vec<Option<u32>>, VerifyError> {
    let func = image.function(id);
    let name = || func.qualified_name();
    if func.lines.len() != func.code.len() {
        return Err(VerifyError::LineTable {
            function: name(),
            lines: func.lines.len(),
            code: func.code.len(),
        });
    }
    let n = func.code.len();
    for (index, instr) in func.code.iter().enumerate() {
        let bad = |what, operand| VerifyError::Operand {
            function: name(),
            index,
            what,
            operand,
        };
        match instr {
            Instruction::PushConst(c) if *c as usize >= image.constants.len() => {
                return Err(bad("constant", *c))
            }
            Instruction::LoadLocal(s) | Instruction::StoreLocal(s)
                if *s as usize >= func.local_names.len() =>
            {
                return Err(bad("local", u32::from(*s)))
            }
            Instruction::Call(f) if *f as usize >= image.functions.len() => {
                return Err(bad("function", *f))
            }
            Instruction::Jump(t) | Instruction::JumpIfFalse(t) if *t as usize >= n => {
                return Err(bad("jump target", *t))
            }
            Instruction::Capture(s) if *s as usize >= image.capture_sites.len() => {
                return Err(bad("capture site", *s))
            }
            _ => {}
        }
    }

    let mut depth: Vec<Option<u32>> = vec![None; n];
    if n == 0 {
        return Err(VerifyError::FallsOffEnd { function: name() });
    }
    let mut work = vec![(0usize, 0u32)];
    while let Some((index, d)) = work.pop() {
        if index >= n {
            return Err(VerifyError::FallsOffEnd { function: name() });
        }
        match depth[index] {
            Some(seen) if seen == d => continue,
            Some(seen) => {
                return Err(VerifyError::Inconsistent {
                    function: name(),
                    index,
                    expected: seen,
                    found: d,
                })
            }
            None => depth[index] = Some(d),
        }
        let instr = &func.code[index];
        let (pops, pushes) = stack_effect(image, instr);
        if d < pops {
            return Err(VerifyError::Underflow {
                function: name(),
                index,
            });
        }
        let after = d - pops + pushes;
        match instr {
            Instruction::Return => {
                if d != 1 {
                    return Err(VerifyError::ReturnDepth {
                        function: name(),
                        index,
                        depth: d,
                    });
                }
            }
            Instruction::Jump(t) => work.push((*t as usize, after)),
            Instruction::JumpIfFalse(t) => {
                work.push((*t as usize, after));
                work.push((index + 1, after));
            }
            _ => work.push((index + 1, after)),
        }
    }
    Ok(depth)
}

/// Verifies every function plus the site table / `Capture` bijection.
pub fn verify_image(image: &ProgramImage) -> Result<(), VerifyError> {
    for id in 0..image.functions.len() {
        verify_function(image, id as FuncId)?;
    }
    let mut seen = vec![false; image.capture_sites.len()];
    for func in &image.functions {
        for (index, instr) in func.code.iter().enumerate() {
            let Instruction::Capture(site_id) = instr else {
                continue;
            };
            let mismatch = |reason: String| VerifyError::SiteMismatch {
                site: *site_id,
                reason,
            };
            let site = &image.capture_sites[*site_id as usize];
            if std::mem::replace(&mut seen[*site_id as usize], true) {
                return Err(mismatch("more than one Capture opcode".into()));
            }
            if site.function != func.name || site.unit != func.unit {
                return Err(mismatch(format!(
                    "site belongs to {}.{}",
                    site.unit, site.function
                )));
            }
            if index == 0 || site.instr_index as usize != index - 1 {
                return Err(mismatch(format!(
                    "Capture at {index} does not follow instruction {}",
                    site.instr_index
                )));
            }
            let producer = &func.code[index - 1];
            if super::CaptureKind::of_instruction(producer) != Some(site.kind) {
                return Err(mismatch(format!(
                    "kind {} does not fit {}",
                    site.kind,
                    producer.mnemonic()
                )));
            }
        }
    }
    for (id, site) in image.capture_sites.iter().enumerate() {
        if site.id as usize != id {
            return Err(VerifyError::SiteMismatch {
                site: site.id,
                reason: format!("stored at position {id}"),
            });
        }
        if !seen[id] {
            return Err(VerifyError::SiteMismatch {
                site: site.id,
                reason: "no Capture opcode".into(),
            });
        }
    }
    Ok(())
}
