//! Inserts `Capture` opcodes after string-producing instructions.
//!
//! A site is any instruction of a capture kind (constant push, local read,
//! field read, call or `+`) whose pushed value may be a string. Whether it
//! may be a string is decided by [`types::may_yield_string`]; sites that turn
//! out to hold non-strings at runtime are ignored by the VM.

mod scope;
mod types;

pub use scope::ScopePattern;

use crate::bytecode::{
    verify_image, CaptureKind, CaptureSite, FuncId, Instruction, ProgramImage, SiteId, VerifyError,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InstrumentError {
    #[error("image is already instrumented (scope `{0}`)")]
    AlreadyInstrumented(String),
    #[error("scope pattern is empty")]
    EmptyScope,
    #[error("instrumented image failed verification: {0}")]
    Verify(#[from] VerifyError),
}

/// Capture sites of an uninstrumented image, in function and code order.
/// `instr_index` refers to the uninstrumented code.
pub fn enumerate_sites(
    image: &ProgramImage,
    scope: &ScopePattern,
) -> Result<Vec<CaptureSite>, InstrumentError> {
    if let Some(s) = &image.instrumented_scope {
        return Err(InstrumentError::AlreadyInstrumented(s.clone()));
    }
    let mut sites = Vec::new();
    for (id, func) in image.functions.iter().enumerate() {
        if !scope.matches(&func.unit, &func.name) {
            continue;
        }
        let maybe_str = types::may_yield_string(image, id as FuncId);
        for (index, instr) in func.code.iter().enumerate() {
            let Some(kind) = CaptureKind::of_instruction(instr) else {
                continue;
            };
            if !maybe_str[index] {
                continue;
            }
            sites.push(CaptureSite {
                id: sites.len() as SiteId,
                function: func.name.clone(),
                unit: func.unit.clone(),
                instr_index: index as u32,
                line: func.line_at(index),
                kind,
            });
        }
    }
    Ok(sites)
}

/// Returns a copy of `image` with a `Capture` after every enumerated site.
/// Jump targets and line tables are rebuilt so that every jump still lands
/// on the same original instruction.
pub fn instrument(
    image: &ProgramImage,
    scope: &ScopePattern,
) -> Result<ProgramImage, InstrumentError> {
    let sites = enumerate_sites(image, scope)?;
    let mut out = image.clone();
    out.instrumented_scope = Some(scope.as_str().to_string());
    out.capture_sites = Vec::with_capacity(sites.len());

    let mut pending = sites.into_iter().peekable();
    for func in out.functions.iter_mut() {
        let old_code = std::mem::take(&mut func.code);
        let old_lines = std::mem::take(&mut func.lines);
        // new index of every original instruction
        let mut remap = Vec::with_capacity(old_code.len());
        let mut local_sites = Vec::new();
        for index in 0..old_code.len() {
            remap.push((index + local_sites.len()) as u32);
            let here = pending.peek().is_some_and(|s| {
                s.function == func.name && s.unit == func.unit && s.instr_index as usize == index
            });
            if here {
                let mut site = pending.next().expect("peeked");
                site.id = out.capture_sites.len() as SiteId;
                site.instr_index = remap[index];
                local_sites.push((index, site.id));
                out.capture_sites.push(site);
            }
        }
        let mut local_sites = local_sites.into_iter().peekable();
        for (index, (mut instr, line)) in old_code.into_iter().zip(old_lines).enumerate() {
            if let Some(t) = instr.jump_target_mut() {
                *t = remap[*t as usize];
            }
            func.code.push(instr);
            func.lines.push(line);
            if let Some((_, id)) = local_sites.next_if(|&(at, _)| at == index) {
                func.code.push(Instruction::Capture(id));
                func.lines.push(line);
            }
        }
    }
    verify_image(&out)?;
    Ok(out)
}
