//! Operand-stack virtual machine.
//!
//! The VM executes a [`ProgramImage`] and reports to an [`ExecHooks`]
//! implementation: every `Capture` opcode whose operand is a string is handed
//! to [`ExecHooks::capture`], and [`ExecHooks::poll`] is consulted at every
//! `Capture` and every `poll_interval` instructions. Either hook may ask the
//! VM to pause; a paused VM can be resumed, stepped or inspected.

mod value;

use std::collections::VecDeque;
use std::fmt;
use std::fmt::Write as _;
use std::rc::Rc;
use std::sync::Arc;

pub use value::{display, render, Heap, Record, RecordRef, Value};

use crate::bytecode::{BinOp, Builtin, FuncId, ImageError, Instruction, ProgramImage, SiteId};

pub const DEFAULT_POLL_INTERVAL: u32 = 1000;
pub const MAX_CALL_DEPTH: usize = 10_000;

/// Lines returned by successive `readline()` calls; exhausted input yields "".
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InputFixture {
    lines: VecDeque<String>,
}

impl InputFixture {
    pub fn from_text(text: &str) -> Self {
        InputFixture {
            lines: text.lines().map(str::to_string).collect(),
        }
    }

    pub fn next_line(&mut self) -> String {
        self.lines.pop_front().unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Pause,
    /// Abandon the program.
    Halt,
}

pub trait ExecHooks {
    /// A `Capture` opcode saw a string on top of the stack.
    fn capture(&mut self, site: SiteId, value: &str) -> Control;
    /// Control point: drain pending commands.
    fn poll(&mut self) -> Control;
    /// Text written by the program, verbatim.
    fn output(&mut self, text: &str);
}

/// Hooks that never pause; output goes to a string.
#[derive(Debug, Default)]
pub struct CollectOutput {
    pub stdout: String,
}

impl ExecHooks for CollectOutput {
    fn capture(&mut self, _: SiteId, _: &str) -> Control {
        Control::Continue
    }
    fn poll(&mut self) -> Control {
        Control::Continue
    }
    fn output(&mut self, text: &str) {
        self.stdout.push_str(text);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VmStatus {
    Ready,
    Running,
    Paused,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Continue,
    StepIn,
    StepOver,
    StepOut,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FaultKind {
    Type(String),
    DivisionByZero,
    NullField(String),
    MissingField(String),
    Overflow,
    StackOverflow,
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultKind::Type(msg) => write!(f, "type error: {msg}"),
            FaultKind::DivisionByZero => f.write_str("division by zero"),
            FaultKind::NullField(field) => write!(f, "field `{field}` accessed on null"),
            FaultKind::MissingField(field) => write!(f, "record has no field `{field}`"),
            FaultKind::Overflow => f.write_str("integer overflow"),
            FaultKind::StackOverflow => f.write_str("call stack overflow"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind} in {function} at line {line}")]
pub struct RuntimeFault {
    pub kind: FaultKind,
    pub function: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VmError {
    #[error("program is not paused")]
    NotPaused,
    #[error("program has finished")]
    Finished,
    #[error("program faulted: {0}")]
    Faulted(RuntimeFault),
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauseCause {
    /// The capture hook asked for a pause at this site.
    Capture(SiteId),
    /// The poll hook asked for a pause.
    Poll,
    /// A step request completed.
    Step,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stop {
    Finished,
    Paused(PauseCause),
    Fault(RuntimeFault),
    Halted,
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub func: FuncId,
    /// Next instruction to execute. Caller frames point past their `Call`.
    pub ip: usize,
    pub locals: Vec<Value>,
    pub stack: Vec<Value>,
}

/// One entry of a stack snapshot, top frame first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameInfo {
    pub function: String,
    pub unit: String,
    pub line: u32,
    pub locals: Vec<(String, String)>,
}

pub struct Vm {
    image: Arc<ProgramImage>,
    frames: Vec<Frame>,
    heap: Heap,
    status: VmStatus,
    input: InputFixture,
    poll_interval: u32,
    budget: u32,
    /// Set when paused by the capture hook: the `Capture` at the current ip
    /// has already been reported and is passed over on resume.
    capture_reported: bool,
    fault: Option<RuntimeFault>,
    /// The constant pool as values, so pushing a string shares one allocation.
    constants: Vec<Value>,
    /// Reused buffer for building new strings.
    scratch: String,
}

type Exec<T> = Result<T, FaultKind>;

impl Vm {
    pub fn new(image: Arc<ProgramImage>, input: InputFixture) -> Result<Self, VmError> {
        let entry = image.entry_id()?;
        let locals = vec![Value::Null; image.function(entry).local_names.len()];
        let constants = image.constants.iter().map(Value::from).collect();
        Ok(Vm {
            frames: vec![Frame {
                func: entry,
                ip: 0,
                locals,
                stack: Vec::new(),
            }],
            image,
            heap: Heap::default(),
            status: VmStatus::Ready,
            input,
            poll_interval: DEFAULT_POLL_INTERVAL,
            budget: DEFAULT_POLL_INTERVAL,
            capture_reported: false,
            fault: None,
            constants,
            scratch: String::new(),
        })
    }

    pub fn with_poll_interval(mut self, interval: u32) -> Self {
        self.poll_interval = interval.max(1);
        self.budget = self.poll_interval;
        self
    }

    pub fn status(&self) -> VmStatus {
        self.status
    }

    pub fn image(&self) -> &Arc<ProgramImage> {
        &self.image
    }

    pub fn fault(&self) -> Option<&RuntimeFault> {
        self.fault.as_ref()
    }

    pub fn heap(&self) -> &Heap {
        &self.heap
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    /// Source line of a frame (0 = innermost).
    pub fn frame_line(&self, depth_from_top: usize) -> Option<u32> {
        let idx = self.frames.len().checked_sub(depth_from_top + 1)?;
        let frame = &self.frames[idx];
        let func = self.image.function(frame.func);
        let ip = if depth_from_top == 0 {
            frame.ip
        } else {
            frame.ip.saturating_sub(1)
        };
        Some(func.line_at(ip))
    }

    /// Moves a VM that has not started yet into `Paused` at its first
    /// instruction, so it can be inspected and stepped.
    pub fn pause_at_entry(&mut self) -> Result<(), VmError> {
        match self.status {
            VmStatus::Ready => {
                self.status = VmStatus::Paused;
                Ok(())
            }
            VmStatus::Paused => Ok(()),
            VmStatus::Running => Err(VmError::NotPaused),
            VmStatus::Done => Err(VmError::Finished),
        }
    }

    /// Runs until the program finishes, faults or a hook pauses it.
    pub fn run<H: ExecHooks>(&mut self, hooks: &mut H) -> Result<Stop, VmError> {
        self.resume(RunMode::Continue, hooks)
    }

    pub fn step_in<H: ExecHooks>(&mut self, hooks: &mut H) -> Result<Stop, VmError> {
        self.step(RunMode::StepIn, hooks)
    }

    pub fn step_over<H: ExecHooks>(&mut self, hooks: &mut H) -> Result<Stop, VmError> {
        self.step(RunMode::StepOver, hooks)
    }

    pub fn step_out<H: ExecHooks>(&mut self, hooks: &mut H) -> Result<Stop, VmError> {
        self.step(RunMode::StepOut, hooks)
    }

    fn step<H: ExecHooks>(&mut self, mode: RunMode, hooks: &mut H) -> Result<Stop, VmError> {
        if self.status != VmStatus::Paused {
            return Err(VmError::NotPaused);
        }
        self.resume(mode, hooks)
    }

    /// Continues execution in the given mode. Allowed from `Ready` and
    /// `Paused`.
    pub fn resume<H: ExecHooks>(&mut self, mode: RunMode, hooks: &mut H) -> Result<Stop, VmError> {
        if let Some(fault) = &self.fault {
            return Err(VmError::Faulted(fault.clone()));
        }
        match self.status {
            VmStatus::Done => return Err(VmError::Finished),
            VmStatus::Running => return Err(VmError::NotPaused),
            VmStatus::Ready | VmStatus::Paused => {}
        }
        self.status = VmStatus::Running;
        let stop = self.execute(mode, hooks);
        self.status = match &stop {
            Stop::Finished | Stop::Halted => {
                self.frames.clear();
                VmStatus::Done
            }
            Stop::Paused(_) | Stop::Fault(_) => VmStatus::Paused,
        };
        if let Stop::Fault(f) = &stop {
            self.fault = Some(f.clone());
        }
        Ok(stop)
    }

    /// Frames top to bottom with rendered locals.
    pub fn snapshot_stack(&self) -> Result<Vec<FrameInfo>, VmError> {
        if self.status != VmStatus::Paused {
            return Err(VmError::NotPaused);
        }
        Ok(self
            .frames
            .iter()
            .rev()
            .enumerate()
            .map(|(depth, frame)| {
                let func = self.image.function(frame.func);
                FrameInfo {
                    function: func.name.clone(),
                    unit: func.unit.clone(),
                    line: self.frame_line(depth).unwrap_or(1),
                    locals: func
                        .local_names
                        .iter()
                        .zip(&frame.locals)
                        .map(|(n, v)| (n.clone(), render(v, &self.heap)))
                        .collect(),
                }
            })
            .collect())
    }

    fn fault_here(&self, kind: FaultKind) -> RuntimeFault {
        let frame = self.frames.last().expect("faulting frame");
        let func = self.image.function(frame.func);
        RuntimeFault {
            kind,
            function: func.name.clone(),
            line: func.line_at(frame.ip),
        }
    }

    fn step_done(&self, mode: RunMode, start_depth: usize, start_line: u32) -> bool {
        let depth = self.frames.len();
        match mode {
            RunMode::Continue => false,
            RunMode::StepOut => depth < start_depth,
            RunMode::StepOver if depth > start_depth => false,
            RunMode::StepOver | RunMode::StepIn => {
                depth != start_depth || self.frame_line(0) != Some(start_line)
            }
        }
    }

    fn execute<H: ExecHooks>(&mut self, mode: RunMode, hooks: &mut H) -> Stop {
        let image = Arc::clone(&self.image);
        let start_depth = self.frames.len();
        let start_line = self.frame_line(0).unwrap_or(0);
        let stepping = mode != RunMode::Continue;
        let mut moved = false;
        if std::mem::take(&mut self.capture_reported) {
            // the Capture at ip was reported before the pause
            self.frames.last_mut().expect("paused frame").ip += 1;
            moved = true;
        }
        let mut code: &[Instruction] = match self.frames.last() {
            Some(f) => &image.functions[f.func as usize].code,
            None => return Stop::Finished,
        };
        loop {
            if stepping && moved && self.step_done(mode, start_depth, start_line) {
                return Stop::Paused(PauseCause::Step);
            }
            moved = true;

            self.budget -= 1;
            if self.budget == 0 {
                self.budget = self.poll_interval;
                match hooks.poll() {
                    Control::Continue => {}
                    Control::Pause => return Stop::Paused(PauseCause::Poll),
                    Control::Halt => return Stop::Halted,
                }
            }

            let frame = self.frames.last_mut().expect("running frame");
            let instr = &code[frame.ip];
            let result: Exec<Option<Stop>> = match instr {
                Instruction::PushConst(c) => {
                    frame.stack.push(self.constants[*c as usize].clone());
                    frame.ip += 1;
                    Ok(None)
                }
                Instruction::LoadLocal(slot) => {
                    let v = frame.locals[*slot as usize].clone();
                    frame.stack.push(v);
                    frame.ip += 1;
                    Ok(None)
                }
                Instruction::StoreLocal(slot) => {
                    let v = frame.stack.pop().expect("verified stack");
                    frame.locals[*slot as usize] = v;
                    frame.ip += 1;
                    Ok(None)
                }
                Instruction::Pop => {
                    frame.stack.pop();
                    frame.ip += 1;
                    Ok(None)
                }
                Instruction::Jump(t) => {
                    frame.ip = *t as usize;
                    Ok(None)
                }
                Instruction::JumpIfFalse(t) => match frame.stack.last() {
                    Some(Value::Bool(b)) => {
                        let b = *b;
                        frame.stack.pop();
                        frame.ip = if b { frame.ip + 1 } else { *t as usize };
                        Ok(None)
                    }
                    other => Err(FaultKind::Type(format!(
                        "condition must be a bool, not {}",
                        other.map_or("nothing", Value::type_name)
                    ))),
                },
                Instruction::BinOp(op) => {
                    let n = frame.stack.len();
                    match binop(
                        *op,
                        &frame.stack[n - 2],
                        &frame.stack[n - 1],
                        &mut self.scratch,
                    ) {
                        Ok(v) => {
                            frame.stack.truncate(n - 2);
                            frame.stack.push(v);
                            frame.ip += 1;
                            Ok(None)
                        }
                        Err(e) => Err(e),
                    }
                }
                Instruction::Capture(site) => {
                    let site = *site;
                    match hooks.poll() {
                        Control::Continue => {}
                        Control::Pause => return Stop::Paused(PauseCause::Poll),
                        Control::Halt => return Stop::Halted,
                    }
                    let frame = self.frames.last_mut().expect("running frame");
                    let verdict = match frame.stack.last() {
                        Some(Value::Str(s)) => hooks.capture(site, s),
                        _ => Control::Continue,
                    };
                    match verdict {
                        Control::Continue => {
                            frame.ip += 1;
                            Ok(None)
                        }
                        Control::Pause => {
                            self.capture_reported = true;
                            return Stop::Paused(PauseCause::Capture(site));
                        }
                        Control::Halt => return Stop::Halted,
                    }
                }
                Instruction::LoadField(_)
                | Instruction::StoreField(_)
                | Instruction::NewRecord(_)
                | Instruction::CallBuiltin(_) => self.exec_slow(&image, hooks),
                Instruction::Call(_) | Instruction::Return => {
                    let r = self.exec_slow(&image, hooks);
                    if let Some(f) = self.frames.last() {
                        code = &image.functions[f.func as usize].code;
                    }
                    r
                }
            };
            match result {
                Ok(None) => {}
                Ok(Some(stop)) => return stop,
                Err(kind) => return Stop::Fault(self.fault_here(kind)),
            }
        }
    }

    /// Instructions that touch the heap, the frame stack or the outside world.
    fn exec_slow<H: ExecHooks>(
        &mut self,
        image: &ProgramImage,
        hooks: &mut H,
    ) -> Exec<Option<Stop>> {
        let depth = self.frames.len();
        let frame = self.frames.last_mut().expect("running frame");
        let instr = &image.functions[frame.func as usize].code[frame.ip];
        match instr {
            Instruction::LoadField(field) => {
                let value = match frame.stack.last() {
                    Some(Value::Record(r)) => self
                        .heap
                        .get(*r)
                        .get(field)
                        .cloned()
                        .ok_or_else(|| FaultKind::MissingField(field.clone()))?,
                    Some(Value::Null) => return Err(FaultKind::NullField(field.clone())),
                    other => {
                        return Err(FaultKind::Type(format!(
                            "field `{field}` read from {}",
                            other.map_or("nothing", Value::type_name)
                        )))
                    }
                };
                *frame.stack.last_mut().expect("verified stack") = value;
                frame.ip += 1;
            }
            Instruction::StoreField(field) => {
                let n = frame.stack.len();
                match &frame.stack[n - 2] {
                    Value::Record(r) => {
                        let r = *r;
                        let value = frame.stack.pop().expect("verified stack");
                        frame.stack.pop();
                        self.heap.get_mut(r).set(field, value);
                    }
                    Value::Null => return Err(FaultKind::NullField(field.clone())),
                    other => {
                        return Err(FaultKind::Type(format!(
                            "field `{field}` assigned on {}",
                            other.type_name()
                        )))
                    }
                }
                frame.ip += 1;
            }
            Instruction::NewRecord(names) => {
                let values = frame.stack.split_off(frame.stack.len() - names.len());
                let record = Record {
                    fields: names.iter().cloned().zip(values).collect(),
                };
                let r = self.heap.alloc(record);
                frame.stack.push(Value::Record(r));
                frame.ip += 1;
            }
            Instruction::Call(callee) => {
                if depth >= MAX_CALL_DEPTH {
                    return Err(FaultKind::StackOverflow);
                }
                let target = image.function(*callee);
                let args = frame.stack.split_off(frame.stack.len() - target.arity);
                frame.ip += 1;
                let mut locals = args;
                locals.resize(target.local_names.len(), Value::Null);
                self.frames.push(Frame {
                    func: *callee,
                    ip: 0,
                    locals,
                    stack: Vec::new(),
                });
            }
            Instruction::CallBuiltin(b) => {
                let b = *b;
                let result = match b {
                    Builtin::Readline => Some(Value::from(self.input.next_line())),
                    Builtin::Print => {
                        let mut text =
                            display(frame.stack.last().expect("verified stack"), &self.heap);
                        text.push('\n');
                        frame.stack.pop();
                        hooks.output(&text);
                        None
                    }
                    Builtin::Str => {
                        let text = display(frame.stack.last().expect("verified stack"), &self.heap);
                        frame.stack.pop();
                        Some(Value::from(text))
                    }
                    Builtin::Upper | Builtin::Lower | Builtin::Len => {
                        let arg = frame.stack.last().expect("verified stack");
                        let Value::Str(s) = arg else {
                            return Err(FaultKind::Type(format!(
                                "{}() expects a string, not {}",
                                b.name(),
                                arg.type_name()
                            )));
                        };
                        let v = match b {
                            Builtin::Upper if s.is_ascii() => build_str(&mut self.scratch, |buf| {
                                buf.push_str(s);
                                buf.make_ascii_uppercase();
                            }),
                            Builtin::Lower if s.is_ascii() => build_str(&mut self.scratch, |buf| {
                                buf.push_str(s);
                                buf.make_ascii_lowercase();
                            }),
                            Builtin::Upper => Value::from(s.to_uppercase()),
                            Builtin::Lower => Value::from(s.to_lowercase()),
                            _ => Value::Int(s.chars().count() as i64),
                        };
                        frame.stack.pop();
                        Some(v)
                    }
                };
                if let Some(v) = result {
                    frame.stack.push(v);
                }
                frame.ip += 1;
            }
            Instruction::Return => {
                let value = frame.stack.pop().expect("verified stack");
                self.frames.pop();
                match self.frames.last_mut() {
                    Some(caller) => caller.stack.push(value),
                    None => return Ok(Some(Stop::Finished)),
                }
            }
            _ => unreachable!("fast-path instruction routed to exec_slow"),
        }
        Ok(None)
    }
}

/// A string value built in `scratch`, so the only allocation is the final one.
fn build_str(scratch: &mut String, build: impl FnOnce(&mut String)) -> Value {
    scratch.clear();
    build(scratch);
    Value::Str(Rc::from(scratch.as_str()))
}

fn binop(op: BinOp, a: &Value, b: &Value, scratch: &mut String) -> Exec<Value> {
    use Value::{Bool, Int, Str};
    let type_error = || {
        FaultKind::Type(format!(
            "unsupported operands for `{}`: {} and {}",
            op.mnemonic(),
            a.type_name(),
            b.type_name()
        ))
    };
    Ok(match op {
        BinOp::Add | BinOp::Concat => match (a, b) {
            (Int(x), Int(y)) => Int(x.checked_add(*y).ok_or(FaultKind::Overflow)?),
            (Str(x), Str(y)) => build_str(scratch, |s| {
                s.push_str(x);
                s.push_str(y);
            }),
            (Str(x), Int(y)) => build_str(scratch, |s| {
                let _ = write!(s, "{x}{y}");
            }),
            (Int(x), Str(y)) => build_str(scratch, |s| {
                let _ = write!(s, "{x}{y}");
            }),
            _ => return Err(type_error()),
        },
        BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => {
            let (Int(x), Int(y)) = (a, b) else {
                return Err(type_error());
            };
            let r = match op {
                BinOp::Sub => x.checked_sub(*y),
                BinOp::Mul => x.checked_mul(*y),
                _ if *y == 0 => return Err(FaultKind::DivisionByZero),
                BinOp::Div => x.checked_div(*y),
                _ => x.checked_rem(*y),
            };
            Int(r.ok_or(FaultKind::Overflow)?)
        }
        BinOp::Eq => Bool(a == b),
        BinOp::Ne => Bool(a != b),
        BinOp::Lt => match (a, b) {
            (Int(x), Int(y)) => Bool(x < y),
            (Str(x), Str(y)) => Bool(x < y),
            _ => return Err(type_error()),
        },
    })
}
