//! Reference interpreter that walks the AST directly. It shares nothing with
//! the compiler, the instrumenter or the VM beyond the parser, and logs the
//! string value of every expression whose kind the instrumenter observes.

use std::cell::RefCell;
use std::collections::{HashMap, VecDeque};
use std::rc::Rc;

use runtimesearch::lang::ast::{
    BinaryOp, Expr, ExprKind, FuncDecl, Literal, Program, Stmt, StmtKind,
};

const MAX_DEPTH: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Logged {
    pub unit: String,
    pub function: String,
    pub kind: &'static str,
    pub line: u32,
    pub value: String,
}

#[derive(Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub stdout: String,
    pub log: Vec<Logged>,
    /// Line of the statement or expression that faulted.
    pub fault_line: Option<u32>,
}

type Rec = Rc<RefCell<Vec<(String, Val)>>>;

#[derive(Clone)]
enum Val {
    S(String),
    I(i64),
    B(bool),
    R(Rec),
    Null,
}

impl PartialEq for Val {
    fn eq(&self, other: &Val) -> bool {
        match (self, other) {
            (Val::S(a), Val::S(b)) => a == b,
            (Val::I(a), Val::I(b)) => a == b,
            (Val::B(a), Val::B(b)) => a == b,
            (Val::R(a), Val::R(b)) => Rc::ptr_eq(a, b),
            (Val::Null, Val::Null) => true,
            _ => false,
        }
    }
}

fn text(v: &Val, nested: bool) -> String {
    match v {
        Val::S(s) if nested => serde_json::to_string(s).unwrap(),
        Val::S(s) => s.clone(),
        Val::I(i) => i.to_string(),
        Val::B(b) => b.to_string(),
        Val::Null => "null".into(),
        Val::R(_) if nested => "{...}".into(),
        Val::R(r) => {
            let parts: Vec<String> = r
                .borrow()
                .iter()
                .map(|(k, v)| format!("{k}: {}", text(v, true)))
                .collect();
            format!("{{{}}}", parts.join(", "))
        }
    }
}

/// Execution stops at the first fault; the line is where it happened.
struct Fault(u32);

enum Flow {
    Next,
    Return(Val),
}

struct Oracle<'a> {
    functions: HashMap<&'a str, (&'a str, &'a FuncDecl)>,
    observe: &'a dyn Fn(&str, &str) -> bool,
    input: VecDeque<String>,
    trace: Trace,
    depth: usize,
}

struct Env<'a> {
    unit: &'a str,
    function: &'a str,
    observed: bool,
    scopes: Vec<HashMap<String, Val>>,
}

impl Env<'_> {
    fn get(&self, name: &str) -> Val {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name).cloned())
            .expect("parser-checked name")
    }

    fn set(&mut self, name: &str, v: Val) {
        for s in self.scopes.iter_mut().rev() {
            if let Some(slot) = s.get_mut(name) {
                *slot = v;
                return;
            }
        }
        panic!("assignment to undeclared `{name}`");
    }
}

/// Runs `main` over the given units. `observe(unit, function)` says which
/// functions have their string expressions logged.
pub fn trace(units: &[Program], input: &str, observe: &dyn Fn(&str, &str) -> bool) -> Trace {
    let mut functions = HashMap::new();
    for u in units {
        for f in &u.functions {
            functions.insert(f.name.as_str(), (u.unit.as_str(), f));
        }
    }
    let mut o = Oracle {
        functions,
        observe,
        input: input.lines().map(str::to_string).collect(),
        trace: Trace::default(),
        depth: 0,
    };
    if let Err(Fault(line)) = o.call("main", Vec::new()) {
        o.trace.fault_line = Some(line);
    }
    o.trace
}

impl<'a> Oracle<'a> {
    fn call(&mut self, name: &str, args: Vec<Val>) -> Result<Val, Fault> {
        let (unit, decl) = self.functions[name];
        if self.depth >= MAX_DEPTH {
            return Err(Fault(decl.line));
        }
        let mut env = Env {
            unit,
            function: &decl.name,
            observed: (self.observe)(unit, &decl.name),
            scopes: vec![decl.params.iter().cloned().zip(args).collect()],
        };
        self.depth += 1;
        let flow = self.block(&decl.body, &mut env);
        self.depth -= 1;
        match flow? {
            Flow::Return(v) => Ok(v),
            Flow::Next => Ok(Val::Null),
        }
    }

    fn block(&mut self, body: &[Stmt], env: &mut Env) -> Result<Flow, Fault> {
        for s in body {
            if let Flow::Return(v) = self.stmt(s, env)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn scoped(&mut self, body: &[Stmt], env: &mut Env) -> Result<Flow, Fault> {
        env.scopes.push(HashMap::new());
        let r = self.block(body, env);
        env.scopes.pop();
        r
    }

    fn cond(&mut self, e: &Expr, line: u32, env: &mut Env) -> Result<bool, Fault> {
        match self.expr(e, env)? {
            Val::B(b) => Ok(b),
            _ => Err(Fault(line)),
        }
    }

    fn stmt(&mut self, s: &Stmt, env: &mut Env) -> Result<Flow, Fault> {
        match &s.kind {
            StmtKind::Let { name, value } => {
                let v = self.expr(value, env)?;
                env.scopes.last_mut().unwrap().insert(name.clone(), v);
            }
            StmtKind::Assign { name, value } => {
                let v = self.expr(value, env)?;
                env.set(name, v);
            }
            StmtKind::FieldAssign {
                object,
                field,
                value,
            } => {
                let target = self.expr(object, env)?;
                let v = self.expr(value, env)?;
                let Val::R(r) = target else {
                    return Err(Fault(s.line));
                };
                let mut fields = r.borrow_mut();
                match fields.iter_mut().find(|(k, _)| k == field) {
                    Some((_, slot)) => *slot = v,
                    None => fields.push((field.clone(), v)),
                }
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                if self.cond(cond, s.line, env)? {
                    return self.scoped(then_body, env);
                } else if let Some(e) = else_body {
                    return self.scoped(e, env);
                }
            }
            StmtKind::While { cond, body } => {
                while self.cond(cond, s.line, env)? {
                    if let Flow::Return(v) = self.scoped(body, env)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            StmtKind::Return(value) => {
                let v = match value {
                    Some(e) => self.expr(e, env)?,
                    None => Val::Null,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::Print(e) => {
                let v = self.expr(e, env)?;
                self.trace.stdout.push_str(&text(&v, false));
                self.trace.stdout.push('\n');
            }
            StmtKind::Block(body) => return self.scoped(body, env),
            StmtKind::Expr(e) => {
                self.expr(e, env)?;
            }
        }
        Ok(Flow::Next)
    }

    fn log(&mut self, env: &Env, kind: &'static str, line: u32, v: &Val) {
        if let (true, Val::S(s)) = (env.observed, v) {
            self.trace.log.push(Logged {
                unit: env.unit.to_string(),
                function: env.function.to_string(),
                kind,
                line,
                value: s.clone(),
            });
        }
    }

    fn expr(&mut self, e: &Expr, env: &mut Env) -> Result<Val, Fault> {
        let line = e.line;
        let (kind, v) = match &e.kind {
            ExprKind::Literal(l) => (
                "Const",
                match l {
                    Literal::Str(s) => Val::S(s.clone()),
                    Literal::Int(i) => Val::I(*i),
                    Literal::Bool(b) => Val::B(*b),
                    Literal::Null => Val::Null,
                },
            ),
            ExprKind::Var(name) => ("LocalRead", env.get(name)),
            ExprKind::Field { object, field } => {
                let Val::R(r) = self.expr(object, env)? else {
                    return Err(Fault(line));
                };
                let found = r
                    .borrow()
                    .iter()
                    .find(|(k, _)| k == field)
                    .map(|(_, v)| v.clone());
                ("FieldRead", found.ok_or(Fault(line))?)
            }
            ExprKind::Record(fields) => {
                let mut values = Vec::new();
                for (k, fe) in fields {
                    values.push((k.clone(), self.expr(fe, env)?));
                }
                return Ok(Val::R(Rc::new(RefCell::new(values))));
            }
            ExprKind::Call { name, args } => {
                let mut vals = Vec::new();
                for a in args {
                    vals.push(self.expr(a, env)?);
                }
                ("CallResult", self.call_any(name, vals, line)?)
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let a = self.expr(lhs, env)?;
                let b = self.expr(rhs, env)?;
                let v = binary(*op, a, b).ok_or(Fault(line))?;
                if !matches!(op, BinaryOp::Add) {
                    return Ok(v);
                }
                ("CallResult", v)
            }
        };
        self.log(env, kind, line, &v);
        Ok(v)
    }

    fn call_any(&mut self, name: &str, mut args: Vec<Val>, line: u32) -> Result<Val, Fault> {
        let string_arg = |args: &[Val]| match args {
            [Val::S(s)] => Ok(s.clone()),
            _ => Err(Fault(line)),
        };
        match name {
            "readline" => Ok(Val::S(self.input.pop_front().unwrap_or_default())),
            "str" => Ok(Val::S(text(&args[0], false))),
            "upper" => Ok(Val::S(string_arg(&args)?.to_uppercase())),
            "lower" => Ok(Val::S(string_arg(&args)?.to_lowercase())),
            "len" => Ok(Val::I(string_arg(&args)?.chars().count() as i64)),
            _ => {
                let callee = std::mem::take(&mut args);
                self.call(name, callee)
            }
        }
    }
}

fn binary(op: BinaryOp, a: Val, b: Val) -> Option<Val> {
    use Val::{B, I, S};
    Some(match (op, a, b) {
        (BinaryOp::Add, I(x), I(y)) => I(x.checked_add(y)?),
        (BinaryOp::Add, S(x), S(y)) => S(x + &y),
        (BinaryOp::Add, S(x), I(y)) => S(format!("{x}{y}")),
        (BinaryOp::Add, I(x), S(y)) => S(format!("{x}{y}")),
        (BinaryOp::Sub, I(x), I(y)) => I(x.checked_sub(y)?),
        (BinaryOp::Mul, I(x), I(y)) => I(x.checked_mul(y)?),
        (BinaryOp::Div, I(x), I(y)) => I(x.checked_div(y)?),
        (BinaryOp::Rem, I(x), I(y)) => I(x.checked_rem(y)?),
        (BinaryOp::Eq, x, y) => B(x == y),
        (BinaryOp::Ne, x, y) => B(x != y),
        (BinaryOp::Lt, I(x), I(y)) => B(x < y),
        (BinaryOp::Lt, S(x), S(y)) => B(x < y),
        _ => return None,
    })
}
