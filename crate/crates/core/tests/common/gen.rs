//! Random MiniLang programs that always terminate: loops are bounded by
//! counters the body cannot touch, and a function only calls helpers
//! defined before it. Expressions are mostly well typed; a small share mix
//! types freely so that faults get exercised too.
//!
//! Variable roles: `v0` holds strings, `v1` ints, `v2` either; `rec` is a
//! record with a string field `s` and an int field `n`. Helpers take a
//! string `p0` (and an int `p1`) and return strings.

use proptest::prelude::*;
use proptest::strategy::Union;

const STRINGS: &[&str] = &["a", "ab", "Text", "", "x y", "TEXT", "zz", "ä"];

#[derive(Clone, Copy)]
struct Ctx {
    /// number of helpers callable from here (`f0`, then `f1`)
    callees: usize,
    /// inside the body, after the `let`s
    body: bool,
    /// 0 for `main`, else number of parameters
    params: usize,
}

type S = BoxedStrategy<String>;

fn weighted(arms: Vec<(u32, S)>) -> S {
    Union::new_weighted(arms).boxed()
}

fn pick(items: Vec<&'static str>) -> S {
    prop::sample::select(items).prop_map(str::to_string).boxed()
}

fn str_lit() -> S {
    prop::sample::select(STRINGS)
        .prop_map(|s| format!("{s:?}"))
        .boxed()
}

fn str_expr(c: Ctx, depth: u32) -> S {
    let mut names = vec![];
    if c.params >= 1 {
        names.push("p0");
    }
    if c.body {
        names.extend(["v0", "v0", "rec.s"]);
    }
    let mut arms = vec![(3, str_lit())];
    if !names.is_empty() {
        arms.push((4, pick(names)));
    }
    if depth == 0 {
        return weighted(arms);
    }
    let d = depth - 1;
    arms.extend([
        (
            3,
            (str_expr(c, d), str_expr(c, d))
                .prop_map(|(a, b)| format!("{a} + {b}"))
                .boxed(),
        ),
        (
            1,
            (str_expr(c, d), int_expr(c, d))
                .prop_map(|(a, b)| format!("({a} + {b})"))
                .boxed(),
        ),
        (
            2,
            (pick(vec!["upper", "lower"]), str_expr(c, d))
                .prop_map(|(f, a)| format!("{f}({a})"))
                .boxed(),
        ),
        (1, any_expr(c, d).prop_map(|a| format!("str({a})")).boxed()),
        (1, Just("readline()".to_string()).boxed()),
        (
            1,
            (str_expr(c, d), int_expr(c, d))
                .prop_map(|(s, n)| format!("new {{ s: {s}, n: {n} }}.s"))
                .boxed(),
        ),
    ]);
    if c.callees >= 1 {
        arms.push((2, str_expr(c, d).prop_map(|a| format!("f0({a})")).boxed()));
    }
    if c.callees >= 2 {
        arms.push((
            2,
            (str_expr(c, d), int_expr(c, d))
                .prop_map(|(a, b)| format!("f1({a}, {b})"))
                .boxed(),
        ));
    }
    weighted(arms)
}

fn int_expr(c: Ctx, depth: u32) -> S {
    let mut arms = vec![(3, (-3i64..20).prop_map(|i| i.to_string()).boxed())];
    let mut names = vec![];
    if c.params >= 2 {
        names.push("p1");
    }
    if c.body {
        names.extend(["v1", "rec.n"]);
    }
    if !names.is_empty() {
        arms.push((3, pick(names)));
    }
    if depth == 0 {
        return weighted(arms);
    }
    let d = depth - 1;
    arms.extend([
        (
            3,
            (int_expr(c, d), pick(vec!["+", "-", "*"]), int_expr(c, d))
                .prop_map(|(a, op, b)| format!("({a} {op} {b})"))
                .boxed(),
        ),
        (
            1,
            (int_expr(c, d), pick(vec!["/", "%"]), 1i64..5)
                .prop_map(|(a, op, b)| format!("({a} {op} {b})"))
                .boxed(),
        ),
        (2, str_expr(c, d).prop_map(|a| format!("len({a})")).boxed()),
    ]);
    weighted(arms)
}

fn bool_expr(c: Ctx, depth: u32) -> S {
    weighted(vec![
        (1, pick(vec!["true", "false"])),
        (
            2,
            (
                str_expr(c, depth),
                pick(vec!["==", "!=", "<"]),
                str_expr(c, depth),
            )
                .prop_map(|(a, op, b)| format!("{a} {op} {b}"))
                .boxed(),
        ),
        (
            2,
            (
                int_expr(c, depth),
                pick(vec!["==", "!=", "<"]),
                int_expr(c, depth),
            )
                .prop_map(|(a, op, b)| format!("{a} {op} {b}"))
                .boxed(),
        ),
        (
            1,
            (any_expr(c, depth), any_expr(c, depth))
                .prop_map(|(a, b)| format!("{a} == {b}"))
                .boxed(),
        ),
    ])
}

/// Anything, including ill-typed combinations.
fn any_expr(c: Ctx, depth: u32) -> S {
    let mut arms = vec![
        (4, str_expr(c, depth)),
        (3, int_expr(c, depth)),
        (1, pick(vec!["true", "null"])),
    ];
    if c.body {
        arms.push((1, pick(vec!["v2", "rec"])));
    }
    if depth > 0 {
        arms.push((
            1,
            (
                any_expr(c, depth - 1),
                pick(vec!["+", "-", "<", "/"]),
                any_expr(c, depth - 1),
            )
                .prop_map(|(a, op, b)| format!("({a} {op} {b})"))
                .boxed(),
        ));
    }
    weighted(arms)
}

fn stmts(c: Ctx, depth: u32, loop_depth: u32) -> BoxedStrategy<Vec<String>> {
    prop::collection::vec(stmt(c, depth, loop_depth), 1..5).boxed()
}

fn stmt(c: Ctx, depth: u32, loop_depth: u32) -> S {
    let mut arms = vec![
        (3, str_expr(c, 2).prop_map(|x| format!("v0 = {x};")).boxed()),
        (2, int_expr(c, 2).prop_map(|x| format!("v1 = {x};")).boxed()),
        (2, any_expr(c, 1).prop_map(|x| format!("v2 = {x};")).boxed()),
        (
            1,
            str_expr(c, 1).prop_map(|x| format!("rec.s = {x};")).boxed(),
        ),
        (
            1,
            int_expr(c, 1).prop_map(|x| format!("rec.n = {x};")).boxed(),
        ),
        (
            1,
            any_expr(c, 1).prop_map(|x| format!("rec.t = {x};")).boxed(),
        ),
        (
            3,
            any_expr(c, 2).prop_map(|x| format!("print({x});")).boxed(),
        ),
        (1, str_expr(c, 2).prop_map(|x| format!("{x};")).boxed()),
        (
            1,
            str_expr(c, 1).prop_map(|x| format!("return {x};")).boxed(),
        ),
    ];
    if depth > 0 {
        arms.push((
            2,
            (
                bool_expr(c, 1),
                stmts(c, depth - 1, loop_depth),
                prop::option::of(stmts(c, depth - 1, loop_depth)),
            )
                .prop_map(|(cond, then, other)| {
                    let mut s = format!("if ({cond}) {{ {} }}", then.join(" "));
                    if let Some(o) = other {
                        s.push_str(&format!(" else {{ {} }}", o.join(" ")));
                    }
                    s
                })
                .boxed(),
        ));
        if loop_depth < 2 {
            let counter = format!("c{loop_depth}");
            arms.push((
                2,
                (1u32..5, stmts(c, depth - 1, loop_depth + 1))
                    .prop_map(move |(k, body)| {
                        format!(
                            "let {counter} = 0; while ({counter} < {k}) {{ {} {counter} = {counter} + 1; }}",
                            body.join(" ")
                        )
                    })
                    .boxed(),
            ));
        }
    }
    weighted(arms)
}

fn function(name: &'static str, params: usize, callees: usize) -> S {
    let head = Ctx {
        callees,
        body: false,
        params,
    };
    let body = Ctx { body: true, ..head };
    let param_list = ["p0", "p1"][..params].join(", ");
    (
        str_expr(head, 1),
        int_expr(head, 1),
        any_expr(head, 1),
        str_expr(head, 1),
        stmts(body, 2, 0),
        str_expr(body, 2),
    )
        .prop_map(move |(a, b, v, s, stmts, ret)| {
            format!(
                "fn {name}({param_list}) {{\n  let v0 = {a};\n  let v1 = {b};\n  let v2 = {v};\n  let rec = new {{ s: {s}, n: 1 }};\n  {}\n  return {ret};\n}}\n",
                stmts.join("\n  ")
            )
        })
        .boxed()
}

/// Source text of a whole program: two helpers and `main`.
pub fn program() -> S {
    (
        function("f0", 1, 0),
        function("f1", 2, 1),
        function("main", 0, 2),
    )
        .prop_map(|(a, b, m)| format!("{a}\n{b}\n{m}"))
        .boxed()
}

pub fn input() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(STRINGS), 0..4).prop_map(|l| l.join("\n"))
}
