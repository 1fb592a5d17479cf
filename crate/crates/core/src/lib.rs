//! Search the values of string expressions in a running program.
//!
//! MiniLang source is compiled to stack bytecode, instrumented with capture
//! points after every string-producing instruction, and executed by a VM
//! under a debug session. While a query is active, each captured string is
//! matched against it and the program pauses on the first hit. From there
//! the usual debugger operations apply: find next, step, inspect, continue.

pub mod bench;
pub mod bytecode;
pub mod instrument;
pub mod lang;
pub mod protocol;
pub mod search;
pub mod vm;
