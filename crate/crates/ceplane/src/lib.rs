//! Complex-event rule compiler and execution toolkit for match-action
//! data planes.
//!
//! Rules declare sliding windows over packet header fields and complex
//! events whose patterns combine per-packet predicates with sequence
//! (`;`), conjunction over interleavings (`&&`), and alternative (`||`).
//! The compiler turns each pattern into a deterministic finite state
//! machine driven by a transition table keyed on (state, predicate id),
//! the shape a match-action pipeline can host directly.
//!
//! The crate covers the full path from source text to running detector:
//!
//! * [`parser`] / [`headers`] / [`validate`]: rule files and the header
//!   width sidecar, checked into a resolved AST
//! * [`nfa`] / [`dfa`]: pattern translation and subset construction
//! * [`program`]: the compiled, serializable program
//! * [`window`] / [`engine`]: ring buffers and the software packet
//!   pipeline that executes compiled programs
//! * [`runtime`]: deploy, live table updates, state injection, snapshots
//! * [`codegen`]: P4_16 source plus runtime table entries
//! * [`trace`] / [`bench`]: packet traces and the scaling harness

pub mod ast;
pub mod bench;
pub mod codegen;
pub mod dfa;
pub mod engine;
pub mod headers;
pub mod lexer;
pub mod nfa;
pub mod parser;
pub mod program;
pub mod runtime;
pub mod trace;
pub mod validate;
pub mod window;

pub use ast::{print_rules, RuleAst, Strategy};
pub use dfa::{Dfa, TransitionRow};
pub use engine::{DropReason, Emission, Engine};
pub use headers::{parse_headers, HeaderSet};
pub use parser::parse_rules;
pub use program::{compile, CompiledProgram};
pub use runtime::{Controller, UpdateMode};
pub use validate::{validate, CheckedRuleAst};
