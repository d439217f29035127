//! Exact multivariate rational functions over the rationals.
//!
//! Polynomials are sparse and distributed under a graded lexicographic order;
//! rational functions keep their denominators factored. Symbols live in a
//! process-wide registry so expressions can be shared across threads.

pub mod expr;
pub mod gcd;
pub mod linalg;
pub mod modp;
pub mod mono;
pub mod parse;
pub mod poly;
pub mod rational;
pub mod sym;

pub use expr::{Expr, ZeroTest};
pub use mono::Mono;
pub use parse::{parse, parse_with};
pub use poly::Poly;
pub use rational::Q;
pub use sym::{Sym, SymKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExprError {
    #[error("division by an expression that is identically zero")]
    DivisionByZero,
    #[error("substitution makes a denominator vanish identically: {0}")]
    SingularSubstitution(String),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unknown symbol '{name}' at byte {pos}")]
    UnknownSymbol { name: String, pos: usize },
    #[error("symbol id or name already in use: {0}")]
    SymbolConflict(String),
    #[error("no value supplied for symbol {0}")]
    UnboundSymbol(String),
    #[error("linear system is singular")]
    SingularSystem,
}
