//! Oscillatory coefficient fields `a(x)` and the expression language used to
//! describe them.

mod expr;
mod field;

pub use expr::{parse_expression, BinOp, EvalError, Expr, Func, ParseError};
pub use field::{builtin_family, CoefficientField, FieldError, FieldKind, SampledTable};
