//! Hypothesis strings, their constraint matrices, and hypothesis systems.

mod constraints;
mod parser;
mod space;
mod system;

pub use constraints::ConstraintMatrices;
pub use parser::{parse, parse_one, validate};
pub use space::{is_identifier, ParameterSpace};
pub use system::{add_complement, covers_space, warn_nested_orders, HypothesisSystem, NestingWarning};
