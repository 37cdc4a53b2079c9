//! Signal temporal logic with integral and derivative predicates.
//!
//! Formulas are parsed from text, monitored against sampled signals, and
//! encoded as mixed-integer linear constraints for trajectory synthesis.

pub mod case_study;
pub mod encoder;
pub mod formula;
pub mod monitor;
pub mod parser;
pub mod problem;
pub mod signal;
pub mod synthesis;

pub use formula::{
    compile, horizon, validate, Comparison, CompiledFormula, DerivativePredicate, DerivativeSide, Formula,
    FormulaKind, IntegralPredicate, Interval, LinearExpr, Node, Predicate, SourceSpan, Term, ValidationError,
};
pub use encoder::{add_signal_vars, EncodeError, EncodeOptions, EncodingContext, DEFAULT_BIG_M};
pub use monitor::{robustness, sat, Monitor, MonitorError, NodeValue, RobustnessReport};
pub use parser::{parse, print, ParseError};
pub use signal::{Signal, SignalError};
pub use synthesis::{
    build, double_integrator, reachable_bounds, synthesize, LinearSystem, SynthesisError, SynthesisModel, SynthesisProblem,
    SynthesisResult,
};
