use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("variable {0} has an empty name")]
    EmptyName(usize),
    #[error("variable name `{name}` used twice (indices {first} and {second})")]
    DuplicateName {
        name: String,
        first: usize,
        second: usize,
    },
    #[error("variable `{0}` has NaN bounds")]
    InvalidBounds(String),
    #[error("binary variable `{0}` has bounds outside [0, 1]")]
    BinaryBounds(String),
    #[error("unknown variable index {var} referenced in {context}")]
    UnknownVariable { var: usize, context: String },
    #[error("non-finite coefficient or right-hand side in {0}")]
    NonFiniteCoefficient(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpFormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing section `{0}`")]
    MissingSection(&'static str),
}
