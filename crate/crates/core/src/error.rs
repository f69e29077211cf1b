//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Syntax or resolution failure while reading a netlist file.
    #[error("line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    /// Construct that the structural subset deliberately rejects
    /// (sequential elements, vectors, behavioral blocks).
    #[error("line {line}: unsupported construct: {msg}")]
    Unsupported { line: usize, msg: String },

    /// Combinational model violated: a gate is reachable from itself.
    #[error("combinational cycle through `{0}`")]
    Cycle(String),

    /// Netlist invariant broken (arity, duplicate names, dangling refs, ...).
    #[error("invalid netlist: {0}")]
    Invalid(String),

    #[error("unknown gate id {0}")]
    UnknownGate(u32),

    #[error("unknown signal `{0}`")]
    UnknownSignal(String),

    #[error("missing value for input `{0}`")]
    MissingAssignment(String),

    /// The two netlists being compared do not expose the same interface.
    #[error("interface mismatch: {0}")]
    InterfaceMismatch(String),

    #[error("exhaustive evaluation is limited to 24 free inputs, got {0}")]
    TooManyInputs(usize),

    #[error("requested {requested} distinct wrong keys, key space only has {available}")]
    KeySpaceExhausted { requested: u64, available: u64 },

    #[error("empty pattern set")]
    EmptyPatterns,

    #[error("name `{0}` is already in use")]
    NameCollision(String),

    #[error("`{0}` cannot be locked")]
    NotLockable(String),

    #[error("need {requested} lockable nets, circuit offers {available}")]
    TooFewLockableNets { requested: usize, available: usize },

    #[error("key length must be even for split insertion, got {0}")]
    OddKeyCount(usize),

    /// The obfuscation pass changed no key-gate subgraph, so there is
    /// nothing to imitate. Raising the rewrite effort is the usual fix.
    #[error("change dictionary is empty: the rewrite pass altered no key-gate subgraph; raise the effort level")]
    EmptyDictionary,

    #[error("ran out of insertion sites after placing {placed} of {needed} key-gates")]
    InsufficientSites { placed: usize, needed: usize },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("key name sets do not match: {0}")]
    KeyMismatch(String),

    #[error("key input `{0}` drives no logic gate")]
    DanglingKeyInput(String),

    #[error("plan error: {0}")]
    Plan(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
