use thiserror::Error;

/// Failures raised while building, evaluating or differentiating an [`crate::expr::Expr`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("expression references index {index} but the point has dimension {dim}")]
    Dimension { index: usize, dim: usize },

    #[error("domain error in `{node}`: argument {value}")]
    Domain { node: String, value: f64 },

    #[error("`{node}` is not differentiable at this point")]
    NonDifferentiable { node: String },

    #[error("`{node}` produced a non-finite value")]
    NonFinite { node: String },

    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScnError {
    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error("{component}: {source}")]
    Component {
        component: String,
        #[source]
        source: ExprError,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("form `{0}` has no witness map")]
    WitnessAbsent(String),

    #[error("witness of `{form}` is invalid: {detail}")]
    WitnessInfeasible { form: String, detail: String },

    #[error("form `{0}` has no reference evaluator")]
    ReferenceAbsent(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unknown catalog id `{0}`")]
    UnknownCatalog(String),

    #[error("point is infeasible: {0}")]
    Infeasible(String),

    #[error("grid oracle limited to m1+m2 <= {cap}, form has {got}")]
    GridTooLarge { cap: usize, got: usize },

    #[error("objective is not finite at the start point")]
    NonFiniteStart,

    #[error("problem file: {0}")]
    ProblemFile(String),
}

impl ScnError {
    pub(crate) fn component(component: impl Into<String>, source: ExprError) -> Self {
        ScnError::Component {
            component: component.into(),
            source,
        }
    }
}
