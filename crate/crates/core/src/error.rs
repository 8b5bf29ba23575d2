use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("quadrature did not converge on [{lo}, {hi}]: estimate {estimate:e}, error {error:e}")]
    Quadrature {
        lo: f64,
        hi: f64,
        estimate: f64,
        error: f64,
    },

    #[error("linear solve failed: {0}")]
    Linear(String),

    #[error("nonlinear iteration did not converge after {iterations} iterations (last residual {last:e})")]
    NoConvergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("step {step} at t = {time}: {source}")]
    Step {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("positivity lost at step {step} (t = {time}): min p = {min:e}")]
    Positivity { step: usize, time: f64, min: f64 },

    #[error(transparent)]
    Expr(#[from] crate::expr::ExprError),

    #[error("field has {got} values, grid has {expected} nodes")]
    Shape { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_step(self, step: usize, time: f64) -> Error {
        match self {
            e @ (Error::Step { .. } | Error::Positivity { .. }) => e,
            e => Error::Step {
                step,
                time,
                source: Box::new(e),
            },
        }
    }

    /// True for errors caused by invalid input rather than numerical failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Domain(_) | Error::Expr(_) | Error::Shape { .. }
        )
    }
}
