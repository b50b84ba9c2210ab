use thiserror::Error;

/// Errors raised by polytope construction and the solvers built on top of it.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),

    #[error("center is not interior: facet {facet} has margin {margin:e}")]
    CenterNotInterior { facet: usize, margin: f64 },

    #[error("santalo solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("speed is not admissible on facets {}", format_facets(.0))]
    NotAdmissible(Vec<(usize, f64)>),

    #[error("facet {0} is parallel to the shadow direction")]
    ParallelFacet(usize),

    #[error("precondition unmet: {0}")]
    PreconditionUnmet(String),

    #[error("OFF parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn format_facets(v: &[(usize, f64)]) -> String {
    v.iter()
        .map(|(k, r)| format!("{k} (residual {r:.3e})"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
