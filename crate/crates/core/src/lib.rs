//! Divisor theory and spectral tools on finite graphs with positive rational
//! edge weights, plus exhaustions of infinite weighted graphs by metric balls.
//!
//! Conventions used throughout:
//!
//! * vertices are indices `0..n` in order of first appearance;
//! * a divisor stores integer multipliers `ℓ(x)` of the vertex quantum `i(x)`;
//! * firing a function `f` maps `D` to `D − Δf`.

pub mod chip_firing;
pub mod divisor;
pub mod exhaustion;
pub mod graph;
pub mod linalg;
pub mod rank;
pub mod rational;
pub mod spectral;

pub use chip_firing::{
    dhar_burnt_set, is_winnable, make_nonneg_off_base, reduce_divisor, Board, ReductionResult,
    WinMode,
};
pub use divisor::{
    apply_firing, degree_split, equivalence_witness, nu_divisor, restrict_divisor, Divisor,
    FiringFunction, TotalOrder,
};
pub use graph::{
    parse_graph, GraphInvariants, MetricProfile, TransitionProfile, VertexSet, WeightedGraph,
};
pub use rank::{enumerate_effective, order_values, rank, rank_via_orders, rr_check, RankResult, RankStatus, RrReport};
pub use rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error("structural error: {0}")]
    Structural(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("size limit: {0}")]
    SizeLimit(String),
    #[error("budget of {0} exceeded")]
    BudgetExceeded(u64),
    #[error("no convergence: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
