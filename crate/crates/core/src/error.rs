use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("effector-target range {range} m is at or below the guidance floor of {floor} m")]
    DegenerateRange { range: f64, floor: f64 },

    #[error(
        "no positive RCBF deceleration constant: r_s = {r_s} must exceed v_max^2/u_max = {limit}"
    )]
    InfeasibleBarrier { r_s: f64, limit: f64 },

    #[error("hard QP constraints are jointly infeasible (conflicting rows {rows:?})")]
    Infeasible { rows: Vec<usize> },

    #[error("QP solver failure: {0}")]
    SolverFailure(String),

    #[error("invalid QP problem: {0}")]
    InvalidProblem(String),

    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    InvalidScenario(Vec<String>),

    #[error("unknown agent id {0}")]
    UnknownAgent(u32),

    #[error("failed to parse scenario: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("failed to serialize scenario: {0}")]
    Serialize(#[from] toml::ser::Error),
}
