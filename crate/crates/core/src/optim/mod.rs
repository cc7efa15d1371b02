//! Dense small-scale solvers.

mod lp;
mod pinv;
mod qp;
mod weighted_log;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

pub use lp::{solve_lp, solve_lp_with_duals, LpDuals, LpProblem};
pub use pinv::{right_pinv, RANK_TOL};
pub use qp::{solve_qp, solve_qp_detailed, QpProblem, QpSolution};
pub use weighted_log::{log_objective, solve_weighted_log, InnerObjective, InnerSolution, BETA_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveKind {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

/// Outcome of a solver call; `solution` is present iff `kind` is optimal.
#[derive(Debug, Clone)]
pub struct SolveStatus<T> {
    pub kind: SolveKind,
    pub solution: Option<Array1<T>>,
    pub objective_value: Option<T>,
}

impl<T> SolveStatus<T> {
    pub fn optimal(solution: Array1<T>, objective_value: T) -> Self {
        Self {
            kind: SolveKind::Optimal,
            solution: Some(solution),
            objective_value: Some(objective_value),
        }
    }

    pub fn failed(kind: SolveKind) -> Self {
        debug_assert!(kind != SolveKind::Optimal);
        Self {
            kind,
            solution: None,
            objective_value: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.kind == SolveKind::Optimal
    }
}
