//! Medication planning as heuristic search over pharmacokinetic /
//! pharmacodynamic patient states.
//!
//! A [`MedicationProblem`] describes medicines, their concentration
//! trajectories per organ, Emax dose-response parameters, safety bounds and
//! goals. [`search::gbfs`] finds an administration [`Plan`] guided by a
//! [`Heuristic`], and [`validator::validate_plan`] re-checks any plan
//! independently of the search.

pub mod error;
pub mod heuristics;
pub mod model;
pub mod pkpd;
pub mod planner;
pub mod search;
pub mod validator;

pub use error::{EngineError, ProblemError};
pub use heuristics::{ComprehensiveHeuristic, Heuristic, HeuristicKind, HeuristicValue, ZeroHeuristic};
pub use model::{
    parse_problem, serialize_problem, ActionKind, AdministrationAction, Bounds, Dosage, MedicationProblem,
    PatientState, Plan, State, Timestep,
};
pub use search::{gbfs, SearchLimits, SearchResult, SearchStatus};
pub use validator::{validate_plan, FailureReason, Verdict};

/// Everything a heuristic function usually needs, for glob import.
pub mod prelude {
    pub use crate::heuristics::{
        best_medicine, clearance_time, comprehensive_heuristic, current_contribution, max_goal_time,
        safety_penalty, time_to_peak, Heuristic, NO_MEDICINE_PENALTY,
    };
    pub use crate::model::{
        ActionKind, AdministrationAction, Bounds, Dosage, EffectKey, MedicationProblem, PatientState, Plan,
        SiteKey, State, Timestep,
    };
    pub use crate::pkpd::{concentration, direct_effect, is_goal, successors, Dynamics};
}
