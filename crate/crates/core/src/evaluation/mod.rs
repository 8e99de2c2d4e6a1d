//! Offline and survey-log evaluation of prompting strategies.

mod mann_whitney;
mod metrics;
mod simulation;

pub use mann_whitney::{
    exact_u_distribution, mann_whitney_u, mann_whitney_u_with, MannWhitneyResult, PValueMethod,
    EXACT_MAX_TOTAL,
};
pub use metrics::{
    acceptance_stats, arm_metrics, coverage_stats, duration_stats, energy_stats, precision,
    AcceptanceStats, ArmComparison, ArmMetrics, CoverageStats, MeanStats, MetricsReport,
    DEFAULT_MAX_MINUTES, DEFAULT_MIN_KCAL,
};
#[cfg(feature = "parallel")]
pub use simulation::leave_one_out_cases_parallel;
pub use simulation::{
    leave_one_out_cases, leave_one_out_cases_sequential, simulate_leave_one_out, CaseOutcome,
    EvaluationReport, Leakage, SimulationConfig,
};

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::types::{Arm, FoodCode};

/// Audit record of one prompt screen: which foods were shown and which the
/// respondent accepted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptEvent {
    pub event_id: String,
    pub recall_id: String,
    pub meal_index: usize,
    pub prompt_type: Arm,
    pub shown: Vec<FoodCode>,
    pub accepted: Vec<FoodCode>,
}

impl PromptEvent {
    /// Checks that something was shown and that every acceptance was shown.
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.shown.is_empty() {
            return Err(EvalError::InvalidEvent(format!("event '{}' shows no foods", self.event_id)));
        }
        if let Some(food) = self.accepted.iter().find(|f| !self.shown.contains(f)) {
            return Err(EvalError::InvalidEvent(format!(
                "event '{}' accepts '{food}' which was not shown",
                self.event_id
            )));
        }
        Ok(())
    }
}
