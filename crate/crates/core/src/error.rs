use thiserror::Error;

use crate::types::FoodCode;

/// A single violated invariant found while validating input.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationIssue {
    #[error("recall has no meals")]
    EmptyRecall,
    #[error("meal {0} has no foods")]
    EmptyMeal(usize),
    #[error("empty food code")]
    EmptyFoodCode,
    #[error("food code '{0}' contains whitespace or control characters, or starts with '#'")]
    InvalidFoodCode(String),
    #[error("negative duration {0}")]
    NegativeDuration(f64),
    #[error("negative energy {0}")]
    NegativeEnergy(f64),
    #[error("meal {meal}: {issue}")]
    InMeal {
        meal: usize,
        issue: Box<ValidationIssue>,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid recall: {}", join_issues(.issues))]
pub struct ValidationError {
    pub issues: Vec<ValidationIssue>,
}

fn join_issues(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("corpus contains no meals")]
    EmptyCorpus,
    #[error("food '{0}' is not in the model")]
    UnknownGivenFood(FoodCode),
    #[error("self-pair '{0}' is not defined")]
    SelfPair(FoodCode),
    #[error("candidate '{0}' is already reported")]
    CandidateIsReported(FoodCode),
    #[error("reported food set is empty")]
    EmptyReportedSet,
    #[error("limit must be at least 1")]
    ZeroLimit,
    #[error("meal is not part of the model counts")]
    MealNotInModel,
    #[error("corrupt counts: {0}")]
    CorruptCounts(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate rule {antecedent} -> {consequent}")]
    DuplicateRule {
        line: usize,
        antecedent: FoodCode,
        consequent: FoodCode,
    },
    #[error("line {line}: rule links '{food}' to itself")]
    SelfRule { line: usize, food: FoodCode },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no meal with at least two foods to evaluate")]
    NoEligibleMeals,
    #[error("k values must be positive and non-empty")]
    InvalidKs,
    #[error("no prompts were shown")]
    NoPromptsShown,
    #[error("no recall passes the inclusion rule")]
    NoEligibleRecalls,
    #[error("sample is empty")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFiniteSample,
    #[error("exact distribution requires tie-free samples")]
    ExactWithTies,
    #[error("invalid prompt event: {0}")]
    InvalidEvent(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
