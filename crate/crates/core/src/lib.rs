//! Food co-occurrence prompting for dietary recall surveys.
//!
//! * [`model`] learns which foods are eaten together from past meals and
//!   ranks likely omitted foods for a meal in progress.
//! * [`rules`] holds the hand-coded antecedent/consequent baseline.
//! * [`evaluation`] runs the leave-one-out omission simulation and computes
//!   survey-log metrics and Mann-Whitney U tests.
//! * [`persistence`] reads and writes every file format.

pub mod error;
pub mod evaluation;
pub mod model;
pub mod persistence;
pub mod rules;
pub mod types;

pub use error::{EvalError, ModelError, RuleError, ValidationError, ValidationIssue};
pub use evaluation::PromptEvent;
pub use model::{CoOccurrenceModel, PairCounts, Recommendation, RecommendOptions, Score, DEFAULT_LIMIT};
pub use rules::{AssociatedFoodRule, RuleSet};
pub use types::{validate_recall, Arm, Corpus, DeviceClass, FoodCode, FoodSet, Meal, RawMeal, RawRecall, RecallDay};
