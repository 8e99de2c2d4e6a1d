//! Survey-log metrics: prompt precision, acceptance, coverage, energy and
//! duration, split per prompting arm.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::mann_whitney::{mann_whitney_u, MannWhitneyResult};
use super::PromptEvent;
use crate::error::EvalError;
use crate::types::{Arm, FoodCode, FoodSet, RecallDay};

/// Recalls below this energy for the whole day are excluded.
pub const DEFAULT_MIN_KCAL: f64 = 250.0;
/// Recalls longer than this are excluded from duration statistics.
pub const DEFAULT_MAX_MINUTES: f64 = 60.0;

/// Accepted foods divided by shown foods, over all events.
pub fn precision(events: &[PromptEvent]) -> Result<f64, EvalError> {
    let shown: usize = events.iter().map(|e| e.shown.len()).sum();
    if shown == 0 {
        return Err(EvalError::NoPromptsShown);
    }
    let accepted: usize = events.iter().map(|e| e.accepted.len()).sum();
    Ok(accepted as f64 / shown as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    /// Recalls with at least one prompt shown.
    pub recalls_prompted: usize,
    pub recalls_accepting: usize,
    pub fraction_with_acceptance: f64,
    /// Mean total accepted foods over accepting recalls only.
    pub mean_accepted_among_accepting: Option<f64>,
}

/// Groups events by recall. Recalls that never saw a prompt have no events
/// and therefore do not enter the denominator.
pub fn acceptance_stats(events: &[PromptEvent]) -> AcceptanceStats {
    let totals = accepted_per_recall(events);
    let accepting: Vec<usize> = totals.values().copied().filter(|t| *t > 0).collect();
    let fraction_with_acceptance = if totals.is_empty() {
        0.0
    } else {
        accepting.len() as f64 / totals.len() as f64
    };
    let mean_accepted_among_accepting = if accepting.is_empty() {
        None
    } else {
        Some(accepting.iter().sum::<usize>() as f64 / accepting.len() as f64)
    };
    AcceptanceStats {
        recalls_prompted: totals.len(),
        recalls_accepting: accepting.len(),
        fraction_with_acceptance,
        mean_accepted_among_accepting,
    }
}

fn accepted_per_recall(events: &[PromptEvent]) -> BTreeMap<&str, usize> {
    let mut totals: BTreeMap<&str, usize> = BTreeMap::new();
    for e in events {
        *totals.entry(e.recall_id.as_str()).or_default() += e.accepted.len();
    }
    totals
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub unique_shown: usize,
    pub unique_accepted: usize,
    pub unique_reported: usize,
}

pub fn coverage_stats(events: &[PromptEvent], reported_foods: &FoodSet) -> CoverageStats {
    let shown: BTreeSet<&FoodCode> = events.iter().flat_map(|e| &e.shown).collect();
    let accepted: BTreeSet<&FoodCode> = events.iter().flat_map(|e| &e.accepted).collect();
    CoverageStats {
        unique_shown: shown.len(),
        unique_accepted: accepted.len(),
        unique_reported: reported_foods.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanStats {
    pub mean: Option<f64>,
    pub included: usize,
    /// Present but outside the inclusion rule.
    pub excluded: usize,
    /// Value absent from the record.
    pub missing: usize,
}

impl MeanStats {
    fn require(self) -> Result<Self, EvalError> {
        if self.mean.is_none() {
            return Err(EvalError::NoEligibleRecalls);
        }
        Ok(self)
    }
}

fn mean_of(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn included_energy(recalls: &[RecallDay], min_kcal: f64) -> (Vec<f64>, MeanStats) {
    let mut values = Vec::new();
    let (mut excluded, mut missing) = (0, 0);
    for r in recalls {
        match r.energy_kcal {
            None => missing += 1,
            Some(kcal) if kcal >= min_kcal => values.push(kcal),
            Some(_) => excluded += 1,
        }
    }
    let stats = MeanStats {
        mean: mean_of(&values),
        included: values.len(),
        excluded,
        missing,
    };
    (values, stats)
}

fn included_durations(recalls: &[RecallDay], max_minutes: f64) -> (Vec<f64>, MeanStats) {
    let (values, rest): (Vec<f64>, Vec<f64>) = recalls
        .iter()
        .map(|r| r.duration_minutes)
        .partition(|d| *d <= max_minutes);
    let stats = MeanStats {
        mean: mean_of(&values),
        included: values.len(),
        excluded: rest.len(),
        missing: 0,
    };
    (values, stats)
}

/// Mean reported energy over recalls at or above `min_kcal`. `mean` is
/// always present in the returned value.
pub fn energy_stats(recalls: &[RecallDay], min_kcal: f64) -> Result<MeanStats, EvalError> {
    included_energy(recalls, min_kcal).1.require()
}

/// Mean duration over recalls no longer than `max_minutes`. `mean` is
/// always present in the returned value.
pub fn duration_stats(recalls: &[RecallDay], max_minutes: f64) -> Result<MeanStats, EvalError> {
    included_durations(recalls, max_minutes).1.require()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmMetrics {
    pub arm: Arm,
    pub recalls: usize,
    pub prompt_events: usize,
    pub foods_shown: usize,
    pub foods_accepted: usize,
    pub precision: Option<f64>,
    pub acceptance: AcceptanceStats,
    pub coverage: CoverageStats,
    pub energy: MeanStats,
    pub duration: MeanStats,
}

/// Mann-Whitney comparisons between the two arms. A field is absent when
/// either arm has no observations for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmComparison {
    pub accepted_among_accepting: Option<MannWhitneyResult>,
    pub energy: Option<MannWhitneyResult>,
    pub duration: Option<MannWhitneyResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub min_kcal: f64,
    pub max_minutes: f64,
    pub arms: Vec<ArmMetrics>,
    pub comparison: ArmComparison,
}

/// Aggregates recall and prompt-event logs per arm. Events are attributed by
/// their prompt type; recalls by their arm tag.
pub fn arm_metrics(
    recalls: &[RecallDay],
    events: &[PromptEvent],
    min_kcal: f64,
    max_minutes: f64,
) -> MetricsReport {
    let mut arms = Vec::new();
    let mut samples: BTreeMap<Arm, [Vec<f64>; 3]> = BTreeMap::new();
    for arm in Arm::ALL {
        let arm_recalls: Vec<RecallDay> = recalls.iter().filter(|r| r.arm == arm).cloned().collect();
        let arm_events: Vec<PromptEvent> = events.iter().filter(|e| e.prompt_type == arm).cloned().collect();
        let reported: FoodSet = arm_recalls.iter().flat_map(RecallDay::reported_foods).collect();
        let (energies, energy) = included_energy(&arm_recalls, min_kcal);
        let (durations, duration) = included_durations(&arm_recalls, max_minutes);
        let accepting: Vec<f64> = accepted_per_recall(&arm_events)
            .values()
            .filter(|t| **t > 0)
            .map(|t| *t as f64)
            .collect();
        samples.insert(arm, [accepting, energies, durations]);
        arms.push(ArmMetrics {
            arm,
            recalls: arm_recalls.len(),
            prompt_events: arm_events.len(),
            foods_shown: arm_events.iter().map(|e| e.shown.len()).sum(),
            foods_accepted: arm_events.iter().map(|e| e.accepted.len()).sum(),
            precision: precision(&arm_events).ok(),
            acceptance: acceptance_stats(&arm_events),
            coverage: coverage_stats(&arm_events, &reported),
            energy,
            duration,
        });
    }
    let test = |i: usize| {
        let a = &samples[&Arm::Handcoded][i];
        let b = &samples[&Arm::Generated][i];
        mann_whitney_u(a, b).ok()
    };
    MetricsReport {
        min_kcal,
        max_minutes,
        arms,
        comparison: ArmComparison {
            accepted_among_accepting: test(0),
            energy: test(1),
            duration: test(2),
        },
    }
}
