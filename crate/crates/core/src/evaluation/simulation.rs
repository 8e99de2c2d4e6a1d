//! Leave-one-out omission simulation.
//!
//! Every food of every meal with at least two foods is held out in turn; the
//! rest of the meal is fed to the recommender and the rank of the held-out
//! food is recorded. By default the evaluated meal's own contribution is
//! subtracted from the model first so it cannot support its own prediction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::model::{CoOccurrenceModel, PairCounts, RecommendOptions};
use crate::types::{Corpus, FoodCode, FoodSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Leakage {
    /// Subtract the evaluated meal from the counts before recommending.
    #[default]
    HoldOutMeal,
    /// Score against the model trained on every meal, evaluated one included.
    TrainOnAll,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulationConfig {
    pub ks: Vec<usize>,
    pub min_pair_count: u64,
    pub leakage: Leakage,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            ks: vec![1, 5, 15],
            min_pair_count: 1,
            leakage: Leakage::HoldOutMeal,
        }
    }
}

impl SimulationConfig {
    fn max_k(&self) -> Result<usize, EvalError> {
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(EvalError::InvalidKs);
        }
        Ok(self.ks.iter().copied().max().unwrap_or(1))
    }
}

/// One held-out food and where it landed in the ranking (1-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub meal_index: usize,
    pub held_out: FoodCode,
    pub rank: Option<usize>,
}

impl CaseOutcome {
    pub fn hit_at(&self, k: usize) -> bool {
        self.rank.is_some_and(|r| r <= k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub corpus_label: String,
    pub ks: Vec<usize>,
    pub recall_at_k: BTreeMap<usize, f64>,
    pub hits_at_k: BTreeMap<usize, u64>,
    pub cases_evaluated: u64,
    pub meals_evaluated: u64,
    pub min_pair_count: u64,
    pub leakage: Leakage,
}

impl EvaluationReport {
    /// Aggregates case outcomes into recall@k for each requested k.
    pub fn from_cases(
        corpus_label: impl Into<String>,
        config: &SimulationConfig,
        cases: &[CaseOutcome],
    ) -> Result<Self, EvalError> {
        config.max_k()?;
        if cases.is_empty() {
            return Err(EvalError::NoEligibleMeals);
        }
        let mut ks = config.ks.clone();
        ks.sort_unstable();
        ks.dedup();
        let mut hits_at_k = BTreeMap::new();
        let mut recall_at_k = BTreeMap::new();
        for &k in &ks {
            let hits = cases.iter().filter(|c| c.hit_at(k)).count() as u64;
            hits_at_k.insert(k, hits);
            recall_at_k.insert(k, hits as f64 / cases.len() as f64);
        }
        let mut meals: Vec<usize> = cases.iter().map(|c| c.meal_index).collect();
        meals.dedup();
        Ok(EvaluationReport {
            corpus_label: corpus_label.into(),
            ks,
            recall_at_k,
            hits_at_k,
            cases_evaluated: cases.len() as u64,
            meals_evaluated: meals.len() as u64,
            min_pair_count: config.min_pair_count,
            leakage: config.leakage,
        })
    }
}

pub fn simulate_leave_one_out(
    corpus: &Corpus,
    config: &SimulationConfig,
) -> Result<EvaluationReport, EvalError> {
    let cases = leave_one_out_cases(corpus, config)?;
    EvaluationReport::from_cases(corpus.source_label(), config, &cases)
}

/// Per-case outcomes, using the rayon pool when the `parallel` feature is on.
pub fn leave_one_out_cases(corpus: &Corpus, config: &SimulationConfig) -> Result<Vec<CaseOutcome>, EvalError> {
    #[cfg(feature = "parallel")]
    {
        leave_one_out_cases_parallel(corpus, config)
    }
    #[cfg(not(feature = "parallel"))]
    {
        leave_one_out_cases_sequential(corpus, config)
    }
}

fn prepare(corpus: &Corpus, config: &SimulationConfig) -> Result<(CoOccurrenceModel, RecommendOptions), EvalError> {
    let limit = config.max_k()?;
    if !corpus.meals().iter().any(|m| m.food_set().len() >= 2) {
        return Err(EvalError::NoEligibleMeals);
    }
    let model = CoOccurrenceModel::build(corpus)?;
    let options = RecommendOptions {
        limit,
        min_pair_count: config.min_pair_count,
    };
    Ok((model, options))
}

fn evaluate_meal<C: PairCounts>(
    counts: &C,
    meal_index: usize,
    foods: &FoodSet,
    options: &RecommendOptions,
) -> Result<Vec<CaseOutcome>, EvalError> {
    let mut out = Vec::with_capacity(foods.len());
    for held_out in foods {
        let mut reported = foods.clone();
        reported.remove(held_out);
        let ranked = counts.recommend_with(&reported, options)?;
        let rank = ranked.iter().position(|r| &r.food == held_out).map(|p| p + 1);
        out.push(CaseOutcome {
            meal_index,
            held_out: held_out.clone(),
            rank,
        });
    }
    Ok(out)
}

/// Single-threaded path: decrements the evaluated meal in place and restores
/// it afterwards.
pub fn leave_one_out_cases_sequential(
    corpus: &Corpus,
    config: &SimulationConfig,
) -> Result<Vec<CaseOutcome>, EvalError> {
    let (mut model, options) = prepare(corpus, config)?;
    let mut cases = Vec::new();
    for (meal_index, meal) in corpus.meals().iter().enumerate() {
        let foods = meal.food_set();
        if foods.len() < 2 {
            continue;
        }
        match config.leakage {
            Leakage::HoldOutMeal => {
                model.remove_meal(foods)?;
                let outcome = evaluate_meal(&model, meal_index, foods, &options);
                model.add_meal(foods);
                cases.extend(outcome?);
            }
            Leakage::TrainOnAll => cases.extend(evaluate_meal(&model, meal_index, foods, &options)?),
        }
    }
    Ok(cases)
}

/// Data-parallel path over meals: each worker reads a shared immutable model
/// through a held-out view.
#[cfg(feature = "parallel")]
pub fn leave_one_out_cases_parallel(
    corpus: &Corpus,
    config: &SimulationConfig,
) -> Result<Vec<CaseOutcome>, EvalError> {
    use rayon::prelude::*;

    let (model, options) = prepare(corpus, config)?;
    let per_meal: Vec<Vec<CaseOutcome>> = corpus
        .meals()
        .par_iter()
        .enumerate()
        .filter(|(_, meal)| meal.food_set().len() >= 2)
        .map(|(meal_index, meal)| {
            let foods = meal.food_set();
            match config.leakage {
                Leakage::HoldOutMeal => evaluate_meal(&model.without_meal(foods), meal_index, foods, &options),
                Leakage::TrainOnAll => evaluate_meal(&model, meal_index, foods, &options),
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(per_meal.into_iter().flatten().collect())
}
