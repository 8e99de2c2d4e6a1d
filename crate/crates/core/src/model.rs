//! Pairwise co-occurrence model and the association-rule scoring built on it.
//!
//! A model stores, over a corpus of meals, the number of meals containing each
//! food and the number of meals containing each unordered pair of distinct
//! foods. Given the foods reported so far in a meal, every food seen in a pair
//! with one of them becomes a candidate and is scored as
//!
//! ```text
//! C = sum over reported f_i of count(f, f_i) / count(f_i)
//! W = sum of count(f_i) over reported f_i that share a pair with f
//! R = C * W
//! ```
//!
//! Candidates are ranked by `R` descending, ties by food code ascending.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::types::{Corpus, FoodCode, FoodSet};

/// Prompt list size used by the end-of-meal checkbox screen.
pub const DEFAULT_LIMIT: usize = 15;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoOccurrenceModel {
    total_meals: u64,
    food_count: BTreeMap<FoodCode, u64>,
    // Symmetric adjacency: every pair is stored under both foods.
    neighbors: BTreeMap<FoodCode, BTreeMap<FoodCode, u64>>,
    built_at: u64,
    corpus_label: String,
}

/// A candidate omitted food with its score components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub food: FoodCode,
    pub score: f64,
    pub aggregate: f64,
    pub weight: u64,
    /// Reported foods that paired with `food`, with the pair count.
    pub supporting: Vec<(FoodCode, u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub aggregate: f64,
    pub weight: u64,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecommendOptions {
    pub limit: usize,
    /// Pairs seen fewer times than this are treated as absent.
    pub min_pair_count: u64,
}

impl Default for RecommendOptions {
    fn default() -> Self {
        RecommendOptions {
            limit: DEFAULT_LIMIT,
            min_pair_count: 1,
        }
    }
}

impl RecommendOptions {
    pub fn with_limit(limit: usize) -> Self {
        RecommendOptions {
            limit,
            ..Default::default()
        }
    }
}

/// Read access to meal, food and pair counts.
///
/// Scoring is written once against this trait so that a model and a
/// leave-one-meal-out view of it rank identically.
pub trait PairCounts {
    fn total_meals(&self) -> u64;

    fn food_count(&self, food: &FoodCode) -> u64;

    fn pair_count(&self, a: &FoodCode, b: &FoodCode) -> u64;

    /// Visits every food that shares at least one meal with `food`.
    fn for_each_neighbor(&self, food: &FoodCode, visit: &mut dyn FnMut(&FoodCode, u64));

    /// `pairCount{candidate, given} / foodCount(given)`.
    fn conditional_probability(&self, candidate: &FoodCode, given: &FoodCode) -> Result<f64, ModelError> {
        if candidate == given {
            return Err(ModelError::SelfPair(given.clone()));
        }
        let given_count = self.food_count(given);
        if given_count == 0 {
            return Err(ModelError::UnknownGivenFood(given.clone()));
        }
        Ok(self.pair_count(candidate, given) as f64 / given_count as f64)
    }

    fn score(&self, reported: &FoodSet, candidate: &FoodCode) -> Result<Score, ModelError> {
        self.score_with(reported, candidate, 1)
    }

    fn score_with(
        &self,
        reported: &FoodSet,
        candidate: &FoodCode,
        min_pair_count: u64,
    ) -> Result<Score, ModelError> {
        if reported.is_empty() {
            return Err(ModelError::EmptyReportedSet);
        }
        if reported.contains(candidate) {
            return Err(ModelError::CandidateIsReported(candidate.clone()));
        }
        let min_pair_count = min_pair_count.max(1);
        let mut aggregate = 0.0;
        let mut weight = 0;
        for given in reported {
            let given_count = self.food_count(given);
            if given_count == 0 {
                continue;
            }
            let pair = self.pair_count(candidate, given);
            if pair >= min_pair_count {
                aggregate += pair as f64 / given_count as f64;
                weight += given_count;
            }
        }
        Ok(Score {
            aggregate,
            weight,
            score: aggregate * weight as f64,
        })
    }

    /// Ranked candidates for a meal whose reported foods are `reported`.
    fn recommend(&self, reported: &FoodSet, limit: usize) -> Result<Vec<Recommendation>, ModelError> {
        self.recommend_with(reported, &RecommendOptions::with_limit(limit))
    }

    fn recommend_with(
        &self,
        reported: &FoodSet,
        options: &RecommendOptions,
    ) -> Result<Vec<Recommendation>, ModelError> {
        if reported.is_empty() {
            return Err(ModelError::EmptyReportedSet);
        }
        if options.limit == 0 {
            return Err(ModelError::ZeroLimit);
        }
        let min_pair_count = options.min_pair_count.max(1);

        struct Acc {
            aggregate: f64,
            weight: u64,
            supporting: Vec<(FoodCode, u64)>,
        }
        let mut candidates: BTreeMap<FoodCode, Acc> = BTreeMap::new();
        for given in reported {
            let given_count = self.food_count(given);
            if given_count == 0 {
                continue;
            }
            self.for_each_neighbor(given, &mut |other, pair| {
                if pair < min_pair_count || reported.contains(other) {
                    return;
                }
                let acc = candidates.entry(other.clone()).or_insert(Acc {
                    aggregate: 0.0,
                    weight: 0,
                    supporting: Vec::new(),
                });
                acc.aggregate += pair as f64 / given_count as f64;
                acc.weight += given_count;
                acc.supporting.push((given.clone(), pair));
            });
        }

        let mut ranked: Vec<Recommendation> = candidates
            .into_iter()
            .map(|(food, acc)| Recommendation {
                food,
                score: acc.aggregate * acc.weight as f64,
                aggregate: acc.aggregate,
                weight: acc.weight,
                supporting: acc.supporting,
            })
            .collect();
        ranked.sort_by(rank_order);
        ranked.truncate(options.limit);
        Ok(ranked)
    }
}

/// Descending score, then ascending food code.
pub fn rank_order(a: &Recommendation, b: &Recommendation) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.food.cmp(&b.food))
}

impl CoOccurrenceModel {
    pub fn new(corpus_label: impl Into<String>) -> Self {
        CoOccurrenceModel {
            corpus_label: corpus_label.into(),
            ..Default::default()
        }
    }

    /// Counts foods and unique food pairs over every meal of the corpus.
    pub fn build(corpus: &Corpus) -> Result<Self, ModelError> {
        if corpus.is_empty() {
            return Err(ModelError::EmptyCorpus);
        }
        Ok(Self::build_sequential(corpus))
    }

    fn build_sequential(corpus: &Corpus) -> Self {
        let mut model = CoOccurrenceModel::new(corpus.source_label());
        for meal in corpus.meals() {
            model.add_meal(meal.food_set());
        }
        model
    }

    /// Builds per shard on the rayon pool and merges the shards.
    #[cfg(feature = "parallel")]
    pub fn build_parallel(corpus: &Corpus) -> Result<Self, ModelError> {
        use rayon::prelude::*;

        if corpus.is_empty() {
            return Err(ModelError::EmptyCorpus);
        }
        let shard = (corpus.len() / rayon::current_num_threads().max(1)).max(64);
        let mut model = corpus
            .meals()
            .par_chunks(shard)
            .map(|meals| {
                let mut part = CoOccurrenceModel::default();
                for meal in meals {
                    part.add_meal(meal.food_set());
                }
                part
            })
            .reduce(CoOccurrenceModel::default, |a, b| a.merge(&b));
        model.corpus_label = corpus.source_label().to_string();
        Ok(model)
    }

    pub fn total_meals(&self) -> u64 {
        self.total_meals
    }

    pub fn corpus_label(&self) -> &str {
        &self.corpus_label
    }

    /// Seconds since the Unix epoch; zero unless set explicitly.
    pub fn built_at(&self) -> u64 {
        self.built_at
    }

    pub fn with_built_at(mut self, built_at: u64) -> Self {
        self.built_at = built_at;
        self
    }

    pub fn with_corpus_label(mut self, label: impl Into<String>) -> Self {
        self.corpus_label = label.into();
        self
    }

    pub fn food_counts(&self) -> impl Iterator<Item = (&FoodCode, u64)> {
        self.food_count.iter().map(|(f, c)| (f, *c))
    }

    /// Every stored pair once, smaller code first, in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (&FoodCode, &FoodCode, u64)> {
        self.neighbors.iter().flat_map(|(a, row)| {
            row.range::<FoodCode, _>((std::ops::Bound::Excluded(a), std::ops::Bound::Unbounded))
                .map(move |(b, c)| (a, b, *c))
        })
    }

    pub fn distinct_foods(&self) -> usize {
        self.food_count.len()
    }

    pub fn distinct_pairs(&self) -> usize {
        self.pairs().count()
    }

    pub fn contains_food(&self, food: &FoodCode) -> bool {
        self.food_count.contains_key(food)
    }

    /// Adds one meal's contribution to every count.
    pub fn add_meal(&mut self, foods: &FoodSet) {
        self.total_meals += 1;
        for food in foods {
            *self.food_count.entry(food.clone()).or_default() += 1;
        }
        for a in foods {
            for b in foods {
                if a != b {
                    *self
                        .neighbors
                        .entry(a.clone())
                        .or_default()
                        .entry(b.clone())
                        .or_default() += 1;
                }
            }
        }
    }

    /// Removes one meal's contribution. Entries that drop to zero are
    /// deleted, so removing then re-adding a meal restores the model exactly.
    pub fn remove_meal(&mut self, foods: &FoodSet) -> Result<(), ModelError> {
        if self.total_meals == 0 || foods.iter().any(|f| self.food_count(f) == 0) {
            return Err(ModelError::MealNotInModel);
        }
        for a in foods {
            for b in foods {
                if a < b && self.pair_count(a, b) == 0 {
                    return Err(ModelError::MealNotInModel);
                }
            }
        }
        self.total_meals -= 1;
        for food in foods {
            decrement(&mut self.food_count, food);
        }
        for a in foods {
            if let Some(row) = self.neighbors.get_mut(a) {
                for b in foods {
                    if a != b {
                        decrement(row, b);
                    }
                }
                if row.is_empty() {
                    self.neighbors.remove(a);
                }
            }
        }
        Ok(())
    }

    /// Element-wise sum of all counts. Equal to building over the
    /// concatenated corpora.
    pub fn merge(mut self, other: &CoOccurrenceModel) -> CoOccurrenceModel {
        self.total_meals += other.total_meals;
        for (food, count) in &other.food_count {
            *self.food_count.entry(food.clone()).or_default() += count;
        }
        for (a, row) in &other.neighbors {
            let mine = self.neighbors.entry(a.clone()).or_default();
            for (b, count) in row {
                *mine.entry(b.clone()).or_default() += count;
            }
        }
        self.built_at = self.built_at.max(other.built_at);
        if self.corpus_label.is_empty() {
            self.corpus_label = other.corpus_label.clone();
        } else if !other.corpus_label.is_empty() && other.corpus_label != self.corpus_label {
            self.corpus_label = format!("{}+{}", self.corpus_label, other.corpus_label);
        }
        self
    }

    /// Drops pairs observed fewer than `min_pair_count` times.
    pub fn prune(mut self, min_pair_count: u64) -> CoOccurrenceModel {
        for row in self.neighbors.values_mut() {
            row.retain(|_, c| *c >= min_pair_count);
        }
        self.neighbors.retain(|_, row| !row.is_empty());
        self
    }

    /// True when meal, food and pair counts agree, ignoring metadata.
    pub fn counts_eq(&self, other: &CoOccurrenceModel) -> bool {
        self.total_meals == other.total_meals
            && self.food_count == other.food_count
            && self.neighbors == other.neighbors
    }

    /// Assembles a model from stored counts, checking every invariant.
    pub fn from_counts(
        corpus_label: impl Into<String>,
        built_at: u64,
        total_meals: u64,
        food_counts: impl IntoIterator<Item = (FoodCode, u64)>,
        pair_counts: impl IntoIterator<Item = (FoodCode, FoodCode, u64)>,
    ) -> Result<Self, ModelError> {
        let mut model = CoOccurrenceModel {
            total_meals,
            built_at,
            corpus_label: corpus_label.into(),
            ..Default::default()
        };
        for (food, count) in food_counts {
            if count == 0 {
                return Err(ModelError::CorruptCounts(format!("food '{food}' has zero count")));
            }
            if model.food_count.insert(food.clone(), count).is_some() {
                return Err(ModelError::CorruptCounts(format!("food '{food}' listed twice")));
            }
        }
        for (a, b, count) in pair_counts {
            if a == b {
                return Err(ModelError::CorruptCounts(format!("self-pair '{a}'")));
            }
            if count == 0 {
                return Err(ModelError::CorruptCounts(format!("pair '{a}' '{b}' has zero count")));
            }
            let previous = model.neighbors.entry(a.clone()).or_default().insert(b.clone(), count);
            model.neighbors.entry(b.clone()).or_default().insert(a.clone(), count);
            if previous.is_some() {
                return Err(ModelError::CorruptCounts(format!("pair '{a}' '{b}' listed twice")));
            }
        }
        model.check_invariants()?;
        Ok(model)
    }

    pub fn check_invariants(&self) -> Result<(), ModelError> {
        for (food, count) in &self.food_count {
            if *count > self.total_meals {
                return Err(ModelError::CorruptCounts(format!(
                    "food '{food}' count {count} exceeds total meals {}",
                    self.total_meals
                )));
            }
        }
        for (a, b, count) in self.pairs() {
            let (ca, cb) = (self.food_count(a), self.food_count(b));
            if ca == 0 || cb == 0 {
                return Err(ModelError::CorruptCounts(format!(
                    "pair '{a}' '{b}' references a food without a count"
                )));
            }
            if count > ca.min(cb) {
                return Err(ModelError::CorruptCounts(format!(
                    "pair '{a}' '{b}' count {count} exceeds food count {}",
                    ca.min(cb)
                )));
            }
        }
        Ok(())
    }

    /// Counts as they would be had `meal` never been ingested. The meal must
    /// be one of the model's own meals.
    pub fn without_meal<'a>(&'a self, meal: &'a FoodSet) -> HeldOutMeal<'a> {
        HeldOutMeal { model: self, meal }
    }
}

fn decrement(map: &mut BTreeMap<FoodCode, u64>, key: &FoodCode) {
    if let Some(count) = map.get_mut(key) {
        *count -= 1;
        if *count == 0 {
            map.remove(key);
        }
    }
}

impl PairCounts for CoOccurrenceModel {
    fn total_meals(&self) -> u64 {
        self.total_meals
    }

    fn food_count(&self, food: &FoodCode) -> u64 {
        self.food_count.get(food).copied().unwrap_or(0)
    }

    fn pair_count(&self, a: &FoodCode, b: &FoodCode) -> u64 {
        self.neighbors
            .get(a)
            .and_then(|row| row.get(b))
            .copied()
            .unwrap_or(0)
    }

    fn for_each_neighbor(&self, food: &FoodCode, visit: &mut dyn FnMut(&FoodCode, u64)) {
        if let Some(row) = self.neighbors.get(food) {
            for (other, count) in row {
                visit(other, *count);
            }
        }
    }
}

/// Read-only view of a model with one meal's contribution subtracted.
#[derive(Debug, Clone, Copy)]
pub struct HeldOutMeal<'a> {
    model: &'a CoOccurrenceModel,
    meal: &'a FoodSet,
}

impl PairCounts for HeldOutMeal<'_> {
    fn total_meals(&self) -> u64 {
        self.model.total_meals.saturating_sub(1)
    }

    fn food_count(&self, food: &FoodCode) -> u64 {
        let count = self.model.food_count(food);
        count.saturating_sub(self.meal.contains(food) as u64)
    }

    fn pair_count(&self, a: &FoodCode, b: &FoodCode) -> u64 {
        let count = self.model.pair_count(a, b);
        let in_meal = a != b && self.meal.contains(a) && self.meal.contains(b);
        count.saturating_sub(in_meal as u64)
    }

    fn for_each_neighbor(&self, food: &FoodCode, visit: &mut dyn FnMut(&FoodCode, u64)) {
        let food_in_meal = self.meal.contains(food);
        self.model.for_each_neighbor(food, &mut |other, count| {
            let count = count - (food_in_meal && self.meal.contains(other)) as u64;
            if count > 0 {
                visit(other, count);
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Meal;

    fn code(s: &str) -> FoodCode {
        FoodCode::new(s).unwrap()
    }

    fn set(codes: &[&str]) -> FoodSet {
        codes.iter().map(|c| code(c)).collect()
    }

    fn corpus(meals: &[&[&str]]) -> Corpus {
        Corpus::new(meals.iter().map(|m| Meal::from_codes(m.iter())).collect(), "test").unwrap()
    }

    fn toast_model() -> CoOccurrenceModel {
        CoOccurrenceModel::build(&corpus(&[
            &["toast", "butter"],
            &["toast", "butter", "jam"],
            &["toast"],
            &["coffee", "milk"],
        ]))
        .unwrap()
    }

    #[test]
    fn counts_pairs_by_enumeration() {
        let m = CoOccurrenceModel::build(&corpus(&[&["A", "B"], &["A", "B", "C"]])).unwrap();
        assert_eq!(m.total_meals(), 2);
        assert_eq!(m.food_count(&code("A")), 2);
        assert_eq!(m.food_count(&code("B")), 2);
        assert_eq!(m.food_count(&code("C")), 1);
        let pairs: Vec<_> = m.pairs().map(|(a, b, c)| (a.as_str(), b.as_str(), c)).collect();
        assert_eq!(pairs, vec![("A", "B", 2), ("A", "C", 1), ("B", "C", 1)]);
        assert_eq!(m.pair_count(&code("C"), &code("A")), 1);
    }

    #[test]
    fn singleton_meal_has_no_pairs() {
        let m = CoOccurrenceModel::build(&corpus(&[&["A"]])).unwrap();
        assert_eq!(m.food_count(&code("A")), 1);
        assert_eq!(m.distinct_pairs(), 0);
    }

    #[test]
    fn duplicate_entries_count_once() {
        let dup = CoOccurrenceModel::build(&corpus(&[&["A", "A", "B"]])).unwrap();
        let plain = CoOccurrenceModel::build(&corpus(&[&["A", "B"]])).unwrap();
        assert_eq!(dup, plain);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let empty = Corpus::new(vec![], "none").unwrap();
        assert_eq!(CoOccurrenceModel::build(&empty), Err(ModelError::EmptyCorpus));
    }

    #[test]
    fn merge_matches_single_build() {
        let a = CoOccurrenceModel::build(&corpus(&[&["A", "B"]])).unwrap();
        let b = CoOccurrenceModel::build(&corpus(&[&["A", "C"]])).unwrap();
        let both = CoOccurrenceModel::build(&corpus(&[&["A", "B"], &["A", "C"]])).unwrap();
        assert!(a.clone().merge(&b).counts_eq(&both));
        assert!(b.clone().merge(&a).counts_eq(&both));
        assert!(a.clone().merge(&CoOccurrenceModel::default()).counts_eq(&a));
    }

    #[test]
    fn conditional_probability_from_counts() {
        let m = toast_model();
        assert_eq!(m.conditional_probability(&code("butter"), &code("toast")), Ok(2.0 / 3.0));
        assert_eq!(m.conditional_probability(&code("toast"), &code("coffee")), Ok(0.0));
        assert_eq!(
            m.conditional_probability(&code("toast"), &code("toast")),
            Err(ModelError::SelfPair(code("toast")))
        );
        assert_eq!(
            m.conditional_probability(&code("toast"), &code("tea")),
            Err(ModelError::UnknownGivenFood(code("tea")))
        );
    }

    #[test]
    fn score_worked_examples() {
        let m = toast_model();
        let s = m.score(&set(&["toast"]), &code("butter")).unwrap();
        assert_eq!(s.aggregate, 2.0 / 3.0);
        assert_eq!(s.weight, 3);
        assert!((s.score - 2.0).abs() < 1e-12);

        let s = m.score(&set(&["toast", "jam"]), &code("butter")).unwrap();
        assert!((s.aggregate - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.weight, 4);
        assert!((s.score - 20.0 / 3.0).abs() < 1e-12);

        let s = m.score(&set(&["coffee"]), &code("toast")).unwrap();
        assert_eq!((s.aggregate, s.weight, s.score), (0.0, 0, 0.0));

        assert_eq!(
            m.score(&set(&["toast"]), &code("toast")),
            Err(ModelError::CandidateIsReported(code("toast")))
        );
    }

    #[test]
    fn recommend_worked_examples() {
        let m = toast_model();
        let recs = m.recommend(&set(&["toast"]), 15).unwrap();
        let got: Vec<_> = recs.iter().map(|r| (r.food.as_str(), r.score)).collect();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].0, "butter");
        assert!((got[0].1 - 2.0).abs() < 1e-12);
        assert_eq!(got[1].0, "jam");
        assert!((got[1].1 - 1.0).abs() < 1e-12);
        assert_eq!(recs[0].supporting, vec![(code("toast"), 2)]);

        let recs = m.recommend(&set(&["coffee"]), 15).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].food, code("milk"));
        assert_eq!(recs[0].score, 1.0);

        let all = set(&["toast", "butter", "jam", "coffee", "milk"]);
        assert!(m.recommend(&all, 15).unwrap().is_empty());

        assert_eq!(m.recommend(&FoodSet::new(), 15), Err(ModelError::EmptyReportedSet));
        assert_eq!(m.recommend(&set(&["toast"]), 0), Err(ModelError::ZeroLimit));
        assert_eq!(m.recommend(&set(&["toast"]), 1).unwrap().len(), 1);
    }

    #[test]
    fn min_pair_count_filters_rare_pairs() {
        let m = toast_model();
        let options = RecommendOptions {
            limit: 15,
            min_pair_count: 2,
        };
        let recs = m.recommend_with(&set(&["toast"]), &options).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].food, code("butter"));
    }

    #[test]
    fn remove_then_add_restores() {
        let original = toast_model();
        let mut m = original.clone();
        let meal = set(&["toast", "butter", "jam"]);
        m.remove_meal(&meal).unwrap();
        assert_eq!(m.pair_count(&code("butter"), &code("jam")), 0);
        assert_eq!(m.food_count(&code("jam")), 0);
        m.add_meal(&meal);
        assert_eq!(m, original);
        assert_eq!(m.remove_meal(&set(&["coffee", "toast"])), Err(ModelError::MealNotInModel));
    }

    #[test]
    fn held_out_view_equals_removed_model() {
        let model = toast_model();
        let meal = set(&["toast", "butter"]);
        let mut removed = model.clone();
        removed.remove_meal(&meal).unwrap();
        let view = model.without_meal(&meal);
        let reported = set(&["toast"]);
        assert_eq!(
            view.recommend(&reported, 15).unwrap(),
            removed.recommend(&reported, 15).unwrap()
        );
        assert_eq!(view.total_meals(), 3);
    }

    #[test]
    fn from_counts_rejects_pair_above_food_count() {
        let err = CoOccurrenceModel::from_counts(
            "x",
            0,
            5,
            [(code("A"), 2), (code("B"), 5)],
            [(code("A"), code("B"), 5)],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::CorruptCounts(_)));
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_build_matches_sequential() {
        let meals: Vec<Meal> = (0..500)
            .map(|i| Meal::from_codes([format!("f{}", i % 7), format!("f{}", i % 11), format!("g{}", i % 3)]))
            .collect();
        let corpus = Corpus::new(meals, "synthetic").unwrap();
        let seq = CoOccurrenceModel::build(&corpus).unwrap();
        let par = CoOccurrenceModel::build_parallel(&corpus).unwrap();
        assert_eq!(seq, par);
    }
}
