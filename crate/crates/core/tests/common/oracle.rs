// Brute-force reference scoring: every count is recomputed by scanning the
// raw meals, with no model or adjacency structure involved.

#![allow(dead_code)]

use std::collections::BTreeSet;

use foodprompt::{FoodCode, FoodSet, Meal};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRec {
    pub food: FoodCode,
    pub aggregate: f64,
    pub weight: u64,
    pub score: f64,
    pub supporting: Vec<(FoodCode, u64)>,
}

fn meals_with(meals: &[&Meal], foods: &[&FoodCode]) -> u64 {
    meals
        .iter()
        .filter(|m| foods.iter().all(|f| m.entries().contains(f)))
        .count() as u64
}

/// Ranks every food in `meals` not in `reported`, skipping `exclude_meal`.
pub fn oracle_recommend(
    meals: &[Meal],
    exclude_meal: Option<usize>,
    reported: &FoodSet,
    limit: usize,
    min_pair_count: u64,
) -> Vec<OracleRec> {
    let kept: Vec<&Meal> = meals
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude_meal)
        .map(|(_, m)| m)
        .collect();
    let all_foods: BTreeSet<&FoodCode> = kept.iter().flat_map(|m| m.entries()).collect();
    let given_counts: Vec<(&FoodCode, u64)> = reported.iter().map(|g| (g, meals_with(&kept, &[g]))).collect();
    let mut out = Vec::new();
    for candidate in all_foods {
        if reported.contains(candidate) {
            continue;
        }
        let mut aggregate = 0.0;
        let mut weight = 0u64;
        let mut supporting = Vec::new();
        for &(given, given_count) in &given_counts {
            if given_count == 0 {
                continue;
            }
            let pair = meals_with(&kept, &[given, candidate]);
            if pair >= min_pair_count.max(1) {
                aggregate += pair as f64 / given_count as f64;
                weight += given_count;
                supporting.push((given.clone(), pair));
            }
        }
        if weight > 0 {
            out.push(OracleRec {
                food: candidate.clone(),
                aggregate,
                weight,
                score: aggregate * weight as f64,
                supporting,
            });
        }
    }
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.food.cmp(&b.food)));
    out.truncate(limit);
    out
}

/// 1-based rank of `held_out` when the rest of meal `meal_index` is reported
/// and that meal is removed from the counts.
pub fn oracle_leave_one_out_rank(
    meals: &[Meal],
    meal_index: usize,
    held_out: &FoodCode,
    limit: usize,
) -> Option<usize> {
    let mut reported = meals[meal_index].food_set().clone();
    reported.remove(held_out);
    oracle_recommend(meals, Some(meal_index), &reported, limit, 1)
        .iter()
        .position(|r| &r.food == held_out)
        .map(|p| p + 1)
}

pub fn relative_close(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs());
    scale == 0.0 || (a - b).abs() <= tol * scale
}
