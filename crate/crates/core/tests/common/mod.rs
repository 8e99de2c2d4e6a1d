#![allow(dead_code)]

pub mod oracle;

use foodprompt::{Corpus, FoodCode, FoodSet, Meal};
use proptest::prelude::*;

pub fn code(s: &str) -> FoodCode {
    FoodCode::new(s).unwrap()
}

pub fn set(codes: &[&str]) -> FoodSet {
    codes.iter().map(|c| code(c)).collect()
}

pub fn corpus(meals: &[&[&str]]) -> Corpus {
    Corpus::new(meals.iter().map(|m| Meal::from_codes(m.iter())).collect(), "test").unwrap()
}

pub fn toast_corpus() -> Corpus {
    corpus(&[
        &["toast", "butter"],
        &["toast", "butter", "jam"],
        &["toast"],
        &["coffee", "milk"],
    ])
}

/// Meals of 1..=6 entries (duplicates allowed) over `foods` codes f00..fNN.
pub fn arb_meals(max_meals: usize, foods: usize) -> impl Strategy<Value = Vec<Meal>> {
    let meal = prop::collection::vec(0..foods, 1..=6)
        .prop_map(|ids| Meal::from_codes(ids.iter().map(|i| format!("f{i:02}"))));
    prop::collection::vec(meal, 1..=max_meals)
}

pub fn arb_corpus(max_meals: usize, foods: usize) -> impl Strategy<Value = Corpus> {
    arb_meals(max_meals, foods).prop_map(|meals| Corpus::new(meals, "random").unwrap())
}
