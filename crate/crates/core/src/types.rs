//! Reported-intake vocabulary: food codes, meals, recall days and corpora.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ValidationError, ValidationIssue};

/// Opaque food identifier. Compared byte-exact, case preserved.
///
/// Codes are trimmed on construction, may not contain whitespace or control
/// characters and may not start with `#`, so they survive the whitespace-separated corpus
/// format and the tab-separated rule and model formats unchanged.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FoodCode(String);

impl FoodCode {
    pub fn new(raw: &str) -> Result<Self, ValidationIssue> {
        let code = raw.trim();
        if code.is_empty() {
            return Err(ValidationIssue::EmptyFoodCode);
        }
        if code.starts_with('#') || code.chars().any(|c| c.is_whitespace() || c.is_control()) {
            return Err(ValidationIssue::InvalidFoodCode(code.to_string()));
        }
        Ok(FoodCode(code.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FoodCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for FoodCode {
    type Error = ValidationIssue;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        FoodCode::new(&value)
    }
}

impl TryFrom<&str> for FoodCode {
    type Error = ValidationIssue;

    fn try_from(value: &str) -> Result<Self, Self::Error> {
        FoodCode::new(value)
    }
}

impl From<FoodCode> for String {
    fn from(code: FoodCode) -> String {
        code.0
    }
}

impl AsRef<str> for FoodCode {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Deduplicated set of foods. This is what every modeling operation consumes.
pub type FoodSet = BTreeSet<FoodCode>;

/// A group of foods reported in a single intake.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMeal", into = "RawMeal")]
pub struct Meal {
    name: String,
    entries: Vec<FoodCode>,
    food_set: FoodSet,
}

impl Meal {
    pub fn new(name: impl Into<String>, entries: Vec<FoodCode>) -> Self {
        let food_set = entries.iter().cloned().collect();
        Meal {
            name: name.into(),
            entries,
            food_set,
        }
    }

    /// Builds an unnamed meal from string codes. Panics on an invalid code,
    /// so it is meant for fixtures and literals.
    pub fn from_codes<I, S>(codes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let entries = codes
            .into_iter()
            .map(|c| FoodCode::new(c.as_ref()).expect("invalid food code literal"))
            .collect();
        Meal::new("", entries)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Foods in the order they were reported, duplicates included.
    pub fn entries(&self) -> &[FoodCode] {
        &self.entries
    }

    pub fn food_set(&self) -> &FoodSet {
        &self.food_set
    }

    pub fn contains(&self, food: &FoodCode) -> bool {
        self.food_set.contains(food)
    }

    pub fn push(&mut self, food: FoodCode) {
        self.food_set.insert(food.clone());
        self.entries.push(food);
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawMeal {
    #[serde(default)]
    pub name: String,
    pub foods: Vec<String>,
}

impl TryFrom<RawMeal> for Meal {
    type Error = ValidationIssue;

    fn try_from(raw: RawMeal) -> Result<Self, Self::Error> {
        let entries = raw
            .foods
            .iter()
            .map(|f| FoodCode::new(f))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Meal::new(raw.name, entries))
    }
}

impl From<Meal> for RawMeal {
    fn from(meal: Meal) -> Self {
        RawMeal {
            name: meal.name,
            foods: meal.entries.into_iter().map(String::from).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceClass {
    Desktop,
    Mobile,
    Tablet,
    #[default]
    Unknown,
}

/// Prompting condition a survey session runs under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Handcoded,
    Generated,
}

impl Arm {
    pub const ALL: [Arm; 2] = [Arm::Handcoded, Arm::Generated];

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Handcoded => "handcoded",
            Arm::Generated => "generated",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Arm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "handcoded" => Ok(Arm::Handcoded),
            "generated" => Ok(Arm::Generated),
            other => Err(format!("unknown arm '{other}'")),
        }
    }
}

/// One submitted day of reported intake.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallDay {
    pub recall_id: String,
    pub respondent_id: String,
    pub meals: Vec<Meal>,
    /// Seconds since the Unix epoch.
    pub submitted_at: u64,
    pub duration_minutes: f64,
    pub device_class: DeviceClass,
    /// Supplied by the nutrient pipeline upstream; never derived here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_kcal: Option<f64>,
    pub arm: Arm,
}

impl RecallDay {
    /// Union of foods over every meal of the day.
    pub fn reported_foods(&self) -> FoodSet {
        self.meals
            .iter()
            .flat_map(|m| m.food_set().iter().cloned())
            .collect()
    }
}

/// Recall record as read from an external source, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecall {
    pub recall_id: String,
    pub respondent_id: String,
    pub meals: Vec<RawMeal>,
    pub submitted_at: u64,
    pub duration_minutes: f64,
    #[serde(default)]
    pub device_class: DeviceClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_kcal: Option<f64>,
    pub arm: Arm,
}

impl From<&RecallDay> for RawRecall {
    fn from(day: &RecallDay) -> Self {
        RawRecall {
            recall_id: day.recall_id.clone(),
            respondent_id: day.respondent_id.clone(),
            meals: day.meals.iter().cloned().map(RawMeal::from).collect(),
            submitted_at: day.submitted_at,
            duration_minutes: day.duration_minutes,
            device_class: day.device_class,
            energy_kcal: day.energy_kcal,
            arm: day.arm,
        }
    }
}

/// Validates a raw recall, collecting every violated invariant.
pub fn validate_recall(raw: &RawRecall) -> Result<RecallDay, ValidationError> {
    let mut issues = Vec::new();
    if raw.meals.is_empty() {
        issues.push(ValidationIssue::EmptyRecall);
    }
    let mut meals = Vec::with_capacity(raw.meals.len());
    for (index, meal) in raw.meals.iter().enumerate() {
        let mut entries = Vec::with_capacity(meal.foods.len());
        for food in &meal.foods {
            match FoodCode::new(food) {
                Ok(code) => entries.push(code),
                Err(issue) => issues.push(ValidationIssue::InMeal {
                    meal: index,
                    issue: Box::new(issue),
                }),
            }
        }
        if meal.foods.is_empty() {
            issues.push(ValidationIssue::EmptyMeal(index));
        }
        meals.push(Meal::new(meal.name.clone(), entries));
    }
    if !raw.duration_minutes.is_finite() || raw.duration_minutes < 0.0 {
        issues.push(ValidationIssue::NegativeDuration(raw.duration_minutes));
    }
    if let Some(kcal) = raw.energy_kcal {
        if !kcal.is_finite() || kcal < 0.0 {
            issues.push(ValidationIssue::NegativeEnergy(kcal));
        }
    }
    if !issues.is_empty() {
        return Err(ValidationError { issues });
    }
    Ok(RecallDay {
        recall_id: raw.recall_id.clone(),
        respondent_id: raw.respondent_id.clone(),
        meals,
        submitted_at: raw.submitted_at,
        duration_minutes: raw.duration_minutes,
        device_class: raw.device_class,
        energy_kcal: raw.energy_kcal,
        arm: raw.arm,
    })
}

/// Flattened meals from a set of training recalls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    meals: Vec<Meal>,
    source_label: String,
}

impl Corpus {
    /// Rejects meals without any food.
    pub fn new(meals: Vec<Meal>, source_label: impl Into<String>) -> Result<Self, ValidationIssue> {
        if let Some(index) = meals.iter().position(Meal::is_empty) {
            return Err(ValidationIssue::EmptyMeal(index));
        }
        Ok(Corpus {
            meals,
            source_label: source_label.into(),
        })
    }

    /// Flattens the meals of several recall days.
    pub fn from_recalls<'a>(
        recalls: impl IntoIterator<Item = &'a RecallDay>,
        source_label: impl Into<String>,
    ) -> Result<Self, ValidationIssue> {
        let meals = recalls
            .into_iter()
            .flat_map(|r| r.meals.iter().cloned())
            .collect();
        Corpus::new(meals, source_label)
    }

    pub fn meals(&self) -> &[Meal] {
        &self.meals
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn len(&self) -> usize {
        self.meals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meals.is_empty()
    }
}
