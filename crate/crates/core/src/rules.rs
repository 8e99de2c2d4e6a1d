//! Hand-coded associated food rules: the baseline prompting strategy.
//!
//! A rule links an antecedent food to a consequent food and fires as soon as
//! the antecedent is reported, unless the consequent is already in the meal.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::RuleError;
use crate::types::{FoodCode, FoodSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociatedFoodRule {
    pub rule_id: String,
    pub antecedent: FoodCode,
    pub consequent: FoodCode,
    pub prompt_text: String,
}

/// Validated rules in file order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RuleSet {
    rules: Vec<AssociatedFoodRule>,
}

impl RuleSet {
    pub fn new(rules: Vec<AssociatedFoodRule>) -> Result<Self, RuleError> {
        let mut seen = HashSet::new();
        for (index, rule) in rules.iter().enumerate() {
            let line = index + 1;
            if rule.antecedent == rule.consequent {
                return Err(RuleError::SelfRule {
                    line,
                    food: rule.antecedent.clone(),
                });
            }
            if !seen.insert((&rule.antecedent, &rule.consequent)) {
                return Err(RuleError::DuplicateRule {
                    line,
                    antecedent: rule.antecedent.clone(),
                    consequent: rule.consequent.clone(),
                });
            }
        }
        Ok(RuleSet { rules })
    }

    /// Parses the tab-separated rule file:
    /// `rule_id<TAB>antecedent<TAB>consequent<TAB>prompt text`.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse(source: &str) -> Result<Self, RuleError> {
        let mut rules = Vec::new();
        let mut seen = HashSet::new();
        for (index, raw_line) in source.lines().enumerate() {
            let line = index + 1;
            let text = raw_line.strip_suffix('\r').unwrap_or(raw_line);
            if text.trim().is_empty() || text.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = text.splitn(4, '\t').collect();
            if fields.len() != 4 {
                return Err(RuleError::Parse {
                    line,
                    message: format!("expected 4 tab-separated fields, found {}", fields.len()),
                });
            }
            let rule_id = fields[0].trim();
            if rule_id.is_empty() {
                return Err(RuleError::Parse {
                    line,
                    message: "empty rule id".into(),
                });
            }
            let food = |field: &str| {
                FoodCode::new(field).map_err(|e| RuleError::Parse {
                    line,
                    message: e.to_string(),
                })
            };
            let antecedent = food(fields[1])?;
            let consequent = food(fields[2])?;
            if antecedent == consequent {
                return Err(RuleError::SelfRule { line, food: antecedent });
            }
            if !seen.insert((antecedent.clone(), consequent.clone())) {
                return Err(RuleError::DuplicateRule {
                    line,
                    antecedent,
                    consequent,
                });
            }
            rules.push(AssociatedFoodRule {
                rule_id: rule_id.to_string(),
                antecedent,
                consequent,
                prompt_text: fields[3].to_string(),
            });
        }
        Ok(RuleSet { rules })
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for r in &self.rules {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", r.rule_id, r.antecedent, r.consequent, r.prompt_text);
        }
        out
    }

    pub fn rules(&self) -> &[AssociatedFoodRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Rules triggered by `just_reported` whose consequent is not yet in the
    /// meal, in file order.
    pub fn prompts_for(&self, just_reported: &FoodCode, meal_so_far: &FoodSet) -> Vec<&AssociatedFoodRule> {
        self.rules
            .iter()
            .filter(|r| &r.antecedent == just_reported && !meal_so_far.contains(&r.consequent))
            .collect()
    }
}
