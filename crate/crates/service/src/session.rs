//! Recall session state machine, independent of the HTTP layer.
//!
//! Handcoded sessions receive rule prompts as each food is added; generated
//! sessions receive one ranked checkbox list when a meal is finished. Every
//! prompt screen becomes a [`PromptEvent`] that is persisted with the recall.

use std::collections::HashSet;
use std::time::Instant;

use foodprompt::{
    validate_recall, Arm, AssociatedFoodRule, CoOccurrenceModel, DeviceClass, FoodCode, FoodSet, Meal,
    PairCounts, PromptEvent, RawMeal, RawRecall, Recommendation, RecallDay, RuleSet, DEFAULT_LIMIT,
};
use serde::Serialize;

use crate::error::ServiceError;

/// Longest chain of rule prompts triggered by accepting rule consequents.
pub const MAX_CHAIN_DEPTH: u8 = 5;

#[derive(Debug)]
struct MealDraft {
    meal: Meal,
    finished: bool,
    fired_rules: HashSet<String>,
}

#[derive(Debug)]
struct EventDraft {
    event: PromptEvent,
    answered: bool,
    depth: u8,
}

#[derive(Debug)]
pub struct Session {
    id: String,
    arm: Arm,
    respondent_id: String,
    device_class: DeviceClass,
    started_at: u64,
    last_active: Instant,
    meals: Vec<MealDraft>,
    events: Vec<EventDraft>,
    closed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RulePrompt {
    pub rule_id: String,
    pub food: FoodCode,
    pub prompt_text: String,
}

impl From<&AssociatedFoodRule> for RulePrompt {
    fn from(rule: &AssociatedFoodRule) -> Self {
        RulePrompt {
            rule_id: rule.rule_id.clone(),
            food: rule.consequent.clone(),
            prompt_text: rule.prompt_text.clone(),
        }
    }
}

/// Prompts returned right after a food is reported.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ImmediatePrompts {
    pub event_id: Option<String>,
    pub prompts: Vec<RulePrompt>,
}

/// Checkbox list returned when a meal is finished.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct GeneratedPrompts {
    pub event_id: Option<String>,
    pub recommendations: Vec<Recommendation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptOutcome {
    pub meal_index: usize,
    pub meal: RawMeal,
    pub follow_up: ImmediatePrompts,
}

impl Session {
    pub fn new(id: String, arm: Arm, respondent_id: String, device_class: DeviceClass, started_at: u64) -> Self {
        Session {
            id,
            arm,
            respondent_id,
            device_class,
            started_at,
            last_active: Instant::now(),
            meals: Vec::new(),
            events: Vec::new(),
            closed: false,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn arm(&self) -> Arm {
        self.arm
    }

    pub fn started_at(&self) -> u64 {
        self.started_at
    }

    pub fn last_active(&self) -> Instant {
        self.last_active
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn events(&self) -> impl Iterator<Item = &PromptEvent> {
        self.events.iter().map(|e| &e.event)
    }

    fn touch(&mut self) -> Result<(), ServiceError> {
        if self.closed {
            return Err(ServiceError::SessionClosed);
        }
        self.last_active = Instant::now();
        Ok(())
    }

    fn meal_mut(&mut self, index: usize) -> Result<&mut MealDraft, ServiceError> {
        self.meals.get_mut(index).ok_or(ServiceError::UnknownMeal(index))
    }

    pub fn add_meal(&mut self, name: &str) -> Result<usize, ServiceError> {
        self.touch()?;
        self.meals.push(MealDraft {
            meal: Meal::new(name, Vec::new()),
            finished: false,
            fired_rules: HashSet::new(),
        });
        Ok(self.meals.len() - 1)
    }

    pub fn add_food(
        &mut self,
        rules: Option<&RuleSet>,
        meal_index: usize,
        food: FoodCode,
    ) -> Result<ImmediatePrompts, ServiceError> {
        self.touch()?;
        let draft = self.meal_mut(meal_index)?;
        if draft.finished {
            return Err(ServiceError::MealFinished(meal_index));
        }
        draft.meal.push(food.clone());
        match (self.arm, rules) {
            (Arm::Handcoded, Some(rules)) => Ok(self.fire_rules(rules, meal_index, &[food], 1)),
            _ => Ok(ImmediatePrompts::default()),
        }
    }

    /// Fires rules for `reported` foods that have not fired in this meal and
    /// logs them as one prompt event.
    fn fire_rules(&mut self, rules: &RuleSet, meal_index: usize, reported: &[FoodCode], depth: u8) -> ImmediatePrompts {
        let draft = &mut self.meals[meal_index];
        let mut prompts: Vec<RulePrompt> = Vec::new();
        for food in reported {
            for rule in rules.prompts_for(food, draft.meal.food_set()) {
                if prompts.iter().any(|p| p.food == rule.consequent) {
                    continue;
                }
                if draft.fired_rules.insert(rule.rule_id.clone()) {
                    prompts.push(rule.into());
                }
            }
        }
        if prompts.is_empty() {
            return ImmediatePrompts::default();
        }
        let shown = prompts.iter().map(|p| p.food.clone()).collect();
        let event_id = self.log_event(meal_index, shown, depth);
        ImmediatePrompts {
            event_id: Some(event_id),
            prompts,
        }
    }

    fn log_event(&mut self, meal_index: usize, shown: Vec<FoodCode>, depth: u8) -> String {
        let event_id = format!("{}-e{}", self.id, self.events.len() + 1);
        self.events.push(EventDraft {
            event: PromptEvent {
                event_id: event_id.clone(),
                recall_id: self.id.clone(),
                meal_index,
                prompt_type: self.arm,
                shown,
                accepted: Vec::new(),
            },
            answered: false,
            depth,
        });
        event_id
    }

    /// Closes the meal. In the generated arm this returns the ranked list for
    /// the meal's foods; later acceptances do not re-trigger it.
    pub fn finish_meal(
        &mut self,
        model: Option<&CoOccurrenceModel>,
        meal_index: usize,
    ) -> Result<GeneratedPrompts, ServiceError> {
        self.touch()?;
        let draft = self.meal_mut(meal_index)?;
        if draft.finished {
            return Err(ServiceError::MealFinished(meal_index));
        }
        if draft.meal.is_empty() {
            return Err(ServiceError::EmptyMeal);
        }
        draft.finished = true;
        let foods: FoodSet = draft.meal.food_set().clone();
        let model = match (self.arm, model) {
            (Arm::Generated, Some(model)) => model,
            _ => return Ok(GeneratedPrompts::default()),
        };
        let recommendations = model
            .recommend(&foods, DEFAULT_LIMIT)
            .map_err(|e| ServiceError::InvalidInput(e.to_string()))?;
        if recommendations.is_empty() {
            return Ok(GeneratedPrompts::default());
        }
        let shown = recommendations.iter().map(|r| r.food.clone()).collect();
        let event_id = self.log_event(meal_index, shown, 1);
        Ok(GeneratedPrompts {
            event_id: Some(event_id),
            recommendations,
        })
    }

    /// Records the respondent's choice for a prompt event and adds accepted
    /// foods to the meal. Handcoded acceptances may fire follow-up rules.
    pub fn accept_prompts(
        &mut self,
        rules: Option<&RuleSet>,
        event_id: &str,
        accepted: Vec<FoodCode>,
    ) -> Result<AcceptOutcome, ServiceError> {
        self.touch()?;
        let position = self
            .events
            .iter()
            .position(|e| e.event.event_id == event_id)
            .ok_or_else(|| ServiceError::UnknownEvent(event_id.to_string()))?;
        let draft = &self.events[position];
        if draft.answered {
            return Err(ServiceError::AlreadyAnswered(event_id.to_string()));
        }
        if let Some(food) = accepted.iter().find(|f| !draft.event.shown.contains(f)) {
            return Err(ServiceError::NotShown(food.clone()));
        }
        let mut unique: Vec<FoodCode> = Vec::with_capacity(accepted.len());
        for food in accepted {
            if !unique.contains(&food) {
                unique.push(food);
            }
        }
        let meal_index = draft.event.meal_index;
        let depth = draft.depth;
        let draft = &mut self.events[position];
        draft.answered = true;
        draft.event.accepted = unique.clone();

        let meal = &mut self.meals[meal_index].meal;
        for food in &unique {
            if !meal.contains(food) {
                meal.push(food.clone());
            }
        }
        let follow_up = match (self.arm, rules) {
            (Arm::Handcoded, Some(rules)) if depth < MAX_CHAIN_DEPTH => {
                self.fire_rules(rules, meal_index, &unique, depth + 1)
            }
            _ => ImmediatePrompts::default(),
        };
        Ok(AcceptOutcome {
            meal_index,
            meal: self.meals[meal_index].meal.clone().into(),
            follow_up,
        })
    }

    /// Closes the session and produces the recall and its prompt events.
    pub fn submit(
        &mut self,
        duration_minutes: f64,
        energy_kcal: Option<f64>,
        submitted_at: u64,
    ) -> Result<(RecallDay, Vec<PromptEvent>), ServiceError> {
        let submission = self.prepare_submission(duration_minutes, energy_kcal, submitted_at)?;
        self.close();
        Ok(submission)
    }

    pub fn close(&mut self) {
        self.closed = true;
    }

    /// Builds the recall and its prompt events without closing the session.
    /// Empty meals are dropped and event meal indices renumbered to match.
    pub fn prepare_submission(
        &mut self,
        duration_minutes: f64,
        energy_kcal: Option<f64>,
        submitted_at: u64,
    ) -> Result<(RecallDay, Vec<PromptEvent>), ServiceError> {
        self.touch()?;
        let mut renumber = vec![None; self.meals.len()];
        let mut meals = Vec::new();
        for (index, draft) in self.meals.iter().enumerate() {
            if !draft.meal.is_empty() {
                renumber[index] = Some(meals.len());
                meals.push(RawMeal::from(draft.meal.clone()));
            }
        }
        if meals.is_empty() {
            return Err(ServiceError::EmptyRecall);
        }
        let raw = RawRecall {
            recall_id: self.id.clone(),
            respondent_id: self.respondent_id.clone(),
            meals,
            submitted_at,
            duration_minutes,
            device_class: self.device_class,
            energy_kcal,
            arm: self.arm,
        };
        let recall = validate_recall(&raw).map_err(|e| ServiceError::InvalidInput(e.to_string()))?;
        let events = self
            .events
            .iter()
            .map(|draft| {
                let mut event = draft.event.clone();
                event.meal_index = renumber[event.meal_index].expect("events only exist for non-empty meals");
                event
            })
            .collect();
        Ok((recall, events))
    }
}
