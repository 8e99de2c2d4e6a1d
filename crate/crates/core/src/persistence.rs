//! Line-oriented file formats for corpora, models, rules, recall logs,
//! prompt-event logs and food lists. Layouts are documented in
//! `docs/formats.md`. Every writer is deterministic.

use std::fmt::Write as _;
use std::io::BufRead;

use thiserror::Error;

use crate::error::{ModelError, RuleError};
use crate::evaluation::PromptEvent;
use crate::model::CoOccurrenceModel;
use crate::rules::RuleSet;
use crate::types::{validate_recall, Corpus, FoodCode, Meal, RawRecall, RecallDay};

pub const MODEL_MAGIC: &str = "foodprompt-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },
    #[error("corpus contains no meals")]
    EmptyCorpus,
    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt counts: {0}")]
    CorruptCounts(String),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PersistError {
    fn parse(line: usize, message: impl Into<String>) -> Self {
        PersistError::Parse {
            line,
            message: message.into(),
        }
    }
}

/// Yields `(line_number, text)` for non-blank, non-comment lines.
fn content_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String), PersistError>> {
    reader.lines().enumerate().filter_map(|(index, line)| match line {
        Err(e) => Some(Err(PersistError::Io(e))),
        Ok(text) => {
            let trimmed = text.trim_start();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                None
            } else {
                Some(Ok((index + 1, text)))
            }
        }
    })
}

/// One meal per line, whitespace-separated food codes.
pub fn parse_corpus<R: BufRead>(reader: R, source_label: &str) -> Result<Corpus, PersistError> {
    let mut meals = Vec::new();
    for item in content_lines(reader) {
        let (line, text) = item?;
        let entries = text
            .split_whitespace()
            .map(|token| FoodCode::new(token).map_err(|e| PersistError::parse(line, e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        meals.push(Meal::new("", entries));
    }
    if meals.is_empty() {
        return Err(PersistError::EmptyCorpus);
    }
    Corpus::new(meals, source_label).map_err(|e| PersistError::parse(0, e.to_string()))
}

pub fn write_corpus(corpus: &Corpus) -> String {
    let mut out = String::new();
    for meal in corpus.meals() {
        let codes: Vec<&str> = meal.entries().iter().map(FoodCode::as_str).collect();
        out.push_str(&codes.join(" "));
        out.push('\n');
    }
    out
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            other => out.push(other),
        }
    }
    out
}

fn unescape(text: &str, line: usize) -> Result<String, PersistError> {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => return Err(PersistError::parse(line, format!("bad escape sequence {other:?}"))),
        }
    }
    Ok(out)
}

/// Serializes a model. Foods and pairs are written in lexicographic order so
/// the output is byte-identical for equal models.
pub fn save_model(model: &CoOccurrenceModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MODEL_MAGIC}\t{MODEL_FORMAT_VERSION}");
    let _ = writeln!(out, "label\t{}", escape(model.corpus_label()));
    let _ = writeln!(out, "built_at\t{}", model.built_at());
    let _ = writeln!(out, "meals\t{}", model.total_meals());
    for (food, count) in model.food_counts() {
        let _ = writeln!(out, "food\t{food}\t{count}");
    }
    for (a, b, count) in model.pairs() {
        let _ = writeln!(out, "pair\t{a}\t{b}\t{count}");
    }
    out
}

pub fn load_model<R: BufRead>(reader: R) -> Result<CoOccurrenceModel, PersistError> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(PersistError::parse(1, "empty model file")),
    };
    let version = match header.split_once('\t') {
        Some((MODEL_MAGIC, v)) => v
            .parse::<u32>()
            .map_err(|_| PersistError::parse(1, format!("bad version '{v}'")))?,
        _ => return Err(PersistError::parse(1, "missing model header")),
    };
    if version != MODEL_FORMAT_VERSION {
        return Err(PersistError::VersionMismatch {
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }

    let mut label = None;
    let mut built_at = None;
    let mut meals = None;
    let mut foods = Vec::new();
    let mut pairs = Vec::new();
    for (index, line) in lines {
        let line_no = index + 1;
        let text = line?;
        if text.is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split('\t').collect();
        let count = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| PersistError::parse(line_no, format!("bad count '{s}'")))
        };
        let code = |s: &str| FoodCode::new(s).map_err(|e| PersistError::parse(line_no, e.to_string()));
        let duplicate = |what: &str| PersistError::parse(line_no, format!("duplicate {what} line"));
        match fields.as_slice() {
            ["label", value] => {
                if label.replace(unescape(value, line_no)?).is_some() {
                    return Err(duplicate("label"));
                }
            }
            ["built_at", value] => {
                if built_at.replace(count(value)?).is_some() {
                    return Err(duplicate("built_at"));
                }
            }
            ["meals", value] => {
                if meals.replace(count(value)?).is_some() {
                    return Err(duplicate("meals"));
                }
            }
            ["food", food, n] => foods.push((code(food)?, count(n)?)),
            ["pair", a, b, n] => {
                let (a, b) = (code(a)?, code(b)?);
                if a >= b {
                    return Err(PersistError::CorruptCounts(format!(
                        "line {line_no}: pair '{a}' '{b}' not in ascending order"
                    )));
                }
                pairs.push((a, b, count(n)?));
            }
            _ => return Err(PersistError::parse(line_no, "unrecognized record")),
        }
    }
    let meals = meals.ok_or_else(|| PersistError::parse(0, "missing meals line"))?;
    CoOccurrenceModel::from_counts(label.unwrap_or_default(), built_at.unwrap_or(0), meals, foods, pairs).map_err(
        |e| match e {
            ModelError::CorruptCounts(message) => PersistError::CorruptCounts(message),
            other => PersistError::CorruptCounts(other.to_string()),
        },
    )
}

pub fn parse_rules<R: BufRead>(mut reader: R) -> Result<RuleSet, PersistError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    Ok(RuleSet::parse(&text)?)
}

/// One JSON object per line, validated as a recall.
pub fn parse_recall_log<R: BufRead>(reader: R) -> Result<Vec<RecallDay>, PersistError> {
    let mut recalls = Vec::new();
    for item in content_lines(reader) {
        let (line, text) = item?;
        let raw: RawRecall =
            serde_json::from_str(&text).map_err(|e| PersistError::parse(line, e.to_string()))?;
        let day = validate_recall(&raw).map_err(|e| PersistError::Validation {
            line,
            message: e.to_string(),
        })?;
        recalls.push(day);
    }
    Ok(recalls)
}

pub fn recall_line(day: &RecallDay) -> String {
    serde_json::to_string(&RawRecall::from(day)).expect("recall serializes")
}

pub fn write_recall_log(recalls: &[RecallDay]) -> String {
    recalls.iter().map(|r| recall_line(r) + "\n").collect()
}

pub fn parse_prompt_events<R: BufRead>(reader: R) -> Result<Vec<PromptEvent>, PersistError> {
    let mut events = Vec::new();
    for item in content_lines(reader) {
        let (line, text) = item?;
        let event: PromptEvent =
            serde_json::from_str(&text).map_err(|e| PersistError::parse(line, e.to_string()))?;
        event.validate().map_err(|e| PersistError::Validation {
            line,
            message: e.to_string(),
        })?;
        events.push(event);
    }
    Ok(events)
}

pub fn event_line(event: &PromptEvent) -> String {
    serde_json::to_string(event).expect("event serializes")
}

pub fn write_prompt_events(events: &[PromptEvent]) -> String {
    events.iter().map(|e| event_line(e) + "\n").collect()
}

/// A searchable food with its display name.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FoodListEntry {
    pub code: FoodCode,
    pub name: String,
}

/// `code<TAB>display name` per line.
pub fn parse_food_list<R: BufRead>(reader: R) -> Result<Vec<FoodListEntry>, PersistError> {
    let mut entries = Vec::new();
    for item in content_lines(reader) {
        let (line, text) = item?;
        let (code, name) = text
            .split_once('\t')
            .ok_or_else(|| PersistError::parse(line, "expected code<TAB>name"))?;
        let code = FoodCode::new(code).map_err(|e| PersistError::parse(line, e.to_string()))?;
        entries.push(FoodListEntry {
            code,
            name: name.trim().to_string(),
        });
    }
    Ok(entries)
}
