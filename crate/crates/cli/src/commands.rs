use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use foodprompt::evaluation::{
    arm_metrics, simulate_leave_one_out, EvaluationReport, Leakage, MannWhitneyResult, MetricsReport, SimulationConfig,
};
use foodprompt::persistence::{
    load_model, parse_corpus, parse_food_list, parse_prompt_events, parse_recall_log, parse_rules, save_model,
    FoodListEntry, PersistError,
};
use foodprompt::{Arm, CoOccurrenceModel, FoodCode, FoodSet, PairCounts, RecommendOptions};
use foodprompt_service::{bind, AppState, ArmPolicy, ServiceConfig, Snapshot};
use serde_json::json;

use crate::error::CliError;
use crate::table::{fixed, optional, Table};
use crate::Format;

type CliResult = Result<(), CliError>;

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn load<T>(path: &Path, parse: impl FnOnce(BufReader<File>) -> Result<T, PersistError>) -> Result<T, CliError> {
    parse(open(path)?).map_err(|e| CliError::load(path, e))
}

fn label_of(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}

fn emit_json(value: &impl serde::Serialize) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(CliError::validation)?;
    emit(&(text + "\n"));
    Ok(())
}

/// Build timestamp: `SOURCE_DATE_EPOCH` when set, otherwise 0 so that
/// rebuilding the same corpus gives identical bytes.
fn build_timestamp() -> Result<u64, CliError> {
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(format!("SOURCE_DATE_EPOCH is not an integer: '{v}'"))),
        Err(_) => Ok(0),
    }
}

pub fn build(corpus_path: &Path, out: &Path, min_pair_count: u64, format: Format) -> CliResult {
    let label = label_of(corpus_path);
    let corpus = load(corpus_path, |r| parse_corpus(r, &label))?;
    let model = CoOccurrenceModel::build(&corpus)
        .map_err(CliError::validation)?
        .prune(min_pair_count.max(1))
        .with_built_at(build_timestamp()?);
    fs::write(out, save_model(&model)).map_err(|e| CliError::io(out, e))?;
    match format {
        Format::Structured => emit_json(&json!({
            "model": out.display().to_string(),
            "foods": model.distinct_foods(),
            "pairs": model.distinct_pairs(),
            "meals": model.total_meals(),
        })),
        Format::Table => {
            emit(&format!(
                "wrote {}: {} foods, {} pairs, {} meals\n",
                out.display(),
                model.distinct_foods(),
                model.distinct_pairs(),
                model.total_meals()
            ));
            Ok(())
        }
    }
}

pub fn recommend(
    model_path: &Path,
    foods: &[String],
    limit: usize,
    min_pair_count: u64,
    food_list: Option<&Path>,
    format: Format,
) -> CliResult {
    let model = load(model_path, load_model)?;
    let names: HashMap<FoodCode, String> = match food_list {
        Some(path) => load(path, parse_food_list)?
            .into_iter()
            .map(|FoodListEntry { code, name }| (code, name))
            .collect(),
        None => HashMap::new(),
    };
    let mut reported = FoodSet::new();
    let mut unknown = Vec::new();
    for raw in foods {
        let code = FoodCode::new(raw).map_err(CliError::validation)?;
        if model.contains_food(&code) {
            reported.insert(code);
        } else {
            eprintln!("warning: food '{code}' does not occur in the model");
            unknown.push(code);
        }
    }
    let options = RecommendOptions { limit, min_pair_count };
    let recommendations = if reported.is_empty() {
        if limit == 0 {
            return Err(CliError::validation("limit must be at least 1"));
        }
        Vec::new()
    } else {
        model.recommend_with(&reported, &options).map_err(CliError::validation)?
    };
    match format {
        Format::Structured => emit_json(&json!({
            "reported": reported,
            "unknown": unknown,
            "recommendations": recommendations,
        })),
        Format::Table => {
            let show_names = food_list.is_some();
            let mut headers = vec!["rank", "food"];
            if show_names {
                headers.push("name");
            }
            headers.extend(["score", "aggregate", "weight"]);
            let mut table = Table::new(headers);
            for (i, r) in recommendations.iter().enumerate() {
                let mut cells = vec![(i + 1).to_string(), r.food.to_string()];
                if show_names {
                    cells.push(names.get(&r.food).cloned().unwrap_or_default());
                }
                cells.extend([fixed(r.score), fixed(r.aggregate), r.weight.to_string()]);
                table.row(cells);
            }
            emit(&table.render());
            Ok(())
        }
    }
}

pub fn evaluate(
    corpus_path: &Path,
    ks: Vec<usize>,
    min_pair_count: u64,
    train_on_all: bool,
    out: Option<&Path>,
    format: Format,
) -> CliResult {
    let label = label_of(corpus_path);
    let corpus = load(corpus_path, |r| parse_corpus(r, &label))?;
    let config = SimulationConfig {
        ks,
        min_pair_count,
        leakage: if train_on_all { Leakage::TrainOnAll } else { Leakage::HoldOutMeal },
    };
    let report = simulate_leave_one_out(&corpus, &config).map_err(CliError::validation)?;
    if let Some(path) = out {
        let text = serde_json::to_string_pretty(&report).map_err(CliError::validation)?;
        fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))?;
    }
    match format {
        Format::Structured => emit_json(&report),
        Format::Table => {
            emit(&evaluation_table(&report));
            Ok(())
        }
    }
}

fn evaluation_table(report: &EvaluationReport) -> String {
    let mut table = Table::new(["k", "hits", "recall"]);
    for k in &report.ks {
        table.row([
            k.to_string(),
            report.hits_at_k[k].to_string(),
            fixed(report.recall_at_k[k]),
        ]);
    }
    format!(
        "{}: {} held-out foods over {} meals\n{}",
        report.corpus_label,
        report.cases_evaluated,
        report.meals_evaluated,
        table.render()
    )
}

pub fn stats(recalls_path: &Path, events_path: &Path, min_kcal: f64, max_minutes: f64, format: Format) -> CliResult {
    let recalls = load(recalls_path, parse_recall_log)?;
    let events = load(events_path, parse_prompt_events)?;
    for event in &events {
        event.validate().map_err(CliError::validation)?;
    }
    let report = arm_metrics(&recalls, &events, min_kcal, max_minutes);
    match format {
        Format::Structured => emit_json(&report),
        Format::Table => {
            emit(&metrics_table(&report));
            Ok(())
        }
    }
}

fn metrics_table(report: &MetricsReport) -> String {
    let mut headers = vec!["metric".to_string()];
    headers.extend(report.arms.iter().map(|a| a.arm.to_string()));
    let mut table = Table::new(headers);
    let mut row = |name: &str, cell: &dyn Fn(&foodprompt::evaluation::ArmMetrics) -> String| {
        let mut cells = vec![name.to_string()];
        cells.extend(report.arms.iter().map(cell));
        table.row(cells);
    };
    row("recalls", &|a| a.recalls.to_string());
    row("prompt events", &|a| a.prompt_events.to_string());
    row("foods shown", &|a| a.foods_shown.to_string());
    row("foods accepted", &|a| a.foods_accepted.to_string());
    row("precision", &|a| optional(a.precision));
    row("recalls prompted", &|a| a.acceptance.recalls_prompted.to_string());
    row("fraction accepting", &|a| fixed(a.acceptance.fraction_with_acceptance));
    row("mean accepted (accepting)", &|a| optional(a.acceptance.mean_accepted_among_accepting));
    row("unique shown", &|a| a.coverage.unique_shown.to_string());
    row("unique accepted", &|a| a.coverage.unique_accepted.to_string());
    row("unique reported", &|a| a.coverage.unique_reported.to_string());
    row(&format!("energy kcal (>= {})", report.min_kcal), &|a| optional(a.energy.mean));
    row("energy included", &|a| a.energy.included.to_string());
    row(&format!("duration min (<= {})", report.max_minutes), &|a| optional(a.duration.mean));
    row("duration included", &|a| a.duration.included.to_string());

    let mut comparison = Table::new(["comparison", "U", "z", "p"]);
    for (name, result) in [
        ("accepted among accepting", &report.comparison.accepted_among_accepting),
        ("energy", &report.comparison.energy),
        ("duration", &report.comparison.duration),
    ] {
        comparison.row(match result {
            Some(MannWhitneyResult {
                u_statistic,
                z_score,
                p_two_sided,
                ..
            }) => [name.to_string(), fixed(*u_statistic), fixed(*z_score), fixed(*p_two_sided)],
            None => [name.to_string(), "-".into(), "-".into(), "-".into()],
        });
    }
    format!("{}\n{}", table.render(), comparison.render())
}

pub struct ServeArgs {
    pub listen: SocketAddr,
    pub model: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub foods: Option<PathBuf>,
    pub arm_policy: ArmPolicy,
    pub log_dir: PathBuf,
    pub seed: u64,
    pub session_ttl: Duration,
    pub format: Format,
}

fn required_arms(policy: ArmPolicy) -> Vec<Arm> {
    match policy {
        ArmPolicy::Fixed(arm) => vec![arm],
        ArmPolicy::Alternate | ArmPolicy::Random => Arm::ALL.to_vec(),
    }
}

pub fn serve(args: ServeArgs) -> CliResult {
    let snapshot = Snapshot {
        model: args.model.as_deref().map(|p| load(p, load_model)).transpose()?,
        rules: args.rules.as_deref().map(|p| load(p, parse_rules)).transpose()?,
        foods: args.foods.as_deref().map(|p| load(p, parse_food_list)).transpose()?.unwrap_or_default(),
    };
    for arm in required_arms(args.arm_policy) {
        let missing = match arm {
            Arm::Handcoded if snapshot.rules.is_none() => Some("--rules"),
            Arm::Generated if snapshot.model.is_none() => Some("--model"),
            _ => None,
        };
        if let Some(flag) = missing {
            return Err(CliError::Validation(format!(
                "arm policy '{}' assigns {arm} sessions but {flag} was not given",
                args.arm_policy
            )));
        }
    }
    let config = ServiceConfig {
        arm_policy: args.arm_policy,
        seed: args.seed,
        log_dir: args.log_dir.clone(),
        session_ttl: args.session_ttl,
    };
    let state = AppState::new(snapshot, &config).map_err(|e| CliError::io(&args.log_dir, std::io::Error::other(e.to_string())))?;

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::io(Path::new("<runtime>"), e))?;
    runtime.block_on(async move {
        let (local, server) = bind(Arc::new(state), args.listen)
            .await
            .map_err(|e| CliError::io(Path::new(&args.listen.to_string()), e))?;
        match args.format {
            Format::Structured => emit(&format!("{}\n", json!({ "listening": local.to_string() }))),
            Format::Table => emit(&format!("listening on http://{local}\n")),
        }
        tokio::select! {
            result = server => result.map_err(|e| CliError::io(Path::new(&local.to_string()), e)),
            _ = tokio::signal::ctrl_c() => Ok(()),
        }
    })
}
