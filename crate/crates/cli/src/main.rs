mod commands;
mod error;
mod table;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use foodprompt_service::ArmPolicy;
use tracing_subscriber::EnvFilter;

#[derive(Debug, Parser)]
#[command(name = "foodprompt", version, about = "Food co-occurrence prompts for dietary recalls")]
struct Cli {
    /// Output style for results written to stdout.
    #[arg(long, value_enum, global = true, default_value_t = Format::Table)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Structured,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count foods and food pairs in a corpus and write a model file.
    Build {
        corpus: PathBuf,
        out: PathBuf,
        /// Drop pairs seen fewer times than this before saving.
        #[arg(long, default_value_t = 1)]
        min_pair_count: u64,
    },
    /// Rank foods likely to have been forgotten alongside the given foods.
    Recommend {
        model: PathBuf,
        #[arg(required = true)]
        foods: Vec<String>,
        #[arg(long, default_value_t = foodprompt::DEFAULT_LIMIT)]
        limit: usize,
        #[arg(long, default_value_t = 1)]
        min_pair_count: u64,
        /// Tab-separated code/name list used to show display names.
        #[arg(long)]
        food_list: Option<PathBuf>,
    },
    /// Leave-one-out recall@k of the recommender over a corpus.
    Evaluate {
        corpus: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 5, 15])]
        ks: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        min_pair_count: u64,
        /// Score against counts that still include the evaluated meal.
        #[arg(long)]
        train_on_all: bool,
        /// Also write the report as JSON to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-arm precision, acceptance, coverage, energy and duration.
    Stats {
        #[arg(long)]
        recalls: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[arg(long, default_value_t = foodprompt::evaluation::DEFAULT_MIN_KCAL)]
        min_kcal: f64,
        #[arg(long, default_value_t = foodprompt::evaluation::DEFAULT_MAX_MINUTES)]
        max_minutes: f64,
    },
    /// Run the survey HTTP service.
    Serve {
        #[arg(long, env = "FOODPROMPT_LISTEN", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long, env = "FOODPROMPT_MODEL")]
        model: Option<PathBuf>,
        #[arg(long, env = "FOODPROMPT_RULES")]
        rules: Option<PathBuf>,
        #[arg(long, env = "FOODPROMPT_FOODS")]
        foods: Option<PathBuf>,
        /// alternate, random, fixed:handcoded or fixed:generated
        #[arg(long, env = "FOODPROMPT_ARM_POLICY", default_value = "alternate")]
        arm_policy: ArmPolicy,
        #[arg(long, env = "FOODPROMPT_LOG_DIR", default_value = "logs")]
        log_dir: PathBuf,
        #[arg(long, env = "FOODPROMPT_SEED", default_value_t = 0)]
        seed: u64,
        /// Idle sessions are dropped after this many hours.
        #[arg(long, default_value_t = 24)]
        session_ttl_hours: u64,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let format = cli.format;
    let result = match cli.command {
        Command::Build {
            corpus,
            out,
            min_pair_count,
        } => commands::build(&corpus, &out, min_pair_count, format),
        Command::Recommend {
            model,
            foods,
            limit,
            min_pair_count,
            food_list,
        } => commands::recommend(&model, &foods, limit, min_pair_count, food_list.as_deref(), format),
        Command::Evaluate {
            corpus,
            ks,
            min_pair_count,
            train_on_all,
            out,
        } => commands::evaluate(&corpus, ks, min_pair_count, train_on_all, out.as_deref(), format),
        Command::Stats {
            recalls,
            events,
            min_kcal,
            max_minutes,
        } => commands::stats(&recalls, &events, min_kcal, max_minutes, format),
        Command::Serve {
            listen,
            model,
            rules,
            foods,
            arm_policy,
            log_dir,
            seed,
            session_ttl_hours,
        } => commands::serve(commands::ServeArgs {
            listen,
            model,
            rules,
            foods,
            arm_policy,
            log_dir,
            seed,
            session_ttl: std::time::Duration::from_secs(session_ttl_hours.saturating_mul(3600)),
            format,
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
