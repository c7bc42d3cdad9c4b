mod config;

use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use odes_core::accounts::Role;
use odes_core::model::{CategoryId, ExamId, ExamSpecDraft};
use odes_core::persistence::Store;
use odes_core::service::ResultSummary;
use odes_core::{Odes, OdesError, Points};
use tracing_subscriber::EnvFilter;

use config::Config;

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "odes", version, about = "Online examination service: server and operator tools")]
struct Cli {
    /// Configuration file (flat TOML: listen, storage, admin_token).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service until interrupted.
    Serve,
    /// Load questions from a JSON Lines file.
    ImportBank {
        file: PathBuf,
        /// Print the summary as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Create an exam from the command line.
    CreateExam(CreateExam),
    /// Print results as an aligned table.
    ListResults {
        #[arg(long)]
        exam: Option<u64>,
    },
    /// Write an exam's results as CSV to standard output.
    ExportCsv {
        #[arg(long)]
        exam: u64,
    },
    /// Create a teacher (or admin) account and print its token.
    AddTeacher {
        username: String,
        #[arg(long)]
        admin: bool,
    },
}

#[derive(clap::Args)]
struct CreateExam {
    #[arg(long)]
    title: String,
    /// Source category, by id or slug.
    #[arg(long)]
    category: String,
    #[arg(long)]
    slug: Option<String>,
    #[arg(long)]
    description: Option<String>,
    #[arg(long, default_value_t = 0)]
    n_mc: u32,
    #[arg(long, default_value_t = 0)]
    n_essay: u32,
    #[arg(long, default_value = "0")]
    w_mc: Points,
    #[arg(long, default_value = "0")]
    penalty_mc: Points,
    #[arg(long, default_value = "0")]
    w_essay: Points,
    #[arg(long, default_value_t = 10)]
    max_rating: u32,
    /// Give every student the same questions in the same order.
    #[arg(long)]
    no_randomize: bool,
    #[arg(long)]
    publish: bool,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_target(false)
        .init();
    let cli = Cli::parse();
    let config = match Config::load(cli.config.as_deref(), |k| std::env::var(k).ok()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: bad config: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run(cli.command, &config) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILED)
        }
    }
}

fn open(config: &Config) -> Result<Odes, OdesError> {
    let store = Store::open(&config.storage)?;
    Ok(Odes::new(store, config.admin_token.as_deref()))
}

fn run(command: Command, config: &Config) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let operator = Odes::operator();
    match command {
        Command::Serve => serve(config),
        Command::ImportBank { file, json } => {
            let input = read_input(&file)?;
            let odes = open(config)?;
            let summary = odes.import_bank(&operator, &input)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&summary)?);
            } else {
                println!(
                    "created {} questions ({} new categories), {} duplicates, {} errors",
                    summary.created,
                    summary.categories_created,
                    summary.duplicates.len(),
                    summary.errors.len()
                );
                for line in &summary.duplicates {
                    println!("line {line}: duplicate, skipped");
                }
                for e in &summary.errors {
                    let field = e.field.as_deref().map(|f| format!(" [{f}]")).unwrap_or_default();
                    println!("line {}: {}{field}: {}", e.line, e.code, e.message);
                }
            }
            Ok(if summary.is_clean() { ExitCode::SUCCESS } else { ExitCode::from(EXIT_FAILED) })
        }
        Command::CreateExam(args) => {
            let odes = open(config)?;
            let category = resolve_category(&odes, &args.category)?;
            let spec = odes.create_exam(
                &operator,
                &ExamSpecDraft {
                    title: args.title,
                    slug: args.slug,
                    description: args.description,
                    source_category: category,
                    n_mc: args.n_mc,
                    n_essay: args.n_essay,
                    w_mc: args.w_mc,
                    penalty_mc: args.penalty_mc,
                    w_essay: args.w_essay,
                    max_rating: args.max_rating,
                    randomize: !args.no_randomize,
                    published: args.publish,
                },
            )?;
            println!("created exam {} ({})", spec.id, spec.slug);
            Ok(ExitCode::SUCCESS)
        }
        Command::ListResults { exam } => {
            let odes = open(config)?;
            let rows = odes.list_results(&operator, exam.map(ExamId))?;
            print!("{}", results_table(&rows));
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportCsv { exam } => {
            let odes = open(config)?;
            print!("{}", odes.export_csv(&operator, ExamId(exam))?);
            Ok(ExitCode::SUCCESS)
        }
        Command::AddTeacher { username, admin } => {
            let odes = open(config)?;
            let role = if admin { Role::Admin } else { Role::Teacher };
            let cred = odes.create_account(&operator, &username, role)?;
            println!("{}", cred.token);
            eprintln!("created {} account {}; the token above is shown only once", role.as_str(), cred.username);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn read_input(path: &Path) -> Result<String, Box<dyn std::error::Error>> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()).into())
}

fn resolve_category(odes: &Odes, key: &str) -> Result<CategoryId, OdesError> {
    let categories = odes.list_categories(&Odes::operator())?;
    categories
        .iter()
        .find(|c| c.slug == key || c.id.to_string() == key)
        .map(|c| c.id)
        .ok_or_else(|| OdesError::validation("unknown_category", "category", format!("no category {key:?}")))
}

fn results_table(rows: &[ResultSummary]) -> String {
    let header = ["RESULT", "EXAM", "STUDENT", "AM", "STATUS", "STARTED", "SUBMITTED", "GRADE", "SUCCESSFUL"];
    let body: Vec<[String; 9]> = rows
        .iter()
        .map(|r| {
            [
                r.result_id.to_string(),
                r.exam_id.to_string(),
                format!("{} {}", r.student.first_name, r.student.second_name),
                r.student.am.clone(),
                r.status.as_str().to_string(),
                r.time_started.to_string(),
                r.time_submitted.map(|t| t.to_string()).unwrap_or_else(|| "-".into()),
                r.grade.clone().unwrap_or_else(|| "-".into()),
                if r.successful { "yes" } else { "no" }.into(),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        out.push_str(padded.join("  ").trim_end());
        out.push('\n');
    };
    line(&header.map(String::from));
    for row in &body {
        line(row);
    }
    out
}

fn serve(config: &Config) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let odes = Arc::new(open(config)?);
    if config.admin_token.is_none() {
        tracing::warn!("no admin_token configured; only accounts created with add-teacher can sign in");
    }
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(config.listen)
            .await
            .map_err(|e| format!("cannot listen on {}: {e}", config.listen))?;
        let addr = listener.local_addr()?;
        println!("odes listening on http://{addr}");
        tracing::info!(%addr, storage = %config.storage.display(), "serving");
        odes_api::serve(listener, odes, shutdown_signal()).await?;
        tracing::info!("shut down");
        Ok::<_, Box<dyn std::error::Error>>(ExitCode::SUCCESS)
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use odes_core::model::{SessionStatus, StudentDetails};

    #[test]
    fn table_is_aligned() {
        let row = |id: u64, name: &str, status| ResultSummary {
            result_id: odes_core::model::ResultId(id),
            exam_id: ExamId(1),
            exam_title: "E".into(),
            student: StudentDetails {
                first_name: name.into(),
                second_name: "K".into(),
                am: "12".into(),
                ..Default::default()
            },
            status,
            time_started: "2024-01-01 09:00:00".parse().unwrap(),
            time_submitted: None,
            final_score: None,
            grade: None,
            successful: false,
        };
        let t = results_table(&[row(1, "Al", SessionStatus::Open), row(10, "Christina", SessionStatus::Finalized)]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        let col = lines[0].find("EXAM").unwrap();
        assert!(lines.iter().skip(1).all(|l| l[col..].starts_with('1')));
        let status_col = lines[0].find("STATUS").unwrap();
        assert!(lines[1][status_col..].starts_with("Open"));
        assert!(lines[2][status_col..].starts_with("Finalized"));
    }
}
