use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use scriptorium::edition::EditionError;
use scriptorium::latex::{parse, project as project_text, CommandRegistry};
use scriptorium::project::{self, ProjectConfig, ProjectError, Workspace, DEFAULT_CONFIG};
use scriptorium::review::{serve, ReviewService};

const EXIT_FINDINGS: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;

/// Knowledge-based scholarly editing: ingest fact bases, identify entities,
/// check consistency and generate the edition.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Project file.
    #[arg(long, global = true, env = "SCRIPTORIUM_CONFIG", default_value = DEFAULT_CONFIG)]
    config: PathBuf,
    /// Override a parameter, e.g. `--param k=3`.
    #[arg(long = "param", global = true, value_name = "NAME=VALUE", value_parser = parse_param)]
    params: Vec<(String, i64)>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert declared fact bases into snapshots.
    Ingest,
    /// Print the item stream of a LaTeX file as JSON lines.
    Parse {
        file: PathBuf,
        /// Print the plain-text projection instead.
        #[arg(long)]
        plain: bool,
    },
    /// Identify named entities and write per-document results.
    Nei,
    /// Run consistency checks; exits 1 when errors are found.
    Check {
        /// Also exit 1 on warnings.
        #[arg(long)]
        strict: bool,
    },
    /// Write merged LaTeX, plain text, HTML and registers.
    Generate,
    /// Serve the review API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

fn parse_param(s: &str) -> Result<(String, i64), String> {
    let (name, value) = s.split_once('=').ok_or("expected NAME=VALUE")?;
    let value = value.trim().parse().map_err(|_| format!("`{value}` is not an integer"))?;
    Ok((name.trim().to_string(), value))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

enum Failure {
    Usage(String),
    Data(ProjectError),
}

impl From<ProjectError> for Failure {
    fn from(e: ProjectError) -> Self {
        Failure::Data(e)
    }
}

fn config(cli: &Cli) -> Result<ProjectConfig, Failure> {
    let mut cfg = ProjectConfig::load(&cli.config)?;
    for (name, value) in &cli.params {
        cfg.set_param(name, *value).map_err(|m| Failure::Usage(format!("--param {name}: {m}")))?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Ingest => {
            let cfg = config(&cli)?;
            let s = project::ingest(&cfg)?;
            for b in &s.bases {
                println!(
                    "{}: {} entities ({} malformed, {} out of scope, {} rejected) -> {}",
                    b.path.display(),
                    b.entities,
                    b.malformed,
                    b.filtered,
                    b.rejected,
                    b.snapshot.display()
                );
            }
            println!("merged: {} entities, {} conflicts -> {}", s.entities, s.conflicts, s.merged.display());
        }
        Command::Parse { file, plain } => {
            let registry = if cli.config.is_file() {
                let cfg = config(&cli)?;
                Workspace::load(&cfg)?.registry
            } else {
                CommandRegistry::default()
            };
            parse_file(file, &registry, *plain)?;
        }
        Command::Nei => {
            let cfg = config(&cli)?;
            let ws = Workspace::load(&cfg)?;
            let cache = project::load_cache(&cfg)?;
            let run = project::run_nei(&ws, &cache)?;
            project::write_nei(&run.result, &cfg.nei_dir())?;
            let st = &run.result.stats;
            println!(
                "{} documents, {} words: {} occurrences, {} identified, {} suppressed, {} dates",
                st.documents, st.words, st.occurrences, st.identified, st.suppressed, st.dates
            );
            println!("{} store queries in {:.2?}", st.store_queries, run.elapsed);
            for w in &st.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Check { strict } => {
            let cfg = config(&cli)?;
            let ws = Workspace::load(&cfg)?;
            let cache = project::load_cache(&cfg)?;
            let report = project::run_check(&cfg, &ws, &cache);
            print!("{}", report.to_text());
            println!("{} findings", report.findings.len());
            if report.has_errors() || (*strict && !report.findings.is_empty()) {
                return Ok(EXIT_FINDINGS);
            }
        }
        Command::Generate => {
            let cfg = config(&cli)?;
            let ws = Workspace::load(&cfg)?;
            let cache = project::load_cache(&cfg)?;
            let g = project::generate(&ws, &cache)?;
            let dir = cfg.edition_dir();
            g.outputs.write_to(&dir).map_err(ProjectError::from)?;
            for f in &g.failures {
                eprintln!("warning: {f}");
            }
            println!("{} files -> {}", g.outputs.files.len(), dir.display());
            for r in g.registers.all() {
                println!("register {}: {} entries, {} locators", r.kind.as_str(), r.entries.len(), r.locator_count());
            }
        }
        Command::Serve { port, host } => {
            let cfg = config(&cli)?;
            let service = Arc::new(ReviewService::from_project(&cfg)?);
            let addr = std::net::SocketAddr::new(*host, *port);
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Usage(e.to_string()))?;
            eprintln!("review service on http://{addr}");
            rt.block_on(serve(service, addr))
                .map_err(|e| ProjectError::Io { path: PathBuf::from(addr.to_string()), message: e.to_string() })?;
        }
    }
    Ok(0)
}

fn parse_file(file: &Path, registry: &CommandRegistry, plain: bool) -> Result<(), Failure> {
    let src = std::fs::read_to_string(file)
        .map_err(|e| ProjectError::Io { path: file.to_path_buf(), message: e.to_string() })?;
    let items = parse(&src, registry)
        .map_err(|error| ProjectError::Edition(EditionError::Latex { fragment: file.display().to_string(), error }))?;
    if plain {
        println!("{}", project_text(&items, registry).text);
    } else {
        for item in &items {
            println!("{}", serde_json::to_string(item).expect("items serialize"));
        }
    }
    Ok(())
}
