//! `sitebench`: one-off scans, list scans, the API server and the opt-out
//! list.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 site
//! unreachable, 3 site blacklisted.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use sitebench_core::csv_list::parse_site_csv;
use sitebench_core::model::RankingScheme;
use sitebench_core::{normalize_url, CheckGroup, SiteList};
use sitebench_service::orchestrator::UNREACHABLE_NOTE;
use sitebench_service::setup::{build_ephemeral_orchestrator, build_orchestrator, open_blacklist};
use sitebench_service::store::JobState;
use sitebench_service::views::{self, Ranking};
use sitebench_service::{openapi, token, Config, Orchestrator};

const EXIT_ERROR: i32 = 1;
const EXIT_UNREACHABLE: i32 = 2;
const EXIT_BLACKLISTED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "sitebench", version, about = "Scan websites for privacy and security issues and rank them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan one site and print its check results.
    Scan {
        url: String,
        /// Print the full results document as JSON.
        #[arg(long)]
        json: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Scan every site of a CSV list (first column `url`) and print the ranking.
    ScanList {
        file: PathBuf,
        /// Group priority, e.g. `EncWeb,NoTrack,Attacks,EncMail`.
        #[arg(long)]
        order: Option<String>,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the REST API and the scan workers until interrupted.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Manage hosts whose operators opted out of scanning.
    Blacklist {
        #[command(subcommand)]
        action: BlacklistAction,
    },
    /// Print the OpenAPI description of the REST API.
    Openapi,
}

#[derive(Debug, Subcommand)]
enum BlacklistAction {
    /// Add a host (covers its subdomains) or a URL prefix.
    Add {
        entry: String,
        #[arg(long, default_value = "")]
        note: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    List {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<Config, String> {
    match path {
        Some(p) => Config::load(p).map_err(|e| format!("config: {e}")),
        None => Ok(Config::default()),
    }
}

fn ephemeral(config: &Config) -> Result<Orchestrator, String> {
    build_ephemeral_orchestrator(config).map_err(|e| e.to_string())
}

fn print_json(v: &impl serde::Serialize) -> Result<(), String> {
    let text = serde_json::to_string_pretty(v).map_err(|e| e.to_string())?;
    println!("{text}");
    Ok(())
}

async fn scan(url: &str, json: bool, config: Option<&Path>) -> Result<i32, String> {
    let url = normalize_url(url).map_err(|e| format!("{url}: {e}"))?;
    let config = load_config(config)?;
    let orch = ephemeral(&config)?;
    let err = |e: sitebench_service::store::StoreError| e.to_string();
    let site = orch.store.unlisted_site(&url).map_err(err)?;
    let queued = orch.enqueue_scan(&site).map_err(err)?;
    let mut code = 0;
    if queued.job().state == JobState::Blacklisted {
        code = EXIT_BLACKLISTED;
    } else {
        let job = orch.claim().map_err(err)?.ok_or("scan job was not claimable")?;
        let run = orch.run_job(&job).await.map_err(err)?;
        if run.note.as_deref() == Some(UNREACHABLE_NOTE) {
            code = EXIT_UNREACHABLE;
        }
    }
    let site = orch.store.site(&site.id).map_err(err)?.ok_or("site vanished")?;
    let doc = views::site_results(&orch.store, &orch.scanner.catalog, &orch.blacklist, &site).map_err(err)?;
    if json {
        print_json(&doc)?;
        return Ok(code);
    }
    println!("{}", doc.url);
    if let Some(f) = doc.final_url.as_ref().filter(|f| **f != doc.url) {
        println!("final url: {f}");
    }
    if let Some(a) = &doc.annotation {
        println!("{a}");
    }
    if code == EXIT_BLACKLISTED {
        return Ok(code);
    }
    if let Some(note) = doc.run.as_ref().and_then(|r| r.note.as_ref()) {
        println!("note: {note}");
    }
    let overall = doc.overall.map(|c| c.to_string()).unwrap_or_else(|| "-".into());
    println!("overall: {overall}");
    for g in CheckGroup::ALL {
        let c = doc.group_ratings.get(&g).map(|c| c.to_string()).unwrap_or_else(|| "-".into());
        println!("  {:<8} {c}", g.to_string());
    }
    println!();
    let width = doc.checks.iter().map(|c| c.check_id.len()).max().unwrap_or(0);
    for c in &doc.checks {
        let flag = if c.critical { "!" } else { " " };
        println!("{:<width$} {:<8} {flag}{:<8} {}", c.check_id, c.group.to_string(), c.outcome.to_string(), c.evidence);
    }
    Ok(code)
}

fn print_ranking(r: &Ranking) {
    let order: Vec<String> = r.order.iter().map(|g| g.to_string()).collect();
    println!("{:<5} {:<8} {:<8} {:<8} {:<8} {:<8} url", "rank", "overall", order[0], order[1], order[2], order[3]);
    for (i, row) in r.rows.iter().enumerate() {
        let color = |g: &CheckGroup| row.group_ratings.get(g).map(|c| c.to_string()).unwrap_or_else(|| "-".into());
        let cells: Vec<String> = r.order.iter().map(color).collect();
        let overall = row.overall.map(|c| c.to_string()).unwrap_or_else(|| "-".into());
        println!(
            "{:<5} {:<8} {:<8} {:<8} {:<8} {:<8} {}",
            i + 1,
            overall,
            cells[0],
            cells[1],
            cells[2],
            cells[3],
            row.url
        );
    }
}

async fn scan_list(file: &Path, order: Option<&str>, json: bool, config: Option<&Path>) -> Result<i32, String> {
    let scheme = match order {
        Some(o) => RankingScheme::parse_order(o).map_err(|e| e.to_string())?,
        None => RankingScheme::default(),
    };
    let text = std::fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))?;
    let parsed = parse_site_csv(&text).map_err(|e| format!("{}: {e}", file.display()))?;
    let config = load_config(config)?;
    let orch = ephemeral(&config)?;
    let err = |e: sitebench_service::store::StoreError| e.to_string();
    let title = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut list = SiteList {
        id: String::new(),
        title,
        description: String::new(),
        tags: Default::default(),
        sites: parsed.sites,
        property_schema: parsed.property_schema,
        access_token_hash: token::generate().1,
        private: true,
        rescan_enabled: false,
        honor_robots: false,
        created_at: chrono::Utc::now(),
    };
    list.validate().map_err(|e| e.to_string())?;
    let list = orch.store.insert_list(&list).map_err(err)?;
    for site in &list.sites {
        orch.enqueue_scan(site).map_err(err)?;
    }
    orch.run_pending().await.map_err(err)?;
    for job in orch.store.jobs_in_state(JobState::Queued).map_err(err)? {
        eprintln!("skipped {}: host already scanned in this run", job.url);
    }
    let ranking = views::ranking(&orch.store, &orch.scanner.catalog, &orch.blacklist, &list, &scheme).map_err(err)?;
    if json {
        print_json(&ranking)?;
    } else {
        print_ranking(&ranking);
    }
    Ok(0)
}

async fn serve(config_path: &Path) -> Result<i32, String> {
    let config = load_config(Some(config_path))?;
    let orch = Arc::new(build_orchestrator(&config).map_err(|e| e.to_string())?);
    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .map_err(|e| format!("listen {}: {e}", config.listen))?;
    let addr = listener.local_addr().map_err(|e| e.to_string())?;
    eprintln!("sitebench listening on http://{addr}/api/v1");
    let (stop, shutdown) = tokio::sync::watch::channel(false);
    tokio::spawn(async move {
        let _ = tokio::signal::ctrl_c().await;
        let _ = stop.send(true);
    });
    sitebench_service::serve(orch, listener, shutdown).await.map_err(|e| e.to_string())?;
    Ok(0)
}

fn blacklist(action: BlacklistAction) -> Result<i32, String> {
    match action {
        BlacklistAction::Add { entry, note, config } => {
            let config = load_config(config.as_deref())?;
            let list = open_blacklist(&config).map_err(|e| e.to_string())?;
            let added = list.add(&entry, &note).map_err(|e| format!("{}: {e}", config.blacklist.display()))?;
            println!("{} {entry}", if added { "added" } else { "already listed" });
        }
        BlacklistAction::List { config } => {
            let config = load_config(config.as_deref())?;
            let list = open_blacklist(&config).map_err(|e| e.to_string())?;
            for (entry, note) in list.entries() {
                println!("{entry}\t{note}");
            }
        }
    }
    Ok(0)
}

async fn dispatch(cli: Cli) -> Result<i32, String> {
    match cli.command {
        Command::Scan { url, json, config } => scan(&url, json, config.as_deref()).await,
        Command::ScanList { file, order, json, config } => scan_list(&file, order.as_deref(), json, config.as_deref()).await,
        Command::Serve { config } => serve(&config).await,
        Command::Blacklist { action } => blacklist(action),
        Command::Openapi => {
            print!("{}", openapi::pretty());
            Ok(0)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    let code = match runtime.block_on(dispatch(cli)) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("sitebench: {message}");
            EXIT_ERROR
        }
    };
    std::process::exit(code);
}
