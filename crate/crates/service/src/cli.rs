//! Command line: one-shot tool runs, session authoring, dataset and cache
//! management, recording and the HTTP server.
//!
//! Exit codes: 0 success, 1 validation or usage failure, 2 provider or
//! transport failure.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use geoqa_core::adapters::UnifiedQuery;
use geoqa_core::config::Config;
use geoqa_core::context::{render_formatted, render_structured, suggest_places, Context, EntryDraft};
use geoqa_core::dataset::{export_json, import_json, validate_dataset, DatasetError};
use geoqa_core::gateway::GatewayMode;
use geoqa_core::model::Waypoint;
use geoqa_core::pipeline::{PipelineError, Workbench};
use geoqa_core::qa::{build_prompt, compare_answer, AnswerFormat, Gold, QaDraft, Rendering};
use geoqa_core::scenario::{build_dataset, ScenarioError, ScenarioFile};
use geoqa_core::{LatLng, ProviderId, ToolKind};
use serde_json::{json, Value};

use crate::api::{self, AppState};
use crate::setup;
use crate::studio::{Studio, StudioError, Target};

#[derive(Debug, Parser)]
#[command(name = "geoqa", version, about = "Build map-grounded QA datasets from provider responses")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    /// Persistent response cache (redb file). In-memory when unset.
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    /// Directory of recorded fixtures.
    #[arg(long, global = true)]
    pub fixtures: Option<PathBuf>,
    /// Session file holding contexts and QA pairs between commands.
    #[arg(long, global = true)]
    pub session: Option<PathBuf>,
    /// Answer only from recorded fixtures; never touch the network.
    #[arg(long, global = true, conflicts_with_all = ["live", "record"])]
    pub replay_only: bool,
    /// Call providers over HTTP.
    #[arg(long, global = true, conflicts_with = "record")]
    pub live: bool,
    /// Call providers and save each exchange as a fixture.
    #[arg(long, global = true)]
    pub record: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Placement {
    /// Append to this context of the session file.
    #[arg(long)]
    pub context: Option<String>,
    /// Title for a new context.
    #[arg(long)]
    pub title: Option<String>,
}

#[derive(Debug, Args)]
pub struct RouteArgs {
    /// Place id or "lat,lng".
    #[arg(long)]
    pub from: String,
    /// Place id or "lat,lng".
    #[arg(long)]
    pub to: String,
    /// Intermediate stops, in order.
    #[arg(long)]
    pub via: Vec<String>,
    #[arg(long, default_value = "DRIVE")]
    pub mode: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Start the HTTP service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        /// Allowed browser origin; repeatable.
        #[arg(long = "cors-origin")]
        cors_origins: Vec<String>,
        /// Serve static UI assets from this directory.
        #[arg(long)]
        with_ui: Option<PathBuf>,
    },
    /// Text search.
    Search {
        #[arg(long)]
        provider: String,
        query: String,
        #[arg(long)]
        limit: Option<u64>,
        #[command(flatten)]
        placement: Placement,
    },
    /// Place details.
    Details {
        #[arg(long)]
        provider: String,
        place_id: String,
        #[command(flatten)]
        placement: Placement,
    },
    /// Nearby search around a place or coordinate.
    Nearby {
        #[arg(long)]
        provider: String,
        /// Place id or "lat,lng".
        #[arg(long)]
        around: String,
        #[arg(long = "type")]
        place_type: String,
        #[arg(long)]
        limit: Option<u64>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        min_rating: Option<f64>,
        #[command(flatten)]
        placement: Placement,
    },
    /// Compute routes.
    Route {
        #[arg(long)]
        provider: String,
        #[command(flatten)]
        route: RouteArgs,
        #[arg(long)]
        alternatives: bool,
        #[command(flatten)]
        placement: Placement,
    },
    /// Search along the first computed route.
    Salr {
        #[arg(long)]
        provider: String,
        #[command(flatten)]
        route: RouteArgs,
        #[arg(long)]
        query: String,
        #[arg(long)]
        limit: Option<u64>,
        #[command(flatten)]
        placement: Placement,
    },
    /// Write the canonical dataset from the session file or a scenario file.
    Export {
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Only these contexts; repeatable.
        #[arg(long)]
        context: Vec<String>,
        /// Build the dataset by running this scenario file instead.
        #[arg(long)]
        scenarios: Option<PathBuf>,
    },
    /// Merge a dataset file into the session file.
    Import { file: PathBuf },
    /// Inspect or move the response cache.
    Cache {
        #[command(subcommand)]
        action: CacheCommand,
    },
    /// Run a scenario file against live providers and save fixtures.
    Record {
        #[arg(long)]
        scenarios: PathBuf,
        /// Fixture output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a dataset file against the schema and content rules.
    Validate { file: PathBuf },
    /// Manage contexts in the session file.
    Context {
        #[command(subcommand)]
        action: ContextCommand,
    },
    /// Author and evaluate QA pairs in the session file.
    Qa {
        #[command(subcommand)]
        action: QaCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum CacheCommand {
    /// Write every entry as a fixture file.
    Export { dir: PathBuf },
    /// Load fixture files into the cache.
    Import { dir: PathBuf },
    Stats,
    Purge,
}

#[derive(Debug, Subcommand)]
pub enum ContextCommand {
    /// Create a context and make it active.
    New { title: String },
    List,
    /// Make an existing context active.
    Use { id: String },
    Show {
        id: Option<String>,
        #[arg(long, default_value = "formatted")]
        rendering: String,
    },
    /// Place names in the context starting with a prefix.
    Suggest {
        prefix: String,
        #[arg(long)]
        context: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum QaCommand {
    Add {
        #[arg(long)]
        question: String,
        /// YesNo, SingleChoice, MultipleChoice or OpenEnded.
        #[arg(long)]
        format: String,
        #[arg(long = "option")]
        options: Vec<String>,
        /// Yes/No, answer text, or 1-based option number(s) such as "2" or "1,3".
        #[arg(long)]
        gold: String,
        #[arg(long = "category")]
        categories: Vec<String>,
        #[arg(long)]
        context: Option<String>,
        /// Id of the pair this one revises.
        #[arg(long)]
        supersedes: Option<String>,
    },
    List,
    Prompt {
        id: String,
        #[arg(long, default_value = "formatted")]
        rendering: String,
    },
    Compare { id: String, response: String },
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub exit_code: i32,
    pub code: String,
    pub message: String,
}

impl CliError {
    fn validation(code: &str, message: impl Into<String>) -> Self {
        CliError {
            exit_code: 1,
            code: code.to_string(),
            message: message.into(),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let exit_code = if matches!(e, PipelineError::Gateway(_)) { 2 } else { 1 };
        CliError {
            exit_code,
            code: e.code().to_string(),
            message: e.to_string(),
        }
    }
}

impl From<StudioError> for CliError {
    fn from(e: StudioError) -> Self {
        let message = match &e {
            StudioError::Dataset(DatasetError::SchemaViolation { pointer, detail }) => {
                format!("schema violation at '{pointer}': {detail}")
            }
            other => other.to_string(),
        };
        CliError::validation(e.code(), message)
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Step { source, scenario, step } => {
                let mut err = CliError::from(source);
                err.message = format!("{scenario} step {step}: {}", err.message);
                err
            }
            other => CliError::validation("ScenarioError", other.to_string()),
        }
    }
}

impl From<setup::SetupError> for CliError {
    fn from(e: setup::SetupError) -> Self {
        let exit_code = match e {
            setup::SetupError::Cache(_) => 1,
            _ => 2,
        };
        CliError {
            exit_code,
            code: "Setup".into(),
            message: e.to_string(),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::validation("Io", format!("{}: {e}", path.display()))
}

/// Output sink: human text or one JSON document.
struct Out {
    json: bool,
}

impl Out {
    fn emit(&self, value: Value, text: impl FnOnce() -> String) {
        let mut stdout = std::io::stdout().lock();
        let rendered = if self.json {
            geoqa_core::canonical::to_string_pretty(&value)
        } else {
            text()
        };
        let _ = writeln!(stdout, "{}", rendered.trim_end_matches('\n'));
    }
}

pub fn resolve_config(cli: &Cli) -> Result<Config, CliError> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path).map_err(|e| CliError::validation("Config", e.to_string()))?,
        None => Config::default(),
    };
    if let Some(cache) = &cli.cache {
        config.cache_path = Some(cache.clone());
    }
    if let Some(dir) = &cli.fixtures {
        config.gateway.fixture_dir = Some(dir.clone());
    }
    if cli.replay_only {
        config.gateway.mode = GatewayMode::ReplayOnly;
    } else if cli.live {
        config.gateway.mode = GatewayMode::Live;
    } else if cli.record {
        config.gateway.mode = GatewayMode::Record;
    }
    Ok(setup::with_default_fixtures(config))
}

/// Session file plus the context new entries go to.
struct Authoring {
    path: PathBuf,
    studio: Studio,
    session_id: String,
}

impl Authoring {
    fn open(cli: &Cli, mode: GatewayMode) -> Result<Option<Authoring>, CliError> {
        let Some(path) = cli.session.clone() else { return Ok(None) };
        let mut studio = Studio::load(&path)?;
        let session_id = match studio.session("session-0001") {
            Ok(s) => s.id.clone(),
            Err(_) => studio.open_session(mode).id,
        };
        Ok(Some(Authoring {
            path,
            studio,
            session_id,
        }))
    }

    fn require(cli: &Cli, mode: GatewayMode) -> Result<Authoring, CliError> {
        Self::open(cli, mode)?.ok_or_else(|| CliError::validation("NoSession", "this command needs --session <file>"))
    }

    fn target(&self, placement: &Placement) -> Target {
        Target {
            context_id: placement.context.clone(),
            session_id: Some(self.session_id.clone()),
            title: placement.title.clone(),
        }
    }

    fn active_context(&self, explicit: Option<&String>) -> Result<String, CliError> {
        match explicit {
            Some(id) => Ok(id.clone()),
            None => self
                .studio
                .session(&self.session_id)?
                .active_context_id
                .clone()
                .ok_or_else(|| CliError::validation("NoActiveContext", "no active context; use --context or `context new`")),
        }
    }

    fn save(&self) -> Result<(), CliError> {
        Ok(self.studio.save(&self.path)?)
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = resolve_config(&cli)?;
    let out = Out { json: cli.json };
    match &cli.command {
        Command::Serve {
            bind,
            cors_origins,
            with_ui,
        } => serve(&cli, config, bind.clone(), cors_origins, with_ui.clone()),
        Command::Search {
            provider,
            query,
            limit,
            placement,
        } => {
            let mut q = UnifiedQuery::new(ToolKind::TextSearch).with("query", query);
            if let Some(l) = limit {
                q.set("limit", l);
            }
            one_shot(&cli, &config, &out, provider, vec![q], placement)
        }
        Command::Details {
            provider,
            place_id,
            placement,
        } => {
            let q = UnifiedQuery::new(ToolKind::PlaceDetails).with("place_id", place_id);
            one_shot(&cli, &config, &out, provider, vec![q], placement)
        }
        Command::Nearby {
            provider,
            around,
            place_type,
            limit,
            radius,
            min_rating,
            placement,
        } => {
            let wb = setup::workbench(&config)?;
            let provider_id = parse_provider(provider)?;
            let mut session = Authoring::open(&cli, config.gateway.mode)?;
            let anchor = locate(&wb, provider_id, around, &mut session, placement)?;
            let mut q = UnifiedQuery::new(ToolKind::NearbySearch)
                .with("anchor", anchor)
                .with("place_type", place_type);
            if let Some(l) = limit {
                q.set("limit", l);
            }
            if let Some(r) = radius {
                q.set("radius_meters", r);
            }
            if let Some(m) = min_rating {
                q.set("min_rating", m);
            }
            run_and_print(&wb, &out, provider_id, q, &mut session, placement)
        }
        Command::Route {
            provider,
            route,
            alternatives,
            placement,
        } => {
            let wb = setup::workbench(&config)?;
            let provider_id = parse_provider(provider)?;
            let mut session = Authoring::open(&cli, config.gateway.mode)?;
            let mut q = route_query(&wb, provider_id, route, &mut session, placement)?;
            if *alternatives {
                q.set("compute_alternatives", true);
            }
            run_and_print(&wb, &out, provider_id, q, &mut session, placement)
        }
        Command::Salr {
            provider,
            route,
            query,
            limit,
            placement,
        } => {
            let wb = setup::workbench(&config)?;
            let provider_id = parse_provider(provider)?;
            let mut session = Authoring::open(&cli, config.gateway.mode)?;
            let rq = route_query(&wb, provider_id, route, &mut session, placement)?;
            let routes = run_quiet(&wb, provider_id, rq, &mut session, placement)?;
            let first = routes
                .normalized()
                .routes
                .first()
                .ok_or_else(|| CliError::validation("NoRoute", "the provider returned no route"))?;
            let mut q = UnifiedQuery::new(ToolKind::SearchAlongRoute)
                .with("query", query)
                .with(
                    "route",
                    json!({"text": first.encoded_polyline, "precision": first.polyline_precision}),
                )
                .with("travel_mode", first.travel_mode.as_str());
            if let Some(l) = limit {
                q.set("limit", l);
            }
            run_and_print(&wb, &out, provider_id, q, &mut session, placement)
        }
        Command::Export {
            output,
            context,
            scenarios,
        } => {
            let bytes = match scenarios {
                Some(path) => {
                    let wb = setup::workbench(&config)?;
                    let file = ScenarioFile::load(path)?;
                    let doc = build_dataset(&wb, &file.scenarios)?;
                    export_json(&doc).map_err(|e| CliError::validation(e.code(), e.to_string()))?
                }
                None => {
                    let mut a = Authoring::require(&cli, config.gateway.mode)?;
                    let bytes = a.studio.export(context)?;
                    a.save()?;
                    bytes
                }
            };
            match output {
                Some(path) => {
                    std::fs::write(path, &bytes).map_err(|e| io_error(path, e))?;
                    out.emit(json!({"path": path, "bytes": bytes.len()}), || {
                        format!("wrote {} bytes to {}", bytes.len(), path.display())
                    });
                }
                None => {
                    let _ = std::io::stdout().lock().write_all(&bytes);
                }
            }
            Ok(())
        }
        Command::Import { file } => {
            let bytes = std::fs::read(file).map_err(|e| io_error(file, e))?;
            let mut a = Authoring::require(&cli, config.gateway.mode)?;
            let (contexts, added) = a.studio.import(&bytes)?;
            a.save()?;
            out.emit(json!({"contexts": contexts, "qa_pairs_added": added}), || {
                format!("imported {contexts} contexts and {added} new QA pairs")
            });
            Ok(())
        }
        Command::Cache { action } => cache_command(&config, &out, action),
        Command::Record { scenarios, out: dir } => {
            let mut config = config.clone();
            config.gateway.mode = GatewayMode::Record;
            if let Some(dir) = dir {
                config.gateway.fixture_dir = Some(dir.clone());
            }
            if config.gateway.fixture_dir.is_none() {
                config.gateway.fixture_dir = Some(PathBuf::from(setup::DEFAULT_FIXTURE_DIR));
            }
            let wb = setup::workbench(&config)?;
            let file = ScenarioFile::load(scenarios)?;
            let doc = build_dataset(&wb, &file.scenarios)?;
            let dir = config.gateway.fixture_dir.clone().unwrap_or_default();
            out.emit(
                json!({"contexts": doc.contexts.len(), "network_calls": wb.gateway.network_calls(), "fixture_dir": dir}),
                || {
                    format!(
                        "recorded {} contexts with {} network calls into {}",
                        doc.contexts.len(),
                        wb.gateway.network_calls(),
                        dir.display()
                    )
                },
            );
            Ok(())
        }
        Command::Validate { file } => validate(&out, file),
        Command::Context { action } => context_command(&cli, &config, &out, action),
        Command::Qa { action } => qa_command(&cli, &config, &out, action),
    }
}

fn parse_provider(name: &str) -> Result<ProviderId, CliError> {
    name.parse()
        .map_err(|e: geoqa_core::model::ModelError| CliError::validation("UnknownProvider", e.to_string()))
}

fn parse_lat_lng(text: &str) -> Option<LatLng> {
    let (a, b) = text.split_once(',')?;
    LatLng::new(a.trim().parse().ok()?, b.trim().parse().ok()?).ok()
}

/// Turns "lat,lng" or a place id into a waypoint; place ids are looked up
/// with the provider's PlaceDetails first.
fn locate(
    wb: &Workbench,
    provider: ProviderId,
    spec: &str,
    session: &mut Option<Authoring>,
    placement: &Placement,
) -> Result<Waypoint, CliError> {
    if let Some(location) = parse_lat_lng(spec) {
        return Ok(Waypoint::at(location));
    }
    let q = UnifiedQuery::new(ToolKind::PlaceDetails).with("place_id", spec);
    let draft = run_quiet(wb, provider, q, session, placement)?;
    let place = draft
        .normalized()
        .places
        .first()
        .ok_or_else(|| CliError::validation("UnknownPlace", format!("no details for place '{spec}'")))?;
    Ok(Waypoint {
        location: place.location,
        place_id: Some(place.id.clone()),
        label: Some(place.display_name.clone()),
    })
}

fn route_query(
    wb: &Workbench,
    provider: ProviderId,
    args: &RouteArgs,
    session: &mut Option<Authoring>,
    placement: &Placement,
) -> Result<UnifiedQuery, CliError> {
    let origin = locate(wb, provider, &args.from, session, placement)?;
    let destination = locate(wb, provider, &args.to, session, placement)?;
    let via = args
        .via
        .iter()
        .map(|v| locate(wb, provider, v, session, placement))
        .collect::<Result<Vec<_>, _>>()?;
    let mut q = UnifiedQuery::new(ToolKind::ComputeRoutes)
        .with("origin", origin)
        .with("destination", destination)
        .with("travel_mode", args.mode.to_uppercase());
    if !via.is_empty() {
        q.set("intermediates", via);
    }
    Ok(q)
}

/// Runs one tool, records it in the session if there is one, and returns the entry.
fn run_quiet(
    wb: &Workbench,
    provider: ProviderId,
    query: UnifiedQuery,
    session: &mut Option<Authoring>,
    placement: &Placement,
) -> Result<EntryDraft, CliError> {
    let outcome = wb.run_tool(provider, &query)?;
    if let Some(a) = session {
        let target = a.target(placement);
        let (id, _) = a.studio.append(&target, outcome.draft.clone())?;
        a.save()?;
        log::debug!("appended {} entry to {id}", query.tool);
    }
    Ok(outcome.draft)
}

fn run_and_print(
    wb: &Workbench,
    out: &Out,
    provider: ProviderId,
    query: UnifiedQuery,
    session: &mut Option<Authoring>,
    placement: &Placement,
) -> Result<(), CliError> {
    let outcome_hit = wb.cache.stats().map(|s| s.hits).unwrap_or(0);
    let draft = run_quiet(wb, provider, query, session, placement)?;
    let cache_hit = wb.cache.stats().map(|s| s.hits).unwrap_or(0) > outcome_hit;
    print_entry(out, provider, &draft, cache_hit, session.as_ref())
}

fn print_entry(
    out: &Out,
    provider: ProviderId,
    draft: &EntryDraft,
    cache_hit: bool,
    session: Option<&Authoring>,
) -> Result<(), CliError> {
    let normalized = draft.normalized();
    let points = api::route_points(normalized).map_err(|e| CliError {
        exit_code: 2,
        code: e.code,
        message: e.message,
    })?;
    let context_id = session.and_then(|a| {
        a.studio
            .session(&a.session_id)
            .ok()
            .and_then(|s| s.active_context_id.clone())
    });
    let single = Context::new("cli", "").appended(draft.clone());
    out.emit(
        json!({
            "provider": provider,
            "context_id": context_id,
            "cache_hit": cache_hit,
            "normalized": normalized,
            "route_points": points,
        }),
        || render_formatted(&single),
    );
    Ok(())
}

fn one_shot(
    cli: &Cli,
    config: &Config,
    out: &Out,
    provider: &str,
    queries: Vec<UnifiedQuery>,
    placement: &Placement,
) -> Result<(), CliError> {
    let wb = setup::workbench(config)?;
    let provider = parse_provider(provider)?;
    let mut session = Authoring::open(cli, config.gateway.mode)?;
    for q in queries {
        run_and_print(&wb, out, provider, q, &mut session, placement)?;
    }
    Ok(())
}

fn cache_command(config: &Config, out: &Out, action: &CacheCommand) -> Result<(), CliError> {
    if config.cache_path.is_none() {
        return Err(CliError::validation("NoCache", "cache commands need --cache <file> or cache_path in the config"));
    }
    let wb = setup::workbench(config)?;
    let cache = &wb.cache;
    let storage = |e: geoqa_core::cache::CacheError| CliError::validation("CacheError", e.to_string());
    match action {
        CacheCommand::Stats => {
            let s = cache.stats().map_err(storage)?;
            out.emit(json!(s), || {
                format!("entries: {}\nbytes: {}\nhits: {}\nmisses: {}", s.entries, s.bytes, s.hits, s.misses)
            });
        }
        CacheCommand::Purge => {
            let n = cache.purge().map_err(storage)?;
            out.emit(json!({"purged": n}), || format!("purged {n} entries"));
        }
        CacheCommand::Export { dir } => {
            let n = cache.export_fixtures(dir).map_err(storage)?;
            out.emit(json!({"exported": n, "dir": dir}), || format!("exported {n} entries to {}", dir.display()));
        }
        CacheCommand::Import { dir } => {
            let n = cache.import_fixtures(dir).map_err(storage)?;
            out.emit(json!({"imported": n, "dir": dir}), || format!("imported {n} entries from {}", dir.display()));
        }
    }
    Ok(())
}

fn validate(out: &Out, file: &Path) -> Result<(), CliError> {
    let bytes = std::fs::read(file).map_err(|e| io_error(file, e))?;
    let violations: Vec<(String, String)> = match import_json(&bytes) {
        Err(DatasetError::SchemaViolation { pointer, detail }) => vec![(pointer, detail)],
        Err(e) => vec![(String::new(), e.to_string())],
        Ok(doc) => validate_dataset(&doc).into_iter().map(|v| (v.pointer, v.message)).collect(),
    };
    out.emit(
        json!({
            "file": file,
            "valid": violations.is_empty(),
            "violations": violations.iter().map(|(p, m)| json!({"pointer": p, "message": m})).collect::<Vec<_>>(),
        }),
        || {
            if violations.is_empty() {
                format!("{}: valid", file.display())
            } else {
                violations
                    .iter()
                    .map(|(p, m)| format!("{}: violation at '{p}': {m}", file.display()))
                    .collect::<Vec<_>>()
                    .join("\n")
            }
        },
    );
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError {
            exit_code: 1,
            code: "SchemaViolation".into(),
            message: format!("{} violation(s)", violations.len()),
        })
    }
}

fn context_command(cli: &Cli, config: &Config, out: &Out, action: &ContextCommand) -> Result<(), CliError> {
    let mut a = Authoring::require(cli, config.gateway.mode)?;
    match action {
        ContextCommand::New { title } => {
            let id = a.studio.new_context(title, Some(&a.session_id.clone()))?;
            a.save()?;
            out.emit(json!({"id": id}), || id.clone());
        }
        ContextCommand::List => {
            let rows: Vec<Value> = a
                .studio
                .contexts()
                .map(|c| json!({"id": c.id(), "title": c.title(), "entries": c.len()}))
                .collect();
            out.emit(json!(rows), || {
                a.studio
                    .contexts()
                    .map(|c| format!("{}\t{}\t{} entries", c.id(), c.title(), c.len()))
                    .collect::<Vec<_>>()
                    .join("\n")
            });
        }
        ContextCommand::Use { id } => {
            a.studio.context(id)?;
            let target = Target {
                context_id: Some(id.clone()),
                session_id: Some(a.session_id.clone()),
                title: None,
            };
            a.studio.activate(&target)?;
            a.save()?;
            out.emit(json!({"active_context_id": id}), || format!("active context: {id}"));
        }
        ContextCommand::Show { id, rendering } => {
            let id = a.active_context(id.as_ref())?;
            let rendering: Rendering = rendering.parse().map_err(|e: String| CliError::validation("InvalidParameter", e))?;
            let ctx = a.studio.context(&id)?;
            let text = match rendering {
                Rendering::Structured => render_structured(ctx),
                Rendering::Formatted => render_formatted(ctx),
            };
            out.emit(json!({"id": id, "rendering": rendering, "text": text}), || text.clone());
        }
        ContextCommand::Suggest { prefix, context } => {
            let id = a.active_context(context.as_ref())?;
            let names = suggest_places(a.studio.context(&id)?, prefix);
            out.emit(json!(names), || names.join("\n"));
        }
    }
    Ok(())
}

fn parse_gold(format: AnswerFormat, gold: &str) -> Result<Gold, CliError> {
    let indices = || -> Result<BTreeSet<usize>, CliError> {
        gold.split(',')
            .map(|part| match part.trim().parse::<usize>() {
                Ok(n) if n >= 1 => Ok(n - 1),
                _ => Err(CliError::validation("InvalidGold", format!("'{part}' is not an option number"))),
            })
            .collect()
    };
    Ok(match format {
        AnswerFormat::YesNo | AnswerFormat::OpenEnded => Gold::Text(gold.to_string()),
        AnswerFormat::SingleChoice => {
            let set = indices()?;
            match set.len() {
                1 => Gold::Index(*set.iter().next().unwrap()),
                _ => return Err(CliError::validation("InvalidGold", "SingleChoice takes one option number")),
            }
        }
        AnswerFormat::MultipleChoice => Gold::Indices(indices()?),
    })
}

fn parse_format(text: &str) -> Result<AnswerFormat, CliError> {
    serde_json::from_value(Value::String(text.to_string())).map_err(|_| {
        CliError::validation(
            "InvalidParameter",
            format!("unknown format '{text}'; expected YesNo|SingleChoice|MultipleChoice|OpenEnded"),
        )
    })
}

fn qa_command(cli: &Cli, config: &Config, out: &Out, action: &QaCommand) -> Result<(), CliError> {
    let mut a = Authoring::require(cli, config.gateway.mode)?;
    match action {
        QaCommand::Add {
            question,
            format,
            options,
            gold,
            categories,
            context,
            supersedes,
        } => {
            let format = parse_format(format)?;
            let draft = QaDraft {
                context_id: a.active_context(context.as_ref())?,
                question: question.clone(),
                format,
                options: options.clone(),
                gold: parse_gold(format, gold)?,
                categories: categories.clone(),
                supersedes: supersedes.clone(),
            };
            let pair = a.studio.add_qa(draft)?;
            a.save()?;
            out.emit(json!(pair), || pair.id.clone());
        }
        QaCommand::List => {
            let pairs = a.studio.qa_pairs();
            out.emit(json!(pairs), || {
                pairs
                    .iter()
                    .map(|q| format!("{}\t{}\t{:?}\t{}", q.id, q.context_id, q.format, q.question))
                    .collect::<Vec<_>>()
                    .join("\n")
            });
        }
        QaCommand::Prompt { id, rendering } => {
            let rendering: Rendering = rendering.parse().map_err(|e: String| CliError::validation("InvalidParameter", e))?;
            let qa = a.studio.qa(id)?;
            let bundle = build_prompt(a.studio.context(&qa.context_id)?, qa, rendering);
            out.emit(json!(bundle), || bundle.prompt_text.clone());
        }
        QaCommand::Compare { id, response } => {
            let verdict = compare_answer(a.studio.qa(id)?, response);
            out.emit(json!({"qa_id": id, "verdict": verdict}), || format!("{verdict:?}").to_lowercase());
        }
    }
    Ok(())
}

fn serve(
    cli: &Cli,
    config: Config,
    bind: Option<String>,
    cors_origins: &[String],
    ui: Option<PathBuf>,
) -> Result<(), CliError> {
    let wb = setup::workbench(&config)?;
    let studio = match &cli.session {
        Some(path) => Studio::load(path)?,
        None => Studio::default(),
    };
    let mut origins = config.cors_origins.clone();
    origins.extend(cors_origins.iter().cloned());
    let state = AppState::new(wb, studio, cli.session.clone());
    let app = api::router(state, &origins, ui);
    let addr = bind.unwrap_or(config.bind.clone());
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::validation("Runtime", e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::validation("Bind", format!("{addr}: {e}")))?;
        log::info!("listening on http://{}", listener.local_addr().map(|a| a.to_string()).unwrap_or(addr));
        axum::serve(listener, app)
            .await
            .map_err(|e| CliError::validation("Serve", e.to_string()))
    })?;
    Ok(())
}

/// Exposed for tests: the arc-wrapped state a `serve` would use.
pub fn state_for(config: &Config, session: Option<PathBuf>) -> Result<Arc<AppState>, CliError> {
    let wb = setup::workbench(config)?;
    let studio = match &session {
        Some(path) => Studio::load(path)?,
        None => Studio::default(),
    };
    Ok(AppState::new(wb, studio, session))
}
