//! `hmms`: bootstrap a database, ingest camp CSV files, screen, export
//! cohorts, manage rulesets and run the HTTP API.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use hmms_api::ServeError;
use hmms_core::access::{hash_password, HashCost, Principal, Role};
use hmms_core::admin::{self, CohortError, CohortQuery, IngestError, IngestKind};
use hmms_core::config::{Config, ConfigError, Reference};
use hmms_core::immunization::{ImmunizationError, ImmunizationSchedule};
use hmms_core::screening::{Ruleset, RulesetError};
use hmms_core::store::{AuditAction, AuditTarget, Store, StoreError};
use hmms_core::synth::{self, SynthError, SynthOptions};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "hmms", version, about = "School health screening records")]
struct Cli {
    /// Configuration file.
    #[arg(long, global = true, env = "HMMS_CONFIG")]
    config: Option<PathBuf>,
    /// Database file, overriding the configuration.
    #[arg(long, global = true)]
    database: Option<PathBuf>,
    /// Name written to the audit log for changes made by this run.
    #[arg(long, global = true, default_value = "cli")]
    actor: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create the database and the first admin account.
    Init {
        #[arg(long, default_value = "admin")]
        admin_id: String,
        #[arg(long, default_value = "Administrator")]
        admin_name: String,
        #[arg(long, env = "HMMS_ADMIN_PASSWORD", hide_env_values = true)]
        password: String,
    },
    /// Load a CSV file of students, values or doses.
    Ingest {
        kind: IngestKind,
        path: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Screen every student and store any referrals.
    Screen {
        /// Screening date; defaults to today.
        #[arg(long)]
        as_of: Option<NaiveDate>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write a feature matrix for students in an age range.
    ExportCohort(CohortArgs),
    /// Write the store's contents in the ingest CSV format.
    Backup {
        kind: IngestKind,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    #[command(subcommand)]
    Ruleset(RulesetCommand),
    #[command(subcommand)]
    Schedule(ScheduleCommand),
    /// Fill the database with synthetic students for demos and load tests.
    Generate {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        as_of: Option<NaiveDate>,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Debug, Args)]
struct CohortArgs {
    #[arg(long)]
    age_min: u32,
    #[arg(long)]
    age_max: u32,
    /// Catalog key, `bmi` or `immunization_status`. Repeat or separate with commas.
    #[arg(long = "feature", required = true, value_delimiter = ',')]
    features: Vec<String>,
    #[arg(long)]
    as_of: Option<NaiveDate>,
    /// Keep students missing a feature, with blank cells.
    #[arg(long)]
    include_incomplete: bool,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum RulesetCommand {
    /// Check a ruleset file against the catalog.
    Validate { path: PathBuf },
    /// Validate and copy a ruleset to the configured ruleset path.
    Install { path: PathBuf },
    /// Print the active ruleset.
    Show,
}

#[derive(Debug, Subcommand)]
enum ScheduleCommand {
    /// Check a schedule file.
    Validate { path: PathBuf },
    /// Print the active schedule.
    Show,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Cohort(#[from] CohortError),
    #[error(transparent)]
    Ruleset(#[from] RulesetError),
    #[error(transparent)]
    Schedule(#[from] ImmunizationError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Serve(#[from] ServeError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Config(e) => e.code(),
            CliError::Store(e) => e.code(),
            CliError::Ingest(e) => e.code(),
            CliError::Cohort(e) => e.code(),
            CliError::Ruleset(e) => e.code(),
            CliError::Schedule(e) => e.code(),
            CliError::Synth(SynthError::Validation(e)) => e.code(),
            CliError::Synth(SynthError::Store(e)) => e.code(),
            CliError::Serve(e) => e.code(),
            CliError::Io { .. } => "OutputUnwritable",
            CliError::Usage(_) => "Usage",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::new("hmms.db"),
    };
    if let Some(db) = &cli.database {
        config.database = db.clone();
    }
    Ok(config)
}

fn open(config: &Config) -> Result<(Store, Reference), CliError> {
    let reference = config.reference()?;
    if let Some(dir) = config.database.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let store = Store::sqlite(&config.database, reference.catalog.clone(), reference.schedule.clone())?;
    Ok((store, reference))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(io_err(p))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let config = load_config(&cli)?;
    let actor = cli.actor.as_str();
    match cli.command {
        Command::Init { admin_id, admin_name, password } => {
            let (store, reference) = open(&config)?;
            if let Some(path) = config.ruleset.as_ref().filter(|p| !p.exists()) {
                std::fs::write(path, hmms_core::screening::DEFAULT_RULESET).map_err(io_err(path))?;
            }
            if store.principal(&admin_id).is_some() {
                println!("{} already initialized; admin {admin_id} exists", config.database.display());
                return Ok(ExitCode::SUCCESS);
            }
            let admin = Principal {
                principal_id: admin_id.clone(),
                display_name: admin_name,
                role: Role::Admin,
                credential_hash: hash_password(&password, HashCost::default()),
                screening_id: None,
            };
            store.create_principal(admin, actor)?;
            println!(
                "initialized {}: catalog of {} parameters, {} vaccines, ruleset with {} rules; admin {admin_id}",
                config.database.display(),
                reference.catalog.len(),
                reference.schedule.vaccines.len(),
                reference.ruleset.rules.len()
            );
        }
        Command::Ingest { kind, path, report } => {
            let (store, _) = open(&config)?;
            let result = admin::ingest_path(&store, &path, kind, actor)?;
            print!("{result}");
            if let Some(out) = report {
                write_json(&out, &result)?;
            }
            if result.rows_rejected() > 0 {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Screen { as_of, report } => {
            let (store, reference) = open(&config)?;
            let as_of = as_of.unwrap_or_else(|| store.now().date_naive());
            let batch = admin::screen_all(&store, &reference.ruleset.rules, &reference.screening_context(), as_of, actor);
            print!("{batch}");
            if let Some(out) = report {
                write_json(&out, &batch)?;
            }
            if !batch.failures.is_empty() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::ExportCohort(args) => {
            let (store, reference) = open(&config)?;
            let query = CohortQuery {
                age_min: args.age_min,
                age_max: args.age_max,
                features: args.features,
                as_of: args.as_of.unwrap_or_else(|| store.now().date_naive()),
                include_incomplete: args.include_incomplete,
            };
            query.validate(&reference.catalog)?;
            let out = output(args.out.as_deref())?;
            let rows = admin::export_cohort(&store, &query, &reference.screening_context(), out, actor)?;
            eprintln!("exported {rows} rows");
        }
        Command::Backup { kind, out } => {
            let (store, _) = open(&config)?;
            let path = out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
            let rows = admin::export_csv(&store, kind, output(out.as_deref())?)
                .map_err(|e| CliError::Io { path: path.display().to_string(), source: io::Error::other(e) })?;
            eprintln!("wrote {rows} {kind} rows");
        }
        Command::Ruleset(cmd) => ruleset(cmd, &config, actor)?,
        Command::Schedule(ScheduleCommand::Validate { path }) => {
            let schedule = ImmunizationSchedule::load(&path)?;
            println!("{}: {} vaccines, {} doses", path.display(), schedule.vaccines.len(), schedule.total_doses());
        }
        Command::Schedule(ScheduleCommand::Show) => {
            let reference = config.reference()?;
            for v in &reference.schedule.vaccines {
                let ages: Vec<String> = v.recommended_ages.iter().map(|a| a.to_string()).collect();
                println!("{:<12} {}", v.code, ages.join(", "));
            }
        }
        Command::Generate { count, seed, as_of } => {
            let (store, _) = open(&config)?;
            let opts = SynthOptions::new(as_of.unwrap_or_else(|| store.now().date_naive()));
            let n = synth::populate(&store, seed, count, &opts, actor)?;
            println!("generated {n} students (seed {seed})");
        }
        Command::Serve { port, bind } => {
            let mut config = config;
            if let Some(port) = port {
                config.port = port;
            }
            if let Some(bind) = bind {
                config.bind = bind;
            }
            tracing_subscriber::fmt()
                .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
                .init();
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Serve(e.into()))?;
            rt.block_on(hmms_api::serve(config))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn ruleset(cmd: RulesetCommand, config: &Config, actor: &str) -> Result<(), CliError> {
    let reference = config.reference()?;
    match cmd {
        RulesetCommand::Validate { path } => {
            let rs = Ruleset::load(&path, &reference.catalog).inspect_err(list_rule_errors)?;
            println!("{}: ruleset v{} with {} rules is valid", path.display(), rs.ruleset_version, rs.rules.len());
        }
        RulesetCommand::Install { path } => {
            let Some(target) = &config.ruleset else {
                return Err(CliError::Usage("no ruleset path configured; set `ruleset` in the config file".into()));
            };
            let source = std::fs::read_to_string(&path).map_err(|e| CliError::Ruleset(e.into()))?;
            let rs = Ruleset::from_toml(&source, &reference.catalog).inspect_err(list_rule_errors)?;
            std::fs::write(target, &source).map_err(io_err(target))?;
            let (store, _) = open(config)?;
            let detail = format!("install ruleset v{} ({} rules)", rs.ruleset_version, rs.rules.len());
            store.audit_event(actor, AuditAction::Update, AuditTarget::Ruleset(rs.label.clone()), detail)?;
            println!("installed ruleset v{} with {} rules at {}", rs.ruleset_version, rs.rules.len(), target.display());
        }
        RulesetCommand::Show => print!("{}", reference.ruleset.to_toml()),
    }
    Ok(())
}

fn list_rule_errors(e: &RulesetError) {
    if let RulesetError::Invalid(errors) = e {
        for r in errors {
            eprintln!("  {}: {r}", r.code());
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
