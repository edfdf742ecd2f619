//! `dsp-policy` command-line tool.
//!
//! Exit codes: 0 success, 1 validation or violation findings, 2 usage error, 3 I/O or
//! parse error.

use dsp_policy_cli::serve;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand};
use dsp_policy::enforcement::{detective_check_with, AuditLog, DutyStatus};
use dsp_policy::model::{validate_policy, vocabulary_warnings, Policy};
use dsp_policy::patterns::{self, Params, PatternError};
use dsp_policy::pdp::{commit_usage, evaluate_request, AccessRequest, UsageState};
use dsp_policy::pip::{ClockProvider, Pip, RegionHierarchy};
use dsp_policy::profile::ProfileRegistry;
use dsp_policy::simulator::{self, Scenario};
use dsp_policy::textio;

#[derive(Parser, Debug)]
#[command(name = "dsp-policy", version, about = "Usage-control policies for data-space connectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check that every policy in a Turtle file is structurally valid.
    Validate { file: PathBuf },
    /// Print the canonical serialization of a Turtle file.
    Canon { file: PathBuf },
    /// Pattern catalog.
    Patterns {
        #[command(subcommand)]
        command: PatternsCommand,
    },
    /// List the catalog patterns each policy matches.
    Classify { file: PathBuf },
    /// Decide one access request and print the decision as JSON.
    Evaluate {
        #[arg(long)]
        agreement: PathBuf,
        #[arg(long)]
        request: PathBuf,
        /// Usage state JSON; empty state when omitted.
        #[arg(long)]
        state: Option<PathBuf>,
        /// Where to write the state after a permitted request is committed.
        #[arg(long)]
        next_state: Option<PathBuf>,
        /// Region hierarchy JSON for spatial constraints.
        #[arg(long)]
        regions: Option<PathBuf>,
    },
    /// Run a scenario and write report.json and audit.ndjson.
    Simulate {
        scenario: PathBuf,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
    },
    /// Check an agreement's duties against an audit log.
    AuditCheck {
        #[arg(long)]
        agreement: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        now: DateTime<Utc>,
        #[arg(long)]
        regions: Option<PathBuf>,
    },
    /// Serve a scenario's catalog over HTTP.
    Serve {
        scenario: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

#[derive(Subcommand, Debug)]
enum PatternsCommand {
    /// One JSON descriptor per line.
    List,
    /// Instantiate a pattern as a Turtle policy.
    New {
        id: String,
        /// JSON object with the pattern parameters.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(short = 'o', long = "out")]
        out: Option<PathBuf>,
    },
    /// The catalog as a Markdown table.
    Markdown,
}

/// Error that maps to exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const FINDINGS: u8 = 1;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn policies(path: &Path) -> Result<Vec<Policy>> {
    let text = read(path)?;
    let ps = textio::parse(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    if ps.is_empty() {
        anyhow::bail!("{}: no policy found", path.display());
    }
    Ok(ps)
}

fn registry() -> Result<ProfileRegistry> {
    match std::env::var_os("DSP_PROFILE") {
        Some(path) => {
            let path = PathBuf::from(path);
            ProfileRegistry::from_turtle(&read(&path)?).map_err(|e| anyhow!("{}: {e}", path.display()))
        }
        None => Ok(ProfileRegistry::builtin().clone()),
    }
}

fn regions(path: Option<&Path>) -> Result<RegionHierarchy> {
    match path {
        Some(p) => RegionHierarchy::from_json(&read(p)?).map_err(|e| anyhow!("{}: {e}", p.display())),
        None => Ok(RegionHierarchy::default()),
    }
}

fn json_line<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("output types serialize")
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Validate { file } => validate(&file),
        Command::Canon { file } => {
            let out: Vec<String> = policies(&file)?.iter().map(textio::serialize).collect();
            print!("{}", out.join("\n"));
            Ok(0)
        }
        Command::Patterns { command } => patterns_cmd(command),
        Command::Classify { file } => {
            for p in policies(&file)? {
                println!(
                    "{}",
                    json_line(&serde_json::json!({"policy": p.uid, "patterns": patterns::classify(&p)}))
                );
            }
            Ok(0)
        }
        Command::Evaluate {
            agreement,
            request,
            state,
            next_state,
            regions: region_file,
        } => {
            let agreement = policies(&agreement)?.remove(0);
            let req: AccessRequest = serde_json::from_str(&read(&request)?)
                .with_context(|| format!("{}: not an access request", request.display()))?;
            let state: UsageState = match state {
                Some(p) => serde_json::from_str(&read(&p)?)
                    .with_context(|| format!("{}: not a usage state", p.display()))?,
                None => UsageState::new(),
            };
            let pip = Pip::new(vec![std::sync::Arc::new(ClockProvider)], regions(region_file.as_deref())?);
            let decision = evaluate_request(&agreement, &req, &state, &pip)?;
            println!("{}", serde_json::to_string_pretty(&decision)?);
            if let Some(path) = next_state {
                let next = if decision.is_permit() {
                    commit_usage(&decision, &req, &state)?
                } else {
                    state
                };
                write(&path, &serde_json::to_string_pretty(&next)?)?;
            }
            Ok(0)
        }
        Command::Simulate { scenario, out } => simulate(&scenario, &out),
        Command::AuditCheck {
            agreement,
            log,
            now,
            regions: region_file,
        } => {
            let agreement = policies(&agreement)?.remove(0);
            let text = read(&log)?;
            let log = AuditLog::from_ndjson(&text).map_err(|e| anyhow!("{}: {e}", log.display()))?;
            let statuses = detective_check_with(&agreement, &log, now, &regions(region_file.as_deref())?);
            let mut violated = false;
            for s in &statuses {
                violated |= s.status == DutyStatus::Violated;
                println!("{}", json_line(s));
            }
            Ok(if violated { FINDINGS } else { 0 })
        }
        Command::Serve { scenario, addr } => {
            let scenario = load_scenario(&scenario)?;
            let svc = scenario.service()?;
            serve::serve(svc, &addr)
        }
    }
}

fn validate(file: &Path) -> Result<u8> {
    let registry = registry()?;
    let mut problems = 0;
    for p in policies(file)? {
        for w in vocabulary_warnings(&p, &registry) {
            eprintln!("warning: {}: {w}", p.uid);
        }
        for v in validate_policy(&p, &registry) {
            problems += 1;
            println!(
                "{}",
                json_line(&serde_json::json!({"policy": p.uid, "path": v.path, "message": v.message}))
            );
        }
    }
    if problems == 0 {
        println!("valid");
        Ok(0)
    } else {
        Ok(FINDINGS)
    }
}

fn patterns_cmd(command: PatternsCommand) -> Result<u8> {
    match command {
        PatternsCommand::List => {
            for d in patterns::list_patterns() {
                println!("{}", json_line(d));
            }
            Ok(0)
        }
        PatternsCommand::Markdown => {
            print!("{}", patterns::catalog_markdown());
            Ok(0)
        }
        PatternsCommand::New { id, params, out } => {
            let params: Params = match params {
                Some(p) => serde_json::from_str(&read(&p)?)
                    .map_err(|e| UsageError(format!("{}: parameters must be a JSON object: {e}", p.display())))?,
                None => Params::new(),
            };
            let policy = match patterns::instantiate(&id, &params) {
                Ok(p) => p,
                Err(e @ PatternError::UnknownPattern(_)) => return Err(UsageError(e.to_string()).into()),
                Err(e) => {
                    eprintln!("error: {e}");
                    return Ok(FINDINGS);
                }
            };
            let text = textio::serialize(&policy);
            match out {
                Some(path) => write(&path, &text)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
    }
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    Ok(Scenario::from_json(&read(path)?).with_context(|| path.display().to_string())?)
}

fn simulate(scenario: &Path, out: &Path) -> Result<u8> {
    let scenario = load_scenario(scenario)?;
    let report = simulator::run(&scenario)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let report_path = out.join("report.json");
    let audit_path = out.join("audit.ndjson");
    write(&report_path, &serde_json::to_string_pretty(&report)?)?;
    write(&audit_path, &report.log.to_ndjson())?;
    for a in &report.agreements {
        let name = a.uid.as_str().rsplit('/').next().unwrap_or("agreement");
        write(&out.join(format!("agreement-{name}.ttl")), &textio::serialize(a))?;
    }
    let violated = report
        .statuses()
        .iter()
        .filter(|s| s.status == DutyStatus::Violated)
        .count();
    println!(
        "{}",
        json_line(&serde_json::json!({
            "scenario": report.name,
            "report": report_path,
            "audit": audit_path,
            "records": report.log.len(),
            "revocations": report.revocations.len(),
            "violated": violated,
        }))
    );
    Ok(if violated > 0 { FINDINGS } else { 0 })
}
