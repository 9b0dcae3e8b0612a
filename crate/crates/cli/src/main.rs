//! `s3ctl`, the operator client for the slice management service.
//!
//! Exit codes: 0 success (slice Active, every isolation verdict passed);
//! 1 rejection, 4xx, failed verdict, bad input or usage; 2 transport error,
//! 5xx or timeout.

mod client;
mod render;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use client::{Client, Failure};

#[derive(Parser)]
#[command(name = "s3ctl", version, about = "Manage satellite network slices")]
struct Cli {
    /// Service base URL.
    #[arg(long, env = "S3_ENDPOINT", default_value = "http://127.0.0.1:8080", global = true)]
    endpoint: String,
    /// Tenant name sent as X-Tenant.
    #[arg(long, env = "S3_TENANT", default_value = "operator", global = true)]
    tenant: String,
    #[arg(long, value_enum, default_value_t = Output::Table, global = true)]
    output: Output,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 30, global = true)]
    timeout: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Table,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Submit a slice request file; the mode field picks the endpoint.
    Apply { file: PathBuf },
    /// List slices.
    List,
    /// Show one slice with its allocation, chain and rules.
    Describe { slice_id: String },
    /// Change the QoS of an active slice.
    Modify {
        slice_id: String,
        #[arg(long)]
        gbr: Option<f64>,
        #[arg(long)]
        mbr: Option<f64>,
        #[arg(long)]
        pdb: Option<f64>,
        #[arg(long)]
        per: Option<f64>,
        #[arg(long)]
        priority: Option<u8>,
    },
    /// Terminate a slice.
    Delete { slice_id: String },
    /// Show beam and host utilization.
    Pool,
    /// Show the ingress classifier and the per stitch point tables.
    Rules,
    /// Run an emulation scenario and wait for its report.
    Scenario {
        file: PathBuf,
        /// Give up after this many seconds.
        #[arg(long, default_value_t = 300)]
        wait: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let client = Client::new(&cli.endpoint, &cli.tenant, Duration::from_secs(cli.timeout))?;
    let emit = |v: &Value, table: fn(&Value) -> String| match cli.output {
        Output::Json => println!("{}", serde_json::to_string_pretty(v).unwrap()),
        Output::Table => print!("{}", table(v)),
    };
    match &cli.command {
        Command::Apply { file } => {
            let body = read_json(file)?;
            let path = match body["profile"]["mode"].as_str() {
                Some("Integrated") => "/nssi",
                Some("Standalone") => "/slices",
                Some(other) => return Err(Failure::Rejected(format!("{}: unknown mode {other:?}", file.display()))),
                None => return Err(Failure::Rejected(format!("{}: missing profile.mode", file.display()))),
            };
            let created = client.post(path, &body)?;
            let state = created["state"].as_str().unwrap_or_default();
            match cli.output {
                Output::Json => println!("{}", serde_json::to_string_pretty(&created).unwrap()),
                Output::Table => println!("{} {state}", render::cell(&created["slice_id"])),
            }
            Ok(if state == "Active" { 0 } else { 1 })
        }
        Command::List => {
            emit(&client.get("/slices")?, render::slices);
            Ok(0)
        }
        Command::Describe { slice_id } => {
            emit(&client.get(&format!("/slices/{}", segment(slice_id)))?, render::slice);
            Ok(0)
        }
        Command::Modify { slice_id, gbr, mbr, pdb, per, priority } => {
            let mut delta = Map::new();
            for (k, v) in [("gbr_mbps", gbr), ("mbr_mbps", mbr), ("pdb_ms", pdb), ("per", per)] {
                if let Some(v) = v {
                    delta.insert(k.into(), json!(v));
                }
            }
            if let Some(p) = priority {
                delta.insert("priority".into(), json!(p));
            }
            if delta.is_empty() {
                return Err(Failure::Rejected("nothing to modify: pass at least one of --gbr --mbr --pdb --per --priority".into()));
            }
            let updated = client.patch(&format!("/slices/{}", segment(slice_id)), &Value::Object(delta))?;
            emit(&updated, render::slice);
            Ok(0)
        }
        Command::Delete { slice_id } => {
            let res = client.delete(&format!("/slices/{}", segment(slice_id)))?;
            match cli.output {
                Output::Json => println!("{}", serde_json::to_string_pretty(&res).unwrap()),
                Output::Table => println!("{slice_id} {}", render::cell(&res["state"])),
            }
            Ok(0)
        }
        Command::Pool => {
            emit(&client.get("/pool")?, render::pool);
            Ok(0)
        }
        Command::Rules => {
            emit(&client.get("/rules")?, render::rules);
            Ok(0)
        }
        Command::Scenario { file, wait } => {
            let body = read_json(file)?;
            let accepted = client.post("/scenario", &body)?;
            let id = accepted["scenario_id"]
                .as_u64()
                .ok_or_else(|| Failure::Transport("service returned no scenario_id".into()))?;
            let job = poll(&client, id, Duration::from_secs(*wait))?;
            emit(&job, render::scenario);
            match job["status"].as_str() {
                Some("done") => {
                    let passed = job["passed"].as_bool().unwrap_or(false);
                    if !passed && cli.output == Output::Table {
                        eprintln!("isolation verdict failed");
                    }
                    Ok(if passed { 0 } else { 1 })
                }
                _ => Err(Failure::Transport(format!(
                    "scenario {id} failed: {}",
                    job["error"].as_str().unwrap_or("unknown error")
                ))),
            }
        }
    }
}

fn poll(client: &Client, id: u64, wait: Duration) -> Result<Value, Failure> {
    let deadline = Instant::now() + wait;
    let mut pause = Duration::from_millis(20);
    loop {
        let job = client.get(&format!("/scenario/{id}"))?;
        if job["status"] != "running" {
            return Ok(job);
        }
        if Instant::now() >= deadline {
            return Err(Failure::Transport(format!("scenario {id} still running after {wait:?}")));
        }
        std::thread::sleep(pause);
        pause = (pause * 2).min(Duration::from_millis(500));
    }
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Rejected(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        Failure::Rejected(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
    })
}

/// Percent-encodes a path segment.
fn segment(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || b"-._~".contains(&b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}
