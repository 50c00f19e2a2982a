//! The `qkdn-orr` command-line interface.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::Deserialize;

use crate::harness::{
    compare_models, export_csv, export_raw, parse_csv, run_scenario, Metric, Scenario,
    ScenarioOutcome, StatRow,
};
use crate::kms::{HttpKmsClient, Kms, KmsApi, KmsHttpServer};
use crate::netsim::{ChannelConfig, LatencyModel};
use crate::protocol::Model;

#[derive(Parser)]
#[command(
    name = "qkdn-orr",
    version,
    about = "Benchmark key-relay, trusted-node and onion-routing-relay key distribution over a simulated QKD network"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run benchmark scenarios and export aggregated results.
    Run(Box<RunArgs>),
    /// Key-management-service utilities.
    #[command(subcommand)]
    Kms(KmsCommand),
    /// Re-analyze an exported results file.
    Compare(CompareArgs),
}

#[derive(Subcommand)]
enum KmsCommand {
    /// Serve the ETSI-014-style REST interface.
    Serve(ServeArgs),
}

#[derive(Args)]
struct ServeArgs {
    /// Bind address, e.g. 127.0.0.1:8600 (port 0 picks one).
    #[arg(long)]
    addr: String,
    /// Seed the key stream for reproducible serving.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CompareArgs {
    /// Results CSV written by `run --out`.
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Args, Default)]
struct RunArgs {
    /// kr | tn | orr | all
    #[arg(long)]
    model: Option<String>,
    /// Circuit sizes, comma separated (destination included).
    #[arg(long, value_delimiter = ',')]
    nodes: Option<Vec<usize>>,
    /// Measured trials per (model, size) point.
    #[arg(long)]
    trials: Option<usize>,
    /// Seed for reproducible secrets and keys; omit for OS entropy.
    #[arg(long)]
    seed: Option<u64>,
    /// Injected per-send channel latency in microseconds.
    #[arg(long = "latency-us")]
    latency_us: Option<u64>,
    /// Re-encrypt under the next link's QKD key at every ORR hop.
    #[arg(long = "orr-qkd-every-hop", action = ArgAction::Set)]
    orr_qkd_every_hop: Option<bool>,
    /// Aggregated results CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional per-trial raw dump path.
    #[arg(long)]
    raw: Option<PathBuf>,
    /// Use a remote KMS at this address instead of the in-process store.
    #[arg(long = "kms-http")]
    kms_http: Option<String>,
    /// Use the in-process KMS (the default).
    #[arg(long = "kms-inproc")]
    kms_inproc: bool,
    /// TOML file with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Config-file counterpart of [`RunArgs`].
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    model: Option<String>,
    nodes: Option<Vec<usize>>,
    trials: Option<usize>,
    seed: Option<u64>,
    latency_us: Option<u64>,
    orr_qkd_every_hop: Option<bool>,
    out: Option<PathBuf>,
    raw: Option<PathBuf>,
    kms_http: Option<String>,
    kms_inproc: Option<bool>,
}

#[derive(Debug)]
struct ResolvedRun {
    models: Vec<Model>,
    nodes: Vec<usize>,
    trials: usize,
    seed: Option<u64>,
    latency_us: u64,
    orr_qkd_every_hop: bool,
    out: PathBuf,
    raw: Option<PathBuf>,
    kms_http: Option<String>,
}

fn parse_models(selector: &str) -> Result<Vec<Model>, String> {
    match selector.to_ascii_lowercase().as_str() {
        "all" => Ok(Model::ALL.to_vec()),
        other => Ok(vec![other.parse::<Model>()?]),
    }
}

fn resolve(args: &RunArgs) -> anyhow::Result<ResolvedRun> {
    let file: ConfigFile = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str(&text)?
        }
        None => ConfigFile::default(),
    };

    let model_selector = args
        .model
        .clone()
        .or(file.model)
        .unwrap_or_else(|| "all".into());
    let models = parse_models(&model_selector).map_err(|e| anyhow::anyhow!(e))?;

    let kms_http = args.kms_http.clone().or(file.kms_http);
    let kms_inproc = args.kms_inproc || file.kms_inproc.unwrap_or(false);
    if kms_http.is_some() && kms_inproc {
        anyhow::bail!("--kms-http and --kms-inproc are mutually exclusive");
    }

    Ok(ResolvedRun {
        models,
        nodes: args
            .nodes
            .clone()
            .or(file.nodes)
            .unwrap_or_else(|| vec![3, 5, 7, 9, 11]),
        trials: args.trials.or(file.trials).unwrap_or(1000),
        seed: args.seed.or(file.seed),
        latency_us: args.latency_us.or(file.latency_us).unwrap_or(0),
        orr_qkd_every_hop: args
            .orr_qkd_every_hop
            .or(file.orr_qkd_every_hop)
            .unwrap_or(true),
        out: args
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from("results.csv")),
        raw: args.raw.clone().or(file.raw),
        kms_http,
    })
}

fn print_point_summaries(rows: &[StatRow]) {
    for row in rows.iter().filter(|r| r.metric == Metric::EncryptionTime) {
        let dist = rows
            .iter()
            .find(|r| {
                r.model == row.model
                    && r.n_nodes == row.n_nodes
                    && r.metric == Metric::DistributionTime
            })
            .map(|r| r.median_us)
            .unwrap_or(f64::NAN);
        println!(
            "{:>3} n={:>2}: encryption median {:>10.3} us | distribution median {:>10.3} us | {} trials",
            row.model.to_string(),
            row.n_nodes,
            row.median_us,
            dist,
            row.trials
        );
    }
}

fn run_command(args: &RunArgs) -> anyhow::Result<i32> {
    let resolved = resolve(args)?;

    let kms: Arc<dyn KmsApi> = match &resolved.kms_http {
        Some(addr) => Arc::new(HttpKmsClient::new(addr.clone())),
        None => Arc::new(match resolved.seed {
            // keep the KMS stream independent of the scenario stream
            Some(seed) => Kms::with_seed(seed ^ 0x9E37_79B9_7F4A_7C15),
            None => Kms::from_entropy(),
        }),
    };

    let channel_config = ChannelConfig {
        latency: if resolved.latency_us == 0 {
            LatencyModel::Zero
        } else {
            LatencyModel::FixedMicros(resolved.latency_us)
        },
        ..ChannelConfig::default()
    };

    let mut all_rows = Vec::new();
    let mut all_raw = Vec::new();
    let mut total_invalid = 0usize;
    let mut total_executed = 0usize;
    for model in &resolved.models {
        let mut scenario = Scenario::new(*model, resolved.nodes.clone(), resolved.trials);
        scenario.seed = resolved.seed;
        scenario.channel_config = channel_config;
        scenario.orr_qkd_every_hop = resolved.orr_qkd_every_hop;
        let ScenarioOutcome {
            rows,
            raw,
            invalid,
            executed,
        } = run_scenario(&scenario, kms.clone())?;
        print_point_summaries(&rows);
        for bad in &invalid {
            eprintln!(
                "invalid trial: {} n={} trial {}: {}",
                bad.model, bad.n_nodes, bad.trial, bad.reason
            );
        }
        total_invalid += invalid.len();
        total_executed += executed;
        all_rows.extend(rows);
        all_raw.extend(raw);
    }

    export_csv(&all_rows, &resolved.out)?;
    println!("wrote {}", resolved.out.display());
    if let Some(raw_path) = &resolved.raw {
        export_raw(&all_raw, raw_path)?;
        println!("wrote {}", raw_path.display());
    }

    if resolved.models.len() == Model::ALL.len() {
        match compare_models(&all_rows) {
            Ok(report) => print!("{report}"),
            Err(e) => eprintln!("comparison skipped: {e}"),
        }
    }

    if total_invalid > 0 {
        eprintln!(
            "{total_invalid}/{total_executed} trials invalid — see diagnostics above"
        );
        return Ok(1);
    }
    Ok(0)
}

fn serve_command(args: &ServeArgs) -> anyhow::Result<i32> {
    let kms = Arc::new(match args.seed {
        Some(seed) => Kms::with_seed(seed),
        None => Kms::from_entropy(),
    });
    let server = KmsHttpServer::serve(kms, &args.addr, 4)?;
    println!("kms listening on {}", server.local_addr());
    loop {
        std::thread::park();
    }
}

fn compare_command(args: &CompareArgs) -> anyhow::Result<i32> {
    let rows = parse_csv(&args.input)?;
    let report = compare_models(&rows)?;
    print!("{report}");
    Ok(0)
}

/// Parse `std::env::args`, dispatch, and return the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => run_command(args),
        Command::Kms(KmsCommand::Serve(args)) => serve_command(args),
        Command::Compare(args) => compare_command(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}
