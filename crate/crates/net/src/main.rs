use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use lbs_net::client::NodeClient;
use lbs_net::config::{NodeConfig, Role};
use lbs_net::demo::{self, DemoOptions};
use lbs_net::envelope::{Envelope, ErrorCode};
use lbs_net::scenario::{Runner, Scenario};
use lbs_net::serve;
use serde_json::json;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "lbs", version, about = "Location-based restaurant information nodes and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one node.
    Serve {
        role: Role,
        #[arg(long)]
        config: PathBuf,
    },
    /// Replace a cloud unit's restaurants with a seed file.
    Seed {
        #[arg(long)]
        cu: String,
        #[arg(long)]
        file: PathBuf,
    },
    #[command(subcommand)]
    Client(ClientCommand),
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    #[command(subcommand)]
    Demo(DemoCommand),
}

#[derive(Args)]
struct LspArg {
    #[arg(long, default_value = "127.0.0.1:7001")]
    lsp: String,
}

#[derive(Args)]
struct CuArgs {
    #[arg(long)]
    cu: String,
    #[arg(long)]
    token: String,
}

#[derive(Subcommand)]
enum ClientCommand {
    Register {
        #[command(flatten)]
        lsp: LspArg,
        #[arg(long)]
        phone: String,
        #[arg(long)]
        password: String,
        #[arg(long, value_delimiter = ',')]
        preferences: Vec<String>,
    },
    Login {
        #[command(flatten)]
        lsp: LspArg,
        #[arg(long)]
        user_id: String,
        #[arg(long)]
        password: String,
    },
    /// Resolve a zone from an RFID tag or beacon ranges (`bx,by,d`, repeated).
    Locate {
        #[command(flatten)]
        lsp: LspArg,
        #[arg(long, conflicts_with = "gps")]
        rfid: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        gps: Vec<String>,
        /// Records the caller's presence in the resolved zone.
        #[arg(long)]
        token: Option<String>,
    },
    Restaurants {
        #[command(flatten)]
        cu: CuArgs,
    },
    Query {
        #[command(flatten)]
        cu: CuArgs,
        #[arg(long)]
        category: String,
    },
    Info {
        #[command(flatten)]
        cu: CuArgs,
        #[arg(long)]
        id: String,
    },
}

#[derive(Subcommand)]
enum ScenarioCommand {
    Run {
        path: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7001")]
        lsp: String,
        #[arg(long, default_value = "127.0.0.1:7000")]
        csp: String,
        /// `zone_id=host:port`, bypassing the CSP directory.
        #[arg(long)]
        cu: Vec<String>,
        /// Where to write the transcript; stdout when absent.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DemoCommand {
    Up {
        #[arg(long)]
        zones: PathBuf,
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long, default_value_t = 7000)]
        base_port: u16,
    },
}

fn print_envelope(env: &Envelope) -> ExitCode {
    println!("{}", serde_json::to_string_pretty(env).expect("envelope serializes"));
    if env.is_ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn parse_observation(raw: &str) -> anyhow::Result<serde_json::Value> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad observation {raw:?}"))?;
    match parts.as_slice() {
        [bx, by, d] => Ok(json!({"bx": bx, "by": by, "d": d})),
        _ => bail!("observation {raw:?} must be bx,by,d"),
    }
}

async fn shutdown_signal() {
    let _ = tokio::signal::ctrl_c().await;
}

async fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Serve { role, config } => {
            let cfg = NodeConfig::load(&config)?;
            if cfg.role != role {
                bail!("ConfigError: config is for role {}, not {role}", cfg.role);
            }
            let node = serve(cfg).await?;
            println!("{role} listening on {}", node.endpoint());
            shutdown_signal().await;
            node.shutdown().await;
            Ok(ExitCode::SUCCESS)
        }
        Command::Seed { cu, file } => {
            let text = std::fs::read_to_string(&file).with_context(|| file.display().to_string())?;
            let env = NodeClient::new(&cu).ingest(&text).await?;
            Ok(print_envelope(&env))
        }
        Command::Client(cmd) => {
            let env = match cmd {
                ClientCommand::Register { lsp, phone, password, preferences } => {
                    NodeClient::new(&lsp.lsp).register(&phone, &password, &preferences).await?
                }
                ClientCommand::Login { lsp, user_id, password } => {
                    NodeClient::new(&lsp.lsp).login(&user_id, &password).await?
                }
                ClientCommand::Locate { lsp, rfid, gps, token } => {
                    let body = match rfid {
                        Some(tag) => json!({"method": "rfid", "tag": tag}),
                        None if !gps.is_empty() => {
                            let obs = gps.iter().map(|g| parse_observation(g)).collect::<anyhow::Result<Vec<_>>>()?;
                            json!({"method": "gps", "observations": obs})
                        }
                        None => bail!("locate needs --rfid or at least one --gps"),
                    };
                    NodeClient::new(&lsp.lsp).locate(&body, token.as_deref()).await?
                }
                ClientCommand::Restaurants { cu } => NodeClient::new(&cu.cu).restaurants(&cu.token).await?,
                ClientCommand::Query { cu, category } => {
                    NodeClient::new(&cu.cu).query(&cu.token, &category).await?
                }
                ClientCommand::Info { cu, id } => NodeClient::new(&cu.cu).restaurant(&cu.token, &id).await?,
            };
            Ok(print_envelope(&env))
        }
        Command::Scenario(ScenarioCommand::Run { path, lsp, csp, cu, transcript }) => {
            let scenario = Scenario::load(&path)?;
            let mut runner = Runner::new(&lsp, &csp);
            for pair in &cu {
                let (zone, ep) = pair
                    .split_once('=')
                    .ok_or_else(|| anyhow!("--cu expects zone_id=host:port, got {pair:?}"))?;
                runner = runner.with_cu(zone, ep);
            }
            let result = runner.run(&scenario).await;
            let text = result.to_json_pretty();
            match &transcript {
                Some(p) => std::fs::write(p, &text).with_context(|| p.display().to_string())?,
                None => println!("{text}"),
            }
            match result.into_result() {
                Ok(_) => Ok(ExitCode::SUCCESS),
                Err(e) => {
                    eprintln!("{e}");
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Command::Demo(DemoCommand::Up { zones, seeds, base_port }) => {
            let mut opts = DemoOptions::new(zones);
            opts.seeds_dir = seeds;
            opts.base_port = base_port;
            let topology = demo::up(&opts).await?;
            println!("csp {}", topology.csp_endpoint());
            println!("lsp {}", topology.lsp_endpoint());
            for (zone, node) in &topology.cus {
                println!("cu {zone} {}", node.endpoint());
            }
            shutdown_signal().await;
            topology.shutdown().await;
            Ok(ExitCode::SUCCESS)
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()).await {
        Ok(code) => code,
        Err(e) => {
            let code = match e.downcast_ref::<lbs_net::ServeError>() {
                Some(se) => se.code(),
                None => ErrorCode::ConfigError,
            };
            let text = e.to_string();
            if text.starts_with(code.as_str()) {
                eprintln!("{text}");
            } else {
                eprintln!("error: {text:#}");
            }
            ExitCode::from(2)
        }
    }
}
