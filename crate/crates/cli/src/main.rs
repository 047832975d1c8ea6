mod run;

use std::net::IpAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use netcontrast::generators::GeneratorSpec;
use netcontrast::graph::write_edge_list;
use netcontrast_service::{HubConfig, ServeConfig, DEFAULT_PORT};

/// Contrastive analysis of a target network against a background network.
#[derive(Debug, Parser)]
#[command(name = "netcontrast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn features, fit contrastive PCA and export the results.
    Run(run::RunArgs),
    /// Write a random network as an edge list.
    Generate(GenerateArgs),
    /// Start the JSON message service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(subcommand)]
    model: Model,
    /// Output file; standard output when absent.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Model {
    /// Undirected G(n, p).
    Gilbert {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Directed preferential attachment with `c` links per new node.
    Price {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        c: usize,
        /// Initial attractiveness added to every in-degree.
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long, env = "NETCONTRAST_PORT", default_value_t = DEFAULT_PORT)]
    port: u16,
    /// Directory of stored datasets and their manifest.
    #[arg(long, env = "NETCONTRAST_DATA_DIR")]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value_t = HubConfig::default().max_sessions)]
    max_sessions: usize,
    #[arg(long, default_value_t = HubConfig::default().max_upload_bytes)]
    max_upload_bytes: usize,
}

/// Exit status for unreadable inputs; usage errors also exit with 2.
const EXIT_INPUT: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = match cli.command {
        Command::Serve(_) => "info",
        _ => "warn",
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(filter)),
        )
        .with_writer(std::io::stderr)
        .init();

    let result = match cli.command {
        Command::Run(args) => run::run(&args),
        Command::Generate(args) => generate(&args),
        Command::Serve(args) => serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<run::InputError>().is_some() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn generate(args: &GenerateArgs) -> anyhow::Result<()> {
    let spec = match args.model {
        Model::Gilbert { n, p, seed } => GeneratorSpec::Gilbert { n, p, seed },
        Model::Price { n, c, a, seed } => GeneratorSpec::Price { n, c, a, seed },
    };
    let text = write_edge_list(&spec.generate()?);
    match &args.output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn serve(args: ServeArgs) -> anyhow::Result<()> {
    let config = ServeConfig {
        host: args.host,
        port: args.port,
        hub: HubConfig {
            data_dir: args.data_dir,
            max_sessions: args.max_sessions,
            max_upload_bytes: args.max_upload_bytes,
        },
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(netcontrast_service::serve(config))?;
    Ok(())
}
