//! `mailsleuth` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "mailsleuth", version, about = "Investigative email analytics")]
pub struct Cli {
    /// Data directory holding datasets, sessions and tags.
    #[arg(
        long,
        global = true,
        env = "MAILSLEUTH_DATA_DIR",
        default_value = "mailsleuth-data"
    )]
    pub data_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

/// Conjunctive filters; applied in the order subject, content,
/// correspondent, date range.
#[derive(Debug, Clone, Default, Args)]
pub struct FilterArgs {
    #[arg(long = "subject", value_name = "TERM")]
    pub subject: Vec<String>,
    #[arg(long = "content", value_name = "TERM")]
    pub content: Vec<String>,
    #[arg(long = "correspondent", value_name = "ADDRESS")]
    pub correspondent: Vec<String>,
    /// Earliest timestamp (inclusive).
    #[arg(long, value_name = "DATE")]
    pub from: Option<String>,
    /// Latest timestamp (inclusive; a bare date covers the whole day).
    #[arg(long, value_name = "DATE")]
    pub to: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GraphFormat {
    Dot,
    Graphml,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GranularityArg {
    Day,
    Month,
    Year,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a corpus and store it as a new dataset; prints the dataset id.
    Ingest {
        path: PathBuf,
        #[arg(long, value_parser = ["mbox", "eml", "csv", "jsonl"])]
        format: String,
        /// `field=column` pairs for CSV input.
        #[arg(long = "schema-map", value_name = "FIELD=COLUMN", num_args = 1..)]
        schema_map: Vec<String>,
        /// File of bodies (JSON array, or one per line) for empty-body records.
        #[arg(long = "synthesize-bodies", value_name = "POOL")]
        synthesize_bodies: Option<PathBuf>,
        #[arg(long, default_value_t = 0, requires = "synthesize_bodies")]
        seed: u64,
        #[arg(long)]
        label: Option<String>,
    },
    /// Count and list the documents matching the filters.
    Query {
        dataset_id: String,
        #[command(flatten)]
        filters: FilterArgs,
        #[arg(long)]
        json: bool,
    },
    /// Correspondent, timeline and entity tables for the matching documents.
    Report {
        dataset_id: String,
        #[command(flatten)]
        filters: FilterArgs,
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
        entities: u64,
        #[arg(long, value_enum, default_value = "month")]
        granularity: GranularityArg,
        #[arg(long)]
        json: bool,
    },
    /// Write the contact graph of the matching documents.
    ExportGraph {
        dataset_id: String,
        #[command(flatten)]
        filters: FilterArgs,
        #[arg(long, value_enum, default_value = "dot")]
        format: GraphFormat,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster the matching documents by content.
    Cluster {
        dataset_id: String,
        #[command(flatten)]
        filters: FilterArgs,
        #[arg(short = 'k', value_parser = clap::value_parser!(u64).range(1..))]
        k: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = mailsleuth_core::cluster::DEFAULT_RESTARTS as u64,
              value_parser = clap::value_parser!(u64).range(1..))]
        restarts: u64,
        #[arg(long)]
        json: bool,
    },
    /// Re-run an exported action log against a dataset.
    Replay {
        dataset_id: String,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Assign tags, look up a term's tags, or show the tag distribution.
    Tags {
        /// `term=label` assignment; repeatable.
        #[arg(long, value_name = "TERM=LABEL")]
        assign: Vec<String>,
        /// Print the tags of this term instead of the distribution.
        #[arg(long)]
        term: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "MAILSLEUTH_PORT", default_value_t = mailsleuth_service::DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value_t = mailsleuth_service::DEFAULT_CLUSTER_DOC_CAP)]
        cluster_doc_cap: usize,
        #[arg(long, default_value_t = mailsleuth_core::cluster::DEFAULT_RESTARTS)]
        restarts: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), e);
            ExitCode::from(2)
        }
    }
}
