use std::path::{Path, PathBuf};
use std::sync::Arc;

use mailsleuth_core::analytics::Granularity;
use mailsleuth_core::api::{
    self, ClusterMembers, Envelope, FilterRequest, ResultSummary, TaggedEntity,
};
use mailsleuth_core::cluster::ClusterSummary;
use mailsleuth_core::ingest::{self, SchemaMap, SourceFormat};
use mailsleuth_core::query::ActionLog;
use mailsleuth_core::session::{replay, Session};
use mailsleuth_core::store::Store;
use mailsleuth_core::{CorrespondentStat, Error, Result, TimeBin};
use serde::Serialize;

use crate::table::Table;
use crate::{Cli, Command, FilterArgs, GranularityArg, GraphFormat};

pub fn run(cli: Cli) -> Result<()> {
    let data_dir = cli.data_dir;
    match cli.command {
        Command::Ingest {
            path,
            format,
            schema_map,
            synthesize_bodies,
            seed,
            label,
        } => ingest_cmd(
            &data_dir,
            &path,
            &format,
            &schema_map,
            synthesize_bodies.as_deref(),
            seed,
            label,
        ),
        Command::Query {
            dataset_id,
            filters,
            json,
        } => {
            let session = open_session(&Store::open(&data_dir)?, &dataset_id, &filters)?;
            let summary = api::summary(&session);
            if json {
                print_json(&summary);
            } else {
                println!("{}", match_line(&summary.data));
            }
            Ok(())
        }
        Command::Report {
            dataset_id,
            filters,
            entities,
            granularity,
            json,
        } => report_cmd(
            &data_dir,
            &dataset_id,
            &filters,
            entities as usize,
            granularity,
            json,
        ),
        Command::ExportGraph {
            dataset_id,
            filters,
            format,
            out,
        } => {
            let session = open_session(&Store::open(&data_dir)?, &dataset_id, &filters)?;
            let text = match format {
                GraphFormat::Dot => session.graph().to_dot(),
                GraphFormat::Graphml => session.graph().to_graphml(),
                GraphFormat::Json => to_json(&api::graph(&session)) + "\n",
            };
            write_output(out.as_deref(), &text)
        }
        Command::Cluster {
            dataset_id,
            filters,
            k,
            seed,
            restarts,
            json,
        } => cluster_cmd(
            &data_dir,
            &dataset_id,
            &filters,
            k as usize,
            seed,
            restarts as usize,
            json,
        ),
        Command::Replay {
            dataset_id,
            log,
            json,
        } => replay_cmd(&data_dir, &dataset_id, &log, json),
        Command::Tags { assign, term, json } => tags_cmd(&data_dir, &assign, term.as_deref(), json),
        Command::Serve {
            port,
            cluster_doc_cap,
            restarts,
        } => {
            let config = mailsleuth_service::Config {
                data_dir: data_dir.clone(),
                cluster_doc_cap,
                restarts,
            };
            let runtime = tokio::runtime::Runtime::new().map_err(|e| io_error(&data_dir, e))?;
            eprintln!("listening on 0.0.0.0:{port}");
            runtime
                .block_on(mailsleuth_service::serve(config, port))
                .map_err(|e| io_error(&data_dir, e))
        }
    }
}

fn io_error(path: &Path, e: impl ToString) -> Error {
    Error::StorageFailure {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("payloads serialize")
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", to_json(value));
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| io_error(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Filter requests in application order.
pub fn filter_requests(args: &FilterArgs) -> Vec<FilterRequest> {
    let mut out: Vec<FilterRequest> = Vec::new();
    out.extend(
        args.subject
            .iter()
            .map(|t| FilterRequest::text("subject", t)),
    );
    out.extend(
        args.content
            .iter()
            .map(|t| FilterRequest::text("content", t)),
    );
    out.extend(
        args.correspondent
            .iter()
            .map(|a| FilterRequest::text("correspondent", a)),
    );
    if args.from.is_some() || args.to.is_some() {
        out.push(FilterRequest::range(
            args.from.as_deref().unwrap_or("0001-01-01"),
            args.to.as_deref().unwrap_or("9999-12-31"),
        ));
    }
    out
}

fn open_session(store: &Store, dataset_id: &str, filters: &FilterArgs) -> Result<Session> {
    let dataset = Arc::new(store.load_dataset(dataset_id)?);
    let mut session = Session::new(dataset);
    for request in filter_requests(filters) {
        session.add_filter(request.to_predicate()?)?;
    }
    Ok(session)
}

fn match_line(summary: &ResultSummary) -> String {
    let ids: Vec<String> = summary.doc_ids.iter().map(ToString::to_string).collect();
    match summary.count {
        0 => "0 matches".to_string(),
        1 => format!("1 match: {}", ids[0]),
        n => format!("{n} matches: {}", ids.join(" ")),
    }
}

fn read_pool(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::UnreadableStream(format!("{}: {e}", path.display())))?;
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        serde_json::from_str(&text)
            .map_err(|e| Error::UnreadableStream(format!("{}: {e}", path.display())))
    } else {
        Ok(text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect())
    }
}

fn ingest_cmd(
    data_dir: &Path,
    path: &Path,
    format: &str,
    schema_map: &[String],
    pool: Option<&Path>,
    seed: u64,
    label: Option<String>,
) -> Result<()> {
    let store = Store::open(data_dir)?;
    let format: SourceFormat = format.parse()?;
    let schema = if schema_map.is_empty() {
        None
    } else {
        let pairs: Vec<&str> = schema_map.iter().map(String::as_str).collect();
        Some(SchemaMap::parse_pairs(&pairs)?)
    };
    let outcome = ingest::parse_path(path, format, schema.as_ref())?;
    let synthesize = match pool {
        Some(p) => Some((read_pool(p)?, seed)),
        None => None,
    };
    let label = label.unwrap_or_else(|| {
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string())
    });
    let records = outcome.records.len();
    let handle = ingest::ingest_records(&store, outcome.records, &label, synthesize.as_ref())?;
    eprintln!("ingested {records} records ({} skipped)", outcome.skipped);
    println!("{}", handle.dataset_id);
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub summary: Envelope<ResultSummary>,
    pub correspondents: Envelope<Vec<CorrespondentStat>>,
    pub timeline: Envelope<Vec<TimeBin>>,
    pub entities: Option<Envelope<Vec<TaggedEntity>>>,
}

fn report_cmd(
    data_dir: &Path,
    dataset_id: &str,
    filters: &FilterArgs,
    k: usize,
    granularity: GranularityArg,
    json: bool,
) -> Result<()> {
    let store = Store::open(data_dir)?;
    let tags = store.load_tag_store()?;
    let session = open_session(&store, dataset_id, filters)?;
    let granularity = match granularity {
        GranularityArg::Day => Granularity::Day,
        GranularityArg::Month => Granularity::Month,
        GranularityArg::Year => Granularity::Year,
    };
    let entities = match api::entities(&session, k, &tags) {
        Ok(e) => Some(e),
        Err(Error::EmptyResults) => None,
        Err(e) => return Err(e),
    };
    let report = Report {
        summary: api::summary(&session),
        correspondents: api::correspondents(&session),
        timeline: api::timeline(&session, granularity),
        entities,
    };
    if json {
        print_json(&report);
        return Ok(());
    }

    println!(
        "{} of {} emails match",
        report.summary.data.count,
        session.dataset().records.len()
    );
    println!("\nCorrespondents");
    let mut t = Table::new(&["address", "sent", "received", "total"]);
    for s in &report.correspondents.data {
        t.row(vec![
            s.address.to_string(),
            s.sent.to_string(),
            s.received.to_string(),
            s.total.to_string(),
        ]);
    }
    print!("{t}");
    println!("\nTimeline ({granularity})");
    let mut t = Table::new(&["bucket", "count"]);
    for b in &report.timeline.data {
        t.row(vec![b.bucket.clone(), b.count.to_string()]);
    }
    print!("{t}");
    println!("\nEntities");
    let mut t = Table::new(&["term", "score", "tags"]);
    for e in report.entities.iter().flat_map(|e| &e.data) {
        let tags: Vec<&str> = e.tags.iter().map(String::as_str).collect();
        t.row(vec![
            e.term.to_string(),
            format!("{:.4}", e.score),
            tags.join(","),
        ]);
    }
    print!("{t}");
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct ClusterReport {
    pub summary: Envelope<ClusterSummary>,
    pub members: Vec<Envelope<ClusterMembers>>,
}

fn cluster_cmd(
    data_dir: &Path,
    dataset_id: &str,
    filters: &FilterArgs,
    k: usize,
    seed: u64,
    restarts: usize,
    json: bool,
) -> Result<()> {
    let mut session = open_session(&Store::open(data_dir)?, dataset_id, filters)?;
    session.clusterize(k, seed, restarts)?;
    let report = ClusterReport {
        summary: api::cluster_summary(&session)?,
        members: (0..k)
            .map(|i| api::cluster_members(&session, i))
            .collect::<Result<_>>()?,
    };
    if json {
        print_json(&report);
        return Ok(());
    }
    let s = &report.summary.data;
    println!(
        "k={} seed={} objective={:.6} iterations={}{}",
        s.k,
        s.seed,
        s.objective,
        s.iterations_run,
        if s.converged {
            ""
        } else {
            " (iteration cap reached)"
        }
    );
    for m in &report.members {
        let ids: Vec<String> = m.data.members.iter().map(ToString::to_string).collect();
        let head = m.data.head.map_or("-".to_string(), |h| h.to_string());
        println!(
            "cluster {} head {} ({} docs): {}",
            m.data.index,
            head,
            ids.len(),
            ids.join(" ")
        );
    }
    Ok(())
}

fn tags_cmd(data_dir: &Path, assign: &[String], term: Option<&str>, json: bool) -> Result<()> {
    let store = Store::open(data_dir)?;
    let mut tags = store.load_tag_store()?;
    if !assign.is_empty() {
        for pair in assign {
            let (t, label) = pair
                .split_once('=')
                .ok_or_else(|| Error::InvalidTerm(format!("expected TERM=LABEL, got `{pair}`")))?;
            tags.assign(t, label)?;
        }
        store.persist_tag_store(&tags)?;
    }
    match term {
        Some(t) => {
            let update = api::tag_update(&tags, t);
            if json {
                print_json(&update);
            } else {
                let labels: Vec<&str> = update.tags.iter().map(String::as_str).collect();
                println!("{}: {}", update.term, labels.join(", "));
            }
        }
        None => {
            let dist = tags.distribution();
            if json {
                print_json(&dist);
            } else {
                let mut t = Table::new(&["tag", "terms"]);
                for c in &dist {
                    t.row(vec![c.tag.clone(), c.count.to_string()]);
                }
                print!("{t}");
            }
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ReplayReport {
    session_id: String,
    actions: usize,
    summary: Envelope<ResultSummary>,
}

fn replay_cmd(data_dir: &Path, dataset_id: &str, log_path: &PathBuf, json: bool) -> Result<()> {
    let store = Store::open(data_dir)?;
    let text = std::fs::read_to_string(log_path)
        .map_err(|e| Error::UnreadableStream(format!("{}: {e}", log_path.display())))?;
    let log = ActionLog::from_jsonl(&text)?;
    let dataset = Arc::new(store.load_dataset(dataset_id)?);
    let mut tags = store.load_tag_store()?;
    let before = tags.clone();
    let session = replay(&log, dataset, &mut tags)?;
    if tags != before {
        store.persist_tag_store(&tags)?;
    }
    store.save_session(session.state())?;
    let report = ReplayReport {
        session_id: session.id().to_string(),
        actions: log.len(),
        summary: api::summary(&session),
    };
    if json {
        print_json(&report);
        return Ok(());
    }
    let graph = session.graph();
    println!("session {}", report.session_id);
    println!("replayed {} actions", report.actions);
    println!("{}", match_line(&report.summary.data));
    println!("fingerprint {}", report.summary.fingerprint);
    println!(
        "graph: {} nodes, {} edges, {} undoable removals",
        graph.node_count(),
        graph.edge_count(),
        graph.undo_depth()
    );
    if let Some(c) = session.clustering() {
        println!(
            "clustering: k={} seed={} objective={:.6}",
            c.k, c.seed, c.objective
        );
    }
    Ok(())
}
