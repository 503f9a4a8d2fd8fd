use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use blockprune::audit::write_audit;
use blockprune::cassette::Cassette;
use blockprune::config::{PruneConfig, Stage2};
use blockprune::pipeline::{CassetteMode, RunOptions};
use blockprune::records::{read_records, read_results, HtmlSource, QueryRecord};
use blockprune::{fetch, report_stats, run_pipeline, Backends, Mode};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "blockprune", version, about = "Clean and prune retrieved HTML")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean pages without pruning.
    Clean(RunArgs),
    /// Prune once at a single granularity with the stage-one scorer.
    Prune(RunArgs),
    /// Clean, then coarse and fine pruning.
    Pipeline(RunArgs),
    /// Download URLs into a directory with a manifest.
    Fetch(FetchArgs),
    /// Summarize a results file.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Stage2Flag {
    Gen,
    Off,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSONL records, or a single HTML file; `-` reads records from stdin.
    #[arg(long, default_value = "-")]
    input: String,
    /// Defaults to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Query used when the input is an HTML file.
    #[arg(long, default_value = "")]
    query: String,
    /// Final budget (pipeline) or the single budget (prune).
    #[arg(long)]
    budget: Option<usize>,
    /// Granularity of `prune`; the fine granularity for `pipeline`.
    #[arg(long)]
    granularity: Option<usize>,
    #[arg(long, value_enum)]
    stage2: Option<Stage2Flag>,
    #[arg(long)]
    workers: Option<usize>,
    /// Writes one JSON line per deleted block.
    #[arg(long)]
    audit_log: Option<PathBuf>,
    #[arg(long, conflicts_with = "replay_cassette")]
    record_cassette: Option<PathBuf>,
    #[arg(long)]
    replay_cassette: Option<PathBuf>,
    /// Omit wall-clock timings so output is reproducible.
    #[arg(long)]
    no_timings: bool,
    /// Writes each record's block tree as a JSON array per line.
    #[arg(long)]
    dump_blocks: Option<PathBuf>,
    /// Output directory of `fetch`; record URLs are read from there.
    #[arg(long)]
    fetched: Option<PathBuf>,
}

#[derive(Args)]
struct FetchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// One URL per line, or JSONL records with `urls`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long, default_value = "-")]
    input: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn main() -> ExitCode {
    ExitCode::from(exit_code(Cli::parse()))
}

fn exit_code(cli: Cli) -> u8 {
    let res = match cli.command {
        Command::Clean(a) => run(a, Verb::Clean),
        Command::Prune(a) => run(a, Verb::Prune),
        Command::Pipeline(a) => run(a, Verb::Pipeline),
        Command::Fetch(a) => fetch_cmd(a),
        Command::Stats(a) => stats_cmd(a),
    };
    match res {
        Ok(()) => 0,
        Err(Failure::Config(m)) => {
            eprintln!("blockprune: {m}");
            2
        }
        Err(Failure::Run(m)) => {
            eprintln!("blockprune: {m}");
            1
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<PruneConfig, Failure> {
    match path {
        Some(p) => PruneConfig::load(p).map_err(|e| Failure::Config(e.to_string())),
        None => {
            let mut cfg = PruneConfig::default();
            cfg.apply_env(|k| std::env::var(k).ok());
            Ok(cfg)
        }
    }
}

fn writer(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn reader(input: &str) -> io::Result<Box<dyn BufRead>> {
    Ok(if input == "-" {
        Box::new(BufReader::new(io::stdin().lock()))
    } else {
        Box::new(BufReader::new(File::open(input)?))
    })
}

#[derive(PartialEq)]
enum Verb {
    Clean,
    Prune,
    Pipeline,
}

fn is_html(path: &str) -> bool {
    let lower = path.to_ascii_lowercase();
    lower.ends_with(".html") || lower.ends_with(".htm")
}

fn run(a: RunArgs, verb: Verb) -> Result<(), Failure> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    if let Some(s) = a.stage2 {
        cfg.stage2 = match s {
            Stage2Flag::Gen => Stage2::Generative,
            Stage2Flag::Off => Stage2::Off,
        };
    }
    let mode = match verb {
        Verb::Clean => Mode::Clean,
        Verb::Prune => Mode::Prune {
            granularity: a.granularity.unwrap_or(cfg.coarse_granularity),
            budget: a.budget.unwrap_or(cfg.intermediate_budget),
        },
        Verb::Pipeline => {
            if let Some(g) = a.granularity {
                cfg.fine_granularity = g;
            }
            if let Some(b) = a.budget {
                cfg.final_budget = b;
                cfg.intermediate_budget = cfg.intermediate_budget.max(b);
            }
            Mode::Pipeline
        }
    };
    if let Mode::Prune {
        granularity,
        budget,
    } = mode
    {
        if granularity == 0 || budget == 0 {
            return Err(Failure::Config(
                "--granularity and --budget must be at least 1".into(),
            ));
        }
    }
    let offline = a.replay_cassette.is_some() || verb == Verb::Clean;
    cfg.validate(offline)
        .map_err(|e| Failure::Config(e.to_string()))?;

    let cassette = match (&a.record_cassette, &a.replay_cassette) {
        (Some(_), _) => CassetteMode::Record(Arc::new(Cassette::new())),
        (_, Some(p)) => CassetteMode::Replay(Arc::new(Cassette::load(p).map_err(Failure::Config)?)),
        _ => CassetteMode::Off,
    };
    let backends = Backends::from_config(&cfg, &cassette);

    let html_input = is_html(&a.input);
    let (records, base_dir) = if html_input {
        let path = PathBuf::from(&a.input);
        let rec = QueryRecord {
            id: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            query: a.query.clone(),
            htmls: vec![HtmlSource::File { file: path.clone() }],
            urls: None,
        };
        (vec![Ok(rec)], PathBuf::new())
    } else {
        let base = if a.input == "-" {
            PathBuf::from(".")
        } else {
            Path::new(&a.input)
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_default()
        };
        (read_records(reader(&a.input)?)?, base)
    };

    let opts = RunOptions {
        base_dir,
        fetched_dir: a.fetched.clone(),
        audit: a.audit_log.is_some(),
        timings: !a.no_timings,
        dump_blocks: a.dump_blocks.is_some(),
    };
    let outputs = run_pipeline(records, &cfg, &mode, &backends, &opts);

    let mut out = writer(a.output.as_deref())?;
    if html_input {
        let r = &outputs[0].result;
        if let Some(html) = &r.pruned_html {
            writeln!(out, "{html}")?;
        }
    } else {
        for o in &outputs {
            serde_json::to_writer(&mut out, &o.result).map_err(io::Error::from)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    if let Some(p) = &a.audit_log {
        let mut w = BufWriter::new(File::create(p)?);
        write_audit(&mut w, outputs.iter().flat_map(|o| &o.audit))?;
        w.flush()?;
    }
    if let Some(p) = &a.dump_blocks {
        let mut w = BufWriter::new(File::create(p)?);
        for o in &outputs {
            serde_json::to_writer(&mut w, &o.blocks).map_err(io::Error::from)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    if let (Some(p), CassetteMode::Record(c)) = (&a.record_cassette, &cassette) {
        c.save(p)?;
    }

    let failed = outputs.iter().filter(|o| !o.result.ok).count();
    for o in outputs.iter().filter(|o| !o.result.ok) {
        eprintln!(
            "blockprune: record {}: {}",
            o.result.id,
            o.result.error.as_deref().unwrap_or("failed")
        );
    }
    if !outputs.is_empty() && failed == outputs.len() {
        return Err(Failure::Run(format!("all {failed} records failed")));
    }
    Ok(())
}

fn fetch_cmd(a: FetchArgs) -> Result<(), Failure> {
    let cfg = load_config(a.config.as_deref())?;
    let mut text = String::new();
    File::open(&a.input)?.read_to_string(&mut text)?;
    let mut urls = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if line.starts_with('{') {
            let rec: QueryRecord = serde_json::from_str(line)
                .map_err(|e| Failure::Run(format!("malformed record: {e}")))?;
            urls.extend(rec.urls.unwrap_or_default());
        } else {
            urls.push(line.to_string());
        }
    }
    let report = fetch::fetch_urls(&urls, &a.output, cfg.endpoints.timeout())?;
    eprintln!(
        "fetched {}, skipped {}, failed {}",
        report.fetched, report.skipped, report.failed
    );
    if report.all_failed() {
        return Err(Failure::Run("every URL failed".into()));
    }
    Ok(())
}

fn stats_cmd(a: StatsArgs) -> Result<(), Failure> {
    let results = read_results(reader(&a.input)?).map_err(Failure::Run)?;
    let summary = report_stats(&results);
    let mut out = writer(a.output.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &summary).map_err(io::Error::from)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}
