//! Batch orchestration: decode, concatenate, clean and prune each record.
//!
//! Records run on a bounded rayon pool; results come back in input order.
//! A record that fails or panics yields an error result and leaves the
//! others untouched.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use blockprune_core::dom::serialize_set;
use blockprune_core::pruner::prune_with_scores;
use blockprune_core::{
    clean_set, concat_documents, parse_html, two_stage_pipeline, BlockScorer, BlockTree, Budget,
    CharCounter, DocumentSet, Error, GenerativeScorer, HashLogits, LengthCounter, LexicalScorer,
    LogitsProvider, RelevanceScorer, RuleTokenizer, TokenCounter, WordCounter,
};
use rayon::prelude::*;

use crate::audit::AuditEntry;
use crate::cassette::{Cassette, Exchange, HttpExchange, Recording, Replaying};
use crate::config::{BudgetUnit, LogitsSource, PruneConfig, Stage1, Stage2};
use crate::dump::{dump_blocks, DumpBlock};
use crate::embed::{self, EmbeddingClient, Fallback};
use crate::encoding::decode_html;
use crate::records::{GenerativeCalls, Lengths, QueryRecord, RecordLine, RecordResult, Timings};
use crate::remote::{self, RemoteLogits};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Clean only.
    Clean,
    /// One pruning pass with the stage-one scorer.
    Prune { granularity: usize, budget: usize },
    /// Coarse then (optionally) fine pruning, per the config schedule.
    Pipeline,
}

pub enum CassetteMode {
    Off,
    Record(Arc<Cassette>),
    Replay(Arc<Cassette>),
}

/// Transports for the remote scorers; `None` where no endpoint is set.
#[derive(Clone, Default)]
pub struct Backends {
    pub embed: Option<Arc<dyn Exchange>>,
    pub logits: Option<Arc<dyn Exchange>>,
}

impl Backends {
    pub fn from_config(cfg: &PruneConfig, cassette: &CassetteMode) -> Backends {
        let http = |url: &Option<String>| {
            url.as_ref().map(|u| {
                Arc::new(HttpExchange::new(
                    u.clone(),
                    cfg.endpoints.timeout(),
                    cfg.endpoints.retries,
                )) as Arc<dyn Exchange>
            })
        };
        let wrap = |kind: &'static str, live: Option<Arc<dyn Exchange>>| match cassette {
            CassetteMode::Off => live,
            CassetteMode::Record(c) => live.map(|inner| {
                Arc::new(Recording {
                    inner,
                    cassette: c.clone(),
                    kind,
                }) as Arc<dyn Exchange>
            }),
            CassetteMode::Replay(c) => Some(Arc::new(Replaying {
                cassette: c.clone(),
                kind,
            }) as Arc<dyn Exchange>),
        };
        Backends {
            embed: wrap(embed::KIND, http(&cfg.endpoints.embedding)),
            logits: wrap(remote::KIND, http(&cfg.endpoints.logits)),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory that `{"file": ...}` sources are relative to.
    pub base_dir: PathBuf,
    /// Output directory of `fetch`, consulted for record URLs.
    pub fetched_dir: Option<PathBuf>,
    pub audit: bool,
    pub timings: bool,
    pub dump_blocks: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordOutput {
    pub result: RecordResult,
    pub audit: Vec<AuditEntry>,
    pub blocks: Option<Vec<DumpBlock>>,
}

impl RecordOutput {
    fn failed(id: String, error: String) -> RecordOutput {
        RecordOutput {
            result: RecordResult::failed(id, error),
            audit: Vec::new(),
            blocks: None,
        }
    }
}

pub fn run_pipeline(
    records: Vec<RecordLine>,
    cfg: &PruneConfig,
    mode: &Mode,
    backends: &Backends,
    opts: &RunOptions,
) -> Vec<RecordOutput> {
    let one = |line: &RecordLine| match line {
        Err((label, msg)) => RecordOutput::failed(label.clone(), msg.clone()),
        Ok(rec) => {
            match catch_unwind(AssertUnwindSafe(|| process(rec, cfg, mode, backends, opts))) {
                Ok(Ok(out)) => out,
                Ok(Err(msg)) => RecordOutput::failed(rec.id.clone(), msg),
                Err(payload) => {
                    let msg = payload
                        .downcast_ref::<&str>()
                        .map(|s| s.to_string())
                        .or_else(|| payload.downcast_ref::<String>().cloned())
                        .unwrap_or_else(|| "unknown panic".into());
                    RecordOutput::failed(rec.id.clone(), format!("internal error: {msg}"))
                }
            }
        }
    };
    match rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
    {
        Ok(pool) => pool.install(|| records.par_iter().map(one).collect()),
        Err(_) => records.iter().map(one).collect(),
    }
}

enum Stage1Scorer {
    Lexical(LexicalScorer),
    Embed(EmbeddingClient),
    EmbedOrLexical(Fallback<EmbeddingClient, LexicalScorer>),
}

impl Stage1Scorer {
    fn new(cfg: &PruneConfig, backends: &Backends) -> Result<Stage1Scorer, String> {
        Ok(match cfg.stage1 {
            Stage1::Lexical => Stage1Scorer::Lexical(LexicalScorer::default()),
            Stage1::Embedding => {
                let ex = backends
                    .embed
                    .clone()
                    .ok_or("stage one needs an embedding endpoint")?;
                let client = EmbeddingClient::new(ex, cfg.endpoints.batch_size);
                if cfg.fallback_to_lexical {
                    Stage1Scorer::EmbedOrLexical(Fallback::new(client, LexicalScorer::default()))
                } else {
                    Stage1Scorer::Embed(client)
                }
            }
        })
    }

    fn fell_back(&self) -> bool {
        matches!(self, Stage1Scorer::EmbedOrLexical(f) if f.fell_back())
    }
}

impl RelevanceScorer for Stage1Scorer {
    fn score_blocks(&self, query: &str, blocks: &[&str]) -> blockprune_core::Result<Vec<f64>> {
        match self {
            Stage1Scorer::Lexical(s) => s.score_blocks(query, blocks),
            Stage1Scorer::Embed(s) => s.score_blocks(query, blocks),
            Stage1Scorer::EmbedOrLexical(s) => s.score_blocks(query, blocks),
        }
    }
}

type Generative = GenerativeScorer<RuleTokenizer, Box<dyn LogitsProvider>>;

fn generative_scorer(
    cfg: &PruneConfig,
    backends: &Backends,
    session: &str,
) -> Result<Generative, String> {
    let provider: Box<dyn LogitsProvider> = match cfg.generative.provider {
        LogitsSource::Hash => Box::new(HashLogits {
            seed: cfg.generative.seed,
        }),
        LogitsSource::Remote => {
            let ex = backends
                .logits
                .clone()
                .ok_or("stage two needs a logits endpoint")?;
            Box::new(RemoteLogits::new(ex, session))
        }
    };
    Ok(GenerativeScorer::new(RuleTokenizer::new(), provider))
}

fn ms(since: Instant) -> f64 {
    // Rounded to microseconds to keep output short.
    (since.elapsed().as_secs_f64() * 1e6).round() / 1e3
}

fn process(
    rec: &QueryRecord,
    cfg: &PruneConfig,
    mode: &Mode,
    backends: &Backends,
    opts: &RunOptions,
) -> Result<RecordOutput, String> {
    let pages = rec.pages(&opts.base_dir, opts.fetched_dir.as_deref())?;
    let tokenizer = RuleTokenizer::new();
    let token_counter = TokenCounter {
        tokenizer: &tokenizer,
    };
    let counter: &dyn LengthCounter = match cfg.budget_unit {
        BudgetUnit::Words => &WordCounter,
        BudgetUnit::Chars => &CharCounter,
        BudgetUnit::Tokens => &token_counter,
    };

    let started = Instant::now();
    let mut raw = Lengths::default();
    let mut raw_bytes = Lengths::default();
    let mut docs = Vec::new();
    for page in &pages {
        let text = decode_html(&page.bytes, None);
        raw.raw += counter.length(&text);
        raw_bytes.raw += page.bytes.len();
        match parse_html(&text) {
            Ok(doc) => docs.push((page.source.clone(), doc)),
            Err(Error::EmptyDocument) => {}
            Err(e) => return Err(format!("{}: {e}", page.source)),
        }
    }
    if docs.is_empty() {
        return Err("every page of the record is empty".into());
    }
    let set = concat_documents(docs).map_err(|e| e.to_string())?;
    let cleaned = clean_set(set, &cfg.clean_config());
    let clean_ms = ms(started);
    let clean_html = serialize_set(&cleaned);

    let mut result = RecordResult {
        id: rec.id.clone(),
        ok: true,
        unit: counter.unit().to_string(),
        lengths: Lengths {
            clean: counter.length(&clean_html),
            ..raw
        },
        bytes: Lengths {
            clean: clean_html.len(),
            ..raw_bytes
        },
        ..RecordResult::default()
    };
    let mut audit = Vec::new();
    let dump_at = |g: usize, set: &DocumentSet| -> Result<Option<Vec<DumpBlock>>, String> {
        if !opts.dump_blocks {
            return Ok(None);
        }
        let tree = BlockTree::build(set.clone(), g).map_err(|e| e.to_string())?;
        Ok(Some(dump_blocks(&tree)))
    };
    let mut record_audit = |stage: &str, deletions: &[blockprune_core::pruner::Deletion]| {
        audit.extend(
            deletions
                .iter()
                .map(|d| AuditEntry::from_deletion(&rec.id, stage, d)),
        );
    };

    let started = Instant::now();
    let (final_docs, blocks) = match *mode {
        Mode::Clean => {
            let blocks = dump_at(cfg.coarse_granularity, &cleaned)?;
            (cleaned, blocks)
        }
        Mode::Prune {
            granularity,
            budget,
        } => {
            let blocks = dump_at(granularity, &cleaned)?;
            let scorer = Stage1Scorer::new(cfg, backends)?;
            let tree = BlockTree::build(cleaned, granularity).map_err(|e| e.to_string())?;
            let scores = scorer
                .score_tree(&rec.query, &tree)
                .map_err(|e| e.to_string())?;
            let out = prune_with_scores(&tree, &scores, &Budget::new(budget, counter), opts.audit)
                .map_err(|e| e.to_string())?;
            record_audit("prune", &out.audit);
            result.fell_back = scorer.fell_back();
            result.blocks = vec![tree.len()];
            result.lengths.stage1 = Some(out.final_length);
            (out.docs, blocks)
        }
        Mode::Pipeline => {
            let blocks = dump_at(cfg.coarse_granularity, &cleaned)?;
            let stage1 = Stage1Scorer::new(cfg, backends)?;
            let stage2 = match cfg.stage2 {
                Stage2::Off => None,
                Stage2::Generative => Some(generative_scorer(cfg, backends, &rec.id)?),
            };
            let out = two_stage_pipeline(
                cleaned,
                &rec.query,
                &stage1,
                stage2.as_ref().map(|g| g as &dyn BlockScorer),
                &cfg.schedule(),
                counter,
                opts.audit,
            )
            .map_err(|e| e.to_string())?;
            result.fell_back = stage1.fell_back();
            record_audit("stage1", &out.coarse.prune.audit);
            result.blocks.push(out.coarse.blocks);
            result.lengths.stage1 = Some(out.coarse.prune.final_length);
            result.bytes.stage1 = Some(serialize_set(&out.coarse.prune.docs).len());
            if let Some(fine) = &out.fine {
                record_audit("stage2", &fine.prune.audit);
                result.blocks.push(fine.blocks);
                result.lengths.stage2 = Some(fine.prune.final_length);
                result.bytes.stage2 = Some(serialize_set(&fine.prune.docs).len());
            }
            if let Some(stats) = stage2.as_ref().and_then(|g| g.last_stats()) {
                result.generative = Some(GenerativeCalls {
                    calls: stats.calls,
                    nodes: stats.nodes,
                    skipped: stats.skipped,
                });
            }
            (out.into_docs(), blocks)
        }
    };
    let html = serialize_set(&final_docs);
    if let Mode::Prune { .. } = mode {
        result.bytes.stage1 = Some(html.len());
    }
    result.pruned_html = Some(html);
    if opts.timings {
        result.timings = Some(Timings {
            clean_ms,
            prune_ms: (*mode != Mode::Clean).then(|| ms(started)),
        });
    }
    Ok(RecordOutput {
        result,
        audit,
        blocks,
    })
}
