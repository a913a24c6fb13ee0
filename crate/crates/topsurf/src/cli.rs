// SPDX-License-Identifier: Apache-2.0

//! Command-line interface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use topsurf_core::eval::{Denominator, ProtocolOptions};
use topsurf_core::query::{region_query, whole_image_spec, NegativeMode, Polarity, Rect};
use topsurf_core::vocabulary::Dictionary;

use crate::config::EngineConfig;
use crate::error::{exit, Error, Result};
use crate::evaluate::{default_categories, evaluate, write_run_dir, EvaluateRequest, Protocol};
use crate::formats::{dictionary_to_json, read_dictionary, write_atomic, write_dictionary};
use crate::pipeline::{self, IndexInput, TagSource};
use crate::server::{self, QueryHit, QueryResponse};
use crate::store::{IndexStore, Layout};

#[derive(Debug, Parser)]
#[command(name = "topsurf", version, about = "Visual-word image retrieval")]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// More logging; repeat for debug output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect interest points in every image of a directory.
    Extract(ExtractArgs),
    /// Cluster extracted descriptors into a dictionary.
    BuildDict(BuildDictArgs),
    /// Encode images and add them to an index.
    Index(IndexArgs),
    /// Run one query against an index.
    Query(QueryArgs),
    /// Run an evaluation protocol and write a report directory.
    Evaluate(EvaluateArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct DetectorArgs {
    #[arg(long)]
    pub max_points: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub upright: bool,
    /// Keep a seeded random sample of the candidates instead of the strongest.
    #[arg(long)]
    pub random_sample: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub detector: DetectorArgs,
}

#[derive(Debug, Args)]
pub struct BuildDictArgs {
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub nn_count: Option<usize>,
    #[arg(long)]
    pub trees: Option<usize>,
    /// Leaf checks per search; 0 searches exhaustively.
    #[arg(long)]
    pub checks: Option<usize>,
    /// Sample initial centroids uniformly instead of k-means++.
    #[arg(long)]
    pub uniform_seeding: bool,
    /// Also write a JSON export.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub dict: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Images to extract and index.
    #[arg(long, conflicts_with = "points")]
    pub images: Option<PathBuf>,
    /// Point files from `extract` to index.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// `image_id TAB tag` lines.
    #[arg(long, conflicts_with = "tags_from_dirs")]
    pub tags: Option<PathBuf>,
    /// Tag each image with its top-level directory.
    #[arg(long)]
    pub tags_from_dirs: bool,
    /// Single-file postings for a new index.
    #[arg(long)]
    pub compact: bool,
    #[command(flatten)]
    pub detector: DetectorArgs,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub dict: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub source: String,
    /// Positive rectangle `x0,y0,x1,y1`; repeatable. Without rectangles the
    /// whole image is the selection.
    #[arg(long, value_parser = parse_rect)]
    pub positive: Vec<[f32; 4]>,
    /// Negative rectangle `x0,y0,x1,y1`; repeatable.
    #[arg(long, value_parser = parse_rect)]
    pub negative: Vec<[f32; 4]>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub limit: Option<usize>,
    /// Drop images containing any negative word.
    #[arg(long)]
    pub hard_negatives: bool,
    /// Allow the source image in the results.
    #[arg(long)]
    pub include_source: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DenominatorArg {
    /// min(R, N)
    Min,
    /// R
    Relevant,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub dict: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "whole-image")]
    pub protocol: Protocol,
    /// Comma-separated categories for the whole-image protocol.
    #[arg(long, value_delimiter = ',')]
    pub categories: Vec<String>,
    #[arg(long, default_value_t = topsurf_core::eval::DEFAULT_CUTOFF)]
    pub cutoff: usize,
    #[arg(long, value_enum, default_value = "min")]
    pub denominator: DenominatorArg,
    /// JSON array of region queries.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Relevant image ids, one per line, for the region protocol.
    #[arg(long)]
    pub relevant: Option<PathBuf>,
    /// Run directory for report.tsv, report.txt and config.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub dict: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub bind: Option<String>,
    /// Directory of static UI assets served under `/`.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
}

fn parse_rect(s: &str) -> std::result::Result<[f32; 4], String> {
    let v: Vec<f32> = s
        .split(',')
        .map(|p| p.trim().parse::<f32>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    <[f32; 4]>::try_from(v).map_err(|_| "expected x0,y0,x1,y1".to_string())
}

impl DetectorArgs {
    fn apply(&self, config: &mut EngineConfig) {
        if let Some(n) = self.max_points {
            config.detector.max_points = n;
        }
        if let Some(t) = self.threshold {
            config.detector.threshold = t;
        }
        config.detector.upright |= self.upright;
        config.detector.random_sample |= self.random_sample;
    }
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable output"));
}

fn override_path(slot: &mut PathBuf, flag: &Option<PathBuf>) {
    if let Some(p) = flag {
        *slot = p.clone();
    }
}

/// Loads the configured dictionary and its checksum.
fn load_dictionary(config: &EngineConfig) -> Result<(Dictionary, String)> {
    read_dictionary(&config.dictionary)
}

/// Opens the index read-only and checks it against the dictionary.
fn open_checked(config: &EngineConfig) -> Result<IndexStore> {
    let (_, checksum) = load_dictionary(config)?;
    let store = IndexStore::open(&config.index_root)?;
    store.check_dictionary(&checksum)?;
    Ok(store)
}

#[derive(Serialize)]
struct BuildSummary<'a> {
    dictionary: &'a Path,
    size: usize,
    iterations_run: usize,
    distortion: f64,
    checksum: String,
}

pub fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => EngineConfig::load(path)?,
        None => EngineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }

    match cli.command {
        Command::Extract(args) => {
            override_path(&mut config.image_root, &args.images);
            args.detector.apply(&mut config);
            let summary = pipeline::extract_dir(&config.image_root, &args.out, &config.detector_config())?;
            print_json(&summary);
        }
        Command::BuildDict(args) => {
            override_path(&mut config.dictionary, &args.out);
            let b = &mut config.build;
            b.k = args.k.unwrap_or(b.k);
            b.iterations = args.iterations.unwrap_or(b.iterations);
            b.nn_count = args.nn_count.unwrap_or(b.nn_count);
            b.uniform_seeding |= args.uniform_seeding;
            config.ann.trees = args.trees.unwrap_or(config.ann.trees);
            config.ann.checks = args.checks.unwrap_or(config.ann.checks);
            let (dict, report) = pipeline::build_from_points(&args.points, &config.build_params())?;
            let checksum = write_dictionary(&config.dictionary, &dict)?;
            if let Some(path) = &args.json {
                let mut text = serde_json::to_string_pretty(&dictionary_to_json(&dict)).expect("serializable");
                text.push('\n');
                write_atomic(path, text.as_bytes())?;
            }
            print_json(&BuildSummary {
                dictionary: &config.dictionary,
                size: dict.size(),
                iterations_run: report.iterations_run,
                distortion: report.distortion.last().copied().unwrap_or(0.0),
                checksum,
            });
        }
        Command::Index(args) => {
            override_path(&mut config.dictionary, &args.dict);
            override_path(&mut config.index_root, &args.index);
            args.detector.apply(&mut config);
            if args.compact {
                config.layout = Layout::Compact;
            }
            let (dict, checksum) = load_dictionary(&config)?;
            let input = match (&args.images, &args.points) {
                (_, Some(dir)) => IndexInput::Points { dir: dir.clone() },
                (Some(dir), None) => IndexInput::Images { dir: dir.clone(), detector: config.detector_config() },
                (None, None) => {
                    IndexInput::Images { dir: config.image_root.clone(), detector: config.detector_config() }
                }
            };
            let tags = match (&args.tags, args.tags_from_dirs) {
                (Some(path), _) => TagSource::Map(pipeline::read_tags_file(path)?),
                (None, true) => TagSource::Directories,
                (None, false) => TagSource::None,
            };
            let mut store = IndexStore::open_writer(&config.index_root, &checksum, dict.size() as u32, config.layout)?;
            let summary = pipeline::index_into(&mut store, &dict, &input, &tags)?;
            print_json(&summary);
        }
        Command::Query(args) => {
            override_path(&mut config.dictionary, &args.dict);
            override_path(&mut config.index_root, &args.index);
            let store = open_checked(&config)?;
            let rects: Vec<Rect> = args
                .positive
                .iter()
                .map(|r| (r, Polarity::Positive))
                .chain(args.negative.iter().map(|r| (r, Polarity::Negative)))
                .map(|(r, p)| Rect::new(r[0], r[1], r[2], r[3], p))
                .collect::<topsurf_core::Result<_>>()?;
            let mut spec = if args.positive.is_empty() {
                let mut s = whole_image_spec(&args.source, &store)?;
                s.rects.extend(rects);
                s
            } else {
                topsurf_core::QuerySpec::new(args.source.clone(), rects)
            };
            spec = spec
                .with_negative_weight(args.lambda.unwrap_or(config.query.lambda))
                .with_limit(args.limit.unwrap_or(config.query.limit))
                .with_exclude_source(!args.include_source);
            if args.hard_negatives {
                spec = spec.with_negative_mode(NegativeMode::Hard);
            }
            let results = region_query(&spec, &store)?;
            print_json(&QueryResponse {
                source_image: args.source,
                results: results
                    .into_iter()
                    .map(|r| QueryHit {
                        matched_positive: r.matched_positive.len(),
                        matched_negative: r.matched_negative.len(),
                        positive_words: r.matched_positive.into_iter().collect(),
                        negative_words: r.matched_negative.into_iter().collect(),
                        image_id: r.image_id,
                        score: r.score,
                        similarity: r.similarity,
                    })
                    .collect(),
            });
        }
        Command::Evaluate(args) => {
            override_path(&mut config.dictionary, &args.dict);
            override_path(&mut config.index_root, &args.index);
            let store = open_checked(&config)?;
            let categories =
                if args.categories.is_empty() { default_categories(&store) } else { args.categories.clone() };
            let options = ProtocolOptions {
                cutoff: args.cutoff,
                denominator: match args.denominator {
                    DenominatorArg::Min => Denominator::Cutoff,
                    DenominatorArg::Relevant => Denominator::Relevant,
                },
            };
            let req = EvaluateRequest {
                protocol: args.protocol,
                categories: categories.clone(),
                options,
                queries: args.queries.clone(),
                relevant: args.relevant.clone(),
            };
            let report = evaluate(&store, &req)?;
            let record = serde_json::json!({
                "protocol": args.protocol,
                "categories": categories,
                "options": options,
                "relevance_rule": report.relevance_rule,
                "queries": args.queries,
                "relevant": args.relevant,
                "dictionary_checksum": store.manifest().dictionary_checksum,
                "index_images": store.manifest().images.len(),
                "engine": config,
            });
            write_run_dir(&args.out, &report, &record)?;
            print!("{}", report.to_table());
        }
        Command::Serve(args) => {
            override_path(&mut config.dictionary, &args.dict);
            override_path(&mut config.index_root, &args.index);
            override_path(&mut config.image_root, &args.images);
            if let Some(b) = &args.bind {
                config.bind = b.clone();
            }
            if args.static_dir.is_some() {
                config.static_dir = args.static_dir.clone();
            }
            let (_, checksum) = load_dictionary(&config)?;
            let state =
                server::load_state(&config.index_root, &checksum, config.image_root.clone(), config.query.clone())?;
            let app = server::router(state, config.static_dir.clone());
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io(&config.bind, e))?;
            runtime.block_on(server::serve(&config.bind, app))?;
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
