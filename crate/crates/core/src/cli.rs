//! Command-line surface: one binary with subcommands covering the whole
//! pipeline (split, stats, rerank, evaluate, synth, report).
//!
//! Every command that writes artifacts writes them into `--out DIR` plus a
//! `manifest.json` recording the command, input paths with SHA-256 hashes,
//! parameters, tool version, and wall-clock duration. The manifest is
//! written last; on failure all files written so far are removed so a
//! non-zero exit never leaves partial outputs behind. Note the manifest's
//! duration field is wall-clock and thus varies across reruns — byte-level
//! reproducibility comparisons should exclude `manifest.json`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::baselines::{cl_rerank, or_rerank, pf_rerank, CalibrationParams};
use crate::ingest::{self, RatingsSchema, SplitConfig};
use crate::metrics;
use crate::moregin;
use crate::report::{render_table, ApproachMetrics, EvaluationReport};
use crate::stats;
use crate::synth::{self, SynthConfig};
use crate::types::{Interactions, RerankParams};
use crate::{Error, Result};

/// Re-ranking and evaluation of top-k recommendation lists under provider
/// visibility quotas and per-user genre calibration.
#[derive(Parser, Debug)]
#[command(name = "moregin", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split a ratings file into train/test by per-user time order.
    Split(SplitArgs),
    /// Compute continent representation, per-user genre propensity, and the
    /// genre x continent rating-mass matrix from a training split.
    Stats(StatsArgs),
    /// Re-rank candidate lists with one of the four approaches.
    Rerank(RerankArgs),
    /// Score one or more re-ranked list files against a train/test split.
    Evaluate(EvaluateArgs),
    /// Generate a seeded synthetic dataset.
    Synth(SynthArgs),
    /// Render a stored evaluation report as an aligned table.
    Report(ReportArgs),
}

fn parse_fraction(raw: &str) -> std::result::Result<f64, String> {
    let value: f64 = raw.parse().map_err(|_| format!("'{raw}' is not a number"))?;
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(format!("fraction must lie strictly between 0 and 1, got {raw}"))
    }
}

fn parse_lambda(raw: &str) -> std::result::Result<f64, String> {
    let value: f64 = raw.parse().map_err(|_| format!("'{raw}' is not a number"))?;
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(format!("lambda must lie in [0, 1], got {raw}"))
    }
}

/// `NAME=PATH` pair for `evaluate --reclists`.
#[derive(Clone, Debug)]
struct NamedPath {
    name: String,
    path: PathBuf,
}

fn parse_named_path(raw: &str) -> std::result::Result<NamedPath, String> {
    match raw.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok(NamedPath { name: name.to_string(), path: PathBuf::from(path) })
        }
        _ => Err(format!("expected NAME=PATH, got '{raw}'")),
    }
}

#[derive(Args, Debug)]
struct SplitArgs {
    /// Ratings file (user,item,rating,timestamp).
    #[arg(long)]
    ratings: PathBuf,
    /// Per-user fraction of earliest ratings that goes to train.
    #[arg(long, value_parser = parse_fraction, default_value_t = 0.8)]
    fraction: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct StatsArgs {
    /// Training ratings file.
    #[arg(long)]
    train: PathBuf,
    /// Item metadata file (item,genres,continents; multi-values pipe-separated).
    #[arg(long)]
    items: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Approach {
    /// Joint visibility + calibration re-ranker.
    Moregin,
    /// Greedy per-user genre calibration.
    Cl,
    /// Global continent-quota visibility re-ranker.
    Pf,
    /// The recommender's own ranking, truncated to k.
    Or,
}

impl Approach {
    fn name(self) -> &'static str {
        match self {
            Approach::Moregin => "moregin",
            Approach::Cl => "cl",
            Approach::Pf => "pf",
            Approach::Or => "or",
        }
    }
}

#[derive(Args, Debug)]
struct RerankArgs {
    #[arg(long, value_enum)]
    approach: Approach,
    /// Training ratings file.
    #[arg(long)]
    train: PathBuf,
    /// Item metadata file.
    #[arg(long)]
    items: PathBuf,
    /// Candidate lists file (user,item,score,rank).
    #[arg(long)]
    reclists: PathBuf,
    /// Final list length served to each user.
    #[arg(long, default_value_t = 10)]
    topk: usize,
    /// Candidate pool depth considered per user.
    #[arg(long, default_value_t = 1000)]
    topn: usize,
    /// Calibration trade-off (cl only): 0 = pure relevance, 1 = pure calibration.
    #[arg(long, value_parser = parse_lambda, default_value_t = 0.99)]
    lambda: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Training ratings file (statistics baseline).
    #[arg(long)]
    train: PathBuf,
    /// Held-out ratings file (ranking-quality ground truth).
    #[arg(long)]
    test: PathBuf,
    /// Item metadata file.
    #[arg(long)]
    items: PathBuf,
    /// Re-ranked lists to score, as repeatable NAME=PATH pairs.
    #[arg(long = "reclists", value_parser = parse_named_path, required = true)]
    reclists: Vec<NamedPath>,
    /// List length under evaluation.
    #[arg(long, default_value_t = 10)]
    topk: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// JSON file with a full generator config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    items: Option<usize>,
    #[arg(long)]
    ratings_per_user: Option<usize>,
    #[arg(long)]
    multi_label_prob: Option<f64>,
    #[arg(long)]
    score_noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Report JSON produced by `evaluate`.
    #[arg(long)]
    report: PathBuf,
    /// Optional directory for CSV projections of the report.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses arguments, runs the chosen command, and maps errors to exit
/// status 1 with a message on stderr (clap itself exits 2 on usage errors).
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter("MOREGIN_LOG")).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Split(args) => cmd_split(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Rerank(args) => cmd_rerank(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Report(args) => cmd_report(args),
    }
}

/// Output directory whose files are all removed again if the command fails
/// before `commit`.
struct OutputSet {
    dir: PathBuf,
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputSet {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputSet { dir: dir.to_path_buf(), written: Vec::new(), committed: false })
    }

    fn write(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        // Registered before writing so a partial file is cleaned up too.
        self.written.push(path.clone());
        let mut sink = BufWriter::new(File::create(&path)?);
        write(&mut sink)?;
        sink.flush()?;
        Ok(())
    }

    fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.committed {
            for path in &self.written {
                let _ = fs::remove_file(path);
            }
        }
    }
}

/// Provenance record written alongside every command's outputs.
#[derive(Debug, Serialize)]
struct RunManifest {
    command: String,
    /// Input label → path as given on the command line.
    inputs: BTreeMap<String, String>,
    /// Input label → SHA-256 of the file contents.
    input_hashes: BTreeMap<String, String>,
    params: serde_json::Value,
    tool_version: String,
    duration_ms: u64,
}

fn sha256_hex(path: &Path) -> Result<String> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(digest.len() * 2);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

fn manifest(
    command: &str,
    inputs: &[(&str, &Path)],
    params: serde_json::Value,
    started: Instant,
) -> Result<RunManifest> {
    let mut input_paths = BTreeMap::new();
    let mut input_hashes = BTreeMap::new();
    for (label, path) in inputs {
        input_paths.insert(label.to_string(), path.display().to_string());
        input_hashes.insert(label.to_string(), sha256_hex(path)?);
    }
    Ok(RunManifest {
        command: command.to_string(),
        inputs: input_paths,
        input_hashes,
        params,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        duration_ms: started.elapsed().as_millis() as u64,
    })
}

fn write_manifest(outputs: &mut OutputSet, manifest: &RunManifest) -> Result<()> {
    outputs.write("manifest.json", |w| {
        serde_json::to_writer_pretty(&mut *w, manifest)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::invalid(format!("cannot open {}: {e}", path.display())))
}

fn read_ratings(path: &Path) -> Result<(Interactions, ingest::IngestWarnings)> {
    ingest::parse_ratings(open(path)?, &RatingsSchema::default())
}

fn cmd_split(args: SplitArgs) -> Result<()> {
    let started = Instant::now();
    let (interactions, warnings) = read_ratings(&args.ratings)?;
    let split =
        ingest::temporal_split(&interactions, &SplitConfig { train_fraction: args.fraction })?;

    let mut outputs = OutputSet::create(&args.out)?;
    outputs.write("train.csv", |w| ingest::write_ratings(w, &split.train))?;
    outputs.write("test.csv", |w| ingest::write_ratings(w, &split.test))?;
    let manifest = manifest(
        "split",
        &[("ratings", &args.ratings)],
        serde_json::json!({
            "fraction": args.fraction,
            "duplicates_dropped": warnings.duplicates_dropped,
            "short_history_users": split.short_history_users,
            "train_rows": split.train.len(),
            "test_rows": split.test.len(),
        }),
        started,
    )?;
    write_manifest(&mut outputs, &manifest)?;
    outputs.commit();
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let started = Instant::now();
    let (train, _) = read_ratings(&args.train)?;
    let catalog = ingest::parse_item_meta(open(&args.items)?)?;

    let group = stats::representation(&train, &catalog)?;
    let prop = stats::propensity(&train, &catalog)?;
    let matrix = stats::genre_continent_matrix(&prop, &train, &catalog)?;

    let mut outputs = OutputSet::create(&args.out)?;
    outputs.write("representation.csv", |w| stats::write_group_stats(w, &group))?;
    outputs.write("propensity.csv", |w| stats::write_propensity(w, &prop))?;
    outputs.write("genre_continent.csv", |w| stats::write_matrix(w, &matrix))?;
    let manifest = manifest(
        "stats",
        &[("train", &args.train), ("items", &args.items)],
        serde_json::json!({
            "users": prop.n_users(),
            "continents": group.len(),
        }),
        started,
    )?;
    write_manifest(&mut outputs, &manifest)?;
    outputs.commit();
    Ok(())
}

fn cmd_rerank(args: RerankArgs) -> Result<()> {
    let started = Instant::now();
    let params = RerankParams::new(args.topk, args.topn)?;
    let (train, _) = read_ratings(&args.train)?;
    let catalog = ingest::parse_item_meta(open(&args.items)?)?;
    let recs = ingest::parse_reclists(open(&args.reclists)?)?;

    let group = stats::representation(&train, &catalog)?;
    let prop = stats::propensity(&train, &catalog)?;

    let mut audit = None;
    let mut warnings = serde_json::json!({});
    let lists = match args.approach {
        Approach::Or => or_rerank(&recs, args.topk)?,
        Approach::Cl => {
            let cl_params =
                CalibrationParams { lambda: args.lambda, topk: args.topk, ..Default::default() };
            cl_rerank(&recs.truncated(args.topn), &catalog, &prop, &cl_params)?
        }
        Approach::Pf => pf_rerank(&recs, &catalog, &group, &params)?,
        Approach::Moregin => {
            let outcome = moregin::rerank_with_audit(&recs, &catalog, &group, &prop, &params)?;
            warnings = serde_json::json!({
                "cold_start_users": outcome.cold_start_users,
                "underfull_users": outcome.underfull_users,
            });
            audit = Some(outcome.audit);
            outcome.lists
        }
    };

    let mut outputs = OutputSet::create(&args.out)?;
    outputs.write("reranked.csv", |w| ingest::write_reclists(w, &lists))?;
    if let Some(audit) = &audit {
        outputs.write("audit.csv", |w| moregin::write_audit(w, audit))?;
    }
    let manifest = manifest(
        "rerank",
        &[("train", &args.train), ("items", &args.items), ("reclists", &args.reclists)],
        serde_json::json!({
            "approach": args.approach.name(),
            "topk": args.topk,
            "topn": args.topn,
            "lambda": args.lambda,
            "warnings": warnings,
        }),
        started,
    )?;
    write_manifest(&mut outputs, &manifest)?;
    outputs.commit();
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let started = Instant::now();
    if args.topk == 0 {
        return Err(Error::invalid("topk must be at least 1"));
    }
    let (train, _) = read_ratings(&args.train)?;
    let (test, _) = read_ratings(&args.test)?;
    let catalog = ingest::parse_item_meta(open(&args.items)?)?;
    let group = stats::representation(&train, &catalog)?;
    let prop = stats::propensity(&train, &catalog)?;

    let mut approaches = Vec::new();
    for named in &args.reclists {
        // Lenient: re-ranked lists (calibration in particular) may place a
        // lower score above a higher one on purpose.
        let (lists, inversions) = ingest::parse_reclists_lenient(open(&named.path)?)?;
        if inversions > 0 {
            log::info!("{}: {inversions} score inversions in re-ranked input", named.name);
        }
        let at_k = lists.truncated(args.topk);
        let visibility = metrics::disparate_visibility(&at_k, &catalog, &group)?;
        let calibration = metrics::miscalibration(&at_k, &catalog, &prop)?;
        let accuracy = metrics::ndcg(&at_k, &test, args.topk)?;
        let accuracy = (accuracy.evaluated_users > 0).then_some(accuracy);
        if accuracy.is_none() {
            log::warn!("{}: no user has held-out items; ranking quality not evaluated", named.name);
        }
        approaches.push(ApproachMetrics {
            name: named.name.clone(),
            visibility,
            calibration,
            accuracy,
        });
    }

    let mut report = EvaluationReport { topk: args.topk, approaches };
    report.canonicalize();

    let mut inputs: Vec<(&str, &Path)> =
        vec![("train", &args.train), ("test", &args.test), ("items", &args.items)];
    let labels: Vec<String> =
        args.reclists.iter().map(|n| format!("reclists:{}", n.name)).collect();
    for (named, label) in args.reclists.iter().zip(&labels) {
        inputs.push((label, &named.path));
    }

    let mut outputs = OutputSet::create(&args.out)?;
    outputs.write("report.json", |w| report.write_json(w))?;
    outputs.write("report.csv", |w| report.write_summary_csv(w))?;
    outputs.write("visibility.csv", |w| report.write_visibility_csv(w))?;
    let manifest =
        manifest("evaluate", &inputs, serde_json::json!({ "topk": args.topk }), started)?;
    write_manifest(&mut outputs, &manifest)?;
    outputs.commit();
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let started = Instant::now();
    let mut config = match &args.config {
        Some(path) => serde_json::from_reader::<_, SynthConfig>(open(path)?)?,
        None => SynthConfig::default(),
    };
    if let Some(users) = args.users {
        config.n_users = users;
    }
    if let Some(items) = args.items {
        config.n_items = items;
    }
    if let Some(rpu) = args.ratings_per_user {
        config.ratings_per_user = rpu;
    }
    if let Some(p) = args.multi_label_prob {
        config.multi_label_prob = p;
    }
    if let Some(noise) = args.score_noise {
        config.score_noise = noise;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }

    let (catalog, interactions, reclists) = synth::generate(&config)?;

    let mut outputs = OutputSet::create(&args.out)?;
    outputs.write("ratings.csv", |w| ingest::write_ratings(w, &interactions))?;
    outputs.write("items.csv", |w| ingest::write_item_meta(w, &catalog))?;
    outputs.write("reclists.csv", |w| ingest::write_reclists(w, &reclists))?;
    let inputs: Vec<(&str, &Path)> = match &args.config {
        Some(path) => vec![("config", path)],
        None => Vec::new(),
    };
    let manifest = manifest("synth", &inputs, serde_json::to_value(&config)?, started)?;
    write_manifest(&mut outputs, &manifest)?;
    outputs.commit();
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let started = Instant::now();
    let value: serde_json::Value = serde_json::from_reader(open(&args.report)?)?;
    let table = render_table(&value)?;
    print!("{table}");

    if let Some(dir) = &args.out {
        let mut outputs = OutputSet::create(dir)?;
        outputs.write("report.txt", |w| {
            w.write_all(table.as_bytes())?;
            Ok(())
        })?;
        let manifest =
            manifest("report", &[("report", &args.report)], serde_json::json!({}), started)?;
        write_manifest(&mut outputs, &manifest)?;
        outputs.commit();
    }
    Ok(())
}
