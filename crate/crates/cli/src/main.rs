//! `hannot`: build, query, evaluate and serve an annotated image corpus.
//!
//! Exit status is 0 on success, 1 on an operational error and 2 on a usage
//! error. JSON output is the stable contract; text output is for people.

mod meta;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hannot_core::geometry::NormKind;
use hannot_core::image::{describe, describe_bytes, pnm::encode_pgm, EdgeThreshold, ExtractionParams, ImageError};
use hannot_core::retrieval::{
    evaluate_leave_one_out, search, DistanceVariant, EvaluationReport, QueryResponse, RetrievalConfig, RetrievalError,
};
use hannot_core::store::{
    content_hash, fresh_image_id, load_corpus, now_seconds, save_corpus, split_keywords, validate_image_id,
    AnnotationRecord, CorpusFilter, CorpusLayout, ImageEntry, Registration, Store, StoreError,
};
use hannot_core::synth::{self, synthetic_corpus, SynthConfig};
use hannot_service::{router, Service};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hannot", version, about = "Hausdorff-distance image retrieval and semi-automatic annotation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Register and annotate every image in a directory.
    Ingest(IngestArgs),
    /// Rank corpus images by similarity to an image file.
    Query(QueryArgs),
    /// Leave-one-out accuracy of annotation transfer.
    Evaluate(EvaluateArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Write the synthetic shape corpus with .meta sidecars.
    #[command(hide = true)]
    Synth(SynthArgs),
}

#[derive(Args)]
struct CorpusArg {
    /// Corpus directory.
    #[arg(long, env = "HANNOT_CORPUS")]
    corpus: PathBuf,
}

#[derive(Args)]
struct ExtractionArgs {
    /// Longest image side after normalisation.
    #[arg(long)]
    max_dimension: Option<u32>,
    /// `otsu` or a gradient level 0-255.
    #[arg(long)]
    edge_threshold: Option<EdgeThreshold>,
    /// Cap on edge points per descriptor.
    #[arg(long)]
    max_points: Option<usize>,
}

impl ExtractionArgs {
    fn is_set(&self) -> bool {
        self.max_dimension.is_some() || self.edge_threshold.is_some() || self.max_points.is_some()
    }

    fn apply(&self, base: &ExtractionParams) -> ExtractionParams {
        ExtractionParams {
            max_dimension: self.max_dimension.unwrap_or(base.max_dimension),
            edge_threshold: self.edge_threshold.unwrap_or(base.edge_threshold),
            max_points: self.max_points.unwrap_or(base.max_points),
        }
    }
}

#[derive(Args)]
struct RetrievalArgs {
    /// Distance: `mh` (modified Hausdorff) or `h` (Hausdorff).
    #[arg(long)]
    variant: Option<DistanceVariant>,
    /// Point distance: euclidean, manhattan or chebyshev.
    #[arg(long)]
    norm: Option<NormKind>,
    /// Results kept per query.
    #[arg(long)]
    top_k: Option<usize>,
    /// Largest distance at which a result is accepted.
    #[arg(long)]
    threshold: Option<f64>,
}

impl RetrievalArgs {
    fn config(&self) -> Result<RetrievalConfig, CliError> {
        let base = RetrievalConfig::default();
        let config = RetrievalConfig {
            variant: self.variant.unwrap_or(base.variant),
            norm: self.norm.unwrap_or(base.norm),
            top_k: self.top_k.unwrap_or(base.top_k),
            acceptance_threshold: self.threshold.unwrap_or(base.acceptance_threshold),
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Args)]
struct IngestArgs {
    dir: PathBuf,
    #[command(flatten)]
    corpus: CorpusArg,
    #[arg(long)]
    specialty: Option<String>,
    #[arg(long = "class")]
    class_name: Option<String>,
    #[arg(long)]
    sub_class: Option<String>,
    #[arg(long, default_value = "ingest")]
    physician: String,
    /// Comma-separated keyword phrases.
    #[arg(long)]
    keywords: Option<String>,
    #[command(flatten)]
    extraction: ExtractionArgs,
}

#[derive(Args)]
struct QueryArgs {
    image: PathBuf,
    #[command(flatten)]
    corpus: CorpusArg,
    #[arg(long)]
    specialty: String,
    #[arg(long = "class")]
    class_name: Option<String>,
    #[arg(long)]
    sub_class: Option<String>,
    #[command(flatten)]
    retrieval: RetrievalArgs,
    #[command(flatten)]
    extraction: ExtractionArgs,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    corpus: CorpusArg,
    #[command(flatten)]
    retrieval: RetrievalArgs,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    corpus: CorpusArg,
    #[arg(long, default_value = "127.0.0.1:8701")]
    listen: String,
    #[command(flatten)]
    extraction: ExtractionArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = SynthConfig::default().per_class)]
    per_class: usize,
    #[arg(long, default_value_t = SynthConfig::default().seed)]
    seed: u64,
}

#[derive(Debug)]
struct CliError {
    code: &'static str,
    message: String,
}

impl CliError {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

/// Like `println!`, but a closed stdout (e.g. piped into `head`) must not
/// abort a half-finished ingest.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

macro_rules! coded {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::new(e.code(), e.to_string())
            }
        }
    )*};
}
coded!(ImageError, StoreError, RetrievalError);

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(args) => ingest(args),
        Command::Query(args) => query(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Serve(args) => serve(args),
        Command::Synth(args) => write_synth(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn open_corpus(root: &Path) -> Result<Store, CliError> {
    if !CorpusLayout::new(root).exists() {
        return Err(CliError::new("IO_ERROR", format!("no corpus at {}", root.display())));
    }
    Ok(load_corpus(root)?)
}

/// Extraction flags must agree with an existing corpus; descriptors built
/// under other parameters are not comparable.
fn check_params(store: &Store, extraction: &ExtractionArgs) -> Result<(), CliError> {
    let wanted = extraction.apply(store.extraction());
    if extraction.is_set() && &wanted != store.extraction() {
        return Err(CliError::new(
            "INVALID_PARAMS",
            format!(
                "corpus was built with {}; drop the extraction flags or use a new corpus",
                serde_json::to_string(store.extraction()).expect("params serialize")
            ),
        ));
    }
    Ok(())
}

fn open_or_create(root: &Path, extraction: &ExtractionArgs) -> Result<Store, CliError> {
    if CorpusLayout::new(root).exists() {
        let store = load_corpus(root)?;
        check_params(&store, extraction)?;
        Ok(store)
    } else {
        let params = extraction.apply(&ExtractionParams::default());
        params.validate()?;
        Ok(Store::new(params))
    }
}

fn ingest(args: IngestArgs) -> Result<ExitCode, CliError> {
    let root = &args.corpus.corpus;
    let mut store = open_or_create(root, &args.extraction)?;
    let layout = CorpusLayout::new(root);
    let mut files: Vec<PathBuf> = fs::read_dir(&args.dir)
        .map_err(|e| CliError::new("IO_ERROR", format!("cannot read {}: {e}", args.dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .filter(|p| {
            let name = p.file_name().unwrap_or_default().to_string_lossy();
            !name.starts_with('.') && !name.ends_with(".meta")
        })
        .collect();
    files.sort();

    let (mut added, mut errors) = (0usize, 0usize);
    for path in &files {
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        match ingest_file(&mut store, &layout, path, &args) {
            Ok((Registration::Added, id)) => {
                added += 1;
                let points = store.image(&id).map_or(0, |e| e.descriptor.point_count());
                out!("ADDED {name} {id} {points}");
            }
            Ok((Registration::Duplicate(existing), _)) => out!("DUPLICATE {name} {existing}"),
            Err(e) => {
                errors += 1;
                out!("ERROR {name} {e}");
            }
        }
    }
    if added > 0 || !layout.exists() {
        save_corpus(&store, root)?;
    }
    eprintln!("{added} added, {} duplicate, {errors} failed", files.len() - added - errors);
    Ok(if errors == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn ingest_file(
    store: &mut Store,
    layout: &CorpusLayout,
    path: &Path,
    args: &IngestArgs,
) -> Result<(Registration, String), CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::new("IO_ERROR", e.to_string()))?;
    let hash = content_hash(&bytes);
    if let Some(existing) = store.find_by_hash(&hash) {
        return Ok((Registration::Duplicate(existing.image_id.clone()), existing.image_id.clone()));
    }
    let sidecar = meta::sidecar_path(path);
    let meta = match fs::read_to_string(&sidecar) {
        Ok(text) => meta::parse(&text).map_err(|e| CliError::new("INVALID_RECORD", format!("{}: {e}", sidecar.display())))?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => meta::Meta::default(),
        Err(e) => return Err(CliError::new("IO_ERROR", format!("{}: {e}", sidecar.display()))),
    };
    let file_name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
    let image_id = match meta.image_id {
        Some(id) => id,
        None if validate_image_id(&file_name).is_ok() => file_name,
        None => fresh_image_id(&hash),
    };
    let pick = |m: Option<String>, flag: &Option<String>| m.or_else(|| flag.clone()).unwrap_or_default();
    let record = AnnotationRecord {
        image_id: image_id.clone(),
        specialty: pick(meta.specialty, &args.specialty),
        class_name: pick(meta.class_name, &args.class_name),
        sub_class: pick(meta.sub_class, &args.sub_class),
        keywords: split_keywords(&pick(meta.keywords, &args.keywords)),
        physician_id: meta.physician_id.unwrap_or_else(|| args.physician.clone()),
        created_at: now_seconds(),
    };
    let descriptor = describe_bytes(&bytes, store.extraction())?;
    record.validate()?;
    let entry = ImageEntry {
        image_id: image_id.clone(),
        descriptor,
        source_path: path.display().to_string(),
        content_hash: hash.clone(),
    };
    layout.write_blob(&hash, &bytes)?;
    let registration = store.register_image(entry)?;
    store.add_annotation(record)?;
    Ok((registration, image_id))
}

fn query(args: QueryArgs) -> Result<ExitCode, CliError> {
    let store = open_corpus(&args.corpus.corpus)?;
    check_params(&store, &args.extraction)?;
    let config = args.retrieval.config()?;
    let descriptor = describe(&args.image, store.extraction())?;
    let filter = CorpusFilter {
        specialty: args.specialty,
        class_name: args.class_name,
        sub_class: args.sub_class,
    };
    let response = search(&descriptor, &filter, &store, &config)?;
    match args.format {
        Format::Json => out!("{}", serde_json::to_string(&response).expect("response serializes")),
        Format::Text => print_response(&response),
    }
    Ok(ExitCode::SUCCESS)
}

fn print_response(response: &QueryResponse) {
    out!("{:>4}  {:>10}  {:<8}  {:<24}  label", "rank", "distance", "accepted", "image");
    for (i, r) in response.results.iter().enumerate() {
        let label = r
            .annotations
            .last()
            .map(|a| format!("{} / {} / {}", a.specialty, a.class_name, a.sub_class))
            .unwrap_or_default();
        let accepted = if r.accepted { "yes" } else { "no" };
        out!("{:>4}  {:>10.4}  {:<8}  {:<24}  {label}", i + 1, r.distance, accepted, r.image_id);
    }
    if response.votes.is_empty() {
        out!("\nno accepted results, no keyword suggestions");
        return;
    }
    out!("\n{:>8}  keyword", "score");
    for v in &response.votes {
        out!("{:>8.4}  {} ({})", v.score, v.keyword, v.supporters.join(", "));
    }
}

fn evaluate(args: EvaluateArgs) -> Result<ExitCode, CliError> {
    let store = open_corpus(&args.corpus.corpus)?;
    let report = evaluate_leave_one_out(&store, &args.retrieval.config()?)?;
    match args.format {
        Format::Json => out!("{}", serde_json::to_string(&report).expect("report serializes")),
        Format::Text => print_report(&report),
    }
    Ok(ExitCode::SUCCESS)
}

fn print_report(report: &EvaluationReport) {
    out!(
        "variant {}  norm {}  top_k {}  threshold {}",
        report.variant, report.norm, report.top_k, report.acceptance_threshold
    );
    out!("{:<20}  {:<20}  {:>9}  {:>8}", "specialty", "class", "correct", "accuracy");
    for c in &report.classes {
        let ratio = format!("{}/{}", c.correct, c.total);
        out!("{:<20}  {:<20}  {ratio:>9}  {:>7.1}%", c.specialty, c.class_name, c.accuracy);
    }
    let ratio = format!("{}/{}", report.correct, report.total);
    out!("{:<20}  {:<20}  {ratio:>9}  {:>7.1}%", "overall", "", report.accuracy);
    out!("accepted results: {}", report.accepted_results);
}

fn serve(args: ServeArgs) -> Result<ExitCode, CliError> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::new("INTERNAL", e.to_string()))?;
    runtime.block_on(async move {
        // bind before touching the corpus so a busy port changes nothing
        let listener = tokio::net::TcpListener::bind(&args.listen)
            .await
            .map_err(|e| CliError::new("IO_ERROR", format!("cannot listen on {}: {e}", args.listen)))?;
        let root = &args.corpus.corpus;
        let store = open_or_create(root, &args.extraction)?;
        if !CorpusLayout::new(root).exists() {
            save_corpus(&store, root)?;
        }
        let service = Service::with_store(CorpusLayout::new(root), store);
        eprintln!("serving {} on http://{}", root.display(), listener.local_addr().map_err(|e| CliError::new("IO_ERROR", e.to_string()))?);
        axum::serve(listener, router(service.clone()))
            .with_graceful_shutdown(shutdown_signal())
            .await
            .map_err(|e| CliError::new("IO_ERROR", e.to_string()))?;
        if service.flush_if_dirty()? {
            eprintln!("flushed pending changes");
        }
        Ok(ExitCode::SUCCESS)
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}

fn write_synth(args: SynthArgs) -> Result<ExitCode, CliError> {
    let io = |e: std::io::Error| CliError::new("IO_ERROR", e.to_string());
    fs::create_dir_all(&args.out).map_err(io)?;
    let config = SynthConfig {
        per_class: args.per_class,
        seed: args.seed,
        ..SynthConfig::default()
    };
    let images = synthetic_corpus(&config);
    for img in &images {
        let path = args.out.join(&img.file_name);
        fs::write(&path, encode_pgm(&img.image)).map_err(io)?;
        let sidecar = meta::Meta {
            specialty: Some(synth::SPECIALTY.to_owned()),
            class_name: Some(img.shape.class_name().to_owned()),
            sub_class: Some(img.shape.sub_class().to_owned()),
            physician_id: Some("synth".to_owned()),
            keywords: Some(img.shape.keywords().join(", ")),
            ..Default::default()
        };
        fs::write(meta::sidecar_path(&path), meta::render(&sidecar)).map_err(io)?;
    }
    eprintln!("wrote {} images to {}", images.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}
