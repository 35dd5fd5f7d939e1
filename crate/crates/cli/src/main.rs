//! `rlo`: command-line front end for importing, curating, annotating and
//! exporting collections. Every command is a thin adapter over the library.
//!
//! Exit codes: 0 ok, 1 domain error, 2 usage error, 3 I/O error.

use std::fmt::Write as _;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rlo_core::curation::{add_annotation, apply_command, CurationError, DocCommand};
use rlo_core::export::{export_package, validate_package, Detail, ExportError, ExportProfile, PackageFormat};
use rlo_core::import::{import, ImportError, ImportParams, ImportReport};
use rlo_core::model::{
    to_canonical, validate_collection, ElementKind, ElementPath, InstancePath, LinkKind, LinkTarget, Mcq,
    Payload, Region, ResourceId, ValidationReport,
};
use rlo_core::ops::{apply_script, parse_script, OpReport, ScriptError};
use rlo_core::store::{self, Bundle, StoreError, StoreLock};

#[derive(Debug, Parser)]
#[command(name = "rlo", version, about = "Build reusable learning objects from case collections")]
struct Cli {
    /// Print the canonical JSON encoding of the result instead of text.
    #[arg(long, global = true)]
    porcelain: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Import records through a plugin into a collection store.
    Import(ImportArgs),
    /// Inspect or restructure the schema.
    #[command(subcommand)]
    Schema(SchemaCommand),
    /// Edit one document.
    #[command(subcommand)]
    Doc(DocArgs),
    /// Add a rectangle comment to an image resource.
    Annotate {
        store: PathBuf,
        resource_id: String,
        /// Region as x,y,w,h in image pixels.
        #[arg(long)]
        rect: Region,
        #[arg(long)]
        comment: String,
        #[arg(long, default_value = "")]
        author: String,
    },
    /// Export a collection as an IMS content package or a SCORM 1.2 package.
    Export(ExportArgs),
    /// Validate a collection store or an exported package.
    Validate { target: PathBuf },
    /// Run the HTTP API.
    Serve {
        #[arg(long, env = "RLO_BIND", default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long, env = "RLO_STORAGE", default_value = "storage")]
        storage: PathBuf,
        /// Fixture mode: default base URL (a directory) for medpix imports.
        #[arg(long, env = "RLO_FIXTURE")]
        fixture: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ImportArgs {
    /// medpix, files, table or package.
    #[arg(long)]
    plugin: String,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    path: Option<String>,
    #[arg(long)]
    max_cases: Option<usize>,
    /// Requests per second against HTTP sources; 0 is unlimited.
    #[arg(long)]
    rate: Option<f64>,
    /// Further plugin parameters.
    #[arg(long = "param", value_name = "KEY=VALUE", value_parser = parse_kv)]
    params: Vec<(String, String)>,
    /// Collection store to create or extend.
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum SchemaCommand {
    /// Print element paths, kinds and multiplicities.
    Show { store: PathBuf },
    /// Apply a curation script, all or nothing.
    Apply {
        store: PathBuf,
        script: PathBuf,
        /// Report per-op results without writing.
        #[arg(long)]
        dry_run: bool,
    },
}

#[derive(Debug, Subcommand)]
enum DocArgs {
    /// Replace the text of an atomic value.
    Set {
        store: PathBuf,
        doc: String,
        path: InstancePath,
        #[arg(required = true, num_args = 1..)]
        value: Vec<String>,
    },
    /// Append a new element; the last path step names its type. Values are
    /// text for atomic types, a resource id for resource references and JSON
    /// for quizzes and composites.
    Insert {
        store: PathBuf,
        doc: String,
        path: InstancePath,
        #[arg(required = true, num_args = 1..)]
        value: Vec<String>,
    },
    /// Add a link under an instance: `doc:<id>`, `ann:<id>` or a URL.
    Link {
        store: PathBuf,
        doc: String,
        path: InstancePath,
        target: String,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DetailArg {
    Full,
    Summary,
}

#[derive(Debug, Args)]
struct ExportArgs {
    store: PathBuf,
    #[arg(long)]
    format: PackageFormat,
    /// Element types to render, comma separated.
    #[arg(long, value_delimiter = ',')]
    select: Vec<ElementPath>,
    #[arg(long, value_enum, default_value = "full")]
    detail: DetailArg,
    /// Element types kept by `--detail summary`, comma separated.
    #[arg(long, value_delimiter = ',')]
    summary: Vec<ElementPath>,
    /// Document ids to export, comma separated.
    #[arg(long, value_delimiter = ',')]
    docs: Vec<String>,
    #[arg(long)]
    quizzes: bool,
    /// Fixed archive timestamp (Unix seconds) for reproducible output.
    #[arg(long)]
    epoch: Option<i64>,
    #[arg(long)]
    title: Option<String>,
    #[arg(short = 'o', long = "out")]
    out: PathBuf,
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))
}

#[derive(Debug)]
enum CliError {
    Domain(String),
    Usage(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Domain(m) | CliError::Usage(m) | CliError::Io(m) => m,
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Locked(_) => CliError::Io(e.to_string()),
            _ if e.is_io() => CliError::Io(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<ImportError> for CliError {
    fn from(e: ImportError) -> Self {
        match e {
            ImportError::UnknownPlugin(_) | ImportError::Param(_) => CliError::Usage(e.to_string()),
            ImportError::Unreachable(_) => CliError::Io(e.to_string()),
            _ => CliError::Domain(format!("{}: {e}", e.rule())),
        }
    }
}

impl From<CurationError> for CliError {
    fn from(e: CurationError) -> Self {
        CliError::Domain(format!("{}: {e}", e.rule()))
    }
}

impl From<ExportError> for CliError {
    fn from(e: ExportError) -> Self {
        CliError::Domain(format!("{}: {e}", e.rule()))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

type Outcome = Result<String, CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command, cli.porcelain) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()) {
                Ok(()) => ExitCode::SUCCESS,
                Err(_) => ExitCode::from(3),
            }
        }
        Err(e) => {
            eprintln!("rlo: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(command: Command, porcelain: bool) -> Outcome {
    match command {
        Command::Import(args) => cmd_import(args, porcelain),
        Command::Schema(SchemaCommand::Show { store }) => cmd_schema_show(&store, porcelain),
        Command::Schema(SchemaCommand::Apply { store, script, dry_run }) => {
            cmd_schema_apply(&store, &script, dry_run, porcelain)
        }
        Command::Doc(args) => cmd_doc(args, porcelain),
        Command::Annotate {
            store,
            resource_id,
            rect,
            comment,
            author,
        } => cmd_annotate(&store, resource_id, rect, &comment, &author, porcelain),
        Command::Export(args) => cmd_export(args, porcelain),
        Command::Validate { target } => cmd_validate(&target, porcelain),
        Command::Serve { bind, storage, fixture } => cmd_serve(bind, storage, fixture),
    }
}

fn canonical<T: Serialize>(value: &T) -> Outcome {
    let bytes = to_canonical(value).map_err(|e| CliError::Domain(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Domain(e.to_string()))
}

/// Loads a store under its lock; the lock lives as long as the returned guard.
fn open(path: &Path) -> Result<(StoreLock, Bundle), CliError> {
    if !path.exists() {
        return Err(CliError::Io(format!("{}: no such collection store", path.display())));
    }
    let lock = StoreLock::acquire(path)?;
    let b = store::load(path)?;
    Ok((lock, b))
}

// --- import ---

fn cmd_import(args: ImportArgs, porcelain: bool) -> Outcome {
    let mut params = ImportParams::new();
    for (k, v) in [("base_url", args.base_url), ("path", args.path)] {
        if let Some(v) = v {
            params = params.with(k, v);
        }
    }
    if let Some(n) = args.max_cases {
        params = params.with("max_cases", n);
    }
    if let Some(r) = args.rate {
        params = params.with("rate", r);
    }
    for (k, v) in &args.params {
        params = params.with(k, v);
    }

    let _lock = StoreLock::acquire(&args.out)?;
    let sink = if args.out.exists() {
        store::load(&args.out)?
    } else {
        Bundle::default()
    };
    params.cursor = if args.out.is_dir() {
        store::read_cursor(&args.out)?
    } else {
        None
    };
    let (next, report) = import(&args.plugin, &params, &sink)?;
    store::save(&args.out, &next)?;
    if args.out.is_dir() {
        store::write_cursor(&args.out, report.cursor.as_ref())?;
    }
    for m in &report.messages {
        eprintln!("rlo: {m}");
    }
    if let Some(why) = &report.interrupted {
        // the partial collection and its cursor are saved; rerun to resume
        return Err(CliError::Io(format!(
            "import interrupted after {} documents: {why}; rerun to resume",
            report.documents + report.auxiliary_documents
        )));
    }
    let report_text = if porcelain {
        canonical(&report)?
    } else {
        import_text(&report, &next)
    };
    let violations = validate_collection(&next.collection);
    if !violations.is_empty() {
        return Err(CliError::Domain(format!("imported collection is invalid:\n{violations}")));
    }
    Ok(report_text)
}

fn import_text(r: &ImportReport, b: &Bundle) -> String {
    let mut s = format!(
        "imported {} documents ({} auxiliary), {} resources, {} skipped, {} errors\n",
        r.documents, r.auxiliary_documents, r.resources, r.skipped, r.errors
    );
    let _ = writeln!(
        s,
        "collection: {} documents, element types: {}",
        b.collection.documents.len(),
        b.collection.schema.type_count()
    );
    s
}

// --- schema ---

#[derive(Serialize)]
struct SchemaOut<'a> {
    version: u64,
    element_types: usize,
    schema: &'a rlo_core::model::Schema,
}

fn cmd_schema_show(path: &Path, porcelain: bool) -> Outcome {
    let (_lock, b) = open(path)?;
    let c = &b.collection;
    if porcelain {
        return canonical(&SchemaOut {
            version: c.version(),
            element_types: c.schema.type_count(),
            schema: &c.schema,
        });
    }
    let mut s = String::new();
    for (p, t) in c.schema.walk() {
        let _ = writeln!(s, "{p}  {}  {}", t.kind.as_str(), t.multiplicity.as_str());
    }
    let _ = writeln!(s, "element types: {}", c.schema.type_count());
    Ok(s)
}

#[derive(Serialize)]
struct ApplyOut<'a> {
    dry_run: bool,
    version: u64,
    element_types: usize,
    reports: &'a [OpReport],
}

fn cmd_schema_apply(path: &Path, script: &Path, dry_run: bool, porcelain: bool) -> Outcome {
    let text = std::fs::read_to_string(script).map_err(io_at(script))?;
    let script = parse_script(&text).map_err(|e| CliError::Domain(format!("parse-error: {e}")))?;
    let (_lock, b) = open(path)?;
    let (c, reports) = match apply_script(&b.collection, &script) {
        Ok(ok) => ok,
        Err(ScriptError::Op {
            index, error, reports, ..
        }) => {
            let mut msg = reports_text(&reports);
            let _ = write!(msg, "{}: op {index} failed: {error}", error.rule());
            if let Some(p) = error.path() {
                let _ = write!(msg, " (at {p})");
            }
            return Err(CliError::Domain(msg));
        }
        Err(e @ ScriptError::InvalidInput(_)) => return Err(CliError::Domain(e.to_string())),
    };
    if !dry_run {
        store::save(path, &Bundle::new(c.clone(), b.blobs))?;
    }
    if porcelain {
        return canonical(&ApplyOut {
            dry_run,
            version: c.version(),
            element_types: c.schema.type_count(),
            reports: &reports,
        });
    }
    let mut s = reports_text(&reports);
    let _ = writeln!(s, "element types: {}", c.schema.type_count());
    if dry_run {
        s.push_str("dry run: nothing written\n");
    }
    Ok(s)
}

fn reports_text(reports: &[OpReport]) -> String {
    let mut s = String::new();
    for r in reports {
        match (&r.error, r.version, r.type_count) {
            (None, Some(v), Some(n)) => {
                let _ = writeln!(s, "[{}] ok  {}  (version {v}, {n} types)", r.index, r.op);
            }
            (e, _, _) => {
                let _ = writeln!(s, "[{}] FAILED  {}  {}", r.index, r.op, e.as_deref().unwrap_or(""));
            }
        }
    }
    s
}

// --- documents ---

/// Builds the library command for a `doc` invocation.
fn doc_command(args: &DocArgs, b: &Bundle) -> Result<DocCommand, CliError> {
    Ok(match args {
        DocArgs::Set { path, value, .. } => DocCommand::Set {
            path: path.clone(),
            text: value.join(" "),
        },
        DocArgs::Insert { path, value, .. } => {
            let (parent, type_path) = split_insert_path(path)?;
            let kind = b
                .collection
                .schema
                .get(&type_path)
                .map(|t| t.kind)
                .ok_or_else(|| CliError::Domain(format!("unknown-path: no element type {type_path}")))?;
            let raw = value.join(" ");
            let json = |what: &str| {
                serde_json::from_str::<serde_json::Value>(&raw)
                    .map_err(|e| CliError::Usage(format!("{what} value must be JSON: {e}")))
            };
            let payload = match kind {
                ElementKind::Atomic => Payload::Text(raw),
                ElementKind::ResourceRef => Payload::Resource(ResourceId(raw)),
                ElementKind::Quiz => Payload::Quiz(
                    serde_json::from_value::<Mcq>(json("quiz")?)
                        .map_err(|e| CliError::Usage(format!("bad quiz: {e}")))?,
                ),
                ElementKind::Composite => Payload::Children(
                    serde_json::from_value(json("composite")?)
                        .map_err(|e| CliError::Usage(format!("bad children: {e}")))?,
                ),
                ElementKind::Link => Payload::Link(link_target(&raw)),
            };
            DocCommand::Insert {
                parent,
                type_path,
                payload,
            }
        }
        DocArgs::Link { path, target, .. } => DocCommand::Link {
            parent: path.clone(),
            target: link_target(target),
        },
    })
}

fn split_insert_path(path: &InstancePath) -> Result<(InstancePath, ElementPath), CliError> {
    let steps = path.steps();
    let Some((last, head)) = steps.split_last() else {
        return Err(CliError::Usage("insert path must name the new element type".into()));
    };
    if last.ordinal != 0 {
        return Err(CliError::Usage(format!("insert path {path} must end without an ordinal")));
    }
    let parent = rlo_core::model::InstancePath(head.to_vec());
    let type_path = parent.element_path().child(last.name.as_str());
    Ok((parent, type_path))
}

fn link_target(s: &str) -> LinkTarget {
    if let Some(id) = s.strip_prefix("doc:") {
        LinkTarget::document(id)
    } else if let Some(id) = s.strip_prefix("ann:") {
        LinkTarget {
            kind: LinkKind::InternalAnnotation,
            value: id.to_string(),
        }
    } else {
        LinkTarget {
            kind: LinkKind::ExternalUrl,
            value: s.to_string(),
        }
    }
}

fn cmd_doc(args: DocArgs, porcelain: bool) -> Outcome {
    let (store_path, doc) = match &args {
        DocArgs::Set { store, doc, .. } | DocArgs::Insert { store, doc, .. } | DocArgs::Link { store, doc, .. } => {
            (store.clone(), doc.clone())
        }
    };
    let (_lock, b) = open(&store_path)?;
    let cmd = doc_command(&args, &b)?;
    let c = apply_command(&b.collection, &doc, &cmd)?;
    let out = if porcelain {
        canonical(&c.documents[&doc])?
    } else {
        format!("{doc}: {} ok\n", doc_verb(&cmd))
    };
    store::save(&store_path, &Bundle::new(c, b.blobs))?;
    Ok(out)
}

fn doc_verb(cmd: &DocCommand) -> String {
    match cmd {
        DocCommand::Set { path, .. } => format!("set {path}"),
        DocCommand::Insert { type_path, .. } => format!("insert {type_path}"),
        DocCommand::Link { parent, .. } => format!("link under {parent}"),
    }
}

// --- annotations ---

#[derive(Serialize)]
struct AnnotateOut<'a> {
    id: &'a str,
}

fn cmd_annotate(path: &Path, resource: String, rect: Region, comment: &str, author: &str, porcelain: bool) -> Outcome {
    let (_lock, b) = open(path)?;
    let (c, id) = add_annotation(&b.collection, &ResourceId(resource), rect, comment, author)?;
    store::save(path, &Bundle::new(c, b.blobs))?;
    if porcelain {
        canonical(&AnnotateOut { id: &id })
    } else {
        Ok(format!("{id}\n"))
    }
}

// --- export ---

fn export_profile(args: &ExportArgs) -> ExportProfile {
    let mut p = ExportProfile::new(args.format);
    p.selection = args.select.clone();
    p.detail = match args.detail {
        DetailArg::Full => Detail::Full,
        DetailArg::Summary => Detail::Summary,
    };
    p.summary_paths = args.summary.clone();
    p.document_filter = (!args.docs.is_empty()).then(|| args.docs.clone());
    p.include_quizzes = args.quizzes;
    p.fixed_epoch = args.epoch;
    if let Some(t) = &args.title {
        p.title = t.clone();
    }
    p
}

#[derive(Serialize)]
struct ExportOut<'a> {
    out: String,
    bytes: usize,
    profile: &'a ExportProfile,
}

fn cmd_export(args: ExportArgs, porcelain: bool) -> Outcome {
    let profile = export_profile(&args);
    let (_lock, b) = open(&args.store)?;
    let bytes = export_package(&b, &profile)?;
    std::fs::write(&args.out, &bytes).map_err(io_at(&args.out))?;
    if porcelain {
        canonical(&ExportOut {
            out: args.out.display().to_string(),
            bytes: bytes.len(),
            profile: &profile,
        })
    } else {
        Ok(format!("wrote {} ({} bytes)\n", args.out.display(), bytes.len()))
    }
}

// --- validation ---

#[derive(Serialize)]
struct ValidateOut<'a> {
    target: &'a str,
    valid: bool,
    violations: &'a ValidationReport,
}

/// Directories and zip stores are validated as collections; any other file
/// as an exported package.
fn cmd_validate(path: &Path, porcelain: bool) -> Outcome {
    let (target, report) = if path.is_dir() {
        let (_lock, b) = open(path)?;
        ("collection", validate_collection(&b.collection))
    } else {
        let bytes = std::fs::read(path).map_err(io_at(path))?;
        match store::from_zip(&bytes) {
            Ok(b) => ("collection", validate_collection(&b.collection)),
            Err(_) => ("package", validate_package(&bytes)),
        }
    };
    let text = if porcelain {
        canonical(&ValidateOut {
            target,
            valid: report.is_empty(),
            violations: &report,
        })?
    } else if report.is_empty() {
        format!("valid {target}\n")
    } else {
        format!("{report}")
    };
    if report.is_empty() {
        Ok(text)
    } else {
        // the report is the result; print it, then fail
        print!("{text}");
        Err(CliError::Domain(format!("{} violations in {target}", report.len())))
    }
}

// --- service ---

fn cmd_serve(bind: SocketAddr, storage: PathBuf, fixture: Option<PathBuf>) -> Outcome {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(rlo_service::serve(bind, rlo_service::Config { storage, fixture }))?;
    Ok(String::new())
}
