//! The `relscene` command line: curate, fit, generate, eval and config.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use relscene_core::assembly::{export_obj, AssemblyError, SceneDocument};
use relscene_core::config::{ConfigError, EngineConfig};
use relscene_core::curation::{curate, parse_records, parse_scenes, write_records, write_scenes, CurationError, StageReport};
use relscene_core::eval::{scene_metrics, MetricsReport, SceneRow, SkippedScene, DEFAULT_FLOAT_EPS};
use relscene_core::fixtures;
use relscene_core::hierarchy::{parse_hierarchy_str, StatTables};
use relscene_core::pipeline::{generate_scene, scene_id, HierarchySource, SceneInputs};
use relscene_core::predictor::{fit_table, parse_table, write_table, KeyFitReport, PredictorError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_PLACEMENT_ABORT: i32 = 3;

/// Scene documents end in this suffix; `eval` reads only these.
pub const SCENE_SUFFIX: &str = ".scene.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    PlacementAbort(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io { .. } => EXIT_IO,
            CliError::PlacementAbort(_) => EXIT_PLACEMENT_ABORT,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(format!("config: {e}"))
    }
}

impl From<CurationError> for CliError {
    fn from(e: CurationError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<PredictorError> for CliError {
    fn from(e: PredictorError) -> Self {
        match e {
            PredictorError::Io { path, source } => CliError::Io {
                path,
                message: source.to_string(),
            },
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<AssemblyError> for CliError {
    fn from(e: AssemblyError) -> Self {
        match &e {
            AssemblyError::Placement { failure, reason } => {
                let t = &failure.tuple;
                let func = t.functional.as_deref().unwrap_or("-");
                CliError::PlacementAbort(format!(
                    "cannot place tuple (dependent {}, support {}, functional {func}) after {} attempts: {reason}",
                    t.dependent, t.support, failure.attempts
                ))
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "relscene", version, about = "Relation-driven procedural indoor scene synthesis")]
pub struct Cli {
    /// Engine configuration document; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the master seed from the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract relation tuples and co-occurrence statistics from a scene corpus.
    Curate(CurateArgs),
    /// Fit the predictor table from relation tuples.
    Fit(FitArgs),
    /// Generate and assemble scenes.
    Generate(GenerateArgs),
    /// Compute per-scene metrics over a directory of scene documents.
    Eval(EvalArgs),
    /// Inspect or produce configuration and fixture data.
    #[command(subcommand)]
    Config(ConfigCommand),
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    /// Scene corpus, one JSON scene per line.
    pub scenes: PathBuf,
    /// Output relation tuples, one JSON record per line.
    #[arg(long)]
    pub records: PathBuf,
    /// Output co-occurrence statistics.
    #[arg(long)]
    pub stats: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Relation tuples written by `curate`.
    pub records: PathBuf,
    /// Output predictor parameter file.
    #[arg(long)]
    pub params: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["stats", "hierarchy"])))]
pub struct GenerateArgs {
    /// Co-occurrence statistics; hierarchies are grown from the template.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// A fixed hierarchy document used for every scene.
    #[arg(long)]
    pub hierarchy: Option<PathBuf>,
    /// Predictor parameter file written by `fit`.
    #[arg(long)]
    pub params: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the scene count from the configuration.
    #[arg(long)]
    pub scenes: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    /// Accept the first proposal instead of rejection sampling.
    #[arg(long)]
    pub no_rejection: bool,
    /// Skip the gravity refinement.
    #[arg(long)]
    pub no_gravity: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory holding `*.scene.json` documents.
    pub scene_dir: PathBuf,
    /// Report path; defaults to `metrics.json` inside the scene directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Gap above which an object counts as floating.
    #[arg(long, default_value_t = DEFAULT_FLOAT_EPS)]
    pub float_eps: f64,
}

#[derive(Debug, Subcommand)]
pub enum ConfigCommand {
    /// Print the default configuration with every field explicit.
    PrintDefaults,
    /// Validate a configuration document.
    Validate,
    /// Write a synthetic bedroom corpus usable as `curate` input.
    FixtureCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        scenes: usize,
        /// Upper bound on the random lift applied to every object.
        #[arg(long, default_value_t = 0.01)]
        lift_noise: f64,
    },
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Writes through a temporary file in the target directory, then renames,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Loads the configuration (or the defaults) and applies the seed override.
pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> CliResult<EngineConfig> {
    let mut cfg = match path {
        Some(p) => EngineConfig::from_json(&read(p)?)?,
        None => EngineConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = load_config(cli.config.as_deref(), cli.seed)?;
    match cli.command {
        Command::Curate(a) => cmd_curate(&a.scenes, &cfg, &a.records, &a.stats).map(|_| ()),
        Command::Fit(a) => cmd_fit(&a.records, &cfg, &a.params).map(|_| ()),
        Command::Generate(a) => cmd_generate(&a, &cfg).map(|_| ()),
        Command::Eval(a) => cmd_eval(&a.scene_dir, a.out.as_deref(), a.float_eps).map(|_| ()),
        Command::Config(c) => cmd_config(c, &cfg),
    }
}

pub fn print_stage_report(r: &StageReport) {
    println!("scenes in:                  {}", r.scenes_in);
    println!("objects in:                 {}", r.objects_in);
    println!("empty scenes:               {}", r.scenes_empty);
    println!("objects dropped (physical): {}", r.objects_dropped_validation);
    println!("scenes dropped (floor only): {}", r.scenes_dropped_floor_only);
    println!("functional pairs:           {}", r.functional_pairs);
    println!("records out:                {}", r.records_out);
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
}

pub fn cmd_curate(scenes: &Path, cfg: &EngineConfig, out_records: &Path, out_stats: &Path) -> CliResult<StageReport> {
    let corpus = parse_scenes(&read(scenes)?).map_err(|e| CliError::Validation(format!("{}: {e}", scenes.display())))?;
    let curated = curate(&corpus, &cfg.curation)?;
    write_atomic(out_records, &write_records(&curated.records))?;
    write_atomic(out_stats, &curated.stats.to_json())?;
    print_stage_report(&curated.report);
    Ok(curated.report)
}

/// Count-weighted mean of the per-key NLLs over fitted keys.
pub fn overall_mean_nll(reports: &[KeyFitReport]) -> Option<f64> {
    let (sum, n) = reports
        .iter()
        .filter_map(|r| r.mean_nll.map(|v| (v * r.count as f64, r.count)))
        .fold((0.0, 0usize), |(s, n), (v, c)| (s + v, n + c));
    (n > 0).then(|| sum / n as f64)
}

pub fn cmd_fit(records: &Path, cfg: &EngineConfig, out_params: &Path) -> CliResult<Vec<KeyFitReport>> {
    let recs = parse_records(&read(records)?).map_err(|e| CliError::Validation(format!("{}: {e}", records.display())))?;
    let (table, reports) = fit_table(&recs, &cfg.table_fit_options())?;
    write_atomic(out_params, &write_table(&table))?;
    for r in &reports {
        match (&r.mean_nll, &r.skipped) {
            (Some(nll), _) => println!("{}\tcount {}\tmean_nll {nll:.6}", r.key, r.count),
            (None, Some(why)) => eprintln!("warning: skipping {}: {why}", r.key),
            (None, None) => {}
        }
    }
    println!("entries {}", table.len());
    if let Some(nll) = overall_mean_nll(&reports) {
        println!("mean_nll {nll:.6}");
    }
    Ok(reports)
}

pub fn scene_paths(out: &Path, index: u64) -> [PathBuf; 3] {
    let id = scene_id(index);
    [
        out.join(format!("{id}{SCENE_SUFFIX}")),
        out.join(format!("{id}.obj")),
        out.join(format!("{id}.report.json")),
    ]
}

fn write_scene(out: &Path, index: u64, doc: &SceneDocument) -> CliResult<()> {
    let [scene, mesh, report] = scene_paths(out, index);
    write_atomic(&scene, &doc.to_json())?;
    write_atomic(&mesh, &export_obj(&doc.scene()))?;
    let mut rep = serde_json::to_string_pretty(&doc.report).expect("reports always serialize");
    rep.push('\n');
    write_atomic(&report, &rep)
}

/// Generates every scene; returns the number written.
pub fn cmd_generate(args: &GenerateArgs, cfg: &EngineConfig) -> CliResult<usize> {
    let table = parse_table(&read(&args.params)?).map_err(|e| CliError::Validation(format!("{}: {e}", args.params.display())))?;
    let stats;
    let fixed;
    let source = if let Some(p) = &args.hierarchy {
        fixed = parse_hierarchy_str(&read(p)?).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
        for n in fixed.support().nodes().iter().skip(1) {
            if !cfg.taxonomy.contains(&n.category) {
                return Err(CliError::Validation(format!(
                    "{}: node `{}` has category `{}`, which is not in the taxonomy",
                    p.display(),
                    n.id,
                    n.category
                )));
            }
        }
        HierarchySource::Fixed(&fixed)
    } else {
        let p = args.stats.as_ref().expect("clap requires --stats or --hierarchy");
        stats = StatTables::from_json(&read(p)?).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
        HierarchySource::Stats {
            scene_type: &cfg.generation.scene_type,
            templates: &cfg.templates,
            stats: &stats,
            n_max: cfg.generation.n_max,
            k: cfg.generation.expansion_k,
        }
    };
    let mut assembly = cfg.assembly_config(cfg.seed);
    assembly.rejection_enabled &= !args.no_rejection;
    assembly.gravity_enabled &= !args.no_gravity;
    let inputs = SceneInputs {
        source,
        table: &table,
        assets: &cfg.assets,
        boundary: cfg.assembly.boundary,
        assembly,
    };
    let count = args.scenes.unwrap_or(cfg.generation.scene_count);
    if count == 0 {
        return Ok(0);
    }
    create_dir(&args.out)?;

    let work = |i: u64| -> CliResult<()> {
        let (_, doc) = generate_scene(&inputs, cfg.seed, i)?;
        write_scene(&args.out, i, &doc)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.parallel)
        .build()
        .map_err(|e| CliError::Validation(format!("--parallel: {e}")))?;
    let results: Vec<CliResult<()>> = pool.install(|| (0..count as u64).into_par_iter().map(work).collect());

    // Report the lowest failing index so the message does not depend on
    // scheduling.
    let mut written = 0;
    let mut first_err = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(()) => written += 1,
            Err(e) if first_err.is_none() => first_err = Some((i, e)),
            Err(_) => {}
        }
    }
    if let Some((i, e)) = first_err {
        let msg = format!("{}: {e}", scene_id(i as u64));
        return Err(match e {
            CliError::PlacementAbort(_) => CliError::PlacementAbort(msg),
            CliError::Validation(_) => CliError::Validation(msg),
            io => io,
        });
    }
    println!("wrote {written} scenes to {}", args.out.display());
    Ok(written)
}

/// Scene document paths in `dir`, sorted by file name.
pub fn list_scene_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(SCENE_SUFFIX)))
        .collect();
    paths.sort();
    Ok(paths)
}

pub fn cmd_eval(dir: &Path, out: Option<&Path>, float_eps: f64) -> CliResult<MetricsReport> {
    if !(float_eps >= 0.0 && float_eps.is_finite()) {
        return Err(CliError::Validation(format!("--float-eps must be non-negative, got {float_eps}")));
    }
    let paths = list_scene_files(dir)?;
    if paths.is_empty() {
        return Err(CliError::Validation(format!("{}: no *{SCENE_SUFFIX} files", dir.display())));
    }
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for p in &paths {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let name = name.trim_end_matches(SCENE_SUFFIX).to_string();
        let parsed = fs::read_to_string(p)
            .map_err(|e| e.to_string())
            .and_then(|t| SceneDocument::from_json(&t))
            .and_then(|d| scene_metrics(&d.scene(), &d.report, float_eps).map_err(|e| e.to_string()));
        match parsed {
            Ok(metrics) => rows.push(SceneRow { scene: name, metrics }),
            Err(reason) => {
                eprintln!("warning: skipping {}: {reason}", p.display());
                skipped.push(SkippedScene { scene: name, reason });
            }
        }
    }
    let report = MetricsReport::new(rows, skipped);
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| dir.join("metrics.json"));
    write_atomic(&out, &report.to_json())?;
    if let Some(a) = &report.aggregate {
        println!("scenes {} (skipped {})", a.scenes, report.skipped.len());
        println!("collision_rate       {:.4} ± {:.4}", a.collision_rate.mean, a.collision_rate.sd);
        println!("floating_rate        {:.4} ± {:.4}", a.floating_rate.mean, a.floating_rate.sd);
        println!("acceptance_rate      {:.4} ± {:.4}", a.acceptance_rate.mean, a.acceptance_rate.sd);
        println!("resamples_per_object {:.4} ± {:.4}", a.resamples_per_object.mean, a.resamples_per_object.sd);
    } else {
        println!("no readable scenes (skipped {})", report.skipped.len());
    }
    Ok(report)
}

fn cmd_config(c: ConfigCommand, cfg: &EngineConfig) -> CliResult<()> {
    match c {
        ConfigCommand::PrintDefaults => print!("{}", EngineConfig::default().to_json()),
        ConfigCommand::Validate => println!("ok"),
        ConfigCommand::FixtureCorpus { out, scenes, lift_noise } => {
            if !(lift_noise >= 0.0 && lift_noise.is_finite()) {
                return Err(CliError::Validation(format!("--lift-noise must be non-negative, got {lift_noise}")));
            }
            let fx = fixtures::bedroom();
            let raw: Vec<_> = fx.corpus(scenes, cfg.seed, lift_noise).into_iter().map(|s| s.raw).collect();
            write_atomic(&out, &write_scenes(&raw))?;
            println!("wrote {} scenes to {}", raw.len(), out.display());
        }
    }
    Ok(())
}
