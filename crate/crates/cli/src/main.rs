mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use frfpce::study::output::{self, RunTag, ValidationSummary};
use frfpce::study::{
    convergence_study, derive_seed, lhs_sample, mc_sample, moment_errors, reference_moments, validate, SystemModel,
};
use frfpce::surrogate::{FrfSurrogate, FullModel};
use frfpce::{Error, ErrorKind, Result};
use log::{info, warn};
use serde::Serialize;

use config::{Overrides, Resolved, RunConfig};

/// Sparse polynomial chaos surrogates of frequency response functions.
#[derive(Debug, Parser)]
#[command(name = "frfpce", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Experimental design size.
    #[arg(long, global = true)]
    ed_size: Option<usize>,
    /// Size of the Monte Carlo validation sample.
    #[arg(long, global = true)]
    reference_size: Option<usize>,
    /// Damping scale of the six-DOF case.
    #[arg(long, global = true)]
    damping_scale: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the full model at the points of a CSV file.
    Simulate {
        /// Points CSV (default: `points` from the config).
        #[arg(long)]
        points: Option<PathBuf>,
    },
    /// Fit a surrogate on a Latin hypercube design and save the bundle.
    Build,
    /// Predict FRFs with a saved surrogate.
    Predict {
        bundle: PathBuf,
        #[arg(long)]
        points: Option<PathBuf>,
    },
    /// Compare a saved surrogate with the full model on a Monte Carlo sample.
    Validate { bundle: PathBuf },
    /// Surrogate against plain Monte Carlo moment estimators over design sizes.
    Converge,
    /// Build, validate and export every table of a case study.
    CaseStudy {
        /// `2dof` or `6dof` (default: `case` from the config).
        case: Option<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Numeric => 3,
                ErrorKind::Io => 4,
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let cfg = config::load(g.config.as_deref())?;
    let overrides = Overrides {
        seed: g.seed,
        ed_size: g.ed_size,
        reference_size: g.reference_size,
        damping_scale: g.damping_scale,
        out: g.out.clone(),
    };
    match &cli.command {
        Command::Simulate { points } => simulate(&cfg.resolve(None, &overrides)?, points.as_deref()),
        Command::Build => build(&cfg.resolve(None, &overrides)?).map(|_| ()),
        Command::Predict { bundle, points } => predict(&cfg, &overrides, bundle, points.as_deref()),
        Command::Validate { bundle } => {
            let r = cfg.resolve(None, &overrides)?;
            let s = FrfSurrogate::load(bundle)?;
            validate_and_write(&r, &s, design_size(&s)).map(|_| ())
        }
        Command::Converge => converge(&cfg.resolve(None, &overrides)?),
        Command::CaseStudy { case } => case_study(&cfg, case.as_deref(), &overrides),
    }
}

fn create_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn points_path<'a>(flag: Option<&'a Path>, r: &'a Resolved) -> Result<&'a Path> {
    flag.or(r.points.as_deref())
        .ok_or_else(|| Error::Config("no points file: pass --points or set `points`".into()))
}

fn simulate(r: &Resolved, points: Option<&Path>) -> Result<()> {
    let path = points_path(points, r)?;
    let pts = config::read_points(path, &r.case.inputs.names())?;
    if pts.is_empty() {
        warn!("{} holds no points; nothing to simulate", path.display());
        return Ok(());
    }
    create_out(&r.out)?;
    let model = SystemModel { system: &r.case.system, grid: &r.case.grid };
    for (i, x) in pts.iter().enumerate() {
        let (frf, _) = model.evaluate(x)?;
        let file = r.out.join(format!("{}_point{i}_frf.csv", r.case.name));
        output::write_frf_table(&file, &[("", &frf)])?;
    }
    info!("wrote {} FRF tables to {}", pts.len(), r.out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct BuildSummary {
    case: String,
    seed: u64,
    ed_size: usize,
    stage1_entries: usize,
    stage1_models: usize,
    stage2_models: usize,
    stage2_real: usize,
    stage2_imag: usize,
    max_degree: u32,
}

fn build_summary(r: &Resolved, s: &FrfSurrogate) -> BuildSummary {
    BuildSummary {
        case: r.case.name.clone(),
        seed: r.seed,
        ed_size: r.case.ed_size,
        stage1_entries: s.stage1_entry_count(),
        stage1_models: s.stage1_model_count(),
        stage2_models: s.stage2_model_count(),
        stage2_real: s.real_block().models.len(),
        stage2_imag: s.imag_block().models.len(),
        max_degree: s.fitted_models().iter().map(|m| m.diagnostics().degree).max().unwrap_or(0),
    }
}

fn tag(r: &Resolved, ed_size: usize) -> RunTag {
    RunTag { case: r.case.name.clone(), seed: r.seed, ed_size }
}

fn build(r: &Resolved) -> Result<(FrfSurrogate, BuildSummary)> {
    let n = r.case.ed_size;
    let transform = r.case.inputs.transform()?;
    let design = lhs_sample(&transform, n, derive_seed(r.seed, &format!("ed-{n}")));
    let model = SystemModel { system: &r.case.system, grid: &r.case.grid };
    let start = std::time::Instant::now();
    let s = FrfSurrogate::build(&transform, &design, &model, None, &r.case.settings)?;
    info!("built surrogate in {:.2?}", start.elapsed());
    create_out(&r.out)?;
    let path = tag(r, n).path(&r.out, "surrogate", "json");
    s.save(&path)?;
    let summary = build_summary(r, &s);
    println!(
        "{}: {} stage-1 entries ({} models), {} stage-2 models ({} real + {} imaginary), max degree {}",
        summary.case,
        summary.stage1_entries,
        summary.stage1_models,
        summary.stage2_models,
        summary.stage2_real,
        summary.stage2_imag,
        summary.max_degree
    );
    println!("bundle: {}", path.display());
    Ok((s, summary))
}

fn design_size(s: &FrfSurrogate) -> usize {
    s.fitted_models().first().map(|m| m.diagnostics().n_ed).unwrap_or(0)
}

fn predict(cfg: &RunConfig, o: &Overrides, bundle: &Path, points: Option<&Path>) -> Result<()> {
    let s = FrfSurrogate::load(bundle)?;
    let resolved = if cfg.case.is_some() || cfg.system.is_some() { Some(cfg.resolve(None, o)?) } else { None };
    let path = match &resolved {
        Some(r) => points_path(points, r)?,
        None => points.ok_or_else(|| Error::Config("no points file: pass --points".into()))?,
    };
    let pts = match &resolved {
        Some(r) => {
            if r.case.inputs.dim() != s.transform().dim() {
                return Err(Error::DimensionMismatch {
                    what: "bundle input dimension",
                    expected: r.case.inputs.dim(),
                    found: s.transform().dim(),
                });
            }
            config::read_points(path, &r.case.inputs.names())?
        }
        None => read_positional(path, s.transform().dim())?,
    };
    if pts.is_empty() {
        warn!("{} holds no points; nothing to predict", path.display());
        return Ok(());
    }
    let out = o.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    create_out(&out)?;
    let stem = bundle.file_stem().and_then(|s| s.to_str()).unwrap_or("surrogate").to_string();
    for (i, frf) in s.predict_many(&pts)?.iter().enumerate() {
        output::write_frf_table(&out.join(format!("{stem}_prediction{i}.csv")), &[("", frf)])?;
    }
    info!("wrote {} predictions to {}", pts.len(), out.display());
    Ok(())
}

/// Points CSV without a configuration: the first `dim` columns, in order.
fn read_positional(path: &Path, dim: usize) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut pts = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row: Option<Vec<f64>> = (0..dim).map(|c| rec.get(c).and_then(|v| v.trim().parse().ok())).collect();
        pts.push(row.ok_or_else(|| {
            Error::Config(format!("{}: row {} needs {dim} numeric columns", path.display(), line + 1))
        })?);
    }
    Ok(pts)
}

fn validate_and_write(r: &Resolved, s: &FrfSurrogate, ed_size: usize) -> Result<frfpce::study::ValidationReport> {
    let transform = r.case.inputs.transform()?;
    if transform != *s.transform() {
        return Err(Error::Config("bundle inputs differ from the configured case".into()));
    }
    let model = SystemModel { system: &r.case.system, grid: &r.case.grid };
    let pts = mc_sample(&transform, r.reference_size, derive_seed(r.seed, "reference"));
    let report = validate(s, &model, &pts)?;
    let paths = output::write_validation(&r.out, &tag(r, ed_size), &report)?;
    println!(
        "mean error {:.4}%, std error {:.4}%, median FRF error {:.4}%, max FRF error {:.4}%, {} of {} predictions failed",
        report.mean_error,
        report.std_error,
        report.median_channel_error(),
        report.max_channel_error(),
        report.failures.len(),
        pts.len()
    );
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(report)
}

fn converge(r: &Resolved) -> Result<()> {
    let transform = r.case.inputs.transform()?;
    let model = SystemModel { system: &r.case.system, grid: &r.case.grid };
    let rows = convergence_study(&transform, &model, &r.case.settings, &r.ed_sizes, r.reference_size, r.seed)?;
    create_out(&r.out)?;
    let path = r.out.join(format!("{}_seed{}_convergence.csv", r.case.name, r.seed));
    output::write_convergence(&path, &rows)?;
    println!("{:>6} {:>12} {:>12} {:>12} {:>12}", "N", "pce mean %", "mc mean %", "pce std %", "mc std %");
    for row in &rows {
        println!(
            "{:>6} {:>12.4} {:>12.4} {:>12.4} {:>12.4}",
            row.ed_size, row.pce_mean_error, row.mc_mean_error, row.pce_std_error, row.mc_std_error
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct CaseSummary {
    build: BuildSummary,
    reference_size: usize,
    mc_mean_error: f64,
    mc_std_error: f64,
    validation: ValidationSummary,
}

fn case_study(cfg: &RunConfig, case: Option<&str>, o: &Overrides) -> Result<()> {
    let r = cfg.resolve(case, o)?;
    let (s, build) = build(&r)?;
    let report = validate_and_write(&r, &s, r.case.ed_size)?;
    let model = SystemModel { system: &r.case.system, grid: &r.case.grid };
    let t = tag(&r, r.case.ed_size);
    if let Some((worst, typical)) = report.worst_and_typical() {
        for (what, i) in [("worst", worst), ("typical", typical)] {
            let x = &report.points[i];
            let (exact, _) = model.evaluate(x)?;
            let pred = s.predict_frf(x)?;
            output::write_frf_table(&t.path(&r.out, &format!("{what}_frf"), "csv"), &[("true", &exact), ("pce", &pred)])?;
        }
    }
    let n_mc = r.case.ed_size.min(report.points.len());
    let mc = reference_moments(&model, &report.points[..n_mc], &[])?;
    let (mc_mean_error, mc_std_error) = moment_errors(&report.reference, &mc.moments)?;
    println!("plain Monte Carlo with {n_mc} runs: mean error {mc_mean_error:.4}%, std error {mc_std_error:.4}%");
    if cfg.ed_sizes.is_some() {
        converge(&r)?;
    }
    let summary = CaseSummary {
        build,
        reference_size: r.reference_size,
        mc_mean_error,
        mc_std_error,
        validation: ValidationSummary::from_report(&report),
    };
    output::write_json(&t.path(&r.out, "case_summary", "json"), &summary)?;
    Ok(())
}
