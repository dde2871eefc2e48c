//! Command-line front end. Every command reads one TOML config and writes
//! its artifacts into the output directory.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::continuation::{convergence_report, sweep_rho, write_sweep_csv, ConvergenceReport, SweepPlan, SweepRecord};
use crate::energy::{EnergyReport, Functional};
use crate::error::{Error, Result};
use crate::format::{sig17, to_json};
use crate::hardy::{compute_constants, ConstantsBundle, InequalityConstants};
use crate::lattice::{write_field, Field};
use crate::nonlinearity::{validate_hypotheses, HypothesisReport, Nonlinearity, SampleGrid, ValidationTolerances};
use crate::solver::{solve_ground_state, GroundStateResult};
use crate::spectral::{assemble_operator, bloch_band_edges, spectral_split, GapEdges, GapReport, SpectralSplit};

#[derive(Debug, Parser)]
#[command(name = "dnls", version, about = "Ground states of the discrete nonlinear Schrödinger equation with a Hardy term")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bloch bands of the potential and the gap around 0.
    CertifyGap(CommonArgs),
    /// Hardy constant κ, ρ⁺ and the admissible ρ_max on the box.
    Constants(CommonArgs),
    /// Ground state at one ρ.
    Solve(CommonArgs),
    /// Descending ρ sweep ending at ρ = 0.
    Sweep(CommonArgs),
    /// Sampled check of the nonlinearity hypotheses.
    Validate(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::CertifyGap(a)
            | Command::Constants(a)
            | Command::Solve(a)
            | Command::Sweep(a)
            | Command::Validate(a) => a,
        }
    }
}

/// Parses `argv`, runs the command and returns the process exit status.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.class().exit_code()
        }
    }
}

struct Context {
    cfg: RunConfig,
    config_path: PathBuf,
    out: PathBuf,
}

fn run(cmd: &Command) -> Result<String> {
    faer::set_global_parallelism(faer::Par::Seq);
    let args = cmd.args();
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.solver.seed = seed;
    }
    let threads = args.threads.or(cfg.threads).unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    });
    if threads == 0 {
        return Err(Error::Config("threads must be at least 1".into()));
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out)?;
    let ctx = Context {
        cfg,
        config_path: args.config.clone(),
        out,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} threads: {e}")))?;
    pool.install(|| match cmd {
        Command::CertifyGap(_) => certify_gap(&ctx),
        Command::Constants(_) => constants(&ctx),
        Command::Solve(_) => solve(&ctx),
        Command::Sweep(_) => sweep(&ctx),
        Command::Validate(_) => validate(&ctx),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)?)?;
    Ok(())
}

fn write_field_file(path: &Path, u: &Field) -> Result<()> {
    let mut w = create(path)?;
    write_field(u, &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct GapCertificate<'a> {
    #[serde(flatten)]
    report: &'a GapReport,
    grid: usize,
    fingerprint: String,
}

fn certify_gap(ctx: &Context) -> Result<String> {
    let cfg = &ctx.cfg;
    let v = cfg.potential()?;
    let table = bloch_band_edges(&v, cfg.bloch.grid)?;
    let mut w = create(&ctx.out.join("bands.csv"))?;
    table.write_csv(&mut w)?;
    w.flush()?;
    let edges = GapEdges {
        sigma_minus: table.sigma_minus,
        sigma_plus: table.sigma_plus,
    };
    let split = spectral_split(&assemble_operator(&cfg.domain()?, &v)?, Some(edges))?;
    let report = split.gap_report().expect("edges were supplied");
    write_json(
        &ctx.out.join("gap.json"),
        &GapCertificate {
            report: &report,
            grid: cfg.bloch.grid,
            fingerprint: cfg.gap_fingerprint(),
        },
    )?;
    Ok(format!(
        "sigma_minus = {}, sigma_plus = {}, intrusions = {}",
        sig17(report.sigma_minus),
        sig17(report.sigma_plus),
        report.intrusions.len()
    ))
}

/// Gap edges from a matching `gap.json` in the output directory.
fn certified_gap(ctx: &Context) -> Result<GapEdges> {
    let path = ctx.out.join("gap.json");
    let stored = fs::read_to_string(&path)
        .ok()
        .and_then(|t| serde_json::from_str::<Value>(&t).ok())
        .filter(|v| v["fingerprint"].as_str() == Some(ctx.cfg.gap_fingerprint().as_str()));
    if let Some(v) = stored {
        if let (Some(lo), Some(hi)) = (v["sigma_minus"].as_f64(), v["sigma_plus"].as_f64()) {
            return Ok(GapEdges {
                sigma_minus: lo,
                sigma_plus: hi,
            });
        }
    }
    // a potential without a gap is reported as such rather than as a missing file
    bloch_band_edges(&ctx.cfg.potential()?, ctx.cfg.bloch.grid)?;
    Err(Error::GapNotCertified(format!(
        "no matching {} (run `dnls certify-gap --config {} --out {}` first)",
        path.display(),
        ctx.config_path.display(),
        ctx.out.display()
    )))
}

fn split_for(ctx: &Context, gap: Option<GapEdges>) -> Result<SpectralSplit> {
    let op = assemble_operator(&ctx.cfg.domain()?, &ctx.cfg.potential()?)?;
    spectral_split(&op, gap)
}

#[derive(Serialize)]
struct ConstantsFile<'a> {
    #[serde(flatten)]
    constants: &'a InequalityConstants,
    hardy_iterations: usize,
    #[serde(serialize_with = "crate::format::ser_f64")]
    rho_plus_condition: f64,
    witnesses: Witnesses,
}

#[derive(Serialize)]
struct Witnesses {
    hardy: &'static str,
    rho_plus: &'static str,
}

fn write_constants(ctx: &Context, k: &ConstantsBundle) -> Result<()> {
    let w = Witnesses {
        hardy: "hardy_witness.txt",
        rho_plus: "rho_plus_witness.txt",
    };
    write_field_file(&ctx.out.join(w.hardy), &k.hardy.witness)?;
    write_field_file(&ctx.out.join(w.rho_plus), &k.rho_plus.witness)?;
    write_json(
        &ctx.out.join("constants.json"),
        &ConstantsFile {
            constants: &k.constants,
            hardy_iterations: k.hardy.iterations,
            rho_plus_condition: k.rho_plus.condition,
            witnesses: w,
        },
    )
}

fn constants(ctx: &Context) -> Result<String> {
    ctx.cfg.require_hardy()?;
    let split = split_for(ctx, None)?;
    let k = compute_constants(&split, ctx.cfg.hardy.weight)?;
    write_constants(ctx, &k)?;
    let c = &k.constants;
    Ok(format!(
        "kappa = {}, rho_plus = {}, rho_max = {}",
        sig17(c.kappa),
        sig17(c.rho_plus),
        sig17(c.rho_max)
    ))
}

fn check_model(model: &dyn Nonlinearity) -> Result<HypothesisReport> {
    Ok(validate_hypotheses(model, &SampleGrid::default(), &ValidationTolerances::default()))
}

fn require_hypotheses(model: &dyn Nonlinearity) -> Result<()> {
    let r = check_model(model)?;
    if !r.all_passed {
        let failed: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        return Err(Error::HypothesisFailed(format!("{} fails {}", r.model, failed.join(", "))));
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveFile<'a> {
    #[serde(flatten)]
    result: &'a GroundStateResult,
    energy: EnergyReport,
    #[serde(serialize_with = "crate::format::ser_opt_f64")]
    rho_max: Option<f64>,
    seed: u64,
    field: &'static str,
    log: &'static str,
}

fn solve(ctx: &Context) -> Result<String> {
    let cfg = &ctx.cfg;
    let gap = certified_gap(ctx)?;
    let model = cfg.model()?;
    require_hypotheses(model.as_ref())?;
    let split = split_for(ctx, Some(gap))?;
    let needs_constants = cfg.rho.solve_fraction.is_some() || cfg.rho.solve.is_some_and(|r| r != 0.0);
    let bundle = if needs_constants {
        cfg.require_hardy()?;
        let k = compute_constants(&split, cfg.hardy.weight)?;
        write_constants(ctx, &k)?;
        Some(k)
    } else {
        None
    };
    let rho = match (cfg.rho.solve, cfg.rho.solve_fraction, &bundle) {
        (Some(r), _, _) => r,
        (None, Some(frac), Some(k)) => frac * k.constants.rho_max,
        _ => 0.0,
    };
    let mut f = Functional::new(&split, model.as_ref(), rho)?.with_weight(cfg.hardy.weight);
    if let Some(k) = &bundle {
        f = f.with_constants(&k.constants);
    }
    let r = solve_ground_state(&f, &cfg.solver)?;
    write_field_file(&ctx.out.join("ground_state.txt"), &r.field)?;
    let mut log = create(&ctx.out.join("run_log.jsonl"))?;
    r.write_log(&mut log)?;
    log.flush()?;
    write_json(
        &ctx.out.join("solve.json"),
        &SolveFile {
            result: &r,
            energy: f.report(&r.field)?,
            rho_max: bundle.as_ref().map(|k| k.constants.rho_max),
            seed: cfg.solver.seed,
            field: "ground_state.txt",
            log: "run_log.jsonl",
        },
    )?;
    Ok(format!(
        "rho = {}, level = {}, residual = {}, peak = {}",
        sig17(rho),
        sig17(r.level),
        sig17(r.residual),
        r.peak
    ))
}

#[derive(Serialize)]
struct SweepFile<'a> {
    #[serde(serialize_with = "crate::format::ser_f64")]
    rho_max: f64,
    #[serde(serialize_with = "crate::format::ser_vec_f64")]
    plan: &'a [f64],
    records: &'a [SweepRecord],
    complete: bool,
    failure: Option<&'a str>,
    report: Option<ConvergenceReport>,
    report_error: Option<String>,
}

fn sweep(ctx: &Context) -> Result<String> {
    let cfg = &ctx.cfg;
    let gap = certified_gap(ctx)?;
    cfg.require_hardy()?;
    let model = cfg.model()?;
    require_hypotheses(model.as_ref())?;
    let split = split_for(ctx, Some(gap))?;
    let k = compute_constants(&split, cfg.hardy.weight)?;
    write_constants(ctx, &k)?;
    let rho_max = k.constants.rho_max;
    let plan = match &cfg.rho.sweep {
        Some(values) => {
            let mut v = values.clone();
            if v.last() != Some(&0.0) {
                v.push(0.0);
            }
            SweepPlan::new(v)?
        }
        None => SweepPlan::from_fractions(&cfg.rho.sweep_fractions, rho_max)?,
    };
    let limit = 0.9 * rho_max;
    if let Some(&rho) = plan.rhos.iter().find(|&&r| r > limit) {
        return Err(Error::RhoOutOfRange { rho, limit });
    }
    let f = Functional::new(&split, model.as_ref(), 0.0)?
        .with_weight(cfg.hardy.weight)
        .with_constants(&k.constants);
    let outcome = sweep_rho(&plan, &f, &cfg.solver)?;
    let mut csv = create(&ctx.out.join("sweep.csv"))?;
    write_sweep_csv(&outcome.records, split.domain().dim(), &mut csv)?;
    csv.flush()?;
    for (i, rec) in outcome.records.iter().enumerate() {
        write_field_file(&ctx.out.join(format!("sweep_field_{i}.txt")), &rec.field)?;
    }
    let (report, report_error) = match outcome.baseline() {
        Some(b) => match convergence_report(&outcome.records, b, Some(cfg.radius), &cfg.sweep) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        },
        None => (None, Some("no ρ = 0 record".to_string())),
    };
    let passed = report.as_ref().map(|r| r.all_passed);
    write_json(
        &ctx.out.join("sweep_report.json"),
        &SweepFile {
            rho_max,
            plan: &plan.rhos,
            records: &outcome.records,
            complete: outcome.is_complete(),
            failure: outcome.failure.as_deref(),
            report,
            report_error,
        },
    )?;
    if let Some(f) = outcome.failure {
        return Err(Error::Numerical(format!("sweep aborted at {f}; partial results written")));
    }
    Ok(format!(
        "{} records, c0 = {}, checks passed: {}",
        outcome.records.len(),
        sig17(outcome.baseline().map_or(f64::NAN, |b| b.level)),
        passed.map_or("n/a".to_string(), |p| p.to_string())
    ))
}

fn validate(ctx: &Context) -> Result<String> {
    let model = ctx.cfg.model()?;
    let r = check_model(model.as_ref())?;
    write_json(&ctx.out.join("hypotheses.json"), &r)?;
    if !r.all_passed {
        let failed: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        return Err(Error::HypothesisFailed(format!("{} fails {}", r.model, failed.join(", "))));
    }
    Ok(format!("{}: all {} checks passed", r.model, r.checks.len()))
}
