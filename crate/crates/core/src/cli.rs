//! Command-line front end: `solve`, `compare`, `sweep` and `verify`.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{energy_refinement_probe, run_comparison_test, threshold_bounds, thresholds};
use crate::config::{OutputFormat, RunConfig, Subcommand};
use crate::error::{Error, Result};
use crate::mesh::{boundary_distance, write_nodal_csv, Field, Mesh};
use crate::nonlinearity::ProblemSpec;
use crate::solver::{hopf_floor, outer_solve, Outcome, SolveReport};
use crate::verify::{run_suite, Status, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_HYPOTHESIS: i32 = 3;
pub const EXIT_VERIFY_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "singplap", version, about = "Singular p-Laplacian Dirichlet solver")]
pub struct Cli {
    #[arg(value_enum)]
    pub subcommand: Subcommand,
    #[command(flatten)]
    pub args: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated artifact formats (overrides `output.formats`).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub format: Option<Vec<OutputFormat>>,
    /// Seed for randomized checks (overrides `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match run_cli(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::HypothesisNotSatisfied(_) => EXIT_HYPOTHESIS,
                Error::Diverged { .. } => EXIT_DIVERGED,
                _ => EXIT_ERROR,
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.args.config {
        Some(path) => RunConfig::from_file(path)?,
        None if cli.subcommand == Subcommand::Verify => RunConfig::default(),
        None => return Err(Error::Config("--config is required".into())),
    };
    if let Some(sub) = cfg.subcommand {
        if sub != cli.subcommand {
            return Err(Error::Config(format!(
                "config is for `{}`, not `{}`",
                sub.name(),
                cli.subcommand.name()
            )));
        }
    }
    cfg.subcommand = Some(cli.subcommand);
    if let Some(out) = &cli.args.out {
        cfg.output.dir = Some(out.clone());
    }
    if let Some(f) = &cli.args.format {
        cfg.output.formats = f.clone();
    }
    if let Some(seed) = cli.args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run_cli(cli: &Cli) -> Result<i32> {
    let cfg = load_config(cli)?;
    match cli.subcommand {
        Subcommand::Solve => cmd_solve(&cfg),
        Subcommand::Compare => cmd_compare(&cfg),
        Subcommand::Sweep => cmd_sweep(&cfg),
        Subcommand::Verify => cmd_verify(&cfg),
    }
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg
        .output
        .dir
        .clone()
        .ok_or_else(|| Error::Config("no output directory (--out or output.dir)".into()))?;
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_solution(path: &Path, mesh: &Mesh, u: &Field, delta: &Field) -> Result<()> {
    write_nodal_csv(create(path)?, mesh, &[("u", u.values()), ("delta", delta.values())])
}

#[derive(Serialize)]
struct EnergySummary {
    energy: f64,
    p: f64,
    p_star: Option<f64>,
    lpstar_norm: f64,
    hopf_floor: f64,
    energy_audit_ok: bool,
    energy_audit_excess: f64,
    levels: Vec<EnergyLevel>,
}

#[derive(Serialize)]
struct EnergyLevel {
    n: u64,
    energy: f64,
    energy_bound: f64,
}

fn energy_summary(report: &SolveReport, u: &Field, delta: &Field) -> Result<EnergySummary> {
    Ok(EnergySummary {
        energy: report.energy,
        p: report.p,
        p_star: report.p_star,
        lpstar_norm: report.levels.last().map_or(0.0, |l| l.lpstar_norm),
        hopf_floor: hopf_floor(u, delta)?,
        energy_audit_ok: report.energy_audit_ok,
        energy_audit_excess: report.energy_audit_excess,
        levels: report
            .levels
            .iter()
            .map(|l| EnergyLevel {
                n: l.n,
                energy: l.energy,
                energy_bound: l.energy_bound,
            })
            .collect(),
    })
}

fn outcome_code(outcome: Outcome) -> i32 {
    match outcome {
        Outcome::Converged => EXIT_OK,
        Outcome::Diverged => EXIT_DIVERGED,
        Outcome::MaxLevel => EXIT_ERROR,
    }
}

/// Writes `solution.csv`, `report.json` and `energy.json`.
pub fn cmd_solve(cfg: &RunConfig) -> Result<i32> {
    let dir = out_dir(cfg)?;
    let mesh = cfg.mesh.build()?;
    let spec = cfg.problem_spec(&mesh)?;
    let (u, report) = outer_solve(&spec, &cfg.solver)?;
    let delta = boundary_distance(&mesh);
    if cfg.wants(OutputFormat::Csv) {
        write_solution(&dir.join("solution.csv"), &mesh, &u, &delta)?;
    }
    if cfg.wants(OutputFormat::Json) {
        write_json(&dir.join("report.json"), &report)?;
        write_json(&dir.join("energy.json"), &energy_summary(&report, &u, &delta)?)?;
    }
    match report.outcome {
        Outcome::Converged => println!("converged after {} levels", report.levels.len()),
        Outcome::Diverged => println!(
            "diverged: {} (nonexistence regime)",
            report.divergence.as_deref().unwrap_or("norm cap exceeded")
        ),
        Outcome::MaxLevel => eprintln!("error: level schedule exhausted without outer convergence"),
    }
    Ok(outcome_code(report.outcome))
}

/// Writes both solutions and `certificate.json`; exit 0 iff `v_1 <= v_2`.
pub fn cmd_compare(cfg: &RunConfig) -> Result<i32> {
    let dir = out_dir(cfg)?;
    let mesh = cfg.mesh.build()?;
    let spec1 = cfg.problem_spec(&mesh)?;
    let spec2 = cfg.second_spec(&mesh)?;
    let report = run_comparison_test(&spec1, &spec2, &cfg.solver)?;
    let delta = boundary_distance(&mesh);
    if cfg.wants(OutputFormat::Csv) {
        write_solution(&dir.join("solution1.csv"), &mesh, &report.v1, &delta)?;
        write_solution(&dir.join("solution2.csv"), &mesh, &report.v2, &delta)?;
    }
    #[derive(Serialize)]
    struct Certificate<'a> {
        holds: bool,
        tol_cmp: f64,
        max_excess: f64,
        #[serde(flatten)]
        certificate: &'a crate::analysis::ComparisonCertificate,
    }
    write_json(
        &dir.join("certificate.json"),
        &Certificate {
            holds: report.holds,
            tol_cmp: report.tol_cmp,
            max_excess: report.max_excess,
            certificate: &report.certificate,
        },
    )?;
    if cfg.wants(OutputFormat::Json) {
        write_json(&dir.join("report1.json"), &report.report1)?;
        write_json(&dir.join("report2.json"), &report.report2)?;
    }
    println!(
        "comparison {}: max(v1 - v2) = {:e}, S = {:e}",
        if report.holds { "holds" } else { "FAILS" },
        report.max_excess,
        report.certificate.final_sign_quantity
    );
    Ok(if report.holds { EXIT_OK } else { EXIT_ERROR })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub m: Option<f64>,
    pub p: f64,
    pub ex_bound: f64,
    pub ex_gamma: bool,
    pub cin_bound: f64,
    pub cin_gamma: bool,
    pub plap_bound: f64,
    pub plap_gamma: bool,
    pub observed_slope: Option<f64>,
    pub finite_energy: Option<bool>,
    pub status: &'static str,
    pub error: Option<String>,
}

fn opt_str<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or(String::new(), |x| x.to_string())
}

/// One row per `(gamma, m)` cell in `threshold_map.csv`; failed cells are
/// marked and the sweep goes on.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<i32> {
    let dir = out_dir(cfg)?;
    let base = cfg
        .problem
        .clone()
        .ok_or_else(|| Error::Config("missing key `problem`".into()))?;
    let mesh = cfg.mesh.build()?;
    let cells: Vec<(f64, Option<f64>)> = cfg
        .sweep
        .gammas
        .iter()
        .flat_map(|&g| cfg.sweep.ms.iter().map(move |&m| (g, m)))
        .collect();
    if cells.is_empty() {
        return Err(Error::Config("sweep.gammas and sweep.ms must be nonempty".into()));
    }
    let run_cell = |&(gamma, m): &(f64, Option<f64>)| -> SweepRow {
        let p = base.p;
        let mm = m.unwrap_or(f64::INFINITY);
        let b = threshold_bounds(mm, p);
        let v = thresholds(gamma, mm, p);
        let mut row = SweepRow {
            gamma,
            m,
            p,
            ex_bound: b.ex,
            ex_gamma: v.ex_gamma,
            cin_bound: b.cin,
            cin_gamma: v.cin_gamma,
            plap_bound: b.plap,
            plap_gamma: v.plap_gamma,
            observed_slope: None,
            finite_energy: None,
            status: "ok",
            error: None,
        };
        if cfg.sweep.observe {
            let probe = (|| {
                let mut doc = base.clone();
                doc.m = m;
                let spec = ProblemSpec::new(doc, &mesh)?.with_gamma(gamma)?;
                energy_refinement_probe(&spec, &cfg.solver, cfg.sweep.refinements)
            })();
            match probe {
                Ok(verdict) => {
                    row.observed_slope = verdict.observed_slope;
                    row.finite_energy = verdict.finite_energy;
                }
                Err(e) => {
                    row.status = "failed";
                    row.error = Some(e.to_string());
                }
            }
        }
        row
    };
    let rows: Vec<SweepRow> = if cfg.sweep.parallelism == 0 {
        cells.par_iter().map(run_cell).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.sweep.parallelism)
            .build()
            .map_err(|e| Error::Config(format!("sweep.parallelism: {e}")))?
            .install(|| cells.par_iter().map(run_cell).collect())
    };

    if cfg.wants(OutputFormat::Csv) {
        let path = dir.join("threshold_map.csv");
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record([
            "gamma", "m", "p", "ex_bound", "ex_gamma", "cin_bound", "cin_gamma", "plap_bound",
            "plap_gamma", "observed_slope", "finite_energy", "status", "error",
        ])?;
        for r in &rows {
            w.write_record([
                format!("{:?}", r.gamma),
                r.m.map_or("inf".to_string(), |m| format!("{m:?}")),
                format!("{:?}", r.p),
                format!("{:?}", r.ex_bound),
                r.ex_gamma.to_string(),
                format!("{:?}", r.cin_bound),
                r.cin_gamma.to_string(),
                format!("{:?}", r.plap_bound),
                r.plap_gamma.to_string(),
                r.observed_slope.map_or(String::new(), |s| format!("{s:?}")),
                opt_str(&r.finite_energy),
                r.status.to_string(),
                opt_str(&r.error),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    if cfg.wants(OutputFormat::Json) {
        let cell_dir = dir.join("cells");
        fs::create_dir_all(&cell_dir).map_err(|e| Error::io(&cell_dir, e))?;
        for (i, r) in rows.iter().enumerate() {
            write_json(&cell_dir.join(format!("cell_{i:03}.json")), r)?;
        }
        write_json(&dir.join("threshold_map.json"), &rows)?;
    }
    let failed = rows.iter().filter(|r| r.status == "failed").count();
    println!("sweep: {} cells, {failed} failed", rows.len());
    Ok(if failed == rows.len() { EXIT_ERROR } else { EXIT_OK })
}

/// Prints one line per acceptance check; exit 0 iff nothing fails.
pub fn cmd_verify(cfg: &RunConfig) -> Result<i32> {
    let opts = VerifyOptions {
        cells: cfg.verify.cells,
        seed: cfg.seed,
    };
    let results = run_suite(&opts);
    for r in &results {
        println!("{r}");
    }
    if let Some(dir) = &cfg.output.dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        if cfg.wants(OutputFormat::Json) {
            write_json(&dir.join("verify.json"), &results)?;
        }
    }
    let failed = results.iter().filter(|r| r.status == Status::Fail).count();
    println!("{} passed, {failed} failed, {} skipped",
        results.iter().filter(|r| r.status == Status::Pass).count(),
        results.iter().filter(|r| r.status == Status::Skip).count());
    Ok(if failed == 0 { EXIT_OK } else { EXIT_VERIFY_FAILED })
}
