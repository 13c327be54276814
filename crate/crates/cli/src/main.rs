//! `spectra`: eigenvalue ratio experiments from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 input error, 3 numerical failure.

mod plot;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use spectra_core::bounds::{envelope_maximum, BoundCurve};
use spectra_core::geometry::Domain;
use spectra_core::perturb::{rectangle_cosine_check, FemMethod};
use spectra_core::scan::{
    bin_max, header_lines, run_scan, summarize, write_bins, write_results, write_skipped, write_summary, Plan,
};
use spectra_core::solve::{solve_domain, SolveOptions};
use spectra_core::Error;

#[derive(Parser, Debug)]
#[command(name = "spectra", version, about = "Dirichlet eigenvalue ratios of planar domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one domain and print its spectrum and ratios as JSON.
    Solve {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Number of red refinements of the coarse mesh.
        #[arg(long, default_value_t = 3)]
        refine: u32,
        /// Coarse max edge length (default: diameter / 10).
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        /// Richardson extrapolation over the last two levels.
        #[arg(long)]
        extrapolate: bool,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a campaign plan; writes results, bins, summary and skip CSVs.
    Scan {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Master seed; overrides SPECTRA_SEED, which overrides the plan.
        #[arg(long, env = "SPECTRA_SEED")]
        seed: Option<u64>,
        /// Worker threads; the output does not depend on it.
        #[arg(long)]
        jobs: Option<usize>,
        /// Override the plan's refinement level.
        #[arg(long)]
        refine: Option<u32>,
        /// Override the plan's bin width.
        #[arg(long)]
        dx: Option<f64>,
    },
    /// Tabulate the bound envelope on [1, K₂].
    Bounds {
        #[arg(long, default_value_t = 0.001)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Boundary perturbation checks.
    Perturb {
        #[command(subcommand)]
        command: PerturbCommand,
    },
    /// Scatter plot of campaign results with the reference curves.
    Plot {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Grid step of the bound envelope overlay.
        #[arg(long, default_value_t = 0.005)]
        bounds_step: f64,
    },
}

#[derive(Subcommand, Debug)]
enum PerturbCommand {
    /// Cosine top-edge perturbation of the optimal rectangle.
    RectCheck {
        #[arg(long, allow_hyphen_values = true)]
        c0: f64,
        #[arg(long, allow_hyphen_values = true)]
        c1: f64,
        #[arg(long, allow_hyphen_values = true)]
        c2: f64,
        /// Add the FEM central difference.
        #[arg(long)]
        fem: bool,
        #[arg(long, value_enum, default_value_t = Method::Morph)]
        method: Method,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long, default_value_t = 4)]
        level: u32,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Morph,
    Remesh,
}

enum Failure {
    Input(String),
    Numerical { stage: &'static str, message: String },
}

impl Failure {
    fn at(stage: &'static str) -> impl Fn(Error) -> Failure {
        move |e| {
            if e.is_numerical() || matches!(e, Error::MeshTooCoarse(_)) {
                Failure::Numerical { stage, message: e.to_string() }
            } else {
                Failure::Input(format!("{stage}: {e}"))
            }
        }
    }

    fn io(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
        move |e| Failure::Input(format!("{}: {e}", path.display()))
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical { stage, message }) => {
            eprintln!("numerical failure in {stage}: {message}");
            ExitCode::from(3)
        }
    }
}

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Solve { domain, k, refine, h, tol, extrapolate, out } => {
            solve(&domain, k, refine, h, tol, extrapolate, out.as_deref())
        }
        Command::Scan { plan, out, seed, jobs, refine, dx } => scan(&plan, &out, seed, jobs, refine, dx),
        Command::Bounds { step, out } => bounds(step, &out),
        Command::Perturb { command: PerturbCommand::RectCheck { c0, c1, c2, fem, method, eps, level } } => {
            rect_check(c0, c1, c2, fem, method, eps, level)
        }
        Command::Plot { results, out, bounds_step } => {
            let svg = plot::render(&results, bounds_step)?;
            std::fs::write(&out, svg).map_err(Failure::io(&out))
        }
    }
}

fn meta(subcommand: &str, config: Value, seed: Option<u64>) -> Value {
    json!({
        "tool": format!("spectra {}", env!("CARGO_PKG_VERSION")),
        "subcommand": subcommand,
        "config": config,
        "seed": seed,
    })
}

fn emit_json(v: &Value, out: Option<&Path>) -> Outcome {
    let text = serde_json::to_string_pretty(v).expect("serializable") + "\n";
    match out {
        Some(p) => std::fs::write(p, text).map_err(Failure::io(p)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn solve(path: &Path, k: usize, refine: u32, h: Option<f64>, tol: Option<f64>, extrapolate: bool, out: Option<&Path>) -> Outcome {
    let domain = Domain::load(path).map_err(Failure::at("domain"))?;
    let mut opts = SolveOptions { h_target: h, levels: refine, k, extrapolate, ..SolveOptions::default() };
    if let Some(t) = tol {
        opts.tol = t;
    }
    if k < 4 {
        return Err(Failure::Input(format!("--k {k}: at least 4 eigenvalues are needed for the ratios")));
    }
    let sol = solve_domain(&domain, &opts).map_err(Failure::at("solve"))?;
    let r = &sol.report;
    let config = json!({ "domain": path.display().to_string(), "options": opts });
    let v = json!({
        "meta": meta("solve", config, None),
        "class": domain.class().as_str(),
        "eigenvalues": r.reported(),
        "raw": r.raw,
        "extrapolated": r.extrapolated,
        "residuals": r.residuals,
        "x": r.x(),
        "y": r.y(),
        "delta4": r.delta4(),
        "level": r.level,
        "dofs": r.dofs,
        "triangles": r.triangles,
        "min_angle_deg": r.min_angle_deg,
    });
    emit_json(&v, out)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(Failure::io(path))
}

fn scan(plan_path: &Path, dir: &Path, seed: Option<u64>, jobs: Option<usize>, refine: Option<u32>, dx: Option<f64>) -> Outcome {
    let mut plan = Plan::load(plan_path).map_err(Failure::at("plan"))?;
    if let Some(s) = seed {
        plan.seed = s;
    }
    if let Some(r) = refine {
        plan.refinement = r;
    }
    if let Some(d) = dx {
        plan.dx = d;
    }
    plan.validate().map_err(Failure::at("plan"))?;
    std::fs::create_dir_all(dir).map_err(Failure::io(dir))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Input(format!("--jobs: {e}")))?;
    let outcome = pool.install(|| run_scan(&plan)).map_err(Failure::at("scan"))?;
    let config = serde_json::to_value(&plan).expect("serializable");
    let header = header_lines("scan", &config, Some(plan.seed));
    let write_err = Failure::at("output");

    let p = dir.join("results.csv");
    let mut w = create(&p)?;
    write_results(&mut w, &header, plan.class, &outcome).map_err(&write_err)?;
    w.flush().map_err(Failure::io(&p))?;

    let p = dir.join("skipped.csv");
    let mut w = create(&p)?;
    write_skipped(&mut w, &header, plan.class, &outcome).map_err(&write_err)?;
    w.flush().map_err(Failure::io(&p))?;

    let p = dir.join("bins.csv");
    let mut w = create(&p)?;
    write_bins(&mut w, &header, &bin_max(&outcome.records, plan.dx)).map_err(&write_err)?;
    w.flush().map_err(Failure::io(&p))?;

    if let Ok(s) = summarize(&outcome.records) {
        let p = dir.join("summary.csv");
        let mut w = create(&p)?;
        write_summary(&mut w, &header, &s).map_err(&write_err)?;
        w.flush().map_err(Failure::io(&p))?;
        eprintln!(
            "{}: {} records, {} skipped, Y* = {:.6}, delta4 = {:.2e}",
            plan.class.as_str(),
            s.count,
            outcome.skipped.len(),
            s.y_star,
            s.delta4
        );
    } else {
        eprintln!("{}: no records ({} skipped)", plan.class.as_str(), outcome.skipped.len());
    }
    Ok(())
}

fn bounds(step: f64, out: &Path) -> Outcome {
    let curve = BoundCurve::on_grid(step).map_err(Failure::at("bounds"))?;
    let header = header_lines("bounds", &json!({ "step": step }), None);
    let mut w = create(out)?;
    curve.write_csv(&mut w, &header).map_err(Failure::at("output"))?;
    w.flush().map_err(Failure::io(out))?;
    let (x, y) = envelope_maximum(&curve);
    eprintln!("envelope maximum {y:.6} at x = {x:.6}");
    Ok(())
}

fn rect_check(c0: f64, c1: f64, c2: f64, fem: bool, method: Method, eps: f64, level: u32) -> Outcome {
    let m = match method {
        Method::Morph => FemMethod::Morph,
        Method::Remesh => FemMethod::Remesh,
    };
    if fem && !(eps > 0.0 && eps.is_finite()) {
        return Err(Failure::Input(format!("--eps {eps} must be positive")));
    }
    let report = rectangle_cosine_check(c0, c1, c2, fem.then_some((m, eps, level))).map_err(Failure::at("perturb"))?;
    let config = json!({ "c0": c0, "c1": c1, "c2": c2, "fem": fem, "method": m, "eps": eps, "level": level });
    let mut v = serde_json::to_value(&report).expect("serializable");
    let pass = report.conditions_hold
        && (report.slope - report.slope_formula).abs() <= 1e-10 * report.slope.abs().max(1.0)
        && report.fem.as_ref().is_none_or(|f| f.within_2pct && f.exceeds_rectangle_max);
    v["pass"] = json!(pass);
    v["meta"] = meta("perturb rect-check", config, None);
    emit_json(&v, None)
}
