//! `impopt` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use impopt::controls::{from_ordinary, GeneralizedControl, OrdinaryControl};
use impopt::curves::{refined_distance, SampledCurve};
use impopt::dynamics::{integrate_auxiliary, ControlAffineSystem, IntegrationOptions};
use impopt::problems::{fixtures, problem_by_name, system_by_name, ProblemFile};
use impopt::solver::{
    gap_probe, solve_relaxed, solve_restricted, GapOptions, RelaxedProblem, RelaxedSolution, SolverOptions,
    DEFAULT_EPSILONS, DEFAULT_ETAS,
};

const DEFAULT_N: usize = 200;

#[derive(Parser)]
#[command(name = "impopt", version, about = "Impulsive optimal control with Fréchet generalized controls")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fréchet distance between two curve or control files.
    Distance {
        a: PathBuf,
        b: PathBuf,
        /// Refinement step.
        #[arg(long, default_value_t = 0.01)]
        refine: f64,
        /// Add the length difference (d⁺).
        #[arg(long)]
        strengthened: bool,
    },
    /// Integrates the auxiliary system for a control file.
    Simulate {
        /// Problem name, system name or problem file.
        problem: String,
        control: PathBuf,
        /// RK4 steps per control segment.
        #[arg(long, default_value_t = 64)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solves the relaxed problem.
    Solve {
        problem: String,
        #[command(flatten)]
        solve: SolveArgs,
        /// Solve the restricted problem `v ≥ eta` instead.
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Lavrentiev-gap probe.
    Gap {
        problem: String,
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long, value_delimiter = ',')]
        etas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
    },
    /// Writes built-in fixture files.
    Example {
        name: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SolveArgs {
    /// Number of grid intervals.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Parameter budget.
    #[arg(long = "S")]
    s: Option<f64>,
    /// Random starts.
    #[arg(long)]
    seeds: Option<usize>,
    /// Base seed; `IMPOPT_SEED` takes precedence.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Heisenberg drift: linear or constant.
    #[arg(long)]
    drift: Option<String>,
    /// Heisenberg target height.
    #[arg(long = "C")]
    c: Option<f64>,
    /// Exponent of gap2.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<impopt::Error>() {
                Some(impopt::Error::Infeasible { .. }) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Distance {
            a,
            b,
            refine,
            strengthened,
        } => cmd_distance(&a, &b, refine, strengthened),
        Command::Simulate {
            problem,
            control,
            steps,
            out,
        } => cmd_simulate(&problem, &control, steps, out.as_deref()),
        Command::Solve { problem, solve, eta } => cmd_solve(&problem, &solve, eta),
        Command::Gap {
            problem,
            solve,
            etas,
            epsilons,
        } => cmd_gap(&problem, &solve, etas, epsilons),
        Command::Example { name, out } => cmd_example(&name, &out),
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

enum CurveFile {
    Control(GeneralizedControl),
    Curve(SampledCurve),
}

impl CurveFile {
    fn load(path: &Path) -> Result<Self> {
        let value = read_json(path)?;
        let parsed = if value.get("T").is_some() {
            serde_json::from_value(value).map(CurveFile::Control)
        } else {
            serde_json::from_value(value).map(CurveFile::Curve)
        };
        parsed.with_context(|| format!("{}: not a curve or generalized control", path.display()))
    }

    fn curve(&self) -> SampledCurve {
        match self {
            CurveFile::Control(g) => g.truncated().into_base(),
            CurveFile::Curve(c) => c.clone(),
        }
    }
}

fn cmd_distance(a: &Path, b: &Path, refine: f64, strengthened: bool) -> Result<()> {
    if !(refine > 0.0) {
        bail!("--refine must be positive");
    }
    let (ca, cb) = (CurveFile::load(a)?, CurveFile::load(b)?);
    let d = match (&ca, &cb) {
        (CurveFile::Control(x), CurveFile::Control(y)) if strengthened => x.distance_plus(y, refine)?,
        _ => refined_distance(&ca.curve(), &cb.curve(), refine, strengthened)?,
    };
    println!("{d}");
    Ok(())
}

/// System and initial state for `simulate`: a problem file, a problem name or
/// a bare system name (started from the origin).
fn load_system(arg: &str) -> Result<(ControlAffineSystem, Vec<f64>)> {
    if Path::new(arg).is_file() {
        let p = ProblemFile::from_json(&fs::read_to_string(arg)?).with_context(|| format!("parsing {arg}"))?;
        let p = p.build()?;
        return Ok((p.sys, p.x0));
    }
    if let Ok(p) = problem_by_name(arg) {
        return Ok((p.sys, p.x0));
    }
    let sys = system_by_name(arg)?;
    let x0 = vec![0.0; sys.state_dim()];
    Ok((sys, x0))
}

fn load_control(path: &Path) -> Result<GeneralizedControl> {
    let value = read_json(path)?;
    if value.get("times").is_some() {
        let u: OrdinaryControl =
            serde_json::from_value(value).with_context(|| format!("{}: invalid ordinary control", path.display()))?;
        Ok(from_ordinary(&u))
    } else {
        serde_json::from_value(value).with_context(|| format!("{}: invalid generalized control", path.display()))
    }
}

fn cmd_simulate(problem: &str, control: &Path, steps: usize, out: Option<&Path>) -> Result<()> {
    if steps == 0 {
        bail!("--steps must be positive");
    }
    let (sys, x0) = load_system(problem)?;
    let gc = load_control(control)?;
    let opts = IntegrationOptions {
        steps_per_segment: steps,
        ..Default::default()
    };
    let traj = integrate_auxiliary(&sys, &gc, &x0, &opts)?;
    let end = traj.endpoint()?;
    println!("endpoint: {}", serde_json::to_string(&end)?);
    if let Some(dir) = out {
        write_file(dir, "trajectory.csv", &traj.to_csv())?;
        write_file(dir, "trajectory.json", &serde_json::to_string_pretty(traj.curve())?)?;
    }
    Ok(())
}

fn seed(args: &SolveArgs) -> Result<u64> {
    match std::env::var("IMPOPT_SEED") {
        Ok(s) => s.trim().parse().with_context(|| format!("IMPOPT_SEED must be an integer, got '{s}'")),
        Err(_) => Ok(args.seed),
    }
}

/// Problem and interval count: a problem file or a built-in name, with the
/// Heisenberg and gap2 flags applied to bare names.
fn load_problem(arg: &str, args: &SolveArgs) -> Result<(RelaxedProblem, usize)> {
    let (mut p, file_n) = if Path::new(arg).is_file() {
        let f = ProblemFile::from_json(&fs::read_to_string(arg)?).with_context(|| format!("parsing {arg}"))?;
        (f.build()?, f.intervals)
    } else {
        let name = match arg {
            "heisenberg" => {
                let drift = args.drift.as_deref().unwrap_or("linear");
                let c = args.c.unwrap_or(if drift == "constant" { 1.0 } else { 30.0 });
                format!("heisenberg:{drift}:{c}")
            }
            "gap2" => format!("gap2:{}", args.alpha.unwrap_or(1.0)),
            _ => arg.to_string(),
        };
        (problem_by_name(&name)?, None)
    };
    if let Some(s) = args.s {
        p = p.with_budget(s)?;
    }
    Ok((p, args.n.or(file_n).unwrap_or(DEFAULT_N)))
}

fn solver_options(args: &SolveArgs) -> Result<SolverOptions> {
    let mut opts = SolverOptions {
        seed: seed(args)?,
        ..Default::default()
    };
    if let Some(k) = args.seeds {
        opts.starts = k;
    }
    Ok(opts)
}

fn summary(s: &RelaxedSolution) -> String {
    if s.impulse_arcs.is_empty() {
        "no impulse arc".to_string()
    } else if s.ends_in_impulse_arc() && s.v_nonincreasing(0.02) {
        "v monotone decreasing; terminal impulse arc".to_string()
    } else {
        s.impulse_arcs
            .iter()
            .map(|a| format!("impulse arc detected at s∈[{:.3},{:.3}]", a.s_start, a.s_end))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn cmd_solve(problem: &str, args: &SolveArgs, eta: Option<f64>) -> Result<()> {
    let (p, n) = load_problem(problem, args)?;
    let opts = solver_options(args)?;
    let s = match eta {
        Some(eta) => solve_restricted(&p, eta, n, &opts)?,
        None => solve_relaxed(&p, n, &opts)?,
    };
    println!("cost {:.6}  residual {:.3e}  intervals {}", s.cost, s.residual, s.intervals());
    println!("{}", summary(&s));
    if let Some(dir) = &args.out {
        write_file(dir, "solution.json", &serde_json::to_string_pretty(&s)?)?;
        write_file(dir, "solution.csv", &s.to_csv())?;
    }
    Ok(())
}

fn cmd_gap(problem: &str, args: &SolveArgs, etas: Option<Vec<f64>>, epsilons: Option<Vec<f64>>) -> Result<()> {
    let (p, n) = load_problem(problem, args)?;
    let opts = GapOptions {
        solver: solver_options(args)?,
        ..Default::default()
    };
    let etas = etas.unwrap_or_else(|| DEFAULT_ETAS.to_vec());
    let epsilons = epsilons.unwrap_or_else(|| DEFAULT_EPSILONS.to_vec());
    let report = gap_probe(&p, &etas, &epsilons, n, &opts)?;
    print!("{}", report.table());
    if let Some(dir) = &args.out {
        write_file(dir, "gap.json", &serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

fn cmd_example(name: &str, out: &Path) -> Result<()> {
    for (file, value) in fixtures(name)? {
        let path = write_file(out, &file, &serde_json::to_string_pretty(&value)?)?;
        println!("{}", path.display());
    }
    Ok(())
}
