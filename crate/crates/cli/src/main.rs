use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use stlid::case_study::{self, SummaryRow, Variant};
use stlid::problem::{parse_problem, ProblemError};
use stlid::synthesis::{solve_built, SynthesisModel};
use stlid::{build, parse, Monitor, ParseError, Signal, SynthesisError, SynthesisProblem, SynthesisResult};
use stlid_milp::{write_lp, SolveStatus, SolverOptions};

const EXIT_OK: u8 = 0;
const EXIT_VIOLATED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_LIMIT: u8 = 3;

#[derive(Parser)]
#[command(name = "stlid", version, about = "Signal temporal logic with integral and derivative predicates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a signal against a formula.
    Monitor(MonitorArgs),
    /// Synthesize a minimum-input trajectory for a problem file.
    Synth(SynthArgs),
    /// Write the mixed-integer program of a problem as an LP file.
    ExportLp(ExportArgs),
    /// Solve the built-in planar mission and write plot data.
    CaseStudy(CaseStudyArgs),
}

#[derive(Args)]
struct MonitorArgs {
    /// Formula file.
    #[arg(long)]
    spec: PathBuf,
    /// CSV with header `t,<dim>,...`.
    #[arg(long)]
    signal: PathBuf,
    /// Step at which the formula is evaluated.
    #[arg(long, default_value_t = 0)]
    step: usize,
    /// Print robustness of every subformula and step.
    #[arg(long)]
    per_node: bool,
}

#[derive(Args)]
struct SolveArgs {
    /// Time limit in seconds.
    #[arg(long, value_parser = positive_f64)]
    time_limit: Option<f64>,
    /// Branch-and-bound node limit.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    node_limit: Option<u64>,
    /// Emit both implications of every satisfaction binary.
    #[arg(long)]
    two_sided: bool,
    /// Print solver progress to stderr.
    #[arg(short, long)]
    verbose: bool,
}

impl SolveArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            time_limit: self.time_limit.map(Duration::from_secs_f64),
            node_limit: self.node_limit,
            log_every: self.verbose.then_some(10_000),
            ..SolverOptions::default()
        }
    }
}

#[derive(Args)]
struct ProblemArgs {
    /// Problem file (`key = value` lines).
    #[arg(long)]
    system: Option<PathBuf>,
    /// Built-in mission variant: full, no_int, no_der or none.
    #[arg(long)]
    variant: Option<Variant>,
    /// Formula file replacing the problem's `spec`.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Number of steps.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, value_parser = positive_f64)]
    big_m: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solve: SolveArgs,
    /// Also write the LP file here.
    #[arg(long)]
    export_lp: Option<PathBuf>,
    /// Directory for `trajectory.csv` and `summary.csv`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Emit both implications of every satisfaction binary.
    #[arg(long)]
    two_sided: bool,
    /// Output path; stdout when omitted.
    #[arg(long)]
    export_lp: Option<PathBuf>,
}

#[derive(Args)]
struct CaseStudyArgs {
    /// Variant to solve; all four when omitted.
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long, default_value = "case_study")]
    out_dir: PathBuf,
    /// Solve the variants on separate threads.
    #[arg(long)]
    parallel: bool,
    /// Also write `<variant>.lp` files into the output directory.
    #[arg(long)]
    export_lp: bool,
    #[arg(long, value_parser = positive_f64)]
    big_m: Option<f64>,
    #[command(flatten)]
    solve: SolveArgs,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

/// Error carrying its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { code: EXIT_USAGE, error: e.into() }
    }
}

fn usage(error: anyhow::Error) -> Failure {
    Failure { code: EXIT_USAGE, error }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn parse_spec(path: &Path) -> Result<stlid::Formula> {
    let text = read(path)?;
    let text = text.trim_end();
    parse(text).map_err(|e: ParseError| anyhow!("invalid formula in {}\n{}", path.display(), e.render(text)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Monitor(a) => monitor(a),
        Command::Synth(a) => synth(a),
        Command::ExportLp(a) => export(a),
        Command::CaseStudy(a) => run_case_study(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn monitor(a: MonitorArgs) -> Result<u8, Failure> {
    let f = parse_spec(&a.spec)?;
    let signal = Signal::from_csv_path(&a.signal).with_context(|| format!("signal {}", a.signal.display()))?;
    let m = Monitor::new(&signal, &f).map_err(|e| usage(e.into()))?;
    let report = m.robustness(a.step, a.per_node).map_err(|e| usage(e.into()))?;
    let satisfied = m.sat(a.step).map_err(|e| usage(e.into()))?;
    if a.per_node {
        println!("{:>5} {:>5} {:>14}  subformula", "node", "step", "robustness");
        for n in &report.per_node {
            println!("{:>5} {:>5} {:>14.6}  {}", n.node, n.step, n.value, n.label);
        }
    }
    println!("robustness {:.6}, {}", report.value, if satisfied { "SATISFIED" } else { "VIOLATED" });
    Ok(if satisfied { EXIT_OK } else { EXIT_VIOLATED })
}

fn load_problem(a: &ProblemArgs) -> Result<SynthesisProblem, Failure> {
    let mut p = match (&a.system, a.variant) {
        (Some(path), None) => {
            let text = read(path)?;
            parse_problem(&text)
                .map_err(|e| match e {
                    ProblemError::Spec { error, text } => anyhow!("invalid spec in {}\n{}", path.display(), error.render(&text)),
                    other => anyhow!("{}: {other}", path.display()),
                })?
                .0
        }
        (None, Some(v)) => case_study::problem(v),
        _ => return Err(usage(anyhow!("give exactly one of --system or --variant"))),
    };
    if let Some(spec) = &a.spec {
        p.spec = parse_spec(spec)?;
    }
    if let Some(h) = a.horizon {
        p.horizon = h;
    }
    if let Some(m) = a.big_m {
        p.big_m = m;
    }
    Ok(p)
}

fn build_model(p: &SynthesisProblem) -> Result<SynthesisModel, Failure> {
    build(p).map_err(|e| usage(anyhow!(e)))
}

fn status_code(r: &SynthesisResult) -> u8 {
    match r.status {
        SolveStatus::Optimal => EXIT_OK,
        SolveStatus::Infeasible | SolveStatus::Unbounded => EXIT_VIOLATED,
        SolveStatus::NodeLimit | SolveStatus::TimeLimit => EXIT_LIMIT,
    }
}

fn solve(p: &SynthesisProblem, sm: &SynthesisModel, opts: &SolverOptions) -> Result<SynthesisResult, Failure> {
    solve_built(p, sm, opts).map_err(|e: SynthesisError| Failure { code: EXIT_VIOLATED, error: anyhow!(e) })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn synth(a: SynthArgs) -> Result<u8, Failure> {
    let mut p = load_problem(&a.problem)?;
    p.one_sided = !a.solve.two_sided;
    let sm = build_model(&p)?;
    if let Some(path) = &a.export_lp {
        write_file(path, &write_lp(&sm.model))?;
    }
    let r = solve(&p, &sm, &a.solve.options())?;
    println!("status {:?}", r.status);
    match r.cost {
        Some(c) => println!("cost {c:.6}"),
        None => println!("cost -"),
    }
    if let Some(m) = &r.monitor {
        println!("robustness {:.6}, monitor check {}", m.value, if m.value >= -1e-6 { "PASS" } else { "FAIL" });
    }
    println!(
        "nodes {}, bound {:.6}, time {:.2}s",
        r.stats.nodes,
        r.best_bound,
        r.stats.wall_time.as_secs_f64()
    );
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        if r.has_solution() {
            write_file(&dir.join("trajectory.csv"), &case_study::trajectory_csv(&p.system, &r))?;
        }
        let summary = format!(
            "status,cost,robustness,nodes,binaries,constraints\n{:?},{},{},{},{},{}\n",
            r.status,
            r.cost.map_or(String::new(), |c| format!("{c:.6}")),
            r.monitor.as_ref().map_or(String::new(), |m| format!("{:.6}", m.value)),
            r.stats.nodes,
            r.num_binaries,
            r.num_constraints
        );
        write_file(&dir.join("summary.csv"), &summary)?;
    }
    Ok(status_code(&r))
}

fn export(a: ExportArgs) -> Result<u8, Failure> {
    let mut p = load_problem(&a.problem)?;
    p.one_sided = !a.two_sided;
    let sm = build_model(&p)?;
    let text = write_lp(&sm.model);
    match &a.export_lp {
        Some(path) => {
            write_file(path, &text)?;
            eprintln!(
                "wrote {} ({} variables, {} binaries, {} constraints)",
                path.display(),
                sm.model.num_vars(),
                sm.model.num_binaries(),
                sm.model.num_constraints()
            );
        }
        None => print!("{text}"),
    }
    Ok(EXIT_OK)
}

fn solve_variant(v: Variant, a: &CaseStudyArgs) -> Result<(SynthesisProblem, SynthesisModel, SynthesisResult), Failure> {
    let mut p = case_study::problem(v);
    p.one_sided = !a.solve.two_sided;
    if let Some(m) = a.big_m {
        p.big_m = m;
    }
    let sm = build_model(&p)?;
    let r = solve(&p, &sm, &a.solve.options())?;
    Ok((p, sm, r))
}

fn run_case_study(a: CaseStudyArgs) -> Result<u8, Failure> {
    let variants: Vec<Variant> = match a.variant {
        Some(v) => vec![v],
        None => Variant::ALL.to_vec(),
    };
    fs::create_dir_all(&a.out_dir).with_context(|| format!("cannot create {}", a.out_dir.display()))?;
    let solved: Vec<Result<_, Failure>> = if a.parallel {
        let a = &a;
        std::thread::scope(|s| {
            let handles: Vec<_> = variants.iter().map(|&v| s.spawn(move || solve_variant(v, a))).collect();
            handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
        })
    } else {
        variants.iter().map(|&v| solve_variant(v, &a)).collect()
    };
    let mut runs = Vec::new();
    for (v, s) in variants.iter().zip(solved) {
        runs.push((*v, s?));
    }
    let mut code = EXIT_OK;
    for (v, (p, sm, r)) in &runs {
        let sys = &p.system;
        let base = a.out_dir.join(v.name());
        if a.export_lp {
            write_file(&base.with_extension("lp"), &write_lp(&sm.model))?;
        }
        if r.has_solution() {
            write_file(&path_with_suffix(&base, "_trajectory.csv"), &case_study::trajectory_csv(sys, r))?;
            write_file(&path_with_suffix(&base, "_velocity.csv"), &case_study::velocity_csv(sys, r))?;
            write_file(&path_with_suffix(&base, "_acceleration.csv"), &case_study::acceleration_csv(sys, r))?;
        }
        code = code.max(status_code(r));
    }
    let rows: Vec<SummaryRow> = runs.iter().map(|(v, (_, _, r))| SummaryRow { variant: *v, result: r }).collect();
    write_file(&a.out_dir.join("summary.csv"), &case_study::summary_csv(&rows))?;
    let text = case_study::summary_text(&rows);
    write_file(&a.out_dir.join("summary.txt"), &text)?;
    print!("{text}");
    for (v, (_, _, r)) in &runs {
        if let Some(m) = &r.monitor {
            println!("{v}: monitor check {} (robustness {:.6})", if m.value >= -1e-6 { "PASS" } else { "FAIL" }, m.value);
        }
    }
    Ok(code)
}

fn path_with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
