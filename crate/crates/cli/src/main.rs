//! `fairshare`: split shared-ride costs, benchmark the rules, verify the
//! closed form against its oracles, and generate synthetic road networks.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fairshare_core::eval_harness::{run_experiment_on, ExperimentConfig, ExperimentReport};
use fairshare_core::generate::{generate, Family};
use fairshare_core::instance_file::InstanceFile;
use fairshare_core::verify::{run_verification, VerifyConfig, VerifyReport};
use fairshare_core::{allocate, Allocation, AllocationFlag, Error, Mode, Result, Rule};

#[derive(Parser)]
#[command(name = "fairshare", version, about = "Fair cost sharing for last-mile shared rides")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split one ride's cost among its passengers.
    Allocate(AllocateArgs),
    /// Run the seeded benchmark and write report.csv and report.json.
    Bench(BenchArgs),
    /// Check the closed form and solvers against their oracles.
    Verify(VerifyArgs),
    /// Write a synthetic road network as an edge-list CSV.
    Gen(GenArgs),
}

#[derive(Args)]
struct AllocateArgs {
    /// Instance JSON (graph + depot + vertices, or an inline `delta` matrix).
    #[arg(long)]
    instance: PathBuf,
    /// exact, shapo, shapo-routing, depot, shortcut or reroute.
    #[arg(long)]
    rule: String,
    /// Treat the ride as a round trip back to the depot.
    #[arg(long)]
    routing_game: bool,
    /// Print the allocation as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment config JSON; omitted fields take their defaults.
    #[arg(long, env = "FAIRSHARE_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "FAIRSHARE_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "FAIRSHARE_ITERATIONS")]
    iterations: Option<usize>,
    /// Leave timings out so repeated runs write identical files.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 8)]
    n_max: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GenArgs {
    /// line, grid or euclidean.
    #[arg(long)]
    family: String,
    #[arg(long)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// A command outcome: `Ok(false)` means it ran but found failures.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Allocate(args) => cmd_allocate(&args).map(|_| true),
        Command::Bench(args) => cmd_bench(&args).map(|_| true),
        Command::Verify(args) => Ok(cmd_verify(&args)),
        Command::Gen(args) => cmd_gen(&args).map(|_| true),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_capacity() { 2 } else { 1 })
        }
    }
}

fn cmd_allocate(args: &AllocateArgs) -> Result<()> {
    let rule: Rule = args.rule.parse()?;
    let (file, base) = InstanceFile::load(&args.instance)?;
    let mut inst = file.to_instance(&base)?;
    let mut model = file.exact_model();
    if args.routing_game {
        inst = inst.with_mode(Mode::RoutingGame);
        model = model.in_mode(Mode::RoutingGame);
    }
    let a = allocate(&inst, rule, model)?;
    for flag in &a.flags {
        eprintln!("warning: {}", describe(*flag));
    }
    if args.json {
        emit(a.to_json() + "\n");
    } else {
        emit(allocation_table(&a));
    }
    Ok(())
}

/// Writes to stdout, ignoring a closed pipe (`fairshare ... | head`).
fn emit(text: impl AsRef<str>) {
    let _ = std::io::stdout().lock().write_all(text.as_ref().as_bytes());
}

fn describe(flag: AllocationFlag) -> &'static str {
    match flag {
        AllocationFlag::EqualSplitFallback => {
            "every proportionality weight is zero; the cost was split equally"
        }
        AllocationFlag::NegativeMargin => {
            "some re-routed margins are negative; the given order is not optimal"
        }
    }
}

fn allocation_table(a: &Allocation) -> String {
    let mut out = format!("rule {} ({})\n", a.rule, a.cost_model);
    out.push_str("passenger  payment\n");
    for (k, p) in a.payments.iter().enumerate() {
        out.push_str(&format!("{:<9}  {p:>7.2}\n", k + 1));
    }
    out.push_str(&format!("{:<9}  {:>7.2}\n", "total", a.total));
    out
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let (mut cfg, base) = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (ExperimentConfig::from_json(&text)?, base)
        }
        None => (ExperimentConfig::default(), PathBuf::new()),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(iterations) = args.iterations {
        cfg.iterations = iterations;
    }
    if args.no_timing {
        cfg.timing = false;
    }
    cfg.validate()?;

    let graph = cfg.load_graph(&base)?;
    let report = run_experiment_on(&cfg, &graph)?;

    fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let csv_path = args.out.join("report.csv");
    let json_path = args.out.join("report.json");
    fs::write(&csv_path, report.to_csv()?).map_err(|e| io_error(&csv_path, e))?;
    fs::write(&json_path, report.to_json() + "\n").map_err(|e| io_error(&json_path, e))?;
    emit(report_table(&report));
    emit(format!("wrote {} and {}\n", csv_path.display(), json_path.display()));
    Ok(())
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn report_table(report: &ExperimentReport) -> String {
    let mut out = format!(
        "{:<14} {:>2} {:>9} {:>8} {:>8} {:>8} {:>10}\n",
        "rule", "n", "percent", "mae", "rmse", "max", "mean_us"
    );
    for r in &report.rows {
        let micros = r
            .mean_seconds
            .map(|s| format!("{:.2}", s * 1e6))
            .unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<14} {:>2} {:>8.2}% {:>8.2} {:>8.2} {:>8.2} {:>10}\n",
            r.rule.as_str(),
            r.n,
            r.percent * 100.0,
            r.mae,
            r.rmse,
            r.max_error,
            micros
        ));
    }
    out
}

fn cmd_verify(args: &VerifyArgs) -> bool {
    let report = run_verification(&VerifyConfig {
        n_max: args.n_max,
        trials: args.trials,
        seed: args.seed,
    });
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if args.json {
        emit(serde_json::to_string_pretty(&report).expect("report serializes") + "\n");
    } else {
        emit(verify_table(&report));
    }
    report.passed()
}

fn verify_table(report: &VerifyReport) -> String {
    let mut out = String::new();
    for c in &report.checks {
        out.push_str(&format!(
            "{:<40} {:>7} cases  max deviation {:.3e}\n",
            c.name, c.cases, c.max_deviation
        ));
    }
    for f in &report.failures {
        out.push_str(&format!(
            "FAILED {}: seed {} n {} i {} (deviation {:.3e})\n",
            f.check, f.seed, f.n, f.i, f.deviation
        ));
    }
    out.push_str(if report.passed() { "PASS" } else { "FAIL" });
    out.push_str(&format!(
        " (max deviation {:.3e}, {} failures)\n",
        report.max_deviation(),
        report.failures.len()
    ));
    out
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let family: Family = args.family.parse()?;
    let g = generate(family, args.size, args.seed)?;
    fs::write(&args.out, g.to_edge_list()).map_err(|e| io_error(&args.out, e))?;
    emit(format!(
        "wrote {} ({} vertices, {} edges)\n",
        args.out.display(),
        g.num_vertices(),
        g.num_edges()
    ));
    Ok(())
}
