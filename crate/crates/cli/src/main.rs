//! `aquafront` command-line tool.
//!
//! Exit codes: 0 success, 2 bad configuration or usage, 3 unparsable or
//! invalid input file, 4 failure while running or writing results.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aquafront::archive::ArchiveParams;
use aquafront::config::{load_network, LoadError, LoadedNetwork};
use aquafront::local_search::LocalSearchConfig;
use aquafront::metrics::{
    compare_fronts, front_from_csv, front_from_solutions, front_to_csv, front_to_svg, validate_front, write_atomic,
    CompareOptions, FrontIoError, MatchMode, MetricsError, DEFAULT_MATCH_TOLERANCE,
};
use aquafront::objectives::evaluate_indices;
use aquafront::orchestrator::{run_all, LsSchedule, Preset, RunConfig, RunManifest, RunStats, Scheme};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "aquafront", version, about = "Two-objective water network design with NSGA-II and a hypergrid archive")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimise a network and write the non-dominated front.
    Run(RunArgs),
    /// Compare two front CSV files.
    Compare(CompareArgs),
    /// Parse a network and optionally evaluate one design.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Network in INP format.
    #[arg(long)]
    network: PathBuf,
    /// Cost table CSV (applied to every pipe) or TOML sidecar.
    #[arg(long)]
    costs: Option<PathBuf>,
    #[arg(long, default_value = "D")]
    scheme: Scheme,
    /// Named parameter set (han, bla, nyt, goy); flags override it.
    #[arg(long)]
    preset: Option<Preset>,
    /// Population size (even).
    #[arg(long)]
    pop: Option<usize>,
    #[arg(long)]
    gens: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    /// Coupling interval in generations (scheme D).
    #[arg(long)]
    nlink: Option<usize>,
    /// Master seed.
    #[arg(long, env = "AQUAFRONT_SEED", default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    ls_start: Option<usize>,
    #[arg(long)]
    ls_dense_until: Option<usize>,
    #[arg(long)]
    ls_dense_period: Option<usize>,
    #[arg(long)]
    ls_sparse_period: Option<usize>,
    /// Search around at most this many archive members per pass.
    #[arg(long)]
    ls_max_solutions: Option<usize>,
    /// Archive cell widths as `cost,resilience`.
    #[arg(long, value_parser = parse_pair)]
    cell_widths: Option<[f64; 2]>,
    #[arg(long)]
    max_occupancy: Option<usize>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    pf1: PathBuf,
    #[arg(long)]
    pf2: PathBuf,
    /// Relative tolerance for objective equality.
    #[arg(long, default_value_t = DEFAULT_MATCH_TOLERANCE)]
    tol: f64,
    /// Match common members by option indices instead of objectives.
    #[arg(long)]
    decision_space: bool,
    /// Evaluation totals to copy into the report.
    #[arg(long)]
    fe1: Option<u64>,
    #[arg(long)]
    fe2: Option<u64>,
    /// Also write the report JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    costs: Option<PathBuf>,
    /// Comma-separated option indices, one per pipe.
    #[arg(long)]
    design: Option<String>,
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err("expected two comma-separated numbers".into());
    }
    let num = |p: &str| p.parse::<f64>().map_err(|_| format!("not a number: {p}"));
    Ok([num(parts[0])?, num(parts[1])?])
}

/// An error message and the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn parse(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        if e.is_parse_error() {
            Failure::parse(e.to_string())
        } else {
            Failure::config(e.to_string())
        }
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    write_atomic(path, contents).map_err(|e| Failure::runtime(e.to_string()))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Failure::runtime(e.to_string()))
}

fn build_config(args: &RunArgs, loaded: &LoadedNetwork) -> Result<RunConfig, Failure> {
    let preset = args.preset.or(loaded.config.preset);
    let mut config = preset.map(RunConfig::preset).unwrap_or_default();
    config.scheme = args.scheme;
    config.seed = args.seed;
    if let Some(v) = args.pop {
        config.population_size = v;
    }
    if let Some(v) = args.gens {
        config.generations = v;
    }
    if let Some(v) = args.runs {
        config.runs = v;
    }
    if let Some(v) = args.nlink {
        config.link_interval = v;
    }
    let schedule = &mut config.ls_schedule;
    let LsSchedule {
        start_gen,
        dense_until,
        dense_period,
        sparse_period,
    } = schedule;
    for (slot, flag) in [
        (start_gen, args.ls_start),
        (dense_until, args.ls_dense_until),
        (dense_period, args.ls_dense_period),
        (sparse_period, args.ls_sparse_period),
    ] {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    config.local_search = LocalSearchConfig {
        max_solutions: args.ls_max_solutions,
    };

    let net = &loaded.network;
    let mut archive: ArchiveParams = config.archive_for(net);
    if let Some(section) = &loaded.config.archive {
        archive = section.apply(archive);
    }
    if let Some(w) = args.cell_widths {
        archive.cell_widths = w;
    }
    if let Some(m) = args.max_occupancy {
        archive.max_occupancy = m;
    }
    config.archive = Some(archive);
    config.validate().map_err(|e| Failure::config(e.to_string()))?;
    Ok(config)
}

#[derive(Serialize)]
struct StatsFile<'a> {
    fe_total: u64,
    front_size: usize,
    runs: &'a [RunStats],
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(Failure::config("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::runtime(e.to_string()))?;
    }
    let loaded = load_network(&args.network, args.costs.as_deref())?;
    let config = build_config(&args, &loaded)?;
    let net = &loaded.network;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::runtime(format!("cannot create {}: {e}", args.out.display())))?;

    let merged = run_all(&config, net).map_err(|e| Failure::config(e.to_string()))?;
    let front = front_from_solutions(&merged.nd_set);
    let manifest = RunManifest::new(env!("CARGO_PKG_VERSION"), &args.network.display().to_string(), &config, net);
    let stats = StatsFile {
        fe_total: merged.fe_total,
        front_size: front.len(),
        runs: &merged.runs,
    };

    write_file(&args.out.join("front.csv"), front_to_csv(&front).as_bytes())?;
    if !front.is_empty() {
        write_file(&args.out.join("front.svg"), front_to_svg(&front).as_bytes())?;
    }
    write_file(&args.out.join("manifest.json"), to_json(&manifest)?.as_bytes())?;
    write_file(&args.out.join("stats.json"), to_json(&stats)?.as_bytes())?;
    let rejected: u64 = merged.runs.iter().map(|r| r.rejected_full_count).sum();
    if rejected > 0 {
        eprintln!("warning: {rejected} archive insertions were refused by full cells; consider wider cells or a larger --max-occupancy");
    }
    println!(
        "{} non-dominated solutions from {} evaluations written to {}",
        front.len(),
        merged.fe_total,
        args.out.display()
    );
    Ok(())
}

fn read_front(path: &Path, side: u8, tol: f64) -> Result<Vec<aquafront::metrics::FrontPoint>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    let front = front_from_csv(&text).map_err(|e| match e {
        FrontIoError::Malformed { line, message } => Failure::parse(format!("{}: line {line}: {message}", path.display())),
        other => Failure::parse(format!("{}: {other}", path.display())),
    })?;
    validate_front(&front, tol, side).map_err(|e| match e {
        MetricsError::InputNotAFront { index, other, reason, .. } => Failure::parse(format!(
            "{}: row on line {} {reason} the row on line {}",
            path.display(),
            index + 2,
            other + 2
        )),
        MetricsError::NonFinite { index, .. } => {
            Failure::parse(format!("{}: line {}: non-finite objective", path.display(), index + 2))
        }
        other => Failure::parse(other.to_string()),
    })?;
    Ok(front)
}

fn cmd_compare(args: CompareArgs) -> Result<(), Failure> {
    if !(args.tol.is_finite() && args.tol >= 0.0) {
        return Err(Failure::config("--tol must be a non-negative number"));
    }
    let pf1 = read_front(&args.pf1, 1, args.tol)?;
    let pf2 = read_front(&args.pf2, 2, args.tol)?;
    let opts = CompareOptions {
        tol: args.tol,
        match_mode: if args.decision_space {
            MatchMode::Decision
        } else {
            MatchMode::Objective
        },
    };
    let mut report = compare_fronts(&pf1, &pf2, &opts).map_err(|e| Failure::parse(e.to_string()))?;
    report.check_identities().map_err(Failure::runtime)?;
    report.fe1 = args.fe1;
    report.fe2 = args.fe2;
    let json = to_json(&report)?;
    if let Some(out) = &args.out {
        write_file(out, json.as_bytes())?;
    }
    print!("{json}");
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    let loaded = load_network(&args.network, args.costs.as_deref())?;
    let net = &loaded.network;
    let space: f64 = (0..net.design_len()).map(|k| net.option_table_of(k).len() as f64).product();
    println!(
        "{}: {} junctions, {} reservoirs, {} pipes, {} pumps, {space:.0} designs",
        args.network.display(),
        net.junctions().len(),
        net.reservoirs().len(),
        net.pipes().len(),
        net.pumps().len()
    );
    let Some(design) = &args.design else {
        return Ok(());
    };
    let indices = design
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| Failure::config(format!("--design must be comma-separated option indices, got {design:?}")))?;
    if indices.len() != net.design_len() {
        return Err(Failure::config(format!(
            "--design has {} entries but the network has {} pipes",
            indices.len(),
            net.design_len()
        )));
    }
    for (k, &i) in indices.iter().enumerate() {
        if i >= net.option_table_of(k).len() {
            return Err(Failure::config(format!(
                "--design entry {} for pipe {} is {i}, but only {} options exist",
                k + 1,
                net.pipes()[k].id,
                net.option_table_of(k).len()
            )));
        }
    }
    let e = evaluate_indices(net, &indices);
    println!("cost {:.16e}", e.cost);
    println!("resilience {:.16e}", e.resilience);
    println!("feasible {}", e.feasible);
    println!("head_deficit {:.16e}", e.total_head_deficit);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
