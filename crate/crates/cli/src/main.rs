//! `genmakespan` command-line front end.
//!
//! Exit codes: 0 success, 1 infeasible or other failure, 2 bad input
//! (parse, I/O, validation, arguments), 3 resource limit, 4 internal check
//! failure.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use genmakespan::eval::{brute_force_opt, check_lp_constraints, evaluate_mc, Evaluator, LpCheckMode};
use genmakespan::instances::{
    gen_general_gap, gen_line_gap, gen_random, FamilyKind, InstanceFile, ResultFile, SizeProfile,
};
use genmakespan::lp::LpRelaxation;
use genmakespan::rounding::{solve_end_to_end, RounderChoice, SolverConfig};
use genmakespan::{seeds, Error};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "genmakespan", version, about = "Stochastic makespan minimization over set systems")]
struct Cli {
    /// Worker threads for the parallel parts (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write an instance file.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
        /// Output path; stdout when omitted.
        #[arg(short, long, global = true)]
        output: Option<PathBuf>,
    },
    /// Solve an instance and write a result file.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Output path; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Sweep a gap family and print one table row per parameter.
    GapExperiment {
        #[arg(value_enum)]
        family: GapFamily,
        /// Comma-separated depths (line) or group sizes (general).
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<u32>,
        /// Monte Carlo samples per makespan estimate.
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random constraints checked per k when exhaustive checking is too large.
        #[arg(long, default_value_t = 20)]
        sampled_cuts: usize,
    },
    /// Compare the solver with exhaustive search and append a CSV row.
    CompareOracle {
        instance: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// CSV ledger to append to; created with a header if missing.
        #[arg(long, default_value = "oracle.csv")]
        ledger: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum GenKind {
    /// Nested intervals over 2^H points.
    LineGap {
        #[arg(long = "depth", short = 'H')]
        h: u32,
    },
    /// q groups of q Bernoulli(1/q) tasks.
    GeneralGap {
        #[arg(long, short)]
        q: usize,
    },
    /// Random geometric instance.
    Random {
        /// line, tree, rectangles or disks.
        #[arg(long)]
        family: FamilyKind,
        #[arg(long, short)]
        n: usize,
        #[arg(long, short)]
        t: usize,
        /// bernoulli[:P_LOW:P_HIGH:V_LOW:V_HIGH] or finite[:SUPPORT:MAX].
        #[arg(long, default_value = "bernoulli")]
        profile: SizeProfile,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GapFamily {
    Line,
    General,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RounderArg {
    Auto,
    TreeUfp,
    SizeGroups,
    Exhaustive,
}

impl From<RounderArg> for RounderChoice {
    fn from(r: RounderArg) -> Self {
        match r {
            RounderArg::Auto => Self::Auto,
            RounderArg::TreeUfp => Self::TreeUfp,
            RounderArg::SizeGroups => Self::SizeGroups,
            RounderArg::Exhaustive => Self::Exhaustive,
        }
    }
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Right-hand side constant of the relaxation.
    #[arg(long, default_value_t = 4.0)]
    b: f64,
    /// Scaling constant of the rounding.
    #[arg(long, default_value_t = 4.0)]
    alpha_bar: f64,
    /// Samples per guess when the exact evaluation is too large.
    #[arg(long, default_value_t = 10_000)]
    inner_samples: u64,
    /// Samples for the final estimate.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Independent runs of the tree rounder.
    #[arg(long, default_value_t = 64)]
    repetitions: usize,
    /// Separate only at k = 2^(2^l).
    #[arg(long)]
    fast_k: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    max_cuts: usize,
    #[arg(long, default_value_t = 5)]
    max_retries: usize,
    #[arg(long, value_enum, default_value = "auto")]
    rounder: RounderArg,
    /// Fail when a post-rounding check does not hold.
    #[arg(long)]
    strict: bool,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            b: self.b,
            alpha_bar: self.alpha_bar,
            inner_samples: self.inner_samples,
            final_samples: self.samples,
            repetitions: self.repetitions,
            fast_k: self.fast_k,
            seed: self.seed,
            max_cuts: self.max_cuts,
            max_retries: self.max_retries,
            rounder: self.rounder.into(),
            strict: self.strict,
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parse(_) | Error::Io(_) | Error::Validation(_) | Error::Argument(_) => 2,
        Error::ResourceLimit(_) => 3,
        Error::Internal(_) => 4,
        Error::Infeasible(_) | Error::Lp(_) => 1,
    }
}

fn emit(text: &str, output: Option<&Path>) -> genmakespan::Result<()> {
    match output {
        Some(path) => std::fs::write(path, format!("{text}\n"))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_gen(kind: &GenKind, output: Option<&Path>) -> genmakespan::Result<()> {
    let file = match kind {
        GenKind::LineGap { h } => gen_line_gap(*h)?,
        GenKind::GeneralGap { q } => gen_general_gap(*q)?,
        GenKind::Random {
            family,
            n,
            t,
            profile,
            seed,
        } => gen_random(*family, *n, profile, *t, *seed)?,
    };
    emit(&file.to_json()?, output)
}

fn cmd_solve(path: &Path, config: SolverConfig, output: Option<&Path>) -> genmakespan::Result<()> {
    let file = InstanceFile::load(path)?;
    let problem = file.to_problem()?;
    let solution = solve_end_to_end(&problem, &config)?;
    log::info!(
        "{}: chose {} tasks, makespan {:.6} ± {:.6}",
        file.name,
        solution.chosen.len(),
        solution.estimate.mean,
        solution.estimate.stderr
    );
    if !solution.report.all_pass() {
        log::warn!("some post-rounding checks failed; see the report");
    }
    emit(&ResultFile::new(file.name, config, solution).to_json()?, output)
}

/// One row of the gap-experiment table.
#[derive(Debug)]
struct GapRow {
    parameter: u32,
    /// Scale at which all-ones is feasible for the relaxation.
    lp_bound: f64,
    makespan: f64,
    stderr: f64,
    ratio: f64,
    /// Largest constraint load over its right-hand side; at most 1 when certified.
    max_lp_ratio: f64,
}

fn gap_row(family: GapFamily, value: u32, samples: u64, seed: u64, sampled_cuts: usize) -> genmakespan::Result<GapRow> {
    let (file, scale, b) = match family {
        GapFamily::Line => (gen_line_gap(value)?, 1.0, 4.0),
        GapFamily::General => (
            gen_general_gap(value as usize)?,
            (value as f64).ln(),
            2.0 * std::f64::consts::E.powi(2),
        ),
    };
    let problem = file.to_problem()?;
    let split = problem
        .dists
        .iter()
        .map(|d| Ok(d.scale(scale)?.split_at_one()))
        .collect::<genmakespan::Result<Vec<_>>>()?;
    let m = problem.sys.n_resources();
    let rel = LpRelaxation::new(&split, problem.t, b, m)?;
    let y = vec![1.0; problem.n()];
    let mode = if m <= 12 {
        LpCheckMode::Exhaustive
    } else {
        LpCheckMode::Sampled {
            per_k: sampled_cuts,
            seed: seeds::derive(seed, value as u64),
        }
    };
    let check = check_lp_constraints(&y, &rel, &problem.sys, &mode)?;
    if !check.pass() {
        return Err(Error::Infeasible(format!(
            "all-ones violates the relaxation at parameter {value} (ratio {})",
            check.max_ratio
        )));
    }
    let all: Vec<usize> = (0..problem.n()).collect();
    let est = evaluate_mc(&all, &problem.sys, &problem.dists, samples, seeds::derive(seed, value as u64))?;
    Ok(GapRow {
        parameter: value,
        lp_bound: scale,
        makespan: est.mean,
        stderr: est.stderr,
        ratio: est.mean / scale,
        max_lp_ratio: check.max_ratio,
    })
}

fn cmd_gap_experiment(
    family: GapFamily,
    values: &[u32],
    samples: u64,
    seed: u64,
    sampled_cuts: usize,
) -> genmakespan::Result<()> {
    println!("parameter\tlp_bound\tmakespan\tstderr\tratio\tmax_lp_ratio");
    for &v in values {
        let r = gap_row(family, v, samples, seed, sampled_cuts)?;
        println!(
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            r.parameter, r.lp_bound, r.makespan, r.stderr, r.ratio, r.max_lp_ratio
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct OracleRow<'a> {
    instance: &'a str,
    n: usize,
    t: usize,
    seed: u64,
    algorithm: f64,
    optimal: f64,
    ratio: f64,
}

fn cmd_compare_oracle(path: &Path, config: SolverConfig, ledger: &Path) -> genmakespan::Result<()> {
    let file = InstanceFile::load(path)?;
    let problem = file.to_problem()?;
    let solution = solve_end_to_end(&problem, &config)?;
    // both sides measured with the same evaluator so that equal sets score equally
    let evaluator = Evaluator::Auto {
        samples: config.final_samples,
        seed: seeds::derive(config.seed, u64::MAX),
    };
    let (_, opt) = brute_force_opt(&problem.sys, &problem.dists, problem.t, &evaluator)?;
    let alg = evaluator.evaluate(&solution.chosen, &problem.sys, &problem.dists)?;
    let ratio = if opt.mean > 0.0 {
        alg.mean / opt.mean
    } else if alg.mean > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    let row = OracleRow {
        instance: &file.name,
        n: problem.n(),
        t: problem.t,
        seed: config.seed,
        algorithm: alg.mean,
        optimal: opt.mean,
        ratio,
    };
    println!("{}\t{:.6}\t{:.6}\t{:.6}", row.instance, row.algorithm, row.optimal, row.ratio);

    let fresh = std::fs::metadata(ledger).map(|m| m.len() == 0).unwrap_or(true);
    let out = OpenOptions::new().create(true).append(true).open(ledger)?;
    let mut writer = csv::WriterBuilder::new().has_headers(fresh).from_writer(out);
    writer
        .serialize(&row)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writer.flush()?;
    Ok(())
}

fn run(cli: Cli) -> genmakespan::Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Argument(e.to_string()))?;
    }
    match &cli.command {
        Command::Gen { kind, output } => cmd_gen(kind, output.as_deref()),
        Command::Solve {
            instance,
            solver,
            output,
        } => cmd_solve(instance, solver.config(), output.as_deref()),
        Command::GapExperiment {
            family,
            values,
            samples,
            seed,
            sampled_cuts,
        } => cmd_gap_experiment(*family, values, *samples, *seed, *sampled_cuts),
        Command::CompareOracle {
            instance,
            solver,
            ledger,
        } => cmd_compare_oracle(instance, solver.config(), ledger),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
