//! Command-line surface: generate, solve, verify, oracle-check, export, and
//! score runs. Exit codes follow SAT-competition conventions where they
//! apply: 10 satisfiable, 0 unknown, 20 unsatisfiable (oracle), 2 rejected
//! witness (verify), 1 error.

use crate::benchgen::{
    gen_placement, gen_random, gen_scheduling, PlacementSpec, RandomSpec, SchedulingSpec,
};
use crate::model::{
    export_smt2, parse_instance, serialize_instance, Assignment, Formula,
};
use crate::optimizer::{
    anneal_solve, BackendChoice, EtaMode, Evaluator, SolveOutcome, SolverConfig,
};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

pub const EXIT_SAT: i32 = 10;
pub const EXIT_UNKNOWN: i32 = 0;
pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATED: i32 = 2;
pub const EXIT_UNSAT: i32 = 20;

#[derive(Parser)]
#[command(
    name = "fsmt",
    about = "Continuous local-search solver for SMT over linear real arithmetic",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an HSMT instance by annealed projected gradient descent.
    Solve(SolveArgs),
    /// Check an assignment file against an instance.
    Verify {
        instance: PathBuf,
        assignment: PathBuf,
    },
    /// Brute-force ground truth for small instances.
    Oracle { instance: PathBuf },
    /// Export an instance as an SMT-LIB2 (QF_LRA) script.
    Export {
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate benchmark instances.
    Gen(GenArgs),
    /// PAR-2 scores per solver from a results CSV.
    Score {
        results: PathBuf,
        /// Time limit T; timeouts are charged 2T.
        #[arg(long = "time-limit", default_value_t = 1000.0)]
        time_limit: f64,
    },
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    /// Step size for --eta-mode fixed.
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// `lipschitz` (eta = 1/L per stage), `local` (the sigma-independent
    /// local bound), or `fixed`.
    #[arg(long = "eta-mode", default_value = "lipschitz")]
    eta_mode: EtaMode,
    /// Squared-norm threshold for the projected gradient mapping.
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    /// Annealing schedule as inverse sigmas `a:b:step`.
    #[arg(long = "sigma-schedule", default_value = "0.1:2.0:0.1")]
    sigma_schedule: String,
    #[arg(long = "max-iters", default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Wall-clock limit in seconds.
    #[arg(long = "time-limit")]
    time_limit: Option<f64>,
    /// Restart/evaluation parallelism; 1 is bit-reproducible.
    #[arg(long, env = "FSMT_THREADS", default_value_t = 1)]
    threads: usize,
    /// `auto`, `xbdd`, or `symmetric`.
    #[arg(long, default_value = "auto")]
    backend: BackendChoice,
    /// JSON-lines run log (per-stage records plus a summary).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Write every compiled decision diagram as DOT to this file.
    #[arg(long = "dump-bdd")]
    dump_bdd: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    family: GenFamily,
}

#[derive(Args)]
struct GenCommon {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the SMT-LIB2 twin next to --out.
    #[arg(long = "emit-smt2")]
    emit_smt2: bool,
}

#[derive(Subcommand)]
enum GenFamily {
    /// Random hybrid cardinality/NAE/XOR constraints over n Booleans,
    /// n reals, and n atoms.
    Random {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        common: GenCommon,
    },
    /// Continuous-time scheduling; satisfiable by construction.
    Scheduling {
        /// Worker count (power of two).
        #[arg(long)]
        workers: usize,
        /// Jobs per worker.
        #[arg(long)]
        ratio: usize,
        /// Also write the greedy witness next to --out.
        #[arg(long = "emit-witness")]
        emit_witness: bool,
        #[command(flatten)]
        common: GenCommon,
    },
    /// 3D placement with routing-aware pairs.
    Placement {
        /// Macro count (power of two).
        #[arg(long)]
        macros: usize,
        /// Layer count (power of two).
        #[arg(long)]
        layers: usize,
        #[command(flatten)]
        common: GenCommon,
    },
}

/// Entry point; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Solve(args) => cmd_solve(args),
        Command::Verify {
            instance,
            assignment,
        } => cmd_verify(&instance, &assignment),
        Command::Oracle { instance } => cmd_oracle(&instance),
        Command::Export { instance, out } => cmd_export(&instance, out.as_deref()),
        Command::Gen(args) => cmd_gen(args),
        Command::Score {
            results,
            time_limit,
        } => cmd_score(&results, time_limit),
    }
}

fn read_formula(path: &Path) -> Result<Formula> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    parse_instance(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

/// Parses `a:b:step` of inverse sigmas into a decreasing sigma schedule.
fn parse_sigma_schedule(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, step] = parts.as_slice() else {
        bail!("sigma schedule must look like `0.1:2.0:0.1`");
    };
    let (a, b, step): (f64, f64, f64) = (a.parse()?, b.parse()?, step.parse()?);
    if !(a > 0.0 && step > 0.0 && b >= a) {
        bail!("sigma schedule needs 0 < a <= b and step > 0");
    }
    let mut inv = Vec::new();
    let mut x = a;
    while x <= b * (1.0 + 1e-12) {
        inv.push(x);
        x += step;
    }
    Ok(inv.into_iter().map(|x| 1.0 / x).collect())
}

fn format_assignment_lines(asg: &Assignment) -> Vec<String> {
    let mut lines = Vec::new();
    for chunk in asg
        .x
        .iter()
        .enumerate()
        .map(|(i, v)| format!("b{i}={v}"))
        .collect::<Vec<_>>()
        .chunks(8)
    {
        lines.push(format!("v {}", chunk.join(" ")));
    }
    for chunk in asg
        .y
        .iter()
        .enumerate()
        .map(|(j, v)| format!("y{j}={v}"))
        .collect::<Vec<_>>()
        .chunks(8)
    {
        lines.push(format!("v {}", chunk.join(" ")));
    }
    lines
}

/// Reads an assignment file: whitespace-separated `b<i>=<±1>` and
/// `y<j>=<float>` tokens; `v` prefixes and `s`/`c` lines are ignored, so
/// solver output loads directly.
fn read_assignment(path: &Path, f: &Formula) -> Result<Assignment> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut x: Vec<Option<f64>> = vec![None; f.n_bool];
    let mut y: Vec<Option<f64>> = vec![None; f.n_real];
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("s ") || line.starts_with('c') && !line.contains('=')
        {
            continue;
        }
        let body = line.strip_prefix("v ").unwrap_or(line);
        for tok in body.split_whitespace() {
            let (name, value) = tok
                .split_once('=')
                .ok_or_else(|| anyhow!("bad assignment token `{tok}`"))?;
            let value: f64 = value
                .parse()
                .map_err(|_| anyhow!("bad value in token `{tok}`"))?;
            if let Some(idx) = name.strip_prefix('b') {
                let i: usize = idx.parse().map_err(|_| anyhow!("bad token `{tok}`"))?;
                if i >= f.n_bool {
                    bail!("b{i} out of range (n_bool = {})", f.n_bool);
                }
                if value != 1.0 && value != -1.0 {
                    bail!("boolean b{i} must be -1 or 1, got {value}");
                }
                x[i] = Some(value);
            } else if let Some(idx) = name.strip_prefix('y') {
                let j: usize = idx.parse().map_err(|_| anyhow!("bad token `{tok}`"))?;
                if j >= f.n_real {
                    bail!("y{j} out of range (n_real = {})", f.n_real);
                }
                y[j] = Some(value);
            } else {
                bail!("unknown variable `{name}`");
            }
        }
    }
    let x = x
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| anyhow!("missing assignment for b{i}")))
        .collect::<Result<Vec<_>>>()?;
    let y = y
        .into_iter()
        .enumerate()
        .map(|(j, v)| v.ok_or_else(|| anyhow!("missing assignment for y{j}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(Assignment { x, y })
}

#[derive(serde::Serialize)]
struct RunSummary<'a> {
    instance: &'a str,
    result: &'a str,
    wall_seconds: f64,
    restarts: usize,
    seed: u64,
    config_digest: String,
}

fn config_digest(args: &SolveArgs) -> String {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    format!(
        "{}|{:?}|{}|{}|{}|{}|{}|{:?}|{}",
        args.eta,
        args.eta_mode,
        args.eps,
        args.sigma_schedule,
        args.max_iters,
        args.restarts,
        args.seed,
        args.backend,
        args.threads
    )
    .hash(&mut h);
    format!("{:016x}", h.finish())
}

fn cmd_solve(args: SolveArgs) -> Result<i32> {
    let f = read_formula(&args.instance)?;
    let cfg = SolverConfig {
        eta: args.eta,
        eta_mode: args.eta_mode,
        eps: args.eps,
        sigma_schedule: parse_sigma_schedule(&args.sigma_schedule)?,
        max_inner_iters: args.max_iters,
        restarts: args.restarts,
        seed: args.seed,
        time_limit: args.time_limit.map(Duration::from_secs_f64),
        threads: args.threads,
        backend: args.backend,
        ..SolverConfig::default()
    };
    cfg.validate().map_err(|e| anyhow!(e))?;

    if let Some(path) = &args.dump_bdd {
        let ev = Evaluator::new(&f, args.backend, cfg.node_budget)?;
        let mut out = String::new();
        for (i, d) in ev.diagrams() {
            out.push_str(&d.to_dot(&format!("c{i}")));
        }
        std::fs::write(path, out)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }

    let report = anneal_solve(&f, &cfg)?;

    if let Some(path) = &args.log {
        let mut w = std::io::BufWriter::new(
            std::fs::File::create(path)
                .with_context(|| format!("cannot write {}", path.display()))?,
        );
        for stage in &report.stages {
            serde_json::to_writer(&mut w, stage)?;
            writeln!(w)?;
        }
        let result = match (&report.outcome, report.timed_out) {
            (SolveOutcome::Sat(_), _) => "sat",
            (_, true) => "timeout",
            _ => "unknown",
        };
        serde_json::to_writer(
            &mut w,
            &RunSummary {
                instance: &args.instance.display().to_string(),
                result,
                wall_seconds: report.wall.as_secs_f64(),
                restarts: report.restarts_run,
                seed: args.seed,
                config_digest: config_digest(&args),
            },
        )?;
        writeln!(w)?;
    }

    match &report.outcome {
        SolveOutcome::Sat(asg) => {
            // Never print SATISFIABLE without the exact certificate.
            let (obj, flags) = f.eval_formula(asg);
            if obj != -f.total_weight() || !flags.iter().all(|&s| s) {
                bail!("internal error: claimed witness fails exact evaluation");
            }
            println!("s SATISFIABLE");
            for line in format_assignment_lines(asg) {
                println!("{line}");
            }
            Ok(EXIT_SAT)
        }
        SolveOutcome::Unknown { unsat_count, .. } => {
            println!("c best rounded assignment violates {unsat_count} constraints");
            println!("s UNKNOWN");
            Ok(EXIT_UNKNOWN)
        }
    }
}

fn cmd_verify(instance: &Path, assignment: &Path) -> Result<i32> {
    let f = read_formula(instance)?;
    let asg = read_assignment(assignment, &f)?;
    let (obj, flags) = f.eval_formula(&asg);
    if obj == -f.total_weight() && flags.iter().all(|&s| s) {
        println!("s VERIFIED");
        Ok(EXIT_OK)
    } else {
        for (i, sat) in flags.iter().enumerate() {
            if !sat {
                println!("c violated constraint {i}");
            }
        }
        println!("s VIOLATED");
        Ok(EXIT_VIOLATED)
    }
}

fn cmd_oracle(instance: &Path) -> Result<i32> {
    let f = read_formula(instance)?;
    match crate::spectral::brute_force_sat(&f)? {
        crate::spectral::SatResult::Sat(asg) => {
            println!("s SATISFIABLE");
            for line in format_assignment_lines(&asg) {
                println!("{line}");
            }
            Ok(EXIT_SAT)
        }
        crate::spectral::SatResult::Unsat => {
            println!("s UNSATISFIABLE");
            Ok(EXIT_UNSAT)
        }
    }
}

fn cmd_export(instance: &Path, out: Option<&Path>) -> Result<i32> {
    let f = read_formula(instance)?;
    let script = export_smt2(&f);
    match out {
        Some(path) => std::fs::write(path, script)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{script}"),
    }
    Ok(EXIT_OK)
}

fn write_instance(
    f: &Formula,
    common: &GenCommon,
    witness: Option<&Assignment>,
) -> Result<i32> {
    let text = serialize_instance(f);
    match &common.out {
        Some(path) => {
            std::fs::write(path, &text)
                .with_context(|| format!("cannot write {}", path.display()))?;
            if common.emit_smt2 {
                let twin = path.with_extension("smt2");
                std::fs::write(&twin, export_smt2(f))
                    .with_context(|| format!("cannot write {}", twin.display()))?;
            }
            if let Some(asg) = witness {
                let wpath = path.with_extension("witness");
                let mut text = String::new();
                for line in format_assignment_lines(asg) {
                    text.push_str(&line);
                    text.push('\n');
                }
                std::fs::write(&wpath, text)
                    .with_context(|| format!("cannot write {}", wpath.display()))?;
            }
        }
        None => {
            if common.emit_smt2 {
                bail!("--emit-smt2 requires --out");
            }
            if witness.is_some() {
                bail!("--emit-witness requires --out");
            }
            print!("{text}");
        }
    }
    Ok(EXIT_OK)
}

fn cmd_gen(args: GenArgs) -> Result<i32> {
    match args.family {
        GenFamily::Random { n, common } => {
            let f = gen_random(&RandomSpec {
                n,
                seed: common.seed,
            })
            .map_err(|e| anyhow!(e))?;
            write_instance(&f, &common, None)
        }
        GenFamily::Scheduling {
            workers,
            ratio,
            emit_witness,
            common,
        } => {
            let inst = gen_scheduling(&SchedulingSpec {
                n_w: workers,
                r: ratio,
                seed: common.seed,
            })
            .map_err(|e| anyhow!(e))?;
            write_instance(
                &inst.formula,
                &common,
                emit_witness.then_some(&inst.greedy),
            )
        }
        GenFamily::Placement {
            macros,
            layers,
            common,
        } => {
            let inst = gen_placement(&PlacementSpec {
                n_m: macros,
                n_l: layers,
                seed: common.seed,
            })
            .map_err(|e| anyhow!(e))?;
            write_instance(&inst.formula, &common, None)
        }
    }
}

/// One row of a results CSV: `solver,instance,result,wall_seconds,seed,config`.
#[derive(Debug, serde::Deserialize)]
struct RunRecord {
    solver: String,
    #[allow(dead_code)]
    instance: String,
    result: String,
    wall_seconds: f64,
    #[allow(dead_code)]
    seed: Option<u64>,
    #[allow(dead_code)]
    config: Option<String>,
}

/// PAR-2 over records grouped by solver: runs within the limit count their
/// wall time; timeouts (by flag or by exceeding T) are charged 2T.
pub fn par2_scores(records: &[(String, String, f64)], time_limit: f64) -> Vec<(String, f64)> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for (solver, result, wall) in records {
        let entry = groups.entry(solver).or_insert((0.0, 0));
        let penalty = if result == "timeout" || *wall > time_limit {
            2.0 * time_limit
        } else {
            *wall
        };
        entry.0 += penalty;
        entry.1 += 1;
    }
    groups
        .into_iter()
        .map(|(solver, (total, n))| (solver.to_string(), total / n as f64))
        .collect()
}

fn cmd_score(results: &Path, time_limit: f64) -> Result<i32> {
    let mut reader = csv::Reader::from_path(results)
        .with_context(|| format!("cannot read {}", results.display()))?;
    let mut rows = Vec::new();
    for record in reader.deserialize::<RunRecord>() {
        let r = record.context("bad CSV row")?;
        if !r.wall_seconds.is_finite() || r.wall_seconds < 0.0 {
            bail!("bad wall_seconds for solver {}", r.solver);
        }
        rows.push((r.solver, r.result, r.wall_seconds));
    }
    if rows.is_empty() {
        bail!("no records in {}", results.display());
    }
    for (solver, score) in par2_scores(&rows, time_limit) {
        println!("{solver} {score}");
    }
    Ok(EXIT_OK)
}
