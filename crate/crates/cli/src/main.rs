//! Command-line front end: generate and verify schedules, evaluate
//! alpha-beta costs, and sweep scenarios into CSV tables.
//!
//! Exit codes: 0 success, 1 I/O or parse failure, 2 invalid arguments,
//! 3 verification failure.

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use stragglar_core::cost::{
    analytic_cost, end_to_end_with_post, precondition_time, report_cost, schedule_cost,
    AlphaBetaParams, CostBreakdown, ScenarioParams, DEFAULT_ALPHA, DEFAULT_BETA,
};
use stragglar_core::stragglar::generate_stragglar_with_trace;
use stragglar_core::{
    generate_schedule, verify_schedule, Algorithm, Error, Schedule, VerificationReport,
};

#[derive(Parser)]
#[command(
    name = "stragglar",
    version,
    about = "Schedule synthesis, verification, and alpha-beta cost simulation \
             for straggler-aware AllReduce"
)]
struct Cli {
    /// Per-message latency in seconds (overrides STRAGGLAR_ALPHA)
    #[arg(long, global = true, env = "STRAGGLAR_ALPHA")]
    alpha: Option<f64>,

    /// Per-byte cost in seconds/byte (overrides STRAGGLAR_BETA)
    #[arg(long, global = true, env = "STRAGGLAR_BETA")]
    beta: Option<f64>,

    /// Emit JSON instead of aligned text where both exist
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a schedule and write it as JSON
    Generate(GenerateArgs),
    /// Replay a schedule file against its initial state and report violations
    Verify(VerifyArgs),
    /// Cost one algorithm (or one schedule file) at a single scenario point
    Cost(CostArgs),
    /// Sweep one variable and emit a CSV table of totals and speedups
    Sweep(SweepArgs),
    /// Compare all algorithms at one scenario point
    Compare(CompareArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Algorithm: stragglar, ring, rhd, or broadcast
    #[arg(long, value_parser = parse_algo)]
    algo: Algorithm,

    /// Cluster size
    #[arg(long)]
    n: u32,

    /// Output path for the schedule JSON (stdout when omitted)
    #[arg(long, short)]
    out: Option<PathBuf>,

    /// Also write the per-round invariant trace (stragglar, power-of-2 only)
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Schedule JSON file to verify
    schedule: PathBuf,
}

#[derive(Args)]
struct CostArgs {
    /// Algorithm to cost analytically (requires --n)
    #[arg(long, value_parser = parse_algo)]
    algo: Option<Algorithm>,

    /// Cluster size
    #[arg(long)]
    n: Option<u32>,

    /// Schedule JSON file to cost instead of a closed form
    #[arg(long, conflicts_with_all = ["algo", "n"])]
    schedule: Option<PathBuf>,

    /// Buffer size in bytes
    #[arg(long, default_value_t = 1 << 30)]
    size: u64,

    /// Straggler delay: seconds or "full-overlap"
    #[arg(long, default_value = "0", value_parser = parse_delay)]
    delay: Delay,
}

#[derive(Args)]
struct CompareArgs {
    /// Cluster size
    #[arg(long)]
    n: u32,

    /// Buffer size in bytes
    #[arg(long, default_value_t = 1 << 30)]
    size: u64,

    /// Straggler delay: seconds or "full-overlap"
    #[arg(long, default_value = "full-overlap", value_parser = parse_delay)]
    delay: Delay,

    /// Algorithms to compare (default: all valid for n)
    #[arg(long, value_delimiter = ',', value_parser = parse_algo)]
    algos: Vec<Algorithm>,
}

#[derive(Args)]
struct SweepArgs {
    /// Swept variable: cluster-size, buffer-size, or delay
    #[arg(long, value_parser = parse_variable)]
    var: Variable,

    /// Explicit swept values, comma separated
    #[arg(long, value_delimiter = ',')]
    values: Vec<String>,

    /// Range start (alternative to --values)
    #[arg(long, conflicts_with = "values")]
    start: Option<f64>,

    /// Range stop, inclusive
    #[arg(long, requires = "start")]
    stop: Option<f64>,

    /// Multiplicative step for the range
    #[arg(long, requires = "start", conflicts_with = "step")]
    factor: Option<f64>,

    /// Additive step for the range
    #[arg(long, requires = "start")]
    step: Option<f64>,

    /// Fixed cluster size (required unless swept)
    #[arg(long)]
    n: Option<u32>,

    /// Fixed buffer size in bytes
    #[arg(long, default_value_t = 1 << 30)]
    size: u64,

    /// Fixed straggler delay: seconds or "full-overlap"
    #[arg(long, default_value = "full-overlap", value_parser = parse_delay)]
    delay: Delay,

    /// Algorithms to evaluate
    #[arg(
        long,
        value_delimiter = ',',
        value_parser = parse_algo,
        default_value = "stragglar,ring,rhd,broadcast"
    )]
    algos: Vec<Algorithm>,

    /// Output CSV path (stdout when omitted)
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// Straggler delay: an explicit duration, or enough to mask each
/// algorithm's own precondition (totals are then measured from the
/// straggler's arrival).
#[derive(Debug, Clone, Copy, PartialEq)]
enum Delay {
    Seconds(f64),
    FullOverlap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Variable {
    ClusterSize,
    BufferSize,
    Delay,
}

fn parse_algo(s: &str) -> Result<Algorithm, String> {
    Algorithm::from_str(s)
}

fn parse_delay(s: &str) -> Result<Delay, String> {
    if s == "full-overlap" {
        return Ok(Delay::FullOverlap);
    }
    let seconds: f64 = s
        .parse()
        .map_err(|_| format!("delay must be seconds or \"full-overlap\", got '{s}'"))?;
    if !seconds.is_finite() || seconds < 0.0 {
        return Err(format!("delay must be non-negative and finite, got {s}"));
    }
    Ok(Delay::Seconds(seconds))
}

fn parse_variable(s: &str) -> Result<Variable, String> {
    match s {
        "cluster-size" => Ok(Variable::ClusterSize),
        "buffer-size" => Ok(Variable::BufferSize),
        "delay" => Ok(Variable::Delay),
        other => Err(format!(
            "unknown sweep variable '{other}' (expected cluster-size, buffer-size, or delay)"
        )),
    }
}

enum Failure {
    /// Exit 1: I/O or parse problems.
    Io(String),
    /// Exit 2: invalid arguments or unsupported combinations.
    Usage(String),
    /// Exit 3: the schedule did not verify.
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let params = AlphaBetaParams {
        alpha: cli.alpha.unwrap_or(DEFAULT_ALPHA),
        beta: cli.beta.unwrap_or(DEFAULT_BETA),
    };
    if params.alpha < 0.0 || params.beta <= 0.0 {
        eprintln!("error: alpha must be >= 0 and beta > 0");
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::Generate(args) => cmd_generate(args, cli.json),
        Command::Verify(args) => cmd_verify(args),
        Command::Cost(args) => cmd_cost(args, params, cli.json),
        Command::Sweep(args) => cmd_sweep(args, params),
        Command::Compare(args) => cmd_compare(args, params, cli.json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Verification) => ExitCode::from(3),
    }
}

fn write_output(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents)
        .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn cmd_generate(args: &GenerateArgs, json: bool) -> Result<(), Failure> {
    if args.trace.is_some()
        && !(args.algo == Algorithm::StragglAr && args.n.is_power_of_two() && args.n >= 2)
    {
        return Err(Failure::Usage(
            "--trace is only available for stragglar on power-of-2 sizes".to_string(),
        ));
    }

    let (schedule, trace) = if args.trace.is_some() {
        let (schedule, trace) = generate_stragglar_with_trace(args.n)?;
        (schedule, Some(trace))
    } else {
        (generate_schedule(args.algo, args.n)?, None)
    };

    if let (Some(path), Some(trace)) = (&args.trace, &trace) {
        let text = serde_json::to_string_pretty(trace).expect("trace serialization cannot fail");
        write_output(path, &text)?;
    }

    let report = verify_schedule(&schedule);
    assert!(report.valid, "generated schedule failed verification");

    let schedule_json = schedule.to_json();
    match &args.out {
        Some(path) => write_output(path, &schedule_json)?,
        None => println!("{schedule_json}"),
    }

    let summary_line = if json {
        format!(
            "{{\"algorithm\":\"{}\",\"n\":{},\"rounds\":{},\"beta_coefficient\":{{\"numer\":{},\"denom\":{}}}}}",
            schedule.algorithm,
            schedule.n,
            report.rounds_executed,
            report.beta_coefficient.numer(),
            report.beta_coefficient.denom()
        )
    } else {
        format!(
            "rounds={} beta_coefficient={}/{}",
            report.rounds_executed,
            report.beta_coefficient.numer(),
            report.beta_coefficient.denom()
        )
    };
    if args.out.is_some() {
        println!("{summary_line}");
    } else {
        eprintln!("{summary_line}");
    }
    Ok(())
}

fn load_schedule(path: &Path) -> Result<Schedule, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
    Schedule::from_json(&text)
        .map_err(|e| Failure::Io(format!("cannot parse {}: {e}", path.display())))
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), Failure> {
    let schedule = load_schedule(&args.schedule)?;
    let report = verify_schedule(&schedule);
    println!("{}", report.to_json());
    if report.valid {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

/// Post-barrier cost of (algo, n): closed form where it exists, otherwise a
/// generated schedule's measured rounds. The cache keeps sweeps from
/// regenerating and re-verifying the same even-size schedule per point.
fn post_time(
    algo: Algorithm,
    n: u32,
    s: u64,
    params: AlphaBetaParams,
    cache: &mut BTreeMap<u32, VerificationReport>,
) -> Result<f64, Failure> {
    if algo == Algorithm::StragglAr && !n.is_power_of_two() {
        if let std::collections::btree_map::Entry::Vacant(e) = cache.entry(n) {
            let schedule = generate_schedule(Algorithm::StragglAr, n)?;
            e.insert(verify_schedule(&schedule));
        }
        return Ok(report_cost(&cache[&n], s, params));
    }
    Ok(analytic_cost(algo, n, s, params)?)
}

/// One evaluated (scenario, algorithm) cell: the delay actually applied,
/// the cost breakdown, and the reported total. With an explicit delay the
/// total runs from the non-straggler start; with full overlap each
/// algorithm's own precondition is masked and the total runs from the
/// straggler's arrival (breakdown total minus delay).
struct Evaluated {
    delay_s: f64,
    breakdown: CostBreakdown,
    total_s: f64,
}

fn evaluate(
    algo: Algorithm,
    n: u32,
    s: u64,
    delay: Delay,
    params: AlphaBetaParams,
    cache: &mut BTreeMap<u32, VerificationReport>,
) -> Result<Evaluated, Failure> {
    let post = post_time(algo, n, s, params, cache)?;
    let delay_s = match delay {
        Delay::Seconds(d) => d,
        Delay::FullOverlap => precondition_time(algo, n, s, params),
    };
    let scenario = ScenarioParams {
        n,
        buffer_bytes: s,
        delay: delay_s,
        params,
    };
    let breakdown = end_to_end_with_post(algo, &scenario, post);
    let total_s = match delay {
        // From the non-straggler start.
        Delay::Seconds(_) => breakdown.total,
        // From the straggler's arrival: total minus the delay, computed as
        // deficit + post so it stays exact in floating point.
        Delay::FullOverlap => breakdown.overlap_deficit + breakdown.post_time,
    };
    Ok(Evaluated {
        delay_s,
        breakdown,
        total_s,
    })
}

#[derive(Serialize)]
struct CostRow {
    algorithm: String,
    n: u32,
    s_bytes: u64,
    delay_s: f64,
    #[serde(flatten)]
    breakdown: CostBreakdown,
}

fn cmd_cost(args: &CostArgs, params: AlphaBetaParams, json: bool) -> Result<(), Failure> {
    let mut cache = BTreeMap::new();
    let (algo, n, post) = match (&args.schedule, args.algo, args.n) {
        (Some(path), None, None) => {
            let schedule = load_schedule(path)?;
            let report = verify_schedule(&schedule);
            if !report.valid {
                eprintln!("error: schedule does not verify; violations:");
                for v in &report.violations {
                    eprintln!("  round {}: {}", v.round, v.description);
                }
                return Err(Failure::Verification);
            }
            let post = schedule_cost(&schedule, args.size, params);
            (schedule.algorithm, schedule.n, Some(post))
        }
        (None, Some(algo), Some(n)) => (algo, n, None),
        _ => {
            return Err(Failure::Usage(
                "provide either --schedule, or both --algo and --n".to_string(),
            ))
        }
    };

    let delay_s = match args.delay {
        Delay::Seconds(d) => d,
        Delay::FullOverlap => precondition_time(algo, n, args.size, params),
    };
    let breakdown = match post {
        Some(post) => end_to_end_with_post(
            algo,
            &ScenarioParams {
                n,
                buffer_bytes: args.size,
                delay: delay_s,
                params,
            },
            post,
        ),
        None => {
            let ev = evaluate(algo, n, args.size, args.delay, params, &mut cache)?;
            ev.breakdown
        }
    };

    let row = CostRow {
        algorithm: algo.to_string(),
        n,
        s_bytes: args.size,
        delay_s,
        breakdown,
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&row).unwrap());
    } else {
        println!("algorithm        {}", row.algorithm);
        println!("n                {}", row.n);
        println!("s_bytes          {}", row.s_bytes);
        println!("delay_s          {:.9e}", row.delay_s);
        println!("precondition_s   {:.9e}", breakdown.precondition_time);
        println!("overlap_deficit  {:.9e}", breakdown.overlap_deficit);
        println!("post_s           {:.9e}", breakdown.post_time);
        println!("total_s          {:.9e}", breakdown.total);
    }
    Ok(())
}

fn algos_for(n: u32, requested: &[Algorithm]) -> Result<Vec<Algorithm>, Failure> {
    if requested.is_empty() {
        return Ok(Algorithm::ALL
            .into_iter()
            .filter(|a| a.supports(n))
            .collect());
    }
    for algo in requested {
        if !algo.supports(n) {
            return Err(Failure::Usage(format!("{algo} does not support n = {n}")));
        }
    }
    Ok(requested.to_vec())
}

#[derive(Serialize)]
struct CompareRow {
    algorithm: String,
    delay_s: f64,
    precondition_s: f64,
    overlap_deficit_s: f64,
    post_s: f64,
    total_s: f64,
    fastest: bool,
}

fn cmd_compare(args: &CompareArgs, params: AlphaBetaParams, json: bool) -> Result<(), Failure> {
    if args.n < 2 {
        return Err(Failure::Usage(format!("n = {} is below 2", args.n)));
    }
    if args.size == 0 {
        return Err(Failure::Usage("buffer size must be positive".to_string()));
    }
    let algos = algos_for(args.n, &args.algos)?;
    let mut cache = BTreeMap::new();
    let mut rows = Vec::new();
    for algo in &algos {
        let ev = evaluate(*algo, args.n, args.size, args.delay, params, &mut cache)?;
        rows.push(CompareRow {
            algorithm: algo.to_string(),
            delay_s: ev.delay_s,
            precondition_s: ev.breakdown.precondition_time,
            overlap_deficit_s: ev.breakdown.overlap_deficit,
            post_s: ev.breakdown.post_time,
            total_s: ev.total_s,
            fastest: false,
        });
    }
    let fastest = rows
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.total_s.total_cmp(&b.total_s))
        .map(|(i, _)| i)
        .expect("at least one algorithm");
    rows[fastest].fastest = true;

    if json {
        println!("{}", serde_json::to_string_pretty(&rows).unwrap());
    } else {
        println!(
            "{:<10} {:>15} {:>15} {:>17} {:>15} {:>15}",
            "algorithm", "delay_s", "precondition_s", "overlap_deficit", "post_s", "total_s"
        );
        for row in &rows {
            println!(
                "{:<10} {:>15.6e} {:>15.6e} {:>17.6e} {:>15.6e} {:>15.6e}{}",
                row.algorithm,
                row.delay_s,
                row.precondition_s,
                row.overlap_deficit_s,
                row.post_s,
                row.total_s,
                if row.fastest { "  <- fastest" } else { "" }
            );
        }
    }
    Ok(())
}

fn sweep_values(args: &SweepArgs) -> Result<Vec<f64>, Failure> {
    if !args.values.is_empty() {
        return args
            .values
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Failure::Usage(format!("bad sweep value '{v}'")))
            })
            .collect();
    }
    let (Some(start), Some(stop)) = (args.start, args.stop) else {
        return Err(Failure::Usage(
            "provide --values, or --start with --stop and --factor/--step".to_string(),
        ));
    };
    let mut out = Vec::new();
    match (args.factor, args.step) {
        (Some(factor), None) => {
            if factor <= 1.0 || start <= 0.0 {
                return Err(Failure::Usage(
                    "multiplicative sweeps need --factor > 1 and --start > 0".to_string(),
                ));
            }
            let mut v = start;
            while v <= stop * (1.0 + 1e-12) {
                out.push(v);
                v *= factor;
            }
        }
        (None, Some(step)) => {
            if step <= 0.0 {
                return Err(Failure::Usage("--step must be positive".to_string()));
            }
            let mut v = start;
            while v <= stop + step * 1e-9 {
                out.push(v);
                v += step;
            }
        }
        _ => {
            return Err(Failure::Usage(
                "range sweeps need exactly one of --factor or --step".to_string(),
            ))
        }
    }
    if out.is_empty() {
        return Err(Failure::Usage("sweep produced no values".to_string()));
    }
    Ok(out)
}

fn cmd_sweep(args: &SweepArgs, params: AlphaBetaParams) -> Result<(), Failure> {
    let raw = sweep_values(args)?;

    // Resolve each sweep point to a full (n, s, delay) scenario.
    let mut points: Vec<(u32, u64, Delay)> = Vec::new();
    for v in &raw {
        let point = match args.var {
            Variable::ClusterSize => {
                if *v < 2.0 || v.fract() != 0.0 || *v > u32::MAX as f64 {
                    return Err(Failure::Usage(format!(
                        "cluster sizes must be integers >= 2, got {v}"
                    )));
                }
                (*v as u32, args.size, args.delay)
            }
            Variable::BufferSize => {
                if *v <= 0.0 || v.fract() != 0.0 {
                    return Err(Failure::Usage(format!(
                        "buffer sizes must be positive integer bytes, got {v}"
                    )));
                }
                let n = args
                    .n
                    .ok_or_else(|| Failure::Usage("buffer-size sweeps need --n".to_string()))?;
                (n, *v as u64, args.delay)
            }
            Variable::Delay => {
                if *v < 0.0 {
                    return Err(Failure::Usage(format!("delays must be >= 0, got {v}")));
                }
                let n = args
                    .n
                    .ok_or_else(|| Failure::Usage("delay sweeps need --n".to_string()))?;
                (n, args.size, Delay::Seconds(*v))
            }
        };
        points.push(point);
    }

    let algos = if args.algos.is_empty() {
        Algorithm::ALL.to_vec()
    } else {
        args.algos.clone()
    };
    for &(n, s, _) in &points {
        if n < 2 {
            return Err(Failure::Usage(format!("n = {n} is below 2")));
        }
        if s == 0 {
            return Err(Failure::Usage("buffer size must be positive".to_string()));
        }
        // StragglAR has no odd-size schedule at all, so an odd point makes
        // the whole spec invalid rather than silently skipping.
        if algos.contains(&Algorithm::StragglAr) && !Algorithm::StragglAr.supports(n) {
            return Err(Failure::Usage(format!(
                "stragglar does not support odd n = {n}; drop it from --algos or the sweep"
            )));
        }
    }

    let mut cache = BTreeMap::new();
    let mut csv = String::from("n,s_bytes,delay_s,algo,total_s,speedup_over_ring\n");
    for &(n, s, delay) in &points {
        let ring_total = evaluate(Algorithm::Ring, n, s, delay, params, &mut cache)?.total_s;
        for algo in &algos {
            // Power-of-2-only algorithms sit out non-power-of-2 points.
            if !algo.supports(n) {
                continue;
            }
            let ev = evaluate(*algo, n, s, delay, params, &mut cache)?;
            let speedup = ring_total / ev.total_s;
            writeln!(
                csv,
                "{n},{s},{},{algo},{},{speedup}",
                ev.delay_s, ev.total_s
            )
            .expect("writing to a string cannot fail");
        }
    }

    match &args.out {
        Some(path) => write_output(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
