use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use walrus_core::combinatorial::solve_welfare_incremental;
use walrus_core::cutting_plane::{solve_with, Method, Outcome, SolveOptions};
use walrus_core::robust::{compute_robust_prices, Node, RobustWitness};
use walrus_core::valuation::{generate_random_general, generate_random_gs, GsFamily};
use walrus_core::verify::{
    brute_force_welfare_with, check_certificate, check_welfare_theorems_with, find_walrasian_vertex_with, Limits,
    Membership, WelfareVerdict,
};
use walrus_core::{Certificate, MarketInstance, OracleCounter};

use crate::error::{CliError, Result};
use crate::format::{
    allocation_to_json, format_rational, parse_instance, parse_rational, parse_result, prices_to_json,
    result_certificate, to_canonical_json, InstanceFile, OutcomeJson, ResultFile, SCHEMA_VERSION,
};

/// Environment variable overriding the verification enumeration budget.
pub const BUDGET_VAR: &str = "WALRUS_BUDGET";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
/// The question was answered and the answer is negative.
pub const EXIT_NEGATIVE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "walrus", version, about = "Walrasian equilibrium prices for markets of indivisible goods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded random instance.
    Gen(GenArgs),
    /// Compute Walrasian prices and an allocation.
    Solve(SolveArgs),
    /// Re-check a result file against its instance.
    Verify(VerifyArgs),
    /// Compute prices at which the welfare-optimal allocation is the unique demand.
    Robust(RobustArgs),
    /// Check every buyer's valuation for gross substitutes.
    CheckGs(CheckGsArgs),
    /// Count value-oracle calls per phase of the combinatorial solver.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Additive,
    UnitDemand,
    MatroidMix,
    General,
}

impl Family {
    fn generate(self, items: usize, buyers: usize, max_value: i64, max_supply: u32, seed: u64) -> MarketInstance {
        match self {
            Family::Additive => generate_random_gs(GsFamily::Additive, items, buyers, max_value, seed),
            Family::UnitDemand => generate_random_gs(GsFamily::UnitDemand, items, buyers, max_value, seed),
            Family::MatroidMix => generate_random_gs(GsFamily::MatroidRankMix, items, buyers, max_value, seed),
            Family::General => generate_random_general(items, max_supply, buyers, max_value, seed),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Family::Additive => "additive",
            Family::UnitDemand => "unit-demand",
            Family::MatroidMix => "matroid-mix",
            Family::General => "general",
        }
    }
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "matroid-mix")]
    family: Family,
    #[arg(long)]
    items: usize,
    #[arg(long)]
    buyers: usize,
    #[arg(long, default_value_t = 20)]
    max_value: i64,
    /// Largest supply per item; only the general family uses it.
    #[arg(long, default_value_t = 1)]
    max_supply: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, default_value = "combinatorial", value_parser = parse_method)]
    algorithm: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write one JSON object per phase or iteration to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    instance: PathBuf,
    result: PathBuf,
}

#[derive(Debug, Args)]
struct RobustArgs {
    instance: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckGsArgs {
    instance: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "matroid-mix")]
    family: Family,
    /// Item counts, as a comma list or an inclusive range `a..b`.
    #[arg(long, default_value = "4,8,16,32", value_parser = parse_counts)]
    items: Counts,
    #[arg(long, default_value = "8,64", value_parser = parse_counts)]
    buyers: Counts,
    #[arg(long, default_value_t = 100)]
    max_value: i64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone)]
struct Counts(Vec<usize>);

fn parse_method(text: &str) -> std::result::Result<Method, String> {
    text.parse().map_err(|e: walrus_core::Error| e.to_string())
}

fn parse_counts(text: &str) -> std::result::Result<Counts, String> {
    let number = |s: &str| s.trim().parse::<usize>().map_err(|_| format!("`{s}` is not a count"));
    let counts = if let Some((lo, hi)) = text.split_once("..") {
        let (lo, hi) = (number(lo)?, number(hi.trim_start_matches('='))?);
        (lo..=hi).collect()
    } else {
        text.split(',').map(number).collect::<std::result::Result<Vec<_>, _>>()?
    };
    if counts.is_empty() || counts.contains(&0) {
        return Err(format!("`{text}` must list positive counts"));
    }
    Ok(Counts(counts))
}

/// Output streams and the verification budget for one invocation.
struct Context<'o, 'e> {
    stdout: &'o mut dyn Write,
    stderr: &'e mut dyn Write,
    limits: Limits,
}

impl Context<'_, '_> {
    fn say(&mut self, line: impl AsRef<str>) {
        let _ = writeln!(self.stdout, "{}", line.as_ref());
    }

    fn emit(&mut self, text: &str, output: Option<&Path>) -> Result<()> {
        match output {
            Some(path) => write_file(path, text),
            None => self.stdout.write_all(text.as_bytes()).map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
        }
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

fn load_instance(path: &Path) -> Result<MarketInstance> {
    parse_instance(&read_file(path)?).map_err(|e| in_file(path, e))
}

fn in_file(path: &Path, err: CliError) -> CliError {
    match err {
        CliError::Json(e) => CliError::Field { field: path.display().to_string(), message: e.to_string() },
        CliError::Field { field, message } => {
            CliError::Field { field: format!("{}: {field}", path.display()), message }
        }
        CliError::Core(e) => CliError::Field { field: path.display().to_string(), message: e.to_string() },
        other => other,
    }
}

fn budget_from_env() -> Result<Limits> {
    match std::env::var(BUDGET_VAR) {
        Ok(text) => text
            .trim()
            .parse::<u128>()
            .map(|enumeration| Limits { enumeration })
            .map_err(|_| CliError::Usage(format!("{BUDGET_VAR} must be a non-negative integer, got `{text}`"))),
        Err(_) => Ok(Limits::default()),
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(stderr, "{}", e.render()) } else { write!(stdout, "{}", e.render()) };
            return code;
        }
    };
    let limits = match budget_from_env() {
        Ok(l) => l,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_ERROR;
        }
    };
    let mut ctx = Context { stdout, stderr, limits };
    let outcome = match cli.command {
        Command::Gen(args) => gen(&mut ctx, args),
        Command::Solve(args) => solve(&mut ctx, args),
        Command::Verify(args) => verify(&mut ctx, args),
        Command::Robust(args) => robust(&mut ctx, args),
        Command::CheckGs(args) => check_gs(&mut ctx, args),
        Command::Bench(args) => bench(&mut ctx, args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(ctx.stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn gen(ctx: &mut Context<'_, '_>, args: GenArgs) -> Result<i32> {
    if args.items == 0 || args.buyers == 0 {
        return Err(CliError::Usage("--items and --buyers must be positive".into()));
    }
    if args.max_value < 0 {
        return Err(CliError::Usage("--max-value must be non-negative".into()));
    }
    if args.family != Family::General && args.items > 63 {
        return Err(CliError::Usage("unit-supply families allow at most 63 items".into()));
    }
    let instance = args.family.generate(args.items, args.buyers, args.max_value, args.max_supply.max(1), args.seed);
    ctx.emit(&to_canonical_json(&InstanceFile::from_instance(&instance)), args.output.as_deref())?;
    Ok(EXIT_OK)
}

fn certified_result(
    instance: &MarketInstance,
    method: Method,
    cert: &Certificate,
    counter: OracleCounter,
    trace: Option<&Path>,
) -> Result<ResultFile> {
    let verified = check_certificate(instance, cert)?.is_member();
    let welfare = instance.social_welfare(&cert.allocation)?;
    Ok(ResultFile {
        schema_version: SCHEMA_VERSION,
        method: method.name().into(),
        outcome: OutcomeJson::Certified,
        prices: Some(prices_to_json(&cert.prices)),
        allocation: Some(allocation_to_json(&cert.allocation)),
        welfare: Some(format!("{welfare}/1")),
        oracle_calls: counter.into(),
        verified,
        trace: trace.map(|p| p.display().to_string()),
    })
}

fn json_lines<T: Serialize>(rows: impl IntoIterator<Item = T>) -> String {
    rows.into_iter().map(|row| serde_json::to_string(&row).expect("trace rows serialize") + "\n").collect()
}

fn solve(ctx: &mut Context<'_, '_>, args: SolveArgs) -> Result<i32> {
    let instance = load_instance(&args.instance)?;
    let trace = args.trace.as_deref();
    let result = if args.algorithm == Method::Combinatorial {
        let mut counter = OracleCounter::default();
        let solved = solve_welfare_incremental(&instance, &mut counter)?;
        if let Some(path) = trace {
            let rows = solved.phases.iter().map(|p| {
                json!({
                    "phase": p.phase,
                    "item": p.item + 1,
                    "path": p.path.iter().map(|j| j + 1).collect::<Vec<_>>(),
                    "entrant": p.entrant + 1,
                    "prices": p.prices.iter().map(|&(j, v)| json!({"item": j + 1, "price": v})).collect::<Vec<_>>(),
                    "value_calls": p.value_calls,
                })
            });
            write_file(path, &json_lines(rows))?;
        }
        certified_result(&instance, args.algorithm, &solved.certificate, counter, trace)?
    } else {
        let options = SolveOptions { seed: args.seed, trace: trace.is_some(), ..SolveOptions::default() };
        let report = solve_with(&instance, args.algorithm, &options)?;
        if let Some(path) = trace {
            let rows = report.trace.iter().map(|e| {
                json!({
                    "attempt": e.attempt,
                    "iteration": e.iteration,
                    "point": e.point,
                    "value": e.value,
                    "subgradient": e.subgradient,
                })
            });
            write_file(path, &json_lines(rows))?;
        }
        match &report.outcome {
            Outcome::Certified(cert) => certified_result(&instance, args.algorithm, cert, report.counter, trace)?,
            Outcome::NoEquilibriumFound => ResultFile {
                schema_version: SCHEMA_VERSION,
                method: args.algorithm.name().into(),
                outcome: OutcomeJson::NoEquilibrium,
                prices: None,
                allocation: None,
                welfare: None,
                oracle_calls: report.counter.into(),
                verified: false,
                trace: trace.map(|p| p.display().to_string()),
            },
        }
    };
    ctx.emit(&to_canonical_json(&result), args.output.as_deref())?;
    Ok(match (result.outcome, result.verified) {
        (OutcomeJson::Certified, true) => EXIT_OK,
        (OutcomeJson::Certified, false) => {
            let _ = writeln!(ctx.stderr, "error: the solver's certificate failed verification");
            EXIT_ERROR
        }
        (OutcomeJson::NoEquilibrium, _) => {
            let _ = writeln!(ctx.stderr, "no Walrasian equilibrium found after every retry");
            EXIT_NEGATIVE
        }
    })
}

fn reject(ctx: &mut Context<'_, '_>, message: impl AsRef<str>) -> i32 {
    let _ = writeln!(ctx.stderr, "rejected: {}", message.as_ref());
    EXIT_ERROR
}

fn verify(ctx: &mut Context<'_, '_>, args: VerifyArgs) -> Result<i32> {
    let instance = load_instance(&args.instance)?;
    let file = parse_result(&read_file(&args.result)?).map_err(|e| in_file(&args.result, e))?;
    let Some((prices, allocation)) = result_certificate(&file, &instance).map_err(|e| in_file(&args.result, e))? else {
        return Ok(match find_walrasian_vertex_with(&instance, &ctx.limits)? {
            None => {
                ctx.say("confirmed: the market has no Walrasian equilibrium");
                EXIT_NEGATIVE
            }
            Some(p) => reject(ctx, format!("the result claims no equilibrium, but {p} is Walrasian")),
        });
    };
    let cert = Certificate { prices, allocation, witnesses: Vec::new(), oracle_calls: OracleCounter::default() };
    if let Membership::NotMember(rejection) = check_certificate(&instance, &cert)? {
        return Ok(reject(ctx, rejection.to_string()));
    }
    let welfare = instance.social_welfare(&cert.allocation)?;
    let recorded = parse_rational(file.welfare.as_deref().unwrap_or_default())?;
    if recorded != walrus_core::market::int(welfare) {
        return Ok(reject(ctx, format!("welfare is recorded as {recorded}, the allocation achieves {welfare}")));
    }
    match check_welfare_theorems_with(&instance, &cert, &ctx.limits)? {
        WelfareVerdict::Pass => {
            ctx.say(format!("verified: prices {} support an optimal allocation of welfare {welfare}", cert.prices));
            Ok(EXIT_OK)
        }
        verdict => Ok(reject(ctx, format!("{verdict:?}"))),
    }
}

#[derive(Debug, Serialize)]
struct ArcJson {
    from: String,
    to: String,
    buyer: usize,
    weight: i64,
}

fn node_name(node: Node) -> String {
    match node {
        Node::Item(j) => format!("item {}", j + 1),
        Node::Empty => "empty".into(),
    }
}

#[derive(Debug, Serialize)]
struct RobustFile {
    schema_version: u32,
    exists: bool,
    allocation: Vec<Vec<usize>>,
    prices: Option<Vec<String>>,
    slack: Option<String>,
    /// Exchanges leading to another optimal allocation, when prices do not exist.
    cycle: Option<Vec<ArcJson>>,
}

fn robust(ctx: &mut Context<'_, '_>, args: RobustArgs) -> Result<i32> {
    let instance = load_instance(&args.instance)?;
    let optimum = brute_force_welfare_with(&instance, &ctx.limits)?;
    let allocation = &optimum.optima[0];
    let report = compute_robust_prices(&instance, allocation)?;
    let cycle = match &report.witness {
        RobustWitness::ZeroCycle(arcs) => Some(
            arcs.iter()
                .map(|a| ArcJson { from: node_name(a.from), to: node_name(a.to), buyer: a.buyer + 1, weight: a.weight })
                .collect(),
        ),
        RobustWitness::Potential(_) => None,
    };
    let file = RobustFile {
        schema_version: SCHEMA_VERSION,
        exists: report.exists,
        allocation: allocation_to_json(allocation),
        prices: report.prices.as_ref().map(prices_to_json),
        slack: report.slack.as_ref().map(format_rational),
        cycle,
    };
    ctx.emit(&to_canonical_json(&file), args.output.as_deref())?;
    Ok(if report.exists { EXIT_OK } else { EXIT_NEGATIVE })
}

fn check_gs(ctx: &mut Context<'_, '_>, args: CheckGsArgs) -> Result<i32> {
    let instance = load_instance(&args.instance)?;
    let mut all = true;
    for (i, spec) in instance.buyers().iter().enumerate() {
        let verdict = spec.check_gross_substitutes(instance.n())?;
        match verdict {
            walrus_core::valuation::GsVerdict::GrossSubstitutes => ctx.say(format!("buyer {}: gross substitutes", i + 1)),
            walrus_core::valuation::GsVerdict::Violation(v) => {
                all = false;
                ctx.say(format!("buyer {}: exchange fails at {v}", i + 1));
            }
        }
    }
    Ok(if all { EXIT_OK } else { EXIT_NEGATIVE })
}

fn bench(ctx: &mut Context<'_, '_>, args: BenchArgs) -> Result<i32> {
    if args.family == Family::General {
        return Err(CliError::Usage("bench needs a gross-substitutes family".into()));
    }
    if let Some(&n) = args.items.0.iter().find(|&&n| n > 63) {
        return Err(CliError::Usage(format!("{n} items exceeds the limit of 63")));
    }
    let mut rows = Vec::new();
    for &n in &args.items.0 {
        for &m in &args.buyers.0 {
            let instance = args.family.generate(n, m, args.max_value, 1, args.seed);
            let mut counter = OracleCounter::default();
            let solved = solve_welfare_incremental(&instance, &mut counter)?;
            for p in &solved.phases {
                rows.push((n, m, p.phase, p.value_calls));
            }
        }
    }
    rows.sort_unstable();
    rows.dedup();
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["family", "items", "buyers", "seed", "phase", "value_calls"])?;
    for (n, m, phase, calls) in rows {
        writer.write_record([
            args.family.name().to_string(),
            n.to_string(),
            m.to_string(),
            args.seed.to_string(),
            phase.to_string(),
            calls.to_string(),
        ])?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    ctx.emit(&String::from_utf8(bytes).expect("csv output is UTF-8"), args.output.as_deref())?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_accept_lists_and_ranges() {
        assert_eq!(parse_counts("4,8, 16").unwrap().0, vec![4, 8, 16]);
        assert_eq!(parse_counts("2..4").unwrap().0, vec![2, 3, 4]);
        assert_eq!(parse_counts("2..=3").unwrap().0, vec![2, 3]);
        assert!(parse_counts("0,1").is_err());
        assert!(parse_counts("4..2").is_err());
        assert!(parse_counts("x").is_err());
    }

    #[test]
    fn help_exits_cleanly() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["walrus", "--help"], &mut out, &mut err), EXIT_OK);
        assert!(String::from_utf8(out).unwrap().contains("solve"));
        assert_eq!(run(["walrus", "solve"], &mut Vec::new(), &mut err), EXIT_ERROR);
    }
}
