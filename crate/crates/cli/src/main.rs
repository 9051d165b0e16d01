//! `ocalign` command-line front end.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ocalign::alignment::{parse_alignment, validate_alignment, RawAlignment};
use ocalign::bench::{bench_execution, record, slopes, write_csv, BenchRecord};
use ocalign::dot::{alignment_to_dot, execution_to_dot, net_to_dot, product_to_dot};
use ocalign::engine::{align_execution, align_prepared, prepare, AlignError, AlignOptions, Aligned};
use ocalign::flatten::{flatten_align, object_centric_contradictions};
use ocalign::generate::{generate_log, GeneratorSpec, NoiseSpec};
use ocalign::model::{extract_process_executions, parse_event_log, EventLog, ParseMode, ProcessExecution};
use ocalign::oracle::{brute_force_optimal, OracleLimits};
use ocalign::petri::{net_to_json, parse_ocpn, AcceptingNet};
use ocalign::product::ExpansionOptions;
use ocalign::search::{bindings_to_alignment, SearchLimits, SearchStats};

const EXIT_UNALIGNABLE: u8 = 2;
const EXIT_CAP: u8 = 3;
const EXIT_INPUT: u8 = 4;

#[derive(Parser)]
#[command(name = "ocalign", version, about = "Object-centric alignments of event logs against Petri nets")]
struct Cli {
    /// Reject unknown JSON fields instead of ignoring them.
    #[arg(long, global = true)]
    strict: bool,
    /// Worker threads for commands that handle several executions.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the process executions of a log.
    Extract {
        #[arg(long)]
        log: PathBuf,
    },
    /// Optimal alignments of process executions.
    Align(AlignArgs),
    /// Brute-force reference costs.
    Oracle {
        #[command(flatten)]
        args: AlignArgs,
        /// Also run the engine and report agreement.
        #[arg(long)]
        compare: bool,
    },
    /// Synchronous product net of one execution.
    Product {
        #[command(flatten)]
        input: Inputs,
        #[arg(long, default_value_t = 0)]
        execution: usize,
        #[arg(long, default_value_t = 0)]
        min_variable_count: u32,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        out: Format,
    },
    /// The net with variable arcs expanded for one execution's objects.
    Preprocess {
        #[command(flatten)]
        input: Inputs,
        #[arg(long, default_value_t = 0)]
        execution: usize,
        #[arg(long, default_value_t = 0)]
        min_variable_count: u32,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        out: Format,
    },
    /// Simulate a log by random walks through a net.
    Generate(GenerateArgs),
    /// Align every object separately against the projected net.
    FlattenAlign {
        #[command(flatten)]
        input: Inputs,
        #[arg(long, default_value_t = 0)]
        execution: usize,
    },
    /// Time the alignment of every execution and fit scaling slopes.
    Bench {
        #[command(flatten)]
        input: Inputs,
        /// Where to write the per-execution records; stdout if absent.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[command(flatten)]
        caps: Caps,
    },
    /// DOT rendering of a log execution, a net, a product or an alignment.
    ExportDot {
        #[arg(long, value_enum)]
        what: Artifact,
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        net: Option<PathBuf>,
        #[arg(long)]
        alignment: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        execution: usize,
    },
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    net: PathBuf,
}

#[derive(Args, Clone)]
struct Caps {
    #[arg(long, default_value_t = 5_000_000)]
    max_states: usize,
    #[arg(long, default_value_t = 600)]
    timeout_secs: u64,
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u32).range(0..=1))]
    min_variable_count: u32,
}

impl Caps {
    fn options(&self) -> AlignOptions {
        AlignOptions {
            expansion: ExpansionOptions {
                min_variable_count: self.min_variable_count,
                ..ExpansionOptions::default()
            },
            limits: SearchLimits {
                max_states: self.max_states,
                timeout: Duration::from_secs(self.timeout_secs),
                ..SearchLimits::default()
            },
        }
    }
}

#[derive(Args)]
struct AlignArgs {
    #[command(flatten)]
    input: Inputs,
    /// Index of the execution, or `all`.
    #[arg(long, default_value = "all")]
    execution: String,
    #[command(flatten)]
    caps: Caps,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    out: Format,
    /// Per-execution records as CSV.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    net: PathBuf,
    /// Objects per type, e.g. `order=1,item=1..3`.
    #[arg(long, value_parser = parse_object_counts)]
    objects: BTreeMap<String, (usize, usize)>,
    #[arg(long, default_value_t = 1)]
    executions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    remove: f64,
    #[arg(long, default_value_t = 0.0)]
    replace: f64,
    #[arg(long, default_value_t = 0.0)]
    insert: f64,
    #[arg(long, default_value_t = 200)]
    max_steps: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Dot,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Artifact {
    Execution,
    Net,
    Product,
    Alignment,
}

fn parse_object_counts(s: &str) -> Result<BTreeMap<String, (usize, usize)>, String> {
    let mut out = BTreeMap::new();
    for part in s.split(',').filter(|p| !p.is_empty()) {
        let (ty, n) = part.split_once('=').ok_or_else(|| format!("expected type=count, got `{part}`"))?;
        let num = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x}: {e}"));
        let range = match n.split_once("..") {
            Some((lo, hi)) => (num(lo)?, num(hi)?),
            None => (num(n)?, num(n)?),
        };
        if range.0 > range.1 {
            return Err(format!("empty range for {ty}"));
        }
        out.insert(ty.trim().to_string(), range);
    }
    Ok(out)
}

/// Why a command did not succeed, mapped to the exit code.
enum Failure {
    Input(String),
    Unalignable,
    Cap,
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::Unalignable => EXIT_UNALIGNABLE,
            Failure::Cap => EXIT_CAP,
            Failure::Internal(_) => 1,
        }
    }

    /// The more severe of two outcomes of a batch.
    fn worst(a: Option<Failure>, b: Option<Failure>) -> Option<Failure> {
        let rank = |f: &Option<Failure>| match f {
            None => 0,
            Some(Failure::Unalignable) => 1,
            Some(Failure::Cap) => 2,
            Some(Failure::Internal(_)) => 3,
            Some(Failure::Input(_)) => 4,
        };
        if rank(&b) > rank(&a) {
            b
        } else {
            a
        }
    }
}

type CmdResult = Result<Option<Failure>, Failure>;

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_log(path: &Path, mode: ParseMode) -> Result<EventLog, Failure> {
    parse_event_log(&read(path)?, mode).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_net(path: &Path, mode: ParseMode) -> Result<AcceptingNet, Failure> {
    parse_ocpn(&read(path)?, mode).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load(input: &Inputs, mode: ParseMode) -> Result<(Vec<ProcessExecution>, AcceptingNet), Failure> {
    let log = load_log(&input.log, mode)?;
    let net = load_net(&input.net, mode)?;
    Ok((extract_process_executions(&log), net))
}

fn pick(pxs: &[ProcessExecution], index: usize) -> Result<&ProcessExecution, Failure> {
    pxs.get(index)
        .ok_or_else(|| Failure::Input(format!("execution {index} out of range; the log has {}", pxs.len())))
}

fn selection(pxs: &[ProcessExecution], which: &str) -> Result<Vec<usize>, Failure> {
    if which == "all" {
        return Ok((0..pxs.len()).collect());
    }
    let i: usize = which
        .parse()
        .map_err(|_| Failure::Input(format!("--execution expects an index or `all`, got `{which}`")))?;
    pick(pxs, i)?;
    Ok(vec![i])
}

/// Writes to stdout; a reader that went away is not an error.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn print_json(v: &impl serde::Serialize) {
    emit(&format!("{}\n", serde_json::to_string_pretty(v).expect("serializable")));
}

fn stats_json(stats: Option<&SearchStats>) -> Value {
    stats.map_or(Value::Null, |s| serde_json::to_value(s).expect("serializable"))
}

/// Report entry for one execution plus its failure class.
fn report(index: usize, px: &ProcessExecution, outcome: &Result<Aligned, AlignError>) -> (Value, Option<Failure>) {
    let base = json!({
        "execution": index,
        "num_events": px.num_events(),
        "num_objects": px.num_objects(),
    });
    let mut v = base;
    let obj = v.as_object_mut().expect("object");
    let failure = match outcome {
        Ok(a) => {
            obj.insert("status".into(), json!("ok"));
            obj.insert("cost".into(), json!(a.cost));
            obj.insert("alignment".into(), json!(RawAlignment::from(&a.alignment)));
            obj.insert("stats".into(), stats_json(Some(&a.stats)));
            None
        }
        Err(e) => {
            let (status, failure) = if e.is_unalignable() {
                ("unalignable", Failure::Unalignable)
            } else if e.is_resource_cap() {
                ("cap", Failure::Cap)
            } else {
                ("error", Failure::Internal(e.to_string()))
            };
            obj.insert("status".into(), json!(status));
            obj.insert("message".into(), json!(e.to_string()));
            obj.insert("stats".into(), stats_json(e.stats()));
            Some(failure)
        }
    };
    (v, failure)
}

/// Runs `f` over the selected executions on the worker pool, keeping order.
fn par_map<T: Send>(indices: &[usize], f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    use rayon::prelude::*;
    indices.par_iter().map(|&i| f(i)).collect()
}

fn emit_batch(values: Vec<Value>, single: bool) {
    if single {
        print_json(&values.into_iter().next().expect("one entry"));
    } else {
        print_json(&json!({ "executions": values }));
    }
}

fn cmd_align(args: &AlignArgs, mode: ParseMode) -> CmdResult {
    let (pxs, net) = load(&args.input, mode)?;
    let indices = selection(&pxs, &args.execution)?;
    let opts = args.caps.options();
    let outcomes = par_map(&indices, |i| {
        let started = Instant::now();
        let r = align_execution(&pxs[i], &net, &opts);
        (r, started.elapsed().as_secs_f64())
    });

    let mut worst = None;
    let mut values = Vec::new();
    let mut records = Vec::new();
    for (&i, (outcome, secs)) in indices.iter().zip(&outcomes) {
        let (v, failure) = report(i, &pxs[i], outcome);
        if let Err(e) = outcome {
            log::warn!("execution {i}: {e}");
        }
        worst = Failure::worst(worst, failure);
        values.push(v);
        records.push(record(i, &pxs[i], outcome, *secs));
    }
    match args.out {
        Format::Json => emit_batch(values, args.execution != "all"),
        Format::Dot => {
            for (&i, (outcome, _)) in indices.iter().zip(&outcomes) {
                match outcome {
                    Ok(a) => emit(&alignment_to_dot(&a.alignment)),
                    Err(e) => eprintln!("execution {i}: {e}"),
                }
            }
        }
    }
    if let Some(path) = &args.stats {
        write_records(&records, Some(path))?;
    }
    Ok(worst)
}

fn write_records(records: &[BenchRecord], path: Option<&PathBuf>) -> Result<(), Failure> {
    let result = match path {
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
            write_csv(records, f)
        }
        None => write_csv(records, std::io::stdout().lock()),
    };
    result.map_err(|e| Failure::Internal(e.to_string()))
}

fn cmd_oracle(args: &AlignArgs, compare: bool, mode: ParseMode) -> CmdResult {
    let (pxs, net) = load(&args.input, mode)?;
    let indices = selection(&pxs, &args.execution)?;
    let opts = args.caps.options();
    // The engine's default state cap is far beyond what the exhaustive
    // oracle can hold, so the smaller of the two applies.
    let limits = OracleLimits {
        max_states: args.caps.max_states.min(OracleLimits::default().max_states),
        ..OracleLimits::default()
    };
    let results = par_map(&indices, |i| {
        let px = &pxs[i];
        let prepared = match prepare(px, &net, &opts.expansion) {
            Ok(p) => p,
            Err(e) => return (json!({"execution": i, "status": "error", "message": e.to_string()}), Some(Failure::Internal(e.to_string()))),
        };
        let mut v = json!({"execution": i, "num_events": px.num_events(), "num_objects": px.num_objects()});
        let obj = v.as_object_mut().expect("object");
        let oracle = brute_force_optimal(&prepared.product, &limits);
        let mut failure = None;
        match &oracle {
            Ok(r) => {
                obj.insert("status".into(), json!(if r.optimal_cost.is_some() { "ok" } else { "unalignable" }));
                obj.insert("cost".into(), json!(r.optimal_cost));
                obj.insert("explored".into(), json!(r.explored));
                if let Some(w) = &r.witness {
                    match bindings_to_alignment(w, &prepared.product, px) {
                        Ok(g) => {
                            obj.insert("alignment".into(), json!(RawAlignment::from(&g)));
                        }
                        Err(e) => failure = Some(Failure::Internal(e.to_string())),
                    }
                } else {
                    failure = Some(Failure::Unalignable);
                }
            }
            Err(e) => {
                let capped = matches!(e, ocalign::oracle::OracleError::StateCap(_));
                obj.insert("status".into(), json!(if capped { "cap" } else { "error" }));
                obj.insert("message".into(), json!(e.to_string()));
                failure = Some(if capped { Failure::Cap } else { Failure::Internal(e.to_string()) });
            }
        }
        if compare {
            let engine = align_prepared(px, &prepared, &opts.limits);
            let (ev, _) = report(i, px, &engine);
            let engine_cost = ev.get("cost").cloned().unwrap_or(Value::Null);
            let comparable = oracle.is_ok() && matches!(ev["status"].as_str(), Some("ok" | "unalignable"));
            let agree = comparable && engine_cost == obj["cost"];
            obj.insert("engine_status".into(), ev["status"].clone());
            obj.insert("engine_cost".into(), engine_cost);
            obj.insert("agree".into(), json!(agree));
            if comparable && !agree {
                failure = Some(Failure::Internal(format!("execution {i}: engine and oracle disagree")));
            }
        }
        (v, failure)
    });
    let mut worst = None;
    let mut values = Vec::new();
    for (v, f) in results {
        worst = Failure::worst(worst, f);
        values.push(v);
    }
    if args.out == Format::Dot {
        return Err(Failure::Input("the oracle reports JSON only".into()));
    }
    emit_batch(values, args.execution != "all");
    Ok(worst)
}

fn expansion(min_variable_count: u32) -> ExpansionOptions {
    ExpansionOptions {
        min_variable_count,
        ..ExpansionOptions::default()
    }
}

fn product_failure(e: ocalign::product::ProductError) -> Failure {
    if AlignError::from(e.clone()).is_resource_cap() {
        eprintln!("{e}");
        Failure::Cap
    } else {
        Failure::Input(e.to_string())
    }
}

fn cmd_product(input: &Inputs, execution: usize, min: u32, out: Format, mode: ParseMode) -> CmdResult {
    let (pxs, net) = load(input, mode)?;
    let px = pick(&pxs, execution)?;
    let prepared = prepare(px, &net, &expansion(min)).map_err(product_failure)?;
    match out {
        Format::Json => print_json(&prepared.product.to_json()),
        Format::Dot => emit(&product_to_dot(&prepared.product)),
    }
    Ok(None)
}

fn cmd_preprocess(input: &Inputs, execution: usize, min: u32, out: Format, mode: ParseMode) -> CmdResult {
    let (pxs, net) = load(input, mode)?;
    let px = pick(&pxs, execution)?;
    let expanded =
        ocalign::product::expand_variable_arcs(&net, &px.objects, &expansion(min)).map_err(product_failure)?;
    match out {
        Format::Json => print_json(&net_to_json(&expanded)),
        Format::Dot => emit(&net_to_dot(&expanded)),
    }
    Ok(None)
}

fn cmd_generate(args: &GenerateArgs, mode: ParseMode) -> CmdResult {
    let net = load_net(&args.net, mode)?;
    for p in [args.remove, args.replace, args.insert] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Failure::Input(format!("noise probability {p} outside [0, 1]")));
        }
    }
    let spec = GeneratorSpec {
        objects: args.objects.iter().map(|(t, &(lo, hi))| (t.as_str().into(), lo..=hi)).collect(),
        executions: args.executions,
        seed: args.seed,
        noise: NoiseSpec {
            remove: args.remove,
            replace: args.replace,
            insert: args.insert,
        },
        max_steps: args.max_steps,
        ..GeneratorSpec::default()
    };
    let log = generate_log(&net, &spec).map_err(|e| Failure::Input(e.to_string()))?;
    emit(&format!("{}\n", log.to_json()));
    Ok(None)
}

fn cmd_flatten(input: &Inputs, execution: usize, mode: ParseMode) -> CmdResult {
    let (pxs, net) = load(input, mode)?;
    let px = pick(&pxs, execution)?;
    let opts = AlignOptions::default();
    let flat = flatten_align(px, &net, &opts).map_err(|e| Failure::Internal(e.to_string()))?;
    let oc = align_execution(px, &net, &opts);
    let object_centric = match &oc {
        Ok(a) => json!({
            "status": "ok",
            "cost": a.cost,
            "contradictions": object_centric_contradictions(px, &net, &a.alignment),
        }),
        Err(e) => json!({"status": "error", "message": e.to_string()}),
    };
    print_json(&json!({
        "execution": execution,
        "flattened": flat,
        "object_centric": object_centric,
    }));
    Ok(None)
}

fn cmd_bench(input: &Inputs, csv: Option<&PathBuf>, repeats: usize, caps: &Caps, mode: ParseMode) -> CmdResult {
    let (pxs, net) = load(input, mode)?;
    let opts = caps.options();
    let indices: Vec<usize> = (0..pxs.len()).collect();
    let records = par_map(&indices, |i| bench_execution(i, &pxs[i], &net, &opts, repeats));
    write_records(&records, csv)?;
    let summary = json!({ "slopes": slopes(&records) });
    let text = serde_json::to_string_pretty(&summary).expect("serializable");
    if csv.is_some() {
        emit(&format!("{text}\n"));
    } else {
        eprintln!("{text}");
    }
    Ok(None)
}

fn cmd_export_dot(
    what: Artifact,
    log: Option<&PathBuf>,
    net: Option<&PathBuf>,
    alignment: Option<&PathBuf>,
    execution: usize,
    mode: ParseMode,
) -> CmdResult {
    let need = |p: Option<&PathBuf>, flag: &str| p.cloned().ok_or_else(|| Failure::Input(format!("--{flag} is required")));
    let dot = match what {
        Artifact::Execution => {
            let log = load_log(&need(log, "log")?, mode)?;
            let pxs = extract_process_executions(&log);
            execution_to_dot(pick(&pxs, execution)?)
        }
        Artifact::Net => net_to_dot(&load_net(&need(net, "net")?, mode)?),
        Artifact::Product => {
            let input = Inputs {
                log: need(log, "log")?,
                net: need(net, "net")?,
            };
            let (pxs, net) = load(&input, mode)?;
            let prepared = prepare(pick(&pxs, execution)?, &net, &ExpansionOptions::default()).map_err(product_failure)?;
            product_to_dot(&prepared.product)
        }
        Artifact::Alignment => {
            let path = need(alignment, "alignment")?;
            let g = parse_alignment(&read(&path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            if let (Some(log), Some(net)) = (log, net) {
                let (pxs, net) = load(&Inputs { log: log.clone(), net: net.clone() }, mode)?;
                if let Err(v) = validate_alignment(pick(&pxs, execution)?, &net, &g) {
                    for v in v {
                        eprintln!("warning: {v}");
                    }
                }
            }
            alignment_to_dot(&g)
        }
    };
    emit(&dot);
    Ok(None)
}

fn cmd_extract(log: &Path, mode: ParseMode) -> CmdResult {
    let log = load_log(log, mode)?;
    let pxs = extract_process_executions(&log);
    let values: Vec<Value> = pxs
        .iter()
        .enumerate()
        .map(|(i, px)| {
            json!({
                "execution": i,
                "num_events": px.num_events(),
                "num_objects": px.num_objects(),
                "objects": px.objects,
                "events": px.events,
                "edges": px.edges,
            })
        })
        .collect();
    print_json(&json!({ "executions": values }));
    Ok(None)
}

fn run(cli: Cli) -> CmdResult {
    let mode = if cli.strict { ParseMode::Strict } else { ParseMode::Lenient };
    match &cli.command {
        Command::Extract { log } => cmd_extract(log, mode),
        Command::Align(args) => cmd_align(args, mode),
        Command::Oracle { args, compare } => cmd_oracle(args, *compare, mode),
        Command::Product {
            input,
            execution,
            min_variable_count,
            out,
        } => cmd_product(input, *execution, *min_variable_count, *out, mode),
        Command::Preprocess {
            input,
            execution,
            min_variable_count,
            out,
        } => cmd_preprocess(input, *execution, *min_variable_count, *out, mode),
        Command::Generate(args) => cmd_generate(args, mode),
        Command::FlattenAlign { input, execution } => cmd_flatten(input, *execution, mode),
        Command::Bench {
            input,
            csv,
            repeats,
            caps,
        } => cmd_bench(input, csv.as_ref(), *repeats, caps, mode),
        Command::ExportDot {
            what,
            log,
            net,
            alignment,
            execution,
        } => cmd_export_dot(*what, log.as_ref(), net.as_ref(), alignment.as_ref(), *execution, mode),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("OCALIGN_LOG_LEVEL", "warn")).init();
    let cli = Cli::parse();
    let threads = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()).min(8));
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global() {
        log::warn!("could not size the worker pool: {e}");
    }
    let outcome = run(cli);
    match outcome {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(f)) | Err(f) => {
            match &f {
                Failure::Input(m) | Failure::Internal(m) => eprintln!("error: {m}"),
                Failure::Unalignable => eprintln!("no alignment exists for at least one execution"),
                Failure::Cap => eprintln!("a resource cap was exceeded"),
            }
            ExitCode::from(f.code())
        }
    }
}
