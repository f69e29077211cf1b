//! Command-line front end over the workbench library: circuit generation,
//! locking, the rewrite pass, defended locking, the oracle-less attack
//! suite, and experiment-plan execution.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lockbench::attacks::{
    gen_training_data, redundancy_attack, sail_attack, sweep_attack, train_rf, AttackReport,
    RandomForest, ReconModel, TrainingData, DEFAULT_TREES,
};
use lockbench::bench::write_bench;
use lockbench::defense::{injection_stats, unsail_lock, UnsailConfig};
use lockbench::derive_seed;
use lockbench::features::SUB_SIZES;
use lockbench::gen::{random_netlist, GenConfig};
use lockbench::harness::{load_netlist, run_plan, summarize, ExperimentPlan, RunOptions};
use lockbench::lock::{lock_with, Palette, Scheme};
use lockbench::netlist::{KeyMapping, Netlist};
use lockbench::rewrite::{report, resynthesize, SynthReport};
use lockbench::verilog::write_verilog;
use lockbench::{Error, Result};

/// Forest models read the smallest subgraph windows; reconstruction uses
/// every extracted size.
const RF_SUB: usize = 3;

#[derive(Parser)]
#[command(name = "lockbench", version, about = "Gate-level logic-locking workbench")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a seeded random benchmark circuit
    Gen(GenArgs),
    /// Insert key-gates under a site-selection scheme
    Lock(LockArgs),
    /// Run the seeded local-rewrite pass
    Resynth(ResynthArgs),
    /// Print a netlist's gate census as a CSV row
    Report(ReportArgs),
    /// Defended locking: scheme keys, a rewrite, then confusion key-gates
    Unsail(UnsailArgs),
    /// Oracle-less attacks against a locked netlist
    #[command(subcommand)]
    Attack(AttackCmd),
    /// Execute an experiment plan
    Run(RunArgs),
    /// Aggregate a run directory into CSV and a text table
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    inputs: usize,
    #[arg(long)]
    gates: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct LockArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long, value_name = "rll|fll|sll")]
    scheme: String,
    #[arg(long, value_name = "xnor|cl_v1..cl_v4")]
    palette: String,
    #[arg(short = 'K', value_name = "BITS")]
    k: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    key_out: PathBuf,
}

#[derive(Args)]
struct ResynthArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 2)]
    effort: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(short, long)]
    input: PathBuf,
}

#[derive(Args)]
struct UnsailArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short = 'K', value_name = "BITS")]
    k: usize,
    #[arg(long, value_name = "rll|fll|sll")]
    scheme: String,
    #[arg(long, value_name = "xnor|cl_v1..cl_v4")]
    palette: String,
    #[arg(long, default_value_t = 2)]
    effort: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    key_out: PathBuf,
    #[arg(long)]
    stats_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum AttackCmd {
    /// Change prediction plus reconstruction over key-gate surroundings
    Sail(SailArgs),
    /// Synthesis-report deltas from constant-propagating each key bit
    Sweep(SweepArgs),
    /// Stuck-at redundancy counting on the key pin
    Redundancy(RedundancyArgs),
}

#[derive(Args)]
struct SailArgs {
    #[arg(long)]
    target: PathBuf,
    /// Correct key file, used for scoring only
    #[arg(long)]
    truth: PathBuf,
    /// Directory of locked sibling netlists to build the corpus from
    #[arg(long)]
    train_dir: PathBuf,
    /// Scheme the attacker assumes the victim used for locking
    #[arg(long, default_value = "rll")]
    scheme: String,
    /// Palette the attacker relocks with
    #[arg(long, default_value = "xnor")]
    palette: String,
    /// Rewrite effort the attacker assumes the victim used
    #[arg(long, default_value_t = 2)]
    effort: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Directory of locked siblings; each .bench needs a matching .key
    #[arg(long)]
    train_dir: PathBuf,
    /// Abstain when the two class scores are closer than this
    #[arg(long, default_value_t = 0.0)]
    margin: f64,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct RedundancyArgs {
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Exhaustive fault-proof bound on cone support size
    #[arg(long, default_value_t = 12)]
    cone_limit: usize,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    plan: PathBuf,
    /// Output directory; falls back to the plan's out_dir
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Only run cells whose name contains this substring
    #[arg(long)]
    only: Option<String>,
}

#[derive(Args)]
struct SummarizeArgs {
    run_dir: PathBuf,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Lock(a) => cmd_lock(a),
        Cmd::Resynth(a) => cmd_resynth(a),
        Cmd::Report(a) => cmd_report(a),
        Cmd::Unsail(a) => cmd_unsail(a),
        Cmd::Attack(AttackCmd::Sail(a)) => cmd_sail(a),
        Cmd::Attack(AttackCmd::Sweep(a)) => cmd_sweep(a),
        Cmd::Attack(AttackCmd::Redundancy(a)) => cmd_redundancy(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Summarize(a) => cmd_summarize(a),
    }
}

fn parse_scheme(s: &str) -> Result<Scheme> {
    Scheme::parse(s).ok_or_else(|| Error::Invalid(format!("unknown scheme `{s}`")))
}

fn read_key(path: &Path) -> Result<KeyMapping> {
    KeyMapping::parse_key_file(&std::fs::read_to_string(path)?)
}

fn write_file(path: &Path, text: String) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Writes the format the extension asks for: `.v` Verilog, BENCH otherwise.
fn write_netlist(path: &Path, n: &Netlist) -> Result<()> {
    let text = if path.extension().and_then(|e| e.to_str()) == Some("v") {
        let module: String = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "top".into())
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        write_verilog(n, &module)
    } else {
        write_bench(n)
    };
    write_file(path, text)
}

/// Locked netlists in a corpus directory, sorted by name, minus the
/// attack target itself if it happens to live there.
fn corpus_files(dir: &Path, exclude: &Path) -> Result<Vec<PathBuf>> {
    let excluded = std::fs::canonicalize(exclude).ok();
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            matches!(p.extension().and_then(|e| e.to_str()), Some("bench") | Some("v"))
        })
        .filter(|p| excluded.is_none() || std::fs::canonicalize(p).ok() != excluded)
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Invalid(format!("no netlists to train on in {}", dir.display())));
    }
    Ok(files)
}

fn finish_report(name: &str, rep: &AttackReport, path: &Path) -> Result<()> {
    write_file(path, rep.to_csv())?;
    let decided = rep.guesses.iter().filter(|g| g.guess.is_some()).count();
    println!(
        "{name}: accuracy {:.4} over {} keys, {decided} decided -> {}",
        rep.accuracy,
        rep.guesses.len(),
        path.display()
    );
    Ok(())
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let n = random_netlist(&GenConfig::new(a.inputs, a.gates, a.seed))?;
    write_netlist(&a.output, &n)?;
    println!(
        "generated {} inputs, {} gates, {} outputs -> {}",
        a.inputs,
        a.gates,
        n.po_ports().count(),
        a.output.display()
    );
    Ok(())
}

fn cmd_lock(a: LockArgs) -> Result<()> {
    let n = load_netlist(&a.input)?;
    let scheme = parse_scheme(&a.scheme)?;
    let palette = Palette::parse(&a.palette)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let rec = lock_with(&n, scheme, a.k, &palette, &mut rng)?;
    write_netlist(&a.output, &rec.locked)?;
    write_file(&a.key_out, rec.mapping.to_key_file())?;
    println!(
        "locked with K={} ({}/{}) -> {}, key -> {}",
        a.k,
        a.scheme,
        a.palette,
        a.output.display(),
        a.key_out.display()
    );
    Ok(())
}

fn cmd_resynth(a: ResynthArgs) -> Result<()> {
    let n = load_netlist(&a.input)?;
    let out = resynthesize(&n, a.effort, a.seed)?;
    write_netlist(&a.output, &out)?;
    let (before, after) = (report(&n), report(&out));
    println!(
        "rewrote at effort {}: {} -> {} gates, depth {} -> {} -> {}",
        a.effort,
        before.total_gates,
        after.total_gates,
        before.logic_depth,
        after.logic_depth,
        a.output.display()
    );
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let n = load_netlist(&a.input)?;
    println!("{}", SynthReport::csv_header());
    println!("{}", report(&n).csv_row());
    Ok(())
}

fn cmd_unsail(a: UnsailArgs) -> Result<()> {
    let n = load_netlist(&a.input)?;
    let scheme = parse_scheme(&a.scheme)?;
    let palette = Palette::parse(&a.palette)?;
    let out = unsail_lock(&n, &UnsailConfig::new(a.k, scheme, palette, a.effort, a.seed))?;
    write_netlist(&a.output, &out.record.locked)?;
    write_file(&a.key_out, out.record.mapping.to_key_file())?;
    let stats = injection_stats(&out);
    if let Some(path) = &a.stats_out {
        write_file(
            path,
            format!(
                "dictionary_matched,u_targeted,fill_up,confusion_keys,total_keys,dictionary_entries\n\
                 {},{},{},{},{},{}\n",
                stats.dictionary_matched,
                stats.u_targeted,
                stats.fill_up,
                stats.total(),
                out.record.mapping.len(),
                out.dictionary.entries().count(),
            ),
        )?;
    }
    println!(
        "defended lock K={} ({} confusion keys: {} dictionary, {} unchanged-set, {} fill) -> {}",
        out.record.mapping.len(),
        stats.total(),
        stats.dictionary_matched,
        stats.u_targeted,
        stats.fill_up,
        a.output.display()
    );
    Ok(())
}

fn cmd_sail(a: SailArgs) -> Result<()> {
    let target = load_netlist(&a.target)?;
    let truth = read_key(&a.truth)?;
    let scheme = parse_scheme(&a.scheme)?;
    let palette = Palette::parse(&a.palette)?;
    let mut data = TrainingData { rows: Vec::new(), pairs: Vec::new() };
    for (i, f) in corpus_files(&a.train_dir, &a.target)?.iter().enumerate() {
        let sib = load_netlist(f)?;
        let tag = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let mut part = gen_training_data(
            &sib,
            &tag,
            scheme,
            &palette,
            1,
            &SUB_SIZES,
            a.effort,
            derive_seed(a.seed, i as u64),
        )?;
        for r in &mut part.rows {
            r.instance = i;
        }
        data.rows.extend(part.rows);
        data.pairs.extend(part.pairs);
    }
    let rf = match train_rf(&data, RF_SUB, DEFAULT_TREES, derive_seed(a.seed, 0xA0)) {
        Ok(rf) => rf,
        // One-class corpus: nothing to learn, model the constant honestly.
        Err(Error::SingleClass) => {
            let (xs, ys) = data.matrix_at(RF_SUB);
            RandomForest::constant(ys[0], xs[0].len())
        }
        Err(e) => return Err(e),
    };
    let recon = ReconModel::train(&data.pairs);
    finish_report("sail", &sail_attack(&target, &rf, &recon, &truth)?, &a.report)
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let target = load_netlist(&a.target)?;
    let truth = read_key(&a.truth)?;
    let mut training = Vec::new();
    for f in corpus_files(&a.train_dir, &a.target)? {
        let key_path = f.with_extension("key");
        if !key_path.is_file() {
            return Err(Error::Invalid(format!(
                "{} has no matching key file {}",
                f.display(),
                key_path.display()
            )));
        }
        training.push((load_netlist(&f)?, read_key(&key_path)?));
    }
    finish_report("sweep", &sweep_attack(&training, &target, a.margin, &truth)?, &a.report)
}

fn cmd_redundancy(a: RedundancyArgs) -> Result<()> {
    let target = load_netlist(&a.target)?;
    let truth = read_key(&a.truth)?;
    finish_report(
        "redundancy",
        &redundancy_attack(&target, &truth, a.cone_limit)?,
        &a.report,
    )
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let plan = ExperimentPlan::load(&a.plan)?;
    let out_dir = a
        .out
        .or_else(|| plan.out_dir.clone())
        .ok_or_else(|| Error::Plan("no output directory: pass --out or set out_dir".into()))?;
    let mut opts = RunOptions::new(out_dir.clone());
    opts.workers = a.workers;
    opts.only = a.only;
    let rows = run_plan(&plan, &opts)?;
    println!(
        "ran {} of {} cells -> {}",
        rows.len(),
        plan.cells().len(),
        out_dir.join("summary.csv").display()
    );
    Ok(())
}

fn cmd_summarize(a: SummarizeArgs) -> Result<()> {
    let summary = summarize(&a.run_dir)?;
    print!("{}", summary.render_text());
    println!(
        "{} cells -> {}",
        summary.rows.len(),
        a.run_dir.join("aggregate.csv").display()
    );
    Ok(())
}
