//! Plan execution. Each cell generates its locked instances, holds the
//! first out as the circuit under attack, trains the configured attacks
//! on the remaining instances, and writes every artifact it produced —
//! instances, key files, reports, a manifest with every seed, a metrics
//! row, and finally a completion marker. Reruns skip completed cells.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attacks::{
    gen_training_data, redundancy_attack, sail_attack, sweep_attack, train_rf,
    type_decode_attack, AttackReport, RandomForest, ReconModel, TrainingData, DEFAULT_TREES,
};
use crate::bench::{parse_bench, write_bench};
use crate::defense::{unsail_lock, UnsailConfig};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::fault::{fault_coverage, FaultConfig};
use crate::features::{extract_samples, fisher_f1, label_changes, SubgraphSample, SUB_SIZES};
use crate::lock::lock_with;
use crate::netlist::{KeyMapping, Netlist};
use crate::rewrite::resynthesize;
use crate::sim::corruption;
use crate::verilog::parse_verilog;

use super::plan::{CellSpec, ExperimentPlan};
use super::summary::CellRow;

/// Wrong keys × patterns for the output-corruption protocol.
const HD_WRONG_KEYS: usize = 100;
const HD_PATTERNS: usize = 10_000;
/// Forest training reads sub-size-3 windows; the reconstructor uses all.
const RF_SUB: usize = 3;
const SWEEP_MARGIN: f64 = 0.0;
const REDUNDANCY_CONE_LIMIT: usize = 12;
const FAULT_PATTERNS: usize = 256;
const FAULT_EXHAUSTIVE_LIMIT: usize = 8;

pub const DONE_MARKER: &str = "DONE";

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub workers: usize,
    /// Restrict execution to cells whose name contains this substring.
    pub only: Option<String>,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> RunOptions {
        RunOptions { out_dir: out_dir.into(), workers: 1, only: None }
    }
}

/// Reads a corpus netlist, dispatching on the file extension.
pub fn load_netlist(path: &Path) -> Result<Netlist> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Plan(format!("corpus file {}: {e}", path.display())))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("v") => parse_verilog(&text),
        _ => parse_bench(&text),
    }
}

/// One generated locked instance plus the reference forms needed to
/// label its key neighborhoods truthfully.
struct Instance {
    locked: Netlist,
    mapping: KeyMapping,
    /// The locked netlist as it stood before the rewrite pass; for
    /// defended instances this covers the first-phase keys only, and the
    /// confusion keys are unchanged by definition (inserted afterwards).
    pre: Netlist,
}

fn generate_instance(cell: &CellSpec, original: &Netlist, effort: usize, seed: u64) -> Result<Instance> {
    if cell.scheme.defended {
        let out = unsail_lock(
            original,
            &UnsailConfig {
                k: cell.k,
                scheme: cell.scheme.base,
                palette: cell.palette.clone(),
                effort,
                seed,
                fill_up: true,
            },
        )?;
        Ok(Instance { locked: out.record.locked, mapping: out.record.mapping, pre: out.phase1 })
    } else {
        // Same salts as the defended pipeline: lock under derive(seed, 1),
        // rewrite under derive(seed, 2).
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
        let rec = lock_with(original, cell.scheme.base, cell.k, &cell.palette, &mut rng)?;
        let locked = resynthesize(&rec.locked, effort, derive_seed(seed, 2))?;
        Ok(Instance { locked, mapping: rec.mapping, pre: rec.locked })
    }
}

/// True change labels for every key window of an instance, taken against
/// its own pre-rewrite form. Confusion keys never went through the
/// rewrite, so their reference is their current form.
fn truth_labeled_samples(inst: &Instance, sizes: &[usize]) -> Result<Vec<SubgraphSample>> {
    let post = extract_samples(&inst.locked, sizes)?;
    let phase1: HashSet<&str> = inst.pre.key_names().collect();
    let mut pre = extract_samples(&inst.pre, sizes)?;
    if phase1.len() != inst.locked.key_inputs().len() {
        pre.extend(
            post.iter().filter(|s| !phase1.contains(s.key_name.as_str())).cloned(),
        );
    }
    label_changes(&pre, &post)
}

fn write_report(dir: &Path, attack: &str, report: &AttackReport) -> Result<()> {
    std::fs::write(dir.join(format!("{attack}_report.csv")), report.to_csv())?;
    Ok(())
}

fn cell_manifest(cell: &CellSpec, plan: &ExperimentPlan, cell_seed: u64, seeds: &[u64]) -> String {
    let mut out = String::new();
    out.push_str(&format!("name = {:?}\n", cell.name));
    out.push_str(&format!("circuit = {:?}\n", cell.circuit_path.display().to_string()));
    out.push_str(&format!("scheme = {:?}\n", cell.scheme.label()));
    out.push_str(&format!("palette = {:?}\n", cell.palette.label()));
    out.push_str(&format!("k = {}\n", cell.k));
    out.push_str(&format!("effort = {}\n", plan.effort));
    out.push_str(&format!("plan_seed = {}\n", plan.seed));
    out.push_str(&format!("cell_seed = {cell_seed}\n"));
    out.push_str(&format!(
        "instance_seeds = [{}]\n",
        seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(", ")
    ));
    out.push_str(&format!("attacks = {:?}\n", plan.attacks));
    out
}

fn run_cell(cell: &CellSpec, plan: &ExperimentPlan, original: &Netlist, dir: &Path) -> Result<CellRow> {
    std::fs::create_dir_all(dir)?;
    let cell_seed = cell.seed(plan.seed);
    let instance_seeds: Vec<u64> =
        (0..plan.seeds).map(|i| derive_seed(cell_seed, i as u64)).collect();
    std::fs::write(
        dir.join("manifest.toml"),
        cell_manifest(cell, plan, cell_seed, &instance_seeds),
    )?;

    let mut instances = Vec::with_capacity(plan.seeds);
    for (i, &s) in instance_seeds.iter().enumerate() {
        let inst = generate_instance(cell, original, plan.effort, s)?;
        std::fs::write(dir.join(format!("inst_{i:02}.bench")), write_bench(&inst.locked))?;
        std::fs::write(dir.join(format!("inst_{i:02}.key")), inst.mapping.to_key_file())?;
        instances.push(inst);
    }
    let target = &instances[0];

    let mut row = CellRow::new(cell, plan.seeds);

    // Target-side ground truth: change labels, separability, corruption,
    // and detectability under the correct key.
    let labeled = truth_labeled_samples(target, &SUB_SIZES)?;
    let sub3: Vec<&SubgraphSample> =
        labeled.iter().filter(|s| s.sub_size == RF_SUB).collect();
    let owned_sub3: Vec<SubgraphSample> = sub3.iter().map(|&s| s.clone()).collect();
    row.f1 = fisher_f1(&owned_sub3).ok();
    let cr = corruption(
        original,
        &target.locked,
        &target.mapping,
        HD_WRONG_KEYS,
        HD_PATTERNS,
        derive_seed(cell_seed, 0xC0),
    )?;
    row.hd = Some(cr.hd);
    row.oer = Some(cr.oer);
    let fr = fault_coverage(
        &target.locked,
        Some(&target.mapping),
        &FaultConfig {
            patterns: FAULT_PATTERNS,
            seed: derive_seed(cell_seed, 0xD0),
            exhaustive_limit: FAULT_EXHAUSTIVE_LIMIT,
        },
    )?;
    row.fault_cov = Some(fr.fault_coverage());
    row.type_acc = Some(type_decode_attack(&target.locked, &target.mapping)?.accuracy);

    if plan.attacks.iter().any(|a| a == "sail") {
        // The attacker relocks each training sibling once; the held-out
        // target instance contributes nothing to the corpus.
        let mut data = TrainingData { rows: Vec::new(), pairs: Vec::new() };
        for (i, sib) in instances.iter().enumerate().skip(1) {
            let mut part = gen_training_data(
                &sib.locked,
                &cell.circuit,
                cell.scheme.base,
                &cell.palette,
                1,
                &SUB_SIZES,
                plan.effort,
                derive_seed(cell_seed, 0x5000 + i as u64),
            )?;
            for r in &mut part.rows {
                r.instance = i;
            }
            data.rows.extend(part.rows);
            data.pairs.extend(part.pairs);
        }
        let rf = match train_rf(&data, RF_SUB, DEFAULT_TREES, derive_seed(cell_seed, 0xA0)) {
            Ok(rf) => rf,
            // A weak rewrite can leave every training neighborhood with
            // the same label; the constant predictor is the honest model
            // of that corpus, and the attack still runs through it.
            Err(Error::SingleClass) => {
                let (xs, ys) = data.matrix_at(RF_SUB);
                RandomForest::constant(ys[0], xs[0].len())
            }
            Err(e) => return Err(e),
        };
        let recon = ReconModel::train(&data.pairs);
        let report = sail_attack(&target.locked, &rf, &recon, &target.mapping)?;
        write_report(dir, "sail", &report)?;
        row.sail_acc = Some(report.accuracy);
        row.ml1_acc = report.ml1_accuracy;
        row.ml2_acc = report.ml2_accuracy;
        // Forest quality measured against the target's true change labels.
        let xs: Vec<Vec<u8>> = sub3.iter().map(|s| s.one_hot.clone()).collect();
        let ys: Vec<_> = sub3.iter().filter_map(|s| s.label).collect();
        if ys.len() == xs.len() && !ys.is_empty() {
            row.rf_change_acc = Some(rf.accuracy(&xs, &ys));
        }
    }

    if plan.attacks.iter().any(|a| a == "sweep") {
        let training: Vec<(Netlist, KeyMapping)> = instances
            .iter()
            .skip(1)
            .map(|i| (i.locked.clone(), i.mapping.clone()))
            .collect();
        let report = sweep_attack(&training, &target.locked, SWEEP_MARGIN, &target.mapping)?;
        write_report(dir, "sweep", &report)?;
        row.sweep_acc = Some(report.accuracy);
    }

    if plan.attacks.iter().any(|a| a == "redundancy") {
        let report =
            redundancy_attack(&target.locked, &target.mapping, REDUNDANCY_CONE_LIMIT)?;
        write_report(dir, "redundancy", &report)?;
        row.redundancy_acc = Some(report.accuracy);
    }

    std::fs::write(dir.join("row.csv"), format!("{}\n{}\n", CellRow::HEADER, row.to_csv_line()))?;
    std::fs::write(dir.join(DONE_MARKER), "")?;
    Ok(row)
}

/// Executes every cell of the plan (subject to `only`), resuming past
/// completed cells, and writes `summary.csv` over all completed rows in
/// plan order. Returns the rows. Cell failures are recorded in the cell
/// directory and as an empty slot; the run keeps going.
pub fn run_plan(plan: &ExperimentPlan, opts: &RunOptions) -> Result<Vec<CellRow>> {
    let cells: Vec<CellSpec> = plan
        .cells()
        .into_iter()
        .filter(|c| opts.only.as_deref().is_none_or(|o| c.name.contains(o)))
        .collect();
    if cells.is_empty() {
        return Err(Error::Plan("plan selects no cells".into()));
    }
    std::fs::create_dir_all(&opts.out_dir)?;
    std::fs::write(opts.out_dir.join("plan.toml"), plan.to_toml())?;

    // Corpus problems are plan-level errors, caught before any work runs.
    let mut originals: Vec<Netlist> = Vec::with_capacity(cells.len());
    for c in &cells {
        originals.push(load_netlist(&c.circuit_path)?);
    }

    let slots: Mutex<Vec<Option<CellRow>>> = Mutex::new(vec![None; cells.len()]);
    let next = AtomicUsize::new(0);
    let workers = opts.workers.max(1).min(cells.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cells.len() {
                    break;
                }
                let cell = &cells[i];
                let dir = opts.out_dir.join("cells").join(&cell.name);
                let outcome = if dir.join(DONE_MARKER).exists() {
                    CellRow::read_file(&dir.join("row.csv"))
                } else {
                    run_cell(cell, plan, &originals[i], &dir)
                };
                match outcome {
                    Ok(row) => slots.lock().unwrap()[i] = Some(row),
                    Err(e) => {
                        let _ = std::fs::create_dir_all(&dir);
                        let _ = std::fs::write(dir.join("ERROR"), format!("{e}\n"));
                    }
                }
            });
        }
    });

    let rows: Vec<CellRow> = slots.into_inner().unwrap().into_iter().flatten().collect();
    let mut csv = String::from(CellRow::HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.to_csv_line());
        csv.push('\n');
    }
    std::fs::write(opts.out_dir.join("summary.csv"), csv)?;
    Ok(rows)
}
