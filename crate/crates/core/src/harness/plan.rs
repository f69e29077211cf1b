//! Experiment plans: a TOML file names the circuits, locking
//! configurations and attacks; everything else (instance counts, seeds,
//! rewrite effort) has defaults matching the study protocol. A plan
//! expands into a deterministic list of cells, one per
//! (circuit, scheme, palette, K) combination.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lock::{Palette, Scheme};
use crate::{derive_seed, stable_hash};

/// Per-configuration instance count. One instance is held out as the
/// circuit under attack; the rest feed attack-model training.
pub const DEFAULT_SEEDS: usize = 20;
pub const DEFAULT_EFFORT: usize = 2;

fn default_seeds() -> usize {
    DEFAULT_SEEDS
}
fn default_effort() -> usize {
    DEFAULT_EFFORT
}
fn default_plan_seed() -> u64 {
    1
}
fn default_attacks() -> Vec<String> {
    vec!["sail".to_string()]
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    /// Corpus netlist files (.bench or .v), one per circuit.
    pub circuits: Vec<PathBuf>,
    /// Locking schemes: `rll`, `fll`, `sll`, or `unsail-<scheme>` for the
    /// defended variant built on that scheme.
    pub schemes: Vec<String>,
    pub palettes: Vec<String>,
    pub k: Vec<usize>,
    /// Locked instances per cell (default 20).
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default = "default_effort")]
    pub effort: usize,
    /// Any subset of `sail`, `sweep`, `redundancy` (default just `sail`).
    #[serde(default = "default_attacks")]
    pub attacks: Vec<String>,
    #[serde(default = "default_plan_seed")]
    pub seed: u64,
    /// Default output directory; the CLI may override it.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

/// Scheme column of a cell: the base placement heuristic plus whether the
/// defensive insertion pipeline wraps it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellScheme {
    pub base: Scheme,
    pub defended: bool,
}

impl CellScheme {
    pub fn parse(s: &str) -> Option<CellScheme> {
        let (defended, rest) = match s.strip_prefix("unsail-") {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        Scheme::parse(rest).map(|base| CellScheme { base, defended })
    }

    pub fn label(&self) -> String {
        if self.defended {
            format!("unsail-{}", self.base.label())
        } else {
            self.base.label().to_string()
        }
    }
}

/// One unit of work: everything needed to generate, lock, attack and
/// score a configuration, independent of every other cell.
#[derive(Debug, Clone)]
pub struct CellSpec {
    pub circuit_path: PathBuf,
    pub circuit: String,
    pub scheme: CellScheme,
    pub palette: Palette,
    pub k: usize,
    pub name: String,
}

impl CellSpec {
    /// Cell seeds key off the cell NAME, not its position, so extending a
    /// plan with more circuits or schemes never perturbs existing cells.
    pub fn seed(&self, plan_seed: u64) -> u64 {
        derive_seed(plan_seed, stable_hash(&self.name))
    }
}

const KNOWN_ATTACKS: [&str; 3] = ["sail", "sweep", "redundancy"];

impl ExperimentPlan {
    pub fn parse(text: &str) -> Result<ExperimentPlan> {
        let plan: ExperimentPlan =
            toml::from_str(text).map_err(|e| Error::Plan(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<ExperimentPlan> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Plan(format!("{}: {e}", path.display())))?;
        ExperimentPlan::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("plan serializes")
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Plan(msg));
        if self.circuits.is_empty() {
            return fail("plan lists no circuits".into());
        }
        if self.seeds < 2 {
            return fail(format!(
                "seeds = {} leaves nothing to train on after holding one instance out",
                self.seeds
            ));
        }
        for s in &self.schemes {
            if CellScheme::parse(s).is_none() {
                return fail(format!("unknown scheme `{s}`"));
            }
        }
        for p in &self.palettes {
            Palette::parse(p).map_err(|_| Error::Plan(format!("unknown palette `{p}`")))?;
        }
        if self.schemes.is_empty() || self.palettes.is_empty() || self.k.is_empty() {
            return fail("schemes, palettes and k must each list at least one value".into());
        }
        if self.k.contains(&0) {
            return fail("k values must be positive".into());
        }
        for a in &self.attacks {
            if !KNOWN_ATTACKS.contains(&a.as_str()) {
                return fail(format!("unknown attack `{a}`"));
            }
        }
        Ok(())
    }

    /// The cross product in plan order: circuits, then schemes, palettes,
    /// K. Order is part of the replay contract (summary rows follow it).
    pub fn cells(&self) -> Vec<CellSpec> {
        let mut out = Vec::new();
        for path in &self.circuits {
            let circuit = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            for s in &self.schemes {
                let scheme = CellScheme::parse(s).expect("validated");
                for p in &self.palettes {
                    let palette = Palette::parse(p).expect("validated");
                    for &k in &self.k {
                        let name =
                            format!("{circuit}-{}-{}-K{k}", scheme.label(), palette.label());
                        out.push(CellSpec {
                            circuit_path: path.clone(),
                            circuit: circuit.clone(),
                            scheme,
                            palette: palette.clone(),
                            k,
                            name,
                        });
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLAN: &str = r#"
        circuits = ["corpus/c432.bench", "corpus/c880.bench"]
        schemes = ["rll", "unsail-rll"]
        palettes = ["xnor", "cl_v2"]
        k = [8]
        seeds = 4
        effort = 1
        attacks = ["sail", "sweep"]
        seed = 99
    "#;

    #[test]
    fn parses_and_expands_the_cross_product_in_stable_order() {
        let plan = ExperimentPlan::parse(PLAN).unwrap();
        let cells = plan.cells();
        assert_eq!(cells.len(), 2 * 2 * 2);
        assert_eq!(cells[0].name, "c432-rll-xnor-K8");
        assert_eq!(cells[1].name, "c432-rll-cl_v2-K8");
        assert_eq!(cells[2].name, "c432-unsail-rll-xnor-K8");
        assert_eq!(cells[7].name, "c880-unsail-rll-cl_v2-K8");
        assert!(cells[2].scheme.defended);
        assert_eq!(cells[2].scheme.base, Scheme::Rll);
    }

    #[test]
    fn defaults_cover_seeds_effort_attacks_and_plan_seed() {
        let plan = ExperimentPlan::parse(
            "circuits = [\"a.bench\"]\nschemes = [\"rll\"]\npalettes = [\"xnor\"]\nk = [2]\n",
        )
        .unwrap();
        assert_eq!(plan.seeds, DEFAULT_SEEDS);
        assert_eq!(plan.effort, DEFAULT_EFFORT);
        assert_eq!(plan.attacks, vec!["sail".to_string()]);
        assert_eq!(plan.seed, 1);
        assert!(plan.out_dir.is_none());
    }

    #[test]
    fn rejects_unknown_names_tiny_seed_counts_and_stray_fields() {
        let bad = |text: &str| {
            assert!(matches!(ExperimentPlan::parse(text), Err(Error::Plan(_))), "{text}");
        };
        let base = "circuits = [\"a.bench\"]\nschemes = [\"rll\"]\npalettes = [\"xnor\"]\nk = [2]\n";
        bad(&base.replace("rll", "slr"));
        bad(&base.replace("xnor", "cl_v9"));
        bad(&format!("{base}seeds = 1\n"));
        bad(&format!("{base}attacks = [\"sat\"]\n"));
        bad(&format!("{base}typo_field = 3\n"));
        bad(&base.replace("[2]", "[0]"));
        bad("circuits = []\nschemes = [\"rll\"]\npalettes = [\"xnor\"]\nk = [2]\n");
    }

    #[test]
    fn cell_seeds_survive_plan_extension() {
        let plan = ExperimentPlan::parse(PLAN).unwrap();
        let more = ExperimentPlan::parse(&PLAN.replace(
            "[\"corpus/c432.bench\", \"corpus/c880.bench\"]",
            "[\"corpus/c17.bench\", \"corpus/c432.bench\", \"corpus/c880.bench\"]",
        ))
        .unwrap();
        let seed_of = |p: &ExperimentPlan, name: &str| {
            p.cells().iter().find(|c| c.name == name).map(|c| c.seed(p.seed)).unwrap()
        };
        for name in ["c432-rll-xnor-K8", "c880-unsail-rll-cl_v2-K8"] {
            assert_eq!(seed_of(&plan, name), seed_of(&more, name));
        }
    }

    #[test]
    fn plan_round_trips_through_toml() {
        let plan = ExperimentPlan::parse(PLAN).unwrap();
        let again = ExperimentPlan::parse(&plan.to_toml()).unwrap();
        assert_eq!(plan, again);
    }
}
