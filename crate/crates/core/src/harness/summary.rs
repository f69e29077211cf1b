//! Metrics rows and aggregation. One `CellRow` per completed cell; the
//! summarizer folds rows into per-(scheme, palette) means and pairs each
//! defended cell with its undefended twin to report the defense's effect
//! in percentage points.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

use super::plan::CellSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct CellRow {
    pub cell: String,
    pub circuit: String,
    pub scheme: String,
    pub palette: String,
    pub k: usize,
    pub instances: usize,
    pub rf_change_acc: Option<f64>,
    pub sail_acc: Option<f64>,
    pub ml1_acc: Option<f64>,
    pub ml2_acc: Option<f64>,
    pub type_acc: Option<f64>,
    pub sweep_acc: Option<f64>,
    pub redundancy_acc: Option<f64>,
    pub f1: Option<f64>,
    pub hd: Option<f64>,
    pub oer: Option<f64>,
    pub fault_cov: Option<f64>,
}

fn fmt(v: Option<f64>) -> String {
    // Six decimals: enough for any accuracy over realistic K, and a
    // fixed width keeps resumed and fresh rows byte-identical.
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Plan(format!("bad metric value `{s}`")))
}

impl CellRow {
    pub const HEADER: &'static str = "cell,circuit,scheme,palette,k,instances,rf_change_acc,\
sail_acc,ml1_acc,ml2_acc,type_acc,sweep_acc,redundancy_acc,f1,hd,oer,fault_cov";

    pub fn new(cell: &CellSpec, instances: usize) -> CellRow {
        CellRow {
            cell: cell.name.clone(),
            circuit: cell.circuit.clone(),
            scheme: cell.scheme.label(),
            palette: cell.palette.label().to_string(),
            k: cell.k,
            instances,
            rf_change_acc: None,
            sail_acc: None,
            ml1_acc: None,
            ml2_acc: None,
            type_acc: None,
            sweep_acc: None,
            redundancy_acc: None,
            f1: None,
            hd: None,
            oer: None,
            fault_cov: None,
        }
    }

    pub fn to_csv_line(&self) -> String {
        [
            self.cell.clone(),
            self.circuit.clone(),
            self.scheme.clone(),
            self.palette.clone(),
            self.k.to_string(),
            self.instances.to_string(),
            fmt(self.rf_change_acc),
            fmt(self.sail_acc),
            fmt(self.ml1_acc),
            fmt(self.ml2_acc),
            fmt(self.type_acc),
            fmt(self.sweep_acc),
            fmt(self.redundancy_acc),
            fmt(self.f1),
            fmt(self.hd),
            fmt(self.oer),
            fmt(self.fault_cov),
        ]
        .join(",")
    }

    pub fn parse_line(line: &str) -> Result<CellRow> {
        let parts: Vec<&str> = line.split(',').collect();
        let want = CellRow::HEADER.split(',').count();
        if parts.len() != want {
            return Err(Error::Plan(format!(
                "metrics row has {} fields, expected {want}: `{line}`",
                parts.len()
            )));
        }
        let int = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Plan(format!("bad count `{s}`")))
        };
        Ok(CellRow {
            cell: parts[0].to_string(),
            circuit: parts[1].to_string(),
            scheme: parts[2].to_string(),
            palette: parts[3].to_string(),
            k: int(parts[4])?,
            instances: int(parts[5])?,
            rf_change_acc: parse_opt(parts[6])?,
            sail_acc: parse_opt(parts[7])?,
            ml1_acc: parse_opt(parts[8])?,
            ml2_acc: parse_opt(parts[9])?,
            type_acc: parse_opt(parts[10])?,
            sweep_acc: parse_opt(parts[11])?,
            redundancy_acc: parse_opt(parts[12])?,
            f1: parse_opt(parts[13])?,
            hd: parse_opt(parts[14])?,
            oer: parse_opt(parts[15])?,
            fault_cov: parse_opt(parts[16])?,
        })
    }

    /// Reads a one-row metrics file (header + row), as written per cell.
    pub fn read_file(path: &Path) -> Result<CellRow> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        match (lines.next(), lines.next()) {
            (Some(h), Some(row)) if h == CellRow::HEADER => CellRow::parse_line(row),
            _ => Err(Error::Plan(format!("{} is not a metrics row file", path.display()))),
        }
    }
}

/// Mean over the defined entries; None when nothing was measured.
fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupMean {
    pub scheme: String,
    pub palette: String,
    pub cells: usize,
    pub rf_change_acc: Option<f64>,
    pub sail_acc: Option<f64>,
    pub type_acc: Option<f64>,
    pub sweep_acc: Option<f64>,
    pub redundancy_acc: Option<f64>,
    pub f1: Option<f64>,
    pub hd: Option<f64>,
    pub oer: Option<f64>,
}

/// A defended cell matched with its undefended twin (same circuit,
/// palette, K, base scheme). Deltas are undefended − defended, in
/// percentage points: positive means the defense lowered the metric.
#[derive(Debug, Clone, PartialEq)]
pub struct DefenseDelta {
    pub circuit: String,
    pub base_scheme: String,
    pub palette: String,
    pub k: usize,
    pub rf_change_pp: Option<f64>,
    pub sail_pp: Option<f64>,
    pub f1_drop: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub rows: Vec<CellRow>,
    pub groups: Vec<GroupMean>,
    pub deltas: Vec<DefenseDelta>,
}

pub fn aggregate(rows: &[CellRow]) -> Summary {
    let mut by_group: BTreeMap<(String, String), Vec<&CellRow>> = BTreeMap::new();
    for r in rows {
        by_group.entry((r.scheme.clone(), r.palette.clone())).or_default().push(r);
    }
    let groups = by_group
        .into_iter()
        .map(|((scheme, palette), members)| GroupMean {
            scheme,
            palette,
            cells: members.len(),
            rf_change_acc: mean(members.iter().map(|r| r.rf_change_acc)),
            sail_acc: mean(members.iter().map(|r| r.sail_acc)),
            type_acc: mean(members.iter().map(|r| r.type_acc)),
            sweep_acc: mean(members.iter().map(|r| r.sweep_acc)),
            redundancy_acc: mean(members.iter().map(|r| r.redundancy_acc)),
            f1: mean(members.iter().map(|r| r.f1)),
            hd: mean(members.iter().map(|r| r.hd)),
            oer: mean(members.iter().map(|r| r.oer)),
        })
        .collect();

    let undefended: BTreeMap<(String, String, String, usize), &CellRow> = rows
        .iter()
        .filter(|r| !r.scheme.starts_with("unsail-"))
        .map(|r| ((r.circuit.clone(), r.scheme.clone(), r.palette.clone(), r.k), r))
        .collect();
    let mut deltas = Vec::new();
    for d in rows.iter().filter(|r| r.scheme.starts_with("unsail-")) {
        let base = d.scheme.trim_start_matches("unsail-").to_string();
        let Some(u) = undefended.get(&(d.circuit.clone(), base.clone(), d.palette.clone(), d.k))
        else {
            continue;
        };
        let pp = |a: Option<f64>, b: Option<f64>| Some((a? - b?) * 100.0);
        deltas.push(DefenseDelta {
            circuit: d.circuit.clone(),
            base_scheme: base,
            palette: d.palette.clone(),
            k: d.k,
            rf_change_pp: pp(u.rf_change_acc, d.rf_change_acc),
            sail_pp: pp(u.sail_acc, d.sail_acc),
            f1_drop: pp(u.f1, d.f1).map(|x| x / 100.0),
        });
    }

    Summary { rows: rows.to_vec(), groups, deltas }
}

impl Summary {
    pub fn aggregate_csv(&self) -> String {
        let mut out = String::from(
            "scheme,palette,cells,rf_change_acc,sail_acc,type_acc,sweep_acc,redundancy_acc,f1,hd,oer\n",
        );
        for g in &self.groups {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                g.scheme,
                g.palette,
                g.cells,
                fmt(g.rf_change_acc),
                fmt(g.sail_acc),
                fmt(g.type_acc),
                fmt(g.sweep_acc),
                fmt(g.redundancy_acc),
                fmt(g.f1),
                fmt(g.hd),
                fmt(g.oer),
            ));
        }
        for d in &self.deltas {
            out.push_str(&format!(
                "delta,{}/{}/{}/K{},{},{},,,,{},,\n",
                d.circuit,
                d.base_scheme,
                d.palette,
                d.k,
                fmt(d.rf_change_pp),
                fmt(d.sail_pp),
                fmt(d.f1_drop),
            ));
        }
        out
    }

    pub fn render_text(&self) -> String {
        fn cell(v: Option<f64>) -> String {
            v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".to_string())
        }
        let mut out = String::new();
        out.push_str("per scheme x palette means\n");
        out.push_str(&format!(
            "{:<14} {:<8} {:>5} {:>9} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
            "scheme", "palette", "cells", "rf_chg", "sail", "type", "sweep", "redund", "f1",
            "hd", "oer"
        ));
        for g in &self.groups {
            out.push_str(&format!(
                "{:<14} {:<8} {:>5} {:>9} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
                g.scheme,
                g.palette,
                g.cells,
                cell(g.rf_change_acc),
                cell(g.sail_acc),
                cell(g.type_acc),
                cell(g.sweep_acc),
                cell(g.redundancy_acc),
                cell(g.f1),
                cell(g.hd),
                cell(g.oer),
            ));
        }
        if !self.deltas.is_empty() {
            out.push_str("\ndefense effect (undefended - defended, percentage points)\n");
            out.push_str(&format!(
                "{:<12} {:<6} {:<8} {:>5} {:>10} {:>9} {:>9}\n",
                "circuit", "base", "palette", "K", "rf_chg_pp", "sail_pp", "f1_drop"
            ));
            for d in &self.deltas {
                out.push_str(&format!(
                    "{:<12} {:<6} {:<8} {:>5} {:>10} {:>9} {:>9}\n",
                    d.circuit,
                    d.base_scheme,
                    d.palette,
                    d.k,
                    cell(d.rf_change_pp),
                    cell(d.sail_pp),
                    cell(d.f1_drop),
                ));
            }
        }
        out
    }
}

/// Collects every completed cell's metrics row from a (possibly partial)
/// run directory, writes `aggregate.csv` and `table.txt` there, and
/// returns the aggregation.
pub fn summarize(run_dir: &Path) -> Result<Summary> {
    let cells_dir = run_dir.join("cells");
    let mut rows = Vec::new();
    if cells_dir.is_dir() {
        let mut dirs: Vec<_> = std::fs::read_dir(&cells_dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .collect();
        dirs.sort();
        for d in dirs {
            let row = d.join("row.csv");
            if row.is_file() {
                rows.push(CellRow::read_file(&row)?);
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Plan(format!(
            "{} has no completed cells to summarize",
            run_dir.display()
        )));
    }
    let summary = aggregate(&rows);
    std::fs::write(run_dir.join("aggregate.csv"), summary.aggregate_csv())?;
    std::fs::write(run_dir.join("table.txt"), summary.render_text())?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(cell: &str, circuit: &str, scheme: &str, palette: &str, k: usize, sail: f64) -> CellRow {
        CellRow {
            cell: cell.to_string(),
            circuit: circuit.to_string(),
            scheme: scheme.to_string(),
            palette: palette.to_string(),
            k,
            instances: 20,
            rf_change_acc: Some(sail + 0.1),
            sail_acc: Some(sail),
            ml1_acc: None,
            ml2_acc: None,
            type_acc: Some(0.9),
            sweep_acc: None,
            redundancy_acc: None,
            f1: Some(2.0),
            hd: Some(0.25),
            oer: Some(0.99),
            fault_cov: Some(0.95),
        }
    }

    #[test]
    fn csv_lines_round_trip_including_missing_metrics() {
        let mut r = row("c1-rll-xnor-K8", "c1", "rll", "xnor", 8, 0.8);
        r.sweep_acc = None;
        r.f1 = None;
        let line = r.to_csv_line();
        assert_eq!(CellRow::parse_line(&line).unwrap(), r);
        assert_eq!(CellRow::parse_line(&line).unwrap().to_csv_line(), line);
        assert!(CellRow::parse_line("too,short").is_err());
    }

    #[test]
    fn single_cell_average_is_the_cell_value() {
        let s = aggregate(&[row("c1-rll-xnor-K8", "c1", "rll", "xnor", 8, 0.8)]);
        assert_eq!(s.groups.len(), 1);
        assert_eq!(s.groups[0].sail_acc, Some(0.8));
        assert_eq!(s.groups[0].cells, 1);
        assert!(s.deltas.is_empty());
    }

    #[test]
    fn two_cell_groups_average_their_values() {
        let s = aggregate(&[
            row("c1-rll-xnor-K8", "c1", "rll", "xnor", 8, 0.8),
            row("c2-rll-xnor-K8", "c2", "rll", "xnor", 8, 0.6),
        ]);
        assert_eq!(s.groups.len(), 1);
        assert!((s.groups[0].sail_acc.unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn defended_cells_pair_with_their_twin_for_deltas() {
        let s = aggregate(&[
            row("c1-rll-xnor-K8", "c1", "rll", "xnor", 8, 0.80),
            row("c1-unsail-rll-xnor-K8", "c1", "unsail-rll", "xnor", 8, 0.55),
            row("c2-unsail-rll-xnor-K8", "c2", "unsail-rll", "xnor", 8, 0.5),
        ]);
        // c2 has no undefended twin, so only c1 produces a delta.
        assert_eq!(s.deltas.len(), 1);
        let d = &s.deltas[0];
        assert_eq!(d.circuit, "c1");
        assert!((d.sail_pp.unwrap() - 25.0).abs() < 1e-9);
        assert!((d.rf_change_pp.unwrap() - 25.0).abs() < 1e-9);
        let text = s.render_text();
        assert!(text.contains("defense effect"));
        assert!(text.contains("c1"));
    }

    #[test]
    fn summarize_reads_partial_run_directories() {
        let tmp = tempfile::tempdir().unwrap();
        let cells = tmp.path().join("cells");
        for (name, sail) in [("c1-rll-xnor-K8", 0.8), ("c1-unsail-rll-xnor-K8", 0.6)] {
            let d = cells.join(name);
            std::fs::create_dir_all(&d).unwrap();
            let r = row(name, "c1", name.trim_start_matches("c1-").trim_end_matches("-xnor-K8"), "xnor", 8, sail);
            std::fs::write(d.join("row.csv"), format!("{}\n{}\n", CellRow::HEADER, r.to_csv_line()))
                .unwrap();
        }
        // An incomplete cell (no row yet) is simply skipped.
        std::fs::create_dir_all(cells.join("c9-rll-xnor-K8")).unwrap();
        let s = summarize(tmp.path()).unwrap();
        assert_eq!(s.rows.len(), 2);
        assert_eq!(s.deltas.len(), 1);
        assert!(tmp.path().join("aggregate.csv").is_file());
        assert!(tmp.path().join("table.txt").is_file());

        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(summarize(empty.path()), Err(Error::Plan(_))));
    }
}
