//! Structural features around key-gates: local subgraph samples, change
//! labeling across a rewrite pass, Fisher's discriminant ratio, and the
//! change dictionary that drives confusion-based key-gate insertion.
//!
//! A sample is the type sequence of the gates in a key-gate's neighborhood
//! (the key-gate itself first), one-hot encoded over the full gate
//! vocabulary. Samples extracted before and after rewriting pair up by key
//! name, which works because key inputs pass through rewriting untouched.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::netlist::{GateKind, Netlist};

/// One-hot vocabulary width: every gate kind, in declaration order.
pub const VOCAB: usize = GateKind::ALL.len();

/// Subgraph sizes the samplers accept.
pub const SUB_SIZES: [usize; 3] = [3, 5, 6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChangeLabel {
    Changed,
    Unchanged,
}

impl ChangeLabel {
    pub fn label(self) -> &'static str {
        match self {
            ChangeLabel::Changed => "Changed",
            ChangeLabel::Unchanged => "Unchanged",
        }
    }

    pub fn parse(s: &str) -> Option<ChangeLabel> {
        match s {
            "Changed" => Some(ChangeLabel::Changed),
            "Unchanged" => Some(ChangeLabel::Unchanged),
            _ => None,
        }
    }
}

/// Encoded local structure around one key-gate at one subgraph size.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgraphSample {
    pub key_name: String,
    pub sub_size: usize,
    /// Gate types in neighborhood order; entry 0 is the key-gate itself.
    /// Shorter than `sub_size` only when the connected region ran out.
    pub type_sequence: Vec<GateKind>,
    /// Flat 0/1 vector, `sub_size * VOCAB` wide: one 1 per filled
    /// position, all-zero columns past the sequence end.
    pub one_hot: Vec<u8>,
    pub label: Option<ChangeLabel>,
}

impl SubgraphSample {
    pub fn new(key_name: String, sub_size: usize, type_sequence: Vec<GateKind>) -> SubgraphSample {
        debug_assert!(type_sequence.len() <= sub_size);
        let mut one_hot = vec![0u8; sub_size * VOCAB];
        for (pos, kind) in type_sequence.iter().enumerate() {
            one_hot[pos * VOCAB + kind.index()] = 1;
        }
        SubgraphSample { key_name, sub_size, type_sequence, one_hot, label: None }
    }

    pub fn features(&self) -> Vec<f64> {
        self.one_hot.iter().map(|&b| b as f64).collect()
    }

    /// Root gate type, i.e. the key-gate's own kind.
    pub fn root(&self) -> GateKind {
        self.type_sequence[0]
    }

    pub fn seq_text(&self) -> String {
        seq_text(&self.type_sequence)
    }
}

pub fn seq_text(seq: &[GateKind]) -> String {
    seq.iter().map(|k| k.label()).collect::<Vec<_>>().join("|")
}

pub fn parse_seq(text: &str) -> Result<Vec<GateKind>> {
    text.split('|')
        .map(|w| {
            GateKind::ALL
                .into_iter()
                .find(|k| k.label() == w)
                .ok_or_else(|| Error::Invalid(format!("unknown gate type `{w}` in sequence")))
        })
        .collect()
}

/// One sample per (key input, subgraph size), key inputs in interface
/// order, sizes in the order given. Deterministic and order-stable.
pub fn extract_samples(n: &Netlist, sub_sizes: &[usize]) -> Result<Vec<SubgraphSample>> {
    if n.key_inputs().is_empty() {
        return Err(Error::Invalid("netlist has no key inputs".into()));
    }
    for &sub in sub_sizes {
        if !SUB_SIZES.contains(&sub) {
            return Err(Error::Invalid(format!("unsupported subgraph size {sub}")));
        }
    }
    let mut out = Vec::with_capacity(n.key_inputs().len() * sub_sizes.len());
    for &key in n.key_inputs() {
        let kg = n.key_gate(key)?;
        for &sub in sub_sizes {
            let hood = n.neighborhood(kg, sub)?;
            let seq: Vec<GateKind> = hood.iter().map(|&id| n.gate(id).kind).collect();
            out.push(SubgraphSample::new(n.name_of(key).to_string(), sub, seq));
        }
    }
    Ok(out)
}

/// Labels each post sample Changed or Unchanged by comparing its type
/// sequence against the pre sample for the same (key, size). The two sets
/// must cover identical pairs.
pub fn label_changes(
    pre: &[SubgraphSample],
    post: &[SubgraphSample],
) -> Result<Vec<SubgraphSample>> {
    let mut by_pair: HashMap<(&str, usize), &SubgraphSample> = HashMap::new();
    for s in pre {
        if by_pair.insert((s.key_name.as_str(), s.sub_size), s).is_some() {
            return Err(Error::KeyMismatch(format!(
                "duplicate pre sample for `{}` sub={}",
                s.key_name, s.sub_size
            )));
        }
    }
    let mut labeled = Vec::with_capacity(post.len());
    for s in post {
        let p = by_pair.remove(&(s.key_name.as_str(), s.sub_size)).ok_or_else(|| {
            Error::KeyMismatch(format!("`{}` sub={} only in post set", s.key_name, s.sub_size))
        })?;
        let mut s = s.clone();
        s.label = Some(if p.type_sequence == s.type_sequence {
            ChangeLabel::Unchanged
        } else {
            ChangeLabel::Changed
        });
        labeled.push(s);
    }
    if let Some((key, sub)) = by_pair.keys().next() {
        return Err(Error::KeyMismatch(format!("`{key}` sub={sub} only in pre set")));
    }
    Ok(labeled)
}

/// Maximum Fisher discriminant ratio over features:
/// f = (mean1 - mean2)^2 / (var1 + var2) with population variances.
/// A zero numerator gives f = 0 regardless of the denominator; a zero
/// denominator under a nonzero numerator gives +infinity (perfectly
/// separated constant features). Writers cap the sentinel via
/// [`cap_for_csv`].
pub fn fisher_max(rows: &[Vec<f64>], labels: &[bool]) -> Result<f64> {
    assert_eq!(rows.len(), labels.len());
    let n1 = labels.iter().filter(|&&l| l).count();
    let n2 = labels.len() - n1;
    if n1 == 0 || n2 == 0 {
        return Err(Error::SingleClass);
    }
    let d = rows[0].len();
    debug_assert!(rows.iter().all(|r| r.len() == d));
    let mut best = 0.0f64;
    for j in 0..d {
        let (mut s1, mut s2, mut q1, mut q2) = (0.0, 0.0, 0.0, 0.0);
        for (row, &l) in rows.iter().zip(labels) {
            let x = row[j];
            if l {
                s1 += x;
                q1 += x * x;
            } else {
                s2 += x;
                q2 += x * x;
            }
        }
        let (m1, m2) = (s1 / n1 as f64, s2 / n2 as f64);
        let v1 = q1 / n1 as f64 - m1 * m1;
        let v2 = q2 / n2 as f64 - m2 * m2;
        let num = (m1 - m2) * (m1 - m2);
        let f = if num == 0.0 {
            0.0
        } else if v1 + v2 <= 0.0 {
            f64::INFINITY
        } else {
            num / (v1 + v2)
        };
        best = best.max(f);
    }
    Ok(best)
}

/// [`fisher_max`] over labeled samples' one-hot features. All samples
/// must share one subgraph size (mixing sizes would misalign columns).
pub fn fisher_f1(samples: &[SubgraphSample]) -> Result<f64> {
    let mut rows = Vec::with_capacity(samples.len());
    let mut labels = Vec::with_capacity(samples.len());
    for s in samples {
        if s.sub_size != samples[0].sub_size {
            return Err(Error::Invalid("samples mix subgraph sizes".into()));
        }
        let label = s
            .label
            .ok_or_else(|| Error::Invalid(format!("sample for `{}` is unlabeled", s.key_name)))?;
        rows.push(s.features());
        labels.push(label == ChangeLabel::Changed);
    }
    fisher_max(&rows, &labels)
}

/// Infinite separation ratios become 1e9 in reports.
pub fn cap_for_csv(f: f64) -> f64 {
    if f.is_finite() {
        f
    } else {
        1e9
    }
}

/// Observed rewrite transformations: for every changed sample, the post
/// sequence maps back to the pre sequences it came from (with counts);
/// sequences that never changed live in the unchanged set `U`. A sequence
/// seen both ways counts as an entry, never as unchanged.
#[derive(Debug, Clone, Default)]
pub struct ChangeDictionary {
    entries: BTreeMap<Vec<GateKind>, BTreeMap<Vec<GateKind>, usize>>,
    unchanged: BTreeSet<Vec<GateKind>>,
}

impl ChangeDictionary {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_entries(&self) -> usize {
        self.entries.len()
    }

    /// (post sequence, pre sequences with counts), ascending by sequence.
    pub fn entries(&self) -> impl Iterator<Item = (&Vec<GateKind>, &BTreeMap<Vec<GateKind>, usize>)> {
        self.entries.iter()
    }

    pub fn lookup(&self, post: &[GateKind]) -> Option<&BTreeMap<Vec<GateKind>, usize>> {
        self.entries.get(post)
    }

    pub fn unchanged(&self) -> &BTreeSet<Vec<GateKind>> {
        &self.unchanged
    }

    pub fn is_unchanged(&self, seq: &[GateKind]) -> bool {
        self.unchanged.contains(seq)
    }

    /// Total count across one entry's pre sequences.
    pub fn entry_weight(&self, post: &[GateKind]) -> usize {
        self.entries.get(post).map(|m| m.values().sum()).unwrap_or(0)
    }
}

/// Labels `post` against `pre` and folds the pairs into a dictionary.
pub fn build_dictionary(
    pre: &[SubgraphSample],
    post: &[SubgraphSample],
) -> Result<ChangeDictionary> {
    let labeled = label_changes(pre, post)?;
    let pre_by: HashMap<(&str, usize), &SubgraphSample> =
        pre.iter().map(|s| ((s.key_name.as_str(), s.sub_size), s)).collect();
    let mut dict = ChangeDictionary::default();
    for s in &labeled {
        match s.label.unwrap() {
            ChangeLabel::Changed => {
                let p = pre_by[&(s.key_name.as_str(), s.sub_size)];
                *dict
                    .entries
                    .entry(s.type_sequence.clone())
                    .or_default()
                    .entry(p.type_sequence.clone())
                    .or_insert(0) += 1;
            }
            ChangeLabel::Unchanged => {
                dict.unchanged.insert(s.type_sequence.clone());
            }
        }
    }
    // A sequence that sometimes changed is evidence, not background.
    for post_seq in dict.entries.keys() {
        dict.unchanged.remove(post_seq);
    }
    Ok(dict)
}

// ---------------------------------------------------------------------
// Dataset CSV
// ---------------------------------------------------------------------

/// Pinned and recorded in every dataset so downstream consumers know how
/// membership was decided.
pub const SUBGRAPH_RULE: &str =
    "# subgraph rule: fanout-first alternating-wave BFS from the key-gate, ascending gate-id ties, truncated to sub";

pub const DATASET_HEADER: &str = "circuit,instance,key,sub,label,seq,onehot";

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub circuit: String,
    pub instance: usize,
    pub sample: SubgraphSample,
}

pub fn dataset_row(circuit: &str, instance: usize, s: &SubgraphSample) -> String {
    let onehot: String = s.one_hot.iter().map(|&b| char::from(b'0' + b)).collect();
    format!(
        "{circuit},{instance},{key},{sub},{label},{seq},{onehot}",
        key = s.key_name,
        sub = s.sub_size,
        label = s.label.map(ChangeLabel::label).unwrap_or(""),
        seq = s.seq_text(),
    )
}

pub fn write_dataset(rows: &[DatasetRow]) -> String {
    let mut out = String::new();
    out.push_str(SUBGRAPH_RULE);
    out.push('\n');
    out.push_str(DATASET_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&dataset_row(&r.circuit, r.instance, &r.sample));
        out.push('\n');
    }
    out
}

pub fn read_dataset(text: &str) -> Result<Vec<DatasetRow>> {
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == DATASET_HEADER {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                line: ln + 1,
                col: 1,
                msg: format!("expected 7 dataset fields, got {}", fields.len()),
            });
        }
        let bad = |msg: String| Error::Parse { line: ln + 1, col: 1, msg };
        let instance =
            fields[1].parse().map_err(|_| bad(format!("bad instance `{}`", fields[1])))?;
        let sub = fields[3].parse().map_err(|_| bad(format!("bad sub size `{}`", fields[3])))?;
        let seq = parse_seq(fields[5])?;
        let mut sample = SubgraphSample::new(fields[2].to_string(), sub, seq);
        sample.label = match fields[4] {
            "" => None,
            other => Some(
                ChangeLabel::parse(other).ok_or_else(|| bad(format!("bad label `{other}`")))?,
            ),
        };
        let onehot: String = sample.one_hot.iter().map(|&b| char::from(b'0' + b)).collect();
        if onehot != fields[6] {
            return Err(bad("one-hot column disagrees with seq column".into()));
        }
        rows.push(DatasetRow { circuit: fields[0].to_string(), instance, sample });
    }
    Ok(rows)
}
