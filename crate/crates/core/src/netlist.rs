//! Combinational gate-level netlist model.
//!
//! A netlist is an immutable DAG of gates. Primary inputs, key inputs and
//! primary outputs are roles over gates: inputs are source gates, outputs
//! are one-fanin port markers that pin a net to the interface. Key inputs
//! are ordinary inputs distinguished by the `k<digits>` naming convention,
//! which is what survives serialization and is how every tool in the chain
//! (and an attacker) recognizes them.
//!
//! Everything downstream leans on two determinism guarantees fixed here:
//! gate ids are dense and stable under append-only edits, and all derived
//! orders (fanouts, topological order, neighborhood expansion) tie-break by
//! gate id.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};

/// Gate vocabulary. The declaration order is load-bearing: subgraph
/// encodings one-hot over exactly this order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    Input,
    Output,
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Not,
    Buf,
    Const0,
    Const1,
}

impl GateKind {
    pub const ALL: [GateKind; 12] = [
        GateKind::Input,
        GateKind::Output,
        GateKind::And,
        GateKind::Nand,
        GateKind::Or,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
        GateKind::Not,
        GateKind::Buf,
        GateKind::Const0,
        GateKind::Const1,
    ];

    pub fn label(self) -> &'static str {
        match self {
            GateKind::Input => "INPUT",
            GateKind::Output => "OUTPUT",
            GateKind::And => "AND",
            GateKind::Nand => "NAND",
            GateKind::Or => "OR",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Not => "NOT",
            GateKind::Buf => "BUF",
            GateKind::Const0 => "CONST0",
            GateKind::Const1 => "CONST1",
        }
    }

    /// Index into [`GateKind::ALL`]; the one-hot position of this kind.
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|k| *k == self).expect("kind in ALL")
    }

    /// Case-insensitive keyword lookup for the netlist readers.
    /// `BUFF` is accepted as an alias seen in circulated benchmark files.
    pub fn from_keyword(word: &str) -> Option<GateKind> {
        let up = word.to_ascii_uppercase();
        Some(match up.as_str() {
            "AND" => GateKind::And,
            "NAND" => GateKind::Nand,
            "OR" => GateKind::Or,
            "NOR" => GateKind::Nor,
            "XOR" => GateKind::Xor,
            "XNOR" => GateKind::Xnor,
            "NOT" | "INV" => GateKind::Not,
            "BUF" | "BUFF" => GateKind::Buf,
            "CONST0" => GateKind::Const0,
            "CONST1" => GateKind::Const1,
            _ => return None,
        })
    }

    /// (min, max) fanin count; `None` max means unbounded.
    pub fn arity(self) -> (usize, Option<usize>) {
        match self {
            GateKind::Input | GateKind::Const0 | GateKind::Const1 => (0, Some(0)),
            GateKind::Output | GateKind::Not | GateKind::Buf => (1, Some(1)),
            _ => (2, None),
        }
    }

    pub fn is_logic(self) -> bool {
        !matches!(self, GateKind::Input | GateKind::Output)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GateId(pub u32);

impl GateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for GateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}", self.0)
    }
}

impl fmt::Display for GateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}", self.0)
    }
}

#[derive(Clone, Debug)]
pub struct Gate {
    pub kind: GateKind,
    pub fanins: Vec<GateId>,
    /// Signal name for logic/input gates, port name for output markers.
    pub name: Option<String>,
}

/// True when `name` follows the key-input naming convention `k<digits>`.
pub fn is_key_name(name: &str) -> bool {
    match name.strip_prefix('k') {
        Some(rest) => !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()),
        None => false,
    }
}

/// An ordered key-bit assignment. Order always matches the owning
/// netlist's key-input order; lookups go through the name index.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct KeyMapping {
    entries: Vec<(String, bool)>,
    index: HashMap<String, usize>,
}

impl KeyMapping {
    pub fn new(entries: Vec<(String, bool)>) -> Result<KeyMapping> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, (name, _)) in entries.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::KeyMismatch(format!("duplicate key `{name}`")));
            }
        }
        Ok(KeyMapping { entries, index })
    }

    pub fn empty() -> KeyMapping {
        KeyMapping::default()
    }

    pub fn get(&self, name: &str) -> Option<bool> {
        self.index.get(name).map(|&i| self.entries[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, bool)> {
        self.entries.iter().map(|(n, b)| (n.as_str(), *b))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn bits(&self) -> Vec<bool> {
        self.entries.iter().map(|(_, b)| *b).collect()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    /// Builds a mapping from names and a packed bit vector: bit `i` of
    /// `bits` assigns `names[i]`. Callers keep `i < 64` by construction.
    pub fn from_packed<S: AsRef<str>>(names: &[S], bits: u64) -> Result<KeyMapping> {
        assert!(names.len() <= 64, "packed form holds at most 64 key bits");
        let entries = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_ref().to_string(), (bits >> i) & 1 == 1))
            .collect();
        KeyMapping::new(entries)
    }

    /// Same key names, given bit vector.
    pub fn with_bits(&self, bits: &[bool]) -> KeyMapping {
        assert_eq!(bits.len(), self.entries.len());
        let entries = self
            .entries
            .iter()
            .zip(bits)
            .map(|((n, _), b)| (n.clone(), *b))
            .collect();
        KeyMapping::new(entries).expect("names already unique")
    }

    /// Key file format: one `name=bit` per line, `#` comments allowed.
    pub fn parse_key_file(text: &str) -> Result<KeyMapping> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (name, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                col: 1,
                msg: format!("expected `name=bit`, got `{line}`"),
            })?;
            let bit = match value.trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        col: name.len() + 2,
                        msg: format!("key bit must be 0 or 1, got `{other}`"),
                    })
                }
            };
            entries.push((name.trim().to_string(), bit));
        }
        KeyMapping::new(entries)
    }

    pub fn to_key_file(&self) -> String {
        let mut out = String::new();
        for (name, bit) in &self.entries {
            out.push_str(name);
            out.push('=');
            out.push(if *bit { '1' } else { '0' });
            out.push('\n');
        }
        out
    }

    /// Checks that this mapping covers exactly the key inputs of `n`.
    pub fn check_covers(&self, n: &Netlist) -> Result<()> {
        let mine: HashSet<&str> = self.names().collect();
        let theirs: HashSet<&str> = n.key_names().collect();
        if mine != theirs {
            let missing: Vec<&str> = theirs.difference(&mine).copied().collect();
            let extra: Vec<&str> = mine.difference(&theirs).copied().collect();
            return Err(Error::KeyMismatch(format!(
                "missing {missing:?}, extra {extra:?}"
            )));
        }
        Ok(())
    }
}

/// Immutable validated netlist.
#[derive(Clone, Debug)]
pub struct Netlist {
    gates: Vec<Gate>,
    primary_inputs: Vec<GateId>,
    key_inputs: Vec<GateId>,
    primary_outputs: Vec<GateId>,
    fanouts: Vec<Vec<GateId>>,
    by_name: HashMap<String, GateId>,
    topo: Vec<GateId>,
}

impl Netlist {
    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn gate(&self, id: GateId) -> &Gate {
        &self.gates[id.index()]
    }

    pub fn try_gate(&self, id: GateId) -> Result<&Gate> {
        self.gates.get(id.index()).ok_or(Error::UnknownGate(id.0))
    }

    pub fn ids(&self) -> impl Iterator<Item = GateId> {
        (0..self.gates.len() as u32).map(GateId)
    }

    pub fn gates(&self) -> impl Iterator<Item = (GateId, &Gate)> {
        self.gates.iter().enumerate().map(|(i, g)| (GateId(i as u32), g))
    }

    pub fn primary_inputs(&self) -> &[GateId] {
        &self.primary_inputs
    }

    pub fn key_inputs(&self) -> &[GateId] {
        &self.key_inputs
    }

    pub fn primary_outputs(&self) -> &[GateId] {
        &self.primary_outputs
    }

    pub fn pi_names(&self) -> impl Iterator<Item = &str> {
        self.primary_inputs.iter().map(|&id| self.name_of(id))
    }

    pub fn key_names(&self) -> impl Iterator<Item = &str> {
        self.key_inputs.iter().map(|&id| self.name_of(id))
    }

    /// All input names, primary then key, in declaration order.
    pub fn all_input_names(&self) -> Vec<String> {
        self.pi_names()
            .chain(self.key_names())
            .map(str::to_string)
            .collect()
    }

    /// (port name, marker id, driver id) for each primary output.
    pub fn po_ports(&self) -> impl Iterator<Item = (&str, GateId, GateId)> {
        self.primary_outputs.iter().map(move |&m| {
            let g = self.gate(m);
            (g.name.as_deref().expect("ports are named"), m, g.fanins[0])
        })
    }

    pub fn is_output_marker(&self, id: GateId) -> bool {
        self.gate(id).kind == GateKind::Output
    }

    pub fn is_key_input(&self, id: GateId) -> bool {
        self.gate(id).kind == GateKind::Input
            && self.gate(id).name.as_deref().is_some_and(is_key_name)
    }

    /// Panics if the gate is unnamed; use for inputs/ports and parsed gates.
    pub fn name_of(&self, id: GateId) -> &str {
        self.gate(id).name.as_deref().expect("named gate")
    }

    pub fn find(&self, name: &str) -> Option<GateId> {
        self.by_name.get(name).copied()
    }

    /// All consumers of `id`, output markers included, ascending by id.
    pub fn fanouts(&self, id: GateId) -> &[GateId] {
        &self.fanouts[id.index()]
    }

    /// Consumers that are logic gates (port markers carry no structure).
    pub fn logic_fanouts(&self, id: GateId) -> impl Iterator<Item = GateId> + '_ {
        self.fanouts[id.index()]
            .iter()
            .copied()
            .filter(move |&f| !self.is_output_marker(f))
    }

    /// Gates that are neither interface inputs nor port markers.
    pub fn logic_gate_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| g.kind.is_logic())
            .count()
    }

    /// Every gate appears after all of its fanins; ties resolved by taking
    /// the smallest ready gate id first, so the order is a pure function of
    /// the netlist.
    pub fn topological_order(&self) -> &[GateId] {
        &self.topo
    }

    /// The gate consuming a key input: by convention the highest-id logic
    /// consumer, which for composite key-gate structures is the gate on the
    /// locked path. This is a structural rule an attacker can apply too.
    pub fn key_gate(&self, key: GateId) -> Result<GateId> {
        let g = self.try_gate(key)?;
        if g.kind != GateKind::Input {
            return Err(Error::Invalid(format!("{key} is not an input")));
        }
        self.logic_fanouts(key)
            .max()
            .ok_or_else(|| Error::DanglingKeyInput(self.name_of(key).to_string()))
    }

    /// Deterministic local subgraph used by all structural features.
    ///
    /// Expansion starts at `seed`, takes the seed's fanout gates first, then
    /// alternates fanin/fanout waves; within a wave gates join in ascending
    /// id order. A wave that comes up empty retries the opposite direction,
    /// and if the active frontier is exhausted in both directions the search
    /// falls back to every visited gate, so the result is shorter than
    /// `size` only when the whole connected region is smaller. Output port
    /// markers never join.
    pub fn neighborhood(&self, seed: GateId, size: usize) -> Result<Vec<GateId>> {
        let g = self.try_gate(seed)?;
        if g.kind == GateKind::Output {
            return Err(Error::Invalid(format!("{seed} is a port marker, not logic")));
        }
        let mut out = vec![seed];
        if size <= 1 {
            out.truncate(size);
            return Ok(out);
        }
        let mut seen: HashSet<GateId> = HashSet::from([seed]);
        let mut frontier = vec![seed];
        // true = fanout direction
        let mut dir = true;
        loop {
            let mut next = self.wave(&frontier, dir, &seen);
            if next.is_empty() {
                dir = !dir;
                next = self.wave(&frontier, dir, &seen);
            }
            if next.is_empty() {
                // Frontier dead in both directions; rescue from everything
                // visited so far, fanouts first.
                next = self.wave(&out, true, &seen);
                dir = true;
                if next.is_empty() {
                    next = self.wave(&out, false, &seen);
                    dir = false;
                }
                if next.is_empty() {
                    break; // connected region exhausted
                }
            }
            let mut pushed = Vec::new();
            for id in next {
                if out.len() == size {
                    break;
                }
                seen.insert(id);
                out.push(id);
                pushed.push(id);
            }
            if out.len() == size {
                break;
            }
            frontier = pushed;
            dir = !dir;
        }
        Ok(out)
    }

    fn wave(&self, frontier: &[GateId], fanout_dir: bool, seen: &HashSet<GateId>) -> Vec<GateId> {
        let mut next: Vec<GateId> = Vec::new();
        for &f in frontier {
            if fanout_dir {
                next.extend(self.logic_fanouts(f).filter(|id| !seen.contains(id)));
            } else {
                next.extend(self.gate(f).fanins.iter().copied().filter(|id| !seen.contains(id)));
            }
        }
        next.sort_unstable();
        next.dedup();
        next
    }

    /// Gate ids reachable from `from` through fanouts (markers included),
    /// `from` itself excluded.
    pub fn transitive_fanout(&self, from: GateId) -> HashSet<GateId> {
        let mut seen = HashSet::new();
        let mut stack = vec![from];
        while let Some(g) = stack.pop() {
            for &f in self.fanouts(g) {
                if seen.insert(f) {
                    stack.push(f);
                }
            }
        }
        seen
    }

    /// Gate ids reachable from `from` through fanins, `from` excluded.
    pub fn transitive_fanin(&self, from: GateId) -> HashSet<GateId> {
        let mut seen = HashSet::new();
        let mut stack = vec![from];
        while let Some(g) = stack.pop() {
            for &f in &self.gate(g).fanins {
                if seen.insert(f) {
                    stack.push(f);
                }
            }
        }
        seen
    }

    /// Highest numeric suffix among key inputs, if any. Fresh key names
    /// continue from here so relocking on top never collides.
    pub fn max_key_index(&self) -> Option<usize> {
        self.key_names()
            .filter_map(|n| n[1..].parse::<usize>().ok())
            .max()
    }
}

/// Append-only netlist constructor; also the editing vehicle for locking
/// transforms (copy, splice, rebuild). Gate ids are final positions, so
/// edits that only append and rewire keep existing ids stable.
#[derive(Clone, Debug, Default)]
pub struct NetlistBuilder {
    gates: Vec<Gate>,
    primary_inputs: Vec<GateId>,
    key_inputs: Vec<GateId>,
    primary_outputs: Vec<GateId>,
    signal_names: HashMap<String, GateId>,
    port_names: HashMap<String, GateId>,
}

impl NetlistBuilder {
    pub fn new() -> NetlistBuilder {
        NetlistBuilder::default()
    }

    pub fn from_netlist(n: &Netlist) -> NetlistBuilder {
        let mut b = NetlistBuilder::new();
        for (id, g) in n.gates() {
            b.gates.push(g.clone());
            match g.kind {
                GateKind::Output => {
                    b.port_names.insert(g.name.clone().expect("port named"), id);
                }
                _ => {
                    if let Some(name) = &g.name {
                        b.signal_names.insert(name.clone(), id);
                    }
                }
            }
        }
        b.primary_inputs = n.primary_inputs.clone();
        b.key_inputs = n.key_inputs.clone();
        b.primary_outputs = n.primary_outputs.clone();
        b
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn gate(&self, id: GateId) -> &Gate {
        &self.gates[id.index()]
    }

    pub fn signal(&self, name: &str) -> Option<GateId> {
        self.signal_names.get(name).copied()
    }

    fn claim_signal_name(&mut self, name: &str, id: GateId) -> Result<()> {
        if self.signal_names.contains_key(name) {
            return Err(Error::NameCollision(name.to_string()));
        }
        self.signal_names.insert(name.to_string(), id);
        Ok(())
    }

    pub fn input(&mut self, name: &str) -> Result<GateId> {
        if is_key_name(name) {
            return Err(Error::Invalid(format!(
                "`{name}` matches the key-input convention; declare it as a key input"
            )));
        }
        let id = GateId(self.gates.len() as u32);
        self.claim_signal_name(name, id)?;
        self.gates.push(Gate { kind: GateKind::Input, fanins: vec![], name: Some(name.to_string()) });
        self.primary_inputs.push(id);
        Ok(id)
    }

    pub fn key_input(&mut self, name: &str) -> Result<GateId> {
        if !is_key_name(name) {
            return Err(Error::Invalid(format!(
                "key input `{name}` must be named k<digits>"
            )));
        }
        let id = GateId(self.gates.len() as u32);
        self.claim_signal_name(name, id)?;
        self.gates.push(Gate { kind: GateKind::Input, fanins: vec![], name: Some(name.to_string()) });
        self.key_inputs.push(id);
        Ok(id)
    }

    pub fn gate_named(&mut self, kind: GateKind, fanins: Vec<GateId>, name: &str) -> Result<GateId> {
        if kind == GateKind::Input || kind == GateKind::Output {
            return Err(Error::Invalid(format!("`{kind}` is not a logic gate")));
        }
        let id = GateId(self.gates.len() as u32);
        self.claim_signal_name(name, id)?;
        self.gates.push(Gate { kind, fanins, name: Some(name.to_string()) });
        Ok(id)
    }

    pub fn gate_anon(&mut self, kind: GateKind, fanins: Vec<GateId>) -> GateId {
        let id = GateId(self.gates.len() as u32);
        self.gates.push(Gate { kind, fanins, name: None });
        id
    }

    /// Fresh internal signal name: `n<counter>`, skipping collisions.
    pub fn fresh_name(&mut self, hint: usize) -> String {
        let mut i = hint.max(self.gates.len());
        loop {
            let candidate = format!("n{i}");
            if !self.signal_names.contains_key(&candidate) {
                return candidate;
            }
            i += 1;
        }
    }

    pub fn output(&mut self, port: &str, driver: GateId) -> Result<GateId> {
        if self.port_names.contains_key(port) {
            return Err(Error::NameCollision(format!("output port {port}")));
        }
        let id = GateId(self.gates.len() as u32);
        self.port_names.insert(port.to_string(), id);
        self.gates.push(Gate { kind: GateKind::Output, fanins: vec![driver], name: Some(port.to_string()) });
        self.primary_outputs.push(id);
        Ok(id)
    }

    /// Moves the signal name of `id` to a fresh internal name and returns
    /// the freed name. Used when a key-gate takes over a locked net's name
    /// so that existing textual references keep pointing at the same net.
    pub fn steal_name(&mut self, id: GateId) -> Option<String> {
        let name = self.gates[id.index()].name.take()?;
        self.signal_names.remove(&name);
        let fresh = self.fresh_name(self.gates.len());
        self.signal_names.insert(fresh.clone(), id);
        self.gates[id.index()].name = Some(fresh);
        Some(name)
    }

    /// Assign a currently-unused signal name to an unnamed gate.
    pub fn name_gate(&mut self, id: GateId, name: &str) -> Result<()> {
        if self.gates[id.index()].name.is_some() {
            return Err(Error::Invalid(format!("{id} is already named")));
        }
        self.claim_signal_name(name, id)?;
        self.gates[id.index()].name = Some(name.to_string());
        Ok(())
    }

    /// Replaces every use of `old` as a fanin with `new`, except inside
    /// gates listed in `keep`. Port markers are rewired like any consumer.
    pub fn replace_uses(&mut self, old: GateId, new: GateId, keep: &[GateId]) {
        for (i, g) in self.gates.iter_mut().enumerate() {
            if keep.contains(&GateId(i as u32)) {
                continue;
            }
            for f in &mut g.fanins {
                if *f == old {
                    *f = new;
                }
            }
        }
    }

    pub fn build(self) -> Result<Netlist> {
        let gate_count = self.gates.len();
        // Arity and reference checks.
        for (i, g) in self.gates.iter().enumerate() {
            let (lo, hi) = g.kind.arity();
            if g.fanins.len() < lo || hi.is_some_and(|h| g.fanins.len() > h) {
                return Err(Error::Invalid(format!(
                    "{} gate `{}` has {} fanins",
                    g.kind,
                    g.name.as_deref().unwrap_or("?"),
                    g.fanins.len()
                )));
            }
            for &f in &g.fanins {
                let fg = self
                    .gates
                    .get(f.index())
                    .ok_or(Error::UnknownGate(f.0))?;
                if fg.kind == GateKind::Output {
                    return Err(Error::Invalid(format!(
                        "gate {} uses port marker {} as a fanin",
                        GateId(i as u32),
                        f
                    )));
                }
            }
            if g.kind == GateKind::Input && g.name.is_none() {
                return Err(Error::Invalid("unnamed input".into()));
            }
        }

        // Fanouts, ascending by construction order.
        let mut fanouts: Vec<Vec<GateId>> = vec![Vec::new(); gate_count];
        for (i, g) in self.gates.iter().enumerate() {
            for &f in &g.fanins {
                fanouts[f.index()].push(GateId(i as u32));
            }
        }
        for fo in &mut fanouts {
            fo.sort_unstable();
            fo.dedup();
        }

        // Kahn with a min-heap: deterministic topological order, and the
        // cycle check falls out of the uncovered remainder.
        let mut indegree: Vec<usize> = self.gates.iter().map(|g| g.fanins.len()).collect();
        let mut heap: std::collections::BinaryHeap<std::cmp::Reverse<GateId>> = indegree
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| std::cmp::Reverse(GateId(i as u32)))
            .collect();
        let mut topo = Vec::with_capacity(gate_count);
        while let Some(std::cmp::Reverse(id)) = heap.pop() {
            topo.push(id);
            for &f in &fanouts[id.index()] {
                // A gate can list the same fanin twice; decrement per edge.
                let uses = self.gates[f.index()].fanins.iter().filter(|&&x| x == id).count();
                indegree[f.index()] -= uses;
                if indegree[f.index()] == 0 {
                    heap.push(std::cmp::Reverse(f));
                }
            }
        }
        if topo.len() != gate_count {
            let culprit = (0..gate_count)
                .find(|&i| indegree[i] > 0)
                .map(|i| GateId(i as u32))
                .expect("cycle has a member");
            let name = self.gates[culprit.index()]
                .name
                .clone()
                .unwrap_or_else(|| culprit.to_string());
            return Err(Error::Cycle(name));
        }

        Ok(Netlist {
            by_name: self.signal_names,
            gates: self.gates,
            primary_inputs: self.primary_inputs,
            key_inputs: self.key_inputs,
            primary_outputs: self.primary_outputs,
            fanouts,
            topo,
        })
    }
}
