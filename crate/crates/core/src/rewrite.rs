//! Seeded local-rewrite pass standing in for a synthesis tool.
//!
//! Each sweep visits the live gates in a seeded random order and applies
//! the first matching rule. Simplifying rules always fire; perturbing
//! rules (the expansions that re-dress a gate in an equivalent costume)
//! fire behind a seeded coin, which is what turns a deterministic
//! minimizer into a structure obfuscator. Every rule proves itself on a
//! fixture circuit by exhaustive comparison the first time the registry
//! is touched, and debug builds re-verify whole-netlist behavior after
//! every call.
//!
//! Gates driving output ports are anchored: rules may rewrite them in
//! place but never remove or merge them away, so port wiring and names
//! survive any number of passes.

use std::collections::HashMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::netlist::{GateKind, Netlist, NetlistBuilder};

const PERTURB_P: f64 = 0.35;

// ---------------------------------------------------------------------
// Mutable rewrite graph
// ---------------------------------------------------------------------

struct MutGraph {
    kinds: Vec<GateKind>,
    fanins: Vec<Vec<usize>>,
    fanouts: Vec<Vec<usize>>,
    names: Vec<Option<String>>,
    alive: Vec<bool>,
    anchored: Vec<bool>,
    pis: Vec<usize>,
    keys: Vec<usize>,
    markers: Vec<usize>,
}

impl MutGraph {
    fn from_netlist(n: &Netlist) -> MutGraph {
        let len = n.len();
        let mut g = MutGraph {
            kinds: Vec::with_capacity(len),
            fanins: Vec::with_capacity(len),
            fanouts: vec![Vec::new(); len],
            names: Vec::with_capacity(len),
            alive: vec![true; len],
            anchored: vec![false; len],
            pis: n.primary_inputs().iter().map(|g| g.index()).collect(),
            keys: n.key_inputs().iter().map(|g| g.index()).collect(),
            markers: n.primary_outputs().iter().map(|g| g.index()).collect(),
        };
        for (_, gate) in n.gates() {
            g.kinds.push(gate.kind);
            g.fanins.push(gate.fanins.iter().map(|f| f.index()).collect());
            g.names.push(gate.name.clone());
        }
        for v in 0..len {
            for i in 0..g.fanins[v].len() {
                let f = g.fanins[v][i];
                g.fanouts[f].push(v);
            }
        }
        for &m in &g.markers {
            let d = g.fanins[m][0];
            g.anchored[d] = true;
        }
        g
    }

    fn len(&self) -> usize {
        self.kinds.len()
    }

    fn is_logic(&self, v: usize) -> bool {
        self.kinds[v].is_logic()
    }

    fn as_const(&self, v: usize) -> Option<bool> {
        match self.kinds[v] {
            GateKind::Const0 => Some(false),
            GateKind::Const1 => Some(true),
            _ => None,
        }
    }

    /// Rewrites `v` in place to a new kind and fanin list.
    fn set_gate(&mut self, v: usize, kind: GateKind, fanins: Vec<usize>) {
        let old = std::mem::take(&mut self.fanins[v]);
        for f in old {
            let pos = self.fanouts[f].iter().position(|&c| c == v).expect("edge exists");
            self.fanouts[f].swap_remove(pos);
        }
        for &f in &fanins {
            self.fanouts[f].push(v);
        }
        self.kinds[v] = kind;
        self.fanins[v] = fanins;
    }

    fn new_node(&mut self, kind: GateKind, fanins: Vec<usize>) -> usize {
        let v = self.len();
        self.kinds.push(kind);
        self.fanouts.push(Vec::new());
        self.names.push(None);
        self.alive.push(true);
        self.anchored.push(false);
        for &f in &fanins {
            self.fanouts[f].push(v);
        }
        self.fanins.push(fanins);
        v
    }

    /// Re-points every consumer of `v` (markers included) at `w` and
    /// leaves `v` without consumers. Transfers the anchor if `v` had one.
    fn redirect_uses(&mut self, v: usize, w: usize) {
        debug_assert!(!self.anchored[v], "anchored gates are rewritten in place, never bypassed");
        let consumers = std::mem::take(&mut self.fanouts[v]);
        for &c in &consumers {
            for f in self.fanins[c].iter_mut() {
                if *f == v {
                    *f = w;
                }
            }
        }
        self.fanouts[w].extend(consumers);
    }

    fn kill(&mut self, v: usize) {
        debug_assert!(self.fanouts[v].is_empty());
        let old = std::mem::take(&mut self.fanins[v]);
        for f in old {
            let pos = self.fanouts[f].iter().position(|&c| c == v).expect("edge exists");
            self.fanouts[f].swap_remove(pos);
        }
        self.alive[v] = false;
    }

    /// Merges duplicate gates (same kind, same fanin multiset) until none
    /// remain. Anchored gates absorb their duplicates.
    fn dup_merge_pass(&mut self) {
        loop {
            let mut seen: HashMap<(GateKind, Vec<usize>), usize> = HashMap::new();
            let mut merged = false;
            for v in 0..self.len() {
                if !self.alive[v] || !self.is_logic(v) {
                    continue;
                }
                let mut key_fanins = self.fanins[v].clone();
                key_fanins.sort_unstable();
                match seen.entry((self.kinds[v], key_fanins)) {
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert(v);
                    }
                    std::collections::hash_map::Entry::Occupied(mut e) => {
                        let canon = *e.get();
                        if self.anchored[v] && self.anchored[canon] {
                            continue;
                        }
                        let (keep, drop) =
                            if self.anchored[v] { (v, canon) } else { (canon, v) };
                        e.insert(keep);
                        self.redirect_uses(drop, keep);
                        self.kill(drop);
                        merged = true;
                    }
                }
            }
            if !merged {
                break;
            }
        }
    }

    /// Removes gates that cannot reach any output port. Interface inputs
    /// always stay.
    fn dead_pass(&mut self) {
        let mut reach = vec![false; self.len()];
        let mut stack: Vec<usize> = self.markers.clone();
        for &m in &self.markers {
            reach[m] = true;
        }
        while let Some(v) = stack.pop() {
            for &f in &self.fanins[v] {
                if !reach[f] {
                    reach[f] = true;
                    stack.push(f);
                }
            }
        }
        // Consumers of an unreachable gate are themselves unreachable, so
        // killing sink-first converges; loop until stable.
        loop {
            let mut changed = false;
            for (v, &r) in reach.iter().enumerate() {
                if self.alive[v]
                    && !r
                    && self.kinds[v] != GateKind::Input
                    && self.fanouts[v].is_empty()
                {
                    self.kill(v);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn rebuild(&self) -> Result<Netlist> {
        let mut b = NetlistBuilder::new();
        let mut map = vec![usize::MAX; self.len()];
        for &pi in &self.pis {
            if self.kinds[pi] == GateKind::Input {
                map[pi] = b.input(self.names[pi].as_deref().expect("inputs are named"))?.index();
            }
        }
        for &k in &self.keys {
            if self.kinds[k] == GateKind::Input {
                map[k] = b.key_input(self.names[k].as_deref().expect("inputs are named"))?.index();
            }
        }
        // Kahn over live logic gates, lowest node index first.
        let mut indeg = vec![0usize; self.len()];
        let mut heap = std::collections::BinaryHeap::new();
        for (v, deg) in indeg.iter_mut().enumerate() {
            if !self.alive[v] || !self.is_logic(v) {
                continue;
            }
            let d = self.fanins[v].iter().filter(|&&f| self.is_logic(f)).count();
            *deg = d;
            if d == 0 {
                heap.push(std::cmp::Reverse(v));
            }
        }
        while let Some(std::cmp::Reverse(v)) = heap.pop() {
            let fanins = self.fanins[v]
                .iter()
                .map(|&f| {
                    debug_assert!(map[f] != usize::MAX, "fanin scheduled before use");
                    crate::netlist::GateId(map[f] as u32)
                })
                .collect();
            map[v] = match &self.names[v] {
                Some(name) => b.gate_named(self.kinds[v], fanins, name)?.index(),
                None => b.gate_anon(self.kinds[v], fanins).index(),
            };
            for &c in &self.fanouts[v] {
                if self.alive[c] && self.is_logic(c) {
                    indeg[c] -= 1;
                    if indeg[c] == 0 {
                        heap.push(std::cmp::Reverse(c));
                    }
                }
            }
        }
        for &m in &self.markers {
            let driver = self.fanins[m][0];
            let port = self.names[m].as_deref().expect("ports are named");
            b.output(port, crate::netlist::GateId(map[driver] as u32))?;
        }
        b.build()
    }
}

// ---------------------------------------------------------------------
// Rules
// ---------------------------------------------------------------------

struct Rule {
    name: &'static str,
    perturb: bool,
    apply: fn(&mut MutGraph, usize) -> bool,
    /// Minimal circuits containing the pattern; used by the registration
    /// self-check to prove the rewrite preserves function.
    fixtures: fn() -> Vec<Netlist>,
}

fn bench(text: &str) -> Netlist {
    crate::bench::parse_bench(text).expect("fixture parses")
}

fn rule_double_not(g: &mut MutGraph, v: usize) -> bool {
    if g.kinds[v] != GateKind::Not {
        return false;
    }
    let u = g.fanins[v][0];
    if g.kinds[u] != GateKind::Not {
        return false;
    }
    let w = g.fanins[u][0];
    if g.anchored[v] {
        g.set_gate(v, GateKind::Buf, vec![w]);
    } else {
        g.redirect_uses(v, w);
        g.kill(v);
    }
    true
}

/// NOT over an X(N)OR, or a NOT feeding one, folds into the opposite kind.
fn rule_xnor_absorb(g: &mut MutGraph, v: usize) -> bool {
    let flip = |k: GateKind| match k {
        GateKind::Xor => GateKind::Xnor,
        GateKind::Xnor => GateKind::Xor,
        _ => unreachable!(),
    };
    if g.kinds[v] == GateKind::Not {
        let u = g.fanins[v][0];
        if matches!(g.kinds[u], GateKind::Xor | GateKind::Xnor) {
            let fanins = g.fanins[u].clone();
            g.set_gate(v, flip(g.kinds[u]), fanins);
            return true;
        }
    }
    if matches!(g.kinds[v], GateKind::Xor | GateKind::Xnor) {
        if let Some(pos) =
            g.fanins[v].iter().position(|&f| g.kinds[f] == GateKind::Not)
        {
            let mut fanins = g.fanins[v].clone();
            fanins[pos] = g.fanins[fanins[pos]][0];
            g.set_gate(v, flip(g.kinds[v]), fanins);
            return true;
        }
    }
    false
}

/// X(N)OR re-dressed as an inverter over its opposite kind.
fn rule_xnor_expand(g: &mut MutGraph, v: usize) -> bool {
    let opposite = match g.kinds[v] {
        GateKind::Xor => GateKind::Xnor,
        GateKind::Xnor => GateKind::Xor,
        _ => return false,
    };
    if g.fanins[v].len() < 2 {
        return false;
    }
    let inner = g.new_node(opposite, g.fanins[v].clone());
    g.set_gate(v, GateKind::Not, vec![inner]);
    true
}

fn rule_not_absorb(g: &mut MutGraph, v: usize) -> bool {
    if g.kinds[v] != GateKind::Not {
        return false;
    }
    let u = g.fanins[v][0];
    let dual = match g.kinds[u] {
        GateKind::And => GateKind::Nand,
        GateKind::Nand => GateKind::And,
        GateKind::Or => GateKind::Nor,
        GateKind::Nor => GateKind::Or,
        _ => return false,
    };
    let fanins = g.fanins[u].clone();
    g.set_gate(v, dual, fanins);
    true
}

/// An AND-family gate whose inputs are all inverters collapses to its
/// dual over the uninverted signals.
fn rule_demorgan_collapse(g: &mut MutGraph, v: usize) -> bool {
    let dual = match g.kinds[v] {
        GateKind::And => GateKind::Nor,
        GateKind::Nand => GateKind::Or,
        GateKind::Or => GateKind::Nand,
        GateKind::Nor => GateKind::And,
        _ => return false,
    };
    if g.fanins[v].is_empty() || !g.fanins[v].iter().all(|&f| g.kinds[f] == GateKind::Not) {
        return false;
    }
    let fanins: Vec<usize> = g.fanins[v].iter().map(|&f| g.fanins[f][0]).collect();
    g.set_gate(v, dual, fanins);
    true
}

fn rule_demorgan_expand(g: &mut MutGraph, v: usize) -> bool {
    let dual = match g.kinds[v] {
        GateKind::And => GateKind::Nor,
        GateKind::Nand => GateKind::Or,
        GateKind::Or => GateKind::Nand,
        GateKind::Nor => GateKind::And,
        _ => return false,
    };
    if g.fanins[v].len() < 2 {
        return false;
    }
    let fanins: Vec<usize> =
        g.fanins[v].clone().into_iter().map(|f| g.new_node(GateKind::Not, vec![f])).collect();
    g.set_gate(v, dual, fanins);
    true
}

/// Folds constants through one gate: drops neutral inputs, short-circuits
/// dominating ones, and collapses fully-constant gates.
fn rule_const_fold(g: &mut MutGraph, v: usize) -> bool {
    let kind = g.kinds[v];
    if !kind.is_logic() || matches!(kind, GateKind::Const0 | GateKind::Const1) {
        return false;
    }
    if !g.fanins[v].iter().any(|&f| g.as_const(f).is_some()) {
        return false;
    }
    match kind {
        GateKind::Not => {
            let bit = g.as_const(g.fanins[v][0]).unwrap();
            g.set_gate(v, if bit { GateKind::Const0 } else { GateKind::Const1 }, vec![]);
        }
        GateKind::Buf => {
            let bit = g.as_const(g.fanins[v][0]).unwrap();
            g.set_gate(v, if bit { GateKind::Const1 } else { GateKind::Const0 }, vec![]);
        }
        GateKind::And | GateKind::Nand | GateKind::Or | GateKind::Nor => {
            let invert = matches!(kind, GateKind::Nand | GateKind::Nor);
            let dominant = matches!(kind, GateKind::Or | GateKind::Nor);
            let mut rest = Vec::new();
            let mut dominated = false;
            for &f in &g.fanins[v] {
                match g.as_const(f) {
                    Some(bit) if bit == dominant => dominated = true,
                    Some(_) => {}
                    None => rest.push(f),
                }
            }
            let const_of = |bit: bool| if bit { GateKind::Const1 } else { GateKind::Const0 };
            if dominated {
                g.set_gate(v, const_of(dominant != invert), vec![]);
            } else if rest.is_empty() {
                g.set_gate(v, const_of(!dominant != invert), vec![]);
            } else if rest.len() == 1 {
                g.set_gate(v, if invert { GateKind::Not } else { GateKind::Buf }, rest);
            } else {
                let and_or = if dominant { GateKind::Or } else { GateKind::And };
                let nand_nor = if dominant { GateKind::Nor } else { GateKind::Nand };
                g.set_gate(v, if invert { nand_nor } else { and_or }, rest);
            }
        }
        GateKind::Xor | GateKind::Xnor => {
            let mut parity = kind == GateKind::Xnor;
            let mut rest = Vec::new();
            for &f in &g.fanins[v] {
                match g.as_const(f) {
                    Some(bit) => parity ^= bit,
                    None => rest.push(f),
                }
            }
            match rest.len() {
                0 => g.set_gate(
                    v,
                    if parity { GateKind::Const1 } else { GateKind::Const0 },
                    vec![],
                ),
                1 => g.set_gate(v, if parity { GateKind::Not } else { GateKind::Buf }, rest),
                _ => g.set_gate(v, if parity { GateKind::Xnor } else { GateKind::Xor }, rest),
            }
        }
        _ => return false,
    }
    true
}

/// Left-rotates one association step: OP(OP(a, b), c) -> OP(a, OP(b, c)).
fn rule_assoc_regroup(g: &mut MutGraph, v: usize) -> bool {
    let kind = g.kinds[v];
    if !matches!(kind, GateKind::And | GateKind::Or) || g.fanins[v].len() != 2 {
        return false;
    }
    let (x, c) = (g.fanins[v][0], g.fanins[v][1]);
    if g.kinds[x] != kind || g.fanins[x].len() != 2 {
        return false;
    }
    let (a, b2) = (g.fanins[x][0], g.fanins[x][1]);
    let inner = g.new_node(kind, vec![b2, c]);
    g.set_gate(v, kind, vec![a, inner]);
    true
}

fn rule_buf_elim(g: &mut MutGraph, v: usize) -> bool {
    if g.kinds[v] != GateKind::Buf || g.anchored[v] {
        return false;
    }
    let u = g.fanins[v][0];
    g.redirect_uses(v, u);
    g.kill(v);
    true
}

fn registry() -> &'static Vec<Rule> {
    static RULES: std::sync::OnceLock<Vec<Rule>> = std::sync::OnceLock::new();
    RULES.get_or_init(|| {
        let rules = vec![
            Rule {
                name: "double_not_elim",
                perturb: false,
                apply: rule_double_not,
                fixtures: || {
                    vec![
                        bench("INPUT(a)\nOUTPUT(y)\nn1 = NOT(a)\nn2 = NOT(n1)\ny = BUF(n2)\n"),
                        bench("INPUT(a)\nOUTPUT(y)\nn1 = NOT(a)\ny = NOT(n1)\n"),
                    ]
                },
            },
            Rule {
                name: "xnor_absorb",
                perturb: false,
                apply: rule_xnor_absorb,
                fixtures: || {
                    vec![
                        bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nx = XOR(a, b)\ny = NOT(x)\n"),
                        bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nx = XNOR(a, b)\ny = NOT(x)\n"),
                        bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nn = NOT(a)\ny = XOR(n, b)\n"),
                        bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nn = NOT(b)\ny = XNOR(a, n)\n"),
                    ]
                },
            },
            Rule {
                name: "xnor_expand",
                perturb: true,
                apply: rule_xnor_expand,
                fixtures: || {
                    vec![
                        bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = XOR(a, b)\n"),
                        bench("INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\ny = XNOR(a, b, c)\n"),
                    ]
                },
            },
            Rule {
                name: "not_absorb",
                perturb: false,
                apply: rule_not_absorb,
                fixtures: || {
                    vec![
                        bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nx = AND(a, b)\ny = NOT(x)\n"),
                        bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nx = NOR(a, b)\ny = NOT(x)\n"),
                    ]
                },
            },
            Rule {
                name: "demorgan_collapse",
                perturb: false,
                apply: rule_demorgan_collapse,
                fixtures: || {
                    vec![
                        bench(
                            "INPUT(a)\nINPUT(b)\nOUTPUT(y)\nna = NOT(a)\nnb = NOT(b)\ny = NAND(na, nb)\n",
                        ),
                        bench(
                            "INPUT(a)\nINPUT(b)\nOUTPUT(y)\nna = NOT(a)\nnb = NOT(b)\ny = OR(na, nb)\n",
                        ),
                    ]
                },
            },
            Rule {
                name: "demorgan_expand",
                perturb: true,
                apply: rule_demorgan_expand,
                fixtures: || {
                    vec![
                        bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = NAND(a, b)\n"),
                        bench("INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\ny = NOR(a, b, c)\n"),
                        bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n"),
                        bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = OR(a, b)\n"),
                    ]
                },
            },
            Rule {
                name: "const_fold",
                perturb: false,
                apply: rule_const_fold,
                fixtures: || {
                    vec![
                        bench("INPUT(a)\nOUTPUT(y)\nc = CONST0()\ny = AND(a, c)\n"),
                        bench("INPUT(a)\nOUTPUT(y)\nc = CONST1()\ny = AND(a, c)\n"),
                        bench("INPUT(a)\nOUTPUT(y)\nc = CONST1()\ny = XOR(a, c)\n"),
                        bench("INPUT(a)\nOUTPUT(y)\nc = CONST0()\ny = NOR(a, c)\n"),
                        bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nc = CONST1()\ny = NAND(a, c, b)\n"),
                        bench("OUTPUT(y)\nc = CONST1()\nd = CONST0()\ny = XNOR(c, d)\n"),
                    ]
                },
            },
            Rule {
                name: "assoc_regroup",
                perturb: true,
                apply: rule_assoc_regroup,
                fixtures: || {
                    vec![
                        bench(
                            "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\nx = AND(a, b)\ny = AND(x, c)\n",
                        ),
                        bench(
                            "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\nx = OR(a, b)\ny = OR(x, c)\n",
                        ),
                    ]
                },
            },
            Rule {
                name: "buf_elim",
                perturb: false,
                apply: rule_buf_elim,
                fixtures: || {
                    vec![bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nu = BUF(a)\ny = AND(u, b)\n")]
                },
            },
        ];
        for rule in &rules {
            self_check(rule);
        }
        rules
    })
}

/// Proves a rule on its fixtures: the rewrite must fire somewhere and the
/// result must be exhaustively equivalent to the original.
fn self_check(rule: &Rule) {
    for before in (rule.fixtures)() {
        let mut g = MutGraph::from_netlist(&before);
        let fired = (0..g.len()).any(|v| g.alive[v] && (rule.apply)(&mut g, v));
        assert!(fired, "rule {} never fired on its fixture", rule.name);
        g.dead_pass();
        let after = g.rebuild().unwrap_or_else(|e| panic!("rule {}: {e}", rule.name));
        let ok = crate::sim::equivalence_exhaustive(&before, &after, None, None)
            .unwrap_or_else(|e| panic!("rule {}: {e}", rule.name));
        assert!(ok, "rule {} changed the function of its fixture", rule.name);
    }
}

// ---------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------

/// Forces rule registration — which proves every rule on its fixtures by
/// exhaustive equivalence, panicking on any miss — and reports how many
/// rules are active.
pub fn verify_rules() -> usize {
    registry().len()
}

pub fn resynthesize(n: &Netlist, effort: usize, seed: u64) -> Result<Netlist> {
    if effort == 0 {
        return Ok(n.clone());
    }
    let rules = registry();
    let mut g = MutGraph::from_netlist(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..effort {
        let mut order: Vec<usize> =
            (0..g.len()).filter(|&v| g.alive[v] && g.is_logic(v)).collect();
        order.shuffle(&mut rng);
        for v in order {
            if !g.alive[v] {
                continue;
            }
            for rule in rules {
                if rule.perturb && !rng.gen_bool(PERTURB_P) {
                    continue;
                }
                if (rule.apply)(&mut g, v) {
                    break;
                }
            }
        }
        g.dup_merge_pass();
        g.dead_pass();
    }
    let out = g.rebuild()?;
    debug_assert!(
        behavior_matches(n, &out, 0x5eed ^ seed),
        "rewrite changed circuit behavior"
    );
    Ok(out)
}

/// Fixes some inputs (primary or key) to constants and folds the result:
/// constants push through to a fixpoint, buffers dissolve, and anything
/// no longer reaching a port is dropped. Assigned inputs leave the
/// interface. Running it again with no pins is the identity.
pub fn constant_propagate(n: &Netlist, pins: &[(&str, bool)]) -> Result<Netlist> {
    let mut g = MutGraph::from_netlist(n);
    for &(name, bit) in pins {
        let id = n.find(name).ok_or_else(|| Error::UnknownSignal(name.to_string()))?;
        if g.kinds[id.index()] != GateKind::Input {
            return Err(Error::Invalid(format!("`{name}` is not an input pin")));
        }
        g.kinds[id.index()] = if bit { GateKind::Const1 } else { GateKind::Const0 };
    }
    // One pass in dependency order folds to a fixpoint because folding a
    // gate only ever depends on already-visited fanins.
    let order: Vec<usize> = n.topological_order().iter().map(|id| id.index()).collect();
    for &v in &order {
        if g.alive[v] && g.is_logic(v) {
            rule_const_fold(&mut g, v);
        }
    }
    for &v in &order {
        if g.alive[v] {
            rule_buf_elim(&mut g, v);
        }
    }
    g.dead_pass();
    g.rebuild()
}

fn behavior_matches(a: &Netlist, b: &Netlist, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slots = a.primary_inputs().len() + a.key_inputs().len();
    let ports: Vec<(String, crate::netlist::GateId)> =
        a.po_ports().map(|(p, m, _)| (p.to_string(), m)).collect();
    for _ in 0..4 {
        let block = crate::sim::PatternBlock::random(slots, &mut rng);
        let va = match crate::sim::simulate(a, &block, None) {
            Ok(v) => v,
            Err(_) => return false,
        };
        let vb = match crate::sim::simulate(b, &block, None) {
            Ok(v) => v,
            Err(_) => return false,
        };
        for (port, ma) in &ports {
            let mb = match b.po_ports().find(|(p, _, _)| p == port) {
                Some((_, m, _)) => m,
                None => return false,
            };
            if va[ma.index()] != vb[mb.index()] {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------
// Synthesis-style report
// ---------------------------------------------------------------------

/// Gate census of a netlist: per-kind counts over logic gates, interface
/// sizes, longest input-to-output path, and total fan-in literals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthReport {
    counts: [usize; GateKind::ALL.len()],
    pub inputs: usize,
    pub outputs: usize,
    pub total_gates: usize,
    pub logic_depth: usize,
    pub literal_count: usize,
}

impl SynthReport {
    pub fn count(&self, kind: GateKind) -> usize {
        self.counts[kind.index()]
    }

    /// Kinds tracked as feature columns, in report order.
    pub fn feature_kinds() -> impl Iterator<Item = GateKind> {
        GateKind::ALL.into_iter().filter(|k| k.is_logic())
    }

    pub fn csv_header() -> String {
        let mut cols: Vec<String> =
            Self::feature_kinds().map(|k| k.label().to_ascii_lowercase()).collect();
        cols.extend(["inputs", "outputs", "total", "depth", "literals"].map(String::from));
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols: Vec<String> =
            Self::feature_kinds().map(|k| self.count(k).to_string()).collect();
        cols.extend([
            self.inputs.to_string(),
            self.outputs.to_string(),
            self.total_gates.to_string(),
            self.logic_depth.to_string(),
            self.literal_count.to_string(),
        ]);
        cols.join(",")
    }

    /// Feature vector for attack models: per-kind counts then interface
    /// and shape numbers, in the same order as the CSV.
    pub fn features(&self) -> Vec<f64> {
        let mut v: Vec<f64> = Self::feature_kinds().map(|k| self.count(k) as f64).collect();
        v.extend([
            self.inputs as f64,
            self.outputs as f64,
            self.total_gates as f64,
            self.logic_depth as f64,
            self.literal_count as f64,
        ]);
        v
    }
}

pub fn report(n: &Netlist) -> SynthReport {
    let mut counts = [0usize; GateKind::ALL.len()];
    let mut literal_count = 0;
    for (_, gate) in n.gates() {
        counts[gate.kind.index()] += 1;
        if gate.kind.is_logic() {
            literal_count += gate.fanins.len();
        }
    }
    let mut depth = vec![0usize; n.len()];
    let mut logic_depth = 0;
    for &id in n.topological_order() {
        let gate = n.gate(id);
        if gate.kind.is_logic() && !matches!(gate.kind, GateKind::Const0 | GateKind::Const1) {
            let d = gate.fanins.iter().map(|f| depth[f.index()]).max().unwrap_or(0) + 1;
            depth[id.index()] = d;
            logic_depth = logic_depth.max(d);
        }
    }
    let total_gates = GateKind::ALL
        .iter()
        .filter(|k| k.is_logic())
        .map(|k| counts[k.index()])
        .sum();
    SynthReport {
        counts,
        inputs: n.primary_inputs().len() + n.key_inputs().len(),
        outputs: n.primary_outputs().len(),
        total_gates,
        logic_depth,
        literal_count,
    }
}
