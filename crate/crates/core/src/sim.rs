//! Bit-parallel simulation.
//!
//! Signals are u64 lanes: one simulation run evaluates up to 64 input
//! patterns at once. Key inputs resolve through a [`KeyMapping`] when one
//! is supplied; otherwise they read from pattern lanes after the primary
//! inputs, which lets attacks sweep key bits like ordinary inputs.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::netlist::{GateKind, KeyMapping, Netlist};

/// Up to 64 input patterns, one lane per input slot. Slot order is the
/// netlist's primary inputs followed by its key inputs; runs that resolve
/// every key through a mapping only need the primary-input lanes.
#[derive(Debug, Clone)]
pub struct PatternBlock {
    lanes: Vec<u64>,
    width: usize,
}

impl PatternBlock {
    pub fn from_lanes(lanes: Vec<u64>, width: usize) -> Self {
        assert!((1..=64).contains(&width), "width must be 1..=64");
        PatternBlock { lanes, width }
    }

    pub fn random(slots: usize, rng: &mut ChaCha8Rng) -> Self {
        PatternBlock { lanes: (0..slots).map(|_| rng.gen()).collect(), width: 64 }
    }

    pub fn random_narrow(slots: usize, width: usize, rng: &mut ChaCha8Rng) -> Self {
        let m = mask(width);
        PatternBlock { lanes: (0..slots).map(|_| rng.gen::<u64>() & m).collect(), width }
    }

    pub fn lane(&self, slot: usize) -> Option<u64> {
        self.lanes.get(slot).copied()
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

pub fn mask(width: usize) -> u64 {
    if width >= 64 {
        !0
    } else {
        (1u64 << width) - 1
    }
}

/// Evaluates every gate, returning one lane per gate id. Output markers
/// copy their driver's lane. Key inputs take their value from `key` when
/// it covers them, then from the pattern block's trailing lanes.
pub fn simulate(n: &Netlist, patterns: &PatternBlock, key: Option<&KeyMapping>) -> Result<Vec<u64>> {
    let mut lanes = vec![0u64; n.len()];
    let n_pis = n.primary_inputs().len();
    for (slot, &pi) in n.primary_inputs().iter().enumerate() {
        lanes[pi.index()] = patterns
            .lane(slot)
            .ok_or_else(|| Error::MissingAssignment(n.name_of(pi).to_string()))?;
    }
    for (i, &kin) in n.key_inputs().iter().enumerate() {
        let name = n.name_of(kin);
        let from_key = key.and_then(|k| k.get(name));
        lanes[kin.index()] = match from_key {
            Some(true) => !0,
            Some(false) => 0,
            None => patterns
                .lane(n_pis + i)
                .ok_or_else(|| Error::MissingAssignment(name.to_string()))?,
        };
    }
    for &id in n.topological_order() {
        let g = n.gate(id);
        let v = match g.kind {
            GateKind::Input => continue,
            GateKind::Const0 => 0,
            GateKind::Const1 => !0,
            GateKind::Buf | GateKind::Output => lanes[g.fanins[0].index()],
            GateKind::Not => !lanes[g.fanins[0].index()],
            GateKind::And => g.fanins.iter().fold(!0u64, |a, f| a & lanes[f.index()]),
            GateKind::Nand => !g.fanins.iter().fold(!0u64, |a, f| a & lanes[f.index()]),
            GateKind::Or => g.fanins.iter().fold(0u64, |a, f| a | lanes[f.index()]),
            GateKind::Nor => !g.fanins.iter().fold(0u64, |a, f| a | lanes[f.index()]),
            GateKind::Xor => g.fanins.iter().fold(0u64, |a, f| a ^ lanes[f.index()]),
            GateKind::Xnor => !g.fanins.iter().fold(0u64, |a, f| a ^ lanes[f.index()]),
        };
        lanes[id.index()] = v;
    }
    Ok(lanes)
}

/// Output lanes in port order.
pub fn output_lanes(n: &Netlist, lanes: &[u64]) -> Vec<u64> {
    n.primary_outputs().iter().map(|po| lanes[po.index()]).collect()
}

const BROADCAST: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

/// Exhaustive equivalence over all input patterns. Inputs are matched by
/// name, outputs by port name; both interfaces must agree. A side's key
/// inputs are resolved by its mapping when one is given, and otherwise
/// enumerated along with the primary inputs, so passing `None` for a
/// locked circuit proves equivalence for every key value. Capped at 24
/// enumerated inputs (16M patterns, 256K blocks).
pub fn equivalence_exhaustive(
    a: &Netlist,
    b: &Netlist,
    key_a: Option<&KeyMapping>,
    key_b: Option<&KeyMapping>,
) -> Result<bool> {
    // Inputs enumerated per circuit: primary inputs, plus key inputs when
    // no mapping pins them (free-key equivalence quantifies over the key).
    fn free<'n>(n: &'n Netlist, key: Option<&KeyMapping>) -> Vec<&'n str> {
        let mut v: Vec<&str> = n.pi_names().collect();
        if key.is_none() {
            v.extend(n.key_names());
        }
        v
    }
    let pis = free(a, key_a);
    let pis_b: std::collections::HashSet<&str> = free(b, key_b).into_iter().collect();
    if pis.len() != pis_b.len() || !pis.iter().all(|p| pis_b.contains(p)) {
        return Err(Error::InterfaceMismatch("primary inputs differ".into()));
    }
    let ports: Vec<String> = a.po_ports().map(|(p, _, _)| p.to_string()).collect();
    let ports_b: std::collections::HashSet<String> =
        b.po_ports().map(|(p, _, _)| p.to_string()).collect();
    if ports.len() != ports_b.len() || !ports.iter().all(|p| ports_b.contains(p)) {
        return Err(Error::InterfaceMismatch("output ports differ".into()));
    }
    if pis.len() > 24 {
        return Err(Error::TooManyInputs(pis.len()));
    }

    // Lane slot i in circuit `b` for the input that sits at slot i in `a`.
    let b_order: Vec<&str> = free(b, key_b);
    let slot_in_a: std::collections::HashMap<&str, usize> =
        pis.iter().enumerate().map(|(i, &p)| (p, i)).collect();

    let po_a: Vec<u32> = a.primary_outputs().iter().map(|g| g.0).collect();
    let mut po_b: Vec<u32> = Vec::with_capacity(ports.len());
    {
        let by_port: std::collections::HashMap<&str, u32> =
            b.po_ports().map(|(p, m, _)| (p, m.0)).collect();
        for (p, m, _) in a.po_ports() {
            let _ = m;
            po_b.push(by_port[p]);
        }
    }

    let n = pis.len();
    let blocks: u64 = if n <= 6 { 1 } else { 1u64 << (n - 6) };
    let width = if n >= 6 { 64 } else { 1usize << n };
    for chunk in 0..blocks {
        let mut lanes_a = vec![0u64; n];
        for i in 0..n {
            lanes_a[i] = if i < 6 {
                BROADCAST[i]
            } else if (chunk >> (i - 6)) & 1 == 1 {
                !0
            } else {
                0
            };
        }
        let lanes_b: Vec<u64> = b_order.iter().map(|p| lanes_a[slot_in_a[p]]).collect();
        let pa = PatternBlock::from_lanes(lanes_a, width);
        let pb = PatternBlock::from_lanes(lanes_b, width);
        let va = simulate(a, &pa, key_a)?;
        let vb = simulate(b, &pb, key_b)?;
        let m = mask(width);
        for (ia, ib) in po_a.iter().zip(&po_b) {
            if (va[*ia as usize] ^ vb[*ib as usize]) & m != 0 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Error metrics of a locked circuit measured against the original
/// circuit's responses on random input patterns. `hd` is the mean
/// fraction of output bits that differ from the original; `oer` is the
/// fraction of (key, pattern) pairs with at least one differing output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionReport {
    pub keys_evaluated: usize,
    pub patterns: usize,
    pub hd: f64,
    pub oer: f64,
}

/// Samples `n_keys` distinct wrong keys and reports how badly they corrupt
/// the outputs relative to `original`. `n_keys = 0` is probe mode: the
/// correct key itself is measured, so a sound lock reports hd = oer = 0
/// and a broken one does not. Interfaces are matched by name.
pub fn corruption(
    original: &Netlist,
    locked: &Netlist,
    correct: &KeyMapping,
    n_keys: usize,
    n_patterns: usize,
    seed: u64,
) -> Result<CorruptionReport> {
    correct.check_covers(locked)?;
    if n_patterns == 0 {
        return Err(Error::EmptyPatterns);
    }
    let pis: Vec<&str> = locked.pi_names().collect();
    let orig_set: std::collections::HashSet<&str> = original.pi_names().collect();
    if pis.len() != orig_set.len() || !pis.iter().all(|p| orig_set.contains(p)) {
        return Err(Error::InterfaceMismatch("primary inputs differ".into()));
    }
    let slot: std::collections::HashMap<&str, usize> =
        pis.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let orig_order: Vec<usize> = original.pi_names().map(|p| slot[p]).collect();
    let po_pairs: Vec<(usize, usize)> = {
        let by_port: std::collections::HashMap<&str, usize> =
            original.po_ports().map(|(p, m, _)| (p, m.index())).collect();
        let mut v = Vec::new();
        for (p, m, _) in locked.po_ports() {
            let o = *by_port
                .get(p)
                .ok_or_else(|| Error::InterfaceMismatch(format!("output `{p}` missing")))?;
            v.push((m.index(), o));
        }
        if v.len() != by_port.len() {
            return Err(Error::InterfaceMismatch("output ports differ".into()));
        }
        v
    };

    let k = locked.key_inputs().len();
    let names: Vec<String> = locked.key_names().map(str::to_string).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let keys: Vec<KeyMapping> = if n_keys == 0 {
        vec![correct.clone()]
    } else if k <= 20 {
        let correct_bits: u64 = names
            .iter()
            .enumerate()
            .filter(|(_, name)| correct.get(name) == Some(true))
            .map(|(i, _)| 1u64 << i)
            .sum();
        let mut all: Vec<u64> = (0..(1u64 << k)).filter(|&v| v != correct_bits).collect();
        all.shuffle(&mut rng);
        all.truncate(n_keys);
        all.into_iter().map(|bits| KeyMapping::from_packed(&names, bits)).collect::<Result<_>>()?
    } else {
        // Wide keys stay as bit vectors; packing into a word would cap K.
        let correct_vec: Vec<bool> = names.iter().map(|n| correct.get(n) == Some(true)).collect();
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::with_capacity(n_keys);
        while out.len() < n_keys {
            let v: Vec<bool> = (0..k).map(|_| rng.gen()).collect();
            if v != correct_vec && seen.insert(v.clone()) {
                let entries = names.iter().cloned().zip(v).collect();
                out.push(KeyMapping::new(entries)?);
            }
        }
        out
    };

    let n_pos = po_pairs.len().max(1);
    let mut diff_bits = 0u64;
    let mut err_patterns = 0u64;
    let mut pairs = 0u64;
    for key in &keys {
        let mut left = n_patterns;
        while left > 0 {
            let w = left.min(64);
            let block = PatternBlock::random_narrow(pis.len(), w, &mut rng);
            let orig_lanes: Vec<u64> =
                orig_order.iter().map(|&s| block.lane(s).expect("pi lane")).collect();
            let good = simulate(original, &PatternBlock::from_lanes(orig_lanes, w), None)?;
            let bad = simulate(locked, &block, Some(key))?;
            let m = mask(w);
            let mut any = 0u64;
            for &(lo, or) in &po_pairs {
                let d = (bad[lo] ^ good[or]) & m;
                diff_bits += d.count_ones() as u64;
                any |= d;
            }
            err_patterns += any.count_ones() as u64;
            pairs += w as u64;
            left -= w;
        }
    }
    Ok(CorruptionReport {
        keys_evaluated: keys.len(),
        patterns: n_patterns,
        hd: diff_bits as f64 / (pairs * n_pos as u64) as f64,
        oer: err_patterns as f64 / pairs as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::parse_bench;

    fn xor_lock() -> Netlist {
        parse_bench("INPUT(a)\nINPUT(b)\nINPUT(k0)\nOUTPUT(y)\nu = AND(a, b)\ny = XOR(u, k0)\n")
            .unwrap()
    }

    #[test]
    fn gate_semantics_match_truth_tables() {
        let text = "INPUT(a)\nINPUT(b)\nOUTPUT(o1)\nOUTPUT(o2)\nOUTPUT(o3)\nOUTPUT(o4)\n\
                    o1 = NAND(a, b)\no2 = NOR(a, b)\no3 = XNOR(a, b)\no4 = NOT(a)\n";
        let n = parse_bench(text).unwrap();
        // a = 0101, b = 0011 over four patterns.
        let block = PatternBlock::from_lanes(vec![0b0101, 0b0011], 4);
        let lanes = simulate(&n, &block, None).unwrap();
        let get = |name: &str| lanes[n.find(name).unwrap().index()] & 0b1111;
        assert_eq!(get("o1"), 0b1110);
        assert_eq!(get("o2"), 0b1000);
        assert_eq!(get("o3"), 0b1001);
        assert_eq!(get("o4"), 0b1010);
    }

    #[test]
    fn key_mapping_overrides_key_lanes() {
        let n = xor_lock();
        let names = vec!["k0".to_string()];
        let k0 = KeyMapping::from_packed(&names, 0).unwrap();
        let k1 = KeyMapping::from_packed(&names, 1).unwrap();
        let block = PatternBlock::from_lanes(vec![0b0101, 0b0011], 4);
        let y = n.find("y").unwrap().index();
        let with0 = simulate(&n, &block, Some(&k0)).unwrap()[y] & 0b1111;
        let with1 = simulate(&n, &block, Some(&k1)).unwrap()[y] & 0b1111;
        assert_eq!(with0, 0b0001);
        assert_eq!(with1, 0b1110);
    }

    #[test]
    fn free_key_mode_reads_trailing_lanes() {
        let n = xor_lock();
        let block = PatternBlock::from_lanes(vec![0b0101, 0b0011, 0b1111], 4);
        let y = n.find("y").unwrap().index();
        assert_eq!(simulate(&n, &block, None).unwrap()[y] & 0b1111, 0b1110);
    }

    #[test]
    fn missing_key_lane_is_reported() {
        let n = xor_lock();
        let block = PatternBlock::from_lanes(vec![0, 0], 4);
        match simulate(&n, &block, None) {
            Err(Error::MissingAssignment(name)) => assert_eq!(name, "k0"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn equivalence_detects_match_and_mismatch() {
        let a = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = NAND(a, b)\n").unwrap();
        let b = parse_bench(
            "INPUT(b)\nINPUT(a)\nOUTPUT(y)\nna = NOT(a)\nnb = NOT(b)\ny = OR(na, nb)\n",
        )
        .unwrap();
        assert!(equivalence_exhaustive(&a, &b, None, None).unwrap());
        let c = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n").unwrap();
        assert!(!equivalence_exhaustive(&a, &c, None, None).unwrap());
    }

    #[test]
    fn equivalence_spans_block_boundaries() {
        // 8 inputs exercises the chunked enumeration (4 blocks of 64).
        let mut text = String::new();
        for i in 0..8 {
            text.push_str(&format!("INPUT(x{i})\n"));
        }
        text.push_str("OUTPUT(y)\n");
        text.push_str("p0 = XOR(x0, x1)\np1 = XOR(p0, x2)\np2 = XOR(p1, x3)\n");
        text.push_str("p3 = XOR(p2, x4)\np4 = XOR(p3, x5)\np5 = XOR(p4, x6)\ny = XOR(p5, x7)\n");
        let a = parse_bench(&text).unwrap();
        let flat = "INPUT(x0)\nINPUT(x1)\nINPUT(x2)\nINPUT(x3)\nINPUT(x4)\nINPUT(x5)\nINPUT(x6)\nINPUT(x7)\nOUTPUT(y)\ny = XOR(x0, x1, x2, x3, x4, x5, x6, x7)\n";
        let b = parse_bench(flat).unwrap();
        assert!(equivalence_exhaustive(&a, &b, None, None).unwrap());
        // Flip one leaf: parity differs on every pattern, caught in block 0,
        // but also check a deep disagreement only some blocks see.
        let c_text = text.replace("y = XOR(p5, x7)", "y = AND(p5, x7)");
        let c = parse_bench(&c_text).unwrap();
        assert!(!equivalence_exhaustive(&a, &c, None, None).unwrap());
    }

    #[test]
    fn locked_circuit_equivalent_only_under_correct_key() {
        let locked = xor_lock();
        let plain = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n").unwrap();
        let names = vec!["k0".to_string()];
        let good = KeyMapping::from_packed(&names, 0).unwrap();
        let bad = KeyMapping::from_packed(&names, 1).unwrap();
        assert!(equivalence_exhaustive(&locked, &plain, Some(&good), None).unwrap());
        assert!(!equivalence_exhaustive(&locked, &plain, Some(&bad), None).unwrap());
    }

    #[test]
    fn corruption_of_inverted_output_is_total() {
        // Wrong key inverts y on every pattern: hd = oer = 1.
        let locked = xor_lock();
        let plain = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n").unwrap();
        let names = vec!["k0".to_string()];
        let correct = KeyMapping::from_packed(&names, 0).unwrap();
        let r = corruption(&plain, &locked, &correct, 1, 256, 9).unwrap();
        assert_eq!(r.keys_evaluated, 1);
        assert_eq!(r.hd, 1.0);
        assert_eq!(r.oer, 1.0);
    }

    #[test]
    fn probe_mode_measures_the_correct_key_against_the_original() {
        let locked = xor_lock();
        let plain = parse_bench("INPUT(b)\nINPUT(a)\nOUTPUT(y)\ny = AND(b, a)\n").unwrap();
        let good = KeyMapping::from_packed(&["k0".to_string()], 0).unwrap();
        let r = corruption(&plain, &locked, &good, 0, 64, 1).unwrap();
        assert_eq!(r.keys_evaluated, 1);
        assert_eq!(r.hd, 0.0);
        // A wrong "correct" key is a broken lock, and the probe says so.
        let bad = KeyMapping::from_packed(&["k0".to_string()], 1).unwrap();
        let r = corruption(&plain, &locked, &bad, 0, 64, 1).unwrap();
        assert_eq!(r.hd, 1.0);
    }

    #[test]
    fn corruption_is_seed_deterministic() {
        let mut text = String::from("INPUT(a)\nINPUT(b)\nINPUT(c)\nINPUT(k0)\nINPUT(k1)\nOUTPUT(y)\n");
        text.push_str("u = AND(a, b)\nv = XOR(u, k0)\nw = OR(v, c)\ny = XNOR(w, k1)\n");
        let locked = parse_bench(&text).unwrap();
        // k0=0, k1=1 make v = u and y = w.
        let plain =
            parse_bench("INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\nu = AND(a, b)\ny = OR(u, c)\n")
                .unwrap();
        let names = vec!["k0".to_string(), "k1".to_string()];
        let correct = KeyMapping::from_packed(&names, 0b10).unwrap();
        let a = corruption(&plain, &locked, &correct, 2, 500, 77).unwrap();
        let b = corruption(&plain, &locked, &correct, 2, 500, 77).unwrap();
        assert_eq!(a, b);
        assert!(a.hd > 0.0 && a.hd <= 1.0);
        assert!(a.oer >= a.hd);
        assert_eq!(corruption(&plain, &locked, &correct, 0, 500, 3).unwrap().oer, 0.0);
    }
}
