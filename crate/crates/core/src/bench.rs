//! BENCH netlist format.
//!
//! The canonical interchange format: `INPUT(a)`, `OUTPUT(y)`, and
//! `y = NAND(a, b)` definition lines, `#` comments. Gate keywords are
//! case-insensitive and `BUFF` is accepted for `BUF`. Inputs whose names
//! match `k<digits>` parse as key inputs. Sequential elements (`DFF`) are
//! rejected: the model is strictly combinational.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::netlist::{is_key_name, GateId, GateKind, Netlist, NetlistBuilder};

enum Item {
    Input { name: String, line: usize, col: usize },
    Output { name: String, line: usize, col: usize },
    Def { name: String, kind: GateKind, args: Vec<(String, usize)>, line: usize, col: usize },
}

pub fn parse_bench(text: &str) -> Result<Netlist> {
    let mut items = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        items.push(parse_line(line, line_no)?);
    }
    resolve(items)
}

fn parse_line(line: &str, line_no: usize) -> Result<Item> {
    let err = |col: usize, msg: String| Error::Parse { line: line_no, col, msg };
    let bad = |msg: &str| err(first_nonspace(line), msg.to_string());

    if let Some(eq) = line.find('=') {
        // name = KIND(args)
        let name_part = &line[..eq];
        let name = name_part.trim();
        if name.is_empty() {
            return Err(bad("missing signal name before `=`"));
        }
        check_name(name, line_no, first_nonspace(name_part) )?;
        let rhs = &line[eq + 1..];
        let open = rhs
            .find('(')
            .ok_or_else(|| err(eq + 2 + first_nonspace(rhs), "expected `KIND(...)` after `=`".into()))?;
        let close = rhs
            .rfind(')')
            .ok_or_else(|| err(line.len(), "missing `)`".into()))?;
        if close < open {
            return Err(err(eq + 2 + close, "misplaced `)`".into()));
        }
        let kw = rhs[..open].trim();
        let kw_col = eq + 2 + first_nonspace(&rhs[..open]);
        if kw.eq_ignore_ascii_case("DFF") || kw.eq_ignore_ascii_case("DFFSR") {
            return Err(Error::Unsupported {
                line: line_no,
                msg: "sequential element DFF; only combinational gates are supported".into(),
            });
        }
        let kind = GateKind::from_keyword(kw)
            .ok_or_else(|| err(kw_col, format!("unknown gate type `{kw}`")))?;
        let mut args = Vec::new();
        let args_str = &rhs[open + 1..close];
        let mut cursor = 0usize;
        for piece in args_str.split(',') {
            let tok = piece.trim();
            let col = eq + 2 + open + 1 + cursor + first_nonspace(piece);
            if !tok.is_empty() {
                check_name(tok, line_no, col)?;
                args.push((tok.to_string(), col));
            } else if args_str.trim().is_empty() && args_str.split(',').count() == 1 {
                // `CONST0()` has a legitimately empty argument list.
            } else {
                return Err(err(col, "empty argument".into()));
            }
            cursor += piece.len() + 1;
        }
        let tail = rhs[close + 1..].trim();
        if !tail.is_empty() {
            return Err(err(eq + 2 + close + 1, format!("unexpected trailing `{tail}`")));
        }
        return Ok(Item::Def { name: name.to_string(), kind, args, line: line_no, col: first_nonspace(line) + 1 });
    }

    // INPUT(name) / OUTPUT(name)
    let trimmed = line.trim();
    let open = trimmed.find('(');
    let close = trimmed.rfind(')');
    let (Some(open), Some(close)) = (open, close) else {
        return Err(bad(&format!("cannot parse `{trimmed}`")));
    };
    if close != trimmed.len() - 1 || close < open {
        return Err(bad("malformed declaration"));
    }
    let kw = trimmed[..open].trim();
    let name = trimmed[open + 1..close].trim();
    let name_col = first_nonspace(line) + open + 2;
    if name.is_empty() {
        return Err(err(name_col, "missing signal name".into()));
    }
    check_name(name, line_no, name_col)?;
    if kw.eq_ignore_ascii_case("INPUT") {
        Ok(Item::Input { name: name.to_string(), line: line_no, col: name_col })
    } else if kw.eq_ignore_ascii_case("OUTPUT") {
        Ok(Item::Output { name: name.to_string(), line: line_no, col: name_col })
    } else {
        Err(bad(&format!("unknown declaration `{kw}`")))
    }
}

fn first_nonspace(s: &str) -> usize {
    s.find(|c: char| !c.is_whitespace()).unwrap_or(0) + 1
}

fn check_name(name: &str, line: usize, col: usize) -> Result<()> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '$' | '[' | ']'));
    if ok {
        Ok(())
    } else {
        Err(Error::Parse { line, col, msg: format!("invalid signal name `{name}`") })
    }
}

fn resolve(items: Vec<Item>) -> Result<Netlist> {
    let mut b = NetlistBuilder::new();
    let mut ids: HashMap<String, GateId> = HashMap::new();
    let mut next = 0u32;

    // Ids are handed out inputs-first, then definitions in file order, so
    // forward references inside definitions resolve in one pass.
    for item in &items {
        if let Item::Input { name, line, col } = item {
            if ids.contains_key(name.as_str()) {
                return Err(Error::Parse {
                    line: *line,
                    col: *col,
                    msg: format!("duplicate definition of `{name}`"),
                });
            }
            ids.insert(name.clone(), GateId(next));
            next += 1;
        }
    }
    for item in &items {
        if let Item::Def { name, line, col, .. } = item {
            if ids.contains_key(name.as_str()) {
                return Err(Error::Parse {
                    line: *line,
                    col: *col,
                    msg: format!("duplicate definition of `{name}`"),
                });
            }
            ids.insert(name.clone(), GateId(next));
            next += 1;
        }
    }

    for item in &items {
        match item {
            Item::Input { name, .. } => {
                if is_key_name(name) {
                    b.key_input(name)?;
                } else {
                    b.input(name)?;
                }
            }
            Item::Def { name, kind, args, line, .. } => {
                let mut fanins = Vec::with_capacity(args.len());
                for (arg, col) in args {
                    let id = ids.get(arg.as_str()).copied().ok_or(Error::Parse {
                        line: *line,
                        col: *col,
                        msg: format!("undeclared signal `{arg}`"),
                    })?;
                    fanins.push(id);
                }
                b.gate_named(*kind, fanins, name)?;
            }
            Item::Output { .. } => {}
        }
    }
    for item in &items {
        if let Item::Output { name, line, col } = item {
            let id = ids.get(name.as_str()).copied().ok_or(Error::Parse {
                line: *line,
                col: *col,
                msg: format!("undeclared signal `{name}`"),
            })?;
            b.output(name, id).map_err(|e| match e {
                Error::NameCollision(_) => Error::Parse {
                    line: *line,
                    col: *col,
                    msg: format!("duplicate output `{name}`"),
                },
                other => other,
            })?;
        }
    }
    b.build()
}

/// Serializes to BENCH. Unnamed gates receive fresh `w<id>` names; when a
/// port's driver no longer carries the port's name (possible after locking
/// a net that feeds an input port directly), an alias `port = BUF(driver)`
/// keeps the interface stable, falling back to the driver's name if the
/// alias would collide.
pub fn write_bench(n: &Netlist) -> String {
    let names = writer_names_for(n);
    let mut out = String::new();
    for &pi in n.primary_inputs() {
        out.push_str(&format!("INPUT({})\n", names[pi.index()]));
    }
    for &k in n.key_inputs() {
        out.push_str(&format!("INPUT({})\n", names[k.index()]));
    }
    let mut aliases: Vec<(String, String)> = Vec::new();
    for (port, _marker, driver) in n.po_ports() {
        let driver_name = &names[driver.index()];
        if driver_name == port {
            out.push_str(&format!("OUTPUT({port})\n"));
        } else if n.find(port).is_none() {
            out.push_str(&format!("OUTPUT({port})\n"));
            aliases.push((port.to_string(), driver_name.clone()));
        } else {
            out.push_str(&format!("OUTPUT({driver_name})\n"));
        }
    }
    out.push('\n');
    for &id in n.topological_order() {
        let g = n.gate(id);
        if !g.kind.is_logic() {
            continue;
        }
        let args: Vec<&str> = g.fanins.iter().map(|f| names[f.index()].as_str()).collect();
        out.push_str(&format!("{} = {}({})\n", names[id.index()], g.kind.label(), args.join(", ")));
    }
    for (port, driver) in aliases {
        out.push_str(&format!("{port} = BUF({driver})\n"));
    }
    out
}

/// Final serialized name per gate: existing names kept, unnamed gates get
/// `w<id>` with collision avoidance. Port markers are skipped (their names
/// live in the OUTPUT lines).
pub(crate) fn writer_names_for(n: &Netlist) -> Vec<String> {
    let mut names: Vec<String> = vec![String::new(); n.len()];
    let mut taken: std::collections::HashSet<&str> = std::collections::HashSet::new();
    for (_, g) in n.gates() {
        if g.kind != GateKind::Output {
            if let Some(name) = &g.name {
                taken.insert(name);
            }
        }
    }
    let mut fresh = Vec::new();
    for (id, g) in n.gates() {
        if g.kind == GateKind::Output {
            continue;
        }
        match &g.name {
            Some(name) => names[id.index()] = name.clone(),
            None => fresh.push(id),
        }
    }
    let mut counter = 0usize;
    for id in fresh {
        let name = loop {
            let candidate = format!("w{counter}");
            counter += 1;
            if !taken.contains(candidate.as_str()) {
                break candidate;
            }
        };
        names[id.index()] = name;
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
# two-gate sample
INPUT(a)
INPUT(b)
INPUT(k0)
OUTPUT(y)

u1 = NAND(a, b)
y = XOR(u1, k0)
";

    #[test]
    fn parses_inputs_outputs_and_gates() {
        let n = parse_bench(SMALL).unwrap();
        assert_eq!(n.primary_inputs().len(), 2);
        assert_eq!(n.key_inputs().len(), 1);
        assert_eq!(n.primary_outputs().len(), 1);
        let y = n.find("y").unwrap();
        assert_eq!(n.gate(y).kind, GateKind::Xor);
        let (port, _, driver) = n.po_ports().next().unwrap();
        assert_eq!(port, "y");
        assert_eq!(driver, y);
    }

    #[test]
    fn keywords_are_case_insensitive_and_buff_is_buf() {
        let n = parse_bench("INPUT(a)\nOUTPUT(o)\no = buff(a)\n").unwrap();
        let o = n.find("o").unwrap();
        assert_eq!(n.gate(o).kind, GateKind::Buf);
    }

    #[test]
    fn syntax_error_reports_line_and_column() {
        let err = parse_bench("INPUT(a)\ny = FROB(a)\n").unwrap_err();
        match err {
            Error::Parse { line, col, msg } => {
                assert_eq!(line, 2);
                assert!(col >= 5, "col = {col}");
                assert!(msg.contains("FROB"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn undeclared_signal_is_an_error() {
        let err = parse_bench("INPUT(a)\nOUTPUT(y)\ny = AND(a, ghost)\n").unwrap_err();
        match err {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 3);
                assert!(msg.contains("ghost"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_definition_is_an_error() {
        let err = parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\ny = BUF(a)\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));
    }

    #[test]
    fn cyclic_definition_is_an_error() {
        let err = parse_bench("INPUT(a)\nOUTPUT(y)\np = AND(a, q)\nq = AND(a, p)\ny = BUF(p)\n")
            .unwrap_err();
        assert!(matches!(err, Error::Cycle(_)));
    }

    #[test]
    fn sequential_elements_are_rejected() {
        let err = parse_bench("INPUT(a)\nOUTPUT(y)\ny = DFF(a)\n").unwrap_err();
        assert!(matches!(err, Error::Unsupported { .. }));
    }

    #[test]
    fn const_gates_round_trip() {
        let n = parse_bench("OUTPUT(y)\nc = CONST1()\ny = NOT(c)\n").unwrap();
        let text = write_bench(&n);
        let m = parse_bench(&text).unwrap();
        assert_eq!(m.logic_gate_count(), 2);
    }

    #[test]
    fn write_then_parse_is_a_fixed_point() {
        let n = parse_bench(SMALL).unwrap();
        let one = write_bench(&n);
        let again = write_bench(&parse_bench(&one).unwrap());
        assert_eq!(one, again);
    }
}
