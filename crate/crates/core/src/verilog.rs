//! Structural Verilog subset.
//!
//! Reads and writes flat gate-level modules: scalar `input`/`output`/`wire`
//! declarations, primitive instances (`nand g1 (y, a, b);`), and
//! `assign lhs = rhs` where `rhs` is a plain net or `1'b0`/`1'b1`. Assigns
//! become BUF or CONST gates. Vectors, `reg`, behavioral blocks, and
//! expression assigns are rejected as unsupported. Names that are not valid
//! plain identifiers are written as escaped identifiers (`\name `).

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::netlist::{is_key_name, GateId, GateKind, Netlist, NetlistBuilder};

pub fn parse_verilog(text: &str) -> Result<Netlist> {
    let cleaned = strip_comments(text);
    let stmts = split_statements(&cleaned)?;

    let mut inputs: Vec<String> = Vec::new();
    let mut outputs: Vec<String> = Vec::new();
    let mut declared: HashMap<String, usize> = HashMap::new();
    // (output net, kind, input nets, line)
    let mut defs: Vec<(String, GateKind, Vec<String>, usize)> = Vec::new();
    let mut saw_module = false;
    let mut saw_end = false;

    for stmt in &stmts {
        let toks = tokenize(&stmt.text, stmt.line)?;
        if toks.is_empty() {
            continue;
        }
        let head = toks[0].as_str();
        let unsupported = |msg: &str| Error::Unsupported { line: stmt.line, msg: msg.to_string() };
        let parse_err =
            |msg: String| Error::Parse { line: stmt.line, col: 1, msg };
        match head {
            "module" => {
                if saw_module {
                    return Err(parse_err("nested module".into()));
                }
                saw_module = true;
            }
            "endmodule" => {
                saw_end = true;
                break;
            }
            "input" | "output" | "wire" => {
                if toks.iter().any(|t| t == "[") {
                    return Err(unsupported("vector declarations are not supported"));
                }
                for name in toks[1..].split(|t| t == ",").map(|g| g.join("")) {
                    if name.is_empty() {
                        return Err(parse_err("empty name in declaration".into()));
                    }
                    declared.insert(name.clone(), stmt.line);
                    match head {
                        "input" => inputs.push(name),
                        "output" => outputs.push(name),
                        _ => {}
                    }
                }
            }
            "assign" => {
                // assign lhs = rhs
                let eq = toks
                    .iter()
                    .position(|t| t == "=")
                    .ok_or_else(|| parse_err("assign without `=`".into()))?;
                if eq != 2 || toks.len() != 4 {
                    return Err(unsupported(
                        "only `assign net = net;` and `assign net = 1'b0/1'b1;` are supported",
                    ));
                }
                let lhs = toks[1].clone();
                let rhs = toks[3].as_str();
                match rhs {
                    "1'b0" => defs.push((lhs, GateKind::Const0, Vec::new(), stmt.line)),
                    "1'b1" => defs.push((lhs, GateKind::Const1, Vec::new(), stmt.line)),
                    _ => defs.push((lhs, GateKind::Buf, vec![rhs.to_string()], stmt.line)),
                }
            }
            "reg" | "always" | "initial" | "specify" | "parameter" | "supply0" | "supply1" => {
                return Err(unsupported(&format!("`{head}` is not supported")));
            }
            _ => {
                let kind = GateKind::from_keyword(head)
                    .ok_or_else(|| parse_err(format!("unknown statement `{head}`")))?;
                // kind [instance] ( out, in... )
                let open = toks
                    .iter()
                    .position(|t| t == "(")
                    .ok_or_else(|| parse_err("missing `(` in instance".into()))?;
                if toks.last().map(String::as_str) != Some(")") {
                    return Err(parse_err("missing `)` in instance".into()));
                }
                if open > 2 {
                    return Err(parse_err("malformed instance header".into()));
                }
                let mut nets = Vec::new();
                for group in toks[open + 1..toks.len() - 1].split(|t| t == ",") {
                    if group.len() != 1 {
                        return Err(unsupported("expressions in port connections"));
                    }
                    nets.push(group[0].clone());
                }
                if nets.is_empty() {
                    return Err(parse_err("instance with no connections".into()));
                }
                let out = nets.remove(0);
                defs.push((out, kind, nets, stmt.line));
            }
        }
    }
    if !saw_module {
        return Err(Error::Parse { line: 1, col: 1, msg: "missing `module` header".into() });
    }
    if !saw_end {
        return Err(Error::Parse {
            line: text.lines().count().max(1),
            col: 1,
            msg: "missing `endmodule`".into(),
        });
    }

    build_from_defs(inputs, outputs, declared, defs)
}

fn build_from_defs(
    inputs: Vec<String>,
    outputs: Vec<String>,
    declared: HashMap<String, usize>,
    defs: Vec<(String, GateKind, Vec<String>, usize)>,
) -> Result<Netlist> {
    let mut b = NetlistBuilder::new();
    let mut ids: HashMap<String, GateId> = HashMap::new();
    let mut next = 0u32;
    for name in &inputs {
        if ids.insert(name.clone(), GateId(next)).is_some() {
            return Err(Error::NameCollision(name.clone()));
        }
        next += 1;
    }
    for (out, _, _, line) in &defs {
        if !declared.contains_key(out.as_str()) {
            return Err(Error::Parse {
                line: *line,
                col: 1,
                msg: format!("undeclared net `{out}`"),
            });
        }
        if ids.insert(out.clone(), GateId(next)).is_some() {
            return Err(Error::Parse {
                line: *line,
                col: 1,
                msg: format!("net `{out}` has multiple drivers"),
            });
        }
        next += 1;
    }

    for name in &inputs {
        if is_key_name(name) {
            b.key_input(name)?;
        } else {
            b.input(name)?;
        }
    }
    for (out, kind, nets, line) in &defs {
        let mut fanins = Vec::with_capacity(nets.len());
        for net in nets {
            let id = ids.get(net.as_str()).copied().ok_or(Error::Parse {
                line: *line,
                col: 1,
                msg: format!("undeclared or undriven net `{net}`"),
            })?;
            fanins.push(id);
        }
        b.gate_named(*kind, fanins, out)?;
    }
    for name in &outputs {
        let id = ids
            .get(name.as_str())
            .copied()
            .ok_or_else(|| Error::Invalid(format!("output `{name}` is never driven")))?;
        b.output(name, id)?;
    }
    b.build()
}

struct Stmt {
    text: String,
    line: usize,
}

/// Replaces comments with spaces, keeping newlines so line numbers survive.
fn strip_comments(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'/' && i + 1 < bytes.len() && bytes[i + 1] == b'/' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
        } else if bytes[i] == b'/' && i + 1 < bytes.len() && bytes[i + 1] == b'*' {
            i += 2;
            while i + 1 < bytes.len() && !(bytes[i] == b'*' && bytes[i + 1] == b'/') {
                if bytes[i] == b'\n' {
                    out.push('\n');
                }
                i += 1;
            }
            i = (i + 2).min(bytes.len());
            out.push(' ');
        } else {
            out.push(bytes[i] as char);
            i += 1;
        }
    }
    out
}

fn split_statements(text: &str) -> Result<Vec<Stmt>> {
    let mut stmts = Vec::new();
    let mut buf = String::new();
    let mut start_line = 1usize;
    let mut line = 1usize;
    for c in text.chars() {
        if c == '\n' {
            line += 1;
        }
        if c == ';' {
            if !buf.trim().is_empty() {
                stmts.push(Stmt { text: std::mem::take(&mut buf), line: start_line });
            } else {
                buf.clear();
            }
            start_line = line;
            continue;
        }
        if buf.trim().is_empty() && !c.is_whitespace() {
            start_line = line;
        }
        buf.push(c);
        // `endmodule` ends the file without a semicolon.
        if buf.trim_end().ends_with("endmodule") {
            stmts.push(Stmt { text: "endmodule".to_string(), line });
            buf.clear();
        }
    }
    if !buf.trim().is_empty() {
        return Err(Error::Parse {
            line,
            col: 1,
            msg: format!("unterminated statement `{}`", buf.split_whitespace().next().unwrap_or("")),
        });
    }
    Ok(stmts)
}

/// Splits one statement into identifiers, punctuation, and literals.
/// Escaped identifiers (`\name `) lose the backslash and keep their body.
fn tokenize(stmt: &str, line: usize) -> Result<Vec<String>> {
    let mut toks = Vec::new();
    let chars: Vec<char> = stmt.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '\\' {
            let start = i + 1;
            let mut j = start;
            while j < chars.len() && !chars[j].is_whitespace() {
                j += 1;
            }
            if j == start {
                return Err(Error::Parse { line, col: i + 1, msg: "empty escaped identifier".into() });
            }
            toks.push(chars[start..j].iter().collect());
            i = j;
        } else if c.is_ascii_alphanumeric() || c == '_' || c == '$' {
            let start = i;
            let mut j = i;
            while j < chars.len()
                && (chars[j].is_ascii_alphanumeric() || matches!(chars[j], '_' | '$' | '\''))
            {
                j += 1;
            }
            toks.push(chars[start..j].iter().collect());
            i = j;
        } else if matches!(c, '(' | ')' | ',' | '=' | '[' | ']' | ':' | '.' | '#') {
            toks.push(c.to_string());
            i += 1;
        } else {
            return Err(Error::Parse { line, col: i + 1, msg: format!("unexpected `{c}`") });
        }
    }
    Ok(toks)
}

pub fn write_verilog(n: &Netlist, module: &str) -> String {
    let names = super::bench::writer_names_for(n);
    let mut ports: Vec<String> = Vec::new();
    for &pi in n.primary_inputs() {
        ports.push(emit_ident(&names[pi.index()]));
    }
    for &k in n.key_inputs() {
        ports.push(emit_ident(&names[k.index()]));
    }
    for (port, _, _) in n.po_ports() {
        ports.push(emit_ident(port));
    }
    let mut out = format!("module {module} ({});\n", ports.join(", "));
    for &pi in n.primary_inputs() {
        out.push_str(&format!("  input {};\n", emit_ident(&names[pi.index()])));
    }
    for &k in n.key_inputs() {
        out.push_str(&format!("  input {};\n", emit_ident(&names[k.index()])));
    }
    let mut port_names: std::collections::HashSet<&str> = std::collections::HashSet::new();
    for (port, _, _) in n.po_ports() {
        out.push_str(&format!("  output {};\n", emit_ident(port)));
        port_names.insert(port);
    }
    for (id, g) in n.gates() {
        if !g.kind.is_logic() {
            continue;
        }
        let name = &names[id.index()];
        if !port_names.contains(name.as_str()) {
            out.push_str(&format!("  wire {};\n", emit_ident(name)));
        }
    }
    out.push('\n');
    for &id in n.topological_order() {
        let g = n.gate(id);
        if !g.kind.is_logic() {
            continue;
        }
        let name = emit_ident(&names[id.index()]);
        match g.kind {
            GateKind::Const0 => out.push_str(&format!("  assign {name} = 1'b0;\n")),
            GateKind::Const1 => out.push_str(&format!("  assign {name} = 1'b1;\n")),
            _ => {
                let mut nets = vec![name];
                for f in &g.fanins {
                    nets.push(emit_ident(&names[f.index()]));
                }
                out.push_str(&format!(
                    "  {} g{} ({});\n",
                    g.kind.label().to_ascii_lowercase(),
                    id.index(),
                    nets.join(", ")
                ));
            }
        }
    }
    for (port, _, driver) in n.po_ports() {
        let driver_name = &names[driver.index()];
        if driver_name != port {
            out.push_str(&format!("  assign {} = {};\n", emit_ident(port), emit_ident(driver_name)));
        }
    }
    out.push_str("endmodule\n");
    out
}

fn emit_ident(name: &str) -> String {
    let plain = name
        .chars()
        .enumerate()
        .all(|(i, c)| {
            if i == 0 {
                c.is_ascii_alphabetic() || c == '_'
            } else {
                c.is_ascii_alphanumeric() || c == '_' || c == '$'
            }
        });
    if plain && !name.is_empty() {
        name.to_string()
    } else {
        format!("\\{name} ")
    }
}
