//! Versioned text formats: circuits (with groups, witnesses and provenance),
//! threshold DAGs, XOR-SAT instances, state dumps and matrix dumps.
//!
//! Circuit files are canonical: wires in label order, gates within a layer
//! in canonical gate order, floats in shortest round-trip form. Parsing a
//! canonical file and re-serialising reproduces it byte for byte.
//!
//! Label text: atoms as bare names, pairs as `{i,j}`, subsets as `{i,j,k}`,
//! tuples as `(a,b)`, tagged as `tag:inner`. A two-element brace set parses
//! as a Pair; circuits that use two-element Subset labels re-parse with Pair
//! labels, which is transparent to everything downstream because gates
//! reference wires through the wire table.

use crate::circuit::{Circuit, Gate, Role, SingleGate};
use crate::classical::{DagKind, ThresholdDag};
use crate::error::{Error, Result};
use crate::labels::{GroupSpec, Label, LabelPermutation};
use crate::scalar::Cx;
use crate::sim::{DenseStateOf, SparseStateOf};
use crate::symmetry::SymmetryWitness;
use crate::xorsat::XorSatInstance;
use std::collections::BTreeSet;
use std::fmt::Write as _;

// ---------------------------------------------------------------------------
// labels
// ---------------------------------------------------------------------------

/// Split on top-level occurrences of `sep` (depth counted over {} and ()).
fn split_top(s: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0usize;
    for (i, ch) in s.char_indices() {
        match ch {
            '{' | '(' => depth += 1,
            '}' | ')' => depth -= 1,
            c if c == sep && depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

pub fn parse_label(s: &str) -> Result<Label> {
    let s = s.trim();
    let err = |msg: &str| Error::Parse {
        line: 0,
        msg: format!("{msg}: {s}"),
    };
    if s.is_empty() {
        return Err(err("empty label"));
    }
    // tagged: un-bracketed top-level ':'
    let mut depth = 0i32;
    for (i, ch) in s.char_indices() {
        match ch {
            '{' | '(' => depth += 1,
            '}' | ')' => depth -= 1,
            ':' if depth == 0 => {
                let tag = &s[..i];
                if tag.is_empty() || !tag.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(err("bad tag"));
                }
                return Ok(Label::tagged(tag, parse_label(&s[i + 1..])?));
            }
            _ => {}
        }
    }
    if let Some(inner) = s.strip_prefix('{').and_then(|x| x.strip_suffix('}')) {
        if inner.trim().is_empty() {
            return Ok(Label::subset([]));
        }
        let items: Vec<i64> = split_top(inner, ',')
            .into_iter()
            .map(|p| p.trim().parse::<i64>().map_err(|_| err("set items are integers")))
            .collect::<std::result::Result<_, _>>()?;
        if items.len() == 2 && items[0] != items[1] {
            return Ok(Label::pair(items[0], items[1]));
        }
        return Ok(Label::subset(items));
    }
    if let Some(inner) = s.strip_prefix('(').and_then(|x| x.strip_suffix(')')) {
        let items: Vec<Label> = split_top(inner, ',')
            .into_iter()
            .map(parse_label)
            .collect::<Result<_>>()?;
        return Ok(Label::tuple(items));
    }
    if let Ok(i) = s.parse::<i64>() {
        return Ok(Label::Index(i));
    }
    if s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && s.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
    {
        return Ok(Label::atom(s));
    }
    Err(err("unrecognised label"))
}

fn fmt_float(x: f64) -> String {
    // shortest representation that round-trips
    format!("{x}")
}

// ---------------------------------------------------------------------------
// permutations and group specs
// ---------------------------------------------------------------------------

pub fn format_permutation(p: &LabelPermutation) -> String {
    p.iter()
        .map(|(a, b)| format!("{a}->{b}"))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn parse_permutation(s: &str) -> Result<LabelPermutation> {
    let mut pairs = Vec::new();
    for part in split_top(s.trim(), ',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let mut depth = 0i32;
        let mut arrow = None;
        let bytes = part.as_bytes();
        for i in 0..bytes.len().saturating_sub(1) {
            match bytes[i] {
                b'{' | b'(' => depth += 1,
                b'}' | b')' => depth -= 1,
                b'-' if depth == 0 && bytes[i + 1] == b'>' => {
                    arrow = Some(i);
                    break;
                }
                _ => {}
            }
        }
        let arrow = arrow.ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("missing -> in permutation entry {part}"),
        })?;
        pairs.push((parse_label(&part[..arrow])?, parse_label(&part[arrow + 2..])?));
    }
    LabelPermutation::from_pairs(pairs)
}

pub fn format_group(g: &GroupSpec) -> String {
    match g {
        GroupSpec::FullSymmetric(set) => {
            let items: Vec<String> = set.iter().map(|l| l.to_string()).collect();
            format!("sym({})", items.join(","))
        }
        GroupSpec::Product(parts) => {
            let items: Vec<String> = parts.iter().map(format_group).collect();
            format!("prod({})", items.join("; "))
        }
        GroupSpec::InducedPairs(base) => format!("pairs({})", format_group(base)),
        GroupSpec::InducedSubsets(base, d) => format!("subsets({d}; {})", format_group(base)),
        GroupSpec::Explicit(gens) => {
            let items: Vec<String> = gens.iter().map(format_permutation).collect();
            format!("gen({})", items.join("; "))
        }
    }
}

pub fn parse_group(s: &str) -> Result<GroupSpec> {
    let s = s.trim();
    let body = |prefix: &str| -> Option<&str> {
        s.strip_prefix(prefix)
            .and_then(|x| x.strip_prefix('('))
            .and_then(|x| x.strip_suffix(')'))
    };
    if let Some(inner) = body("sym") {
        let labels: BTreeSet<Label> = if inner.trim().is_empty() {
            BTreeSet::new()
        } else {
            split_top(inner, ',')
                .into_iter()
                .map(parse_label)
                .collect::<Result<_>>()?
        };
        return Ok(GroupSpec::FullSymmetric(labels));
    }
    if let Some(inner) = body("prod") {
        let parts: Vec<GroupSpec> = split_top(inner, ';')
            .into_iter()
            .map(parse_group)
            .collect::<Result<_>>()?;
        return Ok(GroupSpec::Product(parts));
    }
    if let Some(inner) = body("pairs") {
        return Ok(GroupSpec::InducedPairs(Box::new(parse_group(inner)?)));
    }
    if let Some(inner) = body("subsets") {
        let parts = split_top(inner, ';');
        if parts.len() != 2 {
            return Err(Error::Parse {
                line: 0,
                msg: "subsets takes (d; base)".into(),
            });
        }
        let d: usize = parts[0].trim().parse().map_err(|_| Error::Parse {
            line: 0,
            msg: "bad subset bound".into(),
        })?;
        return Ok(GroupSpec::InducedSubsets(Box::new(parse_group(parts[1])?), d));
    }
    if let Some(inner) = body("gen") {
        let gens: Vec<LabelPermutation> = split_top(inner, ';')
            .into_iter()
            .filter(|p| !p.trim().is_empty())
            .map(parse_permutation)
            .collect::<Result<_>>()?;
        return Ok(GroupSpec::Explicit(gens));
    }
    Err(Error::Parse {
        line: 0,
        msg: format!("unrecognised group spec: {s}"),
    })
}

// ---------------------------------------------------------------------------
// circuits
// ---------------------------------------------------------------------------

pub fn format_circuit(c: &Circuit) -> String {
    let order = c.canonical_wire_order();
    let rank = c.canonical_rank();
    let mut out = String::new();
    out.push_str("version: 1\n");
    for p in &c.provenance {
        let _ = writeln!(out, "provenance: {p}");
    }
    out.push_str("wires:\n");
    for id in &order {
        let w = &c.wires()[*id as usize];
        let role = match w.role {
            Role::Active => "active",
            Role::Workspace => "workspace",
        };
        let _ = writeln!(out, "  {} {role}", w.label);
    }
    if let Some(g) = &c.group {
        let _ = writeln!(out, "group: {}", format_group(g));
    }
    for w in &c.witnesses {
        let _ = writeln!(
            out,
            "witness: {} => {}",
            format_permutation(&w.generator),
            format_permutation(&w.extension)
        );
    }
    out.push_str("layers:\n");
    for layer in &c.layers {
        out.push_str("  layer:\n");
        let mut gates: Vec<&Gate> = layer.gates.iter().collect();
        gates.sort_by_key(|g| g.canon_key(&rank));
        for g in gates {
            match g {
                Gate::Single { wire, u, dag } => {
                    let name = if *dag {
                        format!("dagger({})", u.name())
                    } else {
                        u.name().to_string()
                    };
                    let params: Vec<String> = u.params().iter().map(|p| fmt_float(*p)).collect();
                    if params.is_empty() {
                        let _ = writeln!(out, "    u1 {} {name}", c.label(*wire));
                    } else {
                        let _ = writeln!(out, "    u1 {} {name} {}", c.label(*wire), params.join(" "));
                    }
                }
                Gate::Thr { support, head, t } | Gate::Eq { support, head, t } => {
                    let kind = if matches!(g, Gate::Thr { .. }) { "thr" } else { "eq" };
                    let mut sup: Vec<&Label> = support.iter().map(|w| c.label(*w)).collect();
                    sup.sort();
                    let sup: Vec<String> = sup.into_iter().map(|l| l.to_string()).collect();
                    let _ = writeln!(
                        out,
                        "    {kind} {t} head={} support={}",
                        c.label(*head),
                        sup.join(",")
                    );
                }
            }
        }
    }
    out
}

pub fn parse_circuit(text: &str) -> Result<Circuit> {
    let mut c = Circuit::new();
    let mut witnesses_raw: Vec<(String, String)> = Vec::new();
    let mut group_raw: Option<String> = None;
    let mut in_wires = false;
    let mut in_layers = false;
    let mut current_layer: Option<Vec<Gate>> = None;
    let perr = |line: usize, msg: String| Error::Parse { line, msg };

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.trim_end();
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("version:") {
            if rest.trim() != "1" {
                return Err(perr(line_no, format!("unsupported version {rest}")));
            }
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("provenance:") {
            c.provenance.push(rest.trim().to_string());
            continue;
        }
        if trimmed == "wires:" {
            in_wires = true;
            in_layers = false;
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("group:") {
            group_raw = Some(rest.trim().to_string());
            in_wires = false;
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("witness:") {
            let parts: Vec<&str> = rest.splitn(2, "=>").collect();
            if parts.len() != 2 {
                return Err(perr(line_no, "witness needs generator => extension".into()));
            }
            witnesses_raw.push((parts[0].trim().to_string(), parts[1].trim().to_string()));
            in_wires = false;
            continue;
        }
        if trimmed == "layers:" {
            in_wires = false;
            in_layers = true;
            continue;
        }
        if in_layers && trimmed == "layer:" {
            if let Some(gates) = current_layer.take() {
                c.append_layer(gates).map_err(|e| perr(line_no, e.to_string()))?;
            }
            current_layer = Some(Vec::new());
            continue;
        }
        if in_wires {
            let mut parts = trimmed.rsplitn(2, ' ');
            let role = parts.next().ok_or_else(|| perr(line_no, "wire needs a role".into()))?;
            let label = parts.next().ok_or_else(|| perr(line_no, "wire needs a label".into()))?;
            let role = match role {
                "active" => Role::Active,
                "workspace" => Role::Workspace,
                other => return Err(perr(line_no, format!("unknown role {other}"))),
            };
            c.add_wire(parse_label(label)?, role)
                .map_err(|e| perr(line_no, e.to_string()))?;
            continue;
        }
        if in_layers {
            let layer = current_layer
                .as_mut()
                .ok_or_else(|| perr(line_no, "gate before the first layer".into()))?;
            let mut tokens = trimmed.split_whitespace();
            match tokens.next() {
                Some("u1") => {
                    let wire = tokens
                        .next()
                        .ok_or_else(|| perr(line_no, "u1 needs a wire".into()))?;
                    let name = tokens
                        .next()
                        .ok_or_else(|| perr(line_no, "u1 needs a gate name".into()))?;
                    let params: Vec<f64> = tokens
                        .map(|t| {
                            t.parse::<f64>()
                                .map_err(|_| perr(line_no, format!("bad parameter {t}")))
                        })
                        .collect::<std::result::Result<_, _>>()?;
                    let (base, dag) = match name.strip_prefix("dagger(").and_then(|x| x.strip_suffix(')')) {
                        Some(inner) => (inner, true),
                        None => (name, false),
                    };
                    let u = SingleGate::from_name(base, &params)
                        .map_err(|e| perr(line_no, e.to_string()))?;
                    let gate = if dag {
                        c.single_dag(&parse_label(wire)?, u)
                    } else {
                        c.single(&parse_label(wire)?, u)
                    }
                    .map_err(|e| perr(line_no, e.to_string()))?;
                    layer.push(gate);
                }
                Some(kind @ ("thr" | "eq")) => {
                    let t: u32 = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| perr(line_no, "threshold gate needs t".into()))?;
                    let head = tokens
                        .next()
                        .and_then(|t| t.strip_prefix("head="))
                        .ok_or_else(|| perr(line_no, "threshold gate needs head=".into()))?;
                    let support = tokens
                        .next()
                        .and_then(|t| t.strip_prefix("support="))
                        .ok_or_else(|| perr(line_no, "threshold gate needs support=".into()))?;
                    let support: Vec<Label> = split_top(support, ',')
                        .into_iter()
                        .map(parse_label)
                        .collect::<Result<_>>()?;
                    let head = parse_label(head)?;
                    let gate = if kind == "thr" {
                        c.thr(t, &head, support.iter())
                    } else {
                        c.eq(t, &head, support.iter())
                    }
                    .map_err(|e| perr(line_no, e.to_string()))?;
                    layer.push(gate);
                }
                other => return Err(perr(line_no, format!("unknown gate record {other:?}"))),
            }
            continue;
        }
        return Err(perr(line_no, format!("unexpected line: {trimmed}")));
    }
    if let Some(gates) = current_layer.take() {
        c.append_layer(gates).map_err(|e| perr(0, e.to_string()))?;
    }
    if let Some(g) = group_raw {
        c.group = Some(parse_group(&g)?);
    }
    for (gen, ext) in witnesses_raw {
        c.witnesses.push(SymmetryWitness::new(
            parse_permutation(&gen)?,
            parse_permutation(&ext)?,
        ));
    }
    Ok(c)
}

// ---------------------------------------------------------------------------
// DAGs
// ---------------------------------------------------------------------------

pub fn format_dag(dag: &ThresholdDag) -> String {
    let mut out = String::new();
    out.push_str("dag: 1\nvertices:\n");
    for (id, v) in dag.verts.iter().enumerate() {
        let kind = match &v.kind {
            DagKind::Input => "input".to_string(),
            DagKind::Thr(t) => format!("thr {t}"),
            DagKind::Eq(t) => format!("eq {t}"),
            DagKind::Not => "not".to_string(),
        };
        let _ = writeln!(out, "  {id} {kind} {}", v.name);
    }
    out.push_str("edges:\n");
    for (id, v) in dag.verts.iter().enumerate() {
        for p in &v.preds {
            let _ = writeln!(out, "  {p} {id}");
        }
    }
    let outs: Vec<String> = dag.outputs.iter().map(|o| o.to_string()).collect();
    let _ = writeln!(out, "outputs: {}", outs.join(" "));
    out
}

pub fn parse_dag(text: &str) -> Result<ThresholdDag> {
    let mut dag = ThresholdDag::new();
    let mut pending: Vec<(usize, DagKind, Label)> = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut outputs = Vec::new();
    let mut section = "";
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("dag:") {
            continue;
        }
        if t == "vertices:" {
            section = "v";
            continue;
        }
        if t == "edges:" {
            section = "e";
            continue;
        }
        if let Some(rest) = t.strip_prefix("outputs:") {
            outputs = rest
                .split_whitespace()
                .map(|x| {
                    x.parse::<usize>().map_err(|_| Error::Parse {
                        line: line_no,
                        msg: format!("bad output id {x}"),
                    })
                })
                .collect::<std::result::Result<_, _>>()?;
            continue;
        }
        match section {
            "v" => {
                let mut tok = t.split_whitespace();
                let id: usize = tok
                    .next()
                    .and_then(|x| x.parse().ok())
                    .ok_or_else(|| Error::Parse {
                        line: line_no,
                        msg: "vertex needs an id".into(),
                    })?;
                let kind = match tok.next() {
                    Some("input") => DagKind::Input,
                    Some("not") => DagKind::Not,
                    Some("thr") => DagKind::Thr(tok.next().and_then(|x| x.parse().ok()).ok_or(
                        Error::Parse {
                            line: line_no,
                            msg: "thr needs t".into(),
                        },
                    )?),
                    Some("eq") => DagKind::Eq(tok.next().and_then(|x| x.parse().ok()).ok_or(
                        Error::Parse {
                            line: line_no,
                            msg: "eq needs t".into(),
                        },
                    )?),
                    other => {
                        return Err(Error::Parse {
                            line: line_no,
                            msg: format!("unknown vertex kind {other:?}"),
                        })
                    }
                };
                let name = parse_label(&tok.collect::<Vec<_>>().join(" "))?;
                pending.push((id, kind, name));
            }
            "e" => {
                let mut tok = t.split_whitespace();
                let src: usize = tok.next().and_then(|x| x.parse().ok()).ok_or(Error::Parse {
                    line: line_no,
                    msg: "edge needs src".into(),
                })?;
                let dst: usize = tok.next().and_then(|x| x.parse().ok()).ok_or(Error::Parse {
                    line: line_no,
                    msg: "edge needs dst".into(),
                })?;
                edges.push((src, dst));
            }
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("unexpected line {t}"),
                })
            }
        }
    }
    pending.sort_by_key(|(id, _, _)| *id);
    for (pos, (id, kind, name)) in pending.into_iter().enumerate() {
        if pos != id {
            return Err(Error::Parse {
                line: 0,
                msg: "vertex ids must be dense and in order".into(),
            });
        }
        let preds: Vec<usize> = edges.iter().filter(|(_, d)| *d == id).map(|(s, _)| *s).collect();
        dag.add_vertex(name, kind, preds)?;
    }
    dag.outputs = outputs;
    Ok(dag)
}

// ---------------------------------------------------------------------------
// states, matrices, instances
// ---------------------------------------------------------------------------

/// Sparse dump: one line per basis state, `bitstring re im`, bits in
/// canonical wire order.
pub fn format_sparse_state(st: &SparseStateOf<f64>) -> String {
    let n = st.wire_order.len();
    let mut lines: Vec<(String, Cx<f64>)> = st
        .branches
        .iter()
        .map(|(k, a)| {
            let bits: String = (0..n)
                .map(|rank| {
                    let bit = (n - 1 - rank) as u32;
                    if k[(bit / 64) as usize] >> (bit % 64) & 1 == 1 {
                        '1'
                    } else {
                        '0'
                    }
                })
                .collect();
            (bits, *a)
        })
        .collect();
    lines.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out = String::new();
    for (bits, a) in lines {
        let _ = writeln!(out, "{bits} {} {}", fmt_float(a.re), fmt_float(a.im));
    }
    out
}

/// Dense dump: text header with the wire count, then the amplitudes as
/// little-endian f64 re/im pairs.
pub fn dense_state_bytes(st: &DenseStateOf<f64>) -> Vec<u8> {
    let mut out = format!("dense-state 1 {}\n", st.wire_order.len()).into_bytes();
    for a in &st.amps {
        out.extend_from_slice(&a.re.to_le_bytes());
        out.extend_from_slice(&a.im.to_le_bytes());
    }
    out
}

/// Load a sparse dump as an amplitude list keyed by bitstring.
pub fn parse_sparse_state(text: &str) -> Result<Vec<(Vec<bool>, Cx<f64>)>> {
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        let mut tok = t.split_whitespace();
        let bits = tok.next().ok_or(Error::Parse {
            line: ln + 1,
            msg: "state line needs bits".into(),
        })?;
        let re: f64 = tok
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or(Error::Parse {
                line: ln + 1,
                msg: "state line needs re".into(),
            })?;
        let im: f64 = tok
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or(Error::Parse {
                line: ln + 1,
                msg: "state line needs im".into(),
            })?;
        out.push((bits.chars().map(|c| c == '1').collect(), Cx::new(re, im)));
    }
    Ok(out)
}

/// Row-major complex matrix dump.
pub fn format_matrix(m: &crate::linalg::CMat<f64>) -> String {
    let mut out = format!("matrix {} {}\n", m.rows, m.cols);
    for i in 0..m.rows {
        let row: Vec<String> = (0..m.cols)
            .flat_map(|j| [fmt_float(m[(i, j)].re), fmt_float(m[(i, j)].im)])
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<crate::linalg::CMat<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing matrix header".into(),
    })?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some("matrix") {
        return Err(Error::Parse {
            line: 1,
            msg: "expected 'matrix rows cols'".into(),
        });
    }
    let rows: usize = tok.next().and_then(|x| x.parse().ok()).ok_or(Error::Parse {
        line: 1,
        msg: "bad rows".into(),
    })?;
    let cols: usize = tok.next().and_then(|x| x.parse().ok()).ok_or(Error::Parse {
        line: 1,
        msg: "bad cols".into(),
    })?;
    let mut m = crate::linalg::CMat::<f64>::zeros(rows, cols);
    for (i, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|x| {
                x.parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 2,
                    msg: format!("bad number {x}"),
                })
            })
            .collect::<std::result::Result<_, _>>()?;
        if vals.len() != 2 * cols {
            return Err(Error::Parse {
                line: i + 2,
                msg: "row length mismatch".into(),
            });
        }
        for j in 0..cols {
            m[(i, j)] = Cx::new(vals[2 * j], vals[2 * j + 1]);
        }
    }
    Ok(m)
}

/// Instance file: `m n`, then m rows of n bits, then b as one row.
pub fn format_instance(inst: &XorSatInstance) -> String {
    let mut out = format!("{} {}\n", inst.m, inst.n);
    for row in &inst.a {
        let bits: String = row.iter().map(|b| if *b { '1' } else { '0' }).collect();
        let _ = writeln!(out, "{bits}");
    }
    let bits: String = inst.b.iter().map(|b| if *b { '1' } else { '0' }).collect();
    let _ = writeln!(out, "{bits}");
    out
}

pub fn parse_instance(text: &str) -> Result<XorSatInstance> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing instance header".into(),
    })?;
    let mut tok = header.split_whitespace();
    let m: usize = tok.next().and_then(|x| x.parse().ok()).ok_or(Error::Parse {
        line: 1,
        msg: "bad m".into(),
    })?;
    let n: usize = tok.next().and_then(|x| x.parse().ok()).ok_or(Error::Parse {
        line: 1,
        msg: "bad n".into(),
    })?;
    let parse_bits = |line: &str, len: usize, ln: usize| -> Result<Vec<bool>> {
        let bits: Vec<bool> = line.trim().chars().map(|c| c == '1').collect();
        if bits.len() != len || !line.trim().chars().all(|c| c == '0' || c == '1') {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected {len} bits"),
            });
        }
        Ok(bits)
    };
    let mut a = Vec::new();
    for i in 0..m {
        let line = lines.next().ok_or(Error::Parse {
            line: i + 2,
            msg: "missing matrix row".into(),
        })?;
        a.push(parse_bits(line, n, i + 2)?);
    }
    let bline = lines.next().ok_or(Error::Parse {
        line: m + 2,
        msg: "missing b row".into(),
    })?;
    let b = parse_bits(bline, m, m + 2)?;
    XorSatInstance::new(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stateprep::dicke;
    use crate::subroutines::build_swap_test;
    use crate::symmetry::verify_symmetric;

    #[test]
    fn label_round_trips() {
        let labels = [
            Label::atom("out"),
            Label::idx(-3),
            Label::pair(1, 7),
            Label::subset([]),
            Label::subset([4]),
            Label::subset([1, 2, 3]),
            Label::tuple([Label::idx(1), Label::atom("b")]),
            Label::tagged("use", Label::atom("all")),
            Label::tagged("row", Label::tuple([Label::idx(2), Label::idx(5)])),
            Label::tagged("cw", Label::tagged("dk", Label::atom("flag"))),
        ];
        for l in labels {
            let text = l.to_string();
            assert_eq!(parse_label(&text).unwrap(), l, "{text}");
        }
        // two-element brace sets parse as pairs
        assert_eq!(parse_label("{3,9}").unwrap(), Label::pair(3, 9));
    }

    #[test]
    fn group_round_trips() {
        let groups = [
            GroupSpec::s_n(3),
            GroupSpec::Product(vec![GroupSpec::s_n(2), {
                GroupSpec::full_symmetric([Label::atom("u"), Label::atom("v")])
            }]),
            GroupSpec::InducedPairs(Box::new(GroupSpec::s_n(4))),
            GroupSpec::InducedSubsets(Box::new(GroupSpec::s_n(3)), 2),
            GroupSpec::Explicit(vec![LabelPermutation::swap(
                [Label::idx(1), Label::idx(2)],
                &Label::idx(1),
                &Label::idx(2),
            )]),
        ];
        for g in groups {
            let text = format_group(&g);
            assert_eq!(parse_group(&text).unwrap(), g, "{text}");
        }
    }

    #[test]
    fn circuit_file_round_trip_is_bit_exact() {
        for circuit in [build_swap_test().unwrap(), dicke(3, 1).unwrap().circuit] {
            let text = format_circuit(&circuit);
            let parsed = parse_circuit(&text).unwrap();
            let text2 = format_circuit(&parsed);
            assert_eq!(text, text2);
            // parsed circuit still verifies
            assert!(verify_symmetric(&parsed).unwrap().passed());
        }
    }

    #[test]
    fn parsed_circuit_simulates_identically() {
        use crate::sim::{run_dense, Input};
        let c = dicke(3, 1).unwrap().circuit;
        let parsed = parse_circuit(&format_circuit(&c)).unwrap();
        let a = run_dense::<f64>(&c, &Input::Zeros).unwrap();
        let b = run_dense::<f64>(&parsed, &Input::Zeros).unwrap();
        assert_eq!(a.wire_order, b.wire_order);
        let diff: f64 = a
            .amps
            .iter()
            .zip(&b.amps)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert_eq!(diff, 0.0, "simulations must agree bit for bit");
    }

    #[test]
    fn dag_round_trip() {
        let dag = crate::classical::triangle_dag(4).unwrap();
        let text = format_dag(&dag);
        let parsed = parse_dag(&text).unwrap();
        assert_eq!(format_dag(&parsed), text);
        for mask in [0usize, 7, 21, 63] {
            let edges = crate::classical::edge_assignment(4, mask);
            assert_eq!(
                dag.eval_outputs(&edges).unwrap(),
                parsed.eval_outputs(&edges).unwrap()
            );
        }
    }

    #[test]
    fn instance_round_trip() {
        let inst = XorSatInstance::new(
            vec![vec![true, false, true], vec![false, true, true]],
            vec![true, false],
        )
        .unwrap();
        let text = format_instance(&inst);
        assert_eq!(parse_instance(&text).unwrap(), inst);
    }

    #[test]
    fn matrix_round_trip() {
        let mut m = crate::linalg::CMat::<f64>::zeros(2, 3);
        m[(0, 1)] = Cx::new(0.125, -3.5);
        m[(1, 2)] = Cx::new(1.0 / 3.0, 2.0f64.sqrt());
        let text = format_matrix(&m);
        assert_eq!(parse_matrix(&text).unwrap(), m);
    }

    #[test]
    fn sparse_dump_round_trip() {
        use crate::sim::{run_sparse, Input};
        let c = build_swap_test().unwrap();
        let st = run_sparse::<f64>(&c, &Input::Zeros).unwrap();
        let text = format_sparse_state(&st);
        let parsed = parse_sparse_state(&text).unwrap();
        assert_eq!(parsed.len(), st.branches.len());
    }
}
