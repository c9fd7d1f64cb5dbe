//! Classical side: Boolean threshold-circuit DAGs, layered reversible
//! circuits over {X, Thr, Eq}, the two equivalence conversions with their
//! gate bounds, the depth-2 parity gadget, and partition-symmetric Boolean
//! synthesis. Reversible circuits reuse the quantum IR restricted to the
//! classical gate kinds, so the symmetry machinery applies verbatim.

use crate::circuit::{Circuit, Gate, Role, SingleGate};
use crate::error::{Error, Result};
use crate::labels::{GroupSpec, Label, LabelPermutation};
use crate::symmetry::SymmetryWitness;
use std::collections::HashMap;

// ---------------------------------------------------------------------------
// threshold DAGs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DagKind {
    /// In-degree 0, labelled by a structure element.
    Input,
    Thr(u32),
    Eq(u32),
    Not,
}

#[derive(Debug, Clone)]
pub struct DagVertex {
    pub name: Label,
    pub kind: DagKind,
    pub preds: Vec<usize>,
}

/// A Boolean circuit as a labelled DAG.
#[derive(Debug, Clone, Default)]
pub struct ThresholdDag {
    pub verts: Vec<DagVertex>,
    pub outputs: Vec<usize>,
    index: HashMap<Label, usize>,
}

impl ThresholdDag {
    pub fn new() -> Self {
        ThresholdDag::default()
    }

    pub fn add_vertex(&mut self, name: Label, kind: DagKind, preds: Vec<usize>) -> Result<usize> {
        if self.index.contains_key(&name) {
            return Err(Error::DuplicateWire(name));
        }
        match kind {
            DagKind::Input if !preds.is_empty() => {
                return Err(Error::BadParam("input vertices have in-degree 0".into()))
            }
            DagKind::Not if preds.len() != 1 => {
                return Err(Error::BadParam("a NOT vertex has exactly one predecessor".into()))
            }
            DagKind::Thr(_) | DagKind::Eq(_) if preds.is_empty() => {
                return Err(Error::BadParam("threshold vertices need predecessors".into()))
            }
            _ => {}
        }
        for p in &preds {
            if *p >= self.verts.len() {
                return Err(Error::BadParam(format!("unknown predecessor {p}")));
            }
        }
        let id = self.verts.len();
        self.index.insert(name.clone(), id);
        self.verts.push(DagVertex { name, kind, preds });
        Ok(id)
    }

    pub fn vertex_id(&self, name: &Label) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownWire(name.clone()))
    }

    pub fn input_names(&self) -> Vec<Label> {
        self.verts
            .iter()
            .filter(|v| v.kind == DagKind::Input)
            .map(|v| v.name.clone())
            .collect()
    }

    /// Non-input vertex count.
    pub fn gate_count(&self) -> usize {
        self.verts.iter().filter(|v| v.kind != DagKind::Input).count()
    }

    /// depth(v): longest path from an input (inputs have depth 0).
    /// Vertices are appended after their predecessors, so the DAG is acyclic
    /// by construction.
    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0usize; self.verts.len()];
        for i in 0..self.verts.len() {
            depth[i] = self.verts[i]
                .preds
                .iter()
                .map(|p| depth[*p] + 1)
                .max()
                .unwrap_or(0);
        }
        depth
    }

    /// Topological evaluation on an input assignment over the input names.
    pub fn eval(&self, input: &HashMap<Label, bool>) -> Result<Vec<bool>> {
        let mut values = vec![false; self.verts.len()];
        for i in 0..self.verts.len() {
            let v = &self.verts[i];
            values[i] = match &v.kind {
                DagKind::Input => *input
                    .get(&v.name)
                    .ok_or_else(|| Error::BadParam(format!("missing input {}", v.name)))?,
                DagKind::Not => !values[v.preds[0]],
                DagKind::Thr(t) => (v.preds.iter().filter(|p| values[**p]).count() as u32) >= *t,
                DagKind::Eq(t) => (v.preds.iter().filter(|p| values[**p]).count() as u32) == *t,
            };
        }
        Ok(values)
    }

    pub fn eval_outputs(&self, input: &HashMap<Label, bool>) -> Result<Vec<bool>> {
        let values = self.eval(input)?;
        Ok(self.outputs.iter().map(|o| values[*o]).collect())
    }
}

// ---------------------------------------------------------------------------
// classical evaluation of reversible circuits
// ---------------------------------------------------------------------------

/// Evaluate a classical reversible circuit (gates restricted to X, Thr, Eq)
/// on a basis input; workspace wires start at 0. Within a layer all
/// threshold supports read the pre-layer values and the flips accumulate by
/// XOR, matching the simultaneous-application formula for commuting layers.
pub fn eval_reversible(c: &Circuit, input: &HashMap<Label, bool>) -> Result<Vec<bool>> {
    let mut values = vec![false; c.n_wires()];
    for w in c.wires() {
        if w.role == Role::Active {
            values[c.wire_id(&w.label)? as usize] = *input
                .get(&w.label)
                .ok_or_else(|| Error::BadParam(format!("missing input {}", w.label)))?;
        }
    }
    for layer in &c.layers {
        let mut flips = vec![false; c.n_wires()];
        for g in &layer.gates {
            match g {
                Gate::Single { wire, u, .. } => match u {
                    SingleGate::X => flips[*wire as usize] ^= true,
                    other => {
                        return Err(Error::BadParam(format!(
                            "non-classical gate {} in reversible circuit",
                            other.name()
                        )))
                    }
                },
                Gate::Thr { support, head, t } => {
                    let count = support.iter().filter(|s| values[**s as usize]).count() as u32;
                    if count >= *t {
                        flips[*head as usize] ^= true;
                    }
                }
                Gate::Eq { support, head, t } => {
                    let count = support.iter().filter(|s| values[**s as usize]).count() as u32;
                    if count == *t {
                        flips[*head as usize] ^= true;
                    }
                }
            }
        }
        for (v, f) in values.iter_mut().zip(flips) {
            *v ^= f;
        }
    }
    Ok(values)
}

// ---------------------------------------------------------------------------
// DAG -> reversible
// ---------------------------------------------------------------------------

pub fn vertex_wire_label(name: &Label) -> Label {
    Label::tagged("v", name.clone())
}

/// Per-depth reversible implementation: an input-copy layer (one equality
/// gate per input vertex) followed by one layer per DAG depth, with one
/// workspace wire per vertex. Total gates stay within twice the vertex
/// count; final workspace values equal the DAG gate values.
pub fn dag_to_reversible(dag: &ThresholdDag) -> Result<Circuit> {
    let mut c = Circuit::new();
    for v in &dag.verts {
        if v.kind == DagKind::Input {
            c.add_wire(v.name.clone(), Role::Active)?;
        }
    }
    for v in &dag.verts {
        c.add_wire(vertex_wire_label(&v.name), Role::Workspace)?;
    }

    let depth = dag.depths();
    let max_depth = depth.iter().copied().max().unwrap_or(0);

    let mut copy = Vec::new();
    for v in &dag.verts {
        if v.kind == DagKind::Input {
            copy.push(c.eq(1, &vertex_wire_label(&v.name), [&v.name])?);
        }
    }
    c.append_layer(copy)?;

    for d in 1..=max_depth {
        let mut layer = Vec::new();
        for (i, v) in dag.verts.iter().enumerate() {
            if depth[i] != d {
                continue;
            }
            let head = vertex_wire_label(&v.name);
            let preds: Vec<Label> = v
                .preds
                .iter()
                .map(|p| vertex_wire_label(&dag.verts[*p].name))
                .collect();
            match &v.kind {
                DagKind::Input => unreachable!("inputs have depth 0"),
                DagKind::Not => {
                    layer.push(c.single(&head, SingleGate::X)?);
                    layer.push(c.eq(1, &head, preds.iter())?);
                }
                DagKind::Thr(t) => layer.push(c.thr(*t, &head, preds.iter())?),
                DagKind::Eq(t) => layer.push(c.eq(*t, &head, preds.iter())?),
            }
        }
        c.append_layer(layer)?;
    }
    Ok(c)
}

// ---------------------------------------------------------------------------
// reversible -> DAG
// ---------------------------------------------------------------------------

/// Wire-version tracking conversion with the depth-2 parity gadget. The
/// layers are pre-split into same-kind sublayers (at most a factor of
/// three); each head's accumulated flips pass through one equality gate per
/// odd count plus a threshold aggregator (a single equality gate when only
/// two sources meet). Non-input gate count stays within 4x the circuit's
/// gate count.
pub fn reversible_to_dag(rc: &Circuit) -> Result<ThresholdDag> {
    let mut dag = ThresholdDag::new();
    let mut fresh = 0usize;
    let mut gname = || {
        fresh += 1;
        Label::tagged("g", Label::idx(fresh as i64 - 1))
    };

    // current DAG vertex holding each wire's value
    let mut current: HashMap<u32, usize> = HashMap::new();
    let mut input_ids = Vec::new();
    for w in rc.wires() {
        if w.role == Role::Active {
            let id = dag.add_vertex(w.label.clone(), DagKind::Input, vec![])?;
            current.insert(rc.wire_id(&w.label)?, id);
            input_ids.push(id);
        }
    }
    // zero-init vertices for workspace wires that are actually used: an
    // equality gate that can never fire
    let used: Vec<u32> = {
        let mut u: Vec<u32> = rc
            .layers
            .iter()
            .flat_map(|l| l.gates.iter().flat_map(|g| g.wires()))
            .collect();
        u.sort_unstable();
        u.dedup();
        u
    };
    for wid in &used {
        if rc.role(*wid) == Role::Workspace && !current.contains_key(wid) {
            let id = dag.add_vertex(
                vertex_wire_label(rc.label(*wid)),
                DagKind::Eq(input_ids.len() as u32 + 1),
                input_ids.clone(),
            )?;
            current.insert(*wid, id);
        }
    }

    for layer in &rc.layers {
        let mut xs = Vec::new();
        let mut thrs = Vec::new();
        let mut eqs = Vec::new();
        for g in &layer.gates {
            match g {
                Gate::Single { u: SingleGate::X, wire, .. } => xs.push(*wire),
                Gate::Single { u, .. } => {
                    return Err(Error::BadParam(format!(
                        "non-classical gate {} in reversible circuit",
                        u.name()
                    )))
                }
                Gate::Thr { .. } => thrs.push(g),
                Gate::Eq { .. } => eqs.push(g),
            }
        }
        for wire in xs {
            let prev = current[&wire];
            let id = dag.add_vertex(gname(), DagKind::Not, vec![prev])?;
            current.insert(wire, id);
        }
        for sublayer in [thrs, eqs] {
            if sublayer.is_empty() {
                continue;
            }
            // predicate vertices read the pre-sublayer wire versions
            let snapshot = current.clone();
            let mut per_head: HashMap<u32, Vec<usize>> = HashMap::new();
            for g in &sublayer {
                let (support, head, t, exact) = match g {
                    Gate::Thr { support, head, t } => (support, *head, *t, false),
                    Gate::Eq { support, head, t } => (support, *head, *t, true),
                    _ => unreachable!(),
                };
                let preds: Vec<usize> = support.iter().map(|s| snapshot[s]).collect();
                let kind = if exact { DagKind::Eq(t) } else { DagKind::Thr(t) };
                let pid = dag.add_vertex(gname(), kind, preds)?;
                per_head.entry(head).or_default().push(pid);
            }
            let mut heads: Vec<u32> = per_head.keys().copied().collect();
            heads.sort_unstable();
            for head in heads {
                let predicates = &per_head[&head];
                let mut sources = vec![snapshot[&head]];
                sources.extend(predicates.iter().copied());
                let m = sources.len() as u32;
                let new_id = if m == 2 {
                    // parity of two bits is a single equality gate
                    dag.add_vertex(gname(), DagKind::Eq(1), sources)?
                } else {
                    let mut odd = Vec::new();
                    let mut t = 1u32;
                    while t <= m {
                        odd.push(dag.add_vertex(gname(), DagKind::Eq(t), sources.clone())?);
                        t += 2;
                    }
                    dag.add_vertex(gname(), DagKind::Thr(1), odd)?
                };
                current.insert(head, new_id);
            }
        }
    }

    let mut outputs: Vec<(Label, usize)> = current
        .iter()
        .map(|(wid, vid)| (rc.label(*wid).clone(), *vid))
        .collect();
    outputs.sort_by(|a, b| a.0.cmp(&b.0));
    dag.outputs = outputs.into_iter().map(|(_, v)| v).collect();
    Ok(dag)
}

/// Final wire values of a reversible circuit read off the converted DAG, in
/// canonical wire-label order (untouched workspace wires excluded).
pub fn dag_final_values(
    rc: &Circuit,
    dag: &ThresholdDag,
    input: &HashMap<Label, bool>,
) -> Result<Vec<(Label, bool)>> {
    let values = dag.eval(input)?;
    let mut used: Vec<u32> = rc
        .layers
        .iter()
        .flat_map(|l| l.gates.iter().flat_map(|g| g.wires()))
        .collect();
    for w in rc.wires() {
        if w.role == Role::Active {
            used.push(rc.wire_id(&w.label)?);
        }
    }
    used.sort_unstable();
    used.dedup();
    let mut labels: Vec<Label> = used.iter().map(|w| rc.label(*w).clone()).collect();
    labels.sort();
    Ok(labels
        .into_iter()
        .zip(dag.outputs.iter())
        .map(|(l, v)| (l, values[*v]))
        .collect())
}

// ---------------------------------------------------------------------------
// partition-symmetric Boolean functions
// ---------------------------------------------------------------------------

/// Weight tables f_i over the grid prod_i {0..n_i}; the represented
/// reversible map is F(a)_{i,j} = a_{i,j} xor f_i(|a_1|, ..., |a_k|).
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSymSpec {
    pub parts: Vec<usize>,
    /// tables[i][grid_index(w)] = f_i(w), lexicographic in w.
    pub tables: Vec<Vec<bool>>,
}

impl PartitionSymSpec {
    pub fn grid_size(&self) -> usize {
        self.parts.iter().map(|n| n + 1).product()
    }

    pub fn grid_index(&self, w: &[usize]) -> usize {
        let mut idx = 0;
        for (wi, ni) in w.iter().zip(&self.parts) {
            idx = idx * (ni + 1) + wi;
        }
        idx
    }

    /// All weight profiles, lexicographic.
    pub fn grid(&self) -> Vec<Vec<usize>> {
        let mut grid: Vec<Vec<usize>> = vec![vec![]];
        for n in &self.parts {
            let mut next = Vec::new();
            for g in &grid {
                for w in 0..=*n {
                    let mut e = g.clone();
                    e.push(w);
                    next.push(e);
                }
            }
            grid = next;
        }
        grid
    }

    pub fn f(&self, i: usize, w: &[usize]) -> bool {
        self.tables[i][self.grid_index(w)]
    }

    pub fn n_total(&self) -> usize {
        self.parts.iter().sum()
    }

    /// Split a flat bit vector into per-part weights.
    pub fn weights(&self, a: &[bool]) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.parts.len());
        let mut offset = 0;
        for n in &self.parts {
            out.push(a[offset..offset + n].iter().filter(|b| **b).count());
            offset += n;
        }
        out
    }

    /// Apply the represented map to a flat input.
    pub fn apply(&self, a: &[bool]) -> Vec<bool> {
        let w = self.weights(a);
        let mut out = a.to_vec();
        let mut offset = 0;
        for (i, n) in self.parts.iter().enumerate() {
            if self.f(i, &w) {
                for bit in &mut out[offset..offset + n] {
                    *bit = !*bit;
                }
            }
            offset += n;
        }
        out
    }

    /// F is a bijection iff the induced map on weight profiles is injective.
    pub fn is_bijective(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        for w in self.grid() {
            let image: Vec<usize> = w
                .iter()
                .enumerate()
                .map(|(i, wi)| if self.f(i, &w) { self.parts[i] - wi } else { *wi })
                .collect();
            if !seen.insert(image) {
                return false;
            }
        }
        true
    }
}

pub fn part_wire(i: usize, j: usize) -> Label {
    Label::tuple([Label::idx(i as i64 + 1), Label::idx(j as i64 + 1)])
}

pub fn weight_wire(i: usize, t: usize) -> Label {
    Label::tagged("w", Label::tuple([Label::idx(i as i64 + 1), Label::idx(t as i64)]))
}

fn new_weight_wire(i: usize, t: usize) -> Label {
    Label::tagged("wn", Label::tuple([Label::idx(i as i64 + 1), Label::idx(t as i64)]))
}

/// Extract the weight tables of a partition-symmetric bijection by probing
/// it on canonical representatives. The closure is evaluated on flat bit
/// vectors split consecutively by the parts; bijectivity and symmetry are
/// checked up front, and the reconstruction identity is verified on every
/// input.
pub fn derive_fi(f: &dyn Fn(&[bool]) -> Vec<bool>, parts: &[usize]) -> Result<PartitionSymSpec> {
    let n: usize = parts.iter().sum();
    if n > 16 {
        return Err(Error::BadParam("truth-table extraction is capped at 16 bits".into()));
    }
    let dim = 1usize << n;
    let to_bits = |x: usize| -> Vec<bool> { (0..n).map(|i| x >> (n - 1 - i) & 1 == 1).collect() };
    let to_index =
        |bits: &[bool]| -> usize { bits.iter().fold(0usize, |acc, b| (acc << 1) | (*b as usize)) };
    let _ = to_index;
    let offsets: Vec<usize> = parts
        .iter()
        .scan(0usize, |acc, n| {
            let o = *acc;
            *acc += n;
            Some(o)
        })
        .collect();
    for (pi, sz) in parts.iter().enumerate() {
        if *sz < 2 {
            continue;
        }
        let o = offsets[pi];
        let perms: Vec<Vec<usize>> = {
            let mut swap: Vec<usize> = (0..n).collect();
            swap.swap(o, o + 1);
            let mut cyc: Vec<usize> = (0..n).collect();
            for i in 0..*sz {
                cyc[o + i] = o + (i + 1) % sz;
            }
            vec![swap, cyc]
        };
        for perm in perms {
            for x in 0..dim {
                let bits = to_bits(x);
                let mut permuted = vec![false; n];
                for (i, b) in bits.iter().enumerate() {
                    permuted[perm[i]] = *b;
                }
                let lhs = f(&permuted);
                let img = f(&bits);
                let mut rhs = vec![false; n];
                for (i, b) in img.iter().enumerate() {
                    rhs[perm[i]] = *b;
                }
                if lhs != rhs {
                    return Err(Error::BadParam("map is not partition-symmetric".into()));
                }
            }
        }
    }

    // probe the canonical representatives v_l(b, w)
    let k = parts.len();
    let probe_spec = PartitionSymSpec {
        parts: parts.to_vec(),
        tables: vec![],
    };
    let grid = {
        let tmp = PartitionSymSpec {
            parts: parts.to_vec(),
            tables: vec![],
        };
        tmp.grid()
    };
    let _ = probe_spec;
    let mut tables = vec![vec![false; grid.len()]; k];
    for (gi, w) in grid.iter().enumerate() {
        for i in 0..k {
            let b = w[i] == parts[i]; // need the probe bit set when w_i = n_i
            let mut v = vec![false; n];
            for (l, wl) in w.iter().enumerate() {
                let o = offsets[l];
                if l == i {
                    v[o] = b;
                    let fill = wl - b as usize;
                    for x in 0..fill {
                        v[o + 1 + x] = true;
                    }
                } else {
                    for x in 0..*wl {
                        v[o + x] = true;
                    }
                }
            }
            let image = f(&v);
            let g_val = image[offsets[i]];
            tables[i][gi] = if b { !g_val } else { g_val };
        }
    }
    let spec = PartitionSymSpec {
        parts: parts.to_vec(),
        tables,
    };
    for x in 0..dim {
        let bits = to_bits(x);
        if f(&bits) != spec.apply(&bits) {
            return Err(Error::BadParam(
                "weight tables do not reconstruct the map (input not reversible in the required form)".into(),
            ));
        }
    }
    Ok(spec)
}

/// The reversible circuit computing F. Weight indicators are computed into
/// w(i,t) wires, one equality gate per accepting profile flips each target
/// bit, and the indicators are cleaned through a second indicator bank over
/// the flipped input: the old profile is recovered from the new one, which
/// is well defined exactly because F is a bijection (the induced profile
/// map is injective).
pub fn synth_partition_boolean(spec: &PartitionSymSpec) -> Result<Circuit> {
    if !spec.is_bijective() {
        return Err(Error::BadParam(
            "the weight tables do not describe a reversible map".into(),
        ));
    }
    let k = spec.parts.len();
    let mut c = Circuit::new();
    for (i, n) in spec.parts.iter().enumerate() {
        for j in 0..*n {
            c.add_wire(part_wire(i, j), Role::Active)?;
        }
    }
    for (i, n) in spec.parts.iter().enumerate() {
        for t in 0..=*n {
            c.add_wire(weight_wire(i, t), Role::Workspace)?;
        }
    }
    for (i, n) in spec.parts.iter().enumerate() {
        for t in 0..=*n {
            c.add_wire(new_weight_wire(i, t), Role::Workspace)?;
        }
    }

    let mut indicators = Vec::new();
    let mut new_indicators = Vec::new();
    for (i, n) in spec.parts.iter().enumerate() {
        let support: Vec<Label> = (0..*n).map(|j| part_wire(i, j)).collect();
        for t in 0..=*n {
            indicators.push(c.eq(t as u32, &weight_wire(i, t), support.iter())?);
            new_indicators.push(c.eq(t as u32, &new_weight_wire(i, t), support.iter())?);
        }
    }
    c.append_layer(indicators)?;

    let mut flips = Vec::new();
    for w in spec.grid() {
        let profile: Vec<Label> = w.iter().enumerate().map(|(l, wl)| weight_wire(l, *wl)).collect();
        for (i, n) in spec.parts.iter().enumerate() {
            if spec.f(i, &w) {
                for j in 0..*n {
                    flips.push(c.eq(k as u32, &part_wire(i, j), profile.iter())?);
                }
            }
        }
    }
    c.append_layer(flips)?;

    // indicators of the flipped input, then clear the old bank through the
    // inverse profile map, then clear the new bank
    c.append_layer(new_indicators.clone())?;
    let mut clear_old = Vec::new();
    for w in spec.grid() {
        let image: Vec<usize> = w
            .iter()
            .enumerate()
            .map(|(i, wi)| if spec.f(i, &w) { spec.parts[i] - wi } else { *wi })
            .collect();
        let profile: Vec<Label> = image
            .iter()
            .enumerate()
            .map(|(l, wl)| new_weight_wire(l, *wl))
            .collect();
        for (i, _) in spec.parts.iter().enumerate() {
            clear_old.push(c.eq(k as u32, &weight_wire(i, w[i]), profile.iter())?);
        }
    }
    c.append_layer(clear_old)?;
    c.append_layer(new_indicators)?;

    let mut specs = Vec::new();
    for (i, n) in spec.parts.iter().enumerate() {
        specs.push(GroupSpec::full_symmetric((0..*n).map(|j| part_wire(i, j))));
    }
    let group = if specs.len() == 1 {
        specs.pop().unwrap()
    } else {
        GroupSpec::Product(specs)
    };
    let fixed: Vec<Label> = spec
        .parts
        .iter()
        .enumerate()
        .flat_map(|(i, n)| {
            (0..=*n).flat_map(move |t| [weight_wire(i, t), new_weight_wire(i, t)])
        })
        .collect();
    c.witnesses = group
        .generators()?
        .into_iter()
        .map(|g| {
            let ext = g.extend_identity(fixed.iter().cloned())?;
            Ok(SymmetryWitness::new(g, ext))
        })
        .collect::<Result<_>>()?;
    c.group = Some(group);
    Ok(c)
}

// ---------------------------------------------------------------------------
// triangle-freeness examples
// ---------------------------------------------------------------------------

fn triples(n: usize) -> Vec<(i64, i64, i64)> {
    let mut out = Vec::new();
    for i in 1..=n as i64 {
        for j in i + 1..=n as i64 {
            for k in j + 1..=n as i64 {
                out.push((i, j, k));
            }
        }
    }
    out
}

pub fn triangle_out_label() -> Label {
    Label::atom("out")
}

/// The triangle-detection threshold DAG over the C(n,2) potential edges:
/// one all-three threshold per vertex triple and a single disjunction.
pub fn triangle_dag(n: usize) -> Result<ThresholdDag> {
    if n < 3 {
        return Err(Error::BadParam("triangle detection needs n >= 3".into()));
    }
    let mut dag = ThresholdDag::new();
    for i in 1..=n as i64 {
        for j in i + 1..=n as i64 {
            dag.add_vertex(Label::pair(i, j), DagKind::Input, vec![])?;
        }
    }
    let mut triple_ids = Vec::new();
    for (i, j, k) in triples(n) {
        let preds = vec![
            dag.vertex_id(&Label::pair(i, j))?,
            dag.vertex_id(&Label::pair(i, k))?,
            dag.vertex_id(&Label::pair(j, k))?,
        ];
        triple_ids.push(dag.add_vertex(Label::subset([i, j, k]), DagKind::Thr(3), preds)?);
    }
    let out = dag.add_vertex(triangle_out_label(), DagKind::Thr(1), triple_ids)?;
    dag.outputs = vec![out];
    Ok(dag)
}

/// The hand-layered reversible triangle circuit: one layer of all-three
/// thresholds into triple wires, one disjunction into the out wire, with
/// induced-pair witnesses recorded.
pub fn triangle_reversible(n: usize) -> Result<Circuit> {
    if n < 3 {
        return Err(Error::BadParam("triangle detection needs n >= 3".into()));
    }
    let mut c = Circuit::new();
    for i in 1..=n as i64 {
        for j in i + 1..=n as i64 {
            c.add_wire(Label::pair(i, j), Role::Active)?;
        }
    }
    for (i, j, k) in triples(n) {
        c.add_wire(Label::subset([i, j, k]), Role::Workspace)?;
    }
    let out = triangle_out_label();
    c.add_wire(out.clone(), Role::Workspace)?;

    let mut l1 = Vec::new();
    for (i, j, k) in triples(n) {
        let support = [Label::pair(i, j), Label::pair(i, k), Label::pair(j, k)];
        l1.push(c.thr(3, &Label::subset([i, j, k]), support.iter())?);
    }
    c.append_layer(l1)?;
    let triple_labels: Vec<Label> = triples(n)
        .into_iter()
        .map(|(i, j, k)| Label::subset([i, j, k]))
        .collect();
    c.append_layer([c.thr(1, &out, triple_labels.iter())?])?;

    let base = GroupSpec::s_n(n);
    c.group = Some(GroupSpec::InducedPairs(Box::new(base.clone())));
    c.witnesses = base
        .generators()?
        .iter()
        .map(|tau| {
            let sigma = crate::labels::induced_pair_action(tau)?;
            let on_triples = crate::labels::induced_subset_action(tau, 3)?;
            let triple_part = on_triples.restrict(triple_labels.iter())?;
            let ext = sigma.union(&triple_part)?.extend_identity([out.clone()])?;
            Ok(SymmetryWitness::new(sigma, ext))
        })
        .collect::<Result<_>>()?;
    Ok(c)
}

/// Brute-force triangle oracle over an edge assignment.
pub fn has_triangle(n: usize, edges: &HashMap<Label, bool>) -> bool {
    triples(n)
        .into_iter()
        .any(|(i, j, k)| {
            edges[&Label::pair(i, j)] && edges[&Label::pair(i, k)] && edges[&Label::pair(j, k)]
        })
}

/// All-pairs edge assignment from a bitmask over the canonical pair order.
pub fn edge_assignment(n: usize, mask: usize) -> HashMap<Label, bool> {
    let mut labels: Vec<Label> = Vec::new();
    for i in 1..=n as i64 {
        for j in i + 1..=n as i64 {
            labels.push(Label::pair(i, j));
        }
    }
    labels.sort();
    labels
        .into_iter()
        .enumerate()
        .map(|(pos, l)| (l, mask >> pos & 1 == 1))
        .collect()
}

/// Generators of the pair action (for callers wiring up DAG symmetries).
pub fn pair_action_generators(n: usize) -> Result<Vec<LabelPermutation>> {
    GroupSpec::InducedPairs(Box::new(GroupSpec::s_n(n))).generators()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::verify_symmetric;

    #[test]
    fn dag_eval_basics() {
        let mut dag = ThresholdDag::new();
        let a = dag.add_vertex(Label::atom("a"), DagKind::Input, vec![]).unwrap();
        let b = dag.add_vertex(Label::atom("b"), DagKind::Input, vec![]).unwrap();
        let o = dag.add_vertex(Label::atom("o"), DagKind::Thr(1), vec![a, b]).unwrap();
        dag.outputs = vec![o];
        let input: HashMap<Label, bool> =
            [(Label::atom("a"), false), (Label::atom("b"), false)].into_iter().collect();
        assert_eq!(dag.eval_outputs(&input).unwrap(), vec![false]);
        let input: HashMap<Label, bool> =
            [(Label::atom("a"), true), (Label::atom("b"), false)].into_iter().collect();
        assert_eq!(dag.eval_outputs(&input).unwrap(), vec![true]);
    }

    #[test]
    fn triangle_dag_counts_and_detects() {
        let n = 4;
        let dag = triangle_dag(n).unwrap();
        // C(4,2) + C(4,3) + 1 = 11 vertices
        assert_eq!(dag.verts.len(), 11);
        assert_eq!(dag.gate_count(), 5);

        let mut edges = edge_assignment(n, 0);
        for (i, j) in [(1, 2), (1, 3), (2, 3)] {
            edges.insert(Label::pair(i, j), true);
        }
        assert_eq!(dag.eval_outputs(&edges).unwrap(), vec![true]);

        let mut edges = edge_assignment(n, 0);
        for (i, j) in [(1, 2), (2, 3), (3, 4)] {
            edges.insert(Label::pair(i, j), true);
        }
        assert_eq!(dag.eval_outputs(&edges).unwrap(), vec![false]);

        for mask in 0..1usize << 6 {
            let edges = edge_assignment(n, mask);
            assert_eq!(
                dag.eval_outputs(&edges).unwrap()[0],
                has_triangle(n, &edges),
                "mask {mask}"
            );
        }
    }

    #[test]
    fn triangle_reversible_layers_and_metrics() {
        let c = triangle_reversible(4).unwrap();
        assert_eq!(c.layers.len(), 2);
        assert_eq!(c.layers[0].gates.len(), 4);
        assert_eq!(c.layers[1].gates.len(), 1);
        let m = c.metrics();
        assert_eq!(m.s, 5);
        assert_eq!(m.a, 5);
        assert!(verify_symmetric(&c).unwrap().passed());

        for mask in 0..1usize << 6 {
            let edges = edge_assignment(4, mask);
            let values = eval_reversible(&c, &edges).unwrap();
            let out_id = c.wire_id(&triangle_out_label()).unwrap() as usize;
            assert_eq!(values[out_id], has_triangle(4, &edges));
        }
    }

    #[test]
    fn dag_to_reversible_equivalence_and_bounds() {
        let dag = triangle_dag(4).unwrap();
        let rc = dag_to_reversible(&dag).unwrap();
        let copy_gates = rc.layers[0].gates.len();
        let total = rc.gate_count();
        assert!(total <= 2 * dag.verts.len());
        assert!(total - copy_gates <= 2 * dag.gate_count());
        for mask in 0..1usize << 6 {
            let edges = edge_assignment(4, mask);
            let dag_vals = dag.eval(&edges).unwrap();
            let rc_vals = eval_reversible(&rc, &edges).unwrap();
            for (vid, v) in dag.verts.iter().enumerate() {
                let wire = rc.wire_id(&vertex_wire_label(&v.name)).unwrap() as usize;
                assert_eq!(rc_vals[wire], dag_vals[vid], "vertex {}", v.name);
            }
        }
    }

    #[test]
    fn not_vertex_compiles_to_two_gates() {
        let mut dag = ThresholdDag::new();
        let a = dag.add_vertex(Label::atom("a"), DagKind::Input, vec![]).unwrap();
        let o = dag.add_vertex(Label::atom("o"), DagKind::Not, vec![a]).unwrap();
        dag.outputs = vec![o];
        let rc = dag_to_reversible(&dag).unwrap();
        assert_eq!(rc.gate_count(), 3);
        for bit in [false, true] {
            let input: HashMap<Label, bool> = [(Label::atom("a"), bit)].into_iter().collect();
            let vals = eval_reversible(&rc, &input).unwrap();
            let wire = rc.wire_id(&vertex_wire_label(&Label::atom("o"))).unwrap() as usize;
            assert_eq!(vals[wire], !bit);
        }
    }

    #[test]
    fn reversible_to_dag_single_gate() {
        let mut rc = Circuit::with_wires([
            (Label::atom("a"), Role::Active),
            (Label::atom("b"), Role::Active),
            (Label::atom("h"), Role::Active),
        ])
        .unwrap();
        let g = rc
            .thr(1, &Label::atom("h"), [&Label::atom("a"), &Label::atom("b")])
            .unwrap();
        rc.append_layer([g]).unwrap();
        let dag = reversible_to_dag(&rc).unwrap();
        assert!(dag.gate_count() <= 4 * rc.gate_count());
        for mask in 0..8usize {
            let input: HashMap<Label, bool> = [
                (Label::atom("a"), mask & 1 == 1),
                (Label::atom("b"), mask & 2 == 2),
                (Label::atom("h"), mask & 4 == 4),
            ]
            .into_iter()
            .collect();
            let want = eval_reversible(&rc, &input).unwrap();
            let got = dag_final_values(&rc, &dag, &input).unwrap();
            for (label, value) in got {
                let wire = rc.wire_id(&label).unwrap() as usize;
                assert_eq!(value, want[wire], "wire {label} mask {mask}");
            }
        }
    }

    #[test]
    fn reversible_to_dag_double_x_is_identity() {
        let mut rc = Circuit::with_wires([(Label::atom("a"), Role::Active)]).unwrap();
        let g = rc.single(&Label::atom("a"), SingleGate::X).unwrap();
        rc.append_layer([g.clone()]).unwrap();
        rc.append_layer([g]).unwrap();
        let dag = reversible_to_dag(&rc).unwrap();
        for bit in [false, true] {
            let input: HashMap<Label, bool> = [(Label::atom("a"), bit)].into_iter().collect();
            let got = dag_final_values(&rc, &dag, &input).unwrap();
            assert_eq!(got[0].1, bit);
        }
    }

    #[test]
    fn round_trip_preserves_triangle_truth_table() {
        let dag = triangle_dag(4).unwrap();
        let rc = dag_to_reversible(&dag).unwrap();
        let dag2 = reversible_to_dag(&rc).unwrap();
        assert!(dag2.gate_count() <= 4 * rc.gate_count());
        for mask in 0..1usize << 6 {
            let edges = edge_assignment(4, mask);
            let want = eval_reversible(&rc, &edges).unwrap();
            let got = dag_final_values(&rc, &dag2, &edges).unwrap();
            for (label, value) in got {
                let wire = rc.wire_id(&label).unwrap() as usize;
                assert_eq!(value, want[wire], "wire {label} mask {mask}");
            }
        }
    }

    #[test]
    fn derive_fi_known_maps() {
        // bitwise NOT on one 2-bit part: f_1 == 1
        let spec = derive_fi(&|a| a.iter().map(|b| !b).collect(), &[2]).unwrap();
        assert!(spec.tables[0].iter().all(|b| *b));

        // identity: all tables zero
        let spec = derive_fi(&|a| a.to_vec(), &[2]).unwrap();
        assert!(spec.tables[0].iter().all(|b| !*b));

        // flip all bits iff weight >= 1, parts = (3)
        let f = |a: &[bool]| -> Vec<bool> {
            let w = a.iter().filter(|b| **b).count();
            if w >= 1 {
                a.iter().map(|b| !b).collect()
            } else {
                a.to_vec()
            }
        };
        let spec = derive_fi(&f, &[3]).unwrap();
        for x in 0..8usize {
            let bits: Vec<bool> = (0..3).map(|i| x >> (2 - i) & 1 == 1).collect();
            assert_eq!(spec.apply(&bits), f(&bits));
        }
    }

    #[test]
    fn derive_fi_rejects_non_bijections_and_asymmetry() {
        assert!(derive_fi(&|a| vec![false; a.len()], &[2]).is_err());
        let f = |a: &[bool]| -> Vec<bool> {
            let mut v = a.to_vec();
            v[0] = !v[0];
            v
        };
        assert!(derive_fi(&f, &[2]).is_err());
    }

    #[test]
    fn synth_partition_boolean_small() {
        // f == 1 on a single 2-bit part: bitwise NOT
        let spec = PartitionSymSpec {
            parts: vec![2],
            tables: vec![vec![true; 3]],
        };
        let c = synth_partition_boolean(&spec).unwrap();
        assert!(verify_symmetric(&c).unwrap().passed());
        for mask in 0..4usize {
            let input: HashMap<Label, bool> = [
                (part_wire(0, 0), mask & 1 == 1),
                (part_wire(0, 1), mask & 2 == 2),
            ]
            .into_iter()
            .collect();
            let vals = eval_reversible(&c, &input).unwrap();
            let a = vals[c.wire_id(&part_wire(0, 0)).unwrap() as usize];
            let b = vals[c.wire_id(&part_wire(0, 1)).unwrap() as usize];
            assert_eq!(a, mask & 1 == 0);
            assert_eq!(b, mask & 2 == 0);
            for t in 0..=2 {
                assert!(!vals[c.wire_id(&weight_wire(0, t)).unwrap() as usize]);
                assert!(!vals[c.wire_id(&new_weight_wire(0, t)).unwrap() as usize]);
            }
        }

        // flipping only on 111 is not reversible (111 and 000 collide)
        let mut tables = vec![vec![false; 4]];
        tables[0][3] = true;
        let bad = PartitionSymSpec { parts: vec![3], tables };
        assert!(!bad.is_bijective());
        assert!(synth_partition_boolean(&bad).is_err());

        // parts = (3), flip on both extreme weights: a reversible variant
        let mut tables = vec![vec![false; 4]];
        tables[0][0] = true;
        tables[0][3] = true;
        let spec = PartitionSymSpec { parts: vec![3], tables };
        assert!(spec.is_bijective());
        let c = synth_partition_boolean(&spec).unwrap();
        for mask in 0..8usize {
            let bits: Vec<bool> = (0..3).map(|i| mask >> i & 1 == 1).collect();
            let input: HashMap<Label, bool> = (0..3).map(|j| (part_wire(0, j), bits[j])).collect();
            let vals = eval_reversible(&c, &input).unwrap();
            let got: Vec<bool> = (0..3)
                .map(|j| vals[c.wire_id(&part_wire(0, j)).unwrap() as usize])
                .collect();
            assert_eq!(got, spec.apply(&bits), "mask {mask}");
        }
    }
}
