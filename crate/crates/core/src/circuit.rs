//! Layered quantum-circuit representation: wires with roles, threshold-type
//! and single-qubit gates, commuting layers, the permutation action on gates
//! and the size/ancilla/head metrics.
//!
//! Gates reference wires by index into the circuit's wire table; builders
//! construct gates through the label-based helpers. Commutation of a layer is
//! decided by sufficient symbolic rules (never by full-circuit matrix
//! checks); builders must restructure into more layers when the rules reject.

use crate::error::{Error, Result};
use crate::labels::{GroupSpec, Label, LabelPermutation};
use crate::linalg::CMat;
use crate::scalar::{c, Cx, Scalar};
use crate::symmetry::SymmetryWitness;
use smallvec::SmallVec;
use std::collections::HashMap;
use std::fmt;

pub const UNITARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Active,
    Workspace,
}

/// Named single-qubit unitaries. `Custom` carries the matrix row-major as
/// re/im pairs. Parameters are compared bit-exactly: two gates are "the same
/// gate" for layer-matching purposes only when their parameters coincide
/// exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum SingleGate {
    H,
    X,
    Y,
    Z,
    P(f64),
    Rx(f64),
    Ry(f64),
    Rz(f64),
    /// Global phase e^{i a} times the identity.
    GPhase(f64),
    Custom(Box<[f64; 8]>),
}

impl SingleGate {
    pub fn name(&self) -> &'static str {
        match self {
            SingleGate::H => "h",
            SingleGate::X => "x",
            SingleGate::Y => "y",
            SingleGate::Z => "z",
            SingleGate::P(_) => "p",
            SingleGate::Rx(_) => "rx",
            SingleGate::Ry(_) => "ry",
            SingleGate::Rz(_) => "rz",
            SingleGate::GPhase(_) => "gphase",
            SingleGate::Custom(_) => "custom",
        }
    }

    pub fn params(&self) -> SmallVec<[f64; 8]> {
        match self {
            SingleGate::H | SingleGate::X | SingleGate::Y | SingleGate::Z => SmallVec::new(),
            SingleGate::P(a)
            | SingleGate::Rx(a)
            | SingleGate::Ry(a)
            | SingleGate::Rz(a)
            | SingleGate::GPhase(a) => SmallVec::from_slice(&[*a]),
            SingleGate::Custom(m) => SmallVec::from_slice(m.as_ref()),
        }
    }

    pub fn from_name(name: &str, params: &[f64]) -> Result<SingleGate> {
        let one = |g: fn(f64) -> SingleGate| -> Result<SingleGate> {
            if params.len() == 1 {
                Ok(g(params[0]))
            } else {
                Err(Error::InvalidGate(format!("{name} takes one parameter")))
            }
        };
        match name {
            "h" => Ok(SingleGate::H),
            "x" => Ok(SingleGate::X),
            "y" => Ok(SingleGate::Y),
            "z" => Ok(SingleGate::Z),
            "p" => one(SingleGate::P),
            "rx" => one(SingleGate::Rx),
            "ry" => one(SingleGate::Ry),
            "rz" => one(SingleGate::Rz),
            "gphase" => one(SingleGate::GPhase),
            "custom" => {
                if params.len() == 8 {
                    let mut m = [0.0; 8];
                    m.copy_from_slice(params);
                    Ok(SingleGate::Custom(Box::new(m)))
                } else {
                    Err(Error::InvalidGate("custom takes 8 parameters".into()))
                }
            }
            other => Err(Error::InvalidGate(format!("unknown single-qubit gate {other}"))),
        }
    }

    /// The 2x2 matrix of the (non-daggered) gate.
    pub fn matrix<R: Scalar>(&self) -> CMat<R> {
        let m: [Cx<R>; 4] = match self {
            SingleGate::H => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                [c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)]
            }
            SingleGate::X => [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            SingleGate::Y => [c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)],
            SingleGate::Z => [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
            SingleGate::P(a) => [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(a.cos(), a.sin())],
            SingleGate::Rx(t) => {
                let (ch, sh) = ((t / 2.0).cos(), (t / 2.0).sin());
                [c(ch, 0.0), c(0.0, -sh), c(0.0, -sh), c(ch, 0.0)]
            }
            SingleGate::Ry(t) => {
                let (ch, sh) = ((t / 2.0).cos(), (t / 2.0).sin());
                [c(ch, 0.0), c(-sh, 0.0), c(sh, 0.0), c(ch, 0.0)]
            }
            SingleGate::Rz(t) => {
                let h = t / 2.0;
                [c(h.cos(), -h.sin()), c(0.0, 0.0), c(0.0, 0.0), c(h.cos(), h.sin())]
            }
            SingleGate::GPhase(a) => [c(a.cos(), a.sin()), c(0.0, 0.0), c(0.0, 0.0), c(a.cos(), a.sin())],
            SingleGate::Custom(p) => [c(p[0], p[1]), c(p[2], p[3]), c(p[4], p[5]), c(p[6], p[7])],
        };
        CMat {
            rows: 2,
            cols: 2,
            data: m.to_vec(),
        }
    }

    /// Exact-bit equality key.
    fn key(&self) -> (u8, SmallVec<[u64; 8]>) {
        let rank = match self {
            SingleGate::H => 0,
            SingleGate::X => 1,
            SingleGate::Y => 2,
            SingleGate::Z => 3,
            SingleGate::P(_) => 4,
            SingleGate::Rx(_) => 5,
            SingleGate::Ry(_) => 6,
            SingleGate::Rz(_) => 7,
            SingleGate::GPhase(_) => 8,
            SingleGate::Custom(_) => 9,
        };
        (rank, self.params().iter().map(|p| p.to_bits()).collect())
    }
}

/// A gate of the layered IR.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    /// Single-qubit unitary on one wire; `dag` marks the conjugate transpose
    /// of the named matrix (recorded as `dagger(name)` in the file format).
    Single { wire: u32, u: SingleGate, dag: bool },
    /// Thr^{S,h}_{>=t}: XOR into the head the indicator that at least t
    /// support wires are 1.
    Thr { support: SmallVec<[u32; 4]>, head: u32, t: u32 },
    /// Eq^{S,h}_t: exact-count variant.
    Eq { support: SmallVec<[u32; 4]>, head: u32, t: u32 },
}

impl Gate {
    pub fn is_threshold_like(&self) -> bool {
        matches!(self, Gate::Thr { .. } | Gate::Eq { .. })
    }

    pub fn head(&self) -> Option<u32> {
        match self {
            Gate::Thr { head, .. } | Gate::Eq { head, .. } => Some(*head),
            Gate::Single { .. } => None,
        }
    }

    pub fn wires(&self) -> SmallVec<[u32; 6]> {
        match self {
            Gate::Single { wire, .. } => SmallVec::from_slice(&[*wire]),
            Gate::Thr { support, head, .. } | Gate::Eq { support, head, .. } => {
                let mut w: SmallVec<[u32; 6]> = SmallVec::from_slice(support);
                w.push(*head);
                w
            }
        }
    }

    pub fn single_matrix<R: Scalar>(&self) -> Option<CMat<R>> {
        match self {
            Gate::Single { u, dag, .. } => {
                let m = u.matrix::<R>();
                Some(if *dag { m.adjoint() } else { m })
            }
            _ => None,
        }
    }

    /// Canonical sort key relative to a wire-index reordering `order`
    /// (order[i] is the canonical rank of wire i).
    pub fn canon_key(&self, order: &[u32]) -> GateKey {
        match self {
            Gate::Single { wire, u, dag } => {
                let (rank, params) = u.key();
                GateKey {
                    kind: 0,
                    t: 0,
                    head: order[*wire as usize],
                    support: SmallVec::new(),
                    name_rank: rank,
                    dag: *dag,
                    params,
                }
            }
            Gate::Thr { support, head, t } | Gate::Eq { support, head, t } => {
                let kind = if matches!(self, Gate::Thr { .. }) { 1 } else { 2 };
                let mut sup: SmallVec<[u32; 6]> =
                    support.iter().map(|w| order[*w as usize]).collect();
                sup.sort_unstable();
                GateKey {
                    kind,
                    t: *t,
                    head: order[*head as usize],
                    support: sup,
                    name_rank: 0,
                    dag: false,
                    params: SmallVec::new(),
                }
            }
        }
    }
}

/// Total-order key for gates; also the symbolic-equality key used by the
/// witness checker (multiset membership under a wire permutation).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GateKey {
    pub kind: u8,
    pub head: u32,
    pub t: u32,
    pub support: SmallVec<[u32; 6]>,
    pub name_rank: u8,
    pub dag: bool,
    pub params: SmallVec<[u64; 8]>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Layer {
    pub gates: Vec<Gate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Metrics {
    /// Total number of gates s(C).
    pub s: usize,
    /// Number of workspace wires a(C).
    pub a: usize,
    /// Number of distinct wires serving as the head of a threshold-type gate.
    pub h: usize,
}

#[derive(Debug, Clone)]
pub struct Wire {
    pub label: Label,
    pub role: Role,
}

/// A layered circuit. Immutable once built; builders push wires and layers
/// during construction.
#[derive(Debug, Clone, Default)]
pub struct Circuit {
    wires: Vec<Wire>,
    index: HashMap<Label, u32>,
    pub layers: Vec<Layer>,
    pub group: Option<GroupSpec>,
    pub witnesses: Vec<SymmetryWitness>,
    pub provenance: Vec<String>,
}

impl Circuit {
    pub fn new() -> Self {
        Circuit::default()
    }

    pub fn with_wires<I: IntoIterator<Item = (Label, Role)>>(wires: I) -> Result<Self> {
        let mut c = Circuit::new();
        for (l, r) in wires {
            c.add_wire(l, r)?;
        }
        Ok(c)
    }

    pub fn add_wire(&mut self, label: Label, role: Role) -> Result<u32> {
        if self.index.contains_key(&label) {
            return Err(Error::DuplicateWire(label));
        }
        let id = self.wires.len() as u32;
        self.index.insert(label.clone(), id);
        self.wires.push(Wire { label, role });
        Ok(id)
    }

    /// Add the wire if absent; returns its id either way. Existing roles are
    /// kept.
    pub fn ensure_wire(&mut self, label: Label, role: Role) -> u32 {
        match self.index.get(&label) {
            Some(id) => *id,
            None => self.add_wire(label, role).expect("absent"),
        }
    }

    pub fn n_wires(&self) -> usize {
        self.wires.len()
    }

    pub fn wires(&self) -> &[Wire] {
        &self.wires
    }

    pub fn wire_id(&self, label: &Label) -> Result<u32> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownWire(label.clone()))
    }

    pub fn has_wire(&self, label: &Label) -> bool {
        self.index.contains_key(label)
    }

    pub fn label(&self, id: u32) -> &Label {
        &self.wires[id as usize].label
    }

    pub fn role(&self, id: u32) -> Role {
        self.wires[id as usize].role
    }

    pub fn labels_with_role(&self, role: Role) -> Vec<Label> {
        self.wires
            .iter()
            .filter(|w| w.role == role)
            .map(|w| w.label.clone())
            .collect()
    }

    pub fn active_labels(&self) -> Vec<Label> {
        self.labels_with_role(Role::Active)
    }

    pub fn workspace_labels(&self) -> Vec<Label> {
        self.labels_with_role(Role::Workspace)
    }

    /// Wire indices sorted by canonical label order.
    pub fn canonical_wire_order(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = (0..self.wires.len() as u32).collect();
        ids.sort_by(|a, b| self.label(*a).cmp(self.label(*b)));
        ids
    }

    /// rank[i] = canonical position of wire i.
    pub fn canonical_rank(&self) -> Vec<u32> {
        let order = self.canonical_wire_order();
        let mut rank = vec![0u32; order.len()];
        for (pos, id) in order.iter().enumerate() {
            rank[*id as usize] = pos as u32;
        }
        rank
    }

    // ---- gate constructors -------------------------------------------------

    pub fn single(&self, label: &Label, u: SingleGate) -> Result<Gate> {
        self.validate_single(&u)?;
        Ok(Gate::Single {
            wire: self.wire_id(label)?,
            u,
            dag: false,
        })
    }

    pub fn single_dag(&self, label: &Label, u: SingleGate) -> Result<Gate> {
        self.validate_single(&u)?;
        Ok(Gate::Single {
            wire: self.wire_id(label)?,
            u,
            dag: true,
        })
    }

    fn validate_single(&self, u: &SingleGate) -> Result<()> {
        if u.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGate("non-finite gate parameter".into()));
        }
        if let SingleGate::Custom(_) = u {
            if !u.matrix::<f64>().is_unitary(UNITARY_TOL) {
                return Err(Error::InvalidGate("custom matrix is not unitary".into()));
            }
        }
        Ok(())
    }

    pub fn thr<'a, I: IntoIterator<Item = &'a Label>>(&self, t: u32, head: &Label, support: I) -> Result<Gate> {
        let (support, head) = self.threshold_wires(head, support)?;
        Ok(Gate::Thr { support, head, t })
    }

    pub fn eq<'a, I: IntoIterator<Item = &'a Label>>(&self, t: u32, head: &Label, support: I) -> Result<Gate> {
        let (support, head) = self.threshold_wires(head, support)?;
        Ok(Gate::Eq { support, head, t })
    }

    /// CNOT as a threshold gate with a singleton support.
    pub fn cnot(&self, control: &Label, target: &Label) -> Result<Gate> {
        self.thr(1, target, [control])
    }

    fn threshold_wires<'a, I: IntoIterator<Item = &'a Label>>(
        &self,
        head: &Label,
        support: I,
    ) -> Result<(SmallVec<[u32; 4]>, u32)> {
        let head_id = self.wire_id(head)?;
        let mut sup: SmallVec<[u32; 4]> = SmallVec::new();
        for l in support {
            sup.push(self.wire_id(l)?);
        }
        sup.sort_unstable();
        sup.dedup();
        if sup.is_empty() {
            return Err(Error::InvalidGate("threshold gate needs a non-empty support".into()));
        }
        if sup.contains(&head_id) {
            return Err(Error::InvalidGate(format!(
                "head {} may not be part of the support",
                self.label(head_id)
            )));
        }
        Ok((sup, head_id))
    }

    fn validate_gate(&self, g: &Gate) -> Result<()> {
        for w in g.wires() {
            if w as usize >= self.wires.len() {
                return Err(Error::InvalidGate(format!("gate references unknown wire id {w}")));
            }
        }
        Ok(())
    }

    // ---- commutation and layers --------------------------------------------

    /// Sufficient symbolic commutation rules:
    /// (a) disjoint wire sets;
    /// (b) both threshold-type and neither head lies in the other's support;
    /// (c) single-qubit on w vs threshold-type: w outside the gate, or w the
    ///     head with a matrix in span{I, X}, or w in the support with a
    ///     diagonal matrix;
    /// (d) two single-qubit gates on one wire whose matrices commute.
    /// Conservative: false means "not accepted", not "provably non-commuting".
    pub fn gates_commute(&self, g1: &Gate, g2: &Gate) -> bool {
        let w1 = g1.wires();
        let w2 = g2.wires();
        if w1.iter().all(|w| !w2.contains(w)) {
            return true;
        }
        match (g1, g2) {
            (
                Gate::Thr { support: s1, head: h1, .. } | Gate::Eq { support: s1, head: h1, .. },
                Gate::Thr { support: s2, head: h2, .. } | Gate::Eq { support: s2, head: h2, .. },
            ) => !s2.contains(h1) && !s1.contains(h2),
            (Gate::Single { wire, .. }, Gate::Thr { .. } | Gate::Eq { .. }) => {
                self.single_vs_threshold(g1, *wire, g2)
            }
            (Gate::Thr { .. } | Gate::Eq { .. }, Gate::Single { wire, .. }) => {
                self.single_vs_threshold(g2, *wire, g1)
            }
            (Gate::Single { wire: a, .. }, Gate::Single { wire: b, .. }) => {
                if a != b {
                    return true;
                }
                let m1 = g1.single_matrix::<f64>().unwrap();
                let m2 = g2.single_matrix::<f64>().unwrap();
                m1.commutator(&m2).max_abs() < UNITARY_TOL
            }
        }
    }

    fn single_vs_threshold(&self, single: &Gate, w: u32, thr: &Gate) -> bool {
        let (support, head) = match thr {
            Gate::Thr { support, head, .. } | Gate::Eq { support, head, .. } => (support, *head),
            _ => unreachable!(),
        };
        if w != head && !support.contains(&w) {
            return true;
        }
        let m = single.single_matrix::<f64>().unwrap();
        if w == head {
            // commutes with the XOR action iff in span{I, X}
            (m[(0, 0)] - m[(1, 1)]).norm() < UNITARY_TOL && (m[(0, 1)] - m[(1, 0)]).norm() < UNITARY_TOL
        } else {
            m[(0, 1)].norm() + m[(1, 0)].norm() < UNITARY_TOL
        }
    }

    /// Append one layer after checking pairwise commutation; reports the
    /// first offending pair. Pairs sharing no wire always commute, so the
    /// check is indexed per wire (each wire collects its gate incidences and
    /// only head/single incidences are tested against the others), which
    /// keeps huge layers of disjoint-ish threshold gates linear-ish.
    pub fn append_layer<I: IntoIterator<Item = Gate>>(&mut self, gates: I) -> Result<()> {
        let gates: Vec<Gate> = gates.into_iter().collect();
        for g in &gates {
            self.validate_gate(g)?;
        }
        // incidence: per wire, (gate index, role) with role 0=head, 1=support, 2=single
        let mut by_wire: HashMap<u32, Vec<(usize, u8)>> = HashMap::new();
        for (gi, g) in gates.iter().enumerate() {
            match g {
                Gate::Single { wire, .. } => by_wire.entry(*wire).or_default().push((gi, 2)),
                Gate::Thr { support, head, .. } | Gate::Eq { support, head, .. } => {
                    by_wire.entry(*head).or_default().push((gi, 0));
                    for s in support {
                        by_wire.entry(*s).or_default().push((gi, 1));
                    }
                }
            }
        }
        for entries in by_wire.values() {
            if entries.iter().all(|(_, r)| *r == 1) {
                continue; // support-only sharing always commutes
            }
            for (pos, (gi, ri)) in entries.iter().enumerate() {
                for (gj, rj) in entries.iter().skip(pos + 1) {
                    let ok = match (*ri, *rj) {
                        (0, 0) | (1, 1) => true,
                        (0, 1) | (1, 0) => false,
                        _ => self.gates_commute(&gates[*gi], &gates[*gj]),
                    };
                    if !ok {
                        return Err(Error::NonCommuting(
                            self.describe_gate(&gates[*gi]),
                            self.describe_gate(&gates[*gj]),
                        ));
                    }
                }
            }
        }
        self.layers.push(Layer { gates });
        Ok(())
    }

    /// Append all layers of `other`, resolving wires by label. Missing wires
    /// are an error; declare them up front on `self`.
    pub fn append_circuit(&mut self, other: &Circuit) -> Result<()> {
        let map: Vec<u32> = other
            .wires
            .iter()
            .map(|w| self.wire_id(&w.label))
            .collect::<Result<_>>()?;
        for layer in &other.layers {
            let gates: Vec<Gate> = layer.gates.iter().map(|g| remap_gate(g, &map)).collect();
            // commutation was checked when `other` was built
            for g in &gates {
                self.validate_gate(g)?;
            }
            self.layers.push(Layer { gates });
        }
        Ok(())
    }

    pub fn describe_gate(&self, g: &Gate) -> String {
        match g {
            Gate::Single { wire, u, dag } => {
                let name = if *dag {
                    format!("dagger({})", u.name())
                } else {
                    u.name().to_string()
                };
                let params: Vec<String> = u.params().iter().map(|p| format!("{p}")).collect();
                if params.is_empty() {
                    format!("{name} on {}", self.label(*wire))
                } else {
                    format!("{name}({}) on {}", params.join(","), self.label(*wire))
                }
            }
            Gate::Thr { support, head, t } => format!(
                "thr>={t} head={} support={{{}}}",
                self.label(*head),
                support.iter().map(|w| self.label(*w).to_string()).collect::<Vec<_>>().join(",")
            ),
            Gate::Eq { support, head, t } => format!(
                "eq={t} head={} support={{{}}}",
                self.label(*head),
                support.iter().map(|w| self.label(*w).to_string()).collect::<Vec<_>>().join(",")
            ),
        }
    }

    // ---- permutation action --------------------------------------------------

    /// Resolve a label permutation into a wire-index permutation. The
    /// permutation must cover every wire and map wires to wires.
    pub fn index_perm(&self, pi: &LabelPermutation) -> Result<Vec<u32>> {
        let mut out = vec![u32::MAX; self.wires.len()];
        for (i, w) in self.wires.iter().enumerate() {
            let img = pi.apply(&w.label)?;
            out[i] = self.wire_id(&img)?;
        }
        Ok(out)
    }

    /// Apply a wire permutation to a gate: the support and head move, the
    /// kind, threshold and parameters stay.
    pub fn permute_gate_idx(&self, perm: &[u32], g: &Gate) -> Gate {
        remap_gate(g, perm)
    }

    /// Label-level permutation action on a gate of this circuit.
    pub fn permute_gate(&self, pi: &LabelPermutation, g: &Gate) -> Result<Gate> {
        self.validate_gate(g)?;
        let mapped = |w: u32| -> Result<u32> {
            let img = pi.apply(self.label(w))?;
            self.wire_id(&img)
        };
        Ok(match g {
            Gate::Single { wire, u, dag } => Gate::Single {
                wire: mapped(*wire)?,
                u: u.clone(),
                dag: *dag,
            },
            Gate::Thr { support, head, t } => {
                let mut sup: SmallVec<[u32; 4]> = support.iter().map(|w| mapped(*w)).collect::<Result<_>>()?;
                sup.sort_unstable();
                Gate::Thr { support: sup, head: mapped(*head)?, t: *t }
            }
            Gate::Eq { support, head, t } => {
                let mut sup: SmallVec<[u32; 4]> = support.iter().map(|w| mapped(*w)).collect::<Result<_>>()?;
                sup.sort_unstable();
                Gate::Eq { support: sup, head: mapped(*head)?, t: *t }
            }
        })
    }

    // ---- metrics ---------------------------------------------------------------

    pub fn metrics(&self) -> Metrics {
        let s = self.layers.iter().map(|l| l.gates.len()).sum();
        let a = self.wires.iter().filter(|w| w.role == Role::Workspace).count();
        let mut heads: Vec<u32> = self
            .layers
            .iter()
            .flat_map(|l| l.gates.iter().filter_map(Gate::head))
            .collect();
        heads.sort_unstable();
        heads.dedup();
        Metrics { s, a, h: heads.len() }
    }

    pub fn gate_count(&self) -> usize {
        self.metrics().s
    }

    /// All distinct head wires of threshold-type gates.
    pub fn head_wires(&self) -> Vec<u32> {
        let mut heads: Vec<u32> = self
            .layers
            .iter()
            .flat_map(|l| l.gates.iter().filter_map(Gate::head))
            .collect();
        heads.sort_unstable();
        heads.dedup();
        heads
    }

    /// Rebuild this circuit with every label renamed through `f` (roles,
    /// layers, group and witnesses carried over). `f` must be injective on
    /// the wire set.
    pub fn relabelled(&self, f: impl Fn(&Label) -> Label) -> Result<Circuit> {
        let mut out = Circuit::new();
        for w in &self.wires {
            out.add_wire(f(&w.label), w.role)?;
        }
        out.layers = self.layers.clone();
        out.provenance = self.provenance.clone();
        let map_perm = |p: &LabelPermutation| -> Result<LabelPermutation> {
            LabelPermutation::from_pairs(p.iter().map(|(a, b)| (f(a), f(b))))
        };
        out.group = match &self.group {
            None => None,
            Some(GroupSpec::Explicit(gens)) => Some(GroupSpec::Explicit(
                gens.iter().map(map_perm).collect::<Result<_>>()?,
            )),
            Some(GroupSpec::FullSymmetric(dom)) => {
                Some(GroupSpec::FullSymmetric(dom.iter().map(&f).collect()))
            }
            Some(other) => {
                // structured specs do not survive arbitrary renaming; keep the
                // generated permutations instead
                Some(GroupSpec::Explicit(
                    other.generators()?.iter().map(map_perm).collect::<Result<_>>()?,
                ))
            }
        };
        out.witnesses = self
            .witnesses
            .iter()
            .map(|w| {
                Ok(SymmetryWitness {
                    generator: map_perm(&w.generator)?,
                    extension: map_perm(&w.extension)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(out)
    }
}

pub fn remap_gate(g: &Gate, map: &[u32]) -> Gate {
    match g {
        Gate::Single { wire, u, dag } => Gate::Single {
            wire: map[*wire as usize],
            u: u.clone(),
            dag: *dag,
        },
        Gate::Thr { support, head, t } => {
            let mut sup: SmallVec<[u32; 4]> = support.iter().map(|w| map[*w as usize]).collect();
            sup.sort_unstable();
            Gate::Thr { support: sup, head: map[*head as usize], t: *t }
        }
        Gate::Eq { support, head, t } => {
            let mut sup: SmallVec<[u32; 4]> = support.iter().map(|w| map[*w as usize]).collect();
            sup.sort_unstable();
            Gate::Eq { support: sup, head: map[*head as usize], t: *t }
        }
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.metrics();
        write!(
            f,
            "circuit: {} wires ({} active), {} layers, s={} a={} h={}",
            self.n_wires(),
            self.n_wires() - m.a,
            self.layers.len(),
            m.s,
            m.a,
            m.h
        )
    }
}
