//! Exact circuit semantics: dense state-vector simulation, branch-sparse
//! simulation for circuits whose bulk is classical on the computational
//! basis, unitary extraction and probability queries.
//!
//! Wire-to-bit mapping: wires are taken in canonical label order and the
//! first label is the most significant bit. This convention is fixed and is
//! also what the state-dump file format uses.

use crate::circuit::{Circuit, Gate, Layer, Role};
use crate::error::{Error, Result};
use crate::labels::{Label, LabelPermutation};
use crate::linalg::CMat;
use crate::scalar::{czero, Cx, Scalar};
use std::collections::HashMap;

pub const DENSE_WIRE_CAP: usize = 26;
pub const EXTRACT_WIRE_CAP: usize = 12;
pub const SPARSE_BRANCH_CAP: usize = 1_000_000;
pub const NORM_TOL: f64 = 1e-9;
pub const PRUNE_TOL: f64 = 1e-14;

/// Input on the active wires; workspace wires always start at |0>.
#[derive(Debug, Clone)]
pub enum Input<R: Scalar> {
    /// Every active wire |0>.
    Zeros,
    /// Basis assignment; missing wires default to 0.
    Bits(HashMap<Label, bool>),
    /// Product state, one qubit state per wire; missing wires default |0>.
    Product(HashMap<Label, [Cx<R>; 2]>),
    /// Full amplitude vector over the active wires in canonical order
    /// (first active label = most significant bit).
    Vector(Vec<Cx<R>>),
}

impl<R: Scalar> Input<R> {
    pub fn bits<I: IntoIterator<Item = (Label, bool)>>(bits: I) -> Self {
        Input::Bits(bits.into_iter().collect())
    }
}

// ---------------------------------------------------------------------------
// dense states
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DenseStateOf<R: Scalar> {
    /// Wire labels in canonical order; index 0 is the most significant bit.
    pub wire_order: Vec<Label>,
    pub amps: Vec<Cx<R>>,
}

impl<R: Scalar> DenseStateOf<R> {
    pub fn n_wires(&self) -> usize {
        self.wire_order.len()
    }

    fn bitpos(&self, wire_rank: usize) -> u32 {
        (self.wire_order.len() - 1 - wire_rank) as u32
    }

    pub fn norm(&self) -> R {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<R>().sqrt()
    }

    /// Index of a basis state given bits in wire order.
    pub fn basis_index(&self, bits: &[bool]) -> usize {
        bits.iter().fold(0usize, |acc, b| (acc << 1) | (*b as usize))
    }

    /// Sum of |amp|^2 over basis states matching the predicate.
    pub fn probability(&self, predicate: &[(Label, bool)]) -> Result<R> {
        let mut mask = 0usize;
        let mut want = 0usize;
        for (l, v) in predicate {
            let rank = self
                .wire_order
                .iter()
                .position(|w| w == l)
                .ok_or_else(|| Error::UnknownWire(l.clone()))?;
            let bit = 1usize << self.bitpos(rank);
            mask |= bit;
            if *v {
                want |= bit;
            }
        }
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == want)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Apply the wire-permutation operator R(pi): the amplitude of basis
    /// state a moves to the basis state with bit pi(w) equal to a's bit at w.
    pub fn permuted(&self, pi: &LabelPermutation) -> Result<DenseStateOf<R>> {
        let n = self.wire_order.len();
        let mut target_rank = vec![0usize; n];
        for (rank, label) in self.wire_order.iter().enumerate() {
            let img = pi.apply(label)?;
            let img_rank = self
                .wire_order
                .iter()
                .position(|w| *w == img)
                .ok_or_else(|| Error::UnknownWire(img.clone()))?;
            target_rank[rank] = img_rank;
        }
        let mut out = vec![czero(); self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() == R::zero() {
                continue;
            }
            let mut j = 0usize;
            for rank in 0..n {
                if i >> self.bitpos(rank) & 1 == 1 {
                    j |= 1 << self.bitpos(target_rank[rank]);
                }
            }
            out[j] = *a;
        }
        Ok(DenseStateOf {
            wire_order: self.wire_order.clone(),
            amps: out,
        })
    }

    /// Split off the state of a label subset, requiring the rest of the wires
    /// to be |0>: returns (amplitudes over `keep` in canonical order, leaked
    /// probability mass outside the rest-are-zero subspace).
    pub fn project_rest_zero(&self, keep: &[Label]) -> Result<(Vec<Cx<R>>, R)> {
        let mut keep_sorted = keep.to_vec();
        keep_sorted.sort();
        let ranks: Vec<usize> = keep_sorted
            .iter()
            .map(|l| {
                self.wire_order
                    .iter()
                    .position(|w| w == l)
                    .ok_or_else(|| Error::UnknownWire(l.clone()))
            })
            .collect::<Result<_>>()?;
        let mut rest_mask = (1usize << self.wire_order.len()) - 1;
        for r in &ranks {
            rest_mask &= !(1usize << self.bitpos(*r));
        }
        let mut out = vec![czero(); 1 << ranks.len()];
        let mut leak = R::zero();
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() == R::zero() {
                continue;
            }
            if i & rest_mask != 0 {
                leak += a.norm_sqr();
                continue;
            }
            let mut j = 0usize;
            for (pos, r) in ranks.iter().enumerate() {
                if i >> self.bitpos(*r) & 1 == 1 {
                    j |= 1 << (ranks.len() - 1 - pos);
                }
            }
            out[j] = *a;
        }
        Ok((out, leak))
    }
}

/// Execution order and wire layout for a circuit under simulation.
struct SimLayout {
    /// wire id -> bit position (bit 0 = least significant).
    bit_of_wire: Vec<u32>,
    wire_order: Vec<Label>,
}

fn layout(c: &Circuit) -> SimLayout {
    let order = c.canonical_wire_order();
    let n = order.len();
    let mut bit_of_wire = vec![0u32; n];
    for (rank, id) in order.iter().enumerate() {
        bit_of_wire[*id as usize] = (n - 1 - rank) as u32;
    }
    SimLayout {
        bit_of_wire,
        wire_order: order.iter().map(|id| c.label(*id).clone()).collect(),
    }
}

fn initial_dense<R: Scalar>(c: &Circuit, layout: &SimLayout, input: &Input<R>) -> Result<Vec<Cx<R>>> {
    let n = c.n_wires();
    let dim = 1usize << n;
    let mut amps = vec![czero(); dim];
    match input {
        Input::Zeros => amps[0] = Cx::new(R::one(), R::zero()),
        Input::Bits(bits) => {
            let mut idx = 0usize;
            for (l, v) in bits {
                let id = c.wire_id(l)?;
                if c.role(id) != Role::Active {
                    return Err(Error::BadParam(format!("input bit on workspace wire {l}")));
                }
                if *v {
                    idx |= 1usize << layout.bit_of_wire[id as usize];
                }
            }
            amps[idx] = Cx::new(R::one(), R::zero());
        }
        Input::Product(states) => {
            amps[0] = Cx::new(R::one(), R::zero());
            // expand wire by wire
            for (l, q) in states {
                let id = c.wire_id(l)?;
                if c.role(id) != Role::Active {
                    return Err(Error::BadParam(format!("input state on workspace wire {l}")));
                }
                let bit = 1usize << layout.bit_of_wire[id as usize];
                for i in 0..dim {
                    if i & bit == 0 {
                        let a = amps[i];
                        amps[i] = a * q[0];
                        amps[i | bit] = a * q[1];
                    }
                }
            }
        }
        Input::Vector(v) => {
            let mut actives: Vec<u32> = (0..n as u32).filter(|&i| c.role(i) == Role::Active).collect();
            actives.sort_by(|a, b| c.label(*a).cmp(c.label(*b)));
            if v.len() != 1usize << actives.len() {
                return Err(Error::BadParam(format!(
                    "input vector has length {}, expected {}",
                    v.len(),
                    1usize << actives.len()
                )));
            }
            for (k, amp) in v.iter().enumerate() {
                let mut idx = 0usize;
                for (pos, id) in actives.iter().enumerate() {
                    if k >> (actives.len() - 1 - pos) & 1 == 1 {
                        idx |= 1usize << layout.bit_of_wire[*id as usize];
                    }
                }
                amps[idx] = *amp;
            }
            let norm: R = amps.iter().map(|a| a.norm_sqr()).sum::<R>().sqrt();
            if (norm - R::one()).abs() > R::of(NORM_TOL) {
                return Err(Error::NotNormalised(norm.to_f64().unwrap_or(f64::NAN)));
            }
        }
    }
    Ok(amps)
}

fn apply_gate_dense<R: Scalar>(amps: &mut [Cx<R>], layout: &SimLayout, g: &Gate) {
    match g {
        Gate::Single { wire, .. } => {
            let m = g.single_matrix::<R>().unwrap();
            let bit = 1usize << layout.bit_of_wire[*wire as usize];
            for i in 0..amps.len() {
                if i & bit == 0 {
                    let a0 = amps[i];
                    let a1 = amps[i | bit];
                    amps[i] = m[(0, 0)] * a0 + m[(0, 1)] * a1;
                    amps[i | bit] = m[(1, 0)] * a0 + m[(1, 1)] * a1;
                }
            }
        }
        Gate::Thr { support, head, t } | Gate::Eq { support, head, t } => {
            let exact = matches!(g, Gate::Eq { .. });
            let mut mask = 0usize;
            for s in support {
                mask |= 1usize << layout.bit_of_wire[*s as usize];
            }
            let head_bit = 1usize << layout.bit_of_wire[*head as usize];
            let t = *t;
            for i in 0..amps.len() {
                if i & head_bit == 0 {
                    let count = (i & mask).count_ones();
                    let fire = if exact { count == t } else { count >= t };
                    if fire {
                        amps.swap(i, i | head_bit);
                    }
                }
            }
        }
    }
}

fn check_norm_dense<R: Scalar>(amps: &[Cx<R>]) -> Result<()> {
    let norm: R = amps.iter().map(|a| a.norm_sqr()).sum::<R>().sqrt();
    if (norm - R::one()).abs() > R::of(NORM_TOL) {
        return Err(Error::NotNormalised(norm.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(())
}

/// Run the whole circuit on the given active input.
pub fn run_dense<R: Scalar>(c: &Circuit, input: &Input<R>) -> Result<DenseStateOf<R>> {
    run_dense_prefix(c, input, c.layers.len())
}

/// Run only the first `layers` layers (used to inspect intermediate states).
pub fn run_dense_prefix<R: Scalar>(c: &Circuit, input: &Input<R>, layers: usize) -> Result<DenseStateOf<R>> {
    if c.n_wires() > DENSE_WIRE_CAP {
        return Err(Error::WireCap(c.n_wires(), DENSE_WIRE_CAP));
    }
    let layout = layout(c);
    let mut amps = initial_dense(c, &layout, input)?;
    check_norm_dense(&amps)?;
    for layer in &c.layers[..layers] {
        for g in &layer.gates {
            apply_gate_dense(&mut amps, &layout, g);
        }
        check_norm_dense(&amps)?;
    }
    Ok(DenseStateOf {
        wire_order: layout.wire_order,
        amps,
    })
}

/// Continue a dense run across an additional layer range.
pub fn apply_layers_dense<R: Scalar>(state: &mut DenseStateOf<R>, c: &Circuit, range: std::ops::Range<usize>) -> Result<()> {
    let layout = layout(c);
    if layout.wire_order != state.wire_order {
        return Err(Error::BadParam("state does not match circuit wires".into()));
    }
    for layer in &c.layers[range] {
        for g in &layer.gates {
            apply_gate_dense(&mut state.amps, &layout, g);
        }
        check_norm_dense(&state.amps)?;
    }
    Ok(())
}

/// The unitary implemented by the circuit over all of its wires (workspace
/// wires forced through arbitrary basis values). Column j is the result of
/// running the circuit on basis state j.
pub fn extract_unitary<R: Scalar>(c: &Circuit) -> Result<CMat<R>> {
    let n = c.n_wires();
    if n > EXTRACT_WIRE_CAP {
        return Err(Error::WireCap(n, EXTRACT_WIRE_CAP));
    }
    let layout = layout(c);
    let dim = 1usize << n;
    let mut u = CMat::zeros(dim, dim);
    for col in 0..dim {
        let mut amps = vec![czero(); dim];
        // basis index in simulation convention equals the column index:
        // both use canonical order, first label most significant.
        amps[col] = Cx::new(R::one(), R::zero());
        for layer in &c.layers {
            for g in &layer.gates {
                apply_gate_dense(&mut amps, &layout, g);
            }
        }
        for (row, a) in amps.into_iter().enumerate() {
            u[(row, col)] = a;
        }
    }
    Ok(u)
}

/// The unitary of a single gate embedded on an explicit wire list (for
/// brute-force commutation checks). All of the gate's wires must be listed.
pub fn gate_unitary_on<R: Scalar>(_c: &Circuit, g: &Gate, wires: &[u32]) -> CMat<R> {
    let k = wires.len();
    let dim = 1usize << k;
    let bit_of = |w: u32| -> u32 { (k - 1 - wires.iter().position(|x| *x == w).unwrap()) as u32 };
    let mut u = CMat::zeros(dim, dim);
    match g {
        Gate::Single { wire, .. } => {
            let m = g.single_matrix::<R>().unwrap();
            let bit = 1usize << bit_of(*wire);
            for col in 0..dim {
                let b = (col & bit != 0) as usize;
                u[(col & !bit, col)] = m[(0, b)];
                u[(col | bit, col)] = m[(1, b)];
            }
        }
        Gate::Thr { support, head, t } | Gate::Eq { support, head, t } => {
            let exact = matches!(g, Gate::Eq { .. });
            let mut mask = 0usize;
            for s in support {
                mask |= 1usize << bit_of(*s);
            }
            let head_bit = 1usize << bit_of(*head);
            for col in 0..dim {
                let count = (col & mask).count_ones();
                let fire = if exact { count == *t } else { count >= *t };
                let row = if fire { col ^ head_bit } else { col };
                u[(row, col)] = Cx::new(R::one(), R::zero());
            }
        }
    }
    u
}

/// Apply a bare 2x2 matrix to one wire of a dense state (used by observable
/// evaluation for basis changes, outside any circuit).
pub fn apply_single_to_state<R: Scalar>(state: &mut DenseStateOf<R>, wire: &Label, m: &CMat<R>) -> Result<()> {
    let rank = state
        .wire_order
        .iter()
        .position(|w| w == wire)
        .ok_or_else(|| Error::UnknownWire(wire.clone()))?;
    let bit = 1usize << (state.wire_order.len() - 1 - rank);
    for i in 0..state.amps.len() {
        if i & bit == 0 {
            let a0 = state.amps[i];
            let a1 = state.amps[i | bit];
            state.amps[i] = m[(0, 0)] * a0 + m[(0, 1)] * a1;
            state.amps[i | bit] = m[(1, 0)] * a0 + m[(1, 1)] * a1;
        }
    }
    Ok(())
}

/// The unitary a workspace-restoring circuit implements on its active wires:
/// column x is the active part of running the circuit on basis input x,
/// requiring the workspace to return to |0> (leak below `leak_tol`).
pub fn active_unitary<R: Scalar>(c: &Circuit, leak_tol: f64) -> Result<CMat<R>> {
    let mut actives = c.active_labels();
    actives.sort();
    let n = actives.len();
    if c.n_wires() > DENSE_WIRE_CAP {
        return Err(Error::WireCap(c.n_wires(), DENSE_WIRE_CAP));
    }
    let dim = 1usize << n;
    let mut u = CMat::zeros(dim, dim);
    for col in 0..dim {
        let bits: HashMap<Label, bool> = actives
            .iter()
            .enumerate()
            .map(|(pos, l)| (l.clone(), col >> (n - 1 - pos) & 1 == 1))
            .collect();
        let st = run_dense::<R>(c, &Input::Bits(bits))?;
        let (vec, leak) = st.project_rest_zero(&actives)?;
        if leak > R::of(leak_tol) {
            return Err(Error::BadParam(format!(
                "circuit does not restore its workspace on basis input {col} (leak {leak})"
            )));
        }
        for (row, a) in vec.into_iter().enumerate() {
            u[(row, col)] = a;
        }
    }
    Ok(u)
}

// ---------------------------------------------------------------------------
// sparse states
// ---------------------------------------------------------------------------

/// Basis key: up to 256 wires, bit b of the key is bit position b as in the
/// dense convention (word b/64, bit b%64).
pub type BitKey = [u64; 4];
pub const SPARSE_WIRE_CAP: usize = 256;

#[derive(Debug, Clone)]
pub struct SparseStateOf<R: Scalar> {
    pub wire_order: Vec<Label>,
    /// Branches with unique keys; no entry has |amp| <= PRUNE_TOL after a
    /// layer boundary.
    pub branches: Vec<(BitKey, Cx<R>)>,
}

#[inline]
fn key_get(k: &BitKey, bit: u32) -> bool {
    k[(bit / 64) as usize] >> (bit % 64) & 1 == 1
}

#[inline]
fn key_flip(k: &mut BitKey, bit: u32) {
    k[(bit / 64) as usize] ^= 1u64 << (bit % 64);
}

#[inline]
fn key_popcount_masked(k: &BitKey, mask: &BitKey) -> u32 {
    (0..4).map(|w| (k[w] & mask[w]).count_ones()).sum()
}

impl<R: Scalar> SparseStateOf<R> {
    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    fn bitpos(&self, wire_rank: usize) -> u32 {
        (self.wire_order.len() - 1 - wire_rank) as u32
    }

    pub fn norm(&self) -> R {
        self.branches.iter().map(|(_, a)| a.norm_sqr()).sum::<R>().sqrt()
    }

    pub fn probability(&self, predicate: &[(Label, bool)]) -> Result<R> {
        let mut mask = [0u64; 4];
        let mut want = [0u64; 4];
        for (l, v) in predicate {
            let rank = self
                .wire_order
                .iter()
                .position(|w| w == l)
                .ok_or_else(|| Error::UnknownWire(l.clone()))?;
            let bit = self.bitpos(rank);
            mask[(bit / 64) as usize] |= 1u64 << (bit % 64);
            if *v {
                want[(bit / 64) as usize] |= 1u64 << (bit % 64);
            }
        }
        Ok(self
            .branches
            .iter()
            .filter(|(k, _)| (0..4).all(|w| k[w] & mask[w] == want[w]))
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Dense view (wire count permitting).
    pub fn to_dense(&self) -> Result<DenseStateOf<R>> {
        let n = self.wire_order.len();
        if n > DENSE_WIRE_CAP {
            return Err(Error::WireCap(n, DENSE_WIRE_CAP));
        }
        let mut amps = vec![czero(); 1 << n];
        for (k, a) in &self.branches {
            amps[k[0] as usize] = *a;
        }
        Ok(DenseStateOf {
            wire_order: self.wire_order.clone(),
            amps,
        })
    }

    /// Amplitudes over `keep` labels with all other wires required |0>;
    /// returns the leaked mass as second component.
    pub fn project_rest_zero(&self, keep: &[Label]) -> Result<(Vec<Cx<R>>, R)> {
        let mut keep_sorted = keep.to_vec();
        keep_sorted.sort();
        let bits: Vec<u32> = keep_sorted
            .iter()
            .map(|l| {
                self.wire_order
                    .iter()
                    .position(|w| w == l)
                    .map(|r| self.bitpos(r))
                    .ok_or_else(|| Error::UnknownWire(l.clone()))
            })
            .collect::<Result<_>>()?;
        let mut keep_mask = [0u64; 4];
        for b in &bits {
            keep_mask[(b / 64) as usize] |= 1u64 << (b % 64);
        }
        let mut out = vec![czero(); 1 << bits.len()];
        let mut leak = R::zero();
        for (k, a) in &self.branches {
            let outside = (0..4).any(|w| k[w] & !keep_mask[w] != 0);
            if outside {
                leak += a.norm_sqr();
                continue;
            }
            let mut j = 0usize;
            for (pos, b) in bits.iter().enumerate() {
                if key_get(k, *b) {
                    j |= 1 << (bits.len() - 1 - pos);
                }
            }
            out[j] = out[j] + *a;
        }
        Ok((out, leak))
    }
}

pub struct SparseRun<'c, R: Scalar> {
    circuit: &'c Circuit,
    bit_of_wire: Vec<u32>,
    pub state: SparseStateOf<R>,
    branch_cap: usize,
}

impl<'c, R: Scalar> SparseRun<'c, R> {
    pub fn new(c: &'c Circuit, input: &Input<R>) -> Result<Self> {
        Self::with_cap(c, input, SPARSE_BRANCH_CAP)
    }

    pub fn with_cap(c: &'c Circuit, input: &Input<R>, branch_cap: usize) -> Result<Self> {
        if c.n_wires() > SPARSE_WIRE_CAP {
            return Err(Error::WireCap(c.n_wires(), SPARSE_WIRE_CAP));
        }
        let layout = layout(c);
        let mut branches: Vec<(BitKey, Cx<R>)> = Vec::new();
        match input {
            Input::Zeros => branches.push(([0; 4], Cx::new(R::one(), R::zero()))),
            Input::Bits(bits) => {
                let mut key = [0u64; 4];
                for (l, v) in bits {
                    let id = c.wire_id(l)?;
                    if c.role(id) != Role::Active {
                        return Err(Error::BadParam(format!("input bit on workspace wire {l}")));
                    }
                    if *v {
                        key_flip(&mut key, layout.bit_of_wire[id as usize]);
                    }
                }
                branches.push((key, Cx::new(R::one(), R::zero())));
            }
            Input::Product(states) => {
                branches.push(([0; 4], Cx::new(R::one(), R::zero())));
                for (l, q) in states {
                    let id = c.wire_id(l)?;
                    if c.role(id) != Role::Active {
                        return Err(Error::BadParam(format!("input state on workspace wire {l}")));
                    }
                    let bit = layout.bit_of_wire[id as usize];
                    let mut next = Vec::with_capacity(branches.len() * 2);
                    for (k, a) in &branches {
                        if q[0].norm() > R::of(PRUNE_TOL) {
                            next.push((*k, *a * q[0]));
                        }
                        if q[1].norm() > R::of(PRUNE_TOL) {
                            let mut k1 = *k;
                            key_flip(&mut k1, bit);
                            next.push((k1, *a * q[1]));
                        }
                    }
                    branches = next;
                }
            }
            Input::Vector(v) => {
                let mut actives: Vec<u32> =
                    (0..c.n_wires() as u32).filter(|&i| c.role(i) == Role::Active).collect();
                actives.sort_by(|a, b| c.label(*a).cmp(c.label(*b)));
                if actives.len() > 60 {
                    return Err(Error::WireCap(actives.len(), 60));
                }
                if v.len() != 1usize << actives.len() {
                    return Err(Error::BadParam(format!(
                        "input vector has length {}, expected {}",
                        v.len(),
                        1usize << actives.len()
                    )));
                }
                for (k, amp) in v.iter().enumerate() {
                    if amp.norm() <= R::of(PRUNE_TOL) {
                        continue;
                    }
                    let mut key = [0u64; 4];
                    for (pos, id) in actives.iter().enumerate() {
                        if k >> (actives.len() - 1 - pos) & 1 == 1 {
                            key_flip(&mut key, layout.bit_of_wire[*id as usize]);
                        }
                    }
                    branches.push((key, *amp));
                }
                let norm: R = branches.iter().map(|(_, a)| a.norm_sqr()).sum::<R>().sqrt();
                if (norm - R::one()).abs() > R::of(NORM_TOL) {
                    return Err(Error::NotNormalised(norm.to_f64().unwrap_or(f64::NAN)));
                }
            }
        }
        Ok(SparseRun {
            circuit: c,
            bit_of_wire: layout.bit_of_wire,
            state: SparseStateOf {
                wire_order: layout.wire_order,
                branches,
            },
            branch_cap,
        })
    }

    /// Returns whether the gate merged branches (and hence already pruned).
    fn apply_gate(&mut self, g: &Gate) -> Result<bool> {
        let mut merged_branches = false;
        let branches = &mut self.state.branches;
        match g {
            Gate::Thr { support, head, t } | Gate::Eq { support, head, t } => {
                let exact = matches!(g, Gate::Eq { .. });
                let mut mask = [0u64; 4];
                for s in support {
                    let b = self.bit_of_wire[*s as usize];
                    mask[(b / 64) as usize] |= 1u64 << (b % 64);
                }
                let head_bit = self.bit_of_wire[*head as usize];
                for (k, _) in branches.iter_mut() {
                    let count = key_popcount_masked(k, &mask);
                    let fire = if exact { count == *t } else { count >= *t };
                    if fire {
                        key_flip(k, head_bit);
                    }
                }
            }
            Gate::Single { wire, u, dag } => {
                let bit = self.bit_of_wire[*wire as usize];
                let m = Gate::Single {
                    wire: *wire,
                    u: u.clone(),
                    dag: *dag,
                }
                .single_matrix::<R>()
                .unwrap();
                let diag = m[(0, 1)].norm_sqr() == R::zero() && m[(1, 0)].norm_sqr() == R::zero();
                let antidiag = m[(0, 0)].norm_sqr() == R::zero() && m[(1, 1)].norm_sqr() == R::zero();
                if diag {
                    for (k, a) in branches.iter_mut() {
                        let b = key_get(k, bit) as usize;
                        *a = *a * m[(b, b)];
                    }
                } else if antidiag {
                    for (k, a) in branches.iter_mut() {
                        let b = key_get(k, bit) as usize;
                        *a = *a * m[(1 - b, b)];
                        key_flip(k, bit);
                    }
                } else {
                    merged_branches = true;
                    let mut merged: HashMap<BitKey, Cx<R>> = HashMap::with_capacity(branches.len() * 2);
                    for (k, a) in branches.iter() {
                        let b = key_get(k, bit) as usize;
                        let mut k0 = *k;
                        if b == 1 {
                            key_flip(&mut k0, bit);
                        }
                        let mut k1 = k0;
                        key_flip(&mut k1, bit);
                        let c0 = m[(0, b)] * *a;
                        let c1 = m[(1, b)] * *a;
                        if c0.norm_sqr() != R::zero() {
                            *merged.entry(k0).or_insert_with(czero) += c0;
                        }
                        if c1.norm_sqr() != R::zero() {
                            *merged.entry(k1).or_insert_with(czero) += c1;
                        }
                    }
                    *branches = merged
                        .into_iter()
                        .filter(|(_, a)| a.norm() > R::of(PRUNE_TOL))
                        .collect();
                }
            }
        }
        if self.state.branches.len() > self.branch_cap {
            return Err(Error::BranchCap(self.branch_cap));
        }
        Ok(merged_branches)
    }

    fn end_layer(&mut self, had_merge: bool) -> Result<()> {
        // unit-modulus diagonals and basis permutations cannot shrink an
        // amplitude, so pruning is only due after merging gates
        if had_merge {
            self.state.branches.retain(|(_, a)| a.norm() > R::of(PRUNE_TOL));
            let norm = self.state.norm();
            if (norm - R::one()).abs() > R::of(NORM_TOL) {
                return Err(Error::NotNormalised(norm.to_f64().unwrap_or(f64::NAN)));
            }
        }
        Ok(())
    }

    pub fn apply_layer(&mut self, layer: &Layer) -> Result<()> {
        let mut had_merge = false;
        for g in &layer.gates {
            had_merge |= self.apply_gate(g)?;
        }
        self.end_layer(had_merge)
    }

    pub fn apply_range(&mut self, range: std::ops::Range<usize>) -> Result<()> {
        let circuit = self.circuit;
        if circuit.n_wires() <= 64 {
            // narrow fast path: single-word keys
            let mut narrow: Vec<(u64, Cx<R>)> =
                self.state.branches.iter().map(|(k, a)| (k[0], *a)).collect();
            for layer in &circuit.layers[range] {
                let mut had_merge = false;
                for g in &layer.gates {
                    had_merge |= apply_gate_narrow(g, &self.bit_of_wire, &mut narrow)?;
                    if narrow.len() > self.branch_cap {
                        return Err(Error::BranchCap(self.branch_cap));
                    }
                }
                if had_merge {
                    narrow.retain(|(_, a)| a.norm() > R::of(PRUNE_TOL));
                    let norm: R = narrow.iter().map(|(_, a)| a.norm_sqr()).sum::<R>().sqrt();
                    if (norm - R::one()).abs() > R::of(NORM_TOL) {
                        return Err(Error::NotNormalised(norm.to_f64().unwrap_or(f64::NAN)));
                    }
                }
            }
            self.state.branches = narrow.into_iter().map(|(k, a)| ([k, 0, 0, 0], a)).collect();
            return Ok(());
        }
        for layer in &circuit.layers[range] {
            self.apply_layer(layer)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<SparseStateOf<R>> {
        self.apply_range(0..self.circuit.layers.len())?;
        Ok(self.state)
    }
}

fn apply_gate_narrow<R: Scalar>(
    g: &Gate,
    bit_of_wire: &[u32],
    branches: &mut Vec<(u64, Cx<R>)>,
) -> Result<bool> {
    let mut merged_branches = false;
    match g {
        Gate::Thr { support, head, t } | Gate::Eq { support, head, t } => {
            let exact = matches!(g, Gate::Eq { .. });
            let mut mask = 0u64;
            for s in support {
                mask |= 1u64 << bit_of_wire[*s as usize];
            }
            let head_bit = 1u64 << bit_of_wire[*head as usize];
            for (k, _) in branches.iter_mut() {
                let count = (*k & mask).count_ones();
                let fire = if exact { count == *t } else { count >= *t };
                if fire {
                    *k ^= head_bit;
                }
            }
        }
        Gate::Single { wire, .. } => {
            let bit = 1u64 << bit_of_wire[*wire as usize];
            let m = g.single_matrix::<R>().unwrap();
            let diag = m[(0, 1)].norm_sqr() == R::zero() && m[(1, 0)].norm_sqr() == R::zero();
            let antidiag = m[(0, 0)].norm_sqr() == R::zero() && m[(1, 1)].norm_sqr() == R::zero();
            if diag {
                for (k, a) in branches.iter_mut() {
                    let b = (*k & bit != 0) as usize;
                    *a = *a * m[(b, b)];
                }
            } else if antidiag {
                for (k, a) in branches.iter_mut() {
                    let b = (*k & bit != 0) as usize;
                    *a = *a * m[(1 - b, b)];
                    *k ^= bit;
                }
            } else {
                merged_branches = true;
                let mut merged: HashMap<u64, Cx<R>> = HashMap::with_capacity(branches.len() * 2);
                for (k, a) in branches.iter() {
                    let b = (*k & bit != 0) as usize;
                    let k0 = *k & !bit;
                    let c0 = m[(0, b)] * *a;
                    let c1 = m[(1, b)] * *a;
                    if c0.norm_sqr() != R::zero() {
                        *merged.entry(k0).or_insert_with(czero) += c0;
                    }
                    if c1.norm_sqr() != R::zero() {
                        *merged.entry(k0 | bit).or_insert_with(czero) += c1;
                    }
                }
                *branches = merged
                    .into_iter()
                    .filter(|(_, a)| a.norm() > R::of(PRUNE_TOL))
                    .collect();
            }
        }
    }
    Ok(merged_branches)
}

/// Run the whole circuit in branch-sparse mode.
pub fn run_sparse<R: Scalar>(c: &Circuit, input: &Input<R>) -> Result<SparseStateOf<R>> {
    SparseRun::new(c, input)?.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::SingleGate;
    use num_complex::Complex;

    type C64 = Complex<f64>;

    fn wires(names: &[&str]) -> Circuit {
        Circuit::with_wires(names.iter().map(|s| (Label::atom(s), Role::Active))).unwrap()
    }

    #[test]
    fn cnot_on_basis_state() {
        // Thr^{{a},b}_{>=1} on |1>_a |0>_b -> |1>_a |1>_b
        let mut c = wires(&["a", "b"]);
        let g = c.thr(1, &Label::atom("b"), [&Label::atom("a")]).unwrap();
        c.append_layer([g]).unwrap();
        let out = run_dense::<f64>(&c, &Input::bits([(Label::atom("a"), true)])).unwrap();
        // canonical order: a, b with a the most significant bit
        assert!((out.amps[0b11].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hadamard_probability() {
        let mut c = wires(&["w"]);
        let g = c.single(&Label::atom("w"), SingleGate::H).unwrap();
        c.append_layer([g]).unwrap();
        let out = run_dense::<f64>(&c, &Input::Zeros).unwrap();
        let p = out.probability(&[(Label::atom("w"), true)]).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert!((out.probability(&[]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extract_identity_and_h() {
        let c = wires(&["w"]);
        let u = extract_unitary::<f64>(&c).unwrap();
        assert!(u.sub(&CMat::identity(2)).max_abs() < 1e-12);

        let mut c = wires(&["w"]);
        let g = c.single(&Label::atom("w"), SingleGate::H).unwrap();
        c.append_layer([g.clone()]).unwrap();
        let u = extract_unitary::<f64>(&c).unwrap();
        let h = g.single_matrix::<f64>().unwrap();
        assert!(u.sub(&h).max_abs() < 1e-12);
    }

    #[test]
    fn sparse_classical_stays_single_branch() {
        let mut c = wires(&["a", "b", "d"]);
        let g1 = c.thr(1, &Label::atom("b"), [&Label::atom("a")]).unwrap();
        let g2 = c.eq(0, &Label::atom("d"), [&Label::atom("b")]).unwrap();
        c.append_layer([g1]).unwrap();
        c.append_layer([g2]).unwrap();
        let out = run_sparse::<f64>(&c, &Input::bits([(Label::atom("a"), true)])).unwrap();
        assert_eq!(out.n_branches(), 1);
    }

    #[test]
    fn sparse_h_then_fanout_has_two_branches() {
        let names: Vec<String> = (0..20).map(|i| format!("w{i:02}")).collect();
        let mut c =
            Circuit::with_wires(names.iter().map(|s| (Label::atom(s), Role::Active))).unwrap();
        let h = c.single(&Label::atom(&names[0]), SingleGate::H).unwrap();
        c.append_layer([h]).unwrap();
        for i in 1..names.len() {
            let g = c
                .cnot(&Label::atom(&names[0]), &Label::atom(&names[i]))
                .unwrap();
            c.append_layer([g]).unwrap();
        }
        let out = run_sparse::<f64>(&c, &Input::Zeros).unwrap();
        assert_eq!(out.n_branches(), 2);
        let p = out.probability(&[(Label::atom(&names[19]), true)]).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dense_sparse_agree_on_random_circuit() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.gen_range(2..6usize);
            let labels: Vec<Label> = (0..n as i64).map(Label::idx).collect();
            let mut c =
                Circuit::with_wires(labels.iter().map(|l| (l.clone(), Role::Active))).unwrap();
            for _ in 0..8 {
                let l = &labels[rng.gen_range(0..n)];
                let gate = match rng.gen_range(0..4) {
                    0 => c.single(l, SingleGate::H).unwrap(),
                    1 => c.single(l, SingleGate::Ry(rng.gen_range(0.0..3.0))).unwrap(),
                    2 => c.single(l, SingleGate::P(rng.gen_range(0.0..3.0))).unwrap(),
                    _ => {
                        let mut others: Vec<&Label> = labels.iter().filter(|x| *x != l).collect();
                        others.shuffle(&mut rng);
                        let take = rng.gen_range(1..=others.len().min(3));
                        c.thr(rng.gen_range(0..2), l, others.into_iter().take(take)).unwrap()
                    }
                };
                c.append_layer([gate]).unwrap();
            }
            let d = run_dense::<f64>(&c, &Input::Zeros).unwrap();
            let s = run_sparse::<f64>(&c, &Input::Zeros).unwrap().to_dense().unwrap();
            let diff: f64 = d
                .amps
                .iter()
                .zip(&s.amps)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-10, "dense/sparse disagree by {diff}");
        }
    }

    #[test]
    fn permuted_state_moves_bits() {
        let mut c = wires(&["a", "b"]);
        let g = c.single(&Label::atom("a"), SingleGate::X).unwrap();
        c.append_layer([g]).unwrap();
        let st = run_dense::<f64>(&c, &Input::Zeros).unwrap(); // |10>
        let pi = LabelPermutation::swap(
            [Label::atom("a"), Label::atom("b")],
            &Label::atom("a"),
            &Label::atom("b"),
        );
        let moved = st.permuted(&pi).unwrap(); // |01>
        assert!((moved.amps[0b01].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn project_rest_zero_detects_leak() {
        let mut c = Circuit::with_wires([
            (Label::atom("a"), Role::Active),
            (Label::atom("w"), Role::Workspace),
        ])
        .unwrap();
        let g = c.single(&Label::atom("w"), SingleGate::H).unwrap();
        c.append_layer([g]).unwrap();
        let st = run_dense::<f64>(&c, &Input::Zeros).unwrap();
        let (_, leak) = st.project_rest_zero(&[Label::atom("a")]).unwrap();
        assert!((leak - 0.5).abs() < 1e-12);
    }

    #[test]
    fn vector_input_round_trip() {
        let c = wires(&["a", "b"]);
        let v: Vec<C64> = vec![
            C64::new(0.5, 0.0),
            C64::new(0.5, 0.0),
            C64::new(0.5, 0.0),
            C64::new(-0.5, 0.0),
        ];
        let st = run_dense::<f64>(&c, &Input::Vector(v.clone())).unwrap();
        for (a, b) in st.amps.iter().zip(&v) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn wire_cap_enforced() {
        let names: Vec<String> = (0..30).map(|i| format!("w{i:02}")).collect();
        let c = Circuit::with_wires(names.iter().map(|s| (Label::atom(s), Role::Active))).unwrap();
        assert!(matches!(
            run_dense::<f64>(&c, &Input::Zeros),
            Err(Error::WireCap(30, _))
        ));
        assert!(matches!(
            extract_unitary::<f64>(&c),
            Err(Error::WireCap(30, _))
        ));
    }
}
