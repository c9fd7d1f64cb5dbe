//! Symmetry certification: verify stored automorphism witnesses for each
//! group generator, and search for extensions when witnesses are absent.
//!
//! A witness pairs a generator sigma (acting on the active labels) with an
//! extension pi (a permutation of all wires). Verifying the generators
//! certifies the whole group, because automorphism extensions compose.

use crate::circuit::{Circuit, Gate, GateKey, Role};
use crate::error::{Error, Result};
use crate::labels::{Label, LabelPermutation};
use std::collections::HashMap;

/// Per-generator extension of an active-wire symmetry to a circuit
/// automorphism.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryWitness {
    /// sigma: permutation of the active labels.
    pub generator: LabelPermutation,
    /// pi: permutation of all wires extending sigma.
    pub extension: LabelPermutation,
}

impl SymmetryWitness {
    pub fn new(generator: LabelPermutation, extension: LabelPermutation) -> Self {
        SymmetryWitness { generator, extension }
    }

    /// Identity witness on a circuit's wires.
    pub fn identity(c: &Circuit) -> Self {
        SymmetryWitness {
            generator: LabelPermutation::identity(c.active_labels()),
            extension: LabelPermutation::identity(c.wires().iter().map(|w| w.label.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    /// First violation: layer index and description of the offending gate.
    Fail { layer: usize, gate: String },
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

#[derive(Debug, Clone)]
pub struct SymmetryReport {
    /// One verdict per generator, in generator order.
    pub per_generator: Vec<(LabelPermutation, Verdict)>,
}

impl SymmetryReport {
    pub fn passed(&self) -> bool {
        self.per_generator.iter().all(|(_, v)| v.passed())
    }
}

/// Check that the witness extension maps every layer onto itself
/// (multiset membership under symbolic gate equality). Also checks the
/// witness invariants: the extension restricted to the active labels equals
/// the generator, and workspace maps to workspace.
pub fn verify_witness(c: &Circuit, w: &SymmetryWitness) -> Result<Verdict> {
    for wire in c.wires() {
        let img = w.extension.apply(&wire.label)?;
        let img_id = c.wire_id(&img)?;
        if c.role(img_id) != wire.role {
            return Err(Error::Symmetry(format!(
                "extension maps {} across roles to {img}",
                wire.label
            )));
        }
        match wire.role {
            Role::Active => {
                let gen_img = w.generator.apply(&wire.label)?;
                if gen_img != img {
                    return Err(Error::Symmetry(format!(
                        "extension disagrees with generator at {}: {img} vs {gen_img}",
                        wire.label
                    )));
                }
            }
            Role::Workspace => {}
        }
    }
    let perm = c.index_perm(&w.extension)?;
    Ok(verify_index_perm(c, &perm))
}

/// Core layer-for-layer check with a resolved wire permutation.
pub(crate) fn verify_index_perm(c: &Circuit, perm: &[u32]) -> Verdict {
    let identity_rank: Vec<u32> = (0..c.n_wires() as u32).collect();
    for (li, layer) in c.layers.iter().enumerate() {
        let mut bag: HashMap<GateKey, isize> = HashMap::with_capacity(layer.gates.len());
        for g in &layer.gates {
            *bag.entry(g.canon_key(&identity_rank)).or_insert(0) += 1;
        }
        for g in &layer.gates {
            let pg = c.permute_gate_idx(perm, g);
            let key = pg.canon_key(&identity_rank);
            match bag.get_mut(&key) {
                Some(n) if *n > 0 => *n -= 1,
                _ => {
                    return Verdict::Fail {
                        layer: li,
                        gate: c.describe_gate(g),
                    }
                }
            }
        }
    }
    Verdict::Pass
}

/// Verify every recorded generator witness of the circuit. Passing
/// certifies the full group generated by them, since verified extensions
/// compose.
pub fn verify_symmetric(c: &Circuit) -> Result<SymmetryReport> {
    let group = c
        .group
        .as_ref()
        .ok_or_else(|| Error::Symmetry("circuit carries no group".into()))?;
    let gens = group.generators()?;
    let mut per_generator = Vec::new();
    for gen in gens {
        let witness = c
            .witnesses
            .iter()
            .find(|w| w.generator == gen)
            .ok_or_else(|| Error::Symmetry(format!("missing witness for generator {}", show(&gen))))?;
        per_generator.push((gen.clone(), verify_witness(c, witness)?));
    }
    Ok(SymmetryReport { per_generator })
}

fn show(p: &LabelPermutation) -> String {
    p.iter()
        .filter(|(a, b)| a != b)
        .map(|(a, b)| format!("{a}->{b}"))
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Debug, Clone)]
pub enum SearchOutcome {
    Found(LabelPermutation),
    /// The full search space was exhausted: no extension exists.
    NoExtension,
    /// Budget ran out before exhausting the space.
    Inconclusive { nodes: u64 },
}

pub const DEFAULT_SEARCH_BUDGET: u64 = 1_000_000;

/// Backtracking search for an extension of sigma to a circuit automorphism,
/// over bijections of the workspace wires. Pruned by per-wire gate-incidence
/// signatures: a workspace wire may only map to one with an identical
/// multiset of (layer, gate kind, role-in-gate, threshold) incidences.
pub fn search_extension(c: &Circuit, sigma: &LabelPermutation, budget: u64) -> Result<SearchOutcome> {
    let n = c.n_wires();
    let mut assign: Vec<Option<u32>> = vec![None; n];
    let mut used: Vec<bool> = vec![false; n];

    // fix the active wires per sigma
    for (i, w) in c.wires().iter().enumerate() {
        if w.role == Role::Active {
            let img = sigma.apply(&w.label)?;
            let id = c.wire_id(&img)?;
            if c.role(id) != Role::Active {
                return Err(Error::Symmetry(format!("sigma maps active {} to workspace", w.label)));
            }
            assign[i] = Some(id);
            used[id as usize] = true;
        }
    }

    let sig = wire_signatures(c);
    let mut workspace: Vec<u32> = (0..n as u32).filter(|&i| c.role(i) == Role::Workspace).collect();
    // most-constrained first: rare signatures have the fewest candidates
    let mut class_size: HashMap<&Vec<Incidence>, usize> = HashMap::new();
    for w in &workspace {
        *class_size.entry(&sig[*w as usize]).or_insert(0) += 1;
    }
    workspace.sort_by_key(|w| class_size[&sig[*w as usize]]);

    let mut nodes: u64 = 0;
    let outcome = backtrack(c, &sig, &workspace, 0, &mut assign, &mut used, &mut nodes, budget);
    match outcome {
        BtResult::Found(perm) => {
            let pairs = perm
                .iter()
                .enumerate()
                .map(|(i, img)| (c.label(i as u32).clone(), c.label(*img).clone()));
            Ok(SearchOutcome::Found(LabelPermutation::from_pairs(pairs)?))
        }
        BtResult::Exhausted => Ok(SearchOutcome::NoExtension),
        BtResult::OutOfBudget => Ok(SearchOutcome::Inconclusive { nodes }),
    }
}

type Incidence = (u32, u8, u8, u32, u64);

/// Signature of a wire: sorted multiset of (layer, kind, role, t, extra)
/// incidences, where role is 0 for head/target and 1 for support membership.
fn wire_signatures(c: &Circuit) -> Vec<Vec<Incidence>> {
    let mut sig: Vec<Vec<Incidence>> = vec![Vec::new(); c.n_wires()];
    for (li, layer) in c.layers.iter().enumerate() {
        for g in &layer.gates {
            match g {
                Gate::Single { wire, u, dag } => {
                    let (rank, params) = (u.name().as_bytes()[0], u.params());
                    let mut extra = *dag as u64;
                    for p in params {
                        extra = extra.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(p.to_bits());
                    }
                    sig[*wire as usize].push((li as u32, rank, 0, 0, extra));
                }
                Gate::Thr { support, head, t } | Gate::Eq { support, head, t } => {
                    let kind = if matches!(g, Gate::Thr { .. }) { b'T' } else { b'E' };
                    let sz = support.len() as u64;
                    sig[*head as usize].push((li as u32, kind, 0, *t, sz));
                    for s in support {
                        sig[*s as usize].push((li as u32, kind, 1, *t, sz));
                    }
                }
            }
        }
    }
    for s in &mut sig {
        s.sort_unstable();
    }
    sig
}

enum BtResult {
    Found(Vec<u32>),
    Exhausted,
    OutOfBudget,
}

#[allow(clippy::too_many_arguments)]
fn backtrack(
    c: &Circuit,
    sig: &[Vec<Incidence>],
    order: &[u32],
    depth: usize,
    assign: &mut Vec<Option<u32>>,
    used: &mut Vec<bool>,
    nodes: &mut u64,
    budget: u64,
) -> BtResult {
    if depth == order.len() {
        let perm: Vec<u32> = assign.iter().map(|a| a.unwrap()).collect();
        return match verify_index_perm(c, &perm) {
            Verdict::Pass => BtResult::Found(perm),
            Verdict::Fail { .. } => BtResult::Exhausted,
        };
    }
    let wire = order[depth];
    let mut out_of_budget = false;
    for cand in 0..c.n_wires() as u32 {
        if used[cand as usize] || c.role(cand) != Role::Workspace {
            continue;
        }
        if sig[wire as usize] != sig[cand as usize] {
            continue;
        }
        *nodes += 1;
        if *nodes > budget {
            return BtResult::OutOfBudget;
        }
        assign[wire as usize] = Some(cand);
        used[cand as usize] = true;
        match backtrack(c, sig, order, depth + 1, assign, used, nodes, budget) {
            BtResult::Found(p) => return BtResult::Found(p),
            BtResult::OutOfBudget => out_of_budget = true,
            BtResult::Exhausted => {}
        }
        assign[wire as usize] = None;
        used[cand as usize] = false;
        if out_of_budget {
            return BtResult::OutOfBudget;
        }
    }
    BtResult::Exhausted
}

/// Combine per-part extensions into one permutation, requiring agreement on
/// shared labels. Used by the transform passes when they merge circuits.
pub fn combine_extensions(parts: &[&LabelPermutation]) -> Result<LabelPermutation> {
    let mut acc = LabelPermutation::identity(std::iter::empty::<Label>());
    for p in parts {
        acc = acc.union(p)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::SingleGate;

    /// Three-CNOT SWAP decomposition with a control wire: the asymmetric
    /// circuit from the state-discrimination discussion.
    fn cswap_three_toffolis() -> Circuit {
        let (phi, psi, ctl) = (Label::atom("phi"), Label::atom("psi"), Label::atom("ctl"));
        let mut c = Circuit::with_wires([
            (phi.clone(), Role::Active),
            (psi.clone(), Role::Active),
            (ctl.clone(), Role::Workspace),
        ])
        .unwrap();
        let h = c.single(&ctl, SingleGate::H).unwrap();
        c.append_layer([h.clone()]).unwrap();
        let t1 = c.thr(2, &psi, [&ctl, &phi]).unwrap();
        let t2 = c.thr(2, &phi, [&ctl, &psi]).unwrap();
        c.append_layer([t1.clone()]).unwrap();
        c.append_layer([t2]).unwrap();
        c.append_layer([t1]).unwrap();
        c.append_layer([h]).unwrap();
        c
    }

    #[test]
    fn identity_witness_passes() {
        let c = cswap_three_toffolis();
        let w = SymmetryWitness::identity(&c);
        assert!(verify_witness(&c, &w).unwrap().passed());
    }

    #[test]
    fn swap_without_workspace_freedom_fails() {
        let c = cswap_three_toffolis();
        let actives = c.active_labels();
        let sigma = LabelPermutation::swap(actives.iter().cloned(), &actives[0], &actives[1]);
        let all = c.wires().iter().map(|w| w.label.clone());
        let ext = LabelPermutation::swap(all, &actives[0], &actives[1]);
        let verdict = verify_witness(&c, &SymmetryWitness::new(sigma.clone(), ext)).unwrap();
        assert!(!verdict.passed());
        // and the search over the single workspace wire is exhausted
        match search_extension(&c, &sigma, 10_000).unwrap() {
            SearchOutcome::NoExtension => {}
            other => panic!("expected NoExtension, got {other:?}"),
        }
    }

    #[test]
    fn search_identity_on_single_wire() {
        let c = Circuit::with_wires([(Label::atom("w"), Role::Active)]).unwrap();
        let sigma = LabelPermutation::identity([Label::atom("w")]);
        match search_extension(&c, &sigma, 100).unwrap() {
            SearchOutcome::Found(p) => assert!(p.is_identity()),
            other => panic!("expected identity, got {other:?}"),
        }
    }

    #[test]
    fn tampered_layer_fails_with_layer_index() {
        // two layers; break the pairing in layer 1
        let (a, b, w1, w2) = (
            Label::atom("a"),
            Label::atom("b"),
            Label::atom("w1"),
            Label::atom("w2"),
        );
        let mut c = Circuit::with_wires([
            (a.clone(), Role::Active),
            (b.clone(), Role::Active),
            (w1.clone(), Role::Workspace),
            (w2.clone(), Role::Workspace),
        ])
        .unwrap();
        let g1 = c.thr(1, &w1, [&a]).unwrap();
        let g2 = c.thr(1, &w2, [&b]).unwrap();
        c.append_layer([g1, g2]).unwrap();
        // asymmetric second layer: only one head moved
        let g3 = c.thr(1, &w1, [&b]).unwrap();
        c.append_layer([g3]).unwrap();
        let sigma = LabelPermutation::swap([a.clone(), b.clone()], &a, &b);
        let ext = LabelPermutation::from_pairs([
            (a.clone(), b.clone()),
            (b.clone(), a.clone()),
            (w1.clone(), w2.clone()),
            (w2.clone(), w1.clone()),
        ])
        .unwrap();
        match verify_witness(&c, &SymmetryWitness::new(sigma, ext)).unwrap() {
            Verdict::Fail { layer, .. } => assert_eq!(layer, 1),
            Verdict::Pass => panic!("expected failure"),
        }
    }

    #[test]
    fn witness_composition() {
        // S_3-symmetric layer of three CNOT fan-in gates
        let labels: Vec<Label> = (1..=3).map(Label::idx).collect();
        let out = Label::atom("out");
        let mut c = Circuit::with_wires(
            labels
                .iter()
                .map(|l| (l.clone(), Role::Active))
                .chain([(out.clone(), Role::Workspace)]),
        )
        .unwrap();
        let g = c.thr(2, &out, labels.iter()).unwrap();
        c.append_layer([g]).unwrap();
        let s1 = LabelPermutation::swap(labels.iter().cloned(), &labels[0], &labels[1]);
        let s2 = LabelPermutation::cycle(labels.iter().cloned(), &labels);
        let e1 = s1.extend_identity([out.clone()]).unwrap();
        let e2 = s2.extend_identity([out.clone()]).unwrap();
        let w1 = SymmetryWitness::new(s1.clone(), e1.clone());
        let w2 = SymmetryWitness::new(s2.clone(), e2.clone());
        assert!(verify_witness(&c, &w1).unwrap().passed());
        assert!(verify_witness(&c, &w2).unwrap().passed());
        let composed = SymmetryWitness::new(s1.compose(&s2).unwrap(), e1.compose(&e2).unwrap());
        assert!(verify_witness(&c, &composed).unwrap().passed());
    }
}
