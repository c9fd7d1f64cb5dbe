//! Symmetry-preserving passes: concatenation with disjoint or shared
//! workspace, circuit inversion, controlled circuits and select operations.
//! Each pass also transforms the recorded witnesses.

use crate::circuit::{Circuit, Gate, Layer, Role, SingleGate};
use crate::error::{Error, Result};
use crate::labels::{Label, LabelPermutation};
use crate::linalg::CMat;
use crate::symmetry::SymmetryWitness;
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConcatMode {
    /// Disjoint workspace for each part: always symmetry-preserving.
    Disjoint,
    /// Unified workspace; requires the parts' witnesses to act identically
    /// on the shared workspace labels.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostDelta {
    pub ds: isize,
    pub da: isize,
    pub dh: isize,
}

/// Circuit plus the cost the pass added.
#[derive(Debug, Clone)]
pub struct TransformOutput {
    pub circuit: Circuit,
    pub cost: CostDelta,
}

fn cost_delta(before: &Circuit, after: &Circuit) -> CostDelta {
    let (mb, ma) = (before.metrics(), after.metrics());
    CostDelta {
        ds: ma.s as isize - mb.s as isize,
        da: ma.a as isize - mb.a as isize,
        dh: ma.h as isize - mb.h as isize,
    }
}

// ---------------------------------------------------------------------------
// concatenation
// ---------------------------------------------------------------------------

/// Concatenate two circuits over the same active wires.
pub fn concat(c1: &Circuit, c2: &Circuit, mode: ConcatMode) -> Result<Circuit> {
    let a1: BTreeSet<Label> = c1.active_labels().into_iter().collect();
    let a2: BTreeSet<Label> = c2.active_labels().into_iter().collect();
    if a1 != a2 {
        return Err(Error::BadParam("concat requires identical active wires".into()));
    }
    let c2 = match mode {
        ConcatMode::Shared => c2.clone(),
        ConcatMode::Disjoint => {
            let w1: BTreeSet<Label> = c1.workspace_labels().into_iter().collect();
            let colliding: BTreeSet<Label> = c2
                .workspace_labels()
                .into_iter()
                .filter(|l| w1.contains(l))
                .collect();
            if colliding.is_empty() {
                c2.clone()
            } else {
                c2.relabelled(|l| {
                    if colliding.contains(l) {
                        Label::tagged("dj", l.clone())
                    } else {
                        l.clone()
                    }
                })?
            }
        }
    };

    let mut out = Circuit::new();
    for w in c1.wires() {
        out.add_wire(w.label.clone(), w.role)?;
    }
    for w in c2.wires() {
        if !out.has_wire(&w.label) {
            out.add_wire(w.label.clone(), w.role)?;
        } else if out.role(out.wire_id(&w.label)?) != w.role {
            return Err(Error::BadParam(format!("wire {} changes role across parts", w.label)));
        }
    }
    out.append_circuit(c1)?;
    out.append_circuit(&c2)?;

    out.group = match (&c1.group, &c2.group) {
        (Some(g1), Some(g2)) => {
            if g1 != g2 {
                return Err(Error::BadParam("concat parts carry different groups".into()));
            }
            Some(g1.clone())
        }
        (Some(g), None) | (None, Some(g)) => Some(g.clone()),
        (None, None) => None,
    };

    out.witnesses = combine_witness_lists(&[c1, &c2], &out, &[])?;
    Ok(out)
}

/// Pair up witnesses by generator across parts and union their extensions,
/// then extend by the identity on `fixed` labels and on any remaining wires
/// of `out` not covered by the union. Incompatible extensions on shared
/// wires are an error (the shared-workspace compatibility rule).
pub(crate) fn combine_witness_lists(
    parts: &[&Circuit],
    out: &Circuit,
    fixed: &[Label],
) -> Result<Vec<SymmetryWitness>> {
    let first = match parts.first() {
        Some(c) => c,
        None => return Ok(vec![]),
    };
    let mut combined = Vec::new();
    for w in &first.witnesses {
        let mut ext = w.extension.clone();
        for other in &parts[1..] {
            let other_w = other
                .witnesses
                .iter()
                .find(|ow| ow.generator == w.generator)
                .ok_or_else(|| {
                    Error::Symmetry("a part is missing a witness for a shared generator".into())
                })?;
            ext = ext.union(&other_w.extension).map_err(|_| {
                Error::Symmetry("workspace witness actions are incompatible across parts".into())
            })?;
        }
        ext = ext.extend_identity(fixed.iter().cloned())?;
        let rest: Vec<Label> = out
            .wires()
            .iter()
            .map(|x| x.label.clone())
            .filter(|l| !ext.contains(l))
            .collect();
        ext = ext.extend_identity(rest)?;
        combined.push(SymmetryWitness::new(w.generator.clone(), ext));
    }
    Ok(combined)
}

// ---------------------------------------------------------------------------
// inversion
// ---------------------------------------------------------------------------

/// Layers reversed; single-qubit gates replaced by their conjugate
/// transposes; threshold-type gates are their own inverse. Witnesses and
/// metrics are unchanged.
pub fn invert(c: &Circuit) -> Circuit {
    let mut out = c.clone();
    out.layers = c
        .layers
        .iter()
        .rev()
        .map(|layer| Layer {
            gates: layer
                .gates
                .iter()
                .map(|g| match g {
                    Gate::Single { wire, u, dag } => Gate::Single {
                        wire: *wire,
                        u: u.clone(),
                        dag: !*dag,
                    },
                    other => other.clone(),
                })
                .collect(),
        })
        .collect();
    out
}

// ---------------------------------------------------------------------------
// controlled circuits
// ---------------------------------------------------------------------------

/// Is any wire of the circuit tagged with this namespace?
pub fn tag_in_use(c: &Circuit, tag: &str) -> bool {
    c.wires()
        .iter()
        .any(|w| matches!(&w.label, Label::Tagged(t, _) if &**t == tag))
}

/// Smallest namespace of the form base, base2, base3, ... unused by all the
/// given circuits. Builders that nest (amplification inside amplification,
/// controls of controlled circuits) rely on this to keep ancilla labels
/// collision-free while still sharing them where sharing is intended.
pub fn fresh_tag(base: &str, circuits: &[&Circuit]) -> String {
    let taken = |t: &str| circuits.iter().any(|c| tag_in_use(c, t));
    if !taken(base) {
        return base.to_string();
    }
    for i in 2.. {
        let t = format!("{base}{i}");
        if !taken(&t) {
            return t;
        }
    }
    unreachable!()
}

/// Helper wire for the controlled-threshold pattern, keyed to the head it
/// serves so helpers are reused across layers (and across the parts of a
/// select, which passes one shared namespace).
pub fn control_helper_label(tag: &str, head: &Label) -> Label {
    Label::Tagged(tag.into(), std::sync::Arc::new(head.clone()))
}

/// Euler data for the five-layer controlled single-qubit pattern:
/// U = e^{i alpha} A X B X C with A B C = I.
pub(crate) fn euler_axbxc(u: &CMat<f64>) -> (f64, CMat<f64>, CMat<f64>, CMat<f64>) {
    let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
    let alpha = det.arg() / 2.0;
    let phase = num_complex::Complex::new((-alpha).cos(), (-alpha).sin());
    let v = u.scale(phase);
    let (v00, v10) = (v[(0, 0)], v[(1, 0)]);
    let gamma = 2.0 * v10.norm().atan2(v00.norm());
    let (beta, delta) = if v10.norm() < 1e-12 {
        (-2.0 * v00.arg(), 0.0)
    } else if v00.norm() < 1e-12 {
        (2.0 * v10.arg(), 0.0)
    } else {
        let sum = -2.0 * v00.arg();
        let diff = 2.0 * v10.arg();
        ((sum + diff) / 2.0, (sum - diff) / 2.0)
    };
    let rz = |t: f64| SingleGate::Rz(t).matrix::<f64>();
    let ry = |t: f64| SingleGate::Ry(t).matrix::<f64>();
    let a = rz(beta).mul(&ry(gamma / 2.0));
    let b = ry(-gamma / 2.0).mul(&rz(-(delta + beta) / 2.0));
    let c = rz((delta - beta) / 2.0);
    (alpha, a, b, c)
}

fn custom_gate(m: &CMat<f64>) -> SingleGate {
    SingleGate::Custom(Box::new([
        m[(0, 0)].re,
        m[(0, 0)].im,
        m[(0, 1)].re,
        m[(0, 1)].im,
        m[(1, 0)].re,
        m[(1, 0)].im,
        m[(1, 1)].re,
        m[(1, 1)].im,
    ]))
}

/// Build control-U(c) on a fresh control wire. Each layer splits into a
/// single-qubit sublayer (five layers: A/X/B/X/C with the controlled global
/// phase realised as one phase gate on the control) and a threshold sublayer
/// (three layers with one helper wire per head, helpers reused across
/// layers). Witnesses are extended by fixing the control and mapping helper
/// wires alongside their heads.
pub fn control(c: &Circuit, ctl: &Label, ctl_role: Role) -> Result<TransformOutput> {
    let tag = fresh_tag("cw", &[c]);
    control_with_tag(c, ctl, ctl_role, &tag)
}

/// Like [`control`] but with an explicit helper namespace, so several
/// controlled circuits can share their helper wires.
pub fn control_with_tag(c: &Circuit, ctl: &Label, ctl_role: Role, tag: &str) -> Result<TransformOutput> {
    if c.has_wire(ctl) {
        return Err(Error::BadParam(format!("control label {ctl} collides with a circuit wire")));
    }
    let mut out = Circuit::new();
    for w in c.wires() {
        out.add_wire(w.label.clone(), w.role)?;
    }
    out.add_wire(ctl.clone(), ctl_role)?;
    let heads: Vec<Label> = c.head_wires().iter().map(|id| c.label(*id).clone()).collect();
    for h in &heads {
        out.add_wire(control_helper_label(tag, h), Role::Workspace)?;
    }

    for layer in &c.layers {
        // singles, merged per wire (they commute, so layer order works)
        let mut singles: Vec<(u32, CMat<f64>)> = Vec::new();
        let mut thresholds: Vec<&Gate> = Vec::new();
        for g in &layer.gates {
            match g {
                Gate::Single { wire, .. } => {
                    let m = g.single_matrix::<f64>().unwrap();
                    match singles.iter_mut().find(|(w, _)| w == wire) {
                        Some((_, acc)) => *acc = m.mul(acc),
                        None => singles.push((*wire, m)),
                    }
                }
                _ => thresholds.push(g),
            }
        }

        if !singles.is_empty() {
            let mut l_c = Vec::new();
            let mut l_x1 = Vec::new();
            let mut l_b = Vec::new();
            let mut l_x2 = Vec::new();
            let mut l_a = Vec::new();
            let mut phase_sum = 0.0f64;
            for (wire, m) in &singles {
                let (alpha, a, b, cc) = euler_axbxc(m);
                phase_sum += alpha;
                let wl = c.label(*wire).clone();
                l_c.push(out.single(&wl, custom_gate(&cc))?);
                l_x1.push(out.cnot(ctl, &wl)?);
                l_b.push(out.single(&wl, custom_gate(&b))?);
                l_x2.push(out.cnot(ctl, &wl)?);
                l_a.push(out.single(&wl, custom_gate(&a))?);
            }
            l_x1.push(out.single(ctl, SingleGate::P(phase_sum))?);
            out.append_layer(l_c)?;
            out.append_layer(l_x1)?;
            out.append_layer(l_b)?;
            out.append_layer(l_x2)?;
            out.append_layer(l_a)?;
        }

        if !thresholds.is_empty() {
            let mut compute = Vec::new();
            let mut heads_here: Vec<Label> = Vec::new();
            for g in &thresholds {
                let (support, head, t, exact) = match g {
                    Gate::Thr { support, head, t } => (support, head, t, false),
                    Gate::Eq { support, head, t } => (support, head, t, true),
                    _ => unreachable!(),
                };
                let head_l = c.label(*head).clone();
                let helper = control_helper_label(tag, &head_l);
                let sup: Vec<Label> = support.iter().map(|w| c.label(*w).clone()).collect();
                let gate = if exact {
                    out.eq(*t, &helper, sup.iter())?
                } else {
                    out.thr(*t, &helper, sup.iter())?
                };
                compute.push(gate);
                if !heads_here.contains(&head_l) {
                    heads_here.push(head_l);
                }
            }
            let apply: Vec<Gate> = heads_here
                .iter()
                .map(|h| out.thr(2, h, [ctl, &control_helper_label(tag, h)]))
                .collect::<Result<_>>()?;
            out.append_layer(compute.clone())?;
            out.append_layer(apply)?;
            out.append_layer(compute)?;
        }
    }

    out.group = c.group.clone();
    out.witnesses = c
        .witnesses
        .iter()
        .map(|w| {
            let mut pairs: Vec<(Label, Label)> =
                w.extension.iter().map(|(a, b)| (a.clone(), b.clone())).collect();
            pairs.push((ctl.clone(), ctl.clone()));
            for h in &heads {
                let img = w.extension.apply(h)?;
                pairs.push((control_helper_label(tag, h), control_helper_label(tag, &img)));
            }
            Ok(SymmetryWitness::new(
                w.generator.clone(),
                LabelPermutation::from_pairs(pairs)?,
            ))
        })
        .collect::<Result<_>>()?;
    let cost = cost_delta(c, &out);
    Ok(TransformOutput { circuit: out, cost })
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

pub fn select_flag_label(tag: &str) -> Label {
    Label::Tagged(tag.into(), std::sync::Arc::new(Label::atom("flag")))
}

/// Number of index wires needed to address k alternatives.
pub fn index_width(k: usize) -> usize {
    if k <= 1 {
        0
    } else {
        k.next_power_of_two().trailing_zeros() as usize
    }
}

/// Implement |j>|psi> -> e^{i theta_j} |j> U_j |psi> over the given index
/// register. For each j the index register is tested against j through an
/// X-conjugated all-ones equality gate into a flag ancilla, a phase gate on
/// the flag applies theta_j, the controlled circuit runs off the flag, and
/// the flag is uncomputed. Index and flag wires carry identity group action.
pub fn select(circuits: &[&Circuit], phases: &[f64], index_wires: &[Label]) -> Result<TransformOutput> {
    let k = circuits.len();
    if k == 0 {
        return Err(Error::BadParam("select needs at least one circuit".into()));
    }
    if phases.len() != k {
        return Err(Error::BadParam("select needs one phase per circuit".into()));
    }
    let m = index_width(k);
    if index_wires.len() != m {
        return Err(Error::BadParam(format!(
            "index width mismatch: {k} circuits need {m} index wires, got {}",
            index_wires.len()
        )));
    }
    let actives: BTreeSet<Label> = circuits[0].active_labels().into_iter().collect();
    for c in circuits {
        let a: BTreeSet<Label> = c.active_labels().into_iter().collect();
        if a != actives {
            return Err(Error::BadParam("select circuits must share active wires".into()));
        }
        if c.group != circuits[0].group {
            return Err(Error::BadParam("select circuits must share a group".into()));
        }
    }
    let flag = select_flag_label(&fresh_tag("sel", circuits));
    let helper_tag = fresh_tag("cw", circuits);

    let mut out = Circuit::new();
    for w in circuits[0].wires() {
        if w.role == Role::Active {
            out.add_wire(w.label.clone(), w.role)?;
        }
    }
    for c in circuits {
        for w in c.wires() {
            if !out.has_wire(&w.label) {
                out.add_wire(w.label.clone(), w.role)?;
            }
        }
    }
    for iw in index_wires {
        out.add_wire(iw.clone(), Role::Workspace)?;
    }
    out.add_wire(flag.clone(), Role::Workspace)?;

    let mut controlled = Vec::new();
    for c in circuits {
        controlled.push(control_with_tag(c, &flag, Role::Workspace, &helper_tag)?.circuit);
    }
    for cc in &controlled {
        for w in cc.wires() {
            if !out.has_wire(&w.label) {
                out.add_wire(w.label.clone(), w.role)?;
            }
        }
    }

    for (j, cc) in controlled.iter().enumerate() {
        let x_layer: Vec<Gate> = index_wires
            .iter()
            .enumerate()
            .filter(|(pos, _)| j >> (m - 1 - pos) & 1 == 0)
            .map(|(_, l)| out.single(l, SingleGate::X))
            .collect::<Result<_>>()?;
        let test = if m == 0 {
            out.single(&flag, SingleGate::X)?
        } else {
            out.eq(m as u32, &flag, index_wires.iter())?
        };
        if !x_layer.is_empty() {
            out.append_layer(x_layer.clone())?;
        }
        out.append_layer([test.clone()])?;
        out.append_layer([out.single(&flag, SingleGate::P(phases[j]))?])?;
        out.append_circuit(cc)?;
        out.append_layer([test])?;
        if !x_layer.is_empty() {
            out.append_layer(x_layer)?;
        }
    }

    out.group = circuits[0].group.clone();
    let fixed: Vec<Label> = index_wires.iter().cloned().chain([flag]).collect();
    let parts: Vec<&Circuit> = controlled.iter().collect();
    out.witnesses = combine_witness_lists(&parts, &out, &fixed)?;
    let before: usize = circuits.iter().map(|c| c.gate_count()).sum();
    let cost = CostDelta {
        ds: out.gate_count() as isize - before as isize,
        da: 0,
        dh: 0,
    };
    Ok(TransformOutput { circuit: out, cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{extract_unitary, run_dense, Input};
    use num_complex::Complex;

    fn single_wire_circuit(g: SingleGate) -> Circuit {
        let mut c = Circuit::with_wires([(Label::atom("q"), Role::Active)]).unwrap();
        let gate = c.single(&Label::atom("q"), g).unwrap();
        c.append_layer([gate]).unwrap();
        c
    }

    #[test]
    fn invert_is_involution_and_daggers() {
        let c = single_wire_circuit(SingleGate::P(0.3));
        let inv = invert(&c);
        assert!(matches!(inv.layers[0].gates[0], Gate::Single { dag: true, .. }));
        assert_eq!(invert(&inv).layers, c.layers);
        // pure-threshold circuits invert to layer-reversed same gates
        let mut t = Circuit::with_wires([
            (Label::atom("a"), Role::Active),
            (Label::atom("b"), Role::Active),
        ])
        .unwrap();
        let g1 = t.cnot(&Label::atom("a"), &Label::atom("b")).unwrap();
        let g2 = t.cnot(&Label::atom("b"), &Label::atom("a")).unwrap();
        t.append_layer([g1.clone()]).unwrap();
        t.append_layer([g2.clone()]).unwrap();
        let ti = invert(&t);
        assert_eq!(ti.layers[0].gates, vec![g2]);
        assert_eq!(ti.layers[1].gates, vec![g1]);
    }

    #[test]
    fn invert_reverses_unitary() {
        let mut c = Circuit::with_wires([
            (Label::atom("a"), Role::Active),
            (Label::atom("b"), Role::Active),
        ])
        .unwrap();
        let h = c.single(&Label::atom("a"), SingleGate::H).unwrap();
        c.append_layer([h]).unwrap();
        let g = c.thr(1, &Label::atom("b"), [&Label::atom("a")]).unwrap();
        c.append_layer([g]).unwrap();
        let p = c.single(&Label::atom("b"), SingleGate::P(1.1)).unwrap();
        c.append_layer([p]).unwrap();
        let u = extract_unitary::<f64>(&c).unwrap();
        let ui = extract_unitary::<f64>(&invert(&c)).unwrap();
        assert!(u.mul(&ui).sub(&CMat::identity(4)).max_abs() < 1e-9);
        assert!(ui.sub(&u.adjoint()).max_abs() < 1e-9);
    }

    #[test]
    fn concat_with_inverse_is_identity_on_actives() {
        let mut c = Circuit::with_wires([
            (Label::atom("a"), Role::Active),
            (Label::atom("b"), Role::Active),
            (Label::atom("w"), Role::Workspace),
        ])
        .unwrap();
        let h = c.single(&Label::atom("a"), SingleGate::Ry(0.7)).unwrap();
        c.append_layer([h]).unwrap();
        let g = c.thr(1, &Label::atom("w"), [&Label::atom("a")]).unwrap();
        c.append_layer([g]).unwrap();
        let g2 = c
            .thr(2, &Label::atom("b"), [&Label::atom("a"), &Label::atom("w")])
            .unwrap();
        c.append_layer([g2]).unwrap();
        let g3 = c.thr(1, &Label::atom("w"), [&Label::atom("a")]).unwrap();
        c.append_layer([g3]).unwrap();
        let both = concat(&c, &invert(&c), ConcatMode::Shared).unwrap();
        let u = extract_unitary::<f64>(&both).unwrap();
        assert!(u.sub(&CMat::identity(8)).max_abs() < 1e-9);
        assert_eq!(both.metrics().a, 1);
    }

    #[test]
    fn concat_empty_keeps_circuit() {
        let c = single_wire_circuit(SingleGate::H);
        let empty = Circuit::with_wires([(Label::atom("q"), Role::Active)]).unwrap();
        for mode in [ConcatMode::Disjoint, ConcatMode::Shared] {
            let joined = concat(&c, &empty, mode).unwrap();
            assert_eq!(joined.gate_count(), 1);
        }
    }

    #[test]
    fn disjoint_concat_tags_colliding_workspace() {
        let mk = |theta: f64| {
            let mut c = Circuit::with_wires([
                (Label::atom("q"), Role::Active),
                (Label::atom("w"), Role::Workspace),
            ])
            .unwrap();
            let g = c.single(&Label::atom("w"), SingleGate::Ry(theta)).unwrap();
            c.append_layer([g]).unwrap();
            c.append_layer([c.single_dag(&Label::atom("w"), SingleGate::Ry(theta)).unwrap()])
                .unwrap();
            c
        };
        let joined = concat(&mk(0.3), &mk(0.4), ConcatMode::Disjoint).unwrap();
        assert_eq!(joined.metrics().a, 2);
        assert!(joined.has_wire(&Label::tagged("dj", Label::atom("w"))));
    }

    #[test]
    fn shared_concat_rejects_mismatched_workspace_witnesses() {
        let (a, b) = (Label::atom("a"), Label::atom("b"));
        let (w1, w2) = (Label::atom("w1"), Label::atom("w2"));
        let wires = [
            (a.clone(), Role::Active),
            (b.clone(), Role::Active),
            (w1.clone(), Role::Workspace),
            (w2.clone(), Role::Workspace),
        ];
        let sigma = LabelPermutation::swap([a.clone(), b.clone()], &a, &b);

        // part 1: cnots a->w1, b->w2; witness swaps w1,w2
        let mut c1 = Circuit::with_wires(wires.clone()).unwrap();
        let g1 = c1.cnot(&a, &w1).unwrap();
        let g2 = c1.cnot(&b, &w2).unwrap();
        c1.append_layer([g1, g2]).unwrap();
        let ext1 = LabelPermutation::from_pairs([
            (a.clone(), b.clone()),
            (b.clone(), a.clone()),
            (w1.clone(), w2.clone()),
            (w2.clone(), w1.clone()),
        ])
        .unwrap();
        c1.witnesses = vec![SymmetryWitness::new(sigma.clone(), ext1)];

        // part 2: symmetric layer with workspace fixed
        let mut c2 = Circuit::with_wires(wires).unwrap();
        let g = c2.thr(1, &w1, [&a, &b]).unwrap();
        c2.append_layer([g]).unwrap();
        let ext2 = sigma.extend_identity([w1, w2]).unwrap();
        c2.witnesses = vec![SymmetryWitness::new(sigma, ext2)];

        assert!(matches!(
            concat(&c1, &c2, ConcatMode::Shared),
            Err(Error::Symmetry(_))
        ));
        assert!(concat(&c1, &c2, ConcatMode::Disjoint).is_ok());
    }

    #[test]
    fn control_of_x_is_cnot() {
        let c = single_wire_circuit(SingleGate::X);
        let ctl = control(&c, &Label::atom("ctl"), Role::Active).unwrap();
        let u = extract_unitary::<f64>(&ctl.circuit).unwrap();
        // canonical order: ctl < q, so ctl is the most significant bit
        let mut cnot = CMat::<f64>::zeros(4, 4);
        for (r, col) in [(0usize, 0usize), (1, 1), (3, 2), (2, 3)] {
            cnot[(r, col)] = Complex::new(1.0, 0.0);
        }
        assert!(u.sub(&cnot).max_abs() < 1e-9);
    }

    #[test]
    fn control_behaviour_on_basis_controls() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let labels: Vec<Label> = (1..=3).map(Label::idx).collect();
            let mut c =
                Circuit::with_wires(labels.iter().map(|l| (l.clone(), Role::Active))).unwrap();
            for _ in 0..4 {
                let l = &labels[rng.gen_range(0..labels.len())];
                let g = match rng.gen_range(0..3) {
                    0 => c.single(l, SingleGate::Ry(rng.gen_range(0.0..3.0))).unwrap(),
                    1 => c.single(l, SingleGate::P(rng.gen_range(0.0..3.0))).unwrap(),
                    _ => {
                        let other = labels.iter().find(|x| *x != l).unwrap();
                        c.thr(1, l, [other]).unwrap()
                    }
                };
                c.append_layer([g]).unwrap();
            }
            let ctl_label = Label::atom("ctl");
            let cc = control(&c, &ctl_label, Role::Active).unwrap();
            assert!(cc.circuit.gate_count() <= 8 * c.gate_count() + 1);

            let u = extract_unitary::<f64>(&cc.circuit).unwrap();
            let uc = extract_unitary::<f64>(&c).unwrap();
            let dim = 1 << c.n_wires();
            let order = cc.circuit.canonical_wire_order();
            let n_all = order.len();
            let ctl_rank = order
                .iter()
                .position(|id| cc.circuit.label(*id) == &ctl_label)
                .unwrap();
            let ctl_bit = 1usize << (n_all - 1 - ctl_rank);
            let embed = |basis: usize| -> usize {
                let corder = c.canonical_wire_order();
                let mut idx = 0usize;
                for (rank, id) in corder.iter().enumerate() {
                    if basis >> (c.n_wires() - 1 - rank) & 1 == 1 {
                        let l = c.label(*id);
                        let big_rank = order
                            .iter()
                            .position(|bid| cc.circuit.label(*bid) == l)
                            .unwrap();
                        idx |= 1usize << (n_all - 1 - big_rank);
                    }
                }
                idx
            };
            for col in 0..dim {
                let big_col = embed(col);
                for row in 0..dim {
                    let big_row = embed(row);
                    let want_id = if row == col { 1.0 } else { 0.0 };
                    assert!((u[(big_row, big_col)].norm() - want_id).abs() < 1e-9);
                    let got = u[(big_row | ctl_bit, big_col | ctl_bit)];
                    assert!((got - uc[(row, col)]).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn select_of_i_and_x_is_cnot_from_index() {
        let ci = Circuit::with_wires([(Label::atom("q"), Role::Active)]).unwrap();
        let cx = single_wire_circuit(SingleGate::X);
        let idx = Label::tagged("ix", Label::idx(0));
        let sel = select(&[&ci, &cx], &[0.0, 0.0], &[idx.clone()]).unwrap();
        let u = extract_unitary::<f64>(&sel.circuit).unwrap();
        // wire order: q (Atom) first, then ix:0 and sel:flag (Tagged)
        let dim = u.rows;
        let (q_bit, i_bit) = (dim >> 1, dim >> 2);
        for q in [0usize, 1] {
            for i in [0usize, 1] {
                let col = q * q_bit + i * i_bit;
                let row_expect = ((q + i) % 2) * q_bit + i * i_bit;
                assert!(
                    (u[(row_expect, col)].norm() - 1.0).abs() < 1e-9,
                    "column {col} expected row {row_expect}"
                );
            }
        }
    }

    #[test]
    fn select_identity_circuits_apply_phases() {
        let ci = Circuit::with_wires([(Label::atom("q"), Role::Active)]).unwrap();
        let idx = Label::tagged("ix", Label::idx(0));
        let (t0, t1) = (0.4f64, 1.3f64);
        let sel = select(&[&ci, &ci], &[t0, t1], &[idx.clone()]).unwrap();
        let st = run_dense::<f64>(&sel.circuit, &Input::Zeros).unwrap();
        let nonzero: Vec<_> = st.amps.iter().filter(|a| a.norm() > 1e-12).collect();
        assert_eq!(nonzero.len(), 1);
        assert!((nonzero[0].arg() - t0).abs() < 1e-9);

        let u = extract_unitary::<f64>(&sel.circuit).unwrap();
        let i_bit = u.rows >> 2;
        assert!((u[(i_bit, i_bit)].arg() - t1).abs() < 1e-9);
    }

    #[test]
    fn select_k1_applies_unconditionally() {
        let cx = single_wire_circuit(SingleGate::X);
        let sel = select(&[&cx], &[0.0], &[]).unwrap();
        let st = run_dense::<f64>(&sel.circuit, &Input::Zeros).unwrap();
        let (active_vec, leak) = st.project_rest_zero(&[Label::atom("q")]).unwrap();
        assert!(leak < 1e-18);
        assert!((active_vec[1].norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn select_rejects_bad_widths() {
        let cx = single_wire_circuit(SingleGate::X);
        assert!(select(&[], &[], &[]).is_err());
        assert!(select(&[&cx, &cx], &[0.0, 0.0], &[]).is_err());
    }
}
