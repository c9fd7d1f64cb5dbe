//! Symmetric quantum subroutines: exact amplitude amplification, oblivious
//! amplitude amplification, phase estimation, linear combination of
//! unitaries (state and oblivious variants), the QFT plumbing they need, the
//! amplitude loader W, and the symmetric SWAP test.

use crate::circuit::{Circuit, Gate, Role, SingleGate};
use crate::error::{Error, Result};
use crate::labels::{GroupSpec, Label, LabelPermutation};
use crate::scalar::Cx;
use crate::sim::{active_unitary, run_dense, Input};
use crate::symmetry::SymmetryWitness;
use crate::transforms::{control, fresh_tag, index_width, invert, select, TransformOutput};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::f64::consts::PI;

// ---------------------------------------------------------------------------
// probabilities
// ---------------------------------------------------------------------------

/// A success probability, exact where a closed form exists.
#[derive(Debug, Clone, PartialEq)]
pub enum Prob {
    Exact(BigRational),
    Float(f64),
}

impl Prob {
    pub fn exact(num: i64, den: i64) -> Self {
        Prob::Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Prob::Float(p) => *p,
            Prob::Exact(r) => rational_to_f64(r),
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Prob::Exact(r) => r.is_one(),
            Prob::Float(p) => *p >= 1.0 - 1e-12,
        }
    }

    pub fn in_open_unit_interval(&self) -> bool {
        match self {
            Prob::Exact(r) => r.is_positive() && *r < BigRational::one(),
            Prob::Float(p) => *p > 0.0 && *p < 1.0 - 1e-12,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Prob::Exact(r) => format!("{}/{}", r.numer(), r.denom()),
            Prob::Float(p) => format!("{p}"),
        }
    }
}

/// Conversion that stays accurate for ratios of very large integers.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let scaled = |x: &BigInt| -> (f64, i64) {
        let bits = x.bits() as i64;
        let shift = (bits - 62).max(0);
        let y: BigInt = x >> shift;
        (y.to_f64().unwrap(), shift)
    };
    let (n, ns) = scaled(r.numer());
    let (d, ds) = scaled(r.denom());
    (n / d) * 2f64.powi((ns - ds) as i32)
}

// ---------------------------------------------------------------------------
// amplitude amplification
// ---------------------------------------------------------------------------

/// Derived amplification parameters.
#[derive(Debug, Clone)]
pub struct AaParams {
    pub p: Prob,
    /// K = ceil(pi / (4 sqrt p)) double-reflection rounds.
    pub k: u32,
    /// theta = pi / (4K + 2).
    pub theta: f64,
    /// Rotation angle: beta with sin(beta/2) = sin(theta)/sqrt(p) for state
    /// amplification, gamma with cos(gamma/2) = sin(theta)/sqrt(p) for the
    /// oblivious variant.
    pub angle: f64,
}

impl AaParams {
    fn derive(p: &Prob, oblivious: bool) -> Result<AaParams> {
        if !p.in_open_unit_interval() {
            return Err(Error::BadParam(format!(
                "amplitude amplification needs p strictly inside (0,1), got {}",
                p.describe()
            )));
        }
        let pf = p.to_f64();
        let k = (PI / (4.0 * pf.sqrt())).ceil() as u32;
        let theta = PI / (4 * k + 2) as f64;
        let ratio = (theta.sin() / pf.sqrt()).min(1.0);
        let angle = if oblivious {
            2.0 * ratio.acos()
        } else {
            2.0 * ratio.asin()
        };
        Ok(AaParams {
            p: p.clone(),
            k,
            theta,
            angle,
        })
    }
}

/// An amplification circuit plus the layer boundaries of its reflection
/// blocks: after j blocks the overlap with the good state is
/// sin((2j+1) theta), and block_ends[0] marks the state right after
/// preparation (j = 0).
#[derive(Debug, Clone)]
pub struct AaBuild {
    pub circuit: Circuit,
    pub params: AaParams,
    pub block_ends: Vec<usize>,
    pub flag: Label,
    pub rot: Label,
    pub kick: Label,
}

fn merge_wires(out: &mut Circuit, part: &Circuit) -> Result<()> {
    for w in part.wires() {
        if out.has_wire(&w.label) {
            if out.role(out.wire_id(&w.label)?) != w.role {
                return Err(Error::BadParam(format!(
                    "wire {} has conflicting roles across parts",
                    w.label
                )));
            }
        } else {
            out.add_wire(w.label.clone(), w.role)?;
        }
    }
    Ok(())
}

fn merged_group(a: &Circuit, d: &Circuit) -> Result<Option<GroupSpec>> {
    match (&a.group, &d.group) {
        (Some(g1), Some(g2)) if g1 != g2 => {
            Err(Error::BadParam("subcircuits carry different groups".into()))
        }
        (Some(g), _) | (_, Some(g)) => Ok(Some(g.clone())),
        (None, None) => Ok(None),
    }
}

/// Exact amplitude amplification. `a` prepares sqrt(p)|psi1> +
/// sqrt(1-p)|psi0>; `d` flags |psi1> on `flag` (a workspace wire of `d`).
/// The output maps |0...0> to |psi1> exactly with three extra workspace
/// wires (the flag plus a rotation and a kickback ancilla) restored to |0>.
pub fn amplitude_amplify(a: &Circuit, d: &Circuit, flag: &Label, p: &Prob) -> Result<AaBuild> {
    let params = AaParams::derive(p, false)?;
    d.wire_id(flag)?;
    let tag = fresh_tag("aa", &[a, d]);
    let rot = Label::tagged(&tag, Label::atom("rot"));
    let kick = Label::tagged(&tag, Label::atom("kick"));

    let mut out = Circuit::new();
    merge_wires(&mut out, a)?;
    merge_wires(&mut out, d)?;
    out.add_wire(rot.clone(), Role::Workspace)?;
    out.add_wire(kick.clone(), Role::Workspace)?;

    let beta = params.angle;
    let d_inv = invert(d);
    let a_inv = invert(a);
    let all_but_kick: Vec<Label> = out
        .wires()
        .iter()
        .map(|w| w.label.clone())
        .filter(|l| l != &kick)
        .collect();

    out.append_layer([
        out.single(&rot, SingleGate::Ry(beta))?,
        out.single(&kick, SingleGate::X)?,
    ])?;
    out.append_layer([out.single(&kick, SingleGate::H)?])?;
    out.append_circuit(a)?;

    let mut block_ends = vec![out.layers.len()];
    for _ in 0..params.k {
        // reflection through the good state: flag it, kick the phase back,
        // unflag
        out.append_circuit(d)?;
        out.append_layer([out.thr(2, &kick, [flag, &rot])?])?;
        out.append_circuit(&d_inv)?;
        // reflection through the starting state
        out.append_circuit(&a_inv)?;
        out.append_layer([out.single_dag(&rot, SingleGate::Ry(beta))?])?;
        out.append_layer([out.eq(0, &kick, all_but_kick.iter())?])?;
        out.append_circuit(a)?;
        out.append_layer([out.single(&rot, SingleGate::Ry(beta))?])?;
        block_ends.push(out.layers.len());
    }

    let mut last = vec![
        out.single(&rot, SingleGate::X)?,
        out.single(&kick, SingleGate::H)?,
    ];
    if params.k % 2 == 1 {
        // each double reflection carries a global sign along with the 2-theta
        // rotation, so odd round counts leave -|good>; cancel it here
        last.push(out.single(&rot, SingleGate::GPhase(PI))?);
    }
    out.append_layer(last)?;
    out.append_layer([out.single(&kick, SingleGate::X)?])?;

    out.group = merged_group(a, d)?;
    if out.group.is_some() {
        let parts = [a, d];
        out.witnesses = crate::transforms::combine_witness_lists(
            &parts,
            &out,
            &[rot.clone(), kick.clone()],
        )?;
    }
    Ok(AaBuild {
        circuit: out,
        params,
        block_ends,
        flag: flag.clone(),
        rot,
        kick,
    })
}

/// Oblivious amplitude amplification: `a` acts on actives plus its own
/// workspace register with A|psi>|0^a> = sqrt(p)(U|psi>)|0^a> +
/// sqrt(1-p)|Phi_psi>, where Phi has no support on workspace-zero basis
/// states and p is input-independent. The output implements U with two more
/// workspace wires.
pub fn oblivious_aa(a: &Circuit, p: &Prob) -> Result<AaBuild> {
    let params = AaParams::derive(p, true)?;
    let tag = fresh_tag("oaa", &[a]);
    let rot = Label::tagged(&tag, Label::atom("rot"));
    let kick = Label::tagged(&tag, Label::atom("kick"));
    let mut out = Circuit::new();
    merge_wires(&mut out, a)?;
    out.add_wire(rot.clone(), Role::Workspace)?;
    out.add_wire(kick.clone(), Role::Workspace)?;

    let gamma = params.angle;
    let a_inv = invert(a);
    let anc_and_rot: Vec<Label> = a
        .workspace_labels()
        .into_iter()
        .chain([rot.clone()])
        .collect();
    let reflect = out.eq(0, &kick, anc_and_rot.iter())?;

    out.append_layer([
        out.single(&rot, SingleGate::Ry(gamma))?,
        out.single(&kick, SingleGate::X)?,
    ])?;
    out.append_layer([out.single(&kick, SingleGate::H)?])?;
    out.append_circuit(a)?;

    let mut block_ends = vec![out.layers.len()];
    for _ in 0..params.k {
        out.append_layer([reflect.clone()])?;
        out.append_circuit(&a_inv)?;
        out.append_layer([out.single_dag(&rot, SingleGate::Ry(gamma))?])?;
        out.append_layer([reflect.clone()])?;
        out.append_circuit(a)?;
        out.append_layer([out.single(&rot, SingleGate::Ry(gamma))?])?;
        block_ends.push(out.layers.len());
    }
    let mut last = vec![out.single(&kick, SingleGate::Ry(PI / 2.0))?];
    if params.k % 2 == 1 {
        // cancel the global sign of an odd number of double reflections
        last.push(out.single(&kick, SingleGate::GPhase(PI))?);
    }
    out.append_layer(last)?;

    out.group = a.group.clone();
    if out.group.is_some() {
        out.witnesses =
            crate::transforms::combine_witness_lists(&[a], &out, &[rot.clone(), kick.clone()])?;
    }
    Ok(AaBuild {
        circuit: out,
        params,
        block_ends,
        flag: kick.clone(),
        rot,
        kick,
    })
}

// ---------------------------------------------------------------------------
// QFT
// ---------------------------------------------------------------------------

/// Controlled phase diag(1,1,1,e^{i phi}) compiled as two CNOTs and three
/// phase gates, appended as four layers.
fn append_cphase(c: &mut Circuit, a: &Label, b: &Label, phi: f64) -> Result<()> {
    c.append_layer([
        c.single(a, SingleGate::P(phi / 2.0))?,
        c.single(b, SingleGate::P(phi / 2.0))?,
    ])?;
    let cnot = c.cnot(a, b)?;
    c.append_layer([cnot.clone()])?;
    c.append_layer([c.single(b, SingleGate::P(-phi / 2.0))?])?;
    c.append_layer([cnot])?;
    Ok(())
}

fn append_swap(c: &mut Circuit, a: &Label, b: &Label) -> Result<()> {
    let ab = c.cnot(a, b)?;
    let ba = c.cnot(b, a)?;
    c.append_layer([ab.clone()])?;
    c.append_layer([ba])?;
    c.append_layer([ab])?;
    Ok(())
}

/// Quantum Fourier transform on the given wires (first wire = most
/// significant bit): |x> -> 2^{-k/2} sum_y e^{2 pi i x y / 2^k} |y>.
pub fn build_qft_on(c: &mut Circuit, wires: &[Label]) -> Result<()> {
    let k = wires.len();
    for i in 0..k {
        c.append_layer([c.single(&wires[i], SingleGate::H)?])?;
        for j in i + 1..k {
            append_cphase(c, &wires[j], &wires[i], 2.0 * PI / 2f64.powi((j - i + 1) as i32))?;
        }
    }
    for i in 0..k / 2 {
        append_swap(c, &wires[i], &wires[k - 1 - i])?;
    }
    Ok(())
}

/// Standalone QFT circuit on k active wires labelled Index(1..=k).
pub fn build_qft(k: usize) -> Result<Circuit> {
    if k == 0 {
        return Err(Error::BadParam("qft needs at least one wire".into()));
    }
    let wires: Vec<Label> = (1..=k as i64).map(Label::idx).collect();
    let mut c = Circuit::with_wires(wires.iter().map(|l| (l.clone(), Role::Active)))?;
    build_qft_on(&mut c, &wires)?;
    Ok(c)
}

// ---------------------------------------------------------------------------
// phase estimation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerMode {
    /// Select over the literal powers A^j for 0 <= j < 2^k.
    Literal,
    /// Controlled A^{2^i} per estimation bit (cheaper; non-default and
    /// outside the stated cost model).
    Binary,
}

/// The j-fold repetition of a circuit, sharing its workspace.
pub fn power(a: &Circuit, j: usize) -> Circuit {
    let mut out = a.clone();
    out.layers.clear();
    for _ in 0..j {
        out.append_circuit(a).expect("same wires");
    }
    out
}

pub fn estimation_wires(k: usize) -> Vec<Label> {
    (1..=k as i64).map(|i| Label::tagged("est", Label::idx(i))).collect()
}

/// Phase estimation on the eigenstate fed through the active wires of `a`:
/// Hadamards on k = ceil(log2(1/eps)) estimation wires, a select over the
/// powers A^j, and an inverse QFT on the estimation register.
pub fn qpe(a: &Circuit, eps: f64) -> Result<Circuit> {
    qpe_with_mode(a, eps, PowerMode::Literal)
}

pub fn qpe_with_mode(a: &Circuit, eps: f64, mode: PowerMode) -> Result<Circuit> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::BadParam(format!("qpe needs 0 < eps < 1, got {eps}")));
    }
    let k = (1.0 / eps).log2().ceil().max(1.0) as usize;
    let est = estimation_wires(k);
    for l in &est {
        if a.has_wire(l) {
            return Err(Error::BadParam(format!("estimation label {l} collides with a wire")));
        }
    }

    let mut out = Circuit::new();
    merge_wires(&mut out, a)?;

    let sel = match mode {
        PowerMode::Literal => {
            let powers: Vec<Circuit> = (0..1usize << k).map(|j| power(a, j)).collect();
            let refs: Vec<&Circuit> = powers.iter().collect();
            select(&refs, &vec![0.0; refs.len()], &est)?
        }
        PowerMode::Binary => {
            let mut assembled = Circuit::new();
            merge_wires(&mut assembled, a)?;
            for l in &est {
                assembled.add_wire(l.clone(), Role::Workspace)?;
            }
            for (pos, l) in est.iter().enumerate() {
                let pw = power(a, 1usize << (k - 1 - pos));
                let ctl = control(&pw, l, Role::Workspace)?;
                merge_wires(&mut assembled, &ctl.circuit)?;
                assembled.append_circuit(&ctl.circuit)?;
            }
            TransformOutput {
                circuit: assembled,
                cost: crate::transforms::CostDelta { ds: 0, da: 0, dh: 0 },
            }
        }
    };
    merge_wires(&mut out, &sel.circuit)?;

    let h_layer: Vec<Gate> = est
        .iter()
        .map(|l| out.single(l, SingleGate::H))
        .collect::<Result<_>>()?;
    out.append_layer(h_layer)?;
    out.append_circuit(&sel.circuit)?;

    let mut qft = Circuit::with_wires(est.iter().map(|l| (l.clone(), Role::Workspace)))?;
    build_qft_on(&mut qft, &est)?;
    out.append_circuit(&invert(&qft))?;

    out.group = a.group.clone();
    if out.group.is_some() {
        let fixed: Vec<Label> = out
            .wires()
            .iter()
            .map(|w| w.label.clone())
            .filter(|l| !a.has_wire(l))
            .collect();
        out.witnesses = crate::transforms::combine_witness_lists(&[a], &out, &fixed)?;
    }
    Ok(out)
}

/// |alpha_t| of the ideal estimation amplitude for eigenphase theta at
/// outcome t with k estimation bits.
pub fn phase_estimate_amplitude(theta: f64, t: u64, k: usize) -> f64 {
    let n = 2f64.powi(k as i32);
    let delta = theta - t as f64 / n;
    let num = (n * delta * PI).sin();
    let den = n * (delta * PI).sin();
    if den.abs() < 1e-12 {
        1.0
    } else {
        (num / den).abs()
    }
}

// ---------------------------------------------------------------------------
// amplitude loader W
// ---------------------------------------------------------------------------

pub fn w_flag_label() -> Label {
    Label::tagged("w", Label::atom("flag"))
}

/// Amplitude loader: W|0^m> = ||alpha||_1^{-1/2} sum_j sqrt|alpha_j| |j>
/// over the given index wires, built as a binary-split rotation tree whose
/// multi-controlled rotations are compiled through the control pass.
pub fn build_w(alpha: &[Cx<f64>], wires: &[Label]) -> Result<Circuit> {
    build_w_flagged(alpha, wires, &w_flag_label())
}

/// [`build_w`] with an explicit flag label (callers embedding the loader
/// pick a collision-free one).
pub fn build_w_flagged(alpha: &[Cx<f64>], wires: &[Label], flag: &Label) -> Result<Circuit> {
    let k = alpha.len();
    let m = wires.len();
    if k > 1usize << m {
        return Err(Error::BadParam(format!("{k} coefficients need more than {m} index wires")));
    }
    let weights: Vec<f64> = alpha.iter().map(|a| a.norm()).collect();
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::BadParam("amplitude loader needs a non-zero vector".into()));
    }
    let mut c = Circuit::with_wires(wires.iter().map(|l| (l.clone(), Role::Active)))?;
    if m == 0 {
        return Ok(c);
    }
    let flag = flag.clone();
    c.add_wire(flag.clone(), Role::Workspace)?;

    // mass of the subtree at (level, prefix)
    let mass = |level: usize, prefix: usize| -> f64 {
        weights
            .iter()
            .enumerate()
            .filter(|(j, _)| j >> (m - level) == prefix)
            .map(|(_, w)| *w)
            .sum()
    };

    for level in 0..m {
        for prefix in 0..1usize << level {
            let total = mass(level, prefix);
            if total <= 0.0 {
                continue;
            }
            let m1 = mass(level + 1, (prefix << 1) | 1);
            let theta = 2.0 * ((m1 / total).sqrt().min(1.0)).asin();
            if level == 0 {
                c.append_layer([c.single(&wires[0], SingleGate::Ry(theta))?])?;
                continue;
            }
            // multi-controlled rotation: test the prefix into the flag,
            // rotate off the flag, untest
            let prefix_wires = &wires[..level];
            let x_layer: Vec<Gate> = prefix_wires
                .iter()
                .enumerate()
                .filter(|(pos, _)| prefix >> (level - 1 - pos) & 1 == 0)
                .map(|(_, l)| c.single(l, SingleGate::X))
                .collect::<Result<_>>()?;
            let test = c.eq(level as u32, &flag, prefix_wires.iter())?;
            if !x_layer.is_empty() {
                c.append_layer(x_layer.clone())?;
            }
            c.append_layer([test.clone()])?;
            let mut rot = Circuit::with_wires([(wires[level].clone(), Role::Active)])?;
            let g = rot.single(&wires[level], SingleGate::Ry(theta))?;
            rot.append_layer([g])?;
            let controlled = control(&rot, &flag, Role::Workspace)?;
            for w in controlled.circuit.wires() {
                if !c.has_wire(&w.label) {
                    c.add_wire(w.label.clone(), w.role)?;
                }
            }
            c.append_circuit(&controlled.circuit)?;
            c.append_layer([test])?;
            if !x_layer.is_empty() {
                c.append_layer(x_layer)?;
            }
        }
    }
    Ok(c)
}

// ---------------------------------------------------------------------------
// linear combination of unitaries
// ---------------------------------------------------------------------------

pub fn lcu_index_wires(k: usize) -> Vec<Label> {
    lcu_index_wires_tagged(k, "lcu")
}

pub fn lcu_index_wires_tagged(k: usize, tag: &str) -> Vec<Label> {
    (1..=index_width(k) as i64)
        .map(|i| Label::tagged(tag, Label::idx(i)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct LcuBuild {
    pub circuit: Circuit,
    /// ||alpha||_1.
    pub l1: f64,
    /// L = ||sum_i alpha_i U_i |0^n>|| (state variant) or 1 (oblivious).
    pub l: f64,
    /// Amplification probability used: (L / l1)^2 or 1 / l1^2.
    pub p: f64,
}

/// W, select, W-dagger: the core block both LCU variants amplify.
fn lcu_prepare_core(
    circuits: &[&Circuit],
    alpha: &[Cx<f64>],
    tag: &str,
) -> Result<(Circuit, Vec<Label>)> {
    if circuits.is_empty() {
        return Err(Error::BadParam("lcu needs at least one circuit".into()));
    }
    if circuits.len() != alpha.len() {
        return Err(Error::BadParam("lcu needs one coefficient per circuit".into()));
    }
    let index = lcu_index_wires_tagged(circuits.len(), tag);
    let phases: Vec<f64> = alpha
        .iter()
        .map(|a| if a.norm() == 0.0 { 0.0 } else { a.arg() })
        .collect();
    let w = build_w_flagged(alpha, &index, &Label::tagged(tag, Label::atom("wflag")))?;
    let sel = select(circuits, &phases, &index)?;

    // the loader's index wires are workspace in the assembled circuit
    let mut loader = Circuit::new();
    for wire in w.wires() {
        let role = if wire.role == Role::Active {
            Role::Workspace
        } else {
            wire.role
        };
        loader.add_wire(wire.label.clone(), role)?;
    }
    loader.layers = w.layers.clone();

    let mut core = Circuit::new();
    merge_wires(&mut core, &sel.circuit)?;
    merge_wires(&mut core, &loader)?;
    core.append_circuit(&loader)?;
    core.append_circuit(&sel.circuit)?;
    core.append_circuit(&invert(&loader))?;
    core.group = sel.circuit.group.clone();
    core.witnesses = if core.group.is_some() {
        let fixed: Vec<Label> = core
            .wires()
            .iter()
            .map(|x| x.label.clone())
            .filter(|l| !sel.circuit.has_wire(l))
            .collect();
        crate::transforms::combine_witness_lists(&[&sel.circuit], &core, &fixed)?
    } else {
        Vec::new()
    };
    Ok((core, index))
}

/// Prepare (1/L) sum_i alpha_i U_i |0^n> exactly, where each circuit
/// prepares U_i|0^n> from zeros with restored workspace. L is computed by
/// one build-time simulation of each part.
pub fn lcu_state(circuits: &[&Circuit], alpha: &[Cx<f64>]) -> Result<LcuBuild> {
    let l1: f64 = alpha.iter().map(|a| a.norm()).sum();
    if l1 <= 0.0 {
        return Err(Error::BadParam("lcu needs a non-zero coefficient vector".into()));
    }
    let mut actives = circuits
        .first()
        .ok_or_else(|| Error::BadParam("lcu needs at least one circuit".into()))?
        .active_labels();
    actives.sort();
    let mut acc: Vec<Cx<f64>> = vec![Cx::new(0.0, 0.0); 1 << actives.len()];
    for (ci, coeff) in circuits.iter().zip(alpha) {
        let st = run_dense::<f64>(ci, &Input::Zeros)?;
        let (vec, leak) = st.project_rest_zero(&actives)?;
        if leak > 1e-9 {
            return Err(Error::BadParam(
                "lcu part does not restore its workspace on |0...0>".into(),
            ));
        }
        for (a, v) in acc.iter_mut().zip(vec) {
            *a += *coeff * v;
        }
    }
    let l = crate::linalg::vec_norm(&acc);
    if l < 1e-12 {
        return Err(Error::BadParam(format!("lcu norm L = {l} vanishes")));
    }

    let tag = fresh_tag("lcu", circuits);
    let (core, index) = lcu_prepare_core(circuits, alpha, &tag)?;
    let p = (l / l1).powi(2).min(1.0);
    if p >= 1.0 - 1e-12 {
        return Ok(LcuBuild { circuit: core, l1, l, p });
    }

    let flag = Label::tagged(&tag, Label::atom("flag"));
    let mut d = Circuit::new();
    for il in &index {
        d.add_wire(il.clone(), Role::Workspace)?;
    }
    d.add_wire(flag.clone(), Role::Workspace)?;
    let test = d.eq(0, &flag, index.iter())?;
    d.append_layer([test])?;
    d.group = core.group.clone();
    if let Some(group) = &d.group {
        // the group acts on active labels, none of which d touches; record
        // identity extensions on d's wires
        d.witnesses = group
            .generators()?
            .into_iter()
            .map(|g| {
                let ext = LabelPermutation::identity(d.wires().iter().map(|w| w.label.clone()));
                SymmetryWitness::new(g, ext)
            })
            .collect();
    }
    let aa = amplitude_amplify(&core, &d, &flag, &Prob::Float(p))?;
    Ok(LcuBuild { circuit: aa.circuit, l1, l, p })
}

/// Implement sum_i alpha_i U_i as a unitary on arbitrary inputs (oblivious
/// variant); the combination must itself be unitary, which is verified by
/// dense extraction when feasible unless `trusted` is set.
pub fn lcu_oblivious(circuits: &[&Circuit], alpha: &[Cx<f64>], trusted: bool) -> Result<LcuBuild> {
    let l1: f64 = alpha.iter().map(|a| a.norm()).sum();
    if l1 <= 0.0 {
        return Err(Error::BadParam("lcu needs a non-zero coefficient vector".into()));
    }
    if !trusted {
        let n_active = circuits
            .first()
            .ok_or_else(|| Error::BadParam("lcu needs at least one circuit".into()))?
            .active_labels()
            .len();
        if n_active <= 10 {
            let mut sum = crate::linalg::CMat::<f64>::zeros(1 << n_active, 1 << n_active);
            for (ci, coeff) in circuits.iter().zip(alpha) {
                let u = active_unitary::<f64>(ci, 1e-9)?;
                sum = sum.add(&u.scale(*coeff));
            }
            if !sum.is_unitary(1e-9) {
                return Err(Error::BadParam(
                    "the requested linear combination is not unitary".into(),
                ));
            }
        }
    }
    let tag = fresh_tag("lcu", circuits);
    let (core, _) = lcu_prepare_core(circuits, alpha, &tag)?;
    let p = (1.0 / (l1 * l1)).min(1.0);
    if p >= 1.0 - 1e-12 {
        return Ok(LcuBuild { circuit: core, l1, l: 1.0, p });
    }
    let aa = oblivious_aa(&core, &Prob::Float(p))?;
    Ok(LcuBuild { circuit: aa.circuit, l1, l: 1.0, p })
}

// ---------------------------------------------------------------------------
// SWAP test
// ---------------------------------------------------------------------------

pub fn swap_test_labels() -> (Label, Label, Label, Label) {
    (
        Label::atom("phi"),
        Label::atom("psi"),
        Label::atom("ctl"),
        Label::atom("anc"),
    )
}

/// The five-layer S_2-symmetric SWAP test on wires {phi, psi, ctl, anc}:
/// Pr[ctl = 1] = 1/2 - |<phi|psi>|^2 / 2. The ancilla mediates the swap so
/// that exchanging phi and psi only permutes gates inside each layer.
pub fn build_swap_test() -> Result<Circuit> {
    let (phi, psi, ctl, anc) = swap_test_labels();
    let mut c = Circuit::with_wires([
        (phi.clone(), Role::Active),
        (psi.clone(), Role::Active),
        (ctl.clone(), Role::Workspace),
        (anc.clone(), Role::Workspace),
    ])?;
    c.append_layer([c.single(&ctl, SingleGate::H)?])?;
    let parity = [c.cnot(&phi, &anc)?, c.cnot(&psi, &anc)?];
    c.append_layer(parity.clone())?;
    c.append_layer([
        c.thr(2, &phi, [&anc, &ctl])?,
        c.thr(2, &psi, [&anc, &ctl])?,
    ])?;
    c.append_layer(parity)?;
    c.append_layer([c.single(&ctl, SingleGate::H)?])?;

    c.group = Some(GroupSpec::full_symmetric([phi.clone(), psi.clone()]));
    let sigma = LabelPermutation::swap([phi.clone(), psi.clone()], &phi, &psi);
    let ext = sigma.extend_identity([ctl, anc])?;
    c.witnesses = vec![SymmetryWitness::new(sigma, ext)];
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{overlap, vec_norm, CMat};
    use crate::sim::extract_unitary;
    use crate::symmetry::verify_symmetric;
    use num_complex::Complex;

    type C64 = Complex<f64>;

    #[test]
    fn rational_to_f64_handles_big_values() {
        let r = BigRational::new(BigInt::from(3), BigInt::from(8));
        assert_eq!(rational_to_f64(&r), 0.375);
        let big = BigInt::from(4).pow(80u32);
        let r = BigRational::new(&big - 1, big.clone());
        assert!((rational_to_f64(&r) - 1.0).abs() < 1e-12);
        let tiny = BigRational::new(BigInt::from(3), BigInt::from(10).pow(200u32));
        let f = rational_to_f64(&tiny);
        assert!(f > 0.0 && f < 1e-190);
    }

    #[test]
    fn aa_params_match_worked_examples() {
        // p = 1/4 -> K = 2; p = 1/2 -> K = 2
        let p = AaParams::derive(&Prob::exact(1, 4), false).unwrap();
        assert_eq!(p.k, 2);
        let p = AaParams::derive(&Prob::exact(1, 2), false).unwrap();
        assert_eq!(p.k, 2);
        assert!(AaParams::derive(&Prob::exact(1, 1), false).is_err());
        assert!(AaParams::derive(&Prob::exact(0, 1), false).is_err());
    }

    /// n=2, A = Ry(pi/2) x Ry(pi/2), D flags |11>, p = 1/4 -> exactly |11>.
    #[test]
    fn aa_amplifies_uniform_to_all_ones() {
        let labels: Vec<Label> = (1..=2).map(Label::idx).collect();
        let mut a = Circuit::with_wires(labels.iter().map(|l| (l.clone(), Role::Active))).unwrap();
        let layer: Vec<Gate> = labels
            .iter()
            .map(|l| a.single(l, SingleGate::Ry(PI / 2.0)))
            .collect::<Result<_>>()
            .unwrap();
        a.append_layer(layer).unwrap();

        let flag = Label::atom("flag");
        let mut d = Circuit::with_wires(
            labels
                .iter()
                .map(|l| (l.clone(), Role::Active))
                .chain([(flag.clone(), Role::Workspace)]),
        )
        .unwrap();
        let g = d.thr(2, &flag, labels.iter()).unwrap();
        d.append_layer([g]).unwrap();

        let aa = amplitude_amplify(&a, &d, &flag, &Prob::exact(1, 4)).unwrap();
        assert_eq!(aa.params.k, 2);
        let st = run_dense::<f64>(&aa.circuit, &Input::Zeros).unwrap();
        let (active, leak) = st.project_rest_zero(&labels).unwrap();
        assert!(leak < 1e-12, "workspace leak {leak}");
        assert!((active[3].norm() - 1.0).abs() < 1e-9);

        // intermediate overlaps: after j blocks the good-state overlap is
        // sin((2j+1) theta)
        for (j, end) in aa.block_ends.iter().enumerate() {
            let st =
                crate::sim::run_dense_prefix::<f64>(&aa.circuit, &Input::Zeros, *end).unwrap();
            // good state: |11> flag=0 rot=1 kick=|->
            let mut good = vec![C64::new(0.0, 0.0); st.amps.len()];
            let order = &st.wire_order;
            let bit = |l: &Label| {
                1usize << (order.len() - 1 - order.iter().position(|x| x == l).unwrap())
            };
            let base = bit(&Label::idx(1)) | bit(&Label::idx(2)) | bit(&aa.rot);
            let s = std::f64::consts::FRAC_1_SQRT_2;
            good[base] = C64::new(s, 0.0);
            good[base | bit(&aa.kick)] = C64::new(-s, 0.0);
            let got = overlap(&good, &st.amps);
            let expect = ((2 * j + 1) as f64 * aa.params.theta).sin();
            assert!(
                (got - expect).abs() < 1e-9,
                "block {j}: overlap {got} vs {expect}"
            );
        }
    }

    /// 1-qubit U = X via A = (X (x) Ry(2pi/3)) with p = 1/4.
    #[test]
    fn oblivious_aa_implements_x() {
        let q = Label::atom("q");
        let w = Label::atom("w");
        let mut a =
            Circuit::with_wires([(q.clone(), Role::Active), (w.clone(), Role::Workspace)]).unwrap();
        let gamma0 = 2.0 * (0.5f64).acos(); // cos(gamma0/2) = 1/2
        let layer = vec![
            a.single(&q, SingleGate::X).unwrap(),
            a.single(&w, SingleGate::Ry(gamma0)).unwrap(),
        ];
        a.append_layer(layer).unwrap();

        let aa = oblivious_aa(&a, &Prob::exact(1, 4)).unwrap();
        let u = active_unitary::<f64>(&aa.circuit, 1e-9).unwrap();
        let x = SingleGate::X.matrix::<f64>();
        let phase = u[(1, 0)] / x[(1, 0)];
        assert!((phase.norm() - 1.0).abs() < 1e-9);
        assert!(u.sub(&x.scale(phase)).max_abs() < 1e-9);
    }

    #[test]
    fn qft_matches_dft_matrix() {
        for k in 1..=5usize {
            let c = build_qft(k).unwrap();
            let u = extract_unitary::<f64>(&c).unwrap();
            let n = 1usize << k;
            let mut dft = CMat::<f64>::zeros(n, n);
            let s = 1.0 / (n as f64).sqrt();
            for x in 0..n {
                for y in 0..n {
                    let ang = 2.0 * PI * (x * y % n) as f64 / n as f64;
                    dft[(y, x)] = C64::new(s * ang.cos(), s * ang.sin());
                }
            }
            assert!(
                u.sub(&dft).max_abs() < 1e-9,
                "qft k={k} differs by {}",
                u.sub(&dft).max_abs()
            );
        }
        let c = build_qft(3).unwrap();
        let u = extract_unitary::<f64>(&c).unwrap();
        let ui = extract_unitary::<f64>(&invert(&c)).unwrap();
        assert!(u.mul(&ui).sub(&CMat::identity(8)).max_abs() < 1e-9);
    }

    fn phase_circuit(phi: f64) -> Circuit {
        let q = Label::atom("q");
        let mut c = Circuit::with_wires([(q.clone(), Role::Active)]).unwrap();
        let g = c.single(&q, SingleGate::P(phi)).unwrap();
        c.append_layer([g]).unwrap();
        c
    }

    #[test]
    fn qpe_exact_phase_peaks_at_t() {
        // A = P(pi): theta = 1/2; k = 2 -> t = 2 with probability 1
        let a = phase_circuit(PI);
        let c = qpe(&a, 0.25).unwrap();
        let st = run_dense::<f64>(&c, &Input::bits([(Label::atom("q"), true)])).unwrap();
        let est = estimation_wires(2);
        let p_t2 = st
            .probability(&[(est[0].clone(), true), (est[1].clone(), false)])
            .unwrap();
        assert!((p_t2 - 1.0).abs() < 1e-9, "got {p_t2}");

        // A = I: t = 0 with probability 1
        let a = phase_circuit(0.0);
        let c = qpe(&a, 0.25).unwrap();
        let st = run_dense::<f64>(&c, &Input::bits([(Label::atom("q"), true)])).unwrap();
        let p_t0 = st
            .probability(&[(est[0].clone(), false), (est[1].clone(), false)])
            .unwrap();
        assert!((p_t0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn qpe_amplitudes_match_formula() {
        let theta = 0.137f64;
        let k = 3usize;
        let a = phase_circuit(2.0 * PI * theta);
        let c = qpe(&a, 1.0 / 8.0).unwrap();
        let st = run_dense::<f64>(&c, &Input::bits([(Label::atom("q"), true)])).unwrap();
        let est = estimation_wires(k);
        for t in 0..1u64 << k {
            let pred: Vec<(Label, bool)> = est
                .iter()
                .enumerate()
                .map(|(pos, l)| (l.clone(), t >> (k - 1 - pos) & 1 == 1))
                .collect();
            let p = st.probability(&pred).unwrap();
            let expect = phase_estimate_amplitude(theta, t, k).powi(2);
            assert!((p - expect).abs() < 1e-9, "t={t}: {p} vs {expect}");
        }
    }

    #[test]
    fn qpe_binary_mode_agrees() {
        let theta = 0.3123f64;
        let a = phase_circuit(2.0 * PI * theta);
        let lit = qpe_with_mode(&a, 0.25, PowerMode::Literal).unwrap();
        let bin = qpe_with_mode(&a, 0.25, PowerMode::Binary).unwrap();
        assert!(bin.gate_count() < lit.gate_count());
        let input = Input::bits([(Label::atom("q"), true)]);
        let st_l = run_dense::<f64>(&lit, &input).unwrap();
        let st_b = run_dense::<f64>(&bin, &input).unwrap();
        let est = estimation_wires(2);
        for t in 0..4u64 {
            let pred: Vec<(Label, bool)> = est
                .iter()
                .enumerate()
                .map(|(pos, l)| (l.clone(), t >> (1 - pos) & 1 == 1))
                .collect();
            let pl = st_l.probability(&pred).unwrap();
            let pb = st_b.probability(&pred).unwrap();
            assert!((pl - pb).abs() < 1e-9);
        }
    }

    #[test]
    fn w_loader_profiles() {
        let wires = vec![Label::idx(1)];
        let w = build_w(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0)], &wires).unwrap();
        let st = run_dense::<f64>(&w, &Input::Zeros).unwrap();
        let (v, leak) = st.project_rest_zero(&wires).unwrap();
        assert!(leak < 1e-12);
        assert!((v[0].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((v[1].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);

        let w = build_w(&[C64::new(3.0, 0.0), C64::new(1.0, 0.0)], &wires).unwrap();
        let st = run_dense::<f64>(&w, &Input::Zeros).unwrap();
        let (v, _) = st.project_rest_zero(&wires).unwrap();
        assert!((v[0].re - 3f64.sqrt() / 2.0).abs() < 1e-9);
        assert!((v[1].re - 0.5).abs() < 1e-9);

        let w = build_w(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], &wires).unwrap();
        let st = run_dense::<f64>(&w, &Input::Zeros).unwrap();
        let (v, _) = st.project_rest_zero(&wires).unwrap();
        assert!((v[0].norm() - 1.0).abs() < 1e-9);

        let wires2 = vec![Label::idx(1), Label::idx(2)];
        let alpha: Vec<C64> = [0.3, 1.2, 0.01, 2.4].iter().map(|x| C64::new(*x, 0.0)).collect();
        let w = build_w(&alpha, &wires2).unwrap();
        let st = run_dense::<f64>(&w, &Input::Zeros).unwrap();
        let (v, leak) = st.project_rest_zero(&wires2).unwrap();
        assert!(leak < 1e-12);
        let l1: f64 = alpha.iter().map(|a| a.norm()).sum();
        for (j, a) in alpha.iter().enumerate() {
            assert!((v[j].re - (a.norm() / l1).sqrt()).abs() < 1e-9);
        }
    }

    fn prep_circuit(gates: &[(usize, SingleGate)], n: usize) -> Circuit {
        let labels: Vec<Label> = (1..=n as i64).map(Label::idx).collect();
        let mut c = Circuit::with_wires(labels.iter().map(|l| (l.clone(), Role::Active))).unwrap();
        for (wire, g) in gates {
            let gate = c.single(&labels[*wire], g.clone()).unwrap();
            c.append_layer([gate]).unwrap();
        }
        c
    }

    #[test]
    fn lcu_state_prepares_plus_and_zero() {
        // (I + X)/sqrt2 |0> = |+>, L = 1
        let ci = prep_circuit(&[], 1);
        let cx = prep_circuit(&[(0, SingleGate::X)], 1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let alpha = [C64::new(s, 0.0), C64::new(s, 0.0)];
        let b = lcu_state(&[&ci, &cx], &alpha).unwrap();
        assert!((b.l - 1.0).abs() < 1e-9);
        let st = run_dense::<f64>(&b.circuit, &Input::Zeros).unwrap();
        let (v, leak) = st.project_rest_zero(&[Label::idx(1)]).unwrap();
        assert!(leak < 1e-9);
        assert!((v[0].norm() - s).abs() < 1e-8);
        assert!((v[1].norm() - s).abs() < 1e-8);

        // (I + Z)/2 |0> = |0>, L = 1
        let cz = prep_circuit(&[(0, SingleGate::Z)], 1);
        let alpha = [C64::new(0.5, 0.0), C64::new(0.5, 0.0)];
        let b = lcu_state(&[&ci, &cz], &alpha).unwrap();
        assert!((b.l - 1.0).abs() < 1e-9);
        let st = run_dense::<f64>(&b.circuit, &Input::Zeros).unwrap();
        let (v, leak) = st.project_rest_zero(&[Label::idx(1)]).unwrap();
        assert!(leak < 1e-9);
        assert!((v[0].norm() - 1.0).abs() < 1e-8);

        // k = 1 passes through
        let ch = prep_circuit(&[(0, SingleGate::H)], 1);
        let b = lcu_state(&[&ch], &[C64::new(1.0, 0.0)]).unwrap();
        let st = run_dense::<f64>(&b.circuit, &Input::Zeros).unwrap();
        let (v, _) = st.project_rest_zero(&[Label::idx(1)]).unwrap();
        assert!((v[0].norm() - s).abs() < 1e-9);
    }

    #[test]
    fn oblivious_lcu_hadamard_from_x_and_z() {
        let cx = prep_circuit(&[(0, SingleGate::X)], 1);
        let cz = prep_circuit(&[(0, SingleGate::Z)], 1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let b = lcu_oblivious(&[&cx, &cz], &[C64::new(s, 0.0), C64::new(s, 0.0)], false).unwrap();
        let u = active_unitary::<f64>(&b.circuit, 1e-9).unwrap();
        let h = SingleGate::H.matrix::<f64>();
        let phase = u[(0, 0)] / h[(0, 0)];
        assert!((phase.norm() - 1.0).abs() < 1e-6);
        assert!(u.sub(&h.scale(phase)).max_abs() < 1e-6);
    }

    #[test]
    fn oblivious_lcu_rejects_non_unitary_sum() {
        let ci = prep_circuit(&[], 1);
        let cx = prep_circuit(&[(0, SingleGate::X)], 1);
        let alpha = [C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        assert!(lcu_oblivious(&[&ci, &cx], &alpha, false).is_err());
    }

    #[test]
    fn swap_test_probability_and_symmetry() {
        let c = build_swap_test().unwrap();
        assert_eq!(c.layers.len(), 5);
        assert!(verify_symmetric(&c).unwrap().passed());

        let (phi, psi, ctl, _) = swap_test_labels();
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let rand_qubit = |rng: &mut rand_chacha::ChaCha8Rng| {
                let a = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let b = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
                [a / n, b / n]
            };
            let qp = rand_qubit(&mut rng);
            let qq = rand_qubit(&mut rng);
            let st = run_dense::<f64>(
                &c,
                &Input::Product([(phi.clone(), qp), (psi.clone(), qq)].into_iter().collect()),
            )
            .unwrap();
            let p1 = st.probability(&[(ctl.clone(), true)]).unwrap();
            let ip = (qp[0].conj() * qq[0] + qp[1].conj() * qq[1]).norm_sqr();
            assert!((p1 - (0.5 - 0.5 * ip)).abs() < 1e-9);
        }

        let st = run_dense::<f64>(&c, &Input::Zeros).unwrap();
        assert!(st.probability(&[(ctl.clone(), true)]).unwrap() < 1e-12);
        let st = run_dense::<f64>(&c, &Input::bits([(phi, true)])).unwrap();
        assert!((st.probability(&[(ctl, true)]).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn lcu_state_random_combination_matches_oracle() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let n = 2usize;
            let k = rng.gen_range(2..=3usize);
            let mut parts = Vec::new();
            for _ in 0..k {
                let mut gates = Vec::new();
                for _ in 0..3 {
                    let wire = rng.gen_range(0..n);
                    let g = match rng.gen_range(0..3) {
                        0 => SingleGate::Ry(rng.gen_range(0.0..3.0)),
                        1 => SingleGate::P(rng.gen_range(0.0..3.0)),
                        _ => SingleGate::H,
                    };
                    gates.push((wire, g));
                }
                parts.push(prep_circuit(&gates, n));
            }
            let alpha: Vec<C64> = (0..k)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let refs: Vec<&Circuit> = parts.iter().collect();
            let actives: Vec<Label> = (1..=n as i64).map(Label::idx).collect();
            let mut acc = vec![C64::new(0.0, 0.0); 1 << n];
            for (ci, coeff) in refs.iter().zip(&alpha) {
                let st = run_dense::<f64>(ci, &Input::Zeros).unwrap();
                for (a, v) in acc.iter_mut().zip(&st.amps) {
                    *a += *coeff * v;
                }
            }
            let l = vec_norm(&acc);
            if l < 1e-6 {
                continue;
            }
            for a in acc.iter_mut() {
                *a /= C64::new(l, 0.0);
            }
            let b = lcu_state(&refs, &alpha).unwrap();
            let st = run_dense::<f64>(&b.circuit, &Input::Zeros).unwrap();
            let (v, leak) = st.project_rest_zero(&actives).unwrap();
            assert!(leak < 1e-8, "leak {leak}");
            let fid = overlap(&acc, &v);
            assert!(fid >= 1.0 - 1e-8, "fidelity {fid}");
        }
    }
}
