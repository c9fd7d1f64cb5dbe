//! The acceptance experiments: one runner per criterion, each returning the
//! measured quantities, the pinned requirement and a verdict. The
//! integration suite asserts every verdict; the CLI prints the table.

use crate::circuit::{Circuit, Role, SingleGate};
use crate::classical::{
    dag_final_values, dag_to_reversible, eval_reversible, reversible_to_dag, synth_partition_boolean,
    DagKind, PartitionSymSpec, ThresholdDag,
};
use crate::error::Result;
use crate::labels::Label;
use crate::linalg::{overlap, CMat};
use crate::scalar::Cx;
use crate::sim::{
    gate_unitary_on, run_dense, run_dense_prefix, run_sparse, Input, SparseRun,
};
use crate::stateprep::{
    dicke, dicke_vector, dicke_wires, phase_state, phase_state_coeff_wires, symmetric_state,
    PhasePolynomial,
};
use crate::subroutines::{
    build_swap_test, estimation_wires, lcu_oblivious, lcu_state, phase_estimate_amplitude, qpe,
    swap_test_labels,
};
use crate::symmetry::verify_symmetric;
use crate::synth::{
    perm_symmetric_basis, random_partition_symmetric_unitary, random_unitary,
    symmetric_subspace_unitary, synth_partition_symmetric,
};
use crate::xorsat::{
    build_full, chooser_cache, classical_solve, copier_gate_count, flag_probability_cached,
    ChooserParams, XorSatInstance,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::HashMap;
use std::time::Instant;

/// One global constant for the Dicke gate-count form s <= c n (k+1)^{1/4};
/// the measured constant is asserted against this pin.
pub const DICKE_GATE_CONSTANT_CAP: f64 = 16.0;
/// Pinned cap on the measured select-cost constant c1 with
/// cost <= c1 (k log k + sum s(C_j)).
pub const SELECT_COST_CAP: f64 = 64.0;

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub measured: String,
    pub requirement: String,
    pub passed: bool,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} [{}] {} | measured: {} | requires: {} ({:.1}s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.requirement,
            self.seconds
        )
    }
}

fn result(
    id: usize,
    name: &'static str,
    passed: bool,
    measured: String,
    requirement: &str,
    start: Instant,
) -> CriterionResult {
    CriterionResult {
        id,
        name,
        measured,
        requirement: requirement.to_string(),
        passed,
        seconds: start.elapsed().as_secs_f64(),
    }
}

// ---------------------------------------------------------------------------
// 1: SWAP test
// ---------------------------------------------------------------------------

pub fn criterion_1_swap_test() -> Result<CriterionResult> {
    let start = Instant::now();
    let c = build_swap_test()?;
    let witness_ok = verify_symmetric(&c)?.passed();
    let (phi, psi, ctl, _) = swap_test_labels();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mut qubit = || -> [Cx<f64>; 2] {
            let a: Cx<f64> = Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let b: Cx<f64> = Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let n: f64 = (a.norm_sqr() + b.norm_sqr()).sqrt();
            [a / n, b / n]
        };
        let (qp, qq) = (qubit(), qubit());
        let st = run_dense::<f64>(
            &c,
            &Input::Product([(phi.clone(), qp), (psi.clone(), qq)].into_iter().collect()),
        )?;
        let p1 = st.probability(&[(ctl.clone(), true)])?;
        let ip = (qp[0].conj() * qq[0] + qp[1].conj() * qq[1]).norm_sqr();
        worst = worst.max((p1 - (0.5 - 0.5 * ip)).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    let passed = witness_ok && worst < 1e-9 && elapsed < 1.0;
    Ok(result(
        1,
        "swap test probability & symmetry",
        passed,
        format!("max |dP| = {worst:.2e}, witness {witness_ok}, {elapsed:.2}s"),
        "|dP| < 1e-9 over 100 random pairs, witness verifies, < 1 s",
        start,
    ))
}

// ---------------------------------------------------------------------------
// 2: Dicke states
// ---------------------------------------------------------------------------

pub fn criterion_2_dicke() -> Result<CriterionResult> {
    let start = Instant::now();
    let mut worst_fid = 1.0f64;
    let mut worst_leak = 0.0f64;
    let mut all_witness = true;
    let mut c_const = 0.0f64;
    for n in 1..=10usize {
        for k in 0..=n {
            let b = dicke(n, k)?;
            all_witness &= verify_symmetric(&b.circuit)?.passed();
            let st = run_dense::<f64>(&b.circuit, &Input::Zeros)?;
            let (v, leak) = st.project_rest_zero(&dicke_wires(n))?;
            worst_leak = worst_leak.max(leak);
            let fid = overlap(&dicke_vector(n, k), &v);
            worst_fid = worst_fid.min(fid);
            let ratio = b.circuit.gate_count() as f64 / (n as f64 * ((k + 1) as f64).powf(0.25));
            c_const = c_const.max(ratio);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let passed = worst_fid >= 1.0 - 1e-9
        && worst_leak < 1e-9
        && all_witness
        && c_const <= DICKE_GATE_CONSTANT_CAP
        && elapsed < 30.0;
    Ok(result(
        2,
        "dicke preparation, all 0<=k<=n<=10",
        passed,
        format!(
            "min fidelity {worst_fid:.12}, max leak {worst_leak:.2e}, witnesses {all_witness}, c = {c_const:.2}, {elapsed:.1}s"
        ),
        "fidelity >= 1-1e-9, workspace restored, witnesses verify, s <= c n (k+1)^(1/4) with one c <= 16, < 30 s",
        start,
    ))
}

// ---------------------------------------------------------------------------
// 3: symmetric state preparation
// ---------------------------------------------------------------------------

pub fn criterion_3_symmetric_state() -> Result<CriterionResult> {
    let start = Instant::now();
    let cases: Vec<(usize, u64)> = (2..=6usize).flat_map(|n| (0..20u64).map(move |t| (n, t))).collect();
    let fids: Vec<f64> = cases
        .par_iter()
        .map(|(n, trial)| {
            let mut rng = ChaCha8Rng::seed_from_u64(300 + *trial + 97 * *n as u64);
            let mut coeffs: Vec<Cx<f64>> = (0..=*n)
                .map(|_| Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            for c in coeffs.iter_mut() {
                *c /= Cx::new(norm, 0.0);
            }
            let circuit = symmetric_state(*n, &coeffs)?;
            let st = run_sparse::<f64>(&circuit, &Input::Zeros)?;
            let (v, leak) = st.project_rest_zero(&dicke_wires(*n))?;
            let mut want = vec![Cx::new(0.0, 0.0); 1 << n];
            for (k, a) in coeffs.iter().enumerate() {
                for (w, d) in want.iter_mut().zip(dicke_vector(*n, k)) {
                    *w += *a * d;
                }
            }
            Ok(overlap(&want, &v) * (1.0 - leak).sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    let worst = fids.into_iter().fold(1.0f64, f64::min);
    let elapsed = start.elapsed().as_secs_f64();
    let passed = worst >= 1.0 - 1e-8 && elapsed < 120.0;
    Ok(result(
        3,
        "symmetric state preparation, n in 2..=6",
        passed,
        format!("min fidelity {worst:.12}, {elapsed:.1}s"),
        "fidelity >= 1-1e-8 over 20 random coefficient vectors per n, < 2 min",
        start,
    ))
}

// ---------------------------------------------------------------------------
// 4: phase states
// ---------------------------------------------------------------------------

pub fn criterion_4_phase_states() -> Result<CriterionResult> {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (n, d) in [(2usize, 1usize), (2, 2), (3, 1), (3, 2), (4, 1)] {
        let c = phase_state(n, d)?;
        if !verify_symmetric(&c)?.passed() {
            return Ok(result(
                4,
                "phase states",
                false,
                format!("witness failed at n={n} d={d}"),
                "exact |P>|phi_P> to 1e-9, witnesses verify",
                start,
            ));
        }
        let m = phase_state_coeff_wires(n, d).len();
        for bits in 0..1usize << m {
            let bitvec: Vec<bool> = (0..m).map(|i| bits >> i & 1 == 1).collect();
            let poly = PhasePolynomial::from_bits(n, d, &bitvec)?;
            let st = run_dense::<f64>(&c, &Input::Bits(poly.input_bits()))?;
            let expected = expected_phase_state(&c, &poly);
            let diff: f64 = st
                .amps
                .iter()
                .zip(&expected)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            worst = worst.max(diff);
        }
    }
    let passed = worst < 1e-9;
    Ok(result(
        4,
        "phase states, exhaustive coefficients",
        passed,
        format!("max amplitude error {worst:.2e}"),
        "output exactly |P>|phi_P> to 1e-9 for (n,d) in {(2,1),(2,2),(3,1),(3,2),(4,1)}",
        start,
    ))
}

fn expected_phase_state(c: &Circuit, poly: &PhasePolynomial) -> Vec<Cx<f64>> {
    let order: Vec<Label> = c
        .canonical_wire_order()
        .iter()
        .map(|id| c.label(*id).clone())
        .collect();
    let nw = order.len();
    let amp = 1.0 / 2f64.powi(poly.n as i32).sqrt();
    let input = poly.input_bits();
    let mut out = vec![Cx::new(0.0, 0.0); 1 << nw];
    for (idx, slot) in out.iter_mut().enumerate() {
        let bit_of = |l: &Label| -> bool {
            let rank = order.iter().position(|x| x == l).unwrap();
            idx >> (nw - 1 - rank) & 1 == 1
        };
        if input.iter().any(|(l, v)| bit_of(l) != *v) {
            continue;
        }
        let x: Vec<bool> = (1..=poly.n as i64).map(|i| bit_of(&Label::idx(i))).collect();
        let sign = if poly.evaluate(&x) { -1.0 } else { 1.0 };
        *slot = Cx::new(sign * amp, 0.0);
    }
    out
}

// ---------------------------------------------------------------------------
// 5: phase estimation
// ---------------------------------------------------------------------------

pub fn criterion_5_qpe() -> Result<CriterionResult> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut worst_amp = 0.0f64;
    let mut worst_good = 1.0f64;
    for k in 1..=4usize {
        for _ in 0..20 {
            let theta: f64 = rng.gen_range(0.0..1.0);
            let q = Label::atom("q");
            let mut a = Circuit::with_wires([(q.clone(), Role::Active)])?;
            let g = a.single(&q, SingleGate::P(2.0 * std::f64::consts::PI * theta))?;
            a.append_layer([g])?;
            let eps = 1.0 / 2f64.powi(k as i32);
            let c = qpe(&a, eps)?;
            let st = run_dense::<f64>(&c, &Input::bits([(q.clone(), true)]))?;
            let est = estimation_wires(k);
            let mut good = 0.0f64;
            for t in 0..1u64 << k {
                let pred: Vec<(Label, bool)> = est
                    .iter()
                    .enumerate()
                    .map(|(pos, l)| (l.clone(), t >> (k - 1 - pos) & 1 == 1))
                    .collect();
                let p = st.probability(&pred)?;
                let expect = phase_estimate_amplitude(theta, t, k).powi(2);
                worst_amp = worst_amp.max((p - expect).abs());
                let mut dist = (theta - t as f64 / 2f64.powi(k as i32)).abs();
                dist = dist.min(1.0 - dist);
                if dist < eps {
                    good += p;
                }
            }
            worst_good = worst_good.min(good);
        }
    }
    let passed = worst_amp < 1e-9 && worst_good >= 0.8;
    Ok(result(
        5,
        "phase estimation, k <= 4, 20 random phases each",
        passed,
        format!("max |dP| {worst_amp:.2e}, min good-estimate probability {worst_good:.4}"),
        "amplitudes match the estimation formula to 1e-9; good-estimate probability >= 4/5",
        start,
    ))
}

// ---------------------------------------------------------------------------
// 6: amplification angle trace
// ---------------------------------------------------------------------------

pub fn criterion_6_aa_trace() -> Result<CriterionResult> {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for n in 2..=8usize {
        for k in 1..=n / 2 {
            let b = dicke(n, k)?;
            if b.block_ends.is_empty() {
                continue;
            }
            let st_order = run_dense_prefix::<f64>(&b.circuit, &Input::Zeros, 0)?.wire_order;
            let bit = |l: &Label| -> usize {
                1usize << (st_order.len() - 1 - st_order.iter().position(|x| x == l).unwrap())
            };
            // good state: |D^n_k'> flag=0 rot=1 kick=|->
            let flag = crate::stateprep::dicke_flag_label();
            let _ = flag;
            let rot = Label::tagged("aa", Label::atom("rot"));
            let kick = Label::tagged("aa", Label::atom("kick"));
            let mut good = vec![Cx::new(0.0, 0.0); 1 << st_order.len()];
            let dv = dicke_vector(n, b.spec.k_reduced);
            let actives = dicke_wires(n);
            let s = std::f64::consts::FRAC_1_SQRT_2;
            for (x, amp) in dv.iter().enumerate() {
                if amp.norm() == 0.0 {
                    continue;
                }
                let mut base = bit(&rot);
                for (pos, l) in actives.iter().enumerate() {
                    if x >> (n - 1 - pos) & 1 == 1 {
                        base |= bit(l);
                    }
                }
                good[base] = amp * s;
                good[base | bit(&kick)] = amp * -s;
            }
            let theta = std::f64::consts::PI / (4 * b.spec.rounds + 2) as f64;
            for (j, end) in b.block_ends.iter().enumerate() {
                let st = run_dense_prefix::<f64>(&b.circuit, &Input::Zeros, *end)?;
                let got = overlap(&good, &st.amps);
                let expect = ((2 * j + 1) as f64 * theta).sin();
                worst = worst.max((got - expect).abs());
            }
        }
    }
    let passed = worst < 1e-9;
    Ok(result(
        6,
        "amplification angle trace on dicke builds, n <= 8",
        passed,
        format!("max |overlap - sin((2j+1)theta)| = {worst:.2e}"),
        "intermediate overlaps equal sin((2j+1)pi/(4K+2)) within 1e-9",
        start,
    ))
}

// ---------------------------------------------------------------------------
// 7: linear combinations of unitaries
// ---------------------------------------------------------------------------

pub fn criterion_7_lcu() -> Result<CriterionResult> {
    let start = Instant::now();
    // state variant: 50 random combinations
    let fids: Vec<f64> = (0..50u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(700 + trial);
            let n = rng.gen_range(1..=3usize);
            let k = rng.gen_range(1..=4usize);
            let labels: Vec<Label> = (1..=n as i64).map(Label::idx).collect();
            let mut parts = Vec::new();
            for _ in 0..k {
                let mut c =
                    Circuit::with_wires(labels.iter().map(|l| (l.clone(), Role::Active)))?;
                for _ in 0..4 {
                    let l = &labels[rng.gen_range(0..n)];
                    let g = match rng.gen_range(0..4) {
                        0 => SingleGate::Ry(rng.gen_range(0.0..3.0)),
                        1 => SingleGate::P(rng.gen_range(0.0..3.0)),
                        2 => SingleGate::H,
                        _ => SingleGate::X,
                    };
                    let gate = c.single(l, g)?;
                    c.append_layer([gate])?;
                }
                parts.push(c);
            }
            let alpha: Vec<Cx<f64>> = (0..k)
                .map(|_| Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let refs: Vec<&Circuit> = parts.iter().collect();
            let mut acc = vec![Cx::new(0.0, 0.0); 1 << n];
            for (ci, coeff) in refs.iter().zip(&alpha) {
                let st = run_dense::<f64>(ci, &Input::Zeros)?;
                for (a, v) in acc.iter_mut().zip(&st.amps) {
                    *a += *coeff * v;
                }
            }
            let l = crate::linalg::vec_norm(&acc);
            if l < 1e-3 {
                return Ok(1.0); // resample-equivalent: skip degenerate draws
            }
            for a in acc.iter_mut() {
                *a /= Cx::new(l, 0.0);
            }
            let b = lcu_state(&refs, &alpha)?;
            let st = run_dense::<f64>(&b.circuit, &Input::Zeros)?;
            let (v, leak) = st.project_rest_zero(&labels)?;
            Ok(overlap(&acc, &v) * (1.0 - leak).sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    let worst_fid = fids.into_iter().fold(1.0f64, f64::min);

    // oblivious variant: 20 random Pauli-expanded unitaries
    let dists: Vec<f64> = (0..20u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(7000 + trial);
            let n = 1 + (trial % 2) as usize;
            let labels: Vec<Label> = (1..=n as i64).map(Label::idx).collect();
            let v = random_unitary(1 << n, &mut rng);
            // Pauli expansion
            let paulis = [SingleGate::X, SingleGate::Y, SingleGate::Z];
            let mut terms: Vec<Circuit> = Vec::new();
            let mut alpha = Vec::new();
            for combo in 0..4usize.pow(n as u32) {
                let mut mat = CMat::<f64>::identity(1);
                let mut c =
                    Circuit::with_wires(labels.iter().map(|l| (l.clone(), Role::Active)))?;
                let mut layer = Vec::new();
                let mut digits = combo;
                for l in labels.iter() {
                    let d = digits % 4;
                    digits /= 4;
                    let m2 = match d {
                        0 => CMat::<f64>::identity(2),
                        i => {
                            layer.push(c.single(l, paulis[i - 1].clone())?);
                            paulis[i - 1].matrix::<f64>()
                        }
                    };
                    mat = mat.kron(&m2);
                }
                if !layer.is_empty() {
                    c.append_layer(layer)?;
                }
                let coeff = v.ntr_inner(&mat);
                terms.push(c);
                alpha.push(coeff);
            }
            let refs: Vec<&Circuit> = terms.iter().collect();
            let b = lcu_oblivious(&refs, &alpha, false)?;
            let got = crate::sim::active_unitary::<f64>(&b.circuit, 1e-8)?;
            Ok(got.sub(&v).max_abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    let worst_dist = dists.into_iter().fold(0.0f64, f64::max);

    let passed = worst_fid >= 1.0 - 1e-8 && worst_dist <= 1e-6;
    Ok(result(
        7,
        "lcu state & oblivious variants",
        passed,
        format!("min state fidelity {worst_fid:.12}, max operator distance {worst_dist:.2e}"),
        "state fidelity >= 1-1e-8 (50 random); Pauli-expanded unitaries to 1e-6 (20 random)",
        start,
    ))
}

// ---------------------------------------------------------------------------
// 8: partition-symmetric synthesis
// ---------------------------------------------------------------------------

pub fn criterion_8_partition_synthesis() -> Result<CriterionResult> {
    let start = Instant::now();
    let shapes: [&[usize]; 4] = [&[2], &[3], &[2, 1], &[2, 2]];
    let mut cases = Vec::new();
    for (si, shape) in shapes.iter().enumerate() {
        for trial in 0..10u64 {
            cases.push((si, *shape, trial));
        }
    }
    let outcomes: Vec<(f64, bool)> = cases
        .par_iter()
        .map(|(si, shape, trial)| {
            let mut rng = ChaCha8Rng::seed_from_u64(800 + 31 * *si as u64 + trial);
            let u = random_partition_symmetric_unitary(shape, &mut rng);
            let out = synth_partition_symmetric(&u, shape, 0, 1e6)?;
            let bound_ok = out.decomposition.l1 <= out.decomposition.l1_bound;
            // operator action column by column through the sparse backend
            let n: usize = shape.iter().sum();
            let labels: Vec<Label> = (1..=n as i64).map(Label::idx).collect();
            let dim = 1usize << n;
            let mut dist = 0.0f64;
            for col in 0..dim {
                let bits: HashMap<Label, bool> = labels
                    .iter()
                    .enumerate()
                    .map(|(pos, l)| (l.clone(), col >> (n - 1 - pos) & 1 == 1))
                    .collect();
                let st = run_sparse::<f64>(&out.circuit, &Input::Bits(bits))?;
                let (v, leak) = st.project_rest_zero(&labels)?;
                for (row, a) in v.iter().enumerate() {
                    dist = dist.max((a - u[(row, col)]).norm());
                }
                dist = dist.max(leak.sqrt());
            }
            Ok((dist, bound_ok))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst_dist = outcomes.iter().map(|(d, _)| *d).fold(0.0f64, f64::max);
    let bounds_ok = outcomes.iter().all(|(_, b)| *b);
    let elapsed = start.elapsed().as_secs_f64();
    let passed = worst_dist <= 1e-6 && bounds_ok;
    Ok(result(
        8,
        "partition-symmetric unitary synthesis",
        passed,
        format!("max operator distance {worst_dist:.2e}, l1 bounds hold: {bounds_ok}, {elapsed:.0}s"),
        "parts (2),(3),(2,1),(2,2) x 10 random: distance <= 1e-6 and ||alpha||_1 <= m/lambda_min",
        start,
    ))
}

// ---------------------------------------------------------------------------
// 9: symmetric-subspace unitaries
// ---------------------------------------------------------------------------

pub fn criterion_9_subspace_unitaries() -> Result<CriterionResult> {
    let start = Instant::now();
    let cases: Vec<(usize, u64)> = (1..=5usize).flat_map(|n| (0..10u64).map(move |t| (n, t))).collect();
    let outcomes: Vec<(f64, f64)> = cases
        .par_iter()
        .map(|(n, trial)| {
            let n = *n;
            let mut rng = ChaCha8Rng::seed_from_u64(900 + 13 * n as u64 + trial);
            let us = random_unitary(n + 1, &mut rng);
            let c = symmetric_subspace_unitary(&us, n)?;
            let mut worst_err = 0.0f64;
            let mut worst_leak = 0.0f64;
            for k in 0..=n {
                let st = run_sparse::<f64>(&c, &Input::Vector(dicke_vector(n, k)))?;
                let (v, leak) = st.project_rest_zero(&dicke_wires(n))?;
                worst_leak = worst_leak.max(leak.sqrt());
                let mut want = vec![Cx::new(0.0, 0.0); 1 << n];
                for j in 0..=n {
                    for (w, d) in want.iter_mut().zip(dicke_vector(n, j)) {
                        *w += us[(j, k)] * d;
                    }
                }
                let err: f64 = want
                    .iter()
                    .zip(&v)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                worst_err = worst_err.max(err);
                // leakage outside the Dicke span
                let mut residual = v.clone();
                for j in 0..=n {
                    let dv = dicke_vector(n, j);
                    let ip: Cx<f64> = crate::linalg::inner(&dv, &residual);
                    for (r, d) in residual.iter_mut().zip(&dv) {
                        *r -= ip * d;
                    }
                }
                worst_leak = worst_leak.max(crate::linalg::vec_norm(&residual));
            }
            Ok((worst_err, worst_leak))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst_err = outcomes.iter().map(|(e, _)| *e).fold(0.0f64, f64::max);
    let worst_leak = outcomes.iter().map(|(_, l)| *l).fold(0.0f64, f64::max);
    let elapsed = start.elapsed().as_secs_f64();
    let passed = worst_err <= 1e-6 && worst_leak <= 1e-6;
    Ok(result(
        9,
        "symmetric-subspace unitaries, n <= 5",
        passed,
        format!("max column error {worst_err:.2e}, max leakage {worst_leak:.2e}, {elapsed:.0}s"),
        "10 random Dicke-basis unitaries per n: column action <= 1e-6, subspace leakage <= 1e-6",
        start,
    ))
}

// ---------------------------------------------------------------------------
// 10: classical conversions
// ---------------------------------------------------------------------------

/// A random S_n-symmetric threshold DAG built from orbit-shaped columns.
pub fn random_symmetric_dag(rng: &mut ChaCha8Rng) -> ThresholdDag {
    let n = rng.gen_range(3..=12usize);
    let mut dag = ThresholdDag::new();
    let inputs: Vec<usize> = (1..=n as i64)
        .map(|i| dag.add_vertex(Label::idx(i), DagKind::Input, vec![]).unwrap())
        .collect();
    // columns are either size n (one vertex per position) or size 1
    let mut columns: Vec<Vec<usize>> = vec![inputs];
    let mut fresh = 0usize;
    let n_cols = rng.gen_range(2..=4usize);
    for _ in 0..n_cols {
        let srcs: Vec<Vec<usize>> = columns.iter().filter(|c| c.len() == n).cloned().collect();
        let pick = rng.gen_range(0..srcs.len());
        let src = &srcs[pick];
        let kind_roll = rng.gen_range(0..4);
        let name = |fresh: &mut usize| {
            *fresh += 1;
            Label::tagged("c", Label::idx(*fresh as i64 - 1))
        };
        let col: Vec<usize> = match kind_roll {
            // single aggregate vertex over the whole column
            0 => {
                let t = rng.gen_range(0..=n as u32);
                let kind = if rng.gen_bool(0.5) { DagKind::Thr(t) } else { DagKind::Eq(t) };
                vec![dag.add_vertex(name(&mut fresh), kind, src.clone()).unwrap()]
            }
            // per-position complement reads
            1 => {
                let t = rng.gen_range(0..n as u32);
                (0..n)
                    .map(|i| {
                        let preds: Vec<usize> =
                            src.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
                        dag.add_vertex(name(&mut fresh), DagKind::Thr(t), preds).unwrap()
                    })
                    .collect()
            }
            // per-position NOT
            2 => (0..n)
                .map(|i| dag.add_vertex(name(&mut fresh), DagKind::Not, vec![src[i]]).unwrap())
                .collect(),
            // aligned pair reads from two size-n columns
            _ => {
                let other = &srcs[rng.gen_range(0..srcs.len())];
                let t = rng.gen_range(1..=2u32);
                (0..n)
                    .map(|i| {
                        let preds = if src[i] == other[i] {
                            vec![src[i]]
                        } else {
                            vec![src[i], other[i]]
                        };
                        dag.add_vertex(name(&mut fresh), DagKind::Eq(t), preds).unwrap()
                    })
                    .collect()
            }
        };
        columns.push(col);
    }
    dag.outputs = columns.last().unwrap().clone();
    dag
}

pub fn criterion_10_classical_conversions() -> Result<CriterionResult> {
    let start = Instant::now();
    let outcomes: Vec<bool> = (0..100u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
            let dag = random_symmetric_dag(&mut rng);
            let inputs = dag.input_names();
            let nbits = inputs.len();
            let rc = dag_to_reversible(&dag)?;
            if rc.gate_count() > 2 * dag.verts.len() {
                return Ok(false);
            }
            let dag2 = reversible_to_dag(&rc)?;
            if dag2.gate_count() > 4 * rc.gate_count() {
                return Ok(false);
            }
            for mask in 0..1usize << nbits {
                let assignment: HashMap<Label, bool> = inputs
                    .iter()
                    .enumerate()
                    .map(|(pos, l)| (l.clone(), mask >> pos & 1 == 1))
                    .collect();
                let dag_vals = dag.eval(&assignment)?;
                let rc_vals = eval_reversible(&rc, &assignment)?;
                for (vid, v) in dag.verts.iter().enumerate() {
                    let wire =
                        rc.wire_id(&crate::classical::vertex_wire_label(&v.name))? as usize;
                    if rc_vals[wire] != dag_vals[vid] {
                        return Ok(false);
                    }
                }
                let finals = dag_final_values(&rc, &dag2, &assignment)?;
                for (label, value) in finals {
                    if value != rc_vals[rc.wire_id(&label)? as usize] {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        })
        .collect::<Result<Vec<bool>>>()?;
    let ok = outcomes.iter().filter(|b| **b).count();
    let passed = ok == 100;
    Ok(result(
        10,
        "classical conversion round trips",
        passed,
        format!("{ok}/100 random symmetric DAGs exact; bounds 2s / 4s enforced"),
        "exhaustive truth-table equality both ways; gate bounds never exceeded",
        start,
    ))
}

// ---------------------------------------------------------------------------
// 11: partition-symmetric Boolean synthesis
// ---------------------------------------------------------------------------

pub fn criterion_11_partition_boolean() -> Result<CriterionResult> {
    let start = Instant::now();
    // exhaustive where the table space is small; random sampling above
    let exhaustive: [&[usize]; 8] = [&[1], &[2], &[3], &[4], &[1, 1], &[2, 1], &[3, 1], &[2, 2]];
    let sampled: [&[usize]; 4] = [&[5], &[6], &[3, 2], &[2, 2, 1]];
    let mut checked = 0usize;
    let mut failures = 0usize;

    let verify_spec = |spec: &PartitionSymSpec| -> Result<bool> {
        let c = synth_partition_boolean(spec)?;
        let n = spec.n_total();
        for mask in 0..1usize << n {
            let bits: Vec<bool> = (0..n).map(|i| mask >> (n - 1 - i) & 1 == 1).collect();
            let mut input = HashMap::new();
            let mut pos = 0usize;
            for (i, sz) in spec.parts.iter().enumerate() {
                for j in 0..*sz {
                    input.insert(crate::classical::part_wire(i, j), bits[pos]);
                    pos += 1;
                }
            }
            let vals = eval_reversible(&c, &input)?;
            let want = spec.apply(&bits);
            let mut pos = 0usize;
            for (i, sz) in spec.parts.iter().enumerate() {
                for j in 0..*sz {
                    let got = vals[c.wire_id(&crate::classical::part_wire(i, j))? as usize];
                    if got != want[pos] {
                        return Ok(false);
                    }
                    pos += 1;
                }
            }
            for w in c.wires() {
                if w.role == Role::Workspace && vals[c.wire_id(&w.label)? as usize] {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    };

    for shape in exhaustive {
        let grid = shape.iter().map(|n| n + 1).product::<usize>();
        let table_bits = shape.len() * grid;
        for combo in 0..1usize << table_bits {
            let tables: Vec<Vec<bool>> = (0..shape.len())
                .map(|i| (0..grid).map(|g| combo >> (i * grid + g) & 1 == 1).collect())
                .collect();
            let spec = PartitionSymSpec {
                parts: shape.to_vec(),
                tables,
            };
            if !spec.is_bijective() {
                continue;
            }
            checked += 1;
            if !verify_spec(&spec)? {
                failures += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1100);
    for shape in sampled {
        let grid = shape.iter().map(|n| n + 1).product::<usize>();
        let mut found = 0usize;
        let mut attempts = 0usize;
        while found < 200 && attempts < 100_000 {
            attempts += 1;
            let tables: Vec<Vec<bool>> = (0..shape.len())
                .map(|_| (0..grid).map(|_| rng.gen_bool(0.5)).collect())
                .collect();
            let spec = PartitionSymSpec {
                parts: shape.to_vec(),
                tables,
            };
            if !spec.is_bijective() {
                continue;
            }
            found += 1;
            checked += 1;
            if !verify_spec(&spec)? {
                failures += 1;
            }
        }
    }
    let passed = failures == 0 && checked > 1000;
    Ok(result(
        11,
        "partition-symmetric boolean synthesis",
        passed,
        format!("{checked} reversible specs verified, {failures} failures"),
        "exhaustive over small table spaces plus sampled larger shapes (grid <= 64): F exact, workspace restored",
        start,
    ))
}

// ---------------------------------------------------------------------------
// 12: XOR-SAT
// ---------------------------------------------------------------------------

pub fn criterion_12_xorsat() -> Result<CriterionResult> {
    let start = Instant::now();
    // (a) exhaustive desk-scale equality with the oracle
    let grid: Vec<(usize, usize)> = (1..=3usize)
        .flat_map(|m| (1..=3usize).map(move |n| (m, n)))
        .collect();
    let mismatch_total: usize = grid
        .par_iter()
        .map(|(m, n)| -> Result<usize> {
            let (m, n) = (*m, *n);
            let params = ChooserParams::derive(m, n, m + 1, n + 1)?;
            let build = build_full(m, n, &params)?;
            let cache = chooser_cache(&build)?;
            let mut mism = 0usize;
            for a_mask in 0..1usize << (m * n) {
                for b_mask in 0..1usize << m {
                    let inst = XorSatInstance::from_bits(m, n, a_mask, b_mask)?;
                    let p = flag_probability_cached(&build, &cache, &inst)?;
                    let want = if classical_solve(&inst) { 1.0 } else { 0.0 };
                    if (p - want).abs() > 1e-9 {
                        mism += 1;
                    }
                }
            }
            Ok(mism)
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum();

    // (b) structural witness verification at default multipliers
    let mut witness_ok = true;
    let mut copier_ok = true;
    for m in 1..=4usize {
        for n in 1..=4usize {
            let params = ChooserParams::with_defaults(m, n)?;
            copier_ok &= crate::xorsat::build_copier(&params)?.gate_count()
                == copier_gate_count(&params);
            let build = build_full(m, n, &params)?;
            witness_ok &= verify_symmetric(&build.circuit)?.passed();
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let passed = mismatch_total == 0 && witness_ok && copier_ok && elapsed < 300.0;
    Ok(result(
        12,
        "xor-sat pipeline",
        passed,
        format!(
            "{mismatch_total} oracle mismatches (m,n <= 3 exhaustive); witnesses at defaults m,n <= 4: {witness_ok}; copier count exact: {copier_ok}; {elapsed:.0}s"
        ),
        "flag probability equals the oracle exactly; structural witnesses verify; copier = mn*mt*nt + m*mt; < 5 min",
        start,
    ))
}

// ---------------------------------------------------------------------------
// 13: global invariant sweep
// ---------------------------------------------------------------------------

pub fn criterion_13_invariant_sweep() -> Result<CriterionResult> {
    let start = Instant::now();
    let mut roster: Vec<(String, Circuit)> = vec![
        ("swap-test".into(), build_swap_test()?),
        ("dicke(3,1)".into(), dicke(3, 1)?.circuit),
        ("dicke(4,2)".into(), dicke(4, 2)?.circuit),
        ("dicke(5,3)".into(), dicke(5, 3)?.circuit),
        ("phasestate(2,2)".into(), phase_state(2, 2)?),
        ("phasestate(3,1)".into(), phase_state(3, 1)?),
        ("qnn-x(3)".into(), crate::synth::qnn_layer(crate::synth::QnnLayerKind::X, 0.7, 3)?),
        ("qnn-zz(3)".into(), crate::synth::qnn_layer(crate::synth::QnnLayerKind::Zz, 0.4, 3)?),
        ("triangle(4)".into(), crate::classical::triangle_reversible(4)?),
    ];
    {
        let mut rng = ChaCha8Rng::seed_from_u64(1300);
        let mut coeffs: Vec<Cx<f64>> = (0..=3)
            .map(|_| Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for c in coeffs.iter_mut() {
            *c /= Cx::new(norm, 0.0);
        }
        roster.push(("symstate(3)".into(), symmetric_state(3, &coeffs)?));
    }
    let _ = perm_symmetric_basis(2, 0)?; // conditioning check exercised

    let mut failures: Vec<String> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1301);
    for (name, c) in &roster {
        // witnesses
        if !verify_symmetric(c)?.passed() {
            failures.push(format!("{name}: witness"));
            continue;
        }
        // layer-commutation soundness by brute force on sampled pairs
        for layer in &c.layers {
            for _ in 0..4usize.min(layer.gates.len()) {
                let g1 = &layer.gates[rng.gen_range(0..layer.gates.len())];
                let g2 = &layer.gates[rng.gen_range(0..layer.gates.len())];
                let mut wires: Vec<u32> = g1.wires().into_iter().chain(g2.wires()).collect();
                wires.sort_unstable();
                wires.dedup();
                if wires.len() > 12 {
                    continue;
                }
                let u1 = gate_unitary_on::<f64>(c, g1, &wires);
                let u2 = gate_unitary_on::<f64>(c, g2, &wires);
                if u1.commutator(&u2).max_abs() >= 1e-10 {
                    failures.push(format!("{name}: commutator"));
                }
            }
        }
        // norm preservation + symmetry semantics (dense where feasible)
        if c.n_wires() <= 18 {
            let actives = c.active_labels();
            let bits: HashMap<Label, bool> =
                actives.iter().map(|l| (l.clone(), rng.gen_bool(0.5))).collect();
            let input = Input::Bits(bits.clone());
            let out = run_dense::<f64>(c, &input)?; // norm checked every layer
            for w in &c.witnesses {
                let permuted_bits: HashMap<Label, bool> = bits
                    .iter()
                    .map(|(l, v)| (w.generator.apply(l).unwrap(), *v))
                    .collect();
                let lhs = run_dense::<f64>(c, &Input::Bits(permuted_bits))?;
                let rhs = out.permuted(&w.extension)?;
                let diff: f64 = lhs
                    .amps
                    .iter()
                    .zip(&rhs.amps)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                if diff > 1e-9 {
                    failures.push(format!("{name}: semantics ({diff:.2e})"));
                }
            }
        } else {
            // sparse norm check only
            let _ = run_sparse::<f64>(c, &Input::Zeros)?;
        }
    }
    // the xor-sat build joins the sweep for witnesses and norms
    {
        let params = ChooserParams::derive(2, 2, 3, 3)?;
        let build = build_full(2, 2, &params)?;
        if !verify_symmetric(&build.circuit)?.passed() {
            failures.push("xorsat(2,2): witness".into());
        }
        let mut run = SparseRun::<f64>::new(&build.circuit, &Input::Bits(HashMap::new()))?;
        run.apply_range(0..build.circuit.layers.len())?; // norm checked per layer
    }
    let passed = failures.is_empty();
    Ok(result(
        13,
        "global invariant sweep",
        passed,
        if failures.is_empty() {
            format!("{} builder outputs clean", roster.len() + 1)
        } else {
            failures.join("; ")
        },
        "norms preserved, sampled commutators < 1e-10, witnesses verify, R-equivariance to 1e-9",
        start,
    ))
}

/// Run every criterion in order.
pub fn run_all() -> Result<Vec<CriterionResult>> {
    Ok(vec![
        criterion_1_swap_test()?,
        criterion_2_dicke()?,
        criterion_3_symmetric_state()?,
        criterion_4_phase_states()?,
        criterion_5_qpe()?,
        criterion_6_aa_trace()?,
        criterion_7_lcu()?,
        criterion_8_partition_synthesis()?,
        criterion_9_subspace_unitaries()?,
        criterion_10_classical_conversions()?,
        criterion_11_partition_boolean()?,
        criterion_12_xorsat()?,
        criterion_13_invariant_sweep()?,
    ])
}
