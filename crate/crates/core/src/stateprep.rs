//! Preparation circuits: Dicke states, arbitrary symmetric-subspace states,
//! polynomial phase states and superpositions over accepting inputs.

use crate::circuit::{Circuit, Gate, Role, SingleGate};
use crate::error::{Error, Result};
use crate::labels::{induced_subset_action, subsets_up_to, GroupSpec, Label};
use crate::scalar::Cx;
use crate::subroutines::{amplitude_amplify, lcu_state, AaBuild, Prob};
use crate::symmetry::SymmetryWitness;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use std::collections::HashMap;

// ---------------------------------------------------------------------------
// Dicke states
// ---------------------------------------------------------------------------

/// Derived Dicke parameters (for the reduced weight k' = min(k, n-k) that
/// the rotation layer actually targets).
#[derive(Debug, Clone)]
pub struct DickeSpec {
    pub n: usize,
    pub k: usize,
    /// Weight the amplification stage targets (min(k, n-k)).
    pub k_reduced: usize,
    /// theta = 2 arcsin sqrt(k'/n).
    pub theta: f64,
    /// p = C(n,k') (k'/n)^{k'} (1 - k'/n)^{n-k'}, exact.
    pub p: BigRational,
    /// K = ceil(pi/(4 sqrt p)) rounds (0 when no amplification is needed).
    pub rounds: u32,
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::from(0);
    }
    let mut acc = BigInt::one();
    for i in 0..k.min(n - k) {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Exact overlap probability of the product rotation layer with the
/// weight-k subspace: C(n,k) (k/n)^k ((n-k)/n)^{n-k}.
pub fn dicke_probability(n: u64, k: u64) -> BigRational {
    let num =
        binomial(n, k) * BigInt::from(k).pow(k as u32) * BigInt::from(n - k).pow((n - k) as u32);
    BigRational::new(num, BigInt::from(n).pow(n as u32))
}

#[derive(Debug, Clone)]
pub struct DickeBuild {
    pub circuit: Circuit,
    pub spec: DickeSpec,
    /// Reflection-block boundaries of the inner amplification (empty when no
    /// amplification runs).
    pub block_ends: Vec<usize>,
}

pub fn dicke_flag_label() -> Label {
    Label::tagged("dk", Label::atom("flag"))
}

pub fn dicke_wires(n: usize) -> Vec<Label> {
    (1..=n as i64).map(Label::idx).collect()
}

pub(crate) fn s_n_witnesses(labels: &[Label], fixed: &[Label]) -> Result<Vec<SymmetryWitness>> {
    GroupSpec::full_symmetric(labels.iter().cloned())
        .generators()?
        .into_iter()
        .map(|g| {
            let ext = g.extend_identity(fixed.iter().cloned())?;
            Ok(SymmetryWitness::new(g, ext))
        })
        .collect()
}

/// S_n-symmetric preparation of the Dicke state |D^n_k> on wires Index(1..n)
/// with three workspace wires restored to |0>. k = 0 and k = n need no
/// amplification; k > n/2 is built by X conjugation of the n-k circuit.
pub fn dicke(n: usize, k: usize) -> Result<DickeBuild> {
    if n == 0 || k > n {
        return Err(Error::BadParam(format!("dicke weight {k} out of range for n = {n}")));
    }
    let labels = dicke_wires(n);
    let group = GroupSpec::full_symmetric(labels.iter().cloned());
    let k_red = k.min(n - k);

    if k_red == 0 {
        // identity or a single layer of X gates
        let mut c = Circuit::with_wires(labels.iter().map(|l| (l.clone(), Role::Active)))?;
        if k > 0 {
            let layer: Vec<Gate> = labels
                .iter()
                .map(|l| c.single(l, SingleGate::X))
                .collect::<Result<_>>()?;
            c.append_layer(layer)?;
        }
        c.group = Some(group);
        c.witnesses = s_n_witnesses(&labels, &[])?;
        let spec = DickeSpec {
            n,
            k,
            k_reduced: 0,
            theta: 0.0,
            p: BigRational::one(),
            rounds: 0,
        };
        return Ok(DickeBuild {
            circuit: c,
            spec,
            block_ends: vec![],
        });
    }

    let p = dicke_probability(n as u64, k_red as u64);
    let theta = 2.0 * (k_red as f64 / n as f64).sqrt().asin();

    let mut a = Circuit::with_wires(labels.iter().map(|l| (l.clone(), Role::Active)))?;
    let layer: Vec<Gate> = labels
        .iter()
        .map(|l| a.single(l, SingleGate::Ry(theta)))
        .collect::<Result<_>>()?;
    a.append_layer(layer)?;
    a.group = Some(group.clone());
    a.witnesses = s_n_witnesses(&labels, &[])?;

    let flag = dicke_flag_label();
    let mut d = Circuit::with_wires(
        labels
            .iter()
            .map(|l| (l.clone(), Role::Active))
            .chain([(flag.clone(), Role::Workspace)]),
    )?;
    let test = d.eq(k_red as u32, &flag, labels.iter())?;
    d.append_layer([test])?;
    d.group = Some(group);
    d.witnesses = s_n_witnesses(&labels, &[flag.clone()])?;

    let aa: AaBuild = amplitude_amplify(&a, &d, &flag, &Prob::Exact(p.clone()))?;
    let mut circuit = aa.circuit;
    if k > n / 2 {
        let flip: Vec<Gate> = labels
            .iter()
            .map(|l| circuit.single(l, SingleGate::X))
            .collect::<Result<_>>()?;
        circuit.append_layer(flip)?;
    }
    let spec = DickeSpec {
        n,
        k,
        k_reduced: k_red,
        theta,
        p,
        rounds: aa.params.k,
    };
    Ok(DickeBuild {
        circuit,
        spec,
        block_ends: aa.block_ends,
    })
}

/// Reference amplitude vector of |D^n_k> (canonical order over n wires).
pub fn dicke_vector(n: usize, k: usize) -> Vec<Cx<f64>> {
    let dim = 1usize << n;
    let count = (0..dim).filter(|x| x.count_ones() as usize == k).count();
    let amp = 1.0 / (count as f64).sqrt();
    (0..dim)
        .map(|x| {
            if x.count_ones() as usize == k {
                Cx::new(amp, 0.0)
            } else {
                Cx::new(0.0, 0.0)
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// symmetric-subspace states
// ---------------------------------------------------------------------------

/// S_n-symmetric preparation of sum_k alpha_k |D^n_k> by a linear
/// combination over the n+1 Dicke builders (which share their workspace, as
/// their workspace symmetries are identical).
pub fn symmetric_state(n: usize, coeffs: &[Cx<f64>]) -> Result<Circuit> {
    if coeffs.len() != n + 1 {
        return Err(Error::BadParam(format!(
            "symmetric state on {n} qubits needs {} coefficients",
            n + 1
        )));
    }
    let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::BadParam(format!(
            "coefficients are not normalised (sum of squares {norm})"
        )));
    }
    let builds: Vec<DickeBuild> = (0..=n).map(|k| dicke(n, k)).collect::<Result<_>>()?;
    let refs: Vec<&Circuit> = builds.iter().map(|b| &b.circuit).collect();
    Ok(lcu_state(&refs, coeffs)?.circuit)
}

// ---------------------------------------------------------------------------
// polynomial phase states
// ---------------------------------------------------------------------------

/// A Boolean polynomial of degree at most d given by its coefficient bits,
/// one per subset J of [n] with |J| <= d.
#[derive(Debug, Clone)]
pub struct PhasePolynomial {
    pub n: usize,
    pub d: usize,
    /// Sorted subsets paired with their coefficient bit.
    pub coeffs: Vec<(Vec<i64>, bool)>,
}

impl PhasePolynomial {
    pub fn from_bits(n: usize, d: usize, bits: &[bool]) -> Result<PhasePolynomial> {
        let subsets = subsets_up_to(&(1..=n as i64).collect::<Vec<_>>(), d);
        if bits.len() != subsets.len() {
            return Err(Error::BadParam(format!(
                "polynomial over [{n}] with degree <= {d} takes {} coefficients",
                subsets.len()
            )));
        }
        Ok(PhasePolynomial {
            n,
            d,
            coeffs: subsets.into_iter().zip(bits.iter().copied()).collect(),
        })
    }

    /// P(x) over F_2; x[i] is the value of variable i+1.
    pub fn evaluate(&self, x: &[bool]) -> bool {
        let mut acc = false;
        for (subset, bit) in &self.coeffs {
            if *bit && subset.iter().all(|j| x[(*j - 1) as usize]) {
                acc ^= true;
            }
        }
        acc
    }

    /// Input assignment for the coefficient wires of the phase-state circuit.
    pub fn input_bits(&self) -> HashMap<Label, bool> {
        self.coeffs
            .iter()
            .map(|(subset, bit)| (Label::subset(subset.iter().copied()), *bit))
            .collect()
    }
}

pub fn phase_state_coeff_wires(n: usize, d: usize) -> Vec<Label> {
    subsets_up_to(&(1..=n as i64).collect::<Vec<_>>(), d)
        .into_iter()
        .map(Label::subset)
        .collect()
}

pub fn phase_state_x_wires(n: usize) -> Vec<Label> {
    (1..=n as i64).map(Label::idx).collect()
}

/// The phase-state circuit: on input |P>|0^n> it produces |P>|phi_P> with
/// phi_P the degree-d polynomial phase state. Hadamards everywhere, an X on
/// the empty-set wire plus one multi-controlled flip per subset (a threshold
/// gate with the subset's variables as support and the coefficient wire as
/// head), then Hadamards on the coefficient wires.
pub fn phase_state(n: usize, d: usize) -> Result<Circuit> {
    if n == 0 || d == 0 || d > n {
        return Err(Error::BadParam(format!(
            "phase state needs 1 <= d <= n, got n={n} d={d}"
        )));
    }
    let coeff_wires = phase_state_coeff_wires(n, d);
    let x_wires = phase_state_x_wires(n);
    let mut c = Circuit::with_wires(
        coeff_wires
            .iter()
            .chain(x_wires.iter())
            .map(|l| (l.clone(), Role::Active)),
    )?;

    let h_all: Vec<Gate> = coeff_wires
        .iter()
        .chain(x_wires.iter())
        .map(|l| c.single(l, SingleGate::H))
        .collect::<Result<_>>()?;
    c.append_layer(h_all)?;

    let mut kicks = vec![c.single(&Label::subset([]), SingleGate::X)?];
    for (subset_label, subset) in coeff_wires
        .iter()
        .zip(subsets_up_to(&(1..=n as i64).collect::<Vec<_>>(), d))
    {
        if subset.is_empty() {
            continue;
        }
        let support: Vec<Label> = subset.iter().map(|j| Label::idx(*j)).collect();
        kicks.push(c.thr(subset.len() as u32, subset_label, support.iter())?);
    }
    c.append_layer(kicks)?;

    let h_coeff: Vec<Gate> = coeff_wires
        .iter()
        .map(|l| c.single(l, SingleGate::H))
        .collect::<Result<_>>()?;
    c.append_layer(h_coeff)?;

    // the diagonal action of S_n on subsets and on the x register
    let base = GroupSpec::s_n(n);
    let mut gens = Vec::new();
    for tau in base.generators()? {
        let on_subsets = induced_subset_action(&tau, d)?;
        gens.push(on_subsets.union(&tau)?);
    }
    c.witnesses = gens
        .iter()
        .map(|g| SymmetryWitness::new(g.clone(), g.clone()))
        .collect();
    c.group = Some(GroupSpec::Explicit(gens));
    Ok(c)
}

// ---------------------------------------------------------------------------
// superpositions over accepting inputs
// ---------------------------------------------------------------------------

/// Uniform superposition over f^{-1}(1): amplitude amplification of the
/// Hadamard layer with the function circuit as distinguisher; p must be the
/// exact accepting fraction |f^{-1}(1)| / 2^n in (0,1).
pub fn accepting_superposition(f_circuit: &Circuit, flag: &Label, p: &Prob) -> Result<AaBuild> {
    let actives = f_circuit.active_labels();
    if actives.is_empty() {
        return Err(Error::BadParam("function circuit has no active wires".into()));
    }
    let mut a = Circuit::with_wires(actives.iter().map(|l| (l.clone(), Role::Active)))?;
    let layer: Vec<Gate> = actives
        .iter()
        .map(|l| a.single(l, SingleGate::H))
        .collect::<Result<_>>()?;
    a.append_layer(layer)?;
    a.group = f_circuit.group.clone();
    if let Some(group) = &a.group {
        a.witnesses = group
            .generators()?
            .into_iter()
            .map(|g| SymmetryWitness::new(g.clone(), g))
            .collect();
    }
    amplitude_amplify(&a, f_circuit, flag, p)
}

/// Exact accepting fraction from a truth table.
pub fn accepting_fraction(truth: &[bool]) -> Prob {
    let ones = truth.iter().filter(|b| **b).count();
    Prob::Exact(BigRational::new(BigInt::from(ones), BigInt::from(truth.len())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::overlap;
    use crate::sim::{run_dense, Input};
    use crate::symmetry::verify_symmetric;
    use num_complex::Complex;

    type C64 = Complex<f64>;

    #[test]
    fn dicke_probability_values() {
        assert_eq!(dicke_probability(2, 1), BigRational::new(1.into(), 2.into()));
        assert_eq!(dicke_probability(4, 2), BigRational::new(3.into(), 8.into()));
    }

    use crate::subroutines::rational_to_f64;

    #[test]
    fn dicke_small_cases() {
        // (2,1): p = 1/2, K = 2, exact
        let b = dicke(2, 1).unwrap();
        assert_eq!(b.spec.rounds, 2);
        let st = run_dense::<f64>(&b.circuit, &Input::Zeros).unwrap();
        let (v, leak) = st.project_rest_zero(&dicke_wires(2)).unwrap();
        assert!(leak < 1e-12);
        assert!(overlap(&dicke_vector(2, 1), &v) >= 1.0 - 1e-9);

        // h(C) = 2: the distinguisher flag and the kickback ancilla
        assert_eq!(b.circuit.metrics().h, 2);

        // (3,0): |000>, no amplification
        let b = dicke(3, 0).unwrap();
        assert_eq!(b.spec.rounds, 0);
        let st = run_dense::<f64>(&b.circuit, &Input::Zeros).unwrap();
        assert!((st.amps[0].norm() - 1.0).abs() < 1e-12);

        // (4,2): p = 3/8, K = 2
        let b = dicke(4, 2).unwrap();
        assert_eq!(b.spec.rounds, 2);
        assert_eq!(rational_to_f64(&b.spec.p), 0.375);
        let st = run_dense::<f64>(&b.circuit, &Input::Zeros).unwrap();
        let (v, leak) = st.project_rest_zero(&dicke_wires(4)).unwrap();
        assert!(leak < 1e-12);
        assert!(overlap(&dicke_vector(4, 2), &v) >= 1.0 - 1e-9);
        let p1 = st.probability(&[(Label::idx(1), true)]).unwrap();
        assert!((p1 - 0.5).abs() < 1e-9);

        // (3,3): all X, no amplification
        let b = dicke(3, 3).unwrap();
        assert_eq!(b.spec.rounds, 0);
        let st = run_dense::<f64>(&b.circuit, &Input::Zeros).unwrap();
        assert!((st.amps[7].norm() - 1.0).abs() < 1e-12);

        // (3,2) goes through the k > n/2 reduction
        let b = dicke(3, 2).unwrap();
        assert_eq!(b.spec.k_reduced, 1);
        let st = run_dense::<f64>(&b.circuit, &Input::Zeros).unwrap();
        let (v, leak) = st.project_rest_zero(&dicke_wires(3)).unwrap();
        assert!(leak < 1e-12);
        assert!(overlap(&dicke_vector(3, 2), &v) >= 1.0 - 1e-9);
    }

    #[test]
    fn dicke_witnesses_verify() {
        for (n, k) in [(2, 1), (3, 1), (4, 2), (3, 2), (3, 0), (3, 3)] {
            let b = dicke(n, k).unwrap();
            assert!(verify_symmetric(&b.circuit).unwrap().passed(), "dicke({n},{k})");
        }
    }

    #[test]
    fn dicke_rejects_out_of_range() {
        assert!(dicke(2, 5).is_err());
        assert!(dicke(0, 0).is_err());
    }

    #[test]
    fn symmetric_state_matches_combinations() {
        // weight on k=0 only: |0^n>
        let c = symmetric_state(2, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)])
            .unwrap();
        let st = run_dense::<f64>(&c, &Input::Zeros).unwrap();
        let (v, leak) = st.project_rest_zero(&dicke_wires(2)).unwrap();
        assert!(leak < 1e-8);
        assert!((v[0].norm() - 1.0).abs() < 1e-8);

        // alpha = (0,1,0): the (2,1) Dicke state
        let c = symmetric_state(2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)])
            .unwrap();
        let st = run_dense::<f64>(&c, &Input::Zeros).unwrap();
        let (v, leak) = st.project_rest_zero(&dicke_wires(2)).unwrap();
        assert!(leak < 1e-8);
        assert!(overlap(&dicke_vector(2, 1), &v) >= 1.0 - 1e-8);

        // GHZ-like on 3 qubits
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let c = symmetric_state(
            3,
            &[
                C64::new(s, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(s, 0.0),
            ],
        )
        .unwrap();
        let st = run_dense::<f64>(&c, &Input::Zeros).unwrap();
        let (v, leak) = st.project_rest_zero(&dicke_wires(3)).unwrap();
        assert!(leak < 1e-8);
        let mut target = vec![C64::new(0.0, 0.0); 8];
        target[0] = C64::new(s, 0.0);
        target[7] = C64::new(s, 0.0);
        assert!(overlap(&target, &v) >= 1.0 - 1e-8);
    }

    #[test]
    fn symmetric_state_rejects_unnormalised() {
        assert!(symmetric_state(2, &[C64::new(1.0, 0.0); 3]).is_err());
        assert!(symmetric_state(2, &[C64::new(1.0, 0.0); 2]).is_err());
    }

    #[test]
    fn phase_state_exhaustive_small() {
        for (n, d) in [(1usize, 1usize), (2, 1), (2, 2)] {
            let c = phase_state(n, d).unwrap();
            assert!(verify_symmetric(&c).unwrap().passed());
            let coeff_wires = phase_state_coeff_wires(n, d);
            let m = coeff_wires.len();
            for bits in 0..1usize << m {
                let bitvec: Vec<bool> = (0..m).map(|i| bits >> i & 1 == 1).collect();
                let poly = PhasePolynomial::from_bits(n, d, &bitvec).unwrap();
                let st = run_dense::<f64>(&c, &Input::Bits(poly.input_bits())).unwrap();
                let expected = expected_phase_state(&c, &poly);
                let diff: f64 = st
                    .amps
                    .iter()
                    .zip(&expected)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                assert!(diff < 1e-9, "n={n} d={d} bits={bits}: diff {diff}");
            }
        }
    }

    fn expected_phase_state(c: &Circuit, poly: &PhasePolynomial) -> Vec<C64> {
        let order: Vec<Label> = c
            .canonical_wire_order()
            .iter()
            .map(|id| c.label(*id).clone())
            .collect();
        let nw = order.len();
        let amp = 1.0 / 2f64.powi(poly.n as i32).sqrt();
        let input = poly.input_bits();
        let mut out = vec![C64::new(0.0, 0.0); 1 << nw];
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
            *slot = C64::new(sign * amp, 0.0);
        }
        out
    }

    #[test]
    fn accepting_superposition_examples() {
        // f = "weight >= 2" on 2 wires: accept set {11}, p = 1/4
        let labels = dicke_wires(2);
        let flag = Label::atom("f");
        let mut f = Circuit::with_wires(
            labels
                .iter()
                .map(|l| (l.clone(), Role::Active))
                .chain([(flag.clone(), Role::Workspace)]),
        )
        .unwrap();
        let g = f.thr(2, &flag, labels.iter()).unwrap();
        f.append_layer([g]).unwrap();
        f.group = Some(GroupSpec::full_symmetric(labels.iter().cloned()));
        f.witnesses = s_n_witnesses(&labels, &[flag.clone()]).unwrap();

        let build = accepting_superposition(&f, &flag, &Prob::exact(1, 4)).unwrap();
        let st = run_dense::<f64>(&build.circuit, &Input::Zeros).unwrap();
        let (v, leak) = st.project_rest_zero(&labels).unwrap();
        assert!(leak < 1e-12);
        assert!((v[3].norm() - 1.0).abs() < 1e-9);
        assert!(verify_symmetric(&build.circuit).unwrap().passed());

        // f = parity on 2 wires via an equality gate: accept {01, 10}, p=1/2
        let mut f = Circuit::with_wires(
            labels
                .iter()
                .map(|l| (l.clone(), Role::Active))
                .chain([(flag.clone(), Role::Workspace)]),
        )
        .unwrap();
        let g = f.eq(1, &flag, labels.iter()).unwrap();
        f.append_layer([g]).unwrap();
        f.group = Some(GroupSpec::full_symmetric(labels.iter().cloned()));
        f.witnesses = s_n_witnesses(&labels, &[flag.clone()]).unwrap();
        let build = accepting_superposition(&f, &flag, &Prob::exact(1, 2)).unwrap();
        let st = run_dense::<f64>(&build.circuit, &Input::Zeros).unwrap();
        let (v, leak) = st.project_rest_zero(&labels).unwrap();
        assert!(leak < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[1].norm() - s).abs() < 1e-9);
        assert!((v[2].norm() - s).abs() < 1e-9);

        // f identically 1 is rejected (p = 1)
        assert!(accepting_superposition(&f, &flag, &Prob::exact(1, 1)).is_err());
    }
}
