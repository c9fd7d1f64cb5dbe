//! Synthesis of permutation- and partition-symmetric unitaries via the
//! Gram-matrix decomposition over tensor powers of single-qubit unitaries,
//! implementation of symmetric-subspace unitaries from their Dicke-basis
//! matrix, and equivariant QNN layers and observables.

use crate::circuit::{Circuit, Gate, Role, SingleGate};
use crate::error::{Error, Result};
use crate::labels::{induced_pair_action, GroupSpec, Label};
use crate::linalg::CMat;
use crate::scalar::Cx;
use crate::sim::DenseStateOf;
use crate::stateprep::{dicke, symmetric_state};
use crate::subroutines::lcu_oblivious;
use crate::symmetry::SymmetryWitness;
use crate::transforms::{control_with_tag, fresh_tag, invert};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

type M64 = CMat<f64>;
type C64 = Cx<f64>;

pub const GRAM_MIN_EIG: f64 = 1e-8;
pub const DECOMP_RESIDUAL_TOL: f64 = 1e-7;
pub const SYMMETRY_CHECK_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// permutation operators and symmetric test matrices
// ---------------------------------------------------------------------------

/// R(pi) on n qubits for a permutation of qubit positions (0 = most
/// significant): the output bit at position pos_map[i] is the input bit at
/// position i.
pub fn permutation_operator(n: usize, pos_map: &[usize]) -> M64 {
    assert_eq!(pos_map.len(), n);
    let dim = 1usize << n;
    let mut r = M64::zeros(dim, dim);
    for x in 0..dim {
        let mut y = 0usize;
        for i in 0..n {
            if x >> (n - 1 - i) & 1 == 1 {
                y |= 1 << (n - 1 - pos_map[i]);
            }
        }
        r[(y, x)] = C64::new(1.0, 0.0);
    }
    r
}

/// Position permutations generating the product of symmetric groups over
/// consecutive parts.
pub fn part_generators(parts: &[usize]) -> Vec<Vec<usize>> {
    let n: usize = parts.iter().sum();
    let mut gens = Vec::new();
    let mut offset = 0;
    for sz in parts {
        if *sz >= 2 {
            let mut swap: Vec<usize> = (0..n).collect();
            swap.swap(offset, offset + 1);
            gens.push(swap);
            if *sz > 2 {
                let mut cycle: Vec<usize> = (0..n).collect();
                for i in 0..*sz {
                    cycle[offset + i] = offset + (i + 1) % sz;
                }
                gens.push(cycle);
            }
        }
        offset += sz;
    }
    gens
}

/// All position permutations of the product group (small parts only).
pub fn part_elements(parts: &[usize]) -> Vec<Vec<usize>> {
    let n: usize = parts.iter().sum();
    let mut elements: Vec<Vec<usize>> = vec![(0..n).collect()];
    let mut offset = 0;
    for sz in parts {
        let perms = permutations_of(*sz);
        let mut next = Vec::with_capacity(elements.len() * perms.len());
        for base in &elements {
            for p in &perms {
                let mut e = base.clone();
                for i in 0..*sz {
                    e[offset + i] = offset + p[i];
                }
                next.push(e);
            }
        }
        elements = next;
        offset += sz;
    }
    elements
}

fn permutations_of(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    heap_permute(&mut items, n, &mut out);
    out
}

fn heap_permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(items.clone());
        return;
    }
    for i in 0..k {
        heap_permute(items, k - 1, out);
        if k % 2 == 0 {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}

/// Does U commute with R(pi) for every generator of the part group?
pub fn is_partition_symmetric(u: &M64, parts: &[usize], tol: f64) -> bool {
    let n: usize = parts.iter().sum();
    part_generators(parts)
        .iter()
        .all(|g| u.commutator(&permutation_operator(n, g)).max_abs() < tol)
}

/// An exactly partition-symmetric unitary: exponential of the group average
/// of a random Hermitian matrix.
pub fn random_partition_symmetric_unitary(parts: &[usize], rng: &mut ChaCha8Rng) -> M64 {
    let n: usize = parts.iter().sum();
    let dim = 1usize << n;
    let mut h = M64::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if i == j {
                h[(i, i)] = C64::new(z.re, 0.0);
            } else {
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
            }
        }
    }
    let elements = part_elements(parts);
    let mut sym = M64::zeros(dim, dim);
    for e in &elements {
        let r = permutation_operator(n, e);
        sym = sym.add(&r.mul(&h).mul(&r.adjoint()));
    }
    sym = sym.scale(C64::new(1.0 / elements.len() as f64, 0.0));
    sym.scale(C64::new(0.0, 1.0)).expm()
}

/// Haar-ish random unitary by orthonormalising a complex Gaussian matrix.
pub fn random_unitary(dim: usize, rng: &mut ChaCha8Rng) -> M64 {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut v: Vec<C64> = (0..dim)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        for c in &cols {
            let ip: C64 = c.iter().zip(&v).map(|(a, b)| a.conj() * *b).sum();
            for (x, y) in v.iter_mut().zip(c) {
                *x -= ip * *y;
            }
        }
        let norm = crate::linalg::vec_norm(&v);
        for x in v.iter_mut() {
            *x /= C64::new(norm, 0.0);
        }
        cols.push(v);
    }
    let mut u = M64::zeros(dim, dim);
    for (j, c) in cols.iter().enumerate() {
        for (i, x) in c.iter().enumerate() {
            u[(i, j)] = *x;
        }
    }
    u
}

// ---------------------------------------------------------------------------
// the spanning family and its Gram matrix
// ---------------------------------------------------------------------------

/// Spanning family V_1..V_m of single-qubit unitaries for the n-fold tensor
/// powers, with the Gram matrix of the normalised trace inner product.
#[derive(Debug, Clone)]
pub struct SymmetricBasis {
    pub n: usize,
    /// m = C(n+3, 3).
    pub m: usize,
    /// Euler angles (b, a, c) with V = Rz(b) Ry(a) Rz(c).
    pub angles: Vec<(f64, f64, f64)>,
    pub unitaries: Vec<M64>,
    pub gram: M64,
    pub min_eigenvalue: f64,
    pub seed: u64,
}

impl SymmetricBasis {
    /// ||alpha||_1 bound guaranteed by the decomposition: m / lambda_min.
    pub fn alpha_l1_bound(&self) -> f64 {
        self.m as f64 / self.min_eigenvalue
    }
}

fn euler_unitary(b: f64, a: f64, c: f64) -> M64 {
    SingleGate::Rz(b)
        .matrix::<f64>()
        .mul(&SingleGate::Ry(a).matrix::<f64>())
        .mul(&SingleGate::Rz(c).matrix::<f64>())
}

fn gram_of(n: usize, unitaries: &[M64]) -> M64 {
    let m = unitaries.len();
    let mut gram = M64::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            // tr(V_j^dag V_i) / 2, raised to the n-th power
            let z = unitaries[j].adjoint().mul(&unitaries[i]).trace() / C64::new(2.0, 0.0);
            gram[(i, j)] = z.powu(n as u32);
        }
    }
    gram
}

/// Deterministic spanning family: the low-discrepancy Euler-angle grid plus
/// seeded random candidates, refined by a seeded hill climb on the smallest
/// Gram eigenvalue. Conditioning bounds the decomposition's ||alpha||_1,
/// which in turn drives the amplification rounds of the synthesis circuits,
/// so a mediocre family makes them uselessly deep. Reproducible from
/// (n, seed); results are cached per (n, seed).
pub fn perm_symmetric_basis(n: usize, seed: u64) -> Result<SymmetricBasis> {
    use std::collections::HashMap;
    use std::sync::{Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), SymmetricBasis>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(b) = cache.lock().unwrap().get(&(n, seed)) {
        return Ok(b.clone());
    }
    let built = build_basis(n, seed)?;
    cache.lock().unwrap().insert((n, seed), built.clone());
    Ok(built)
}

fn build_basis(n: usize, seed: u64) -> Result<SymmetricBasis> {
    if n == 0 {
        return Err(Error::BadParam("basis needs n >= 1".into()));
    }
    let m = ((n + 1) * (n + 2) * (n + 3)) / 6;
    // plastic-number Kronecker sequence
    let rho = 1.324_717_957_244_746_f64;
    let (p1, p2, p3) = (1.0 / rho, 1.0 / (rho * rho), 1.0 / (rho * rho * rho));
    let eig_of = |angles: &[(f64, f64, f64)]| -> (Vec<M64>, M64, f64) {
        let unitaries: Vec<M64> = angles.iter().map(|(b, a, c)| euler_unitary(*b, *a, *c)).collect();
        let gram = gram_of(n, &unitaries);
        let min_eig = gram.min_eigenvalue_hermitian();
        (unitaries, gram, min_eig)
    };

    let mut best_angles: Vec<(f64, f64, f64)> = (0..m)
        .map(|i| {
            let t = (i + 1) as f64;
            let a = (1.0 - 2.0 * (t * p1).fract()).acos();
            let b = 2.0 * std::f64::consts::PI * (t * p2).fract();
            let c = 2.0 * std::f64::consts::PI * (t * p3).fract();
            (b, a, c)
        })
        .collect();
    let mut best_eig = eig_of(&best_angles).2;
    for attempt in 1..64u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let angles: Vec<(f64, f64, f64)> = (0..m)
            .map(|_| {
                let a = (1.0 - 2.0 * rng.gen_range(0.0..1.0f64)).acos();
                let b = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
                let c = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
                (b, a, c)
            })
            .collect();
        let e = eig_of(&angles).2;
        if e > best_eig {
            best_eig = e;
            best_angles = angles;
        }
    }
    // hill climb on single-unitary perturbations
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed));
    let mut step = 0.3f64;
    for _ in 0..8 {
        let mut improved = false;
        for _ in 0..250 {
            let mut cand = best_angles.clone();
            let k = rng.gen_range(0..cand.len());
            cand[k].0 += rng.gen_range(-step..step);
            cand[k].1 = (cand[k].1 + rng.gen_range(-step..step)).clamp(0.0, std::f64::consts::PI);
            cand[k].2 += rng.gen_range(-step..step);
            let e = eig_of(&cand).2;
            if e > best_eig {
                best_eig = e;
                best_angles = cand;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let (unitaries, gram, min_eig) = eig_of(&best_angles);
    if min_eig <= GRAM_MIN_EIG {
        return Err(Error::Linalg(format!(
            "no well-conditioned spanning family found for n = {n}"
        )));
    }
    Ok(SymmetricBasis {
        n,
        m,
        angles: best_angles,
        unitaries,
        gram,
        min_eigenvalue: min_eig,
        seed,
    })
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub alpha: Vec<C64>,
    pub residual: f64,
    pub l1: f64,
    /// m / lambda_min(M), which bounds l1.
    pub l1_bound: f64,
}

/// Solve M alpha = u for U = sum_i alpha_i V_i^{(x) n}; the input must
/// commute with the wire-permutation operators of the S_n generators.
pub fn decompose_perm_symmetric(u: &M64, basis: &SymmetricBasis) -> Result<Decomposition> {
    let n = basis.n;
    if u.rows != 1 << n {
        return Err(Error::BadParam("matrix dimension does not match the basis".into()));
    }
    if !is_partition_symmetric(u, &[n], SYMMETRY_CHECK_TOL) {
        return Err(Error::BadParam(
            "input does not commute with the permutation operators".into(),
        ));
    }
    let terms: Vec<M64> = basis.unitaries.iter().map(|v| v.kron_pow(n)).collect();
    decompose_against(u, &basis.gram, &terms, basis.alpha_l1_bound())
}

fn decompose_against(u: &M64, gram: &M64, terms: &[M64], l1_bound: f64) -> Result<Decomposition> {
    let rhs: Vec<C64> = terms.iter().map(|t| u.ntr_inner(t)).collect();
    let alpha = gram.solve_hpd(&rhs)?;
    let mut recon = M64::zeros(u.rows, u.cols);
    for (a, t) in alpha.iter().zip(terms) {
        recon = recon.add(&t.scale(*a));
    }
    let residual = u.sub(&recon).frobenius_norm();
    if residual > DECOMP_RESIDUAL_TOL {
        return Err(Error::Linalg(format!(
            "decomposition residual {residual} exceeds {DECOMP_RESIDUAL_TOL}"
        )));
    }
    let l1: f64 = alpha.iter().map(|a| a.norm()).sum();
    Ok(Decomposition {
        alpha,
        residual,
        l1,
        l1_bound,
    })
}

// ---------------------------------------------------------------------------
// partition-symmetric synthesis
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub circuit: Circuit,
    pub decomposition: Decomposition,
    pub min_eigenvalue: f64,
}

fn custom_of(m: &M64) -> SingleGate {
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

fn partition_group(parts: &[usize]) -> GroupSpec {
    let mut specs = Vec::new();
    let mut offset = 1i64;
    for sz in parts {
        specs.push(GroupSpec::full_symmetric(
            (offset..offset + *sz as i64).map(Label::idx),
        ));
        offset += *sz as i64;
    }
    if specs.len() == 1 {
        specs.pop().unwrap()
    } else {
        GroupSpec::Product(specs)
    }
}

/// Implement a partition-symmetric unitary as an oblivious linear
/// combination of one-layer tensor-grid circuits. Wires are Index(1..n)
/// with parts covering consecutive ranges; `cost_cap` bounds the accepted
/// ||alpha||_1 (synthesis is refused above it).
pub fn synth_partition_symmetric(
    u: &M64,
    parts: &[usize],
    seed: u64,
    cost_cap: f64,
) -> Result<SynthOutput> {
    let n: usize = parts.iter().sum();
    if n == 0 || parts.iter().any(|p| *p == 0) {
        return Err(Error::BadParam("parts must be positive".into()));
    }
    if n > 10 {
        return Err(Error::WireCap(n, 10));
    }
    if u.rows != 1 << n {
        return Err(Error::BadParam("matrix dimension does not match the parts".into()));
    }
    if !u.is_unitary(SYMMETRY_CHECK_TOL) {
        return Err(Error::BadParam("input is not unitary".into()));
    }
    if !is_partition_symmetric(u, parts, SYMMETRY_CHECK_TOL) {
        return Err(Error::BadParam(
            "input does not commute with the part-group generators".into(),
        ));
    }

    let bases: Vec<SymmetricBasis> = parts
        .iter()
        .map(|sz| perm_symmetric_basis(*sz, seed))
        .collect::<Result<_>>()?;

    // Gram of the tensor grid = Kronecker product of the per-part Grams
    let mut gram = M64::identity(1);
    let mut min_eig = 1.0f64;
    for b in &bases {
        gram = gram.kron(&b.gram);
        min_eig *= b.min_eigenvalue;
    }
    let m_total: usize = bases.iter().map(|b| b.m).product();
    let l1_bound = m_total as f64 / min_eig;

    // tensor-grid terms, lexicographic over part indices
    let mut grid: Vec<Vec<usize>> = vec![vec![]];
    for b in &bases {
        let mut next = Vec::with_capacity(grid.len() * b.m);
        for g in &grid {
            for i in 0..b.m {
                let mut e = g.clone();
                e.push(i);
                next.push(e);
            }
        }
        grid = next;
    }
    let terms: Vec<M64> = grid
        .iter()
        .map(|combo| {
            let mut t = M64::identity(1);
            for ((idx, b), sz) in combo.iter().zip(&bases).zip(parts) {
                t = t.kron(&b.unitaries[*idx].kron_pow(*sz));
            }
            t
        })
        .collect();

    let decomposition = decompose_against(u, &gram, &terms, l1_bound)?;
    if decomposition.l1 > cost_cap {
        return Err(Error::BadParam(format!(
            "synthesis cost ||alpha||_1 = {} exceeds the cap {cost_cap}",
            decomposition.l1
        )));
    }

    // one-layer circuits per grid term
    let group = partition_group(parts);
    let gens = group.generators()?;
    let labels: Vec<Label> = (1..=n as i64).map(Label::idx).collect();
    let mut term_circuits = Vec::with_capacity(grid.len());
    for combo in &grid {
        let mut c = Circuit::with_wires(labels.iter().map(|l| (l.clone(), Role::Active)))?;
        let mut layer = Vec::new();
        let mut offset = 0usize;
        for ((idx, b), sz) in combo.iter().zip(&bases).zip(parts) {
            let gate = custom_of(&b.unitaries[*idx]);
            for w in 0..*sz {
                layer.push(c.single(&labels[offset + w], gate.clone())?);
            }
            offset += sz;
        }
        c.append_layer(layer)?;
        c.group = Some(group.clone());
        c.witnesses = gens
            .iter()
            .map(|g| SymmetryWitness::new(g.clone(), g.clone()))
            .collect();
        term_circuits.push(c);
    }
    let refs: Vec<&Circuit> = term_circuits.iter().collect();
    // the residual check above already certifies the combination equals the
    // unitary input
    let build = lcu_oblivious(&refs, &decomposition.alpha, true)?;
    Ok(SynthOutput {
        circuit: build.circuit,
        decomposition,
        min_eigenvalue: min_eig,
    })
}

// ---------------------------------------------------------------------------
// symmetric-subspace unitaries
// ---------------------------------------------------------------------------

pub fn subspace_flag_labels(n: usize) -> Vec<Label> {
    (0..=n as i64).map(|k| Label::tagged("sb", Label::idx(k))).collect()
}

/// Implement the action of a symmetric unitary on the symmetric subspace,
/// given its (n+1) x (n+1) matrix in the Dicke basis: per weight k the input
/// is recognised through the inverse Dicke preparation and one flag ancilla,
/// the flagged branch is rebuilt by the column preparation, and the flags
/// are cleaned through the inverse column preparations. Behaviour outside
/// the symmetric subspace is unconstrained.
pub fn symmetric_subspace_unitary(us: &M64, n: usize) -> Result<Circuit> {
    if us.rows != n + 1 || us.cols != n + 1 {
        return Err(Error::BadParam(format!(
            "dicke-basis matrix must be {} x {}",
            n + 1,
            n + 1
        )));
    }
    if !us.is_unitary(SYMMETRY_CHECK_TOL) {
        return Err(Error::BadParam("dicke-basis matrix is not unitary".into()));
    }

    let preps: Vec<Circuit> = (0..=n).map(|k| Ok(dicke(n, k)?.circuit)).collect::<Result<_>>()?;
    let columns: Vec<Circuit> = (0..=n)
        .map(|k| {
            let coeffs: Vec<C64> = (0..=n).map(|j| us[(j, k)]).collect();
            symmetric_state(n, &coeffs)
        })
        .collect::<Result<_>>()?;
    let flags = subspace_flag_labels(n);

    let mut out = Circuit::new();
    let labels: Vec<Label> = (1..=n as i64).map(Label::idx).collect();
    for l in &labels {
        out.add_wire(l.clone(), Role::Active)?;
    }
    for f in &flags {
        out.add_wire(f.clone(), Role::Workspace)?;
    }
    let declare = |c: &Circuit, out: &mut Circuit| -> Result<()> {
        for w in c.wires() {
            if !out.has_wire(&w.label) {
                out.add_wire(w.label.clone(), Role::Workspace)?;
            }
        }
        Ok(())
    };
    for c in preps.iter().chain(columns.iter()) {
        declare(c, &mut out)?;
    }

    // mark: flag_k records "the input is the weight-k Dicke state"
    for (k, prep) in preps.iter().enumerate() {
        let support: Vec<Label> = prep.wires().iter().map(|w| w.label.clone()).collect();
        out.append_circuit(&invert(prep))?;
        out.append_layer([out.eq(0, &flags[k], support.iter())?])?;
        out.append_circuit(prep)?;
    }

    // apply: on the flagged branch undo the Dicke preparation and build the
    // image column
    let all_parts: Vec<&Circuit> = preps.iter().chain(columns.iter()).collect();
    let helper_tag = fresh_tag("cw", &all_parts);
    let mut controlled = Vec::new();
    for k in 0..=n {
        let un_prep = control_with_tag(&invert(&preps[k]), &flags[k], Role::Workspace, &helper_tag)?;
        let build = control_with_tag(&columns[k], &flags[k], Role::Workspace, &helper_tag)?;
        controlled.push((un_prep.circuit, build.circuit));
    }
    for (a, b) in &controlled {
        declare(a, &mut out)?;
        declare(b, &mut out)?;
    }
    for (un_prep, build) in &controlled {
        out.append_circuit(un_prep)?;
        out.append_circuit(build)?;
    }

    // clean: the flag of branch k is recognised through the inverse column
    for (k, col) in columns.iter().enumerate() {
        let support: Vec<Label> = col.wires().iter().map(|w| w.label.clone()).collect();
        out.append_circuit(&invert(col))?;
        out.append_layer([out.eq(0, &flags[k], support.iter())?])?;
        out.append_circuit(col)?;
    }

    let group = GroupSpec::full_symmetric(labels.iter().cloned());
    let mut parts: Vec<&Circuit> = preps.iter().chain(columns.iter()).collect();
    for (a, b) in &controlled {
        parts.push(a);
        parts.push(b);
    }
    out.witnesses = crate::transforms::combine_witness_lists(&parts, &out, &flags)?;
    out.group = Some(group);
    Ok(out)
}

// ---------------------------------------------------------------------------
// equivariant QNN layers and observables
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QnnLayerKind {
    X,
    Y,
    Zz,
}

/// One equivariant layer e^{-i theta H} for H in {H_X, H_Y, H_ZZ}. X and Y
/// are single layers of identical rotations; ZZ runs the pair-wire gadget
/// with one workspace wire per wire pair, restored to |0>.
pub fn qnn_layer(kind: QnnLayerKind, theta: f64, n: usize) -> Result<Circuit> {
    if n == 0 || (kind == QnnLayerKind::Zz && n < 2) {
        return Err(Error::BadParam(format!("qnn layer needs n >= 2 for ZZ, n >= 1 otherwise")));
    }
    let labels: Vec<Label> = (1..=n as i64).map(Label::idx).collect();
    let group = GroupSpec::full_symmetric(labels.iter().cloned());
    let gens = group.generators()?;

    match kind {
        QnnLayerKind::X | QnnLayerKind::Y => {
            let mut c = Circuit::with_wires(labels.iter().map(|l| (l.clone(), Role::Active)))?;
            let angle = 2.0 * theta / n as f64;
            let gate = if kind == QnnLayerKind::X {
                SingleGate::Rx(angle)
            } else {
                SingleGate::Ry(angle)
            };
            let layer: Vec<Gate> = labels
                .iter()
                .map(|l| c.single(l, gate.clone()))
                .collect::<Result<_>>()?;
            c.append_layer(layer)?;
            c.witnesses = gens
                .iter()
                .map(|g| SymmetryWitness::new(g.clone(), g.clone()))
                .collect();
            c.group = Some(group);
            Ok(c)
        }
        QnnLayerKind::Zz => {
            let alpha = 2.0 * theta / (n * (n - 1)) as f64;
            let mut pairs = Vec::new();
            for i in 1..=n as i64 {
                for j in i + 1..=n as i64 {
                    pairs.push(Label::pair(i, j));
                }
            }
            let mut c = Circuit::with_wires(
                labels
                    .iter()
                    .map(|l| (l.clone(), Role::Active))
                    .chain(pairs.iter().map(|p| (p.clone(), Role::Workspace))),
            )?;
            let phase_layer: Vec<Gate> = pairs
                .iter()
                .map(|p| c.single(p, SingleGate::GPhase(-alpha)))
                .collect::<Result<_>>()?;
            let mut cnots = Vec::new();
            for p in &pairs {
                if let Label::Pair(i, j) = p {
                    cnots.push(c.cnot(&Label::idx(*i), p)?);
                    cnots.push(c.cnot(&Label::idx(*j), p)?);
                }
            }
            let rot_layer: Vec<Gate> = pairs
                .iter()
                .map(|p| c.single(p, SingleGate::P(2.0 * alpha)))
                .collect::<Result<_>>()?;
            c.append_layer(phase_layer)?;
            c.append_layer(cnots.clone())?;
            c.append_layer(rot_layer)?;
            c.append_layer(cnots)?;
            c.witnesses = gens
                .iter()
                .map(|g| {
                    let on_pairs = induced_pair_action(g)?;
                    Ok(SymmetryWitness::new(g.clone(), g.union(&on_pairs)?))
                })
                .collect::<Result<_>>()?;
            c.group = Some(group);
            Ok(c)
        }
    }
}

/// Reference matrix e^{-i theta H} for the layer Hamiltonians.
pub fn qnn_layer_matrix(kind: QnnLayerKind, theta: f64, n: usize) -> M64 {
    let dim = 1usize << n;
    let mut h = M64::zeros(dim, dim);
    let id2 = M64::identity(2);
    match kind {
        QnnLayerKind::X | QnnLayerKind::Y => {
            let pauli = if kind == QnnLayerKind::X {
                SingleGate::X.matrix::<f64>()
            } else {
                SingleGate::Y.matrix::<f64>()
            };
            for j in 0..n {
                let mut term = M64::identity(1);
                for i in 0..n {
                    term = term.kron(if i == j { &pauli } else { &id2 });
                }
                h = h.add(&term);
            }
            h = h.scale(C64::new(1.0 / n as f64, 0.0));
        }
        QnnLayerKind::Zz => {
            let z = SingleGate::Z.matrix::<f64>();
            for j in 0..n {
                for k in j + 1..n {
                    let mut term = M64::identity(1);
                    for i in 0..n {
                        term = term.kron(if i == j || i == k { &z } else { &id2 });
                    }
                    h = h.add(&term);
                }
            }
            h = h.scale(C64::new(2.0 / (n * (n - 1)) as f64, 0.0));
        }
    }
    h.scale(C64::new(0.0, -theta)).expm()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliBasis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservableKind {
    /// (1/n) sum_j chi_j.
    Mean,
    /// 2/(n(n-1)) sum_{j<k} chi_j chi_k.
    PairMean,
    /// prod_j chi_j.
    Parity,
}

/// Expectation of an equivariant observable on a state restricted to the
/// given wires, computed through the Hamming-weight identities after a base
/// change to Z.
pub fn qnn_expectation(
    state: &DenseStateOf<f64>,
    wires: &[Label],
    basis: PauliBasis,
    kind: ObservableKind,
) -> Result<f64> {
    let mut st = state.clone();
    match basis {
        PauliBasis::Z => {}
        PauliBasis::X => {
            let h = SingleGate::H.matrix::<f64>();
            for w in wires {
                crate::sim::apply_single_to_state(&mut st, w, &h)?;
            }
        }
        PauliBasis::Y => {
            // Y = (SH) Z (SH)^dag, so conjugate the state by (SH)^dag = H S^dag
            let sdg = SingleGate::P(-std::f64::consts::FRAC_PI_2).matrix::<f64>();
            let h = SingleGate::H.matrix::<f64>();
            for w in wires {
                crate::sim::apply_single_to_state(&mut st, w, &sdg)?;
                crate::sim::apply_single_to_state(&mut st, w, &h)?;
            }
        }
    }
    let n = wires.len();
    let nw = st.wire_order.len();
    let mut mask = 0usize;
    for w in wires {
        let rank = st
            .wire_order
            .iter()
            .position(|x| x == w)
            .ok_or_else(|| Error::UnknownWire(w.clone()))?;
        mask |= 1usize << (nw - 1 - rank);
    }
    let mut acc = 0.0f64;
    for (i, a) in st.amps.iter().enumerate() {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let w = (i & mask).count_ones() as f64;
        let value = match kind {
            ObservableKind::Mean => 1.0 - 2.0 * w / n as f64,
            ObservableKind::PairMean => 1.0 - 4.0 * w * (n as f64 - w) / (n * (n - 1)) as f64,
            ObservableKind::Parity => {
                if (w as usize) % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        acc += p * value;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{active_unitary, run_dense, run_sparse, Input};
    use crate::stateprep::{dicke_vector, dicke_wires};
    use crate::symmetry::verify_symmetric;

    #[test]
    fn basis_dimensions_and_conditioning() {
        for (n, m) in [(1usize, 4usize), (2, 10), (3, 20)] {
            let b = perm_symmetric_basis(n, 0).unwrap();
            assert_eq!(b.m, m);
            assert!(b.min_eigenvalue > GRAM_MIN_EIG, "n={n}: {}", b.min_eigenvalue);
        }
    }

    #[test]
    fn decompose_basis_element_gives_unit_vector() {
        let b = perm_symmetric_basis(2, 0).unwrap();
        let u = b.unitaries[1].kron_pow(2);
        let d = decompose_perm_symmetric(&u, &b).unwrap();
        assert!(d.residual < 1e-9);
        assert!((d.alpha[1] - C64::new(1.0, 0.0)).norm() < 1e-6);
        for (i, a) in d.alpha.iter().enumerate() {
            if i != 1 {
                assert!(a.norm() < 1e-6);
            }
        }
    }

    #[test]
    fn decompose_identity_and_swap() {
        let b = perm_symmetric_basis(2, 0).unwrap();
        for u in [M64::identity(4), {
            let mut s = M64::zeros(4, 4);
            for (r, c) in [(0, 0), (2, 1), (1, 2), (3, 3)] {
                s[(r, c)] = C64::new(1.0, 0.0);
            }
            s
        }] {
            let d = decompose_perm_symmetric(&u, &b).unwrap();
            assert!(d.residual < 1e-7);
            assert!(d.l1 <= d.l1_bound);
        }
    }

    #[test]
    fn decompose_rejects_asymmetric() {
        let b = perm_symmetric_basis(2, 0).unwrap();
        let mut u = M64::identity(4);
        u[(1, 1)] = C64::new(0.0, 1.0); // breaks swap symmetry
        assert!(decompose_perm_symmetric(&u, &b).is_err());
    }

    #[test]
    fn random_symmetric_unitaries_decompose() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..=3usize {
            let b = perm_symmetric_basis(n, 0).unwrap();
            for _ in 0..5 {
                let u = random_partition_symmetric_unitary(&[n], &mut rng);
                assert!(u.is_unitary(1e-9));
                let d = decompose_perm_symmetric(&u, &b).unwrap();
                assert!(d.residual < 1e-7, "n={n} residual {}", d.residual);
                assert!(d.l1 <= d.l1_bound);
            }
        }
    }

    #[test]
    fn synth_single_tensor_power() {
        // U = W^{(x) 2} for a fixed W: one-term case
        let w = euler_unitary(0.3, 1.1, -0.4);
        let u = w.kron_pow(2);
        let out = synth_partition_symmetric(&u, &[2], 0, 1e6).unwrap();
        let got = active_unitary::<f64>(&out.circuit, 1e-8).unwrap();
        let phase = pick_phase(&got, &u);
        assert!(got.sub(&u.scale(phase)).max_abs() < 1e-6);
    }

    #[test]
    fn synth_zz_interaction() {
        // e^{i theta Z (x) Z} is swap-invariant on 2 qubits
        let theta = 0.7f64;
        let z = SingleGate::Z.matrix::<f64>();
        let zz = z.kron(&z);
        let u = zz.scale(C64::new(0.0, theta)).expm();
        let out = synth_partition_symmetric(&u, &[2], 0, 1e6).unwrap();
        let got = active_unitary::<f64>(&out.circuit, 1e-8).unwrap();
        let phase = pick_phase(&got, &u);
        assert!(got.sub(&u.scale(phase)).max_abs() < 1e-6, "err {}", got.sub(&u.scale(phase)).max_abs());
    }

    #[test]
    fn synth_two_parts() {
        // A (x) A (x) B with parts (2,1)
        let a = euler_unitary(0.2, 0.9, 1.3);
        let b = euler_unitary(-0.5, 2.0, 0.1);
        let u = a.kron_pow(2).kron(&b);
        let out = synth_partition_symmetric(&u, &[2, 1], 0, 1e6).unwrap();
        let got = active_unitary::<f64>(&out.circuit, 1e-8).unwrap();
        let phase = pick_phase(&got, &u);
        assert!(got.sub(&u.scale(phase)).max_abs() < 1e-6);
        assert!(verify_symmetric(&out.circuit).unwrap().passed());
    }

    fn pick_phase(got: &M64, want: &M64) -> C64 {
        // global phase aligning the largest entry
        let mut best = (0usize, 0usize);
        let mut mag = 0.0;
        for i in 0..want.rows {
            for j in 0..want.cols {
                if want[(i, j)].norm() > mag {
                    mag = want[(i, j)].norm();
                    best = (i, j);
                }
            }
        }
        got[best] / want[best]
    }

    #[test]
    fn subspace_unitary_identity_and_dft() {
        let n = 2usize;
        // identity acts trivially on each Dicke state
        let us = M64::identity(n + 1);
        let c = symmetric_subspace_unitary(&us, n).unwrap();
        assert!(verify_symmetric(&c).unwrap().passed());
        for k in 0..=n {
            let input = dicke_input(n, k);
            let st = run_sparse::<f64>(&c, &input).unwrap();
            let (v, leak) = st.project_rest_zero(&dicke_wires(n)).unwrap();
            assert!(leak < 1e-10, "k={k} leak {leak}");
            let fid = crate::linalg::overlap(&dicke_vector(n, k), &v);
            assert!(fid >= 1.0 - 1e-6, "k={k} fidelity {fid}");
        }

        // 3x3 DFT on the Dicke basis
        let mut us = M64::zeros(3, 3);
        let s = 1.0 / 3f64.sqrt();
        for x in 0..3 {
            for y in 0..3 {
                let ang = 2.0 * std::f64::consts::PI * (x * y % 3) as f64 / 3.0;
                us[(y, x)] = C64::new(s * ang.cos(), s * ang.sin());
            }
        }
        let c = symmetric_subspace_unitary(&us, n).unwrap();
        for k in 0..=n {
            let input = dicke_input(n, k);
            let st = run_sparse::<f64>(&c, &input).unwrap();
            let (v, leak) = st.project_rest_zero(&dicke_wires(n)).unwrap();
            assert!(leak < 1e-6, "k={k} leak {leak}");
            // expected: sum_j us[j][k] |D_j>
            let mut want = vec![C64::new(0.0, 0.0); 1 << n];
            for j in 0..=n {
                let dv = dicke_vector(n, j);
                for (w, d) in want.iter_mut().zip(dv) {
                    *w += us[(j, k)] * d;
                }
            }
            let fid = crate::linalg::overlap(&want, &v);
            assert!(fid >= 1.0 - 1e-6, "k={k} fidelity {fid}");
        }
    }

    fn dicke_input(n: usize, k: usize) -> Input<f64> {
        Input::Vector(dicke_vector(n, k))
    }

    #[test]
    fn qnn_layers_match_exponentials() {
        // X layer at theta=0 is the identity
        let c = qnn_layer(QnnLayerKind::X, 0.0, 2).unwrap();
        let u = active_unitary::<f64>(&c, 1e-9).unwrap();
        assert!(u.sub(&M64::identity(4)).max_abs() < 1e-12);

        for (kind, n, theta) in [
            (QnnLayerKind::X, 3usize, 0.8),
            (QnnLayerKind::Y, 2, 1.3),
            (QnnLayerKind::Zz, 2, 0.9),
            (QnnLayerKind::Zz, 3, 0.5),
        ] {
            let c = qnn_layer(kind, theta, n).unwrap();
            assert!(verify_symmetric(&c).unwrap().passed());
            let got = active_unitary::<f64>(&c, 1e-9).unwrap();
            let want = qnn_layer_matrix(kind, theta, n);
            assert!(
                got.sub(&want).max_abs() < 1e-9,
                "{kind:?} n={n}: {}",
                got.sub(&want).max_abs()
            );
        }
    }

    #[test]
    fn qnn_expectations() {
        // |0^n>: mean_Z = 1
        let n = 3;
        let labels = dicke_wires(n);
        let c = Circuit::with_wires(labels.iter().map(|l| (l.clone(), Role::Active))).unwrap();
        let st = run_dense::<f64>(&c, &Input::Zeros).unwrap();
        let e = qnn_expectation(&st, &labels, PauliBasis::Z, ObservableKind::Mean).unwrap();
        assert!((e - 1.0).abs() < 1e-12);

        // |D^4_2>: mean_Z = 0
        let b = dicke(4, 2).unwrap();
        let st = run_dense::<f64>(&b.circuit, &Input::Zeros).unwrap();
        let e = qnn_expectation(&st, &dicke_wires(4), PauliBasis::Z, ObservableKind::Mean).unwrap();
        assert!(e.abs() < 1e-9);

        // |11>: pairmean_Z = +1, parity_Z = +1
        let labels2 = dicke_wires(2);
        let mut c = Circuit::with_wires(labels2.iter().map(|l| (l.clone(), Role::Active))).unwrap();
        let layer: Vec<Gate> = labels2
            .iter()
            .map(|l| c.single(l, SingleGate::X).unwrap())
            .collect();
        c.append_layer(layer).unwrap();
        let st = run_dense::<f64>(&c, &Input::Zeros).unwrap();
        let e = qnn_expectation(&st, &labels2, PauliBasis::Z, ObservableKind::PairMean).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
        let e = qnn_expectation(&st, &labels2, PauliBasis::Z, ObservableKind::Parity).unwrap();
        assert!((e - 1.0).abs() < 1e-12);

        // |+>^2: mean_X = 1
        let mut c = Circuit::with_wires(labels2.iter().map(|l| (l.clone(), Role::Active))).unwrap();
        let layer: Vec<Gate> = labels2
            .iter()
            .map(|l| c.single(l, SingleGate::H).unwrap())
            .collect();
        c.append_layer(layer).unwrap();
        let st = run_dense::<f64>(&c, &Input::Zeros).unwrap();
        let e = qnn_expectation(&st, &labels2, PauliBasis::X, ObservableKind::Mean).unwrap();
        assert!((e - 1.0).abs() < 1e-9);

        // Y eigenstate |i> = (|0> + i|1>)/sqrt2 on one wire: mean_Y = 1
        let one = vec![Label::idx(1)];
        let mut c = Circuit::with_wires(one.iter().map(|l| (l.clone(), Role::Active))).unwrap();
        let h = c.single(&one[0], SingleGate::H).unwrap();
        c.append_layer([h]).unwrap();
        let s_gate = c.single(&one[0], SingleGate::P(std::f64::consts::FRAC_PI_2)).unwrap();
        c.append_layer([s_gate]).unwrap();
        let st = run_dense::<f64>(&c, &Input::Zeros).unwrap();
        let e = qnn_expectation(&st, &one, PauliBasis::Y, ObservableKind::Mean).unwrap();
        assert!((e - 1.0).abs() < 1e-9);
    }

    #[test]
    fn qnn_zz_workspace_restored() {
        let c = qnn_layer(QnnLayerKind::Zz, 0.7, 3).unwrap();
        let st = run_dense::<f64>(&c, &Input::bits([(Label::idx(1), true)])).unwrap();
        let (_, leak) = st.project_rest_zero(&dicke_wires(3)).unwrap();
        assert!(leak < 1e-12);
    }
}
