//! The row/column-symmetric XOR-SAT pipeline: a chooser that entangles the
//! instance with Dicke-selected row/column choices and amplifies the
//! all-used component, a copier writing the enlarged instance, and a
//! reversible unrolled Gaussian-elimination solver on wires the symmetry
//! group never moves. The satisfiability flag agrees with the classical
//! oracle with probability 1 on every branch.

use crate::circuit::{Circuit, Gate, Role};
use crate::error::{Error, Result};
use crate::labels::{GroupSpec, Label, LabelPermutation};
use crate::stateprep::{binomial, dicke};
use crate::subroutines::{amplitude_amplify, Prob};
use crate::symmetry::SymmetryWitness;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

// ---------------------------------------------------------------------------
// instances and the classical oracle
// ---------------------------------------------------------------------------

/// A GF(2) linear system A x = b with m constraints over n variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XorSatInstance {
    pub m: usize,
    pub n: usize,
    /// a[i][j] = coefficient of variable j in constraint i.
    pub a: Vec<Vec<bool>>,
    pub b: Vec<bool>,
}

impl XorSatInstance {
    pub fn new(a: Vec<Vec<bool>>, b: Vec<bool>) -> Result<XorSatInstance> {
        let m = a.len();
        if m == 0 || b.len() != m {
            return Err(Error::BadParam("instance needs m >= 1 rows and matching b".into()));
        }
        let n = a[0].len();
        if n == 0 || a.iter().any(|row| row.len() != n) {
            return Err(Error::BadParam("instance needs n >= 1 uniform columns".into()));
        }
        Ok(XorSatInstance { m, n, a, b })
    }

    pub fn from_bits(m: usize, n: usize, a_mask: usize, b_mask: usize) -> Result<XorSatInstance> {
        let a = (0..m)
            .map(|i| (0..n).map(|j| a_mask >> (i * n + j) & 1 == 1).collect())
            .collect();
        let b = (0..m).map(|i| b_mask >> i & 1 == 1).collect();
        XorSatInstance::new(a, b)
    }
}

/// Satisfiability over GF(2): rank(A) == rank([A|b]).
pub fn classical_solve(inst: &XorSatInstance) -> bool {
    // bitmask elimination; bit n holds b
    let mut rows: Vec<u128> = inst
        .a
        .iter()
        .zip(&inst.b)
        .map(|(row, b)| {
            let mut r: u128 = 0;
            for (j, v) in row.iter().enumerate() {
                if *v {
                    r |= 1 << j;
                }
            }
            if *b {
                r |= 1 << inst.n;
            }
            r
        })
        .collect();
    let mut pivot_row = 0usize;
    for col in 0..inst.n {
        let bit = 1u128 << col;
        if let Some(r) = (pivot_row..rows.len()).find(|r| rows[*r] & bit != 0) {
            rows.swap(pivot_row, r);
            for i in 0..rows.len() {
                if i != pivot_row && rows[i] & bit != 0 {
                    rows[i] ^= rows[pivot_row];
                }
            }
            pivot_row += 1;
        }
    }
    !rows.iter().any(|r| *r == 1 << inst.n)
}

// ---------------------------------------------------------------------------
// parameters
// ---------------------------------------------------------------------------

/// Number of onto functions from a t-element set to an s-element set, by
/// inclusion-exclusion.
pub fn surjection_count(t: u64, s: u64) -> BigInt {
    let mut acc = BigInt::zero();
    for i in 0..=s {
        let term = binomial(s, i) * BigInt::from(s - i).pow(t as u32);
        if i % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

/// Exact probability that every row and every column is chosen at least
/// once: surj(mt -> m)/m^mt times surj(nt -> n)/n^nt.
pub fn surjectivity_probability(m: u64, mt: u64, n: u64, nt: u64) -> BigRational {
    if mt < m || nt < n {
        return BigRational::zero();
    }
    let rows = BigRational::new(surjection_count(mt, m), BigInt::from(m).pow(mt as u32));
    let cols = BigRational::new(surjection_count(nt, n), BigInt::from(n).pow(nt as u32));
    rows * cols
}

/// floor(10 m log2 m), with m = 1 mapping to 1.
pub fn default_multiplier(m: usize) -> usize {
    if m <= 1 {
        1
    } else {
        (10.0 * m as f64 * (m as f64).log2()).floor() as usize
    }
}

#[derive(Debug, Clone)]
pub struct ChooserParams {
    pub m: usize,
    pub n: usize,
    pub m_tilde: usize,
    pub n_tilde: usize,
    pub p_surj: BigRational,
    /// Amplification rounds (0 when p_surj = 1).
    pub rounds: u32,
}

impl ChooserParams {
    pub fn derive(m: usize, n: usize, m_tilde: usize, n_tilde: usize) -> Result<ChooserParams> {
        if m == 0 || n == 0 {
            return Err(Error::BadParam("xor-sat needs m, n >= 1".into()));
        }
        let p = surjectivity_probability(m as u64, m_tilde as u64, n as u64, n_tilde as u64);
        if !p.is_positive() {
            return Err(Error::BadParam(format!(
                "surjectivity probability vanishes for multipliers {m_tilde}, {n_tilde}"
            )));
        }
        Ok(ChooserParams {
            m,
            n,
            m_tilde,
            n_tilde,
            p_surj: p,
            rounds: 0,
        })
    }

    pub fn with_defaults(m: usize, n: usize) -> Result<ChooserParams> {
        ChooserParams::derive(m, n, default_multiplier(m), default_multiplier(n))
    }
}

// ---------------------------------------------------------------------------
// wire labels
// ---------------------------------------------------------------------------

pub fn x_label(i: usize) -> Label {
    Label::tagged("x", Label::idx(i as i64))
}

pub fn y_label(j: usize) -> Label {
    Label::tagged("y", Label::idx(j as i64))
}

pub fn a_wire(x: usize, y: usize) -> Label {
    Label::tuple([x_label(x), y_label(y)])
}

pub fn b_wire(x: usize) -> Label {
    Label::tagged("b", x_label(x))
}

pub fn row_wire(i: usize, x: usize) -> Label {
    Label::tagged("row", Label::tuple([Label::idx(i as i64), Label::idx(x as i64)]))
}

pub fn col_wire(j: usize, y: usize) -> Label {
    Label::tagged("col", Label::tuple([Label::idx(j as i64), Label::idx(y as i64)]))
}

pub fn use_x_wire(x: usize) -> Label {
    Label::tagged("use", x_label(x))
}

pub fn use_y_wire(y: usize) -> Label {
    Label::tagged("use", y_label(y))
}

pub fn use_all_wire() -> Label {
    Label::tagged("use", Label::atom("all"))
}

pub fn ap_wire(i: usize, j: usize) -> Label {
    Label::tagged("ap", Label::tuple([Label::idx(i as i64), Label::idx(j as i64)]))
}

pub fn bp_wire(i: usize) -> Label {
    Label::tagged("bp", Label::idx(i as i64))
}

fn slv(kind: &str, l: i64, i: i64) -> Label {
    Label::tagged(
        "slv",
        Label::tuple([Label::atom(kind), Label::idx(l), Label::idx(i)]),
    )
}

pub fn sat_out_wire() -> Label {
    Label::atom("sat")
}

// ---------------------------------------------------------------------------
// chooser
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ChooserBuild {
    pub circuit: Circuit,
    pub params: ChooserParams,
}

/// Generators of the S_m x S_n action: (sigma-part on the "active side",
/// extension part on the choice/use wires).
fn symmetry_generators(
    m: usize,
    n: usize,
    m_tilde: usize,
    n_tilde: usize,
    include_instance: bool,
    include_use: bool,
) -> Result<Vec<(LabelPermutation, LabelPermutation)>> {
    let mut out = Vec::new();
    let sm = GroupSpec::s_n(m).generators()?;
    let sn = GroupSpec::s_n(n).generators()?;
    let idx_of = |l: &Label| -> usize {
        match l {
            Label::Index(i) => *i as usize,
            _ => unreachable!(),
        }
    };
    for (which, base_gens) in [(0usize, sm), (1usize, sn)] {
        for g in base_gens {
            let sigma = |x: usize| -> usize {
                if which == 0 {
                    idx_of(&g.apply_or_fixed(&Label::idx(x as i64)))
                } else {
                    x
                }
            };
            let tau = |y: usize| -> usize {
                if which == 1 {
                    idx_of(&g.apply_or_fixed(&Label::idx(y as i64)))
                } else {
                    y
                }
            };
            let mut ext_pairs = Vec::new();
            for i in 1..=m_tilde {
                for x in 1..=m {
                    ext_pairs.push((row_wire(i, x), row_wire(i, sigma(x))));
                }
            }
            for j in 1..=n_tilde {
                for y in 1..=n {
                    ext_pairs.push((col_wire(j, y), col_wire(j, tau(y))));
                }
            }
            if include_use {
                for x in 1..=m {
                    ext_pairs.push((use_x_wire(x), use_x_wire(sigma(x))));
                }
                for y in 1..=n {
                    ext_pairs.push((use_y_wire(y), use_y_wire(tau(y))));
                }
            }
            let active_pairs = if include_instance {
                let mut pairs = Vec::new();
                for x in 1..=m {
                    for y in 1..=n {
                        pairs.push((a_wire(x, y), a_wire(sigma(x), tau(y))));
                    }
                    pairs.push((b_wire(x), b_wire(sigma(x))));
                }
                pairs
            } else {
                ext_pairs.clone()
            };
            out.push((
                LabelPermutation::from_pairs(active_pairs)?,
                LabelPermutation::from_pairs(ext_pairs)?,
            ));
        }
    }
    Ok(out)
}

/// The preparation part of the chooser: one weight-1 Dicke register per
/// chosen row and column; the three Dicke ancillas are shared across the
/// registers, whose workspace symmetries are identical.
fn chooser_preparation(params: &ChooserParams) -> Result<Circuit> {
    let ChooserParams { m, n, m_tilde, n_tilde, .. } = *params;
    let mut a = Circuit::new();
    for i in 1..=m_tilde {
        for x in 1..=m {
            a.add_wire(row_wire(i, x), Role::Active)?;
        }
    }
    for j in 1..=n_tilde {
        for y in 1..=n {
            a.add_wire(col_wire(j, y), Role::Active)?;
        }
    }
    let row_base = dicke(m, 1)?.circuit;
    for i in 1..=m_tilde {
        let reg = row_base.relabelled(|l| match l {
            Label::Index(x) => row_wire(i, *x as usize),
            other => other.clone(),
        })?;
        for w in reg.wires() {
            if !a.has_wire(&w.label) {
                a.add_wire(w.label.clone(), Role::Workspace)?;
            }
        }
        a.append_circuit(&reg)?;
    }
    let col_base = dicke(n, 1)?.circuit;
    for j in 1..=n_tilde {
        let reg = col_base.relabelled(|l| match l {
            Label::Index(y) => col_wire(j, *y as usize),
            other => other.clone(),
        })?;
        for w in reg.wires() {
            if !a.has_wire(&w.label) {
                a.add_wire(w.label.clone(), Role::Workspace)?;
            }
        }
        a.append_circuit(&reg)?;
    }

    let fixed: Vec<Label> = a
        .wires()
        .iter()
        .filter(|w| w.role == Role::Workspace)
        .map(|w| w.label.clone())
        .collect();
    let gens = symmetry_generators(m, n, m_tilde, n_tilde, false, false)?;
    a.witnesses = gens
        .iter()
        .map(|(sigma, ext)| {
            Ok(SymmetryWitness::new(
                sigma.clone(),
                ext.extend_identity(fixed.iter().cloned())?,
            ))
        })
        .collect::<Result<_>>()?;
    a.group = Some(GroupSpec::Explicit(gens.into_iter().map(|(s, _)| s).collect()));
    Ok(a)
}

/// The surjectivity distinguisher: use(x)/use(y) threshold flags, the
/// aggregate use(all) threshold, and flag uncomputation.
fn chooser_distinguisher(params: &ChooserParams) -> Result<Circuit> {
    let ChooserParams { m, n, m_tilde, n_tilde, .. } = *params;
    let mut d = Circuit::new();
    for i in 1..=m_tilde {
        for x in 1..=m {
            d.add_wire(row_wire(i, x), Role::Active)?;
        }
    }
    for j in 1..=n_tilde {
        for y in 1..=n {
            d.add_wire(col_wire(j, y), Role::Active)?;
        }
    }
    for x in 1..=m {
        d.add_wire(use_x_wire(x), Role::Workspace)?;
    }
    for y in 1..=n {
        d.add_wire(use_y_wire(y), Role::Workspace)?;
    }
    d.add_wire(use_all_wire(), Role::Workspace)?;

    let mut use_layer = Vec::new();
    for x in 1..=m {
        let support: Vec<Label> = (1..=m_tilde).map(|i| row_wire(i, x)).collect();
        use_layer.push(d.thr(1, &use_x_wire(x), support.iter())?);
    }
    for y in 1..=n {
        let support: Vec<Label> = (1..=n_tilde).map(|j| col_wire(j, y)).collect();
        use_layer.push(d.thr(1, &use_y_wire(y), support.iter())?);
    }
    let all_support: Vec<Label> = (1..=m)
        .map(use_x_wire)
        .chain((1..=n).map(use_y_wire))
        .collect();
    d.append_layer(use_layer.clone())?;
    d.append_layer([d.thr((m + n) as u32, &use_all_wire(), all_support.iter())?])?;
    d.append_layer(use_layer)?;

    let gens = symmetry_generators(m, n, m_tilde, n_tilde, false, true)?;
    d.witnesses = gens
        .iter()
        .map(|(_, ext)| {
            // the active side of the distinguisher is the choice registers
            let sigma = symmetry_generators(m, n, m_tilde, n_tilde, false, false)?
                .into_iter()
                .find(|(s, _)| {
                    s.iter()
                        .all(|(a, b)| ext.apply_or_fixed(a) == *b)
                })
                .map(|(s, _)| s);
            let sigma = sigma.ok_or_else(|| Error::Symmetry("generator mismatch".into()))?;
            Ok(SymmetryWitness::new(
                sigma,
                ext.extend_identity([use_all_wire()])?,
            ))
        })
        .collect::<Result<_>>()?;
    d.group = Some(GroupSpec::Explicit(
        symmetry_generators(m, n, m_tilde, n_tilde, false, false)?
            .into_iter()
            .map(|(s, _)| s)
            .collect(),
    ));
    Ok(d)
}

/// Build the chooser: Dicke registers plus amplification of the surjective
/// component over the use(all) flag. At p = 1 the preparation passes
/// through unamplified.
pub fn build_chooser(params: &ChooserParams) -> Result<ChooserBuild> {
    let a = chooser_preparation(params)?;
    if params.p_surj.is_one() {
        return Ok(ChooserBuild {
            circuit: a,
            params: params.clone(),
        });
    }
    let d = chooser_distinguisher(params)?;
    let aa = amplitude_amplify(&a, &d, &use_all_wire(), &Prob::Exact(params.p_surj.clone()))?;
    let mut params = params.clone();
    params.rounds = aa.params.k;
    Ok(ChooserBuild {
        circuit: aa.circuit,
        params,
    })
}

// ---------------------------------------------------------------------------
// copier
// ---------------------------------------------------------------------------

/// One commuting layer writing the enlarged instance: m*n*mt*nt triple
/// thresholds into A'(i,j) plus m*mt pair thresholds into b'(i).
pub fn build_copier(params: &ChooserParams) -> Result<Circuit> {
    let ChooserParams { m, n, m_tilde, n_tilde, .. } = *params;
    let mut c = Circuit::new();
    for x in 1..=m {
        for y in 1..=n {
            c.add_wire(a_wire(x, y), Role::Active)?;
        }
    }
    for x in 1..=m {
        c.add_wire(b_wire(x), Role::Active)?;
    }
    for i in 1..=m_tilde {
        for x in 1..=m {
            c.add_wire(row_wire(i, x), Role::Active)?;
        }
    }
    for j in 1..=n_tilde {
        for y in 1..=n {
            c.add_wire(col_wire(j, y), Role::Active)?;
        }
    }
    for i in 1..=m_tilde {
        for j in 1..=n_tilde {
            c.add_wire(ap_wire(i, j), Role::Workspace)?;
        }
    }
    for i in 1..=m_tilde {
        c.add_wire(bp_wire(i), Role::Workspace)?;
    }

    let mut layer = Vec::new();
    for x in 1..=m {
        for y in 1..=n {
            for i in 1..=m_tilde {
                for j in 1..=n_tilde {
                    let support = [a_wire(x, y), row_wire(i, x), col_wire(j, y)];
                    layer.push(c.thr(3, &ap_wire(i, j), support.iter())?);
                }
            }
        }
    }
    for x in 1..=m {
        for i in 1..=m_tilde {
            let support = [b_wire(x), row_wire(i, x)];
            layer.push(c.thr(2, &bp_wire(i), support.iter())?);
        }
    }
    c.append_layer(layer)?;
    Ok(c)
}

/// Exact copier gate count: m*n*mt*nt + m*mt.
pub fn copier_gate_count(params: &ChooserParams) -> usize {
    params.m * params.n * params.m_tilde * params.n_tilde + params.m * params.m_tilde
}

// ---------------------------------------------------------------------------
// solver
// ---------------------------------------------------------------------------

/// Reversible unrolled GF(2) Gaussian elimination over the (A', b') wires.
/// Forward pass per column: snapshot the column, derive first-eligible
/// pivot flags, broadcast the pivot row, eliminate. After the sweep a row is
/// all-zero iff it was never used as a pivot, so satisfiability is "no
/// unused row carries b' = 1". The flag is copied out and the forward pass
/// is applied again in reverse to restore the scratch. All wires carry
/// trivial group action.
pub fn build_solver(m_tilde: usize, n_tilde: usize) -> Result<Circuit> {
    let mt = m_tilde;
    let nt = n_tilde;
    let mut c = Circuit::new();
    for i in 1..=mt {
        for j in 1..=nt {
            c.add_wire(ap_wire(i, j), Role::Active)?;
        }
    }
    for i in 1..=mt {
        c.add_wire(bp_wire(i), Role::Active)?;
    }
    let abar = |i: usize, j: usize| slv("ab", i as i64, j as i64);
    let bbar = |i: usize| slv("bb", 0, i as i64);
    let acol = |l: usize, i: usize| slv("ac", l as i64, i as i64);
    let unot = |l: usize, i: usize| slv("un", l as i64, i as i64);
    let elig = |l: usize, i: usize| slv("el", l as i64, i as i64);
    let elig_not = |l: usize, i: usize| slv("en", l as i64, i as i64);
    let piv = |l: usize, i: usize| slv("pv", l as i64, i as i64);
    let piv_not = |l: usize, i: usize| slv("pn", l as i64, i as i64);
    let used = |l: usize, i: usize| slv("us", l as i64, i as i64);
    let prow = |l: usize, j: usize| slv("pr", l as i64, j as i64);
    let pb = |l: usize| slv("pb", l as i64, 0);
    let unot_final = |i: usize| slv("uf", 0, i as i64);
    let bad = |i: usize| slv("bd", 0, i as i64);
    let sat_scratch = || slv("st", 0, 0);

    for i in 1..=mt {
        for j in 1..=nt {
            c.add_wire(abar(i, j), Role::Workspace)?;
        }
        c.add_wire(bbar(i), Role::Workspace)?;
    }
    for l in 1..=nt {
        for i in 1..=mt {
            c.add_wire(acol(l, i), Role::Workspace)?;
            if l >= 2 {
                c.add_wire(unot(l, i), Role::Workspace)?;
            }
            c.add_wire(elig(l, i), Role::Workspace)?;
            c.add_wire(elig_not(l, i), Role::Workspace)?;
            c.add_wire(piv(l, i), Role::Workspace)?;
            c.add_wire(piv_not(l, i), Role::Workspace)?;
            c.add_wire(used(l, i), Role::Workspace)?;
        }
        for j in 1..=nt {
            c.add_wire(prow(l, j), Role::Workspace)?;
        }
        c.add_wire(pb(l), Role::Workspace)?;
    }
    for i in 1..=mt {
        c.add_wire(unot_final(i), Role::Workspace)?;
        c.add_wire(bad(i), Role::Workspace)?;
    }
    c.add_wire(sat_scratch(), Role::Workspace)?;
    c.add_wire(sat_out_wire(), Role::Workspace)?;

    // ---- forward pass ----
    let mut forward: Vec<Vec<Gate>> = Vec::new();
    let mut copy_in = Vec::new();
    for i in 1..=mt {
        for j in 1..=nt {
            copy_in.push(c.cnot(&ap_wire(i, j), &abar(i, j))?);
        }
        copy_in.push(c.cnot(&bp_wire(i), &bbar(i))?);
    }
    forward.push(copy_in);

    for l in 1..=nt {
        let mut snap = Vec::new();
        for i in 1..=mt {
            snap.push(c.cnot(&abar(i, l), &acol(l, i))?);
        }
        forward.push(snap);

        if l >= 2 {
            let mut unots = Vec::new();
            for i in 1..=mt {
                unots.push(c.eq(0, &unot(l, i), [&used(l - 1, i)])?);
            }
            forward.push(unots);
        }
        let mut eligs = Vec::new();
        for i in 1..=mt {
            if l == 1 {
                eligs.push(c.cnot(&acol(l, i), &elig(l, i))?);
            } else {
                eligs.push(c.thr(2, &elig(l, i), [&acol(l, i), &unot(l, i)])?);
            }
        }
        forward.push(eligs);
        let mut elig_nots = Vec::new();
        for i in 1..=mt {
            elig_nots.push(c.eq(0, &elig_not(l, i), [&elig(l, i)])?);
        }
        forward.push(elig_nots);

        let mut pivots = Vec::new();
        for i in 1..=mt {
            let mut support = vec![elig(l, i)];
            for prev in 1..i {
                support.push(elig_not(l, prev));
            }
            pivots.push(c.thr(i as u32, &piv(l, i), support.iter())?);
        }
        forward.push(pivots);
        let mut piv_nots = Vec::new();
        for i in 1..=mt {
            piv_nots.push(c.eq(0, &piv_not(l, i), [&piv(l, i)])?);
        }
        forward.push(piv_nots);

        let mut useds = Vec::new();
        for i in 1..=mt {
            if l == 1 {
                useds.push(c.cnot(&piv(l, i), &used(l, i))?);
            } else {
                useds.push(c.thr(1, &used(l, i), [&used(l - 1, i), &piv(l, i)])?);
            }
        }
        forward.push(useds);

        // at most one pivot flag is set, so the accumulation is a copy
        let mut broadcast = Vec::new();
        for j in 1..=nt {
            for i in 1..=mt {
                broadcast.push(c.thr(2, &prow(l, j), [&abar(i, j), &piv(l, i)])?);
            }
        }
        for i in 1..=mt {
            broadcast.push(c.thr(2, &pb(l), [&bbar(i), &piv(l, i)])?);
        }
        forward.push(broadcast);

        let mut elim = Vec::new();
        for i in 1..=mt {
            for j in 1..=nt {
                elim.push(c.thr(3, &abar(i, j), [&prow(l, j), &acol(l, i), &piv_not(l, i)])?);
            }
            elim.push(c.thr(3, &bbar(i), [&pb(l), &acol(l, i), &piv_not(l, i)])?);
        }
        forward.push(elim);
    }

    let mut unf = Vec::new();
    for i in 1..=mt {
        unf.push(c.eq(0, &unot_final(i), [&used(nt, i)])?);
    }
    forward.push(unf);
    let mut bads = Vec::new();
    for i in 1..=mt {
        bads.push(c.thr(2, &bad(i), [&unot_final(i), &bbar(i)])?);
    }
    forward.push(bads);
    let bad_wires: Vec<Label> = (1..=mt).map(bad).collect();
    forward.push(vec![c.eq(0, &sat_scratch(), bad_wires.iter())?]);

    for layer in &forward {
        c.append_layer(layer.clone())?;
    }
    c.append_layer([c.cnot(&sat_scratch(), &sat_out_wire())?])?;
    for layer in forward.iter().rev() {
        c.append_layer(layer.clone())?;
    }
    Ok(c)
}

// ---------------------------------------------------------------------------
// the full pipeline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct XorSatBuild {
    pub circuit: Circuit,
    pub params: ChooserParams,
    /// Layer count of the chooser prefix (instance-independent; the sparse
    /// state after it can be cached across instances).
    pub chooser_layers: usize,
    pub out: Label,
}

/// Assemble chooser, copier and solver over the instance wires. The circuit
/// depends only on the dimensions; the instance enters as the active-wire
/// input assignment.
pub fn build_full(m: usize, n: usize, params: &ChooserParams) -> Result<XorSatBuild> {
    if params.m != m || params.n != n {
        return Err(Error::BadParam("parameter dimensions do not match".into()));
    }
    let chooser = build_chooser(params)?;
    let copier = build_copier(params)?;
    let solver = build_solver(params.m_tilde, params.n_tilde)?;

    let mut full = Circuit::new();
    for x in 1..=m {
        for y in 1..=n {
            full.add_wire(a_wire(x, y), Role::Active)?;
        }
    }
    for x in 1..=m {
        full.add_wire(b_wire(x), Role::Active)?;
    }
    for part in [&chooser.circuit, &copier, &solver] {
        for w in part.wires() {
            if !full.has_wire(&w.label) {
                full.add_wire(w.label.clone(), Role::Workspace)?;
            }
        }
    }
    full.append_circuit(&chooser.circuit)?;
    let chooser_layers = full.layers.len();
    full.append_circuit(&copier)?;
    full.append_circuit(&solver)?;

    let gens = symmetry_generators(m, n, params.m_tilde, params.n_tilde, true, true)?;
    full.witnesses = gens
        .iter()
        .map(|(sigma, ext)| {
            let mut pairs: Vec<(Label, Label)> = sigma
                .iter()
                .map(|(a, b)| (a.clone(), b.clone()))
                .chain(ext.iter().map(|(a, b)| (a.clone(), b.clone())))
                .collect();
            for w in full.wires() {
                if !sigma.contains(&w.label) && !ext.contains(&w.label) {
                    pairs.push((w.label.clone(), w.label.clone()));
                }
            }
            Ok(SymmetryWitness::new(
                sigma.clone(),
                LabelPermutation::from_pairs(pairs)?,
            ))
        })
        .collect::<Result<_>>()?;
    full.group = Some(GroupSpec::Explicit(gens.into_iter().map(|(s, _)| s).collect()));
    full.provenance = vec![
        format!(
            "builder=xorsat m={m} n={n} mtilde={} ntilde={}",
            params.m_tilde, params.n_tilde
        ),
        format!("p_surj={}/{}", params.p_surj.numer(), params.p_surj.denom()),
        format!("rounds={}", chooser.params.rounds),
    ];
    Ok(XorSatBuild {
        circuit: full,
        params: chooser.params,
        chooser_layers,
        out: sat_out_wire(),
    })
}

/// Sparse state after the chooser prefix on the all-zero input. The chooser
/// never touches the active wires, so an instance can be injected afterwards
/// by XOR-ing its bits into every branch key.
pub fn chooser_cache(build: &XorSatBuild) -> Result<crate::sim::SparseStateOf<f64>> {
    let mut run = crate::sim::SparseRun::<f64>::new(
        &build.circuit,
        &crate::sim::Input::Bits(std::collections::HashMap::new()),
    )?;
    run.apply_range(0..build.chooser_layers)?;
    Ok(run.state)
}

/// Finish a pipeline run from a cached chooser state for a given instance;
/// returns the probability of the satisfiability flag.
pub fn flag_probability_cached(
    build: &XorSatBuild,
    cache: &crate::sim::SparseStateOf<f64>,
    inst: &XorSatInstance,
) -> Result<f64> {
    let mut run = crate::sim::SparseRun::<f64>::new(
        &build.circuit,
        &crate::sim::Input::Bits(instance_input(inst)),
    )?;
    run.state = cache.clone();
    let order = run.state.wire_order.clone();
    for (label, v) in instance_input(inst) {
        if !v {
            continue;
        }
        let rank = order
            .iter()
            .position(|w| *w == label)
            .ok_or_else(|| Error::UnknownWire(label.clone()))?;
        let bit = (order.len() - 1 - rank) as u32;
        for (k, _) in run.state.branches.iter_mut() {
            k[(bit / 64) as usize] ^= 1u64 << (bit % 64);
        }
    }
    run.apply_range(build.chooser_layers..build.circuit.layers.len())?;
    run.state.probability(&[(sat_out_wire(), true)])
}

/// The input assignment encoding an instance on the active wires.
pub fn instance_input(inst: &XorSatInstance) -> std::collections::HashMap<Label, bool> {
    let mut bits = std::collections::HashMap::new();
    for x in 1..=inst.m {
        for y in 1..=inst.n {
            bits.insert(a_wire(x, y), inst.a[x - 1][y - 1]);
        }
        bits.insert(b_wire(x), inst.b[x - 1]);
    }
    bits
}
