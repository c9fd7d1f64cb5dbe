//! Structured wire labels, finite permutation groups given by generators,
//! and the induced actions on pairs and bounded-size subsets.
//!
//! Labels are structured values with a total canonical order; the textual
//! form (atoms as bare names, pairs as `{i,j}`, subsets as `{i,j,k}`, tuples
//! as `(a,b)`, tagged as `tag:inner`) exists only in the file format.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// A structured wire name.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Label {
    Atom(Arc<str>),
    Index(i64),
    /// Unordered pair {i, j}, stored with i < j.
    Pair(i64, i64),
    /// Duplicate-free sorted integer set (may be empty).
    Subset(Arc<[i64]>),
    Tuple(Arc<[Label]>),
    Tagged(Arc<str>, Arc<Label>),
}

impl Label {
    pub fn atom(name: &str) -> Self {
        Label::Atom(name.into())
    }

    pub fn idx(i: i64) -> Self {
        Label::Index(i)
    }

    /// Unordered pair; panics if i == j.
    pub fn pair(i: i64, j: i64) -> Self {
        assert!(i != j, "pair labels need two distinct indices");
        Label::Pair(i.min(j), i.max(j))
    }

    /// Sorted duplicate-free subset.
    pub fn subset<I: IntoIterator<Item = i64>>(items: I) -> Self {
        let set: BTreeSet<i64> = items.into_iter().collect();
        Label::Subset(set.into_iter().collect::<Vec<_>>().into())
    }

    pub fn tuple<I: IntoIterator<Item = Label>>(items: I) -> Self {
        Label::Tuple(items.into_iter().collect::<Vec<_>>().into())
    }

    pub fn tagged(tag: &str, inner: Label) -> Self {
        Label::Tagged(tag.into(), Arc::new(inner))
    }

    fn variant_rank(&self) -> u8 {
        match self {
            Label::Atom(_) => 0,
            Label::Index(_) => 1,
            Label::Pair(..) => 2,
            Label::Subset(_) => 3,
            Label::Tuple(_) => 4,
            Label::Tagged(..) => 5,
        }
    }
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        use Label::*;
        match (self, other) {
            (Atom(a), Atom(b)) => a.cmp(b),
            (Index(a), Index(b)) => a.cmp(b),
            (Pair(a1, a2), Pair(b1, b2)) => (a1, a2).cmp(&(b1, b2)),
            (Subset(a), Subset(b)) => a.cmp(b),
            (Tuple(a), Tuple(b)) => a.cmp(b),
            (Tagged(t1, i1), Tagged(t2, i2)) => t1.cmp(t2).then_with(|| i1.cmp(i2)),
            _ => self.variant_rank().cmp(&other.variant_rank()),
        }
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Atom(s) => write!(f, "{s}"),
            Label::Index(i) => write!(f, "{i}"),
            Label::Pair(i, j) => write!(f, "{{{i},{j}}}"),
            Label::Subset(items) => {
                write!(f, "{{")?;
                for (k, it) in items.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{it}")?;
                }
                write!(f, "}}")
            }
            Label::Tuple(items) => {
                write!(f, "(")?;
                for (k, it) in items.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{it}")?;
                }
                write!(f, ")")
            }
            Label::Tagged(tag, inner) => write!(f, "{tag}:{inner}"),
        }
    }
}

/// A finite bijection Label -> Label over an explicit domain.
///
/// Applying the permutation to a label outside the domain is an error;
/// use [`LabelPermutation::apply_or_fixed`] for actions that fix everything
/// off-domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelPermutation {
    map: BTreeMap<Label, Label>,
}

impl LabelPermutation {
    pub fn identity<I: IntoIterator<Item = Label>>(domain: I) -> Self {
        LabelPermutation {
            map: domain.into_iter().map(|l| (l.clone(), l)).collect(),
        }
    }

    pub fn from_pairs<I: IntoIterator<Item = (Label, Label)>>(pairs: I) -> Result<Self> {
        let map: BTreeMap<Label, Label> = pairs.into_iter().collect();
        let mut images = BTreeSet::new();
        for (_, img) in map.iter() {
            if !images.insert(img.clone()) {
                return Err(Error::NotBijective(img.clone()));
            }
            if !map.contains_key(img) {
                return Err(Error::PermutationDomain(img.clone()));
            }
        }
        Ok(LabelPermutation { map })
    }

    /// Transposition of two labels, identity on the rest of `domain`.
    pub fn swap<I: IntoIterator<Item = Label>>(domain: I, a: &Label, b: &Label) -> Self {
        let mut p = Self::identity(domain);
        p.map.insert(a.clone(), b.clone());
        p.map.insert(b.clone(), a.clone());
        p
    }

    /// Cycle (l1 l2 ... lk) on the listed labels, identity on the rest.
    pub fn cycle<I: IntoIterator<Item = Label>>(domain: I, cyc: &[Label]) -> Self {
        let mut p = Self::identity(domain);
        for (i, l) in cyc.iter().enumerate() {
            p.map.insert(l.clone(), cyc[(i + 1) % cyc.len()].clone());
        }
        p
    }

    pub fn domain(&self) -> impl Iterator<Item = &Label> {
        self.map.keys()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn contains(&self, l: &Label) -> bool {
        self.map.contains_key(l)
    }

    pub fn apply(&self, l: &Label) -> Result<Label> {
        self.map
            .get(l)
            .cloned()
            .ok_or_else(|| Error::PermutationDomain(l.clone()))
    }

    /// Apply where defined, fix everything else.
    pub fn apply_or_fixed(&self, l: &Label) -> Label {
        self.map.get(l).cloned().unwrap_or_else(|| l.clone())
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().all(|(a, b)| a == b)
    }

    /// self ∘ other (apply `other` first, then `self`). Domains must agree.
    pub fn compose(&self, other: &LabelPermutation) -> Result<LabelPermutation> {
        let mut map = BTreeMap::new();
        for (l, mid) in other.map.iter() {
            map.insert(l.clone(), self.apply(mid)?);
        }
        LabelPermutation::from_pairs(map)
    }

    pub fn inverse(&self) -> LabelPermutation {
        LabelPermutation {
            map: self.map.iter().map(|(a, b)| (b.clone(), a.clone())).collect(),
        }
    }

    /// Restriction to a sub-domain.
    pub fn restrict<'a, I: IntoIterator<Item = &'a Label>>(&self, domain: I) -> Result<LabelPermutation> {
        let mut map = BTreeMap::new();
        for l in domain {
            map.insert(l.clone(), self.apply(l)?);
        }
        LabelPermutation::from_pairs(map)
    }

    /// Union of two permutations over disjoint or agreeing domains.
    pub fn union(&self, other: &LabelPermutation) -> Result<LabelPermutation> {
        let mut map = self.map.clone();
        for (l, img) in other.map.iter() {
            match map.get(l) {
                Some(existing) if existing != img => {
                    return Err(Error::Group(format!(
                        "incompatible permutations: {l} -> {existing} vs {l} -> {img}"
                    )));
                }
                _ => {
                    map.insert(l.clone(), img.clone());
                }
            }
        }
        LabelPermutation::from_pairs(map)
    }

    /// Extend by the identity on extra labels.
    pub fn extend_identity<I: IntoIterator<Item = Label>>(&self, extra: I) -> Result<LabelPermutation> {
        self.union(&LabelPermutation::identity(extra))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Label, &Label)> {
        self.map.iter()
    }

    /// Conjugation rho ∘ self ∘ rho^{-1}; `rho` must be defined on the domain
    /// and on its image.
    pub fn conjugate(&self, rho: &LabelPermutation) -> Result<LabelPermutation> {
        let mut map = BTreeMap::new();
        for (a, b) in self.map.iter() {
            map.insert(rho.apply(a)?, rho.apply(b)?);
        }
        LabelPermutation::from_pairs(map)
    }
}

/// Maps a permutation of vertex labels `Index(i)` to the induced permutation
/// of `Pair` labels {i,j} -> {tau(i), tau(j)}.
pub fn induced_pair_action(tau: &LabelPermutation) -> Result<LabelPermutation> {
    let verts = vertex_indices(tau)?;
    let mut pairs = Vec::new();
    for (a, i) in verts.iter().enumerate() {
        for j in verts.iter().skip(a + 1) {
            let ti = tau_index(tau, *i)?;
            let tj = tau_index(tau, *j)?;
            pairs.push((Label::pair(*i, *j), Label::pair(ti, tj)));
        }
    }
    LabelPermutation::from_pairs(pairs)
}

/// Maps a permutation of `Index` labels to the induced permutation of
/// `Subset` labels of size at most d (the empty set is fixed).
pub fn induced_subset_action(tau: &LabelPermutation, d: usize) -> Result<LabelPermutation> {
    let verts = vertex_indices(tau)?;
    if d > verts.len() {
        return Err(Error::BadParam(format!(
            "subset size bound {d} exceeds domain size {}",
            verts.len()
        )));
    }
    let mut pairs = Vec::new();
    for sub in subsets_up_to(&verts, d) {
        let image: Vec<i64> = sub.iter().map(|i| tau_index(tau, *i)).collect::<Result<_>>()?;
        pairs.push((Label::subset(sub), Label::subset(image)));
    }
    LabelPermutation::from_pairs(pairs)
}

fn vertex_indices(tau: &LabelPermutation) -> Result<Vec<i64>> {
    tau.domain()
        .map(|l| match l {
            Label::Index(i) => Ok(*i),
            other => Err(Error::Group(format!(
                "induced actions need an Index domain, found {other}"
            ))),
        })
        .collect()
}

fn tau_index(tau: &LabelPermutation, i: i64) -> Result<i64> {
    match tau.apply(&Label::Index(i))? {
        Label::Index(j) => Ok(j),
        other => Err(Error::Group(format!("image of index {i} is not an index: {other}"))),
    }
}

/// All subsets of `items` with size <= d, in canonical order.
pub fn subsets_up_to(items: &[i64], d: usize) -> Vec<Vec<i64>> {
    let mut sorted = items.to_vec();
    sorted.sort_unstable();
    let mut out = vec![vec![]];
    let mut frontier: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..d {
        let mut next = Vec::new();
        for base in &frontier {
            let start = base.last().map_or(0, |&i| i + 1);
            for k in start..sorted.len() {
                let mut s = base.clone();
                s.push(k);
                out.push(s.iter().map(|&i| sorted[i]).collect());
                next.push(s);
            }
        }
        frontier = next;
    }
    out.sort();
    out.dedup();
    out
}

/// A finite permutation group, given by a structured description from which
/// a generating set can be derived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupSpec {
    /// The full symmetric group on an explicit label set.
    FullSymmetric(BTreeSet<Label>),
    /// Direct product of groups over disjoint domains.
    Product(Vec<GroupSpec>),
    /// Action on Pair labels induced by a base group over Index labels.
    InducedPairs(Box<GroupSpec>),
    /// Action on Subset labels of size <= d induced by a base group.
    InducedSubsets(Box<GroupSpec>, usize),
    /// Explicit generating permutations.
    Explicit(Vec<LabelPermutation>),
}

impl GroupSpec {
    pub fn full_symmetric<I: IntoIterator<Item = Label>>(labels: I) -> Self {
        GroupSpec::FullSymmetric(labels.into_iter().collect())
    }

    /// S_n acting on Index(1..=n).
    pub fn s_n(n: usize) -> Self {
        GroupSpec::full_symmetric((1..=n as i64).map(Label::Index))
    }

    /// The domain the group acts on.
    pub fn domain(&self) -> Result<BTreeSet<Label>> {
        match self {
            GroupSpec::FullSymmetric(set) => Ok(set.clone()),
            GroupSpec::Product(parts) => {
                let mut all = BTreeSet::new();
                for p in parts {
                    for l in p.domain()? {
                        if !all.insert(l.clone()) {
                            return Err(Error::Group(format!("overlapping product domains at {l}")));
                        }
                    }
                }
                Ok(all)
            }
            GroupSpec::InducedPairs(base) => {
                let verts = index_domain(base)?;
                let mut out = BTreeSet::new();
                for (a, i) in verts.iter().enumerate() {
                    for j in verts.iter().skip(a + 1) {
                        out.insert(Label::pair(*i, *j));
                    }
                }
                Ok(out)
            }
            GroupSpec::InducedSubsets(base, d) => {
                let verts = index_domain(base)?;
                Ok(subsets_up_to(&verts, *d).into_iter().map(Label::subset).collect())
            }
            GroupSpec::Explicit(gens) => match gens.first() {
                None => Ok(BTreeSet::new()),
                Some(g) => Ok(g.domain().cloned().collect()),
            },
        }
    }

    /// A generating set for the group.
    ///
    /// FullSymmetric on n >= 2 labels returns the adjacent transposition
    /// (x1 x2) and the full cycle (x1 x2 ... xn); a 1-element or empty domain
    /// generates the trivial group.
    pub fn generators(&self) -> Result<Vec<LabelPermutation>> {
        match self {
            GroupSpec::FullSymmetric(set) => {
                let labels: Vec<Label> = set.iter().cloned().collect();
                if labels.len() < 2 {
                    return Ok(vec![]);
                }
                let swap = LabelPermutation::swap(labels.iter().cloned(), &labels[0], &labels[1]);
                if labels.len() == 2 {
                    return Ok(vec![swap]);
                }
                let cycle = LabelPermutation::cycle(labels.iter().cloned(), &labels);
                Ok(vec![swap, cycle])
            }
            GroupSpec::Product(parts) => {
                let full = self.domain()?;
                let mut out = Vec::new();
                for part in parts {
                    let dom = part.domain()?;
                    let rest: Vec<Label> = full.difference(&dom).cloned().collect();
                    for g in part.generators()? {
                        out.push(g.extend_identity(rest.iter().cloned())?);
                    }
                }
                Ok(out)
            }
            GroupSpec::InducedPairs(base) => base
                .generators()?
                .iter()
                .map(induced_pair_action)
                .collect(),
            GroupSpec::InducedSubsets(base, d) => base
                .generators()?
                .iter()
                .map(|g| induced_subset_action(g, *d))
                .collect(),
            GroupSpec::Explicit(gens) => {
                for g in gens {
                    for (_, img) in g.iter() {
                        if !g.contains(img) {
                            return Err(Error::Group(format!("generator image {img} outside domain")));
                        }
                    }
                }
                Ok(gens.clone())
            }
        }
    }
}

fn index_domain(base: &GroupSpec) -> Result<Vec<i64>> {
    base.domain()?
        .into_iter()
        .map(|l| match l {
            Label::Index(i) => Ok(i),
            other => Err(Error::Group(format!(
                "induced group needs an Index base domain, found {other}"
            ))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(i: i64) -> Label {
        Label::Index(i)
    }

    #[test]
    fn full_symmetric_two_elements_has_one_generator() {
        let g = GroupSpec::full_symmetric([Label::atom("a"), Label::atom("b")]);
        let gens = g.generators().unwrap();
        assert_eq!(gens.len(), 1);
        assert_eq!(gens[0].apply(&Label::atom("a")).unwrap(), Label::atom("b"));
    }

    #[test]
    fn full_symmetric_three_elements() {
        let g = GroupSpec::s_n(3);
        let gens = g.generators().unwrap();
        assert_eq!(gens.len(), 2);
        // (1 2)
        assert_eq!(gens[0].apply(&idx(1)).unwrap(), idx(2));
        assert_eq!(gens[0].apply(&idx(3)).unwrap(), idx(3));
        // (1 2 3)
        assert_eq!(gens[1].apply(&idx(1)).unwrap(), idx(2));
        assert_eq!(gens[1].apply(&idx(3)).unwrap(), idx(1));
    }

    #[test]
    fn trivial_groups_have_no_generators() {
        assert!(GroupSpec::s_n(1).generators().unwrap().is_empty());
        assert!(GroupSpec::s_n(0).generators().unwrap().is_empty());
    }

    #[test]
    fn product_extends_by_identity() {
        let gu = GroupSpec::full_symmetric([Label::atom("u"), Label::atom("v")]);
        let gx = GroupSpec::full_symmetric([Label::atom("x"), Label::atom("y")]);
        let g = GroupSpec::Product(vec![gu, gx]);
        let gens = g.generators().unwrap();
        assert_eq!(gens.len(), 2);
        assert_eq!(gens[0].apply(&Label::atom("u")).unwrap(), Label::atom("v"));
        assert_eq!(gens[0].apply(&Label::atom("x")).unwrap(), Label::atom("x"));
        assert_eq!(gens[1].apply(&Label::atom("u")).unwrap(), Label::atom("u"));
        assert_eq!(gens[1].apply(&Label::atom("x")).unwrap(), Label::atom("y"));
    }

    #[test]
    fn product_rejects_overlap() {
        let g1 = GroupSpec::s_n(2);
        let g2 = GroupSpec::s_n(3);
        assert!(GroupSpec::Product(vec![g1, g2]).domain().is_err());
    }

    #[test]
    fn pair_action_of_transposition() {
        let tau = LabelPermutation::swap((1..=3).map(idx), &idx(1), &idx(2));
        let pi = induced_pair_action(&tau).unwrap();
        assert_eq!(pi.apply(&Label::pair(1, 2)).unwrap(), Label::pair(1, 2));
        assert_eq!(pi.apply(&Label::pair(1, 3)).unwrap(), Label::pair(2, 3));
        assert_eq!(pi.apply(&Label::pair(2, 3)).unwrap(), Label::pair(1, 3));
    }

    #[test]
    fn pair_action_of_cycle() {
        let labels: Vec<Label> = (1..=3).map(idx).collect();
        let tau = LabelPermutation::cycle(labels.iter().cloned(), &labels);
        let pi = induced_pair_action(&tau).unwrap();
        assert_eq!(pi.apply(&Label::pair(1, 2)).unwrap(), Label::pair(2, 3));
        assert_eq!(pi.apply(&Label::pair(2, 3)).unwrap(), Label::pair(1, 3));
        assert_eq!(pi.apply(&Label::pair(1, 3)).unwrap(), Label::pair(1, 2));
    }

    #[test]
    fn pair_action_of_identity() {
        let tau = LabelPermutation::identity((1..=4).map(idx));
        let pi = induced_pair_action(&tau).unwrap();
        assert!(pi.is_identity());
    }

    #[test]
    fn subset_action_small() {
        let tau = LabelPermutation::swap((1..=2).map(idx), &idx(1), &idx(2));
        let pi = induced_subset_action(&tau, 1).unwrap();
        assert_eq!(pi.apply(&Label::subset([])).unwrap(), Label::subset([]));
        assert_eq!(pi.apply(&Label::subset([1])).unwrap(), Label::subset([2]));
        assert_eq!(pi.apply(&Label::subset([2])).unwrap(), Label::subset([1]));
    }

    #[test]
    fn subset_action_rejects_oversize() {
        let tau = LabelPermutation::identity((1..=2).map(idx));
        assert!(induced_subset_action(&tau, 3).is_err());
    }

    #[test]
    fn induced_actions_are_homomorphisms() {
        // Exhaustive over all of S_n for n <= 5 would enumerate 120 pairs of
        // permutations; generate the group from the standard generators.
        for n in 2..=5usize {
            let group = GroupSpec::s_n(n);
            let elements = enumerate_group(&group);
            assert_eq!(elements.len(), (1..=n).product::<usize>());
            for t1 in &elements {
                for t2 in &elements {
                    let comp = t1.compose(t2).unwrap();
                    let lhs = induced_pair_action(&comp).unwrap();
                    let rhs = induced_pair_action(t1)
                        .unwrap()
                        .compose(&induced_pair_action(t2).unwrap())
                        .unwrap();
                    assert_eq!(lhs, rhs);
                    let d = 2.min(n);
                    let lhs = induced_subset_action(&comp, d).unwrap();
                    let rhs = induced_subset_action(t1, d)
                        .unwrap()
                        .compose(&induced_subset_action(t2, d).unwrap())
                        .unwrap();
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn generated_subgroup_is_closed() {
        for spec in [
            GroupSpec::s_n(4),
            GroupSpec::InducedPairs(Box::new(GroupSpec::s_n(4))),
            GroupSpec::Product(vec![GroupSpec::s_n(2), {
                GroupSpec::full_symmetric([Label::atom("x"), Label::atom("y"), Label::atom("z")])
            }]),
        ] {
            let elements = enumerate_group(&spec);
            for g in &elements {
                let inv = g.inverse();
                assert!(elements.contains(&inv));
                for h in &elements {
                    assert!(elements.contains(&g.compose(h).unwrap()));
                }
            }
        }
    }

    /// Breadth-first closure of the generating set (small groups only).
    pub(crate) fn enumerate_group(spec: &GroupSpec) -> Vec<LabelPermutation> {
        let gens = spec.generators().unwrap();
        let id = LabelPermutation::identity(spec.domain().unwrap());
        let mut seen = vec![id.clone()];
        let mut frontier = vec![id];
        while let Some(g) = frontier.pop() {
            for gen in &gens {
                let next = gen.compose(&g).unwrap();
                if !seen.contains(&next) {
                    seen.push(next.clone());
                    frontier.push(next);
                }
            }
        }
        seen
    }

    #[test]
    fn canonical_order_is_total_and_display_round_trips_structure() {
        let labels = vec![
            Label::atom("out"),
            Label::idx(3),
            Label::pair(2, 1),
            Label::subset([3, 1, 2]),
            Label::tuple([Label::idx(1), Label::atom("b")]),
            Label::tagged("use", Label::atom("all")),
        ];
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), labels.len());
        assert_eq!(Label::pair(2, 1).to_string(), "{1,2}");
        assert_eq!(Label::subset([3, 1, 2]).to_string(), "{1,2,3}");
        assert_eq!(
            Label::tuple([Label::idx(1), Label::atom("b")]).to_string(),
            "(1,b)"
        );
        assert_eq!(Label::tagged("use", Label::atom("all")).to_string(), "use:all");
    }
}
