//! Stable rooted trees with labeled leaves, their bracketings, gluing maps
//! and slices.
//!
//! A [`StableTree`] is stored in a canonical arena: the root has index 0 and
//! vertices follow in breadth-first order with children sorted by their
//! smallest leaf label. Two trees are isomorphic exactly when their arenas
//! are equal, so derived equality is isomorphism.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::Value;

use crate::error::{Error, Result};

/// A set of leaf labels, kept sorted.
pub type LeafSet = BTreeSet<usize>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TreeVertex {
    /// Leaves below this vertex (itself, for a leaf).
    pub leaves: LeafSet,
    pub parent: Option<usize>,
    /// Children in canonical order (increasing smallest leaf).
    pub children: Vec<usize>,
}

/// Stable rooted tree with leaves labeled `1..=r`. For `r = 1` the tree is a
/// single vertex that is both the root and the leaf.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StableTree {
    r: usize,
    verts: Vec<TreeVertex>,
}

/// A 1-bracketing of `r`: a laminar family of nonempty subsets of `1..=r`
/// containing the full set and every singleton.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bracketing {
    r: usize,
    sets: BTreeSet<LeafSet>,
}

pub fn full_set(r: usize) -> LeafSet {
    (1..=r).collect()
}

pub(crate) fn laminar_pair(a: &LeafSet, b: &LeafSet) -> bool {
    a.is_disjoint(b) || a.is_subset(b) || b.is_subset(a)
}

impl Bracketing {
    pub fn new(r: usize, sets: BTreeSet<LeafSet>) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidBracketing("r must be positive".into()));
        }
        let full = full_set(r);
        for s in &sets {
            if s.is_empty() || !s.is_subset(&full) {
                return Err(Error::InvalidBracketing(format!(
                    "bracket {s:?} is not a nonempty subset of 1..={r}"
                )));
            }
        }
        if !sets.contains(&full) {
            return Err(Error::InvalidBracketing("missing the full bracket".into()));
        }
        for i in 1..=r {
            if !sets.contains(&LeafSet::from([i])) {
                return Err(Error::InvalidBracketing(format!(
                    "missing singleton {{{i}}}"
                )));
            }
        }
        let v: Vec<&LeafSet> = sets.iter().collect();
        for (x, a) in v.iter().enumerate() {
            for b in &v[x + 1..] {
                if !laminar_pair(a, b) {
                    return Err(Error::InvalidBracketing(format!(
                        "brackets {a:?} and {b:?} overlap without nesting"
                    )));
                }
            }
        }
        Ok(Bracketing { r, sets })
    }

    /// The minimal bracketing (full set and singletons).
    pub fn minimal(r: usize) -> Self {
        let mut sets: BTreeSet<LeafSet> = (1..=r).map(|i| LeafSet::from([i])).collect();
        sets.insert(full_set(r));
        Bracketing { r, sets }
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn sets(&self) -> &BTreeSet<LeafSet> {
        &self.sets
    }

    pub fn contains(&self, s: &LeafSet) -> bool {
        self.sets.contains(s)
    }
}

impl StableTree {
    /// Build the canonical tree of a bracketing.
    pub fn from_bracketing(b: &Bracketing) -> StableTree {
        let r = b.r;
        let full = full_set(r);
        let mut verts = vec![TreeVertex {
            leaves: full.clone(),
            parent: None,
            children: Vec::new(),
        }];
        if r == 1 {
            return StableTree { r, verts };
        }
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            let set = verts[v].leaves.clone();
            if set.len() == 1 {
                continue;
            }
            // Children: maximal proper sub-brackets.
            let proper: Vec<&LeafSet> = b
                .sets
                .iter()
                .filter(|s| s.len() < set.len() && s.is_subset(&set))
                .collect();
            let mut kids: Vec<LeafSet> = proper
                .iter()
                .filter(|s| !proper.iter().any(|t| t.len() > s.len() && s.is_subset(t)))
                .map(|s| (*s).clone())
                .collect();
            kids.sort_by_key(|s| *s.iter().next().unwrap());
            for k in kids {
                let idx = verts.len();
                verts.push(TreeVertex {
                    leaves: k,
                    parent: Some(v),
                    children: Vec::new(),
                });
                verts[v].children.push(idx);
                queue.push_back(idx);
            }
        }
        StableTree { r, verts }
    }

    pub fn to_bracketing(&self) -> Bracketing {
        Bracketing {
            r: self.r,
            sets: self.verts.iter().map(|v| v.leaves.clone()).collect(),
        }
    }

    /// The corolla: a single interior vertex with all `r` leaves.
    pub fn corolla(r: usize) -> StableTree {
        StableTree::from_bracketing(&Bracketing::minimal(r))
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.verts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verts.is_empty()
    }

    pub fn vertex(&self, v: usize) -> &TreeVertex {
        &self.verts[v]
    }

    pub fn vertices(&self) -> &[TreeVertex] {
        &self.verts
    }

    pub fn leaves(&self, v: usize) -> &LeafSet {
        &self.verts[v].leaves
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.verts[v].children
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.verts[v].parent
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.verts[v].leaves.len() == 1 && self.verts[v].children.is_empty()
    }

    /// Interior vertices: those with children, plus the root when `r = 1`.
    pub fn interior(&self) -> Vec<usize> {
        (0..self.verts.len())
            .filter(|&v| !self.verts[v].children.is_empty() || v == 0)
            .collect()
    }

    /// Interior vertices other than the root, in canonical order.
    pub fn non_root_interior(&self) -> Vec<usize> {
        (1..self.verts.len())
            .filter(|&v| !self.verts[v].children.is_empty())
            .collect()
    }

    /// The vertex of leaf `i`.
    pub fn leaf_vertex(&self, i: usize) -> usize {
        self.vertex_with_leaves(&LeafSet::from([i]))
            .expect("leaf label out of range")
    }

    pub fn vertex_with_leaves(&self, s: &LeafSet) -> Option<usize> {
        // For r = 1 the root is also the leaf; index 0 is found first.
        self.verts.iter().position(|v| &v.leaves == s)
    }

    /// Is `a` an ancestor of `b` (or equal)?
    pub fn is_ancestor_or_eq(&self, a: usize, b: usize) -> bool {
        self.path_down(a, b).is_some()
    }

    /// Path from `top` down to `bottom`, inclusive: `[top, ..., bottom]`.
    pub fn path_down(&self, top: usize, bottom: usize) -> Option<Vec<usize>> {
        let mut path = vec![bottom];
        let mut cur = bottom;
        while cur != top {
            cur = self.verts[cur].parent?;
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }

    /// The child of `v` on the way down to `below` (a strict descendant).
    pub fn child_toward(&self, v: usize, below: usize) -> Option<usize> {
        let path = self.path_down(v, below)?;
        path.get(1).copied()
    }

    /// Sum over interior vertices of `#in - 2`; zero for `r = 1`.
    pub fn dimension(&self) -> usize {
        self.verts
            .iter()
            .filter(|v| !v.children.is_empty())
            .map(|v| v.children.len() - 2)
            .sum()
    }

    /// `T1 <= T2` in the poset: every bracket of `T2` is a bracket of `T1`.
    pub fn poset_leq(&self, other: &StableTree) -> Result<bool> {
        if self.r != other.r {
            return Err(Error::Mismatch(format!(
                "trees on {} and {} leaves",
                self.r, other.r
            )));
        }
        let mine = self.to_bracketing();
        Ok(other.verts.iter().all(|v| mine.contains(&v.leaves)))
    }

    /// Contract the edges below every vertex in `ones` (non-root interior
    /// vertices whose gluing parameter is 1).
    pub fn glue(&self, ones: &BTreeSet<usize>) -> Result<StableTree> {
        let allowed: BTreeSet<usize> = self.non_root_interior().into_iter().collect();
        if let Some(bad) = ones.iter().find(|v| !allowed.contains(v)) {
            return Err(Error::InvalidTree(format!(
                "vertex {bad} is not a non-root interior vertex"
            )));
        }
        let sets = self
            .verts
            .iter()
            .enumerate()
            .filter(|(i, _)| !ones.contains(i))
            .map(|(_, v)| v.leaves.clone())
            .collect();
        Ok(StableTree::from_bracketing(&Bracketing { r: self.r, sets }))
    }

    /// Parse the nested-list encoding, e.g. `[[1,2],3]`; `1` is the `r = 1` tree.
    pub fn from_json(v: &Value) -> Result<StableTree> {
        fn walk(v: &Value, sets: &mut BTreeSet<LeafSet>) -> Result<LeafSet> {
            match v {
                Value::Number(n) => {
                    let i = n
                        .as_u64()
                        .filter(|&i| i >= 1)
                        .ok_or_else(|| Error::InvalidTree(format!("bad leaf label {n}")))?;
                    let s = LeafSet::from([i as usize]);
                    sets.insert(s.clone());
                    Ok(s)
                }
                Value::Array(kids) => {
                    if kids.len() < 2 {
                        return Err(Error::InvalidTree(
                            "interior vertex with fewer than 2 children".into(),
                        ));
                    }
                    let mut all = LeafSet::new();
                    for k in kids {
                        let s = walk(k, sets)?;
                        if !all.is_disjoint(&s) {
                            return Err(Error::InvalidTree("repeated leaf label".into()));
                        }
                        all.extend(s);
                    }
                    sets.insert(all.clone());
                    Ok(all)
                }
                other => Err(Error::InvalidTree(format!("unexpected JSON {other}"))),
            }
        }
        let mut sets = BTreeSet::new();
        let all = walk(v, &mut sets)?;
        let r = all.len();
        if all != full_set(r) {
            return Err(Error::InvalidTree(format!(
                "leaf labels must be exactly 1..={r}"
            )));
        }
        Ok(StableTree::from_bracketing(&Bracketing::new(r, sets)?))
    }

    pub fn parse(s: &str) -> Result<StableTree> {
        let v: Value =
            serde_json::from_str(s).map_err(|e| Error::InvalidTree(format!("bad JSON: {e}")))?;
        Self::from_json(&v)
    }

    pub fn to_json(&self) -> Value {
        fn walk(t: &StableTree, v: usize) -> Value {
            if t.verts[v].children.is_empty() {
                Value::from(*t.verts[v].leaves.iter().next().unwrap())
            } else {
                Value::Array(t.verts[v].children.iter().map(|&c| walk(t, c)).collect())
            }
        }
        walk(self, 0)
    }

    /// Canonical variable name of the gluing parameter at a non-root
    /// interior vertex: `b1, b2, ...` in canonical vertex order.
    pub fn gluing_var(&self, v: usize) -> String {
        let pos = self
            .non_root_interior()
            .iter()
            .position(|&u| u == v)
            .expect("not a non-root interior vertex");
        format!("b{}", pos + 1)
    }
}

impl fmt::Display for StableTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

/// All set partitions of `items` (each block in increasing order, blocks
/// ordered by first element).
pub fn set_partitions<T: Clone>(items: &[T]) -> Vec<Vec<Vec<T>>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let first = items[0].clone();
    let mut out = Vec::new();
    for sub in set_partitions(&items[1..]) {
        for k in 0..sub.len() {
            let mut p = sub.clone();
            p[k].insert(0, first.clone());
            out.push(p);
        }
        let mut p = sub;
        p.insert(0, vec![first.clone()]);
        out.push(p);
    }
    out
}

/// All bracket families of stable trees with leaf set `s` (excluding the
/// singletons, including `s` itself).
fn tree_families(s: &[usize]) -> Vec<Vec<LeafSet>> {
    if s.len() == 1 {
        return vec![Vec::new()];
    }
    let me: LeafSet = s.iter().copied().collect();
    let mut out = Vec::new();
    for part in set_partitions(s) {
        if part.len() < 2 {
            continue;
        }
        let mut acc: Vec<Vec<LeafSet>> = vec![vec![me.clone()]];
        for block in &part {
            let subs = tree_families(block);
            acc = acc
                .into_iter()
                .flat_map(|a| {
                    subs.iter().map(move |sfam| {
                        let mut a2 = a.clone();
                        a2.extend(sfam.iter().cloned());
                        a2
                    })
                })
                .collect();
        }
        out.extend(acc);
    }
    out
}

/// One representative per isomorphism class of stable trees with `r`
/// leaves, ordered by dimension (descending) and then canonically.
pub fn enumerate_stable_trees(r: usize) -> Vec<StableTree> {
    assert!(r >= 1, "r must be positive");
    let labels: Vec<usize> = (1..=r).collect();
    let mut trees: Vec<StableTree> = tree_families(&labels)
        .into_iter()
        .map(|fam| {
            let mut sets: BTreeSet<LeafSet> = fam.into_iter().collect();
            sets.insert(full_set(r));
            for i in 1..=r {
                sets.insert(LeafSet::from([i]));
            }
            StableTree::from_bracketing(&Bracketing { r, sets })
        })
        .collect();
    trees.sort_by(|a, b| b.dimension().cmp(&a.dimension()).then_with(|| a.cmp(b)));
    trees.dedup();
    trees
}

/// A slice: two distinct chosen children `s0(ρ), s1(ρ)` of every interior
/// vertex with at least two children.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slice {
    pub s0: BTreeMap<usize, usize>,
    pub s1: BTreeMap<usize, usize>,
}

impl Slice {
    pub fn validate(&self, t: &StableTree) -> Result<()> {
        for rho in 0..t.len() {
            let kids = t.children(rho);
            if kids.is_empty() {
                continue;
            }
            let (a, b) = match (self.s0.get(&rho), self.s1.get(&rho)) {
                (Some(a), Some(b)) => (*a, *b),
                _ => {
                    return Err(Error::InvalidTree(format!(
                        "slice undefined at vertex {rho}"
                    )))
                }
            };
            if a == b || !kids.contains(&a) || !kids.contains(&b) {
                return Err(Error::InvalidTree(format!(
                    "slice at vertex {rho} must pick two distinct children"
                )));
            }
        }
        Ok(())
    }
}

/// Default slice: the two children with the smallest minimal leaf labels.
pub fn default_slice(t: &StableTree) -> Result<Slice> {
    let mut s0 = BTreeMap::new();
    let mut s1 = BTreeMap::new();
    for rho in 0..t.len() {
        let kids = t.children(rho);
        match kids.len() {
            0 => {}
            1 => {
                return Err(Error::InvalidTree(format!(
                    "interior vertex {rho} has fewer than 2 children"
                )))
            }
            _ => {
                // Children are already sorted by smallest leaf.
                s0.insert(rho, kids[0]);
                s1.insert(rho, kids[1]);
            }
        }
    }
    Ok(Slice { s0, s1 })
}

/// Follow `s_i` once from `rho`, then `s0` until reaching a vertex that is
/// kept (not contracted). Returns the vertex of `t`.
pub fn pushforward_target(
    _t: &StableTree,
    slice: &Slice,
    ones: &BTreeSet<usize>,
    rho: usize,
    i: usize,
) -> usize {
    let mut tau = if i == 0 {
        slice.s0[&rho]
    } else {
        slice.s1[&rho]
    };
    while ones.contains(&tau) {
        tau = slice.s0[&tau];
    }
    tau
}

/// Push a slice of `t` forward along the gluing that contracts `ones`.
/// Returns the glued tree and its slice.
pub fn pushforward_slice(
    t: &StableTree,
    slice: &Slice,
    ones: &BTreeSet<usize>,
) -> Result<(StableTree, Slice)> {
    let glued = t.glue(ones)?;
    let mut s0 = BTreeMap::new();
    let mut s1 = BTreeMap::new();
    for rho2 in 0..glued.len() {
        if glued.children(rho2).is_empty() {
            continue;
        }
        let rho = t.vertex_with_leaves(glued.leaves(rho2)).unwrap();
        for (i, map) in [(0, &mut s0), (1, &mut s1)] {
            let tau = pushforward_target(t, slice, ones, rho, i);
            let tau2 = glued.vertex_with_leaves(t.leaves(tau)).unwrap();
            map.insert(rho2, tau2);
        }
    }
    Ok((glued, Slice { s0, s1 }))
}
