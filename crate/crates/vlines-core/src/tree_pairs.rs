//! Stable tree-pairs and 2-bracketings: validation, conversion, enumeration,
//! gluing, the local poset of gluing patterns, and stratum dimensions.
//!
//! A [`TreePair`] is a bubble tree fibered over a seam tree. Bubble vertices
//! are components (planes), seams (lines inside a plane) and marks (the
//! marked points `(i, j)`: the `j`-th point on line `i`). Edges are implied
//! by kinds: a seam hangs below its component by a solid edge; components
//! and marks hang below a seam by dashed edges.
//!
//! Constructors canonicalize through the 2-bracketing, so derived equality
//! of [`TreePair`] values is isomorphism.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::trees::{
    enumerate_stable_trees, full_set, set_partitions, Bracketing, LeafSet, StableTree,
};

/// A marked point `(line, index)`, both 1-based.
pub type Mark = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Component,
    Seam,
    Mark(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BubbleVertex {
    pub kind: Kind,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Image in the seam tree under the coherence map.
    pub image: usize,
}

/// A C-type tree-pair of type `n`. Vertex 0 is the root component.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TreePair {
    n: Vec<usize>,
    seam: StableTree,
    verts: Vec<BubbleVertex>,
}

/// A 2-bracket `(B, (2B_i)_{i in B})`; `points` has a key for every line of
/// `B` (possibly with an empty set).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TwoBracket {
    pub lines: LeafSet,
    pub points: BTreeMap<usize, BTreeSet<usize>>,
}

impl TwoBracket {
    /// The 2-bracket over `lines` containing exactly `marks`.
    pub fn from_marks(lines: &LeafSet, marks: &BTreeSet<Mark>) -> TwoBracket {
        let mut points: BTreeMap<usize, BTreeSet<usize>> =
            lines.iter().map(|&i| (i, BTreeSet::new())).collect();
        for &(i, j) in marks {
            points.get_mut(&i).expect("mark off the bracket").insert(j);
        }
        TwoBracket {
            lines: lines.clone(),
            points,
        }
    }

    pub fn marks(&self) -> BTreeSet<Mark> {
        self.points
            .iter()
            .flat_map(|(&i, js)| js.iter().map(move |&j| (i, j)))
            .collect()
    }

    pub fn num_marks(&self) -> usize {
        self.points.values().map(|s| s.len()).sum()
    }

    /// `self ⊂ other` in the sense of 2-brackets (non-strict).
    pub fn is_subset(&self, other: &TwoBracket) -> bool {
        self.lines.is_subset(&other.lines)
            && self
                .points
                .iter()
                .all(|(i, js)| js.is_subset(&other.points[i]))
    }

    fn shares_point(&self, other: &TwoBracket) -> bool {
        self.points
            .iter()
            .any(|(i, js)| other.points.get(i).is_some_and(|ks| !js.is_disjoint(ks)))
    }

    fn is_mark(&self) -> bool {
        self.lines.len() == 1 && self.num_marks() == 1
    }

    fn to_json(&self) -> Value {
        json!({
            "lines": self.lines.iter().collect::<Vec<_>>(),
            "points": self.lines.iter().map(|i| self.points[i].iter().collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }
}

impl fmt::Display for TwoBracket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .lines
            .iter()
            .map(|i| format!("{i}:{:?}", self.points[i]))
            .collect();
        write!(f, "({})", parts.join(" "))
    }
}

/// A 2-bracketing `(𝓑, 2𝓑)` of `n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TwoBracketing {
    pub n: Vec<usize>,
    pub brackets: Bracketing,
    pub two: BTreeSet<TwoBracket>,
}

fn all_marks(n: &[usize]) -> BTreeSet<Mark> {
    n.iter()
        .enumerate()
        .flat_map(|(i, &k)| (1..=k).map(move |j| (i + 1, j)))
        .collect()
}

fn check_type(n: &[usize]) -> Result<()> {
    if n.is_empty() || n.iter().all(|&k| k == 0) {
        return Err(Error::ZeroVector);
    }
    if n.len() == 1 && n[0] < 2 {
        return Err(Error::Invalid(format!(
            "type ({}) is unstable: one line needs at least 2 points",
            n[0]
        )));
    }
    Ok(())
}

impl TwoBracketing {
    /// Check every axiom; returns the first violated one.
    pub fn validate(&self) -> Result<()> {
        let n = &self.n;
        let r = n.len();
        let bad = |m: String| Err(Error::InvalidTwoBracketing(m));
        if self.brackets.r() != r {
            return bad("1-bracketing has the wrong number of lines".into());
        }
        for b in &self.two {
            if b.points.keys().copied().collect::<LeafSet>() != b.lines {
                return bad(format!("{b} has point sets off its lines"));
            }
            if b.num_marks() == 0 {
                return bad(format!("{b} has no points"));
            }
            for (&i, js) in &b.points {
                if js.iter().any(|&j| j == 0 || j > n[i - 1]) {
                    return bad(format!("{b} names a point beyond n"));
                }
            }
            // (1-bracketing)
            if !self.brackets.contains(&b.lines) {
                return bad(format!("{b} lies over a line set outside the 1-bracketing"));
            }
        }
        // (2-bracketing)
        let v: Vec<&TwoBracket> = self.two.iter().collect();
        for (x, a) in v.iter().enumerate() {
            for b in &v[x + 1..] {
                if a.shares_point(b) && !a.is_subset(b) && !b.is_subset(a) {
                    return bad(format!("{a} and {b} overlap without nesting"));
                }
            }
        }
        // (root and marked points)
        let full = full_set(r);
        let root = TwoBracket::from_marks(&full, &all_marks(n));
        if !self.two.contains(&root) {
            return bad("missing the root 2-bracket".into());
        }
        for (i, j) in all_marks(n) {
            let m = TwoBracket::from_marks(&LeafSet::from([i]), &BTreeSet::from([(i, j)]));
            if !self.two.contains(&m) {
                return bad(format!("missing the point 2-bracket ({i},{j})"));
            }
        }
        // (marked seams are unfused)
        for b0 in self.brackets.sets() {
            let over: Vec<&TwoBracket> = self.two.iter().filter(|b| &b.lines == b0).collect();
            for &i in b0 {
                let union: BTreeSet<usize> = over
                    .iter()
                    .flat_map(|b| b.points[&i].iter().copied())
                    .collect();
                if union != (1..=n[i - 1]).collect::<BTreeSet<_>>() {
                    return bad(format!(
                        "points of line {i} are not covered by 2-brackets over {b0:?}"
                    ));
                }
            }
            for b in &over {
                let smaller: Vec<&&TwoBracket> =
                    over.iter().filter(|c| *c != b && c.is_subset(b)).collect();
                if smaller.is_empty() {
                    continue;
                }
                for (i, j) in b.marks() {
                    if !smaller.iter().any(|c| c.points[&i].contains(&j)) {
                        return bad(format!(
                            "point ({i},{j}) of {b} lies in no smaller 2-bracket over {b0:?}"
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// `self <= other`: `self` refines `other` (has at least its brackets).
    pub fn poset_leq(&self, other: &TwoBracketing) -> bool {
        other.brackets.sets().is_subset(self.brackets.sets()) && other.two.is_subset(&self.two)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "brackets": self.brackets.sets().iter().map(|s| s.iter().collect::<Vec<_>>()).collect::<Vec<_>>(),
            "two_brackets": self.two.iter().map(|b| b.to_json()).collect::<Vec<_>>(),
        })
    }
}

impl TreePair {
    pub fn n(&self) -> &[usize] {
        &self.n
    }

    pub fn r(&self) -> usize {
        self.n.len()
    }

    pub fn seam(&self) -> &StableTree {
        &self.seam
    }

    pub fn vertices(&self) -> &[BubbleVertex] {
        &self.verts
    }

    pub fn vertex(&self, v: usize) -> &BubbleVertex {
        &self.verts[v]
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn kind(&self, v: usize) -> Kind {
        self.verts[v].kind
    }

    pub fn is_component(&self, v: usize) -> bool {
        self.verts[v].kind == Kind::Component
    }

    /// A component is multi-line when it has at least two seam children.
    pub fn is_multi_line(&self, v: usize) -> bool {
        self.is_component(v) && self.verts[v].children.len() >= 2
    }

    pub fn is_single_line(&self, v: usize) -> bool {
        self.is_component(v) && self.verts[v].children.len() == 1
    }

    pub fn components(&self) -> Vec<usize> {
        (0..self.verts.len())
            .filter(|&v| self.is_component(v))
            .collect()
    }

    pub fn non_root_components(&self) -> Vec<usize> {
        (1..self.verts.len())
            .filter(|&v| self.is_component(v))
            .collect()
    }

    pub fn multi_line_components(&self) -> Vec<usize> {
        (0..self.verts.len())
            .filter(|&v| self.is_multi_line(v))
            .collect()
    }

    /// Parent component of a non-root component (skipping the seam).
    pub fn parent_component(&self, v: usize) -> Option<usize> {
        let s = self.verts[v].parent?;
        self.verts[s].parent
    }

    /// Marks in the subtree of `v`.
    pub fn marks_below(&self, v: usize) -> BTreeSet<Mark> {
        let mut out = BTreeSet::new();
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            if let Kind::Mark(i, j) = self.verts[u].kind {
                out.insert((i, j));
            }
            stack.extend(self.verts[u].children.iter().copied());
        }
        out
    }

    /// Components on the path `[v, top)`: `v` and its component ancestors
    /// strictly below `top`.
    pub fn component_path(&self, v: usize, top: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = v;
        while cur != top {
            out.push(cur);
            cur = self
                .parent_component(cur)
                .expect("`top` is not a component ancestor");
        }
        out
    }

    /// Component ancestors of `v`, from its parent component up to the root.
    pub fn component_ancestors(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = v;
        while let Some(p) = self.parent_component(cur) {
            out.push(p);
            cur = p;
        }
        out
    }

    /// Lowest common component ancestor of two distinct components.
    pub fn common_component_ancestor(&self, a: usize, b: usize) -> usize {
        let anc_a: Vec<usize> = std::iter::once(a)
            .chain(self.component_ancestors(a))
            .collect();
        let anc_b: BTreeSet<usize> = std::iter::once(b)
            .chain(self.component_ancestors(b))
            .collect();
        *anc_a.iter().find(|x| anc_b.contains(x)).unwrap()
    }

    /// First multi-line component strictly above `v`.
    pub fn first_multi_line_ancestor(&self, v: usize) -> Option<usize> {
        self.component_ancestors(v)
            .into_iter()
            .find(|&u| self.is_multi_line(u))
    }

    /// Depth-first preorder of the bubble tree (children in canonical order).
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            out.push(v);
            stack.extend(self.verts[v].children.iter().rev().copied());
        }
        out
    }

    /// The 2-bracket of a component or mark.
    pub fn two_bracket_of(&self, v: usize) -> TwoBracket {
        TwoBracket::from_marks(self.seam.leaves(self.verts[v].image), &self.marks_below(v))
    }

    /// The top tree-pair: one component, one seam vertex, all marks.
    pub fn top(n: &[usize]) -> Result<TreePair> {
        check_type(n)?;
        let r = n.len();
        let mut sets = BTreeSet::new();
        for (i, j) in all_marks(n) {
            sets.insert(TwoBracket::from_marks(
                &LeafSet::from([i]),
                &BTreeSet::from([(i, j)]),
            ));
        }
        sets.insert(TwoBracket::from_marks(&full_set(r), &all_marks(n)));
        TreePair::from_two_bracketing(&TwoBracketing {
            n: n.to_vec(),
            brackets: Bracketing::minimal(r),
            two: sets,
        })
    }

    // ------------------------------------------------------------------
    // Validation
    // ------------------------------------------------------------------

    /// All violated tree-pair axioms; empty iff valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let seam = &self.seam;
        if self.verts.is_empty() {
            return vec!["empty bubble tree".into()];
        }
        if self.n.len() != seam.r() {
            out.push("seam tree has the wrong number of leaves".into());
        }
        if self.verts[0].kind != Kind::Component || self.verts[0].parent.is_some() {
            out.push("the root must be a component".into());
        }
        if self.verts[0].image != seam.root() {
            out.push("the root must map to the seam root".into());
        }
        let mut seen_marks = BTreeSet::new();
        for (v, bv) in self.verts.iter().enumerate() {
            let parent_kind = bv.parent.map(|p| self.verts[p].kind);
            match bv.kind {
                Kind::Component => {
                    if v != 0 && parent_kind != Some(Kind::Seam) {
                        out.push(format!("component {v} must hang below a seam"));
                    }
                    if bv.children.is_empty() {
                        out.push(format!("component {v} has no incoming seam"));
                    }
                    if bv
                        .children
                        .iter()
                        .any(|&c| self.verts[c].kind != Kind::Seam)
                    {
                        out.push(format!("component {v} has a non-seam child"));
                    }
                    if let Some(p) = bv.parent {
                        if self.verts[p].image != bv.image {
                            out.push(format!("component {v} does not lie over its seam's image"));
                        }
                    }
                    let img_kids = seam.children(bv.image);
                    if bv.children.len() == 1 {
                        let s = bv.children[0];
                        if self.verts[s].image != bv.image {
                            out.push(format!("single-line component {v}: seam image differs"));
                        }
                        let k = self.verts[s].children.len();
                        if k < 2 {
                            out.push(format!(
                                "stability: single-line component {v} has {k} < 2 incoming"
                            ));
                        }
                    } else if bv.children.len() >= 2 {
                        let imgs: Vec<usize> =
                            bv.children.iter().map(|&s| self.verts[s].image).collect();
                        let a: BTreeSet<usize> = imgs.iter().copied().collect();
                        let b: BTreeSet<usize> = img_kids.iter().copied().collect();
                        if a.len() != imgs.len() || a != b {
                            out.push(format!(
                                "multi-line component {v}: seams do not biject onto the incoming edges of its image"
                            ));
                        }
                        if bv
                            .children
                            .iter()
                            .all(|&s| self.verts[s].children.is_empty())
                        {
                            out.push(format!(
                                "stability: multi-line component {v} has no point or bubble on any line"
                            ));
                        }
                    }
                }
                Kind::Seam => {
                    if parent_kind != Some(Kind::Component) {
                        out.push(format!("seam {v} must hang below a component"));
                    }
                    for &c in &bv.children {
                        if self.verts[c].kind == Kind::Seam {
                            out.push(format!("seam {v} has a seam child"));
                        }
                    }
                }
                Kind::Mark(i, j) => {
                    if !bv.children.is_empty() {
                        out.push(format!("mark ({i},{j}) has incoming edges"));
                    }
                    if parent_kind != Some(Kind::Seam) {
                        out.push(format!("mark ({i},{j}) must hang below a seam"));
                    }
                    if i == 0 || i > self.n.len() || j == 0 || j > self.n[i - 1] {
                        out.push(format!("mark ({i},{j}) is outside the type"));
                    } else if bv.image != seam.leaf_vertex(i) {
                        out.push(format!("mark ({i},{j}) does not map to leaf {i}"));
                    }
                    if let Some(p) = bv.parent {
                        if self.verts[p].image != bv.image {
                            out.push(format!("mark ({i},{j}) lies on a seam over another line"));
                        }
                    }
                    if !seen_marks.insert((i, j)) {
                        out.push(format!("mark ({i},{j}) appears twice"));
                    }
                }
            }
            for &c in &bv.children {
                if self.verts[c].parent != Some(v) {
                    out.push(format!("inconsistent parent link at vertex {c}"));
                }
            }
        }
        let expected = all_marks(&self.n);
        for m in expected.difference(&seen_marks) {
            out.push(format!("mark {m:?} is missing"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidTreePair(v))
        }
    }

    // ------------------------------------------------------------------
    // 2-bracketing conversion
    // ------------------------------------------------------------------

    pub fn to_two_bracketing(&self) -> TwoBracketing {
        let two = (0..self.verts.len())
            .filter(|&v| self.verts[v].kind != Kind::Seam)
            .map(|v| self.two_bracket_of(v))
            .collect();
        TwoBracketing {
            n: self.n.clone(),
            brackets: self.seam.to_bracketing(),
            two,
        }
    }

    /// Build the canonical tree-pair of a valid 2-bracketing.
    pub fn from_two_bracketing(tb: &TwoBracketing) -> Result<TreePair> {
        tb.validate()?;
        let seam = StableTree::from_bracketing(&tb.brackets);
        let all: Vec<&TwoBracket> = tb.two.iter().collect();
        let root_idx = all
            .iter()
            .position(|b| {
                b.lines.len() == tb.n.len() && b.num_marks() == tb.n.iter().sum::<usize>()
            })
            .unwrap();
        // Parent: the minimal strictly larger 2-bracket.
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); all.len()];
        for (x, b) in all.iter().enumerate() {
            if x == root_idx {
                continue;
            }
            let parent = (0..all.len())
                .filter(|&y| y != x && b.is_subset(all[y]))
                .min_by_key(|&y| (all[y].num_marks(), all[y].lines.len()))
                .ok_or_else(|| Error::InvalidTwoBracketing(format!("{b} has no parent")))?;
            kids[parent].push(x);
        }
        for ks in kids.iter_mut() {
            ks.sort_by_key(|&x| *all[x].marks().iter().next().unwrap());
        }
        let seam_vertex = |s: &LeafSet| seam.vertex_with_leaves(s).unwrap();
        let mut verts: Vec<BubbleVertex> = Vec::new();
        // (bracket index, arena parent)
        let mut queue: VecDeque<(usize, Option<usize>)> = VecDeque::from([(root_idx, None)]);
        let invalid = |m: String| Error::InvalidTwoBracketing(m);
        while let Some((x, parent)) = queue.pop_front() {
            let b = all[x];
            let me = verts.len();
            let image = if b.is_mark() {
                seam.leaf_vertex(*b.lines.iter().next().unwrap())
            } else {
                seam_vertex(&b.lines)
            };
            let kind = if b.is_mark() {
                let (i, j) = *b.marks().iter().next().unwrap();
                Kind::Mark(i, j)
            } else {
                Kind::Component
            };
            verts.push(BubbleVertex {
                kind,
                parent,
                children: Vec::new(),
                image,
            });
            if let Some(p) = parent {
                verts[p].children.push(me);
            }
            if kind != Kind::Component {
                continue;
            }
            let children = &kids[x];
            let same = children
                .iter()
                .filter(|&&c| all[c].lines == b.lines)
                .count();
            // Seams are created now so that they precede this component's
            // grandchildren in breadth-first order.
            let seam_groups: Vec<(usize, Vec<usize>)> = if same == children.len() {
                vec![(image, children.clone())]
            } else if same == 0 {
                let mut groups: Vec<(usize, Vec<usize>)> = seam
                    .children(image)
                    .iter()
                    .map(|&s| (s, Vec::new()))
                    .collect();
                for &c in children {
                    let g = groups
                        .iter_mut()
                        .find(|(s, _)| seam.leaves(*s) == &all[c].lines)
                        .ok_or_else(|| {
                            invalid(format!("{} skips a seam level below {b}", all[c]))
                        })?;
                    g.1.push(c);
                }
                groups
            } else {
                return Err(invalid(format!("{b} mixes fused and separated children")));
            };
            for (s_img, members) in seam_groups {
                let s = verts.len();
                verts.push(BubbleVertex {
                    kind: Kind::Seam,
                    parent: Some(me),
                    children: Vec::new(),
                    image: s_img,
                });
                verts[me].children.push(s);
                for c in members {
                    queue.push_back((c, Some(s)));
                }
            }
        }
        let tp = TreePair {
            n: tb.n.clone(),
            seam,
            verts,
        };
        // Re-index into strict breadth-first order.
        let tp = tp.reindexed_bfs();
        tp.validate()?;
        Ok(tp)
    }

    fn reindexed_bfs(&self) -> TreePair {
        let mut order = Vec::new();
        let mut queue = VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            queue.extend(self.verts[v].children.iter().copied());
        }
        let mut new_of = vec![0usize; self.verts.len()];
        for (new, &old) in order.iter().enumerate() {
            new_of[old] = new;
        }
        let verts = order
            .iter()
            .map(|&old| {
                let bv = &self.verts[old];
                BubbleVertex {
                    kind: bv.kind,
                    parent: bv.parent.map(|p| new_of[p]),
                    children: bv.children.iter().map(|&c| new_of[c]).collect(),
                    image: bv.image,
                }
            })
            .collect();
        TreePair {
            n: self.n.clone(),
            seam: self.seam.clone(),
            verts,
        }
    }

    /// Re-canonicalize an arbitrary valid arena.
    pub fn canonical(&self) -> Result<TreePair> {
        self.validate()?;
        TreePair::from_two_bracketing(&self.to_two_bracketing())
    }

    /// `self <= other` in the poset of tree-pairs (other is a degeneration
    /// of self... i.e. self is more degenerate).
    pub fn poset_leq(&self, other: &TreePair) -> bool {
        self.n == other.n
            && self
                .to_two_bracketing()
                .poset_leq(&other.to_two_bracketing())
    }

    // ------------------------------------------------------------------
    // Dimension
    // ------------------------------------------------------------------

    pub fn dimension(&self) -> usize {
        let seam = self.seam.dimension();
        let mut comps = 0;
        for v in self.components() {
            let seams = &self.verts[v].children;
            let counts: usize = seams.iter().map(|&s| self.verts[s].children.len()).sum();
            if seams.len() >= 2 {
                comps += counts - 1;
            } else {
                comps += counts - 2;
            }
        }
        seam + comps
    }

    // ------------------------------------------------------------------
    // JSON
    // ------------------------------------------------------------------

    pub fn to_json(&self) -> Value {
        fn walk(tp: &TreePair, v: usize) -> Value {
            let bv = &tp.verts[v];
            let (kind, label) = match bv.kind {
                Kind::Mark(i, j) => ("mark", json!([i, j])),
                Kind::Seam => (
                    "seam",
                    json!(tp.seam.leaves(bv.image).iter().collect::<Vec<_>>()),
                ),
                Kind::Component => (
                    "component",
                    json!(tp.seam.leaves(bv.image).iter().collect::<Vec<_>>()),
                ),
            };
            let edge = match (bv.parent, bv.kind) {
                (None, _) => Value::Null,
                (Some(_), Kind::Seam) => json!("solid"),
                (Some(_), _) => json!("dashed"),
            };
            json!({
                "kind": kind,
                "label": label,
                "edge": edge,
                "children": bv.children.iter().map(|&c| walk(tp, c)).collect::<Vec<_>>(),
            })
        }
        json!({ "n": self.n, "seam": self.seam.to_json(), "bubble": walk(self, 0) })
    }

    /// Load the JSON form; the coherence map is recomputed from labels and
    /// checked, and the result is canonicalized.
    pub fn from_json(v: &Value) -> Result<TreePair> {
        let raw = Self::from_json_unchecked(v)?;
        raw.canonical()
    }

    /// Load without validating (for inspecting violations).
    pub fn from_json_unchecked(v: &Value) -> Result<TreePair> {
        let bad = |m: &str| Error::Invalid(format!("tree-pair JSON: {m}"));
        let n: Vec<usize> =
            serde_json::from_value(v.get("n").cloned().ok_or_else(|| bad("missing n"))?)
                .map_err(|_| bad("n must be a list of nonnegative integers"))?;
        let seam = StableTree::from_json(v.get("seam").ok_or_else(|| bad("missing seam"))?)?;
        if seam.r() != n.len() {
            return Err(bad("seam tree and n disagree on the number of lines"));
        }
        let mut verts: Vec<BubbleVertex> = Vec::new();
        fn walk(
            node: &Value,
            parent: Option<usize>,
            seam: &StableTree,
            verts: &mut Vec<BubbleVertex>,
        ) -> Result<usize> {
            let bad = |m: &str| Error::Invalid(format!("tree-pair JSON: {m}"));
            let kind_s = node
                .get("kind")
                .and_then(Value::as_str)
                .ok_or_else(|| bad("missing kind"))?;
            let label = node.get("label").ok_or_else(|| bad("missing label"))?;
            let (kind, image) = match kind_s {
                "mark" => {
                    let ij: (usize, usize) = serde_json::from_value(label.clone())
                        .map_err(|_| bad("mark label must be [i,j]"))?;
                    if ij.0 == 0 || ij.0 > seam.r() {
                        return Err(bad("mark on a nonexistent line"));
                    }
                    (Kind::Mark(ij.0, ij.1), seam.leaf_vertex(ij.0))
                }
                "seam" | "component" => {
                    let lines: LeafSet = serde_json::from_value(label.clone())
                        .map_err(|_| bad("label must be a list of lines"))?;
                    let img = seam
                        .vertex_with_leaves(&lines)
                        .ok_or_else(|| bad("label is not a vertex of the seam tree"))?;
                    let k = if kind_s == "seam" {
                        Kind::Seam
                    } else {
                        Kind::Component
                    };
                    (k, img)
                }
                _ => return Err(bad("kind must be component, seam or mark")),
            };
            let me = verts.len();
            verts.push(BubbleVertex {
                kind,
                parent,
                children: Vec::new(),
                image,
            });
            if let Some(kids) = node.get("children").and_then(Value::as_array) {
                for k in kids {
                    let c = walk(k, Some(me), seam, verts)?;
                    verts[me].children.push(c);
                }
            }
            Ok(me)
        }
        walk(
            v.get("bubble").ok_or_else(|| bad("missing bubble"))?,
            None,
            &seam,
            &mut verts,
        )?;
        Ok(TreePair { n, seam, verts })
    }

    // ------------------------------------------------------------------
    // Gluing
    // ------------------------------------------------------------------

    /// Coordinates of the local poset: non-root components, then non-root
    /// interior seam vertices, both in canonical order.
    pub fn gluing_coordinates(&self) -> Vec<Coord> {
        self.non_root_components()
            .into_iter()
            .map(Coord::A)
            .chain(self.seam.non_root_interior().into_iter().map(Coord::B))
            .collect()
    }

    /// The coherence equations as pairs of coordinate-index sets whose
    /// products must agree (`lhs` product = `rhs` product).
    pub fn coherence_equations(&self) -> Vec<CoherenceEquation> {
        let coords = self.gluing_coordinates();
        let idx = |c: Coord| coords.iter().position(|&d| d == c).unwrap();
        let mut out = Vec::new();
        let mut fibers: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for a in self.multi_line_components() {
            fibers.entry(self.verts[a].image).or_default().push(a);
        }
        for (rho, fiber) in &fibers {
            for (x, &a1) in fiber.iter().enumerate() {
                for &a2 in &fiber[x + 1..] {
                    let beta = self.common_component_ancestor(a1, a2);
                    out.push(CoherenceEquation {
                        lhs: self
                            .component_path(a1, beta)
                            .into_iter()
                            .map(|c| idx(Coord::A(c)))
                            .collect(),
                        rhs: self
                            .component_path(a2, beta)
                            .into_iter()
                            .map(|c| idx(Coord::A(c)))
                            .collect(),
                    });
                }
            }
            if *rho != self.seam.root() {
                for &a in fiber {
                    let beta = self.first_multi_line_ancestor(a).expect(
                        "multi-line component over a non-root vertex has a multi-line ancestor",
                    );
                    out.push(CoherenceEquation {
                        lhs: vec![idx(Coord::B(*rho))],
                        rhs: self
                            .component_path(a, beta)
                            .into_iter()
                            .map(|c| idx(Coord::A(c)))
                            .collect(),
                    });
                }
            }
        }
        out
    }

    /// All {0,1} gluing patterns satisfying the coherences (value 1 = glued).
    pub fn local_poset_elements(&self) -> Vec<Vec<bool>> {
        let k = self.gluing_coordinates().len();
        assert!(
            k <= 24,
            "local poset too large to enumerate ({k} coordinates)"
        );
        let eqs = self.coherence_equations();
        (0u32..(1u32 << k))
            .map(|mask| (0..k).map(|i| mask & (1 << i) != 0).collect::<Vec<bool>>())
            .filter(|p| eqs.iter().all(|e| e.holds(p)))
            .collect()
    }

    /// Glue along a {0,1} pattern: contract the seam edges with `r = 1`,
    /// cut the bubble tree at zeros and replace each piece by its top.
    pub fn glue(&self, pattern: &[bool]) -> Result<TreePair> {
        let coords = self.gluing_coordinates();
        if pattern.len() != coords.len() {
            return Err(Error::Mismatch(format!(
                "pattern has {} entries, expected {}",
                pattern.len(),
                coords.len()
            )));
        }
        for e in self.coherence_equations() {
            if !e.holds(pattern) {
                return Err(Error::CoherenceViolation(e.describe(&coords, self)));
            }
        }
        let ones: BTreeSet<usize> = coords
            .iter()
            .zip(pattern)
            .filter_map(|(c, &p)| match c {
                Coord::B(s) if p => Some(*s),
                _ => None,
            })
            .collect();
        let glued_seam = self.seam.glue(&ones)?;
        let mut two: BTreeSet<TwoBracket> = BTreeSet::new();
        two.insert(self.two_bracket_of(0));
        for (c, &p) in coords.iter().zip(pattern) {
            if let Coord::A(a) = c {
                if !p {
                    two.insert(self.two_bracket_of(*a));
                }
            }
        }
        for v in 0..self.verts.len() {
            if matches!(self.verts[v].kind, Kind::Mark(..)) {
                two.insert(self.two_bracket_of(v));
            }
        }
        TreePair::from_two_bracketing(&TwoBracketing {
            n: self.n.clone(),
            brackets: glued_seam.to_bracketing(),
            two,
        })
    }
}

/// A gluing coordinate: `A(component)` or `B(seam vertex)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coord {
    A(usize),
    B(usize),
}

/// `∏_{lhs} = ∏_{rhs}` over coordinate indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoherenceEquation {
    pub lhs: Vec<usize>,
    pub rhs: Vec<usize>,
}

impl CoherenceEquation {
    pub fn holds(&self, p: &[bool]) -> bool {
        self.lhs.iter().all(|&i| p[i]) == self.rhs.iter().all(|&i| p[i])
    }

    fn describe(&self, coords: &[Coord], tp: &TreePair) -> String {
        let name = |i: usize| match coords[i] {
            Coord::A(v) => format!("q{:?}", tp.marks_below(v)),
            Coord::B(s) => format!("r{:?}", tp.seam.leaves(s)),
        };
        let side = |s: &[usize]| {
            if s.is_empty() {
                "1".to_string()
            } else {
                s.iter().map(|&i| name(i)).collect::<Vec<_>>().join("*")
            }
        };
        format!("{} = {}", side(&self.lhs), side(&self.rhs))
    }
}

impl fmt::Display for TreePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

// ----------------------------------------------------------------------
// Enumeration
// ----------------------------------------------------------------------

type Partial = (BTreeSet<LeafSet>, BTreeSet<TwoBracket>);

/// One way to bracket a group: its 2-brackets and the mark sets it exposes.
type GroupOption = (Vec<TwoBracket>, Vec<BTreeSet<Mark>>);

/// Stable hierarchies over a set of items: families of unions (each of at
/// least 2 items, including the whole set when it has at least 2) forming a
/// stable tree whose leaves are the items.
fn hierarchies<T: Clone + Ord>(items: &[T]) -> Vec<Vec<Vec<T>>> {
    if items.len() == 1 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for part in set_partitions(items) {
        if part.len() < 2 {
            continue;
        }
        let mut acc: Vec<Vec<Vec<T>>> = vec![vec![items.to_vec()]];
        for block in &part {
            let subs = hierarchies(block);
            acc = acc
                .into_iter()
                .flat_map(|a| {
                    subs.iter().map(move |s| {
                        let mut a2 = a.clone();
                        a2.extend(s.iter().cloned());
                        a2
                    })
                })
                .collect();
        }
        out.extend(acc);
    }
    out
}

fn cartesian<T: Clone>(choices: &[Vec<T>]) -> Vec<Vec<T>> {
    choices.iter().fold(vec![Vec::new()], |acc, opts| {
        acc.into_iter()
            .flat_map(|prefix| {
                opts.iter().map(move |o| {
                    let mut p = prefix.clone();
                    p.push(o.clone());
                    p
                })
            })
            .collect()
    })
}

/// Options for one group over a seam vertex with line set `s` of size >= 2:
/// the 2-brackets created at this vertex and the multi-line blocks.
fn group_options(
    s: &LeafSet,
    group: &BTreeSet<Mark>,
) -> Vec<(Vec<TwoBracket>, Vec<BTreeSet<Mark>>)> {
    let items: Vec<Mark> = group.iter().copied().collect();
    let mut out = Vec::new();
    for q in set_partitions(&items) {
        let blocks: Vec<BTreeSet<Mark>> = q.iter().map(|b| b.iter().copied().collect()).collect();
        let idx: Vec<usize> = (0..blocks.len()).collect();
        for h in hierarchies(&idx) {
            let mut made: Vec<TwoBracket> = blocks
                .iter()
                .map(|b| TwoBracket::from_marks(s, b))
                .collect();
            for node in h {
                let marks: BTreeSet<Mark> = node
                    .iter()
                    .flat_map(|&x| blocks[x].iter().copied())
                    .collect();
                made.push(TwoBracket::from_marks(s, &marks));
            }
            out.push((made, blocks.clone()));
        }
    }
    out
}

/// Seam trees on `s` together with, for every group, a component (or bare
/// mark) over the root of the seam tree with exactly that group's marks.
fn gen(s: &LeafSet, groups: &[BTreeSet<Mark>]) -> Vec<Partial> {
    let lines: Vec<usize> = s.iter().copied().collect();
    if lines.len() == 1 {
        let per_group: Vec<Vec<Vec<TwoBracket>>> = groups
            .iter()
            .map(|g| {
                let items: Vec<Mark> = g.iter().copied().collect();
                let marks: Vec<TwoBracket> = items
                    .iter()
                    .map(|m| TwoBracket::from_marks(s, &BTreeSet::from([*m])))
                    .collect();
                hierarchies(&items)
                    .into_iter()
                    .map(|h| {
                        let mut v = marks.clone();
                        v.extend(h.iter().map(|node| {
                            TwoBracket::from_marks(s, &node.iter().copied().collect())
                        }));
                        v
                    })
                    .collect()
            })
            .collect();
        return cartesian(&per_group)
            .into_iter()
            .map(|choice| {
                (
                    BTreeSet::from([s.clone()]),
                    choice.into_iter().flatten().collect(),
                )
            })
            .collect();
    }
    let mut out = Vec::new();
    for part in set_partitions(&lines) {
        if part.len() < 2 {
            continue;
        }
        let parts: Vec<LeafSet> = part.iter().map(|p| p.iter().copied().collect()).collect();
        let per_group: Vec<Vec<GroupOption>> = groups.iter().map(|g| group_options(s, g)).collect();
        for choice in cartesian(&per_group) {
            let here: Vec<TwoBracket> =
                choice.iter().flat_map(|(t, _)| t.iter().cloned()).collect();
            let blocks: Vec<&BTreeSet<Mark>> = choice.iter().flat_map(|(_, b)| b.iter()).collect();
            // For every multi-line block and part, a partition of its marks there.
            let mut slots: Vec<(usize, Vec<Vec<BTreeSet<Mark>>>)> = Vec::new();
            for b in &blocks {
                for (pi, p) in parts.iter().enumerate() {
                    let on_p: Vec<Mark> =
                        b.iter().filter(|(i, _)| p.contains(i)).copied().collect();
                    if on_p.is_empty() {
                        continue;
                    }
                    let opts = set_partitions(&on_p)
                        .into_iter()
                        .map(|q| q.into_iter().map(|blk| blk.into_iter().collect()).collect())
                        .collect();
                    slots.push((pi, opts));
                }
            }
            let slot_opts: Vec<Vec<Vec<BTreeSet<Mark>>>> =
                slots.iter().map(|(_, o)| o.clone()).collect();
            for split in cartesian(&slot_opts) {
                let mut sub_groups: Vec<Vec<BTreeSet<Mark>>> = vec![Vec::new(); parts.len()];
                for ((pi, _), q) in slots.iter().zip(split) {
                    sub_groups[*pi].extend(q);
                }
                let subs: Vec<Vec<Partial>> = parts
                    .iter()
                    .zip(&sub_groups)
                    .map(|(p, g)| gen(p, g))
                    .collect();
                for combo in cartesian(&subs) {
                    let mut brackets = BTreeSet::from([s.clone()]);
                    let mut two: BTreeSet<TwoBracket> = here.iter().cloned().collect();
                    for (b, t) in combo {
                        brackets.extend(b);
                        two.extend(t);
                    }
                    out.push((brackets, two));
                }
            }
        }
    }
    out
}

fn sort_canonically(mut tps: Vec<TreePair>) -> Vec<TreePair> {
    let mut keyed: Vec<(usize, TwoBracketing, TreePair)> = tps
        .drain(..)
        .map(|t| (t.dimension(), t.to_two_bracketing(), t))
        .collect();
    keyed.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    keyed.dedup_by(|a, b| a.1 == b.1);
    keyed.into_iter().map(|(_, _, t)| t).collect()
}

/// All tree-pairs of type `n`, one per isomorphism class, ordered by
/// dimension (descending) and then canonically.
pub fn enumerate_tree_pairs(n: &[usize]) -> Result<Vec<TreePair>> {
    check_type(n)?;
    let r = n.len();
    let groups = vec![all_marks(n)];
    let tps = gen(&full_set(r), &groups)
        .into_iter()
        .map(|(brackets, two)| {
            let mut sets = brackets;
            for i in 1..=r {
                sets.insert(LeafSet::from([i]));
            }
            TreePair::from_two_bracketing(&TwoBracketing {
                n: n.to_vec(),
                brackets: Bracketing::new(r, sets)?,
                two,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(sort_canonically(tps))
}

/// Default bound on the number of candidate 2-brackets for brute force.
pub const DEFAULT_BRUTE_FORCE_BOUND: usize = 48;

/// All 2-bracketings of `n` by exhaustive search over collections of
/// candidate 2-brackets, checked against the axioms.
pub fn enumerate_two_bracketings_bruteforce(
    n: &[usize],
    bound: usize,
) -> Result<Vec<TwoBracketing>> {
    check_type(n)?;
    let r = n.len();
    let marks = all_marks(n);
    let root = TwoBracket::from_marks(&full_set(r), &marks);
    let point_brackets: BTreeSet<TwoBracket> = marks
        .iter()
        .map(|&(i, j)| TwoBracket::from_marks(&LeafSet::from([i]), &BTreeSet::from([(i, j)])))
        .collect();
    let mut out = Vec::new();
    for t in enumerate_stable_trees(r) {
        let b = t.to_bracketing();
        let mut cands: Vec<TwoBracket> = Vec::new();
        for s in b.sets() {
            let on: Vec<Mark> = marks
                .iter()
                .filter(|(i, _)| s.contains(i))
                .copied()
                .collect();
            if on.len() >= 20 {
                return Err(Error::SizeBound {
                    what: "candidate 2-brackets".into(),
                    needed: usize::MAX,
                    bound,
                });
            }
            for mask in 1u32..(1 << on.len()) {
                let sel: BTreeSet<Mark> = (0..on.len())
                    .filter(|k| mask & (1 << k) != 0)
                    .map(|k| on[k])
                    .collect();
                let tb = TwoBracket::from_marks(s, &sel);
                if tb != root && !point_brackets.contains(&tb) {
                    cands.push(tb);
                }
            }
            if cands.len() > bound {
                return Err(Error::SizeBound {
                    what: "candidate 2-brackets".into(),
                    needed: cands.len(),
                    bound,
                });
            }
        }
        let mut chosen: Vec<usize> = Vec::new();
        fn compatible(a: &TwoBracket, b: &TwoBracket) -> bool {
            !a.shares_point(b) || a.is_subset(b) || b.is_subset(a)
        }
        fn rec(
            i: usize,
            cands: &[TwoBracket],
            chosen: &mut Vec<usize>,
            base: &TwoBracketing,
            out: &mut Vec<TwoBracketing>,
        ) {
            if i == cands.len() {
                let mut tb = base.clone();
                tb.two.extend(chosen.iter().map(|&k| cands[k].clone()));
                if tb.validate().is_ok() {
                    out.push(tb);
                }
                return;
            }
            rec(i + 1, cands, chosen, base, out);
            if chosen.iter().all(|&k| compatible(&cands[k], &cands[i])) {
                chosen.push(i);
                rec(i + 1, cands, chosen, base, out);
                chosen.pop();
            }
        }
        let mut base_two = point_brackets.clone();
        base_two.insert(root.clone());
        let base = TwoBracketing {
            n: n.to_vec(),
            brackets: b.clone(),
            two: base_two,
        };
        rec(0, &cands, &mut chosen, &base, &mut out);
    }
    out.sort();
    Ok(out)
}

/// Number of tree-pairs per stratum dimension (index = dimension).
pub fn f_vector(n: &[usize]) -> Result<Vec<usize>> {
    let tps = enumerate_tree_pairs(n)?;
    let max = tps.iter().map(|t| t.dimension()).max().unwrap_or(0);
    let mut f = vec![0usize; max + 1];
    for t in &tps {
        f[t.dimension()] += 1;
    }
    Ok(f)
}

/// Fiber-product type `(r; n^1, ..., n^a)` used by the polynomial recursion.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FiberSpec {
    pub r: usize,
    pub factors: Vec<Vec<usize>>,
}

impl FiberSpec {
    pub fn new(r: usize, factors: Vec<Vec<usize>>) -> Result<FiberSpec> {
        if r == 0 {
            return Err(Error::InvalidSpec("r must be positive".into()));
        }
        if factors.is_empty() {
            return Err(Error::InvalidSpec("at least one factor is required".into()));
        }
        for f in &factors {
            if f.len() != r {
                return Err(Error::InvalidSpec(format!(
                    "factor {f:?} does not have length {r}"
                )));
            }
            if f.iter().all(|&k| k == 0) {
                return Err(Error::InvalidSpec("factors must be nonzero".into()));
            }
        }
        Ok(FiberSpec { r, factors })
    }
}
