//! Charts: gluing polynomials, chart evaluation, q-factor extraction, slice
//! normalization, exact chart inversion and transition-map checks, for
//! stable curves (points on a line) and stable plane-trees (points on
//! vertical lines in a plane).
//!
//! A chart of a sliced tree sends gluing parameters `b` (one per non-root
//! interior vertex) and free screen positions to a stable curve. Positions
//! on the glued curve are the gluing polynomials
//! `p_{ρσ}(b) = Σ_{τ ∈ [ρ,σ)} x̃_{τσ} ∏_{υ ∈ (ρ,τ]} b_υ`, where `x̃` are the
//! base positions of the sliced tree (the slice children sit at 0 and 1).
//! Zero parameters select the surviving screens.
//!
//! Inversion is exact over the rationals and follows the leaf-removal
//! elimination: for every non-root interior vertex `v`, the difference
//! between the points reached from `v` through `s1` and through `s0` is
//! `∏_{(ρ,v]} b`, which fixes `b_v` given its ancestors.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exact_poly::{format_rational, parse_rational, MultiPoly};
use crate::local_models::coordinate_names;
use crate::tree_pairs::{Kind, Mark, TreePair, TwoBracket};
use crate::trees::{default_slice, pushforward_slice, LeafSet, Slice, StableTree};

pub type Rat = BigRational;

fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// A position `x_{ρσ}`: finite when `σ` lies below `ρ`, and the formal
/// point at infinity otherwise. The latter is a marker only; asking for its
/// value is an error.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Position {
    Finite(Rat),
    Infinity,
}

impl Position {
    pub fn finite(&self) -> Result<&Rat> {
        match self {
            Position::Finite(x) => Ok(x),
            Position::Infinity => Err(Error::OutsideDomain(
                "arithmetic with the position at infinity".into(),
            )),
        }
    }
}

fn all_distinct(xs: &[Rat]) -> bool {
    let set: BTreeSet<&Rat> = xs.iter().collect();
    set.len() == xs.len()
}

// ----------------------------------------------------------------------
// Stable curves
// ----------------------------------------------------------------------

/// A stable curve: a stable tree with, at every interior vertex, pairwise
/// distinct positions of its children (aligned with `tree.children(ρ)`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StableCurve {
    tree: StableTree,
    positions: BTreeMap<usize, Vec<Rat>>,
}

impl StableCurve {
    pub fn new(tree: StableTree, positions: BTreeMap<usize, Vec<Rat>>) -> Result<StableCurve> {
        for (&rho, xs) in &positions {
            if rho >= tree.len() || tree.children(rho).is_empty() {
                return Err(Error::InvalidTree(format!("vertex {rho} is not a screen")));
            }
            if xs.len() != tree.children(rho).len() {
                return Err(Error::Mismatch(format!(
                    "screen {rho} has {} children but {} positions",
                    tree.children(rho).len(),
                    xs.len()
                )));
            }
            if !all_distinct(xs) {
                return Err(Error::OutsideDomain(format!(
                    "coincident special points on the screen {:?}",
                    tree.leaves(rho)
                )));
            }
        }
        for rho in 0..tree.len() {
            if !tree.children(rho).is_empty() && !positions.contains_key(&rho) {
                return Err(Error::Mismatch(format!("no positions for screen {rho}")));
            }
        }
        Ok(StableCurve { tree, positions })
    }

    pub fn tree(&self) -> &StableTree {
        &self.tree
    }

    /// Positions on the screen `rho`, aligned with its children.
    pub fn positions(&self, rho: usize) -> &[Rat] {
        &self.positions[&rho]
    }

    pub fn all_positions(&self) -> &BTreeMap<usize, Vec<Rat>> {
        &self.positions
    }

    /// `x_{ρσ}`: the position of the child of `ρ` toward `σ`, or infinity
    /// when `σ` is not strictly below `ρ`.
    pub fn x(&self, rho: usize, sigma: usize) -> Result<Position> {
        if !self.positions.contains_key(&rho) {
            return Err(Error::InvalidTree(format!("vertex {rho} is not a screen")));
        }
        match self.tree.child_toward(rho, sigma) {
            Some(c) => {
                let k = self
                    .tree
                    .children(rho)
                    .iter()
                    .position(|&u| u == c)
                    .unwrap();
                Ok(Position::Finite(self.positions[&rho][k].clone()))
            }
            None => Ok(Position::Infinity),
        }
    }

    /// Positions of the marked points on the root screen of a smooth curve.
    pub fn root_tuple(&self) -> Result<Vec<Rat>> {
        if self.tree.len() != self.tree.r() + 1 {
            return Err(Error::InvalidTree("the curve is not smooth".into()));
        }
        Ok(self.positions[&0].clone())
    }

    pub fn to_json(&self) -> Value {
        let screens: Vec<Value> = self
            .positions
            .iter()
            .map(|(&rho, xs)| {
                let pos: Vec<Value> = self
                    .tree
                    .children(rho)
                    .iter()
                    .zip(xs)
                    .map(|(&c, x)| json!({"child": self.tree.leaves(c), "x": format_rational(x)}))
                    .collect();
                json!({"leaves": self.tree.leaves(rho), "positions": pos})
            })
            .collect();
        json!({"tree": self.tree.to_json(), "screens": screens})
    }

    pub fn from_json(v: &Value) -> Result<StableCurve> {
        let bad = |m: &str| Error::Invalid(format!("malformed curve JSON: {m}"));
        let tree = StableTree::from_json(v.get("tree").ok_or_else(|| bad("missing `tree`"))?)?;
        let mut positions = BTreeMap::new();
        for s in v
            .get("screens")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing `screens`"))?
        {
            let leaves = leaf_set(s.get("leaves")).ok_or_else(|| bad("screen leaves"))?;
            let rho = tree
                .vertex_with_leaves(&leaves)
                .ok_or_else(|| bad("screen is not a vertex"))?;
            let mut xs = vec![None; tree.children(rho).len()];
            for p in s
                .get("positions")
                .and_then(Value::as_array)
                .ok_or_else(|| bad("missing `positions`"))?
            {
                let child = leaf_set(p.get("child")).ok_or_else(|| bad("child leaves"))?;
                let c = tree
                    .vertex_with_leaves(&child)
                    .ok_or_else(|| bad("child is not a vertex"))?;
                let k = tree
                    .children(rho)
                    .iter()
                    .position(|&u| u == c)
                    .ok_or_else(|| bad("not a child of the screen"))?;
                xs[k] = Some(rational_value(p.get("x")).ok_or_else(|| bad("position"))??);
            }
            let xs: Option<Vec<Rat>> = xs.into_iter().collect();
            positions.insert(rho, xs.ok_or_else(|| bad("missing child position"))?);
        }
        StableCurve::new(tree, positions)
    }
}

fn leaf_set(v: Option<&Value>) -> Option<LeafSet> {
    v?.as_array()?
        .iter()
        .map(|x| x.as_u64().map(|u| u as usize))
        .collect()
}

/// Accept `"p/q"` strings or JSON integers.
pub fn rational_value(v: Option<&Value>) -> Option<Result<Rat>> {
    match v? {
        Value::String(s) => Some(parse_rational(s)),
        Value::Number(n) => n.as_i64().map(|i| Ok(rat(i))),
        _ => None,
    }
}

/// `Σ_{τ ∈ [ρ,σ)} x_{τσ} ∏_{υ ∈ (ρ,τ]} b_υ` over a tree with positions
/// `x(τ, child index)`, as a polynomial in the gluing variables.
fn path_poly(
    tree: &StableTree,
    x: &dyn Fn(usize, usize) -> Rat,
    rho: usize,
    sigma: usize,
) -> MultiPoly {
    let path = tree.path_down(rho, sigma).expect("sigma below rho");
    let mut acc = MultiPoly::zero();
    let mut prod = MultiPoly::from_int(1);
    for k in 0..path.len() - 1 {
        let tau = path[k];
        if k > 0 {
            prod = &prod * &MultiPoly::var(&tree.gluing_var(tau));
        }
        let idx = tree
            .children(tau)
            .iter()
            .position(|&c| c == path[k + 1])
            .unwrap();
        acc = &acc + &prod.scale(&x(tau, idx));
    }
    acc
}

/// The same sum evaluated at gluing values indexed by vertex.
fn path_value(
    tree: &StableTree,
    base: &BTreeMap<usize, Vec<Rat>>,
    b: &BTreeMap<usize, Rat>,
    rho: usize,
    sigma: usize,
) -> Rat {
    let path = tree.path_down(rho, sigma).expect("sigma below rho");
    let mut acc = Rat::zero();
    let mut prod = Rat::one();
    for k in 0..path.len() - 1 {
        let tau = path[k];
        if k > 0 {
            prod *= &b[&tau];
        }
        let idx = tree
            .children(tau)
            .iter()
            .position(|&c| c == path[k + 1])
            .unwrap();
        acc += &prod * &base[&tau][idx];
    }
    acc
}

fn check_below(tree: &StableTree, rho: usize, sigma: usize) -> Result<()> {
    if rho >= tree.len() || tree.children(rho).is_empty() {
        return Err(Error::InvalidTree(format!("vertex {rho} is not interior")));
    }
    if sigma >= tree.len() || sigma == rho || !tree.is_ancestor_or_eq(rho, sigma) {
        return Err(Error::OutsideDomain(format!(
            "vertex {sigma} is not strictly below {rho}; its position there is at infinity"
        )));
    }
    Ok(())
}

/// The gluing polynomial `p_{ρσ}` of a curve, in the variables `b1, b2, …`
/// of its tree.
pub fn gluing_polynomial(c: &StableCurve, rho: usize, sigma: usize) -> Result<MultiPoly> {
    check_below(&c.tree, rho, sigma)?;
    Ok(path_poly(
        &c.tree,
        &|t, k| c.positions[&t][k].clone(),
        rho,
        sigma,
    ))
}

fn gluing_vars(tree: &StableTree) -> BTreeSet<String> {
    tree.non_root_interior()
        .into_iter()
        .map(|v| tree.gluing_var(v))
        .collect()
}

/// `q_{ij}`: `p_{root,i} − p_{root,j}` with its monomial content removed.
pub fn extract_q_factor(c: &StableCurve, i: usize, j: usize) -> Result<MultiPoly> {
    let x = |t: usize, k: usize| c.positions[&t][k].clone();
    q_factor_with(&c.tree, &x, i, j)
}

fn q_factor_with(
    tree: &StableTree,
    x: &dyn Fn(usize, usize) -> Rat,
    i: usize,
    j: usize,
) -> Result<MultiPoly> {
    let r = tree.r();
    if i == j || i == 0 || j == 0 || i > r || j > r {
        return Err(Error::Invalid(format!(
            "q_{{{i},{j}}} needs distinct leaves in 1..={r}"
        )));
    }
    let pi = path_poly(tree, x, 0, tree.leaf_vertex(i));
    let pj = path_poly(tree, x, 0, tree.leaf_vertex(j));
    let (_, q) = (&pi - &pj).monomial_content_split(&gluing_vars(tree))?;
    Ok(q)
}

// ----------------------------------------------------------------------
// Sliced trees and their charts
// ----------------------------------------------------------------------

/// A stable tree with a slice; the chart domain coordinates are the free
/// positions of the non-slice children and the gluing parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlicedTree {
    pub tree: StableTree,
    pub slice: Slice,
}

/// A point of a chart domain: free positions per interior vertex (for the
/// children other than the two slice children, in child order) and gluing
/// parameters by variable name.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChartPoint {
    pub free: BTreeMap<usize, Vec<Rat>>,
    pub b: BTreeMap<String, Rat>,
}

impl ChartPoint {
    /// A point of a 0-dimensional tree from gluing values only.
    pub fn from_b(b: BTreeMap<String, Rat>) -> ChartPoint {
        ChartPoint {
            free: BTreeMap::new(),
            b,
        }
    }
}

impl SlicedTree {
    pub fn new(tree: StableTree, slice: Slice) -> Result<SlicedTree> {
        slice.validate(&tree)?;
        Ok(SlicedTree { tree, slice })
    }

    pub fn with_default_slice(tree: StableTree) -> Result<SlicedTree> {
        let slice = default_slice(&tree)?;
        Ok(SlicedTree { tree, slice })
    }

    pub fn parse(s: &str) -> Result<SlicedTree> {
        Self::with_default_slice(StableTree::parse(s)?)
    }

    /// Gluing variable names, in canonical vertex order.
    pub fn variables(&self) -> Vec<String> {
        self.tree
            .non_root_interior()
            .into_iter()
            .map(|v| self.tree.gluing_var(v))
            .collect()
    }

    /// Children of `rho` other than the two slice children.
    pub fn free_children(&self, rho: usize) -> Vec<usize> {
        self.tree
            .children(rho)
            .iter()
            .copied()
            .filter(|&c| c != self.slice.s0[&rho] && c != self.slice.s1[&rho])
            .collect()
    }

    /// Base positions `x̃`: slice children at 0 and 1, the rest from `free`.
    fn base_positions(
        &self,
        free: &BTreeMap<usize, Vec<Rat>>,
    ) -> Result<BTreeMap<usize, Vec<Rat>>> {
        let mut out = BTreeMap::new();
        for rho in self.tree.interior() {
            let kids = self.tree.children(rho);
            if kids.is_empty() {
                continue;
            }
            let given = free.get(&rho).map(Vec::as_slice).unwrap_or(&[]);
            let fc = self.free_children(rho);
            if given.len() != fc.len() {
                return Err(Error::Mismatch(format!(
                    "screen {rho} has {} free positions, {} given",
                    fc.len(),
                    given.len()
                )));
            }
            let xs = kids
                .iter()
                .map(|&c| {
                    if c == self.slice.s0[&rho] {
                        Rat::zero()
                    } else if c == self.slice.s1[&rho] {
                        Rat::one()
                    } else {
                        given[fc.iter().position(|&u| u == c).unwrap()].clone()
                    }
                })
                .collect();
            out.insert(rho, xs);
        }
        if let Some(extra) = free.keys().find(|k| !out.contains_key(k)) {
            return Err(Error::InvalidTree(format!(
                "vertex {extra} is not a screen"
            )));
        }
        Ok(out)
    }

    /// The base curve `C_T(x)` on the tree itself.
    pub fn base_curve(&self, free: &BTreeMap<usize, Vec<Rat>>) -> Result<StableCurve> {
        StableCurve::new(self.tree.clone(), self.base_positions(free)?)
    }

    /// `q_{ij}` as a polynomial in the gluing variables, at the given free
    /// positions.
    pub fn q_factor(
        &self,
        free: &BTreeMap<usize, Vec<Rat>>,
        i: usize,
        j: usize,
    ) -> Result<MultiPoly> {
        let base = self.base_positions(free)?;
        q_factor_with(&self.tree, &|t, k| base[&t][k].clone(), i, j)
    }

    fn b_by_vertex(&self, b: &BTreeMap<String, Rat>) -> Result<BTreeMap<usize, Rat>> {
        let names: BTreeSet<String> = self.variables().into_iter().collect();
        if let Some(extra) = b.keys().find(|k| !names.contains(*k)) {
            return Err(Error::Invalid(format!("unknown gluing variable `{extra}`")));
        }
        self.tree
            .non_root_interior()
            .into_iter()
            .map(|v| {
                let name = self.tree.gluing_var(v);
                b.get(&name)
                    .cloned()
                    .map(|x| (v, x))
                    .ok_or(Error::MissingVariable(name))
            })
            .collect()
    }
}

/// Evaluate the chart of a sliced tree: the glued curve on `g_T(π_T(b))`
/// with positions `p_{ρσ}(b)`. Fails with the first vanishing `q_{ij}` when
/// the point lies outside the chart domain.
pub fn evaluate_chart(st: &SlicedTree, pt: &ChartPoint) -> Result<StableCurve> {
    let t = &st.tree;
    let base = st.base_positions(&pt.free)?;
    let b = st.b_by_vertex(&pt.b)?;
    let r = t.r();
    let polys: Vec<MultiPoly> = (1..=r)
        .map(|i| path_poly(t, &|u, k| base[&u][k].clone(), 0, t.leaf_vertex(i)))
        .collect();
    let vars = gluing_vars(t);
    for i in 1..=r {
        for j in i + 1..=r {
            let (_, q) = (&polys[i - 1] - &polys[j - 1]).monomial_content_split(&vars)?;
            if q.eval(&pt.b)?.is_zero() {
                return Err(Error::DomainViolation { i, j });
            }
        }
    }
    let ones: BTreeSet<usize> = b
        .iter()
        .filter(|(_, x)| !x.is_zero())
        .map(|(&v, _)| v)
        .collect();
    let glued = t.glue(&ones)?;
    let mut positions = BTreeMap::new();
    for rho2 in 0..glued.len() {
        if glued.children(rho2).is_empty() {
            continue;
        }
        let rho = t.vertex_with_leaves(glued.leaves(rho2)).unwrap();
        let xs = glued
            .children(rho2)
            .iter()
            .map(|&s2| {
                let sigma = t.vertex_with_leaves(glued.leaves(s2)).unwrap();
                path_value(t, &base, &b, rho, sigma)
            })
            .collect();
        positions.insert(rho2, xs);
    }
    StableCurve::new(glued, positions)
}

/// Apply the affine map sending `xs[i0] ↦ 0` and `xs[i1] ↦ 1`.
pub fn normalize_tuple(xs: &[Rat], i0: usize, i1: usize) -> Result<Vec<Rat>> {
    if i0 >= xs.len() || i1 >= xs.len() {
        return Err(Error::Mismatch(format!(
            "pin index out of range for {} entries",
            xs.len()
        )));
    }
    let scale = &xs[i1] - &xs[i0];
    if scale.is_zero() {
        return Err(Error::CoincidentPins);
    }
    Ok(xs.iter().map(|x| (x - &xs[i0]) / &scale).collect())
}

/// Normalize every screen of a curve so that the slice children sit at 0
/// and 1.
pub fn normalize_to_slice(c: &StableCurve, slice: &Slice) -> Result<StableCurve> {
    slice.validate(&c.tree)?;
    let mut positions = BTreeMap::new();
    for (&rho, xs) in &c.positions {
        let kids = c.tree.children(rho);
        let i0 = kids.iter().position(|&u| u == slice.s0[&rho]).unwrap();
        let i1 = kids.iter().position(|&u| u == slice.s1[&rho]).unwrap();
        positions.insert(rho, normalize_tuple(xs, i0, i1)?);
    }
    StableCurve::new(c.tree.clone(), positions)
}

/// Invert a chart exactly: find the chart point mapping to `c` (given in
/// any affine frame on each screen). Fails when `c` is not in the image.
pub fn invert_chart(st: &SlicedTree, c: &StableCurve) -> Result<ChartPoint> {
    let t = &st.tree;
    if c.tree.r() != t.r() || !t.poset_leq(&c.tree)? {
        return Err(Error::OutsideDomain(format!(
            "the curve's tree {} is not a gluing of {}",
            c.tree, t
        )));
    }
    let kept: BTreeSet<usize> = (0..t.len())
        .filter(|&v| c.tree.vertex_with_leaves(t.leaves(v)).is_some())
        .collect();
    let ones: BTreeSet<usize> = t
        .non_root_interior()
        .into_iter()
        .filter(|v| !kept.contains(v))
        .collect();
    let (_, pushed) = pushforward_slice(t, &st.slice, &ones)?;
    let c = normalize_to_slice(c, &pushed)?;

    // Screen of every vertex: itself when kept, else its nearest kept ancestor.
    let screen = |v: usize| -> usize {
        let mut u = v;
        while !kept.contains(&u) {
            u = t.parent(u).unwrap();
        }
        u
    };
    // Position, on the screen `rho`, of the point reached from `v` by `s0`.
    let base_pt = |v: usize, rho: usize| -> Rat {
        let mut u = v;
        loop {
            if u == rho {
                return Rat::zero();
            }
            if kept.contains(&u) {
                let rho2 = c.tree.vertex_with_leaves(t.leaves(rho)).unwrap();
                let u2 = c.tree.vertex_with_leaves(t.leaves(u)).unwrap();
                let k = c.tree.children(rho2).iter().position(|&w| w == u2).unwrap();
                return c.positions[&rho2][k].clone();
            }
            u = st.slice.s0[&u];
        }
    };

    let mut prod: BTreeMap<usize, Rat> = BTreeMap::new();
    let mut pt = ChartPoint::default();
    for v in t.interior() {
        if t.children(v).is_empty() {
            continue;
        }
        let rho = screen(v);
        let p_v = if v == rho {
            Rat::one()
        } else {
            base_pt(st.slice.s1[&v], rho) - base_pt(st.slice.s0[&v], rho)
        };
        if v != 0 {
            let name = t.gluing_var(v);
            if v == rho {
                pt.b.insert(name, Rat::zero());
            } else {
                let parent = t.parent(v).unwrap();
                let p_parent = if parent == rho {
                    Rat::one()
                } else {
                    prod[&parent].clone()
                };
                if p_v.is_zero() || p_parent.is_zero() {
                    return Err(Error::OutsideDomain(format!(
                        "gluing parameter {name} would vanish"
                    )));
                }
                pt.b.insert(name, &p_v / &p_parent);
            }
        }
        let origin = base_pt(v, rho);
        let free: Vec<Rat> = st
            .free_children(v)
            .into_iter()
            .map(|s| (base_pt(s, rho) - &origin) / &p_v)
            .collect();
        if !free.is_empty() {
            pt.free.insert(v, free);
        }
        prod.insert(v, p_v);
    }
    let image = evaluate_chart(st, &pt).map_err(|e| Error::OutsideDomain(format!("{e}")))?;
    if image != c {
        return Err(Error::OutsideDomain(
            "the curve is not in the image of the chart".into(),
        ));
    }
    Ok(pt)
}

/// The transition map `φ_{T2}^{-1} ∘ φ_{T1}` at a point of the first chart.
pub fn transition(st1: &SlicedTree, st2: &SlicedTree, pt: &ChartPoint) -> Result<ChartPoint> {
    invert_chart(st2, &evaluate_chart(st1, pt)?)
}

/// A random nonzero rational `p/q` with `|p| ≤ 9`, `1 ≤ q ≤ 5`.
pub fn random_nonzero_rational<R: Rng>(rng: &mut R) -> Rat {
    loop {
        let p: i64 = rng.gen_range(-9..=9);
        let q: i64 = rng.gen_range(1..=5);
        if p != 0 {
            return Rat::new(p.into(), q.into());
        }
    }
}

/// A random point of the chart domain with all gluing parameters nonzero
/// (the open stratum) and free positions distinct and away from 0 and 1.
/// Returns `None` when the sample misses the domain.
pub fn sample_open_point<R: Rng>(st: &SlicedTree, rng: &mut R) -> Option<ChartPoint> {
    let mut pt = ChartPoint::default();
    for v in st.tree.interior() {
        let fc = st.free_children(v);
        if fc.is_empty() {
            continue;
        }
        let mut xs: Vec<Rat> = Vec::new();
        while xs.len() < fc.len() {
            let x = random_nonzero_rational(rng);
            if !x.is_one() && !xs.contains(&x) {
                xs.push(x);
            }
        }
        pt.free.insert(v, xs);
    }
    for name in st.variables() {
        pt.b.insert(name, random_nonzero_rational(rng));
    }
    evaluate_chart(st, &pt).ok().map(|_| pt)
}

/// Outcome of a batch of transition checks.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TransitionReport {
    pub samples: usize,
    /// Samples whose transition was computed and round-tripped.
    pub checked: usize,
    /// Samples outside the domain of the transition map.
    pub skipped: usize,
    pub failures: Vec<String>,
}

impl TransitionReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "samples": self.samples,
            "checked": self.checked,
            "skipped": self.skipped,
            "failures": self.failures,
        })
    }
}

/// Check `φ_{T2}^{-1} ∘ φ_{T1}` on random open-stratum points of the first
/// chart: the transition is computed by exact inversion, the image curves
/// agree, and the inverse transition returns the original point.
pub fn transition_check<R: Rng>(
    st1: &SlicedTree,
    st2: &SlicedTree,
    samples: usize,
    rng: &mut R,
) -> Result<TransitionReport> {
    if st1.tree.r() != st2.tree.r() {
        return Err(Error::Mismatch(
            "transition between trees with different r".into(),
        ));
    }
    let mut rep = TransitionReport {
        samples,
        ..Default::default()
    };
    for _ in 0..samples {
        let Some(pt) = sample_open_point(st1, rng) else {
            rep.skipped += 1;
            continue;
        };
        let c1 = evaluate_chart(st1, &pt)?;
        let pt2 = match invert_chart(st2, &c1) {
            Ok(p) => p,
            Err(Error::OutsideDomain(_)) | Err(Error::DomainViolation { .. }) => {
                rep.skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let c2 = evaluate_chart(st2, &pt2)?;
        let same_point = normalize_to_slice(&c2, &pushed_slice_of(st1, c2.tree())?)? == c1;
        match invert_chart(st1, &c2) {
            Ok(back) if back == pt && same_point => rep.checked += 1,
            Ok(back) => rep
                .failures
                .push(format!("round trip {pt:?} -> {pt2:?} -> {back:?}")),
            Err(e) => rep
                .failures
                .push(format!("inverse transition failed at {pt:?}: {e}")),
        }
    }
    Ok(rep)
}

fn pushed_slice_of(st: &SlicedTree, glued: &StableTree) -> Result<Slice> {
    let ones: BTreeSet<usize> = st
        .tree
        .non_root_interior()
        .into_iter()
        .filter(|&v| glued.vertex_with_leaves(st.tree.leaves(v)).is_none())
        .collect();
    Ok(pushforward_slice(&st.tree, &st.slice, &ones)?.1)
}

/// The two sliced trees on four leaves used for the worked transition:
/// `[[1,[2,3]],4]` with parameters `(r, s) = (b1, b2)` and
/// `[1,[[2,3],4]]` with parameters `(r', s') = (b1, b2)`, default slices.
pub fn four_point_example() -> (SlicedTree, SlicedTree) {
    (
        SlicedTree::parse("[[1,[2,3]],4]").unwrap(),
        SlicedTree::parse("[1,[[2,3],4]]").unwrap(),
    )
}

/// Closed form of the four-point transition: `(r,s) ↦ ((1−r)/r, rs/(1−r))`.
pub fn four_point_closed_form(r: &Rat, s: &Rat) -> (Rat, Rat) {
    let one = Rat::one();
    ((&one - r) / r, r * s / (&one - r))
}

/// Check the four-point transition against its closed form at `samples`
/// random points with `r ∉ {0, 1}`, and on the boundary `s = 0`.
pub fn four_point_closed_form_check<R: Rng>(
    samples: usize,
    rng: &mut R,
) -> Result<TransitionReport> {
    let (t1, t2) = four_point_example();
    let mut rep = TransitionReport {
        samples,
        ..Default::default()
    };
    for k in 0..samples {
        let r = random_nonzero_rational(rng);
        let s = if k % 4 == 0 {
            Rat::zero()
        } else {
            random_nonzero_rational(rng)
        };
        let pt = ChartPoint::from_b(BTreeMap::from([
            ("b1".to_string(), r.clone()),
            ("b2".to_string(), s.clone()),
        ]));
        let image = match transition(&t1, &t2, &pt) {
            Ok(p) => p,
            Err(Error::OutsideDomain(_)) | Err(Error::DomainViolation { .. }) => {
                rep.skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let (r2, s2) = four_point_closed_form(&r, &s);
        if image.b["b1"] == r2 && image.b["b2"] == s2 {
            rep.checked += 1;
        } else {
            rep.failures
                .push(format!("(r,s)=({r},{s}) gave {:?}", image.b));
        }
    }
    Ok(rep)
}

// ----------------------------------------------------------------------
// Stable plane-trees
// ----------------------------------------------------------------------

/// A stable plane-tree: a tree-pair with line positions on every seam
/// screen and, on every component, the points `(x, y)` on each of its lines
/// (aligned with the component's lines and each line's children).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StablePlaneTree {
    tp: TreePair,
    x: BTreeMap<usize, Vec<Rat>>,
    z: BTreeMap<usize, Vec<Vec<(Rat, Rat)>>>,
}

impl StablePlaneTree {
    pub fn new(
        tp: TreePair,
        x: BTreeMap<usize, Vec<Rat>>,
        z: BTreeMap<usize, Vec<Vec<(Rat, Rat)>>>,
    ) -> Result<StablePlaneTree> {
        StableCurve::new(tp.seam().clone(), x.clone())?;
        let comps = tp.components();
        if z.len() != comps.len() || comps.iter().any(|a| !z.contains_key(a)) {
            return Err(Error::Mismatch(
                "one point collection per component expected".into(),
            ));
        }
        for &a in &comps {
            let lines = &tp.vertex(a).children;
            let za = &z[&a];
            if za.len() != lines.len() {
                return Err(Error::Mismatch(format!(
                    "component {a}: wrong number of lines"
                )));
            }
            let mut line_x: Vec<Rat> = Vec::new();
            for (&s, pts) in lines.iter().zip(za) {
                if pts.len() != tp.vertex(s).children.len() {
                    return Err(Error::Mismatch(format!(
                        "component {a}: wrong number of points"
                    )));
                }
                let ys: Vec<Rat> = pts.iter().map(|p| p.1.clone()).collect();
                if !all_distinct(&ys) {
                    return Err(Error::OutsideDomain(format!(
                        "coincident points on a line of the component over {:?}",
                        tp.marks_below(a)
                    )));
                }
                let lx = if tp.is_multi_line(a) {
                    let rho = tp.vertex(a).image;
                    let sigma = tp.vertex(s).image;
                    let k = tp
                        .seam()
                        .children(rho)
                        .iter()
                        .position(|&u| u == sigma)
                        .ok_or_else(|| {
                            Error::InvalidTreePair(vec![format!(
                                "line {s} does not lie over a child of {rho}"
                            )])
                        })?;
                    x[&rho][k].clone()
                } else {
                    pts.first().map(|p| p.0.clone()).unwrap_or_else(Rat::zero)
                };
                if pts.iter().any(|p| p.0 != lx) {
                    return Err(Error::OutsideDomain(format!(
                        "points off their line in the component over {:?}",
                        tp.marks_below(a)
                    )));
                }
                line_x.push(lx);
            }
            if !all_distinct(&line_x) {
                return Err(Error::OutsideDomain("coincident lines".into()));
            }
        }
        Ok(StablePlaneTree { tp, x, z })
    }

    pub fn tree_pair(&self) -> &TreePair {
        &self.tp
    }

    pub fn seam_positions(&self) -> &BTreeMap<usize, Vec<Rat>> {
        &self.x
    }

    /// Points of component `alpha`, per line.
    pub fn points(&self, alpha: usize) -> &[Vec<(Rat, Rat)>] {
        &self.z[&alpha]
    }

    /// `z_{αβ}` for a point-vertex `beta` (component or mark) on a line of `alpha`.
    pub fn z_of(&self, alpha: usize, beta: usize) -> Option<&(Rat, Rat)> {
        let s = self.tp.vertex(beta).parent?;
        if self.tp.vertex(s).parent? != alpha {
            return None;
        }
        let li = self
            .tp
            .vertex(alpha)
            .children
            .iter()
            .position(|&u| u == s)?;
        let k = self.tp.vertex(s).children.iter().position(|&u| u == beta)?;
        Some(&self.z[&alpha][li][k])
    }

    pub fn to_json(&self) -> Value {
        let seam = StableCurve {
            tree: self.tp.seam().clone(),
            positions: self.x.clone(),
        };
        let comps: Vec<Value> = self
            .z
            .iter()
            .map(|(&a, lines)| {
                let ls: Vec<Value> = self
                    .tp
                    .vertex(a)
                    .children
                    .iter()
                    .zip(lines)
                    .map(|(&s, pts)| {
                        let ps: Vec<Value> = self
                            .tp
                            .vertex(s)
                            .children
                            .iter()
                            .zip(pts)
                            .map(|(&b, (x, y))| {
                                json!({"marks": self.tp.marks_below(b), "z": [format_rational(x), format_rational(y)]})
                            })
                            .collect();
                        json!({"lines": self.tp.seam().leaves(self.tp.vertex(s).image), "points": ps})
                    })
                    .collect();
                json!({"marks": self.tp.marks_below(a), "lines": ls})
            })
            .collect();
        json!({"tree_pair": self.tp.to_json(), "seam": seam.to_json(), "components": comps})
    }
}

/// The component path from `alpha` down to `beta`, as `(γ, child of γ toward β)`.
fn component_steps(tp: &TreePair, alpha: usize, beta: usize) -> Option<Vec<(usize, usize)>> {
    let mut steps = Vec::new();
    let mut cur = beta;
    loop {
        let g = tp.parent_component(cur)?;
        steps.push((g, cur));
        if g == alpha {
            break;
        }
        cur = g;
    }
    steps.reverse();
    Some(steps)
}

fn component_names(tp: &TreePair) -> BTreeMap<usize, String> {
    tp.non_root_components()
        .into_iter()
        .zip(coordinate_names(tp))
        .collect()
}

/// `2p_{αβ}(a) = Σ_{γ ∈ [α,β)} z_{γβ} ∏_{δ ∈ (α,γ]} a_δ`, coordinatewise, in
/// the component variables `a1, a2, …` of the tree-pair.
pub fn gluing_polynomial_2d(
    pc: &StablePlaneTree,
    alpha: usize,
    beta: usize,
) -> Result<(MultiPoly, MultiPoly)> {
    let tp = &pc.tp;
    if !tp.is_component(alpha) || matches!(tp.kind(beta), Kind::Seam) || alpha == beta {
        return Err(Error::Invalid(
            "expected a component and a component or mark below it".into(),
        ));
    }
    let steps = component_steps(tp, alpha, beta).ok_or_else(|| {
        Error::OutsideDomain(format!("vertex {beta} is not below component {alpha}"))
    })?;
    let names = component_names(tp);
    let (mut px, mut py) = (MultiPoly::zero(), MultiPoly::zero());
    let mut prod = MultiPoly::from_int(1);
    for (k, &(g, child)) in steps.iter().enumerate() {
        if k > 0 {
            prod = &prod * &MultiPoly::var(&names[&g]);
        }
        let (zx, zy) = pc.z_of(g, child).unwrap();
        px = &px + &prod.scale(zx);
        py = &py + &prod.scale(zy);
    }
    Ok((px, py))
}

/// A 0-dimensional tree-pair with its default slice: the seam carries its
/// default slice; a multi-line component (two lines, one point) has its
/// point at height 0; a single-line component (one line, two points) has its
/// points at heights 0 and 1 on the line `x = 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlicedTreePair {
    tp: TreePair,
    seam: SlicedTree,
}

impl SlicedTreePair {
    pub fn new(tp: TreePair) -> Result<SlicedTreePair> {
        let d = tp.dimension();
        if d != 0 {
            return Err(Error::NonzeroDimension(d));
        }
        let seam = SlicedTree::with_default_slice(tp.seam().clone())?;
        Ok(SlicedTreePair { tp, seam })
    }

    pub fn tree_pair(&self) -> &TreePair {
        &self.tp
    }

    /// Chart coordinate names: `a1, …` for non-root components, then the
    /// seam's `b1, …`.
    pub fn variables(&self) -> Vec<String> {
        coordinate_names(&self.tp)
    }

    /// The base configuration of the sliced tree-pair.
    pub fn base_config(&self) -> StablePlaneTree {
        let x = self
            .seam
            .base_positions(&BTreeMap::new())
            .expect("0-dimensional seam");
        let tp = &self.tp;
        let mut z = BTreeMap::new();
        for a in tp.components() {
            let lines: Vec<Vec<(Rat, Rat)>> = tp
                .vertex(a)
                .children
                .iter()
                .map(|&s| {
                    let lx = if tp.is_multi_line(a) {
                        let rho = tp.vertex(a).image;
                        if tp.vertex(s).image == self.seam.slice.s1[&rho] {
                            Rat::one()
                        } else {
                            Rat::zero()
                        }
                    } else {
                        Rat::zero()
                    };
                    (0..tp.vertex(s).children.len())
                        .map(|k| (lx.clone(), rat(k as i64)))
                        .collect()
                })
                .collect();
            z.insert(a, lines);
        }
        StablePlaneTree::new(tp.clone(), x, z).expect("base configuration is valid")
    }

    fn values(&self, assignment: &BTreeMap<String, Rat>) -> Result<Vec<Rat>> {
        let names = self.variables();
        if let Some(extra) = assignment.keys().find(|k| !names.contains(k)) {
            return Err(Error::Invalid(format!("unknown chart variable `{extra}`")));
        }
        names
            .iter()
            .map(|n| {
                assignment
                    .get(n)
                    .cloned()
                    .ok_or_else(|| Error::MissingVariable(n.clone()))
            })
            .collect()
    }
}

/// Evaluate the chart of a 0-dimensional sliced tree-pair at an assignment
/// of its component and seam coordinates. The products along each
/// coherence equation must agree exactly.
pub fn evaluate_chart_2d(
    stp: &SlicedTreePair,
    assignment: &BTreeMap<String, Rat>,
) -> Result<StablePlaneTree> {
    let tp = &stp.tp;
    let vals = stp.values(assignment)?;
    let names = stp.variables();
    for e in tp.coherence_equations() {
        let prod = |ix: &[usize]| ix.iter().fold(Rat::one(), |acc, &i| acc * &vals[i]);
        if prod(&e.lhs) != prod(&e.rhs) {
            let show = |ix: &[usize]| {
                ix.iter()
                    .map(|&i| names[i].clone())
                    .collect::<Vec<_>>()
                    .join("*")
            };
            return Err(Error::CoherenceViolation(format!(
                "{} != {}",
                show(&e.lhs),
                show(&e.rhs)
            )));
        }
    }
    let pattern: Vec<bool> = vals.iter().map(|v| !v.is_zero()).collect();
    let glued = tp.glue(&pattern)?;

    let b: BTreeMap<String, Rat> = stp
        .seam
        .variables()
        .into_iter()
        .map(|n| {
            let v = assignment[&n].clone();
            (n, v)
        })
        .collect();
    let seam_curve = evaluate_chart(&stp.seam, &ChartPoint::from_b(b))?;
    if seam_curve.tree() != glued.seam() {
        return Err(Error::OutsideDomain(
            "seam gluing disagrees with the tree-pair gluing".into(),
        ));
    }

    let base = stp.base_config();
    let seam = tp.seam();
    let a: BTreeMap<usize, Rat> = tp
        .non_root_components()
        .into_iter()
        .zip(vals.iter().cloned())
        .collect();
    let by_bracket: BTreeMap<(bool, TwoBracket), usize> = (0..tp.vertices().len())
        .filter(|&v| !matches!(tp.kind(v), Kind::Seam))
        .map(|v| ((tp.is_component(v), tp.two_bracket_of(v)), v))
        .collect();
    let lookup = |v2: usize| by_bracket[&(glued.is_component(v2), glued.two_bracket_of(v2))];

    let mut z = BTreeMap::new();
    for a2 in glued.components() {
        let alpha = lookup(a2);
        let lines: Vec<Vec<(Rat, Rat)>> = glued
            .vertex(a2)
            .children
            .iter()
            .map(|&s2| {
                glued
                    .vertex(s2)
                    .children
                    .iter()
                    .map(|&b2| {
                        let beta = lookup(b2);
                        let steps = component_steps(tp, alpha, beta)
                            .expect("glued point lies below its component");
                        let (mut px, mut py) = (Rat::zero(), Rat::zero());
                        let mut prod = Rat::one();
                        for (k, &(g, child)) in steps.iter().enumerate() {
                            if k > 0 {
                                prod *= &a[&g];
                            }
                            let (zx, zy) = base.z_of(g, child).unwrap();
                            px += &prod * zx;
                            py += &prod * zy;
                        }
                        (px, py)
                    })
                    .collect()
            })
            .collect();
        let lines = if glued.is_multi_line(a2) {
            // Express the component in the seam's frame: its lines must sit
            // at the seam positions. Scale and offset come from the first
            // multi-line component over the same seam vertex in the piece.
            let rho = seam
                .vertex_with_leaves(glued.seam().leaves(glued.vertex(a2).image))
                .unwrap();
            let gamma = (alpha..tp.vertices().len())
                .find(|&g| {
                    tp.is_multi_line(g)
                        && tp.vertex(g).image == rho
                        && (g == alpha || tp.component_ancestors(g).contains(&alpha))
                })
                .expect("a glued multi-line component covers a multi-line component");
            let (lambda, mu) = if gamma == alpha {
                (Rat::one(), Rat::zero())
            } else {
                let steps = component_steps(tp, alpha, gamma).unwrap();
                let mut prod = Rat::one();
                let mut mu = Rat::zero();
                for (k, &(g, child)) in steps.iter().enumerate() {
                    if k > 0 {
                        prod *= &a[&g];
                    }
                    mu += &prod * &base.z_of(g, child).unwrap().0;
                }
                (prod * &a[&gamma], mu)
            };
            lines
                .into_iter()
                .map(|pts: Vec<(Rat, Rat)>| {
                    pts.into_iter()
                        .map(|(x, y)| ((x - &mu) / &lambda, y / &lambda))
                        .collect()
                })
                .collect()
        } else {
            lines
        };
        z.insert(a2, lines);
    }
    StablePlaneTree::new(glued, seam_curve.positions, z)
}

/// The mark reached from a point-vertex by always taking the first point.
fn origin_mark(tp: &TreePair, beta: usize) -> Mark {
    let mut v = beta;
    loop {
        match tp.kind(v) {
            Kind::Mark(i, j) => return (i, j),
            _ => {
                v = tp
                    .vertex(v)
                    .children
                    .iter()
                    .flat_map(|&s| tp.vertex(s).children.first().copied())
                    .next()
                    .expect("component without points");
            }
        }
    }
}

/// Invert the chart of a 0-dimensional sliced tree-pair on the open
/// stratum: `pc` must be smooth and expressed in the chart's frame (as
/// produced by [`evaluate_chart_2d`]).
pub fn invert_chart_2d(
    stp: &SlicedTreePair,
    pc: &StablePlaneTree,
) -> Result<BTreeMap<String, Rat>> {
    let tp = &stp.tp;
    let top = TreePair::top(tp.n())?;
    if pc.tp != top {
        return Err(Error::OutsideDomain(
            "inversion is implemented on the open stratum".into(),
        ));
    }
    let seam_curve = StableCurve::new(pc.tp.seam().clone(), pc.x.clone())?;
    let seam_pt = invert_chart(&stp.seam, &seam_curve)?;
    let seam = &stp.seam.tree;
    let mut seam_prod: BTreeMap<usize, Rat> = BTreeMap::from([(0, Rat::one())]);
    for v in seam.non_root_interior() {
        let p = &seam_prod[&seam.parent(v).unwrap()] * &seam_pt.b[&seam.gluing_var(v)];
        seam_prod.insert(v, p);
    }
    let mut height: BTreeMap<Mark, Rat> = BTreeMap::new();
    for &s in &pc.tp.vertex(0).children {
        for (k, &m) in pc.tp.vertex(s).children.iter().enumerate() {
            if let Kind::Mark(i, j) = pc.tp.kind(m) {
                let li = pc
                    .tp
                    .vertex(0)
                    .children
                    .iter()
                    .position(|&u| u == s)
                    .unwrap();
                height.insert((i, j), pc.z[&0][li][k].1.clone());
            }
        }
    }
    let names = component_names(tp);
    let dy = |a: usize| {
        let pts = &tp.vertex(tp.vertex(a).children[0]).children;
        &height[&origin_mark(tp, pts[1])] - &height[&origin_mark(tp, pts[0])]
    };
    // Heights are given in the seam's frame; `unit` converts them back to
    // the frame of the root component.
    let unit = if tp.is_single_line(0) {
        let d = dy(0);
        if d.is_zero() {
            return Err(Error::OutsideDomain("coincident pinned points".into()));
        }
        d.recip()
    } else {
        Rat::one()
    };
    let mut prod: BTreeMap<usize, Rat> = BTreeMap::from([(0, Rat::one())]);
    let mut out: BTreeMap<String, Rat> = seam_pt.b.clone();
    for a in tp.non_root_components() {
        let p_a = if tp.is_multi_line(a) {
            &unit * &seam_prod[&tp.vertex(a).image]
        } else {
            &unit * &dy(a)
        };
        let parent = &prod[&tp.parent_component(a).unwrap()];
        if p_a.is_zero() {
            return Err(Error::OutsideDomain(format!(
                "coordinate {} would vanish",
                names[&a]
            )));
        }
        out.insert(names[&a].clone(), &p_a / parent);
        prod.insert(a, p_a);
    }
    let image = evaluate_chart_2d(stp, &out).map_err(|e| Error::OutsideDomain(format!("{e}")))?;
    if &image != pc {
        return Err(Error::OutsideDomain(
            "configuration is not in the image of the chart".into(),
        ));
    }
    Ok(out)
}

/// A random assignment of nonzero values satisfying the coherences exactly:
/// seam parameters are free, and a multi-line component below the seam root
/// takes the value forced by its seam parameter.
pub fn sample_coherent_point<R: Rng>(
    stp: &SlicedTreePair,
    rng: &mut R,
) -> Option<BTreeMap<String, Rat>> {
    let tp = &stp.tp;
    let seam = tp.seam();
    let names = component_names(tp);
    let mut out: BTreeMap<String, Rat> = BTreeMap::new();
    for v in seam.non_root_interior() {
        out.insert(seam.gluing_var(v), random_nonzero_rational(rng));
    }
    for a in tp.non_root_components() {
        let rho = tp.vertex(a).image;
        let val = if tp.is_multi_line(a) && rho != seam.root() {
            let beta = tp.first_multi_line_ancestor(a)?;
            let between = tp.component_path(a, beta);
            let rest = between[1..]
                .iter()
                .fold(Rat::one(), |acc, g| acc * &out[&names[g]]);
            &out[&seam.gluing_var(rho)] / rest
        } else {
            random_nonzero_rational(rng)
        };
        out.insert(names[&a].clone(), val);
    }
    evaluate_chart_2d(stp, &out).ok().map(|_| out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree_pairs::enumerate_tree_pairs;
    use crate::trees::enumerate_stable_trees;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(n: i64, d: i64) -> Rat {
        Rat::new(n.into(), d.into())
    }

    fn bmap(pairs: &[(&str, Rat)]) -> BTreeMap<String, Rat> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect()
    }

    fn open_point(st: &SlicedTree, rng: &mut ChaCha8Rng) -> ChartPoint {
        (0..100)
            .find_map(|_| sample_open_point(st, rng))
            .expect("domain is dense")
    }

    fn base(s: &str) -> (SlicedTree, StableCurve) {
        let st = SlicedTree::parse(s).unwrap();
        let c = st.base_curve(&BTreeMap::new()).unwrap();
        (st, c)
    }

    /// Independent oracle for positions on a smooth glued curve: walk the
    /// tree recursively, accumulating `offset + scale * x`.
    fn nested_positions(st: &SlicedTree, b: &BTreeMap<String, Rat>) -> Vec<Rat> {
        let t = &st.tree;
        let mut out = vec![Rat::zero(); t.r()];
        fn walk(
            t: &StableTree,
            st: &SlicedTree,
            b: &BTreeMap<String, Rat>,
            v: usize,
            off: Rat,
            scale: Rat,
            out: &mut Vec<Rat>,
        ) {
            if t.children(v).is_empty() {
                let i = *t.leaves(v).iter().next().unwrap();
                out[i - 1] = off;
                return;
            }
            let scale_here = if v == 0 {
                scale
            } else {
                scale * &b[&t.gluing_var(v)]
            };
            for &c in t.children(v) {
                let x = if c == st.slice.s1[&v] {
                    Rat::one()
                } else {
                    Rat::zero()
                };
                walk(t, st, b, c, &off + &scale_here * x, scale_here.clone(), out);
            }
        }
        walk(t, st, b, 0, Rat::zero(), Rat::one(), &mut out);
        out
    }

    #[test]
    fn gluing_polynomial_small_cases() {
        let (st, c) = base("[[1,2],3]");
        let t = &st.tree;
        // Child of the root: constant.
        let v12 = t.vertex_with_leaves(&LeafSet::from([1, 2])).unwrap();
        assert_eq!(
            gluing_polynomial(&c, 0, v12).unwrap(),
            MultiPoly::from_int(0)
        );
        assert_eq!(
            gluing_polynomial(&c, 0, t.leaf_vertex(3)).unwrap(),
            MultiPoly::from_int(1)
        );
        // Depth two: x_{root,[12]} + b1 * x_{[12],2} = 0 + b1.
        assert_eq!(
            gluing_polynomial(&c, 0, t.leaf_vertex(2)).unwrap(),
            MultiPoly::var("b1")
        );
        // Leaves outside the subtree sit at infinity.
        assert!(matches!(
            gluing_polynomial(&c, v12, t.leaf_vertex(3)),
            Err(Error::OutsideDomain(_))
        ));
        assert_eq!(c.x(v12, t.leaf_vertex(3)).unwrap(), Position::Infinity);
        assert!(c.x(v12, t.leaf_vertex(3)).unwrap().finite().is_err());
    }

    #[test]
    fn gluing_polynomial_two_level_chain() {
        // Screens with values (0, 1) at each level: p = x + b*x'.
        let (st, c) = base("[1,[2,[3,4]]]");
        let t = &st.tree;
        let p = gluing_polynomial(&c, 0, t.leaf_vertex(4)).unwrap();
        let expect = &(&MultiPoly::from_int(1) + &MultiPoly::var("b1"))
            + &(&MultiPoly::var("b1") * &MultiPoly::var("b2"));
        assert_eq!(p, expect);
        // The constant term is the first-step position.
        for leaf in 1..=4 {
            let lv = t.leaf_vertex(leaf);
            let first = t.child_toward(0, lv).unwrap();
            let k = t.children(0).iter().position(|&u| u == first).unwrap();
            assert_eq!(
                gluing_polynomial(&c, 0, lv).unwrap().constant_term(),
                c.positions(0)[k]
            );
        }
    }

    #[test]
    fn q_factor_content_and_constant_term() {
        let (st, c) = base("[[1,[2,3]],4]");
        // Leaves 1 and 4 separate at the root: content 1.
        let q14 = extract_q_factor(&c, 1, 4).unwrap();
        let p1 = gluing_polynomial(&c, 0, st.tree.leaf_vertex(1)).unwrap();
        let p4 = gluing_polynomial(&c, 0, st.tree.leaf_vertex(4)).unwrap();
        assert_eq!(q14, &p1 - &p4);
        // Leaves 2 and 3 sit below b1 and b2: the content b1*b2 is stripped.
        let q23 = extract_q_factor(&c, 2, 3).unwrap();
        assert_eq!(q23, MultiPoly::from_int(-1));
        // Leaves 1 and 2 separate at the vertex of b1.
        let q12 = extract_q_factor(&c, 1, 2).unwrap();
        assert_eq!(q12, MultiPoly::from_int(-1));
        // At b = 0, q_ij is the difference of the separating positions.
        for tree in enumerate_stable_trees(5)
            .into_iter()
            .filter(|t| t.dimension() == 0)
        {
            let st = SlicedTree::with_default_slice(tree).unwrap();
            for i in 1..=5 {
                for j in i + 1..=5 {
                    let qij = st.q_factor(&BTreeMap::new(), i, j).unwrap();
                    assert!(!qij.constant_term().is_zero(), "{} q{i}{j}", st.tree);
                }
            }
        }
    }

    #[test]
    fn chart_at_zero_is_the_base_curve() {
        for r in 3..=5 {
            for tree in enumerate_stable_trees(r) {
                let st = SlicedTree::with_default_slice(tree).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(r as u64);
                let mut pt = open_point(&st, &mut rng);
                for v in pt.b.values_mut() {
                    *v = Rat::zero();
                }
                for name in st.variables() {
                    pt.b.insert(name, Rat::zero());
                }
                let c = evaluate_chart(&st, &pt).unwrap();
                assert_eq!(c, st.base_curve(&pt.free).unwrap());
            }
        }
    }

    #[test]
    fn open_chart_matches_nested_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for tree in enumerate_stable_trees(6)
            .into_iter()
            .filter(|t| t.dimension() == 0)
        {
            let st = SlicedTree::with_default_slice(tree).unwrap();
            let pt = open_point(&st, &mut rng);
            let c = evaluate_chart(&st, &pt).unwrap();
            assert_eq!(c.root_tuple().unwrap(), nested_positions(&st, &pt.b));
        }
    }

    #[test]
    fn domain_violation_names_the_pair() {
        let st = SlicedTree::parse("[[1,[2,3]],4]").unwrap();
        // r = 1 puts leaf 4 (at 1) on top of leaf 2 (at r): q_{2,4} = b1 - 1.
        let pt = ChartPoint::from_b(bmap(&[("b1", q(1, 1)), ("b2", q(1, 3))]));
        assert_eq!(
            evaluate_chart(&st, &pt),
            Err(Error::DomainViolation { i: 2, j: 4 })
        );
    }

    #[test]
    fn normalize_examples() {
        let t = vec![q(2, 1), q(4, 1), q(6, 1)];
        assert_eq!(
            normalize_tuple(&t, 0, 1).unwrap(),
            vec![q(0, 1), q(1, 1), q(2, 1)]
        );
        let n = vec![q(0, 1), q(1, 1), q(-3, 7)];
        assert_eq!(normalize_tuple(&n, 0, 1).unwrap(), n);
        assert_eq!(
            normalize_tuple(&[q(1, 1), q(1, 1)], 0, 1),
            Err(Error::CoincidentPins)
        );
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(xs in proptest::collection::vec((-20i64..20, 1i64..6), 2..7), i0 in 0usize..7, i1 in 0usize..7) {
            let xs: Vec<Rat> = xs.into_iter().map(|(n, d)| q(n, d)).collect();
            let (i0, i1) = (i0 % xs.len(), i1 % xs.len());
            prop_assume!(xs[i0] != xs[i1]);
            let once = normalize_tuple(&xs, i0, i1).unwrap();
            prop_assert_eq!(&once[i0], &Rat::zero());
            prop_assert_eq!(&once[i1], &Rat::one());
            prop_assert_eq!(normalize_tuple(&once, i0, i1).unwrap(), once);
        }
    }

    #[test]
    fn four_point_transition_closed_form() {
        let (t1, t2) = four_point_example();
        let pt = ChartPoint::from_b(bmap(&[("b1", q(1, 2)), ("b2", q(1, 3))]));
        let img = transition(&t1, &t2, &pt).unwrap();
        assert_eq!(img.b, bmap(&[("b1", q(1, 1)), ("b2", q(1, 3))]));
        // Boundary s = 0.
        let pt = ChartPoint::from_b(bmap(&[("b1", q(2, 5)), ("b2", q(0, 1))]));
        let img = transition(&t1, &t2, &pt).unwrap();
        assert_eq!(img.b, bmap(&[("b1", q(3, 2)), ("b2", q(0, 1))]));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rep = four_point_closed_form_check(120, &mut rng).unwrap();
        assert!(rep.ok(), "{:?}", rep.failures);
        assert!(rep.checked >= 100, "{rep:?}");
    }

    #[test]
    fn identity_transition() {
        let (t1, _) = four_point_example();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let pt = open_point(&t1, &mut rng);
            assert_eq!(transition(&t1, &t1, &pt).unwrap(), pt);
        }
    }

    #[test]
    fn round_trip_all_zero_dimensional_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for r in 3..=5 {
            for tree in enumerate_stable_trees(r)
                .into_iter()
                .filter(|t| t.dimension() == 0)
            {
                let st = SlicedTree::with_default_slice(tree).unwrap();
                for _ in 0..50 {
                    let Some(pt) = sample_open_point(&st, &mut rng) else {
                        continue;
                    };
                    let c = evaluate_chart(&st, &pt).unwrap();
                    assert_eq!(invert_chart(&st, &c).unwrap(), pt);
                }
            }
        }
    }

    #[test]
    fn round_trip_with_free_positions_and_zeros() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for tree in enumerate_stable_trees(5) {
            let st = SlicedTree::with_default_slice(tree).unwrap();
            for k in 0..10 {
                let Some(mut pt) = sample_open_point(&st, &mut rng) else {
                    continue;
                };
                // Zero out a pattern of parameters.
                for (idx, v) in pt.b.values_mut().enumerate() {
                    if (k >> idx) & 1 == 1 {
                        *v = Rat::zero();
                    }
                }
                let Ok(c) = evaluate_chart(&st, &pt) else {
                    continue;
                };
                assert_eq!(invert_chart(&st, &c).unwrap(), pt, "{}", st.tree);
            }
        }
    }

    #[test]
    fn general_transitions_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let trees: Vec<SlicedTree> = enumerate_stable_trees(5)
            .into_iter()
            .filter(|t| t.dimension() == 0)
            .map(|t| SlicedTree::with_default_slice(t).unwrap())
            .collect();
        for t1 in trees.iter().step_by(7) {
            for t2 in trees.iter().step_by(5) {
                let rep = transition_check(t1, t2, 10, &mut rng).unwrap();
                assert!(rep.ok(), "{:?}", rep.failures);
                assert!(rep.checked > 0);
            }
        }
    }

    /// Positions on each surviving screen agree with the chart of the piece
    /// of the tree cut out by that screen and its glued children.
    #[test]
    fn glued_screens_match_cut_pieces() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for tree in enumerate_stable_trees(5)
            .into_iter()
            .filter(|t| t.dimension() == 0)
        {
            let st = SlicedTree::with_default_slice(tree).unwrap();
            let t = &st.tree;
            let Some(mut pt) = sample_open_point(&st, &mut rng) else {
                continue;
            };
            let nri = t.non_root_interior();
            if let Some(&v) = nri.first() {
                pt.b.insert(t.gluing_var(v), Rat::zero());
            }
            let Ok(c) = evaluate_chart(&st, &pt) else {
                continue;
            };
            for (&rho2, xs) in c.all_positions() {
                let rho = t.vertex_with_leaves(c.tree().leaves(rho2)).unwrap();
                // Recompute each position by walking the piece directly.
                for (k, &s2) in c.tree().children(rho2).iter().enumerate() {
                    let sigma = t.vertex_with_leaves(c.tree().leaves(s2)).unwrap();
                    let path = t.path_down(rho, sigma).unwrap();
                    let mut acc = Rat::zero();
                    let mut scale = Rat::one();
                    for w in path.windows(2) {
                        if w[0] != rho {
                            scale *= &pt.b[&t.gluing_var(w[0])];
                        }
                        if w[1] == st.slice.s1[&w[0]] {
                            acc += &scale;
                        }
                    }
                    assert_eq!(acc, xs[k]);
                }
            }
        }
    }

    #[test]
    fn curve_json_round_trip() {
        let (t1, _) = four_point_example();
        let pt = ChartPoint::from_b(bmap(&[("b1", q(2, 5)), ("b2", q(0, 1))]));
        let c = evaluate_chart(&t1, &pt).unwrap();
        assert_eq!(StableCurve::from_json(&c.to_json()).unwrap(), c);
    }

    /// All 0-dimensional tree-pairs of types with `|n| + r <= max`.
    fn zero_dim_pairs(max: usize) -> Vec<TreePair> {
        fn vectors(r: usize, budget: usize) -> Vec<Vec<usize>> {
            if r == 0 {
                return vec![vec![]];
            }
            (0..=budget)
                .flat_map(|k| {
                    vectors(r - 1, budget - k).into_iter().map(move |mut v| {
                        v.push(k);
                        v
                    })
                })
                .collect()
        }
        let mut out = Vec::new();
        for r in 1..max {
            for n in vectors(r, max - r) {
                if n.iter().any(|&k| k > 0) && !(r == 1 && n[0] < 2) {
                    out.extend(
                        enumerate_tree_pairs(&n)
                            .unwrap()
                            .into_iter()
                            .filter(|t| t.dimension() == 0),
                    );
                }
            }
        }
        out
    }

    #[test]
    fn plane_chart_at_base_and_polynomials() {
        for tp in zero_dim_pairs(5) {
            let stp = SlicedTreePair::new(tp.clone()).unwrap();
            let base = stp.base_config();
            // All coordinates zero: the base configuration itself.
            let zeros: BTreeMap<String, Rat> = stp
                .variables()
                .into_iter()
                .map(|n| (n, Rat::zero()))
                .collect();
            assert_eq!(evaluate_chart_2d(&stp, &zeros).unwrap(), base);
            // A child point: the constant z_{αβ}; all a = 1: plain sums.
            let ones: BTreeMap<String, Rat> = stp
                .variables()
                .into_iter()
                .map(|n| (n, Rat::one()))
                .collect();
            for beta in 1..tp.vertices().len() {
                if matches!(tp.kind(beta), Kind::Seam) {
                    continue;
                }
                let alpha = tp.parent_component(beta).unwrap();
                let (px, py) = gluing_polynomial_2d(&base, alpha, beta).unwrap();
                let (zx, zy) = base.z_of(alpha, beta).unwrap();
                assert_eq!(
                    (px.constant_term(), py.constant_term()),
                    (zx.clone(), zy.clone())
                );
                assert!(px.variables().is_empty() && py.variables().is_empty());
                let (px, py) = gluing_polynomial_2d(&base, 0, beta).unwrap();
                let steps = component_steps(&tp, 0, beta).unwrap();
                let sx: Rat = steps
                    .iter()
                    .map(|&(g, c)| base.z_of(g, c).unwrap().0.clone())
                    .sum();
                let sy: Rat = steps
                    .iter()
                    .map(|&(g, c)| base.z_of(g, c).unwrap().1.clone())
                    .sum();
                assert_eq!(px.eval(&ones).unwrap(), sx);
                assert_eq!(py.eval(&ones).unwrap(), sy);
            }
        }
    }

    #[test]
    fn plane_chart_round_trip_on_open_stratum() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut checked = 0;
        for tp in zero_dim_pairs(5) {
            let stp = SlicedTreePair::new(tp.clone()).unwrap();
            for _ in 0..20 {
                let Some(pt) = sample_coherent_point(&stp, &mut rng) else {
                    continue;
                };
                let pc = evaluate_chart_2d(&stp, &pt).unwrap();
                assert_eq!(pc.tree_pair(), &TreePair::top(tp.n()).unwrap());
                assert_eq!(invert_chart_2d(&stp, &pc).unwrap(), pt, "{}", tp.to_json());
                checked += 1;
            }
        }
        assert!(checked > 100, "{checked}");
    }

    #[test]
    fn plane_chart_strata_follow_gluing() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut hits = 0;
        for tp in zero_dim_pairs(5) {
            let stp = SlicedTreePair::new(tp.clone()).unwrap();
            let names = stp.variables();
            for pattern in tp.local_poset_elements() {
                let Some(mut pt) = sample_coherent_point(&stp, &mut rng) else {
                    continue;
                };
                for (n, &p) in names.iter().zip(&pattern) {
                    if !p {
                        pt.insert(n.clone(), Rat::zero());
                    }
                }
                if let Ok(pc) = evaluate_chart_2d(&stp, &pt) {
                    assert_eq!(pc.tree_pair(), &tp.glue(&pattern).unwrap());
                    hits += 1;
                }
            }
        }
        assert!(hits > 0);
    }
}
