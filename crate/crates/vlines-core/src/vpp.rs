//! Virtual Poincaré polynomials of the complexified spaces, of the seam
//! spaces, and of fiber products over the seam space, computed by a
//! memoized recursion over root data, together with an independent
//! stratum-sum oracle over enumerated tree-pairs.
//!
//! Recursion. For `r >= 2` the root of the seam tree splits the lines into
//! a partition `P` with at least two parts. Over the root seam vertex, each
//! factor carries a stable tree of single-line components whose leaves are
//! multi-line components (a single leaf means the factor's root component
//! is itself multi-line). The single-line trees over `m` leaves contribute
//! `p_m`; each multi-line component contributes its heights factor and
//! splits into one sub-block per nonempty set of points over a part; the
//! sub-blocks over a part form the fiber product recursed into.

use std::collections::{BTreeSet, HashMap};
use std::sync::RwLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact_poly::{config_poly, quotient_config_poly, UniPoly};
pub use crate::tree_pairs::FiberSpec;
use crate::tree_pairs::{enumerate_tree_pairs, TreePair};
use crate::trees::{set_partitions, LeafSet};

/// A point `(line, index)` of one factor.
pub type Point = (usize, usize);

/// The root type of a stratum of a fiber product with `r >= 2`: the
/// partition `parts` of the lines at the root seam vertex; for every factor
/// the partition of its points into multi-line components over the root
/// seam vertex; and for each such component and part, the partition of its
/// points over that part into sub-blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootDatum {
    pub parts: Vec<LeafSet>,
    /// `blocks[i]`: multi-line components of factor `i`.
    pub blocks: Vec<Vec<BTreeSet<Point>>>,
    /// `sub_blocks[i][b][p]`: partition of block `b` of factor `i` over part `p`.
    pub sub_blocks: Vec<Vec<Vec<Vec<BTreeSet<Point>>>>>,
}

impl RootDatum {
    /// Sub-specs, one per part: `(#p, count vectors of all sub-blocks over p)`.
    pub fn sub_specs(&self) -> Vec<(usize, Vec<Vec<usize>>)> {
        self.parts
            .iter()
            .enumerate()
            .map(|(pi, p)| {
                let lines: Vec<usize> = p.iter().copied().collect();
                let factors = self
                    .sub_blocks
                    .iter()
                    .flatten()
                    .flat_map(|per_part| per_part[pi].iter())
                    .map(|b| count_vector(b, &lines))
                    .collect();
                (lines.len(), factors)
            })
            .collect()
    }

    /// The polynomial of the root level: the line configuration, the
    /// single-line trees and the heights of the multi-line components.
    pub fn weight(&self) -> UniPoly {
        let mut w = quotient_config_poly(self.parts.len());
        for (bs, subs) in self.blocks.iter().zip(&self.sub_blocks) {
            w = w * vpp_seam(bs.len());
            for per_part in subs {
                w = w * heights_factor(per_part.iter().map(|q| q.len()));
            }
        }
        w
    }
}

/// `(1/x^2) ∏_p F_{k_p}(C)`: heights of a multi-line component with `k_p`
/// incoming edges on line-group `p`, modulo vertical translation.
fn heights_factor(counts: impl Iterator<Item = usize>) -> UniPoly {
    counts
        .map(|k| config_poly(k, 0))
        .product::<UniPoly>()
        .div_x2()
        .expect("a multi-line component has at least one incoming edge")
}

fn count_vector(b: &BTreeSet<Point>, lines: &[usize]) -> Vec<usize> {
    lines
        .iter()
        .map(|&j| b.iter().filter(|(l, _)| *l == j).count())
        .collect()
}

fn points_of(factor: &[usize], lines: &LeafSet) -> Vec<Point> {
    lines
        .iter()
        .flat_map(|&j| (1..=factor[j - 1]).map(move |k| (j, k)))
        .collect()
}

fn partitions_of(points: &[Point]) -> Vec<Vec<BTreeSet<Point>>> {
    if points.is_empty() {
        return vec![Vec::new()];
    }
    set_partitions(points)
        .into_iter()
        .map(|q| q.into_iter().map(|b| b.into_iter().collect()).collect())
        .collect()
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

fn line_partitions(r: usize) -> Vec<Vec<LeafSet>> {
    let lines: Vec<usize> = (1..=r).collect();
    set_partitions(&lines)
        .into_iter()
        .filter(|q| q.len() >= 2)
        .map(|q| q.into_iter().map(|p| p.into_iter().collect()).collect())
        .collect()
}

/// Every root datum of `spec` (which must have `r >= 2`), each exactly once.
/// For `r = 1` there are none: the base is a point and the factors are
/// independent.
pub fn enumerate_stable_root_data(spec: &FiberSpec) -> Vec<RootDatum> {
    if spec.r < 2 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for parts in line_partitions(spec.r) {
        // Per factor: (blocks, per-block per-part sub-partitions).
        type FactorChoice = (Vec<BTreeSet<Point>>, Vec<Vec<Vec<BTreeSet<Point>>>>);
        let per_factor: Vec<Vec<FactorChoice>> = spec
            .factors
            .iter()
            .map(|f| {
                let all: LeafSet = (1..=spec.r).collect();
                let mut opts = Vec::new();
                for q in partitions_of(&points_of(f, &all)) {
                    let per_block: Vec<Vec<Vec<Vec<BTreeSet<Point>>>>> = q
                        .iter()
                        .map(|b| {
                            let per_part: Vec<Vec<Vec<BTreeSet<Point>>>> = parts
                                .iter()
                                .map(|p| {
                                    let pts: Vec<Point> =
                                        b.iter().filter(|(j, _)| p.contains(j)).copied().collect();
                                    partitions_of(&pts)
                                })
                                .collect();
                            cartesian(&per_part)
                        })
                        .collect();
                    for subs in cartesian(&per_block) {
                        opts.push((q.clone(), subs));
                    }
                }
                opts
            })
            .collect();
        for pick in cartesian(&per_factor) {
            let (blocks, sub_blocks) = pick.into_iter().unzip();
            out.push(RootDatum {
                parts: parts.clone(),
                blocks,
                sub_blocks,
            });
        }
    }
    out
}

/// Memo table keyed by canonical fiber specs.
#[derive(Debug, Default)]
pub struct MemoTable {
    map: RwLock<HashMap<FiberSpec, UniPoly>>,
}

impl MemoTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, k: &FiberSpec) -> Option<UniPoly> {
        self.map.read().unwrap().get(k).cloned()
    }

    /// Insert; a duplicate insert must carry the same value.
    pub fn insert(&self, k: FiberSpec, v: UniPoly) {
        let mut m = self.map.write().unwrap();
        if let Some(old) = m.get(&k) {
            assert_eq!(old, &v, "memo table received two values for {k:?}");
        } else {
            m.insert(k, v);
        }
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn is_basis(f: &[usize]) -> bool {
    f.iter().sum::<usize>() == 1
}

/// Canonical form: drop one-point factors (each is a copy of the base),
/// then sort the factors.
pub fn canonical_spec(spec: &FiberSpec) -> FiberSpec {
    let mut factors: Vec<Vec<usize>> = spec
        .factors
        .iter()
        .filter(|f| !is_basis(f))
        .cloned()
        .collect();
    factors.sort();
    FiberSpec { r: spec.r, factors }
}

fn measure(spec: &FiberSpec) -> (usize, usize) {
    (
        spec.r,
        spec.factors
            .iter()
            .map(|f| f.iter().sum::<usize>() - 1)
            .sum(),
    )
}

/// `p_r`, the polynomial of the seam space on `r` lines.
pub fn vpp_seam(r: usize) -> UniPoly {
    assert!(r >= 1, "r must be positive");
    let mut p = vec![UniPoly::one(); r.max(2) + 1];
    for m in 3..=r {
        let lines: Vec<usize> = (0..m).collect();
        p[m] = set_partitions(&lines)
            .into_iter()
            .filter(|q| q.len() >= 2)
            .map(|q| {
                let inner: UniPoly = q.iter().map(|b| p[b.len()].clone()).product();
                quotient_config_poly(q.len()) * inner
            })
            .sum();
    }
    p[r].clone()
}

/// Per-part lists of sub-block count vectors (each list sorted), with the
/// accumulated root-level weight.
type Aggregate = HashMap<Vec<Vec<Vec<usize>>>, UniPoly>;

fn add_into(acc: &mut Aggregate, key: Vec<Vec<Vec<usize>>>, w: UniPoly) {
    let e = acc.entry(key).or_insert_with(UniPoly::zero);
    *e = &*e + &w;
}

/// Combine two aggregates: concatenate per-part lists, multiply weights.
fn combine(a: &Aggregate, b: &Aggregate) -> Aggregate {
    let mut out = Aggregate::new();
    for (ka, wa) in a {
        for (kb, wb) in b {
            let key: Vec<Vec<Vec<usize>>> = ka
                .iter()
                .zip(kb)
                .map(|(x, y)| {
                    let mut v: Vec<Vec<usize>> = x.iter().chain(y).cloned().collect();
                    v.sort();
                    v
                })
                .collect();
            add_into(&mut out, key, wa * wb);
        }
    }
    out
}

/// Aggregated root data over a fixed line partition: every datum is
/// reduced to its root weight and its per-part sub-specs.
fn aggregate_root_data(spec: &FiberSpec, parts: &[LeafSet]) -> Aggregate {
    let part_lines: Vec<Vec<usize>> = parts.iter().map(|p| p.iter().copied().collect()).collect();
    let empty_key = vec![Vec::new(); parts.len()];
    let mut block_cache: HashMap<Vec<usize>, Aggregate> = HashMap::new();
    let mut total = Aggregate::from([(empty_key.clone(), quotient_config_poly(parts.len()))]);
    let all: LeafSet = (1..=spec.r).collect();
    for f in &spec.factors {
        let mut per_factor = Aggregate::new();
        for q in partitions_of(&points_of(f, &all)) {
            let mut acc = Aggregate::from([(empty_key.clone(), vpp_seam(q.len()))]);
            for b in &q {
                let cv = count_vector(b, &(1..=spec.r).collect::<Vec<_>>());
                let opts = block_cache.entry(cv).or_insert_with(|| {
                    // Sub-partitions of one multi-line block over each part.
                    let per_part: Vec<Vec<Vec<BTreeSet<Point>>>> = parts
                        .iter()
                        .map(|p| {
                            let pts: Vec<Point> =
                                b.iter().filter(|(j, _)| p.contains(j)).copied().collect();
                            partitions_of(&pts)
                        })
                        .collect();
                    let mut o = Aggregate::new();
                    for pick in cartesian(&per_part) {
                        let w = heights_factor(pick.iter().map(|s| s.len()));
                        let key = pick
                            .iter()
                            .zip(&part_lines)
                            .map(|(s, lines)| {
                                let mut v: Vec<Vec<usize>> =
                                    s.iter().map(|sb| count_vector(sb, lines)).collect();
                                v.sort();
                                v
                            })
                            .collect();
                        add_into(&mut o, key, w);
                    }
                    o
                });
                acc = combine(&acc, opts);
            }
            for (k, w) in acc {
                add_into(&mut per_factor, k, w);
            }
        }
        total = combine(&total, &per_factor);
    }
    total
}

/// Polynomial of the fiber product described by `spec`.
pub fn vpp_fiber_product(spec: &FiberSpec, memo: Option<&MemoTable>) -> UniPoly {
    let key = canonical_spec(spec);
    if key.factors.is_empty() {
        return vpp_seam(key.r);
    }
    if key.r == 1 {
        return key.factors.iter().map(|f| vpp_seam(f[0])).product();
    }
    if let Some(m) = memo {
        if let Some(v) = m.get(&key) {
            return v;
        }
    }
    let here = measure(&key);
    let mut total = UniPoly::zero();
    for parts in line_partitions(key.r) {
        for (subs, w) in aggregate_root_data(&key, &parts) {
            let mut term = w;
            for (p, factors) in parts.iter().zip(subs) {
                let s = FiberSpec {
                    r: p.len(),
                    factors,
                };
                let c = canonical_spec(&s);
                assert!(
                    c.factors.is_empty() || measure(&c) < here,
                    "recursion measure did not decrease"
                );
                term = term * vpp_fiber_product(&c, memo);
            }
            total = total + term;
        }
    }
    if let Some(m) = memo {
        m.insert(key, total.clone());
    }
    total
}

/// The same polynomial summed over explicitly enumerated root data
/// (slow; for cross-checking the aggregated recursion).
pub fn vpp_fiber_product_by_data(spec: &FiberSpec) -> UniPoly {
    let key = canonical_spec(spec);
    if key.factors.is_empty() {
        return vpp_seam(key.r);
    }
    if key.r == 1 {
        return key.factors.iter().map(|f| vpp_seam(f[0])).product();
    }
    enumerate_stable_root_data(&key)
        .iter()
        .map(|d| {
            let sub: UniPoly = d
                .sub_specs()
                .into_iter()
                .map(|(r, factors)| vpp_fiber_product_by_data(&FiberSpec { r, factors }))
                .product();
            d.weight() * sub
        })
        .sum()
}

/// Polynomial of the compactified space of type `n`.
pub fn vpp(n: &[usize]) -> Result<UniPoly> {
    vpp_with(n, &MemoTable::new())
}

pub fn vpp_with(n: &[usize], memo: &MemoTable) -> Result<UniPoly> {
    if n.is_empty() || n.iter().all(|&k| k == 0) {
        return Err(Error::ZeroVector);
    }
    if n.len() == 1 && n[0] < 2 {
        return Err(Error::Invalid(format!("type ({}) is unstable", n[0])));
    }
    let spec = FiberSpec::new(n.len(), vec![n.to_vec()])?;
    if n.len() == 1 {
        return Ok(vpp_seam(n[0]));
    }
    Ok(vpp_fiber_product(&spec, Some(memo)))
}

/// Open-stratum polynomial of one tree-pair.
pub fn stratum_vpp(tp: &TreePair) -> UniPoly {
    let seam = tp.seam();
    let mut out: UniPoly = seam
        .interior()
        .into_iter()
        .map(|v| quotient_config_poly(seam.children(v).len()))
        .product();
    for c in tp.components() {
        let seams = &tp.vertex(c).children;
        if seams.len() >= 2 {
            let prod: UniPoly = seams
                .iter()
                .map(|&s| config_poly(tp.vertex(s).children.len(), 0))
                .product();
            out = out * prod.div_x2().expect("stable multi-line component");
        } else {
            out = out * quotient_config_poly(tp.vertex(seams[0]).children.len());
        }
    }
    out
}

/// Independent oracle: the sum of open-stratum polynomials over all strata.
pub fn vpp_by_strata(n: &[usize]) -> Result<UniPoly> {
    Ok(enumerate_tree_pairs(n)?.iter().map(stratum_vpp).sum())
}

/// All types `n` of dimension `d` up to permutation of entries, sorted as
/// non-decreasing tuples.
pub fn types_of_dimension(d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    // r = 1: |n| = d + 2
    out.push(vec![d + 2]);
    // r >= 2: |n| + r = d + 3, |n| >= 1
    for r in 2..=d + 2 {
        let total = d + 3 - r;
        fn nondecreasing(len: usize, total: usize, min: usize) -> Vec<Vec<usize>> {
            if len == 0 {
                return if total == 0 {
                    vec![Vec::new()]
                } else {
                    Vec::new()
                };
            }
            (min..=total)
                .flat_map(|a| {
                    nondecreasing(len - 1, total - a, a)
                        .into_iter()
                        .map(move |mut v| {
                            v.insert(0, a);
                            v
                        })
                })
                .collect()
        }
        out.extend(nondecreasing(r, total, 0));
    }
    out
}

/// One table row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableRow {
    pub dim: usize,
    pub n: Vec<usize>,
    pub poly: UniPoly,
}

/// Rows for every type of each requested dimension, computed in parallel.
pub fn vpp_table(dims: &[usize]) -> Result<Vec<TableRow>> {
    let memo = MemoTable::new();
    let jobs: Vec<(usize, Vec<usize>)> = dims
        .iter()
        .flat_map(|&d| types_of_dimension(d).into_iter().map(move |n| (d, n)))
        .collect();
    jobs.par_iter()
        .map(|(d, n)| {
            Ok(TableRow {
                dim: *d,
                n: n.clone(),
                poly: vpp_with(n, &memo)?,
            })
        })
        .collect()
}

/// Check the shape invariants; returns a description of any violation.
pub fn shape_violation(n: &[usize], p: &UniPoly) -> Option<String> {
    let r = n.len();
    let s: usize = n.iter().sum();
    let d = if r == 1 { s - 2 } else { s + r - 3 };
    if p.degree() != Some(2 * d) {
        return Some(format!("degree {:?} != {}", p.degree(), 2 * d));
    }
    let one = num_bigint::BigInt::from(1);
    if p.coeff(0) != one || p.coeff(2 * d) != one {
        return Some("leading or constant coefficient is not 1".into());
    }
    if p.coeffs()
        .iter()
        .any(|c| c.sign() == num_bigint::Sign::Minus)
    {
        return Some("negative coefficient".into());
    }
    None
}
