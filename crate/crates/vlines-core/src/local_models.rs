//! Toric local models `Z^N_{>=0} / L`: coherence lattices of tree-pairs,
//! canonical generators, saturation (reducedness) and monoid normality via
//! integer difference-constraint systems.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::tree_pairs::{Coord, TreePair};

/// A lattice `L ⊆ Z^N` given by generators, with coordinate names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeModel {
    pub n: usize,
    pub coord_names: Vec<String>,
    pub generators: Vec<Vec<i64>>,
}

impl LatticeModel {
    pub fn new(coord_names: Vec<String>, generators: Vec<Vec<i64>>) -> Result<Self> {
        let n = coord_names.len();
        if let Some(g) = generators.iter().find(|g| g.len() != n) {
            return Err(Error::Mismatch(format!(
                "generator of length {} in ambient rank {n}",
                g.len()
            )));
        }
        Ok(LatticeModel {
            n,
            coord_names,
            generators,
        })
    }

    pub fn with_names(mut self, names: &[&str]) -> Result<Self> {
        if names.len() != self.n {
            return Err(Error::Mismatch(format!(
                "{} names for {} coordinates",
                names.len(),
                self.n
            )));
        }
        self.coord_names = names.iter().map(|s| s.to_string()).collect();
        Ok(self)
    }

    /// Rank of the lattice.
    pub fn rank(&self) -> usize {
        hermite_normal_form(&self.generators, self.n).len()
    }

    /// Dimension of the model: `N - rank(L)`.
    pub fn model_dimension(&self) -> usize {
        self.n - self.rank()
    }
}

/// Names of the gluing coordinates: `a1, a2, ...` for non-root components
/// (breadth-first), then the seam gluing variables `b1, b2, ...`.
pub fn coordinate_names(tp: &TreePair) -> Vec<String> {
    let mut k = 0;
    tp.gluing_coordinates()
        .into_iter()
        .map(|c| match c {
            Coord::A(_) => {
                k += 1;
                format!("a{k}")
            }
            Coord::B(s) => tp.seam().gluing_var(s),
        })
        .collect()
}

fn coord_index(tp: &TreePair) -> BTreeMap<Coord, usize> {
    tp.gluing_coordinates()
        .into_iter()
        .enumerate()
        .map(|(i, c)| (c, i))
        .collect()
}

/// `Σ_{γ ∈ [α, β)} e_{a_γ}` as an integer vector.
fn path_vector(tp: &TreePair, idx: &BTreeMap<Coord, usize>, alpha: usize, beta: usize) -> Vec<i64> {
    let mut v = vec![0i64; idx.len()];
    for g in tp.component_path(alpha, beta) {
        v[idx[&Coord::A(g)]] += 1;
    }
    v
}

fn sub(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Multi-line components grouped by the seam vertex they lie over, each
/// fiber in left-to-right (preorder) order.
fn fibers(tp: &TreePair) -> BTreeMap<usize, Vec<usize>> {
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in tp.preorder() {
        if tp.is_multi_line(v) {
            out.entry(tp.vertex(v).image).or_default().push(v);
        }
    }
    out
}

fn second_kind(tp: &TreePair, idx: &BTreeMap<Coord, usize>, alpha: usize) -> Vec<i64> {
    let rho = tp.vertex(alpha).image;
    let beta = tp
        .first_multi_line_ancestor(alpha)
        .expect("multi-line component over a non-root seam vertex");
    let mut v = vec![0i64; idx.len()];
    v[idx[&Coord::B(rho)]] = 1;
    sub(&v, &path_vector(tp, idx, alpha, beta))
}

/// The coherence lattice: path differences between multi-line components
/// over the same seam vertex (measured to their lowest common component
/// ancestor; higher common ancestors give the same vectors), and
/// `b_ρ - Σ_{[α, β_α)} a` for multi-line `α` over a non-root `ρ`.
///
/// Defined for tree-pairs of any dimension.
pub fn coherence_generators(tp: &TreePair) -> LatticeModel {
    let idx = coord_index(tp);
    let mut gens = Vec::new();
    for (rho, fiber) in fibers(tp) {
        for (x, &a1) in fiber.iter().enumerate() {
            for &a2 in &fiber[x + 1..] {
                let beta = tp.common_component_ancestor(a1, a2);
                gens.push(sub(
                    &path_vector(tp, &idx, a1, beta),
                    &path_vector(tp, &idx, a2, beta),
                ));
            }
        }
        if rho != tp.seam().root() {
            for &a in &fiber {
                gens.push(second_kind(tp, &idx, a));
            }
        }
    }
    gens.retain(|g| g.iter().any(|&c| c != 0));
    LatticeModel {
        n: idx.len(),
        coord_names: coordinate_names(tp),
        generators: gens,
    }
}

/// The coherences with `β` restricted to single-line common ancestors over
/// the same seam vertex, plus the seam-variable family.
pub fn tilde_coherence_generators(tp: &TreePair) -> LatticeModel {
    let idx = coord_index(tp);
    let mut gens = Vec::new();
    for (rho, fiber) in fibers(tp) {
        for (x, &a1) in fiber.iter().enumerate() {
            for &a2 in &fiber[x + 1..] {
                let anc2: Vec<usize> = tp.component_ancestors(a2);
                for beta in tp.component_ancestors(a1) {
                    if tp.is_single_line(beta)
                        && tp.vertex(beta).image == rho
                        && anc2.contains(&beta)
                    {
                        gens.push(sub(
                            &path_vector(tp, &idx, a1, beta),
                            &path_vector(tp, &idx, a2, beta),
                        ));
                    }
                }
            }
        }
        if rho != tp.seam().root() {
            for &a in &fiber {
                gens.push(second_kind(tp, &idx, a));
            }
        }
    }
    gens.retain(|g| g.iter().any(|&c| c != 0));
    LatticeModel {
        n: idx.len(),
        coord_names: coordinate_names(tp),
        generators: gens,
    }
}

/// Canonical generators: walking the multi-line components in
/// left-to-right order, each one except the last over the root seam vertex
/// contributes one vector. If a later component `α'` lies over the same
/// seam vertex, the vector is `Σ_{[α',β')} a − Σ_{[α,β)} a`, where `β, β'`
/// are the first multi-line ancestors of `α, α'` when these differ, and
/// otherwise both equal the lowest common component ancestor. If `α` is
/// last over its seam vertex `ρ`, the vector is `b_ρ − Σ_{[α,β_α)} a`.
pub fn canonical_generators(tp: &TreePair) -> Vec<Vec<i64>> {
    let idx = coord_index(tp);
    let fib = fibers(tp);
    let mut out = Vec::new();
    for alpha in tp.preorder() {
        if !tp.is_multi_line(alpha) {
            continue;
        }
        let rho = tp.vertex(alpha).image;
        let fiber = &fib[&rho];
        let pos = fiber.iter().position(|&a| a == alpha).unwrap();
        if let Some(&next) = fiber.get(pos + 1) {
            let g = tp.first_multi_line_ancestor(alpha);
            let g2 = tp.first_multi_line_ancestor(next);
            let (beta, beta2) = if g == g2 {
                let b = tp.common_component_ancestor(alpha, next);
                (b, b)
            } else {
                (g.unwrap(), g2.unwrap())
            };
            out.push(sub(
                &path_vector(tp, &idx, next, beta2),
                &path_vector(tp, &idx, alpha, beta),
            ));
        } else if rho != tp.seam().root() {
            out.push(second_kind(tp, &idx, alpha));
        }
    }
    out
}

/// The canonical-generator model of a tree-pair.
pub fn canonical_model(tp: &TreePair) -> LatticeModel {
    LatticeModel {
        n: tp.gluing_coordinates().len(),
        coord_names: coordinate_names(tp),
        generators: canonical_generators(tp),
    }
}

/// Which generators hit a coordinate, with signs.
fn incidences(gens: &[Vec<i64>], n: usize) -> Vec<Vec<(usize, i64)>> {
    let mut out = vec![Vec::new(); n];
    for (s, g) in gens.iter().enumerate() {
        for (c, &e) in g.iter().enumerate() {
            if e != 0 {
                out[c].push((s, e));
            }
        }
    }
    out
}

/// Check the incidence pattern of canonical generators: entries in
/// `{-1,0,1}`; every `a`-coordinate is hit at most twice, and when twice
/// then `+1` in the earlier generator and `-1` in the later one; every
/// `b`-coordinate is hit at most once.
pub fn check_incidence_pattern(m: &LatticeModel, num_a: usize) -> Result<()> {
    for (c, hits) in incidences(&m.generators, m.n).into_iter().enumerate() {
        let name = &m.coord_names[c];
        if hits.iter().any(|&(_, e)| e.abs() != 1) {
            return Err(Error::StructuralAssumption(format!(
                "{name}: entry outside {{-1,0,1}}"
            )));
        }
        let limit = if c < num_a { 2 } else { 1 };
        if hits.len() > limit {
            return Err(Error::StructuralAssumption(format!(
                "{name} is hit by {} generators",
                hits.len()
            )));
        }
        if hits.len() == 2 && !(hits[0].1 == 1 && hits[1].1 == -1) {
            return Err(Error::StructuralAssumption(format!(
                "{name}: signs are not +1 then -1 in generator order"
            )));
        }
    }
    Ok(())
}

// ----------------------------------------------------------------------
// Integer lattices
// ----------------------------------------------------------------------

fn to_big(rows: &[Vec<i64>]) -> Vec<Vec<BigInt>> {
    rows.iter()
        .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
        .collect()
}

/// Row-style Hermite normal form of the integer span of `rows` (nonzero
/// rows only): pivots positive, entries above each pivot reduced into
/// `[0, pivot)`.
pub fn hermite_normal_form(rows: &[Vec<i64>], n: usize) -> Vec<Vec<BigInt>> {
    let mut m = to_big(rows);
    let mut r = 0;
    for c in 0..n {
        // Euclid down column c among rows r..
        loop {
            let nz: Vec<usize> = (r..m.len()).filter(|&i| !m[i][c].is_zero()).collect();
            if nz.is_empty() {
                break;
            }
            let p = *nz.iter().min_by_key(|&&i| m[i][c].abs()).unwrap();
            m.swap(r, p);
            if m[r][c].is_negative() {
                for x in m[r].iter_mut() {
                    *x = -&*x;
                }
            }
            let mut done = true;
            for i in r + 1..m.len() {
                if m[i][c].is_zero() {
                    continue;
                }
                let q = m[i][c].div_floor(&m[r][c]);
                let pivot_row = m[r].clone();
                for (x, y) in m[i].iter_mut().zip(&pivot_row) {
                    *x -= &q * y;
                }
                if !m[i][c].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if r < m.len() && !m[r][c].is_zero() {
            let pivot_row = m[r].clone();
            for row in m.iter_mut().take(r) {
                let q = row[c].div_floor(&pivot_row[c]);
                if !q.is_zero() {
                    for (x, y) in row.iter_mut().zip(&pivot_row) {
                        *x -= &q * y;
                    }
                }
            }
            r += 1;
        }
    }
    m.truncate(r);
    m
}

/// Whether two generator lists span the same sublattice of `Z^n`.
pub fn lattice_span_equal(g1: &[Vec<i64>], g2: &[Vec<i64>]) -> Result<bool> {
    let n = g1.first().or(g2.first()).map_or(0, |v| v.len());
    if g1.iter().chain(g2).any(|v| v.len() != n) {
        return Err(Error::Mismatch(
            "generators of different ambient rank".into(),
        ));
    }
    Ok(hermite_normal_form(g1, n) == hermite_normal_form(g2, n))
}

/// Nonzero invariant factors of the generator matrix (Smith normal form).
pub fn invariant_factors(rows: &[Vec<i64>], n: usize) -> Vec<BigInt> {
    let mut m = to_big(rows);
    let rows_n = m.len();
    let mut out = Vec::new();
    let mut t = 0;
    while t < rows_n.min(n) {
        // Pivot: smallest nonzero entry in the remaining block.
        let mut best: Option<(usize, usize)> = None;
        for i in t..rows_n {
            for j in t..n {
                if !m[i][j].is_zero() && best.is_none_or(|(bi, bj)| m[i][j].abs() < m[bi][bj].abs())
                {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        m.swap(t, pi);
        for row in m.iter_mut() {
            row.swap(t, pj);
        }
        let mut clean = true;
        for i in t + 1..rows_n {
            let q = m[i][t].div_floor(&m[t][t]);
            if !q.is_zero() {
                let prow = m[t].clone();
                for (x, y) in m[i].iter_mut().zip(&prow) {
                    *x -= &q * y;
                }
            }
            clean &= m[i][t].is_zero();
        }
        for j in t + 1..n {
            let q = m[t][j].div_floor(&m[t][t]);
            if !q.is_zero() {
                for row in m.iter_mut() {
                    let y = row[t].clone();
                    row[j] -= &q * y;
                }
            }
            clean &= m[t][j].is_zero();
        }
        if !clean {
            continue;
        }
        // Divisibility: fold any entry not divisible by the pivot into row t.
        let mut fixed = true;
        'outer: for i in t + 1..rows_n {
            for j in t + 1..n {
                if !(&m[i][j] % &m[t][t]).is_zero() {
                    let row = m[i].clone();
                    for (x, y) in m[t].iter_mut().zip(&row) {
                        *x += y;
                    }
                    fixed = false;
                    break 'outer;
                }
            }
        }
        if fixed {
            out.push(m[t][t].abs());
            t += 1;
        }
    }
    out
}

/// `Z^N / L` is torsion-free.
pub fn lattice_is_saturated(m: &LatticeModel) -> bool {
    invariant_factors(&m.generators, m.n)
        .iter()
        .all(|d| d.is_one())
}

// ----------------------------------------------------------------------
// Difference constraints
// ----------------------------------------------------------------------

/// Constraints `x_i − x_j ≥ A` and bounds `B_i ≤ x_i ≤ C_i` (`None` = infinite).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffConstraintSystem {
    pub n: usize,
    pub diffs: Vec<(usize, usize, i64)>,
    pub lower: Vec<Option<i64>>,
    pub upper: Vec<Option<i64>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiffSolution {
    Solution(Vec<i64>),
    /// Infeasible, with the derivation of an empty box or a violated cycle.
    Infeasible(String),
}

impl DiffConstraintSystem {
    pub fn new(n: usize) -> Self {
        DiffConstraintSystem {
            n,
            diffs: Vec::new(),
            lower: vec![None; n],
            upper: vec![None; n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.n || self.upper.len() != self.n {
            return Err(Error::Mismatch(
                "bounds do not match the variable count".into(),
            ));
        }
        if self
            .diffs
            .iter()
            .any(|&(i, j, _)| i >= self.n || j >= self.n || i == j)
        {
            return Err(Error::Invalid(
                "difference constraint index out of range".into(),
            ));
        }
        Ok(())
    }

    pub fn is_satisfied_by(&self, x: &[i64]) -> bool {
        x.len() == self.n
            && self.diffs.iter().all(|&(i, j, a)| x[i] - x[j] >= a)
            && (0..self.n).all(|i| {
                self.lower[i].is_none_or(|b| x[i] >= b) && self.upper[i].is_none_or(|c| x[i] <= c)
            })
    }

    fn is_triangular(&self) -> bool {
        self.diffs.iter().all(|&(i, j, _)| i < j)
    }
}

impl fmt::Display for DiffConstraintSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut lines = Vec::new();
        for i in 0..self.n {
            match (self.lower[i], self.upper[i]) {
                (Some(b), Some(c)) => lines.push(format!("{b} <= y{} <= {c}", i + 1)),
                (Some(b), None) => lines.push(format!("y{} >= {b}", i + 1)),
                (None, Some(c)) => lines.push(format!("y{} <= {c}", i + 1)),
                (None, None) => {}
            }
        }
        for &(i, j, a) in &self.diffs {
            lines.push(format!("y{} - y{} >= {a}", i + 1, j + 1));
        }
        write!(f, "{}", lines.join("\n"))
    }
}

/// Solve over the integers. Systems whose differences all have `i < j` are
/// solved by pinning the last variable at its lower bound and folding that
/// into the earlier bounds; other systems by shortest paths.
pub fn solve_difference_constraints(sys: &DiffConstraintSystem) -> Result<DiffSolution> {
    sys.validate()?;
    let sol = if sys.is_triangular() {
        solve_triangular(sys)
    } else {
        solve_shortest_paths(sys)
    };
    if let DiffSolution::Solution(x) = &sol {
        debug_assert!(sys.is_satisfied_by(x));
    }
    Ok(sol)
}

fn solve_triangular(sys: &DiffConstraintSystem) -> DiffSolution {
    let n = sys.n;
    let mut lower = sys.lower.clone();
    let mut why: Vec<String> = (0..n)
        .map(|i| match lower[i] {
            Some(b) => format!("y{} >= {b} (bound)", i + 1),
            None => String::new(),
        })
        .collect();
    let mut x: Vec<Option<i64>> = vec![None; n];
    for j in (0..n).rev() {
        let Some(b) = lower[j] else { continue };
        if let Some(c) = sys.upper[j] {
            if b > c {
                return DiffSolution::Infeasible(format!(
                    "empty box for y{}: {} but y{} <= {c}",
                    j + 1,
                    why[j],
                    j + 1
                ));
            }
        }
        x[j] = Some(b);
        for &(i, jj, a) in &sys.diffs {
            if jj == j && lower[i].is_none_or(|li| b + a > li) {
                lower[i] = Some(b + a);
                why[i] = format!(
                    "y{} >= {} (from y{} - y{} >= {a} with {})",
                    i + 1,
                    b + a,
                    i + 1,
                    j + 1,
                    why[j]
                );
            }
        }
    }
    let mut out = vec![0i64; n];
    for j in 0..n {
        out[j] = match x[j] {
            Some(v) => v,
            None => {
                let cap = sys
                    .diffs
                    .iter()
                    .filter(|&&(_, jj, _)| jj == j)
                    .map(|&(i, _, a)| out[i] - a)
                    .chain(sys.upper[j])
                    .min();
                cap.unwrap_or(0)
            }
        };
    }
    DiffSolution::Solution(out)
}

fn solve_shortest_paths(sys: &DiffConstraintSystem) -> DiffSolution {
    let n = sys.n;
    let z = n; // the zero variable
               // Edge u -> v with weight w encodes y_v <= y_u + w.
    let mut edges: Vec<(usize, usize, i64, String)> = Vec::new();
    for &(i, j, a) in &sys.diffs {
        edges.push((i, j, -a, format!("y{} - y{} >= {a}", i + 1, j + 1)));
    }
    for i in 0..n {
        if let Some(b) = sys.lower[i] {
            edges.push((i, z, -b, format!("y{} >= {b}", i + 1)));
        }
        if let Some(c) = sys.upper[i] {
            edges.push((z, i, c, format!("y{} <= {c}", i + 1)));
        }
    }
    let mut dist = vec![0i64; n + 1];
    let mut pred: Vec<Option<usize>> = vec![None; n + 1];
    let mut last = None;
    for _ in 0..=n {
        last = None;
        for (k, &(u, v, w, _)) in edges.iter().enumerate() {
            if dist[u] + w < dist[v] {
                dist[v] = dist[u] + w;
                pred[v] = Some(k);
                last = Some(v);
            }
        }
        if last.is_none() {
            break;
        }
    }
    if let Some(mut v) = last {
        for _ in 0..=n {
            v = edges[pred[v].unwrap()].0;
        }
        let start = v;
        let mut cycle = Vec::new();
        loop {
            let e = &edges[pred[v].unwrap()];
            cycle.push(e.3.clone());
            v = e.0;
            if v == start {
                break;
            }
        }
        cycle.reverse();
        return DiffSolution::Infeasible(format!("contradictory cycle: {}", cycle.join(", ")));
    }
    DiffSolution::Solution((0..n).map(|i| dist[i] - dist[z]).collect())
}

// ----------------------------------------------------------------------
// Monoid normality
// ----------------------------------------------------------------------

/// The system for `y` such that `x + Σ_s y_s v_s ≥ 0`, read off the
/// incidence pattern of canonical generators.
pub fn witness_system(m: &LatticeModel, num_a: usize, x: &[i64]) -> Result<DiffConstraintSystem> {
    if x.len() != m.n {
        return Err(Error::Mismatch(format!(
            "x has length {}, expected {}",
            x.len(),
            m.n
        )));
    }
    check_incidence_pattern(m, num_a)?;
    let mut sys = DiffConstraintSystem::new(m.generators.len());
    for (c, hits) in incidences(&m.generators, m.n).into_iter().enumerate() {
        match hits.as_slice() {
            [] => {
                if x[c] < 0 {
                    return Err(Error::StructuralAssumption(format!(
                        "{} is untouched by the generators but negative in x",
                        m.coord_names[c]
                    )));
                }
            }
            [(s, 1)] => {
                let b = -x[c];
                sys.lower[*s] = Some(sys.lower[*s].map_or(b, |l| l.max(b)));
            }
            [(s, _)] => {
                let u = x[c];
                sys.upper[*s] = Some(sys.upper[*s].map_or(u, |l| l.min(u)));
            }
            [(s, _), (t, _)] => sys.diffs.push((*s, *t, -x[c])),
            _ => unreachable!("incidence pattern checked"),
        }
    }
    Ok(sys)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Witness {
    /// Integer coefficients `y` with `x + Σ y_s v_s ≥ 0`.
    Found(Vec<i64>),
    /// No integer combination exists (the monoid is not saturated here).
    Counterexample(String),
}

/// Given `x` with `k·x + Σ a_s v_s ≥ 0` for some integers `a`, find integers
/// `y` with `x + Σ y_s v_s ≥ 0`. The real point `a / k` makes the system
/// feasible, so the integer solver succeeds whenever the premise holds.
pub fn monoid_saturation_witness(
    m: &LatticeModel,
    num_a: usize,
    x: &[i64],
    k: i64,
) -> Result<Witness> {
    if k <= 0 {
        return Err(Error::Invalid("k must be positive".into()));
    }
    let sys = witness_system(m, num_a, x)?;
    Ok(match solve_difference_constraints(&sys)? {
        DiffSolution::Solution(y) => {
            let img = apply(m, x, &y);
            assert!(
                img.iter().all(|&c| c >= 0),
                "witness failed re-substitution"
            );
            Witness::Found(y)
        }
        DiffSolution::Infeasible(why) => Witness::Counterexample(why),
    })
}

/// `x + Σ y_s v_s`.
pub fn apply(m: &LatticeModel, x: &[i64], y: &[i64]) -> Vec<i64> {
    let mut out = x.to_vec();
    for (g, &ys) in m.generators.iter().zip(y) {
        for (o, &e) in out.iter_mut().zip(g) {
            *o += ys * e;
        }
    }
    out
}

fn monomial(names: &[String], exps: impl Iterator<Item = (usize, i64)>) -> String {
    let parts: Vec<String> = exps
        .filter(|&(_, e)| e > 0)
        .map(|(i, e)| {
            if e == 1 {
                names[i].clone()
            } else {
                format!("{}^{e}", names[i])
            }
        })
        .collect();
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join("*")
    }
}

/// One binomial per generator, `monomial(v⁻) = monomial(v⁺)` with the side
/// containing the first nonzero coordinate written first.
pub fn model_defining_relations(m: &LatticeModel) -> Vec<String> {
    m.generators
        .iter()
        .filter(|g| g.iter().any(|&c| c != 0))
        .map(|g| {
            let pos = monomial(&m.coord_names, g.iter().copied().enumerate());
            let neg = monomial(&m.coord_names, g.iter().map(|&c| -c).enumerate());
            let first_negative = g.iter().find(|&&c| c != 0).is_some_and(|&c| c < 0);
            if first_negative {
                format!("{neg} = {pos}")
            } else {
                format!("{pos} = {neg}")
            }
        })
        .collect()
}

/// Outcome of checking the local model of one tree-pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelCheck {
    pub tree_pair: TreePair,
    pub generators: usize,
    /// Canonical generators span the coherence lattice.
    pub spans: bool,
    /// `Z^N / L` is torsion-free.
    pub saturated: bool,
    /// `Err` carries the description of the broken incidence pattern.
    pub incidence: std::result::Result<(), String>,
    pub witnesses_found: usize,
    pub witness_failures: Vec<String>,
}

impl ModelCheck {
    pub fn ok(&self) -> bool {
        self.spans && self.saturated && self.incidence.is_ok() && self.witness_failures.is_empty()
    }
}

/// Check span equality, saturation and the incidence pattern of the
/// canonical model of `tp`, then run `samples` randomized normality
/// witnesses: pick integers `a` and `k ≥ 1`, form `x` with
/// `k·x + Σ a_s v_s ≥ 0`, and verify the returned `y` by re-substitution.
pub fn check_model<R: rand::Rng>(tp: &TreePair, samples: usize, rng: &mut R) -> Result<ModelCheck> {
    let full = coherence_generators(tp);
    let canon = canonical_model(tp);
    let num_a = tp.non_root_components().len();
    let incidence = check_incidence_pattern(&canon, num_a).map_err(|e| e.to_string());
    let mut out = ModelCheck {
        tree_pair: tp.clone(),
        generators: canon.generators.len(),
        spans: lattice_span_equal(&full.generators, &canon.generators)?,
        saturated: lattice_is_saturated(&canon),
        incidence,
        witnesses_found: 0,
        witness_failures: Vec::new(),
    };
    if out.incidence.is_err() {
        return Ok(out);
    }
    for _ in 0..samples {
        let k: i64 = rng.gen_range(1..=4);
        let a: Vec<i64> = (0..canon.generators.len())
            .map(|_| rng.gen_range(-5..=5))
            .collect();
        let w = apply(&canon, &vec![0; canon.n], &a);
        let x: Vec<i64> = w
            .iter()
            .map(|&wi| Integer::div_ceil(&(-wi), &k) + rng.gen_range(0..=2))
            .collect();
        match monoid_saturation_witness(&canon, num_a, &x, k)? {
            Witness::Found(y) if apply(&canon, &x, &y).iter().all(|&c| c >= 0) => {
                out.witnesses_found += 1
            }
            Witness::Found(y) => out
                .witness_failures
                .push(format!("x={x:?}: y={y:?} fails re-substitution")),
            Witness::Counterexample(c) => out.witness_failures.push(format!("x={x:?}: {c}")),
        }
    }
    Ok(out)
}

/// Fixture tree-pairs from the worked examples.
pub mod fixtures {
    use serde_json::json;

    use crate::tree_pairs::TreePair;

    fn mark(i: usize, j: usize) -> serde_json::Value {
        json!({"kind":"mark","label":[i,j],"edge":"dashed","children":[]})
    }

    fn seam(lines: &[usize], children: Vec<serde_json::Value>) -> serde_json::Value {
        json!({"kind":"seam","label":lines,"edge":"solid","children":children})
    }

    fn comp(lines: &[usize], seams: Vec<serde_json::Value>) -> serde_json::Value {
        json!({"kind":"component","label":lines,"edge":"dashed","children":seams})
    }

    /// Three lines, the first two fused; two single-line bubbles over the
    /// fused pair, each carrying two one-point multi-line bubbles. Gluing
    /// coordinates in order: the six bubbles `a..f`, then the seam variable.
    pub fn reduced_and_normal() -> TreePair {
        let ml = |i: usize, j: usize| {
            comp(
                &[1, 2],
                vec![
                    seam(&[1], if i == 1 { vec![mark(1, j)] } else { vec![] }),
                    seam(&[2], if i == 2 { vec![mark(2, j)] } else { vec![] }),
                ],
            )
        };
        let sl = |j: usize| comp(&[1, 2], vec![seam(&[1, 2], vec![ml(1, j), ml(2, j)])]);
        let root = json!({"kind":"component","label":[1,2,3],"edge":null,"children":[
            seam(&[1, 2], vec![sl(1), sl(2)]),
            seam(&[3], vec![]),
        ]});
        TreePair::from_json(&json!({"n":[2,2,0],"seam":[[1,2],3],"bubble":root})).unwrap()
    }

    /// Two lines; a single-line root with two single-line children, each
    /// carrying two one-point multi-line bubbles.
    pub fn quadric_cone() -> TreePair {
        let ml = |j: usize| {
            comp(
                &[1, 2],
                vec![seam(&[1], vec![mark(1, j)]), seam(&[2], vec![])],
            )
        };
        let sl = |j: usize| comp(&[1, 2], vec![seam(&[1, 2], vec![ml(j), ml(j + 1)])]);
        let root = json!({"kind":"component","label":[1,2],"edge":null,"children":[
            seam(&[1, 2], vec![sl(1), sl(3)]),
        ]});
        TreePair::from_json(&json!({"n":[4,0],"seam":[1,2],"bubble":root})).unwrap()
    }

    /// Three lines, the first two fused below the root; a single-line root
    /// with two multi-line children, each carrying one multi-line bubble over
    /// the fused pair with one point. Its model is a plane.
    pub fn affine_plane() -> TreePair {
        let inner = |i: usize| {
            comp(
                &[1, 2],
                vec![
                    seam(&[1], if i == 1 { vec![mark(1, 1)] } else { vec![] }),
                    seam(&[2], if i == 2 { vec![mark(2, 1)] } else { vec![] }),
                ],
            )
        };
        let outer = |i: usize| {
            comp(
                &[1, 2, 3],
                vec![seam(&[1, 2], vec![inner(i)]), seam(&[3], vec![])],
            )
        };
        let root = json!({"kind":"component","label":[1,2,3],"edge":null,"children":[
            seam(&[1, 2, 3], vec![outer(1), outer(2)]),
        ]});
        TreePair::from_json(&json!({"n":[1,1,0],"seam":[[1,2],3],"bubble":root})).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree_pairs::enumerate_tree_pairs;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LETTERS: [&str; 7] = ["a", "b", "c", "d", "e", "f", "A"];

    fn num_a(tp: &TreePair) -> usize {
        tp.non_root_components().len()
    }

    #[test]
    fn reduced_and_normal_generators() {
        let tp = fixtures::reduced_and_normal();
        assert_eq!(tp.dimension(), 1);
        let m = canonical_model(&tp).with_names(&LETTERS).unwrap();
        assert_eq!(
            m.generators,
            vec![
                vec![0, 0, -1, 1, 0, 0, 0],
                vec![-1, 1, 0, -1, 1, 0, 0],
                vec![0, 0, 0, 0, -1, 1, 0],
                vec![0, -1, 0, 0, 0, -1, 1],
            ]
        );
        let full = coherence_generators(&tp);
        assert!(lattice_span_equal(&full.generators, &m.generators).unwrap());
        assert!(
            lattice_span_equal(&tilde_coherence_generators(&tp).generators, &m.generators).unwrap()
        );
        assert!(lattice_is_saturated(&m));
        check_incidence_pattern(&m, 6).unwrap();
        assert_eq!(
            model_defining_relations(&m),
            vec!["c = d", "a*d = b*e", "e = f", "b*f = A"]
        );
    }

    #[test]
    fn reduced_and_normal_system() {
        let tp = fixtures::reduced_and_normal();
        let m = canonical_model(&tp).with_names(&LETTERS).unwrap();
        // x = (x1..x7) symbolic: use distinct values to identify entries.
        let x = [11, 12, 13, 14, 15, 16, 17];
        let sys = witness_system(&m, 6, &x).unwrap();
        // b1 <= x3, b2 <= x1, b4 >= -x7, b1-b2 >= -x4, b2-b3 >= -x5,
        // b2-b4 >= -x2, b3-b4 >= -x6.
        assert_eq!(sys.upper, vec![Some(13), Some(11), None, None]);
        assert_eq!(sys.lower, vec![None, None, None, Some(-17)]);
        let mut d = sys.diffs.clone();
        d.sort();
        assert_eq!(d, vec![(0, 1, -14), (1, 2, -15), (1, 3, -12), (2, 3, -16)]);
        let zero = witness_system(&m, 6, &[0; 7]).unwrap();
        assert_eq!(
            solve_difference_constraints(&zero).unwrap(),
            DiffSolution::Solution(vec![0; 4])
        );
    }

    #[test]
    fn quadric_cone_relations() {
        let tp = fixtures::quadric_cone();
        assert_eq!(tp.dimension(), 0);
        let m = coherence_generators(&tp)
            .with_names(&["a", "b", "c", "d", "e", "f"])
            .unwrap();
        let expected = vec![
            vec![0, 0, 1, -1, 0, 0],  // c = d
            vec![0, 0, 0, 0, 1, -1],  // e = f
            vec![1, -1, 1, 0, -1, 0], // ac = be
        ];
        assert!(lattice_span_equal(&m.generators, &expected).unwrap());
        assert_eq!(m.model_dimension(), 3);
        let canon = canonical_model(&tp);
        assert!(lattice_span_equal(&canon.generators, &expected).unwrap());
        assert_eq!(
            model_defining_relations(&canon.with_names(&["a", "b", "c", "d", "e", "f"]).unwrap()),
            vec!["c = d", "a*d = b*e", "e = f"]
        );
    }

    #[test]
    fn affine_plane_relations() {
        let tp = fixtures::affine_plane();
        assert_eq!(tp.dimension(), 0);
        let m = coherence_generators(&tp)
            .with_names(&["a", "b", "c", "d", "e"])
            .unwrap();
        // a = b, c = d = e (e the seam variable)
        let expected = vec![
            vec![1, -1, 0, 0, 0],
            vec![0, 0, 1, -1, 0],
            vec![0, 0, 0, 1, -1],
        ];
        assert!(lattice_span_equal(&m.generators, &expected).unwrap());
        assert_eq!(m.model_dimension(), 2);
    }

    #[test]
    fn lattice_basics() {
        assert!(lattice_span_equal(&[vec![1, 0]], &[vec![1, 0], vec![2, 0]]).unwrap());
        assert!(!lattice_span_equal(&[vec![2, 0]], &[vec![1, 0]]).unwrap());
        assert!(lattice_span_equal(&[vec![1]], &[vec![1, 0]]).is_err());
        let m = LatticeModel::new(vec!["x".into()], vec![vec![2]]).unwrap();
        assert!(!lattice_is_saturated(&m));
        assert_eq!(
            invariant_factors(&[vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]], 3),
            vec![BigInt::from(2), BigInt::from(6), BigInt::from(12)]
        );
        assert!(
            model_defining_relations(&LatticeModel::new(vec!["x".into()], vec![]).unwrap())
                .is_empty()
        );
    }

    #[test]
    fn single_multi_line_component_has_no_generators() {
        let top = TreePair::top(&[1, 1]).unwrap();
        assert!(canonical_generators(&top).is_empty());
    }

    #[test]
    fn empty_box_is_infeasible() {
        let mut s = DiffConstraintSystem::new(1);
        s.lower[0] = Some(3);
        s.upper[0] = Some(2);
        assert!(matches!(
            solve_difference_constraints(&s).unwrap(),
            DiffSolution::Infeasible(_)
        ));
    }

    /// Exhaustive search over the box `[-lim, lim]^n`.
    fn brute(sys: &DiffConstraintSystem, lim: i64) -> Option<Vec<i64>> {
        let n = sys.n;
        let mut x = vec![-lim; n];
        loop {
            if sys.is_satisfied_by(&x) {
                return Some(x);
            }
            let mut k = 0;
            loop {
                if k == n {
                    return None;
                }
                x[k] += 1;
                if x[k] <= lim {
                    break;
                }
                x[k] = -lim;
                k += 1;
            }
        }
    }

    /// A random system on at most 5 variables. With `boxed`, every
    /// variable gets both bounds in `[-4, 4]`; otherwise bounds are optional.
    pub(crate) fn random_system(
        rng: &mut ChaCha8Rng,
        triangular: bool,
        boxed: bool,
    ) -> DiffConstraintSystem {
        let n = rng.gen_range(1..=5);
        let mut s = DiffConstraintSystem::new(n);
        for i in 0..n {
            if boxed || rng.gen_bool(0.6) {
                s.lower[i] = Some(rng.gen_range(-4..=4));
            }
            if boxed || rng.gen_bool(0.6) {
                s.upper[i] = Some(rng.gen_range(-4..=4));
            }
        }
        for _ in 0..rng.gen_range(0..=2 * n) {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            if i == j || (triangular && i > j) {
                continue;
            }
            s.diffs.push((i, j, rng.gen_range(-4..=4)));
        }
        s
    }

    #[test]
    fn solver_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for t in 0..500 {
            let sys = random_system(&mut rng, t % 2 == 0, true);
            let expect = brute(&sys, 4).is_some();
            match solve_difference_constraints(&sys).unwrap() {
                DiffSolution::Solution(x) => {
                    assert!(expect, "{sys}");
                    assert!(sys.is_satisfied_by(&x));
                }
                DiffSolution::Infeasible(_) => assert!(!expect, "{sys}"),
            }
        }
    }

    #[test]
    fn pinning_and_shortest_paths_agree_with_open_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let sys = random_system(&mut rng, true, false);
            let a = solve_triangular(&sys);
            let b = solve_shortest_paths(&sys);
            match (&a, &b) {
                (DiffSolution::Solution(x), DiffSolution::Solution(y)) => {
                    assert!(sys.is_satisfied_by(x) && sys.is_satisfied_by(y));
                }
                (DiffSolution::Infeasible(_), DiffSolution::Infeasible(_)) => {}
                _ => panic!("strategies disagree on {sys}: {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn zero_dimensional_models_are_reduced_and_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [
            vec![2, 0],
            vec![1, 1],
            vec![3],
            vec![2, 1],
            vec![1, 1, 0],
            vec![2, 0, 0],
        ] {
            for tp in enumerate_tree_pairs(&n)
                .unwrap()
                .iter()
                .filter(|t| t.dimension() == 0)
            {
                let full = coherence_generators(tp);
                let canon = canonical_model(tp);
                assert!(lattice_span_equal(&full.generators, &canon.generators).unwrap());
                assert!(lattice_is_saturated(&canon));
                check_incidence_pattern(&canon, num_a(tp)).unwrap();
                for _ in 0..20 {
                    let k = rng.gen_range(1..=4);
                    let a: Vec<i64> = (0..canon.generators.len())
                        .map(|_| rng.gen_range(-5..=5))
                        .collect();
                    let w = apply(&canon, &vec![0; canon.n], &a);
                    let x: Vec<i64> = w
                        .iter()
                        .map(|&wi| Integer::div_ceil(&(-wi), &k) + rng.gen_range(0..=2))
                        .collect();
                    match monoid_saturation_witness(&canon, num_a(tp), &x, k).unwrap() {
                        Witness::Found(y) => assert!(apply(&canon, &x, &y).iter().all(|&c| c >= 0)),
                        Witness::Counterexample(c) => panic!("{c}"),
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn unimodular_images_stay_saturated(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tp = fixtures::reduced_and_normal();
            let m = canonical_model(&tp);
            // Random elementary column operations (determinant ±1).
            let mut gens = m.generators.clone();
            for _ in 0..6 {
                let i = rng.gen_range(0..m.n);
                let j = rng.gen_range(0..m.n);
                if i == j { continue; }
                let c = rng.gen_range(-3..=3);
                for g in gens.iter_mut() { g[i] += c * g[j]; }
            }
            let img = LatticeModel { generators: gens, ..m.clone() };
            prop_assert!(lattice_is_saturated(&img));
            let mut doubled = img.generators.clone();
            doubled[0] = doubled[0].iter().map(|x| 2 * x).collect();
            let sub = LatticeModel { generators: doubled, ..m };
            prop_assert!(!lattice_is_saturated(&sub));
        }
    }
}
