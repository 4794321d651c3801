//! Python bindings: stable trees, tree-pairs, virtual Poincaré polynomials,
//! local-model checks, the difference-constraint solver and charts.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vlines::charts::{self, ChartPoint, SlicedTree, SlicedTreePair};
use vlines::exact_poly::{format_rational, parse_rational, UniPoly};
use vlines::local_models::{self, DiffConstraintSystem, DiffSolution};
use vlines::tree_pairs::{self, TreePair};
use vlines::trees::{self, StableTree};
use vlines::vpp as core_vpp;

fn err(e: vlines::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn coeffs(p: &UniPoly) -> PyResult<Vec<i64>> {
    p.to_i64s()
        .ok_or_else(|| PyValueError::new_err("coefficient exceeds 64 bits"))
}

fn rationals(values: BTreeMap<String, String>) -> PyResult<BTreeMap<String, charts::Rat>> {
    values
        .into_iter()
        .map(|(k, v)| parse_rational(&v).map(|x| (k, x)).map_err(err))
        .collect()
}

/// A stable rooted tree with labeled leaves, e.g. `Tree("[[1,2],3]")`.
#[pyclass(name = "Tree", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTree(StableTree);

#[pymethods]
impl PyTree {
    #[new]
    fn new(nested: &str) -> PyResult<Self> {
        StableTree::parse(nested).map(PyTree).map_err(err)
    }

    #[getter]
    fn r(&self) -> usize {
        self.0.r()
    }

    fn dimension(&self) -> usize {
        self.0.dimension()
    }

    /// Brackets (vertex leaf sets), sorted.
    fn brackets(&self) -> Vec<Vec<usize>> {
        self.0
            .to_bracketing()
            .sets()
            .iter()
            .map(|s| s.iter().copied().collect())
            .collect()
    }

    fn leq(&self, other: &PyTree) -> PyResult<bool> {
        self.0.poset_leq(&other.0).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Tree(\"{}\")", self.0)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __eq__(&self, other: &PyTree) -> bool {
        self.0 == other.0
    }
}

/// A stable tree-pair of type `n`.
#[pyclass(name = "TreePair", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTreePair(TreePair);

#[pymethods]
impl PyTreePair {
    /// Parse the JSON encoding produced by `to_json`.
    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        let v: serde_json::Value =
            serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string()))?;
        TreePair::from_json(&v).map(PyTreePair).map_err(err)
    }

    /// The top stratum of type `n`.
    #[staticmethod]
    fn top(n: Vec<usize>) -> PyResult<Self> {
        TreePair::top(&n).map(PyTreePair).map_err(err)
    }

    #[getter]
    fn n(&self) -> Vec<usize> {
        self.0.n().to_vec()
    }

    fn seam(&self) -> PyTree {
        PyTree(self.0.seam().clone())
    }

    fn dimension(&self) -> usize {
        self.0.dimension()
    }

    fn leq(&self, other: &PyTreePair) -> bool {
        self.0.poset_leq(&other.0)
    }

    fn to_json(&self) -> String {
        self.0.to_json().to_string()
    }

    fn two_bracketing_json(&self) -> String {
        self.0.to_two_bracketing().to_json().to_string()
    }

    /// Names of the gluing coordinates (`a1, …` then `b1, …`).
    fn coordinate_names(&self) -> Vec<String> {
        local_models::coordinate_names(&self.0)
    }

    /// Canonical generators of the coherence lattice, one row per generator.
    fn canonical_generators(&self) -> Vec<Vec<i64>> {
        local_models::canonical_generators(&self.0)
    }

    /// Binomial relations of the local model, e.g. `"a*d = b*e"`.
    fn model_relations(&self) -> Vec<String> {
        local_models::model_defining_relations(&local_models::canonical_model(&self.0))
    }

    /// Check span, saturation, incidence and `samples` normality witnesses.
    #[pyo3(signature = (samples=200, seed=0))]
    fn check_local_model(&self, samples: usize, seed: u64) -> PyResult<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        local_models::check_model(&self.0, samples, &mut rng)
            .map(|c| c.ok())
            .map_err(err)
    }

    /// Evaluate the chart of this 0-dimensional tree-pair; values are
    /// rationals written as strings. Returns the configuration as JSON.
    fn chart_eval(&self, values: BTreeMap<String, String>) -> PyResult<String> {
        let stp = SlicedTreePair::new(self.0.clone()).map_err(err)?;
        let pc = charts::evaluate_chart_2d(&stp, &rationals(values)?).map_err(err)?;
        Ok(pc.to_json().to_string())
    }

    fn __repr__(&self) -> String {
        format!("TreePair({})", self.0.to_two_bracketing().to_json())
    }

    fn __eq__(&self, other: &PyTreePair) -> bool {
        self.0 == other.0
    }
}

/// All stable trees on `r` leaves, by decreasing dimension.
#[pyfunction]
fn enumerate_trees(r: usize) -> Vec<PyTree> {
    trees::enumerate_stable_trees(r)
        .into_iter()
        .map(PyTree)
        .collect()
}

/// All tree-pairs of type `n`, by decreasing dimension.
#[pyfunction]
fn enumerate_tree_pairs(n: Vec<usize>) -> PyResult<Vec<PyTreePair>> {
    tree_pairs::enumerate_tree_pairs(&n)
        .map(|v| v.into_iter().map(PyTreePair).collect())
        .map_err(err)
}

/// Number of strata per dimension.
#[pyfunction]
fn f_vector(n: Vec<usize>) -> PyResult<Vec<usize>> {
    tree_pairs::f_vector(&n).map_err(err)
}

/// Coefficients (constant term first) of the virtual Poincaré polynomial.
#[pyfunction]
fn vpp(n: Vec<usize>) -> PyResult<Vec<i64>> {
    coeffs(&core_vpp::vpp(&n).map_err(err)?)
}

/// The polynomial as text, e.g. `"x^4 + 4x^2 + 1"`.
#[pyfunction]
fn vpp_str(n: Vec<usize>) -> PyResult<String> {
    Ok(core_vpp::vpp(&n).map_err(err)?.to_string())
}

/// Coefficients of the polynomial of the seam space on `r` points.
#[pyfunction]
fn vpp_seam(r: usize) -> PyResult<Vec<i64>> {
    coeffs(&core_vpp::vpp_seam(r))
}

/// The same polynomial summed stratum by stratum.
#[pyfunction]
fn vpp_by_strata(n: Vec<usize>) -> PyResult<Vec<i64>> {
    coeffs(&core_vpp::vpp_by_strata(&n).map_err(err)?)
}

/// Solve `x_i − x_j ≥ A` with optional box bounds over the integers.
/// Returns a solution, or `None` when the system is infeasible.
#[pyfunction]
#[pyo3(signature = (n, diffs, lower=None, upper=None))]
fn solve_difference_constraints(
    n: usize,
    diffs: Vec<(usize, usize, i64)>,
    lower: Option<Vec<Option<i64>>>,
    upper: Option<Vec<Option<i64>>>,
) -> PyResult<Option<Vec<i64>>> {
    let mut sys = DiffConstraintSystem::new(n);
    sys.diffs = diffs;
    if let Some(l) = lower {
        sys.lower = l;
    }
    if let Some(u) = upper {
        sys.upper = u;
    }
    match local_models::solve_difference_constraints(&sys).map_err(err)? {
        DiffSolution::Solution(x) => Ok(Some(x)),
        DiffSolution::Infeasible(_) => Ok(None),
    }
}

/// Evaluate the chart of a tree (default slice) at gluing values given as
/// rational strings; returns the glued curve as JSON.
#[pyfunction]
fn chart_eval(tree: &str, b: BTreeMap<String, String>) -> PyResult<String> {
    let st = SlicedTree::parse(tree).map_err(err)?;
    let c = charts::evaluate_chart(&st, &ChartPoint::from_b(rationals(b)?)).map_err(err)?;
    Ok(c.to_json().to_string())
}

/// The transition `φ_to^{-1} ∘ φ_from` at a point of the first chart.
#[pyfunction]
fn transition(
    from_tree: &str,
    to_tree: &str,
    b: BTreeMap<String, String>,
) -> PyResult<BTreeMap<String, String>> {
    let t1 = SlicedTree::parse(from_tree).map_err(err)?;
    let t2 = SlicedTree::parse(to_tree).map_err(err)?;
    let pt = charts::transition(&t1, &t2, &ChartPoint::from_b(rationals(b)?)).map_err(err)?;
    Ok(pt
        .b
        .iter()
        .map(|(k, v)| (k.clone(), format_rational(v)))
        .collect())
}

/// Random round-trip transition check; returns `(checked, skipped, failures)`.
#[pyfunction]
#[pyo3(signature = (from_tree, to_tree, samples=100, seed=0))]
fn transition_check(
    from_tree: &str,
    to_tree: &str,
    samples: usize,
    seed: u64,
) -> PyResult<(usize, usize, usize)> {
    let t1 = SlicedTree::parse(from_tree).map_err(err)?;
    let t2 = SlicedTree::parse(to_tree).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rep = charts::transition_check(&t1, &t2, samples, &mut rng).map_err(err)?;
    Ok((rep.checked, rep.skipped, rep.failures.len()))
}

#[pymodule]
fn vlines_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTree>()?;
    m.add_class::<PyTreePair>()?;
    m.add_function(wrap_pyfunction!(enumerate_trees, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_tree_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(f_vector, m)?)?;
    m.add_function(wrap_pyfunction!(vpp, m)?)?;
    m.add_function(wrap_pyfunction!(vpp_str, m)?)?;
    m.add_function(wrap_pyfunction!(vpp_seam, m)?)?;
    m.add_function(wrap_pyfunction!(vpp_by_strata, m)?)?;
    m.add_function(wrap_pyfunction!(solve_difference_constraints, m)?)?;
    m.add_function(wrap_pyfunction!(chart_eval, m)?)?;
    m.add_function(wrap_pyfunction!(transition, m)?)?;
    m.add_function(wrap_pyfunction!(transition_check, m)?)?;
    Ok(())
}
