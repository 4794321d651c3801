"""Smoke test for the vlines_py extension module.

Build and install first:
    pip install --no-build-isolation -e crates/vlines-py
then run:
    python3 crates/vlines-py/python/smoke_test.py
"""

import json

import vlines_py as v


def main():
    # Seam spaces on two, three and four points.
    assert v.vpp_seam(2) == [1]
    assert v.vpp_seam(3) == [1, 0, 1]
    assert v.vpp_seam(4) == [1, 0, 5, 0, 1]

    # Two-dimensional strata counts and polynomials agree stratum by stratum.
    for n in ([2, 1], [0, 4], [1, 3], [2, 2]):
        assert v.vpp(n) == v.vpp_by_strata(n), n
        assert sum(v.f_vector(n)) == len(v.enumerate_tree_pairs(n)), n
    print("vpp(2,2) =", v.vpp_str([2, 2]))

    # Trees and the order on strata.
    t = v.Tree("[[1,2],3,4]")
    top = v.Tree("[1,2,3,4]")
    assert t.r == 4 and t.dimension() == 1
    assert t.leq(top) and not top.leq(t)
    assert len(v.enumerate_trees(4)) == 26

    # Tree-pairs: JSON round trip and local model checks.
    pairs = v.enumerate_tree_pairs([1, 2])
    for tp in pairs:
        assert v.TreePair.from_json(tp.to_json()) == tp
        assert tp.check_local_model(samples=20, seed=1)
    assert all(tp.leq(v.TreePair.top([1, 2])) for tp in pairs)

    # Difference constraints: x0 - x1 >= 2, x1 - x0 >= -3.
    sol = v.solve_difference_constraints(2, [(0, 1, 2), (1, 0, -3)])
    assert sol is not None and 2 <= sol[0] - sol[1] <= 3
    assert v.solve_difference_constraints(2, [(0, 1, 2), (1, 0, -1)]) is None

    # Charts: boundary point glues to the coarser tree; transition round trip.
    curve = json.loads(v.chart_eval("[[1,[2,3]],4]", {"b1": "0", "b2": "1/3"}))
    assert "tree" in curve
    b = v.transition("[[1,[2,3]],4]", "[1,[[2,3],4]]", {"b1": "1/2", "b2": "1/3"})
    assert b == {"b1": "1", "b2": "1/3"}, b
    checked, skipped, failures = v.transition_check("[[1,[2,3]],4]", "[1,[[2,3],4]]", 50, 7)
    assert failures == 0 and checked > 0

    print("smoke test OK")


if __name__ == "__main__":
    main()
