//! Property tests over the public API: randomized types, trees, tree-pairs,
//! lattice points and chart points.

use std::collections::BTreeSet;

use num_integer::Integer;
use num_traits::Signed;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vlines::charts::{evaluate_chart, invert_chart, sample_open_point, SlicedTree};
use vlines::local_models::{
    apply, canonical_generators, canonical_model, monoid_saturation_witness,
    solve_difference_constraints, DiffConstraintSystem, DiffSolution, Witness,
};
use vlines::tree_pairs::{enumerate_tree_pairs, FiberSpec, TreePair};
use vlines::trees::enumerate_stable_trees;
use vlines::vpp::{vpp, vpp_fiber_product, MemoTable};

/// Stable types with `|n| + r ≤ bound` and `r ≥ 1`.
fn arb_type(bound: usize) -> impl Strategy<Value = Vec<usize>> {
    (1..bound)
        .prop_flat_map(move |r| proptest::collection::vec(0..=bound - r, r))
        .prop_filter("stable and within bound", move |n| {
            n.iter().sum::<usize>() + n.len() <= bound && enumerate_tree_pairs(n).is_ok()
        })
}

fn dimension(n: &[usize]) -> usize {
    let k: usize = n.iter().sum();
    if n.len() == 1 {
        k - 2
    } else {
        k + n.len() - 3
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn vpp_is_permutation_invariant_and_well_shaped(n in arb_type(7), seed in any::<u64>()) {
        let p = vpp(&n).unwrap();
        let d = dimension(&n);
        prop_assert_eq!(p.degree(), Some(2 * d));
        prop_assert_eq!(p.coeff(0), 1.into());
        prop_assert_eq!(p.coeff(2 * d), 1.into());
        prop_assert!(p.coeffs().iter().all(|c| !c.is_negative()));
        let mut m = n.clone();
        let s = seed as usize;
        let len = m.len();
        m.rotate_left(s % len);
        m.swap(0, (s / 7) % len);
        prop_assert_eq!(vpp(&m).unwrap(), p);
    }

    #[test]
    fn memoized_and_plain_fiber_products_agree(n in arb_type(6), k in 0usize..3) {
        // One or two factors over the same base.
        let mut factors = vec![n.clone()];
        if k > 0 {
            let mut m = vec![0; n.len()];
            m[k % n.len()] = 1;
            factors.push(m);
        }
        let spec = FiberSpec::new(n.len(), factors).unwrap();
        let memo = MemoTable::new();
        prop_assert_eq!(vpp_fiber_product(&spec, Some(&memo)), vpp_fiber_product(&spec, None));
    }

    #[test]
    fn tree_glue_is_monotone(r in 2usize..7, idx in any::<usize>(), m1 in any::<u32>(), m2 in any::<u32>()) {
        let trees = enumerate_stable_trees(r);
        let t = &trees[idx % trees.len()];
        let verts = t.non_root_interior();
        let set = |m: u32| -> BTreeSet<usize> {
            (0..verts.len()).filter(|i| m >> i & 1 == 1).map(|i| verts[i]).collect()
        };
        let small = set(m1);
        let big: BTreeSet<usize> = small.union(&set(m2)).copied().collect();
        let gs = t.glue(&small).unwrap();
        let gb = t.glue(&big).unwrap();
        prop_assert!(gs.poset_leq(&gb).unwrap());
        prop_assert!(t.poset_leq(&gs).unwrap());
        prop_assert_eq!(small == big, gs.to_bracketing() == gb.to_bracketing());
    }

    #[test]
    fn tree_pairs_validate_and_round_trip(n in arb_type(6), idx in any::<usize>()) {
        let all = enumerate_tree_pairs(&n).unwrap();
        let tp = &all[idx % all.len()];
        tp.validate().unwrap();
        prop_assert_eq!(&TreePair::from_json(&tp.to_json()).unwrap(), tp);
        prop_assert_eq!(&TreePair::from_two_bracketing(&tp.to_two_bracketing()).unwrap(), tp);
        prop_assert!(tp.dimension() <= dimension(&n));
        prop_assert_eq!(TreePair::top(&n).unwrap().dimension(), dimension(&n));
    }

    #[test]
    fn witnesses_resubstitute(n in arb_type(6), idx in any::<usize>(), k in 1i64..5,
                              a in proptest::collection::vec(-5i64..=5, 12), slack in proptest::collection::vec(0i64..3, 40)) {
        let zero_dim: Vec<TreePair> = enumerate_tree_pairs(&n).unwrap().into_iter().filter(|t| t.dimension() == 0).collect();
        prop_assume!(!zero_dim.is_empty());
        let tp = &zero_dim[idx % zero_dim.len()];
        let m = canonical_model(tp);
        prop_assert_eq!(m.rank(), canonical_generators(tp).len());
        // x with k·x in the monoid's cone: k·x + Σ a_α v_α ≥ 0.
        let coeffs: Vec<i64> = (0..m.generators.len()).map(|i| a[i % a.len()]).collect();
        let w = apply(&m, &vec![0; m.n], &coeffs);
        let x: Vec<i64> = w.iter().enumerate().map(|(i, &wi)| Integer::div_ceil(&(-wi), &k) + slack[i % slack.len()]).collect();
        match monoid_saturation_witness(&m, tp.non_root_components().len(), &x, k).unwrap() {
            Witness::Found(y) => prop_assert!(apply(&m, &x, &y).iter().all(|&c| c >= 0)),
            Witness::Counterexample(c) => prop_assert!(false, "{}", c),
        }
    }

    #[test]
    fn solver_matches_box_search(n in 1usize..5,
                                 bounds in proptest::collection::vec((-4i64..=4, -4i64..=4), 4),
                                 diffs in proptest::collection::vec((0usize..4, 0usize..4, -4i64..=4), 0..8)) {
        let mut sys = DiffConstraintSystem::new(n);
        for (i, &(a, b)) in bounds.iter().enumerate().take(n) {
            sys.lower[i] = Some(a.min(b));
            sys.upper[i] = Some(a.max(b));
        }
        sys.diffs = diffs.into_iter().filter(|&(i, j, _)| i < n && j < n && i != j).collect();
        let mut found = false;
        let mut x = vec![0i64; n];
        'search: for code in 0..9i64.pow(n as u32) {
            let mut c = code;
            for xi in x.iter_mut() {
                *xi = c % 9 - 4;
                c /= 9;
            }
            if sys.is_satisfied_by(&x) {
                found = true;
                break 'search;
            }
        }
        match solve_difference_constraints(&sys).unwrap() {
            DiffSolution::Solution(s) => {
                prop_assert!(sys.is_satisfied_by(&s));
                prop_assert!(found);
            }
            DiffSolution::Infeasible(_) => prop_assert!(!found),
        }
    }

    #[test]
    fn charts_glue_distinct_points_and_invert(r in 3usize..7, idx in any::<usize>(), seed in any::<u64>()) {
        let trees: Vec<_> = enumerate_stable_trees(r).into_iter().filter(|t| t.dimension() == 0).collect();
        let st = SlicedTree::with_default_slice(trees[idx % trees.len()].clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pt = sample_open_point(&st, &mut rng);
        prop_assume!(pt.is_some());
        let pt = pt.unwrap();
        // Curves are validated on construction: positions on every screen are distinct.
        let c = evaluate_chart(&st, &pt).unwrap();
        prop_assert_eq!(invert_chart(&st, &c).unwrap(), pt);
    }
}
