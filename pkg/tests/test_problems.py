import itertools
import math

import numpy as np
import pytest

from qfw.model import ProblemError, brute_force_solve, evaluate, is_feasible, vec
from qfw.problems import (
    all_permutation_matrices,
    bit_accuracy,
    build_qps_matrix,
    cycle_consistency_error,
    fix_gauge,
    gen_graph_matching,
    gen_perm_sync,
    is_permutation_matrix,
    normalized_energy,
    random_permutation,
    split_perms,
    stack_perms,
    sync_loss,
    sync_optimum,
)


def test_graph_matching_determinism():
    a, b = gen_graph_matching(3, 17), gen_graph_matching(3, 17)
    assert np.array_equal(a.Q, b.Q) and a.gt_value == b.gt_value
    assert not np.array_equal(a.Q, gen_graph_matching(3, 18).Q)


def test_graph_matching_counts():
    inst = gen_graph_matching(3, 0)
    assert inst.problem.n == 9 and inst.problem.m == 6
    feas = [x for x in itertools.product((0, 1), repeat=9) if is_feasible(inst.problem, x)]
    assert len(feas) == 6
    with pytest.raises(ProblemError):
        gen_graph_matching(1, 0)


@pytest.mark.parametrize("seed", range(5))
def test_graph_matching_ground_truth(seed):
    inst = gen_graph_matching(3, seed)
    assert inst.gt_value <= evaluate(inst.problem, vec(np.eye(3)).astype(int))
    vals = [evaluate(inst.problem, vec(P).astype(int)) for P in all_permutation_matrices(3)]
    assert inst.gt_value == min(vals)
    _, v = brute_force_solve(inst.problem)
    assert abs(v - inst.gt_value) <= 1e-12
    assert evaluate(inst.problem, inst.gt_x) == inst.gt_value
    assert np.all(inst.Q <= 0)


def test_qps_small_examples():
    I = np.eye(2)
    Q, off = build_qps_matrix(2, 2, [(0, 1)], {(0, 1): I})
    x = np.concatenate([vec(I), vec(I)])
    assert x @ Q @ x + off == 0.0
    P = np.array([[0.0, 1.0], [1.0, 0.0]])
    Q, off = build_qps_matrix(2, 2, [(0, 1)], {(0, 1): P})
    x = np.concatenate([vec(P), vec(I)])
    assert x @ Q @ x + off == 0.0
    with pytest.raises(ProblemError):
        build_qps_matrix(2, 2, [(0, 1)], {(0, 1): 0.5 * np.ones((2, 2))})


@pytest.mark.parametrize("sigma", [0.0, 0.2, 0.7])
def test_qps_matches_frobenius_loss(sigma):
    rng = np.random.default_rng(int(sigma * 10))
    inst = gen_perm_sync(3, 3, sigma, int(sigma * 100))
    for _ in range(50):
        perms = [random_permutation(rng, 3) for _ in range(3)]
        x = stack_perms(perms).astype(float)
        direct = sum(np.sum((P - perms[i] @ perms[j].T) ** 2)
                     for (i, j), P in inst.relative.items())
        assert abs(x @ inst.problem.Q @ x + inst.offset - direct) <= 1e-10


def test_sync_counts_and_ground_truth():
    inst = gen_perm_sync(3, 3, 0.0, 1)
    assert inst.problem.n == 27 and inst.problem.m == 18
    assert np.array_equal(inst.gt_perms[0], np.eye(3))
    assert inst.loss(inst.gt_perms) == 0.0
    assert abs(inst.gt_value + inst.offset) <= 1e-12
    assert all(is_permutation_matrix(P) for P in inst.relative.values())
    with pytest.raises(ProblemError):
        gen_perm_sync(3, 3, 1.5, 0)
    with pytest.raises(ProblemError):
        gen_perm_sync(1, 3, 0.0, 0)


def test_noiseless_brute_force_recovers_ground_truth():
    inst = gen_perm_sync(2, 3, 0.0, 4)
    x, v = brute_force_solve(inst.problem)
    assert abs(v + inst.offset) <= 1e-12
    assert bit_accuracy(x, inst.gt_x, 2, 3) == 1.0


def test_noisy_ground_truth_two_ways():
    inst = gen_perm_sync(3, 3, 0.2, 7)
    x = inst.gt_x.astype(float)
    assert abs(x @ inst.problem.Q @ x + inst.offset - inst.loss(inst.gt_perms)) <= 1e-10
    best, perms = sync_optimum(inst)
    assert best <= inst.loss(inst.gt_perms)
    assert abs(inst.loss(perms) - best) <= 1e-12


def test_gauge_invariance():
    rng = np.random.default_rng(3)
    inst = gen_perm_sync(4, 3, 0.5, 3)
    perms = [random_permutation(rng, 3) for _ in range(4)]
    for _ in range(10):
        Pg = random_permutation(rng, 3)
        moved = [X @ Pg for X in perms]
        assert sync_loss(inst.relative, moved) == sync_loss(inst.relative, perms)
        assert all(np.array_equal(a, b) for a, b in zip(fix_gauge(moved), fix_gauge(perms)))
    fixed = fix_gauge(perms)
    assert np.array_equal(fixed[0], np.eye(3))
    assert sync_loss(inst.relative, fixed) == sync_loss(inst.relative, perms)
    already = fix_gauge(fixed)
    assert all(np.array_equal(a, b) for a, b in zip(already, fixed))


def test_stack_split_roundtrip():
    rng = np.random.default_rng(0)
    perms = [random_permutation(rng, 4) for _ in range(3)]
    back = split_perms(stack_perms(perms), 3, 4)
    assert all(np.array_equal(a, b) for a, b in zip(perms, back))
    with pytest.raises(ProblemError):
        split_perms(np.zeros(5), 1, 2)


def test_metrics():
    assert normalized_energy([1.0, 1.0], 1.0) == 0.0
    assert abs(normalized_energy([1.1, 1.3], 1.0) - 0.2) <= 1e-15
    assert math.isnan(normalized_energy([], 0.0))
    with pytest.raises(ValueError):
        normalized_energy([1.0], float("nan"))
    x = np.array([1, 0, 1, 1])
    assert bit_accuracy(x, x) == 1.0 and bit_accuracy(x, 1 - x) == 0.0
    with pytest.raises(ValueError):
        bit_accuracy(x, x[:3])
    eps = cycle_consistency_error([-3.0, -5.0, -4.5], -5.0)
    assert eps.tolist() == [2.0, 0.0, 0.5]


def test_bit_accuracy_is_gauge_blind():
    rng = np.random.default_rng(5)
    perms = [random_permutation(rng, 3) for _ in range(3)]
    Pg = random_permutation(rng, 3)
    a = stack_perms(perms)
    b = stack_perms([X @ Pg for X in perms])
    assert bit_accuracy(a, b, 3, 3) == 1.0


def test_meta_blocks():
    inst = gen_perm_sync(2, 2, 0.0, 0)
    meta = inst.meta()
    assert meta["family"] == "perm_sync" and meta["K"] == 2 and meta["gt"]["x"] == inst.gt_x.tolist()
    gm = gen_graph_matching(2, 0).meta()
    assert gm["family"] == "graph_matching" and gm["N"] == 2
