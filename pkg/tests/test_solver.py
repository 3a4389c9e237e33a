import numpy as np
import pytest
from hypothesis import given, strategies as st

from hybridclust.gen import generate
from hybridclust.metric import MetricSpace, cost
from hybridclust.oracle import brute_force
from hybridclust.solver import (TOO_MANY_MARKS, NoSolutionFound, SolverConfig,
                                compute_upper_bounds, cost_lower_bound, default_iteration_cap, greedy_mark,
                                guess_grid, initialize, iterate, one_center_cost, run_single, scatter_diagnostics,
                                solve, threads_from_env, RunFailure)

from conftest import line


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(epsilon=1.0)
    with pytest.raises(ValueError):
        SolverConfig(epsilon=0.5, repetitions=0)
    assert SolverConfig(epsilon=0.5).cap(2) == default_iteration_cap(2, 0.5) >= 1


def test_huge_guess_gives_whole_set_radius():
    # once alpha covers every client, alpha = G / n is the smallest feasible radius
    u = compute_upper_bounds(line([0, 1], [0]), 1e9, 0.0)
    np.testing.assert_allclose(u, 3 * 1e9 / 2)
    with pytest.raises(ValueError):
        compute_upper_bounds(line([0, 1], [0]), 0.0, 0.0)


def test_too_many_marks():
    space = line([0, 0.1, 50, 50.1, 100, 100.1], [0, 50, 100])
    out = run_single(space, 2, 0.0, 0.5, 1.0, seed=0)
    assert out.reason == TOO_MANY_MARKS


@given(st.integers(2, 10), st.integers(1, 6), st.integers(1, 3), st.sampled_from([0.0, 0.5, 2.0]),
       st.integers(0, 10**5))
def test_lower_bound_is_valid(n, m, k, r, seed):
    inst = generate("euclidean-uniform", n, m, k=k, r=r, seed=seed)
    opt = brute_force(inst.space, k, r).opt_cost
    assert cost_lower_bound(inst.space, k, r) <= opt * (1 + 1e-9) + 1e-12
    if opt > 0:
        assert cost_lower_bound(inst.space, k, r, assume_positive=True) <= opt * (1 + 1e-9)
    _, U = one_center_cost(inst.space, r)
    assert U >= opt - 1e-12


def test_guess_grid_brackets_opt():
    inst = generate("euclidean-planted", 10, 6, k=2, r=0.3, seed=4)
    opt = brute_force(inst.space, 2, 0.3).opt_cost
    grid, U = guess_grid(inst.space, 2, 0.3, 1.0, 1 + 0.5 / 3)
    assert grid[0] <= opt <= U <= grid[-1] * (1 + 1e-9)
    # some guess lies in [opt, (1 + eps/3) opt]
    assert any(opt <= G <= opt * (1 + 0.5 / 3) * (1 + 1e-9) for G in grid)


def test_zero_upper_bound_short_circuit():
    space = line([1, 1, 1], [0, 1])
    res = solve(space, 1, 0.0, 0.5, SolverConfig(epsilon=0.5, repetitions=3))
    assert res.cost == 0.0 and res.solution.centers == [1]


def test_solve_matches_guarantee_and_is_deterministic():
    inst = generate("matrix-random-metric", 10, 6, k=2, r=1.0, seed=7)
    cfg = SolverConfig(epsilon=0.5, repetitions=30, seed=3)
    a = solve(inst.space, 2, 1.0, 0.5, cfg)
    b = solve(inst.space, 2, 1.0, 0.5, cfg)
    assert a.solution.centers == b.solution.centers and a.cost == b.cost
    assert a.report == b.report
    opt = brute_force(inst.space, 2, 1.0).opt_cost
    assert cost(inst.space, None, a.solution, 1.5) <= 1.5 * opt + 1e-9
    # run-level post: cost at r' within (1 + eps) G
    assert a.best.cost <= 1.5 * a.best.G * (1 + 1e-12)


def test_workers_do_not_change_result():
    inst = generate("euclidean-uniform", 9, 5, k=2, r=0.5, seed=1)
    one = solve(inst.space, 2, 0.5, 0.5, SolverConfig(epsilon=0.5, repetitions=10))
    two = solve(inst.space, 2, 0.5, 0.5, SolverConfig(epsilon=0.5, repetitions=10, workers=2))
    assert one.report == two.report and one.solution.centers == two.solution.centers


def test_no_solution_found():
    inst = generate("euclidean-uniform", 9, 5, k=2, r=0.5, seed=1)
    opt = brute_force(inst.space, 2, 0.5).opt_cost
    with pytest.raises(NoSolutionFound) as exc:
        solve(inst.space, 2, 0.5, 0.5, SolverConfig(epsilon=0.5, repetitions=3, guess=opt / 10))
    assert exc.value.report["per_guess"][0]["successes"] == 0


def test_continuous_backend_solves():
    rng = np.random.default_rng(0)
    P = np.vstack([rng.normal(0, 0.3, (6, 2)), rng.normal(5, 0.3, (6, 2))])
    space = MetricSpace.euclidean(P)
    res = solve(space, 2, 0.2, 0.5, SolverConfig(epsilon=0.5, repetitions=20))
    assert len(res.solution) <= 2
    assert all(isinstance(c, np.ndarray) for c in res.solution.centers)
    grid = [[x, y] for x in np.linspace(-1, 6, 36) for y in np.linspace(-1, 6, 36)]
    surrogate = brute_force(space, 2, 0.2, candidates=grid).opt_cost
    assert res.cost <= 1.5 * surrogate * 1.5  # loose: the grid optimum is only an upper surrogate


@given(st.integers(3, 10), st.integers(2, 6), st.integers(1, 3), st.integers(0, 10**5))
def test_request_sets_grow_and_centers_satisfy_requests(n, m, k, seed):
    inst = generate("euclidean-uniform", n, m, k=k, r=0.5, seed=seed)
    opt = brute_force(inst.space, k, 0.5).opt_cost
    if opt <= 0:
        return
    u = compute_upper_bounds(inst.space, opt, 0.5)
    marked = greedy_mark(inst.space, u)
    assert len(marked) <= k
    st_ = initialize(inst.space, marked, u, k, 0.5, seed=seed)
    sizes = [len(q) for q in st_.Q]
    for _ in range(6):
        if not st_.centers or cost(inst.space, None, st_.centers, 0.5 * (1 + 0.5 / 3)) <= 1.5 * opt:
            break
        try:
            iterate(st_, inst.space, k, 0.5, 0.5, opt)
        except RunFailure:
            break
        new = [len(q) for q in st_.Q]
        assert all(b >= a for a, b in zip(sizes, new)) and sum(new) == sum(sizes) + 1
        sizes = new
    for x, Q in zip(st_.X, st_.Q):
        if x is None:
            continue
        d = inst.space.client_facility[Q.points, x]
        assert np.all(d <= Q.radii * (1 + 0.5 / 40) * (1 + 1e-9) + 1e-9)


def test_scatter_diagnostics_flags_out_of_range():
    trace = [
        {"branch": "nearby", "index": 0, "delta": 1.5, "accepted": True},
        {"branch": "nearby", "index": 0, "delta": 100.0, "accepted": True},
        {"branch": "faraway", "index": 1, "delta": 0.1, "accepted": True},
        {"branch": "faraway", "index": 1, "delta": 0.1, "accepted": False},
    ]
    rep = scatter_diagnostics(trace, 0.5, 2, 1.0)
    assert rep["violations"] == 2
    assert rep["clusters"][0]["length"] == 2


def test_threads_from_env(monkeypatch):
    monkeypatch.setenv("HYBRID_THREADS", "3")
    assert threads_from_env() == 3
    monkeypatch.delenv("HYBRID_THREADS")
    assert threads_from_env(1) == 1


def test_zero_guess_only_when_opt_can_vanish():
    from hybridclust.solver import zero_guess

    space = line([0, 1, 10], [0.5, 10])
    assert zero_guess(space, 0.5, 0.6, 1.0, 0.3) == pytest.approx(8.4 / 2.6)
    assert zero_guess(space, 0.1, 0.12, 1.0, 0.3) is None  # client 0 has no facility within r
    assert zero_guess(line([0, 1]), 1.0, 1.2, 1.0, 0.3) is None


@given(st.integers(3, 10), st.integers(2, 6), st.integers(1, 3), st.sampled_from([0.0, 0.6]),
       st.integers(0, 10**5))
def test_initial_requests_consistent_with_optimum(n, m, k, r, seed):
    from hybridclust.oracle import consistent_labeling

    inst = generate("matrix-random-metric", n, m, k=k, r=r, seed=seed)
    ores = brute_force(inst.space, k, r)
    if ores.opt_cost <= 0:
        return
    u = compute_upper_bounds(inst.space, ores.opt_cost, r)
    state = initialize(inst.space, greedy_mark(inst.space, u), u, k, 0.5, seed=seed)
    assert consistent_labeling(inst.space, state.Q, ores.opt_solution) is not None


def test_numpy_fallback_matches_numba(tmp_path):
    import json
    import os
    import subprocess
    import sys

    code = ("import json\n"
            "from hybridclust.gen import generate\n"
            "from hybridclust.solver import solve, SolverConfig\n"
            "i = generate('euclidean-uniform', 10, 6, k=2, r=0.5, seed=2)\n"
            "res = solve(i.space, 2, 0.5, 0.5, SolverConfig(epsilon=0.5, repetitions=15))\n"
            "print(json.dumps(res.to_json(), sort_keys=True))\n")
    outs = []
    for flag in ("0", "1"):
        env = {**os.environ, "HYBRIDCLUST_DISABLE_NUMBA": flag}
        res = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env, check=True)
        outs.append(json.loads(res.stdout))
    assert outs[0] == outs[1]
