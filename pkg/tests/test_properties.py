import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ompr.algorithms import AlgorithmConfig, run_omprl, run_two_stage, traces_identical
from ompr.ensemble import make_problem, perturbed_identity, sparse_signal
from ompr.linalg import least_squares_on_support, rip_constant_exhaustive
from ompr.thresholding import partial_hard_threshold

from oracles import brute_force_pht

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def pht_case(draw):
    n = draw(st.integers(2, 8))
    k = draw(st.integers(1, n - 1))
    l = draw(st.integers(1, k))
    z = draw(arrays(np.float64, n, elements=finite))
    I = draw(st.permutations(range(n)))[:k]
    return z, np.sort(I), l, k


@settings(max_examples=200, deadline=None)
@given(pht_case())
def test_pht_is_optimal(case):
    z, I, l, k = case
    res = partial_hard_threshold(z, I, l, k)
    assert abs(np.linalg.norm(res.y - z) - brute_force_pht(z, I, l, k)) <= 1e-9


@settings(max_examples=200, deadline=None)
@given(pht_case())
def test_pht_structure(case):
    z, I, l, k = case
    res = partial_hard_threshold(z, I, l, k)
    S = set(res.support.tolist())
    assert len(S) == k and len(S - set(I)) <= l
    assert set(res.found) == S - set(I) and set(res.lost) == set(I) - S
    assert len(res.found) == len(res.lost)
    mag = np.abs(z)
    # every kept entry beats every dropped entry of I
    if res.lost.size:
        assert mag[res.support].min() >= mag[res.lost].max()
    # a new index only enters ahead of every outside index left behind
    left = np.setdiff1d(np.setdiff1d(np.arange(len(z)), I), res.found)
    if res.found.size and left.size:
        assert mag[res.found].min() >= mag[left].max()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 12), st.integers(1, 3))
def test_least_squares_residual_orthogonal(seed, m, k):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, m + 5))
    b = rng.standard_normal(m)
    I = np.sort(rng.choice(m + 5, size=k, replace=False))
    x = least_squares_on_support(A, b, I)
    g = A[:, I].T @ (b - A @ x)
    assert np.max(np.abs(g)) <= 1e-9 * (1 + np.linalg.norm(A) * np.linalg.norm(b))
    assert not np.any(np.delete(x, I))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_rip_bound_holds_for_sparse_vectors(seed, s):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((6, 9))
    A /= np.linalg.norm(A, axis=0)
    delta = rip_constant_exhaustive(A, s).delta
    for _ in range(20):
        x = np.zeros(9)
        x[rng.choice(9, size=s, replace=False)] = rng.standard_normal(s)
        ratio = np.linalg.norm(A @ x) ** 2 / np.linalg.norm(x) ** 2
        assert ratio >= 1 - delta - 1e-12
        if delta < 1:  # the reported constant is clipped to [0, 1]
            assert ratio <= 1 + delta + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 2), st.floats(0.2, 0.99))
def test_monotone_decrease_under_step_condition(seed, l, frac):
    A = perturbed_identity(10, 0.1, seed)
    d2l = rip_constant_exhaustive(A, 2 * l).delta
    eta = frac / (1 + d2l)
    x, _ = sparse_signal(10, 3, seed)
    b = A @ x + 0.05 * np.random.default_rng(seed).standard_normal(10)
    cfg = AlgorithmConfig(k=3, l=l, eta=eta, init="random", seed=seed, tol=0.0, max_iters=50)
    _, trace = run_omprl(A, b, cfg)
    f = trace.objectives
    assert np.all(np.diff(f) <= 1e-12 * (1 + f[:-1]))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["ompr_l", "two_stage"]))
def test_runs_are_deterministic(seed, family):
    p = make_problem(20, 50, 3, seed=seed, noise_level=0.1)
    cfg = AlgorithmConfig(family=family, k=3, l=2, init="random", seed=seed)
    runner = run_two_stage if family == "two_stage" else run_omprl
    _, t1 = runner(p.A, p.b, cfg)
    _, t2 = runner(p.A.copy(), p.b.copy(), cfg)
    assert traces_identical(t1, t2)
