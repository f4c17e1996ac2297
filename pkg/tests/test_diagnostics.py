import io
import math

import numpy as np
import pytest

from ompr.algorithms import AlgorithmConfig, run_omprl, run_two_stage, state_on_support
from ompr.diagnostics import (RipContext, admissible_step_sizes, check_ompr_iteration,
                              check_two_stage_iteration, diagnose_trace, diagnostics_rows,
                              write_diagnostics_csv)
from ompr.ensemble import (MeasurementProblem, gaussian_matrix, make_problem,
                           perturbed_identity, sparse_signal)
from ompr.errors import BadArguments

BOUND_CHECKS = ("claim1_gap", "flb_lower", "flb_upper", "claim2_found_nonempty",
                "claim2_decrease")


def _problem(A, seed, k):
    x, sup = sparse_signal(A.shape[1], k, seed)
    return MeasurementProblem(A=A, b=A @ x, x_true=x, support=sup, seed=seed)


def test_converged_input_skips_everything():
    p = make_problem(10, 20, 2, seed=0)
    cfg = AlgorithmConfig(k=2, l=1, eta=0.9)
    state, trace = run_omprl(p.A, p.b, cfg, init=p.support)
    rip = RipContext(delta_2k=0.1, delta_2l=0.1)
    d = check_ompr_iteration(p, state, state, cfg, rip)
    assert "converged" in d.note
    assert all(c.status == "skip" for c in d.checks if c.name != "set_balance")


def test_identity_decrease_bound_is_non_increase():
    A = np.eye(6)
    p = _problem(A, seed=1, k=2)
    cfg = AlgorithmConfig(k=2, l=1, eta=1.0)
    rip = RipContext.exhaustive(A, 2, 1)
    assert rip.delta_2l == 0.0 and rip.delta_2k == 0.0
    wrong = np.setdiff1d(np.arange(6), p.support)[:2]
    _, trace = run_omprl(A, p.b, cfg, init=wrong)
    diags = diagnose_trace(p, cfg, trace, rip)
    assert diags
    for d in diags:
        (c,) = [c for c in d.checks if c.name == "decrease_bound"]
        if c.status != "skip":
            assert c.status == "hold" and c.slack >= 0
            assert d.f_y - d.f_before <= 1e-15


def test_gaussian_8x12_all_applicable_checks_hold():
    A = gaussian_matrix(8, 12, seed=13)
    cfg_l = AlgorithmConfig(k=2, l=1, eta=0.9, init="random", tol=0.0)
    rip = RipContext.exhaustive(A, 2, 1)
    held = 0
    for seed in range(50):
        p = _problem(A, seed, 2)
        cfg = AlgorithmConfig(**{**cfg_l.__dict__, "seed": seed})
        _, trace = run_omprl(A, p.b, cfg)
        for d in diagnose_trace(p, cfg, trace, rip):
            for c in d.checks:
                assert c.status != "fail", (seed, d.iteration, c)
                if c.status == "hold":
                    assert c.slack >= -1e-9
                    held += 1
    assert held > 0


def test_gated_bounds_are_exercised_and_hold():
    counts = {name: 0 for name in BOUND_CHECKS}
    for seed in range(30):
        A = perturbed_identity(12, 0.08, seed)
        p = _problem(A, seed, 2)
        for l in (1, 2):
            rip = RipContext.exhaustive(A, 2, l)
            for eta in (0.7, 0.9):
                cfg = AlgorithmConfig(k=2, l=l, eta=eta, init="random", seed=seed, tol=0.0)
                _, trace = run_omprl(A, p.b, cfg)
                for d in diagnose_trace(p, cfg, trace, rip):
                    for c in d.checks:
                        assert c.status != "fail", (seed, l, eta, c)
                        if c.name in counts and c.status == "hold":
                            counts[c.name] += 1
    assert all(v > 0 for v in counts.values()), counts


def test_understated_rip_is_caught():
    # with a falsely small delta_2l the decrease bound must eventually be violated
    fails = 0
    for seed in range(40):
        p = make_problem(10, 30, 3, seed=seed)
        cfg = AlgorithmConfig(k=3, l=3, eta=1.0, init="random", seed=seed, tol=0.0)
        _, trace = run_omprl(p.A, p.b, cfg)
        diags = diagnose_trace(p, cfg, trace, RipContext(delta_2l=0.0, delta_2k=0.0))
        fails += sum(c.status == "fail" for d in diags for c in d.checks)
    assert fails > 0


def test_noisy_data_skips_noiseless_bounds():
    A = perturbed_identity(10, 0.05, seed=2)
    x, sup = sparse_signal(10, 2, 2)
    e = 0.01 * np.ones(10)
    p = MeasurementProblem(A=A, b=A @ x + e, x_true=x, support=sup, noise=e)
    cfg = AlgorithmConfig(k=2, l=1, eta=0.9, init="random", seed=5, tol=0.0)
    _, trace = run_omprl(A, p.b, cfg)
    for d in diagnose_trace(p, cfg, trace, RipContext.exhaustive(A, 2, 1)):
        for c in d.checks:
            if c.name in BOUND_CHECKS:
                assert c.status == "skip"


def test_sets_partition_and_balance():
    p = make_problem(12, 30, 3, seed=3)
    cfg = AlgorithmConfig(k=3, l=1, eta=1.0, init="random", seed=3, tol=0.0)
    _, trace = run_omprl(p.A, p.b, cfg)
    for d, i in zip(diagnose_trace(p, cfg, trace, RipContext()), range(len(trace.snapshots))):
        I = set(trace.snapshots[i].support)
        star = set(p.support)
        assert set(d.md) | set(d.co) == star and set(d.fa) | set(d.co) == I
        assert not set(d.md) & set(d.fa)
        assert len(d.md) == len(d.fa)


def test_requires_truth_and_consecutive_states():
    p = make_problem(10, 20, 2, seed=4)
    cfg = AlgorithmConfig(k=2, l=1, init="random", seed=1)
    _, trace = run_omprl(p.A, p.b, cfg)
    s0 = trace.state(0, p.A, p.b)
    with pytest.raises(BadArguments):
        check_ompr_iteration(MeasurementProblem(A=p.A, b=p.b), s0, s0, cfg, RipContext())
    # with l = 1 at most one index can enter, so two fresh indices are never a successor
    fresh = np.setdiff1d(np.arange(20), s0.support)[:2]
    bogus = state_on_support(p.A, p.b, fresh, s0.iteration + 1)
    with pytest.raises(BadArguments):
        check_ompr_iteration(p, s0, bogus, cfg, RipContext())


def test_two_stage_empty_md_bound():
    p = make_problem(20, 30, 2, seed=1)
    cfg = AlgorithmConfig(family="two_stage", k=2, l=2)
    _, trace = run_two_stage(p.A, p.b, cfg, init=p.support)
    s = trace.state(0, p.A, p.b)
    d = check_two_stage_iteration(p, s, s, cfg, RipContext(delta_2kl=0.1))
    assert d.md.size == 0
    assert all(c.status != "fail" for c in d.checks)


def test_two_stage_gate_passes_on_near_isometry():
    checked = 0
    for seed in range(40):
        A = perturbed_identity(12, 0.08, seed)
        rip = RipContext.exhaustive(A, 2, 2)
        if rip.delta_2kl is None or rip.delta_2kl > 0.35:
            continue
        p = _problem(A, seed, 2)
        cfg = AlgorithmConfig(family="two_stage", k=2, l=2, init="random", seed=seed, tol=0.0)
        _, trace = run_two_stage(A, p.b, cfg)
        for d in diagnose_trace(p, cfg, trace, rip):
            (c,) = [c for c in d.checks if c.name == "two_stage_decrease"]
            assert c.status != "fail"
            checked += c.status == "hold"
    assert checked > 0


def test_two_stage_gate_skips_large_delta():
    p = make_problem(12, 20, 2, seed=0)
    cfg = AlgorithmConfig(family="two_stage", k=2, l=2, init="random", seed=0, tol=0.0)
    _, trace = run_two_stage(p.A, p.b, cfg)
    diags = diagnose_trace(p, cfg, trace, RipContext(delta_2kl=0.6))
    for d in diags:
        (c,) = [c for c in d.checks if c.name == "two_stage_decrease"]
        assert c.status == "skip"


def test_two_stage_needs_binary_truth():
    A = perturbed_identity(8, 0.05, 0)
    x = np.zeros(8)
    x[[1, 5]] = [0.5, 2.0]
    p = MeasurementProblem(A=A, b=A @ x, x_true=x, support=np.array([1, 5]))
    cfg = AlgorithmConfig(family="two_stage", k=2, l=2, init="random")
    _, trace = run_two_stage(A, p.b, cfg)
    s = trace.state(0, A, p.b)
    with pytest.raises(BadArguments):
        check_two_stage_iteration(p, s, s, cfg, RipContext())


def test_admissible_step_sizes():
    assert admissible_step_sizes(RipContext(delta_2k=0.0, delta_2l=0.0)) == (0.5, 1.0)
    lo, hi = admissible_step_sizes(RipContext(delta_2k=0.499, delta_2l=0.0))
    assert lo == pytest.approx(0.998, abs=1e-3) and hi == 1.0 and lo < hi
    assert admissible_step_sizes(RipContext(delta_2k=0.6, delta_2l=0.0)) is None
    assert admissible_step_sizes(RipContext(delta_2k=1.0, delta_2l=0.0)) is None
    with pytest.raises(BadArguments):
        admissible_step_sizes(RipContext(delta_2k=0.1))


def test_rip_context_range():
    with pytest.raises(BadArguments):
        RipContext(delta_2k=1.5)
    rip = RipContext.exhaustive(gaussian_matrix(5, 60, 0), 6, 6)
    assert rip.delta_2k is None and rip.delta_2 is not None


def test_diagnostics_csv():
    A = perturbed_identity(10, 0.1, 1)
    p = _problem(A, 1, 2)
    cfg = AlgorithmConfig(k=2, l=1, eta=0.9, init="random", seed=1, tol=0.0)
    _, trace = run_omprl(A, p.b, cfg)
    diags = diagnose_trace(p, cfg, trace, RipContext.exhaustive(A, 2, 1))
    buf = io.StringIO()
    write_diagnostics_csv(buf, diagnostics_rows(77, diags))
    lines = buf.getvalue().splitlines()
    assert lines[0] == "trial_seed,iter,check_name,status,slack"
    for line in lines[1:]:
        seed, it, name, status, slack = line.split(",")
        assert seed == "77" and status in ("hold", "fail", "skip")
        assert (slack == "") == (status == "skip")
        if slack:
            assert math.isfinite(float(slack))
    assert len(lines) - 1 == sum(len(d.checks) for d in diags)
