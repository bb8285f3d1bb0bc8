import dataclasses
import itertools

import numpy as np
import pytest

from attitude_consensus.controllers import AgentState, ControllerGains
from attitude_consensus.diagnostics import (
    certificate_pairs,
    consensus_metrics,
    diagnostics_series,
    lyapunov_v1,
    lyapunov_v2_pair,
    monotonicity_report,
    sample_at,
    time_to_consensus,
)
from attitude_consensus.graph import CommGraph, path_graph, reference_chain
from attitude_consensus.lie import exp_so3, log_so3
from attitude_consensus.simulator import ReferenceTrajectory, ScenarioConfig, run_scenario
from attitude_consensus.tracking_error import psi

from conftest import J_BENCH, bench_initial_state, random_rotations


def test_v1_examples():
    g = path_graph(2)
    gains = ControllerGains(1.0, 1.0)
    R = np.array([np.eye(3), exp_so3([0, 0, np.pi])])
    assert lyapunov_v1(R, np.zeros((2, 3)), g, gains, np.eye(3)) == pytest.approx(2.0)
    R = np.repeat(exp_so3([0.3, 0.1, 0])[None], 2, 0)
    assert lyapunov_v1(R, np.zeros((2, 3)), g, gains, J_BENCH) == pytest.approx(0.0, abs=1e-15)
    lone = CommGraph.from_edges(1, [])
    w = np.array([[0.1, 0.2, 0.3]])
    g2 = ControllerGains(1.0, 1.0, alpha=2.0)
    assert lyapunov_v1(np.eye(3)[None], w, lone, g2, J_BENCH) == pytest.approx(w[0] @ J_BENCH @ w[0])
    with pytest.raises(ValueError):
        lyapunov_v1(R, np.zeros((2, 3)), reference_chain(1), gains, J_BENCH)


def test_v1_zero_iff_consensus_at_rest(rng):
    g = path_graph(4)
    gains = ControllerGains(1.0, 1.0)
    for _ in range(20):
        R = random_rotations(rng, 4)
        w = rng.normal(size=(4, 3))
        assert lyapunov_v1(R, w, g, gains, J_BENCH) > 0
        assert lyapunov_v1(R, np.zeros((4, 3)), g, gains, J_BENCH) > 0
        same = np.repeat(R[:1], 4, 0)
        assert lyapunov_v1(same, w, g, gains, J_BENCH) > 0
        assert lyapunov_v1(same, np.zeros((4, 3)), g, gains, J_BENCH) < 1e-14


def test_v1_broadcasts_over_time(rng):
    g = path_graph(3)
    gains = ControllerGains(2.0, 1.0, alpha=[1.0, 2.0, 3.0])
    R = random_rotations(rng, 15).reshape(5, 3, 3, 3)
    w = rng.normal(size=(5, 3, 3))
    v = lyapunov_v1(R, w, g, gains, J_BENCH)
    for k in range(5):
        expected = 2.0 * sum(psi(R[k, i], R[k, i + 1]) for i in range(2))
        expected += 0.5 * sum(a * w[k, i] @ J_BENCH @ w[k, i] for i, a in enumerate([1.0, 2.0, 3.0]))
        assert v[k] == pytest.approx(expected, rel=1e-12)


def test_v2_pair_examples(rng):
    gains = ControllerGains(3.0, 1.0)
    R = random_rotations(rng, 2)
    w = rng.normal(size=(2, 3))
    assert lyapunov_v2_pair(AgentState(R[0], w[0]), AgentState(R[0], w[0]), gains, J_BENCH) == pytest.approx(0, abs=1e-13)
    s = np.array([0.1, -0.2, 0.3])
    v = lyapunov_v2_pair(AgentState(R[0], w[0] + s), AgentState(R[0], w[0]), gains, J_BENCH, alpha=2.0)
    assert v == pytest.approx(s @ J_BENCH @ s)
    # term-by-term oracle
    Rkl = R[1].T @ R[0]
    g = 0.5 * np.array([Rkl[2, 1] - Rkl[1, 2], Rkl[0, 2] - Rkl[2, 0], Rkl[1, 0] - Rkl[0, 1]])
    sig = w[0] - Rkl.T @ w[1] + 3.0 * np.linalg.solve(J_BENCH, g)
    expected = 3.0 * 0.5 * np.trace(np.eye(3) - Rkl) + 0.5 * 1.5 * sig @ J_BENCH @ sig
    v = lyapunov_v2_pair(AgentState(R[0], w[0]), AgentState(R[1], w[1]), gains, J_BENCH, alpha=1.5)
    assert v == pytest.approx(expected, rel=1e-12)


def test_certificate_pairs():
    assert certificate_pairs(path_graph(4)) == [(0, 1), (3, 2)]
    assert certificate_pairs(reference_chain(3)) == [(0, 3), (1, 0), (2, 1)]


def test_consensus_metrics_examples(rng):
    R = np.repeat(random_rotations(rng, 1), 3, 0)
    w = np.zeros((3, 3))
    assert consensus_metrics(R, w) == (0.0, 0.0, 0.0)
    R = np.array([np.eye(3), exp_so3([0, 0, 0.1])])
    p, a, v = consensus_metrics(R, np.zeros((2, 3)))
    assert a == pytest.approx(0.1)
    assert p == pytest.approx(1 - np.cos(0.1))
    with pytest.raises(ValueError):
        consensus_metrics(R[:1], np.zeros((1, 3)))


def test_consensus_metrics_brute_force(rng):
    R = random_rotations(rng, 3)
    w = rng.normal(size=(3, 3))
    P = [1.0, 2.0, 0.5]
    best = [0.0, 0.0, 0.0]
    for i, j in itertools.permutations(range(3), 2):
        Rij = R[j].T @ R[i]
        best[0] = max(best[0], 0.5 * np.trace(np.diag(P) @ (np.eye(3) - Rij)))
        best[1] = max(best[1], np.linalg.norm(log_so3(Rij)))
        best[2] = max(best[2], np.linalg.norm(w[i] - Rij.T @ w[j]))
    np.testing.assert_allclose(consensus_metrics(R, w, P), best, rtol=1e-12)


def test_angle_zero_iff_psi_zero(rng):
    for _ in range(20):
        R = random_rotations(rng, 2)
        p, a, _ = consensus_metrics(R, np.zeros((2, 3)))
        assert (p > 0) and (a > 0)
    p, a, _ = consensus_metrics(np.repeat(R[:1], 2, 0), np.zeros((2, 3)))
    assert p == 0 and a == 0


def _short_log(objective="I", **kw):
    R0, W0 = bench_initial_state()
    graph = reference_chain(4) if objective == "III" else path_graph(4)
    gains = ControllerGains(1.0, 2.0) if objective == "I" else ControllerGains(20.0, 10.0)
    cfg = ScenarioConfig(objective, graph, gains, R0, W0, duration=0.5,
                         reference=ReferenceTrajectory() if objective == "III" else None, **kw)
    return run_scenario(cfg)


def test_monotonicity_on_simulated_runs():
    assert monotonicity_report(_short_log("I"), "V1") == []
    assert monotonicity_report(_short_log("II"), "V2") == []
    assert monotonicity_report(_short_log("III"), "V2") == []


def test_monotonicity_negative_control():
    log = _short_log("I")
    omega = log.omega.copy()
    omega[100] *= 3.0
    bad = dataclasses.replace(log, omega=omega)
    report = monotonicity_report(bad, "V1")
    assert [v.step for v in report] == [100]
    assert report[0].increase > report[0].tolerance
    with pytest.raises(ValueError):
        monotonicity_report(log, "V2")
    with pytest.raises(ValueError):
        monotonicity_report(log, "V3")


def test_constant_consensus_log_has_no_violations():
    R = np.repeat(exp_so3([0.2, 0.1, -0.3])[None], 4, 0)
    cfg = ScenarioConfig("I", path_graph(4), ControllerGains(1.0, 2.0), R, np.zeros((4, 3)), duration=0.1)
    log = run_scenario(cfg)
    assert monotonicity_report(log, "V1") == []
    series = diagnostics_series(log)
    assert np.all(series["max_pairwise_psi"] < 1e-14)


def test_series_and_samples():
    log = _short_log("III")
    s = diagnostics_series(log)
    assert s["sigma_norm"].shape == (len(log.t), 4)
    assert {"tracking_angle", "tracking_rate"} <= set(s)
    d = sample_at(s, 10)
    assert d.t == pytest.approx(0.01)
    assert d.V1 is None and d.sigma_norm.shape == (4,)
    assert np.isfinite(d.tracking_angle)
    s1 = diagnostics_series(_short_log("I"))
    assert np.all(s1["V1"] >= 0) and "sigma_norm" not in s1


def test_time_to_consensus():
    t = np.linspace(0, 1, 11)
    angle = np.linspace(1.0, 0.0, 11)
    assert time_to_consensus(t, angle, 0.45) == pytest.approx(0.6)
    assert time_to_consensus(t, angle + 1, 0.5) is None
