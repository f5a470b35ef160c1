import math

import numpy as np
import pytest

from qtherm.bloch import closed_rabi_probabilities
from qtherm.config import FeedbackConfig
from qtherm.ensemble import run_ensemble
from qtherm.experiments import run_efficacy_protocol
from qtherm.sme import simulate_trajectory
from qtherm.stats import (
    InsufficientSpanError,
    WorkDistribution,
    ZeroVarianceError,
    accumulate,
    binned_first_law_check,
    efficacy_from_trajectories,
    first_law_residual,
    jarzynski_average,
    jarzynski_from_transitions,
    pearson_r,
    pooled_pearson_r,
    rabi_contrast,
    transition_probabilities,
    two_point_work_distribution,
)


def test_accumulate_zero_length(paper_cfg):
    rec = simulate_trajectory(paper_cfg(tau=0.0))
    ledger = accumulate(rec, m=0)
    assert (ledger.p_w, ledger.p_q, ledger.p_f) == (0.0, 0.0, 0.0)
    assert ledger.p_total == 1.0
    assert ledger.p_initial == 1.0


def test_accumulate_closed_full_flip(paper_cfg):
    # omega_r * tau = pi: P~W(m=0) = -1, heat-free, P(tau) = 0.
    cfg = paper_cfg(gamma=0.0, eta=0.0, tau=0.5)
    rec = simulate_trajectory(cfg)
    ledger = accumulate(rec, m=0)
    assert ledger.p_w == pytest.approx(-1.0, abs=1e-12)
    assert ledger.p_q == pytest.approx(0.0, abs=1e-12)
    assert ledger.p_total == pytest.approx(0.0, abs=1e-12)
    assert ledger.decomposition_residual() < 1e-9


def test_accumulate_decomposition_identity(paper_cfg):
    fb = FeedbackConfig(mode="phase_locked", gain=34.0, offset=-1.0, delay_steps=5)
    for seed in range(8):
        rec = simulate_trajectory(paper_cfg(tau=2.0, seed=seed), fb)
        for m in (0, 1):
            assert accumulate(rec, m).decomposition_residual() < 1e-9
    with pytest.raises(ValueError):
        accumulate(rec, m=2)


def test_first_law_residual(paper_cfg):
    rec = simulate_trajectory(paper_cfg(tau=2.0, seed=3))
    assert first_law_residual(rec) < 1e-9


def test_transition_probabilities_zero_duration(paper_cfg):
    res = run_ensemble(paper_cfg(tau=0.0), n_traj=50)
    p, sem = transition_probabilities(res, m=0, n=0)
    assert p == 1.0 and sem == 0.0


def test_transition_probabilities_closed(paper_cfg):
    cfg = paper_cfg(gamma=0.0, eta=0.0, tau=0.7)
    res = run_ensemble(cfg, n_traj=10)
    want = closed_rabi_probabilities(cfg.omega_r / 2.0, cfg.tau).p00
    p, _ = transition_probabilities(res, m=0, n=0)
    assert p == pytest.approx(want, abs=1e-9)


def test_transition_probabilities_sampled_agrees(paper_cfg):
    cfg = paper_cfg(tau=1.0, sample_final=True, seed=5)
    res = run_ensemble(cfg, n_traj=4000)
    p_state, _ = transition_probabilities(res, m=0, n=0)
    p_samp, sem = transition_probabilities(res, m=0, n=0, sampled=True)
    assert abs(p_samp - p_state) < 4.0 * sem
    with pytest.raises(ValueError):
        transition_probabilities(res, m=0, n=1)


def test_two_point_work_distribution_weights():
    wd = two_point_work_distribution(0.0, [[0.5, 0.5], [0.5, 0.5]])
    assert wd.probabilities.sum() == pytest.approx(1.0)
    assert wd.probabilities[0] == pytest.approx(0.25)  # W = -1
    wd = two_point_work_distribution(3.5, [[1.0, 0.0], [0.0, 1.0]])
    assert wd.probabilities[1] == pytest.approx(1.0)  # W = 0
    with pytest.raises(ValueError):
        two_point_work_distribution(3.5, [[0.9, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        WorkDistribution(np.array([0.0]), np.array([-0.2, 1.2]), 1.0)


def test_jarzynski_closed_identity_on_tau_grid():
    # For closed Rabi transitions the average is 1 for every duration:
    # (1 - s) + s * (p_g e^-b + p_e e^+b) = 1 algebraically.
    beta = 3.5
    for tau in np.linspace(0.0, 2.5, 10):
        t = closed_rabi_probabilities(math.pi, tau).as_matrix()
        wd = two_point_work_distribution(beta, t)
        assert jarzynski_average(wd) == pytest.approx(1.0, abs=1e-12)


def test_jarzynski_symmetric_transitions_any_s():
    beta = 3.5
    for s in (0.0, 0.2, 0.5, 0.9):
        wd = two_point_work_distribution(beta, [[1 - s, s], [s, 1 - s]])
        assert jarzynski_average(wd) == pytest.approx(1.0, abs=1e-12)
    wd = two_point_work_distribution(0.0, [[0.7, 0.3], [0.1, 0.9]])
    assert jarzynski_average(wd) == pytest.approx(1.0, abs=1e-12)


def test_efficacy_identity_map():
    # A unital trajectory map (excited series mirroring ground) has unit
    # efficacy at all times.
    times = np.linspace(0.0, 1.0, 21)
    p_g = 0.5 + 0.5 * np.cos(2 * math.pi * times)
    g = np.tile(p_g, (40, 1))
    e = 1.0 - g
    res = efficacy_from_trajectories(g, e, beta=3.5, times=times, n_boot=50)
    assert np.allclose(res.gamma_q, 1.0, atol=1e-12)
    assert res.gamma_q[0] == 1.0
    assert np.allclose(res.c00 + res.c11, 2.0, atol=1e-12)


def test_efficacy_decayed_map_value():
    # Everything relaxed to the ground state: C00 = 2, so
    # gamma_q = 2 e^{b/2} / (2 cosh(b/2)) = 1 + tanh(b/2).
    beta = 3.5
    g = np.ones((30, 5))
    e = np.ones((30, 5))
    res = efficacy_from_trajectories(g, e, beta=beta, n_boot=50)
    assert np.allclose(res.gamma_q, 1.0 + math.tanh(beta / 2.0), atol=1e-12)


def test_efficacy_shape_validation():
    with pytest.raises(ValueError):
        efficacy_from_trajectories(np.ones((3, 4)), np.ones((3, 5)), 3.5)
    with pytest.raises(ValueError):
        efficacy_from_trajectories(np.ones(4), np.ones(4), 3.5)


def test_two_efficacy_routes_agree(paper_cfg):
    # Trajectory-route (state averages) and work-distribution route (sampled
    # projective outcomes) on the same run agree within combined errors at
    # 0.1 us checkpoints.
    cfg = paper_cfg(tau=1.0, dt=0.005, scheme="kraus", seed=19)
    fb = FeedbackConfig(mode="optimal")
    prot = run_efficacy_protocol(cfg, fb, n_traj=300, n_boot=300)
    comb = np.arange(20, cfg.n_steps + 1, 20)
    sem = np.hypot(prot.trajectory_route.stderr[comb], prot.wd_route_stderr[comb])
    diff = np.abs(prot.trajectory_route.gamma_q[comb] - prot.wd_route_gamma[comb])
    assert (diff < 3.0 * sem).all()


def test_jarzynski_from_transitions_formula():
    beta = 3.5
    gamma, err = jarzynski_from_transitions(
        np.array([1.0, 0.5]), np.array([1.0, 0.5]), beta, 100, 100
    )
    assert gamma[0] == pytest.approx(1.0, abs=1e-12)
    assert gamma[1] == pytest.approx(1.0, abs=1e-12)  # symmetric transitions
    assert err[0] == 0.0 and err[1] > 0.0


def test_rabi_contrast_closed_and_flat():
    omega = 2.0 * math.pi
    t = np.arange(0, 401) * 0.02
    closed = 0.5 + 0.5 * np.cos(omega * t)
    assert rabi_contrast(t, closed, omega) == pytest.approx(1.0, abs=1e-9)
    assert rabi_contrast(t, np.full_like(t, 0.5), omega) == pytest.approx(
        0.0, abs=1e-12
    )
    with pytest.raises(InsufficientSpanError):
        rabi_contrast(t, closed, omega, window=(2.0, 3.0))
    with pytest.raises(InsufficientSpanError):
        rabi_contrast(t, closed, omega, window=(9.0, 12.0))


def test_pearson_r_basics():
    rng = np.random.default_rng(8)
    a = rng.normal(size=500)
    assert pearson_r(a, a) == pytest.approx(1.0)
    assert pearson_r(a, -a) == pytest.approx(-1.0)
    with pytest.raises(ZeroVarianceError):
        pearson_r(np.ones(10), rng.normal(size=10))
    with pytest.raises(ValueError):
        pearson_r(a, a[:-1])


def test_pearson_r_lag_alignment():
    rng = np.random.default_rng(9)
    b = rng.normal(size=2000)
    a = np.roll(b, 3)  # a[i] = b[i-3]: a lags b by 3 steps
    assert pearson_r(a, b, lag=3) > 0.99
    assert abs(pearson_r(a, b, lag=0)) < 0.1


def test_pooled_pearson_r_shapes():
    rng = np.random.default_rng(10)
    q = rng.normal(size=(20, 100))
    wf = -q + 0.3 * rng.normal(size=(20, 100))
    r = pooled_pearson_r(wf, q)
    assert r < -0.9
    with pytest.raises(ValueError):
        pooled_pearson_r(wf, q[:, :-1])


def test_binned_first_law_check_synthetic():
    rng = np.random.default_rng(12)
    s = rng.uniform(0, 1, 20000)
    outcomes = (rng.random(20000) < s).astype(float)
    pred, freq, err, chi2 = binned_first_law_check(s, outcomes)
    assert chi2 < 2.0
    assert np.all(np.abs(pred - freq) < 5.0 * err)
