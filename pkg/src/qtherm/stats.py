"""Thermodynamic observables aggregated from trajectory ledgers.

The per-step engine ledger records energy increments in the m=1 (excited
projector) convention; since Pi_0 = 1 - Pi_1, the same sums give transition
probability contributions for either target label by a sign flip.  For a
trajectory prepared in eigenstate n, the decomposition

    P~(tau)_{m,n} = delta_{m,n} + P~W_{m,n} + P~Q_{m,n} + P~F_{m,n}

holds to rounding error, where P~(tau) = tr[Pi_m rho(tau)] is read off the
final state.

The generalized-Jarzynski efficacy is estimated two ways:

* the trajectory route: equal-weight averages of the ground/excited-prepared
  ensembles give the map coefficients C00(t), C11(t), and

      gamma_q(t) = [e^{+beta/2} C00(t) + e^{-beta/2} C11(t)] / (2 cosh(beta/2));

* the work-distribution route: the two-point work distribution built from
  measured transition probabilities, averaged against e^{-beta W}.

With state-derived transition probabilities both routes are algebraically the
same number, so the work-distribution route is fed *sampled* projective
outcomes when an independent cross-check is wanted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bloch import EnergyScale, excited_population, ground_population
from .ensemble import EnsembleResult
from .sme import TrajectoryRecord


class InsufficientSpanError(ValueError):
    """Series does not cover enough Rabi periods for a contrast estimate."""


class ZeroVarianceError(ValueError):
    """Pearson correlation of a constant series is undefined."""


@dataclass(frozen=True)
class TransitionLedger:
    """Path-dependent decomposition of one transition probability."""

    p_w: float
    p_q: float
    p_f: float
    p_total: float
    n: int
    m: int

    @property
    def p_initial(self) -> float:
        """P0_{m,n} = delta_{m,n} for eigenstate preparation."""
        return 1.0 if self.m == self.n else 0.0

    def decomposition_residual(self) -> float:
        """|P_total - (delta_mn + P_W + P_Q + P_F)|; rounding-level by construction."""
        return abs(self.p_total - (self.p_initial + self.p_w + self.p_q + self.p_f))


def accumulate(record: TrajectoryRecord, m: int) -> TransitionLedger:
    """Integrate a trajectory's ledger into the m-target transition split."""
    if m not in (0, 1):
        raise ValueError("target label m must be 0 or 1")
    sign = 1.0 if m == 1 else -1.0
    final = record.state(record.n_steps)
    p_total = excited_population(final) if m == 1 else ground_population(final)
    return TransitionLedger(
        p_w=sign * float(record.dw.sum()),
        p_q=sign * float(record.dq.sum()),
        p_f=sign * float(record.dwf.sum()),
        p_total=p_total,
        n=record.initial_label,
        m=m,
    )


def first_law_residual(record: TrajectoryRecord) -> float:
    """|Delta U (from states) - integrated (dW + dWF + dQ)| in hbar*omega_q."""
    return record.first_law_residual()


def transition_probabilities(
    ensemble: EnsembleResult, m: int, n: int, *, sampled: bool = False
) -> tuple[float, float]:
    """(P_{m,n}, standard error) from an ensemble prepared in n.

    By default uses the state-derived expectations tr[Pi_m rho(tau)] (lower
    variance); with ``sampled=True`` uses the recorded projective outcomes
    with a binomial error bar.
    """
    mask = ensemble.initial_labels == n
    if not mask.any():
        raise ValueError(f"ensemble contains no trajectories prepared in n={n}")
    if sampled:
        if ensemble.outcomes is None:
            raise ValueError("ensemble was run without final-outcome sampling")
        hits = (ensemble.outcomes[mask] == m).astype(float)
        p = float(hits.mean())
        count = hits.size
        return p, math.sqrt(max(p * (1.0 - p), 0.0) / count)
    vals = ensemble.final_p00[mask] if m == 0 else 1.0 - ensemble.final_p00[mask]
    p = float(vals.mean())
    sem = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
    return p, sem


@dataclass(frozen=True)
class WorkDistribution:
    """Three-point work distribution of the two-point protocol (hbar*omega_q)."""

    support: np.ndarray
    probabilities: np.ndarray
    beta: float

    def __post_init__(self) -> None:
        p = np.asarray(self.probabilities, dtype=float)
        if (p < -1e-12).any():
            raise ValueError("work probabilities must be non-negative")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"work probabilities must sum to 1, got {p.sum()!r}")


def two_point_work_distribution(beta: float, transitions) -> WorkDistribution:
    """Work distribution from a transition matrix ``T[n][m] = P(m | n)``.

    Initial states are Gibbs-weighted at ``beta``; W = E_m - E_n takes values
    {-1, 0, +1}.  Rows of ``transitions`` must each sum to 1.
    """
    t = np.asarray(transitions, dtype=float)
    if t.shape != (2, 2):
        raise ValueError("transitions must be a 2x2 matrix T[n][m]")
    if (t < -1e-12).any() or np.abs(t.sum(axis=1) - 1.0).max() > 1e-9:
        raise ValueError("transition matrix must be row-stochastic")
    p_g, p_e = EnergyScale(beta=beta).gibbs_weights()
    p_up = p_g * t[0, 1]     # ground -> excited, W = +1
    p_down = p_e * t[1, 0]   # excited -> ground, W = -1
    p_zero = p_g * t[0, 0] + p_e * t[1, 1]
    return WorkDistribution(
        support=np.array([-1.0, 0.0, 1.0]),
        probabilities=np.array([p_down, p_zero, p_up]),
        beta=beta,
    )


def jarzynski_average(wd: WorkDistribution) -> float:
    """<e^{-beta W}>; equals e^{-beta DeltaF} * gamma_q (here DeltaF = 0)."""
    return float(np.sum(wd.probabilities * np.exp(-wd.beta * wd.support)))


@dataclass(frozen=True)
class EfficacyResult:
    """Efficacy gamma_q(t) with bootstrap errors and the map coefficients."""

    times: np.ndarray
    gamma_q: np.ndarray
    stderr: np.ndarray
    c00: np.ndarray
    c11: np.ndarray

    def mean_sq_deviation(self, t_max: float) -> float:
        """<(gamma_q - 1)^2> over [0, t_max]."""
        mask = self.times <= t_max + 1e-12
        return float(np.mean((self.gamma_q[mask] - 1.0) ** 2))


def _efficacy_curve(c00: np.ndarray, beta: float) -> np.ndarray:
    # C11 = 2 - C00 exactly (populations sum to one trajectory by trajectory).
    z = 2.0 * math.cosh(0.5 * beta)
    return (math.exp(0.5 * beta) * c00 + math.exp(-0.5 * beta) * (2.0 - c00)) / z


def efficacy_from_trajectories(
    p00_ground: np.ndarray,
    p00_excited: np.ndarray,
    beta: float,
    times: np.ndarray | None = None,
    *,
    n_boot: int = 1000,
    rng: np.random.Generator | None = None,
) -> EfficacyResult:
    """Trajectory-route efficacy from the two preparation ensembles.

    ``p00_ground`` / ``p00_excited`` are (n_traj, n_times) ground-population
    series of ensembles prepared in the ground / excited state with otherwise
    identical configuration.  Standard errors come from a trajectory bootstrap
    (the estimator is a linear map of ensemble means, but bootstrap keeps the
    error honest for derived quantities too).
    """
    g = np.asarray(p00_ground, dtype=float)
    e = np.asarray(p00_excited, dtype=float)
    if g.ndim != 2 or e.ndim != 2 or g.shape[1] != e.shape[1]:
        raise ValueError(
            "preparation ensembles must be (n_traj, n_times) on a common grid"
        )
    n_times = g.shape[1]
    if times is None:
        times = np.arange(n_times, dtype=float)
    times = np.asarray(times, dtype=float)
    if times.shape != (n_times,):
        raise ValueError("times length must match the series")

    c00 = g.mean(axis=0) + e.mean(axis=0)
    gamma = _efficacy_curve(c00, beta)

    if rng is None:
        rng = np.random.default_rng(0)
    boots = np.empty((n_boot, n_times))
    for b in range(n_boot):
        ig = rng.integers(0, g.shape[0], g.shape[0])
        ie = rng.integers(0, e.shape[0], e.shape[0])
        boots[b] = _efficacy_curve(g[ig].mean(axis=0) + e[ie].mean(axis=0), beta)
    stderr = boots.std(axis=0, ddof=1)

    return EfficacyResult(
        times=times, gamma_q=gamma, stderr=stderr, c00=c00, c11=2.0 - c00
    )


def jarzynski_from_transitions(
    p00_t: np.ndarray,
    p11_t: np.ndarray,
    beta: float,
    n_ground: int,
    n_excited: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Work-distribution-route efficacy from measured transition probabilities.

    ``p00_t`` (``p11_t``) is the return (survival) probability vs time of the
    ground- (excited-) prepared ensemble, e.g. frequencies of sampled
    projective outcomes.  Returns (gamma_q(t), binomial standard error).
    """
    p00 = np.asarray(p00_t, dtype=float)
    p11 = np.asarray(p11_t, dtype=float)
    p_g, p_e = EnergyScale(beta=beta).gibbs_weights()
    gamma = p_g * (np.exp(-beta) + p00 * (1.0 - math.exp(-beta))) + p_e * (
        math.exp(beta) - p11 * (math.exp(beta) - 1.0)
    )
    # d gamma / d p00 = p_g (1 - e^-beta) and -d gamma / d p11 = p_e (e^beta - 1)
    # are both tanh(beta/2).
    k = math.tanh(0.5 * beta)
    var = k * k * (
        p00 * (1.0 - p00) / n_ground + p11 * (1.0 - p11) / n_excited
    )
    return gamma, np.sqrt(np.maximum(var, 0.0))


def rabi_contrast(
    times: np.ndarray,
    p00: np.ndarray,
    omega_r: float,
    window: tuple[float, float] = (2.0, 8.0),
) -> float:
    """Steady oscillation amplitude of P00 relative to the closed amplitude 1/2.

    Least-squares fit of ``m + a cos(omega_r t) + b sin(omega_r t)`` over the
    post-transient window; the series must span at least three Rabi periods
    there.  Returns 2*sqrt(a^2 + b^2).
    """
    times = np.asarray(times, dtype=float)
    p00 = np.asarray(p00, dtype=float)
    lo, hi = window
    mask = (times >= lo) & (times <= hi)
    if not mask.any():
        raise InsufficientSpanError("window contains no samples")
    t = times[mask]
    span = t.max() - t.min()
    if span < 3.0 * (2.0 * math.pi / omega_r) - 1e-9:
        raise InsufficientSpanError(
            f"window spans {span:.3f} us, need >= 3 Rabi periods"
        )
    design = np.column_stack(
        [np.ones_like(t), np.cos(omega_r * t), np.sin(omega_r * t)]
    )
    coef, *_ = np.linalg.lstsq(design, p00[mask], rcond=None)
    return float(2.0 * math.hypot(coef[1], coef[2]))


def pearson_r(a: np.ndarray, b: np.ndarray, lag: int = 0) -> float:
    """Pearson correlation of pooled samples, with ``a`` lagged by ``lag`` steps.

    ``lag=k`` pairs a[i+k] with b[i] (e.g. feedback work k steps after the
    heat it responds to).  Series must have equal lengths before alignment.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("series must have equal lengths")
    if lag < 0:
        raise ValueError("lag must be >= 0")
    if lag:
        a = a[lag:]
        b = b[: b.size - lag]
    if a.size < 2:
        raise ValueError("need at least two aligned samples")
    if a.std() == 0.0 or b.std() == 0.0:
        raise ZeroVarianceError("correlation undefined for constant series")
    return float(np.corrcoef(a, b)[0, 1])


def pooled_pearson_r(
    wf_series: np.ndarray, q_series: np.ndarray, lag: int = 0
) -> float:
    """Pearson r of per-step (dWF, dQ) pairs pooled over trajectories.

    Inputs are (n_traj, n_steps); the lag shifts the feedback-work series
    within each trajectory before pooling.
    """
    wf = np.asarray(wf_series, dtype=float)
    q = np.asarray(q_series, dtype=float)
    if wf.shape != q.shape or wf.ndim != 2:
        raise ValueError("series must be (n_traj, n_steps) with equal shapes")
    if lag:
        wf = wf[:, lag:]
        q = q[:, : q.shape[1] - lag]
    return pearson_r(wf.ravel(), q.ravel())


def binned_first_law_check(
    path_sums: np.ndarray,
    outcomes_m0: np.ndarray,
    n_bins: int = 12,
    min_count: int = 20,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Projective outcomes binned against the path-dependent P00 prediction.

    ``path_sums`` holds per-trajectory delta_{0,0} + P~W + P~Q (+ P~F);
    ``outcomes_m0`` is 1 where the projective measurement returned m=0.
    Returns (bin prediction means, bin outcome frequencies, binomial errors,
    reduced chi^2 against the identity line).
    """
    s = np.asarray(path_sums, dtype=float)
    y = np.asarray(outcomes_m0, dtype=float)
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    idx = np.clip(np.digitize(s, edges) - 1, 0, n_bins - 1)
    pred, freq, err = [], [], []
    for b in range(n_bins):
        mask = idx == b
        count = int(mask.sum())
        if count < min_count:
            continue
        p_hat = y[mask].mean()
        pred.append(s[mask].mean())
        freq.append(p_hat)
        # Wilson-ish floor keeps empty-variance bins from dividing by zero.
        err.append(math.sqrt(max(p_hat * (1.0 - p_hat), 0.25 / count) / count))
    pred = np.array(pred)
    freq = np.array(freq)
    err = np.array(err)
    if pred.size == 0:
        raise ValueError("no bin reached the minimum occupancy")
    chi2 = float(np.sum(((freq - pred) / err) ** 2) / pred.size)
    return pred, freq, err, chi2
