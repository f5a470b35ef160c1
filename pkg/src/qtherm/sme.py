"""Stochastic-master-equation engine with a per-step heat/work ledger.

Each integration step of duration dt is split in two sub-steps, so that every
energy change of the qubit is attributed to exactly one of work (unitary,
drive + feedback) or heat (nonunitary, decay + measurement back-action):

1. *Unitary sub-step*: the exact rotation by ``theta = (omega_drive +
   omega_feedback) * dt`` in the x-z plane.  Its energy change (in units of
   hbar*omega_q this is just the change of the excited population) is recorded
   as work, attributed to the drive and the feedback proportionally to their
   angles; the proportional split is the exact integral of the two commutator
   work rates along the rotation path.

2. *Dissipative sub-step*: the gamma and sqrt(eta) terms of the discretized
   Ito-form stochastic master equation,

       dz = gamma*(1-z)*dt + sqrt(eta)*x*(1-z)   * (dV - gamma*sqrt(eta)*x*dt)
       dx = -(gamma/2)*x*dt + sqrt(eta)*(1-z-x^2) * (dV - gamma*sqrt(eta)*x*dt)

   driven by the homodyne increment ``dV = sqrt(eta)*gamma*x*dt +
   sqrt(gamma)*dX`` with dX ~ N(0, dt).  The excited-population change of this
   sub-step (including the renormalization below) is recorded as heat.

The Euler update can leave the unit disk by O(dt); when it does, the Bloch
vector is rescaled to unit length (states never become unphysical, and the
first law dU = dW + dWF + dQ holds exactly by construction, renormalization
included).

An alternative dissipative sub-step, ``scheme="kraus"``, applies the
measurement operator M = I - (gamma*dt/2)|e><e| + sqrt(eta*gamma)*dy*sigma_-
(with dy = dV/sqrt(gamma)) and the unmonitored-decay completion, then
renormalizes the trace.  It integrates the same SME to the same order but is
positivity-preserving by construction and keeps pure states exactly pure at
eta = 1, where the first-order Euler update loses purity pathwise at
O(sqrt(gamma*dt)); use it for unit-efficiency runs.

Trajectories are independent: trajectory k draws all its randomness from the
stream (seed, k), in the fixed order [thermal-preparation uniform,] noise
path [, final-outcome uniform], so ensembles are reproducible bit-for-bit
regardless of how they are chunked across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .bloch import BlochState, excited_population
from .config import NO_FEEDBACK, THERMAL, FeedbackConfig, SimConfig, resolve_phi
from .feedback import DelayLine, _wrap_angle, optimal_drive, pll_drive

#: Pre-renormalization |x| or |z| beyond this aborts the run: the Euler step
#: has left the physical region so far that dt is clearly too coarse.
BLOWUP_LIMIT = 1.5


class NumericalBlowupError(RuntimeError):
    """Ito-Euler update left the Bloch disk by more than BLOWUP_LIMIT."""


@dataclass(frozen=True)
class HomodyneSample:
    """One homodyne increment: dV = sqrt(eta)*gamma*<sigma_x>*dt + sqrt(gamma)*dX."""

    dV: float
    dX: float


@dataclass(frozen=True)
class StepLedger:
    """Energy bookkeeping of one step, in units of hbar*omega_q.

    dU = dW + dWF + dQ holds exactly (dU is *defined* as that sum).  The
    transition-probability increments of the m=1 projector equal these
    energies numerically (hbar*omega_q = 1); for m=0 flip the sign.
    """

    dW: float
    dWF: float
    dQ: float
    dU: float

    @property
    def dp_w(self) -> float:
        return self.dW

    @property
    def dp_f(self) -> float:
        return self.dWF

    @property
    def dp_q(self) -> float:
        return self.dQ


@dataclass(frozen=True)
class TrajectoryRecord:
    """Time series of one conditional trajectory.

    State-like arrays (times, x, z) have n_steps + 1 entries including the
    initial point; per-step arrays (dv, dx, dw, dwf, dq, du) have n_steps.
    """

    config: SimConfig
    feedback: FeedbackConfig
    initial_label: int
    times: np.ndarray
    x: np.ndarray
    z: np.ndarray
    dv: np.ndarray
    dx: np.ndarray
    dw: np.ndarray
    dwf: np.ndarray
    dq: np.ndarray
    du: np.ndarray
    final_outcome: int | None = None

    @property
    def n_steps(self) -> int:
        return len(self.dv)

    def state(self, i: int) -> BlochState:
        return BlochState(x=float(self.x[i]), z=float(self.z[i]))

    def sample(self, i: int) -> HomodyneSample:
        return HomodyneSample(dV=float(self.dv[i]), dX=float(self.dx[i]))

    def step_ledger(self, i: int) -> StepLedger:
        return StepLedger(
            dW=float(self.dw[i]),
            dWF=float(self.dwf[i]),
            dQ=float(self.dq[i]),
            dU=float(self.du[i]),
        )

    def work_heat_totals(self) -> tuple[float, float, float]:
        """(W, WF, Q) integrated over the trajectory."""
        return float(self.dw.sum()), float(self.dwf.sum()), float(self.dq.sum())

    def delta_u_from_states(self) -> float:
        """Path-independent energy change, from the end states alone."""
        return excited_population(self.state(self.n_steps)) - excited_population(
            self.state(0)
        )

    def first_law_residual(self) -> float:
        """|Delta U (from states) - (W + WF + Q)|; ~1e-14 by construction."""
        w, wf, q = self.work_heat_totals()
        return abs(self.delta_u_from_states() - (w + wf + q))


def rng_for_trajectory(seed: int, index: int) -> np.random.Generator:
    """The RNG stream of trajectory ``index``; depends on (seed, index) only."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))
    )


def sample_homodyne(
    s: BlochState, cfg: SimConfig, rng: np.random.Generator
) -> HomodyneSample:
    """Draw one homodyne increment conditioned on the current state."""
    dx = rng.normal(0.0, math.sqrt(cfg.dt))
    dv = math.sqrt(cfg.eta) * cfg.gamma * s.x * cfg.dt + math.sqrt(cfg.gamma) * dx
    return HomodyneSample(dV=dv, dX=dx)


def _renormalize(x, z):
    """Rescale (x, z) onto the unit circle wherever x^2 + z^2 > 1."""
    r2 = x * x + z * z
    scale = np.where(r2 > 1.0, 1.0 / np.sqrt(np.maximum(r2, 1.0)), 1.0)
    return x * scale, z * scale


def renormalize(s: BlochState) -> BlochState:
    """Bloch vector rescaled to unit length if it left the disk; else unchanged."""
    x, z = _renormalize(np.float64(s.x), np.float64(s.z))
    return BlochState(x=float(x), z=float(z))


def _dissipative_euler(x, z, dv, gamma: float, eta: float, dt: float):
    """gamma and sqrt(eta) terms of the Ito-Euler update (drive off)."""
    sqrt_eta = math.sqrt(eta)
    innovation = dv - gamma * sqrt_eta * x * dt
    z2 = z + gamma * (1.0 - z) * dt + sqrt_eta * x * (1.0 - z) * innovation
    x2 = x - 0.5 * gamma * x * dt + sqrt_eta * (1.0 - z - x * x) * innovation
    if max(np.max(np.abs(np.atleast_1d(x2))), np.max(np.abs(np.atleast_1d(z2)))) > BLOWUP_LIMIT:
        raise NumericalBlowupError(
            "Bloch components exceeded |1.5| before renormalization; dt too coarse"
        )
    return _renormalize(x2, z2)


def _dissipative_kraus(x, z, dv, gamma: float, eta: float, dt: float):
    """Measurement-operator (Kraus) dissipative sub-step; positivity-safe."""
    if gamma == 0.0:
        return x, z
    dy = dv / math.sqrt(gamma)
    a = math.sqrt(eta * gamma)
    p = 0.5 * (1.0 + z)  # ground population
    q = 0.5 * (1.0 - z)  # excited population
    c = 0.5 * x
    k = 1.0 - 0.5 * gamma * dt
    ady = a * dy
    p2 = p + 2.0 * ady * c + ady * ady * q + (1.0 - eta) * gamma * dt * q
    c2 = k * (c + ady * q)
    q2 = k * k * q
    trace = p2 + q2
    return 2.0 * c2 / trace, (p2 - q2) / trace


_DISSIPATORS = {"ito-euler": _dissipative_euler, "kraus": _dissipative_kraus}


def ito_step(
    s: BlochState, smp: HomodyneSample, omega_total: float, cfg: SimConfig
) -> BlochState:
    """One full (unsplit) Ito-Euler step with drive rate ``omega_total``.

    This is the discretized SME exactly as written, drive and dissipative
    terms in a single first-order update, followed by renormalization.  The
    production integrator uses :func:`split_step` instead so that work and
    heat can be told apart; the two agree to O(dt^2) per step.
    """
    innovation = smp.dV - cfg.gamma * math.sqrt(cfg.eta) * s.x * cfg.dt
    sqrt_eta = math.sqrt(cfg.eta)
    x, z = s.x, s.z
    z2 = (
        z
        + omega_total * x * cfg.dt
        + cfg.gamma * (1.0 - z) * cfg.dt
        + sqrt_eta * x * (1.0 - z) * innovation
    )
    x2 = (
        x
        - omega_total * z * cfg.dt
        - 0.5 * cfg.gamma * x * cfg.dt
        + sqrt_eta * (1.0 - z - x * x) * innovation
    )
    if max(abs(x2), abs(z2)) > BLOWUP_LIMIT:
        raise NumericalBlowupError(
            "Bloch components exceeded |1.5| before renormalization; dt too coarse"
        )
    x3, z3 = _renormalize(np.float64(x2), np.float64(z2))
    return BlochState(x=float(x3), z=float(z3))


def _rotation_work(x, z, theta_d, theta_f):
    """Unitary sub-step: rotated state plus the (dW, dWF) attribution."""
    theta = theta_d + theta_f
    ct = np.cos(theta)
    st = np.sin(theta)
    z1 = z * ct + x * st
    x1 = x * ct - z * st
    dpe = 0.5 * (z - z1)  # excited-population change of the rotation
    # Work splits in proportion to the angles (exact for generators that are
    # fixed fractions of the total); at theta == 0 exactly, fall back to the
    # instantaneous commutator rates, which is the continuous limit.
    theta_arr = np.asarray(theta, dtype=float)
    safe = np.where(theta_arr == 0.0, 1.0, theta_arr)
    dw = np.where(theta_arr == 0.0, -0.5 * x * theta_d, dpe * (theta_d / safe))
    dwf = dpe - dw
    return x1, z1, dw, dwf


def split_step(
    s: BlochState,
    smp: HomodyneSample,
    omega_drive: float,
    omega_fb: float,
    cfg: SimConfig,
) -> tuple[BlochState, StepLedger]:
    """One two-sub-step update returning the new state and its energy ledger."""
    x1, z1, dw, dwf = _rotation_work(
        np.float64(s.x), np.float64(s.z), omega_drive * cfg.dt, omega_fb * cfg.dt
    )
    x2, z2 = _DISSIPATORS[cfg.scheme](x1, z1, smp.dV, cfg.gamma, cfg.eta, cfg.dt)
    dq = 0.5 * (z1 - z2)
    dw = float(dw)
    dwf = float(dwf)
    dq = float(dq)
    ledger = StepLedger(dW=dw, dWF=dwf, dQ=dq, dU=dw + dwf + dq)
    return BlochState(x=float(x2), z=float(z2)), ledger


@dataclass
class BatchResult:
    """Raw output of one batch of trajectories (see ``run_batch``)."""

    n: int
    initial_labels: np.ndarray  # (n,) int8
    p00_sum: np.ndarray         # (steps+1,) sum over batch of ground population
    p00_sqsum: np.ndarray       # (steps+1,)
    dw_sum: np.ndarray          # (steps,)
    dwf_sum: np.ndarray
    dq_sum: np.ndarray
    w: np.ndarray               # (n,) per-trajectory totals (m=1 convention)
    wf: np.ndarray
    q: np.ndarray
    final_x: np.ndarray
    final_z: np.ndarray
    residuals: np.ndarray       # (n,) first-law residuals
    outcomes: np.ndarray | None
    series: dict[str, np.ndarray]


def run_batch(
    cfg: SimConfig,
    fb: FeedbackConfig,
    rngs: list[np.random.Generator],
    record: Iterable[str] = (),
) -> BatchResult:
    """Advance a batch of trajectories in lockstep (vectorized over the batch).

    ``record`` may contain "pop" (per-trajectory ground-population series),
    "ledger" (per-step dW/dWF/dQ series), "state" (x and z series) and "dv"
    (homodyne increments); unrequested series are not allocated.
    """
    record = frozenset(record)
    n = len(rngs)
    steps = cfg.n_steps
    dt = cfg.dt
    gamma, eta, omega_r = cfg.gamma, cfg.eta, cfg.omega_r
    sqrt_eta = math.sqrt(eta)
    sqrt_gamma = math.sqrt(gamma)
    sqrt_dt = math.sqrt(dt)
    dissipate = _DISSIPATORS[cfg.scheme]
    theta_d = omega_r * dt

    # Per-trajectory draws, in the fixed stream order.
    labels = np.empty(n, dtype=np.int8)
    noise = np.empty((steps, n))
    p_exc_thermal = (
        math.exp(-0.5 * cfg.beta) / (2.0 * math.cosh(0.5 * cfg.beta))
        if cfg.initial_state == THERMAL
        else None
    )
    for k, rng in enumerate(rngs):
        if p_exc_thermal is None:
            labels[k] = int(cfg.initial_state)
        else:
            labels[k] = 1 if rng.random() < p_exc_thermal else 0
        noise[:, k] = rng.normal(0.0, sqrt_dt, steps)

    z = np.where(labels == 0, 1.0, -1.0)
    x = np.zeros(n)
    phi0 = np.array([resolve_phi(cfg, fb, int(lbl)) for lbl in labels])

    p00_sum = np.zeros(steps + 1)
    p00_sqsum = np.zeros(steps + 1)
    dw_sum = np.zeros(steps)
    dwf_sum = np.zeros(steps)
    dq_sum = np.zeros(steps)
    w_tot = np.zeros(n)
    wf_tot = np.zeros(n)
    q_tot = np.zeros(n)

    series: dict[str, np.ndarray] = {}
    if "pop" in record:
        series["p00"] = np.empty((n, steps + 1))
    if "state" in record:
        series["x"] = np.empty((n, steps + 1))
        series["z"] = np.empty((n, steps + 1))
    if "ledger" in record:
        series["dw"] = np.empty((n, steps))
        series["dwf"] = np.empty((n, steps))
        series["dq"] = np.empty((n, steps))
    if "dv" in record:
        series["dv"] = np.empty((n, steps))
        series["dx"] = np.empty((n, steps))

    def snapshot(i: int) -> None:
        p00 = 0.5 * (1.0 + z)
        p00_sum[i] += p00.sum()
        p00_sqsum[i] += (p00 * p00).sum()
        if "pop" in record:
            series["p00"][:, i] = p00
        if "state" in record:
            series["x"][:, i] = x
            series["z"][:, i] = z

    snapshot(0)
    pe_init = 0.5 * (1.0 - z)

    # The phase-locked line delays the drive computed from dV[i] by
    # delay_steps.  The optimal law is incremental (it undoes the heat angle
    # theta_Q of one completed step, the Methods' Omega_F*dt = -theta_Q), so
    # its loop latency is delay_steps with a floor of one step: theta_Q of
    # step i is only known once step i has been integrated.  At zero
    # configured delay the drive instead realigns the full phase onto the
    # closed-evolution target, which is the same law with self-correction.
    incremental = fb.mode == "optimal" and fb.delay_steps > 0
    line = DelayLine(max(fb.delay_steps - 1, 0) if incremental else fb.delay_steps)
    om_pending = np.zeros(n)
    for i in range(steps):
        t = i * dt
        dxi = noise[i]
        dv = sqrt_eta * gamma * x * dt + sqrt_gamma * dxi

        if fb.mode == "none":
            om_f = 0.0
        elif fb.mode == "phase_locked":
            om_f = line.push(pll_drive(dv, t, omega_r, fb.gain, fb.offset, phi0))
        elif incremental:
            om_f = line.push(om_pending)
        else:  # optimal, zero delay: rotate onto the target phase
            om_f = optimal_drive(x, z, t, omega_r, phi0, dt)

        x1, z1, dw, dwf = _rotation_work(x, z, theta_d, np.asarray(om_f) * dt)
        x2, z2 = dissipate(x1, z1, dv, gamma, eta, dt)
        dq = 0.5 * (z1 - z2)
        if incremental:
            theta_q = _wrap_angle(np.arctan2(-x2, z2) - np.arctan2(-x1, z1))
            om_pending = -theta_q / dt

        dw = np.broadcast_to(dw, (n,))
        dwf = np.broadcast_to(dwf, (n,))
        w_tot += dw
        wf_tot += dwf
        q_tot += dq
        dw_sum[i] = dw.sum()
        dwf_sum[i] = dwf.sum()
        dq_sum[i] = dq.sum()
        if "ledger" in record:
            series["dw"][:, i] = dw
            series["dwf"][:, i] = dwf
            series["dq"][:, i] = dq
        if "dv" in record:
            series["dv"][:, i] = dv
            series["dx"][:, i] = dxi

        x, z = x2, z2
        snapshot(i + 1)

    pe_final = 0.5 * (1.0 - z)
    residuals = np.abs((pe_final - pe_init) - (w_tot + wf_tot + q_tot))

    outcomes = None
    if cfg.sample_final:
        u = np.array([rng.random() for rng in rngs])
        outcomes = (u < pe_final).astype(np.int8)

    return BatchResult(
        n=n,
        initial_labels=labels,
        p00_sum=p00_sum,
        p00_sqsum=p00_sqsum,
        dw_sum=dw_sum,
        dwf_sum=dwf_sum,
        dq_sum=dq_sum,
        w=w_tot,
        wf=wf_tot,
        q=q_tot,
        final_x=x if isinstance(x, np.ndarray) else np.full(n, x),
        final_z=z if isinstance(z, np.ndarray) else np.full(n, z),
        residuals=residuals,
        outcomes=outcomes,
        series=series,
    )


def simulate_trajectory(
    cfg: SimConfig,
    feedback: FeedbackConfig | None = None,
    rng: np.random.Generator | None = None,
) -> TrajectoryRecord:
    """Simulate one trajectory, recording everything.

    ``rng`` defaults to the stream of trajectory index 0 under ``cfg.seed``.
    """
    fb = NO_FEEDBACK if feedback is None else feedback
    if rng is None:
        rng = rng_for_trajectory(cfg.seed, 0)
    batch = run_batch(cfg, fb, [rng], record=("pop", "state", "ledger", "dv"))
    steps = cfg.n_steps
    return TrajectoryRecord(
        config=cfg,
        feedback=fb,
        initial_label=int(batch.initial_labels[0]),
        times=cfg.dt * np.arange(steps + 1),
        x=batch.series["x"][0],
        z=batch.series["z"][0],
        dv=batch.series["dv"][0],
        dx=batch.series["dx"][0],
        dw=batch.series["dw"][0],
        dwf=batch.series["dwf"][0],
        dq=batch.series["dq"][0],
        du=batch.series["dw"][0] + batch.series["dwf"][0] + batch.series["dq"][0],
        final_outcome=int(batch.outcomes[0]) if batch.outcomes is not None else None,
    )
