"""Physical / numerical run parameters and feedback-loop parameters.

Defaults mirror the experiment the simulator models: decay rate
gamma = 1.7 /us, Rabi drive Omega_R/2pi = 1 MHz (Bloch angular rate
2*pi rad/us), homodyne quantum efficiency eta = 0.35, 20 ns integration
steps, 8 us protocols, 100 ns feedback loop delay, reference gain A = 34
with offset B = -1, and inverse temperature beta = 3.5 for the two-point
work statistics.

Time is in microseconds throughout; rates in 1/us; angles in radians;
energies in units of hbar*omega_q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

#: Allowed values of SimConfig.initial_state besides the eigenstate labels.
THERMAL = "thermal"

#: Integration schemes. "ito-euler" is the discretized Ito-form update used
#: in the experiment's state tracking (first order, renormalized); "kraus" is
#: a measurement-operator update of the same SME that preserves positivity
#: exactly and keeps pure states pure at eta = 1 (see sme module docstring).
SCHEMES = ("ito-euler", "kraus")

#: Feedback modes. "phase_locked" multiplies the homodyne record with a
#: reference oscillator; "optimal" rotates the state back onto the
#: closed-evolution phase at every step.
FEEDBACK_MODES = ("none", "phase_locked", "optimal")


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one simulation protocol.

    Attributes
    ----------
    gamma : float
        Radiative decay rate (1/us).
    omega_r : float
        Rabi drive strength as the *Bloch angular rate* (rad/us).  The
        population oscillation P00(t) then has period ``2*pi/omega_r``
        (1 us at the default), and the transition-probability formula
        cos^2/sin^2 is evaluated at ``omega_r/2``.
    eta : float
        Homodyne quantum efficiency, in [0, 1].
    dt : float
        Integration step (us).  ``tau/dt`` must be an integer.
    tau : float
        Protocol duration (us).
    phi : float or None
        Drive/reference phase (rad).  None selects the convention phi = 0
        for a ground-state preparation and phi = pi for an excited one.
    seed : int
        Base RNG seed; trajectory k uses the stream (seed, k).
    initial_state : 0, 1 or "thermal"
        Eigenstate preparation, or a Gibbs sample at ``beta`` per trajectory.
    beta : float
        Inverse temperature (1/(hbar*omega_q)) for thermal preparation and
        the Jarzynski statistics.
    scheme : str
        Integration scheme, one of ``SCHEMES``.
    sample_final : bool
        If True, each trajectory ends with an ideal projective energy
        measurement whose outcome is recorded.
    """

    gamma: float = 1.7
    omega_r: float = 2.0 * math.pi
    eta: float = 0.35
    dt: float = 0.02
    tau: float = 8.0
    phi: float | None = None
    seed: int = 1
    initial_state: Union[int, str] = 0
    beta: float = 3.5
    scheme: str = "ito-euler"
    sample_final: bool = False

    def __post_init__(self) -> None:
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must be in [0, 1]")
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        steps = self.tau / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError(
                f"tau/dt must be an integer step count, got {self.tau}/{self.dt}"
            )
        if self.initial_state not in (0, 1, THERMAL):
            raise ValueError(
                f"initial_state must be 0, 1 or {THERMAL!r}, got {self.initial_state!r}"
            )
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.tau / self.dt))

    def with_(self, **kwargs) -> "SimConfig":
        """Copy with fields replaced (convenience around dataclasses.replace)."""
        return replace(self, **kwargs)


@dataclass(frozen=True)
class FeedbackConfig:
    """Feedback-loop parameters.

    Attributes
    ----------
    mode : str
        One of ``FEEDBACK_MODES``.
    gain : float
        Phase-locked reference gain A (1/us): the feedback drive is
        ``Omega_F = A * (cos(omega_r*t + phi) + B) * dV``.  Since dV is
        dimensionless, A in these units matches the experimental multiplier
        convention; the loop-analysis optimum is ``sqrt(eta)/dt`` (about 29.6
        at eta = 0.35, dt = 20 ns, empirically 34).
    offset : float
        Reference offset B (dimensionless, -1 in the derived law).
    phi : float or None
        Reference phase override; None defers to SimConfig.phi / the
        preparation convention.
    delay_steps : int
        Loop delay in integration steps (dt units); the drive computed at
        step i is applied at step i + delay_steps.
    """

    mode: str = "none"
    gain: float = 34.0
    offset: float = -1.0
    phi: float | None = None
    delay_steps: int = 0

    def __post_init__(self) -> None:
        if self.mode not in FEEDBACK_MODES:
            raise ValueError(
                f"mode must be one of {FEEDBACK_MODES}, got {self.mode!r}"
            )
        if self.delay_steps < 0 or self.delay_steps != int(self.delay_steps):
            raise ValueError("delay_steps must be a non-negative integer")

    def with_(self, **kwargs) -> "FeedbackConfig":
        return replace(self, **kwargs)


NO_FEEDBACK = FeedbackConfig(mode="none")


def resolve_phi(sim: SimConfig, fb: FeedbackConfig, initial_label: int) -> float:
    """Reference phase for one trajectory.

    Priority: FeedbackConfig.phi, then SimConfig.phi, then the preparation
    convention (0 for ground start, pi for excited start), which makes the
    phase-locked target ``z = cos(omega_r*t + phi)`` the closed-evolution z.
    """
    if fb.phi is not None:
        return fb.phi
    if sim.phi is not None:
        return sim.phi
    return 0.0 if initial_label == 0 else math.pi


def delay_steps_for(delay_ns: float, dt_us: float) -> int:
    """Loop delay in whole steps for a delay given in nanoseconds."""
    steps = delay_ns * 1e-3 / dt_us
    if abs(steps - round(steps)) > 1e-6:
        raise ValueError(
            f"delay of {delay_ns} ns is not a whole number of {dt_us*1e3:g} ns steps"
        )
    return int(round(steps))
