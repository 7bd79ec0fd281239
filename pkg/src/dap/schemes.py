"""Continuous coupling schemes and their digital (piecewise-constant) protocols.

Two schemes are provided, both with counterintuitive ordering (omega2 on
first, omega1 last):

* ``sincos``: ``omega1 = M sin(pi s / 2)``, ``omega2 = M cos(pi s / 2)``
* ``linear``: ``omega1 = M s``, ``omega2 = M (1 - s)``

where ``s = t / t_max`` is fractional time and ``M`` the maximum coupling.
A digital protocol of N steps holds level ``xi`` (0-based) for its step and
uses the continuous scheme at ``s = xi / (N - 1)``, so both endpoints are hit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import CouplingPair

__all__ = [
    "Scheme",
    "Timing",
    "PulseStep",
    "Protocol",
    "MIN_STEPS",
    "sincos_continuous",
    "linear_continuous",
    "continuous_couplings",
    "continuous_derivative",
    "step_index",
    "digital_couplings",
    "digital_levels",
    "compensated_durations",
    "build_protocol",
    "protocol_from_levels",
    "reverse_protocol",
]

MIN_STEPS = 3


class Scheme(str, Enum):
    SINCOS = "sincos"
    LINEAR = "linear"
    # arbitrary level sets read from a protocol file
    CUSTOM = "custom"


class Timing(str, Enum):
    UNIFORM = "uniform"
    COMPENSATED = "compensated"


@dataclass(frozen=True)
class PulseStep:
    couplings: CouplingPair
    duration: float
    index: int

    def __post_init__(self):
        if not math.isfinite(self.duration) or self.duration < 0:
            raise ValueError(f"step duration must be finite and >= 0, got {self.duration!r}")


@dataclass(frozen=True)
class Protocol:
    """An ordered, immutable sequence of pulse steps.

    ``total_time`` is derived from the step durations.
    """

    steps: tuple[PulseStep, ...]
    omega_max: float
    scheme_id: Scheme = Scheme.CUSTOM
    timing: Timing = Timing.UNIFORM
    total_time: float = field(init=False)

    def __post_init__(self):
        steps = tuple(self.steps)
        if not steps:
            raise ValueError("a protocol needs at least one step")
        if not self.omega_max > 0:
            raise ValueError(f"omega_max must be > 0, got {self.omega_max!r}")
        for expected, step in enumerate(steps):
            if step.index != expected:
                raise ValueError(f"step indices must run 0..N-1 in order; got {step.index} at position {expected}")
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "scheme_id", Scheme(self.scheme_id))
        object.__setattr__(self, "timing", Timing(self.timing))
        object.__setattr__(self, "total_time", math.fsum(s.duration for s in steps))

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    @property
    def durations(self) -> np.ndarray:
        return np.array([s.duration for s in self.steps])

    @property
    def omega1(self) -> np.ndarray:
        return np.array([s.couplings.omega1 for s in self.steps])

    @property
    def omega2(self) -> np.ndarray:
        return np.array([s.couplings.omega2 for s in self.steps])

    @property
    def energy_gaps(self) -> np.ndarray:
        return np.hypot(self.omega1, self.omega2)


def _check_time(t, t_max):
    if not t_max > 0:
        raise ValueError(f"t_max must be > 0, got {t_max!r}")
    if not 0 <= t <= t_max:
        raise ValueError(f"t={t!r} outside [0, t_max={t_max!r}]")


def sincos_continuous(t: float, t_max: float, omega_max: float = 1.0) -> CouplingPair:
    _check_time(t, t_max)
    phase = t * math.pi / (2 * t_max)
    return CouplingPair(omega_max * math.sin(phase), omega_max * math.cos(phase))


def linear_continuous(t: float, t_max: float, omega_max: float = 1.0) -> CouplingPair:
    _check_time(t, t_max)
    s = t / t_max
    return CouplingPair(omega_max * s, omega_max * (1 - s))


def continuous_couplings(scheme, t, t_max, omega_max=1.0) -> CouplingPair:
    scheme = Scheme(scheme)
    if scheme is Scheme.SINCOS:
        return sincos_continuous(t, t_max, omega_max)
    if scheme is Scheme.LINEAR:
        return linear_continuous(t, t_max, omega_max)
    raise ValueError(f"no continuous form for scheme {scheme.value!r}")


def continuous_derivative(scheme, t, t_max, omega_max=1.0) -> tuple[float, float]:
    """Analytic time derivatives (d omega1/dt, d omega2/dt) of a continuous scheme."""
    scheme = Scheme(scheme)
    _check_time(t, t_max)
    if scheme is Scheme.SINCOS:
        rate = math.pi / (2 * t_max)
        phase = t * rate
        return omega_max * rate * math.cos(phase), -omega_max * rate * math.sin(phase)
    if scheme is Scheme.LINEAR:
        return omega_max / t_max, -omega_max / t_max
    raise ValueError(f"no continuous form for scheme {scheme.value!r}")


def step_index(t: float, n_steps: int, t_max: float) -> int:
    """Index of the step active at time ``t`` in ``[0, t_max)``."""
    if n_steps < MIN_STEPS:
        raise ValueError(f"n_steps must be >= {MIN_STEPS}, got {n_steps}")
    if not t_max > 0:
        raise ValueError(f"t_max must be > 0, got {t_max!r}")
    if not 0 <= t < t_max:
        raise ValueError(f"t={t!r} outside [0, t_max={t_max!r})")
    # floor(N t / t_max) can round up to N for t just below t_max
    return min(math.floor(n_steps * t / t_max), n_steps - 1)


def digital_levels(scheme, n_steps: int, omega_max: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Arrays of (omega1, omega2) for every step of an N-step digitisation."""
    scheme = Scheme(scheme)
    if n_steps < 2:
        raise ValueError(f"n_steps must be >= 2, got {n_steps}")
    s = np.arange(n_steps) / (n_steps - 1)
    if scheme is Scheme.SINCOS:
        phase = s * (np.pi / 2)
        return omega_max * np.sin(phase), omega_max * np.cos(phase)
    if scheme is Scheme.LINEAR:
        return omega_max * s, omega_max * (1 - s)
    raise ValueError(f"no digitisation for scheme {scheme.value!r}")


def digital_couplings(xi: int, n_steps: int, omega_max: float, scheme) -> CouplingPair:
    if n_steps < MIN_STEPS:
        raise ValueError(f"n_steps must be >= {MIN_STEPS}, got {n_steps}")
    if not 0 <= xi <= n_steps - 1:
        raise ValueError(f"step index xi={xi} outside [0, {n_steps - 1}]")
    w1, w2 = digital_levels(scheme, n_steps, omega_max)
    return CouplingPair(w1[xi], w2[xi])


def compensated_durations(omega1, omega2) -> np.ndarray:
    """Per-step durations pi / E that make every step a half period."""
    gaps = np.hypot(np.asarray(omega1, float), np.asarray(omega2, float))
    if np.any(gaps == 0):
        raise ValueError("compensated timing needs a non-zero energy gap on every step")
    return np.pi / gaps


def protocol_from_levels(omega1, omega2, durations, omega_max=None,
                         scheme_id=Scheme.CUSTOM, timing=Timing.UNIFORM) -> Protocol:
    """Assemble a Protocol from parallel arrays of levels and durations."""
    omega1 = np.asarray(omega1, float)
    omega2 = np.asarray(omega2, float)
    durations = np.broadcast_to(np.asarray(durations, float), omega1.shape)
    if omega2.shape != omega1.shape:
        raise ValueError("omega1 and omega2 must have the same length")
    if omega_max is None:
        omega_max = float(max(omega1.max(), omega2.max()))
    steps = tuple(
        PulseStep(CouplingPair(a, b), float(tau), xi)
        for xi, (a, b, tau) in enumerate(zip(omega1, omega2, durations))
    )
    return Protocol(steps, omega_max=omega_max, scheme_id=scheme_id, timing=timing)


def build_protocol(scheme, n_steps: int, t_max: float | None, omega_max: float = 1.0,
                   timing=Timing.UNIFORM) -> Protocol:
    """Digitise a scheme into an N-step protocol.

    Uniform timing splits ``t_max`` evenly. Compensated timing gives each step
    ``pi / E(xi)`` and ignores ``t_max``; the resulting total is available as
    ``Protocol.total_time``.
    """
    scheme, timing = Scheme(scheme), Timing(timing)
    if scheme is Scheme.CUSTOM:
        raise ValueError("custom protocols are built with protocol_from_levels")
    if n_steps < MIN_STEPS:
        raise ValueError(f"n_steps must be >= {MIN_STEPS}, got {n_steps}")
    if not omega_max > 0:
        raise ValueError(f"omega_max must be > 0, got {omega_max!r}")
    w1, w2 = digital_levels(scheme, n_steps, omega_max)
    if timing is Timing.UNIFORM:
        if t_max is None or not t_max > 0:
            raise ValueError(f"uniform timing needs t_max > 0, got {t_max!r}")
        durations = np.full(n_steps, t_max / n_steps)
    else:
        durations = compensated_durations(w1, w2)
    return protocol_from_levels(w1, w2, durations, omega_max, scheme, timing)


def reverse_protocol(p: Protocol) -> Protocol:
    """The same steps played backwards in time (indices renumbered)."""
    steps = tuple(
        PulseStep(step.couplings, step.duration, xi)
        for xi, step in enumerate(reversed(p.steps))
    )
    return Protocol(steps, omega_max=p.omega_max, scheme_id=Scheme.CUSTOM, timing=p.timing)
