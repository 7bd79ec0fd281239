"""Closed-form diagnostics: adiabaticity, dark-state jump errors, resonances."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import CouplingPair, DegenerateCouplingError, eigensystem
from .schemes import MIN_STEPS, Scheme, digital_levels

__all__ = [
    "ErrorEstimate",
    "ResonanceSet",
    "adiabaticity_general",
    "adiabaticity_sincos",
    "adiabaticity_linear",
    "adiabaticity_profile",
    "step_overlap_error",
    "dark_state_deficits",
    "total_error_estimate",
    "resonance_times",
]


@dataclass(frozen=True)
class ErrorEstimate:
    """Dark-state jump error for an N-step sin/cos protocol.

    ``eta_total`` counts N identical jumps; ``eta_total_transitions`` counts
    the N - 1 jumps that actually occur between N steps.
    """

    n_steps: int
    eta_step: float
    eta_total: float
    eta_asymptotic: float
    eta_total_transitions: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> ErrorEstimate:
        return cls(**data)


@dataclass(frozen=True)
class ResonanceSet:
    """Total times ``2 n N pi / omega_max`` at which a uniform sin/cos protocol is the identity."""

    n_steps: int
    omega_max: float
    times: tuple[float, ...]
    order: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"n_steps": self.n_steps, "omega_max": self.omega_max,
                "times": list(self.times), "order": list(self.order)}

    @classmethod
    def from_dict(cls, data: dict) -> ResonanceSet:
        return cls(data["n_steps"], data["omega_max"], tuple(data["times"]), tuple(data["order"]))


def adiabaticity_general(c: CouplingPair, dc) -> float:
    """Adiabaticity between the dark state and either bright state.

    ``|<D+-| dH/dt |D0>| / E^2``, which reduces to
    ``|omega1 domega2 - omega2 domega1| / (sqrt(2) E^3)``.

    Parameters
    ----------
    c : CouplingPair
        Instantaneous couplings (not both zero).
    dc : CouplingPair or (float, float)
        Time derivatives of (omega1, omega2). Derivatives may be negative, so
        a plain tuple is accepted.
    """
    d1, d2 = (dc.omega1, dc.omega2) if isinstance(dc, CouplingPair) else dc
    gap = c.energy_gap
    if gap == 0:
        raise DegenerateCouplingError("adiabaticity undefined for omega1 = omega2 = 0")
    return abs(c.omega1 * d2 - c.omega2 * d1) / (math.sqrt(2.0) * gap**3)


def adiabaticity_sincos(t_max: float, omega_max: float = 1.0) -> float:
    return math.pi * math.sqrt(2.0) / (4 * t_max * omega_max)


def adiabaticity_linear(t: float, t_max: float, omega_max: float = 1.0) -> float:
    s = t / t_max
    return (s * s - s + 0.5) ** -1.5 / (4 * t_max * omega_max)


def adiabaticity_profile(scheme, fractions, t_max: float = 1.0, omega_max: float = 1.0) -> np.ndarray:
    """Closed-form adiabaticity of a continuous scheme at fractional times."""
    scheme = Scheme(scheme)
    s = np.asarray(fractions, float)
    if scheme is Scheme.SINCOS:
        return np.full(s.shape, adiabaticity_sincos(t_max, omega_max))
    if scheme is Scheme.LINEAR:
        return (s * s - s + 0.5) ** -1.5 / (4 * t_max * omega_max)
    raise ValueError(f"no continuous form for scheme {scheme.value!r}")


def step_overlap_error(n_steps: int) -> float:
    """Population lost between consecutive sin/cos dark states, ``sin^2(pi / 2(N-1))``."""
    if n_steps < 2:
        raise ValueError(f"n_steps must be >= 2, got {n_steps}")
    return math.sin(math.pi / (2 * (n_steps - 1))) ** 2


def dark_state_deficits(scheme, n_steps: int) -> np.ndarray:
    """``1 - |<D0(xi)|D0(xi+1)>|^2`` for xi = 0 .. N-2, from the eigenvectors."""
    w1, w2 = digital_levels(scheme, n_steps)
    darks = [eigensystem(CouplingPair(a, b)).d_zero for a, b in zip(w1, w2)]
    return np.array([1.0 - abs(np.dot(darks[k], darks[k + 1])) ** 2 for k in range(n_steps - 1)])


def total_error_estimate(n_steps: int) -> ErrorEstimate:
    eta = step_overlap_error(n_steps)
    return ErrorEstimate(
        n_steps=n_steps,
        eta_step=eta,
        eta_total=n_steps * eta,
        eta_asymptotic=math.pi**2 / (4 * n_steps),
        eta_total_transitions=(n_steps - 1) * eta,
    )


def resonance_times(n_steps: int, omega_max: float = 1.0, n_max: int = 1) -> ResonanceSet:
    if n_steps < MIN_STEPS:
        raise ValueError(f"n_steps must be >= {MIN_STEPS}, got {n_steps}")
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    orders = tuple(range(1, n_max + 1))
    return ResonanceSet(
        n_steps=n_steps,
        omega_max=float(omega_max),
        times=tuple(2 * n * n_steps * math.pi / omega_max for n in orders),
        order=orders,
    )
