"""Three-state Hamiltonian, its analytic eigensystem and basic state types.

Basis ordering is fixed as (|1>, |2>, |3>) everywhere in the package. The
Hamiltonian couples |1>-|2> with ``omega1`` and |2>-|3> with ``omega2``; all
sites are degenerate in energy and hbar = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DegenerateCouplingError",
    "CouplingPair",
    "EigenSystem",
    "StateVector",
    "hamiltonian",
    "eigensystem",
    "dark_state",
]


class DegenerateCouplingError(ValueError):
    """Raised when both couplings vanish and the eigenbasis is not unique."""


@dataclass(frozen=True)
class CouplingPair:
    """Tunnel matrix elements (omega1, omega2) at one instant or step."""

    omega1: float
    omega2: float

    def __post_init__(self):
        for name in ("omega1", "omega2"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {value!r}")
        object.__setattr__(self, "omega1", float(self.omega1))
        object.__setattr__(self, "omega2", float(self.omega2))

    @property
    def energy_gap(self) -> float:
        return math.hypot(self.omega1, self.omega2)

    def swapped(self) -> CouplingPair:
        return CouplingPair(self.omega2, self.omega1)


@dataclass(frozen=True)
class EigenSystem:
    energy_gap: float
    e_plus: float
    e_zero: float
    e_minus: float
    d_plus: np.ndarray
    d_zero: np.ndarray
    d_minus: np.ndarray

    def vectors(self) -> np.ndarray:
        """Eigenvectors as columns, ordered (D+, D0, D-)."""
        return np.column_stack([self.d_plus, self.d_zero, self.d_minus])


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalised complex amplitudes on (|1>, |2>, |3>)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape != (3,):
            raise ValueError(f"a state needs 3 amplitudes, got shape {amps.shape}")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > 1e-12:
            raise ValueError(f"state is not normalised: |psi|^2 = {norm2!r}")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @classmethod
    def basis(cls, k: int) -> StateVector:
        """Basis state |k> for k in {1, 2, 3}."""
        if k not in (1, 2, 3):
            raise ValueError(f"basis index must be 1, 2 or 3, got {k!r}")
        amps = np.zeros(3, dtype=complex)
        amps[k - 1] = 1.0
        return cls(amps)

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def overlap(self, other: StateVector) -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __eq__(self, other):
        if not isinstance(other, StateVector):
            return NotImplemented
        return bool(np.array_equal(self.amplitudes, other.amplitudes))

    def __hash__(self):
        return hash(self.amplitudes.tobytes())


def hamiltonian(c: CouplingPair) -> np.ndarray:
    """Real symmetric 3x3 Hamiltonian for the coupling pair."""
    h = np.zeros((3, 3))
    h[0, 1] = h[1, 0] = c.omega1
    h[1, 2] = h[2, 1] = c.omega2
    return h


def eigensystem(c: CouplingPair) -> EigenSystem:
    """Closed-form eigenvalues and eigenvectors.

    Sign convention: ``D0 = (omega2, 0, -omega1) / E`` and
    ``D+- = (omega1, +-E, omega2) / sqrt(2 E^2)`` with ``E = hypot(omega1, omega2)``.

    Raises
    ------
    DegenerateCouplingError
        If both couplings are zero.
    """
    gap = c.energy_gap
    if gap == 0.0:
        raise DegenerateCouplingError("eigenbasis undefined for omega1 = omega2 = 0")
    w1, w2 = c.omega1, c.omega2
    norm = math.sqrt(2.0) * gap
    d_plus = np.array([w1, gap, w2]) / norm
    d_minus = np.array([w1, -gap, w2]) / norm
    d_zero = np.array([w2, 0.0, -w1]) / gap
    return EigenSystem(
        energy_gap=gap,
        e_plus=gap,
        e_zero=0.0,
        e_minus=-gap,
        d_plus=_frozen(d_plus),
        d_zero=_frozen(d_zero),
        d_minus=_frozen(d_minus),
    )


def dark_state(c: CouplingPair) -> StateVector:
    """Zero-energy eigenstate, which carries no amplitude on |2>."""
    return StateVector(eigensystem(c).d_zero)
