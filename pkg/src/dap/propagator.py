"""Exact propagation under piecewise-constant couplings.

Every step is evolved with the closed-form 3x3 unitary

    U = I + i sin(E tau) H / E + (cos(E tau) - 1) H^2 / E^2,

i.e. ``exp(+i H tau)``. That is the sign carried by the textbook matrix this
package reproduces entry by entry; ``exp(-i H tau)`` is its complex conjugate
and gives identical populations. ``expm_oracle`` uses the matching sign so the
two can be compared directly.

No integrator is involved anywhere: intermediate samples inside a step use the
same closed form with a partial duration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CouplingPair, StateVector, hamiltonian
from .schemes import Protocol

__all__ = [
    "DEFAULT_SAMPLES_PER_STEP",
    "Trajectory",
    "step_unitary",
    "step_unitaries",
    "expm_oracle",
    "compose",
    "unitarity_defect",
    "evolve_trajectory",
    "transfer_fidelity",
    "final_states",
]

DEFAULT_SAMPLES_PER_STEP = 64


def step_unitaries(omega1, omega2, tau) -> np.ndarray:
    """Broadcasting form of :func:`step_unitary`.

    Parameters
    ----------
    omega1, omega2, tau : array_like
        Broadcast against each other; ``tau`` must be non-negative.

    Returns
    -------
    np.ndarray
        Complex array of shape ``broadcast_shape + (3, 3)``.
    """
    w1, w2, tau = np.broadcast_arrays(
        np.asarray(omega1, float), np.asarray(omega2, float), np.asarray(tau, float)
    )
    if np.any(tau < 0):
        raise ValueError("step duration must be non-negative")
    gap2 = w1 * w1 + w2 * w2
    gap = np.sqrt(gap2)
    phase = gap * tau
    c = np.cos(phase)
    s = np.sin(phase)
    zero = gap2 == 0
    safe_gap = np.where(zero, 1.0, gap)
    safe_gap2 = np.where(zero, 1.0, gap2)
    # E=0 means H=0: the limit of every entry below is the identity
    c = np.where(zero, 1.0, c)
    s = np.where(zero, 0.0, s)

    u = np.empty(w1.shape + (3, 3), dtype=complex)
    u[..., 0, 0] = np.where(zero, 1.0, (w2 * w2 + w1 * w1 * c) / safe_gap2)
    u[..., 1, 1] = c
    u[..., 2, 2] = np.where(zero, 1.0, (w1 * w1 + w2 * w2 * c) / safe_gap2)
    u[..., 0, 1] = u[..., 1, 0] = 1j * w1 * s / safe_gap
    u[..., 1, 2] = u[..., 2, 1] = 1j * w2 * s / safe_gap
    u[..., 0, 2] = u[..., 2, 0] = w1 * w2 * (c - 1) / safe_gap2
    return u


def step_unitary(c: CouplingPair, tau: float) -> np.ndarray:
    """Closed-form evolution operator for one step of length ``tau``.

    Returns the identity when both couplings vanish.
    """
    if tau < 0:
        raise ValueError(f"step duration must be non-negative, got {tau!r}")
    return step_unitaries(c.omega1, c.omega2, tau)


def expm_oracle(c: CouplingPair, tau: float, order: int = 18) -> np.ndarray:
    """Independent ``exp(+i H tau)`` by truncated Taylor series with scaling and squaring.

    Shares nothing with :func:`step_unitary` beyond :func:`dap.core.hamiltonian`.
    """
    if tau < 0:
        raise ValueError(f"step duration must be non-negative, got {tau!r}")
    a = 1j * tau * hamiltonian(c)
    norm = np.abs(a).sum(axis=0).max()
    squarings = max(0, math.ceil(math.log2(norm / 0.25))) if norm > 0 else 0
    a = a / 2.0**squarings

    result = np.eye(3, dtype=complex)
    term = np.eye(3, dtype=complex)
    for k in range(1, order + 1):
        term = term @ a / k
        result = result + term
    for _ in range(squarings):
        result = result @ result
    return result


def compose(p: Protocol, propagator=step_unitary) -> np.ndarray:
    """Total evolution operator, with the first step applied first.

    ``propagator`` may be swapped for :func:`expm_oracle` to cross-check.
    """
    total = np.eye(3, dtype=complex)
    for step in p.steps:
        total = propagator(step.couplings, step.duration) @ total
    return total


def unitarity_defect(u: np.ndarray) -> float:
    """max |U^dagger U - I| over entries."""
    return float(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max())


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples of the state through a protocol.

    ``states`` has shape (M, 3) complex, ``populations`` (M, 3) real, and
    ``times`` (M,) in units of 1 / omega_max.
    """

    times: np.ndarray
    states: np.ndarray
    populations: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, float)
        states = np.asarray(self.states, complex).reshape(-1, 3)
        pops = np.asarray(self.populations, float).reshape(-1, 3)
        if not len(times) == len(states) == len(pops):
            raise ValueError("times, states and populations must have equal length")
        for arr in (times, states, pops):
            arr.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "populations", pops)

    def __len__(self):
        return len(self.times)

    @property
    def final_state(self) -> StateVector:
        return StateVector(self.states[-1])

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (np.array_equal(self.times, other.times)
                and np.array_equal(self.states, other.states)
                and np.array_equal(self.populations, other.populations))


def evolve_trajectory(p: Protocol, initial: StateVector | None = None,
                      samples_per_step: int = DEFAULT_SAMPLES_PER_STEP) -> Trajectory:
    """Sample the exact state at ``samples_per_step`` evenly spaced points per step.

    The first sample is the initial state at t = 0; the last sample of each
    step is its endpoint, which is also where the next step starts. Steps of
    zero duration contribute no samples.
    """
    if samples_per_step < 1:
        raise ValueError(f"samples_per_step must be >= 1, got {samples_per_step}")
    if initial is None:
        initial = StateVector.basis(1)
    elif not isinstance(initial, StateVector):
        initial = StateVector(initial)

    fractions = np.arange(1, samples_per_step + 1) / samples_per_step
    psi = initial.amplitudes.copy()
    times = [np.zeros(1)]
    states = [psi[None, :]]
    t0 = 0.0
    for step in p.steps:
        if step.duration == 0:
            continue
        partial = step.duration * fractions
        us = step_unitaries(step.couplings.omega1, step.couplings.omega2, partial)
        block = us @ psi
        # pin the step endpoint to the full-duration unitary
        psi = block[-1]
        times.append(t0 + partial)
        states.append(block)
        t0 += step.duration
    states = np.concatenate(states)
    return Trajectory(np.concatenate(times), states, np.abs(states) ** 2)


def transfer_fidelity(p: Protocol) -> float:
    """Final population of |3> starting from |1>."""
    # rounding can push |amp|^2 a few ulp past 1
    return min(1.0, float(abs(compose(p)[2, 0]) ** 2))


def final_states(omega1, omega2, durations, initial=None) -> np.ndarray:
    """Batch propagate one level sequence under many duration sets.

    Parameters
    ----------
    omega1, omega2 : array_like, shape (N,)
        Step levels.
    durations : array_like, shape (B, N)
        One row of step durations per batch member.
    initial : array_like, optional
        Starting amplitudes; |1> by default.

    Returns
    -------
    np.ndarray
        Final amplitudes, shape (B, 3).
    """
    durations = np.atleast_2d(np.asarray(durations, float))
    batch, n = durations.shape
    if len(omega1) != n or len(omega2) != n:
        raise ValueError("durations must have one column per step")
    psi = np.zeros((batch, 3), dtype=complex)
    if initial is None:
        psi[:, 0] = 1.0
    else:
        psi[:] = np.asarray(initial, complex)
    for xi in range(n):
        us = step_unitaries(omega1[xi], omega2[xi], durations[:, xi])
        psi = np.einsum("bij,bj->bi", us, psi)
    return psi
