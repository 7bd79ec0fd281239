"""Figure-scale experiments: time series, t_max sweeps, (N, t_max) grids.

Every sweep cell is a pure function of (scheme, timing, N, t_max, omega_max).
Rows (one per N) are independent work items and may be evaluated on a thread
pool; results are always assembled in axis order, so the output does not
depend on scheduling.

For sweeps under compensated timing the durations keep the ``pi / E(xi)``
shape but are rescaled to sum to the requested ``t_max``; the unscaled
compensated protocol is the point where that sum equals ``sum(pi / E)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import adiabaticity_profile, total_error_estimate
from .core import StateVector
from .propagator import DEFAULT_SAMPLES_PER_STEP, Trajectory, evolve_trajectory, final_states
from .schemes import (
    MIN_STEPS,
    Scheme,
    Timing,
    build_protocol,
    compensated_durations,
    digital_levels,
)

__all__ = [
    "NULL_THRESHOLD",
    "SweepResult",
    "Table",
    "step_durations",
    "fidelity_row",
    "timeseries_experiment",
    "matched_uniform_protocol",
    "sweep_tmax",
    "sweep_grid",
    "error_vs_n",
    "detect_nulls",
    "match_resonances",
    "scheme_profile",
    "pulse_length_profile",
    "evolution_map",
]

NULL_THRESHOLD = 1e-6


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Transfer fidelity on a Cartesian (N, t_max) grid.

    ``fidelity[i, j]`` belongs to ``n_values[i]`` and ``t_max_values[j]``;
    ``t_max`` is in units of 1 / omega_max. ``extra`` holds additional
    per-cell columns of the same shape (e.g. an analytic overlay).
    """

    experiment: str
    scheme: Scheme
    timing: Timing
    omega_max: float
    n_values: np.ndarray
    t_max_values: np.ndarray
    fidelity: np.ndarray
    extra: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n_values = np.asarray(self.n_values, dtype=np.int64).reshape(-1)
        t_values = np.asarray(self.t_max_values, float).reshape(-1)
        fid = np.asarray(self.fidelity, float).reshape(len(n_values), len(t_values))
        if np.any((fid < 0) | (fid > 1)):
            raise ValueError("fidelity values must lie in [0, 1]")
        extra = {}
        for name, values in self.extra.items():
            values = np.asarray(values, float)
            if values.shape != fid.shape:
                raise ValueError(f"extra column {name!r} has shape {values.shape}, expected {fid.shape}")
            extra[name] = values
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "timing", Timing(self.timing))
        object.__setattr__(self, "omega_max", float(self.omega_max))
        object.__setattr__(self, "n_values", n_values)
        object.__setattr__(self, "t_max_values", t_values)
        object.__setattr__(self, "fidelity", fid)
        object.__setattr__(self, "extra", extra)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def axes(self):
        return (("N", self.n_values), ("t_max", self.t_max_values))

    @property
    def error(self) -> np.ndarray:
        return 1.0 - self.fidelity

    @property
    def shape(self):
        return self.fidelity.shape

    def row(self, n_steps: int) -> np.ndarray:
        (idx,) = np.nonzero(self.n_values == n_steps)
        if len(idx) == 0:
            raise KeyError(n_steps)
        return self.fidelity[idx[0]]

    def __eq__(self, other):
        if not isinstance(other, SweepResult):
            return NotImplemented
        return (
            (self.experiment, self.scheme, self.timing, self.omega_max, self.metadata)
            == (other.experiment, other.scheme, other.timing, other.omega_max, other.metadata)
            and np.array_equal(self.n_values, other.n_values)
            and np.array_equal(self.t_max_values, other.t_max_values)
            and np.array_equal(self.fidelity, other.fidelity)
            and self.extra.keys() == other.extra.keys()
            and all(np.array_equal(v, other.extra[k]) for k, v in self.extra.items())
        )


@dataclass(frozen=True, eq=False)
class Table:
    """Named, equal-length numeric columns for auxiliary figure data."""

    name: str
    columns: dict
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        cols = {k: np.asarray(v, float).reshape(-1) for k, v in self.columns.items()}
        lengths = {len(v) for v in cols.values()}
        if len(lengths) > 1:
            raise ValueError(f"columns have unequal lengths {sorted(lengths)}")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "metadata", dict(self.metadata))

    def __len__(self):
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def __eq__(self, other):
        if not isinstance(other, Table):
            return NotImplemented
        return (
            self.name == other.name
            and self.metadata == other.metadata
            and list(self.columns) == list(other.columns)
            and all(np.array_equal(v, other.columns[k]) for k, v in self.columns.items())
        )


def _check_steps(n_steps):
    if n_steps < MIN_STEPS:
        raise ValueError(f"n_steps must be >= {MIN_STEPS}, got {n_steps}")


def step_durations(scheme, timing, n_steps, t_max_values, omega_max=1.0) -> np.ndarray:
    """Durations for every (t_max, step) pair, shape (len(t_max_values), N)."""
    t = np.asarray(t_max_values, float).reshape(-1, 1)
    if Timing(timing) is Timing.UNIFORM:
        return np.broadcast_to(t / n_steps, (t.shape[0], n_steps))
    shape = compensated_durations(*digital_levels(scheme, n_steps, omega_max))
    return t * (shape / shape.sum())


def fidelity_row(scheme, timing, n_steps, t_max_values, omega_max=1.0) -> np.ndarray:
    """Transfer fidelity |<3|U|1>|^2 for one N across many total times."""
    _check_steps(n_steps)
    w1, w2 = digital_levels(scheme, n_steps, omega_max)
    psi = final_states(w1, w2, step_durations(scheme, timing, n_steps, t_max_values, omega_max))
    # rounding can push |amp|^2 a few ulp past 1
    return np.clip(np.abs(psi[:, 2]) ** 2, 0.0, 1.0)


def _rows(scheme, timing, n_values, t_max_values, omega_max, workers):
    n_values = [int(n) for n in n_values]
    for n in n_values:
        _check_steps(n)
    t_max_values = np.asarray(t_max_values, float)

    def work(n):
        return fidelity_row(scheme, timing, n, t_max_values, omega_max)

    if workers and workers > 1 and len(n_values) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(work, n_values))
    else:
        rows = [work(n) for n in n_values]
    if not rows:
        return np.zeros((0, len(t_max_values)))
    return np.vstack(rows)


def _half_open_range(t_max_range, resolution):
    lo, hi = map(float, t_max_range)
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    if not 0 <= lo < hi:
        raise ValueError(f"t_max range must satisfy 0 <= lo < hi, got ({lo}, {hi})")
    return lo + (hi - lo) * np.arange(1, resolution + 1) / resolution


def timeseries_experiment(scheme, timing, n_steps, t_max=None, samples_per_step=DEFAULT_SAMPLES_PER_STEP,
                          omega_max=1.0) -> Trajectory:
    """Populations through one protocol starting in |1>."""
    protocol = build_protocol(scheme, n_steps, t_max, omega_max, timing)
    return evolve_trajectory(protocol, StateVector.basis(1), samples_per_step)


def matched_uniform_protocol(scheme, n_steps, omega_max=1.0):
    """Uniform-timing protocol whose total time equals the compensated one."""
    compensated = build_protocol(scheme, n_steps, None, omega_max, Timing.COMPENSATED)
    return build_protocol(scheme, n_steps, compensated.total_time, omega_max, Timing.UNIFORM)


def sweep_tmax(scheme, n_steps, t_max_range, resolution, timing=Timing.UNIFORM,
               omega_max=1.0) -> SweepResult:
    """Fidelity against total time on ``resolution`` points spanning (lo, hi]."""
    _check_steps(n_steps)
    t_values = _half_open_range(t_max_range, resolution)
    fid = fidelity_row(scheme, timing, n_steps, t_values, omega_max)[None, :]
    return SweepResult("sweep_tmax", scheme, timing, omega_max, [n_steps], t_values, fid)


def sweep_grid(scheme, timing, n_range, t_max_range, resolution, omega_max=1.0,
               workers=None) -> SweepResult:
    """Fidelity over N in ``n_range`` (inclusive) and t_max on (lo, hi]."""
    n_lo, n_hi = map(int, n_range)
    n_values = np.arange(n_lo, n_hi + 1)
    t_values = _half_open_range(t_max_range, resolution)
    fid = _rows(scheme, timing, n_values, t_values, omega_max, workers)
    return SweepResult("sweep_grid", scheme, timing, omega_max, n_values, t_values, fid)


def error_vs_n(scheme, t_max_list, n_range, timing=Timing.UNIFORM, omega_max=1.0,
               workers=None) -> SweepResult:
    """Fidelity per N at a few fixed total times, with the eta_T overlay."""
    n_lo, n_hi = map(int, n_range)
    n_values = np.arange(n_lo, n_hi + 1)
    t_values = np.asarray(t_max_list, float)
    fid = _rows(scheme, timing, n_values, t_values, omega_max, workers)
    eta = np.array([total_error_estimate(int(n)).eta_total for n in n_values])
    overlay = np.repeat(eta[:, None], len(t_values), axis=1)
    return SweepResult("error_vs_n", scheme, timing, omega_max, n_values, t_values, fid,
                       extra={"eta_total": overlay})


def detect_nulls(t_values, fidelity, threshold=NULL_THRESHOLD) -> np.ndarray:
    """Locations of zero-transfer nulls.

    Each contiguous run of samples below ``threshold`` counts as one null,
    reported at its lowest sample.
    """
    t_values = np.asarray(t_values, float)
    fidelity = np.asarray(fidelity, float)
    below = fidelity < threshold
    nulls = []
    k = 0
    while k < len(below):
        if below[k]:
            end = k
            while end + 1 < len(below) and below[end + 1]:
                end += 1
            nulls.append(t_values[k + int(np.argmin(fidelity[k:end + 1]))])
            k = end + 1
        else:
            k += 1
    return np.array(nulls)


def match_resonances(nulls, n_steps, omega_max, tolerance):
    """Split nulls into those within ``tolerance`` of some ``2 n N pi / omega_max`` and the rest.

    Order n = 0 (t_max -> 0, no evolution at all) counts as a resonance.
    Returns ``(matched_orders, spurious_times)``.
    """
    spacing = 2 * n_steps * math.pi / omega_max
    matched, spurious = [], []
    for t in nulls:
        order = round(t / spacing)
        if abs(t - order * spacing) <= tolerance:
            matched.append(order)
        else:
            spurious.append(t)
    return matched, spurious


def scheme_profile(scheme, n_steps=15, samples=201, omega_max=1.0) -> Table:
    """Continuous and digital couplings, eigenenergies and normalised adiabaticity.

    Adiabaticity is multiplied by the total time, which makes it independent
    of t_max.
    """
    _check_steps(n_steps)
    s = np.linspace(0.0, 1.0, samples)
    scheme = Scheme(scheme)
    if scheme is Scheme.SINCOS:
        w1, w2 = omega_max * np.sin(s * np.pi / 2), omega_max * np.cos(s * np.pi / 2)
    else:
        w1, w2 = omega_max * s, omega_max * (1 - s)
    levels1, levels2 = digital_levels(scheme, n_steps, omega_max)
    xi = np.minimum(np.floor(n_steps * s).astype(int), n_steps - 1)
    gap = np.hypot(w1, w2)
    cols = {
        "fraction": s,
        "omega1": w1,
        "omega2": w2,
        "e_plus": gap,
        "e_zero": np.zeros_like(s),
        "e_minus": -gap,
        "adiabaticity_x_tmax": adiabaticity_profile(scheme, s, 1.0, omega_max),
        "digital_omega1": levels1[xi],
        "digital_omega2": levels2[xi],
        "digital_e_plus": np.hypot(levels1[xi], levels2[xi]),
    }
    return Table(f"profile_{scheme.value}", cols, {"scheme": scheme.value, "N": n_steps,
                                                    "omega_max": omega_max})


def pulse_length_profile(scheme, n_steps, omega_max=1.0) -> Table:
    """Compensated step lengths next to the uniform ones at matched total time."""
    _check_steps(n_steps)
    w1, w2 = digital_levels(scheme, n_steps, omega_max)
    tau = compensated_durations(w1, w2)
    uniform = np.full(n_steps, tau.sum() / n_steps)
    cols = {
        "xi": np.arange(n_steps),
        "omega1": w1,
        "omega2": w2,
        "energy_gap": np.hypot(w1, w2),
        "tau_compensated": tau,
        "tau_uniform": uniform,
        "ratio": tau / uniform,
    }
    return Table(f"pulse_lengths_{Scheme(scheme).value}", cols,
                 {"scheme": Scheme(scheme).value, "N": n_steps, "omega_max": omega_max,
                  "t_max": float(tau.sum())})


def evolution_map(scheme, n_steps, t_max_values, samples_per_step=8, timing=Timing.UNIFORM,
                  omega_max=1.0) -> Table:
    """Populations against fractional time for a range of total times.

    Long format: one row per (t_max, sample). With uniform timing the samples
    sit at the same fractional times for every t_max.
    """
    t_col, f_col, pops = [], [], []
    for t_max in np.asarray(t_max_values, float):
        protocol = build_protocol(scheme, n_steps, t_max, omega_max, timing)
        traj = evolve_trajectory(protocol, StateVector.basis(1), samples_per_step)
        t_col.append(np.full(len(traj), t_max))
        f_col.append(traj.times / protocol.total_time)
        pops.append(traj.populations)
    if pops:
        pops = np.concatenate(pops)
        t_col, f_col = np.concatenate(t_col), np.concatenate(f_col)
    else:
        pops, t_col, f_col = np.zeros((0, 3)), np.zeros(0), np.zeros(0)
    cols = {"t_max": t_col, "fraction": f_col, "p1": pops[:, 0], "p2": pops[:, 1], "p3": pops[:, 2]}
    return Table(f"evolution_map_{Scheme(scheme).value}", cols,
                 {"scheme": Scheme(scheme).value, "timing": Timing(timing).value, "N": n_steps,
                  "omega_max": omega_max})
