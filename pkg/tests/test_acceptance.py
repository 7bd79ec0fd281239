"""Exit criteria, one test per criterion at its pinned tolerance.

Run ``pytest tests/test_acceptance.py`` to get one PASS/FAIL line per
criterion in the terminal summary.
"""

import io
import math
import time

import numpy as np

from dap.analysis import (
    adiabaticity_general,
    adiabaticity_linear,
    adiabaticity_sincos,
    dark_state_deficits,
    total_error_estimate,
)
from dap.cli import main
from dap.core import CouplingPair
from dap.experiments import detect_nulls, match_resonances, matched_uniform_protocol, sweep_tmax
from dap.io import read_dataset, write_dataset
from dap.propagator import compose, evolve_trajectory, expm_oracle, step_unitary, transfer_fidelity, unitarity_defect
from dap.schemes import build_protocol, continuous_couplings, continuous_derivative, protocol_from_levels

from conftest import record_criterion

PI = math.pi
TIME_LIMIT = 10.0


class _Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_c01_identity_resonances():
    worst = 0.0
    with _Timer() as t:
        for n, order in [(5, 1), (15, 1), (45, 1), (5, 2), (7, 3)]:
            u = compose(build_protocol("sincos", n, 2 * order * n * PI))
            worst = max(worst, float(np.abs(u - np.eye(3)).max()))
    record_criterion(1, "identity resonances", worst < 1e-10 and t.elapsed < TIME_LIMIT,
                     f"max |U - I| = {worst:.2e} < 1e-10")


def test_c02_exact_odd_n_transfer():
    worst = 0.0
    with _Timer() as t:
        for n in (5, 15, 45):
            p = build_protocol("sincos", n, n * PI)
            oracle = abs(compose(p, propagator=expm_oracle)[2, 0]) ** 2
            worst = max(worst, abs(transfer_fidelity(p) - 1), abs(oracle - 1))
    record_criterion(2, "exact odd-N transfer", worst < 1e-10 and t.elapsed < TIME_LIMIT,
                     f"max |F - 1| = {worst:.2e} < 1e-10 (closed form and oracle)")


def test_c03_compensated_complete_transfer():
    details, ok = [], True
    with _Timer() as t:
        for n in (7, 45):
            comp = build_protocol("linear", n, None, 1.0, "compensated")
            uni = matched_uniform_protocol("linear", n)
            f = transfer_fidelity(comp)
            peak_comp = evolve_trajectory(comp).populations[:, 1].max()
            peak_uni = evolve_trajectory(uni).populations[:, 1].max()
            ok &= abs(f - 1) < 1e-10 and peak_comp < peak_uni
            details.append(f"N={n}: |F-1|={abs(f - 1):.1e}, peak P2 {peak_comp:.4g} < {peak_uni:.4g}")
    record_criterion(3, "compensated complete transfer", ok and t.elapsed < TIME_LIMIT, "; ".join(details))


def test_c04_oracle_equivalence_and_unitarity():
    rng = np.random.default_rng(4)
    with _Timer() as t:
        draws = np.column_stack([rng.uniform(0, 1, 1000), rng.uniform(0, 1, 1000), rng.uniform(0, 20, 1000)])
        dev = max(float(np.abs(step_unitary(CouplingPair(a, b), tau) - expm_oracle(CouplingPair(a, b), tau)).max())
                  for a, b, tau in draws)
        unit_ok = True
        for n in (1, 10, 100, 1000):
            p = protocol_from_levels(rng.uniform(0, 1, n), rng.uniform(0, 1, n), rng.uniform(0, 20, n))
            unit_ok &= unitarity_defect(compose(p)) < n * 1e-14
        for scheme in ("sincos", "linear"):
            unit_ok &= unitarity_defect(compose(build_protocol(scheme, 1000, 1234.5))) < 1000 * 1e-14
    record_criterion(4, "oracle equivalence and unitarity", dev < 1e-12 and unit_ok and t.elapsed < TIME_LIMIT,
                     f"max entry deviation {dev:.2e} < 1e-12; unitarity within N*1e-14: {unit_ok}")


def test_c05_analytic_adiabaticity():
    rng = np.random.default_rng(5)
    t_max, om = 17.0, 1.3
    rel_sc = rel_lin = 0.0
    sincos_values = []
    for t in rng.uniform(0, t_max, 100):
        for scheme in ("sincos", "linear"):
            general = adiabaticity_general(continuous_couplings(scheme, t, t_max, om),
                                           continuous_derivative(scheme, t, t_max, om))
            if scheme == "sincos":
                sincos_values.append(general)
                rel_sc = max(rel_sc, abs(general / adiabaticity_sincos(t_max, om) - 1))
            else:
                rel_lin = max(rel_lin, abs(general / adiabaticity_linear(t, t_max, om) - 1))
    spread = (max(sincos_values) - min(sincos_values)) / adiabaticity_sincos(t_max, om)
    peak = adiabaticity_linear(t_max / 2, t_max, om)
    peak_err = abs(peak * t_max * om - 2)
    ok = rel_sc < 1e-12 and rel_lin < 1e-12 and spread < 1e-14 and peak_err < 1e-14
    record_criterion(5, "analytic adiabaticity", ok,
                     f"rel err sincos {rel_sc:.1e}, linear {rel_lin:.1e}; t-spread {spread:.1e}; "
                     f"midpoint*t_max*Omega_M = {peak * t_max * om:.15g}")


def test_c06_overlap_error_analytics():
    worst = 0.0
    for n in range(3, 65):
        worst = max(worst, float(np.abs(dark_state_deficits("sincos", n) - math.sin(PI / (2 * (n - 1))) ** 2).max()))
    est = total_error_estimate(45)
    agree = abs(est.eta_asymptotic / est.eta_total - 1)
    ok = (worst < 1e-13 and abs(est.eta_total - 0.057307) < 1e-4 and abs(est.eta_asymptotic - 0.054831) < 1e-6
          and agree < 0.05)
    record_criterion(6, "overlap-error analytics", ok,
                     f"max deficit error {worst:.1e}; eta_T(45)={est.eta_total:.6f}, "
                     f"pi^2/180={est.eta_asymptotic:.6f}, differ by {100 * agree:.2f}% < 5%")


def test_c07_resonance_spacing():
    ok, parts = True, []
    with _Timer() as t:
        for n in range(3, 11):
            result = sweep_tmax("sincos", n, (0.0, 40 * PI), 2000)
            cell = result.t_max_values[1] - result.t_max_values[0]
            nulls = detect_nulls(result.t_max_values, result.fidelity[0], 1e-6)
            orders, spurious = match_resonances(nulls, n, 1.0, cell)
            expected = list(range(0, int(40 // (2 * n)) + 1))
            ok &= orders == expected
            if n % 2:
                ok &= not spurious
            parts.append(f"N={n}:{len(orders)}")
    record_criterion(7, "resonance spacing", ok and t.elapsed < TIME_LIMIT,
                     "nulls matched to 2nN*pi within one cell, none spurious; " + " ".join(parts))


def test_c08_eigenenergy_constancy():
    ulp = np.spacing(1.0)
    worst = 0.0
    for n in range(3, 200):
        gaps = build_protocol("sincos", n, 1.0).energy_gaps
        worst = max(worst, float(np.abs(gaps - 1.0).max()))
    gaps = build_protocol("linear", 15, 1.0).energy_gaps
    mid_ok = int(np.argmin(gaps)) == 7 and abs(gaps.min() - 1 / math.sqrt(2)) <= ulp
    ok = worst <= ulp and mid_ok
    record_criterion(8, "eigenenergy constancy", ok,
                     f"sincos max |E - Omega_M| = {worst:.1e} (<= 1 ulp); linear min gap {gaps.min():.17g} at xi=7")


def test_c09_transient_p2():
    eta = math.sin(PI / 88) ** 2
    traj = evolve_trajectory(build_protocol("sincos", 45, 45 * PI))
    peak = traj.populations[:, 1].max()
    ok = eta / 4 <= peak <= 4 * eta
    record_criterion(9, "transient |2> population", ok, f"max P2 = {peak:.4e}, eta = {eta:.4e}, ratio {peak / eta:.3f}")


def test_c10_determinism_and_serialisation(tmp_path):
    runs = [
        ["evolve", "--scheme", "sincos", "--steps", "15", "--tmax-pi", "15", "--out", "{d}/evolve.csv"],
        ["evolve", "--scheme", "linear", "--timing", "compensated", "--steps", "7", "--out", "{d}/evolve.json"],
        ["sweep-grid", "--steps-range", "3", "12", "--tmax-pi-range", "0", "40", "--resolution", "80",
         "--out", "{d}/grid.csv"],
        ["error-vs-n", "--steps-range", "3", "30", "--out", "{d}/err.json"],
    ]
    blobs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        d.mkdir()
        for argv in runs:
            assert main([a.format(d=d) for a in argv], out=io.StringIO()) == 0
        blobs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    identical = blobs[0] == blobs[1]

    traj = evolve_trajectory(build_protocol("linear", 9, 21.0), samples_per_step=5)
    round_trip = True
    for ext in ("csv", "json"):
        round_trip &= read_dataset(write_dataset(traj, tmp_path / f"t.{ext}")) == traj
    grid = read_dataset(tmp_path / "run0" / "err.json")
    round_trip &= read_dataset(write_dataset(grid, tmp_path / "g.json")) == grid
    record_criterion(10, "determinism and serialisation", identical and round_trip,
                     f"byte-identical reruns: {identical}; exact read-back: {round_trip}")
