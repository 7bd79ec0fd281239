import math

import numpy as np
import pytest

from dap.experiments import (
    NULL_THRESHOLD,
    SweepResult,
    Table,
    detect_nulls,
    error_vs_n,
    evolution_map,
    fidelity_row,
    match_resonances,
    matched_uniform_protocol,
    pulse_length_profile,
    scheme_profile,
    sweep_grid,
    sweep_tmax,
    timeseries_experiment,
)
from dap.propagator import compose, evolve_trajectory, transfer_fidelity
from dap.schemes import build_protocol, protocol_from_levels, reverse_protocol, step_index

PI = math.pi


def test_timeseries_fig3b_transfer():
    traj = timeseries_experiment("sincos", "uniform", 15, 15 * PI, samples_per_step=8)
    assert traj.populations[-1, 2] == pytest.approx(1.0, abs=1e-10)
    assert traj.times[-1] == pytest.approx(15 * PI, rel=1e-15)


def test_timeseries_fig3e_identity():
    traj = timeseries_experiment("sincos", "uniform", 15, 30 * PI, samples_per_step=8)
    assert traj.populations[-1, 2] < 1e-10


def test_timeseries_fig7b_compensated():
    traj = timeseries_experiment("linear", "compensated", 7)
    assert traj.populations[-1, 2] == pytest.approx(1.0, abs=1e-10)
    uniform = evolve_trajectory(matched_uniform_protocol("linear", 7))
    assert traj.populations[:, 1].max() < uniform.populations[:, 1].max()
    assert uniform.populations[-1, 2] < 1 - 1e-3


def _brute_fidelity(scheme, timing, n, t_max):
    if timing == "uniform":
        return transfer_fidelity(build_protocol(scheme, n, t_max))
    base = build_protocol(scheme, n, None, 1.0, "compensated")
    p = protocol_from_levels(base.omega1, base.omega2, base.durations * t_max / base.total_time)
    return transfer_fidelity(p)


@pytest.mark.parametrize("scheme", ["sincos", "linear"])
@pytest.mark.parametrize("timing", ["uniform", "compensated"])
def test_fidelity_row_matches_compose(scheme, timing):
    t_values = np.linspace(0.5, 70.0, 23)
    row = fidelity_row(scheme, timing, 6, t_values)
    brute = [_brute_fidelity(scheme, timing, 6, t) for t in t_values]
    np.testing.assert_allclose(row, brute, atol=1e-12)


def test_sweep_tmax_n3_nulls():
    result = sweep_tmax("sincos", 3, (0.0, 40 * PI), 2000)
    assert result.shape == (1, 2000)
    assert result.t_max_values[0] == pytest.approx(40 * PI / 2000)
    assert result.t_max_values[-1] == pytest.approx(40 * PI)
    nulls = detect_nulls(result.t_max_values, result.fidelity[0])
    cell = 40 * PI / 2000
    positive = nulls[nulls > cell]
    np.testing.assert_allclose(positive, 6 * PI * np.arange(1, 7), atol=cell)
    orders, spurious = match_resonances(nulls, 3, 1.0, cell)
    assert orders == [0, 1, 2, 3, 4, 5, 6] and spurious == []


def test_sweep_tmax_n4_nulls():
    result = sweep_tmax("sincos", 4, (0.0, 40 * PI), 2000)
    nulls = detect_nulls(result.t_max_values, result.fidelity[0])
    cell = 40 * PI / 2000
    np.testing.assert_allclose(nulls[nulls > cell], 8 * PI * np.arange(1, 6), atol=cell)


def test_sudden_limit():
    result = sweep_tmax("sincos", 3, (0.0, 1e-3), 10)
    assert np.all(result.fidelity < 1e-6)
    assert np.all(np.diff(result.fidelity[0]) > 0)


def test_sweep_tmax_validation():
    with pytest.raises(ValueError):
        sweep_tmax("sincos", 3, (0.0, 1.0), 1)
    with pytest.raises(ValueError):
        sweep_tmax("sincos", 3, (2.0, 1.0), 10)
    with pytest.raises(ValueError):
        sweep_tmax("sincos", 2, (0.0, 1.0), 10)


def test_detect_nulls_runs():
    t = np.arange(10.0)
    f = np.array([1, 1e-7, 1e-9, 1e-8, 1, 1, 1e-7, 1, 1, 1e-12])
    np.testing.assert_array_equal(detect_nulls(t, f), [2.0, 6.0, 9.0])
    assert len(detect_nulls(t, np.ones(10))) == 0


def test_sweep_grid_cells():
    result = sweep_grid("sincos", "uniform", (3, 50), (0.0, 120 * PI), 600)
    assert result.shape == (48, 600)
    assert result.n_values[0] == 3
    j10 = int(np.argmin(np.abs(result.t_max_values - 10 * PI)))
    j45 = int(np.argmin(np.abs(result.t_max_values - 45 * PI)))
    assert result.error[result.n_values == 5, j10][0] == pytest.approx(1.0, abs=1e-10)
    assert result.error[result.n_values == 45, j45][0] < 1e-10
    assert np.all((result.fidelity >= 0) & (result.fidelity <= 1))


def test_sweep_grid_reversal_symmetry():
    result = sweep_grid("linear", "uniform", (3, 7), (0.0, 25.0), 5)
    for i, n in enumerate(result.n_values):
        for j, t in enumerate(result.t_max_values):
            p = build_protocol("linear", int(n), t)
            reversed_fid = abs(compose(reverse_protocol(p))[0, 2]) ** 2
            assert result.fidelity[i, j] == pytest.approx(reversed_fid, abs=1e-12)


def test_compensated_sincos_equals_uniform():
    comp = sweep_grid("sincos", "compensated", (3, 29), (0.0, 29 * PI), 29)
    uni = sweep_grid("sincos", "uniform", (3, 29), (0.0, 29 * PI), 29)
    assert np.abs(comp.fidelity - uni.fidelity).max() < 1e-14
    for n in range(3, 30):
        p = build_protocol("sincos", n, None, 1.0, "compensated")
        assert p.total_time == pytest.approx(n * PI, rel=1e-14)


@pytest.mark.parametrize("n", [5, 7, 9, 15, 21, 45])
def test_compensated_beats_uniform_at_matched_time(n):
    comp = build_protocol("linear", n, None, 1.0, "compensated")
    uni = matched_uniform_protocol("linear", n)
    assert uni.total_time == pytest.approx(comp.total_time, rel=1e-14)
    assert 1 - transfer_fidelity(comp) <= 1 - transfer_fidelity(uni)
    assert transfer_fidelity(comp) == pytest.approx(1.0, abs=1e-10)


def test_error_vs_n_examples():
    result = error_vs_n("sincos", [100 * PI, 101 * PI], (3, 120))
    err = result.error
    row = lambda n: err[result.n_values == n][0]  # noqa: E731
    assert row(50)[0] == pytest.approx(1.0, abs=1e-10)
    assert row(101)[1] < 1e-10
    assert 0 < row(3)[0] < 1
    expected = [n * math.sin(PI / (2 * (n - 1))) ** 2 for n in result.n_values]
    np.testing.assert_allclose(result.extra["eta_total"][:, 1], expected, rtol=1e-15)


def test_error_vs_n_trend():
    result = error_vs_n("sincos", [101 * PI], (3, 120))
    err = result.error[:, 0]
    n = result.n_values
    # off-resonance error falls with N
    assert np.median(err[(n >= 80)]) < np.median(err[(n <= 20)])


def test_parallel_rows_are_identical():
    serial = sweep_grid("linear", "uniform", (3, 20), (0.0, 60.0), 50, workers=1)
    parallel = sweep_grid("linear", "uniform", (3, 20), (0.0, 60.0), 50, workers=4)
    assert serial == parallel
    assert np.array_equal(serial.fidelity, parallel.fidelity)


def test_sweep_deterministic():
    a = error_vs_n("linear", [100 * PI], (3, 30))
    b = error_vs_n("linear", [100 * PI], (3, 30))
    assert a == b


def test_sweep_result_validation():
    with pytest.raises(ValueError):
        SweepResult("x", "sincos", "uniform", 1.0, [3], [1.0], [[1.5]])
    with pytest.raises(ValueError):
        SweepResult("x", "sincos", "uniform", 1.0, [3], [1.0, 2.0], [[0.5]])
    empty = SweepResult("x", "sincos", "uniform", 1.0, [], [], np.zeros((0, 0)))
    assert empty.shape == (0, 0)


def test_scheme_profile():
    prof = scheme_profile("linear", 15, samples=101)
    assert isinstance(prof, Table)
    cols = prof.columns
    assert np.argmin(cols["e_plus"]) == 50
    assert cols["adiabaticity_x_tmax"][50] == pytest.approx(2.0)
    sc = scheme_profile("sincos", 15, samples=101).columns
    np.testing.assert_allclose(sc["e_plus"], 1.0, rtol=1e-15)
    np.testing.assert_allclose(sc["adiabaticity_x_tmax"], PI * math.sqrt(2) / 4)
    # digital columns follow the floor(N t / t_max) step rule
    for k in (0, 37, 99):
        xi = step_index(cols["fraction"][k], 15, 1.0)
        assert cols["digital_omega1"][k] == pytest.approx(xi / 14)


def test_pulse_length_profile():
    table = pulse_length_profile("linear", 15)
    c = table.columns
    assert np.argmax(c["tau_compensated"]) == 7
    assert c["ratio"][7] > 1 > c["ratio"][0]
    assert c["tau_uniform"].sum() == pytest.approx(c["tau_compensated"].sum())


def test_evolution_map_layout():
    t_values = PI * np.array([5.0, 10.0])
    emap = evolution_map("sincos", 5, t_values, samples_per_step=4)
    c = emap.columns
    assert len(emap) == 2 * (1 + 5 * 4)
    end = c["fraction"] == 1.0
    np.testing.assert_allclose(c["p3"][end], [1.0, 0.0], atol=1e-10)
