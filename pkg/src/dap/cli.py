"""Command-line entry point: ``dap <command> [flags]``.

Total times are given in multiples of pi / omega_max (``--tmax-pi``); written
datasets carry times in units of 1 / omega_max. Every command is a pure
function of its flags.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, experiments
from .io import DatasetWriteError, read_dataset, write_dataset
from .propagator import DEFAULT_SAMPLES_PER_STEP, evolve_trajectory
from .schemes import MIN_STEPS, Scheme, Timing, build_protocol

COMMANDS = ("evolve", "sweep-tmax", "sweep-grid", "error-vs-n", "analyze", "resonances",
            "reproduce", "check-scaling")
FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8")
THREADS_ENV = "DAP_THREADS"


class ConfigError(ValueError):
    def __init__(self, flag, message):
        super().__init__(f"{flag}: {message}")
        self.flag = flag


@dataclass
class RunConfig:
    command: str
    scheme: str = Scheme.SINCOS.value
    timing: str = Timing.UNIFORM.value
    n_steps: int | None = None
    t_max_pi_units: float | None = None
    omega_max: float = 1.0
    samples_per_step: int = DEFAULT_SAMPLES_PER_STEP
    output_path: str | None = None
    format: str | None = None
    steps_range: tuple[int, int] | None = None
    tmax_pi_range: tuple[float, float] | None = None
    tmax_pi_list: list[float] = field(default_factory=list)
    resolution: int | None = None
    n_max: int = 3
    figure: str | None = None
    factor: float = 2.0
    protocol_path: str | None = None

    @property
    def t_max(self):
        if self.t_max_pi_units is None:
            return None
        return self.t_max_pi_units * math.pi / self.omega_max

    def validate(self):
        if not (math.isfinite(self.omega_max) and self.omega_max > 0):
            raise ConfigError("--omega-max", "omega-max must be > 0")
        if self.n_steps is not None and self.n_steps < MIN_STEPS:
            raise ConfigError("--steps", f"steps must be ≥ {MIN_STEPS}")
        if self.samples_per_step < 1:
            raise ConfigError("--samples-per-step", "samples-per-step must be ≥ 1")
        if self.t_max_pi_units is not None and not self.t_max_pi_units > 0:
            raise ConfigError("--tmax-pi", "tmax-pi must be > 0")
        if self.resolution is not None and self.resolution < 2:
            raise ConfigError("--resolution", "resolution must be ≥ 2")
        if self.steps_range is not None:
            lo, hi = self.steps_range
            if lo < MIN_STEPS:
                raise ConfigError("--steps-range", f"steps must be ≥ {MIN_STEPS}")
            if hi < lo:
                raise ConfigError("--steps-range", "upper bound must be ≥ lower bound")
        if self.tmax_pi_range is not None:
            lo, hi = self.tmax_pi_range
            if not 0 <= lo < hi:
                raise ConfigError("--tmax-pi-range", "range must satisfy 0 ≤ LO < HI")
        if any(not t > 0 for t in self.tmax_pi_list):
            raise ConfigError("--tmax-pi", "tmax-pi must be > 0")
        if self.n_max < 1:
            raise ConfigError("--n-max", "n-max must be ≥ 1")
        if not (math.isfinite(self.factor) and self.factor > 0):
            raise ConfigError("--factor", "factor must be > 0")
        needs_steps = self.command in ("evolve", "sweep-tmax", "analyze", "resonances", "check-scaling")
        if needs_steps and self.n_steps is None and self.protocol_path is None:
            raise ConfigError("--steps", "steps is required")
        uniform = self.timing == Timing.UNIFORM.value
        if (self.command in ("evolve", "check-scaling") and uniform and self.protocol_path is None
                and self.t_max_pi_units is None):
            raise ConfigError("--tmax-pi", "tmax-pi is required for uniform timing")
        if self.format not in (None, "csv", "json"):
            raise ConfigError("--format", "format must be csv or json")
        return self

    def flags(self) -> dict:
        """Non-empty settings, echoed into dataset metadata."""
        out = {}
        for key, value in asdict(self).items():
            if value is None or value == [] or key in ("output_path", "format"):
                continue
            out[key] = list(value) if isinstance(value, tuple) else value
        return out


def threads_from_env(environ=None) -> int:
    raw = (os.environ if environ is None else environ).get(THREADS_ENV)
    if raw is None or raw == "":
        return 1
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value < 1:
        raise ConfigError(THREADS_ENV, "must be a positive integer")
    return value


def _add_common(p, steps=True, tmax=True):
    p.add_argument("--scheme", choices=[Scheme.SINCOS.value, Scheme.LINEAR.value], default="sincos",
                   help="coupling scheme (default: sincos)")
    p.add_argument("--timing", choices=[t.value for t in Timing], default="uniform",
                   help="uniform step lengths, or compensated lengths pi/E per step (default: uniform)")
    p.add_argument("--omega-max", type=float, default=1.0, help="maximum coupling (default: 1)")
    if steps:
        p.add_argument("--steps", type=int, help="number of digital steps N (≥ 3)")
    if tmax:
        p.add_argument("--tmax-pi", type=float, help="total time in multiples of pi/omega_max")
    p.add_argument("--out", help="output file; format follows the extension unless --format is given")
    p.add_argument("--format", choices=["csv", "json"], help="output format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dap",
        description="Digital three-state adiabatic passage: exact piecewise-constant propagation "
                    "and figure datasets. Times are entered in units of pi/omega_max.",
        epilog=f"Environment: {THREADS_ENV} caps the number of threads used by sweeps.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("evolve", help="populations through one protocol (fig. 3 panels a-f, fig. 7)",
                       description="Time series of amplitudes and populations starting from |1>. "
                                   "Reproduces fig. 3(a-f) and fig. 7.")
    _add_common(p)
    p.add_argument("--samples-per-step", type=int, default=DEFAULT_SAMPLES_PER_STEP,
                   help=f"samples inside each step (default: {DEFAULT_SAMPLES_PER_STEP})")
    p.add_argument("--protocol", help="JSON protocol file with arbitrary levels; overrides scheme/steps/timing")

    p = sub.add_parser("sweep-tmax", help="final |3> population against t_max (fig. 4)",
                       description="Transfer fidelity on RESOLUTION points of t_max in (LO, HI] "
                                   "(units pi/omega_max). Reproduces fig. 4.")
    _add_common(p, tmax=False)
    p.add_argument("--tmax-pi-range", nargs=2, type=float, metavar=("LO", "HI"), default=(0.0, 40.0))
    p.add_argument("--resolution", type=int, default=2000)

    p = sub.add_parser("sweep-grid", help="transfer error over (N, t_max) (figs. 5 and 8)",
                       description="Transfer fidelity and error 1 - P3 over N in [LO, HI] and t_max in "
                                   "(LO, HI] pi/omega_max. Reproduces fig. 5 (uniform) and fig. 8 "
                                   "(linear, compensated).")
    _add_common(p, steps=False, tmax=False)
    p.add_argument("--steps-range", nargs=2, type=int, metavar=("LO", "HI"), default=(3, 50))
    p.add_argument("--tmax-pi-range", nargs=2, type=float, metavar=("LO", "HI"), default=(0.0, 120.0))
    p.add_argument("--resolution", type=int, default=600)

    p = sub.add_parser("error-vs-n", help="error against N at fixed t_max, with eta_T overlay",
                       description="Transfer fidelity per N at fixed total times (default 100 and 101 "
                                   "pi/omega_max) next to the analytic total error eta_T.")
    _add_common(p, steps=False, tmax=False)
    p.add_argument("--tmax-pi", type=float, nargs="+", default=[100.0, 101.0])
    p.add_argument("--steps-range", nargs=2, type=int, metavar=("LO", "HI"), default=(3, 200))

    p = sub.add_parser("analyze", help="closed-form error estimates and adiabaticity for N steps",
                       description="Prints eta, eta_T, its large-N limit and, with --tmax-pi, the "
                                   "continuous adiabaticity parameters (fig. 2(e)).")
    _add_common(p)

    p = sub.add_parser("resonances", help="identity-resonance total times 2 n N pi / omega_max",
                       description="Lists the t_max values at which every sin/cos step is the identity.")
    _add_common(p, tmax=False)
    p.add_argument("--n-max", type=int, default=3)

    p = sub.add_parser("reproduce", help="write every dataset for one figure (fig2 ... fig8, or all)",
                       description="Preset flag bundles: fig2 couplings/spectra/adiabaticity, fig3 time "
                                   "series and evolution maps, fig4 t_max sweeps, fig5 error grids and "
                                   "error vs N, fig6 compensated pulse lengths, fig7 compensated vs "
                                   "uniform evolution, fig8 compensated linear grid.")
    p.add_argument("figure", choices=FIGURES + ("all",))
    p.add_argument("--out-dir", default=".", help="directory for the datasets (default: .)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = sub.add_parser("check-scaling", help="verify populations depend only on omega_max * t_max",
                       description="Runs the same protocol at omega_max and FACTOR * omega_max with "
                                   "--tmax-pi unchanged and reports the largest population difference. "
                                   "Exits 1 if it exceeds 1e-12.")
    _add_common(p)
    p.add_argument("--factor", type=float, default=2.0)
    p.add_argument("--samples-per-step", type=int, default=16)
    return parser


def config_from_args(args) -> RunConfig:
    get = lambda name, default=None: getattr(args, name, default)  # noqa: E731
    tmax = get("tmax_pi")
    cfg = RunConfig(
        command=args.command,
        scheme=get("scheme", Scheme.SINCOS.value),
        timing=get("timing", Timing.UNIFORM.value),
        n_steps=get("steps"),
        t_max_pi_units=tmax if not isinstance(tmax, list) else None,
        tmax_pi_list=tmax if isinstance(tmax, list) else [],
        omega_max=get("omega_max", 1.0),
        samples_per_step=get("samples_per_step", DEFAULT_SAMPLES_PER_STEP),
        output_path=get("out") or get("out_dir"),
        format=get("format"),
        steps_range=tuple(get("steps_range")) if get("steps_range") else None,
        tmax_pi_range=tuple(get("tmax_pi_range")) if get("tmax_pi_range") else None,
        resolution=get("resolution"),
        n_max=get("n_max", 3),
        figure=get("figure"),
        factor=get("factor", 2.0),
        protocol_path=get("protocol"),
    )
    return cfg.validate()


def _emit(result, cfg: RunConfig):
    if cfg.output_path is None:
        return None
    fmt = cfg.format
    if fmt is None and Path(cfg.output_path).suffix.lower() not in (".csv", ".json"):
        fmt = "csv"
    return write_dataset(result, cfg.output_path, fmt)


def dataset_name(experiment, scheme, timing, n_label, fmt="csv", suffix=""):
    return f"{experiment}_{scheme}_{timing}_N{n_label}{suffix}.{fmt}"


def _pi(x):
    return format(x, ".17g")


def run_evolve(cfg: RunConfig, out=sys.stdout):
    if cfg.protocol_path:
        protocol = read_dataset(cfg.protocol_path)
    else:
        protocol = build_protocol(cfg.scheme, cfg.n_steps, cfg.t_max, cfg.omega_max, cfg.timing)
    traj = evolve_trajectory(protocol, None, cfg.samples_per_step)
    _emit(traj, cfg)
    p = traj.populations[-1]
    print(f"N={protocol.n_steps} t_max={_pi(protocol.total_time)} "
          f"({_pi(protocol.total_time * protocol.omega_max / math.pi)} pi/omega_max) "
          f"P1={_pi(p[0])} P2={_pi(p[1])} P3={_pi(p[2])} "
          f"max_P2={_pi(traj.populations[:, 1].max())}", file=out)
    return 0


def run_sweep_tmax(cfg, workers, out=sys.stdout):
    lo, hi = cfg.tmax_pi_range
    scale = math.pi / cfg.omega_max
    result = experiments.sweep_tmax(cfg.scheme, cfg.n_steps, (lo * scale, hi * scale), cfg.resolution,
                                    cfg.timing, cfg.omega_max)
    result = _with_flags(result, cfg)
    _emit(result, cfg)
    cell = (hi - lo) * scale / cfg.resolution
    nulls = experiments.detect_nulls(result.t_max_values, result.fidelity[0])
    print(f"N={cfg.n_steps} points={cfg.resolution} nulls(pi/omega_max)="
          + ",".join(_pi(t / scale) for t in nulls), file=out)
    if cfg.scheme == Scheme.SINCOS.value and cfg.timing == Timing.UNIFORM.value:
        matched, spurious = experiments.match_resonances(nulls, cfg.n_steps, cfg.omega_max, cell)
        print(f"matched_resonance_orders={matched} spurious={len(spurious)}", file=out)
    return 0


def run_sweep_grid(cfg, workers, out=sys.stdout):
    lo, hi = cfg.tmax_pi_range
    scale = math.pi / cfg.omega_max
    result = experiments.sweep_grid(cfg.scheme, cfg.timing, cfg.steps_range, (lo * scale, hi * scale),
                                    cfg.resolution, cfg.omega_max, workers=workers)
    result = _with_flags(result, cfg)
    _emit(result, cfg)
    print(f"cells={result.fidelity.size} mean_error={_pi(result.error.mean())}", file=out)
    return 0


def run_error_vs_n(cfg, workers, out=sys.stdout):
    scale = math.pi / cfg.omega_max
    result = experiments.error_vs_n(cfg.scheme, [t * scale for t in cfg.tmax_pi_list], cfg.steps_range,
                                    cfg.timing, cfg.omega_max, workers=workers)
    result = _with_flags(result, cfg)
    _emit(result, cfg)
    print(f"rows={len(result.n_values)} t_max(pi/omega_max)={cfg.tmax_pi_list}", file=out)
    return 0


def run_analyze(cfg, out=sys.stdout):
    est = analysis.total_error_estimate(cfg.n_steps)
    report = {"error_estimate": est.to_dict()}
    deficits = analysis.dark_state_deficits(cfg.scheme, cfg.n_steps)
    report["dark_state_deficit"] = {"scheme": cfg.scheme, "min": float(deficits.min()),
                                    "max": float(deficits.max())}
    protocol = build_protocol(cfg.scheme, cfg.n_steps, None, cfg.omega_max, Timing.COMPENSATED)
    report["compensated_t_max"] = protocol.total_time
    if cfg.t_max is not None:
        report["adiabaticity"] = {
            "sincos": analysis.adiabaticity_sincos(cfg.t_max, cfg.omega_max),
            "linear_endpoint": analysis.adiabaticity_linear(0.0, cfg.t_max, cfg.omega_max),
            "linear_midpoint": analysis.adiabaticity_linear(cfg.t_max / 2, cfg.t_max, cfg.omega_max),
        }
    if cfg.output_path:
        write_dataset(est, cfg.output_path, "json")
    print(json.dumps(report, indent=1), file=out)
    return 0


def run_resonances(cfg, out=sys.stdout):
    res = analysis.resonance_times(cfg.n_steps, cfg.omega_max, cfg.n_max)
    if cfg.output_path:
        write_dataset(res, cfg.output_path, "json")
    for n, t in zip(res.order, res.times):
        print(f"n={n}\t{2 * n * cfg.n_steps}π\t{_pi(t)}", file=out)
    return 0


def run_check_scaling(cfg, out=sys.stdout):
    def pops(omega_max):
        t_max = None if cfg.t_max_pi_units is None else cfg.t_max_pi_units * math.pi / omega_max
        protocol = build_protocol(cfg.scheme, cfg.n_steps, t_max, omega_max, cfg.timing)
        return evolve_trajectory(protocol, None, cfg.samples_per_step).populations

    deviation = float(np.abs(pops(cfg.omega_max) - pops(cfg.omega_max * cfg.factor)).max())
    ok = deviation < 1e-12
    print(f"factor={_pi(cfg.factor)} max_population_deviation={deviation:.3e} {'PASS' if ok else 'FAIL'}",
          file=out)
    return 0 if ok else 1


def _with_flags(result, cfg):
    meta = dict(result.metadata)
    meta["flags"] = cfg.flags()
    meta["deterministic"] = True
    return experiments.SweepResult(result.experiment, result.scheme, result.timing, result.omega_max,
                                   result.n_values, result.t_max_values, result.fidelity,
                                   result.extra, meta)


def reproduce(figure, out_dir, fmt="csv", workers=1) -> list[Path]:
    """Write the datasets behind one figure; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pi = math.pi
    written = []

    def save(obj, name):
        written.append(write_dataset(obj, out_dir / name, fmt))

    def meta(result, **flags):
        return experiments.SweepResult(result.experiment, result.scheme, result.timing, result.omega_max,
                                       result.n_values, result.t_max_values, result.fidelity,
                                       result.extra, {"figure": figure, "flags": flags,
                                                      "deterministic": True})

    if figure == "fig2":
        for scheme in ("sincos", "linear"):
            save(experiments.scheme_profile(scheme, 15), f"profile_{scheme}_N15.{fmt}")
    elif figure == "fig3":
        for n, mult in ((5, 1), (15, 1), (45, 1), (5, 2), (15, 2), (45, 2)):
            tmax_pi = mult * n
            traj = experiments.timeseries_experiment("sincos", "uniform", n, tmax_pi * pi)
            save(traj, dataset_name("evolve", "sincos", "uniform", n, fmt, f"_tmax{tmax_pi}pi"))
        for n in (5, 15, 45):
            t_values = 4 * n * pi * np.arange(1, 201) / 200
            emap = experiments.evolution_map("sincos", n, t_values, samples_per_step=8)
            save(emap, dataset_name("evolution_map", "sincos", "uniform", n, fmt))
    elif figure == "fig4":
        for n in range(3, 11):
            result = experiments.sweep_tmax("sincos", n, (0.0, 40 * pi), 2000)
            save(meta(result, steps=n, tmax_pi_range=[0, 40], resolution=2000),
                 dataset_name("sweep_tmax", "sincos", "uniform", n, fmt))
    elif figure == "fig5":
        for scheme in ("sincos", "linear"):
            result = experiments.sweep_grid(scheme, "uniform", (3, 50), (0.0, 120 * pi), 600,
                                            workers=workers)
            save(meta(result, steps_range=[3, 50], tmax_pi_range=[0, 120], resolution=600),
                 dataset_name("sweep_grid", scheme, "uniform", "3-50", fmt))
            result = experiments.error_vs_n(scheme, [100 * pi, 101 * pi], (3, 200), workers=workers)
            save(meta(result, steps_range=[3, 200], tmax_pi=[100, 101]),
                 dataset_name("error_vs_n", scheme, "uniform", "3-200", fmt))
    elif figure == "fig6":
        save(experiments.pulse_length_profile("linear", 15), f"pulse_lengths_linear_N15.{fmt}")
    elif figure == "fig7":
        for n in (7, 45):
            comp = build_protocol("linear", n, None, 1.0, "compensated")
            save(evolve_trajectory(comp), dataset_name("evolve", "linear", "compensated", n, fmt))
            uni = experiments.matched_uniform_protocol("linear", n)
            save(evolve_trajectory(uni), dataset_name("evolve", "linear", "uniform", n, fmt, "_matched"))
    elif figure == "fig8":
        result = experiments.sweep_grid("linear", "compensated", (3, 50), (0.0, 120 * pi), 600,
                                        workers=workers)
        save(meta(result, steps_range=[3, 50], tmax_pi_range=[0, 120], resolution=600),
             dataset_name("sweep_grid", "linear", "compensated", "3-50", fmt))
    else:
        raise ValueError(f"unknown figure {figure!r}")
    return written


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        cfg = config_from_args(args)
        workers = threads_from_env()
    except ConfigError as exc:
        print(f"dap {args.command}: error: {exc}", file=sys.stderr)
        return 2

    try:
        if cfg.command == "evolve":
            return run_evolve(cfg, out)
        if cfg.command == "sweep-tmax":
            return run_sweep_tmax(cfg, workers, out)
        if cfg.command == "sweep-grid":
            return run_sweep_grid(cfg, workers, out)
        if cfg.command == "error-vs-n":
            return run_error_vs_n(cfg, workers, out)
        if cfg.command == "analyze":
            return run_analyze(cfg, out)
        if cfg.command == "resonances":
            return run_resonances(cfg, out)
        if cfg.command == "check-scaling":
            return run_check_scaling(cfg, out)
        if cfg.command == "reproduce":
            figures = FIGURES if cfg.figure == "all" else (cfg.figure,)
            for fig in figures:
                for path in reproduce(fig, cfg.output_path, cfg.format or "csv", workers):
                    print(path, file=out)
            return 0
    except (DatasetWriteError, OSError) as exc:
        print(f"dap {cfg.command}: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"dap {cfg.command}: error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError(f"unhandled command {cfg.command}")


if __name__ == "__main__":
    sys.exit(main())
