"""Dataset serialisation.

CSV numbers are written with 17 significant digits (``'.17g'``), which is
locale independent and round-trips IEEE doubles exactly. JSON numbers use
Python's shortest round-trip ``repr``. Lines end in ``\\n``. Files are written
to a temporary sibling and renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .analysis import ErrorEstimate, ResonanceSet
from .experiments import SweepResult, Table
from .propagator import Trajectory
from .schemes import Protocol, Scheme, Timing, protocol_from_levels

__all__ = [
    "TRAJECTORY_COLUMNS",
    "DatasetWriteError",
    "format_number",
    "to_csv",
    "to_json",
    "write_dataset",
    "read_dataset",
    "protocol_to_dict",
    "protocol_from_dict",
]

TRAJECTORY_COLUMNS = ("t", "re1", "im1", "re2", "im2", "re3", "im3", "p1", "p2", "p3")
SWEEP_COLUMNS = ("N", "t_max", "fidelity", "error")


class DatasetWriteError(OSError):
    pass


def format_number(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) for v in row])
    return buf.getvalue()


def _trajectory_rows(traj: Trajectory):
    for t, amps, pops in zip(traj.times, traj.states, traj.populations):
        yield (t, amps[0].real, amps[0].imag, amps[1].real, amps[1].imag,
               amps[2].real, amps[2].imag, pops[0], pops[1], pops[2])


def _sweep_rows(result: SweepResult):
    extra = list(result.extra.values())
    for i, n in enumerate(result.n_values):
        for j, t in enumerate(result.t_max_values):
            f = result.fidelity[i, j]
            yield (int(n), t, f, 1.0 - f, *(col[i, j] for col in extra))


def to_csv(obj) -> str:
    if isinstance(obj, Trajectory):
        return _csv_text(TRAJECTORY_COLUMNS, _trajectory_rows(obj))
    if isinstance(obj, SweepResult):
        return _csv_text(SWEEP_COLUMNS + tuple(obj.extra), _sweep_rows(obj))
    if isinstance(obj, Table):
        return _csv_text(tuple(obj.columns), zip(*obj.columns.values()))
    if isinstance(obj, Protocol):
        d = protocol_to_dict(obj)
        return _csv_text(("xi", "omega1", "omega2", "tau"),
                         ((s["xi"], s["omega1"], s["omega2"], s["tau"]) for s in d["steps"]))
    raise TypeError(f"no CSV layout for {type(obj).__name__}")


def protocol_to_dict(p: Protocol) -> dict:
    return {
        "kind": "protocol",
        "scheme": p.scheme_id.value,
        "timing": p.timing.value,
        "N": p.n_steps,
        "omega_max": p.omega_max,
        "t_max": p.total_time,
        "steps": [
            {"xi": s.index, "omega1": s.couplings.omega1, "omega2": s.couplings.omega2, "tau": s.duration}
            for s in p.steps
        ],
    }


def protocol_from_dict(data: dict) -> Protocol:
    """Build a Protocol from its JSON form; any level set is accepted."""
    steps = sorted(data["steps"], key=lambda s: s["xi"])
    if [s["xi"] for s in steps] != list(range(len(steps))):
        raise ValueError("protocol steps must have xi = 0..N-1")
    if "N" in data and data["N"] != len(steps):
        raise ValueError(f"protocol declares N={data['N']} but lists {len(steps)} steps")
    return protocol_from_levels(
        [s["omega1"] for s in steps],
        [s["omega2"] for s in steps],
        [s["tau"] for s in steps],
        omega_max=data.get("omega_max"),
        scheme_id=data.get("scheme", Scheme.CUSTOM.value),
        timing=data.get("timing", Timing.UNIFORM.value),
    )


def _to_jsonable(obj) -> dict:
    if isinstance(obj, Trajectory):
        return {
            "kind": "trajectory",
            "times": obj.times.tolist(),
            "states": [[[a.real, a.imag] for a in row] for row in obj.states.tolist()],
            "populations": obj.populations.tolist(),
        }
    if isinstance(obj, SweepResult):
        return {
            "kind": "sweep",
            "experiment": obj.experiment,
            "scheme": obj.scheme.value,
            "timing": obj.timing.value,
            "omega_max": obj.omega_max,
            "axes": [{"name": "N", "values": obj.n_values.tolist()},
                     {"name": "t_max", "values": obj.t_max_values.tolist()}],
            "fidelity": obj.fidelity.tolist(),
            "extra": {k: v.tolist() for k, v in obj.extra.items()},
            "metadata": obj.metadata,
        }
    if isinstance(obj, Table):
        return {"kind": "table", "name": obj.name,
                "columns": {k: v.tolist() for k, v in obj.columns.items()},
                "metadata": obj.metadata}
    if isinstance(obj, Protocol):
        return protocol_to_dict(obj)
    if isinstance(obj, ErrorEstimate):
        return {"kind": "error_estimate", **obj.to_dict()}
    if isinstance(obj, ResonanceSet):
        return {"kind": "resonance_set", **obj.to_dict()}
    raise TypeError(f"no JSON layout for {type(obj).__name__}")


def to_json(obj) -> str:
    return json.dumps(_to_jsonable(obj), indent=1, allow_nan=False) + "\n"


def _from_jsonable(data: dict):
    kind = data.get("kind")
    if kind == "trajectory":
        states = np.array([[complex(re, im) for re, im in row] for row in data["states"]],
                          dtype=complex).reshape(-1, 3)
        return Trajectory(np.array(data["times"], float), states,
                          np.array(data["populations"], float).reshape(-1, 3))
    if kind == "sweep":
        axes = {a["name"]: a["values"] for a in data["axes"]}
        n_values, t_values = axes["N"], axes["t_max"]
        fid = np.array(data["fidelity"], float).reshape(len(n_values), len(t_values))
        extra = {k: np.array(v, float).reshape(fid.shape) for k, v in data.get("extra", {}).items()}
        return SweepResult(data["experiment"], data["scheme"], data["timing"], data["omega_max"],
                           n_values, t_values, fid, extra, data.get("metadata", {}))
    if kind == "table":
        return Table(data["name"], data["columns"], data.get("metadata", {}))
    if kind == "protocol":
        return protocol_from_dict(data)
    if kind == "error_estimate":
        return ErrorEstimate.from_dict({k: v for k, v in data.items() if k != "kind"})
    if kind == "resonance_set":
        return ResonanceSet.from_dict(data)
    raise ValueError(f"unknown dataset kind {kind!r}")


def _read_csv(text: str):
    rows = list(csv.reader(io.StringIO(text)))
    header, body = tuple(rows[0]), rows[1:]
    if header == TRAJECTORY_COLUMNS:
        vals = np.array(body, float).reshape(-1, len(header))
        states = vals[:, 1:7:2] + 1j * vals[:, 2:7:2]
        return Trajectory(vals[:, 0], states, vals[:, 7:10])
    raise ValueError("only trajectory CSV files can be read back; use JSON for other datasets")


def read_dataset(path):
    """Read a dataset written by :func:`write_dataset`.

    JSON files restore the original object type. CSV read-back is supported
    for trajectories only, since sweep CSVs drop their metadata.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".csv":
        return _read_csv(text)
    return _from_jsonable(json.loads(text))


def write_dataset(result, path, format=None) -> Path:
    """Atomically write ``result`` as CSV or JSON.

    ``format`` defaults to the file extension.
    """
    path = Path(path)
    fmt = format or path.suffix.lstrip(".").lower()
    if fmt == "csv":
        text = to_csv(result)
    elif fmt == "json":
        text = to_json(result)
    else:
        raise ValueError(f"unsupported format {fmt!r}; use csv or json")

    directory = path.parent if str(path.parent) else Path(".")
    try:
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    except OSError as exc:
        raise DatasetWriteError(f"cannot write {path}: {exc.strerror or exc}") from exc
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        # mkstemp creates 0600
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise DatasetWriteError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path
