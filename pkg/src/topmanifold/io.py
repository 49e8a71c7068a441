"""JSON and CSV encodings for matrices, fields, systems, objectives and paths.

Complex matrices are stored row-major as nested lists of ``[re, im]`` pairs.
Floats go through ``repr`` (JSON) or ``%.17g`` (CSV), both of which round-trip
IEEE doubles exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import ControlField, QuantumSystem, ValidationError
from .objectives import OCL, STL, UTL, Objective


def encode_matrix(M) -> list:
    M = np.asarray(M, dtype=complex)
    if M.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in M]
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def decode_matrix(data) -> np.ndarray:
    a = np.asarray(data, dtype=float)
    if a.shape[-1] != 2:
        raise ValidationError("complex entries must be [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def field_to_dict(field: ControlField) -> dict:
    return {"duration": field.duration, "samples": field.samples.tolist()}


def field_from_dict(data: dict) -> ControlField:
    return ControlField(np.asarray(data["samples"], dtype=float), float(data["duration"]))


def write_field_csv(path, field: ControlField):
    """One row per control, ``L`` columns; the duration goes in a leading comment line."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# duration={field.duration!r}\n")
        w = csv.writer(fh)
        for row in field.samples:
            w.writerow(["%.17g" % x for x in row])


def read_field_csv(path, duration: float | None = None) -> ControlField:
    path = Path(path)
    rows = []
    with path.open() as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                if key.strip() == "duration" and duration is None:
                    duration = float(val)
                continue
            if line.strip():
                rows.append([float(x) for x in line.strip().split(",")])
    if duration is None:
        raise ValidationError(f"{path}: no duration given")
    return ControlField(np.array(rows), duration)


def system_to_dict(system: QuantumSystem) -> dict:
    return {"H0": encode_matrix(system.H0), "dipoles": [encode_matrix(m) for m in system.dipoles]}


def system_from_dict(data: dict) -> QuantumSystem:
    try:
        return QuantumSystem(decode_matrix(data["H0"]), [decode_matrix(m) for m in data["dipoles"]])
    except KeyError as exc:
        raise ValidationError(f"system is missing {exc}") from None


def objective_to_dict(obj: Objective) -> dict:
    if isinstance(obj, STL):
        return {"kind": "STL", "initial_state": encode_matrix(obj.initial_state), "final_state": encode_matrix(obj.final_state)}
    if isinstance(obj, OCL):
        return {"kind": "OCL", "rho0": encode_matrix(obj.rho0), "theta": encode_matrix(obj.theta)}
    if isinstance(obj, UTL):
        return {"kind": "UTL", "target": encode_matrix(obj.target)}
    raise ValidationError(f"cannot encode objective {type(obj).__name__}")


def objective_from_dict(data: dict) -> Objective:
    kind = str(data.get("kind", "")).upper()
    try:
        if kind == "STL":
            return STL(decode_matrix(data["initial_state"]), decode_matrix(data["final_state"]))
        if kind == "OCL":
            return OCL(decode_matrix(data["rho0"]), decode_matrix(data["theta"]))
        if kind == "UTL":
            return UTL(decode_matrix(data["target"]))
    except KeyError as exc:
        raise ValidationError(f"{kind} objective is missing {exc}") from None
    raise ValidationError(f"unknown objective kind {data.get('kind')!r}")


def preset_to_dict(preset) -> dict:
    spec = preset.init_spec
    return {
        "name": preset.name,
        "system": system_to_dict(preset.system),
        "objectives": {k: objective_to_dict(o) for k, o in preset.objectives.items()},
        "duration": preset.duration,
        "n_steps": preset.n_steps,
        "init_spec": {
            "n_components": spec.n_components,
            "amplitude_range": list(spec.amplitude_range),
            "phase_range": list(spec.phase_range),
            "frequency_range": list(spec.frequency_range),
            "target_fluence": spec.target_fluence,
            "log10_fluence_range": None if spec.log10_fluence_range is None else list(spec.log10_fluence_range),
        },
    }


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, data, indent: int | None = 1):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(data), indent=indent))


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def write_path_bundle(directory, images: np.ndarray, duration: float, manifest: dict) -> Path:
    """Store each image as ``field_<i>.csv`` plus ``manifest.json`` listing them in order."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for i, X in enumerate(images):
        name = f"field_{i:04d}.csv"
        write_field_csv(directory / name, ControlField(X, duration))
        names.append(name)
    write_json(directory / "manifest.json", {**manifest, "duration": duration, "fields": names})
    return directory


def read_path_bundle(directory) -> tuple[np.ndarray, dict]:
    directory = Path(directory)
    manifest = read_json(directory / "manifest.json")
    images = np.stack([read_field_csv(directory / n, manifest["duration"]).samples for n in manifest["fields"]])
    return images, manifest


def write_pca_csv(path, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "c1", "c2", "c3"])
        for r in rows:
            w.writerow([r[0]] + ["%.17g" % x for x in r[1:]])
