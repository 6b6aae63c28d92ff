"""File formats: model and config JSON, increments and errors CSV, atomic writes."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .estimators import EstimateSet, StepFunction
from .model import ACDensity, IncrementSample, LevyTriple
from .spectral import SpectralConfig

__all__ = [
    "SCHEMA_VERSION",
    "atomic_write_text",
    "read_json",
    "model_from_dict",
    "model_to_dict",
    "load_model",
    "save_model",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "save_config",
    "write_increments",
    "read_increments",
    "write_errors",
    "estimates_to_dict",
    "estimates_from_dict",
]

SCHEMA_VERSION = 1


def atomic_write_text(path, text: str) -> None:
    """Write to a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


# model

def model_from_dict(d: dict) -> tuple[LevyTriple, float]:
    """Parse the model JSON into (triple, delta)."""
    try:
        atoms = {int(a["j"]): float(a["q"]) for a in d.get("atoms", [])}
        ac = d.get("ac")
        ac_density = None
        if ac:
            ac_density = ACDensity(float(ac["grid_origin"]), float(ac["step"]), tuple(ac["values"]))
        triple = LevyTriple(float(d.get("gamma", 0.0)), float(d["lambda"]),
                            float(d.get("atom_spacing", 1.0)), atoms, ac_density)
        delta = float(d["delta"])
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"malformed model: {exc}") from exc
    if not delta > 0:
        raise ConfigurationError("delta must be positive")
    return triple, delta


def model_to_dict(triple: LevyTriple, delta: float) -> dict:
    out = {
        "gamma": triple.gamma,
        "lambda": triple.lambda_,
        "delta": float(delta),
        "atom_spacing": triple.atom_spacing,
        "atoms": [{"j": j, "q": q} for j, q in triple.discrete_weights.items()],
    }
    if triple.ac_density is not None:
        ac = triple.ac_density
        out["ac"] = {"grid_origin": ac.grid_origin, "step": ac.step, "values": list(ac.values)}
    return out


def load_model(path) -> tuple[LevyTriple, float]:
    return model_from_dict(read_json(path))


def save_model(path, triple: LevyTriple, delta: float) -> None:
    atomic_write_text(path, dumps(model_to_dict(triple, delta)))


# spectral config

def config_from_dict(d: dict) -> SpectralConfig:
    d = dict(d)
    version = d.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigurationError(f"unsupported config schema_version {version}")
    d.pop("atom_spacing", None)
    try:
        return SpectralConfig.from_dict(d)
    except TypeError as exc:
        raise ConfigurationError(f"malformed config: {exc}") from exc


def config_to_dict(config: SpectralConfig) -> dict:
    return {"schema_version": SCHEMA_VERSION, **config.to_dict()}


def load_config(path) -> SpectralConfig:
    return config_from_dict(read_json(path))


def save_config(path, config: SpectralConfig) -> None:
    atomic_write_text(path, dumps(config_to_dict(config)))


# increments

def write_increments(path, sample: IncrementSample) -> None:
    buf = io.StringIO()
    buf.write("z\n")
    for v in sample.values:
        buf.write(repr(float(v)) + "\n")
    atomic_write_text(path, buf.getvalue())


def read_increments(path, delta: float) -> IncrementSample:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["z"]:
            raise ConfigurationError("increments CSV needs a single 'z' column with header")
        try:
            values = [float(row[0]) for row in reader if row]
        except ValueError as exc:
            raise ConfigurationError(f"bad increment value: {exc}") from exc
    if not values:
        raise ConfigurationError("increments CSV is empty")
    return IncrementSample(delta, np.asarray(values))


def write_errors(path, rows) -> None:
    """rows: iterable of (replicate, target, n, error)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["replicate", "target", "n", "error"])
    for r, target, n, err in rows:
        w.writerow([int(r), target, int(n), repr(float(err))])
    atomic_write_text(path, buf.getvalue())


# estimates

def _num(v):
    if v is None:
        return None
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def estimates_to_dict(est: EstimateSet) -> dict:
    return {
        "n": est.n,
        "delta": est.delta,
        "atom_spacing": est.atom_spacing,
        "lambda_hat": est.lambda_hat,
        "gamma_hat": est.gamma_hat,
        "q_hat": {str(j): v for j, v in est.q_hat.items()},
        "q_total_hat": est.q_total_hat,
        "p_hat": {str(j): v for j, v in est.p_hat.items()},
        "p_total_hat": est.p_total_hat,
        "N_hat": est.N_hat.to_dict(),
        "F_hat": est.F_hat.to_dict(),
        "diagnostics": {k: (_num(v) if isinstance(v, float) else v) for k, v in est.diagnostics.items()},
        "hyperparameters": est.hyperparameters,
    }


def estimates_from_dict(d: dict) -> EstimateSet:
    return EstimateSet(
        n=int(d["n"]), delta=float(d["delta"]), atom_spacing=float(d["atom_spacing"]),
        lambda_hat=float(d["lambda_hat"]), gamma_hat=float(d["gamma_hat"]),
        q_hat={int(j): float(v) for j, v in d["q_hat"].items()},
        q_total_hat=float(d["q_total_hat"]),
        p_hat={int(j): float(v) for j, v in d["p_hat"].items()},
        p_total_hat=float(d["p_total_hat"]),
        N_hat=StepFunction.from_dict(d["N_hat"]), F_hat=StepFunction.from_dict(d["F_hat"]),
        diagnostics=d.get("diagnostics", {}), hyperparameters=d.get("hyperparameters", {}),
    )
