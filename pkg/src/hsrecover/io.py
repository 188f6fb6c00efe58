"""Config parsing and CSV/manifest emission.

Config files are YAML, which also accepts plain JSON.  Numbers in the
curves and models CSVs use 12 significant digits; the raw-samples CSV
uses shortest round-trip repr so that re-fitting reproduces a run exactly.
"""
from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import hashlib
import json
import os
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import yaml

from . import __version__
from .experiments import CampaignConfig, CampaignResult, ValidationError
from .hypersurface import HypersurfaceModel

CONFIG_KEYS = {f.name for f in dataclasses.fields(CampaignConfig)}
KEY_ALIASES = {
    "nQubits": "n_qubits",
    "t1Range": "t1_range",
    "t2StarRange": "t2_star_range",
    "recoveryOrders": "recovery_orders",
    "fieldMicroTesla": "field_microtesla",
    "gyromagneticRadPerUsPerMicroTesla": "gyromagnetic_rad_per_us_per_microtesla",
    "rateSampling": "rate_sampling",
}
EXPERIMENT_ALIASES = {
    "T1Relax": "t1_relax",
    "RamseyNoField": "ramsey_no_field",
    "RamseyField": "ramsey_field",
    "GhzRamsey": "ghz_ramsey",
}


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line, self.column = line, column


def fmt(x: float) -> str:
    return f"{float(x):.12g}"


def load_config_mapping(path) -> dict:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        problem = getattr(err, "problem", None) or str(err)
        if mark is not None:
            raise ParseError(f"{path}: {problem}", mark.line + 1, mark.column + 1) from None
        raise ParseError(f"{path}: {problem}") from None
    if data is None:
        raise ParseError(f"{path}: config is empty", 1, 1)
    if not isinstance(data, dict):
        raise ParseError(f"{path}: config must be a mapping of key: value", 1, 1)
    return data


def config_from_mapping(data: Mapping) -> CampaignConfig:
    data = {KEY_ALIASES.get(k, k): v for k, v in data.items()}
    if isinstance(data.get("experiment"), str):
        data["experiment"] = EXPERIMENT_ALIASES.get(data["experiment"], data["experiment"])
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise ValidationError(unknown[0], "unknown key")
    for key in ("experiment", "repetitions", "recovery_orders", "seed"):
        if key not in data:
            raise ValidationError(key, "required")
    return CampaignConfig(**data)


def parse_config(path) -> CampaignConfig:
    return config_from_mapping(load_config_mapping(path))


def config_hash(config: CampaignConfig) -> str:
    """SHA-256 of the validated config with defaults applied, canonical JSON."""
    blob = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _write_rows(path, header: list[str], rows: Iterable[list[str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def curves_header(orders) -> list[str]:
    return ["time_us", "best", "worst", "average"] + [f"order_{o}" for o in orders]


def write_curves_csv(result: CampaignResult, path) -> None:
    cols = [result.times, result.best, result.worst, result.average]
    cols += [result.recovered[o] for o in result.orders]
    rows = ([fmt(c[k]) for c in cols] for k in range(len(result.times)))
    _write_rows(path, curves_header(result.orders), rows)


def read_curves_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader]).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def write_models_csv(models: Mapping[float, Iterable[HypersurfaceModel]], path) -> None:
    """One row per coefficient: ``time_us,order,exponents,coefficient``.

    Coefficients are in physical units (unscaled); exponents are ``e1|e2|...``.
    """
    def rows():
        for t in sorted(models):
            group = models[t]
            if isinstance(group, HypersurfaceModel):
                group = [group]
            for model in group:
                for exps, c in zip(model.basis, model.unscaled_coefficients()):
                    yield [fmt(t), str(model.order), "|".join(map(str, exps)), fmt(c)]
    _write_rows(path, ["time_us", "order", "exponents", "coefficient"], rows())


def write_samples_csv(result: CampaignResult, path) -> None:
    m = result.rates.shape[1]
    header = ["repetition"] + [f"rate_{i + 1}" for i in range(m)] + ["time_us", "value"]
    def rows():
        for j, rates in enumerate(result.rates):
            head = [str(j)] + [repr(float(r)) for r in rates]
            for k, t in enumerate(result.times):
                yield head + [repr(float(t)), repr(float(result.curves[j, k]))]
    _write_rows(path, header, rows())


def read_samples_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(rates, times, curves)`` from a raw-samples CSV.

    Every repetition must be measured on the same time grid.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty samples file", 1, 1) from None
        if (len(header) < 4 or header[0] != "repetition"
                or header[-2:] != ["time_us", "value"]):
            raise ParseError(f"{path}: expected header repetition,rate_1,...,time_us,value", 1, 1)
        m = len(header) - 3
        reps: dict[int, tuple[tuple[float, ...], dict[float, float]]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: expected {len(header)} fields", lineno, 1)
            try:
                rep = int(row[0])
                rates = tuple(float(v) for v in row[1:1 + m])
                t, value = float(row[-2]), float(row[-1])
            except ValueError as err:
                raise ParseError(f"{path}: {err}", lineno, 1) from None
            entry = reps.setdefault(rep, (rates, {}))
            if entry[0] != rates:
                raise ParseError(f"{path}: repetition {rep} changes its rates", lineno, 1)
            entry[1][t] = value
    if not reps:
        raise ParseError(f"{path}: no samples", 2, 1)
    order = sorted(reps)
    times = sorted(reps[order[0]][1])
    if any(sorted(reps[j][1]) != times for j in order):
        raise ParseError(f"{path}: repetitions use different time grids")
    rates = np.array([reps[j][0] for j in order])
    curves = np.array([[reps[j][1][t] for t in times] for j in order])
    return rates, np.array(times), curves


@dataclasses.dataclass
class RunManifest:
    config_hash: str
    seed: int
    tool_version: str = __version__
    started_at: str = ""
    finished_at: str = ""
    warnings: list[str] = dataclasses.field(default_factory=list)

    def write(self, path) -> None:
        lines = [
            f"config_hash: {self.config_hash}",
            f"seed: {self.seed}",
            f"tool_version: {self.tool_version}",
            f"started_at: {self.started_at}",
            f"finished_at: {self.finished_at}",
        ]
        lines += [f"warning: {w}" for w in self.warnings]
        Path(path).write_text("\n".join(lines) + "\n")


def now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
