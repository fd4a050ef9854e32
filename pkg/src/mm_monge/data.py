"""Synthetic marginals and CSV sample files.

CSV format: UTF-8, header ``x0,x1,...``, one point per line, values
written with 17 significant digits so a save/load round trip is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tensor_rng import Rng, SizeError, as_matrix

__all__ = ["MarginalSpec", "CsvParseError", "generate", "load_csv", "save_csv"]

KINDS = ("isotropic_gaussian", "two_moons", "two_circles", "csv_file")


class CsvParseError(ValueError):
    def __init__(self, path, line: int, msg: str):
        super().__init__(f"{path}:{line}: {msg}")
        self.line = line


@dataclass(frozen=True)
class MarginalSpec:
    kind: str = "isotropic_gaussian"
    mean: float | tuple = 0.0
    sd: float = 1.0
    noise: float = 0.05
    factor: float = 0.5
    path: str | None = None
    n: int = 500
    dim: int = 2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown marginal kind {self.kind!r}")
        if self.kind == "csv_file":
            if not self.path:
                raise ValueError("csv_file marginal needs a path")
            return
        if self.n < 1:
            raise SizeError("n must be >= 1")
        if self.kind == "isotropic_gaussian" and not self.sd > 0:
            raise ValueError("sd must be > 0")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        if self.kind == "two_circles" and not 0 < self.factor < 1:
            raise ValueError("factor must lie in (0, 1)")
        if self.kind in ("two_moons", "two_circles") and self.dim != 2:
            raise ValueError(f"{self.kind} is two-dimensional")

    def mean_vector(self) -> np.ndarray:
        # a scalar mean m means the vector (m, ..., m)
        return np.broadcast_to(np.asarray(self.mean, dtype=np.float64), (self.dim,)).copy()

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "n": self.n}
        if self.kind == "isotropic_gaussian":
            d.update(mean=self.mean_vector().tolist(), sd=self.sd, dim=self.dim)
        elif self.kind == "two_moons":
            d.update(noise=self.noise)
        elif self.kind == "two_circles":
            d.update(noise=self.noise, factor=self.factor)
        else:
            d.update(path=str(self.path))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MarginalSpec":
        d = dict(d)
        if isinstance(d.get("mean"), list):
            d["mean"] = tuple(d["mean"])
        return cls(**d)


def generate(spec: MarginalSpec, rng: Rng) -> np.ndarray:
    n = spec.n
    if spec.kind == "isotropic_gaussian":
        z = rng.standard_normal(n * spec.dim).reshape(n, spec.dim)
        return spec.mean_vector() + spec.sd * z
    if spec.kind == "two_moons":
        n_top = math.ceil(n / 2)
        t = np.pi * rng.uniform(n)
        pts = np.empty((n, 2))
        pts[:n_top, 0] = np.cos(t[:n_top])
        pts[:n_top, 1] = np.sin(t[:n_top])
        pts[n_top:, 0] = 1.0 - np.cos(t[n_top:])
        pts[n_top:, 1] = 0.5 - np.sin(t[n_top:])
    elif spec.kind == "two_circles":
        n_outer = math.ceil(n / 2)
        t = 2.0 * np.pi * rng.uniform(n)
        r = np.where(np.arange(n) < n_outer, 1.0, spec.factor)
        pts = np.column_stack([r * np.cos(t), r * np.sin(t)])
    else:
        return load_csv(spec.path)
    if spec.noise > 0:
        pts += spec.noise * rng.standard_normal(2 * n).reshape(n, 2)
    return pts


def save_csv(path, m) -> None:
    m = as_matrix(m)
    header = ",".join(f"x{k}" for k in range(m.shape[1]))
    lines = [header]
    lines += [",".join(format(v, ".17g") for v in row) for row in m]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_csv(path) -> np.ndarray:
    rows = []
    ncol = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            if lineno == 1 and all(f.startswith("x") for f in fields):
                ncol = len(fields)
                continue
            if ncol is None:
                ncol = len(fields)
            if len(fields) != ncol:
                raise CsvParseError(path, lineno, f"expected {ncol} fields, got {len(fields)}")
            try:
                vals = [float(f) for f in fields]
            except ValueError:
                raise CsvParseError(path, lineno, "non-numeric field") from None
            if not all(math.isfinite(v) for v in vals):
                raise CsvParseError(path, lineno, "non-finite value")
            rows.append(vals)
    if not rows:
        raise SizeError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)
