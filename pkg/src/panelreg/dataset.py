"""Four-analyte liver panel data: loading, synthesis, summaries and folds."""
from __future__ import annotations

import configparser
import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DataError,
    EmptyDataset,
    InvalidBounds,
    KTooLarge,
    MissingColumn,
    NotPositiveSemidefinite,
    ParseError,
)

ANALYTES = ("ALT", "AST", "BD", "BT")
UNITS = {"ALT": "IU/L", "AST": "IU/L", "BD": "mg/dL", "BT": "mg/dL"}


def analyte_index(name: str) -> int:
    try:
        return ANALYTES.index(name.upper())
    except ValueError:
        raise DataError(f"unknown analyte {name!r}; expected one of {', '.join(ANALYTES)}") from None


@dataclass(frozen=True)
class PanelRecord:
    alt: float
    ast: float
    bd: float
    bt: float

    def __post_init__(self):
        for name, v in zip(ANALYTES, self.as_tuple()):
            if not math.isfinite(v) or v < 0:
                raise DataError(f"{name} must be finite and non-negative, got {v}")

    def as_tuple(self):
        return (self.alt, self.ast, self.bd, self.bt)

    @property
    def bilirubin_inconsistent(self) -> bool:
        """Quality flag: direct bilirubin exceeds total bilirubin."""
        return self.bd > self.bt


class Dataset:
    """Immutable table of panel records with one analyte chosen as target.

    Values are held as a read-only ``(n, 4)`` array in ``ANALYTES`` column
    order; ``records`` materialises :class:`PanelRecord` objects on demand.
    """

    def __init__(self, values, target: str = "BT", provenance: str = ""):
        arr = np.array(values, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[1] != len(ANALYTES):
            raise DataError(f"expected an (n, 4) array, got shape {arr.shape}")
        if arr.shape[0] == 0:
            raise EmptyDataset()
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise DataError("analyte values must be finite and non-negative")
        arr.flags.writeable = False
        self._values = arr
        self._target_idx = analyte_index(target)
        self.provenance = provenance

    @classmethod
    def from_records(cls, records: Sequence[PanelRecord], target="BT", provenance=""):
        return cls([r.as_tuple() for r in records], target=target, provenance=provenance)

    def __len__(self):
        return self._values.shape[0]

    def __repr__(self):
        return f"Dataset(n={len(self)}, target={self.target!r}, provenance={self.provenance!r})"

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def target(self) -> str:
        return ANALYTES[self._target_idx]

    @property
    def features(self) -> list[str]:
        return [a for a in ANALYTES if a != self.target]

    @property
    def records(self) -> list[PanelRecord]:
        return [PanelRecord(*map(float, row)) for row in self._values]

    @property
    def X(self) -> np.ndarray:
        return self._values[:, [analyte_index(f) for f in self.features]]

    @property
    def y(self) -> np.ndarray:
        return self._values[:, self._target_idx]

    def column(self, name: str) -> np.ndarray:
        return self._values[:, analyte_index(name)]

    def with_target(self, target: str) -> "Dataset":
        return Dataset(self._values, target=target, provenance=self.provenance)

    def subset(self, idx) -> "Dataset":
        return Dataset(self._values[idx], target=self.target, provenance=self.provenance)

    def quality_flags(self) -> np.ndarray:
        """True where direct bilirubin exceeds total bilirubin."""
        return self.column("BD") > self.column("BT")


# -- CSV ---------------------------------------------------------------------

def _parse_cell(text, row, column):
    s = text.strip()
    try:
        v = float(s)
    except ValueError:
        reason = "decimal comma is not accepted" if "," in s else "not a number"
        raise ParseError(row, column, text, reason) from None
    if not math.isfinite(v):
        raise ParseError(row, column, text, "not finite")
    if v < 0:
        raise ParseError(row, column, text, "negative value")
    return v


def read_csv(stream, target="BT", provenance="<stream>") -> Dataset:
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyDataset("file is empty (no header row)") from None
    names = [h.strip().upper() for h in header]
    if names and names[0].startswith("﻿"):
        names[0] = names[0][1:]
    cols = {}
    for a in ANALYTES:
        if a not in names:
            raise MissingColumn(a)
        cols[a] = names.index(a)

    rows = []
    for lineno, cells in enumerate(reader, start=2):
        if not cells or all(not c.strip() for c in cells):
            continue
        rec = []
        for a in ANALYTES:
            j = cols[a]
            if j >= len(cells) or not cells[j].strip():
                raise ParseError(lineno, a, None, "missing value")
            rec.append(_parse_cell(cells[j], lineno, a))
        rows.append(rec)
    if not rows:
        raise EmptyDataset()
    return Dataset(rows, target=target, provenance=provenance)


def load_csv(path, target="BT") -> Dataset:
    """Load a panel CSV whose header names ALT, AST, BD and BT (any order/case).

    Rows with non-numeric, non-finite, negative or missing cells raise
    :class:`ParseError` carrying the 1-based file line and the column.
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        return read_csv(fh, target=target, provenance=str(path))


def format_value(v: float) -> str:
    return f"{v:.6g}"


def write_csv(d: Dataset, dest) -> None:
    """Write ``d`` as CSV with 6 significant digits; ``dest`` is a path or text stream."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            write_csv(d, fh)
        return
    dest.write(",".join(ANALYTES) + "\n")
    for row in d.values:
        dest.write(",".join(format_value(v) for v in row) + "\n")


def to_csv_text(d: Dataset) -> str:
    buf = io.StringIO()
    write_csv(d, buf)
    return buf.getvalue()


# -- synthesis -----------------------------------------------------------------

@dataclass(frozen=True)
class AnalyteShape:
    """Clip bounds plus the log-normal body of one analyte.

    A draw is ``low + scale * exp(sigma * z)`` clipped to ``[low, high]``,
    with ``z`` standard normal.
    """

    low: float
    high: float
    scale: float
    sigma: float


def _default_correlation():
    c = np.full((4, 4), 0.4)
    np.fill_diagonal(c, 1.0)
    c[0, 1] = c[1, 0] = 0.7
    c[2, 3] = c[3, 2] = 0.95
    return c


@dataclass(frozen=True, eq=False)
class Calibration:
    """Marginal shapes and log-scale correlation for :func:`synthesize`.

    The defaults are synthetic. Clip bounds take the hospital table's
    minima and the plausible reading of its maxima (ALT 2708, AST 4202);
    the log-normal scales are picked so ALT/AST medians sit near 20 IU/L
    and bilirubin near 0.2 (direct) and 0.7 (total) mg/dL.
    """

    shapes: Mapping[str, AnalyteShape] = field(default_factory=lambda: {
        "ALT": AnalyteShape(6.0, 2708.0, 14.0, 0.9),
        "AST": AnalyteShape(3.0, 4202.0, 17.0, 0.8),
        "BD": AnalyteShape(0.01, 46.388, 0.2, 0.7),
        "BT": AnalyteShape(0.01, 44.593, 0.7, 0.7),
    })
    correlation: np.ndarray = field(default_factory=_default_correlation)

    def bounds(self):
        return {a: (self.shapes[a].low, self.shapes[a].high) for a in ANALYTES}

    def replace(self, shapes=None, correlation=None) -> "Calibration":
        new_shapes = dict(self.shapes)
        for a, s in (shapes or {}).items():
            new_shapes[a.upper()] = s
        corr = self.correlation if correlation is None else np.asarray(correlation, dtype=float)
        return Calibration(shapes=new_shapes, correlation=corr)


DEFAULT_CALIBRATION = Calibration()


def _cholesky_factor(corr):
    corr = np.asarray(corr, dtype=np.float64)
    if corr.shape != (4, 4):
        raise NotPositiveSemidefinite(f"correlation matrix must be 4x4, got {corr.shape}")
    if not np.all(np.isfinite(corr)):
        raise NotPositiveSemidefinite("correlation matrix has non-finite entries")
    if not np.allclose(corr, corr.T, atol=1e-12, rtol=0):
        raise NotPositiveSemidefinite("correlation matrix is not symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12, rtol=0):
        raise NotPositiveSemidefinite("correlation matrix must have a unit diagonal")
    if np.any(np.abs(corr) > 1.0):
        raise NotPositiveSemidefinite("correlation entries must lie in [-1, 1]")
    eig = np.linalg.eigvalsh(corr)
    if eig[0] < -1e-10:
        raise NotPositiveSemidefinite(f"smallest eigenvalue is {eig[0]:.3g}")
    try:
        return np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        # singular but PSD (e.g. a correlation of exactly 1)
        return np.linalg.cholesky(corr + 1e-12 * np.eye(4))


def synthesize(n: int, seed: int, calibration: Calibration = DEFAULT_CALIBRATION) -> Dataset:
    """Draw ``n`` correlated panel records.

    Independent standard normals are correlated with the Cholesky factor
    of ``calibration.correlation``, exponentiated through each analyte's
    log-normal shape and clipped to the analyte's bounds.
    """
    if int(n) != n or n < 1:
        raise DataError(f"n must be a positive integer, got {n}")
    n = int(n)
    for a in ANALYTES:
        s = calibration.shapes[a]
        if not s.low < s.high:
            raise InvalidBounds(a, s.low, s.high)
        if s.low < 0 or s.scale <= 0 or s.sigma < 0:
            raise DataError(f"{a}: need low >= 0, scale > 0, sigma >= 0")
    chol = _cholesky_factor(calibration.correlation)

    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, 4)) @ chol.T
    out = np.empty_like(z)
    for j, a in enumerate(ANALYTES):
        s = calibration.shapes[a]
        out[:, j] = np.clip(s.low + s.scale * np.exp(s.sigma * z[:, j]), s.low, s.high)
    return Dataset(out, target="BT", provenance=f"synthetic(n={n}, seed={seed})")


def load_calibration(path) -> tuple[Calibration, dict]:
    """Read an INI-style calibration file.

    Sections ``[ALT]``, ``[AST]``, ``[BD]``, ``[BT]`` may override ``min``,
    ``max``, ``scale`` and ``sigma``; section ``[correlation]`` holds entries
    such as ``BD-BT = 0.95``; section ``[synth]`` may set ``n`` and ``seed``,
    which are returned in the second element.
    """
    cp = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    base = DEFAULT_CALIBRATION
    shapes = {}
    for a in ANALYTES:
        sec = next((s for s in cp.sections() if s.upper() == a), None)
        if sec is None:
            continue
        cur = base.shapes[a]
        try:
            shapes[a] = AnalyteShape(
                low=cp.getfloat(sec, "min", fallback=cur.low),
                high=cp.getfloat(sec, "max", fallback=cur.high),
                scale=cp.getfloat(sec, "scale", fallback=cur.scale),
                sigma=cp.getfloat(sec, "sigma", fallback=cur.sigma),
            )
        except ValueError as exc:
            raise DataError(f"calibration [{sec}]: {exc}") from None
    corr = base.correlation.copy()
    sec = next((s for s in cp.sections() if s.lower() == "correlation"), None)
    if sec is not None:
        for key, val in cp.items(sec):
            parts = key.replace(",", "-").replace("_", "-").split("-")
            if len(parts) != 2:
                raise DataError(f"calibration correlation key {key!r} must look like 'BD-BT'")
            i, j = analyte_index(parts[0]), analyte_index(parts[1])
            try:
                corr[i, j] = corr[j, i] = float(val)
            except ValueError:
                raise DataError(f"calibration correlation {key!r}: not a number") from None
    extra = {}
    sec = next((s for s in cp.sections() if s.lower() == "synth"), None)
    if sec is not None:
        for key in ("n", "seed"):
            if cp.has_option(sec, key):
                extra[key] = cp.getint(sec, key)
    return base.replace(shapes=shapes, correlation=corr), extra


# -- summaries and reference ranges -------------------------------------------

@dataclass(frozen=True)
class AnalyteSummary:
    min: float
    max: float
    mean: float
    std: float


def summarize(d: Dataset) -> dict[str, AnalyteSummary]:
    """Per-analyte min, max, mean and population standard deviation (divisor n)."""
    if len(d) == 0:
        raise EmptyDataset()
    out = {}
    for j, a in enumerate(ANALYTES):
        col = d.values[:, j]
        mean = float(np.mean(col))
        std = float(np.sqrt(np.mean((col - mean) ** 2)))
        out[a] = AnalyteSummary(float(col.min()), float(col.max()), mean, std)
    return out


def format_summary(summary: Mapping[str, AnalyteSummary]) -> str:
    lines = [f"{'Attribute':<10}{'Min.':>12}{'Max.':>12}{'Mean':>12}{'StdDev':>12}"]
    for a, s in summary.items():
        lines.append(f"{a:<10}{s.min:>12.3f}{s.max:>12.3f}{s.mean:>12.3f}{s.std:>12.3f}")
    return "\n".join(lines)


@dataclass(frozen=True)
class ReferenceRanges:
    ranges: Mapping[str, tuple]

    def __post_init__(self):
        for a in ANALYTES:
            if a not in self.ranges:
                raise DataError(f"reference range for {a} missing")
            low, high = self.ranges[a]
            if not low < high:
                raise InvalidBounds(a, low, high)

    def __getitem__(self, analyte):
        return self.ranges[analyte]


# normal adult ranges: ALT/AST in IU/L, bilirubin in mg/dL
REFERENCE_RANGES = ReferenceRanges({
    "ALT": (10.0, 40.0),
    "AST": (10.0, 34.0),
    "BD": (0.0, 0.3),
    "BT": (0.3, 1.9),
})


def out_of_range_mask(d: Dataset, r: ReferenceRanges = REFERENCE_RANGES, analytes=ANALYTES):
    """Boolean ``(n, len(analytes))`` array, True where a value leaves its range."""
    cols = []
    for a in analytes:
        low, high = r[a]
        col = d.column(a)
        cols.append((col < low) | (col > high))
    return np.column_stack(cols)


def flag_out_of_range(d: Dataset, r: ReferenceRanges = REFERENCE_RANGES) -> np.ndarray:
    """True for records with any analyte outside its (inclusive) reference interval."""
    return out_of_range_mask(d, r).any(axis=1)


# -- cross-validation folds ---------------------------------------------------

@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def sizes(self) -> list[int]:
        return np.bincount(self.assignments, minlength=self.k).tolist()

    def __iter__(self):
        for f in range(self.k):
            yield self.train_indices(f), self.test_indices(f)


def make_folds(d, k: int, seed: int) -> FoldPlan:
    """Shuffle record indices with ``seed`` and deal them round-robin into ``k`` folds."""
    n = d if isinstance(d, int) else len(d)
    if k < 2:
        raise DataError(f"fold count must be at least 2, got {k}")
    if k > n:
        raise KTooLarge(k, n)
    perm = np.random.default_rng(seed).permutation(n)
    assignments = np.empty(n, dtype=np.int64)
    assignments[perm] = np.arange(n) % k
    assignments.flags.writeable = False
    return FoldPlan(k=k, assignments=assignments, seed=seed)
