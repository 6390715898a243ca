"""Matrix ingestion, synthetic data and convergence-trace persistence."""

from __future__ import annotations

import csv
import io
import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse

__all__ = [
    "MatrixFormatError",
    "NegativeEntryError",
    "SyntheticSpec",
    "TraceRecord",
    "ConvergenceTrace",
    "as_nonneg",
    "read_matrix",
    "write_matrix",
    "synth_lowrank",
    "write_trace",
    "read_trace",
]

BINARY_MAGIC = b"NMAT"
TRACE_FIELDS = (
    "iter",
    "wall_seconds",
    "objective",
    "rel_objective",
    "alpha_W",
    "alpha_H",
    "kkt_residual",
)

_FORMAT_ALIASES = {
    "mm": "matrix-market",
    "mtx": "matrix-market",
    "matrix-market": "matrix-market",
    "csv": "csv",
    "bin": "dense-binary",
    "dense-binary": "dense-binary",
}


class MatrixFormatError(ValueError):
    """The file could not be parsed as the requested matrix format."""


class NegativeEntryError(ValueError):
    """The matrix holds a negative entry."""


def as_nonneg(data, name="X"):
    """Return `data` as a 2-D float64 array, checking it is finite and >= 0."""
    arr = np.array(data, dtype=np.float64)
    if arr.ndim != 2:
        raise MatrixFormatError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise MatrixFormatError(f"{name} must have positive dimensions, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise MatrixFormatError(f"{name} has non-finite entries")
    if np.any(arr < 0):
        i, j = np.argwhere(arr < 0)[0]
        raise NegativeEntryError(f"{name}[{i},{j}] = {arr[i, j]!r} is negative")
    arr.setflags(write=False)
    return arr


def _canonical_format(fmt):
    try:
        return _FORMAT_ALIASES[fmt]
    except KeyError:
        raise ValueError(f"unknown matrix format {fmt!r}") from None


def read_matrix(path, format="csv"):
    """Read a dense nonnegative matrix.

    Parameters
    ----------
    path : str or Path
    format : {'matrix-market', 'csv', 'dense-binary'}
        The aliases 'mm' and 'bin' are accepted as well.

    Returns
    -------
    ndarray of shape (rows, cols), read-only float64.
    """
    fmt = _canonical_format(format)
    path = Path(path)
    if fmt == "csv":
        arr = _read_csv(path)
    elif fmt == "matrix-market":
        try:
            m = scipy.io.mmread(str(path))
        except (ValueError, IndexError, OSError) as exc:
            raise MatrixFormatError(f"{path}: {exc}") from exc
        arr = m.toarray() if scipy.sparse.issparse(m) else np.asarray(m)
        if np.iscomplexobj(arr):
            raise MatrixFormatError(f"{path}: complex matrices are not supported")
    else:
        arr = _read_binary(path)
    return as_nonneg(arr)


def _read_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise MatrixFormatError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise MatrixFormatError(f"{path}: empty file")
    width = len(rows[0])
    for lineno, row in enumerate(rows, start=1):
        if len(row) != width:
            raise MatrixFormatError(
                f"{path}: row {lineno} has {len(row)} fields, expected {width}"
            )
    return np.array(rows, dtype=np.float64)


def _read_binary(path):
    raw = Path(path).read_bytes()
    if len(raw) < 20 or raw[:4] != BINARY_MAGIC:
        raise MatrixFormatError(f"{path}: missing NMAT header")
    rows, cols = struct.unpack_from("<QQ", raw, 4)
    expected = 20 + 8 * rows * cols
    if len(raw) != expected:
        raise MatrixFormatError(
            f"{path}: {rows}x{cols} needs {expected} bytes, file has {len(raw)}"
        )
    return np.frombuffer(raw, dtype="<f8", offset=20).reshape(rows, cols).copy()


def write_matrix(matrix, path, format="csv"):
    """Write a dense matrix. CSV uses 17 significant digits."""
    fmt = _canonical_format(format)
    arr = np.asarray(matrix, dtype=np.float64)
    path = Path(path)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            for row in arr:
                fh.write(",".join(_fmt17(v) for v in row))
                fh.write("\n")
    elif fmt == "matrix-market":
        # a file handle keeps mmwrite from appending '.mtx' to the name
        with open(path, "wb") as fh:
            scipy.io.mmwrite(fh, arr, precision=17)
    else:
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC)
            fh.write(struct.pack("<QQ", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _fmt17(value):
    return format(float(value), ".17g")


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic nonnegative low-rank matrix.

    `noise` is one of 'none', 'poisson' or 'gaussian-clipped'; for the
    latter `sigma` is the noise level relative to the mean of W H.
    """

    m: int
    n: int
    r_true: int
    noise: str = "poisson"
    scale: float = 1.0
    seed: int = 0
    sigma: float = 0.1

    def __post_init__(self):
        for name in ("m", "n", "r_true"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.r_true > min(self.m, self.n):
            raise ValueError("r_true must not exceed min(m, n)")
        if self.noise not in ("none", "poisson", "gaussian-clipped"):
            raise ValueError(f"unknown noise model {self.noise!r}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")


def synth_lowrank(spec):
    """Draw ``(X, W_true, H_true)`` for `spec`.

    The factors are uniform on (0.1, 1] times ``spec.scale``; ``X`` is the
    product with the requested noise applied. Deterministic in ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed)
    # uniform on [0, 0.9) mapped to (0.1, 1]
    W = (1.0 - 0.9 * rng.random((spec.m, spec.r_true))) * spec.scale
    H = (1.0 - 0.9 * rng.random((spec.r_true, spec.n))) * spec.scale
    V = W @ H
    if spec.noise == "none":
        X = V
    elif spec.noise == "poisson":
        X = rng.poisson(V).astype(np.float64)
    else:
        X = np.maximum(0.0, V + spec.sigma * V.mean() * rng.standard_normal(V.shape))
    return as_nonneg(X), as_nonneg(W, "W_true"), as_nonneg(H, "H_true")


@dataclass
class TraceRecord:
    iter: int
    wall_seconds: float
    objective: float
    rel_objective: float
    alpha_W: float = 0.0
    alpha_H: float = 0.0
    kkt_residual: float | None = None


@dataclass
class ConvergenceTrace:
    """Ordered per-iteration solver record."""

    records: list[TraceRecord] = field(default_factory=list)

    def append(self, record):
        if self.records:
            last = self.records[-1]
            if record.iter <= last.iter:
                raise ValueError("trace iterations must be strictly increasing")
            if record.wall_seconds < last.wall_seconds:
                raise ValueError("trace wall time must be nondecreasing")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, idx):
        return self.records[idx]

    def column(self, name):
        """Return one field as a float array (absent residuals become NaN)."""
        return np.array(
            [np.nan if getattr(r, name) is None else getattr(r, name) for r in self.records],
            dtype=np.float64,
        )

    @property
    def objectives(self):
        return self.column("objective")


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return _fmt17(value)


def trace_to_csv(trace):
    buf = io.StringIO()
    buf.write(",".join(TRACE_FIELDS) + "\n")
    for rec in trace:
        buf.write(",".join(_csv_cell(getattr(rec, f)) for f in TRACE_FIELDS) + "\n")
    return buf.getvalue()


def write_trace(trace, path, format="csv"):
    """Persist a trace as CSV (fixed header) or JSON (list of records)."""
    if format == "csv":
        text = trace_to_csv(trace)
    elif format == "json":
        text = json.dumps([_json_record(r) for r in trace], indent=1) + "\n"
    else:
        raise ValueError(f"unknown trace format {format!r}")
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _json_record(rec):
    out = asdict(rec)
    for key, val in out.items():
        if isinstance(val, float) and not math.isfinite(val):
            out[key] = None if math.isnan(val) else str(val)
    return out


def read_trace(path, format="csv"):
    """Inverse of :func:`write_trace`."""
    trace = ConvergenceTrace()
    if format == "json":
        with open(path) as fh:
            for item in json.load(fh):
                trace.append(TraceRecord(**{k: _parse_json_value(k, v) for k, v in item.items()}))
        return trace
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_FIELDS:
            raise MatrixFormatError(f"{path}: unexpected trace header {header!r}")
        for row in reader:
            vals = dict(zip(TRACE_FIELDS, row))
            trace.append(
                TraceRecord(
                    iter=int(vals["iter"]),
                    wall_seconds=float(vals["wall_seconds"]),
                    objective=float(vals["objective"]),
                    rel_objective=float(vals["rel_objective"]),
                    alpha_W=float(vals["alpha_W"]),
                    alpha_H=float(vals["alpha_H"]),
                    kkt_residual=float(vals["kkt_residual"]) if vals["kkt_residual"] else None,
                )
            )
    return trace


def _parse_json_value(key, value):
    if key == "iter":
        return int(value)
    if value is None:
        return None if key == "kkt_residual" else float("nan")
    return float(value)
