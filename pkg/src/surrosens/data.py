"""Two-sample dataset container and CSV round-trip.

A combined dataset holds experimental rows (treatment and surrogates, no
long-term outcome) and observational rows (surrogates and long-term outcome,
no treatment) over shared surrogate and covariate columns.  The CSV schema
is ``sample,w,y,s1..sk,x1..xm`` with sample in {E, O} and missing values
encoded as empty fields.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass

import numpy as np

__all__ = ["CombinedDataset", "DataError", "load_dataset", "save_dataset", "split_complete"]


class DataError(ValueError):
    """Schema or invariant violation in a combined dataset."""


@dataclass
class CombinedDataset:
    """Rows tagged E (experimental) or O (observational).

    ``w`` and ``y`` are float arrays with NaN where the column is not
    observed for the row's sample; ``s`` and ``x`` are dense (n, k) and
    (n, m) matrices.
    """

    is_exp: np.ndarray
    w: np.ndarray
    y: np.ndarray
    s: np.ndarray
    x: np.ndarray
    s_names: tuple = ()
    x_names: tuple = ()

    def __post_init__(self) -> None:
        self.is_exp = np.asarray(self.is_exp, dtype=bool)
        self.w = np.asarray(self.w, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.s = np.atleast_2d(np.asarray(self.s, dtype=float))
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        if self.s.shape[0] != self.n_rows:
            self.s = self.s.T
        if self.x.shape[0] != self.n_rows:
            self.x = self.x.T
        if not self.s_names:
            self.s_names = tuple(f"s{j + 1}" for j in range(self.s.shape[1]))
        if not self.x_names:
            self.x_names = tuple(f"x{j + 1}" for j in range(self.x.shape[1]))
        self.validate()

    @property
    def n_rows(self) -> int:
        return self.is_exp.shape[0]

    @property
    def n_surrogates(self) -> int:
        return self.s.shape[1]

    @property
    def n_covariates(self) -> int:
        return self.x.shape[1]

    @property
    def features_sx(self) -> np.ndarray:
        """Concatenated (s, x) feature matrix."""
        return np.hstack([self.s, self.x])

    def validate(self) -> None:
        n = self.n_rows
        for name, arr in (("w", self.w), ("y", self.y)):
            if arr.shape != (n,):
                raise DataError(f"column {name} has shape {arr.shape}, expected ({n},)")
        if self.s.shape[0] != n or self.x.shape[0] != n:
            raise DataError("s/x row count mismatch")
        if self.s.shape[1] < 1 or self.x.shape[1] < 1:
            raise DataError("need at least one surrogate and one covariate column")
        if np.isnan(self.s).any() or np.isnan(self.x).any():
            raise DataError("missing s/x entries are not allowed")
        exp = self.is_exp
        if np.isnan(self.w[exp]).any():
            raise DataError("experimental rows must carry w")
        if not np.isnan(self.y[exp]).all():
            bad = int(np.flatnonzero(exp & ~np.isnan(self.y))[0])
            raise DataError(f"experimental row {bad} carries y")
        if np.isnan(self.y[~exp]).any():
            raise DataError("observational rows must carry y")
        if not np.isnan(self.w[~exp]).all():
            bad = int(np.flatnonzero(~exp & ~np.isnan(self.w))[0])
            raise DataError(f"observational row {bad} carries w")
        wvals = self.w[exp]
        if not np.all((wvals == 0.0) | (wvals == 1.0)):
            raise DataError("treatment w must be binary")

    def subset(self, mask: np.ndarray) -> "CombinedDataset":
        mask = np.asarray(mask)
        return CombinedDataset(
            self.is_exp[mask], self.w[mask], self.y[mask],
            self.s[mask], self.x[mask], self.s_names, self.x_names,
        )

    @property
    def y_is_binary(self) -> bool:
        obs = self.y[~self.is_exp]
        return bool(np.all((obs == 0.0) | (obs == 1.0)))


def _fmt(v: float) -> str:
    # repr round-trips doubles exactly
    return "" if np.isnan(v) else repr(float(v))


def save_dataset(ds: CombinedDataset, path: str) -> None:
    """Write the CSV atomically (temp file then rename)."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["sample", "w", "y", *ds.s_names, *ds.x_names])
    for i in range(ds.n_rows):
        writer.writerow(
            [
                "E" if ds.is_exp[i] else "O",
                _fmt(ds.w[i]),
                _fmt(ds.y[i]),
                *(_fmt(v) for v in ds.s[i]),
                *(_fmt(v) for v in ds.x[i]),
            ]
        )
    _atomic_write(path, buf.getvalue())


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_dataset(path: str) -> CombinedDataset:
    """Load and validate a combined-dataset CSV, preserving row order."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = list(reader)
    if len(header) < 5 or header[:3] != ["sample", "w", "y"]:
        raise DataError(f"{path}: header must start with sample,w,y followed by s*/x* columns")
    s_names = tuple(h for h in header[3:] if h.startswith("s"))
    x_names = tuple(h for h in header[3:] if h.startswith("x"))
    if len(s_names) + len(x_names) != len(header) - 3:
        raise DataError(f"{path}: unrecognised columns in {header[3:]}")
    if list(header[3:]) != list(s_names) + list(x_names):
        raise DataError(f"{path}: s-columns must precede x-columns")
    k, m = len(s_names), len(x_names)
    if k < 1 or m < 1:
        raise DataError(f"{path}: need at least one s and one x column")
    n = len(rows)
    is_exp = np.zeros(n, dtype=bool)
    w = np.full(n, np.nan)
    y = np.full(n, np.nan)
    s = np.zeros((n, k))
    x = np.zeros((n, m))
    for i, row in enumerate(rows):
        lineno = i + 2
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        tag = row[0]
        if tag not in ("E", "O"):
            raise DataError(f"{path}:{lineno}: sample must be E or O, got {tag!r}")
        is_exp[i] = tag == "E"
        try:
            if row[1] != "":
                w[i] = float(row[1])
            if row[2] != "":
                y[i] = float(row[2])
            s[i] = [float(v) for v in row[3 : 3 + k]]
            x[i] = [float(v) for v in row[3 + k :]]
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        if is_exp[i] and row[2] != "":
            raise DataError(f"{path}:{lineno}: experimental row carries y")
        if is_exp[i] and row[1] == "":
            raise DataError(f"{path}:{lineno}: experimental row missing w")
        if not is_exp[i] and row[1] != "":
            raise DataError(f"{path}:{lineno}: observational row carries w")
        if not is_exp[i] and row[2] == "":
            raise DataError(f"{path}:{lineno}: observational row missing y")
        if is_exp[i] and w[i] not in (0.0, 1.0):
            raise DataError(f"{path}:{lineno}: w must be 0 or 1, got {row[1]}")
    try:
        return CombinedDataset(is_exp, w, y, s, x, s_names, x_names)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def split_complete(s, x, w, y, seed: int) -> CombinedDataset:
    """Even random split of a fully observed sample into the two-sample form.

    Rows assigned to the experimental half keep w and drop y; the
    observational half keeps y and drops w.
    """
    s = np.atleast_2d(np.asarray(s, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    n = w.shape[0]
    if s.shape[0] != n:
        s = s.T
    if x.shape[0] != n:
        x = x.T
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    exp_rows = np.zeros(n, dtype=bool)
    exp_rows[order[: n // 2]] = True
    w_out = np.where(exp_rows, w, np.nan)
    y_out = np.where(exp_rows, np.nan, y)
    return CombinedDataset(exp_rows, w_out, y_out, s, x)
