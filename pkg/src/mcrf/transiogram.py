"""Experimental transiograms and piecewise-linear transiogram models.

A transiogram ``p_ij(h)`` is the probability of finding class ``j`` at lag
``h`` from a location of class ``i``. Lags are scalar (omnidirectional)
Euclidean distances in cell units. Classes are 1-based in the public API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from os import PathLike
from typing import Union

import numba
import numpy as np

from .errors import FormatError, ValidationError
from .grid import CategoricalGrid, SampleSet

PathType = Union[str, PathLike]

ROW_SUM_TOL = 1e-6


@dataclass(frozen=True)
class LagBinning:
    """Lag classes centred on ``bin_width, 2*bin_width, ... <= max_lag``.

    A pair at distance ``d`` is counted for every centre ``h`` with
    ``|d - h| <= tolerance``; ``tolerance`` is the half-width of the window.
    """

    max_lag: float
    bin_width: float
    tolerance: float

    def __post_init__(self):
        if not self.bin_width > 0:
            raise ValidationError("bin_width must be > 0")
        if not self.tolerance >= 0:
            raise ValidationError("tolerance must be >= 0")
        if not self.max_lag >= self.bin_width:
            raise ValidationError("max_lag must be >= bin_width")

    @property
    def centers(self) -> np.ndarray:
        n = int(math.floor(self.max_lag / self.bin_width + 1e-9))
        return np.arange(1, n + 1, dtype=float) * self.bin_width


@dataclass(frozen=True, eq=False)
class ExperimentalTransiograms:
    n_classes: int
    lag_centers: np.ndarray
    counts: np.ndarray  # (n_lags, n, n) int64, counts[l, i-1, k-1] = F_ik(h_l)
    probabilities: np.ndarray  # same shape, NaN where the row count is zero

    def row_counts(self) -> np.ndarray:
        return self.counts.sum(axis=2)


@numba.njit(cache=True, nogil=True)
def _pair_counts(xs, ys, cls, centers, tol, n_classes):
    nb = centers.shape[0]
    counts = np.zeros((nb, n_classes, n_classes), dtype=np.int64)
    if nb == 0:
        return counts
    bw = centers[0]
    m = xs.shape[0]
    for a in range(m):
        ca = cls[a] - 1
        for b in range(a + 1, m):
            dx = xs[b] - xs[a]
            dy = ys[b] - ys[a]
            d = math.sqrt(float(dx * dx + dy * dy))
            lo = int(math.floor((d - tol) / bw)) - 2
            hi = int(math.ceil((d + tol) / bw)) + 1
            if lo < 0:
                lo = 0
            if hi > nb - 1:
                hi = nb - 1
            cb = cls[b] - 1
            for k in range(lo, hi + 1):
                if abs(d - centers[k]) <= tol:
                    counts[k, ca, cb] += 1
                    counts[k, cb, ca] += 1
    return counts


def _normalize_counts(counts: np.ndarray) -> np.ndarray:
    totals = counts.sum(axis=2, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = counts / totals
    probs[np.broadcast_to(totals == 0, probs.shape)] = np.nan
    return probs


def estimate_experimental(samples: SampleSet, binning: LagBinning) -> ExperimentalTransiograms:
    """Count class transitions over all ordered sample pairs per lag class."""
    if len(samples) == 0:
        raise ValidationError("cannot estimate transiograms from an empty sample set")
    centers = binning.centers
    counts = _pair_counts(
        samples.x, samples.y, samples.classes, centers, float(binning.tolerance), samples.n_classes
    )
    return ExperimentalTransiograms(samples.n_classes, centers, counts, _normalize_counts(counts))


def estimate_from_grid(grid: CategoricalGrid, binning: LagBinning) -> ExperimentalTransiograms:
    """Experimental transiograms using every labelled cell of ``grid``."""
    ys, xs = np.nonzero(grid.cells)
    cls = grid.cells[ys, xs]
    centers = binning.centers
    counts = _pair_counts(
        xs.astype(np.int64), ys.astype(np.int64), cls.astype(np.int64),
        centers, float(binning.tolerance), grid.n_classes,
    )
    return ExperimentalTransiograms(grid.n_classes, centers, counts, _normalize_counts(counts))


def _check_proportions(p: np.ndarray, n: int | None = None) -> np.ndarray:
    p = np.asarray(p, dtype=float).ravel()
    if n is not None and len(p) != n:
        raise ValidationError(f"expected {n} proportions, got {len(p)}")
    if len(p) < 2:
        raise ValidationError("need at least 2 classes")
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise ValidationError("proportions must lie in [0, 1]")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValidationError(f"proportions sum to {p.sum()!r}, not 1")
    return p


class TransiogramModel:
    """Piecewise-linear transiograms on a shared knot vector.

    ``values[k, i-1, j-1]`` is ``p_ij`` at ``knots[k]``. The first knot is 0
    and carries the identity matrix; beyond the last knot every curve is
    held constant.
    """

    def __init__(self, proportions, knots, values):
        proportions = _check_proportions(proportions)
        n = len(proportions)
        knots = np.array(knots, dtype=float).ravel()
        values = np.array(values, dtype=float)
        if values.shape != (len(knots), n, n):
            raise ValidationError(
                f"values shape {values.shape} does not match ({len(knots)}, {n}, {n})"
            )
        if len(knots) == 0 or knots[0] != 0.0:
            raise ValidationError("first knot must be at lag 0")
        if np.any(~np.isfinite(knots)) or np.any(np.diff(knots) <= 0):
            raise ValidationError("knots must be finite and strictly increasing")
        if np.any(~np.isfinite(values)):
            raise ValidationError("non-finite transition probability")
        if values.min() < 0 or values.max() > 1:
            raise ValidationError("transition probabilities must lie in [0, 1]")
        if np.max(np.abs(values[0] - np.eye(n))) > ROW_SUM_TOL:
            raise ValidationError("transiogram head at lag 0 must be the identity")
        sums = values.sum(axis=2)
        if np.max(np.abs(sums - 1.0)) > ROW_SUM_TOL:
            raise ValidationError("transiogram rows must sum to 1 at every knot")
        for a in (proportions, knots, values):
            a.flags.writeable = False
        self.proportions = proportions
        self.knots = knots
        self.values = values

    @property
    def n_classes(self) -> int:
        return len(self.proportions)

    def __eq__(self, other):
        if not isinstance(other, TransiogramModel):
            return NotImplemented
        return (
            np.array_equal(self.proportions, other.proportions)
            and np.array_equal(self.knots, other.knots)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def __repr__(self):
        return f"TransiogramModel(n_classes={self.n_classes}, knots={len(self.knots)})"

    def _check_class(self, c: int) -> None:
        if not 1 <= c <= self.n_classes:
            raise ValidationError(f"class {c} outside 1..{self.n_classes}")

    def query(self, i: int, j: int, h: float) -> float:
        """``p_ij(h)``, linear between knots, constant past the last one."""
        self._check_class(i)
        self._check_class(j)
        if h < 0:
            raise ValidationError("lag must be >= 0")
        return float(np.interp(h, self.knots, self.values[:, i - 1, j - 1]))

    def matrix(self, h: float) -> np.ndarray:
        """The full ``n x n`` transition matrix at lag ``h``."""
        if h < 0:
            raise ValidationError("lag must be >= 0")
        k = np.searchsorted(self.knots, h, side="right") - 1
        if k >= len(self.knots) - 1:
            return self.values[-1].copy()
        t = (h - self.knots[k]) / (self.knots[k + 1] - self.knots[k])
        return self.values[k] + t * (self.values[k + 1] - self.values[k])


def query(model: TransiogramModel, i: int, j: int, h: float) -> float:
    return model.query(i, j, h)


def fit_linear(experimental: ExperimentalTransiograms, proportions) -> TransiogramModel:
    """Join experimental transiograms into a continuous model by linear interpolation.

    Each row class is interpolated through its own populated lag classes,
    starting from the identity head at lag 0; knots are the union of the
    populated lags. Rows are rescaled to sum to 1 at each populated lag.
    """
    n = experimental.n_classes
    proportions = _check_proportions(proportions, n)
    row_counts = experimental.row_counts()  # (L, n)
    populated = row_counts > 0
    for i in range(n):
        if not populated[:, i].any():
            raise ValidationError(f"class {i + 1} has no populated lag class; cannot fit its row")
    lags = experimental.lag_centers
    knots = np.concatenate([[0.0], lags[populated.any(axis=1)]])
    values = np.empty((len(knots), n, n))
    for i in range(n):
        sel = populated[:, i]
        rows = experimental.counts[sel, i, :].astype(float)
        rows /= rows.sum(axis=1, keepdims=True)
        row_knots = np.concatenate([[0.0], lags[sel]])
        head = np.zeros(n)
        head[i] = 1.0
        row_vals = np.vstack([head, rows])
        for j in range(n):
            values[:, i, j] = np.interp(knots, row_knots, row_vals[:, j])
    return TransiogramModel(proportions, knots, values)


def make_detailed_balance_model(proportions, correlation_range: float) -> TransiogramModel:
    """Reversible exponential model ``d_ij e^(-h/r) + p_j (1 - e^(-h/r))``.

    The analytic curves are sampled on a dense knot set out to 40 ranges,
    past which they equal the proportions to double precision. Any
    interpolated matrix still satisfies ``p_i p_ij(h) = p_j p_ji(h)``.
    """
    p = _check_proportions(proportions)
    if not correlation_range > 0:
        raise ValidationError("correlation range must be > 0")
    unit = np.concatenate([np.linspace(0.0, 5.0, 101), np.arange(6.0, 41.0)])
    knots = unit * correlation_range
    decay = np.exp(-unit)[:, None, None]
    eye = np.eye(len(p))[None]
    values = eye * decay + p[None, None, :] * (1.0 - decay)
    return TransiogramModel(p, knots, values)


def _fmt(v: float) -> str:
    return repr(float(v))


def format_model(model: TransiogramModel) -> str:
    n = model.n_classes
    lines = [
        f"# n_classes={n} proportions=" + ";".join(_fmt(p) for p in model.proportions),
        ",".join(["lag"] + [f"p_{i}_{j}" for i in range(1, n + 1) for j in range(1, n + 1)]),
    ]
    for k, lag in enumerate(model.knots):
        lines.append(",".join([_fmt(lag)] + [_fmt(v) for v in model.values[k].ravel()]))
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> TransiogramModel:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2 or not lines[0].startswith("#"):
        raise FormatError("model file must start with a '# n_classes=... proportions=...' line")
    meta = {}
    for tok in lines[0][1:].split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise FormatError(f"bad header token {tok!r}")
        meta[key] = val
    try:
        n = int(meta["n_classes"])
        props = [float(v) for v in meta["proportions"].split(";")]
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad model header: {exc}") from None
    expected = ["lag"] + [f"p_{i}_{j}" for i in range(1, n + 1) for j in range(1, n + 1)]
    if lines[1].split(",") != expected:
        raise FormatError("model column header does not match n_classes")
    knots, values = [], []
    for lineno, line in enumerate(lines[2:], start=3):
        fields = line.split(",")
        if len(fields) != 1 + n * n:
            raise FormatError(f"line {lineno}: expected {1 + n * n} fields")
        try:
            nums = [float(f) for f in fields]
        except ValueError:
            raise FormatError(f"line {lineno}: non-numeric field") from None
        knots.append(nums[0])
        values.append(np.array(nums[1:]).reshape(n, n))
    if not knots:
        raise FormatError("model has no knots")
    if len(props) != n:
        raise FormatError(f"header lists {len(props)} proportions for {n} classes")
    return TransiogramModel(props, knots, np.array(values))


def save_model(model: TransiogramModel, path: PathType) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_model(model))


def load_model(path: PathType) -> TransiogramModel:
    with open(path, "r", encoding="ascii") as fh:
        return parse_model(fh.read())
