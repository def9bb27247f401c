"""Nearest-data search around an unsampled cell.

Two designs are supported: the ``k`` nearest data regardless of direction,
and one nearest datum per angular sector (2, 4 or 8 sectors). Angles are
measured in the raster frame, x to the right and y *down*, so sector 0
starts at the +x axis and turns towards +y. Sector ``s`` covers the
half-open interval ``[s * 2pi/S, (s+1) * 2pi/S)``.

Distance ties are broken by smaller y, then smaller x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .errors import ValidationError
from .grid import GridSpec, SampleSet

NONSECTORED = "nonsectored"
SECTORED = "sectored"
SECTOR_COUNTS = (2, 4, 8)

_MODE_NEAREST = 0
_MODE_SECTORED = 1


@dataclass(frozen=True)
class NeighborhoodConfig:
    """``kind`` is ``"nonsectored"`` (``size`` = k nearest) or ``"sectored"``
    (``size`` = number of sectors)."""

    kind: str
    size: int
    radius: float

    def __post_init__(self):
        if self.kind == NONSECTORED:
            if self.size < 1:
                raise ValidationError("non-sectored neighborhood needs k >= 1")
        elif self.kind == SECTORED:
            if self.size not in SECTOR_COUNTS:
                raise ValidationError(f"sector count must be one of {SECTOR_COUNTS}")
        else:
            raise ValidationError(f"unknown neighborhood kind {self.kind!r}")
        if not self.radius > 0:
            raise ValidationError("search radius must be > 0")

    @classmethod
    def parse(cls, text: str, radius: float) -> "NeighborhoodConfig":
        """Parse ``nonsectored:<k>`` or ``sectored:<2|4|8>``."""
        kind, sep, size = text.strip().partition(":")
        if not sep:
            raise ValidationError(f"bad neighborhood {text!r}; use nonsectored:<k> or sectored:<s>")
        try:
            n = int(size)
        except ValueError:
            raise ValidationError(f"bad neighborhood size in {text!r}") from None
        return cls(kind.strip().lower(), n, float(radius))

    @property
    def descriptor(self) -> str:
        return f"{self.kind}:{self.size}"

    @property
    def max_data(self) -> int:
        return self.size


@dataclass(frozen=True)
class NearestDatum:
    x: int
    y: int
    cls: int
    lag: float
    sector: Optional[int] = None


@dataclass(frozen=True)
class Neighborhood:
    center: tuple[int, int]
    data: tuple[NearestDatum, ...]

    def __len__(self):
        return len(self.data)

    def __iter__(self):
        return iter(self.data)

    @property
    def classes(self) -> np.ndarray:
        return np.array([d.cls for d in self.data], dtype=np.int64)

    @property
    def lags(self) -> np.ndarray:
        return np.array([d.lag for d in self.data], dtype=float)


@numba.njit(cache=True, nogil=True)
def sector_of(dx, dy, n_sectors):
    """Sector index of offset ``(dx, dy)``, computed without trigonometry."""
    if dx > 0 and dy >= 0:
        q = 0
    elif dx <= 0 and dy > 0:
        q = 1
    elif dx < 0 and dy <= 0:
        q = 2
    else:
        q = 3
    if n_sectors == 4:
        return q
    if n_sectors == 2:
        return q // 2
    # rotate into the first quadrant: (dx, dy) -> (dy, -dx) subtracts pi/2
    for _ in range(q):
        dx, dy = dy, -dx
    return 2 * q + (0 if dy < dx else 1)


@numba.njit(cache=True, nogil=True)
def _insert(labels, bucket_n, bucket_items, width, bsize, nbx, idx, cls):
    labels[idx] = cls
    y = idx // width
    x = idx - y * width
    b = (y // bsize) * nbx + x // bsize
    bucket_items[b, bucket_n[b]] = idx
    bucket_n[b] += 1


@numba.njit(cache=True, nogil=True)
def _key_less(d2a, ia, d2b, ib):
    # (d2, y, x) ordering; row-major index orders (y, x) identically
    return d2a < d2b or (d2a == d2b and ia < ib)


@numba.njit(cache=True, nogil=True)
def _search(labels, bucket_n, bucket_items, width, height, bsize, nbx, nby,
            cx, cy, radius, mode, size, out_idx, out_d2, out_sec):
    """Fill ``out_*`` with the selected data sorted by (d2, y, x); return the count."""
    bx0 = int(math.floor((cx - radius) / bsize))
    bx1 = int(math.floor((cx + radius) / bsize))
    by0 = int(math.floor((cy - radius) / bsize))
    by1 = int(math.floor((cy + radius) / bsize))
    if bx0 < 0:
        bx0 = 0
    if by0 < 0:
        by0 = 0
    if bx1 > nbx - 1:
        bx1 = nbx - 1
    if by1 > nby - 1:
        by1 = nby - 1

    nsec = size if mode == _MODE_SECTORED else 1
    sec_idx = np.full(nsec, -1, dtype=np.int64)
    sec_d2 = np.zeros(nsec, dtype=np.int64)
    found = 0

    for by in range(by0, by1 + 1):
        # nearest point of the bucket rectangle to the centre
        ylo = by * bsize
        yhi = ylo + bsize - 1
        ey = 0
        if cy < ylo:
            ey = ylo - cy
        elif cy > yhi:
            ey = cy - yhi
        for bx in range(bx0, bx1 + 1):
            xlo = bx * bsize
            xhi = xlo + bsize - 1
            ex = 0
            if cx < xlo:
                ex = xlo - cx
            elif cx > xhi:
                ex = cx - xhi
            if math.sqrt(float(ex * ex + ey * ey)) > radius:
                continue
            b = by * nbx + bx
            for t in range(bucket_n[b]):
                idx = bucket_items[b, t]
                y = idx // width
                x = idx - y * width
                dx = x - cx
                dy = y - cy
                d2 = dx * dx + dy * dy
                if d2 == 0 or math.sqrt(float(d2)) > radius:
                    continue
                if mode == _MODE_SECTORED:
                    s = sector_of(dx, dy, size)
                    if sec_idx[s] < 0 or _key_less(d2, idx, sec_d2[s], sec_idx[s]):
                        sec_idx[s] = idx
                        sec_d2[s] = d2
                else:
                    if found == size and not _key_less(d2, idx, out_d2[found - 1], out_idx[found - 1]):
                        continue
                    pos = found if found < size else size - 1
                    while pos > 0 and _key_less(d2, idx, out_d2[pos - 1], out_idx[pos - 1]):
                        out_d2[pos] = out_d2[pos - 1]
                        out_idx[pos] = out_idx[pos - 1]
                        pos -= 1
                    out_d2[pos] = d2
                    out_idx[pos] = idx
                    if found < size:
                        found += 1

    if mode == _MODE_SECTORED:
        for s in range(nsec):
            if sec_idx[s] < 0:
                continue
            d2 = sec_d2[s]
            idx = sec_idx[s]
            pos = found
            while pos > 0 and _key_less(d2, idx, out_d2[pos - 1], out_idx[pos - 1]):
                out_d2[pos] = out_d2[pos - 1]
                out_idx[pos] = out_idx[pos - 1]
                out_sec[pos] = out_sec[pos - 1]
                pos -= 1
            out_d2[pos] = d2
            out_idx[pos] = idx
            out_sec[pos] = s
            found += 1
    return found


@numba.njit(cache=True, nogil=True)
def _gather(labels, bucket_n, bucket_items, width, bsize, nbx, nby, cx, cy, radius):
    out = []
    for b in range(nbx * nby):
        for t in range(bucket_n[b]):
            idx = bucket_items[b, t]
            y = idx // width
            x = idx - y * width
            d2 = (x - cx) ** 2 + (y - cy) ** 2
            if math.sqrt(float(d2)) <= radius:
                out.append(idx)
    return np.array(out, dtype=np.int64)


class ConditioningIndex:
    """Occupied cells (samples and simulated cells) bucketed on a coarse grid.

    Buckets are ``bucket_size`` cells square. The index is single-writer;
    readers must not run concurrently with :meth:`insert`.
    """

    def __init__(self, spec: GridSpec, bucket_size: int = 8):
        bucket_size = max(1, int(bucket_size))
        self.spec = spec
        self.bucket_size = bucket_size
        self.nbx = -(-spec.width // bucket_size)
        self.nby = -(-spec.height // bucket_size)
        self.labels = np.zeros(spec.size, dtype=np.int64)
        self.bucket_n = np.zeros(self.nbx * self.nby, dtype=np.int64)
        self.bucket_items = np.zeros((self.nbx * self.nby, bucket_size * bucket_size), dtype=np.int64)

    def __len__(self) -> int:
        return int(self.bucket_n.sum())

    def __contains__(self, xy) -> bool:
        x, y = xy
        return self.spec.contains(x, y) and self.labels[y * self.spec.width + x] != 0

    def label(self, x: int, y: int) -> int:
        return int(self.labels[y * self.spec.width + x])

    def insert(self, x: int, y: int, cls: int) -> None:
        if not self.spec.contains(x, y):
            raise ValidationError(f"cell ({x}, {y}) outside the grid")
        if not 1 <= cls <= self.spec.n_classes:
            raise ValidationError(f"class {cls} outside 1..{self.spec.n_classes}")
        idx = y * self.spec.width + x
        if self.labels[idx]:
            raise ValidationError(f"cell ({x}, {y}) is already occupied")
        _insert(self.labels, self.bucket_n, self.bucket_items, self.spec.width,
                self.bucket_size, self.nbx, idx, cls)

    def query_radius(self, center, radius: float) -> list[tuple[int, int, int]]:
        """Occupied cells within ``radius`` of ``center``, as ``(x, y, class)``, row-major order."""
        cx, cy = center
        idx = _gather(self.labels, self.bucket_n, self.bucket_items, self.spec.width,
                      self.bucket_size, self.nbx, self.nby, int(cx), int(cy), float(radius))
        idx = np.sort(idx)
        w = self.spec.width
        return [(int(i % w), int(i // w), int(self.labels[i])) for i in idx]

    def _run_search(self, center, mode, size, radius):
        cx, cy = center
        n = size
        out_idx = np.zeros(n, dtype=np.int64)
        out_d2 = np.zeros(n, dtype=np.int64)
        out_sec = np.zeros(n, dtype=np.int64)
        m = _search(self.labels, self.bucket_n, self.bucket_items, self.spec.width,
                    self.spec.height, self.bucket_size, self.nbx, self.nby,
                    int(cx), int(cy), float(radius), mode, size, out_idx, out_d2, out_sec)
        w = self.spec.width
        data = []
        for t in range(m):
            i = int(out_idx[t])
            data.append(NearestDatum(
                x=i % w, y=i // w, cls=int(self.labels[i]),
                lag=math.sqrt(float(out_d2[t])),
                sector=int(out_sec[t]) if mode == _MODE_SECTORED else None,
            ))
        return Neighborhood((int(cx), int(cy)), tuple(data))


def build_index(samples: SampleSet, spec: GridSpec, bucket_size: int = 8) -> ConditioningIndex:
    samples.check_bounds(spec)
    index = ConditioningIndex(spec, bucket_size)
    for x, y, c in samples.points:
        index.insert(x, y, c)
    return index


def find_non_sectored(index: ConditioningIndex, center, config: NeighborhoodConfig) -> Neighborhood:
    if config.kind != NONSECTORED:
        raise ValidationError("find_non_sectored needs a non-sectored config")
    return index._run_search(center, _MODE_NEAREST, config.size, config.radius)


def find_sectored(index: ConditioningIndex, center, config: NeighborhoodConfig) -> Neighborhood:
    if config.kind != SECTORED:
        raise ValidationError("find_sectored needs a sectored config")
    return index._run_search(center, _MODE_SECTORED, config.size, config.radius)


def find_neighborhood(index: ConditioningIndex, center, config: NeighborhoodConfig) -> Neighborhood:
    if config.kind == SECTORED:
        return find_sectored(index, center, config)
    return find_non_sectored(index, center, config)
