"""Categorical rasters, point sample sets and their text formats.

Grid files are plain text::

    width height n_classes
    l l l ...        (height rows of width labels, row 0 on top)

Label 0 marks a no-data / unsimulated cell. Sample files are CSV with the
header ``x,y,class`` where ``x`` is the column and ``y`` the row index.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from os import PathLike
from typing import Iterator, Union

import numpy as np

from .errors import FormatError, ValidationError

PathType = Union[str, PathLike]


def _check_dims(width: int, height: int, n_classes: int) -> None:
    if width < 1 or height < 1:
        raise ValidationError(f"grid dimensions must be positive, got {width}x{height}")
    if n_classes < 2:
        raise ValidationError(f"n_classes must be >= 2, got {n_classes}")


@dataclass(frozen=True)
class GridSpec:
    width: int
    height: int
    n_classes: int

    def __post_init__(self):
        _check_dims(self.width, self.height, self.n_classes)

    @property
    def size(self) -> int:
        return self.width * self.height

    def contains(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height


@dataclass(frozen=True, eq=False)
class CategoricalGrid:
    """Raster of class labels 1..n_classes, 0 meaning no data.

    ``cells`` is a read-only ``(height, width)`` int array; index it as
    ``cells[y, x]``.
    """

    width: int
    height: int
    n_classes: int
    cells: np.ndarray

    def __post_init__(self):
        _check_dims(self.width, self.height, self.n_classes)
        cells = np.array(self.cells, dtype=np.int64, copy=True)
        if cells.size != self.width * self.height:
            raise ValidationError(
                f"cell count {cells.size} does not match {self.width}x{self.height}"
            )
        cells = cells.reshape(self.height, self.width)
        if cells.size and (cells.min() < 0 or cells.max() > self.n_classes):
            bad = cells[(cells < 0) | (cells > self.n_classes)][0]
            raise ValidationError(f"label {bad} outside 0..{self.n_classes}")
        cells.flags.writeable = False
        object.__setattr__(self, "cells", cells)

    @classmethod
    def from_array(cls, cells, n_classes: int) -> "CategoricalGrid":
        cells = np.asarray(cells)
        if cells.ndim != 2:
            raise ValidationError("expected a 2-D array of labels")
        return cls(cells.shape[1], cells.shape[0], n_classes, cells)

    @property
    def spec(self) -> GridSpec:
        return GridSpec(self.width, self.height, self.n_classes)

    def __getitem__(self, xy):
        x, y = xy
        return int(self.cells[y, x])

    def __eq__(self, other):
        if not isinstance(other, CategoricalGrid):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.n_classes == other.n_classes
            and np.array_equal(self.cells, other.cells)
        )

    __hash__ = None

    def class_counts(self) -> np.ndarray:
        """Counts of labels 0..n_classes (index 0 is no-data)."""
        return np.bincount(self.cells.ravel(), minlength=self.n_classes + 1)

    def proportions(self) -> np.ndarray:
        counts = self.class_counts()[1:].astype(float)
        return counts / counts.sum()


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Point observations snapped to cells.

    Stored column-wise as int arrays ``x``, ``y`` and ``classes``.
    """

    x: np.ndarray
    y: np.ndarray
    classes: np.ndarray
    n_classes: int

    def __post_init__(self):
        arrays = []
        for name in ("x", "y", "classes"):
            a = np.array(getattr(self, name), dtype=np.int64, copy=True).ravel()
            a.flags.writeable = False
            object.__setattr__(self, name, a)
            arrays.append(a)
        x, y, classes = arrays
        if not (len(x) == len(y) == len(classes)):
            raise ValidationError("x, y and classes must have equal length")
        if self.n_classes < 2:
            raise ValidationError(f"n_classes must be >= 2, got {self.n_classes}")
        if len(classes) and (classes.min() < 1 or classes.max() > self.n_classes):
            raise ValidationError(f"sample class outside 1..{self.n_classes}")
        if len(x) and (x.min() < 0 or y.min() < 0):
            raise ValidationError("negative sample coordinate")
        if len(x):
            keys = np.stack([x, y], axis=1)
            uniq = np.unique(keys, axis=0)
            if len(uniq) != len(keys):
                raise ValidationError("duplicate sample at one cell")

    @classmethod
    def from_points(cls, points, n_classes: int) -> "SampleSet":
        pts = list(points)
        if not pts:
            return cls(np.empty(0), np.empty(0), np.empty(0), n_classes)
        x, y, c = zip(*pts)
        return cls(x, y, c, n_classes)

    @property
    def points(self) -> list[tuple[int, int, int]]:
        return list(zip(self.x.tolist(), self.y.tolist(), self.classes.tolist()))

    def __len__(self) -> int:
        return len(self.x)

    def __iter__(self) -> Iterator[tuple[int, int, int]]:
        return iter(self.points)

    def __eq__(self, other):
        if not isinstance(other, SampleSet):
            return NotImplemented
        return (
            self.n_classes == other.n_classes
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.classes, other.classes)
        )

    __hash__ = None

    def check_bounds(self, spec: GridSpec) -> None:
        if len(self) == 0:
            return
        if self.x.max() >= spec.width or self.y.max() >= spec.height:
            raise ValidationError(
                f"sample outside {spec.width}x{spec.height} grid bounds"
            )
        if self.classes.max() > spec.n_classes:
            raise ValidationError(f"sample class outside 1..{spec.n_classes}")

    def proportions(self) -> np.ndarray:
        counts = np.bincount(self.classes, minlength=self.n_classes + 1)[1:]
        return counts / counts.sum()


def _parse_ints(tokens, lineno):
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise FormatError(f"line {lineno}: expected integers, got {' '.join(tokens)!r}") from None


def parse_grid(text: str) -> CategoricalGrid:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty grid file")
    header = _parse_ints(lines[0].split(), 1)
    if len(header) != 3:
        raise FormatError("header must be 'width height n_classes'")
    width, height, n_classes = header
    _check_dims(width, height, n_classes)
    body = lines[1:]
    if len(body) != height:
        raise FormatError(f"expected {height} rows, found {len(body)}")
    rows = []
    for lineno, line in enumerate(body, start=2):
        row = _parse_ints(line.split(), lineno)
        if len(row) != width:
            raise FormatError(f"line {lineno}: expected {width} labels, found {len(row)}")
        rows.append(row)
    return CategoricalGrid(width, height, n_classes, np.array(rows, dtype=np.int64))


def format_grid(grid: CategoricalGrid) -> str:
    out = io.StringIO()
    out.write(f"{grid.width} {grid.height} {grid.n_classes}\n")
    for row in grid.cells:
        out.write(" ".join(map(str, row.tolist())))
        out.write("\n")
    return out.getvalue()


def load_grid(path: PathType) -> CategoricalGrid:
    with open(path, "r", encoding="ascii") as fh:
        return parse_grid(fh.read())


def save_grid(grid: CategoricalGrid, path: PathType) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_grid(grid))


def load_samples(path: PathType, n_classes: int | None = None) -> SampleSet:
    """Read a ``x,y,class`` CSV.

    When ``n_classes`` is omitted it is taken as the largest label present
    (at least 2).
    """
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("empty sample file") from None
        if [h.strip() for h in header] != ["x", "y", "class"]:
            raise FormatError(f"bad sample header {header!r}, expected x,y,class")
        points = []
        seen = set()
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 3:
                raise FormatError(f"line {lineno}: expected 3 fields")
            x, y, c = _parse_ints([r.strip() for r in row], lineno)
            if (x, y) in seen:
                raise ValidationError(f"line {lineno}: duplicate sample at ({x}, {y})")
            seen.add((x, y))
            points.append((x, y, c))
    if n_classes is None:
        n_classes = max([2] + [p[2] for p in points])
    return SampleSet.from_points(points, n_classes)


def save_samples(samples: SampleSet, path: PathType) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write("x,y,class\n")
        for x, y, c in samples.points:
            fh.write(f"{x},{y},{c}\n")


def random_sample(grid: CategoricalGrid, count: int, seed: int) -> SampleSet:
    """Draw ``count`` distinct labelled cells uniformly without replacement.

    Points are returned in draw order. No-data cells are never selected.
    """
    flat = grid.cells.ravel()
    available = np.flatnonzero(flat)
    if count < 0:
        raise ValidationError("sample count must be non-negative")
    if count > len(available):
        raise ValidationError(
            f"requested {count} samples but only {len(available)} labelled cells"
        )
    rng = np.random.default_rng(np.random.SeedSequence(seed % 2**64))
    chosen = rng.choice(available, size=count, replace=False)
    y, x = np.divmod(chosen, grid.width)
    return SampleSet(x, y, flat[chosen], grid.n_classes)
