import math
from pathlib import Path

import numpy as np
import pytest

from mcrf.grid import GridSpec, SampleSet

DATA = Path(__file__).parent / "data"


def naive_counts(samples: SampleSet, centers, tol):
    """All ordered pairs, every bin checked: the slow reference estimator."""
    n = samples.n_classes
    F = np.zeros((len(centers), n, n), dtype=np.int64)
    pts = samples.points
    for a, (xa, ya, ca) in enumerate(pts):
        for b, (xb, yb, cb) in enumerate(pts):
            if a == b:
                continue
            d = math.sqrt((xb - xa) ** 2 + (yb - ya) ** 2)
            for k, h in enumerate(centers):
                if abs(d - h) <= tol:
                    F[k, ca - 1, cb - 1] += 1
    return F


def naive_probs(F):
    out = np.full(F.shape, np.nan)
    for k in range(F.shape[0]):
        for i in range(F.shape[1]):
            tot = F[k, i].sum()
            if tot:
                out[k, i] = F[k, i] / tot
    return out


def naive_sector(dx, dy, s):
    theta = math.atan2(dy, dx)
    if theta < 0:
        theta += 2 * math.pi
    return min(s - 1, int(math.floor(s * theta / (2 * math.pi))))


def naive_neighborhood(occupied, center, kind, size, radius):
    """Full scan over ``occupied`` = list of (x, y, cls).

    Returns list of (x, y, cls, lag, sector) in (lag, y, x) order.
    """
    cx, cy = center
    cands = []
    for x, y, c in occupied:
        if (x, y) == (cx, cy):
            continue
        lag = math.sqrt((x - cx) ** 2 + (y - cy) ** 2)
        if lag <= radius:
            cands.append((lag, y, x, c))
    cands.sort()
    if kind == "nonsectored":
        return [(x, y, c, lag, None) for lag, y, x, c in cands[:size]]
    best = {}
    for lag, y, x, c in cands:
        s = naive_sector(x - cx, y - cy, size)
        if s not in best:
            best[s] = (lag, y, x, c, s)
    chosen = sorted(best.values())
    return [(x, y, c, lag, s) for lag, y, x, c, s in chosen]


def random_scene(rng, width, height, n_occupied, n_classes=3):
    cells = rng.choice(width * height, size=n_occupied, replace=False)
    ys, xs = np.divmod(cells, width)
    cls = rng.integers(1, n_classes + 1, size=n_occupied)
    return SampleSet(xs, ys, cls, n_classes), GridSpec(width, height, n_classes)


@pytest.fixture
def data_dir():
    return DATA


def random_model(rng, n=None, n_knots=None):
    """Arbitrary (not reversible) piecewise-linear model with Dirichlet rows."""
    from mcrf.transiogram import TransiogramModel

    n = n or int(rng.integers(2, 7))
    n_knots = n_knots or int(rng.integers(2, 8))
    knots = np.concatenate([[0.0], np.sort(rng.choice(np.arange(1, 40), n_knots - 1, replace=False))])
    values = rng.dirichlet(np.ones(n), size=(n_knots, n))
    values[0] = np.eye(n)
    return TransiogramModel(rng.dirichlet(np.ones(n)), knots.astype(float), values)


def random_nbhd(rng, n_classes, m=None, max_lag=45.0):
    from mcrf.neighborhood import NearestDatum, Neighborhood

    m = int(rng.integers(1, 7)) if m is None else m
    lags = np.sort(rng.uniform(0.5, max_lag, m))
    data = tuple(
        NearestDatum(x=int(rng.integers(0, 100)), y=int(rng.integers(0, 100)),
                     cls=int(rng.integers(1, n_classes + 1)), lag=float(h))
        for h in lags
    )
    return Neighborhood((0, 0), data)


# acceptance verdicts: one line per @pytest.mark.criterion(n, title) test
_VERDICTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, title = marker.args
    detail = dict(report.user_properties).get("detail", "")
    if report.when != "call":
        detail = f"{report.when} error"
    _VERDICTS[number] = (title, "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_VERDICTS):
        title, verdict, detail = _VERDICTS[n]
        terminalreporter.write_line(f"[{verdict}] criterion {n:2d}: {title}" + (f" | {detail}" if detail else ""))
