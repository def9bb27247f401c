"""Simplified MCRF local conditional distributions and random-path simulation.

Under conditional independence of the nearest data given the centre class,
the local conditional probability of class ``i0`` is one of

* transition prior:  ``p_{i1 i0}(h10) * prod_{g>=2} p_{i0 ig}(h0g)``
* marginal prior:    ``p_{i0} * prod_{g>=1} p_{i0 ig}(h0g)``

normalised over ``i0``. ``u1`` in the transition form is the datum the
chain is taken to arrive from; the simulation uses the nearest datum.

Random numbers: every realization draws from its own PCG64 stream seeded
by ``numpy.random.SeedSequence([seed mod 2**64, realization_index])``. The
stream first yields the random path (a Fisher-Yates shuffle of the
unsampled cells, row-major order before shuffling) and then one uniform
variate per visited cell for inverse-CDF class selection.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ValidationError
from .grid import CategoricalGrid, GridSpec, SampleSet
from .neighborhood import (
    _MODE_NEAREST,
    _MODE_SECTORED,
    SECTORED,
    Neighborhood,
    NeighborhoodConfig,
    _insert,
    _search,
    build_index,
)
from .transiogram import TransiogramModel

log = logging.getLogger(__name__)

TRANSITION = "transition"
MARGINAL = "marginal"
CPD_FORMS = (TRANSITION, MARGINAL)
_FORM_CODE = {TRANSITION: 0, MARGINAL: 1}


@dataclass(frozen=True)
class SimulationConfig:
    neighborhood: NeighborhoodConfig
    cpd_form: str = MARGINAL
    realizations: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.cpd_form not in CPD_FORMS:
            raise ValidationError(f"cpd_form must be one of {CPD_FORMS}")
        if self.realizations < 1:
            raise ValidationError("need at least one realization")


@dataclass(frozen=True)
class RealizationEnsemble:
    spec: GridSpec
    realizations: tuple
    config: SimulationConfig
    seed: int
    fallback_counts: tuple = field(default=())

    def __len__(self):
        return len(self.realizations)

    def __iter__(self):
        return iter(self.realizations)


def realization_rng(seed: int, realization_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence([seed % 2**64, int(realization_index)])
    return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------------------
# compiled kernels


@numba.njit(cache=True, nogil=True)
def _locate(knots, h):
    """Segment index and weight for linear interpolation at lag ``h``."""
    last = knots.shape[0] - 1
    if h >= knots[last]:
        return last, 0.0
    k = np.searchsorted(knots, h, side="right") - 1
    return k, (h - knots[k]) / (knots[k + 1] - knots[k])


@numba.njit(cache=True, nogil=True)
def _cpd(knots, values, props, cls, lags, m, form, out):
    """Write the local CPD into ``out``; return 1 if it fell back to proportions."""
    n = props.shape[0]
    if m == 0:
        for c in range(n):
            out[c] = props[c]
        return 0
    for c in range(n):
        out[c] = 1.0 if form == 0 else props[c]
    last = knots.shape[0] - 1
    for g in range(m):
        k, t = _locate(knots, lags[g])
        cg = cls[g] - 1
        for c in range(n):
            if form == 0 and g == 0:
                a, b = cg, c
            else:
                a, b = c, cg
            v = values[k, a, b]
            if k < last and t != 0.0:
                v = v + t * (values[k + 1, a, b] - v)
            out[c] *= v
    s = 0.0
    for c in range(n):
        s += out[c]
    if not s > 0.0:
        for c in range(n):
            out[c] = props[c]
        return 1
    for c in range(n):
        out[c] /= s
    return 0


@numba.njit(cache=True, nogil=True)
def _draw(probs, u):
    cum = 0.0
    n = probs.shape[0]
    for c in range(n):
        cum += probs[c]
        if u < cum:
            return c + 1
    for c in range(n - 1, -1, -1):
        if probs[c] > 0.0:
            return c + 1
    return n


@numba.njit(cache=True, nogil=True)
def _simulate_path(labels, bucket_n, bucket_items, width, height, bsize, nbx, nby,
                   path, uniforms, mode, size, radius, knots, values, props, form):
    n = props.shape[0]
    out_idx = np.zeros(size, dtype=np.int64)
    out_d2 = np.zeros(size, dtype=np.int64)
    out_sec = np.zeros(size, dtype=np.int64)
    cls = np.zeros(size, dtype=np.int64)
    lags = np.zeros(size, dtype=np.float64)
    probs = np.zeros(n, dtype=np.float64)
    fallbacks = 0
    for t in range(path.shape[0]):
        idx = path[t]
        cy = idx // width
        cx = idx - cy * width
        m = _search(labels, bucket_n, bucket_items, width, height, bsize, nbx, nby,
                    cx, cy, radius, mode, size, out_idx, out_d2, out_sec)
        for g in range(m):
            cls[g] = labels[out_idx[g]]
            lags[g] = math.sqrt(float(out_d2[g]))
        fallbacks += _cpd(knots, values, props, cls, lags, m, form, probs)
        _insert(labels, bucket_n, bucket_items, width, bsize, nbx, idx, _draw(probs, uniforms[t]))
    return fallbacks


# ---------------------------------------------------------------------------
# local conditional distributions


def _nbhd_arrays(nbhd: Neighborhood, last_visited: int):
    cls = nbhd.classes
    lags = nbhd.lags
    if len(cls) and last_visited:
        order = [last_visited] + [g for g in range(len(cls)) if g != last_visited]
        cls, lags = cls[order], lags[order]
    return np.ascontiguousarray(cls), np.ascontiguousarray(lags)


def _run_cpd(model, nbhd, form, last_visited=0):
    if len(nbhd) and np.any(nbhd.lags < 0):
        raise ValidationError("negative lag in neighborhood")
    if not 0 <= last_visited < max(1, len(nbhd)):
        raise ValidationError("last_visited must index a datum of the neighborhood")
    cls, lags = _nbhd_arrays(nbhd, last_visited)
    if len(cls) and (cls.min() < 1 or cls.max() > model.n_classes):
        raise ValidationError("neighborhood class outside the model's classes")
    out = np.empty(model.n_classes)
    _cpd(model.knots, model.values, model.proportions, cls, lags, len(cls), _FORM_CODE[form], out)
    return out


def local_cpd_transition_prior(model: TransiogramModel, nbhd: Neighborhood,
                               last_visited: int = 0) -> np.ndarray:
    """Local CPD with a transition-probability prior from ``nbhd.data[last_visited]``.

    Returns probabilities for classes ``1..n`` (index 0 is class 1).
    """
    if len(nbhd) == 0:
        raise ValidationError("transition-prior CPD needs at least one datum; use the marginal form")
    return _run_cpd(model, nbhd, TRANSITION, last_visited)


def local_cpd_marginal_prior(model: TransiogramModel, nbhd: Neighborhood) -> np.ndarray:
    """Local CPD with the class proportions as prior; empty neighborhoods give the proportions."""
    return _run_cpd(model, nbhd, MARGINAL)


def local_cpd(model: TransiogramModel, nbhd: Neighborhood, form: str = MARGINAL) -> np.ndarray:
    if len(nbhd) == 0:
        return model.proportions.copy()
    if form == TRANSITION:
        return local_cpd_transition_prior(model, nbhd)
    return local_cpd_marginal_prior(model, nbhd)


def factorization_oracle_cpd(model: TransiogramModel, nbhd: Neighborhood,
                             last_visited: int = 0) -> np.ndarray:
    """Reference CPD built from the joint distribution of the neighborhood nodes.

    For each candidate centre class the joint probability is
    ``p(i1) p(i0 | i1) prod_{g>=2} p(ig | i0)``; dividing by its sum over the
    candidates conditions on the data. Plain Python, for testing.
    """
    data = list(nbhd.data)
    if not data:
        raise ValidationError("oracle needs at least one datum")
    first = data.pop(last_visited)
    n = model.n_classes
    joint = []
    for i0 in range(1, n + 1):
        p = model.proportions[first.cls - 1] * model.query(first.cls, i0, first.lag)
        for d in data:
            p *= model.query(i0, d.cls, d.lag)
        joint.append(p)
    total = math.fsum(joint)
    return np.array([j / total for j in joint])


# ---------------------------------------------------------------------------
# simulation


def _simulate(spec, samples, model, config, realization_index):
    samples.check_bounds(spec)
    if model.n_classes != spec.n_classes:
        raise ValidationError(
            f"model has {model.n_classes} classes but the grid has {spec.n_classes}"
        )
    nb = config.neighborhood
    index = build_index(samples, spec, bucket_size=max(1, int(nb.radius / 2)))
    unsampled = np.flatnonzero(index.labels == 0)
    fallbacks = 0
    if len(unsampled):
        rng = realization_rng(config.seed, realization_index)
        path = rng.permutation(unsampled)
        uniforms = rng.random(len(path))
        mode = _MODE_SECTORED if nb.kind == SECTORED else _MODE_NEAREST
        fallbacks = _simulate_path(
            index.labels, index.bucket_n, index.bucket_items,
            spec.width, spec.height, index.bucket_size, index.nbx, index.nby,
            path, uniforms, mode, nb.size, float(nb.radius),
            model.knots, model.values, model.proportions, _FORM_CODE[config.cpd_form],
        )
        if fallbacks:
            log.info("realization %d: %d degenerate CPDs fell back to proportions",
                     realization_index, fallbacks)
    grid = CategoricalGrid(spec.width, spec.height, spec.n_classes, index.labels)
    return grid, int(fallbacks)


def simulate_realization(spec: GridSpec, samples: SampleSet, model: TransiogramModel,
                         config: SimulationConfig, realization_index: int = 0) -> CategoricalGrid:
    """One conditional realization along a fresh random path."""
    return _simulate(spec, samples, model, config, realization_index)[0]


def simulate_ensemble(spec: GridSpec, samples: SampleSet, model: TransiogramModel,
                      config: SimulationConfig, jobs: int = 1) -> RealizationEnsemble:
    """Realizations ``0..config.realizations-1``; identical for any ``jobs``."""
    indices = range(config.realizations)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda r: _simulate(spec, samples, model, config, r), indices))
    else:
        results = [_simulate(spec, samples, model, config, r) for r in indices]
    return RealizationEnsemble(
        spec=spec,
        realizations=tuple(g for g, _ in results),
        config=config,
        seed=config.seed,
        fallback_counts=tuple(f for _, f in results),
    )
