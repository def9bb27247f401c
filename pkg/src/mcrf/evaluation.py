"""Ensemble summaries, accuracy statistics and the neighborhood sweep."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy import ndimage

from .engine import (
    TRANSITION,
    CPD_FORMS,
    SimulationConfig,
    simulate_ensemble,
)
from .errors import FormatError, ValidationError
from .grid import CategoricalGrid, GridSpec, SampleSet, load_grid, random_sample
from .neighborhood import NeighborhoodConfig
from .transiogram import (
    LagBinning,
    TransiogramModel,
    estimate_experimental,
    estimate_from_grid,
    fit_linear,
    load_model,
)

log = logging.getLogger(__name__)

PathType = Union[str, PathLike]

# RGB for classes 1..16; no-data (0) is black.
PALETTE = (
    (31, 119, 180),
    (255, 127, 14),
    (44, 160, 44),
    (214, 39, 40),
    (148, 103, 189),
    (140, 86, 75),
    (227, 119, 194),
    (127, 127, 127),
    (188, 189, 34),
    (23, 190, 207),
    (174, 199, 232),
    (255, 187, 120),
    (152, 223, 138),
    (255, 152, 150),
    (197, 176, 213),
    (255, 255, 255),
)

DEFAULT_BINNING = LagBinning(max_lag=20.0, bin_width=1.0, tolerance=0.5)


@dataclass(frozen=True, eq=False)
class OccurrenceProbabilityMap:
    spec: GridSpec
    counts: np.ndarray  # (height, width, n_classes) number of realizations per class
    n_realizations: int

    @property
    def probs(self) -> np.ndarray:
        return self.counts / self.n_realizations


@dataclass(frozen=True)
class AccuracyReport:
    per_realization: tuple
    mean_realization: float
    optimal: float
    confusion: np.ndarray = field(compare=False)  # optimal map: rows reference class, cols predicted


def occurrence_probabilities(ensemble) -> OccurrenceProbabilityMap:
    """Fraction of realizations assigning each class to each cell."""
    grids = list(ensemble)
    if not grids:
        raise ValidationError("empty ensemble")
    first = grids[0]
    for g in grids[1:]:
        if (g.width, g.height, g.n_classes) != (first.width, first.height, first.n_classes):
            raise ValidationError("realizations have inconsistent dimensions")
    n = first.n_classes
    counts = np.zeros((first.height, first.width, n), dtype=np.int64)
    classes = np.arange(1, n + 1)
    for g in grids:
        counts += g.cells[..., None] == classes
    return OccurrenceProbabilityMap(first.spec, counts, len(grids))


def optimal_map(occ: OccurrenceProbabilityMap) -> CategoricalGrid:
    """Per-cell most probable class; ties go to the smallest class index."""
    best = np.argmax(occ.counts, axis=2) + 1
    best[occ.counts.sum(axis=2) == 0] = 0
    return CategoricalGrid(occ.spec.width, occ.spec.height, occ.spec.n_classes, best)


def _evaluation_mask(reference: CategoricalGrid, samples: SampleSet, include_samples: bool):
    mask = reference.cells != 0
    if not include_samples and len(samples):
        mask = mask.copy()
        mask[samples.y, samples.x] = False
    if not mask.any():
        raise ValidationError("no cells left to evaluate")
    return mask


def _check_same_shape(a: CategoricalGrid, b: CategoricalGrid):
    if (a.width, a.height) != (b.width, b.height):
        raise ValidationError(
            f"dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def accuracy(predicted: CategoricalGrid, reference: CategoricalGrid, samples: SampleSet,
             include_samples: bool = False) -> float:
    """Percentage of simulated (unsampled) cells whose class matches the reference.

    Reference no-data cells are not scored.
    """
    _check_same_shape(predicted, reference)
    mask = _evaluation_mask(reference, samples, include_samples)
    hits = np.count_nonzero(predicted.cells[mask] == reference.cells[mask])
    return 100.0 * hits / np.count_nonzero(mask)


def confusion_counts(predicted: CategoricalGrid, reference: CategoricalGrid, samples: SampleSet,
                     include_samples: bool = False) -> np.ndarray:
    _check_same_shape(predicted, reference)
    mask = _evaluation_mask(reference, samples, include_samples)
    n = reference.n_classes
    ref = reference.cells[mask]
    pred = predicted.cells[mask]
    out = np.zeros((n + 1, n + 1), dtype=np.int64)
    np.add.at(out, (ref, pred), 1)
    return out[1:, 1:]


def ensemble_accuracy(ensemble, reference: CategoricalGrid, samples: SampleSet,
                      include_samples: bool = False) -> AccuracyReport:
    per = tuple(accuracy(g, reference, samples, include_samples) for g in ensemble)
    best = optimal_map(occurrence_probabilities(ensemble))
    return AccuracyReport(
        per_realization=per,
        mean_realization=float(np.mean(per)),
        optimal=accuracy(best, reference, samples, include_samples),
        confusion=confusion_counts(best, reference, samples, include_samples),
    )


def patch_count(grid: CategoricalGrid, connectivity: int = 4) -> int:
    """Number of connected single-class patches (no-data excluded)."""
    if connectivity == 4:
        structure = ndimage.generate_binary_structure(2, 1)
    elif connectivity == 8:
        structure = ndimage.generate_binary_structure(2, 2)
    else:
        raise ValidationError("connectivity must be 4 or 8")
    total = 0
    for c in range(1, grid.n_classes + 1):
        _, k = ndimage.label(grid.cells == c, structure=structure)
        total += k
    return total


def reproduction_deviation(model: TransiogramModel, realizations: Sequence[CategoricalGrid],
                           binning: LagBinning):
    """Compare transiograms re-estimated from realizations against ``model``.

    Transition counts are pooled over all realizations and evaluated at the
    model's knots (lag 0 excluded). Returns ``(mean_abs_dev, per_entry)``
    where ``per_entry[i, j]`` is the mean absolute deviation of ``p_ij``
    across knots.
    """
    counts = None
    centers = None
    for g in realizations:
        exp = estimate_from_grid(g, binning)
        counts = exp.counts if counts is None else counts + exp.counts
        centers = exp.lag_centers
    if counts is None:
        raise ValidationError("no realizations to compare")
    totals = counts.sum(axis=2, keepdims=True)
    diffs = []
    for k, lag in enumerate(model.knots[1:], start=1):
        hit = np.flatnonzero(np.isclose(centers, lag, rtol=0, atol=1e-9))
        if not len(hit) or np.any(totals[hit[0]] == 0):
            continue
        est = counts[hit[0]] / totals[hit[0]]
        diffs.append(np.abs(est - model.values[k]))
    if not diffs:
        raise ValidationError("model knots do not coincide with any populated lag class")
    diffs = np.array(diffs)
    return float(diffs.mean()), diffs.mean(axis=0)


def render_map(grid: CategoricalGrid, path: PathType) -> None:
    """Write a binary PPM (P6), one pixel per cell, colours from ``PALETTE``."""
    if grid.n_classes > len(PALETTE):
        raise ValidationError(f"at most {len(PALETTE)} classes can be rendered")
    lut = np.zeros((len(PALETTE) + 1, 3), dtype=np.uint8)
    lut[1:] = PALETTE
    pixels = lut[grid.cells]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{grid.width} {grid.height}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


# ---------------------------------------------------------------------------
# neighborhood sweep


def derive_seed(seed: int, *keys: int) -> int:
    state = np.random.SeedSequence([seed % 2**64, *keys]).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


_SAMPLES_KEY = 1
_SIMULATE_KEY = 2


@dataclass(frozen=True)
class SweepRow:
    neighborhood: str
    samples: int
    mean_realization_acc: float
    optimal_acc: float


@dataclass
class SweepResult:
    rows: list
    model: TransiogramModel
    sample_sets: dict  # count -> SampleSet
    ensembles: dict = field(default_factory=dict)  # (descriptor, count) -> RealizationEnsemble

    def row(self, neighborhood: str, samples: int) -> SweepRow:
        for r in self.rows:
            if r.neighborhood == neighborhood and r.samples == samples:
                return r
        raise KeyError((neighborhood, samples))

    def to_csv(self) -> str:
        lines = ["neighborhood,samples,mean_realization_acc,optimal_acc"]
        for r in self.rows:
            lines.append(
                f"{r.neighborhood},{r.samples},{r.mean_realization_acc:.2f},{r.optimal_acc:.2f}"
            )
        return "\n".join(lines) + "\n"


def run_sweep(reference: CategoricalGrid, sample_counts: Sequence[int],
              configs: Sequence[NeighborhoodConfig], model: Optional[TransiogramModel] = None,
              realizations: int = 20, seed: int = 0, cpd_form: str = TRANSITION,
              binning: LagBinning = DEFAULT_BINNING, jobs: int = 1,
              keep_ensembles: bool = False) -> SweepResult:
    """Simulate and score every (neighborhood, sample count) combination.

    Sample sets are drawn once per count. Without an explicit ``model`` a
    single transiogram model is fitted from the densest sample set and used
    for every run. All configurations at one sample count share the same
    simulation seed, so they are compared on common random numbers.
    """
    counts = [int(c) for c in sample_counts]
    if not counts:
        raise ValidationError("no sample counts given")
    if any(a < b for a, b in zip(counts, counts[1:])):
        raise ValidationError("sample counts must be in descending order")
    if not configs:
        raise ValidationError("no neighborhood configurations given")

    sample_sets = {
        c: random_sample(reference, c, derive_seed(seed, _SAMPLES_KEY, k))
        for k, c in enumerate(counts)
    }
    if model is None:
        densest = sample_sets[counts[0]]
        model = fit_linear(estimate_experimental(densest, binning), densest.proportions())
    spec = reference.spec

    jobs_list = [
        (cfg, k, c) for cfg in configs for k, c in enumerate(counts)
    ]

    def run_one(job):
        cfg, k, c = job
        sim = SimulationConfig(cfg, cpd_form, realizations, derive_seed(seed, _SIMULATE_KEY, k))
        ens = simulate_ensemble(spec, sample_sets[c], model, sim)
        report = ensemble_accuracy(ens, reference, sample_sets[c])
        log.info("%s samples=%d realizations=%.2f%% optimal=%.2f%%",
                 cfg.descriptor, c, report.mean_realization, report.optimal)
        return ens, report

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, jobs_list))
    else:
        results = [run_one(j) for j in jobs_list]

    rows, ensembles = [], {}
    for (cfg, _, c), (ens, report) in zip(jobs_list, results):
        rows.append(SweepRow(cfg.descriptor, c, report.mean_realization, report.optimal))
        if keep_ensembles:
            ensembles[(cfg.descriptor, c)] = ens
    return SweepResult(rows, model, sample_sets, ensembles)


@dataclass
class SweepConfig:
    reference: str
    counts: list
    configs: list
    radius: float = 20.0
    realizations: int = 20
    seed: int = 0
    cpd_form: str = TRANSITION
    model: Optional[str] = None
    max_lag: float = DEFAULT_BINNING.max_lag
    bin_width: float = DEFAULT_BINNING.bin_width
    tolerance: float = DEFAULT_BINNING.tolerance

    @property
    def neighborhoods(self) -> list:
        return [NeighborhoodConfig.parse(c, self.radius) for c in self.configs]

    @property
    def binning(self) -> LagBinning:
        return LagBinning(self.max_lag, self.bin_width, self.tolerance)


_SWEEP_KEYS = {
    "reference": str,
    "counts": lambda v: [int(t) for t in v.split(",") if t.strip()],
    "configs": lambda v: [t.strip() for t in v.split(",") if t.strip()],
    "radius": float,
    "realizations": int,
    "seed": int,
    "cpd_form": str,
    "model": str,
    "max_lag": float,
    "bin_width": float,
    "tolerance": float,
}


def parse_sweep_config(text: str) -> SweepConfig:
    """``key=value`` lines; blank lines and ``#`` comments are ignored."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or key not in _SWEEP_KEYS:
            raise FormatError(f"line {lineno}: unknown or malformed entry {raw.strip()!r}")
        try:
            values[key] = _SWEEP_KEYS[key](val)
        except ValueError:
            raise FormatError(f"line {lineno}: bad value for {key}") from None
    for required in ("reference", "counts", "configs"):
        if required not in values:
            raise FormatError(f"sweep config is missing '{required}'")
    cfg = SweepConfig(**values)
    if cfg.cpd_form not in CPD_FORMS:
        raise ValidationError(f"cpd_form must be one of {CPD_FORMS}")
    return cfg


def load_sweep_config(path: PathType) -> SweepConfig:
    with open(path, "r", encoding="ascii") as fh:
        return parse_sweep_config(fh.read())


def run_sweep_config(cfg: SweepConfig, jobs: int = 1, base_dir=None) -> SweepResult:
    """Run a parsed sweep config; relative paths resolve against ``base_dir``."""
    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() or base_dir is None else Path(base_dir) / p

    reference = load_grid(resolve(cfg.reference))
    model = load_model(resolve(cfg.model)) if cfg.model else None
    return run_sweep(reference, cfg.counts, cfg.neighborhoods, model=model,
                     realizations=cfg.realizations, seed=cfg.seed, cpd_form=cfg.cpd_form,
                     binning=cfg.binning, jobs=jobs)
