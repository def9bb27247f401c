"""Deterministic synthetic categorical maps for desk-scale experiments."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import ValidationError
from .grid import CategoricalGrid

MINOR_SHARE = 0.03


def _majority_filter(cells: np.ndarray, n_classes: int, passes: int = 2) -> np.ndarray:
    """3x3 majority vote; a cell keeps its class unless another class strictly wins."""
    for _ in range(passes):
        votes = np.stack([
            ndimage.uniform_filter((cells == c).astype(float), size=3, mode="nearest")
            for c in range(1, n_classes + 1)
        ])
        winner = np.argmax(votes, axis=0) + 1
        own = np.take_along_axis(votes, (cells - 1)[None], axis=0)[0]
        cells = np.where(votes.max(axis=0) > own + 1e-12, winner, cells)
    return cells


def synth_reference(width: int, height: int, n_classes: int, blob_scale: float,
                    seed: int) -> CategoricalGrid:
    """Patchy map with unequal class shares and one minor class.

    Classes ``1..n-1`` tile the map as a noisy Voronoi partition of nuclei
    spaced roughly ``blob_scale`` cells apart, with class weights falling
    off so that the classes are of unequal size. Boundaries are smoothed by
    a 3x3 majority filter. Class ``n`` is the minor class: a few small
    discs covering about 3% of the map, painted last.
    """
    if width < 2 or height < 2:
        raise ValidationError("synthetic map needs at least 2x2 cells")
    if n_classes < 2:
        raise ValidationError("n_classes must be >= 2")
    if not blob_scale > 0:
        raise ValidationError("blob_scale must be > 0")
    rng = np.random.default_rng(np.random.SeedSequence(seed % 2**64))
    area = width * height
    n_major = n_classes - 1

    n_nuclei = max(n_major, int(round(area / blob_scale**2)))
    weights = 1.0 / np.arange(1, n_major + 1) ** 0.7
    weights /= weights.sum()
    nucleus_class = np.concatenate([
        np.arange(1, n_major + 1),
        rng.choice(np.arange(1, n_major + 1), size=n_nuclei - n_major, p=weights),
    ])
    nx = rng.uniform(0, width, n_nuclei)
    ny = rng.uniform(0, height, n_nuclei)

    # smooth noise perturbs distances so boundaries are irregular
    noise = ndimage.gaussian_filter(rng.standard_normal((height, width)), sigma=blob_scale / 4,
                                    mode="wrap")
    noise *= blob_scale * 0.35 / (noise.std() + 1e-12)
    yy, xx = np.mgrid[0:height, 0:width]
    dist = np.hypot(xx[None] - nx[:, None, None], yy[None] - ny[:, None, None])
    dist += noise[None]
    cells = nucleus_class[np.argmin(dist, axis=0)]
    cells = _majority_filter(cells, n_classes)

    # minor class: small discs, total area around MINOR_SHARE of the map
    radius = max(1.5, blob_scale / 6)
    disc_area = np.pi * radius**2
    n_discs = max(1, int(round(MINOR_SHARE * area / disc_area)))
    for _ in range(n_discs):
        cx, cy = rng.uniform(0, width), rng.uniform(0, height)
        disc = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius**2
        if (cells == n_classes).sum() + disc.sum() > 0.049 * area:
            break
        cells[disc] = n_classes

    # every class must survive smoothing
    for c in range(1, n_classes + 1):
        if not (cells == c).any():
            if c == n_classes:
                cy, cx = height // 2, width // 2
            else:
                k = np.flatnonzero(nucleus_class == c)[0]
                cx, cy = int(min(nx[k], width - 1)), int(min(ny[k], height - 1))
            cells[cy, cx] = c
    return CategoricalGrid.from_array(cells, n_classes)
