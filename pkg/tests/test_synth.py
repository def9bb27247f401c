import numpy as np
import pytest

from mcrf.errors import ValidationError
from mcrf.evaluation import patch_count
from mcrf.grid import save_grid
from mcrf.synth import synth_reference


def test_deterministic(tmp_path):
    a, b = tmp_path / "a.grid", tmp_path / "b.grid"
    save_grid(synth_reference(48, 40, 5, 10, seed=3), a)
    save_grid(synth_reference(48, 40, 5, 10, seed=3), b)
    assert a.read_bytes() == b.read_bytes()
    assert synth_reference(48, 40, 5, 10, seed=4) != synth_reference(48, 40, 5, 10, seed=3)


@pytest.mark.parametrize("n", [2, 3, 5, 7, 12])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_all_classes_present_with_minor(n, seed):
    g = synth_reference(64, 64, n, 12, seed)
    counts = g.class_counts()
    assert counts[0] == 0
    assert np.all(counts[1:] > 0)
    assert g.proportions().min() < 0.05


def test_major_classes_unequal():
    p = synth_reference(64, 64, 5, 12, seed=7).proportions()
    assert p[:4].max() > 1.5 * p[:4].min()


@pytest.mark.parametrize("n", [2, 4, 6])
def test_huge_blobs_give_few_patches(n):
    g = synth_reference(24, 24, n, 1000, seed=1)
    assert np.all(g.class_counts()[1:] > 0)
    assert patch_count(g) <= 4 * n


def test_patchiness_grows_with_smaller_scale():
    coarse = patch_count(synth_reference(64, 64, 5, 20, seed=0))
    fine = patch_count(synth_reference(64, 64, 5, 6, seed=0))
    assert fine > coarse


@pytest.mark.parametrize("args", [(1, 5, 3, 4), (5, 5, 1, 4), (5, 5, 3, 0)])
def test_rejects_degenerate(args):
    with pytest.raises(ValidationError):
        synth_reference(*args, seed=0)
