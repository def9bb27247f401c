import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import naive_neighborhood, naive_sector, random_scene
from mcrf.errors import ValidationError
from mcrf.grid import GridSpec, SampleSet
from mcrf.neighborhood import (
    ConditioningIndex,
    NeighborhoodConfig,
    build_index,
    find_neighborhood,
    find_non_sectored,
    find_sectored,
    sector_of,
)


def as_tuples(nbhd):
    return [(d.x, d.y, d.cls, d.lag, d.sector) for d in nbhd.data]


def test_config_parse():
    c = NeighborhoodConfig.parse("sectored:4", 30)
    assert (c.kind, c.size, c.radius) == ("sectored", 4, 30.0)
    assert c.descriptor == "sectored:4"
    assert NeighborhoodConfig.parse("nonsectored:9", 5).size == 9


@pytest.mark.parametrize("text", ["sectored:3", "nonsectored:0", "ring:4", "sectored", "sectored:x"])
def test_config_parse_rejects(text):
    with pytest.raises(ValidationError):
        NeighborhoodConfig.parse(text, 10)


def test_config_rejects_radius():
    with pytest.raises(ValidationError):
        NeighborhoodConfig("sectored", 4, 0)


def test_empty_index():
    spec = GridSpec(10, 10, 2)
    idx = build_index(SampleSet.from_points([], 2), spec)
    assert len(idx) == 0
    nb = find_non_sectored(idx, (5, 5), NeighborhoodConfig("nonsectored", 4, 30))
    assert len(nb) == 0


def test_insert_then_query():
    idx = ConditioningIndex(GridSpec(20, 20, 3), bucket_size=3)
    idx.insert(7, 9, 2)
    assert (7, 9) in idx and (9, 7) not in idx
    assert idx.query_radius((5, 5), 5) == [(7, 9, 2)]
    assert idx.query_radius((0, 0), 5) == []
    with pytest.raises(ValidationError):
        idx.insert(7, 9, 1)
    with pytest.raises(ValidationError):
        idx.insert(20, 0, 1)


def test_build_index_out_of_bounds():
    with pytest.raises(ValidationError):
        build_index(SampleSet.from_points([(10, 0, 1)], 2), GridSpec(10, 10, 2))


@pytest.mark.parametrize("bucket", [1, 3, 8, 50])
def test_query_radius_matches_scan(bucket):
    rng = np.random.default_rng(bucket)
    s, spec = random_scene(rng, 40, 30, 150)
    idx = build_index(s, spec, bucket_size=bucket)
    for _ in range(50):
        c = (int(rng.integers(0, 40)), int(rng.integers(0, 30)))
        r = float(rng.uniform(0.5, 25))
        expected = sorted(
            ((x, y, k) for x, y, k in s.points if math.sqrt((x - c[0]) ** 2 + (y - c[1]) ** 2) <= r),
            key=lambda t: (t[1], t[0]),
        )
        assert idx.query_radius(c, r) == expected


def test_single_nearest():
    spec = GridSpec(50, 50, 2)
    idx = build_index(SampleSet.from_points([(13, 10, 2)], 2), spec)
    nb = find_non_sectored(idx, (10, 10), NeighborhoodConfig("nonsectored", 1, 30))
    assert as_tuples(nb) == [(13, 10, 2, 3.0, None)]


def test_k4_among_ten_matches_sort():
    rng = np.random.default_rng(10)
    for _ in range(20):
        s, spec = random_scene(rng, 30, 30, 11)
        center = s.points[-1][:2]
        s = SampleSet.from_points(s.points[:-1], 3)
        idx = build_index(s, spec)
        nb = find_non_sectored(idx, center, NeighborhoodConfig("nonsectored", 4, 100))
        assert as_tuples(nb) == naive_neighborhood(s.points, center, "nonsectored", 4, 100)


def test_one_per_quadrant():
    # y grows downward; quadrant 0 is +x/+y (screen lower right)
    pts = [(12, 12, 1), (8, 12, 2), (7, 7, 1), (13, 6, 2), (15, 15, 1), (4, 14, 1)]
    idx = build_index(SampleSet.from_points(pts, 2), GridSpec(30, 30, 2))
    nb = find_sectored(idx, (10, 10), NeighborhoodConfig("sectored", 4, 30))
    got = {d.sector: (d.x, d.y) for d in nb.data}
    assert got == {0: (12, 12), 1: (8, 12), 2: (7, 7), 3: (13, 6)}
    assert [d.lag for d in nb.data] == sorted(d.lag for d in nb.data)


def test_clustered_quadrant_gives_one():
    pts = [(12, 12, 1), (13, 11, 1), (14, 15, 2), (11, 13, 2)]
    idx = build_index(SampleSet.from_points(pts, 2), GridSpec(30, 30, 2))
    nb = find_sectored(idx, (10, 10), NeighborhoodConfig("sectored", 4, 30))
    assert [(d.x, d.y) for d in nb.data] == [(12, 12)]
    assert nb.data[0].lag == min(math.hypot(x - 10, y - 10) for x, y, _ in pts)


def test_bisected_empty_upper_half():
    # upper half-plane on screen is y < center y: sector 1 for s=2
    pts = [(10, 14, 1), (5, 12, 2), (16, 10, 1)]
    idx = build_index(SampleSet.from_points(pts, 2), GridSpec(30, 30, 2))
    nb = find_sectored(idx, (10, 10), NeighborhoodConfig("sectored", 2, 30))
    assert len(nb) == 1
    assert (nb.data[0].x, nb.data[0].y, nb.data[0].sector) == (10, 14, 0)


@pytest.mark.parametrize("dx, dy, s, expected", [
    (1, 0, 4, 0), (0, 1, 4, 1), (-1, 0, 4, 2), (0, -1, 4, 3),
    (1, 0, 2, 0), (-1, 0, 2, 1), (0, 1, 2, 0), (0, -1, 2, 1),
    (3, 3, 8, 1), (2, 1, 8, 0), (-3, 3, 8, 3), (-3, -3, 8, 5), (3, -3, 8, 7), (5, -1, 8, 7),
])
def test_sector_boundaries(dx, dy, s, expected):
    assert sector_of(dx, dy, s) == expected


def test_sector_matches_atan2_everywhere():
    for dx in range(-25, 26):
        for dy in range(-25, 26):
            if dx == dy == 0:
                continue
            for s in (2, 4, 8):
                assert sector_of(dx, dy, s) == naive_sector(dx, dy, s), (dx, dy, s)


def test_ties_break_by_y_then_x():
    pts = [(13, 10, 1), (10, 13, 2), (7, 10, 1), (10, 7, 2)]
    idx = build_index(SampleSet.from_points(pts, 2), GridSpec(30, 30, 2))
    nb = find_non_sectored(idx, (10, 10), NeighborhoodConfig("nonsectored", 3, 30))
    assert [(d.x, d.y) for d in nb.data] == [(10, 7), (7, 10), (13, 10)]


def test_radius_is_inclusive():
    idx = build_index(SampleSet.from_points([(13, 14, 1)], 2), GridSpec(30, 30, 2))
    assert len(find_non_sectored(idx, (10, 10), NeighborhoodConfig("nonsectored", 1, 5.0))) == 1
    assert len(find_non_sectored(idx, (10, 10), NeighborhoodConfig("nonsectored", 1, 4.999))) == 0


def test_wrong_kind_rejected():
    idx = ConditioningIndex(GridSpec(5, 5, 2))
    with pytest.raises(ValidationError):
        find_sectored(idx, (0, 0), NeighborhoodConfig("nonsectored", 2, 3))
    with pytest.raises(ValidationError):
        find_non_sectored(idx, (0, 0), NeighborhoodConfig("sectored", 2, 3))


configs = st.one_of(
    st.builds(lambda k, r: NeighborhoodConfig("nonsectored", k, r),
              st.integers(1, 12), st.floats(0.5, 40)),
    st.builds(lambda s, r: NeighborhoodConfig("sectored", s, r),
              st.sampled_from([2, 4, 8]), st.floats(0.5, 40)),
)


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(0, 200), cfg=configs,
       bucket=st.integers(1, 20))
def test_search_matches_full_scan(seed, n, cfg, bucket):
    rng = np.random.default_rng(seed)
    w, h = int(rng.integers(2, 40)), int(rng.integers(2, 40))
    n = min(n, w * h - 1)
    s, spec = random_scene(rng, w, h, n + 1)
    center = s.points[-1][:2]
    occupied = s.points[:-1]
    idx = build_index(SampleSet.from_points(occupied, 3), spec, bucket_size=bucket)
    nb = find_neighborhood(idx, center, cfg)
    got = as_tuples(nb)
    assert got == naive_neighborhood(occupied, center, cfg.kind, cfg.size, cfg.radius)
    assert all(0 < t[3] <= cfg.radius for t in got)
    assert all((t[0], t[1]) != center for t in got)
    if cfg.kind == "sectored":
        sectors = [t[4] for t in got]
        assert len(sectors) == len(set(sectors))
    assert as_tuples(find_neighborhood(idx, center, cfg)) == got
