import math

import numpy as np
import pytest

from graphloc import (DataError, PanoObservation, RegionBox, RegionFeature,
                      SPATIAL_DIM, ValidationError, encode_region_spatial,
                      grid_boxes, load_features, save_features)


def random_box(rng):
    return RegionBox(
        tl_heading=float(rng.uniform(0, 2 * math.pi)),
        tl_elevation=float(rng.uniform(-math.pi / 2, math.pi / 2)),
        br_heading=float(rng.uniform(0, 2 * math.pi)),
        br_elevation=float(rng.uniform(-math.pi / 2, math.pi / 2)),
        area=float(rng.uniform(0, 1)),
        center_elevation=float(rng.uniform(-math.pi / 2, math.pi / 2)),
    )


def random_panos(rng, n_nodes=5, k=4, d_v=8):
    boxes = grid_boxes(k)
    panos = {}
    for i in range(n_nodes):
        nid = f"n{i:03d}"
        regions = tuple(
            RegionFeature(rng.normal(size=d_v).astype(np.float32), boxes[j])
            for j in range(k))
        panos[nid] = PanoObservation(nid, regions)
    return panos


# ---------------------------------------------------------------------------
# spatial encoding


def test_encoding_length_and_zero_angle_layout():
    box = RegionBox(0.0, 0.0, 0.0, 0.0, 0.25, 0.0)
    enc = encode_region_spatial(box)
    assert enc.shape == (SPATIAL_DIM,)
    assert enc == pytest.approx([1, 0, 1, 0, 1, 0, 1, 0, 0.25, 1, 0])


def test_encoding_known_angles():
    box = RegionBox(math.pi / 2, 0.3, math.pi, -0.3, 0.5, 0.1)
    enc = encode_region_spatial(box)
    assert enc[0] == pytest.approx(0.0, abs=1e-15)
    assert enc[1] == pytest.approx(1.0)
    assert enc[2] == pytest.approx(math.cos(0.3))
    assert enc[3] == pytest.approx(math.sin(0.3))
    assert enc[4] == pytest.approx(-1.0)
    assert enc[5] == pytest.approx(0.0, abs=1e-12)
    assert enc[8] == 0.5


def test_angle_pairs_on_unit_circle(rng):
    for _ in range(200):
        enc = encode_region_spatial(random_box(rng))
        for lo in (0, 2, 4, 6, 9):
            norm = enc[lo] ** 2 + enc[lo + 1] ** 2
            assert abs(norm - 1.0) < 1e-12


def test_heading_periodicity(rng):
    for _ in range(100):
        box = random_box(rng)
        shifted = RegionBox(box.tl_heading + 2 * math.pi, box.tl_elevation,
                            box.br_heading - 2 * math.pi, box.br_elevation,
                            box.area, box.center_elevation)
        assert encode_region_spatial(shifted) == pytest.approx(
            encode_region_spatial(box), abs=1e-9)


def test_box_validation():
    with pytest.raises(ValidationError):
        RegionBox(0, 2.0, 0, 0, 0.5, 0)  # elevation out of range
    with pytest.raises(ValidationError):
        RegionBox(0, 0, 0, 0, 1.5, 0)  # area > 1
    with pytest.raises(ValidationError):
        RegionBox(0, 0, 0, 0, -0.1, 0)


# ---------------------------------------------------------------------------
# grid tiling


@pytest.mark.parametrize("k", [1, 2, 4, 5])
def test_grid_boxes_single_band(k):
    boxes = grid_boxes(k)
    assert len(boxes) == k
    assert sum(b.area for b in boxes) == pytest.approx(1.0)
    assert len({b.center_elevation for b in boxes}) == 1


@pytest.mark.parametrize("k", [3, 6, 36])
def test_grid_boxes_three_bands(k):
    boxes = grid_boxes(k)
    assert len(boxes) == k
    assert sum(b.area for b in boxes) == pytest.approx(1.0)
    assert len({b.center_elevation for b in boxes}) == 3


def test_grid_boxes_rejects_nonpositive():
    with pytest.raises(ValidationError):
        grid_boxes(0)


# ---------------------------------------------------------------------------
# containers


def test_pano_observation_shape(rng):
    panos = random_panos(rng, n_nodes=1, k=3, d_v=5)
    pano = panos["n000"]
    assert pano.k == 3
    mat = pano.visual_matrix()
    assert mat.shape == (3, 5)
    assert mat.dtype == np.float64


def test_empty_pano_rejected():
    with pytest.raises(ValidationError):
        PanoObservation("n000", ())


def test_region_feature_validation(rng):
    box = grid_boxes(1)[0]
    with pytest.raises(ValidationError):
        RegionFeature(np.array([[1.0, 2.0]]), box)  # not 1-D
    with pytest.raises(ValidationError):
        RegionFeature(np.array([np.inf, 0.0]), box)


# ---------------------------------------------------------------------------
# feature store


def test_store_round_trip_bit_exact(tmp_path, rng):
    panos = random_panos(rng, n_nodes=7, k=6, d_v=16)
    path = tmp_path / "env.feat"
    save_features(panos, path)
    loaded = load_features(path)
    assert sorted(loaded) == sorted(panos)
    for nid, pano in panos.items():
        got = loaded[nid]
        assert got.k == pano.k
        for r_got, r_orig in zip(got.regions, pano.regions):
            assert np.array_equal(r_got.visual, r_orig.visual)  # exact float32
            assert r_got.box == r_orig.box


def test_store_round_trip_is_stable(tmp_path, rng):
    panos = random_panos(rng)
    p1, p2 = tmp_path / "a.feat", tmp_path / "b.feat"
    save_features(panos, p1)
    save_features(load_features(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_store_rejects_mixed_k(tmp_path, rng):
    panos = random_panos(rng, n_nodes=2, k=4)
    small = random_panos(rng, n_nodes=1, k=2)["n000"]
    panos["n000"] = small
    with pytest.raises(ValidationError):
        save_features(panos, tmp_path / "bad.feat")


def test_store_rejects_truncated_payload(tmp_path, rng):
    path = tmp_path / "env.feat"
    save_features(random_panos(rng), path)
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(DataError):
        load_features(path)


def test_store_rejects_garbage_header(tmp_path):
    path = tmp_path / "env.feat"
    path.write_bytes(b"this is not a header\n\x00\x00")
    with pytest.raises(DataError):
        load_features(path)


def test_store_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_features(tmp_path / "nope.feat")


def test_store_many_nodes(tmp_path, rng):
    panos = random_panos(rng, n_nodes=40, k=6, d_v=32)
    path = tmp_path / "big.feat"
    save_features(panos, path)
    loaded = load_features(path)
    assert len(loaded) == 40
    node = f"n{17:03d}"
    assert np.array_equal(loaded[node].visual_matrix(), panos[node].visual_matrix())
