"""Region features for panoramic nodes, the 11-dimensional spatial encoding
of region geometry, and the binary feature-store format.

A store file is a single JSON header line followed by a little-endian
float32 payload of shape nodes x k x d_v, row-major, in the node order
listed in the header. Region boxes are shared by all nodes of an
environment (regions tile the panorama on a fixed grid).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, ValidationError

SPATIAL_DIM = 11

# Order of raw fields in the store header's "boxes" entries.
BOX_FIELDS = ("tl_heading", "tl_elevation", "br_heading", "br_elevation",
              "area", "center_elevation")


@dataclass(frozen=True)
class RegionBox:
    """Angular bounding geometry of one panorama region.

    Headings are angular (the panorama wraps horizontally); elevations are
    relative to the horizon. ``area`` is the fraction of the panorama the
    region covers.
    """

    tl_heading: float
    tl_elevation: float
    br_heading: float
    br_elevation: float
    area: float
    center_elevation: float

    def __post_init__(self):
        for name in ("tl_elevation", "br_elevation", "center_elevation"):
            val = getattr(self, name)
            if not -math.pi / 2 <= val <= math.pi / 2:
                raise ValidationError(f"{name} must lie in [-pi/2, pi/2], got {val}")
        if not 0.0 <= self.area <= 1.0:
            raise ValidationError(f"area must lie in [0, 1], got {self.area}")

    def raw(self) -> tuple[float, ...]:
        return tuple(float(getattr(self, f)) for f in BOX_FIELDS)


@dataclass(frozen=True)
class RegionFeature:
    visual: np.ndarray  # (d_v,) float32
    box: RegionBox

    def __post_init__(self):
        vec = np.asarray(self.visual, dtype=np.float32)
        if vec.ndim != 1:
            raise ValidationError(f"visual vector must be 1-D, got shape {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise ValidationError("visual vector components must be finite")
        object.__setattr__(self, "visual", vec)


@dataclass(frozen=True)
class PanoObservation:
    node_id: str
    regions: tuple[RegionFeature, ...]

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        if not self.regions:
            raise ValidationError("panorama must contain at least one region")

    @property
    def k(self) -> int:
        return len(self.regions)

    def visual_matrix(self) -> np.ndarray:
        """(k, d_v) float64 matrix of region visual vectors."""
        return np.stack([r.visual for r in self.regions]).astype(np.float64)


def encode_region_spatial(box: RegionBox) -> np.ndarray:
    """11-component spatial encoding of a region box.

    Layout: [cos, sin] of tl_heading, tl_elevation, br_heading and
    br_elevation, then the area fraction, then [cos, sin] of the center
    elevation. Invariant under adding 2*pi to any heading.
    """
    return np.array([
        math.cos(box.tl_heading), math.sin(box.tl_heading),
        math.cos(box.tl_elevation), math.sin(box.tl_elevation),
        math.cos(box.br_heading), math.sin(box.br_heading),
        math.cos(box.br_elevation), math.sin(box.br_elevation),
        box.area,
        math.cos(box.center_elevation), math.sin(box.center_elevation),
    ], dtype=np.float64)


def grid_boxes(k: int) -> list[RegionBox]:
    """Tile the panorama into ``k`` equal regions on a fixed heading by
    elevation grid (3 elevation bands when k is divisible by 3, else 1),
    each covering a 1/k fraction of the panorama."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    n_elev = 3 if k % 3 == 0 else 1
    n_head = k // n_elev
    boxes = []
    band = math.pi / n_elev  # elevation span of one band within [-pi/2, pi/2]
    for j in range(n_elev):
        top = math.pi / 2 - j * band
        bottom = top - band
        center = (top + bottom) / 2.0
        for i in range(n_head):
            tl_h = i * 2.0 * math.pi / n_head
            br_h = ((i + 1) % n_head) * 2.0 * math.pi / n_head
            boxes.append(RegionBox(
                tl_heading=tl_h, tl_elevation=top,
                br_heading=br_h, br_elevation=bottom,
                area=1.0 / k, center_elevation=center,
            ))
    return boxes


def save_features(panos: dict[str, PanoObservation], path) -> None:
    """Write a feature store; nodes are serialized in lexicographic id order.

    Requires every node to share the same k and identical region boxes.
    """
    if not panos:
        raise ValidationError("cannot save an empty feature store")
    ids = sorted(panos)
    first = panos[ids[0]]
    k = first.k
    d_v = int(first.regions[0].visual.shape[0])
    boxes = [r.box for r in first.regions]
    for nid in ids:
        pano = panos[nid]
        if pano.node_id != nid:
            raise ValidationError(f"pano keyed {nid!r} carries node_id {pano.node_id!r}")
        if pano.k != k:
            raise ValidationError(f"node {nid!r} has k={pano.k}, expected {k}")
        if [r.box for r in pano.regions] != boxes:
            raise ValidationError(f"node {nid!r} region boxes differ from the shared grid")
    header = {
        "d_v": d_v,
        "k": k,
        "nodes": ids,
        "boxes": [list(b.raw()) for b in boxes],
    }
    payload = np.stack([np.stack([r.visual for r in panos[nid].regions]) for nid in ids])
    payload = np.ascontiguousarray(payload, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload.tobytes())


def load_features(path) -> dict[str, PanoObservation]:
    """Load a feature store; the payload byte count must match the header."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"feature store not found: {path}")
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
        d_v, k, ids = int(header["d_v"]), int(header["k"]), list(header["nodes"])
        box_rows = header["boxes"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed feature store header in {path}: {exc}") from exc
    if len(box_rows) != k:
        raise DataError(f"feature store {path}: header lists {len(box_rows)} boxes for k={k}")
    try:
        boxes = [RegionBox(*row) for row in box_rows]
    except (TypeError, ValidationError) as exc:
        raise DataError(f"invalid box entry in {path}: {exc}") from exc
    expected = len(ids) * k * d_v * 4
    if len(blob) != expected:
        raise DataError(
            f"feature store {path}: payload is {len(blob)} bytes, header implies {expected}"
        )
    data = np.frombuffer(blob, dtype="<f4").reshape(len(ids), k, d_v)
    panos = {}
    for i, nid in enumerate(ids):
        regions = tuple(RegionFeature(data[i, j].copy(), boxes[j]) for j in range(k))
        panos[nid] = PanoObservation(nid, regions)
    return panos
