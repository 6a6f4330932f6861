"""Shared builders for synthetic scenes and stores."""

from __future__ import annotations

import numpy as np
import pytest

from bloombench.raster import Band, GeoMeta, Scene, write_scene

GEO = GeoMeta(crs="EPSG:32633", transform=(10.0, 0.0, 399960.0, 0.0, -10.0, 5000040.0))


def blob_field(
    width: int,
    height: int,
    centers,
    amps,
    sigmas,
    background: float = -0.5,
) -> np.ndarray:
    """Smooth field in [-0.95, 0.95]: gaussian bumps over a flat background."""
    yy, xx = np.mgrid[0:height, 0:width]
    f = np.full((height, width), background, dtype=np.float64)
    for (cx, cy), a, s in zip(centers, amps, sigmas):
        f += a * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * s * s))
    return np.clip(f, -0.95, 0.95)


def scene_from_field(scene_id: str, f: np.ndarray, nodata: float | None = None) -> Scene:
    """Scene whose NDCI (B05 vs B04) equals the given field exactly."""
    height, width = f.shape
    b05 = ((1.0 + f) / 2.0).astype(np.float32)
    b04 = ((1.0 - f) / 2.0).astype(np.float32)
    return Scene(
        scene_id=scene_id,
        width=width,
        height=height,
        bands=(Band("B04", b04), Band("B05", b05)),
        geo=GEO,
        acquisition_time="2024-06-01T10:00:00Z",
        nodata_value=nodata,
    )


def blob_scene(scene_id: str, width=32, height=32, cx=16, cy=16, sigma=5.0) -> Scene:
    return scene_from_field(
        scene_id, blob_field(width, height, [(cx, cy)], [1.2], [sigma])
    )


@pytest.fixture
def tmp_store(tmp_path):
    """Store with two clean blob scenes plus a density label CSV."""
    store = tmp_path / "store"
    store.mkdir()
    write_scene(blob_scene("s_alpha", cx=16, cy=16), store / "s_alpha")
    write_scene(blob_scene("s_beta", cx=10, cy=20), store / "s_beta")
    (store / "labels.csv").write_text(
        "scene_id,cells_per_ml\ns_alpha,50000\ns_beta,2000000\n", encoding="utf-8"
    )
    return store
