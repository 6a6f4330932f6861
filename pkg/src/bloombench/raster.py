"""Portable multi-band scene container: load, validate, write.

A scene lives in its own directory:

    <scene_id>/
      scene.json        header (dimensions, band names, geo metadata, ...)
      bands/<NAME>.f32  raw 32-bit little-endian floats, row-major,
                        width*height samples, no file header

The reader is deliberately dumb: no reprojection, no resampling, no
TIFF/JP2 decoding. Converting real Sentinel-2 products into this layout
is a separate (out-of-repo) step documented in the README.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BandSizeMismatch,
    DuplicateBandName,
    MissingHeader,
    NonFiniteSample,
    RootNotFound,
    UnknownBand,
)

HEADER_NAME = "scene.json"
BAND_DIR = "bands"
BAND_SUFFIX = ".f32"
_F32 = np.dtype("<f4")


@dataclass(frozen=True)
class GeoMeta:
    """CRS authority code plus an affine pixel->world transform.

    transform = (a, b, c, d, e, f) maps (col, row) to
    x = a*col + b*row + c, y = d*col + e*row + f.
    """

    crs: str
    transform: tuple[float, float, float, float, float, float]

    def __post_init__(self):
        if len(self.transform) != 6:
            raise ValueError("transform must have 6 coefficients")
        a, b, _, d, e, _ = self.transform
        if a * e - b * d == 0.0:
            raise ValueError("geo transform is singular (a*e - b*d == 0)")

    def pixel_to_world(self, col: float, row: float) -> tuple[float, float]:
        a, b, c, d, e, f = self.transform
        return (a * col + b * row + c, d * col + e * row + f)


@dataclass(frozen=True)
class Band:
    name: str
    data: np.ndarray  # float32, shape (height, width), read-only


@dataclass(frozen=True)
class Scene:
    """Immutable in-memory scene; safe for concurrent reads."""

    scene_id: str
    width: int
    height: int
    bands: tuple[Band, ...]
    geo: GeoMeta
    acquisition_time: str
    nodata_value: float | None = None

    @property
    def band_names(self) -> list[str]:
        return [b.name for b in self.bands]

    def band(self, name: str) -> Band:
        """Look up a band by exact, case-sensitive name."""
        for b in self.bands:
            if b.name == name:
                return b
        raise UnknownBand(f"scene {self.scene_id!r} has no band {name!r}")

    def nodata_mask(self, *names: str) -> np.ndarray:
        """Boolean (height, width) array: True where any named band equals nodata."""
        mask = np.zeros((self.height, self.width), dtype=bool)
        if self.nodata_value is None:
            return mask
        for name in names:
            mask |= self.band(name).data == np.float32(self.nodata_value)
        return mask


def _read_header(scene_dir: Path) -> dict:
    header_path = scene_dir / HEADER_NAME
    if not header_path.is_file():
        raise MissingHeader(f"{header_path} not found")
    try:
        header = json.loads(header_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MissingHeader(f"{header_path}: {exc}") from exc
    if not isinstance(header, dict):
        raise MissingHeader(f"{header_path}: header is not a JSON object")
    return header


def load_scene(path: str | Path) -> Scene:
    """Load a scene container directory and check every invariant.

    Raises MissingHeader for an absent or structurally invalid scene.json,
    DuplicateBandName, BandSizeMismatch (also for a missing band file), and
    NonFiniteSample when a sample is neither finite nor the nodata sentinel.
    """
    scene_dir = Path(path)
    header = _read_header(scene_dir)

    for key in ("scene_id", "width", "height", "bands", "geo", "acquisition_time"):
        if key not in header:
            raise MissingHeader(f"scene.json missing key {key!r}")

    scene_id = str(header["scene_id"])
    try:
        width = int(header["width"])
        height = int(header["height"])
    except (TypeError, ValueError) as exc:
        raise MissingHeader(f"width/height not integers: {exc}") from exc
    if width < 1 or height < 1:
        raise MissingHeader(f"width and height must be >= 1, got {width}x{height}")

    band_names = header["bands"]
    if not isinstance(band_names, list) or not band_names:
        raise MissingHeader("header must declare at least 1 band")
    band_names = [str(n) for n in band_names]
    seen: set[str] = set()
    for name in band_names:
        if name in seen:
            raise DuplicateBandName(f"band {name!r} declared twice in {scene_id!r}")
        seen.add(name)

    geo_obj = header["geo"]
    try:
        geo = GeoMeta(crs=str(geo_obj["crs"]), transform=tuple(float(v) for v in geo_obj["transform"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise MissingHeader(f"invalid geo metadata: {exc}") from exc

    nodata = header.get("nodata_value")
    if nodata is not None:
        nodata = float(nodata)
        if not np.isfinite(nodata):
            raise MissingHeader("nodata_value must be finite")

    n_samples = width * height
    bands = []
    for name in band_names:
        band_path = scene_dir / BAND_DIR / f"{name}{BAND_SUFFIX}"
        if not band_path.is_file():
            raise BandSizeMismatch(f"band file {band_path} missing")
        raw = band_path.read_bytes()
        data = np.frombuffer(raw, dtype=_F32)
        if data.size != n_samples:
            raise BandSizeMismatch(
                f"band {name!r} has {data.size} samples, expected {n_samples}"
            )
        if not np.isfinite(data).all():
            raise NonFiniteSample(f"band {name!r} contains a non-finite sample")
        grid = data.reshape(height, width)
        grid.flags.writeable = False
        bands.append(Band(name=name, data=grid))

    return Scene(
        scene_id=scene_id,
        width=width,
        height=height,
        bands=tuple(bands),
        geo=geo,
        acquisition_time=str(header["acquisition_time"]),
        nodata_value=nodata,
    )


def write_scene(scene: Scene, path: str | Path) -> Path:
    """Write a scene container at `path`; inverse of load_scene."""
    scene_dir = Path(path)
    (scene_dir / BAND_DIR).mkdir(parents=True, exist_ok=True)
    header = {
        "scene_id": scene.scene_id,
        "width": scene.width,
        "height": scene.height,
        "bands": scene.band_names,
        "geo": {"crs": scene.geo.crs, "transform": list(scene.geo.transform)},
        "acquisition_time": scene.acquisition_time,
    }
    if scene.nodata_value is not None:
        header["nodata_value"] = scene.nodata_value
    (scene_dir / HEADER_NAME).write_text(
        json.dumps(header, indent=2) + "\n", encoding="utf-8"
    )
    for band in scene.bands:
        band_path = scene_dir / BAND_DIR / f"{band.name}{BAND_SUFFIX}"
        band_path.write_bytes(np.ascontiguousarray(band.data, dtype=_F32).tobytes())
    return scene_dir


def list_scene_dirs(root: str | Path) -> list[Path]:
    """Immediate subdirectories of a store root, sorted by name."""
    root = Path(root)
    if not root.is_dir():
        raise RootNotFound(f"store root {root} does not exist")
    return sorted(
        (p for p in root.iterdir() if p.is_dir() and not p.name.startswith(".")),
        key=lambda p: p.name,
    )


def validate_store(root: str | Path) -> list[tuple[str, list[str]]]:
    """Try to load every scene under `root`.

    Returns one (scene_id, violations) entry per scene directory, where
    each violation string starts with the error class name. An empty list
    means the scene loads cleanly. The directory name stands in for the
    scene_id when the header itself is unreadable.
    """
    results = []
    for scene_dir in list_scene_dirs(root):
        try:
            scene = load_scene(scene_dir)
        except Exception as exc:  # noqa: BLE001 - collect, don't crash
            results.append((scene_dir.name, [f"{type(exc).__name__}: {exc}"]))
            continue
        results.append((scene.scene_id, []))
    return results
