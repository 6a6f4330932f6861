"""PNG rendering for scene previews and score-field heat layers."""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

from ..promptseg import ScoreField
from ..raster import Scene

# diverging ramp breakpoints for scores -1 .. 0 .. +1
_RAMP = (
    (-1.0, (8, 48, 160)),
    (0.0, (245, 245, 245)),
    (1.0, (178, 10, 28)),
)


def _stretch(band: np.ndarray, nodata: float | None) -> np.ndarray:
    """Min-max stretch one band to uint8; nodata pixels go black."""
    data = band.astype(np.float64)
    valid = np.ones_like(data, dtype=bool)
    if nodata is not None:
        valid = data != float(nodata)
    if not valid.any():
        return np.zeros(data.shape, dtype=np.uint8)
    lo = data[valid].min()
    hi = data[valid].max()
    if hi == lo:
        out = np.full(data.shape, 128.0)
    else:
        out = (data - lo) / (hi - lo) * 255.0
    out[~valid] = 0.0
    return np.clip(np.round(out), 0, 255).astype(np.uint8)


def preview_png(scene: Scene, mapping: dict) -> bytes:
    """8-bit RGB composite per the configured band mapping.

    Channels whose mapped band is absent fall back to the scene's first
    band so partial products still render.
    """
    names = set(scene.band_names)
    fallback = scene.bands[0].name
    channels = []
    for key in ("r", "g", "b"):
        name = mapping.get(key, fallback)
        if name not in names:
            name = fallback
        channels.append(_stretch(scene.band(name).data, scene.nodata_value))
    rgb = np.stack(channels, axis=-1)
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def score_png(field: ScoreField) -> bytes:
    """Heat image of a score field over the blue-white-red ramp."""
    v = field.values.astype(np.float64)
    rgb = np.zeros((field.height, field.width, 3), dtype=np.float64)
    for (v0, c0), (v1, c1) in zip(_RAMP[:-1], _RAMP[1:]):
        seg = (v >= v0) & (v <= v1)
        frac = np.zeros_like(v)
        frac[seg] = (v[seg] - v0) / (v1 - v0)
        for ch in range(3):
            rgb[..., ch][seg] = c0[ch] + frac[seg] * (c1[ch] - c0[ch])
    out = np.clip(np.round(rgb), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(out, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()
