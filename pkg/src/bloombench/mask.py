"""Binary masks: RLE codec, morphology, components, post-processing.

Conventions fixed here and relied on everywhere else:

* masks are row-major boolean grids, True = bloom;
* RLE counts alternate false-run, true-run, ... starting with the false
  run (which may be 0), over the row-major pixel order;
* morphology uses a square structuring element of side 2*radius+1 and
  treats out-of-bounds neighbors as false;
* connectivity is 8-way for foreground components and 4-way for the
  hole-filling background test.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import DimensionMismatch, RunSumMismatch

_EIGHT = np.ones((3, 3), dtype=bool)
_FOUR = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True, eq=False)
class Mask:
    width: int
    height: int
    bits: np.ndarray  # bool, shape (height, width), read-only

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("mask dimensions must be >= 1")
        bits = np.asarray(self.bits, dtype=bool)
        if bits.shape != (self.height, self.width):
            raise ValueError(
                f"bits shape {bits.shape} != (height, width) = ({self.height}, {self.width})"
            )
        if bits is not self.bits or bits.flags.writeable:
            bits = bits.copy()
            bits.flags.writeable = False
            object.__setattr__(self, "bits", bits)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Mask):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and bool(np.array_equal(self.bits, other.bits))
        )

    def __hash__(self):
        return hash((self.width, self.height, self.bits.tobytes()))

    @classmethod
    def zeros(cls, width: int, height: int) -> "Mask":
        return cls(width, height, np.zeros((height, width), dtype=bool))

    @classmethod
    def from_array(cls, bits: np.ndarray) -> "Mask":
        bits = np.asarray(bits, dtype=bool)
        return cls(bits.shape[1], bits.shape[0], bits)

    @property
    def area(self) -> int:
        return int(self.bits.sum())

    def is_empty(self) -> bool:
        return not self.bits.any()

    def contains(self, col: int, row: int) -> bool:
        return bool(self.bits[row, col])

    def issubset(self, other: "Mask") -> bool:
        return bool((self.bits & ~other.bits).sum() == 0)


@dataclass(frozen=True)
class RleMask:
    """Row-major run-length encoding; counts[0] is the leading false run."""

    width: int
    height: int
    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "counts", counts)
        if any(c < 0 for c in counts):
            raise RunSumMismatch("negative run length")
        if any(c == 0 for c in counts[1:]):
            raise RunSumMismatch("interior zero run (only counts[0] may be 0)")
        total = sum(counts)
        if total != self.width * self.height:
            raise RunSumMismatch(
                f"counts sum to {total}, expected {self.width * self.height}"
            )

    def to_json(self) -> dict:
        return {"width": self.width, "height": self.height, "counts": list(self.counts)}

    @classmethod
    def from_json(cls, obj: dict) -> "RleMask":
        try:
            return cls(int(obj["width"]), int(obj["height"]), tuple(obj["counts"]))
        except (KeyError, TypeError) as exc:
            raise RunSumMismatch(f"malformed RLE object: {exc}") from exc


@dataclass(frozen=True)
class PostProcessConfig:
    closing_radius: int = 1
    min_component_area: int = 16
    fill_holes: bool = True

    def __post_init__(self):
        if self.closing_radius < 0 or self.min_component_area < 0:
            raise ValueError("closing_radius and min_component_area must be >= 0")

    def to_json(self) -> dict:
        return {
            "closing_radius": self.closing_radius,
            "min_component_area": self.min_component_area,
            "fill_holes": self.fill_holes,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PostProcessConfig":
        return cls(
            closing_radius=int(obj.get("closing_radius", 1)),
            min_component_area=int(obj.get("min_component_area", 16)),
            fill_holes=bool(obj.get("fill_holes", True)),
        )


class Component(NamedTuple):
    component_id: int
    area: int
    bounding_box: tuple[int, int, int, int]  # (min_col, min_row, max_col, max_row)


# --- RLE -------------------------------------------------------------------

def encode_rle(mask: Mask) -> RleMask:
    flat = mask.bits.ravel()
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).tolist()
    counts = runs if not flat[0] else [0] + runs
    return RleMask(mask.width, mask.height, tuple(counts))


def decode_rle(rle: RleMask) -> Mask:
    values = (np.arange(len(rle.counts)) % 2).astype(bool)
    flat = np.repeat(values, np.asarray(rle.counts, dtype=np.int64))
    return Mask(rle.width, rle.height, flat.reshape(rle.height, rle.width))


def write_rle(rle: RleMask, path: str | Path) -> None:
    Path(path).write_text(json.dumps(rle.to_json()) + "\n", encoding="utf-8")


def read_rle(path: str | Path) -> RleMask:
    return RleMask.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


# --- morphology ------------------------------------------------------------

def _square(radius: int) -> np.ndarray:
    return np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)


def dilate(mask: Mask, radius: int) -> Mask:
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return mask
    out = ndimage.binary_dilation(mask.bits, structure=_square(radius), border_value=0)
    return Mask(mask.width, mask.height, out)


def erode(mask: Mask, radius: int) -> Mask:
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return mask
    out = ndimage.binary_erosion(mask.bits, structure=_square(radius), border_value=0)
    return Mask(mask.width, mask.height, out)


def close(mask: Mask, radius: int) -> Mask:
    return erode(dilate(mask, radius), radius)


def open_(mask: Mask, radius: int) -> Mask:
    return dilate(erode(mask, radius), radius)


# --- components ------------------------------------------------------------

def _label8(bits: np.ndarray) -> tuple[np.ndarray, int]:
    labeled, n = ndimage.label(bits, structure=_EIGHT)
    return labeled, n


def connected_components(mask: Mask) -> list[Component]:
    """8-connected components, largest first; ties break on the first pixel
    (row-major scan order). Bounding boxes are inclusive."""
    labeled, n = _label8(mask.bits)
    if n == 0:
        return []
    flat = labeled.ravel()
    areas = np.bincount(flat, minlength=n + 1)
    labels, first_idx = np.unique(flat, return_index=True)
    first = dict(zip(labels.tolist(), first_idx.tolist()))
    slices = ndimage.find_objects(labeled)
    order = sorted(range(1, n + 1), key=lambda lb: (-int(areas[lb]), first[lb]))
    out = []
    for new_id, lb in enumerate(order, start=1):
        rows, cols = slices[lb - 1]
        box = (cols.start, rows.start, cols.stop - 1, rows.stop - 1)
        out.append(Component(new_id, int(areas[lb]), box))
    return out


def fill_holes(mask: Mask) -> Mask:
    """Set true any false region that is not 4-connected to the border."""
    background, n = ndimage.label(~mask.bits, structure=_FOUR)
    if n == 0:
        return mask
    border = np.unique(
        np.concatenate(
            [background[0, :], background[-1, :], background[:, 0], background[:, -1]]
        )
    )
    border_set = set(border.tolist()) - {0}
    hole = (background > 0) & ~np.isin(background, sorted(border_set))
    return Mask(mask.width, mask.height, mask.bits | hole)


def remove_small_components(mask: Mask, min_area: int) -> Mask:
    if min_area <= 1:
        return mask
    labeled, n = _label8(mask.bits)
    if n == 0:
        return mask
    areas = np.bincount(labeled.ravel(), minlength=n + 1)
    keep = areas >= min_area
    keep[0] = False
    return Mask(mask.width, mask.height, keep[labeled])


def postprocess(mask: Mask, cfg: PostProcessConfig = PostProcessConfig()) -> Mask:
    """Closing, then hole filling, then small-component removal."""
    out = close(mask, cfg.closing_radius)
    if cfg.fill_holes:
        out = fill_holes(out)
    return remove_small_components(out, cfg.min_component_area)


# --- image format ----------------------------------------------------------

def mask_to_png_bytes(mask: Mask) -> bytes:
    img = Image.fromarray(np.where(mask.bits, 255, 0).astype(np.uint8), mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def write_mask_png(mask: Mask, path: str | Path) -> None:
    Path(path).write_bytes(mask_to_png_bytes(mask))


def read_mask_png(path: str | Path) -> Mask:
    img = Image.open(path).convert("L")
    arr = np.asarray(img)
    return Mask(arr.shape[1], arr.shape[0], arr >= 128)
