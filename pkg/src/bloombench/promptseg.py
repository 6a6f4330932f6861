"""Deterministic prompt-driven candidate segmentation.

A spectral-index score field stands in for a learned affinity model,
so the whole candidate pipeline is reproducible: identical inputs give
byte-identical candidate sets. The default index is NDCI,
(B05 - B04) / (B05 + B04), a standard chlorophyll/cyanobacteria proxy;
the IndexSpec makes the band choice configurable per store.

Candidate construction, in order:

1. compute the score field in [-1, 1] (nodata pixels pinned to -1);
2. place k thresholds strictly between the highest negative-point score
   and the lowest positive-point score (or in a 0.2-wide band below the
   positive minimum when the prompts contradict each other);
3. threshold inside the ROI;
4. keep components touching a positive point, drop components holding a
   negative point;
5. post-process (closing, hole fill, small-component removal);
6. score each candidate by its mean field value and sort best-first.

The step-3 threshold masks are exposed on the pipeline result because
they are the masks with the clean nesting guarantee; component
filtering can break containment between thresholds (a negative point
may delete a low-threshold component whose high-threshold core
survives).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import DegeneratePrompts, InvalidPrompts
from .mask import Mask, PostProcessConfig, encode_rle, postprocess
from .raster import Scene

_EIGHT = np.ones((3, 3), dtype=bool)

DEFAULT_CANDIDATES = 3


@dataclass(frozen=True)
class PromptSet:
    """Annotator input: positive/negative (col, row) points and an ROI box."""

    positive: tuple[tuple[int, int], ...]
    negative: tuple[tuple[int, int], ...]
    roi: tuple[int, int, int, int]  # (x0, y0, x1, y1) inclusive

    def validate(self, width: int, height: int) -> None:
        """Raise InvalidPrompts naming the violated invariant."""
        if not self.positive:
            raise InvalidPrompts("at least one positive point is required")
        x0, y0, x1, y1 = self.roi
        if x0 > x1 or y0 > y1:
            raise InvalidPrompts(f"roi is inverted: {self.roi}")
        for col, row in list(self.positive) + list(self.negative):
            if not (0 <= col < width and 0 <= row < height):
                raise InvalidPrompts(
                    f"point ({col},{row}) outside image bounds {width}x{height}"
                )
        for col, row in self.positive:
            if not (x0 <= col <= x1 and y0 <= row <= y1):
                raise InvalidPrompts(f"positive point ({col},{row}) outside roi {self.roi}")

    def to_json(self) -> dict:
        return {
            "positive": [list(p) for p in self.positive],
            "negative": [list(p) for p in self.negative],
            "roi": list(self.roi),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PromptSet":
        try:
            return cls(
                positive=tuple((int(c), int(r)) for c, r in obj["positive"]),
                negative=tuple((int(c), int(r)) for c, r in obj.get("negative", [])),
                roi=tuple(int(v) for v in obj["roi"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidPrompts(f"malformed prompt set: {exc}") from exc


@dataclass(frozen=True)
class IndexSpec:
    kind: str  # "normalized_difference" | "single_band"
    band_a: str
    band_b: str | None = None

    def __post_init__(self):
        if self.kind not in ("normalized_difference", "single_band"):
            raise ValueError(f"unknown index kind {self.kind!r}")
        if self.kind == "normalized_difference" and not self.band_b:
            raise ValueError("normalized_difference requires band_b")

    def to_json(self) -> dict:
        out = {"kind": self.kind, "band_a": self.band_a}
        if self.band_b is not None:
            out["band_b"] = self.band_b
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "IndexSpec":
        return cls(obj["kind"], obj["band_a"], obj.get("band_b"))


NDCI = IndexSpec(kind="normalized_difference", band_a="B05", band_b="B04")


@dataclass(frozen=True)
class ScoreField:
    width: int
    height: int
    values: np.ndarray  # float32, shape (height, width), in [-1, 1]

    def at(self, col: int, row: int) -> float:
        return float(self.values[row, col])


@dataclass(frozen=True)
class Candidate:
    mask: Mask
    threshold: float
    score: float


@dataclass(frozen=True)
class CandidateSet:
    candidates: tuple[Candidate, ...]
    prompt_set: PromptSet

    def to_json(self) -> dict:
        return {
            "prompt_set": self.prompt_set.to_json(),
            "candidates": [
                {
                    "threshold": c.threshold,
                    "score": c.score,
                    "mask": encode_rle(c.mask).to_json(),
                }
                for c in self.candidates
            ],
        }

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.to_json(), sort_keys=True).encode("utf-8")

    @classmethod
    def from_json(cls, obj: dict) -> "CandidateSet":
        from .mask import RleMask, decode_rle

        return cls(
            candidates=tuple(
                Candidate(
                    mask=decode_rle(RleMask.from_json(c["mask"])),
                    threshold=float(c["threshold"]),
                    score=float(c["score"]),
                )
                for c in obj["candidates"]
            ),
            prompt_set=PromptSet.from_json(obj["prompt_set"]),
        )


@dataclass(frozen=True)
class CandidatePipeline:
    """Per-stage intermediates, kept around for property checks."""

    thresholds: tuple[float, ...]  # ascending
    threshold_masks: tuple[Mask, ...]  # score >= t inside roi; nested by construction
    filtered_masks: tuple[Mask, ...]  # after positive/negative component filtering
    candidate_set: CandidateSet


def nodata_pixels(scene: Scene, spec: IndexSpec) -> np.ndarray:
    if spec.kind == "normalized_difference":
        return scene.nodata_mask(spec.band_a, spec.band_b)
    return scene.nodata_mask(spec.band_a)


def score_field(scene: Scene, spec: IndexSpec = NDCI) -> ScoreField:
    """Spectral-index scores in [-1, 1]; nodata and undefined pixels get -1."""
    bad = nodata_pixels(scene, spec)
    if spec.kind == "normalized_difference":
        a = scene.band(spec.band_a).data.astype(np.float32)
        b = scene.band(spec.band_b).data.astype(np.float32)
        denom = a + b
        with np.errstate(divide="ignore", invalid="ignore"):
            values = (a - b) / denom
        values = np.clip(values, -1.0, 1.0)
        invalid = bad | (denom == 0.0)
    else:
        x = scene.band(spec.band_a).data.astype(np.float32)
        valid = ~bad
        if not valid.any():
            invalid = np.ones_like(bad)
            values = np.zeros_like(x)
        else:
            lo = float(x[valid].min())
            hi = float(x[valid].max())
            if hi == lo:
                values = np.zeros_like(x)
            else:
                values = np.clip(2.0 * (x - lo) / (hi - lo) - 1.0, -1.0, 1.0)
            invalid = bad
    values = np.where(invalid, np.float32(-1.0), values.astype(np.float32))
    values.flags.writeable = False
    return ScoreField(scene.width, scene.height, values)


def _drop_negative_components(mask: Mask, negative: Sequence[tuple[int, int]]) -> Mask:
    if mask.is_empty() or not negative:
        return mask
    labeled, _ = ndimage.label(mask.bits, structure=_EIGHT)
    drop = sorted({int(labeled[row, col]) for col, row in negative} - {0})
    if not drop:
        return mask
    return Mask(mask.width, mask.height, mask.bits & ~np.isin(labeled, drop))


def _thresholds(p_min: float, n_max: float, k: int) -> list[float]:
    lo = max(n_max, -1.0)
    hi = p_min
    if p_min <= n_max:
        lo = max(p_min - 0.2, -1.0)
        hi = min(p_min, 1.0)
    return [lo + (i / (k + 1)) * (hi - lo) for i in range(1, k + 1)]


def candidate_pipeline(
    scene: Scene,
    prompts: PromptSet,
    spec: IndexSpec = NDCI,
    k: int = DEFAULT_CANDIDATES,
    post: PostProcessConfig = PostProcessConfig(),
) -> CandidatePipeline:
    """Run the full candidate pipeline and keep the intermediates."""
    if k < 1:
        raise ValueError("k must be >= 1")
    prompts.validate(scene.width, scene.height)

    field = score_field(scene, spec)
    bad = nodata_pixels(scene, spec)
    if all(bad[row, col] for col, row in prompts.positive):
        raise DegeneratePrompts("every positive point sits on a nodata pixel")

    pos_scores = [field.at(col, row) for col, row in prompts.positive]
    neg_scores = [field.at(col, row) for col, row in prompts.negative] or [-1.0]
    thresholds = _thresholds(min(pos_scores), max(neg_scores), k)

    x0, y0, x1, y1 = prompts.roi
    roi_box = np.zeros((scene.height, scene.width), dtype=bool)
    roi_box[max(y0, 0) : min(y1, scene.height - 1) + 1,
            max(x0, 0) : min(x1, scene.width - 1) + 1] = True

    pos_stamp = np.zeros_like(roi_box)
    for col, row in prompts.positive:
        pos_stamp[max(row - 1, 0) : row + 2, max(col - 1, 0) : col + 2] = True

    threshold_masks = []
    filtered_masks = []
    for t in thresholds:
        bits = (field.values >= np.float32(t)) & roi_box & ~bad
        threshold_masks.append(Mask(scene.width, scene.height, bits))

        labeled, n = ndimage.label(bits, structure=_EIGHT)
        if n == 0:
            filtered_masks.append(Mask.zeros(scene.width, scene.height))
            continue
        keep = set(np.unique(labeled[pos_stamp]).tolist()) - {0}
        drop = {int(labeled[row, col]) for col, row in prompts.negative} - {0}
        selected = sorted(keep - drop)
        if not selected:
            filtered_masks.append(Mask.zeros(scene.width, scene.height))
            continue
        filtered_masks.append(
            Mask(scene.width, scene.height, np.isin(labeled, selected))
        )

    candidates = []
    for t, filtered in zip(reversed(thresholds), reversed(filtered_masks)):
        final = postprocess(filtered, post)
        # closing/hole-fill may have grown a component over a negative point;
        # the no-negative-points contract wins, so drop such components again
        final = _drop_negative_components(final, prompts.negative)
        if final.is_empty():
            score = -1.0
        else:
            score = float(field.values[final.bits].astype(np.float64).mean())
        candidates.append(Candidate(mask=final, threshold=float(t), score=score))
    candidates.sort(key=lambda c: -c.score)

    return CandidatePipeline(
        thresholds=tuple(float(t) for t in thresholds),
        threshold_masks=tuple(threshold_masks),
        filtered_masks=tuple(filtered_masks),
        candidate_set=CandidateSet(candidates=tuple(candidates), prompt_set=prompts),
    )


def generate_candidates(
    scene: Scene,
    prompts: PromptSet,
    spec: IndexSpec = NDCI,
    k: int = DEFAULT_CANDIDATES,
    post: PostProcessConfig = PostProcessConfig(),
) -> CandidateSet:
    """Ranked candidate masks for a prompt set (see module docstring)."""
    return candidate_pipeline(scene, prompts, spec, k, post).candidate_set
