"""Instruction-image-answer triplet generation and JSONL persistence.

Two record kinds:

* severity — one fixed instruction (byte-exact, including the trailing
  space on the "where: " line and the spaceless "Example output:3"),
  answered with a single digit 1-5;
* segmentation — instruction drawn from a fixed template list, answered
  with the sentence "It is <SEG>." plus a mask_ref to a stored RLE file.

Template sampling is a Fisher-Yates shuffle driven by a 64-bit LCG
(a = 6364136223846793005, c = 1442695040888963407, mod 2^64), taking
the first k entries, so any implementation of the same recipe in any
language reproduces the exact selection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import MalformedLine, TooFewTemplates
from .severity import SeverityLevel

SEVERITY_INSTRUCTION = (
    "<image>\n"
    "Analyze the provided satellite image of algae-specific conditions."
    " Determine the severity level, where: \n"
    "1 = Very low, 2 = Low, 3 = Moderate, 4 = High, 5 = Very high.\n"
    "Output only a single digit from 1-5 with no other text.\n"
    "Example output:3"
)

SEG_ANSWER = "It is <SEG>."

DEFAULT_SEG_TEMPLATES = (
    "Locate the cyanobacterial harmful algal bloom in the satellite image.",
    "Locate all visible harmful algal blooms.",
    "Find the cyanobacterial harmful algal bloom in the satellite image.",
    "Segment all visible harmful algal blooms.",
    "Segment the waterbody affected by cyanobacteria.",
    "Segment the cyanobacterial harmful algal bloom in the satellite image.",
    "Segment the algal bloom affected areas.",
)

_LCG_A = 6364136223846793005
_LCG_C = 1442695040888963407
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Triplet:
    id: str
    task: str  # "severity" | "segmentation"
    instruction: str
    image_ref: str
    answer: str
    mask_ref: str | None = None

    def __post_init__(self):
        if self.task == "severity":
            if len(self.answer) != 1 or self.answer not in "12345":
                raise ValueError(f"severity answer must be one digit 1-5, got {self.answer!r}")
        elif self.task == "segmentation":
            if self.answer.count("<SEG>") != 1:
                raise ValueError("segmentation answer must contain <SEG> exactly once")
        else:
            raise ValueError(f"unknown task {self.task!r}")

    def to_json(self) -> dict:
        out = {
            "id": self.id,
            "task": self.task,
            "instruction": self.instruction,
            "image_ref": self.image_ref,
            "answer": self.answer,
        }
        if self.mask_ref is not None:
            out["mask_ref"] = self.mask_ref
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Triplet":
        return cls(
            id=obj["id"],
            task=obj["task"],
            instruction=obj["instruction"],
            image_ref=obj["image_ref"],
            answer=obj["answer"],
            mask_ref=obj.get("mask_ref"),
        )


@dataclass(frozen=True)
class TemplateSet:
    severity_template: str = SEVERITY_INSTRUCTION
    seg_templates: tuple[str, ...] = DEFAULT_SEG_TEMPLATES

    def __post_init__(self):
        if not self.seg_templates:
            raise ValueError("seg_templates must be non-empty")
        for t in self.seg_templates:
            if "{" in t or "}" in t:
                raise ValueError(f"template has an unresolved placeholder: {t!r}")


DEFAULT_TEMPLATES = TemplateSet()


def _lcg_next(state: int) -> int:
    return (_LCG_A * state + _LCG_C) & _MASK64


def seeded_sample(items: Sequence[str], k: int, seed: int) -> list[str]:
    """First k entries of a Fisher-Yates shuffle driven by the 64-bit LCG."""
    arr = list(items)
    state = seed & _MASK64
    for i in range(len(arr) - 1, 0, -1):
        state = _lcg_next(state)
        j = state % (i + 1)
        arr[i], arr[j] = arr[j], arr[i]
    return arr[:k]


def gen_severity_triplet(
    scene_id: str, label: SeverityLevel, templates: TemplateSet = DEFAULT_TEMPLATES
) -> Triplet:
    """One severity record; the answer is the level's decimal digit."""
    return Triplet(
        id=f"{scene_id}:severity",
        task="severity",
        instruction=templates.severity_template,
        image_ref=scene_id,
        answer=str(int(label)),
    )


def gen_seg_triplets(
    scene_id: str,
    mask_ref: str,
    templates: TemplateSet = DEFAULT_TEMPLATES,
    k: int = 1,
    seed: int = 0,
) -> list[Triplet]:
    """k segmentation records with distinct, seed-deterministic templates."""
    if k > len(templates.seg_templates):
        raise TooFewTemplates(
            f"k={k} but only {len(templates.seg_templates)} templates available"
        )
    chosen = seeded_sample(templates.seg_templates, k, seed)
    return [
        Triplet(
            id=f"{scene_id}:seg:{i}",
            task="segmentation",
            instruction=instruction,
            image_ref=scene_id,
            answer=SEG_ANSWER,
            mask_ref=mask_ref,
        )
        for i, instruction in enumerate(chosen)
    ]


def write_jsonl(triplets: Iterable[Triplet], path: str | Path) -> int:
    """One JSON object per line, UTF-8, '\\n' terminators; returns the count."""
    count = 0
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for t in triplets:
            fh.write(json.dumps(t.to_json(), ensure_ascii=False) + "\n")
            count += 1
    return count


def read_jsonl(path: str | Path) -> list[Triplet]:
    """Inverse of write_jsonl; raises MalformedLine with the 1-based line."""
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.rstrip("\n")
            if not stripped:
                raise MalformedLine(lineno, "blank line")
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise MalformedLine(lineno, str(exc)) from exc
            try:
                out.append(Triplet.from_json(obj))
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedLine(lineno, str(exc)) from exc
    return out
