"""Command line entry points.

Exit codes, kept script-friendly across all subcommands:
0 success, 1 validation failures, 2 usage or input mismatch,
3 data corruption (undecodable mask, size mismatch, missing mask file).
"""

from __future__ import annotations

import csv
import json
import math
import sys
from pathlib import Path

import click

from . import severity as sev
from .errors import BloombenchError, RootNotFound
from .mask import Mask, RleMask, decode_rle, read_mask_png
from .raster import load_scene, validate_store
from .segmetrics import MaskPair, seg_report
from .triplets import (
    DEFAULT_TEMPLATES,
    gen_seg_triplets,
    gen_severity_triplet,
    write_jsonl,
)

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _fnv1a64(text: str) -> int:
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def _f6(x: float) -> str:
    return f"{x:.6f}"


@click.group()
def main():
    """Workbench for bloom segmentation datasets: validate scene stores,
    run the curation service, emit instruction triplets, and score
    predictions."""


# --- validate ----------------------------------------------------------------


@main.command()
@click.argument("store_root", type=click.Path())
def validate(store_root):
    """Check every scene in STORE_ROOT; exit 0 only if all load cleanly."""
    try:
        results = validate_store(store_root)
    except RootNotFound as exc:
        click.echo(str(exc), err=True)
        sys.exit(2)
    bad = 0
    for scene_id, violations in results:
        for violation in violations:
            name, _, detail = violation.partition(":")
            click.echo(f"{name} {scene_id}:{detail}")
            bad += 1
    click.echo(f"{len(results)} scene(s), {bad} violation(s)")
    sys.exit(1 if bad else 0)


# --- serve ---------------------------------------------------------------------


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Config JSON; the BLOOMBENCH_CONFIG env var overrides this.")
def serve(config_path):
    """Run the curation HTTP service."""
    import uvicorn

    from .service import create_app, load_config

    try:
        config = load_config(config_path)
    except (FileNotFoundError, OSError, json.JSONDecodeError, KeyError) as exc:
        click.echo(f"cannot load config: {exc}", err=True)
        sys.exit(2)
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")


# --- gen-triplets -----------------------------------------------------------------


@main.command("gen-triplets")
@click.argument("store_root", type=click.Path())
@click.argument("labels_csv", type=click.Path())
@click.argument("masks_dir", type=click.Path(), required=False)
@click.option("--task", type=click.Choice(["severity", "segmentation"]),
              default="severity", show_default=True)
@click.option("--k", default=1, show_default=True,
              help="Query templates per scene (segmentation task).")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def gen_triplets(store_root, labels_csv, masks_dir, task, k, seed, out_path):
    """Emit instruction-image-answer triplets as JSONL for labeled scenes.

    Per-scene template sampling derives its seed from --seed and the
    scene_id, so output is byte-stable for a fixed seed regardless of
    how many scenes are present.
    """
    try:
        labels = sev.read_labels(labels_csv)
    except (OSError, ValueError) as exc:
        click.echo(f"cannot read labels: {exc}", err=True)
        sys.exit(2)
    if task == "segmentation" and not masks_dir:
        click.echo("segmentation task requires MASKS_DIR", err=True)
        sys.exit(2)

    store = Path(store_root)
    triplets = []
    for scene_id in sorted(labels):
        scene_dir = store / scene_id
        if not scene_dir.is_dir():
            click.echo(f"warning: labeled scene {scene_id!r} not in store, skipped",
                       err=True)
            continue
        if task == "severity":
            triplets.append(gen_severity_triplet(scene_id, labels[scene_id]))
            continue
        mask_path = Path(masks_dir) / f"{scene_id}.json"
        if not mask_path.is_file():
            click.echo(f"missing mask for labeled scene {scene_id!r}: {mask_path}",
                       err=True)
            sys.exit(3)
        try:
            rle = RleMask.from_json(json.loads(mask_path.read_text(encoding="utf-8")))
            scene = load_scene(scene_dir)
        except (BloombenchError, json.JSONDecodeError, OSError) as exc:
            click.echo(f"cannot decode {mask_path}: {exc}", err=True)
            sys.exit(3)
        if (rle.width, rle.height) != (scene.width, scene.height):
            click.echo(f"mask {mask_path} does not match scene dimensions", err=True)
            sys.exit(3)
        triplets.extend(
            gen_seg_triplets(
                scene_id,
                str(mask_path),
                DEFAULT_TEMPLATES,
                k=k,
                seed=seed ^ _fnv1a64(scene_id),
            )
        )
    count = write_jsonl(triplets, out_path)
    click.echo(str(count))


# --- eval-seg ------------------------------------------------------------------------


def _load_mask_dir(path: Path) -> dict[str, Mask]:
    masks: dict[str, Mask] = {}
    for file in sorted(path.iterdir()):
        if file.suffix == ".json":
            try:
                rle = RleMask.from_json(json.loads(file.read_text(encoding="utf-8")))
                masks[file.stem] = decode_rle(rle)
            except (BloombenchError, json.JSONDecodeError, OSError) as exc:
                click.echo(f"cannot decode mask {file}: {exc}", err=True)
                sys.exit(3)
        elif file.suffix == ".png" and file.stem not in masks:
            try:
                masks[file.stem] = read_mask_png(file)
            except OSError as exc:
                click.echo(f"cannot decode mask {file}: {exc}", err=True)
                sys.exit(3)
    return masks


@main.command("eval-seg")
@click.argument("pred_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("truth_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--strict", is_flag=True,
              help="Require identical scene_id sets in PRED_DIR and TRUTH_DIR.")
@click.option("--out", "out_format", type=click.Choice(["csv", "json"]), default=None,
              help="csv: per-image scene_id,iou rows; json: full report. "
                   "Floats print with 6 decimals (round-half-even).")
def eval_seg(pred_dir, truth_dir, strict, out_format):
    """Score predicted masks against ground truth (RLE .json or .png,
    named <scene_id>.json/.png).

    Naming note: here cIoU is the per-image mean IoU (empty-vs-empty
    counts 1) and gIoU is the ratio of summed intersections to summed
    unions. Some reasoning-segmentation papers swap these two names;
    compare conventions before comparing numbers.
    """
    preds = _load_mask_dir(Path(pred_dir))
    truths = _load_mask_dir(Path(truth_dir))
    common = sorted(set(preds) & set(truths))
    if strict and set(preds) != set(truths):
        only_pred = sorted(set(preds) - set(truths))
        only_truth = sorted(set(truths) - set(preds))
        click.echo(
            f"scene_id sets differ (pred-only {only_pred}, truth-only {only_truth})",
            err=True,
        )
        sys.exit(2)
    if not common:
        click.echo("no overlapping scene_ids between pred and truth", err=True)
        sys.exit(2)
    if not strict:
        for skipped in sorted(set(preds) ^ set(truths)):
            click.echo(f"warning: {skipped!r} present on one side only, skipped",
                       err=True)

    try:
        pairs = [MaskPair(sid, preds[sid], truths[sid]) for sid in common]
    except BloombenchError as exc:
        click.echo(str(exc), err=True)
        sys.exit(3)
    report = seg_report(pairs)

    if out_format == "json":
        doc = {
            "n_images": report.n_images,
            "ciou": _f6(report.ciou),
            "ciou_stderr": _f6(report.ciou_stderr),
            "giou": _f6(report.giou),
            "giou_bootstrap_sd": _f6(report.giou_bootstrap_sd),
            "per_image": [
                {"scene_id": sid, "iou": _f6(iou)} for sid, iou in report.per_image
            ],
        }
        click.echo(json.dumps(doc, indent=2))
    elif out_format == "csv":
        click.echo("scene_id,iou")
        for sid, iou in report.per_image:
            click.echo(f"{sid},{_f6(iou)}")
        click.echo(
            f"cIoU {_f6(report.ciou)} gIoU {_f6(report.giou)} n {report.n_images}",
            err=True,
        )
    else:
        click.echo(f"n_images  {report.n_images}")
        click.echo(f"cIoU      {_f6(report.ciou)}  (stderr {_f6(report.ciou_stderr)})")
        click.echo(
            f"gIoU      {_f6(report.giou)}  (bootstrap sd {_f6(report.giou_bootstrap_sd)})"
        )


# --- eval-severity ----------------------------------------------------------------------


def parse_prediction(raw: str) -> int | None:
    """Parse a raw model answer to a level 1-5, or None when unscorable.

    Rule: a first character in "12345" wins; otherwise a string that
    parses as a number in [1, 5] is rounded half-even to the nearest
    level; anything else is unparsed (scored as the maximal residual 4).
    """
    if raw and raw[0] in "12345":
        return int(raw[0])
    try:
        value = float(raw)
    except ValueError:
        return None
    if math.isnan(value) or not 1.0 <= value <= 5.0:
        return None
    return int(round(value))


def _read_predictions(path: Path) -> dict[str, str]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        value_cols = [c for c in fields if c != "scene_id"]
        if "scene_id" not in fields or len(value_cols) != 1:
            raise ValueError(
                f"{path}: header must be scene_id plus exactly one prediction column"
            )
        col = value_cols[0]
        return {row["scene_id"]: row[col] for row in reader}


@main.command("eval-severity")
@click.argument("pred_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("truth_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--strict", is_flag=True,
              help="Require identical scene_id sets in both files.")
def eval_severity(pred_file, truth_file, strict):
    """Score raw severity answers against ground-truth labels.

    PRED_FILE: CSV scene_id,prediction with raw answer strings.
    TRUTH_FILE: CSV scene_id,cells_per_ml or scene_id,severity_level.
    Unparsable answers count as the maximal residual (4) and are
    reported in n_unparsed.
    """
    try:
        truth = sev.read_labels(truth_file)
        preds = _read_predictions(Path(pred_file))
    except (OSError, ValueError, BloombenchError) as exc:
        click.echo(str(exc), err=True)
        sys.exit(2)

    if strict and set(preds) != set(truth):
        click.echo(
            f"row mismatch: {len(preds)} predictions vs {len(truth)} truths "
            "with differing scene_ids",
            err=True,
        )
        sys.exit(2)
    common = sorted(set(preds) & set(truth))
    if not common:
        click.echo("no overlapping scene_ids between predictions and truth", err=True)
        sys.exit(2)
    if not strict:
        for skipped in sorted(set(preds) ^ set(truth)):
            click.echo(f"warning: {skipped!r} present on one side only, skipped",
                       err=True)

    residuals = []
    n_unparsed = 0
    for sid in common:
        level = parse_prediction(preds[sid])
        if level is None:
            n_unparsed += 1
            residuals.append(4.0)
        else:
            residuals.append(float(level - int(truth[sid])))
    mse = sum(r * r for r in residuals) / len(residuals)
    mae = sum(abs(r) for r in residuals) / len(residuals)
    click.echo(f"n           {len(residuals)}")
    click.echo(f"n_unparsed  {n_unparsed}")
    click.echo(f"MSE         {_f6(mse)}")
    click.echo(f"RMSE        {_f6(math.sqrt(mse))}")
    click.echo(f"MAE         {_f6(mae)}")


if __name__ == "__main__":
    main()
