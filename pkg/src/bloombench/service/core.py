"""Curation sessions: the machine side of the human evaluation loop.

An annotator opens a session on a scene, submits prompt sets (each
submission replaces the candidate masks), and finally decides:

* accept — keep a candidate by index, or an explicitly supplied mask;
* refine — submit a hand-edited mask, which is re-post-processed;
* reject — keep nothing, but record that the scene was reviewed.

Decided sessions are immutable. Export collects the staged masks of all
accepted/refined sessions (latest decision per scene wins), joins
severity labels from the store's labels.csv when present, and writes a
deterministic manifest, so re-exports differ only in their timestamp.
"""

from __future__ import annotations

import json
import shutil
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from ..errors import (
    BadCandidateIndex,
    BloombenchError,
    ExportPathUnwritable,
    InvalidDecision,
    MalformedMask,
    NoCandidates,
    RunSumMismatch,
    SessionClosed,
    UnknownScene,
    UnknownSession,
)
from ..mask import PostProcessConfig, RleMask, decode_rle, encode_rle, postprocess
from ..promptseg import CandidateSet, PromptSet, generate_candidates, score_field
from ..raster import Scene, list_scene_dirs, load_scene
from ..severity import read_labels, write_labels
from .config import ServiceConfig
from .persistence import SessionLog

MANIFEST_VERSION = "1"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _parse_ts(value: str) -> datetime:
    ts = datetime.fromisoformat(value)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


@dataclass(frozen=True)
class Decision:
    kind: str  # accept | reject | refine
    annotator: str
    chosen_candidate: int | None = None
    final_mask: RleMask | None = None
    note: str | None = None

    def __post_init__(self):
        if self.kind not in ("accept", "reject", "refine"):
            raise InvalidDecision(f"unknown decision kind {self.kind!r}")
        if not self.annotator:
            raise InvalidDecision("annotator is required")
        if self.kind == "accept" and self.chosen_candidate is None and self.final_mask is None:
            raise InvalidDecision("accept needs chosen_candidate or final_mask")
        if self.kind == "refine" and self.final_mask is None:
            raise InvalidDecision("refine needs final_mask")

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind, "annotator": self.annotator}
        if self.chosen_candidate is not None:
            out["chosen_candidate"] = self.chosen_candidate
        if self.final_mask is not None:
            out["final_mask"] = self.final_mask.to_json()
        if self.note is not None:
            out["note"] = self.note
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Decision":
        if not isinstance(obj, dict):
            raise InvalidDecision("decision must be a JSON object")
        final = obj.get("final_mask")
        if final is not None:
            try:
                final = RleMask.from_json(final)
            except RunSumMismatch as exc:
                raise MalformedMask(str(exc)) from exc
        chosen = obj.get("chosen_candidate")
        return cls(
            kind=obj.get("kind", ""),
            annotator=obj.get("annotator", ""),
            chosen_candidate=int(chosen) if chosen is not None else None,
            final_mask=final,
            note=obj.get("note"),
        )


@dataclass
class Session:
    session_id: str
    scene_id: str
    state: str  # open | decided
    prompts_history: list[PromptSet] = field(default_factory=list)
    candidates: CandidateSet | None = None
    decision: Decision | None = None
    created_at: str = ""
    updated_at: str = ""
    # internals, not part of the API payload
    staged_mask: str | None = None
    last_post: PostProcessConfig | None = None

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id,
            "scene_id": self.scene_id,
            "state": self.state,
            "prompts_history": [p.to_json() for p in self.prompts_history],
            "candidates": self.candidates.to_json() if self.candidates else None,
            "decision": self.decision.to_json() if self.decision else None,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }


class CurationService:
    """Single-node session manager over an append-only log.

    All mutations happen under one lock and hit the log (fsync) before
    they are acknowledged; concurrent decides on one session serialize,
    and the loser gets SessionClosed.
    """

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.log = SessionLog(config.work_root)
        self.sessions: dict[str, Session] = {}
        self._scene_cache: dict[str, Scene] = {}
        self._lock = threading.Lock()
        for event in self.log.replay():
            self._apply(event)

    # --- scenes ------------------------------------------------------------

    def scene_summaries(self) -> list[dict]:
        out = []
        for scene_dir in list_scene_dirs(self.config.store_root):
            try:
                scene = self._scene(scene_dir.name)
            except BloombenchError:
                continue  # corrupt scenes are invisible to annotators
            out.append(
                {
                    "scene_id": scene.scene_id,
                    "width": scene.width,
                    "height": scene.height,
                    "bands": scene.band_names,
                    "acquisition_time": scene.acquisition_time,
                }
            )
        return out

    def _scene(self, scene_id: str) -> Scene:
        if scene_id in self._scene_cache:
            return self._scene_cache[scene_id]
        scene_dir = Path(self.config.store_root) / scene_id
        if not scene_dir.is_dir():
            raise UnknownScene(f"scene {scene_id!r} not in store")
        scene = load_scene(scene_dir)
        self._scene_cache[scene_id] = scene
        return scene

    def scene(self, scene_id: str) -> Scene:
        return self._scene(scene_id)

    def default_score_field(self, scene_id: str):
        return score_field(self._scene(scene_id), self.config.index)

    # --- event replay --------------------------------------------------------

    def _apply(self, event: dict) -> None:
        kind = event["event"]
        if kind == "session_created":
            s = Session(
                session_id=event["session_id"],
                scene_id=event["scene_id"],
                state="open",
                created_at=event["at"],
                updated_at=event["at"],
            )
            self.sessions[s.session_id] = s
        elif kind == "prompts_submitted":
            s = self.sessions[event["session_id"]]
            s.prompts_history.append(PromptSet.from_json(event["prompts"]))
            s.candidates = CandidateSet.from_json(event["candidates"])
            s.last_post = PostProcessConfig.from_json(event["post"])
            s.updated_at = event["at"]
        elif kind == "decided":
            s = self.sessions[event["session_id"]]
            s.decision = Decision.from_json(event["decision"])
            s.staged_mask = event.get("staged_mask")
            s.state = "decided"
            s.updated_at = event["at"]
        else:
            raise ValueError(f"unknown event kind {kind!r} in session log")

    # --- session operations ---------------------------------------------------

    def create_session(self, scene_id: str) -> Session:
        with self._lock:
            self._scene(scene_id)  # raises UnknownScene
            event = {
                "event": "session_created",
                "session_id": str(uuid.uuid4()),
                "scene_id": scene_id,
                "at": _now(),
            }
            self.log.append(event)
            self._apply(event)
            return self.sessions[event["session_id"]]

    def _open_session(self, session_id: str) -> Session:
        if session_id not in self.sessions:
            raise UnknownSession(f"session {session_id!r} does not exist")
        s = self.sessions[session_id]
        if s.state != "open":
            raise SessionClosed(f"session {session_id!r} is already decided")
        return s

    def submit_prompts(
        self,
        session_id: str,
        prompts_obj: dict,
        k: int | None = None,
        post_obj: dict | None = None,
    ) -> CandidateSet:
        with self._lock:
            s = self._open_session(session_id)
            prompts = PromptSet.from_json(prompts_obj)
            post = (
                PostProcessConfig.from_json(post_obj)
                if post_obj is not None
                else self.config.post
            )
            scene = self._scene(s.scene_id)
            candidates = generate_candidates(
                scene, prompts, self.config.index, k or self.config.k, post
            )
            event = {
                "event": "prompts_submitted",
                "session_id": session_id,
                "prompts": prompts.to_json(),
                "k": k or self.config.k,
                "post": post.to_json(),
                "candidates": candidates.to_json(),
                "at": _now(),
            }
            self.log.append(event)
            self._apply(event)
            return candidates

    def decide(self, session_id: str, decision_obj: dict) -> Session:
        with self._lock:
            s = self._open_session(session_id)
            decision = Decision.from_json(decision_obj)
            staged_rel = None
            if decision.kind in ("accept", "refine"):
                mask = self._resolve_final_mask(s, decision)
                staged_path = self.log.mask_path(session_id)
                staged_path.write_text(
                    json.dumps(encode_rle(mask).to_json()) + "\n", encoding="utf-8"
                )
                staged_rel = f"masks/{session_id}.json"
            event = {
                "event": "decided",
                "session_id": session_id,
                "decision": decision.to_json(),
                "staged_mask": staged_rel,
                "at": _now(),
            }
            self.log.append(event)
            self._apply(event)
            return s

    def _resolve_final_mask(self, s: Session, decision: Decision):
        if decision.kind == "accept" and decision.final_mask is None:
            if s.candidates is None:
                raise NoCandidates(f"session {s.session_id!r} has no candidates")
            idx = decision.chosen_candidate
            if not 0 <= idx < len(s.candidates.candidates):
                raise BadCandidateIndex(
                    f"index {idx} outside 0..{len(s.candidates.candidates) - 1}"
                )
            return s.candidates.candidates[idx].mask  # already post-processed
        scene = self._scene(s.scene_id)
        rle = decision.final_mask
        if (rle.width, rle.height) != (scene.width, scene.height):
            raise MalformedMask(
                f"mask {rle.width}x{rle.height} does not match scene "
                f"{scene.width}x{scene.height}"
            )
        return postprocess(decode_rle(rle), s.last_post or self.config.post)

    def list_sessions(
        self, state: str | None = None, annotator: str | None = None
    ) -> list[Session]:
        out = []
        for s in self.sessions.values():
            if state and s.state != state:
                continue
            if annotator and (s.decision is None or s.decision.annotator != annotator):
                continue
            out.append(s)
        out.sort(key=lambda s: (s.created_at, s.session_id))
        return out

    # --- export ----------------------------------------------------------------

    def export(self, filter_obj: dict | None = None) -> dict:
        filter_obj = filter_obj or {}
        annotator = filter_obj.get("annotator")
        date_from = filter_obj.get("from")
        date_to = filter_obj.get("to")

        with self._lock:
            chosen: dict[str, Session] = {}
            for s in self.sessions.values():
                if s.state != "decided" or s.decision.kind == "reject":
                    continue
                if annotator and s.decision.annotator != annotator:
                    continue
                ts = _parse_ts(s.updated_at)
                if date_from and ts < _parse_ts(date_from):
                    continue
                if date_to and ts > _parse_ts(date_to):
                    continue
                prev = chosen.get(s.scene_id)
                if prev is None or (s.updated_at, s.session_id) > (
                    prev.updated_at,
                    prev.session_id,
                ):
                    chosen[s.scene_id] = s

            export_root = Path(self.config.export_root)
            try:
                (export_root / "masks").mkdir(parents=True, exist_ok=True)
                probe = export_root / ".write_probe"
                probe.write_text("")
                probe.unlink()
            except OSError as exc:
                raise ExportPathUnwritable(str(exc)) from exc

            labels_csv = Path(self.config.store_root) / "labels.csv"
            labels = read_labels(labels_csv) if labels_csv.is_file() else {}

            entries = []
            exported_labels = {}
            for scene_id in sorted(chosen):
                s = chosen[scene_id]
                scene = self._scene(scene_id)
                staged = self.log.work_root / s.staged_mask
                rle = RleMask.from_json(json.loads(staged.read_text(encoding="utf-8")))
                if (rle.width, rle.height) != (scene.width, scene.height):
                    raise MalformedMask(
                        f"staged mask for {scene_id!r} has wrong dimensions"
                    )
                rel = f"masks/{scene_id}.json"
                shutil.copyfile(staged, export_root / rel)
                entry = {
                    "scene_id": scene_id,
                    "mask_path": rel,
                    "provenance": s.session_id,
                    "annotator": s.decision.annotator,
                }
                if scene_id in labels:
                    entry["severity_level"] = int(labels[scene_id])
                    exported_labels[scene_id] = labels[scene_id]
                entries.append(entry)

            manifest = {
                "version": MANIFEST_VERSION,
                "created_at": _now(),
                "entries": entries,
            }
            (export_root / "manifest.json").write_text(
                json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
            )
            if exported_labels:
                write_labels(exported_labels, export_root / "labels.csv")
            return manifest
