"""Append-only session log.

Every state change is one JSON line appended and fsynced *before* the
caller acknowledges the request, so a hard kill never loses an
acknowledged session. Startup replays the log in order to rebuild the
in-memory session table; there is no other database.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

LOG_NAME = "sessions.jsonl"


class SessionLog:
    def __init__(self, work_root: str | Path):
        self.work_root = Path(work_root)
        self.work_root.mkdir(parents=True, exist_ok=True)
        (self.work_root / "masks").mkdir(exist_ok=True)
        self.path = self.work_root / LOG_NAME
        self.path.touch(exist_ok=True)

    def mask_path(self, session_id: str) -> Path:
        return self.work_root / "masks" / f"{session_id}.json"

    def append(self, event: dict) -> None:
        """Durable append: write, flush, fsync, then return."""
        line = json.dumps(event, ensure_ascii=False) + "\n"
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())

    def replay(self) -> Iterator[dict]:
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)
