"""Service configuration.

JSON config file keys:

    store_root     (required) scene store directory
    export_root    (required) where POST /export writes
    work_root      (optional) session log + staged masks; defaults to a
                   `bloombench_work` directory next to the store root
    index          (optional) default IndexSpec, e.g.
                   {"kind": "normalized_difference", "band_a": "B05", "band_b": "B04"}
    preview_bands  (optional) {"r": "B04", "g": "B03", "b": "B02"}
    k              (optional) default candidate count, 3
    post           (optional) PostProcessConfig fields
    listen         (optional) "host:port", default "127.0.0.1:8008"

The BLOOMBENCH_CONFIG environment variable, when set, overrides the
config path given on the command line.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..mask import PostProcessConfig
from ..promptseg import NDCI, DEFAULT_CANDIDATES, IndexSpec

DEFAULT_PREVIEW_BANDS = {"r": "B04", "g": "B03", "b": "B02"}


@dataclass(frozen=True)
class ServiceConfig:
    store_root: Path
    export_root: Path
    work_root: Path
    index: IndexSpec = NDCI
    preview_bands: dict = field(default_factory=lambda: dict(DEFAULT_PREVIEW_BANDS))
    k: int = DEFAULT_CANDIDATES
    post: PostProcessConfig = PostProcessConfig()
    listen: str = "127.0.0.1:8008"

    @property
    def host(self) -> str:
        return self.listen.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen.rsplit(":", 1)[1])


def load_config(path: str | Path | None) -> ServiceConfig:
    """Load config JSON; BLOOMBENCH_CONFIG overrides `path` when set."""
    env_path = os.environ.get("BLOOMBENCH_CONFIG")
    if env_path:
        path = env_path
    if path is None:
        raise FileNotFoundError("no config path given and BLOOMBENCH_CONFIG unset")
    cfg_path = Path(path)
    obj = json.loads(cfg_path.read_text(encoding="utf-8"))
    store_root = Path(obj["store_root"])
    work_root = (
        Path(obj["work_root"])
        if "work_root" in obj
        else store_root.parent / "bloombench_work"
    )
    return ServiceConfig(
        store_root=store_root,
        export_root=Path(obj["export_root"]),
        work_root=work_root,
        index=IndexSpec.from_json(obj["index"]) if "index" in obj else NDCI,
        preview_bands=dict(obj.get("preview_bands", DEFAULT_PREVIEW_BANDS)),
        k=int(obj.get("k", DEFAULT_CANDIDATES)),
        post=PostProcessConfig.from_json(obj.get("post", {})),
        listen=str(obj.get("listen", "127.0.0.1:8008")),
    )
