from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from vorstab.storage.paths import manifest_path, relative_to


@dataclass(slots=True)
class RunManifest:
    """Provenance record written last into every run directory."""

    out_dir: Path
    command: list[str] = field(default_factory=lambda: list(sys.argv))
    config_hashes: dict[str, str] = field(default_factory=dict)
    grid: dict[str, Any] = field(default_factory=dict)
    tolerances: dict[str, float] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    wall_time: float = 0.0
    created_at: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat()
    )

    @property
    def path(self) -> Path:
        return manifest_path(Path(self.out_dir))

    def add_config(self, config_path: str | Path) -> None:
        """Record the sha256 of a consumed configuration file."""
        config_path = Path(config_path)
        self.config_hashes[str(config_path)] = sha256_file(config_path)

    def add_output(self, path: str | Path) -> None:
        name = relative_to(Path(self.out_dir), Path(path))
        if name not in self.outputs:
            self.outputs.append(name)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data.pop("out_dir")
        return data

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        """Load a manifest from disk."""
        path = Path(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        return cls(out_dir=path.parent, **data)

    def validate(self) -> list[str]:
        """Return listed outputs that do not exist."""
        return [name for name in self.outputs if not (Path(self.out_dir) / name).exists()]

    def save(self) -> Path:
        """Persist manifest JSON atomically via a temporary file and rename."""
        target = self.path
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        os.replace(tmp, target)
        return target


def sha256_file(path: Path) -> str:
    """Compute sha256 for a file in streaming chunks."""
    h = hashlib.sha256()
    with path.open("rb") as f:
        for chunk in iter(lambda: f.read(1024 * 1024), b""):
            h.update(chunk)
    return h.hexdigest()
