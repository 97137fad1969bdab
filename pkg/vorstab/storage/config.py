from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


@dataclass(slots=True)
class OutputConfig:
    """Where a run writes its artifacts and log file."""

    base_path: Path | str = Path("runs")
    log_name: str = "run.log"

    def resolve_base(self) -> Path:
        """Expand and resolve ``base_path`` to an absolute Path."""
        return Path(self.base_path).expanduser().resolve()

    def log_path(self) -> Path:
        return self.resolve_base() / "logs" / self.log_name
