from __future__ import annotations

from pathlib import Path

MANIFEST_NAME = "manifest.json"
REPORT_NAME = "report.json"
EIGEN_NAME = "eigen.json"
ASCENT_NAME = "ascent.json"
SERIES_NAME = "series.csv"
SUMMARY_NAME = "summary.json"


def snapshot_name(index: int) -> str:
    """Return ``snap_<index>.csv``."""
    if index < 0:
        raise ValueError(f"snapshot index must be >= 0, got {index}")
    return f"snap_{index}.csv"


def eigenfield_name(group: int, member: int) -> str:
    """File name of member ``member`` of eigenvalue group ``group``."""
    return f"eig_{group}_{member}.csv"


def manifest_path(out_dir: Path) -> Path:
    """Return manifest.json path under a run directory."""
    return out_dir / MANIFEST_NAME


def relative_to(out_dir: Path, path: Path) -> str:
    """Path of ``path`` relative to the run directory, as stored in manifests."""
    return Path(path).resolve().relative_to(Path(out_dir).resolve()).as_posix()
