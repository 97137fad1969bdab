"""Run artifacts: output configuration, field CSVs, manifests and file names."""

from vorstab.storage.config import OutputConfig
from vorstab.storage.fields import read_field, write_field
from vorstab.storage.manifest import RunManifest, sha256_file

__all__ = [
    "OutputConfig",
    "RunManifest",
    "read_field",
    "write_field",
    "sha256_file",
]
