"""Per-subject workspace layout.

::

    <root>/<subject>/
        manifest.json
        frames/<view>/000000.png ...
        masks/<view>.png
        cameras.json  scan.obj  landmarks.json  model.p3mm  ppg.csv
        maps/<view>/<semantic>.f32 + .json
        fit/fitted.obj  fit/fit_state.json
        textures/<semantic>.f32 + .json + .png
        reports/
        gt/maps/<view>/gt_<semantic>  gt/textures/gt_<semantic>

Views are two-digit, zero-padded directory names. Input locations come from the manifest's
``paths`` section and resolve against the subject directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..config import RunManifest, load_manifest
from ..core.errors import ManifestError
from ..core.security import safe_filename, validate_file_path
from .rawmap import Provenance

MANIFEST_NAME = "manifest.json"

_INPUT_EXTENSIONS = {
    "cameras": {".json"},
    "scan": {".obj"},
    "landmarks": {".json"},
    "model": {".p3mm"},
    "ppg": {".csv"},
}


def view_name(view_id: int) -> str:
    return f"{int(view_id):02d}"


def write_json(path: str | Path, payload: Any) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return p


@dataclass(frozen=True)
class Workspace:
    subject_dir: Path
    manifest: RunManifest

    @classmethod
    def open(cls, manifest_path: str | Path) -> Workspace:
        """Load the manifest; its directory becomes the subject directory."""
        p = Path(manifest_path)
        if not p.is_file():
            raise FileNotFoundError(str(p))
        return cls(p.resolve().parent, load_manifest(p))

    @classmethod
    def for_subject(cls, root: str | Path, manifest: RunManifest) -> Workspace:
        return cls(Path(root) / manifest.subject, manifest)

    @property
    def manifest_path(self) -> Path:
        return self.subject_dir / MANIFEST_NAME

    def provenance(self) -> Provenance:
        return Provenance(manifest_hash=self.manifest.content_hash(), seed=self.manifest.seed)

    def input_path(self, name: str) -> Path:
        """Resolve a manifest input (``cameras``, ``scan``, ...) without checking existence."""
        rel = getattr(self.manifest.paths, name, None)
        if rel is None:
            raise ManifestError(f"Manifest does not name an input for {name!r}")
        p = Path(rel)
        return p if p.is_absolute() else self.subject_dir / p

    def require_input(self, name: str) -> Path:
        """Resolve and validate an input file.

        Raises:
            FileNotFoundError: If the file is missing.
            ValueError: On a path with traversal or an unexpected extension.
        """
        p = self.input_path(name)
        return validate_file_path(
            p, allowed_extensions=_INPUT_EXTENSIONS.get(name), must_exist=True
        )

    def frames_dir(self, view_id: int) -> Path:
        return self.input_path("frames") / view_name(view_id)

    def mask_path(self, view_id: int) -> Path:
        return self.input_path("masks") / f"{view_name(view_id)}.png"

    def views(self) -> list[int]:
        """Manifest views, or every two-digit directory under ``frames``."""
        if self.manifest.views is not None:
            return sorted(self.manifest.views)
        frames = self.input_path("frames")
        if not frames.is_dir():
            raise FileNotFoundError(str(frames))
        return sorted(int(d.name) for d in frames.iterdir() if d.is_dir() and d.name.isdigit())

    def map_base(self, view_id: int, semantic: str) -> Path:
        return self.subject_dir / "maps" / view_name(view_id) / safe_filename(semantic)

    @property
    def fit_dir(self) -> Path:
        return self.subject_dir / "fit"

    @property
    def fitted_mesh_path(self) -> Path:
        return self.fit_dir / "fitted.obj"

    @property
    def fit_state_path(self) -> Path:
        return self.fit_dir / "fit_state.json"

    def texture_base(self, semantic: str) -> Path:
        return self.subject_dir / "textures" / safe_filename(semantic)

    def preview_path(self, semantic: str) -> Path:
        return self.subject_dir / "textures" / f"{safe_filename(semantic)}.png"

    @property
    def reports_dir(self) -> Path:
        return self.subject_dir / "reports"

    def gt_map_base(self, view_id: int, semantic: str) -> Path:
        return self.subject_dir / "gt" / "maps" / view_name(view_id) / f"gt_{semantic}"

    def gt_texture_base(self, semantic: str) -> Path:
        return self.subject_dir / "gt" / "textures" / f"gt_{semantic}"

    def require(self, path: Path, stage: str) -> Path:
        """Check a cross-stage dependency; the message names the stage that produces it."""
        if not path.exists():
            raise FileNotFoundError(f"{path} (run the '{stage}' stage first)")
        return path
