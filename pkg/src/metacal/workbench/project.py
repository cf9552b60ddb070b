"""Project directory, manifest and artifact registry for the staged workflow.

The manifest records every artifact with its sha256 and, for each completed
stage, the checksums of the inputs it consumed.  A stage is current only if
its own outputs are intact and every upstream stage it read from is current
with the same checksums, so re-running an upstream step invalidates
everything downstream of it.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

from ..errors import IntegrityError, StageError
from ..kriging import KrigingModel

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "metacal.project"
MANIFEST_VERSION = 1
PROJECT_ENV = "METACAL_PROJECT"
DEFAULT_MASTER_SEED = 20150801

# stage -> upstream stages it reads from
STAGE_DEPS = {
    "synth-obs": (),
    "design": ("synth-obs",),
    "evaluate": ("synth-obs", "design"),
    "fit": ("evaluate",),
    "validate": ("fit",),
    "sobol": ("fit",),
    "pca": ("evaluate",),
    "stats": ("evaluate",),
    "calibrate": ("fit",),
    "pareto": ("fit",),
    "check-optimum": ("calibrate",),
}


def stage_seed(master: int, stage: str) -> int:
    """Stable 63-bit seed derived from the master seed and a stage name."""
    digest = hashlib.sha256(f"{int(master)}/{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def default_project_dir() -> Path:
    return Path(os.environ.get(PROJECT_ENV, "."))


class Project:
    """A workflow directory holding ``manifest.json`` and all artifacts."""

    def __init__(self, root, master_seed: int | None = None):
        self.root = Path(root)
        path = self.root / MANIFEST_NAME
        if path.exists():
            try:
                data = json.loads(path.read_text())
            except json.JSONDecodeError as exc:
                raise IntegrityError(f"{path}: manifest is not valid JSON") from exc
            if data.get("format") != MANIFEST_FORMAT or data.get("version") != MANIFEST_VERSION:
                raise IntegrityError(f"{path}: not a version {MANIFEST_VERSION} project manifest")
            self.data = data
        else:
            self.data = {"format": MANIFEST_FORMAT, "version": MANIFEST_VERSION,
                         "master_seed": DEFAULT_MASTER_SEED, "files": {}, "stages": {}}
        if master_seed is not None:
            self.data["master_seed"] = int(master_seed)

    @property
    def master_seed(self) -> int:
        return int(self.data["master_seed"])

    def seed(self, stage: str) -> int:
        return stage_seed(self.master_seed, stage)

    def path(self, name: str) -> Path:
        return self.root / name

    def save(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        text = json.dumps(self.data, indent=2, sort_keys=True) + "\n"
        tmp = self.root / (MANIFEST_NAME + ".tmp")
        tmp.write_text(text)
        tmp.replace(self.root / MANIFEST_NAME)

    # -- artifacts -----------------------------------------------------------

    def register(self, name: str, stage: str) -> None:
        self.data["files"][name] = {"sha256": sha256_file(self.path(name)), "stage": stage}

    def has_file(self, name: str) -> bool:
        return name in self.data["files"]

    def verify(self, name: str) -> Path:
        """Path of a registered artifact whose contents still match the manifest."""
        entry = self.data["files"].get(name)
        if entry is None:
            raise StageError(f"artifact {name} is not registered in the manifest")
        p = self.path(name)
        if not p.exists():
            raise StageError(f"manifest references missing file {name}")
        if sha256_file(p) != entry["sha256"]:
            raise IntegrityError(f"checksum mismatch for {name}")
        return p

    def read_text(self, name: str) -> str:
        return self.verify(name).read_text()

    def files_of(self, stage: str) -> list[str]:
        return sorted(n for n, e in self.data["files"].items() if e["stage"] == stage)

    # -- stages --------------------------------------------------------------

    def stage_info(self, stage: str) -> dict | None:
        return self.data["stages"].get(stage)

    def is_current(self, stage: str, _seen=None) -> bool:
        info = self.stage_info(stage)
        if info is None:
            return False
        for name in info["outputs"]:
            entry = self.data["files"].get(name)
            if entry is None or entry["sha256"] != info["outputs"][name]:
                return False
        for dep, recorded in info["inputs"].items():
            dep_info = self.stage_info(dep)
            if dep_info is None or dep_info["outputs"] != recorded or not self.is_current(dep):
                return False
        return True

    def require(self, stage: str) -> None:
        """Check that every upstream stage of ``stage`` is complete and current."""
        for dep in STAGE_DEPS[stage]:
            if self.stage_info(dep) is None:
                raise StageError(f"stage {stage} requires {dep}, which has not been run")
            if not self.is_current(dep):
                raise StageError(f"stage {dep} is stale; re-run it before {stage}")
            for name in self.stage_info(dep)["outputs"]:
                self.verify(name)

    def complete(self, stage: str, outputs: list[str], meta: dict | None = None, merge: bool = False) -> None:
        """Register ``outputs`` and mark ``stage`` done against the current upstream state.

        With ``merge`` the outputs are added to those already recorded (stages
        such as ``calibrate`` accumulate one artifact set per goal).
        """
        for name in outputs:
            self.register(name, stage)
        inputs = {dep: dict(self.stage_info(dep)["outputs"]) for dep in STAGE_DEPS[stage]}
        previous = self.stage_info(stage) if merge else None
        if previous is not None and previous["inputs"] != inputs:
            previous = None  # upstream changed: earlier results are void
        recorded = dict(previous["outputs"]) if previous else {}
        recorded.update({n: self.data["files"][n]["sha256"] for n in outputs})
        info = {
            "outputs": dict(sorted(recorded.items())),
            "inputs": inputs,
            "meta": {**(previous.get("meta", {}) if previous else {}), **(meta or {})},
        }
        self.data["stages"][stage] = info
        self.save()

    def completed_stages(self) -> list[str]:
        return [s for s in STAGE_DEPS if self.stage_info(s) is not None]


def save_models(project: Project, models, kind: str = "rmse", stage: str = "fit") -> list[str]:
    """Write one JSON document per station model; returns the artifact names."""
    (project.root / "models").mkdir(parents=True, exist_ok=True)
    names = []
    for m in models:
        name = f"models/{kind}_{m.station_id}.json"
        project.path(name).write_text(m.dumps() + "\n")
        names.append(name)
    return names


def load_models(project: Project, kind: str = "rmse", stations=None) -> list[KrigingModel]:
    """Load checksum-verified station models written by :func:`save_models`."""
    info = project.stage_info("fit")
    if info is None:
        raise StageError("stage fit has not been run")
    ids = stations if stations is not None else project.data["stages"]["fit"]["meta"]["station_ids"]
    models = []
    for sid in ids:
        name = f"models/{kind}_{sid}.json"
        text = project.read_text(name)
        try:
            models.append(KrigingModel.loads(text))
        except IntegrityError as exc:
            raise IntegrityError(f"{name}: {exc}") from exc
    return models
