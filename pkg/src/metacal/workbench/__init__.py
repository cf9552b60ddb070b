"""Staged calibration workflow with a checksummed project manifest."""

from .cli import main
from .project import Project, load_models, save_models, stage_seed

__all__ = ["main", "Project", "load_models", "save_models", "stage_seed"]
