"""View assignment through pluggable classifier backends, and per-view clip selection."""

from __future__ import annotations

import abc
import enum
import importlib.util
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple

from .dicom import EchoClip

FLAG_BACKEND_FAILURE = "classifier-backend-failure"


class View(enum.Enum):
    PLAX = "PLAX"
    A2C = "A2C"
    A4C = "A4C"
    OTHER = "OTHER"


@dataclass(frozen=True)
class ViewLabel:
    view: View
    confidence: float

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


class ClassifierBackend(abc.ABC):
    """Maps a clip to a view label; total (unrecognized clips become OTHER).

    Instances must be deterministic. Backends that cannot be called from
    several threads at once set thread_safe False and the orchestrator
    serializes them.
    """

    name: str = "abstract"
    thread_safe: bool = True

    @abc.abstractmethod
    def classify(self, clip: EchoClip) -> ViewLabel:
        raise NotImplementedError


# Substrings looked up (case-insensitively) in the declared view hint.
_HINT_KEYWORDS = (
    ("plax", View.PLAX),
    ("parasternal long", View.PLAX),
    ("a2c", View.A2C),
    ("2ch", View.A2C),
    ("2-chamber", View.A2C),
    ("apical 2", View.A2C),
    ("two chamber", View.A2C),
    ("a4c", View.A4C),
    ("4ch", View.A4C),
    ("4-chamber", View.A4C),
    ("apical 4", View.A4C),
    ("four chamber", View.A4C),
)


class HintBackend(ClassifierBackend):
    """Reads the clip's declared view hint (series description keyword map)."""

    name = "hint"

    def classify(self, clip: EchoClip) -> ViewLabel:
        hint = (clip.declared_view_hint or "").lower()
        for keyword, view in _HINT_KEYWORDS:
            if keyword in hint:
                return ViewLabel(view, 1.0)
        return ViewLabel(View.OTHER, 0.0)


class ConstantBackend(ClassifierBackend):
    """Always answers the same label; for tests and failure-path exercises."""

    name = "constant"

    def __init__(self, view: View = View.A4C, confidence: float = 1.0):
        self.view = view
        self.confidence = confidence

    def classify(self, clip: EchoClip) -> ViewLabel:
        return ViewLabel(self.view, self.confidence)


@dataclass(frozen=True)
class ClipClassification:
    """A clip's label plus the provenance needed for the study report."""

    clip_id: str
    label: ViewLabel
    backend: str
    flags: frozenset = field(default_factory=frozenset)


def classify_view(clip: EchoClip, backend: ClassifierBackend) -> ClipClassification:
    """Label one clip, recording the backend name.

    A raising backend is not fatal: the clip is labeled OTHER with zero
    confidence and flagged, so the study still reaches the report stage.
    """
    try:
        label = backend.classify(clip)
    except Exception:
        return ClipClassification(clip.clip_id, ViewLabel(View.OTHER, 0.0),
                                  backend.name, frozenset({FLAG_BACKEND_FAILURE}))
    return ClipClassification(clip.clip_id, label, backend.name)


def select_clip(labeled: Sequence[Tuple[EchoClip, ViewLabel]], view: View,
                ) -> Optional[EchoClip]:
    """Pick the best clip for a view: most frames, then the latest retake.

    More frames means more heartbeats for the 5-beat average; ties go to the
    highest acquisition index (the retake). The residual clip-id tie-break
    keeps the choice permutation-invariant.
    """
    candidates = [clip for clip, label in labeled if label.view == view]
    if not candidates:
        return None
    return max(candidates, key=lambda c: (c.num_frames, c.acquisition_index, c.clip_id))


def load_external_backend(path: Path) -> ClassifierBackend:
    """Load a classifier plug-in: a Python file exposing build_backend()."""
    path = Path(path)
    spec = importlib.util.spec_from_file_location(f"echotriage_backend_{path.stem}", path)
    if spec is None or spec.loader is None:
        raise ImportError(f"cannot load backend module from {path}")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    if not hasattr(module, "build_backend"):
        raise ImportError(f"backend module {path} does not define build_backend()")
    backend = module.build_backend()
    if not (hasattr(backend, "classify") and hasattr(backend, "name")):
        raise ImportError(f"object from {path} does not satisfy the classifier contract")
    return backend
