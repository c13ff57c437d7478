"""Chamber masks, DICE overlap, the RLE sidecar format, and segmentation backends."""

from __future__ import annotations

import abc
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .dicom import EchoClip

# 4-connectivity: components touch through edges, not corners.
_CONNECTIVITY_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

POOL_THRESHOLD = 128  # blood pool is darker than this; myocardium brighter


class SegmentationError(Exception):
    pass


class DimensionMismatch(SegmentationError):
    pass


class MalformedSidecar(SegmentationError):
    pass


class Chamber(enum.Enum):
    LV = "LV"
    LA = "LA"


@dataclass(eq=False)
class ChamberMask:
    """Per-frame binary mask for one chamber.

    `bits` is a read-only boolean grid; an all-zero mask is legal but reports
    itself as degenerate so downstream volumetry can skip it.
    """

    chamber: Chamber
    frame_index: int
    bits: np.ndarray
    pixel_spacing_mm: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.ndim != 2 or self.bits.shape[0] < 1 or self.bits.shape[1] < 1:
            raise ValueError(f"mask grid must be 2-D and nonempty, got shape {self.bits.shape}")
        if self.frame_index < 0:
            raise ValueError("frame_index must be nonnegative")
        self.bits.setflags(write=False)

    @property
    def rows(self) -> int:
        return self.bits.shape[0]

    @property
    def cols(self) -> int:
        return self.bits.shape[1]

    @property
    def pixel_count(self) -> int:
        return int(self.bits.sum())

    @property
    def degenerate(self) -> bool:
        return not self.bits.any()

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChamberMask):
            return NotImplemented
        return (self.chamber == other.chamber
                and self.frame_index == other.frame_index
                and self.pixel_spacing_mm == other.pixel_spacing_mm
                and np.array_equal(self.bits, other.bits))


def dice(a: ChamberMask, b: ChamberMask) -> float:
    """Overlap score 2|A∩B| / (|A|+|B|); 1.0 when both masks are empty."""
    if a.bits.shape != b.bits.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.bits.shape} vs {b.bits.shape}")
    total = a.pixel_count + b.pixel_count
    if total == 0:
        return 1.0
    overlap = int(np.logical_and(a.bits, b.bits).sum())
    return 2.0 * overlap / total


# ---------------------------------------------------------------------------
# sidecar RLE format
#
# One record per frame, two lines:
#   <chamber>,<frame>,<rows>,<cols>
#   <run>,<run>,...
# Runs are row-major, alternating values starting with a zero run (which may
# be 0). Every run after the first is positive; runs sum to rows*cols.


def encode_mask(mask: ChamberMask) -> str:
    flat = mask.bits.ravel().astype(np.int8)
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:
        runs = [0] + runs
    header = f"{mask.chamber.value},{mask.frame_index},{mask.rows},{mask.cols}"
    return header + "\n" + ",".join(str(r) for r in runs) + "\n"


def decode_mask(record: str, pixel_spacing_mm: Optional[Tuple[float, float]] = None,
                ) -> ChamberMask:
    lines = record.strip("\n").split("\n")
    if len(lines) != 2:
        raise MalformedSidecar(f"expected header and runs lines, got {len(lines)} lines")
    header, runs_line = lines
    fields = header.split(",")
    if len(fields) != 4:
        raise MalformedSidecar(f"bad header {header!r}")
    chamber_name, frame_s, rows_s, cols_s = fields
    try:
        chamber = Chamber(chamber_name)
        frame_index = int(frame_s)
        rows = int(rows_s)
        cols = int(cols_s)
        runs = [int(r) for r in runs_line.split(",")]
    except (KeyError, ValueError) as exc:
        raise MalformedSidecar(f"unparseable record {header!r}") from exc
    if rows < 1 or cols < 1 or frame_index < 0:
        raise MalformedSidecar(f"bad dimensions in header {header!r}")
    if not runs or any(r < 0 for r in runs) or any(r == 0 for r in runs[1:]):
        raise MalformedSidecar(f"bad run lengths {runs_line!r}")
    if sum(runs) != rows * cols:
        raise MalformedSidecar(
            f"runs sum to {sum(runs)}, expected {rows * cols} for {header!r}")
    flat = np.zeros(rows * cols, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if value:
            flat[pos:pos + run] = True
        pos += run
        value = not value
    return ChamberMask(chamber, frame_index, flat.reshape(rows, cols), pixel_spacing_mm)


def encode_sidecar(masks: Sequence[ChamberMask]) -> str:
    return "".join(encode_mask(m) for m in masks)


def decode_sidecar(text: str, pixel_spacing_mm: Optional[Tuple[float, float]] = None,
                   ) -> List[ChamberMask]:
    lines = text.strip("\n").split("\n") if text.strip("\n") else []
    if len(lines) % 2 != 0:
        raise MalformedSidecar("sidecar must hold an even number of lines")
    return [decode_mask(lines[i] + "\n" + lines[i + 1], pixel_spacing_mm)
            for i in range(0, len(lines), 2)]


def sidecar_path(directory: Path, clip_id: str, chamber: Chamber) -> Path:
    return Path(directory) / f"{clip_id}.{chamber.value}.masks.rle"


def write_sidecar(directory: Path, clip_id: str, masks: Sequence[ChamberMask]) -> Path:
    if not masks:
        raise ValueError("refusing to write an empty sidecar")
    chambers = {m.chamber for m in masks}
    if len(chambers) != 1:
        raise ValueError("a sidecar holds masks for exactly one chamber")
    path = sidecar_path(directory, clip_id, masks[0].chamber)
    path.write_text(encode_sidecar(masks))
    return path


def read_sidecar(path: Path, pixel_spacing_mm: Optional[Tuple[float, float]] = None,
                 ) -> List[ChamberMask]:
    return decode_sidecar(Path(path).read_text(), pixel_spacing_mm)


# ---------------------------------------------------------------------------
# backends


class SegmentationBackend(abc.ABC):
    """Produces one mask per clip frame; deterministic for a fixed instance.

    Backends safe to call from several threads keep thread_safe True; the
    orchestrator serializes calls to the rest.
    """

    name: str = "abstract"
    thread_safe: bool = True

    @abc.abstractmethod
    def segment(self, clip: EchoClip, view, chamber: Chamber) -> List[ChamberMask]:
        raise NotImplementedError


class ThresholdBackend(SegmentationBackend):
    """Reference segmenter for dark-pool-on-bright-myocardium images.

    Thresholds below POOL_THRESHOLD and keeps the largest 4-connected
    component; an empty result stays an (all-zero, degenerate) mask.
    """

    name = "threshold"

    def segment(self, clip: EchoClip, view, chamber: Chamber) -> List[ChamberMask]:
        masks = []
        for idx in range(clip.num_frames):
            pool = clip.frames[idx] < POOL_THRESHOLD
            masks.append(ChamberMask(chamber, idx, _largest_component(pool),
                                     clip.pixel_spacing_mm))
        return masks


class SidecarBackend(SegmentationBackend):
    """Replays masks stored next to the study (e.g. phantom ground truth)."""

    name = "sidecar"

    def __init__(self, directory: Path):
        self.directory = Path(directory)

    def segment(self, clip: EchoClip, view, chamber: Chamber) -> List[ChamberMask]:
        path = sidecar_path(self.directory, clip.clip_id, chamber)
        masks = read_sidecar(path, clip.pixel_spacing_mm)
        return masks


def _largest_component(pool: np.ndarray) -> np.ndarray:
    labels, count = ndimage.label(pool, structure=_CONNECTIVITY_4)
    if count == 0:
        return np.zeros_like(pool, dtype=bool)
    sizes = ndimage.sum_labels(pool, labels, index=range(1, count + 1))
    return labels == (int(np.argmax(sizes)) + 1)


def segment_clip(clip: EchoClip, view, chamber: Chamber,
                 backend: SegmentationBackend) -> List[ChamberMask]:
    """Run a backend over a clip and validate its output contract."""
    masks = backend.segment(clip, view, chamber)
    if len(masks) != clip.num_frames:
        raise SegmentationError(
            f"backend {backend.name!r} returned {len(masks)} masks "
            f"for a {clip.num_frames}-frame clip")
    for mask in masks:
        if mask.bits.shape != (clip.rows, clip.cols):
            raise DimensionMismatch(
                f"backend {backend.name!r} mask shape {mask.bits.shape} "
                f"does not match clip {(clip.rows, clip.cols)}")
    return masks
