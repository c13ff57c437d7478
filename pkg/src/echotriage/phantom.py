"""Synthetic echo studies with analytically known volumes and LVEF.

A phantom is a contracting prolate spheroid seen in long-axis section: per
frame the image shows a dark elliptical blood pool on a bright background,
and the ground-truth mask is the rasterized ellipse. Single-plane disks are
exact for this geometry, so the phantom isolates discretization error from
model error in end-to-end checks.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .dicom import EchoClip
from .segmentation import Chamber, ChamberMask

BACKGROUND_INTENSITY = 200
POOL_INTENSITY = 40
NOISE_AMPLITUDE = 10  # uniform +/- range; keeps the pool safely below threshold 128
FRAME_INTERVAL_MS = 40.0
CANVAS_MARGIN_PX = 4


class CanvasTooSmall(Exception):
    pass


@dataclass(frozen=True)
class PhantomSpec:
    """Contracting-ellipse parameters; semi-axes in mm.

    The radial semi-axis swings from radial_semi_axis_ed_mm at end-diastole
    down to radial_semi_axis_es_mm at end-systole on a cosine profile, so
    frame 0 of every cycle is exactly ED and the half-cycle frame exactly ES.
    """

    long_semi_axis_mm: float = 40.0
    radial_semi_axis_ed_mm: float = 30.0
    radial_semi_axis_es_mm: float = 21.0
    frames_per_cycle: int = 20
    n_cycles: int = 3
    pixel_spacing_mm: float = 0.5
    noise_seed: int = 0
    rows: Optional[int] = None  # None: auto-size the canvas to fit the ED ellipse
    cols: Optional[int] = None

    def __post_init__(self):
        if self.long_semi_axis_mm <= 0 or self.radial_semi_axis_ed_mm <= 0:
            raise ValueError("semi-axes must be positive")
        if not (0 < self.radial_semi_axis_es_mm <= self.radial_semi_axis_ed_mm):
            raise ValueError("ES semi-axis must lie in (0, ED semi-axis]")
        if self.frames_per_cycle < 8:
            raise ValueError("need at least 8 frames per cycle")
        if self.n_cycles < 1:
            raise ValueError("need at least one cycle")
        if self.pixel_spacing_mm <= 0:
            raise ValueError("pixel spacing must be positive")

    @property
    def num_frames(self) -> int:
        return self.frames_per_cycle * self.n_cycles

    def radial_semi_axis_at(self, frame: int) -> float:
        swing = self.radial_semi_axis_ed_mm - self.radial_semi_axis_es_mm
        phase = 2.0 * math.pi * frame / self.frames_per_cycle
        return self.radial_semi_axis_ed_mm - swing * (1.0 - math.cos(phase)) / 2.0


@dataclass(frozen=True)
class AnalyticTruth:
    edv_ml: float
    esv_ml: float
    lvef_pct: float


def analytic_truth(spec: PhantomSpec) -> AnalyticTruth:
    """Prolate-spheroid volumes (4/3)πab² and the LVEF they imply."""
    a = spec.long_semi_axis_mm
    edv = (4.0 / 3.0) * math.pi * a * spec.radial_semi_axis_ed_mm ** 2 / 1000.0
    esv = (4.0 / 3.0) * math.pi * a * spec.radial_semi_axis_es_mm ** 2 / 1000.0
    ratio = spec.radial_semi_axis_es_mm / spec.radial_semi_axis_ed_mm
    return AnalyticTruth(edv_ml=edv, esv_ml=esv, lvef_pct=100.0 * (1.0 - ratio ** 2))


def spec_for_target_lvef(lvef_pct: float, **kwargs) -> PhantomSpec:
    """A spec whose analytic LVEF equals the target, by shrinking the ES semi-axis."""
    if not (0.0 <= lvef_pct < 100.0):
        raise ValueError("target LVEF must lie in [0, 100)")
    base = PhantomSpec(**kwargs) if kwargs else PhantomSpec()
    b_es = base.radial_semi_axis_ed_mm * math.sqrt(1.0 - lvef_pct / 100.0)
    fields = {**base.__dict__, "radial_semi_axis_es_mm": b_es}
    return PhantomSpec(**fields)


def _phantom_id(spec: PhantomSpec, study_id: str, view_hint: str) -> str:
    digest = hashlib.sha256(f"{spec!r}|{study_id}|{view_hint}".encode()).hexdigest()
    return f"{study_id}.{int(digest[:12], 16)}"


def _canvas_shape(spec: PhantomSpec) -> Tuple[int, int]:
    if (spec.rows is None) != (spec.cols is None):
        raise ValueError("give both rows and cols, or neither")
    if spec.rows is None:
        cols = int(math.ceil(2 * spec.long_semi_axis_mm / spec.pixel_spacing_mm))
        rows = int(math.ceil(2 * spec.radial_semi_axis_ed_mm / spec.pixel_spacing_mm))
        return rows + 2 * CANVAS_MARGIN_PX, cols + 2 * CANVAS_MARGIN_PX
    return spec.rows, spec.cols


def _ellipse_bits(rows: int, cols: int, spacing: float, a_mm: float, b_mm: float,
                  ) -> np.ndarray:
    cy = (rows - 1) / 2.0
    cx = (cols - 1) / 2.0
    y = (np.arange(rows)[:, None] - cy) * spacing
    x = (np.arange(cols)[None, :] - cx) * spacing
    return (x / a_mm) ** 2 + (y / b_mm) ** 2 <= 1.0


def render_phantom(spec: PhantomSpec, study_id: str = "1.2.826.0.1.55555",
                   view_hint: str = "A4C", acquisition_index: int = 1,
                   ) -> Tuple[EchoClip, List[ChamberMask]]:
    """Render the clip and its per-frame ground-truth masks.

    Deterministic: a fixed spec and seed give bit-identical frames, so the
    DICOM bytes written from the clip are reproducible.
    """
    rows, cols = _canvas_shape(spec)
    spacing = spec.pixel_spacing_mm
    rng = np.random.default_rng(spec.noise_seed)
    frames = np.empty((spec.num_frames, rows, cols), dtype=np.uint8)
    masks = []
    for t in range(spec.num_frames):
        bits = _ellipse_bits(rows, cols, spacing, spec.long_semi_axis_mm,
                             spec.radial_semi_axis_at(t))
        if bits[0, :].any() or bits[-1, :].any() or bits[:, 0].any() or bits[:, -1].any():
            raise CanvasTooSmall(
                f"{rows}x{cols} canvas at {spacing} mm/px clips the ellipse")
        image = np.where(bits, POOL_INTENSITY, BACKGROUND_INTENSITY).astype(np.int16)
        image += rng.integers(-NOISE_AMPLITUDE, NOISE_AMPLITUDE + 1,
                              size=image.shape, dtype=np.int16)
        frames[t] = np.clip(image, 0, 255).astype(np.uint8)
        masks.append(ChamberMask(Chamber.LV, t, bits, (spacing, spacing)))

    clip = EchoClip(
        study_id=study_id,
        clip_id=_phantom_id(spec, study_id, view_hint),
        rows=rows,
        cols=cols,
        num_frames=spec.num_frames,
        frame_interval_ms=FRAME_INTERVAL_MS,
        pixel_spacing_mm=(spacing, spacing),
        frames=frames,
        acquisition_index=acquisition_index,
        declared_view_hint=view_hint,
    )
    return clip, masks
