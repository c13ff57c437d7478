"""Study orchestration: ingest, classify, segment, measure, triage, persist.

A study is a directory of .dcm files sharing a study id. Every stage failure
downgrades the study to the UNDETERMINED pseudo-category with an explanatory
flag instead of aborting the batch, so N studies always yield N reports.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import sys
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import dicom, geometry, segmentation, views
from .segmentation import Chamber
from .store import ReportStore, canonical_json
from .triage import ThresholdConfig, triage
from .views import View

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CATEGORY_UNDETERMINED = "UNDETERMINED"

FLAG_NO_USABLE_CLIPS = "no-usable-clips"
FLAG_NO_APICAL_VIEW = "no-apical-view"
FLAG_SEGMENTATION_FAILED = "segmentation-failed"
FLAG_NO_CYCLES = "no-cycles"
FLAG_UNCALIBRATED = "uncalibrated"
FLAG_DEGENERATE_CYCLE = "degenerate-cycle"
FLAG_PIPELINE_ERROR = "pipeline-error"

_CLASSIFIERS = ("hint", "constant")
_SEGMENTERS = ("threshold", "sidecar")


class PipelineError(Exception):
    pass


class NoUsableClips(PipelineError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    classifier: str = "hint"
    segmenter: str = "threshold"
    n_disks: int = 20
    smoothing_window: int = 3
    thresholds: ThresholdConfig = ThresholdConfig()
    precision_floor: float = 0.8
    store_path: str = "echotriage-store"
    workers: int = 4

    def __post_init__(self):
        if not (self.classifier in _CLASSIFIERS or self.classifier.startswith("external:")):
            raise ValueError(f"unknown classifier backend {self.classifier!r}")
        if not (self.segmenter in _SEGMENTERS or self.segmenter.startswith("external:")):
            raise ValueError(f"unknown segmentation backend {self.segmenter!r}")
        if self.n_disks < 1 or self.smoothing_window < 1 or self.workers < 1:
            raise ValueError("n_disks, smoothing_window and workers must be positive")
        if not (0.0 <= self.precision_floor <= 1.0):
            raise ValueError("precision_floor must lie in [0, 1]")

    def to_dict(self) -> Dict:
        return {
            "classifier": self.classifier,
            "segmenter": self.segmenter,
            "n_disks": self.n_disks,
            "smoothing_window": self.smoothing_window,
            "abnormal_below": self.thresholds.abnormal_below,
            "normal_above": self.thresholds.normal_above,
            "precision_floor": self.precision_floor,
        }

    def fingerprint(self) -> str:
        """Identifies every parameter that shapes clinical output (not paths/workers)."""
        return hashlib.sha256(canonical_json(self.to_dict())).hexdigest()[:16]

    @classmethod
    def from_toml(cls, path: Path) -> "PipelineConfig":
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
        thresholds = ThresholdConfig(**raw.pop("thresholds", {}))
        return cls(thresholds=thresholds, **raw)


@dataclass
class StudyReport:
    """Everything the pipeline decided about one study, in serializable form."""

    study_id: str
    config_fingerprint: str
    category: str
    quality_flags: Tuple[str, ...]
    clips: Tuple[Dict, ...]
    selected: Dict[str, Optional[str]]
    cycles: Tuple[Dict, ...]
    lvef: Optional[Dict]
    triage: Optional[Dict]
    masks: Tuple[Dict, ...]
    study_dir: str
    reviewer_override: Optional[Dict] = None

    def to_dict(self) -> Dict:
        # key order is the wire format; keep it stable
        return {
            "study_id": self.study_id,
            "config_fingerprint": self.config_fingerprint,
            "category": self.category,
            "quality_flags": list(self.quality_flags),
            "clips": [dict(c) for c in self.clips],
            "selected": dict(self.selected),
            "cycles": [dict(c) for c in self.cycles],
            "lvef": dict(self.lvef) if self.lvef else None,
            "triage": dict(self.triage) if self.triage else None,
            "masks": [dict(m) for m in self.masks],
            "study_dir": self.study_dir,
            "reviewer_override": self.reviewer_override,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "StudyReport":
        return cls(
            study_id=data["study_id"],
            config_fingerprint=data["config_fingerprint"],
            category=data["category"],
            quality_flags=tuple(data["quality_flags"]),
            clips=tuple(data["clips"]),
            selected=data["selected"],
            cycles=tuple(data["cycles"]),
            lvef=data["lvef"],
            triage=data["triage"],
            masks=tuple(data["masks"]),
            study_dir=data["study_dir"],
            reviewer_override=data.get("reviewer_override"),
        )


def _make_classifier(cfg: PipelineConfig) -> views.ClassifierBackend:
    if cfg.classifier == "hint":
        return views.HintBackend()
    if cfg.classifier == "constant":
        return views.ConstantBackend()
    return views.load_external_backend(cfg.classifier.split(":", 1)[1])


def _make_segmenter(cfg: PipelineConfig, study_dir: Path) -> segmentation.SegmentationBackend:
    if cfg.segmenter == "threshold":
        return segmentation.ThresholdBackend()
    if cfg.segmenter == "sidecar":
        return segmentation.SidecarBackend(study_dir)
    backend_path = cfg.segmenter.split(":", 1)[1]
    module_backend = views.load_external_backend(backend_path)
    return module_backend  # plug-in must satisfy the segmentation contract


_SERIAL_BACKEND_LOCK = threading.Lock()


def _call_backend(backend, fn, *args):
    if getattr(backend, "thread_safe", True):
        return fn(*args)
    with _SERIAL_BACKEND_LOCK:
        return fn(*args)


def run_study(study_dir: Path, cfg: PipelineConfig) -> StudyReport:
    study_dir = Path(study_dir).resolve()
    fingerprint = cfg.fingerprint()
    flags = set()

    clips: List[dicom.EchoClip] = []
    for path in sorted(study_dir.glob("*.dcm")):
        try:
            clips.append(dicom.parse_dicom(path.read_bytes()))
        except dicom.DicomError:
            flags.add(f"parse-failed:{path.name}")
    if not clips:
        flags.add(FLAG_NO_USABLE_CLIPS)
        return _undetermined_report(study_dir, cfg, fingerprint, flags)

    study_id = _study_identifier(study_dir, clips)
    classifier = _make_classifier(cfg)
    classifications = [_call_backend(classifier, views.classify_view, clip, classifier)
                       for clip in clips]
    for cls in classifications:
        flags.update(cls.flags)
    labeled = [(clip, cls.label) for clip, cls in zip(clips, classifications)]
    clip_entries = tuple(_clip_entry(clip, cls)
                         for clip, cls in sorted(zip(clips, classifications),
                                                 key=lambda pair: pair[0].clip_id))

    selected_a4c = views.select_clip(labeled, View.A4C)
    selected_a2c = views.select_clip(labeled, View.A2C)
    selected = {
        "A4C": selected_a4c.clip_id if selected_a4c else None,
        "A2C": selected_a2c.clip_id if selected_a2c else None,
    }
    if selected_a4c is None and selected_a2c is None:
        flags.add(FLAG_NO_APICAL_VIEW)
        return _undetermined_report(study_dir, cfg, fingerprint, flags,
                                    study_id, clip_entries, selected)

    segmenter = _make_segmenter(cfg, study_dir)
    lv_masks: Dict[str, List[segmentation.ChamberMask]] = {}
    mask_entries: List[Dict] = []
    try:
        for view_name, clip in (("A4C", selected_a4c), ("A2C", selected_a2c)):
            if clip is None:
                continue
            view = View(view_name)
            lv = _call_backend(segmenter, segmentation.segment_clip,
                               clip, view, Chamber.LV, segmenter)
            lv_masks[view_name] = lv
            mask_entries.append(_store_sidecar(study_dir, clip, lv))
            la = _call_backend(segmenter, segmentation.segment_clip,
                               clip, view, Chamber.LA, segmenter)
            mask_entries.append(_store_sidecar(study_dir, clip, la))
    except Exception:
        flags.add(FLAG_SEGMENTATION_FAILED)
        return _undetermined_report(study_dir, cfg, fingerprint, flags,
                                    study_id, clip_entries, selected)
    mask_entries.sort(key=lambda m: (m["clip_id"], m["chamber"]))

    try:
        cycles, method, cycle_flags = _measure_cycles(cfg, selected, lv_masks)
        flags.update(cycle_flags)
    except geometry.UncalibratedClip:
        flags.add(FLAG_UNCALIBRATED)
        return _undetermined_report(study_dir, cfg, fingerprint, flags,
                                    study_id, clip_entries, selected, mask_entries)
    except (geometry.NoCycleFound, geometry.NoCycles, geometry.DegenerateMask):
        flags.add(FLAG_NO_CYCLES)
        return _undetermined_report(study_dir, cfg, fingerprint, flags,
                                    study_id, clip_entries, selected, mask_entries)

    result = geometry.compute_lvef(cycles, method)
    flags.update(result.quality_flags)
    decision = triage(result.mean_lvef, cfg.thresholds)

    return StudyReport(
        study_id=study_id,
        config_fingerprint=fingerprint,
        category=decision.category.value,
        quality_flags=tuple(sorted(flags)),
        clips=clip_entries,
        selected=selected,
        cycles=tuple(_cycle_entry(c) for c in cycles),
        lvef={
            "per_cycle": list(result.per_cycle_lvef),
            "mean": result.mean_lvef,
            "cycles_used": result.cycles_used,
            "method": result.method.value,
        },
        triage={
            "category": decision.category.value,
            "lvef": decision.lvef,
            "abnormal_below": cfg.thresholds.abnormal_below,
            "normal_above": cfg.thresholds.normal_above,
        },
        masks=tuple(mask_entries),
        study_dir=str(study_dir),
    )


def _measure_cycles(cfg: PipelineConfig, selected: Dict[str, Optional[str]],
                    lv_masks: Dict[str, List[segmentation.ChamberMask]],
                    ) -> Tuple[List[geometry.CardiacCycle], geometry.VolumeMethod, set]:
    """Volumes per detected heartbeat; biplane when both apical views exist."""
    flags = set()
    if selected["A4C"] and selected["A2C"]:
        pairs_a4c = geometry.detect_cycles(
            geometry.area_series(lv_masks["A4C"]), cfg.smoothing_window)
        pairs_a2c = geometry.detect_cycles(
            geometry.area_series(lv_masks["A2C"]), cfg.smoothing_window)
        cycles = []
        for (ed_a, es_a), (ed_b, es_b) in zip(pairs_a4c, pairs_a2c):
            try:
                edv, f1 = geometry.biplane_volume(
                    lv_masks["A4C"][ed_a], lv_masks["A2C"][ed_b], cfg.n_disks)
                esv, f2 = geometry.biplane_volume(
                    lv_masks["A4C"][es_a], lv_masks["A2C"][es_b], cfg.n_disks)
                flags.update(f1 | f2)
                cycles.append(geometry.CardiacCycle(ed_a, es_a, edv, esv))
            except (geometry.DegenerateMask, ValueError):
                flags.add(FLAG_DEGENERATE_CYCLE)
        if not cycles:
            raise geometry.NoCycles("every biplane cycle was degenerate")
        return cycles, geometry.VolumeMethod.BIPLANE, flags

    view_name = "A4C" if selected["A4C"] else "A2C"
    method = (geometry.VolumeMethod.SINGLE_PLANE_A4C if view_name == "A4C"
              else geometry.VolumeMethod.SINGLE_PLANE_A2C)
    masks = lv_masks[view_name]
    pairs = geometry.detect_cycles(geometry.area_series(masks), cfg.smoothing_window)
    cycles = []
    for ed, es in pairs:
        try:
            edv = geometry.disk_volume(masks[ed], cfg.n_disks)
            esv = geometry.disk_volume(masks[es], cfg.n_disks)
            cycles.append(geometry.CardiacCycle(ed, es, edv, esv))
        except (geometry.DegenerateMask, ValueError):
            flags.add(FLAG_DEGENERATE_CYCLE)
    if not cycles:
        raise geometry.NoCycles("every detected cycle was degenerate")
    return cycles, method, flags


def _study_identifier(study_dir: Path, clips: Sequence[dicom.EchoClip]) -> str:
    ids = sorted({c.study_id for c in clips if c.study_id})
    return ids[0] if ids else study_dir.name


def _clip_entry(clip: dicom.EchoClip, cls: views.ClipClassification) -> Dict:
    return {
        "clip_id": clip.clip_id,
        "view": cls.label.view.value,
        "confidence": cls.label.confidence,
        "backend": cls.backend,
        "num_frames": clip.num_frames,
        "frame_interval_ms": clip.frame_interval_ms,
        "acquisition_index": clip.acquisition_index,
        "flags": sorted(clip.flags | cls.flags),
    }


def _cycle_entry(cycle: geometry.CardiacCycle) -> Dict:
    return {
        "ed_frame": cycle.ed_frame,
        "es_frame": cycle.es_frame,
        "edv_ml": cycle.edv_ml,
        "esv_ml": cycle.esv_ml,
        "lvef_pct": cycle.lvef_pct,
    }


def _store_sidecar(study_dir: Path, clip: dicom.EchoClip,
                   masks: Sequence[segmentation.ChamberMask]) -> Dict:
    path = segmentation.write_sidecar(study_dir, clip.clip_id, masks)
    return {
        "clip_id": clip.clip_id,
        "chamber": masks[0].chamber.value,
        "path": str(path),
    }


def _undetermined_report(study_dir: Path, cfg: PipelineConfig, fingerprint: str,
                         flags: set, study_id: Optional[str] = None,
                         clip_entries: Tuple[Dict, ...] = (),
                         selected: Optional[Dict[str, Optional[str]]] = None,
                         mask_entries: Sequence[Dict] = ()) -> StudyReport:
    return StudyReport(
        study_id=study_id or Path(study_dir).name,
        config_fingerprint=fingerprint,
        category=CATEGORY_UNDETERMINED,
        quality_flags=tuple(sorted(flags)),
        clips=clip_entries,
        selected=selected or {"A4C": None, "A2C": None},
        cycles=(),
        lvef=None,
        triage=None,
        masks=tuple(mask_entries),
        study_dir=str(study_dir),
    )


def effective_config(cfg: PipelineConfig, store: ReportStore) -> PipelineConfig:
    """Apply the latest prospective threshold update stored alongside the reports."""
    update = store.latest_config_update()
    if update is None:
        return cfg
    thresholds = ThresholdConfig(abnormal_below=update["abnormal_below"],
                                 normal_above=update["normal_above"])
    return replace(cfg, thresholds=thresholds)


def run_batch(study_dirs: Sequence[Path], cfg: PipelineConfig,
              store: Optional[ReportStore] = None) -> List[StudyReport]:
    """Process studies concurrently; one report per study, failures included."""
    if store is not None:
        cfg = effective_config(cfg, store)

    def run_one(study_dir: Path) -> StudyReport:
        try:
            return run_study(study_dir, cfg)
        except Exception:
            return _undetermined_report(study_dir, cfg, cfg.fingerprint(),
                                        {FLAG_PIPELINE_ERROR})

    reports: List[Optional[StudyReport]] = [None] * len(study_dirs)
    with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        futures = {pool.submit(run_one, d): i for i, d in enumerate(study_dirs)}
        for future in concurrent.futures.as_completed(futures):
            reports[futures[future]] = future.result()

    if store is not None:
        for report in reports:
            store.put_report(report.study_id, report.config_fingerprint,
                             report.to_dict())
    return reports
