"""HTTP interface serving stored reports to the review UI.

Read endpoints list the study queue, fetch one report (reviewer override
merged in), and return mask overlays as raw RLE sidecar payloads. The
what-if endpoint evaluates a candidate cutoff on the configured cohort with
the same functions the calibrator uses; the UI never reimplements clinical
math. Writes are reviewer overrides and prospective threshold updates.
"""

from __future__ import annotations

from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Tuple

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .store import ReportNotFound, ReportStore
from .triage import (
    ThresholdConfig,
    WorkloadParams,
    evaluate_cutoff,
    workload_savings,
)

CLINICAL_CATEGORIES = ("ABNORMAL", "GREY", "NORMAL")


class OverrideRequest(BaseModel):
    category: str
    reviewer_id: str


class ThresholdUpdate(BaseModel):
    abnormal_below: float
    normal_above: float


def create_app(store: ReportStore,
               cohort: Optional[List[Tuple[float, bool]]] = None,
               thresholds: ThresholdConfig = ThresholdConfig(),
               workload: WorkloadParams = WorkloadParams()) -> FastAPI:
    app = FastAPI(title="echotriage review API")
    state = {"thresholds": thresholds}

    def load_or_404(study_id: str) -> dict:
        try:
            report = store.load_report(study_id)
        except ReportNotFound:
            raise HTTPException(status_code=404, detail=f"unknown study {study_id!r}")
        report["reviewer_override"] = store.latest_override(study_id)
        return report

    @app.get("/studies")
    def list_studies():
        items = []
        for study_id in store.list_study_ids():
            report = load_or_404(study_id)
            override = report["reviewer_override"]
            items.append({
                "study_id": study_id,
                "category": report["category"],
                "mean_lvef": report["lvef"]["mean"] if report["lvef"] else None,
                "flags": report["quality_flags"],
                "override_category": override["category"] if override else None,
            })
        return {"studies": items}

    @app.get("/studies/{study_id}")
    def get_study(study_id: str):
        return load_or_404(study_id)

    @app.get("/studies/{study_id}/masks")
    def get_masks(study_id: str):
        report = load_or_404(study_id)
        payloads = []
        for entry in report["masks"]:
            path = Path(entry["path"])
            if not path.exists():
                raise HTTPException(status_code=404,
                                    detail=f"sidecar missing: {path.name}")
            payloads.append({
                "clip_id": entry["clip_id"],
                "chamber": entry["chamber"],
                "rle": path.read_text(),
            })
        return {"study_id": study_id, "masks": payloads}

    @app.post("/studies/{study_id}/override")
    def post_override(study_id: str, body: OverrideRequest):
        load_or_404(study_id)  # 404 before validating the body content
        if body.category not in CLINICAL_CATEGORIES:
            raise HTTPException(status_code=422,
                                detail=f"invalid override category {body.category!r}")
        override = {
            "category": body.category,
            "reviewer_id": body.reviewer_id,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        store.put_override(study_id, override)
        return {"study_id": study_id, "override": override}

    @app.get("/whatif")
    def whatif(cutoff: float):
        if cohort is None:
            raise HTTPException(status_code=404, detail="no cohort configured")
        if not (0.0 <= cutoff <= 100.0):
            raise HTTPException(status_code=422,
                                detail=f"cutoff {cutoff} outside [0, 100]")
        m = evaluate_cutoff(cohort, cutoff)
        sensitivity = m.sensitivity if m.sensitivity is not None else 0.0
        hours = workload_savings(replace(workload, sensitivity=sensitivity))
        return {
            "cutoff": cutoff,
            "precision": m.precision,
            "sensitivity": m.sensitivity,
            "workload_hours": hours,
            "predicted_normal": m.tp + m.fp,
            "cohort_size": m.tp + m.fp + m.fn + m.tn,
        }

    @app.get("/config")
    def get_config():
        current = state["thresholds"]
        return {"thresholds": {"abnormal_below": current.abnormal_below,
                               "normal_above": current.normal_above}}

    @app.put("/config/thresholds")
    def put_thresholds(body: ThresholdUpdate):
        try:
            updated = ThresholdConfig(abnormal_below=body.abnormal_below,
                                      normal_above=body.normal_above)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        # prospective only: stored reports stay as written
        store.put_config_update({"abnormal_below": updated.abnormal_below,
                                 "normal_above": updated.normal_above})
        state["thresholds"] = updated
        return {"thresholds": {"abnormal_below": updated.abnormal_below,
                               "normal_above": updated.normal_above}}

    return app


def serve(store_path: Path, port: int = 8000, host: str = "127.0.0.1",
          cohort: Optional[List[Tuple[float, bool]]] = None,
          thresholds: ThresholdConfig = ThresholdConfig()) -> None:
    import uvicorn

    app = create_app(ReportStore(store_path), cohort=cohort, thresholds=thresholds)
    uvicorn.run(app, host=host, port=port)
