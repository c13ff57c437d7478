"""Record server responses and the shared RLE corpus into frontend/fixtures/.

Builds a phantom store with the real pipeline, runs the real HTTP app against
it, and snapshots the responses the UI contract tests replay. Regenerate with:

    python3 frontend/scripts/record_fixtures.py
"""

import json
import tempfile
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from echotriage.dicom import write_dicom
from echotriage.phantom import render_phantom, spec_for_target_lvef
from echotriage.pipeline import PipelineConfig, run_batch
from echotriage.segmentation import Chamber, ChamberMask, encode_mask
from echotriage.server import create_app
from echotriage.store import ReportStore

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

CALIBRATE_COHORT = [(65.0, True), (62.0, True), (55.0, True),
                    (61.0, False), (45.0, False)]


def dump(name: str, payload) -> None:
    (FIXTURES / name).write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n")
    print(f"wrote fixtures/{name}")


def build_store(root: Path) -> tuple[ReportStore, dict]:
    studies = {}
    dirs = []
    for label, lvef, seed, cycles in (("abnormal", 25.0, 1, 6), ("grey", 51.0, 2, 6),
                                      ("normal", 72.0, 3, 6), ("short", 66.0, 4, 3)):
        spec = spec_for_target_lvef(lvef, frames_per_cycle=20, n_cycles=cycles,
                                    noise_seed=seed)
        clip, _ = render_phantom(spec, study_id=f"1.2.826.0.9.{seed}")
        study_dir = root / f"study-{label}"
        study_dir.mkdir()
        (study_dir / "a4c.dcm").write_bytes(write_dicom(clip))
        dirs.append(study_dir)
        studies[label] = f"1.2.826.0.9.{seed}"
    undet = root / "undetermined01"
    undet.mkdir()
    dirs.append(undet)
    studies["undetermined"] = "undetermined01"
    store = ReportStore(root / "store")
    run_batch(dirs, PipelineConfig(), store)
    return store, studies


def rle_corpus() -> list:
    rng = np.random.default_rng(20260810)
    entries = []

    def add(bits, chamber=Chamber.LV, frame=0):
        mask = ChamberMask(chamber, frame, bits, None)
        entries.append({
            "record": encode_mask(mask),
            "chamber": mask.chamber.value,
            "frame": mask.frame_index,
            "rows": mask.rows,
            "cols": mask.cols,
            "bits": "".join(str(int(b)) for b in mask.bits.ravel()),
        })

    add(np.ones((2, 2), dtype=bool))
    add(np.zeros((2, 2), dtype=bool))
    add(np.eye(5, dtype=bool))
    single = np.zeros((7, 3), dtype=bool)
    single[6, 2] = True
    add(single, Chamber.LA, 12)
    add(np.ones((1, 9), dtype=bool))
    add(np.zeros((9, 1), dtype=bool))
    for i in range(150):
        rows = int(rng.integers(1, 25))
        cols = int(rng.integers(1, 25))
        density = float(rng.uniform(0.0, 1.0))
        chamber = Chamber.LV if i % 2 == 0 else Chamber.LA
        add(rng.random((rows, cols)) < density, chamber, i)
    return entries


def phantom_overlay_fixture() -> dict:
    """Per-frame areas for the whole clip; full records and bits for ED/mid/ES."""
    spec = spec_for_target_lvef(51.0, frames_per_cycle=20, n_cycles=2, noise_seed=9)
    _, masks = render_phantom(spec, study_id="1.2.826.0.9.overlay")
    detailed = {0, 5, 10}
    frames = []
    for mask in masks:
        entry = {"frame": mask.frame_index, "pixel_count": mask.pixel_count}
        if mask.frame_index in detailed:
            entry["record"] = encode_mask(mask)
            entry["bits"] = "".join(str(int(b)) for b in mask.bits.ravel())
        frames.append(entry)
    return {"rows": masks[0].rows, "cols": masks[0].cols,
            "ed_frame": 0, "es_frame": 10, "frames": frames}


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        store, studies = build_store(Path(tmp))
        api = TestClient(create_app(store, cohort=CALIBRATE_COHORT))

        dump("studies.json", api.get("/studies").json())
        grey = studies["grey"]
        dump("study_grey.json", api.get(f"/studies/{grey}").json())
        dump("study_undetermined.json",
             api.get(f"/studies/{studies['undetermined']}").json())
        dump("masks_grey.json", api.get(f"/studies/{grey}/masks").json())

        response = api.post(f"/studies/{grey}/override",
                            json={"category": "ABNORMAL", "reviewer_id": "dr-rev-1"})
        dump("override_response.json", response.json())
        dump("study_grey_overridden.json", api.get(f"/studies/{grey}").json())
        dump("studies_after_override.json", api.get("/studies").json())

        dump("whatif_61.json", api.get("/whatif", params={"cutoff": 61}).json())
        dump("whatif_0.json", api.get("/whatif", params={"cutoff": 0}).json())
        dump("whatif_invalid.json", {
            "status_code": api.get("/whatif", params={"cutoff": 140}).status_code})

    dump("rle_corpus.json", rle_corpus())
    dump("phantom_overlay.json", phantom_overlay_fixture())


if __name__ == "__main__":
    main()
