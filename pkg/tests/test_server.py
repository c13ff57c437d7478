import pytest
from fastapi.testclient import TestClient

from echotriage.pipeline import PipelineConfig, run_batch
from echotriage.segmentation import decode_sidecar
from echotriage.server import create_app
from echotriage.store import ReportStore

CALIBRATE_COHORT = [(65.0, True), (62.0, True), (55.0, True),
                    (61.0, False), (45.0, False)]


@pytest.fixture
def populated(tmp_path, make_phantom_study):
    store = ReportStore(tmp_path / "store")
    dirs = [make_phantom_study(lvef=v, seed=i)[0] for i, v in enumerate((35, 55, 75))]
    reports = run_batch(dirs, PipelineConfig(), store)
    return store, reports


@pytest.fixture
def client(populated):
    store, reports = populated
    app = create_app(store, cohort=CALIBRATE_COHORT)
    return TestClient(app), reports


class TestReadEndpoints:
    def test_list_studies(self, client):
        api, reports = client
        body = api.get("/studies").json()
        assert len(body["studies"]) == 3
        categories = {s["study_id"]: s["category"] for s in body["studies"]}
        expected = {r.study_id: r.category for r in reports}
        assert categories == expected

    def test_get_report_equals_stored(self, client, populated):
        api, reports = client
        store, _ = populated
        report = reports[0]
        body = api.get(f"/studies/{report.study_id}").json()
        stored = store.load_report(report.study_id)
        stored["reviewer_override"] = None
        assert body == stored

    def test_unknown_study_404(self, client):
        api, _ = client
        assert api.get("/studies/nope").status_code == 404

    def test_masks_payload_decodes(self, client):
        api, reports = client
        report = reports[0]
        body = api.get(f"/studies/{report.study_id}/masks").json()
        assert body["masks"], "phantom study should carry sidecars"
        for entry in body["masks"]:
            masks = decode_sidecar(entry["rle"])
            assert masks and masks[0].chamber.value == entry["chamber"]


class TestOverrides:
    def test_override_round_trip(self, client):
        api, reports = client
        study = reports[1].study_id  # GREY phantom
        response = api.post(f"/studies/{study}/override",
                            json={"category": "ABNORMAL", "reviewer_id": "dr-a"})
        assert response.status_code == 200
        body = api.get(f"/studies/{study}").json()
        assert body["reviewer_override"]["category"] == "ABNORMAL"
        assert body["reviewer_override"]["reviewer_id"] == "dr-a"
        assert body["reviewer_override"]["timestamp"]
        # machine decision preserved
        assert body["category"] == "GREY"
        queue = api.get("/studies").json()["studies"]
        row = next(s for s in queue if s["study_id"] == study)
        assert row["override_category"] == "ABNORMAL"

    def test_invalid_category_422(self, client):
        api, reports = client
        study = reports[0].study_id
        response = api.post(f"/studies/{study}/override",
                            json={"category": "FINE", "reviewer_id": "dr-a"})
        assert response.status_code == 422

    def test_override_unknown_study_404(self, client):
        api, _ = client
        response = api.post("/studies/nope/override",
                            json={"category": "GREY", "reviewer_id": "dr-a"})
        assert response.status_code == 404


class TestWhatIf:
    def test_calibrate_example_cohort(self, client):
        api, _ = client
        body = api.get("/whatif", params={"cutoff": 61}).json()
        assert body["precision"] == 1.0
        assert body["sensitivity"] == pytest.approx(2 / 3)

    def test_workload_hours_follow_sensitivity(self, client):
        api, _ = client
        body = api.get("/whatif", params={"cutoff": 61}).json()
        # defaults: 10000 studies, 0.4 prevalence, 9 min, sensitivity 2/3
        assert body["workload_hours"] == pytest.approx(10_000 * 0.4 * (2 / 3) * 9 / 60)

    def test_cutoff_below_all_scores(self, client):
        api, _ = client
        body = api.get("/whatif", params={"cutoff": 0}).json()
        assert body["sensitivity"] == 1.0

    def test_out_of_range_cutoff_422(self, client):
        api, _ = client
        assert api.get("/whatif", params={"cutoff": 140}).status_code == 422

    def test_no_cohort_404(self, populated):
        store, _ = populated
        api = TestClient(create_app(store, cohort=None))
        assert api.get("/whatif", params={"cutoff": 61}).status_code == 404


class TestThresholdUpdates:
    def test_update_persists_prospectively(self, client, populated):
        api, _ = client
        store, reports = populated
        response = api.put("/config/thresholds",
                           json={"abnormal_below": 45.0, "normal_above": 65.0})
        assert response.status_code == 200
        assert api.get("/config").json()["thresholds"]["abnormal_below"] == 45.0
        assert store.latest_config_update() == {"abnormal_below": 45.0,
                                                "normal_above": 65.0}
        # stored reports untouched
        for report in reports:
            assert store.load_report(report.study_id) == report.to_dict()

    def test_invalid_thresholds_422(self, client):
        api, _ = client
        response = api.put("/config/thresholds",
                           json={"abnormal_below": 70.0, "normal_above": 60.0})
        assert response.status_code == 422
