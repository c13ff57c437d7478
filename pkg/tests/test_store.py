import json
import threading

import pytest

from echotriage.store import (
    ReportNotFound,
    ReportStore,
    StoreCorrupt,
    canonical_json,
    checksum,
)


@pytest.fixture
def store(tmp_path):
    return ReportStore(tmp_path / "store")


def report(study, n=1):
    return {"study_id": study, "category": "GREY", "mean_lvef": 50.0 + n, "n": n}


class TestRoundTrip:
    def test_put_then_load(self, store):
        store.put_report("s1", "fp1", report("s1"))
        assert store.load_report("s1") == report("s1")

    def test_missing_study(self, store):
        with pytest.raises(ReportNotFound):
            store.load_report("nope")

    def test_two_configs_both_retrievable(self, store):
        store.put_report("s1", "fpA", report("s1", 1))
        store.put_report("s1", "fpB", report("s1", 2))
        assert store.load_report("s1", "fpA") == report("s1", 1)
        assert store.load_report("s1", "fpB") == report("s1", 2)
        assert store.load_report("s1") == report("s1", 2)  # latest wins

    def test_versions_accumulate_append_only(self, store):
        v1 = store.put_report("s1", "fp", report("s1", 1))
        v2 = store.put_report("s1", "fp", report("s1", 2))
        assert (v1, v2) == (1, 2)
        versions = store.report_versions("s1")
        assert [r["payload"]["n"] for r in versions] == [1, 2]

    def test_list_study_ids(self, store):
        store.put_report("b", "fp", report("b"))
        store.put_report("a", "fp", report("a"))
        assert store.list_study_ids() == ["a", "b"]

    def test_unsafe_study_names_do_not_collide(self, store):
        store.put_report("a/b", "fp", report("a/b"))
        store.put_report("a_b", "fp", report("a_b"))
        assert store.load_report("a/b")["study_id"] == "a/b"
        assert store.load_report("a_b")["study_id"] == "a_b"


class TestChecksums:
    def test_corruption_detected(self, store):
        store.put_report("s1", "fp", report("s1"))
        path = next(store.reports_dir.glob("s1__*.json"))
        record = json.loads(path.read_text())
        record["payload"]["mean_lvef"] = 99.0
        path.write_text(json.dumps(record))
        with pytest.raises(StoreCorrupt):
            store.load_report("s1")

    def test_truncated_file_detected(self, store):
        store.put_report("s1", "fp", report("s1"))
        path = next(store.reports_dir.glob("s1__*.json"))
        path.write_bytes(path.read_bytes()[:-20])
        with pytest.raises(StoreCorrupt):
            store.load_report("s1")

    def test_checksum_is_over_canonical_payload(self):
        payload = {"b": 1, "a": 2.5}
        assert checksum(canonical_json(payload)) == checksum(b'{"b":1,"a":2.5}')


class TestConcurrency:
    def test_hundred_distinct_studies_concurrently(self, store):
        errors = []

        def write(i):
            try:
                store.put_report(f"study-{i:03d}", "fp", report(f"study-{i:03d}", i))
            except Exception as exc:  # pragma: no cover
                errors.append(exc)

        threads = [threading.Thread(target=write, args=(i,)) for i in range(100)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        assert len(store.list_study_ids()) == 100
        assert store.verify_all() == 100
        for i in range(100):
            assert store.load_report(f"study-{i:03d}")["n"] == i

    def test_same_study_concurrent_writers_all_land(self, store):
        def write(i):
            store.put_report("shared", "fp", report("shared", i))

        threads = [threading.Thread(target=write, args=(i,)) for i in range(20)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(store.report_versions("shared")) == 20
        store.verify_all()


class TestOverridesAndConfig:
    def test_override_round_trip(self, store):
        assert store.latest_override("s1") is None
        store.put_override("s1", {"category": "ABNORMAL", "reviewer_id": "r1",
                                  "timestamp": "2026-01-01T00:00:00Z"})
        assert store.latest_override("s1")["category"] == "ABNORMAL"

    def test_latest_override_wins(self, store):
        store.put_override("s1", {"category": "ABNORMAL", "reviewer_id": "r1"})
        store.put_override("s1", {"category": "GREY", "reviewer_id": "r2"})
        assert store.latest_override("s1")["reviewer_id"] == "r2"

    def test_config_updates_versioned(self, store):
        assert store.latest_config_update() is None
        store.put_config_update({"abnormal_below": 38.0, "normal_above": 58.0})
        store.put_config_update({"abnormal_below": 41.0, "normal_above": 61.0})
        assert store.latest_config_update()["abnormal_below"] == 41.0
