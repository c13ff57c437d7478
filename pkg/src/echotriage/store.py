"""Append-only, checksummed report store backed by a plain directory.

Every write lands as a new version file; nothing is ever rewritten, so two
runs with different configs stay retrievable side by side. Files appear
atomically (written to a temp name, then hard-linked into place), and each
record carries a checksum over the canonical payload bytes that is verified
on read.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
import re
from pathlib import Path
from typing import Dict, List, Optional, Tuple

_SAFE_CHARS = re.compile(r"[^A-Za-z0-9._-]")
_MAX_CLAIM_ATTEMPTS = 1000
_TMP_COUNTER = itertools.count()


class StoreError(Exception):
    pass


class StoreCorrupt(StoreError):
    pass


class ReportNotFound(StoreError):
    pass


def canonical_json(obj) -> bytes:
    """Compact JSON with document key order preserved; the checksummed form."""
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=True).encode("ascii")


def checksum(payload_bytes: bytes) -> str:
    return hashlib.sha256(payload_bytes).hexdigest()


def _safe(name: str) -> str:
    return _SAFE_CHARS.sub("_", name) or "_"


class ReportStore:
    def __init__(self, root: Path):
        self.root = Path(root)
        self.reports_dir = self.root / "reports"
        self.overrides_dir = self.root / "overrides"
        self.config_dir = self.root / "config"
        for d in (self.reports_dir, self.overrides_dir, self.config_dir):
            d.mkdir(parents=True, exist_ok=True)

    # -- generic versioned record plumbing ----------------------------------

    def _write_record(self, directory: Path, stem: str, record_head: Dict,
                      payload: Dict) -> int:
        """Link a new `<stem>__<version>.json` into place; returns the version."""
        payload_bytes = canonical_json(payload)
        digest = checksum(payload_bytes)
        version = self._next_version(directory, stem)
        for _ in range(_MAX_CLAIM_ATTEMPTS):
            final = directory / f"{stem}__{version:06d}.json"
            head = dict(record_head)
            head["version"] = version
            head["checksum"] = digest
            body = (b"{" + b",".join(
                canonical_json(k) + b":" + canonical_json(v) for k, v in head.items()
            ) + b',"payload":' + payload_bytes + b"}")
            tmp = directory / f".tmp-{os.getpid()}-{next(_TMP_COUNTER)}"
            with open(tmp, "wb") as fh:
                fh.write(body)
                fh.flush()
                os.fsync(fh.fileno())
            try:
                os.link(tmp, final)  # atomic; fails instead of overwriting
                return version
            except FileExistsError:
                version += 1  # another writer claimed it; try the next slot
            finally:
                os.unlink(tmp)
        raise StoreError(f"could not claim a version slot for {stem}")

    def _next_version(self, directory: Path, stem: str) -> int:
        versions = [v for _, v in self._versions(directory, stem)]
        return (max(versions) + 1) if versions else 1

    def _versions(self, directory: Path, stem: str) -> List[Tuple[Path, int]]:
        out = []
        prefix = f"{stem}__"
        for path in directory.glob(f"{prefix}*.json"):
            tail = path.name[len(prefix):-len(".json")]
            if tail.isdigit():
                out.append((path, int(tail)))
        return sorted(out, key=lambda pv: pv[1])

    def _read_record(self, path: Path) -> Dict:
        try:
            record = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise StoreCorrupt(f"unreadable record {path}") from exc
        payload = record.get("payload")
        digest = record.get("checksum")
        if payload is None or digest is None:
            raise StoreCorrupt(f"record {path} lacks payload or checksum")
        if checksum(canonical_json(payload)) != digest:
            raise StoreCorrupt(f"checksum mismatch in {path}")
        return record

    # -- reports -------------------------------------------------------------

    def put_report(self, study_id: str, fingerprint: str, payload: Dict) -> int:
        head = {"study_id": study_id, "fingerprint": fingerprint}
        return self._write_record(self.reports_dir, _safe(study_id), head, payload)

    def load_report(self, study_id: str, fingerprint: Optional[str] = None) -> Dict:
        """Latest stored report for a study (optionally pinned to one config)."""
        record = self._latest_report_record(study_id, fingerprint)
        if record is None:
            raise ReportNotFound(f"no report for study {study_id!r}")
        return record["payload"]

    def _latest_report_record(self, study_id: str,
                              fingerprint: Optional[str] = None) -> Optional[Dict]:
        best = None
        for path, version in self._versions(self.reports_dir, _safe(study_id)):
            record = self._read_record(path)
            if record.get("study_id") != study_id:
                continue  # sanitized-name collision with another study
            if fingerprint is not None and record.get("fingerprint") != fingerprint:
                continue
            if best is None or version > best["version"]:
                best = record
        return best

    def report_versions(self, study_id: str) -> List[Dict]:
        return [self._read_record(path)
                for path, _ in self._versions(self.reports_dir, _safe(study_id))
                if self._read_record(path).get("study_id") == study_id]

    def list_study_ids(self) -> List[str]:
        ids = set()
        for path in self.reports_dir.glob("*.json"):
            ids.add(self._read_record(path)["study_id"])
        return sorted(ids)

    def verify_all(self) -> int:
        """Checksum sweep over every record; returns the record count."""
        count = 0
        for directory in (self.reports_dir, self.overrides_dir, self.config_dir):
            for path in directory.glob("*.json"):
                self._read_record(path)
                count += 1
        return count

    # -- reviewer overrides ----------------------------------------------------

    def put_override(self, study_id: str, override: Dict) -> int:
        head = {"study_id": study_id}
        return self._write_record(self.overrides_dir, _safe(study_id), head, override)

    def latest_override(self, study_id: str) -> Optional[Dict]:
        best = None
        best_version = -1
        for path, version in self._versions(self.overrides_dir, _safe(study_id)):
            record = self._read_record(path)
            if record.get("study_id") != study_id:
                continue
            if version > best_version:
                best, best_version = record["payload"], version
        return best

    # -- prospective config updates ---------------------------------------------

    def put_config_update(self, update: Dict) -> int:
        return self._write_record(self.config_dir, "thresholds", {}, update)

    def latest_config_update(self) -> Optional[Dict]:
        versions = self._versions(self.config_dir, "thresholds")
        if not versions:
            return None
        return self._read_record(versions[-1][0])["payload"]
