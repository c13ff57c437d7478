"""LVEF triage categories, classifier metrics, cutoff calibration, and workload model.

The NORMAL class is the positive class throughout: precision is the fraction
of predicted-normal patients that are truly normal, sensitivity the fraction
of truly normal patients predicted normal.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple


class TriageError(Exception):
    pass


class InvalidLvef(TriageError):
    pass


class EmptyCohort(TriageError):
    pass


class SingleClassCohort(TriageError):
    pass


class TriageCategory(enum.Enum):
    ABNORMAL = "ABNORMAL"
    GREY = "GREY"
    NORMAL = "NORMAL"

    @property
    def severity(self) -> int:
        return _SEVERITY[self]


_SEVERITY = {
    TriageCategory.ABNORMAL: 2,
    TriageCategory.GREY: 1,
    TriageCategory.NORMAL: 0,
}


@dataclass(frozen=True)
class ThresholdConfig:
    """Triage cutoffs in LVEF percent. Both boundaries belong to the grey zone."""

    abnormal_below: float = 40.0
    normal_above: float = 60.0

    def __post_init__(self):
        if not (0.0 < self.abnormal_below <= self.normal_above < 100.0):
            raise ValueError(
                f"thresholds must satisfy 0 < abnormal_below <= normal_above < 100, "
                f"got ({self.abnormal_below}, {self.normal_above})"
            )


@dataclass(frozen=True)
class TriageDecision:
    category: TriageCategory
    lvef: float
    thresholds: ThresholdConfig
    flags: frozenset = field(default_factory=frozenset)


def triage(lvef: float, cfg: ThresholdConfig = ThresholdConfig(),
           flags: frozenset = frozenset()) -> TriageDecision:
    """Assign an LVEF to ABNORMAL / GREY / NORMAL.

    lvef < abnormal_below is ABNORMAL, lvef > normal_above is NORMAL, and
    everything in between is GREY; both boundary values fall in the grey zone.
    """
    if not (0.0 <= lvef <= 100.0):
        raise InvalidLvef(f"LVEF {lvef} outside [0, 100]")
    if lvef < cfg.abnormal_below:
        category = TriageCategory.ABNORMAL
    elif lvef > cfg.normal_above:
        category = TriageCategory.NORMAL
    else:
        category = TriageCategory.GREY
    return TriageDecision(category=category, lvef=lvef, thresholds=cfg, flags=flags)


@dataclass(frozen=True)
class ClassifierMetrics:
    """Confusion-matrix summary with NORMAL as the positive class.

    precision is None when there are no positive predictions (TP+FP = 0);
    sensitivity is None when the cohort has no positives (TP+FN = 0).
    """

    precision: Optional[float]
    sensitivity: Optional[float]
    accuracy: float
    tp: int
    fp: int
    fn: int
    tn: int


def metrics(predictions: Sequence[Tuple[bool, bool]]) -> ClassifierMetrics:
    """Compute precision/sensitivity/accuracy from (predicted_normal, truly_normal) pairs."""
    if not predictions:
        raise EmptyCohort("metrics require at least one prediction")
    tp = fp = fn = tn = 0
    for predicted, truth in predictions:
        if predicted and truth:
            tp += 1
        elif predicted and not truth:
            fp += 1
        elif not predicted and truth:
            fn += 1
        else:
            tn += 1
    precision = tp / (tp + fp) if (tp + fp) > 0 else None
    sensitivity = tp / (tp + fn) if (tp + fn) > 0 else None
    accuracy = (tp + tn) / len(predictions)
    return ClassifierMetrics(precision=precision, sensitivity=sensitivity,
                             accuracy=accuracy, tp=tp, fp=fp, fn=fn, tn=tn)


@dataclass(frozen=True)
class CalibrationResult:
    chosen_cutoff: float
    achieved_precision: float
    achieved_sensitivity: float
    feasible: bool


def evaluate_cutoff(cohort: Sequence[Tuple[float, bool]], cutoff: float) -> ClassifierMetrics:
    """Score the rule "predict NORMAL iff estimated LVEF > cutoff" on a cohort."""
    if not cohort:
        raise EmptyCohort("cohort is empty")
    return metrics([(lvef > cutoff, truth) for lvef, truth in cohort])


def calibrate_cutoff(cohort: Sequence[Tuple[float, bool]],
                     precision_floor: float) -> CalibrationResult:
    """Pick the LVEF cutoff maximizing sensitivity subject to a precision floor.

    Candidate cutoffs are the observed estimated-LVEF values; the empirical
    precision/sensitivity curve only changes at those points, so nothing is
    lost. Ties on sensitivity break toward higher precision, then toward the
    larger (more conservative) cutoff. When no candidate reaches the floor,
    the result is infeasible and carries the all-negative cutoff (the maximum
    observed value) with zero reported precision and sensitivity.
    """
    if not cohort:
        raise EmptyCohort("cohort is empty")
    truths = {truth for _, truth in cohort}
    if len(truths) < 2:
        raise SingleClassCohort("calibration requires both classes in the cohort")

    best: Optional[Tuple[float, float, float]] = None  # (sensitivity, precision, cutoff)
    for cutoff in sorted({lvef for lvef, _ in cohort}):
        m = evaluate_cutoff(cohort, cutoff)
        if m.precision is None or m.precision < precision_floor:
            continue
        sensitivity = m.sensitivity if m.sensitivity is not None else 0.0
        key = (sensitivity, m.precision, cutoff)
        if best is None or key > best:
            best = key
    if best is None:
        all_negative = max(lvef for lvef, _ in cohort)
        return CalibrationResult(chosen_cutoff=all_negative, achieved_precision=0.0,
                                 achieved_sensitivity=0.0, feasible=False)
    sensitivity, precision, cutoff = best
    return CalibrationResult(chosen_cutoff=cutoff, achieved_precision=precision,
                             achieved_sensitivity=sensitivity, feasible=True)


@dataclass(frozen=True)
class WorkloadParams:
    """Annual review-workload model inputs.

    Defaults describe a unit reviewing 10,000 studies a year with 40% normal
    prevalence, a triage sensitivity of 30%, and 9 minutes of annotation per
    study (midpoint of the observed 8-10 minute range).
    """

    studies_per_year: int = 10_000
    normal_prevalence: float = 0.40
    sensitivity: float = 0.30
    minutes_per_study: float = 9.0

    def __post_init__(self):
        if self.studies_per_year < 0 or self.minutes_per_study < 0:
            raise ValueError("workload parameters must be nonnegative")
        if not (0.0 <= self.normal_prevalence <= 1.0):
            raise ValueError("normal_prevalence must lie in [0, 1]")
        if not (0.0 <= self.sensitivity <= 1.0):
            raise ValueError("sensitivity must lie in [0, 1]")


def workload_savings(params: WorkloadParams = WorkloadParams()) -> float:
    """Cardiologist hours per year freed by auto-confirming normal studies."""
    return (params.studies_per_year * params.normal_prevalence
            * params.sensitivity * params.minutes_per_study / 60.0)


_TRUTHY = {"1", "true", "yes"}
_FALSY = {"0", "false", "no"}


def load_cohort_csv(path: Path) -> List[Tuple[float, bool]]:
    """Read a calibration cohort CSV with columns study_id,estimated_lvef,truly_normal."""
    cohort = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            label = row["truly_normal"].strip().lower()
            if label in _TRUTHY:
                truth = True
            elif label in _FALSY:
                truth = False
            else:
                raise ValueError(f"unparseable truly_normal value {row['truly_normal']!r}")
            cohort.append((float(row["estimated_lvef"]), truth))
    if not cohort:
        raise EmptyCohort(f"no rows in {path}")
    return cohort
