// Study view model: frame markers, the per-cycle table, mask overlays and
// the override control. All numbers shown are formatted server values.

import type { DecodedMask } from "./rle.js";
import type {
  Category,
  ClinicalCategory,
  OverrideResponse,
  StudyReport,
} from "./types.js";

export interface FrameMarker {
  frame: number;
  kind: "ED" | "ES";
  cycle: number;
}

export function frameMarkers(report: StudyReport): FrameMarker[] {
  const markers: FrameMarker[] = [];
  report.cycles.forEach((cycle, index) => {
    markers.push({ frame: cycle.ed_frame, kind: "ED", cycle: index });
    markers.push({ frame: cycle.es_frame, kind: "ES", cycle: index });
  });
  return markers;
}

export interface CycleTableRow {
  cycle: number;
  edFrame: number;
  esFrame: number;
  edvLabel: string;
  esvLabel: string;
  lvefLabel: string;
}

export function cycleTableRows(report: StudyReport): CycleTableRow[] {
  return report.cycles.map((cycle, index) => ({
    cycle: index + 1,
    edFrame: cycle.ed_frame,
    esFrame: cycle.es_frame,
    edvLabel: `${cycle.edv_ml.toFixed(1)} mL`,
    esvLabel: `${cycle.esv_ml.toFixed(1)} mL`,
    lvefLabel: `${cycle.lvef_pct.toFixed(1)}%`,
  }));
}

export function overlayForFrame(
  masks: DecodedMask[],
  frame: number,
): DecodedMask | null {
  return masks.find((mask) => mask.frame === frame) ?? null;
}

// Playback honours the clip's own acquisition timing, not a fixed rate.
export function playbackIntervalMs(report: StudyReport, clipId: string): number {
  const clip = report.clips.find((c) => c.clip_id === clipId);
  if (!clip) {
    throw new Error(`unknown clip ${clipId} in study ${report.study_id}`);
  }
  return clip.frame_interval_ms;
}

const CLINICAL_CATEGORIES: ClinicalCategory[] = ["ABNORMAL", "GREY", "NORMAL"];

export function isValidOverrideCategory(
  category: string,
): category is ClinicalCategory {
  return (CLINICAL_CATEGORIES as string[]).includes(category);
}

export function buildOverrideRequest(
  category: string,
  reviewerId: string,
): { category: ClinicalCategory; reviewer_id: string } {
  if (!isValidOverrideCategory(category)) {
    throw new Error(`invalid override category ${category}`);
  }
  if (reviewerId.trim() === "") {
    throw new Error("reviewer id required");
  }
  return { category, reviewer_id: reviewerId };
}

// Merge the server's confirmation; the machine decision stays untouched.
export function applyOverrideResponse(
  report: StudyReport,
  response: OverrideResponse,
): StudyReport {
  return { ...report, reviewer_override: response.override };
}

export function displayedCategory(report: StudyReport): Category {
  return report.reviewer_override?.category ?? report.category;
}

export function renderCycleTableHtml(report: StudyReport): string {
  const rows = cycleTableRows(report)
    .map(
      (row) =>
        `<tr><td>${row.cycle}</td><td>${row.edFrame}</td><td>${row.esFrame}</td>` +
        `<td>${row.edvLabel}</td><td>${row.esvLabel}</td><td>${row.lvefLabel}</td></tr>`,
    )
    .join("");
  return (
    `<table class="cycles"><thead><tr><th>Beat</th><th>ED frame</th>` +
    `<th>ES frame</th><th>EDV</th><th>ESV</th><th>LVEF</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}
