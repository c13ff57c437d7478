// Wire types mirroring the server's report schema (docs/report-schema.md).
// Every clinical value displayed by the UI comes verbatim from these payloads.

export type Category = "ABNORMAL" | "GREY" | "NORMAL" | "UNDETERMINED";
export type ClinicalCategory = "ABNORMAL" | "GREY" | "NORMAL";

export interface QueueItem {
  study_id: string;
  category: Category;
  mean_lvef: number | null;
  flags: string[];
  override_category: Category | null;
}

export interface StudiesResponse {
  studies: QueueItem[];
}

export interface ClipEntry {
  clip_id: string;
  view: string;
  confidence: number;
  backend: string;
  num_frames: number;
  frame_interval_ms: number;
  acquisition_index: number;
  flags: string[];
}

export interface CycleEntry {
  ed_frame: number;
  es_frame: number;
  edv_ml: number;
  esv_ml: number;
  lvef_pct: number;
}

export interface LvefBlock {
  per_cycle: number[];
  mean: number;
  cycles_used: number;
  method: string;
}

export interface TriageBlock {
  category: Category;
  lvef: number;
  abnormal_below: number;
  normal_above: number;
}

export interface MaskRef {
  clip_id: string;
  chamber: string;
  path: string;
}

export interface ReviewerOverride {
  category: ClinicalCategory;
  reviewer_id: string;
  timestamp: string;
}

export interface StudyReport {
  study_id: string;
  config_fingerprint: string;
  category: Category;
  quality_flags: string[];
  clips: ClipEntry[];
  selected: Record<string, string | null>;
  cycles: CycleEntry[];
  lvef: LvefBlock | null;
  triage: TriageBlock | null;
  masks: MaskRef[];
  study_dir: string;
  reviewer_override: ReviewerOverride | null;
}

export interface MaskPayload {
  clip_id: string;
  chamber: string;
  rle: string;
}

export interface MasksResponse {
  study_id: string;
  masks: MaskPayload[];
}

export interface OverrideResponse {
  study_id: string;
  override: ReviewerOverride;
}

export interface WhatIfResponse {
  cutoff: number;
  precision: number | null;
  sensitivity: number | null;
  workload_hours: number;
  predicted_normal: number;
  cohort_size: number;
}

export interface ThresholdsResponse {
  thresholds: { abnormal_below: number; normal_above: number };
}
