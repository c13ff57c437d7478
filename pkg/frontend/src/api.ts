// Thin HTTP client for the pipeline's review API. fetch is injectable so
// contract tests can replay recorded responses.

import type {
  MasksResponse,
  OverrideResponse,
  StudiesResponse,
  StudyReport,
  ThresholdsResponse,
  WhatIfResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      throw new ApiError(response.status, `${init?.method ?? "GET"} ${path}`);
    }
    return (await response.json()) as T;
  }

  listStudies(): Promise<StudiesResponse> {
    return this.request("/studies");
  }

  getStudy(studyId: string): Promise<StudyReport> {
    return this.request(`/studies/${encodeURIComponent(studyId)}`);
  }

  getMasks(studyId: string): Promise<MasksResponse> {
    return this.request(`/studies/${encodeURIComponent(studyId)}/masks`);
  }

  postOverride(
    studyId: string,
    category: string,
    reviewerId: string,
  ): Promise<OverrideResponse> {
    return this.request(`/studies/${encodeURIComponent(studyId)}/override`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ category, reviewer_id: reviewerId }),
    });
  }

  whatIf(cutoff: number): Promise<WhatIfResponse> {
    return this.request(`/whatif?cutoff=${encodeURIComponent(cutoff)}`);
  }

  getConfig(): Promise<ThresholdsResponse> {
    return this.request("/config");
  }

  putThresholds(
    abnormalBelow: number,
    normalAbove: number,
  ): Promise<ThresholdsResponse> {
    return this.request("/config/thresholds", {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        abnormal_below: abnormalBelow,
        normal_above: normalAbove,
      }),
    });
  }
}
