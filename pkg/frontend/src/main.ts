// Application shell: hash routing, queue polling, study view with overlay
// playback, override submission, and the what-if slider.

import { ApiClient } from "./api.js";
import { renderQueueHtml } from "./queue.js";
import { decodeSidecar, type DecodedMask } from "./rle.js";
import {
  applyOverrideResponse,
  buildOverrideRequest,
  displayedCategory,
  frameMarkers,
  overlayForFrame,
  playbackIntervalMs,
  renderCycleTableHtml,
} from "./study.js";
import { initialWhatIf, queryWhatIf, whatIfDisplay, type WhatIfState } from "./whatif.js";
import type { StudyReport } from "./types.js";

const QUEUE_POLL_MS = 5000;

const api = new ApiClient("");
const root = document.getElementById("app") as HTMLElement;

let queueTimer: number | undefined;
let playbackTimer: number | undefined;
let whatIfState: WhatIfState = initialWhatIf(60);

function stopTimers(): void {
  if (queueTimer !== undefined) window.clearInterval(queueTimer);
  if (playbackTimer !== undefined) window.clearInterval(playbackTimer);
  queueTimer = undefined;
  playbackTimer = undefined;
}

async function showQueue(): Promise<void> {
  stopTimers();
  const render = async () => {
    try {
      const response = await api.listStudies();
      root.innerHTML =
        `<h1>Review queue</h1>` +
        renderQueueHtml(response.studies) +
        `<section id="whatif"><h2>Threshold what-if</h2>
           <input id="cutoff" type="range" min="0" max="100" step="1" value="${whatIfState.cutoff}">
           <span id="cutoff-value">${whatIfState.cutoff}</span>
           <div id="whatif-result"></div></section>`;
      wireWhatIf();
    } catch {
      root.innerHTML = `<p class="banner stale">Server unreachable — retrying…</p>`;
    }
  };
  await render();
  queueTimer = window.setInterval(render, QUEUE_POLL_MS);
}

function wireWhatIf(): void {
  const slider = document.getElementById("cutoff") as HTMLInputElement | null;
  const value = document.getElementById("cutoff-value");
  const result = document.getElementById("whatif-result");
  if (!slider || !value || !result) return;
  const update = async () => {
    const cutoff = Number(slider.value);
    value.textContent = slider.value;
    whatIfState = await queryWhatIf(api, whatIfState, cutoff);
    const display = whatIfDisplay(whatIfState);
    slider.disabled = !whatIfState.controlsEnabled;
    result.innerHTML =
      (whatIfState.banner ? `<p class="banner stale">${whatIfState.banner}</p>` : "") +
      (display
        ? `<p>precision ${display.precisionLabel} · sensitivity ${display.sensitivityLabel} ·
           ${display.hoursLabel} · ${display.coverageLabel}</p>`
        : "");
  };
  slider.addEventListener("change", update);
  void update();
}

function paintOverlay(canvas: HTMLCanvasElement, mask: DecodedMask | null): void {
  const ctx = canvas.getContext("2d");
  if (!ctx || !mask) return;
  canvas.width = mask.cols;
  canvas.height = mask.rows;
  const image = ctx.createImageData(mask.cols, mask.rows);
  for (let i = 0; i < mask.bits.length; i++) {
    const on = mask.bits[i] === 1;
    image.data[i * 4] = on ? 255 : 20;
    image.data[i * 4 + 1] = on ? 80 : 20;
    image.data[i * 4 + 2] = on ? 80 : 24;
    image.data[i * 4 + 3] = on ? 200 : 255;
  }
  ctx.putImageData(image, 0, 0);
}

async function showStudy(studyId: string): Promise<void> {
  stopTimers();
  let report: StudyReport;
  try {
    report = await api.getStudy(studyId);
  } catch {
    root.innerHTML = `<h1>Not found</h1>
      <p>No study ${studyId} in the store.</p><p><a href="#/">back to queue</a></p>`;
    return;
  }
  const masksResponse = await api.getMasks(studyId).catch(() => null);
  const lvMasks =
    masksResponse?.masks
      .filter((m) => m.chamber === "LV")
      .flatMap((m) => decodeSidecar(m.rle)) ?? [];
  const markers = frameMarkers(report);
  const markerByFrame = new Map(markers.map((m) => [m.frame, m.kind]));
  const numFrames = lvMasks.length;

  root.innerHTML = `
    <h1>${report.study_id} — ${displayedCategory(report)}</h1>
    <p><a href="#/">back to queue</a></p>
    ${report.reviewer_override
      ? `<p class="badge override">override by ${report.reviewer_override.reviewer_id}
         (machine: ${report.category})</p>`
      : ""}
    <p>flags: ${report.quality_flags.join(", ") || "none"}</p>
    <canvas id="overlay"></canvas>
    <p id="frame-label"></p>
    ${report.lvef ? `<p>mean LVEF ${report.lvef.mean.toFixed(1)}% over
      ${report.lvef.cycles_used} beat(s), method ${report.lvef.method}</p>` : ""}
    ${renderCycleTableHtml(report)}
    <form id="override-form">
      <select id="override-category">
        <option>ABNORMAL</option><option>GREY</option><option>NORMAL</option>
      </select>
      <input id="reviewer-id" placeholder="reviewer id">
      <button type="submit">Override triage</button>
    </form>`;

  const canvas = document.getElementById("overlay") as HTMLCanvasElement;
  const label = document.getElementById("frame-label") as HTMLElement;
  if (numFrames > 0) {
    let frame = 0;
    const selectedClip = report.selected["A4C"] ?? report.selected["A2C"];
    const interval = selectedClip ? playbackIntervalMs(report, selectedClip) : 40;
    const tick = () => {
      paintOverlay(canvas, overlayForFrame(lvMasks, frame));
      const marker = markerByFrame.get(frame);
      label.textContent = `frame ${frame}${marker ? ` — ${marker}` : ""}`;
      frame = (frame + 1) % numFrames;
    };
    tick();
    playbackTimer = window.setInterval(tick, interval);
  }

  const form = document.getElementById("override-form") as HTMLFormElement;
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const category = (document.getElementById("override-category") as HTMLSelectElement).value;
    const reviewer = (document.getElementById("reviewer-id") as HTMLInputElement).value;
    try {
      const body = buildOverrideRequest(category, reviewer);
      const response = await api.postOverride(studyId, body.category, body.reviewer_id);
      report = applyOverrideResponse(report, response);
      await showStudy(studyId); // re-render with server-confirmed state
    } catch (error) {
      window.alert(`override rejected: ${error}`);
    }
  });
}

function route(): void {
  const hash = window.location.hash;
  const match = hash.match(/^#\/study\/(.+)$/);
  if (match) {
    void showStudy(decodeURIComponent(match[1]));
  } else {
    void showQueue();
  }
}

window.addEventListener("hashchange", route);
route();
