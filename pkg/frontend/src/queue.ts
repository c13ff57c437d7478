// Review queue ordering and rendering. Studies needing attention come first:
// ABNORMAL, GREY, UNDETERMINED, then NORMAL sinking to the bottom. The UI
// only arranges and formats server values; it never recomputes them.

import type { Category, QueueItem } from "./types.js";

export const CATEGORY_PRIORITY: Category[] = [
  "ABNORMAL",
  "GREY",
  "UNDETERMINED",
  "NORMAL",
];

export interface QueueRow {
  studyId: string;
  category: Category; // effective: reviewer override when present
  machineCategory: Category;
  overridden: boolean;
  lvefLabel: string;
  flags: string[];
}

export function effectiveCategory(item: QueueItem): Category {
  return item.override_category ?? item.category;
}

export function orderQueue(items: QueueItem[]): QueueItem[] {
  return [...items].sort((a, b) => {
    const byPriority =
      CATEGORY_PRIORITY.indexOf(effectiveCategory(a)) -
      CATEGORY_PRIORITY.indexOf(effectiveCategory(b));
    if (byPriority !== 0) return byPriority;
    return a.study_id < b.study_id ? -1 : a.study_id > b.study_id ? 1 : 0;
  });
}

export function toRows(items: QueueItem[]): QueueRow[] {
  return orderQueue(items).map((item) => ({
    studyId: item.study_id,
    category: effectiveCategory(item),
    machineCategory: item.category,
    overridden: item.override_category !== null,
    lvefLabel: item.mean_lvef === null ? "—" : `${item.mean_lvef.toFixed(1)}%`,
    flags: item.flags,
  }));
}

export const EMPTY_QUEUE_MESSAGE = "No studies in the store yet.";

export function renderQueueHtml(items: QueueItem[]): string {
  if (items.length === 0) {
    return `<p class="empty-state">${EMPTY_QUEUE_MESSAGE}</p>`;
  }
  const rows = toRows(items)
    .map((row) => {
      const badges = row.flags
        .map((flag) => `<span class="badge warn" title="${flag}">${flag}</span>`)
        .join(" ");
      const overridden = row.overridden
        ? `<span class="badge override">overridden (machine: ${row.machineCategory})</span>`
        : "";
      return (
        `<tr class="cat-${row.category.toLowerCase()}" data-study="${row.studyId}">` +
        `<td><a href="#/study/${encodeURIComponent(row.studyId)}">${row.studyId}</a></td>` +
        `<td>${row.category}</td><td>${row.lvefLabel}</td>` +
        `<td>${badges} ${overridden}</td></tr>`
      );
    })
    .join("");
  return (
    `<table class="queue"><thead><tr>` +
    `<th>Study</th><th>Category</th><th>LVEF</th><th>Flags</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}
