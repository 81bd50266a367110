/** Pure HTML renderers; every number shown comes verbatim from the
 * service response carried in row state. */

import type { Distribution } from "./types.js";
import type { RowView } from "./store.js";
import type { HealthStatus } from "./health.js";

export const INDICATOR_NAMES = [
  "loyal but unclicked",
  "ideal",
  "misleading",
  "ignored",
] as const;

const EMPHASIZED_INDICATOR = 2;

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Four bars spanning one shared 0..1 scale; indicator 2 is the one
 * authors aim for, so its bar is emphasized. */
export function renderDistribution(p: Distribution): string {
  const bars = p
    .map((value, i) => {
      const indicator = i + 1;
      const emphasis = indicator === EMPHASIZED_INDICATOR ? " emphasis" : "";
      return (
        `<div class="indicator${emphasis}" data-indicator="${indicator}">` +
        `<span class="indicator-name">${INDICATOR_NAMES[i]}</span>` +
        `<div class="bar-track"><div class="bar" style="width: ${value * 100}%"></div></div>` +
        `<span class="p-value" data-p="${value}">${value}</span>` +
        `</div>`
      );
    })
    .join("");
  return `<div class="distribution">${bars}</div>`;
}

export function renderRowPanel(row: RowView): string {
  const staleChip = row.stale ? '<span class="chip stale">stale</span>' : "";
  const rank =
    row.rank === null ? "" : `<span class="chip rank">rank ${row.rank}</span>`;
  const label =
    row.label === null
      ? ""
      : `<span class="chip label">label ${row.label}: ${INDICATOR_NAMES[row.label - 1]}</span>`;
  const panel = row.p === null ? '<p class="unscored">not scored yet</p>' : renderDistribution(row.p);
  return (
    `<div class="candidate" data-row-id="${row.id}">` +
    `<div class="candidate-meta">${rank}${label}${staleChip}</div>` +
    panel +
    `</div>`
  );
}

/** Ranking list: a pure sort of received ranks, nothing recomputed. */
export function renderRanking(rows: RowView[], order: number[]): string {
  const byId = new Map(rows.map((row) => [row.id, row]));
  const items = order
    .map((id) => byId.get(id))
    .filter((row): row is RowView => row !== undefined && row.rank !== null)
    .map(
      (row) =>
        `<li data-row-id="${row.id}">` +
        `<span class="rank-number">${row.rank}</span> ` +
        `${escapeHtml(row.headline)}${row.stale ? ' <span class="chip stale">stale</span>' : ""}` +
        `</li>`,
    )
    .join("");
  return `<ol class="ranking">${items}</ol>`;
}

export function renderBadge(status: HealthStatus): string {
  const text = { unknown: "checking", healthy: "service up", unreachable: "service down" }[status];
  return `<span class="badge ${status}">${text}</span>`;
}

export function renderBanner(message: string | null): string {
  if (message === null) {
    return "";
  }
  return `<div class="banner" role="alert">${escapeHtml(message)}</div>`;
}
