/** Browser wiring: ties the store, scheduler, health poller, and
 * renderers to the page. All behavior lives in the imported modules;
 * this file only moves strings between them and the DOM. */

import { fetchHealth, fetchScores, ServiceError } from "./api.js";
import { ConsoleStore } from "./store.js";
import type { ScoreSnapshot } from "./store.js";
import { ScoreScheduler } from "./scheduler.js";
import { HealthPoller } from "./health.js";
import { renderBadge, renderBanner, renderRanking, renderRowPanel } from "./render.js";
import type { ScoreResponse } from "./types.js";

function element<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const baseUrlInput = element<HTMLInputElement>("base-url");
const badgeHost = element<HTMLSpanElement>("badge");
const bannerHost = element<HTMLDivElement>("banner");
const bodyInput = element<HTMLTextAreaElement>("body");
const candidateList = element<HTMLUListElement>("candidates");
const addButton = element<HTMLButtonElement>("add-candidate");
const scoreButton = element<HTMLButtonElement>("score-now");
const rankingHost = element<HTMLDivElement>("ranking");

const store = new ConsoleStore();

function baseUrl(): string {
  return baseUrlInput.value.trim() || "http://localhost:8080";
}

function describeError(error: unknown): string {
  if (error instanceof ServiceError) {
    return `scoring failed (${error.code}): ${error.message}`;
  }
  return "service unreachable";
}

const scheduler = new ScoreScheduler<ScoreSnapshot, ScoreResponse>(
  (snapshot, signal) =>
    fetchScores(
      baseUrl(),
      snapshot.body,
      snapshot.entries.map((entry) => entry.headline),
      fetch,
      signal,
    ),
  (snapshot, response) => {
    store.applyScores(snapshot, response);
    refresh();
  },
  (_snapshot, error) => {
    store.applyFailure(describeError(error));
    refresh();
  },
);

const poller = new HealthPoller(
  (signal) => fetchHealth(baseUrl(), fetch, signal),
  () => refresh(),
);

/** Scoring is gated on the health badge; a red badge returns null so
 * the scheduler skips the request entirely. */
function requestIfAllowed(): ScoreSnapshot | null {
  if (poller.status !== "healthy") {
    return null;
  }
  return store.snapshot();
}

function refresh(): void {
  badgeHost.innerHTML = renderBadge(poller.status);
  bannerHost.innerHTML = renderBanner(store.banner);
  const views = store.viewRows();
  for (const view of views) {
    const panel = candidateList.querySelector<HTMLDivElement>(
      `[data-panel-for="${view.id}"]`,
    );
    if (panel) {
      panel.innerHTML = renderRowPanel(view);
    }
  }
  rankingHost.innerHTML = renderRanking(views, store.rankingOrder());
  scoreButton.disabled = poller.status !== "healthy" || !store.scorable();
}

function addCandidateRow(): void {
  const row = store.addCandidate();
  if (row === null) {
    store.applyFailure("at most 32 candidates");
    refresh();
    return;
  }
  const item = document.createElement("li");
  item.className = "candidate-row";

  const input = document.createElement("input");
  input.type = "text";
  input.placeholder = "candidate headline";
  input.addEventListener("input", () => {
    store.setCandidate(row.id, input.value);
    refresh();
    scheduler.noteChange(requestIfAllowed);
  });

  const remove = document.createElement("button");
  remove.textContent = "remove";
  remove.addEventListener("click", () => {
    store.removeCandidate(row.id);
    item.remove();
    refresh();
  });

  const panel = document.createElement("div");
  panel.dataset["panelFor"] = String(row.id);

  item.append(input, remove, panel);
  candidateList.append(item);
  input.focus();
  refresh();
}

bodyInput.addEventListener("input", () => {
  store.setBody(bodyInput.value);
  scheduler.noteChange(requestIfAllowed);
});

addButton.addEventListener("click", addCandidateRow);
scoreButton.addEventListener("click", () => scheduler.scoreNow(requestIfAllowed));
baseUrlInput.addEventListener("change", () => void poller.tick());

addCandidateRow();
poller.start();
refresh();
