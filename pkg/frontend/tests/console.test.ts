/** End-to-end console behavior against a scripted service that follows
 * the documented scoring contract: response rows echo the request order,
 * ranks are a stable sort of descending p[2], label is the argmax
 * indicator. Numbers shown in the panels must come from the response
 * verbatim; the console never computes any of them.
 */

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ConsoleStore } from "../src/store.js";
import type { ScoreSnapshot } from "../src/store.js";
import { DEBOUNCE_MS, ScoreScheduler } from "../src/scheduler.js";
import { renderRanking, renderRowPanel } from "../src/render.js";
import type { Distribution, ScoreResponse } from "../src/types.js";

const SERVICE_LATENCY_MS = 150;

const KNOWN_SCORES: Record<string, Distribution> = {
  "Quiet gains in solar manufacturing": [0.21, 0.61, 0.06, 0.12],
  "You won't believe this solar trick": [0.03, 0.08, 0.8100000000000001, 0.08],
  "Solar factories hit record output": [0.11, 0.74, 0.05, 0.1],
};

const UNIFORM: Distribution = [0.25, 0.25, 0.25, 0.25];

function contractResponse(snapshot: ScoreSnapshot): ScoreResponse {
  const headlines = snapshot.entries.map((entry) => entry.headline);
  const probs = headlines.map((headline) => KNOWN_SCORES[headline] ?? UNIFORM);
  const order = probs
    .map((p, index) => ({ index, ideal: p[1] }))
    .sort((a, b) => b.ideal - a.ideal || a.index - b.index);
  const ranks = new Array<number>(probs.length);
  order.forEach((entry, position) => {
    ranks[entry.index] = position + 1;
  });
  return {
    scores: headlines.map((headline, index) => {
      const p = probs[index]!;
      const label = 1 + p.indexOf(Math.max(...p));
      return { headline, p, label, rank: ranks[index]! };
    }),
  };
}

function startConsole(serviceUp: () => boolean = () => true) {
  const store = new ConsoleStore();
  const responses: ScoreResponse[] = [];
  const scheduler = new ScoreScheduler<ScoreSnapshot, ScoreResponse>(
    (snapshot) =>
      new Promise<ScoreResponse>((resolve, reject) => {
        setTimeout(() => {
          if (serviceUp()) {
            const response = contractResponse(snapshot);
            responses.push(response);
            resolve(response);
          } else {
            reject(new Error("service unreachable"));
          }
        }, SERVICE_LATENCY_MS);
      }),
    (snapshot, response) => store.applyScores(snapshot, response),
    () => store.applyFailure("service unreachable"),
  );
  return { store, scheduler, responses };
}

beforeEach(() => {
  vi.useFakeTimers();
});

afterEach(() => {
  vi.useRealTimers();
});

describe("scoring two candidates", () => {
  it("renders two panels whose numbers equal the response verbatim", async () => {
    const { store, scheduler, responses } = startConsole();
    store.setBody("Solar panel production rose quietly across three provinces this year.");
    store.addCandidate("Quiet gains in solar manufacturing");
    store.addCandidate("You won't believe this solar trick");

    scheduler.scoreNow(() => store.snapshot());
    await vi.advanceTimersByTimeAsync(SERVICE_LATENCY_MS);

    expect(responses).toHaveLength(1);
    const response = responses[0]!;
    const views = store.viewRows();
    expect(views).toHaveLength(2);

    views.forEach((view, index) => {
      const scored = response.scores[index]!;
      expect(view.headline).toBe(scored.headline);
      expect(view.p).toEqual(scored.p);
      expect(view.label).toBe(scored.label);
      expect(view.rank).toBe(scored.rank);
      expect(view.stale).toBe(false);

      const panel = renderRowPanel(view);
      for (const value of scored.p) {
        expect(panel).toContain(`>${String(value)}</span>`);
      }
      expect(panel).toContain(`rank ${scored.rank}`);
    });

    expect(views[0]!.rank).toBe(1);
    expect(views[1]!.rank).toBe(2);
  });
});

describe("editing a scored headline", () => {
  it("flags the row stale immediately and keeps the old numbers", async () => {
    const { store, scheduler } = startConsole();
    store.setBody("body");
    store.addCandidate("Quiet gains in solar manufacturing");
    const edited = store.addCandidate("You won't believe this solar trick")!;
    scheduler.scoreNow(() => store.snapshot());
    await vi.advanceTimersByTimeAsync(SERVICE_LATENCY_MS);
    const before = store.viewRows()[1]!;
    expect(before.stale).toBe(false);

    store.setCandidate(edited.id, "Solar factories hit record output");
    const after = store.viewRows()[1]!;
    expect(after.stale).toBe(true);
    expect(after.p).toEqual(before.p);
    expect(after.rank).toBe(before.rank);
    expect(renderRowPanel(after)).toContain('class="chip stale"');
  });

  it("debounced rescoring re-ranks well inside the two-second budget", async () => {
    const { store, scheduler, responses } = startConsole();
    store.setBody("body");
    const kept = store.addCandidate("Quiet gains in solar manufacturing")!;
    const edited = store.addCandidate("You won't believe this solar trick")!;
    scheduler.scoreNow(() => store.snapshot());
    await vi.advanceTimersByTimeAsync(SERVICE_LATENCY_MS);
    expect(store.rankingOrder()).toEqual([kept.id, edited.id]);

    const editedAt = Date.now();
    store.setCandidate(edited.id, "Solar factories hit record output");
    scheduler.noteChange(() => store.snapshot());

    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS + SERVICE_LATENCY_MS);
    const rescoredAt = Date.now();

    expect(rescoredAt - editedAt).toBeLessThanOrEqual(2000);
    expect(responses).toHaveLength(2);
    const views = store.viewRows();
    expect(views[1]!.stale).toBe(false);
    expect(views[1]!.rank).toBe(1);
    expect(views[0]!.rank).toBe(2);
    expect(store.rankingOrder()).toEqual([edited.id, kept.id]);

    const ranking = renderRanking(views, store.rankingOrder());
    expect(ranking.indexOf("Solar factories hit record output")).toBeLessThan(
      ranking.indexOf("Quiet gains in solar manufacturing"),
    );
  });
});

describe("service failure mid-session", () => {
  it("raises a banner and loses no previously displayed numbers", async () => {
    let up = true;
    const { store, scheduler } = startConsole(() => up);
    store.setBody("body");
    store.addCandidate("Quiet gains in solar manufacturing");
    scheduler.scoreNow(() => store.snapshot());
    await vi.advanceTimersByTimeAsync(SERVICE_LATENCY_MS);
    const scored = store.viewRows()[0]!;
    expect(scored.p).not.toBeNull();

    up = false;
    scheduler.scoreNow(() => store.snapshot());
    await vi.advanceTimersByTimeAsync(SERVICE_LATENCY_MS);

    expect(store.banner).toBe("service unreachable");
    const after = store.viewRows()[0]!;
    expect(after.p).toEqual(scored.p);
    expect(after.label).toBe(scored.label);
    expect(after.rank).toBe(scored.rank);
  });
});

describe("burst typing", () => {
  it("sends one request after the quiet window, scoring the final text", async () => {
    const { store, scheduler, responses } = startConsole();
    store.setBody("body");
    const row = store.addCandidate("")!;
    for (const text of ["S", "So", "Sol", "Solar factories hit record output"]) {
      store.setCandidate(row.id, text);
      scheduler.noteChange(() => store.snapshot());
      await vi.advanceTimersByTimeAsync(100);
    }
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS + SERVICE_LATENCY_MS);
    expect(responses).toHaveLength(1);
    expect(responses[0]!.scores[0]!.headline).toBe("Solar factories hit record output");
    expect(store.viewRows()[0]!.p).toEqual(KNOWN_SCORES["Solar factories hit record output"]);
  });
});
