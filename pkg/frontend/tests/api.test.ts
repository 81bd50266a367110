import { describe, expect, it } from "vitest";

import {
  MAX_CANDIDATES,
  ServiceError,
  fetchHealth,
  fetchModelCard,
  fetchScores,
} from "../src/api.js";
import type { FetchLike } from "../src/api.js";

interface Recorded {
  url: string;
  init: RequestInit | undefined;
}

function fakeFetch(status: number, payload: unknown): { impl: FetchLike; calls: Recorded[] } {
  const calls: Recorded[] = [];
  const impl: FetchLike = async (url, init) => {
    calls.push({ url, init });
    return new Response(JSON.stringify(payload), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { impl, calls };
}

describe("fetchScores", () => {
  it("posts the body and candidates as JSON to /v1/score", async () => {
    const { impl, calls } = fakeFetch(200, {
      scores: [{ headline: "h", p: [0.25, 0.25, 0.25, 0.25], label: 1, rank: 1 }],
    });
    const response = await fetchScores("http://localhost:8080/", "article body", ["h"], impl);
    expect(calls).toHaveLength(1);
    expect(calls[0]!.url).toBe("http://localhost:8080/v1/score");
    expect(calls[0]!.init?.method).toBe("POST");
    expect(calls[0]!.init?.headers).toEqual({ "Content-Type": "application/json" });
    expect(JSON.parse(calls[0]!.init?.body as string)).toEqual({
      body: "article body",
      candidates: ["h"],
    });
    expect(response.scores[0]!.rank).toBe(1);
  });

  it("rejects an empty candidate list before any network call", async () => {
    const { impl, calls } = fakeFetch(200, {});
    await expect(fetchScores("http://x", "body", [], impl)).rejects.toMatchObject({
      code: "empty_candidates",
      status: 0,
    });
    expect(calls).toHaveLength(0);
  });

  it("rejects more candidates than the service accepts", async () => {
    const { impl, calls } = fakeFetch(200, {});
    const tooMany = Array.from({ length: MAX_CANDIDATES + 1 }, (_, i) => `h${i}`);
    await expect(fetchScores("http://x", "body", tooMany, impl)).rejects.toMatchObject({
      code: "too_many_candidates",
    });
    expect(calls).toHaveLength(0);
  });

  it("maps the service error envelope onto ServiceError", async () => {
    const { impl } = fakeFetch(400, {
      error: { code: "empty_candidate", message: "candidate 2 is empty" },
    });
    const failure = fetchScores("http://x", "body", ["ok", "  "], impl);
    await expect(failure).rejects.toBeInstanceOf(ServiceError);
    await expect(failure).rejects.toMatchObject({
      code: "empty_candidate",
      message: "candidate 2 is empty",
      status: 400,
    });
  });

  it("falls back to a generic error when the body is not an envelope", async () => {
    const impl: FetchLike = async () => new Response("gateway exploded", { status: 502 });
    await expect(fetchScores("http://x", "body", ["h"], impl)).rejects.toMatchObject({
      code: "http_error",
      status: 502,
    });
  });
});

describe("read-only endpoints", () => {
  it("fetches health from /v1/health", async () => {
    const { impl, calls } = fakeFetch(200, { status: "ok", model: "proposed" });
    const health = await fetchHealth("http://localhost:8080", impl);
    expect(calls[0]!.url).toBe("http://localhost:8080/v1/health");
    expect(health.status).toBe("ok");
    expect(health.model).toBe("proposed");
  });

  it("fetches the model card from /v1/model", async () => {
    const card = {
      architecture: "proposed",
      version: "0.1.0",
      dims: { vocab_size: 50, headline_len: 12, body_len: 60, topic_dim: 20, doc_vec_dim: 100 },
      fingerprint: "abc123",
    };
    const { impl, calls } = fakeFetch(200, card);
    const fetched = await fetchModelCard("http://localhost:8080///", impl);
    expect(calls[0]!.url).toBe("http://localhost:8080/v1/model");
    expect(fetched).toEqual(card);
  });

  it("propagates health failures as ServiceError", async () => {
    const { impl } = fakeFetch(500, { error: { code: "internal_error", message: "boom" } });
    await expect(fetchHealth("http://x", impl)).rejects.toMatchObject({
      code: "internal_error",
      status: 500,
    });
  });
});
