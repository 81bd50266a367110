/** Thin typed client for the scoring service HTTP API. */

import type { ErrorEnvelope, HealthResponse, ModelCard, ScoreResponse } from "./types.js";

export const MAX_CANDIDATES = 32;

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.name = "ServiceError";
    this.code = code;
    this.status = status;
  }
}

function trimBase(baseUrl: string): string {
  return baseUrl.replace(/\/+$/, "");
}

async function throwFromResponse(response: Response): Promise<never> {
  let code = "http_error";
  let message = `service responded ${response.status}`;
  try {
    const payload = (await response.json()) as ErrorEnvelope;
    if (payload && payload.error) {
      code = payload.error.code;
      message = payload.error.message;
    }
  } catch {
    // non-JSON error body, keep the generic message
  }
  throw new ServiceError(code, message, response.status);
}

export async function fetchHealth(
  baseUrl: string,
  fetchImpl: FetchLike = fetch,
  signal?: AbortSignal,
): Promise<HealthResponse> {
  const response = await fetchImpl(`${trimBase(baseUrl)}/v1/health`, { signal });
  if (!response.ok) {
    await throwFromResponse(response);
  }
  return (await response.json()) as HealthResponse;
}

export async function fetchModelCard(
  baseUrl: string,
  fetchImpl: FetchLike = fetch,
  signal?: AbortSignal,
): Promise<ModelCard> {
  const response = await fetchImpl(`${trimBase(baseUrl)}/v1/model`, { signal });
  if (!response.ok) {
    await throwFromResponse(response);
  }
  return (await response.json()) as ModelCard;
}

export async function fetchScores(
  baseUrl: string,
  body: string,
  candidates: string[],
  fetchImpl: FetchLike = fetch,
  signal?: AbortSignal,
): Promise<ScoreResponse> {
  if (candidates.length === 0) {
    throw new ServiceError("empty_candidates", "no candidates to score", 0);
  }
  if (candidates.length > MAX_CANDIDATES) {
    throw new ServiceError(
      "too_many_candidates",
      `at most ${MAX_CANDIDATES} candidates per request`,
      0,
    );
  }
  const response = await fetchImpl(`${trimBase(baseUrl)}/v1/score`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ body, candidates }),
    signal,
  });
  if (!response.ok) {
    await throwFromResponse(response);
  }
  return (await response.json()) as ScoreResponse;
}
