/** Wire types mirroring the scoring service JSON, plus console row state. */

export type Distribution = [number, number, number, number];

export interface ScoreRow {
  headline: string;
  p: Distribution;
  label: number;
  rank: number;
}

export interface ScoreResponse {
  scores: ScoreRow[];
}

export interface HealthResponse {
  status: string;
  model: string;
}

export interface ModelCard {
  architecture: string;
  version: string;
  dims: {
    vocab_size: number;
    headline_len: number;
    body_len: number;
    topic_dim: number;
    doc_vec_dim: number;
  };
  fingerprint: string;
}

export interface ErrorEnvelope {
  error: { code: string; message: string };
}

/**
 * One candidate headline in the console. Scores are whatever the service
 * last returned for this row; the console never computes numbers itself.
 * A row is stale exactly when its text differs from the text that was
 * scored, so the flag is derived, never stored.
 */
export interface CandidateRow {
  id: number;
  headline: string;
  lastScored: string | null;
  p: Distribution | null;
  label: number | null;
  rank: number | null;
}

export function isStale(row: CandidateRow): boolean {
  return row.headline !== row.lastScored;
}
