/** Console state: candidate rows, score bookkeeping, and the error banner.
 *
 * Rows live in request order and display in request order; the ranking
 * panel is a pure sort of the ranks the service returned. A failed score
 * request never discards previously displayed numbers.
 */

import { MAX_CANDIDATES } from "./api.js";
import type { CandidateRow, ScoreResponse } from "./types.js";
import { isStale } from "./types.js";

export interface ScoreSnapshot {
  body: string;
  entries: { id: number; headline: string }[];
}

export interface RowView extends CandidateRow {
  stale: boolean;
}

export class ConsoleStore {
  body = "";
  banner: string | null = null;
  private rows: CandidateRow[] = [];
  private nextId = 1;

  addCandidate(text = ""): CandidateRow | null {
    if (this.rows.length >= MAX_CANDIDATES) {
      return null;
    }
    const row: CandidateRow = {
      id: this.nextId++,
      headline: text,
      lastScored: null,
      p: null,
      label: null,
      rank: null,
    };
    this.rows.push(row);
    return row;
  }

  setCandidate(id: number, text: string): void {
    const row = this.find(id);
    if (row) {
      row.headline = text;
    }
  }

  removeCandidate(id: number): void {
    this.rows = this.rows.filter((row) => row.id !== id);
  }

  setBody(text: string): void {
    this.body = text;
  }

  /** True when at least one candidate has non-blank text. */
  scorable(): boolean {
    return this.rows.some((row) => row.headline.trim().length > 0);
  }

  /** Freeze what would be scored right now; blank rows are skipped. */
  snapshot(): ScoreSnapshot | null {
    const entries = this.rows
      .filter((row) => row.headline.trim().length > 0)
      .map((row) => ({ id: row.id, headline: row.headline }));
    if (entries.length === 0) {
      return null;
    }
    return { body: this.body, entries };
  }

  /**
   * Fold a service response back into the rows the snapshot was taken
   * from. Response rows arrive in request order, so they pair with the
   * snapshot entries by position. Rows removed while the request was in
   * flight are ignored; rows edited in flight stay stale because their
   * text no longer matches what was scored.
   */
  applyScores(snapshot: ScoreSnapshot, response: ScoreResponse): void {
    this.banner = null;
    snapshot.entries.forEach((entry, position) => {
      const scored = response.scores[position];
      const row = this.find(entry.id);
      if (!scored || !row) {
        return;
      }
      row.lastScored = scored.headline;
      row.p = scored.p;
      row.label = scored.label;
      row.rank = scored.rank;
    });
  }

  /** Service unreachable or rejected: banner up, numbers untouched. */
  applyFailure(message: string): void {
    this.banner = message;
  }

  viewRows(): RowView[] {
    return this.rows.map((row) => ({ ...row, stale: isStale(row) }));
  }

  /** Row ids sorted by received rank; unranked rows trail in row order. */
  rankingOrder(): number[] {
    const ranked = this.rows
      .filter((row) => row.rank !== null)
      .sort((a, b) => (a.rank as number) - (b.rank as number));
    const unranked = this.rows.filter((row) => row.rank === null);
    return [...ranked, ...unranked].map((row) => row.id);
  }

  private find(id: number): CandidateRow | undefined {
    return this.rows.find((row) => row.id === id);
  }
}
