/** Periodic health polling with a three-state badge.
 *
 * Scoring is disabled while the badge is red; the console flips back to
 * green on the first successful poll after an outage.
 */

export type HealthStatus = "unknown" | "healthy" | "unreachable";

export const POLL_INTERVAL_MS = 5000;
export const POLL_TIMEOUT_MS = 2000;

export class HealthPoller {
  status: HealthStatus = "unknown";
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly check: (signal: AbortSignal) => Promise<unknown>,
    private readonly onChange: (status: HealthStatus) => void,
    private readonly intervalMs: number = POLL_INTERVAL_MS,
    private readonly timeoutMs: number = POLL_TIMEOUT_MS,
  ) {}

  start(): void {
    if (this.timer !== null) {
      return;
    }
    void this.tick();
    this.timer = setInterval(() => void this.tick(), this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  async tick(): Promise<void> {
    const controller = new AbortController();
    const timeout = setTimeout(() => controller.abort(), this.timeoutMs);
    let next: HealthStatus;
    try {
      await this.check(controller.signal);
      next = "healthy";
    } catch {
      next = "unreachable";
    } finally {
      clearTimeout(timeout);
    }
    if (next !== this.status) {
      this.status = next;
      this.onChange(next);
    }
  }
}
