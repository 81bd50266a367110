/** Debounced, latest-wins scheduling of score requests.
 *
 * Typing feeds noteChange(); the request fires once input has been quiet
 * for the debounce window. An explicit Score click calls scoreNow() and
 * skips the wait. Only one request is ever in flight: scheduling a new
 * one aborts the old, and a response is dropped unless it belongs to the
 * newest request.
 */

export const DEBOUNCE_MS = 800;

export interface ScheduledRun<Req, Res> {
  request: Req;
  run: (request: Req, signal: AbortSignal) => Promise<Res>;
}

export class ScoreScheduler<Req, Res> {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private controller: AbortController | null = null;
  private sequence = 0;

  constructor(
    private readonly run: (request: Req, signal: AbortSignal) => Promise<Res>,
    private readonly onResult: (request: Req, result: Res) => void,
    private readonly onError: (request: Req, error: unknown) => void,
    private readonly delayMs: number = DEBOUNCE_MS,
  ) {}

  /** Debounced trigger; makeRequest runs when the timer fires and may
   * return null to skip (nothing scorable). */
  noteChange(makeRequest: () => Req | null): void {
    this.cancelTimer();
    this.timer = setTimeout(() => {
      this.timer = null;
      const request = makeRequest();
      if (request !== null) {
        this.launch(request);
      }
    }, this.delayMs);
  }

  /** Immediate trigger for the explicit Score action. */
  scoreNow(makeRequest: () => Req | null): void {
    this.cancelTimer();
    const request = makeRequest();
    if (request !== null) {
      this.launch(request);
    }
  }

  /** True while a debounce timer or request is pending. */
  busy(): boolean {
    return this.timer !== null || this.controller !== null;
  }

  dispose(): void {
    this.cancelTimer();
    this.controller?.abort();
    this.controller = null;
  }

  private launch(request: Req): void {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const ticket = ++this.sequence;
    this.run(request, controller.signal).then(
      (result) => {
        if (ticket === this.sequence) {
          this.controller = null;
          this.onResult(request, result);
        }
      },
      (error) => {
        if (ticket === this.sequence && !controller.signal.aborted) {
          this.controller = null;
          this.onError(request, error);
        }
      },
    );
  }

  private cancelTimer(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }
}
