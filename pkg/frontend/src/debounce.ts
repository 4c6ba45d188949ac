/** Trailing-edge debouncer with latest-wins semantics.
 *
 * While the user drags a slider, submissions collapse so at most one request
 * leaves per window. At most one request is ever in flight; a submission that
 * fires mid-flight is parked and replaced by newer ones, and only the newest
 * runs when the flight returns. Stale completions are dropped via a token.
 */

export type Runner<T> = (arg: T, token: number) => Promise<unknown>;

export class Debouncer<T> {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private pending: { arg: T } | null = null;
  private parked: { arg: T } | null = null;
  private inFlight = false;
  private token = 0;
  /** Requests actually launched; used by tests to assert rate limits. */
  public requestCount = 0;

  constructor(
    private readonly windowMs: number,
    private readonly run: Runner<T>,
  ) {}

  /** Record the newest value and (re)arm the window timer. */
  submit(arg: T): void {
    this.pending = { arg };
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => this.fire(), this.windowMs);
  }

  /** Bypass the window (e.g. an explicit Apply click). */
  flush(arg: T): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.pending = null;
    this.dispatch(arg);
  }

  /** True when the given completion token is still the newest request. */
  isCurrent(token: number): boolean {
    return token === this.token;
  }

  private fire(): void {
    this.timer = null;
    if (this.pending === null) return;
    const { arg } = this.pending;
    this.pending = null;
    this.dispatch(arg);
  }

  private dispatch(arg: T): void {
    if (this.inFlight) {
      this.parked = { arg };
      return;
    }
    this.launch(arg);
  }

  private launch(arg: T): void {
    this.inFlight = true;
    this.requestCount += 1;
    this.token += 1;
    const token = this.token;
    void Promise.resolve(this.run(arg, token)).finally(() => {
      this.inFlight = false;
      if (this.parked !== null) {
        const next = this.parked;
        this.parked = null;
        this.launch(next.arg);
      }
    });
  }
}
