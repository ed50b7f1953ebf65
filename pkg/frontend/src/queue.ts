/** Outbox for submissions that could not reach the service.
 *
 * Entries are keyed by task id, which doubles as the idempotency key: if
 * an acknowledgement was lost and the judgment already landed, the retry
 * is acknowledged as a duplicate server-side and nothing is appended, so
 * a judgment is delivered at most once no matter how often we retry.
 */

export type SubmitOutcome = "sent" | "queued";

export class SubmitQueue<T> {
  private readonly pending = new Map<string, T>();

  constructor(
    private readonly send: (body: T) => Promise<void>,
    private readonly isTransient: (err: unknown) => boolean,
  ) {}

  get size(): number {
    return this.pending.size;
  }

  /** Try to deliver now; hold the entry for retry on a transient failure.
   * Non-transient failures (validation, stale task) are not retryable
   * and propagate to the caller. */
  async submit(taskId: string, body: T): Promise<SubmitOutcome> {
    this.pending.set(taskId, body);
    try {
      await this.send(body);
    } catch (err) {
      if (this.isTransient(err)) return "queued";
      this.pending.delete(taskId);
      throw err;
    }
    this.pending.delete(taskId);
    return "sent";
  }

  /** Retry everything pending, oldest first. Stops at the first transient
   * failure and returns how many entries were delivered. */
  async flush(): Promise<number> {
    let delivered = 0;
    for (const [taskId, body] of [...this.pending]) {
      try {
        await this.send(body);
      } catch (err) {
        if (this.isTransient(err)) return delivered;
        this.pending.delete(taskId);
        throw err;
      }
      this.pending.delete(taskId);
      delivered += 1;
    }
    return delivered;
  }
}
