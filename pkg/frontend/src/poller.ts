/**
 * setInterval-based polling with an overlap guard.
 *
 * A tick that is still awaiting its task blocks further ticks, so a slow
 * gateway never stacks requests. Task failures go to onError and polling
 * continues; a destroyed poller ignores everything.
 */

export interface Poller {
  start(): void;
  stop(): void;
  /** Run the task immediately and reset the interval timer. */
  refreshNow(): Promise<void>;
  destroy(): void;
}

export function createPoller(
  task: () => Promise<void>,
  intervalMs: number,
  onError?: (err: unknown) => void,
): Poller {
  let timer: ReturnType<typeof setInterval> | null = null;
  let running = false;
  let destroyed = false;

  async function tick(): Promise<void> {
    if (running || destroyed) return;
    running = true;
    try {
      await task();
    } catch (err) {
      if (!destroyed && onError) onError(err);
    } finally {
      running = false;
    }
  }

  function arm(): void {
    if (timer !== null) clearInterval(timer);
    timer = setInterval(tick, intervalMs);
  }

  return {
    start() {
      if (destroyed || timer !== null) return;
      void tick();
      arm();
    },
    stop() {
      if (timer !== null) {
        clearInterval(timer);
        timer = null;
      }
    },
    async refreshNow() {
      if (destroyed) return;
      if (timer !== null) arm();
      await tick();
    },
    destroy() {
      destroyed = true;
      if (timer !== null) {
        clearInterval(timer);
        timer = null;
      }
    },
  };
}
