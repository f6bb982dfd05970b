import type { AxisBounds, Viewport } from "./types.js";
import type { LiveSession } from "./session.js";

export interface Clock {
  now(): number;
  schedule(fn: () => void, ms: number): void;
}

const realClock: Clock = {
  now: () => Date.now(),
  schedule: (fn, ms) => setTimeout(fn, ms),
};

const DEBOUNCE_MS = 50;

function formatNumber(v: number): string {
  return Number.isInteger(v) ? String(v) : String(v);
}

/** Compose a filter-expression string from per-axis bounds. */
export function boundsToQuery(viewport: Viewport): string {
  return Object.entries(viewport)
    .map(([axis, b]) => `${formatNumber(b.lo)} < ${axis} < ${formatNumber(b.hi)}`)
    .join(" and ");
}

/** Range sliders: one debounced from_input message per slider per 50 ms.
 *
 * Posts to the lo/hi variable pair when the graph has one, else composes a
 * filter expression for the free query variable.
 */
export class RangeControls {
  /** messages actually sent, newest last (observable for tests/debugging) */
  readonly sent: { moduleId: string; msg: Record<string, unknown> }[] = [];
  private lastSentAt = new Map<string, number>();
  private pending = new Map<string, AxisBounds>();
  private lastSent = new Map<string, AxisBounds>();
  private timerArmed = new Set<string>();

  constructor(
    private readonly session: LiveSession,
    private readonly clock: Clock = realClock,
  ) {}

  /** Slider moved; a message goes out now or at the trailing edge. */
  drag(axis: string, bounds: AxisBounds): void {
    const clamped = this.session.state.setSlider(axis, bounds);
    const prev = this.lastSent.get(axis);
    if (prev && prev.lo === clamped.lo && prev.hi === clamped.hi) return;
    this.pending.set(axis, clamped);
    const now = this.clock.now();
    const lastAt = this.lastSentAt.get(axis) ?? -Infinity;
    if (now - lastAt >= DEBOUNCE_MS) {
      this.flush(axis);
    } else if (!this.timerArmed.has(axis)) {
      this.timerArmed.add(axis);
      this.clock.schedule(() => {
        this.timerArmed.delete(axis);
        this.flush(axis);
      }, DEBOUNCE_MS - (now - lastAt));
    }
  }

  /** Drag ended; deliver whatever is still pending (no-op without movement). */
  release(axis: string): void {
    if (this.pending.has(axis)) this.flush(axis);
  }

  private flush(axis: string): void {
    const bounds = this.pending.get(axis);
    if (!bounds) return;
    this.pending.delete(axis);
    this.lastSentAt.set(axis, this.clock.now());
    this.lastSent.set(axis, bounds);
    this.post(axis, bounds);
  }

  private post(axis: string, bounds: AxisBounds): void {
    const roles = this.session.roles;
    if (roles.loVariable && roles.hiVariable) {
      this.send(roles.loVariable, { [axis]: bounds.lo });
      this.send(roles.hiVariable, { [axis]: bounds.hi });
    } else if (roles.queryVariable) {
      this.send(roles.queryVariable, { query: boundsToQuery(this.session.state.sliders) });
    }
  }

  private send(moduleId: string, msg: Record<string, unknown>): void {
    this.sent.push({ moduleId, msg });
    void this.session.postInput(moduleId, msg);
  }
}

/** The Filter toggle: push the visible viewport into the range variables so
 * all histogram bins are reallocated to it; releasing the toggle restores the
 * data envelope. Idempotent when the viewport did not change. */
export class FilterViewport {
  readonly sent: { moduleId: string; msg: Record<string, unknown> }[] = [];
  private lastPosted: string | null = null;

  constructor(private readonly session: LiveSession) {}

  apply(viewport: Viewport): boolean {
    return this.postBounds(viewport);
  }

  /** Filter off: revert to the full data envelope. */
  clear(): boolean {
    return this.postBounds(this.session.state.envelope);
  }

  private postBounds(viewport: Viewport): boolean {
    const { loVariable, hiVariable } = this.session.roles;
    if (!loVariable || !hiVariable) return false;
    const key = JSON.stringify(viewport);
    if (key === this.lastPosted) return false; // idempotent
    this.lastPosted = key;
    const lows: Record<string, number> = {};
    const highs: Record<string, number> = {};
    for (const [axis, b] of Object.entries(viewport)) {
      lows[axis] = b.lo;
      highs[axis] = b.hi;
    }
    this.sent.push({ moduleId: loVariable, msg: lows });
    this.sent.push({ moduleId: hiVariable, msg: highs });
    void this.session.postInput(loVariable, lows);
    void this.session.postInput(hiVariable, highs);
    return true;
  }
}

/** Centroid drag-and-drop: one message per drop, shaped {index: [x, y]};
 * a rejected drop snaps the handle back to the server-confirmed position. */
export class CentroidDrag {
  readonly sent: { moduleId: string; msg: Record<string, unknown> }[] = [];
  private dragging: { index: number; x: number; y: number } | null = null;

  constructor(private readonly session: LiveSession) {}

  begin(index: number): void {
    const handle = this.session.state.centroids.find((c) => c.index === index);
    if (handle) this.dragging = { index, x: handle.x, y: handle.y };
  }

  move(x: number, y: number): void {
    if (this.dragging) {
      this.dragging.x = x;
      this.dragging.y = y;
    }
  }

  /** Escape / cancel: the handle reverts, no message is sent. */
  cancel(): void {
    this.dragging = null;
  }

  async drop(): Promise<boolean> {
    const drag = this.dragging;
    this.dragging = null;
    const kmeans = this.session.roles.kmeans;
    if (!drag || !kmeans) return false;
    const msg = { [String(drag.index)]: [drag.x, drag.y] };
    this.sent.push({ moduleId: kmeans, msg });
    const status = await this.session.postInput(kmeans, msg);
    if (status !== 200) {
      // rejected: nothing changed server-side, the next centroid refresh
      // will redraw the handle where the server still has it
      return false;
    }
    return true;
  }
}
