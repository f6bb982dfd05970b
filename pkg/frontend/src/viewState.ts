import type { AxisBounds, CentroidHandle, SamplePoint, Viewport } from "./types.js";

export type ConnectionStatus = "connecting" | "live" | "down";

export interface FrameData {
  stamp: number;
  png: Uint8Array;
  width: number;
  height: number;
  bounds: Viewport | null;
}

type Listener = (state: ViewState) => void;

/** All state the views render from.
 *
 * Every artifact carries a stamp (the producing run number); an update with a
 * stamp lower than what is already displayed is stale output of an older run
 * and is dropped, so the rendered state never moves backwards even when
 * fetches resolve out of order.
 */
export class ViewState {
  frame: FrameData | null = null;
  frameHistory: FrameData[] = [];
  historyLimit = 20;

  sampleStamp = 0;
  samplePoints: SamplePoint[] = [];

  centroidStamp = 0;
  centroids: CentroidHandle[] = [];

  /** Data envelope per axis (from the running min/max), clamps the sliders. */
  envelope: Viewport = {};
  /** Current slider positions per axis. */
  sliders: Viewport = {};

  colormap = "viridis";
  status: ConnectionStatus = "connecting";

  private listeners: Listener[] = [];

  onChange(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((f) => f !== fn);
    };
  }

  private emit(): void {
    for (const fn of [...this.listeners]) fn(this);
  }

  setStatus(status: ConnectionStatus): void {
    if (this.status !== status) {
      this.status = status;
      this.emit();
    }
  }

  /** Returns false when the frame is stale (stamp has not advanced). */
  applyFrame(frame: FrameData): boolean {
    if (this.frame !== null && frame.stamp <= this.frame.stamp) return false;
    this.frame = frame;
    this.frameHistory.push(frame);
    if (this.frameHistory.length > this.historyLimit) {
      this.frameHistory.splice(0, this.frameHistory.length - this.historyLimit);
    }
    this.emit();
    return true;
  }

  applySample(stamp: number, points: SamplePoint[]): boolean {
    if (stamp <= this.sampleStamp) return false;
    this.sampleStamp = stamp;
    this.samplePoints = points;
    this.emit();
    return true;
  }

  applyCentroids(stamp: number, centroids: CentroidHandle[]): boolean {
    if (stamp <= this.centroidStamp) return false;
    this.centroidStamp = stamp;
    this.centroids = centroids;
    this.emit();
    return true;
  }

  setEnvelope(axis: string, bounds: AxisBounds): void {
    this.envelope[axis] = bounds;
    const slider = this.sliders[axis];
    if (slider) this.sliders[axis] = this.clamp(axis, slider);
    this.emit();
  }

  /** Slider positions stay inside the data envelope. */
  setSlider(axis: string, bounds: AxisBounds): AxisBounds {
    const clamped = this.clamp(axis, bounds);
    this.sliders[axis] = clamped;
    this.emit();
    return clamped;
  }

  private clamp(axis: string, bounds: AxisBounds): AxisBounds {
    const env = this.envelope[axis];
    if (!env) return bounds;
    const lo = Math.min(Math.max(bounds.lo, env.lo), env.hi);
    const hi = Math.max(Math.min(bounds.hi, env.hi), lo);
    return { lo, hi };
  }
}
