import { ApiClient, ApiError } from "./api";
import {
  IDENTITY,
  ViewTransform,
  pan,
  screenToVoxel,
  zoomAt,
} from "./transform";
import {
  Axis,
  AXIS_INDEX,
  ClickClass,
  SessionMeta,
  SlicePlanes,
  decodeSlice,
} from "./types";

export interface ViewerState {
  sessionId: string | null;
  dims: [number, number, number];
  hasLabel: boolean;
  axis: Axis;
  sliceIndex: number;
  view: ViewTransform;
  /** display window/level for the grayscale mapping */
  windowWidth: number;
  windowCenter: number;
  slice: SlicePlanes | null;
  pendingClicks: number;
  iteration: number;
  diceHistory: number[];
  busy: boolean;
  error: string | null;
}

export function initialState(): ViewerState {
  return {
    sessionId: null,
    dims: [0, 0, 0],
    hasLabel: false,
    axis: "z",
    sliceIndex: 0,
    view: { ...IDENTITY },
    windowWidth: 1,
    windowCenter: 0.5,
    slice: null,
    pendingClicks: 0,
    iteration: -1,
    diceHistory: [],
    busy: false,
    error: null,
  };
}

/**
 * Drives one annotation session against the REST API. Requests are
 * serialized: interactions are rejected while one is in flight, so the
 * server always sees a consistent click/predict ordering.
 */
export class AnnotatorController {
  state: ViewerState = initialState();
  onChange: (s: ViewerState) => void = () => {};

  constructor(private api: ApiClient) {}

  private emit() {
    this.onChange(this.state);
  }

  private planeDims(): [number, number] {
    const [a, b] = [0, 1, 2].filter((i) => i !== AXIS_INDEX[this.state.axis]);
    return [this.state.dims[a as 0 | 1 | 2], this.state.dims[b as 0 | 1 | 2]];
  }

  /** Run fn with the busy flag held; concurrent calls are rejected. */
  private async serialized<T>(fn: () => Promise<T>): Promise<T | null> {
    if (this.state.busy) return null;
    this.state.busy = true;
    this.state.error = null;
    this.emit();
    try {
      return await fn();
    } catch (e) {
      this.state.error = e instanceof Error ? e.message : String(e);
      this.emit();
      return null;
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }

  private applyMeta(meta: SessionMeta) {
    this.state.dims = meta.dims;
    this.state.hasLabel = meta.has_label;
    this.state.iteration = meta.iteration;
    this.state.diceHistory = meta.dice_history;
  }

  async openSession(sid: string): Promise<void> {
    await this.serialized(async () => {
      const meta = await this.api.getSession(sid);
      this.state.sessionId = sid;
      this.applyMeta(meta);
      this.state.axis = "z";
      this.state.sliceIndex = Math.floor(meta.dims[2] / 2);
      this.state.view = { ...IDENTITY };
      this.state.pendingClicks = meta.clicks.filter(
        (c) => c.iteration >= meta.predict_count
      ).length;
      await this.refreshSlice();
    });
  }

  async createSession(body: Parameters<ApiClient["createSession"]>[0]): Promise<void> {
    await this.serialized(async () => {
      const { id } = await this.api.createSession(body);
      const meta = await this.api.getSession(id);
      this.state.sessionId = id;
      this.applyMeta(meta);
      this.state.axis = "z";
      this.state.sliceIndex = Math.floor(meta.dims[2] / 2);
      this.state.view = { ...IDENTITY };
      this.state.pendingClicks = 0;
      await this.refreshSlice();
    });
  }

  private async refreshSlice(): Promise<void> {
    if (!this.state.sessionId) return;
    const raw = await this.api.getSlice(
      this.state.sessionId,
      this.state.axis,
      this.state.sliceIndex
    );
    this.state.slice = decodeSlice(raw);
    this.emit();
  }

  async setAxis(axis: Axis): Promise<void> {
    await this.serialized(async () => {
      this.state.axis = axis;
      const extent = this.state.dims[AXIS_INDEX[axis] as 0 | 1 | 2];
      this.state.sliceIndex = Math.min(this.state.sliceIndex, Math.max(0, extent - 1));
      await this.refreshSlice();
    });
  }

  async setSliceIndex(index: number): Promise<void> {
    const extent = this.state.dims[AXIS_INDEX[this.state.axis] as 0 | 1 | 2];
    const clamped = Math.max(0, Math.min(extent - 1, index));
    await this.serialized(async () => {
      this.state.sliceIndex = clamped;
      await this.refreshSlice();
    });
  }

  zoomAt(factor: number, sx: number, sy: number): void {
    this.state.view = zoomAt(this.state.view, factor, sx, sy);
    this.emit();
  }

  pan(dx: number, dy: number): void {
    this.state.view = pan(this.state.view, dx, dy);
    this.emit();
  }

  /**
   * Place a click at a canvas position. Positions outside the slice are
   * rejected locally and never reach the server.
   */
  async placeClick(sx: number, sy: number, cls: ClickClass): Promise<boolean> {
    if (!this.state.sessionId || this.state.busy) return false;
    const voxel = screenToVoxel(
      this.state.view,
      this.state.axis,
      this.state.sliceIndex,
      this.planeDims(),
      sx,
      sy
    );
    if (voxel === null) return false;
    const ok = await this.serialized(async () => {
      await this.api.addClick(this.state.sessionId!, voxel, cls);
      this.state.pendingClicks += 1;
      await this.refreshSlice();
      return true;
    });
    return ok === true;
  }

  async undoClick(): Promise<void> {
    if (!this.state.sessionId) return;
    await this.serialized(async () => {
      await this.api.undoClick(this.state.sessionId!);
      this.state.pendingClicks = Math.max(0, this.state.pendingClicks - 1);
      await this.refreshSlice();
    });
  }

  /** Request a fresh prediction and refresh the overlay. */
  async refine(): Promise<void> {
    if (!this.state.sessionId) return;
    await this.serialized(async () => {
      const result = await this.api.predict(this.state.sessionId!);
      this.state.iteration = result.iteration;
      if (result.dice !== undefined) this.state.diceHistory.push(result.dice);
      this.state.pendingClicks = 0;
      await this.refreshSlice();
    });
  }
}

export { ApiError };
