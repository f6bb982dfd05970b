import type {
  GraphJson,
  ModuleSummary,
  PublicationEvent,
  TableSlice,
} from "./types.js";
import type { HttpLike, SocketFactory, SocketLike } from "./transport.js";
import { ViewState } from "./viewState.js";

/** Which pipeline module plays which part for the views. */
export interface ModuleRoles {
  heatmap?: string;
  sample?: string;
  kmeans?: string;
  /** variables carrying per-axis lower/upper bounds (scatterplot graphs) */
  loVariable?: string;
  hiVariable?: string;
  /** free variable carrying a filter-expression string (heatmap demo graph) */
  queryVariable?: string;
  minModule?: string;
  maxModule?: string;
}

export interface SessionOptions {
  http: HttpLike;
  socketFactory: SocketFactory;
  /** reconnect backoff schedule in ms; the last entry repeats */
  backoff?: number[];
  setTimeoutFn?: (fn: () => void, ms: number) => unknown;
}

const DEFAULT_BACKOFF = [100, 250, 500, 1000, 2000];

function numberColumn(slice: TableSlice, name: string): number[] {
  const col = slice.columns[name] ?? [];
  return col.map((v) => (typeof v === "number" ? v : NaN));
}

function sliceStamp(slice: TableSlice): number {
  const updates = slice.columns["_update"];
  if (!updates || updates.length === 0) return 0;
  return Math.max(...updates.map((v) => (typeof v === "number" ? v : 0)));
}

/** A live connection to one progrun server: listens for publication events,
 * refetches the artifacts they announce, and feeds a ViewState. */
export class LiveSession {
  readonly state = new ViewState();
  roles: ModuleRoles = {};
  private socket: SocketLike | null = null;
  private attempts = 0;
  private disposed = false;
  private readonly backoff: number[];
  private readonly setTimeoutFn: (fn: () => void, ms: number) => unknown;
  private modules = new Map<string, ModuleSummary>();

  constructor(
    readonly baseUrl: string,
    private readonly options: SessionOptions,
  ) {
    this.backoff = options.backoff ?? DEFAULT_BACKOFF;
    this.setTimeoutFn = options.setTimeoutFn ?? ((fn, ms) => setTimeout(fn, ms));
  }

  get http(): HttpLike {
    return this.options.http;
  }

  wsUrl(): string {
    return this.baseUrl.replace(/^http/, "ws") + "/ws";
  }

  async connect(): Promise<void> {
    if (this.disposed) return;
    this.state.setStatus("connecting");
    const socket = this.options.socketFactory(this.wsUrl());
    this.socket = socket;
    socket.onopen = () => {
      this.attempts = 0;
      this.state.setStatus("live");
      // a (re)connect may have missed events: rebuild everything from scratch
      void this.fullRefresh();
    };
    socket.onmessage = (data) => {
      let event: PublicationEvent;
      try {
        event = JSON.parse(data) as PublicationEvent;
      } catch {
        return;
      }
      // refresh failures are non-fatal: the next event retries the fetch
      this.handleEvent(event).catch(() => undefined);
    };
    const onDrop = () => {
      if (this.disposed) return;
      this.state.setStatus("down");
      const delay = this.backoff[Math.min(this.attempts, this.backoff.length - 1)];
      this.attempts += 1;
      this.setTimeoutFn(() => void this.connect(), delay);
    };
    socket.onclose = onDrop;
    socket.onerror = () => socket.close();
  }

  dispose(): void {
    this.disposed = true;
    this.socket?.close();
  }

  // ------------------------------------------------------------ discovery

  /** Map module ids to view roles from /modules + /graph. */
  async discover(): Promise<ModuleRoles> {
    const [modules, graph] = await Promise.all([
      this.http.getJson(`${this.baseUrl}/modules`) as Promise<ModuleSummary[]>,
      this.http.getJson(`${this.baseUrl}/graph`) as Promise<GraphJson>,
    ]);
    this.modules = new Map(modules.map((m) => [m.id, m]));
    const byType = (t: string) => modules.filter((m) => m.type === t);
    const roles: ModuleRoles = {};
    roles.heatmap = byType("heatmap")[0]?.id;
    roles.sample = byType("scatter_sample")[0]?.id;
    roles.kmeans = byType("mbk_means")[0]?.id;
    roles.minModule = byType("min")[0]?.id;
    roles.maxModule = byType("max")[0]?.id;
    const typeOf = (id: string) => this.modules.get(id)?.type;
    for (const variable of byType("variable")) {
      const likeEdge = graph.edges.find(
        (e) => e.to === variable.id && e.to_slot === "like",
      );
      if (likeEdge && typeOf(likeEdge.from) === "min") {
        roles.loVariable = variable.id;
      } else if (likeEdge && typeOf(likeEdge.from) === "max") {
        roles.hiVariable = variable.id;
      } else {
        const queryEdge = graph.edges.find(
          (e) => e.from === variable.id && e.to_slot === "query",
        );
        if (queryEdge) roles.queryVariable = variable.id;
      }
    }
    this.roles = roles;
    return roles;
  }

  /** Reconstruct the full view from the endpoints alone. */
  async fullRefresh(): Promise<void> {
    await this.discover();
    const jobs: Promise<void>[] = [];
    if (this.roles.heatmap) jobs.push(this.refreshHeatmap(this.roles.heatmap));
    if (this.roles.sample) jobs.push(this.refreshSample(this.roles.sample));
    if (this.roles.kmeans) jobs.push(this.refreshCentroids(this.roles.kmeans));
    if (this.roles.minModule) jobs.push(this.refreshEnvelope());
    await Promise.allSettled(jobs);
  }

  // ------------------------------------------------------------ event path

  async handleEvent(event: PublicationEvent): Promise<void> {
    if (this.disposed) return;
    const { module_id } = event;
    if (!this.modules.has(module_id)) await this.discover();
    const type = this.modules.get(module_id)?.type;
    switch (type) {
      case "heatmap":
        await this.refreshHeatmap(module_id);
        break;
      case "scatter_sample":
        await this.refreshSample(module_id);
        break;
      case "mbk_means":
        await this.refreshCentroids(module_id);
        break;
      case "min":
      case "max":
        await this.refreshEnvelope();
        break;
      default:
        break; // other modules have no direct view
    }
  }

  private async refreshHeatmap(id: string): Promise<void> {
    const announce = (await this.http.getJson(
      `${this.baseUrl}/module/${id}/data/frame`,
    )) as TableSlice;
    if (announce.row_ids.length === 0) return;
    const stamp = numberColumn(announce, "stamp")[0] ?? 0;
    if (this.state.frame && stamp <= this.state.frame.stamp) return; // stale
    const png = await this.http.getBytes(`${this.baseUrl}/heatmap/${id}.png`);
    this.state.applyFrame({
      stamp,
      png,
      width: numberColumn(announce, "width")[0] ?? 0,
      height: numberColumn(announce, "height")[0] ?? 0,
      bounds: null,
    });
  }

  private async refreshSample(id: string): Promise<void> {
    const slice = (await this.http.getJson(
      `${this.baseUrl}/module/${id}/data/df?limit=10000`,
    )) as TableSlice;
    const xs = numberColumn(slice, "x");
    const ys = numberColumn(slice, "y");
    const ids = numberColumn(slice, "src_id");
    const points = slice.row_ids.map((_, i) => ({
      id: ids[i] ?? i,
      x: xs[i] ?? NaN,
      y: ys[i] ?? NaN,
    }));
    this.state.applySample(sliceStamp(slice), points);
  }

  private async refreshCentroids(id: string): Promise<void> {
    const slice = (await this.http.getJson(
      `${this.baseUrl}/module/${id}/data/df`,
    )) as TableSlice;
    const names = Object.keys(slice.columns).filter((c) => c !== "_update");
    const [xCol, yCol] = names;
    const xs = numberColumn(slice, xCol ?? "x");
    const ys = numberColumn(slice, yCol ?? "y");
    const centroids = slice.row_ids.map((rid, i) => ({
      index: rid,
      x: xs[i] ?? NaN,
      y: ys[i] ?? NaN,
    }));
    this.state.applyCentroids(sliceStamp(slice), centroids);
  }

  private async refreshEnvelope(): Promise<void> {
    const { minModule, maxModule } = this.roles;
    if (!minModule || !maxModule) return;
    const [lo, hi] = (await Promise.all([
      this.http.getJson(`${this.baseUrl}/module/${minModule}/data/df?limit=100000`),
      this.http.getJson(`${this.baseUrl}/module/${maxModule}/data/df?limit=100000`),
    ])) as [TableSlice, TableSlice];
    if (lo.row_ids.length === 0 || hi.row_ids.length === 0) return;
    const last = (slice: TableSlice, col: string) => {
      const vals = numberColumn(slice, col);
      return vals[vals.length - 1];
    };
    for (const axis of Object.keys(lo.columns)) {
      if (axis === "_update" || !(axis in hi.columns)) continue;
      const loV = last(lo, axis);
      const hiV = last(hi, axis);
      if (Number.isFinite(loV) && Number.isFinite(hiV)) {
        this.state.setEnvelope(axis, { lo: loV, hi: hiV });
      }
    }
  }

  // ------------------------------------------------------------ writes

  async postInput(moduleId: string, msg: Record<string, unknown>): Promise<number> {
    const { status } = await this.http.postJson(
      `${this.baseUrl}/module/${moduleId}/input`,
      msg,
    );
    return status;
  }
}
