// Headless session controller: owns the UI state, talks to the gateway,
// and executes the keyboard model's effects. The DOM layer subscribes and
// renders; tests drive it directly.

import { GridState, NavEffect, Overlay, navigate } from "./keyboard.js";
import type {
  ConfigPayload,
  ErrorBody,
  ExplorePayload,
  Hit,
  QueryPage,
  SubmitPayload,
  SubmitReceipt,
  SummaryPayload,
  TaskType,
  VideoDetailPayload,
} from "./protocol.js";
import { ConnectionLost, GatewayClient, ProtocolError } from "./socket.js";

export interface QueryError {
  message: string;
  offset: number;
  reason?: string;
}

export type ResultMode = "query" | "similar";

export interface SessionState {
  connection: "connecting" | "open" | "closed";
  queryString: string;
  queryError: QueryError | null;
  mode: ResultMode;
  results: QueryPage | null;
  grid: GridState;
  summary: SummaryPayload | null;
  videoDetail: VideoDetailPayload | null;
  explore: ExplorePayload | null;
  exploreError: string | null;
  pendingSubmission: SubmitPayload | null;
  lastReceipt: SubmitReceipt | null;
  banner: string | null;
  config: ConfigPayload | null;
}

const EMPTY_GRID: GridState = {
  page: 0,
  totalPages: 0,
  hitsOnPage: 0,
  totalHits: 0,
  columns: 4,
  selected: 0,
  overlay: "none",
};

export interface SessionOptions {
  pageSize?: number;
  columns?: number;
  onProtocolError?: (error: ErrorBody | Error) => void;
}

export class SessionController {
  readonly state: SessionState;

  private listeners: (() => void)[] = [];
  private inflight = 0;
  private idleResolvers: (() => void)[] = [];
  private summaryCache = new Map<string, SummaryPayload>();

  constructor(
    private readonly client: GatewayClient,
    private readonly options: SessionOptions = {},
  ) {
    this.state = {
      connection: "closed",
      queryString: "",
      queryError: null,
      mode: "query",
      results: null,
      grid: { ...EMPTY_GRID, columns: options.columns ?? 4 },
      summary: null,
      videoDetail: null,
      explore: null,
      exploreError: null,
      pendingSubmission: null,
      lastReceipt: null,
      banner: null,
      config: null,
    };
  }

  subscribe(listener: () => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  setConnection(status: "connecting" | "open" | "closed"): void {
    this.state.connection = status;
    this.state.banner = status === "open" ? null : "connection lost - reconnecting";
    if (status === "open" && this.state.config === null) {
      void this.loadConfig();
    }
    this.notify();
  }

  // resolves once no request started by this controller is in flight
  whenIdle(): Promise<void> {
    if (this.inflight === 0) return Promise.resolve();
    return new Promise((resolve) => this.idleResolvers.push(resolve));
  }

  get pendingRequestIds(): string[] {
    return this.client.pendingIds();
  }

  private async track<T>(work: Promise<T>): Promise<T> {
    this.inflight += 1;
    try {
      return await work;
    } finally {
      this.inflight -= 1;
      if (this.inflight === 0) {
        const resolvers = this.idleResolvers;
        this.idleResolvers = [];
        for (const resolve of resolvers) resolve();
      }
    }
  }

  private reportError(err: unknown): void {
    if (err instanceof ProtocolError) {
      this.options.onProtocolError?.(err.body);
      this.state.banner = `${err.code}: ${err.message}`;
    } else if (err instanceof ConnectionLost) {
      this.state.banner = "connection lost - reconnecting";
    } else {
      this.options.onProtocolError?.(err as Error);
      this.state.banner = String(err);
    }
    this.notify();
  }

  // -- config ---------------------------------------------------------

  async loadConfig(): Promise<void> {
    try {
      this.state.config = await this.track(this.client.request<ConfigPayload>("config"));
      this.notify();
    } catch (err) {
      this.reportError(err);
    }
  }

  // -- querying ---------------------------------------------------------

  async submitQuery(queryString: string): Promise<void> {
    const trimmed = queryString.trim();
    this.state.queryString = queryString;
    if (trimmed === "") {
      return; // empty input sends nothing
    }
    await this.loadQueryPage(0, "first");
  }

  async loadQueryPage(page: number, select: "first" | "last"): Promise<void> {
    const pageSize = this.options.pageSize ?? this.state.config?.defaults.pageSize ?? 40;
    try {
      const payload = await this.track(
        this.client.request<QueryPage>("query", {
          queryString: this.state.queryString,
          page,
          pageSize,
        }),
      );
      this.state.queryError = null;
      this.state.mode = "query";
      this.applyResults(payload, select);
    } catch (err) {
      if (err instanceof ProtocolError && err.code === "ParseError") {
        this.state.queryError = {
          message: err.message,
          offset: err.offset ?? 0,
          reason: err.reason,
        };
        this.notify();
        return;
      }
      this.reportError(err);
    }
  }

  private applyResults(payload: QueryPage, select: "first" | "last"): void {
    this.state.results = payload;
    const hits = payload.hits.length;
    this.state.grid = {
      ...this.state.grid,
      page: payload.page,
      totalPages: payload.totalPages,
      totalHits: payload.totalHits,
      hitsOnPage: hits,
      selected: hits === 0 ? 0 : select === "first" ? 0 : hits - 1,
      overlay: "none",
    };
    this.state.banner = null;
    this.notify();
  }

  selectedHit(): Hit | null {
    const { results, grid } = this.state;
    if (!results || results.hits.length === 0) return null;
    return results.hits[Math.min(grid.selected, results.hits.length - 1)];
  }

  select(index: number): void {
    if (this.state.grid.hitsOnPage === 0) return;
    this.state.grid = {
      ...this.state.grid,
      selected: Math.max(0, Math.min(index, this.state.grid.hitsOnPage - 1)),
    };
    this.notify();
  }

  // -- keyboard ---------------------------------------------------------

  async handleKey(key: string): Promise<void> {
    const [next, effect] = navigate(this.state.grid, key);
    const closedOverlay = this.state.grid.overlay !== "none" && next.overlay === "none";
    this.state.grid = next;
    if (closedOverlay) {
      this.clearOverlayData();
    }
    this.notify();
    await this.runEffect(effect);
  }

  private clearOverlayData(): void {
    this.state.summary = null;
    this.state.videoDetail = null;
    this.state.explore = null;
    this.state.exploreError = null;
  }

  private async runEffect(effect: NavEffect): Promise<void> {
    switch (effect.type) {
      case "none":
        return;
      case "loadPage":
        if (this.state.mode === "query") {
          await this.loadQueryPage(effect.page, effect.select);
        }
        return;
      case "openSummary": {
        const hit = this.selectedHit();
        if (hit) {
          await this.loadSummary(hit.videoId);
        }
        return;
      }
    }
  }

  // -- overlays ---------------------------------------------------------

  private setOverlay(overlay: Overlay): void {
    this.state.grid = { ...this.state.grid, overlay };
    this.notify();
  }

  async loadSummary(videoId: string): Promise<void> {
    try {
      const payload = await this.track(
        this.client.request<SummaryPayload>("summary", { videoId }),
      );
      this.state.summary = payload;
      this.notify();
    } catch (err) {
      this.reportError(err);
    }
  }

  // preview frames for a tile's hover scrub (cached per video)
  async previewFrames(videoId: string): Promise<string[]> {
    let summary = this.summaryCache.get(videoId);
    if (!summary) {
      summary = await this.track(
        this.client.request<SummaryPayload>("summary", { videoId }),
      );
      this.summaryCache.set(videoId, summary);
    }
    return summary.keyframes.map((f) => f.keyframeRef);
  }

  async openVideoDetail(videoId: string): Promise<void> {
    try {
      const payload = await this.track(
        this.client.request<VideoDetailPayload>("videoDetail", { videoId }),
      );
      this.state.videoDetail = payload;
      this.setOverlay("videoDetail");
    } catch (err) {
      this.reportError(err);
    }
  }

  async openExplore(): Promise<void> {
    try {
      const payload = await this.track(this.client.request<ExplorePayload>("explore"));
      this.state.explore = payload;
      this.state.exploreError = null;
      this.setOverlay("explore");
    } catch (err) {
      if (err instanceof ProtocolError && err.code === "ClustersNotBuilt") {
        // empty state with build instructions, still an overlay
        this.state.explore = null;
        this.state.exploreError =
          "No clusters yet. Build them with: clipsearch cluster --data <dir>";
        this.setOverlay("explore");
        return;
      }
      this.reportError(err);
    }
  }

  closeOverlay(): void {
    this.clearOverlayData();
    this.setOverlay("none");
  }

  // -- similarity ---------------------------------------------------------

  async runSimilarFromSelected(k = 12): Promise<void> {
    const hit = this.selectedHit();
    if (!hit) return;
    try {
      const payload = await this.track(
        this.client.request<QueryPage>("similar", { segmentId: hit.segmentId, k }),
      );
      this.state.mode = "similar";
      this.applyResults(payload, "first");
    } catch (err) {
      this.reportError(err);
    }
  }

  // -- submission (confirm-gated: wrong submissions are penalized) -------

  prepareSubmit(taskType: TaskType, text?: string): void {
    if (taskType === "QA") {
      this.state.pendingSubmission = { taskType, text: text ?? "" };
    } else {
      const hit = this.selectedHit();
      if (!hit) return;
      this.state.pendingSubmission = {
        taskType,
        videoId: hit.videoId,
        timeMs: Math.floor((hit.startMs + hit.endMs) / 2),
      };
    }
    this.notify();
  }

  setSubmissionText(text: string): void {
    if (this.state.pendingSubmission?.taskType === "QA") {
      this.state.pendingSubmission = { ...this.state.pendingSubmission, text };
    }
  }

  cancelSubmit(): void {
    this.state.pendingSubmission = null;
    this.notify();
  }

  async confirmSubmit(): Promise<SubmitReceipt | null> {
    const submission = this.state.pendingSubmission;
    if (!submission) return null;
    this.state.pendingSubmission = null;
    try {
      const receipt = await this.track(
        this.client.request<SubmitReceipt>("submit", submission),
      );
      this.state.lastReceipt = receipt;
      this.notify();
      return receipt;
    } catch (err) {
      this.reportError(err);
      return null;
    }
  }
}
