// DOM rendering and event wiring. All logic lives in the controller and
// the pure modules; this file only projects state into elements.

import { hoverFrame } from "./scrub.js";
import type { SessionController } from "./session.js";
import type { Hit } from "./protocol.js";

export interface ViewOptions {
  mediaBase?: string; // prefix for keyframeRef -> URL
}

const FALLBACK_TILE =
  "data:image/svg+xml," +
  encodeURIComponent(
    '<svg xmlns="http://www.w3.org/2000/svg" width="160" height="90">' +
      '<rect width="100%" height="100%" fill="#223"/></svg>',
  );

export function mediaUrl(ref: string, base = "/media/"): string {
  return base + ref;
}

// Per-tile hover scrubbing. Preview frames load lazily on first hover.
export class TileScrubber {
  private frames: string[] = [];
  private relativeX: number | null = null;

  constructor(
    private readonly img: HTMLImageElement,
    private readonly baseRef: string,
    private readonly loadFrames: () => Promise<string[]>,
    private readonly mediaBase: string,
  ) {}

  async pointerMove(offsetX: number, width: number): Promise<void> {
    if (this.frames.length === 0) {
      this.frames = await this.loadFrames();
    }
    this.relativeX = width > 0 ? offsetX / width : 0;
    this.apply();
  }

  pointerLeave(): void {
    this.relativeX = null;
    this.apply();
  }

  get displayedRef(): string {
    return hoverFrame(this.baseRef, this.frames, this.relativeX);
  }

  private apply(): void {
    this.img.src = mediaUrl(this.displayedRef, this.mediaBase);
  }
}

export class AppView {
  readonly scrubbers = new Map<string, TileScrubber>();

  constructor(
    private readonly root: HTMLElement,
    private readonly controller: SessionController,
    private readonly options: ViewOptions = {},
  ) {
    this.root.innerHTML = `
      <header class="topbar">
        <form id="search-form">
          <input id="search-input" type="text" autocomplete="off" spellcheck="false"
                 placeholder='free text, -o object, -c concept, &lt; temporal' />
          <button type="submit">Search</button>
          <button type="button" id="explore-button">Xplore</button>
          <button type="button" id="qa-button">QA answer</button>
        </form>
        <div id="query-error" class="query-error" hidden></div>
        <div id="banner" class="banner" hidden></div>
      </header>
      <main>
        <div id="page-indicator" class="page-indicator"></div>
        <div id="grid" class="grid" tabindex="0"></div>
      </main>
      <div id="overlay" class="overlay" hidden></div>
      <div id="submit-dialog" class="submit-dialog" hidden></div>
    `;
    controller.subscribe(() => this.render());
    this.wire();
  }

  private el<T extends HTMLElement>(id: string): T {
    return this.root.querySelector<T>(`#${id}`)!;
  }

  private wire(): void {
    const form = this.el<HTMLFormElement>("search-form");
    const input = this.el<HTMLInputElement>("search-input");
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.controller.submitQuery(input.value);
    });
    this.el<HTMLButtonElement>("explore-button").addEventListener("click", () => {
      void this.controller.openExplore();
    });
    this.el<HTMLButtonElement>("qa-button").addEventListener("click", () => {
      this.controller.prepareSubmit("QA", "");
    });
    const grid = this.el<HTMLDivElement>("grid");
    grid.addEventListener("keydown", (event) => {
      if (event.key.startsWith("Arrow") || event.key === " " || event.key === "Escape") {
        event.preventDefault();
        void this.controller.handleKey(event.key);
      }
    });
  }

  render(): void {
    const state = this.controller.state;
    const banner = this.el<HTMLDivElement>("banner");
    banner.hidden = state.banner === null;
    banner.textContent = state.banner ?? "";

    const queryError = this.el<HTMLDivElement>("query-error");
    if (state.queryError) {
      queryError.hidden = false;
      const caret = " ".repeat(state.queryError.offset) + "^";
      queryError.innerHTML = "";
      const message = document.createElement("div");
      message.textContent = `${state.queryError.reason ?? "ParseError"}: ${state.queryError.message}`;
      const preview = document.createElement("pre");
      preview.textContent = `${state.queryString}\n${caret}`;
      queryError.append(message, preview);
    } else {
      queryError.hidden = true;
      queryError.innerHTML = "";
    }

    const indicator = this.el<HTMLDivElement>("page-indicator");
    if (state.results) {
      indicator.textContent =
        `${state.grid.page + 1} / ${Math.max(state.grid.totalPages, 1)}` +
        ` - ${state.grid.totalHits} hits` +
        (state.mode === "similar" ? " (similar)" : "");
    } else {
      indicator.textContent = "";
    }

    this.renderGrid();
    this.renderOverlay();
    this.renderSubmitDialog();
  }

  private renderGrid(): void {
    const grid = this.el<HTMLDivElement>("grid");
    const state = this.controller.state;
    grid.innerHTML = "";
    this.scrubbers.clear();
    if (!state.results) return;
    grid.style.setProperty("--columns", String(state.grid.columns));
    state.results.hits.forEach((hit, index) => {
      grid.appendChild(this.buildTile(hit, index));
    });
  }

  private buildTile(hit: Hit, index: number): HTMLElement {
    const state = this.controller.state;
    const tile = document.createElement("div");
    tile.className = "tile" + (index === state.grid.selected ? " selected" : "");
    tile.dataset.segmentId = hit.segmentId;

    const img = document.createElement("img");
    img.src = mediaUrl(hit.keyframeRef, this.options.mediaBase ?? "/media/");
    img.onerror = () => {
      img.onerror = null;
      img.src = FALLBACK_TILE;
    };
    const scrubber = new TileScrubber(
      img,
      hit.keyframeRef,
      () => this.controller.previewFrames(hit.videoId),
      this.options.mediaBase ?? "/media/",
    );
    this.scrubbers.set(hit.segmentId, scrubber);
    tile.addEventListener("pointermove", (event) => {
      const rect = tile.getBoundingClientRect();
      void scrubber.pointerMove(event.clientX - rect.left, rect.width);
    });
    tile.addEventListener("pointerleave", () => scrubber.pointerLeave());
    tile.addEventListener("click", () => this.controller.select(index));

    const caption = document.createElement("div");
    caption.className = "caption";
    caption.textContent = `${hit.videoId} @${(hit.startMs / 1000).toFixed(1)}s (${hit.score.toFixed(3)})`;

    const actions = document.createElement("div");
    actions.className = "actions";
    for (const [label, handler] of [
      ["summary", () => this.controller.handleKey(" ")],
      ["similar", () => this.controller.runSimilarFromSelected()],
      ["video", () => this.controller.openVideoDetail(hit.videoId)],
      ["submit", () => this.controller.prepareSubmit("KIS")],
    ] as const) {
      const button = document.createElement("button");
      button.textContent = label;
      button.addEventListener("click", (event) => {
        event.stopPropagation();
        this.controller.select(index);
        void handler();
      });
      actions.appendChild(button);
    }

    tile.append(img, caption, actions);
    return tile;
  }

  private renderOverlay(): void {
    const overlay = this.el<HTMLDivElement>("overlay");
    const state = this.controller.state;
    overlay.hidden = state.grid.overlay === "none";
    overlay.innerHTML = "";
    if (overlay.hidden) return;
    const panel = document.createElement("div");
    panel.className = "panel";
    const close = document.createElement("button");
    close.className = "close";
    close.textContent = "close (Esc)";
    close.addEventListener("click", () => this.controller.closeOverlay());
    panel.appendChild(close);

    if (state.grid.overlay === "summary") {
      const title = document.createElement("h2");
      title.textContent = `summary ${state.summary?.videoId ?? ""}`;
      panel.appendChild(title);
      const strip = document.createElement("div");
      strip.className = "strip";
      for (const frame of state.summary?.keyframes ?? []) {
        const img = document.createElement("img");
        img.src = mediaUrl(frame.keyframeRef, this.options.mediaBase ?? "/media/");
        img.title = `${frame.segmentId} @${frame.startMs}ms`;
        strip.appendChild(img);
      }
      panel.appendChild(strip);
    } else if (state.grid.overlay === "videoDetail" && state.videoDetail) {
      const detail = state.videoDetail;
      const title = document.createElement("h2");
      title.textContent = `${detail.title} (${(detail.durationMs / 1000).toFixed(0)}s, dataset ${detail.dataset})`;
      panel.appendChild(title);
      // player stub: shows the seek position and the keyframe at it; plays
      // real video only when the media route has actual files
      const player = document.createElement("div");
      player.className = "player-stub";
      const frame = document.createElement("img");
      frame.id = "player-frame";
      frame.src = mediaUrl(
        detail.segments[0]?.keyframeRef ?? "",
        this.options.mediaBase ?? "/media/",
      );
      const position = document.createElement("div");
      position.id = "player-position";
      position.textContent = "position: 0ms";
      player.append(frame, position);
      panel.appendChild(player);
      const list = document.createElement("ol");
      list.className = "shot-list";
      for (const segment of detail.segments) {
        const item = document.createElement("li");
        item.dataset.startMs = String(segment.startMs);
        item.textContent =
          `${segment.segmentId} [${segment.startMs}-${segment.endMs}ms] ` +
          segment.annotations.map((a) => `${a.modality}:${a.label}`).join(" ");
        item.addEventListener("click", () => {
          position.textContent = `position: ${segment.startMs}ms`;
          frame.src = mediaUrl(segment.keyframeRef, this.options.mediaBase ?? "/media/");
        });
        list.appendChild(item);
      }
      panel.appendChild(list);
    } else if (state.grid.overlay === "explore") {
      const title = document.createElement("h2");
      title.textContent = "exploration";
      panel.appendChild(title);
      if (state.exploreError) {
        const empty = document.createElement("p");
        empty.className = "empty-state";
        empty.textContent = state.exploreError;
        panel.appendChild(empty);
      }
      const clusterGrid = document.createElement("div");
      clusterGrid.className = "cluster-grid";
      for (const cluster of state.explore?.clusters ?? []) {
        // medoid thumbnail expands to the member list
        const section = document.createElement("details");
        section.className = "cluster";
        const heading = document.createElement("summary");
        const medoid = cluster.members.find((m) => m.videoId === cluster.medoidVideoId);
        if (medoid?.keyframeRef) {
          const thumb = document.createElement("img");
          thumb.className = "medoid-thumb";
          thumb.src = mediaUrl(medoid.keyframeRef, this.options.mediaBase ?? "/media/");
          heading.appendChild(thumb);
        }
        const label = document.createElement("span");
        label.textContent = ` cluster ${cluster.clusterId} - ${cluster.size} videos (medoid ${cluster.medoidVideoId})`;
        heading.appendChild(label);
        section.appendChild(heading);
        const members = document.createElement("div");
        members.className = "members";
        for (const member of cluster.members) {
          const chip = document.createElement("button");
          chip.textContent = member.title;
          chip.addEventListener("click", () => {
            void this.controller.openVideoDetail(member.videoId);
          });
          members.appendChild(chip);
        }
        section.appendChild(members);
        clusterGrid.appendChild(section);
      }
      panel.appendChild(clusterGrid);
    }
    overlay.appendChild(panel);
  }

  private renderSubmitDialog(): void {
    const dialog = this.el<HTMLDivElement>("submit-dialog");
    const submission = this.controller.state.pendingSubmission;
    dialog.hidden = submission === null;
    dialog.innerHTML = "";
    if (!submission) return;
    const text = document.createElement("p");
    dialog.appendChild(text);
    if (submission.taskType === "QA") {
      text.textContent = "Submit answer text? Wrong submissions are penalized.";
      const answer = document.createElement("input");
      answer.id = "qa-text";
      answer.type = "text";
      answer.value = submission.text ?? "";
      answer.placeholder = "answer text";
      answer.addEventListener("input", () => this.controller.setSubmissionText(answer.value));
      dialog.appendChild(answer);
    } else {
      text.textContent =
        `Submit ${submission.taskType}: ${submission.videoId} @ ${submission.timeMs}ms?` +
        " Wrong submissions are penalized.";
    }
    const confirm = document.createElement("button");
    confirm.id = "submit-confirm";
    confirm.textContent = "Confirm";
    confirm.addEventListener("click", () => void this.controller.confirmSubmit());
    const cancel = document.createElement("button");
    cancel.id = "submit-cancel";
    cancel.textContent = "Cancel";
    cancel.addEventListener("click", () => this.controller.cancelSubmit());
    dialog.append(confirm, cancel);
  }
}
