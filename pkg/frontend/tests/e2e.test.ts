// End-to-end browse session against a real gateway process serving a
// synthetic fixture corpus: query, arrow through pages to page 3, open the
// summary overlay with Space, run a similarity search from a hit, open the
// exploration view - asserting zero protocol errors along the way.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import type { ErrorBody } from "../src/protocol.js";
import { GatewayClient, type WebSocketLike } from "../src/socket.js";
import { SessionController } from "../src/session.js";

const PYTHON = process.env.CLIPSEARCH_PYTHON ?? "python3";
const PAGE_SIZE = 8;

let workDir: string;
let server: ChildProcess | null = null;
let port: number;

function cli(args: string[]): void {
  const result = spawnSync(PYTHON, ["-m", "clipsearch.cli", ...args], {
    cwd: workDir,
    encoding: "utf-8",
  });
  if (result.status !== 0) {
    throw new Error(`clipsearch ${args[0]} failed: ${result.stderr || result.stdout}`);
  }
}

async function waitForHealth(url: string, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(url);
      if (response.ok) return;
    } catch (err) {
      lastError = err;
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error(`server did not come up at ${url}: ${lastError}`);
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "clipsearch-e2e-"));
  cli([
    "fixture", "--seed", "11", "--videos", "12", "--segments", "30",
    "--dim", "32", "--clusters", "3", "--out", join(workDir, "corpus"),
  ]);
  cli(["ingest", "--manifest", join(workDir, "corpus", "manifest.json"),
       "--data", join(workDir, "data")]);
  cli(["cluster", "--k", "3", "--seed", "0", "--data", join(workDir, "data")]);

  port = 18000 + Math.floor(Math.random() * 20000);
  server = spawn(
    PYTHON,
    ["-m", "clipsearch.cli", "serve", "--data", join(workDir, "data"),
     "--port", String(port)],
    { cwd: workDir, stdio: ["ignore", "pipe", "pipe"] },
  );
  await waitForHealth(`http://127.0.0.1:${port}/healthz`);
});

afterAll(() => {
  server?.kill("SIGTERM");
  rmSync(workDir, { recursive: true, force: true });
});

describe("scripted browse session", () => {
  it("query, page to 3, summary, similar, explore - zero protocol errors", async () => {
    const protocolErrors: (ErrorBody | Error)[] = [];
    const unmatched: unknown[] = [];
    const client = new GatewayClient(
      `ws://127.0.0.1:${port}/ws`,
      (url) => new WebSocket(url) as unknown as WebSocketLike,
      { onUnmatched: (frame) => unmatched.push(frame), reconnect: false },
    );
    const controller = new SessionController(client, {
      pageSize: PAGE_SIZE,
      columns: 4,
      onProtocolError: (error) => protocolErrors.push(error),
    });
    client.connect();
    await new Promise<void>((resolve, reject) => {
      const poll = setInterval(() => {
        if (client.isOpen) {
          clearInterval(poll);
          resolve();
        }
      }, 20);
      setTimeout(() => {
        clearInterval(poll);
        reject(new Error("websocket did not open"));
      }, 10_000);
    });

    // 1. query
    await controller.submitQuery("wedding harbor");
    await controller.whenIdle();
    expect(controller.state.queryError).toBeNull();
    expect(controller.state.results).not.toBeNull();
    const total = controller.state.grid.totalPages;
    expect(total).toBeGreaterThanOrEqual(3);
    expect(controller.state.results!.hits.length).toBe(PAGE_SIZE);

    // 2. arrow through hits onto page 3 (index 2)
    let presses = 0;
    while (controller.state.grid.page < 2 && presses < 64) {
      await controller.handleKey("ArrowRight");
      await controller.whenIdle();
      presses += 1;
    }
    expect(controller.state.grid.page).toBe(2);
    expect(controller.state.grid.selected).toBe(0);
    expect(presses).toBe(2 * PAGE_SIZE); // one press per hit plus one per page boundary

    // 3. open the summary overlay with Space, then close it
    await controller.handleKey(" ");
    await controller.whenIdle();
    expect(controller.state.grid.overlay).toBe("summary");
    expect(controller.state.summary).not.toBeNull();
    expect(controller.state.summary!.keyframes.length).toBeGreaterThan(0);
    await controller.handleKey("Escape");
    expect(controller.state.grid.overlay).toBe("none");

    // 4. similarity search from the selected hit
    const before = controller.selectedHit()!;
    await controller.runSimilarFromSelected(10);
    await controller.whenIdle();
    expect(controller.state.mode).toBe("similar");
    expect(controller.state.results!.hits.length).toBe(10);
    expect(
      controller.state.results!.hits.every((h) => h.segmentId !== before.segmentId),
    ).toBe(true);

    // 5. exploration view
    await controller.openExplore();
    await controller.whenIdle();
    expect(controller.state.grid.overlay).toBe("explore");
    expect(controller.state.exploreError).toBeNull();
    expect(controller.state.explore!.clusters.length).toBe(3);
    const memberCount = controller.state.explore!.clusters.reduce(
      (n, c) => n + c.members.length,
      0,
    );
    expect(memberCount).toBe(12);

    // zero protocol errors, nothing pending, nothing unmatched
    expect(protocolErrors).toEqual([]);
    expect(unmatched).toEqual([]);
    expect(controller.pendingRequestIds).toEqual([]);

    client.close();
  });

  it("temporal query and keyframe fetch work over the live server", async () => {
    const client = new GatewayClient(
      `ws://127.0.0.1:${port}/ws`,
      (url) => new WebSocket(url) as unknown as WebSocketLike,
      { reconnect: false },
    );
    client.connect();
    await new Promise((resolve) => setTimeout(resolve, 300));
    const page = await client.request<{
      hits: { keyframeRef: string; stageSegments: unknown[] }[];
      temporal: boolean;
    }>("query", { queryString: "wedding < harbor", pageSize: 5 });
    expect(page.temporal).toBe(true);
    if (page.hits.length > 0) {
      expect(page.hits[0].stageSegments).toHaveLength(2);
      const image = await fetch(
        `http://127.0.0.1:${port}/media/${page.hits[0].keyframeRef}`,
      );
      expect(image.status).toBe(200);
    }
    client.close();
  });
});
