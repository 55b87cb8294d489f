// Boot: fetch config.json (ws url), connect, mount the view.

import { GatewayClient } from "./socket.js";
import { SessionController } from "./session.js";
import { AppView } from "./view.js";

interface UiConfig {
  wsUrl?: string;
  mediaBase?: string;
}

async function loadUiConfig(): Promise<UiConfig> {
  try {
    const response = await fetch("./config.json");
    if (response.ok) {
      return (await response.json()) as UiConfig;
    }
  } catch {
    // fall through to defaults
  }
  return {};
}

export async function boot(root: HTMLElement): Promise<SessionController> {
  const config = await loadUiConfig();
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  const wsUrl = config.wsUrl ?? `${scheme}://${location.host}/ws`;
  let controller: SessionController | null = null;
  const client = new GatewayClient(wsUrl, (url) => new WebSocket(url), {
    onStatus: (status) => controller?.setConnection(status),
  });
  controller = new SessionController(client);
  new AppView(root, controller, { mediaBase: config.mediaBase ?? "/media/" });
  client.connect();
  return controller;
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void boot(document.getElementById("app")!);
}
