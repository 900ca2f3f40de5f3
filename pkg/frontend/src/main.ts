/**
 * Entry point: wires the store, client and renderers to the static page.
 *
 * Note: the "imagine" selector steers the *synthetic* signal source on the
 * server — it stands in for a human subject's mental act. This console is a
 * demo of the pipeline, not a real brain-computer interface.
 */

import { ConsoleClient } from "./client.js";
import { CLASS_NAMES } from "./protocol.js";
import { Store, UiState } from "./state.js";
import { mountBars, renderBars } from "./render/bars.js";
import { VoxelView } from "./render/voxels.js";

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function wsUrl(): string {
  const params = new URLSearchParams(location.search);
  return params.get("ws") ?? `ws://${location.hostname || "localhost"}:8765`;
}

function toast(message: string): void {
  const el = $("toast");
  el.textContent = message;
  el.classList.add("visible");
  setTimeout(() => el.classList.remove("visible"), 4000);
}

function main(): void {
  const store = new Store();
  const client = new ConsoleClient(wsUrl(), store);
  const barsRoot = $("bars");
  mountBars(barsRoot);
  const view = new VoxelView($("voxels") as HTMLCanvasElement);

  const banner = $("banner");
  const pauseBtn = $("pause") as HTMLButtonElement;
  const saveBtn = $("save") as HTMLButtonElement;
  const designList = $("designs");
  const imagineRoot = $("imagine");

  CLASS_NAMES.forEach((name, classId) => {
    const btn = document.createElement("button");
    btn.className = "imagine-btn";
    btn.dataset.classId = String(classId);
    btn.textContent = name;
    btn.addEventListener("click", () => {
      client.imagine(classId).catch((err: Error) => toast(err.message));
    });
    imagineRoot.append(btn);
  });

  pauseBtn.addEventListener("click", () => {
    const cmd = store.state.paused ? client.resume() : client.pause();
    cmd.catch((err: Error) => toast(err.message));
  });
  saveBtn.addEventListener("click", () => {
    client.save().catch((err: Error) => toast(err.message));
  });

  let lastError: string | null = null;
  let renderedSeq = -1;
  // Render loop decoupled from message arrival: always draw the latest frame.
  const render = (state: UiState) => {
    banner.textContent = state.connection === "connected" ? "" : state.connection;
    banner.classList.toggle("visible", state.connection !== "connected");
    pauseBtn.textContent = state.paused ? "resume" : "pause";
    if (state.frame && state.frame.seq !== renderedSeq) {
      renderedSeq = state.frame.seq;
      renderBars(barsRoot, state.frame);
    }
    view.setGeometry(state.occupied, state.gridN);
    for (const btn of imagineRoot.querySelectorAll<HTMLElement>(".imagine-btn")) {
      btn.classList.toggle("active", Number(btn.dataset.classId) === state.activeClass);
    }
    designList.innerHTML = "";
    for (const path of state.savedDesigns) {
      const li = document.createElement("li");
      li.textContent = path;
      designList.append(li);
    }
    if (state.lastError && state.lastError !== lastError) {
      lastError = state.lastError;
      toast(state.lastError);
    }
  };
  store.subscribe(() => requestAnimationFrame(() => render(store.state)));
  render(store.state);
  client.connect();
}

main();
