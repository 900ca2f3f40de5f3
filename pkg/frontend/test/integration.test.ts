/**
 * Integration tests: a real ConsoleClient talking to a scripted `ws` server.
 */

import { afterEach, describe, expect, it } from "vitest";
import { WebSocket, WebSocketServer } from "ws";
import { ConsoleClient } from "../src/client.js";
import { computeBars } from "../src/render/bars.js";
import { makeClient, posteriorFrame, ScriptedServer, sleep, startServer, waitFor } from "./helpers.js";

let server: ScriptedServer | null = null;
let client: ConsoleClient | null = null;

afterEach(async () => {
  client?.close();
  client = null;
  await server?.close();
  server = null;
});

describe("connection lifecycle", () => {
  it("reports connected within 2 s of the server being up", async () => {
    server = await startServer();
    client = makeClient(server.port);
    client.connect();
    await waitFor(client.store, (s) => s.connection === "connected", 2000);
  });

  it("shows a disconnected banner within 5 s of the server dying", async () => {
    server = await startServer();
    client = makeClient(server.port);
    client.connect();
    await waitFor(client.store, (s) => s.connection === "connected");
    await server.close();
    server = null;
    await waitFor(client.store, (s) => s.connection === "disconnected", 5000);
  });

  it("reconnects after a server restart and resumes streaming", async () => {
    server = await startServer();
    const port = server.port;
    client = makeClient(port);
    client.connect();
    await waitFor(client.store, (s) => s.connection === "connected");
    server.send(posteriorFrame(0, [0.25, 0.25, 0.25, 0.25]));
    await waitFor(client.store, (s) => s.frame?.seq === 0);

    await server.close();
    await waitFor(client.store, (s) => s.connection === "disconnected", 5000);
    server = await startServer(port);
    await waitFor(client.store, (s) => s.connection === "connected", 5000);
    server.send(posteriorFrame(1, [0.1, 0.2, 0.3, 0.4]));
    await waitFor(client.store, (s) => s.frame?.seq === 1);
  });
});

describe("posterior display", () => {
  it("updates bars as frames stream in at the tick rate", async () => {
    server = await startServer();
    client = makeClient(server.port);
    client.connect();
    await waitFor(client.store, (s) => s.connection === "connected");
    const seen: number[] = [];
    client.store.subscribe((s) => {
      if (s.frame && !seen.includes(s.frame.seq)) seen.push(s.frame.seq);
    });
    for (let seq = 0; seq < 5; seq++) {
      server.send(posteriorFrame(seq, [0.25, 0.25, 0.25, 0.25]));
      await sleep(50);
    }
    await waitFor(client.store, (s) => s.frame?.seq === 4);
    expect(seen).toEqual([0, 1, 2, 3, 4]);
  });

  it("renders four equal bars for a uniform frame and one full bar for one-hot", async () => {
    server = await startServer();
    client = makeClient(server.port);
    client.connect();
    await waitFor(client.store, (s) => s.connection === "connected");

    server.send(posteriorFrame(0, [0.25, 0.25, 0.25, 0.25]));
    let state = await waitFor(client.store, (s) => s.frame?.seq === 0);
    let bars = computeBars(state.frame!);
    for (const b of bars) expect(b.smoothed).toBe(0.25);

    server.send(posteriorFrame(1, [0, 1, 0, 0]));
    state = await waitFor(client.store, (s) => s.frame?.seq === 1);
    bars = computeBars(state.frame!);
    expect(bars[1].smoothed).toBe(1);
    expect(bars.filter((b) => b.smoothed === 0)).toHaveLength(3);
  });

  it("drops malformed frames and keeps the last good one", async () => {
    server = await startServer();
    client = makeClient(server.port);
    client.connect();
    await waitFor(client.store, (s) => s.connection === "connected");
    server.send(posteriorFrame(0, [0.4, 0.2, 0.2, 0.2]));
    await waitFor(client.store, (s) => s.frame?.seq === 0);

    server.sendRaw("{ not json");
    server.send({ type: "posterior", seq: 1, probs: [2, 0, 0, 0], smoothed: [1, 0, 0, 0], paused: false });
    server.send({ type: "mystery" });
    await waitFor(client.store, (s) => s.droppedFrames === 3);
    expect(client.store.state.frame?.seq).toBe(0);
    expect(client.store.state.frame?.smoothed).toEqual([0.4, 0.2, 0.2, 0.2]);
  });
});

describe("geometry display", () => {
  it("applies valid geometry frames and rejects out-of-range indices", async () => {
    server = await startServer();
    client = makeClient(server.port);
    client.connect();
    await waitFor(client.store, (s) => s.connection === "connected");

    server.send({ type: "geometry", occupied: [0, 1, 9], grid_n: 8 });
    await waitFor(client.store, (s) => s.occupied.length === 3);
    expect(client.store.state.gridN).toBe(8);

    server.send({ type: "geometry", occupied: [0, 512], grid_n: 8 });
    await waitFor(client.store, (s) => s.droppedFrames === 1);
    expect(client.store.state.occupied).toEqual([0, 1, 9]);
  });
});

describe("acknowledged controls", () => {
  function ackingServer(handler?: (msg: any, socket: WebSocket) => boolean) {
    return startServer(0, (msg, socket) => {
      if (msg.type !== "control") return;
      if (handler && !handler(msg, socket)) return; // scripted to stay silent
      const result = msg.cmd === "save" ? "designs/design_0000.obj" : null;
      socket.send(JSON.stringify({ type: "ack", cmd: msg.cmd, ok: true, result }));
    });
  }

  it("pause resolves on ack and paused frames freeze the smoothed bars", async () => {
    server = await ackingServer();
    client = makeClient(server.port);
    client.connect();
    await waitFor(client.store, (s) => s.connection === "connected");
    await client.pause();
    server.send(posteriorFrame(5, [0.4, 0.2, 0.2, 0.2], [0.1, 0.6, 0.2, 0.1], true));
    const state = await waitFor(client.store, (s) => s.frame?.seq === 5);
    expect(state.paused).toBe(true);
    expect(state.frame!.smoothed).toEqual([0.4, 0.2, 0.2, 0.2]);
  });

  it("save appends the acked path to the design list", async () => {
    server = await ackingServer();
    client = makeClient(server.port);
    client.connect();
    await waitFor(client.store, (s) => s.connection === "connected");
    const path = await client.save();
    expect(path).toBe("designs/design_0000.obj");
    expect(client.store.state.savedDesigns).toEqual(["designs/design_0000.obj"]);
    await client.save();
    expect(client.store.state.savedDesigns).toHaveLength(2);
  });

  it("imagine sends a control message carrying class_id", async () => {
    server = await ackingServer();
    client = makeClient(server.port);
    client.connect();
    await waitFor(client.store, (s) => s.connection === "connected");
    await client.imagine(2);
    expect(server.received).toContainEqual({ type: "control", cmd: "imagine", class_id: 2 });
    expect(client.store.state.activeClass).toBe(2);
  });

  it("retries an un-acked command once, then succeeds", async () => {
    let calls = 0;
    server = await ackingServer(() => {
      calls += 1;
      return calls >= 2; // stay silent on the first attempt
    });
    client = makeClient(server.port, { ackTimeoutMs: 200 });
    client.connect();
    await waitFor(client.store, (s) => s.connection === "connected");
    await client.pause();
    expect(calls).toBe(2);
    expect(client.store.state.lastError).toBeNull();
  });

  it("surfaces an error after the retry also times out", async () => {
    server = await ackingServer(() => false); // never ack
    client = makeClient(server.port, { ackTimeoutMs: 150 });
    client.connect();
    await waitFor(client.store, (s) => s.connection === "connected");
    await expect(client.save()).rejects.toThrow(/not acknowledged/);
    expect(client.store.state.lastError).toMatch(/not acknowledged/);
    expect(server.received.filter((m) => m.cmd === "save")).toHaveLength(2);
  });

  it("shows a failed ack as an error without applying the command", async () => {
    server = await startServer(0, (msg, socket) => {
      if (msg.type === "control") {
        socket.send(JSON.stringify({ type: "ack", cmd: msg.cmd, ok: false, error: "not paused" }));
      }
    });
    client = makeClient(server.port);
    client.connect();
    await waitFor(client.store, (s) => s.connection === "connected");
    await expect(client.save()).rejects.toThrow("not paused");
    expect(client.store.state.savedDesigns).toEqual([]);
    expect(client.store.state.lastError).toContain("not paused");
  });
});
