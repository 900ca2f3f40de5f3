/** Scripted WebSocket server + client wiring for the integration tests. */

import { WebSocket, WebSocketServer } from "ws";
import { ClientOptions, ConsoleClient, SocketLike } from "../src/client.js";
import { Store, UiState } from "../src/state.js";

export interface ScriptedServer {
  port: number;
  wss: WebSocketServer;
  /** All currently open connections, newest last. */
  sockets: WebSocket[];
  /** Every JSON-parsed message received from any client, in order. */
  received: any[];
  /** Send to every connected client. */
  send(msg: unknown): void;
  sendRaw(text: string): void;
  close(): Promise<void>;
}

export function startServer(
  port = 0,
  onMessage?: (msg: any, socket: WebSocket) => void,
): Promise<ScriptedServer> {
  return new Promise((resolve) => {
    const wss = new WebSocketServer({ port });
    const sockets: WebSocket[] = [];
    const received: any[] = [];
    wss.on("connection", (socket) => {
      sockets.push(socket);
      socket.on("message", (data) => {
        const msg = JSON.parse(String(data));
        received.push(msg);
        onMessage?.(msg, socket);
      });
      socket.on("close", () => {
        const i = sockets.indexOf(socket);
        if (i >= 0) sockets.splice(i, 1);
      });
    });
    wss.on("listening", () => {
      const sendRaw = (text: string) => {
        for (const s of sockets) s.send(text);
      };
      resolve({
        port: (wss.address() as { port: number }).port,
        wss,
        sockets,
        received,
        send: (msg) => sendRaw(JSON.stringify(msg)),
        sendRaw,
        close() {
          for (const s of sockets) s.terminate();
          return new Promise<void>((done) => wss.close(() => done()));
        },
      });
    });
  });
}

/** A ConsoleClient wired to the node `ws` implementation and a fresh store. */
export function makeClient(port: number, options: ClientOptions = {}): ConsoleClient {
  const store = new Store();
  return new ConsoleClient(`ws://127.0.0.1:${port}`, store, {
    reconnectBaseMs: 50,
    reconnectMaxMs: 200,
    socketFactory: (url) => new WebSocket(url) as unknown as SocketLike,
    ...options,
  });
}

/** Poll until `pred` holds on the store state, or fail after `timeoutMs`. */
export function waitFor(
  store: Store,
  pred: (state: UiState) => boolean,
  timeoutMs = 2000,
): Promise<UiState> {
  return new Promise((resolve, reject) => {
    if (pred(store.state)) {
      resolve(store.state);
      return;
    }
    const timer = setTimeout(() => {
      unsub();
      reject(new Error(`condition not met within ${timeoutMs} ms`));
    }, timeoutMs);
    const unsub = store.subscribe((state) => {
      if (pred(state)) {
        clearTimeout(timer);
        unsub();
        resolve(state);
      }
    });
  });
}

export function posteriorFrame(seq: number, smoothed: number[], probs?: number[], paused = false) {
  return { type: "posterior", seq, smoothed, probs: probs ?? smoothed, paused };
}

export const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));
