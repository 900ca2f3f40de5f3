/**
 * WebSocket client for the console: auto-reconnect with backoff, message
 * validation, and acknowledged control commands (retry once after 3 s,
 * then surface an error).
 */

import { ControlCmd, encodeControl, parseServerMsg } from "./protocol.js";
import { Store } from "./state.js";

/** Minimal socket surface so tests can inject the `ws` implementation. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  addEventListener(event: string, handler: (ev: any) => void): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientOptions {
  ackTimeoutMs?: number;
  reconnectBaseMs?: number;
  reconnectMaxMs?: number;
  socketFactory?: SocketFactory;
}

interface PendingAck {
  cmd: ControlCmd;
  resolve: (result: string | null) => void;
  reject: (err: Error) => void;
}

export class ConsoleClient {
  readonly store: Store;
  private url: string;
  private socket: SocketLike | null = null;
  private closed = false;
  private attempt = 0;
  private pending: PendingAck[] = [];
  private ackTimeoutMs: number;
  private reconnectBaseMs: number;
  private reconnectMaxMs: number;
  private makeSocket: SocketFactory;

  constructor(url: string, store: Store, options: ClientOptions = {}) {
    this.url = url;
    this.store = store;
    this.ackTimeoutMs = options.ackTimeoutMs ?? 3000;
    this.reconnectBaseMs = options.reconnectBaseMs ?? 250;
    this.reconnectMaxMs = options.reconnectMaxMs ?? 4000;
    this.makeSocket = options.socketFactory ?? ((u) => new WebSocket(u) as unknown as SocketLike);
  }

  connect(): void {
    this.closed = false;
    this.open();
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
    this.socket = null;
  }

  private open(): void {
    this.store.setConnection("connecting");
    let socket: SocketLike;
    try {
      socket = this.makeSocket(this.url);
    } catch {
      this.scheduleReconnect();
      return;
    }
    this.socket = socket;
    socket.addEventListener("open", () => {
      this.attempt = 0;
      this.store.setConnection("connected");
    });
    socket.addEventListener("message", (ev: any) => this.onMessage(String(ev.data)));
    socket.addEventListener("close", () => this.onDrop());
    socket.addEventListener("error", () => {
      /* close always follows; the banner comes from onDrop */
    });
  }

  private onDrop(): void {
    this.socket = null;
    for (const p of this.pending.splice(0)) p.reject(new Error("connection lost"));
    if (this.closed) return;
    this.store.setConnection("disconnected");
    this.scheduleReconnect();
  }

  private scheduleReconnect(): void {
    const delay = Math.min(this.reconnectMaxMs, this.reconnectBaseMs * 2 ** this.attempt);
    this.attempt += 1;
    setTimeout(() => {
      if (!this.closed) this.open();
    }, delay);
  }

  private onMessage(raw: string): void {
    const msg = parseServerMsg(raw);
    if (msg === null) {
      console.warn("dropped malformed frame:", raw.slice(0, 200));
      this.store.markDropped();
      return;
    }
    if (msg.type === "ack") {
      const i = this.pending.findIndex((p) => p.cmd === msg.cmd);
      if (i >= 0) {
        const [p] = this.pending.splice(i, 1);
        if (msg.ok) p.resolve(msg.result);
        else p.reject(new Error(msg.error ?? `${msg.cmd} failed`));
      }
    }
    this.store.applyServerMsg(msg);
  }

  /** Send one control command and wait for its ack. */
  private sendOnce(cmd: ControlCmd, classId?: number): Promise<string | null> {
    return new Promise((resolve, reject) => {
      if (!this.socket) {
        reject(new Error("not connected"));
        return;
      }
      const entry: PendingAck = { cmd, resolve, reject };
      this.pending.push(entry);
      const timer = setTimeout(() => {
        const i = this.pending.indexOf(entry);
        if (i >= 0) {
          this.pending.splice(i, 1);
          reject(new Error(`${cmd} not acknowledged`));
        }
      }, this.ackTimeoutMs);
      const clear = (fn: (v: any) => void) => (v: any) => {
        clearTimeout(timer);
        fn(v);
      };
      entry.resolve = clear(resolve);
      entry.reject = clear(reject);
      this.socket.send(encodeControl(cmd, classId));
    });
  }

  /** Acknowledged command: one retry on timeout, then a visible error. */
  async sendControl(cmd: ControlCmd, classId?: number): Promise<string | null> {
    try {
      return await this.sendOnce(cmd, classId);
    } catch (first) {
      if (!(first instanceof Error) || !first.message.includes("not acknowledged")) {
        this.store.setError((first as Error).message);
        throw first;
      }
      try {
        return await this.sendOnce(cmd, classId);
      } catch (second) {
        this.store.setError((second as Error).message);
        throw second;
      }
    }
  }

  pause(): Promise<string | null> {
    return this.sendControl("pause");
  }

  resume(): Promise<string | null> {
    return this.sendControl("resume");
  }

  save(): Promise<string | null> {
    return this.sendControl("save");
  }

  async imagine(classId: number): Promise<string | null> {
    const result = await this.sendControl("imagine", classId);
    this.store.setActiveClass(classId);
    return result;
  }
}
