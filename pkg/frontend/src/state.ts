/**
 * Console state: a single store fed exclusively by server messages.
 *
 * The UI never predicts locally — posteriors, geometry, paused flag and the
 * saved-design list all come from (acknowledged) server frames.
 */

import { AckMsg, GeometryMsg, PosteriorMsg, ServerMsg, StatusMsg } from "./protocol.js";

export type Connection = "connecting" | "connected" | "disconnected";

export interface UiState {
  connection: Connection;
  frame: PosteriorMsg | null;
  occupied: number[];
  gridN: number;
  paused: boolean;
  activeClass: number;
  savedDesigns: string[];
  lastStatus: StatusMsg | null;
  lastError: string | null;
  droppedFrames: number;
}

export function initialState(): UiState {
  return {
    connection: "connecting",
    frame: null,
    occupied: [],
    gridN: 24,
    paused: false,
    activeClass: 0,
    savedDesigns: [],
    lastStatus: null,
    lastError: null,
    droppedFrames: 0,
  };
}

type Listener = (state: UiState) => void;

export class Store {
  state: UiState = initialState();
  private listeners: Listener[] = [];

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private notify(): void {
    for (const fn of this.listeners) fn(this.state);
  }

  setConnection(connection: Connection): void {
    this.state = { ...this.state, connection };
    this.notify();
  }

  setError(message: string | null): void {
    this.state = { ...this.state, lastError: message };
    this.notify();
  }

  markDropped(): void {
    this.state = { ...this.state, droppedFrames: this.state.droppedFrames + 1 };
    this.notify();
  }

  setActiveClass(classId: number): void {
    this.state = { ...this.state, activeClass: classId };
    this.notify();
  }

  applyServerMsg(msg: ServerMsg): void {
    switch (msg.type) {
      case "posterior":
        this.state = { ...this.state, frame: msg, paused: msg.paused };
        break;
      case "geometry":
        this.state = { ...this.state, occupied: (msg as GeometryMsg).occupied, gridN: (msg as GeometryMsg).grid_n };
        break;
      case "status":
        this.state = { ...this.state, lastStatus: msg as StatusMsg };
        break;
      case "ack": {
        const ack = msg as AckMsg;
        if (ack.cmd === "save" && ack.ok && ack.result) {
          this.state = { ...this.state, savedDesigns: [...this.state.savedDesigns, ack.result] };
        }
        if (!ack.ok && ack.error) {
          this.state = { ...this.state, lastError: `${ack.cmd}: ${ack.error}` };
        }
        break;
      }
    }
    this.notify();
  }
}
